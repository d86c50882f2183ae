//! Multivariate polynomials over named parameters with exact rational
//! coefficients, parameter instantiations and axis-aligned boxes of the
//! parameter space.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Parses a plain decimal literal (`0.72`, `-3`, `1e-6`, `7.2E-1`) exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    Some(if negative { -value } else { value })
}

/// The exact rational denoted by the shortest decimal representation of `x`.
///
/// `0.72_f64` maps to `72/100`, not to the binary expansion of the double.
pub fn exact_decimal(x: f64) -> Rational {
    assert!(x.is_finite(), "non-finite value {x}");
    parse_decimal(&format!("{x:e}")).expect("float formatting is a decimal literal")
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A power product of parameters; sorted by name, exponents positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial(vec![(name.to_string(), 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn factors(&self) -> &[(String, u32)] {
        &self.0
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut merged: BTreeMap<&str, u32> = BTreeMap::new();
        for (name, exp) in self.0.iter().chain(other.0.iter()) {
            *merged.entry(name.as_str()).or_default() += exp;
        }
        Monomial(merged.into_iter().map(|(n, e)| (n.to_string(), e)).collect())
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, exp)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if *exp == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{exp}")?;
            }
        }
        Ok(())
    }
}

/// Multivariate polynomial with rational coefficients. Zero coefficients are
/// never stored, so structural equality is polynomial equality.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(name: &str) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(name), Rational::one());
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    /// The value of a constant polynomial, `None` if a parameter occurs.
    pub fn constant_value(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn params(&self) -> BTreeSet<&str> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(n, _)| n.as_str()))
            .collect()
    }

    pub fn degree_in(&self, name: &str) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter())
            .filter(|(n, _)| n == name)
            .map(|(_, e)| *e)
            .max()
            .unwrap_or(0)
    }

    /// Degree at most one in every parameter individually.
    pub fn is_multi_affine(&self) -> bool {
        self.terms.keys().all(|m| m.0.iter().all(|(_, e)| *e <= 1))
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, v)| (m.clone(), v * c)))
    }

    /// Exact substitution: values are read as their shortest decimal
    /// representation, the result is rounded to the nearest double once.
    pub fn eval(&self, u: &Instantiation) -> Result<f64> {
        self.eval_exact(u).map(|r| to_f64(&r))
    }

    pub fn eval_exact(&self, u: &Instantiation) -> Result<Rational> {
        let mut cache: BTreeMap<&str, Rational> = BTreeMap::new();
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (name, exp) in &m.0 {
                if !cache.contains_key(name.as_str()) {
                    let v = u
                        .get(name)
                        .ok_or_else(|| Error::UnboundParameter(name.clone()))?;
                    cache.insert(name.as_str(), exact_decimal(v));
                }
                let base = &cache[name.as_str()];
                for _ in 0..*exp {
                    term *= base;
                }
            }
            total += term;
        }
        Ok(total)
    }

    /// Floating-point substitution through a lookup function.
    pub fn eval_f64<F: Fn(&str) -> Option<f64>>(&self, lookup: F) -> Result<f64> {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut term = to_f64(c);
            for (name, exp) in &m.0 {
                let v = lookup(name).ok_or_else(|| Error::UnboundParameter(name.clone()))?;
                term *= v.powi(*exp as i32);
            }
            total += term;
        }
        Ok(total)
    }

    /// Minimum and maximum over a box. `names` gives the parameter of each
    /// region axis. Multi-affine polynomials attain both at vertices.
    pub fn bounds(&self, names: &[String], region: &Region) -> Result<(f64, f64)> {
        if !self.is_multi_affine() {
            return Err(Error::UnsupportedDegree(self.to_string()));
        }
        let occurring: Vec<&str> = self.params().into_iter().collect();
        let mut axes = Vec::with_capacity(occurring.len());
        for name in &occurring {
            let axis = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnboundParameter(name.to_string()))?;
            axes.push(axis);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for vertex in region.vertices(&axes) {
            let v = self.eval_f64(|name| {
                occurring
                    .iter()
                    .position(|n| *n == name)
                    .map(|i| vertex[i])
            })?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    pub fn compile<F: Fn(&str) -> Option<usize>>(&self, index: F) -> Result<CompiledPoly> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let mut factors = Vec::with_capacity(m.0.len());
            for (name, exp) in &m.0 {
                let idx = index(name).ok_or_else(|| Error::UnboundParameter(name.clone()))?;
                factors.push((idx, *exp));
            }
            terms.push((to_f64(c), factors));
        }
        Ok(CompiledPoly { terms })
    }
}

fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    // finite decimal expansion when the denominator is 2^a 5^b
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den.is_one() {
        let digits = twos.max(fives);
        let scaled = r * Rational::from_integer(num_traits::pow(BigInt::from(10), digits));
        let int = scaled.to_integer();
        let sign = if int.is_negative() { "-" } else { "" };
        let s = format!("{:0>width$}", int.abs().to_string(), width = digits + 1);
        let (a, b) = s.split_at(s.len() - digits);
        let b = b.trim_end_matches('0');
        return format!("{sign}{a}.{b}");
    }
    format!("{}/{}", r.numer(), r.denom())
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut ordered: Vec<(&Monomial, &Rational)> = self.terms.iter().collect();
        ordered.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then_with(|| a.0.cmp(b.0)));
        for (i, (m, c)) in ordered.into_iter().enumerate() {
            let negative = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if negative { " - " } else { " + " })?;
            }
            if m.degree() == 0 {
                f.write_str(&fmt_rational(&abs))?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rational(&abs))?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

/// Floating-point form of a polynomial over indexed parameters, used on hot
/// paths (vertex substitution, numeric reachability).
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, factors)| {
                factors
                    .iter()
                    .fold(*c, |acc, &(i, e)| acc * values[i].powi(e as i32))
            })
            .sum()
    }

    pub fn params(&self) -> BTreeSet<usize> {
        self.terms
            .iter()
            .flat_map(|(_, f)| f.iter().map(|(i, _)| *i))
            .collect()
    }
}

/// Numerator/denominator pair. No cancellation is attempted.
#[derive(Clone, Debug, PartialEq)]
pub struct RatFunc {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl RatFunc {
    pub fn from_poly(p: Polynomial) -> Self {
        RatFunc {
            num: p,
            den: Polynomial::one(),
        }
    }

    pub fn eval(&self, u: &Instantiation) -> Result<f64> {
        let num = self.num.eval_f64(|n| u.get(n))?;
        let den = self.den.eval_f64(|n| u.get(n))?;
        Ok(num / den)
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

/// Assignment of real values to named parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Instantiation(BTreeMap<String, f64>);

impl Instantiation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Values in the order of `names`.
    pub fn values_for(&self, names: &[String]) -> Result<Vec<f64>> {
        names
            .iter()
            .map(|n| self.get(n).ok_or_else(|| Error::UnboundParameter(n.clone())))
            .collect()
    }

    pub fn from_values(names: &[String], values: &[f64]) -> Self {
        names
            .iter()
            .cloned()
            .zip(values.iter().copied())
            .collect()
    }
}

impl FromIterator<(String, f64)> for Instantiation {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Instantiation(iter.into_iter().collect())
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Instantiation {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Self {
        Instantiation(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lb: f64,
    pub ub: f64,
}

impl Interval {
    pub fn new(lb: f64, ub: f64) -> Self {
        Interval { lb, ub }
    }

    pub fn width(&self) -> f64 {
        self.ub - self.lb
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lb <= x && x <= self.ub
    }

    pub fn midpoint(&self) -> f64 {
        self.lb + (self.ub - self.lb) / 2.0
    }
}

/// Axis-aligned closed box; axis `i` belongs to the `i`-th parameter of the
/// owning model.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    intervals: Vec<Interval>,
}

impl Region {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        for (i, iv) in intervals.iter().enumerate() {
            if !(iv.lb.is_finite() && iv.ub.is_finite()) || iv.lb > iv.ub {
                return Err(Error::BadRegion(format!(
                    "axis {i}: [{}, {}] is not an interval",
                    iv.lb, iv.ub
                )));
            }
        }
        Ok(Region { intervals })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        Self::new(bounds.iter().map(|&(l, u)| Interval::new(l, u)).collect())
    }

    /// The degenerate box holding a single point.
    pub fn point(values: &[f64]) -> Self {
        Region {
            intervals: values.iter().map(|&v| Interval::new(v, v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn interval(&self, axis: usize) -> Interval {
        self.intervals[axis]
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim() && self.intervals.iter().zip(point).all(|(iv, &x)| iv.contains(x))
    }

    pub fn is_within(&self, outer: &Region, tol: f64) -> bool {
        self.dim() == outer.dim()
            && self
                .intervals
                .iter()
                .zip(&outer.intervals)
                .all(|(a, b)| a.lb >= b.lb - tol && a.ub <= b.ub + tol)
    }

    /// Intersection, `None` when empty on some axis.
    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let intervals: Vec<Interval> = self
            .intervals
            .iter()
            .zip(&other.intervals)
            .map(|(a, b)| Interval::new(a.lb.max(b.lb), a.ub.min(b.ub)))
            .collect();
        intervals.iter().all(|iv| iv.lb <= iv.ub).then_some(Region { intervals })
    }

    pub fn bisect(&self, axis: usize) -> (Region, Region) {
        let mid = self.intervals[axis].midpoint();
        let mut lower = self.clone();
        let mut upper = self.clone();
        lower.intervals[axis].ub = mid;
        upper.intervals[axis].lb = mid;
        (lower, upper)
    }

    /// Volume measured in coordinates normalized to `reference`; axes that
    /// are degenerate in `reference` do not count.
    pub fn normalized_volume(&self, reference: &Region) -> f64 {
        self.intervals
            .iter()
            .zip(&reference.intervals)
            .filter(|(_, r)| r.width() > 0.0)
            .map(|(a, r)| a.width() / r.width())
            .product()
    }

    /// Vertices of the sub-box spanned by `axes`; coordinates are listed in
    /// the order of `axes`. Degenerate axes yield repeated vertices.
    pub fn vertices<'a>(&'a self, axes: &'a [usize]) -> impl Iterator<Item = Vec<f64>> + 'a {
        let count = 1usize << axes.len();
        (0..count).map(move |mask| {
            axes.iter()
                .enumerate()
                .map(|(bit, &axis)| {
                    let iv = self.intervals[axis];
                    if mask >> bit & 1 == 1 {
                        iv.ub
                    } else {
                        iv.lb
                    }
                })
                .collect()
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.intervals
            .iter()
            .map(|iv| {
                if iv.width() > 0.0 {
                    rng.gen_range(iv.lb..=iv.ub)
                } else {
                    iv.lb
                }
            })
            .collect()
    }

    /// Lexicographic order on (lb, ub) per axis.
    pub fn cmp_bounds(&self, other: &Region) -> Ordering {
        for (a, b) in self.intervals.iter().zip(&other.intervals) {
            let ord = a.lb.total_cmp(&b.lb).then(a.ub.total_cmp(&b.ub));
            if ord != Ordering::Equal {
                return ord;
            }
        }
        self.dim().cmp(&other.dim())
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|iv| format!("[{}, {}]", iv.lb, iv.ub))
            .collect();
        f.write_str(&parts.join(" x "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Rational {
        parse_decimal(s).unwrap()
    }

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(q("0.72"), Rational::new(72.into(), 100.into()));
        assert_eq!(q("1e-6"), Rational::new(1.into(), 1_000_000.into()));
        assert_eq!(q("-2.5E1"), Rational::from_integer((-25).into()));
        assert_eq!(q(".5"), Rational::new(1.into(), 2.into()));
        assert!(parse_decimal("abc").is_none());
        assert!(parse_decimal("1.2.3").is_none());
        assert_eq!(exact_decimal(0.28) + exact_decimal(0.72), Rational::one());
    }

    #[test]
    fn eval_matches_hand_computation() {
        // 2 x1^2 + x2 at (3, 2)
        let x1 = Polynomial::var("x1");
        let f = &(&x1 * &x1).scale(&q("2")) + &Polynomial::var("x2");
        let u: Instantiation = [("x1", 3.0), ("x2", 2.0)].into_iter().collect();
        assert_eq!(f.eval(&u).unwrap(), 20.0);
        assert_eq!(Polynomial::one().eval(&u).unwrap(), 1.0);
        let one_minus_p = &Polynomial::one() - &Polynomial::var("p");
        let u: Instantiation = [("p", 0.72)].into_iter().collect();
        assert_eq!(one_minus_p.eval(&u).unwrap(), 0.28);
    }

    #[test]
    fn eval_reports_unbound_parameter() {
        let f = Polynomial::var("z");
        assert!(matches!(f.eval(&Instantiation::new()), Err(Error::UnboundParameter(n)) if n == "z"));
    }

    #[test]
    fn bounds_over_boxes() {
        let x = Polynomial::var("x");
        let f = &Polynomial::constant(q("0.3")) + &x.scale(&q("0.4"));
        let r = Region::from_bounds(&[(0.5, 1.0)]).unwrap();
        let (lo, hi) = f.bounds(&names(&["x"]), &r).unwrap();
        assert!((lo - 0.5).abs() < 1e-15 && (hi - 0.7).abs() < 1e-15);

        let xy = &Polynomial::var("x") * &Polynomial::var("y");
        let r = Region::from_bounds(&[(0.2, 0.5), (0.1, 0.3)]).unwrap();
        let (lo, hi) = xy.bounds(&names(&["x", "y"]), &r).unwrap();
        assert!((lo - 0.02).abs() < 1e-15 && (hi - 0.15).abs() < 1e-15);

        let f = &Polynomial::one() - &Polynomial::var("t");
        let r = Region::from_bounds(&[(0.0075, 0.0125)]).unwrap();
        let (lo, hi) = f.bounds(&names(&["t"]), &r).unwrap();
        assert!((lo - 0.9875).abs() < 1e-15 && (hi - 0.9925).abs() < 1e-15);
    }

    #[test]
    fn bounds_rejects_higher_degree() {
        let x = Polynomial::var("x");
        let r = Region::from_bounds(&[(0.1, 0.2)]).unwrap();
        assert!(matches!((&x * &x).bounds(&names(&["x"]), &r), Err(Error::UnsupportedDegree(_))));
    }

    #[test]
    fn rendering_orders_by_degree() {
        let p = Polynomial::var("p");
        let qv = Polynomial::var("q");
        let f = &(&(&p * &qv).scale(&q("34900")) + &qv.scale(&q("8758"))) + &Polynomial::constant(q("361"));
        assert_eq!(f.to_string(), "34900*p*q + 8758*q + 361");
        let g = &Polynomial::one() - &p;
        assert_eq!(g.to_string(), "-p + 1");
        assert_eq!(Polynomial::constant(q("0.75")).to_string(), "0.75");
        assert_eq!(Polynomial::constant(Rational::new(1.into(), 3.into())).to_string(), "1/3");
        assert_eq!(Polynomial::zero().to_string(), "0");
    }

    #[test]
    fn cancellation_keeps_canonical_form() {
        let p = Polynomial::var("p");
        let z = &p - &p;
        assert!(z.is_zero());
        assert_eq!(z, Polynomial::zero());
        let s = &(&Polynomial::one() - &p) + &p;
        assert!(s.is_one());
    }

    #[test]
    fn region_helpers() {
        let r = Region::from_bounds(&[(0.0, 1.0), (0.5, 0.5)]).unwrap();
        assert_eq!(r.vertices(&[0, 1]).count(), 4);
        let (a, b) = r.bisect(0);
        assert_eq!(a.interval(0).ub, 0.5);
        assert_eq!(b.interval(0).lb, 0.5);
        assert_eq!(a.normalized_volume(&r), 0.5);
        assert!(Region::from_bounds(&[(0.6, 0.5)]).is_err());
    }

    fn arb_multi_affine() -> impl Strategy<Value = Polynomial> {
        // subsets of {a, b, c} with small integer / 100 coefficients
        prop::collection::vec((0u8..8, -100i64..100), 1..6).prop_map(|terms| {
            let vars = ["a", "b", "c"];
            Polynomial::from_terms(terms.into_iter().map(|(mask, c)| {
                let mut m = Polynomial::one();
                for (i, v) in vars.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        m = &m * &Polynomial::var(v);
                    }
                }
                let (mono, _) = m.terms().next().map(|(k, v)| (k.clone(), v.clone())).unwrap();
                (mono, Rational::new(c.into(), 100.into()))
            }))
        })
    }

    fn arb_box() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3)
            .prop_map(|v| v.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn bounds_enclose_interior_points(f in arb_multi_affine(), bx in arb_box(), seed in any::<u64>()) {
            use rand::SeedableRng;
            let ns = names(&["a", "b", "c"]);
            let r = Region::from_bounds(&bx).unwrap();
            let (lo, hi) = f.bounds(&ns, &r).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let pt = r.sample(&mut rng);
                let v = f.eval_f64(|n| ns.iter().position(|x| x == n).map(|i| pt[i])).unwrap();
                prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
            }
        }

        #[test]
        fn arithmetic_agrees_with_evaluation(f in arb_multi_affine(), g in arb_multi_affine(),
                                             x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
            let look = |n: &str| match n { "a" => Some(x), "b" => Some(y), _ => Some(z) };
            let fv = f.eval_f64(look).unwrap();
            let gv = g.eval_f64(look).unwrap();
            prop_assert!(((&f * &g).eval_f64(look).unwrap() - fv * gv).abs() < 1e-12);
            prop_assert!(((&f + &g).eval_f64(look).unwrap() - (fv + gv)).abs() < 1e-12);
            prop_assert!((f.scale(&Rational::new(3.into(), 7.into())).eval_f64(look).unwrap() - fv * 3.0 / 7.0).abs() < 1e-12);
        }
    }
}
