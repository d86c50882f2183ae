//! JSON rendering helpers.

use std::time::Instant;

use serde_json::{Map, Number, Value};

use bntune_core::{Instantiation, Region};

/// Finite floats as 17-significant-digit numbers; others as null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    text.parse::<Number>().map(Value::Number).unwrap_or(Value::Null)
}

pub fn instantiation_json(u: &Instantiation) -> Value {
    Value::Object(u.iter().map(|(k, v)| (k.to_string(), num(v))).collect())
}

pub fn region_json(names: &[String], r: &Region) -> Value {
    let map: Map<String, Value> = names
        .iter()
        .zip(r.intervals())
        .map(|(n, iv)| (n.clone(), Value::Array(vec![num(iv.lb), num(iv.ub)])))
        .collect();
    Value::Object(map)
}

/// Wall-clock phases in milliseconds, in the order recorded.
pub struct Timer {
    start: Instant,
    last: Instant,
    laps: Map<String, Value>,
}

impl Timer {
    pub fn start() -> Self {
        let now = Instant::now();
        Timer { start: now, last: now, laps: Map::new() }
    }

    pub fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        let ms = (now - self.last).as_secs_f64() * 1e3;
        self.laps.insert(phase.to_string(), num(ms));
        self.last = now;
    }

    pub fn finish(mut self) -> Value {
        let total = self.start.elapsed().as_secs_f64() * 1e3;
        self.laps.insert("total".into(), num(total));
        Value::Object(self.laps)
    }
}
