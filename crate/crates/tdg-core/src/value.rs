//! Numeric values shared by the sampler, renderer and interpreter.

use serde::{Deserialize, Serialize};

/// A 64-bit integer or a finite 64-bit float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumericValue {
    Int(i64),
    Float(f64),
}

impl NumericValue {
    pub fn as_f64(self) -> f64 {
        match self {
            NumericValue::Int(i) => i as f64,
            NumericValue::Float(f) => f,
        }
    }

    pub fn is_finite(self) -> bool {
        match self {
            NumericValue::Int(_) => true,
            NumericValue::Float(f) => f.is_finite(),
        }
    }

    /// Numeric equality across the Int/Float tag (`2 == 2.0`).
    pub fn num_eq(self, other: NumericValue) -> bool {
        match (self, other) {
            (NumericValue::Int(a), NumericValue::Int(b)) => a == b,
            (a, b) => a.as_f64() == b.as_f64(),
        }
    }

    /// Default rendering: integers without a decimal point, floats with the
    /// shortest decimal that round-trips.
    pub fn render_default(self) -> String {
        match self {
            NumericValue::Int(i) => i.to_string(),
            NumericValue::Float(f) => {
                let s = format!("{f}");
                s
            }
        }
    }

    /// Fixed-decimal rendering; ties round to even on the exact binary value.
    pub fn render_fixed(self, decimals: u8) -> String {
        match self {
            NumericValue::Int(i) => {
                if decimals == 0 {
                    i.to_string()
                } else {
                    format!("{:.*}", decimals as usize, i as f64)
                }
            }
            NumericValue::Float(f) => format!("{:.*}", decimals as usize, f),
        }
    }

    /// Round-half-to-even to an integer. `None` when the value does not fit
    /// in i64 or is not finite.
    pub fn round_ties_even_i64(self) -> Option<i64> {
        match self {
            NumericValue::Int(i) => Some(i),
            NumericValue::Float(f) => {
                if !f.is_finite() {
                    return None;
                }
                let r = f.round_ties_even();
                if r >= -(2f64.powi(63)) && r < 2f64.powi(63) {
                    Some(r as i64)
                } else {
                    None
                }
            }
        }
    }
}

impl std::fmt::Display for NumericValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render_default())
    }
}
