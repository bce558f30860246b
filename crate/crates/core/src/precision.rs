//! Numeric precision selection for test oracles.
//!
//! The `DOWNSCALE_BENCH_PRECISION` environment variable (`f32` or `f64`,
//! default `f64`) controls the working precision of the reference oracles in
//! [`crate::oracles`]. Production code always computes in f64; the switch
//! exists so the verification suite can be exercised at storage precision.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

pub const ENV_VAR: &str = "DOWNSCALE_BENCH_PRECISION";

/// Read the oracle precision from the environment. Unset means f64.
pub fn oracle_precision() -> Result<Precision> {
    match std::env::var(ENV_VAR) {
        Err(_) => Ok(Precision::F64),
        Ok(v) => match v.as_str() {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::validation(format!(
                "{ENV_VAR} must be f32 or f64, got {other:?}"
            ))),
        },
    }
}

impl Precision {
    /// Round a value to this precision (identity for f64).
    #[inline]
    pub fn quantize(self, x: f64) -> f64 {
        match self {
            Precision::F64 => x,
            Precision::F32 => x as f32 as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_f32_rounds() {
        let x = 0.1_f64;
        assert_ne!(Precision::F32.quantize(x), x);
        assert_eq!(Precision::F64.quantize(x), x);
    }
}
