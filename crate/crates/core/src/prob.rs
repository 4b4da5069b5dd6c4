//! Validated scalar parameters.
//!
//! These deserialize through `TryFrom<f64>`, so an out-of-range value in a
//! JSON config is reported by serde with its line and column.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(p: f64) -> Result<Self, String> {
        if (0.0..=1.0).contains(&p) {
            Ok(Probability(p))
        } else {
            Err(format!("probability must lie in [0, 1], got {p}"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = String;
    fn try_from(p: f64) -> Result<Self, String> {
        Probability::new(p)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A capture margin, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Margin(f64);

impl Margin {
    pub fn new(p: f64) -> Result<Self, String> {
        if p > 0.0 && p < 1.0 {
            Ok(Margin(p))
        } else {
            Err(format!("capture probability must lie in (0, 1), got {p}"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Margin {
    type Error = String;
    fn try_from(p: f64) -> Result<Self, String> {
        Margin::new(p)
    }
}

impl From<Margin> for f64 {
    fn from(p: Margin) -> f64 {
        p.0
    }
}

/// Odds ratio of the joint census/survey capture table; must be positive
/// and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OddsRatio(f64);

impl OddsRatio {
    pub const INDEPENDENT: OddsRatio = OddsRatio(1.0);

    pub fn new(theta: f64) -> Result<Self, String> {
        if theta > 0.0 && theta.is_finite() {
            Ok(OddsRatio(theta))
        } else {
            Err(format!("odds ratio must be positive and finite, got {theta}"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for OddsRatio {
    type Error = String;
    fn try_from(t: f64) -> Result<Self, String> {
        OddsRatio::new(t)
    }
}

impl From<OddsRatio> for f64 {
    fn from(t: OddsRatio) -> f64 {
        t.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(Probability::new(0.0).is_ok());
        assert!(Probability::new(1.0).is_ok());
        assert!(Probability::new(1.01).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert!(Margin::new(0.0).is_err());
        assert!(Margin::new(0.5).is_ok());
        assert!(OddsRatio::new(0.0).is_err());
        assert!(OddsRatio::new(f64::INFINITY).is_err());
    }

    #[test]
    fn serde_reports_position() {
        let err = serde_json::from_str::<Vec<Probability>>("[0.5,\n 1.5]").unwrap_err();
        assert_eq!(err.line(), 2);
        assert!(err.to_string().contains("[0, 1]"));
    }
}
