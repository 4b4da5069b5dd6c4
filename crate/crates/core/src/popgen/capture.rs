use serde::{Deserialize, Serialize};

use super::keys::{PostStratumKey, Tenure};
use crate::error::{Error, Result};
use crate::prob::{Margin, OddsRatio, Probability};

/// Joint distribution of the (census, survey) capture indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCells {
    /// In both census and survey.
    pub p11: f64,
    /// Census only.
    pub p10: f64,
    /// Survey only.
    pub p01: f64,
    /// Missed by both.
    pub p00: f64,
}

impl JointCells {
    pub fn odds_ratio(&self) -> f64 {
        (self.p11 * self.p00) / (self.p10 * self.p01)
    }

    /// Maps a uniform draw in `[0, 1)` to a (census, survey) pair.
    #[inline]
    pub fn sample(&self, u: f64) -> (bool, bool) {
        if u < self.p11 {
            (true, true)
        } else if u < self.p11 + self.p10 {
            (true, false)
        } else if u < self.p11 + self.p10 + self.p01 {
            (false, true)
        } else {
            (false, false)
        }
    }
}

/// Solves for the 2x2 joint capture table with census margin `p_c`, survey
/// margin `p_s` and odds ratio `theta`.
///
/// With `x = p11` the odds-ratio constraint is the quadratic
/// `(theta - 1) x^2 - (1 + (theta - 1)(p_c + p_s)) x + theta p_c p_s = 0`;
/// exactly one root lies in the Frechet interval
/// `[max(0, p_c + p_s - 1), min(p_c, p_s)]`.
pub fn joint_cell_probs(p_c: f64, p_s: f64, theta: f64) -> Result<JointCells> {
    if !(p_c > 0.0 && p_c < 1.0 && p_s > 0.0 && p_s < 1.0) {
        return Err(Error::InvalidInput(format!(
            "capture margins must lie in (0, 1), got ({p_c}, {p_s})"
        )));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidInput(format!("odds ratio must be positive, got {theta}")));
    }

    let lo = (p_c + p_s - 1.0).max(0.0);
    let hi = p_c.min(p_s);

    let p11 = if theta == 1.0 {
        p_c * p_s
    } else {
        let a = theta - 1.0;
        let b = -(1.0 + a * (p_c + p_s));
        let c = theta * p_c * p_s;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(Error::Invariant(format!(
                "no real root for margins ({p_c}, {p_s}) and odds ratio {theta}"
            )));
        }
        // q = -(b + sign(b) sqrt(disc)) / 2; roots are q/a and c/q.
        let q = -0.5 * (b - disc.sqrt() * if b < 0.0 { 1.0 } else { -1.0 });
        let roots = [q / a, c / q];
        let tol = 1e-12;
        roots
            .into_iter()
            .filter(|r| r.is_finite() && *r >= lo - tol && *r <= hi + tol)
            .map(|r| r.clamp(lo, hi))
            .next()
            .ok_or_else(|| {
                Error::Invariant(format!(
                    "no feasible root for margins ({p_c}, {p_s}) and odds ratio {theta}"
                ))
            })?
    };

    Ok(JointCells {
        p11,
        p10: p_c - p11,
        p01: p_s - p11,
        p00: 1.0 - p_c - p_s + p11,
    })
}

/// Per-stratum capture parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureParams {
    pub p_census: Margin,
    pub p_survey: Margin,
    #[serde(default = "independent")]
    pub odds_ratio: OddsRatio,
}

fn independent() -> OddsRatio {
    OddsRatio::INDEPENDENT
}

impl CaptureParams {
    pub fn new(p_census: f64, p_survey: f64, odds_ratio: f64) -> Result<Self> {
        Ok(CaptureParams {
            p_census: Margin::new(p_census).map_err(Error::InvalidConfig)?,
            p_survey: Margin::new(p_survey).map_err(Error::InvalidConfig)?,
            odds_ratio: OddsRatio::new(odds_ratio).map_err(Error::InvalidConfig)?,
        })
    }

    pub fn joint(&self) -> Result<JointCells> {
        joint_cell_probs(self.p_census.get(), self.p_survey.get(), self.odds_ratio.get())
    }
}

/// Partial stratum selector; unset fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumSelector {
    #[serde(default)]
    pub age_sex: Option<u8>,
    #[serde(default)]
    pub race: Option<u8>,
    #[serde(default)]
    pub region: Option<u8>,
    #[serde(default)]
    pub place_type: Option<u8>,
    #[serde(default)]
    pub tenure: Option<Tenure>,
}

impl StratumSelector {
    pub fn matches(&self, key: &PostStratumKey) -> bool {
        fn field<T: PartialEq>(want: Option<T>, have: Option<T>) -> bool {
            want.is_none() || want == have
        }
        field(self.age_sex, Some(key.group.age_sex))
            && field(self.race, Some(key.group.race))
            && field(self.region, key.region)
            && field(self.place_type, key.place_type)
            && field(self.tenure, key.tenure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureOverride {
    #[serde(flatten)]
    pub select: StratumSelector,
    #[serde(default)]
    pub p_census: Option<Margin>,
    #[serde(default)]
    pub p_survey: Option<Margin>,
    #[serde(default)]
    pub odds_ratio: Option<OddsRatio>,
}

/// Capture behaviour of every stratum: a default plus ordered overrides,
/// later overrides winning field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureModel {
    #[serde(flatten)]
    pub default: CaptureParams,
    #[serde(default)]
    pub overrides: Vec<CaptureOverride>,
}

impl CaptureModel {
    pub fn uniform(params: CaptureParams) -> Self {
        CaptureModel {
            default: params,
            overrides: Vec::new(),
        }
    }

    pub fn params_for(&self, key: &PostStratumKey) -> CaptureParams {
        let mut p = self.default;
        for o in self.overrides.iter().filter(|o| o.select.matches(key)) {
            if let Some(v) = o.p_census {
                p.p_census = v;
            }
            if let Some(v) = o.p_survey {
                p.p_survey = v;
            }
            if let Some(v) = o.odds_ratio {
                p.odds_ratio = v;
            }
        }
        p
    }
}

/// Opt-in within-stratum heterogeneity: a `fraction` of persons are "hard to
/// count", with both miss probabilities multiplied by `miss_multiplier`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardToCount {
    pub fraction: Probability,
    pub miss_multiplier: f64,
}

impl HardToCount {
    /// Capture margins never drop below this for hard-to-count persons.
    pub const MIN_MARGIN: f64 = 0.01;

    pub fn validate(&self) -> Result<()> {
        if !(self.miss_multiplier >= 1.0 && self.miss_multiplier.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "hard_to_count.miss_multiplier must be >= 1, got {}",
                self.miss_multiplier
            )));
        }
        Ok(())
    }

    pub fn harden(&self, params: CaptureParams) -> Result<CaptureParams> {
        let scale = |p: f64| (1.0 - (1.0 - p) * self.miss_multiplier).clamp(Self::MIN_MARGIN, p);
        CaptureParams::new(
            scale(params.p_census.get()),
            scale(params.p_survey.get()),
            params.odds_ratio.get(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bisection on the odds-ratio constraint over the Frechet interval;
    /// independent of the closed-form root used above.
    fn bisect_p11(p_c: f64, p_s: f64, theta: f64) -> f64 {
        let (mut lo, mut hi) = ((p_c + p_s - 1.0).max(0.0), p_c.min(p_s));
        let g = |x: f64| x * (1.0 - p_c - p_s + x) - theta * (p_c - x) * (p_s - x);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn independence_symmetric() {
        let j = joint_cell_probs(0.5, 0.5, 1.0).unwrap();
        assert_eq!((j.p11, j.p10, j.p01, j.p00), (0.25, 0.25, 0.25, 0.25));
    }

    #[test]
    fn independence_products() {
        let j = joint_cell_probs(0.9, 0.8, 1.0).unwrap();
        for (got, want) in [(j.p11, 0.72), (j.p10, 0.18), (j.p01, 0.08), (j.p00, 0.02)] {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn positive_dependence_frozen_oracle() {
        // 40-digit bisection: p11 = 0.74535299006500494...
        let j = joint_cell_probs(0.9, 0.8, 4.0).unwrap();
        assert!((j.p11 - 0.745_352_990_065_004_9).abs() < 1e-12, "{}", j.p11);
        assert!((j.p11 - bisect_p11(0.9, 0.8, 4.0)).abs() < 1e-12);
        assert!((j.odds_ratio() - 4.0).abs() < 1e-12);
        assert!((j.p10 - 0.154_647_009_934_995_08).abs() < 1e-12);
        assert!((j.p00 - 0.045_352_990_065_004_88).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(joint_cell_probs(0.0, 0.5, 1.0).is_err());
        assert!(joint_cell_probs(0.5, 1.0, 1.0).is_err());
        assert!(joint_cell_probs(0.5, 0.5, 0.0).is_err());
        assert!(joint_cell_probs(0.5, 0.5, -2.0).is_err());
    }

    #[test]
    fn sampling_maps_cells() {
        let j = joint_cell_probs(0.9, 0.8, 1.0).unwrap();
        assert_eq!(j.sample(0.0), (true, true));
        assert_eq!(j.sample(0.75), (true, false));
        assert_eq!(j.sample(0.95), (false, true));
        assert_eq!(j.sample(0.999), (false, false));
    }

    proptest! {
        #[test]
        fn margins_and_odds_ratio_hold(
            p_c in 0.01f64..0.99,
            p_s in 0.01f64..0.99,
            log_theta in -3.0f64..3.0,
        ) {
            let theta = log_theta.exp();
            let j = joint_cell_probs(p_c, p_s, theta).unwrap();
            prop_assert!(j.p11 >= 0.0 && j.p10 >= 0.0 && j.p01 >= 0.0 && j.p00 >= 0.0);
            prop_assert!((j.p11 + j.p10 + j.p01 + j.p00 - 1.0).abs() < 1e-12);
            prop_assert!((j.p11 + j.p10 - p_c).abs() < 1e-12);
            prop_assert!((j.p11 + j.p01 - p_s).abs() < 1e-12);
            // Relative check on the odds ratio where cells are not vanishingly small.
            let denom = j.p10 * j.p01;
            if denom > 1e-6 && j.p11 * j.p00 > 1e-6 {
                prop_assert!((j.odds_ratio() / theta - 1.0).abs() < 1e-9, "or={} theta={}", j.odds_ratio(), theta);
            }
            prop_assert!((j.p11 - bisect_p11(p_c, p_s, theta)).abs() < 1e-12);
        }

        #[test]
        fn p11_increases_with_theta(
            p_c in 0.05f64..0.95,
            p_s in 0.05f64..0.95,
            t in 0.1f64..8.0,
            bump in 0.05f64..2.0,
        ) {
            let a = joint_cell_probs(p_c, p_s, t).unwrap();
            let b = joint_cell_probs(p_c, p_s, t + bump).unwrap();
            prop_assert!(b.p11 > a.p11);
        }

        #[test]
        fn theta_one_is_exact_product(p_c in 0.01f64..0.99, p_s in 0.01f64..0.99) {
            let j = joint_cell_probs(p_c, p_s, 1.0).unwrap();
            prop_assert_eq!(j.p11, p_c * p_s);
        }
    }

    #[test]
    fn overrides_apply_in_order() {
        use crate::popgen::DemographicGroup;
        let model = CaptureModel {
            default: CaptureParams::new(0.95, 0.9, 1.0).unwrap(),
            overrides: vec![
                CaptureOverride {
                    select: StratumSelector {
                        region: Some(0),
                        ..Default::default()
                    },
                    p_census: None,
                    p_survey: None,
                    odds_ratio: Some(OddsRatio::new(4.0).unwrap()),
                },
                CaptureOverride {
                    select: StratumSelector {
                        race: Some(1),
                        ..Default::default()
                    },
                    p_census: Some(Margin::new(0.9).unwrap()),
                    p_survey: None,
                    odds_ratio: None,
                },
            ],
        };
        let k = PostStratumKey::new(DemographicGroup::new(0, 1), Some(0), None, None);
        let p = model.params_for(&k);
        assert_eq!(p.odds_ratio.get(), 4.0);
        assert_eq!(p.p_census.get(), 0.9);
        let k = PostStratumKey::new(DemographicGroup::new(0, 0), Some(1), None, None);
        assert_eq!(model.params_for(&k), model.default);
        // A selector on a pooled dimension does not match.
        let pooled = PostStratumKey::demographic(DemographicGroup::new(0, 0));
        assert_eq!(model.params_for(&pooled).odds_ratio.get(), 1.0);
    }

    #[test]
    fn hardening_lowers_margins() {
        let h = HardToCount {
            fraction: Probability::new(0.1).unwrap(),
            miss_multiplier: 3.0,
        };
        let p = h.harden(CaptureParams::new(0.95, 0.9, 2.0).unwrap()).unwrap();
        assert!((p.p_census.get() - 0.85).abs() < 1e-12);
        assert!((p.p_survey.get() - 0.7).abs() < 1e-12);
        assert_eq!(p.odds_ratio.get(), 2.0);
    }
}
