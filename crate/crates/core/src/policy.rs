use serde::{Deserialize, Serialize};

/// Hard range of the social event intensity.
pub const THETA_S_RANGE: (f64, f64) = (0.8, 1.5);
/// Hard range of the home-visit eligibility threshold.
pub const THETA_T_RANGE: (f64, f64) = (0.4, 0.6);
/// Hard range of the home-visit success probability.
pub const THETA_P_RANGE: (f64, f64) = (0.15, 0.5);

/// Resolution parameters are stored at. Repeated fixed-size steps would
/// otherwise accumulate representation error and miss their bounds.
const GRID: f64 = 1e9;

pub(crate) fn snap(x: f64) -> f64 {
    (x * GRID).round() / GRID
}

/// The three intervention levers.
///
/// Every constructor clips into the hard ranges, so a value of this type is
/// always valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta_s: f64,
    pub theta_t: f64,
    pub theta_p: f64,
}

impl PolicyParams {
    pub fn new(theta_s: f64, theta_t: f64, theta_p: f64) -> Self {
        Self::within(theta_s, theta_t, theta_p, &ParamBounds::default())
    }

    /// Clips into `bounds` (which are themselves inside the hard ranges).
    pub fn within(theta_s: f64, theta_t: f64, theta_p: f64, bounds: &ParamBounds) -> Self {
        PolicyParams {
            theta_s: snap(clamp_nan(theta_s, bounds.theta_s)),
            theta_t: snap(clamp_nan(theta_t, bounds.theta_t)),
            theta_p: snap(clamp_nan(theta_p, bounds.theta_p)),
        }
    }

    /// The static policy: events at intensity 1.0, visits above 0.6 with
    /// success probability 0.3.
    pub fn fixed() -> Self {
        PolicyParams {
            theta_s: 1.0,
            theta_t: 0.6,
            theta_p: 0.3,
        }
    }

    pub fn is_within(&self, bounds: &ParamBounds) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
        inside(self.theta_s, bounds.theta_s)
            && inside(self.theta_t, bounds.theta_t)
            && inside(self.theta_p, bounds.theta_p)
    }
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self::fixed()
    }
}

fn clamp_nan(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if x.is_nan() {
        lo
    } else {
        x.clamp(lo, hi)
    }
}

/// Closed intervals the controllers keep each lever in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamBounds {
    pub theta_s: (f64, f64),
    pub theta_t: (f64, f64),
    pub theta_p: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            theta_s: THETA_S_RANGE,
            theta_t: THETA_T_RANGE,
            theta_p: THETA_P_RANGE,
        }
    }
}

impl ParamBounds {
    /// True when every interval is non-empty and nested in its hard range.
    pub fn is_valid(&self) -> bool {
        let nested = |(lo, hi): (f64, f64), (hlo, hhi): (f64, f64)| lo <= hi && lo >= hlo && hi <= hhi;
        nested(self.theta_s, THETA_S_RANGE)
            && nested(self.theta_t, THETA_T_RANGE)
            && nested(self.theta_p, THETA_P_RANGE)
    }
}
