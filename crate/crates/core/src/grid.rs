//! Working windows on `(0, ∞)` and geometric probe grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite working window `[t_min, t_max]` with `t_min < 1 < t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Window {
    t_min: f64,
    t_max: f64,
}

impl Window {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min > 0.0 && t_min < 1.0 && t_max > 1.0) {
            return Err(Error::Window(format!(
                "window must satisfy 0 < t_min < 1 < t_max, got [{t_min}, {t_max}]"
            )));
        }
        Ok(Window { t_min, t_max })
    }

    /// `[base^-radius, base^radius]`.
    pub fn symmetric(base: f64, radius: f64) -> Result<Self> {
        Window::new(base.powf(-radius), base.powf(radius))
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn log_min(&self) -> f64 {
        self.t_min.ln()
    }

    pub fn log_max(&self) -> f64 {
        self.t_max.ln()
    }

    /// The window whose log-extent is twice this one: `[t_min², t_max²]`.
    pub fn doubled(&self) -> Result<Self> {
        Window::new(self.t_min * self.t_min, self.t_max * self.t_max)
    }

    /// Geometric probe grid with `n` points covering the window.
    pub fn grid(&self, n: usize) -> ProbeGrid {
        ProbeGrid::geometric_log(self.log_min(), self.log_max(), n)
    }
}

impl TryFrom<[f64; 2]> for Window {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Window::new(v[0], v[1])
    }
}

impl From<Window> for [f64; 2] {
    fn from(w: Window) -> Self {
        [w.t_min, w.t_max]
    }
}

impl std::fmt::Display for Window {
    /// `TMIN:TMAX`, the form [`FromStr`](std::str::FromStr) accepts.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:e}:{:e}", self.t_min, self.t_max)
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    /// Parses `TMIN:TMAX`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Window(format!("expected TMIN:TMAX, got {s:?}")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Window(format!("cannot parse window bound {x:?}")))
        };
        Window::new(parse(a)?, parse(b)?)
    }
}

/// Strictly increasing positive probe points, stored as natural logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeGrid {
    log_points: Vec<f64>,
}

impl ProbeGrid {
    fn geometric_log(lo: f64, hi: f64, n: usize) -> Self {
        let n = n.max(2);
        let step = (hi - lo) / (n - 1) as f64;
        let log_points = (0..n)
            .map(|j| if j + 1 == n { hi } else { lo + step * j as f64 })
            .collect();
        ProbeGrid { log_points }
    }

    /// `n` geometrically spaced points on `[t_min, t_max]`.
    pub fn geometric(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::domain(format!("bad grid bounds [{t_min}, {t_max}]")));
        }
        Ok(ProbeGrid::geometric_log(t_min.ln(), t_max.ln(), n))
    }

    /// `{base^k : k ∈ [k_min, k_max]}`, with the logarithms computed exactly as `k·ln(base)`.
    pub fn powers(base: f64, k_min: i64, k_max: i64) -> Result<Self> {
        if !(base > 1.0) || k_max <= k_min {
            return Err(Error::domain("powers grid needs base > 1 and k_max > k_min"));
        }
        let lb = base.ln();
        Ok(ProbeGrid {
            log_points: (k_min..=k_max).map(|k| k as f64 * lb).collect(),
        })
    }

    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("empty probe grid"));
        }
        if points.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::domain("probe points must be positive and finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("probe points must be strictly increasing"));
        }
        Ok(ProbeGrid {
            log_points: points.iter().map(|t| t.ln()).collect(),
        })
    }

    pub fn log_points(&self) -> &[f64] {
        &self.log_points
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_points.iter().map(|u| u.exp())
    }

    pub fn len(&self) -> usize {
        self.log_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_points.is_empty()
    }

    /// Log-extent `ln t_last − ln t_first`.
    pub fn log_span(&self) -> f64 {
        self.log_points.last().unwrap_or(&0.0) - self.log_points.first().unwrap_or(&0.0)
    }
}
