//! Positive quasi-concave functions on `(0, ∞)`.
//!
//! A function `φ` is quasi-concave when `φ` is non-decreasing and `φ(t)/t` is
//! non-increasing. Every kind here is evaluated internally in log-log
//! coordinates (`u = ln t ↦ ln φ(eᵘ)`), which keeps windows as wide as
//! `10^{±30}` free of overflow. In those coordinates quasi-concavity is the
//! statement that the log-log slope stays inside `[0, 1]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ProbeGrid, Window};
use crate::report::VerificationReport;

/// Relative tolerance for the monotonicity checks.
pub const QC_TOLERANCE: f64 = 1e-12;

/// Settings for the checks that every constructor and composer runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Window on which non-degeneracy is probed and quasi-concavity is gridded.
    pub window: Window,
    pub grid_points: usize,
    /// Threshold below which the four window-edge quantities must fall.
    pub eps_deg: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            window: Window::new(1e-30, 1e30).expect("static window"),
            grid_points: 601,
            eps_deg: 1e-3,
        }
    }
}

impl VerifyConfig {
    pub fn grid(&self) -> ProbeGrid {
        self.window.grid(self.grid_points)
    }
}

#[derive(Clone, Debug)]
struct Composite {
    phi: QuasiConcaveFn,
    phi0: QuasiConcaveFn,
    phi1: QuasiConcaveFn,
}

#[derive(Clone, Debug)]
struct Table {
    log_t: Vec<f64>,
    log_phi: Vec<f64>,
}

impl Table {
    fn slope(&self, seg: usize) -> f64 {
        (self.log_phi[seg + 1] - self.log_phi[seg]) / (self.log_t[seg + 1] - self.log_t[seg])
    }

    fn log_eval(&self, u: f64) -> f64 {
        let n = self.log_t.len();
        // end segments extend linearly
        let seg = match self.log_t.partition_point(|&x| x <= u) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        self.log_phi[seg] + self.slope(seg) * (u - self.log_t[seg])
    }
}

#[derive(Clone, Debug)]
enum Kind {
    PowerLog { theta: f64, a: f64, b: f64 },
    Composite(Arc<Composite>),
    Table(Arc<Table>),
}

/// A positive function on `(0, ∞)` meant to be quasi-concave.
///
/// Cloning is cheap: composite and tabulated kinds share their data.
#[derive(Clone, Debug)]
pub struct QuasiConcaveFn {
    kind: Kind,
}

/// `ln(e + eᵘ)` without overflow for large `|u|`.
fn ln_e_plus_exp(u: f64) -> f64 {
    u.max(1.0) + (-(u - 1.0).abs()).exp().ln_1p()
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("argument must be positive and finite, got {t}")))
    }
}

impl QuasiConcaveFn {
    /// `t^θ · (log(e+t))^a · (log(e+1/t))^{-b}`, rejected unless it passes
    /// [`verify_quasi_concave`](Self::verify_quasi_concave) on the default grid.
    pub fn power_log(theta: f64, a: f64, b: f64) -> Result<Self> {
        let f = Self::power_log_unchecked(theta, a, b)?;
        let report = f.verify_quasi_concave(&VerifyConfig::default().grid())?;
        if !report.passed() {
            return Err(Error::invalid(format!(
                "power_log(theta={theta}, a={a}, b={b}) is not quasi-concave: {} violations",
                report.violations.len()
            )));
        }
        Ok(f)
    }

    pub fn power(theta: f64) -> Result<Self> {
        Self::power_log(theta, 0.0, 0.0)
    }

    /// Power-log function without the quasi-concavity gate; only finiteness is checked.
    pub fn power_log_unchecked(theta: f64, a: f64, b: f64) -> Result<Self> {
        if ![theta, a, b].iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("power_log parameters must be finite"));
        }
        Ok(QuasiConcaveFn {
            kind: Kind::PowerLog { theta, a, b },
        })
    }

    /// Piecewise-linear interpolation of `(t, φ)` pairs in log-log coordinates.
    /// Only the shape of the table is validated; quasi-concavity is left to
    /// [`verify_quasi_concave`](Self::verify_quasi_concave).
    pub fn table(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a table needs at least two points"));
        }
        for &(t, v) in points {
            if !(t > 0.0 && t.is_finite() && v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("table point ({t}, {v}) is not positive and finite")));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("table abscissae must be strictly increasing"));
        }
        Ok(QuasiConcaveFn {
            kind: Kind::Table(Arc::new(Table {
                log_t: points.iter().map(|p| p.0.ln()).collect(),
                log_phi: points.iter().map(|p| p.1.ln()).collect(),
            })),
        })
    }

    /// The composite parameter `φ(φ₀,φ₁)(t) = φ₀(t)·φ(φ₁(t)/φ₀(t))`.
    ///
    /// All three inputs must pass both verifications under `cfg`, and the
    /// result is checked for quasi-concavity before it is returned.
    pub fn compose_parameter(
        phi: &QuasiConcaveFn,
        phi0: &QuasiConcaveFn,
        phi1: &QuasiConcaveFn,
        cfg: &VerifyConfig,
    ) -> Result<Self> {
        let grid = cfg.grid();
        for (name, f) in [("phi", phi), ("phi0", phi0), ("phi1", phi1)] {
            let qc = f.verify_quasi_concave(&grid)?;
            let nd = f.verify_nondegenerate(&cfg.window, cfg.eps_deg)?;
            if !qc.passed() || !nd.passed() {
                return Err(Error::invalid(format!(
                    "{name} failed verification ({} quasi-concavity, {} non-degeneracy violations)",
                    qc.violations.len(),
                    nd.violations.len()
                )));
            }
        }
        let composite = Self::compose_unchecked(phi, phi0, phi1);
        let qc = composite.verify_quasi_concave(&grid)?;
        if !qc.passed() {
            return Err(Error::invalid("composite parameter is not quasi-concave on the grid"));
        }
        Ok(composite)
    }

    pub fn compose_unchecked(phi: &QuasiConcaveFn, phi0: &QuasiConcaveFn, phi1: &QuasiConcaveFn) -> Self {
        QuasiConcaveFn {
            kind: Kind::Composite(Arc::new(Composite {
                phi: phi.clone(),
                phi0: phi0.clone(),
                phi1: phi1.clone(),
            })),
        }
    }

    /// `φ(t)`.
    ///
    /// The composite kind multiplies the values of its parts directly, so it
    /// agrees bit-for-bit with `φ₀(t)·φ(φ₁(t)/φ₀(t))` computed by a caller.
    pub fn eval(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        match &self.kind {
            Kind::Composite(c) => {
                let v0 = c.phi0.eval(t)?;
                let v1 = c.phi1.eval(t)?;
                Ok(v0 * c.phi.eval(v1 / v0)?)
            }
            _ => Ok(self.log_eval(t.ln()).exp()),
        }
    }

    /// `ln φ(eᵘ)`.
    pub fn log_eval(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::PowerLog { theta, a, b } => {
                let mut v = theta * u;
                if *a != 0.0 {
                    v += a * ln_e_plus_exp(u).ln();
                }
                if *b != 0.0 {
                    v -= b * ln_e_plus_exp(-u).ln();
                }
                v
            }
            Kind::Composite(c) => {
                let l0 = c.phi0.log_eval(u);
                let l1 = c.phi1.log_eval(u);
                l0 + c.phi.log_eval(l1 - l0)
            }
            Kind::Table(tab) => tab.log_eval(u),
        }
    }

    /// Parts `(φ, φ₀, φ₁)` of a composite function.
    pub fn parts(&self) -> Option<(&QuasiConcaveFn, &QuasiConcaveFn, &QuasiConcaveFn)> {
        match &self.kind {
            Kind::Composite(c) => Some((&c.phi, &c.phi0, &c.phi1)),
            _ => None,
        }
    }

    pub fn spec(&self) -> FnSpec {
        match &self.kind {
            Kind::PowerLog { theta, a, b } => FnSpec::PowerLog {
                theta: *theta,
                a: *a,
                b: *b,
            },
            Kind::Composite(c) => FnSpec::Composite {
                phi: Box::new(c.phi.spec()),
                phi0: Box::new(c.phi0.spec()),
                phi1: Box::new(c.phi1.spec()),
            },
            Kind::Table(tab) => FnSpec::Table {
                points: tab
                    .log_t
                    .iter()
                    .zip(&tab.log_phi)
                    .map(|(u, l)| [u.exp(), l.exp()])
                    .collect(),
            },
        }
    }

    /// Lists every adjacent grid pair where `φ` decreases or `φ(t)/t`
    /// increases beyond [`QC_TOLERANCE`]. Tabulated functions also get a
    /// per-segment slope check.
    pub fn verify_quasi_concave(&self, grid: &ProbeGrid) -> Result<VerificationReport> {
        if grid.is_empty() {
            return Err(Error::domain("empty probe grid"));
        }
        let mut report = VerificationReport::default();
        let us = grid.log_points();
        let ls: Vec<f64> = us.iter().map(|&u| self.log_eval(u)).collect();
        let mut worst_inc = f64::INFINITY;
        let mut worst_ratio = f64::NEG_INFINITY;
        for j in 0..us.len().saturating_sub(1) {
            let d_phi = ls[j + 1] - ls[j];
            let d_ratio = d_phi - (us[j + 1] - us[j]);
            worst_inc = worst_inc.min(d_phi);
            worst_ratio = worst_ratio.max(d_ratio);
            if d_phi < -QC_TOLERANCE {
                report.violate(j as i64, "phi non-decreasing", -d_phi);
            }
            if d_ratio > QC_TOLERANCE {
                report.violate(j as i64, "phi(t)/t non-increasing", d_ratio);
            }
        }
        if let Kind::Table(tab) = &self.kind {
            for seg in 0..tab.log_t.len() - 1 {
                let s = tab.slope(seg);
                if s < -QC_TOLERANCE {
                    report.violate(seg as i64, "table segment slope >= 0", -s);
                } else if s > 1.0 + QC_TOLERANCE {
                    report.violate(seg as i64, "table segment slope <= 1", s - 1.0);
                }
            }
        }
        report.record("min_log_increment_phi", worst_inc);
        report.record("max_log_increment_phi_over_t", worst_ratio);
        Ok(report)
    }

    /// Finite-window surrogate for the four vanishing limits: `φ(t_min)`,
    /// `t_min/φ(t_min)`, `φ(t_max)/t_max` and `1/φ(t_max)` must all be at
    /// most `eps_deg`.
    pub fn verify_nondegenerate(&self, window: &Window, eps_deg: f64) -> Result<VerificationReport> {
        if !(eps_deg > 0.0) {
            return Err(Error::domain("eps_deg must be positive"));
        }
        let (lo, hi) = (window.log_min(), window.log_max());
        let (l_lo, l_hi) = (self.log_eval(lo), self.log_eval(hi));
        let checks = [
            ("phi(t_min)", l_lo),
            ("t_min/phi(t_min)", lo - l_lo),
            ("phi(t_max)/t_max", l_hi - hi),
            ("1/phi(t_max)", -l_hi),
        ];
        let mut report = VerificationReport::default();
        let limit = eps_deg.ln() + 1e-9;
        for (idx, (name, log_value)) in checks.iter().enumerate() {
            report.record(name, log_value.exp());
            if *log_value > limit {
                report.violate(idx as i64, name, log_value - eps_deg.ln());
            }
        }
        Ok(report)
    }

    /// Grid approximation of `s_φ(t) = sup_u φ(ut)/φ(u)`, the supremum taken
    /// over grid points `u` with `ut` also inside the grid's range.
    pub fn dilation(&self, t: f64, grid: &ProbeGrid) -> Result<f64> {
        check_t(t)?;
        let lt = t.ln();
        let us = grid.log_points();
        let (lo, hi) = match (us.first(), us.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Err(Error::domain("empty probe grid")),
        };
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let best = us
            .iter()
            .filter(|&&u| u + lt >= lo - slack && u + lt <= hi + slack)
            .map(|&u| self.log_eval(u + lt) - self.log_eval(u))
            .fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return Err(Error::domain(format!("dilation argument {t} exceeds the grid span")));
        }
        Ok(best.exp())
    }

    /// Probes `s_φ` at `exp(∓span/2)`: quasi-power when the small probe is at
    /// most `threshold` and the large one at least `1/threshold`.
    pub fn dilation_report(&self, grid: &ProbeGrid, threshold: f64) -> Result<DilationReport> {
        let half = grid.log_span() / 2.0;
        let (t_small, t_big) = ((-half).exp(), half.exp());
        let s_small = self.dilation(t_small, grid)?;
        let s_big = self.dilation(t_big, grid)?;
        Ok(DilationReport {
            t_small,
            s_small,
            t_big,
            s_big,
            threshold,
            is_quasi_power: s_small <= threshold && s_big >= 1.0 / threshold,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    pub t_small: f64,
    pub s_small: f64,
    pub t_big: f64,
    pub s_big: f64,
    pub threshold: f64,
    pub is_quasi_power: bool,
}

/// JSON description of a function, as accepted by the CLI configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FnSpec {
    PowerLog {
        theta: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
    Composite {
        phi: Box<FnSpec>,
        phi0: Box<FnSpec>,
        phi1: Box<FnSpec>,
    },
    Table {
        points: Vec<[f64; 2]>,
    },
}

impl FnSpec {
    /// Builds with every constructor check enabled.
    pub fn build(&self, cfg: &VerifyConfig) -> Result<QuasiConcaveFn> {
        match self {
            FnSpec::PowerLog { theta, a, b } => QuasiConcaveFn::power_log(*theta, *a, *b),
            FnSpec::Composite { phi, phi0, phi1 } => {
                QuasiConcaveFn::compose_parameter(&phi.build(cfg)?, &phi0.build(cfg)?, &phi1.build(cfg)?, cfg)
            }
            FnSpec::Table { points } => Self::table(points),
        }
    }

    /// Builds without quasi-concavity gates, for inspecting candidates that may fail.
    pub fn build_unchecked(&self) -> Result<QuasiConcaveFn> {
        match self {
            FnSpec::PowerLog { theta, a, b } => QuasiConcaveFn::power_log_unchecked(*theta, *a, *b),
            FnSpec::Composite { phi, phi0, phi1 } => Ok(QuasiConcaveFn::compose_unchecked(
                &phi.build_unchecked()?,
                &phi0.build_unchecked()?,
                &phi1.build_unchecked()?,
            )),
            FnSpec::Table { points } => Self::table(points),
        }
    }

    fn table(points: &[[f64; 2]]) -> Result<QuasiConcaveFn> {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
        QuasiConcaveFn::table(&pts)
    }
}
