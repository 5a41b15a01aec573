//! Discretizing sequences and the block partitions built from them.
//!
//! A discretizing sequence `{t_k}` for `φ` has both `φ(t_k)` and `t_k/φ(t_k)`
//! growing by at least `ρ` per step, and every step is tight on one side:
//! `φ(t_{k+1}) ≤ ρ·φ(t_k)` on `Z₁` steps or `φ(t_k)/t_k ≤ ρ·φ(t_{k+1})/t_{k+1}`
//! on `Z₂` steps. Index `0` is anchored at `t = 1`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Window;
use crate::qcfn::QuasiConcaveFn;
use crate::report::VerificationReport;

/// Log-scale tolerance used whenever a value is compared with a sequence
/// point (block membership, closed-interval counts). Boundary values always
/// resolve to the lower block.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Log-scale tolerance of [`DiscretizingSequence::verify`].
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    Z1,
    Z2,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Z1 => "Z1",
            Zone::Z2 => "Z2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    /// Strong-monotonicity constant, `> 1`.
    pub rho: f64,
    /// Relative bisection tolerance in `ln t`.
    pub tolerance: f64,
    /// Maximum allowed miss of the binding constraint, in log units.
    pub tight_tolerance: f64,
    /// Run the quasi-concavity check on the window before building.
    pub verify_input: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            rho: 2.0,
            tolerance: 1e-12,
            tight_tolerance: 1e-9,
            verify_input: true,
        }
    }
}

impl BuildOptions {
    pub fn with_rho(rho: f64) -> Self {
        BuildOptions {
            rho,
            ..Default::default()
        }
    }
}

/// Finite window `k ∈ [k_min, k_max]` of a discretizing sequence.
#[derive(Clone, Debug)]
pub struct DiscretizingSequence {
    k_min: i64,
    log_points: Vec<f64>,
    /// `zones[j]` belongs to the step `k_min + j → k_min + j + 1`.
    zones: Vec<Zone>,
    rho: f64,
    source: QuasiConcaveFn,
}

/// Smallest `u ∈ (lo, limit]` with `g(u) ≥ target`, for non-decreasing `g`.
fn first_crossing(g: &dyn Fn(f64) -> f64, target: f64, lo: f64, limit: f64, tol: f64) -> Option<f64> {
    if g(limit) < target {
        return None;
    }
    let (mut a, mut b) = (lo, limit);
    for _ in 0..400 {
        if b - a <= tol * b.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (a + b);
        if g(mid) >= target {
            b = mid;
        } else {
            a = mid;
        }
    }
    Some(b)
}

/// Largest `u ∈ [limit, hi)` with `g(u) ≤ target`, for non-decreasing `g`.
fn last_crossing(g: &dyn Fn(f64) -> f64, target: f64, limit: f64, hi: f64, tol: f64) -> Option<f64> {
    if g(limit) > target {
        return None;
    }
    let (mut a, mut b) = (limit, hi);
    for _ in 0..400 {
        if b - a <= tol * a.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (a + b);
        if g(mid) <= target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(a)
}

impl DiscretizingSequence {
    /// Greedy construction with default options and the given `ρ`.
    pub fn build(f: &QuasiConcaveFn, window: &Window, rho: f64) -> Result<Self> {
        Self::build_with(f, window, &BuildOptions::with_rho(rho))
    }

    /// Starting from `t_0 = 1`, each next point is the first `t` where both
    /// `φ` and `t/φ` have grown by `ρ`; the constraint that binds there
    /// decides the zone (ties go to `Z₁`). The backward direction mirrors
    /// this. Construction stops at the window edges.
    pub fn build_with(f: &QuasiConcaveFn, window: &Window, opts: &BuildOptions) -> Result<Self> {
        if !(opts.rho > 1.0 && opts.rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be > 1, got {}", opts.rho)));
        }
        if opts.verify_input {
            let report = f.verify_quasi_concave(&window.grid(512))?;
            if !report.passed() {
                return Err(Error::invalid(format!(
                    "function is not quasi-concave on the window ({} violations)",
                    report.violations.len()
                )));
            }
        }
        let ln_rho = opts.rho.ln();
        let l = |u: f64| f.log_eval(u);
        let m = |u: f64| u - f.log_eval(u);
        let (u_lo, u_hi) = (window.log_min(), window.log_max());
        let hi_limit = u_hi + 1e-9 * u_hi.abs().max(1.0);
        let lo_limit = u_lo - 1e-9 * u_lo.abs().max(1.0);
        let tt = opts.tight_tolerance;

        let mut forward = vec![0.0_f64];
        let mut forward_zones = Vec::new();
        loop {
            let u = *forward.last().unwrap();
            let (lt, mt) = (l(u) + ln_rho, m(u) + ln_rho);
            let (Some(ul), Some(um)) = (
                first_crossing(&l, lt, u, hi_limit, opts.tolerance),
                first_crossing(&m, mt, u, hi_limit, opts.tolerance),
            ) else {
                break;
            };
            let next = ul.max(um);
            let k = forward.len() as i64 - 1;
            forward_zones.push(Self::binding_zone((l(next) - lt).abs(), (m(next) - mt).abs(), tt, k)?);
            forward.push(next);
        }

        let mut backward = Vec::new();
        let mut backward_zones = Vec::new();
        let mut u = 0.0_f64;
        loop {
            let (lt, mt) = (l(u) - ln_rho, m(u) - ln_rho);
            let (Some(ul), Some(um)) = (
                last_crossing(&l, lt, lo_limit, u, opts.tolerance),
                last_crossing(&m, mt, lo_limit, u, opts.tolerance),
            ) else {
                break;
            };
            let prev = ul.min(um);
            let k = -(backward.len() as i64) - 1;
            backward_zones.push(Self::binding_zone((l(prev) - lt).abs(), (m(prev) - mt).abs(), tt, k)?);
            backward.push(prev);
            u = prev;
        }

        let k_min = -(backward.len() as i64);
        let mut log_points: Vec<f64> = backward.into_iter().rev().collect();
        log_points.extend(forward);
        let mut zones: Vec<Zone> = backward_zones.into_iter().rev().collect();
        zones.extend(forward_zones);
        Ok(DiscretizingSequence {
            k_min,
            log_points,
            zones,
            rho: opts.rho,
            source: f.clone(),
        })
    }

    fn binding_zone(miss_phi: f64, miss_ratio: f64, tol: f64, k: i64) -> Result<Zone> {
        if miss_phi <= tol {
            Ok(Zone::Z1)
        } else if miss_ratio <= tol {
            Ok(Zone::Z2)
        } else {
            Err(Error::Construction {
                k,
                reason: format!(
                    "neither constraint is tight (misses {miss_phi:.3e} and {miss_ratio:.3e} in log units)"
                ),
            })
        }
    }

    /// Wraps externally supplied points `t_{k_min}, t_{k_min+1}, ...`. Each step
    /// gets the zone whose inequality it satisfies (preferring `Z₁`), or the
    /// nearer miss when neither holds, so [`verify`](Self::verify) can report it.
    pub fn from_points(f: &QuasiConcaveFn, k_min: i64, points: &[f64], rho: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("a discretizing sequence needs at least one point"));
        }
        if points.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::domain("sequence points must be positive and finite"));
        }
        if !(rho > 1.0) {
            return Err(Error::invalid("rho must be > 1"));
        }
        let log_points: Vec<f64> = points.iter().map(|t| t.ln()).collect();
        let ln_rho = rho.ln();
        let zones = log_points
            .windows(2)
            .map(|w| {
                let d_phi = f.log_eval(w[1]) - f.log_eval(w[0]);
                let d_ratio = (w[1] - w[0]) - d_phi;
                if d_phi <= ln_rho + VERIFY_TOL || d_phi - ln_rho <= d_ratio - ln_rho {
                    Zone::Z1
                } else {
                    Zone::Z2
                }
            })
            .collect();
        Ok(DiscretizingSequence {
            k_min,
            log_points,
            zones,
            rho,
            source: f.clone(),
        })
    }

    /// Checks strong monotonicity of `φ(t_k)` and `t_k/φ(t_k)`, the zone
    /// inequalities and the zone bookkeeping against `f`.
    pub fn verify_against(&self, f: &QuasiConcaveFn) -> VerificationReport {
        let mut report = VerificationReport::default();
        let ln_rho = self.rho.ln();
        let mut max_tight: f64 = 0.0;
        let mut min_step = f64::INFINITY;
        for (j, w) in self.log_points.windows(2).enumerate() {
            let k = self.k_min + j as i64;
            if w[1] <= w[0] {
                report.violate(k, "strictly increasing", w[0] - w[1]);
            }
            let d_phi = f.log_eval(w[1]) - f.log_eval(w[0]);
            let d_ratio = (w[1] - w[0]) - d_phi;
            min_step = min_step.min(w[1] - w[0]);
            if d_phi < ln_rho - VERIFY_TOL {
                report.violate(k, "phi(t_k) strongly increasing", ln_rho - d_phi);
            }
            if d_ratio < ln_rho - VERIFY_TOL {
                report.violate(k, "phi(t_k)/t_k strongly decreasing", ln_rho - d_ratio);
            }
            let tight = match self.zones[j] {
                Zone::Z1 => d_phi - ln_rho,
                Zone::Z2 => d_ratio - ln_rho,
            };
            if tight > VERIFY_TOL {
                let check = match self.zones[j] {
                    Zone::Z1 => "Z1: phi(t_k+1) <= rho phi(t_k)",
                    Zone::Z2 => "Z2: phi(t_k)/t_k <= rho phi(t_k+1)/t_k+1",
                };
                report.violate(k, check, tight);
            }
            max_tight = max_tight.max(tight.abs());
        }
        if self.zones.len() + 1 != self.log_points.len() {
            report.violate(self.k_min, "zones cover the window", 0.0);
        }
        report.record("max_tightness_slack", max_tight);
        report.record("min_log_step", min_step);
        report
    }

    pub fn verify(&self) -> VerificationReport {
        self.verify_against(&self.source)
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.log_points.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.log_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_points.is_empty()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn source(&self) -> &QuasiConcaveFn {
        &self.source
    }

    fn slot(&self, k: i64) -> Option<usize> {
        let j = k.checked_sub(self.k_min)?;
        (j >= 0 && (j as usize) < self.log_points.len()).then_some(j as usize)
    }

    pub fn log_point(&self, k: i64) -> Option<f64> {
        self.slot(k).map(|j| self.log_points[j])
    }

    pub fn point(&self, k: i64) -> Option<f64> {
        self.log_point(k).map(f64::exp)
    }

    /// `φ(t_k)`.
    pub fn value(&self, k: i64) -> Option<f64> {
        self.log_point(k).map(|u| self.source.log_eval(u).exp())
    }

    /// Zone of the step `k → k+1`.
    pub fn zone(&self, k: i64) -> Option<Zone> {
        self.slot(k).and_then(|j| self.zones.get(j).copied())
    }

    pub fn log_points(&self) -> &[f64] {
        &self.log_points
    }

    /// `(k, t_k)` in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.log_points
            .iter()
            .enumerate()
            .map(move |(j, u)| (self.k_min + j as i64, u.exp()))
    }

    /// Index `k` with `t_{k-1} < r ≤ t_k` (right-closed), or `None` outside the window.
    pub fn block_index(&self, r: f64) -> Option<i64> {
        let lr = r.ln();
        let j = self.log_points.partition_point(|&u| lr > u + BOUNDARY_TOL);
        (j >= 1 && j < self.log_points.len()).then(|| self.k_min + j as i64)
    }

    /// Assigns each `(i, r_i)` to the block `k` with `t_{k-1} < r_i ≤ t_k`.
    pub fn block_partition(&self, ratios: &[(i64, f64)]) -> BlockPartition {
        let mut blocks: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        let mut unassigned = Vec::new();
        for &(i, r) in ratios {
            match (r > 0.0).then(|| self.block_index(r)).flatten() {
                Some(k) => blocks.entry(k).or_default().push(i),
                None => unassigned.push(i),
            }
        }
        for members in blocks.values_mut() {
            members.sort_unstable();
        }
        unassigned.sort_unstable();
        BlockPartition { blocks, unassigned }
    }

    /// Whether `t_k ≤ r ≤ t_{k+1}` with the shared boundary tolerance.
    pub fn in_closed_step(&self, k: i64, r: f64) -> bool {
        match (self.log_point(k), self.log_point(k + 1)) {
            (Some(lo), Some(hi)) => {
                let lr = r.ln();
                lr >= lo - BOUNDARY_TOL && lr <= hi + BOUNDARY_TOL
            }
            _ => false,
        }
    }

    /// CSV rows `k,t_k,phi,zone`; the zone column holds the zone of the step
    /// leaving `t_k` and is empty on the last row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "t_k", "phi", "zone"])?;
        for (k, t) in self.iter() {
            let phi = self.value(k).unwrap_or(f64::NAN);
            let zone = self.zone(k).map(Zone::as_str).unwrap_or("");
            w.write_record([k.to_string(), t.to_string(), phi.to_string(), zone.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Disjoint blocks `M_k` of inner indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub blocks: BTreeMap<i64, Vec<i64>>,
    pub unassigned: Vec<i64>,
}

impl BlockPartition {
    /// Single block `0` holding every given index.
    pub fn single(indices: impl IntoIterator<Item = i64>) -> Self {
        let mut members: Vec<i64> = indices.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        let mut blocks = BTreeMap::new();
        blocks.insert(0, members);
        BlockPartition {
            blocks,
            unassigned: Vec::new(),
        }
    }

    /// Inverse map `i → k`.
    pub fn index_map(&self) -> BTreeMap<i64, i64> {
        self.blocks
            .iter()
            .flat_map(|(&k, members)| members.iter().map(move |&i| (i, k)))
            .collect()
    }

    pub fn assigned_count(&self) -> usize {
        self.blocks.values().map(Vec::len).sum()
    }
}
