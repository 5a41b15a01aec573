//! K-functionals: the min-formula surrogate and an exact small-support oracle
//! for weighted `ℓq` couples, the exact `(L¹, L∞)` formula, and the split
//! formula for couples of block spaces.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::discretize::DiscretizingSequence;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::grid::ProbeGrid;
use crate::report::VerificationReport;
use crate::spaces::BlockSpace;
use crate::vector::SeqVector;

/// Default support cap of [`k_exact_oracle`].
pub const ORACLE_CAP: usize = 8;

/// Relative slack used when deciding `ratio ≤ t` in the block split.
pub const SPLIT_TOL: f64 = 1e-9;

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("K-functional needs t > 0, got {t}")))
    }
}

/// The couple `(ℓq(v), ℓq(w))` over a finite index window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSeqCouple {
    q: Exponent,
    offset: i64,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl WeightedSeqCouple {
    /// Weights `v[j], w[j]` belong to index `offset + j`.
    pub fn new(q: Exponent, offset: i64, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let c = WeightedSeqCouple { q, offset, v, w };
        c.validate()?;
        Ok(c)
    }

    pub fn from_fn(q: Exponent, k_min: i64, k_max: i64, weights: impl Fn(i64) -> (f64, f64)) -> Result<Self> {
        if k_max < k_min {
            return Err(Error::invalid("empty couple window"));
        }
        let (v, w) = (k_min..=k_max).map(weights).unzip();
        Self::new(q, k_min, v, w)
    }

    /// `(ℓq, ℓq(1/t̃_i))` over the window of `seq`.
    pub fn sequence_couple(q: Exponent, seq: &DiscretizingSequence) -> Result<Self> {
        Self::from_fn(q, seq.k_min(), seq.k_max(), |i| (1.0, (-seq.log_point(i).unwrap()).exp()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.len() != self.w.len() {
            return Err(Error::invalid("weight sequences v and w must share one window"));
        }
        if self.v.is_empty() {
            return Err(Error::invalid("empty couple window"));
        }
        if self.v.iter().chain(&self.w).any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::invalid("couple weights must be positive and finite"));
        }
        Ok(())
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn window(&self) -> (i64, i64) {
        (self.offset, self.offset + self.v.len() as i64 - 1)
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let (lo, hi) = self.window();
        lo..=hi
    }

    pub fn weights(&self, i: i64) -> Option<(f64, f64)> {
        let j = usize::try_from(i.checked_sub(self.offset)?).ok()?;
        Some((*self.v.get(j)?, *self.w.get(j)?))
    }

    /// `v_i / w_i`.
    pub fn ratio(&self, i: i64) -> Option<f64> {
        self.weights(i).map(|(v, w)| v / w)
    }

    pub fn check_support(&self, a: &SeqVector) -> Result<()> {
        match a.support().find(|&i| self.weights(i).is_none()) {
            Some(i) => {
                let (lo, hi) = self.window();
                Err(Error::Contract(format!("index {i} lies outside the couple window [{lo}, {hi}]")))
            }
            None => Ok(()),
        }
    }

    /// `(|a_i| v_i, |a_i| w_i)` over the support.
    fn scaled_weights(&self, a: &SeqVector) -> Result<Vec<(i64, f64, f64)>> {
        self.check_support(a)?;
        Ok(a.iter()
            .map(|(i, x)| {
                let (v, w) = self.weights(i).unwrap();
                (i, x.abs() * v, x.abs() * w)
            })
            .collect())
    }
}

/// `F(t) = ‖a_i · min(v_i, t w_i)‖_q`, equivalent to `K(t, a)` within a factor 2.
pub fn k_min_formula(c: &WeightedSeqCouple, a: &SeqVector, t: f64) -> Result<f64> {
    check_t(t)?;
    let terms = c.scaled_weights(a)?;
    Ok(c.q.norm(terms.iter().map(|&(_, alpha, beta)| alpha.min(t * beta))))
}

/// Exact K value with the optimal split `b = (1 − λ)a`, `c = λa`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub lambda: BTreeMap<i64, f64>,
}

pub fn k_exact_oracle(c: &WeightedSeqCouple, a: &SeqVector, t: f64) -> Result<OracleResult> {
    k_exact_oracle_capped(c, a, t, ORACLE_CAP)
}

/// Minimizes `‖(1 − λ)a‖_{ℓq(v)} + t‖λa‖_{ℓq(w)}` over `λ ∈ [0, 1]^n`.
///
/// `q = 1` splits coordinate-wise. `q = ∞` reduces to a one-dimensional convex
/// piecewise-linear problem solved at its breakpoints. Otherwise the optimum
/// lies on the Pareto front of `(‖b‖, ‖c‖)`, parameterized by one scalar `σ`
/// with `λ_i = 1/(1 + e^σ (w_i/v_i)^{q/(q-1)})`, along which the objective is
/// unimodal.
pub fn k_exact_oracle_capped(c: &WeightedSeqCouple, a: &SeqVector, t: f64, cap: usize) -> Result<OracleResult> {
    check_t(t)?;
    if a.support_len() > cap {
        return Err(Error::Capacity {
            support: a.support_len(),
            cap,
        });
    }
    let terms = c.scaled_weights(a)?;
    if terms.is_empty() {
        return Ok(OracleResult {
            value: 0.0,
            lambda: BTreeMap::new(),
        });
    }
    let q = c.q;
    let objective = |lambda: &[f64]| {
        let b = q.norm(terms.iter().zip(lambda).map(|(&(_, al, _), l)| al * (1.0 - l)));
        let cc = q.norm(terms.iter().zip(lambda).map(|(&(_, _, be), l)| be * l));
        b + t * cc
    };

    let lambda: Vec<f64> = if q.value() == 1.0 {
        terms.iter().map(|&(_, al, be)| if t * be < al { 1.0 } else { 0.0 }).collect()
    } else if q.is_infinite() {
        linf_split(&terms, t)
    } else {
        frontier_split(&terms, q.value(), &objective)
    };

    // every vertex of the cube is feasible; keep the best of them too
    let n = terms.len();
    let mut best = (objective(&lambda), lambda);
    for mask in 0u32..(1 << n) {
        let vertex: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
        let val = objective(&vertex);
        if val < best.0 {
            best = (val, vertex);
        }
    }
    Ok(OracleResult {
        value: best.0,
        lambda: terms.iter().map(|&(i, _, _)| i).zip(best.1).collect(),
    })
}

/// For `q = ∞`, fixing `s = ‖b‖` leaves the smallest `c` at `λ_i = (1 − s/α_i)^+`,
/// so `K = min_s s + t·max_i β_i (1 − s/α_i)^+`.
fn linf_split(terms: &[(i64, f64, f64)], t: f64) -> Vec<f64> {
    let g = |s: f64| {
        s + t * terms
            .iter()
            .map(|&(_, al, be)| be * (1.0 - s / al).max(0.0))
            .fold(0.0, f64::max)
    };
    let s_max = terms.iter().map(|&(_, al, _)| al).fold(0.0, f64::max);
    let mut candidates = vec![0.0, s_max];
    for (j, &(_, al, be)) in terms.iter().enumerate() {
        candidates.push(al);
        for &(_, al2, be2) in &terms[j + 1..] {
            let slope_gap = be / al - be2 / al2;
            if slope_gap != 0.0 {
                let s = (be - be2) / slope_gap;
                if (0.0..=s_max).contains(&s) {
                    candidates.push(s);
                }
            }
        }
    }
    let s = candidates
        .into_iter()
        .map(|s| (g(s), s))
        .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc })
        .1;
    terms.iter().map(|&(_, al, _)| (1.0 - s / al).clamp(0.0, 1.0)).collect()
}

fn frontier_split(terms: &[(i64, f64, f64)], q: f64, objective: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let conj = q / (q - 1.0);
    // ln of (w_i/v_i)^{q'}; the |a_i| factors cancel
    let shifts: Vec<f64> = terms.iter().map(|&(_, al, be)| conj * (be / al).ln()).collect();
    let lambda_at = |sigma: f64| -> Vec<f64> {
        shifts
            .iter()
            .map(|c| {
                let z = sigma + c;
                if z > 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                }
            })
            .collect()
    };
    let f = |sigma: f64| objective(&lambda_at(sigma));

    // coarse scan dense around every coordinate's transition
    let mut scan: Vec<f64> = shifts
        .iter()
        .flat_map(|c| (-80..=80).map(move |d| -c + 0.5 * f64::from(d)))
        .collect();
    scan.sort_by(f64::total_cmp);
    scan.dedup();
    let values: Vec<f64> = scan.iter().map(|&s| f(s)).collect();
    let j = values
        .iter()
        .enumerate()
        .fold(0, |best, (j, v)| if *v < values[best] { j } else { best });
    let (mut lo, mut hi) = (scan[j.saturating_sub(1)], scan[(j + 1).min(scan.len() - 1)]);

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let best = [(values[j], scan[j]), (f(mid), mid)]
        .into_iter()
        .fold((f64::INFINITY, mid), |acc, x| if x.0 < acc.0 { x } else { acc });
    lambda_at(best.1)
}

/// Non-negative step function on `(0, s_n)`, zero beyond.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breaks: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    /// `breaks = [0, s_1, ..., s_n]`, `levels[j]` on `(s_j, s_{j+1})`.
    pub fn new(breaks: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breaks.first() != Some(&0.0) || breaks.len() != levels.len() + 1 {
            return Err(Error::invalid("step function needs breaks 0 = s_0 < ... < s_n and n levels"));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid("step function breaks must be finite and strictly increasing"));
        }
        if levels.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("step function levels must be finite and non-negative"));
        }
        Ok(StepFunction { breaks, levels })
    }

    /// Consecutive intervals given as `(length, level)`.
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        let mut breaks = vec![0.0];
        let mut acc = 0.0;
        for &(len, _) in intervals {
            acc += len;
            breaks.push(acc);
        }
        Self::new(breaks, intervals.iter().map(|&(_, l)| l).collect())
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breaks.windows(2).zip(&self.levels).map(|(w, &l)| (w[1] - w[0], l))
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.breaks.clone(), self.levels.iter().map(|l| l * lambda).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|&l| l == 0.0)
    }
}

/// `K(t, f; L¹, L∞) = ∫₀ᵗ f*`, with `f*` assembled by sorting the levels.
pub fn k_l1_linf(f: &StepFunction, t: f64) -> Result<f64> {
    check_t(t)?;
    let mut pieces: Vec<(f64, f64)> = f.intervals().collect();
    pieces.sort_by(|x, y| y.1.total_cmp(&x.1));
    let (mut left, mut total) = (t, 0.0);
    for (len, level) in pieces {
        if left <= 0.0 {
            break;
        }
        let used = len.min(left);
        total += used * level;
        left -= used;
    }
    Ok(total)
}

/// `‖a χ_Ω‖_{E₀} + t ‖a χ_{Ω^c}‖_{E₁}` with `Ω = {i : ratio_i ≤ t}`.
pub fn k_block_couple(
    a: &SeqVector,
    t: f64,
    space0: &BlockSpace,
    space1: &BlockSpace,
    ratio: &BTreeMap<i64, f64>,
) -> Result<f64> {
    check_t(t)?;
    let mut omega = SeqVector::new();
    let mut rest = SeqVector::new();
    for (i, x) in a.iter() {
        let r = ratio
            .get(&i)
            .copied()
            .filter(|r| *r > 0.0 && r.is_finite())
            .ok_or_else(|| Error::domain(format!("split ratio undefined at index {i}")))?;
        if r <= t * (1.0 + SPLIT_TOL) {
            omega.set(i, x);
        } else {
            rest.set(i, x);
        }
    }
    Ok(space0.norm(&omega)? + t * space1.norm(&rest)?)
}

/// A K-functional of a fixed couple, evaluated at one element and one `t`.
pub trait KFunctional: Sync {
    type Element: Sync;

    fn k(&self, x: &Self::Element, t: f64) -> Result<f64>;

    /// Rejects elements that do not live in the couple.
    fn check(&self, _x: &Self::Element) -> Result<()> {
        Ok(())
    }
}

pub struct MinFormula<'a>(pub &'a WeightedSeqCouple);

impl KFunctional for MinFormula<'_> {
    type Element = SeqVector;

    fn k(&self, x: &SeqVector, t: f64) -> Result<f64> {
        k_min_formula(self.0, x, t)
    }

    fn check(&self, x: &SeqVector) -> Result<()> {
        self.0.check_support(x)
    }
}

pub struct ExactOracle<'a> {
    pub couple: &'a WeightedSeqCouple,
    pub cap: usize,
}

impl<'a> ExactOracle<'a> {
    pub fn new(couple: &'a WeightedSeqCouple) -> Self {
        ExactOracle {
            couple,
            cap: ORACLE_CAP,
        }
    }
}

impl KFunctional for ExactOracle<'_> {
    type Element = SeqVector;

    fn k(&self, x: &SeqVector, t: f64) -> Result<f64> {
        k_exact_oracle_capped(self.couple, x, t, self.cap).map(|r| r.value)
    }

    fn check(&self, x: &SeqVector) -> Result<()> {
        self.couple.check_support(x)?;
        if x.support_len() > self.cap {
            return Err(Error::Capacity {
                support: x.support_len(),
                cap: self.cap,
            });
        }
        Ok(())
    }
}

pub struct L1LInf;

impl KFunctional for L1LInf {
    type Element = StepFunction;

    fn k(&self, x: &StepFunction, t: f64) -> Result<f64> {
        k_l1_linf(x, t)
    }
}

pub struct BlockCouple<'a> {
    pub space0: &'a BlockSpace,
    pub space1: &'a BlockSpace,
    pub ratio: &'a BTreeMap<i64, f64>,
}

impl KFunctional for BlockCouple<'_> {
    type Element = SeqVector;

    fn k(&self, x: &SeqVector, t: f64) -> Result<f64> {
        k_block_couple(x, t, self.space0, self.space1, self.ratio)
    }

    fn check(&self, x: &SeqVector) -> Result<()> {
        match x.support().find(|i| !self.ratio.contains_key(i)) {
            Some(i) => Err(Error::Contract(format!("index {i} has no split ratio in this block couple"))),
            None => Ok(()),
        }
    }
}

/// Checks a sampled K-profile `(t_j, K(t_j))` for the shape every
/// K-functional has: non-decreasing, concave, and `K(t)/t` non-increasing.
/// Slack is relative to the values involved.
pub fn shape_report(profile: &[(f64, f64)], tol: f64) -> VerificationReport {
    let mut report = VerificationReport::default();
    for (j, w) in profile.windows(2).enumerate() {
        let ((t0, k0), (t1, k1)) = (w[0], w[1]);
        let scale = k0.abs().max(k1.abs());
        if k1 < k0 - tol * scale {
            report.violate(j as i64, "K non-decreasing", (k0 - k1) / scale);
        }
        let (r0, r1) = (k0 / t0, k1 / t1);
        if r1 > r0 + tol * r0.abs().max(r1.abs()) {
            report.violate(j as i64, "K(t)/t non-increasing", (r1 - r0) / r0.abs().max(r1.abs()));
        }
    }
    for (j, w) in profile.windows(3).enumerate() {
        let ((t0, k0), (t1, k1), (t2, k2)) = (w[0], w[1], w[2]);
        let chord = k0 + (k2 - k0) * (t1 - t0) / (t2 - t0);
        if k1 < chord - tol * chord.abs() {
            report.violate(j as i64 + 1, "K concave", (chord - k1) / chord.abs());
        }
    }
    report
}

/// `(t, K(t))` over a probe grid.
pub fn k_profile<K: KFunctional>(engine: &K, x: &K::Element, grid: &ProbeGrid) -> Result<Vec<(f64, f64)>> {
    engine.check(x)?;
    grid.points().map(|t| Ok((t, engine.k(x, t)?))).collect()
}

/// CSV rows `t,K`.
pub fn write_profile_csv<W: Write>(profile: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "K"])?;
    for (t, k) in profile {
        w.write_record([t.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
