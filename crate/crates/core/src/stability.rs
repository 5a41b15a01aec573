//! Experiments around the stability of the two-step real method on sequence
//! couples: the cardinality criterion, the sum-versus-sup block estimates,
//! the comparison of block-space couples built with different exponents,
//! and the search for diverging norm ratios when the criterion fails.
//!
//! Everything runs on the sequence couple `(ℓq, ℓq(1/t̃_i))`, where `t̃_i`
//! discretizes the composite parameter. Its interpolation spaces for `φ₀`
//! and `φ₁` are block spaces over the blocks cut out by the discretizing
//! sequences `τ_k` of `φ₀` and `z_k` of `φ₁`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{DiscretizingSequence, BOUNDARY_TOL};
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::grid::Window;
use crate::kfunc::{BlockCouple, MinFormula, WeightedSeqCouple};
use crate::qcfn::{QuasiConcaveFn, VerifyConfig};
use crate::spaces::{gilbert_rhs, janson_norm, BlockSpace};
use crate::vector::SeqVector;

/// Samples keep this many inner indices away from the window edges.
pub const EDGE_MARGIN: i64 = 4;

/// Tolerance of the embedding check `ℓ¹-side ≥ ℓ∞-side`.
pub const EMBEDDING_TOL: f64 = 1e-9;

/// Outer parameter `φ` and inner parameters `φ₀`, `φ₁`.
#[derive(Clone, Debug)]
pub struct Triple {
    pub phi: QuasiConcaveFn,
    pub phi0: QuasiConcaveFn,
    pub phi1: QuasiConcaveFn,
    composite: QuasiConcaveFn,
}

impl Triple {
    pub fn new(phi: QuasiConcaveFn, phi0: QuasiConcaveFn, phi1: QuasiConcaveFn) -> Result<Self> {
        let composite = QuasiConcaveFn::compose_parameter(&phi, &phi0, &phi1, &VerifyConfig::default())?;
        Ok(Triple {
            phi,
            phi0,
            phi1,
            composite,
        })
    }

    /// `φ = t^{1/2}`, `φ₀ = t^{1/3}`, `φ₁ = t^{2/3}`; the composite is `t^{1/2}`.
    pub fn power() -> Self {
        Self::new(
            QuasiConcaveFn::power(0.5).unwrap(),
            QuasiConcaveFn::power(1.0 / 3.0).unwrap(),
            QuasiConcaveFn::power(2.0 / 3.0).unwrap(),
        )
        .unwrap()
    }

    /// `φ = φ₀ = t^{1/2}`, `φ₁ = t^{1/2}·log(e+t)`. The ratio `φ₁/φ₀` tends to 1
    /// at zero, so one ratio octave collects every small `t̃_i`.
    pub fn log() -> Self {
        Self::new(
            QuasiConcaveFn::power(0.5).unwrap(),
            QuasiConcaveFn::power(0.5).unwrap(),
            QuasiConcaveFn::power_log(0.5, 1.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    pub fn composite(&self) -> &QuasiConcaveFn {
        &self.composite
    }

    /// `φ₁(t)/φ₀(t)`.
    pub fn ratio(&self, t: f64) -> f64 {
        let u = t.ln();
        (self.phi1.log_eval(u) - self.phi0.log_eval(u)).exp()
    }

    /// Discretizes all four functions on one window.
    pub fn setup(&self, window: &Window, rho: f64) -> Result<TripleSetup> {
        let build = |f: &QuasiConcaveFn| DiscretizingSequence::build(f, window, rho);
        let inner = build(&self.composite)?;
        let ratio = inner.iter().map(|(i, t)| (i, self.ratio(t))).collect();
        Ok(TripleSetup {
            window: *window,
            outer: build(&self.phi)?,
            tau: build(&self.phi0)?,
            z: build(&self.phi1)?,
            inner,
            ratio,
            triple: self.clone(),
        })
    }
}

/// The discretizing sequences of a triple on one window.
#[derive(Clone, Debug)]
pub struct TripleSetup {
    pub window: Window,
    /// `t_n`, for `φ`.
    pub outer: DiscretizingSequence,
    /// `t̃_i`, for the composite parameter.
    pub inner: DiscretizingSequence,
    /// `τ_k`, for `φ₀`.
    pub tau: DiscretizingSequence,
    /// `z_k`, for `φ₁`.
    pub z: DiscretizingSequence,
    /// `φ₁(t̃_i)/φ₀(t̃_i)`.
    pub ratio: BTreeMap<i64, f64>,
    pub triple: Triple,
}

impl TripleSetup {
    /// Block spaces for `φ₀` and `φ₁` over the couple `(ℓ_fine, ℓ_fine(1/t̃_i))`,
    /// both with outer exponent `outer`.
    pub fn block_spaces(&self, outer: Exponent, fine: Exponent) -> Result<(BlockSpace, BlockSpace)> {
        let c = WeightedSeqCouple::sequence_couple(fine, &self.inner)?;
        Ok((
            BlockSpace::gilbert(&c, &self.triple.phi0, &self.tau, outer)?,
            BlockSpace::gilbert(&c, &self.triple.phi1, &self.z, outer)?,
        ))
    }

    /// Janson norm of `a` for the couple `(E₀, E₁)` with K from the block split.
    pub fn interpolated_norm(&self, spaces: &(BlockSpace, BlockSpace), a: &SeqVector, p: Exponent) -> Result<f64> {
        let engine = BlockCouple {
            space0: &spaces.0,
            space1: &spaces.1,
            ratio: &self.ratio,
        };
        Ok(janson_norm(&engine, a, &self.outer, p)?.value)
    }

    /// `φ(φ₀,φ₁)(t̃_i)`.
    pub fn composite_at(&self, i: i64) -> f64 {
        self.inner.value(i).unwrap()
    }

    fn check_radius(&self, radius: i64) -> Result<()> {
        let (lo, hi) = (self.inner.k_min(), self.inner.k_max());
        if lo > -radius - EDGE_MARGIN || hi < radius + EDGE_MARGIN {
            return Err(Error::Window(format!(
                "sample support |i| <= {radius} needs inner indices [{}, {}] but the window gives [{lo}, {hi}]; enlarge the window",
                -radius - EDGE_MARGIN,
                radius + EDGE_MARGIN
            )));
        }
        Ok(())
    }
}

/// Which ratio condition (v) counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `φ₁/φ₀`, the ratio that splits the block couples.
    #[default]
    Ratio10,
    /// `φ₀/φ₁`.
    Ratio01,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OctaveCount {
    pub n: i64,
    pub count: usize,
}

/// Counts of `{i : t_n ≤ ratio(t̃_i) ≤ t_{n+1}}` per outer index `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardinalityProfile {
    pub window: Window,
    pub orientation: Orientation,
    pub outer_range: [i64; 2],
    pub inner_range: [i64; 2],
    pub counts: Vec<OctaveCount>,
    pub max_cardinality: usize,
    /// First `n` attaining the maximum.
    pub argmax: i64,
    /// The ratio is constant over the inner window.
    pub degenerate_ratio: bool,
}

pub fn condition_v_profile(triple: &Triple, window: &Window, rho: f64, orientation: Orientation) -> Result<CardinalityProfile> {
    let setup = triple.setup(window, rho)?;
    Ok(profile_of(&setup, orientation))
}

pub fn profile_of(setup: &TripleSetup, orientation: Orientation) -> CardinalityProfile {
    let log_ratios: Vec<f64> = setup
        .ratio
        .values()
        .map(|r| match orientation {
            Orientation::Ratio10 => r.ln(),
            Orientation::Ratio01 => -r.ln(),
        })
        .collect();
    let outer = &setup.outer;
    let counts: Vec<OctaveCount> = (outer.k_min()..outer.k_max())
        .map(|n| {
            let (lo, hi) = (outer.log_point(n).unwrap(), outer.log_point(n + 1).unwrap());
            let count = log_ratios
                .iter()
                .filter(|&&lr| lr >= lo - BOUNDARY_TOL && lr <= hi + BOUNDARY_TOL)
                .count();
            OctaveCount { n, count }
        })
        .collect();
    let (argmax, max_cardinality) = counts
        .iter()
        .fold((outer.k_min(), 0), |acc, c| if c.count > acc.1 { (c.n, c.count) } else { acc });
    let spread = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - log_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    CardinalityProfile {
        window: setup.window,
        orientation,
        outer_range: [outer.k_min(), outer.k_max()],
        inner_range: [setup.inner.k_min(), setup.inner.k_max()],
        counts,
        max_cardinality,
        argmax,
        degenerate_ratio: spread <= BOUNDARY_TOL,
    }
}

/// The four block sums compared with their largest term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SumSupVariant {
    /// `(φ₁/φ₀)^r` over `τ`-blocks.
    RatioTau,
    /// `(φ₁/φ₀)^r` over `z`-blocks.
    RatioZ,
    /// `φ(φ₁/φ₀)^r` over `τ`-blocks.
    PhiRatioTau,
    /// `((φ₀/φ₁)·φ(φ₁/φ₀))^r` over `z`-blocks.
    ScaledPhiRatioZ,
}

impl SumSupVariant {
    pub const ALL: [SumSupVariant; 4] = [
        SumSupVariant::RatioTau,
        SumSupVariant::RatioZ,
        SumSupVariant::PhiRatioTau,
        SumSupVariant::ScaledPhiRatioZ,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumSupBlock {
    pub k: i64,
    pub cardinality: usize,
    /// Sum over sup; 1 for an empty block.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumSupReport {
    pub variant: SumSupVariant,
    pub r: f64,
    pub window: Window,
    pub blocks: Vec<SumSupBlock>,
    pub max_ratio: f64,
}

/// For each block `[s_k, s_{k+1}]` of `τ` or `z`, the sum of the variant's
/// terms over `t̃_i` in the closed block divided by their maximum.
pub fn sum_sup_ratio(variant: SumSupVariant, r: f64, triple: &Triple, window: &Window, rho: f64) -> Result<SumSupReport> {
    if r == 0.0 || !r.is_finite() {
        return Err(Error::invalid("sum-sup exponent r must be finite and non-zero"));
    }
    let setup = triple.setup(window, rho)?;
    Ok(sum_sup_of(&setup, variant, r))
}

pub fn sum_sup_of(setup: &TripleSetup, variant: SumSupVariant, r: f64) -> SumSupReport {
    let phi = &setup.triple.phi;
    let blocks_seq = match variant {
        SumSupVariant::RatioTau | SumSupVariant::PhiRatioTau => &setup.tau,
        SumSupVariant::RatioZ | SumSupVariant::ScaledPhiRatioZ => &setup.z,
    };
    // log of the term before raising to r
    let log_term = |i: i64| {
        let lr = setup.ratio[&i].ln();
        match variant {
            SumSupVariant::RatioTau | SumSupVariant::RatioZ => lr,
            SumSupVariant::PhiRatioTau => phi.log_eval(lr),
            SumSupVariant::ScaledPhiRatioZ => phi.log_eval(lr) - lr,
        }
    };
    let blocks: Vec<SumSupBlock> = (blocks_seq.k_min()..blocks_seq.k_max())
        .map(|k| {
            let logs: Vec<f64> = setup
                .inner
                .iter()
                .filter(|&(_, t)| blocks_seq.in_closed_step(k, t))
                .map(|(i, _)| r * log_term(i))
                .collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ratio = if logs.is_empty() {
                1.0
            } else {
                logs.iter().map(|l| (l - top).exp()).sum()
            };
            SumSupBlock {
                k,
                cardinality: logs.len(),
                ratio,
            }
        })
        .collect();
    let max_ratio = blocks.iter().map(|b| b.ratio).fold(1.0, f64::max);
    SumSupReport {
        variant,
        r,
        window: setup.window,
        blocks,
        max_ratio,
    }
}

/// Which exponent differs between the two block-space couples compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Fine-index exponent `q` of `(ℓq, ℓq(1/t̃))`; block outer exponent `p`.
    #[default]
    Fine,
    /// Outer exponent of the block spaces, i.e. the inner interpolation
    /// exponent; fine-index exponent held fixed.
    Inner,
}

/// Exponents of one side: block outer exponent and fine-index exponent.
fn side_exponents(comparison: Comparison, side: Exponent, p: Exponent, fine: Exponent) -> (Exponent, Exponent) {
    match comparison {
        Comparison::Fine => (p, side),
        Comparison::Inner => (side, fine),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub samples: usize,
    pub seed: u64,
    /// Supports lie in `|i| ≤ support_radius`.
    pub support_radius: i64,
    pub max_support: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            samples: 100,
            seed: 0,
            support_radius: 12,
            max_support: 8,
        }
    }
}

/// Seeded random coefficient vectors `u` with log-uniform magnitudes in
/// `[e^{-2}, e^2]` and random signs.
pub fn draw_samples(spec: &SampleSpec) -> Vec<SeqVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = (2 * spec.support_radius + 1) as usize;
    (0..spec.samples)
        .map(|_| {
            let m = rng.gen_range(1..=spec.max_support.clamp(1, width));
            index::sample(&mut rng, width, m)
                .into_iter()
                .map(|j| {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (j as i64 - spec.support_radius, sign * rng.gen_range(-2.0f64..2.0).exp())
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl RatioStats {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return RatioStats {
                count: 0,
                min: f64::NAN,
                median: f64::NAN,
                max: f64::NAN,
            };
        }
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        RatioStats {
            count: n,
            min: v[0],
            median,
            max: v[n - 1],
        }
    }

    /// Largest relative change of the extremes against `base`.
    pub fn drift_from(&self, base: &RatioStats) -> f64 {
        ((self.min - base.min).abs() / base.min).max((self.max - base.max).abs() / base.max)
    }
}

/// Ratio families of one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRun {
    pub window: Window,
    pub max_cardinality: usize,
    /// (`ℓ¹`-side)/(`ℓ∞`-side).
    pub side_ratio: RatioStats,
    /// `ℓ¹`-side over the weighted `ℓp` target norm.
    pub side0_rhs: RatioStats,
    /// `ℓ∞`-side over the weighted `ℓp` target norm.
    pub side1_rhs: RatioStats,
    /// Sample indices where the `ℓ¹`-side fell below the `ℓ∞`-side.
    pub embedding_violations: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub comparison: Comparison,
    pub sides: [Exponent; 2],
    pub p: Exponent,
    pub fine: Exponent,
    pub samples: usize,
    /// Zero samples; none of the norms is defined for them.
    pub skipped: usize,
    /// One entry per window, the first being the base window.
    pub runs: Vec<WindowRun>,
    /// Drift of the side-ratio extremes from the first to the last window.
    pub side_ratio_drift: f64,
    /// Largest drift over all three ratio families.
    pub drift: f64,
}

impl EquivalenceReport {
    pub fn base(&self) -> &WindowRun {
        &self.runs[0]
    }
}

/// Settings of [`equivalence_experiment`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceParams {
    pub comparison: Comparison,
    /// Exponents of the `ℓ¹` side and the `ℓ∞` side.
    pub sides: [Exponent; 2],
    /// Exponent of the outer Janson norm and of the target norm.
    pub p: Exponent,
    /// Fine-index exponent under [`Comparison::Inner`].
    pub fine: Exponent,
    pub rho: f64,
}

impl EquivalenceParams {
    pub fn new(comparison: Comparison, p: Exponent) -> Self {
        EquivalenceParams {
            comparison,
            sides: [Exponent::ONE, Exponent::INFINITY],
            p,
            fine: Exponent::INFINITY,
            rho: 2.0,
        }
    }
}

/// Norms of `a` in the two compared couples.
fn side_norms(setup: &TripleSetup, spaces: &[(BlockSpace, BlockSpace); 2], a: &SeqVector, p: Exponent) -> Result<[f64; 2]> {
    Ok([
        setup.interpolated_norm(&spaces[0], a, p)?,
        setup.interpolated_norm(&spaces[1], a, p)?,
    ])
}

fn compared_spaces(setup: &TripleSetup, params: &EquivalenceParams) -> Result<[(BlockSpace, BlockSpace); 2]> {
    let (o0, f0) = side_exponents(params.comparison, params.sides[0], params.p, params.fine);
    let (o1, f1) = side_exponents(params.comparison, params.sides[1], params.p, params.fine);
    Ok([setup.block_spaces(o0, f0)?, setup.block_spaces(o1, f1)?])
}

/// Compares the two couples on seeded random vectors `a_i = φ(φ₀,φ₁)(t̃_i)·u_i`,
/// whose target norm `‖a‖_{ℓp(1/φ(φ₀,φ₁)(t̃_i))}` is `‖u‖_p`, on each window.
pub fn equivalence_experiment(
    triple: &Triple,
    windows: &[Window],
    params: &EquivalenceParams,
    spec: &SampleSpec,
) -> Result<EquivalenceReport> {
    if windows.is_empty() {
        return Err(Error::invalid("equivalence experiment needs at least one window"));
    }
    let samples = draw_samples(spec);
    let mut runs = Vec::new();
    for window in windows {
        let setup = triple.setup(window, params.rho)?;
        setup.check_radius(spec.support_radius)?;
        let spaces = compared_spaces(&setup, params)?;
        let rows: Vec<Option<[f64; 3]>> = samples
            .par_iter()
            .map(|u| {
                if u.is_zero() {
                    return Ok(None);
                }
                let a: SeqVector = u.iter().map(|(i, x)| (i, x * setup.composite_at(i))).collect();
                let [s0, s1] = side_norms(&setup, &spaces, &a, params.p)?;
                let rhs = params.p.norm(u.iter().map(|(_, x)| x));
                Ok(Some([s0 / s1, s0 / rhs, s1 / rhs]))
            })
            .collect::<Result<_>>()?;
        let kept: Vec<(usize, [f64; 3])> = rows.iter().enumerate().filter_map(|(j, r)| r.map(|r| (j, r))).collect();
        let family = |f: usize| RatioStats::of(&kept.iter().map(|(_, r)| r[f]).collect::<Vec<_>>());
        runs.push(WindowRun {
            window: *window,
            max_cardinality: profile_of(&setup, Orientation::Ratio10).max_cardinality,
            side_ratio: family(0),
            side0_rhs: family(1),
            side1_rhs: family(2),
            embedding_violations: kept
                .iter()
                .filter(|(_, r)| r[0] < 1.0 - EMBEDDING_TOL)
                .map(|(j, _)| *j)
                .collect(),
        });
    }
    let (first, last) = (&runs[0], runs.last().unwrap());
    let side_ratio_drift = last.side_ratio.drift_from(&first.side_ratio);
    let drift = side_ratio_drift
        .max(last.side0_rhs.drift_from(&first.side0_rhs))
        .max(last.side1_rhs.drift_from(&first.side1_rhs));
    let skipped = samples.iter().filter(|u| u.is_zero()).count();
    Ok(EquivalenceReport {
        comparison: params.comparison,
        sides: params.sides,
        p: params.p,
        fine: params.fine,
        samples: samples.len(),
        skipped,
        runs,
        side_ratio_drift: if side_ratio_drift.is_nan() { 0.0 } else { side_ratio_drift },
        drift: if drift.is_nan() { 0.0 } else { drift },
    })
}

/// Observed `janson_norm / gilbert_rhs` on the couple `(ℓq, ℓq(1/t̃_i))` with
/// parameter `φ`, per window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GilbertReport {
    pub p: Exponent,
    pub q: Exponent,
    pub runs: Vec<(Window, RatioStats)>,
    pub drift: f64,
}

pub fn gilbert_experiment(
    triple: &Triple,
    windows: &[Window],
    p: Exponent,
    q: Exponent,
    rho: f64,
    spec: &SampleSpec,
) -> Result<GilbertReport> {
    if windows.is_empty() {
        return Err(Error::invalid("gilbert experiment needs at least one window"));
    }
    let samples = draw_samples(spec);
    let mut runs = Vec::new();
    for window in windows {
        let setup = triple.setup(window, rho)?;
        setup.check_radius(spec.support_radius)?;
        let c = WeightedSeqCouple::sequence_couple(q, &setup.inner)?;
        let phi = &triple.phi;
        let ratios: Vec<f64> = samples
            .par_iter()
            .filter(|u| !u.is_zero())
            .map(|u| {
                // scale so the weights v_i/φ(v_i/w_i) = 1/φ(t̃_i) cancel
                let a: SeqVector = u
                    .iter()
                    .map(|(i, x)| (i, x * phi.eval(setup.inner.point(i).unwrap()).unwrap()))
                    .collect();
                let lhs = janson_norm(&MinFormula(&c), &a, &setup.outer, p)?.value;
                Ok(lhs / gilbert_rhs(&c, phi, &setup.outer, p, &a)?)
            })
            .collect::<Result<_>>()?;
        runs.push((*window, RatioStats::of(&ratios)));
    }
    let drift = runs.last().unwrap().1.drift_from(&runs[0].1);
    Ok(GilbertReport { p, q, runs, drift })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub window: Window,
    pub worst_ratio: f64,
    pub max_cardinality: usize,
    /// Outer index `n` of the ratio octave whose witness attains `worst_ratio`.
    pub witness_octave: i64,
    pub witness_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceTable {
    pub comparison: Comparison,
    pub p: Exponent,
    pub fine: Exponent,
    pub rows: Vec<DivergenceRow>,
    pub strictly_increasing: bool,
    /// Last worst ratio over the first.
    pub total_increase: f64,
    /// Largest relative change of the worst ratio between consecutive windows.
    pub max_step_drift: f64,
}

impl DivergenceTable {
    /// CSV rows `window,worst_ratio,max_cardinality`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["window", "worst_ratio", "max_cardinality"])?;
        for row in &self.rows {
            w.write_record([row.window.to_string(), row.worst_ratio.to_string(), row.max_cardinality.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Witness vectors of one window: for every ratio octave `[t_n, t_{n+1}]`,
/// the indices `t̃_i` it holds (restricted to indices both block spaces
/// cover), once with the composite weight `φ(φ₀,φ₁)(t̃_i)` and once as a
/// plain indicator.
fn witnesses(setup: &TripleSetup, spaces: &[(BlockSpace, BlockSpace); 2]) -> Vec<(i64, SeqVector)> {
    let outer = &setup.outer;
    let covered = |i: i64| {
        spaces
            .iter()
            .all(|(e0, e1)| e0.block_of(i).is_some() && e1.block_of(i).is_some())
    };
    let mut out = Vec::new();
    for n in outer.k_min()..outer.k_max() {
        let (lo, hi) = (outer.log_point(n).unwrap(), outer.log_point(n + 1).unwrap());
        let members: Vec<i64> = setup
            .ratio
            .iter()
            .filter(|&(&i, r)| {
                let lr = r.ln();
                lr >= lo - BOUNDARY_TOL && lr <= hi + BOUNDARY_TOL && covered(i)
            })
            .map(|(&i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        out.push((n, members.iter().map(|&i| (i, setup.composite_at(i))).collect()));
        out.push((n, members.iter().map(|&i| (i, 1.0)).collect()));
    }
    out
}

/// Worst (`ℓ¹`-side)/(`ℓ∞`-side) ratio over the octave witnesses, per window.
pub fn counterexample_search(triple: &Triple, windows: &[Window], params: &EquivalenceParams) -> Result<DivergenceTable> {
    if windows.is_empty() {
        return Err(Error::invalid("counterexample search needs at least one window"));
    }
    let mut rows = Vec::new();
    for window in windows {
        let setup = triple.setup(window, params.rho)?;
        let spaces = compared_spaces(&setup, params)?;
        let cands = witnesses(&setup, &spaces);
        let ratios: Vec<(f64, i64, usize)> = cands
            .par_iter()
            .map(|(n, a)| {
                let [s0, s1] = side_norms(&setup, &spaces, a, params.p)?;
                Ok((s0 / s1, *n, a.support_len()))
            })
            .collect::<Result<_>>()?;
        let (worst_ratio, witness_octave, witness_size) = ratios
            .into_iter()
            .fold((f64::NAN, 0, 0), |acc, x| if acc.0.is_nan() || x.0 > acc.0 { x } else { acc });
        rows.push(DivergenceRow {
            window: *window,
            worst_ratio,
            max_cardinality: profile_of(&setup, Orientation::Ratio10).max_cardinality,
            witness_octave,
            witness_size,
        });
    }
    let strictly_increasing = rows.windows(2).all(|w| w[1].worst_ratio > w[0].worst_ratio);
    let total_increase = rows.last().unwrap().worst_ratio / rows[0].worst_ratio;
    let max_step_drift = rows
        .windows(2)
        .map(|w| (w[1].worst_ratio - w[0].worst_ratio).abs() / w[0].worst_ratio)
        .fold(0.0, f64::max);
    Ok(DivergenceTable {
        comparison: params.comparison,
        p: params.p,
        fine: params.fine,
        rows,
        strictly_increasing,
        total_increase,
        max_step_drift,
    })
}

/// `window, window², window⁴, ...` with `count` entries.
pub fn doubling_schedule(start: &Window, count: usize) -> Result<Vec<Window>> {
    let mut out = vec![*start];
    while out.len() < count {
        out.push(out.last().unwrap().doubled()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_triple_sequences() {
        let setup = Triple::power().setup(&Window::symmetric(4.0, 10.0).unwrap(), 2.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b;
        assert!(setup.outer.iter().all(|(n, t)| close(t, 4f64.powi(n as i32))));
        assert!(setup.inner.iter().all(|(k, t)| close(t, 4f64.powi(k as i32))));
        // φ₀ = t^{1/3} steps by 8; φ₁ = t^{2/3} steps by 8 on the t/φ side
        assert!(setup.tau.iter().all(|(k, t)| close(t, 8f64.powi(k as i32))));
        assert!(setup.z.iter().all(|(k, t)| close(t, 8f64.powi(k as i32))));
    }

    #[test]
    fn power_triple_counts_four() {
        let p = condition_v_profile(&Triple::power(), &Window::symmetric(4.0, 10.0).unwrap(), 2.0, Orientation::Ratio10).unwrap();
        assert_eq!(p.max_cardinality, 4);
        assert!(!p.degenerate_ratio);
        // interior octaves [4^n, 4^{n+1}] hold k = 3n..3n+3
        for c in p.counts.iter().filter(|c| c.n.abs() <= 2) {
            assert_eq!(c.count, 4, "n={}", c.n);
        }
    }

    #[test]
    fn constant_ratio_is_flagged() {
        let h = QuasiConcaveFn::power(0.5).unwrap();
        let triple = Triple::new(h.clone(), h.clone(), h).unwrap();
        let small = condition_v_profile(&triple, &Window::symmetric(4.0, 5.0).unwrap(), 2.0, Orientation::Ratio10).unwrap();
        let big = condition_v_profile(&triple, &Window::symmetric(4.0, 10.0).unwrap(), 2.0, Orientation::Ratio10).unwrap();
        assert!(small.degenerate_ratio);
        assert_eq!(small.max_cardinality, 11);
        assert_eq!(big.max_cardinality, 21);
    }

    #[test]
    fn orientation_mirrors_counts() {
        let w = Window::symmetric(4.0, 10.0).unwrap();
        let a = condition_v_profile(&Triple::power(), &w, 2.0, Orientation::Ratio10).unwrap();
        let b = condition_v_profile(&Triple::power(), &w, 2.0, Orientation::Ratio01).unwrap();
        assert_eq!(a.max_cardinality, b.max_cardinality);
    }

    #[test]
    fn sum_sup_geometric_bounds() {
        let w = Window::symmetric(4.0, 12.0).unwrap();
        let r1 = sum_sup_ratio(SumSupVariant::RatioTau, 1.0, &Triple::power(), &w, 2.0).unwrap();
        assert!(r1.max_ratio <= 1.0 / (1.0 - 4f64.powf(-1.0 / 3.0)));
        assert!(r1.blocks.iter().all(|b| b.cardinality != 1 || b.ratio == 1.0));
        let r3 = sum_sup_ratio(SumSupVariant::PhiRatioTau, 1.0, &Triple::power(), &w, 2.0).unwrap();
        assert!(r3.max_ratio <= 1.0 / (1.0 - 4f64.powf(-1.0 / 6.0)));
        assert!(sum_sup_ratio(SumSupVariant::RatioZ, 0.0, &Triple::power(), &w, 2.0).is_err());
    }

    #[test]
    fn samples_are_reproducible() {
        let spec = SampleSpec::default();
        assert_eq!(draw_samples(&spec), draw_samples(&spec));
        let other = SampleSpec { seed: 1, ..spec };
        assert_ne!(draw_samples(&spec), draw_samples(&other));
        assert!(draw_samples(&spec)
            .iter()
            .all(|u| u.support().all(|i| i.abs() <= spec.support_radius) && !u.is_zero()));
    }

    #[test]
    fn single_index_vectors_have_unit_side_ratio() {
        let setup = Triple::log().setup(&Window::new(1e-6, 1e6).unwrap(), 2.0).unwrap();
        for comparison in [Comparison::Fine, Comparison::Inner] {
            let params = EquivalenceParams::new(comparison, Exponent::ONE);
            let spaces = compared_spaces(&setup, &params).unwrap();
            for j in -3..=3 {
                let [s0, s1] = side_norms(&setup, &spaces, &SeqVector::unit(j), Exponent::ONE).unwrap();
                assert!((s0 / s1 - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_window_is_rejected() {
        let params = EquivalenceParams::new(Comparison::Fine, Exponent::TWO);
        let err = equivalence_experiment(&Triple::power(), &[Window::symmetric(4.0, 10.0).unwrap()], &params, &SampleSpec::default());
        assert!(matches!(err, Err(Error::Window(_))));
    }
}
