//! Command-line front end. Every subcommand resolves one [`ExperimentConfig`]
//! from an optional JSON file plus flag overrides, runs, and writes a JSON
//! report (and CSV data where there is something to plot) into the output
//! directory. Exit status: 0 pass, 1 property violation, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::discretize::DiscretizingSequence;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::grid::Window;
use crate::kfunc::{k_profile, shape_report, write_profile_csv, ExactOracle, MinFormula, WeightedSeqCouple};
use crate::qcfn::{FnSpec, QuasiConcaveFn, VerifyConfig};
use crate::spaces::janson_norm;
use crate::stability::{
    condition_v_profile, counterexample_search, doubling_schedule, equivalence_experiment, gilbert_experiment,
    sum_sup_ratio, Comparison, EquivalenceParams, Orientation, SampleSpec, SumSupVariant, Triple,
};
use crate::vector::SeqVector;

/// Relative drift tolerated by `gilbert-check` and `stability` under window doubling.
pub const EQUIVALENCE_DRIFT: f64 = 0.10;
/// Relative drift tolerated by `sum-sup` and by `falsify` on bounded profiles.
pub const FLAT_DRIFT: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "realinterp", version, about = "Real interpolation with functional parameter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment config; flags below override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Working window as TMIN:TMAX.
    #[arg(long, global = true, value_name = "TMIN:TMAX")]
    pub window: Option<Window>,
    #[arg(long, global = true, value_name = "R")]
    pub rho: Option<f64>,
    #[arg(long, global = true, value_name = "P")]
    pub p: Option<Exponent>,
    #[arg(long, global = true, value_name = "Q")]
    pub q: Option<Exponent>,
    #[arg(long, global = true, value_name = "N")]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_name = "S")]
    pub seed: Option<u64>,
    /// Directory for reports (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub orientation: Option<Orientation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check quasi-concavity and non-degeneracy of `function`.
    VerifyFn,
    /// Build and verify the discretizing sequence of `function`.
    Discretize,
    /// K-profile of `vector` in `couple` over the window.
    Kfunc,
    /// Janson norm of `vector` for `function` on the couple (lq, lq(1/t_k)).
    Norm,
    /// Janson norm against block norm on random vectors, window and doubled window.
    GilbertCheck,
    /// Cardinality profile of the triple on the window and the doubled window.
    ConditionV,
    /// Block sums against block maxima for all four variants.
    SumSup,
    /// Compare the two block-space couples on random vectors.
    Stability,
    /// Worst witness ratio over a doubling window schedule.
    Falsify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyFn => "verify-fn",
            Command::Discretize => "discretize",
            Command::Kfunc => "kfunc",
            Command::Norm => "norm",
            Command::GilbertCheck => "gilbert-check",
            Command::ConditionV => "condition-v",
            Command::SumSup => "sum-sup",
            Command::Stability => "stability",
            Command::Falsify => "falsify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    pub phi: FnSpec,
    pub phi0: FnSpec,
    pub phi1: FnSpec,
}

impl TripleSpec {
    pub fn power() -> Self {
        let p = |theta| FnSpec::PowerLog { theta, a: 0.0, b: 0.0 };
        TripleSpec {
            phi: p(0.5),
            phi0: p(1.0 / 3.0),
            phi1: p(2.0 / 3.0),
        }
    }

    pub fn build(&self) -> Result<Triple> {
        let cfg = VerifyConfig::default();
        Triple::new(self.phi.build(&cfg)?, self.phi0.build(&cfg)?, self.phi1.build(&cfg)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    MinFormula,
    ExactOracle,
}

/// Everything a subcommand may read. Unset fields take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Single function for `verify-fn`, `discretize`, `kfunc` and `norm`.
    pub function: FnSpec,
    /// `(φ, φ₀, φ₁)` for the experiments.
    pub triple: TripleSpec,
    pub rho: f64,
    pub window: Window,
    /// Number of windows in doubling schedules (`window`, `window²`, ...).
    pub windows: usize,
    pub p: Exponent,
    pub q: Exponent,
    /// Exponents of the `ℓ¹` side and the `ℓ∞` side.
    pub sides: [Exponent; 2],
    /// `null` picks `fine` for `stability` and `inner` for `falsify`.
    pub comparison: Option<Comparison>,
    /// Fine-index exponent held fixed by the `inner` comparison.
    pub fine: Exponent,
    pub orientation: Orientation,
    pub samples: usize,
    pub seed: u64,
    pub support_radius: i64,
    pub max_support: usize,
    /// Exponents for `sum-sup`.
    pub r: Vec<f64>,
    /// Element for `kfunc` and `norm`; defaults to `e_0`.
    pub vector: Option<SeqVector>,
    /// Couple for `kfunc`; defaults to `(ℓq, ℓq(1/t_k))` over the discretization of `function`.
    pub couple: Option<WeightedSeqCouple>,
    pub engine: Engine,
    pub grid_points: usize,
    pub eps_deg: f64,
    /// Output directory. Left out of reports so runs into different
    /// directories stay byte-identical.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            function: FnSpec::PowerLog {
                theta: 0.5,
                a: 0.0,
                b: 0.0,
            },
            triple: TripleSpec::power(),
            rho: 2.0,
            window: Window::symmetric(4.0, 16.0).expect("static window"),
            windows: 3,
            p: Exponent::TWO,
            q: Exponent::TWO,
            sides: [Exponent::ONE, Exponent::INFINITY],
            comparison: None,
            fine: Exponent::INFINITY,
            orientation: Orientation::Ratio10,
            samples: 100,
            seed: 0,
            support_radius: 12,
            max_support: 8,
            r: vec![1.0, -1.0, 2.0],
            vector: None,
            couple: None,
            engine: Engine::MinFormula,
            grid_points: 32,
            eps_deg: 1e-3,
            out: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    /// Reads `--config` (if any) and applies the flag overrides.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(w) = cli.window {
            cfg.window = w;
        }
        if let Some(r) = cli.rho {
            cfg.rho = r;
        }
        if let Some(p) = cli.p {
            cfg.p = p;
        }
        if let Some(q) = cli.q {
            cfg.q = q;
        }
        if let Some(n) = cli.samples {
            cfg.samples = n;
        }
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(o) = cli.orientation {
            cfg.orientation = o;
        }
        if let Some(dir) = &cli.out {
            cfg.out = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config(format!("field `{field}`: {msg}")));
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return bad("rho", "must be a finite number > 1");
        }
        if self.samples < 1 {
            return bad("samples", "must be at least 1");
        }
        if self.windows < 1 {
            return bad("windows", "must be at least 1");
        }
        if self.support_radius < 0 || self.max_support < 1 {
            return bad("support_radius", "needs support_radius >= 0 and max_support >= 1");
        }
        if self.grid_points < 3 {
            return bad("grid_points", "must be at least 3");
        }
        if !(self.eps_deg > 0.0) {
            return bad("eps_deg", "must be positive");
        }
        if self.r.iter().any(|r| *r == 0.0 || !r.is_finite()) {
            return bad("r", "exponents must be finite and non-zero");
        }
        if let Some(c) = &self.couple {
            c.validate().map_err(|e| Error::Config(format!("field `couple`: {e}")))?;
        }
        Ok(())
    }

    fn sample_spec(&self) -> SampleSpec {
        SampleSpec {
            samples: self.samples,
            seed: self.seed,
            support_radius: self.support_radius,
            max_support: self.max_support,
        }
    }

    fn equivalence_params(&self, default: Comparison) -> EquivalenceParams {
        EquivalenceParams {
            comparison: self.comparison.unwrap_or(default),
            sides: self.sides,
            p: self.p,
            fine: self.fine,
            rho: self.rho,
        }
    }
}

/// Result of one subcommand before it is written out.
struct Outcome {
    passed: bool,
    result: Value,
    csv: Option<(&'static str, Vec<u8>)>,
}

/// Runs a parsed command line and returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match ExperimentConfig::resolve(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(cli.command, &cfg).and_then(|o| write_outputs(cli.command, &cfg, o)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Window(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn write_outputs(cmd: Command, cfg: &ExperimentConfig, outcome: Outcome) -> Result<bool> {
    let dir: &Path = &cfg.out;
    fs::create_dir_all(dir)?;
    let report = json!({
        "command": cmd.name(),
        "config": cfg,
        "passed": outcome.passed,
        "result": outcome.result,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(dir.join(format!("{}.json", cmd.name())), text)?;
    if let Some((name, bytes)) = outcome.csv {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(outcome.passed)
}

fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match cmd {
        Command::VerifyFn => verify_fn(cfg),
        Command::Discretize => discretize(cfg),
        Command::Kfunc => kfunc(cfg),
        Command::Norm => norm(cfg),
        Command::GilbertCheck => gilbert_check(cfg),
        Command::ConditionV => condition_v(cfg),
        Command::SumSup => sum_sup(cfg),
        Command::Stability => stability(cfg),
        Command::Falsify => falsify(cfg),
    }
}

fn verify_fn(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = cfg.function.build_unchecked()?;
    let grid = cfg.window.grid(VerifyConfig::default().grid_points);
    let qc = f.verify_quasi_concave(&grid)?;
    let nd = f.verify_nondegenerate(&cfg.window, cfg.eps_deg)?;
    let dilation = f.dilation_report(&grid, 0.5)?;
    Ok(Outcome {
        passed: qc.passed() && nd.passed(),
        result: json!({
            "quasi_concave": qc,
            "nondegenerate": nd,
            "dilation": dilation,
        }),
        csv: None,
    })
}

fn function_sequence(cfg: &ExperimentConfig) -> Result<(QuasiConcaveFn, DiscretizingSequence)> {
    let f = cfg.function.build_unchecked()?;
    let seq = DiscretizingSequence::build(&f, &cfg.window, cfg.rho)?;
    Ok((f, seq))
}

fn discretize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, seq) = function_sequence(cfg)?;
    let report = seq.verify();
    let mut csv = Vec::new();
    seq.write_csv(&mut csv)?;
    let points: Vec<Value> = seq
        .iter()
        .map(|(k, t)| json!({"k": k, "t": t, "zone": seq.zone(k).map(|z| z.as_str())}))
        .collect();
    Ok(Outcome {
        passed: report.passed(),
        result: json!({
            "k_range": [seq.k_min(), seq.k_max()],
            "points": points,
            "verification": report,
        }),
        csv: Some(("sequence.csv", csv)),
    })
}

fn kfunc(cfg: &ExperimentConfig) -> Result<Outcome> {
    let couple = match &cfg.couple {
        Some(c) => c.clone(),
        None => WeightedSeqCouple::sequence_couple(cfg.q, &function_sequence(cfg)?.1)?,
    };
    let x = cfg.vector.clone().unwrap_or_else(|| SeqVector::unit(0));
    let grid = cfg.window.grid(cfg.grid_points);
    let profile = match cfg.engine {
        Engine::MinFormula => k_profile(&MinFormula(&couple), &x, &grid)?,
        Engine::ExactOracle => k_profile(&ExactOracle::new(&couple), &x, &grid)?,
    };
    // the surrogate is only equivalent to K, so its shape is reported but not enforced
    let shape = shape_report(&profile, 1e-8);
    let passed = cfg.engine == Engine::MinFormula || shape.passed();
    let mut csv = Vec::new();
    write_profile_csv(&profile, &mut csv)?;
    Ok(Outcome {
        passed,
        result: json!({
            "profile": profile,
            "shape": shape,
        }),
        csv: Some(("kprofile.csv", csv)),
    })
}

fn norm(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, seq) = function_sequence(cfg)?;
    let couple = WeightedSeqCouple::sequence_couple(cfg.q, &seq)?;
    let x = cfg.vector.clone().unwrap_or_else(|| SeqVector::unit(0));
    let report = janson_norm(&MinFormula(&couple), &x, &seq, cfg.p)?;
    Ok(Outcome {
        passed: true,
        result: json!({
            "norm": report,
            "tail_flagged": report.tail_flagged(),
        }),
        csv: None,
    })
}

fn gilbert_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let triple = cfg.triple.build()?;
    let windows = [cfg.window, cfg.window.doubled()?];
    let report = gilbert_experiment(&triple, &windows, cfg.p, cfg.q, cfg.rho, &cfg.sample_spec())?;
    Ok(Outcome {
        passed: report.drift < EQUIVALENCE_DRIFT,
        result: serde_json::to_value(&report)?,
        csv: None,
    })
}

fn condition_v(cfg: &ExperimentConfig) -> Result<Outcome> {
    let triple = cfg.triple.build()?;
    let base = condition_v_profile(&triple, &cfg.window, cfg.rho, cfg.orientation)?;
    let doubled = condition_v_profile(&triple, &cfg.window.doubled()?, cfg.rho, cfg.orientation)?;
    Ok(Outcome {
        passed: true,
        result: json!({
            "max_cardinality": base.max_cardinality,
            "bounded": doubled.max_cardinality == base.max_cardinality,
            "degenerate_ratio": base.degenerate_ratio,
            "doubled_max_cardinality": doubled.max_cardinality,
            "profile": base,
        }),
        csv: None,
    })
}

fn sum_sup(cfg: &ExperimentConfig) -> Result<Outcome> {
    let triple = cfg.triple.build()?;
    let doubled = cfg.window.doubled()?;
    let mut rows = Vec::new();
    let mut passed = true;
    for variant in SumSupVariant::ALL {
        for &r in &cfg.r {
            let a = sum_sup_ratio(variant, r, &triple, &cfg.window, cfg.rho)?;
            let b = sum_sup_ratio(variant, r, &triple, &doubled, cfg.rho)?;
            let drift = (b.max_ratio - a.max_ratio).abs() / a.max_ratio;
            passed &= drift < FLAT_DRIFT;
            rows.push(json!({
                "variant": variant,
                "r": r,
                "max_ratio": a.max_ratio,
                "doubled_max_ratio": b.max_ratio,
                "drift": drift,
                "blocks": a.blocks,
            }));
        }
    }
    Ok(Outcome {
        passed,
        result: Value::Array(rows),
        csv: None,
    })
}

fn stability(cfg: &ExperimentConfig) -> Result<Outcome> {
    let triple = cfg.triple.build()?;
    let windows = [cfg.window, cfg.window.doubled()?];
    let params = cfg.equivalence_params(Comparison::Fine);
    let report = equivalence_experiment(&triple, &windows, &params, &cfg.sample_spec())?;
    let embedding_ok = report.runs.iter().all(|r| r.embedding_violations.is_empty());
    let bounded_profile = report.runs.iter().all(|r| r.max_cardinality == report.base().max_cardinality);
    let passed = embedding_ok && (!bounded_profile || report.side_ratio_drift < EQUIVALENCE_DRIFT);
    Ok(Outcome {
        passed,
        result: json!({
            "bounded_profile": bounded_profile,
            "report": report,
        }),
        csv: None,
    })
}

fn falsify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let triple = cfg.triple.build()?;
    let windows = doubling_schedule(&cfg.window, cfg.windows.max(2))?;
    let params = cfg.equivalence_params(Comparison::Inner);
    let table = counterexample_search(&triple, &windows, &params)?;
    let cards: Vec<usize> = table.rows.iter().map(|r| r.max_cardinality).collect();
    let growing = cards.windows(2).all(|w| w[1] > w[0]);
    let flat = cards.windows(2).all(|w| w[1] == w[0]);
    // a growing profile must produce a growing table, a flat one a flat table
    let passed = if growing {
        table.strictly_increasing
    } else if flat {
        table.max_step_drift < FLAT_DRIFT
    } else {
        true
    };
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    Ok(Outcome {
        passed,
        result: json!({
            "cardinality_growing": growing,
            "table": table,
        }),
        csv: Some(("divergence.csv", csv)),
    })
}
