//! Scenario ingestion, subcommand dispatch, and report emission.
//!
//! Scenario files are JSON: complex numbers are `[re, im]` pairs, matrices
//! are row-major nested arrays, and numbers round-trip double precision
//! exactly. Reports echo the scenario they were computed from, so any report
//! can be re-run verbatim. Timestamps never appear in report bodies.
//!
//! Exit codes: 0 success, 2 input error, 3 internal consistency failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chsh::{
    chsh_operator, chsh_value, classify_bound_with_tol, norm_decomposition, BellScenario,
    BoundClass, Correlations, TermNorms,
};
use crate::error::Error as CoreError;
use crate::linalg::{Complex64, ComplexMatrix};
use crate::montecarlo::{compare, run as mc_run, EmpiricalStats};
use crate::observables::{DichotomicObservable, Sign, Site};
use crate::optimizer::{search, Constraint, SearchSpace, DEFAULT_BUDGET, DEFAULT_RESTARTS};
use crate::sequential::{
    mixed_joint_distribution, singlet_state, MarginalDeviationReport, QuantumState,
};

/// Errors surfaced to the user, tagged with their exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable file, malformed scenario, invalid flag value.
    #[error("{0}")]
    Input(String),
    /// An internal cross-check failed; this is a bug, not bad input.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InternalConsistency(_) => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

/// On-disk description of a Bell scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub state: StateSpec,
    pub observables: ObservableSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSet {
    pub a: ObservableSpec,
    pub a_prime: ObservableSpec,
    pub b: ObservableSpec,
    pub b_prime: ObservableSpec,
}

/// Either a named state ("singlet") or an explicit amplitude vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Explicit { amplitudes: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliName {
    X,
    Y,
    Z,
}

/// Tensor-lift instruction attached to an observable spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    pub site: Site,
    pub other_dim: usize,
}

/// One observable: an explicit matrix, a spin direction, a named Pauli, or
/// the trivial identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Matrix {
        entries: Vec<Vec<[f64; 2]>>,
        #[serde(default)]
        allow_trivial: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lift: Option<LiftSpec>,
    },
    Spin {
        theta: f64,
        phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lift: Option<LiftSpec>,
    },
    Pauli {
        name: PauliName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lift: Option<LiftSpec>,
    },
    Identity {
        dim: usize,
    },
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Parses scenario JSON, reporting the JSON path of the offending field
    /// on failure.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| CliError::Input(format!("at {}: {}", e.path(), e.inner())))
    }

    /// Builds the runnable scenario this file describes.
    pub fn build(&self) -> Result<BellScenario, CliError> {
        let a = build_observable(&self.observables.a, "observables.a")?;
        let a_prime = build_observable(&self.observables.a_prime, "observables.a_prime")?;
        let b = build_observable(&self.observables.b, "observables.b")?;
        let b_prime = build_observable(&self.observables.b_prime, "observables.b_prime")?;
        let psi = match &self.state {
            StateSpec::Named(name) => {
                if name == "singlet" {
                    singlet_state()
                } else {
                    return Err(CliError::Input(format!(
                        "at state: unknown state name '{name}' (expected \"singlet\" or explicit amplitudes)"
                    )));
                }
            }
            StateSpec::Explicit { amplitudes } => {
                let amps: Vec<Complex64> = amplitudes
                    .iter()
                    .map(|[re, im]| Complex64::new(*re, *im))
                    .collect();
                QuantumState::new(amps)
                    .map_err(|e| CliError::Input(format!("at state.amplitudes: {e}")))?
            }
        };
        BellScenario::new(psi, a, a_prime, b, b_prime).map_err(CliError::from)
    }
}

fn complex_rows(entries: &[Vec<[f64; 2]>]) -> Vec<Vec<Complex64>> {
    entries
        .iter()
        .map(|row| {
            row.iter()
                .map(|[re, im]| Complex64::new(*re, *im))
                .collect()
        })
        .collect()
}

fn pauli_observable(name: PauliName) -> DichotomicObservable {
    let (matrix, label) = match name {
        PauliName::X => (crate::linalg::matrices::pauli_x(), "sigma_x"),
        PauliName::Y => (crate::linalg::matrices::pauli_y(), "sigma_y"),
        PauliName::Z => (crate::linalg::matrices::pauli_z(), "sigma_z"),
    };
    DichotomicObservable::from_matrix(&matrix)
        .expect("Pauli matrices are exactly dichotomic")
        .labeled(label)
}

fn build_observable(spec: &ObservableSpec, where_: &str) -> Result<DichotomicObservable, CliError> {
    let located = |e: CoreError| CliError::Input(format!("at {where_}: {e}"));
    let lifted = |obs: DichotomicObservable, lift: &Option<LiftSpec>| match lift {
        Some(LiftSpec { site, other_dim }) => obs.lift(*site, *other_dim),
        None => obs,
    };
    match spec {
        ObservableSpec::Matrix {
            entries,
            allow_trivial,
            lift,
        } => {
            let m = ComplexMatrix::from_rows(&complex_rows(entries)).map_err(located)?;
            let obs =
                DichotomicObservable::from_matrix_with(&m, *allow_trivial).map_err(located)?;
            Ok(lifted(obs, lift))
        }
        ObservableSpec::Spin { theta, phi, lift } => {
            if !theta.is_finite() || !phi.is_finite() {
                return Err(CliError::Input(format!(
                    "at {where_}: spin angles must be finite"
                )));
            }
            Ok(lifted(
                DichotomicObservable::from_spin_direction(*theta, *phi),
                lift,
            ))
        }
        ObservableSpec::Pauli { name, lift } => Ok(lifted(pauli_observable(*name), lift)),
        ObservableSpec::Identity { dim } => {
            if *dim == 0 {
                return Err(CliError::Input(format!(
                    "at {where_}: identity dimension must be ≥ 1"
                )));
            }
            Ok(DichotomicObservable::identity(*dim))
        }
    }
}

/// Canonical explicit form of a scenario: amplitudes plus the four operator
/// matrices. Re-ingesting this file reconstructs the scenario through the
/// same eigendecomposition path every time, so results are reproducible
/// bit for bit.
pub fn scenario_to_file(scenario: &BellScenario, description: String) -> ScenarioFile {
    let matrix_spec = |m: &ComplexMatrix| ObservableSpec::Matrix {
        entries: m
            .entries()
            .into_iter()
            .map(|row| row.into_iter().map(|c| [c.re, c.im]).collect())
            .collect(),
        allow_trivial: true,
        lift: None,
    };
    ScenarioFile {
        description,
        state: StateSpec::Explicit {
            amplitudes: scenario
                .psi
                .amplitudes()
                .iter()
                .map(|c| [c.re, c.im])
                .collect(),
        },
        observables: ObservableSet {
            a: matrix_spec(scenario.a.operator()),
            a_prime: matrix_spec(scenario.a_prime.operator()),
            b: matrix_spec(scenario.b.operator()),
            b_prime: matrix_spec(scenario.b_prime.operator()),
        },
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct NormTermsSection {
    pub norms: TermNorms,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSection {
    pub symmetrized: NormTermsSection,
    pub unsymmetrized: NormTermsSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSection {
    pub correlations: Correlations,
    pub chsh_value: f64,
    pub chsh_via_operator: f64,
    /// ‖Ĉ‖ = λ_max magnitude: the best |CHSH| any state could reach with
    /// these observables.
    pub chsh_operator_norm: f64,
    pub classification: BoundClass,
    pub marginal_deviations: MarginalDeviationReport,
    pub norm_decomposition: NormSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSimulation {
    pub pair: (String, String),
    pub stats: EmpiricalStats,
    pub analytic_probabilities: [f64; 4],
    pub z_scores: [f64; 4],
    pub max_abs_z: f64,
    pub empirical_correlation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSection {
    pub samples: u64,
    pub seed: u64,
    pub pairs: Vec<PairSimulation>,
    pub empirical_chsh: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSection {
    pub constraint: String,
    pub dim: usize,
    pub budget: u64,
    pub restarts: u32,
    pub seed: u64,
    pub best_value: f64,
    pub evaluations: u64,
    pub converged: bool,
    pub best_parameters: Vec<f64>,
}

/// Self-contained result document: everything needed to reproduce it is
/// embedded (scenario, seeds, tool version); no timestamps by design.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub scenario: ScenarioFile,
    pub analysis: AnalysisSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSection>,
}

fn analyze(scenario: &BellScenario, tolerance: Option<f64>) -> Result<AnalysisSection, CliError> {
    let report = chsh_value(scenario)?;
    let classification = match tolerance {
        Some(tol) => classify_bound_with_tol(report.chsh_value, tol),
        None => report.classification,
    };
    let operator = chsh_operator(
        &scenario.a,
        &scenario.a_prime,
        &scenario.b,
        &scenario.b_prime,
    )?;
    let sym = norm_decomposition(
        &scenario.a,
        &scenario.a_prime,
        &scenario.b,
        &scenario.b_prime,
        true,
    )?;
    let unsym = norm_decomposition(
        &scenario.a,
        &scenario.a_prime,
        &scenario.b,
        &scenario.b_prime,
        false,
    )?;
    Ok(AnalysisSection {
        correlations: report.correlations,
        chsh_value: report.chsh_value,
        chsh_via_operator: report.chsh_via_operator,
        chsh_operator_norm: operator.operator_norm()?,
        classification,
        marginal_deviations: report.marginal_report,
        norm_decomposition: NormSection {
            symmetrized: NormTermsSection {
                norms: sym.norms,
                residual: sym.residual,
            },
            unsymmetrized: NormTermsSection {
                norms: unsym.norms,
                residual: unsym.residual,
            },
        },
    })
}

fn simulate_pairs(
    scenario: &BellScenario,
    samples: u64,
    seed: u64,
) -> Result<SimulationSection, CliError> {
    let pairs: [(&DichotomicObservable, &DichotomicObservable); 4] = [
        (&scenario.a, &scenario.b),
        (&scenario.a, &scenario.b_prime),
        (&scenario.a_prime, &scenario.b_prime),
        (&scenario.a_prime, &scenario.b),
    ];
    let mut sections = Vec::with_capacity(4);
    let mut empirical = [0.0f64; 4];
    for (k, (a, b)) in pairs.into_iter().enumerate() {
        // Distinct ChaCha key per pair; batch streams are derived inside run.
        let pair_seed = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let stats = mc_run(samples, pair_seed, &scenario.psi, a, b)?;
        let analytic = mixed_joint_distribution(&scenario.psi, a, b)?;
        let (_, z_scores) = compare(&stats, &analytic)?;
        let max_abs_z = z_scores.iter().fold(0.0f64, |acc, z| acc.max(z.abs()));
        let mut correlation = 0.0;
        for i in Sign::BOTH {
            for j in Sign::BOTH {
                correlation += i.value() * j.value() * stats.frequency(i, j);
            }
        }
        empirical[k] = correlation;
        sections.push(PairSimulation {
            pair: stats.labels.clone(),
            stats,
            analytic_probabilities: analytic.probabilities(),
            z_scores,
            max_abs_z,
            empirical_correlation: correlation,
        });
    }
    Ok(SimulationSection {
        samples,
        seed,
        pairs: sections,
        empirical_chsh: empirical[0] - empirical[1] + empirical[2] + empirical[3],
    })
}

// ---------------------------------------------------------------------------
// Command-line interface
// ---------------------------------------------------------------------------

/// Bell-CHSH analysis for uniformly mixed sequential measurements.
#[derive(Debug, Parser)]
#[command(name = "chsh-seq", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the analytic pipeline on a scenario file.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the classification tolerance at the bound thresholds.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Monte Carlo simulation of all four observable pairs.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Trajectories per observable pair.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Search for the largest attainable CHSH value under a constraint.
    Optimize {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// One of: free, product_form, a_equals_a_prime, primes_identity.
        #[arg(long, default_value = "free")]
        constraint: String,
        /// Objective evaluations per restart.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Evaluate a family of scenarios over an angle grid.
    Sweep {
        /// Scenario family; only `spin_angles` is defined: singlet state,
        /// Alice/Bob spin observables at in-plane angles, product form.
        #[arg(long, default_value = "spin_angles")]
        family: String,
        /// Per-angle specs `a=..,a_prime=..,b=..,b_prime=..` where each spec
        /// is a number, a range `start:stop:steps`, or an offset like
        /// `b+0.785` relative to another angle.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Output format: csv (default) or json.
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

/// Runs one parsed command to completion.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            output,
            tolerance,
        } => {
            let file = ScenarioFile::load(&scenario)?;
            let built = file.build()?;
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                scenario: file,
                analysis: analyze(&built, tolerance)?,
                simulation: None,
                search: None,
            };
            emit(&render_json(&report)?, output.as_deref())
        }
        Command::Simulate {
            scenario,
            samples,
            seed,
            output,
            tolerance,
        } => {
            if samples == 0 {
                return Err(CliError::Input("--samples must be at least 1".into()));
            }
            let file = ScenarioFile::load(&scenario)?;
            let built = file.build()?;
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                scenario: file,
                analysis: analyze(&built, tolerance)?,
                simulation: Some(simulate_pairs(&built, samples, seed)?),
                search: None,
            };
            emit(&render_json(&report)?, output.as_deref())
        }
        Command::Optimize {
            dim,
            constraint,
            budget,
            restarts,
            seed,
            output,
            tolerance,
        } => {
            let constraint: Constraint = constraint.parse()?;
            let space = SearchSpace::new(dim, constraint)?;
            let result = search(&space, budget, restarts, seed)?;
            // Canonicalize the winning scenario and recompute the analysis
            // from the canonical form, so the emitted file reproduces the
            // report exactly when re-run.
            let emitted = scenario_to_file(
                &result.best_scenario,
                format!(
                    "best scenario found by `optimize --dim {dim} --constraint {} --seed {seed}`",
                    constraint.name()
                ),
            );
            let rebuilt = emitted.build()?;
            let report = Report {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                scenario: emitted,
                analysis: analyze(&rebuilt, tolerance)?,
                simulation: None,
                search: Some(SearchSection {
                    constraint: constraint.name().into(),
                    dim,
                    budget,
                    restarts,
                    seed,
                    best_value: result.best_value,
                    evaluations: result.evaluations,
                    converged: result.converged,
                    best_parameters: result.best_parameters,
                }),
            };
            emit(&render_json(&report)?, output.as_deref())
        }
        Command::Sweep {
            family,
            grid,
            output,
            format,
        } => {
            if family != "spin_angles" {
                return Err(CliError::Input(format!(
                    "unknown family '{family}' (expected spin_angles)"
                )));
            }
            let rows = sweep_spin_angles(&grid)?;
            let text = match format.as_str() {
                "csv" => render_sweep_csv(&rows),
                "json" => render_json(&rows)?,
                other => {
                    return Err(CliError::Input(format!(
                        "unknown format '{other}' (expected csv or json)"
                    )))
                }
            };
            emit(&text, output.as_deref())
        }
    }
}

fn render_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

/// One evaluated grid point of the spin-angle family.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub theta_a: f64,
    pub theta_a_prime: f64,
    pub theta_b: f64,
    pub theta_b_prime: f64,
    pub e_ab: f64,
    pub e_ab_prime: f64,
    pub e_a_prime_b_prime: f64,
    pub e_a_prime_b: f64,
    pub chsh: f64,
    pub max_marginal_deviation: f64,
    pub classification: BoundClass,
}

#[derive(Debug, Clone, PartialEq)]
enum AngleSpec {
    Fixed(f64),
    Range { start: f64, stop: f64, steps: usize },
    Offset { reference: usize, delta: f64 },
}

const ANGLE_KEYS: [&str; 4] = ["a", "a_prime", "b", "b_prime"];

fn parse_angle_spec(key_index: usize, value: &str) -> Result<AngleSpec, CliError> {
    let value = value.trim();
    // Offset form: another angle's key followed by a signed delta.
    for (ref_index, ref_key) in ANGLE_KEYS.iter().enumerate() {
        if let Some(rest) = value.strip_prefix(ref_key) {
            if rest.starts_with('+') || rest.starts_with('-') {
                if ref_index == key_index {
                    return Err(CliError::Input(format!(
                        "grid angle '{}' cannot reference itself",
                        ANGLE_KEYS[key_index]
                    )));
                }
                let delta: f64 = rest.parse().map_err(|_| {
                    CliError::Input(format!("invalid offset '{rest}' in grid spec '{value}'"))
                })?;
                return Ok(AngleSpec::Offset {
                    reference: ref_index,
                    delta,
                });
            }
        }
    }
    let parts: Vec<&str> = value.split(':').collect();
    match parts.as_slice() {
        [single] => {
            let v: f64 = single.parse().map_err(|_| {
                CliError::Input(format!("invalid angle value '{single}' in grid spec"))
            })?;
            Ok(AngleSpec::Fixed(v))
        }
        [start, stop, steps] => {
            let start: f64 = start
                .parse()
                .map_err(|_| CliError::Input(format!("invalid range start '{start}'")))?;
            let stop: f64 = stop
                .parse()
                .map_err(|_| CliError::Input(format!("invalid range stop '{stop}'")))?;
            let steps: usize = steps
                .parse()
                .map_err(|_| CliError::Input(format!("invalid step count '{steps}'")))?;
            if steps == 0 {
                return Err(CliError::Input("grid with 0 steps is empty".into()));
            }
            Ok(AngleSpec::Range { start, stop, steps })
        }
        _ => Err(CliError::Input(format!(
            "angle spec '{value}' must be a number, start:stop:steps, or an offset like b+0.785"
        ))),
    }
}

fn parse_grid(grid: &str) -> Result<[AngleSpec; 4], CliError> {
    let mut specs: [Option<AngleSpec>; 4] = [None, None, None, None];
    for part in grid.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part.split_once('=').ok_or_else(|| {
            CliError::Input(format!("grid entry '{part}' is not of the form key=value"))
        })?;
        let key_index = ANGLE_KEYS
            .iter()
            .position(|k| *k == key.trim())
            .ok_or_else(|| {
                CliError::Input(format!(
                    "unknown grid key '{key}' (expected one of a, a_prime, b, b_prime)"
                ))
            })?;
        if specs[key_index].is_some() {
            return Err(CliError::Input(format!("duplicate grid key '{key}'")));
        }
        specs[key_index] = Some(parse_angle_spec(key_index, value)?);
    }
    let mut out = Vec::with_capacity(4);
    for (k, spec) in specs.into_iter().enumerate() {
        out.push(spec.ok_or_else(|| {
            CliError::Input(format!("grid is missing angle '{}'", ANGLE_KEYS[k]))
        })?);
    }
    // Offsets may only reference non-offset specs.
    for spec in &out {
        if let AngleSpec::Offset { reference, .. } = spec {
            if matches!(out[*reference], AngleSpec::Offset { .. }) {
                return Err(CliError::Input(
                    "chained offset references are not supported".into(),
                ));
            }
        }
    }
    Ok([
        out[0].clone(),
        out[1].clone(),
        out[2].clone(),
        out[3].clone(),
    ])
}

fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![start];
    }
    let h = (stop - start) / (steps - 1) as f64;
    (0..steps).map(|k| start + h * k as f64).collect()
}

fn sweep_spin_angles(grid: &str) -> Result<Vec<SweepRow>, CliError> {
    let specs = parse_grid(grid)?;
    let axes: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| match s {
            AngleSpec::Fixed(v) => vec![*v],
            AngleSpec::Range { start, stop, steps } => linspace(*start, *stop, *steps),
            AngleSpec::Offset { .. } => vec![f64::NAN], // resolved per point
        })
        .collect();

    let mut rows = Vec::new();
    for &va in &axes[0] {
        for &vap in &axes[1] {
            for &vb in &axes[2] {
                for &vbp in &axes[3] {
                    let mut angles = [va, vap, vb, vbp];
                    for (k, spec) in specs.iter().enumerate() {
                        if let AngleSpec::Offset { reference, delta } = spec {
                            angles[k] = angles[*reference] + delta;
                        }
                    }
                    rows.push(evaluate_spin_point(angles)?);
                }
            }
        }
    }
    Ok(rows)
}

fn evaluate_spin_point(angles: [f64; 4]) -> Result<SweepRow, CliError> {
    let [ta, tap, tb, tbp] = angles;
    let spin_left = |t: f64| DichotomicObservable::from_spin_direction(t, 0.0).lift(Site::Left, 2);
    let spin_right =
        |t: f64| DichotomicObservable::from_spin_direction(t, 0.0).lift(Site::Right, 2);
    let scenario = BellScenario::new(
        singlet_state(),
        spin_left(ta),
        spin_left(tap),
        spin_right(tb),
        spin_right(tbp),
    )?;
    let report = chsh_value(&scenario)?;
    Ok(SweepRow {
        theta_a: ta,
        theta_a_prime: tap,
        theta_b: tb,
        theta_b_prime: tbp,
        e_ab: report.correlations.ab,
        e_ab_prime: report.correlations.ab_prime,
        e_a_prime_b_prime: report.correlations.a_prime_b_prime,
        e_a_prime_b: report.correlations.a_prime_b,
        chsh: report.chsh_value,
        max_marginal_deviation: report.marginal_report.max_abs_deviation(),
        classification: report.classification,
    })
}

fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "theta_a,theta_a_prime,theta_b,theta_b_prime,e_ab,e_ab_prime,e_a_prime_b_prime,e_a_prime_b,chsh,max_marginal_deviation,classification\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.theta_a,
            r.theta_a_prime,
            r.theta_b,
            r.theta_b_prime,
            r.e_ab,
            r.e_ab_prime,
            r.e_a_prime_b_prime,
            r.e_a_prime_b,
            r.chsh,
            r.max_marginal_deviation,
            r.classification
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn qubit_order_effect_json() -> String {
        r#"{
            "description": "order-effect qubit scenario",
            "state": {"amplitudes": [[1.0, 0.0], [0.0, 0.0]]},
            "observables": {
                "a": {"type": "pauli", "name": "z"},
                "a_prime": {"type": "pauli", "name": "x"},
                "b": {"type": "pauli", "name": "x"},
                "b_prime": {"type": "pauli", "name": "z"}
            }
        }"#
        .to_string()
    }

    #[test]
    fn parse_and_build_qubit_scenario() {
        let file = ScenarioFile::parse(&qubit_order_effect_json()).unwrap();
        let scenario = file.build().unwrap();
        assert_eq!(scenario.dim(), 2);
        let report = chsh_value(&scenario).unwrap();
        let alice_plus = report
            .marginal_report
            .entries()
            .iter()
            .find(|e| e.fixed_label == "A" && e.outcome == Sign::Plus)
            .unwrap();
        assert!((alice_plus.deviation + 0.25).abs() < 1e-12);
    }

    #[test]
    fn parse_error_reports_path() {
        let bad = r#"{"state": "singlet", "observables": {"a": {"type": "pauli", "name": "q"},
            "a_prime": {"type": "pauli", "name": "x"},
            "b": {"type": "pauli", "name": "x"},
            "b_prime": {"type": "pauli", "name": "z"}}}"#;
        let err = ScenarioFile::parse(bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("observables.a"), "{msg}");
    }

    #[test]
    fn non_unit_state_is_located_input_error() {
        let bad = r#"{
            "state": {"amplitudes": [[0.9, 0.0], [0.0, 0.0]]},
            "observables": {
                "a": {"type": "pauli", "name": "z"},
                "a_prime": {"type": "pauli", "name": "x"},
                "b": {"type": "pauli", "name": "x"},
                "b_prime": {"type": "pauli", "name": "z"}
            }
        }"#;
        let err = ScenarioFile::parse(bad).unwrap().build().unwrap_err();
        assert!(matches!(err, CliError::Input(_)));
        let msg = err.to_string();
        assert!(msg.contains("normalized"), "{msg}");
        assert!(msg.contains("state.amplitudes"), "{msg}");
    }

    #[test]
    fn unknown_state_name_is_rejected() {
        let bad = r#"{
            "state": "triplet",
            "observables": {
                "a": {"type": "pauli", "name": "z", "lift": {"site": "left", "other_dim": 2}},
                "a_prime": {"type": "pauli", "name": "x", "lift": {"site": "left", "other_dim": 2}},
                "b": {"type": "pauli", "name": "x", "lift": {"site": "right", "other_dim": 2}},
                "b_prime": {"type": "pauli", "name": "z", "lift": {"site": "right", "other_dim": 2}}
            }
        }"#;
        let err = ScenarioFile::parse(bad).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("unknown state name"));
    }

    #[test]
    fn scenario_file_round_trips_through_json() {
        let file = ScenarioFile::parse(&qubit_order_effect_json()).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let again: ScenarioFile = serde_json::from_str(&text).unwrap();
        assert_eq!(file, again);
    }

    #[test]
    fn canonical_scenario_reproduces_results_exactly() {
        let file = ScenarioFile::parse(&qubit_order_effect_json()).unwrap();
        let scenario = file.build().unwrap();
        let emitted = scenario_to_file(&scenario, String::new());
        let text = serde_json::to_string(&emitted).unwrap();
        let rebuilt: ScenarioFile = serde_json::from_str(&text).unwrap();
        assert_eq!(emitted, rebuilt);
        let first = chsh_value(&rebuilt.build().unwrap()).unwrap();
        let second = chsh_value(&rebuilt.build().unwrap()).unwrap();
        assert_eq!(first.chsh_value, second.chsh_value);
        assert_eq!(first.correlations, second.correlations);
    }

    #[test]
    fn grid_parsing_variants() {
        let specs = parse_grid("a=0,a_prime=1.5,b=0:3.25:5,b_prime=b+0.5").unwrap();
        assert_eq!(specs[0], AngleSpec::Fixed(0.0));
        assert_eq!(specs[1], AngleSpec::Fixed(1.5));
        assert_eq!(
            specs[2],
            AngleSpec::Range {
                start: 0.0,
                stop: 3.25,
                steps: 5
            }
        );
        assert_eq!(
            specs[3],
            AngleSpec::Offset {
                reference: 2,
                delta: 0.5
            }
        );
    }

    #[test]
    fn grid_rejects_empty_and_malformed() {
        assert!(parse_grid("a=0,a_prime=1,b=0:1:0,b_prime=0").is_err());
        assert!(parse_grid("a=0,b=1,b_prime=2").is_err());
        assert!(parse_grid("a=zebra,a_prime=1,b=2,b_prime=3").is_err());
        assert!(parse_grid("a=b+1,a_prime=1,b=a+1,b_prime=3").is_err());
        assert!(parse_grid("a=a+1,a_prime=1,b=2,b_prime=3").is_err());
    }

    #[test]
    fn single_point_grid_yields_one_row() {
        let rows = sweep_spin_angles(
            "a=0,a_prime=1.5707963267948966,b=0.7853981633974483,b_prime=2.356194490192345",
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].chsh.abs() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn sweep_finds_tsirelson_maximum_at_quarter_pi() {
        let grid = format!(
            "a=0,a_prime={},b=0:{}:65,b_prime=b+{}",
            FRAC_PI_2,
            std::f64::consts::PI,
            FRAC_PI_2
        );
        let rows = sweep_spin_angles(&grid).unwrap();
        assert_eq!(rows.len(), 65);
        let best = rows
            .iter()
            .max_by(|x, y| x.chsh.abs().total_cmp(&y.chsh.abs()))
            .unwrap();
        assert!((best.chsh.abs() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
        assert!((best.theta_b - FRAC_PI_4).abs() < 1e-12);
        for row in &rows {
            assert!(row.max_marginal_deviation <= 1e-12);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = sweep_spin_angles("a=0,a_prime=0.5,b=0:1:3,b_prime=1.0").unwrap();
        let csv = render_sweep_csv(&rows);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("theta_a,theta_a_prime,"));
        assert!(lines[1].split(',').count() == 11);
    }
}
