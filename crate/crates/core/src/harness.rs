//! Experiment harness: single recovery trials, phase-transition sweeps
//! over (n, m/n, anchor), lemma verification runs, and CSV/JSON reporting
//! with full seed provenance.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpcore::{solve_phasemax, LpInstance, LpStatus};
use crate::model::{
    distance_mod_sign, measure, sample_gaussian_ensemble, sample_signal, SignalDist,
};
use crate::rng::mix_seed;
use crate::spectral::{plain_spectral_anchor, synthetic_anchor, truncated_spectral_anchor, Anchor};
use crate::theory::{
    expectation_closed_form, isometry_deviation, l1_lower_bound_probe, monte_carlo_expectation,
    AngleQuery, ConcentrationReport,
};

/// How the anchor vector is produced for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum AnchorSpec {
    TruncatedSpectral,
    PlainSpectral,
    Synthetic { beta: f64 },
}

impl AnchorSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AnchorSpec::TruncatedSpectral => "truncated-spectral",
            AnchorSpec::PlainSpectral => "plain-spectral",
            AnchorSpec::Synthetic { .. } => "synthetic",
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            AnchorSpec::Synthetic { beta } => *beta,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EigOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000 }
    }
}

/// One end-to-end recovery experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: usize,
    pub m: usize,
    pub anchor: AnchorSpec,
    pub signal_dist: SignalDist,
    pub seed: u64,
    pub threshold: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub eig: EigOptions,
}

impl TrialConfig {
    pub fn new(n: usize, m: usize, anchor: AnchorSpec, seed: u64) -> Self {
        Self {
            n,
            m,
            anchor,
            signal_dist: SignalDist::UnitSphereUniform,
            seed,
            threshold: 1e-5,
            solver: SolverOptions::default(),
            eig: EigOptions::default(),
        }
    }
}

/// Outcome of one trial. A failed pipeline stage becomes a status string,
/// never a crash; every numeric field is populated on every exit path
/// (NaN marks fields the failed stage could not produce).
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub m: usize,
    pub anchor_method: String,
    pub beta: f64,
    pub seed: u64,
    pub threshold: f64,
    pub anchor_rel_error: f64,
    pub rel_error_mod_sign: f64,
    pub success: bool,
    pub status: String,
    pub duality_gap: f64,
    pub iterations: usize,
    pub wall_time: f64,
}

fn build_anchor(cfg: &TrialConfig, e: &crate::model::Ensemble, x0: &crate::model::Signal, seed: u64) -> Result<Anchor> {
    match cfg.anchor {
        AnchorSpec::TruncatedSpectral => {
            truncated_spectral_anchor(e, cfg.eig.tol, cfg.eig.max_iter, seed)
        }
        AnchorSpec::PlainSpectral => plain_spectral_anchor(e, cfg.eig.tol, cfg.eig.max_iter, seed),
        AnchorSpec::Synthetic { beta } => synthetic_anchor(x0, beta, seed),
    }
}

/// Runs the full pipeline: sample signal and ensemble, measure, build the
/// anchor, solve the LP, score modulo sign. Deterministic given the
/// config (except `wall_time`).
pub fn run_trial(cfg: &TrialConfig) -> TrialRecord {
    let start = Instant::now();
    let mut record = TrialRecord {
        n: cfg.n,
        m: cfg.m,
        anchor_method: cfg.anchor.label().to_string(),
        beta: cfg.anchor.beta(),
        seed: cfg.seed,
        threshold: cfg.threshold,
        anchor_rel_error: f64::NAN,
        rel_error_mod_sign: f64::NAN,
        success: false,
        status: String::new(),
        duality_gap: f64::NAN,
        iterations: 0,
        wall_time: 0.0,
    };

    let signal_seed = mix_seed(cfg.seed, &[0]);
    let ensemble_seed = mix_seed(cfg.seed, &[1]);
    let anchor_seed = mix_seed(cfg.seed, &[2]);

    let outcome = (|| -> Result<()> {
        let x0 = sample_signal(cfg.n, signal_seed, cfg.signal_dist)?;
        let a = sample_gaussian_ensemble(cfg.n, cfg.m, ensemble_seed)?;
        let e = measure(a, &x0)?.with_seed(ensemble_seed);
        let anchor = build_anchor(cfg, &e, &x0, anchor_seed)?;
        record.anchor_rel_error =
            distance_mod_sign(&anchor.phi, &x0, cfg.threshold)?.rel_error_mod_sign;

        let inst = LpInstance::from_measurements(&anchor, &e)?;
        let sol = solve_phasemax(&inst, cfg.solver.gap_tol, cfg.solver.feas_tol, cfg.solver.max_iter)?;
        record.status = sol.status.to_string();
        record.duality_gap = sol.duality_gap;
        record.iterations = sol.iterations;

        let metric = distance_mod_sign(&sol.x_hat, &x0, cfg.threshold)?;
        record.rel_error_mod_sign = metric.rel_error_mod_sign;
        record.success = metric.success && sol.status == LpStatus::Optimal;
        Ok(())
    })();
    if let Err(err) = outcome {
        record.status = format!("error:{err}");
        record.success = false;
    }
    record.wall_time = start.elapsed().as_secs_f64();
    record
}

/// A grid of recovery experiments over n values and oversampling ratios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ns: Vec<usize>,
    pub ratios: Vec<f64>,
    pub anchor: AnchorSpec,
    pub trials: usize,
    pub base_seed: u64,
    pub threshold: f64,
    pub signal_dist: SignalDist,
    /// 0 means the rayon default.
    pub threads: usize,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub eig: EigOptions,
}

impl SweepConfig {
    pub fn new(ns: Vec<usize>, ratios: Vec<f64>, anchor: AnchorSpec, trials: usize, base_seed: u64) -> Self {
        Self {
            ns,
            ratios,
            anchor,
            trials,
            base_seed,
            threshold: 1e-5,
            signal_dist: SignalDist::UnitSphereUniform,
            threads: 0,
            solver: SolverOptions::default(),
            eig: EigOptions::default(),
        }
    }

    /// Cells in deterministic enumeration order: n-major, ratio-minor.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for &n in &self.ns {
            for &ratio in &self.ratios {
                let m = ((n as f64) * ratio).round().max(1.0) as usize;
                cells.push((n, m));
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub mean_rel_error: f64,
    pub mean_anchor_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub base_seed: u64,
    pub anchor_method: String,
    pub beta: f64,
    pub threshold: f64,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<TrialRecord>,
    pub summary: SweepSummary,
}

/// Runs every cell of the grid. Trial seeds are mix(base_seed, cell_index,
/// trial_index), so any single trial can be re-run in isolation. Records
/// come back sorted by (cell, trial) regardless of the worker count.
pub fn run_sweep(sw: &SweepConfig) -> Result<SweepResult> {
    if sw.trials == 0 {
        return Err(Error::Domain("sweep needs at least one trial per cell".into()));
    }
    let cells = sw.cells();
    let mut jobs = Vec::with_capacity(cells.len() * sw.trials);
    for (cell_idx, &(n, m)) in cells.iter().enumerate() {
        for trial_idx in 0..sw.trials {
            let mut cfg = TrialConfig::new(n, m, sw.anchor, mix_seed(sw.base_seed, &[cell_idx as u64, trial_idx as u64]));
            cfg.threshold = sw.threshold;
            cfg.signal_dist = sw.signal_dist;
            cfg.solver = sw.solver;
            cfg.eig = sw.eig;
            jobs.push(cfg);
        }
    }

    let run_all = || jobs.par_iter().map(run_trial).collect::<Vec<_>>();
    let records = if sw.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(sw.threads)
            .build()
            .map_err(|e| Error::Numerical(e.to_string()))?
            .install(run_all)
    } else {
        run_all()
    };

    let mut summaries = Vec::with_capacity(cells.len());
    for (cell_idx, &(n, m)) in cells.iter().enumerate() {
        let chunk = &records[cell_idx * sw.trials..(cell_idx + 1) * sw.trials];
        let successes = chunk.iter().filter(|r| r.success).count();
        let mean = |f: fn(&TrialRecord) -> f64| {
            chunk.iter().map(f).sum::<f64>() / chunk.len() as f64
        };
        summaries.push(CellSummary {
            n,
            m,
            ratio: m as f64 / n as f64,
            trials: sw.trials,
            successes,
            rate: successes as f64 / sw.trials as f64,
            mean_rel_error: mean(|r| r.rel_error_mod_sign),
            mean_anchor_error: mean(|r| r.anchor_rel_error),
        });
    }

    Ok(SweepResult {
        records,
        summary: SweepSummary {
            base_seed: sw.base_seed,
            anchor_method: sw.anchor.label().to_string(),
            beta: sw.anchor.beta(),
            threshold: sw.threshold,
            cells: summaries,
        },
    })
}

/// Fixed CSV schema: one header row, one row per trial, columns in
/// TrialRecord field order, floats at 17 significant digits.
pub const CSV_HEADER: &str = "n,m,anchor_method,beta,seed,threshold,anchor_rel_error,rel_error_mod_sign,success,status,duality_gap,iterations,wall_time";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.m,
            r.anchor_method,
            fmt_f64(r.beta),
            r.seed,
            fmt_f64(r.threshold),
            fmt_f64(r.anchor_rel_error),
            fmt_f64(r.rel_error_mod_sign),
            r.success,
            r.status,
            fmt_f64(r.duality_gap),
            r.iterations,
            fmt_f64(r.wall_time),
        );
    }
    out
}

pub fn write_records_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(records_to_csv(records).as_bytes())?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Confirms an output path is writable before any compute happens.
pub fn ensure_writable(path: &Path) -> Result<()> {
    fs::File::create(path)?;
    Ok(())
}

/// Which lemma-scale verification to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaId {
    Isometry,
    L1LowerBound,
    Expectation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpectationPoint {
    pub theta: f64,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub stderr: f64,
    pub within_3_stderr: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpectationReport {
    pub trials: usize,
    pub seed: u64,
    pub points: Vec<ExpectationPoint>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub n: usize,
    pub m: usize,
    pub seeds: usize,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// Parameters for [`verify_lemmas`]; unused fields are ignored by the
/// lemma that does not need them.
#[derive(Debug, Clone)]
pub struct LemmaParams {
    pub n: usize,
    pub m: usize,
    pub seeds: usize,
    pub trials: usize,
    pub thetas: Vec<f64>,
    pub delta: f64,
    pub probes: usize,
    pub minimizer_steps: usize,
}

impl Default for LemmaParams {
    fn default() -> Self {
        Self {
            n: 50,
            m: 5000,
            seeds: 20,
            trials: 1_000_000,
            thetas: (0..9).map(|k| std::f64::consts::PI * k as f64 / 8.0).collect(),
            delta: 0.1,
            probes: 200,
            minimizer_steps: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum LemmaReport {
    Isometry(IsometryReport),
    L1LowerBound(ConcentrationReport),
    Expectation(ExpectationReport),
}

/// Dispatches a lemma verification run and returns its serializable report.
pub fn verify_lemmas(lemma: LemmaId, params: &LemmaParams, seed: u64) -> Result<LemmaReport> {
    match lemma {
        LemmaId::Isometry => {
            let mut deviations = Vec::with_capacity(params.seeds);
            for s in 0..params.seeds {
                let a = sample_gaussian_ensemble(params.n, params.m, mix_seed(seed, &[s as u64]))?;
                deviations.push(isometry_deviation(&a, 1e-4, 10_000)?);
            }
            let max_deviation = deviations.iter().cloned().fold(0.0f64, f64::max);
            Ok(LemmaReport::Isometry(IsometryReport {
                n: params.n,
                m: params.m,
                seeds: params.seeds,
                deviations,
                max_deviation,
            }))
        }
        LemmaId::L1LowerBound => {
            let x0 = sample_signal(params.n, mix_seed(seed, &[0]), SignalDist::UnitSphereUniform)?;
            let a = sample_gaussian_ensemble(params.n, params.m, mix_seed(seed, &[1]))?;
            let e = measure(a, &x0)?;
            let report = l1_lower_bound_probe(
                &e,
                params.delta,
                params.probes,
                params.minimizer_steps,
                mix_seed(seed, &[2]),
            )?;
            Ok(LemmaReport::L1LowerBound(report))
        }
        LemmaId::Expectation => {
            let mut points = Vec::with_capacity(params.thetas.len());
            for (i, &theta) in params.thetas.iter().enumerate() {
                let q = AngleQuery::new(theta)?;
                let closed_form = expectation_closed_form(q);
                let (mc_estimate, stderr) =
                    monte_carlo_expectation(q, 2, params.trials, mix_seed(seed, &[i as u64]))?;
                points.push(ExpectationPoint {
                    theta,
                    closed_form,
                    mc_estimate,
                    stderr,
                    within_3_stderr: (mc_estimate - closed_form).abs() <= 3.0 * stderr,
                });
            }
            let all_pass = points.iter().all(|p| p.within_3_stderr);
            Ok(LemmaReport::Expectation(ExpectationReport {
                trials: params.trials,
                seed,
                points,
                all_pass,
            }))
        }
    }
}
