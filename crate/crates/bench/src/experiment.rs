//! Experiment orchestration: the MDP run-and-audit pipeline and the
//! three-way bandit comparison.

use std::fs;
use std::path::{Path, PathBuf};

use hadamard_pg::analysis::{audit, compute_constants, estimate_lambda, AuditReport};
use hadamard_pg::baselines::{
    mab_hadamard_step, mab_softmax_npg_step, mab_softmax_pg_step, MabInstance,
};
use hadamard_pg::hadamard::{run, RunTrace, SphereParams, StepConfig};
use hadamard_pg::mdp::{solve_optimal, TabularMdp};
use serde::{Deserialize, Serialize};

use crate::generate::{generate_random_mab, generate_random_mdp};
use crate::output::{write_audit_json, write_mab_csv, write_mab_json, write_trace_csv};
use crate::BenchError;

/// Value-iteration tolerance shared by the inline and re-audit paths, so a
/// re-audit reproduces the inline report byte for byte.
pub const SOLVE_TOL: f64 = 1e-10;
/// Tie tolerance for optimal-action set membership.
pub const TIE_TOL: f64 = 1e-9;
/// Additive tolerance for every audited inequality.
pub const AUDIT_TOL: f64 = 1e-8;

/// Output format for result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Configuration of one `run` invocation.
#[derive(Debug, Clone)]
pub struct MdpRunConfig {
    pub seed: u64,
    pub states: usize,
    pub actions: usize,
    pub gamma: f64,
    pub kappa: f64,
    pub iters: usize,
    pub out: PathBuf,
    pub format: Format,
    pub mdp_file: Option<PathBuf>,
}

/// Self-contained trace artifact: the MDP it was recorded on, the step-size
/// configuration and the per-iteration records. Everything a re-audit needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceFile {
    pub mdp: TabularMdp,
    pub kappa: f64,
    pub eta: f64,
    pub trace: RunTrace,
}

/// Files produced by one experiment, plus the inline audit report.
#[derive(Debug)]
pub struct MdpRunOutput {
    pub trace_path: PathBuf,
    pub audit_path: PathBuf,
    pub report: AuditReport,
}

fn load_mdp(path: &Path) -> Result<TabularMdp, BenchError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs the sphere-constrained algorithm from the uniform initialization,
/// records the trace, audits it and writes both artifacts:
/// `<out>.trace.json` (or `.trace.csv`) and `<out>.audit.json`.
pub fn run_mdp_experiment(cfg: &MdpRunConfig) -> Result<MdpRunOutput, BenchError> {
    let mdp = match &cfg.mdp_file {
        Some(path) => load_mdp(path)?,
        None => {
            if cfg.states < 1 || cfg.actions < 1 {
                return Err(BenchError::InvalidSpec(
                    "--states and --actions must be at least 1".into(),
                ));
            }
            if !(0.0..1.0).contains(&cfg.gamma) {
                return Err(BenchError::InvalidSpec("--gamma must lie in [0,1)".into()));
            }
            generate_random_mdp(cfg.seed, cfg.states, cfg.actions, cfg.gamma)
        }
    };
    let step = StepConfig::from_kappa(cfg.kappa, mdp.gamma(), cfg.iters)
        .map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
    let opt = solve_optimal(&mdp, SOLVE_TOL, TIE_TOL)?;
    let init = SphereParams::uniform(mdp.num_states(), mdp.num_actions());
    let trace = run(&mdp, init, &step, &opt)?;

    let lambda = estimate_lambda(&trace);
    let consts = compute_constants(&mdp, &opt, cfg.kappa, lambda);
    let report = audit(&trace, &mdp, &opt, &consts, AUDIT_TOL)?;

    let trace_path = match cfg.format {
        Format::Json => {
            let path = cfg.out.with_extension("trace.json");
            let file = TraceFile {
                mdp: mdp.clone(),
                kappa: cfg.kappa,
                eta: step.eta(),
                trace: trace.clone(),
            };
            let mut text = serde_json::to_string_pretty(&file)?;
            text.push('\n');
            fs::write(&path, text)?;
            path
        }
        Format::Csv => {
            let path = cfg.out.with_extension("trace.csv");
            write_trace_csv(&path, &trace)?;
            path
        }
    };
    let audit_path = cfg.out.with_extension("audit.json");
    write_audit_json(&audit_path, &report)?;

    Ok(MdpRunOutput {
        trace_path,
        audit_path,
        report,
    })
}

/// Re-audits a JSON trace file produced by [`run_mdp_experiment`] and writes
/// the report. Deterministic: auditing an unmodified artifact reproduces the
/// inline report exactly.
pub fn audit_trace_file(trace_path: &Path, out: &Path) -> Result<AuditReport, BenchError> {
    let text = fs::read_to_string(trace_path)?;
    let file: TraceFile = serde_json::from_str(&text)?;
    let opt = solve_optimal(&file.mdp, SOLVE_TOL, TIE_TOL)?;
    let lambda = estimate_lambda(&file.trace);
    let consts = compute_constants(&file.mdp, &opt, file.kappa, lambda);
    let report = audit(&file.trace, &file.mdp, &opt, &consts, AUDIT_TOL)?;
    write_audit_json(out, &report)?;
    Ok(report)
}

/// Identifiers of the three compared bandit methods, in output order.
pub const MAB_METHODS: [&str; 3] = ["hadamard_pg", "softmax_pg", "softmax_npg"];

/// Configuration of one `mab` invocation.
#[derive(Debug, Clone)]
pub struct MabCompareConfig {
    pub seed: u64,
    pub arms: usize,
    pub eta: f64,
    pub iters: usize,
    pub instances: usize,
}

/// One aggregate row of the comparison: statistics of log₁₀ value error at
/// iteration `k` for one method, across instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MabCurveRow {
    pub k: usize,
    pub method: String,
    pub mean_log10_err: f64,
    pub std_log10_err: f64,
}

/// Per-iteration one-shot value errors of the three methods on a single
/// instance, all started from the uniform policy. `errors[m][k]` is the
/// error of method `m` (in [`MAB_METHODS`] order) before step `k`.
pub fn mab_instance_errors(inst: &MabInstance, eta: f64, iters: usize) -> [Vec<f64>; 3] {
    let k = inst.num_arms();
    let mut pi = vec![1.0 / k as f64; k];
    let mut pg_logits = vec![0.0; k];
    let mut npg_logits = vec![0.0; k];
    let mut errors = [
        Vec::with_capacity(iters + 1),
        Vec::with_capacity(iters + 1),
        Vec::with_capacity(iters + 1),
    ];
    for _ in 0..=iters {
        errors[0].push(inst.value_error(&pi));
        errors[1].push(inst.value_error(&softmax(&pg_logits)));
        errors[2].push(inst.value_error(&softmax(&npg_logits)));
        pi = mab_hadamard_step(&pi, inst, eta);
        pg_logits = mab_softmax_pg_step(&pg_logits, inst, eta);
        npg_logits = mab_softmax_npg_step(&npg_logits, inst, eta);
    }
    errors
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Errors are floored here before taking log₁₀; fast methods drive the error
/// below the smallest positive double within the iteration budget.
pub const LOG_ERROR_FLOOR: f64 = f64::MIN_POSITIVE;

/// Runs the three methods on `instances` seeded instances (seeds
/// `seed..seed+instances`) and aggregates the per-iteration mean and
/// population standard deviation of log₁₀ value error per method.
pub fn mab_compare_curves(cfg: &MabCompareConfig) -> Result<Vec<MabCurveRow>, BenchError> {
    if cfg.arms < 1 || cfg.instances < 1 {
        return Err(BenchError::InvalidSpec(
            "--arms and --instances must be at least 1".into(),
        ));
    }
    if cfg.eta.is_nan() || cfg.eta <= 0.0 {
        return Err(BenchError::InvalidSpec("--eta must be positive".into()));
    }
    let all: Vec<[Vec<f64>; 3]> = (0..cfg.instances)
        .map(|i| {
            let inst = generate_random_mab(cfg.seed + i as u64, cfg.arms);
            mab_instance_errors(&inst, cfg.eta, cfg.iters)
        })
        .collect();

    let n = cfg.instances as f64;
    let mut rows = Vec::with_capacity((cfg.iters + 1) * 3);
    for k in 0..=cfg.iters {
        for (m, method) in MAB_METHODS.iter().enumerate() {
            let logs: Vec<f64> = all
                .iter()
                .map(|errs| errs[m][k].max(LOG_ERROR_FLOOR).log10())
                .collect();
            let mean = logs.iter().sum::<f64>() / n;
            let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
            rows.push(MabCurveRow {
                k,
                method: method.to_string(),
                mean_log10_err: mean,
                std_log10_err: var.sqrt(),
            });
        }
    }
    Ok(rows)
}

/// Runs the comparison and writes the aggregate curves to `out`.
pub fn run_mab_experiment(
    cfg: &MabCompareConfig,
    out: &Path,
    format: Format,
) -> Result<Vec<MabCurveRow>, BenchError> {
    let rows = mab_compare_curves(cfg)?;
    match format {
        Format::Csv => write_mab_csv(out, &rows)?,
        Format::Json => write_mab_json(out, &rows)?,
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_errors_never_increase() {
        for seed in 0..10 {
            let inst = generate_random_mab(seed, 5);
            let errors = mab_instance_errors(&inst, 0.4, 300);
            for pair in errors[0].windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
    }

    #[test]
    fn curves_are_deterministic() {
        let cfg = MabCompareConfig {
            seed: 3,
            arms: 4,
            eta: 0.4,
            iters: 50,
            instances: 5,
        };
        let a = mab_compare_curves(&cfg).unwrap();
        let b = mab_compare_curves(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.k, y.k);
            assert_eq!(x.method, y.method);
            assert_eq!(x.mean_log10_err.to_bits(), y.mean_log10_err.to_bits());
            assert_eq!(x.std_log10_err.to_bits(), y.std_log10_err.to_bits());
        }
        assert_eq!(a.len(), 51 * 3);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let cfg = MabCompareConfig {
            seed: 0,
            arms: 0,
            eta: 0.4,
            iters: 10,
            instances: 1,
        };
        assert!(matches!(
            mab_compare_curves(&cfg),
            Err(BenchError::InvalidSpec(_))
        ));
    }
}
