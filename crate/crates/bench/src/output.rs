//! Result-file emission. All writers format floats with Rust's shortest
//! round-trip representation, so identical inputs produce identical bytes.

use std::fs;
use std::path::Path;

use hadamard_pg::analysis::AuditReport;
use hadamard_pg::hadamard::RunTrace;

use crate::experiment::MabCurveRow;
use crate::BenchError;

/// Trace CSV for offline plotting. Column order: `k`, `v_mu`, `delta_k`,
/// then `b_s{i}` for every state, then `grad_norm_s{i}` for every state.
pub fn write_trace_csv(path: &Path, trace: &RunTrace) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    let states = trace
        .records
        .first()
        .map_or(0, |r| r.b_gap.len());
    let mut header = vec!["k".to_string(), "v_mu".to_string(), "delta_k".to_string()];
    header.extend((0..states).map(|s| format!("b_s{s}")));
    header.extend((0..states).map(|s| format!("grad_norm_s{s}")));
    w.write_record(&header)?;
    for rec in &trace.records {
        let mut row = vec![rec.k.to_string(), rec.v_mu.to_string(), rec.delta.to_string()];
        row.extend(rec.b_gap.iter().map(f64::to_string));
        row.extend(rec.grad_norm.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Audit report as pretty-printed JSON: one object per check with name,
/// status, tolerance, worst violation and iteration, preceded by the
/// constants the audit ran against.
pub fn write_audit_json(path: &Path, report: &AuditReport) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Aggregate comparison curves as CSV with columns
/// `k,method,mean_log10_err,std_log10_err`.
pub fn write_mab_csv(path: &Path, rows: &[MabCurveRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "method", "mean_log10_err", "std_log10_err"])?;
    for row in rows {
        w.write_record([
            row.k.to_string(),
            row.method.clone(),
            row.mean_log10_err.to_string(),
            row.std_log10_err.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The same curves as a JSON array.
pub fn write_mab_json(path: &Path, rows: &[MabCurveRow]) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(rows)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
