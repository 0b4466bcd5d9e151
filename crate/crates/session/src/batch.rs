//! File-level operations behind the CLI subcommands.

use std::fs;
use std::path::Path;

use freedrag_core::instruction::ConfigOverrides;
use freedrag_core::{DragMethod, GeneratorBackend, Instruction, Method, RunStatus};
use freedrag_eval::metrics::{
    mean_distance_oracle, run_suite, start_method, MetricReport, SuiteOptions,
};
use freedrag_eval::suites;
use serde::{Deserialize, Serialize};

use crate::artifacts::{trace_rows, write_render, write_reports, write_trace_csv};
use crate::error::{Result, SessionError};

pub fn load_instruction(path: &Path) -> Result<Instruction> {
    let inst: Instruction = serde_json::from_slice(&fs::read(path)?)?;
    inst.validate()?;
    Ok(inst)
}

/// A suite file is a JSON array of instructions.
pub fn load_suite(path: &Path) -> Result<Vec<Instruction>> {
    let suite: Vec<Instruction> = serde_json::from_slice(&fs::read(path)?)?;
    for inst in &suite {
        inst.validate()?;
    }
    Ok(suite)
}

pub fn builtin_suite(name: &str) -> Result<Vec<Instruction>> {
    match name {
        "convergence" => Ok(suites::convergence_suite()),
        "standard" => Ok(suites::standard_suite()),
        "adversarial" => Ok(suites::adversarial_suite()),
        other => Err(SessionError::BadRequest(format!(
            "unknown suite {other:?} (expected convergence, standard or adversarial)"
        ))),
    }
}

/// Summary written as `report.json` by `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub status: RunStatus,
    pub drags: usize,
    pub substeps: usize,
    pub handles: Vec<[f64; 2]>,
    /// Blob backends only.
    pub mean_distance: Option<f64>,
}

/// Runs one instruction for at most `max_drags` steps (to completion when
/// `None`) and writes `trace.csv`, `initial.png`, `final.png` (with JSON
/// scale sidecars) and `report.json` into `out`.
pub fn run_to_dir(
    inst: &Instruction,
    extra: &ConfigOverrides,
    max_drags: Option<usize>,
    out: &Path,
) -> Result<RunReport> {
    inst.validate()?;
    fs::create_dir_all(out)?;
    let backend = inst.backend.build::<f64>()?;
    let w0 = inst.backend.initial_latent::<f64>()?;
    write_render(out, "initial", &backend.generate(&w0)?)?;
    let mut method = start_method(inst, w0, extra)?;
    let mut drags = 0;
    while !method.status().is_finished() && max_drags.is_none_or(|m| drags < m) {
        method.step()?;
        drags += 1;
    }
    write_trace_csv(
        fs::File::create(out.join("trace.csv"))?,
        &trace_rows(method.trace()),
    )?;
    write_render(out, "final", &backend.generate(method.latent())?)?;
    let report = RunReport {
        method: inst.method,
        status: method.status(),
        drags,
        substeps: method.substeps_used(),
        handles: method.handles().iter().map(|p| [p.x, p.y]).collect(),
        mean_distance: if inst.backend.is_blob() {
            Some(mean_distance_oracle(inst, method.latent(), &backend)?)
        } else {
            None
        },
    };
    fs::write(out.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

/// Runs and scores a suite, writing `report.json` and `report.csv`.
pub fn suite_to_dir(
    suite: &[Instruction],
    opts: &SuiteOptions,
    out: &Path,
) -> Result<Vec<MetricReport>> {
    fs::create_dir_all(out)?;
    let reports = run_suite::<f64>(suite, opts);
    write_reports(out, &reports)?;
    Ok(reports)
}

/// One configuration in an ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub overrides: ConfigOverrides,
}

impl Variant {
    pub fn reference() -> Self {
        Variant {
            name: "reference".into(),
            overrides: ConfigOverrides::default(),
        }
    }

    /// Name derived from the overrides that are set.
    pub fn from_overrides(overrides: ConfigOverrides) -> Self {
        let mut parts = vec![];
        if let Some(l) = overrides.l {
            parts.push(format!("l{l}"));
        }
        if let Some(d) = overrides.d {
            parts.push(format!("d{d}"));
        }
        if overrides.update_template == Some(false) {
            parts.push("no-update".into());
        }
        if overrides.backtracking == Some(false) {
            parts.push("no-backtracking".into());
        }
        let name = if parts.is_empty() {
            "reference".into()
        } else {
            parts.join("_")
        };
        Variant { name, overrides }
    }
}

/// Aggregates of one variant over a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub name: String,
    pub overrides: ConfigOverrides,
    pub runs: usize,
    pub errors: usize,
    pub mean_ccsd: Option<f64>,
    pub mean_distance: Option<f64>,
    /// Freeze rows over all forward trace rows.
    pub freeze_fraction: f64,
    pub fallback_fraction: f64,
    /// Forward runs that ran out of substeps.
    pub budget_exhausted_fraction: f64,
    pub mean_move: Option<f64>,
}

fn mean(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    freedrag_eval::metrics::mean_of(v)
}

pub fn summarize(variant: &Variant, reports: &[MetricReport]) -> VariantSummary {
    let rows: usize = reports.iter().map(|r| r.record_count).sum();
    let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    VariantSummary {
        name: variant.name.clone(),
        overrides: variant.overrides.clone(),
        runs: reports.len(),
        errors: reports.iter().filter(|r| r.error.is_some()).count(),
        mean_ccsd: mean(reports.iter().map(|r| r.ccsd)),
        mean_distance: mean(reports.iter().map(|r| r.mean_distance)),
        freeze_fraction: frac(reports.iter().map(|r| r.freeze_count).sum(), rows),
        fallback_fraction: frac(reports.iter().map(|r| r.fallback_count).sum(), rows),
        budget_exhausted_fraction: frac(
            reports
                .iter()
                .filter(|r| r.forward_status == Some(RunStatus::StepBudgetExhausted))
                .count(),
            reports.len(),
        ),
        mean_move: mean(reports.iter().map(|r| r.mean_move)),
    }
}

/// Runs every variant over the suite with the engine method. Per-variant
/// reports go to `out/<name>/`, summaries to `out/ablation.json`.
pub fn ablate_to_dir(
    suite: &[Instruction],
    variants: &[Variant],
    out: &Path,
) -> Result<Vec<VariantSummary>> {
    fs::create_dir_all(out)?;
    let mut summaries = Vec::with_capacity(variants.len());
    for v in variants {
        let opts = SuiteOptions {
            overrides: v.overrides.clone(),
            method: Some(Method::FreeDrag),
        };
        let reports = suite_to_dir(suite, &opts, &out.join(&v.name))?;
        summaries.push(summarize(v, &reports));
    }
    fs::write(
        out.join("ablation.json"),
        serde_json::to_vec_pretty(&summaries)?,
    )?;
    Ok(summaries)
}
