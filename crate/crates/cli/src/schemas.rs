//! JSON artifact schemas: solution paths, selection reports, estimates,
//! baseline fits, and metrics. All schemas are versioned and reject unknown
//! fields by name.

use std::path::Path;

use decouple_core::linalg::Mat;
use decouple_core::select::{ApmPath, BenchmarkReport, EntrySummary, SelectionRule};
use decouple_core::weights::{PenaltyKind, WeightVector};
use decouple_core::wlasso::{SolutionPath, TargetKind};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, json.as_bytes())
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn check_version(path: &Path, v: u32) -> CliResult<()> {
    if v != SCHEMA_VERSION {
        return Err(CliError::Validation(format!(
            "{}: unsupported schema_version {v}",
            path.display()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

/// On-disk form of either path flavor, tagged by `kind`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PathFile {
    #[serde(rename = "weighted")]
    Weighted {
        schema_version: u32,
        target_kind: String,
        penalty: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
        weights: Vec<f64>,
        lambdas: Vec<f64>,
        sizes: Vec<usize>,
        kkt_max: f64,
        /// Row-major: one inner vector per grid point.
        coefs: Vec<Vec<f64>>,
    },
    #[serde(rename = "apm")]
    Apm {
        schema_version: u32,
        order: Vec<usize>,
        thresholds: Vec<f64>,
        sizes: Vec<usize>,
        skipped: Vec<usize>,
        /// Row-major: one inner vector per entry.
        estimates: Vec<Vec<f64>>,
    },
}

pub fn penalty_name(kind: PenaltyKind) -> &'static str {
    match kind {
        PenaltyKind::Unit => "l1",
        PenaltyKind::Fd => "fd",
        PenaltyKind::Is => "is",
    }
}

pub fn parse_penalty(name: &str) -> CliResult<PenaltyKind> {
    match name {
        "l1" => Ok(PenaltyKind::Unit),
        "fd" => Ok(PenaltyKind::Fd),
        "is" => Ok(PenaltyKind::Is),
        other => crate::invalid(format!("unknown penalty {other:?} (expected l1|fd|is)")),
    }
}

pub fn target_name(kind: TargetKind) -> &'static str {
    match kind {
        TargetKind::PosteriorMean => "posterior-mean",
        TargetKind::RawY => "raw-y",
    }
}

pub fn parse_target(name: &str) -> CliResult<TargetKind> {
    match name {
        "posterior-mean" => Ok(TargetKind::PosteriorMean),
        "raw-y" => Ok(TargetKind::RawY),
        other => crate::invalid(format!(
            "unknown target {other:?} (expected posterior-mean|raw-y)"
        )),
    }
}

impl PathFile {
    pub fn from_solution_path(p: &SolutionPath) -> Self {
        let g = p.len();
        let coefs = (0..g).map(|i| p.estimate(i).to_vec()).collect();
        PathFile::Weighted {
            schema_version: SCHEMA_VERSION,
            target_kind: target_name(p.target_kind).into(),
            penalty: penalty_name(p.weights.kind).into(),
            eps: p.weights.eps,
            weights: p.weights.w.clone(),
            lambdas: p.lambdas.clone(),
            sizes: p.sizes.clone(),
            kkt_max: p.kkt_max,
            coefs,
        }
    }

    pub fn from_apm_path(p: &ApmPath) -> Self {
        let g = p.sizes.len();
        let estimates = (0..g).map(|i| p.estimates.col(i).to_vec()).collect();
        PathFile::Apm {
            schema_version: SCHEMA_VERSION,
            order: p.order.clone(),
            thresholds: p.thresholds.clone(),
            sizes: p.sizes.clone(),
            skipped: p.skipped.clone(),
            estimates,
        }
    }

    pub fn validate(&self, path: &Path) -> CliResult<()> {
        match self {
            PathFile::Weighted { schema_version, .. }
            | PathFile::Apm { schema_version, .. } => check_version(path, *schema_version),
        }
    }

    /// Rebuild the in-memory path for selection.
    pub fn into_estimate_path(self) -> CliResult<LoadedPath> {
        match self {
            PathFile::Weighted {
                target_kind,
                penalty,
                eps,
                weights,
                lambdas,
                sizes,
                kkt_max,
                coefs,
                ..
            } => {
                let p = weights.len();
                if coefs.len() != lambdas.len() || sizes.len() != lambdas.len() {
                    return crate::invalid("path file: inconsistent grid lengths");
                }
                let mut m = Mat::zeros(p, coefs.len());
                for (g, row) in coefs.iter().enumerate() {
                    if row.len() != p {
                        return crate::invalid(format!("path file: entry {g} has wrong length"));
                    }
                    m.col_mut(g).copy_from_slice(row);
                }
                let sp = SolutionPath {
                    lambdas,
                    coefs: m,
                    sizes,
                    weights: WeightVector {
                        w: weights,
                        kind: parse_penalty(&penalty)?,
                        eps,
                    },
                    target_kind: parse_target(&target_kind)?,
                    kkt_max,
                };
                Ok(LoadedPath::Weighted(sp))
            }
            PathFile::Apm {
                order,
                thresholds,
                sizes,
                skipped,
                estimates,
                ..
            } => {
                let p = order.len();
                if estimates.len() != sizes.len() || thresholds.len() != sizes.len() {
                    return crate::invalid("apm file: inconsistent entry lengths");
                }
                let mut m = Mat::zeros(p, estimates.len());
                for (g, row) in estimates.iter().enumerate() {
                    if row.len() != p {
                        return crate::invalid(format!("apm file: entry {g} has wrong length"));
                    }
                    m.col_mut(g).copy_from_slice(row);
                }
                Ok(LoadedPath::Apm(ApmPath {
                    order,
                    sizes,
                    thresholds,
                    estimates: m,
                    skipped,
                }))
            }
        }
    }
}

pub enum LoadedPath {
    Weighted(SolutionPath),
    Apm(ApmPath),
}

/// Optional flat CSV emission of a weighted path: one row per
/// (grid point, coordinate).
pub fn write_path_csv(p: &SolutionPath, path: &Path) -> CliResult<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "grid_index,lambda,coord,coef")?;
    for g in 0..p.len() {
        let lam = p.lambdas[g];
        for (j, &c) in p.estimate(g).iter().enumerate() {
            writeln!(w, "{g},{lam},{},{c}", j + 1)?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Selection reports and estimates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub schema_version: u32,
    pub estimate: Vec<f64>,
}

impl EstimateFile {
    pub fn new(estimate: Vec<f64>) -> Self {
        EstimateFile {
            schema_version: SCHEMA_VERSION,
            estimate,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let e: EstimateFile = read_json(path)?;
        check_version(path, e.schema_version)?;
        Ok(e)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReportEntry {
    pub index: usize,
    pub tuning: f64,
    pub size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred_qlo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred_qhi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_fdr: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema_version: u32,
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fdr_threshold: Option<f64>,
    pub chosen_index: Option<usize>,
    pub chosen_size: usize,
    pub fallback_dense: bool,
    pub entries: Vec<ReportEntry>,
}

impl ReportFile {
    pub fn from_report(r: &BenchmarkReport, fdr_threshold: Option<f64>) -> Self {
        let entries = r
            .entries
            .iter()
            .map(|e: &EntrySummary| ReportEntry {
                index: e.index,
                tuning: e.tuning,
                size: e.size,
                pred_mean: e.pred_mean,
                pred_qlo: e.pred_qlo,
                pred_qhi: e.pred_qhi,
                local_fdr: e.local_fdr,
            })
            .collect();
        ReportFile {
            schema_version: SCHEMA_VERSION,
            rule: match r.rule {
                SelectionRule::Benchmark => "benchmark".into(),
                SelectionRule::Fdr => "fdr".into(),
            },
            benchmark: r.benchmark,
            coverage: r.coverage,
            fdr_threshold,
            chosen_index: r.chosen_index,
            chosen_size: r.chosen_size,
            fallback_dense: r.fallback_dense,
            entries,
        }
    }
}

// ---------------------------------------------------------------------------
// Baseline fits and metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CvFile {
    pub schema_version: u32,
    pub method: String,
    pub lambda_grid: Vec<f64>,
    pub cv_mse: Vec<f64>,
    pub chosen_lambda: f64,
    pub chosen_index: usize,
    pub estimate: Vec<f64>,
    pub fold_assignments: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IterL1File {
    pub schema_version: u32,
    pub method: String,
    pub estimate: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub chosen_lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub schema_version: u32,
    pub size: usize,
    pub mse: f64,
    /// Absent when the dataset carries no ground truth.
    pub fdp: Option<f64>,
    pub tpp: Option<f64>,
}
