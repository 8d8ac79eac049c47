//! Per-phenotype screening workflow.
//!
//! Each phenotype is screened with both screening selectors. If one of the
//! two estimates falls inside the acceptance window `[alpha_l, alpha_u]` and
//! is the larger admissible estimate, its selection is final; otherwise the
//! calibrated fallback runs with target `alpha`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, standardize, Dataset};
use crate::error::{Error, Result};
use crate::experiments::{aggregate, run_experiments, ExperimentPlan, DEFAULT_EXPERIMENTS};
use crate::par;
use crate::rng::{split_seed, BOOTSTRAP_STREAM};
use crate::screen::{select_confidence, select_ordinary, GammaSearch, ScreenResult, DEFAULT_RESAMPLES};
use crate::trex::calibrate_trex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenConfig {
    /// Target FDR of the fallback selector.
    pub alpha: f64,
    pub alpha_l: f64,
    pub alpha_u: f64,
    pub k: usize,
    pub master_seed: u64,
    pub resamples: usize,
    /// Worker threads; `None` uses the ambient pool.
    pub threads: Option<usize>,
    /// Whether input CSVs start with a header row.
    pub header: bool,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            alpha_l: 0.05,
            alpha_u: 0.2,
            k: DEFAULT_EXPERIMENTS,
            master_seed: 0,
            resamples: DEFAULT_RESAMPLES,
            threads: None,
            header: false,
        }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(self.alpha_l > 0.0 && self.alpha_l <= self.alpha_u && self.alpha_u <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "acceptance window [{}, {}] must satisfy 0 < alpha_l <= alpha_u <= 1",
                self.alpha_l, self.alpha_u
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.resamples < 2 {
            return Err(Error::InvalidParameter("resamples must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of the bootstrap stream used by the confidence selector.
    pub fn boot_seed(&self) -> u64 {
        split_seed(self.master_seed, BOOTSTRAP_STREAM)
    }

    pub fn gamma_search(&self) -> GammaSearch {
        GammaSearch {
            resamples: self.resamples,
            ..GammaSearch::new(self.boot_seed())
        }
    }
}

/// Which selector produced a final set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Confidence,
    Ordinary,
    Fallback,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Confidence, Branch::Ordinary, Branch::Fallback];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Confidence => "confidence",
            Branch::Ordinary => "ordinary",
            Branch::Fallback => "fallback",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "confidence" | "conf" => Ok(Branch::Confidence),
            "ordinary" => Ok(Branch::Ordinary),
            "fallback" | "trex" => Ok(Branch::Fallback),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Chooses between the two screening results given the acceptance window.
///
/// `confidence` when `alpha_l <= a_c <= alpha_u` and
/// `max(a_c, a * 1[a <= alpha_u]) == a_c`; `ordinary` when
/// `alpha_l <= a <= alpha_u` and `max(a_c * 1[a_c <= alpha_u], a) == a`;
/// `fallback` otherwise. If both cases hold the confidence result wins.
pub fn decide(alpha_hat: f64, alpha_hat_c: f64, cfg: &ScreenConfig) -> Branch {
    let within = |a: f64| cfg.alpha_l <= a && a <= cfg.alpha_u;
    let admissible = |a: f64| if a <= cfg.alpha_u { a } else { 0.0 };
    if within(alpha_hat_c) && alpha_hat_c.max(admissible(alpha_hat)) == alpha_hat_c {
        Branch::Confidence
    } else if within(alpha_hat) && admissible(alpha_hat_c).max(alpha_hat) == alpha_hat {
        Branch::Ordinary
    } else {
        Branch::Fallback
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallbackSummary {
    pub t_star: usize,
    pub v_star: f64,
    pub fdr_estimate: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiobankDecision {
    pub phenotype_id: String,
    /// Final selection, ascending 0-based column indices.
    pub final_set: Vec<usize>,
    pub branch: Branch,
    pub alpha_hat: f64,
    /// Confidence-based estimate; 1 when the dummy pool was empty.
    pub alpha_hat_c: f64,
    pub gamma: Option<f64>,
    pub fallback_used: bool,
    pub fallback: Option<FallbackSummary>,
    pub wall_time: f64,
}

impl BiobankDecision {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.phenotype_id == other.phenotype_id
            && self.final_set == other.final_set
            && self.branch == other.branch
            && self.alpha_hat.to_bits() == other.alpha_hat.to_bits()
            && self.alpha_hat_c.to_bits() == other.alpha_hat_c.to_bits()
            && self.gamma.map(f64::to_bits) == other.gamma.map(f64::to_bits)
            && self.fallback == other.fallback
    }
}

/// Both screening results for one dataset.
#[derive(Debug, Clone)]
pub struct ScreenPair {
    pub ordinary: ScreenResult,
    /// `None` when no experiment produced a dummy coefficient.
    pub confidence: Option<ScreenResult>,
}

/// Runs the experiments once and applies both screening selectors.
pub fn screen_both(d: &Dataset, cfg: &ScreenConfig) -> Result<ScreenPair> {
    let std = standardize(d)?;
    let plan = ExperimentPlan::screen(std.p(), cfg.k, cfg.master_seed);
    let votes = aggregate(&run_experiments(&std, &plan)?)?;
    let ordinary = select_ordinary(&votes);
    let confidence = match select_confidence(&votes, ordinary.r, &cfg.gamma_search()) {
        Ok(c) => Some(c),
        Err(Error::EmptyDummyPool) => None,
        Err(e) => return Err(e),
    };
    Ok(ScreenPair { ordinary, confidence })
}

/// Screens one phenotype and applies the decision rule, running the
/// calibrated fallback when neither estimate is acceptable.
pub fn screen_phenotype(phenotype_id: &str, d: &Dataset, cfg: &ScreenConfig) -> Result<BiobankDecision> {
    cfg.validate()?;
    let start = Instant::now();
    let pair = screen_both(d, cfg)?;
    let alpha_hat = pair.ordinary.alpha_hat;
    let alpha_hat_c = pair.confidence.as_ref().map_or(1.0, |c| c.alpha_hat);
    let branch = decide(alpha_hat, alpha_hat_c, cfg);
    let (final_set, fallback) = match (branch, &pair.confidence) {
        (Branch::Confidence, Some(c)) => (c.selected.clone(), None),
        (Branch::Ordinary, _) => (pair.ordinary.selected.clone(), None),
        _ => {
            let std = standardize(d)?;
            let plan = ExperimentPlan::screen(std.p(), cfg.k, cfg.master_seed);
            let cal = calibrate_trex(&std, cfg.alpha, &plan)?;
            let summary = FallbackSummary {
                t_star: cal.t_star,
                v_star: cal.v_star,
                fdr_estimate: cal.fdr_estimate,
                feasible: cal.feasible,
            };
            (cal.selected, Some(summary))
        }
    };
    Ok(BiobankDecision {
        phenotype_id: phenotype_id.to_string(),
        final_set,
        branch,
        alpha_hat,
        alpha_hat_c,
        gamma: pair.confidence.as_ref().and_then(|c| c.gamma),
        fallback_used: fallback.is_some(),
        fallback,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub x_path: PathBuf,
    pub y_path: PathBuf,
    pub phenotype_id: String,
}

/// Reads a manifest CSV with columns `x_path,y_path,phenotype_id`. Relative
/// paths are resolved against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
            path: path.to_path_buf(),
            message: format!("manifest is missing column {name:?}"),
        })
    };
    let (xi, yi, pi) = (col("x_path")?, col("y_path")?, col("phenotype_id")?);
    let resolve = |s: &str| {
        let p = PathBuf::from(s);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        entries.push(ManifestEntry {
            x_path: resolve(&rec[xi]),
            y_path: resolve(&rec[yi]),
            phenotype_id: rec[pi].to_string(),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone)]
pub enum BatchRow {
    Done(BiobankDecision),
    Failed { phenotype_id: String, error: String },
}

impl BatchRow {
    pub fn phenotype_id(&self) -> &str {
        match self {
            BatchRow::Done(d) => &d.phenotype_id,
            BatchRow::Failed { phenotype_id, .. } => phenotype_id,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub phenotypes: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub confidence: usize,
    pub ordinary: usize,
    pub fallback: usize,
    pub total_wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    /// One row per manifest entry, in manifest order.
    pub rows: Vec<BatchRow>,
    pub summary: BatchSummary,
}

impl BatchReport {
    pub fn all_failed(&self) -> bool {
        self.summary.succeeded == 0
    }
}

/// Screens every manifest entry. Entries may run concurrently; rows are
/// reported in manifest order and a failing entry never aborts the others.
pub fn run_batch(manifest: &[ManifestEntry], cfg: &ScreenConfig) -> Result<BatchReport> {
    cfg.validate()?;
    if manifest.is_empty() {
        return Err(Error::InvalidParameter("manifest is empty".into()));
    }
    let start = Instant::now();
    let rows = par::map_slice(manifest, |e| {
        let res = load_csv(&e.x_path, &e.y_path, cfg.header)
            .and_then(|d| screen_phenotype(&e.phenotype_id, &d, cfg));
        match res {
            Ok(d) => BatchRow::Done(d),
            Err(err) => BatchRow::Failed {
                phenotype_id: e.phenotype_id.clone(),
                error: err.to_string(),
            },
        }
    });
    let count = |b: Branch| {
        rows.iter()
            .filter(|r| matches!(r, BatchRow::Done(d) if d.branch == b))
            .count()
    };
    let succeeded = rows.iter().filter(|r| matches!(r, BatchRow::Done(_))).count();
    let summary = BatchSummary {
        phenotypes: rows.len(),
        succeeded,
        failed: rows.len() - succeeded,
        confidence: count(Branch::Confidence),
        ordinary: count(Branch::Ordinary),
        fallback: count(Branch::Fallback),
        total_wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(BatchReport { rows, summary })
}
