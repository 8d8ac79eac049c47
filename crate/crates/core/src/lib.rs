//! FDR-controlled variable selection by terminated random experiments.
//!
//! Each random experiment appends `L` standard-normal dummy columns to the
//! standardized design and runs least angle regression until `T` dummies
//! have entered. Fusing the candidate sets of `K` experiments gives relative
//! occurrences per variable, from which:
//!
//! * [`screen::select_ordinary`] keeps majority-voted variables and reports
//!   the self-estimated FDR `1 / max(R, 1)`;
//! * [`screen::select_confidence`] keeps variables whose averaged
//!   coefficient lies outside a bootstrap interval built from the dummy
//!   coefficients;
//! * [`trex::calibrate_trex`] sweeps `(T, v)` to reach a user target FDR;
//! * [`biobank`] chains the three per phenotype and batches manifests;
//! * [`sim`] provides synthetic data with known support and Monte Carlo
//!   campaigns that check FDR control empirically.
//!
//! With the default `parallel` feature, experiments, bootstrap resamples,
//! replicates and phenotypes run on the rayon pool. Every random stream is
//! keyed by a split seed, so results are identical for any thread count and
//! with the feature disabled.

pub mod biobank;
pub mod data;
pub mod error;
pub mod experiments;
pub mod lars;
pub mod par;
pub mod report;
pub mod rng;
pub mod screen;
pub mod sim;
pub mod trex;

pub use biobank::{decide, run_batch, screen_phenotype, BatchReport, BiobankDecision, Branch, ScreenConfig};
pub use data::{load_csv, standardize, write_csv, Dataset, StandardizedDataset};
pub use error::{Error, Result};
pub use experiments::{aggregate, run_experiments, AggregateVotes, ExperimentOutcome, ExperimentPlan};
pub use lars::{lars_path, LarsPath, PathConfig, PathResult};
pub use screen::{bootstrap_ci, nhg_mean, select_confidence, select_ordinary, GammaSearch, Method, ScreenResult};
pub use sim::{mc_campaign, mc_sweep, score, simulate, SimSpec, TruthedDataset};
pub use trex::{calibrate_trex, CalibrationResult};
