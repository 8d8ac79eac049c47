//! Random experiments: append standardized Gaussian dummies to the design,
//! run a dummy-terminated LARS path per experiment and fuse the candidate
//! sets into relative occurrences.

use nalgebra::DMatrix;

use crate::data::{standardize_columns, StandardizedDataset};
use crate::error::{Error, Result};
use crate::lars::{lars_path, PathConfig, PathResult};
use crate::par;
use crate::rng::{generate_dummies, split_seed};

/// Default number of random experiments.
pub const DEFAULT_EXPERIMENTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentPlan {
    /// Number of random experiments (K).
    pub k: usize,
    /// Dummies per experiment (L).
    pub l: usize,
    /// Dummy entries that terminate each path (T).
    pub t: usize,
    pub master_seed: u64,
}

impl ExperimentPlan {
    /// Screening configuration: `L = p`, `T = 1`.
    pub fn screen(p: usize, k: usize, master_seed: u64) -> Self {
        Self {
            k,
            l: p,
            t: 1,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 || self.t == 0 {
            return Err(Error::InvalidParameter(format!(
                "experiment plan needs k, l, t >= 1 (got k={}, l={}, t={})",
                self.k, self.l, self.t
            )));
        }
        Ok(())
    }

    /// Seed of the dummy matrix for experiment `k` (0-based).
    pub fn experiment_seed(&self, k: usize) -> u64 {
        split_seed(self.master_seed, k as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    /// Original variables that entered before the terminating dummy, ascending.
    pub candidate_set: Vec<usize>,
    pub orig_coefs: Vec<f64>,
    pub dummy_coefs: Vec<f64>,
    /// Coefficient of the dummy whose entry terminated the path, if any.
    pub included_dummy_coef: Option<f64>,
    pub terminated_early: bool,
}

impl ExperimentOutcome {
    fn from_path(path: &PathResult, p: usize, t: usize) -> Self {
        let mut candidate_set = path.candidates_before_dummy(p, t);
        candidate_set.sort_unstable();
        let included_dummy_coef = if path.terminated_early {
            path.entry_order
                .iter()
                .rev()
                .find(|&&j| j >= p)
                .map(|&j| path.coefficients[j])
        } else {
            None
        };
        Self {
            candidate_set,
            orig_coefs: path.coefficients[..p].to_vec(),
            dummy_coefs: path.coefficients[p..].to_vec(),
            included_dummy_coef,
            terminated_early: path.terminated_early,
        }
    }
}

/// Builds `[x_std | standardized dummies]` for experiment `k`.
pub fn extended_design(d: &StandardizedDataset, plan: &ExperimentPlan, k: usize) -> Result<DMatrix<f64>> {
    let (n, p) = (d.n(), d.p());
    let mut dummies = generate_dummies(n, plan.l, plan.experiment_seed(k));
    standardize_columns(&mut dummies).map_err(|j| {
        Error::InvalidDataset(format!("dummy column {j} of experiment {k} is constant"))
    })?;
    let mut ext = DMatrix::zeros(n, p + plan.l);
    ext.columns_mut(0, p).copy_from(d.x());
    ext.columns_mut(p, plan.l).copy_from(&dummies);
    Ok(ext)
}

/// Runs the dummy-terminated path for experiment `k` with the given quota.
pub(crate) fn run_path(d: &StandardizedDataset, plan: &ExperimentPlan, k: usize, t_stop: usize) -> Result<PathResult> {
    let annotate = |e: Error| Error::Experiment {
        experiment: k,
        source: Box::new(e),
    };
    let ext = extended_design(d, plan, k).map_err(annotate)?;
    lars_path(&ext, d.y(), &PathConfig::new(t_stop, d.p())).map_err(annotate)
}

/// Runs all `plan.k` experiments. Output order follows the experiment index
/// and is identical for any thread count.
pub fn run_experiments(d: &StandardizedDataset, plan: &ExperimentPlan) -> Result<Vec<ExperimentOutcome>> {
    plan.validate()?;
    let p = d.p();
    par::try_map_indexed(plan.k, |k| {
        run_path(d, plan, k, plan.t).map(|path| ExperimentOutcome::from_path(&path, p, plan.t))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateVotes {
    /// Relative occurrence of each original variable in the candidate sets.
    pub phi: Vec<f64>,
    /// Coefficients averaged over all experiments.
    pub avg_coefs: Vec<f64>,
    /// Nonzero coefficients of the terminating dummies.
    pub dummy_pool: Vec<f64>,
    /// Number of experiments.
    pub k: usize,
}

impl AggregateVotes {
    pub fn p(&self) -> usize {
        self.phi.len()
    }

    /// Experiments that ran out of path before a dummy entered.
    pub fn missing_dummies(&self) -> usize {
        self.k - self.dummy_pool.len()
    }

    /// Whether the pool is smaller than the number of experiments.
    pub fn pool_reduced(&self) -> bool {
        self.dummy_pool.len() < self.k
    }
}

/// Fuses experiment outcomes into relative occurrences and mean coefficients.
pub fn aggregate(outcomes: &[ExperimentOutcome]) -> Result<AggregateVotes> {
    let first = outcomes
        .first()
        .ok_or_else(|| Error::InvalidParameter("no experiment outcomes to aggregate".into()))?;
    let p = first.orig_coefs.len();
    if outcomes.iter().any(|o| o.orig_coefs.len() != p) {
        return Err(Error::DimensionMismatch(
            "experiment outcomes cover different numbers of variables".into(),
        ));
    }
    let k = outcomes.len();
    let mut counts = vec![0usize; p];
    let mut sums = vec![0.0; p];
    for o in outcomes {
        for &j in &o.candidate_set {
            if j >= p {
                return Err(Error::DimensionMismatch(format!("candidate {j} out of range")));
            }
            counts[j] += 1;
        }
        for (s, c) in sums.iter_mut().zip(&o.orig_coefs) {
            *s += c;
        }
    }
    let kf = k as f64;
    Ok(AggregateVotes {
        phi: counts.iter().map(|&c| c as f64 / kf).collect(),
        avg_coefs: sums.iter().map(|s| s / kf).collect(),
        dummy_pool: outcomes
            .iter()
            .filter_map(|o| o.included_dummy_coef)
            .filter(|c| *c != 0.0)
            .collect(),
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(candidates: &[usize], coefs: &[f64], dummy: Option<f64>) -> ExperimentOutcome {
        ExperimentOutcome {
            candidate_set: candidates.to_vec(),
            orig_coefs: coefs.to_vec(),
            dummy_coefs: vec![dummy.unwrap_or(0.0)],
            included_dummy_coef: dummy,
            terminated_early: dummy.is_some(),
        }
    }

    #[test]
    fn unanimous_variable_has_full_occurrence() {
        let outs: Vec<_> = (0..20).map(|_| outcome(&[1], &[0.0, 0.3], Some(0.1))).collect();
        let v = aggregate(&outs).unwrap();
        assert_eq!(v.phi, vec![0.0, 1.0]);
        assert_eq!(v.dummy_pool.len(), 20);
        assert!(!v.pool_reduced());
    }

    #[test]
    fn eleven_of_twenty_is_055() {
        let outs: Vec<_> = (0..20)
            .map(|k| outcome(if k < 11 { &[0] } else { &[] }, &[0.0], Some(0.1)))
            .collect();
        let v = aggregate(&outs).unwrap();
        assert!((v.phi[0] - 0.55).abs() < 1e-15);
        assert!(v.phi[0] > 0.5);
    }

    #[test]
    fn coefficients_are_averaged() {
        let outs = [outcome(&[0], &[1.0, 0.0], Some(0.2)), outcome(&[1], &[0.0, 1.0], None)];
        let v = aggregate(&outs).unwrap();
        assert_eq!(v.avg_coefs, vec![0.5, 0.5]);
        assert_eq!(v.dummy_pool, vec![0.2]);
        assert_eq!(v.missing_dummies(), 1);
        assert!(v.pool_reduced());
    }

    #[test]
    fn empty_and_ragged_inputs_are_rejected() {
        assert!(aggregate(&[]).is_err());
        let outs = [outcome(&[], &[1.0], None), outcome(&[], &[1.0, 2.0], None)];
        assert!(matches!(aggregate(&outs), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn invalid_plan_is_rejected() {
        let plan = ExperimentPlan { k: 0, l: 3, t: 1, master_seed: 1 };
        assert!(plan.validate().is_err());
    }
}
