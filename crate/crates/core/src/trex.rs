//! Calibrated fallback selector.
//!
//! Sweeps the dummy budget `T` and the voting level `v` and picks the pair
//! that selects the most variables while an FDR estimate stays at or below
//! the target. Each experiment runs a single path up to `T_max` dummies;
//! the candidate set for a smaller budget `T` is the prefix of that path
//! before the `T`-th dummy, which is exactly what a rerun with quota `T` on
//! the same dummy matrix would produce.
//!
//! The FDR estimate deflates relative occurrences interval by interval.
//! Between the `(t-1)`-th and `t`-th dummy entry, at most
//! `p_rem / (L - t + 2)` nulls are expected to enter (negative
//! hypergeometric mean with one stop), where `p_rem = p - sum_q phi_{t-1}(q)`
//! bounds the originals still outside the candidate sets. The share of that
//! interval's inclusions attributed to signal is
//! `delta_t = 1 - expected_nulls / sum_q (phi_t(q) - phi_{t-1}(q))`, clamped
//! to `[0, 1]`, and
//!
//! ```text
//! phi'_T(j) = sum_{t<=T} delta_t (phi_t(j) - phi_{t-1}(j))
//! fdr(T, v) = sum_{j : phi_T(j) > v} (1 - phi'_T(j)) / max(R_T(v), 1)
//! ```

use crate::data::StandardizedDataset;
use crate::error::{Error, Result};
use crate::experiments::{run_path, ExperimentPlan};
use crate::par;
use crate::screen::expected_nulls_before;

/// Upper bound on the dummy budget sweep.
pub const T_MAX_CAP: usize = 10;

/// Voting levels `0.5, 0.55, ..., 0.95`.
pub fn voting_grid() -> impl Iterator<Item = f64> {
    (10..20).map(|m| m as f64 / 20.0)
}

/// `max(2, ceil(alpha * p / 2))`, capped at [`T_MAX_CAP`].
pub fn t_max_for(alpha: f64, p: usize) -> usize {
    let budget = (alpha * p as f64 / 2.0).ceil() as usize;
    budget.clamp(2, T_MAX_CAP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// `{j : phi_{t_star}(j) > v_star}`, ascending.
    pub selected: Vec<usize>,
    pub v_star: f64,
    pub t_star: usize,
    pub fdr_estimate: f64,
    /// Relative occurrences for `T = 1..=t_max` (index `T - 1`).
    pub votes_by_t: Vec<Vec<f64>>,
    /// Whether some `(T, v)` selected at least one variable within target.
    pub feasible: bool,
}

/// Deflated relative occurrences `phi'_T` for every budget in `votes_by_t`.
pub fn deflated_occurrences(votes_by_t: &[Vec<f64>], l: usize) -> Vec<Vec<f64>> {
    let Some(p) = votes_by_t.first().map(Vec::len) else {
        return Vec::new();
    };
    let mut prev = vec![0.0; p];
    let mut acc = vec![0.0; p];
    let mut out = Vec::with_capacity(votes_by_t.len());
    for (idx, phi) in votes_by_t.iter().enumerate() {
        let t = idx + 1;
        let remaining_orig = (p as f64 - prev.iter().sum::<f64>()).max(0.0);
        let remaining_dummies = (l + 1).saturating_sub(t) as f64;
        let expected_nulls = expected_nulls_before(1.0, remaining_orig, remaining_dummies);
        let entered: f64 = phi.iter().zip(&prev).map(|(a, b)| a - b).sum();
        let delta = if entered > 0.0 {
            (1.0 - expected_nulls / entered).clamp(0.0, 1.0)
        } else {
            0.0
        };
        for j in 0..p {
            acc[j] += delta * (phi[j] - prev[j]);
        }
        out.push(acc.clone());
        prev.clone_from(phi);
    }
    out
}

/// `(R, fdr estimate)` for voting level `v`.
pub fn fdr_estimate(phi: &[f64], deflated: &[f64], v: f64) -> (usize, f64) {
    let mut r = 0;
    let mut v_hat = 0.0;
    for (f, d) in phi.iter().zip(deflated) {
        if *f > v {
            r += 1;
            v_hat += 1.0 - d;
        }
    }
    (r, (v_hat / r.max(1) as f64).clamp(0.0, 1.0))
}

/// Picks `(T, v)` from precomputed votes. Exposed for testing the sweep
/// without running paths.
pub fn calibrate_from_votes(votes_by_t: Vec<Vec<f64>>, l: usize, alpha: f64) -> Result<CalibrationResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("target FDR {alpha} outside (0, 1]")));
    }
    if votes_by_t.is_empty() {
        return Err(Error::InvalidParameter("no dummy budgets to calibrate over".into()));
    }
    let deflated = deflated_occurrences(&votes_by_t, l);
    // (r, fdr, t, v)
    let mut best: Option<(usize, f64, usize, f64)> = None;
    for (idx, (phi, defl)) in votes_by_t.iter().zip(&deflated).enumerate() {
        let t = idx + 1;
        for v in voting_grid() {
            let (r, fdr) = fdr_estimate(phi, defl, v);
            if r == 0 || fdr > alpha {
                continue;
            }
            let better = match best {
                None => true,
                Some((br, bf, bt, bv)) => {
                    r > br || (r == br && (fdr < bf || (fdr == bf && (t < bt || (t == bt && v > bv)))))
                }
            };
            if better {
                best = Some((r, fdr, t, v));
            }
        }
    }
    Ok(match best {
        Some((_, fdr, t, v)) => CalibrationResult {
            selected: votes_by_t[t - 1]
                .iter()
                .enumerate()
                .filter(|(_, &f)| f > v)
                .map(|(j, _)| j)
                .collect(),
            v_star: v,
            t_star: t,
            fdr_estimate: fdr,
            votes_by_t,
            feasible: true,
        },
        None => CalibrationResult {
            selected: Vec::new(),
            v_star: 0.5,
            t_star: 1,
            fdr_estimate: 0.0,
            votes_by_t,
            feasible: false,
        },
    })
}

/// Runs the experiments up to `T_max` dummies and calibrates `(T, v)` for
/// target FDR `alpha`. `plan.t` is ignored; `plan.l` must equal `p`.
pub fn calibrate_trex(d: &StandardizedDataset, alpha: f64, plan: &ExperimentPlan) -> Result<CalibrationResult> {
    plan.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("target FDR {alpha} outside (0, 1]")));
    }
    let p = d.p();
    if plan.l != p {
        return Err(Error::InvalidParameter(format!(
            "calibration requires L = p ({p}), got L = {}",
            plan.l
        )));
    }
    let t_max = t_max_for(alpha, p);
    let paths = par::try_map_indexed(plan.k, |k| run_path(d, plan, k, t_max))?;
    let mut counts = vec![vec![0usize; p]; t_max];
    for path in &paths {
        for (idx, row) in counts.iter_mut().enumerate() {
            for j in path.candidates_before_dummy(p, idx + 1) {
                row[j] += 1;
            }
        }
    }
    let kf = plan.k as f64;
    let votes_by_t = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / kf).collect())
        .collect();
    calibrate_from_votes(votes_by_t, plan.l, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_max_rule() {
        assert_eq!(t_max_for(0.1, 10), 2);
        assert_eq!(t_max_for(0.1, 60), 3);
        assert_eq!(t_max_for(0.1, 1000), 10);
        assert_eq!(t_max_for(0.03, 201), 4);
    }

    #[test]
    fn grid_is_exact_twentieths() {
        let g: Vec<f64> = voting_grid().collect();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[9], 0.95);
    }

    #[test]
    fn deflation_matches_hand_computation() {
        // p = 4, L = 4. T = 1: mean candidate-set size 2, expected nulls
        // 4 / 5 -> delta = 1 - 0.8 / 2 = 0.6.
        let phi1 = vec![1.0, 1.0, 0.0, 0.0];
        // T = 2: one more unit enters; remaining originals 2, dummies 3
        // -> expected 0.5, delta = 0.5.
        let phi2 = vec![1.0, 1.0, 0.5, 0.5];
        let d = deflated_occurrences(&[phi1, phi2], 4);
        assert!((d[0][0] - 0.6).abs() < 1e-15);
        assert!((d[1][0] - 0.6).abs() < 1e-15);
        assert!((d[1][2] - 0.25).abs() < 1e-15);
        let (r, fdr) = fdr_estimate(&[1.0, 1.0, 0.0, 0.0], &d[0], 0.5);
        assert_eq!(r, 2);
        assert!((fdr - 0.4).abs() < 1e-15);
    }

    #[test]
    fn alpha_one_takes_largest_selection() {
        let votes = vec![vec![0.6, 0.2, 0.0, 0.0], vec![0.9, 0.6, 0.55, 0.0]];
        let res = calibrate_from_votes(votes, 4, 1.0).unwrap();
        assert_eq!(res.selected, vec![0, 1, 2]);
        assert_eq!(res.t_star, 2);
        assert_eq!(res.v_star, 0.5);
        assert!(res.feasible);
    }

    #[test]
    fn nothing_feasible_returns_empty() {
        // Every inclusion looks like noise: delta = 0 for all intervals.
        let votes = vec![vec![0.6, 0.0, 0.0, 0.0]];
        let res = calibrate_from_votes(votes, 4, 0.1).unwrap();
        assert!(res.selected.is_empty());
        assert!(!res.feasible);
        assert_eq!(res.fdr_estimate, 0.0);
    }

    #[test]
    fn invalid_alpha() {
        assert!(calibrate_from_votes(vec![vec![0.0]], 1, 0.0).is_err());
        assert!(calibrate_from_votes(vec![vec![0.0]], 1, 1.5).is_err());
    }
}
