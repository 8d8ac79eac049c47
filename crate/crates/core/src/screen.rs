//! Screening selectors with self-estimated FDR.
//!
//! The ordinary selector keeps every variable with relative occurrence above
//! one half and reports `1 / max(R, 1)` as its FDR estimate. The
//! confidence-based selector keeps variables whose averaged coefficient falls
//! outside a normal bootstrap interval built from the terminating dummies'
//! coefficients, at the smallest confidence level that selects no more
//! variables than the ordinary rule.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::experiments::AggregateVotes;
use crate::par;
use crate::rng::stream_rng;

/// Voting threshold of the screening selector (strict inequality).
pub const SCREEN_VOTING_LEVEL: f64 = 0.5;

pub const DEFAULT_RESAMPLES: usize = 1000;

pub const DEFAULT_GAMMA_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ordinary,
    Confidence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    /// Selected original variables, ascending.
    pub selected: Vec<usize>,
    /// Self-estimated FDR, always `1 / max(r, 1)`.
    pub alpha_hat: f64,
    pub method: Method,
    /// Confidence level found by the search (confidence method only).
    pub gamma: Option<f64>,
    /// Interval `[c1, c2]` at `gamma` (confidence method only).
    pub ci: Option<(f64, f64)>,
    pub r: usize,
}

/// `1 / max(r, 1)`.
pub fn reciprocal_estimate(r: usize) -> f64 {
    1.0 / r.max(1) as f64
}

/// Selects `{j : phi[j] > 0.5}`.
pub fn select_ordinary(votes: &AggregateVotes) -> ScreenResult {
    let selected: Vec<usize> = votes
        .phi
        .iter()
        .enumerate()
        .filter(|(_, &phi)| phi > SCREEN_VOTING_LEVEL)
        .map(|(j, _)| j)
        .collect();
    let r = selected.len();
    ScreenResult {
        selected,
        alpha_hat: reciprocal_estimate(r),
        method: Method::Ordinary,
        gamma: None,
        ci: None,
        r,
    }
}

/// Normal bootstrap estimate for the mean of the dummy coefficient pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub center: f64,
    /// Standard deviation of the resample means.
    pub se_boot: f64,
    pub resamples: usize,
    pub boot_seed: u64,
}

impl BootstrapCi {
    /// Resamples `pool` with replacement `resamples` times. Resample `b`
    /// draws from its own stream of `boot_seed`; the means are reduced
    /// sequentially in resample order, so the result does not depend on the
    /// thread count.
    pub fn estimate(pool: &[f64], resamples: usize, boot_seed: u64) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::EmptyDummyPool);
        }
        if resamples < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 bootstrap resamples, got {resamples}"
            )));
        }
        let k = pool.len();
        let center = pool.iter().sum::<f64>() / k as f64;
        let means = par::map_indexed(resamples, |b| {
            let mut rng = stream_rng(boot_seed, b as u64);
            (0..k).map(|_| pool[rng.random_range(0..k)]).sum::<f64>() / k as f64
        });
        let m = means.iter().sum::<f64>() / resamples as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (resamples - 1) as f64;
        Ok(Self {
            center,
            se_boot: var.sqrt(),
            resamples,
            boot_seed,
        })
    }

    /// Two-sided normal interval at confidence level `gamma`. `gamma >= 1`
    /// gives the whole real line.
    pub fn interval(&self, gamma: f64) -> (f64, f64) {
        if gamma >= 1.0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let half = if gamma <= 0.0 || self.se_boot == 0.0 {
            0.0
        } else {
            standard_normal_quantile((1.0 + gamma) / 2.0) * self.se_boot
        };
        (self.center - half, self.center + half)
    }
}

fn standard_normal_quantile(q: f64) -> f64 {
    Normal::standard().inverse_cdf(q)
}

/// Normal bootstrap confidence interval for the mean of `pool`.
pub fn bootstrap_ci(pool: &[f64], gamma: f64, resamples: usize, boot_seed: u64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("confidence level {gamma} outside [0, 1]")));
    }
    Ok(BootstrapCi::estimate(pool, resamples, boot_seed)?.interval(gamma))
}

/// Grid search settings for the confidence level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSearch {
    pub step: f64,
    pub resamples: usize,
    pub boot_seed: u64,
}

impl GammaSearch {
    pub fn new(boot_seed: u64) -> Self {
        Self {
            step: DEFAULT_GAMMA_STEP,
            resamples: DEFAULT_RESAMPLES,
            boot_seed,
        }
    }

    /// Grid points `0, step, 2 step, ..., 1`.
    pub fn grid(&self) -> impl Iterator<Item = f64> {
        let points = (1.0 / self.step).round().max(1.0) as usize;
        (0..=points).map(move |i| i as f64 / points as f64)
    }
}

/// Variables whose averaged coefficient lies strictly outside `ci`.
pub fn exclusion_set(avg_coefs: &[f64], ci: (f64, f64)) -> Vec<usize> {
    avg_coefs
        .iter()
        .enumerate()
        .filter(|(_, &b)| b < ci.0 || b > ci.1)
        .map(|(j, _)| j)
        .collect()
}

fn exclusion_count(avg_coefs: &[f64], ci: (f64, f64)) -> usize {
    avg_coefs.iter().filter(|&&b| b < ci.0 || b > ci.1).count()
}

/// Confidence-based selection at the smallest grid level `gamma` whose
/// exclusion count does not exceed `r_ordinary`.
pub fn select_confidence(votes: &AggregateVotes, r_ordinary: usize, search: &GammaSearch) -> Result<ScreenResult> {
    if !(search.step > 0.0 && search.step <= 1.0) {
        return Err(Error::InvalidParameter(format!("gamma step {} outside (0, 1]", search.step)));
    }
    let boot = BootstrapCi::estimate(&votes.dummy_pool, search.resamples, search.boot_seed)?;
    let (gamma, ci) = search
        .grid()
        .map(|g| (g, boot.interval(g)))
        .find(|&(_, ci)| exclusion_count(&votes.avg_coefs, ci) <= r_ordinary)
        .unwrap_or((1.0, boot.interval(1.0)));
    let selected = exclusion_set(&votes.avg_coefs, ci);
    let r = selected.len();
    Ok(ScreenResult {
        selected,
        alpha_hat: reciprocal_estimate(r),
        method: Method::Confidence,
        gamma: Some(gamma),
        ci: Some(ci),
        r,
    })
}

/// Expected number of nulls drawn before the `stops`-th dummy when drawing
/// without replacement from `nulls` nulls and `dummies` dummies.
pub(crate) fn expected_nulls_before(stops: f64, nulls: f64, dummies: f64) -> f64 {
    stops * nulls / (dummies + 1.0)
}

/// Mean of the negative hypergeometric distribution: expected null draws
/// before the `stops`-th dummy from an urn of `population` items of which
/// `nulls` are nulls and the rest dummies.
pub fn nhg_mean(population: u64, nulls: u64, stops: u64) -> Result<f64> {
    if nulls > population {
        return Err(Error::InvalidParameter(format!(
            "nulls ({nulls}) exceed population ({population})"
        )));
    }
    let dummies = population - nulls;
    if stops == 0 || stops > dummies {
        return Err(Error::InvalidParameter(format!(
            "stops must be in 1..={dummies}, got {stops}"
        )));
    }
    Ok(expected_nulls_before(stops as f64, nulls as f64, dummies as f64))
}
