//! Synthetic data with known support, FDP/TPP scoring, the negative
//! hypergeometric urn oracle and the Monte Carlo campaign driver.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::biobank::{Branch, ScreenConfig};
use crate::data::{standardize, Dataset};
use crate::error::{Error, Result};
use crate::experiments::{aggregate, run_experiments, ExperimentPlan};
use crate::par;
use crate::rng::{split_seed, stream_rng, SIMULATION_STREAM};
use crate::screen::{select_confidence, select_ordinary, GammaSearch};
use crate::trex::calibrate_trex;

const GENOTYPE_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Design {
    /// I.i.d. standard normal predictors.
    Gaussian,
    /// Genotype-like {0, 1, 2} predictors from a latent AR(1) Gaussian across
    /// columns, thresholded under Hardy-Weinberg proportions for a minor
    /// allele frequency drawn uniformly from `maf_range`. With
    /// `case_fraction` set, the response is binarized: the top fraction of
    /// the liability `X beta + noise` become cases (1), the rest controls (0).
    Genotype {
        maf_range: (f64, f64),
        corr_rho: f64,
        #[serde(default)]
        case_fraction: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub p1: usize,
    pub snr: f64,
    #[serde(default = "default_design")]
    pub design: Design,
    #[serde(default = "default_beta")]
    pub beta_value: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_design() -> Design {
    Design::Gaussian
}

fn default_beta() -> f64 {
    1.0
}

impl SimSpec {
    pub fn gaussian(n: usize, p: usize, p1: usize, snr: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            p1,
            snr,
            design: Design::Gaussian,
            beta_value: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.p < 1 {
            return Err(Error::InvalidParameter(format!(
                "simulation needs n >= 3 and p >= 1 (got n={}, p={})",
                self.n, self.p
            )));
        }
        if self.p1 > self.p {
            return Err(Error::InvalidParameter(format!("p1 = {} exceeds p = {}", self.p1, self.p)));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::InvalidParameter(format!("snr must be positive, got {}", self.snr)));
        }
        if let Design::Genotype {
            maf_range: (lo, hi),
            corr_rho,
            case_fraction,
        } = self.design
        {
            if !(0.0 < lo && lo <= hi && hi <= 0.5) {
                return Err(Error::InvalidParameter(format!("maf range ({lo}, {hi}) outside (0, 0.5]")));
            }
            if !(corr_rho > -1.0 && corr_rho < 1.0) {
                return Err(Error::InvalidParameter(format!("corr_rho {corr_rho} outside (-1, 1)")));
            }
            if let Some(f) = case_fraction {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::InvalidParameter(format!("case fraction {f} outside (0, 1)")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TruthedDataset {
    pub dataset: Dataset,
    /// True active columns, ascending.
    pub support: Vec<usize>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

impl TruthedDataset {
    pub fn p1(&self) -> usize {
        self.support.len()
    }

    pub fn p0(&self) -> usize {
        self.dataset.p() - self.support.len()
    }
}

fn sample_variance(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let m = v.mean();
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn genotype_matrix(spec: &SimSpec, maf_range: (f64, f64), rho: f64) -> Result<DMatrix<f64>> {
    let (n, p) = (spec.n, spec.p);
    let mut rng = stream_rng(spec.seed, SIMULATION_STREAM);
    let mut maf_rng = stream_rng(spec.seed, SIMULATION_STREAM + 3);
    let normal = Normal::standard();
    let innov = (1.0 - rho * rho).sqrt();
    let mut latent = vec![0.0; n];
    let mut x = DMatrix::zeros(n, p);
    for j in 0..p {
        let prev = latent.clone();
        let mut ok = false;
        for _ in 0..GENOTYPE_RETRIES {
            let maf = if maf_range.0 == maf_range.1 {
                maf_range.0
            } else {
                maf_rng.random_range(maf_range.0..=maf_range.1)
            };
            let t0 = normal.inverse_cdf((1.0 - maf) * (1.0 - maf));
            let t1 = normal.inverse_cdf(1.0 - maf * maf);
            for (i, z) in latent.iter_mut().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *z = if j == 0 { e } else { rho * prev[i] + innov * e };
                x[(i, j)] = if *z < t0 {
                    0.0
                } else if *z < t1 {
                    1.0
                } else {
                    2.0
                };
            }
            let first = x[(0, j)];
            if x.column(j).iter().any(|&g| g != first) {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::InvalidDataset(format!(
                "genotype column {j} stayed constant after {GENOTYPE_RETRIES} draws"
            )));
        }
    }
    Ok(x)
}

/// Draws a dataset with known support from `spec`.
///
/// The noise variance is `var(X beta) / snr` (sample variances). With
/// `p1 = 0` the signal is identically zero and unit-variance noise is used.
pub fn simulate(spec: &SimSpec) -> Result<TruthedDataset> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let x = match spec.design {
        Design::Gaussian => {
            let mut rng = stream_rng(spec.seed, SIMULATION_STREAM);
            DMatrix::from_iterator(n, p, (0..n * p).map(|_| StandardNormal.sample(&mut rng)))
        }
        Design::Genotype {
            maf_range,
            corr_rho,
            ..
        } => genotype_matrix(spec, maf_range, corr_rho)?,
    };
    let mut support = sample(&mut stream_rng(spec.seed, SIMULATION_STREAM + 1), p, spec.p1).into_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; p];
    for &j in &support {
        beta[j] = spec.beta_value;
    }
    let signal = &x * DVector::from_column_slice(&beta);
    let sigma2 = if spec.p1 == 0 {
        1.0
    } else {
        sample_variance(&signal) / spec.snr
    };
    let mut noise_rng = stream_rng(spec.seed, SIMULATION_STREAM + 2);
    let sd = sigma2.sqrt();
    let mut y = DVector::from_fn(n, |i, _| {
        let e: f64 = StandardNormal.sample(&mut noise_rng);
        signal[i] + sd * e
    });
    if let Design::Genotype {
        case_fraction: Some(frac),
        ..
    } = spec.design
    {
        let cases = ((frac * n as f64).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
        let mut binary = DVector::zeros(n);
        for &i in &order[..cases] {
            binary[i] = 1.0;
        }
        y = binary;
    }
    Ok(TruthedDataset {
        dataset: Dataset::new(x, y, None)?,
        support,
        beta,
        sigma2,
    })
}

/// Realized false discovery and true positive proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub fdp: f64,
    pub tpp: f64,
    pub n_selected: usize,
    pub false_discoveries: usize,
    pub true_discoveries: usize,
}

/// Scores a selection against the known support.
pub fn score(selected: &[usize], truth: &TruthedDataset) -> Score {
    let true_discoveries = selected.iter().filter(|j| truth.support.binary_search(j).is_ok()).count();
    let false_discoveries = selected.len() - true_discoveries;
    Score {
        fdp: false_discoveries as f64 / selected.len().max(1) as f64,
        tpp: true_discoveries as f64 / truth.p1().max(1) as f64,
        n_selected: selected.len(),
        false_discoveries,
        true_discoveries,
    }
}

/// Draws from an urn of `nulls` nulls and `dummies` dummies without
/// replacement until `stops` dummies are drawn; returns the nulls drawn.
pub fn nhg_urn_draw<R: Rng + ?Sized>(nulls: u64, dummies: u64, stops: u64, rng: &mut R) -> u64 {
    let (mut n, mut d) = (nulls, dummies);
    let mut drawn_nulls = 0;
    let mut drawn_dummies = 0;
    while drawn_dummies < stops && d > 0 {
        if rng.random_range(0..n + d) < n {
            n -= 1;
            drawn_nulls += 1;
        } else {
            d -= 1;
            drawn_dummies += 1;
        }
    }
    drawn_nulls
}

/// One urn draw from a seeded stream.
pub fn nhg_urn_sample(nulls: u64, dummies: u64, stops: u64, seed: u64) -> Result<u64> {
    if stops == 0 || stops > dummies {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= stops <= dummies, got stops={stops}, dummies={dummies}"
        )));
    }
    Ok(nhg_urn_draw(nulls, dummies, stops, &mut stream_rng(seed, 0)))
}

/// Mean and Monte Carlo standard error of `draws` urn samples. Work is split
/// into fixed chunks with their own streams, so the result is independent of
/// the thread count.
pub fn nhg_urn_study(nulls: u64, dummies: u64, stops: u64, draws: usize, seed: u64) -> Result<(f64, f64)> {
    if stops == 0 || stops > dummies {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= stops <= dummies, got stops={stops}, dummies={dummies}"
        )));
    }
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least 2 draws".into()));
    }
    const CHUNKS: usize = 64;
    let partial = par::map_indexed(CHUNKS, |c| {
        let count = draws / CHUNKS + usize::from(c < draws % CHUNKS);
        let mut rng = stream_rng(seed, c as u64);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let v = nhg_urn_draw(nulls, dummies, stops, &mut rng) as f64;
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = partial.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let nd = draws as f64;
    let mean = s / nd;
    let var = ((s2 - nd * mean * mean) / (nd - 1.0)).max(0.0);
    Ok((mean, (var / nd).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub rep: usize,
    pub snr: f64,
    pub method: Branch,
    pub fdp: f64,
    pub tpp: f64,
    /// Self-estimated FDR (screening methods) or the target (fallback).
    pub alpha_hat: f64,
    pub n_selected: usize,
    pub p1: usize,
    pub wall_time: f64,
}

/// Mean and Monte Carlo standard error (`sd / sqrt(reps)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        if v.is_empty() {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / n;
        let se = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Branch,
    pub snr: f64,
    pub reps: usize,
    pub fdp: MeanSe,
    pub alpha_hat: MeanSe,
    pub tpp: MeanSe,
    pub n_selected: MeanSe,
    pub wall_time: MeanSe,
}

impl MethodSummary {
    /// `mean FDP <= mean alpha_hat + 2 SE(FDP)`.
    pub fn fdr_within_estimate(&self) -> bool {
        self.fdp.mean <= self.alpha_hat.mean + 2.0 * self.fdp.se
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Campaign {
    /// Rows ordered by SNR block, then rep, then method order of the request.
    pub rows: Vec<MetricRow>,
    pub summaries: Vec<MethodSummary>,
    /// Reps that failed and were excluded.
    pub failures: usize,
    pub failure_messages: Vec<String>,
}

impl Campaign {
    pub fn summary(&self, method: Branch) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// Runs the requested selectors on one simulated replicate.
pub fn run_rep(spec: &SimSpec, rep: usize, methods: &[Branch], cfg: &ScreenConfig) -> Result<Vec<MetricRow>> {
    let rep_spec = SimSpec {
        seed: split_seed(spec.seed, rep as u64),
        ..*spec
    };
    let truth = simulate(&rep_spec)?;
    let std = standardize(&truth.dataset)?;
    let plan = ExperimentPlan::screen(std.p(), cfg.k, split_seed(cfg.master_seed, rep as u64));
    let row = |method, sel: &[usize], alpha_hat, wall_time| {
        let s = score(sel, &truth);
        MetricRow {
            rep,
            snr: spec.snr,
            method,
            fdp: s.fdp,
            tpp: s.tpp,
            alpha_hat,
            n_selected: s.n_selected,
            p1: truth.p1(),
            wall_time,
        }
    };

    let mut rows = Vec::with_capacity(methods.len());
    let wants_screen = methods.iter().any(|m| matches!(m, Branch::Ordinary | Branch::Confidence));
    let screened = if wants_screen {
        let t0 = Instant::now();
        let votes = aggregate(&run_experiments(&std, &plan)?)?;
        let ord = select_ordinary(&votes);
        let t_ord = t0.elapsed().as_secs_f64();
        Some((votes, ord, t_ord))
    } else {
        None
    };
    for &m in methods {
        match m {
            Branch::Ordinary => {
                let (_, ord, t) = screened.as_ref().expect("screen results");
                rows.push(row(m, &ord.selected, ord.alpha_hat, *t));
            }
            Branch::Confidence => {
                let (votes, ord, t) = screened.as_ref().expect("screen results");
                let search = GammaSearch {
                    resamples: cfg.resamples,
                    ..GammaSearch::new(split_seed(cfg.boot_seed(), rep as u64))
                };
                let t0 = Instant::now();
                let conf = select_confidence(votes, ord.r, &search)?;
                let t = t + t0.elapsed().as_secs_f64();
                rows.push(row(m, &conf.selected, conf.alpha_hat, t));
            }
            Branch::Fallback => {
                let t0 = Instant::now();
                let cal = calibrate_trex(&std, cfg.alpha, &plan)?;
                let t = t0.elapsed().as_secs_f64();
                rows.push(row(m, &cal.selected, cfg.alpha, t));
            }
        }
    }
    Ok(rows)
}

fn summarize(rows: &[MetricRow], methods: &[Branch], snr: f64) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&m| {
            let sel: Vec<&MetricRow> = rows.iter().filter(|r| r.method == m && r.snr == snr).collect();
            MethodSummary {
                method: m,
                snr,
                reps: sel.len(),
                fdp: MeanSe::of(sel.iter().map(|r| r.fdp)),
                alpha_hat: MeanSe::of(sel.iter().map(|r| r.alpha_hat)),
                tpp: MeanSe::of(sel.iter().map(|r| r.tpp)),
                n_selected: MeanSe::of(sel.iter().map(|r| r.n_selected as f64)),
                wall_time: MeanSe::of(sel.iter().map(|r| r.wall_time)),
            }
        })
        .collect()
}

fn dedup_methods(methods: &[Branch]) -> Vec<Branch> {
    let mut out = Vec::new();
    for &m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// Monte Carlo campaign at `spec.snr`. Reps may run concurrently; rows are
/// ordered by rep index and failed reps are excluded and counted.
pub fn mc_campaign(spec: &SimSpec, reps: usize, methods: &[Branch], cfg: &ScreenConfig) -> Result<Campaign> {
    mc_sweep(spec, &[spec.snr], reps, methods, cfg)
}

/// Runs a campaign per SNR value and returns one summary block per SNR.
/// The same rep seeds are used at every SNR.
pub fn mc_sweep(
    spec: &SimSpec,
    snr_grid: &[f64],
    reps: usize,
    methods: &[Branch],
    cfg: &ScreenConfig,
) -> Result<Campaign> {
    spec.validate()?;
    cfg.validate()?;
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    if snr_grid.is_empty() {
        return Err(Error::InvalidParameter("empty SNR grid".into()));
    }
    let methods = dedup_methods(methods);
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods requested".into()));
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut failure_messages = Vec::new();
    for &snr in snr_grid {
        let block_spec = SimSpec { snr, ..*spec };
        block_spec.validate()?;
        let results = par::map_indexed(reps, |rep| run_rep(&block_spec, rep, &methods, cfg));
        let mut block = Vec::new();
        for (rep, r) in results.into_iter().enumerate() {
            match r {
                Ok(rs) => block.extend(rs),
                Err(e) => failure_messages.push(format!("snr {snr}, rep {rep}: {e}")),
            }
        }
        summaries.extend(summarize(&block, &methods, snr));
        rows.extend(block);
    }
    Ok(Campaign {
        rows,
        summaries,
        failures: failure_messages.len(),
        failure_messages,
    })
}
