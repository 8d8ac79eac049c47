//! Least angle regression forward path with dummy-count termination.
//!
//! The solver enters one column per knot and never drops a column (no lasso
//! modification). Columns at index `dummy_start` and above are dummies; the
//! path stops at the end of the step in which the `t_stop`-th dummy entered,
//! so that dummy already carries a nonzero coefficient.
//!
//! At each step the equiangular direction is obtained from a fresh Cholesky
//! factorization of the signed active Gram matrix. The Gram entries
//! themselves are cached as columns enter.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used to decide correlation and step-length ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Tolerance for the standardization contract on path inputs.
const STANDARDIZED_TOLERANCE: f64 = 1e-8;

/// Smallest acceptable squared pivot in the active Gram factorization.
const MIN_PIVOT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathConfig {
    /// Number of dummy entries that terminates the path.
    pub t_stop: usize,
    /// First dummy column in the extended matrix.
    pub dummy_start: usize,
    /// Optional cap on the number of steps.
    pub max_steps: Option<usize>,
}

impl PathConfig {
    pub fn new(t_stop: usize, dummy_start: usize) -> Self {
        Self {
            t_stop,
            dummy_start,
            max_steps: None,
        }
    }

    fn validate(&self, ncols: usize) -> Result<()> {
        if self.t_stop == 0 {
            return Err(Error::InvalidParameter("t_stop must be at least 1".into()));
        }
        if self.dummy_start > ncols {
            return Err(Error::InvalidParameter(format!(
                "dummy_start {} exceeds column count {ncols}",
                self.dummy_start
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Column indices in the order they entered the active set.
    pub entry_order: Vec<usize>,
    /// Coefficients over all columns at the termination knot.
    pub coefficients: Vec<f64>,
    pub dummies_included: usize,
    /// True when the dummy quota was reached before the path ran out.
    pub terminated_early: bool,
}

impl PathResult {
    /// Original (non-dummy) columns that entered before the `t`-th dummy.
    /// If fewer than `t` dummies entered, every entered original is returned.
    pub fn candidates_before_dummy(&self, dummy_start: usize, t: usize) -> Vec<usize> {
        candidates_before_dummy(&self.entry_order, dummy_start, t)
    }
}

pub(crate) fn candidates_before_dummy(entry_order: &[usize], dummy_start: usize, t: usize) -> Vec<usize> {
    let mut seen = 0;
    let mut out = Vec::new();
    for &j in entry_order {
        if j >= dummy_start {
            seen += 1;
            if seen == t {
                break;
            }
        } else {
            out.push(j);
        }
    }
    out
}

/// Summary of one completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub entered: usize,
    pub step_length: f64,
    /// Common absolute correlation of the active set at the new knot.
    pub max_correlation: f64,
}

/// Incremental LARS state over a borrowed standardized design.
#[derive(Debug, Clone)]
pub struct LarsPath<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    dummy_start: usize,
    active: Vec<usize>,
    signs: Vec<f64>,
    is_active: Vec<bool>,
    // unsigned X_A^T X_A, row-major by active position
    gram: Vec<Vec<f64>>,
    beta: Vec<f64>,
    corr: DVector<f64>,
    c_max: f64,
    next: Option<usize>,
    max_active: usize,
    dummies_included: usize,
    steps: usize,
    corr_floor: f64,
}

impl<'a> LarsPath<'a> {
    /// Starts a path. Columns of `x` must be centered with unit norm and `y`
    /// must be centered.
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>, dummy_start: usize) -> Result<Self> {
        check_standardized(x, y)?;
        let (n, ncols) = x.shape();
        if dummy_start > ncols {
            return Err(Error::InvalidParameter(format!(
                "dummy_start {dummy_start} exceeds column count {ncols}"
            )));
        }
        let corr = x.tr_mul(y);
        let corr_floor = TIE_TOLERANCE * y.norm();
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            let a = c.abs();
            match best {
                Some((_, b)) if a <= b * (1.0 + TIE_TOLERANCE) => {}
                _ => best = Some((j, a)),
            }
        }
        let (next, c_max) = match best {
            Some((j, c)) if c > corr_floor => (Some(j), c),
            Some((_, c)) => (None, c),
            None => (None, 0.0),
        };
        Ok(Self {
            x,
            y,
            dummy_start,
            active: Vec::new(),
            signs: Vec::new(),
            is_active: vec![false; ncols],
            gram: Vec::new(),
            beta: vec![0.0; ncols],
            corr,
            c_max,
            next,
            max_active: (n - 1).min(ncols),
            dummies_included: 0,
            steps: 0,
            corr_floor,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.beta
    }

    /// Current correlations as maintained by the path updates.
    pub fn correlations(&self) -> &[f64] {
        self.corr.as_slice()
    }

    /// Common absolute correlation of the active set.
    pub fn max_correlation(&self) -> f64 {
        self.c_max
    }

    pub fn dummies_included(&self) -> usize {
        self.dummies_included
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Whether no further variable can enter.
    pub fn is_exhausted(&self) -> bool {
        self.next.is_none()
    }

    /// Recomputes `x^T (y - x beta)` from the current coefficients.
    pub fn knot_correlations(&self) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.beta);
        let resid = self.y - self.x * beta;
        self.x.tr_mul(&resid).as_slice().to_vec()
    }

    /// Enters the next variable and advances to the following knot.
    /// Returns `None` when the path is exhausted.
    pub fn step(&mut self) -> Result<Option<Step>> {
        let Some(j) = self.next.take() else {
            return Ok(None);
        };
        let x = self.x;

        let mut row = Vec::with_capacity(self.active.len() + 1);
        for (pos, &i) in self.active.iter().enumerate() {
            let g = x.column(i).dot(&x.column(j));
            self.gram[pos].push(g);
            row.push(g);
        }
        row.push(x.column(j).dot(&x.column(j)));
        self.gram.push(row);
        self.active.push(j);
        self.signs.push(if self.corr[j] < 0.0 { -1.0 } else { 1.0 });
        self.is_active[j] = true;
        if j >= self.dummy_start {
            self.dummies_included += 1;
        }

        let m = self.active.len();
        let signed = DMatrix::from_fn(m, m, |r, c| self.signs[r] * self.signs[c] * self.gram[r][c]);
        let chol = Cholesky::new(signed).ok_or_else(|| self.rank_error())?;
        let l = chol.l_dirty();
        if (0..m).any(|i| {
            let d = l[(i, i)];
            !(d * d > MIN_PIVOT)
        }) {
            return Err(self.rank_error());
        }
        let q = chol.solve(&DVector::from_element(m, 1.0));
        let q_sum = q.sum();
        if !(q_sum > 0.0 && q_sum.is_finite()) {
            return Err(self.rank_error());
        }
        let a_norm = q_sum.sqrt().recip();
        let w = q * a_norm;

        let mut u = DVector::zeros(x.nrows());
        for (pos, &i) in self.active.iter().enumerate() {
            u.axpy(self.signs[pos] * w[pos], &x.column(i), 1.0);
        }
        let a = x.tr_mul(&u);

        let c = self.c_max;
        let gamma_full = c / a_norm;
        let mut best: Option<(usize, f64)> = None;
        if m < self.max_active {
            let den_floor = TIE_TOLERANCE * a_norm;
            for (k, (&ck, &ak)) in self.corr.iter().zip(a.iter()).enumerate() {
                if self.is_active[k] {
                    continue;
                }
                let mut g = f64::INFINITY;
                let d1 = a_norm - ak;
                if d1 > den_floor {
                    g = g.min((c - ck).max(0.0) / d1);
                }
                let d2 = a_norm + ak;
                if d2 > den_floor {
                    g = g.min((c + ck).max(0.0) / d2);
                }
                if !g.is_finite() {
                    continue;
                }
                match best {
                    Some((_, b)) if g >= b * (1.0 - TIE_TOLERANCE) => {}
                    _ => best = Some((k, g)),
                }
            }
        }
        let (gamma, next) = match best {
            Some((k, g)) if g < gamma_full * (1.0 - TIE_TOLERANCE) => (g, Some(k)),
            _ => (gamma_full, None),
        };

        for (pos, &i) in self.active.iter().enumerate() {
            self.beta[i] += gamma * self.signs[pos] * w[pos];
        }
        self.corr.axpy(-gamma, &a, 1.0);
        self.c_max = if next.is_some() { c - gamma * a_norm } else { 0.0 };
        self.next = if self.c_max > self.corr_floor { next } else { None };
        self.steps += 1;

        Ok(Some(Step {
            entered: j,
            step_length: gamma,
            max_correlation: self.c_max,
        }))
    }

    /// Steps until `t` dummies have entered, the path is exhausted, or
    /// `max_steps` total steps have been taken.
    pub fn run_until_dummies(&mut self, t: usize, max_steps: Option<usize>) -> Result<()> {
        while self.dummies_included < t && max_steps.is_none_or(|cap| self.steps < cap) {
            if self.step()?.is_none() {
                break;
            }
        }
        Ok(())
    }

    /// Snapshot of the path at the current knot.
    pub fn result(&self, t_stop: usize) -> PathResult {
        PathResult {
            entry_order: self.active.clone(),
            coefficients: self.beta.clone(),
            dummies_included: self.dummies_included,
            terminated_early: self.dummies_included >= t_stop,
        }
    }

    fn rank_error(&self) -> Error {
        Error::RankDeficient {
            active: self.active.clone(),
        }
    }
}

fn check_standardized(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidDataset("need at least two observations".into()));
    }
    for (j, col) in x.column_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let norm = col.norm();
        if mean.abs() > STANDARDIZED_TOLERANCE || (norm - 1.0).abs() > STANDARDIZED_TOLERANCE {
            return Err(Error::NotStandardized(format!(
                "column {j} has mean {mean:e} and norm {norm}"
            )));
        }
    }
    let scale = y.amax().max(1.0);
    let y_mean = y.sum() / n as f64;
    if y_mean.abs() > STANDARDIZED_TOLERANCE * scale {
        return Err(Error::NotStandardized(format!("response mean is {y_mean:e}")));
    }
    Ok(())
}

/// Runs LARS on a standardized extended design until `cfg.t_stop` dummies
/// have entered or the path is exhausted.
pub fn lars_path(x_ext: &DMatrix<f64>, y_c: &DVector<f64>, cfg: &PathConfig) -> Result<PathResult> {
    cfg.validate(x_ext.ncols())?;
    let mut path = LarsPath::new(x_ext, y_c, cfg.dummy_start)?;
    path.run_until_dummies(cfg.t_stop, cfg.max_steps)?;
    Ok(path.result(cfg.t_stop))
}
