//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Reference LARS result: entry order and coefficients at the stop knot.
#[derive(Debug, Clone)]
pub struct RefPath {
    pub entry_order: Vec<usize>,
    pub coefficients: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..m {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Textbook forward LARS on columns `cols` (centered, unit norm) and centered
/// `y`. Along the direction `d = (X_A' X_A)^{-1} s_A` every active absolute
/// correlation drops at unit rate, so an inactive column `j` ties at
/// `(C - c_j) / (1 - a_j)` or `(C + c_j) / (1 + a_j)` with `a_j = x_j' X_A d`.
/// Correlations are recomputed from the residual at every knot.
pub fn reference_lars(cols: &[Vec<f64>], y: &[f64], dummy_start: usize, t_stop: usize) -> RefPath {
    let p = cols.len();
    let n = y.len();
    let cap = (n - 1).min(p);
    let mut beta = vec![0.0; p];
    let mut active: Vec<usize> = Vec::new();
    let mut dummies = 0;

    let corr_of = |beta: &[f64]| -> Vec<f64> {
        let mut r = y.to_vec();
        for (j, b) in beta.iter().enumerate() {
            for i in 0..n {
                r[i] -= b * cols[j][i];
            }
        }
        cols.iter().map(|c| dot(c, &r)).collect()
    };

    let c0 = corr_of(&beta);
    let first = (0..p).fold(0, |best, j| if c0[j].abs() > c0[best].abs() { j } else { best });
    if c0[first].abs() <= 1e-12 * dot(y, y).sqrt() {
        return RefPath {
            entry_order: active,
            coefficients: beta,
        };
    }
    let mut next = Some(first);

    while let Some(j) = next {
        active.push(j);
        if j >= dummy_start {
            dummies += 1;
        }
        let c = corr_of(&beta);
        let big_c = c[active[0]].abs();
        let s: Vec<f64> = active.iter().map(|&k| c[k].signum()).collect();
        let gram: Vec<Vec<f64>> = active
            .iter()
            .map(|&a| active.iter().map(|&b| dot(&cols[a], &cols[b])).collect())
            .collect();
        let d = solve(gram, s);
        let mut u = vec![0.0; n];
        for (pos, &k) in active.iter().enumerate() {
            for i in 0..n {
                u[i] += d[pos] * cols[k][i];
            }
        }
        let mut step = big_c;
        let mut entering = None;
        if active.len() < cap {
            for k in 0..p {
                if active.contains(&k) {
                    continue;
                }
                let a = dot(&cols[k], &u);
                for (num, den) in [(big_c - c[k], 1.0 - a), (big_c + c[k], 1.0 + a)] {
                    if den > 1e-12 {
                        let g = num.max(0.0) / den;
                        if g < step {
                            step = g;
                            entering = Some(k);
                        }
                    }
                }
            }
        }
        for (pos, &k) in active.iter().enumerate() {
            beta[k] += step * d[pos];
        }
        if dummies >= t_stop {
            break;
        }
        next = entering;
        if big_c - step <= 1e-12 * dot(y, y).sqrt() {
            next = None;
        }
    }
    RefPath {
        entry_order: active,
        coefficients: beta,
    }
}

/// Centers `v` and scales it to unit Euclidean norm.
pub fn center_unit(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// A random LARS instance with standardized columns and centered response.
pub struct Instance {
    pub cols: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub dummy_start: usize,
    pub t_stop: usize,
}

impl Instance {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=8);
        let p_ext = rng.random_range(1..=6);
        let dummy_start = rng.random_range(0..=p_ext);
        let t_stop = rng.random_range(1..=2);
        let cols = (0..p_ext)
            .map(|_| {
                let mut c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                center_unit(&mut c);
                c
            })
            .collect();
        let mut y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= mean);
        Self {
            cols,
            y,
            dummy_start,
            t_stop,
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.y.len(), self.cols.len(), |i, j| self.cols[j][i])
    }

    pub fn response(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }
}

/// Outcome of comparing the library path with the reference on one instance.
pub fn lars_matches_reference(seed: u64, tol: f64) -> Result<(), String> {
    let inst = Instance::random(seed);
    let x = inst.matrix();
    let y = inst.response();
    let cfg = screen_trex::PathConfig::new(inst.t_stop, inst.dummy_start);
    let got = screen_trex::lars_path(&x, &y, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
    let want = reference_lars(&inst.cols, &inst.y, inst.dummy_start, inst.t_stop);
    if got.entry_order != want.entry_order {
        return Err(format!(
            "seed {seed}: entry order {:?} != reference {:?}",
            got.entry_order, want.entry_order
        ));
    }
    for (j, (a, b)) in got.coefficients.iter().zip(&want.coefficients).enumerate() {
        if (a - b).abs() > tol {
            return Err(format!("seed {seed}: coefficient {j} is {a}, reference {b}"));
        }
    }
    Ok(())
}

/// Hand evaluation of the branch rule written as nested case analysis.
pub fn decide_oracle(a: f64, ac: f64, lo: f64, hi: f64) -> &'static str {
    let a_ok = lo <= a && a <= hi;
    let ac_ok = lo <= ac && ac <= hi;
    // The estimate that is larger among those not exceeding the upper bound
    // wins; estimates above the upper bound never compete.
    if ac_ok {
        if a > hi || a <= ac {
            return "confidence";
        }
    }
    if a_ok {
        if ac > hi || ac <= a {
            return "ordinary";
        }
    }
    "fallback"
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}
