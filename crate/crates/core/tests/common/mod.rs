//! Independent oracles and random problem generators shared by the
//! integration and acceptance tests. Nothing here calls into the library's
//! numerical code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use wagegap::{Cell, Dataset, ModelSpec, OutcomeTransform, VariableSpec};

// ---------------------------------------------------------------------------
// Exact least squares

pub struct ExactOls {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
    pub f_statistic: f64,
}

fn rat(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite input")
}

/// Gauss-Jordan inverse over the rationals.
fn exact_inverse(mut a: Vec<Vec<BigRational>>) -> Vec<Vec<BigRational>> {
    let p = a.len();
    let mut inv: Vec<Vec<BigRational>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
        .collect();
    for k in 0..p {
        let pivot = (k..p).find(|&i| !a[i][k].is_zero()).expect("nonsingular normal matrix");
        a.swap(k, pivot);
        inv.swap(k, pivot);
        let d = a[k][k].clone();
        for j in 0..p {
            a[k][j] = &a[k][j] / &d;
            inv[k][j] = &inv[k][j] / &d;
        }
        for i in 0..p {
            if i == k || a[i][k].is_zero() {
                continue;
            }
            let f = a[i][k].clone();
            for j in 0..p {
                let t = &f * &a[k][j];
                a[i][j] = &a[i][j] - t;
                let t = &f * &inv[k][j];
                inv[i][j] = &inv[i][j] - t;
            }
        }
    }
    inv
}

/// Solves the normal equations X'X b = X'y exactly, first column intercept.
pub fn exact_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> ExactOls {
    let (n, p) = x.shape();
    let xr: Vec<Vec<BigRational>> = (0..n).map(|i| (0..p).map(|j| rat(x[(i, j)])).collect()).collect();
    let yr: Vec<BigRational> = y.iter().map(|&v| rat(v)).collect();

    let mut xtx = vec![vec![BigRational::zero(); p]; p];
    let mut xty = vec![BigRational::zero(); p];
    for row in 0..n {
        for i in 0..p {
            xty[i] += &xr[row][i] * &yr[row];
            for j in i..p {
                xtx[i][j] += &xr[row][i] * &xr[row][j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[i][j] = xtx[j][i].clone();
        }
    }
    let inv = exact_inverse(xtx);
    let beta: Vec<BigRational> = (0..p)
        .map(|i| (0..p).fold(BigRational::zero(), |acc, j| acc + &inv[i][j] * &xty[j]))
        .collect();

    let mut rss = BigRational::zero();
    let mut sum = BigRational::zero();
    for row in 0..n {
        let fitted = (0..p).fold(BigRational::zero(), |acc, j| acc + &xr[row][j] * &beta[j]);
        let e = &yr[row] - fitted;
        rss += &e * &e;
        sum += &yr[row];
    }
    let nr = BigRational::from_integer(BigInt::from(n));
    let mean = &sum / &nr;
    let tss = yr.iter().fold(BigRational::zero(), |acc, v| {
        let d = v - &mean;
        acc + &d * &d
    });
    let df_res = BigRational::from_integer(BigInt::from(n - p));
    let df_mod = BigRational::from_integer(BigInt::from(p - 1));
    let sigma2 = &rss / &df_res;
    let r2 = BigRational::one() - &rss / &tss;
    let f = (&r2 / &df_mod) / ((BigRational::one() - &r2) / &df_res);

    ExactOls {
        coefficients: beta.iter().map(|b| b.to_f64().unwrap()).collect(),
        std_errors: (0..p).map(|j| (&sigma2 * &inv[j][j]).to_f64().unwrap().sqrt()).collect(),
        r_squared: r2.to_f64().unwrap(),
        f_statistic: f.to_f64().unwrap(),
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    let d = (got - want).abs();
    if d == 0.0 {
        0.0
    } else {
        d / want.abs().max(f64::MIN_POSITIVE)
    }
}

/// Random well-conditioned regression: intercept plus `k` columns on a
/// 1/256 grid, outcome with noise.
pub fn random_regression(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    let grid = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo..hi) * 256.0).round() / 256.0;
    let x = DMatrix::from_fn(n, k + 1, |_, j| if j == 0 { 1.0 } else { 0.0 });
    let mut x = x;
    for j in 1..=k {
        for i in 0..n {
            x[(i, j)] = grid(rng, -4.0, 4.0);
        }
    }
    let beta: Vec<f64> = (0..=k).map(|_| grid(rng, -3.0, 3.0)).collect();
    let y = DVector::from_fn(n, |i, _| {
        (0..=k).map(|j| beta[j] * x[(i, j)]).sum::<f64>() + grid(rng, -2.0, 2.0)
    });
    (x, y)
}

// ---------------------------------------------------------------------------
// Student-t quantile by quadrature and bisection

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn t_density(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (t * t / df).ln_1p()).exp()
}

/// P(0 < T < x) by composite Simpson.
fn t_mass(x: f64, df: f64) -> f64 {
    let m = 4000;
    let h = x / m as f64;
    let mut s = t_density(0.0, df) + t_density(x, df);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_density(i as f64 * h, df);
    }
    s * h / 3.0
}

/// Upper-tail quantile t with P(T ≤ t) = p, p > 0.5.
pub fn t_quantile_oracle(df: f64, p: f64) -> f64 {
    let target = p - 0.5;
    let (mut lo, mut hi) = (0.0, 1.0);
    while t_mass(hi, df) < target {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if t_mass(mid, df) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition by cyclic Jacobi

/// Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

pub struct McaOracle {
    /// Standard coordinates of the indicator columns on dimension 1.
    pub column_standard: Vec<f64>,
    pub row_scores: Vec<f64>,
    pub first_inertia: f64,
}

/// First MCA dimension of an indicator matrix, oriented so that column
/// `anchor` has a positive coordinate. Row scores are principal row
/// coordinates computed from the left side of the SVD.
pub fn mca_oracle(z: &DMatrix<f64>, anchor: usize) -> McaOracle {
    let total: f64 = z.sum();
    let p = z / total;
    let r: Vec<f64> = (0..p.nrows()).map(|i| p.row(i).sum()).collect();
    let c: Vec<f64> = (0..p.ncols()).map(|j| p.column(j).sum()).collect();
    let s = DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt());
    let (values, vectors) = jacobi_eigen(&(s.transpose() * &s));
    let mut v1: Vec<f64> = vectors.column(0).iter().copied().collect();
    if v1[anchor] < 0.0 {
        v1.iter_mut().for_each(|x| *x = -*x);
    }
    let column_standard: Vec<f64> = v1.iter().zip(&c).map(|(v, cj)| v / cj.sqrt()).collect();
    let sv = &s * DVector::from_vec(v1);
    let row_scores = sv.iter().zip(&r).map(|(x, ri)| x / ri.sqrt()).collect();
    McaOracle {
        column_standard,
        row_scores,
        first_inertia: values[0],
    }
}

// ---------------------------------------------------------------------------
// Type-7 percentile, written out independently

pub fn percentile_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (v.len() - 1) as f64;
    let i = pos as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] * (1.0 - (pos - i as f64)) + v[i + 1] * (pos - i as f64)
}

/// Normal-equations least squares in f64, for replaying bootstrap replicates.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    xtx.cholesky().expect("positive definite").solve(&xty)
}

/// (endowments, coefficients, interaction) with the female (b) reference,
/// from coefficient and mean vectors.
pub fn threefold_b(alpha_a: &DVector<f64>, alpha_b: &DVector<f64>, xa: &DVector<f64>, xb: &DVector<f64>) -> (f64, f64, f64) {
    let dx = xa - xb;
    let da = alpha_a - alpha_b;
    (alpha_b.dot(&dx), da.dot(xb), da.dot(&dx))
}

pub fn col_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.ncols(), |j, _| x.column(j).mean())
}

// ---------------------------------------------------------------------------
// Random two-group datasets

/// Predictors whose encoding has exactly `p` columns including the intercept.
pub fn random_predictors(rng: &mut ChaCha8Rng, p: usize) -> Vec<VariableSpec> {
    let mut left = p - 1;
    let mut preds = Vec::new();
    let mut idx = 0;
    while left > 0 {
        idx += 1;
        let name = format!("v{idx}");
        if left >= 2 && rng.random_bool(0.5) {
            let dummies = rng.random_range(1..=left.min(5));
            let levels: Vec<String> = (0..=dummies).map(|l| format!("l{l}")).collect();
            let refs: Vec<&str> = levels.iter().map(String::as_str).collect();
            preds.push(VariableSpec::categorical(&name, &refs, "l0"));
            left -= dummies;
        } else if left >= 2 && rng.random_bool(0.2) {
            preds.push(VariableSpec::continuous(&name));
            preds.push(VariableSpec::squared_of(&format!("{name}_sq"), &name));
            left -= 2;
        } else {
            preds.push(VariableSpec::continuous(&name));
            left -= 1;
        }
    }
    preds
}

pub fn spec_with(predictors: Vec<VariableSpec>) -> ModelSpec {
    ModelSpec {
        outcome: "wage".into(),
        outcome_transform: OutcomeTransform::Identity,
        predictors,
        group_variable: "sex".into(),
        group_a_label: "male".into(),
        group_b_label: "female".into(),
    }
}

/// Two groups of sizes `n_a`, `n_b` under `spec`, with different covariate
/// distributions and coefficients. Every level appears in every group.
pub fn random_dataset(rng: &mut ChaCha8Rng, spec: &ModelSpec, n_a: usize, n_b: usize) -> Dataset {
    let mut names = vec![spec.outcome.clone(), spec.group_variable.clone()];
    let sources: Vec<&VariableSpec> = spec.predictors.iter().filter(|v| v.source_column().is_some()).collect();
    names.extend(sources.iter().map(|v| v.name.clone()));
    let mut rows = Vec::with_capacity(n_a + n_b);
    for (group, n, shift) in [(&spec.group_a_label, n_a, 1.0), (&spec.group_b_label, n_b, 0.0)] {
        let intercept = rng.random_range(5.0..15.0);
        let slopes: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0) + shift).collect();
        for i in 0..n {
            let mut cells = Vec::new();
            let mut y = intercept;
            let mut s = 0;
            for v in &sources {
                match &v.kind {
                    wagegap::VariableKind::Categorical { levels, .. } => {
                        let l = if i < levels.len() { i } else { rng.random_range(0..levels.len()) };
                        if l > 0 {
                            y += slopes[(s + l) % 64];
                        }
                        s += levels.len();
                        cells.push(Cell::Text(levels[l].clone()));
                    }
                    _ => {
                        let x: f64 = rng.random_range(-2.0..3.0) + 0.5 * shift;
                        y += slopes[s % 64] * x;
                        if spec.predictors.iter().any(|p| matches!(&p.kind, wagegap::VariableKind::SquaredOf { base } if base == &v.name)) {
                            y += 0.1 * slopes[(s + 1) % 64] * x * x;
                        }
                        s += 2;
                        cells.push(Cell::Number(x));
                    }
                }
            }
            y += rng.random_range(-1.0..1.0) * 2.0;
            let mut row = vec![Cell::Number(y), Cell::Text(group.clone())];
            row.extend(cells);
            rows.push(row);
        }
    }
    Dataset::new(names, rows).expect("well-formed dataset")
}

pub fn abs_sum(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).sum()
}
