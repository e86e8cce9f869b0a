//! Slow, dense reference implementations used as test oracles. Plain `Vec`
//! arithmetic only, so they share no code with the library under test.
#![allow(dead_code)]

pub type Matrix = Vec<Vec<f64>>;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Matrix, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

pub fn transpose_times(x: &Matrix, w: &Matrix, z: &Matrix) -> Matrix {
    // xᵀ w z
    let (n, p, q) = (x.len(), x[0].len(), z[0].len());
    let mut wz = vec![vec![0.0; q]; n];
    for i in 0..n {
        for k in 0..n {
            if w[i][k] != 0.0 {
                for j in 0..q {
                    wz[i][j] += w[i][k] * z[k][j];
                }
            }
        }
    }
    let mut out = vec![vec![0.0; q]; p];
    for a in 0..p {
        for i in 0..n {
            for j in 0..q {
                out[a][j] += x[i][a] * wz[i][j];
            }
        }
    }
    out
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

/// OLS coefficients from the normal equations `XᵀX β = Xᵀy`.
pub fn normal_equations(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let yc: Matrix = y.iter().map(|&v| vec![v]).collect();
    let id = identity(x.len());
    let xtx = transpose_times(x, &id, x);
    let xty: Vec<f64> = transpose_times(x, &id, &yc).into_iter().map(|r| r[0]).collect();
    gauss_solve(xtx, xty)
}

/// Lower Cholesky factor.
pub fn cholesky(a: &Matrix) -> Matrix {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Solves `L Lᵀ z = b` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * w[k]).sum();
        w[i] = (b[i] - s) / l[i][i];
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * z[k]).sum();
        z[i] = (w[i] - s) / l[i][i];
    }
    z
}

/// Profile ML log-likelihood of the random-intercept model at `theta`,
/// built from the dense covariance `V = I + θ·[same cluster]`.
pub fn dense_profile_loglik(x: &Matrix, y: &[f64], cluster: &[usize], theta: f64) -> f64 {
    let (n, p) = (y.len(), x[0].len());
    let v: Matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| f64::from(u8::from(i == j)) + if cluster[i] == cluster[j] { theta } else { 0.0 })
                .collect()
        })
        .collect();
    let l = cholesky(&v);
    let logdet: f64 = 2.0 * (0..n).map(|i| l[i][i].ln()).sum::<f64>();
    // V⁻¹X column by column, then XᵀV⁻¹X and XᵀV⁻¹y
    let vx: Vec<Vec<f64>> = (0..p)
        .map(|a| cholesky_solve(&l, &(0..n).map(|i| x[i][a]).collect::<Vec<_>>()))
        .collect();
    let xtvx: Matrix = (0..p)
        .map(|a| (0..p).map(|b| (0..n).map(|i| x[i][a] * vx[b][i]).sum()).collect())
        .collect();
    let xtvy: Vec<f64> = (0..p).map(|a| (0..n).map(|i| vx[a][i] * y[i]).sum()).collect();
    let beta = gauss_solve(xtvx, xtvy);
    let r: Vec<f64> = (0..n)
        .map(|i| y[i] - x[i].iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let vr = cholesky_solve(&l, &r);
    let q: f64 = r.iter().zip(&vr).map(|(a, b)| a * b).sum();
    let nf = n as f64;
    -0.5 * (nf * (2.0 * std::f64::consts::PI).ln() + nf * (q / nf).ln() + nf + logdet)
}

/// Γ(k/2) for a positive integer `k`.
fn gamma_half(k: u32) -> f64 {
    if k % 2 == 0 {
        (1..k / 2).map(f64::from).product()
    } else {
        // Γ(1/2) = √π and Γ(z + 1) = z Γ(z)
        let steps = (k - 1) / 2;
        std::f64::consts::PI.sqrt() * (0..steps).map(|j| f64::from(j) + 0.5).product::<f64>()
    }
}

pub fn t_density(t: f64, dof: u32) -> f64 {
    let nu = f64::from(dof);
    gamma_half(dof + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(dof)) * (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0)
}

/// `P(T ≤ x)` by composite Simpson integration of the density from 0.
pub fn t_cdf_by_quadrature(x: f64, dof: u32) -> f64 {
    let m = 20_000;
    let h = x / m as f64;
    let mut s = t_density(0.0, dof) + t_density(x, dof);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_density(h * i as f64, dof);
    }
    0.5 + s * h / 3.0
}
