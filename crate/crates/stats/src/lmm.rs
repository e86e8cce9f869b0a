//! Random-intercept linear mixed model fitted by maximum likelihood.
//!
//! With `θ = σ²_u / σ²_e` each cluster's covariance is `σ²_e (I + θ 11ᵀ)`,
//! whose inverse is `(I − c 11ᵀ) / σ²_e` with `c = θ / (1 + nθ)`. For fixed θ
//! the GLS estimate of β and the ML estimate of σ²_e are closed form, so the
//! likelihood is profiled down to one dimension and searched over log θ.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::ols::{qr_parts, FitResult, Inference, VarianceComponents};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmmOptions {
    pub theta_min: f64,
    pub theta_max: f64,
    /// Points of the coarse log-θ scan that brackets the optimum.
    pub scan_points: usize,
    /// Golden-section stops when the log-θ bracket is narrower than this.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for LmmOptions {
    fn default() -> Self {
        LmmOptions {
            theta_min: 1e-8,
            theta_max: 1e4,
            scan_points: 61,
            rel_tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Fixed-effects design plus cluster membership.
#[derive(Debug, Clone)]
pub struct ClusteredDesign {
    x: DMatrix<f64>,
    y: DVector<f64>,
    /// Row ranges per cluster after sorting by cluster.
    clusters: Vec<std::ops::Range<usize>>,
    // θ-independent pieces of the GLS normal equations
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    /// Per cluster: (size, column sums of X, sum of y).
    sums: Vec<(f64, DVector<f64>, f64)>,
}

impl ClusteredDesign {
    /// `cluster[i]` labels row `i`; rows need not be grouped in advance.
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, cluster: &[usize]) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n || cluster.len() != n {
            return Err(StatsError::DegenerateData("design, response and cluster lengths differ".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (cluster[i], i));
        let xs = DMatrix::from_fn(n, p, |i, j| x[(order[i], j)]);
        let ys = DVector::from_fn(n, |i, _| y[order[i]]);
        let mut clusters = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || cluster[order[i]] != cluster[order[start]] {
                clusters.push(start..i);
                start = i;
            }
        }
        if clusters.len() < 2 {
            return Err(StatsError::TooFewGroups(clusters.len()));
        }
        qr_parts(&xs, &ys).map_err(|e| StatsError::SingularDesign(e.to_string()))?;
        let xtx = xs.transpose() * &xs;
        let xty = xs.transpose() * &ys;
        let sums = clusters
            .iter()
            .map(|r| {
                (
                    r.len() as f64,
                    xs.rows(r.start, r.len()).row_sum().transpose(),
                    ys.rows(r.start, r.len()).sum(),
                )
            })
            .collect();
        Ok(ClusteredDesign {
            x: xs,
            y: ys,
            clusters,
            xtx,
            xty,
            sums,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// GLS solution at `theta`: `(β̂, (XᵀWX)⁻¹, Q)` with `Q = rᵀWr`.
    fn gls(&self, theta: f64) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
        let p = self.x.ncols();
        let mut xtwx = self.xtx.clone();
        let mut xtwy = self.xty.clone();
        for (m, sx, sy) in &self.sums {
            let c = theta / (1.0 + m * theta);
            xtwx.ger(-c, sx, sx, 1.0);
            xtwy.axpy(-c * sy, sx, 1.0);
        }
        let chol = xtwx
            .cholesky()
            .ok_or_else(|| StatsError::SingularDesign(format!("XᵀV⁻¹X not positive definite at θ = {theta}")))?;
        let beta = chol.solve(&xtwy);
        let inv = chol.inverse();
        let resid = &self.y - &self.x * &beta;
        let mut q = 0.0;
        for r in &self.clusters {
            let c = theta / (1.0 + r.len() as f64 * theta);
            let block = resid.rows(r.start, r.len());
            let s: f64 = block.sum();
            q += block.norm_squared() - c * s * s;
        }
        debug_assert_eq!(beta.len(), p);
        Ok((beta, inv, q))
    }

    /// Log-likelihood with β and σ²_e profiled out.
    pub fn profile_log_likelihood(&self, theta: f64) -> Result<f64> {
        let (_, _, q) = self.gls(theta)?;
        Ok(self.loglik_from_q(theta, q))
    }

    fn loglik_from_q(&self, theta: f64, q: f64) -> f64 {
        let n = self.n() as f64;
        let logdet: f64 = self.clusters.iter().map(|r| (r.len() as f64 * theta).ln_1p()).sum();
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + n * (q / n).ln() + n + logdet)
    }

    /// Maximizes the profile likelihood over `θ ∈ [theta_min, theta_max]`.
    pub fn fit(&self, opts: &LmmOptions) -> Result<FitResult> {
        let theta = self.optimize_theta(opts)?;
        let (beta, inv, q) = self.gls(theta)?;
        let n = self.n();
        if q <= 0.0 {
            return Err(StatsError::DegenerateData("residual variance is zero".into()));
        }
        let sigma2_e = q / n as f64;
        let cov = inv * sigma2_e;
        let mut fit = FitResult::build(&beta, &cov, Inference::WaldZ, n, q);
        fit.log_likelihood = Some(self.loglik_from_q(theta, q));
        fit.variance_components = Some(VarianceComponents {
            sigma2_u: theta * sigma2_e,
            sigma2_e,
        });
        Ok(fit)
    }

    fn optimize_theta(&self, opts: &LmmOptions) -> Result<f64> {
        let (lo, hi) = (opts.theta_min.ln(), opts.theta_max.ln());
        let f = |lt: f64| -> f64 {
            self.profile_log_likelihood(lt.exp())
                .ok()
                .filter(|v| v.is_finite())
                .unwrap_or(f64::NEG_INFINITY)
        };
        let k = opts.scan_points.max(3);
        let step = (hi - lo) / (k - 1) as f64;
        let scan: Vec<(f64, f64)> = (0..k)
            .map(|i| {
                let lt = if i == k - 1 { hi } else { lo + step * i as f64 };
                (lt, f(lt))
            })
            .collect();
        let best = scan
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .expect("non-empty scan");
        if scan[best].1 == f64::NEG_INFINITY {
            return Err(StatsError::NonConvergence("likelihood is not finite anywhere in the θ bracket".into()));
        }
        let mut a = scan[best.saturating_sub(1)].0;
        let mut b = scan[(best + 1).min(k - 1)].0;

        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        let mut iter = 0;
        while (b - a) > opts.rel_tol {
            iter += 1;
            if iter > opts.max_iter {
                return Err(StatsError::NonConvergence(format!(
                    "golden-section search did not narrow below {} in {} steps",
                    opts.rel_tol, opts.max_iter
                )));
            }
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        // the interior optimum competes with the best scanned point (boundaries included)
        let mid = 0.5 * (a + b);
        let cand = [(mid, f(mid)), scan[best]];
        let (lt, _) = cand
            .into_iter()
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("two candidates");
        Ok(lt.exp())
    }
}

/// Generic random-intercept fit.
pub fn fit_random_intercept(x: &DMatrix<f64>, y: &DVector<f64>, cluster: &[usize]) -> Result<FitResult> {
    ClusteredDesign::new(x, y, cluster)?.fit(&LmmOptions::default())
}

/// One daily observation for the VAS model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRecord {
    pub id: String,
    /// 1 for the intervention arm.
    pub group: f64,
    pub day: f64,
    pub y: f64,
}

pub const VAS_TERMS: [&str; 4] = ["intercept", "group", "day", "group_x_day"];

/// `y = β0 + β1·group + β2·day + β3·group·day + u_id + ε`.
pub fn vas_design(records: &[LongRecord]) -> Result<ClusteredDesign> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let next = ids.len();
        ids.entry(r.id.as_str()).or_insert(next);
    }
    let n = records.len();
    let x = DMatrix::from_fn(n, 4, |i, j| {
        let r = &records[i];
        match j {
            0 => 1.0,
            1 => r.group,
            2 => r.day,
            _ => r.group * r.day,
        }
    });
    let y = DVector::from_fn(n, |i, _| records[i].y);
    let cluster: Vec<usize> = records.iter().map(|r| ids[r.id.as_str()]).collect();
    ClusteredDesign::new(&x, &y, &cluster)
}

pub fn fit_lmm_random_intercept(records: &[LongRecord]) -> Result<FitResult> {
    Ok(vas_design(records)?.fit(&LmmOptions::default())?.named(&VAS_TERMS))
}
