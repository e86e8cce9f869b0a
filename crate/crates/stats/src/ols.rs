use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{normal_two_tailed, student_t_two_tailed};
use crate::error::{Result, StatsError};

/// How p-values were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Inference {
    StudentT { dof: f64 },
    /// Normal approximation to the Wald statistic.
    WaldZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Random-intercept variance.
    pub sigma2_u: f64,
    /// Residual variance.
    pub sigma2_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub test_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub inference: Inference,
    pub n: usize,
    /// Residual sum of squares (OLS) or the profiled quadratic form (LMM).
    pub rss: f64,
    pub log_likelihood: Option<f64>,
    pub variance_components: Option<VarianceComponents>,
}

impl FitResult {
    pub(crate) fn build(
        beta: &DVector<f64>,
        cov: &DMatrix<f64>,
        inference: Inference,
        n: usize,
        rss: f64,
    ) -> Self {
        let p = beta.len();
        let mut se = Vec::with_capacity(p);
        let mut stat = Vec::with_capacity(p);
        let mut pv = Vec::with_capacity(p);
        for j in 0..p {
            let s = cov[(j, j)].max(0.0).sqrt();
            let b = beta[j];
            // an exact fit has zero standard errors
            let t = if s > 0.0 {
                b / s
            } else if b == 0.0 {
                0.0
            } else {
                b.signum() * f64::INFINITY
            };
            let p_value = match inference {
                Inference::StudentT { dof } => student_t_two_tailed(t, dof),
                Inference::WaldZ => normal_two_tailed(t),
            };
            se.push(s);
            stat.push(t);
            pv.push(p_value);
        }
        FitResult {
            terms: (0..p).map(|j| format!("x{j}")).collect(),
            coefficients: beta.iter().copied().collect(),
            standard_errors: se,
            test_statistics: stat,
            p_values: pv,
            inference,
            n,
            rss,
            log_likelihood: None,
            variance_components: None,
        }
    }

    /// Renames the terms; `names` must have one entry per coefficient.
    pub fn named(mut self, names: &[&str]) -> Self {
        assert_eq!(names.len(), self.coefficients.len(), "one name per coefficient");
        self.terms = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn coefficient(&self, term: &str) -> Option<Coefficient> {
        let j = self.terms.iter().position(|t| t == term)?;
        Some(Coefficient {
            term: term.to_string(),
            estimate: self.coefficients[j],
            std_error: self.standard_errors[j],
            statistic: self.test_statistics[j],
            p_value: self.p_values[j],
        })
    }

    pub fn table(&self) -> Vec<Coefficient> {
        self.terms.iter().filter_map(|t| self.coefficient(t)).collect()
    }
}

/// Relative threshold on `|R_jj|` below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Checks full column rank via QR and returns `(R, Qᵀy)`.
pub(crate) fn qr_parts(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(StatsError::TooFewRows { n, p });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for j in 0..p {
        if r[(j, j)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(StatsError::RankDeficient { column: j });
        }
    }
    let qty = qr.q().transpose() * y;
    Ok((r, qty))
}

/// Ordinary least squares with t inference on `n − p` dof.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(StatsError::DegenerateData(format!("y has {} rows, X has {n}", y.len())));
    }
    let (r, qty) = qr_parts(x, y)?;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(StatsError::RankDeficient { column: p - 1 })?;
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    let dof = (n - p) as f64;
    let sigma2 = rss / dof;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(StatsError::RankDeficient { column: p - 1 })?;
    let cov = &r_inv * r_inv.transpose() * sigma2;
    Ok(FitResult::build(&beta, &cov, Inference::StudentT { dof }, n, rss))
}

/// `post = β0 + β1·group + β2·baseline + ε`; `group` is 1 for the
/// intervention arm and 0 otherwise.
pub fn ancova(post: &[f64], group: &[f64], baseline: &[f64]) -> Result<FitResult> {
    let n = post.len();
    if group.len() != n || baseline.len() != n {
        return Err(StatsError::DegenerateData("ANCOVA vectors differ in length".into()));
    }
    if n < 4 {
        return Err(StatsError::TooFewRows { n, p: 3 });
    }
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => group[i],
        _ => baseline[i],
    });
    Ok(ols_fit(&x, &DVector::from_column_slice(post))?.named(&["intercept", "group", "baseline"]))
}
