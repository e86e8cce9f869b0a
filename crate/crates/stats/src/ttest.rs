use serde::{Deserialize, Serialize};

use crate::dist::student_t_two_tailed;
use crate::error::{Result, StatsError};
use crate::reliability::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    /// `mean(post − pre)` for paired tests, `mean(a) − mean(b)` for two-sample.
    pub mean_difference: f64,
}

/// Paired t-test on `post − pre`, two-tailed.
pub fn paired_t_test(pre: &[f64], post: &[f64]) -> Result<TTestResult> {
    if pre.len() != post.len() {
        return Err(StatsError::DegenerateData(format!(
            "paired samples differ in length ({} vs {})",
            pre.len(),
            post.len()
        )));
    }
    if pre.len() < 2 {
        return Err(StatsError::DegenerateData("paired test needs n ≥ 2".into()));
    }
    let d: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    let var = sample_variance(&d);
    if var == 0.0 {
        return Err(StatsError::DegenerateData("differences have zero variance".into()));
    }
    let n = d.len() as f64;
    let md = mean(&d);
    let t = md / (var / n).sqrt();
    let dof = n - 1.0;
    Ok(TTestResult {
        t,
        dof,
        p: student_t_two_tailed(t, dof),
        mean_difference: md,
    })
}

/// Welch's two-sample t-test with Welch–Satterthwaite dof, two-tailed.
pub fn two_sample_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::DegenerateData("each sample needs n ≥ 2".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(StatsError::DegenerateData("both samples are constant".into()));
    }
    let md = mean(a) - mean(b);
    let t = md / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTestResult {
        t,
        dof,
        p: student_t_two_tailed(t, dof),
        mean_difference: md,
    })
}
