//! Student t and normal tail probabilities.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

/// `P(T ≤ x)` for Student's t with `dof > 0` (non-integer allowed).
///
/// Uses `I_{ν/(ν+x²)}(ν/2, 1/2)`, which is the two-tailed mass beyond `|x|`,
/// so both tails come from the same number and symmetry is exact up to one
/// rounding.
pub fn student_t_cdf(x: f64, dof: f64) -> f64 {
    assert!(dof > 0.0, "dof must be positive");
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.5;
    }
    let tail = student_t_two_tailed(x, dof) / 2.0;
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-tailed p-value `P(|T| ≥ |t|)`.
pub fn student_t_two_tailed(t: f64, dof: f64) -> f64 {
    assert!(dof > 0.0, "dof must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    beta_reg(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Two-tailed p-value for a standard normal statistic.
pub fn normal_two_tailed(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}
