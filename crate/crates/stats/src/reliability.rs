use crate::error::{Result, StatsError};

/// Sample variance with the (n − 1) divisor.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Cronbach's alpha over a persons × items matrix.
///
/// Item and total variances both use the (n − 1) divisor.
pub fn cronbach_alpha(matrix: &[Vec<f64>]) -> Result<f64> {
    let n = matrix.len();
    let k = matrix.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(StatsError::DegenerateData(format!(
            "alpha needs at least 2 persons and 2 items, got {n} × {k}"
        )));
    }
    if matrix.iter().any(|row| row.len() != k) {
        return Err(StatsError::DegenerateData("ragged response matrix".into()));
    }
    let item_var: f64 = (0..k)
        .map(|j| sample_variance(&matrix.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = matrix.iter().map(|r| r.iter().sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(StatsError::DegenerateData("total score variance is zero".into()));
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_items_give_one() {
        let m: Vec<Vec<f64>> = [1.0, 3.0, 2.0, 5.0, 4.0].iter().map(|&x| vec![x, x]).collect();
        assert_eq!(cronbach_alpha(&m).unwrap(), 1.0);
    }

    #[test]
    fn constant_totals_are_degenerate() {
        let m = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(cronbach_alpha(&m), Err(StatsError::DegenerateData(_))));
    }
}
