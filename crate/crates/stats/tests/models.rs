mod oracle;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reverie_stats::lmm::ClusteredDesign;
use reverie_stats::simulate::{simulate_vas_lmm, VasModel};
use reverie_stats::{
    ancova, fit_lmm_random_intercept, fit_random_intercept, ols_fit, paired_t_test, student_t_cdf,
    two_sample_t_test, LmmOptions, LongRecord,
};

fn to_rows(x: &DMatrix<f64>) -> oracle::Matrix {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-3.0..3.0) });
    let y = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
    (x, y)
}

#[test]
fn t_cdf_matches_quadrature() {
    for dof in [1u32, 5, 30] {
        for i in 0..=48 {
            let x = -6.0 + 0.25 * f64::from(i);
            let want = oracle::t_cdf_by_quadrature(x, dof);
            let got = student_t_cdf(x, f64::from(dof));
            assert!((got - want).abs() < 1e-8, "dof {dof} x {x}: {got} vs {want}");
        }
    }
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let p = rng.random_range(2..=5);
        let n = rng.random_range(p + 2..=30);
        let (x, y) = random_design(&mut rng, n, p);
        let fit = ols_fit(&x, &y).unwrap();
        let want = oracle::normal_equations(&to_rows(&x), y.as_slice());
        for (a, b) in fit.coefficients.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn ols_residuals_are_orthogonal_to_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (x, y) = random_design(&mut rng, 40, 4);
    let fit = ols_fit(&x, &y).unwrap();
    let beta = DVector::from_vec(fit.coefficients.clone());
    let r = &y - &x * beta;
    let xtr = x.transpose() * &r;
    assert!(xtr.amax() < 1e-9, "{xtr}");
    assert!((r.norm_squared() - fit.rss).abs() < 1e-9);
}

#[test]
fn ancova_group_effect_ignores_baseline_shift() {
    let post = [25.0, 27.0, 24.0, 26.0, 29.0, 30.0, 28.0, 31.0];
    let group = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    let base = [28.0, 31.0, 27.0, 30.0, 29.0, 32.0, 28.0, 33.0];
    let a = ancova(&post, &group, &base).unwrap();
    let shifted: Vec<f64> = base.iter().map(|b| b + 100.0).collect();
    let b = ancova(&post, &group, &shifted).unwrap();
    for term in ["group", "baseline"] {
        let (ca, cb) = (a.coefficient(term).unwrap(), b.coefficient(term).unwrap());
        assert!((ca.estimate - cb.estimate).abs() < 1e-9);
        assert!((ca.p_value - cb.p_value).abs() < 1e-9);
    }
    let slope = a.coefficient("baseline").unwrap().estimate;
    let shift = a.coefficient("intercept").unwrap().estimate - b.coefficient("intercept").unwrap().estimate;
    assert!((shift - 100.0 * slope).abs() < 1e-7);
}

#[test]
fn t_tests_against_hand_values() {
    // differences 1, 2, 3, 4: mean 2.5, sd √(5/3), t = 2.5 / (sd / 2)
    let r = paired_t_test(&[0.0, 0.0, 0.0, 0.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!((r.t - 2.5 / ((5.0f64 / 3.0).sqrt() / 2.0)).abs() < 1e-12);
    assert_eq!(r.dof, 3.0);
    // equal variances and sizes: Welch dof is 2(n − 1)
    let w = two_sample_t_test(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
    assert!((w.dof - 4.0).abs() < 1e-12);
    assert!((w.t + 1.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
}

fn small_clustered(seed: u64) -> (DMatrix<f64>, DVector<f64>, Vec<usize>) {
    let recs = simulate_vas_lmm(
        &VasModel {
            persons_per_group: 3,
            days: 5,
            ..VasModel::default()
        },
        seed,
    );
    let x = DMatrix::from_fn(recs.len(), 4, |i, j| {
        let r = &recs[i];
        [1.0, r.group, r.day, r.group * r.day][j]
    });
    let y = DVector::from_fn(recs.len(), |i, _| recs[i].y);
    let cluster = recs.iter().map(|r| r.id[1..].parse().unwrap()).collect();
    (x, y, cluster)
}

#[test]
fn profile_likelihood_matches_dense_oracle() {
    for seed in 0..5 {
        let (x, y, cluster) = small_clustered(seed);
        let d = ClusteredDesign::new(&x, &y, &cluster).unwrap();
        for theta in [1e-6, 0.01, 0.3, 1.0, 7.5, 200.0] {
            let got = d.profile_log_likelihood(theta).unwrap();
            let want = oracle::dense_profile_loglik(&to_rows(&x), y.as_slice(), &cluster, theta);
            assert!((got - want).abs() < 1e-8, "θ {theta}: {got} vs {want}");
        }
    }
}

#[test]
fn optimum_beats_a_fine_theta_grid() {
    let opts = LmmOptions::default();
    for seed in 0..5 {
        let (x, y, cluster) = small_clustered(100 + seed);
        let d = ClusteredDesign::new(&x, &y, &cluster).unwrap();
        let best = d.fit(&opts).unwrap().log_likelihood.unwrap();
        let (lo, hi) = (opts.theta_min.ln(), opts.theta_max.ln());
        let grid_max = (0..1000)
            .map(|i| d.profile_log_likelihood((lo + (hi - lo) * f64::from(i) / 999.0).exp()).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best >= grid_max - 1e-6, "seed {seed}: {best} < {grid_max}");
    }
}

#[test]
fn lmm_without_cluster_variance_is_ols() {
    // balanced clusters and θ → 0: GLS collapses to OLS
    let recs = simulate_vas_lmm(
        &VasModel {
            sigma_u: 0.0,
            ..VasModel::default()
        },
        9,
    );
    let lmm = fit_lmm_random_intercept(&recs).unwrap();
    let x = DMatrix::from_fn(recs.len(), 4, |i, j| {
        let r = &recs[i];
        [1.0, r.group, r.day, r.group * r.day][j]
    });
    let y = DVector::from_fn(recs.len(), |i, _| recs[i].y);
    let ols = ols_fit(&x, &y).unwrap();
    for (a, b) in lmm.coefficients.iter().zip(&ols.coefficients) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn lmm_recovers_the_generating_interaction() {
    let recs = simulate_vas_lmm(&VasModel::default(), 1);
    let fit = fit_lmm_random_intercept(&recs).unwrap();
    let b3 = fit.coefficient("group_x_day").unwrap();
    assert!((b3.estimate + 0.12).abs() < 3.0 * b3.std_error);
    assert!(b3.p_value < 0.05);
    let vc = fit.variance_components.unwrap();
    assert!(vc.sigma2_u > 0.0 && vc.sigma2_e > 0.0);
}

#[test]
fn lmm_errors() {
    let one = vec![
        LongRecord { id: "a".into(), group: 1.0, day: 1.0, y: 1.0 },
        LongRecord { id: "a".into(), group: 1.0, day: 2.0, y: 2.0 },
    ];
    assert!(fit_lmm_random_intercept(&one).is_err());
    let x = DMatrix::from_element(6, 1, 1.0);
    let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(fit_random_intercept(&x, &y, &[0, 0, 0, 0, 0, 0]).is_err());
    assert!(fit_random_intercept(&x, &y, &[0, 0, 0, 1, 1, 1]).is_ok());
}
