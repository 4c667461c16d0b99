use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use stochdiag_core::data::ReplicatedDataset;
use stochdiag_core::design::{expand_replicates, maximin_lhs};
use stochdiag_core::emulator::{
    fit_hetgp, fit_homgp, marginal_log_likelihood, CovarianceSpec, FittedEmulator, FittedHomGP,
    GpFitConfig, MeanSpec,
};
use stochdiag_core::simulators::{toy_normal_run, toy_trend};
use stochdiag_core::RngStream;

fn col(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

fn fixed(x: &[f64], y: &[f64], ls: f64, sf2: f64, nugget: f64, mean: MeanSpec) -> FittedEmulator {
    let data = ReplicatedDataset::from_runs(&col(x), y, 0.0).unwrap();
    let cov = CovarianceSpec::squared_exponential(vec![ls], sf2).unwrap();
    FittedHomGP::new(&data, mean, cov, nugget).unwrap().into()
}

fn dense_ll(x: &DMatrix<f64>, y: &[f64], cov: &CovarianceSpec, nugget: f64, mean: f64) -> f64 {
    let n = y.len();
    let mut k = cov.gram(x);
    for i in 0..n {
        k[(i, i)] += nugget;
    }
    let r = DVector::from_iterator(n, y.iter().map(|v| v - mean));
    let quad = (r.transpose() * k.clone().try_inverse().unwrap() * &r)[(0, 0)];
    -0.5 * quad - 0.5 * k.determinant().ln() - 0.5 * n as f64 * (2.0 * PI).ln()
}

#[test]
fn interpolates_noiseless_data() {
    let x: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let y: Vec<f64> = x.iter().map(|&v| toy_trend(v)).collect();
    let m = fixed(&x, &y, 0.15, 4.0, 0.0, MeanSpec::Zero);
    let p = m.predict(&col(&x)).unwrap();
    for (pi, yi) in p.iter().zip(&y) {
        assert!((pi.mean - yi).abs() < 1e-6, "{} vs {}", pi.mean, yi);
        assert!(pi.mean_variance <= 1e-6);
    }
}

#[test]
fn single_point_closed_form() {
    let (s, g, y1, ls) = (2.0, 0.3, 1.7, 0.4);
    let m = fixed(&[0.2], &[y1], ls, s, g, MeanSpec::Zero);
    for xs in [0.2, 0.35, 0.9] {
        let k = s * (-0.5 * ((xs - 0.2) / ls).powi(2)).exp();
        let p = m.predict(&col(&[xs])).unwrap()[0];
        assert!((p.mean - k * y1 / (s + g)).abs() < 1e-12);
        assert!((p.mean_variance - (s - k * k / (s + g))).abs() < 1e-12);
        assert_eq!(p.intrinsic_variance, g);
    }
}

#[test]
fn reverts_to_prior_far_away() {
    let m = fixed(
        &[0.1, 0.2, 0.3],
        &[5.0, 6.0, 4.0],
        0.1,
        1.5,
        0.01,
        MeanSpec::Constant(2.0),
    );
    let p = m.predict(&col(&[50.0])).unwrap()[0];
    assert!((p.mean - 2.0).abs() < 1e-3);
    assert!((p.mean_variance - 1.5).abs() < 1e-3);
}

#[test]
fn dimension_mismatch_is_domain_error() {
    let m = fixed(&[0.1, 0.2], &[1.0, 2.0], 0.3, 1.0, 0.1, MeanSpec::Zero);
    assert!(m.predict(&DMatrix::zeros(1, 2)).is_err());
    assert!(m.joint_predict(&DMatrix::zeros(1, 2)).is_err());
}

#[test]
fn joint_prediction_properties() {
    let m = fixed(
        &[0.1, 0.4, 0.8],
        &[1.0, -1.0, 0.5],
        0.2,
        1.0,
        0.05,
        MeanSpec::Zero,
    );
    let one = m.joint_predict(&col(&[0.6])).unwrap();
    let p = m.predict(&col(&[0.6])).unwrap()[0];
    assert_eq!(one.covariance.shape(), (1, 1));
    assert!((one.covariance[(0, 0)] - p.mean_variance).abs() < 1e-12);

    let two = m.joint_predict(&col(&[0.6, 0.6])).unwrap();
    let c = &two.covariance;
    let corr = c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt();
    assert!((corr - 1.0).abs() < 1e-8);

    let mut rng = RngStream::new(17, 0);
    for _ in 0..10 {
        let xs: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let j = m.joint_predict(&col(&xs)).unwrap();
        assert_eq!(j.covariance, j.covariance.transpose());
        let min_eig = SymmetricEigen::new(j.covariance.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig >= -1e-8);
        let p = m.predict(&col(&xs)).unwrap();
        for (i, pi) in p.iter().enumerate() {
            assert!((j.covariance[(i, i)] - pi.mean_variance).abs() < 1e-10);
            assert!((j.mean[i] - pi.mean).abs() < 1e-10);
        }
    }
}

#[test]
fn variance_bounded_by_prior_and_monotone_in_duplicates() {
    let mut rng = RngStream::new(3, 0);
    for _ in 0..20 {
        let n = 2 + (rng.random::<f64>() * 6.0) as usize;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let sf2 = 0.5 + rng.random::<f64>();
        let base = fixed(&x, &y, 0.2, sf2, 0.1, MeanSpec::Zero);
        let k = (rng.random::<f64>() * n as f64) as usize % n;
        let mut x2 = x.clone();
        let mut y2 = y.clone();
        x2.push(x[k]);
        y2.push(y[k]);
        let dup = fixed(&x2, &y2, 0.2, sf2, 0.1, MeanSpec::Zero);
        let grid: Vec<f64> = (0..41).map(|i| -0.5 + i as f64 / 20.0).collect();
        let pb = base.predict(&col(&grid)).unwrap();
        let pd = dup.predict(&col(&grid)).unwrap();
        for (a, b) in pb.iter().zip(&pd) {
            assert!(a.mean_variance <= sf2 + 1e-8);
            assert!(b.mean_variance <= a.mean_variance + 1e-8);
        }
    }
}

#[test]
fn mean_function_draws() {
    let m = fixed(
        &[0.1, 0.5, 0.9],
        &[0.0, 1.0, 0.5],
        0.3,
        1.0,
        0.2,
        MeanSpec::Zero,
    );
    let xs = col(&[0.7]);
    let v = m.predict(&xs).unwrap()[0];
    let draws = m
        .sample_mean_function(&xs, 100_000, &mut RngStream::new(5, 1))
        .unwrap();
    let vals: Vec<f64> = draws.column(0).iter().copied().collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    assert!((var / v.mean_variance - 1.0).abs() < 0.05);
    assert!((mean - v.mean).abs() < 0.01);

    let again = m
        .sample_mean_function(&xs, 10, &mut RngStream::new(5, 1))
        .unwrap();
    assert_eq!(again.rows(0, 10), draws.rows(0, 10));

    // dense noiseless data: V ≈ 0, draws collapse onto M
    let x: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
    let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
    let tight = fixed(&x, &y, 0.5, 1.0, 0.0, MeanSpec::Zero);
    let xs = col(&[0.25, 0.5]);
    let p = tight.predict(&xs).unwrap();
    let d = tight
        .sample_mean_function(&xs, 50, &mut RngStream::new(1, 0))
        .unwrap();
    for r in 0..50 {
        for c in 0..2 {
            assert!((d[(r, c)] - p[c].mean).abs() < 1e-3);
        }
    }
}

#[test]
fn likelihood_closed_form_and_oracle() {
    let data = ReplicatedDataset::from_runs(&col(&[0.3]), &[1.2], 0.0).unwrap();
    let cov = CovarianceSpec::squared_exponential(vec![0.5], 2.0).unwrap();
    let ll = marginal_log_likelihood(&data, MeanSpec::Zero, &cov, 0.5).unwrap();
    let v: f64 = 2.5;
    let expect = -0.5 * (1.2f64.powi(2) / v + v.ln() + (2.0 * PI).ln());
    assert!((ll - expect).abs() < 1e-12);

    let mut rng = RngStream::new(9, 0);
    let xr: Vec<f64> = (0..12)
        .map(|i| [0.1, 0.4, 0.4, 0.7][i % 4] + (i / 8) as f64 * 0.05)
        .collect();
    let yr: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 2.0).collect();
    let cov = CovarianceSpec::squared_exponential(vec![0.25], 1.3).unwrap();
    let data = ReplicatedDataset::from_runs(&col(&xr), &yr, 0.0).unwrap();
    let fast = marginal_log_likelihood(&data, MeanSpec::Constant(0.7), &cov, 0.15).unwrap();
    let dense = dense_ll(&col(&xr), &yr, &cov, 0.15, 0.7);
    assert!((fast - dense).abs() < 1e-8, "{fast} vs {dense}");

    let perm: Vec<usize> = vec![5, 2, 11, 0, 7, 3, 9, 1, 10, 4, 8, 6];
    let xp: Vec<f64> = perm.iter().map(|&i| xr[i]).collect();
    let yp: Vec<f64> = perm.iter().map(|&i| yr[i]).collect();
    let data = ReplicatedDataset::from_runs(&col(&xp), &yp, 0.0).unwrap();
    let permuted = marginal_log_likelihood(&data, MeanSpec::Constant(0.7), &cov, 0.15).unwrap();
    assert!((permuted - fast).abs() < 1e-9);
}

fn replicated_toy(
    seed: u64,
    noise: impl Fn(f64, &mut RngStream) -> f64,
) -> (DMatrix<f64>, Vec<f64>) {
    let base = RngStream::new(seed, 0);
    let design = maximin_lhs(20, 1, &base.substream(1), 100)
        .unwrap()
        .with_uniform_replicates(20)
        .unwrap();
    let x = expand_replicates(&design);
    let mut rng = base.substream(2);
    let y = (0..x.nrows()).map(|i| noise(x[(i, 0)], &mut rng)).collect();
    (x, y)
}

#[test]
fn homoscedastic_fit_recovers_nugget() {
    let mut hits = 0;
    for seed in 0..10 {
        let (x, y) = replicated_toy(seed, |x, rng| {
            toy_trend(x) + Normal::new(0.0, 0.5).unwrap().sample(rng)
        });
        let m = fit_homgp(&x, &y, &GpFitConfig::default(), &RngStream::new(seed, 7)).unwrap();
        if (0.15..=0.4).contains(&m.nugget()) {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn heteroscedastic_fit_recovers_rising_noise() {
    let mut hits = 0;
    for seed in 0..10 {
        let (x, y) = replicated_toy(seed, |x, rng| toy_normal_run(x, rng).unwrap());
        let m: FittedEmulator =
            fit_hetgp(&x, &y, &GpFitConfig::default(), &RngStream::new(seed, 7))
                .unwrap()
                .into();
        let s = m.intrinsic_variance(&col(&[0.1, 0.9])).unwrap();
        if s[1].sqrt() > s[0].sqrt() {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn heteroscedastic_fit_on_constant_noise_is_flat() {
    let mut hits = 0;
    let grid = col(&(0..51).map(|i| i as f64 / 50.0).collect::<Vec<_>>());
    for seed in 0..10 {
        let (x, y) = replicated_toy(100 + seed, |x, rng| {
            toy_trend(x) + Normal::new(0.0, 0.5).unwrap().sample(rng)
        });
        let m = fit_hetgp(&x, &y, &GpFitConfig::default(), &RngStream::new(seed, 7)).unwrap();
        let s = m.intrinsic_variance(&grid).unwrap();
        let hi = s.iter().copied().fold(0.0, f64::max);
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.0);
        if hi / lo < 3.0 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn fits_are_deterministic_and_round_trip() {
    let (x, y) = replicated_toy(4, |x, rng| toy_normal_run(x, rng).unwrap());
    let cfg = GpFitConfig::default();
    let a: FittedEmulator = fit_hetgp(&x, &y, &cfg, &RngStream::new(1, 2))
        .unwrap()
        .into();
    let b: FittedEmulator = fit_hetgp(&x, &y, &cfg, &RngStream::new(1, 2))
        .unwrap()
        .into();
    let ja = a.to_json().unwrap();
    assert_eq!(ja, b.to_json().unwrap());

    let loaded = FittedEmulator::from_json(&ja).unwrap();
    let grid = col(&[0.0, 0.33, 0.71, 1.0]);
    assert_eq!(a.predict(&grid).unwrap(), loaded.predict(&grid).unwrap());
    assert_eq!(loaded.to_json().unwrap(), ja);

    let h: FittedEmulator = fit_homgp(&x, &y, &cfg, &RngStream::new(1, 2))
        .unwrap()
        .into();
    let hl = FittedEmulator::from_json(&h.to_json().unwrap()).unwrap();
    assert_eq!(h.predict(&grid).unwrap(), hl.predict(&grid).unwrap());

    let bad = ja.replace("\"version\": 1", "\"version\": 99");
    assert!(FittedEmulator::from_json(&bad).is_err());
}

#[test]
fn heteroscedastic_fit_without_replication() {
    let x: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
    let mut rng = RngStream::new(8, 0);
    let y: Vec<f64> = x
        .iter()
        .map(|&v| toy_normal_run(v, &mut rng).unwrap())
        .collect();
    let m = fit_hetgp(&col(&x), &y, &GpFitConfig::default(), &RngStream::new(2, 0)).unwrap();
    assert!(m.training_variances().iter().all(|&v| v > 0.0));
    let s = m.intrinsic_variance(&col(&[0.5])).unwrap();
    assert!(s[0] > 0.0 && s[0].is_finite());
}

#[test]
fn rejects_bad_training_input() {
    let cfg = GpFitConfig::default();
    assert!(fit_homgp(&col(&[0.1]), &[1.0], &cfg, &RngStream::new(0, 0)).is_err());
    assert!(fit_homgp(&col(&[0.1, 0.2]), &[1.0], &cfg, &RngStream::new(0, 0)).is_err());
}

#[test]
fn constant_outputs_warn() {
    let x = col(&[0.1, 0.1, 0.5, 0.5]);
    let m = fit_homgp(
        &x,
        &[2.0; 4],
        &GpFitConfig::default(),
        &RngStream::new(0, 0),
    )
    .unwrap();
    assert!(!m.warnings.is_empty());
    let p = FittedEmulator::from(m).predict(&col(&[0.1])).unwrap()[0];
    assert!((p.mean - 2.0).abs() < 1e-6);
}
