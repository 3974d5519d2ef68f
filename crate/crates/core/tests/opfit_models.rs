use std::f64::consts::PI;

use num_complex::Complex64;
use oplab_core::numerics::{gaussian_vector, svd_dense, DenseMatrix, RngStream};
use oplab_core::opfit::{
    compute_loss, evaluate_super_resolution, fit_fourier_multiplier, fit_green_kernel, fit_low_rank, green_objective,
    hierarchical_decompose, kernel_l2_norm, low_rank_truncate, materialize, predict, predict_dataset, truncate_band,
    DenseKernel, FitError, KernelModel, LossKind,
};
use oplab_core::pdelab::{green_poisson_1d, make_dataset, DatasetRequest, OperatorDataset, Pde};
use oplab_core::probes::{kl_decompose, CovarianceSpec};
use oplab_core::recovery::recover_circulant;
use oplab_core::sample::{FunctionSample, Grid};
use oplab_core::structured::MatvecOracle;
use proptest::prelude::*;

fn interval_dataset(inputs: Vec<FunctionSample>, outputs: Vec<FunctionSample>) -> OperatorDataset {
    let m = inputs[0].len();
    let mut ds = make_dataset(
        &DatasetRequest {
            pde: Pde::Poisson1d,
            covariance: CovarianceSpec::squared_exponential(0.1),
            pairs: 0,
            resolution: m,
            max_modes: None,
        },
        &RngStream::new(0),
    )
    .unwrap();
    ds.provenance.pairs = inputs.len();
    ds.inputs = inputs;
    ds.outputs = outputs;
    ds.validate().unwrap();
    ds
}

fn periodic_request(pde: Pde, pairs: usize, resolution: usize, max_modes: Option<usize>) -> DatasetRequest {
    DatasetRequest {
        pde,
        covariance: CovarianceSpec::helmholtz_power(1.0, 2.0, 1.0, 2.0 * PI),
        pairs,
        resolution,
        max_modes,
    }
}

fn apply_quadrature(kernel: &DenseMatrix<f64>, f: &FunctionSample) -> FunctionSample {
    let wf: Vec<f64> = f.values.iter().zip(f.grid.weights()).map(|(v, w)| v * w).collect();
    FunctionSample::new(f.grid.clone(), kernel.matvec(&wf).unwrap()).unwrap()
}

fn exact_green(m: usize) -> DenseKernel {
    let grid = Grid::unit_interval(m);
    let x = grid.axis();
    DenseKernel {
        kernel: DenseMatrix::from_fn(m, m, |i, j| green_poisson_1d(x[i], x[j]).unwrap()),
        grid,
    }
}

fn white_noise(m: usize, count: usize, seed: u64) -> Vec<FunctionSample> {
    let stream = RngStream::new(seed);
    (0..count)
        .map(|i| FunctionSample::new(Grid::unit_interval(m), gaussian_vector(&mut stream.derive(i as u64), m)).unwrap())
        .collect()
}

fn dense(model: &KernelModel) -> &DenseKernel {
    match model {
        KernelModel::Dense(k) => k,
        other => panic!("expected a dense kernel, got {other}"),
    }
}

fn relative_kernel_error(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>, grid: &Grid) -> f64 {
    kernel_l2_norm(&a.sub(b).unwrap(), grid) / kernel_l2_norm(b, grid)
}

#[test]
fn planted_dense_kernel_is_recovered() {
    let m = 32;
    let planted = DenseMatrix::from_row_major(m, m, gaussian_vector(&mut RngStream::new(1), m * m)).unwrap();
    let inputs = white_noise(m, 2 * m, 2);
    let outputs = inputs.iter().map(|f| apply_quadrature(&planted, f)).collect();
    let fit = fit_green_kernel(&interval_dataset(inputs, outputs), Some(1e-10)).unwrap();
    assert_eq!(fit.effective_rank, m);
    let err = relative_kernel_error(&dense(&fit.model).kernel, &planted, &Grid::unit_interval(m));
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn single_pair_is_interpolated() {
    let basis = kl_decompose(&CovarianceSpec::squared_exponential(0.1), 50).unwrap();
    let mut coeffs = vec![0.0; basis.truncation()];
    coeffs[0] = 1.0;
    let f = basis.sample_with_coefficients(&coeffs).unwrap();
    let u = apply_quadrature(&exact_green(50).kernel, &f);
    let ds = interval_dataset(vec![f.clone()], vec![u.clone()]);
    let fit = fit_green_kernel(&ds, None).unwrap();
    assert_eq!(fit.effective_rank, 1);
    let pred = predict(&fit.model, &f).unwrap();
    let err = pred
        .values
        .iter()
        .zip(&u.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-8 * u.max_abs(), "{err:e}");
}

#[test]
fn poisson_green_function_is_learned_from_smooth_sources() {
    let request = DatasetRequest {
        pde: Pde::Poisson1d,
        covariance: CovarianceSpec::squared_exponential(0.05),
        pairs: 150,
        resolution: 100,
        max_modes: None,
    };
    let all = make_dataset(&request, &RngStream::new(2024)).unwrap();
    let (train, test) = all.split_at(100);
    let fit = fit_green_kernel(&train, None).unwrap();
    let exact = exact_green(100);
    let err = relative_kernel_error(&dense(&fit.model).kernel, &exact.kernel, &exact.grid);
    assert!(err <= 0.10, "kernel error {err}");
    let predictions = predict_dataset(&fit.model, &test).unwrap();
    let loss = compute_loss(LossKind::RelativeL2, &predictions, &test.outputs).unwrap();
    assert!(loss <= 0.02, "held-out relative L2 {loss}");
}

#[test]
fn ridge_solution_minimizes_the_objective() {
    let request = DatasetRequest {
        pde: Pde::Poisson1d,
        covariance: CovarianceSpec::squared_exponential(0.1),
        pairs: 20,
        resolution: 24,
        max_modes: None,
    };
    let ds = make_dataset(&request, &RngStream::new(5)).unwrap();
    let ridge = 1e-4;
    let fit = fit_green_kernel(&ds, Some(ridge)).unwrap();
    let g = &dense(&fit.model).kernel;
    let best = green_objective(g, &ds, ridge).unwrap();
    let stream = RngStream::new(6);
    for k in 0..20 {
        let noise: Vec<f64> = gaussian_vector(&mut stream.derive(k), 24 * 24);
        let scale = 1e-3 * g.max_abs();
        let perturbed = DenseMatrix::from_fn(24, 24, |i, j| g[(i, j)] + scale * noise[i * 24 + j]);
        assert!(green_objective(&perturbed, &ds, ridge).unwrap() > best);
    }
}

#[test]
fn zero_targets_are_excluded() {
    let inputs = white_noise(16, 20, 3);
    let mut outputs: Vec<FunctionSample> = inputs
        .iter()
        .map(|f| apply_quadrature(&exact_green(16).kernel, f))
        .collect();
    outputs[4] = FunctionSample::zeros(Grid::unit_interval(16));
    let fit = fit_green_kernel(&interval_dataset(inputs, outputs), None).unwrap();
    assert_eq!(fit.excluded, vec![4]);
}

#[test]
fn full_rank_truncation_equals_dense_fit() {
    let request = DatasetRequest {
        pde: Pde::Poisson1d,
        covariance: CovarianceSpec::squared_exponential(0.1),
        pairs: 30,
        resolution: 40,
        max_modes: None,
    };
    let ds = make_dataset(&request, &RngStream::new(9)).unwrap();
    let dense_model = fit_green_kernel(&ds, None).unwrap().model;
    let low = fit_low_rank(&ds, 40, None).unwrap();
    for f in &ds.inputs[..5] {
        let a = predict(&dense_model, f).unwrap();
        let b = predict(&low, f).unwrap();
        let scale = a.max_abs();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12 * scale.max(1.0));
        }
    }
    assert!(matches!(
        fit_low_rank(&ds, 41, None),
        Err(FitError::RankTooLarge { rank: 41, size: 40 })
    ));
}

#[test]
fn rank_one_kernel_survives_rank_one_truncation() {
    let m = 24;
    let grid = Grid::unit_interval(m);
    let x = grid.axis();
    let planted = DenseMatrix::from_fn(m, m, |i, j| (PI * x[i]).sin() * (1.0 + x[j] * x[j]));
    let inputs = white_noise(m, 2 * m, 4);
    let outputs = inputs.iter().map(|f| apply_quadrature(&planted, f)).collect();
    let model = fit_low_rank(&interval_dataset(inputs, outputs), 1, Some(1e-12)).unwrap();
    let err = relative_kernel_error(&model.kernel_matrix().unwrap(), &planted, &grid);
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn poisson_singular_values_decay_quadratically() {
    let exact = exact_green(201);
    let sqrt_w: Vec<f64> = exact.grid.weights().iter().map(|w| w.sqrt()).collect();
    let weighted = DenseMatrix::from_fn(201, 201, |i, j| sqrt_w[i] * exact.kernel[(i, j)] * sqrt_w[j]);
    let sigma = svd_dense(&weighted).unwrap().singular_values;
    for n in 1..=10 {
        // Continuous eigenvalues of the Dirichlet Laplacian inverse: 1/(π n)².
        let continuous = 1.0 / (PI * n as f64).powi(2);
        assert!((sigma[n - 1] / continuous - 1.0).abs() <= 0.01, "σ_{n}");
    }
    for p in [2, 4, 8, 16] {
        let truncated = low_rank_truncate(&exact, p).unwrap();
        let g_p = KernelModel::LowRank(truncated).kernel_matrix().unwrap();
        let err = kernel_l2_norm(&exact.kernel.sub(&g_p).unwrap(), &exact.grid);
        let tail = sigma[p..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((err - tail).abs() <= 1e-10, "p = {p}: {err:e} vs {tail:e}");
    }
}

fn fourier_model(model: &KernelModel) -> &oplab_core::opfit::FourierMultiplier {
    match model {
        KernelModel::FourierMultiplier(fm) => fm,
        other => panic!("expected a fourier multiplier, got {other}"),
    }
}

#[test]
fn shifted_poisson_multiplier_is_one_over_one_plus_j_squared() {
    let ds = make_dataset(
        &periodic_request(Pde::ScreenedPoisson1d { shift: 1.0 }, 20, 64, None),
        &RngStream::new(3),
    )
    .unwrap();
    let model = fit_fourier_multiplier(&ds, 16, 0.0).unwrap();
    let fm = fourier_model(&model);
    assert!(fm.unexcited.is_empty());
    for j in -16i64..=16 {
        let expected = 1.0 / (1.0 + (j * j) as f64);
        assert!(
            (fm.coefficient(j) - Complex64::new(expected, 0.0)).norm() <= 1e-6,
            "mode {j}"
        );
    }
    assert!((fm.coefficient(1).re - 0.5).abs() <= 1e-12 && (fm.coefficient(2).re - 0.2).abs() <= 1e-12);
}

#[test]
fn identity_data_gives_unit_multiplier() {
    let mut ds = make_dataset(
        &periodic_request(Pde::ScreenedPoisson1d { shift: 1.0 }, 5, 32, Some(21)),
        &RngStream::new(8),
    )
    .unwrap();
    ds.outputs = ds.inputs.clone();
    let fm = fit_fourier_multiplier(&ds, 10, 0.0).unwrap();
    for j in -10i64..=10 {
        assert!((fourier_model(&fm).coefficient(j) - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
    }
    for f in &ds.inputs {
        let u = predict(&fm, f).unwrap();
        for (a, b) in u.values.iter().zip(&f.values) {
            assert!((a - b).abs() <= 1e-8);
        }
    }
}

/// Planted multiplier applied by a direct O(s²) DFT.
fn apply_planted(r: &[Complex64], k_max: usize, f: &FunctionSample) -> FunctionSample {
    let s = f.len();
    let coeff = |j: i64| -> Complex64 {
        f.values
            .iter()
            .enumerate()
            .map(|(n, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * n as i64) as f64 / s as f64))
            .sum::<Complex64>()
            / s as f64
    };
    let hat: Vec<Complex64> = (-(k_max as i64)..=k_max as i64)
        .map(|j| r[(j + k_max as i64) as usize] * coeff(j))
        .collect();
    let values = (0..s)
        .map(|n| {
            hat.iter()
                .enumerate()
                .map(|(idx, c)| {
                    let j = idx as i64 - k_max as i64;
                    (c * Complex64::from_polar(1.0, 2.0 * PI * (j * n as i64) as f64 / s as f64)).re
                })
                .sum()
        })
        .collect();
    FunctionSample::new(f.grid.clone(), values).unwrap()
}

fn random_multiplier(k_max: usize, seed: u64) -> Vec<Complex64> {
    let g = gaussian_vector(&mut RngStream::new(seed), 2 * k_max + 2);
    let positive: Vec<Complex64> = (0..=k_max)
        .map(|j| {
            if j == 0 {
                Complex64::new(g[0], 0.0)
            } else {
                Complex64::new(g[2 * j], g[2 * j + 1])
            }
        })
        .collect();
    (-(k_max as i64)..=k_max as i64)
        .map(|j| {
            let r = positive[j.unsigned_abs() as usize];
            if j < 0 {
                r.conj()
            } else {
                r
            }
        })
        .collect()
}

#[test]
fn planted_multiplier_is_recovered() {
    let k_max = 12;
    let planted = random_multiplier(k_max, 17);
    let mut ds = make_dataset(
        &periodic_request(Pde::ScreenedPoisson1d { shift: 1.0 }, 50, 64, None),
        &RngStream::new(4),
    )
    .unwrap();
    ds.outputs = ds.inputs.iter().map(|f| apply_planted(&planted, k_max, f)).collect();
    let model = fit_fourier_multiplier(&ds, k_max, 0.0).unwrap();
    let fm = fourier_model(&model);
    for (a, b) in fm.multiplier.iter().zip(&planted) {
        assert!((a - b).norm() <= 1e-8);
    }
}

#[test]
fn unexcited_modes_are_flagged() {
    let grid = Grid::Periodic {
        length: 2.0 * PI,
        points: 32,
    };
    let mut ds = make_dataset(
        &periodic_request(Pde::ScreenedPoisson1d { shift: 1.0 }, 2, 32, None),
        &RngStream::new(1),
    )
    .unwrap();
    ds.inputs = vec![
        FunctionSample::from_fn_1d(grid.clone(), |x| 1.0 + x.cos()).unwrap(),
        FunctionSample::from_fn_1d(grid, |x| (3.0 * x).sin()).unwrap(),
    ];
    ds.outputs = ds.inputs.clone();
    let fm = fit_fourier_multiplier(&ds, 4, 0.0).unwrap();
    assert_eq!(fourier_model(&fm).unexcited, vec![2, 4]);
    assert_eq!(fourier_model(&fm).coefficient(2), Complex64::new(0.0, 0.0));
    assert!(fit_fourier_multiplier(&ds, 16, 0.0).is_err());
}

#[test]
fn materialized_multiplier_is_circulant() {
    let ds = make_dataset(
        &periodic_request(Pde::ScreenedPoisson1d { shift: 1.0 }, 20, 64, None),
        &RngStream::new(3),
    )
    .unwrap();
    let model = fit_fourier_multiplier(&ds, 16, 0.0).unwrap();
    let matrix = materialize(&model).unwrap();
    let oracle = MatvecOracle::new(matrix.clone());
    let report = recover_circulant(&oracle, &mut RngStream::new(10))
        .unwrap()
        .with_reference(&matrix);
    assert_eq!(report.forward_queries, 1);
    assert!(report.residual_frobenius_relative.unwrap() <= 1e-8);
}

#[test]
fn super_resolution_error_is_flat_for_the_exact_model() {
    let k_max = 16;
    let planted = random_multiplier(k_max, 23);
    let request = |s| periodic_request(Pde::ScreenedPoisson1d { shift: 1.0 }, 10, s, Some(64));
    let with_planted_outputs = |s| {
        let mut ds = make_dataset(&request(s), &RngStream::new(31)).unwrap();
        ds.outputs = ds.inputs.iter().map(|f| apply_planted(&planted, k_max, f)).collect();
        ds
    };
    let train = with_planted_outputs(256);
    let model = fit_fourier_multiplier(&train, k_max, 0.0).unwrap();
    let tests: Vec<OperatorDataset> = [256, 512].iter().map(|&s| with_planted_outputs(s)).collect();
    let table = evaluate_super_resolution(&model, &tests).unwrap();
    for row in &table {
        assert!((row.relative_l2 - table[0].relative_l2).abs() <= 1e-8, "{table:?}");
    }
    let coarse = make_dataset(&request(128), &RngStream::new(31)).unwrap();
    assert!(matches!(
        evaluate_super_resolution(&model, &[coarse]),
        Err(FitError::ResolutionBelowTraining {
            resolution: 128,
            training: 256
        })
    ));
}

/// `(∫∫_{|x−y|>r} G² dx dy)^{1/2}` by the tensor trapezoid rule on `n` nodes, summed directly.
fn band_tail_oracle(n: usize, r: f64) -> f64 {
    let grid = Grid::unit_interval(n);
    let x = grid.axis();
    let w = grid.weights();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if (x[i] - x[j]).abs() > r {
                sum += w[i] * w[j] * green_poisson_1d(x[i], x[j]).unwrap().powi(2);
            }
        }
    }
    sum.sqrt()
}

#[test]
fn band_truncation_error_is_monotone_and_matches_fine_quadrature() {
    let exact = exact_green(401);
    let radii = [0.05, 0.1, 2f64.sqrt() / 10.0, 0.2, 0.5, 1.0];
    let errors: Vec<f64> = radii
        .iter()
        .map(|&r| truncate_band(&exact, r).unwrap().truncation_error)
        .collect();
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
    assert_eq!(*errors.last().unwrap(), 0.0);
    for (&r, &e) in radii.iter().zip(&errors).take(5) {
        let oracle = band_tail_oracle(4001, r);
        assert!((e / oracle - 1.0).abs() <= 0.01, "r = {r}: {e} vs {oracle}");
    }
    let banded = truncate_band(&exact, 0.1).unwrap();
    let x = exact.grid.axis();
    for i in 0..401 {
        for j in 0..401 {
            if (x[i] - x[j]).abs() > 0.1 {
                assert_eq!(banded.kernel[(i, j)], 0.0);
            }
        }
    }
}

#[test]
fn hierarchical_decomposition_of_the_poisson_kernel() {
    let exact = exact_green(64);
    let h = hierarchical_decompose(&exact, 3, 1).unwrap();
    for b in &h.blocks {
        let block = exact.kernel.block(b.row_start, b.col_start, b.size, b.size);
        let approx = b.left.matmul(&b.right.transpose()).unwrap();
        assert!(approx.sub(&block).unwrap().max_abs() <= 1e-10);
    }
    let full_error = h.reconstruct().sub(&exact.kernel).unwrap().frobenius_norm();
    assert!((full_error - h.reported_error()).abs() <= 1e-10);
    assert!(hierarchical_decompose(&exact, 7, 1).is_err());

    let full = hierarchical_decompose(&exact, 2, 16).unwrap();
    assert!(full.reconstruct().sub(&exact.kernel).unwrap().max_abs() <= 1e-12);
}

#[test]
fn hierarchical_tails_decay_exponentially_for_smooth_kernels() {
    let m = 128;
    let grid = Grid::unit_interval(m);
    let x = grid.axis();
    let smooth = DenseKernel {
        kernel: DenseMatrix::from_fn(m, m, |i, j| 1.0 / (0.05 + (x[i] - x[j]).abs())),
        grid,
    };
    let tails: Vec<f64> = (1..=6)
        .map(|k| {
            let h = hierarchical_decompose(&smooth, 3, k).unwrap();
            let full_error = h.reconstruct().sub(&smooth.kernel).unwrap().frobenius_norm();
            assert!((full_error - h.reported_error()).abs() <= 1e-10 * smooth.kernel.frobenius_norm());
            h.blocks.iter().map(|b| b.tail).fold(0.0, f64::max)
        })
        .collect();
    for w in tails.windows(2) {
        assert!(w[1] <= 0.5 * w[0], "{tails:?}");
    }
}

#[test]
fn hierarchical_prediction_agrees_with_dense() {
    let exact = exact_green(64);
    let h = hierarchical_decompose(&exact, 3, 2).unwrap();
    let hierarchical = KernelModel::Hierarchical(h.clone());
    let dense_model = KernelModel::Dense(exact.clone());
    for f in white_noise(64, 5, 12) {
        let a = predict(&hierarchical, &f).unwrap();
        let b = predict(&dense_model, &f).unwrap();
        let wf: f64 = f
            .values
            .iter()
            .zip(f.grid.weights())
            .map(|(v, w)| (v * w).powi(2))
            .sum::<f64>()
            .sqrt();
        let diff = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= h.reported_error() * wf + 1e-14);
    }
}

#[test]
fn loss_identities() {
    let grid = Grid::unit_interval(30);
    let targets: Vec<FunctionSample> = (1..4)
        .map(|k| FunctionSample::from_fn_1d(grid.clone(), |x| (k as f64 * PI * x).sin() + 0.1).unwrap())
        .collect();
    let zeros: Vec<FunctionSample> = targets.iter().map(|t| FunctionSample::zeros(t.grid.clone())).collect();
    let doubled: Vec<FunctionSample> = targets.iter().map(|t| t.combine(2.0, t, 0.0)).collect();
    for kind in LossKind::ALL {
        assert_eq!(compute_loss(kind, &targets, &targets).unwrap(), 0.0, "{kind}");
    }
    for kind in [
        LossKind::RelativeL2,
        LossKind::RelativeSquaredL2,
        LossKind::RelativeL1,
        LossKind::H1SeminormRelative,
    ] {
        assert!(
            (compute_loss(kind, &zeros, &targets).unwrap() - 1.0).abs() <= 1e-14,
            "{kind}"
        );
    }
    assert!((compute_loss(LossKind::RelativeL2, &doubled, &targets).unwrap() - 1.0).abs() <= 1e-14);
    assert!(matches!(
        compute_loss(LossKind::RelativeL2, &targets, &zeros),
        Err(FitError::ZeroTarget { index: 0 })
    ));
    let mse = compute_loss(LossKind::Mse, &zeros, &targets).unwrap();
    let oracle: f64 = targets
        .iter()
        .map(|t| t.values.iter().map(|v| v * v).sum::<f64>() / 30.0)
        .sum::<f64>()
        / 3.0;
    assert!((mse - oracle).abs() <= 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relative_squared_is_square_of_relative(seed in any::<u64>(), scale in 0.1f64..3.0) {
        let targets = white_noise(20, 1, seed);
        let preds = white_noise(20, 1, seed ^ 0x5555).iter().map(|p| p.combine(scale, &targets[0], 1.0)).collect::<Vec<_>>();
        let rel = compute_loss(LossKind::RelativeL2, &preds, &targets).unwrap();
        let sq = compute_loss(LossKind::RelativeSquaredL2, &preds, &targets).unwrap();
        prop_assert!((rel * rel - sq).abs() <= 1e-12 * sq.max(1.0));
    }

    #[test]
    fn every_model_is_linear(seed in any::<u64>(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let exact = exact_green(32);
        let models = [
            KernelModel::Dense(exact.clone()),
            KernelModel::LowRank(low_rank_truncate(&exact, 4).unwrap()),
            KernelModel::Banded(truncate_band(&exact, 0.2).unwrap()),
            KernelModel::Hierarchical(hierarchical_decompose(&exact, 2, 2).unwrap()),
        ];
        let fs = white_noise(32, 2, seed);
        let combo = fs[0].combine(alpha, &fs[1], beta);
        for model in &models {
            let lhs = predict(model, &combo).unwrap();
            let rhs = predict(model, &fs[0]).unwrap().combine(alpha, &predict(model, &fs[1]).unwrap(), beta);
            for (a, b) in lhs.values.iter().zip(&rhs.values) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
        let fm = fit_fourier_multiplier(
            &make_dataset(&periodic_request(Pde::ScreenedPoisson1d { shift: 1.0 }, 8, 32, None), &RngStream::new(seed)).unwrap(),
            8,
            0.0,
        ).unwrap();
        let periodic = Grid::Periodic { length: 2.0 * PI, points: 64 };
        let g1 = FunctionSample::new(periodic.clone(), gaussian_vector(&mut RngStream::new(seed).derive(1), 64)).unwrap();
        let g2 = FunctionSample::from_fn_1d(periodic, |x| (2.0 * x).cos()).unwrap();
        let lhs = predict(&fm, &g1.combine(alpha, &g2, beta)).unwrap();
        let rhs = predict(&fm, &g1).unwrap().combine(alpha, &predict(&fm, &g2).unwrap(), beta);
        for (a, b) in lhs.values.iter().zip(&rhs.values) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
