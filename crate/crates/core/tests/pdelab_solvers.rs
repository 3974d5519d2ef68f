use std::f64::consts::PI;

use oplab_core::numerics::RngStream;
use oplab_core::pdelab::{
    darcy_coefficient, green_poisson_1d, make_dataset, poisson_residual, solve_burgers_1d, solve_darcy_2d,
    solve_darcy_2d_with_stats, solve_poisson_1d, solve_screened_poisson_periodic, BurgersParams, DatasetRequest, Pde,
    PdeError, DARCY_TOLERANCE,
};
use oplab_core::probes::{kl_decompose, sample_gp, CovarianceSpec};
use oplab_core::sample::{FunctionSample, Grid};
use proptest::prelude::*;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn relative_l2(a: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = reference.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn poisson_manufactured_error(s: usize) -> f64 {
    let f = FunctionSample::from_fn_1d(Grid::unit_interval(s), |x| PI * PI * (PI * x).sin()).unwrap();
    let u = solve_poisson_1d(&f).unwrap();
    let exact: Vec<f64> = f.grid.axis().iter().map(|x| (PI * x).sin()).collect();
    max_diff(&u.values, &exact)
}

#[test]
fn poisson_converges_at_second_order() {
    let sizes = [17, 33, 65, 129, 257];
    let errors: Vec<f64> = sizes.iter().map(|&s| poisson_manufactured_error(s)).collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}

#[test]
fn green_function_closed_form() {
    assert_eq!(green_poisson_1d(0.5, 0.5).unwrap(), 0.25);
    for x in [0.0, 0.2, 0.7, 1.0] {
        assert_eq!(green_poisson_1d(x, 0.0).unwrap(), 0.0);
        assert_eq!(green_poisson_1d(x, 1.0).unwrap(), 0.0);
        assert_eq!(green_poisson_1d(x, 0.3).unwrap(), green_poisson_1d(0.3, x).unwrap());
    }
    assert!(green_poisson_1d(1.5, 0.1).is_err());

    // ∫G(1/2, y) π² sin(πy) dy = sin(π/2) by fine trapezoid quadrature.
    let n = 20_001;
    let grid = Grid::unit_interval(n);
    let w = grid.weights();
    let integral: f64 = grid
        .axis()
        .iter()
        .zip(&w)
        .map(|(&y, w)| w * green_poisson_1d(0.5, y).unwrap() * PI * PI * (PI * y).sin())
        .sum();
    assert!((integral - 1.0).abs() <= 1e-8);
    let u =
        solve_poisson_1d(&FunctionSample::from_fn_1d(Grid::unit_interval(101), |x| PI * PI * (PI * x).sin()).unwrap())
            .unwrap();
    assert!((u.values[50] - integral).abs() <= 1e-3);
}

#[test]
fn poisson_matches_green_quadrature_for_random_sources() {
    let basis = kl_decompose(&CovarianceSpec::squared_exponential(0.1), 101).unwrap();
    let f = sample_gp(&basis, &mut RngStream::new(12));
    let u = solve_poisson_1d(&f).unwrap();
    let nodes = f.grid.axis();
    let w = f.grid.weights();
    let quadrature: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            nodes
                .iter()
                .zip(&w)
                .zip(&f.values)
                .map(|((&y, w), fy)| w * green_poisson_1d(x, y).unwrap() * fy)
                .sum()
        })
        .collect();
    // Trapezoid weights put h/2 at zeros of G, so the quadrature equals the FD solution.
    assert!(max_diff(&u.values, &quadrature) <= 1e-12 * f.max_abs());
}

#[test]
fn poisson_zero_source_and_residual() {
    let zero = FunctionSample::zeros(Grid::unit_interval(20));
    let u = solve_poisson_1d(&zero).unwrap();
    assert!(u.values.iter().all(|&v| v == 0.0));
    assert!(solve_poisson_1d(&FunctionSample::zeros(Grid::unit_interval(2))).is_err());
    assert!(solve_poisson_1d(&FunctionSample::zeros(Grid::Periodic {
        length: 1.0,
        points: 16
    }))
    .is_err());
    let f = FunctionSample::from_fn_1d(Grid::unit_interval(50), |x| x.exp()).unwrap();
    assert!(poisson_residual(&f, &solve_poisson_1d(&f).unwrap()).unwrap() <= 1e-9);
}

fn constant(s: usize, value: f64) -> FunctionSample {
    FunctionSample::from_fn_2d(Grid::Square { points: s }, |_, _| value).unwrap()
}

#[test]
fn darcy_self_convergence_is_second_order() {
    let solve = |s: usize| solve_darcy_2d(&constant(s, 1.0), &constant(s, 1.0)).unwrap();
    let (u33, u65, u129) = (solve(33), solve(65), solve(129));
    let e33 = max_diff(&u33.values, &u65.restrict(&u33.grid).unwrap().values);
    let e65 = max_diff(&u65.values, &u129.restrict(&u65.grid).unwrap().values);
    let ratio = e33 / e65;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}: {e33:e} / {e65:e}");
    // Restriction of the finest solution sits within twice the reference error.
    let e33_fine = max_diff(&u33.values, &u129.restrict(&u33.grid).unwrap().values);
    assert!(e33_fine <= 2.0 * e33);
}

#[test]
fn darcy_scales_inversely_with_constant_coefficient() {
    let s = 33;
    let f = FunctionSample::from_fn_2d(Grid::Square { points: s }, |x, y| 1.0 + x * y).unwrap();
    let u1 = solve_darcy_2d(&constant(s, 1.0), &f).unwrap();
    for alpha in [3.0, 12.0, 0.5] {
        let ua = solve_darcy_2d(&constant(s, alpha), &f).unwrap();
        let scaled: Vec<f64> = u1.values.iter().map(|v| v / alpha).collect();
        assert!(max_diff(&ua.values, &scaled) <= 1e-9 * u1.max_abs() / alpha);
    }
    let zero = solve_darcy_2d(&constant(s, 1.0), &constant(s, 0.0)).unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
}

#[test]
fn darcy_random_coefficient_respects_maximum_principle() {
    let spec = CovarianceSpec::helmholtz_power(1.0, 2.0, 9.0, 1.0);
    let draws: Vec<FunctionSample> = (0..20)
        .map(|seed| darcy_coefficient(&mut RngStream::new(seed), &spec, 33).unwrap())
        .collect();
    assert!(draws.iter().flat_map(|a| &a.values).all(|&v| v == 3.0 || v == 12.0));
    let a = draws
        .into_iter()
        .find(|a| a.values.contains(&3.0) && a.values.contains(&12.0))
        .expect("some draw mixes both phases");
    let (u, stats) = solve_darcy_2d_with_stats(&a, &constant(33, 1.0)).unwrap();
    assert!(stats.relative_residual <= DARCY_TOLERANCE);
    assert!(u.values.iter().all(|&v| v >= -1e-12));
    let s = 33;
    for i in 0..s {
        for v in [
            u.values[i],
            u.values[(s - 1) * s + i],
            u.values[i * s],
            u.values[i * s + s - 1],
        ] {
            assert_eq!(v, 0.0);
        }
    }
}

#[test]
fn darcy_rejects_bad_coefficients() {
    let mut a = constant(9, 1.0);
    a.values[40] = 0.0;
    assert!(matches!(
        solve_darcy_2d(&a, &constant(9, 1.0)),
        Err(PdeError::NonPositiveCoefficient { index: 40, .. })
    ));
    assert!(matches!(
        solve_darcy_2d(&constant(9, 1.0), &constant(17, 1.0)),
        Err(PdeError::GridMismatch)
    ));
    assert!(darcy_coefficient(
        &mut RngStream::new(1),
        &CovarianceSpec::helmholtz_power(1.0, 2.0, 9.0, 1.0),
        4
    )
    .is_err());
}

fn sine(s: usize) -> FunctionSample {
    FunctionSample::from_fn_1d(
        Grid::Periodic {
            length: 2.0 * PI,
            points: s,
        },
        f64::sin,
    )
    .unwrap()
}

#[test]
fn burgers_spectral_self_convergence() {
    let params = BurgersParams::new(0.1, 1.0);
    let coarse = solve_burgers_1d(&sine(256), &params).unwrap();
    let fine = solve_burgers_1d(&sine(2048), &params).unwrap();
    let restricted = fine.restrict(&coarse.grid).unwrap();
    let err = relative_l2(&coarse.values, &restricted.values);
    assert!(err <= 1e-6, "relative L2 {err:e}");
}

#[test]
fn burgers_conserves_the_mean() {
    let basis = kl_decompose(&CovarianceSpec::helmholtz_power(1.0, 2.0, 1.0, 2.0 * PI), 128).unwrap();
    let mut u0 = sample_gp(&basis, &mut RngStream::new(77));
    for v in &mut u0.values {
        *v += 0.3;
    }
    let u = solve_burgers_1d(&u0, &BurgersParams::new(0.1, 1.0)).unwrap();
    let mean = |f: &FunctionSample| f.values.iter().sum::<f64>() / f.len() as f64;
    assert!((mean(&u) - mean(&u0)).abs() <= 1e-10);
}

#[test]
fn burgers_linear_limit_is_heat_decay() {
    for nu in [0.5, 1.0] {
        let mut params = BurgersParams::new(nu, 1.0);
        params.nonlinear = false;
        let u = solve_burgers_1d(&sine(64), &params).unwrap();
        let amplitude = u.max_abs() / sine(64).max_abs();
        let expected = (-nu * 1.0f64).exp();
        assert!(
            (amplitude / expected - 1.0).abs() <= 0.05,
            "ν = {nu}: {amplitude} vs {expected}"
        );
    }
    let zero = solve_burgers_1d(
        &FunctionSample::zeros(Grid::Periodic {
            length: 2.0 * PI,
            points: 32,
        }),
        &BurgersParams::new(0.1, 1.0),
    )
    .unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
    assert!(solve_burgers_1d(&sine(100), &BurgersParams::new(0.1, 1.0)).is_err());
}

#[test]
fn screened_poisson_inverts_its_multiplier() {
    let grid = Grid::Periodic {
        length: 2.0 * PI,
        points: 64,
    };
    let f = FunctionSample::from_fn_1d(grid, |x| (3.0 * x).cos() + 2.0).unwrap();
    let u = solve_screened_poisson_periodic(&f, 1.0).unwrap();
    for (x, v) in u.grid.axis().iter().zip(&u.values) {
        let exact = (3.0 * x).cos() / 10.0 + 2.0;
        assert!((v - exact).abs() <= 1e-13);
    }
    assert!(solve_screened_poisson_periodic(&f, 0.0).is_err());
}

fn poisson_request(pairs: usize) -> DatasetRequest {
    DatasetRequest {
        pde: Pde::Poisson1d,
        covariance: CovarianceSpec::squared_exponential(0.05),
        pairs,
        resolution: 100,
        max_modes: None,
    }
}

#[test]
fn empty_dataset_keeps_provenance() {
    let ds = make_dataset(&poisson_request(0), &RngStream::new(3)).unwrap();
    assert!(ds.is_empty());
    assert_eq!(ds.provenance.pairs, 0);
    assert_eq!(ds.provenance.seed, 3);
    ds.validate().unwrap();
}

#[test]
fn poisson_dataset_pairs_satisfy_the_scheme() {
    let ds = make_dataset(&poisson_request(100), &RngStream::new(2)).unwrap();
    ds.validate().unwrap();
    for (f, u) in ds.inputs.iter().zip(&ds.outputs) {
        assert!(poisson_residual(f, u).unwrap() <= 1e-8);
    }
    let again = make_dataset(&poisson_request(100), &RngStream::new(2)).unwrap();
    assert_eq!(ds, again);
    let prefix = make_dataset(&poisson_request(10), &RngStream::new(2)).unwrap();
    assert_eq!(prefix.inputs[..], ds.inputs[..10]);
}

#[test]
fn burgers_dataset_is_consistent_across_resolutions() {
    let request = |resolution| DatasetRequest {
        pde: Pde::Burgers1d {
            viscosity: 0.1,
            final_time: 1.0,
        },
        covariance: CovarianceSpec::helmholtz_power(1.0, 2.0, 1.0, 2.0 * PI),
        pairs: 3,
        resolution,
        max_modes: Some(32),
    };
    let coarse = make_dataset(&request(256), &RngStream::new(8)).unwrap();
    let fine = make_dataset(&request(2048), &RngStream::new(8)).unwrap();
    for (c, f) in coarse.outputs.iter().zip(&fine.outputs) {
        let restricted = f.restrict(&c.grid).unwrap();
        assert!(relative_l2(&c.values, &restricted.values) <= 1e-5);
    }
}

#[test]
fn dataset_errors_name_the_pair() {
    let request = DatasetRequest {
        pde: Pde::Burgers1d {
            viscosity: 0.1,
            final_time: 1.0,
        },
        covariance: CovarianceSpec::helmholtz_power(1.0, 2.0, 1.0, 2.0 * PI),
        pairs: 2,
        resolution: 100,
        max_modes: None,
    };
    match make_dataset(&request, &RngStream::new(1)) {
        Err(PdeError::Pair { index, .. }) => assert!(index < 2),
        other => panic!("expected a pair error, got {other:?}"),
    }
    let mut mismatched = poisson_request(1);
    mismatched.pde = Pde::Darcy2d;
    assert!(matches!(
        make_dataset(&mismatched, &RngStream::new(1)),
        Err(PdeError::Incompatible(_))
    ));
}

#[test]
fn darcy_dataset_maps_coefficient_to_solution() {
    let request = DatasetRequest {
        pde: Pde::Darcy2d,
        covariance: CovarianceSpec::helmholtz_power(1.0, 2.0, 9.0, 1.0),
        pairs: 2,
        resolution: 17,
        max_modes: None,
    };
    let ds = make_dataset(&request, &RngStream::new(4)).unwrap();
    ds.validate().unwrap();
    for (a, u) in ds.inputs.iter().zip(&ds.outputs) {
        assert!(a.values.iter().all(|&v| v == 3.0 || v == 12.0));
        assert_eq!(u, &solve_darcy_2d(a, &constant(17, 1.0)).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_solvers_are_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let stream = RngStream::new(seed);
        let basis = kl_decompose(&CovarianceSpec::squared_exponential(0.2), 40).unwrap();
        let f1 = sample_gp(&basis, &mut stream.derive(0));
        let f2 = sample_gp(&basis, &mut stream.derive(1));
        let combo = f1.combine(alpha, &f2, beta);
        let lhs = solve_poisson_1d(&combo).unwrap();
        let rhs = solve_poisson_1d(&f1).unwrap().combine(alpha, &solve_poisson_1d(&f2).unwrap(), beta);
        prop_assert!(max_diff(&lhs.values, &rhs.values) <= 1e-10);

        let periodic = kl_decompose(&CovarianceSpec::helmholtz_power(1.0, 2.0, 1.0, 2.0 * PI), 32).unwrap();
        let g1 = sample_gp(&periodic, &mut stream.derive(2));
        let g2 = sample_gp(&periodic, &mut stream.derive(3));
        let lhs = solve_screened_poisson_periodic(&g1.combine(alpha, &g2, beta), 2.0).unwrap();
        let rhs = solve_screened_poisson_periodic(&g1, 2.0).unwrap()
            .combine(alpha, &solve_screened_poisson_periodic(&g2, 2.0).unwrap(), beta);
        prop_assert!(max_diff(&lhs.values, &rhs.values) <= 1e-10);

        let s = 9;
        let grid = Grid::Square { points: s };
        let d1 = FunctionSample::from_fn_2d(grid.clone(), |x, y| (seed % 7) as f64 + x - y * y).unwrap();
        let d2 = FunctionSample::from_fn_2d(grid, |x, y| (x * y).sin()).unwrap();
        let a = constant(s, 3.0);
        let lhs = solve_darcy_2d(&a, &d1.combine(alpha, &d2, beta)).unwrap();
        let rhs = solve_darcy_2d(&a, &d1).unwrap().combine(alpha, &solve_darcy_2d(&a, &d2).unwrap(), beta);
        prop_assert!(max_diff(&lhs.values, &rhs.values) <= 1e-10);
    }
}
