//! Property tests: invariants of the solvers, the ensemble engine and the
//! horizon formulas.

use proptest::prelude::*;
use spde_core::brownian::{NoiseMode, TimeGrid};
use spde_core::ensemble::Ensemble;
use spde_core::initial::InitialLaw;
use spde_core::linear::{solve_linear_additive, AdditiveLinearSpec, ConditionFlag};
use spde_core::multiplicative::{contraction_factor, contraction_horizon, truncation_factor};
use spde_core::profile::Profile;
use spde_core::rng::{GaussStream, StreamTag};
use spde_core::sectorial::SpectralOperator;
use spde_core::semilinear::{
    chaining_check, forward_solution, moment_profile_check, more_regular_check, solve_critical, Exponents, Nonlinearity, SemilinearOptions,
    SemilinearSpec,
};
use spde_core::stats::MomentAccumulator;

fn exps(gamma: Option<f64>) -> Exponents {
    Exponents {
        eta: 0.4,
        beta: 0.35,
        sigma: 0.1,
        gamma,
    }
}

fn semilinear(f1: Nonlinearity, g: f64, initial: InitialLaw, critical: bool, gamma: Option<f64>) -> SemilinearSpec {
    let d = initial.dim();
    SemilinearSpec::new(
        SpectralOperator::dirichlet_laplacian_1d(d, 1.0).unwrap(),
        f1,
        Profile::Constant { value: 0.5 },
        Profile::Constant { value: g },
        initial,
        exps(gamma),
        critical,
        1.0,
        2.0,
    )
    .unwrap()
}

fn linear(xi: Vec<f64>, f: f64, g: f64) -> AdditiveLinearSpec {
    let d = xi.len();
    AdditiveLinearSpec::new(
        SpectralOperator::dirichlet_laplacian_1d(d, 1.0).unwrap(),
        Profile::Sine {
            amplitude: f,
            frequency: 3.0,
        },
        Profile::Constant { value: g },
        InitialLaw::Deterministic { value: xi },
        0.4,
        0.1,
        ConditionFlag::F2,
        1.0,
        2.0,
    )
    .unwrap()
}

fn ensemble_row_sums(ens: &Ensemble) -> MomentAccumulator {
    ens.map_reduce(
        || MomentAccumulator::new(2),
        |acc, i| {
            let mut s = GaussStream::new(ens.seed, i, StreamTag::Auxiliary);
            let z = s.gaussian();
            acc.push(&[z, z * z]);
        },
        |a, b| a.merge(&b),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_solution_scales_with_data(
        xi in proptest::collection::vec(-2.0f64..2.0, 1..5),
        f in -2.0f64..2.0,
        g in 0.1f64..2.0,
        a in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        for mode in [NoiseMode::Increment, NoiseMode::ExactGauss] {
            let base = solve_linear_additive(&linear(xi.clone(), f, g), &grid, seed, 3, mode).unwrap();
            let scaled_xi: Vec<f64> = xi.iter().map(|v| a * v).collect();
            let scaled = solve_linear_additive(&linear(scaled_xi, a * f, a * g), &grid, seed, 3, mode).unwrap();
            for (u, v) in base.x.flat().iter().zip(scaled.x.flat()) {
                prop_assert!((a * u - v).abs() <= 1e-12 * (1.0 + v.abs()), "{} vs {}", a * u, v);
            }
        }
    }

    #[test]
    fn chunk_size_does_not_change_estimates(seed in any::<u64>(), paths in 1u64..700, chunk in 1u64..300) {
        let base = ensemble_row_sums(&Ensemble::new(seed, paths));
        let other = ensemble_row_sums(&Ensemble { seed, paths, chunk });
        for slot in 0..2 {
            let (x, y) = (base.estimate(slot), other.estimate(slot));
            prop_assert!((x.mean - y.mean).abs() <= 1e-12 * (1.0 + x.mean.abs()));
        }
    }

    #[test]
    fn horizon_attains_the_contraction_factor(
        c2 in 0.01f64..20.0,
        m_t in 0.5f64..3.0,
        p in 1.5f64..6.0,
        c_p in 0.5f64..4.0,
        rho in 0.05f64..1.0,
    ) {
        let t = contraction_horizon(c2, m_t, p, c_p, rho).unwrap();
        prop_assert!((contraction_factor(c2, m_t, p, c_p, t) - rho).abs() <= 1e-10 * rho);
        prop_assert!(contraction_factor(c2, m_t, p, c_p, 0.5 * t) < rho);
        prop_assert!(contraction_horizon(c2, m_t, p, c_p, 0.5 * rho).unwrap() < t);
    }

    #[test]
    fn truncation_factor_is_monotone_and_lipschitz(n in 0.1f64..10.0, a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let (fa, fb) = (truncation_factor(a, n), truncation_factor(b, n));
        prop_assert!((0.0..=1.0).contains(&fa));
        if a <= n { prop_assert_eq!(fa, 1.0); }
        if a >= 2.0 * n { prop_assert_eq!(fa, 0.0); }
        if a <= b { prop_assert!(fa >= fb); }
        prop_assert!((fa - fb).abs() <= (a - b).abs() / n + 1e-15);
    }

    #[test]
    fn semilinear_restart_is_bitwise(seed in any::<u64>(), idx in 0u64..1000, amp in 0.0f64..1.5, exact in any::<bool>()) {
        let s = semilinear(
            Nonlinearity::SineEta { amplitude: amp, offset: 0.1 },
            1.0,
            InitialLaw::Deterministic { value: vec![0.4, -0.2, 0.1] },
            false,
            None,
        );
        let opts = SemilinearOptions {
            mode: if exact { NoiseMode::ExactGauss } else { NoiseMode::Increment },
            ..Default::default()
        };
        let grid = TimeGrid::new(0.02, 24).unwrap();
        let r = chaining_check(&s, &grid, seed, idx, &opts).unwrap();
        prop_assert!(r.converged && r.bitwise_equal, "{:?}", r);
    }

    #[test]
    fn horizon_is_monotone_in_initial_size(scale in 0.1f64..5.0, step in 1.01f64..3.0) {
        // F₁(0) = 0, so every input of the horizon grows with |ξ|.
        let make = |s: f64| semilinear(
            Nonlinearity::SineEta { amplitude: 1.0, offset: 0.0 },
            1.0,
            InitialLaw::Deterministic { value: vec![s, 0.5 * s] },
            false,
            None,
        );
        let (small, large) = (make(scale).certificate().unwrap(), make(scale * step).certificate().unwrap());
        prop_assert!(large.kappa >= small.kappa);
        prop_assert!(large.t_local <= small.t_local * (1.0 + 1e-5));
    }

    #[test]
    fn linear_beta_matches_shifted_operator(
        c in 0.0f64..1.0,
        xi in proptest::collection::vec(-2.0f64..2.0, 1..4),
    ) {
        let d = xi.len();
        let s = semilinear(Nonlinearity::LinearBeta { c }, 0.0, InitialLaw::Deterministic { value: xi.clone() }, false, None);
        let s = SemilinearSpec { f2: Profile::Zero, ..s };
        let t = 0.5;
        let grid = TimeGrid::new(t, 2048).unwrap();
        let x = forward_solution(&s, &grid, 1, 0, NoiseMode::Increment).unwrap();
        let end = x.at(grid.steps);
        for (i, &l) in SpectralOperator::dirichlet_laplacian_1d(d, 1.0).unwrap().eigenvalues().iter().enumerate() {
            let mu = l + c * l.powf(0.35);
            let exact = (-mu * t).exp() * xi[i];
            prop_assert!((end[i] - exact).abs() <= 2e-3 * (1.0 + xi[i].abs()), "coord {i}: {} vs {exact}", end[i]);
        }
    }
}

#[test]
fn worker_count_does_not_change_bits() {
    let ens = Ensemble {
        seed: 99,
        paths: 3000,
        chunk: 64,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble_row_sums(&ens).estimates())
    };
    let one = run(1);
    let four = run(4);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.se.to_bits(), b.se.to_bits());
    }
}

#[test]
fn linear_beta_variance_matches_shifted_oracle() {
    // dX = −(A + cA^β)X dt + dw has Var X_i(t) = (1 − e^{−2μt})/(2μ).
    let c = 0.5;
    let mut s = semilinear(Nonlinearity::LinearBeta { c }, 1.0, InitialLaw::zero(2), false, None);
    s.f2 = Profile::Zero;
    let t = 0.25;
    let grid = TimeGrid::new(t, 512).unwrap();
    let ens = Ensemble::new(11, 20000);
    let acc = ens
        .try_map_reduce(
            || MomentAccumulator::new(2),
            |acc, i| {
                let x = forward_solution(&s, &grid, ens.seed, i, NoiseMode::ExactGauss)?;
                let end = x.at(grid.steps);
                acc.push(&[end[0] * end[0], end[1] * end[1]]);
                Ok(())
            },
            |a, b| a.merge(&b),
        )
        .unwrap();
    for (i, &l) in s.operator.eigenvalues().iter().enumerate() {
        let mu = l + c * l.powf(0.35);
        let oracle = -(-2.0 * mu * t).exp_m1() / (2.0 * mu);
        let e = acc.estimate(i);
        assert!((e.mean - oracle).abs() <= 3.0 * e.se, "coord {i}: {} ± {} vs {oracle}", e.mean, e.se);
    }
}

#[test]
fn critical_case_converges_and_keeps_its_moment_profile() {
    let s = semilinear(
        Nonlinearity::SineEtaPlusIdentity { amplitude: 0.5 },
        1.0,
        InitialLaw::Gaussian {
            mean: vec![0.3, 0.2, 0.1],
            std: 0.5,
        },
        true,
        None,
    );
    let cert = s.certificate().unwrap();
    assert!(cert.self_consistent && cert.t_local > 0.0);
    let grid = TimeGrid::new(cert.t_local.min(1.0), 64).unwrap();
    let path = solve_critical(&s, &grid, 5, 0, &SemilinearOptions::default()).unwrap();
    assert!(path.converged);
    let r = moment_profile_check(&s, &grid, &Ensemble::new(5, 400), NoiseMode::Increment).unwrap();
    assert!(r.moment_pass, "slack {}", r.moment_slack);
}

#[test]
fn more_regular_data_give_the_small_time_profiles() {
    let s = semilinear(
        Nonlinearity::SineEta { amplitude: 1.0, offset: 0.0 },
        1.0,
        InitialLaw::Deterministic {
            value: vec![0.5, 0.2, 0.1, 0.05],
        },
        false,
        Some(0.45),
    );
    let cert = s.certificate().unwrap();
    let grid = TimeGrid::new(cert.t_local.min(1.0), 256).unwrap();
    let r = more_regular_check(&s, &grid, &Ensemble::new(8, 400), NoiseMode::Increment).unwrap();
    assert!((r.varrho - 0.15).abs() < 1e-12);
    assert!(r.pass, "γ slope {}, η slope {}", r.gamma_slope, r.eta_slope);
}
