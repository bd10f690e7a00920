use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaxbdf::integrator::{ars_startup, ImexRkTableau};
use relaxbdf::models::ModelName;
use relaxbdf::{
    bdf_coefficients, exact_evolve, initial_data, run, ArsScheme, ModelSpec, RealMatrix,
    RelaxationSystem, SolverState, SpectralField, Startup,
};

fn model(name: ModelName) -> ModelSpec {
    ModelSpec::by_name(name, &Default::default()).unwrap()
}

fn scalar_decay(eps: f64) -> RelaxationSystem {
    RelaxationSystem::new(
        RealMatrix::zeros(1, 1),
        RealMatrix::diagonal(&[-1.0]),
        1,
        eps,
        1.0,
    )
    .unwrap()
}

fn constant(value: f64) -> SpectralField {
    SpectralField::project(|_| vec![value], 1, 0, 1.0)
}

#[test]
fn coefficient_consistency() {
    for q in 1..=4 {
        let c = bdf_coefficients(q).unwrap();
        let sum: f64 = c.alpha.iter().sum();
        let first: f64 = c.alpha.iter().enumerate().map(|(i, a)| i as f64 * a).sum();
        let gsum: f64 = c.gamma.iter().sum();
        assert!(sum.abs() < 1e-15, "q={q}");
        assert!((first - c.beta).abs() < 1e-15, "q={q}");
        assert!((gsum - c.beta).abs() < 1e-15, "q={q}");
        // implicit part is BDF-q: Σ iᵖ α_i = p β qᵖ⁻¹
        for p in 2..=q as i32 {
            let lhs: f64 = c
                .alpha
                .iter()
                .enumerate()
                .map(|(i, a)| (i as f64).powi(p) * a)
                .sum();
            assert!(
                (lhs - p as f64 * c.beta * (q as f64).powi(p - 1)).abs() < 1e-12,
                "q={q} p={p}"
            );
        }
    }
    assert!(bdf_coefficients(5).is_err());
}

#[test]
fn backward_euler_on_scalar_decay() {
    let u = run(
        &constant(1.0),
        &scalar_decay(1.0),
        1,
        0.1,
        0.0,
        0.1,
        Startup::Exact,
    )
    .unwrap();
    assert!((u.mode(0)[0].re - 1.0 / 1.1).abs() < 1e-15);
}

#[test]
fn conserved_components_of_mean_are_exact() {
    for name in ModelName::ALL {
        let m = model(name);
        let sys = m.system_at(1e-3).unwrap();
        let p = sys.conserved_size();
        for q in 1..=4 {
            let u0 = initial_data(&m, q, 8, 1e-3).unwrap();
            let history = Startup::Exact.history(&u0, &sys, q, 1e-3).unwrap();
            let mut state =
                SolverState::new(&sys, bdf_coefficients(q).unwrap(), 1e-3, history).unwrap();
            let start: Vec<Complex64> = state.current().mode(0)[..p].to_vec();
            for _ in 0..10_000 {
                state.step().unwrap();
            }
            let drift = state.current().mode(0)[..p]
                .iter()
                .zip(&start)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            let scale = start.iter().map(|c| c.norm()).fold(1.0, f64::max);
            assert!(drift <= 1e-13 * scale, "{name} q={q}: {drift:e}");
        }
    }
}

#[test]
fn first_order_local_error_is_second_order() {
    for name in ModelName::ALL {
        let m = model(name);
        let sys = m.system_at(0.5).unwrap();
        let u0 = initial_data(&m, 2, 8, 0.5).unwrap();
        let err = |dt: f64| {
            let u = run(&u0, &sys, 1, dt, 0.0, dt, Startup::Exact).unwrap();
            u.sub(&exact_evolve(&u0, &sys, dt).unwrap())
                .unwrap()
                .l2_norm()
        };
        let ratio = err(1e-3) / err(5e-4);
        assert!((ratio.log2() - 2.0).abs() < 0.1, "{name}: {ratio}");
    }
}

#[test]
fn first_order_startup_is_untouched() {
    let m = model(ModelName::Arz);
    let u0 = initial_data(&m, 2, 4, 1e-2).unwrap();
    let h = ars_startup(
        &u0,
        &m.system_at(1e-2).unwrap(),
        1,
        1e-2,
        500,
        ArsScheme::Ars222,
    )
    .unwrap();
    assert_eq!(h, vec![u0]);
}

#[test]
fn ars222_startup_tracks_scalar_decay() {
    let eps = 0.1;
    let dt = 0.05;
    let err = |divisor: usize| {
        let h = ars_startup(
            &constant(1.0),
            &scalar_decay(eps),
            2,
            dt,
            divisor,
            ArsScheme::Ars222,
        )
        .unwrap();
        (h[1].mode(0)[0].re - (-dt / eps).exp()).abs()
    };
    // global error of a second-order scheme: O(δt²) over the interval, O(δt³) per step
    let (e1, e2) = (err(10), err(20));
    assert!((e1 / e2).log2() > 1.8, "{e1:e} {e2:e}");
    assert!(err(500) < (dt / 500.0 / eps).powi(2));
}

#[test]
fn ars443_startup_matches_exact() {
    for name in ModelName::ALL {
        let m = model(name);
        let sys = m.system_at(1.0).unwrap();
        let u0 = initial_data(&m, 4, 8, 1.0).unwrap();
        let got = ars_startup(&u0, &sys, 4, 1e-3, 500, ArsScheme::Ars443).unwrap();
        for (i, u) in got.iter().enumerate() {
            let want = exact_evolve(&u0, &sys, i as f64 * 1e-3).unwrap();
            assert!(u.sub(&want).unwrap().l2_norm() < 1e-10, "{name} level {i}");
        }
    }
}

#[test]
fn ars_tableaux_are_stiffly_accurate() {
    for t in [ImexRkTableau::ars222(), ImexRkTableau::ars443()] {
        assert!(t.is_stiffly_accurate());
    }
}

#[test]
fn zero_stays_zero() {
    for name in ModelName::ALL {
        let m = model(name);
        let sys = m.system_at(1e-4).unwrap();
        let z = SpectralField::zeros(m.dim(), 6, m.domain_length());
        for q in 1..=4 {
            let startup = Startup::Ars {
                divisor: 10,
                scheme: None,
            };
            let u = run(&z, &sys, q, 0.01, 0.0, 0.2, startup).unwrap();
            assert_eq!(u, z);
        }
    }
}

#[test]
fn linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for name in ModelName::ALL {
        let m = model(name);
        let sys = m.system_at(1e-2).unwrap();
        let u = initial_data(&m, 3, 8, 1e-2).unwrap();
        let v = SpectralField::project(
            |x| (0..m.dim()).map(|c| ((c + 1) as f64 * x).cos()).collect(),
            m.dim(),
            8,
            m.domain_length(),
        );
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let mut combo = u.scale(a);
        combo.axpy(b, &v).unwrap();
        let go = |f: &SpectralField| run(f, &sys, 3, 0.01, 0.0, 0.5, Startup::default()).unwrap();
        let mut want = go(&u).scale(a);
        want.axpy(b, &go(&v)).unwrap();
        let got = go(&combo);
        assert!(got.sub(&want).unwrap().l2_norm() <= 1e-12 * want.l2_norm());
    }
}

#[test]
fn runs_are_deterministic() {
    let m = model(ModelName::Broadwell);
    let sys = m.system_at(1e-6).unwrap();
    let u0 = initial_data(&m, 4, 16, 1e-6).unwrap();
    let startup = Startup::Ars {
        divisor: 50,
        scheme: None,
    };
    let a = run(&u0, &sys, 4, 0.01, 0.0, 0.5, startup).unwrap();
    let b = run(&u0, &sys, 4, 0.01, 0.0, 0.5, startup).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_fractional_step_counts() {
    let m = model(ModelName::Arz);
    let u0 = initial_data(&m, 2, 4, 1.0).unwrap();
    let err = run(
        &u0,
        &m.system_at(1.0).unwrap(),
        2,
        0.3,
        0.0,
        1.0,
        Startup::Exact,
    )
    .unwrap_err();
    assert!(matches!(err, relaxbdf::Error::NonIntegerStepCount { .. }));
}

/// Bound shape `‖U(T)‖ ≤ C (‖U(0)‖ + √(Δt/ε) ‖W(0)‖)` with `C = 10` at the
/// step `Δt = 0.5/N²`.
#[test]
fn uniform_stability() {
    let modes = 32;
    let dt = 0.5 / (modes * modes) as f64;
    for name in ModelName::ALL {
        let m = model(name);
        let n = m.dim();
        let r = m.system.stiff_size();
        for eps in [1e-8, 1e-4, 1.0] {
            let sys = m.system_at(eps).unwrap();
            for q in 1..=4 {
                let u0 = initial_data(&m, q, modes, eps).unwrap();
                let w0 = u0.component_l2_norm(n - r..n);
                let u = run(&u0, &sys, q, dt, 0.0, 1.0, Startup::Exact).unwrap();
                let bound = 10.0 * (u0.l2_norm() + (dt / eps).sqrt() * w0);
                assert!(
                    u.l2_norm() <= bound,
                    "{name} eps={eps} q={q}: {} > {bound}",
                    u.l2_norm()
                );
            }
        }
    }
}

/// Every mode up to `N` populated. The step bound is `0.5/κ_max²`, which is
/// `0.5/N²` on a `2π` domain; ARZ lives on `[0, 1]`.
#[test]
fn uniform_stability_for_rough_data() {
    let modes = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in ModelName::ALL {
        let m = model(name);
        let kmax = std::f64::consts::TAU * modes as f64 / m.domain_length();
        let dt = 1.0 / (2.0 * kmax * kmax).ceil();
        let n = m.dim();
        let r = m.system.stiff_size();
        let mut u0 = SpectralField::zeros(n, modes, m.domain_length());
        for k in 0..=modes as i64 {
            for c in 0..n {
                let v = Complex64::new(
                    rng.gen_range(-1.0..1.0),
                    if k == 0 {
                        0.0
                    } else {
                        rng.gen_range(-1.0..1.0)
                    },
                );
                u0.mode_mut(k)[c] = v;
                u0.mode_mut(-k)[c] = v.conj();
            }
        }
        for eps in [1e-8, 1e-4, 1.0] {
            let sys = m.system_at(eps).unwrap();
            for q in 1..=4 {
                let w0 = u0.component_l2_norm(n - r..n);
                let u = run(&u0, &sys, q, dt, 0.0, 1.0, Startup::Exact).unwrap();
                let bound = 10.0 * (u0.l2_norm() + (dt / eps).sqrt() * w0);
                assert!(
                    u.l2_norm() <= bound,
                    "{name} eps={eps} q={q}: {} > {bound}",
                    u.l2_norm()
                );
            }
        }
    }
}
