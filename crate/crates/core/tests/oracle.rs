use relaxbdf::models::ModelName;
use relaxbdf::oracle::{fine_step_reference, ModeGenerator};
use relaxbdf::theory::fit_order;
use relaxbdf::{exact_evolve, initial_data, run, ModelSpec, SpectralField, Startup};

fn model(name: ModelName) -> ModelSpec {
    ModelSpec::by_name(name, &Default::default()).unwrap()
}

#[test]
fn semigroup() {
    for name in ModelName::ALL {
        let m = model(name);
        for eps in [1e-7, 1e-3, 1.0] {
            let sys = m.system_at(eps).unwrap();
            let u0 = initial_data(&m, 3, 16, eps).unwrap();
            let (t1, t2) = (0.37, 0.81);
            let direct = exact_evolve(&u0, &sys, t1 + t2).unwrap();
            let composed = exact_evolve(&exact_evolve(&u0, &sys, t1).unwrap(), &sys, t2).unwrap();
            let diff = direct.sub(&composed).unwrap().l2_norm();
            assert!(
                diff <= 1e-9 * direct.l2_norm(),
                "{name} eps={eps}: {diff:e}"
            );
        }
    }
}

#[test]
fn weighted_energy_does_not_increase() {
    for name in ModelName::ALL {
        let m = model(name);
        let a0 = &m.witness.a0;
        for eps in [1e-6, 1e-2, 1.0] {
            let sys = m.system_at(eps).unwrap();
            let u0 = initial_data(&m, 2, 16, eps).unwrap();
            let mut prev = u0.weighted_energy(a0);
            for i in 1..=20 {
                let e = exact_evolve(&u0, &sys, 0.05 * i as f64)
                    .unwrap()
                    .weighted_energy(a0);
                assert!(
                    e <= prev * (1.0 + 1e-9),
                    "{name} eps={eps} step {i}: {e} > {prev}"
                );
                prev = e;
            }
        }
    }
}

#[test]
fn real_fields_stay_real() {
    for name in ModelName::ALL {
        let m = model(name);
        let sys = m.system_at(1e-4).unwrap();
        let u = exact_evolve(&initial_data(&m, 4, 24, 1e-4).unwrap(), &sys, 0.7).unwrap();
        assert!(u.conjugate_symmetry_residual() < 1e-11);
    }
}

#[test]
fn opposite_generators_are_conjugate() {
    for name in ModelName::ALL {
        let sys = model(name).system_at(0.3).unwrap();
        for k in 1..5 {
            let p = ModeGenerator::new(&sys, k).matrix;
            let n = ModeGenerator::new(&sys, -k).matrix;
            assert_eq!(p.map(|c| c.conj()), n);
        }
    }
}

#[test]
fn broadwell_exact_agrees_with_fine_third_order_run() {
    let m = model(ModelName::Broadwell);
    let eps = 1e-2;
    let sys = m.system_at(eps).unwrap();
    let u0 = initial_data(&m, 3, 100, eps).unwrap();
    let exact = exact_evolve(&u0, &sys, 2.0).unwrap();
    let fine = run(&u0, &sys, 3, 1e-5, 0.0, 2.0, Startup::Exact).unwrap();
    let diff = exact.sub(&fine).unwrap().l2_norm();
    assert!(diff < 1e-9, "{diff:e}");
}

#[test]
fn degenerate_fine_reference_is_the_run() {
    let m = model(ModelName::Grad);
    let sys = m.system_at(1e-2).unwrap();
    let u0 = initial_data(&m, 4, 8, 1e-2).unwrap();
    let startup = Startup::Ars {
        divisor: 20,
        scheme: None,
    };
    let a = fine_step_reference(&u0, &sys, 4, 0.01, 0.0, 1.0, startup).unwrap();
    let b = run(&u0, &sys, 4, 0.01, 0.0, 1.0, startup).unwrap();
    assert_eq!(a, b);
}

#[test]
fn arz_fine_reference_matches_exact() {
    let m = model(ModelName::Arz);
    let sys = m.system_at(1.0).unwrap();
    let u0 = initial_data(&m, 2, 100, 1.0).unwrap();
    let exact = exact_evolve(&u0, &sys, 1.0).unwrap();
    let fine = fine_step_reference(&u0, &sys, 2, 1e-6, 0.0, 1.0, Startup::Exact).unwrap();
    let diff = exact.sub(&fine).unwrap().l2_norm();
    assert!(diff < 1e-10, "{diff:e}");
}

#[test]
fn fine_reference_converges_at_rate_q() {
    for name in ModelName::ALL {
        let m = model(name);
        let sys = m.system_at(0.1).unwrap();
        let t = 0.5;
        for q in 1..=4 {
            let u0 = initial_data(&m, q, 8, 0.1).unwrap();
            let exact = exact_evolve(&u0, &sys, t).unwrap();
            let dts = [1.0 / 200.0, 1.0 / 400.0, 1.0 / 800.0];
            let errs: Vec<f64> = dts
                .iter()
                .map(|&dt| {
                    let f: SpectralField =
                        fine_step_reference(&u0, &sys, q, dt, 0.0, t, Startup::Exact).unwrap();
                    f.sub(&exact).unwrap().l2_norm()
                })
                .collect();
            let slope = fit_order(&dts, &errs);
            assert!(
                (slope - q as f64).abs() < 0.2,
                "{name} q={q}: {slope} {errs:?}"
            );
        }
    }
}
