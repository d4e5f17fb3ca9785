use nlads::kernel::KernelSpec;
use nlads::rhodynamics::*;
use nlads::system::{InitialData, InteractionSystem};
use nlads::Error;
use proptest::prelude::*;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn models(n: usize) -> impl Strategy<Value = PhiModel> {
    (
        proptest::collection::vec(proptest::collection::vec(0.0f64..3.0, n), n),
        proptest::collection::vec(proptest::collection::vec(0.1f64..3.0, n), n),
    )
        .prop_map(|(a, l)| PhiModel::from_parts(a, l))
}

fn cycles_below_one() -> impl Strategy<Value = PhiModel> {
    (0.1f64..10.0, 0.1f64..10.0, 0.1f64..0.9, 0.1f64..0.9).prop_map(|(a12, a21, l12, l21)| {
        PhiModel::from_parts(vec![vec![0.0, a12], vec![a21, 0.0]], vec![vec![1.0, l12], vec![l21, 1.0]])
    })
}

fn cycles_above_one() -> impl Strategy<Value = PhiModel> {
    (0.2f64..5.0, 0.2f64..5.0, 1.1f64..3.0, 1.1f64..3.0).prop_map(|(a12, a21, l12, l21)| {
        PhiModel::from_parts(vec![vec![0.0, a12], vec![a21, 0.0]], vec![vec![2.0, l12], vec![l21, 2.0]])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn phi_is_monotone(m in models(3), x in proptest::collection::vec(0.0f64..5.0, 3), dx in proptest::collection::vec(0.0f64..5.0, 3)) {
        let y: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let fx = phi_eval(&m, &x);
        let fy = phi_eval(&m, &y);
        for i in 0..3 {
            prop_assert!(fx[i] <= fy[i] * (1.0 + 1e-14));
        }
    }

    #[test]
    fn phi_is_linear_in_a(m in models(3), x in proptest::collection::vec(0.0f64..5.0, 3), t in 0.1f64..10.0) {
        let mut mt = m.clone();
        for row in mt.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= t;
            }
        }
        let f = phi_eval(&m, &x);
        let ft = phi_eval(&mt, &x);
        for i in 0..3 {
            prop_assert!((ft[i] - t * f[i]).abs() <= 1e-12 * (1.0 + ft[i]));
        }
    }

    #[test]
    fn two_cycle_closed_form_is_a_fixed_point(m in cycles_below_one()) {
        let r = fixed_point_2cycle(&m).unwrap();
        let rho = r.rho_star.unwrap();
        prop_assert!(residual(&m, &rho) <= 1e-10 * (1.0 + sup(&rho)));
        prop_assert!(rho.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn two_cycle_iteration_agrees(m in cycles_below_one()) {
        let closed = fixed_point_2cycle(&m).unwrap().rho_star.unwrap();
        let (it, _, res) = damped_iteration(&m, &[1.0, 1.0], 0.5, 100_000);
        prop_assert!(res <= 1e-10 * (1.0 + sup(&it)));
        for i in 0..2 {
            prop_assert!((it[i] - closed[i]).abs() <= 1e-10 * (1.0 + closed[i]), "{:?} vs {:?}", it, closed);
        }
    }

    #[test]
    fn bracketed_agrees_with_closed_form(m in cycles_above_one()) {
        let closed = fixed_point_2cycle(&m).unwrap().rho_star.unwrap();
        let b = fixed_point_bracketed(&m).unwrap();
        prop_assume!(b.kind != FixedPointKind::NotFound);
        let rho = b.rho_star.unwrap();
        prop_assert!(b.residual <= 1e-10 * (1.0 + sup(&rho)));
        for i in 0..2 {
            prop_assert!((rho[i] - closed[i]).abs() <= 1e-10 * (1.0 + closed[i]), "{:?} vs {:?}", rho, closed);
        }
    }

    #[test]
    fn brackets_enclose_the_fixed_point(m in cycles_above_one()) {
        let (r1, r2) = bracket_radii(&m).unwrap();
        prop_assert!(r1 <= r2 * (1.0 + 1e-12));
        let rho = fixed_point_2cycle(&m).unwrap().rho_star.unwrap();
        let s = sup(&rho);
        prop_assert!(s >= r1 * (1.0 - 1e-9) && s <= r2 * (1.0 + 1e-9), "{r1} ≤ {s} ≤ {r2}");
    }

    #[test]
    fn bracket_spheres(m in cycles_above_one(), t in 0.0f64..1.0) {
        // on the r1-sphere Φ shrinks, on the r2-sphere it grows (sup norm)
        let (r1, r2) = bracket_radii(&m).unwrap();
        for (r, shrink) in [(r1, true), (r2, false)] {
            for x in [vec![r, r * t], vec![r * t, r]] {
                let f = sup(&phi_eval(&m, &x));
                if shrink {
                    prop_assert!(f <= r * (1.0 + 1e-12));
                } else if x.iter().all(|&v| v > 0.0) {
                    prop_assert!(f >= r * (1.0 - 1e-12) || t < 1e-3);
                }
            }
        }
    }

    #[test]
    fn single_species_trichotomy_below_one(star in 0.1f64..10.0, l in 0.1f64..0.9, rho0 in 0.01f64..20.0) {
        // parametrized by ρ* (a = ρ*^{1−λ}) to keep the ODE non-stiff
        let m = PhiModel::from_parts(vec![vec![star.powf(1.0 - l)]], vec![vec![l]]);
        let star = fixed_point_1species(&m).unwrap().rho_star.unwrap()[0];
        let rate = m.c[0] * star * star * (1.0 - l);
        // linear relaxation plus the ρ' ≈ Caρ^{2+λ} growth phase from below
        let growth = 1.0 / (m.c[0] * m.a[0][0] * (1.0 + l) * rho0.min(star).powf(1.0 + l));
        let traj = comparison_ode_adaptive(&m, &[rho0], 40.0 / rate + growth + 10.0, 1e-3);
        let last = traj.rho.last().unwrap()[0];
        prop_assert!(last <= star + 1e-6, "{last} > {star}");
        prop_assert!((last - star).abs() <= 1e-6 * (1.0 + star), "{last} vs {star}");
        prop_assert!(invariant_rectangle_check(&[star], &traj.rho));
    }

    #[test]
    fn single_species_trichotomy_above_one(star in 0.1f64..10.0, l in 1.2f64..3.0, frac in 0.05f64..0.95) {
        let m = PhiModel::from_parts(vec![vec![star.powf(1.0 - l)]], vec![vec![l]]);
        let star = fixed_point_1species(&m).unwrap().rho_star.unwrap()[0];
        let traj = comparison_ode_adaptive(&m, &[frac * star], 1e16, 1e-3);
        prop_assert!(traj.rho.last().unwrap()[0] < 1e-6);
        prop_assert!(invariant_rectangle_check(&[star], &traj.rho));
    }
}

#[test]
fn documented_examples() {
    let m = PhiModel::from_parts(vec![vec![4.0]], vec![vec![0.5]]);
    assert!((fixed_point_1species(&m).unwrap().rho_star.unwrap()[0] - 16.0).abs() < 1e-12);
    let m = PhiModel::from_parts(vec![vec![0.5]], vec![vec![1.0]]);
    assert!(matches!(fixed_point_1species(&m), Err(Error::LambdaOne)));

    let m = PhiModel::from_parts(vec![vec![0.0, 2.0], vec![0.5, 0.0]], vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
    let r = fixed_point_2cycle(&m).unwrap().rho_star.unwrap();
    assert!((r[0] - 2f64.powf(2.0 / 3.0)).abs() < 1e-12);
    assert!((r[1] - 2f64.powf(-2.0 / 3.0)).abs() < 1e-12);
    let m = PhiModel::from_parts(vec![vec![0.0, 2.0], vec![0.5, 0.0]], vec![vec![1.0, 2.0], vec![0.5, 1.0]]);
    assert!(matches!(fixed_point_2cycle(&m), Err(Error::DegenerateCycle(_))));

    let m = PhiModel::from_parts(vec![vec![0.25]], vec![vec![2.0]]);
    let b = fixed_point_bracketed(&m).unwrap();
    assert!((b.rho_star.unwrap()[0] - 4.0).abs() < 1e-10);
    let (r1, _) = b.bracket.unwrap();
    assert!((r1 - 4.0).abs() < 1e-12);

    let m = PhiModel::from_parts(vec![vec![0.0, 1.0], vec![0.0, 4.0]], vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    let u = unilateral_mass_condition(&m).unwrap();
    let rho = u.rho_star.unwrap();
    assert!((rho[0] - 0.25).abs() < 1e-12 && (rho[1] - 0.25).abs() < 1e-12);
}

#[test]
fn coefficients_scale_with_mass() {
    let mut sys = InteractionSystem::new(
        vec![0.1, 0.2],
        vec![vec![KernelSpec::ws(1.0, 3.75), KernelSpec::ws(0.5, 2.4)], vec![KernelSpec::zero(), KernelSpec::ws(2.0, 3.0)]],
        vec![InitialData::indicator(), InitialData::indicator()],
    );
    let base = coefficients_from_system(&sys, 0.42).unwrap();
    assert!((base.lambda[0][0] - 11.0 / 15.0).abs() < 1e-15);
    assert_eq!(base.a[1][0], 0.0);
    sys.initial[1] = InitialData::Indicator { left: -1.0, right: 1.0, height: 2.0 };
    let doubled = coefficients_from_system(&sys, 0.42).unwrap();
    for i in 0..2 {
        assert_eq!(doubled.a[i][0], base.a[i][0]);
        assert!((doubled.a[i][1] - 2.0 * base.a[i][1]).abs() < 1e-14 * (1.0 + base.a[i][1]));
    }
}

#[test]
fn ode_starts_at_rest_on_the_fixed_point() {
    let m = PhiModel::from_parts(vec![vec![4.0]], vec![vec![0.5]]);
    let t = comparison_ode_integrate(&m, &[16.0], 1.0, 1e-3).unwrap();
    assert!(t.rho.iter().all(|r| (r[0] - 16.0).abs() < 1e-12));
    let big = comparison_ode_integrate(&m, &[100.0], 1.0, 1.0);
    assert!(matches!(big, Err(Error::StepTooLarge { .. })));
}
