use std::f64::consts::{FRAC_2_PI, SQRT_2};

use num_complex::Complex64;
use proptest::prelude::*;
use snailkit::quantum::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn lower_block_error(u: &CMatrix) -> f64 {
    let half = u.nrows() / 2;
    let g = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..half {
        for j in 0..half {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let d = a.matrix() - b.matrix();
    let eig = nalgebra::SymmetricEigen::new((&d + d.adjoint()) * c(0.5, 0.0));
    0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

fn gate() -> impl Strategy<Value = GateSpec> {
    let z = (-1.0f64..1.0, -1.0f64..1.0);
    prop_oneof![
        (-6.0f64..6.0).prop_map(GateSpec::Rotation),
        z.clone().prop_map(|(r, i)| GateSpec::Displacement(c(r, i))),
        z.clone().prop_map(|(r, i)| GateSpec::Squeeze(c(0.6 * r, 0.6 * i))),
        z.prop_map(|(r, i)| GateSpec::Trisqueeze(c(0.1 * r, 0.1 * i))),
        (-0.15f64..0.15).prop_map(GateSpec::Cubic),
    ]
}

fn family() -> impl Strategy<Value = StateSpec> {
    let z = (-1.0f64..1.0, -1.0f64..1.0);
    prop_oneof![
        Just(StateSpec::Vacuum),
        (0usize..4).prop_map(|n| StateSpec::Fock { n }),
        z.clone().prop_map(|(r, i)| StateSpec::Coherent { alpha: c(r, i) }),
        (0.0f64..0.5).prop_map(|n_th| StateSpec::Thermal { n_th }),
        z.clone().prop_map(|(r, i)| StateSpec::Squeezed { zeta: c(0.6 * r, 0.6 * i) }),
        z.clone().prop_map(|(r, i)| StateSpec::Trisqueezed { tau: c(0.1 * r, 0.1 * i) }),
        (z, -0.12f64..0.12).prop_map(|((r, i), gamma)| StateSpec::Cubic {
            zeta: c(-0.6 * r.abs(), 0.0),
            gamma,
            alpha: c(0.2 * r, 0.2 * i),
            theta: 0.0,
        }),
    ]
}

#[test]
fn cubic_generator_expands_termwise() {
    let dim = 20;
    let l = ladder_operators(dim);
    let (a, ad) = (&l.a, &l.a_dag);
    let gamma = 0.3;
    let cubic = gate_generator(&GateSpec::Cubic(gamma), dim);
    // (a + a^dag)^3 = a^3 + a^dag^3 + 3(a^dag a^2 + a^dag^2 a) + 3(a + a^dag)
    let a3 = a * a * a;
    let cross = (ad * a * a + ad * ad * a) * c(3.0, 0.0) + (a + ad) * c(3.0, 0.0);
    let expected = (&a3 + a3.adjoint() + &cross) * c(0.0, gamma / (2.0 * SQRT_2));
    // truncated products miss terms only near the top level
    for i in 0..dim - 3 {
        for j in 0..dim - 3 {
            assert!((cubic[(i, j)] - expected[(i, j)]).norm() < 1e-12, "({i}, {j})");
        }
    }
    // removing the trisqueeze-like part leaves only the cross terms
    let tri_like = (&a3 + a3.adjoint()) * c(0.0, gamma / (2.0 * SQRT_2));
    let rest = &cubic - tri_like;
    let cross_only = cross * c(0.0, gamma / (2.0 * SQRT_2));
    for i in 0..dim - 3 {
        for j in 0..dim - 3 {
            assert!((rest[(i, j)] - cross_only[(i, j)]).norm() < 1e-12);
        }
    }
}

#[test]
fn squeezed_minimum_matches_db_pairing() {
    assert!((squeezing_to_db(0.99) - 8.6).abs() < 0.1);
    assert!((squeezing_to_db(0.61) - 5.3).abs() < 0.01);
}

#[test]
fn synthetic_squeezed_map_is_recovered() {
    let truth = StateSpec::Squeezed { zeta: c(-0.8, 0.0) };
    let map = wigner(&make_state(&truth, 40).unwrap(), &PhaseGrid::square(41, 3.5));
    let guess = StateSpec::Squeezed { zeta: c(-0.5, 0.1) };
    let fit = fit_state(&map, StateFamily::Squeezed, &guess, &FitOptions::for_family(StateFamily::Squeezed)).unwrap();
    let StateSpec::Squeezed { zeta } = fit.params else { panic!("{:?}", fit.params) };
    assert!((zeta - c(-0.8, 0.0)).norm() < 1e-3, "{zeta}");
    assert!(fit.overlap > 0.999);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gates_are_unitary_in_the_lower_block(g in gate()) {
        prop_assert!(lower_block_error(&gate_unitary(&g, 40)) < 1e-8);
    }

    #[test]
    fn gate_then_inverse_is_identity(g in gate(), r in -1.0f64..1.0, i in -1.0f64..1.0) {
        let rho = make_state(&StateSpec::Coherent { alpha: c(r, i) }, 40).unwrap();
        let there = apply_gate(&rho, &g).unwrap();
        let back = apply_gate(&there, &g.inverse()).unwrap();
        prop_assert!(trace_distance(&rho, &back) < 1e-8);
    }

    #[test]
    fn family_states_satisfy_density_invariants(s in family()) {
        let rho = make_state(&s, 40).unwrap();
        prop_assert!(rho.hermiticity_error() < 1e-10);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-8);
        prop_assert!(rho.min_eigenvalue() > -1e-8);
        prop_assert!(rho.check_invariants().is_ok());
    }

    #[test]
    fn wigner_is_linear_in_the_state(s in family(), t in family(), p in 0.0f64..1.0) {
        let (rho, sigma) = (make_state(&s, 30).unwrap(), make_state(&t, 30).unwrap());
        let mix = DensityMatrix::from_matrix_unchecked(rho.matrix() * c(p, 0.0) + sigma.matrix() * c(1.0 - p, 0.0));
        let grid = PhaseGrid::square(9, 2.5);
        let (wm, wr, ws) = (wigner(&mix, &grid), wigner(&rho, &grid), wigner(&sigma, &grid));
        let expected = &wr.values * p + &ws.values * (1.0 - p);
        prop_assert!((wm.values - expected).amax() < 1e-12);
    }

    #[test]
    fn wigner_is_normalised_and_bounded(s in family()) {
        let map = wigner(&make_state(&s, 40).unwrap(), &PhaseGrid::standard());
        prop_assert!((map.integral() - 1.0).abs() < 0.03, "{}", map.integral());
        prop_assert!(map.values.amax() <= FRAC_2_PI + 1e-6);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(s in family(), t in family()) {
        let (rho, sigma) = (make_state(&s, 30).unwrap(), make_state(&t, 30).unwrap());
        let (f, g) = (fidelity(&rho, &sigma), fidelity(&sigma, &rho));
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - g).abs() < 1e-8, "{} vs {}", f, g);
        prop_assert!((fidelity(&rho, &rho) - 1.0).abs() < 1e-8);
    }
}
