//! Randomized invariants across modules.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ckn_lab::field::DiscreteField;
use ckn_lab::grid::{Grid, Spacing};
use ckn_lab::inequality::{ckn_ratio_radial, sup_bound_ratio, test_field_suite};
use ckn_lab::measure::{ball_measure, doubling_ratio, lemma_a1_check, lemma_a1_envelope, BallSpec};
use ckn_lab::moser::{lemma_a2_property_check, random_a2_instance, smallness_check};
use ckn_lab::params::{Integrability, WeightParams};
use ckn_lab::regularity::{
    campanato_profile, fit_growth, gradient_profile, mean_value_convergence, Normalization,
};
use ckn_lab::solver::{harmonic_replacement, SolverSettings};

fn params() -> impl Strategy<Value = WeightParams> {
    (3usize..=5).prop_flat_map(|n| {
        let hi = (n as f64 - 2.0) / 2.0 - 0.05;
        (Just(n), -1.0f64..hi).prop_flat_map(|(n, a)| {
            (Just(n), Just(a), a..a + 0.95)
                .prop_map(|(n, a, b)| WeightParams::validate(n, a, b, Integrability::Infinite).unwrap())
        })
    })
}

fn center(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0f64..3.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn measure_grows_with_radius((p, c) in params().prop_flat_map(|p| { let n = p.n(); (Just(p), center(n)) }),
                                 r in 0.01f64..2.0, grow in 1.05f64..3.0) {
        let m1 = ball_measure(&p, &BallSpec::new(c.clone(), r).unwrap(), 1e-10).unwrap().value;
        let m2 = ball_measure(&p, &BallSpec::new(c, r * grow).unwrap(), 1e-10).unwrap().value;
        prop_assert!(m2 > m1, "{m1} {m2}");
    }

    #[test]
    fn doubling_is_bounded((p, c) in params().prop_flat_map(|p| { let n = p.n(); (Just(p), center(n)) }),
                           r in 0.01f64..2.0, tau in 0.2f64..0.8) {
        let d = doubling_ratio(&p, &c, r, tau).unwrap();
        let n = p.n() as f64;
        let cap = 10.0 * 2f64.powf(n - 2.0 * p.a()) * tau.powf(-n);
        prop_assert!(d.is_finite() && d >= 1.0 && d < cap, "{d} {cap}");
    }

    #[test]
    fn measure_depends_on_center_norm_only(p in params(), d in 0.0f64..3.0, r in 0.05f64..2.0, seed in 0u64..1000) {
        let n = p.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir = |rng: &mut ChaCha8Rng| {
            let v: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(rng, -1.0..1.0)).collect();
            let s = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
            v.into_iter().map(|x| x * d / s).collect::<Vec<_>>()
        };
        let m1 = ball_measure(&p, &BallSpec::new(dir(&mut rng), r).unwrap(), 1e-10).unwrap().value;
        let m2 = ball_measure(&p, &BallSpec::new(dir(&mut rng), r).unwrap(), 1e-10).unwrap().value;
        prop_assert!((m1 / m2 - 1.0).abs() < 1e-8, "{m1} {m2}");
    }

    #[test]
    fn lemma_a1_ratio_within_envelope((p, c) in params().prop_flat_map(|p| { let n = p.n(); (Just(p), center(n)) }),
                                      rho in 0.001f64..5.0) {
        let eps = p.epsilon_choice().unwrap();
        let ball = BallSpec::new(c, rho).unwrap();
        let s = lemma_a1_check(&p, &ball, eps).unwrap();
        let env = lemma_a1_envelope(&p, eps, ball.center_norm() / rho);
        prop_assert!(s.ratio <= env * (1.0 + 1e-6), "{} {env}", s.ratio);
    }

    #[test]
    fn radial_ckn_quotient_is_scale_and_dilation_invariant(p in params(), lambda in 0.05f64..20.0, c in 1e-3f64..1e3) {
        let base = |r: f64| (1.0 - r * r).powi(2);
        let dbase = |r: f64| -4.0 * r * (1.0 - r * r);
        let q0 = ckn_ratio_radial(&p, base, dbase, 1.0).unwrap().ratio;
        let q = ckn_ratio_radial(&p, |r| c * base(r / lambda), |r| c * dbase(r / lambda) / lambda, lambda).unwrap().ratio;
        prop_assert!((q / q0 - 1.0).abs() <= 1e-6, "{q} {q0}");
    }

    #[test]
    fn tail_mass_nonincreasing_in_ell(amp in 0.1f64..50.0, width in 0.05f64..1.0, l1 in 1e-3f64..10.0, grow in 1.0f64..10.0) {
        let p = WeightParams::validate(3, 0.0, 0.2, Integrability::Infinite).unwrap();
        let g = Grid::radial(3, 0.0, 1.0, 128, Spacing::Uniform).unwrap();
        let v = DiscreteField::sample_radial(g, "v", |r| amp * (-(r / width).powi(2)).exp()).unwrap();
        let s1 = smallness_check(&p, &v, l1, 0.4, p.p()).unwrap();
        let s2 = smallness_check(&p, &v, l1 * grow, 0.4, p.p()).unwrap();
        prop_assert!(s1.tail_mass >= 0.0 && s2.tail_mass <= s1.tail_mass * (1.0 + 1e-12));
        prop_assert_eq!(s1.satisfied, s1.tail_mass <= s1.bound_required);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extremal_profiles_satisfy_the_iteration_lemma(seed in 0u64..10_000, index in 0usize..64) {
        let inst = random_a2_instance(seed, index).unwrap();
        prop_assert!(inst.envelope.tau > 0.0 && inst.envelope.tau <= 0.5);
        let rep = lemma_a2_property_check(&inst, 40, seed ^ 0x5eed);
        prop_assert!(rep.pass(), "{:?}", inst.envelope);
    }

    #[test]
    fn harmonic_replacement_is_an_energy_projection(a in -0.5f64..0.45, seed in 0u64..1000,
                                                   cx in -0.2f64..0.2, cy in -0.2f64..0.2, rad in 0.4f64..0.7) {
        let p = WeightParams::validate(3, a, a, Integrability::Infinite).unwrap();
        let g = Grid::cube(1.0, 12).unwrap();
        let u = test_field_suite(&p, &g, seed, 1).unwrap().remove(0);
        let ball = BallSpec::new(vec![cx, cy, 0.0], rad).unwrap();
        let tol = 1e-10;
        let w = harmonic_replacement(&p, &u, &ball, SolverSettings { tol, max_iter: 10_000 }).unwrap();
        let eu = u.dirichlet_energy(&p).unwrap();
        let ew = w.dirichlet_energy(&p).unwrap();
        let ed = u.zip_with(&w, |x, y| x - y).unwrap().dirichlet_energy(&p).unwrap();
        // Pythagoras: u - w is energy-orthogonal to w
        prop_assert!(ed + ew <= eu * (1.0 + 1e-6) + 1e-12, "{ed} + {ew} vs {eu}");
        prop_assert!((ed + ew - eu).abs() <= 1e-6 * eu.max(1e-300) + 1e-12);
    }
}

#[test]
fn campanato_and_gradient_readouts_agree_on_smooth_fields() {
    let g = Grid::cube(1.0, 48).unwrap();
    let h = g.cell_width();
    let radii: Vec<f64> = [16.0, 12.0, 8.0, 6.0].iter().map(|k| k * h * (1.0 + 1e-9)).collect();
    for (a, dir) in [(0.0, [1.0, 0.0, 0.0]), (0.3, [0.6, 0.8, 0.0]), (-0.5, [0.0, 0.6, 0.8])] {
        let p = WeightParams::validate(3, a, a, Integrability::Infinite).unwrap();
        let u = DiscreteField::sample(g.clone(), "smooth", |x| {
            dir[0] * x[0] + dir[1] * x[1] + dir[2] * x[2] + 0.3 * x[0] * x[1] + 2.0
        })
        .unwrap();
        for c in [[0.0; 3], [0.125, -0.0625, 0.0]] {
            let readout = |prof| fit_growth(&p, &prof, Normalization::MeasureNormalized).unwrap().alpha.unwrap();
            let ca = readout(campanato_profile(&p, &u, &c, &radii).unwrap());
            let ga = readout(gradient_profile(&p, &u, &c, &radii).unwrap());
            assert!((ca - ga).abs() <= 0.1, "a={a} {c:?}: campanato {ca} gradient {ga}");
        }
    }
}

#[test]
fn ball_means_converge_to_point_values() {
    let g = Grid::cube(1.0, 48).unwrap();
    let h = g.cell_width();
    let radii: Vec<f64> = [6.0, 4.0, 3.0, 2.0].iter().map(|k| k * h * (1.0 + 1e-9)).collect();
    // the r^2 term of |x|^2 keeps a fixed sign for every admissible a, so the
    // decay is not masked by the discretization floor
    let u = DiscreteField::sample(g.clone(), "smooth", |x| 1.0 + x.iter().map(|v| v * v).sum::<f64>()).unwrap();
    // a smooth field has alpha_measured = 1
    for a in [0.0, 0.25, -0.4] {
        let p = WeightParams::validate(3, a, a, Integrability::Infinite).unwrap();
        let probes = mean_value_convergence(&p, &u, &radii, 30, 42).unwrap();
        assert_eq!(probes.len(), 30);
        for pr in probes {
            let rate = pr.rate.expect("ball means differ from point values");
            assert!(rate >= 0.9, "a={a} node {} at |x|={}: {rate}", pr.node, g.node_radius(pr.node));
        }
    }
}

#[test]
fn sup_bound_is_uniform_over_harmonic_fields() {
    let g = Grid::cube(1.0, 16).unwrap();
    for a in [-0.5, 0.0, 0.4] {
        let p = WeightParams::validate(3, a, a, Integrability::Infinite).unwrap();
        let ball = BallSpec::new(vec![0.0; 3], 0.8).unwrap();
        let mut worst: f64 = 0.0;
        for u in test_field_suite(&p, &g, 9, 12).unwrap() {
            let w = harmonic_replacement(&p, &u, &ball, SolverSettings { tol: 1e-10, max_iter: 10_000 }).unwrap();
            let r = sup_bound_ratio(&p, &w, &ball).unwrap();
            if r.rhs_core > 0.0 {
                worst = worst.max(r.ratio);
            }
        }
        assert!(worst.is_finite() && worst > 0.0 && worst < 10.0, "a={a}: {worst}");
    }
}
