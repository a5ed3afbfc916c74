use proptest::prelude::*;
use scurves::cli::{render_svg, SvgArtifacts};
use scurves::contours::ContourSystem;
use scurves::fields::ExternalField;
use scurves::measures::{solve_equilibrium, DiscreteMeasure};
use scurves::orthopoly::heine_stieltjes;
use scurves::{c64, poly, C64};

fn point() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y)| c64(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn equilibrium_is_a_probability_measure(a in point(), d in point(), mass in 0.2..3.0f64) {
        prop_assume!(d.norm() > 0.1);
        let seg = ContourSystem::segment(a, a + d);
        let eq = solve_equilibrium(&seg, &ExternalField::quadratic(c64(0.3, 0.1)), mass, 60, 1e-9).unwrap();
        prop_assert!(eq.measure.weights().iter().all(|&w| w >= 0.0));
        prop_assert!((eq.measure.weights().iter().sum::<f64>() - mass).abs() <= 1e-9 * mass);
        prop_assert!(eq.residual_eq <= 1e-9 && eq.residual_ineq <= 1e-9);
    }

    // log(1/|rz - rw|) = log(1/|z - w|) - log r, cell self-energies included
    #[test]
    fn rigid_motions_shift_the_constant(shift in point(), angle in 0.0..std::f64::consts::TAU, r in 0.2..5.0f64) {
        let base = solve_equilibrium(&ContourSystem::segment(c64(-1.0, 0.0), c64(1.0, 0.0)), &ExternalField::Zero, 1.0, 80, 1e-10).unwrap();
        let m = C64::from_polar(r, angle);
        let moved = ContourSystem::segment(shift - m, shift + m);
        let eq = solve_equilibrium(&moved, &ExternalField::Zero, 1.0, 80, 1e-10).unwrap();
        prop_assert!((eq.constant_w - (base.constant_w - r.ln())).abs() <= 1e-8);
        prop_assert!((eq.energy - (base.energy - r.ln())).abs() <= 1e-8);
    }

    #[test]
    fn roots_rebuild_their_polynomial(roots in prop::collection::vec(point(), 1..9)) {
        let p = poly::from_roots(&roots);
        let found = poly::roots(&p);
        prop_assert_eq!(found.len(), roots.len());
        let q = poly::from_roots(&found);
        let scale = p.iter().map(|c| c.norm()).fold(1.0, f64::max);
        for (x, y) in p.iter().zip(&q) {
            prop_assert!((x - y).norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn legendre_zeros_are_real_symmetric_and_interlace(n in 2usize..14) {
        let a = poly::real(&[-1.0, 0.0, 1.0]);
        let b = poly::real(&[0.0, 2.0]);
        let zeros = |n: usize| {
            let mut z: Vec<f64> = heine_stieltjes(&a, &b, n, 0).unwrap()[0].q.zeros.iter().map(|z| z.re).collect();
            z.sort_by(f64::total_cmp);
            z
        };
        let (lo, hi) = (zeros(n), zeros(n + 1));
        for (x, y) in lo.iter().zip(lo.iter().rev()) {
            prop_assert!((x + y).abs() <= 1e-12);
        }
        prop_assert!(lo.iter().all(|x| x.abs() < 1.0));
        for (k, x) in lo.iter().enumerate() {
            prop_assert!(hi[k] < *x && *x < hi[k + 1]);
        }
    }

    #[test]
    fn svg_draws_every_atom(nodes in prop::collection::vec(point(), 1..30)) {
        let weights: Vec<f64> = (0..nodes.len()).map(|k| 1.0 + k as f64).collect();
        let mu = DiscreteMeasure::new(nodes.clone(), weights).unwrap();
        let art = SvgArtifacts { measures: vec![mu], ..Default::default() };
        let s = render_svg(&art);
        prop_assert_eq!(s.matches("<circle").count(), nodes.len());
        prop_assert_eq!(s, render_svg(&art));
    }
}
