//! Property tests for jets, the graded algebra and the codifferential.

use approx::assert_abs_diff_eq;
use crtractor::algebra::{kostant_codifferential, Cochain, Codifferential, SoMatrix};
use crtractor::jet::Jet;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ORDER: usize = 4;

fn sample_jets(p: &[f64]) -> (Jet, Jet) {
    let x = Jet::seed(p, 3, ORDER);
    let f = &(&x[0].sin() * &x[1]) + &(&x[2] * 0.3).exp();
    let g = &(&(&x[0] * &x[1]) * &x[2]) + &(&x[1] * &x[1]).cos();
    (f, g)
}

fn coeff_diff(a: &Jet, b: &Jet) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jet_product_rule(p in prop::array::uniform3(-1.5f64..1.5), v in 0usize..3) {
        let (f, g) = sample_jets(&p);
        let lhs = (&f * &g).d(v);
        let low = ORDER - 1;
        let rhs = &(&f.d(v) * &g.truncate(low)) + &(&f.truncate(low) * &g.d(v));
        prop_assert!(coeff_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn jet_chain_rule_and_inverse(p in prop::array::uniform3(-1.5f64..1.5), v in 0usize..3) {
        let (f, _) = sample_jets(&p);
        let low = ORDER - 1;
        let lhs = f.sin().d(v);
        let rhs = &f.cos().truncate(low) * &f.d(v);
        prop_assert!(coeff_diff(&lhs, &rhs) < 1e-10);
        prop_assert!(coeff_diff(&f.exp().ln(), &f) < 1e-10);
    }

    #[test]
    fn jacobi_identity(seed in any::<u64>(), n in prop::sample::select(vec![3usize, 4, 5])) {
        let mut r = rng(seed);
        let (x, y, z) = (SoMatrix::random(n, &mut r), SoMatrix::random(n, &mut r), SoMatrix::random(n, &mut r));
        let j = x.bracket(&y.bracket(&z).unwrap()).unwrap()
            .add(&y.bracket(&z.bracket(&x).unwrap()).unwrap())
            .add(&z.bracket(&x.bracket(&y).unwrap()).unwrap());
        prop_assert!(j.max_abs() < 1e-10);
    }

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>(), n in 3usize..6) {
        let mut r = rng(seed);
        let (x, y) = (SoMatrix::random(n, &mut r), SoMatrix::random(n, &mut r));
        let s = x.bracket(&y).unwrap().add(&y.bracket(&x).unwrap());
        prop_assert!(s.max_abs() < 1e-12);
        prop_assert!(x.bracket(&y).unwrap().membership_defect() < 1e-10);
    }

    #[test]
    fn grading_is_complete_and_compatible(seed in any::<u64>(), n in 3usize..6) {
        let mut r = rng(seed);
        let x = SoMatrix::random(n, &mut r);
        let y = SoMatrix::random(n, &mut r);
        let parts: Vec<SoMatrix> = (-1..=1).map(|k| x.grade_project(k).unwrap()).collect();
        let sum = parts.iter().fold(SoMatrix::zero(n), |a, b| a.add(b));
        assert_abs_diff_eq!((sum.matrix() - x.matrix()).amax(), 0.0, epsilon = 1e-14);
        for i in -1..=1i32 {
            for j in -1..=1i32 {
                let b = x.grade_project(i).unwrap().bracket(&y.grade_project(j).unwrap()).unwrap();
                for k in -1..=1i32 {
                    if k != i + j {
                        prop_assert!(b.grade_project(k).unwrap().max_abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn codifferential_squares_to_zero(seed in any::<u64>(), n in 3usize..5) {
        let phi = Cochain::random2(n, &mut rng(seed));
        let Codifferential::Cochain(once) = kostant_codifferential(&phi).unwrap() else {
            panic!("degree-2 input must give a cochain");
        };
        let Codifferential::Element(twice) = kostant_codifferential(&once).unwrap() else {
            panic!("degree-1 input must give an element");
        };
        prop_assert!(twice.max_abs() < 1e-12);
    }
}
