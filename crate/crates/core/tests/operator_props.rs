mod common;

use effop::operator::{loewner_leq, schur_complement};
use effop::random;
use effop::{BlockPartition, Complex64, Operator};
use nalgebra::DMatrix;
use proptest::prelude::*;

type C = Complex64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schur_matches_full_solve(seed in any::<u64>(), d0 in 1usize..6, d1 in 1usize..8) {
        let mut rng = random::rng(seed);
        let a = random::psd::<C, _>(&mut rng, d0 + d1);
        let s = schur_complement(&a, &BlockPartition::split(d0, d1)).unwrap();
        let x0 = common::random_vector::<C, _>(&mut rng, d0);
        // Unknowns (x1, w0) of [A00 A01; A10 A11][x0; x1] = [w0; 0].
        let n = d0 + d1;
        let m = a.matrix();
        let mut k = DMatrix::<C>::zeros(n, n);
        k.view_mut((0, 0), (n, d1)).copy_from(&m.columns(d0, d1));
        for i in 0..d0 {
            k[(i, d1 + i)] = -C::new(1.0, 0.0);
        }
        let rhs = -(m.columns(0, d0) * &x0);
        let sol = k.lu().solve(&rhs).unwrap();
        let w0 = sol.rows(d1, d0).into_owned();
        let got = s.matrix() * &x0;
        prop_assert!((got - &w0).norm() <= 1e-10 * w0.norm().max(1e-300));
    }

    #[test]
    fn schur_of_positive_operator_is_below_its_corner(seed in any::<u64>(), d0 in 1usize..5, d1 in 1usize..6) {
        let mut rng = random::rng(seed);
        let a = random::psd::<C, _>(&mut rng, d0 + d1);
        let part = BlockPartition::split(d0, d1);
        let s = schur_complement(&a, &part).unwrap();
        prop_assert!(s.self_adjoint_residual() < 1e-10);
        prop_assert!(loewner_leq(&s.re_part().unwrap(), &a.block(&part, 0, 0), 1e-9).unwrap());
    }

    #[test]
    fn loewner_order_on_exact_diagonals(a in prop::collection::vec(-8i32..8, 4), da in prop::collection::vec(0i32..4, 4), db in prop::collection::vec(0i32..4, 4)) {
        let diag = |v: &[i32]| Operator::<f64>::from_diagonal(&v.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let x = diag(&a);
        let y = diag(&a.iter().zip(&da).map(|(p, q)| p + q).collect::<Vec<_>>());
        let z = diag(&a.iter().zip(&da).zip(&db).map(|((p, q), r)| p + q + r).collect::<Vec<_>>());
        prop_assert!(loewner_leq(&x, &x, 0.0).unwrap());
        prop_assert!(loewner_leq(&x, &y, 0.0).unwrap());
        prop_assert!(loewner_leq(&y, &z, 0.0).unwrap());
        prop_assert!(loewner_leq(&x, &z, 0.0).unwrap());
    }

    #[test]
    fn real_and_skew_parts_split_the_operator(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = random::rng(seed);
        let a = random::matrix::<C, _>(&mut rng, n, n);
        let re = a.re_part().unwrap();
        let sk = a.skew_part().unwrap();
        prop_assert!((&re + &sk).rel_diff(&a) < 1e-15);
        prop_assert!((&sk.adjoint() + &sk).norm() == 0.0);
        prop_assert!(re.self_adjoint_residual() == 0.0);
        prop_assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn orthonormal_basis_reproduces_projection(seed in any::<u64>(), n in 1usize..8, r in 0usize..8) {
        let r = r.min(n);
        let mut rng = random::rng(seed);
        let q = random::unitary::<C, _>(&mut rng, n).submatrix(0, n, 0, r);
        let p = &q * &q.adjoint();
        let b = effop::operator::orthonormal_basis(&p, 1e-10).unwrap();
        prop_assert_eq!(b.cols(), r);
        prop_assert!((&b.adjoint() * &b).rel_diff(&Operator::identity(r)) < 1e-12);
        prop_assert!((&b * &b.adjoint()).rel_diff(&p) < 1e-12 || r == 0);
    }
}
