use std::f64::consts::TAU;

use nalgebra::DMatrix;
use proptest::prelude::*;

use povmlab::catalog::{canonical_phase, phase_e1, unsharp_number};
use povmlab::exec::Exec;
use povmlab::kernels::{binomial_kernel, gaussian_kernel, normal_cdf};
use povmlab::operators::{commutator_norm, distance, operator_norm, HermitianOperator, C64};
use povmlab::povm::{additivity_error, smear, SpectralMeasure};
use povmlab::sampler::sample_categorical;
use povmlab::sets::{CircleSet, LineSet, MeasurableSet, NatSet};

fn line_set() -> impl Strategy<Value = LineSet> {
    prop::collection::vec((-10.0f64..10.0, 0.01f64..5.0), 0..4).prop_map(|pieces| {
        pieces
            .into_iter()
            .map(|(a, w)| LineSet::interval(a, a + w).unwrap())
            .fold(LineSet::empty(), |acc, s| acc.union(&s))
    })
}

fn circle_set() -> impl Strategy<Value = CircleSet> {
    prop::collection::vec((0.0f64..TAU, 0.01f64..3.0), 0..4).prop_map(|arcs| {
        arcs.into_iter()
            .map(|(a, w)| CircleSet::arc(a, a + w).unwrap())
            .fold(CircleSet::empty(), |acc, c| acc.union(&c))
    })
}

fn nat_set() -> impl Strategy<Value = NatSet> {
    (prop::collection::vec(0u64..30, 0..8), any::<bool>()).prop_map(|(v, co)| {
        if co {
            NatSet::cofinite(v)
        } else {
            NatSet::finite(v)
        }
    })
}

fn hermitian(dim: usize) -> impl Strategy<Value = HermitianOperator> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
        let raw = DMatrix::from_iterator(dim, dim, v.into_iter().map(|(re, im)| C64::new(re, im)));
        HermitianOperator::new((&raw + raw.adjoint()) * C64::new(0.5, 0.0)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn line_measure_is_modular(a in line_set(), b in line_set()) {
        let lhs = a.union(&b).lebesgue() + a.intersection(&b).lebesgue();
        prop_assert!((lhs - a.lebesgue() - b.lebesgue()).abs() < 1e-9);
        prop_assert!(a.difference(&b).intersection(&b).is_empty());
        prop_assert!(a.intersection(&b).is_subset(&a));
    }

    #[test]
    fn line_de_morgan(a in line_set(), b in line_set(), x in -12.0f64..12.0) {
        let lhs = a.union(&b).complement();
        let rhs = a.complement().intersection(&b.complement());
        prop_assert!(lhs.approx_eq(&rhs, 1e-12));
        prop_assert_eq!(a.contains(x), !a.complement().contains(x));
    }

    #[test]
    fn circle_complement_and_shift(a in circle_set(), theta in -10.0f64..10.0) {
        prop_assert!((a.length() + a.complement().length() - TAU).abs() < 1e-9);
        prop_assert!((a.shift(theta).length() - a.length()).abs() < 1e-9);
        prop_assert!(a.shift(theta).shift(-theta).approx_eq(&a, 1e-9));
    }

    #[test]
    fn nat_set_algebra(a in nat_set(), b in nat_set(), n in 0u64..40) {
        prop_assert_eq!(a.union(&b).contains(n), a.contains(n) || b.contains(n));
        prop_assert_eq!(a.intersection(&b).contains(n), a.contains(n) && b.contains(n));
        prop_assert_eq!(a.difference(&b).contains(n), a.contains(n) && !b.contains(n));
        prop_assert_eq!(a.complement().contains(n), !a.contains(n));
    }

    #[test]
    fn set_text_round_trips(a in line_set(), c in circle_set()) {
        let a = MeasurableSet::from(a);
        let c = MeasurableSet::from(c);
        let a2: MeasurableSet = a.to_string().parse().unwrap();
        let c2: MeasurableSet = c.to_string().parse().unwrap();
        prop_assert!(a.approx_eq(&a2, 1e-12));
        prop_assert!(c.approx_eq(&c2, 1e-12));
    }

    #[test]
    fn operator_norm_properties(a in hermitian(5), b in hermitian(5), s in -3.0f64..3.0) {
        let na = operator_norm(&a).unwrap();
        prop_assert!((operator_norm(&a.scale(s)).unwrap() - s.abs() * na).abs() < 1e-9);
        let max_diag = a.real_diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(na + 1e-12 >= max_diag);
        prop_assert!(operator_norm(&a.add(&b).unwrap()).unwrap() <= na + operator_norm(&b).unwrap() + 1e-9);
        prop_assert!(commutator_norm(&a, &a).unwrap() < 1e-12);
        prop_assert!(na <= a.frobenius_norm() + 1e-12);
    }

    #[test]
    fn operator_text_and_json_round_trip(a in hermitian(4)) {
        let t = HermitianOperator::from_text(&a.to_text()).unwrap();
        let j = HermitianOperator::from_json(&a.to_json()).unwrap();
        prop_assert_eq!(distance(&a, &t).unwrap(), 0.0);
        prop_assert_eq!(distance(&a, &j).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_kernel_is_a_probability(l in 0.1f64..3.0, lam in -5.0f64..5.0, a in line_set(), b in line_set()) {
        let k = gaussian_kernel(l).unwrap();
        let b = b.difference(&a);
        let (ma, mb) = (k.evaluate(lam, &a.clone().into()).unwrap(), k.evaluate(lam, &b.clone().into()).unwrap());
        let mab = k.evaluate(lam, &a.union(&b).into()).unwrap();
        prop_assert!((0.0..=1.0).contains(&ma));
        prop_assert!((ma + mb - mab).abs() < 1e-12);
        prop_assert!((k.evaluate(lam, &LineSet::full().into()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_symmetry(z in -8.0f64..8.0) {
        prop_assert!((normal_cdf(z) + normal_cdf(-z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_kernel_is_a_probability(eps in 0.01f64..0.99, m in 0u64..300, a in nat_set()) {
        let k = binomial_kernel(eps).unwrap();
        let ma = k.evaluate(m as f64, &a.clone().into()).unwrap();
        let mc = k.evaluate(m as f64, &a.complement().into()).unwrap();
        prop_assert!((ma + mc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smeared_gaussian_povm_is_normalized_and_additive(l in 0.1f64..2.0, n in 3usize..20, a in line_set(), b in line_set()) {
        let f = smear(&SpectralMeasure::uniform_grid(-4.0, 4.0, n).unwrap(), &gaussian_kernel(l).unwrap()).unwrap();
        prop_assert!(f.normalization_error().unwrap() < 1e-12);
        let b: MeasurableSet = b.difference(&a).into();
        prop_assert!(additivity_error(&f, &a.clone().into(), &b).unwrap() < 1e-12);
        let e = f.effect(&a.into()).unwrap().op().eigenvalues().unwrap();
        prop_assert!(e.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn phase_effects_are_effects(d in 2usize..24, a in circle_set(), g in -0.99f64..0.99) {
        for f in [canonical_phase(d).unwrap(), phase_e1(0, 1, g, d).unwrap()] {
            let e = f.effect(&a.clone().into()).unwrap();
            let c = f.effect(&a.complement().into()).unwrap();
            let sum = e.op().add(c.op()).unwrap();
            prop_assert!(distance(&sum, &HermitianOperator::identity(d)).unwrap() < 1e-12);
            let eig = e.op().eigenvalues().unwrap();
            prop_assert!(eig.iter().all(|&v| (-1e-10..=1.0 + 1e-10).contains(&v)));
        }
    }

    #[test]
    fn unsharp_number_complement(eps in 0.05f64..0.95, d in 1usize..120, a in nat_set()) {
        let f = unsharp_number(eps, d).unwrap();
        let s = f.effect(&a.clone().into()).unwrap().op().add(f.effect(&a.complement().into()).unwrap().op()).unwrap();
        prop_assert!(distance(&s, &HermitianOperator::identity(d)).unwrap() < 1e-12);
    }

    #[test]
    fn sampler_is_strategy_independent(p in prop::collection::vec(0.0f64..1.0, 2..12), n in 1u64..40_000, seed in any::<u64>()) {
        prop_assume!(p.iter().sum::<f64>() > 1e-3);
        let seq = sample_categorical(&p, n, seed, Exec::Sequential).unwrap();
        let par = sample_categorical(&p, n, seed, Exec::Parallel).unwrap();
        prop_assert_eq!(&seq, &par);
        prop_assert_eq!(seq.iter().sum::<u64>(), n);
        for (c, &w) in seq.iter().zip(&p) {
            if w == 0.0 {
                prop_assert_eq!(*c, 0);
            }
        }
    }
}
