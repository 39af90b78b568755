use nonmarkov::operator::{hermitian_eigenvalues, min_choi_eigenvalue};
use nonmarkov::random;
use nonmarkov::{
    adjoint, certify, certify_with, choi, expm_superop, gksl, hs_inner, kernel_at, lidar_shabani, GkslSpec,
    LidarShabaniParams, Operator64, SuperOperator64, Thresholds, Verdict,
};
use num_complex::Complex;
use proptest::prelude::*;

fn setup() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 1usize..=4)
}

/// Direct evaluation of `a ↦ Σ v† a v`, without going through `vec`.
fn kraus_apply(kraus: &[Operator64], a: &Operator64) -> Operator64 {
    let mut out = Operator64::zeros(a.dim());
    for v in kraus {
        out = &out + &(&(&v.adjoint() * a) * v);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duality_relation((seed, d) in setup()) {
        let mut rng = random::rng(seed);
        let s: SuperOperator64 = random::superoperator(&mut rng, d);
        let a: Operator64 = random::operator(&mut rng, d);
        let b: Operator64 = random::operator(&mut rng, d);
        let lhs = hs_inner(&adjoint(&s).apply(&a).unwrap(), &b).unwrap();
        let rhs = hs_inner(&a, &s.apply(&b).unwrap()).unwrap();
        let scale = s.norm() * a.norm() * b.norm();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn adjoint_is_an_involution((seed, d) in setup()) {
        let mut rng = random::rng(seed);
        let s: SuperOperator64 = random::superoperator(&mut rng, d);
        prop_assert_eq!(adjoint(&adjoint(&s)), s);
    }

    #[test]
    fn choi_is_linear((seed, d) in setup(), alpha in -3.0f64..3.0, beta_re in -3.0f64..3.0, beta_im in -3.0f64..3.0) {
        let mut rng = random::rng(seed);
        let s: SuperOperator64 = random::superoperator(&mut rng, d);
        let t: SuperOperator64 = random::superoperator(&mut rng, d);
        let beta = Complex::new(beta_re, beta_im);
        let combined = &s.scale(alpha) + &t.scale_complex(beta);
        let expected = choi(&s) * Complex::new(alpha, 0.0) + choi(&t) * beta;
        let err = (choi(&combined) - &expected).norm();
        prop_assert!(err <= 1e-13 * (1.0 + expected.norm()));
    }

    #[test]
    fn kraus_maps_match_direct_evaluation_and_are_cp((seed, d) in setup(), count in 1usize..=4) {
        let mut rng = random::rng(seed);
        let kraus: Vec<Operator64> = random::kraus_list(&mut rng, d, count);
        let s = SuperOperator64::from_kraus(d, &kraus).unwrap();
        for _ in 0..3 {
            let a: Operator64 = random::operator(&mut rng, d);
            let diff = &s.apply(&a).unwrap() - &kraus_apply(&kraus, &a);
            prop_assert!(diff.norm() <= 1e-12 * (1.0 + s.norm() * a.norm()));
        }
        let cert = certify(&s, 1e-9).unwrap();
        prop_assert_eq!(cert.verdict, Verdict::Cp);
        prop_assert!(cert.min_choi_eigenvalue >= -1e-12);
    }

    #[test]
    fn cp_is_closed_under_composition_and_cone((seed, d) in setup(), w1 in 0.0f64..5.0, w2 in 0.0f64..5.0) {
        let mut rng = random::rng(seed);
        let s = SuperOperator64::from_kraus(d, &random::kraus_list(&mut rng, d, 2)).unwrap();
        let t = SuperOperator64::from_kraus(d, &random::kraus_list(&mut rng, d, 3)).unwrap();
        let composed = s.compose(&t).unwrap();
        let cone = &s.scale(w1) + &t.scale(w2);
        for map in [composed, cone] {
            let scale = choi(&map).norm().max(1.0);
            let th = Thresholds::new(1e-12 * scale, 1e-9 * scale).unwrap();
            prop_assert_eq!(certify_with(&map, &th).verdict, Verdict::Cp);
        }
    }

    #[test]
    fn unitality_iff_trace_preservation((seed, d) in setup(), eps in prop_oneof![Just(0.0), 1e-8f64..1.0]) {
        let mut rng = random::rng(seed);
        let channel: SuperOperator64 = random::unital_channel(&mut rng, d, 3);
        let perturbation: SuperOperator64 = random::superoperator(&mut rng, d);
        let s = &channel + &perturbation.scale(eps / perturbation.norm());
        let cert = certify(&s, 1e-9).unwrap();
        let u = cert.unitality_residual;
        let t = cert.trace_residual;
        // tr(S†a) − tr(a) = ⟨S(1) − 1, a⟩, so the basis maximum is the largest entry of S(1) − 1.
        prop_assert!(t <= u + 1e-13);
        prop_assert!(u <= d as f64 * t + 1e-13);
        if eps == 0.0 {
            prop_assert!(u <= 1e-12 && t <= 1e-12);
        }
    }

    #[test]
    fn gksl_generates_cp_unital_semigroup((seed, d) in setup(), count in 0usize..=3) {
        let mut rng = random::rng(seed);
        let h: Operator64 = random::hermitian(&mut rng, d);
        let kraus: Vec<Operator64> = random::kraus_list(&mut rng, d, count);
        let l = gksl(&GkslSpec::new(h, kraus)).unwrap();
        for t in [0.1, 1.0, 5.0] {
            let e = expm_superop(&l, t);
            let cert = certify(&e, 1e-9).unwrap();
            prop_assert_eq!(cert.verdict, Verdict::Cp, "t = {}, min = {:e}", t, cert.min_choi_eigenvalue);
            prop_assert!(cert.min_choi_eigenvalue >= -1e-10);
            prop_assert!(cert.unitality_residual <= 1e-9);
        }
    }

    #[test]
    fn lidar_shabani_kernel_samples((seed, d) in setup(), kappa in 0.1f64..3.0, gamma in 0.0f64..3.0) {
        let mut rng = random::rng(seed);
        let channel: SuperOperator64 = random::unital_channel(&mut rng, d, 2);
        let params = LidarShabaniParams::new(kappa, gamma, channel.clone());
        let kernel = lidar_shabani(&params).unwrap();
        let id = SuperOperator64::identity(d);
        for t in [0.0, 0.37, 1.0, 4.0] {
            let sample = kernel_at(&kernel, t).unwrap();
            prop_assert!(min_choi_eigenvalue(&sample.b) >= -1e-12);
            prop_assert!(sample.l.apply_unit().norm() <= 1e-12);
            let expected = (&channel - &id).scale(params.k(t));
            prop_assert!((sample.l.matrix() - expected.matrix()).camax() <= 1e-12);
        }
    }
}

#[test]
fn choi_spectra_of_identity_and_transpose() {
    let mut id = hermitian_eigenvalues(&choi(&SuperOperator64::identity(2)));
    id.sort_by(|a, b| b.total_cmp(a));
    for (x, y) in id.iter().zip([2.0, 0.0, 0.0, 0.0]) {
        assert!((x - y).abs() < 1e-12);
    }
    let mut tr = hermitian_eigenvalues(&choi(&SuperOperator64::transpose_map(2)));
    tr.sort_by(|a, b| b.total_cmp(a));
    for (x, y) in tr.iter().zip([1.0, 1.0, 1.0, -1.0]) {
        assert!((x - y).abs() < 1e-12);
    }
}
