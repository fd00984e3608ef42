use falsetheta::kernel::{GaussianDerivative, PeriodicBernoulli};
use falsetheta::maass::{self, a_mu, a_mu_class, ShiftVector};
use falsetheta::modular::{self, dedekind_sum, ModularMatrix, ModularTriple};
use falsetheta::qseries::QExpansion;
use falsetheta::report::format_float;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use proptest::prelude::*;

fn word(letters: &[u8]) -> ModularMatrix {
    let t_inv = ModularMatrix { a: 1, b: -1, c: 0, d: 1 };
    letters.iter().fold(ModularMatrix::IDENTITY, |m, &g| {
        let x = match g % 3 {
            0 => ModularMatrix::S,
            1 => ModularMatrix::T,
            _ => t_inv,
        };
        m.mul(&x)
    })
}

fn shifts() -> Vec<ShiftVector> {
    (0..3).flat_map(|j| maass::family(j).signed().map(|(mu, _)| mu).collect::<Vec<_>>()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplier_is_a_homomorphism(a in prop::collection::vec(0u8..3, 0..8), b in prop::collection::vec(0u8..3, 0..8)) {
        let (ma, mb) = (word(&a), word(&b));
        let lhs = modular::psi_vector(&ma.mul(&mb)).unwrap();
        let rhs = modular::psi_vector(&ma).unwrap().mul(&modular::psi_vector(&mb).unwrap());
        prop_assert!(lhs.max_diff(&rhs) < 1e-10);
    }

    #[test]
    fn multiplier_is_unitary(a in prop::collection::vec(0u8..3, 0..10)) {
        let psi = modular::psi_vector(&word(&a)).unwrap();
        prop_assert!(psi.unitarity_defect() < 1e-12);
    }

    #[test]
    fn residue_classes_partition_the_count(idx in 0usize..24, c in 1i64..6, m in 0i64..15, negative: bool) {
        let mu = shifts()[idx];
        let base = mu.q48().rem_euclid(48);
        let n48 = if negative { base - 48 * (m + 1) } else { base + 48 * m };
        prop_assume!(n48 != 0);
        let n = Ratio::new(n48, 48);
        let total = a_mu(mu, n).unwrap();
        let mut sum = Ratio::from_integer(0);
        for r1 in 0..c {
            for r2 in 0..c {
                sum += a_mu_class(mu, c, (r1, r2), n).unwrap();
            }
        }
        prop_assert_eq!(sum, total);
    }

    #[test]
    fn gaussian_derivative_matches_finite_differences(n1 in 0usize..3, n2 in 0usize..3, x1 in -0.3f64..0.3, x2 in -0.3f64..0.3) {
        let g = GaussianDerivative::new(n1, n2);
        let next = GaussianDerivative::new(n1 + 1, n2);
        let h = 1e-3;
        let f = |t: f64| g.eval_f64(x1 + t, x2);
        // five-point central stencil
        let fd = (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
        let exact = next.eval_f64(x1, x2);
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{} vs {}", fd, exact);
    }

    #[test]
    fn dedekind_reciprocity(h in 1i64..300, k in 1i64..300) {
        prop_assume!(h.gcd(&k) == 1);
        let lhs = dedekind_sum(h, k).unwrap() + dedekind_sum(k, h).unwrap();
        let rhs = (Ratio::new(h, k) + Ratio::new(k, h) + Ratio::new(1, h * k)) / 12 - Ratio::new(1, 4);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn farey_triples_are_consistent(k in 1i64..200, h in 0i64..200) {
        prop_assume!(h < k && h.gcd(&k) == 1);
        let t = ModularTriple::new(h, k).unwrap();
        prop_assert_eq!((h * t.h_prime + 1).rem_euclid(k), 0);
        let m = t.matrix;
        prop_assert_eq!(m.a * m.d - m.b * m.c, 1);
    }

    #[test]
    fn periodic_bernoulli_is_periodic(degree in 2usize..10, p in -200i64..200, q in 1i64..50) {
        let b = PeriodicBernoulli::new(degree);
        let x = BigRational::new(BigInt::from(p), BigInt::from(q));
        let shifted = &x + BigRational::from_integer(BigInt::from(1));
        let exact = b.eval(&x).unwrap();
        prop_assert_eq!(&exact, &b.eval(&shifted).unwrap());
        let approx = b.eval_f64(p as f64 / q as f64);
        let want = falsetheta::mp::ratio_to_f64(exact.numer(), exact.denom());
        prop_assert!((approx - want).abs() < 1e-9);
    }

    #[test]
    fn series_inverse_round_trips(tail in prop::collection::vec(-5i64..6, 1..20)) {
        let mut coeffs = vec![1i64];
        coeffs.extend(tail);
        let a = QExpansion::from_i64(0, &coeffs);
        let prod = a.mul(&a.inverse().unwrap());
        prop_assert_eq!(prod, QExpansion::one(coeffs.len()));
    }

    #[test]
    fn floats_round_trip_through_reports(x in any::<f64>()) {
        prop_assume!(x.is_finite());
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }
}
