use proptest::prelude::*;

use ipdg_qmc::special::riemann_zeta;
use ipdg_qmc::theory::{
    cbc_construct, lambda_from_p, ordered_bell, ordered_bell_bound, weights_affine, CbcOptions,
};
use ipdg_qmc::PodWeights;

/// Shift-averaged squared worst-case error by direct summation over subsets.
fn direct_error_sq(n: u64, z: &[u64], w: &PodWeights) -> f64 {
    let b2 = |x: f64| x * x - x + 1.0 / 6.0;
    let s = z.len();
    let mut total = 0.0;
    for mask in 1u32..1 << s {
        let u: Vec<usize> = (0..s).filter(|j| mask >> j & 1 == 1).collect();
        let sum: f64 = (0..n)
            .map(|i| {
                u.iter()
                    .map(|&j| b2(((i * z[j]) % n) as f64 / n as f64))
                    .product::<f64>()
            })
            .sum();
        total += w.gamma(&u).unwrap() * sum / n as f64;
    }
    total
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

#[test]
fn zeta_identities() {
    let pi = std::f64::consts::PI;
    assert!((riemann_zeta(2.0).unwrap() - pi.powi(2) / 6.0).abs() <= 1e-12);
    assert!((riemann_zeta(4.0).unwrap() - pi.powi(4) / 90.0).abs() <= 1e-12);
}

#[test]
fn ordered_bell_recursion_and_bound() {
    // Fubini numbers via sum_k k! S(n, k) with Stirling numbers of the second kind
    let mut stirling = vec![vec![0u128; 16]; 16];
    stirling[0][0] = 1;
    for n in 1..16 {
        for k in 1..=n {
            stirling[n][k] = k as u128 * stirling[n - 1][k] + stirling[n - 1][k - 1];
        }
    }
    for n in 0..16 {
        let mut fact = 1u128;
        let mut fubini = 0u128;
        for k in 0..=n {
            if k > 0 {
                fact *= k as u128;
            }
            fubini += fact * stirling[n][k];
        }
        assert_eq!(ordered_bell(n).unwrap(), fubini, "k = {n}");
        assert!(fubini as f64 <= ordered_bell_bound(n));
        let bound = (ln_factorial(n) - n as f64 * std::f64::consts::LN_2.ln()).exp();
        assert!((ordered_bell_bound(n) - bound).abs() <= 1e-9 * bound);
    }
}

#[test]
fn cbc_two_dimensions_unit_weights() {
    let w = PodWeights::new(vec![1.0, 1.0], 1.0).unwrap();
    let cbc = cbc_construct(8, 2, &w, &CbcOptions::default()).unwrap();
    let best = (1..8)
        .step_by(2)
        .flat_map(|a| (1..8).step_by(2).map(move |b| [a, b]))
        .map(|z| direct_error_sq(8, &z, &w))
        .fold(f64::INFINITY, f64::min);
    let got = direct_error_sq(8, cbc.vector.z(), &w);
    assert!((got - best).abs() <= 1e-12 * best);
    assert_eq!(cbc.vector.z()[0], 1);
}

proptest! {
    #[test]
    fn weight_ratio_identity(
        b in prop::collection::vec(0.01f64..2.0, 6),
        lambda in 0.51f64..=1.0,
        mask in 0u32..32,
        j in 0usize..6,
    ) {
        let w = PodWeights::new(b.clone(), lambda).unwrap();
        let u: Vec<usize> = (0..6).filter(|k| *k != j && mask >> k & 1 == 1).collect();
        let mut uj = u.clone();
        uj.push(j);
        let ratio = w.gamma(&uj).unwrap() / if u.is_empty() { 1.0 } else { w.gamma(&u).unwrap() };
        let expected = ((u.len() + 1) as f64 * b[j]).powf(2.0 / (1.0 + lambda));
        prop_assert!((ratio - expected).abs() <= 1e-12 * expected, "{} vs {}", ratio, expected);
    }

    #[test]
    fn lambda_in_range(p in 1e-6f64..(1.0 - 1e-9), eps in 1e-6f64..(0.5 - 1e-9)) {
        let l = lambda_from_p(p, Some(eps)).unwrap();
        prop_assert!(l > 0.5 && l <= 1.0, "p {} eps {} lambda {}", p, eps, l);
    }

    #[test]
    fn cbc_last_component_is_the_best_extension(
        b in prop::collection::vec(0.05f64..1.0, 3),
        log_n in 2u32..=5,
    ) {
        let n = 1u64 << log_n;
        let w = weights_affine(&b, 0.8).unwrap();
        let cbc = cbc_construct(n, 3, &w, &CbcOptions::default()).unwrap();
        let z = cbc.vector.z().to_vec();
        let got = direct_error_sq(n, &z, &w);
        prop_assert!(cbc.errors_sq.iter().all(|e| e.is_finite() && *e > 0.0));
        prop_assert!((cbc.errors_sq[2] - got).abs() <= 1e-10 * got);
        for cand in (1..n).step_by(2) {
            let other = direct_error_sq(n, &[z[0], z[1], cand], &w);
            prop_assert!(got <= other * (1.0 + 1e-12), "z3 = {} beats {:?}", cand, z);
        }
    }
}
