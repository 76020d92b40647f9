use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use proptest::prelude::*;

use frameless_core::analysis::{cloud_exit_numerator, cloud_exit_numerator_alt};
use frameless_core::model::{log_choose, reduced_degree_pmf, slot_degree_pmf};

fn big_choose(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1))
}

fn big_ln(x: &BigUint) -> f64 {
    // ln x from the top 60 bits plus the shifted-out power of two.
    let bits = x.bits();
    let shift = bits.saturating_sub(60);
    let top: BigUint = x >> shift;
    let top: u64 = top.try_into().unwrap();
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

#[test]
fn log_choose_against_big_integers() {
    assert!((log_choose(50, 25) - big_ln(&big_choose(50, 25))).abs() < 1e-13);
    for (n, k) in [
        (10, 3),
        (120, 60),
        (121, 60),
        (200, 100),
        (500, 3),
        (1000, 500),
    ] {
        let want = big_ln(&big_choose(n, k));
        let got = log_choose(n as usize, k as usize);
        assert!(
            (got - want).abs() <= 1e-12 * want.max(1.0),
            "C({n},{k}): {got} vs {want}"
        );
    }
}

#[test]
fn binomial_spectrum_at_reference_degree() {
    // Direct evaluation of C(50,j) p^j (1-p)^(50-j) with p = 2.68/50 in
    // exact rational arithmetic, then rounded once.
    let s = slot_degree_pmf(50, 2.68).unwrap();
    let p = BigRational::new(BigInt::from(268), BigInt::from(5000));
    let q = BigRational::from_integer(BigInt::from(1)) - p.clone();
    for j in 0..=2u64 {
        let c = BigRational::from_integer(BigInt::from(big_choose(50, j)));
        let exact = c * rational_pow(&p, j) * rational_pow(&q, 50 - j);
        let want = rational_to_f64(&exact);
        assert!(
            (s.get(j as usize) - want).abs() < 1e-15,
            "j={j}: {} vs {want}",
            s.get(j as usize)
        );
    }
    // Log-gamma route as a cross-check of the same values.
    for j in 0..=2usize {
        let lg = (log_choose(50, j)
            + j as f64 * (2.68f64 / 50.0).ln()
            + (50 - j) as f64 * (1.0 - 2.68f64 / 50.0).ln())
        .exp();
        assert!((s.get(j) - lg).abs() < 1e-13);
    }
}

fn rational_pow(x: &BigRational, e: u64) -> BigRational {
    (0..e).fold(BigRational::from_integer(BigInt::from(1)), |acc, _| {
        acc * x.clone()
    })
}

fn rational_to_f64(x: &BigRational) -> f64 {
    // Scale to a 64-bit integer quotient, enough for 1e-15 absolute on [0, 1].
    let scale = BigInt::from(1u64 << 62);
    let q: BigInt = (x.numer() * &scale) / x.denom();
    let q: i64 = q.try_into().unwrap();
    q as f64 / (1u64 << 62) as f64
}

#[test]
fn reduced_degree_matches_rationals() {
    for n in 1..=8u64 {
        for u in 0..=n {
            for d in 0..=n {
                let got = reduced_degree_pmf(n as usize, u as usize, d as usize).unwrap();
                let total: f64 = got.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                for (j, g) in got.iter().enumerate() {
                    let j = j as u64;
                    let exact = if d >= j && d - j <= n - u {
                        BigRational::new(
                            BigInt::from(big_choose(u, j) * big_choose(n - u, d - j)),
                            BigInt::from(big_choose(n, d)),
                        )
                    } else {
                        BigRational::from_integer(BigInt::from(0))
                    };
                    assert!(
                        (g - rational_to_f64(&exact)).abs() < 1e-14,
                        "n={n} u={u} d={d} j={j}"
                    );
                }
            }
        }
    }
}

#[test]
fn degree_pmf_sums_and_means_on_grid() {
    for n in (1..=200usize).step_by(7).chain([200]) {
        let mut beta = 0.0;
        while beta <= n as f64 {
            let s = slot_degree_pmf(n, beta).unwrap();
            let total: f64 = s.probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n} beta={beta} sum={total}");
            assert!(
                (s.mean() - beta).abs() < 1e-10,
                "n={n} beta={beta} mean={}",
                s.mean()
            );
            beta += 0.5;
        }
    }
}

#[test]
fn numerator_forms_agree_on_grid() {
    for n in [2usize, 3, 5, 10, 25, 50, 75, 100] {
        for u in 1..=n {
            for beta in [0.1, 1.0, 2.68, 5.0, n as f64 / 2.0, n as f64]
                .into_iter()
                .filter(|&b| b <= n as f64)
            {
                let s = slot_degree_pmf(n, beta).unwrap();
                let a = cloud_exit_numerator(n, u, &s);
                let b = cloud_exit_numerator_alt(n, u, &s);
                assert!(
                    (a - b).abs() <= 1e-12,
                    "n={n} u={u} beta={beta}: {a} vs {b}"
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn degree_pmf_is_a_distribution(n in 1usize..=200, frac in 0.0f64..=1.0) {
        let beta = frac * n as f64;
        let s = slot_degree_pmf(n, beta).unwrap();
        prop_assert!(s.probs().iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!((s.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((s.mean() - beta).abs() < 1e-10);
    }

    #[test]
    fn reduced_degree_is_a_distribution(n in 1usize..=150, u_frac in 0.0f64..=1.0, d_frac in 0.0f64..=1.0) {
        let u = (u_frac * n as f64).round() as usize;
        let d = (d_frac * n as f64).round() as usize;
        let p = reduced_degree_pmf(n, u, d).unwrap();
        let lo = d.saturating_sub(n - u);
        prop_assert!(p[..lo].iter().all(|&x| x == 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
