//! Factorization, multiplicative sieves and Ramanujan sums.

use crate::error::{Error, Result};
use num_integer::Integer;

/// Default memory budget for sieve tables, in bytes.
pub const DEFAULT_SIEVE_BUDGET: usize = 2 << 30;

/// Largest value accepted by [`factorize`].
pub const FACTOR_LIMIT: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredInt {
    pub value: u64,
    /// `(prime, exponent)` with strictly increasing primes.
    pub factors: Vec<(u64, u32)>,
}

impl FactoredInt {
    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for &(p, e) in &self.factors {
            let len = out.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    out.push(out[i] * pk);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }
}

/// Canonical factorization of `1 <= n <= 2^62`.
pub fn factorize(n: u64) -> Result<FactoredInt> {
    if n == 0 || n > FACTOR_LIMIT {
        return Err(Error::InvalidInput(format!("factorize: {n} outside [1, 2^62]")));
    }
    let mut primes = Vec::new();
    let mut m = n;
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        while m % p == 0 {
            primes.push(p);
            m /= p;
        }
    }
    let mut p = 41u64;
    while p <= 1000 && p * p <= m {
        while m % p == 0 {
            primes.push(p);
            m /= p;
        }
        p += 2;
    }
    if m > 1 {
        split_rec(m, &mut primes);
    }
    primes.sort_unstable();
    let mut factors: Vec<(u64, u32)> = Vec::new();
    for q in primes {
        match factors.last_mut() {
            Some((r, e)) if *r == q => *e += 1,
            _ => factors.push((q, 1)),
        }
    }
    Ok(FactoredInt { value: n, factors })
}

fn split_rec(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_brent(n);
    split_rec(d, out);
    split_rec(n / d, out);
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// Brent's variant of Pollard rho; n is odd, composite, without small factors.
fn pollard_brent(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g, mut r, mut q) = (2u64, 2u64, 1u64, 1u64, 1u64);
        let mut ys = 0u64;
        let m = 128u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..m.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += m;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

#[derive(Debug, Clone)]
pub struct DivisorTable {
    pub k: u32,
    pub limit: usize,
    /// `values[n] = d_k(n)` for `1 <= n <= limit`; `values[0]` is unused.
    pub values: Vec<u64>,
}

impl DivisorTable {
    pub fn get(&self, n: usize) -> u64 {
        self.values[n]
    }
}

fn check_budget(n: usize, bytes_per_entry: usize, budget: usize) -> Result<()> {
    let need = (n + 1).saturating_mul(bytes_per_entry);
    if need > budget {
        return Err(Error::Capacity(format!(
            "table of {} entries needs {need} bytes, budget {budget}",
            n + 1
        )));
    }
    Ok(())
}

/// `d_k(n)` for `n <= limit` by `k-1` Dirichlet convolutions with `1`.
pub fn sieve_dk(k: u32, limit: usize) -> Result<DivisorTable> {
    sieve_dk_budget(k, limit, DEFAULT_SIEVE_BUDGET)
}

pub fn sieve_dk_budget(k: u32, limit: usize, budget: usize) -> Result<DivisorTable> {
    if !(1..=8).contains(&k) {
        return Err(Error::InvalidInput(format!("sieve_dk: k = {k} outside 1..=8")));
    }
    // two live tables during a convolution pass
    check_budget(limit, 16, budget)?;
    let mut cur = vec![1u64; limit + 1];
    cur[0] = 0;
    for _ in 1..k {
        let mut next = vec![0u64; limit + 1];
        for d in 1..=limit {
            let v = cur[d];
            let mut m = d;
            while m <= limit {
                next[m] = next[m]
                    .checked_add(v)
                    .ok_or_else(|| Error::Capacity("d_k overflowed u64".into()))?;
                m += d;
            }
        }
        cur = next;
    }
    Ok(DivisorTable { k, limit, values: cur })
}

/// Smallest-prime-factor table plus the prime list up to `limit`.
pub fn spf_sieve(limit: usize) -> Result<(Vec<u32>, Vec<u32>)> {
    check_budget(limit, 4, DEFAULT_SIEVE_BUDGET)?;
    if limit > u32::MAX as usize {
        return Err(Error::Capacity("spf sieve limited to u32 range".into()));
    }
    let mut spf = vec![0u32; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if spf[i] == 0 {
            spf[i] = i as u32;
            primes.push(i as u32);
        }
        let si = spf[i];
        for &p in &primes {
            let m = i * p as usize;
            if p > si || m > limit {
                break;
            }
            spf[m] = p;
        }
    }
    Ok((spf, primes))
}

/// Linear sieve for the Möbius function; `mu[0]` is unused.
pub fn mobius_sieve(limit: usize) -> Result<Vec<i8>> {
    check_budget(limit, 5, DEFAULT_SIEVE_BUDGET)?;
    let mut mu = vec![0i8; limit + 1];
    if limit >= 1 {
        mu[1] = 1;
    }
    let mut is_comp = vec![false; limit + 1];
    let mut primes: Vec<usize> = Vec::new();
    for i in 2..=limit {
        if !is_comp[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &p in &primes {
            let m = i * p;
            if m > limit {
                break;
            }
            is_comp[m] = true;
            if i % p == 0 {
                mu[m] = 0;
                break;
            }
            mu[m] = -mu[i];
        }
    }
    Ok(mu)
}

/// Linear sieve for Euler's totient; `phi[0]` is unused.
pub fn phi_sieve(limit: usize) -> Result<Vec<u64>> {
    check_budget(limit, 9, DEFAULT_SIEVE_BUDGET)?;
    let mut phi = vec![0u64; limit + 1];
    if limit >= 1 {
        phi[1] = 1;
    }
    let mut primes: Vec<usize> = Vec::new();
    for i in 2..=limit {
        if phi[i] == 0 {
            primes.push(i);
            phi[i] = (i - 1) as u64;
        }
        for &p in &primes {
            let m = i * p;
            if m > limit {
                break;
            }
            if i % p == 0 {
                phi[m] = phi[i] * p as u64;
                break;
            }
            phi[m] = phi[i] * (p as u64 - 1);
        }
    }
    Ok(phi)
}

pub fn euler_phi(f: &FactoredInt) -> u64 {
    f.factors
        .iter()
        .map(|&(p, e)| (p - 1) * p.pow(e - 1))
        .product()
}

pub fn mobius(f: &FactoredInt) -> i64 {
    if f.is_squarefree() {
        if f.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

/// Ramanujan sum `c_d(h) = mu(d/g) phi(d) / phi(d/g)` with `g = gcd(d, h)`.
pub fn ramanujan_sum(d: u64, h: i64) -> Result<i64> {
    if d == 0 {
        return Err(Error::InvalidInput("ramanujan_sum: modulus 0".into()));
    }
    let g = if h == 0 { d } else { d.gcd(&h.unsigned_abs()) };
    let q = factorize(d / g)?;
    let mu = mobius(&q);
    if mu == 0 {
        return Ok(0);
    }
    let phi_d = euler_phi(&factorize(d)?);
    Ok(mu * (phi_d / euler_phi(&q)) as i64)
}

/// Largest divisor of `d1` whose prime factors all divide `d2`.
pub fn gcd_infty(d1: u64, d2: u64) -> u64 {
    assert!(d1 >= 1 && d2 >= 1, "gcd_infty needs positive arguments");
    let mut rest = d1;
    loop {
        let g = rest.gcd(&d2);
        if g == 1 {
            return d1 / rest;
        }
        rest /= g;
    }
}

pub fn is_squarefree(n: u64) -> bool {
    n >= 1 && factorize(n).map(|f| f.is_squarefree()).unwrap_or(false)
}

/// Index of `Gamma_0(q)`: `q * prod_{p | q} (1 + 1/p)`.
pub fn psi(q: u64) -> u64 {
    let f = factorize(q).expect("psi: q in range");
    f.factors
        .iter()
        .map(|&(p, e)| (p + 1) * p.pow(e - 1))
        .product()
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as u64
}

/// Modular inverse of `a` modulo `m` (`m >= 1`), if it exists.
pub fn mod_inv(a: i64, m: i64) -> Option<i64> {
    if m == 1 {
        return Some(0);
    }
    let e = a.rem_euclid(m).extended_gcd(&m);
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // d_k(n) by recursion over divisors found with trial division.
    fn dk_oracle(kmax: u32, n_max: usize) -> Vec<Vec<u64>> {
        let divs: Vec<Vec<usize>> = (0..=n_max)
            .map(|n| (1..=n).filter(|d| n % d == 0).collect())
            .collect();
        let mut layers = vec![vec![1u64; n_max + 1]];
        for _ in 1..kmax {
            let prev = layers.last().unwrap();
            let next = (0..=n_max)
                .map(|n| divs[n].iter().map(|&d| prev[n / d]).sum())
                .collect();
            layers.push(next);
        }
        layers
    }

    #[test]
    fn sieve_small_examples() {
        let t1 = sieve_dk(1, 10).unwrap();
        assert!(t1.values[1..].iter().all(|&v| v == 1));
        assert_eq!(sieve_dk(2, 6).unwrap().get(6), 4);
        assert_eq!(sieve_dk(3, 4).unwrap().get(4), 6);
    }

    #[test]
    fn d4_360_matches_oracle() {
        let oracle = dk_oracle(4, 360);
        let t = sieve_dk(4, 360).unwrap();
        assert_eq!(t.get(360), oracle[3][360]);
        // 360 = 2^3 3^2 5: C(6,3) C(5,3) C(4,3)
        assert_eq!(t.get(360), 20 * 10 * 4);
    }

    #[test]
    fn sieve_matches_oracle_small_range() {
        let oracle = dk_oracle(5, 3000);
        for k in 1..=5u32 {
            let t = sieve_dk(k, 3000).unwrap();
            assert_eq!(&t.values[1..], &oracle[k as usize - 1][1..], "k = {k}");
        }
    }

    #[test]
    fn sieve_rejects_bad_k_and_budget() {
        assert!(matches!(sieve_dk(0, 10), Err(Error::InvalidInput(_))));
        assert!(matches!(sieve_dk(9, 10), Err(Error::InvalidInput(_))));
        assert!(matches!(sieve_dk_budget(2, 1000, 100), Err(Error::Capacity(_))));
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().factors.is_empty());
        assert_eq!(factorize(12).unwrap().factors, vec![(2, 2), (3, 1)]);
        let (p, q) = (2_147_483_647u64, 2_147_483_629u64);
        assert!(is_prime(p) && is_prime(q));
        assert_eq!(factorize(p * q).unwrap().factors, vec![(q, 1), (p, 1)]);
        assert!(factorize(0).is_err());
        assert!(factorize(FACTOR_LIMIT + 1).is_err());
    }

    #[test]
    fn factorize_large_prime_powers() {
        let p = 1_000_003u64;
        let n = p * p * 3 * 7;
        assert_eq!(factorize(n).unwrap().factors, vec![(3, 1), (7, 1), (p, 2)]);
    }

    fn ramanujan_direct(d: u64, h: i64) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for a in 1..=d {
            if a.gcd(&d) == 1 {
                let t = 2.0 * std::f64::consts::PI * ((a as i128 * h as i128).rem_euclid(d as i128)) as f64
                    / d as f64;
                re += t.cos();
                im += t.sin();
            }
        }
        (re, im)
    }

    #[test]
    fn ramanujan_examples() {
        assert_eq!(ramanujan_sum(1, 5).unwrap(), 1);
        assert_eq!(ramanujan_sum(7, 3).unwrap(), -1);
        assert_eq!(ramanujan_sum(4, 2).unwrap(), -2);
        assert_eq!(ramanujan_sum(6, 4).unwrap(), -1);
        assert_eq!(ramanujan_sum(9, 0).unwrap(), 6);
        assert_eq!(ramanujan_direct(4, 2).0.round() as i64, -2);
    }

    #[test]
    fn ramanujan_matches_exponential_sum_and_alt_form() {
        let mu = mobius_sieve(200).unwrap();
        for d in 1..=200u64 {
            for h in -30i64..=30 {
                let c = ramanujan_sum(d, h).unwrap();
                let (re, im) = ramanujan_direct(d, h);
                assert_eq!(c, re.round() as i64, "d={d} h={h}");
                assert!(im.abs() < 1e-9);
                let g = if h == 0 { d } else { d.gcd(&h.unsigned_abs()) };
                let alt: i64 = (1..=g)
                    .filter(|e| g % e == 0)
                    .map(|e| e as i64 * mu[(d / e) as usize] as i64)
                    .sum();
                assert_eq!(c, alt, "alt form d={d} h={h}");
            }
        }
    }

    #[test]
    fn gcd_infty_examples() {
        assert_eq!(gcd_infty(12, 2), 4);
        assert_eq!(gcd_infty(12, 2), 12u64.gcd(&2u64.pow(10)));
        assert_eq!(gcd_infty(5, 3), 1);
        assert_eq!(gcd_infty(360, 360), 360);
        assert_eq!(gcd_infty(360, 6), 72);
    }

    #[test]
    fn mobius_phi_examples() {
        let mu = mobius_sieve(100).unwrap();
        let phi = phi_sieve(100).unwrap();
        assert_eq!(mu[1], 1);
        assert_eq!(mu[6], 1);
        assert_eq!(mu[12], 0);
        assert_eq!(mu[30], -1);
        assert_eq!(phi[1], 1);
        assert_eq!(phi[9], 6);
        assert_eq!(phi[97], 96);
    }

    #[test]
    fn phi_divisor_sum_identity() {
        use rand::{Rng, SeedableRng};
        let phi = phi_sieve(1_000_000).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n: u64 = rng.gen_range(1..=1_000_000);
            let s: u64 = factorize(n).unwrap().divisors().iter().map(|&d| phi[d as usize]).sum();
            assert_eq!(s, n);
        }
    }

    #[test]
    fn sieves_agree_with_factorization() {
        let mu = mobius_sieve(5000).unwrap();
        let phi = phi_sieve(5000).unwrap();
        let (spf, primes) = spf_sieve(5000).unwrap();
        assert_eq!(primes.len(), 669);
        for n in 1..=5000u64 {
            let f = factorize(n).unwrap();
            assert_eq!(mu[n as usize] as i64, mobius(&f));
            assert_eq!(phi[n as usize], euler_phi(&f));
            if n > 1 {
                assert_eq!(spf[n as usize] as u64, f.factors[0].0);
            }
        }
    }

    #[test]
    fn psi_small() {
        assert_eq!(psi(1), 1);
        assert_eq!(psi(2), 3);
        assert_eq!(psi(4), 6);
        assert_eq!(psi(6), 12);
    }

    fn d3_table() -> &'static DivisorTable {
        static T: std::sync::OnceLock<DivisorTable> = std::sync::OnceLock::new();
        T.get_or_init(|| sieve_dk(3, 1_000_000).unwrap())
    }

    fn pow2_tables() -> &'static Vec<DivisorTable> {
        static T: std::sync::OnceLock<Vec<DivisorTable>> = std::sync::OnceLock::new();
        T.get_or_init(|| (1..=6).map(|k| sieve_dk(k, 1 << 19).unwrap()).collect())
    }

    proptest! {
        #[test]
        fn factorization_round_trip(n in 1u64..(1u64 << 62)) {
            let f = factorize(n).unwrap();
            let mut prod = 1u64;
            let mut last = 1u64;
            for &(p, e) in &f.factors {
                prop_assert!(p > last && e >= 1 && is_prime(p));
                last = p;
                prod *= p.pow(e);
            }
            prop_assert_eq!(prod, n);
        }

        #[test]
        fn dk_multiplicative(m in 1usize..1000, n in 1usize..1000) {
            prop_assume!(m.gcd(&n) == 1);
            let t = d3_table();
            prop_assert_eq!(t.get(m * n), t.get(m) * t.get(n));
        }

        #[test]
        fn dk_prime_power(e in 1u32..20, k in 1u32..=6) {
            let t = &pow2_tables()[k as usize - 1];
            prop_assert_eq!(t.get(1 << e), binomial((e + k - 1) as u64, (k - 1) as u64));
        }

        #[test]
        fn ramanujan_multiplicative(a in 1u64..400, b in 1u64..400, h in -500i64..500) {
            prop_assume!(a.gcd(&b) == 1);
            prop_assert_eq!(
                ramanujan_sum(a * b, h).unwrap(),
                ramanujan_sum(a, h).unwrap() * ramanujan_sum(b, h).unwrap()
            );
        }

        #[test]
        fn gcd_infty_support(d1 in 1u64..1_000_000, d2 in 1u64..1_000_000) {
            let g = gcd_infty(d1, d2);
            prop_assert_eq!(d1 % g, 0);
            let pg: Vec<u64> = factorize(g).unwrap().primes().collect();
            let pgcd: Vec<u64> = factorize(d1.gcd(&d2)).unwrap().primes().collect();
            prop_assert_eq!(pg, pgcd);
            prop_assert_eq!((d1 / g).gcd(&d2), 1);
        }
    }
}
