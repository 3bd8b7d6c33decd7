//! Singular series g, g', g_beta, the Dirichlet series sum d_{k-1}(m) g(m,h) m^{-s}
//! with its Euler product, and numerical main terms for the shifted convolution.

use num_integer::Integer;
use num_rational::Ratio;
use rayon::prelude::*;

use crate::arith::{factorize, sieve_dk, spf_sieve, FactoredInt};
use crate::error::{Error, Result};
use crate::numeric::{least_squares, pairwise_sum, zeta};
use crate::weights::SmoothWeight;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const MAIN_TERM_REL_TOL: f64 = 1e-13;
pub const MAIN_TERM_X_CAP: f64 = 1e8;

/// `c_{p^j}(h)`: `phi(p^j)` if `p^j | h`, `-p^{j-1}` if `j = v_p(h) + 1`, else 0.
pub fn ramanujan_prime_power(p: u64, j: u32, h: i64) -> i64 {
    if j == 0 {
        return 1;
    }
    let v = valuation(p, h);
    let p = p as i64;
    if j <= v {
        p.pow(j) - p.pow(j - 1)
    } else if j == v + 1 {
        -p.pow(j - 1)
    } else {
        0
    }
}

fn valuation(p: u64, h: i64) -> u32 {
    if h == 0 {
        return u32::MAX;
    }
    let mut h = h.unsigned_abs();
    let mut v = 0;
    while h % p == 0 {
        h /= p;
        v += 1;
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSpec {
    pub h: i64,
    pub d: u64,
    pub c: i64,
}

impl LambdaSpec {
    pub fn new(h: i64, d: u64) -> Result<Self> {
        Ok(LambdaSpec { h, d, c: crate::arith::ramanujan_sum(d, h)? })
    }
}

/// `c_d(h)/d (log xi + 2 gamma - 2 log d)`.
pub fn lambda_eval(spec: &LambdaSpec, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("lambda needs xi > 0, got {xi}")));
    }
    let d = spec.d as f64;
    Ok(spec.c as f64 / d * (xi.ln() + 2.0 * EULER_GAMMA - 2.0 * d.ln()))
}

fn local_g(p: u64, a: u32, h: i64) -> Ratio<i64> {
    let mut acc = Ratio::from_integer(0);
    for j in 0..=a {
        acc += Ratio::new(ramanujan_prime_power(p, j, h), (p as i64).pow(j));
    }
    acc
}

// (g(p^a), sum_j j c_{p^j}(h) p^{-j} log p)
fn local_g_float(p: u64, a: u32, h: i64) -> (f64, f64) {
    let (mut g, mut lg) = (0.0, 0.0);
    let lp = (p as f64).ln();
    let mut pj = 1.0;
    for j in 0..=a {
        let f = ramanujan_prime_power(p, j, h) as f64 / pj;
        g += f;
        lg += f * j as f64 * lp;
        pj *= p as f64;
    }
    (g, lg)
}

/// `g(m, h) = sum_{d | m} c_d(h) / d`, exactly.
pub fn g_eval(m: u64, h: i64) -> Result<Ratio<i64>> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    let f = factorize(m)?;
    Ok(f.factors.iter().fold(Ratio::from_integer(1), |acc, &(p, a)| acc * local_g(p, a, h)))
}

fn gprime_from_factors(f: &FactoredInt, h: i64) -> (f64, f64) {
    let locals: Vec<(f64, f64)> = f.factors.iter().map(|&(p, a)| local_g_float(p, a, h)).collect();
    let g: f64 = locals.iter().map(|l| l.0).product();
    let mut gp = 0.0;
    for i in 0..locals.len() {
        let others: f64 = locals.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, l)| l.0).product();
        gp += locals[i].1 * others;
    }
    (g, gp)
}

/// `g'(m, h) = sum_{d | m} c_d(h) log d / d`.
pub fn gprime_eval(m: u64, h: i64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    Ok(gprime_from_factors(&factorize(m)?, h).1)
}

/// `g_beta(m, h) = sum_{d | m} c_d(h) / d^beta`.
pub fn g_beta_eval(m: u64, h: i64, beta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    let f = factorize(m)?;
    Ok(f.factors
        .iter()
        .map(|&(p, a)| (0..=a).map(|j| ramanujan_prime_power(p, j, h) as f64 * (p as f64).powf(-beta * j as f64)).sum::<f64>())
        .product())
}

/// `g(m, h)` and `g'(m, h)` for `1 <= m <= limit`.
#[derive(Debug, Clone)]
pub struct SingularTable {
    pub h: i64,
    pub g: Vec<f64>,
    pub gp: Vec<f64>,
}

impl SingularTable {
    pub fn new(h: i64, limit: usize) -> Result<Self> {
        let (spf, _) = spf_sieve(limit.max(1))?;
        let mut g = vec![0.0; limit + 1];
        let mut gp = vec![0.0; limit + 1];
        g.par_iter_mut().zip(gp.par_iter_mut()).enumerate().skip(1).for_each(|(m, (gm, gpm))| {
            let mut rest = m;
            let (mut prod, mut ratio_sum) = (1.0, 0.0);
            while rest > 1 {
                let p = spf[rest] as usize;
                let mut a = 0;
                while rest % p == 0 {
                    rest /= p;
                    a += 1;
                }
                let (lg, ll) = local_g_float(p as u64, a, h);
                prod *= lg;
                ratio_sum += ll / lg;
            }
            *gm = prod;
            *gpm = prod * ratio_sum;
        });
        Ok(SingularTable { h, g, gp })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletApprox {
    pub k: u32,
    pub h: i64,
    pub s: f64,
    /// truncation of the direct sum
    pub n: usize,
    /// prime cutoff of the Euler product
    pub p: usize,
}

impl DirichletApprox {
    fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.k) || self.h == 0 {
            return Err(Error::InvalidInput(format!("need 1 <= k <= 8 and h != 0, got k = {}, h = {}", self.k, self.h)));
        }
        if !(self.s >= 1.5) {
            return Err(Error::Domain(format!("s = {} < 1.5", self.s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectEval {
    pub partial: f64,
    /// Fitted estimate of the tail beyond N.
    pub tail_estimate: f64,
    /// Upper bound for `d(h) sum_{m > N} d_{k-1}(m) m^{-s}` by integral comparison.
    pub tail_bound: f64,
    pub value: f64,
}

// int_L^inf poly(u) e^{-alpha u} du, poly given by coefficients in u
fn poly_exp_tail(coeffs: &[f64], l: f64, alpha: f64) -> f64 {
    // repeated integration by parts: sum_i P^{(i)}(L) / alpha^{i+1}
    let mut poly = coeffs.to_vec();
    let mut acc = 0.0;
    let mut scale = 1.0 / alpha;
    while !poly.is_empty() {
        let val: f64 = poly.iter().rev().fold(0.0, |s, c| s * l + c);
        acc += val * scale;
        poly = poly.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        scale /= alpha;
    }
    acc * (-alpha * l).exp()
}

/// Truncated direct sum of `sum_m d_{k-1}(m) g(m,h) m^{-s}` plus a tail estimate
/// from a fit of the partial sums `A(t) ~ t Q(log t)`, `deg Q = k - 2`.
pub fn dirichlet_direct(appr: &DirichletApprox) -> Result<DirectEval> {
    appr.validate()?;
    if appr.n > 10_000_000 || appr.n < 1000 {
        return Err(Error::Capacity(format!("N = {} outside [10^3, 10^7]", appr.n)));
    }
    if appr.k == 1 {
        return Ok(DirectEval { partial: 1.0, tail_estimate: 0.0, tail_bound: 0.0, value: 1.0 });
    }
    let n = appr.n;
    let dk = sieve_dk(appr.k - 1, n)?;
    let table = SingularTable::new(appr.h, n)?;
    let terms: Vec<f64> = (1..=n).map(|m| dk.get(m) as f64 * table.g[m] * (m as f64).powf(-appr.s)).collect();
    let partial = pairwise_sum(&terms);

    // partial sums A(t) at geometric sample points in [N/16, N]
    let mut prefix = 0.0;
    let samples = 400;
    let lo = (n / 16) as f64;
    let mut targets: Vec<usize> = (0..samples)
        .map(|i| (lo * (n as f64 / lo).powf(i as f64 / (samples - 1) as f64)).round() as usize)
        .collect();
    targets.dedup();
    let mut at = Vec::with_capacity(targets.len());
    let mut next = 0;
    for m in 1..=n {
        prefix += dk.get(m) as f64 * table.g[m];
        while next < targets.len() && targets[next] == m {
            at.push((m as f64, prefix / m as f64));
            next += 1;
        }
    }
    let deg = (appr.k - 2) as usize;
    let cols: Vec<Vec<f64>> = (0..=deg).map(|j| at.iter().map(|(t, _)| t.ln().powi(j as i32)).collect()).collect();
    let ys: Vec<f64> = at.iter().map(|p| p.1).collect();
    let q = least_squares(&cols, &ys)?;
    // A(t) = t Q(log t): dA = (Q + Q') dt, tail = int_N^inf t^{-s} (Q + Q')(log t) dt
    let mut qq = q.clone();
    for (i, c) in q.iter().enumerate().skip(1) {
        qq[i - 1] += c * i as f64;
    }
    let l = (n as f64).ln();
    let alpha = appr.s - 1.0;
    let tail_estimate = poly_exp_tail(&qq, l, alpha);

    // sum_{m <= t} d_j(m) <= t (log t + 1)^{j-1}; partial summation gives
    // tail <= s int_N^inf (log t + 1)^{j-1} t^{-s} dt
    let j = appr.k - 1;
    let binom: Vec<f64> = (0..j).map(|i| crate::arith::binomial((j - 1) as u64, i as u64) as f64).collect();
    let dh = factorize(appr.h.unsigned_abs())?.divisors().len() as f64;
    let tail_bound = dh * appr.s * poly_exp_tail(&binom, l, alpha);
    Ok(DirectEval { partial, tail_estimate, tail_bound, value: partial + tail_estimate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerEval {
    /// `E_h(s) prod_{p <= P, p !| h} (1/p + (1 - p^{-s})^{-(k-1)} (1 - 1/p))`
    pub truncated: f64,
    /// `zeta(s)^{k-1}` times the regularized product over `p <= P`
    pub completed: f64,
    /// The regularized product `P_h(s)` truncated at `P`
    pub regularized: f64,
}

/// Local factor `sum_{a >= 0} d_{k-1}(p^a) g(p^a, h) p^{-as}` for `p | h`.
pub fn local_factor_at_h(p: u64, k: u32, h: i64, s: f64) -> f64 {
    let mut acc = 0.0;
    for a in 0..=60u32 {
        let d = crate::arith::binomial(a as u64 + k as u64 - 2, k as u64 - 2) as f64;
        let (g, _) = local_g_float(p, a, h);
        let term = d * g * (p as f64).powf(-s * a as f64);
        acc += term;
        if a > valuation(p, h) + 1 && term.abs() < 1e-12 * acc.abs() * (1.0 - (p as f64).powf(-s)) {
            break;
        }
    }
    acc
}

pub fn euler_product(appr: &DirichletApprox) -> Result<EulerEval> {
    appr.validate()?;
    if appr.p > 100_000 {
        return Err(Error::Capacity(format!("P = {} > 10^5", appr.p)));
    }
    let k1 = (appr.k - 1) as i32;
    if k1 == 0 {
        return Ok(EulerEval { truncated: 1.0, completed: 1.0, regularized: 1.0 });
    }
    let s = appr.s;
    let mut truncated = 1.0;
    let mut regularized = 1.0;
    for (p, _) in factorize(appr.h.unsigned_abs())?.factors {
        let e = local_factor_at_h(p, appr.k, appr.h, s);
        truncated *= e;
        regularized *= e * (1.0 - (p as f64).powf(-s)).powi(k1);
    }
    let (_, primes) = spf_sieve(appr.p.max(2))?;
    for &p in &primes {
        let p = p as u64;
        if p as usize > appr.p || appr.h % p as i64 == 0 {
            continue;
        }
        let pf = p as f64;
        let z = 1.0 - pf.powf(-s);
        truncated *= 1.0 / pf + z.powi(-k1) * (1.0 - 1.0 / pf);
        regularized *= z.powi(k1) / pf + 1.0 - 1.0 / pf;
    }
    let completed = zeta(s)?.powi(k1) * regularized;
    Ok(EulerEval { truncated, completed, regularized })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// `a_1` is the largest of `a_1, ..., a_k`, weighted by `k`.
    Hyperbola,
    /// `sum_{m <= 2x}` with the integral over all `u`.
    Cutoff2x,
}

impl Truncation {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "hyperbola" => Ok(Truncation::Hyperbola),
            "cutoff2x" => Ok(Truncation::Cutoff2x),
            _ => Err(Error::Config(format!("unknown truncation '{name}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MainTerm {
    pub value: f64,
    /// Number of `m` (or ordered tuples) contributing.
    pub terms: usize,
    /// Largest `m` used.
    pub m_max: u64,
    /// Contribution of the terms with `m` in the top half of the range.
    pub top_half: f64,
}

fn check_main_inputs(k: u32, h: i64, x: f64, w: &SmoothWeight) -> Result<()> {
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidInput(format!("main term supports 1 <= k <= 4, got {k}")));
    }
    if h == 0 {
        return Err(Error::InvalidInput("h must be nonzero".into()));
    }
    if !(x > 0.0) || x > MAIN_TERM_X_CAP {
        return Err(Error::Capacity(format!("x = {x} outside (0, {MAIN_TERM_X_CAP:e}]")));
    }
    if w.lo * x + h as f64 <= 0.0 {
        return Err(Error::Domain(format!("log argument xi + h <= 0 on the support at x = {x}, h = {h}")));
    }
    Ok(())
}

/// `(int w(xi/x) (log(xi + h) + 2 gamma) dxi, int w(xi/x) dxi)` over the support.
fn weight_integrals(w: &SmoothWeight, x: f64, h: i64) -> Result<(f64, f64)> {
    let hf = h as f64;
    let i1 = w.integrate_tol(x, |xi| (xi + hf).ln() + 2.0 * EULER_GAMMA, MAIN_TERM_REL_TOL)?;
    let i0 = w.integrate_tol(x, |_| 1.0, MAIN_TERM_REL_TOL)?;
    Ok((i1, i0))
}

/// The same integrals over `xi > from`, to absolute accuracy `MAIN_TERM_REL_TOL` times the full ones.
fn partial_weight_integrals(w: &SmoothWeight, x: f64, h: i64, from: f64, full: (f64, f64)) -> Result<(f64, f64)> {
    let hf = h as f64;
    let inf = f64::INFINITY;
    let i1 = w.integrate_range_abs(x, from, inf, |xi| (xi + hf).ln() + 2.0 * EULER_GAMMA, MAIN_TERM_REL_TOL * full.0.abs())?;
    let i0 = w.integrate_range_abs(x, from, inf, |_| 1.0, MAIN_TERM_REL_TOL * full.1.abs())?;
    Ok((i1, i0))
}

/// Non-increasing tuples `(a_2, ..., a_k)` with `m max(a) < x`, each with
/// its number of distinct orderings.
fn sorted_tuples(len: usize, x: f64) -> Vec<(Vec<u64>, u64)> {
    fn rec(len: usize, x: f64, max: u64, prefix: &mut Vec<u64>, m: u64, out: &mut Vec<(Vec<u64>, u64)>) {
        if prefix.len() == len {
            let t = prefix.first().copied().unwrap_or(1);
            if (m as f64) * (t as f64) < x {
                out.push((prefix.clone(), multiplicity(prefix)));
            }
            return;
        }
        let top = prefix.first().copied();
        for a in 1..=max {
            let t = top.unwrap_or(a) as f64;
            // the remaining factors are at least 1
            if (m * a) as f64 * t >= x {
                break;
            }
            prefix.push(a);
            rec(len, x, a, prefix, m * a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if len == 0 {
        out.push((Vec::new(), 1));
        return out;
    }
    let max = x.sqrt().ceil() as u64 + 1;
    rec(len, x, max, &mut Vec::new(), 1, &mut out);
    out
}

fn multiplicity(t: &[u64]) -> u64 {
    let mut f = (1..=t.len() as u64).product::<u64>();
    let mut i = 0;
    while i < t.len() {
        let mut j = i;
        while j < t.len() && t[j] == t[i] {
            j += 1;
        }
        f /= (1..=(j - i) as u64).product::<u64>();
        i = j;
    }
    f
}

/// Numerical main term for `sum_n w(n/x) d_k(n) d(n + h)`.
pub fn main_term(k: u32, h: i64, x: f64, w: &SmoothWeight, trunc: Truncation) -> Result<MainTerm> {
    check_main_inputs(k, h, x, w)?;
    let (i1, i0) = weight_integrals(w, x, h)?;
    if k == 1 {
        return Ok(MainTerm { value: i1, terms: 1, m_max: 1, top_half: 0.0 });
    }
    match trunc {
        Truncation::Cutoff2x => {
            let limit = (2.0 * x).floor() as usize;
            let dk = sieve_dk(k - 1, limit)?;
            let table = SingularTable::new(h, limit)?;
            let terms: Vec<f64> = (1..=limit)
                .into_par_iter()
                .map(|m| dk.get(m) as f64 * (table.g[m] * i1 - 2.0 * table.gp[m] * i0) / m as f64)
                .collect();
            let top_half = pairwise_sum(&terms[limit / 2..]);
            Ok(MainTerm { value: pairwise_sum(&terms), terms: limit, m_max: limit as u64, top_half })
        }
        Truncation::Hyperbola => {
            let tuples = sorted_tuples((k - 1) as usize, w.hi * x);
            let m_of = |t: &[u64]| t.iter().product::<u64>();
            let m_max = tuples.iter().map(|t| m_of(&t.0)).max().unwrap_or(1);
            let table = SingularTable::new(h, m_max as usize)?;
            let full_from = w.lo * x;
            let kf = k as f64;
            let contrib: Vec<Result<(f64, u64)>> = tuples
                .par_iter()
                .map(|(t, mult)| {
                    let m = m_of(t);
                    let cut = (m as f64) * (t[0] as f64);
                    let (j1, j0) = if cut <= full_from { (i1, i0) } else { partial_weight_integrals(w, x, h, cut, (i1, i0))? };
                    let mi = m as usize;
                    let v = kf * *mult as f64 * (table.g[mi] * j1 - 2.0 * table.gp[mi] * j0) / m as f64;
                    Ok((v, m))
                })
                .collect();
            let mut vals = Vec::with_capacity(contrib.len());
            let mut top = Vec::new();
            let mut count = 0usize;
            for c in contrib {
                let (v, m) = c?;
                vals.push(v);
                if 2 * m > m_max {
                    top.push(v);
                }
                count += 1;
            }
            Ok(MainTerm { value: pairwise_sum(&vals), terms: count, m_max, top_half: pairwise_sum(&top) })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFit {
    /// `(c0, c1, c2)` in `y ~ (x / rbar) (c0 + c1 log x + c2 log^2 x)`
    pub coeffs: [f64; 3],
    pub residuals: Vec<f64>,
    pub rbar: f64,
}

/// Least-squares fit of a certain-sum main term of shape `x Q(log x)`, `deg Q = 2`;
/// `rbar = max(r1, r2)`.
pub fn certain_main_fit(r1: u64, r2: u64, xs: &[f64], values: &[f64]) -> Result<QuadraticFit> {
    if xs.len() != values.len() || xs.len() < 6 {
        return Err(Error::SingularFit(format!("need at least 6 points, got {}", xs.len())));
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return Err(Error::SingularFit("grid must span at least 1.5 decades".into()));
    }
    let rbar = r1.max(r2) as f64;
    let lc = ((lo * hi).sqrt()).ln();
    // relative weighting: fit y rbar / x against centred powers of log x
    let cols: Vec<Vec<f64>> = (0..3).map(|j| xs.iter().map(|&x| (x.ln() - lc).powi(j)).collect()).collect();
    let scaled: Vec<f64> = xs.iter().zip(values).map(|(&x, &y)| y * rbar / x).collect();
    let b = least_squares(&cols, &scaled)?;
    // expand c'(L - lc)^j back into powers of L
    let coeffs = [b[0] - b[1] * lc + b[2] * lc * lc, b[1] - 2.0 * b[2] * lc, b[2]];
    let residuals = xs
        .iter()
        .zip(values)
        .map(|(&x, &y)| {
            let l = x.ln();
            y - x / rbar * (coeffs[0] + coeffs[1] * l + coeffs[2] * l * l)
        })
        .collect();
    Ok(QuadraticFit { coeffs, residuals, rbar })
}

/// Quick gcd-based sanity check that `r1, r2` are coprime to `h`.
pub fn coprime_to_shift(r1: u64, r2: u64, h: i64) -> bool {
    h.unsigned_abs().gcd(&(r1 * r2)) == 1
}
