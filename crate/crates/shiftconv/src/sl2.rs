//! Projective lines over Z/qZ, cosets of Gamma_2(q1, q2) in SL2(Z),
//! automorphic indicator weights and their K-sums.

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arith::{factorize, is_squarefree, mod_inv};
use crate::error::{Error, Result};

/// Integer 2x2 matrix stored row-major as `[a, b, c, d]`.
pub type Mat = [i64; 4];

pub const IDENTITY: Mat = [1, 0, 0, 1];
pub const PROJ_LINE_CAP: u64 = 1_000_000;
pub const TWISTED_CANDIDATE_CAP: u64 = 10_000_000;

pub fn det(m: &Mat) -> i64 {
    m[0] * m[3] - m[1] * m[2]
}

/// Product with overflow detection.
pub fn mat_mul(x: &Mat, y: &Mat) -> Result<Mat> {
    let f = |a: i64, b: i64, c: i64, d: i64| -> Result<i64> {
        let v = a as i128 * b as i128 + c as i128 * d as i128;
        i64::try_from(v).map_err(|_| Error::Capacity("matrix entry overflow".into()))
    };
    Ok([
        f(x[0], y[0], x[1], y[2])?,
        f(x[0], y[1], x[1], y[3])?,
        f(x[2], y[0], x[3], y[2])?,
        f(x[2], y[1], x[3], y[3])?,
    ])
}

fn crt(r1: u64, m1: u64, r2: u64, m2: u64) -> u64 {
    // m1, m2 coprime
    let inv = mod_inv((m1 % m2) as i64, m2 as i64).expect("coprime moduli") as u128;
    let diff = (r2 as i128 - r1 as i128).rem_euclid(m2 as i128) as u128;
    let t = diff * inv % m2 as u128;
    (r1 as u128 + m1 as u128 * t) as u64
}

fn prime_powers(q: u64) -> Vec<(u64, u32, u64)> {
    factorize(q)
        .expect("modulus within factorization range")
        .factors
        .iter()
        .map(|&(p, e)| (p, e, p.pow(e)))
        .collect()
}

/// A point of the projective line over Z/qZ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjPoint {
    pub q: u64,
    pub x: u64,
    pub y: u64,
}

impl ProjPoint {
    /// Normalizes `(x, y)`; `None` if `gcd(x, y, q) != 1`.
    pub fn new(q: u64, x: i64, y: i64) -> Option<ProjPoint> {
        if q == 0 {
            return None;
        }
        let x = x.rem_euclid(q as i64) as u64;
        let y = y.rem_euclid(q as i64) as u64;
        if x.gcd(&y).gcd(&q) != 1 {
            return None;
        }
        let (mut nx, mut ny, mut modulus) = (0u64, 0u64, 1u64);
        for (_, _, pe) in prime_powers(q) {
            let (xi, yi) = ((x % pe) as i64, (y % pe) as i64);
            let (cx, cy) = match mod_inv(yi, pe as i64) {
                Some(inv) => ((xi as i128 * inv as i128).rem_euclid(pe as i128) as u64, 1 % pe),
                None => {
                    let inv = mod_inv(xi, pe as i64).expect("primitive vector");
                    (1 % pe, (yi as i128 * inv as i128).rem_euclid(pe as i128) as u64)
                }
            };
            nx = crt(nx, modulus, cx, pe);
            ny = crt(ny, modulus, cy, pe);
            modulus *= pe;
        }
        Some(ProjPoint { q, x: nx, y: ny })
    }
}

/// All points of the projective line over Z/qZ, sorted.
pub fn proj_line(q: u64) -> Result<Vec<ProjPoint>> {
    if q == 0 {
        return Err(Error::InvalidInput("modulus must be positive".into()));
    }
    if q > PROJ_LINE_CAP {
        return Err(Error::Capacity(format!("projective line modulus {q} > {PROJ_LINE_CAP}")));
    }
    let mut pts: Vec<(u64, u64, u64)> = vec![(0, 0, 1)];
    for (p, _, pe) in prime_powers(q) {
        let mut local = Vec::new();
        for t in 0..pe {
            local.push((t, 1 % pe));
        }
        for s in 0..pe / p {
            local.push((1 % pe, (p * s) % pe));
        }
        let mut next = Vec::with_capacity(pts.len() * local.len());
        for &(x, y, m) in &pts {
            for &(lx, ly) in &local {
                next.push((crt(x, m, lx, pe), crt(y, m, ly, pe), m * pe));
            }
        }
        pts = next;
    }
    let mut out: Vec<ProjPoint> = pts.into_iter().map(|(x, y, _)| ProjPoint { q, x, y }).collect();
    out.sort();
    Ok(out)
}

/// Label of a coset in Gamma_2(q1, q2) \ SL2(Z): the class of the top row
/// over q1 and of the bottom row over q2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CosetLabel {
    pub top: ProjPoint,
    pub bottom: ProjPoint,
}

impl CosetLabel {
    pub fn q0(&self) -> u64 {
        self.top.q.gcd(&self.bottom.q)
    }

    pub fn is_valid(&self) -> bool {
        let q0 = self.q0() as i128;
        let d = self.top.x as i128 * self.bottom.y as i128 - self.top.y as i128 * self.bottom.x as i128;
        (d.rem_euclid(q0) as u64).gcd(&(q0 as u64)) == 1
    }
}

pub fn coset_list(q1: u64, q2: u64) -> Result<Vec<CosetLabel>> {
    let l1 = proj_line(q1)?;
    let l2 = proj_line(q2)?;
    if (l1.len() as u64).saturating_mul(l2.len() as u64) > PROJ_LINE_CAP * 10 {
        return Err(Error::Capacity(format!("coset list for ({q1}, {q2}) too large")));
    }
    let mut out = Vec::new();
    for &top in &l1 {
        for &bottom in &l2 {
            let lab = CosetLabel { top, bottom };
            if lab.is_valid() {
                out.push(lab);
            }
        }
    }
    Ok(out)
}

pub fn coset_of(m: &Mat, q1: u64, q2: u64) -> Result<CosetLabel> {
    if det(m) != 1 {
        return Err(Error::InvalidInput(format!("det {:?} = {} != 1", m, det(m))));
    }
    let top = ProjPoint::new(q1, m[0], m[1]).ok_or_else(|| Error::InvalidInput("bad modulus".into()))?;
    let bottom = ProjPoint::new(q2, m[2], m[3]).ok_or_else(|| Error::InvalidInput("bad modulus".into()))?;
    Ok(CosetLabel { top, bottom })
}

/// A matrix in SL2(Z) whose coset has the given label.
pub fn lift_coset(label: &CosetLabel) -> Mat {
    assert!(label.is_valid(), "invalid coset label {label:?}");
    let (q1, q2) = (label.top.q, label.bottom.q);
    let n = q1.lcm(&q2);
    if n == 1 {
        return IDENTITY;
    }
    let mut acc = [0u64; 4];
    let mut modulus = 1u64;
    for (_, _, pe) in prime_powers(n) {
        let pe_i = pe as i128;
        let e1 = q1.gcd(&pe);
        let e2 = q2.gcd(&pe);
        let (x1, y1) = (label.top.x as i128 % pe_i, label.top.y as i128 % pe_i);
        let (x2, y2) = (label.bottom.x as i128 % pe_i, label.bottom.y as i128 % pe_i);
        let inv = |v: i128| mod_inv(v.rem_euclid(pe_i) as i64, pe as i64).map(|t| t as i128);
        let rows: [i128; 4] = if e2 == 1 {
            // only the top row is constrained at p
            match inv(x1) {
                Some(ia) => [x1, y1, 0, ia],
                None => [x1, y1, -inv(y1).expect("primitive"), 0],
            }
        } else if e1 == 1 {
            match inv(y2) {
                Some(id) => [id, 0, x2, y2],
                None => [0, -inv(x2).expect("primitive"), x2, y2],
            }
        } else {
            let d0 = x1 * y2 - y1 * x2;
            let s = inv(d0).expect("determinant unit at p");
            [x1, y1, s * x2, s * y2]
        };
        for (slot, v) in acc.iter_mut().zip(rows) {
            *slot = crt(*slot, modulus, v.rem_euclid(pe_i) as u64, pe);
        }
        modulus *= pe;
    }
    let m = lift_sl2_mod(acc, n);
    debug_assert_eq!(coset_of(&m, q1, q2).unwrap(), *label);
    m
}

// Lift an element of SL2(Z/N) to SL2(Z).
fn lift_sl2_mod(v: [u64; 4], n: u64) -> Mat {
    let n = n as i64;
    let (a, b) = (v[0] as i64, v[1] as i64);
    let mut c = v[2] as i64;
    if c == 0 {
        c = n;
    }
    let mut d = v[3] as i64;
    while c.gcd(&d) != 1 {
        d += n;
    }
    let e = c.extended_gcd(&d);
    // e.x * c + e.y * d = 1, so (a', b') = (e.y, -e.x) has a'd - b'c = 1
    let (a1, b1) = (e.y, -e.x);
    let k = ((-(a - a1) as i128 * b1 as i128 + (b - b1) as i128 * a1 as i128).rem_euclid(n as i128)) as i64;
    let m = [a1 + k * c, b1 + k * d, c, d];
    debug_assert_eq!(det(&m), 1);
    m
}

/// The cosets of Gamma_2(q1, q2) \ SL2(Z) with fixed lifts.
#[derive(Debug, Clone)]
pub struct CosetSpace {
    pub q1: u64,
    pub q2: u64,
    pub labels: Vec<CosetLabel>,
    pub reps: Vec<Mat>,
}

impl CosetSpace {
    pub fn new(q1: u64, q2: u64) -> Result<Self> {
        let labels = coset_list(q1, q2)?;
        let reps = labels.iter().map(lift_coset).collect();
        Ok(CosetSpace { q1, q2, labels, reps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `1[rt2 | a] 1[rt1 | c]`
    Alpha0,
    /// additionally `1[r2 | ad - h rt2]`
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutoWeight {
    pub r1: u64,
    pub r2: u64,
    pub h: i64,
    pub r0: u64,
    pub rt1: u64,
    pub rt2: u64,
    pub mode: WeightMode,
}

impl AutoWeight {
    pub fn new(r1: u64, r2: u64, h: i64, mode: WeightMode) -> Result<Self> {
        if r1 == 0 || r2 == 0 || !is_squarefree(r1) || !is_squarefree(r2) {
            return Err(Error::InvalidInput(format!("r1 = {r1}, r2 = {r2} must be squarefree and positive")));
        }
        let r0 = r1.gcd(&r2);
        Ok(AutoWeight { r1, r2, h, r0, rt1: r1 / r0, rt2: r2 / r0, mode })
    }

    pub fn alpha0(r1: u64, r2: u64) -> Result<Self> {
        Self::new(r1, r2, 0, WeightMode::Alpha0)
    }

    pub fn eval(&self, m: &Mat) -> u8 {
        let ok0 = m[0].rem_euclid(self.rt2 as i64) == 0 && m[2].rem_euclid(self.rt1 as i64) == 0;
        match self.mode {
            WeightMode::Alpha0 => ok0 as u8,
            WeightMode::Alpha => {
                let r2 = self.r2 as i128;
                let v = m[0] as i128 * m[3] as i128 - self.h as i128 * self.rt2 as i128;
                (ok0 && v.rem_euclid(r2) == 0) as u8
            }
        }
    }

    /// The coset space on which the weight lives: Gamma_2(r2, r1).
    pub fn cosets(&self) -> Result<CosetSpace> {
        CosetSpace::new(self.r2, self.r1)
    }
}

type Mat128 = [i128; 4];

fn mul128(x: &Mat128, y: &Mat128) -> Mat128 {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn random_word(rng: &mut ChaCha8Rng, gens: &[Mat128]) -> Mat128 {
    let len = rng.gen_range(1..=12);
    let mut m: Mat128 = [1, 0, 0, 1];
    for _ in 0..len {
        m = mul128(&m, &gens[rng.gen_range(0..gens.len())]);
    }
    m
}

/// Random element of Gamma_2(q1, q2) as a word of length at most 12.
pub fn random_gamma2(rng: &mut ChaCha8Rng, q1: u64, q2: u64) -> Mat128 {
    let (a, b) = (q1 as i128, q2 as i128);
    random_word(rng, &[[1, a, 0, 1], [1, -a, 0, 1], [1, 0, b, 1], [1, 0, -b, 1], [-1, 0, 0, -1]])
}

pub fn random_sl2(rng: &mut ChaCha8Rng) -> Mat128 {
    random_word(rng, &[[1, 1, 0, 1], [1, -1, 0, 1], [1, 0, 1, 1], [1, 0, -1, 1], [0, -1, 1, 0]])
}

/// Tests `f(gamma g) = f(g)` for random `gamma` in Gamma_2(q1, q2).
pub fn check_automorphy_with<F: Fn(&Mat128) -> u8>(f: F, q1: u64, q2: u64, trials: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).all(|_| {
        let g = random_sl2(&mut rng);
        let gamma = random_gamma2(&mut rng, q1, q2);
        f(&mul128(&gamma, &g)) == f(&g)
    })
}

pub fn check_automorphy(w: &AutoWeight, trials: usize, seed: u64) -> bool {
    let reduce = |m: &Mat128| -> Mat {
        let n = (w.r1 * w.r2) as i128;
        [m[0].rem_euclid(n) as i64, m[1].rem_euclid(n) as i64, m[2].rem_euclid(n) as i64, m[3].rem_euclid(n) as i64]
    };
    // the weights only see entries modulo r1 r2
    check_automorphy_with(|m| w.eval(&reduce(m)), w.r2, w.r1, trials, seed)
}

fn require_alpha0(w: &AutoWeight) -> Result<()> {
    if w.mode != WeightMode::Alpha0 {
        return Err(Error::InvalidInput("K-sum bounds are stated for the alpha_0 weight".into()));
    }
    Ok(())
}

fn ksum_check_size(w: &AutoWeight) -> Result<()> {
    if w.r1 * w.r2 > 10_000 {
        return Err(Error::Capacity(format!("r1 r2 = {} > 10^4", w.r1 * w.r2)));
    }
    Ok(())
}

/// `sum_tau alpha(tau) alpha(tau sigma)` over a coset space.
pub fn correlation(w: &AutoWeight, space: &CosetSpace, sigma: &Mat) -> Result<u64> {
    let mut acc = 0u64;
    for tau in &space.reps {
        if w.eval(tau) == 1 && w.eval(&mat_mul(tau, sigma)?) == 1 {
            acc += 1;
        }
    }
    Ok(acc)
}

/// Per-`b` correlations with the upper unipotent, for `b = -B..=B`.
pub fn ksum_b_terms(w: &AutoWeight, space: &CosetSpace, b_max: i64) -> Result<Vec<(i64, u64)>> {
    (-b_max..=b_max).map(|b| Ok((b, correlation(w, space, &[1, b, 0, 1])?))).collect()
}

pub fn ksum_b(w: &AutoWeight, b_max: f64) -> Result<f64> {
    require_alpha0(w)?;
    ksum_check_size(w)?;
    if !(0.0..=1000.0).contains(&b_max) {
        return Err(Error::Capacity(format!("B = {b_max} outside [0, 1000]")));
    }
    let space = w.cosets()?;
    let terms = ksum_b_terms(w, &space, b_max.floor() as i64)?;
    Ok(terms.iter().map(|t| t.1 as f64).sum())
}

/// Per-`c` correlations with the lower unipotent, for `0 < |c| <= C`.
pub fn ksum_c_terms(w: &AutoWeight, space: &CosetSpace, c_max: i64) -> Result<Vec<(i64, u64)>> {
    (-c_max..=c_max)
        .filter(|&c| c != 0)
        .map(|c| Ok((c, correlation(w, space, &[1, 0, c, 1])?)))
        .collect()
}

pub fn ksum_c(w: &AutoWeight, c_max: f64) -> Result<f64> {
    require_alpha0(w)?;
    ksum_check_size(w)?;
    if !(0.0..=1000.0).contains(&c_max) {
        return Err(Error::Capacity(format!("C = {c_max} outside [0, 1000]")));
    }
    let space = w.cosets()?;
    let terms = ksum_c_terms(w, &space, c_max.floor() as i64)?;
    Ok(terms.iter().map(|t| t.1 as f64).sum())
}

/// The identity followed by `n - 1` random integer matrices with entries in [-12, 12].
pub fn sample_sigmas(n: usize, seed: u64) -> Vec<Mat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![IDENTITY];
    while out.len() < n {
        out.push([0; 4].map(|_| rng.gen_range(-12..=12)));
    }
    out
}

pub fn ksum_sigma_sup(w: &AutoWeight, sigmas: &[Mat]) -> Result<f64> {
    require_alpha0(w)?;
    ksum_check_size(w)?;
    let space = w.cosets()?;
    let mut best = 0u64;
    for s in sigmas {
        best = best.max(correlation(w, &space, s)?);
    }
    Ok(best as f64)
}

/// Hermite-form representatives of SL2(Z) \ M_{2,1,k}(Z).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeckeReps {
    pub k: u64,
    pub reps: Vec<Mat>,
}

impl HeckeReps {
    pub fn new(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("determinant must be positive".into()));
        }
        let mut reps = Vec::new();
        for a in 1..=k {
            if k % a != 0 || a.gcd(&k) != 1 {
                continue;
            }
            let d = k / a;
            for b in 0..d {
                if b.gcd(&d).gcd(&k) == 1 {
                    reps.push([a as i64, b as i64, 0, d as i64]);
                }
            }
        }
        Ok(HeckeReps { k, reps })
    }

    /// Row Hermite normal form of a matrix with positive determinant.
    pub fn hermite_form(m: &Mat) -> Result<Mat> {
        if det(m) <= 0 {
            return Err(Error::InvalidInput(format!("det {:?} must be positive", m)));
        }
        let (mut r1, mut r2) = ([m[0], m[1]], [m[2], m[3]]);
        while r2[0] != 0 {
            let q = Integer::div_floor(&r1[0], &r2[0]);
            let rem = [r1[0] - q * r2[0], r1[1] - q * r2[1]];
            r1 = r2;
            r2 = [-rem[0], -rem[1]];
        }
        if r1[0] < 0 {
            r1 = [-r1[0], -r1[1]];
            r2 = [-r2[0], -r2[1]];
        }
        let q = Integer::div_floor(&r1[1], &r2[1]);
        r1[1] -= q * r2[1];
        Ok([r1[0], r1[1], 0, r2[1]])
    }

    pub fn in_class(m: &Mat, k: u64) -> bool {
        let k = k as i64;
        det(m) == k && m[0].gcd(&m[2]).gcd(&k) == 1 && m[1].gcd(&m[3]).gcd(&k) == 1
    }
}

/// The twisted K-sum: over rational `g` in SL2(R) with
/// `|a| + |b| L + |c| / L + |d| <= 10`, the absolute value of
/// `sum_{s1, s2} sum_tau alpha(tau s) alpha(tau s g)` where
/// `s = s1^{-1} g s2` must be integral and `s_j = (1, f_j r; 0, k)`.
/// The weight vanishes on non-integral matrices.
pub fn twisted_ksum(w: &AutoWeight, k: u64, r: u64, l: f64) -> Result<f64> {
    Ok(twisted_ksum_terms(w, k, r, l)?.iter().map(|t| t.1 as f64).sum())
}

/// Nonzero per-`g` terms of [`twisted_ksum`], keyed by the integral matrix `k g`.
pub fn twisted_ksum_terms(w: &AutoWeight, k: u64, r: u64, l: f64) -> Result<Vec<(Mat, u64)>> {
    if !(1..=4).contains(&k) || k.gcd(&r) != 1 || r == 0 {
        return Err(Error::InvalidInput(format!("need 1 <= k <= 4 and gcd(k, r) = 1, got k = {k}, r = {r}")));
    }
    if w.r1 * w.r2 > 200 {
        return Err(Error::Capacity(format!("r1 r2 = {} > 200", w.r1 * w.r2)));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!("L = {l} must be positive")));
    }
    let space = w.cosets()?;
    let ki = k as i64;
    let k2 = ki * ki;
    let bound = 10.0 * k as f64 + 1e-9;
    let fs: Vec<i64> = (1..=ki).filter(|f| f.gcd(&ki) == 1).collect();
    let a_max = 10 * ki;
    let c_max = (bound * l).floor() as i64;
    let cand = (2 * a_max + 1) as u64 * (2 * c_max + 1) as u64 * (2 * a_max + 1) as u64;
    if cand > TWISTED_CANDIDATE_CAP {
        return Err(Error::Capacity(format!("{cand} candidates > {TWISTED_CANDIDATE_CAP}")));
    }
    let ri = r as i64;
    let mut out = Vec::new();
    let mut visit = |g: Mat| -> Result<()> {
        let mut total = 0u64;
        for &f1 in &fs {
            for &f2 in &fs {
                let left = mat_mul(&[ki, -f1 * ri, 0, 1], &g)?;
                let x = mat_mul(&left, &[1, f2 * ri, 0, ki])?;
                if x.iter().any(|v| v % k2 != 0) {
                    continue;
                }
                let sigma = x.map(|v| v / k2);
                let y = mat_mul(&sigma, &g)?;
                if y.iter().any(|v| v % ki != 0) {
                    continue;
                }
                let sg = y.map(|v| v / ki);
                for tau in &space.reps {
                    if w.eval(&mat_mul(tau, &sigma)?) == 1 && w.eval(&mat_mul(tau, &sg)?) == 1 {
                        total += 1;
                    }
                }
            }
        }
        if total > 0 {
            out.push((g, total));
        }
        Ok(())
    };
    let weight = |a: i64, b: i64, c: i64, d: i64| a.abs() as f64 + b.abs() as f64 * l + c.abs() as f64 / l + d.abs() as f64;
    for a in -a_max..=a_max {
        for c in -c_max..=c_max {
            let rest = bound - a.abs() as f64 - c.abs() as f64 / l;
            if rest < 0.0 {
                continue;
            }
            let d_max = rest.floor() as i64;
            for d in -d_max..=d_max {
                if c != 0 {
                    let num = a * d - k2;
                    if num % c != 0 {
                        continue;
                    }
                    let b = num / c;
                    if weight(a, b, c, d) <= bound {
                        visit([a, b, c, d])?;
                    }
                } else if a * d == k2 {
                    let b_max = ((bound - weight(a, 0, 0, d)) / l).floor() as i64;
                    for b in -b_max..=b_max {
                        visit([a, b, 0, d])?;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::psi;
    use std::collections::HashSet;

    #[test]
    fn proj_line_sizes() {
        assert_eq!(proj_line(1).unwrap().len(), 1);
        assert_eq!(proj_line(2).unwrap().len(), 3);
        assert_eq!(proj_line(4).unwrap().len(), 6);
        assert_eq!(proj_line(6).unwrap().len(), 12);
        for q in 1..=1000u64 {
            assert_eq!(proj_line(q).unwrap().len() as u64, psi(q), "q = {q}");
        }
        assert!(matches!(proj_line(1_000_001), Err(Error::Capacity(_))));
    }

    // classes under unit scaling, by brute force
    fn brute_proj_count(q: u64) -> usize {
        let units: Vec<u64> = (1..=q).filter(|u| u.gcd(&q) == 1).collect();
        let mut seen = HashSet::new();
        let mut classes = 0;
        for x in 0..q {
            for y in 0..q {
                if x.gcd(&y).gcd(&q) != 1 || seen.contains(&(x, y)) {
                    continue;
                }
                classes += 1;
                for &u in &units {
                    seen.insert((x * u % q, y * u % q));
                }
            }
        }
        classes
    }

    #[test]
    fn proj_line_matches_equivalence_classes() {
        for q in 1..=40u64 {
            let pts = proj_line(q).unwrap();
            assert_eq!(pts.len(), brute_proj_count(q));
            let set: HashSet<_> = pts.iter().collect();
            assert_eq!(set.len(), pts.len());
            for p in &pts {
                assert_eq!(ProjPoint::new(q, p.x as i64, p.y as i64).unwrap(), *p);
            }
        }
    }

    #[test]
    fn normalization_is_scaling_invariant() {
        let q = 360u64;
        for x in 0..60i64 {
            for y in 0..60i64 {
                if let Some(p) = ProjPoint::new(q, x, y) {
                    for u in [7i64, 11, 13, 359] {
                        assert_eq!(ProjPoint::new(q, x * u, y * u).unwrap(), p);
                    }
                }
            }
        }
        assert!(ProjPoint::new(4, 2, 0).is_none());
    }

    #[test]
    fn coset_counts() {
        assert_eq!(coset_list(1, 1).unwrap().len(), 1);
        assert_eq!(coset_list(2, 2).unwrap().len(), 6);
        assert_eq!(coset_list(3, 1).unwrap().len(), 4);
        for q1 in 1..=10u64 {
            for q2 in 1..=10u64 {
                if q1.gcd(&q2) == 1 {
                    assert_eq!(coset_list(q1, q2).unwrap().len() as u64, psi(q1) * psi(q2));
                }
            }
        }
    }

    #[test]
    fn identity_label_and_round_trip() {
        let lab = coset_of(&IDENTITY, 6, 10).unwrap();
        assert_eq!((lab.top.x, lab.top.y), (1, 0));
        assert_eq!((lab.bottom.x, lab.bottom.y), (0, 1));
        assert!(coset_of(&[2, 0, 0, 1], 3, 3).is_err());
        for q1 in 1..=10u64 {
            for q2 in 1..=10u64 {
                for lab in coset_list(q1, q2).unwrap() {
                    let m = lift_coset(&lab);
                    assert_eq!(det(&m), 1);
                    assert_eq!(coset_of(&m, q1, q2).unwrap(), lab);
                }
            }
        }
    }

    #[test]
    fn label_is_left_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (q1, q2) = (rng.gen_range(1..=9u64), rng.gen_range(1..=9u64));
            let g = random_sl2(&mut rng);
            let gamma = random_gamma2(&mut rng, q1, q2);
            let prod = mul128(&gamma, &g);
            let red = |m: &Mat128| -> Mat { m.map(|v| v as i64) };
            if prod.iter().all(|v| v.abs() < i64::MAX as i128) && g.iter().all(|v| v.abs() < i64::MAX as i128) {
                assert_eq!(coset_of(&red(&prod), q1, q2).unwrap(), coset_of(&red(&g), q1, q2).unwrap());
            }
        }
    }

    #[test]
    fn specific_label_against_orbit() {
        // (2,1;1,1) with (q1,q2) = (3,2): search the Gamma_2 orbit of the identity lift
        let m = [2, 1, 1, 1];
        let lab = coset_of(&m, 3, 2).unwrap();
        let l = lift_coset(&lab);
        // m l^{-1} must lie in Gamma_2(3, 2)
        let linv = [l[3], -l[1], -l[2], l[0]];
        let g = mat_mul(&m, &linv).unwrap();
        assert_eq!(g[1].rem_euclid(3), 0);
        assert_eq!(g[2].rem_euclid(2), 0);
    }

    #[test]
    fn automorphy() {
        assert!(check_automorphy(&AutoWeight::alpha0(1, 1).unwrap(), 100, 1));
        assert!(check_automorphy(&AutoWeight::alpha0(2, 3).unwrap(), 1000, 2));
        assert!(check_automorphy(&AutoWeight::new(6, 10, 7, WeightMode::Alpha).unwrap(), 1000, 3));
        let w = AutoWeight::alpha0(2, 3).unwrap();
        // the upper-right entry of Gamma_2(r2, r1) is divisible by r2, so 1[rt2 | b] survives
        let top_right = |m: &Mat128| (m[1].rem_euclid(w.rt2 as i128) == 0) as u8;
        assert!(check_automorphy_with(top_right, w.r2, w.r1, 1000, 4));
        let broken = |m: &Mat128| (m[2].rem_euclid(w.rt2 as i128) == 0) as u8;
        assert!(!check_automorphy_with(broken, w.r2, w.r1, 1000, 4));
        assert!(AutoWeight::alpha0(4, 3).is_err());
    }

    fn n0(w: &AutoWeight) -> u64 {
        factorize(w.r0).unwrap().primes().map(|p| p * (p + 1)).product()
    }

    #[test]
    fn ksum_small_cases() {
        let one = AutoWeight::alpha0(1, 1).unwrap();
        assert_eq!(ksum_b(&one, 7.0).unwrap(), 15.0);
        assert_eq!(ksum_c(&one, 7.5).unwrap(), 14.0);
        assert_eq!(ksum_sigma_sup(&one, &sample_sigmas(50, 1)).unwrap(), 1.0);
        let w = AutoWeight::alpha0(2, 3).unwrap();
        let space = w.cosets().unwrap();
        for (c, v) in ksum_c_terms(&w, &space, 12).unwrap() {
            assert_eq!(v, if c % 6 == 0 { n0(&w) } else { 0 }, "c = {c}");
        }
        for (r1, r2) in [(6, 6), (6, 10), (2, 1), (15, 10)] {
            let w = AutoWeight::alpha0(r1, r2).unwrap();
            let space = w.cosets().unwrap();
            assert_eq!(correlation(&w, &space, &IDENTITY).unwrap(), n0(&w));
            let count = space.reps.iter().filter(|t| w.eval(t) == 1).count() as u64;
            assert_eq!(count, n0(&w));
        }
    }

    #[test]
    fn ksum_independent_of_lifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (r1, r2) in [(6, 10), (3, 5), (14, 2)] {
            let w = AutoWeight::alpha0(r1, r2).unwrap();
            let space = w.cosets().unwrap();
            let mut moved = space.clone();
            for rep in moved.reps.iter_mut() {
                let mut g = random_gamma2(&mut rng, w.r2, w.r1);
                while g.iter().any(|v| v.abs() > 1000) {
                    g = random_gamma2(&mut rng, w.r2, w.r1);
                }
                *rep = mat_mul(&g.map(|v| v as i64), rep).unwrap();
            }
            for s in sample_sigmas(30, 2) {
                assert_eq!(correlation(&w, &space, &s).unwrap(), correlation(&w, &moved, &s).unwrap());
            }
        }
    }

    #[test]
    fn hecke_reps() {
        for k in 1..=12u64 {
            let h = HeckeReps::new(k).unwrap();
            for r in &h.reps {
                assert!(HeckeReps::in_class(r, k));
                assert_eq!(HeckeReps::hermite_form(r).unwrap(), *r);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(k);
            for rep in &h.reps {
                for _ in 0..50 {
                    let g = random_sl2(&mut rng);
                    if g.iter().any(|v| v.abs() > 10_000) {
                        continue;
                    }
                    let m = mat_mul(&g.map(|v| v as i64), rep).unwrap();
                    assert!(HeckeReps::in_class(&m, k));
                    assert_eq!(HeckeReps::hermite_form(&m).unwrap(), *rep);
                }
            }
        }
        assert_eq!(HeckeReps::new(5).unwrap().reps.len(), 4);
    }

    #[test]
    fn twisted_trivial_case_counts_pairs() {
        let w = AutoWeight::new(1, 1, 1, WeightMode::Alpha).unwrap();
        let v = twisted_ksum(&w, 1, 1, 1.0).unwrap();
        // every g in SL2(Z) with the entry bound contributes 1
        let mut count = 0;
        for a in -10i64..=10 {
            for b in -10i64..=10 {
                for c in -10i64..=10 {
                    for d in -10i64..=10 {
                        if a * d - b * c == 1 && a.abs() + b.abs() + c.abs() + d.abs() <= 10 {
                            count += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(v, count as f64);
        assert!(twisted_ksum(&w, 2, 2, 1.0).is_err());
    }
}
