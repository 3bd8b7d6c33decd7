//! Pairs of shifted factorizations `ad = r1 n + h`, `bc = r2 n + h` and
//! the integer matrices of determinant `h (rt2 - rt1)` that encode them.

use std::collections::BTreeMap;

use num_integer::Integer;

use crate::arith::{factorize, gcd_infty, is_squarefree, mod_inv};
use crate::error::{Error, Result};
use crate::weights::SmoothWeight;

pub const EXHAUSTIVE_X_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetInstance {
    pub r1: u64,
    pub r2: u64,
    pub h: i64,
    pub r0: u64,
    pub rt1: u64,
    pub rt2: u64,
    /// Largest divisor of `|rt2 - rt1|` supported on primes of `r1 r2`; 0 when `rt1 = rt2`.
    pub k: u64,
    pub target_det: i64,
}

impl DetInstance {
    pub fn new(r1: u64, r2: u64, h: i64) -> Result<Self> {
        if r1 == 0 || r2 == 0 || !is_squarefree(r1) || !is_squarefree(r2) {
            return Err(Error::InvalidInput(format!("r1 = {r1}, r2 = {r2} must be squarefree and positive")));
        }
        if h == 0 {
            return Err(Error::InvalidInput("h must be nonzero".into()));
        }
        let r0 = r1.gcd(&r2);
        let (rt1, rt2) = (r1 / r0, r2 / r0);
        let diff = rt2 as i64 - rt1 as i64;
        let k = if diff == 0 { 0 } else { gcd_infty(diff.unsigned_abs(), r1 * r2) };
        Ok(DetInstance { r1, r2, h, r0, rt1, rt2, k, target_det: h * diff })
    }

    fn require_nondegenerate(&self) -> Result<()> {
        if self.rt1 == self.rt2 {
            return Err(Error::InvalidInput("r1 = r2 gives determinant 0; use the diagonal sum".into()));
        }
        Ok(())
    }

    /// `n` with `r1 n` strictly inside `(x/2, x)`, the open support of `w1(r1 n / x)`.
    pub fn n_range(&self, x: f64) -> std::ops::RangeInclusive<i64> {
        let lo = (x / (2.0 * self.r1 as f64)).floor() as i64 + 1;
        let hi = (x / self.r1 as f64).ceil() as i64 - 1;
        lo.max(1)..=hi
    }

    /// The weight `alpha` on a matrix.
    pub fn alpha(&self, m: &MatrixSolution) -> bool {
        let v = m.a as i128 * m.d as i128 - self.h as i128 * self.rt2 as i128;
        m.a % self.rt2 as i64 == 0 && m.c % self.rt1 as i64 == 0 && v.rem_euclid(self.r2 as i128) == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectSolution {
    pub n: i64,
    pub a: i64,
    pub d: i64,
    pub b: i64,
    pub c: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatrixSolution {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl MatrixSolution {
    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput(format!("x = {x} must be positive")));
    }
    if x > EXHAUSTIVE_X_CAP {
        return Err(Error::Capacity(format!("x = {x} > {EXHAUSTIVE_X_CAP:e} for exhaustive enumeration")));
    }
    Ok(())
}

fn positive_divisors(n: i64) -> Result<Vec<i64>> {
    Ok(factorize(n as u64)?.divisors().into_iter().map(|d| d as i64).collect())
}

/// All `(n, a, d, b, c)` with positive factors `ad = r1 n + h`, `bc = r2 n + h`.
pub fn direct_solutions(inst: &DetInstance, x: f64) -> Result<Vec<DirectSolution>> {
    check_x(x)?;
    let mut out = Vec::new();
    for n in inst.n_range(x) {
        let (u, v) = (inst.r1 as i64 * n + inst.h, inst.r2 as i64 * n + inst.h);
        if u <= 0 || v <= 0 {
            return Err(Error::Domain(format!("r n + h <= 0 at n = {n}")));
        }
        let du = positive_divisors(u)?;
        let dv = positive_divisors(v)?;
        for &a in &du {
            for &b in &dv {
                out.push(DirectSolution { n, a, d: u / a, b, c: v / b });
            }
        }
    }
    Ok(out)
}

/// The matrix attached to a factorization pair.
pub fn to_matrix(inst: &DetInstance, s: &DirectSolution) -> MatrixSolution {
    MatrixSolution { a: inst.rt2 as i64 * s.a, b: s.b, c: inst.rt1 as i64 * s.c, d: s.d }
}

/// Inverse of [`to_matrix`]; `None` if the conditions on `m` fail.
pub fn recover(inst: &DetInstance, m: &MatrixSolution) -> Option<DirectSolution> {
    if m.det() != inst.target_det || !inst.alpha(m) {
        return None;
    }
    let a = m.a / inst.rt2 as i64;
    let num = a * m.d - inst.h;
    if num % inst.r1 as i64 != 0 {
        return None;
    }
    Some(DirectSolution { n: num / inst.r1 as i64, a, d: m.d, b: m.b, c: m.c / inst.rt1 as i64 })
}

/// Positive matrices of determinant `h (rt2 - rt1)` with `rt2 | a`, `rt1 | c`,
/// `r2 | ad - h rt2`, and `(ad - h rt2) / rt2` strictly inside `(x/2, x)`.
pub fn matrix_solutions(inst: &DetInstance, x: f64) -> Result<Vec<MatrixSolution>> {
    inst.require_nondegenerate()?;
    check_x(x)?;
    let (rt1, rt2, h) = (inst.rt1 as i64, inst.rt2 as i64, inst.h);
    let lo = x / 2.0 + h as f64;
    let hi = x + h as f64;
    let mut out = Vec::new();
    if hi <= 1.0 {
        return Ok(out);
    }
    let a_max = hi.ceil() as i64;
    for a0 in 1..=a_max {
        let a = rt2 * a0;
        // a0 d must lie strictly inside (lo, hi)
        let d_lo = ((lo / a0 as f64).floor() as i64 + 1).max(1);
        let d_hi = (hi / a0 as f64).ceil() as i64 - 1;
        for d in d_lo..=d_hi {
            let prod = a0 * d;
            if (prod as f64) <= lo || (prod as f64) >= hi {
                continue;
            }
            let v = a as i128 * d as i128 - h as i128 * rt2 as i128;
            if v.rem_euclid(inst.r2 as i128) != 0 {
                continue;
            }
            let bc = a * d - inst.target_det;
            if bc <= 0 {
                continue;
            }
            for c in positive_divisors(bc)? {
                if c % rt1 == 0 {
                    let m = MatrixSolution { a, b: bc / c, c, d };
                    assert!(inst.alpha(&m) && m.det() == inst.target_det);
                    out.push(m);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correspondence {
    pub count_direct: usize,
    pub count_matrix: usize,
    pub equal: bool,
}

/// Counts both sides and checks that the map is a bijection onto the matrix list.
pub fn correspondence_check(inst: &DetInstance, x: f64) -> Result<Correspondence> {
    let direct = direct_solutions(inst, x)?;
    let mut matrices = matrix_solutions(inst, x)?;
    let mut mapped: Vec<MatrixSolution> = direct.iter().map(|s| to_matrix(inst, s)).collect();
    mapped.sort();
    matrices.sort();
    let round_trip = direct.iter().all(|s| recover(inst, &to_matrix(inst, s)) == Some(*s));
    Ok(Correspondence {
        count_direct: direct.len(),
        count_matrix: matrices.len(),
        equal: round_trip && mapped == matrices,
    })
}

/// `sum_n w1(r1 n / x) w2(r2 n / x) d(r1 n + h) d(r2 n + h)` through the matrix side.
pub fn weighted_matrix_sum(inst: &DetInstance, x: f64, w1: &SmoothWeight, w2: &SmoothWeight) -> Result<f64> {
    let (rt1, rt2, h) = (inst.rt1 as f64, inst.rt2 as f64, inst.h as f64);
    let mut terms: Vec<f64> = matrix_solutions(inst, x)?
        .iter()
        .map(|m| {
            let u = (m.a as f64 * m.d as f64 - h * rt2) / (rt2 * x);
            let v = (m.b as f64 * m.c as f64 - h * rt1) / (rt1 * x);
            w1.eval(u) * w2.eval(v)
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    Ok(crate::numeric::pairwise_sum(&terms))
}

/// One member of the family produced by [`split_by_gcd`]. The divisor
/// pairs satisfy `u0 v0 = u0p v0p = s0`, `u1 v1 = s1`, `u2 v2 = s2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedInstance {
    pub parent: DetInstance,
    pub u0: u64,
    pub v0: u64,
    pub u0p: u64,
    pub v0p: u64,
    pub u1: u64,
    pub v1: u64,
    pub u2: u64,
    pub v2: u64,
    pub h_red: i64,
    pub r0_red: u64,
    pub rt1_red: u64,
    pub rt2_red: u64,
}

impl ReducedInstance {
    fn s(&self) -> (u64, u64, u64) {
        (self.u0 * self.v0, self.u1 * self.v1, self.u2 * self.v2)
    }

    /// Maps a reduced matrix back to the parent instance.
    pub fn unreduce(&self, m: &MatrixSolution) -> MatrixSolution {
        let (_, s1, s2) = self.s();
        MatrixSolution {
            a: m.a * (s2 * self.u0 * self.u1) as i64,
            b: m.b * (self.u0p * self.u2) as i64,
            c: m.c * (s1 * self.v0p * self.v2) as i64,
            d: m.d * (self.v0 * self.v1) as i64,
        }
    }

    /// Reduced determinant `h' (rt2 - rt1)`.
    pub fn target_det(&self) -> i64 {
        self.h_red * (self.parent.rt2 as i64 - self.parent.rt1 as i64)
    }
}

/// Splits off `s0 = gcd(h, r0)`, `s_i = gcd(h, rt_i)` from the determinant equation.
pub fn split_by_gcd(inst: &DetInstance) -> Vec<ReducedInstance> {
    let h = inst.h.unsigned_abs();
    let s0 = h.gcd(&inst.r0);
    let s1 = h.gcd(&inst.rt1);
    let s2 = h.gcd(&inst.rt2);
    let divs = |s: u64| factorize(s).expect("small").divisors();
    let mut out = Vec::new();
    for &u0 in &divs(s0) {
        for &u0p in &divs(s0) {
            for &u1 in &divs(s1) {
                for &u2 in &divs(s2) {
                    out.push(ReducedInstance {
                        parent: inst.clone(),
                        u0,
                        v0: s0 / u0,
                        u0p,
                        v0p: s0 / u0p,
                        u1,
                        v1: s1 / u1,
                        u2,
                        v2: s2 / u2,
                        h_red: inst.h / (s0 * s1 * s2) as i64,
                        r0_red: inst.r0 / s0,
                        rt1_red: inst.rt1 / s1,
                        rt2_red: inst.rt2 / s2,
                    });
                }
            }
        }
    }
    out
}

/// Solutions of a reduced instance, enumerated directly: positive matrices of
/// determinant `h' (rt2 - rt1)` with `rt2' | a`, `rt1' | c`,
/// `r0' rt2' | ad - h' rt2`, `gcd(a, v0 v1) = gcd(b, v0p v2) = 1`, and the
/// parent window mapped through the scalings.
pub fn reduced_solutions(red: &ReducedInstance, x: f64) -> Result<Vec<MatrixSolution>> {
    let p = &red.parent;
    p.require_nondegenerate()?;
    check_x(x)?;
    let (s0, s1, s2) = red.s();
    let scale = (s0 * s1 * s2) as f64;
    let h_red = red.h_red;
    let rt2 = p.rt2 as i64;
    // parent window: s0 s1 s2 (ad - h' rt2) / rt2 in (x/2, x)
    let lo = (x / 2.0) * rt2 as f64 / scale + (h_red * rt2) as f64;
    let hi = x * rt2 as f64 / scale + (h_red * rt2) as f64;
    let mut out = Vec::new();
    if hi <= 1.0 {
        return Ok(out);
    }
    let (mod_a, mod_c) = (red.rt2_red as i64, red.rt1_red as i64);
    let modulus = (red.r0_red * red.rt2_red) as i128;
    let target = red.target_det();
    let a_max = hi.ceil() as i64;
    for a in (mod_a..=a_max).step_by(mod_a as usize) {
        if a.gcd(&((red.v0 * red.v1) as i64)) != 1 {
            continue;
        }
        let d_lo = ((lo / a as f64).floor() as i64 + 1).max(1);
        let d_hi = (hi / a as f64).ceil() as i64 - 1;
        for d in d_lo..=d_hi {
            let prod = a as f64 * d as f64;
            if prod <= lo || prod >= hi {
                continue;
            }
            let v = a as i128 * d as i128 - h_red as i128 * rt2 as i128;
            if v.rem_euclid(modulus) != 0 {
                continue;
            }
            let bc = a * d - target;
            if bc <= 0 {
                continue;
            }
            for c in positive_divisors(bc)? {
                let b = bc / c;
                if c % mod_c == 0 && b.gcd(&((red.v0p * red.v2) as i64)) == 1 {
                    out.push(MatrixSolution { a, b, c, d });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitReport {
    pub count_parent: usize,
    pub count_reduced: usize,
    pub members: usize,
    /// The union of unreduced solutions equals the parent solution set.
    pub bijective: bool,
    /// Every member has `h'` coprime to `r0' rt1' rt2'`.
    pub coprime: bool,
}

pub fn split_check(inst: &DetInstance, x: f64) -> Result<SplitReport> {
    let mut parent = matrix_solutions(inst, x)?;
    parent.sort();
    let family = split_by_gcd(inst);
    let mut union = Vec::new();
    let mut coprime = true;
    for red in &family {
        let hm = red.h_red.unsigned_abs();
        coprime &= hm.gcd(&(red.r0_red * red.rt1_red * red.rt2_red)) == 1;
        for m in reduced_solutions(red, x)? {
            union.push(red.unreduce(&m));
        }
    }
    let count_reduced = union.len();
    union.sort();
    Ok(SplitReport {
        count_parent: parent.len(),
        count_reduced,
        members: family.len(),
        bijective: union == parent,
        coprime,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaReport {
    pub k: u64,
    /// Solution counts keyed by `(gcd(a, c, k), gcd(b, d, k))`.
    pub cells: BTreeMap<(u64, u64), usize>,
    pub total: usize,
    pub partition_ok: bool,
    /// Rescaled matrices have `gcd(a', c', k / g1) = gcd(b', d', k / g2) = 1`.
    pub rescaled_ok: bool,
    /// Rescaled matrices violating the stronger `gcd(a', c', k) = gcd(b', d', k) = 1`.
    pub strong_violations: usize,
    /// For `gcd(h, r1 r2) = 1`: every rescaled matrix satisfies
    /// `a'd' = g3 h rt2 mod (r0 / gcd(r0, g1 g2)) rt2`.
    pub congruence_ok: Option<bool>,
}

pub fn gamma_decomposition(inst: &DetInstance, x: f64) -> Result<GammaReport> {
    let sols = matrix_solutions(inst, x)?;
    let k = inst.k;
    let kd: Vec<u64> = factorize(k)?.divisors();
    let mut cells: BTreeMap<(u64, u64), usize> = kd.iter().flat_map(|&a| kd.iter().map(move |&b| ((a, b), 0))).collect();
    let coprime_h = inst.h.unsigned_abs().gcd(&(inst.r1 * inst.r2)) == 1;
    let mut rescaled_ok = true;
    let mut congruence_ok = true;
    let mut strong_violations = 0;
    let ki = k as i64;
    for m in &sols {
        let g1 = m.a.gcd(&m.c).gcd(&ki);
        let g2 = m.b.gcd(&m.d).gcd(&ki);
        *cells.get_mut(&(g1 as u64, g2 as u64)).expect("divisor of k") += 1;
        let r = MatrixSolution { a: m.a / g1, b: m.b / g2, c: m.c / g1, d: m.d / g2 };
        rescaled_ok &= r.a.gcd(&r.c).gcd(&(ki / g1)) == 1 && r.b.gcd(&r.d).gcd(&(ki / g2)) == 1;
        rescaled_ok &= r.det() * g1 * g2 == inst.target_det;
        if r.a.gcd(&r.c).gcd(&ki) != 1 || r.b.gcd(&r.d).gcd(&ki) != 1 {
            strong_violations += 1;
        }
        if coprime_h {
            let g = (g1 * g2) as u64;
            let gr = inst.r0.gcd(&g);
            let m0 = inst.r0 / gr;
            let g3 = mod_inv(((g / gr) % m0) as i64, m0 as i64).expect("coprime to r0 / gcd");
            let modulus = (m0 * inst.rt2) as i128;
            let lhs = r.a as i128 * r.d as i128;
            let rhs = g3 as i128 * inst.h as i128 * inst.rt2 as i128;
            congruence_ok &= (lhs - rhs).rem_euclid(modulus) == 0;
        }
    }
    let total = sols.len();
    let partition_ok = cells.values().sum::<usize>() == total;
    Ok(GammaReport {
        k,
        cells,
        total,
        partition_ok,
        rescaled_ok,
        strong_violations,
        congruence_ok: coprime_h.then_some(congruence_ok),
    })
}

pub fn gamma_decomposition_check(inst: &DetInstance, x: f64) -> Result<bool> {
    let r = gamma_decomposition(inst, x)?;
    Ok(r.partition_ok && r.rescaled_ok && r.congruence_ok.unwrap_or(true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_d(n: i64) -> usize {
        (1..=n).filter(|d| n % d == 0).count()
    }

    #[test]
    fn hand_example() {
        let inst = DetInstance::new(2, 3, 1).unwrap();
        // n = 1: ad = 3, bc = 4
        let sols: Vec<_> = direct_solutions(&inst, 3.0).unwrap();
        assert_eq!(sols.len(), 6);
        assert!(sols.iter().all(|s| s.n == 1));
        assert!(direct_solutions(&inst, 1.0).unwrap().is_empty());
    }

    #[test]
    fn direct_count_matches_naive() {
        let inst = DetInstance::new(5, 7, -3).unwrap();
        let x = 2000.0;
        let naive: usize = inst.n_range(x).map(|n| naive_d(5 * n - 3) * naive_d(7 * n - 3)).sum();
        assert_eq!(direct_solutions(&inst, x).unwrap().len(), naive);
    }

    #[test]
    fn correspondence_small() {
        for (r1, r2, h) in [(2, 3, 1), (1, 2, 5), (3, 10, -7), (6, 10, 1), (15, 2, 11)] {
            let inst = DetInstance::new(r1, r2, h).unwrap();
            let c = correspondence_check(&inst, 1000.0).unwrap();
            assert!(c.equal && c.count_direct == c.count_matrix && c.count_direct > 0, "{r1} {r2} {h}");
        }
        assert!(matrix_solutions(&DetInstance::new(6, 6, 1).unwrap(), 100.0).is_err());
        assert!(DetInstance::new(4, 3, 1).is_err());
    }

    #[test]
    fn split_identity_when_coprime() {
        let inst = DetInstance::new(2, 3, 1).unwrap();
        let fam = split_by_gcd(&inst);
        assert_eq!(fam.len(), 1);
        assert_eq!((fam[0].h_red, fam[0].r0_red, fam[0].rt1_red, fam[0].rt2_red), (1, 1, 2, 3));
        let r = split_check(&inst, 500.0).unwrap();
        assert!(r.bijective && r.coprime);
    }

    #[test]
    fn split_conserves_counts() {
        for (r1, r2, h) in [(2, 3, 6), (6, 10, 2), (6, 10, 30), (10, 15, -5), (14, 21, 42)] {
            let inst = DetInstance::new(r1, r2, h).unwrap();
            let r = split_check(&inst, 1000.0).unwrap();
            assert!(r.count_parent > 0);
            assert_eq!(r.count_parent, r.count_reduced, "{r1} {r2} {h}");
            assert!(r.bijective && r.coprime);
            let c = correspondence_check(&inst, 1000.0).unwrap();
            assert!(c.equal);
        }
    }

    #[test]
    fn gamma_cells() {
        let inst = DetInstance::new(2, 3, 1).unwrap();
        assert_eq!(inst.k, 1);
        let r = gamma_decomposition(&inst, 1000.0).unwrap();
        assert_eq!(r.cells.len(), 1);
        // rt1 = 3, rt2 = 5, r0 = 2: k = 2
        let inst = DetInstance::new(6, 10, 4).unwrap();
        assert_eq!(inst.k, 2);
        let r = gamma_decomposition(&inst, 2000.0).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert!(r.partition_ok && r.rescaled_ok);
        assert!(r.cells.iter().filter(|(_, &v)| v > 0).count() > 1);
        assert!(gamma_decomposition_check(&DetInstance::new(6, 10, 1).unwrap(), 2000.0).unwrap());
    }
}
