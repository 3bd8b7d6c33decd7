//! Direct evaluation of the convolution sums, dyadic boxes, the partition
//! classifier and the remainder-bound envelopes.

use num_rational::Ratio;
use num_traits::Zero;
use rayon::prelude::*;

use crate::arith::{sieve_dk, DivisorTable};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::weights::SmoothWeight;

pub const SUM_X_CAP: f64 = 1e8;
pub const FLOAT_SLACK: f64 = 1e-12;
pub const MAX_BOX_K: u32 = 6;
pub const MAX_SUBSET_K: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionQuery {
    pub k: u32,
    pub h: i64,
    pub x: f64,
    pub w: SmoothWeight,
}

impl ConvolutionQuery {
    /// Integers `n` with `w(n/x)` possibly nonzero, i.e. `lo x < n < hi x`.
    pub fn window(&self) -> std::ops::RangeInclusive<u64> {
        open_window(self.w.lo * self.x, self.w.hi * self.x)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.h == 0 {
            return Err(Error::InvalidInput(format!("need k >= 1 and h != 0, got k = {}, h = {}", self.k, self.h)));
        }
        if !(self.x > 0.0) || self.x > SUM_X_CAP {
            return Err(Error::Capacity(format!("x = {} outside (0, {SUM_X_CAP:e}]", self.x)));
        }
        let w = self.window();
        if !w.is_empty() && (*w.start() as i64) + self.h < 1 {
            return Err(Error::Domain(format!("n + h < 1 inside the window at x = {}, h = {}", self.x, self.h)));
        }
        Ok(())
    }
}

fn open_window(lo: f64, hi: f64) -> std::ops::RangeInclusive<u64> {
    let a = (lo.floor() as i64 + 1).max(1) as u64;
    let b = hi.ceil() as i64 - 1;
    if b < a as i64 {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    a..=b as u64
}

/// Sieve tables for `d_k` on `[1, limit]` and `d` on `[1, limit + |h|]`.
#[derive(Debug, Clone)]
pub struct SumTables {
    pub k: u32,
    pub dk: DivisorTable,
    pub d: DivisorTable,
}

impl SumTables {
    pub fn new(k: u32, limit: usize, h: i64) -> Result<Self> {
        let d = sieve_dk(2, limit + h.unsigned_abs() as usize)?;
        let dk = if k == 2 { d.clone() } else { sieve_dk(k, limit)? };
        Ok(SumTables { k, dk, d })
    }

    pub fn for_query(q: &ConvolutionQuery) -> Result<Self> {
        q.validate()?;
        Self::new(q.k, (q.w.hi * q.x).ceil() as usize, q.h)
    }
}

/// `sum_n w(n/x) d_k(n) d(n + h)`.
pub fn direct_sum(q: &ConvolutionQuery) -> Result<f64> {
    direct_sum_with(&SumTables::for_query(q)?, q)
}

pub fn direct_sum_with(t: &SumTables, q: &ConvolutionQuery) -> Result<f64> {
    q.validate()?;
    let win = q.window();
    if win.is_empty() {
        return Ok(0.0);
    }
    if t.k != q.k || *win.end() as usize > t.dk.limit || (*win.end() as i64 + q.h) as usize > t.d.limit {
        return Err(Error::Capacity("sieve tables too small for the query".into()));
    }
    let terms: Vec<f64> = win
        .into_par_iter()
        .map(|n| q.w.eval(n as f64 / q.x) * t.dk.get(n as usize) as f64 * t.d.get((n as i64 + q.h) as usize) as f64)
        .collect();
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertainQuery {
    pub r1: u64,
    pub r2: u64,
    pub h: i64,
    pub x: f64,
    pub w1: SmoothWeight,
    pub w2: SmoothWeight,
}

impl CertainQuery {
    /// `n` with both `r1 n / x` and `r2 n / x` inside the open supports.
    pub fn window(&self) -> std::ops::RangeInclusive<u64> {
        let (r1, r2) = (self.r1 as f64, self.r2 as f64);
        let lo = (self.w1.lo * self.x / r1).max(self.w2.lo * self.x / r2);
        let hi = (self.w1.hi * self.x / r1).min(self.w2.hi * self.x / r2);
        open_window(lo, hi)
    }

    fn validate(&self) -> Result<()> {
        if self.r1 == 0 || self.r2 == 0 || self.h == 0 {
            return Err(Error::InvalidInput("need r1, r2 >= 1 and h != 0".into()));
        }
        if !(self.x > 0.0) || self.x > SUM_X_CAP {
            return Err(Error::Capacity(format!("x = {} outside (0, {SUM_X_CAP:e}]", self.x)));
        }
        let w = self.window();
        if !w.is_empty() && (self.r1.min(self.r2) * *w.start()) as i64 + self.h < 1 {
            return Err(Error::Domain("r n + h < 1 inside the window".into()));
        }
        Ok(())
    }

    /// Largest argument of `d` needed.
    pub fn table_limit(&self) -> usize {
        let w = self.window();
        if w.is_empty() {
            return 1;
        }
        (self.r1.max(self.r2) * *w.end()) as usize + self.h.unsigned_abs() as usize
    }
}

/// Per-`n` terms `w1(r1 n/x) w2(r2 n/x) d(r1 n + h) d(r2 n + h)`.
pub fn certain_terms_with(d: &DivisorTable, q: &CertainQuery) -> Result<Vec<(u64, f64)>> {
    q.validate()?;
    if q.table_limit() > d.limit {
        return Err(Error::Capacity("divisor table too small for the query".into()));
    }
    let (r1, r2, h, x) = (q.r1, q.r2, q.h, q.x);
    Ok(q.window()
        .into_par_iter()
        .map(|n| {
            let w = q.w1.eval((r1 * n) as f64 / x) * q.w2.eval((r2 * n) as f64 / x);
            let d1 = d.get(((r1 * n) as i64 + h) as usize) as f64;
            let d2 = d.get(((r2 * n) as i64 + h) as usize) as f64;
            (n, w * d1 * d2)
        })
        .collect())
}

pub fn certain_terms(q: &CertainQuery) -> Result<Vec<(u64, f64)>> {
    q.validate()?;
    certain_terms_with(&sieve_dk(2, q.table_limit())?, q)
}

/// `sum_n w1(r1 n/x) w2(r2 n/x) d(r1 n + h) d(r2 n + h)`.
pub fn certain_sum(q: &CertainQuery) -> Result<f64> {
    q.validate()?;
    certain_sum_with(&sieve_dk(2, q.table_limit())?, q)
}

pub fn certain_sum_with(d: &DivisorTable, q: &CertainQuery) -> Result<f64> {
    let terms: Vec<f64> = certain_terms_with(d, q)?.into_iter().map(|t| t.1).collect();
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseTag {
    A,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionCase {
    pub tag: CaseTag,
    /// Zero-based indices of the case C subset; empty for A and B.
    pub witness: Vec<usize>,
}

struct Thresholds<T> {
    a: T,
    b: T,
    c_lo: T,
    c_hi: T,
}

fn classify_core<T>(alpha: &[T], th: &Thresholds<T>, ge: impl Fn(T, T) -> bool) -> Option<PartitionCase>
where
    T: Copy + Zero,
{
    let k = alpha.len();
    if ge(alpha[0], th.a) {
        return Some(PartitionCase { tag: CaseTag::A, witness: vec![] });
    }
    if k >= 2 && ge(alpha[0] + alpha[1], th.b) {
        return Some(PartitionCase { tag: CaseTag::B, witness: vec![] });
    }
    let in_c = |s: T| ge(s, th.c_lo) && ge(th.c_hi, s);
    // contiguous runs i..=j, shortest first from the front
    for i in 0..k {
        let mut s = T::zero();
        for j in i..k {
            s = s + alpha[j];
            if in_c(s) {
                return Some(PartitionCase { tag: CaseTag::C, witness: (i..=j).collect() });
            }
        }
    }
    if k <= MAX_SUBSET_K {
        for mask in 1u32..(1 << k) {
            let s = (0..k).filter(|i| mask >> i & 1 == 1).fold(T::zero(), |acc, i| acc + alpha[i]);
            if in_c(s) {
                return Some(PartitionCase { tag: CaseTag::C, witness: (0..k).filter(|i| mask >> i & 1 == 1).collect() });
            }
        }
    }
    None
}

fn verify_case<T: Copy + Zero>(alpha: &[T], th: &Thresholds<T>, case: &PartitionCase, ge: impl Fn(T, T) -> bool) -> bool {
    match case.tag {
        CaseTag::A => ge(alpha[0], th.a),
        CaseTag::B => alpha.len() >= 2 && ge(alpha[0] + alpha[1], th.b),
        CaseTag::C => {
            let s = case.witness.iter().fold(T::zero(), |acc, &i| acc + alpha[i]);
            !case.witness.is_empty() && ge(s, th.c_lo) && ge(th.c_hi, s)
        }
    }
}

/// Exact classifier; `alpha` descending in `[0, 1]` summing to 1, `0 < delta <= 1/16`.
pub fn classify_partition(alpha: &[Ratio<i64>], delta: Ratio<i64>) -> Result<PartitionCase> {
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    if !(delta > zero && delta <= Ratio::new(1, 16)) {
        return Err(Error::InvalidInput(format!("delta = {delta} outside (0, 1/16]")));
    }
    if alpha.is_empty()
        || alpha.iter().any(|a| *a < zero || *a > one)
        || alpha.windows(2).any(|w| w[0] < w[1])
        || alpha.iter().copied().sum::<Ratio<i64>>() != one
    {
        return Err(Error::InvalidInput("alpha must be descending in [0, 1] with sum 1".into()));
    }
    let th = Thresholds {
        a: Ratio::new(1, 3) + delta * Ratio::new(2, 3),
        b: Ratio::new(1, 2) + delta,
        c_lo: delta * 2,
        c_hi: Ratio::new(1, 3) - delta * Ratio::new(4, 3),
    };
    let ge = |a: Ratio<i64>, b: Ratio<i64>| a >= b;
    let case = classify_core(alpha, &th, ge).ok_or_else(|| Error::LemmaViolation(format!("no case for alpha = {alpha:?}")))?;
    if !verify_case(alpha, &th, &case, ge) {
        return Err(Error::LemmaViolation(format!("case {case:?} fails to re-verify")));
    }
    Ok(case)
}

/// Floating-point classifier with slack [`FLOAT_SLACK`] in every comparison.
pub fn classify_partition_f64(alpha: &[f64], delta: f64) -> Result<PartitionCase> {
    if !(delta > 0.0 && delta <= 1.0 / 16.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} outside (0, 1/16]")));
    }
    let sum: f64 = alpha.iter().sum();
    if alpha.is_empty()
        || alpha.iter().any(|a| !(*a >= -FLOAT_SLACK && *a <= 1.0 + FLOAT_SLACK))
        || alpha.windows(2).any(|w| w[0] + FLOAT_SLACK < w[1])
        || (sum - 1.0).abs() > FLOAT_SLACK
    {
        return Err(Error::InvalidInput(format!("alpha = {alpha:?} must be descending in [0, 1] with sum 1")));
    }
    let th = Thresholds {
        a: 1.0 / 3.0 + 2.0 * delta / 3.0,
        b: 0.5 + delta,
        c_lo: 2.0 * delta,
        c_hi: 1.0 / 3.0 - 4.0 * delta / 3.0,
    };
    let ge = |a: f64, b: f64| a >= b - FLOAT_SLACK;
    let case = classify_core(alpha, &th, ge).ok_or_else(|| Error::LemmaViolation(format!("no case for alpha = {alpha:?}")))?;
    if !verify_case(alpha, &th, &case, ge) {
        return Err(Error::LemmaViolation(format!("case {case:?} fails to re-verify")));
    }
    Ok(case)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartitionGridReport {
    pub points: usize,
    pub violations: usize,
    pub count_a: usize,
    pub count_b: usize,
    pub count_c: usize,
    pub first_violation: Option<Vec<Ratio<i64>>>,
}

/// Partitions of `n` into at most `k` parts, each descending.
fn partitions(n: i64, k: usize) -> Vec<Vec<i64>> {
    fn rec(rest: i64, max: i64, slots: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if slots == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for p in (0..=rest.min(max)).rev() {
            if p * (slots as i64) < rest {
                break;
            }
            cur.push(p);
            rec(rest - p, p, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, k, &mut Vec::new(), &mut out);
    out
}

/// Runs the exact classifier on every descending `alpha` with entries in
/// `(1/resolution) Z` and length `1..=kmax`.
pub fn verify_partition_grid(resolution: i64, kmax: usize, delta: Ratio<i64>) -> Result<PartitionGridReport> {
    if resolution < 1 || kmax == 0 || kmax > MAX_SUBSET_K {
        return Err(Error::InvalidInput(format!("resolution = {resolution}, kmax = {kmax} out of range")));
    }
    let mut rep = PartitionGridReport::default();
    for k in 1..=kmax {
        for parts in partitions(resolution, k) {
            let alpha: Vec<Ratio<i64>> = parts.iter().map(|&p| Ratio::new(p, resolution)).collect();
            rep.points += 1;
            match classify_partition(&alpha, delta) {
                Ok(c) => match c.tag {
                    CaseTag::A => rep.count_a += 1,
                    CaseTag::B => rep.count_b += 1,
                    CaseTag::C => rep.count_c += 1,
                },
                Err(Error::LemmaViolation(_)) => {
                    rep.violations += 1;
                    rep.first_violation.get_or_insert(alpha);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentThresholds {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
}

impl ExponentThresholds {
    pub fn new(x: f64, delta: f64) -> Self {
        ExponentThresholds {
            x1: x.powf(1.0 / 3.0 + 2.0 * delta / 3.0),
            x2: x.powf(0.5 + delta),
            x3: x.powf(1.0 / 3.0 - 4.0 * delta / 3.0),
            x4: x.powf(2.0 * delta),
        }
    }
}

/// `a_i in [A_i, 2 A_i)` with `A_1 >= ... >= A_k` powers of two; `multiplicity`
/// counts the distinct orderings the box stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicBox {
    pub bounds: Vec<u64>,
    pub multiplicity: u64,
}

impl DyadicBox {
    pub fn product(&self) -> u64 {
        self.bounds.iter().product()
    }
}

fn orderings(v: &[u64]) -> u64 {
    let fact = |n: usize| (1..=n as u64).product::<u64>();
    let mut m = fact(v.len());
    let mut i = 0;
    while i < v.len() {
        let j = (i..v.len()).find(|&j| v[j] != v[i]).unwrap_or(v.len());
        m /= fact(j - i);
        i = j;
    }
    m
}

/// Boxes whose product range `[P, 2^k P)` meets the open window `(lo x, hi x)`.
pub fn dyadic_cover(x: f64, k: u32, w: &SmoothWeight) -> Result<Vec<DyadicBox>> {
    if k == 0 || k > MAX_BOX_K {
        return Err(Error::Capacity(format!("dyadic cover supports 1 <= k <= {MAX_BOX_K}, got {k}")));
    }
    let win = open_window(w.lo * x, w.hi * x);
    if win.is_empty() {
        return Ok(vec![]);
    }
    let (nlo, nhi) = (*win.start(), *win.end());
    let emax = 63 - nhi.leading_zeros();
    let mut out = Vec::new();
    fn rec(k: usize, emax: u32, cur: &mut Vec<u32>, nlo: u64, nhi: u64, out: &mut Vec<DyadicBox>) {
        if cur.len() == k {
            let e: u32 = cur.iter().sum();
            let (p, top) = (1u128 << e, 1u128 << (e + k as u32));
            if p <= nhi as u128 && top > nlo as u128 {
                let bounds: Vec<u64> = cur.iter().map(|&e| 1u64 << e).collect();
                let multiplicity = orderings(&bounds);
                out.push(DyadicBox { bounds, multiplicity });
            }
            return;
        }
        let used: u32 = cur.iter().sum();
        let top = cur.last().copied().unwrap_or(emax).min(emax - used.min(emax));
        for e in (0..=top).rev() {
            cur.push(e);
            rec(k, emax, cur, nlo, nhi, out);
            cur.pop();
        }
    }
    rec(k as usize, emax, &mut Vec::new(), nlo, nhi, &mut out);
    Ok(out)
}

/// `multiplicity * sum_{a_i in box} f(a_1 ... a_k)` over products inside `window`.
pub fn box_sum<F: Fn(u64) -> f64 + Sync>(b: &DyadicBox, window: std::ops::RangeInclusive<u64>, f: F) -> f64 {
    let (lo, hi) = (*window.start(), *window.end());
    let mut terms = Vec::new();
    fn rec<F: Fn(u64) -> f64>(bounds: &[u64], m: u64, lo: u64, hi: u64, f: &F, terms: &mut Vec<f64>) {
        let Some((&a, rest)) = bounds.split_first() else {
            if m >= lo {
                terms.push(f(m));
            }
            return;
        };
        let tail_min: u64 = rest.iter().product();
        for ai in a..2 * a {
            let mm = m * ai;
            if mm.saturating_mul(tail_min) > hi {
                break;
            }
            rec(rest, mm, lo, hi, f, terms);
        }
    }
    rec(&b.bounds, 1, lo, hi, &f, &mut terms);
    b.multiplicity as f64 * pairwise_sum(&terms)
}

/// Sum of [`box_sum`] over the cover; equals the direct sum for the same summand.
pub fn cover_sum<F: Fn(u64) -> f64 + Sync>(x: f64, k: u32, w: &SmoothWeight, f: F) -> Result<f64> {
    let win = open_window(w.lo * x, w.hi * x);
    let parts: Vec<f64> = dyadic_cover(x, k, w)?.iter().map(|b| box_sum(b, win.clone(), &f)).collect();
    Ok(pairwise_sum(&parts))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AppliedBound {
    Rem1,
    Rem2,
    /// with `A = prod_{i in I} A_i`
    Rem3(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxClass {
    pub alpha: Vec<f64>,
    pub case: PartitionCase,
    pub bound: AppliedBound,
}

/// Classifies a box through `alpha_i = log A_i / log prod A_j`.
pub fn classify_box(b: &DyadicBox, delta: f64) -> Result<BoxClass> {
    let logs: Vec<f64> = b.bounds.iter().map(|&a| (a as f64).ln()).collect();
    let total: f64 = logs.iter().sum();
    let alpha: Vec<f64> = if total == 0.0 {
        let mut v = vec![0.0; logs.len()];
        v[0] = 1.0;
        v
    } else {
        logs.iter().map(|l| l / total).collect()
    };
    let case = classify_partition_f64(&alpha, delta)?;
    let bound = match case.tag {
        CaseTag::A => AppliedBound::Rem1,
        CaseTag::B => AppliedBound::Rem2,
        CaseTag::C => AppliedBound::Rem3(case.witness.iter().map(|&i| b.bounds[i] as f64).product()),
    };
    Ok(BoxClass { alpha, case, bound })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderBounds {
    pub rem1: f64,
    pub rem2: f64,
    /// `(subset bitmask, A, rem3(A))` for every nonempty subset.
    pub rem3: Vec<(u32, f64, f64)>,
}

/// `x^{3/2} / A_1^{3/2}` with `x^eps` dropped.
pub fn rem1(x: f64, a1: f64) -> f64 {
    (x / a1).powf(1.5)
}

pub fn rem2(x: f64, a1: f64, a2: f64, h: i64, theta: f64) -> f64 {
    let p = a1 * a2;
    x.powf(1.5) / p
        * (1.0 + p.powf(2.0 * theta) / x.powf(theta))
        * (1.0 + (a2 / a1).sqrt())
        * (1.0 + (h.unsigned_abs() as f64).powf(0.25) * (p / x).sqrt())
}

pub fn rem3(x: f64, a: f64, h: i64, theta: f64) -> f64 {
    let hf = h.unsigned_abs() as f64;
    x / a.sqrt() + a.powf(0.75) * x.powf(0.75) * (hf.powf(theta / 2.0) * a.powf(theta / 2.0) + (x / a).powf(theta / 2.0))
}

pub fn remainder_bounds(b: &DyadicBox, x: f64, h: i64, theta: f64) -> Result<RemainderBounds> {
    if !(0.0..=7.0 / 64.0).contains(&theta) {
        return Err(Error::InvalidInput(format!("theta = {theta} outside [0, 7/64]")));
    }
    let a: Vec<f64> = b.bounds.iter().map(|&v| v as f64).collect();
    let a2 = a.get(1).copied().unwrap_or(1.0);
    let k = a.len();
    let rem3s = (1u32..(1 << k))
        .map(|mask| {
            let p: f64 = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).product();
            (mask, p, rem3(x, p, h, theta))
        })
        .collect();
    Ok(RemainderBounds { rem1: rem1(x, a[0]), rem2: rem2(x, a[0], a2, h, theta), rem3: rem3s })
}
