//! Grid experiments for `S(x) - M(x)`, exponent tables, and the bundled
//! verification suite.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Deserialize;

use crate::arith::{factorize, psi, ramanujan_sum, sieve_dk};
use crate::error::{Error, Result};
use crate::mainterm::{main_term, Truncation, MAIN_TERM_REL_TOL};
use crate::numeric::ols_slope;
use crate::sums::{direct_sum_with, ConvolutionQuery, SumTables};
use crate::weights::SmoothWeight;

/// Points with `|R|` below this multiple of the main-term quadrature tolerance are dropped.
pub const NOISE_FLOOR_FACTOR: f64 = 10.0;
pub const MIN_GRID_RATIO: f64 = 1.3;
pub const CSV_HEADER: &str = "x,S,M,R,absR";

fn default_weight() -> String {
    "mollifier".into()
}
fn default_delta() -> f64 {
    1.0 / 16.0
}
fn default_theta() -> f64 {
    7.0 / 64.0
}
fn default_truncation() -> String {
    "hyperbola".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: u32,
    pub h: i64,
    #[serde(alias = "xMin")]
    pub x_min: f64,
    #[serde(alias = "xMax")]
    pub x_max: f64,
    #[serde(alias = "gridPoints")]
    pub grid_points: usize,
    #[serde(default = "default_weight")]
    pub weight: String,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub seed: u64,
    /// 0 lets rayon choose.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_truncation")]
    pub truncation: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=4).contains(&self.k) {
            return bad(format!("k = {} outside 1..=4", self.k));
        }
        if self.h == 0 {
            return bad("h must be nonzero".into());
        }
        if !(self.x_min >= 1e3) || !(self.x_max <= crate::sums::SUM_X_CAP) {
            return bad(format!("need 10^3 <= x_min and x_max <= 10^8, got {} .. {}", self.x_min, self.x_max));
        }
        if self.grid_points < 6 {
            return bad(format!("grid_points = {} < 6", self.grid_points));
        }
        if (self.x_max / self.x_min).log10() < 1.5 {
            return bad("grid must span at least 1.5 decades".into());
        }
        if self.ratio() < MIN_GRID_RATIO {
            return bad(format!("grid ratio {:.4} < {MIN_GRID_RATIO}", self.ratio()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0 / 16.0) {
            return bad(format!("delta = {} outside (0, 1/16]", self.delta));
        }
        if !(0.0..=7.0 / 64.0).contains(&self.theta) {
            return bad(format!("theta = {} outside [0, 7/64]", self.theta));
        }
        SmoothWeight::by_name(&self.weight).map_err(|e| Error::Config(e.to_string()))?;
        Truncation::by_name(&self.truncation)?;
        if self.x_min * 0.5 + (self.h as f64) < 1.0 {
            return bad(format!("n + h <= 0 occurs on the grid for h = {}", self.h));
        }
        Ok(())
    }

    fn ratio(&self) -> f64 {
        (self.x_max / self.x_min).powf(1.0 / (self.grid_points - 1) as f64)
    }

    /// Geometric grid from `x_min` to `x_max`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.grid_points;
        (0..n)
            .map(|i| if i + 1 == n { self.x_max } else { self.x_min * (self.x_max / self.x_min).powf(i as f64 / (n - 1) as f64) })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub x: f64,
    pub s: f64,
    pub m: f64,
    pub r: f64,
    pub abs_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<Row>,
    /// Slope of `log |R|` against `log x` over the rows kept.
    pub fitted_slope: Option<f64>,
    /// `x` values whose `|R|` fell below the noise floor.
    pub dropped: Vec<f64>,
    pub predicted_exponent: f64,
    pub slope_s: f64,
    pub slope_m: f64,
}

impl ErrorReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.x, r.s, r.m, r.r, r.abs_r));
        }
        out
    }
}

/// Noise floor for `|R|` at a grid point.
pub fn noise_floor(m: f64) -> f64 {
    NOISE_FLOOR_FACTOR * MAIN_TERM_REL_TOL * m.abs()
}

pub fn fit_slope(rows: &[Row]) -> (Option<f64>, Vec<f64>) {
    let mut dropped = Vec::new();
    let (mut lx, mut lr) = (Vec::new(), Vec::new());
    for r in rows {
        if r.abs_r <= noise_floor(r.m) {
            dropped.push(r.x);
        } else {
            lx.push(r.x.ln());
            lr.push(r.abs_r.ln());
        }
    }
    let slope = if lx.len() >= 2 { ols_slope(&lx, &lr).ok().map(|s| s.0) } else { None };
    (slope, dropped)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let w = SmoothWeight::by_name(&cfg.weight)?;
    let trunc = Truncation::by_name(&cfg.truncation)?;
    let tables = SumTables::new(cfg.k, (w.hi * cfg.x_max).ceil() as usize, cfg.h)?;
    let rows: Vec<Row> = cfg
        .grid()
        .par_iter()
        .map(|&x| {
            let q = ConvolutionQuery { k: cfg.k, h: cfg.h, x, w: w.clone() };
            let s = direct_sum_with(&tables, &q)?;
            let m = main_term(cfg.k, cfg.h, x, &w, trunc)?.value;
            Ok(Row { x, s, m, r: s - m, abs_r: (s - m).abs() })
        })
        .collect::<Result<_>>()?;
    let (fitted_slope, dropped) = fit_slope(&rows);
    let lx: Vec<f64> = rows.iter().map(|r| r.x.ln()).collect();
    let slope_s = ols_slope(&lx, &rows.iter().map(|r| r.s.abs().ln()).collect::<Vec<_>>())?.0;
    let slope_m = ols_slope(&lx, &rows.iter().map(|r| r.m.abs().ln()).collect::<Vec<_>>())?.0;
    let h_exp = (cfg.h.unsigned_abs() as f64).ln() / cfg.x_max.ln();
    Ok(ErrorReport {
        rows,
        fitted_slope,
        dropped,
        predicted_exponent: main_theorem_exponent_f64(cfg.delta, cfg.theta, h_exp),
        slope_s,
        slope_m,
    })
}

type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Ratio::new(n, d)
}

fn qmax(a: Q, b: Q) -> Q {
    if a >= b {
        a
    } else {
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HRange {
    A,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryExponent {
    pub range: HRange,
    pub exponent: Q,
    pub nontrivial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentTable {
    pub delta: Q,
    pub theta: Q,
    pub h_exp: Q,
    /// Largest exponent among the terms of the general theorem.
    pub theorem: Q,
    /// `h`-thresholds `1/3 + 8 delta theta / 3` and the (b)/(c) boundary.
    pub general_thresholds: (Q, Q),
    pub general: CorollaryExponent,
    /// `x`-exponents of the two ranges at `delta = 1/16`: `15/16 + 3 theta / 8` and `15/16 + theta / 8`.
    pub small_x_parts: (Q, Q),
    pub small: CorollaryExponent,
    /// Largest `h`-exponent for which the small-(b) bound stays below 1; `None` for `theta = 0`.
    pub small_b_limit: Option<Q>,
    /// `(eta, 1 - 7 eta / 128)` with `|h| = x^{25/28 - eta}`, when `eta > 0`.
    pub intro: Option<(Q, Q)>,
}

pub fn exponent_calculator(delta: Q, theta: Q, h_exp: Q) -> Result<ExponentTable> {
    let (zero, one) = (q(0, 1), q(1, 1));
    if delta < zero || delta > q(1, 16) || theta < zero || theta >= q(1, 2) || h_exp < zero || h_exp >= one {
        return Err(Error::InvalidInput(format!("delta = {delta}, theta = {theta}, h_exp = {h_exp} out of range")));
    }
    let (d, t, e) = (delta, theta, h_exp);
    let two = q(2, 1);
    let first = one - d + two * d * t + qmax(zero, e / 4 - (q(1, 4) - d / 2));
    let second = one - d + t / 3 + two * d * t / 3 + qmax(zero, e * t / 2 - (t / 6 + q(4, 3) * d * t));
    let theorem = qmax(first, second);

    let ea = q(1, 3) + q(8, 3) * d * t;
    let eb = (one - two * d + two * (one - q(16, 1) * d) * t / 3) / (one - two * t);
    let general = if e <= ea {
        (HRange::A, one - d + (one + two * d) * t / 3)
    } else if e <= eb {
        (HRange::B, e * t / 2 + one - d + (one - q(4, 1) * d) * t / 6)
    } else {
        (HRange::C, e / 4 + q(3, 4) - d / 2 + two * d * t)
    };
    let small_x_parts = (q(15, 16) + q(3, 8) * t, q(15, 16) + t / 8);
    let small = if e <= q(45, 128) {
        (HRange::A, small_x_parts.0)
    } else {
        (HRange::B, e * t / 2 + small_x_parts.1)
    };
    let small_b_limit = (t > zero).then(|| (one - small_x_parts.1) * two / t);
    let eta = q(25, 28) - e;
    let intro = (eta > zero).then(|| (eta, one - q(7, 128) * eta));
    let mk = |(range, exponent): (HRange, Q)| CorollaryExponent { range, exponent, nontrivial: exponent < one };
    Ok(ExponentTable {
        delta,
        theta,
        h_exp,
        theorem,
        general_thresholds: (ea, eb),
        general: mk(general),
        small_x_parts,
        small: mk(small),
        small_b_limit,
        intro,
    })
}

/// Rational approximation with denominator up to `10^6`.
pub fn to_ratio(v: f64) -> Q {
    let den = 1_000_000i64;
    Ratio::new((v * den as f64).round() as i64, den)
}

fn main_theorem_exponent_f64(delta: f64, theta: f64, h_exp: f64) -> f64 {
    let (d, t, e) = (delta, theta, h_exp);
    let first = 1.0 - d + 2.0 * d * t + (e / 4.0 - (0.25 - d / 2.0)).max(0.0);
    let second = 1.0 - d + t / 3.0 + 2.0 * d * t / 3.0 + (e * t / 2.0 - (t / 6.0 + 4.0 * d * t / 3.0)).max(0.0);
    first.max(second)
}

pub fn format_exponent_table(t: &ExponentTable) -> String {
    let f = |v: Q| format!("{v} ({:.6})", *v.numer() as f64 / *v.denom() as f64);
    let mut s = String::new();
    s.push_str(&format!("delta = {}, theta = {}, h exponent = {}\n", t.delta, t.theta, t.h_exp));
    s.push_str(&format!("general theorem: {}\n", f(t.theorem)));
    s.push_str(&format!(
        "general corollary: range {:?}, exponent {}, nontrivial {} (thresholds {}, {})\n",
        t.general.range,
        f(t.general.exponent),
        t.general.nontrivial,
        f(t.general_thresholds.0),
        f(t.general_thresholds.1)
    ));
    s.push_str(&format!(
        "small corollary: range {:?}, exponent {}, nontrivial {} (x-parts {}, {})\n",
        t.small.range,
        f(t.small.exponent),
        t.small.nontrivial,
        f(t.small_x_parts.0),
        f(t.small_x_parts.1)
    ));
    match t.small_b_limit {
        Some(l) => s.push_str(&format!("small-(b) nontrivial for h exponent < {}\n", f(l))),
        None => s.push_str("small-(b) nontrivial for every h exponent\n"),
    }
    match t.intro {
        Some((eta, ex)) => s.push_str(&format!("uniform bound: eta = {}, exponent {}\n", f(eta), f(ex))),
        None => s.push_str("uniform bound: h exponent at or above 25/28\n"),
    }
    s.push_str("(x^eps factors omitted)\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult { name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {} {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// `c_d(h)` from a candidate implementation against `sum_{(a,d)=1} cos(2 pi a h / d)`.
pub fn check_ramanujan_with<F: Fn(u64, i64) -> Result<i64>>(f: F, d_max: u64, h_max: i64) -> CheckResult {
    let mut worst_im = 0.0f64;
    let mut mismatch = None;
    'outer: for d in 1..=d_max {
        let units: Vec<u64> = (1..=d).filter(|a| num_integer::Integer::gcd(a, &d) == 1).collect();
        for h in -h_max..=h_max {
            let (mut re, mut im) = (0.0, 0.0);
            for &a in &units {
                let ang = 2.0 * std::f64::consts::PI * ((a as i128 * h as i128).rem_euclid(d as i128) as f64) / d as f64;
                re += ang.cos();
                im += ang.sin();
            }
            worst_im = worst_im.max(im.abs());
            match f(d, h) {
                Ok(v) if v == re.round() as i64 => {}
                other => {
                    mismatch = Some(format!("d = {d}, h = {h}: got {other:?}, sum {re:.6}"));
                    break 'outer;
                }
            }
        }
    }
    let ok = mismatch.is_none() && worst_im < 1e-9;
    CheckResult::new(
        "ramanujan-sum",
        ok,
        mismatch.unwrap_or_else(|| format!("d <= {d_max}, |h| <= {h_max}, max |Im| = {worst_im:.2e}")),
    )
}

fn check_sieve(limit: usize, kmax: u32) -> Result<CheckResult> {
    let mut prev: Vec<u64> = vec![1; limit + 1];
    for k in 2..=kmax {
        let mut next = vec![0u64; limit + 1];
        for a in 1..=limit {
            for m in (a..=limit).step_by(a) {
                next[m] += prev[m / a];
            }
        }
        let t = sieve_dk(k, limit)?;
        if let Some(n) = (1..=limit).find(|&n| t.get(n) != next[n]) {
            return Ok(CheckResult::new("dk-sieve", false, format!("k = {k}, n = {n}")));
        }
        prev = next;
    }
    Ok(CheckResult::new("dk-sieve", true, format!("n <= {limit}, k <= {kmax}")))
}

fn check_cosets() -> Result<CheckResult> {
    for q1 in 1..=8u64 {
        for q2 in 1..=8u64 {
            let n = crate::sl2::coset_list(q1, q2)?.len() as u64;
            if num_integer::Integer::gcd(&q1, &q2) == 1 && n != psi(q1) * psi(q2) {
                return Ok(CheckResult::new("coset-count", false, format!("({q1}, {q2}): {n}")));
            }
            for lab in crate::sl2::coset_list(q1, q2)? {
                if crate::sl2::coset_of(&crate::sl2::lift_coset(&lab), q1, q2)? != lab {
                    return Ok(CheckResult::new("coset-count", false, format!("lift of {lab:?}")));
                }
            }
        }
    }
    Ok(CheckResult::new("coset-count", true, "q1, q2 <= 8, psi product and lift round trip".into()))
}

fn check_automorphy(seed: u64) -> Result<CheckResult> {
    use crate::sl2::{check_automorphy, AutoWeight, WeightMode};
    let mut n = 0;
    for (r1, r2, h) in [(2, 3, 1), (6, 10, 1), (5, 7, 3), (15, 10, 7)] {
        for mode in [WeightMode::Alpha0, WeightMode::Alpha] {
            let w = AutoWeight::new(r1, r2, h, mode)?;
            if !check_automorphy(&w, 200, seed) {
                return Ok(CheckResult::new("automorphy", false, format!("({r1}, {r2}, {h}) {mode:?}")));
            }
            n += 1;
        }
    }
    Ok(CheckResult::new("automorphy", true, format!("{n} weights x 200 random Gamma_2 elements")))
}

fn check_ksum_envelopes(seed: u64) -> Result<CheckResult> {
    use crate::sl2::{ksum_b, ksum_c, ksum_sigma_sup, sample_sigmas, AutoWeight};
    let sigmas = sample_sigmas(50, seed);
    let (mut rb, mut rc, mut rs) = (0.0f64, 0.0f64, 0.0f64);
    for (r1, r2) in [(2u64, 3u64), (6, 10), (5, 15), (14, 6)] {
        let w = AutoWeight::alpha0(r1, r2)?;
        let (r0, t) = (w.r0 as f64, (w.rt1 * w.rt2) as f64);
        for b in [1.0, 8.0, 32.0] {
            rb = rb.max(ksum_b(&w, b)? / (r0 * r0 * (b + 1.0)));
            rc = rc.max(ksum_c(&w, b)? / (r0 * r0 * b / t + r0 * r0));
        }
        rs = rs.max(ksum_sigma_sup(&w, &sigmas)? / (r0 * r0));
    }
    let ok = rb <= 8.0 && rc <= 8.0 && rs <= 8.0;
    Ok(CheckResult::new("ksum-envelopes", ok, format!("b-ratio {rb:.3}, c-ratio {rc:.3}, sigma-ratio {rs:.3} (limit 8)")))
}

fn check_twisted() -> Result<CheckResult> {
    use crate::sl2::{twisted_ksum, AutoWeight};
    // with k = 1 and r1 = r2 = 1 the sum counts g in SL2(Z) with |a| + |b| L + |c| / L + |d| <= 10
    let mut ok = true;
    for (l, num, den) in [(1.0, 1i64, 1i64), (2.0, 2, 1), (0.5, 1, 2)] {
        let mut count = 0u64;
        for a in -10i64..=10 {
            for b in -20i64..=20 {
                for c in -20i64..=20 {
                    for d in -10i64..=10 {
                        let norm = (a.abs() + d.abs()) * num * den + b.abs() * num * num + c.abs() * den * den;
                        if norm <= 10 * num * den && a * d - b * c == 1 {
                            count += 1;
                        }
                    }
                }
            }
        }
        ok &= twisted_ksum(&AutoWeight::alpha0(1, 1)?, 1, 1, l)? == count as f64;
    }
    let mut worst = 0.0f64;
    for (r1, r2) in [(2u64, 3u64), (6, 10)] {
        let w = AutoWeight::alpha0(r1, r2)?;
        let (r0, t) = (w.r0 as f64, (w.rt1 * w.rt2) as f64);
        for k in [1u64, 2] {
            for l in [0.5, 1.0, 2.0] {
                let v = twisted_ksum(&w, k, 1, l)?;
                let kf = k as f64;
                worst = worst.max(v / (kf * r0 * r0 / l + kf * kf * r0 * r0 * l / t + kf * kf * r0 * r0));
            }
        }
    }
    Ok(CheckResult::new(
        "twisted-ksum",
        ok,
        format!("trivial weight matches SL2(Z) point count: {ok}; measured envelope ratio {worst:.3}"),
    ))
}

fn check_correspondence(seed: u64) -> Result<CheckResult> {
    use crate::detmat::{correspondence_check, split_check, DetInstance};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut n = 0;
    while n < 8 {
        let (r1, r2) = (rng.gen_range(1..=20u64), rng.gen_range(1..=20u64));
        let h = rng.gen_range(-10..=10i64);
        if r1 == r2 || h == 0 || !crate::arith::is_squarefree(r1) || !crate::arith::is_squarefree(r2) {
            continue;
        }
        let inst = DetInstance::new(r1, r2, h)?;
        if (r1.min(r2) as i64) * 1000 + h < 1 {
            continue;
        }
        let c = correspondence_check(&inst, 2000.0)?;
        let s = split_check(&inst, 2000.0)?;
        if !c.equal || !s.bijective {
            return Ok(CheckResult::new("correspondence", false, format!("({r1}, {r2}, {h})")));
        }
        n += 1;
    }
    Ok(CheckResult::new("correspondence", true, format!("{n} random instances at x = 2000")))
}

fn check_partition() -> Result<CheckResult> {
    let mut pts = 0;
    for d in [q(1, 32), q(1, 16)] {
        let r = crate::sums::verify_partition_grid(48, 5, d)?;
        if r.violations > 0 {
            return Ok(CheckResult::new("partition-grid", false, format!("delta = {d}: {:?}", r.first_violation)));
        }
        pts += r.points;
    }
    Ok(CheckResult::new("partition-grid", true, format!("{pts} grid points, 0 violations")))
}

fn check_euler() -> Result<CheckResult> {
    use crate::mainterm::{dirichlet_direct, euler_product, DirichletApprox};
    let mut worst = 0.0f64;
    for (k, h) in [(2u32, 1i64), (3, 6)] {
        let a = DirichletApprox { k, h, s: 2.0, n: 200_000, p: 10_000 };
        worst = worst.max((dirichlet_direct(&a)?.value - euler_product(&a)?.completed).abs());
    }
    Ok(CheckResult::new("euler-product", worst < 1e-6, format!("max |direct - euler| = {worst:.2e}")))
}

fn check_gprime() -> Result<CheckResult> {
    use crate::mainterm::{g_beta_eval, gprime_eval};
    let eps = 1e-4;
    let mut worst = 0.0f64;
    for m in 1..=2000u64 {
        let fd = -(g_beta_eval(m, 6, 1.0 + eps)? - g_beta_eval(m, 6, 1.0 - eps)?) / (2.0 * eps);
        worst = worst.max((fd - gprime_eval(m, 6)?).abs());
    }
    Ok(CheckResult::new("gprime-fd", worst < 1e-6, format!("max |fd - g'| = {worst:.2e}")))
}

fn check_exponents() -> Result<CheckResult> {
    let t = exponent_calculator(q(1, 16), q(7, 64), q(0, 1))?;
    let ok = t.small.exponent == q(501, 512)
        && t.small_x_parts.1 == q(15, 16) + q(7, 64) / 8
        && t.small_b_limit == Some(q(25, 28))
        && t.intro == Some((q(25, 28), q(1, 1) - q(7, 128) * q(25, 28)));
    Ok(CheckResult::new("exponent-table", ok, format!("small (a) = {}", t.small.exponent)))
}

fn check_main_term() -> Result<CheckResult> {
    let w = SmoothWeight::mollifier();
    let x = 1e5;
    let q = ConvolutionQuery { k: 2, h: 1, x, w: w.clone() };
    let s = crate::sums::direct_sum(&q)?;
    let m = main_term(2, 1, x, &w, Truncation::Hyperbola)?.value;
    let rel = (s - m).abs() / s;
    Ok(CheckResult::new("main-term", rel < 0.01, format!("k = 2, x = 1e5: |S - M| / S = {rel:.2e}")))
}

fn check_factorize(seed: u64) -> Result<CheckResult> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..200 {
        let n: u64 = rng.gen_range(2..1u64 << 50);
        let f = factorize(n)?;
        let back: u64 = f.factors.iter().map(|&(p, e)| p.pow(e)).product();
        if back != n || !f.factors.iter().all(|&(p, _)| crate::arith::is_prime(p)) {
            return Ok(CheckResult::new("factorize", false, format!("n = {n}")));
        }
    }
    Ok(CheckResult::new("factorize", true, "200 random n < 2^50".into()))
}

/// Runs the bundled verification suite.
pub fn verify_all(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        check_sieve(20_000, 4)?,
        check_ramanujan_with(ramanujan_sum, 120, 30),
        check_factorize(seed)?,
        check_cosets()?,
        check_automorphy(seed)?,
        check_ksum_envelopes(seed)?,
        check_twisted()?,
        check_correspondence(seed)?,
        check_partition()?,
        check_euler()?,
        check_gprime()?,
        check_exponents()?,
        check_main_term()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::from_toml("k = 2\nh = 1\nx_min = 1e4\nx_max = 1e6\ngrid_points = 8\n").unwrap()
    }

    #[test]
    fn config_defaults_and_errors() {
        let c = cfg();
        assert_eq!(c.weight, "mollifier");
        assert_eq!(c.delta, 1.0 / 16.0);
        assert_eq!(c.grid().len(), 8);
        assert_eq!(*c.grid().last().unwrap(), 1e6);
        let camel = ExperimentConfig::from_toml("k = 2\nh = 1\nxMin = 1e4\nxMax = 1e6\ngridPoints = 8\n").unwrap();
        assert_eq!(camel, c);
        for bad in [
            "k = 2\nh = 1\nx_min = 1e2\nx_max = 1e6\ngrid_points = 8\n",
            "k = 2\nh = 1\nx_min = 1e4\nx_max = 1e5\ngrid_points = 8\n",
            "k = 2\nh = 1\nx_min = 1e4\nx_max = 1e6\ngrid_points = 30\n",
            "k = 2\nh = 0\nx_min = 1e4\nx_max = 1e6\ngrid_points = 8\n",
            "k = 2\nh = 1\nx_min = 1e4\nx_max = 1e6\ngrid_points = 8\ndelta = 0.1\n",
            "k = 2\nh = 1\nx_min = 1e4\nx_max = 1e6\ngrid_points = 8\nbogus = 1\n",
            "k = 2\nh = -6000\nx_min = 1e4\nx_max = 1e6\ngrid_points = 8\n",
        ] {
            let e = ExperimentConfig::from_toml(bad).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn small_run_shape() {
        let r = run_experiment(&cfg()).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.rows.windows(2).all(|w| w[0].x < w[1].x));
        assert!((r.slope_s - 1.0).abs() < 0.3 && (r.slope_m - 1.0).abs() < 0.3);
        let csv = r.to_csv();
        assert!(csv.starts_with("x,S,M,R,absR\n"));
        let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[1].to_bits(), r.rows[0].s.to_bits());
    }

    #[test]
    fn exponent_values() {
        let t = exponent_calculator(q(1, 16), q(7, 64), q(0, 1)).unwrap();
        assert_eq!(t.small.exponent, q(501, 512));
        assert_eq!(t.small.range, HRange::A);
        assert_eq!(t.small_x_parts.1, q(487, 512));
        assert_eq!(t.small_b_limit, Some(q(25, 28)));
        let t0 = exponent_calculator(q(1, 16), q(0, 1), q(0, 1)).unwrap();
        assert_eq!(t0.small.exponent, q(15, 16));
        assert_eq!(t0.small_b_limit, None);
        // the uniform bound is the small-(b) exponent at |h| = x^{25/28 - eta}
        let e = q(1, 2);
        let t = exponent_calculator(q(1, 16), q(7, 64), e).unwrap();
        assert_eq!(t.small.range, HRange::B);
        assert_eq!(t.intro.unwrap().1, t.small.exponent);
        // the (a)/(b) boundary of the general corollary matches 45/128 at delta = 1/16, theta = 7/64
        assert_eq!(t.general_thresholds.0, q(45, 128));
        assert!(exponent_calculator(q(1, 8), q(0, 1), q(0, 1)).is_err());
    }

    #[test]
    fn ramanujan_negative_control() {
        assert!(check_ramanujan_with(ramanujan_sum, 40, 10).passed);
        let off = |d: u64, h: i64| ramanujan_sum(d, h).map(|v| if d == 12 { v + 1 } else { v });
        assert!(!check_ramanujan_with(off, 40, 10).passed);
    }
}
