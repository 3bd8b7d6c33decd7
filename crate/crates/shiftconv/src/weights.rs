//! Smooth bump weights, a dyadic partition of unity, and adaptive quadrature.

use crate::error::{Error, Result};

pub const MAX_DERIV: usize = 8;
pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const MAX_PANELS: usize = 1 << 16;
pub const UNDERFLOW_FLOOR: f64 = 1e-280;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `exp(-1/(1-s^2))` on the rescaled interval `s in (-1, 1)`.
    Mollifier,
    /// `cos^2(pi s / 2)`; only C^1 at the endpoints.
    Cos2,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Mollifier => "mollifier",
            Shape::Cos2 => "cos2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothWeight {
    pub lo: f64,
    pub hi: f64,
    pub shape: Shape,
    /// `cert[j]` bounds `|w^(j)|` on the support.
    pub cert: [f64; MAX_DERIV + 1],
}

impl SmoothWeight {
    pub fn new(shape: Shape, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("bad support [{lo}, {hi}]")));
        }
        let mut w = SmoothWeight { lo, hi, shape, cert: [0.0; MAX_DERIV + 1] };
        w.cert = w.derivative_bounds();
        Ok(w)
    }

    pub fn mollifier() -> Self {
        Self::new(Shape::Mollifier, 0.5, 1.0).unwrap()
    }

    pub fn cos2() -> Self {
        Self::new(Shape::Cos2, 0.5, 1.0).unwrap()
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "mollifier" => Ok(Self::mollifier()),
            "cos2" => Ok(Self::cos2()),
            _ => Err(Error::Config(format!("unknown weight '{name}'"))),
        }
    }

    fn scale(&self) -> f64 {
        2.0 / (self.hi - self.lo)
    }

    fn to_s(&self, t: f64) -> f64 {
        (2.0 * t - self.lo - self.hi) / (self.hi - self.lo)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.lo || t >= self.hi {
            return 0.0;
        }
        let s = self.to_s(t);
        match self.shape {
            Shape::Mollifier => (-1.0 / (1.0 - s * s)).exp(),
            Shape::Cos2 => {
                let c = (std::f64::consts::FRAC_PI_2 * s).cos();
                c * c
            }
        }
    }

    /// `j`-th derivative in `t`, `j <= 8`.
    pub fn eval_deriv(&self, t: f64, j: usize) -> Result<f64> {
        if j > MAX_DERIV {
            return Err(Error::InvalidInput(format!("derivative order {j} > {MAX_DERIV}")));
        }
        if t <= self.lo || t >= self.hi {
            return Ok(0.0);
        }
        if j == 0 {
            return Ok(self.eval(t));
        }
        let s = self.to_s(t);
        let ds = match self.shape {
            Shape::Mollifier => mollifier_derivs(s)[j],
            Shape::Cos2 => {
                let pi = std::f64::consts::PI;
                0.5 * pi.powi(j as i32) * (pi * s + j as f64 * std::f64::consts::FRAC_PI_2).cos()
            }
        };
        Ok(ds * self.scale().powi(j as i32))
    }

    fn derivative_bounds(&self) -> [f64; MAX_DERIV + 1] {
        let mut b = [0.0; MAX_DERIV + 1];
        match self.shape {
            Shape::Cos2 => {
                b[0] = 1.0;
                for (j, bj) in b.iter_mut().enumerate().skip(1) {
                    *bj = 0.5 * std::f64::consts::PI.powi(j as i32) * self.scale().powi(j as i32);
                }
            }
            Shape::Mollifier => {
                let n = 40_000;
                for i in 1..n {
                    let s = -1.0 + 2.0 * i as f64 / n as f64;
                    let d = mollifier_derivs(s);
                    for j in 0..=MAX_DERIV {
                        b[j] = f64::max(b[j], d[j].abs());
                    }
                }
                for (j, bj) in b.iter_mut().enumerate() {
                    *bj *= 1.05 * self.scale().powi(j as i32);
                }
            }
        }
        b
    }

    /// `int w(xi/x) f(xi) dxi` over the support, relative tolerance 1e-10.
    pub fn integrate<F: Fn(f64) -> f64>(&self, x: f64, f: F) -> Result<f64> {
        self.integrate_tol(x, f, DEFAULT_REL_TOL)
    }

    pub fn integrate_tol<F: Fn(f64) -> f64>(&self, x: f64, f: F, rel_tol: f64) -> Result<f64> {
        self.integrate_range(x, self.lo * x, self.hi * x, f, rel_tol)
    }

    /// As [`integrate_tol`](Self::integrate_tol) but restricted to `[a, b]`.
    pub fn integrate_range<F: Fn(f64) -> f64>(
        &self,
        x: f64,
        a: f64,
        b: f64,
        f: F,
        rel_tol: f64,
    ) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("scale x = {x} must be positive")));
        }
        let a = a.max(self.lo * x);
        let b = b.min(self.hi * x);
        if a >= b {
            return Ok(0.0);
        }
        adaptive_integral(|xi| self.eval(xi / x) * f(xi), a, b, rel_tol)
    }

    /// As [`integrate_range`](Self::integrate_range) with an absolute error target.
    pub fn integrate_range_abs<F: Fn(f64) -> f64>(&self, x: f64, a: f64, b: f64, f: F, abs_tol: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("scale x = {x} must be positive")));
        }
        let a = a.max(self.lo * x);
        let b = b.min(self.hi * x);
        if a >= b {
            return Ok(0.0);
        }
        adaptive_integral_abs(|xi| self.eval(xi / x) * f(xi), a, b, abs_tol)
    }
}

// Derivatives of exp(phi(s)), phi(s) = -1/(1-s^2), orders 0..=8.
fn mollifier_derivs(s: f64) -> [f64; MAX_DERIV + 1] {
    let mut f = [0.0; MAX_DERIV + 1];
    if s <= -1.0 || s >= 1.0 {
        return f;
    }
    f[0] = (-1.0 / (1.0 - s * s)).exp();
    if f[0] == 0.0 {
        return f;
    }
    // phi^(k) = -(k!/2) [ (1-s)^{-k-1} + (-1)^k (1+s)^{-k-1} ]
    let mut phi = [0.0; MAX_DERIV + 1];
    let mut fact = 1.0;
    for (k, p) in phi.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *p = -0.5 * fact * ((1.0 - s).powi(-(k as i32) - 1) + sign * (1.0 + s).powi(-(k as i32) - 1));
    }
    for n in 1..=MAX_DERIV {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..n {
            acc += binom * phi[i + 1] * f[n - 1 - i];
            binom = binom * (n - 1 - i) as f64 / (i + 1) as f64;
        }
        f[n] = acc;
    }
    f
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

// Returns (kronrod, gauss, kronrod of |f|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    let mut kabs = WGK[7] * fc.abs();
    for i in 0..7 {
        let d = h * XGK[i];
        let (f1, f2) = (f(c - d), f(c + d));
        k += WGK[i] * (f1 + f2);
        kabs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    (k * h, g * h, kabs * h)
}

/// Adaptive Gauss-Kronrod (7/15) on `[a, b]` with relative tolerance
/// `rel_tol`, measured against the integral of `|f|`. The interval is first
/// cut into 16 equal panels so node placement is fixed.
pub fn adaptive_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    adaptive_core(&f, a, b, |mag| rel_tol * mag)
}

/// As [`adaptive_integral`] with an absolute error target.
pub fn adaptive_integral_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    adaptive_core(&f, a, b, |_| abs_tol)
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (Self, f64) {
        let (k, g, kabs) = gk15(f, lo, hi);
        let mut err = (k - g).abs();
        // subnormal integrands and panels at grid resolution leave only rounding in k - g
        let unresolved = (hi - lo).abs() <= 100.0 * f64::EPSILON * lo.abs().max(hi.abs());
        if err <= 50.0 * f64::EPSILON * kabs || kabs < UNDERFLOW_FLOOR || unresolved {
            err = 0.0;
        }
        (Panel { lo, hi, value: k, err }, kabs)
    }
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == std::cmp::Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err).then(o.lo.total_cmp(&self.lo))
    }
}

fn adaptive_core<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol_of: impl Fn(f64) -> f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let panels = 16;
    let width = (b - a) / panels as f64;
    let mut heap = std::collections::BinaryHeap::with_capacity(4 * panels);
    let mut mag = 0.0;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        let (p, kabs) = Panel::new(f, lo, hi);
        mag += kabs;
        heap.push(p);
    }
    let tol = tol_of(mag).max(f64::MIN_POSITIVE);
    let total_err = |h: &std::collections::BinaryHeap<Panel>| h.iter().map(|p| p.err).sum::<f64>();
    let mut err = total_err(&heap);
    let mut splits = 0;
    while err > tol {
        if splits == MAX_PANELS {
            return Err(Error::NonConvergence(format!(
                "{MAX_PANELS} subdivisions on [{a}, {b}] left error estimate {err:e} > {tol:e}"
            )));
        }
        let worst = heap.pop().expect("nonempty");
        if worst.err == 0.0 {
            break;
        }
        let m = 0.5 * (worst.lo + worst.hi);
        let (l, r) = (Panel::new(f, worst.lo, m).0, Panel::new(f, m, worst.hi).0);
        err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
        splits += 1;
        if splits % 256 == 0 {
            err = total_err(&heap);
        }
    }
    let mut parts: Vec<Panel> = heap.into_vec();
    parts.sort_by(|p, q| p.lo.total_cmp(&q.lo));
    let values: Vec<f64> = parts.iter().map(|p| p.value).collect();
    Ok(crate::numeric::pairwise_sum(&values))
}

/// Partition of unity `sum_j v_j(u) = 1`, `v_j(u) = base(u / 2^j)`.
/// The base rises smoothly on `[r, 2r]` and falls on `[2r, 4r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPartition {
    pub rise_lo: f64,
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, and `rho(t) + rho(1-t) = 1`.
pub fn smooth_step(t: f64) -> f64 {
    let e = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (a, b) = (e(t), e(1.0 - t));
        a / (a + b)
    }
}

/// Builds the partition whose base rises on `[lo, hi]`; requires `hi = 2 lo`.
pub fn make_partition(lo: f64, hi: f64) -> Result<DyadicPartition> {
    if !(lo > 0.0 && lo.is_finite()) || (hi - 2.0 * lo).abs() > 1e-12 * hi {
        return Err(Error::InvalidInput(format!(
            "rising window [{lo}, {hi}] must be [r, 2r] with r > 0"
        )));
    }
    Ok(DyadicPartition { rise_lo: lo })
}

impl Default for DyadicPartition {
    fn default() -> Self {
        DyadicPartition { rise_lo: std::f64::consts::FRAC_1_SQRT_2 }
    }
}

impl DyadicPartition {
    pub fn base(&self, u: f64) -> f64 {
        let r = self.rise_lo;
        if u <= r || u >= 4.0 * r {
            0.0
        } else if u <= 2.0 * r {
            smooth_step((u / r).log2())
        } else {
            1.0 - smooth_step((u / (2.0 * r)).log2())
        }
    }

    pub fn member(&self, j: i32, u: f64) -> f64 {
        self.base(u / 2f64.powi(j))
    }

    /// Indices `j` with `v_j(u)` possibly nonzero.
    pub fn active(&self, u: f64) -> std::ops::RangeInclusive<i32> {
        let lo = (u / (4.0 * self.rise_lo)).log2().floor() as i32;
        let hi = (u / self.rise_lo).log2().ceil() as i32;
        lo..=hi
    }

    pub fn sum_at(&self, u: f64) -> f64 {
        self.active(u).map(|j| self.member(j, u)).sum()
    }

    /// Dyadic kernel with `int_0^inf psi(u) du/u = 1`.
    pub fn normalized_kernel(&self, u: f64) -> f64 {
        self.base(u) / std::f64::consts::LN_2
    }
}
