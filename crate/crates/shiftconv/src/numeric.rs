//! Deterministic floating-point helpers: tree summation, least squares, zeta.

use crate::error::{Error, Result};

const LEAF: usize = 256;
const PAR_CUTOFF: usize = 1 << 16;

/// Pairwise (tree) summation with a fixed split pattern, so the result does
/// not depend on the number of worker threads.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= LEAF {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    let (a, b) = v.split_at(mid);
    if v.len() >= PAR_CUTOFF {
        let (x, y) = rayon::join(|| pairwise_sum(a), || pairwise_sum(b));
        x + y
    } else {
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Least-squares solution of `A c ≈ y` via modified Gram-Schmidt QR.
/// `cols` holds the columns of `A`.
pub fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = cols.len();
    let n = y.len();
    if p == 0 || n < p || cols.iter().any(|c| c.len() != n) {
        return Err(Error::SingularFit(format!("{n} rows for {p} unknowns")));
    }
    let mut q: Vec<Vec<f64>> = cols.to_vec();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        for i in 0..j {
            let dot: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[i][j] = dot;
            let qi = q[i].clone();
            for (t, s) in q[j].iter_mut().zip(&qi) {
                *t -= dot * s;
            }
        }
        let norm = q[j].iter().map(|t| t * t).sum::<f64>().sqrt();
        let scale = cols[j].iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularFit(format!("column {j} is dependent")));
        }
        r[j][j] = norm;
        for t in q[j].iter_mut() {
            *t /= norm;
        }
    }
    let qty: Vec<f64> = (0..p)
        .map(|i| q[i].iter().zip(y).map(|(a, b)| a * b).sum())
        .collect();
    let mut c = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in i + 1..p {
            s -= r[i][j] * c[j];
        }
        c[i] = s / r[i][i];
    }
    Ok(c)
}

/// Ordinary least-squares line `y ≈ a + b x`; returns `(b, a)`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let ones = vec![1.0; xs.len()];
    let c = least_squares(&[ones, xs.to_vec()], ys)?;
    Ok((c[1], c[0]))
}

// B_{2j} / (2j)! for j = 1..=8
const BERN_OVER_FACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Riemann zeta for real `s > 1` by Euler-Maclaurin summation.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::Domain(format!("zeta needs s > 1, got {s}")));
    }
    let n = 20u32;
    let nf = n as f64;
    let mut acc: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    acc += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // rising factorial s(s+1)...(s+2j-2) times N^{-s-2j+1}
    let mut rising = s;
    let mut pow = nf.powf(-s - 1.0);
    for (j, b) in BERN_OVER_FACT.iter().enumerate() {
        if j > 0 {
            let m = 2.0 * j as f64;
            rising *= (s + m - 1.0) * (s + m);
            pow /= nf * nf;
        }
        acc += b * rising * pow;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=200_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 200_000.0 * 200_001.0 / 2.0);
    }

    #[test]
    fn pairwise_is_bit_stable() {
        let v: Vec<f64> = (1..=300_000).map(|i| 1.0 / i as f64).collect();
        let a = pairwise_sum(&v);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| pairwise_sum(&v));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn ols_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (b, a) = ols_slope(&xs, &ys).unwrap();
        assert!((b + 0.5).abs() < 1e-12 && (a - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_fit_rejected() {
        let xs = vec![1.0; 5];
        assert!(ols_slope(&xs, &xs).is_err());
    }

    #[test]
    fn zeta_known_values() {
        let pi = std::f64::consts::PI;
        assert!((zeta(2.0).unwrap() - pi * pi / 6.0).abs() < 1e-14);
        assert!((zeta(4.0).unwrap() - pi.powi(4) / 90.0).abs() < 1e-14);
        // zeta(1.5) = 2.6123753486854883...
        assert!((zeta(1.5).unwrap() - 2.612_375_348_685_488).abs() < 1e-13);
        assert!(zeta(1.0).is_err());
    }
}
