//! Exponential sums and dense transforms over the level-`N` grid.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Longest dense transform a level may require before `TooLarge` is returned.
pub const DEFAULT_DENSE_LIMIT: u64 = 1 << 26;

/// `sum_n exp(-2 pi i n k / q)` with the phase reduced exactly mod `q`.
pub fn exp_sum(numerators: &[u64], q: u64, k: i64) -> Complex64 {
    let kk = k.rem_euclid(q as i64) as u128;
    let q128 = q as u128;
    numerators
        .iter()
        .map(|&n| {
            let r = (n as u128 * kk % q128) as f64 / q as f64;
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * r)
        })
        .sum()
}

/// `sum_n exp(-2 pi i n xi / q)` for real `xi`.
///
/// The integer part of `xi` is reduced exactly; only the fractional part
/// carries floating-point phase error.
pub fn exp_sum_real(numerators: &[u64], q: u64, xi: f64) -> Complex64 {
    let whole = xi.floor();
    let frac = xi - whole;
    let kk = (whole as i128).rem_euclid(q as i128) as u128;
    numerators
        .iter()
        .map(|&n| {
            let exact = (n as u128 * kk % q as u128) as f64;
            let r = (exact + n as f64 * frac) / q as f64;
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * r.fract())
        })
        .sum()
}

/// In-place forward transform `X(k) = sum_m x[m] exp(-2 pi i m k / len)`.
pub fn forward(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

pub fn check_len(level: usize, len: u64, limit: u64) -> Result<usize> {
    if len > limit {
        return Err(Error::TooLarge { level, len: len.to_string(), limit });
    }
    Ok(len as usize)
}

/// `max_k |buf[k]|`, reduced in index order.
pub fn sup_abs(buf: &[Complex64]) -> f64 {
    buf.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `K(u) = exp(-pi i u) sin(pi u) / (pi u)`, the transform of the unit cell indicator.
pub fn cell_kernel(u: f64) -> Complex64 {
    let x = std::f64::consts::PI * u;
    let sinc = if u.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    Complex64::from_polar(sinc, -x)
}
