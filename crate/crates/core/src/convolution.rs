//! Exact convolution of nonnegative integer sequences.
//!
//! Products are computed modulo three NTT-friendly primes and recombined with
//! Garner's algorithm into `u128`. This is exact whenever every true output
//! coefficient is below the product of the primes (about 7.9e25), which is
//! checked up front from the input maxima. Otherwise a checked schoolbook
//! product is used.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `(p, g)` with `p = c 2^k + 1`, `k >= 23`, and `g` a primitive root mod `p`.
pub const PRIMES: [(u64, u64); 3] = [(998_244_353, 3), (167_772_161, 3), (469_762_049, 3)];

/// Longest transform the primes support (`2^23 | p - 1` for all three).
pub const MAX_NTT_LEN: usize = 1 << 23;

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub(crate) fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    acc
}

fn ntt(a: &mut [u64], invert: bool, p: u64, g: u64) {
    let n = a.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let mut w = pow_mod(g, (p - 1) / len as u64, p);
        if invert {
            w = pow_mod(w, p - 2, p);
        }
        let half = len / 2;
        let twiddles: Vec<u64> = std::iter::successors(Some(1u64), |&x| Some(mul_mod(x, w, p))).take(half).collect();
        for chunk in a.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((u, v), &tw) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let x = *u;
                let y = mul_mod(*v, tw, p);
                *u = if x + y >= p { x + y - p } else { x + y };
                *v = if x >= y { x - y } else { x + p - y };
            }
        }
        len <<= 1;
    }
    if invert {
        let inv_n = pow_mod(n as u64, p - 2, p);
        for x in a.iter_mut() {
            *x = mul_mod(*x, inv_n, p);
        }
    }
}

fn convolve_mod(a: &[u128], b: &[u128], len: usize, p: u64, g: u64) -> Vec<u64> {
    let load = |v: &[u128]| {
        let mut out = vec![0u64; len];
        for (o, &x) in out.iter_mut().zip(v) {
            *o = (x % p as u128) as u64;
        }
        out
    };
    let mut fa = load(a);
    ntt(&mut fa, false, p, g);
    if std::ptr::eq(a, b) {
        for x in fa.iter_mut() {
            *x = mul_mod(*x, *x, p);
        }
    } else {
        let mut fb = load(b);
        ntt(&mut fb, false, p, g);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = mul_mod(*x, *y, p);
        }
    }
    ntt(&mut fa, true, p, g);
    fa
}

fn garner(r: [u64; 3]) -> u128 {
    let [(p1, _), (p2, _), (p3, _)] = PRIMES;
    let inv_p1_p2 = pow_mod(p1 % p2, p2 - 2, p2);
    let inv_p1_p3 = pow_mod(p1 % p3, p3 - 2, p3);
    let inv_p2_p3 = pow_mod(p2 % p3, p3 - 2, p3);
    let v1 = r[0];
    let v2 = mul_mod((r[1] + p2 - v1 % p2) % p2, inv_p1_p2, p2);
    let t = mul_mod((r[2] + p3 - v1 % p3) % p3, inv_p1_p3, p3);
    let v3 = mul_mod((t + p3 - v2 % p3) % p3, inv_p2_p3, p3);
    v1 as u128 + v2 as u128 * p1 as u128 + v3 as u128 * p1 as u128 * p2 as u128
}

fn modulus_product() -> u128 {
    PRIMES.iter().map(|&(p, _)| p as u128).product()
}

/// Upper bound on every output coefficient, or `None` if it overflows `u128`.
fn coefficient_bound(a: &[u128], b: &[u128]) -> Option<u128> {
    let ma = a.iter().copied().max().unwrap_or(0);
    let mb = b.iter().copied().max().unwrap_or(0);
    ma.checked_mul(mb)?.checked_mul(a.len().min(b.len()) as u128)
}

/// Exact `(a * b)[k] = sum_i a[i] b[k - i]`.
pub fn convolve(a: &[u128], b: &[u128]) -> Result<Vec<u128>> {
    if a.is_empty() || b.is_empty() {
        return Ok(vec![]);
    }
    let out_len = a.len() + b.len() - 1;
    let len = out_len.next_power_of_two();
    let fits = coefficient_bound(a, b).is_some_and(|m| m < modulus_product());
    if !fits || len > MAX_NTT_LEN || out_len <= 64 {
        return schoolbook(a, b);
    }
    let residues: Vec<Vec<u64>> = PRIMES.par_iter().map(|&(p, g)| convolve_mod(a, b, len, p, g)).collect();
    Ok((0..out_len).map(|k| garner([residues[0][k], residues[1][k], residues[2][k]])).collect())
}

/// `a * a`, one forward transform per prime.
pub fn square(a: &[u128]) -> Result<Vec<u128>> {
    convolve(a, a)
}

fn schoolbook(a: &[u128], b: &[u128]) -> Result<Vec<u128>> {
    if (a.len() as u128) * (b.len() as u128) > 1 << 34 {
        return Err(Error::TooLarge {
            level: 0,
            len: format!("{} x {}", a.len(), b.len()),
            limit: MAX_NTT_LEN as u64,
        });
    }
    let mut out = vec![0u128; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let term = x.checked_mul(y).ok_or_else(overflow)?;
            out[i + j] = out[i + j].checked_add(term).ok_or_else(overflow)?;
        }
    }
    Ok(out)
}

fn overflow() -> Error {
    Error::Invariant("convolution coefficient exceeds u128".into())
}

/// `r`-fold self-convolution by repeated squaring.
pub fn power(base: &[u128], r: u32) -> Result<Vec<u128>> {
    if r == 0 {
        return Ok(vec![1]);
    }
    let mut acc: Option<Vec<u128>> = None;
    let mut sq = base.to_vec();
    let mut e = r;
    loop {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => sq.clone(),
                Some(x) => convolve(&x, &sq)?,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        sq = square(&sq)?;
    }
    Ok(acc.expect("r >= 1"))
}
