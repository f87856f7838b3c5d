//! Additive energy, exact `L^{2r}` norms and the sharpness certificate.
//!
//! For `F = F_l cap A_N` (level-`N` descendants of the progression set `P_l`)
//! Salem's trick gives
//!
//! `||(f_l mu_N)^||_{2r}^{2r} = Psi(N) T_N^{-2r} sum_{|m|<r} corr(m) B_{2r}(m)`,
//!
//! where `corr(m)` counts `2r`-tuples whose signed numerator sum is `m` and
//! `B_{2r}` is the `2r`-fold self-convolution of the unit indicator. Every
//! quantity here is exact except the quadrature cross-check.

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bignum;
use crate::convolution;
use crate::dft;
use crate::error::{Error, Result};
use crate::fourier::restricted_nodes;
use crate::schedule::BranchingSchedule;
use crate::tree::CantorTree;

/// Instances above this many `2r`-tuples are refused by [`additive_energy`].
pub const ENUMERATION_LIMIT: f64 = 1e8;

/// `q_0(alpha, beta) = 2 + 4 (1 - alpha) / beta`.
pub fn q_critical(alpha: f64, beta: f64) -> Result<f64> {
    if !(0.0 < beta && beta <= alpha && alpha < 1.0) {
        return Err(Error::invalid(format!("need 0 < beta <= alpha < 1, got alpha = {alpha}, beta = {beta}")));
    }
    Ok(2.0 + 4.0 * (1.0 - alpha) / beta)
}

/// `e(q) = 1 - alpha q/2 + (alpha - beta/2)(q/2 - 1)`: the exponent of `Psi(l)`
/// in the lower bound once the progression bookkeeping is substituted.
pub fn growth_exponent(alpha: f64, beta: f64, q: f64) -> f64 {
    1.0 - alpha * q / 2.0 + (alpha - beta / 2.0) * (q / 2.0 - 1.0)
}

/// A point set (numerators over `Psi(N)`) with the energy order `r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyInstance {
    pub points: Vec<u64>,
    pub l: usize,
    pub n: usize,
    pub r: u32,
}

impl EnergyInstance {
    pub fn new(mut points: Vec<u64>, l: usize, n: usize, r: u32) -> Result<Self> {
        points.sort_unstable();
        points.dedup();
        if points.is_empty() || r == 0 {
            return Err(Error::invalid("energy instance needs points and r >= 1"));
        }
        Ok(EnergyInstance { points, l, n, r })
    }

    /// `F_l cap A_N` from a tree.
    pub fn from_tree(tree: &CantorTree, l: usize, n: usize, r: u32) -> Result<Self> {
        EnergyInstance::new(restricted_nodes(tree, l, n)?, l, n, r)
    }
}

/// Number of `2r`-tuples with equal half-sums, by direct enumeration.
pub fn additive_energy(inst: &EnergyInstance) -> Result<BigUint> {
    let k = inst.points.len();
    let r = inst.r as usize;
    let tuples = (k as f64).powi(2 * r as i32);
    if tuples > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { tuples, limit: ENUMERATION_LIMIT });
    }
    let mut idx = vec![0usize; 2 * r];
    let mut count: u64 = 0;
    loop {
        let left: u64 = idx[..r].iter().map(|&i| inst.points[i]).sum();
        let right: u64 = idx[r..].iter().map(|&i| inst.points[i]).sum();
        if left == right {
            count += 1;
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(BigUint::from(count));
            }
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// `g(z) = #{r-tuples summing to z}`, indexed from `z = r * min(points)`.
pub fn sum_counts(points: &[u64], r: u32) -> Result<Vec<u128>> {
    let lo = *points.iter().min().ok_or_else(|| Error::invalid("empty point set"))?;
    let hi = *points.iter().max().unwrap();
    let mut ind = vec![0u128; (hi - lo + 1) as usize];
    for &p in points {
        ind[(p - lo) as usize] = 1;
    }
    convolution::power(&ind, r)
}

/// `M = sum_z g(z)^2` with `g` from one exact integer convolution.
pub fn energy_via_convolution(inst: &EnergyInstance) -> Result<BigUint> {
    let g = sum_counts(&inst.points, inst.r)?;
    Ok(lagged_products(&g, 0))
}

/// `sum_z g(z) g(z + m)`.
fn lagged_products(g: &[u128], m: usize) -> BigUint {
    let mut acc = BigUint::zero();
    let mut fast: u128 = 0;
    for (a, b) in g.iter().zip(g.iter().skip(m)) {
        let term = BigUint::from(*a) * BigUint::from(*b);
        match a.checked_mul(*b).and_then(|p| fast.checked_add(p)) {
            Some(v) => fast = v,
            None => {
                acc += BigUint::from(fast) + term;
                fast = 0;
            }
        }
    }
    acc + BigUint::from(fast)
}

/// `#{a_1 + ... + a_r}` for the given points.
pub fn sumset_size(points: &[u64], r: u32) -> Result<u64> {
    Ok(sum_counts(points, r)?.iter().filter(|&&c| c > 0).count() as u64)
}

fn check_levels(s: &BranchingSchedule, l: usize, n: usize) -> Result<()> {
    if l <= s.start_level || l >= n || n > s.levels {
        return Err(Error::LevelRange {
            level: l,
            reason: format!("need N0 = {} < l < N = {n} <= {}", s.start_level, s.levels),
        });
    }
    Ok(())
}

/// `r^{l+1} tau_1...tau_l Psi(N) / Psi(l)`.
pub fn sumset_bound(s: &BranchingSchedule, l: usize, n: usize, r: u32) -> Result<BigUint> {
    check_levels(s, l, n)?;
    let ratio = s.cap_psi(n) / s.cap_psi(l);
    Ok(BigUint::from(r).pow(l as u32 + 1) * s.tau_product(l) * ratio)
}

/// `(tau_1...tau_l t_{l+1}...t_N)^{2r} Psi(l) / (r^{l+1} tau_1...tau_l Psi(N))`.
pub fn energy_lower_bound(s: &BranchingSchedule, l: usize, n: usize, r: u32) -> Result<BigRational> {
    check_levels(s, l, n)?;
    let count = s.tau_product(l) * (s.cap_t(n) / s.cap_t(l));
    let num = count.pow(2 * r) * s.cap_psi(l);
    let den = BigUint::from(r).pow(l as u32 + 1) * s.tau_product(l) * s.cap_psi(n);
    Ok(ratio(num, den))
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Value at integer `m` of the `2r`-fold self-convolution of the indicator of `[-1/2, 1/2)`.
///
/// Truncated-power form `M_n(x) = (n-1)!^{-1} sum_k (-1)^k C(n,k) (x + n/2 - k)_+^{n-1}`.
pub fn bspline_central(order: u32, m: i64) -> Result<BigRational> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::invalid(format!("order must be even and >= 2, got {order}")));
    }
    let n = order as i64;
    let mut acc = BigInt::zero();
    for k in 0..=n {
        let x = m + n / 2 - k;
        if x <= 0 {
            continue;
        }
        let term = binomial(BigInt::from(n), BigInt::from(k)) * BigInt::from(x).pow(order - 1);
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    let fact: BigInt = (1..n).map(BigInt::from).product();
    Ok(BigRational::new(acc, fact))
}

/// Exact `L^{2r}` norm of `(f_l mu_N)^` with the pieces of the lower-bound chain.
#[derive(Clone, Debug, PartialEq)]
pub struct SalemNorm {
    pub r: u32,
    /// `||(f_l mu_N)^||_{2r}^{2r}`.
    pub value: BigRational,
    pub energy: BigUint,
    /// `Psi(N) T_N^{-2r} M B_{2r}(0)`: the `m = 0` term alone.
    pub energy_term: BigRational,
    /// `C_r Psi(l) (tau_1...tau_l)^{2r-1} / (r^{l+1} T_l^{2r})` with `C_r = B_{2r}(0)`.
    pub norm_below: BigRational,
    pub points: usize,
}

impl SalemNorm {
    pub fn value_f64(&self) -> f64 {
        crate::regularity::ratio_to_f64(&self.value)
    }
}

/// `Psi(N) T_N^{-2r} sum_{|m|<r} corr(m) B_{2r}(m)`.
pub fn salem_norm_exact(tree: &CantorTree, l: usize, n: usize, r: u32) -> Result<SalemNorm> {
    let s = &tree.schedule;
    check_levels(s, l, n)?;
    tree.level(n)?;
    let points = restricted_nodes(tree, l, n)?;
    let g = sum_counts(&points, r)?;
    let mut weighted = BigRational::zero();
    let mut energy = BigUint::zero();
    for m in 0..r as usize {
        let corr = lagged_products(&g, m);
        let b = bspline_central(2 * r, m as i64)?;
        let mult = if m == 0 { 1u32 } else { 2 };
        weighted += b * BigInt::from(corr.clone() * mult);
        if m == 0 {
            energy = corr;
        }
    }
    let scale = ratio(s.cap_psi(n).clone(), s.cap_t(n).pow(2 * r));
    let value = &scale * weighted;
    let energy_term = &scale * BigInt::from(energy.clone()) * bspline_central(2 * r, 0)?;
    Ok(SalemNorm {
        r,
        value,
        energy,
        energy_term,
        norm_below: norm_below(s, l, r, 2 * r)?,
        points: points.len(),
    })
}

/// `C_r Psi(l) (tau_1...tau_l)^{p-1} / (r^{l+1} T_l^{p})` for integer `p`.
fn norm_below(s: &BranchingSchedule, l: usize, r: u32, p: u32) -> Result<BigRational> {
    let c_r = bspline_central(2 * r, 0)?;
    let num = s.cap_psi(l) * s.tau_product(l).pow(p - 1);
    let den = BigUint::from(r).pow(l as u32 + 1) * s.cap_t(l).pow(p);
    Ok(c_r * ratio(num, den))
}

/// Numerical `int_{|xi| <= Xi} |(f_l mu_N)^(xi)|^q` with a bound on the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    pub tail_bound: f64,
    /// The cutoff actually used: `Xi` rounded up to a multiple of `Psi(N)`.
    pub xi: f64,
    pub grid: usize,
    /// Relative change between the last two grid refinements.
    pub rel_change: f64,
    /// `max |(f_l mu_N)^(xi)| |xi|^{beta/2}` over sampled `2 <= |xi| <= Xi`.
    pub decay_constant: f64,
}

const QUAD_TOL: f64 = 1e-6;
const QUAD_MAX_GRID: usize = 1 << 25;

/// Substituting `u = xi / Psi(N)`, the integral over `|xi| <= J Psi(N)` is
/// `Psi(N) T_N^{-q} int_0^1 |S(u)|^q sum_{j=-J}^{J-1} |sinc(u + j)|^q du`, with
/// `S` sampled by a zero-padded FFT and the `u`-integral by the periodic
/// trapezoid rule, refined until two grids agree to `1e-6`.
pub fn salem_norm_quadrature(tree: &CantorTree, l: usize, n: usize, q: f64, xi: f64) -> Result<Quadrature> {
    let s = &tree.schedule;
    if q < 2.0 {
        return Err(Error::invalid(format!("q must be >= 2, got {q}")));
    }
    if xi <= 2.0 {
        return Err(Error::invalid("Xi must exceed 2"));
    }
    let decay = q * s.beta / 2.0;
    if decay <= 1.0 {
        return Err(Error::TailDivergent(decay));
    }
    let points = restricted_nodes(tree, l, n)?;
    let psi_n = tree.cells(n) as f64;
    let t_n = tree.levels[n].numerators.len() as f64;
    let j_max = (xi / psi_n).ceil().max(1.0) as i64;
    let lo = points[0];
    let span = (points.last().unwrap() - lo) as usize + 1;
    let mut grid = (((q / 2.0).ceil() as usize) * span + 1).next_power_of_two().max(1024);

    let integrate = |grid: usize| -> (f64, f64) {
        let mut buf = vec![Complex64::new(0.0, 0.0); grid];
        for &p in &points {
            buf[(p - lo) as usize].re = 1.0;
        }
        dft::forward(&mut buf);
        let mut sum = 0.0;
        let mut c_dec: f64 = 0.0;
        for (i, z) in buf.iter().enumerate() {
            let u = i as f64 / grid as f64;
            let amp = z.norm() / t_n;
            let mut w = 0.0;
            for j in -j_max..j_max {
                let v = u + j as f64;
                let k = sinc(v).abs();
                w += k.powf(q);
                let x = v.abs() * psi_n;
                if x >= 2.0 {
                    c_dec = c_dec.max(amp * k * x.powf(s.beta / 2.0));
                }
            }
            sum += amp.powf(q) * w;
        }
        (psi_n * sum / grid as f64, c_dec)
    };

    let (mut value, mut c_dec) = integrate(grid);
    let mut rel_change = f64::INFINITY;
    while grid < QUAD_MAX_GRID {
        grid *= 2;
        let (next, c) = integrate(grid);
        rel_change = ((next - value) / next).abs();
        value = next;
        c_dec = c_dec.max(c);
        if rel_change < QUAD_TOL {
            break;
        }
    }
    let xi_eff = j_max as f64 * psi_n;
    let mass = points.len() as f64 / t_n;
    let sinc_tail = 2.0 * (mass * psi_n / std::f64::consts::PI).powf(q) * xi_eff.powf(1.0 - q) / (q - 1.0);
    let decay_tail = 2.0 * c_dec.powf(q) * xi_eff.powf(1.0 - decay) / (decay - 1.0);
    Ok(Quadrature { value, tail_bound: sinc_tail.min(decay_tail), xi: xi_eff, grid, rel_change, decay_constant: c_dec })
}

fn sinc(v: f64) -> f64 {
    let x = std::f64::consts::PI * v;
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Per-`l` chain of exact lower bounds behind the blow-up of the extension quotient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessCertificate {
    pub l: usize,
    pub r: u32,
    pub q: f64,
    /// `#Z` bound at `N = l + 1`.
    #[serde(with = "dec")]
    pub sumset_bound: BigUint,
    /// Energy lower bound at `N = l + 1`, as `numerator/denominator`.
    pub energy_lower: String,
    pub norm2r_lower: String,
    pub quotient_lower_q: f64,
    pub mass_f: String,
    pub growth_exponent: f64,
    pub grows: bool,
    /// `log Q - (e(q)/q) log Psi(l) + ((l+1)/q) log r`.
    pub compensated: f64,
}

mod dec {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let raw = String::deserialize(d)?;
        BigUint::parse_bytes(raw.as_bytes(), 10).ok_or_else(|| D::Error::custom("bad integer"))
    }
}

/// Certificate for one `l` on the tree's schedule.
pub fn quotient_certificate(tree: &CantorTree, l: usize, q: f64, r: u32) -> Result<SharpnessCertificate> {
    schedule_certificate(&tree.schedule, l, q, r)
}

/// The certificate depends on the schedule only.
pub fn schedule_certificate(s: &BranchingSchedule, l: usize, q: f64, r: u32) -> Result<SharpnessCertificate> {
    if !s.variant.has_progression() {
        return Err(Error::invalid("the sharpness certificate needs a progression variant"));
    }
    if !(2.0 <= q && q < 2.0 * r as f64) {
        return Err(Error::invalid(format!("need 2 <= q < 2r, got q = {q}, r = {r}")));
    }
    if !(r as f64 > 1.0 / s.beta) {
        return Err(Error::invalid(format!("need r > 1/beta = {}", 1.0 / s.beta)));
    }
    let q0 = q_critical(s.alpha, s.beta)?;
    if !(2.0 * r as f64 > q0) {
        return Err(Error::invalid(format!("need 2r > q0 = {q0}")));
    }
    check_levels(s, l, l + 1)?;
    let c_r = bspline_central(2 * r, 0)?;
    let ln_tau = bignum::ln(s.tau_product(l));
    let ln_t = bignum::ln(s.cap_t(l));
    let ln_psi = bignum::ln(s.cap_psi(l));
    let ln_r = (r as f64).ln();
    let ln_cr = crate::regularity::ratio_to_f64(&c_r).ln();
    let ln_q_pow = ln_cr + ln_psi + (q - 1.0) * ln_tau - (l as f64 + 1.0) * ln_r - q * ln_t;
    let ln_quot = ln_q_pow / q - 0.5 * (ln_tau - ln_t);
    let e = growth_exponent(s.alpha, s.beta, q);
    let mass_f = ratio(s.tau_product(l).clone(), s.cap_t(l).clone());
    Ok(SharpnessCertificate {
        l,
        r,
        q,
        sumset_bound: sumset_bound(s, l, l + 1, r)?,
        energy_lower: energy_lower_bound(s, l, l + 1, r)?.to_string(),
        norm2r_lower: norm_below(s, l, r, 2 * r)?.to_string(),
        quotient_lower_q: ln_quot.exp(),
        mass_f: mass_f.to_string(),
        growth_exponent: e,
        grows: e > 0.0,
        compensated: ln_quot - e / q * ln_psi + (l as f64 + 1.0) / q * ln_r,
    })
}

/// Certificates for `l = N0 + 1 ..= l_max`.
pub fn certificate_sweep(s: &BranchingSchedule, l_max: usize, q: f64, r: u32) -> Result<Vec<SharpnessCertificate>> {
    (s.start_level + 1..=l_max).map(|l| schedule_certificate(s, l, q, r)).collect()
}

/// Exact `sum_m B_{2r}(m)`, which is 1 for every `r`.
pub fn bspline_partition(r: u32) -> Result<BigRational> {
    (-(r as i64)..=r as i64).map(|m| bspline_central(2 * r, m)).sum()
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| crate::regularity::ratio_to_f64(x))
}
