//! Per-level branching parameters.
//!
//! A schedule fixes, for every level `N`, the number of available digits
//! `psi(N)`, the number of selected digits `t_N`, and (for the progression
//! variants) the number of progression digits `tau_N`. The running products
//! `Psi(N)`, `T_N` and `tau_1 ... tau_N` are kept as exact big integers.
//!
//! `t_N` and `tau_N` are picked greedily: at each level the admissible integer
//! that brings the running product closest (in log scale) to the variant's
//! target wins, ties going to the smaller integer.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bignum::{self, serde_dec};
use crate::error::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// Which construction a schedule (and the tree built from it) follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Binary digits, log-corrected dimension, decay `|k|^{-alpha/2}`.
    #[serde(rename = "thm2")]
    EndpointDecay,
    /// Binary digits, exact dimension, decay `|k|^{-alpha/2} log^{1/2}|k|`.
    #[serde(rename = "thm3")]
    EndpointRegular,
    /// Growing branching with an embedded progression tree.
    #[serde(rename = "thm1")]
    Progression,
    /// As `Progression`, with pure-power regularity (requires `beta < alpha`).
    #[serde(rename = "thm1-second-part")]
    ProgressionPowerRegular,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::EndpointDecay => "thm2",
            Variant::EndpointRegular => "thm3",
            Variant::Progression => "thm1",
            Variant::ProgressionPowerRegular => "thm1-second-part",
        }
    }

    pub fn has_progression(self) -> bool {
        matches!(self, Variant::Progression | Variant::ProgressionPowerRegular)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm2" => Ok(Variant::EndpointDecay),
            "thm3" => Ok(Variant::EndpointRegular),
            "thm1" => Ok(Variant::Progression),
            "thm1-second-part" | "thm1b" => Ok(Variant::ProgressionPowerRegular),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

/// The slowly growing function that drives `psi(N)` in the progression variants.
///
/// All evaluation goes through `ln t`, so arguments like `2^N` for large `N`
/// never overflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PhiSpec {
    /// `phi(t) = (ln t)^epsilon`.
    LogPower { epsilon: f64 },
    /// `phi(t) = constant + ln ln t`.
    ConstantPlusLogLog { constant: f64 },
    /// Nondecreasing `(t, phi(t))` pairs, interpolated linearly in `ln t` and
    /// extended past the last point with the last slope.
    UserTable { points: Vec<(f64, f64)> },
}

impl PhiSpec {
    pub fn log_power(epsilon: f64) -> Result<Self> {
        let phi = PhiSpec::LogPower { epsilon };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhiSpec::LogPower { epsilon } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::invalid(format!("log-power epsilon must be positive, got {epsilon}")));
                }
            }
            PhiSpec::ConstantPlusLogLog { constant } => {
                if !(constant + LN2.ln() > 0.0) {
                    return Err(Error::invalid("constant + ln ln 2 must be positive so that phi > 0 on [2, inf)"));
                }
            }
            PhiSpec::UserTable { points } => {
                if points.is_empty() {
                    return Err(Error::invalid("phi table is empty"));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0 && w[1].1 >= w[0].1) {
                        return Err(Error::invalid("phi table must have increasing t and nondecreasing phi"));
                    }
                }
                if points.iter().any(|&(t, v)| t < 2.0 || v <= 0.0) {
                    return Err(Error::invalid("phi table needs t >= 2 and phi > 0"));
                }
            }
        }
        Ok(())
    }

    /// `phi(t)` given `ln t`.
    pub fn eval_ln(&self, ln_t: f64) -> f64 {
        match self {
            PhiSpec::LogPower { epsilon } => ln_t.powf(*epsilon),
            PhiSpec::ConstantPlusLogLog { constant } => constant + ln_t.ln(),
            PhiSpec::UserTable { points } => {
                let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
                if ln_t <= xs[0] || points.len() == 1 {
                    return points[0].1;
                }
                let last = points.len() - 1;
                let seg = xs.windows(2).position(|w| ln_t <= w[1]).unwrap_or(last - 1);
                let (x0, x1) = (xs[seg], xs[seg + 1]);
                let (y0, y1) = (points[seg].1, points[seg + 1].1);
                y0 + (y1 - y0) * (ln_t - x0) / (x1 - x0)
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_ln(t.ln())
    }

    /// `phi(2^n)`.
    pub fn eval_pow2(&self, n: usize) -> f64 {
        self.eval_ln(n as f64 * LN2)
    }

    /// Largest `phi(2t) - phi(t)` over `t = 2^1, ..., 2^n_max`.
    pub fn doubling_gap(&self, n_max: usize) -> f64 {
        (1..=n_max)
            .map(|n| self.eval_pow2(n + 1) - self.eval_pow2(n))
            .fold(0.0, f64::max)
    }

    /// Parse `log:EPS`, `loglog:C` or `table:T=V,T=V,...`.
    pub fn parse(desc: &str) -> Result<Self> {
        let (kind, arg) = desc
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("phi descriptor {desc:?} lacks ':'")))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number {s:?} in phi")));
        let phi = match kind {
            "log" => PhiSpec::LogPower { epsilon: num(arg)? },
            "loglog" => PhiSpec::ConstantPlusLogLog { constant: num(arg)? },
            "table" => {
                let points = arg
                    .split(',')
                    .map(|kv| {
                        let (t, v) = kv.split_once('=').ok_or_else(|| Error::invalid(format!("bad table entry {kv:?}")))?;
                        Ok((num(t)?, num(v)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                PhiSpec::UserTable { points }
            }
            other => return Err(Error::invalid(format!("unknown phi family {other:?}"))),
        };
        phi.validate()?;
        Ok(phi)
    }

    pub fn descriptor(&self) -> String {
        match self {
            PhiSpec::LogPower { epsilon } => format!("log:{epsilon}"),
            PhiSpec::ConstantPlusLogLog { constant } => format!("loglog:{constant}"),
            PhiSpec::UserTable { points } => {
                let body: Vec<String> = points.iter().map(|(t, v)| format!("{t}={v}")).collect();
                format!("table:{}", body.join(","))
            }
        }
    }
}

/// `psi(N) = ceil(phi(2^N)^{1/2}) + 2`.
///
/// Square roots within 1e-12 of an integer are snapped to it before the ceiling.
pub fn branching_number(phi: &PhiSpec, n: usize) -> u64 {
    let root = phi.eval_pow2(n).max(0.0).sqrt();
    let near = root.round();
    let root = if (root - near).abs() <= 1e-12 * near.max(1.0) { near } else { root };
    root.ceil() as u64 + 2
}

/// All per-level parameters of one construction.
///
/// Vectors are indexed by level; index 0 holds the empty-product sentinels
/// (`psi[0] = t[0] = 1`, `Psi(0) = T_0 = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingSchedule {
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub phi: Option<PhiSpec>,
    pub levels: usize,
    pub psi: Vec<u64>,
    #[serde(with = "serde_dec")]
    pub cap_psi: Vec<BigUint>,
    pub t: Vec<u64>,
    /// Zero at every level `>= 1` for the binary variants.
    pub tau: Vec<u64>,
    pub theta: Vec<f64>,
    pub vartheta: Vec<f64>,
    #[serde(with = "serde_dec")]
    pub cap_t: Vec<BigUint>,
    #[serde(with = "serde_dec")]
    pub tau_prod: Vec<BigUint>,
    /// Levels `<= band_start` use `t_N = tau_N = 1` in the progression variants.
    pub band_start: usize,
    /// Leading levels forced to `t = 1` so the seed levels can reach (0, 1) compactly.
    #[serde(default)]
    pub forced_prefix: usize,
    pub start_level: usize,
}

impl BranchingSchedule {
    pub fn psi(&self, n: usize) -> u64 {
        self.psi[n]
    }

    pub fn cap_psi(&self, n: usize) -> &BigUint {
        &self.cap_psi[n]
    }

    pub fn t(&self, n: usize) -> u64 {
        self.t[n]
    }

    pub fn tau(&self, n: usize) -> u64 {
        self.tau[n]
    }

    pub fn cap_t(&self, n: usize) -> &BigUint {
        &self.cap_t[n]
    }

    pub fn tau_product(&self, n: usize) -> &BigUint {
        &self.tau_prod[n]
    }

    /// `4 log(8 Psi(n)) <= T_{n-1}`, decided with outward rounding.
    pub fn bernstein_feasible(&self, n: usize) -> bool {
        let lhs = 4.0 * bignum::ln_upper(&(self.cap_psi(n) * 8u32));
        lhs <= bignum::to_f64_lower(self.cap_t(n - 1))
    }

    /// Acceptance threshold `4 T_{n-1}^{-1/2} log^{1/2}(8 Psi(n))` for level `n`.
    pub fn threshold(&self, n: usize) -> f64 {
        let ln_t = bignum::ln(self.cap_t(n - 1));
        let ln_8psi = bignum::ln(&(self.cap_psi(n) * 8u32));
        4.0 * (-0.5 * ln_t).exp() * ln_8psi.sqrt()
    }

    /// Allowance `6 tau_1...tau_n / t_1...t_n` for the progression modification.
    pub fn correction(&self, n: usize) -> f64 {
        if !self.variant.has_progression() {
            return 0.0;
        }
        6.0 * (bignum::ln(self.tau_product(n)) - bignum::ln(self.cap_t(n))).exp()
    }

    /// `psi(n)` for any `n`, including one level past the end.
    fn psi_any(&self, n: usize) -> u64 {
        match (&self.phi, self.psi.get(n)) {
            (_, Some(&p)) => p,
            (Some(phi), None) => branching_number(phi, n),
            (None, None) => 2,
        }
    }

    /// Log of the primary target the `theta` products track, indexed like `theta_1...theta_n`.
    pub fn target_ln(&self, n: usize) -> f64 {
        match self.variant {
            Variant::EndpointDecay => ((n as f64 + 3.0) * LN2).ln(),
            Variant::EndpointRegular => 0.0,
            Variant::Progression => {
                let next = self.psi_any(n + 1);
                self.alpha * (next as f64).ln() + bignum::ln(&(self.cap_psi(n) * next * 8u32)).ln()
            }
            Variant::ProgressionPowerRegular => self.alpha * (self.psi_any(n + 1) as f64).ln(),
        }
    }

    pub fn ln_theta_product(&self, n: usize) -> f64 {
        bignum::ln(self.cap_t(n)) - self.alpha * bignum::ln(self.cap_psi(n))
    }

    /// Min and max of `theta_1...theta_n / target(n)` over the levels with free choices.
    pub fn theta_band(&self) -> (f64, f64) {
        let first = self.band_start + 1;
        band((first..=self.levels).map(|n| self.ln_theta_product(n) - self.target_ln(n)))
    }

    /// Min and max of `(tau_1...tau_n / t_1...t_n) * Psi(n)^{beta/2}` over free levels.
    pub fn tau_ratio_band(&self) -> Option<(f64, f64)> {
        if !self.variant.has_progression() {
            return None;
        }
        let first = self.band_start + 1;
        Some(band((first..=self.levels).map(|n| {
            bignum::ln(self.tau_product(n)) - bignum::ln(self.cap_t(n)) + 0.5 * self.beta * bignum::ln(self.cap_psi(n))
        })))
    }

    /// Recompute every running product from the per-level factors.
    pub fn products_consistent(&self) -> bool {
        (0..=self.levels).all(|n| {
            bignum::product(self.psi[1..=n].iter().copied()) == self.cap_psi[n]
                && bignum::product(self.t[1..=n].iter().copied()) == self.cap_t[n]
                && bignum::product(self.tau[1..=n].iter().copied()) == self.tau_prod[n]
        })
    }

    /// Least `N0` with `4 log(8 Psi(N)) <= T_{N-1}` for every `N` in `(N0, levels]`.
    pub fn bernstein_start_level(&self) -> Result<usize> {
        let worst = (1..=self.levels).rev().find(|&n| !self.bernstein_feasible(n)).unwrap_or(0);
        if worst >= self.levels {
            return Err(Error::Infeasible {
                level: worst,
                reason: "4 log(8 Psi(N)) > T_{N-1} at the last level; more levels are needed".into(),
            });
        }
        Ok(worst)
    }

    /// First level at which the deterministic seed rule detaches `E_N` from both 0 and 1.
    pub fn containment_level(&self) -> Result<usize> {
        let prog = self.variant.has_progression();
        // (touches boundary, in progression) for the leftmost and rightmost node
        let (mut left, mut right, mut single) = ((true, prog), (true, prog), true);
        for n in 1..=self.levels {
            let (psi, t, tau) = (self.psi[n], self.t[n], self.tau[n]);
            let in_prog = |d: u64| (1..=tau).contains(&d);
            if single {
                let d = seed_digits(psi, t, tau, left.1, left.0, right.0)?;
                let (lo, hi) = (d[0], *d.last().unwrap());
                left = (left.0 && lo == 0, left.1 && in_prog(lo));
                right = (right.0 && hi == psi - 1, right.1 && in_prog(hi));
                single = t == 1;
            } else {
                let dl = seed_digits(psi, t, tau, left.1, left.0, false)?;
                let dr = seed_digits(psi, t, tau, right.1, false, right.0)?;
                left = (left.0 && dl[0] == 0, left.1 && in_prog(dl[0]));
                let hi = *dr.last().unwrap();
                right = (right.0 && hi == psi - 1, right.1 && in_prog(hi));
            }
            if !left.0 && !right.0 {
                return Ok(n);
            }
        }
        Err(Error::Infeasible {
            level: self.levels,
            reason: "seed levels never detach E_N from the endpoints of [0, 1]".into(),
        })
    }

    /// Least admissible start level; stored in `start_level`.
    ///
    /// Combines the Bernstein condition with compact containment of the seed levels.
    pub fn min_start_level(&mut self) -> Result<usize> {
        let n0 = self.bernstein_start_level()?.max(self.containment_level()?).max(self.band_start);
        if n0 >= self.levels {
            return Err(Error::Infeasible {
                level: n0,
                reason: "no randomized level remains after the seed levels".into(),
            });
        }
        self.start_level = n0;
        Ok(n0)
    }

    /// The same schedule recomputed with more levels (choices are prefix-stable).
    pub fn extended(&self, levels: usize) -> Result<BranchingSchedule> {
        let mut s = match self.variant {
            Variant::EndpointDecay | Variant::EndpointRegular => {
                binary_schedule_with_prefix(self.variant, self.alpha, levels, self.forced_prefix)?
            }
            Variant::Progression | Variant::ProgressionPowerRegular => general_schedule(
                self.alpha,
                self.beta,
                self.phi.clone().expect("progression schedule carries phi"),
                self.variant == Variant::ProgressionPowerRegular,
                levels,
            )?,
        };
        s.start_level = self.start_level;
        Ok(s)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("schedule serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn band(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (lo.exp(), hi.exp())
}

/// Admissible integer in `range` whose log-step lands closest to `target`.
fn greedy_pick(range: std::ops::RangeInclusive<u64>, current: f64, target: f64, step: impl Fn(u64) -> f64) -> u64 {
    let mut best = *range.start();
    let mut best_err = f64::INFINITY;
    for v in range {
        let err = (current + step(v) - target).abs();
        if err < best_err - 1e-12 {
            best = v;
            best_err = err;
        }
    }
    best
}

/// Seed-level digit set for one parent.
///
/// Progression parents get `{1..tau}` plus the smallest digits above `tau + 1`;
/// everything else gets the lexicographically smallest run, shifted off a
/// boundary digit when the parent cell touches 0 or 1 and there is room.
pub(crate) fn seed_digits(
    psi: u64,
    t: u64,
    tau: u64,
    progression: bool,
    touches_left: bool,
    touches_right: bool,
) -> Result<Vec<u64>> {
    if progression {
        if t + 2 > psi {
            return Err(Error::Infeasible {
                level: 0,
                reason: format!("t = {t} leaves no room to isolate the progression among psi = {psi} digits"),
            });
        }
        let mut extra: Vec<u64> = ((tau + 2)..psi).collect();
        if touches_right && (t - tau) as usize + 1 <= extra.len() {
            extra.pop();
        }
        let mut digits: Vec<u64> = (1..=tau).collect();
        digits.extend(extra.into_iter().take((t - tau) as usize));
        return Ok(digits);
    }
    let windows = [
        (touches_left as u64, psi - 1 - touches_right as u64),
        (touches_left as u64, psi - 1),
        (0, psi - 1 - touches_right as u64),
        (0, psi - 1),
    ];
    for (lo, hi) in windows {
        if hi + 1 >= lo + t {
            return Ok((lo..lo + t).collect());
        }
    }
    unreachable!("t <= psi always fits")
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Number of leading `t = 1` levels used when the plain greedy does not detach
/// `E_N` from the endpoints within [`CONTAINMENT_HORIZON`] levels (two
/// single-digit levels always do).
const CONTAINMENT_PREFIX: usize = 2;
const CONTAINMENT_HORIZON: usize = 8;

fn binary_schedule(variant: Variant, alpha: f64, n_max: usize) -> Result<BranchingSchedule> {
    // decided on a fixed horizon so that the choice does not depend on n_max
    let probe = binary_schedule_with_prefix(variant, alpha, CONTAINMENT_HORIZON, 0)?;
    let prefix = if probe.containment_level().is_ok() { 0 } else { CONTAINMENT_PREFIX };
    binary_schedule_with_prefix(variant, alpha, n_max, prefix)
}

fn binary_schedule_with_prefix(variant: Variant, alpha: f64, n_max: usize, prefix: usize) -> Result<BranchingSchedule> {
    check_alpha(alpha)?;
    let mut s = empty_schedule(variant, alpha, alpha, None);
    s.forced_prefix = prefix;
    let step_down = -alpha * LN2;
    let mut ln_prod = 0.0;
    for n in 1..=n_max {
        let target = match variant {
            Variant::EndpointDecay => ((n as f64 + 3.0) * LN2).ln(),
            _ => 0.0,
        };
        let t = if n <= prefix { 1 } else { greedy_pick(1..=2, ln_prod, target, |t| (t as f64).ln() + step_down) };
        ln_prod += (t as f64).ln() + step_down;
        push_level(&mut s, 2, t, 0, alpha, alpha);
    }
    Ok(s)
}

fn empty_schedule(variant: Variant, alpha: f64, beta: f64, phi: Option<PhiSpec>) -> BranchingSchedule {
    BranchingSchedule {
        variant,
        alpha,
        beta,
        phi,
        levels: 0,
        psi: vec![1],
        cap_psi: vec![BigUint::one()],
        t: vec![1],
        tau: vec![1],
        theta: vec![1.0],
        vartheta: vec![1.0],
        cap_t: vec![BigUint::one()],
        tau_prod: vec![BigUint::one()],
        band_start: 0,
        forced_prefix: 0,
        start_level: 0,
    }
}

fn push_level(s: &mut BranchingSchedule, psi: u64, t: u64, tau: u64, alpha: f64, beta: f64) {
    let psi_f = psi as f64;
    s.psi.push(psi);
    s.t.push(t);
    s.tau.push(tau);
    s.theta.push(t as f64 * psi_f.powf(-alpha));
    s.vartheta.push(tau as f64 * psi_f.powf(0.5 * beta - alpha));
    let n = s.levels;
    s.cap_psi.push(&s.cap_psi[n] * psi);
    s.cap_t.push(&s.cap_t[n] * t);
    s.tau_prod.push(&s.tau_prod[n] * tau);
    s.levels += 1;
}

/// Binary schedule whose `theta` products track `log(2^N 8)`.
pub fn build_dyadic_schedule(alpha: f64, n_max: usize) -> Result<BranchingSchedule> {
    if n_max < 4 {
        return Err(Error::invalid("at least 4 levels are required"));
    }
    let mut s = binary_schedule(Variant::EndpointDecay, alpha, n_max)?;
    s.min_start_level()?;
    Ok(s)
}

/// Binary schedule whose `theta` products stay near 1.
pub fn build_flat_schedule(alpha: f64, n_max: usize) -> Result<BranchingSchedule> {
    if n_max < 4 {
        return Err(Error::invalid("at least 4 levels are required"));
    }
    let mut s = binary_schedule(Variant::EndpointRegular, alpha, n_max)?;
    s.min_start_level()?;
    Ok(s)
}

fn general_schedule(alpha: f64, beta: f64, phi: PhiSpec, second_part: bool, n_max: usize) -> Result<BranchingSchedule> {
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta <= alpha) {
        return Err(Error::invalid(format!("beta must lie in (0, alpha], got {beta}")));
    }
    if second_part && beta >= alpha {
        return Err(Error::invalid("the power-regular variant needs beta < alpha"));
    }
    phi.validate()?;
    let variant = if second_part { Variant::ProgressionPowerRegular } else { Variant::Progression };
    let psi: Vec<u64> = (0..=n_max + 1).map(|n| if n == 0 { 1 } else { branching_number(&phi, n) }).collect();
    if let Some(n) = (1..=n_max).find(|&n| psi[n] < 3) {
        return Err(Error::Infeasible { level: n, reason: format!("psi = {} leaves no admissible t", psi[n]) });
    }
    // free choices start once psi leaves room for more than one digit
    let band_start = (1..=n_max).rev().find(|&n| psi[n] < 4).unwrap_or(0);
    if band_start >= n_max {
        return Err(Error::Infeasible { level: band_start, reason: "psi never exceeds 3 in range".into() });
    }

    let mut s = empty_schedule(variant, alpha, beta, Some(phi));
    s.band_start = band_start;
    let mut cap_psi_next = BigUint::one();
    for n in 1..=n_max {
        cap_psi_next *= psi[n];
        let (t, tau) = if n <= band_start {
            (1, 1)
        } else {
            let ln_psi = (psi[n] as f64).ln();
            let next_psi = &cap_psi_next * psi[n + 1];
            let target = if second_part {
                alpha * (psi[n + 1] as f64).ln()
            } else {
                alpha * (psi[n + 1] as f64).ln() + bignum::ln(&(next_psi * 8u32)).ln()
            };
            let ln_prod = bignum::ln(&s.cap_t[n - 1]) - alpha * bignum::ln(&s.cap_psi[n - 1]);
            let t = greedy_pick(1..=psi[n] - 2, ln_prod, target, |t| (t as f64).ln() - alpha * ln_psi);
            // tau tracks tau_1...tau_N ~ t_1...t_N * Psi(N)^{-beta/2}
            let ln_t_prod = bignum::ln(&s.cap_t[n - 1]) + (t as f64).ln();
            let tau_target = ln_t_prod - 0.5 * beta * bignum::ln(&cap_psi_next);
            let tau = greedy_pick(1..=t, bignum::ln(&s.tau_prod[n - 1]), tau_target, |v| (v as f64).ln());
            (t, tau)
        };
        push_level(&mut s, psi[n], t, tau, alpha, beta);
    }
    Ok(s)
}

/// Growing-branching schedule with an embedded progression.
pub fn build_general_schedule(
    alpha: f64,
    beta: f64,
    phi: PhiSpec,
    second_part: bool,
    n_max: usize,
) -> Result<BranchingSchedule> {
    if n_max < 4 {
        return Err(Error::invalid("at least 4 levels are required"));
    }
    let mut s = general_schedule(alpha, beta, phi, second_part, n_max)?;
    s.min_start_level()?;
    Ok(s)
}

/// Dispatch on the variant. `beta` and `phi` are ignored by the binary variants;
/// the progression variants need `phi`.
pub fn build_schedule(
    variant: Variant,
    alpha: f64,
    beta: f64,
    phi: Option<PhiSpec>,
    n_max: usize,
) -> Result<BranchingSchedule> {
    match variant {
        Variant::EndpointDecay => build_dyadic_schedule(alpha, n_max),
        Variant::EndpointRegular => build_flat_schedule(alpha, n_max),
        Variant::Progression | Variant::ProgressionPowerRegular => {
            let phi = phi.ok_or_else(|| Error::invalid(format!("variant {variant} needs a phi descriptor")))?;
            build_general_schedule(alpha, beta, phi, variant == Variant::ProgressionPowerRegular, n_max)
        }
    }
}

/// `ln prod_{N=1}^{L} ceil(N^alpha) / N^alpha`.
pub fn rounding_drift_demo(alpha: f64, l: u64) -> f64 {
    (1..=l)
        .map(|n| {
            let p = (n as f64).powf(alpha);
            let near = p.round();
            let p = if (p - near).abs() <= 1e-12 * near { near } else { p };
            (p.ceil() / p).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags_round_trip() {
        for v in [
            Variant::EndpointDecay,
            Variant::EndpointRegular,
            Variant::Progression,
            Variant::ProgressionPowerRegular,
        ] {
            assert_eq!(v.tag().parse::<Variant>().unwrap(), v);
        }
        assert!("thm4".parse::<Variant>().is_err());
    }

    #[test]
    fn phi_descriptors_parse() {
        assert_eq!(PhiSpec::parse("log:1").unwrap(), PhiSpec::LogPower { epsilon: 1.0 });
        assert!(PhiSpec::parse("log:0").is_err());
        assert!(PhiSpec::parse("loglog:0.1").is_err());
        let table = PhiSpec::parse("table:2=1,16=2,256=3").unwrap();
        assert_eq!(table.descriptor(), "table:2=1,16=2,256=3");
        assert!((table.eval(16.0) - 2.0).abs() < 1e-12);
        // ln 4 sits a third of the way from ln 2 to ln 16
        assert!((table.eval(4.0) - 4.0 / 3.0).abs() < 1e-12);
        assert!(PhiSpec::parse("table:2=3,4=1").is_err());
    }

    #[test]
    fn log_power_doubling_gap_is_bounded_for_epsilon_one() {
        let phi = PhiSpec::log_power(1.0).unwrap();
        assert!((phi.doubling_gap(200) - LN2).abs() < 1e-9);
    }

    #[test]
    fn branching_number_at_level_four() {
        // ceil(sqrt(4 ln 2)) + 2 = ceil(1.665...) + 2
        let phi = PhiSpec::log_power(1.0).unwrap();
        assert_eq!(branching_number(&phi, 4), 4);
        assert_eq!(branching_number(&phi, 1), 3);
    }

    #[test]
    fn greedy_prefers_smaller_on_ties() {
        assert_eq!(greedy_pick(1..=2, 0.0, 0.0, |t| (t as f64).ln() - 0.5 * LN2), 1);
    }

    #[test]
    fn seed_digits_shift_off_boundaries() {
        assert_eq!(seed_digits(2, 1, 0, false, true, true).unwrap(), vec![1]);
        assert_eq!(seed_digits(2, 1, 0, false, false, true).unwrap(), vec![0]);
        assert_eq!(seed_digits(2, 2, 0, false, true, true).unwrap(), vec![0, 1]);
        assert_eq!(seed_digits(5, 2, 0, false, true, true).unwrap(), vec![1, 2]);
        assert_eq!(seed_digits(6, 3, 1, true, false, false).unwrap(), vec![1, 3, 4]);
        assert_eq!(seed_digits(5, 3, 1, true, false, true).unwrap(), vec![1, 3, 4]);
        assert!(seed_digits(4, 3, 1, true, false, false).is_err());
    }

    #[test]
    fn drift_small_cases() {
        assert_eq!(rounding_drift_demo(0.5, 1), 0.0);
        let expect = (8.0 / (2f64.sqrt() * 3f64.sqrt() * 2.0)).ln();
        assert!((rounding_drift_demo(0.5, 4) - expect).abs() < 1e-14);
    }
}
