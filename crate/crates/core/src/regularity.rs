//! Exact interval masses and two-sided regularity scans.
//!
//! Masses are exact rationals. On an interval whose endpoints lie on the
//! level-`N` grid, the limit measure agrees with `mu_N`, because every
//! level-`N` cell keeps mass `1/T_N` under refinement and cell boundaries
//! carry no mass.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bignum;
use crate::error::{Error, Result};
use crate::schedule::{PhiSpec, Variant};
use crate::tree::CantorTree;

/// A closed interval `[center - halfwidth, center + halfwidth]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalQuery {
    pub center: BigRational,
    pub halfwidth: BigRational,
}

impl IntervalQuery {
    pub fn new(center: BigRational, halfwidth: BigRational) -> Result<Self> {
        if halfwidth <= BigRational::zero() {
            return Err(Error::invalid("interval halfwidth must be positive"));
        }
        if center < BigRational::zero() || center > BigRational::one() {
            return Err(Error::invalid("interval center must lie in [0, 1]"));
        }
        Ok(IntervalQuery { center, halfwidth })
    }

    /// `[lo, hi]` from endpoints given as numerators over `den`.
    pub fn from_grid(lo: u64, hi: u64, den: u64) -> Result<Self> {
        if hi <= lo {
            return Err(Error::invalid("empty interval"));
        }
        let d = BigInt::from(den) * BigInt::from(2u32);
        let c = BigRational::new(BigInt::from(lo) + BigInt::from(hi), d.clone());
        let h = BigRational::new(BigInt::from(hi - lo), d);
        IntervalQuery::new(c, h)
    }

    pub fn lo(&self) -> BigRational {
        &self.center - &self.halfwidth
    }

    pub fn hi(&self) -> BigRational {
        &self.center + &self.halfwidth
    }

    pub fn length(&self) -> BigRational {
        &self.halfwidth * BigInt::from(2)
    }

    /// Least built level whose grid contains both endpoints.
    pub fn aligned_level(&self, tree: &CantorTree) -> Option<usize> {
        let (lo, hi) = (self.lo(), self.hi());
        (0..=tree.depth()).find(|&n| {
            let q = BigInt::from(tree.cells(n));
            (&lo * &q).is_integer() && (&hi * &q).is_integer()
        })
    }
}

fn rat(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Exact `mu_N(I)`: whole cells count `1/T_N`, straddled cells their covered fraction.
pub fn measure_of_interval(tree: &CantorTree, n: usize, query: &IntervalQuery) -> Result<BigRational> {
    let nodes = &tree.level(n)?.numerators;
    let q = tree.cells(n);
    let scale = rat(q);
    let zero = BigRational::zero();
    let x_lo = (query.lo() * &scale).max(zero.clone());
    let x_hi = (query.hi() * &scale).min(scale.clone());
    if x_hi <= x_lo {
        return Ok(zero);
    }
    let c = x_lo.floor().to_integer().to_u64().expect("nonnegative");
    let d = x_hi.floor().to_integer().to_u64().expect("nonnegative");
    let present = |m: u64| nodes.binary_search(&m).is_ok();
    let mut covered = BigRational::zero();
    if c == d {
        if present(c) {
            covered = &x_hi - &x_lo;
        }
    } else {
        if present(c) {
            covered += rat(c + 1) - &x_lo;
        }
        if d < q && present(d) {
            covered += &x_hi - rat(d);
        }
        let inside = nodes.partition_point(|&m| m < d) - nodes.partition_point(|&m| m <= c);
        covered += rat(inside as u64);
    }
    Ok(covered / rat(nodes.len() as u64))
}

/// Exact `mu(I)` for an interval aligned to some built grid.
pub fn limit_measure_of_interval(tree: &CantorTree, query: &IntervalQuery) -> Result<BigRational> {
    let n = query.aligned_level(tree).ok_or(Error::NotGridAligned)?;
    measure_of_interval(tree, n, query)
}

/// Comparison envelope for `mu(I)` as a function of `|I|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegularityEnvelope {
    /// `|I|^alpha / log(1/|I|)`, optionally with an extra `1/phi(1/|I|)` on the lower side.
    PowerOverLog { alpha: f64, phi: Option<PhiSpec> },
    /// `|I|^alpha`, optionally with `1/phi(1/|I|)` on the lower side.
    PurePower { alpha: f64, phi: Option<PhiSpec> },
}

impl RegularityEnvelope {
    pub fn for_variant(variant: Variant, alpha: f64, phi: Option<PhiSpec>) -> Self {
        match variant {
            Variant::EndpointDecay => RegularityEnvelope::PowerOverLog { alpha, phi: None },
            Variant::EndpointRegular => RegularityEnvelope::PurePower { alpha, phi: None },
            Variant::Progression => RegularityEnvelope::PowerOverLog { alpha, phi },
            Variant::ProgressionPowerRegular => RegularityEnvelope::PurePower { alpha, phi },
        }
    }

    /// `(lower, upper)` envelope values at length `len`.
    pub fn eval(&self, len: f64) -> (f64, f64) {
        let ln_inv = -len.ln();
        let (alpha, phi, over_log) = match self {
            RegularityEnvelope::PowerOverLog { alpha, phi } => (*alpha, phi, true),
            RegularityEnvelope::PurePower { alpha, phi } => (*alpha, phi, false),
        };
        let upper = len.powf(alpha) / if over_log { ln_inv } else { 1.0 };
        let slack = phi.as_ref().map_or(1.0, |p| p.eval_ln(ln_inv));
        (upper / slack, upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularitySample {
    pub scale: usize,
    pub length: f64,
    /// Center as a numerator over the tree's deepest grid.
    pub center: u64,
    pub mass_num: String,
    pub mass_den: String,
    pub mass: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    /// Centered at a node of `A_{N+Delta}` (otherwise an arbitrary position).
    pub centered: bool,
    /// For centered samples: the level-`(N+1)` ancestor cell lies in `I` and
    /// `mu(I) >= 1/T_{N+1}`.
    pub contains_cell: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub variant: Variant,
    pub seed: u64,
    pub envelope: RegularityEnvelope,
    pub samples: Vec<RegularitySample>,
    /// Minimum of `ratio_lower` over centered samples.
    pub band_lower: f64,
    /// Maximum of `ratio_upper` over all samples.
    pub band_upper: f64,
    pub margins: Vec<(usize, usize)>,
}

impl RegularityReport {
    pub fn band_width(&self) -> f64 {
        self.band_upper / self.band_lower
    }

    /// `(scale, min centered lower ratio, max upper ratio)` per scale.
    pub fn per_scale(&self) -> Vec<(usize, f64, f64)> {
        let mut scales: Vec<usize> = self.samples.iter().map(|s| s.scale).collect();
        scales.dedup();
        scales
            .into_iter()
            .map(|n| {
                let it = self.samples.iter().filter(|s| s.scale == n);
                let lo = it.clone().filter(|s| s.centered).map(|s| s.ratio_lower).fold(f64::INFINITY, f64::min);
                let hi = it.map(|s| s.ratio_upper).fold(0.0, f64::max);
                (n, lo, hi)
            })
            .collect()
    }

    pub fn lower_mechanism_holds(&self) -> bool {
        self.samples.iter().all(|s| s.contains_cell != Some(false))
    }
}

/// Least `Delta` with `Psi(N + Delta) >= 32 Psi(N + 1)`, so a center taken from
/// `A_{N+Delta}` is within `|I|/64` of `E` for every `|I| >= 2/Psi(N+1)`.
pub fn regularity_margin(tree: &CantorTree, n: usize) -> Option<usize> {
    let s = &tree.schedule;
    let target = s.cap_psi(n + 1) * 32u32;
    (1..).map(|d| n + d).take_while(|&m| m <= s.levels).find(|&m| s.cap_psi(m) >= &target).map(|m| m - n)
}

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub first_scale: usize,
    pub last_scale: usize,
    pub samples_per_scale: usize,
    pub seed: u64,
}

/// Scan scales `N0+1 ..= depth`; the tree must be built to `depth + Delta`.
pub fn regularity_scan(tree: &CantorTree, depth: usize, samples_per_scale: usize) -> Result<RegularityReport> {
    regularity_scan_with(
        tree,
        &ScanOptions { first_scale: tree.schedule.start_level + 1, last_scale: depth, samples_per_scale, seed: tree.seed },
    )
}

pub fn regularity_scan_with(tree: &CantorTree, opts: &ScanOptions) -> Result<RegularityReport> {
    let s = &tree.schedule;
    let envelope = RegularityEnvelope::for_variant(s.variant, s.alpha, s.phi.clone());
    let top = tree.depth();
    let q_top = tree.cells(top);
    if opts.first_scale > opts.last_scale {
        return Err(Error::LevelRange {
            level: opts.last_scale,
            reason: format!("no scales to scan; the first admissible scale is {}", opts.first_scale),
        });
    }
    let mut margins = vec![];
    for n in opts.first_scale..=opts.last_scale {
        let delta = regularity_margin(tree, n)
            .filter(|d| n + d <= top)
            .ok_or_else(|| Error::LevelRange { level: n, reason: format!("tree depth {top} leaves no margin above scale {n}") })?;
        margins.push((n, delta));
    }
    let max_len = if s.variant == Variant::EndpointRegular { 1.0 } else { 0.5 };
    let per_scale: Vec<Vec<RegularitySample>> = margins
        .par_iter()
        .map(|&(n, delta)| -> Result<Vec<RegularitySample>> {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(n as u64);
            let deep = &tree.levels[n + delta].numerators;
            let to_top = q_top / tree.cells(n + delta);
            let (q1, q0) = (q_top / tree.cells(n + 1), q_top / tree.cells(n));
            let mut out = Vec::with_capacity(2 * opts.samples_per_scale);
            for i in 0..2 * opts.samples_per_scale {
                let centered = i % 2 == 0;
                let (center, half) = if centered {
                    // |I| in [2/Psi(N+1), 2/Psi(N))
                    (deep[rng.gen_range(0..deep.len())] * to_top, rng.gen_range(q1..q0))
                } else {
                    // |I| in [1/Psi(N+1), 1/Psi(N)), anywhere in [0, 1]
                    (rng.gen_range(0..=q_top), rng.gen_range(q1.div_ceil(2)..q0.div_ceil(2).max(q1.div_ceil(2) + 1)))
                };
                let len = 2.0 * half as f64 / q_top as f64;
                if len >= max_len {
                    continue;
                }
                let query = IntervalQuery::new(
                    BigRational::new(BigInt::from(center), BigInt::from(q_top)),
                    BigRational::new(BigInt::from(half), BigInt::from(q_top)),
                )?;
                let mass = measure_of_interval(tree, top, &query)?;
                let m = ratio_to_f64(&mass);
                let (env_lo, env_hi) = envelope.eval(len);
                let contains_cell = centered.then(|| lower_mechanism(tree, n, center, q_top, &query, &mass));
                out.push(RegularitySample {
                    scale: n,
                    length: len,
                    center,
                    mass_num: mass.numer().to_string(),
                    mass_den: mass.denom().to_string(),
                    mass: m,
                    ratio_lower: m / env_lo,
                    ratio_upper: m / env_hi,
                    centered,
                    contains_cell,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let samples: Vec<RegularitySample> = per_scale.into_iter().flatten().collect();
    let band_lower = samples.iter().filter(|s| s.centered).map(|s| s.ratio_lower).fold(f64::INFINITY, f64::min);
    let band_upper = samples.iter().map(|s| s.ratio_upper).fold(0.0, f64::max);
    Ok(RegularityReport { variant: s.variant, seed: opts.seed, envelope, samples, band_lower, band_upper, margins })
}

/// The ancestor at level `n + 1` of the node under `center` has its cell inside `I`,
/// and `I` carries at least that cell's mass.
fn lower_mechanism(tree: &CantorTree, n: usize, center: u64, q_top: u64, query: &IntervalQuery, mass: &BigRational) -> bool {
    let per = q_top / tree.cells(n + 1);
    let anc = center.min(q_top - 1) / per;
    if !tree.levels[n + 1].contains(anc) {
        return false;
    }
    let q = BigInt::from(tree.cells(n + 1));
    let lo = BigRational::new(BigInt::from(anc), q.clone());
    let hi = BigRational::new(BigInt::from(anc + 1), q);
    let t_next = BigRational::new(BigInt::one(), BigInt::from(tree.levels[n + 1].numerators.len()));
    query.lo() <= lo && hi <= query.hi() && *mass >= t_next
}

pub fn ratio_to_f64(x: &BigRational) -> f64 {
    let (n, d) = (x.numer(), x.denom());
    if n.is_zero() {
        return 0.0;
    }
    let nu: BigUint = n.magnitude().clone();
    let v = (bignum::ln(&nu) - bignum::ln(d.magnitude())).exp();
    if n.sign() == num_bigint::Sign::Minus { -v } else { v }
}

/// `mu_N(I) <= 2/T_N` whenever `|I| < 1/Psi(N)`.
pub fn two_cell_bound_holds(tree: &CantorTree, n: usize, query: &IntervalQuery) -> Result<bool> {
    let len = query.length();
    if len >= BigRational::new(BigInt::one(), BigInt::from(tree.cells(n))) {
        return Ok(true);
    }
    let m = measure_of_interval(tree, tree.depth(), query)?;
    Ok(m <= BigRational::new(BigInt::from(2), BigInt::from(tree.levels[n].numerators.len())))
}
