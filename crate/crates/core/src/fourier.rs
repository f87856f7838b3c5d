//! Fourier coefficients of the level-`N` step measures and decay certificates.
//!
//! `mu_N` has density `Psi(N)/T_N` on `E_N`, so
//! `mu_N^(xi) = T_N^{-1} S_{A_N}(xi) K(xi / Psi(N))` with `K` the transform of
//! the unit-cell indicator. The limit measure is never built; its coefficients
//! are bracketed by a step measure plus [`TailBounds`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bignum;
use crate::dft::{self, cell_kernel};
use crate::error::{Error, Result};
use crate::schedule::{BranchingSchedule, Variant};
use crate::tree::CantorTree;

/// Level `N` of a tree viewed as the probability measure `mu_N`.
#[derive(Clone, Copy, Debug)]
pub struct StepMeasure<'a> {
    pub tree: &'a CantorTree,
    pub level: usize,
}

impl<'a> StepMeasure<'a> {
    pub fn new(tree: &'a CantorTree, level: usize) -> Result<Self> {
        tree.level(level)?;
        Ok(StepMeasure { tree, level })
    }

    pub fn cells(&self) -> u64 {
        self.tree.cells(self.level)
    }

    pub fn nodes(&self) -> &'a [u64] {
        &self.tree.levels[self.level].numerators
    }

    /// `mu_N^(xi)`.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        let q = self.cells();
        dft::exp_sum_real(self.nodes(), q, xi) * cell_kernel(xi / q as f64) / self.nodes().len() as f64
    }

    /// `mu_N^(k)` for `k = 0..=k_max` from one dense transform of the node indicator.
    pub fn coefficients(&self, k_max: u64) -> Result<Vec<Complex64>> {
        let q = self.cells();
        let s = indicator_transform(self.nodes(), q, self.level, self.tree.dense_limit)?;
        let inv_t = 1.0 / self.nodes().len() as f64;
        Ok((0..=k_max)
            .map(|k| s[(k % q) as usize] * cell_kernel(k as f64 / q as f64) * inv_t)
            .collect())
    }

    /// `F_N(x) = mu_N([0, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let q = self.cells() as f64;
        let pos = (x.clamp(0.0, 1.0) * q).min(q);
        let cell = pos.floor() as u64;
        let nodes = self.nodes();
        let below = nodes.partition_point(|&a| a < cell);
        let partial = if nodes.get(below) == Some(&cell) { pos - cell as f64 } else { 0.0 };
        (below as f64 + partial) / nodes.len() as f64
    }
}

/// `S_A(k)` for `k` in one period.
pub(crate) fn indicator_transform(nodes: &[u64], q: u64, level: usize, limit: u64) -> Result<Vec<Complex64>> {
    let len = dft::check_len(level, q, limit)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for &a in nodes {
        buf[a as usize].re = 1.0;
    }
    dft::forward(&mut buf);
    Ok(buf)
}

pub fn measure_fourier(m: &StepMeasure<'_>, xi: f64) -> Complex64 {
    m.fourier(xi)
}

/// Shape of the comparison envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    /// `|k|^{-exponent}`.
    PurePower { exponent: f64 },
    /// `|k|^{-exponent} log^{1/2}|k|`.
    PowerSqrtLog { exponent: f64 },
}

impl Envelope {
    /// The decay envelope a variant is expected to meet.
    pub fn for_schedule(s: &BranchingSchedule) -> Self {
        match s.variant {
            Variant::EndpointDecay => Envelope::PurePower { exponent: s.alpha / 2.0 },
            Variant::EndpointRegular => Envelope::PowerSqrtLog { exponent: s.alpha / 2.0 },
            Variant::Progression | Variant::ProgressionPowerRegular => Envelope::PurePower { exponent: s.beta / 2.0 },
        }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            Envelope::PurePower { exponent } | Envelope::PowerSqrtLog { exponent } => exponent,
        }
    }

    pub fn eval(&self, k: f64) -> f64 {
        let k = k.abs();
        match *self {
            Envelope::PurePower { exponent } => k.powf(-exponent),
            Envelope::PowerSqrtLog { exponent } => k.powf(-exponent) * k.ln().sqrt(),
        }
    }

    /// Smallest frequency at which the envelope is positive.
    pub fn first_k(&self) -> u64 {
        match self {
            Envelope::PurePower { .. } => 1,
            Envelope::PowerSqrtLog { .. } => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub variant: Variant,
    pub level: usize,
    pub seed: u64,
    pub envelope: Envelope,
    pub per_k: Vec<(u64, Complex64)>,
    pub sup_constant: f64,
}

impl DecayReport {
    pub fn ratio(&self, i: usize) -> f64 {
        let (k, z) = self.per_k[i];
        z.norm() / self.envelope.eval(k as f64)
    }

    pub fn ratios(&self) -> Vec<f64> {
        (0..self.per_k.len()).map(|i| self.ratio(i)).collect()
    }

    pub fn recompute_sup(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    /// The same coefficients measured against another envelope.
    pub fn against(&self, envelope: Envelope) -> DecayReport {
        let first = envelope.first_k();
        let mut r = DecayReport { envelope, per_k: self.per_k.iter().copied().filter(|p| p.0 >= first).collect(), ..self.clone() };
        r.sup_constant = r.recompute_sup();
        r
    }
}

/// `|mu_N^(k)|` for `1 <= k <= k_max` against the variant's envelope.
pub fn decay_profile(m: &StepMeasure<'_>, k_max: u64) -> Result<DecayReport> {
    let env = Envelope::for_schedule(&m.tree.schedule);
    decay_profile_range(m, env.first_k(), k_max, env)
}

pub fn decay_profile_range(m: &StepMeasure<'_>, k_min: u64, k_max: u64, envelope: Envelope) -> Result<DecayReport> {
    if k_min < envelope.first_k() || k_min > k_max {
        return Err(Error::invalid(format!("frequency range [{k_min}, {k_max}] is empty or starts below the envelope")));
    }
    let coeffs = m.coefficients(k_max)?;
    let per_k: Vec<(u64, Complex64)> = (k_min..=k_max).map(|k| (k, coeffs[k as usize])).collect();
    let mut r = DecayReport {
        variant: m.tree.schedule.variant,
        level: m.level,
        seed: m.tree.seed,
        envelope,
        per_k,
        sup_constant: 0.0,
    };
    r.sup_constant = r.recompute_sup();
    Ok(r)
}

/// Envelope ratios `|mu_N^(xi)| / envelope(xi)` at random real `xi` in `[2, k_max]`.
pub fn real_frequency_ratios(m: &StepMeasure<'_>, envelope: Envelope, samples: usize, k_max: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..samples).map(|_| rng.gen_range(2.0..k_max)).collect();
    xs.par_iter().map(|&xi| m.fourier(xi).norm() / envelope.eval(xi)).collect()
}

/// Per-level increments `min(1, Psi(n)/|k|) (threshold(n) + correction(n))` of a schedule,
/// continued past the last level to close the tail sum.
#[derive(Clone, Debug)]
pub struct TailBounds {
    levels: usize,
    ln_psi: Vec<f64>,
    allowance: Vec<f64>,
    /// Bound on the ratio of successive `block`-level sums past the virtual end.
    pub rho: f64,
    block: usize,
}

const VIRTUAL_LEVELS: usize = 64;
const TAIL_BLOCK: usize = 8;

impl TailBounds {
    pub fn new(s: &BranchingSchedule) -> Result<Self> {
        let ext = s.extended(s.levels + VIRTUAL_LEVELS)?;
        let last = ext.levels;
        let ln_psi: Vec<f64> = (0..=last).map(|n| bignum::ln(ext.cap_psi(n))).collect();
        let allowance: Vec<f64> =
            (0..=last).map(|n| if n == 0 { 0.0 } else { ext.threshold(n) + ext.correction(n) }).collect();
        // ratio of consecutive block sums over the virtual range
        let block_sum = |start: usize| allowance[start..start + TAIL_BLOCK].iter().sum::<f64>();
        let first = s.levels + 1;
        let rho = (first..=last + 1 - 2 * TAIL_BLOCK)
            .map(|b| block_sum(b + TAIL_BLOCK) / block_sum(b))
            .fold(0.0, f64::max);
        if !(rho < 1.0) {
            return Err(Error::Infeasible { level: last, reason: format!("tail allowances do not decay (block ratio {rho})") });
        }
        Ok(TailBounds { levels: s.levels, ln_psi, allowance, rho, block: TAIL_BLOCK })
    }

    fn term(&self, n: usize, ln_k: f64) -> f64 {
        (self.ln_psi[n] - ln_k).min(0.0).exp() * self.allowance[n]
    }

    /// Upper bound on `|mu^(k) - mu_N^(k)|`.
    pub fn certificate(&self, n: usize, k: i64) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("the tail certificate needs k != 0"));
        }
        if n > self.levels {
            return Err(Error::LevelRange { level: n, reason: format!("schedule has {} levels", self.levels) });
        }
        let ln_k = (k.unsigned_abs() as f64).ln();
        let last = self.allowance.len() - 1;
        let recorded: f64 = (n + 1..=self.levels).map(|m| self.term(m, ln_k)).sum();
        Ok(recorded + self.closure(ln_k, last))
    }

    /// Virtual levels past the schedule plus a geometric bound on everything beyond.
    fn closure(&self, ln_k: f64, last: usize) -> f64 {
        let virt: f64 = (self.levels + 1..=last).map(|m| self.term(m, ln_k)).sum();
        let final_block: f64 = self.allowance[last + 1 - self.block..=last].iter().sum();
        virt + final_block * self.rho / (1.0 - self.rho)
    }

    pub fn allowance(&self, n: usize) -> f64 {
        self.allowance[n]
    }
}

pub fn tail_certificate(s: &BranchingSchedule, n: usize, k: i64) -> Result<f64> {
    TailBounds::new(s)?.certificate(n, k)
}

/// Level-`n` nodes that descend from the progression set `P_l`.
pub fn restricted_nodes(tree: &CantorTree, l: usize, n: usize) -> Result<Vec<u64>> {
    check_restriction_levels(tree, l, n)?;
    let scale = tree.cells(n) / tree.cells(l);
    let p = &tree.levels[l];
    Ok(tree.levels[n].numerators.iter().copied().filter(|&m| p.in_progression(m / scale)).collect())
}

pub(crate) fn check_restriction_levels(tree: &CantorTree, l: usize, n: usize) -> Result<()> {
    if !tree.schedule.variant.has_progression() {
        return Err(Error::invalid("restriction needs a progression variant"));
    }
    if l <= tree.schedule.start_level || l > n {
        return Err(Error::LevelRange {
            level: l,
            reason: format!("need N0 = {} < l <= N = {n}", tree.schedule.start_level),
        });
    }
    tree.level(n)?;
    Ok(())
}

/// `(f_l mu_N)^(xi) = T_N^{-1} S_{F_l cap A_N}(xi) K(xi / Psi(N))`.
pub fn restricted_fourier(tree: &CantorTree, l: usize, n: usize, xi: f64) -> Result<Complex64> {
    let nodes = restricted_nodes(tree, l, n)?;
    let q = tree.cells(n);
    Ok(dft::exp_sum_real(&nodes, q, xi) * cell_kernel(xi / q as f64) / tree.levels[n].numerators.len() as f64)
}

/// `sup_i |F_{N+1}(x_i) - F_N(x_i)|` over the breakpoints `x_i = i / Psi(N+1)`.
///
/// Both cdfs are linear between these points, so this is the exact sup norm.
pub fn cdf_sup_gap(tree: &CantorTree, n: usize) -> Result<f64> {
    tree.level(n + 1)?;
    let (coarse, fine) = (&tree.levels[n].numerators, &tree.levels[n + 1].numerators);
    let psi = tree.schedule.psi(n + 1);
    let (tc, tf) = (coarse.len() as f64, fine.len() as f64);
    let (mut ic, mut jf) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    for i in 0..=tree.cells(n + 1) {
        while jf < fine.len() && fine[jf] < i {
            jf += 1;
        }
        let cell = i / psi;
        while ic < coarse.len() && coarse[ic] < cell {
            ic += 1;
        }
        let partial = if coarse.get(ic) == Some(&cell) { (i % psi) as f64 / psi as f64 } else { 0.0 };
        let f_coarse = (ic as f64 + partial) / tc;
        sup = sup.max((jf as f64 / tf - f_coarse).abs());
    }
    Ok(sup)
}
