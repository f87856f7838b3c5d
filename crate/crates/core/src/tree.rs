//! Level-by-level construction of the node sets `A_N` (and progression sets `P_N`).
//!
//! Nodes at level `N` are integer numerators over `Psi(N)`; a node `n` has
//! parent `n / psi(N)` and digit `n % psi(N)`. Levels up to the start level
//! are fixed by a deterministic rule. Later levels draw a cyclic run of `t_N`
//! digits per parent at a random offset, and the draw is accepted only if the
//! exponential-sum bound holds at every frequency of one period.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dft;
use crate::error::{Error, Result};
use crate::schedule::{seed_digits, BranchingSchedule};

pub use crate::dft::exp_sum;

pub const DEFAULT_ATTEMPT_CAP: u32 = 64;

/// Node set of one level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelNodes {
    pub level: usize,
    #[serde(with = "delta")]
    pub numerators: Vec<u64>,
    #[serde(with = "delta")]
    pub progression: Vec<u64>,
    /// Accepted offsets `x(a)`, one per parent in sorted order; empty at seed levels.
    #[serde(default)]
    pub offsets: Vec<u64>,
}

impl LevelNodes {
    pub fn contains(&self, n: u64) -> bool {
        self.numerators.binary_search(&n).is_ok()
    }

    pub fn in_progression(&self, n: u64) -> bool {
        self.progression.binary_search(&n).is_ok()
    }
}

/// Child digits selected under one parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitSet {
    pub level: usize,
    pub values: Vec<u64>,
}

impl DigitSet {
    /// `{x, x+1, ..., x+t-1} mod psi`, sorted.
    pub fn cyclic_run(level: usize, psi: u64, t: u64, x: u64) -> Self {
        let mut values: Vec<u64> = (0..t).map(|y| (x + y) % psi).collect();
        values.sort_unstable();
        DigitSet { level, values }
    }

    /// Build the progression `{1..tau}` in and isolate it.
    ///
    /// The progression digits are adjoined, the largest other digits are evicted
    /// until `t` remain, and then 0 and `tau + 1` are swapped for the largest
    /// digits outside `{0, ..., tau + 1}` that are still free.
    pub fn isolate(&self, psi: u64, tau: u64) -> Result<DigitSet> {
        let t = self.values.len();
        let protected = |d: u64| (1..=tau).contains(&d);
        let mut set: BTreeSet<u64> = self.values.iter().copied().collect();
        set.extend(1..=tau);
        while set.len() > t {
            let evict = *set.iter().rev().find(|&&d| !protected(d)).expect("t >= tau");
            set.remove(&evict);
        }
        for bad in [0, tau + 1] {
            if set.remove(&bad) {
                let free = ((tau + 2)..psi).rev().find(|d| !set.contains(d)).ok_or_else(|| Error::Infeasible {
                    level: self.level,
                    reason: format!("no free digit to isolate the progression (t = {t}, psi = {psi})"),
                })?;
                set.insert(free);
            }
        }
        Ok(DigitSet { level: self.level, values: set.into_iter().collect() })
    }
}

/// Acceptance data for one randomized level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub level: usize,
    pub attempts: u32,
    pub sup_random_part: f64,
    pub threshold: f64,
    pub correction: f64,
    pub sup_modified_part: f64,
}

impl VerificationRecord {
    pub fn holds(&self) -> bool {
        self.sup_random_part <= self.threshold && self.sup_modified_part <= self.threshold + self.correction
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorTree {
    pub schedule: BranchingSchedule,
    pub seed: u64,
    pub levels: Vec<LevelNodes>,
    pub verification: Vec<VerificationRecord>,
    #[serde(default = "default_cap")]
    pub attempt_cap: u32,
    #[serde(default = "default_limit")]
    pub dense_limit: u64,
}

fn default_cap() -> u32 {
    DEFAULT_ATTEMPT_CAP
}

fn default_limit() -> u64 {
    dft::DEFAULT_DENSE_LIMIT
}

/// Deterministic levels `1..=N0` with `E_{N0}` compactly inside (0, 1).
pub fn seed_levels(schedule: &BranchingSchedule, seed: u64) -> Result<CantorTree> {
    let s = schedule;
    if s.start_level == 0 || s.start_level > s.levels {
        return Err(Error::invalid("schedule start level is not set"));
    }
    let prog = s.variant.has_progression();
    let mut levels = vec![LevelNodes {
        level: 0,
        numerators: vec![0],
        progression: if prog { vec![0] } else { vec![] },
        offsets: vec![],
    }];
    for n in 1..=s.start_level {
        let prev = &levels[n - 1];
        let (psi, t, tau) = (s.psi(n), s.t(n), s.tau(n));
        let last = prev_cells(s, n - 1) - 1;
        let mut nums = Vec::with_capacity(prev.numerators.len() * t as usize);
        let mut progression = Vec::new();
        for &a in &prev.numerators {
            let in_p = prev.in_progression(a);
            let digits = seed_digits(psi, t, tau, in_p, a == 0, a == last)
                .map_err(|e| relevel(e, n))?;
            nums.extend(digits.iter().map(|d| a * psi + d));
            if in_p {
                progression.extend((1..=tau).map(|d| a * psi + d));
            }
        }
        levels.push(LevelNodes { level: n, numerators: nums, progression, offsets: vec![] });
    }
    let top = &levels[s.start_level];
    let cells = prev_cells(s, s.start_level);
    if top.numerators[0] == 0 || top.numerators.last().unwrap() + 1 >= cells {
        return Err(Error::Invariant(format!("seed level {} is not compactly inside (0, 1)", s.start_level)));
    }
    Ok(CantorTree {
        schedule: s.clone(),
        seed,
        levels,
        verification: vec![],
        attempt_cap: DEFAULT_ATTEMPT_CAP,
        dense_limit: dft::DEFAULT_DENSE_LIMIT,
    })
}

fn relevel(e: Error, level: usize) -> Error {
    match e {
        Error::Infeasible { reason, .. } => Error::Infeasible { level, reason },
        other => other,
    }
}

/// `Psi(n)` as u64 (the grid size of level `n`).
fn prev_cells(s: &BranchingSchedule, n: usize) -> u64 {
    crate::bignum::to_u64(s.cap_psi(n)).expect("grid size fits in u64")
}

/// Seed levels followed by randomized levels up to `depth`.
pub fn build_tree(schedule: &BranchingSchedule, seed: u64, depth: usize) -> Result<CantorTree> {
    let mut tree = seed_levels(schedule, seed)?;
    tree.extend_to(depth)?;
    Ok(tree)
}

impl CantorTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> Result<&LevelNodes> {
        self.levels.get(n).ok_or_else(|| Error::LevelRange {
            level: n,
            reason: format!("tree is built to depth {}", self.depth()),
        })
    }

    /// Grid size `Psi(n)` of a built level.
    pub fn cells(&self, n: usize) -> u64 {
        prev_cells(&self.schedule, n)
    }

    pub fn with_attempt_cap(mut self, cap: u32) -> Self {
        self.attempt_cap = cap;
        self
    }

    pub fn with_dense_limit(mut self, limit: u64) -> Self {
        self.dense_limit = limit;
        self
    }

    pub fn extend_to(&mut self, depth: usize) -> Result<()> {
        if depth > self.schedule.levels {
            return Err(Error::LevelRange { level: depth, reason: format!("schedule has {} levels", self.schedule.levels) });
        }
        while self.depth() < depth {
            self.extend_level()?;
        }
        Ok(())
    }

    /// The generator for level `n`: the tree seed, with the level as stream id.
    pub fn level_rng(&self, n: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(n as u64);
        rng
    }

    /// Append one randomized level.
    pub fn extend_level(&mut self) -> Result<()> {
        let n = self.depth() + 1;
        let s = &self.schedule;
        if n > s.levels {
            return Err(Error::LevelRange { level: n, reason: "past the end of the schedule".into() });
        }
        if !s.bernstein_feasible(n) {
            return Err(Error::Infeasible { level: n, reason: "4 log(8 Psi(N)) > T_{N-1}".into() });
        }
        let len = dft::check_len(n, self.cells(n), self.dense_limit)?;
        let (psi, t, tau) = (s.psi(n), s.t(n), s.tau(n));
        let threshold = s.threshold(n);
        let correction = s.correction(n);
        let prev = &self.levels[n - 1];
        let mut rng = self.level_rng(n);

        let mut attempts = 0;
        let (offsets, sup_random) = loop {
            if attempts == self.attempt_cap {
                return Err(Error::AttemptCap { level: n, seed: self.seed, cap: self.attempt_cap });
            }
            attempts += 1;
            let offsets: Vec<u64> = prev.numerators.iter().map(|_| rng.gen_range(0..psi)).collect();
            let candidate = children(prev, n, psi, t, &offsets, None)?;
            let sup = chi_sup(&prev.numerators, &candidate, psi, t, len);
            if sup <= threshold {
                break (offsets, sup);
            }
        };

        let (numerators, progression, sup_modified) = if s.variant.has_progression() {
            let nums = children(prev, n, psi, t, &offsets, Some(tau))?;
            let progression: Vec<u64> = prev.progression.iter().flat_map(|&a| (1..=tau).map(move |d| a * psi + d)).collect();
            let sup = chi_sup(&prev.numerators, &nums, psi, t, len);
            (nums, progression, sup)
        } else {
            (children(prev, n, psi, t, &offsets, None)?, vec![], sup_random)
        };
        let record = VerificationRecord {
            level: n,
            attempts,
            sup_random_part: sup_random,
            threshold,
            correction,
            sup_modified_part: sup_modified,
        };
        if !record.holds() {
            return Err(Error::Invariant(format!(
                "level {n}: modified sum {sup_modified} exceeds threshold {threshold} + correction {correction}"
            )));
        }
        self.levels.push(LevelNodes { level: n, numerators, progression, offsets });
        self.verification.push(record);
        Ok(())
    }

    /// `T_{N-1}^{-1} sum_a chi_a(k)` at one integer frequency, evaluated directly.
    pub fn chi_sum(&self, n: usize, k: i64) -> Result<Complex64> {
        let (prev, cur) = (self.level(n - 1)?, self.level(n)?);
        let psi = self.schedule.psi(n);
        let q = self.cells(n);
        let t = self.schedule.t(n) as f64;
        let full: Vec<u64> = prev.numerators.iter().flat_map(|&a| (0..psi).map(move |d| a * psi + d)).collect();
        let v = dft::exp_sum(&cur.numerators, q, k) / t - dft::exp_sum(&full, q, k) / psi as f64;
        Ok(v / prev.numerators.len() as f64)
    }

    /// Check the chi-sum at random `k` outside one period against its value at `k mod Psi(N)`.
    pub fn verify_periodicity(&self, n: usize, samples: usize) -> Result<bool> {
        let q = self.cells(n) as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        for _ in 0..samples {
            let k = loop {
                let k = rng.gen_range(-10 * q..=10 * q);
                if !(0..q).contains(&k) {
                    break k;
                }
            };
            let (a, b) = (self.chi_sum(n, k)?, self.chi_sum(n, k.rem_euclid(q))?);
            if (a - b).norm() > 1e-9 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Recompute both sups of a randomized level from stored data.
    pub fn recheck_level(&self, n: usize) -> Result<(f64, f64)> {
        let (prev, cur) = (self.level(n - 1)?, self.level(n)?);
        if cur.offsets.is_empty() {
            return Err(Error::LevelRange { level: n, reason: "seed levels carry no verification".into() });
        }
        let s = &self.schedule;
        let (psi, t) = (s.psi(n), s.t(n));
        let len = dft::check_len(n, self.cells(n), self.dense_limit)?;
        let random = children(prev, n, psi, t, &cur.offsets, None)?;
        Ok((chi_sup(&prev.numerators, &random, psi, t, len), chi_sup(&prev.numerators, &cur.numerators, psi, t, len)))
    }

    /// Structural invariants: nesting, cardinalities, progression recursion and isolation.
    pub fn check_structure(&self) -> Result<()> {
        let s = &self.schedule;
        let prog = s.variant.has_progression();
        for n in 1..=self.depth() {
            let (prev, cur) = (&self.levels[n - 1], &self.levels[n]);
            let psi = s.psi(n);
            let fail = |msg: String| Err(Error::Invariant(format!("level {n}: {msg}")));
            if crate::bignum::to_u64(s.cap_t(n)) != Some(cur.numerators.len() as u64) {
                return fail(format!("#A_N = {} but T_N = {}", cur.numerators.len(), s.cap_t(n)));
            }
            if cur.numerators.windows(2).any(|w| w[0] >= w[1]) {
                return fail("numerators not strictly increasing".into());
            }
            if let Some(&bad) = cur.numerators.iter().find(|&&m| !prev.contains(m / psi)) {
                return fail(format!("node {bad} has no parent"));
            }
            if !prog {
                continue;
            }
            let tau = s.tau(n);
            let expect: Vec<u64> = prev.progression.iter().flat_map(|&a| (1..=tau).map(move |d| a * psi + d)).collect();
            if expect != cur.progression {
                return fail("progression differs from its recursion".into());
            }
            if !cur.progression.iter().all(|&m| cur.contains(m)) {
                return fail("progression not contained in A_N".into());
            }
            for &a in &prev.progression {
                if cur.contains(a * psi) || cur.contains(a * psi + tau + 1) {
                    return fail(format!("progression parent {a} not isolated"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().expect("tree serializes").as_bytes()))
    }
}

/// Children of every parent for the given offsets, optionally with the
/// progression modification applied to progression parents.
fn children(prev: &LevelNodes, n: usize, psi: u64, t: u64, offsets: &[u64], tau: Option<u64>) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(prev.numerators.len() * t as usize);
    for (&a, &x) in prev.numerators.iter().zip(offsets) {
        let mut digits = DigitSet::cyclic_run(n, psi, t, x);
        if let Some(tau) = tau {
            if prev.in_progression(a) {
                digits = digits.isolate(psi, tau)?;
            }
        }
        out.extend(digits.values.iter().map(|d| a * psi + d));
    }
    Ok(out)
}

/// `max_k |T_{N-1}^{-1} sum_a chi_a(k)|` over one period, by a single dense transform
/// of `1[m in children] / t - 1[m / psi in parents] / psi`.
fn chi_sup(parents: &[u64], children: &[u64], psi: u64, t: u64, len: usize) -> f64 {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let full = 1.0 / psi as f64;
    for &a in parents {
        let base = (a * psi) as usize;
        for z in &mut buf[base..base + psi as usize] {
            z.re -= full;
        }
    }
    let w = 1.0 / t as f64;
    for &m in children {
        buf[m as usize].re += w;
    }
    dft::forward(&mut buf);
    dft::sup_abs(&buf) / parents.len() as f64
}

/// Serde adapter storing a sorted integer array as first value plus gaps.
mod delta {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
        let mut prev = 0;
        s.collect_seq(v.iter().map(|&x| {
            let d = x - prev;
            prev = x;
            d
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        let gaps: Vec<u64> = Vec::deserialize(d)?;
        let mut acc = 0;
        Ok(gaps
            .into_iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect())
    }
}
