//! Command-line front end: one pipeline per subcommand, CSV or JSON artifacts.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fourier::{decay_profile, StepMeasure};
use crate::regularity::regularity_scan;
use crate::restriction::{
    additive_energy, energy_lower_bound, q_critical, salem_norm_exact, salem_norm_quadrature, schedule_certificate,
    sumset_bound, sumset_size, to_f64, EnergyInstance, ENUMERATION_LIMIT,
};
use crate::schedule::{build_schedule, rounding_drift_demo, BranchingSchedule, PhiSpec, Variant};
use crate::tree::{build_tree, CantorTree};

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "SALEM_OUT_DIR";

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Schedule,
    Build,
    Decay,
    Regularity,
    Energy,
    Sharpness,
    Drift,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "salem", version, about = "Random Cantor measures with optimal Fourier decay")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// thm2, thm3, thm1 or thm1-second-part
    #[arg(long, default_value = "thm2")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Defaults to alpha.
    #[arg(long)]
    pub beta: Option<f64>,
    /// `log:EPS`, `loglog:C` or `table:t=v,...`; progression variants default to `log:1`.
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long, default_value_t = 12)]
    pub levels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8192)]
    pub kmax: u64,
    /// Energy order; defaults to the least r with r > 1/beta and 2r > q0.
    #[arg(long)]
    pub r: Option<u32>,
    /// Comma-separated exponents.
    #[arg(long = "q", value_delimiter = ',')]
    pub q: Vec<f64>,
    /// Largest L for the drift table.
    #[arg(long = "L", default_value_t = 100_000)]
    pub drift_len: u64,
    /// Samples per scale for the regularity scan.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads; defaults to available cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.alpha)
    }

    pub fn phi_spec(&self) -> Result<Option<PhiSpec>> {
        match (&self.phi, self.variant.has_progression()) {
            (Some(d), _) => PhiSpec::parse(d).map(Some),
            (None, true) => PhiSpec::log_power(1.0).map(Some),
            (None, false) => Ok(None),
        }
    }

    pub fn schedule(&self, levels: usize) -> Result<BranchingSchedule> {
        build_schedule(self.variant, self.alpha, self.beta(), self.phi_spec()?, levels)
    }

    pub fn energy_order(&self) -> Result<u32> {
        if let Some(r) = self.r {
            return Ok(r);
        }
        let q0 = q_critical(self.alpha, self.beta())?;
        Ok((1..).find(|&r| r as f64 > 1.0 / self.beta() && 2.0 * r as f64 > q0).expect("unbounded search"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Header carried by every artifact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub schedule_hash: Option<String>,
    pub seed: u64,
}

impl Meta {
    fn new(config: &RunConfig, schedule: Option<&BranchingSchedule>) -> Self {
        Meta {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            schedule_hash: schedule.map(BranchingSchedule::hash),
            seed: config.seed,
        }
    }
}

/// A rectangular result with named columns.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: vec![] }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        let rows = self.rows.iter().map(|r| {
            let obj = self.columns.iter().zip(r).map(|(c, v)| {
                let v = v.parse::<f64>().ok().filter(|x| x.is_finite()).map_or_else(|| json!(v), |x| json!(x));
                (c.to_string(), v)
            });
            Value::Object(obj.collect())
        });
        Value::Array(rows.collect())
    }
}

fn cell(x: impl Display) -> String {
    x.to_string()
}

/// What a pipeline produced.
pub struct Artifact {
    pub name: &'static str,
    pub meta: Meta,
    pub table: Table,
    /// Structured payload used instead of the table in JSON mode.
    pub payload: Option<Value>,
}

impl Artifact {
    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Json => {
                let data = self.payload.clone().unwrap_or_else(|| self.table.to_json());
                serde_json::to_string_pretty(&json!({ "meta": self.meta, "data": data }))? + "\n"
            }
            Format::Csv => {
                let mut s = format!("# {} {}\n", self.meta.tool, self.meta.version);
                s += &format!("# config {}\n", serde_json::to_string(&self.meta.config)?);
                if let Some(h) = &self.meta.schedule_hash {
                    s += &format!("# schedule_hash {h}\n");
                }
                s += &format!("# seed {}\n", self.meta.seed);
                s += &self.table.columns.join(",");
                s.push('\n');
                for r in &self.table.rows {
                    s += &r.join(",");
                    s.push('\n');
                }
                s
            }
        })
    }

    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = dir.join(format!("{}.{ext}", self.name));
        fs::write(&path, self.render(format)?)?;
        Ok(path)
    }
}

/// Build the artifacts for `config` without touching the filesystem.
pub fn execute(config: &RunConfig) -> Result<Vec<Artifact>> {
    match config.command {
        Command::Schedule => run_schedule(config),
        Command::Build => run_build(config),
        Command::Decay => run_decay(config),
        Command::Regularity => run_regularity(config),
        Command::Energy => run_energy(config),
        Command::Sharpness => run_sharpness(config),
        Command::Drift => run_drift(config),
    }
}

/// Execute and write artifacts, inside a pool capped at `--threads`.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::invalid(e.to_string()))?;
    let artifacts = pool.install(|| execute(config))?;
    let dir = config.out_dir();
    let mut paths = vec![];
    for a in &artifacts {
        // the tree itself is always JSON so it can be reloaded
        let format = if a.name == "tree" { Format::Json } else { config.format };
        paths.push(a.write(&dir, format)?);
    }
    Ok(paths)
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&config) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code }));
            code
        }
    }
}

/// Reload a tree written by `build`.
pub fn load_tree(path: &Path) -> Result<CantorTree> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let data = v.get("data").cloned().ok_or_else(|| Error::invalid("artifact has no data field"))?;
    Ok(serde_json::from_value(data)?)
}

fn run_schedule(c: &RunConfig) -> Result<Vec<Artifact>> {
    let s = c.schedule(c.levels)?;
    let mut t = Table::new(&["n", "psi", "t", "tau", "theta", "vartheta", "Psi", "T", "tau_prod", "bernstein", "threshold"]);
    for n in 1..=s.levels {
        t.push(vec![
            cell(n),
            cell(s.psi(n)),
            cell(s.t(n)),
            cell(s.tau(n)),
            cell(s.theta[n]),
            cell(s.vartheta[n]),
            cell(s.cap_psi(n)),
            cell(s.cap_t(n)),
            cell(s.tau_product(n)),
            cell(s.bernstein_feasible(n)),
            cell(if n >= 2 { s.threshold(n) } else { f64::NAN }),
        ]);
    }
    let payload = Some(serde_json::to_value(&s)?);
    Ok(vec![Artifact { name: "schedule", meta: Meta::new(c, Some(&s)), table: t, payload }])
}

fn build(c: &RunConfig, levels: usize, depth: usize) -> Result<CantorTree> {
    let tree = build_tree(&c.schedule(levels)?, c.seed, depth)?;
    tree.check_structure()?;
    Ok(tree)
}

fn run_build(c: &RunConfig) -> Result<Vec<Artifact>> {
    let tree = build(c, c.levels, c.levels)?;
    let mut t = Table::new(&["level", "attempts", "sup_random_part", "threshold", "correction", "sup_modified_part", "holds"]);
    for r in &tree.verification {
        if !r.holds() {
            return Err(Error::Invariant(format!("verification fails at level {}", r.level)));
        }
        t.push(vec![
            cell(r.level),
            cell(r.attempts),
            cell(r.sup_random_part),
            cell(r.threshold),
            cell(r.correction),
            cell(r.sup_modified_part),
            cell(r.holds()),
        ]);
    }
    let meta = Meta::new(c, Some(&tree.schedule));
    let payload = Some(serde_json::to_value(&tree)?);
    Ok(vec![
        Artifact { name: "build", meta: meta.clone(), table: t, payload: payload.clone() },
        Artifact { name: "tree", meta, table: Table::default(), payload },
    ])
}

fn run_decay(c: &RunConfig) -> Result<Vec<Artifact>> {
    let tree = build(c, c.levels, c.levels)?;
    let m = StepMeasure::new(&tree, c.levels)?;
    let report = decay_profile(&m, c.kmax)?;
    let mut t = Table::new(&["k", "re", "im", "abs", "ratio"]);
    for (i, (k, z)) in report.per_k.iter().enumerate() {
        t.push(vec![cell(k), cell(z.re), cell(z.im), cell(z.norm()), cell(report.ratio(i))]);
    }
    let payload = Some(json!({ "envelope": report.envelope, "sup_constant": report.sup_constant, "rows": t.to_json() }));
    Ok(vec![Artifact { name: "decay", meta: Meta::new(c, Some(&tree.schedule)), table: t, payload }])
}

fn run_regularity(c: &RunConfig) -> Result<Vec<Artifact>> {
    // the scan needs Delta extra levels above the last scale
    let s = c.schedule(c.levels + 16)?;
    let target = s.cap_psi(c.levels + 1) * 32u32;
    let depth = (c.levels + 1..=s.levels)
        .find(|&m| s.cap_psi(m) >= &target)
        .ok_or_else(|| Error::invalid("schedule too short for the regularity margin"))?;
    let tree = build_tree(&s, c.seed, depth)?;
    let report = regularity_scan(&tree, c.levels, c.samples)?;
    if !report.lower_mechanism_holds() {
        return Err(Error::Invariant("a centered interval misses its contained cell".into()));
    }
    let mut t = Table::new(&["scale", "length", "center", "mass", "ratio_lower", "ratio_upper", "centered", "contains_cell"]);
    for x in &report.samples {
        t.push(vec![
            cell(x.scale),
            cell(x.length),
            cell(x.center),
            cell(x.mass),
            cell(x.ratio_lower),
            cell(x.ratio_upper),
            cell(x.centered),
            x.contains_cell.map_or(String::new(), cell),
        ]);
    }
    let payload = Some(serde_json::to_value(&report)?);
    Ok(vec![Artifact { name: "regularity", meta: Meta::new(c, Some(&tree.schedule)), table: t, payload }])
}

fn run_energy(c: &RunConfig) -> Result<Vec<Artifact>> {
    if !c.variant.has_progression() {
        return Err(Error::invalid("energy needs a progression variant (thm1 or thm1-second-part)"));
    }
    let r = c.energy_order()?;
    let tree = build(c, c.levels, c.levels)?;
    let s = &tree.schedule;
    let n = c.levels;
    let mut t = Table::new(&[
        "l",
        "N",
        "r",
        "points",
        "energy",
        "energy_lower",
        "sumset",
        "sumset_bound",
        "norm_exact",
        "energy_term",
        "norm_below",
        "q",
        "quadrature",
        "tail_bound",
    ]);
    for l in s.start_level + 1..n {
        let norm = salem_norm_exact(&tree, l, n, r)?;
        let inst = EnergyInstance::from_tree(&tree, l, n, r)?;
        if (inst.points.len() as f64).powi(2 * r as i32) <= ENUMERATION_LIMIT && additive_energy(&inst)? != norm.energy {
            return Err(Error::Invariant(format!("energy oracles disagree at l = {l}")));
        }
        let lower = energy_lower_bound(s, l, n, r)?;
        let zset = sumset_size(&inst.points, r)?;
        let zbound = sumset_bound(s, l, n, r)?;
        let energy = num_rational::BigRational::from_integer(norm.energy.clone().into());
        if lower > energy || num_bigint::BigUint::from(zset) > zbound || norm.energy_term > norm.value || norm.norm_below > norm.value {
            return Err(Error::Invariant(format!("lower-bound chain broken at l = {l}")));
        }
        let base = vec![
            cell(l),
            cell(n),
            cell(r),
            cell(norm.points),
            cell(&norm.energy),
            cell(to_f64(&lower)),
            cell(zset),
            cell(&zbound),
            cell(norm.value_f64()),
            cell(to_f64(&norm.energy_term)),
            cell(to_f64(&norm.norm_below)),
        ];
        if c.q.is_empty() {
            t.push([base.clone(), vec![String::new(), String::new(), String::new()]].concat());
        }
        for &q in &c.q {
            let quad = salem_norm_quadrature(&tree, l, n, q, 4.0 * tree.cells(n) as f64)?;
            t.push([base.clone(), vec![cell(q), cell(quad.value), cell(quad.tail_bound)]].concat());
        }
    }
    Ok(vec![Artifact { name: "energy", meta: Meta::new(c, Some(s)), table: t, payload: None }])
}

fn run_sharpness(c: &RunConfig) -> Result<Vec<Artifact>> {
    let s = c.schedule(c.levels + 1)?;
    let r = c.energy_order()?;
    let qs = if c.q.is_empty() { vec![q_critical(c.alpha, c.beta())? - 0.5] } else { c.q.clone() };
    let mut t = Table::new(&[
        "l",
        "q",
        "r",
        "massF",
        "energyLower",
        "norm2rLower",
        "quotientLower",
        "e(q)",
        "compensated",
    ]);
    let mut certs = vec![];
    for &q in &qs {
        for l in s.start_level + 1..=c.levels {
            let x = schedule_certificate(&s, l, q, r)?;
            t.push(vec![
                cell(x.l),
                cell(x.q),
                cell(x.r),
                x.mass_f.clone(),
                x.energy_lower.clone(),
                x.norm2r_lower.clone(),
                cell(x.quotient_lower_q),
                cell(x.growth_exponent),
                cell(x.compensated),
            ]);
            certs.push(x);
        }
    }
    let payload = Some(serde_json::to_value(&certs)?);
    Ok(vec![Artifact { name: "sharpness", meta: Meta::new(c, Some(&s)), table: t, payload }])
}

fn run_drift(c: &RunConfig) -> Result<Vec<Artifact>> {
    if !(0.0 < c.alpha && c.alpha < 1.0) || c.drift_len < 10 {
        return Err(Error::invalid("drift needs 0 < alpha < 1 and L >= 10"));
    }
    let mut t = Table::new(&["L", "log_product", "ratio"]);
    let mut len = 10u64;
    while len <= c.drift_len {
        let v = rounding_drift_demo(c.alpha, len);
        t.push(vec![cell(len), cell(v), cell(v / (len as f64).powf(1.0 - c.alpha))]);
        len = len.saturating_mul(10);
    }
    Ok(vec![Artifact { name: "drift", meta: Meta::new(c, None), table: t, payload: None }])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> RunConfig {
        RunConfig::try_parse_from(std::iter::once("salem").chain(args.split_whitespace())).unwrap()
    }

    #[test]
    fn flags_parse() {
        let c = parse("sharpness --variant thm1 --alpha 0.5 --beta 0.5 --phi log:1 --levels 10 --q 5.5,7 --r 4");
        assert_eq!(c.command, Command::Sharpness);
        assert_eq!(c.variant, Variant::Progression);
        assert_eq!(c.q, vec![5.5, 7.0]);
        assert_eq!(parse("drift --alpha 0.5 --L 1000").drift_len, 1000);
        assert!(RunConfig::try_parse_from(["salem", "bogus"]).is_err());
    }

    #[test]
    fn default_energy_order() {
        assert_eq!(parse("energy --variant thm1").energy_order().unwrap(), 4);
        assert_eq!(parse("energy --variant thm1-second-part --alpha 0.6 --beta 0.4").energy_order().unwrap(), 4);
    }

    #[test]
    fn drift_table_and_header() {
        let c = parse("drift --alpha 0.5 --L 1000");
        let a = execute(&c).unwrap();
        let text = a[0].render(Format::Csv).unwrap();
        assert!(text.contains("# config {\"command\":\"drift\""));
        assert_eq!(a[0].table.rows.len(), 3);
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        assert_eq!(main_with_args(["salem", "schedule", "--alpha", "1.5"]), 2);
        assert_eq!(main_with_args(["salem", "schedule", "--levels"]), 2);
    }
}
