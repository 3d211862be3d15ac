//! Monte-Carlo SNR sweeps over allocation modes, CSV output and the
//! configuration layer behind the `adc-sweep` binary.
//!
//! Every trial draws a fresh channel from a seed derived from the base seed
//! and the trial index, boosts its dominant singular value, keeps the top
//! `n_s` singular triplets and uses the ideal combiner. SNR enters as
//! `sigma_n^2 = 1 / rho` with `p = 1` split evenly over the streams.
//! Trials run in parallel; rows are always written ordered by SNR, mode and
//! trial, so a re-run with the same configuration gives the same bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use rayon::prelude::*;

use crate::allocator::{
    enumerate_bset, exhaustive_search_capacity, exhaustive_search_kf, greedy_allocate, CandidateEvaluator, FeasibleSet,
    OpCounter, PathProfile, PowerBudget, DEFAULT_BSET_CAP,
};
use crate::channel::{boost_dominant, generate_channel, truncated_svd, ChannelParams};
use crate::metrics::{capacity_infinite_uniform, capacity_infinite_waterfill};
use crate::quantizer::{BitAllocation, QuantGainTable};
use crate::receiver::{build_combiners, CombinerMode, PowerConvention, ReceiverFrontEnd, SignalConfig};
use crate::rng::derive_seed;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["snr_db", "mode", "trial", "capacity_bits", "kf_score", "alloc", "p_tot"];

/// Significant digits of every float in the CSV.
pub const CSV_DIGITS: usize = 12;

/// Relative slack for the mean-curve ordering check.
const ORDER_TOLERANCE: f64 = 1e-9;

const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepMode {
    All1,
    All2,
    /// Exhaustive search for maximum capacity.
    Es,
    /// Greedy `K_f` allocation.
    Proposed,
    /// Exhaustive search for maximum `K_f`.
    KfEs,
    InfUniform,
    InfWaterfill,
}

impl SweepMode {
    pub const ALL: [SweepMode; 7] = [
        SweepMode::All1,
        SweepMode::All2,
        SweepMode::Es,
        SweepMode::Proposed,
        SweepMode::KfEs,
        SweepMode::InfUniform,
        SweepMode::InfWaterfill,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::All1 => "all1",
            SweepMode::All2 => "all2",
            SweepMode::Es => "es",
            SweepMode::Proposed => "proposed",
            SweepMode::KfEs => "kf-es",
            SweepMode::InfUniform => "inf-uniform",
            SweepMode::InfWaterfill => "inf-waterfill",
        }
    }

    fn needs_feasible_set(self) -> bool {
        matches!(self, SweepMode::Es | SweepMode::KfEs)
    }

    fn is_quantized(self) -> bool {
        !matches!(self, SweepMode::InfUniform | SweepMode::InfWaterfill)
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// Parses a comma list such as `all1,es,proposed`.
pub fn parse_modes(s: &str) -> Result<Vec<SweepMode>> {
    let mut modes = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: SweepMode = part.parse()?;
        if modes.contains(&m) {
            return Err(Error::Config(format!("mode {m} listed twice")));
        }
        modes.push(m);
    }
    if modes.is_empty() {
        return Err(Error::Config("mode list is empty".into()));
    }
    Ok(modes)
}

/// How the ADC budget was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetRule {
    /// `p_adc` in watts.
    Absolute(f64),
    /// Power of the uniform allocation with this many bits.
    UniformBits(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Array sizes and cluster model. The `seed` field is ignored; each
    /// trial derives its own from [`SweepConfig::seed`].
    pub channel: ChannelParams,
    pub n_s: usize,
    pub snr_db_grid: Vec<f64>,
    pub trials: usize,
    pub modes: Vec<SweepMode>,
    pub budget: PowerBudget,
    pub budget_rule: BudgetRule,
    pub seed: u64,
    pub output_path: PathBuf,
    /// Largest feasible set the exhaustive modes will enumerate.
    pub bset_cap: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let n_s = 8;
        Self {
            channel: ChannelParams::default(),
            n_s,
            snr_db_grid: snr_grid(-20.0, 20.0, 5.0).expect("default grid"),
            trials: 50,
            modes: SweepMode::ALL.to_vec(),
            budget: PowerBudget::uniform(n_s, 2, 1.0, 1.0).expect("default budget"),
            budget_rule: BudgetRule::UniformBits(2),
            seed: 0,
            output_path: PathBuf::from("sweep.csv"),
            bset_cap: DEFAULT_BSET_CAP,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.n_s == 0 || self.n_s > self.channel.n_t.min(self.channel.n_r) {
            return Err(Error::Config(format!(
                "ns = {} must lie in 1..={}",
                self.n_s,
                self.channel.n_t.min(self.channel.n_r)
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("mode list is empty".into()));
        }
        if self.snr_db_grid.is_empty()
            || self.snr_db_grid.iter().any(|x| !x.is_finite())
            || self.snr_db_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "SNR grid must be finite, non-empty and strictly increasing".into(),
            ));
        }
        if self.bset_cap == 0 {
            return Err(Error::Config("bset-cap must be >= 1".into()));
        }
        Ok(())
    }

    /// Key/value lines accepted by [`parse_config_file`], reproducing this
    /// configuration.
    pub fn to_config_text(&self) -> String {
        let grid = &self.snr_db_grid;
        let step = if grid.len() > 1 { grid[1] - grid[0] } else { 1.0 };
        let modes: Vec<&str> = self.modes.iter().map(|m| m.as_str()).collect();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k}={v}\n"));
        kv("nt", self.channel.n_t.to_string());
        kv("nr", self.channel.n_r.to_string());
        kv("ns", self.n_s.to_string());
        kv("clusters", self.channel.n_clusters.to_string());
        kv("rays", self.channel.n_rays.to_string());
        kv("boost", format_sig(self.channel.boost, 17));
        kv("snr-start-db", format_sig(grid[0], 17));
        kv("snr-end-db", format_sig(grid[grid.len() - 1], 17));
        kv("snr-step-db", format_sig(step, 17));
        kv("trials", self.trials.to_string());
        kv("modes", modes.join(","));
        kv("c", format_sig(self.budget.c, 17));
        kv("fs", format_sig(self.budget.f_s, 17));
        match self.budget_rule {
            BudgetRule::Absolute(p) => kv("padc", format_sig(p, 17)),
            BudgetRule::UniformBits(b) => kv("padc-uniform-bits", b.to_string()),
        }
        kv("seed", self.seed.to_string());
        kv("bset-cap", self.bset_cap.to_string());
        out
    }
}

/// `start, start + step, ...` up to and including `end`.
pub fn snr_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) {
        return Err(Error::Config("SNR grid bounds must be finite".into()));
    }
    if end < start {
        return Err(Error::Config(format!("snr-end-db {end} is below snr-start-db {start}")));
    }
    if start == end {
        return Ok(vec![start]);
    }
    if step <= 0.0 {
        return Err(Error::Config("snr-step-db must be positive".into()));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    if n > MAX_GRID_POINTS {
        return Err(Error::Config(format!(
            "SNR grid has {n} points, limit is {MAX_GRID_POINTS}"
        )));
    }
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

/// Command-line flags. Every flag is optional; missing values come from the
/// `--config` file, then from the defaults.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "adc-sweep",
    version,
    about = "Capacity vs. SNR sweeps for variable-resolution ADC receivers"
)]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    /// Transmit antennas.
    #[arg(long)]
    pub nt: Option<usize>,
    /// Receive antennas.
    #[arg(long)]
    pub nr: Option<usize>,
    /// Streams, equal to the number of RF paths.
    #[arg(long)]
    pub ns: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub rays: Option<usize>,
    /// Factor applied to the dominant singular value.
    #[arg(long)]
    pub boost: Option<f64>,
    #[arg(long = "snr-start-db")]
    pub snr_start_db: Option<f64>,
    #[arg(long = "snr-end-db")]
    pub snr_end_db: Option<f64>,
    #[arg(long = "snr-step-db")]
    pub snr_step_db: Option<f64>,
    #[arg(long)]
    pub trials: Option<i64>,
    /// Comma list of all1, all2, es, proposed, kf-es, inf-uniform, inf-waterfill.
    #[arg(long)]
    pub modes: Option<String>,
    /// ADC energy per conversion step (J).
    #[arg(long)]
    pub c: Option<f64>,
    /// Sampling rate (Hz).
    #[arg(long)]
    pub fs: Option<f64>,
    /// ADC power budget in watts.
    #[arg(long)]
    pub padc: Option<f64>,
    /// Set the budget to the power of the uniform allocation with this many bits.
    #[arg(long = "padc-uniform-bits")]
    pub padc_uniform_bits: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key=value file using the flag names as keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refuse to enumerate feasible sets larger than this.
    #[arg(long = "bset-cap")]
    pub bset_cap: Option<usize>,
}

const CONFIG_KEYS: [&str; 18] = [
    "nt",
    "nr",
    "ns",
    "clusters",
    "rays",
    "boost",
    "snr-start-db",
    "snr-end-db",
    "snr-step-db",
    "trials",
    "modes",
    "c",
    "fs",
    "padc",
    "padc-uniform-bits",
    "seed",
    "out",
    "bset-cap",
];

/// Reads `key=value` lines. Blank lines and `#` comments are skipped;
/// unknown or repeated keys are errors.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        let (k, v) = (k.trim().trim_start_matches("--"), v.trim());
        if !CONFIG_KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key {k:?}", n + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: key {k:?} repeated", n + 1)));
        }
    }
    Ok(map)
}

fn from_file<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("{key}={v}: {e}"))))
        .transpose()
}

fn pick<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: fmt::Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(from_file(file, key)?.unwrap_or(default)),
    }
}

fn budget_rule(padc: Option<f64>, bits: Option<u8>, source: &str) -> Result<Option<BudgetRule>> {
    match (padc, bits) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "padc and padc-uniform-bits are both set {source}"
        ))),
        (Some(p), None) => Ok(Some(BudgetRule::Absolute(p))),
        (None, Some(b)) => Ok(Some(BudgetRule::UniformBits(b))),
        (None, None) => Ok(None),
    }
}

impl SweepConfig {
    /// Resolves flags over the optional config file over the defaults.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        Self::resolve(cli, &file)
    }

    pub fn resolve(cli: &Cli, file: &BTreeMap<String, String>) -> Result<Self> {
        let d = SweepConfig::default();
        let channel = ChannelParams {
            n_t: pick(cli.nt, file, "nt", d.channel.n_t)?,
            n_r: pick(cli.nr, file, "nr", d.channel.n_r)?,
            n_clusters: pick(cli.clusters, file, "clusters", d.channel.n_clusters)?,
            n_rays: pick(cli.rays, file, "rays", d.channel.n_rays)?,
            boost: pick(cli.boost, file, "boost", d.channel.boost)?,
            seed: 0,
        };
        let n_s = pick(cli.ns, file, "ns", d.n_s)?;
        let grid = snr_grid(
            pick(cli.snr_start_db, file, "snr-start-db", -20.0)?,
            pick(cli.snr_end_db, file, "snr-end-db", 20.0)?,
            pick(cli.snr_step_db, file, "snr-step-db", 5.0)?,
        )?;
        let trials: i64 = pick(cli.trials, file, "trials", d.trials as i64)?;
        if trials < 1 {
            return Err(Error::Config(format!("trials must be >= 1, got {trials}")));
        }
        let modes = match &cli.modes {
            Some(s) => parse_modes(s)?,
            None => match file.get("modes") {
                Some(s) => parse_modes(s)?,
                None => d.modes,
            },
        };
        let c = pick(cli.c, file, "c", 1.0)?;
        let f_s = pick(cli.fs, file, "fs", 1.0)?;
        let rule = match budget_rule(cli.padc, cli.padc_uniform_bits, "on the command line")? {
            Some(r) => r,
            None => budget_rule(
                from_file(file, "padc")?,
                from_file(file, "padc-uniform-bits")?,
                "in the config file",
            )?
            .unwrap_or(d.budget_rule),
        };
        let budget = match rule {
            BudgetRule::Absolute(p) => PowerBudget::new(c, f_s, p)?,
            BudgetRule::UniformBits(b) => PowerBudget::uniform(n_s, b, c, f_s)?,
        };
        let cfg = SweepConfig {
            channel,
            n_s,
            snr_db_grid: grid,
            trials: trials as usize,
            modes,
            budget,
            budget_rule: rule,
            seed: pick(cli.seed, file, "seed", d.seed)?,
            output_path: match &cli.out {
                Some(p) => p.clone(),
                None => file.get("out").map(PathBuf::from).unwrap_or(d.output_path),
            },
            bset_cap: pick(cli.bset_cap, file, "bset-cap", d.bset_cap)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mode: SweepMode,
    pub trial: usize,
    pub capacity_bits: f64,
    pub kf_score: f64,
    /// `None` for the infinite-resolution modes.
    pub alloc: Option<BitAllocation>,
    pub p_tot: Option<f64>,
}

impl SweepRow {
    pub fn csv_fields(&self) -> [String; 7] {
        [
            format_sig(self.snr_db, CSV_DIGITS),
            self.mode.to_string(),
            self.trial.to_string(),
            format_sig(self.capacity_bits, CSV_DIGITS),
            format_sig(self.kf_score, CSV_DIGITS),
            self.alloc.as_ref().map_or_else(|| "inf".to_string(), |b| b.to_string()),
            self.p_tot
                .map_or_else(|| "inf".to_string(), |p| format_sig(p, CSV_DIGITS)),
        ]
    }
}

/// `%.{digits}g`-style formatting: `digits` significant digits, trailing
/// zeros removed, exponent form outside `1e-4 <= |x| < 10^digits`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{exp}", trim_fraction(mantissa))
    } else {
        trim_fraction(&format!("{:.*}", (digits as i32 - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Mode list, budget and feasible set shared by every trial.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub modes: Vec<SweepMode>,
    pub n_s: usize,
    pub budget: PowerBudget,
    pub table: QuantGainTable,
    /// `None` when no exhaustive mode is requested or the set exceeds the
    /// cap; the exhaustive modes then fall back to the greedy allocation.
    pub bset: Option<FeasibleSet>,
    pub es_fallback: bool,
}

/// Rows of one (trial, SNR) point, in plan mode order, with the search cost
/// spent on each mode.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub rows: Vec<SweepRow>,
    pub ops: Vec<OpCounter>,
}

impl SweepPlan {
    pub fn new(modes: &[SweepMode], n_s: usize, budget: PowerBudget, bset_cap: usize) -> Result<Self> {
        if modes
            .iter()
            .any(|m| m.is_quantized() && !matches!(m, SweepMode::All1 | SweepMode::All2))
            && !budget.admits(&BitAllocation::uniform(n_s, 1)?)
        {
            return Err(Error::Infeasible);
        }
        let mut es_fallback = false;
        let bset = if modes.iter().any(|m| m.needs_feasible_set()) {
            match enumerate_bset(n_s, &budget, bset_cap) {
                Ok(set) => Some(set),
                Err(Error::FeasibleSetTooLarge { cap }) => {
                    log::warn!(
                        "feasible set exceeds {cap} allocations; exhaustive modes use the greedy K_f allocation"
                    );
                    es_fallback = true;
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(Self {
            modes: modes.to_vec(),
            n_s,
            budget,
            table: QuantGainTable::default(),
            bset,
            es_fallback,
        })
    }

    /// Evaluates every mode for one set of singular values `sigma` and path
    /// gains `l` at `snr_db`.
    pub fn evaluate_point(&self, sigma: &[f64], l: &[f64], snr_db: f64, trial: usize) -> Result<PointResult> {
        if sigma.len() != self.n_s {
            return Err(Error::DimensionMismatch(format!(
                "{} singular values for n_s = {}",
                sigma.len(),
                self.n_s
            )));
        }
        let sig = SignalConfig::from_snr_db(snr_db, PowerConvention::SplitTotal)?;
        let profile = PathProfile::new(
            sigma,
            l,
            sig.stream_power(self.n_s),
            sig.sigma_n_sq,
            sig.convention,
            &self.table,
        )?;
        let mut rows = Vec::with_capacity(self.modes.len());
        let mut ops = Vec::with_capacity(self.modes.len());
        for &mode in &self.modes {
            let mut spent = OpCounter::default();
            let (capacity, kf, alloc) = match mode {
                SweepMode::All1 | SweepMode::All2 => {
                    let bits = if mode == SweepMode::All1 { 1 } else { 2 };
                    let b = BitAllocation::uniform(self.n_s, bits)?;
                    let mut scratch = OpCounter::default();
                    (
                        profile.capacity(&b, &mut scratch)?,
                        profile.k_f(&b, &mut scratch)?,
                        Some(b),
                    )
                }
                SweepMode::Es | SweepMode::KfEs | SweepMode::Proposed => {
                    let b = match (&self.bset, mode) {
                        (Some(set), SweepMode::Es) => {
                            let (b, _, o) = exhaustive_search_capacity(&profile, set)?;
                            spent = o;
                            b
                        }
                        (Some(set), SweepMode::KfEs) => {
                            let (b, _, o) = exhaustive_search_kf(&profile, set)?;
                            spent = o;
                            b
                        }
                        _ => {
                            let (b, o) = greedy_allocate(&profile, &self.budget)?;
                            spent = o;
                            b
                        }
                    };
                    let report = profile.report(&b)?;
                    (report.capacity_bits, report.k_f_score, Some(b))
                }
                SweepMode::InfUniform => (
                    capacity_infinite_uniform(sigma, sig.rho()),
                    profile.k_f_unquantized(),
                    None,
                ),
                SweepMode::InfWaterfill => {
                    let wf = capacity_infinite_waterfill(sigma, sig.rho())?;
                    let kf = sigma
                        .iter()
                        .zip(&wf.epsilon)
                        .map(|(s, e)| e * profile.p * s * s / sig.sigma_n_sq)
                        .sum();
                    (wf.capacity, kf, None)
                }
            };
            if !(capacity.is_finite() && capacity >= 0.0) {
                return Err(Error::NonFinite("sweep capacity"));
            }
            let p_tot = alloc.as_ref().map(|b| self.budget.p_tot(b));
            rows.push(SweepRow {
                snr_db,
                mode,
                trial,
                capacity_bits: capacity,
                kf_score: kf,
                alloc,
                p_tot,
            });
            ops.push(spent);
        }
        Ok(PointResult { rows, ops })
    }
}

/// Singular values and path gains of one trial's channel.
pub fn trial_profile(cfg: &SweepConfig, trial: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let params = ChannelParams {
        seed: derive_seed(cfg.seed, trial as u64),
        ..cfg.channel.clone()
    };
    let ch = boost_dominant(&generate_channel(&params)?, params.boost)?;
    let svd = truncated_svd(&ch, cfg.n_s)?;
    let comb = build_combiners(&svd, CombinerMode::Ideal)?;
    let fe = ReceiverFrontEnd::new(svd, comb, &ch)?;
    Ok((fe.svd.sigma.as_slice().to_vec(), fe.path_gains().as_slice().to_vec()))
}

#[derive(Debug, Clone)]
pub struct SweepResults {
    /// Ordered by SNR, then mode (config order), then trial.
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Runs the sweep in memory.
pub fn compute_sweep(cfg: &SweepConfig) -> Result<SweepResults> {
    cfg.validate()?;
    let plan = SweepPlan::new(&cfg.modes, cfg.n_s, cfg.budget, cfg.bset_cap)?;
    let per_trial: Vec<Vec<PointResult>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (sigma, l) = trial_profile(cfg, t)?;
            cfg.snr_db_grid
                .iter()
                .map(|&snr| plan.evaluate_point(&sigma, &l, snr, t))
                .collect()
        })
        .collect::<Result<_>>()?;

    let n_modes = cfg.modes.len();
    let mut rows = Vec::with_capacity(cfg.snr_db_grid.len() * n_modes * cfg.trials);
    let mut ops = vec![OpCounter::default(); n_modes];
    for s in 0..cfg.snr_db_grid.len() {
        for (m, total) in ops.iter_mut().enumerate() {
            for trial in &per_trial {
                rows.push(trial[s].rows[m].clone());
                *total += trial[s].ops[m];
            }
        }
    }
    let summary = SweepSummary::from_rows(cfg, &plan, &rows, ops);
    Ok(SweepResults { rows, summary })
}

/// CSV text with header.
pub fn rows_to_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| Error::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e),
    };
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for r in rows {
        w.write_record(r.csv_fields()).map_err(to_io)?;
    }
    w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("<csv>"),
        source: e.into_error(),
    })
}

/// Path of the metadata file written next to the CSV.
pub fn metadata_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// The configuration as a re-loadable config file, with the derived values
/// as comments.
pub fn metadata_text(cfg: &SweepConfig, summary: &SweepSummary) -> String {
    let mut out = String::from("# adc-sweep run metadata; loadable with --config\n");
    out.push_str("# signal: p = 1, sigma_n^2 = 1/rho, per-stream power p/n_s (split-total)\n");
    out.push_str("# combiner: ideal; path gain l_i = 1 + |[W_A^H H]_i|^2; curves are ensemble means\n");
    out.push_str(&format!("# p_adc_watts = {}\n", format_sig(cfg.budget.p_adc, 17)));
    match summary.bset_size {
        Some(n) => out.push_str(&format!("# feasible_set_size = {n}\n")),
        None if summary.es_fallback => out.push_str("# feasible_set_size = over cap, exhaustive modes use greedy\n"),
        None => {}
    }
    out.push_str(&cfg.to_config_text());
    out
}

/// Runs the sweep, writes the CSV and its metadata file and returns the
/// summary.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepSummary> {
    let results = compute_sweep(cfg)?;
    let csv = rows_to_csv(&results.rows)?;
    write_file(&cfg.output_path, &csv)?;
    write_file(
        &metadata_path(&cfg.output_path),
        metadata_text(cfg, &results.summary).as_bytes(),
    )?;
    Ok(results.summary)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub n_t: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub trials: usize,
    pub seed: u64,
    pub p_adc: f64,
    pub snr_db: Vec<f64>,
    pub modes: Vec<SweepMode>,
    /// `mean_capacity[snr][mode]`.
    pub mean_capacity: Vec<Vec<f64>>,
    /// Per SNR, the first violated link of
    /// `all1 <= all2 <= max(es, proposed) <= inf-uniform <= inf-waterfill`.
    pub ordering_violations: Vec<Option<String>>,
    /// Mean over trials of `(C_es - C_mode) / C_es` for `proposed` and
    /// `kf-es`, per SNR.
    pub gaps_vs_es: Vec<(SweepMode, Vec<f64>)>,
    /// Search cost summed over every (trial, SNR) point, per mode.
    pub ops_total: Vec<OpCounter>,
    pub points: usize,
    pub bset_size: Option<usize>,
    pub es_fallback: bool,
}

impl SweepSummary {
    fn from_rows(cfg: &SweepConfig, plan: &SweepPlan, rows: &[SweepRow], ops_total: Vec<OpCounter>) -> Self {
        let (n_snr, n_modes, t) = (cfg.snr_db_grid.len(), cfg.modes.len(), cfg.trials);
        let at = |s: usize, m: usize| &rows[(s * n_modes + m) * t..(s * n_modes + m + 1) * t];
        let mean_capacity: Vec<Vec<f64>> = (0..n_snr)
            .map(|s| {
                (0..n_modes)
                    .map(|m| at(s, m).iter().map(|r| r.capacity_bits).sum::<f64>() / t as f64)
                    .collect()
            })
            .collect();
        let idx = |mode: SweepMode| cfg.modes.iter().position(|&m| m == mode);
        let ordering_violations = mean_capacity
            .iter()
            .map(|means| ordering_violation(&cfg.modes, means))
            .collect();
        let mut gaps_vs_es = Vec::new();
        if let Some(es) = idx(SweepMode::Es) {
            for other in [SweepMode::Proposed, SweepMode::KfEs] {
                if let Some(o) = idx(other) {
                    let gaps = (0..n_snr)
                        .map(|s| {
                            at(s, es)
                                .iter()
                                .zip(at(s, o))
                                .map(|(a, b)| relative_gap(a.capacity_bits, b.capacity_bits))
                                .sum::<f64>()
                                / t as f64
                        })
                        .collect();
                    gaps_vs_es.push((other, gaps));
                }
            }
        }
        Self {
            n_t: cfg.channel.n_t,
            n_r: cfg.channel.n_r,
            n_s: cfg.n_s,
            trials: t,
            seed: cfg.seed,
            p_adc: cfg.budget.p_adc,
            snr_db: cfg.snr_db_grid.clone(),
            modes: cfg.modes.clone(),
            mean_capacity,
            ordering_violations,
            gaps_vs_es,
            ops_total,
            points: n_snr * t,
            bset_size: plan.bset.as_ref().map(FeasibleSet::len),
            es_fallback: plan.es_fallback,
        }
    }

    pub fn ordering_holds(&self) -> bool {
        self.ordering_violations.iter().all(Option::is_none)
    }

    pub fn mean(&self, snr_index: usize, mode: SweepMode) -> Option<f64> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .map(|m| self.mean_capacity[snr_index][m])
    }

    /// Greedy over capacity-ES multiplication count, when both ran.
    pub fn greedy_to_es_mults(&self) -> Option<f64> {
        let m = |mode| {
            self.modes
                .iter()
                .position(|&x| x == mode)
                .map(|i| self.ops_total[i].mults)
        };
        match (m(SweepMode::Proposed), m(SweepMode::Es)) {
            (Some(g), Some(e)) if e > 0 && !self.es_fallback => Some(g as f64 / e as f64),
            _ => None,
        }
    }
}

/// `(reference - value) / reference`, zero when both vanish.
pub fn relative_gap(reference: f64, value: f64) -> f64 {
    if reference == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (reference - value) / reference
    }
}

fn ordering_violation(modes: &[SweepMode], means: &[f64]) -> Option<String> {
    let get = |mode| {
        modes
            .iter()
            .position(|&m| m == mode)
            .map(|i| (mode.as_str().to_string(), means[i]))
    };
    let best = match (get(SweepMode::Es), get(SweepMode::Proposed)) {
        (Some(a), Some(b)) => Some(if b.1 > a.1 { b } else { a }),
        (a, b) => a.or(b),
    };
    let chain: Vec<(String, f64)> = [
        get(SweepMode::All1),
        get(SweepMode::All2),
        best,
        get(SweepMode::InfUniform),
        get(SweepMode::InfWaterfill),
    ]
    .into_iter()
    .flatten()
    .collect();
    chain.windows(2).find_map(|w| {
        let ((na, a), (nb, b)) = (&w[0], &w[1]);
        (*a > *b + ORDER_TOLERANCE * a.abs().max(1.0))
            .then(|| format!("{na} = {} > {nb} = {}", format_sig(*a, 6), format_sig(*b, 6)))
    })
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "n_t = {}, n_r = {}, n_s = {}, {} trials, seed {}, P_ADC = {} W",
            self.n_t,
            self.n_r,
            self.n_s,
            self.trials,
            self.seed,
            format_sig(self.p_adc, 6)
        )?;
        match self.bset_size {
            Some(n) => writeln!(f, "feasible allocations: {n}")?,
            None if self.es_fallback => writeln!(f, "feasible set over the cap: es and kf-es fall back to greedy")?,
            None => {}
        }
        writeln!(f, "\nmean capacity (bits/s/Hz)")?;
        write!(f, "{:>8}", "snr_db")?;
        for m in &self.modes {
            write!(f, " {:>13}", m.as_str())?;
        }
        writeln!(f)?;
        for (s, snr) in self.snr_db.iter().enumerate() {
            write!(f, "{:>8}", format_sig(*snr, 6))?;
            for v in &self.mean_capacity[s] {
                write!(f, " {v:>13.4}")?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        if self.ordering_holds() {
            writeln!(
                f,
                "ordering all1 <= all2 <= max(es, proposed) <= inf: holds at every SNR"
            )?;
        } else {
            for (snr, v) in self.snr_db.iter().zip(&self.ordering_violations) {
                if let Some(v) = v {
                    writeln!(f, "ordering violated at {} dB: {v}", format_sig(*snr, 6))?;
                }
            }
        }
        for (mode, gaps) in &self.gaps_vs_es {
            let worst = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            writeln!(
                f,
                "\nmean relative capacity gap es vs {mode} (worst {:.2}%)",
                100.0 * worst
            )?;
            for (snr, g) in self.snr_db.iter().zip(gaps) {
                writeln!(f, "{:>8} {:>9.3}%", format_sig(*snr, 6), 100.0 * g)?;
            }
        }
        let searches: Vec<_> = self
            .modes
            .iter()
            .zip(&self.ops_total)
            .filter(|(m, _)| matches!(m, SweepMode::Es | SweepMode::KfEs | SweepMode::Proposed))
            .collect();
        if !searches.is_empty() {
            writeln!(
                f,
                "\nobjective-evaluation arithmetic per search (mean over {} points)",
                self.points
            )?;
            for (m, o) in searches {
                let per = |x: u64| x as f64 / self.points as f64;
                writeln!(
                    f,
                    "{:>10}  mults {:>12.1}  adds {:>8.1}  real adds {:>12.1}",
                    m.as_str(),
                    per(o.mults),
                    per(o.adds),
                    per(o.real_adds)
                )?;
            }
            if let Some(r) = self.greedy_to_es_mults() {
                writeln!(f, "proposed / es multiplications: {:.4}%", 100.0 * r)?;
            }
        }
        Ok(())
    }
}
