//! Failure-count sweeps, per-trial records, histograms and quartile
//! summaries, all emitted as plain CSV.
//!
//! Seeds: trial `i` of a sweep uses `trial_seed = base_seed ^ i`. The
//! scheme is drawn from `derive_seed(trial_seed, 0)` and the failure set for
//! `f` failures from `derive_seed(trial_seed, 1 + f)`. The failure seed does
//! not depend on the scheme, so two sweeps that differ only in scheme see
//! identical random scenarios trial by trial.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::adversary::{
    adv_chain_attack, adv_ecl, adv_loop_forcer, adv_ran, attacked_flow, max_achievable_load,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, DEFAULT_SEED};
use crate::routing::{evaluate, FailoverScheme, LoadReport, PathVerdict, TrafficPattern};
use crate::schemes::{gen_dfs, gen_rfs, gen_rfs_allpairs, FailoverMatrix, FlowId, HopRule};
use crate::topology::{clique_link_count, FailureScenario, NodeId, ScenarioSource, Topology};

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($var:ident => $s:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($var),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$var),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$var => $s),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let l = s.trim().to_ascii_lowercase();
                $(
                    if l == $s.to_ascii_lowercase() $(|| l == $alias)* {
                        return Ok($name::$var);
                    }
                )+
                Err(Error::InvalidConfig(format!(
                    concat!("unknown ", stringify!($name), " '{}'"), s
                )))
            }
        }
    };
}

named_enum!(
    /// Scheme under test. `BalUniform` is the random-port reading of Bal.
    SchemeKind {
        Rfs => "RFS",
        Dfs => "DFS",
        Bal => "Bal",
        BalUniform => "BalUniform" | "bal-uniform",
        Rob => "Rob",
    }
);

named_enum!(AdversaryKind {
    Ran => "Ran",
    Ecl => "Ecl",
    PrefixAttack => "PrefixAttack" | "prefix",
    ChainAttack => "ChainAttack" | "chain",
    LoopForcer => "LoopForcer" | "loop-forcer",
});

named_enum!(PatternKind {
    SingleDest => "SingleDest" | "single",
    AllToAll => "AllToAll" | "all",
});

/// A sweep over failure counts. The destination of single-destination
/// traffic, and the target of every adversary, is node `n - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub scheme: SchemeKind,
    pub adversary: AdversaryKind,
    pub pattern: PatternKind,
    pub failure_grid: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn new(
        n: usize,
        scheme: SchemeKind,
        adversary: AdversaryKind,
        pattern: PatternKind,
        failure_grid: Vec<usize>,
    ) -> Self {
        ExperimentConfig {
            n,
            scheme,
            adversary,
            pattern,
            failure_grid,
            trials: 20,
            base_seed: DEFAULT_SEED,
        }
    }

    pub fn dst(&self) -> NodeId {
        NodeId(self.n - 1)
    }

    pub fn traffic(&self) -> TrafficPattern {
        match self.pattern {
            PatternKind::SingleDest => TrafficPattern::SingleDest(self.dst()),
            PatternKind::AllToAll => TrafficPattern::AllToAll,
        }
    }

    /// Checks everything that would otherwise fail mid-sweep.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 4 {
            return bad(format!("n={} is below the minimum of 4", self.n));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.failure_grid.is_empty() {
            return bad("failure_grid is empty".into());
        }
        if self.failure_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("failure_grid must be strictly ascending".into());
        }
        let max = *self.failure_grid.last().unwrap();
        let cap = match self.adversary {
            AdversaryKind::Ran => clique_link_count(self.n),
            AdversaryKind::Ecl => self.n - 2,
            AdversaryKind::ChainAttack => self.n - 1,
            AdversaryKind::PrefixAttack | AdversaryKind::LoopForcer => usize::MAX,
        };
        if max > cap {
            return bad(format!(
                "{} allows at most {cap} failures, grid asks for {max}",
                self.adversary
            ));
        }
        if self.scheme == SchemeKind::Dfs && self.pattern == PatternKind::AllToAll {
            return bad("DFS is defined for a single destination only".into());
        }
        if self.adversary == AdversaryKind::PrefixAttack {
            if !matches!(self.scheme, SchemeKind::Rfs | SchemeKind::Dfs) {
                return bad(format!(
                    "PrefixAttack needs a failover matrix, not {}",
                    self.scheme
                ));
            }
            if self.pattern != PatternKind::SingleDest {
                return bad("PrefixAttack needs SingleDest traffic".into());
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let grid: Vec<String> = self.failure_grid.iter().map(|f| f.to_string()).collect();
        format!(
            "n={}\nscheme={}\nadversary={}\npattern={}\nfailure_grid={}\ntrials={}\nbase_seed={}\n",
            self.n,
            self.scheme,
            self.adversary,
            self.pattern,
            grid.join(","),
            self.trials,
            self.base_seed
        )
    }

    /// Parses the `key=value` format written by [`ExperimentConfig::to_kv`].
    /// `trials` and `base_seed` are optional.
    pub fn from_kv(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        for key in kv.keys() {
            if ![
                "n",
                "scheme",
                "adversary",
                "pattern",
                "failure_grid",
                "trials",
                "base_seed",
            ]
            .contains(&key.as_str())
            {
                return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
            }
        }
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidConfig(format!("missing key '{k}'")))
        };
        let num = |k: &str, v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("{k}: '{v}' is not an integer")))
        };
        let failure_grid = get("failure_grid")?
            .split(',')
            .map(|f| num("failure_grid", f.trim()).map(|x| x as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = ExperimentConfig::new(
            num("n", get("n")?)? as usize,
            get("scheme")?.parse()?,
            get("adversary")?.parse()?,
            get("pattern")?.parse()?,
            failure_grid,
        );
        if let Some(t) = kv.get("trials") {
            cfg.trials = num("trials", t)? as usize;
        }
        if let Some(s) = kv.get("base_seed") {
            cfg.base_seed = num("base_seed", s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `key=value` lines. Text after `#` is a comment; blank lines are
/// skipped; repeated keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            crate::error::parse_err(i + 1, format!("expected key=value, got '{line}'"))
        })?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(crate::error::parse_err(
                i + 1,
                format!("repeated key '{k}'"),
            ));
        }
    }
    Ok(out)
}

/// One evaluated trial.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub scheme: SchemeKind,
    pub adversary: AdversaryKind,
    pub pattern: PatternKind,
    pub n: usize,
    pub num_failures: usize,
    pub trial: usize,
    pub seed: u64,
    pub flows: usize,
    pub max_load: u32,
    pub loops: usize,
    pub disconnected: usize,
    pub wall_time: Duration,
}

impl TrialRecord {
    pub const CSV_HEADER: &'static str =
        "scheme,adversary,pattern,n,num_failures,trial,seed,max_load,loops,disconnected";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scheme,
            self.adversary,
            self.pattern,
            self.n,
            self.num_failures,
            self.trial,
            self.seed,
            self.max_load,
            self.loops,
            self.disconnected
        )
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(TrialRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Scheme instance for one trial.
#[derive(Clone, Debug)]
pub enum BuiltScheme {
    Matrix(FailoverMatrix),
    Rule(HopRule),
}

impl BuiltScheme {
    pub fn as_scheme(&self) -> &dyn FailoverScheme {
        match self {
            BuiltScheme::Matrix(m) => m,
            BuiltScheme::Rule(r) => r,
        }
    }
}

pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    cfg.base_seed ^ trial as u64
}

pub fn build_scheme(cfg: &ExperimentConfig, trial: usize) -> Result<BuiltScheme> {
    let seed = derive_seed(trial_seed(cfg, trial), 0);
    Ok(match (cfg.scheme, cfg.pattern) {
        (SchemeKind::Rfs, PatternKind::SingleDest) => {
            BuiltScheme::Matrix(gen_rfs(cfg.n, cfg.dst(), seed)?)
        }
        (SchemeKind::Rfs, PatternKind::AllToAll) => {
            BuiltScheme::Matrix(gen_rfs_allpairs(cfg.n, seed)?)
        }
        (SchemeKind::Dfs, _) => BuiltScheme::Matrix(gen_dfs(cfg.n, cfg.dst())?),
        (SchemeKind::Bal, _) => BuiltScheme::Rule(HopRule::Bal),
        (SchemeKind::BalUniform, _) => BuiltScheme::Rule(HopRule::BalUniform { seed }),
        (SchemeKind::Rob, _) => BuiltScheme::Rule(HopRule::Rob),
    })
}

/// Draws (or constructs) the failure set of one trial.
pub fn build_scenario(
    cfg: &ExperimentConfig,
    scheme: &BuiltScheme,
    num_failures: usize,
    trial: usize,
) -> Result<FailureScenario> {
    let n = cfg.n;
    let dst = cfg.dst();
    let seed = derive_seed(trial_seed(cfg, trial), 1 + num_failures as u64);
    match cfg.adversary {
        AdversaryKind::Ran => adv_ran(n, num_failures, seed),
        AdversaryKind::Ecl => adv_ecl(n, num_failures, dst, seed),
        AdversaryKind::PrefixAttack => {
            let BuiltScheme::Matrix(m) = scheme else {
                return Err(Error::InvalidConfig(
                    "PrefixAttack needs a failover matrix".into(),
                ));
            };
            Ok(match max_achievable_load(m, dst, num_failures)?.1 {
                Some(plan) => plan.scenario,
                None => FailureScenario::new(n, ScenarioSource::PrefixAttack, m.seed()),
            })
        }
        AdversaryKind::ChainAttack if num_failures == 0 => {
            Ok(FailureScenario::new(n, ScenarioSource::ChainAttack, None))
        }
        AdversaryKind::ChainAttack => {
            Ok(adv_chain_attack(scheme.as_scheme(), n, dst, num_failures)?.scenario)
        }
        AdversaryKind::LoopForcer => {
            // The grid value caps how far into the adaptive sequence we go.
            let full = adv_loop_forcer(scheme.as_scheme(), n, dst)?.scenario;
            FailureScenario::from_links(
                n,
                full.links().iter().copied().take(num_failures),
                ScenarioSource::LoopForcer,
                None,
            )
        }
    }
}

/// Runs one trial and returns its record together with the full report.
pub fn run_trial(
    cfg: &ExperimentConfig,
    num_failures: usize,
    trial: usize,
) -> Result<(TrialRecord, LoadReport)> {
    let start = Instant::now();
    let scheme = build_scheme(cfg, trial)?;
    let scenario = build_scenario(cfg, &scheme, num_failures, trial)?;
    let t = Topology::clique(cfg.n)?.apply(&scenario)?;
    let report = evaluate(scheme.as_scheme(), &t, cfg.traffic())?;
    let record = TrialRecord {
        scheme: cfg.scheme,
        adversary: cfg.adversary,
        pattern: cfg.pattern,
        n: cfg.n,
        num_failures,
        trial,
        seed: trial_seed(cfg, trial),
        flows: report.flows,
        max_load: report.max_load,
        loops: report.loops,
        disconnected: report.disconnected,
        wall_time: start.elapsed(),
    };
    Ok((record, report))
}

/// Verdict of the adversary's target flow in one trial.
pub fn attacked_verdict(
    cfg: &ExperimentConfig,
    num_failures: usize,
    trial: usize,
) -> Result<PathVerdict> {
    let scheme = build_scheme(cfg, trial)?;
    let scenario = build_scenario(cfg, &scheme, num_failures, trial)?;
    let t = Topology::clique(cfg.n)?.apply(&scenario)?;
    let flow: FlowId = attacked_flow(cfg.dst());
    scheme.as_scheme().route(&t, flow)
}

/// Every `(failure count, trial)` of the grid, in that order. Trials run
/// in parallel on the current rayon pool.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .failure_grid
        .iter()
        .flat_map(|&f| (0..cfg.trials).map(move |t| (f, t)))
        .collect();
    let mut records = jobs
        .into_par_iter()
        .map(|(f, t)| run_trial(cfg, f, t).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.num_failures, r.trial));
    Ok(records)
}

/// Link counts per load bucket, covering every link of the clique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub bucket_width: u32,
    /// `counts[k]` links have load in `[k * width, (k + 1) * width)`.
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total_links(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(move |(k, &c)| (k as u32 * self.bucket_width, c))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("load,link_count\n");
        for (load, count) in self.rows() {
            out.push_str(&format!("{load},{count}\n"));
        }
        out
    }
}

pub fn load_histogram(report: &LoadReport, bucket_width: u32) -> Result<Histogram> {
    if bucket_width == 0 {
        return Err(Error::InvalidConfig(
            "bucket width must be at least 1".into(),
        ));
    }
    let mut counts = vec![0usize; (report.max_load / bucket_width) as usize + 1];
    for &l in report.link_loads() {
        counts[(l / bucket_width) as usize] += 1;
    }
    Ok(Histogram {
        bucket_width,
        counts,
    })
}

/// Quartile row for one `(scheme, adversary, n, failures)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scheme: SchemeKind,
    pub adversary: AdversaryKind,
    pub n: usize,
    pub num_failures: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Share of routed flows that looped.
    pub loop_rate: f64,
    /// Share of routed flows that were disconnected.
    pub disc_rate: f64,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str =
        "scheme,adversary,n,num_failures,min,q1,median,q3,max,loop_rate,disc_rate";

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quantile of sorted data with linear interpolation between order
/// statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[u32]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut groups: BTreeMap<_, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.scheme, r.adversary, r.n, r.num_failures))
            .or_default()
            .push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((scheme, adversary, n, num_failures), rs)| {
            let mut loads: Vec<f64> = rs.iter().map(|r| r.max_load as f64).collect();
            loads.sort_by(f64::total_cmp);
            let flows: usize = rs.iter().map(|r| r.flows).sum::<usize>().max(1);
            let rate = |x: usize| x as f64 / flows as f64;
            SummaryRow {
                scheme,
                adversary,
                n,
                num_failures,
                min: loads[0],
                q1: quantile(&loads, 0.25),
                median: quantile(&loads, 0.5),
                q3: quantile(&loads, 0.75),
                max: loads[loads.len() - 1],
                loop_rate: rate(rs.iter().map(|r| r.loops).sum()),
                disc_rate: rate(rs.iter().map(|r| r.disconnected).sum()),
            }
        })
        .collect())
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SummaryRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.adversary,
            r.n,
            r.num_failures,
            r.min,
            r.q1,
            r.median,
            r.q3,
            r.max,
            r.loop_rate,
            r.disc_rate
        ));
    }
    out
}
