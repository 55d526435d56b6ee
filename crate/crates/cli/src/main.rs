//! `ffsim`: generate failover schemes, run adversaries, evaluate loads,
//! sweep experiments and check invariants.
//!
//! Exit status: 0 on success, 1 when a checked invariant is violated, 2 on
//! usage or input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ffsim_core::adversary::{
    adv_chain_attack, adv_ecl, adv_loop_forcer, adv_pigeonhole_allpairs, adv_prefix_attack,
    adv_ran, brute_force_worst_case, BruteForceOptions,
};
use ffsim_core::experiments::{
    records_to_csv, run_sweep, summarize, summary_to_csv, ExperimentConfig,
};
use ffsim_core::rng::{derive_seed, DEFAULT_SEED, GENERATOR};
use ffsim_core::schemes::{gen_dfs, gen_rfs, gen_rfs_allpairs, gen_rfs_verified, DfsStructure};
use ffsim_core::topology::clique_link_count;
use ffsim_core::{
    evaluate, FailoverMatrix, FailoverScheme, FailureScenario, HopRule, NodeId, Topology,
    TrafficPattern,
};

#[derive(Parser, Debug)]
#[command(
    name = "ffsim",
    version,
    about = "Local fast-failover routing laboratory"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a failover matrix
    GenScheme(GenScheme),
    /// Build a failure scenario with an adversary
    Attack(Attack),
    /// Route a traffic pattern under a failure scenario and print link loads
    Evaluate(Evaluate),
    /// Run an experiment sweep from a key=value config file
    Sweep(Sweep),
    /// Check an invariant suite; exits 1 on a violation
    Verify(Verify),
    /// Print the exact edge connectivity of the clique after failures
    Mincut(Mincut),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Rfs,
    Dfs,
    RfsAllpairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Bal,
    BalUniform,
    Rob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlanArg {
    Ran,
    Ecl,
    LoopForcer,
    Prefix,
    Chain,
    Pigeonhole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PatternArg {
    Single,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    DfsStructure,
    RfsLoopfree,
    Theorems,
}

#[derive(clap::Args, Debug)]
struct GenScheme {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    n: usize,
    /// Destination (default n-1)
    #[arg(long)]
    dst: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Redraw RFS until the prefix attacker loads no node beyond L with L^2 failures
    #[arg(long, value_name = "L")]
    verify_threshold: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    redraw_cap: usize,
    /// Output file (default stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A scheme given either as a matrix file or as a per-hop rule.
#[derive(clap::Args, Debug)]
struct SchemeSource {
    /// Failover matrix file
    #[arg(long, conflicts_with = "rule")]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Seed for bal-uniform
    #[arg(long, requires = "rule")]
    rule_seed: Option<u64>,
}

#[derive(clap::Args, Debug)]
struct Attack {
    #[arg(long, value_enum)]
    plan: PlanArg,
    #[arg(long)]
    n: Option<usize>,
    /// Failure budget (ran, ecl, chain, pigeonhole)
    #[arg(long)]
    phi: Option<usize>,
    /// Flows to concentrate on one node (prefix)
    #[arg(long)]
    target_load: Option<usize>,
    #[arg(long)]
    dst: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    scheme: SchemeSource,
    /// Scenario output file (default stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Attack plan report file (default: diagnostic stream)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct Evaluate {
    #[command(flatten)]
    scheme: SchemeSource,
    /// Failure scenario file
    #[arg(long)]
    failures: PathBuf,
    #[arg(long, value_enum, default_value = "single")]
    pattern: PatternArg,
    #[arg(long)]
    dst: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct Sweep {
    #[arg(long)]
    config: PathBuf,
    /// Trial CSV output (default stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Quartile summary CSV
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct Verify {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Fuzz trials for rfs-loopfree
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(clap::Args, Debug)]
struct Mincut {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    failures: Option<PathBuf>,
}

enum Status {
    Ok,
    Violation,
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_matrix(p: &Path) -> Result<FailoverMatrix> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    FailoverMatrix::from_text(&text).with_context(|| format!("parsing matrix {}", p.display()))
}

fn read_scenario(p: &Path) -> Result<FailureScenario> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    FailureScenario::from_text(&text).with_context(|| format!("parsing scenario {}", p.display()))
}

fn echo(line: String) {
    eprintln!("# ffsim {line}");
}

fn opt<T: std::fmt::Display>(name: &str, v: Option<T>) -> String {
    v.map(|v| format!(" --{name} {v}")).unwrap_or_default()
}

fn path_opt(name: &str, v: &Option<PathBuf>) -> String {
    opt(name, v.as_ref().map(|p| p.display()))
}

fn rule_name(r: RuleArg) -> &'static str {
    match r {
        RuleArg::Bal => "bal",
        RuleArg::BalUniform => "bal-uniform",
        RuleArg::Rob => "rob",
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

/// Loaded scheme plus the echo fragment that reproduces it.
struct LoadedScheme {
    scheme: Box<dyn FailoverScheme>,
    matrix: Option<FailoverMatrix>,
    echo: String,
}

impl SchemeSource {
    fn load(&self) -> Result<Option<LoadedScheme>> {
        if let Some(p) = &self.matrix {
            let m = read_matrix(p)?;
            return Ok(Some(LoadedScheme {
                scheme: Box::new(m.clone()),
                matrix: Some(m),
                echo: format!(" --matrix {}", p.display()),
            }));
        }
        let Some(r) = self.rule else { return Ok(None) };
        let (rule, seed) = match r {
            RuleArg::Bal => (HopRule::Bal, None),
            RuleArg::Rob => (HopRule::Rob, None),
            RuleArg::BalUniform => {
                let seed = self.rule_seed.unwrap_or(DEFAULT_SEED);
                (HopRule::BalUniform { seed }, Some(seed))
            }
        };
        Ok(Some(LoadedScheme {
            scheme: Box::new(rule),
            matrix: None,
            echo: format!(" --rule {}{}", rule_name(r), opt("rule-seed", seed)),
        }))
    }
}

fn gen_scheme(a: &GenScheme) -> Result<Status> {
    if a.n < 3 {
        bail!("--n must be at least 3");
    }
    let dst = a.dst.unwrap_or(a.n - 1);
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let randomized = a.scheme != SchemeArg::Dfs;
    let m = match (a.scheme, a.verify_threshold) {
        (SchemeArg::Rfs, None) => gen_rfs(a.n, NodeId(dst), seed)?,
        (SchemeArg::Rfs, Some(l)) => {
            let v = gen_rfs_verified(a.n, NodeId(dst), seed, l, a.redraw_cap)?;
            eprintln!(
                "# verified after {} redraws, greedy load {}",
                v.redraws, v.max_load
            );
            v.matrix
        }
        (SchemeArg::Dfs, None) => gen_dfs(a.n, NodeId(dst))?,
        (SchemeArg::RfsAllpairs, None) => gen_rfs_allpairs(a.n, seed)?,
        (_, Some(_)) => bail!("--verify-threshold applies to --scheme rfs only"),
    };
    echo(format!(
        "gen-scheme --scheme {} --n {}{}{}{}{}",
        value_name(a.scheme),
        a.n,
        if a.scheme == SchemeArg::RfsAllpairs {
            String::new()
        } else {
            format!(" --dst {dst}")
        },
        if randomized {
            format!(" --seed {seed}")
        } else {
            String::new()
        },
        a.verify_threshold
            .map(|l| format!(" --verify-threshold {l} --redraw-cap {}", a.redraw_cap))
            .unwrap_or_default(),
        path_opt("output", &a.output),
    ));
    write_out(a.output.as_deref(), &m.to_text())?;
    Ok(Status::Ok)
}

fn attack(a: &Attack) -> Result<Status> {
    let loaded = a.scheme.load()?;
    let n = match (&loaded, a.n) {
        (
            Some(LoadedScheme {
                matrix: Some(m), ..
            }),
            Some(n),
        ) if m.n() != n => {
            bail!("--n {n} disagrees with the matrix size {}", m.n())
        }
        (
            Some(LoadedScheme {
                matrix: Some(m), ..
            }),
            _,
        ) => m.n(),
        (_, Some(n)) => n,
        (_, None) => bail!("--n is required unless a matrix is given"),
    };
    if n < 3 {
        bail!("--n must be at least 3");
    }
    let dst = NodeId(a.dst.unwrap_or(n - 1));
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let need_phi = || {
        a.phi
            .ok_or_else(|| anyhow!("--phi is required for this plan"))
    };
    let need_scheme = || {
        loaded
            .as_ref()
            .ok_or_else(|| anyhow!("this plan needs --matrix or --rule"))
    };
    let need_matrix = || {
        loaded
            .as_ref()
            .and_then(|l| l.matrix.as_ref())
            .ok_or_else(|| anyhow!("this plan needs --matrix"))
    };

    let mut report = None;
    let echo_tail;
    let scenario = match a.plan {
        PlanArg::Ran => {
            echo_tail = format!(" --phi {} --seed {seed}", need_phi()?);
            adv_ran(n, need_phi()?, seed)?
        }
        PlanArg::Ecl => {
            echo_tail = format!(" --phi {} --dst {dst} --seed {seed}", need_phi()?);
            adv_ecl(n, need_phi()?, dst, seed)?
        }
        PlanArg::LoopForcer => {
            let s = need_scheme()?;
            echo_tail = format!(" --dst {dst}{}", s.echo);
            let out = adv_loop_forcer(s.scheme.as_ref(), n, dst)?;
            report = Some(format!(
                "flow={}\nlengthening_failures={}\nisolated_hop={}\nverdict={:?}\nfailures={}\n",
                out.verdict.flow,
                out.lengthening_failures,
                out.isolated_hop
                    .map_or("none".to_string(), |h| h.to_string()),
                out.verdict.status,
                out.scenario.len()
            ));
            out.scenario
        }
        PlanArg::Chain => {
            let s = need_scheme()?;
            echo_tail = format!(" --phi {} --dst {dst}{}", need_phi()?, s.echo);
            let out = adv_chain_attack(s.scheme.as_ref(), n, dst, need_phi()?)?;
            report = Some(format!(
                "flow={}\ncompleted={}\nfinal_link={}\nverdict={:?}\nfailures={}\n",
                out.verdict.flow,
                out.completed,
                out.final_link()
                    .map_or("none".to_string(), |l| l.to_string()),
                out.verdict.status,
                out.scenario.len()
            ));
            out.scenario
        }
        PlanArg::Prefix => {
            let m = need_matrix()?;
            let l = a
                .target_load
                .ok_or_else(|| anyhow!("--target-load is required for prefix"))?;
            echo_tail = format!(
                " --target-load {l} --dst {dst}{}",
                loaded.as_ref().unwrap().echo
            );
            let plan = adv_prefix_attack(m, dst, l)?;
            report = Some(plan.to_report());
            plan.scenario
        }
        PlanArg::Pigeonhole => {
            let m = need_matrix()?;
            echo_tail = format!(" --phi {}{}", need_phi()?, loaded.as_ref().unwrap().echo);
            let plan = adv_pigeonhole_allpairs(m, need_phi()?)?;
            report = Some(plan.to_report());
            plan.scenario
        }
    };
    echo(format!(
        "attack --plan {} --n {n}{echo_tail}{}{}",
        value_name(a.plan),
        path_opt("output", &a.output),
        path_opt("report", &a.report),
    ));
    write_out(a.output.as_deref(), &scenario.to_text())?;
    if let Some(r) = report {
        match &a.report {
            Some(p) => fs::write(p, r).with_context(|| format!("writing {}", p.display()))?,
            None => eprint!("{r}"),
        }
    }
    Ok(Status::Ok)
}

fn evaluate_cmd(a: &Evaluate) -> Result<Status> {
    let loaded = a
        .scheme
        .load()?
        .ok_or_else(|| anyhow!("--matrix or --rule is required"))?;
    let scenario = read_scenario(&a.failures)?;
    let n = scenario.n();
    let pattern = match a.pattern {
        PatternArg::Single => TrafficPattern::SingleDest(NodeId(a.dst.unwrap_or(n - 1))),
        PatternArg::All => TrafficPattern::AllToAll,
    };
    echo(format!(
        "evaluate{} --failures {} --pattern {}{}{}",
        loaded.echo,
        a.failures.display(),
        value_name(a.pattern),
        match pattern {
            TrafficPattern::SingleDest(d) => format!(" --dst {d}"),
            TrafficPattern::AllToAll => String::new(),
        },
        path_opt("output", &a.output),
    ));
    let t = Topology::clique(n)?.apply(&scenario)?;
    let report = evaluate(loaded.scheme.as_ref(), &t, pattern)?;
    write_out(a.output.as_deref(), &report.to_csv())?;
    Ok(Status::Ok)
}

fn sweep(a: &Sweep) -> Result<Status> {
    let text =
        fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let cfg = ExperimentConfig::from_kv(&text)?;
    echo(format!(
        "sweep --config {}{}{}",
        a.config.display(),
        path_opt("output", &a.output),
        path_opt("summary", &a.summary)
    ));
    for line in cfg.to_kv().lines() {
        eprintln!("#   {line}");
    }
    eprintln!("#   generator={GENERATOR}");
    let records = run_sweep(&cfg)?;
    write_out(a.output.as_deref(), &records_to_csv(&records))?;
    if let Some(p) = &a.summary {
        fs::write(p, summary_to_csv(&summarize(&records)?))?;
    }
    Ok(Status::Ok)
}

fn check(ok: bool, what: String) -> bool {
    println!("{} {what}", if ok { "ok  " } else { "FAIL" });
    ok
}

fn verify(a: &Verify) -> Result<Status> {
    let n = a.n;
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    echo(format!(
        "verify --suite {} --n {n} --seed {seed} --trials {}",
        value_name(a.suite),
        a.trials
    ));
    let dst = NodeId(
        n.checked_sub(1)
            .ok_or_else(|| anyhow!("--n must be positive"))?,
    );
    let mut all = true;
    match a.suite {
        SuiteArg::DfsStructure => {
            let s = DfsStructure::check(n)?;
            all &= check(
                s.repeated_column_entries == 0,
                format!("columns distinct ({} repeats)", s.repeated_column_entries),
            );
            all &= check(
                s.max_participation <= n.ilog2() as usize,
                format!(
                    "each index in at most {} rows (max {})",
                    n.ilog2(),
                    s.max_participation
                ),
            );
            all &= check(
                s.overlapping_prefix_pairs == 0,
                format!(
                    "prefixes disjoint ({} overlapping pairs)",
                    s.overlapping_prefix_pairs
                ),
            );
        }
        SuiteArg::RfsLoopfree => {
            let mut loops = 0;
            for i in 0..a.trials as u64 {
                let m = gen_rfs(n, dst, derive_seed(seed, i))?;
                let phi =
                    (derive_seed(seed ^ 0x5ca1e, i) % (clique_link_count(n) as u64 + 1)) as usize;
                let s = adv_ran(n, phi, derive_seed(seed, i + a.trials as u64))?;
                let t = Topology::clique(n)?.apply(&s)?;
                loops += evaluate(&m, &t, TrafficPattern::SingleDest(dst))?.loops;
            }
            all &= check(
                loops == 0,
                format!("{} random scenarios, {loops} looping flows", a.trials),
            );
        }
        SuiteArg::Theorems => all &= theorems(n, dst, seed)?,
    }
    Ok(if all { Status::Ok } else { Status::Violation })
}

fn theorems(n: usize, dst: NodeId, seed: u64) -> Result<bool> {
    if n < 8 {
        bail!("the theorem suite needs --n 8 or more");
    }
    let mut all = true;
    let mut zoo: Vec<Box<dyn FailoverScheme>> = vec![
        Box::new(gen_rfs(n, dst, seed)?),
        Box::new(gen_dfs(n, dst)?),
        Box::new(HopRule::Rob),
        Box::new(HopRule::Bal),
    ];
    for s in zoo.drain(..) {
        let what = format!(
            "loop-forcer breaks {} within n-1 failures, mincut >= n/2-1",
            s.name()
        );
        match adv_loop_forcer(s.as_ref(), n, dst) {
            Ok(out) => {
                let cut = Topology::clique(n)?.apply(&out.scenario)?.mincut();
                all &= check(
                    out.scenario.len() < n && !out.verdict.is_delivered() && cut + 1 >= n / 2,
                    format!("{what} ({} failures, mincut {cut})", out.scenario.len()),
                );
            }
            Err(e) => all &= check(false, format!("{what}: {e}")),
        }
    }
    for phi in [1, n / 4, n / 2]
        .into_iter()
        .filter(|&p| p >= 1 && p < n - 1)
    {
        let out = adv_chain_attack(&HopRule::Rob, n, dst, phi)?;
        let t = Topology::clique(n)?.apply(&out.scenario)?;
        let r = evaluate(&HopRule::Rob, &t, TrafficPattern::SingleDest(dst))?;
        let load = out.final_link().map_or(0, |l| r.load(l)) as usize;
        let cut = t.mincut();
        all &= check(
            load >= phi && cut == n - phi - 1,
            format!("chain attack on Rob, phi={phi}: load {load} >= phi, mincut {cut} = n-phi-1"),
        );
    }
    let mut bad = 0;
    for i in 0..20 {
        let phi = (i * 7) % (n - 1);
        let t = Topology::clique(n)?.apply(&adv_ran(n, phi, derive_seed(seed, i as u64))?)?;
        if t.mincut() + phi + 1 < n || t.disjoint_paths(NodeId(0), dst)? + phi + 1 < n {
            bad += 1;
        }
    }
    all &= check(
        bad == 0,
        format!("connectivity n-phi-1 after random failures ({bad} violations)"),
    );
    if n <= 16 {
        let m = gen_dfs(n, dst)?;
        let budget = (n.ilog2() as usize - 1).min(3);
        for phi in 1..=budget {
            let wc = brute_force_worst_case(
                &m,
                n,
                TrafficPattern::SingleDest(dst),
                BruteForceOptions::new(phi).dst_links_only(),
            )?;
            let l = wc.max_node_load_value as usize;
            all &= check(
                l * (l + 1) / 2 <= phi,
                format!(
                    "DFS node load L={l} with {phi} destination failures satisfies L(L+1)/2 <= phi"
                ),
            );
        }
    }
    Ok(all)
}

fn mincut(a: &Mincut) -> Result<Status> {
    let scenario = a.failures.as_deref().map(read_scenario).transpose()?;
    let n = match (a.n, &scenario) {
        (Some(n), Some(s)) if n != s.n() => {
            bail!("--n {n} disagrees with the scenario size {}", s.n())
        }
        (Some(n), _) => n,
        (None, Some(s)) => s.n(),
        (None, None) => bail!("--n or --failures is required"),
    };
    echo(format!(
        "mincut --n {n}{}",
        path_opt("failures", &a.failures)
    ));
    let mut t = Topology::clique(n)?;
    if let Some(s) = &scenario {
        t = t.apply(s)?;
    }
    println!("{}", t.mincut());
    Ok(Status::Ok)
}

fn run(cli: &Cli) -> Result<Status> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::GenScheme(a) => gen_scheme(a),
        Command::Attack(a) => attack(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::Mincut(a) => mincut(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
