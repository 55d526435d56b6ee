//! Failure generators: random adversaries, executable worst-case
//! constructions, and an exhaustive search used as ground truth at small
//! scale.
//!
//! Adaptive adversaries only ever query a scheme through
//! [`FailoverScheme::route`], so they apply to any local scheme.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::rng;
use crate::routing::{
    evaluate, FailoverScheme, LoadReport, PathStatus, PathVerdict, TrafficPattern,
};
use crate::schemes::{DestMode, FailoverMatrix, FlowId};
use crate::topology::{
    clique_incident_links, clique_link_count, clique_links, FailureScenario, Link, NodeId,
    ScenarioSource, Topology,
};

/// `phi` links drawn uniformly without replacement from the whole clique.
pub fn adv_ran(n: usize, phi: usize, seed: u64) -> Result<FailureScenario> {
    let total = clique_link_count(n);
    if phi > total {
        return Err(Error::BudgetTooLarge { phi, max: total });
    }
    let links: Vec<Link> = clique_links(n).collect();
    let mut rng = rng::rng(seed);
    let picked = sample(&mut rng, total, phi).into_iter().map(|i| links[i]);
    FailureScenario::from_links(n, picked, ScenarioSource::Ran, Some(seed))
}

/// `phi <= n - 2` links drawn uniformly without replacement from those
/// incident to `dst`, so at least one direct link to `dst` survives.
pub fn adv_ecl(n: usize, phi: usize, dst: NodeId, seed: u64) -> Result<FailureScenario> {
    if dst.0 >= n {
        return Err(Error::NodeOutOfRange { node: dst.0, n });
    }
    let max = n.saturating_sub(2);
    if phi > max {
        return Err(Error::BudgetTooLarge { phi, max });
    }
    let links: Vec<Link> = clique_incident_links(n, dst).collect();
    let mut rng = rng::rng(seed);
    let picked = sample(&mut rng, links.len(), phi)
        .into_iter()
        .map(|i| links[i]);
    FailureScenario::from_links(n, picked, ScenarioSource::Ecl, Some(seed))
}

/// The flow the constructive attacks target: from the lowest-index node
/// other than `dst` (node 0 unless `dst` is 0).
pub fn attacked_flow(dst: NodeId) -> FlowId {
    let src = if dst.0 == 0 { NodeId(1) } else { NodeId(0) };
    FlowId { src, dst }
}

fn route_under<S: FailoverScheme + ?Sized>(
    scheme: &S,
    base: &Topology,
    scenario: &FailureScenario,
    flow: FlowId,
) -> Result<PathVerdict> {
    scheme.route(&base.apply(scenario)?, flow)
}

fn dst_link(v: NodeId, dst: NodeId) -> Link {
    Link::new(v, dst).expect("node differs from destination")
}

/// Result of [`adv_loop_forcer`].
#[derive(Clone, Debug)]
pub struct LoopForcerOutcome {
    pub scenario: FailureScenario,
    /// Verdict for the attacked flow after all failures.
    pub verdict: PathVerdict,
    /// Failures spent lengthening the path before isolating its last hop.
    pub lengthening_failures: usize,
    /// The last hop that was cut off, if the second phase ran.
    pub isolated_hop: Option<NodeId>,
}

/// Forces the flow from node 0 (or 1) to `dst` into a loop or a dead end
/// with at most `n - 1` failures.
///
/// While the flow is delivered with fewer than `floor(n/2) - 1` intermediate
/// nodes, the link from its last hop to `dst` is failed. Then every link from
/// the last hop to a node that is neither on the path nor the source is
/// failed, leaving it only links back into the path.
pub fn adv_loop_forcer<S: FailoverScheme + ?Sized>(
    scheme: &S,
    n: usize,
    dst: NodeId,
) -> Result<LoopForcerOutcome> {
    let base = Topology::clique(n)?;
    if dst.0 >= n {
        return Err(Error::NodeOutOfRange { node: dst.0, n });
    }
    let flow = attacked_flow(dst);
    let target = (n / 2).saturating_sub(1);
    let mut scenario = FailureScenario::new(n, ScenarioSource::LoopForcer, None);

    let path = loop {
        let verdict = route_under(scheme, &base, &scenario, flow)?;
        let path = match verdict.status {
            PathStatus::Delivered(ref p) => p.clone(),
            _ => {
                let lengthening_failures = scenario.len();
                return Ok(LoopForcerOutcome {
                    scenario,
                    verdict,
                    lengthening_failures,
                    isolated_hop: None,
                });
            }
        };
        if path.len() - 2 >= target {
            break path;
        }
        let last = path[path.len() - 2];
        if !scenario.insert(dst_link(last, dst))? {
            return Err(Error::ConstructionFailed(format!(
                "{} delivered {flow} over already failed link ({last}, {dst})",
                scheme.name()
            )));
        }
    };
    let lengthening_failures = scenario.len();

    let last = path[path.len() - 2];
    let on_path: BTreeSet<NodeId> = path[..path.len() - 1].iter().copied().collect();
    for v in (0..n).map(NodeId) {
        if v != last && !on_path.contains(&v) {
            scenario.insert(Link::new(last, v)?)?;
        }
    }
    let verdict = route_under(scheme, &base, &scenario, flow)?;
    if verdict.is_delivered() {
        return Err(Error::ConstructionFailed(format!(
            "{} still delivers {flow} after isolating {last}: {:?}",
            scheme.name(),
            verdict.status
        )));
    }
    Ok(LoopForcerOutcome {
        scenario,
        verdict,
        lengthening_failures,
        isolated_hop: Some(last),
    })
}

/// Result of [`adv_chain_attack`].
#[derive(Clone, Debug)]
pub struct ChainOutcome {
    pub scenario: FailureScenario,
    /// `false` if the flow stopped being delivered before the budget was
    /// spent.
    pub completed: bool,
    /// Verdict for the attacked flow after the last failure.
    pub verdict: PathVerdict,
}

impl ChainOutcome {
    /// Link from the final last hop to the destination.
    pub fn final_link(&self) -> Option<Link> {
        self.verdict
            .last_hop()
            .map(|h| dst_link(h, self.verdict.flow.dst))
    }
}

/// Repeatedly fails the link between the attacked flow's current last hop
/// and `dst`, `phi` times.
pub fn adv_chain_attack<S: FailoverScheme + ?Sized>(
    scheme: &S,
    n: usize,
    dst: NodeId,
    phi: usize,
) -> Result<ChainOutcome> {
    let base = Topology::clique(n)?;
    if dst.0 >= n {
        return Err(Error::NodeOutOfRange { node: dst.0, n });
    }
    if phi == 0 || phi >= n {
        return Err(Error::BudgetTooLarge { phi, max: n - 1 });
    }
    let flow = attacked_flow(dst);
    let mut scenario = FailureScenario::new(n, ScenarioSource::ChainAttack, None);
    for _ in 0..phi {
        let verdict = route_under(scheme, &base, &scenario, flow)?;
        let Some(last) = verdict.last_hop() else {
            return Ok(ChainOutcome {
                scenario,
                completed: false,
                verdict,
            });
        };
        scenario.insert(dst_link(last, dst))?;
    }
    let verdict = route_under(scheme, &base, &scenario, flow)?;
    Ok(ChainOutcome {
        completed: verdict.is_delivered(),
        scenario,
        verdict,
    })
}

/// One row selected by an attack plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChosenRow {
    pub flow: FlowId,
    /// Entries the flow visits before reaching the target node.
    pub prefix: Vec<NodeId>,
}

/// An attack that concentrates flows on one node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackPlan {
    pub target_w: NodeId,
    pub target_load: usize,
    pub chosen_rows: Vec<ChosenRow>,
    /// Distinct nodes over all chosen prefixes.
    pub total_prefix_distinct: usize,
    pub scenario: FailureScenario,
    /// Flows passing through `target_w` after applying the scenario.
    pub achieved_load: usize,
    /// Highest link load after applying the scenario.
    pub max_link_load: u32,
    /// `false` if no node could be loaded to `target_load`.
    pub reached: bool,
}

impl AttackPlan {
    pub fn cost(&self) -> usize {
        self.scenario.len()
    }

    pub fn to_report(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AttackPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target_w={}", self.target_w)?;
        writeln!(f, "target_load={}", self.target_load)?;
        writeln!(f, "achieved_load={}", self.achieved_load)?;
        writeln!(f, "max_link_load={}", self.max_link_load)?;
        writeln!(f, "reached={}", self.reached)?;
        writeln!(f, "total_prefix_distinct={}", self.total_prefix_distinct)?;
        writeln!(f, "rows={}", self.chosen_rows.len())?;
        for row in &self.chosen_rows {
            write!(f, "row {} prefix_length={}:", row.flow, row.prefix.len())?;
            for p in &row.prefix {
                write!(f, " {p}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "failures={}", self.scenario.len())?;
        write!(f, "{}", self.scenario)
    }
}

/// A row reduced to the entries its flow can actually visit when only
/// destination links fail: no source, no destination, no repeats.
struct Walk {
    flow: FlowId,
    entries: Vec<NodeId>,
    // position of each node in `entries`
    pos: Vec<Option<usize>>,
}

impl Walk {
    fn new(flow: FlowId, row: &[NodeId], n: usize) -> Self {
        let mut pos = vec![None; n];
        let mut entries = Vec::with_capacity(row.len());
        for &e in row {
            if e == flow.src || e == flow.dst || pos[e.0].is_some() {
                continue;
            }
            pos[e.0] = Some(entries.len());
            entries.push(e);
        }
        Walk { flow, entries, pos }
    }

    /// Source followed by the entries before `w`.
    fn cover(&self, k: usize) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.flow.src).chain(self.entries[..k].iter().copied())
    }
}

struct Selection {
    w: NodeId,
    // (walk index, prefix length)
    picked: Vec<(usize, usize)>,
    cost: usize,
}

/// Greedy selection of up to `target` rows through `w`, each step taking the
/// row that adds the fewest new failures (ties: smaller source). Gives up
/// once the cost reaches `give_up`.
fn greedy_select(
    walks: &[Walk],
    w: NodeId,
    target: usize,
    n: usize,
    give_up: usize,
) -> Option<Selection> {
    // Candidates sorted by cover size, then source.
    let mut cands: Vec<(usize, usize)> = walks
        .iter()
        .enumerate()
        .filter(|(_, wk)| wk.flow.src != w)
        .filter_map(|(i, wk)| wk.pos[w.0].map(|k| (k, i)))
        .collect();
    cands.sort_unstable();
    let mut covered = vec![false; n];
    let mut covered_count = 0;
    let mut used = vec![false; cands.len()];
    let mut sel = Selection {
        w,
        picked: Vec::new(),
        cost: 0,
    };
    while sel.picked.len() < target {
        let mut best: Option<(usize, usize, usize)> = None;
        for (c, &(k, i)) in cands.iter().enumerate() {
            // A cover of k + 1 nodes adds at least k + 1 - covered_count.
            if let Some((b, _, _)) = best {
                if (k + 1).saturating_sub(covered_count) > b {
                    break;
                }
            }
            if used[c] {
                continue;
            }
            let added = walks[i].cover(k).filter(|v| !covered[v.0]).count();
            let key = (added, walks[i].flow.src.0, c);
            if best.is_none_or(|(b, src, _)| (added, walks[i].flow.src.0) < (b, src)) {
                best = Some(key);
            }
        }
        let Some((added, _, c)) = best else { break };
        used[c] = true;
        let (k, i) = cands[c];
        for v in walks[i].cover(k) {
            if !std::mem::replace(&mut covered[v.0], true) {
                covered_count += 1;
            }
        }
        sel.cost += added;
        sel.picked.push((i, k));
        if sel.cost >= give_up {
            return None;
        }
    }
    Some(sel)
}

/// Greedy attack that routes `target_load` flows through a single node by
/// failing only links to the destination.
///
/// For each candidate node `w`, the rows containing `w` are ranked by how
/// many new destination links they need (their source plus the entries
/// before `w`); the `w` with the cheapest selection wins, ties going to the
/// smaller index. When no node appears in enough rows the plan loads the
/// best node it can and is marked unreached.
pub fn adv_prefix_attack(
    m: &FailoverMatrix,
    dst: NodeId,
    target_load: usize,
) -> Result<AttackPlan> {
    let n = m.n();
    match m.mode() {
        DestMode::SingleDest(d) if d == dst => {}
        _ => {
            return Err(Error::PatternMismatch(format!(
                "prefix attack needs a single-destination matrix towards {dst}"
            )))
        }
    }
    if target_load == 0 || target_load >= n {
        return Err(Error::BudgetTooLarge {
            phi: target_load,
            max: n - 1,
        });
    }
    let walks: Vec<Walk> = m
        .rows()
        .map(|(flow, row)| Walk::new(flow, row, n))
        .collect();

    let mut best: Option<Selection> = None;
    for w in (0..n).map(NodeId).filter(|&w| w != dst) {
        // Once some w reaches the target, only strictly cheaper ones matter.
        let give_up = match &best {
            Some(b) if b.picked.len() >= target_load => b.cost,
            _ => usize::MAX,
        };
        let Some(sel) = greedy_select(&walks, w, target_load, n, give_up) else {
            continue;
        };
        if sel.picked.is_empty() {
            continue;
        }
        // Rank: more rows first, then cheaper; ties keep the smaller w.
        let better = best.as_ref().is_none_or(|b| {
            (sel.picked.len(), std::cmp::Reverse(sel.cost))
                > (b.picked.len(), std::cmp::Reverse(b.cost))
        });
        if better {
            best = Some(sel);
        }
    }
    let Some(sel) = best else {
        return Err(Error::ConstructionFailed(
            "matrix has no backup entries".into(),
        ));
    };
    let reached = sel.picked.len() >= target_load;

    let mut scenario = FailureScenario::new(n, ScenarioSource::PrefixAttack, m.seed());
    let mut chosen_rows = Vec::with_capacity(sel.picked.len());
    let mut prefix_nodes = BTreeSet::new();
    for &(i, k) in &sel.picked {
        let wk = &walks[i];
        for v in wk.cover(k) {
            scenario.insert(dst_link(v, dst))?;
        }
        prefix_nodes.extend(wk.entries[..k].iter().copied());
        chosen_rows.push(ChosenRow {
            flow: wk.flow,
            prefix: wk.entries[..k].to_vec(),
        });
    }
    debug_assert_eq!(scenario.len(), sel.cost);

    let t = Topology::clique(n)?.apply(&scenario)?;
    let report = evaluate(m, &t, TrafficPattern::SingleDest(dst))?;
    Ok(AttackPlan {
        target_w: sel.w,
        target_load,
        chosen_rows,
        total_prefix_distinct: prefix_nodes.len(),
        scenario,
        achieved_load: report.node_load(sel.w) as usize,
        max_link_load: report.max_load,
        reached: reached && report.node_load(sel.w) as usize >= target_load,
    })
}

/// Largest node load the greedy prefix attacker reaches with at most
/// `budget` failures, with the plan that reaches it (`None` for load 0).
pub fn max_achievable_load(
    m: &FailoverMatrix,
    dst: NodeId,
    budget: usize,
) -> Result<(usize, Option<AttackPlan>)> {
    let mut best = (0, None);
    for target in 1..m.n() {
        let plan = adv_prefix_attack(m, dst, target)?;
        if !plan.reached || plan.cost() > budget {
            break;
        }
        best = (plan.achieved_load.max(target), Some(plan));
    }
    Ok(best)
}

/// Loads a single node with `phi` flows of an all-pairs matrix, one failure
/// per flow.
///
/// Picks the node `w` that appears most often as a first backup entry and
/// fails the direct link of `phi` rows starting with `w`, never two rows
/// sharing the same undirected link.
pub fn adv_pigeonhole_allpairs(m: &FailoverMatrix, phi: usize) -> Result<AttackPlan> {
    if m.mode() != DestMode::AllPairs {
        return Err(Error::PatternMismatch(
            "pigeonhole attack needs an all-pairs matrix".into(),
        ));
    }
    let n = m.n();
    if phi == 0 || phi >= n {
        return Err(Error::BudgetTooLarge { phi, max: n - 1 });
    }
    let first = |flow: FlowId, row: &[NodeId]| {
        row.iter()
            .copied()
            .find(|&e| e != flow.src && e != flow.dst)
    };
    let mut freq = vec![0usize; n];
    for (flow, row) in m.rows() {
        if let Some(w) = first(flow, row) {
            freq[w.0] += 1;
        }
    }
    let w = NodeId(
        freq.iter()
            .enumerate()
            .max_by_key(|(v, c)| (**c, std::cmp::Reverse(*v)))
            .map(|(v, _)| v)
            .expect("n >= 3"),
    );

    let mut scenario = FailureScenario::new(n, ScenarioSource::Pigeonhole, m.seed());
    let mut chosen_rows = Vec::new();
    for (flow, row) in m.rows() {
        if chosen_rows.len() == phi {
            break;
        }
        if first(flow, row) == Some(w) && scenario.insert(Link::new(flow.src, flow.dst)?)? {
            chosen_rows.push(ChosenRow {
                flow,
                prefix: Vec::new(),
            });
        }
    }
    let t = Topology::clique(n)?.apply(&scenario)?;
    let report = evaluate(m, &t, TrafficPattern::AllToAll)?;
    let achieved = report.node_load(w) as usize;
    Ok(AttackPlan {
        target_w: w,
        target_load: phi,
        chosen_rows,
        total_prefix_distinct: 0,
        scenario,
        achieved_load: achieved,
        max_link_load: report.max_load,
        reached: achieved >= phi,
    })
}

/// Default enumeration cap for [`brute_force_worst_case`].
pub const BRUTE_FORCE_CAP: u128 = 10_000_000;

/// Options for [`brute_force_worst_case`].
#[derive(Clone, Copy, Debug)]
pub struct BruteForceOptions {
    pub budget: usize,
    /// Only fail links incident to the pattern's destination.
    pub restrict_to_dst_links: bool,
    pub cap: u128,
}

impl BruteForceOptions {
    pub fn new(budget: usize) -> Self {
        BruteForceOptions {
            budget,
            restrict_to_dst_links: false,
            cap: BRUTE_FORCE_CAP,
        }
    }

    pub fn dst_links_only(mut self) -> Self {
        self.restrict_to_dst_links = true;
        self
    }
}

/// A scenario paired with its evaluation.
#[derive(Clone, Debug)]
pub struct Witness {
    pub scenario: FailureScenario,
    pub report: LoadReport,
}

/// Exhaustive search result.
#[derive(Clone, Debug)]
pub struct WorstCase {
    /// Highest max link load among scenarios with no loop or disconnection.
    pub max_link_load: Witness,
    /// Highest node load among the same scenarios.
    pub max_node_load: Witness,
    pub max_node_load_value: u32,
    /// Smallest scenario (first in enumeration order) that breaks some flow.
    pub min_breaking: Option<Witness>,
    pub examined: u64,
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Enumerates every failure set of size `0..=budget` and reports the worst
/// loads among correctness-preserving ones.
pub fn brute_force_worst_case<S: FailoverScheme + ?Sized>(
    scheme: &S,
    n: usize,
    pattern: TrafficPattern,
    opts: BruteForceOptions,
) -> Result<WorstCase> {
    let candidates: Vec<Link> = match (opts.restrict_to_dst_links, pattern) {
        (false, _) => clique_links(n).collect(),
        (true, TrafficPattern::SingleDest(d)) => clique_incident_links(n, d).collect(),
        (true, TrafficPattern::AllToAll) => {
            return Err(Error::PatternMismatch(
                "destination-link restriction needs a single destination".into(),
            ))
        }
    };
    let required: u128 = (0..=opts.budget)
        .map(|k| binomial(candidates.len() as u128, k as u128))
        .fold(0u128, |a, b| a.saturating_add(b));
    if required > opts.cap {
        return Err(Error::SearchTooLarge {
            required,
            cap: opts.cap,
        });
    }
    let base = Topology::clique(n)?;
    let empty = FailureScenario::new(n, ScenarioSource::BruteForce, None);
    let baseline = evaluate(scheme, &base, pattern)?;
    let mut out = WorstCase {
        max_link_load: Witness {
            scenario: empty.clone(),
            report: baseline.clone(),
        },
        max_node_load_value: baseline.max_node_load().1,
        max_node_load: Witness {
            scenario: empty,
            report: baseline,
        },
        min_breaking: None,
        examined: 0,
    };
    for k in 0..=opts.budget.min(candidates.len()) {
        for set in candidates.iter().copied().combinations(k) {
            out.examined += 1;
            let t = base.with_failed(set.iter().copied())?;
            let report = evaluate(scheme, &t, pattern)?;
            let scenario = || {
                FailureScenario::from_links(
                    n,
                    set.iter().copied(),
                    ScenarioSource::BruteForce,
                    None,
                )
            };
            if !report.is_correct() {
                if out.min_breaking.is_none() {
                    out.min_breaking = Some(Witness {
                        scenario: scenario()?,
                        report,
                    });
                }
                continue;
            }
            if report.max_load > out.max_link_load.report.max_load {
                out.max_link_load = Witness {
                    scenario: scenario()?,
                    report: report.clone(),
                };
            }
            let node = report.max_node_load().1;
            if node > out.max_node_load_value {
                out.max_node_load_value = node;
                out.max_node_load = Witness {
                    scenario: scenario()?,
                    report,
                };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{gen_dfs, gen_rfs, gen_rfs_allpairs, HopRule};

    fn scheme_zoo(n: usize) -> Vec<Box<dyn FailoverScheme>> {
        let d = NodeId(n - 1);
        vec![
            Box::new(gen_rfs(n, d, 1).unwrap()),
            Box::new(gen_dfs(n, d).unwrap()),
            Box::new(HopRule::Rob),
            Box::new(HopRule::Bal),
        ]
    }

    #[test]
    fn ran_scenarios() {
        assert!(adv_ran(10, 0, 1).unwrap().is_empty());
        let s = adv_ran(500, 450, 3).unwrap();
        assert_eq!(s.len(), 450);
        assert_eq!(s.links().iter().unique().count(), 450);
        assert_eq!(s, adv_ran(500, 450, 3).unwrap());
        assert!(adv_ran(5, 11, 0).is_err());
        assert_eq!(adv_ran(5, 10, 0).unwrap().len(), 10);
    }

    #[test]
    fn ran_hits_destination_at_expected_rate() {
        // Expected number of failed links at a fixed node: 2 * phi / n.
        let (n, phi, trials) = (50usize, 100usize, 2000u64);
        let d = NodeId(n - 1);
        let hits: usize = (0..trials)
            .map(|s| {
                adv_ran(n, phi, s)
                    .unwrap()
                    .links()
                    .iter()
                    .filter(|l| l.contains(d))
                    .count()
            })
            .sum();
        let mean = hits as f64 / trials as f64;
        let expected = 2.0 * phi as f64 / n as f64;
        assert!((mean - expected).abs() < 0.15, "{mean} vs {expected}");
    }

    #[test]
    fn ecl_scenarios() {
        let d = NodeId(9);
        let s = adv_ecl(10, 8, d, 5).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.links().iter().all(|l| l.contains(d)));
        let t = Topology::clique(10).unwrap().apply(&s).unwrap();
        assert_eq!(t.degree(d), 1);
        assert!(adv_ecl(10, 9, d, 5).is_err());
        let big = adv_ecl(500, 300, NodeId(499), 1).unwrap();
        assert_eq!(big.len(), 300);
    }

    #[test]
    fn loop_forcer_breaks_every_builtin_scheme() {
        for n in [4, 5, 8, 11, 16] {
            for scheme in scheme_zoo(n) {
                let out = adv_loop_forcer(scheme.as_ref(), n, NodeId(n - 1)).unwrap();
                assert!(
                    out.scenario.len() < n,
                    "{} n={n}: {}",
                    scheme.name(),
                    out.scenario.len()
                );
                assert!(!out.verdict.is_delivered());
                let t = Topology::clique(n).unwrap().apply(&out.scenario).unwrap();
                assert!(t.mincut() + 1 >= n / 2, "{} n={n}", scheme.name());
            }
        }
    }

    #[test]
    fn loop_forcer_rob_n8() {
        let out = adv_loop_forcer(&HopRule::Rob, 8, NodeId(7)).unwrap();
        // Rob walks 0 -> 1 -> 2 -> 3 as the dst links of 0, 1, 2 fail, then 3
        // loses its links to 4, 5, 6, 7 and can only go back to 0.
        assert_eq!(out.lengthening_failures, 3);
        assert_eq!(out.isolated_hop, Some(NodeId(3)));
        assert_eq!(out.scenario.len(), 7);
        assert!(out.verdict.is_loop());
    }

    #[test]
    fn chain_attack_rob() {
        let (n, phi) = (16, 5);
        let out = adv_chain_attack(&HopRule::Rob, n, NodeId(15), phi).unwrap();
        assert!(out.completed);
        assert_eq!(out.scenario.len(), phi);
        let t = Topology::clique(n).unwrap().apply(&out.scenario).unwrap();
        let r = evaluate(&HopRule::Rob, &t, TrafficPattern::SingleDest(NodeId(15))).unwrap();
        assert!(r.load(out.final_link().unwrap()) as usize >= phi);
        assert_eq!(t.mincut(), n - phi - 1);
    }

    #[test]
    fn chain_attack_rfs_spreads_load() {
        let (n, phi) = (64, 5);
        let mut total = 0;
        for seed in 0..20 {
            let m = gen_rfs(n, NodeId(n - 1), seed).unwrap();
            let out = adv_chain_attack(&m, n, NodeId(n - 1), phi).unwrap();
            let t = Topology::clique(n).unwrap().apply(&out.scenario).unwrap();
            let r = evaluate(&m, &t, TrafficPattern::SingleDest(NodeId(n - 1))).unwrap();
            total += r.load(out.final_link().unwrap());
        }
        // Against a destination-based rule this would be at least 6 per run.
        assert!((total as f64 / 20.0) < 3.0, "{total}");
    }

    #[test]
    fn chain_attack_flags_dead_schemes() {
        // DFS(8) rows have 3 entries; a long chain runs them dry.
        let out = adv_chain_attack(&gen_dfs(8, NodeId(7)).unwrap(), 8, NodeId(7), 7).unwrap();
        assert!(!out.completed);
        assert!(out.scenario.len() < 7);
        assert!(adv_chain_attack(&HopRule::Rob, 8, NodeId(7), 8).is_err());
    }

    #[test]
    fn prefix_attack_single_redirect() {
        let m = gen_rfs(20, NodeId(19), 8).unwrap();
        let plan = adv_prefix_attack(&m, NodeId(19), 1).unwrap();
        assert!(plan.reached);
        assert_eq!(plan.cost(), 1);
        assert_eq!(plan.chosen_rows.len(), 1);
        assert!(plan.chosen_rows[0].prefix.is_empty());
        let row = m.row(plan.chosen_rows[0].flow).unwrap();
        assert_eq!(row[0], plan.target_w);
        assert!(plan.achieved_load >= 1);
    }

    #[test]
    fn prefix_attack_cost_accounting() {
        for seed in 0..10 {
            let m = gen_rfs(40, NodeId(39), seed).unwrap();
            for target in [2, 4, 6] {
                let plan = adv_prefix_attack(&m, NodeId(39), target).unwrap();
                let mut nodes: BTreeSet<NodeId> =
                    plan.chosen_rows.iter().map(|r| r.flow.src).collect();
                nodes.extend(
                    plan.chosen_rows
                        .iter()
                        .flat_map(|r| r.prefix.iter().copied()),
                );
                assert_eq!(plan.cost(), nodes.len());
                assert!(plan.achieved_load <= plan.cost());
                assert!(plan.reached);
                assert!(plan.achieved_load >= target);
                let t = Topology::clique(40).unwrap().apply(&plan.scenario).unwrap();
                assert!(t.is_alive(plan.target_w, NodeId(39)));
            }
        }
    }

    #[test]
    fn prefix_attack_on_dfs_reuses_sources() {
        // Row 3 starts with 4, row 2 is [3, 4, 6]: failing the destination
        // links of 3 and 2 sends both flows through 4.
        let m = gen_dfs(8, NodeId(7)).unwrap();
        let plan = adv_prefix_attack(&m, NodeId(7), 2).unwrap();
        assert!(plan.reached);
        assert_eq!(plan.cost(), 2);
        assert_eq!(plan.achieved_load, 2);
    }

    #[test]
    fn prefix_attack_unreachable_is_flagged() {
        // DFS(8): every index sits in at most 3 rows.
        let m = gen_dfs(8, NodeId(7)).unwrap();
        let plan = adv_prefix_attack(&m, NodeId(7), 5).unwrap();
        assert!(!plan.reached);
        assert!(plan.achieved_load < 5);
    }

    #[test]
    fn prefix_attack_report_golden() {
        let m = gen_dfs(16, NodeId(15)).unwrap();
        let plan = adv_prefix_attack(&m, NodeId(15), 3).unwrap();
        let golden = include_str!("../tests/data/dfs16_prefix3.plan");
        assert_eq!(plan.to_report(), golden);
    }

    #[test]
    fn pigeonhole_uses_one_failure_per_flow() {
        let m = gen_rfs_allpairs(64, 7).unwrap();
        let plan = adv_pigeonhole_allpairs(&m, 8).unwrap();
        assert_eq!(plan.cost(), 8);
        assert!(plan.reached);
        assert!(plan.achieved_load >= 8);
        let links: BTreeSet<Link> = plan
            .chosen_rows
            .iter()
            .map(|r| Link::new(r.flow.src, r.flow.dst).unwrap())
            .collect();
        assert_eq!(links.len(), 8);
        assert!(adv_pigeonhole_allpairs(&gen_rfs(8, NodeId(7), 0).unwrap(), 2).is_err());
    }

    #[test]
    fn brute_force_zero_budget() {
        let m = gen_dfs(8, NodeId(7)).unwrap();
        let wc = brute_force_worst_case(
            &m,
            8,
            TrafficPattern::SingleDest(NodeId(7)),
            BruteForceOptions::new(0),
        )
        .unwrap();
        assert_eq!(wc.max_link_load.report.max_load, 1);
        assert_eq!(wc.examined, 1);
        assert!(wc.min_breaking.is_none());
    }

    #[test]
    fn brute_force_finds_breaking_budget() {
        // Rob at n=4 towards 3: failing (0,3) and (1,3) leaves 0 -> 1 -> 2 -> 3;
        // failing (0,1) too makes 0 loop? Exhaustive search answers directly.
        let wc = brute_force_worst_case(
            &HopRule::Rob,
            4,
            TrafficPattern::SingleDest(NodeId(3)),
            BruteForceOptions::new(3),
        )
        .unwrap();
        let broken = wc
            .min_breaking
            .expect("Rob breaks within 3 failures at n=4");
        assert!(!broken.report.is_correct());
        assert!(broken.scenario.len() <= 3);
    }

    #[test]
    fn claim_one_small_scale() {
        for seed in 0..4 {
            let m = gen_rfs(8, NodeId(7), seed).unwrap();
            let p = TrafficPattern::SingleDest(NodeId(7));
            let all = brute_force_worst_case(&m, 8, p, BruteForceOptions::new(2)).unwrap();
            let dst = brute_force_worst_case(&m, 8, p, BruteForceOptions::new(2).dst_links_only())
                .unwrap();
            assert_eq!(
                all.max_link_load.report.max_load,
                dst.max_link_load.report.max_load
            );
        }
    }

    #[test]
    fn brute_force_cap() {
        let err = brute_force_worst_case(
            &HopRule::Rob,
            30,
            TrafficPattern::SingleDest(NodeId(29)),
            BruteForceOptions::new(4),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SearchTooLarge { .. }));
        assert_eq!(binomial(15, 3), 455);
    }
}
