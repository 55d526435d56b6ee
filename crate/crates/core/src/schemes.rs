//! Failover scheme generators.
//!
//! Matrix schemes store, per flow, an ordered row of backup nodes: the flow
//! goes straight to its destination when it can and otherwise walks the row
//! (see [`crate::routing`]). RFS rows are random permutations, DFS rows follow
//! the power-of-two offset formula. Bal and Rob are stateless per-hop rules.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::adversary;
use crate::error::{parse_err, Error, Result};
use crate::rng;
use crate::topology::{parse_header, parse_seed, NodeId, Topology};

/// A directed source-destination pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId {
    pub src: NodeId,
    pub dst: NodeId,
}

impl FlowId {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>) -> Result<Self> {
        let (src, dst) = (src.into(), dst.into());
        if src == dst {
            return Err(Error::SameEndpoints(src));
        }
        Ok(FlowId { src, dst })
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.dst)
    }
}

/// Which flows a matrix has rows for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DestMode {
    /// One row per source, all flows towards the given node.
    SingleDest(NodeId),
    /// One row per ordered pair.
    AllPairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeTag {
    Rfs,
    Dfs,
    Manual,
}

impl SchemeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeTag::Rfs => "RFS",
            SchemeTag::Dfs => "DFS",
            SchemeTag::Manual => "Manual",
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RFS" => Ok(SchemeTag::Rfs),
            "DFS" => Ok(SchemeTag::Dfs),
            "Manual" => Ok(SchemeTag::Manual),
            _ => Err(Error::InvalidConfig(format!("unknown scheme tag `{s}`"))),
        }
    }
}

/// Per-flow backup sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailoverMatrix {
    n: usize,
    mode: DestMode,
    rows: BTreeMap<FlowId, Vec<NodeId>>,
    scheme: SchemeTag,
    seed: Option<u64>,
}

impl FailoverMatrix {
    /// Assembles a matrix from explicit rows. Entries must be valid node
    /// indices; nothing else is enforced, so malformed rows can be studied.
    pub fn from_rows(
        n: usize,
        mode: DestMode,
        rows: impl IntoIterator<Item = (FlowId, Vec<NodeId>)>,
        scheme: SchemeTag,
        seed: Option<u64>,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidSize { n, min: 3 });
        }
        if let DestMode::SingleDest(d) = mode {
            if d.0 >= n {
                return Err(Error::NodeOutOfRange { node: d.0, n });
            }
        }
        let mut map = BTreeMap::new();
        for (flow, row) in rows {
            for v in std::iter::once(&flow.src).chain([&flow.dst]).chain(&row) {
                if v.0 >= n {
                    return Err(Error::NodeOutOfRange { node: v.0, n });
                }
            }
            if let DestMode::SingleDest(d) = mode {
                if flow.dst != d {
                    return Err(Error::PatternMismatch(format!(
                        "row for {flow} in a single-destination matrix towards {d}"
                    )));
                }
            }
            map.insert(flow, row);
        }
        Ok(FailoverMatrix {
            n,
            mode,
            rows: map,
            scheme,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> DestMode {
        self.mode
    }

    pub fn scheme(&self) -> SchemeTag {
        self.scheme
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, flow: FlowId) -> Result<&[NodeId]> {
        self.rows
            .get(&flow)
            .map(Vec::as_slice)
            .ok_or(Error::MissingRow(flow))
    }

    pub fn rows(&self) -> impl Iterator<Item = (FlowId, &[NodeId])> {
        self.rows.iter().map(|(f, r)| (*f, r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        text.parse()
    }
}

impl fmt::Display for FailoverMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            DestMode::SingleDest(d) => format!("single:{d}"),
            DestMode::AllPairs => "allpairs".to_string(),
        };
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            f,
            "n={} mode={mode} scheme={} seed={seed}",
            self.n, self.scheme
        )?;
        for (flow, row) in &self.rows {
            match self.mode {
                DestMode::SingleDest(_) => write!(f, "{}:", flow.src)?,
                DestMode::AllPairs => write!(f, "{},{}:", flow.src, flow.dst)?,
            }
            for v in row {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for FailoverMatrix {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
        let fields = parse_header(header, 1, &["n", "mode", "scheme", "seed"])?;
        let n: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(1, "bad node count"))?;
        let mode = match fields[1] {
            "allpairs" => DestMode::AllPairs,
            m => {
                let d = m
                    .strip_prefix("single:")
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| parse_err(1, format!("bad mode `{m}`")))?;
                DestMode::SingleDest(NodeId(d))
            }
        };
        let scheme: SchemeTag = fields[2]
            .parse()
            .map_err(|_| parse_err(1, "bad scheme tag"))?;
        let seed = parse_seed(fields[3], 1)?;

        let mut rows = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (key, entries) = line
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, "expected `src[,dst]: entries`"))?;
            let num = |s: &str| -> Result<NodeId> {
                s.trim()
                    .parse()
                    .map(NodeId)
                    .map_err(|_| parse_err(lineno, format!("bad node index `{s}`")))
            };
            let flow = match (mode, key.split_once(',')) {
                (DestMode::SingleDest(d), None) => FlowId::new(num(key)?, d),
                (DestMode::AllPairs, Some((s, d))) => FlowId::new(num(s)?, num(d)?),
                _ => {
                    return Err(parse_err(
                        lineno,
                        format!("row key `{key}` does not match mode"),
                    ))
                }
            }
            .map_err(|e| parse_err(lineno, e.to_string()))?;
            let row = entries
                .split_whitespace()
                .map(num)
                .collect::<Result<Vec<_>>>()?;
            rows.push((flow, row));
        }
        let count = rows.len();
        let m = FailoverMatrix::from_rows(n, mode, rows, scheme, seed)?;
        if m.len() != count {
            return Err(parse_err(1, "duplicate row keys"));
        }
        Ok(m)
    }
}

fn check_size(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::InvalidSize { n, min })
    } else {
        Ok(())
    }
}

fn check_node(v: NodeId, n: usize) -> Result<()> {
    if v.0 >= n {
        Err(Error::NodeOutOfRange { node: v.0, n })
    } else {
        Ok(())
    }
}

/// Uniform random permutation of `V \ {src, dst}`.
fn random_row<R: rand::Rng>(n: usize, src: NodeId, dst: NodeId, rng: &mut R) -> Vec<NodeId> {
    let mut row: Vec<NodeId> = (0..n)
        .map(NodeId)
        .filter(|&v| v != src && v != dst)
        .collect();
    row.shuffle(rng);
    row
}

/// Randomized failover scheme towards `dst`: every source gets an
/// independent uniform permutation of the other non-destination nodes.
pub fn gen_rfs(n: usize, dst: NodeId, seed: u64) -> Result<FailoverMatrix> {
    check_size(n, 3)?;
    check_node(dst, n)?;
    let mut rng = rng::rng(seed);
    let rows = (0..n)
        .map(NodeId)
        .filter(|&s| s != dst)
        .map(|s| (FlowId { src: s, dst }, random_row(n, s, dst, &mut rng)))
        .collect::<Vec<_>>();
    FailoverMatrix::from_rows(
        n,
        DestMode::SingleDest(dst),
        rows,
        SchemeTag::Rfs,
        Some(seed),
    )
}

/// Generalized RFS with one row per ordered pair.
pub fn gen_rfs_allpairs(n: usize, seed: u64) -> Result<FailoverMatrix> {
    check_size(n, 3)?;
    let mut rng = rng::rng(seed);
    let mut rows = Vec::with_capacity(n * (n - 1));
    for s in (0..n).map(NodeId) {
        for d in (0..n).map(NodeId).filter(|&d| d != s) {
            rows.push((FlowId { src: s, dst: d }, random_row(n, s, d, &mut rng)));
        }
    }
    FailoverMatrix::from_rows(n, DestMode::AllPairs, rows, SchemeTag::Rfs, Some(seed))
}

/// Number of DFS columns, `floor(log2 n)`.
pub fn dfs_width(n: usize) -> usize {
    n.ilog2() as usize
}

/// Deterministic failover scheme: row `m` holds `(m + 2^k) mod n` for
/// `k = 0 .. floor(log2 n)`. Entries equal to the source or destination are
/// kept; routing skips them.
pub fn gen_dfs(n: usize, dst: NodeId) -> Result<FailoverMatrix> {
    check_size(n, 4)?;
    let expected = NodeId(n - 1);
    if dst != expected {
        return Err(Error::UnsupportedDestination { dst, n, expected });
    }
    let width = dfs_width(n);
    let rows = (0..n - 1).map(|m| {
        let row = (0..width).map(|k| NodeId((m + (1 << k)) % n)).collect();
        (
            FlowId {
                src: NodeId(m),
                dst,
            },
            row,
        )
    });
    FailoverMatrix::from_rows(n, DestMode::SingleDest(dst), rows, SchemeTag::Dfs, None)
}

/// Result of [`gen_rfs_verified`].
#[derive(Clone, Debug)]
pub struct VerifiedRfs {
    pub matrix: FailoverMatrix,
    pub redraws: usize,
    /// Highest load the prefix attacker reached within the budget.
    pub max_load: usize,
}

/// Draws RFS matrices from `seed, seed + 1, ...` until the prefix attacker
/// cannot push more than `load_threshold` flows through any node using at
/// most `load_threshold^2` failures.
pub fn gen_rfs_verified(
    n: usize,
    dst: NodeId,
    seed: u64,
    load_threshold: usize,
    redraw_cap: usize,
) -> Result<VerifiedRfs> {
    if load_threshold == 0 {
        return Err(Error::InvalidConfig(
            "load threshold must be at least 1".into(),
        ));
    }
    let budget = load_threshold.saturating_mul(load_threshold);
    let mut best: Option<(usize, FailoverMatrix)> = None;
    for redraws in 0..=redraw_cap {
        let matrix = gen_rfs(n, dst, seed.wrapping_add(redraws as u64))?;
        let (load, _) = adversary::max_achievable_load(&matrix, dst, budget)?;
        if load <= load_threshold {
            return Ok(VerifiedRfs {
                matrix,
                redraws,
                max_load: load,
            });
        }
        if best.as_ref().is_none_or(|(b, _)| load < *b) {
            best = Some((load, matrix));
        }
    }
    let (best_load, best) = best.expect("at least one draw");
    Err(Error::Exhausted {
        redraws: redraw_cap,
        best_load,
        best: Box::new(best),
    })
}

/// Stateless per-hop failover rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HopRule {
    /// Offset scan starting at `(i + j + 1)` or `(i - j + 1)` mod n.
    Bal,
    /// Next available neighbour in cyclic order.
    Rob,
    /// Bal read as "uniformly random available port, as a function of the
    /// destination and the local failure set". Deterministic per seed.
    BalUniform { seed: u64 },
}

impl HopRule {
    pub fn name(&self) -> &'static str {
        match self {
            HopRule::Bal => "Bal",
            HopRule::Rob => "Rob",
            HopRule::BalUniform { .. } => "BalUniform",
        }
    }

    /// Next hop at `at` for a packet whose direct link to `dst` is down.
    pub fn next_hop(&self, at: NodeId, dst: NodeId, t: &Topology) -> Result<NodeId> {
        match *self {
            HopRule::Bal => next_hop_bal(at, dst, t),
            HopRule::Rob => next_hop_rob(at, t),
            HopRule::BalUniform { seed } => next_hop_uniform(at, dst, t, seed),
        }
    }
}

fn scan_from(i: NodeId, start: usize, t: &Topology) -> Result<NodeId> {
    let n = t.n();
    (0..n)
        .map(|step| NodeId((start + step) % n))
        .find(|&c| c != i && t.is_alive(i, c))
        .ok_or(Error::NoNextHop(i))
}

/// Bal: `j` is the far end of the failed link at `i`.
pub fn next_hop_bal(i: NodeId, j: NodeId, t: &Topology) -> Result<NodeId> {
    let n = t.n() as i64;
    let (ii, jj) = (i.0 as i64, j.0 as i64);
    let start = if ii > jj { ii + jj + 1 } else { ii - jj + 1 };
    scan_from(i, start.rem_euclid(n) as usize, t)
}

/// Rob: first surviving neighbour after `i` in cyclic order.
pub fn next_hop_rob(i: NodeId, t: &Topology) -> Result<NodeId> {
    scan_from(i, (i.0 + 1) % t.n(), t)
}

fn next_hop_uniform(i: NodeId, dst: NodeId, t: &Topology, seed: u64) -> Result<NodeId> {
    let candidates: Vec<NodeId> = t.neighbors(i).collect();
    if candidates.is_empty() {
        return Err(Error::NoNextHop(i));
    }
    let mut h = rng::derive_seed(seed, ((i.0 as u64) << 32) | dst.0 as u64);
    for v in (0..t.n())
        .map(NodeId)
        .filter(|&v| v != i && !t.is_alive(i, v))
    {
        h = rng::splitmix64(h ^ v.0 as u64);
    }
    Ok(candidates[(h % candidates.len() as u64) as usize])
}

/// Structural facts about a DFS matrix, checked exhaustively.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DfsStructure {
    pub repeated_column_entries: usize,
    pub max_participation: usize,
    pub overlapping_prefix_pairs: usize,
}

impl DfsStructure {
    pub fn check(n: usize) -> Result<Self> {
        let m = gen_dfs(n, NodeId(n - 1))?;
        let width = dfs_width(n);
        let rows: Vec<&[NodeId]> = m.rows().map(|(_, r)| r).collect();
        let mut out = DfsStructure::default();
        for k in 0..width {
            let mut seen = vec![false; n];
            for row in &rows {
                if std::mem::replace(&mut seen[row[k].0], true) {
                    out.repeated_column_entries += 1;
                }
            }
        }
        let mut prefixes: Vec<Vec<Vec<bool>>> = vec![Vec::new(); n];
        for row in &rows {
            for (pos, v) in row.iter().enumerate() {
                let mut mask = vec![false; n];
                for p in &row[..pos] {
                    mask[p.0] = true;
                }
                prefixes[v.0].push(mask);
            }
        }
        for sets in &prefixes {
            out.max_participation = out.max_participation.max(sets.len());
            for (i, a) in sets.iter().enumerate() {
                for b in &sets[i + 1..] {
                    if a.iter().zip(b).any(|(x, y)| *x && *y) {
                        out.overlapping_prefix_pairs += 1;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn holds(&self, n: usize) -> bool {
        self.repeated_column_entries == 0
            && self.max_participation <= dfs_width(n)
            && self.overlapping_prefix_pairs == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{FailureScenario, Link, ScenarioSource};
    use proptest::prelude::*;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    fn topo(n: usize, failed: &[(usize, usize)]) -> Topology {
        let s = FailureScenario::from_links(
            n,
            failed.iter().map(|&(a, b)| Link::new(a, b).unwrap()),
            ScenarioSource::Manual,
            None,
        )
        .unwrap();
        Topology::clique(n).unwrap().apply(&s).unwrap()
    }

    #[test]
    fn rfs_small() {
        let m = gen_rfs(4, NodeId(3), 11).unwrap();
        assert_eq!(m.len(), 3);
        for (flow, row) in m.rows() {
            let mut sorted = row.to_vec();
            sorted.sort();
            let expected: Vec<NodeId> = (0..4)
                .map(NodeId)
                .filter(|&v| v != flow.src && v != flow.dst)
                .collect();
            assert_eq!(sorted, expected);
        }
        assert!(gen_rfs(2, NodeId(1), 0).is_err());
    }

    #[test]
    fn rfs_row_orderings_are_uniform() {
        // n=5, dst=4: row 0 permutes {1,2,3}; exact probability of any
        // ordering is 1/6, so check all six orderings at 1/6 +- 0.02 and the
        // first-entry split at 1/3.
        let trials = 10_000;
        let mut counts: BTreeMap<Vec<NodeId>, usize> = BTreeMap::new();
        for seed in 0..trials {
            let m = gen_rfs(5, NodeId(4), seed).unwrap();
            let row = m.row(FlowId::new(0, 4).unwrap()).unwrap().to_vec();
            *counts.entry(row).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            let f = *c as f64 / trials as f64;
            assert!((f - 1.0 / 6.0).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn rfs_two_entry_row_is_a_fair_coin() {
        // n=4: every row has exactly two orderings, each with probability 1/2.
        let trials = 10_000;
        let first_low = (0..trials)
            .filter(|&seed| {
                let m = gen_rfs(4, NodeId(3), seed).unwrap();
                m.row(FlowId::new(0, 3).unwrap()).unwrap()[0] == NodeId(1)
            })
            .count();
        let f = first_low as f64 / trials as f64;
        assert!((f - 0.5).abs() < 0.05, "{f}");
    }

    #[test]
    fn dfs_rows_match_formula() {
        let m = gen_dfs(8, NodeId(7)).unwrap();
        assert_eq!(m.row(FlowId::new(0, 7).unwrap()).unwrap(), ids(&[1, 2, 4]));
        assert_eq!(m.row(FlowId::new(1, 7).unwrap()).unwrap(), ids(&[2, 3, 5]));
        assert_eq!(m.row(FlowId::new(6, 7).unwrap()).unwrap(), ids(&[7, 0, 2]));
        assert_eq!(m.len(), 7);
        assert!(matches!(
            gen_dfs(8, NodeId(3)),
            Err(Error::UnsupportedDestination { .. })
        ));
        assert!(gen_dfs(3, NodeId(2)).is_err());
    }

    #[test]
    fn dfs_columns_distinct_n9() {
        let m = gen_dfs(9, NodeId(8)).unwrap();
        for k in 0..dfs_width(9) {
            let mut col: Vec<NodeId> = m.rows().map(|(_, r)| r[k]).collect();
            col.sort();
            col.dedup();
            assert_eq!(col.len(), 8);
        }
    }

    #[test]
    fn dfs_structure_small_range() {
        for n in 4..=64 {
            let s = DfsStructure::check(n).unwrap();
            assert!(s.holds(n), "n={n}: {s:?}");
        }
    }

    #[test]
    fn allpairs_shape() {
        let m = gen_rfs_allpairs(4, 3).unwrap();
        assert_eq!(m.len(), 12);
        for (flow, row) in m.rows() {
            assert_eq!(row.len(), 2);
            assert!(!row.contains(&flow.src) && !row.contains(&flow.dst));
        }
        assert_eq!(m, gen_rfs_allpairs(4, 3).unwrap());
        assert_ne!(m, gen_rfs_allpairs(4, 4).unwrap());
    }

    #[test]
    fn bal_examples() {
        let t = topo(10, &[(5, 2)]);
        assert_eq!(next_hop_bal(NodeId(5), NodeId(2), &t).unwrap(), NodeId(8));
        assert_eq!(next_hop_bal(NodeId(2), NodeId(5), &t).unwrap(), NodeId(8));
        let t = topo(10, &[(5, 2), (5, 8)]);
        assert_eq!(next_hop_bal(NodeId(5), NodeId(2), &t).unwrap(), NodeId(9));
    }

    #[test]
    fn bal_skips_self() {
        // (i - j + 1) == i when j == 1; (0, 1) is failed too, so 2 is next.
        let t = topo(6, &[(0, 1)]);
        assert_eq!(next_hop_bal(NodeId(0), NodeId(1), &t).unwrap(), NodeId(2));
    }

    #[test]
    fn rob_examples() {
        let t = Topology::clique(10).unwrap();
        assert_eq!(next_hop_rob(NodeId(9), &t).unwrap(), NodeId(0));
        let t = topo(10, &[(3, 4), (3, 5)]);
        assert_eq!(next_hop_rob(NodeId(3), &t).unwrap(), NodeId(6));
        let all: Vec<(usize, usize)> = (1..10).map(|u| (0, u)).collect();
        let t = topo(10, &all);
        assert!(matches!(
            next_hop_rob(NodeId(0), &t),
            Err(Error::NoNextHop(NodeId(0)))
        ));
        assert!(next_hop_bal(NodeId(0), NodeId(9), &t).is_err());
    }

    #[test]
    fn uniform_bal_picks_alive_neighbor_deterministically() {
        let t = topo(8, &[(2, 7), (2, 3)]);
        let rule = HopRule::BalUniform { seed: 5 };
        let a = rule.next_hop(NodeId(2), NodeId(7), &t).unwrap();
        assert_eq!(a, rule.next_hop(NodeId(2), NodeId(7), &t).unwrap());
        assert!(t.is_alive(NodeId(2), a));
    }

    #[test]
    fn matrix_text_format() {
        let m = gen_dfs(8, NodeId(7)).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("n=8 mode=single:7 scheme=DFS seed=none\n0: 1 2 4\n1: 2 3 5\n"));
        assert_eq!(FailoverMatrix::from_text(&text).unwrap(), m);

        let ap = gen_rfs_allpairs(4, 9).unwrap();
        let text = ap.to_text();
        assert!(text.starts_with("n=4 mode=allpairs scheme=RFS seed=9\n0,1: "));
        assert_eq!(FailoverMatrix::from_text(&text).unwrap(), ap);

        assert!(
            FailoverMatrix::from_text("n=4 mode=single:3 scheme=RFS seed=1\n0,3: 1 2\n").is_err()
        );
        assert!(
            FailoverMatrix::from_text("n=4 mode=single:3 scheme=RFS seed=1\n0: 1 9\n").is_err()
        );
        assert!(
            FailoverMatrix::from_text("n=4 mode=single:3 scheme=RFS seed=1\n0: 1\n0: 2\n").is_err()
        );
    }

    #[test]
    fn verified_rfs_threshold_n_takes_first_draw() {
        let v = gen_rfs_verified(10, NodeId(9), 3, 10, 5).unwrap();
        assert_eq!(v.redraws, 0);
        assert_eq!(v.matrix, gen_rfs(10, NodeId(9), 3).unwrap());
    }

    #[test]
    fn verified_rfs_respects_threshold() {
        let v = gen_rfs_verified(16, NodeId(15), 1, 16, 0).unwrap();
        assert_eq!(v.redraws, 0);
        assert_eq!(v.matrix, gen_rfs(16, NodeId(15), 1).unwrap());
        // The greedy attacker gets about 2L flows onto one node with L^2
        // failures, so a threshold of 3 at n=16 is never met.
        match gen_rfs_verified(16, NodeId(15), 1, 3, 50) {
            Err(Error::Exhausted { best_load, .. }) => assert!(best_load > 3),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn verified_rfs_exhaustion_carries_best() {
        // A single failure redirects at most one flow.
        assert!(gen_rfs_verified(12, NodeId(11), 0, 1, 0).is_ok());
        match gen_rfs_verified(64, NodeId(63), 0, 2, 2) {
            Err(Error::Exhausted {
                redraws,
                best_load,
                best,
            }) => {
                assert_eq!(redraws, 2);
                assert!(best_load > 2);
                assert_eq!(best.n(), 64);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn rfs_rows_are_permutations(n in 3usize..40, seed: u64, dst_pick: usize) {
            let dst = NodeId(dst_pick % n);
            let m = gen_rfs(n, dst, seed).unwrap();
            prop_assert_eq!(m.len(), n - 1);
            for (flow, row) in m.rows() {
                prop_assert_eq!(row.len(), n - 2);
                let mut seen = vec![false; n];
                for v in row {
                    prop_assert!(*v != flow.src && *v != dst);
                    prop_assert!(!std::mem::replace(&mut seen[v.0], true));
                }
            }
            prop_assert_eq!(m.clone(), gen_rfs(n, dst, seed).unwrap());
        }

        #[test]
        fn matrix_text_round_trip(n in 3usize..12, seed: u64, allpairs: bool) {
            let m = if allpairs { gen_rfs_allpairs(n, seed).unwrap() } else { gen_rfs(n, NodeId(n - 1), seed).unwrap() };
            prop_assert_eq!(FailoverMatrix::from_text(&m.to_text()).unwrap(), m);
        }
    }
}
