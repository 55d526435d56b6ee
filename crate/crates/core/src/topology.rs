//! The clique substrate, link failures and exact connectivity queries.
//!
//! A [`Topology`] is a full mesh on `n` nodes minus a set of failed undirected
//! links. Values are immutable once built; [`Topology::apply`] returns a new
//! topology. Connectivity ground truth is exact: the global minimum edge cut
//! uses Stoer-Wagner on the dense adjacency matrix and pairwise edge-disjoint
//! path counts use unit-capacity max-flow.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{parse_err, Error, Result};

/// Index of a node in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(value: usize) -> Self {
        NodeId(value)
    }
}

/// An undirected link, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    a: NodeId,
    b: NodeId,
}

impl Link {
    /// Canonical link between two distinct nodes.
    pub fn new(x: impl Into<NodeId>, y: impl Into<NodeId>) -> Result<Self> {
        let (x, y) = (x.into(), y.into());
        if x == y {
            return Err(Error::InvalidLink {
                a: x.0,
                b: y.0,
                n: 0,
            });
        }
        Ok(if x < y {
            Link { a: x, b: y }
        } else {
            Link { a: y, b: x }
        })
    }

    pub fn a(&self) -> NodeId {
        self.a
    }

    pub fn b(&self) -> NodeId {
        self.b
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.a == v || self.b == v
    }

    /// The endpoint that is not `v`, if `v` is an endpoint.
    pub fn other(&self, v: NodeId) -> Option<NodeId> {
        if self.a == v {
            Some(self.b)
        } else if self.b == v {
            Some(self.a)
        } else {
            None
        }
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        self.b.0 < n
    }

    /// Dense index of this link among the `n(n-1)/2` clique links.
    pub fn index(&self, n: usize) -> usize {
        let (a, b) = (self.a.0, self.b.0);
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// Number of links in a clique on `n` nodes.
pub fn clique_link_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All links of the clique on `n` nodes in canonical order.
pub fn clique_links(n: usize) -> impl Iterator<Item = Link> {
    (0..n).flat_map(move |a| {
        (a + 1..n).map(move |b| Link {
            a: NodeId(a),
            b: NodeId(b),
        })
    })
}

/// The `n - 1` links incident to `v` in a clique, ordered by the other endpoint.
pub fn clique_incident_links(n: usize, v: NodeId) -> impl Iterator<Item = Link> {
    (0..n)
        .filter(move |&u| u != v.0)
        .map(move |u| Link::new(u, v).expect("distinct endpoints"))
}

/// Which procedure produced a [`FailureScenario`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioSource {
    Ran,
    Ecl,
    LoopForcer,
    PrefixAttack,
    ChainAttack,
    Pigeonhole,
    Manual,
    BruteForce,
}

impl ScenarioSource {
    pub const ALL: [ScenarioSource; 8] = [
        ScenarioSource::Ran,
        ScenarioSource::Ecl,
        ScenarioSource::LoopForcer,
        ScenarioSource::PrefixAttack,
        ScenarioSource::ChainAttack,
        ScenarioSource::Pigeonhole,
        ScenarioSource::Manual,
        ScenarioSource::BruteForce,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioSource::Ran => "Ran",
            ScenarioSource::Ecl => "Ecl",
            ScenarioSource::LoopForcer => "LoopForcer",
            ScenarioSource::PrefixAttack => "PrefixAttack",
            ScenarioSource::ChainAttack => "ChainAttack",
            ScenarioSource::Pigeonhole => "Pigeonhole",
            ScenarioSource::Manual => "Manual",
            ScenarioSource::BruteForce => "BruteForce",
        }
    }
}

impl fmt::Display for ScenarioSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioSource::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario source `{s}`")))
    }
}

/// An ordered, duplicate-free set of failed links.
///
/// Insertion order is kept so that adaptive constructions can be replayed
/// step by step. The failure budget used is `links().len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureScenario {
    n: usize,
    links: Vec<Link>,
    members: BTreeSet<Link>,
    source: ScenarioSource,
    seed: Option<u64>,
}

impl FailureScenario {
    pub fn new(n: usize, source: ScenarioSource, seed: Option<u64>) -> Self {
        FailureScenario {
            n,
            links: Vec::new(),
            members: BTreeSet::new(),
            source,
            seed,
        }
    }

    /// Builds a scenario from a list of links, rejecting duplicates and links
    /// outside the clique.
    pub fn from_links(
        n: usize,
        links: impl IntoIterator<Item = Link>,
        source: ScenarioSource,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut s = FailureScenario::new(n, source, seed);
        for link in links {
            if !s.insert(link)? {
                return Err(Error::DuplicateLink {
                    a: link.a.0,
                    b: link.b.0,
                });
            }
        }
        Ok(s)
    }

    /// Appends a link. Returns `false` if it was already present.
    pub fn insert(&mut self, link: Link) -> Result<bool> {
        if !link.is_valid_for(self.n) {
            return Err(Error::InvalidLink {
                a: link.a.0,
                b: link.b.0,
                n: self.n,
            });
        }
        if !self.members.insert(link) {
            return Ok(false);
        }
        self.links.push(link);
        Ok(true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains(&self, link: &Link) -> bool {
        self.members.contains(link)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn source(&self) -> ScenarioSource {
        self.source
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_source(mut self, source: ScenarioSource) -> Self {
        self.source = source;
        self
    }

    /// Serializes to the line-oriented text format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        text.parse()
    }
}

impl fmt::Display for FailureScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} source={} seed=", self.n, self.source)?;
        match self.seed {
            Some(s) => writeln!(f, "{s}")?,
            None => writeln!(f, "none")?,
        }
        for l in &self.links {
            writeln!(f, "{} {}", l.a, l.b)?;
        }
        Ok(())
    }
}

impl FromStr for FailureScenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
        let fields = parse_header(header, 1, &["n", "source", "seed"])?;
        let n: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(1, format!("bad node count `{}`", fields[0])))?;
        let source: ScenarioSource = fields[1]
            .parse()
            .map_err(|_| parse_err(1, "bad source tag"))?;
        let seed = parse_seed(fields[2], 1)?;
        let mut scenario = FailureScenario::new(n, source, seed);
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(lineno, "expected `a b`"));
            };
            let a: usize = a.parse().map_err(|_| parse_err(lineno, "bad node index"))?;
            let b: usize = b.parse().map_err(|_| parse_err(lineno, "bad node index"))?;
            let link =
                Link::new(a, b).map_err(|_| parse_err(lineno, format!("self-link ({a}, {b})")))?;
            if !scenario.insert(link)? {
                return Err(parse_err(lineno, format!("duplicate link ({a}, {b})")));
            }
        }
        Ok(scenario)
    }
}

/// Splits a `k1=v1 k2=v2 ...` header, checking the keys in order.
pub(crate) fn parse_header<'a>(
    header: &'a str,
    line: usize,
    keys: &[&str],
) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != keys.len() {
        return Err(parse_err(line, format!("expected header fields {keys:?}")));
    }
    parts
        .iter()
        .zip(keys)
        .map(|(part, key)| {
            part.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| parse_err(line, format!("expected `{key}=...`, found `{part}`")))
        })
        .collect()
}

pub(crate) fn parse_seed(s: &str, line: usize) -> Result<Option<u64>> {
    if s == "none" {
        Ok(None)
    } else {
        s.parse()
            .map(Some)
            .map_err(|_| parse_err(line, format!("bad seed `{s}`")))
    }
}

/// A clique on `n` nodes with a set of failed links.
#[derive(Clone, Debug)]
pub struct Topology {
    n: usize,
    failed: BTreeSet<Link>,
    // Row-major n x n; `true` if the link is up. Diagonal is always false.
    alive: Vec<bool>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.failed == other.failed
    }
}

impl Eq for Topology {}

impl Topology {
    /// Full mesh on `n >= 3` nodes with no failures.
    pub fn clique(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidSize { n, min: 3 });
        }
        let mut alive = vec![true; n * n];
        for v in 0..n {
            alive[v * n + v] = false;
        }
        Ok(Topology {
            n,
            failed: BTreeSet::new(),
            alive,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn failed(&self) -> &BTreeSet<Link> {
        &self.failed
    }

    /// New topology with the scenario's links additionally failed.
    pub fn apply(&self, scenario: &FailureScenario) -> Result<Topology> {
        if scenario.n() != self.n {
            return Err(Error::SizeMismatch {
                scenario: scenario.n(),
                topology: self.n,
            });
        }
        self.with_failed(scenario.links().iter().copied())
    }

    /// New topology with the given links additionally failed.
    pub fn with_failed(&self, links: impl IntoIterator<Item = Link>) -> Result<Topology> {
        let mut out = self.clone();
        for link in links {
            out.fail(link)?;
        }
        Ok(out)
    }

    fn fail(&mut self, link: Link) -> Result<()> {
        if !link.is_valid_for(self.n) {
            return Err(Error::InvalidLink {
                a: link.a.0,
                b: link.b.0,
                n: self.n,
            });
        }
        let (a, b) = (link.a.0, link.b.0);
        self.alive[a * self.n + b] = false;
        self.alive[b * self.n + a] = false;
        self.failed.insert(link);
        Ok(())
    }

    /// Whether the link between `u` and `v` is up. `false` for `u == v` or
    /// out-of-range nodes.
    #[inline]
    pub fn is_alive(&self, u: NodeId, v: NodeId) -> bool {
        u.0 < self.n && v.0 < self.n && self.alive[u.0 * self.n + v.0]
    }

    pub fn is_failed(&self, link: &Link) -> bool {
        self.failed.contains(link)
    }

    /// Surviving links at `v`.
    pub fn incident_links(&self, v: NodeId) -> Vec<Link> {
        self.neighbors(v)
            .map(|u| Link::new(u, v).expect("distinct endpoints"))
            .collect()
    }

    /// Surviving neighbours of `v` in increasing index order.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let row = &self.alive[v.0 * self.n..(v.0 + 1) * self.n];
        row.iter()
            .enumerate()
            .filter(|(_, &up)| up)
            .map(|(u, _)| NodeId(u))
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.neighbors(v).count()
    }

    pub fn alive_link_count(&self) -> usize {
        clique_link_count(self.n) - self.failed.len()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([NodeId(0)]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if !seen[v.0] {
                    seen[v.0] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Exact global minimum edge cut of the surviving graph (0 if it is
    /// disconnected).
    pub fn mincut(&self) -> usize {
        let n = self.n;
        let mut weight: Vec<Vec<u32>> = (0..n)
            .map(|u| (0..n).map(|v| u32::from(self.alive[u * n + v])).collect())
            .collect();
        stoer_wagner(&mut weight) as usize
    }

    /// Maximum number of edge-disjoint `src -> dst` paths.
    pub fn disjoint_paths(&self, src: NodeId, dst: NodeId) -> Result<usize> {
        if src == dst {
            return Err(Error::SameEndpoints(src));
        }
        for v in [src, dst] {
            if v.0 >= self.n {
                return Err(Error::NodeOutOfRange {
                    node: v.0,
                    n: self.n,
                });
            }
        }
        let mut flow = UnitFlow::new(self);
        Ok(flow.max_flow(src.0, dst.0))
    }
}

/// Stoer-Wagner minimum cut on a dense symmetric weight matrix. The matrix is
/// consumed as scratch space.
fn stoer_wagner(weight: &mut [Vec<u32>]) -> u32 {
    let n = weight.len();
    if n < 2 {
        return 0;
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut best = u32::MAX;
    let mut key = vec![0u32; n];
    let mut added = vec![false; n];
    while active.len() > 1 {
        for &v in &active {
            key[v] = 0;
            added[v] = false;
        }
        let mut prev = active[0];
        let mut last = active[0];
        for step in 0..active.len() {
            let next = active
                .iter()
                .copied()
                .filter(|&v| !added[v])
                .max_by_key(|&v| (key[v], std::cmp::Reverse(v)))
                .expect("an unadded vertex remains");
            added[next] = true;
            if step + 1 == active.len() {
                best = best.min(key[next]);
                last = next;
            } else {
                prev = next;
                for &v in &active {
                    if !added[v] {
                        key[v] += weight[next][v];
                    }
                }
            }
        }
        // Merge `last` into `prev`.
        for &v in &active {
            if v != prev && v != last {
                let w = weight[last][v];
                weight[prev][v] += w;
                weight[v][prev] += w;
            }
        }
        active.retain(|&v| v != last);
        if best == 0 {
            break;
        }
    }
    best
}

/// Dinic's max-flow on the surviving links, each with capacity 1 per
/// direction.
struct UnitFlow {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<u8>,
    next: Vec<usize>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl UnitFlow {
    fn new(t: &Topology) -> Self {
        let n = t.n;
        let mut g = UnitFlow {
            head: vec![NIL; n],
            to: Vec::new(),
            cap: Vec::new(),
            next: Vec::new(),
            level: vec![-1; n],
            iter: vec![NIL; n],
        };
        for u in 0..n {
            for v in u + 1..n {
                if t.alive[u * n + v] {
                    g.arc(u, v);
                    g.arc(v, u);
                }
            }
        }
        g
    }

    fn arc(&mut self, u: usize, v: usize) {
        self.to.push(v);
        self.cap.push(1);
        self.next.push(self.head[u]);
        self.head[u] = self.to.len() - 1;
    }

    // Arcs are added in pairs, so `e ^ 1` is the reverse of `e`.
    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let mut e = self.head[u];
            while e != NIL {
                let v = self.to[e];
                if self.cap[e] > 0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
                e = self.next[e];
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize) -> bool {
        if u == t {
            return true;
        }
        while self.iter[u] != NIL {
            let e = self.iter[u];
            let v = self.to[e];
            if self.cap[e] > 0 && self.level[v] == self.level[u] + 1 && self.dfs(v, t) {
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                return true;
            }
            self.iter[u] = self.next[e];
        }
        false
    }

    fn max_flow(&mut self, s: usize, t: usize) -> usize {
        let mut flow = 0;
        while self.bfs(s, t) {
            self.iter.clone_from(&self.head);
            while self.dfs(s, t) {
                flow += 1;
            }
        }
        flow
    }
}
