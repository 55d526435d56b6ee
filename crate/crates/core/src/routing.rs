//! Forwarding under failures: per-flow path verdicts and per-link loads.
//!
//! Matrix schemes use cursor semantics. A packet of flow `(s, d)` carries a
//! position into row `s`; at every node it goes straight to `d` when that
//! link is up, otherwise it advances the position to the next entry that is
//! not `s`, `d` or the current node and whose link from the current node is
//! up. The position never moves backwards. Hop rules decide per node from
//! local state only.

use std::fmt;

use crate::error::{Error, Result};
use crate::schemes::{DestMode, FailoverMatrix, FlowId, HopRule};
use crate::topology::{clique_link_count, Link, NodeId, Topology};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathStatus {
    /// Full node path from source to destination.
    Delivered(Vec<NodeId>),
    /// Walk up to and including the first repeated node.
    Loop(Vec<NodeId>),
    /// Node at which no admissible next hop was left.
    Disconnected(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathVerdict {
    pub flow: FlowId,
    pub status: PathStatus,
}

impl PathVerdict {
    pub fn path(&self) -> Option<&[NodeId]> {
        match &self.status {
            PathStatus::Delivered(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_delivered(&self) -> bool {
        matches!(self.status, PathStatus::Delivered(_))
    }

    pub fn is_loop(&self) -> bool {
        matches!(self.status, PathStatus::Loop(_))
    }

    /// Last node before the destination on a delivered path.
    pub fn last_hop(&self) -> Option<NodeId> {
        self.path().map(|p| p[p.len() - 2])
    }
}

/// Traffic to route.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrafficPattern {
    /// One unit from every other node to `dst`.
    SingleDest(NodeId),
    /// One unit between every ordered pair.
    AllToAll,
}

impl TrafficPattern {
    pub fn flows(&self, n: usize) -> Vec<FlowId> {
        match *self {
            TrafficPattern::SingleDest(d) => (0..n)
                .map(NodeId)
                .filter(|&s| s != d)
                .map(|s| FlowId { src: s, dst: d })
                .collect(),
            TrafficPattern::AllToAll => (0..n)
                .flat_map(|s| {
                    (0..n).filter(move |&d| d != s).map(move |d| FlowId {
                        src: NodeId(s),
                        dst: NodeId(d),
                    })
                })
                .collect(),
        }
    }

    pub fn flow_count(&self, n: usize) -> usize {
        match self {
            TrafficPattern::SingleDest(_) => n - 1,
            TrafficPattern::AllToAll => n * (n - 1),
        }
    }
}

/// Anything that can forward a flow over a failed clique using local rules.
///
/// Adversaries talk to schemes only through this trait.
pub trait FailoverScheme {
    fn n(&self) -> Option<usize>;

    fn name(&self) -> String;

    fn supports(&self, pattern: TrafficPattern) -> bool;

    fn route(&self, t: &Topology, flow: FlowId) -> Result<PathVerdict>;
}

impl FailoverScheme for FailoverMatrix {
    fn n(&self) -> Option<usize> {
        Some(FailoverMatrix::n(self))
    }

    fn name(&self) -> String {
        self.scheme().to_string()
    }

    fn supports(&self, pattern: TrafficPattern) -> bool {
        match (self.mode(), pattern) {
            (DestMode::AllPairs, _) => true,
            (DestMode::SingleDest(d), TrafficPattern::SingleDest(p)) => d == p,
            (DestMode::SingleDest(_), TrafficPattern::AllToAll) => false,
        }
    }

    fn route(&self, t: &Topology, flow: FlowId) -> Result<PathVerdict> {
        route_matrix_flow(self, t, flow)
    }
}

impl FailoverScheme for HopRule {
    fn n(&self) -> Option<usize> {
        None
    }

    fn name(&self) -> String {
        HopRule::name(self).to_string()
    }

    fn supports(&self, _: TrafficPattern) -> bool {
        true
    }

    fn route(&self, t: &Topology, flow: FlowId) -> Result<PathVerdict> {
        route_hoprule_flow(*self, t, flow)
    }
}

fn check_flow(t: &Topology, flow: FlowId) -> Result<()> {
    for v in [flow.src, flow.dst] {
        if v.0 >= t.n() {
            return Err(Error::NodeOutOfRange {
                node: v.0,
                n: t.n(),
            });
        }
    }
    if flow.src == flow.dst {
        return Err(Error::SameEndpoints(flow.src));
    }
    Ok(())
}

pub fn route_matrix_flow(m: &FailoverMatrix, t: &Topology, flow: FlowId) -> Result<PathVerdict> {
    if m.n() != t.n() {
        return Err(Error::SizeMismatch {
            scenario: m.n(),
            topology: t.n(),
        });
    }
    check_flow(t, flow)?;
    let row = m.row(flow)?;
    let (src, dst) = (flow.src, flow.dst);
    let mut visited = vec![false; t.n()];
    visited[src.0] = true;
    let mut path = vec![src];
    let mut cur = src;
    let mut cursor = row.iter();
    let status = loop {
        if t.is_alive(cur, dst) {
            path.push(dst);
            break PathStatus::Delivered(path);
        }
        let next = cursor
            .by_ref()
            .copied()
            .find(|&e| e != src && e != dst && e != cur && t.is_alive(cur, e));
        let Some(next) = next else {
            break PathStatus::Disconnected(cur);
        };
        path.push(next);
        if std::mem::replace(&mut visited[next.0], true) {
            break PathStatus::Loop(path);
        }
        cur = next;
    };
    Ok(PathVerdict { flow, status })
}

pub fn route_hoprule_flow(rule: HopRule, t: &Topology, flow: FlowId) -> Result<PathVerdict> {
    check_flow(t, flow)?;
    let dst = flow.dst;
    let mut visited = vec![false; t.n()];
    visited[flow.src.0] = true;
    let mut path = vec![flow.src];
    let mut cur = flow.src;
    let status = loop {
        if t.is_alive(cur, dst) {
            path.push(dst);
            break PathStatus::Delivered(path);
        }
        let next = match rule.next_hop(cur, dst, t) {
            Ok(v) => v,
            Err(Error::NoNextHop(_)) => break PathStatus::Disconnected(cur),
            Err(e) => return Err(e),
        };
        path.push(next);
        if std::mem::replace(&mut visited[next.0], true) {
            break PathStatus::Loop(path);
        }
        cur = next;
    };
    Ok(PathVerdict { flow, status })
}

/// Aggregated outcome of routing a whole traffic pattern.
///
/// Link loads count every delivered flow crossing the undirected link, in
/// either direction. Node loads count delivered flows that pass through a
/// node as an intermediate hop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadReport {
    n: usize,
    link_load: Vec<u32>,
    node_load: Vec<u32>,
    pub flows: usize,
    pub delivered: usize,
    pub loops: usize,
    pub disconnected: usize,
    pub max_load: u32,
    pub total_path_length: u64,
}

impl LoadReport {
    pub fn empty(n: usize) -> Self {
        LoadReport {
            n,
            link_load: vec![0; clique_link_count(n)],
            node_load: vec![0; n],
            flows: 0,
            delivered: 0,
            loops: 0,
            disconnected: 0,
            max_load: 0,
            total_path_length: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn record(&mut self, verdict: &PathVerdict) {
        self.flows += 1;
        match &verdict.status {
            PathStatus::Delivered(path) => {
                self.delivered += 1;
                for hop in path.windows(2) {
                    let link = Link::new(hop[0], hop[1]).expect("paths have no self-hops");
                    let slot = &mut self.link_load[link.index(self.n)];
                    *slot += 1;
                    self.max_load = self.max_load.max(*slot);
                }
                for v in &path[1..path.len() - 1] {
                    self.node_load[v.0] += 1;
                }
                self.total_path_length += (path.len() - 1) as u64;
            }
            PathStatus::Loop(_) => self.loops += 1,
            PathStatus::Disconnected(_) => self.disconnected += 1,
        }
    }

    pub fn load(&self, link: Link) -> u32 {
        self.link_load[link.index(self.n)]
    }

    /// Links with non-zero load, in canonical order.
    pub fn per_link(&self) -> impl Iterator<Item = (Link, u32)> + '_ {
        crate::topology::clique_links(self.n)
            .zip(&self.link_load)
            .filter(|(_, &l)| l > 0)
            .map(|(link, &l)| (link, l))
    }

    /// All link loads indexed by [`Link::index`].
    pub fn link_loads(&self) -> &[u32] {
        &self.link_load
    }

    pub fn node_load(&self, v: NodeId) -> u32 {
        self.node_load[v.0]
    }

    pub fn node_loads(&self) -> &[u32] {
        &self.node_load
    }

    /// Highest node load and the lowest-index node attaining it.
    pub fn max_node_load(&self) -> (NodeId, u32) {
        let (v, l) = self
            .node_load
            .iter()
            .enumerate()
            .max_by_key(|(v, l)| (**l, std::cmp::Reverse(*v)))
            .expect("n >= 3");
        (NodeId(v), *l)
    }

    pub fn is_correct(&self) -> bool {
        self.loops == 0 && self.disconnected == 0
    }

    /// CSV with header `link_a,link_b,load`, one row per loaded link, then a
    /// `#` summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("link_a,link_b,load\n");
        for (link, load) in self.per_link() {
            out.push_str(&format!("{},{},{}\n", link.a(), link.b(), load));
        }
        out.push_str(&format!("{self}\n"));
        out
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "# max_load={} flows={} delivered={} loops={} disconnected={}",
            self.max_load, self.flows, self.delivered, self.loops, self.disconnected
        )
    }
}

/// Routes every flow of `pattern` independently and aggregates loads.
pub fn evaluate<S: FailoverScheme + ?Sized>(
    scheme: &S,
    t: &Topology,
    pattern: TrafficPattern,
) -> Result<LoadReport> {
    if let Some(n) = scheme.n() {
        if n != t.n() {
            return Err(Error::SizeMismatch {
                scenario: n,
                topology: t.n(),
            });
        }
    }
    if let TrafficPattern::SingleDest(d) = pattern {
        if d.0 >= t.n() {
            return Err(Error::NodeOutOfRange {
                node: d.0,
                n: t.n(),
            });
        }
    }
    if !scheme.supports(pattern) {
        return Err(Error::PatternMismatch(format!(
            "{} cannot serve {:?}",
            scheme.name(),
            pattern
        )));
    }
    let mut report = LoadReport::empty(t.n());
    for flow in pattern.flows(t.n()) {
        report.record(&scheme.route(t, flow)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{gen_dfs, gen_rfs, gen_rfs_allpairs, SchemeTag};
    use crate::topology::{FailureScenario, ScenarioSource};
    use itertools::Itertools;
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

    fn flow(s: usize, d: usize) -> FlowId {
        FlowId::new(s, d).unwrap()
    }

    /// Step-by-step interpreter of the cursor semantics, written without
    /// iterator shortcuts: the equivalence oracle for `route_matrix_flow`.
    fn interpret(row: &[NodeId], t: &Topology, f: FlowId) -> PathStatus {
        let mut path = vec![f.src];
        let mut current = f.src;
        let mut position = 0usize;
        let mut steps = 0;
        loop {
            steps += 1;
            assert!(steps <= 10 * t.n() + 10);
            if t.is_alive(current, f.dst) {
                path.push(f.dst);
                return PathStatus::Delivered(path);
            }
            let mut chosen = None;
            while position < row.len() {
                let candidate = row[position];
                position += 1;
                let usable = candidate != f.src
                    && candidate != f.dst
                    && candidate != current
                    && t.is_alive(current, candidate);
                if usable {
                    chosen = Some(candidate);
                    break;
                }
            }
            match chosen {
                None => return PathStatus::Disconnected(current),
                Some(next) => {
                    let repeated = path.contains(&next);
                    path.push(next);
                    if repeated {
                        return PathStatus::Loop(path);
                    }
                    current = next;
                }
            }
        }
    }

    #[test]
    fn direct_delivery_without_failures() {
        let t = Topology::clique(8).unwrap();
        let m = gen_rfs(8, NodeId(7), 1).unwrap();
        for s in 0..7 {
            let v = route_matrix_flow(&m, &t, flow(s, 7)).unwrap();
            assert_eq!(v.path().unwrap(), ids(&[s, 7]));
        }
    }

    #[test]
    fn dfs_reroutes_via_first_backup() {
        let m = gen_dfs(8, NodeId(7)).unwrap();
        let t = topo(8, &[(0, 7)]);
        let v = route_matrix_flow(&m, &t, flow(0, 7)).unwrap();
        assert_eq!(v.path().unwrap(), ids(&[0, 1, 7]));

        let t = topo(8, &[(0, 7), (1, 7)]);
        let v = route_matrix_flow(&m, &t, flow(0, 7)).unwrap();
        assert_eq!(v.path().unwrap(), ids(&[0, 1, 2, 7]));
    }

    #[test]
    fn dfs_skips_destination_entries_and_disconnects_when_exhausted() {
        // Row 6 of DFS(8) is [7, 0, 2]; 7 is the destination.
        let m = gen_dfs(8, NodeId(7)).unwrap();
        let t = topo(8, &[(6, 7), (0, 7), (2, 7)]);
        let v = route_matrix_flow(&m, &t, flow(6, 7)).unwrap();
        assert_eq!(v.status, PathStatus::Disconnected(NodeId(2)));
    }

    #[test]
    fn cursor_skips_failed_backup_links() {
        let m = FailoverMatrix::from_rows(
            6,
            DestMode::SingleDest(NodeId(5)),
            [(flow(0, 5), ids(&[1, 2, 3, 4]))],
            SchemeTag::Manual,
            None,
        )
        .unwrap();
        let t = topo(6, &[(0, 5), (0, 1), (2, 5), (2, 3)]);
        // 0 -x-> 1, so 0 -> 2; at 2 the dst link is down and 3 is unreachable
        // from 2, so the cursor moves on to 4.
        let v = route_matrix_flow(&m, &t, flow(0, 5)).unwrap();
        assert_eq!(v.path().unwrap(), ids(&[0, 2, 4, 5]));
    }

    #[test]
    fn malformed_rows_report_loops() {
        let m = FailoverMatrix::from_rows(
            5,
            DestMode::SingleDest(NodeId(4)),
            [(flow(0, 4), ids(&[1, 2, 1, 3]))],
            SchemeTag::Manual,
            None,
        )
        .unwrap();
        let t = topo(5, &[(0, 4), (1, 4), (2, 4)]);
        let v = route_matrix_flow(&m, &t, flow(0, 4)).unwrap();
        assert_eq!(v.status, PathStatus::Loop(ids(&[0, 1, 2, 1])));
        assert!(matches!(
            route_matrix_flow(&m, &t, flow(1, 4)),
            Err(Error::MissingRow(_))
        ));
    }

    #[test]
    fn rob_paths() {
        let t = topo(10, &[(0, 9)]);
        let v = route_hoprule_flow(HopRule::Rob, &t, flow(0, 9)).unwrap();
        assert_eq!(v.path().unwrap(), ids(&[0, 1, 9]));

        // 0 and 1 only see each other.
        let mut failed: Vec<(usize, usize)> = (2..10).map(|u| (0, u)).collect();
        failed.extend((2..10).map(|u| (1, u)));
        let t = topo(10, &failed);
        let v = route_hoprule_flow(HopRule::Rob, &t, flow(0, 9)).unwrap();
        match v.status {
            PathStatus::Loop(w) => {
                assert_eq!(w, ids(&[0, 1, 0]));
                assert_eq!(w.iter().filter(|&&x| x == NodeId(0)).count(), 2);
            }
            other => panic!("expected loop, got {other:?}"),
        }
    }

    #[test]
    fn isolated_source_is_disconnected() {
        let failed: Vec<(usize, usize)> = (1..6).map(|u| (0, u)).collect();
        let t = topo(6, &failed);
        for rule in [HopRule::Bal, HopRule::Rob] {
            let v = route_hoprule_flow(rule, &t, flow(0, 5)).unwrap();
            assert_eq!(v.status, PathStatus::Disconnected(NodeId(0)));
        }
    }

    #[test]
    fn evaluate_without_failures() {
        let n = 9;
        let t = Topology::clique(n).unwrap();
        let d = NodeId(n - 1);
        let rfs = gen_rfs(n, d, 4).unwrap();
        let dfs = gen_dfs(n, d).unwrap();
        let schemes: Vec<Box<dyn FailoverScheme>> = vec![
            Box::new(rfs),
            Box::new(dfs),
            Box::new(HopRule::Bal),
            Box::new(HopRule::Rob),
        ];
        for s in &schemes {
            let r = evaluate(s.as_ref(), &t, TrafficPattern::SingleDest(d)).unwrap();
            assert_eq!(r.max_load, 1);
            assert_eq!(r.delivered, n - 1);
            for u in 0..n - 1 {
                assert_eq!(r.load(Link::new(u, n - 1).unwrap()), 1);
            }
        }
        for s in [
            &HopRule::Bal as &dyn FailoverScheme,
            &HopRule::Rob,
            &gen_rfs_allpairs(n, 2).unwrap(),
        ] {
            let r = evaluate(s, &t, TrafficPattern::AllToAll).unwrap();
            assert_eq!(r.max_load, 2);
            assert!(r.link_loads().iter().all(|&l| l == 2));
        }
    }

    #[test]
    fn evaluate_rejects_mismatched_patterns() {
        let t = Topology::clique(8).unwrap();
        let dfs = gen_dfs(8, NodeId(7)).unwrap();
        assert!(matches!(
            evaluate(&dfs, &t, TrafficPattern::AllToAll),
            Err(Error::PatternMismatch(_))
        ));
        assert!(evaluate(&dfs, &t, TrafficPattern::SingleDest(NodeId(3))).is_err());
        assert!(evaluate(
            &dfs,
            &Topology::clique(9).unwrap(),
            TrafficPattern::SingleDest(NodeId(7))
        )
        .is_err());
    }

    #[test]
    fn matches_interpreter_exhaustively_small() {
        for n in 4..=6 {
            let d = NodeId(n - 1);
            let links: Vec<Link> = crate::topology::clique_links(n).collect();
            let mut matrices = vec![gen_dfs(n, d).unwrap()];
            matrices.extend((0..3).map(|s| gen_rfs(n, d, s).unwrap()));
            for m in &matrices {
                for k in 0..=2 {
                    for set in links.iter().copied().combinations(k) {
                        let t = Topology::clique(n).unwrap().with_failed(set).unwrap();
                        for (f, row) in m.rows() {
                            let got = route_matrix_flow(m, &t, f).unwrap().status;
                            assert_eq!(got, interpret(row, &t, f));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn csv_has_summary() {
        let t = topo(5, &[(0, 4)]);
        let r = evaluate(&HopRule::Rob, &t, TrafficPattern::SingleDest(NodeId(4))).unwrap();
        assert_eq!(
            r.to_csv(),
            "link_a,link_b,load\n0,1,1\n1,4,2\n2,4,1\n3,4,1\n\
             # max_load=2 flows=4 delivered=4 loops=0 disconnected=0\n"
        );
    }

    fn failure_set(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
        prop::collection::vec((0..n, 0..n), 0..(3 * n)).prop_map(|v| {
            v.into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .unique()
                .collect()
        })
    }

    proptest! {
        #[test]
        fn permutation_rows_never_loop(seed: u64, failed in failure_set(12)) {
            let t = topo(12, &failed);
            let m = gen_rfs(12, NodeId(11), seed).unwrap();
            let r = evaluate(&m, &t, TrafficPattern::SingleDest(NodeId(11))).unwrap();
            prop_assert_eq!(r.loops, 0);
            prop_assert_eq!(r.delivered + r.loops + r.disconnected, 11);
            let total: u64 = r.link_loads().iter().map(|&l| l as u64).sum();
            prop_assert_eq!(total, r.total_path_length);
            prop_assert_eq!(r.max_load, r.link_loads().iter().copied().max().unwrap());
            for f in TrafficPattern::SingleDest(NodeId(11)).flows(12) {
                if let Some(p) = route_matrix_flow(&m, &t, f).unwrap().path() {
                    prop_assert_eq!(p[0], f.src);
                    prop_assert_eq!(*p.last().unwrap(), f.dst);
                    prop_assert!(p.windows(2).all(|h| t.is_alive(h[0], h[1])));
                    prop_assert_eq!(p.iter().unique().count(), p.len());
                }
            }
        }

        #[test]
        fn hop_rule_conservation(failed in failure_set(10), rob: bool) {
            let t = topo(10, &failed);
            let rule = if rob { HopRule::Rob } else { HopRule::Bal };
            let r = evaluate(&rule, &t, TrafficPattern::AllToAll).unwrap();
            prop_assert_eq!(r.delivered + r.loops + r.disconnected, 90);
        }
    }
}
