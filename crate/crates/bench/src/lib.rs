//! Fixtures shared by the benchmarks.

pub use ffsim_core;

use ffsim_core::adversary::{adv_ecl, adv_ran};
use ffsim_core::schemes::gen_rfs;
use ffsim_core::{FailoverMatrix, NodeId, Topology};

/// RFS towards `n - 1` and the clique with `phi` eclipse failures around it.
pub fn eclipse_fixture(n: usize, phi: usize, seed: u64) -> (FailoverMatrix, Topology) {
    let dst = NodeId(n - 1);
    let m = gen_rfs(n, dst, seed).expect("valid size");
    let s = adv_ecl(n, phi, dst, seed ^ 1).expect("phi <= n - 2");
    (m, Topology::clique(n).unwrap().apply(&s).unwrap())
}

/// Clique with `phi` uniformly random failures.
pub fn random_topology(n: usize, phi: usize, seed: u64) -> Topology {
    let s = adv_ran(n, phi, seed).expect("phi within link count");
    Topology::clique(n).unwrap().apply(&s).unwrap()
}
