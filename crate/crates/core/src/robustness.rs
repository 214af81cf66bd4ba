//! Exact r-robustness analysis and spectral certificates.
//!
//! All combinatorial notions treat an edge as present when its weight is at
//! least `threshold`. Exact routines enumerate node subsets as bitmasks and are
//! limited to [`EXACT_NODE_LIMIT`] nodes.

use std::cell::Cell;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{algebraic_connectivity, laplacian, WeightedGraph};

pub const EXACT_NODE_LIMIT: usize = 16;

/// Slack used when turning the strict inequality `2(r-1) < lambda2` into an
/// integer, so eigenvalues of disconnected graphs computed as `1e-16` do not
/// certify 1-robustness.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSet {
    pub members: BTreeSet<usize>,
}

impl NodeSet {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        Self {
            members: members.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.contains(&node)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    fn check_within(&self, n: usize) -> Result<()> {
        match self.members.iter().find(|&&m| m >= n) {
            Some(&node) => Err(Error::NodeOutOfRange { node, n }),
            None => Ok(()),
        }
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self::new(iter)
    }
}

/// True iff some member of `s` has at least `r` neighbors outside `s`.
pub fn is_r_reachable(g: &WeightedGraph, s: &NodeSet, r: usize, threshold: f64) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    s.check_within(g.n())?;
    if r == 0 {
        return Ok(true);
    }
    Ok(s.iter().any(|i| {
        g.neighbors(i, threshold)
            .filter(|j| !s.contains(*j))
            .count()
            >= r
    }))
}

/// Bitmask view of a small unweighted graph.
struct SubsetTable {
    n: usize,
    full: u32,
    adjacency: Vec<u32>,
}

impl SubsetTable {
    fn new(g: &WeightedGraph, threshold: f64) -> Result<Self> {
        let n = g.n();
        if n > EXACT_NODE_LIMIT {
            return Err(Error::TooLarge {
                n,
                limit: EXACT_NODE_LIMIT,
            });
        }
        let adjacency = (0..n)
            .map(|i| g.neighbors(i, threshold).fold(0u32, |m, j| m | (1 << j)))
            .collect();
        Ok(Self {
            n,
            full: if n == 0 { 0 } else { (1u32 << n) - 1 },
            adjacency,
        })
    }

    /// For every subset `S`, the largest number of outside neighbors held by
    /// one member (so `S` is r-reachable iff the value is at least r).
    fn reach_degrees(&self) -> Vec<u8> {
        let mut out = vec![0u8; 1usize << self.n];
        for s in 1..=self.full {
            let outside = !s & self.full;
            let mut best = 0u32;
            let mut rest = s;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                best = best.max((self.adjacency[i] & outside).count_ones());
            }
            out[s as usize] = best as u8;
        }
        out
    }

    fn boundary(&self, s: u32) -> u32 {
        let outside = !s & self.full;
        let mut rest = s;
        let mut total = 0;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            total += (self.adjacency[i] & outside).count_ones();
        }
        total
    }
}

/// Calls `visit(s1, s2)` for each unordered pair of disjoint nonempty subsets
/// with `s1 < s2`, skipping `s1` when `skip(s1)` holds. Stops when `visit`
/// returns `false`.
fn for_each_disjoint_pair(
    table: &SubsetTable,
    mut skip: impl FnMut(u32) -> bool,
    mut visit: impl FnMut(u32, u32) -> bool,
) {
    for s1 in 1..=table.full {
        if skip(s1) {
            continue;
        }
        let comp = !s1 & table.full;
        // Submasks come out in decreasing order, so stop at the first one
        // not above s1.
        let mut s2 = comp;
        while s2 > s1 {
            if !visit(s1, s2) {
                return;
            }
            s2 = (s2 - 1) & comp;
        }
    }
}

/// True iff every pair of nonempty disjoint subsets contains an r-reachable
/// member set. By convention a graph with fewer than two nodes is only
/// 0-robust.
pub fn is_r_robust(g: &WeightedGraph, r: usize, threshold: f64) -> Result<bool> {
    let table = SubsetTable::new(g, threshold)?;
    if r == 0 {
        return Ok(true);
    }
    if table.n < 2 {
        return Ok(false);
    }
    let reach = table.reach_degrees();
    let mut robust = true;
    for_each_disjoint_pair(
        &table,
        |s1| reach[s1 as usize] as usize >= r,
        |_, s2| {
            if (reach[s2 as usize] as usize) < r {
                robust = false;
            }
            robust
        },
    );
    Ok(robust)
}

/// Largest r for which the graph is r-robust (0 for graphs with < 2 nodes).
pub fn max_robustness(g: &WeightedGraph, threshold: f64) -> Result<usize> {
    let table = SubsetTable::new(g, threshold)?;
    if table.n < 2 {
        return Ok(0);
    }
    let reach = table.reach_degrees();
    // Robustness never exceeds the best reachability of a singleton paired
    // with its complement.
    let best = Cell::new(u8::MAX);
    for_each_disjoint_pair(
        &table,
        |s1| reach[s1 as usize] >= best.get(),
        |s1, s2| {
            let value = reach[s1 as usize].max(reach[s2 as usize]);
            if value < best.get() {
                best.set(value);
            }
            best.get() > 0
        },
    );
    Ok(best.get() as usize)
}

/// Cheeger constant `min |boundary(S)| / |S|` over `0 < |S| <= n/2`.
/// Returns 0 for disconnected graphs and for graphs with fewer than 2 nodes.
pub fn isoperimetric_number(g: &WeightedGraph, threshold: f64) -> Result<f64> {
    let table = SubsetTable::new(g, threshold)?;
    if table.n < 2 {
        return Ok(0.0);
    }
    let half = table.n / 2;
    let mut best = f64::INFINITY;
    for s in 1..=table.full {
        let size = s.count_ones() as usize;
        if size > half {
            continue;
        }
        let ratio = table.boundary(s) as f64 / size as f64;
        if ratio < best {
            best = ratio;
        }
    }
    Ok(best)
}

/// Largest `r >= 0` with `2(r - 1) < lambda2`, i.e. the robustness implied by
/// the Cheeger bounds. `lambda2 > 4F` yields at least `2F + 1`.
pub fn certified_robustness_from_lambda2(lambda2: f64) -> usize {
    if !lambda2.is_finite() || lambda2 <= CERTIFICATE_SLACK {
        return 0;
    }
    ((lambda2 - CERTIFICATE_SLACK) / 2.0).ceil() as usize
}

pub fn check_f_total(adversaries: &NodeSet, f: usize) -> bool {
    adversaries.len() <= f
}

/// Every normal node has at most `f` adversarial neighbors.
pub fn check_f_local(g: &WeightedGraph, adversaries: &NodeSet, f: usize, threshold: f64) -> bool {
    (0..g.n())
        .filter(|i| !adversaries.contains(*i))
        .all(|i| {
            g.neighbors(i, threshold)
                .filter(|j| adversaries.contains(*j))
                .count()
                <= f
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub n: usize,
    pub edges: usize,
    pub threshold: f64,
    pub connected: bool,
    pub min_degree: usize,
    pub max_degree: usize,
    /// Exact maximum robustness, when requested and `n <= 16`.
    pub exact_r: Option<usize>,
    /// Cheeger constant, when `n <= 16`.
    pub isoperimetric: Option<f64>,
    /// Algebraic connectivity of the thresholded unit-weight graph.
    pub lambda2: f64,
    /// Algebraic connectivity of the weighted graph.
    pub weighted_lambda2: f64,
    pub certified_r: usize,
}

pub fn analyze(g: &WeightedGraph, threshold: f64, exact: bool) -> Result<RobustnessReport> {
    let unit = g.thresholded(threshold);
    let lambda2 = algebraic_connectivity(&laplacian(&unit)).lambda2;
    let weighted_lambda2 = algebraic_connectivity(&laplacian(g)).lambda2;
    let small = g.n() <= EXACT_NODE_LIMIT;
    let exact_r = if exact {
        Some(max_robustness(g, threshold)?)
    } else {
        None
    };
    let isoperimetric = if small {
        Some(isoperimetric_number(g, threshold)?)
    } else {
        None
    };
    Ok(RobustnessReport {
        n: g.n(),
        edges: g.edges(threshold).len(),
        threshold,
        connected: g.is_connected(threshold),
        min_degree: g.min_degree(threshold),
        max_degree: g.max_degree(threshold),
        exact_r,
        isoperimetric,
        lambda2,
        weighted_lambda2,
        certified_r: certified_robustness_from_lambda2(lambda2),
    })
}
