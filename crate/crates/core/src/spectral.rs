//! Distributed estimation of the node count, the algebraic connectivity and
//! the Fiedler vector from powers of the Perron matrix `D = I - alpha L`.
//!
//! Every round is synchronous: all nodes read the round-k states of their
//! neighbors and produce round-(k+1) states. Nodes exchange identifier sets and
//! their current row of `D^k`, nothing else.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, LaplacianMatrix, WeightedGraph};
use crate::linalg::{self, Matrix};

/// `||P^k||` values below this are dominated by rounding in `D^k - 11^T/n`;
/// estimation stops once the norm falls under it.
pub const NORM_FLOOR: f64 = 1e-11;

/// Eigenvalue gap under which the Fiedler direction is reported degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerIterationParams {
    /// Step size. `None` selects `1 / (2 d_max)` with `d_max` found by
    /// max-consensus over weighted degrees.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub k_max: usize,
    /// Stop once the relative change of the estimate drops below this.
    pub rho_tolerance: f64,
}

impl Default for PowerIterationParams {
    fn default() -> Self {
        Self {
            alpha: None,
            k_max: 500,
            rho_tolerance: 1e-3,
        }
    }
}

impl PowerIterationParams {
    pub(crate) fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a > 0.0) {
                out.push(format!("alpha must be positive, got {a}"));
            }
        }
        if self.k_max == 0 {
            out.push("k_max must be at least 1".into());
        }
        if !(self.rho_tolerance.is_finite() && self.rho_tolerance > 0.0) {
            out.push(format!(
                "rho_tolerance must be positive, got {}",
                self.rho_tolerance
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeflatedPerron {
    pub alpha: f64,
    /// `D = I - alpha L`.
    pub d_matrix: Matrix,
    /// `P = D - 11^T / n`.
    pub p_matrix: Matrix,
    /// False when `alpha` is so large that the spectral radius of `P` is no
    /// longer set by `lambda2`.
    pub valid: bool,
}

pub fn deflated_perron(l: &LaplacianMatrix, alpha: f64) -> Result<DeflatedPerron> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParams(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let n = l.n();
    let d_matrix = Matrix::from_fn(n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - alpha * l[(i, j)]
    });
    let inv_n = 1.0 / n.max(1) as f64;
    let p_matrix = Matrix::from_fn(n, |i, j| d_matrix[(i, j)] - inv_n);
    let valid = if n < 2 {
        true
    } else {
        let eig = linalg::symmetric_eigen(l)?.eigenvalues;
        // rho(P) = 1 - alpha*lambda2 requires |1 - alpha*lambda_n| <= 1 - alpha*lambda2.
        alpha * (eig[1] + eig[n - 1]) <= 2.0 + 1e-12
    };
    Ok(DeflatedPerron {
        alpha,
        d_matrix,
        p_matrix,
        valid,
    })
}

impl DeflatedPerron {
    pub fn n(&self) -> usize {
        self.d_matrix.n()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(linalg::symmetric_eigen(&self.p_matrix)?
            .eigenvalues
            .iter()
            .fold(0.0, |m, v| f64::max(m, v.abs())))
    }

    /// `(1 - rho(P)) / alpha`.
    pub fn lambda2_from_radius(&self) -> Result<f64> {
        Ok((1.0 - self.spectral_radius()?) / self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralNodeState {
    pub node_id: usize,
    /// Row `node_id` of `D^k`, keyed by discovered identifier. The key set is
    /// the identifier set.
    pub d_row: BTreeMap<usize, f64>,
    pub k: usize,
    pub n_hat: Option<usize>,
    /// Round at which the identifier set first stopped growing.
    pub discovered_at: Option<usize>,
    pub lambda2_hat: Option<f64>,
    pub fiedler_hat: Option<Vec<f64>>,
}

impl SpectralNodeState {
    pub fn new(node_id: usize) -> Self {
        Self {
            node_id,
            d_row: BTreeMap::from([(node_id, 1.0)]),
            k: 0,
            n_hat: None,
            discovered_at: None,
            lambda2_hat: None,
            fiedler_hat: None,
        }
    }

    pub fn id_set(&self) -> BTreeSet<usize> {
        self.d_row.keys().copied().collect()
    }

    pub fn id_count(&self) -> usize {
        self.d_row.len()
    }
}

pub fn init_states(n: usize) -> Vec<SpectralNodeState> {
    (0..n).map(SpectralNodeState::new).collect()
}

fn closed_neighborhood(g: &WeightedGraph, i: usize) -> impl Iterator<Item = usize> + '_ {
    std::iter::once(i).chain(g.neighbors(i, 0.0))
}

fn advance(states: &[SpectralNodeState], g: &WeightedGraph, d: Option<&Matrix>) -> Vec<SpectralNodeState> {
    states
        .iter()
        .enumerate()
        .map(|(i, own)| {
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for j in closed_neighborhood(g, i) {
                let coeff = d.map_or(0.0, |d| d[(i, j)]);
                for (&id, &value) in &states[j].d_row {
                    *row.entry(id).or_insert(0.0) += coeff * value;
                }
            }
            if d.is_none() {
                for (id, value) in row.iter_mut() {
                    *value = own.d_row.get(id).copied().unwrap_or(0.0);
                }
            }
            let mut next = own.clone();
            next.k += 1;
            if next.n_hat.is_none() && row.len() == own.d_row.len() {
                next.n_hat = Some(row.len());
                next.discovered_at = Some(next.k);
            }
            next.d_row = row;
            next
        })
        .collect()
}

/// One synchronous round of the distributed matrix-power update. Newly
/// discovered identifiers enter with value 0 before the update, so each row
/// stays exactly equal to the corresponding row of `D^(k+1)`.
pub fn matrix_power_round(
    states: &[SpectralNodeState],
    g: &WeightedGraph,
    dp: &DeflatedPerron,
) -> Vec<SpectralNodeState> {
    advance(states, g, Some(&dp.d_matrix))
}

/// Identifier flooding only: row values are carried over unchanged.
pub fn discovery_round(states: &[SpectralNodeState], g: &WeightedGraph) -> Vec<SpectralNodeState> {
    advance(states, g, None)
}

/// The node count, once the identifier set has stopped growing. On a
/// disconnected graph this is the size of the node's component.
pub fn detect_count(state: &SpectralNodeState) -> Option<usize> {
    state.n_hat
}

pub fn max_consensus_round(values: &[f64], g: &WeightedGraph) -> Vec<f64> {
    (0..values.len())
        .map(|i| closed_neighborhood(g, i).map(|j| values[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

fn max_consensus(values: &[f64], g: &WeightedGraph, rounds: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    for _ in 0..rounds {
        v = max_consensus_round(&v, g);
    }
    v
}

/// Absolute row sum of `P^k` at this node, treating undiscovered entries as 0.
pub fn row_norm_term(state: &SpectralNodeState, n: usize) -> f64 {
    let inv_n = 1.0 / n as f64;
    let known: f64 = state.d_row.values().map(|d| (d - inv_n).abs()).sum();
    let missing = n.saturating_sub(state.id_count()) as f64 * inv_n;
    known + missing
}

/// `(1 - norm^(1/k)) / alpha`, with the root taken through the logarithm.
pub fn lambda2_from_norm(norm: f64, k: usize, alpha: f64) -> f64 {
    let rho = if norm > 0.0 {
        (norm.ln() / k as f64).exp()
    } else {
        0.0
    };
    (1.0 - rho) / alpha
}

/// Computes each node's row term, spreads the maximum by max-consensus and
/// stores `lambda2_hat` in every state. Returns the per-node norm values.
pub fn estimate_lambda2(
    states: &mut [SpectralNodeState],
    g: &WeightedGraph,
    alpha: f64,
) -> Result<Vec<f64>> {
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let k = first.k;
    if k == 0 {
        return Err(Error::ZeroRound);
    }
    let mut terms = Vec::with_capacity(states.len());
    let mut rounds = 0;
    for s in states.iter() {
        let n = s.n_hat.ok_or_else(|| {
            Error::InvalidParams(format!("node {} has not discovered n", s.node_id))
        })?;
        rounds = rounds.max(n.saturating_sub(1));
        terms.push(row_norm_term(s, n));
    }
    let norms = max_consensus(&terms, g, rounds);
    for (s, &norm) in states.iter_mut().zip(&norms) {
        // A lone node has lambda2 = 0 by convention.
        let lone = s.n_hat == Some(1);
        s.lambda2_hat = Some(if lone { 0.0 } else { lambda2_from_norm(norm, k, alpha) });
    }
    Ok(norms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiedlerEstimate {
    pub lambda2: f64,
    pub lambda3: Option<f64>,
    /// Unit vector in identifier order, first non-negligible entry positive.
    pub vector: Vec<f64>,
    pub degenerate: bool,
    /// Power of `D` the vector was extracted from.
    pub power: usize,
}

/// Flood `(row id, row)` pairs for `n` rounds; every node then assembles the
/// full matrix, which is symmetrized and eigendecomposed locally.
///
/// All states must be at the same round `k >= 1`. Results are stored in each
/// state's `fiedler_hat` and returned per node.
pub fn estimate_fiedler(
    states: &mut [SpectralNodeState],
    g: &WeightedGraph,
    alpha: f64,
) -> Result<Vec<FiedlerEstimate>> {
    let k = states.first().map_or(0, |s| s.k);
    if k == 0 {
        return Err(Error::ZeroRound);
    }
    let n_flood = states.iter().filter_map(|s| s.n_hat).max().unwrap_or(1);
    let mut known: Vec<BTreeMap<usize, BTreeMap<usize, f64>>> = states
        .iter()
        .map(|s| BTreeMap::from([(s.node_id, s.d_row.clone())]))
        .collect();
    for _ in 0..n_flood {
        known = (0..known.len())
            .map(|i| {
                let mut merged = known[i].clone();
                for j in g.neighbors(i, 0.0) {
                    for (id, row) in &known[j] {
                        merged.entry(*id).or_insert_with(|| row.clone());
                    }
                }
                merged
            })
            .collect();
    }

    let mut out = Vec::with_capacity(states.len());
    let mut memo: Option<(Matrix, Vec<usize>, FiedlerEstimate)> = None;
    for (state, rows) in states.iter_mut().zip(&known) {
        let ids: Vec<usize> = rows
            .values()
            .flat_map(|r| r.keys().copied())
            .chain(rows.keys().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        let mut m = Matrix::zeros(ids.len());
        for (rid, row) in rows {
            for (cid, v) in row {
                m[(index[rid], index[cid])] = *v;
            }
        }
        let est = match &memo {
            Some((pm, pids, pe)) if *pm == m && *pids == ids => pe.clone(),
            _ => {
                let e = fiedler_from_power(&m, k, alpha)?;
                memo = Some((m, ids, e.clone()));
                e
            }
        };
        state.fiedler_hat = Some(est.vector.clone());
        out.push(est);
    }
    Ok(out)
}

fn fiedler_from_power(m: &Matrix, k: usize, alpha: f64) -> Result<FiedlerEstimate> {
    let n = m.n();
    if n < 2 {
        return Ok(FiedlerEstimate {
            lambda2: 0.0,
            lambda3: None,
            vector: vec![0.0; n],
            degenerate: false,
            power: k,
        });
    }
    let sym = Matrix::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let dec = linalg::symmetric_eigen(&sym)?;
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let ones_idx = (0..n)
        .max_by(|&a, &b| {
            let ca = dec.eigenvectors[a].iter().sum::<f64>().abs();
            let cb = dec.eigenvectors[b].iter().sum::<f64>().abs();
            ca.total_cmp(&cb)
        })
        .expect("n >= 2");
    // Remaining eigenpairs, largest eigenvalue of D^k first.
    let mut rest: Vec<usize> = (0..n).filter(|&p| p != ones_idx).collect();
    rest.sort_by(|&a, &b| dec.eigenvalues[b].total_cmp(&dec.eigenvalues[a]));
    let to_lambda = |mu: f64| (1.0 - mu.max(0.0).powf(1.0 / k as f64)) / alpha;
    let lambda2 = to_lambda(dec.eigenvalues[rest[0]]).max(0.0);
    let lambda3 = rest.get(1).map(|&p| to_lambda(dec.eigenvalues[p]));
    let mut vector = dec.eigenvectors[rest[0]].clone();
    let mean = vector.iter().sum::<f64>() * inv_sqrt_n * inv_sqrt_n;
    vector.iter_mut().for_each(|x| *x -= mean);
    let len = linalg::norm(&vector);
    if len > 0.0 {
        vector.iter_mut().for_each(|x| *x /= len);
    }
    linalg::apply_sign_convention(&mut vector);
    Ok(FiedlerEstimate {
        lambda2,
        lambda3,
        vector,
        degenerate: lambda3.is_some_and(|l3| (l3 - lambda2).abs() < DEGENERACY_GAP),
        power: k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    NormFloor,
    MaxRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    pub node: usize,
    pub stage: String,
    pub ids: usize,
    pub p_i: f64,
    pub lambda2_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationOutcome {
    pub n_hat: Vec<Option<usize>>,
    pub discovered_at: Vec<Option<usize>>,
    pub d_max_hat: f64,
    pub alpha: f64,
    /// Power rounds executed.
    pub rounds: usize,
    /// Synchronous message rounds in total, including discovery, every
    /// max-consensus sub-round and the Fiedler flooding.
    pub message_rounds: usize,
    pub stop: StopReason,
    pub lambda2_hat: Vec<f64>,
    /// Network-wide estimate after each power round `k = 1, 2, ...`.
    pub history: Vec<f64>,
    pub fiedler: Option<FiedlerEstimate>,
    pub trace: Vec<TraceRecord>,
}

/// Full protocol on a fixed graph:
///
/// 1. identifier flooding together with max-consensus of the weighted degree
///    until every node has seen its identifier set stop growing;
/// 2. matrix-power rounds from `D^0 = I`, each followed by max-consensus of the
///    row norms, until the stopping rule fires;
/// 3. when `with_fiedler` is set, Fiedler extraction from `D^K` where `K` is
///    the largest discovery round.
pub fn run_distributed_estimation(
    g: &WeightedGraph,
    params: &PowerIterationParams,
    with_fiedler: bool,
    trace: bool,
) -> Result<EstimationOutcome> {
    params.validate()?;
    let n = g.n();
    let mut records = Vec::new();
    let mut message_rounds = 0;

    let mut disc = init_states(n);
    let mut degree: Vec<f64> = (0..n).map(|i| g.weighted_degree(i)).collect();
    while disc.iter().any(|s| s.n_hat.is_none()) {
        disc = discovery_round(&disc, g);
        degree = max_consensus_round(&degree, g);
        message_rounds += 1;
        if trace {
            for s in &disc {
                records.push(TraceRecord {
                    round: s.k,
                    node: s.node_id,
                    stage: "discovery".into(),
                    ids: s.id_count(),
                    p_i: f64::NAN,
                    lambda2_hat: None,
                });
            }
        }
    }
    let d_max_hat = degree.iter().copied().fold(0.0, f64::max);
    let alpha = params
        .alpha
        .unwrap_or(if d_max_hat > 0.0 { 0.5 / d_max_hat } else { 1.0 });
    let dp = deflated_perron(&laplacian(g), alpha)?;
    let k_full = disc.iter().filter_map(|s| s.discovered_at).max().unwrap_or(1);

    let mut states: Vec<SpectralNodeState> = disc
        .iter()
        .map(|d| SpectralNodeState {
            n_hat: d.n_hat,
            discovered_at: d.discovered_at,
            ..SpectralNodeState::new(d.node_id)
        })
        .collect();
    let mut history = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    let mut snapshot = None;
    let mut stop = StopReason::MaxRounds;
    for k in 1..=params.k_max {
        states = matrix_power_round(&states, g, &dp);
        let norms = estimate_lambda2(&mut states, g, alpha)?;
        // One power round plus n - 1 max-consensus sub-rounds.
        message_rounds += states.iter().filter_map(|s| s.n_hat).max().unwrap_or(1);
        if k == k_full {
            snapshot = Some(states.clone());
        }
        let current: Vec<f64> = states.iter().map(|s| s.lambda2_hat.unwrap_or(0.0)).collect();
        history.push(current.iter().copied().fold(f64::INFINITY, f64::min));
        if trace {
            for (s, p) in states.iter().zip(&norms) {
                records.push(TraceRecord {
                    round: k,
                    node: s.node_id,
                    stage: "power".into(),
                    ids: s.id_count(),
                    p_i: *p,
                    lambda2_hat: s.lambda2_hat,
                });
            }
        }
        if k >= k_full.max(2) {
            if norms.iter().all(|&v| v <= NORM_FLOOR) {
                stop = StopReason::NormFloor;
                break;
            }
            if let Some(prev) = &previous {
                let settled = current
                    .iter()
                    .zip(prev)
                    .all(|(c, p)| (c - p).abs() < params.rho_tolerance * c.abs());
                if settled {
                    stop = StopReason::Converged;
                    break;
                }
            }
        }
        previous = Some(current);
    }
    let rounds = states.first().map_or(0, |s| s.k);

    let fiedler = if with_fiedler && n > 0 {
        let mut snap = match snapshot {
            Some(s) => s,
            None => {
                // Stopped before every row was complete; continue to K.
                let mut s = states.clone();
                while s[0].k < k_full {
                    s = matrix_power_round(&s, g, &dp);
                    message_rounds += 1;
                }
                s
            }
        };
        let est = estimate_fiedler(&mut snap, g, alpha)?;
        message_rounds += snap.iter().filter_map(|s| s.n_hat).max().unwrap_or(1);
        for (s, f) in states.iter_mut().zip(&snap) {
            s.fiedler_hat = f.fiedler_hat.clone();
        }
        est.into_iter().next()
    } else {
        None
    };

    Ok(EstimationOutcome {
        n_hat: disc.iter().map(|s| s.n_hat).collect(),
        discovered_at: disc.iter().map(|s| s.discovered_at).collect(),
        d_max_hat,
        alpha,
        rounds,
        message_rounds,
        stop,
        lambda2_hat: states.iter().map(|s| s.lambda2_hat.unwrap_or(0.0)).collect(),
        history,
        fiedler,
        trace: records,
    })
}

/// Writes trace records as `round,node,stage,ids,p_i,lambda2_hat`.
pub fn write_trace_csv(records: &[TraceRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "node", "stage", "|Id|", "P_i", "lambda2_hat"])?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            r.node.to_string(),
            r.stage.clone(),
            r.ids.to_string(),
            if r.p_i.is_nan() { String::new() } else { r.p_i.to_string() },
            r.lambda2_hat.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::algebraic_connectivity;

    fn path(n: usize) -> WeightedGraph {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        WeightedGraph::unweighted(n, &e).unwrap()
    }

    fn complete(n: usize) -> WeightedGraph {
        let e: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        WeightedGraph::unweighted(n, &e).unwrap()
    }

    fn run_rounds(g: &WeightedGraph, dp: &DeflatedPerron, k: usize) -> Vec<SpectralNodeState> {
        let mut s = init_states(g.n());
        for _ in 0..k {
            s = matrix_power_round(&s, g, dp);
        }
        s
    }

    #[test]
    fn deflated_perron_p3() {
        let dp = deflated_perron(&laplacian(&path(3)), 0.2).unwrap();
        let eig = linalg::symmetric_eigen(&dp.p_matrix).unwrap().eigenvalues;
        for (got, want) in eig.iter().zip([0.0, 0.4, 0.8]) {
            assert!((got - want).abs() < 1e-12, "{eig:?}");
        }
        assert!((dp.spectral_radius().unwrap() - 0.8).abs() < 1e-12);
        assert!((dp.lambda2_from_radius().unwrap() - 1.0).abs() < 1e-12);
        assert!(dp.valid);
    }

    #[test]
    fn deflated_perron_disconnected_pair() {
        let g = WeightedGraph::unweighted(2, &[]).unwrap();
        let dp = deflated_perron(&laplacian(&g), 0.3).unwrap();
        assert_eq!(dp.d_matrix, Matrix::identity(2));
        assert!((dp.spectral_radius().unwrap() - 1.0).abs() < 1e-12);
        assert!(dp.lambda2_from_radius().unwrap().abs() < 1e-12);
    }

    #[test]
    fn d_rows_sum_to_one() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 0.3), (1, 2, 0.9), (2, 3, 0.5), (0, 3, 0.2)]).unwrap();
        let dp = deflated_perron(&laplacian(&g), 0.4).unwrap();
        for i in 0..4 {
            assert_eq!(dp.d_matrix.row(i).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn oversized_alpha_is_flagged() {
        let dp = deflated_perron(&laplacian(&path(3)), 0.6).unwrap();
        assert!(!dp.valid);
        assert!(deflated_perron(&laplacian(&path(3)), 0.0).is_err());
    }

    #[test]
    fn first_round_on_p3() {
        let g = path(3);
        let dp = deflated_perron(&laplacian(&g), 0.2).unwrap();
        let s0 = init_states(3);
        assert_eq!(s0[1].d_row, BTreeMap::from([(1, 1.0)]));
        let s1 = matrix_power_round(&s0, &g, &dp);
        assert_eq!(s1[1].id_set(), BTreeSet::from([0, 1, 2]));
        let row: Vec<f64> = s1[1].d_row.values().copied().collect();
        assert_eq!(row, dp.d_matrix.row(1));
        assert_eq!(s1[0].id_set(), BTreeSet::from([0, 1]));
    }

    #[test]
    fn rows_match_central_powers() {
        let g = WeightedGraph::from_edges(
            5,
            &[(0, 1, 0.7), (1, 2, 1.0), (2, 3, 0.4), (3, 4, 0.9), (1, 4, 0.2)],
        )
        .unwrap();
        let dp = deflated_perron(&laplacian(&g), 0.25).unwrap();
        for k in [1, 3, 10] {
            let dk = dp.d_matrix.powi(k);
            let states = run_rounds(&g, &dp, k);
            for s in &states {
                for j in 0..5 {
                    let got = s.d_row.get(&j).copied().unwrap_or(0.0);
                    assert!((got - dk[(s.node_id, j)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn count_detection_examples() {
        let cases = [(path(5), 0usize, 5usize), (complete(5), 3, 2), (WeightedGraph::unweighted(1, &[]).unwrap(), 0, 1)];
        for (g, node, k_star) in cases {
            let mut s = init_states(g.n());
            for _ in 0..(k_star - 1) {
                s = discovery_round(&s, &g);
                assert_eq!(detect_count(&s[node]), None);
            }
            s = discovery_round(&s, &g);
            assert_eq!(detect_count(&s[node]), Some(g.n()));
            assert_eq!(s[node].discovered_at, Some(k_star));
        }
    }

    #[test]
    fn max_consensus_examples() {
        let g = path(3);
        let r1 = max_consensus_round(&[3.0, 1.0, 2.0], &g);
        assert_eq!(r1, vec![3.0, 3.0, 2.0]);
        assert_eq!(max_consensus_round(&r1, &g), vec![3.0; 3]);
        assert_eq!(max_consensus_round(&[4.0; 3], &g), vec![4.0; 3]);
        assert_eq!(max_consensus_round(&[1.0, 7.0, 2.0, 5.0], &complete(4)), vec![7.0; 4]);
    }

    #[test]
    fn estimate_requires_a_round() {
        let g = path(3);
        let mut s = init_states(3);
        assert!(matches!(estimate_lambda2(&mut s, &g, 0.2), Err(Error::ZeroRound)));
    }

    #[test]
    fn p3_estimate_converges_from_below() {
        let g = path(3);
        let params = PowerIterationParams {
            alpha: Some(0.2),
            ..Default::default()
        };
        let out = run_distributed_estimation(&g, &params, false, false).unwrap();
        assert!(out.history.iter().all(|&l| l <= 1.0 + 1e-9));
        assert!((out.lambda2_hat[0] - 1.0).abs() < 1e-3, "{:?}", out.lambda2_hat);
    }

    #[test]
    fn k2_estimate_limit() {
        let g = complete(2);
        let params = PowerIterationParams {
            alpha: Some(0.25),
            ..Default::default()
        };
        let out = run_distributed_estimation(&g, &params, false, false).unwrap();
        assert!((out.lambda2_hat[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn disconnected_estimate_is_zero() {
        let g = WeightedGraph::unweighted(2, &[]).unwrap();
        let dp = deflated_perron(&laplacian(&g), 0.3).unwrap();
        let mut s: Vec<_> = init_states(2)
            .into_iter()
            .map(|st| SpectralNodeState { n_hat: Some(2), ..st })
            .collect();
        for _ in 0..20 {
            s = matrix_power_round(&s, &g, &dp);
        }
        estimate_lambda2(&mut s, &g, 0.3).unwrap();
        assert!(s.iter().all(|st| st.lambda2_hat.unwrap().abs() < 1e-12));

        // Without global knowledge each node only discovers its component.
        let out = run_distributed_estimation(&g, &PowerIterationParams::default(), false, false).unwrap();
        assert_eq!(out.n_hat, vec![Some(1), Some(1)]);
        assert!(out.lambda2_hat.iter().all(|l| *l == 0.0));
    }

    #[test]
    fn fiedler_examples() {
        let s = 1.0 / 2f64.sqrt();
        for (g, expected) in [(path(3), vec![s, 0.0, -s]), (complete(2), vec![s, -s])] {
            let out = run_distributed_estimation(&g, &PowerIterationParams::default(), true, false).unwrap();
            let f = out.fiedler.unwrap();
            for (a, b) in f.vector.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9, "{:?}", f.vector);
            }
            let exact = algebraic_connectivity(&laplacian(&g));
            assert!((f.lambda2 - exact.lambda2).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_fiedler_is_flagged() {
        let out = run_distributed_estimation(&complete(4), &PowerIterationParams::default(), true, false).unwrap();
        assert!(out.fiedler.unwrap().degenerate);
    }

    #[test]
    fn slow_graph_error_shrinks_with_rounds() {
        let g = path(8);
        let exact = algebraic_connectivity(&laplacian(&g)).lambda2;
        let dp = deflated_perron(&laplacian(&g), 0.25).unwrap();
        let mut s: Vec<_> = init_states(8)
            .into_iter()
            .map(|st| SpectralNodeState { n_hat: Some(8), ..st })
            .collect();
        let mut err = Vec::new();
        for k in 1..=500 {
            s = matrix_power_round(&s, &g, &dp);
            if k == 50 || k == 500 {
                estimate_lambda2(&mut s, &g, 0.25).unwrap();
                err.push((exact - s[0].lambda2_hat.unwrap()).abs());
            }
        }
        assert!(err[1] < err[0], "{err:?}");
    }

    #[test]
    fn trace_csv_has_header() {
        let out = run_distributed_estimation(&path(3), &PowerIterationParams::default(), false, true).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("round,node,stage,|Id|,P_i,lambda2_hat\n"));
        assert!(text.contains(",discovery,") && text.contains(",power,"));
    }
}
