//! Position-dependent weighted communication graphs and their Laplacians.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SpectralDecomposition};

/// Edge weight at or above which a link counts as present for combinatorial
/// (unweighted) analysis.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.01;

/// Range-dependent link model.
///
/// Strength is 1 inside `rho`, decays exponentially across `[rho, big_r)`
/// and is 0 from `big_r` on. The model is discontinuous at `big_r`: the left
/// limit is `exp(-gamma_c)`, not 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommParams {
    /// Full-strength radius (m).
    pub rho: f64,
    /// Maximum range (m).
    pub big_r: f64,
    /// Dimensionless decay rate.
    pub gamma_c: f64,
}

impl Default for CommParams {
    fn default() -> Self {
        Self {
            rho: 40.0,
            big_r: 120.0,
            gamma_c: 2.0,
        }
    }
}

impl CommParams {
    pub fn new(rho: f64, big_r: f64, gamma_c: f64) -> Result<Self> {
        let params = Self { rho, big_r, gamma_c };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.violations();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errors.join("; ")))
        }
    }

    pub(crate) fn violations(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if !(self.rho.is_finite() && self.big_r.is_finite() && self.gamma_c.is_finite()) {
            errors.push("comm params must be finite".to_string());
            return errors;
        }
        if self.rho <= 0.0 {
            errors.push(format!("comm.rho must be > 0 (got {})", self.rho));
        }
        if self.rho >= self.big_r {
            errors.push(format!(
                "comm.rho must be < comm.big_r (got rho={}, big_r={})",
                self.rho, self.big_r
            ));
        }
        if self.gamma_c <= 0.0 {
            errors.push(format!("comm.gamma_c must be > 0 (got {})", self.gamma_c));
        }
        errors
    }

    pub(crate) fn band_width(&self) -> f64 {
        self.big_r - self.rho
    }
}

/// Link strength at a given separation.
pub fn comm_strength(distance: f64, params: &CommParams) -> f64 {
    if distance < params.rho {
        1.0
    } else if distance >= params.big_r {
        0.0
    } else {
        (-params.gamma_c * (distance - params.rho) / params.band_width()).exp()
    }
}

/// Derivative of [`comm_strength`] with respect to distance. Zero on the flat
/// branches, including at and beyond `big_r`.
pub fn comm_strength_slope(distance: f64, params: &CommParams) -> f64 {
    if distance < params.rho || distance >= params.big_r {
        0.0
    } else {
        -params.gamma_c / params.band_width() * comm_strength(distance, params)
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric weighted adjacency with entries in `[0, 1]` and zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: Matrix,
}

impl WeightedGraph {
    pub fn from_matrix(weights: Matrix) -> Result<Self> {
        let n = weights.n();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidParams(format!(
                    "self-loop weight at node {i}"
                )));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidParams(format!(
                        "weight ({i},{j}) = {w} outside [0, 1]"
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(Error::NotSymmetric {
                        asymmetry: (w - weights[(j, i)]).abs(),
                    });
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(rows)?)
    }

    /// Unit-weight graph on `n` nodes from an undirected edge list.
    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let weighted: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        Self::from_edges(n, &weighted)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = Matrix::zeros(n);
        for &(i, j, w) in edges {
            for node in [i, j] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if i == j {
                return Err(Error::InvalidParams(format!("self-loop at node {i}")));
            }
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        Self::from_matrix(m)
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn has_edge(&self, i: usize, j: usize, threshold: f64) -> bool {
        i != j && self.weights[(i, j)] > 0.0 && self.weights[(i, j)] >= threshold
    }

    pub fn neighbors(&self, i: usize, threshold: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.has_edge(i, j, threshold))
    }

    pub fn degree(&self, i: usize, threshold: f64) -> usize {
        self.neighbors(i, threshold).count()
    }

    /// Row sum of the adjacency (signal strength).
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.weights.row(i).iter().sum()
    }

    pub fn max_weighted_degree(&self) -> f64 {
        (0..self.n())
            .map(|i| self.weighted_degree(i))
            .fold(0.0, f64::max)
    }

    pub fn min_degree(&self, threshold: f64) -> usize {
        (0..self.n())
            .map(|i| self.degree(i, threshold))
            .min()
            .unwrap_or(0)
    }

    pub fn max_degree(&self, threshold: f64) -> usize {
        (0..self.n())
            .map(|i| self.degree(i, threshold))
            .max()
            .unwrap_or(0)
    }

    /// Undirected edges `(i, j, w)` with `i < j` present at `threshold`.
    pub fn edges(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has_edge(i, j, threshold) {
                    out.push((i, j, self.weights[(i, j)]));
                }
            }
        }
        out
    }

    /// The unit-weight graph keeping edges present at `threshold`.
    pub fn thresholded(&self, threshold: f64) -> Self {
        let n = self.n();
        let m = Matrix::from_fn(n, |i, j| {
            if self.has_edge(i, j, threshold) {
                1.0
            } else {
                0.0
            }
        });
        Self { weights: m }
    }

    /// Sizes of connected components in order of their smallest node.
    pub fn component_sizes(&self, threshold: f64) -> Vec<usize> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for v in self.neighbors(u, threshold) {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        sizes
    }

    pub fn is_connected(&self, threshold: f64) -> bool {
        self.component_sizes(threshold).len() <= 1
    }

    /// Hop distances from `source` (`None` when unreachable).
    pub fn hop_distances(&self, source: usize, threshold: f64) -> Vec<Option<usize>> {
        let n = self.n();
        let mut dist = vec![None; n];
        dist[source] = Some(0);
        let mut frontier = vec![source];
        let mut hops = 0;
        while !frontier.is_empty() {
            hops += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for v in self.neighbors(u, threshold) {
                    if dist[v].is_none() {
                        dist[v] = Some(hops);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    /// Largest hop distance to any reachable node.
    pub fn eccentricity(&self, source: usize, threshold: f64) -> usize {
        self.hop_distances(source, threshold)
            .into_iter()
            .flatten()
            .max()
            .unwrap_or(0)
    }
}

/// Builds the communication graph for agents at `positions`.
pub fn build_comm_graph<P: AsRef<[f64]>>(positions: &[P], params: &CommParams) -> WeightedGraph {
    let n = positions.len();
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = comm_strength(distance(positions[i].as_ref(), positions[j].as_ref()), params);
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
    }
    WeightedGraph { weights: m }
}

/// `L = D - A` where `D` holds the row sums of the adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(Matrix);

impl LaplacianMatrix {
    pub fn entries(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Largest diagonal entry (maximum weighted degree).
    pub fn max_degree(&self) -> f64 {
        (0..self.0.n()).map(|i| self.0[(i, i)]).fold(0.0, f64::max)
    }
}

impl Deref for LaplacianMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

pub fn laplacian(g: &WeightedGraph) -> LaplacianMatrix {
    let n = g.n();
    let mut l = g.weights.scale(-1.0);
    for i in 0..n {
        // -0.0 entries from negating zeros are normalized away.
        for j in 0..n {
            if l[(i, j)] == 0.0 {
                l[(i, j)] = 0.0;
            }
        }
        l[(i, i)] = g.weighted_degree(i);
    }
    LaplacianMatrix(l)
}

/// Full eigendecomposition, ascending. Errors on non-symmetric input.
pub fn spectrum(l: &Matrix) -> Result<SpectralDecomposition> {
    linalg::symmetric_eigen(l)
}

/// Second-smallest Laplacian eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct FiedlerPair {
    pub lambda2: f64,
    /// Unit vector orthogonal to the all-ones vector; first non-negligible
    /// component positive.
    pub vector: Vec<f64>,
    /// Third-smallest eigenvalue, when `n >= 3`.
    pub lambda3: Option<f64>,
}

impl FiedlerPair {
    /// `lambda3 - lambda2`, or infinity when there is no third eigenvalue.
    pub fn gap(&self) -> f64 {
        self.lambda3.map_or(f64::INFINITY, |l3| l3 - self.lambda2)
    }
}

/// Algebraic connectivity and a Fiedler vector.
///
/// The all-ones direction is shifted above the spectrum
/// (`L + mu * 11^T / n` with `mu > lambda_max`), so the smallest eigenpair of
/// the shifted matrix is the Fiedler pair even when the graph is
/// disconnected. For `n < 2` this returns `lambda2 = 0` and a zero vector.
pub fn algebraic_connectivity(l: &LaplacianMatrix) -> FiedlerPair {
    let n = l.n();
    if n < 2 {
        return FiedlerPair {
            lambda2: 0.0,
            vector: vec![0.0; n],
            lambda3: None,
        };
    }
    let shift = 2.0 * l.max_degree() + 1.0;
    let inv_n = 1.0 / n as f64;
    let shifted = Matrix::from_fn(n, |i, j| l[(i, j)] + shift * inv_n);
    let dec = linalg::symmetric_eigen(&shifted).expect("Laplacian is symmetric");
    let mut vector = dec.eigenvectors[0].clone();
    // Remove any residual ones-component and renormalize.
    let mean = vector.iter().sum::<f64>() * inv_n;
    vector.iter_mut().for_each(|x| *x -= mean);
    let len = linalg::norm(&vector);
    if len > 0.0 {
        vector.iter_mut().for_each(|x| *x /= len);
    }
    linalg::apply_sign_convention(&mut vector);
    FiedlerPair {
        lambda2: dec.eigenvalues[0].max(0.0),
        vector,
        lambda3: (n >= 3).then(|| dec.eigenvalues[1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(rho: f64, big_r: f64, gamma: f64) -> CommParams {
        CommParams::new(rho, big_r, gamma).unwrap()
    }

    #[test]
    fn comm_strength_branches() {
        let params = p(10.0, 50.0, 2.0);
        assert_eq!(comm_strength(5.0, &params), 1.0);
        assert_eq!(comm_strength(50.0, &params), 0.0);
        assert!((comm_strength(30.0, &params) - (-1.0_f64).exp()).abs() < 1e-15);
        assert!((comm_strength(30.0, &params) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn comm_strength_jump_at_max_range() {
        let params = p(10.0, 50.0, 2.0);
        let below = comm_strength(50.0 - 1e-9, &params);
        assert!((below - (-2.0_f64).exp()).abs() < 1e-9);
        assert_eq!(comm_strength(50.0, &params), 0.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CommParams::new(50.0, 50.0, 2.0).is_err());
        assert!(CommParams::new(10.0, 50.0, 0.0).is_err());
        assert!(CommParams::new(-1.0, 50.0, 1.0).is_err());
    }

    #[test]
    fn build_graph_examples() {
        let params = p(10.0, 50.0, 2.0);
        let g = build_comm_graph(&[vec![0.0, 0.0], vec![5.0, 0.0]], &params);
        assert_eq!(g.weights().to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        let single = build_comm_graph(&[vec![3.0, 4.0]], &params);
        assert_eq!(single.weights().to_rows(), vec![vec![0.0]]);

        let line = build_comm_graph(&[vec![0.0], vec![30.0], vec![60.0]], &params);
        let e = (-1.0_f64).exp();
        assert!((line.weight(0, 1) - e).abs() < 1e-15);
        assert!((line.weight(1, 2) - e).abs() < 1e-15);
        assert_eq!(line.weight(0, 2), 0.0);
    }

    #[test]
    fn laplacian_examples() {
        let k2 = WeightedGraph::unweighted(2, &[(0, 1)]).unwrap();
        assert_eq!(
            laplacian(&k2).to_rows(),
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]]
        );
        let empty = WeightedGraph::unweighted(3, &[]).unwrap();
        assert_eq!(laplacian(&empty).into_inner(), Matrix::zeros(3));
        let p3 = WeightedGraph::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(
            laplacian(&p3).to_rows(),
            vec![
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 2.0, -1.0],
                vec![0.0, -1.0, 1.0]
            ]
        );
    }

    #[test]
    fn spectrum_examples() {
        let k2 = WeightedGraph::unweighted(2, &[(0, 1)]).unwrap();
        let s = spectrum(&laplacian(&k2)).unwrap();
        assert!((s.eigenvalues[0]).abs() < 1e-12 && (s.eigenvalues[1] - 2.0).abs() < 1e-12);

        let p3 = WeightedGraph::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
        let s = spectrum(&laplacian(&p3)).unwrap();
        for (got, want) in s.eigenvalues.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }

        let zero = spectrum(&Matrix::zeros(3)).unwrap();
        assert_eq!(zero.eigenvalues, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn spectrum_rejects_non_symmetric() {
        let m = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        assert!(spectrum(&m).is_err());
    }

    #[test]
    fn algebraic_connectivity_examples() {
        let edges: Vec<_> = (0..20)
            .flat_map(|i| ((i + 1)..20).map(move |j| (i, j)))
            .collect();
        let k20 = WeightedGraph::unweighted(20, &edges).unwrap();
        assert!((algebraic_connectivity(&laplacian(&k20)).lambda2 - 20.0).abs() < 1e-9);

        let split = WeightedGraph::unweighted(4, &[(0, 1), (2, 3)]).unwrap();
        let pair = algebraic_connectivity(&laplacian(&split));
        assert!(pair.lambda2.abs() < 1e-12);
        assert!(pair.vector.iter().sum::<f64>().abs() < 1e-10);

        let p3 = WeightedGraph::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
        let pair = algebraic_connectivity(&laplacian(&p3));
        assert!((pair.lambda2 - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in pair.vector.iter().zip([s, 0.0, -s]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn from_matrix_validates() {
        assert!(WeightedGraph::from_rows(&[vec![0.0, 0.5], vec![0.4, 0.0]]).is_err());
        assert!(WeightedGraph::from_rows(&[vec![0.0, 1.5], vec![1.5, 0.0]]).is_err());
        assert!(WeightedGraph::from_rows(&[vec![1.0]]).is_err());
    }

    #[test]
    fn eccentricity_on_path() {
        let p5 = WeightedGraph::unweighted(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert_eq!(p5.eccentricity(0, 0.5), 4);
        assert_eq!(p5.eccentricity(2, 0.5), 2);
    }
}
