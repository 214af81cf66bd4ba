//! Connectivity maintenance via the gradient of `lambda2` with respect to
//! agent positions, and the phi-scaled blend with formation control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    algebraic_connectivity, build_comm_graph, comm_strength_slope, distance, laplacian, CommParams,
};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectivityControlParams {
    /// Below this estimate only the connectivity law acts (4F for W-MSR).
    pub lambda_floor: f64,
    pub phi_max: f64,
    /// Gradient norms (and eigenvalue gaps) below this are treated as zero.
    pub grad_epsilon: f64,
    /// Gradient gain of the pure connectivity law.
    pub k_c: f64,
    /// Velocity damping of the pure connectivity law.
    pub c_d: f64,
}

impl Default for ConnectivityControlParams {
    fn default() -> Self {
        Self {
            lambda_floor: 8.0,
            phi_max: 50.0,
            grad_epsilon: 1e-9,
            k_c: 5.0,
            c_d: 1.0,
        }
    }
}

impl ConnectivityControlParams {
    pub(crate) fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("phi_max", self.phi_max),
            ("grad_epsilon", self.grad_epsilon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        }
        let nonneg = [
            ("lambda_floor", self.lambda_floor),
            ("k_c", self.k_c),
            ("c_d", self.c_d),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("{name} must be non-negative, got {v}"));
            }
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

/// `d w_ij / d x_{i, axis}` for the link model.
pub fn weight_derivative(xi: &[f64], xj: &[f64], axis: usize, params: &CommParams) -> f64 {
    let d = distance(xi, xj);
    if d == 0.0 {
        return 0.0;
    }
    comm_strength_slope(d, params) * (xi[axis] - xj[axis]) / d
}

/// `dL / dx_{i, axis}`: only row/column `i` and the matching diagonal
/// entries are nonzero.
pub fn laplacian_position_derivative<P: AsRef<[f64]>>(
    positions: &[P],
    params: &CommParams,
    i: usize,
    axis: usize,
) -> Result<Matrix> {
    let n = positions.len();
    if i >= n {
        return Err(Error::NodeOutOfRange { node: i, n });
    }
    let mut m = Matrix::zeros(n);
    let xi = positions[i].as_ref();
    for j in (0..n).filter(|&j| j != i) {
        let dw = weight_derivative(xi, positions[j].as_ref(), axis, params);
        if dw == 0.0 {
            continue;
        }
        m[(i, j)] = -dw;
        m[(j, i)] = -dw;
        m[(i, i)] += dw;
        m[(j, j)] += dw;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda2Gradient {
    /// `rows[i][axis] = d lambda2 / d x_{i, axis}` (1/m).
    pub rows: Vec<Vec<f64>>,
    /// Set when `lambda3 - lambda2` is below the gap tolerance.
    pub degenerate: bool,
}

impl Lambda2Gradient {
    pub fn norm(&self) -> f64 {
        self.rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `d lambda2 / d x_{i,a} = sum_j (v_i - v_j)^2 dw_ij/dx_{i,a} / v^T v`.
pub fn grad_lambda2<P: AsRef<[f64]>>(positions: &[P], fiedler: &[f64], params: &CommParams) -> Result<Lambda2Gradient> {
    let n = positions.len();
    if fiedler.len() != n {
        return Err(Error::InvalidParams(format!(
            "Fiedler vector has {} entries for {n} agents",
            fiedler.len()
        )));
    }
    let vtv = linalg::dot(fiedler, fiedler);
    let dim = positions.first().map_or(0, |p| p.as_ref().len());
    let mut rows = vec![vec![0.0; dim]; n];
    if vtv == 0.0 {
        return Ok(Lambda2Gradient { rows, degenerate: false });
    }
    for i in 0..n {
        let xi = positions[i].as_ref();
        for j in (0..n).filter(|&j| j != i) {
            let diff = fiedler[i] - fiedler[j];
            let sq = diff * diff / vtv;
            if sq == 0.0 {
                continue;
            }
            for a in 0..dim {
                rows[i][a] += sq * weight_derivative(xi, positions[j].as_ref(), a, params);
            }
        }
    }
    Ok(Lambda2Gradient { rows, degenerate: false })
}

/// Same quantity as [`grad_lambda2`], via `trace(v v^T / v^T v * dL/dx)`.
pub fn grad_lambda2_trace<P: AsRef<[f64]>>(positions: &[P], fiedler: &[f64], params: &CommParams) -> Result<Lambda2Gradient> {
    let n = positions.len();
    let vtv = linalg::dot(fiedler, fiedler);
    let dim = positions.first().map_or(0, |p| p.as_ref().len());
    let mut rows = vec![vec![0.0; dim]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (a, entry) in row.iter_mut().enumerate() {
            let dl = laplacian_position_derivative(positions, params, i, a)?;
            // trace(v v^T M) = v^T M v
            *entry = linalg::dot(fiedler, &dl.matvec(fiedler)) / vtv;
        }
    }
    Ok(Lambda2Gradient { rows, degenerate: false })
}

/// Gradient from the exact Fiedler pair of the current configuration, with
/// the degeneracy flag set from the eigenvalue gap.
pub fn grad_lambda2_exact<P: AsRef<[f64]>>(positions: &[P], params: &CommParams, gap_epsilon: f64) -> Result<Lambda2Gradient> {
    let pair = algebraic_connectivity(&laplacian(&build_comm_graph(positions, params)));
    let mut g = grad_lambda2(positions, &pair.vector, params)?;
    g.degenerate = pair.gap() < gap_epsilon;
    Ok(g)
}

/// Pure connectivity law `u = k_c grad - c_d v`.
pub fn connectivity_control(grad_i: &[f64], velocity: &[f64], params: &ConnectivityControlParams) -> Vec<f64> {
    grad_i
        .iter()
        .zip(velocity)
        .map(|(g, v)| params.k_c * g - params.c_d * v)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiOutcome {
    pub phi: f64,
    /// True when the unclamped value exceeded `phi_max`.
    pub clamped: bool,
}

/// Smallest non-negative `phi` (capped at `phi_max`) with
/// `grad^T (u_formation + phi grad) >= 0`, i.e. the agent's commanded
/// acceleration does not point against the gradient.
pub fn phi_scale(grad_i: &[f64], u_formation: &[f64], params: &ConnectivityControlParams) -> PhiOutcome {
    let gg = linalg::dot(grad_i, grad_i);
    if gg.sqrt() <= params.grad_epsilon {
        return PhiOutcome { phi: 0.0, clamped: false };
    }
    let raw = -linalg::dot(grad_i, u_formation) / gg;
    PhiOutcome {
        phi: raw.clamp(0.0, params.phi_max),
        clamped: raw > params.phi_max,
    }
}

/// `u = phi grad + u_formation`.
pub fn combined_control(grad_i: &[f64], u_formation: &[f64], params: &ConnectivityControlParams) -> (Vec<f64>, PhiOutcome) {
    let phi = phi_scale(grad_i, u_formation, params);
    let u = grad_i
        .iter()
        .zip(u_formation)
        .map(|(g, u)| phi.phi * g + u)
        .collect();
    (u, phi)
}

/// Exact `lambda2` of the configuration (weighted graph).
pub fn lambda2_of<P: AsRef<[f64]>>(positions: &[P], params: &CommParams) -> f64 {
    algebraic_connectivity(&laplacian(&build_comm_graph(positions, params))).lambda2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> CommParams {
        CommParams::new(10.0, 50.0, 2.0).unwrap()
    }

    #[test]
    fn near_pair_has_flat_derivative() {
        let pos = [vec![0.0, 0.0], vec![5.0, 0.0]];
        for a in 0..2 {
            assert_eq!(laplacian_position_derivative(&pos, &p(), 0, a).unwrap(), Matrix::zeros(2));
        }
    }

    #[test]
    fn band_derivative_by_hand() {
        let pos = [vec![0.0, 0.0], vec![30.0, 0.0]];
        let dw = weight_derivative(&pos[0], &pos[1], 0, &p());
        assert!((dw - (-1.0f64).exp() * 0.05).abs() < 1e-15);
        assert!((dw - 0.0184).abs() < 1e-4);
        let m = laplacian_position_derivative(&pos, &p(), 0, 0).unwrap();
        assert_eq!(m[(0, 1)], -dw);
        assert_eq!(m[(0, 0)], dw);
        assert_eq!(m[(1, 1)], dw);
        assert!((weight_derivative(&pos[1], &pos[0], 0, &p()) + dw).abs() < 1e-18);
    }

    #[test]
    fn pair_gradient_closed_form() {
        let pos = [vec![0.0, 0.0], vec![30.0, 0.0]];
        let g = grad_lambda2_exact(&pos, &p(), 1e-9).unwrap();
        // lambda2 = 2 w(d) so d lambda2 / d x_0 = -2 w'(d).
        let expected = -2.0 * comm_strength_slope(30.0, &p());
        assert!((g.rows[0][0] - expected).abs() < 1e-12);
        assert!(g.rows[0][0] > 0.0 && g.rows[1][0] < 0.0);
        assert_eq!(g.rows[0][1], 0.0);

        let u0 = connectivity_control(&g.rows[0], &[0.0, 0.0], &ConnectivityControlParams::default());
        let u1 = connectivity_control(&g.rows[1], &[0.0, 0.0], &ConnectivityControlParams::default());
        assert!(u0[0] > 0.0 && u1[0] < 0.0);
    }

    #[test]
    fn tight_cluster_has_zero_gradient() {
        let pos = [vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 4.0], vec![1.0, -3.0]];
        let g = grad_lambda2_exact(&pos, &p(), 1e-9).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn trace_form_agrees() {
        let pos = [vec![0.0, 0.0], vec![22.0, 3.0], vec![35.0, -14.0], vec![9.0, 27.0]];
        let pair = algebraic_connectivity(&laplacian(&build_comm_graph(&pos, &p())));
        let a = grad_lambda2(&pos, &pair.vector, &p()).unwrap();
        let b = grad_lambda2_trace(&pos, &pair.vector, &p()).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phi_examples() {
        let params = ConnectivityControlParams::default();
        assert_eq!(phi_scale(&[0.0, 0.0], &[1.0, 1.0], &params).phi, 0.0);
        assert_eq!(phi_scale(&[1.0, 0.0], &[2.0, 0.0], &params).phi, 0.0);
        let out = phi_scale(&[0.5, 0.0], &[-1.0, 0.0], &params);
        assert!((out.phi - 2.0).abs() < 1e-12 && !out.clamped);
        let out = phi_scale(&[0.01, 0.0], &[-1.0, 0.0], &params);
        assert_eq!(out.phi, params.phi_max);
        assert!(out.clamped);
        let (u, phi) = combined_control(&[0.0, 0.0], &[1.0, -2.0], &params);
        assert_eq!(phi.phi, 0.0);
        assert_eq!(u, vec![1.0, -2.0]);
    }

    #[test]
    fn phi_step_does_not_lose_connectivity() {
        let params = ConnectivityControlParams { phi_max: 1e6, ..Default::default() };
        let pos = vec![vec![0.0, 0.0], vec![30.0, 0.0], vec![60.0, 0.0]];
        // Formation input pulling the line apart.
        let u_form = [vec![-1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]];
        let g = grad_lambda2_exact(&pos, &p(), 1e-9).unwrap();
        let dt = 0.05;
        let before = lambda2_of(&pos, &p());
        let mut activated = false;
        let next: Vec<Vec<f64>> = pos
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let (u, phi) = combined_control(&g.rows[i], &u_form[i], &params);
                activated |= phi.phi > 0.0;
                x.iter().zip(&u).map(|(xa, ua)| xa + ua * dt * dt).collect()
            })
            .collect();
        assert!(activated);
        assert!(lambda2_of(&next, &p()) >= before - 1e-6);
    }
}
