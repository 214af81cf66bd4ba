//! Step-by-step scenario execution.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{adversary_broadcast, rank_adversaries, AdversaryBehavior, Broadcast};
use crate::consensus::{wmsr_control_detailed, ConsensusGains, FilterFrame, NeighborSample};
use crate::control::{combined_control, connectivity_control, grad_lambda2, ConnectivityControlParams};
use crate::dynamics::{ngon_formation, step, AgentState, Role};
use crate::error::{Error, Result};
use crate::graph::{algebraic_connectivity, build_comm_graph, laplacian, WeightedGraph};
use crate::sim::config::{ControllerKind, EstimatorMode, ScenarioConfig};
use crate::sim::metrics::{compute_metrics, SeriesMeta, Summary};
use crate::spectral::run_distributed_estimation;

/// Rejection-sampling budget for a connected initial placement.
const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Snapshot taken at the start of a step, before any input is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    /// Exact algebraic connectivity of the weighted graph.
    pub lambda2: f64,
    /// What the agents believe (network minimum in distributed mode).
    pub lambda2_hat: Option<f64>,
    /// Agents running the pure connectivity law this step.
    pub connectivity_agents: usize,
    /// Agents with phi > 0.
    pub phi_active: usize,
    pub phi_clamped: usize,
    /// Samples discarded by W-MSR over all normal agents and axes.
    pub removed: usize,
    /// Normal agents outside the initial hull (relative to the reference).
    pub hull_violations: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub epochs: usize,
    /// Epochs discarded because the neighbor sets changed before release.
    pub restarts: usize,
    pub releases: usize,
    /// Age of the estimate in use, in steps, averaged over steps that had one.
    pub mean_staleness: f64,
    pub max_staleness: usize,
    /// Steps without any released estimate.
    pub blind_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ScenarioConfig,
    /// Adversary ids in placement order.
    pub adversaries: Vec<usize>,
    pub offsets: Vec<[f64; 2]>,
    pub series: Vec<StepRecord>,
    pub final_positions: Vec<[f64; 2]>,
    pub final_velocities: Vec<[f64; 2]>,
    pub estimator: Option<EstimatorStats>,
    pub summary: Summary,
}

fn pair(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

/// Uniform placement in a centered square, redrawn until the graph is
/// connected at the edge threshold.
pub fn initial_positions(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let half = 0.5 * config.placement_side;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let pos: Vec<Vec<f64>> = (0..config.n_agents)
            .map(|_| vec![rng.random_range(-half..=half), rng.random_range(-half..=half)])
            .collect();
        if build_comm_graph(&pos, &config.comm).is_connected(config.edge_threshold) {
            return Ok(pos);
        }
    }
    Err(Error::InvalidParams(format!(
        "no connected placement found in {PLACEMENT_ATTEMPTS} draws"
    )))
}

struct Epoch {
    topology: Vec<Vec<usize>>,
    started: usize,
    release_at: usize,
    lambda2_hat: Vec<f64>,
    fiedler: Option<Vec<f64>>,
}

struct Estimate {
    lambda2_hat: Vec<f64>,
    fiedler: Option<Vec<f64>>,
    snapshot_step: usize,
}

/// Distributed estimation run in epochs: each epoch freezes the graph at its
/// start, computes the full protocol and hands the result to the agents once
/// the required message rounds have elapsed. A change of neighbor sets
/// discards the running epoch.
struct EpochEstimator {
    pending: Option<Epoch>,
    current: Option<Estimate>,
    stats: EstimatorStats,
    staleness_sum: usize,
}

fn topology(g: &WeightedGraph) -> Vec<Vec<usize>> {
    (0..g.n()).map(|i| g.neighbors(i, 0.0).collect()).collect()
}

impl EpochEstimator {
    fn new() -> Self {
        Self {
            pending: None,
            current: None,
            stats: EstimatorStats::default(),
            staleness_sum: 0,
        }
    }

    fn advance(&mut self, k: usize, g: &WeightedGraph, config: &ScenarioConfig) -> Result<()> {
        let topo = topology(g);
        if let Some(p) = &self.pending {
            if p.topology != topo {
                self.stats.restarts += 1;
                self.pending = None;
            } else if k >= p.release_at {
                let p = self.pending.take().expect("checked above");
                self.current = Some(Estimate {
                    lambda2_hat: p.lambda2_hat,
                    fiedler: p.fiedler,
                    snapshot_step: p.started,
                });
                self.stats.releases += 1;
            }
        }
        if self.pending.is_none() {
            let out = run_distributed_estimation(g, &config.estimator.power, true, false)?;
            let delay = out.message_rounds.div_ceil(config.estimator.rounds_per_step);
            self.stats.epochs += 1;
            self.pending = Some(Epoch {
                topology: topo,
                started: k,
                release_at: k + delay.max(1),
                lambda2_hat: out.lambda2_hat,
                fiedler: out.fiedler.map(|f| f.vector),
            });
        }
        match &self.current {
            Some(c) => {
                let age = k - c.snapshot_step;
                self.staleness_sum += age;
                self.stats.max_staleness = self.stats.max_staleness.max(age);
            }
            None => self.stats.blind_steps += 1,
        }
        Ok(())
    }

    fn finish(mut self, steps: usize) -> EstimatorStats {
        let seen = steps - self.stats.blind_steps;
        self.stats.mean_staleness = if seen > 0 {
            self.staleness_sum as f64 / seen as f64
        } else {
            0.0
        };
        self.stats
    }
}

struct Fleet {
    agents: Vec<AgentState>,
    offsets: Vec<Vec<f64>>,
    adversaries: Vec<usize>,
}

fn setup(config: &ScenarioConfig) -> Result<Fleet> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let positions = initial_positions(config, &mut rng)?;
    let g0 = build_comm_graph(&positions, &config.comm);
    let behaviors = &config.adversaries.behaviors;
    let adversaries = rank_adversaries(&g0, config.adversaries.placement, behaviors.len(), config.edge_threshold)?;
    let mut agents: Vec<AgentState> = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| AgentState::new(i, p, vec![0.0, 0.0]))
        .collect();
    for (&id, behavior) in adversaries.iter().zip(behaviors) {
        agents[id].role = Role::Adversary(*behavior);
    }
    let offsets = ngon_formation(config.n_agents, config.formation_radius)?.offsets;
    Ok(Fleet {
        agents,
        offsets,
        adversaries,
    })
}

fn samples_for(i: usize, g: &WeightedGraph, broadcasts: &[Broadcast], offsets: &[Vec<f64>]) -> Vec<NeighborSample> {
    g.neighbors(i, 0.0)
        .map(|j| NeighborSample {
            neighbor_id: j,
            weight: g.weight(i, j),
            position: broadcasts[j].position.clone(),
            velocity: broadcasts[j].velocity.clone(),
            offset: offsets[j].clone(),
        })
        .collect()
}

/// Executes the scenario. Deterministic for a given configuration.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let Fleet {
        mut agents,
        offsets,
        adversaries,
    } = setup(config)?;
    let n = config.n_agents;
    let dt = config.dt;
    let gains = config.consensus_gains();
    let honest_gains = ConsensusGains { f_param: 0, ..gains };
    let conn = config.connectivity_params();
    let normal: Vec<bool> = agents.iter().map(|a| !a.is_adversary()).collect();

    // Virtual agent following the reference with the same damping; normal
    // formation errors are measured relative to it.
    let mut reference = AgentState::new(usize::MAX, vec![0.0, 0.0], vec![0.0, 0.0]);
    let mut hull = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
    for (a, h) in agents.iter().zip(&offsets).filter(|(a, _)| !a.is_adversary()) {
        for axis in 0..2 {
            let xi = a.position[axis] - h[axis];
            hull[axis][0] = hull[axis][0].min(xi);
            hull[axis][1] = hull[axis][1].max(xi);
        }
    }
    let outside_hull = |agents: &[AgentState], reference: &AgentState| -> usize {
        agents
            .iter()
            .zip(&offsets)
            .filter(|(a, _)| !a.is_adversary())
            .filter(|(a, h)| {
                (0..2).any(|axis| {
                    let e = a.position[axis] - h[axis] - reference.position[axis];
                    e < hull[axis][0] - config.hull_tolerance || e > hull[axis][1] + config.hull_tolerance
                })
            })
            .count()
    };

    let mut estimator = (config.estimator.mode == EstimatorMode::Distributed).then(EpochEstimator::new);
    let mut series = Vec::with_capacity(config.steps);

    for k in 0..config.steps {
        let t = k as f64 * dt;
        let positions: Vec<&[f64]> = agents.iter().map(|a| a.position.as_slice()).collect();
        let g = build_comm_graph(&positions, &config.comm);
        let exact = algebraic_connectivity(&laplacian(&g));

        let (lambda_hat, fiedler): (Option<Vec<f64>>, Option<Vec<f64>>) = match &mut estimator {
            None => (Some(vec![exact.lambda2; n]), Some(exact.vector.clone())),
            Some(est) => {
                est.advance(k, &g, config)?;
                match &est.current {
                    Some(c) => {
                        let f = if config.estimator.use_estimated_fiedler {
                            c.fiedler.clone()
                        } else {
                            Some(exact.vector.clone())
                        };
                        (Some(c.lambda2_hat.clone()), f)
                    }
                    None => (None, None),
                }
            }
        };

        let v_ref = config.v_ref.at(t);
        let broadcasts: Vec<Broadcast> = agents
            .iter()
            .map(|a| match &a.role {
                Role::Normal => Broadcast::honest(a),
                Role::Adversary(b) => adversary_broadcast(b, a, k, dt, config.adversaries.fabricate_velocity),
            })
            .collect();
        let honest: Vec<Broadcast> = agents.iter().map(Broadcast::honest).collect();

        let gradient = match (&fiedler, config.connectivity.enabled) {
            (Some(v), true) => Some(grad_lambda2(&positions, v, &config.comm)?),
            _ => None,
        };

        let mut record = StepRecord {
            step: k,
            t,
            positions: agents.iter().map(|a| pair(&a.position)).collect(),
            velocities: agents.iter().map(|a| pair(&a.velocity)).collect(),
            lambda2: exact.lambda2,
            lambda2_hat: lambda_hat.as_ref().map(|l| l.iter().copied().fold(f64::INFINITY, f64::min)),
            connectivity_agents: 0,
            phi_active: 0,
            phi_clamped: 0,
            removed: 0,
            hull_violations: outside_hull(&agents, &reference),
            degenerate: exact.gap() < conn.grad_epsilon,
        };

        let mut inputs = Vec::with_capacity(n);
        for (i, agent) in agents.iter().enumerate() {
            let u = if agent.is_adversary() {
                let samples = samples_for(i, &g, &honest, &offsets);
                wmsr_control_detailed(agent, &offsets[i], &samples, &honest_gains, &v_ref, FilterFrame::Formation).accel
            } else {
                let samples = samples_for(i, &g, &broadcasts, &offsets);
                let frame = match config.controller {
                    ControllerKind::Linear => FilterFrame::Formation,
                    ControllerKind::Wmsr => config.filter_frame,
                };
                let out = wmsr_control_detailed(agent, &offsets[i], &samples, &gains, &v_ref, frame);
                record.removed += out.removed;
                match (&gradient, &lambda_hat) {
                    (Some(grad), Some(lh)) => apply_connectivity(&grad.rows[i], agent, out.accel, lh[i], &conn, &mut record),
                    _ => out.accel,
                }
            };
            inputs.push(u);
        }

        for (agent, u) in agents.iter_mut().zip(&inputs) {
            *agent = step(agent, u, dt).map_err(|e| Error::Aborted {
                step: k,
                reason: format!("agent {}: {e}", agent.id),
            })?;
            if !agent.is_finite() {
                return Err(Error::Aborted {
                    step: k,
                    reason: format!("agent {} state is not finite", agent.id),
                });
            }
        }
        let u_ref: Vec<f64> = (0..2)
            .map(|a| -gains.kappa * (reference.velocity[a] - v_ref[a]))
            .collect();
        reference = step(&reference, &u_ref, dt)?;
        series.push(record);
    }

    let final_violations = outside_hull(&agents, &reference);
    let estimator = estimator.map(|e| e.finish(config.steps));
    let offsets2: Vec<[f64; 2]> = offsets.iter().map(|h| pair(h)).collect();
    let final_positions: Vec<[f64; 2]> = agents.iter().map(|a| pair(&a.position)).collect();
    let final_velocities: Vec<[f64; 2]> = agents.iter().map(|a| pair(&a.velocity)).collect();
    let attack_value = config.adversaries.behaviors.iter().find_map(|b| match *b {
        AdversaryBehavior::ConstantPosition { axis: 0, value } => Some(value),
        _ => None,
    });
    let meta = SeriesMeta {
        name: &config.name,
        normal: &normal,
        offsets: &offsets2,
        adversaries: &adversaries,
        transient_fraction: config.transient_fraction,
        lambda_floor: conn.lambda_floor,
        attack_value,
        final_positions: &final_positions,
        final_velocities: &final_velocities,
        final_hull_violations: final_violations,
        estimator: estimator.as_ref(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let summary = compute_metrics(&series, &meta);
    Ok(RunResult {
        config: config.clone(),
        adversaries,
        offsets: offsets2,
        series,
        final_positions,
        final_velocities,
        estimator,
        summary,
    })
}

fn apply_connectivity(
    grad: &[f64],
    agent: &AgentState,
    u_formation: Vec<f64>,
    lambda_hat: f64,
    conn: &ConnectivityControlParams,
    record: &mut StepRecord,
) -> Vec<f64> {
    if lambda_hat <= conn.lambda_floor {
        record.connectivity_agents += 1;
        return connectivity_control(grad, &agent.velocity, conn);
    }
    let (u, phi) = combined_control(grad, &u_formation, conn);
    if phi.phi > 0.0 {
        record.phi_active += 1;
    }
    if phi.clamped {
        record.phi_clamped += 1;
    }
    u
}
