//! Sensor deployment, range-based communication graph and the synchronous
//! average-consensus engine.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SensorSite;

/// Axis-aligned deployment rectangle `[0, width] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub width: f64,
    pub height: f64,
}

impl Region {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// Sites at the cell centers of a `√K × √K` grid, each moved by an independent
/// uniform offset of at most `jitter_frac` cell sizes per axis.
///
/// Sites are indexed column by column: site `i·√K + j` sits in column `i`, row `j`.
pub fn deploy_jittered_grid<R: Rng + ?Sized>(
    k: usize,
    region: Region,
    jitter_frac: f64,
    rng: &mut R,
) -> Result<Vec<SensorSite>> {
    let side = (k as f64).sqrt().round() as usize;
    if side * side != k || k == 0 {
        return Err(Error::NonSquareSensorCount(k));
    }
    if !(0.0..0.5).contains(&jitter_frac) {
        return Err(Error::InvalidConfig(format!(
            "jitter_frac must lie in [0, 0.5), got {jitter_frac}"
        )));
    }
    let cw = region.width / side as f64;
    let ch = region.height / side as f64;
    let mut sites = Vec::with_capacity(k);
    for i in 0..side {
        for j in 0..side {
            let (jx, jy) = if jitter_frac > 0.0 {
                (
                    rng.random_range(-jitter_frac..=jitter_frac),
                    rng.random_range(-jitter_frac..=jitter_frac),
                )
            } else {
                (0.0, 0.0)
            };
            sites.push(SensorSite {
                index: i * side + j,
                position: Vector2::new((i as f64 + 0.5 + jx) * cw, (j as f64 + 0.5 + jy) * ch),
            });
        }
    }
    Ok(sites)
}

/// Communication graph: `i` and `j` are neighbors iff they are distinct and
/// within `comm_range` of each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub sites: Vec<SensorSite>,
    pub adjacency: Vec<Vec<bool>>,
    pub comm_range: f64,
}

impl Topology {
    pub fn build(sites: Vec<SensorSite>, comm_range: f64) -> Self {
        let k = sites.len();
        let mut adjacency = vec![vec![false; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let d = (sites[i].position - sites[j].position).norm();
                if d <= comm_range {
                    adjacency[i][j] = true;
                    adjacency[j][i] = true;
                }
            }
        }
        Self {
            sites,
            adjacency,
            comm_range,
        }
    }

    /// Every pair adjacent, regardless of geometry.
    pub fn complete(sites: Vec<SensorSite>) -> Self {
        let k = sites.len();
        let adjacency = (0..k).map(|i| (0..k).map(|j| i != j).collect()).collect();
        Self {
            sites,
            adjacency,
            comm_range: f64::MAX,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].iter().filter(|&&a| a).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let k = self.len();
        if k == 0 {
            return true;
        }
        let mut seen = vec![false; k];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Symmetric doubly stochastic consensus matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusWeights {
    matrix: DMatrix<f64>,
}

impl ConsensusWeights {
    /// Metropolis rule: `W_ij = 1 / (1 + max(d_i, d_j))` for neighbors and
    /// `W_ii = 1 − Σ_{j≠i} W_ij`.
    pub fn metropolis(t: &Topology) -> Self {
        let k = t.len();
        let deg: Vec<usize> = (0..k).map(|i| t.degree(i)).collect();
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            let mut off = 0.0;
            for j in t.neighbors(i) {
                let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
                m[(i, j)] = w;
                off += w;
            }
            m[(i, i)] = 1.0 - off;
        }
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

/// Communication cost of one consensus call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub iterations: usize,
    pub payload_dim: usize,
    /// Scalars broadcast by each sensor: one payload per iteration.
    pub scalars_sent_per_sensor: u64,
}

impl ConsensusReport {
    fn new(iterations: usize, payload_dim: usize) -> Self {
        Self {
            iterations,
            payload_dim,
            scalars_sent_per_sensor: (iterations * payload_dim) as u64,
        }
    }
}

/// Running total of scalars sent by each sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommTally {
    pub per_sensor: u64,
}

impl CommTally {
    pub fn record(&mut self, report: &ConsensusReport) {
        self.per_sensor += report.scalars_sent_per_sensor;
    }

    pub fn network_total(&self, sensors: usize) -> u64 {
        self.per_sensor * sensors as u64
    }
}

fn check_payloads(initial: &[DVector<f64>]) -> Result<usize> {
    let dim = initial.first().map_or(0, |v| v.len());
    for v in initial {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(dim)
}

/// `iterations` synchronous rounds of `v_i ← Σ_j W_ij v_j`.
pub fn consensus_average(
    weights: &ConsensusWeights,
    initial: &[DVector<f64>],
    iterations: usize,
) -> Result<(Vec<DVector<f64>>, ConsensusReport)> {
    let dim = check_payloads(initial)?;
    if initial.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: initial.len(),
        });
    }
    let k = initial.len();
    // Row i holds node i's payload. Each round reads the previous state only.
    let mut state = DMatrix::from_fn(k, dim, |i, d| initial[i][d]);
    for _ in 0..iterations {
        state = weights.matrix() * &state;
    }
    let values = (0..k).map(|i| state.row(i).transpose()).collect();
    Ok((values, ConsensusReport::new(iterations, dim)))
}

/// Network-wide sum estimate: `K ×` the consensus average.
pub fn consensus_sum(
    weights: &ConsensusWeights,
    initial: &[DVector<f64>],
    iterations: usize,
) -> Result<(Vec<DVector<f64>>, ConsensusReport)> {
    let k = weights.len() as f64;
    let (mut values, report) = consensus_average(weights, initial, iterations)?;
    for v in &mut values {
        *v *= k;
    }
    Ok((values, report))
}

/// How network-wide sums are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsensusMode {
    /// Fixed number of synchronous average-consensus rounds.
    Iterative(usize),
    /// Oracle bypass: every node receives the exact sum. Sends nothing.
    Exact,
}

/// A deployed network: graph plus its consensus weights.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    pub weights: ConsensusWeights,
}

impl Network {
    pub fn new(topology: Topology) -> Self {
        let weights = ConsensusWeights::metropolis(&topology);
        Self { topology, weights }
    }

    pub fn len(&self) -> usize {
        self.topology.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topology.is_empty()
    }

    /// Per-node estimate of `Σ_k payload_k`.
    pub fn sum(&self, mode: ConsensusMode, payloads: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, ConsensusReport)> {
        match mode {
            ConsensusMode::Iterative(iterations) => consensus_sum(&self.weights, payloads, iterations),
            ConsensusMode::Exact => {
                let dim = check_payloads(payloads)?;
                let mut total = DVector::zeros(dim);
                for p in payloads {
                    total += p;
                }
                Ok((vec![total; payloads.len()], ConsensusReport::new(0, dim)))
            }
        }
    }
}
