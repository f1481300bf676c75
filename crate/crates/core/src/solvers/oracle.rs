//! Brute-force sampling oracle, used only to cross-check the solvers.
//!
//! It shares no code with the descent path beyond matrix primitives: it
//! evaluates the objective at Haar-random pure inputs (plus every 64th
//! sample a random full-rank mixed input, which can never beat a pure one
//! but guards the pure-state restriction), and for qubit inputs also on a
//! deterministic Bloch-sphere grid.

use rayon::prelude::*;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::matrix::{
    entropy_from_spectrum, schatten_from_spectrum, DensityMatrix, PureState, SchattenP, C64,
};
use crate::random::{derive_seed, random_density_matrix, random_pure_state, rng};

/// Largest input dimension the oracle accepts.
pub const ORACLE_MAX_DIM: usize = 8;

const CHUNK: usize = 4096;
const MIXED_EVERY: usize = 64;
const GRID_POLAR: usize = 256;
const GRID_AZIMUTH: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleObjective {
    /// Minimal output entropy (smallest sampled value).
    Moe,
    /// Maximal output p-norm (largest sampled value).
    PNorm(SchattenP),
}

impl OracleObjective {
    fn evaluate(&self, phi: &Channel, rho: &DensityMatrix) -> f64 {
        let spectrum = phi.apply(rho).expect("dimension checked").eigenvalues();
        match self {
            OracleObjective::Moe => {
                entropy_from_spectrum(&spectrum).expect("channel output is a state")
            }
            OracleObjective::PNorm(p) => {
                schatten_from_spectrum(&spectrum, *p).expect("channel output is a state")
            }
        }
    }

    fn better(&self, a: f64, b: f64) -> f64 {
        match self {
            OracleObjective::Moe => a.min(b),
            OracleObjective::PNorm(_) => a.max(b),
        }
    }

    fn worst(&self) -> f64 {
        match self {
            OracleObjective::Moe => f64::INFINITY,
            OracleObjective::PNorm(_) => f64::NEG_INFINITY,
        }
    }
}

fn bloch_state(theta: f64, phase: f64) -> PureState {
    PureState::new(vec![
        C64::new((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), phase),
    ])
    .expect("unit vector")
}

/// Best objective value over `samples` random inputs (and the grid for
/// qubits). Deterministic in `seed` regardless of thread count: samples are
/// drawn in fixed chunks, each from its own derived seed.
pub fn brute_force_oracle(
    phi: &Channel,
    objective: OracleObjective,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = phi.dim_in();
    if n > ORACLE_MAX_DIM {
        return Err(Error::domain(format!(
            "brute-force oracle is limited to input dimension {ORACLE_MAX_DIM}, got {n}"
        )));
    }
    let chunks = samples.div_ceil(CHUNK);
    let sampled = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng(derive_seed(seed, c as u64));
            let count = CHUNK.min(samples - c * CHUNK);
            let mut best = objective.worst();
            for k in 0..count {
                let rho = if (c * CHUNK + k) % MIXED_EVERY == MIXED_EVERY - 1 {
                    random_density_matrix(n, n, &mut r)
                } else {
                    random_pure_state(n, &mut r).projector()
                };
                best = objective.better(best, objective.evaluate(phi, &rho));
            }
            best
        })
        .reduce(|| objective.worst(), |a, b| objective.better(a, b));

    let grid = if n == 2 {
        (0..=GRID_POLAR)
            .into_par_iter()
            .map(|i| {
                let theta = std::f64::consts::PI * i as f64 / GRID_POLAR as f64;
                (0..GRID_AZIMUTH).fold(objective.worst(), |best, j| {
                    let phase = std::f64::consts::TAU * j as f64 / GRID_AZIMUTH as f64;
                    objective.better(
                        best,
                        objective.evaluate(phi, &bloch_state(theta, phase).projector()),
                    )
                })
            })
            .reduce(|| objective.worst(), |a, b| objective.better(a, b))
    } else {
        objective.worst()
    };
    Ok(objective.better(sampled, grid))
}
