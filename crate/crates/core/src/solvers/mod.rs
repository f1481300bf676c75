//! Minimal output entropy, maximal output p-norm and convex closure of
//! output entropy.
//!
//! Entropy is concave and Schatten norms are convex, so the extremes over
//! all input states are attained at pure states; both single-state
//! problems are searched over the unit sphere of the input space. The
//! convex closure is searched over pure decompositions `ψ̃_i = Σ_k U_ik a_k`
//! of a fixed square-root factor `ρ = Σ_k a_k a_k†`, which reach every pure
//! decomposition with at most `r²` members (`r = rank ρ`) as `U` ranges over
//! `r²×r` isometries.
//!
//! Every search is multi-start: restart `i` draws its starting point from
//! seed `seed + i`, restarts may run in parallel, and the best value wins
//! with ties going to the lowest restart index, so results do not depend on
//! the number of workers.

mod descent;
mod objectives;
pub mod oracle;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::matrix::{vec_norm, ComplexMatrix, DensityMatrix, PureState, SchattenP, C64};
use crate::random::rng;

use descent::{
    descend, finite_difference_check, random_start, DescentSettings, LocalResult, Manifold,
    Objective, Sphere, Stiefel,
};
use objectives::{NegOutputNorm, OutputEntropy, RoofEntropy};

pub use oracle::{brute_force_oracle, OracleObjective, ORACLE_MAX_DIM};

/// Eigenvalues of `ρ` above this count towards its rank.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub value_tolerance: f64,
    pub seed: u64,
    /// Worker threads for restarts; `None` uses the global pool. Never
    /// affects results, so it is not serialized.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 64,
            max_iterations: 2000,
            step_tolerance: 1e-10,
            value_tolerance: 1e-7,
            seed: 0,
            workers: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::domain("restarts must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be >= 1"));
        }
        if self.step_tolerance.is_nan()
            || self.step_tolerance <= 0.0
            || self.value_tolerance.is_nan()
            || self.value_tolerance <= 0.0
        {
            return Err(Error::domain("tolerances must be > 0"));
        }
        if self.workers == Some(0) {
            return Err(Error::domain("workers must be >= 1"));
        }
        Ok(())
    }

    fn settings(&self) -> DescentSettings {
        DescentSettings {
            max_iterations: self.max_iterations,
            step_tolerance: self.step_tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleMember {
    pub weight: f64,
    pub state: DensityMatrix,
}

/// Weighted states averaging to a prescribed state.
#[derive(Clone, Debug, Serialize)]
pub struct Ensemble {
    pub members: Vec<EnsembleMember>,
}

impl Ensemble {
    pub fn average(&self) -> ComplexMatrix {
        let n = self.members.first().map(|m| m.state.dim()).unwrap_or(0);
        let mut acc = ComplexMatrix::zeros(n, n);
        for m in &self.members {
            acc = &acc + &m.state.matrix().scale_real(m.weight);
        }
        acc
    }

    /// Checks weights (non-negative, summing to 1 within 1e-10) and the
    /// average against `target` (within 1e-8).
    pub fn check(&self, target: &DensityMatrix) -> Result<()> {
        if let Some(m) = self.members.iter().find(|m| m.weight < 0.0) {
            return Err(Error::Validation {
                invariant: "non-negative ensemble weights",
                residual: -m.weight,
            });
        }
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Validation {
                invariant: "ensemble weights sum to 1",
                residual: (total - 1.0).abs(),
            });
        }
        let residual = self.average().max_abs_diff(target.matrix());
        if residual > 1e-8 {
            return Err(Error::Validation {
                invariant: "ensemble average equals the target state",
                residual,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Argument {
    PureState { amplitudes: PureState },
    Ensemble(Ensemble),
}

impl Argument {
    pub fn pure_state(&self) -> Option<&PureState> {
        match self {
            Argument::PureState { amplitudes } => Some(amplitudes),
            Argument::Ensemble(_) => None,
        }
    }

    pub fn ensemble(&self) -> Option<&Ensemble> {
        match self {
            Argument::Ensemble(e) => Some(e),
            Argument::PureState { .. } => None,
        }
    }
}

/// Best value over all restarts and where it was attained.
#[derive(Clone, Debug, Serialize)]
pub struct Optimum {
    pub value: f64,
    pub argument: Argument,
    /// Restarts whose value is within `value_tolerance` of the best.
    pub restarts_agreeing: usize,
    pub residual_gradient_norm: f64,
    pub converged: bool,
    pub best_restart: usize,
    pub iterations: usize,
    pub config: OptimizerConfig,
    pub seed: u64,
}

fn run_restarts<T, F>(cfg: &OptimizerConfig, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    let run = || {
        (0..cfg.restarts)
            .into_par_iter()
            .map(|i| job(i, cfg.seed.wrapping_add(i as u64)))
            .collect::<Vec<T>>()
    };
    match cfg.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Index of the smallest value, first index on ties.
fn best_index(results: &[LocalResult]) -> usize {
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.value < results[best].value {
            best = i;
        }
    }
    best
}

struct MultiStart {
    best: LocalResult,
    best_restart: usize,
    agreeing: usize,
}

fn multi_start<M: Manifold, O: Objective>(
    manifold: &M,
    objective: &O,
    cfg: &OptimizerConfig,
) -> Result<MultiStart> {
    cfg.validate()?;
    let settings = cfg.settings();
    let results = run_restarts(cfg, |_, seed| {
        let mut r = rng(seed);
        let start = random_start(manifold, &mut r);
        descend(manifold, objective, start, &settings)
    })?;
    let b = best_index(&results);
    let best_value = results[b].value;
    let agreeing = results
        .iter()
        .filter(|r| (r.value - best_value).abs() <= cfg.value_tolerance)
        .count();
    Ok(MultiStart {
        best: results[b].clone(),
        best_restart: b,
        agreeing,
    })
}

fn pure_optimum(ms: MultiStart, value: f64, cfg: &OptimizerConfig) -> Result<Optimum> {
    Ok(Optimum {
        value,
        argument: Argument::PureState {
            amplitudes: PureState::normalized(ms.best.point)?,
        },
        restarts_agreeing: ms.agreeing,
        residual_gradient_norm: ms.best.gradient_norm,
        converged: ms.best.converged,
        best_restart: ms.best_restart,
        iterations: ms.best.iterations,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}

/// `min_ψ S(Φ(|ψ⟩⟨ψ|))`, in nats.
pub fn min_output_entropy(phi: &Channel, cfg: &OptimizerConfig) -> Result<Optimum> {
    let sphere = Sphere { n: phi.dim_in() };
    let obj = OutputEntropy { channel: phi };
    let ms = multi_start(&sphere, &obj, cfg)?;
    let value = ms.best.value;
    pure_optimum(ms, value, cfg)
}

/// `max_ψ ‖Φ(|ψ⟩⟨ψ|)‖_p`. `p = 1` is exactly 1 for every channel.
pub fn max_output_pnorm(phi: &Channel, p: SchattenP, cfg: &OptimizerConfig) -> Result<Optimum> {
    cfg.validate()?;
    if p.is_one() {
        return Ok(Optimum {
            value: 1.0,
            argument: Argument::PureState {
                amplitudes: PureState::basis(phi.dim_in(), 0),
            },
            restarts_agreeing: cfg.restarts,
            residual_gradient_norm: 0.0,
            converged: true,
            best_restart: 0,
            iterations: 0,
            config: cfg.clone(),
            seed: cfg.seed,
        });
    }
    let sphere = Sphere { n: phi.dim_in() };
    let obj = NegOutputNorm { channel: phi, p };
    let ms = multi_start(&sphere, &obj, cfg)?;
    let value = -ms.best.value;
    pure_optimum(ms, value, cfg)
}

/// Square-root factor of `ρ`: columns `√λ_k q_k` for eigenvalues above
/// [`RANK_TOL`].
pub fn sqrt_factor(rho: &DensityMatrix) -> Vec<Vec<C64>> {
    let eig = rho.matrix().eigh();
    (0..rho.dim())
        .rev()
        .filter(|&k| eig.values[k] > RANK_TOL)
        .map(|k| {
            eig.vector(k)
                .into_iter()
                .map(|z| z * eig.values[k].sqrt())
                .collect()
        })
        .collect()
}

fn roof_problem<'a>(phi: &'a Channel, rho: &DensityMatrix) -> Result<(Stiefel, RoofEntropy<'a>)> {
    if rho.dim() != phi.dim_in() {
        return Err(Error::mismatch(format!(
            "channel {} takes C^{} inputs, state is on C^{}",
            phi.label(),
            phi.dim_in(),
            rho.dim()
        )));
    }
    let factor = sqrt_factor(rho);
    let r = factor.len();
    let m = r * r;
    Ok((
        Stiefel { m, r },
        RoofEntropy {
            channel: phi,
            factor,
            members: m,
        },
    ))
}

/// `min Σ p_i S(Φ(ρ_i))` over decompositions `Σ p_i ρ_i = ρ`.
pub fn convex_closure(
    phi: &Channel,
    rho: &DensityMatrix,
    cfg: &OptimizerConfig,
) -> Result<Optimum> {
    let (stiefel, obj) = roof_problem(phi, rho)?;
    let ms = multi_start(&stiefel, &obj, cfg)?;
    let members = obj
        .member_vectors(&ms.best.point)
        .into_iter()
        .filter_map(|v| {
            let w = vec_norm(&v).powi(2);
            (w > 1e-15).then(|| EnsembleMember {
                weight: w,
                state: DensityMatrix::from_pure(&PureState::normalized(v).expect("nonzero member")),
            })
        })
        .collect();
    Ok(Optimum {
        value: ms.best.value,
        argument: Argument::Ensemble(Ensemble { members }),
        restarts_agreeing: ms.agreeing,
        residual_gradient_norm: ms.best.gradient_norm,
        converged: ms.best.converged,
        best_restart: ms.best_restart,
        iterations: ms.best.iterations,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}

/// `Σ p_i S(Φ(ρ_i))` for a given ensemble.
pub fn ensemble_output_entropy(phi: &Channel, ensemble: &Ensemble) -> Result<f64> {
    let mut total = 0.0;
    for m in &ensemble.members {
        total += m.weight * crate::matrix::von_neumann_entropy(&phi.apply(&m.state)?);
    }
    Ok(total)
}

/// Random pure decomposition of `ρ` through a random `r²×r` isometry,
/// exactly as the convex-closure solver parameterizes them.
pub fn random_decomposition(rho: &DensityMatrix, seed: u64) -> Ensemble {
    let factor = sqrt_factor(rho);
    let r = factor.len();
    let stiefel = Stiefel { m: r * r, r };
    let u = stiefel.random_point(&mut rng(seed));
    let members = (0..r * r)
        .filter_map(|i| {
            let mut v = vec![C64::new(0.0, 0.0); rho.dim()];
            for (k, a) in factor.iter().enumerate() {
                for (vx, ax) in v.iter_mut().zip(a) {
                    *vx += u[i * r + k] * ax;
                }
            }
            let w = vec_norm(&v).powi(2);
            (w > 1e-15).then(|| EnsembleMember {
                weight: w,
                state: DensityMatrix::from_pure(&PureState::normalized(v).expect("nonzero member")),
            })
        })
        .collect();
    Ensemble { members }
}

/// Analytic Riemannian gradient of a solver objective next to its central
/// finite-difference estimate.
#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `‖analytic − numeric‖ / ‖numeric‖`
    pub relative_error: f64,
}

fn summarize(analytic: Vec<C64>, numeric: Vec<C64>) -> GradientCheck {
    let diff: f64 = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let numeric_norm = vec_norm(&numeric);
    GradientCheck {
        analytic_norm: vec_norm(&analytic),
        numeric_norm,
        relative_error: diff / numeric_norm.max(f64::MIN_POSITIVE),
    }
}

/// Output-entropy gradient at `psi`.
pub fn gradient_check_entropy(phi: &Channel, psi: &PureState, h: f64) -> GradientCheck {
    let sphere = Sphere { n: phi.dim_in() };
    let (a, n) = finite_difference_check(
        &sphere,
        &OutputEntropy { channel: phi },
        psi.amplitudes(),
        h,
    );
    summarize(a, n)
}

/// Output-norm gradient at `psi` (of `−‖·‖_p`, the minimized objective).
pub fn gradient_check_pnorm(phi: &Channel, p: SchattenP, psi: &PureState, h: f64) -> GradientCheck {
    let sphere = Sphere { n: phi.dim_in() };
    let (a, n) = finite_difference_check(
        &sphere,
        &NegOutputNorm { channel: phi, p },
        psi.amplitudes(),
        h,
    );
    summarize(a, n)
}

/// Convex-roof gradient at a random isometry drawn from `seed`.
pub fn gradient_check_convex_closure(
    phi: &Channel,
    rho: &DensityMatrix,
    seed: u64,
    h: f64,
) -> Result<GradientCheck> {
    let (stiefel, obj) = roof_problem(phi, rho)?;
    let u = stiefel.random_point(&mut rng(seed));
    let (a, n) = finite_difference_check(&stiefel, &obj, &u, h);
    Ok(summarize(a, n))
}
