//! Main optimization loop: search stages (NM, VNS), the Ortho poll stage,
//! the evaluation cache with the extreme barrier, and mesh-size stopping.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{
    self, Bounds, DirectionSet, MeshState, initial_sizes, ortho_directions, snap_to_mesh,
    update_after_iteration,
};
use crate::nm::{self, NmConfig};
use crate::vns::{self, VnsConfig, VnsState};

/// Which part of the run produced an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initial,
    NmSearch,
    VnsSearch,
    Poll,
    Baseline,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::NmSearch => "nm_search",
            Stage::VnsSearch => "vns_search",
            Stage::Poll => "poll",
            Stage::Baseline => "baseline",
        }
    }
}

/// One black-box evaluation as it happened.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub eval_index: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub stage: Stage,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MeshConverged,
    BudgetExhausted,
    TargetReached,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MeshConverged => "mesh_converged",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::TargetReached => "target_reached",
        }
    }
}

/// Ordered record of every objective evaluation plus per-iteration mesh
/// sizes, enough to regenerate convergence plots and audit the mesh law.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub reason: StopReason,
    /// `(frame, mesh)` sizes at the head of each iteration.
    pub mesh_history: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Current best feasible point.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Raised when an evaluation would exceed `max_evals`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("evaluation budget exhausted")]
pub struct BudgetExhausted;

fn point_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Map from exact point coordinates to objective values; the black box is
/// invoked at most once per distinct point.
#[derive(Debug, Default, Clone)]
pub struct EvalCache {
    entries: Vec<(Vec<f64>, f64)>,
    index: HashMap<Vec<u64>, usize>,
}

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &[f64]) -> Option<f64> {
        self.index.get(&point_key(x)).map(|&i| self.entries[i].1)
    }

    pub fn insert(&mut self, x: Vec<f64>, value: f64) {
        let key = point_key(&x);
        if !self.index.contains_key(&key) {
            self.index.insert(key, self.entries.len());
            self.entries.push((x, value));
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.entries.iter().map(|(p, v)| (p.as_slice(), *v))
    }

    /// True if any stored point lies within L∞ distance `rho` of `x`.
    pub fn any_within(&self, x: &[f64], rho: f64) -> bool {
        self.entries.iter().any(|(p, _)| {
            p.iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                <= rho
        })
    }
}

/// Owns the objective, the cache, the trace and the budget; the only path
/// through which stages may evaluate the black box.
pub struct Session<'a> {
    objective: &'a dyn Fn(&[f64]) -> f64,
    bounds: Bounds,
    pub cache: EvalCache,
    records: Vec<TraceRecord>,
    max_evals: usize,
    best: f64,
}

impl<'a> Session<'a> {
    pub fn new(objective: &'a dyn Fn(&[f64]) -> f64, bounds: Bounds, max_evals: usize) -> Self {
        Self {
            objective,
            bounds,
            cache: EvalCache::new(),
            records: Vec::new(),
            max_evals,
            best: f64::INFINITY,
        }
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn evals(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Extreme-barrier evaluation: out-of-bounds points cost nothing and
    /// score `+∞`; cached points are replayed; fresh points consume budget.
    pub fn evaluate(&mut self, x: &[f64], stage: Stage) -> Result<f64, BudgetExhausted> {
        if !self.bounds.contains(x) {
            return Ok(f64::INFINITY);
        }
        if let Some(v) = self.cache.get(x) {
            return Ok(v);
        }
        if self.records.len() >= self.max_evals {
            return Err(BudgetExhausted);
        }
        let value = (self.objective)(x);
        self.best = self.best.min(value);
        self.records.push(TraceRecord {
            eval_index: self.records.len(),
            point: x.to_vec(),
            value,
            stage,
            best_so_far: self.best,
        });
        self.cache.insert(x.to_vec(), value);
        Ok(value)
    }

    pub fn finish(self, reason: StopReason, mesh_history: Vec<(Vec<f64>, Vec<f64>)>) -> RunTrace {
        RunTrace {
            records: self.records,
            reason,
            mesh_history,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("geometry: {0}")]
    Geometry(#[from] geometry::GeometryError),
    #[error("x0 must lie within the bounds")]
    X0OutOfBounds,
    #[error("x0 dimension {0} does not match bounds dimension {1}")]
    DimensionMismatch(usize, usize),
    #[error("min_mesh entries must be positive")]
    InvalidMinMesh,
    #[error("max_evals must be at least 1")]
    InvalidBudget,
    #[error("shrink factor tau must lie in (0, 1)")]
    InvalidTau,
    #[error("vns xi_budget must lie in (0, 1]")]
    InvalidXiBudget,
}

/// Full configuration of one tuning run.
#[derive(Debug, Clone)]
pub struct TunerConfig {
    pub bounds: Bounds,
    pub x0: Vec<f64>,
    pub min_mesh: Vec<f64>,
    pub max_evals: usize,
    pub seed: u64,
    pub tau: f64,
    pub nm: Option<NmConfig>,
    pub vns: Option<VnsConfig>,
    pub opportunistic: bool,
}

impl TunerConfig {
    /// Plain Ortho-MADS defaults: no search stages, `τ = 1/2`, budget
    /// `100·n`, minimum mesh size `0.009` per dimension.
    pub fn new(bounds: Bounds, x0: Vec<f64>) -> Self {
        let n = bounds.dim();
        Self {
            bounds,
            x0,
            min_mesh: vec![0.009; n],
            max_evals: 100 * n,
            seed: 0,
            tau: 0.5,
            nm: None,
            vns: None,
            opportunistic: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.bounds.dim();
        if self.x0.len() != n {
            return Err(ConfigError::DimensionMismatch(self.x0.len(), n));
        }
        if !self.bounds.contains(&self.x0) {
            return Err(ConfigError::X0OutOfBounds);
        }
        if self.min_mesh.len() != n || self.min_mesh.iter().any(|&m| !(m > 0.0)) {
            return Err(ConfigError::InvalidMinMesh);
        }
        if self.max_evals < 1 {
            return Err(ConfigError::InvalidBudget);
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ConfigError::InvalidTau);
        }
        if let Some(vns) = &self.vns {
            if !(vns.xi_budget > 0.0 && vns.xi_budget <= 1.0) {
                return Err(ConfigError::InvalidXiBudget);
            }
        }
        Ok(())
    }
}

/// Outcome of one poll stage.
pub enum PollOutcome {
    Improved(Incumbent),
    Failed,
}

/// Evaluates the `2n` Ortho poll points around the incumbent in direction
/// order. Non-opportunistic mode evaluates all of them and returns the
/// argmin among strict improvements; opportunistic mode stops at the first.
pub fn poll_step(
    session: &mut Session,
    incumbent: &Incumbent,
    state: &MeshState,
    iteration: usize,
    seed: u64,
    opportunistic: bool,
) -> Result<PollOutcome, BudgetExhausted> {
    let dirs = ortho_directions(iteration, incumbent.point.len(), seed);
    poll_with_directions(session, incumbent, state, &dirs, opportunistic)
}

pub fn poll_with_directions(
    session: &mut Session,
    incumbent: &Incumbent,
    state: &MeshState,
    dirs: &DirectionSet,
    opportunistic: bool,
) -> Result<PollOutcome, BudgetExhausted> {
    let mut best: Option<Incumbent> = None;
    for col in dirs.columns() {
        let raw: Vec<f64> = incumbent
            .point
            .iter()
            .zip(col)
            .zip(state.mesh_size())
            .map(|((&x, &d), &m)| x + m * d as f64)
            .collect();
        let trial = snap_to_mesh(&raw, &incumbent.point, state, session.bounds());
        let value = session.evaluate(&trial, Stage::Poll)?;
        if value < incumbent.value && best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(Incumbent {
                point: trial,
                value,
            });
            if opportunistic {
                break;
            }
        }
    }
    Ok(match best {
        Some(inc) => PollOutcome::Improved(inc),
        None => PollOutcome::Failed,
    })
}

/// The Alg. 1 loop. Runs until some mesh size reaches its floor or the
/// evaluation budget is spent; returns the incumbent and the full trace.
pub fn optimize(
    config: &TunerConfig,
    objective: &dyn Fn(&[f64]) -> f64,
) -> Result<(Incumbent, RunTrace), ConfigError> {
    config.validate()?;
    let mut session = Session::new(objective, config.bounds.clone(), config.max_evals);
    let mut state = initial_sizes(&config.bounds, config.tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mesh_history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    let vns_budget = config
        .vns
        .as_ref()
        .map(|v| (v.xi_budget * config.max_evals as f64).ceil() as usize)
        .unwrap_or(0);
    let delta_v: Vec<f64> = config
        .vns
        .as_ref()
        .and_then(|v| v.mesh.clone())
        .unwrap_or_else(|| state.initial_frame().to_vec());
    let rho = config
        .vns
        .as_ref()
        .and_then(|v| v.rho)
        .unwrap_or_else(|| config.min_mesh.iter().cloned().fold(f64::INFINITY, f64::min));
    let mut vns_state = VnsState::new(config.vns.as_ref().map(|v| v.xi0).unwrap_or(1));

    let x0 = config.bounds.clamp(&config.x0);
    let mut incumbent = match session.evaluate(&x0, Stage::Initial) {
        Ok(value) => Incumbent { point: x0, value },
        Err(BudgetExhausted) => unreachable!("budget >= 1 evaluates x0"),
    };

    let mut last_failed = false;
    let mut iteration = 0usize;
    let reason = loop {
        mesh_history.push((state.frame_size().to_vec(), state.mesh_size().to_vec()));
        if state.converged(&config.min_mesh) {
            break StopReason::MeshConverged;
        }
        let mut success = false;
        let mut exhausted = false;

        // VNS search stage: shake on the coarse mesh, then a bounded descent
        if let Some(vcfg) = &config.vns {
            if vns::vns_trigger(last_failed, vns_state.evals_used, vcfg.xi_budget, config.max_evals)
            {
                let before = session.evals();
                let stage_cap = vns_budget.saturating_sub(vns_state.evals_used);
                let shaken = vns::shake(
                    &incumbent.point,
                    vns_state.order,
                    &delta_v,
                    session.bounds(),
                    &mut rng,
                );
                let start = snap_to_mesh(&shaken, &incumbent.point, &state, session.bounds());
                match vns::descent(
                    &mut session,
                    &start,
                    &incumbent.point,
                    &state,
                    rho,
                    stage_cap,
                ) {
                    Ok((point, value)) => {
                        if value < incumbent.value {
                            incumbent = Incumbent { point, value };
                            success = true;
                        }
                    }
                    Err(BudgetExhausted) => exhausted = true,
                }
                vns_state.evals_used += session.evals() - before;
            }
        }

        // NM search stage; success skips the poll for this iteration
        if !success && !exhausted {
            if let Some(nm_cfg) = &config.nm {
                match nm::nm_search_stage(&mut session, &incumbent, &state, nm_cfg) {
                    Ok(Some((point, value))) => {
                        incumbent = Incumbent { point, value };
                        success = true;
                    }
                    Ok(None) => {}
                    Err(BudgetExhausted) => exhausted = true,
                }
            }
        }

        // Poll stage only on total search failure
        if !success && !exhausted {
            match poll_step(
                &mut session,
                &incumbent,
                &state,
                iteration,
                config.seed,
                config.opportunistic,
            ) {
                Ok(PollOutcome::Improved(inc)) => {
                    incumbent = inc;
                    success = true;
                }
                Ok(PollOutcome::Failed) => {}
                Err(BudgetExhausted) => exhausted = true,
            }
        }

        if exhausted {
            break StopReason::BudgetExhausted;
        }

        state = update_after_iteration(&state, success);
        if success {
            vns_state.reset(config.vns.as_ref().map(|v| v.xi0).unwrap_or(1));
        } else {
            vns_state.escalate(config.vns.as_ref().map(|v| v.xi_increment).unwrap_or(1));
        }
        last_failed = !success;
        iteration += 1;
    };

    let trace = session.finish(reason, mesh_history);
    Ok((incumbent, trace))
}
