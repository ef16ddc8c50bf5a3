//! Comparison tuners: grid search, random search with halving refinement,
//! and simulated annealing — all under the same trace/budget contract as
//! the main driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::{BudgetExhausted, Incumbent, RunTrace, Session, Stage, StopReason};
use crate::geometry::Bounds;

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub bounds: Bounds,
    pub budget: usize,
    pub seed: u64,
    /// `None` derives `⌊budget^(1/n)⌋` points per axis.
    pub grid_points_per_axis: Option<usize>,
    /// Use the classic preset axes `{1, 10, 20, …, 90}` on every dimension
    /// instead of an even split.
    pub preset_grid: bool,
    pub rs_refine_rounds: usize,
    pub sa_t0: f64,
    pub sa_cooling: f64,
}

impl BaselineConfig {
    pub fn new(bounds: Bounds) -> Self {
        Self {
            bounds,
            budget: 100,
            seed: 0,
            grid_points_per_axis: None,
            preset_grid: false,
            rs_refine_rounds: 3,
            sa_t0: 1.0,
            sa_cooling: 0.95,
        }
    }
}

/// Axis values `{1, 10, 20, …, 90}`.
pub fn preset_grid_axis() -> Vec<f64> {
    let mut v = vec![1.0];
    v.extend((1..=9).map(|i| 10.0 * i as f64));
    v
}

fn best_update(best: &mut Option<Incumbent>, point: Vec<f64>, value: f64) {
    // strict improvement only: ties keep the earlier (lowest-coordinate) point
    if best.as_ref().map_or(true, |b| value < b.value) {
        *best = Some(Incumbent { point, value });
    }
}

/// Exhaustive Cartesian grid, evenly spaced with both bounds included
/// (or the preset axes). Evaluation runs in lexicographic order so equal
/// values resolve to the lowest coordinates.
pub fn grid_search(
    objective: &dyn Fn(&[f64]) -> f64,
    cfg: &BaselineConfig,
) -> (Incumbent, RunTrace) {
    let n = cfg.bounds.dim();
    let axes: Vec<Vec<f64>> = if cfg.preset_grid {
        vec![preset_grid_axis(); n]
    } else {
        let per_axis = cfg
            .grid_points_per_axis
            .unwrap_or_else(|| (cfg.budget as f64).powf(1.0 / n as f64).floor() as usize)
            .max(1);
        (0..n)
            .map(|j| {
                let (lo, hi) = (cfg.bounds.lower()[j], cfg.bounds.upper()[j]);
                if per_axis == 1 {
                    vec![lo]
                } else {
                    (0..per_axis)
                        .map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64)
                        .collect()
                }
            })
            .collect()
    };
    let mut session = Session::new(objective, cfg.bounds.clone(), cfg.budget);
    let mut best: Option<Incumbent> = None;
    let mut counter = vec![0usize; n];
    let mut exhausted = false;
    'grid: loop {
        let point: Vec<f64> = (0..n).map(|j| axes[j][counter[j]]).collect();
        match session.evaluate(&point, Stage::Baseline) {
            Ok(v) => best_update(&mut best, point, v),
            Err(BudgetExhausted) => {
                exhausted = true;
                break;
            }
        }
        // odometer with the first axis slowest: lexicographic point order
        let mut j = n;
        loop {
            if j == 0 {
                break 'grid;
            }
            j -= 1;
            counter[j] += 1;
            if counter[j] < axes[j].len() {
                break;
            }
            counter[j] = 0;
        }
    }
    let reason = if exhausted {
        StopReason::BudgetExhausted
    } else {
        StopReason::TargetReached
    };
    (best.unwrap(), session.finish(reason, Vec::new()))
}

/// Half the budget on uniform exploration, then refinement rounds in boxes
/// that halve around the best point each round.
pub fn random_search(
    objective: &dyn Fn(&[f64]) -> f64,
    cfg: &BaselineConfig,
) -> (Incumbent, RunTrace) {
    let n = cfg.bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut session = Session::new(objective, cfg.bounds.clone(), cfg.budget);
    let mut best: Option<Incumbent> = None;

    let stage1 = (cfg.budget / 2).max(1);
    let sample_box = |session: &mut Session,
                          rng: &mut ChaCha8Rng,
                          best: &mut Option<Incumbent>,
                          lo: &[f64],
                          hi: &[f64],
                          count: usize|
     -> Result<(), BudgetExhausted> {
        for _ in 0..count {
            let p: Vec<f64> = (0..n)
                .map(|j| {
                    if hi[j] > lo[j] {
                        rng.gen_range(lo[j]..=hi[j])
                    } else {
                        lo[j]
                    }
                })
                .collect();
            let v = session.evaluate(&p, Stage::Baseline)?;
            best_update(best, p, v);
        }
        Ok(())
    };

    let run = (|| -> Result<(), BudgetExhausted> {
        sample_box(
            &mut session,
            &mut rng,
            &mut best,
            cfg.bounds.lower(),
            cfg.bounds.upper(),
            stage1,
        )?;
        let mut remaining = cfg.budget.saturating_sub(stage1);
        let rounds = cfg.rs_refine_rounds.max(1);
        for round in 0..rounds {
            if remaining == 0 {
                break;
            }
            let share = if round + 1 == rounds {
                remaining
            } else {
                remaining / (rounds - round)
            };
            remaining -= share;
            let center = best.as_ref().expect("stage 1 sampled").point.clone();
            let half: Vec<f64> = (0..n)
                .map(|j| {
                    (cfg.bounds.upper()[j] - cfg.bounds.lower()[j]) / 2f64.powi(round as i32 + 2)
                })
                .collect();
            let lo: Vec<f64> = (0..n)
                .map(|j| (center[j] - half[j]).max(cfg.bounds.lower()[j]))
                .collect();
            let hi: Vec<f64> = (0..n)
                .map(|j| (center[j] + half[j]).min(cfg.bounds.upper()[j]))
                .collect();
            sample_box(&mut session, &mut rng, &mut best, &lo, &hi, share)?;
        }
        Ok(())
    })();
    let reason = match run {
        Ok(()) => StopReason::BudgetExhausted, // the whole budget is spent by design
        Err(BudgetExhausted) => StopReason::BudgetExhausted,
    };
    (best.unwrap(), session.finish(reason, Vec::new()))
}

/// Metropolis chain with Gaussian proposals scaled by `T·(U−L)` and
/// geometric cooling per evaluation; the best-ever point is returned.
pub fn simulated_annealing(
    objective: &dyn Fn(&[f64]) -> f64,
    cfg: &BaselineConfig,
) -> (Incumbent, RunTrace) {
    let n = cfg.bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut session = Session::new(objective, cfg.bounds.clone(), cfg.budget);
    let mut best: Option<Incumbent> = None;

    let gauss = |rng: &mut ChaCha8Rng| {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };

    let mut t = cfg.sa_t0;
    let run = (|| -> Result<(), BudgetExhausted> {
        let mut current: Vec<f64> = (0..n)
            .map(|j| rng.gen_range(cfg.bounds.lower()[j]..=cfg.bounds.upper()[j]))
            .collect();
        let mut f_current = session.evaluate(&current, Stage::Baseline)?;
        best_update(&mut best, current.clone(), f_current);
        t *= cfg.sa_cooling;
        loop {
            let proposal: Vec<f64> = (0..n)
                .map(|j| {
                    let range = cfg.bounds.upper()[j] - cfg.bounds.lower()[j];
                    let step = 0.5 * t * range * gauss(&mut rng);
                    (current[j] + step).clamp(cfg.bounds.lower()[j], cfg.bounds.upper()[j])
                })
                .collect();
            let f_prop = session.evaluate(&proposal, Stage::Baseline)?;
            best_update(&mut best, proposal.clone(), f_prop);
            let delta = f_prop - f_current;
            let accept = delta <= 0.0 || rng.gen_range(0.0..1.0) < (-delta / t).exp();
            if accept {
                current = proposal;
                f_current = f_prop;
            }
            t *= cfg.sa_cooling;
        }
    })();
    run.expect_err("the chain only stops on budget exhaustion");
    (
        best.unwrap(),
        session.finish(StopReason::BudgetExhausted, Vec::new()),
    )
}
