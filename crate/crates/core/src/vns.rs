//! Variable neighborhood search stage: a shake on a coarse mesh followed by
//! a greedy coordinate descent on the fine mesh, run after failed iterations
//! under a fractional evaluation budget.

use rand::Rng;

use crate::driver::{BudgetExhausted, Session, Stage};
use crate::geometry::{snap_to_mesh, snap_to_steps, Bounds, MeshState};

#[derive(Debug, Clone)]
pub struct VnsConfig {
    /// Coarse shake mesh; `None` uses the initial frame size `Δ⁰`.
    pub mesh: Option<Vec<f64>>,
    /// Descent proximity cutoff; `None` uses the smallest `min_mesh` entry.
    pub rho: Option<f64>,
    /// Fraction of `max_evals` the stage may spend over the whole run.
    pub xi_budget: f64,
    pub xi0: u32,
    pub xi_increment: u32,
}

impl Default for VnsConfig {
    fn default() -> Self {
        Self {
            mesh: None,
            rho: None,
            xi_budget: 0.25,
            xi0: 1,
            xi_increment: 1,
        }
    }
}

/// Mutable across-iteration state: current neighborhood order and how much
/// of the stage budget has been spent.
#[derive(Debug, Clone)]
pub struct VnsState {
    pub order: u32,
    pub evals_used: usize,
}

impl VnsState {
    pub fn new(xi0: u32) -> Self {
        Self {
            order: xi0.max(1),
            evals_used: 0,
        }
    }

    /// Successful iteration: fall back to the smallest neighborhood.
    pub fn reset(&mut self, xi0: u32) {
        self.order = xi0.max(1);
    }

    /// Failed iteration: widen the neighborhood.
    pub fn escalate(&mut self, increment: u32) {
        self.order += increment;
    }
}

/// The stage runs only after a failed iteration and only while its share of
/// the budget is unspent.
pub fn vns_trigger(
    last_iteration_failed: bool,
    evals_used: usize,
    xi_budget: f64,
    max_evals: usize,
) -> bool {
    last_iteration_failed && (evals_used as f64) < xi_budget * max_evals as f64
}

/// Uniform draw from the L∞ shell of radius `order` (in coarse mesh steps)
/// around `x`, then clipped inward so the result stays inside the box.
/// Rejection sampling over the cube keeps the shell distribution uniform.
pub fn shake(
    x: &[f64],
    order: u32,
    delta_v: &[f64],
    bounds: &Bounds,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(order >= 1, "shake needs a positive neighborhood order");
    let k = order as i64;
    let z: Vec<i64> = loop {
        let cand: Vec<i64> = x.iter().map(|_| rng.gen_range(-k..=k)).collect();
        if cand.iter().map(|v| v.abs()).max() == Some(k) {
            break cand;
        }
    };
    let raw: Vec<f64> = x
        .iter()
        .zip(&z)
        .zip(delta_v)
        .map(|((&xj, &zj), &dv)| xj + zj as f64 * dv)
        .collect();
    snap_to_steps(&raw, x, delta_v, bounds)
}

/// Greedy coordinate descent from `start` on the fine mesh: move to the
/// first strictly improving axis neighbor `± δ_j e_j`, repeat. Stops when no
/// neighbor improves, when a candidate falls within L∞ distance `rho` of an
/// already evaluated point, or when `stage_cap` fresh evaluations are spent.
pub fn descent(
    session: &mut Session,
    start: &[f64],
    center: &[f64],
    state: &MeshState,
    rho: f64,
    stage_cap: usize,
) -> Result<(Vec<f64>, f64), BudgetExhausted> {
    let start_evals = session.evals();
    let spent = |s: &Session| s.evals() - start_evals;
    if stage_cap == 0 {
        return Err(BudgetExhausted);
    }
    let mut current = start.to_vec();
    let mut f_current = session.evaluate(&current, Stage::VnsSearch)?;
    loop {
        if spent(session) >= stage_cap {
            return Ok((current, f_current));
        }
        let mut moved = false;
        'axes: for j in 0..current.len() {
            for sign in [1.0f64, -1.0] {
                let mut cand = current.clone();
                cand[j] += sign * state.mesh_size()[j];
                let cand = snap_to_mesh(&cand, center, state, session.bounds());
                if cand == current {
                    continue;
                }
                // proximity rule: do not re-explore sampled territory
                if session.cache.get(&cand).is_none() && session.cache.any_within(&cand, rho) {
                    return Ok((current, f_current));
                }
                let fresh = session.cache.get(&cand).is_none();
                if fresh && spent(session) >= stage_cap {
                    return Ok((current, f_current));
                }
                let v = session.evaluate(&cand, Stage::VnsSearch)?;
                if v < f_current {
                    current = cand;
                    f_current = v;
                    moved = true;
                    break 'axes;
                }
            }
        }
        if !moved {
            return Ok((current, f_current));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{Incumbent, Session};
    use crate::geometry::{initial_sizes, Bounds};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn big_box() -> Bounds {
        Bounds::new(vec![0.0, 0.0], vec![100.0, 100.0]).unwrap()
    }

    #[test]
    fn shake_lands_on_the_shell() {
        let bounds = big_box();
        let delta_v = vec![1.0, 1.0];
        let x = vec![50.0, 50.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for order in 1..=3u32 {
            for _ in 0..200 {
                let y = shake(&x, order, &delta_v, &bounds, &mut rng);
                let steps: Vec<f64> = y.iter().zip(&x).map(|(a, b)| (a - b) / 1.0).collect();
                let linf = steps.iter().map(|s| s.abs()).fold(0.0f64, f64::max);
                assert!((linf - order as f64).abs() < 1e-9, "y = {y:?}");
                for s in steps {
                    assert!((s - s.round()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn shake_clips_inward_at_the_boundary() {
        let bounds = big_box();
        let delta_v = vec![10.0, 10.0];
        let x = vec![95.0, 5.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let y = shake(&x, 2, &delta_v, &bounds, &mut rng);
            assert!(bounds.contains(&y), "clipped point left the box: {y:?}");
        }
    }

    /// The 2-D shell at order 2 has 16 lattice points; a chi-square check at
    /// a generous threshold guards against a biased sampler.
    #[test]
    fn shake_is_uniform_over_the_shell() {
        let bounds = big_box();
        let delta_v = vec![1.0, 1.0];
        let x = vec![50.0, 50.0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts: HashMap<(i64, i64), u64> = HashMap::new();
        let trials = 16_000u64;
        for _ in 0..trials {
            let y = shake(&x, 2, &delta_v, &bounds, &mut rng);
            let key = (
                (y[0] - x[0]).round() as i64,
                (y[1] - x[1]).round() as i64,
            );
            *counts.entry(key).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 16);
        let expected = trials as f64 / 16.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 15 degrees of freedom; 99.9th percentile ≈ 37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn descent_walks_downhill_and_stops_at_a_local_minimum() {
        let f = |x: &[f64]| (x[0] - 40.0).abs() + (x[1] - 60.0).abs();
        let bounds = big_box();
        let state = initial_sizes(&bounds, 0.5).unwrap();
        let mut session = Session::new(&f, bounds, 500);
        let center = vec![50.0, 50.0];
        let (p, v) = descent(&mut session, &center, &center, &state, 1e-9, 400).unwrap();
        // mesh step is 10, so the descent reaches the minimum exactly
        assert_eq!(p, vec![40.0, 60.0]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn descent_monotonically_improves() {
        let f = |x: &[f64]| (x[0] - 12.0).powi(2) + (x[1] - 81.0).powi(2);
        let bounds = big_box();
        let state = initial_sizes(&bounds, 0.5).unwrap();
        let mut session = Session::new(&f, bounds, 500);
        let center = vec![50.0, 50.0];
        let (_, v) = descent(&mut session, &center, &center, &state, 1e-9, 400).unwrap();
        assert!(v < f(&center));
        let mut best = f64::INFINITY;
        let mut current_best = f64::INFINITY;
        for r in session.records() {
            best = best.min(r.value);
            assert!(r.best_so_far <= current_best.min(best) + 1e-15);
            current_best = r.best_so_far;
        }
    }

    #[test]
    fn descent_honors_the_stage_cap() {
        let f = |x: &[f64]| -(x[0] + x[1]); // improves forever toward the corner
        let bounds = big_box();
        let state = initial_sizes(&bounds, 0.5).unwrap();
        let mut session = Session::new(&f, bounds, 500);
        let center = vec![50.0, 50.0];
        descent(&mut session, &center, &center, &state, 1e-9, 7).unwrap();
        assert!(session.evals() <= 7);
    }

    #[test]
    fn descent_aborts_near_previously_sampled_points() {
        let f = |x: &[f64]| -(x[0] + x[1]);
        let bounds = big_box();
        let state = initial_sizes(&bounds, 0.5).unwrap();
        let mut session = Session::new(&f, bounds.clone(), 500);
        // pre-sample the point the first descent move would reach
        session
            .evaluate(&[60.0, 50.0], crate::driver::Stage::Poll)
            .unwrap();
        let center = vec![49.5, 50.0];
        // rho larger than the 0.5 offset between the descent line and the
        // pre-sampled point forces an early stop
        let (p, _) = descent(&mut session, &center, &center, &state, 2.0, 400).unwrap();
        assert_eq!(p, center);
    }

    #[test]
    fn trigger_requires_failure_and_budget() {
        assert!(vns_trigger(true, 0, 0.25, 100));
        assert!(vns_trigger(true, 24, 0.25, 100));
        assert!(!vns_trigger(true, 25, 0.25, 100));
        assert!(!vns_trigger(false, 0, 0.25, 100));
    }

    #[test]
    fn state_reset_and_escalate() {
        let mut s = VnsState::new(1);
        assert_eq!(s.order, 1);
        s.escalate(1);
        s.escalate(1);
        assert_eq!(s.order, 3);
        s.reset(1);
        assert_eq!(s.order, 1);
    }

    #[test]
    fn full_driver_escapes_the_shallow_well() {
        use crate::driver::{optimize, TunerConfig};
        use crate::functions::{double_well, DOUBLE_WELL_DEEP};
        let bounds = Bounds::new(vec![0.0], vec![10.0]).unwrap();
        let mut cfg = TunerConfig::new(bounds, vec![7.0]);
        cfg.min_mesh = vec![1e-4];
        cfg.max_evals = 200;
        cfg.vns = Some(VnsConfig::default());
        let f = |x: &[f64]| double_well(x);
        let (inc, _) = optimize(&cfg, &f).unwrap();
        assert!(
            (inc.point[0] - DOUBLE_WELL_DEEP).abs() < 0.1,
            "still trapped at {:?}",
            inc
        );
        // a mild check that the plain driver stays trapped, so the escape
        // above is attributable to the shake
        let bounds = Bounds::new(vec![0.0], vec![10.0]).unwrap();
        let mut plain = TunerConfig::new(bounds, vec![7.0]);
        plain.min_mesh = vec![1e-4];
        plain.max_evals = 200;
        let (inc, _) = optimize(&plain, &f).unwrap();
        assert!((inc.point[0] - 7.0).abs() < 0.5, "plain run found {:?}", inc);
    }

    #[test]
    fn driver_respects_the_vns_budget_fraction() {
        use crate::driver::{optimize, Stage, TunerConfig};
        use crate::functions::rastrigin;
        let bounds = Bounds::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let mut cfg = TunerConfig::new(bounds, vec![2.0, -2.0]);
        cfg.min_mesh = vec![1e-7, 1e-7];
        cfg.max_evals = 200;
        cfg.vns = Some(VnsConfig::default());
        let f = |x: &[f64]| rastrigin(x, &[0.0, 0.0]);
        let (_, trace) = optimize(&cfg, &f).unwrap();
        let vns_evals = trace
            .records
            .iter()
            .filter(|r| r.stage == Stage::VnsSearch)
            .count();
        let cap = (0.25f64 * 200.0).ceil() as usize;
        assert!(vns_evals <= cap, "vns used {vns_evals} > {cap}");
    }

    #[test]
    fn shake_then_descent_is_deterministic_per_seed() {
        let bounds = big_box();
        let delta_v = vec![10.0, 10.0];
        let x = vec![50.0, 50.0];
        let a = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            shake(&x, 3, &delta_v, &bounds, &mut rng)
        };
        let b = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            shake(&x, 3, &delta_v, &bounds, &mut rng)
        };
        assert_eq!(a, b);
        let _ = Incumbent {
            point: x,
            value: 0.0,
        };
    }
}
