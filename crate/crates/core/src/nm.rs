//! Nelder-Mead search stage: a bounded simplex search seeded from the
//! evaluation cache, with the four-zone step classification.

use crate::driver::{BudgetExhausted, Incumbent, Session, Stage};
use crate::geometry::{snap_to_mesh, MeshState};

/// Step coefficients and stage limits.
///
/// The default geometry reflects through the centroid (`q_oc = 1/2`,
/// `q_ic = -1/2`); `literal_constants` swaps the two contraction
/// coefficients for compatibility with an alternative convention.
#[derive(Debug, Clone)]
pub struct NmConfig {
    pub q_e: f64,
    pub q_oc: f64,
    pub q_ic: f64,
    pub zeta: f64,
    /// Fresh evaluations allowed per stage invocation; `None` means `4n`.
    pub max_evals_per_stage: Option<usize>,
    /// How far (in frame sizes) cached points may sit from the incumbent
    /// and still seed the simplex.
    pub radius_factor: f64,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            q_e: 2.0,
            q_oc: 0.5,
            q_ic: -0.5,
            zeta: 0.5,
            max_evals_per_stage: None,
            radius_factor: 4.0,
        }
    }
}

impl NmConfig {
    /// Contraction coefficients with the signs swapped.
    pub fn literal_constants() -> Self {
        Self {
            q_oc: -0.5,
            q_ic: 0.5,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub point: Vec<f64>,
    pub value: f64,
    /// Insertion sequence number; ties in value keep the older vertex first.
    order: u64,
}

/// `n + 1` affinely independent vertices kept sorted by `(value, order)`.
#[derive(Debug, Clone)]
pub struct Simplex {
    vertices: Vec<Vertex>,
    next_order: u64,
}

#[derive(Debug, PartialEq, Eq)]
pub enum SimplexError {
    WrongCount,
    Degenerate,
}

impl Simplex {
    pub fn new(points: Vec<(Vec<f64>, f64)>) -> Result<Self, SimplexError> {
        let n = match points.first() {
            Some((p, _)) => p.len(),
            None => return Err(SimplexError::WrongCount),
        };
        if points.len() != n + 1 {
            return Err(SimplexError::WrongCount);
        }
        if !affinely_independent(&points.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>()) {
            return Err(SimplexError::Degenerate);
        }
        let mut vertices: Vec<Vertex> = points
            .into_iter()
            .enumerate()
            .map(|(i, (point, value))| Vertex {
                point,
                value,
                order: i as u64,
            })
            .collect();
        vertices.sort_by(|a, b| {
            a.value
                .partial_cmp(&b.value)
                .unwrap()
                .then(a.order.cmp(&b.order))
        });
        let next_order = vertices.len() as u64;
        Ok(Self {
            vertices,
            next_order,
        })
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn best(&self) -> &Vertex {
        &self.vertices[0]
    }

    pub fn worst(&self) -> &Vertex {
        self.vertices.last().unwrap()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Centroid of all vertices except the worst.
    pub fn centroid(&self) -> Vec<f64> {
        let n = self.dim();
        let mut c = vec![0.0; n];
        for v in &self.vertices[..n] {
            for j in 0..n {
                c[j] += v.point[j];
            }
        }
        for cj in &mut c {
            *cj /= n as f64;
        }
        c
    }

    fn replace_worst(&mut self, point: Vec<f64>, value: f64) {
        let order = self.next_order;
        self.next_order += 1;
        *self.vertices.last_mut().unwrap() = Vertex {
            point,
            value,
            order,
        };
        self.resort();
    }

    fn resort(&mut self) {
        self.vertices.sort_by(|a, b| {
            a.value
                .partial_cmp(&b.value)
                .unwrap()
                .then(a.order.cmp(&b.order))
        });
    }

    /// L∞ diameter of the vertex set.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for a in &self.vertices {
            for b in &self.vertices {
                let dist = a
                    .point
                    .iter()
                    .zip(&b.point)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max);
                d = d.max(dist);
            }
        }
        d
    }
}

/// Edge-rank test: the edges from the first point must span `R^n`.
fn affinely_independent(points: &[Vec<f64>]) -> bool {
    let n = points[0].len();
    points.len() >= n + 1 && affine_rank(points) == n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    InsideContraction,
    Expansion,
    Reflection,
    OutsideContraction,
}

/// Trial points of one step, all on the ray through the centroid `x_c`
/// away from the worst vertex `x_n`.
#[derive(Debug, Clone)]
pub struct Candidates {
    pub reflect: Vec<f64>,
    pub expand: Vec<f64>,
    pub outside: Vec<f64>,
    pub inside: Vec<f64>,
}

pub fn candidates(x_c: &[f64], x_n: &[f64], cfg: &NmConfig) -> Candidates {
    let d: Vec<f64> = x_c.iter().zip(x_n).map(|(c, w)| c - w).collect();
    let along = |q: f64| -> Vec<f64> { x_c.iter().zip(&d).map(|(c, dj)| c + q * dj).collect() };
    Candidates {
        reflect: along(1.0),
        expand: along(cfg.q_e),
        outside: along(cfg.q_oc),
        inside: along(cfg.q_ic),
    }
}

/// Places `f(x_r)` relative to the sorted simplex values.
///
/// Checked from the inside out: worse than the worst vertex means inside
/// contraction, better than the best means expansion, better than at least
/// two vertices means plain reflection, everything else outside contraction.
pub fn classify_zone(f_r: f64, simplex: &Simplex) -> Zone {
    let values: Vec<f64> = simplex.vertices().iter().map(|v| v.value).collect();
    let worst = *values.last().unwrap();
    let best = values[0];
    if worst < f_r {
        Zone::InsideContraction
    } else if f_r < best {
        Zone::Expansion
    } else {
        // number of vertices the reflection strictly dominates
        let dominated = values.iter().filter(|&&v| f_r < v).count();
        if dominated >= 2 {
            Zone::Reflection
        } else {
            Zone::OutsideContraction
        }
    }
}

/// One simplex transformation. `eval` performs a (possibly cached,
/// possibly snapped) objective evaluation.
pub fn nm_step(
    simplex: &mut Simplex,
    cfg: &NmConfig,
    eval: &mut dyn FnMut(&[f64]) -> Result<f64, BudgetExhausted>,
) -> Result<(), BudgetExhausted> {
    let x_c = simplex.centroid();
    let x_n = simplex.worst().point.clone();
    let cands = candidates(&x_c, &x_n, cfg);
    let f_r = eval(&cands.reflect)?;
    match classify_zone(f_r, simplex) {
        Zone::Expansion => {
            let f_e = eval(&cands.expand)?;
            if f_r < f_e {
                simplex.replace_worst(cands.reflect, f_r);
            } else {
                simplex.replace_worst(cands.expand, f_e);
            }
        }
        Zone::Reflection => {
            simplex.replace_worst(cands.reflect, f_r);
        }
        Zone::OutsideContraction => {
            let f_oc = eval(&cands.outside)?;
            if f_r < f_oc {
                simplex.replace_worst(cands.reflect, f_r);
            } else {
                simplex.replace_worst(cands.outside, f_oc);
            }
        }
        Zone::InsideContraction => {
            let f_ic = eval(&cands.inside)?;
            if f_ic < simplex.worst().value {
                simplex.replace_worst(cands.inside, f_ic);
            } else {
                // total failure: shrink everything toward the best vertex
                let x0 = simplex.best().point.clone();
                let n = simplex.dim();
                let mut shrunk: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
                for v in &simplex.vertices()[1..] {
                    let p: Vec<f64> = x0
                        .iter()
                        .zip(&v.point)
                        .map(|(b, x)| b + cfg.zeta * (x - b))
                        .collect();
                    let f = eval(&p)?;
                    shrunk.push((p, f));
                }
                for (i, (p, f)) in shrunk.into_iter().enumerate() {
                    let order = simplex.next_order;
                    simplex.next_order += 1;
                    simplex.vertices[i + 1] = Vertex {
                        point: p,
                        value: f,
                        order,
                    };
                }
                simplex.resort();
            }
        }
    }
    Ok(())
}

/// Greedy pick of `n + 1` affinely independent cached points, best values
/// first, preferring those within the trust radius around the incumbent.
fn seed_simplex(
    session: &Session,
    incumbent: &Incumbent,
    state: &MeshState,
    cfg: &NmConfig,
) -> Option<Simplex> {
    let n = incumbent.point.len();
    let radius: Vec<f64> = state
        .frame_size()
        .iter()
        .map(|d| d * cfg.radius_factor)
        .collect();
    let in_radius = |p: &[f64]| {
        p.iter()
            .zip(&incumbent.point)
            .zip(&radius)
            .all(|((a, b), r)| (a - b).abs() <= *r)
    };
    for restrict in [true, false] {
        let mut pool: Vec<(Vec<f64>, f64)> = session
            .cache
            .iter()
            .filter(|(p, v)| v.is_finite() && (!restrict || in_radius(p)))
            .map(|(p, v)| (p.to_vec(), v))
            .collect();
        pool.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let mut chosen: Vec<(Vec<f64>, f64)> = Vec::new();
        for cand in pool {
            let mut trial: Vec<Vec<f64>> = chosen.iter().map(|(p, _)| p.clone()).collect();
            trial.push(cand.0.clone());
            // accept only points that grow the affine rank
            if affine_rank(&trial) == trial.len() - 1 {
                chosen.push(cand);
                if chosen.len() == n + 1 {
                    return Simplex::new(chosen).ok();
                }
            }
        }
    }
    None
}

fn affine_rank(points: &[Vec<f64>]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(1.0f64, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in &points[1..] {
        let mut e: Vec<f64> = p.iter().zip(&points[0]).map(|(a, b)| a - b).collect();
        for b in &basis {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            let nb: f64 = b.iter().map(|x| x * x).sum();
            for (ej, bj) in e.iter_mut().zip(b) {
                *ej -= dot / nb * bj;
            }
        }
        let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * scale {
            basis.push(e);
        }
    }
    basis.len()
}

/// Runs the NM search around the incumbent for at most `4n` fresh
/// evaluations (configurable); trial points are snapped to the current
/// mesh before evaluation. Returns a strictly better point if one is found.
pub fn nm_search_stage(
    session: &mut Session,
    incumbent: &Incumbent,
    state: &MeshState,
    cfg: &NmConfig,
) -> Result<Option<(Vec<f64>, f64)>, BudgetExhausted> {
    let n = incumbent.point.len();
    let max_stage = cfg.max_evals_per_stage.unwrap_or(4 * n);
    let mut simplex = match seed_simplex(session, incumbent, state, cfg) {
        Some(s) => s,
        None => return Ok(None),
    };
    let initial_diameter = simplex.diameter();
    let start_evals = session.evals();
    let mut best: Option<(Vec<f64>, f64)> = None;
    // cache hits cost nothing, so bound the number of steps as well
    for _ in 0..2 * max_stage.max(1) {
        if session.evals() - start_evals >= max_stage {
            break;
        }
        if simplex.diameter() < 1e-9 * initial_diameter.max(1.0) {
            break;
        }
        let center = incumbent.point.clone();
        let mut stage_exhausted = false;
        {
            let mut eval = |x: &[f64]| -> Result<f64, BudgetExhausted> {
                let snapped = snap_to_mesh(x, &center, state, session.bounds());
                let fresh = session.cache.get(&snapped).is_none();
                if fresh && session.evals() - start_evals >= max_stage {
                    stage_exhausted = true;
                    return Err(BudgetExhausted);
                }
                let v = session.evaluate(&snapped, Stage::NmSearch)?;
                if v.is_finite() && best.as_ref().map_or(true, |(_, bv)| v < *bv) {
                    best = Some((snapped, v));
                }
                Ok(v)
            };
            match nm_step(&mut simplex, cfg, &mut eval) {
                Ok(()) => {}
                Err(BudgetExhausted) if stage_exhausted => break,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(best.filter(|(_, v)| *v < incumbent.value))
}
