//! Mesh and frame arithmetic for the Ortho-MADS poll stage.
//!
//! The optimizer works on a lattice of spacing `δ` centered at the incumbent,
//! polls inside a frame of radius `Δ·b`, and refines both sizes between
//! iterations with `δ = min(Δ, Δ²)` so the mesh shrinks faster than the frame.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("bounds must satisfy lower[{0}] < upper[{0}]")]
    InvalidBounds(usize),
    #[error("dimension must be at least 1")]
    EmptyBounds,
    #[error("shrink factor must lie in (0, 1), got {0}")]
    InvalidShrink(f64),
}

/// Box constraints `L ≤ x ≤ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(GeometryError::EmptyBounds);
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l < u) || !l.is_finite() || !u.is_finite() {
                return Err(GeometryError::InvalidBounds(j));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&v, &l), &u)| v >= l && v <= u)
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((&v, &l), &u)| v.clamp(l, u))
            .collect()
    }
}

/// Per-dimension frame size `Δ`, mesh size `δ`, and the shrink factor `τ`.
///
/// Invariants maintained by every constructor and update:
/// `0 < δ[j] ≤ Δ[j]`, `δ[j] = min(Δ[j], Δ[j]²)` and `Δ[j] ≤ Δ⁰[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshState {
    frame: Vec<f64>,
    mesh: Vec<f64>,
    shrink: f64,
    initial_frame: Vec<f64>,
}

impl MeshState {
    pub fn frame_size(&self) -> &[f64] {
        &self.frame
    }

    pub fn mesh_size(&self) -> &[f64] {
        &self.mesh
    }

    pub fn shrink_factor(&self) -> f64 {
        self.shrink
    }

    pub fn initial_frame(&self) -> &[f64] {
        &self.initial_frame
    }

    /// True once any mesh size has reached its per-dimension floor, which is
    /// the stopping condition of the main loop.
    pub fn converged(&self, min_mesh: &[f64]) -> bool {
        self.mesh.iter().zip(min_mesh).any(|(&d, &m)| d <= m)
    }
}

/// Initial sizes from the box: `Δ⁰ = (U − L) / 10` and `δ⁰ = Δ⁰`.
pub fn initial_sizes(bounds: &Bounds, shrink: f64) -> Result<MeshState, GeometryError> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(GeometryError::InvalidShrink(shrink));
    }
    let frame: Vec<f64> = bounds
        .lower()
        .iter()
        .zip(bounds.upper())
        .map(|(&l, &u)| (u - l) / 10.0)
        .collect();
    Ok(MeshState {
        mesh: frame.clone(),
        initial_frame: frame.clone(),
        frame,
        shrink,
    })
}

/// Frame update after one iteration: grow by `τ⁻¹` on success (capped at
/// `Δ⁰`), shrink by `τ` on failure, then re-derive `δ = min(Δ, Δ²)`.
pub fn update_after_iteration(state: &MeshState, success: bool) -> MeshState {
    let frame: Vec<f64> = state
        .frame
        .iter()
        .zip(&state.initial_frame)
        .map(|(&d, &d0)| {
            if success {
                (d / state.shrink).min(d0)
            } else {
                d * state.shrink
            }
        })
        .collect();
    let mesh = frame.iter().map(|&d| d.min(d * d)).collect();
    MeshState {
        frame,
        mesh,
        shrink: state.shrink,
        initial_frame: state.initial_frame.clone(),
    }
}

/// Rounds `x` to the mesh point `center + δ∘m` with integer `m`, half away
/// from zero, then pulls the multiplier inward so the result stays in the box.
pub fn snap_to_mesh(x: &[f64], center: &[f64], state: &MeshState, bounds: &Bounds) -> Vec<f64> {
    snap_to_steps(x, center, &state.mesh, bounds)
}

/// Same rounding with an explicit per-dimension step, used by the VNS shake
/// on its coarse mesh.
pub fn snap_to_steps(x: &[f64], center: &[f64], steps: &[f64], bounds: &Bounds) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let step = steps[j];
        let mut m = ((x[j] - center[j]) / step).round();
        let m_min = ((bounds.lower()[j] - center[j]) / step - 1e-9).ceil();
        let m_max = ((bounds.upper()[j] - center[j]) / step + 1e-9).floor();
        m = m.clamp(m_min, m_max);
        let mut v = center[j] + m * step;
        // floating-point slack at the box edge: retreat one mesh step inward
        if v > bounds.upper()[j] {
            v = center[j] + (m - 1.0) * step;
        }
        if v < bounds.lower()[j] {
            v = center[j] + (m + 1.0) * step;
        }
        out.push(v);
    }
    out
}

/// The `2n` poll directions of one iteration: integer columns `{H, −H}` with
/// the positive half pairwise orthogonal, plus the frame bound
/// `b = max ‖d‖∞` over the set.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    columns: Vec<Vec<i64>>,
    frame_bound: f64,
}

impl DirectionSet {
    pub fn columns(&self) -> &[Vec<i64>] {
        &self.columns
    }

    pub fn frame_bound(&self) -> f64 {
        self.frame_bound
    }
}

fn halton(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

fn nth_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if (2..c).take_while(|d| d * d <= c).all(|d| c % d != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Deterministic Ortho poll directions for `(iteration, seed)`.
///
/// A Halton point indexed by the iteration (offset by the seed) is mapped to
/// an integer vector `q`, and the integer Householder matrix
/// `H = ‖q‖²I − 2qqᵀ` supplies `n` exactly orthogonal columns; the set is
/// completed with their negatives. Columns are reduced by their gcd so the
/// common scale stays small. The rounding resolution grows with the
/// iteration index, which is what makes the accumulated directions dense.
pub fn ortho_directions(iteration: usize, n: usize, seed: u64) -> DirectionSet {
    assert!(n >= 1);
    let index = 1 + iteration as u64 + seed % 10_000;
    let primes = nth_primes(n);
    let v: Vec<f64> = primes
        .iter()
        .map(|&p| 2.0 * halton(index, p) - 1.0)
        .collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = (2.0 + 0.25 * iteration as f64).min(16.0);
    let mut q: Vec<i64> = if norm > 1e-12 {
        v.iter().map(|a| (scale * a / norm).round() as i64).collect()
    } else {
        vec![0; n]
    };
    if q.iter().all(|&a| a == 0) {
        q = v
            .iter()
            .enumerate()
            .map(|(j, &a)| if j == 0 && a == 0.0 { 1 } else { a.signum() as i64 })
            .collect();
        if q.iter().all(|&a| a == 0) {
            q[0] = 1;
        }
    }
    let qq: i64 = q.iter().map(|&a| a * a).sum();
    let mut columns = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut col: Vec<i64> = (0..n)
            .map(|j| {
                let diag = if i == j { qq } else { 0 };
                diag - 2 * q[i] * q[j]
            })
            .collect();
        let g = col.iter().fold(0, |acc, &a| gcd(acc, a));
        if g > 1 {
            for a in &mut col {
                *a /= g;
            }
        }
        columns.push(col);
    }
    for i in 0..n {
        columns.push(columns[i].iter().map(|&a| -a).collect());
    }
    let frame_bound = columns
        .iter()
        .flat_map(|c| c.iter().map(|&a| a.abs()))
        .max()
        .unwrap_or(1) as f64;
    DirectionSet {
        columns,
        frame_bound,
    }
}

/// Strict frame membership: `|p[j] − center[j]| < Δ[j]·b` for all `j`.
pub fn frame_membership(
    p: &[f64],
    center: &[f64],
    state: &MeshState,
    dirs: &DirectionSet,
) -> bool {
    p.iter()
        .zip(center)
        .zip(state.frame_size())
        .all(|((&a, &c), &frame)| (a - c).abs() < frame * dirs.frame_bound())
}
