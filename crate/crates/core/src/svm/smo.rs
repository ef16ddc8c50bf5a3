//! Two-variable SMO with maximal-violating-pair selection for the C-SVM
//! dual: minimize ½αᵀQα − eᵀα subject to 0 ≤ α ≤ C and Σαᵢyᵢ = 0, with
//! Q = (yᵢyⱼ·κ(hᵢ,hⱼ)).

use super::rbf;

#[derive(Debug, Clone)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    /// Pair updates before the solver gives up; `None` means `10·d`.
    pub max_iter: Option<usize>,
}

impl SmoParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

/// Trained binary machine. `coeffs[i] = αᵢyᵢ` for the retained support
/// vectors; `alphas`/`label_signs` keep the full per-instance solution for
/// feasibility audits.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
    pub intercept: f64,
    pub gamma: f64,
    pub c: f64,
    /// Pair-update limit was hit before the KKT gap closed.
    pub stalled: bool,
    pub alphas: Vec<f64>,
    pub label_signs: Vec<f64>,
}

impl SvmModel {
    /// Decision value `Σ αᵢyᵢ κ(hᵢ, h) + b`.
    pub fn score(&self, h: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coeffs)
            .map(|(sv, &c)| c * rbf(sv, h, self.gamma))
            .sum::<f64>()
            + self.intercept
    }

    /// `½αᵀQα` is recomputed from scratch; used by tests against the
    /// brute-force dual oracle.
    pub fn dual_objective(&self, features: &[Vec<f64>]) -> f64 {
        let d = features.len();
        let mut quad = 0.0;
        for i in 0..d {
            if self.alphas[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                if self.alphas[j] == 0.0 {
                    continue;
                }
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.label_signs[i]
                    * self.label_signs[j]
                    * rbf(&features[i], &features[j], self.gamma);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }
}

/// Trains on pre-signed labels `y ∈ {−1, +1}`.
pub fn smo_train(features: &[Vec<f64>], y: &[f64], params: &SmoParams) -> SvmModel {
    let d = features.len();
    assert!(d >= 2, "need at least two training instances");
    assert!(params.c > 0.0 && params.gamma > 0.0);
    let max_iter = params.max_iter.unwrap_or(10 * d);
    let c = params.c;

    // full kernel matrix: desk-scale datasets make this the simple choice
    let mut kernel = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = rbf(&features[i], &features[j], params.gamma);
            kernel[i][j] = v;
            kernel[j][i] = v;
        }
    }

    let mut alpha = vec![0.0f64; d];
    // g[i] = Σⱼ αⱼyⱼ·K(i,j), the decision value without the intercept
    let mut g = vec![0.0f64; d];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut stalled = true;
    let mut b_up = 0.0;
    let mut b_low = 0.0;
    for _ in 0..=max_iter {
        // maximal violating pair over F_t = g_t − y_t
        let mut i_min: Option<usize> = None;
        let mut j_max: Option<usize> = None;
        let mut f_min = f64::INFINITY;
        let mut f_max = f64::NEG_INFINITY;
        for t in 0..d {
            let f_t = g[t] - y[t];
            if in_up(alpha[t], y[t]) && f_t < f_min {
                f_min = f_t;
                i_min = Some(t);
            }
            if in_low(alpha[t], y[t]) && f_t > f_max {
                f_max = f_t;
                j_max = Some(t);
            }
        }
        b_up = f_min;
        b_low = f_max;
        let (i, j) = match (i_min, j_max) {
            (Some(i), Some(j)) => (i, j),
            _ => {
                stalled = false;
                break;
            }
        };
        if f_max - f_min <= params.tol {
            stalled = false;
            break;
        }

        let eta = kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j];
        let eta = eta.max(1e-12);
        let e_i = g[i] - y[i];
        let e_j = g[j] - y[j];
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        let mut new_aj = old_aj + y[j] * (e_i - e_j) / eta;
        let (lo, hi) = if y[i] != y[j] {
            ((old_aj - old_ai).max(0.0), (c + old_aj - old_ai).min(c))
        } else {
            ((old_ai + old_aj - c).max(0.0), (old_ai + old_aj).min(c))
        };
        // rounding in `old_ai + old_aj - c` can push lo a ulp past hi when
        // both multipliers sit at the box ceiling
        let lo = lo.min(hi);
        new_aj = new_aj.clamp(lo, hi);
        let new_ai = old_ai + y[i] * y[j] * (old_aj - new_aj);
        alpha[i] = new_ai;
        alpha[j] = new_aj;
        let di = (new_ai - old_ai) * y[i];
        let dj = (new_aj - old_aj) * y[j];
        for t in 0..d {
            g[t] += di * kernel[i][t] + dj * kernel[j][t];
        }
    }

    // midpoint intercept from the KKT bracketing values
    let intercept = if b_up.is_finite() && b_low.is_finite() {
        -(b_up + b_low) / 2.0
    } else if b_up.is_finite() {
        -b_up
    } else if b_low.is_finite() {
        -b_low
    } else {
        0.0
    };

    let mut support_vectors = Vec::new();
    let mut coeffs = Vec::new();
    for i in 0..d {
        if alpha[i] > 1e-12 {
            support_vectors.push(features[i].clone());
            coeffs.push(alpha[i] * y[i]);
        }
    }
    SvmModel {
        support_vectors,
        coeffs,
        intercept,
        gamma: params.gamma,
        c,
        stalled,
        alphas: alpha,
        label_signs: y.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dual_value(alpha: &[f64], y: &[f64], kernel: &[Vec<f64>]) -> f64 {
        let d = alpha.len();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i][j];
            }
        }
        alpha.iter().sum::<f64>() - 0.5 * quad
    }

    /// Grid search over the first `d−1` α's with the last pinned by the
    /// equality constraint, then shrinking refinement around the best point.
    fn dual_oracle(features: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> f64 {
        let d = features.len();
        let mut kernel = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                kernel[i][j] = rbf(&features[i], &features[j], gamma);
            }
        }
        let free = d - 1;
        let mut center = vec![c / 2.0; free];
        let mut half = c / 2.0;
        let steps = 12usize;
        let mut best = f64::NEG_INFINITY;
        for _ in 0..8 {
            let mut best_point = center.clone();
            let mut counter = vec![0usize; free];
            loop {
                let cand: Vec<f64> = (0..free)
                    .map(|k| {
                        (center[k] - half + 2.0 * half * counter[k] as f64 / steps as f64)
                            .clamp(0.0, c)
                    })
                    .collect();
                let imbalance: f64 = cand.iter().zip(y).map(|(a, yi)| a * yi).sum();
                let last = -imbalance * y[d - 1];
                if (0.0..=c).contains(&last) {
                    let mut alpha = cand.clone();
                    alpha.push(last);
                    let v = dual_value(&alpha, y, &kernel);
                    if v > best {
                        best = v;
                        best_point = cand.clone();
                    }
                }
                // odometer
                let mut k = 0;
                loop {
                    if k == free {
                        break;
                    }
                    counter[k] += 1;
                    if counter[k] <= steps {
                        break;
                    }
                    counter[k] = 0;
                    k += 1;
                }
                if k == free {
                    break;
                }
            }
            center = best_point;
            half /= 3.0;
        }
        best
    }

    #[test]
    fn symmetric_pair_yields_equal_alphas_and_zero_intercept() {
        let features = vec![vec![1.0, 0.5], vec![-1.0, -0.5]];
        let y = vec![1.0, -1.0];
        let model = smo_train(&features, &y, &SmoParams::new(1e6, 0.5));
        assert!(model.alphas[0] > 0.0);
        assert!((model.alphas[0] - model.alphas[1]).abs() < 1e-9);
        assert!(model.intercept.abs() < 1e-9);
        // midpoint of the two points scores zero by symmetry
        assert!(model.score(&[0.0, 0.0]).abs() < 1e-9);
        assert!(!model.stalled);
    }

    #[test]
    fn xor_layout_uses_all_four_support_vectors() {
        let features = vec![
            vec![1.0, 1.0],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
        ];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let model = smo_train(&features, &y, &SmoParams::new(10.0, 1.0));
        assert_eq!(model.support_vectors.len(), 4);
        for (f, &yi) in features.iter().zip(&y) {
            assert_eq!(model.score(f).signum(), yi, "misclassified {f:?}");
        }
        // free support vectors sit on the margin
        for (i, &a) in model.alphas.iter().enumerate() {
            if a > 1e-9 && a < 10.0 - 1e-9 {
                assert!((model.score(&features[i]).abs() - 1.0).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn dual_feasibility_holds_across_the_box() {
        let features: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let y: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        for c in [0.01, 1.0, 100.0] {
            for gamma in [0.01, 1.0, 100.0] {
                let model = smo_train(&features, &y, &SmoParams::new(c, gamma));
                let mut balance = 0.0;
                for (i, &a) in model.alphas.iter().enumerate() {
                    assert!(a >= -1e-9 && a <= c + 1e-9, "box violated: {a} at C={c}");
                    balance += a * y[i];
                }
                assert!(balance.abs() <= 1e-9, "equality violated: {balance}");
            }
        }
    }

    #[test]
    fn matches_brute_force_dual_on_small_instances() {
        let cases: Vec<(Vec<Vec<f64>>, Vec<f64>, f64, f64)> = vec![
            (
                vec![
                    vec![1.0, 1.0],
                    vec![-1.0, -1.0],
                    vec![1.0, -1.0],
                    vec![-1.0, 1.0],
                ],
                vec![1.0, 1.0, -1.0, -1.0],
                10.0,
                1.0,
            ),
            (
                vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 1.1], vec![1.2, 1.3]],
                vec![-1.0, 1.0, 1.0, -1.0],
                5.0,
                0.7,
            ),
            (
                vec![vec![0.1], vec![0.9], vec![0.4], vec![0.6], vec![0.5]],
                vec![-1.0, 1.0, -1.0, 1.0, -1.0],
                2.0,
                3.0,
            ),
        ];
        for (features, y, c, gamma) in cases {
            let mut params = SmoParams::new(c, gamma);
            params.max_iter = Some(200 * features.len());
            let model = smo_train(&features, &y, &params);
            let got = model.dual_objective(&features);
            let want = dual_oracle(&features, &y, c, gamma);
            let rel = (got - want).abs() / want.abs().max(1.0);
            assert!(rel < 1e-3, "dual {got} vs oracle {want} (rel {rel})");
        }
    }

    #[test]
    fn tiny_c_collapses_toward_constant_decision() {
        let features = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![1.0, -1.0, 1.0, -1.0];
        let model = smo_train(&features, &y, &SmoParams::new(1e-8, 1.0));
        for &a in &model.alphas {
            assert!(a <= 1e-8 + 1e-15);
        }
        let spread = model.score(&[0.0]) - model.score(&[3.0]);
        assert!(spread.abs() < 1e-6);
    }

    #[test]
    fn deterministic_across_calls() {
        let features: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.5).cos()])
            .collect();
        let y: Vec<f64> = (0..12).map(|i| if i < 6 { 1.0 } else { -1.0 }).collect();
        let a = smo_train(&features, &y, &SmoParams::new(3.0, 2.0));
        let b = smo_train(&features, &y, &SmoParams::new(3.0, 2.0));
        assert_eq!(a.alphas, b.alphas);
        assert_eq!(a.intercept.to_bits(), b.intercept.to_bits());
    }
}
