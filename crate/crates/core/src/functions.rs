//! Analytic benchmark functions used by the CLI and the test suites.

use crate::geometry::Bounds;

/// `Σ (x_j − c_j)²`.
pub fn sphere(x: &[f64], center: &[f64]) -> f64 {
    x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum()
}

/// Classic 2-D Rosenbrock valley.
pub fn rosenbrock(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
}

/// 1-D tilted double well on `[0, 10]`: deep minimum (value 0) at `t = 3`,
/// shallow local minimum (value 0.8) at `t = 7`, barrier between them near
/// `t = 5`. The cubic tilt keeps both wells exactly stationary.
pub fn double_well(x: &[f64]) -> f64 {
    let u = (x[0] - 5.0) / 2.0;
    (u * u - 1.0).powi(2) + 0.2 * (3.0 * u - u.powi(3)) + 0.4
}

pub const DOUBLE_WELL_DEEP: f64 = 3.0;
pub const DOUBLE_WELL_SHALLOW: f64 = 7.0;

/// Rastrigin-style multimodal surface shifted so the global minimum sits at
/// `center`.
pub fn rastrigin(x: &[f64], center: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .zip(center)
            .map(|(a, c)| {
                let d = a - c;
                d * d - 10.0 * (2.0 * std::f64::consts::PI * d).cos()
            })
            .sum::<f64>()
}

/// Named function lookup for the CLI; returns the callable together with its
/// natural bounds.
pub fn by_name(name: &str) -> Option<(Box<dyn Fn(&[f64]) -> f64 + Send + Sync>, Bounds)> {
    match name {
        "sphere" => Some((
            Box::new(|x: &[f64]| sphere(x, &[50.0, 50.0])),
            Bounds::new(vec![0.01, 0.01], vec![100.01, 100.01]).unwrap(),
        )),
        "rosenbrock" => Some((
            Box::new(rosenbrock),
            Bounds::new(vec![-5.0, -5.0], vec![10.0, 10.0]).unwrap(),
        )),
        "double-well" | "double_well" => Some((
            Box::new(double_well),
            Bounds::new(vec![0.0], vec![10.0]).unwrap(),
        )),
        "rastrigin" => Some((
            Box::new(|x: &[f64]| rastrigin(x, &[50.0, 50.0])),
            Bounds::new(vec![0.01, 0.01], vec![100.01, 100.01]).unwrap(),
        )),
        _ => None,
    }
}
