//! Special functions and quadrature rules used by the rate estimators.
//!
//! * `exp_integral_e1(x)`: E₁(x) = ∫ₓ^∞ e⁻ᵗ/t dt for x > 0
//! * `scaled_e1(x)`: eˣ·E₁(x), finite for every x > 0
//! * [`GaussHermite`]: nodes and weights for ∫ e^(−x²) f(x) dx over ℝ
//! * [`GaussLegendre`]: nodes and weights for ∫ f(t) dt over [0, 1]

use crate::error::Error;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_EPS: f64 = 1e-17;
const CF_EPS: f64 = 1e-16;
const MAX_ITER: usize = 500;

/// Exponential integral E₁(x) for x > 0.
///
/// Power series below x = 1, modified Lentz continued fraction above.
pub fn exp_integral_e1(x: f64) -> Result<f64, Error> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("E1 requires finite x > 0, got {x}")));
    }
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * e1_continued_fraction(x))
    }
}

/// eˣ·E₁(x) for x > 0, computed without forming eˣ for large x.
///
/// Panics in debug builds when `x <= 0`.
pub fn scaled_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        x.exp() * e1_series(x)
    } else {
        e1_continued_fraction(x)
    }
}

// E₁(x) = −γ − ln x − Σ_{k≥1} (−x)^k / (k·k!)
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        term *= -x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < sum.abs() * SERIES_EPS {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// Continued fraction for eˣ·E₁(x):
// 1/(x+1− 1/(x+3− 4/(x+5− ...))), evaluated with the modified Lentz method.
fn e1_continued_fraction(x: f64) -> f64 {
    let tiny = f64::MIN_POSITIVE / CF_EPS;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Gauss–Hermite rule for integrands of the form e^(−x²)·f(x) over (−∞, ∞).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the rule of the given order with Newton iteration on the
    /// orthonormal Hermite recurrence. `order` must be at least 1.
    pub fn new(order: usize) -> Result<Self, Error> {
        if order == 0 {
            return Err(Error::Domain("Gauss-Hermite order must be >= 1".into()));
        }
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^(−1/4)
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-14 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ e^(−x²) f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// E[f(X)] for X ~ N(mean, sigma²).
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, mean: f64, sigma: f64, f: F) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sigma;
        self.integrate(|x| f(mean + scale * x)) / std::f64::consts::PI.sqrt()
    }
}

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre recurrence from Chebyshev starting
    /// points. `order` must be at least 1.
    pub fn new(order: usize) -> Result<Self, Error> {
        if order == 0 {
            return Err(Error::Domain("Gauss-Legendre order must be >= 1".into()));
        }
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 1.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            // map from [−1, 1] to [0, 1]
            let w = 1.0 / ((1.0 - z * z) * pp * pp);
            nodes[i] = 0.5 * (1.0 - z);
            nodes[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
