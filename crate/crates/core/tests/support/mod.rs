//! Brute-force reference implementations used as test oracles.
//!
//! Nothing here calls into the code under test except for the primitive
//! rate kernels the scheduler oracle is built from; those kernels have
//! their own oracles below.

#![allow(dead_code)]

use privnet_core::channel::{expected_cross_rate, expected_main_rate, ChannelBlockState, ChannelParams};
use privnet_core::control::{utility, ControlParams, Mode};
use privnet_core::harq::CodeRates;
use privnet_core::queues::NodeQueues;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Adaptive Simpson quadrature with Richardson correction. `tol` is an
/// absolute error target for the whole interval.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    // `floor` keeps subdivision from chasing roundoff once tol has been
    // halved far below the integrand's own precision
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, floor: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, floor, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, floor, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, tol * 1e-6, 50)
}

/// Integral over `(0, ∞)` after substituting `t = e^s`, which turns both
/// the behavior at 0 and the exponential tail into fast-decaying ends.
/// `g` must be negligible below `e^lo` and above `e^hi`.
fn integrate_log_scale<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    let h = |s: f64| {
        let t = s.exp();
        g(t) * t
    };
    let rough = adaptive_simpson(&h, lo, hi, 1e-6);
    adaptive_simpson(&h, lo, hi, rel_tol * rough.abs())
}

/// `E₁(x) = e^(−x)·∫₀^∞ e^(−w)/(x + w) dw`.
pub fn e1_oracle(x: f64) -> f64 {
    assert!(x > 0.0);
    (-x).exp() * integrate_log_scale(|w| (-w).exp() / (x + w), x.ln() - 45.0, 4.0, 1e-14)
}

/// `∫₀^∞ log2(1 + P·h)·e^(−h/m)/m dh`.
pub fn cross_rate_oracle(power: f64, mean: f64) -> f64 {
    // h = m·t turns the density into e^(−t)
    let pm = power * mean;
    integrate_log_scale(|t| (pm * t).ln_1p() * std::f64::consts::LOG2_E * (-t).exp(), -45.0, 4.0, 1e-13)
}

/// `∫₀^∞ log2(1 + P·g)·φ((g − ĥ)/σ)/σ dg` over panels graded toward
/// g = 0, where the density can fall off on a scale far below σ.
pub fn main_rate_oracle(power: f64, estimate: f64, sigma: f64) -> f64 {
    let hi = estimate.max(0.0) + 14.0 * sigma;
    let f = |g: f64| {
        let z = (g - estimate) / sigma;
        (power * g).ln_1p() * std::f64::consts::LOG2_E * (-0.5 * z * z).exp()
            / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let panels = 400;
    let edge = |k: usize| hi * (k as f64 / panels as f64).powi(3);
    (0..panels)
        .map(|k| {
            let (a, b) = (edge(k), edge(k + 1));
            let coarse = (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
            if coarse == 0.0 {
                0.0
            } else {
                adaptive_simpson(&f, a, b, 1e-14 * coarse.abs())
            }
        })
        .sum()
}

/// Sample mean and its standard error.
pub fn mean_and_se(samples: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0_f64, 0.0_f64, 0.0_f64);
    for x in samples {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

/// Monte Carlo estimate of `E[log2(1 + P·max(ĥ − e, 0))]`, `e ~ N(0, σ²)`.
pub fn main_rate_mc<R: Rng>(power: f64, estimate: f64, sigma: f64, draws: usize, rng: &mut R) -> (f64, f64) {
    let normal = Normal::new(0.0, sigma).unwrap();
    mean_and_se((0..draws).map(|_| (1.0 + power * (estimate - normal.sample(rng)).max(0.0)).log2()))
}

/// Monte Carlo estimate of `E[log2(1 + P·h)]`, `h ~ Exp(mean m)`.
pub fn cross_rate_mc<R: Rng>(power: f64, mean: f64, draws: usize, rng: &mut R) -> (f64, f64) {
    mean_and_se((0..draws).map(|_| {
        let u: f64 = rng.gen();
        // inverse CDF; 1 − u lies in (0, 1]
        let h = -mean * (1.0 - u).ln();
        (1.0 + power * h).log2()
    }))
}

/// Exhaustive scheduler: every node, both modes, every positive grid power.
/// Returns `(node, mode, power_index)` of the first strict maximum in
/// (node, private-before-open, power) order, or `None` when no weight is
/// positive.
pub fn schedule_oracle(
    queues: &[NodeQueues],
    block: &ChannelBlockState,
    control: &ControlParams,
    channel: &ChannelParams,
    rates: &[CodeRates],
) -> Option<(usize, Mode, usize)> {
    let mut best: Option<(usize, Mode, usize)> = None;
    let mut best_w = 0.0;
    for (j, q) in queues.iter().enumerate() {
        let r = rates[j];
        let frac = r.r_hat_p / r.r_hat;
        let leak_coef = r.r_hat_p / (r.r_hat - r.r_hat_p);
        for mode in [Mode::Private, Mode::Open] {
            for (k, &p) in control.power_grid.iter().enumerate().skip(1) {
                let main = expected_main_rate(p, block.h_main_est[j], channel.estimation_sigma, control.quadrature_order);
                let w = match mode {
                    Mode::Private => {
                        let leak: f64 = channel.cross_gain_means.row(j).map(|(_, &m)| expected_cross_rate(p, m)).sum();
                        let eff = frac * main - leak_coef * leak;
                        q.q_pe * eff.max(0.0) + q.q_p * frac * main - q.y * p
                    }
                    Mode::Open => q.q_o * main - q.y * p,
                };
                if w > best_w {
                    best_w = w;
                    best = Some((j, mode, k));
                }
            }
        }
    }
    best
}

/// Brute-force flow control on a lattice with `intervals` steps per axis.
/// Returns `(A_p, A_pe, A_o)`.
pub fn flow_oracle(q: &NodeQueues, control: &ControlParams, node: usize, intervals: usize) -> (f64, f64, f64) {
    let h = control.a_max / intervals as f64;
    let gamma = control.gamma[node];
    let q_pe = if control.flow_control_literal { 0.0 } else { q.q_pe };
    let v = control.v;
    let u_sum: Vec<f64> = (0..=2 * intervals).map(|s| v * utility(s as f64 * h)).collect();
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0, 0.0));
    for e in 0..=intervals {
        let a_pe = e as f64 * h;
        let fe = v * control.kappa * utility(a_pe) - q_pe * a_pe + q.z * a_pe;
        for p in e..=intervals {
            let a_p = p as f64 * h;
            let fp = fe - q.q_p * a_p - q.z * (1.0 - gamma) * a_p;
            for o in 0..=intervals {
                let a_o = o as f64 * h;
                let f = fp - q.q_o * a_o + u_sum[p - e + o];
                if f > best.0 {
                    best = (f, (a_p, a_pe, a_o));
                }
            }
        }
    }
    best.1
}

/// Random queue state with a mix of empty and loaded queues.
pub fn random_queues<R: Rng>(rng: &mut R, scale: f64) -> NodeQueues {
    let draw = |r: &mut R| if r.gen_bool(0.2) { 0.0 } else { r.gen_range(0.0..scale) };
    NodeQueues {
        q_p: draw(rng),
        q_o: draw(rng),
        q_pe: draw(rng),
        z: draw(rng),
        y: draw(rng) * 0.2,
    }
}
