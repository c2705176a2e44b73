//! Block-fading uplink channel: gain sampling, noisy main-channel estimates,
//! and instantaneous / expected achievable rates.
//!
//! All gains are power gains normalized to unit noise variance and all rates
//! are in bits per channel use (base-2 logarithm).

pub mod special;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use special::{exp_integral_e1, GaussHermite, GaussLegendre};

/// Values indexed by ordered node pairs `(j, i)` with `j != i`.
///
/// Stored densely as `n·(n−1)` entries, row-major in `j`, skipping the
/// diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable<T> {
    n_nodes: usize,
    values: Vec<T>,
}

impl<T> PairTable<T> {
    pub fn from_vec(n_nodes: usize, values: Vec<T>) -> Result<Self> {
        let expected = n_nodes * n_nodes.saturating_sub(1);
        if values.len() != expected {
            return Err(Error::InvalidConfig(vec![format!(
                "pair table for {n_nodes} nodes needs {expected} entries, got {}",
                values.len()
            )]));
        }
        Ok(Self { n_nodes, values })
    }

    /// Builds the table by calling `f(j, i)` for every ordered pair.
    pub fn from_fn(n_nodes: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(n_nodes * n_nodes.saturating_sub(1));
        for j in 0..n_nodes {
            for i in (0..n_nodes).filter(|&i| i != j) {
                values.push(f(j, i));
            }
        }
        Self { n_nodes, values }
    }

    fn index(&self, j: usize, i: usize) -> usize {
        assert!(j != i && j < self.n_nodes && i < self.n_nodes, "bad pair ({j}, {i})");
        j * (self.n_nodes - 1) + if i < j { i } else { i - 1 }
    }

    pub fn get(&self, j: usize, i: usize) -> &T {
        &self.values[self.index(j, i)]
    }

    /// Entries `(i, value)` for every `i != j`.
    pub fn row(&self, j: usize) -> impl Iterator<Item = (usize, &T)> + '_ {
        let start = j * (self.n_nodes - 1);
        let row = &self.values[start..start + self.n_nodes - 1];
        (0..self.n_nodes).filter(move |&i| i != j).zip(row)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Distribution parameters of the main and cross channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n_nodes: usize,
    /// Mean power gain of each node's uplink.
    pub main_gain_means: Vec<f64>,
    /// Mean power gain of the overheard link from node `j` to node `i`.
    pub cross_gain_means: PairTable<f64>,
    /// Standard deviation of the additive main-channel estimation error.
    pub estimation_sigma: f64,
    pub rng_seed: u64,
}

impl ChannelParams {
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n_nodes == 0 {
            errs.push("n_nodes must be >= 1".to_string());
        }
        if self.main_gain_means.len() != self.n_nodes {
            errs.push(format!(
                "main_gain_means has {} entries for {} nodes",
                self.main_gain_means.len(),
                self.n_nodes
            ));
        }
        for (j, &m) in self.main_gain_means.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                errs.push(format!("main_gain_means[{j}] = {m} must be > 0"));
            }
        }
        if self.cross_gain_means.n_nodes() != self.n_nodes
            || self.cross_gain_means.len() != self.n_nodes * self.n_nodes.saturating_sub(1)
        {
            errs.push(format!(
                "cross_gain_means must cover {} ordered pairs",
                self.n_nodes * self.n_nodes.saturating_sub(1)
            ));
        } else {
            for j in 0..self.n_nodes {
                for (i, &m) in self.cross_gain_means.row(j) {
                    if !(m > 0.0 && m.is_finite()) {
                        errs.push(format!("cross_gain_means[{j},{i}] = {m} must be > 0"));
                    }
                }
            }
        }
        if !(self.estimation_sigma >= 0.0 && self.estimation_sigma.is_finite()) {
            errs.push(format!(
                "estimation_sigma = {} must be >= 0",
                self.estimation_sigma
            ));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Gains drawn for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlockState {
    pub block_index: u64,
    pub h_main: Vec<f64>,
    /// Raw estimates `h_main + e`; may be negative.
    pub h_main_est: Vec<f64>,
    pub h_cross: PairTable<f64>,
}

/// Draws the gains of block `block_index`.
///
/// Per node `j`, the main gain and then its estimation error are drawn; the
/// cross gains follow in pair order. The error is drawn even when
/// `estimation_sigma` is zero so that streams line up across sigma values.
pub fn sample_block<R: Rng + ?Sized>(
    params: &ChannelParams,
    block_index: u64,
    rng: &mut R,
) -> ChannelBlockState {
    let noise = Normal::new(0.0, params.estimation_sigma).expect("sigma validated");
    let mut h_main = Vec::with_capacity(params.n_nodes);
    let mut h_main_est = Vec::with_capacity(params.n_nodes);
    for &mean in &params.main_gain_means {
        let h = exponential(mean).sample(rng);
        let e = noise.sample(rng);
        h_main.push(h);
        h_main_est.push(h + e);
    }
    let cross = params
        .cross_gain_means
        .values()
        .iter()
        .map(|&mean| exponential(mean).sample(rng))
        .collect();
    ChannelBlockState {
        block_index,
        h_main,
        h_main_est,
        h_cross: PairTable {
            n_nodes: params.n_nodes,
            values: cross,
        },
    }
}

fn exponential(mean: f64) -> Exp<f64> {
    Exp::new(1.0 / mean).expect("mean validated")
}

/// Instantaneous achievable rate `log2(1 + power·gain)`.
#[inline]
pub fn rate(power: f64, gain: f64) -> f64 {
    (1.0 + power * gain).log2()
}

/// `E[log2(1 + power·max(gain_estimate − e, 0))]` with `e ~ N(0, sigma²)`.
///
/// Builds fresh quadrature rules; use [`MainRateEstimator`] in loops.
pub fn expected_main_rate(power: f64, gain_estimate: f64, sigma: f64, quadrature_order: usize) -> f64 {
    let estimator = MainRateEstimator::new(sigma, quadrature_order).expect("quadrature order >= 2");
    estimator.expected_rate(power, gain_estimate)
}

/// Estimates at least this many σ above zero put no visible mass on the
/// truncated side, so plain Gauss–Hermite sees a smooth integrand.
const HERMITE_MIN_SIGMAS: f64 = 8.0;

/// Positive-gain integration range, in σ of log-density drop (e^(−40.5)).
const TAIL_SIGMAS: f64 = 9.0;

/// Expected main-channel rate given a noisy gain estimate.
///
/// Far from the truncation at zero gain the expectation is a Gauss–Hermite
/// sum over the estimation error. Closer in, the kink at zero ruins the
/// polynomial accuracy of that rule, so the positive part of the gain is
/// integrated directly with Gauss–Legendre of the same order on two pieces
/// split at the density peak. Below the peak the substitution `g = s²`
/// keeps `log(1 + P·g)` smooth near `g = 0`.
#[derive(Debug, Clone)]
pub struct MainRateEstimator {
    sigma: f64,
    // Gain offsets −√2·σ·xᵢ and weights wᵢ/√π.
    offsets: Vec<f64>,
    weights: Vec<f64>,
    total_weight: f64,
    legendre: GaussLegendre,
}

/// Quadrature for the distribution of `max(ĥ − e, 0)` at one estimate `ĥ`:
/// positive gains with weights summing to at most one. Zero gains are left
/// out since they add nothing to either the rate or the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GainRule {
    gains: Vec<f64>,
    weights: Vec<f64>,
    total_weight: f64,
}

impl GainRule {
    pub fn expected_rate(&self, power: f64) -> f64 {
        if power == 0.0 {
            return 0.0;
        }
        let nats: f64 = self
            .gains
            .iter()
            .zip(&self.weights)
            .map(|(&g, &w)| w * (power * g).ln_1p())
            .sum();
        nats * std::f64::consts::LOG2_E
    }

    /// `E[max(ĥ − e, 0)]` under the same rule, normalized by its total
    /// weight so that `rate(P, mean)` bounds [`Self::expected_rate`] from
    /// above.
    pub fn mean_positive_gain(&self) -> f64 {
        let s: f64 = self.gains.iter().zip(&self.weights).map(|(&g, &w)| w * g).sum();
        s / self.total_weight
    }
}

impl MainRateEstimator {
    pub fn new(sigma: f64, quadrature_order: usize) -> Result<Self> {
        if quadrature_order < 2 {
            return Err(Error::Domain(format!(
                "quadrature order must be >= 2, got {quadrature_order}"
            )));
        }
        let rule = GaussHermite::new(quadrature_order)?;
        let scale = std::f64::consts::SQRT_2 * sigma;
        let norm = std::f64::consts::PI.sqrt();
        // Outer nodes whose combined weight is below 1e-16 cannot change a
        // double-precision result.
        let (offsets, weights): (Vec<f64>, Vec<f64>) = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .filter(|(_, &w)| w / norm > 1e-17)
            .map(|(&x, &w)| (-scale * x, w / norm))
            .unzip();
        let total_weight = weights.iter().sum();
        Ok(Self {
            sigma,
            offsets,
            weights,
            total_weight,
            legendre: GaussLegendre::new(quadrature_order)?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The quadrature rule for one gain estimate.
    pub fn rule(&self, gain_estimate: f64) -> GainRule {
        let sigma = self.sigma;
        if sigma == 0.0 {
            return GainRule {
                gains: vec![gain_estimate.max(0.0)],
                weights: vec![1.0],
                total_weight: 1.0,
            };
        }
        if gain_estimate >= HERMITE_MIN_SIGMAS * sigma {
            let (gains, weights) = self
                .offsets
                .iter()
                .zip(&self.weights)
                .map(|(&off, &w)| ((gain_estimate + off).max(0.0), w))
                .unzip();
            return GainRule {
                gains,
                weights,
                total_weight: self.total_weight,
            };
        }
        // Upper end where the density has dropped by e^(−TAIL²/2) from its
        // peak on [0, ∞), which sits at max(ĥ, 0).
        let peak = gain_estimate.max(0.0);
        let below = gain_estimate.min(0.0);
        let g_max = gain_estimate + (below * below + (TAIL_SIGMAS * sigma).powi(2)).sqrt();
        let density = |g: f64| {
            let z = (g - gain_estimate) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let rule = || self.legendre.nodes().iter().zip(self.legendre.weights());
        let n = self.legendre.nodes().len();
        let mut gains = Vec::with_capacity(2 * n);
        let mut weights = Vec::with_capacity(2 * n);
        // [0, peak] (or the whole range when the peak is at zero) in s with
        // g = s², dg = 2s·ds
        let s_hi = if peak > 0.0 { peak } else { g_max }.sqrt();
        for (&t, &w) in rule() {
            let s = s_hi * t;
            gains.push(s * s);
            weights.push(w * s_hi * 2.0 * s * density(s * s));
        }
        // [peak, g_max] in g; no kink left there
        if peak > 0.0 {
            let len = g_max - peak;
            for (&t, &w) in rule() {
                let g = peak + len * t;
                gains.push(g);
                weights.push(w * len * density(g));
            }
        }
        // the rule must not exceed unit mass for the concavity bound to hold
        let mass: f64 = weights.iter().sum();
        if mass > 1.0 {
            weights.iter_mut().for_each(|w| *w /= mass);
        }
        GainRule {
            gains,
            weights,
            total_weight: 1.0,
        }
    }

    pub fn expected_rate(&self, power: f64, gain_estimate: f64) -> f64 {
        self.rule(gain_estimate).expected_rate(power)
    }

    pub fn mean_positive_gain(&self, gain_estimate: f64) -> f64 {
        self.rule(gain_estimate).mean_positive_gain()
    }

    /// Upper bound on [`Self::expected_rate`] by concavity of the log:
    /// `rate(power, mean_positive_gain)`.
    pub fn rate_upper_bound(&self, power: f64, mean_positive_gain: f64) -> f64 {
        rate(power, mean_positive_gain)
    }
}

/// `E[log2(1 + power·h)]` for `h ~ Exponential(mean = cross_mean)`.
///
/// Closed form `e^(1/(P·m))·E₁(1/(P·m)) / ln 2`.
pub fn expected_cross_rate(power: f64, cross_mean: f64) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    let z = 1.0 / (power * cross_mean);
    if !z.is_finite() {
        // P·m underflowed: log2(1 + x) ≈ x/ln 2 with E[x] = P·m
        return power * cross_mean * std::f64::consts::LOG2_E;
    }
    special::scaled_e1(z) * std::f64::consts::LOG2_E
}
