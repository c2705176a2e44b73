//! Per-block drift-plus-penalty controller.
//!
//! Each block every node first picks its admissions `(A_p, A_pe, A_o)` from
//! its own queues (flow control); then a central scheduler picks at most one
//! `(node, mode, power)` triple from all queues and the current main-channel
//! estimates.

use serde::{Deserialize, Serialize};

use crate::channel::{expected_cross_rate, ChannelBlockState, ChannelParams, GainRule, MainRateEstimator};
use crate::error::{Error, Result};
use crate::harq::{effective_rate_from_leakage, CodeRates, TrafficKind};
use crate::queues::NodeQueues;

/// Transmission mode of a scheduled node.
pub type Mode = TrafficKind;

/// Per-block utility of admitted traffic, `log2(1 + x)`.
#[inline]
pub fn utility(x: f64) -> f64 {
    (1.0 + x).log2()
}

/// `n` evenly spaced powers from 0 to `p_max` inclusive.
pub fn uniform_power_grid(p_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| p_max * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    /// Penalty weight on utility.
    pub v: f64,
    /// Private-to-open utility ratio.
    pub kappa: f64,
    /// Per-block cap on each of `A_p`, `A_pe`, `A_o` (bits).
    pub a_max: f64,
    /// Candidate transmit powers, ascending, starting at 0.
    pub power_grid: Vec<f64>,
    /// Coarse grid intervals per admission axis.
    pub admission_grid_resolution: usize,
    /// Tolerable privacy outage fraction per node.
    pub gamma: Vec<f64>,
    /// Average power budget per node.
    pub alpha: Vec<f64>,
    /// Drop the `Q_pe·A_pe` term from flow control.
    pub flow_control_literal: bool,
    /// Gauss–Hermite order for expectations over estimation error.
    pub quadrature_order: usize,
}

impl ControlParams {
    pub fn violations(&self, n_nodes: usize) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.v > 0.0 && self.v.is_finite()) {
            errs.push(format!("V = {} must be > 0", self.v));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            errs.push(format!("kappa = {} must be > 0", self.kappa));
        }
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            errs.push(format!("A_max = {} must be > 0", self.a_max));
        }
        if self.power_grid.is_empty() {
            errs.push("power grid is empty".to_string());
        } else {
            if self.power_grid[0] != 0.0 {
                errs.push("power grid must start at 0".to_string());
            }
            if self.power_grid.windows(2).any(|w| !(w[1] > w[0])) || !self.power_grid.iter().all(|p| p.is_finite()) {
                errs.push("power grid must be finite and strictly increasing".to_string());
            }
        }
        if self.admission_grid_resolution == 0 {
            errs.push("admission grid resolution must be >= 1".to_string());
        }
        if self.gamma.len() != n_nodes {
            errs.push(format!("gamma has {} entries for {n_nodes} nodes", self.gamma.len()));
        }
        for &g in &self.gamma {
            if !(0.0..=1.0).contains(&g) {
                errs.push(format!("gamma = {g} ∉ [0,1]"));
            }
        }
        if self.alpha.len() != n_nodes {
            errs.push(format!("alpha has {} entries for {n_nodes} nodes", self.alpha.len()));
        }
        for &a in &self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                errs.push(format!("alpha = {a} must be > 0"));
            }
        }
        if self.quadrature_order < 2 {
            errs.push(format!(
                "quadrature order {} must be >= 2",
                self.quadrature_order
            ));
        }
        errs
    }

    pub fn p_max(&self) -> f64 {
        self.power_grid.last().copied().unwrap_or(0.0)
    }
}

/// Admissions chosen by one node for one block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub a_p: f64,
    pub a_pe: f64,
    pub a_o: f64,
}

impl Admission {
    /// Utility earned this block: `κ·u(A_pe) + u(A_p − A_pe + A_o)`.
    pub fn utility(&self, kappa: f64) -> f64 {
        kappa * utility(self.a_pe) + utility((self.a_p - self.a_pe + self.a_o).max(0.0))
    }
}

/// Flow-control objective for one node:
/// `V·[κ·u(A_pe) + u(A_p − A_pe + A_o)] − Q_p·A_p − Q_o·A_o − Q_pe·A_pe
///  − Z·(A_p·(1−γ) − A_pe)`.
///
/// With `literal` the `Q_pe·A_pe` term is omitted.
pub fn flow_objective(q: &NodeQueues, adm: &Admission, v: f64, kappa: f64, gamma: f64, literal: bool) -> f64 {
    let q_pe = if literal { 0.0 } else { q.q_pe };
    v * adm.utility(kappa) - q.q_p * adm.a_p - q.q_o * adm.a_o - q_pe * adm.a_pe
        - q.z * (adm.a_p * (1.0 - gamma) - adm.a_pe)
}

/// Linear coefficients of the flow objective on `(A_pe, A_p, A_o)`.
#[derive(Clone, Copy)]
struct FlowProblem {
    v: f64,
    kappa: f64,
    c_e: f64,
    c_p: f64,
    c_o: f64,
    /// Lattice step: `A_max / n_intervals`.
    step: f64,
}

impl FlowProblem {
    /// Exhaustive search over lattice indices `lo[k]..=hi[k]` on axes
    /// `(e, p, o)` with `e <= p`. Ties keep the lowest `(e, p, o)`.
    fn search(&self, lo: [usize; 3], hi: [usize; 3]) -> ([usize; 3], f64) {
        let [lo_e, lo_p, lo_o] = lo;
        let [hi_e, hi_p, hi_o] = hi;
        // s = p − e + o, bounded below by 0 because e <= p
        let s_lo = lo_p.saturating_sub(hi_e) + lo_o;
        let s_hi = hi_p - lo_e.min(hi_p) + hi_o;
        let us: Vec<f64> = (s_lo..=s_hi).map(|s| self.v * utility(s as f64 * self.step)).collect();
        let mut best = ([0usize; 3], f64::NEG_INFINITY);
        for e in lo_e..=hi_e {
            let e_val = e as f64 * self.step;
            let base_e = self.v * self.kappa * utility(e_val) + self.c_e * e_val;
            for p in lo_p.max(e)..=hi_p {
                let base_p = base_e + self.c_p * p as f64 * self.step;
                let s0 = p - e;
                for o in lo_o..=hi_o {
                    let f = base_p + self.c_o * o as f64 * self.step + us[s0 + o - s_lo];
                    if f > best.1 {
                        best = ([e, p, o], f);
                    }
                }
            }
        }
        best
    }
}

/// Admissions maximizing [`flow_objective`] over `[0, A_max]³` with
/// `A_pe <= A_p`.
///
/// A coarse grid of `admission_grid_resolution` intervals per axis is
/// searched exhaustively. A refinement grid with the coarse spacing divided
/// by `ceil(resolution / 2)` then spans one coarse cell on either side of the
/// coarse optimum.
pub fn flow_control(q: &NodeQueues, params: &ControlParams, node: usize) -> Admission {
    let gamma = params.gamma[node];
    let q_pe = if params.flow_control_literal { 0.0 } else { q.q_pe };
    let g = params.admission_grid_resolution.max(1);
    let k = g.div_ceil(2);
    let n_fine = g * k;
    let problem = FlowProblem {
        v: params.v,
        kappa: params.kappa,
        c_e: q.z - q_pe,
        c_p: -(q.q_p + q.z * (1.0 - gamma)),
        c_o: -q.q_o,
        step: params.a_max / n_fine as f64,
    };
    // coarse pass on every k-th fine lattice point
    let coarse = FlowProblem {
        step: params.a_max / g as f64,
        ..problem
    };
    let (c_idx, _) = coarse.search([0; 3], [g; 3]);
    let center = c_idx.map(|i| i * k);
    let lo = center.map(|c| c.saturating_sub(k));
    let hi = center.map(|c| (c + k).min(n_fine));
    let (f_idx, _) = problem.search(lo, hi);
    let at = |i: usize| i as f64 * problem.step;
    Admission {
        a_pe: at(f_idx[0]),
        a_p: at(f_idx[1]),
        a_o: at(f_idx[2]),
    }
}

/// Scheduler weight of private transmission:
/// `Q_pe·max(Ê[R^pe], 0) + Q_p·Ê[R^p] − Y·P`.
#[inline]
pub fn private_weight(q: &NodeQueues, expected_effective: f64, expected_private: f64, power: f64) -> f64 {
    q.q_pe * expected_effective.max(0.0) + q.q_p * expected_private - q.y * power
}

/// Scheduler weight of open transmission: `Q_o·Ê[R^o] − Y·P`.
#[inline]
pub fn open_weight(q: &NodeQueues, expected_open: f64, power: f64) -> f64 {
    q.q_o * expected_open - q.y * power
}

/// Weight of scheduling a node in `mode` at `power`, given the expected
/// main-channel rate at that power and the expected eavesdropper rate sum
/// `Σᵢ E[R_ji]`.
pub fn evaluate_weight(
    mode: Mode,
    power: f64,
    q: &NodeQueues,
    expected_main: f64,
    expected_leakage: f64,
    rates: &CodeRates,
) -> f64 {
    match mode {
        Mode::Private => private_weight(
            q,
            effective_rate_from_leakage(expected_main, expected_leakage, rates),
            rates.private_fraction() * expected_main,
            power,
        ),
        Mode::Open => open_weight(q, expected_main, power),
    }
}

/// A scheduling decision for one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub node: usize,
    pub mode: Mode,
    pub power_index: usize,
    pub power: f64,
    pub weight: f64,
}

/// Everything decided in one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub admissions: Vec<Admission>,
    pub transmission: Option<Transmission>,
}

/// Exhaustive scheduler over nodes, modes and the power grid.
///
/// Holds the quadrature rule and the per-node expected eavesdropper rate
/// sums for every grid power, which depend only on channel statistics.
#[derive(Debug, Clone)]
pub struct Scheduler {
    power_grid: Vec<f64>,
    estimator: MainRateEstimator,
    leakage: Vec<Vec<f64>>,
    rates: Vec<CodeRates>,
}

impl Scheduler {
    pub fn new(control: &ControlParams, channel: &ChannelParams, rates: &[CodeRates]) -> Result<Self> {
        let mut errs = control.violations(channel.n_nodes);
        errs.extend(channel.violations());
        if rates.len() != channel.n_nodes {
            errs.push(format!("{} code rates for {} nodes", rates.len(), channel.n_nodes));
        }
        if !errs.is_empty() {
            return Err(Error::InvalidConfig(errs));
        }
        let estimator = MainRateEstimator::new(channel.estimation_sigma, control.quadrature_order)?;
        let leakage = (0..channel.n_nodes)
            .map(|j| {
                control
                    .power_grid
                    .iter()
                    .map(|&p| {
                        channel
                            .cross_gain_means
                            .row(j)
                            .map(|(_, &m)| expected_cross_rate(p, m))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            power_grid: control.power_grid.clone(),
            estimator,
            leakage,
            rates: rates.to_vec(),
        })
    }

    pub fn power_grid(&self) -> &[f64] {
        &self.power_grid
    }

    /// `Σᵢ E[log2(1 + P·h_ji)]` for node `j` at grid power `power_index`.
    pub fn expected_leakage(&self, node: usize, power_index: usize) -> f64 {
        self.leakage[node][power_index]
    }

    pub fn estimator(&self) -> &MainRateEstimator {
        &self.estimator
    }

    /// The weight-maximizing `(node, mode, power)`, or `None` when no
    /// weight is strictly positive. Ties go to the lowest node, then
    /// private, then the lowest power.
    ///
    /// The result is that of an exhaustive search. Quadrature is skipped for
    /// candidates whose weight, evaluated at the concavity bound
    /// `rate(P, E[g⁺]) >= E[rate(P, g⁺)]`, cannot reach the best exact weight.
    pub fn schedule(&self, queues: &[NodeQueues], block: &ChannelBlockState) -> Option<Transmission> {
        let n_powers = self.power_grid.len();
        let mut best: Option<Transmission> = None;
        let mut best_w = 0.0;
        let consider = |best: &mut Option<Transmission>, best_w: &mut f64, cand: Transmission| {
            let better = cand.weight > *best_w
                || (cand.weight == *best_w
                    && best.is_some_and(|b| candidate_key(&cand) < candidate_key(&b)));
            if better {
                *best_w = cand.weight;
                *best = Some(cand);
            }
        };

        let mut bounds = vec![[f64::NEG_INFINITY; 2]; queues.len() * n_powers];
        let mut exact = vec![f64::NAN; queues.len() * n_powers];
        let active: Vec<bool> = queues
            .iter()
            .map(|q| q.q_p > 0.0 || q.q_pe > 0.0 || q.q_o > 0.0)
            .collect();
        let rules: Vec<Option<GainRule>> = active
            .iter()
            .zip(&block.h_main_est)
            .map(|(&a, &est)| a.then(|| self.estimator.rule(est)))
            .collect();

        // Bounds everywhere, then exact weights at each node's best bound to
        // seed the incumbent.
        for (j, q) in queues.iter().enumerate() {
            if !active[j] {
                // every weight is −Y·P <= 0
                continue;
            }
            let rates = &self.rates[j];
            let rule = rules[j].as_ref().expect("rule built for active node");
            let mean_pos = rule.mean_positive_gain();
            let mut seed = (f64::NEG_INFINITY, 0, Mode::Private);
            for (k, &p) in self.power_grid.iter().enumerate() {
                let ub_rate = self.estimator.rate_upper_bound(p, mean_pos);
                let leak = self.leakage[j][k];
                let b = [
                    evaluate_weight(Mode::Private, p, q, ub_rate, leak, rates),
                    evaluate_weight(Mode::Open, p, q, ub_rate, leak, rates),
                ];
                bounds[j * n_powers + k] = b;
                for (m, mode) in [Mode::Private, Mode::Open].into_iter().enumerate() {
                    if b[m] > seed.0 {
                        seed = (b[m], k, mode);
                    }
                }
            }
            let (_, k, mode) = seed;
            let e = self.exact_rate(&mut exact, j, k, rule);
            let p = self.power_grid[k];
            let w = evaluate_weight(mode, p, q, e, self.leakage[j][k], rates);
            consider(&mut best, &mut best_w, self.candidate(j, mode, k, w));
        }

        for (j, q) in queues.iter().enumerate() {
            if !active[j] {
                continue;
            }
            let rates = &self.rates[j];
            let rule = rules[j].as_ref().expect("rule built for active node");
            for (m, mode) in [Mode::Private, Mode::Open].into_iter().enumerate() {
                for k in 0..n_powers {
                    let ub = bounds[j * n_powers + k][m];
                    // slack covers rounding in the bound itself
                    if ub + 1e-12 * ub.abs().max(1.0) < best_w {
                        continue;
                    }
                    let e = self.exact_rate(&mut exact, j, k, rule);
                    let p = self.power_grid[k];
                    let w = evaluate_weight(mode, p, q, e, self.leakage[j][k], rates);
                    consider(&mut best, &mut best_w, self.candidate(j, mode, k, w));
                }
            }
        }
        best
    }

    fn exact_rate(&self, cache: &mut [f64], node: usize, k: usize, rule: &GainRule) -> f64 {
        let slot = &mut cache[node * self.power_grid.len() + k];
        if slot.is_nan() {
            *slot = rule.expected_rate(self.power_grid[k]);
        }
        *slot
    }

    fn candidate(&self, node: usize, mode: Mode, power_index: usize, weight: f64) -> Transmission {
        Transmission {
            node,
            mode,
            power_index,
            power: self.power_grid[power_index],
            weight,
        }
    }
}

fn candidate_key(t: &Transmission) -> (usize, u8, usize) {
    let mode = match t.mode {
        Mode::Private => 0,
        Mode::Open => 1,
    };
    (t.node, mode, t.power_index)
}

/// One-shot scheduling; builds a [`Scheduler`] for the call.
pub fn schedule(
    all_queues: &[NodeQueues],
    block: &ChannelBlockState,
    params: &ControlParams,
    channel_params: &ChannelParams,
    rates: &[CodeRates],
) -> Result<Option<Transmission>> {
    Ok(Scheduler::new(params, channel_params, rates)?.schedule(all_queues, block))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PairTable;

    fn params(n: usize) -> ControlParams {
        ControlParams {
            v: 100.0,
            kappa: 5.0,
            a_max: 10.0,
            power_grid: uniform_power_grid(10.0, 64),
            admission_grid_resolution: 10,
            gamma: vec![0.1; n],
            alpha: vec![1.0; n],
            flow_control_literal: false,
            quadrature_order: 32,
        }
    }

    fn channel(n: usize) -> ChannelParams {
        ChannelParams {
            n_nodes: n,
            main_gain_means: vec![30.0; n],
            cross_gain_means: PairTable::from_fn(n, |_, _| 1.0),
            estimation_sigma: 1.0,
            rng_seed: 0,
        }
    }

    fn block(est: Vec<f64>) -> ChannelBlockState {
        let n = est.len();
        ChannelBlockState {
            block_index: 0,
            h_main: est.clone(),
            h_main_est: est,
            h_cross: PairTable::from_fn(n, |_, _| 1.0),
        }
    }

    #[test]
    fn power_grid_shape() {
        let g = uniform_power_grid(10.0, 64);
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 10.0);
    }

    #[test]
    fn huge_queues_admit_nothing() {
        let q = NodeQueues {
            q_p: 1e6,
            q_o: 1e6,
            q_pe: 1e6,
            z: 0.0,
            y: 0.0,
        };
        assert_eq!(flow_control(&q, &params(1), 0), Admission::default());
    }

    #[test]
    fn empty_queues_admit_everything() {
        let a = flow_control(&NodeQueues::default(), &params(1), 0);
        assert_eq!(a, Admission { a_p: 10.0, a_pe: 10.0, a_o: 10.0 });
    }

    #[test]
    fn large_z_pushes_effective_admission_up() {
        let p = params(1);
        // moderate private backlog so the Z = 0 solution is interior
        let base = NodeQueues {
            q_p: 20.0,
            q_pe: 60.0,
            ..Default::default()
        };
        let without = flow_control(&base, &p, 0);
        let with = flow_control(&NodeQueues { z: 1e4, ..base }, &p, 0);
        assert!(with.a_pe >= without.a_pe);
        assert_eq!(with.a_pe, p.a_max);
        assert!(with.a_pe <= with.a_p);
        // the Z term now rewards A_pe and charges A_p
        let shifted = NodeQueues { z: 1e4, q_p: 1e6, ..base };
        let capped = flow_control(&shifted, &p, 0);
        assert!(capped.a_p <= without.a_p);
    }

    #[test]
    fn literal_mode_ignores_effective_queue() {
        let mut p = params(1);
        let q = NodeQueues {
            q_pe: 1e6,
            ..Default::default()
        };
        assert_eq!(flow_control(&q, &p, 0).a_pe, 0.0);
        p.flow_control_literal = true;
        assert_eq!(flow_control(&q, &p, 0).a_pe, 10.0);
    }

    #[test]
    fn weight_examples() {
        let rates = CodeRates::new(20.0, 10.0, 20.0).unwrap();
        let q = NodeQueues {
            q_p: 3.0,
            q_o: 4.0,
            q_pe: 2.0,
            z: 0.0,
            y: 1.0,
        };
        assert_eq!(private_weight(&q, 1.0, 2.0, 4.0), 4.0);
        assert_eq!(evaluate_weight(Mode::Private, 0.0, &q, 0.0, 0.0, &rates), 0.0);
        assert_eq!(evaluate_weight(Mode::Open, 0.0, &q, 0.0, 0.0, &rates), 0.0);
        let heavy = NodeQueues { y: 1e12, ..q };
        assert!(evaluate_weight(Mode::Open, 1.0, &heavy, 5.0, 0.0, &rates) < -1e11);
        // negative effective rate is clamped inside the weight
        assert_eq!(private_weight(&q, -5.0, 2.0, 0.0), 6.0);
    }

    #[test]
    fn all_zero_queues_idle() {
        let ch = channel(3);
        let rates = vec![CodeRates::new(20.0, 8.0, 20.0).unwrap(); 3];
        let out = schedule(&[NodeQueues::default(); 3], &block(vec![30.0; 3]), &params(3), &ch, &rates).unwrap();
        assert_eq!(out, None);
        let y_only = [NodeQueues { y: 3.0, ..Default::default() }; 3];
        let out = schedule(&y_only, &block(vec![30.0; 3]), &params(3), &ch, &rates).unwrap();
        assert_eq!(out, None);
    }

    #[test]
    fn lone_open_backlog_uses_max_power() {
        let ch = channel(4);
        let rates = vec![CodeRates::new(20.0, 8.0, 20.0).unwrap(); 4];
        let mut qs = [NodeQueues::default(); 4];
        qs[2].q_o = 5.0;
        let t = schedule(&qs, &block(vec![30.0; 4]), &params(4), &ch, &rates)
            .unwrap()
            .unwrap();
        assert_eq!((t.node, t.mode, t.power), (2, Mode::Open, 10.0));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = params(2);
        p.v = 0.0;
        p.power_grid = vec![1.0, 2.0];
        p.gamma = vec![1.5, 0.1];
        let err = Scheduler::new(&p, &channel(2), &[CodeRates::new(20.0, 8.0, 20.0).unwrap(); 2]).unwrap_err();
        match err {
            Error::InvalidConfig(errs) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }
}
