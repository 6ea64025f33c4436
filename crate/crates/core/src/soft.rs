//! Soft-max kernels and the unbiased inverse-temperature solver.
//!
//! Temperatures are written `w` and inverse temperatures `beta = 1 / w`.
//! Both `0` and `f64::INFINITY` are accepted and handled as exact limits:
//! `w = 0` is the hard max, `w = inf` is the prior-weighted mean.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIOR_SUM_TOL: f64 = 1e-12;

/// Per-state prior action distribution `pi_0`, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPolicy {
    num_actions: usize,
    weights: Vec<f64>,
}

impl PriorPolicy {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            weights: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// One probability row per state.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_actions = rows.first().map(Vec::len).unwrap_or(0);
        if num_actions == 0 {
            return Err(Error::usage("prior needs at least one state and one action"));
        }
        let mut weights = Vec::with_capacity(rows.len() * num_actions);
        for row in &rows {
            if row.len() != num_actions {
                return Err(Error::usage("prior rows differ in length"));
            }
            check_prior(row)?;
            weights.extend_from_slice(row);
        }
        Ok(Self { num_actions, weights })
    }

    pub fn num_states(&self) -> usize {
        self.weights.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.weights[s * self.num_actions..][..self.num_actions]
    }
}

/// Rejects priors that are not strictly positive or not normalized.
pub fn check_prior(prior: &[f64]) -> Result<()> {
    if prior.is_empty() {
        return Err(Error::usage("prior is empty"));
    }
    if prior.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::usage("prior entries must be finite and strictly positive"));
    }
    let sum: f64 = prior.iter().sum();
    if (sum - 1.0).abs() > PRIOR_SUM_TOL {
        return Err(Error::usage(format!("prior sums to {sum}, expected 1")));
    }
    Ok(())
}

fn check_values(values: &[f64], prior: &[f64]) -> Result<()> {
    if values.len() != prior.len() {
        return Err(Error::usage(format!(
            "values have {} entries but prior has {}",
            values.len(),
            prior.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::usage("values must be finite (got NaN or infinity)"));
    }
    check_prior(prior)
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::usage(format!("{name} must be >= 0, got {x}")))
    } else {
        Ok(())
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn prior_mean(values: &[f64], prior: &[f64]) -> f64 {
    values.iter().zip(prior).map(|(v, p)| v * p).sum()
}

/// `exp(x) - 1 - x` without cancellation near zero.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0))))
    } else {
        x.exp_m1() - x
    }
}

/// `mellowmax(d, w)` for prior-centered deviations `d` (so `sum p*d = 0`).
///
/// This is the amount by which mellowmax exceeds the prior mean. It is
/// nonnegative and nonincreasing in `w`. Small and large temperatures use
/// different (equivalent) forms so that neither overflow nor loss of the
/// second-order term can occur.
fn centered_excess(dev: &[f64], dmax: f64, prior: &[f64], w: f64) -> f64 {
    if w == f64::INFINITY || dmax <= 0.0 {
        return 0.0;
    }
    if w == 0.0 {
        return dmax;
    }
    if dmax <= w {
        let s: f64 = dev.iter().zip(prior).map(|(d, p)| p * expm1_minus_x(d / w)).sum();
        w * s.ln_1p()
    } else {
        let s: f64 = dev.iter().zip(prior).map(|(d, p)| p * ((d - dmax) / w).exp_m1()).sum();
        dmax + w * s.ln_1p()
    }
}

pub(crate) fn mellowmax_unchecked(values: &[f64], prior: &[f64], w: f64) -> f64 {
    if w == 0.0 {
        return max_of(values);
    }
    let mean = prior_mean(values, prior);
    if w == f64::INFINITY {
        return mean;
    }
    let mut dmax = f64::NEG_INFINITY;
    let dev: Vec<f64> = values
        .iter()
        .map(|v| {
            let d = v - mean;
            dmax = dmax.max(d);
            d
        })
        .collect();
    mean + centered_excess(&dev, dmax, prior, w)
}

/// Mellowmax `w * log sum_a pi_0(a) exp(values(a) / w)`.
pub fn mellowmax(values: &[f64], prior: &[f64], w: f64) -> Result<f64> {
    check_values(values, prior)?;
    check_nonneg("temperature w", w)?;
    Ok(mellowmax_unchecked(values, prior, w))
}

pub(crate) fn soft_greedy_unchecked(values: &[f64], prior: &[f64], beta: f64) -> Vec<f64> {
    if beta == 0.0 {
        return prior.to_vec();
    }
    let m = max_of(values);
    if beta == f64::INFINITY {
        let ties = values.iter().filter(|v| **v == m).count() as f64;
        return values.iter().map(|v| if *v == m { 1.0 / ties } else { 0.0 }).collect();
    }
    let mut probs: Vec<f64> = values.iter().zip(prior).map(|(v, p)| p * (beta * (v - m)).exp()).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    probs
}

/// Gibbs policy `pi(a) ∝ pi_0(a) exp(beta * values(a))`.
///
/// `beta = 0` returns the prior; `beta = inf` is uniform over the argmax set.
pub fn soft_greedy_policy(values: &[f64], prior: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_values(values, prior)?;
    check_nonneg("inverse temperature beta", beta)?;
    Ok(soft_greedy_unchecked(values, prior, beta))
}

/// The discrepancy `f(beta)` for one state of an ensemble, with the
/// beta-independent parts precomputed.
///
/// `f(beta) = mean_i mellowmax(Q_i, 1/beta) - max_a mean_i Q_i(a)`, split
/// as `gap + mean_i excess_i(1/beta)` where `gap = sum_a pi_0 mean_i Q_i -
/// max_a mean_i Q_i <= 0` and each excess is nonnegative. The split keeps
/// the sign of `f` exact even at `beta = 1e-20`.
pub(crate) struct Discrepancy<'a> {
    prior: &'a [f64],
    gap: f64,
    dev: Vec<f64>,
    dmax: Vec<f64>,
}

impl<'a> Discrepancy<'a> {
    pub(crate) fn new<R: AsRef<[f64]>>(rows: &[R], prior: &'a [f64]) -> Self {
        let k = rows.len();
        let na = prior.len();
        let mut mean_row = vec![0.0; na];
        let mut dev = Vec::with_capacity(k * na);
        let mut dmax = Vec::with_capacity(k);
        for row in rows {
            let row = row.as_ref();
            let mu = prior_mean(row, prior);
            let mut hi = f64::NEG_INFINITY;
            for (a, v) in row.iter().enumerate() {
                mean_row[a] += v;
                let d = v - mu;
                hi = hi.max(d);
                dev.push(d);
            }
            dmax.push(hi);
        }
        mean_row.iter_mut().for_each(|m| *m /= k as f64);
        let gap = prior_mean(&mean_row, prior) - max_of(&mean_row);
        Self { prior, gap, dev, dmax }
    }

    pub(crate) fn eval(&self, beta: f64) -> f64 {
        let w = if beta == 0.0 { f64::INFINITY } else { 1.0 / beta };
        let na = self.prior.len();
        let excess: f64 = self
            .dev
            .chunks_exact(na)
            .zip(&self.dmax)
            .map(|(d, &dm)| centered_excess(d, dm, self.prior, w))
            .sum();
        self.gap + excess / self.dmax.len() as f64
    }
}

fn check_rows<R: AsRef<[f64]>>(rows: &[R], prior: &[f64]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::usage("ensemble needs at least one member"));
    }
    for row in rows {
        check_values(row.as_ref(), prior)?;
    }
    Ok(())
}

/// Ensemble-mean mellowmax at `1/beta` minus the max of the ensemble mean.
///
/// Nondecreasing in `beta`, nonpositive as `beta -> 0` and nonnegative as
/// `beta -> inf`.
pub fn discrepancy<R: AsRef<[f64]>>(rows: &[R], prior: &[f64], beta: f64) -> Result<f64> {
    check_rows(rows, prior)?;
    check_nonneg("inverse temperature beta", beta)?;
    Ok(Discrepancy::new(rows, prior).eval(beta))
}

/// Next-state value reductions for the TD target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// `mellowmax` at temperature `1 / (kappa * beta)`.
    #[default]
    Mellowmax,
    /// Expected value under the soft-greedy policy at `kappa * beta`.
    SoftmaxExpectation,
    Hardmax,
    PriorMean,
}

impl Reduction {
    pub const ALL: [Reduction; 4] = [
        Reduction::Mellowmax,
        Reduction::SoftmaxExpectation,
        Reduction::Hardmax,
        Reduction::PriorMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reduction::Mellowmax => "mellowmax",
            Reduction::SoftmaxExpectation => "softmax-expectation",
            Reduction::Hardmax => "hardmax",
            Reduction::PriorMean => "prior-mean",
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Reduction::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown reduction operator `{s}`")))
    }
}

pub(crate) fn reduce_unchecked(values: &[f64], prior: &[f64], beta: f64, kappa: f64, op: Reduction) -> f64 {
    if kappa == f64::INFINITY {
        return max_of(values);
    }
    let b = kappa * beta;
    match op {
        Reduction::Hardmax => max_of(values),
        Reduction::PriorMean => prior_mean(values, prior),
        Reduction::Mellowmax => {
            let w = if b == 0.0 { f64::INFINITY } else { 1.0 / b };
            mellowmax_unchecked(values, prior, w)
        }
        Reduction::SoftmaxExpectation => {
            let pi = soft_greedy_unchecked(values, prior, b);
            prior_mean(values, &pi)
        }
    }
}

/// Reduces one member's next-state action values to a scalar.
///
/// `kappa` scales the solved `beta`; `kappa = inf` always yields the max.
pub fn reduce_next_state(values: &[f64], prior: &[f64], beta: f64, kappa: f64, op: Reduction) -> Result<f64> {
    check_values(values, prior)?;
    check_nonneg("inverse temperature beta", beta)?;
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::usage(format!("kappa must be positive, got {kappa}")));
    }
    Ok(reduce_unchecked(values, prior, beta, kappa, op))
}

/// Search settings for the inverse temperature, plus how the solved value
/// is used in the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSolverConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub max_iterations: u32,
    /// Multiplier on the solved beta in the target; `inf` means hard max.
    pub kappa: f64,
    pub residual_tol: f64,
    pub operator: Reduction,
}

impl Default for BetaSolverConfig {
    fn default() -> Self {
        Self {
            beta_min: 1e-20,
            beta_max: 2e6,
            max_iterations: 35,
            kappa: 1.0,
            residual_tol: 1e-9,
            operator: Reduction::Mellowmax,
        }
    }
}

impl BetaSolverConfig {
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_operator(mut self, operator: Reduction) -> Self {
        self.operator = operator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("solver.{f}");
        if !(self.beta_min.is_finite() && self.beta_min > 0.0) {
            return Err(Error::config(field("beta_min"), "must be a positive finite number"));
        }
        if !(self.beta_max.is_finite() && self.beta_max > self.beta_min) {
            return Err(Error::config(field("beta_max"), "must be finite and greater than beta_min"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config(field("max_iterations"), "must be at least 1"));
        }
        if self.kappa.is_nan() || self.kappa <= 0.0 {
            return Err(Error::config(field("kappa"), "must be positive or inf"));
        }
        if !(self.residual_tol.is_finite() && self.residual_tol > 0.0) {
            return Err(Error::config(field("residual_tol"), "must be positive"));
        }
        Ok(())
    }
}

/// How the solver terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaOutcome {
    /// Members agree: `f(beta_max) <= 0`, the root lies at or beyond `beta_max`.
    ClampedMax,
    /// Members disagree completely: `f(beta_min) >= 0`.
    ClampedMin,
    /// A sign change was bracketed and refined.
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSolution {
    pub beta: f64,
    /// `f(beta)` at the returned point.
    pub residual: f64,
    pub iterations: u32,
    pub outcome: BetaOutcome,
}

pub(crate) fn solve_unchecked<R: AsRef<[f64]>>(rows: &[R], prior: &[f64], cfg: &BetaSolverConfig) -> BetaSolution {
    let f = Discrepancy::new(rows, prior);
    let f_hi = f.eval(cfg.beta_max);
    if f_hi <= 0.0 {
        return BetaSolution { beta: cfg.beta_max, residual: f_hi, iterations: 0, outcome: BetaOutcome::ClampedMax };
    }
    let f_lo = f.eval(cfg.beta_min);
    if f_lo >= 0.0 {
        return BetaSolution { beta: cfg.beta_min, residual: f_lo, iterations: 0, outcome: BetaOutcome::ClampedMin };
    }

    // Bisection on log(beta); f(lo) < 0 < f(hi) throughout.
    let (mut lo, mut hi) = (cfg.beta_min.ln(), cfg.beta_max.ln());
    let (mut f_lo, mut f_hi) = (f_lo, f_hi);
    for it in 1..=cfg.max_iterations {
        let mid = 0.5 * (lo + hi);
        let f_mid = f.eval(mid.exp());
        if f_mid.abs() <= cfg.residual_tol {
            return BetaSolution { beta: mid.exp(), residual: f_mid, iterations: it, outcome: BetaOutcome::Interior };
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (x, fx) = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    BetaSolution { beta: x.exp(), residual: fx, iterations: cfg.max_iterations, outcome: BetaOutcome::Interior }
}

/// Finds the inverse temperature at which the ensemble's mean soft value
/// matches the max of its mean, by bisection in log space.
pub fn solve_beta_detailed<R: AsRef<[f64]>>(rows: &[R], prior: &[f64], cfg: &BetaSolverConfig) -> Result<BetaSolution> {
    cfg.validate()?;
    check_rows(rows, prior)?;
    Ok(solve_unchecked(rows, prior, cfg))
}

pub fn solve_beta<R: AsRef<[f64]>>(rows: &[R], prior: &[f64], cfg: &BetaSolverConfig) -> Result<f64> {
    solve_beta_detailed(rows, prior, cfg).map(|s| s.beta)
}
