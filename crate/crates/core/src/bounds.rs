//! Generalization bounds for ERM under the MAPE.
//!
//! With targets bounded away from zero (`|Y| >= lambda`) and predictors
//! bounded by `B_G`, the MAPE loss class has envelope `B = 1 + B_G/lambda`.
//! This module evaluates, in log space:
//!
//! - the covering-number bound from the VC dimension `V` of the subgraph
//!   class, `N_p(eps) <= 3 (2e B^p / eps^p * ln(3e B^p / eps^p))^V`;
//! - the uniform-deviation bound
//!   `P(sup |L_hat - L| > eps) <= 8 N_p(eps/8) exp(-n eps^2 / (128 B^2))`;
//! - the rate `K(n, eps) = 24 (16 e B / eps * ln(24 e B / eps))^v exp(-n eps^2 / (128 B^2))`,
//!   its inverse in `n`, and the growth condition `v_n B_G^2 ln B_G / n -> 0`
//!   for power-law schedules.
//!
//! It also enumerates the dichotomies realized by subgraph indicators
//! `1{t <= l(g(x), y)}` over a finite model grid.
//!
//! All logarithms are natural. Probabilities are capped at 1; exponentials
//! saturate to `0` or `+inf` instead of failing.

use std::collections::BTreeSet;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{mape_envelope, pointwise_loss, LossKind};
use crate::wl1solver::LinearModel;

/// Every symbol of the bound chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Target floor: `|Y| >= lambda`.
    pub lambda: f64,
    /// Sup-norm bound on the model class.
    pub bound_g: f64,
    /// Index of the empirical `L_p` norm used by the cover.
    pub p: u32,
    /// VC dimension of the subgraph class.
    pub vc_dim: u32,
    pub n: u64,
    pub eps: f64,
}

impl BoundParams {
    pub fn new(lambda: f64, bound_g: f64, p: u32, vc_dim: u32, n: u64, eps: f64) -> Result<Self> {
        let params = BoundParams {
            lambda,
            bound_g,
            p,
            vc_dim,
            n,
            eps,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters for a given envelope `B > 1`, taking `lambda = 1`.
    pub fn from_envelope(envelope: f64, p: u32, vc_dim: u32, n: u64, eps: f64) -> Result<Self> {
        if !(envelope > 1.0 && envelope.is_finite()) {
            return Err(Error::invalid(format!("envelope must exceed 1, got {envelope}")));
        }
        BoundParams::new(1.0, envelope - 1.0, p, vc_dim, n, eps)
    }

    pub fn validate(&self) -> Result<()> {
        mape_envelope(self.bound_g, self.lambda)?;
        if self.p < 1 {
            return Err(Error::invalid("norm index p must be >= 1"));
        }
        if self.vc_dim < 2 {
            return Err(Error::invalid(format!("VC dimension must be >= 2, got {}", self.vc_dim)));
        }
        if self.n < 1 {
            return Err(Error::invalid("sample size must be >= 1"));
        }
        check_eps(self.eps)
    }

    /// `B = 1 + B_G / lambda`.
    pub fn envelope(&self) -> f64 {
        1.0 + self.bound_g / self.lambda
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps must be positive, got {eps}")))
    }
}

/// Covering-number bound and whether `0 < eps < B/4` was violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringBound {
    pub value: f64,
    pub log_value: f64,
    pub precondition_violated: bool,
}

fn log_covering(envelope: f64, p: u32, vc_dim: u32, eps: f64) -> Result<f64> {
    // r = (B / eps)^p, kept in logs
    let log_r = p as f64 * (envelope.ln() - eps.ln());
    let inner = 3.0f64.ln() + 1.0 + log_r;
    if inner <= 0.0 {
        return Err(Error::Domain(format!(
            "ln(3e (B/eps)^p) = {inner} is not positive; covering bound undefined"
        )));
    }
    Ok(3.0f64.ln() + vc_dim as f64 * (2.0f64.ln() + 1.0 + log_r + inner.ln()))
}

pub fn covering_bound(params: &BoundParams) -> Result<CoveringBound> {
    params.validate()?;
    let envelope = params.envelope();
    let log_value = log_covering(envelope, params.p, params.vc_dim, params.eps)?;
    Ok(CoveringBound {
        value: log_value.exp(),
        log_value,
        precondition_violated: params.eps >= envelope / 4.0,
    })
}

/// `exp(-n eps^2 / (128 B^2))`.
pub fn ulln_tail(n: u64, eps: f64, envelope: f64) -> f64 {
    (-tail_exponent(n, eps, envelope)).exp()
}

#[inline]
fn tail_exponent(n: u64, eps: f64, envelope: f64) -> f64 {
    n as f64 * eps * eps / (128.0 * envelope * envelope)
}

/// `min(1, 8 * covering_value * exp(-n eps^2 / (128 B^2)))`, where
/// `covering_value` is the covering bound at `eps / 8`.
pub fn deviation_bound(params: &BoundParams, covering_value: f64) -> Result<f64> {
    params.validate()?;
    if !(covering_value >= 0.0) {
        return Err(Error::invalid(format!("covering value must be >= 0, got {covering_value}")));
    }
    if covering_value == 0.0 {
        return Ok(0.0);
    }
    let log = 8.0f64.ln() + covering_value.ln() - tail_exponent(params.n, params.eps, params.envelope());
    Ok(log.exp().min(1.0))
}

/// The uniform-deviation bound with the covering bound at `eps/8` composed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBound {
    /// Capped at 1.
    pub value: f64,
    /// Natural log of the uncapped bound.
    pub log_uncapped: f64,
    /// `eps/8 >= B/4`: the covering bound was used outside its range.
    pub precondition_violated: bool,
}

pub fn deviation_bound_composed(params: &BoundParams) -> Result<DeviationBound> {
    params.validate()?;
    let envelope = params.envelope();
    let eps8 = params.eps / 8.0;
    let log_cov = log_covering(envelope, params.p, params.vc_dim, eps8)?;
    let log_uncapped = 8.0f64.ln() + log_cov - tail_exponent(params.n, params.eps, envelope);
    Ok(DeviationBound {
        value: log_uncapped.exp().min(1.0),
        log_uncapped,
        precondition_violated: eps8 >= envelope / 4.0,
    })
}

fn log_rate_unchecked(n: f64, eps: f64, envelope: f64, v_n: f64) -> Result<f64> {
    let scaled = envelope / eps;
    let inner = 24.0f64.ln() + 1.0 + scaled.ln();
    if inner <= 0.0 {
        return Err(Error::Domain(format!(
            "24 e B / eps = {} <= 1; ln ln undefined",
            24.0 * E * scaled
        )));
    }
    let growth = 16.0f64.ln() + 1.0 + scaled.ln() + inner.ln();
    Ok(24.0f64.ln() + v_n * growth - n * eps * eps / (128.0 * envelope * envelope))
}

fn check_rate_args(eps: f64, envelope: f64, v_n: f64) -> Result<()> {
    check_eps(eps)?;
    if !(envelope > 1.0 && envelope.is_finite()) {
        return Err(Error::invalid(format!("B_n must exceed 1, got {envelope}")));
    }
    if !(v_n >= 2.0 && v_n.is_finite()) {
        return Err(Error::invalid(format!("v_n must be >= 2, got {v_n}")));
    }
    Ok(())
}

/// `ln K(n, eps)`.
pub fn log_consistency_rate(n: u64, eps: f64, envelope: f64, v_n: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("n must be >= 1"));
    }
    check_rate_args(eps, envelope, v_n)?;
    log_rate_unchecked(n as f64, eps, envelope, v_n)
}

/// `K(n, eps)`; saturates to `0` or `+inf` at the extremes.
pub fn consistency_rate(n: u64, eps: f64, envelope: f64, v_n: f64) -> Result<f64> {
    Ok(log_consistency_rate(n, eps, envelope, v_n)?.exp())
}

/// Smallest `n` with `K(n, eps) <= delta`.
pub fn required_sample_size(eps: f64, delta: f64, envelope: f64, v_n: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    check_rate_args(eps, envelope, v_n)?;
    let target = delta.ln();
    let ok = |n: u64| -> Result<bool> { Ok(log_consistency_rate(n, eps, envelope, v_n)? <= target) };
    if ok(1)? {
        return Ok(1);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while !ok(hi)? {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::Domain("required sample size exceeds u64".into()))?;
    }
    // invariant: K(lo) > delta >= K(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Power-law growth of the model classes: `v_n = vc_scale * n^a` and
/// `B_G(n) = bound_scale * n^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub vc_exponent: f64,
    pub vc_scale: f64,
    pub bound_exponent: f64,
    pub bound_scale: f64,
}

impl Schedule {
    pub fn power_law(a: f64, b: f64) -> Self {
        Schedule {
            vc_exponent: a,
            vc_scale: 2.0,
            bound_exponent: b,
            bound_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vc_exponent >= 0.0 && self.bound_exponent >= 0.0) {
            return Err(Error::invalid("schedule exponents must be >= 0"));
        }
        if !(self.vc_scale > 0.0 && self.bound_scale > 0.0) {
            return Err(Error::invalid("schedule scales must be > 0"));
        }
        Ok(())
    }

    pub fn vc_dim(&self, n: u64) -> f64 {
        self.vc_scale * (n as f64).powf(self.vc_exponent)
    }

    pub fn bound_g(&self, n: u64) -> f64 {
        self.bound_scale * (n as f64).powf(self.bound_exponent)
    }

    /// `v_n B_G^2 ln B_G / n -> 0` holds for power laws iff `a + 2b < 1`
    /// (`a < 1` when `b = 0`, the log factor being constant).
    pub fn condition_holds(&self) -> bool {
        if self.bound_exponent > 0.0 {
            self.vc_exponent + 2.0 * self.bound_exponent < 1.0
        } else {
            self.vc_exponent < 1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub n: u64,
    pub vc_dim: f64,
    pub bound_g: f64,
    pub envelope: f64,
    /// `v_n B_G^2 ln B_G / n`.
    pub growth_term: f64,
    pub log_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub holds: bool,
    pub points: Vec<SchedulePoint>,
    /// First grid index from which the growth term strictly decreases to the end.
    pub decreasing_from: Option<usize>,
    /// First grid index from which consecutive `K` ratios stay below 1.
    pub ratio_below_one_from: Option<usize>,
}

impl ScheduleReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.decreasing_from == Some(0)
    }

    pub fn eventually_decreasing(&self) -> bool {
        self.decreasing_from.is_some()
    }

    pub fn appears_summable(&self) -> bool {
        self.ratio_below_one_from.is_some()
    }
}

/// Start of the longest strictly decreasing suffix (at least two points).
fn decreasing_suffix(v: &[f64]) -> Option<usize> {
    if v.len() < 2 || !(v[v.len() - 1] < v[v.len() - 2]) {
        return None;
    }
    let mut start = v.len() - 2;
    while start > 0 && v[start] < v[start - 1] {
        start -= 1;
    }
    Some(start)
}

pub fn schedule_check(s: &Schedule, lambda: f64, n_grid: &[u64], eps: f64) -> Result<ScheduleReport> {
    s.validate()?;
    check_eps(eps)?;
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::invalid("n_grid must be increasing, positive and have >= 2 points"));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let vc_dim = s.vc_dim(n);
        let bound_g = s.bound_g(n);
        let envelope = mape_envelope(bound_g, lambda)?;
        let growth_term = vc_dim * bound_g * bound_g * bound_g.ln() / n as f64;
        let log_rate = log_rate_unchecked(n as f64, eps, envelope, vc_dim)?;
        points.push(SchedulePoint {
            n,
            vc_dim,
            bound_g,
            envelope,
            growth_term,
            log_rate,
        });
    }
    let growth: Vec<f64> = points.iter().map(|p| p.growth_term).collect();
    let log_rates: Vec<f64> = points.iter().map(|p| p.log_rate).collect();
    Ok(ScheduleReport {
        holds: s.condition_holds(),
        decreasing_from: decreasing_suffix(&growth),
        ratio_below_one_from: decreasing_suffix(&log_rates),
        points,
    })
}

/// One row of a rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub eps: f64,
    pub envelope: f64,
    pub vc_dim: u32,
    pub rate: f64,
    pub deviation_bound: f64,
}

/// `K` and the composed deviation bound (`p = 1`) over a grid of `n` x `eps`.
pub fn rate_table(n_grid: &[u64], eps_grid: &[f64], envelope: f64, vc_dim: u32) -> Result<Vec<RateRow>> {
    let mut rows = Vec::with_capacity(n_grid.len() * eps_grid.len());
    for &eps in eps_grid {
        for &n in n_grid {
            let params = BoundParams::from_envelope(envelope, 1, vc_dim, n, eps)?;
            rows.push(RateRow {
                n,
                eps,
                envelope,
                vc_dim,
                rate: consistency_rate(n, eps, envelope, vc_dim as f64)?,
                deviation_bound: deviation_bound_composed(&params)?.value,
            });
        }
    }
    Ok(rows)
}

/// Maximum number of points a shattering check enumerates.
pub const SHATTER_MAX_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterPoint {
    pub x: Vec<f64>,
    pub y: f64,
    pub t: f64,
}

/// Points `(x, y, t)` and a finite grid of models standing in for `G_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterInstance {
    pub points: Vec<ShatterPoint>,
    pub models: Vec<LinearModel>,
}

impl ShatterInstance {
    /// Same instance with every threshold multiplied by `|y|`.
    pub fn scale_thresholds_by_abs_target(&self) -> ShatterInstance {
        ShatterInstance {
            points: self
                .points
                .iter()
                .map(|p| ShatterPoint {
                    x: p.x.clone(),
                    y: p.y,
                    t: p.t * p.y.abs(),
                })
                .collect(),
            models: self.models.clone(),
        }
    }
}

pub type Pattern = Vec<bool>;

/// The set of dichotomies `(1{t_i <= l(g(x_i), y_i)})_i` realized by the grid.
pub fn shatter_patterns(inst: &ShatterInstance, loss: LossKind) -> Result<BTreeSet<Pattern>> {
    if loss == LossKind::Mse {
        return Err(Error::invalid("shattering is defined for mae and mape only"));
    }
    if inst.points.len() > SHATTER_MAX_POINTS {
        return Err(Error::TooLarge(format!(
            "{} points (at most {SHATTER_MAX_POINTS})",
            inst.points.len()
        )));
    }
    for (i, pt) in inst.points.iter().enumerate() {
        if !(pt.t > 0.0 && pt.t.is_finite()) {
            return Err(Error::invalid(format!("point {i}: threshold must be positive")));
        }
        if !pt.y.is_finite() || pt.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("point {i}: non-finite coordinate")));
        }
        if loss == LossKind::Mape && pt.y == 0.0 {
            return Err(Error::invalid(format!("point {i}: zero target under mape")));
        }
    }
    let mut patterns = BTreeSet::new();
    for (j, g) in inst.models.iter().enumerate() {
        let pattern = inst
            .points
            .iter()
            .map(|pt| {
                if g.beta.len() != pt.x.len() {
                    return Err(Error::DimensionMismatch {
                        what: "model coefficients vs point features",
                        expected: pt.x.len(),
                        got: g.beta.len(),
                    });
                }
                let pred = g.apply_clamp(g.linear_response(pt.x.iter().copied()));
                Ok(pt.t <= pointwise_loss(loss, pred, pt.y).value())
            })
            .collect::<Result<Pattern>>()
            .map_err(|e| Error::invalid(format!("model {j}: {e}")))?;
        patterns.insert(pattern);
    }
    Ok(patterns)
}

/// Whether the grid realizes all `2^k` dichotomies of the points.
pub fn shatters(inst: &ShatterInstance, loss: LossKind) -> Result<bool> {
    let patterns = shatter_patterns(inst, loss)?;
    Ok(patterns.len() == 1usize << inst.points.len())
}
