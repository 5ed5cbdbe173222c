//! Weighted quantile regression.
//!
//! Minimizes `sum_i w_i * rho_tau(y_i - x_i^T beta)` with the pinball loss
//! `rho_tau(u) = u * (tau - 1{u < 0})`. At `tau = 0.5` this is half the
//! weighted absolute error, so MAPE regression is the case `w_i = 1/|y_i|`.
//!
//! The exact method runs a bounded-variable revised simplex on the dual
//!
//! ```text
//! max  sum_i y_i a_i   s.t.  sum_i a_i x_i = 0,   -(1 - tau) w_i <= a_i <= tau w_i
//! ```
//!
//! whose basis is only `p x p` (`p` = number of coefficients). The simplex
//! multipliers of an optimal basis are the regression coefficients, and the
//! basic observations are interpolated exactly, so the returned model is a
//! vertex of the primal LP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{augmented_design, least_squares_qr, require_full_column_rank, solve_square};
use crate::losses::Dataset;

/// Quantile level `tau` in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub const MEDIAN: QuantileLevel = QuantileLevel(0.5);

    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(QuantileLevel(tau))
        } else {
            Err(Error::invalid(format!("quantile level must lie in (0, 1), got {tau}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QuantileLevel {
    type Error = Error;

    fn try_from(tau: f64) -> Result<Self> {
        QuantileLevel::new(tau)
    }
}

impl From<QuantileLevel> for f64 {
    fn from(q: QuantileLevel) -> f64 {
        q.0
    }
}

/// Observation weights, each strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(format!(
                "weight {i} must be positive and finite, got {}",
                w[i]
            )));
        }
        Ok(WeightVector(w))
    }

    pub fn ones(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    /// The MAPE weights `1/|y_i|`. Errors on the first zero target.
    pub fn inverse_abs(y: &[f64]) -> Result<Self> {
        if let Some(row) = y.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroTarget { row });
        }
        WeightVector::new(y.iter().map(|v| 1.0 / v.abs()).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeightVector::new(self.0.iter().map(|w| w * c).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    SimplexExact,
    Irls,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplex-exact" | "simplex" => Ok(SolverMethod::SimplexExact),
            "irls" => Ok(SolverMethod::Irls),
            other => Err(Error::invalid(format!("unknown solver method '{other}'"))),
        }
    }
}

/// Solver settings.
///
/// `max_iterations` bounds the IRLS loop. The simplex always terminates;
/// its pivot budget is `max(max_iterations, 50 * (n + p) + 1000)`.
/// `irls_smoothing` is the residual floor; `None` selects
/// `1e-8 * (max|y| + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub irls_smoothing: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::SimplexExact,
            max_iterations: 200,
            tolerance: 1e-10,
            irls_smoothing: None,
        }
    }
}

impl SolverConfig {
    pub fn irls() -> Self {
        SolverConfig {
            method: SolverMethod::Irls,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if let Some(d) = self.irls_smoothing {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid("irls_smoothing must be positive"));
            }
        }
        Ok(())
    }
}

/// A linear predictor `x^T beta (+ intercept)`, optionally truncated into
/// `[-clamp, clamp]` at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub beta: Vec<f64>,
    pub intercept: Option<f64>,
    pub clamp: Option<f64>,
}

impl LinearModel {
    pub fn new(beta: Vec<f64>, intercept: Option<f64>) -> Self {
        LinearModel {
            beta,
            intercept,
            clamp: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        LinearModel::new(Vec::new(), Some(c))
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = Some(clamp);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.iter().chain(self.intercept.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("model coefficients must be finite"));
        }
        if let Some(c) = self.clamp {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("clamp must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Unclamped linear response for one row.
    #[inline]
    pub fn linear_response(&self, row: impl Iterator<Item = f64>) -> f64 {
        let dot: f64 = self.beta.iter().zip(row).map(|(b, x)| b * x).sum();
        dot + self.intercept.unwrap_or(0.0)
    }

    #[inline]
    pub fn apply_clamp(&self, v: f64) -> f64 {
        match self.clamp {
            Some(c) => v.clamp(-c, c),
            None => v,
        }
    }

    pub(crate) fn linear_predictions(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.linear_response(x.row(i).iter().copied()))
            .collect()
    }

    fn check_dims(&self, d: usize) -> Result<()> {
        if self.beta.len() != d {
            return Err(Error::DimensionMismatch {
                what: "model coefficients vs features",
                expected: d,
                got: self.beta.len(),
            });
        }
        Ok(())
    }

    fn from_coefficients(coef: &[f64], with_intercept: bool) -> Self {
        if with_intercept {
            LinearModel::new(coef[1..].to_vec(), Some(coef[0]))
        } else {
            LinearModel::new(coef.to_vec(), None)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    /// Exact optimal vertex.
    Optimal,
    /// IRLS met its relative-improvement tolerance.
    Converged,
}

/// What the solver did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: SolverMethod,
    pub status: SolverStatus,
    pub objective: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub irls_smoothing: Option<f64>,
    /// Observations interpolated by the optimal vertex (simplex only).
    pub basis: Vec<usize>,
}

#[inline]
fn pinball(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

fn weighted_pinball_sum(y: &[f64], pred: &[f64], w: &[f64], tau: f64) -> f64 {
    y.iter()
        .zip(pred)
        .zip(w)
        .map(|((yi, pi), wi)| wi * pinball(yi - pi, tau))
        .sum()
}

/// `sum_i w_i * rho_tau(y_i - x_i^T beta - intercept)`; the model's clamp is
/// not applied.
pub fn objective(
    data: &Dataset,
    w: &WeightVector,
    tau: QuantileLevel,
    model: &LinearModel,
) -> Result<f64> {
    model.check_dims(data.n_features())?;
    if w.len() != data.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "weights vs samples",
            expected: data.n_samples(),
            got: w.len(),
        });
    }
    let pred = model.linear_predictions(data.x());
    Ok(weighted_pinball_sum(data.y(), &pred, w.as_slice(), tau.value()))
}

/// Smallest minimizer of `sum_i w_i * rho_tau(c - v_i)`: the first value, in
/// sorted order, whose cumulative weight reaches `tau` of the total.
pub fn weighted_quantile(values: &[f64], weights: &WeightVector, tau: QuantileLevel) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("weighted quantile of an empty sample"));
    }
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            what: "weights vs values",
            expected: values.len(),
            got: weights.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values must be finite"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let w = weights.as_slice();
    let total: f64 = order.iter().map(|&i| w[i]).sum();
    let target = tau.value() * total;
    let mut cum = 0.0;
    for &i in &order {
        cum += w[i];
        if cum >= target {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().unwrap()])
}

/// Smallest minimizer of `sum_i w_i |c - v_i|`.
pub fn weighted_median(values: &[f64], weights: &WeightVector) -> Result<f64> {
    weighted_quantile(values, weights, QuantileLevel::MEDIAN)
}

/// Fits the weighted quantile regression.
pub fn fit_weighted_quantile(
    data: &Dataset,
    w: &WeightVector,
    tau: QuantileLevel,
    config: &SolverConfig,
    with_intercept: bool,
) -> Result<(LinearModel, SolverReport)> {
    config.validate()?;
    if w.len() != data.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "weights vs samples",
            expected: data.n_samples(),
            got: w.len(),
        });
    }
    let a = augmented_design(data.x(), with_intercept);
    if a.ncols() == 0 {
        return Err(Error::invalid("model has no coefficients to fit"));
    }
    require_full_column_rank(&a)?;
    match config.method {
        SolverMethod::SimplexExact => {
            let sol = simplex::solve(&a, data.y(), w.as_slice(), tau.value(), config.max_iterations)?;
            let model = LinearModel::from_coefficients(&sol.coef, with_intercept);
            let objective = objective(data, w, tau, &model)?;
            Ok((
                model,
                SolverReport {
                    method: SolverMethod::SimplexExact,
                    status: SolverStatus::Optimal,
                    objective,
                    iterations: sol.iterations,
                    tolerance: config.tolerance,
                    irls_smoothing: None,
                    basis: sol.basis,
                },
            ))
        }
        SolverMethod::Irls => irls(&a, data, w, tau, config, with_intercept),
    }
}

fn irls(
    a: &DMatrix<f64>,
    data: &Dataset,
    w: &WeightVector,
    tau: QuantileLevel,
    config: &SolverConfig,
    with_intercept: bool,
) -> Result<(LinearModel, SolverReport)> {
    let y = data.y();
    let wv = w.as_slice();
    let t = tau.value();
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let delta = config.irls_smoothing.unwrap_or(1e-8 * (ymax + 1.0));

    let weighted_ls = |v: &[f64], target: &[f64]| -> Result<DVector<f64>> {
        let sa = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * v[i].sqrt());
        let sy = DVector::from_fn(a.nrows(), |i, _| target[i] * v[i].sqrt());
        least_squares_qr(&sa, &sy)
    };

    let mut coef = weighted_ls(wv, y)?;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut prev = f64::INFINITY;
    for it in 1..=config.max_iterations {
        let fitted = a * &coef;
        let pred = fitted.as_slice();
        let obj = weighted_pinball_sum(y, pred, wv, t);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, coef.clone()));
        }
        let converged = obj == 0.0
            || (prev.is_finite() && (prev - obj).abs() <= config.tolerance * prev.max(f64::MIN_POSITIVE));
        if converged {
            let (obj, coef) = best.unwrap();
            let model = LinearModel::from_coefficients(coef.as_slice(), with_intercept);
            return Ok((
                model,
                SolverReport {
                    method: SolverMethod::Irls,
                    status: SolverStatus::Converged,
                    objective: obj,
                    iterations: it,
                    tolerance: config.tolerance,
                    irls_smoothing: Some(delta),
                    basis: Vec::new(),
                },
            ));
        }
        prev = obj;
        // Majorize rho_tau(r) by r^2 / (4 m) + (tau - 1/2) r with m = max(|r0|, delta):
        // weighted least squares on shifted targets.
        let mut v = Vec::with_capacity(y.len());
        let mut target = Vec::with_capacity(y.len());
        for i in 0..y.len() {
            let m = (y[i] - pred[i]).abs().max(delta);
            v.push(wv[i] / (4.0 * m));
            target.push(y[i] + (2.0 * t - 1.0) * m);
        }
        coef = weighted_ls(&v, &target)?;
    }
    let (obj, coef) = best.unwrap();
    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        objective: obj,
        best: Box::new(LinearModel::from_coefficients(coef.as_slice(), with_intercept)),
    })
}

/// Largest problem `brute_force_fit` accepts.
pub const BRUTE_FORCE_MAX_SAMPLES: usize = 25;
pub const BRUTE_FORCE_MAX_FEATURES: usize = 3;

/// Exhaustive search over elemental subsets: every choice of `p` observations
/// whose design rows are nonsingular determines a candidate that
/// interpolates them. Some optimal solution of the LP is such a vertex.
pub fn brute_force_fit(
    data: &Dataset,
    w: &WeightVector,
    tau: QuantileLevel,
    with_intercept: bool,
) -> Result<(LinearModel, f64)> {
    let n = data.n_samples();
    let d = data.n_features();
    if n > BRUTE_FORCE_MAX_SAMPLES || d > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooLarge(format!(
            "brute force needs n <= {BRUTE_FORCE_MAX_SAMPLES} and d <= {BRUTE_FORCE_MAX_FEATURES}, got n = {n}, d = {d}"
        )));
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            what: "weights vs samples",
            expected: n,
            got: w.len(),
        });
    }
    let a = augmented_design(data.x(), with_intercept);
    let p = a.ncols();
    if p == 0 {
        return Err(Error::invalid("model has no coefficients to fit"));
    }
    if n < p {
        return Err(Error::DegenerateDesign { rank: n, required: p });
    }
    let y = data.y();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut subset: Vec<usize> = (0..p).collect();
    loop {
        let sub = a.select_rows(subset.iter());
        let rhs = DVector::from_iterator(p, subset.iter().map(|&i| y[i]));
        if let Some(coef) = solve_square(sub, &rhs) {
            let fitted = &a * &coef;
            let obj = weighted_pinball_sum(y, fitted.as_slice(), w.as_slice(), tau.value());
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, coef));
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    let (obj, coef) = best.ok_or(Error::DegenerateDesign { rank: 0, required: p })?;
    Ok((LinearModel::from_coefficients(coef.as_slice(), with_intercept), obj))
}

/// Advances `c` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..k {
        c[j] = c[j - 1] + 1;
    }
    true
}

mod simplex {
    //! Bounded-variable revised simplex on the quantile-regression dual.
    //!
    //! Variables `b_i = a_i + (1 - tau) w_i` live in `[0, w_i]`, so the
    //! constraints read `sum_i b_i x_i = (1 - tau) sum_i w_i x_i`. Phase one
    //! starts from `b = 0` with `p` artificial columns; phase two maximizes
    //! `sum_i y_i b_i` with the artificials fixed at zero.

    use nalgebra::{DMatrix, DVector};

    use crate::error::{Error, Result};
    use crate::linalg::solve_square;

    pub(super) struct Solution {
        pub coef: Vec<f64>,
        pub basis: Vec<usize>,
        pub iterations: usize,
    }

    #[derive(Clone, Copy, PartialEq, Eq)]
    enum State {
        Basic(usize),
        AtLower,
        AtUpper,
    }

    // Degenerate pivots tolerated before switching to Bland's rule.
    const DEGENERATE_LIMIT: usize = 50;
    const REFACTOR_EVERY: usize = 64;

    struct Tableau<'a> {
        a: &'a DMatrix<f64>,
        n: usize,
        p: usize,
        rhs: DVector<f64>,
        art_sign: Vec<f64>,
        upper: Vec<f64>,
        state: Vec<State>,
        basis: Vec<usize>,
        x_basic: DVector<f64>,
        binv: DMatrix<f64>,
        since_refactor: usize,
    }

    impl Tableau<'_> {
        fn column(&self, k: usize) -> DVector<f64> {
            if k < self.n {
                self.a.row(k).transpose()
            } else {
                let mut e = DVector::zeros(self.p);
                e[k - self.n] = self.art_sign[k - self.n];
                e
            }
        }

        fn value_of(&self, k: usize) -> f64 {
            match self.state[k] {
                State::Basic(r) => self.x_basic[r],
                State::AtLower => 0.0,
                State::AtUpper => self.upper[k],
            }
        }

        fn refactor(&mut self) -> Result<()> {
            let b = DMatrix::from_columns(&self.basis.iter().map(|&k| self.column(k)).collect::<Vec<_>>());
            self.binv = b
                .try_inverse()
                .ok_or_else(|| Error::Domain("simplex basis became singular".into()))?;
            let mut r = self.rhs.clone();
            for k in 0..self.n + self.p {
                if let State::AtUpper = self.state[k] {
                    r -= self.column(k) * self.upper[k];
                }
            }
            self.x_basic = &self.binv * r;
            self.since_refactor = 0;
            Ok(())
        }

        fn pivot(&mut self, row: usize, entering: usize, alpha: &DVector<f64>) {
            let piv = alpha[row];
            let mut pivot_row = self.binv.row(row).clone_owned();
            pivot_row /= piv;
            for i in 0..self.p {
                if i != row && alpha[i] != 0.0 {
                    let f = alpha[i];
                    for j in 0..self.p {
                        self.binv[(i, j)] -= f * pivot_row[j];
                    }
                }
            }
            self.binv.set_row(row, &pivot_row);
            self.basis[row] = entering;
            self.state[entering] = State::Basic(row);
            self.since_refactor += 1;
        }

        /// Runs simplex iterations maximizing `sum_k cost_k x_k`.
        fn optimize(&mut self, cost: &[f64], d_tol: f64, budget: &mut usize) -> Result<usize> {
            let total = self.n + self.p;
            let mut iterations = 0;
            let mut degenerate_run = 0;
            loop {
                if self.since_refactor >= REFACTOR_EVERY {
                    self.refactor()?;
                }
                let c_b = DVector::from_iterator(self.p, self.basis.iter().map(|&k| cost[k]));
                let pi = self.binv.transpose() * c_b;
                let bland = degenerate_run >= DEGENERATE_LIMIT;

                let mut entering: Option<(usize, f64)> = None;
                for k in 0..total {
                    let dir = match self.state[k] {
                        State::Basic(_) => continue,
                        _ if self.upper[k] <= 0.0 => continue,
                        State::AtLower => 1.0,
                        State::AtUpper => -1.0,
                    };
                    let dk = if k < self.n {
                        cost[k] - self.a.row(k).iter().zip(pi.iter()).map(|(x, p)| x * p).sum::<f64>()
                    } else {
                        cost[k] - self.art_sign[k - self.n] * pi[k - self.n]
                    };
                    let gain = dir * dk;
                    if gain > d_tol {
                        if bland {
                            entering = Some((k, dir));
                            break;
                        }
                        if entering.is_none_or(|(_, g)| gain > g) {
                            entering = Some((k, gain));
                        }
                    }
                }
                let Some((enter, _)) = entering else {
                    return Ok(iterations);
                };
                if *budget == 0 {
                    return Err(Error::Domain("simplex pivot budget exhausted".into()));
                }
                *budget -= 1;
                iterations += 1;

                let dir = if self.state[enter] == State::AtLower { 1.0 } else { -1.0 };
                let alpha = &self.binv * self.column(enter);
                let amax = alpha.amax();
                let piv_tol = 1e-11 * amax.max(1.0);

                // Largest step keeping every basic variable within its bounds.
                let mut step = self.upper[enter];
                let mut leave: Option<(usize, bool)> = None;
                for r in 0..self.p {
                    let rate = -dir * alpha[r];
                    let k = self.basis[r];
                    let (limit, to_upper) = if rate < -piv_tol {
                        ((self.x_basic[r].max(0.0)) / -rate, false)
                    } else if rate > piv_tol && self.upper[k].is_finite() {
                        (((self.upper[k] - self.x_basic[r]).max(0.0)) / rate, true)
                    } else {
                        continue;
                    };
                    let take = limit < step
                        || (limit == step
                            && leave.is_some_and(|(lr, _)| {
                                if bland {
                                    k < self.basis[lr]
                                } else {
                                    alpha[r].abs() > alpha[lr].abs()
                                }
                            }));
                    if take {
                        step = limit;
                        leave = Some((r, to_upper));
                    }
                }
                if !step.is_finite() {
                    return Err(Error::Domain("unbounded simplex direction".into()));
                }
                degenerate_run = if step == 0.0 { degenerate_run + 1 } else { 0 };

                let delta = &alpha * (dir * step);
                self.x_basic -= delta;
                match leave {
                    None => {
                        self.state[enter] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                    }
                    Some((r, to_upper)) => {
                        let out = self.basis[r];
                        let entering_value = if dir > 0.0 { step } else { self.upper[enter] - step };
                        self.pivot(r, enter, &alpha);
                        self.x_basic[r] = entering_value;
                        self.state[out] = if to_upper { State::AtUpper } else { State::AtLower };
                    }
                }
            }
        }
    }

    pub(super) fn solve(a: &DMatrix<f64>, y: &[f64], w: &[f64], tau: f64, max_iterations: usize) -> Result<Solution> {
        let (n, p) = (a.nrows(), a.ncols());
        let mut rhs = DVector::zeros(p);
        for i in 0..n {
            for j in 0..p {
                rhs[j] += (1.0 - tau) * w[i] * a[(i, j)];
            }
        }
        let art_sign: Vec<f64> = rhs.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut upper = w.to_vec();
        upper.extend(std::iter::repeat_n(f64::INFINITY, p));
        let mut state = vec![State::AtLower; n + p];
        let basis: Vec<usize> = (n..n + p).collect();
        for (r, &k) in basis.iter().enumerate() {
            state[k] = State::Basic(r);
        }
        let mut tab = Tableau {
            a,
            n,
            p,
            rhs,
            art_sign,
            upper,
            state,
            basis,
            x_basic: DVector::zeros(p),
            binv: DMatrix::identity(p, p),
            since_refactor: 0,
        };
        tab.refactor()?;

        let mut budget = max_iterations.max(50 * (n + p) + 1000);
        let amax = a.amax().max(f64::MIN_POSITIVE);
        let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        // Phase one: drive the artificials to zero.
        let mut cost1 = vec![0.0; n + p];
        cost1[n..].iter_mut().for_each(|c| *c = -1.0);
        let mut iterations = tab.optimize(&cost1, 1e-11 * (1.0 + amax), &mut budget)?;
        tab.refactor()?;
        let wsum: f64 = w.iter().sum();
        let infeasibility: f64 = (n..n + p).map(|k| tab.value_of(k)).sum();
        if infeasibility > 1e-9 * (1.0 + wsum * amax) {
            return Err(Error::Domain(format!("phase one ended infeasible ({infeasibility:e})")));
        }

        // Swap basic artificials (at zero) for observations; full column rank
        // guarantees a candidate with a nonzero pivot.
        for r in 0..p {
            let k = tab.basis[r];
            if k < n {
                continue;
            }
            let row = tab.binv.row(r).clone_owned();
            let mut cand: Option<(usize, f64)> = None;
            for i in 0..n {
                if let State::Basic(_) = tab.state[i] {
                    continue;
                }
                let v: f64 = row.iter().zip(a.row(i).iter()).map(|(b, x)| b * x).sum();
                if cand.is_none_or(|(_, best)| v.abs() > best.abs()) {
                    cand = Some((i, v));
                }
            }
            let (i, _) = cand.ok_or_else(|| Error::Domain("no observation to replace artificial".into()))?;
            let alpha = &tab.binv * tab.column(i);
            tab.pivot(r, i, &alpha);
            tab.state[k] = State::AtLower;
            tab.refactor()?;
        }
        for k in n..n + p {
            tab.upper[k] = 0.0;
            tab.state[k] = State::AtLower;
        }
        tab.refactor()?;

        // Phase two.
        let mut cost2 = y.to_vec();
        cost2.extend(std::iter::repeat_n(0.0, p));
        iterations += tab.optimize(&cost2, 1e-12 * (1.0 + ymax), &mut budget)?;

        // Coefficients interpolate the basic observations exactly.
        let mut basis = tab.basis.clone();
        basis.sort_unstable();
        let sub = a.select_rows(basis.iter());
        let rhs = DVector::from_iterator(p, basis.iter().map(|&i| y[i]));
        let coef = solve_square(sub, &rhs)
            .ok_or_else(|| Error::Domain("optimal basis is singular".into()))?;
        Ok(Solution {
            coef: coef.as_slice().to_vec(),
            basis,
            iterations,
        })
    }
}
