//! Seeded synthetic data and Monte-Carlo experiments.
//!
//! Every output is a pure function of the spec, the grids and the seed.
//! Each (grid point, replicate, role) pair gets its own ChaCha stream derived
//! from the master seed, so parallel runs reproduce serial ones exactly.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::losses::{pointwise_loss, Dataset, LossKind};
use crate::regressors::{evaluate, fit, predict, FitConfig};
use crate::wl1solver::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    /// `Y = max(exp(beta^T x + c + sigma xi), floor)`.
    ExpMultiplicative,
    /// `Y = max(beta^T x + c + sigma xi, floor)`.
    AffineFloored,
}

impl std::str::FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exp-multiplicative" => Ok(Link::ExpMultiplicative),
            "affine" | "affine-floored" => Ok(Link::AffineFloored),
            other => Err(Error::invalid(format!("unknown link '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// Rows i.i.d. uniform on `[0, 1]^d`.
    #[default]
    UniformCube,
}

/// Data-generating process. Targets are floored at `target_floor`, so
/// `|Y| >= target_floor` almost surely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub d: usize,
    pub beta_star: Vec<f64>,
    pub intercept_star: f64,
    pub noise_sigma: f64,
    pub target_floor: f64,
    pub design: Design,
    pub link: Link,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            d: 2,
            beta_star: vec![0.8, -0.5],
            intercept_star: 0.5,
            noise_sigma: 0.3,
            target_floor: 0.05,
            design: Design::UniformCube,
            link: Link::ExpMultiplicative,
        }
    }
}

impl SyntheticSpec {
    /// Log-normal noise with `sigma = 1`: strongly right-skewed targets.
    pub fn skewed() -> Self {
        SyntheticSpec {
            noise_sigma: 1.0,
            ..SyntheticSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::invalid("spec needs d >= 1"));
        }
        if self.beta_star.len() != self.d {
            return Err(Error::DimensionMismatch {
                what: "beta_star vs d",
                expected: self.d,
                got: self.beta_star.len(),
            });
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be >= 0"));
        }
        if !(self.target_floor > 0.0 && self.target_floor.is_finite()) {
            return Err(Error::invalid("target_floor must be > 0"));
        }
        if self.beta_star.iter().any(|b| !b.is_finite()) || !self.intercept_star.is_finite() {
            return Err(Error::invalid("true coefficients must be finite"));
        }
        Ok(())
    }

    /// `beta*^T x + intercept*`, before the link.
    pub fn index(&self, x: &[f64]) -> f64 {
        self.beta_star.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + self.intercept_star
    }
}

/// `n` i.i.d. draws from `spec`; bit-identical for identical arguments.
pub fn generate(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n < 1 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, spec.d);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; spec.d];
    for i in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rng.random::<f64>();
            x[(i, j)] = *v;
        }
        let xi: f64 = rng.sample(StandardNormal);
        let eta = spec.index(&row) + spec.noise_sigma * xi;
        let raw = match spec.link {
            Link::ExpMultiplicative => eta.exp(),
            Link::AffineFloored => eta,
        };
        y.push(raw.max(spec.target_floor));
    }
    Dataset::new(x, y)
}

/// Mixes the master seed with a path of indices (splitmix64 finalizer).
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Sample mean and standard error of the loss over `m` fresh draws.
pub fn monte_carlo_risk(
    model: &LinearModel,
    spec: &SyntheticSpec,
    m: usize,
    seed: u64,
    kind: LossKind,
) -> Result<MonteCarloEstimate> {
    if m < 100 {
        return Err(Error::invalid(format!("Monte-Carlo size must be >= 100, got {m}")));
    }
    let data = generate(spec, m, seed)?;
    let pred = predict(model, data.x())?;
    let losses: Vec<f64> = pred
        .iter()
        .zip(data.y())
        .map(|(&p, &t)| pointwise_loss(kind, p, t).value())
        .collect();
    let mean = losses.iter().sum::<f64>() / m as f64;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (m - 1) as f64;
    Ok(MonteCarloEstimate {
        estimate: mean,
        std_error: (var / m as f64).sqrt(),
    })
}

/// `B_G(n) = scale * n^exponent`, applied to fitted models as a clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampSchedule {
    pub scale: f64,
    pub exponent: f64,
}

impl ClampSchedule {
    pub fn at(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Size of each held-out test set.
    pub m_test: usize,
    /// Draws used by the Monte-Carlo risk estimate.
    pub m_mc: usize,
    pub seed: u64,
    pub clamp_schedule: Option<ClampSchedule>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_grid: vec![50, 200, 800, 3200],
            replicates: 10,
            m_test: 2000,
            m_mc: 20_000,
            seed: 20_150_601,
            clamp_schedule: None,
        }
    }
}

/// One fitted model evaluated under one loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub replicate: usize,
    pub fit_loss: LossKind,
    pub eval_loss: LossKind,
    pub train_risk: f64,
    pub test_risk: f64,
    pub mc_true_risk: Option<f64>,
    pub mc_std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFailure {
    pub n: usize,
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std_dev: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Moments {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        Moments {
            mean,
            std_dev: var.sqrt(),
        }
    }
}

/// Aggregate over replicates for one `(n, fit_loss, eval_loss)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub fit_loss: LossKind,
    pub eval_loss: LossKind,
    pub replicates: usize,
    pub train: Moments,
    pub test: Moments,
    pub mc: Option<Moments>,
    /// Mean of `|train_risk - mc_true_risk|`.
    pub mean_abs_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
    pub failures: Vec<ExperimentFailure>,
}

impl ExperimentResult {
    /// Summary rows, in first-appearance order of their keys.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(usize, LossKind, LossKind)> = Vec::new();
        for r in &self.rows {
            let k = (r.n, r.fit_loss, r.eval_loss);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(n, fit_loss, eval_loss)| {
                let cell: Vec<&ExperimentRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.n == n && r.fit_loss == fit_loss && r.eval_loss == eval_loss)
                    .collect();
                let train: Vec<f64> = cell.iter().map(|r| r.train_risk).collect();
                let test: Vec<f64> = cell.iter().map(|r| r.test_risk).collect();
                let mc: Option<Vec<f64>> = cell.iter().map(|r| r.mc_true_risk).collect();
                let mean_abs_gap = mc.as_ref().map(|mc| {
                    train.iter().zip(mc).map(|(t, m)| (t - m).abs()).sum::<f64>() / train.len() as f64
                });
                SummaryRow {
                    n,
                    fit_loss,
                    eval_loss,
                    replicates: cell.len(),
                    train: Moments::of(&train),
                    test: Moments::of(&test),
                    mc: mc.as_deref().map(Moments::of),
                    mean_abs_gap,
                }
            })
            .collect()
    }

    /// One row per (n, replicate, fit loss, eval loss).
    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "n", "replicate", "fit_loss", "eval_loss", "train_risk", "test_risk", "mc_true_risk", "mc_std_error",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.replicate.to_string(),
                r.fit_loss.to_string(),
                r.eval_loss.to_string(),
                format_f64(r.train_risk),
                format_f64(r.test_risk),
                r.mc_true_risk.map(format_f64).unwrap_or_default(),
                r.mc_std_error.map(format_f64).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "n",
            "fit_loss",
            "eval_loss",
            "replicates",
            "train_mean",
            "train_sd",
            "test_mean",
            "test_sd",
            "mc_mean",
            "mc_sd",
            "mean_abs_gap",
        ])?;
        for s in self.summary() {
            w.write_record([
                s.n.to_string(),
                s.fit_loss.to_string(),
                s.eval_loss.to_string(),
                s.replicates.to_string(),
                format_f64(s.train.mean),
                format_f64(s.train.std_dev),
                format_f64(s.test.mean),
                format_f64(s.test.std_dev),
                s.mc.map(|m| format_f64(m.mean)).unwrap_or_default(),
                s.mc.map(|m| format_f64(m.std_dev)).unwrap_or_default(),
                s.mean_abs_gap.map(format_f64).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_failures_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "replicate", "message"])?;
        for f in &self.failures {
            w.write_record([f.n.to_string(), f.replicate.to_string(), f.message.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

// Stream roles within one replicate.
const ROLE_TRAIN: u64 = 0;
const ROLE_TEST: u64 = 1;
const ROLE_MC: u64 = 2;

fn run_replicate(
    spec: &SyntheticSpec,
    cfg: &ExperimentConfig,
    n: usize,
    replicate: usize,
) -> Result<ExperimentRow> {
    let path = |role| [n as u64, replicate as u64, role];
    let train = generate(spec, n, derive_seed(cfg.seed, &path(ROLE_TRAIN)))?;
    let test = generate(spec, cfg.m_test, derive_seed(cfg.seed, &path(ROLE_TEST)))?;
    let (mut fitted, _) = fit(&train, &FitConfig::new(LossKind::Mape))?;
    if let Some(s) = cfg.clamp_schedule {
        fitted.model.clamp = Some(s.at(n));
    }
    let model = &fitted.model;
    let mc = monte_carlo_risk(model, spec, cfg.m_mc, derive_seed(cfg.seed, &path(ROLE_MC)), LossKind::Mape)?;
    Ok(ExperimentRow {
        n,
        replicate,
        fit_loss: LossKind::Mape,
        eval_loss: LossKind::Mape,
        train_risk: evaluate(model, &train, LossKind::Mape)?.value(),
        test_risk: evaluate(model, &test, LossKind::Mape)?.value(),
        mc_true_risk: Some(mc.estimate),
        mc_std_error: Some(mc.std_error),
    })
}

/// MAPE-ERM over a grid of sample sizes: train risk, held-out risk and a
/// Monte-Carlo estimate of the true risk for every replicate. Fit failures
/// are recorded and the sweep continues.
pub fn convergence_experiment(spec: &SyntheticSpec, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    spec.validate()?;
    if cfg.n_grid.is_empty() || cfg.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_grid must be non-empty and increasing"));
    }
    if cfg.replicates < 3 {
        return Err(Error::invalid("at least 3 replicates are required"));
    }
    if cfg.m_test < 1 || cfg.m_mc < 100 {
        return Err(Error::invalid("m_test must be >= 1 and m_mc >= 100"));
    }
    let tasks: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let outcomes: Vec<(usize, usize, Result<ExperimentRow>)> = tasks
        .par_iter()
        .map(|&(n, r)| (n, r, run_replicate(spec, cfg, n, r)))
        .collect();
    let mut result = ExperimentResult::default();
    for (n, replicate, outcome) in outcomes {
        match outcome {
            Ok(row) => result.rows.push(row),
            Err(e) => result.failures.push(ExperimentFailure {
                n,
                replicate,
                message: e.to_string(),
            }),
        }
    }
    Ok(result)
}

/// Fits all three losses on one training set and evaluates each model under
/// all three losses on train and on a held-out set of size `m_test`.
pub fn comparison_experiment(spec: &SyntheticSpec, n: usize, seed: u64, m_test: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    if n < spec.d + 2 {
        return Err(Error::invalid(format!("n must be >= d + 2 = {}", spec.d + 2)));
    }
    if m_test < 1 {
        return Err(Error::invalid("m_test must be >= 1"));
    }
    let train = generate(spec, n, derive_seed(seed, &[n as u64, 0, ROLE_TRAIN]))?;
    let test = generate(spec, m_test, derive_seed(seed, &[n as u64, 0, ROLE_TEST]))?;
    let mut result = ExperimentResult::default();
    for fit_loss in LossKind::ALL {
        let (fitted, _) = fit(&train, &FitConfig::new(fit_loss))?;
        for eval_loss in LossKind::ALL {
            result.rows.push(ExperimentRow {
                n,
                replicate: 0,
                fit_loss,
                eval_loss,
                train_risk: evaluate(&fitted.model, &train, eval_loss)?.value(),
                test_risk: evaluate(&fitted.model, &test, eval_loss)?.value(),
                mc_true_risk: None,
                mc_std_error: None,
            });
        }
    }
    Ok(result)
}

/// `[fit][eval]` matrix (order mse, mae, mape) of train or test risks.
pub fn risk_matrix(result: &ExperimentResult, test: bool) -> [[f64; 3]; 3] {
    let mut m = [[f64::NAN; 3]; 3];
    for r in &result.rows {
        let i = LossKind::ALL.iter().position(|&k| k == r.fit_loss).unwrap();
        let j = LossKind::ALL.iter().position(|&k| k == r.eval_loss).unwrap();
        m[i][j] = if test { r.test_risk } else { r.train_risk };
    }
    m
}
