//! Supervised models: linear regression by gradient descent or normal
//! equation, ridge-style regularization (bias exempt), logistic regression,
//! hinge costs, and linear epsilon-insensitive support vector regression.
//!
//! Conventions:
//! - theta has n+1 entries; `theta[0]` is the intercept and is never penalized.
//! - Gradient updates carry the 1/m factor and update all components
//!   simultaneously.
//! - The normal equation uses the pseudo-inverse, so rank-deficient feature
//!   matrices still yield (minimum-norm) solutions.
//! - Gradient descent and SVR expect standardized features; `Model::train`
//!   handles the standardization and maps predictions back to original
//!   target units.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{solve_sym_pinv, Mat};

/// Design matrix (m examples x n features) with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Degenerate("dataset needs at least one example".into()));
        }
        let n = x[0].len();
        if x.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch("ragged feature rows".into()));
        }
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} targets for {} examples",
                y.len(),
                x.len()
            )));
        }
        if feature_names.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} feature names for {} features",
                feature_names.len(),
                n
            )));
        }
        Ok(Dataset { x, y, feature_names })
    }

    pub fn from_matrix(matrix: &FeatureMatrix) -> Result<Dataset> {
        let y = matrix
            .targets
            .clone()
            .ok_or_else(|| Error::Degenerate("feature matrix carries no targets".into()))?;
        Dataset::new(matrix.rows.clone(), y, matrix.column_names.clone())
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn n(&self) -> usize {
        self.x[0].len()
    }
}

/// `theta[0]` = intercept, `theta[1..]` = feature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub theta: Vec<f64>,
}

impl Parameters {
    pub fn zeros(n_features: usize) -> Self {
        Parameters { theta: vec![0.0; n_features + 1] }
    }
}

/// Intercept plus dot product.
pub fn predict_linear(theta: &Parameters, x: &[f64]) -> Result<f64> {
    if theta.theta.len() != x.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, feature row has {}",
            theta.theta.len(),
            x.len()
        )));
    }
    Ok(theta.theta[0] + theta.theta[1..].iter().zip(x).map(|(t, v)| t * v).sum::<f64>())
}

/// J = (1/2m) sum (h - y)^2 + (lambda/2m) sum_{j>=1} theta_j^2.
pub fn cost_linear(theta: &Parameters, data: &Dataset, lambda: f64) -> f64 {
    let m = data.m() as f64;
    let sse: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, &y)| {
            let h = predict_linear(theta, x).expect("dataset rows match theta");
            (h - y) * (h - y)
        })
        .sum();
    let penalty: f64 = theta.theta[1..].iter().map(|t| t * t).sum();
    sse / (2.0 * m) + lambda * penalty / (2.0 * m)
}

/// Per-feature z-score statistics learned on training data. Constant
/// features are flagged and passed through unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Standardizer {
        let m = x.len() as f64;
        let n = if x.is_empty() { 0 } else { x[0].len() };
        let mut means = vec![0.0; n];
        for row in x {
            for (mu, v) in means.iter_mut().zip(row) {
                *mu += v;
            }
        }
        for mu in &mut means {
            *mu /= m;
        }
        let mut vars = vec![0.0; n];
        for row in x {
            for ((var, v), mu) in vars.iter_mut().zip(row).zip(&means) {
                *var += (v - mu) * (v - mu);
            }
        }
        let mut stds = Vec::with_capacity(n);
        let mut constant = Vec::with_capacity(n);
        for var in vars {
            let sd = (var / m).sqrt();
            if sd > 0.0 {
                stds.push(sd);
                constant.push(false);
            } else {
                stds.push(1.0);
                constant.push(true);
            }
        }
        Standardizer { means, stds, constant }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    v
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Training method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MultiregNormal,
    MultiregGd,
    SvrLinear,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MultiregNormal => "multireg_normal",
            Method::MultiregGd => "multireg_gd",
            Method::SvrLinear => "svr_linear",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "multireg_normal" | "multireg" => Some(Method::MultiregNormal),
            "multireg_gd" => Some(Method::MultiregGd),
            "svr_linear" | "svr" => Some(Method::SvrLinear),
            _ => None,
        }
    }
}

/// Hyperparameters for the iterative trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    /// Gradient descent learning rate.
    pub alpha: f64,
    /// L2 penalty weight (bias exempt).
    pub lambda: f64,
    /// SVR loss weight.
    pub c: f64,
    /// SVR insensitive-tube half width, in standardized target units.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative cost-change stopping threshold.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::MultiregNormal,
            alpha: 0.1,
            lambda: 0.0,
            c: 1.0,
            epsilon: 0.1,
            max_iters: 50_000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Cost per iteration recorded by the iterative trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct GdTrace {
    pub costs: Vec<f64>,
    pub iterations: usize,
}

fn descend(
    data: &Dataset,
    config: &TrainConfig,
    hypothesis: impl Fn(&Parameters, &[f64]) -> f64,
    cost: impl Fn(&Parameters) -> f64,
) -> Result<(Parameters, GdTrace)> {
    config.validate()?;
    let m = data.m() as f64;
    let n = data.n();
    let mut theta = Parameters::zeros(n);
    let mut costs = vec![cost(&theta)];
    let mut grad = vec![0.0; n + 1];
    let mut rising = 0usize;

    for iter in 1..=config.max_iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in data.x.iter().zip(&data.y) {
            let err = hypothesis(&theta, x) - y;
            grad[0] += err;
            for (g, v) in grad[1..].iter_mut().zip(x) {
                *g += err * v;
            }
        }
        // Simultaneous update; the penalty term shrinks every non-bias
        // weight by (1 - alpha*lambda/m) before the data step.
        theta.theta[0] -= config.alpha * grad[0] / m;
        let shrink = 1.0 - config.alpha * config.lambda / m;
        for (t, g) in theta.theta[1..].iter_mut().zip(&grad[1..]) {
            *t = *t * shrink - config.alpha * g / m;
        }

        let j = cost(&theta);
        let prev = *costs.last().unwrap();
        costs.push(j);
        if !j.is_finite() || j > prev {
            rising += 1;
            if rising >= 10 || !j.is_finite() {
                return Err(Error::Diverged { iterations: iter, cost_trace: costs });
            }
        } else {
            rising = 0;
            let rel = (prev - j) / prev.abs().max(f64::MIN_POSITIVE);
            if rel < config.tol {
                return Ok((theta, GdTrace { costs, iterations: iter }));
            }
        }
    }
    let iterations = config.max_iters;
    Ok((theta, GdTrace { costs, iterations }))
}

/// Batch gradient descent for linear regression. Standardized features are
/// strongly recommended; convergence is by relative cost change.
pub fn gradient_descent_linear(
    data: &Dataset,
    config: &TrainConfig,
) -> Result<(Parameters, GdTrace)> {
    descend(
        data,
        config,
        |theta, x| predict_linear(theta, x).expect("row widths fixed"),
        |theta| cost_linear(theta, data, config.lambda),
    )
}

/// theta = (X^T X + lambda D)^+ X^T y, with D the identity minus the
/// intercept entry; lambda = 0 is the plain normal equation. Total via the
/// pseudo-inverse: rank deficiency yields the minimum-norm solution.
pub fn normal_equation(data: &Dataset, lambda: f64) -> Parameters {
    let m = data.m();
    let n = data.n();
    let mut rows = Vec::with_capacity(m);
    for x in &data.x {
        let mut row = Vec::with_capacity(n + 1);
        row.push(1.0);
        row.extend_from_slice(x);
        rows.push(row);
    }
    let design = Mat::from_rows(&rows);
    let mut gram = design.gram();
    for j in 1..=n {
        let idx = j * (n + 1) + j;
        gram.data[idx] += lambda;
    }
    let rhs = design.t_mul_vec(&data.y);
    Parameters { theta: solve_sym_pinv(&gram, &rhs) }
}

/// Logistic sigmoid g(z) = 1 / (1 + e^-z).
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

const LOG_CLAMP: f64 = 1e-12;

/// Cross-entropy cost with the ridge penalty; hypotheses are clamped away
/// from 0 and 1 before the logs.
pub fn cost_logistic(theta: &Parameters, data: &Dataset, lambda: f64) -> f64 {
    let m = data.m() as f64;
    let mut s = 0.0;
    for (x, &y) in data.x.iter().zip(&data.y) {
        let h = sigmoid(predict_linear(theta, x).expect("row widths fixed"))
            .clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        s += -y * h.ln() - (1.0 - y) * (1.0 - h).ln();
    }
    let penalty: f64 = theta.theta[1..].iter().map(|t| t * t).sum();
    s / m + lambda * penalty / (2.0 * m)
}

/// Gradient descent for logistic regression; the update rule is structurally
/// identical to the linear one with the sigmoid hypothesis.
pub fn gradient_descent_logistic(
    data: &Dataset,
    config: &TrainConfig,
) -> Result<(Parameters, GdTrace)> {
    if data.y.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidParameter("logistic targets must be 0 or 1".into()));
    }
    descend(
        data,
        config,
        |theta, x| sigmoid(predict_linear(theta, x).expect("row widths fixed")),
        |theta| cost_logistic(theta, data, config.lambda),
    )
}

/// SVM hinge pair: cost_0(z) = max(0, k(1+z)), cost_1(z) = max(0, k(1-z)).
pub fn hinge_costs(z: f64, k: f64) -> (f64, f64) {
    ((k * (1.0 + z)).max(0.0), (k * (1.0 - z)).max(0.0))
}

/// Epsilon-insensitive SVR objective on a (standardized) dataset:
/// C * sum_i max(0, |theta^T x_i - y_i| - epsilon) + 1/2 sum_{j>=1} theta_j^2,
/// evaluated divided by m (same minimizer, better-scaled steps).
pub fn svr_objective(theta: &Parameters, data: &Dataset, c: f64, epsilon: f64) -> f64 {
    let m = data.m() as f64;
    let mut loss = 0.0;
    for (x, &y) in data.x.iter().zip(&data.y) {
        let r = predict_linear(theta, x).expect("row widths fixed") - y;
        loss += (r.abs() - epsilon).max(0.0);
    }
    let ridge: f64 = theta.theta[1..].iter().map(|t| t * t).sum();
    (c * loss + 0.5 * ridge) / m
}

/// Linear epsilon-insensitive SVR by deterministic subgradient descent.
///
/// Full-batch subgradient steps on the piecewise-smooth objective with a
/// stage-halved step size: each stage runs a fixed number of iterations at a
/// constant step, keeps the best iterate seen, then halves the step. The
/// schedule depends only on the config, so training is reproducible.
/// Features and targets must be standardized by the caller.
pub fn train_svr_linear(data: &Dataset, config: &TrainConfig) -> Result<Parameters> {
    config.validate()?;
    let m = data.m() as f64;
    let n = data.n();
    let mut theta = Parameters::zeros(n);
    let mut best = theta.clone();
    let mut best_obj = svr_objective(&theta, data, config.c, config.epsilon);

    let stages = 40usize;
    let per_stage = (config.max_iters / stages).max(25);

    // First subgradient sets the step scale.
    let g0 = svr_subgradient(&theta, data, config.c, config.epsilon);
    let g0_norm = g0.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut step = 1.0 / g0_norm.max(1.0);

    for _stage in 0..stages {
        for _ in 0..per_stage {
            let g = svr_subgradient(&theta, data, config.c, config.epsilon);
            for (t, gi) in theta.theta.iter_mut().zip(&g) {
                *t -= step * gi / m;
            }
            let obj = svr_objective(&theta, data, config.c, config.epsilon);
            if !obj.is_finite() {
                return Err(Error::Diverged {
                    iterations: 0,
                    cost_trace: vec![best_obj, obj],
                });
            }
            if obj < best_obj {
                best_obj = obj;
                best.theta.copy_from_slice(&theta.theta);
            }
        }
        // Restart each stage from the best point found so far.
        theta.theta.copy_from_slice(&best.theta);
        step *= 0.5;
    }
    Ok(best)
}

/// Unscaled subgradient of the SVR objective (callers divide by m).
fn svr_subgradient(theta: &Parameters, data: &Dataset, c: f64, epsilon: f64) -> Vec<f64> {
    let n = data.n();
    let mut g = vec![0.0; n + 1];
    for (x, &y) in data.x.iter().zip(&data.y) {
        let r = predict_linear(theta, x).expect("row widths fixed") - y;
        if r.abs() > epsilon {
            let s = c * r.signum();
            g[0] += s;
            for (gj, v) in g[1..].iter_mut().zip(x) {
                *gj += s * v;
            }
        }
    }
    for (gj, t) in g[1..].iter_mut().zip(&theta.theta[1..]) {
        *gj += t;
    }
    g
}

/// A trained model: method, hyperparameters, feature layout, train-set
/// standardization statistics and coefficients. Predictions are always in
/// original target units.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub method: Method,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    /// Present for the standardized trainers (gradient descent, SVR).
    pub standardizer: Option<Standardizer>,
    /// (mean, std) of the training targets; present for SVR.
    pub target_stats: Option<(f64, f64)>,
    pub params: Parameters,
}

impl Model {
    /// Fit on a training dataset according to `config.method`.
    pub fn train(data: &Dataset, config: &TrainConfig) -> Result<Model> {
        config.validate()?;
        match config.method {
            Method::MultiregNormal => {
                let params = normal_equation(data, config.lambda);
                Ok(Model {
                    method: config.method,
                    config: config.clone(),
                    feature_names: data.feature_names.clone(),
                    standardizer: None,
                    target_stats: None,
                    params,
                })
            }
            Method::MultiregGd => {
                let std = Standardizer::fit(&data.x);
                let scaled =
                    Dataset::new(std.transform(&data.x), data.y.clone(), data.feature_names.clone())?;
                let (params, _) = gradient_descent_linear(&scaled, config)?;
                Ok(Model {
                    method: config.method,
                    config: config.clone(),
                    feature_names: data.feature_names.clone(),
                    standardizer: Some(std),
                    target_stats: None,
                    params,
                })
            }
            Method::SvrLinear => {
                let std = Standardizer::fit(&data.x);
                let y_mean = data.y.iter().sum::<f64>() / data.m() as f64;
                let y_var =
                    data.y.iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / data.m() as f64;
                let y_std = if y_var > 0.0 { y_var.sqrt() } else { 1.0 };
                let scaled_y: Vec<f64> = data.y.iter().map(|y| (y - y_mean) / y_std).collect();
                let scaled =
                    Dataset::new(std.transform(&data.x), scaled_y, data.feature_names.clone())?;
                let params = train_svr_linear(&scaled, config)?;
                Ok(Model {
                    method: config.method,
                    config: config.clone(),
                    feature_names: data.feature_names.clone(),
                    standardizer: Some(std),
                    target_stats: Some((y_mean, y_std)),
                    params,
                })
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let raw = match &self.standardizer {
            Some(std) => predict_linear(&self.params, &std.transform_row(x))?,
            None => predict_linear(&self.params, x)?,
        };
        Ok(match self.target_stats {
            Some((mean, sd)) => raw * sd + mean,
            None => raw,
        })
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Text serialization; numbers carry 17 significant digits so reading the
    /// file back reproduces the model exactly.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let fmt = |v: f64| format!("{v:.16e}");
        let join = |vs: &[f64]| vs.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        out.push_str(&format!("method: {}\n", self.method.name()));
        out.push_str(&format!("alpha: {}\n", fmt(self.config.alpha)));
        out.push_str(&format!("lambda: {}\n", fmt(self.config.lambda)));
        out.push_str(&format!("c: {}\n", fmt(self.config.c)));
        out.push_str(&format!("epsilon: {}\n", fmt(self.config.epsilon)));
        out.push_str(&format!("max_iters: {}\n", self.config.max_iters));
        out.push_str(&format!("tol: {}\n", fmt(self.config.tol)));
        out.push_str(&format!("seed: {}\n", self.config.seed));
        out.push_str(&format!("features: {}\n", self.feature_names.join(",")));
        match &self.standardizer {
            Some(s) => {
                out.push_str(&format!("standardizer_means: {}\n", join(&s.means)));
                out.push_str(&format!("standardizer_stds: {}\n", join(&s.stds)));
                let flags: Vec<&str> =
                    s.constant.iter().map(|&c| if c { "1" } else { "0" }).collect();
                out.push_str(&format!("standardizer_constant: {}\n", flags.join(" ")));
            }
            None => out.push_str("standardizer_means: none\n"),
        }
        match self.target_stats {
            Some((mean, sd)) => {
                out.push_str(&format!("target_mean: {}\n", fmt(mean)));
                out.push_str(&format!("target_std: {}\n", fmt(sd)));
            }
            None => out.push_str("target_mean: none\n"),
        }
        out.push_str(&format!("theta: {}\n", join(&self.params.theta)));
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut kv = std::collections::HashMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(':') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| -> Result<String> {
            kv.get(k).cloned().ok_or_else(|| Error::Io(format!("model file misses key {k}")))
        };
        let pf = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Io(format!("bad number {s:?}")))
        };
        let pvec = |s: &str| -> Result<Vec<f64>> {
            s.split_whitespace().map(pf).collect()
        };
        let method_name = get("method")?;
        let method = Method::parse(&method_name)
            .ok_or_else(|| Error::Io(format!("unknown method {method_name}")))?;
        let config = TrainConfig {
            method,
            alpha: pf(&get("alpha")?)?,
            lambda: pf(&get("lambda")?)?,
            c: pf(&get("c")?)?,
            epsilon: pf(&get("epsilon")?)?,
            max_iters: get("max_iters")?
                .parse()
                .map_err(|_| Error::Io("bad max_iters".into()))?,
            tol: pf(&get("tol")?)?,
            seed: get("seed")?.parse().map_err(|_| Error::Io("bad seed".into()))?,
        };
        let features_field = get("features")?;
        let feature_names: Vec<String> = if features_field.is_empty() {
            Vec::new()
        } else {
            features_field.split(',').map(str::to_string).collect()
        };
        let standardizer = if get("standardizer_means")? == "none" {
            None
        } else {
            Some(Standardizer {
                means: pvec(&get("standardizer_means")?)?,
                stds: pvec(&get("standardizer_stds")?)?,
                constant: get("standardizer_constant")?
                    .split_whitespace()
                    .map(|s| s == "1")
                    .collect(),
            })
        };
        let target_stats = if get("target_mean")? == "none" {
            None
        } else {
            Some((pf(&get("target_mean")?)?, pf(&get("target_std")?)?))
        };
        Ok(Model {
            method,
            config,
            feature_names,
            standardizer,
            target_stats,
            params: Parameters { theta: pvec(&get("theta")?)? },
        })
    }
}
