//! Repeated-split evaluation protocol and the statistics behind it.
//!
//! The protocol: split the cohort 80/20 at random, fit every train-derived
//! statistic (IMF limits, standardizers) on the train side only, train,
//! predict the test side, record the RMSE; repeat (50 iterations by
//! default). The same master seed produces the same splits for every feature
//! group and method, so RMSE distributions are paired and comparable with
//! the Wilcoxon signed-rank test under a Holm-Bonferroni family correction.

use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{histogram, HistogramSpec};
use crate::learn::{Dataset, Method, Model, TrainConfig};
use crate::minkowski::MfComponent;
use crate::rng::Rng;

/// Root-mean-square error over a test set, in target units.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Degenerate("rmse of empty vectors".into()));
    }
    let mse: f64 =
        pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Degenerate("pearson_r needs at least 2 samples".into()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::Degenerate("pearson_r with zero-variance input".into()));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Deterministic 80/20 split schedule for an m-specimen cohort. The same
/// master seed yields identical splits no matter which feature group or
/// method consumes them (the pairing guarantee).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub master_seed: u64,
    pub iterations: usize,
    pub specimens: usize,
    pub train_fraction: f64,
}

impl SplitPlan {
    pub fn new(master_seed: u64, iterations: usize, specimens: usize) -> Result<SplitPlan> {
        if specimens < 2 {
            return Err(Error::Degenerate(format!(
                "cannot split {specimens} specimens into train and test"
            )));
        }
        if iterations == 0 {
            return Err(Error::InvalidParameter("iteration count must be >= 1".into()));
        }
        Ok(SplitPlan { master_seed, iterations, specimens, train_fraction: 0.8 })
    }

    pub fn train_size(&self) -> usize {
        let rounded = (self.train_fraction * self.specimens as f64).round() as usize;
        rounded.clamp(1, self.specimens - 1)
    }

    /// (train indices, test indices) of one iteration; together they
    /// partition 0..specimens.
    pub fn split(&self, iteration: usize) -> (Vec<usize>, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.specimens).collect();
        let mut rng = Rng::for_stream(self.master_seed, iteration as u64);
        rng.shuffle(&mut order);
        let cut = self.train_size();
        let test = order.split_off(cut);
        (order, test)
    }
}

// ---------------------------------------------------------------------------
// Feature groups with train-dependent materialization
// ---------------------------------------------------------------------------

/// Where a block of feature values comes from when the protocol materializes
/// a group for one split.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockSource {
    /// Values known up front (DXA scalar, fixed-range AMF histograms).
    Fixed { name: String, per_specimen: Vec<Vec<f64>> },
    /// Raw local-MF column values per specimen; binned per split with
    /// limits from the training specimens only.
    ImfHistogram {
        component: MfComponent,
        bin_count: usize,
        per_specimen_values: Vec<Vec<f64>>,
    },
}

impl BlockSource {
    fn specimens(&self) -> usize {
        match self {
            BlockSource::Fixed { per_specimen, .. } => per_specimen.len(),
            BlockSource::ImfHistogram { per_specimen_values, .. } => per_specimen_values.len(),
        }
    }
}

/// A named feature group: the unit compared in the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub id: String,
    pub sources: Vec<BlockSource>,
}

/// Feature rows for every specimen under one split's training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedGroup {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// IMF limits fitted on the train side, when the group has IMF blocks.
    pub imf_limits: Vec<(MfComponent, (f64, f64))>,
}

impl FeatureGroup {
    pub fn specimens(&self) -> Result<usize> {
        let mut n = None;
        for s in &self.sources {
            let sn = s.specimens();
            match n {
                None => n = Some(sn),
                Some(prev) if prev != sn => {
                    return Err(Error::DimensionMismatch(format!(
                        "group {}: blocks disagree on specimen count ({prev} vs {sn})",
                        self.id
                    )))
                }
                _ => {}
            }
        }
        n.ok_or_else(|| Error::InvalidParameter(format!("group {} has no blocks", self.id)))
    }

    /// Build feature rows for all specimens; every train-derived statistic
    /// comes from `train_idx` only.
    pub fn materialize(&self, train_idx: &[usize]) -> Result<MaterializedGroup> {
        let n = self.specimens()?;
        let mut column_names = Vec::new();
        let mut rows = vec![Vec::new(); n];
        let mut imf_limits = Vec::new();

        for source in &self.sources {
            match source {
                BlockSource::Fixed { name, per_specimen } => {
                    let width = per_specimen.first().map(|v| v.len()).unwrap_or(0);
                    if per_specimen.iter().any(|v| v.len() != width) {
                        return Err(Error::DimensionMismatch(format!(
                            "group {}: fixed block {name} is ragged",
                            self.id
                        )));
                    }
                    if width == 1 {
                        column_names.push(name.clone());
                    } else {
                        for b in 0..width {
                            column_names.push(format!("{name}.b{b}"));
                        }
                    }
                    for (row, vals) in rows.iter_mut().zip(per_specimen) {
                        row.extend_from_slice(vals);
                    }
                }
                BlockSource::ImfHistogram { component, bin_count, per_specimen_values } => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for &t in train_idx {
                        for &v in &per_specimen_values[t] {
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    if !lo.is_finite() || !hi.is_finite() {
                        return Err(Error::Degenerate(format!(
                            "group {}: no training values to set IMF limits for {}",
                            self.id,
                            component.name()
                        )));
                    }
                    imf_limits.push((*component, (lo, hi)));
                    for b in 0..*bin_count {
                        column_names.push(format!("IMF.{}.b{b}", component.name()));
                    }
                    let spec = if lo < hi {
                        Some(HistogramSpec::new(*bin_count, lo, hi)?)
                    } else {
                        None
                    };
                    for (row, vals) in rows.iter_mut().zip(per_specimen_values) {
                        match &spec {
                            Some(spec) => row.extend(histogram(vals, spec)),
                            None => {
                                // Degenerate limits: all mass in the first bin.
                                let mut h = vec![0.0; *bin_count];
                                if !vals.is_empty() {
                                    h[0] = 1.0;
                                }
                                row.extend(h);
                            }
                        }
                    }
                }
            }
        }
        Ok(MaterializedGroup { column_names, rows, imf_limits })
    }

    /// Convenience for the IMF limits a given split would fit (used by
    /// leakage checks and diagnostics).
    pub fn train_limits(&self, train_idx: &[usize]) -> Result<Vec<(MfComponent, (f64, f64))>> {
        Ok(self.materialize(train_idx)?.imf_limits)
    }
}

/// The RMSE values of one (group, method) pair across all iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseDistribution {
    pub group: String,
    pub method: Method,
    pub values: Vec<f64>,
}

impl RmseDistribution {
    pub fn label(&self) -> String {
        format!("{}:{}", self.group, self.method.name())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation of the per-iteration values.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let n = self.values.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        (self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    pub fn quartiles(&self) -> (f64, f64, f64) {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75))
    }
}

/// Linear-interpolation quantile of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Fit one iteration of one group: materialize with train-only statistics,
/// train the model, predict the held-out specimens.
pub fn fit_iteration(
    group: &FeatureGroup,
    targets: &[f64],
    train_idx: &[usize],
    test_idx: &[usize],
    method: Method,
    base_config: &TrainConfig,
) -> Result<(Model, Vec<f64>, Vec<f64>)> {
    let mat = group.materialize(train_idx)?;
    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| mat.rows[i].clone()).collect();
    let train_y: Vec<f64> = train_idx.iter().map(|&i| targets[i]).collect();
    let data = Dataset::new(train_x, train_y, mat.column_names.clone())?;
    let config = TrainConfig { method, ..base_config.clone() };
    let model = Model::train(&data, &config)?;
    let preds: Vec<f64> = test_idx
        .iter()
        .map(|&i| model.predict(&mat.rows[i]))
        .collect::<Result<_>>()?;
    let truths: Vec<f64> = test_idx.iter().map(|&i| targets[i]).collect();
    Ok((model, preds, truths))
}

/// Run the full repeated-split protocol for every group and method. Splits
/// are shared across groups and methods (paired design); iterations execute
/// in parallel but the output ordering and values are deterministic.
pub fn run_protocol(
    groups: &[FeatureGroup],
    targets: &[f64],
    methods: &[Method],
    plan: &SplitPlan,
    base_config: &TrainConfig,
) -> Result<Vec<RmseDistribution>> {
    if groups.is_empty() || methods.is_empty() {
        return Err(Error::InvalidParameter("need at least one group and one method".into()));
    }
    for g in groups {
        let n = g.specimens()?;
        if n != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "group {} covers {n} specimens, targets cover {}",
                g.id,
                targets.len()
            )));
        }
    }
    if plan.specimens != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "split plan is for {} specimens, targets cover {}",
            plan.specimens,
            targets.len()
        )));
    }

    // iteration-major results: per_iter[i][(group, method)] = rmse
    let per_iter: Vec<Vec<f64>> = (0..plan.iterations)
        .into_par_iter()
        .map(|iter| {
            let (train_idx, test_idx) = plan.split(iter);
            let mut row = Vec::with_capacity(groups.len() * methods.len());
            for group in groups {
                for &method in methods {
                    let (_, preds, truths) =
                        fit_iteration(group, targets, &train_idx, &test_idx, method, base_config)?;
                    row.push(rmse(&preds, &truths)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(groups.len() * methods.len());
    for (gi, group) in groups.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            let col = gi * methods.len() + mi;
            out.push(RmseDistribution {
                group: group.id.clone(),
                method,
                values: per_iter.iter().map(|row| row[col]).collect(),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test and Holm-Bonferroni correction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    pub p_value: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    /// True when the exact enumeration path produced the p-value.
    pub exact: bool,
    /// True when every difference was zero (p = 1 by convention).
    pub all_zero: bool,
}

/// Largest effective n that still uses exact null enumeration.
pub const WILCOXON_EXACT_MAX_N: usize = 12;

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped (Wilcoxon's original convention), tied absolute differences
/// get averaged ranks. Exact enumeration of the null distribution up to
/// n = 12, normal approximation with continuity correction beyond.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            w_plus: 0.0,
            w_minus: 0.0,
            n_effective: 0,
            exact: true,
            all_zero: true,
        });
    }
    let n = diffs.len();
    let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    let w = w_plus.min(w_minus);

    let (p_value, exact) = if n <= WILCOXON_EXACT_MAX_N {
        (exact_two_sided_p(&ranks, w), true)
    } else {
        (normal_two_sided_p(&ranks, w), false)
    };
    Ok(WilcoxonResult {
        p_value: p_value.min(1.0),
        w_plus,
        w_minus,
        n_effective: n,
        exact,
        all_zero: false,
    })
}

/// Ranks of values (1-based), ties replaced by their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos;
        while end + 1 < n && values[order[end + 1]] == values[order[pos]] {
            end += 1;
        }
        let avg = (pos + end) as f64 / 2.0 + 1.0;
        for &idx in &order[pos..=end] {
            ranks[idx] = avg;
        }
        pos = end + 1;
    }
    ranks
}

/// Exact two-sided p: enumerate the null distribution of the signed-rank sum
/// over all 2^n sign assignments of the observed ranks (dynamic program on
/// doubled ranks, which are integers even with averaged ties).
fn exact_two_sided_p(ranks: &[f64], w_obs: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &dr in &doubled {
        reach += dr;
        for s in (0..=reach).rev() {
            if s >= dr && counts[s - dr] > 0.0 {
                counts[s] += counts[s - dr];
            }
        }
    }
    let patterns = 2f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w_obs).round() as usize;
    let tail: f64 = counts[..=w2.min(total)].iter().sum();
    (2.0 * tail / patterns).min(1.0)
}

/// Normal approximation with continuity correction and tie-corrected
/// variance, applied to W = min(W+, W-).
fn normal_two_sided_p(ranks: &[f64], w_obs: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    // Tie correction: subtract sum(t^3 - t)/48 per tie group.
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        if t > 1.0 {
            var -= (t * t * t - t) / 48.0;
        }
        i = j + 1;
    }
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_obs - mean + 0.5) / var.sqrt();
    (2.0 * normal_cdf(z)).min(1.0)
}

/// Standard normal CDF via the Abramowitz-Stegun erf approximation
/// (absolute error below 1.5e-7, ample for p-value work).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Step-down Holm-Bonferroni: sort p ascending, reject p_(k) while
/// p_(k) <= alpha / (m - k + 1), stop at the first failure. Returns
/// per-hypothesis decisions in the original order.
pub fn holm_bonferroni(pvals: &[f64], alpha: f64) -> Vec<bool> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].partial_cmp(&pvals[j]).unwrap());
    let mut reject = vec![false; m];
    for (k, &idx) in order.iter().enumerate() {
        if pvals[idx] <= alpha / (m - k) as f64 {
            reject[idx] = true;
        } else {
            break;
        }
    }
    reject
}

/// One pairwise comparison of RMSE distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub a: String,
    pub b: String,
    pub p_raw: f64,
    pub reject: bool,
}

/// Compare every non-baseline distribution against the baseline, Wilcoxon
/// p-values corrected as one Holm family at level `alpha`.
pub fn compare_to_baseline(
    distributions: &[RmseDistribution],
    baseline_label: &str,
    alpha: f64,
) -> Result<Vec<ComparisonRow>> {
    let baseline = distributions
        .iter()
        .find(|d| d.label() == baseline_label || d.group == baseline_label)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("baseline {baseline_label} not among distributions"))
        })?;
    let others: Vec<&RmseDistribution> = distributions
        .iter()
        .filter(|d| d.label() != baseline.label())
        .collect();
    if others.is_empty() {
        return Err(Error::Degenerate("nothing to compare against the baseline".into()));
    }
    let pvals: Vec<f64> = others
        .iter()
        .map(|d| Ok(wilcoxon_signed_rank(&d.values, &baseline.values)?.p_value))
        .collect::<Result<_>>()?;
    let rejects = holm_bonferroni(&pvals, alpha);
    Ok(others
        .iter()
        .zip(pvals.iter().zip(rejects))
        .map(|(d, (&p, reject))| ComparisonRow {
            a: d.label(),
            b: baseline.label(),
            p_raw: p,
            reject,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Result files
// ---------------------------------------------------------------------------

/// `group,method,iteration,rmse` rows for every distribution.
pub fn write_results_csv(distributions: &[RmseDistribution], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "group,method,iteration,rmse")?;
    for d in distributions {
        for (iter, v) in d.values.iter().enumerate() {
            writeln!(f, "{},{},{},{}", d.group, d.method.name(), iter, v)?;
        }
    }
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<RmseDistribution>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut dists: Vec<RmseDistribution> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Io(format!("line {}: expected 4 fields", n + 1)));
        }
        let method = Method::parse(fields[1])
            .ok_or_else(|| Error::Io(format!("line {}: unknown method {}", n + 1, fields[1])))?;
        let value: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::Io(format!("line {}: bad rmse {}", n + 1, fields[3])))?;
        match dists.iter_mut().find(|d| d.group == fields[0] && d.method == method) {
            Some(d) => d.values.push(value),
            None => dists.push(RmseDistribution {
                group: fields[0].to_string(),
                method,
                values: vec![value],
            }),
        }
    }
    if dists.is_empty() {
        return Err(Error::Io("results CSV holds no rows".into()));
    }
    Ok(dists)
}

/// `group_a,group_b,p_raw,reject_at_0.05_holm` rows.
pub fn write_comparisons_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "group_a,group_b,p_raw,reject_at_0.05_holm")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.a, r.b, r.p_raw, u8::from(r.reject))?;
    }
    Ok(())
}

/// Box-plot content per distribution: median and quartiles.
pub fn write_plot_data_csv(distributions: &[RmseDistribution], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "group,method,q25,median,q75,mean,std")?;
    for d in distributions {
        let (q25, median, q75) = d.quartiles();
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            d.group,
            d.method.name(),
            q25,
            median,
            q75,
            d.mean(),
            d.std()
        )?;
    }
    Ok(())
}
