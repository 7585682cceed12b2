//! Final-model evaluation with nested cross-validation, selection-quality
//! measures (Jaccard overlap, Bhattacharyya distance, t-SNE embeddings) and
//! two-sample t-tests on fold scores.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::wrapper::{fold_accuracies_on, predict, train_rbf_classifier_scaled, HyperGrid, SvmParams};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    /// Positive class is label 1 (pain).
    pub fn from_predictions(truth: &[u8], pred: &[u8]) -> Self {
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(pred) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (1, _) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy, precision, recall and F1; zero denominators give 0.
pub fn classification_metrics(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<Metrics> {
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(Error::Argument("confusion counts are all zero".into()));
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        accuracy: ratio(tp + tn, total),
        precision,
        recall,
        f1,
    })
}

/// Mean and population standard deviation across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NestedCvConfig {
    pub outer_k: usize,
    pub inner_k: usize,
    pub grid: HyperGrid,
    pub seed: u64,
}

impl Default for NestedCvConfig {
    fn default() -> Self {
        Self {
            outer_k: 10,
            inner_k: 10,
            grid: HyperGrid::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub params: SvmParams,
    /// Best inner-CV mean accuracy, the one that chose `params`.
    pub inner_accuracy: f64,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub test_samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub subset: Vec<usize>,
    pub seed: u64,
    pub outer_k: usize,
    pub inner_k: usize,
    pub folds: Vec<FoldResult>,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub inner_mean: f64,
    pub inner_std: f64,
    /// Metrics recomputed from the confusion counts summed over folds.
    pub pooled: Metrics,
    pub confusion: Confusion,
}

impl EvaluationReport {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.metrics.accuracy).collect()
    }

    /// One row per outer fold, then `mean` and `std` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        w.write_record(["fold", "accuracy", "precision", "recall", "f1", "c", "gamma_factor", "inner_accuracy"])?;
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                format!("{:?}", f.metrics.accuracy),
                format!("{:?}", f.metrics.precision),
                format!("{:?}", f.metrics.recall),
                format!("{:?}", f.metrics.f1),
                format!("{:?}", f.params.c),
                format!("{:?}", f.params.gamma_factor),
                format!("{:?}", f.inner_accuracy),
            ])?;
        }
        let summaries = [self.accuracy, self.precision, self.recall, self.f1];
        for (label, pick) in [("mean", 0), ("std", 1)] {
            let mut row = vec![label.to_string()];
            row.extend(summaries.iter().map(|s| format!("{:?}", if pick == 0 { s.mean } else { s.std })));
            row.extend([String::new(), String::new()]);
            row.push(format!("{:?}", if pick == 0 { self.inner_mean } else { self.inner_std }));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nested cross-validation of one feature subset.
///
/// The outer plan comes from `cfg.seed`; each outer fold's inner plan is
/// drawn on the training split alone, so test rows never reach the grid
/// search or the standardization statistics.
pub fn nested_cv(ds: &Dataset, subset: &[usize], cfg: &NestedCvConfig) -> Result<EvaluationReport> {
    if cfg.outer_k < 2 || cfg.inner_k < 2 {
        return Err(Error::Argument(format!(
            "fold counts must be at least 2 (outer {}, inner {})",
            cfg.outer_k, cfg.inner_k
        )));
    }
    if subset.is_empty() {
        return Err(Error::Argument("cannot evaluate an empty feature subset".into()));
    }
    let candidates = cfg.grid.candidates();
    if candidates.is_empty() {
        return Err(Error::Argument("hyperparameter grid is empty".into()));
    }
    let x = ds.select(subset)?;
    let y = ds.y();
    let outer = stratified_folds(y, cfg.outer_k, cfg.seed)?;

    let folds: Vec<FoldResult> = (0..outer.k)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = outer.split(fold);
            let x_train = x.select(Axis(0), &train);
            let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let inner = stratified_folds(&y_train, cfg.inner_k, crate::derive_seed(cfg.seed, &[fold as u64]))?;
            let inner_scores: Vec<f64> = candidates
                .par_iter()
                .map(|p| {
                    let accs = fold_accuracies_on(x_train.view(), &y_train, &inner, p)?;
                    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
                })
                .collect::<Result<_>>()?;
            let mut best = 0;
            for (i, &s) in inner_scores.iter().enumerate() {
                if s > inner_scores[best] {
                    best = i;
                }
            }
            let params = candidates[best];
            let model = train_rbf_classifier_scaled(x_train.view(), &y_train, params.c, params.gamma_factor)?;
            let x_test = x.select(Axis(0), &test);
            let y_test: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let pred = predict(&model, x_test.view())?;
            let confusion = Confusion::from_predictions(&y_test, &pred);
            Ok(FoldResult {
                fold,
                params,
                inner_accuracy: inner_scores[best],
                confusion,
                metrics: classification_metrics(confusion.tp, confusion.fp, confusion.fn_, confusion.tn)?,
                test_samples: test.iter().map(|&i| ds.sample_ids()[i].clone()).collect(),
            })
        })
        .collect::<Result<_>>()?;

    let collect = |f: fn(&Metrics) -> f64| Summary::of(&folds.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
    let inner = Summary::of(&folds.iter().map(|r| r.inner_accuracy).collect::<Vec<_>>());
    let mut confusion = Confusion::default();
    for f in &folds {
        confusion.add(&f.confusion);
    }
    Ok(EvaluationReport {
        subset: subset.to_vec(),
        seed: cfg.seed,
        outer_k: cfg.outer_k,
        inner_k: cfg.inner_k,
        accuracy: collect(|m| m.accuracy),
        precision: collect(|m| m.precision),
        recall: collect(|m| m.recall),
        f1: collect(|m| m.f1),
        inner_mean: inner.mean,
        inner_std: inner.std,
        pooled: classification_metrics(confusion.tp, confusion.fp, confusion.fn_, confusion.tn)?,
        confusion,
        folds,
    })
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets scoring 1.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<usize> = a.iter().copied().collect();
    let b: BTreeSet<usize> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

const RIDGE_EPS: f64 = 1e-6;

fn gaussian_fit(x: ArrayView2<'_, f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::InsufficientData(format!("covariance needs at least 2 samples, got {n}")));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in x.rows() {
        let c = DVector::from_iterator(d, row.iter().zip(mean.iter()).map(|(v, m)| v - m));
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    let trace = cov.trace();
    let scale = if trace > 0.0 { trace / d as f64 } else { 1.0 };
    for i in 0..d {
        cov[(i, i)] += RIDGE_EPS * scale;
    }
    Ok((DVector::from_iterator(d, mean.iter().copied()), cov))
}

fn log_det(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite after regularization".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Bhattacharyya distance between two Gaussians.
pub fn bhattacharyya_gaussian(mu1: &DVector<f64>, cov1: &DMatrix<f64>, mu2: &DVector<f64>, cov2: &DMatrix<f64>) -> Result<f64> {
    if mu1.len() != mu2.len() || cov1.shape() != cov2.shape() || cov1.nrows() != mu1.len() {
        return Err(Error::Shape("Gaussian parameters disagree in dimension".into()));
    }
    let cov = (cov1 + cov2) / 2.0;
    let diff = mu1 - mu2;
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("pooled covariance is not positive definite".into()))?;
    let maha = diff.dot(&chol.solve(&diff));
    let ld = log_det(&cov)? - 0.5 * (log_det(cov1)? + log_det(cov2)?);
    Ok((maha / 8.0 + ld / 2.0).max(0.0))
}

/// Bhattacharyya distance between Gaussians fitted to two sample sets.
pub fn bhattacharyya(x1: ArrayView2<'_, f64>, x2: ArrayView2<'_, f64>) -> Result<f64> {
    if x1.ncols() != x2.ncols() {
        return Err(Error::Shape(format!("{} vs {} columns", x1.ncols(), x2.ncols())));
    }
    let (m1, c1) = gaussian_fit(x1)?;
    let (m2, c2) = gaussian_fit(x2)?;
    bhattacharyya_gaussian(&m1, &c1, &m2, &c2)
}

/// Distance between the two label classes of `x`.
pub fn class_bhattacharyya(x: ArrayView2<'_, f64>, y: &[u8]) -> Result<f64> {
    let idx = |cls: u8| -> Vec<usize> { (0..y.len()).filter(|&i| y[i] == cls).collect() };
    bhattacharyya(x.select(Axis(0), &idx(0)).view(), x.select(Axis(0), &idx(1)).view())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 25.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Array2<f64>,
    pub perplexity: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl Embedding2D {
    /// `sample_id,x,y,label` rows.
    pub fn write_csv(&self, path: &Path, sample_ids: &[String], labels: &[u8]) -> Result<()> {
        if sample_ids.len() != self.coords.nrows() || labels.len() != self.coords.nrows() {
            return Err(Error::Shape("embedding rows disagree with sample ids or labels".into()));
        }
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        w.write_record(["sample_id", "x", "y", "label"])?;
        for (i, id) in sample_ids.iter().enumerate() {
            w.write_record([
                id.clone(),
                format!("{:?}", self.coords[[i, 0]]),
                format!("{:?}", self.coords[[i, 1]]),
                labels[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

const ENTROPY_TOL: f64 = 1e-5;

/// Conditional affinities per row, each calibrated to the target perplexity.
fn calibrated_affinities(dist: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = dist.nrows();
    let target = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0, f64::NEG_INFINITY, f64::INFINITY);
        let mut row = vec![0.0; n];
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-dist[[i, j]] * beta).exp() };
                sum += row[j];
                weighted += dist[[i, j]] * row[j];
            }
            if sum == 0.0 {
                sum = 1e-12;
            }
            let entropy = sum.ln() + beta * weighted / sum;
            for v in row.iter_mut() {
                *v /= sum;
            }
            let diff = entropy - target;
            if diff.abs() <= ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
        }
        for j in 0..n {
            p[[i, j]] = row[j];
        }
    }
    p
}

fn pca_init(x: ArrayView2<'_, f64>, seed: u64) -> Array2<f64> {
    let (n, d) = x.dim();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - mean[j]);
    let mut y = Array2::zeros((n, 2));
    // principal scores from the Gram matrix work for any n, d
    let gram = &centered * centered.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    for (c, &k) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        // fix the sign so the largest-magnitude entry is positive
        let pivot = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            y[[i, c]] = sign * v[i] * lambda.sqrt();
        }
    }
    let col0 = y.column(0);
    let m = col0.mean().unwrap_or(0.0);
    let sd = (col0.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd > 1e-12 && y.iter().all(|v| v.is_finite()) {
        y.mapv_inplace(|v| v / sd * 1e-4);
        y
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1e-4).expect("valid");
        Array2::from_shape_fn((n, 2), |_| normal.sample(&mut rng))
    }
}

/// Exact t-SNE to two dimensions with PCA initialization.
pub fn tsne_embed(x: ArrayView2<'_, f64>, seed: u64, cfg: &TsneConfig) -> Result<Embedding2D> {
    let n = x.nrows();
    if !(cfg.perplexity > 0.0) || cfg.perplexity >= n as f64 {
        return Err(Error::Argument(format!(
            "perplexity {} must be positive and below the sample count {n}",
            cfg.perplexity
        )));
    }
    if (n as f64) < 3.0 * cfg.perplexity {
        log::warn!("t-SNE on {n} points with perplexity {}: fewer than 3x perplexity", cfg.perplexity);
    }
    let mut dist = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    let cond = calibrated_affinities(&dist, cfg.perplexity);
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            p[[i, j]] = ((cond[[i, j]] + cond[[j, i]]) / (2.0 * n as f64)).max(1e-12);
        }
    }

    let mut y = pca_init(x, seed);
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut num = Array2::<f64>::zeros((n, n));
    let mut grad = Array2::<f64>::zeros((n, 2));
    for iter in 0..cfg.iterations {
        let (exaggeration, momentum) = if iter < cfg.exaggeration_iterations {
            (cfg.early_exaggeration, 0.5)
        } else {
            (1.0, 0.8)
        };
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (y[[i, 0]] - y[[j, 0]]).powi(2) + (y[[i, 1]] - y[[j, 1]]).powi(2);
                let v = 1.0 / (1.0 + d);
                num[[i, j]] = v;
                num[[j, i]] = v;
                total += 2.0 * v;
            }
        }
        let total = total.max(1e-300);
        grad.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (num[[i, j]] / total).max(1e-12);
                let w = 4.0 * (exaggeration * p[[i, j]] - q) * num[[i, j]];
                grad[[i, 0]] += w * (y[[i, 0]] - y[[j, 0]]);
                grad[[i, 1]] += w * (y[[i, 1]] - y[[j, 1]]);
            }
        }
        for ((g, u), gain) in grad.iter().zip(update.iter_mut()).zip(gains.iter_mut()) {
            *gain = if (*u * g) < 0.0 { *gain + 0.2 } else { *gain * 0.8 };
            *gain = gain.max(0.01);
            *u = momentum * *u - cfg.learning_rate * *gain * g;
        }
        y += &update;
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("t-SNE diverged".into()));
    }
    Ok(Embedding2D {
        coords: y,
        perplexity: cfg.perplexity,
        seed,
        iterations: cfg.iterations,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variance {
    #[default]
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Two-sided two-sample t-test.
pub fn two_sample_ttest(a: &[f64], b: &[f64], variance: Variance) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 scores per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let pooled_df = na + nb - 2.0;
    if va == 0.0 && vb == 0.0 {
        if ma == mb {
            return Ok(TTest { t: 0.0, p: 1.0, df: pooled_df });
        }
        return Err(Error::DegenerateVariance(format!("both groups are constant ({ma} vs {mb})")));
    }
    let (se, df) = match variance {
        Variance::Pooled => {
            let sp = ((na - 1.0) * va + (nb - 1.0) * vb) / pooled_df;
            ((sp * (1.0 / na + 1.0 / nb)).sqrt(), pooled_df)
        }
        Variance::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((qa + qb).sqrt(), df)
        }
    };
    let t = (ma - mb) / se;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, p, df })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSelection {
    pub name: String,
    pub ids: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub nested: NestedCvConfig,
    pub tsne: TsneConfig,
    pub variance: Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub name: String,
    pub n_features: usize,
    pub report: EvaluationReport,
    /// Class separation on the t-SNE embedding of the selected columns.
    pub bhattacharyya: f64,
    #[serde(skip)]
    pub embedding: Option<Embedding2D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub p: f64,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub methods: Vec<MethodRow>,
    pub pairs: Vec<PairRow>,
}

impl Comparison {
    pub fn write_methods_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        w.write_record([
            "method",
            "n_features",
            "accuracy_mean",
            "accuracy_std",
            "f1_mean",
            "precision_mean",
            "recall_mean",
            "bhattacharyya",
        ])?;
        for m in &self.methods {
            w.write_record([
                m.name.clone(),
                m.n_features.to_string(),
                format!("{:?}", m.report.accuracy.mean),
                format!("{:?}", m.report.accuracy.std),
                format!("{:?}", m.report.f1.mean),
                format!("{:?}", m.report.precision.mean),
                format!("{:?}", m.report.recall.mean),
                format!("{:?}", m.bhattacharyya),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_pairs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        w.write_record(["a", "b", "t", "p", "jaccard"])?;
        for p in &self.pairs {
            w.write_record([
                p.a.clone(),
                p.b.clone(),
                format!("{:?}", p.t),
                format!("{:?}", p.p),
                format!("{:?}", p.jaccard),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluate named selections on identical fold plans and compare them
/// pairwise.
pub fn compare_selections(ds: &Dataset, selections: &[NamedSelection], cfg: &CompareConfig) -> Result<Comparison> {
    for s in selections {
        ds.check_ids(&s.ids)?;
    }
    let methods: Vec<MethodRow> = selections
        .par_iter()
        .map(|s| {
            let report = nested_cv(ds, &s.ids, &cfg.nested)?;
            let x = ds.select(&s.ids)?;
            let embedding = tsne_embed(x.view(), cfg.nested.seed, &cfg.tsne)?;
            let bhattacharyya = class_bhattacharyya(embedding.coords.view(), ds.y())?;
            Ok(MethodRow {
                name: s.name.clone(),
                n_features: s.ids.len(),
                report,
                bhattacharyya,
                embedding: Some(embedding),
            })
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for i in 0..methods.len() {
        for j in (i + 1)..methods.len() {
            let t = two_sample_ttest(
                &methods[i].report.fold_accuracies(),
                &methods[j].report.fold_accuracies(),
                cfg.variance,
            )?;
            pairs.push(PairRow {
                a: methods[i].name.clone(),
                b: methods[j].name.clone(),
                t: t.t,
                p: t.p,
                jaccard: jaccard(&selections[i].ids, &selections[j].ids),
            });
        }
    }
    Ok(Comparison { methods, pairs })
}
