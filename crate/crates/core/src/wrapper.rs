//! RBF-kernel support vector classifier and the cross-validated subset score
//! that the floating searches wrap.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FoldPlan};
use crate::error::{Error, Result};

/// KKT violation tolerance of the dual solver.
const SOLVER_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

/// Per-feature standardization fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            // constant columns map to zero instead of dividing by zero
            std.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { mean, std }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| (v - self.mean[c]) / self.std[c]);
        }
        out
    }
}

/// `1 / (d * mean feature variance)` of already standardized data.
pub fn scale_gamma(xs: ArrayView2<'_, f64>) -> f64 {
    let d = xs.ncols().max(1) as f64;
    let var = xs.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

fn rbf(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * d2).exp()
}

fn signed(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

/// Trained RBF support vector classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelClassifierModel {
    /// Training-row indices of the support vectors.
    pub support: Vec<usize>,
    /// Standardized support vectors, one per row.
    pub support_vectors: Array2<f64>,
    /// Dual coefficients, each `alpha_i` in `[0, C]`.
    pub alpha: Vec<f64>,
    /// Signed labels of the support vectors.
    pub labels: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub scaler: Standardizer,
    pub iterations: usize,
}

impl KernelClassifierModel {
    pub fn n_features(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        let xs = self.scaler.transform(x);
        Ok(xs
            .outer_iter()
            .map(|row| {
                self.support_vectors
                    .outer_iter()
                    .zip(self.alpha.iter().zip(&self.labels))
                    .map(|(sv, (a, yl))| a * yl * rbf(sv, row, self.gamma))
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }
}

/// Dual solution over a precomputed kernel matrix.
struct DualSolution {
    alpha: Vec<f64>,
    bias: f64,
    iterations: usize,
}

/// Sequential minimal optimization with second-order working-set selection.
fn solve_dual(kernel: &Array2<f64>, y: &[f64], c: f64) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[[i, j]];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let max_iter = 10_000_000usize.min(n.max(10) * 10_000);

    let mut iterations = 0;
    while iterations < max_iter {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] >= g_max {
                if -y[t] * grad[t] > g_max || i_sel == usize::MAX {
                    g_max = -y[t] * grad[t];
                    i_sel = t;
                }
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                g_min = g_min.min(v);
                let b = g_max - v;
                if b > 0.0 {
                    let mut a = kernel[[i_sel, i_sel]] + kernel[[t, t]] - 2.0 * kernel[[i_sel, t]];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || g_max - g_min < SOLVER_TOL {
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        bias: -rho,
        iterations,
    }
}

/// Fit a soft-margin RBF classifier. Labels are 0/1 with 1 as the positive
/// class; features are standardized with the training statistics.
pub fn train_rbf_classifier(x: ArrayView2<'_, f64>, y: &[u8], c: f64, gamma: f64) -> Result<KernelClassifierModel> {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    fit_standardized(xs, y, c, gamma, scaler)
}

/// As [`train_rbf_classifier`] with `gamma` scaled to the data.
pub fn train_rbf_classifier_scaled(x: ArrayView2<'_, f64>, y: &[u8], c: f64, gamma_factor: f64) -> Result<KernelClassifierModel> {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    let gamma = gamma_factor * scale_gamma(xs.view());
    fit_standardized(xs, y, c, gamma, scaler)
}

fn fit_standardized(xs: Array2<f64>, y: &[u8], c: f64, gamma: f64, scaler: Standardizer) -> Result<KernelClassifierModel> {
    let n = xs.nrows();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    if !(c > 0.0 && gamma > 0.0 && c.is_finite() && gamma.is_finite()) {
        return Err(Error::Argument(format!("C and gamma must be positive, got C={c}, gamma={gamma}")));
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if n < 2 || pos == 0 || pos == n {
        return Err(Error::DegenerateTraining(format!(
            "{n} samples with {pos} positives; both classes are required"
        )));
    }
    let ys = signed(y);
    let mut kernel = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let k = rbf(xs.row(i), xs.row(j), gamma);
            kernel[[i, j]] = k;
            kernel[[j, i]] = k;
        }
    }
    let sol = solve_dual(&kernel, &ys, c);
    let support: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
    Ok(KernelClassifierModel {
        support_vectors: xs.select(Axis(0), &support),
        alpha: support.iter().map(|&i| sol.alpha[i]).collect(),
        labels: support.iter().map(|&i| ys[i]).collect(),
        support,
        bias: sol.bias,
        gamma,
        c,
        scaler,
        iterations: sol.iterations,
    })
}

/// Sign of the decision function; exactly zero maps to class 1.
pub fn predict(model: &KernelClassifierModel, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
    Ok(model
        .decision_function(x)?
        .iter()
        .map(|&f| u8::from(f >= 0.0))
        .collect())
}

/// Classifier hyperparameters. `gamma_factor` multiplies the data-scaled
/// default `1 / (d * mean variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub gamma_factor: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma_factor: 1.0,
        }
    }
}

/// Hyperparameter grid searched by nested cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub c: Vec<f64>,
    pub gamma_factor: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            c: vec![0.1, 1.0, 10.0, 100.0],
            gamma_factor: vec![0.1, 1.0, 10.0],
        }
    }
}

impl HyperGrid {
    /// Candidates ordered by C, then gamma, both ascending.
    pub fn candidates(&self) -> Vec<SvmParams> {
        let mut c = self.c.clone();
        let mut g = self.gamma_factor.clone();
        c.sort_by(f64::total_cmp);
        g.sort_by(f64::total_cmp);
        c.iter()
            .flat_map(|&c| g.iter().map(move |&gamma_factor| SvmParams { c, gamma_factor }))
            .collect()
    }
}

/// Anything that can be trained on one split and predict the other.
pub trait Classifier: Send + Sync {
    fn fit_predict(&self, x_train: ArrayView2<'_, f64>, y_train: &[u8], x_test: ArrayView2<'_, f64>) -> Result<Vec<u8>>;
}

impl Classifier for SvmParams {
    fn fit_predict(&self, x_train: ArrayView2<'_, f64>, y_train: &[u8], x_test: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        let model = train_rbf_classifier_scaled(x_train, y_train, self.c, self.gamma_factor)?;
        predict(&model, x_test)
    }
}

pub fn accuracy(truth: &[u8], pred: &[u8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Per-fold accuracies of `clf` on the columns `subset` of `ds`.
pub fn fold_accuracies(ds: &Dataset, subset: &[usize], folds: &FoldPlan, clf: &dyn Classifier) -> Result<Vec<f64>> {
    let x = ds.select(subset)?;
    fold_accuracies_on(x.view(), ds.y(), folds, clf)
}

/// Per-fold accuracies on an already selected matrix.
pub fn fold_accuracies_on(x: ArrayView2<'_, f64>, y: &[u8], folds: &FoldPlan, clf: &dyn Classifier) -> Result<Vec<f64>> {
    if folds.assignments.len() != x.nrows() || y.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "fold plan covers {} samples, data has {} rows and {} labels",
            folds.assignments.len(),
            x.nrows(),
            y.len()
        )));
    }
    (0..folds.k)
        .map(|fold| {
            let (train, test) = folds.split(fold);
            let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let pred = clf.fit_predict(
                x.select(Axis(0), &train).view(),
                &y_train,
                x.select(Axis(0), &test).view(),
            )?;
            Ok(accuracy(&y_test, &pred))
        })
        .collect()
}

/// Everything that determines one wrapper score.
#[derive(Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub dataset: &'a Dataset,
    pub subset: &'a [usize],
    pub folds: &'a FoldPlan,
    pub params: SvmParams,
}

/// Mean fold accuracy; the empty subset scores 0.
pub fn cv_score(req: &ScoreRequest<'_>) -> Result<f64> {
    if req.subset.is_empty() {
        return Ok(0.0);
    }
    let accs = fold_accuracies(req.dataset, req.subset, req.folds, &req.params)?;
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Score function over feature subsets, as wrapped by the searches.
pub trait SubsetScorer: Sync {
    fn score(&self, subset: &[usize]) -> Result<f64>;
}

impl<F> SubsetScorer for F
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    fn score(&self, subset: &[usize]) -> Result<f64> {
        self(subset)
    }
}

/// Cross-validated accuracy on one fixed fold plan, so subset scores are
/// comparable across a whole search.
#[derive(Debug, Clone)]
pub struct CvScorer<'a> {
    pub dataset: &'a Dataset,
    pub folds: FoldPlan,
    pub params: SvmParams,
}

impl<'a> CvScorer<'a> {
    pub fn new(dataset: &'a Dataset, k: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            dataset,
            folds: crate::dataset::stratified_folds(dataset.y(), k, seed)?,
            params: SvmParams::default(),
        })
    }
}

impl SubsetScorer for CvScorer<'_> {
    fn score(&self, subset: &[usize]) -> Result<f64> {
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        cv_score(&ScoreRequest {
            dataset: self.dataset,
            subset: &sorted,
            folds: &self.folds,
            params: self.params,
        })
    }
}
