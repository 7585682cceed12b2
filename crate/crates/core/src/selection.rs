//! Wrapper feature-subset searches: the modified floating forward search with
//! per-size winning sets and full bookkeeping, classical SFFS, importance
//! ranking and importance-threshold preselection.
//!
//! Subsets are always handled in canonical form (ascending ids), which is also
//! the key of the bookkeeping map. Every evaluated subset is scored exactly
//! once per run.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{nested_cv, NestedCvConfig};
use crate::wrapper::{accuracy, predict, train_rbf_classifier_scaled, SubsetScorer, SvmParams};

/// Per-feature importance aligned to feature ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub ids: Vec<usize>,
    pub values: Vec<f64>,
}

impl ImportanceVector {
    pub fn new(ids: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::Shape(format!("{} ids, {} importances", ids.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("importance values must be finite".into()));
        }
        Ok(Self { ids, values })
    }

    pub fn get(&self, id: usize) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|p| self.values[p])
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `id,importance` CSV, as produced by other importance tooling.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        let (mut ids, mut values) = (Vec::new(), Vec::new());
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let parse_err = |msg: String| Error::Parse { line, msg }.at_path(path);
            if rec.len() != 2 {
                return Err(parse_err(format!("expected 2 fields, found {}", rec.len())));
            }
            ids.push(rec[0].trim().parse().map_err(|_| parse_err(format!("bad id {:?}", &rec[0])))?);
            values.push(
                rec[1]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad importance {:?}", &rec[1])))?,
            );
        }
        Self::new(ids, values).map_err(|e| e.at_path(path))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        w.write_record(["id", "importance"])?;
        for (id, v) in self.ids.iter().zip(&self.values) {
            w.write_record([id.to_string(), format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Out-of-fold permutation importance of every dataset column: the drop in
/// fold accuracy when a column's test-fold values are shuffled, averaged over
/// folds and repeats.
pub fn permutation_importance(ds: &Dataset, k: usize, params: SvmParams, seed: u64, repeats: usize) -> Result<ImportanceVector> {
    if repeats == 0 {
        return Err(Error::Argument("permutation importance needs at least one repeat".into()));
    }
    let folds = stratified_folds(ds.y(), k, seed)?;
    let x = ds.x();
    let y = ds.y();
    let d = ds.n_features();

    struct FoldModel {
        model: crate::wrapper::KernelClassifierModel,
        test: Vec<usize>,
        y_test: Vec<u8>,
        baseline: f64,
    }
    let models: Vec<FoldModel> = (0..folds.k)
        .map(|fold| {
            let (train, test) = folds.split(fold);
            let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let x_train = x.select(ndarray::Axis(0), &train);
            let model = train_rbf_classifier_scaled(x_train.view(), &y_train, params.c, params.gamma_factor)?;
            let x_test = x.select(ndarray::Axis(0), &test);
            let baseline = accuracy(&y_test, &predict(&model, x_test.view())?);
            Ok(FoldModel {
                model,
                test,
                y_test,
                baseline,
            })
        })
        .collect::<Result<_>>()?;

    let values: Vec<f64> = (0..d)
        .into_par_iter()
        .map(|col| {
            let mut total = 0.0;
            for (fold, fm) in models.iter().enumerate() {
                let mut x_test = x.select(ndarray::Axis(0), &fm.test);
                let original: Vec<f64> = x_test.column(col).to_vec();
                for r in 0..repeats {
                    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, &[col as u64, fold as u64, r as u64]));
                    let mut shuffled = original.clone();
                    shuffled.shuffle(&mut rng);
                    x_test.column_mut(col).assign(&ndarray::Array1::from(shuffled));
                    let acc = accuracy(&fm.y_test, &predict(&fm.model, x_test.view())?);
                    total += fm.baseline - acc;
                }
            }
            Ok(total / (repeats * models.len()) as f64)
        })
        .collect::<Result<_>>()?;
    ImportanceVector::new(ds.feature_ids().to_vec(), values)
}

/// Keep pool members whose importance is strictly above `threshold`.
pub fn preselect(pool: &[usize], imp: &ImportanceVector, threshold: f64) -> Result<Vec<usize>> {
    let lookup: HashMap<usize, f64> = imp.ids.iter().copied().zip(imp.values.iter().copied()).collect();
    let mut kept = Vec::new();
    let mut missing = Vec::new();
    for &id in pool {
        match lookup.get(&id) {
            Some(&v) if v > threshold => kept.push(id),
            Some(_) => {}
            None => missing.push(id),
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnknownFeatures(missing));
    }
    if kept.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(kept)
}

/// Ids of the `n` largest importances, best first; ties go to the lower id.
pub fn rank_topn(imp: &ImportanceVector, n: usize) -> Result<Vec<usize>> {
    if n > imp.len() {
        return Err(Error::Argument(format!("top-{n} requested from {} features", imp.len())));
    }
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|&a, &b| {
        imp.values[b]
            .total_cmp(&imp.values[a])
            .then(imp.ids[a].cmp(&imp.ids[b]))
    });
    Ok(order.into_iter().take(n).map(|p| imp.ids[p]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Add,
    Drop,
}

/// One forward or backward step: the best candidate found and whether it
/// replaced the winning set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    /// Size of the set the step tried to improve.
    pub k: usize,
    pub action: Action,
    /// `None` when every candidate was already bookkept.
    pub feature: Option<usize>,
    pub score: f64,
    /// Winning score for size `k` before this step.
    pub previous: f64,
    pub accepted: bool,
    /// Candidate set, canonical order.
    pub subset: Vec<usize>,
    /// Candidates evaluated in this step.
    pub evaluated: usize,
    /// Candidates skipped because they were already bookkept.
    pub skipped: usize,
}

/// Winning sets and scores for every size, the bookkeeping map and the
/// step-by-step trajectory of one search.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub k_target: usize,
    /// `winners[k]` is the best known set of size `k`; `winners[0]` is empty.
    pub winners: Vec<Vec<usize>>,
    pub scores: Vec<f64>,
    pub bookkeeping: HashMap<Vec<usize>, f64>,
    pub trajectory: Vec<TrajectoryEvent>,
}

impl SelectionState {
    fn new(k_target: usize) -> Self {
        Self {
            k_target,
            winners: vec![Vec::new(); k_target + 1],
            scores: vec![0.0; k_target + 1],
            bookkeeping: HashMap::new(),
            trajectory: Vec::new(),
        }
    }

    pub fn winner(&self, k: usize) -> &[usize] {
        &self.winners[k]
    }

    pub fn final_set(&self) -> &[usize] {
        &self.winners[self.k_target]
    }

    pub fn evaluations(&self) -> usize {
        self.bookkeeping.len()
    }

    /// `{K, winners: [{k, ids, names, score}], trajectory}`.
    pub fn to_json(&self, ds: &Dataset) -> serde_json::Value {
        let winners: Vec<serde_json::Value> = (1..=self.k_target)
            .map(|k| {
                serde_json::json!({
                    "k": k,
                    "ids": self.winners[k],
                    "names": self.winners[k].iter().map(|&id| ds.feature_name(id)).collect::<Vec<_>>(),
                    "score": self.scores[k],
                })
            })
            .collect();
        serde_json::json!({
            "K": self.k_target,
            "evaluations": self.evaluations(),
            "winners": winners,
            "trajectory": self.trajectory,
        })
    }
}

/// Which winning score a backward candidate must beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardTarget {
    /// Beat the best known set of the reduced size.
    #[default]
    ReducedSize,
    /// Beat the current size's winning score as well (compatibility mode).
    CurrentSize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub backward_target: BackwardTarget,
}

fn check_search_args(pool: &[usize], k_target: usize) -> Result<()> {
    if k_target == 0 {
        return Err(Error::Argument("target subset size must be at least 1".into()));
    }
    if k_target > pool.len() {
        return Err(Error::Argument(format!(
            "target size {k_target} exceeds the pool of {} features",
            pool.len()
        )));
    }
    Ok(())
}

fn canonical(mut set: Vec<usize>) -> Vec<usize> {
    set.sort_unstable();
    set
}

/// Score every candidate in parallel, then pick the best in candidate order,
/// keeping the first of equal scores.
fn best_of(scorer: &dyn SubsetScorer, candidates: &[(usize, Vec<usize>)]) -> Result<Option<(usize, Vec<usize>, f64, Vec<f64>)>> {
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|(_, set)| scorer.score(set))
        .collect::<Result<_>>()?;
    let mut best: Option<usize> = None;
    for (idx, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(idx);
        }
    }
    Ok(best.map(|b| (candidates[b].0, candidates[b].1.clone(), scores[b], scores)))
}

/// Modified sequential floating forward selection.
///
/// Forward steps always extend the current winning set of size `k - 1` with
/// every pool feature whose extension has not been bookkept; backward steps
/// try every not-yet-bookkept single removal from the size-`k` winner. All
/// evaluated candidates enter the bookkeeping map, and winning sets are only
/// replaced on strict improvement. Candidates are ordered by ascending
/// feature id, so ties go to the lowest added (or dropped) id.
pub fn msffs(pool: &[usize], k_target: usize, scorer: &dyn SubsetScorer, opts: SearchOptions) -> Result<SelectionState> {
    check_search_args(pool, k_target)?;
    let mut pool = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    check_search_args(&pool, k_target)?;

    let mut st = SelectionState::new(k_target);
    let mut k = 1;
    while k <= k_target {
        // forward
        let base = st.winners[k - 1].clone();
        if base.len() == k - 1 {
            let mut skipped = 0;
            let candidates: Vec<(usize, Vec<usize>)> = pool
                .iter()
                .filter(|f| !base.contains(f))
                .filter_map(|&f| {
                    let mut set = base.clone();
                    set.push(f);
                    let set = canonical(set);
                    if st.bookkeeping.contains_key(&set) {
                        skipped += 1;
                        None
                    } else {
                        Some((f, set))
                    }
                })
                .collect();
            match best_of(scorer, &candidates)? {
                Some((f, set, score, all)) => {
                    for ((_, cand), s) in candidates.iter().zip(&all) {
                        st.bookkeeping.insert(cand.clone(), *s);
                    }
                    let previous = st.scores[k];
                    let accepted = score > previous;
                    if accepted {
                        st.winners[k] = set.clone();
                        st.scores[k] = score;
                    }
                    st.trajectory.push(TrajectoryEvent {
                        k,
                        action: Action::Add,
                        feature: Some(f),
                        score,
                        previous,
                        accepted,
                        subset: set,
                        evaluated: candidates.len(),
                        skipped,
                    });
                }
                None => {
                    log::info!("forward step at k={k}: every extension already bookkept, skipped");
                    st.trajectory.push(TrajectoryEvent {
                        k,
                        action: Action::Add,
                        feature: None,
                        score: st.scores[k],
                        previous: st.scores[k],
                        accepted: false,
                        subset: Vec::new(),
                        evaluated: 0,
                        skipped,
                    });
                }
            }
        } else {
            log::info!("forward step at k={k}: no winning set of size {} yet, skipped", k - 1);
        }

        // backward
        while k > 2 && st.winners[k].len() == k {
            let current = st.winners[k].clone();
            let mut skipped = 0;
            let candidates: Vec<(usize, Vec<usize>)> = current
                .iter()
                .filter_map(|&f| {
                    let set: Vec<usize> = current.iter().copied().filter(|&g| g != f).collect();
                    if st.bookkeeping.contains_key(&set) {
                        skipped += 1;
                        None
                    } else {
                        Some((f, set))
                    }
                })
                .collect();
            let Some((f, set, score, all)) = best_of(scorer, &candidates)? else {
                break;
            };
            for ((_, cand), s) in candidates.iter().zip(&all) {
                st.bookkeeping.insert(cand.clone(), *s);
            }
            let target = match opts.backward_target {
                BackwardTarget::ReducedSize => st.scores[k - 1],
                BackwardTarget::CurrentSize => st.scores[k],
            };
            let previous = st.scores[k - 1];
            // the reduced winner is only replaced on strict improvement of its own score
            let accepted = score > target && score > previous;
            st.trajectory.push(TrajectoryEvent {
                k: k - 1,
                action: Action::Drop,
                feature: Some(f),
                score,
                previous,
                accepted,
                subset: set.clone(),
                evaluated: candidates.len(),
                skipped,
            });
            if accepted {
                st.winners[k - 1] = set;
                st.scores[k - 1] = score;
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
    }
    Ok(st)
}

/// Classical sequential floating forward selection: grow one current set,
/// conditionally removing features while the reduced set beats the best
/// score recorded for its size.
pub fn sffs_baseline(pool: &[usize], k_target: usize, scorer: &dyn SubsetScorer) -> Result<SelectionState> {
    check_search_args(pool, k_target)?;
    let mut pool = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    check_search_args(&pool, k_target)?;

    let mut st = SelectionState::new(k_target);
    let mut current: Vec<usize> = Vec::new();

    let evaluate = |st: &mut SelectionState, candidates: Vec<(usize, Vec<usize>)>| -> Result<Option<(usize, Vec<usize>, f64, usize)>> {
        let fresh: Vec<(usize, Vec<usize>)> = candidates
            .iter()
            .filter(|(_, s)| !st.bookkeeping.contains_key(s))
            .cloned()
            .collect();
        let scores: Vec<f64> = fresh
            .par_iter()
            .map(|(_, set)| scorer.score(set))
            .collect::<Result<_>>()?;
        for ((_, set), s) in fresh.iter().zip(scores) {
            st.bookkeeping.insert(set.clone(), s);
        }
        let mut best: Option<(usize, Vec<usize>, f64)> = None;
        for (f, set) in candidates {
            let s = st.bookkeeping[&set];
            if best.as_ref().is_none_or(|b| s > b.2) {
                best = Some((f, set, s));
            }
        }
        Ok(best.map(|(f, set, s)| (f, set, s, fresh.len())))
    };

    while current.len() < k_target {
        let candidates: Vec<(usize, Vec<usize>)> = pool
            .iter()
            .filter(|f| !current.contains(f))
            .map(|&f| {
                let mut set = current.clone();
                set.push(f);
                (f, canonical(set))
            })
            .collect();
        let n_cand = candidates.len();
        let Some((f, set, score, fresh)) = evaluate(&mut st, candidates)? else {
            break;
        };
        current = set.clone();
        let k = current.len();
        let previous = st.scores[k];
        let accepted = score > previous;
        if accepted {
            st.winners[k] = set.clone();
            st.scores[k] = score;
        }
        st.trajectory.push(TrajectoryEvent {
            k,
            action: Action::Add,
            feature: Some(f),
            score,
            previous,
            accepted,
            subset: set,
            evaluated: fresh,
            skipped: n_cand - fresh,
        });

        while current.len() > 2 {
            let k = current.len();
            let candidates: Vec<(usize, Vec<usize>)> = current
                .iter()
                .map(|&f| (f, current.iter().copied().filter(|&g| g != f).collect()))
                .collect();
            let n_cand = candidates.len();
            let Some((f, set, score, fresh)) = evaluate(&mut st, candidates)? else {
                break;
            };
            let previous = st.scores[k - 1];
            let accepted = score > previous;
            st.trajectory.push(TrajectoryEvent {
                k: k - 1,
                action: Action::Drop,
                feature: Some(f),
                score,
                previous,
                accepted,
                subset: set.clone(),
                evaluated: fresh,
                skipped: n_cand - fresh,
            });
            if !accepted {
                break;
            }
            st.winners[k - 1] = set.clone();
            st.scores[k - 1] = score;
            current = set;
        }
    }
    Ok(st)
}

/// Which search produced a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Msffs,
    Sffs,
    Rank,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msffs" => Ok(Self::Msffs),
            "sffs" => Ok(Self::Sffs),
            "rank" => Ok(Self::Rank),
            other => Err(Error::Argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub ids: Vec<usize>,
    pub search_score: f64,
    pub cv_mean: f64,
    pub cv_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Size with the best `cv_mean`; ties go to the smaller size.
    pub recommended_k: usize,
}

impl SweepTable {
    pub fn recommended(&self) -> &SweepRow {
        &self.rows[self.recommended_k - 1]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        w.write_record(["k", "ids", "search_score", "cv_mean", "cv_std", "test_mean", "test_std"])?;
        for r in &self.rows {
            let ids: Vec<String> = r.ids.iter().map(|i| i.to_string()).collect();
            w.write_record([
                r.k.to_string(),
                ids.join(" "),
                format!("{:?}", r.search_score),
                format!("{:?}", r.cv_mean),
                format!("{:?}", r.cv_std),
                format!("{:?}", r.test_mean),
                format!("{:?}", r.test_std),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluate every winning set `1..=k_max` of a finished search with nested
/// cross-validation.
pub fn sweep_state(ds: &Dataset, state: &SelectionState, cfg: &NestedCvConfig) -> Result<SweepTable> {
    let sets: Vec<(Vec<usize>, f64)> = (1..=state.k_target)
        .map(|k| (state.winners[k].clone(), state.scores[k]))
        .collect();
    sweep_sets(ds, &sets, cfg)
}

/// Evaluate a sequence of subsets, the `k`-th of which has size `k`, each
/// paired with the score the search assigned it. Empty sets score 0.
pub fn sweep_sets(ds: &Dataset, sets: &[(Vec<usize>, f64)], cfg: &NestedCvConfig) -> Result<SweepTable> {
    if sets.is_empty() {
        return Err(Error::Argument("nothing to sweep".into()));
    }
    let rows: Vec<SweepRow> = sets
        .iter()
        .enumerate()
        .map(|(idx, (ids, search_score))| {
            let k = idx + 1;
            if ids.is_empty() {
                return Ok(SweepRow {
                    k,
                    ids: Vec::new(),
                    search_score: 0.0,
                    cv_mean: 0.0,
                    cv_std: 0.0,
                    test_mean: 0.0,
                    test_std: 0.0,
                });
            }
            let report = nested_cv(ds, ids, cfg)?;
            Ok(SweepRow {
                k,
                ids: ids.clone(),
                search_score: *search_score,
                cv_mean: report.inner_mean,
                cv_std: report.inner_std,
                test_mean: report.accuracy.mean,
                test_std: report.accuracy.std,
            })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.cv_mean > rows[best].cv_mean {
            best = i;
        }
    }
    Ok(SweepTable {
        recommended_k: rows[best].k,
        rows,
    })
}

/// One mSFFS run to `k_max`, then a nested-CV evaluation of each winner.
pub fn sweep(ds: &Dataset, pool: &[usize], k_max: usize, scorer: &dyn SubsetScorer, cfg: &NestedCvConfig) -> Result<(SelectionState, SweepTable)> {
    let state = msffs(pool, k_max, scorer, SearchOptions::default())?;
    let table = sweep_state(ds, &state, cfg)?;
    Ok((state, table))
}
