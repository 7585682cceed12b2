//! Feature matrices, the pair-band feature layout, CSV persistence and
//! stratified fold plans.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{canonical_bands, TEN_TWENTY_19};

/// One connectivity feature: channel pair `i < j` in one band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureId {
    pub i: usize,
    pub j: usize,
    pub band: usize,
    pub id: usize,
}

fn pair_index(i: usize, j: usize, n_channels: usize) -> usize {
    i * n_channels - i * (i + 1) / 2 + (j - i - 1)
}

/// Flat id of `(i, j, band)`: pairs enumerated lexicographically, band fastest.
pub fn feature_index(i: usize, j: usize, band: usize, n_channels: usize, n_bands: usize) -> Result<FeatureId> {
    if !(i < j && j < n_channels) {
        return Err(Error::Index(format!(
            "channel pair ({i}, {j}) invalid for {n_channels} channels"
        )));
    }
    if band >= n_bands {
        return Err(Error::Index(format!("band {band} invalid for {n_bands} bands")));
    }
    Ok(FeatureId {
        i,
        j,
        band,
        id: pair_index(i, j, n_channels) * n_bands + band,
    })
}

/// Inverse of [`feature_index`].
pub fn feature_from_id(id: usize, n_channels: usize, n_bands: usize) -> Result<FeatureId> {
    let n_pairs = n_channels * n_channels.saturating_sub(1) / 2;
    if n_bands == 0 || id >= n_pairs * n_bands {
        return Err(Error::Index(format!(
            "feature id {id} out of range for {n_channels} channels x {n_bands} bands"
        )));
    }
    let band = id % n_bands;
    let mut pair = id / n_bands;
    for i in 0..n_channels {
        let row = n_channels - i - 1;
        if pair < row {
            return Ok(FeatureId {
                i,
                j: i + 1 + pair,
                band,
                id,
            });
        }
        pair -= row;
    }
    unreachable!("pair index bounded by n_pairs")
}

/// Channel and band names used to render and parse feature names such as
/// `P4-O1(theta)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub channel_labels: Vec<String>,
    pub band_names: Vec<String>,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        Self::new(
            TEN_TWENTY_19.iter().map(|s| s.to_string()).collect(),
            canonical_bands().into_iter().map(|b| b.name).collect(),
        )
    }
}

impl FeatureLayout {
    pub fn new(channel_labels: Vec<String>, band_names: Vec<String>) -> Self {
        Self {
            channel_labels,
            band_names,
        }
    }

    /// The 10-20 layout when it can hold `n_features` ids, otherwise generic
    /// `ch<k>` channels with the five canonical bands.
    pub fn infer(n_features: usize) -> Self {
        let default = Self::default();
        if n_features <= default.n_features() {
            return default;
        }
        let mut c = 2;
        while c * (c - 1) / 2 * 5 < n_features {
            c += 1;
        }
        Self::new(
            (0..c).map(|k| format!("ch{k}")).collect(),
            default.band_names,
        )
    }

    pub fn n_channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn n_bands(&self) -> usize {
        self.band_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_channels() * self.n_channels().saturating_sub(1) / 2 * self.n_bands()
    }

    pub fn encode(&self, i: usize, j: usize, band: usize) -> Result<FeatureId> {
        feature_index(i, j, band, self.n_channels(), self.n_bands())
    }

    pub fn decode(&self, id: usize) -> Result<FeatureId> {
        feature_from_id(id, self.n_channels(), self.n_bands())
    }

    pub fn name(&self, id: usize) -> Result<String> {
        let f = self.decode(id)?;
        Ok(format!(
            "{}-{}({})",
            self.channel_labels[f.i], self.channel_labels[f.j], self.band_names[f.band]
        ))
    }

    /// Parse `A-B(band)`; the channel order may be either way round.
    pub fn parse_name(&self, name: &str) -> Result<usize> {
        let bad = || Error::Argument(format!("unrecognised feature name {name:?}"));
        let name = name.trim();
        let open = name.find('(').ok_or_else(bad)?;
        let band = name[open + 1..].strip_suffix(')').ok_or_else(bad)?.trim();
        let (a, b) = name[..open].trim().split_once('-').ok_or_else(bad)?;
        let find = |label: &str| {
            self.channel_labels
                .iter()
                .position(|c| c.eq_ignore_ascii_case(label.trim()))
                .ok_or_else(bad)
        };
        let band = self
            .band_names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(band))
            .ok_or_else(bad)?;
        let (a, b) = (find(a)?, find(b)?);
        if a == b {
            return Err(bad());
        }
        Ok(self.encode(a.min(b), a.max(b), band)?.id)
    }
}

/// `N x D` feature matrix with binary labels (1 = pain, 0 = healthy).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Vec<u8>,
    feature_ids: Vec<usize>,
    sample_ids: Vec<String>,
    layout: FeatureLayout,
    columns: HashMap<usize, usize>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<u8>, feature_ids: Vec<usize>, sample_ids: Vec<String>) -> Result<Self> {
        let layout = FeatureLayout::infer(feature_ids.iter().max().map_or(0, |m| m + 1));
        Self::with_layout(x, y, feature_ids, sample_ids, layout)
    }

    pub fn with_layout(
        x: Array2<f64>,
        y: Vec<u8>,
        feature_ids: Vec<usize>,
        sample_ids: Vec<String>,
        layout: FeatureLayout,
    ) -> Result<Self> {
        let (n, d) = x.dim();
        if y.len() != n || sample_ids.len() != n {
            return Err(Error::Shape(format!(
                "{n} rows, {} labels, {} sample ids",
                y.len(),
                sample_ids.len()
            )));
        }
        if feature_ids.len() != d {
            return Err(Error::Shape(format!("{d} columns but {} feature ids", feature_ids.len())));
        }
        if let Some(bad) = y.iter().find(|&&l| l > 1) {
            return Err(Error::Argument(format!("label {bad} is not binary")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("feature matrix contains NaN or Inf".into()));
        }
        let mut columns = HashMap::with_capacity(d);
        for (col, &id) in feature_ids.iter().enumerate() {
            if columns.insert(id, col).is_some() {
                return Err(Error::Argument(format!("duplicate feature id {id}")));
            }
        }
        Ok(Self {
            x,
            y,
            feature_ids,
            sample_ids,
            layout,
            columns,
        })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn feature_ids(&self) -> &[usize] {
        &self.feature_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn set_layout(&mut self, layout: FeatureLayout) {
        self.layout = layout;
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_of(&self, id: usize) -> Option<usize> {
        self.columns.get(&id).copied()
    }

    pub fn column(&self, id: usize) -> Option<ArrayView1<'_, f64>> {
        self.column_of(id).map(|c| self.x.column(c))
    }

    /// Error listing every id the dataset does not contain.
    pub fn check_ids(&self, ids: &[usize]) -> Result<()> {
        let missing: Vec<usize> = ids.iter().copied().filter(|id| !self.columns.contains_key(id)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::UnknownFeatures(missing))
        }
    }

    /// Columns for `ids`, in the given order.
    pub fn select(&self, ids: &[usize]) -> Result<Array2<f64>> {
        self.check_ids(ids)?;
        let cols: Vec<usize> = ids.iter().map(|id| self.columns[id]).collect();
        Ok(self.x.select(ndarray::Axis(1), &cols))
    }

    /// Feature name, falling back to `f_<id>` outside the layout.
    pub fn feature_name(&self, id: usize) -> String {
        self.layout.name(id).unwrap_or_else(|_| format!("f_{id}"))
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.y.iter().filter(|&&l| l == 1).count();
        [self.y.len() - pos, pos]
    }
}

/// CSV with header `sample_id,label,f_<id>...`.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend(ds.feature_ids.iter().map(|id| format!("f_{id}")));
    w.write_record(&header)?;
    for (r, row) in ds.x.outer_iter().enumerate() {
        let mut rec = vec![ds.sample_ids[r].clone(), ds.y[r].to_string()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
    parse_dataset(&text).map_err(|e| e.at_path(path))
}

/// Parse dataset CSV text; errors carry 1-based line numbers.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Parse { line: 1, msg: "empty file".into() }),
    };
    if header.len() < 2 || &header[0] != "sample_id" || &header[1] != "label" {
        return Err(Error::Parse {
            line: 1,
            msg: "header must start with sample_id,label".into(),
        });
    }
    let feature_ids = header
        .iter()
        .skip(2)
        .map(|h| {
            h.strip_prefix("f_")
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    msg: format!("bad feature column {h:?}"),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let d = feature_ids.len();
    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut sample_ids = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != d + 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", d + 2, record.len()),
            });
        }
        let label = match &record[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("label {other:?} is not 0 or 1"),
                })
            }
        };
        for field in record.iter().skip(2) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad value {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        sample_ids.push(record[0].to_string());
        y.push(label);
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(x, y, feature_ids, sample_ids).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })
}

/// Assignment of every sample to one of `k` stratified folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// `(train, test)` sample indices for one fold, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignments.len()).partition(|&i| self.assignments[i] == fold);
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffle each class with a seeded RNG and deal round-robin, continuing the
/// deal across classes so fold totals stay within one of each other.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Stratification(format!("need at least 2 folds, got {k}")));
    }
    let classes: BTreeSet<u8> = y.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; y.len()];
    let mut next = 0;
    for class in classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} members, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for m in members {
            assignments[m] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Selection files: a JSON list of flat ids or feature names (mixed allowed).
pub fn parse_selection(text: &str, layout: &FeatureLayout) -> Result<Vec<usize>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Id(usize),
        Name(String),
    }
    let entries: Vec<Entry> = serde_json::from_str(text)?;
    let mut seen = BTreeSet::new();
    let mut ids = Vec::with_capacity(entries.len());
    for e in entries {
        let id = match e {
            Entry::Id(id) => id,
            Entry::Name(name) => match name.parse::<usize>() {
                Ok(id) => id,
                Err(_) => layout.parse_name(&name)?,
            },
        };
        if seen.insert(id) {
            ids.push(id);
        }
    }
    Ok(ids)
}

pub fn read_selection(path: &Path, layout: &FeatureLayout) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
    parse_selection(&text, layout).map_err(|e| e.at_path(path))
}

pub fn write_selection(path: &Path, ids: &[usize]) -> Result<()> {
    fs::write(path, serde_json::to_string(ids)?).map_err(|e| Error::from(e).at_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_index_examples() {
        assert_eq!(feature_index(0, 1, 0, 19, 5).unwrap().id, 0);
        assert_eq!(feature_index(17, 18, 4, 19, 5).unwrap().id, 854);
        // enumerate pairs lexicographically to find (2, 5)
        let pair = (0..19)
            .flat_map(|i| (i + 1..19).map(move |j| (i, j)))
            .position(|p| p == (2, 5))
            .unwrap();
        assert_eq!(pair, 37);
        assert_eq!(feature_index(2, 5, 1, 19, 5).unwrap().id, pair * 5 + 1);
    }

    #[test]
    fn feature_index_rejects_bad_input() {
        assert!(feature_index(3, 3, 0, 19, 5).is_err());
        assert!(feature_index(4, 2, 0, 19, 5).is_err());
        assert!(feature_index(0, 19, 0, 19, 5).is_err());
        assert!(feature_index(0, 1, 5, 19, 5).is_err());
        assert!(feature_from_id(855, 19, 5).is_err());
    }

    #[test]
    fn names_round_trip() {
        let layout = FeatureLayout::default();
        let id = layout.parse_name("P4-O1(theta)").unwrap();
        assert_eq!(layout.name(id).unwrap(), "P4-O1(theta)");
        assert_eq!(layout.parse_name("O1-P4(Theta)").unwrap(), id);
        assert!(layout.parse_name("P4-P4(theta)").is_err());
        assert!(layout.parse_name("P4-O1(kappa)").is_err());
        assert!(layout.parse_name("P4O1").is_err());
    }

    fn small() -> Dataset {
        let x = Array2::from_shape_fn((4, 6), |(r, c)| (r as f64 + 1.0) / (c as f64 + 3.0));
        Dataset::new(
            x,
            vec![0, 1, 0, 1],
            vec![0, 1, 2, 3, 4, 5],
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = small();
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn non_binary_label_rejected() {
        let err = parse_dataset("sample_id,label,f_0\na,0,0.5\nb,2,0.1\n").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("\"2\""));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_row_rejected_with_line() {
        let err = parse_dataset("sample_id,label,f_0,f_1\na,0,0.5,0.2\nb,1,0.1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn malformed_header_rejected() {
        assert!(matches!(parse_dataset("id,label\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_dataset("sample_id,label,x7\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn folds_for_balanced_cohort() {
        let y: Vec<u8> = (0..74).map(|i| (i % 2) as u8).collect();
        let plan = stratified_folds(&y, 10, 7).unwrap();
        for f in 0..10 {
            let (_, test) = plan.split(f);
            assert!(test.len() == 7 || test.len() == 8);
            let pos = test.iter().filter(|&&i| y[i] == 1).count();
            let neg = test.len() - pos;
            assert!((3..=4).contains(&pos) && (3..=4).contains(&neg));
        }
        assert_eq!(plan, stratified_folds(&y, 10, 7).unwrap());
    }

    #[test]
    fn folds_need_enough_members() {
        let mut y = vec![0u8; 30];
        y.extend([1u8; 5]);
        assert!(matches!(stratified_folds(&y, 10, 0), Err(Error::Stratification(_))));
        assert!(stratified_folds(&y, 1, 0).is_err());
    }

    #[test]
    fn selection_accepts_ids_and_names() {
        let layout = FeatureLayout::default();
        let ids = parse_selection(r#"[3, "P4-O1(theta)", "3"]"#, &layout).unwrap();
        assert_eq!(ids, vec![3, layout.parse_name("P4-O1(theta)").unwrap()]);
        assert!(parse_selection("{not json", &layout).is_err());
    }
}
