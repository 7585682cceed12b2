//! Command-line front end: `extract`, `synth`, `select`, `evaluate` and
//! `compare`, each driven by one JSON run config plus flag overrides.
//!
//! Every command writes into `--out` and finishes with a `manifest.json`
//! listing the tool version, the SHA-256 of the effective config and a
//! SHA-256 per artifact. JSON artifacts also carry the version and config
//! hash inline.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_dataset, read_selection, save_dataset, write_selection, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{compare_selections, nested_cv, CompareConfig, NamedSelection, NestedCvConfig, TsneConfig, Variance};
use crate::selection::{
    msffs, permutation_importance, preselect, rank_topn, sffs_baseline, sweep_sets, sweep_state, Algorithm,
    BackwardTarget, ImportanceVector, SearchOptions, SelectionState,
};
use crate::signal::{read_header, read_recording, recording_features, write_recording, PipelineConfig};
use crate::synth::{generate_cohort, generate_recordings, CohortSpec};
use crate::wrapper::{CvScorer, HyperGrid, SvmParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "connsel", version, about = "Connectivity features and floating wrapper feature selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = ["msffs", "sffs", "rank"])]
    pub algorithm: Option<String>,
    /// Target subset size (search K, sweep maximum, or top-n for ranking).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, env = "CONNSEL_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, epoch and extract ciPLV features from raw recordings.
    Extract {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory of `<name>.f32` recordings with `<name>.json` headers.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Generate a synthetic cohort with planted couplings.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write every raw recording.
        #[arg(long)]
        recordings: bool,
    },
    /// Preselect, search and sweep feature subsets.
    Select {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Nested cross-validation of one selection.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Compare two or more selections on identical fold plans.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long = "selection")]
        selections: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreselectMethod {
    #[default]
    None,
    Permutation,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreselectConfig {
    pub method: PreselectMethod,
    pub threshold: f64,
    pub repeats: usize,
    pub importance_csv: Option<PathBuf>,
}

impl Default for PreselectConfig {
    fn default() -> Self {
        Self {
            method: PreselectMethod::None,
            threshold: 0.0,
            repeats: 5,
            importance_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub input: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub selections: Vec<PathBuf>,
    pub pipeline: PipelineConfig,
    pub cohort: CohortSpec,
    pub write_recordings: bool,
    pub algorithm: Algorithm,
    pub k: usize,
    pub backward_target: BackwardTarget,
    pub preselect: PreselectConfig,
    pub search_folds: usize,
    pub svm: SvmParams,
    pub sweep: bool,
    pub outer_k: usize,
    pub inner_k: usize,
    pub grid: HyperGrid,
    pub tsne: TsneConfig,
    pub variance: Variance,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            input: None,
            dataset: None,
            selections: Vec::new(),
            pipeline: PipelineConfig::default(),
            cohort: CohortSpec::default(),
            write_recordings: false,
            algorithm: Algorithm::Msffs,
            k: 10,
            backward_target: BackwardTarget::default(),
            preselect: PreselectConfig::default(),
            search_folds: 10,
            svm: SvmParams::default(),
            sweep: true,
            outer_k: 10,
            inner_k: 10,
            grid: HyperGrid::default(),
            tsne: TsneConfig::default(),
            variance: Variance::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        serde_json::from_str(&text).map_err(|e| Error::from(e).at_path(path))
    }

    /// The config without settings that never change output content: the
    /// thread count and the output directory.
    pub fn canonical(&self) -> Self {
        Self {
            threads: None,
            out: PathBuf::new(),
            ..self.clone()
        }
    }

    /// SHA-256 of the serialized canonical config.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn nested(&self) -> NestedCvConfig {
        NestedCvConfig {
            outer_k: self.outer_k,
            inner_k: self.inner_k,
            grid: self.grid.clone(),
            seed: self.seed,
        }
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
        value
            .as_ref()
            .ok_or_else(|| Error::Argument(format!("no {what} given (flag or config)")))
    }
}

fn apply_common(cfg: &mut RunConfig, common: &CommonArgs) -> Result<()> {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(a) = &common.algorithm {
        cfg.algorithm = a.parse()?;
    }
    if let Some(k) = common.k {
        cfg.k = k;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(())
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::EmptyPool => 3,
        Error::UnknownFeatures(_) => 4,
        Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Parse { .. }
        | Error::Argument(_)
        | Error::Shape(_)
        | Error::Stratification(_)
        | Error::InsufficientData(_)
        | Error::InvalidFrequency { .. }
        | Error::EmptyEpochSet { .. }
        | Error::DegenerateSpectrum { .. }
        | Error::Recording(_)
        | Error::Index(_) => 2,
        _ => 1,
    }
}

/// Collects written artifacts for the manifest.
struct Outputs {
    dir: PathBuf,
    version: &'static str,
    config_hash: String,
    artifacts: BTreeMap<String, String>,
}

impl Outputs {
    fn new(cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.out).map_err(|e| Error::from(e).at_path(&cfg.out))?;
        Ok(Self {
            dir: cfg.out.clone(),
            version: VERSION,
            config_hash: cfg.hash(),
            artifacts: BTreeMap::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| Error::from(e).at_path(&path))?;
        self.artifacts.insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    /// Write a JSON object with `tool_version` and `config_hash` added.
    fn json(&mut self, name: &str, mut value: serde_json::Value) -> Result<()> {
        if let serde_json::Value::Object(map) = &mut value {
            map.insert("tool_version".into(), self.version.into());
            map.insert("config_hash".into(), self.config_hash.clone().into());
        }
        let path = self.path(name);
        fs::write(&path, serde_json::to_string_pretty(&value)? + "\n").map_err(|e| Error::from(e).at_path(&path))?;
        self.record(name)
    }

    fn finish(self, command: &str, cfg: &RunConfig) -> Result<()> {
        let shown = cfg.canonical();
        let manifest = serde_json::json!({
            "command": command,
            "tool_version": self.version,
            "config_hash": self.config_hash,
            "config": shown,
            "artifacts": self.artifacts,
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::from(e).at_path(&path))?;
        Ok(())
    }
}

fn cmd_extract(cfg: &RunConfig) -> Result<()> {
    let input = cfg.require(&cfg.input, "input directory")?;
    let mut stems: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| Error::from(e).at_path(input))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "f32"))
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(Error::Argument(format!("no .f32 recordings in {}", input.display())));
    }

    use rayon::prelude::*;
    let results: Vec<Result<(String, u8, Vec<f64>, crate::signal::PipelineSummary)>> = stems
        .par_iter()
        .map(|bin| {
            let header = bin.with_extension("json");
            let id = bin.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let label = read_header(&header)?
                .label
                .ok_or_else(|| Error::Argument("header has no class label".into()).at_path(&header))?;
            let rec = read_recording(bin, &header)?;
            let (features, summary) = recording_features(&rec, &cfg.pipeline).map_err(|e| e.at_path(bin))?;
            Ok((id, label, features, summary))
        })
        .collect();

    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::error!("{e}");
                eprintln!("error: {e}");
                failures.push(e);
            }
        }
    }
    if let Some(first) = failures.into_iter().next() {
        return Err(first);
    }

    let d = rows[0].2.len();
    if let Some((id, ..)) = rows.iter().find(|r| r.2.len() != d) {
        return Err(Error::Shape(format!("recording {id} has a different channel or band count")));
    }
    let n_channels = read_header(&stems[0].with_extension("json"))?.channel_labels;
    let layout = crate::dataset::FeatureLayout::new(n_channels, cfg.pipeline.bands.iter().map(|b| b.name.clone()).collect());
    let mut x = ndarray::Array2::zeros((rows.len(), d));
    for (r, row) in rows.iter().enumerate() {
        x.row_mut(r).assign(&ndarray::ArrayView1::from(&row.2));
    }
    let ds = Dataset::with_layout(
        x,
        rows.iter().map(|r| r.1).collect(),
        (0..d).collect(),
        rows.iter().map(|r| r.0.clone()).collect(),
        layout,
    )?;

    let mut out = Outputs::new(cfg)?;
    save_dataset(&ds, &out.path("features.csv"))?;
    out.record("features.csv")?;
    let samples: Vec<serde_json::Value> = rows
        .iter()
        .map(|(id, label, _, s)| serde_json::json!({"sample": id, "label": label, "epochs": s.epochs, "rejected": s.rejected, "threshold": s.threshold}))
        .collect();
    out.json(
        "features.meta.json",
        serde_json::json!({"pipeline": cfg.pipeline, "samples": samples}),
    )?;
    out.finish("extract", cfg)
}

fn cmd_synth(cfg: &RunConfig, write_raw: bool) -> Result<()> {
    let mut spec = cfg.cohort.clone();
    spec.seed = cfg.seed;
    let cohort = generate_cohort(&spec)?;
    let mut out = Outputs::new(cfg)?;
    save_dataset(&cohort.dataset, &out.path("features.csv"))?;
    out.record("features.csv")?;
    write_selection(&out.path("ground_truth.json"), &cohort.ground_truth)?;
    out.record("ground_truth.json")?;
    let samples: Vec<serde_json::Value> = cohort
        .dataset
        .sample_ids()
        .iter()
        .zip(&cohort.summaries)
        .map(|(id, s)| serde_json::json!({"sample": id, "epochs": s.epochs, "rejected": s.rejected}))
        .collect();
    out.json("cohort.json", serde_json::json!({"spec": spec, "samples": samples}))?;
    if write_raw || cfg.write_recordings {
        let dir = out.path("recordings");
        fs::create_dir_all(&dir).map_err(|e| Error::from(e).at_path(&dir))?;
        for (id, label, rec) in generate_recordings(&spec)? {
            let (bin, hdr) = (format!("recordings/{id}.f32"), format!("recordings/{id}.json"));
            write_recording(&rec, Some(label), &out.path(&bin), &out.path(&hdr))?;
            out.record(&bin)?;
            out.record(&hdr)?;
        }
    }
    out.finish("synth", cfg)
}

fn importance(cfg: &RunConfig, ds: &Dataset) -> Result<ImportanceVector> {
    match (&cfg.preselect.method, &cfg.preselect.importance_csv) {
        (PreselectMethod::File, Some(path)) => ImportanceVector::load_csv(path),
        (PreselectMethod::File, None) => Err(Error::Argument("preselect method `file` needs importance_csv".into())),
        _ => permutation_importance(ds, cfg.search_folds, cfg.svm, cfg.seed, cfg.preselect.repeats.max(1)),
    }
}

fn cmd_select(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg.require(&cfg.dataset, "dataset")?)?;
    let mut out = Outputs::new(cfg)?;
    let full_pool = ds.feature_ids().to_vec();

    let imp = match (cfg.preselect.method.clone(), cfg.algorithm) {
        (PreselectMethod::None, Algorithm::Msffs | Algorithm::Sffs) => None,
        _ => Some(importance(cfg, &ds)?),
    };
    if let Some(imp) = &imp {
        ds.check_ids(&imp.ids)?;
        imp.save_csv(&out.path("importance.csv"))?;
        out.record("importance.csv")?;
    }
    let pool = match (&cfg.preselect.method, &imp) {
        (PreselectMethod::None, _) | (_, None) => full_pool,
        (_, Some(imp)) => preselect(&full_pool, imp, cfg.preselect.threshold)?,
    };
    log::info!("candidate pool: {} features", pool.len());

    let nested = cfg.nested();
    let (summary, sets): (serde_json::Value, Vec<(Vec<usize>, f64)>) = match cfg.algorithm {
        Algorithm::Msffs | Algorithm::Sffs => {
            let mut scorer = CvScorer::new(&ds, cfg.search_folds, cfg.seed)?;
            scorer.params = cfg.svm;
            let state: SelectionState = if cfg.algorithm == Algorithm::Msffs {
                msffs(&pool, cfg.k, &scorer, SearchOptions { backward_target: cfg.backward_target })?
            } else {
                sffs_baseline(&pool, cfg.k, &scorer)?
            };
            let mut json = state.to_json(&ds);
            json["algorithm"] = serde_json::to_value(cfg.algorithm)?;
            json["pool_size"] = pool.len().into();
            let sets = (1..=state.k_target)
                .map(|k| (state.winners[k].clone(), state.scores[k]))
                .collect();
            if cfg.sweep {
                let table = sweep_state(&ds, &state, &nested)?;
                write_sweep(&mut out, &table)?;
                json["recommended_k"] = table.recommended_k.into();
            }
            (json, sets)
        }
        Algorithm::Rank => {
            let imp = imp.expect("rank always computes importance");
            let lookup: BTreeMap<usize, f64> = imp.ids.iter().copied().zip(imp.values.iter().copied()).collect();
            let restricted = ImportanceVector::new(pool.clone(), pool.iter().map(|id| lookup[id]).collect())?;
            let ranked = rank_topn(&restricted, cfg.k)?;
            let sets: Vec<(Vec<usize>, f64)> = (1..=ranked.len())
                .map(|n| {
                    let mut s = ranked[..n].to_vec();
                    s.sort_unstable();
                    (s, lookup[&ranked[n - 1]])
                })
                .collect();
            let mut json = serde_json::json!({
                "algorithm": "rank",
                "K": cfg.k,
                "pool_size": pool.len(),
                "ranked": ranked,
                "names": ranked.iter().map(|&id| ds.feature_name(id)).collect::<Vec<_>>(),
            });
            if cfg.sweep {
                let table = sweep_sets(&ds, &sets, &nested)?;
                write_sweep(&mut out, &table)?;
                json["recommended_k"] = table.recommended_k.into();
            }
            (json, sets)
        }
    };
    out.json("selection.json", summary)?;
    let final_set = &sets.last().expect("k >= 1").0;
    write_selection(&out.path("selected.json"), final_set)?;
    out.record("selected.json")?;
    out.finish("select", cfg)
}

fn write_sweep(out: &mut Outputs, table: &crate::selection::SweepTable) -> Result<()> {
    table.write_csv(&out.path("sweep.csv"))?;
    out.record("sweep.csv")?;
    let rec = &table.recommended().ids;
    write_selection(&out.path("recommended.json"), rec)?;
    out.record("recommended.json")
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg.require(&cfg.dataset, "dataset")?)?;
    let sel_path = cfg
        .selections
        .first()
        .ok_or_else(|| Error::Argument("no selection given (flag or config)".into()))?;
    let ids = read_selection(sel_path, ds.layout())?;
    ds.check_ids(&ids).map_err(|e| e.at_path(sel_path))?;
    let report = nested_cv(&ds, &ids, &cfg.nested())?;
    let mut out = Outputs::new(cfg)?;
    let mut json = serde_json::to_value(&report)?;
    json["names"] = ids.iter().map(|&id| ds.feature_name(id)).collect::<Vec<_>>().into();
    out.json("report.json", json)?;
    report.write_csv(&out.path("report.csv"))?;
    out.record("report.csv")?;
    out.finish("evaluate", cfg)
}

fn selection_names(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}_{n}")
            }
        })
        .collect()
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg.require(&cfg.dataset, "dataset")?)?;
    if cfg.selections.len() < 2 {
        return Err(Error::Argument("compare needs at least two selections".into()));
    }
    let names = selection_names(&cfg.selections);
    let selections: Vec<NamedSelection> = cfg
        .selections
        .iter()
        .zip(&names)
        .map(|(path, name)| {
            let ids = read_selection(path, ds.layout())?;
            ds.check_ids(&ids).map_err(|e| e.at_path(path))?;
            Ok(NamedSelection { name: name.clone(), ids })
        })
        .collect::<Result<_>>()?;
    let compare_cfg = CompareConfig {
        nested: cfg.nested(),
        tsne: cfg.tsne.clone(),
        variance: cfg.variance,
    };
    let cmp = compare_selections(&ds, &selections, &compare_cfg)?;
    let mut out = Outputs::new(cfg)?;
    out.json("comparison.json", serde_json::to_value(&cmp)?)?;
    cmp.write_methods_csv(&out.path("methods.csv"))?;
    out.record("methods.csv")?;
    cmp.write_pairs_csv(&out.path("pairs.csv"))?;
    out.record("pairs.csv")?;
    for m in &cmp.methods {
        if let Some(emb) = &m.embedding {
            let name = format!("embedding_{}.csv", m.name);
            emb.write_csv(&out.path(&name), ds.sample_ids(), ds.y())?;
            out.record(&name)?;
        }
    }
    out.finish("compare", cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    let (common, name) = match &cli.command {
        Command::Extract { common, .. } => (common, "extract"),
        Command::Synth { common, .. } => (common, "synth"),
        Command::Select { common, .. } => (common, "select"),
        Command::Evaluate { common, .. } => (common, "evaluate"),
        Command::Compare { common, .. } => (common, "compare"),
    };
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_common(&mut cfg, common)?;
    match &cli.command {
        Command::Extract { input: Some(p), .. } => cfg.input = Some(p.clone()),
        Command::Select { dataset: Some(d), .. } => cfg.dataset = Some(d.clone()),
        Command::Evaluate { dataset, selection, .. } => {
            if let Some(d) = dataset {
                cfg.dataset = Some(d.clone());
            }
            if let Some(s) = selection {
                cfg.selections = vec![s.clone()];
            }
        }
        Command::Compare { dataset, selections, .. } => {
            if let Some(d) = dataset {
                cfg.dataset = Some(d.clone());
            }
            if !selections.is_empty() {
                cfg.selections = selections.clone();
            }
        }
        _ => {}
    }

    let run = || match &cli.command {
        Command::Extract { .. } => cmd_extract(&cfg),
        Command::Synth { recordings, .. } => cmd_synth(&cfg, *recordings),
        Command::Select { .. } => cmd_select(&cfg),
        Command::Evaluate { .. } => cmd_evaluate(&cfg),
        Command::Compare { .. } => cmd_compare(&cfg),
    };
    log::info!("connsel {VERSION} {name}, config {}", cfg.hash());
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run() -> i32 {
    run_with_args(std::env::args_os())
}
