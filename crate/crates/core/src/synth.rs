//! Synthetic cohorts with planted, band-specific, lagged channel couplings.
//!
//! Every channel carries pink plus white background noise. A pain-class
//! recording additionally carries, for each coupling it expresses, a shared
//! narrowband source at the band's mean frequency: channel `i` receives the
//! source, channel `j` the same source delayed by `lag` cycles. The source
//! phase wanders slowly, so the coupling shows up as a stable phase lag rather
//! than as a fixed sinusoid.
//!
//! Pain subjects need not express every planted coupling: each (subject,
//! coupling) pair is expressed independently with `expression_probability`,
//! so the planted features carry partly complementary information.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureLayout};
use crate::error::{Error, Result};
use crate::signal::{recording_features, PipelineConfig, PipelineSummary, Recording, TEN_TWENTY_19};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCoupling {
    pub i: usize,
    pub j: usize,
    /// Index into the pipeline's band table.
    pub band: usize,
    /// Lag of `j` behind `i`, in cycles of the band's mean frequency.
    pub lag: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_per_class: usize,
    pub channels: usize,
    pub fs: f64,
    pub duration_s: f64,
    pub planted: Vec<PlantedCoupling>,
    /// RMS of the white component relative to the unit-RMS pink component.
    pub noise_level: f64,
    /// Amplitude of a strength-1 coupling relative to the pink component.
    pub coupling_gain: f64,
    /// Line width of the shared sources' random-walk phase.
    pub phase_diffusion_hz: f64,
    /// Chance that a pain subject expresses a given coupling.
    pub expression_probability: f64,
    pub seed: u64,
    /// Replacement seeds for individual samples, keyed by sample index.
    pub seed_overrides: BTreeMap<usize, u64>,
    pub pipeline: PipelineConfig,
}

impl Default for CohortSpec {
    fn default() -> Self {
        let c = |i, j, band, strength| PlantedCoupling {
            i,
            j,
            band,
            lag: 0.25,
            strength,
        };
        Self {
            n_per_class: 37,
            channels: 19,
            fs: 256.0,
            duration_s: 310.0,
            // channel indices follow the 10-20 montage order
            planted: vec![
                c(15, 17, 1, 0.9), // P4-O1 theta
                c(0, 2, 1, 0.8),   // Fp1-F7 theta
                c(11, 14, 1, 0.7), // T4-Pz theta
                c(5, 15, 3, 0.6),  // F4-P4 beta
                c(6, 9, 0, 0.9),   // F8-Cz delta
                c(0, 5, 3, 0.5),   // Fp1-F4 beta
                c(3, 5, 2, 0.7),   // F3-F4 alpha
                c(4, 9, 0, 0.6),   // Fz-Cz delta
            ],
            noise_level: 0.3,
            coupling_gain: 1.0,
            phase_diffusion_hz: 0.01,
            expression_probability: 0.5,
            seed: 0,
            seed_overrides: BTreeMap::new(),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl CohortSpec {
    pub fn channel_labels(&self) -> Vec<String> {
        if self.channels == TEN_TWENTY_19.len() {
            TEN_TWENTY_19.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.channels).map(|c| format!("Ch{}", c + 1)).collect()
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(
            self.channel_labels(),
            self.pipeline.bands.iter().map(|b| b.name.clone()).collect(),
        )
    }

    pub fn n_samples_per_recording(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if self.n_per_class == 0 {
            return bad("n_per_class must be at least 1".into());
        }
        if self.channels < 2 {
            return bad(format!("need at least 2 channels, got {}", self.channels));
        }
        if !(self.fs > 0.0) || !(self.duration_s > 0.0) {
            return bad("fs and duration_s must be positive".into());
        }
        if !(self.noise_level >= 0.0) || !(self.coupling_gain >= 0.0) || !(self.phase_diffusion_hz >= 0.0) {
            return bad("noise_level, coupling_gain and phase_diffusion_hz must be non-negative".into());
        }
        let mut seen = BTreeSet::new();
        for (n, p) in self.planted.iter().enumerate() {
            if p.i == p.j || p.i >= self.channels || p.j >= self.channels {
                return bad(format!("planted coupling {n}: invalid channel pair ({}, {})", p.i, p.j));
            }
            let Some(band) = self.pipeline.bands.get(p.band) else {
                return bad(format!("planted coupling {n}: band {} out of range", p.band));
            };
            if band.mean_freq() >= self.fs / 2.0 {
                return bad(format!("planted coupling {n}: band above Nyquist"));
            }
            if !(p.lag > 0.0 && p.lag <= 0.5) {
                return bad(format!("planted coupling {n}: lag {} outside (0, 0.5]", p.lag));
            }
            if !(0.0..=1.0).contains(&p.strength) {
                return bad(format!("planted coupling {n}: strength {} outside [0, 1]", p.strength));
            }
            if !seen.insert((p.i.min(p.j), p.i.max(p.j), p.band)) {
                return bad(format!("planted coupling {n} duplicates an earlier pair and band"));
            }
        }
        if !(0.0..=1.0).contains(&self.expression_probability) {
            return bad(format!(
                "expression_probability {} outside [0, 1]",
                self.expression_probability
            ));
        }
        if let Some(&idx) = self.seed_overrides.keys().find(|&&k| k >= 2 * self.n_per_class) {
            return bad(format!("seed override for sample {idx} outside the cohort"));
        }
        Ok(())
    }

    /// Flat feature ids of the planted couplings, ascending.
    pub fn ground_truth(&self) -> Result<Vec<usize>> {
        let layout = self.layout();
        let mut ids: Vec<usize> = self
            .planted
            .iter()
            .map(|p| layout.encode(p.i.min(p.j), p.i.max(p.j), p.band).map(|f| f.id))
            .collect::<Result<_>>()?;
        ids.sort_unstable();
        Ok(ids)
    }

    /// Seed of sample `index`, honoring overrides.
    pub fn sample_seed(&self, index: usize) -> u64 {
        self.seed_overrides
            .get(&index)
            .copied()
            .unwrap_or_else(|| crate::derive_seed(self.seed, &[index as u64]))
    }

    /// Couplings expressed by each pain subject, drawn from the cohort seed
    /// so per-sample seed overrides leave the plan untouched.
    pub fn expression_plan(&self) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(self.seed, &[u64::MAX]));
        (0..self.n_per_class)
            .map(|_| self.draw_expression(&mut rng))
            .collect()
    }

    fn draw_expression(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..self.planted.len())
            .filter(|_| rng.gen_bool(self.expression_probability))
            .collect()
    }
}

/// Pink noise with unit RMS (Kellet's economy filter over white noise).
fn pink_noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = rng.sample(StandardNormal);
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let rms = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    for v in out.iter_mut() {
        *v = (*v - mean) / rms.max(1e-12);
    }
    out
}

/// One recording expressing the listed couplings (indices into
/// `spec.planted`); healthy recordings should pass an empty list.
pub fn generate_recording_expressing(spec: &CohortSpec, expressed: &[usize], sample_seed: u64) -> Result<Recording> {
    spec.validate()?;
    let n = spec.n_samples_per_recording();
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut data = Array2::zeros((spec.channels, n));
    for c in 0..spec.channels {
        let pink = pink_noise(n, &mut rng);
        for (t, p) in pink.into_iter().enumerate() {
            let w: f64 = rng.sample(StandardNormal);
            data[[c, t]] = p + spec.noise_level * w;
        }
    }
    let phase_step = (TAU * spec.phase_diffusion_hz / spec.fs).sqrt();
    for &k in expressed {
        let p = spec
            .planted
            .get(k)
            .ok_or_else(|| Error::Index(format!("planted coupling {k} does not exist")))?;
        let f = spec.pipeline.bands[p.band].mean_freq();
        let amp = p.strength * spec.coupling_gain;
        let mut phase = rng.gen_range(0.0..TAU);
        for t in 0..n {
            let carrier = TAU * f * t as f64 / spec.fs + phase;
            data[[p.i, t]] += amp * carrier.cos();
            data[[p.j, t]] += amp * (carrier - TAU * p.lag).cos();
            phase += phase_step * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Recording::new(data, spec.fs, spec.channel_labels())
}

/// One recording of the given class; a pain recording expresses each planted
/// coupling with the cohort's expression probability.
pub fn generate_recording(spec: &CohortSpec, class_label: u8, sample_seed: u64) -> Result<Recording> {
    if class_label > 1 {
        return Err(Error::Argument(format!("class label must be 0 or 1, got {class_label}")));
    }
    if class_label == 0 {
        return generate_recording_expressing(spec, &[], sample_seed);
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(sample_seed, &[u64::MAX]));
    let expressed = spec.draw_expression(&mut rng);
    generate_recording_expressing(spec, &expressed, sample_seed)
}

/// Label and id of sample `index`: healthy samples first, then pain.
pub fn sample_identity(spec: &CohortSpec, index: usize) -> (u8, String) {
    if index < spec.n_per_class {
        (0, format!("healthy_{index:03}"))
    } else {
        (1, format!("pain_{:03}", index - spec.n_per_class))
    }
}

/// Every raw recording of the cohort with its label and sample id.
pub fn generate_recordings(spec: &CohortSpec) -> Result<Vec<(String, u8, Recording)>> {
    spec.validate()?;
    let plan = spec.expression_plan();
    (0..2 * spec.n_per_class)
        .into_par_iter()
        .map(|index| {
            let (label, id) = sample_identity(spec, index);
            let expressed: &[usize] = if label == 1 { &plan[index - spec.n_per_class] } else { &[] };
            let rec = generate_recording_expressing(spec, expressed, spec.sample_seed(index)).map_err(|e| e.for_sample(&id))?;
            Ok((id, label, rec))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub dataset: Dataset,
    pub ground_truth: Vec<usize>,
    pub summaries: Vec<PipelineSummary>,
}

/// Generate every recording, run the full signal pipeline on each, and
/// assemble the feature dataset.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let plan = spec.expression_plan();
    let rows: Vec<(String, u8, Vec<f64>, PipelineSummary)> = (0..2 * spec.n_per_class)
        .into_par_iter()
        .map(|index| {
            let (label, id) = sample_identity(spec, index);
            let expressed: &[usize] = if label == 1 { &plan[index - spec.n_per_class] } else { &[] };
            let run = || -> Result<(Vec<f64>, PipelineSummary)> {
                let rec = generate_recording_expressing(spec, expressed, spec.sample_seed(index))?;
                recording_features(&rec, &spec.pipeline)
            };
            let (features, summary) = run().map_err(|e| e.for_sample(&id))?;
            Ok((id, label, features, summary))
        })
        .collect::<Result<_>>()?;

    let layout = spec.layout();
    let d = layout.n_features();
    let mut x = Array2::zeros((rows.len(), d));
    let mut y = Vec::with_capacity(rows.len());
    let mut ids = Vec::with_capacity(rows.len());
    let mut summaries = Vec::with_capacity(rows.len());
    for (r, (id, label, features, summary)) in rows.into_iter().enumerate() {
        x.row_mut(r).assign(&ndarray::ArrayView1::from(&features));
        y.push(label);
        ids.push(id);
        summaries.push(summary);
    }
    let dataset = Dataset::with_layout(x, y, (0..d).collect(), ids, layout)?;
    Ok(Cohort {
        dataset,
        ground_truth: spec.ground_truth()?,
        summaries,
    })
}
