//! Multichannel recordings, preprocessing and phase-connectivity features.
//!
//! The pipeline is `notch -> band-limit -> epoch -> reject -> extract`, which
//! turns one recording into a vector of ciPLV values laid out pair-major,
//! band-minor (see [`crate::dataset::FeatureLayout`]).

mod filter;
mod io;
mod spectrum;

pub use filter::{apply_bandpass, apply_notch, Biquad, Sos};
pub use io::{read_header, read_recording, write_recording, RecordingHeader};
pub use spectrum::{
    ciplv, ciplv_from_spectra, cross_spectrum, extract_connectivity_features, Ciplv,
    CrossSpectrum, SpectralProbe,
};

use ndarray::{s, Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard 19-electrode 10-20 montage, in the order used for feature ids.
pub const TEN_TWENTY_19: [&str; 19] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz",
    "P4", "T6", "O1", "O2",
];

/// Channels x samples signal with its sampling rate and channel names.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    data: Array2<f64>,
    fs: f64,
    labels: Vec<String>,
}

impl Recording {
    pub fn new(data: Array2<f64>, fs: f64, labels: Vec<String>) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::Recording(format!("sampling rate must be positive, got {fs}")));
        }
        if labels.len() != data.nrows() {
            return Err(Error::Recording(format!(
                "{} channel labels for {} channels",
                labels.len(),
                data.nrows()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::Recording("recording has no samples".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::Recording(format!("duplicate channel label {label:?}")));
            }
        }
        Ok(Self { data, fs, labels })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn nyquist(&self) -> f64 {
        self.fs / 2.0
    }

    pub(crate) fn with_data(&self, data: Array2<f64>) -> Self {
        debug_assert_eq!(data.dim(), self.data.dim());
        Self {
            data,
            fs: self.fs,
            labels: self.labels.clone(),
        }
    }
}

/// Equal-length epochs cut from one recording: `epochs x channels x samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    epochs: Array3<f64>,
    fs: f64,
    epoch_len_s: f64,
    labels: Vec<String>,
}

impl EpochSet {
    pub fn new(epochs: Array3<f64>, fs: f64, epoch_len_s: f64, labels: Vec<String>) -> Result<Self> {
        let (n_epochs, n_channels, n_samples) = epochs.dim();
        if n_epochs == 0 {
            return Err(Error::InsufficientData("epoch set is empty".into()));
        }
        if labels.len() != n_channels {
            return Err(Error::Shape(format!(
                "{} labels for {n_channels} channels",
                labels.len()
            )));
        }
        if !(fs > 0.0) || n_samples != (epoch_len_s * fs).round() as usize || n_samples == 0 {
            return Err(Error::Shape(format!(
                "{n_samples} samples per epoch does not match {epoch_len_s} s at {fs} Hz"
            )));
        }
        Ok(Self {
            epochs,
            fs,
            epoch_len_s,
            labels,
        })
    }

    pub fn epochs(&self) -> &Array3<f64> {
        &self.epochs
    }

    pub fn epoch(&self, idx: usize) -> ArrayView2<'_, f64> {
        self.epochs.slice(s![idx, .., ..])
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn epoch_len_s(&self) -> f64 {
        self.epoch_len_s
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_epochs(&self) -> usize {
        self.epochs.dim().0
    }

    pub fn n_channels(&self) -> usize {
        self.epochs.dim().1
    }

    pub fn samples_per_epoch(&self) -> usize {
        self.epochs.dim().2
    }

    /// Largest single-channel peak-to-peak amplitude of each epoch.
    pub fn peak_to_peak(&self) -> Vec<f64> {
        self.epochs
            .outer_iter()
            .map(|epoch| {
                epoch
                    .outer_iter()
                    .map(|ch| {
                        let (lo, hi) = ch
                            .iter()
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                                (lo.min(v), hi.max(v))
                            });
                        hi - lo
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// A named frequency band. Connectivity is evaluated at its mean frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Argument(format!("band limits must satisfy 0 < lo < hi, got ({lo}, {hi})")));
        }
        Ok(Self {
            name: name.into(),
            lo,
            hi,
        })
    }

    pub fn mean_freq(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

/// delta, theta, alpha, beta and gamma.
pub fn canonical_bands() -> Vec<BandSpec> {
    [
        ("delta", 1.0, 4.0),
        ("theta", 4.0, 8.0),
        ("alpha", 8.0, 12.0),
        ("beta", 12.0, 30.0),
        ("gamma", 30.0, 40.0),
    ]
    .into_iter()
    .map(|(name, lo, hi)| BandSpec {
        name: name.to_string(),
        lo,
        hi,
    })
    .collect()
}

/// Drop `discard_head_s` seconds, then cut consecutive non-overlapping epochs.
/// A trailing partial epoch is dropped.
pub fn epoch(rec: &Recording, epoch_len_s: f64, discard_head_s: f64) -> Result<EpochSet> {
    if !(epoch_len_s > 0.0) || discard_head_s < 0.0 {
        return Err(Error::Argument(format!(
            "epoch length {epoch_len_s} s / head discard {discard_head_s} s"
        )));
    }
    let per_epoch = (epoch_len_s * rec.fs()).round() as usize;
    let head = (discard_head_s * rec.fs()).round() as usize;
    let available = rec.n_samples().saturating_sub(head);
    if per_epoch == 0 || available < per_epoch {
        return Err(Error::InsufficientData(format!(
            "{:.3} s recording cannot hold one {epoch_len_s} s epoch after discarding {discard_head_s} s",
            rec.duration_s()
        )));
    }
    let n_epochs = available / per_epoch;
    let n_channels = rec.n_channels();
    let data = rec.data();
    let mut epochs = Array3::zeros((n_epochs, n_channels, per_epoch));
    for e in 0..n_epochs {
        let start = head + e * per_epoch;
        epochs
            .slice_mut(s![e, .., ..])
            .assign(&data.slice(s![.., start..start + per_epoch]));
    }
    EpochSet::new(epochs, rec.fs(), epoch_len_s, rec.labels().to_vec())
}

/// Remove every epoch whose peak-to-peak amplitude on any channel exceeds
/// `peak_to_peak_max`. Order of the surviving epochs is preserved.
pub fn reject_epochs(es: &EpochSet, peak_to_peak_max: f64) -> Result<EpochSet> {
    if !(peak_to_peak_max > 0.0) {
        return Err(Error::Argument(format!(
            "peak-to-peak threshold must be positive, got {peak_to_peak_max}"
        )));
    }
    let keep: Vec<usize> = es
        .peak_to_peak()
        .iter()
        .enumerate()
        .filter(|(_, &ptp)| ptp <= peak_to_peak_max)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyEpochSet {
            threshold: peak_to_peak_max,
        });
    }
    let epochs = es.epochs.select(ndarray::Axis(0), &keep);
    EpochSet::new(epochs, es.fs, es.epoch_len_s, es.labels.clone())
}

/// Global threshold: `factor` times the median per-epoch peak-to-peak.
pub fn median_rejection_threshold(es: &EpochSet, factor: f64) -> f64 {
    let mut ptp = es.peak_to_peak();
    ptp.sort_by(f64::total_cmp);
    let n = ptp.len();
    let median = if n % 2 == 1 {
        ptp[n / 2]
    } else {
        0.5 * (ptp[n / 2 - 1] + ptp[n / 2])
    };
    factor * median
}

/// Preprocessing settings for [`preprocess`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub notch_hz: Option<f64>,
    pub notch_q: f64,
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
    pub filter_order: usize,
    pub epoch_len_s: f64,
    pub discard_head_s: f64,
    /// Reject epochs above this multiple of the median peak-to-peak.
    pub reject_factor: Option<f64>,
    pub bands: Vec<BandSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            notch_hz: Some(50.0),
            notch_q: 30.0,
            highpass_hz: 1.0,
            lowpass_hz: 40.0,
            filter_order: 4,
            epoch_len_s: 10.0,
            discard_head_s: 10.0,
            reject_factor: Some(8.0),
            bands: canonical_bands(),
        }
    }
}

/// Per-recording bookkeeping from [`preprocess`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub epochs: usize,
    pub rejected: usize,
    pub threshold: Option<f64>,
}

/// Filter, epoch and reject one recording.
pub fn preprocess(rec: &Recording, cfg: &PipelineConfig) -> Result<(EpochSet, PipelineSummary)> {
    let mut rec = rec.clone();
    if let Some(f0) = cfg.notch_hz {
        // a mains notch above Nyquist is meaningless for low-rate recordings
        if f0 < rec.nyquist() {
            rec = apply_notch(&rec, f0, cfg.notch_q)?;
        }
    }
    rec = apply_bandpass(&rec, cfg.highpass_hz, cfg.lowpass_hz, cfg.filter_order)?;
    let all = epoch(&rec, cfg.epoch_len_s, cfg.discard_head_s)?;
    let total = all.n_epochs();
    match cfg.reject_factor {
        Some(factor) => {
            let threshold = median_rejection_threshold(&all, factor);
            let kept = reject_epochs(&all, threshold)?;
            let summary = PipelineSummary {
                epochs: kept.n_epochs(),
                rejected: total - kept.n_epochs(),
                threshold: Some(threshold),
            };
            Ok((kept, summary))
        }
        None => Ok((
            all,
            PipelineSummary {
                epochs: total,
                rejected: 0,
                threshold: None,
            },
        )),
    }
}

/// Full pipeline: preprocess then extract one ciPLV feature vector.
pub fn recording_features(rec: &Recording, cfg: &PipelineConfig) -> Result<(Vec<f64>, PipelineSummary)> {
    let (es, summary) = preprocess(rec, cfg)?;
    let features = extract_connectivity_features(&es, &cfg.bands)?;
    Ok((features, summary))
}
