//! Single-frequency cross spectra and the corrected imaginary PLV.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{BandSpec, EpochSet};
use crate::error::{Error, Result};

/// Denominators below this are treated as pure zero-lag coupling.
const ZERO_LAG_EPS: f64 = 1e-9;

/// Hann-windowed DFT kernel for one frequency and epoch length.
#[derive(Debug, Clone)]
pub struct SpectralProbe {
    kernel: Vec<Complex64>,
}

impl SpectralProbe {
    pub fn new(freq: f64, fs: f64, n: usize) -> Result<Self> {
        let nyquist = fs / 2.0;
        if !(freq >= 0.0 && freq < nyquist) {
            return Err(Error::InvalidFrequency { freq, nyquist });
        }
        // periodic Hann: integer-cycle tones leak nothing into other bins
        let kernel = (0..n)
            .map(|i| {
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
                Complex64::from_polar(w, -2.0 * PI * freq * i as f64 / fs)
            })
            .collect();
        Ok(Self { kernel })
    }

    pub fn coefficient<'a>(&self, x: impl IntoIterator<Item = &'a f64>) -> Complex64 {
        self.kernel.iter().zip(x).map(|(k, &v)| k * v).sum()
    }
}

/// Cross-spectral density of one channel pair in one epoch at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSpectrum(pub Complex64);

impl CrossSpectrum {
    pub fn value(&self) -> Complex64 {
        self.0
    }

    /// Zero (or non-finite) spectra carry no phase and are skipped by ciPLV.
    pub fn is_degenerate(&self) -> bool {
        let m = self.0.norm();
        m == 0.0 || !m.is_finite()
    }
}

fn check_channel(es: &EpochSet, ch: usize) -> Result<()> {
    if ch >= es.n_channels() {
        return Err(Error::Index(format!(
            "channel {ch} out of range for {} channels",
            es.n_channels()
        )));
    }
    Ok(())
}

/// `X(f) * conj(Y(f))` for one epoch.
pub fn cross_spectrum(es: &EpochSet, x: usize, y: usize, freq: f64, epoch_idx: usize) -> Result<CrossSpectrum> {
    check_channel(es, x)?;
    check_channel(es, y)?;
    if epoch_idx >= es.n_epochs() {
        return Err(Error::Index(format!(
            "epoch {epoch_idx} out of range for {} epochs",
            es.n_epochs()
        )));
    }
    let probe = SpectralProbe::new(freq, es.fs(), es.samples_per_epoch())?;
    let epoch = es.epoch(epoch_idx);
    let cx = probe.coefficient(epoch.row(x));
    let cy = probe.coefficient(epoch.row(y));
    Ok(CrossSpectrum(cx * cy.conj()))
}

/// ciPLV estimate together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ciplv {
    pub value: f64,
    /// Every usable epoch had a purely real, unit-ratio spectrum.
    pub zero_lag: bool,
    pub excluded_epochs: usize,
}

/// ciPLV over a set of per-epoch cross spectra. Degenerate spectra are
/// excluded from both averages.
pub fn ciplv_from_spectra(spectra: &[CrossSpectrum]) -> Option<Ciplv> {
    let (mut re, mut im, mut used) = (0.0, 0.0, 0usize);
    for s in spectra.iter().filter(|s| !s.is_degenerate()) {
        let m = s.0.norm();
        re += s.0.re / m;
        im += s.0.im / m;
        used += 1;
    }
    if used == 0 {
        return None;
    }
    let excluded_epochs = spectra.len() - used;
    let (re, im) = (re / used as f64, im / used as f64);
    let denom = (1.0 - re * re).max(0.0).sqrt();
    if denom < ZERO_LAG_EPS {
        return Some(Ciplv {
            value: 0.0,
            zero_lag: true,
            excluded_epochs,
        });
    }
    Some(Ciplv {
        value: (im.abs() / denom).clamp(0.0, 1.0),
        zero_lag: false,
        excluded_epochs,
    })
}

/// Corrected imaginary phase-locking value between channels `x` and `y`,
/// averaging over all epochs.
pub fn ciplv(es: &EpochSet, x: usize, y: usize, freq: f64) -> Result<Ciplv> {
    check_channel(es, x)?;
    check_channel(es, y)?;
    let probe = SpectralProbe::new(freq, es.fs(), es.samples_per_epoch())?;
    let spectra: Vec<CrossSpectrum> = (0..es.n_epochs())
        .map(|e| {
            let epoch = es.epoch(e);
            CrossSpectrum(probe.coefficient(epoch.row(x)) * probe.coefficient(epoch.row(y)).conj())
        })
        .collect();
    let out = ciplv_from_spectra(&spectra).ok_or(Error::DegenerateSpectrum { x, y, freq })?;
    if out.excluded_epochs > 0 {
        log::warn!(
            "ciPLV {x}/{y} at {freq} Hz: {} degenerate epoch(s) excluded",
            out.excluded_epochs
        );
    }
    Ok(out)
}

/// One ciPLV per (channel pair, band), pair-major then band, each evaluated at
/// the band's mean frequency.
pub fn extract_connectivity_features(es: &EpochSet, bands: &[BandSpec]) -> Result<Vec<f64>> {
    let n_ch = es.n_channels();
    let n_ep = es.n_epochs();
    // coeffs[band][epoch * n_ch + channel]
    let coeffs: Vec<Vec<Complex64>> = bands
        .iter()
        .map(|band| {
            let probe = SpectralProbe::new(band.mean_freq(), es.fs(), es.samples_per_epoch())?;
            let mut out = Vec::with_capacity(n_ep * n_ch);
            for e in 0..n_ep {
                let epoch = es.epoch(e);
                for c in 0..n_ch {
                    out.push(probe.coefficient(epoch.row(c)));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..n_ch)
        .flat_map(|i| (i + 1..n_ch).map(move |j| (i, j)))
        .collect();
    let per_pair: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            bands
                .iter()
                .zip(&coeffs)
                .map(|(band, c)| {
                    let spectra: Vec<CrossSpectrum> = (0..n_ep)
                        .map(|e| CrossSpectrum(c[e * n_ch + i] * c[e * n_ch + j].conj()))
                        .collect();
                    let est = ciplv_from_spectra(&spectra).ok_or(Error::DegenerateSpectrum {
                        x: i,
                        y: j,
                        freq: band.mean_freq(),
                    })?;
                    if est.excluded_epochs > 0 {
                        log::warn!(
                            "ciPLV {i}/{j} at {} Hz: {} degenerate epoch(s) excluded",
                            band.mean_freq(),
                            est.excluded_epochs
                        );
                    }
                    Ok(est.value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}
