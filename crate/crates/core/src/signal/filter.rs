//! IIR filters as cascades of second-order sections, applied forward-backward.

use std::f64::consts::PI;

use ndarray::Array2;

use super::Recording;
use crate::error::{Error, Result};

/// One normalized second-order section (`a0 = 1`), transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    pub fn notch(f0: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized([1.0, -2.0 * c, 1.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    pub fn lowpass(fc: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(fc: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    /// First-order bilinear low-pass stored as a degenerate biquad.
    pub fn lowpass_first_order(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        Self {
            b: [k / (1.0 + k), k / (1.0 + k), 0.0],
            a: [(k - 1.0) / (k + 1.0), 0.0],
        }
    }

    pub fn highpass_first_order(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        Self {
            b: [1.0 / (1.0 + k), -1.0 / (1.0 + k), 0.0],
            a: [(k - 1.0) / (k + 1.0), 0.0],
        }
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State after an infinitely long constant input of value 1.
    fn unit_step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * y;
        let z1 = self.b[1] - self.a[0] * y + z2;
        [z1, z2]
    }

    /// Largest pole radius.
    fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            a2.sqrt()
        } else {
            let r = disc.sqrt();
            ((-a1 + r) / 2.0).abs().max(((-a1 - r) / 2.0).abs())
        }
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    sections: Vec<Biquad>,
}

/// Q factors of the conjugate pole pairs of an analog Butterworth prototype.
fn butterworth_qs(order: usize) -> Vec<f64> {
    (1..=order / 2)
        .map(|k| 1.0 / (2.0 * (PI * (2 * k - 1) as f64 / (2 * order) as f64).sin()))
        .collect()
}

impl Sos {
    pub fn new(sections: Vec<Biquad>) -> Self {
        Self { sections }
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn notch(f0: f64, q: f64, fs: f64) -> Self {
        Self::new(vec![Biquad::notch(f0, q, fs)])
    }

    pub fn butter_lowpass(order: usize, fc: f64, fs: f64) -> Self {
        let mut sections: Vec<Biquad> = butterworth_qs(order)
            .into_iter()
            .map(|q| Biquad::lowpass(fc, q, fs))
            .collect();
        if order % 2 == 1 {
            sections.push(Biquad::lowpass_first_order(fc, fs));
        }
        Self::new(sections)
    }

    pub fn butter_highpass(order: usize, fc: f64, fs: f64) -> Self {
        let mut sections: Vec<Biquad> = butterworth_qs(order)
            .into_iter()
            .map(|q| Biquad::highpass(fc, q, fs))
            .collect();
        if order % 2 == 1 {
            sections.push(Biquad::highpass_first_order(fc, fs));
        }
        Self::new(sections)
    }

    /// Samples for the slowest section's impulse response to decay by 1e-4.
    pub fn settle_len(&self) -> usize {
        self.sections
            .iter()
            .map(|s| {
                let r = s.pole_radius();
                if r <= 0.0 {
                    1
                } else if r >= 1.0 {
                    usize::MAX
                } else {
                    ((1e-4f64).ln() / r.ln()).ceil() as usize
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// Causal filtering, state initialised to the steady state of a constant
    /// input equal to `x[0]`.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let mut level = first;
        for section in &self.sections {
            let unit = section.unit_step_state();
            section.run(x, [unit[0] * level, unit[1] * level]);
            level *= section.dc_gain();
        }
    }

    /// Zero-phase forward-backward filtering with odd-extension padding long
    /// enough for the cascade to settle.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.settle_len().max(3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    fn filtfilt_rows(&self, data: ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros(data.dim());
        for (src, mut dst) in data.outer_iter().zip(out.outer_iter_mut()) {
            let row: Vec<f64> = src.iter().copied().collect();
            for (d, v) in dst.iter_mut().zip(self.filtfilt(&row)) {
                *d = v;
            }
        }
        out
    }
}

fn check_freq(freq: f64, fs: f64) -> Result<()> {
    let nyquist = fs / 2.0;
    if !(freq > 0.0 && freq < nyquist) {
        return Err(Error::InvalidFrequency { freq, nyquist });
    }
    Ok(())
}

/// Zero-phase biquad notch at `f0` with quality factor `q`.
pub fn apply_notch(rec: &Recording, f0: f64, q: f64) -> Result<Recording> {
    check_freq(f0, rec.fs())?;
    if !(q > 0.0) {
        return Err(Error::Argument(format!("notch quality factor must be positive, got {q}")));
    }
    let sos = Sos::notch(f0, q, rec.fs());
    Ok(rec.with_data(sos.filtfilt_rows(rec.data())))
}

/// Zero-phase Butterworth high-pass at `lo` followed by low-pass at `hi`.
pub fn apply_bandpass(rec: &Recording, lo: f64, hi: f64, order: usize) -> Result<Recording> {
    check_freq(lo, rec.fs())?;
    check_freq(hi, rec.fs())?;
    if lo >= hi {
        return Err(Error::Argument(format!("band edges must satisfy lo < hi, got {lo} >= {hi}")));
    }
    if order == 0 {
        return Err(Error::Argument("filter order must be at least 1".into()));
    }
    let hp = Sos::butter_highpass(order, lo, rec.fs());
    let lp = Sos::butter_lowpass(order, hi, rec.fs());
    let data = lp.filtfilt_rows(hp.filtfilt_rows(rec.data()).view());
    Ok(rec.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 256.0;

    fn tone(freq: f64, seconds: f64) -> Vec<f64> {
        let n = (seconds * FS) as usize;
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    /// RMS ratio over the interior, one second in from each edge where the
    /// forward-backward padding transients live.
    fn interior_ratio(y: &Recording, x: &[f64]) -> f64 {
        let edge = FS as usize;
        let y = y.data().row(0).to_vec();
        rms(&y[edge..y.len() - edge]) / rms(&x[edge..x.len() - edge])
    }

    fn rec(rows: Vec<Vec<f64>>) -> Recording {
        let n = rows[0].len();
        let labels = (0..rows.len()).map(|i| format!("ch{i}")).collect();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Recording::new(Array2::from_shape_vec((flat.len() / n, n), flat).unwrap(), FS, labels)
            .unwrap()
    }

    fn gain_db(sos: &Sos, f: f64) -> f64 {
        // |H(e^{jw})| by direct evaluation of each section
        let w = 2.0 * PI * f / FS;
        let z1 = num_complex::Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let h = sos.sections().iter().fold(num_complex::Complex64::new(1.0, 0.0), |acc, s| {
            acc * (s.b[0] + s.b[1] * z1 + s.b[2] * z2) / (1.0 + s.a[0] * z1 + s.a[1] * z2)
        });
        20.0 * h.norm().log10()
    }

    #[test]
    fn butterworth_is_3db_at_cutoff() {
        for order in 1..=5 {
            let lp = Sos::butter_lowpass(order, 40.0, FS);
            let hp = Sos::butter_highpass(order, 1.0, FS);
            assert!((gain_db(&lp, 40.0) + 3.0103).abs() < 1e-3, "order {order}");
            assert!((gain_db(&hp, 1.0) + 3.0103).abs() < 1e-3, "order {order}");
            assert!(gain_db(&lp, 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn notch_kills_mains_tone() {
        let x = tone(50.0, 10.0);
        let out = apply_notch(&rec(vec![x.clone()]), 50.0, 30.0).unwrap();
        let ratio = interior_ratio(&out, &x);
        assert!(ratio <= 1.0 / 30.0, "ratio {ratio}");
    }

    #[test]
    fn notch_passes_alpha_tone() {
        let x = tone(10.0, 10.0);
        let out = apply_notch(&rec(vec![x.clone()]), 50.0, 30.0).unwrap();
        let ratio = interior_ratio(&out, &x);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn zero_in_zero_out() {
        let out = apply_notch(&rec(vec![vec![0.0; 500]]), 50.0, 30.0).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        let out = apply_bandpass(&rec(vec![vec![0.0; 500]]), 1.0, 40.0, 4).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bandpass_removes_dc() {
        let out = apply_bandpass(&rec(vec![vec![3.0; 2560]]), 1.0, 40.0, 4).unwrap();
        let peak = out.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 3e-3, "peak {peak}");
    }

    #[test]
    fn bandpass_passband_and_stopband() {
        let x = tone(10.0, 10.0);
        let y = apply_bandpass(&rec(vec![x.clone()]), 1.0, 40.0, 4).unwrap();
        let ratio = interior_ratio(&y, &x);
        assert!((ratio - 1.0).abs() < 0.05, "passband ratio {ratio}");

        let x = tone(80.0, 10.0);
        let y = apply_bandpass(&rec(vec![x.clone()]), 1.0, 40.0, 4).unwrap();
        let ratio = interior_ratio(&y, &x);
        assert!(ratio <= 0.1, "stopband ratio {ratio}");
    }

    #[test]
    fn frequencies_checked_against_nyquist() {
        let r = rec(vec![vec![1.0; 100]]);
        assert!(matches!(apply_notch(&r, 128.0, 30.0), Err(Error::InvalidFrequency { .. })));
        assert!(matches!(
            apply_bandpass(&r, 1.0, 200.0, 4),
            Err(Error::InvalidFrequency { .. })
        ));
    }

    #[test]
    fn short_signals_do_not_panic() {
        let sos = Sos::butter_highpass(4, 1.0, FS);
        assert_eq!(sos.filtfilt(&[]).len(), 0);
        assert_eq!(sos.filtfilt(&[1.0]).len(), 1);
        assert_eq!(sos.filtfilt(&[1.0, 2.0, 3.0]).len(), 3);
    }
}
