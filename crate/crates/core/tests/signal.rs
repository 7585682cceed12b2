use std::f64::consts::PI;

use connsel::signal::*;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FS: f64 = 256.0;

fn noise_epochs(n_ep: usize, n_ch: usize, n: usize, seed: u64) -> EpochSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array3::from_shape_fn((n_ep, n_ch, n), |_| rng.sample::<f64, _>(StandardNormal));
    EpochSet::new(data, FS, n as f64 / FS, (0..n_ch).map(|c| format!("c{c}")).collect()).unwrap()
}

/// Direct real-arithmetic windowed DFT at one frequency.
fn dft(x: &[f64], freq: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / n).cos());
        let arg = 2.0 * PI * freq * i as f64 / FS;
        re += w * v * arg.cos();
        im -= w * v * arg.sin();
    }
    (re, im)
}

#[test]
fn cross_spectrum_matches_direct_dft() {
    let es = noise_epochs(2, 2, 2560, 42);
    for freq in [2.5, 6.0, 10.5, 21.5, 35.0] {
        for e in 0..2 {
            let got = cross_spectrum(&es, 0, 1, freq, e).unwrap().value();
            let ep = es.epoch(e);
            let (xr, xi) = dft(&ep.row(0).to_vec(), freq);
            let (yr, yi) = dft(&ep.row(1).to_vec(), freq);
            // x * conj(y)
            let (re, im) = (xr * yr + xi * yi, xi * yr - xr * yi);
            let scale = (re * re + im * im).sqrt();
            assert!((got.re - re).abs() <= 1e-9 * scale, "{freq} Hz");
            assert!((got.im - im).abs() <= 1e-9 * scale, "{freq} Hz");
        }
    }
}

/// ciPLV evaluated directly from the per-epoch relative phases.
fn ciplv_of_phases(phases: &[f64]) -> f64 {
    let n = phases.len() as f64;
    let re = phases.iter().map(|p| p.cos()).sum::<f64>() / n;
    let im = phases.iter().map(|p| p.sin()).sum::<f64>() / n;
    im.abs() / (1.0 - re * re).sqrt()
}

#[test]
fn ciplv_matches_phase_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let phases: Vec<f64> = (0..8).map(|_| rng.gen_range(0.2..2.0)).collect();
        let n = 2560;
        let data = Array3::from_shape_fn((phases.len(), 2, n), |(e, c, t)| {
            let arg = 2.0 * PI * 10.0 * t as f64 / FS;
            if c == 0 {
                (arg + phases[e]).cos()
            } else {
                arg.cos()
            }
        });
        let es = EpochSet::new(data, FS, 10.0, vec!["a".into(), "b".into()]).unwrap();
        let got = ciplv(&es, 0, 1, 10.0).unwrap().value;
        assert!((got - ciplv_of_phases(&phases)).abs() < 1e-9);
    }
    let closed = ciplv_of_phases(&[PI / 6.0, PI / 3.0, PI / 2.0]);
    assert!((closed - 0.8858).abs() < 1e-3);
}

#[test]
fn ciplv_is_symmetric_and_bounded() {
    let es = noise_epochs(6, 3, 1024, 7);
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let ab = ciplv(&es, a, b, 10.0).unwrap().value;
        let ba = ciplv(&es, b, a, 10.0).unwrap().value;
        assert!((ab - ba).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&ab));
    }
}

#[test]
fn features_agree_with_pairwise_ciplv() {
    let es = noise_epochs(5, 4, 1024, 9);
    let bands = canonical_bands();
    let feats = extract_connectivity_features(&es, &bands).unwrap();
    assert_eq!(feats.len(), 6 * bands.len());
    for i in 0..4 {
        for j in i + 1..4 {
            for (b, band) in bands.iter().enumerate() {
                let id = connsel::dataset::feature_index(i, j, b, 4, bands.len()).unwrap().id;
                let direct = ciplv(&es, i, j, band.mean_freq()).unwrap().value;
                assert!((feats[id] - direct).abs() < 1e-12);
            }
        }
    }
}

fn tone(freq: f64, seconds: f64) -> Recording {
    let n = (seconds * FS) as usize;
    let data = Array2::from_shape_fn((1, n), |(_, t)| (2.0 * PI * freq * t as f64 / FS).sin());
    Recording::new(data, FS, vec!["c".into()]).unwrap()
}

fn interior_rms(rec: &Recording) -> f64 {
    let trim = FS as usize;
    let row = rec.data().row(0).to_vec();
    let mid = &row[trim..row.len() - trim];
    (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt()
}

/// Squared magnitude of the prewarped digital Butterworth band-pass, i.e.
/// the gain of one forward-backward pass.
fn butterworth_zero_phase_gain(f: f64, lo: f64, hi: f64, order: i32) -> f64 {
    let w = |x: f64| (PI * x / FS).tan();
    let lp = 1.0 / (1.0 + (w(f) / w(hi)).powi(2 * order));
    let hp = 1.0 / (1.0 + (w(lo) / w(f)).powi(2 * order));
    lp * hp
}

#[test]
fn filter_chain_follows_butterworth_response() {
    let cfg = PipelineConfig::default();
    for band in &cfg.bands {
        let f = band.mean_freq();
        let rec = tone(f, 10.0);
        let out = apply_bandpass(&apply_notch(&rec, 50.0, 30.0).unwrap(), 1.0, 40.0, 4).unwrap();
        let ratio = interior_rms(&out) / interior_rms(&rec);
        let expect = butterworth_zero_phase_gain(f, 1.0, 40.0, 4);
        assert!((ratio - expect).abs() <= 0.02, "{f} Hz: {ratio} vs {expect}");
        assert!(ratio > 0.7);
    }
    let alpha = tone(10.0, 10.0);
    let ratio = interior_rms(&apply_bandpass(&alpha, 1.0, 40.0, 4).unwrap()) / interior_rms(&alpha);
    assert!((ratio - 1.0).abs() <= 0.05, "{ratio}");
    let mains = tone(50.0, 10.0);
    let ratio = interior_rms(&apply_notch(&mains, 50.0, 30.0).unwrap()) / interior_rms(&mains);
    assert!(ratio <= 1.0 / 30.0, "{ratio}");
    let high = tone(80.0, 10.0);
    let ratio = interior_rms(&apply_bandpass(&high, 1.0, 40.0, 4).unwrap()) / interior_rms(&high);
    assert!(ratio <= 0.1, "{ratio}");
}

#[test]
fn pipeline_on_default_length_recording() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = (310.0 * FS) as usize;
    let data = Array2::from_shape_fn((3, n), |_| rng.sample::<f64, _>(StandardNormal));
    let rec = Recording::new(data, FS, vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let (es, summary) = preprocess(&rec, &PipelineConfig::default()).unwrap();
    assert_eq!(summary.epochs + summary.rejected, 30);
    assert_eq!(es.n_epochs(), summary.epochs);
    let (features, _) = recording_features(&rec, &PipelineConfig::default()).unwrap();
    assert_eq!(features.len(), 15);
    assert!(features.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn identical_channels_give_zero_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 2560;
    let base: Vec<f64> = (0..3 * n).map(|_| rng.sample(StandardNormal)).collect();
    let data = Array3::from_shape_fn((3, 4, n), |(e, _, t)| base[e * n + t]);
    let es = EpochSet::new(data, FS, 10.0, (0..4).map(|c| format!("c{c}")).collect()).unwrap();
    let feats = extract_connectivity_features(&es, &canonical_bands()).unwrap();
    assert!(feats.iter().all(|&v| v == 0.0));
}

#[test]
fn out_of_range_requests_fail() {
    let es = noise_epochs(2, 2, 512, 0);
    assert!(matches!(ciplv(&es, 0, 1, 200.0), Err(connsel::Error::InvalidFrequency { .. })));
    assert!(matches!(cross_spectrum(&es, 0, 1, 10.0, 2), Err(connsel::Error::Index(_))));
    assert!(matches!(ciplv(&es, 0, 5, 10.0), Err(connsel::Error::Index(_))));
}
