//! Run the preprocessing chain on one synthetic recording and report what
//! each stage did.

use connsel::signal::{apply_bandpass, apply_notch, epoch, median_rejection_threshold, reject_epochs, PipelineConfig};
use connsel::synth::{generate_recording, CohortSpec};

fn rms(x: ndarray::ArrayView1<f64>) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn main() -> connsel::Result<()> {
    let spec = CohortSpec { channels: 4, planted: vec![], ..CohortSpec::default() };
    let mut rec = generate_recording(&spec, 0, 7)?;

    // add mains hum to channel 0
    let fs = rec.fs();
    let mut data = rec.data().to_owned();
    for (t, v) in data.row_mut(0).iter_mut().enumerate() {
        *v += 2.0 * (2.0 * std::f64::consts::PI * 50.0 * t as f64 / fs).sin();
    }
    rec = connsel::signal::Recording::new(data, fs, rec.labels().to_vec())?;

    let cfg = PipelineConfig::default();
    let notched = apply_notch(&rec, 50.0, cfg.notch_q)?;
    let filtered = apply_bandpass(&notched, cfg.highpass_hz, cfg.lowpass_hz, cfg.filter_order)?;
    println!("channel 0 RMS: raw {:.3}, notched {:.3}, band-passed {:.3}",
        rms(rec.data().row(0)), rms(notched.data().row(0)), rms(filtered.data().row(0)));

    let epochs = epoch(&filtered, cfg.epoch_len_s, cfg.discard_head_s)?;
    let threshold = median_rejection_threshold(&epochs, 8.0);
    let kept = reject_epochs(&epochs, threshold)?;
    println!("{} s recording -> {} epochs of {} samples, {} kept below {threshold:.2} peak-to-peak",
        rec.duration_s(), epochs.n_epochs(), epochs.samples_per_epoch(), kept.n_epochs());
    Ok(())
}
