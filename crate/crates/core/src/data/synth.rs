//! Seeded synthetic sessions standing in for recorded sEMG.
//!
//! Class `k` on channel `c` is a sinusoid whose frequency, amplitude and
//! phase are keyed to `(k, c)`, plus Gaussian noise. Each class becomes one
//! session of `windows_per_class × window_len` samples with a constant label
//! and repetition indices cycling 0..9 per window-sized block.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{write_session, EmgSession, NUM_CLASSES};
use crate::error::{Error, Result};

pub const SYNTH_SAMPLING_RATE_HZ: f32 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub channels: usize,
    pub window_len: usize,
    pub windows_per_class: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 8,
            channels: 10,
            window_len: 20,
            windows_per_class: 200,
            noise_sd: 0.1,
            seed: 7,
        }
    }
}

/// Noise-free value of class `k`, channel `c` at sample `t`.
pub fn clean_signal(k: usize, c: usize, t: usize) -> f64 {
    let freq = 2.0 + ((11 * k + 5 * c) % 37) as f64; // Hz, below Nyquist at 100 Hz
    let amp = 0.5 + 0.25 * ((k + 2 * c) % 5) as f64;
    let phase = 2.0 * PI * ((3 * k + 7 * c) % 16) as f64 / 16.0;
    amp * (2.0 * PI * freq * t as f64 / SYNTH_SAMPLING_RATE_HZ as f64 + phase).sin()
}

pub fn make_synthetic(cfg: &SynthConfig) -> Result<Vec<EmgSession>> {
    if !(2..=NUM_CLASSES).contains(&cfg.num_classes) {
        return Err(Error::Config(format!(
            "synthetic class count must be in 2..={NUM_CLASSES}, got {}",
            cfg.num_classes
        )));
    }
    if !(1..=255).contains(&cfg.channels) || cfg.window_len == 0 || cfg.windows_per_class == 0 {
        return Err(Error::Config(
            "synthetic data needs 1..=255 channels and non-empty windows".into(),
        ));
    }
    let noise = Normal::new(0.0, cfg.noise_sd)
        .map_err(|e| Error::Config(format!("noise sd {}: {e}", cfg.noise_sd)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t_len = cfg.windows_per_class * cfg.window_len;
    let mut sessions = Vec::with_capacity(cfg.num_classes);
    for k in 0..cfg.num_classes {
        let mut samples = Vec::with_capacity(t_len * cfg.channels);
        for t in 0..t_len {
            for c in 0..cfg.channels {
                let n = if cfg.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                samples.push((clean_signal(k, c, t) + n) as f32);
            }
        }
        let repetitions = (0..t_len)
            .map(|t| ((t / cfg.window_len) % 10) as u8)
            .collect();
        sessions.push(EmgSession::new(
            1,
            k as u8,
            SYNTH_SAMPLING_RATE_HZ,
            cfg.channels,
            samples,
            vec![k as u16; t_len],
            repetitions,
        )?);
    }
    Ok(sessions)
}

/// File name used for a session inside a data directory.
pub fn session_file_name(s: &EmgSession) -> String {
    format!("s{:02}_e{:02}.esf", s.subject, s.exercise)
}

/// Generates the sessions and writes one `ESF1` file per class into `dir`.
pub fn write_synthetic(dir: impl AsRef<Path>, cfg: &SynthConfig) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    make_synthetic(cfg)?
        .iter()
        .map(|s| {
            let path = dir.join(session_file_name(s));
            write_session(s, &path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_session, make_windows, TransitionPolicy};

    #[test]
    fn noiseless_windows_follow_the_clean_signal() {
        let cfg = SynthConfig {
            num_classes: 3,
            channels: 2,
            window_len: 5,
            windows_per_class: 4,
            noise_sd: 0.0,
            seed: 1,
        };
        let sessions = make_synthetic(&cfg).unwrap();
        let w = make_windows(&sessions[2], 5, 5, TransitionPolicy::Majority).unwrap();
        // second window equals the first one shifted by five samples of phase
        let second = &w.windows[1];
        for t in 0..5 {
            for c in 0..2 {
                let v = second.values.data()[t * 2 + c];
                assert_eq!(v, clean_signal(2, c, t + 5) as f32);
            }
        }
        assert!(w.windows.iter().all(|w| w.label == 2));
        let reps: Vec<u8> = w.windows.iter().map(|w| w.repetition).collect();
        assert_eq!(reps, vec![0, 1, 2, 3]);
    }

    #[test]
    fn written_files_validate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { windows_per_class: 3, ..Default::default() };
        let files = write_synthetic(dir.path(), &cfg).unwrap();
        assert_eq!(files.len(), 8);
        let s = load_session(&files[5]).unwrap();
        assert_eq!((s.len(), s.channels(), s.exercise), (60, 10, 5));
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = SynthConfig { windows_per_class: 2, ..Default::default() };
        assert_eq!(make_synthetic(&cfg).unwrap(), make_synthetic(&cfg).unwrap());
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(make_synthetic(&cfg).unwrap(), make_synthetic(&other).unwrap());
        assert!(make_synthetic(&SynthConfig { num_classes: 1, ..cfg }).is_err());
    }
}
