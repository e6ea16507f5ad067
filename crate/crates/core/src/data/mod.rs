//! Session ingestion, windowing, leakage-controlled splits and input
//! normalization.

mod esf;
mod labels;
mod synth;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use esf::{load_session, session_from_bytes, session_to_bytes, write_session, ESF_MAGIC, ESF_VERSION};
pub use labels::{LabelMap, CLASS_NAMES, NUM_CLASSES};
pub use synth::{make_synthetic, write_synthetic, SynthConfig};

use crate::error::{Error, Result};
use crate::model::Normalizer;
use crate::Tensor;

/// Largest repetition index a session may carry.
pub const MAX_REPETITION: u8 = 10;

/// One recording: `T` multi-channel samples with per-sample movement labels
/// and repetition indices.
#[derive(Clone, Debug, PartialEq)]
pub struct EmgSession {
    pub subject: u16,
    pub exercise: u8,
    pub sampling_rate_hz: f32,
    channels: usize,
    samples: Vec<f32>,
    labels: Vec<u16>,
    repetitions: Vec<u8>,
}

impl EmgSession {
    pub fn new(
        subject: u16,
        exercise: u8,
        sampling_rate_hz: f32,
        channels: usize,
        samples: Vec<f32>,
        labels: Vec<u16>,
        repetitions: Vec<u8>,
    ) -> Result<Self> {
        if !(1..=255).contains(&channels) {
            return Err(Error::format(5, format!("channel count {channels} outside 1..=255")));
        }
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) {
            return Err(Error::format(9, format!("sampling rate {sampling_rate_hz} must be positive")));
        }
        let t = labels.len();
        if repetitions.len() != t || samples.len() != t * channels {
            return Err(Error::dim(format!(
                "session streams disagree: {} samples for {channels} channels, {t} labels, {} repetitions",
                samples.len(),
                repetitions.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Label(format!(
                "sample {i} has label {} outside [0, {NUM_CLASSES})",
                labels[i]
            )));
        }
        if let Some(i) = repetitions.iter().position(|&r| r > MAX_REPETITION) {
            return Err(Error::Label(format!(
                "sample {i} has repetition {} above {MAX_REPETITION}",
                repetitions[i]
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("session contains non-finite samples".into()));
        }
        Ok(EmgSession {
            subject,
            exercise,
            sampling_rate_hz,
            channels,
            samples,
            labels,
            repetitions,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `[T × C]`, channel fastest.
    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn repetitions(&self) -> &[u8] {
        &self.repetitions
    }

    #[cfg(test)]
    pub(crate) fn labels_mut(&mut self) -> &mut Vec<u16> {
        &mut self.labels
    }
}

/// A fixed-length labeled segment of a session.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    /// `[L × C]`
    pub values: Tensor,
    pub label: usize,
    pub subject: u16,
    pub repetition: u8,
    /// Sample index of the first row within its session.
    pub offset: usize,
}

impl Window {
    /// The window as the model consumes it, `[C × L]`.
    pub fn model_input(&self) -> Tensor {
        self.values.transpose().expect("window values are rank 2")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TransitionPolicy {
    /// Most frequent label; ties go to the tied label seen first.
    #[default]
    Majority,
    /// Discard windows spanning more than one label.
    Drop,
}

impl fmt::Display for TransitionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionPolicy::Majority => "majority",
            TransitionPolicy::Drop => "drop",
        })
    }
}

impl FromStr for TransitionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "majority" => Ok(TransitionPolicy::Majority),
            "drop" => Ok(TransitionPolicy::Drop),
            _ => Err(Error::Config(format!("unknown transition policy {s:?}"))),
        }
    }
}

/// Output of [`make_windows`]. `warning` is set when the session is shorter
/// than one window.
#[derive(Clone, Debug, Default)]
pub struct Windowed {
    pub windows: Vec<Window>,
    pub warning: Option<String>,
}

/// Most frequent value; ties resolve to whichever tied value occurs first.
fn majority<V: Copy + Eq + Ord>(values: &[V]) -> V {
    let distinct: BTreeSet<V> = values.iter().copied().collect();
    let count = |v: V| values.iter().filter(|&&x| x == v).count();
    let best = distinct.iter().map(|&v| count(v)).max().unwrap_or(0);
    *values
        .iter()
        .find(|&&v| count(v) == best)
        .expect("non-empty window")
}

/// Cuts windows of `window_len` samples every `stride` samples.
pub fn make_windows(
    s: &EmgSession,
    window_len: usize,
    stride: usize,
    policy: TransitionPolicy,
) -> Result<Windowed> {
    if window_len == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "window length ({window_len}) and stride ({stride}) must be ≥ 1"
        )));
    }
    let t = s.len();
    if window_len > t {
        return Ok(Windowed {
            windows: Vec::new(),
            warning: Some(format!(
                "session (subject {}, exercise {}) has {t} samples, fewer than window length {window_len}",
                s.subject, s.exercise
            )),
        });
    }
    let c = s.channels;
    let mut windows = Vec::new();
    let mut offset = 0;
    while offset + window_len <= t {
        let labels = &s.labels[offset..offset + window_len];
        let mixed = labels.iter().any(|&l| l != labels[0]);
        if !(policy == TransitionPolicy::Drop && mixed) {
            let values = Tensor::new(
                vec![window_len, c],
                s.samples[offset * c..(offset + window_len) * c].to_vec(),
            )?;
            windows.push(Window {
                values,
                label: majority(labels) as usize,
                subject: s.subject,
                repetition: majority(&s.repetitions[offset..offset + window_len]),
                offset,
            });
        }
        offset += stride;
    }
    Ok(Windowed {
        windows,
        warning: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitMode {
    /// Seeded shuffle, then contiguous train/val/test cuts.
    Random { train: f64, val: f64, test: f64 },
    /// Assign each window by its repetition index; the rest is training.
    ByRepetition { test_reps: Vec<u8>, val_reps: Vec<u8> },
}

impl Default for SplitMode {
    fn default() -> Self {
        SplitMode::Random {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitMode {
    pub fn tag(&self) -> &'static str {
        match self {
            SplitMode::Random { .. } => "random",
            SplitMode::ByRepetition { .. } => "by-rep",
        }
    }

    /// Default repetition-wise protocol: repetitions 2, 5 and 7 for testing,
    /// 9 for validation.
    pub fn by_repetition_default() -> Self {
        SplitMode::ByRepetition {
            test_reps: vec![2, 5, 7],
            val_reps: vec![9],
        }
    }
}

/// Window indices for each partition.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub mode: SplitMode,
    pub seed: u64,
}

pub fn split_windows(windows: &[Window], mode: SplitMode, seed: u64) -> Result<DatasetSplit> {
    let n = windows.len();
    let (train, val, test) = match &mode {
        SplitMode::Random { train, val, test } => {
            let fr = [*train, *val, *test];
            if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "split fractions {fr:?} must be in [0, 1] and sum to 1"
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_train = ((train * n as f64).round() as usize).min(n);
            let n_val = ((val * n as f64).round() as usize).min(n - n_train);
            let test = idx.split_off(n_train + n_val);
            let val = idx.split_off(n_train);
            (idx, val, test)
        }
        SplitMode::ByRepetition { test_reps, val_reps } => {
            if let Some(r) = test_reps.iter().find(|r| val_reps.contains(r)) {
                return Err(Error::Config(format!(
                    "repetition {r} is listed for both test and validation"
                )));
            }
            let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for (i, w) in windows.iter().enumerate() {
                if test_reps.contains(&w.repetition) {
                    test.push(i);
                } else if val_reps.contains(&w.repetition) {
                    val.push(i);
                } else {
                    train.push(i);
                }
            }
            (train, val, test)
        }
    };
    Ok(DatasetSplit {
        train,
        val,
        test,
        mode,
        seed,
    })
}

/// Per-channel mean and (population) standard deviation over every sample of
/// the selected windows. The deviation is floored at `1e-6`.
pub fn fit_normalizer(windows: &[Window], indices: &[usize]) -> Result<Normalizer<f32>> {
    let first = indices
        .first()
        .ok_or_else(|| Error::Config("cannot fit normalizer on an empty training split".into()))?;
    let c = windows[*first].values.shape()[1];
    let mut sum = vec![0.0f64; c];
    let mut count = 0usize;
    for &i in indices {
        for row in windows[i].values.data().chunks_exact(c) {
            for (s, &v) in sum.iter_mut().zip(row) {
                *s += v as f64;
            }
            count += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0f64; c];
    for &i in indices {
        for row in windows[i].values.data().chunks_exact(c) {
            for ((q, &v), m) in sq.iter_mut().zip(row).zip(&mean) {
                *q += (v as f64 - m).powi(2);
            }
        }
    }
    Ok(Normalizer {
        mean: mean.iter().map(|&m| m as f32).collect(),
        std: sq
            .iter()
            .map(|&q| ((q / count as f64).sqrt() as f32).max(1e-6))
            .collect(),
    })
}

/// `*.esf` files in `dir`, sorted by file name.
pub fn session_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "esf"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every session in `dir` and windows them in (file, offset) order.
pub fn load_windows(
    dir: impl AsRef<Path>,
    window_len: usize,
    stride: usize,
    policy: TransitionPolicy,
) -> Result<Vec<Window>> {
    let files = session_files(&dir)?;
    if files.is_empty() {
        return Err(Error::Input(format!(
            "no .esf files in {}",
            dir.as_ref().display()
        )));
    }
    let mut out = Vec::new();
    for f in files {
        let s = load_session(&f).map_err(|e| match e {
            Error::Io { .. } => e,
            other => Error::Input(format!("{}: {other}", f.display())),
        })?;
        let w = make_windows(&s, window_len, stride, policy)?;
        if let Some(msg) = w.warning {
            log::warn!("{}: {msg}", f.display());
        }
        out.extend(w.windows);
    }
    Ok(out)
}
