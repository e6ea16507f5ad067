//! Classification quality and reliability metrics: confusion matrix,
//! precision/recall/F1, Cohen's kappa, Matthews correlation, and Wald
//! confidence intervals.
//!
//! Kappa is `(P_o - P_e) / (1 - P_e)` with `P_o` the observed agreement and
//! `P_e` the agreement expected from the marginals. MCC uses the usual
//! four-factor denominator `sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))`, which keeps
//! it a correlation in `[-1, 1]`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// `K × K` counts, rows = actual class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

/// One-vs-rest reduction of a confusion matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    /// The same table with positive and negative roles exchanged.
    pub fn swapped(self) -> Self {
        BinaryCounts {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    pub fn as_matrix(self) -> ConfusionMatrix {
        ConfusionMatrix {
            k: 2,
            counts: vec![self.tp, self.fn_, self.fp, self.tn],
        }
    }
}

impl ConfusionMatrix {
    pub fn from_labels(actual: &[usize], predicted: &[usize], k: usize) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::Input(format!(
                "{} actual labels vs {} predictions",
                actual.len(),
                predicted.len()
            )));
        }
        if actual.is_empty() {
            return Err(Error::Input("confusion matrix needs at least one sample".into()));
        }
        if k < 2 {
            return Err(Error::Input(format!("need at least 2 classes, got {k}")));
        }
        let mut counts = vec![0u64; k * k];
        for (i, (&a, &p)) in actual.iter().zip(predicted).enumerate() {
            if a >= k || p >= k {
                return Err(Error::Input(format!(
                    "sample {i}: class ({a}, {p}) outside [0, {k})"
                )));
            }
            counts[a * k + p] += 1;
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if k < 2 || counts.len() != k * k {
            return Err(Error::Input(format!(
                "{} counts do not form a K×K matrix with K ≥ 2",
                counts.len()
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::Input("confusion matrix is empty".into()));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.k + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        self.counts[actual * self.k..(actual + 1) * self.k].iter().sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.k).map(|a| self.get(a, predicted)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    pub fn one_vs_rest(&self, class: usize) -> BinaryCounts {
        let tp = self.get(class, class);
        let fn_ = self.row_sum(class) - tp;
        let fp = self.col_sum(class) - tp;
        BinaryCounts {
            tp,
            fn_,
            fp,
            tn: self.total() - tp - fn_ - fp,
        }
    }

    /// Relabels classes: old class `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k];
        if perm.len() != self.k || perm.iter().any(|&p| p >= self.k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Input("not a permutation of the class ids".into()));
        }
        let mut counts = vec![0; self.k * self.k];
        for a in 0..self.k {
            for p in 0..self.k {
                counts[perm[a] * self.k + perm[p]] = self.get(a, p);
            }
        }
        Ok(ConfusionMatrix { k: self.k, counts })
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrfReport {
    pub per_class: Vec<ClassScores>,
    pub macro_avg: ClassScores,
}

/// Per-class precision, recall and F1; any `0/0` is taken as 0.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> PrfReport {
    let per_class: Vec<ClassScores> = (0..cm.classes())
        .map(|k| {
            let b = cm.one_vs_rest(k);
            let precision = ratio(b.tp, b.tp + b.fp);
            let recall = ratio(b.tp, b.tp + b.fn_);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScores {
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let n = per_class.len() as f64;
    let macro_avg = ClassScores {
        precision: per_class.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: per_class.iter().map(|s| s.f1).sum::<f64>() / n,
    };
    PrfReport {
        per_class,
        macro_avg,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kappa {
    /// Observed agreement (accuracy).
    pub p_o: f64,
    /// Chance agreement from the row and column marginals.
    pub p_e: f64,
    pub kappa: f64,
}

pub fn cohens_kappa(cm: &ConfusionMatrix) -> Kappa {
    let n = cm.total() as f64;
    let p_o = cm.trace() as f64 / n;
    let p_e = (0..cm.classes())
        .map(|k| cm.row_sum(k) as f64 * cm.col_sum(k) as f64)
        .sum::<f64>()
        / (n * n);
    // P_e = 1 only when every sample sits in one class on both axes
    let kappa = if p_e >= 1.0 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Kappa { p_o, p_e, kappa }
}

/// Kappa of each class against the rest.
pub fn per_class_kappa(cm: &ConfusionMatrix) -> Vec<Kappa> {
    (0..cm.classes())
        .map(|k| cohens_kappa(&cm.one_vs_rest(k).as_matrix()))
        .collect()
}

pub fn mcc_binary(b: BinaryCounts) -> f64 {
    let (tp, tn, fp, fn_) = (b.tp as f64, b.tn as f64, b.fp as f64, b.fn_ as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        ((tp * tn - fp * fn_) / den).clamp(-1.0, 1.0)
    }
}

/// One-vs-rest Matthews correlation for `class`.
pub fn matthews_cc(cm: &ConfusionMatrix, class: usize) -> f64 {
    mcc_binary(cm.one_vs_rest(class))
}

pub fn macro_mcc(cm: &ConfusionMatrix) -> f64 {
    (0..cm.classes()).map(|k| matthews_cc(cm, k)).sum::<f64>() / cm.classes() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Confidence {
    P90,
    #[default]
    P95,
    P99,
}

impl Confidence {
    pub fn z(self) -> f64 {
        match self {
            Confidence::P90 => 1.645,
            Confidence::P95 => 1.960,
            Confidence::P99 => 2.576,
        }
    }

    pub fn level(self) -> f64 {
        match self {
            Confidence::P90 => 0.90,
            Confidence::P95 => 0.95,
            Confidence::P99 => 0.99,
        }
    }
}

/// `mean ± z·s/√n` together with its inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub sd: f64,
    pub n: usize,
    pub z: f64,
    /// Set when `n = 1`: the interval collapses to the single value.
    pub degenerate: bool,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

pub fn confidence_interval(values: &[f64], confidence: Confidence) -> Result<Interval> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Input("confidence interval needs at least one value".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let z = confidence.z();
    if n == 1 {
        log::warn!("confidence interval over a single sample is degenerate");
        return Ok(Interval {
            lo: mean,
            hi: mean,
            mean,
            sd: 0.0,
            n,
            z,
            degenerate: true,
        });
    }
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let half = z * sd / (n as f64).sqrt();
    Ok(Interval {
        lo: mean - half,
        hi: mean + half,
        mean,
        sd,
        n,
        z,
        degenerate: false,
    })
}

/// What one confidence-interval sample is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CiUnit {
    /// Accuracy of each consecutive batch of this many windows.
    Batch(usize),
    /// 0/1 correctness of each window.
    Window,
}

impl Default for CiUnit {
    fn default() -> Self {
        CiUnit::Batch(64)
    }
}

impl FromStr for CiUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(CiUnit::default()),
            "window" => Ok(CiUnit::Window),
            _ => Err(Error::Usage(format!("unknown CI unit {s:?} (batch|window)"))),
        }
    }
}

/// Interval samples for `correct` (per-window correctness, in evaluation
/// order) under the chosen unit. A trailing partial batch is kept.
pub fn ci_samples(correct: &[bool], unit: CiUnit) -> Vec<f64> {
    let as_f = |c: &bool| if *c { 1.0 } else { 0.0 };
    match unit {
        CiUnit::Window => correct.iter().map(as_f).collect(),
        CiUnit::Batch(size) => correct
            .chunks(size.max(1))
            .map(|b| b.iter().map(as_f).sum::<f64>() / b.len() as f64)
            .collect(),
    }
}

/// Everything reported for one evaluation run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub prf: PrfReport,
    pub class_kappa: Vec<Kappa>,
    pub class_mcc: Vec<f64>,
    pub class_counts: Vec<BinaryCounts>,
    pub macro_mcc: f64,
    pub accuracy: f64,
    pub kappa: Kappa,
    pub interval: Interval,
    pub ci_unit: CiUnit,
}

impl EvalReport {
    pub fn from_predictions(
        actual: &[usize],
        predicted: &[usize],
        class_names: Vec<String>,
        ci_unit: CiUnit,
        confidence: Confidence,
    ) -> Result<Self> {
        let k = class_names.len();
        let confusion = ConfusionMatrix::from_labels(actual, predicted, k)?;
        let correct: Vec<bool> = actual.iter().zip(predicted).map(|(a, p)| a == p).collect();
        let interval = confidence_interval(&ci_samples(&correct, ci_unit), confidence)?;
        let class_mcc: Vec<f64> = (0..k).map(|c| matthews_cc(&confusion, c)).collect();
        Ok(EvalReport {
            prf: precision_recall_f1(&confusion),
            class_kappa: per_class_kappa(&confusion),
            class_counts: (0..k).map(|c| confusion.one_vs_rest(c)).collect(),
            macro_mcc: class_mcc.iter().sum::<f64>() / k as f64,
            class_mcc,
            accuracy: confusion.accuracy(),
            kappa: cohens_kappa(&confusion),
            interval,
            ci_unit,
            class_names,
            confusion,
        })
    }

    /// `class,precision,recall,f1,kappa,mcc`, one row per class.
    pub fn report_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1,kappa,mcc\n");
        for (i, name) in self.class_names.iter().enumerate() {
            let p = self.prf.per_class[i];
            writeln!(
                s,
                "{name},{:.4},{:.4},{:.4},{:.4},{:.4}",
                p.precision, p.recall, p.f1, self.class_kappa[i].kappa, self.class_mcc[i]
            )
            .unwrap();
        }
        s
    }

    /// Header row of class names, then one row of counts per actual class.
    pub fn confusion_csv(&self) -> String {
        let k = self.confusion.classes();
        let mut s = self.class_names.join(",");
        s.push('\n');
        for a in 0..k {
            let row: Vec<String> = (0..k).map(|p| self.confusion.get(a, p).to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn summary_line(&self) -> String {
        format!(
            "accuracy={:.4} kappa={:.4} macro_mcc={:.4} ci=[{:.4},{:.4}]",
            self.accuracy, self.kappa.kappa, self.macro_mcc, self.interval.lo, self.interval.hi
        )
    }
}
