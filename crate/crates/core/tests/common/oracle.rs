//! Brute-force reference implementations of the classification metrics,
//! written directly from label/prediction lists without a confusion matrix.

use consgrunet::metrics::{
    cohens_kappa, matthews_cc, precision_recall_f1, ConfusionMatrix,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kappa from agreement counted pair by pair: chance agreement is the
/// fraction of all (i, j) pairs with `actual[i] == predicted[j]`.
pub fn kappa_by_pairs(actual: &[usize], predicted: &[usize]) -> f64 {
    let n = actual.len() as f64;
    let p_o = actual.iter().zip(predicted).filter(|(a, p)| a == p).count() as f64 / n;
    let mut pairs = 0u64;
    for a in actual {
        for p in predicted {
            pairs += u64::from(a == p);
        }
    }
    let p_e = pairs as f64 / (n * n);
    if p_e >= 1.0 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

/// Pearson correlation of the indicator vectors `actual == k` and
/// `predicted == k`; 0 when either is constant.
pub fn mcc_by_pearson(actual: &[usize], predicted: &[usize], k: usize) -> f64 {
    let x: Vec<f64> = actual.iter().map(|&a| f64::from(u8::from(a == k))).collect();
    let y: Vec<f64> = predicted.iter().map(|&p| f64::from(u8::from(p == k))).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Precision, recall and F1 of class `k` from direct counts (0/0 → 0).
pub fn prf_by_counting(actual: &[usize], predicted: &[usize], k: usize) -> (f64, f64, f64) {
    let hit = actual.iter().zip(predicted).filter(|&(&a, &p)| a == k && p == k).count() as f64;
    let said = predicted.iter().filter(|&&p| p == k).count() as f64;
    let is = actual.iter().filter(|&&a| a == k).count() as f64;
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let (p, r) = (div(hit, said), div(hit, is));
    (p, r, div(2.0 * p * r, p + r))
}

pub fn random_instance(r: &mut ChaCha8Rng) -> (usize, Vec<usize>, Vec<usize>) {
    let k = r.gen_range(2..=6);
    let n = r.gen_range(1..=50);
    // bias predictions toward the truth so kappa spans a useful range
    let skill: f64 = r.gen();
    let actual: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
    let predicted = actual
        .iter()
        .map(|&a| if r.gen::<f64>() < skill { a } else { r.gen_range(0..k) })
        .collect();
    (k, actual, predicted)
}

pub struct OracleOutcome {
    pub instances: usize,
    pub max_dev: f64,
}

/// Compares library kappa, per-class MCC and P/R/F1 against the oracles
/// on `instances` seeded random problems.
pub fn metrics_oracle_suite(seed: u64, instances: usize) -> OracleOutcome {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev = 0.0f64;
    for _ in 0..instances {
        let (k, actual, predicted) = random_instance(&mut r);
        let cm = ConfusionMatrix::from_labels(&actual, &predicted, k).unwrap();
        max_dev = max_dev.max((cohens_kappa(&cm).kappa - kappa_by_pairs(&actual, &predicted)).abs());
        let prf = precision_recall_f1(&cm);
        for c in 0..k {
            max_dev = max_dev.max((matthews_cc(&cm, c) - mcc_by_pearson(&actual, &predicted, c)).abs());
            let (p, rc, f) = prf_by_counting(&actual, &predicted, c);
            let got = prf.per_class[c];
            max_dev = max_dev
                .max((got.precision - p).abs())
                .max((got.recall - rc).abs())
                .max((got.f1 - f).abs());
        }
    }
    OracleOutcome { instances, max_dev }
}

/// 53 balanced classes, `per_class` windows each, exactly `errors` of each
/// class predicted as a random other class.
pub fn skilled_stream(seed: u64, per_class: usize, errors: usize) -> (Vec<usize>, Vec<usize>) {
    const K: usize = 53;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut actual = Vec::with_capacity(K * per_class);
    let mut predicted = Vec::with_capacity(K * per_class);
    for k in 0..K {
        for i in 0..per_class {
            actual.push(k);
            predicted.push(if i < errors {
                (k + r.gen_range(1..K)) % K
            } else {
                k
            });
        }
    }
    // order must not matter to any metric
    let mut order: Vec<usize> = (0..actual.len()).collect();
    order.shuffle(&mut r);
    (
        order.iter().map(|&i| actual[i]).collect(),
        order.iter().map(|&i| predicted[i]).collect(),
    )
}
