//! ROC analysis, threshold choice, confusion matrix, score histogram and
//! quantile calibration.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("ROC needs both positive and negative labels")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("need at least {bins} samples for {bins} bins, got {n}")]
    TooFewForBins { n: usize, bins: usize },
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    Ok(())
}

/// +∞ (the "predict nothing" start of the curve) is written as `null`.
mod threshold_serde {
    use super::*;

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_f64(*t)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// One point per distinct score, swept from the highest score down. The
/// first point (threshold +∞) is (0, 0), the last is (1, 1). The area is
/// accumulated in integer counts and divided once.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve, MetricsError> {
    check(scores, labels)?;
    let n_pos = labels.iter().filter(|l| **l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of 1 / (n_pos · n_neg)
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: s,
        });
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc })
}

/// Threshold of the curve point closest (Euclidean) to the ideal corner
/// fpr = 0, tpr = 1. On equal distance the higher threshold wins.
pub fn select_threshold(curve: &RocCurve) -> f64 {
    let mut best = f64::INFINITY;
    let mut best_d = f64::INFINITY;
    for p in &curve.points {
        let d = p.fpr.hypot(1.0 - p.tpr);
        if d < best_d || (d == best_d && p.threshold > best) {
            best_d = d;
            best = p.threshold;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Share of actual positives in the sample.
    pub fn positive_share(&self) -> Option<f64> {
        ratio(self.tp + self.fn_, self.total())
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Serialized view of a confusion matrix with its derived rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub total: u64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub precision: Option<f64>,
    pub positive_share: Option<f64>,
}

impl ConfusionReport {
    pub fn new(cm: &ConfusionMatrix, threshold: f64) -> Self {
        Self {
            threshold,
            tp: cm.tp,
            fp: cm.fp,
            tn: cm.tn,
            fn_: cm.fn_,
            total: cm.total(),
            tpr: cm.tpr(),
            fpr: cm.fpr(),
            precision: cm.precision(),
            positive_share: cm.positive_share(),
        }
    }
}

/// Predicted positive iff score ≥ threshold.
pub fn confusion(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ConfusionMatrix, MetricsError> {
    check(scores, labels)?;
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (s, l) in scores.iter().zip(labels) {
        match (*s >= threshold, *l) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts[i]` covers [i·w, (i+1)·w); the last bin also holds 1.0.
    pub counts: Vec<u64>,
    pub median: f64,
    pub n: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn score_distribution(scores: &[f64], bin_width: f64) -> Result<Histogram, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let n_bins = (1.0 / bin_width).round().max(1.0) as usize;
    let mut counts = vec![0u64; n_bins];
    for s in scores {
        let i = ((s.clamp(0.0, 1.0) / bin_width).floor() as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        bin_width,
        counts,
        median: median(scores).expect("non-empty"),
        n: scores.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub bin: usize,
    pub count: usize,
    pub mean_predicted: f64,
    pub observed_rate: f64,
}

/// Equal-frequency bins over the score order (ties broken by input
/// position); bin sizes differ by at most one.
pub fn calibration(
    scores: &[f64],
    labels: &[bool],
    n_bins: usize,
) -> Result<Vec<CalibrationBin>, MetricsError> {
    check(scores, labels)?;
    let n = scores.len();
    if n_bins == 0 || n < n_bins {
        return Err(MetricsError::TooFewForBins { n, bins: n_bins });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    Ok((0..n_bins)
        .map(|b| {
            let idx = &order[b * n / n_bins..(b + 1) * n / n_bins];
            let count = idx.len();
            let sum_p: f64 = idx.iter().map(|&i| scores[i]).sum();
            let pos = idx.iter().filter(|&&i| labels[i]).count();
            CalibrationBin {
                bin: b,
                count,
                mean_predicted: sum_p / count as f64,
                observed_rate: pos as f64 / count as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// P(s⁺ > s⁻) + ½ P(s⁺ = s⁻) by enumerating every pair.
    fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_and_flat_auc() {
        let c = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(c.auc, 1.0);
        let c = roc_curve(&[0.3; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(c.auc, 0.5);
        assert_eq!(c.points.len(), 2);
        assert_eq!((c.points[1].fpr, c.points[1].tpr), (1.0, 1.0));
        assert_eq!(
            roc_curve(&[0.1, 0.2], &[true, true]),
            Err(MetricsError::SingleClass)
        );
    }

    #[test]
    fn auc_matches_pair_count_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(2..200);
            let levels = rng.gen_range(2..50);
            let scores: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0..levels) as f64 / levels as f64)
                .collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            labels[0] = true;
            labels[1] = false;
            let c = roc_curve(&scores, &labels).unwrap();
            assert!((c.auc - pair_count_auc(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_rule() {
        let curve = RocCurve {
            points: vec![
                RocPoint {
                    fpr: 0.0,
                    tpr: 0.0,
                    threshold: 1.0,
                },
                RocPoint {
                    fpr: 0.2,
                    tpr: 0.9,
                    threshold: 0.3,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    threshold: 0.0,
                },
            ],
            auc: 0.0,
        };
        // distances: 1.0, √(0.04 + 0.01) ≈ 0.2236, 1.0
        assert_eq!(select_threshold(&curve), 0.3);

        let perfect = roc_curve(&[0.9, 0.7, 0.4, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(select_threshold(&perfect), 0.7);
    }

    #[test]
    fn confusion_counts() {
        let scores = [0.1, 0.5, 0.5, 0.9];
        let labels = [false, true, false, true];
        let all = confusion(&scores, &labels, 0.0).unwrap();
        assert_eq!((all.fn_, all.tn), (0, 0));
        let none = confusion(&scores, &labels, 0.9 + 1e-9).unwrap();
        assert_eq!((none.tp, none.fp), (0, 0));
        let mid = confusion(&scores, &labels, 0.5).unwrap();
        assert_eq!(
            mid,
            ConfusionMatrix {
                tp: 2,
                fp: 1,
                tn: 1,
                fn_: 0
            }
        );
    }

    #[test]
    fn histogram_and_median() {
        let h = score_distribution(&[0.1, 0.1, 0.9], 0.05).unwrap();
        assert_eq!(h.median, 0.1);
        assert_eq!(h.counts.len(), 20);
        let grid: Vec<f64> = (0..20).map(|i| 0.025 + 0.05 * i as f64).collect();
        let h = score_distribution(&grid, 0.05).unwrap();
        assert!(h.counts.iter().all(|c| *c == 1));
        assert_eq!(median(&[1.0, 4.0, 2.0, 3.0]), Some(2.5));
        assert!(score_distribution(&[], 0.05).is_err());
    }

    #[test]
    fn median_matches_sort_and_pick() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.gen_range(1..40);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut s = v.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expect = if n % 2 == 1 {
                s[n / 2]
            } else {
                (s[n / 2 - 1] + s[n / 2]) / 2.0
            };
            assert_eq!(median(&v), Some(expect));
        }
    }

    #[test]
    fn calibration_bins() {
        let scores: Vec<f64> = (0..23).map(|i| i as f64 / 23.0).collect();
        let labels = vec![true; 23];
        let bins = calibration(&scores, &labels, 10).unwrap();
        let sizes: Vec<usize> = bins.iter().map(|b| b.count).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(bins.iter().all(|b| b.observed_rate == 1.0));
        assert!(matches!(
            calibration(&scores[..5], &labels[..5], 10),
            Err(MetricsError::TooFewForBins { .. })
        ));
    }

    #[test]
    fn roc_json_round_trip() {
        let c = roc_curve(&[0.9, 0.1], &[true, false]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("null"));
        let back: RocCurve = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    fn arb_dataset() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((0u8..20, any::<bool>()), 2..80).prop_map(|v| {
            let mut scores: Vec<f64> = v.iter().map(|(s, _)| *s as f64 / 20.0).collect();
            let mut labels: Vec<bool> = v.iter().map(|(_, l)| *l).collect();
            labels[0] = true;
            labels[1] = false;
            scores[0] = scores[0].max(0.01);
            (scores, labels)
        })
    }

    proptest! {
        #[test]
        fn auc_complement_and_monotone_invariance((scores, labels) in arb_dataset()) {
            let a = roc_curve(&scores, &labels).unwrap();
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            let b = roc_curve(&scores, &flipped).unwrap();
            prop_assert!((a.auc + b.auc - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.auc));
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert_eq!(roc_curve(&transformed, &labels).unwrap().auc, a.auc);
        }

        #[test]
        fn curve_is_monotone_and_consistent((scores, labels) in arb_dataset()) {
            let c = roc_curve(&scores, &labels).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
                prop_assert!(w[0].threshold >= w[1].threshold);
            }
            for p in &c.points {
                let cm = confusion(&scores, &labels, p.threshold).unwrap();
                prop_assert_eq!(cm.fpr().unwrap(), p.fpr);
                prop_assert_eq!(cm.tpr().unwrap(), p.tpr);
            }
        }

        #[test]
        fn confusion_monotone_in_threshold((scores, labels) in arb_dataset(), t in 0.0..1.0f64, dt in 0.0..0.5f64) {
            let lo = confusion(&scores, &labels, t).unwrap();
            let hi = confusion(&scores, &labels, t + dt).unwrap();
            prop_assert!(hi.tp <= lo.tp && hi.fp <= lo.fp);
            prop_assert_eq!(lo.total() as usize, scores.len());
        }
    }
}
