//! Confusion matrices and precision / recall / F1 under micro, macro and
//! weighted averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("confusion matrix must be square"));
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    /// Predicted as `class` but gold is something else.
    pub fn false_positives(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum::<u64>() - self.counts[class][class]
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        self.counts[class].iter().sum::<u64>() - self.counts[class][class]
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }
}

pub fn confusion(gold: &[usize], predicted: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if gold.len() != predicted.len() {
        return Err(Error::Dimension {
            context: "gold vs predicted labels",
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(num_classes);
    for (&g, &p) in gold.iter().zip(predicted) {
        if g >= num_classes || p >= num_classes {
            return Err(Error::invalid(format!("class id out of range 0..{num_classes}: ({g}, {p})")));
        }
        cm.counts[g][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    #[serde(flatten)]
    pub scores: Prf,
    /// Some ratio had a zero denominator and was reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub micro: Prf,
    pub macro_avg: Prf,
    pub weighted: Prf,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Micro,
    Macro,
    Weighted,
}

impl std::str::FromStr for Averaging {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "micro" => Ok(Self::Micro),
            "macro" => Ok(Self::Macro),
            "weighted" => Ok(Self::Weighted),
            other => Err(Error::invalid(format!("unknown averaging mode {other:?}"))),
        }
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> (f64, bool) {
    if p + r == 0.0 {
        (0.0, true)
    } else {
        (2.0 * p * r / (p + r), false)
    }
}

/// `class_names` may be empty, in which case classes are named by index.
pub fn metrics(cm: &ConfusionMatrix, class_names: &[&str]) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("cannot compute metrics from an empty confusion matrix"));
    }
    let k = cm.num_classes();
    let mut per_class = Vec::with_capacity(k);
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for c in 0..k {
        let (t, f, n) = (cm.true_positives(c), cm.false_positives(c), cm.false_negatives(c));
        tp += t;
        fp += f;
        fneg += n;
        let (precision, u1) = ratio(t, t + f);
        let (recall, u2) = ratio(t, t + n);
        let (f1, u3) = harmonic(precision, recall);
        per_class.push(ClassMetrics {
            class: class_names.get(c).map_or_else(|| c.to_string(), |s| s.to_string()),
            support: cm.support(c),
            scores: Prf { precision, recall, f1 },
            undefined: u1 || u2 || u3,
        });
    }
    let (mp, _) = ratio(tp, tp + fp);
    let (mr, _) = ratio(tp, tp + fneg);
    // Exact identity: tp + fp = tp + fn = total for single-label data, so
    // the harmonic mean of two equal values is returned as that value.
    let mf = if mp == mr { mp } else { harmonic(mp, mr).0 };

    let mean = |weight: &dyn Fn(&ClassMetrics) -> f64| {
        let norm: f64 = per_class.iter().map(weight).sum();
        let avg = |get: fn(&Prf) -> f64| per_class.iter().map(|m| weight(m) * get(&m.scores)).sum::<f64>() / norm;
        Prf {
            precision: avg(|s| s.precision),
            recall: avg(|s| s.recall),
            f1: avg(|s| s.f1),
        }
    };
    let macro_avg = mean(&|_| 1.0);
    let weighted = mean(&|m| m.support as f64);
    Ok(MetricsReport {
        total,
        accuracy: cm.correct() as f64 / total as f64,
        per_class,
        micro: Prf {
            precision: mp,
            recall: mr,
            f1: mf,
        },
        macro_avg,
        weighted,
        confusion: cm.clone(),
    })
}

impl MetricsReport {
    pub fn averaged(&self, mode: Averaging) -> Prf {
        match mode {
            Averaging::Micro => self.micro,
            Averaging::Macro => self.macro_avg,
            Averaging::Weighted => self.weighted,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One table row: `NB | Bi-gram | 90.1 88.0 89.0` (percent, one decimal).
pub fn format_row(model: &str, features: &str, scores: &Prf) -> String {
    format!(
        "{model} | {features} | {:.1} {:.1} {:.1}",
        scores.precision * 100.0,
        scores.recall * 100.0,
        scores.f1 * 100.0
    )
}

/// Aligned plain-text table of `(model, features, scores)` rows.
pub fn format_table(title: &str, rows: &[(String, String, Prf)]) -> String {
    let mw = rows.iter().map(|r| r.0.len()).chain(["Algorithms".len()]).max().unwrap_or(0);
    let fw = rows
        .iter()
        .map(|r| r.1.chars().count())
        .chain(["Features".len()])
        .max()
        .unwrap_or(0);
    let mut out = format!("{title}\n");
    out.push_str(&format!("{:<mw$} | {:<fw$} | {:>5} {:>5} {:>5}\n", "Algorithms", "Features", "P", "R", "F1"));
    for (model, features, s) in rows {
        out.push_str(&format!(
            "{model:<mw$} | {features:<fw$} | {:>5.1} {:>5.1} {:>5.1}\n",
            s.precision * 100.0,
            s.recall * 100.0,
            s.f1 * 100.0
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.rows(), &[vec![1, 1], vec![0, 1]]);
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.rows(), &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(confusion(&[], &[], 3).unwrap(), ConfusionMatrix::zeros(3));
        assert!(confusion(&[0], &[], 2).is_err());
        assert!(confusion(&[2], &[0], 2).is_err());
    }

    #[test]
    fn hand_counted_two_class() {
        let cm = ConfusionMatrix::from_counts(vec![vec![2, 1], vec![0, 3]]).unwrap();
        let m = metrics(&cm, &[]).unwrap();
        for v in [m.accuracy, m.micro.precision, m.micro.recall, m.micro.f1] {
            assert_abs_diff_eq!(v, 5.0 / 6.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(m.per_class[0].scores.precision, 1.0);
        assert_abs_diff_eq!(m.per_class[0].scores.recall, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.per_class[1].scores.precision, 0.75);
        assert_abs_diff_eq!(m.per_class[1].scores.recall, 1.0);
        assert_abs_diff_eq!(m.weighted.recall, 5.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn diagonal_is_perfect_and_empty_is_error() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![0, 4]]).unwrap();
        let m = metrics(&cm, &["a", "b"]).unwrap();
        for p in [m.micro, m.macro_avg, m.weighted] {
            assert_eq!(p, Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        }
        assert_eq!(m.per_class[1].class, "b");
        assert!(metrics(&ConfusionMatrix::zeros(3), &[]).is_err());
    }

    #[test]
    fn missing_class_is_flagged() {
        let cm = confusion(&[0, 0, 1], &[0, 0, 1], 3).unwrap();
        let m = metrics(&cm, &[]).unwrap();
        assert!(m.per_class[2].undefined);
        assert_eq!(m.per_class[2].scores.f1, 0.0);
        assert!(!m.per_class[0].undefined);
    }

    #[test]
    fn row_format() {
        let s = Prf { precision: 0.9083, recall: 0.934, f1: 0.92 };
        assert_eq!(format_row("NB", "Bi-gram", &s), "NB | Bi-gram | 90.8 93.4 92.0");
        let t = format_table("Sentiment", &[("NB".into(), "Uni-gram".into(), s)]);
        assert!(t.lines().nth(2).unwrap().ends_with(" 90.8  93.4  92.0"));
    }

    fn labels() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
        (2usize..5).prop_flat_map(|k| {
            (1usize..=20).prop_flat_map(move |n| {
                (Just(k), prop::collection::vec(0..k, n), prop::collection::vec(0..k, n))
            })
        })
    }

    proptest! {
        #[test]
        fn agrees_with_per_document_counting((k, gold, pred) in labels()) {
            let m = metrics(&confusion(&gold, &pred, k).unwrap(), &[]).unwrap();
            for c in 0..k {
                let tp = gold.iter().zip(&pred).filter(|(g, p)| **g == c && **p == c).count() as f64;
                let fp = gold.iter().zip(&pred).filter(|(g, p)| **g != c && **p == c).count() as f64;
                let fneg = gold.iter().zip(&pred).filter(|(g, p)| **g == c && **p != c).count() as f64;
                let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
                prop_assert!((m.per_class[c].scores.precision - p).abs() < 1e-12);
                prop_assert!((m.per_class[c].scores.recall - r).abs() < 1e-12);
            }
            let acc = gold.iter().zip(&pred).filter(|(g, p)| g == p).count() as f64 / gold.len() as f64;
            prop_assert_eq!(m.accuracy, acc);
        }

        #[test]
        fn micro_identity_is_exact((k, gold, pred) in labels()) {
            let m = metrics(&confusion(&gold, &pred, k).unwrap(), &[]).unwrap();
            prop_assert_eq!(m.micro.precision, m.accuracy);
            prop_assert_eq!(m.micro.recall, m.accuracy);
            prop_assert_eq!(m.micro.f1, m.accuracy);
        }

        #[test]
        fn values_in_unit_interval((k, gold, pred) in labels()) {
            let m = metrics(&confusion(&gold, &pred, k).unwrap(), &[]).unwrap();
            let all = m.per_class.iter().map(|c| c.scores).chain([m.micro, m.macro_avg, m.weighted]);
            for s in all {
                for v in [s.precision, s.recall, s.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn relabeling_permutes_per_class((k, gold, pred) in labels(), shift in 1usize..4) {
            let perm = |c: usize| (c + shift) % k;
            let a = metrics(&confusion(&gold, &pred, k).unwrap(), &[]).unwrap();
            let g2: Vec<_> = gold.iter().map(|&c| perm(c)).collect();
            let p2: Vec<_> = pred.iter().map(|&c| perm(c)).collect();
            let b = metrics(&confusion(&g2, &p2, k).unwrap(), &[]).unwrap();
            for c in 0..k {
                prop_assert_eq!(a.per_class[c].scores, b.per_class[perm(c)].scores);
            }
            prop_assert_eq!(a.micro, b.micro);
            prop_assert!((a.macro_avg.f1 - b.macro_avg.f1).abs() < 1e-12);
        }
    }
}
