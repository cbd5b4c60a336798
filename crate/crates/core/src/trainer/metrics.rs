use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedSample, SenseLabel, NUM_CLASSES};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Row total of the confusion matrix.
    pub support: usize,
}

/// Accuracy under the "any gold sense counts" rule, plus per-class scores.
///
/// A correct prediction is credited to the predicted class's confusion row;
/// a wrong one is charged to the first gold sense.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub per_class: Vec<ClassScores>,
    /// `confusion[gold][predicted]`
    pub confusion: Vec<Vec<usize>>,
    /// Mean cross-entropy against the training label, when computed.
    pub loss: Option<f64>,
}

impl Metrics {
    pub fn from_predictions(samples: &[EncodedSample], predicted: &[SenseLabel], losses: Option<&[f64]>) -> Self {
        assert_eq!(samples.len(), predicted.len(), "one prediction per sample");
        let mut confusion = vec![vec![0usize; NUM_CLASSES]; NUM_CLASSES];
        let mut correct = 0;
        for (s, &p) in samples.iter().zip(predicted) {
            let row = if s.is_correct(p) {
                correct += 1;
                p
            } else {
                s.gold.first().copied().unwrap_or(s.label)
            };
            confusion[row.id()][p.id()] += 1;
        }
        let total = samples.len();
        let per_class = (0..NUM_CLASSES)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let support: usize = confusion[c].iter().sum();
                let predicted: usize = confusion.iter().map(|r| r[c]).sum();
                let ratio = |n: f64, d: usize| if d == 0 { 0.0 } else { n / d as f64 };
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores { precision, recall, f1, support }
            })
            .collect();
        let loss = losses.filter(|l| !l.is_empty()).map(|l| l.iter().sum::<f64>() / l.len() as f64);
        Self {
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            correct,
            total,
            per_class,
            confusion,
            loss,
        }
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.accuracy
    }
}

/// `correct/total (xx.xx%)`
impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({:.2}%)", self.correct, self.total, self.percent())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SampleKind, Split};

    fn sample(gold: &[SenseLabel]) -> EncodedSample {
        EncodedSample {
            ids: vec![6],
            mask: vec![true],
            label: gold[0],
            gold: gold.to_vec(),
            kind: SampleKind::Pair,
            split: Split::Test,
            relation: 0,
        }
    }

    #[test]
    fn multi_gold_prediction_counts() {
        use SenseLabel::*;
        let samples = vec![sample(&[Conjunction, Expansion]), sample(&[Causation]), sample(&[EntRel])];
        let m = Metrics::from_predictions(&samples, &[Expansion, Causation, Conjunction], None);
        assert_eq!((m.correct, m.total), (2, 3));
        assert_eq!(m.confusion[Expansion.id()][Expansion.id()], 1);
        assert_eq!(m.confusion[EntRel.id()][Conjunction.id()], 1);
        let rows: usize = m.confusion.iter().flatten().sum();
        assert_eq!(rows, 3);
        assert_eq!(m.per_class[Causation.id()].f1, 1.0);
        assert_eq!(m.per_class[EntRel.id()].recall, 0.0);
    }

    #[test]
    fn display_matches_reporting_style() {
        let mut samples = vec![sample(&[SenseLabel::Conjunction]); 257];
        samples.extend(vec![sample(&[SenseLabel::EntRel]); 95]);
        let preds = vec![SenseLabel::Conjunction; 352];
        let m = Metrics::from_predictions(&samples, &preds, Some(&[1.0, 2.0]));
        assert_eq!(m.to_string(), "257/352 (73.01%)");
        assert_eq!(m.loss, Some(1.5));
    }
}
