//! ROC analysis for one-class scores. Abnormal is the positive class and a
//! score at or above the threshold is called abnormal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub score: f64,
    pub label: Label,
}

impl LabeledScore {
    pub fn new(score: f64, label: Label) -> Self {
        LabeledScore { score, label }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least one normal and one abnormal score (got {normal} normal, {abnormal} abnormal)")]
    SingleClass { normal: usize, abnormal: usize },
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores at or above this value are called abnormal. The first point
    /// uses `+inf` and calls nothing abnormal.
    #[serde(with = "threshold_repr")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub eer: f64,
    pub eer_threshold: f64,
}

/// ROC curve with one point per distinct score, trapezoidal AUC, and an EER
/// interpolated between the two points where `fpr` crosses `1 - tpr`.
pub fn roc(scores: &[LabeledScore]) -> Result<RocCurve, MetricsError> {
    if let Some(index) = scores.iter().position(|s| !s.score.is_finite()) {
        return Err(MetricsError::NonFinite { index });
    }
    let positives = scores.iter().filter(|s| s.label == Label::Abnormal).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass {
            normal: negatives,
            abnormal: positives,
        });
    }

    let mut sorted: Vec<&LabeledScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].score;
        while i < sorted.len() && sorted[i].score == threshold {
            match sorted[i].label {
                Label::Abnormal => tp += 1,
                Label::Normal => fp += 1,
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum();
    let (eer, eer_threshold) = equal_error(&points);
    Ok(RocCurve {
        points,
        auc,
        eer,
        eer_threshold,
    })
}

/// Returns the interpolated EER and the threshold of the bracketing ROC point
/// whose `|fpr - fnr|` is smaller.
fn equal_error(points: &[RocPoint]) -> (f64, f64) {
    let gap = |p: &RocPoint| p.fpr - (1.0 - p.tpr);
    // gap is -1 at (0,0), +1 at (1,1) and nondecreasing along the curve.
    let hi = points.iter().position(|p| gap(p) >= 0.0).unwrap_or(points.len() - 1);
    if hi == 0 || gap(&points[hi]) == 0.0 {
        return (points[hi].fpr, points[hi].threshold);
    }
    let (a, b) = (points[hi - 1], points[hi]);
    let (ga, gb) = (gap(&a), gap(&b));
    let t = -ga / (gb - ga);
    let eer = a.fpr + t * (b.fpr - a.fpr);
    let nearest = if ga.abs() < gb.abs() && a.threshold.is_finite() { a } else { b };
    (eer, nearest.threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn at_threshold(scores: &[LabeledScore], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for s in scores {
            match (s.score >= threshold, s.label) {
                (true, Label::Abnormal) => c.tp += 1,
                (true, Label::Normal) => c.fp += 1,
                (false, Label::Normal) => c.tn += 1,
                (false, Label::Abnormal) => c.fn_ += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub eer: f64,
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Set when `tp + fp = 0`; precision (and F1) are then reported as 0.
    pub precision_undefined: bool,
}

impl MetricReport {
    pub fn from_confusion(c: Confusion, auc: f64, eer: f64, threshold: f64) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let sensitivity = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        let precision_undefined = c.tp + c.fp == 0;
        let precision = ratio(c.tp, c.tp + c.fp);
        let accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn_);
        let f1 = if precision + sensitivity > 0.0 {
            2.0 * precision * sensitivity / (precision + sensitivity)
        } else {
            0.0
        };
        MetricReport {
            auc,
            eer,
            threshold,
            sensitivity,
            specificity,
            precision,
            accuracy,
            f1,
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            precision_undefined,
        }
    }
}

pub fn report_at_eer(curve: &RocCurve, scores: &[LabeledScore]) -> MetricReport {
    let c = Confusion::at_threshold(scores, curve.eer_threshold);
    MetricReport::from_confusion(c, curve.auc, curve.eer, curve.eer_threshold)
}

/// ROC and EER report in one call.
pub fn evaluate(scores: &[LabeledScore]) -> Result<(RocCurve, MetricReport), MetricsError> {
    let curve = roc(scores)?;
    let report = report_at_eer(&curve, scores);
    Ok((curve, report))
}

/// Aligned text table with one named row per report.
pub fn format_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a MetricReport)>) -> String {
    let rows: Vec<_> = rows.into_iter().collect();
    let header = [
        "Index estimation", "AUC", "EER", "Sensitivity", "Specificity", "Precision", "Accuracy", "F1-score",
    ];
    let name_w = rows.iter().map(|(n, _)| n.len()).chain([header[0].len()]).max().unwrap_or(0);
    let mut out = format!("{:<name_w$}", header[0]);
    for h in &header[1..] {
        out.push_str(&format!("  {h:>11}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(name_w + 13 * 7));
    out.push('\n');
    for (name, m) in rows {
        out.push_str(&format!("{name:<name_w$}"));
        for v in [m.auc, m.eer, m.sensitivity, m.specificity, m.precision, m.accuracy, m.f1] {
            out.push_str(&format!("  {v:>11.3}"));
        }
        out.push('\n');
    }
    out
}

/// `threshold,fpr,tpr` rows.
pub fn roc_to_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    out
}

/// JSON has no infinity; the leading `+inf` threshold is written as a string.
mod threshold_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else if *v > 0.0 {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Text("-inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad threshold {t:?}"))),
        }
    }
}
