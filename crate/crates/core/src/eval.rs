//! Label accuracy, FEVER score, and evidence precision/recall/F1.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::data::{EvidenceRef, Instance, Label, Prediction};
use crate::error::{Error, Result};

/// True iff some gold group is entirely contained in `predicted`.
pub fn evidence_correct(gold_groups: &[BTreeSet<EvidenceRef>], predicted: &[EvidenceRef]) -> bool {
    let predicted: BTreeSet<&EvidenceRef> = predicted.iter().collect();
    gold_groups
        .iter()
        .any(|g| g.iter().all(|e| predicted.contains(e)))
}

/// Correct label, and for verifiable claims a fully retrieved gold group.
pub fn instance_correct(
    gold: Label,
    predicted: Label,
    gold_groups: &[BTreeSet<EvidenceRef>],
    predicted_evidence: &[EvidenceRef],
) -> bool {
    gold == predicted
        && (gold == Label::Nei || evidence_correct(gold_groups, predicted_evidence))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub instances: usize,
    pub label_accuracy: f64,
    pub fever_score: f64,
    pub evidence_precision: f64,
    pub evidence_recall: f64,
    pub evidence_f1: f64,
    /// `confusion[gold][predicted]` in label order.
    pub confusion: [[usize; 3]; 3],
    /// Verifiable instances that carry no gold evidence group, sorted.
    pub flagged: Vec<String>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, k: &str, v: f64| s.push_str(&format!("{k:<20} {:>7.2}\n", 100.0 * v));
        row(&mut s, "label accuracy", self.label_accuracy);
        row(&mut s, "FEVER score", self.fever_score);
        row(&mut s, "evidence precision", self.evidence_precision);
        row(&mut s, "evidence recall", self.evidence_recall);
        row(&mut s, "evidence F1", self.evidence_f1);
        s.push_str(&format!("{:<20} {:>9} {:>9} {:>9}\n", "gold \\ predicted", "SUP", "REF", "NEI"));
        for (label, counts) in Label::ALL.iter().zip(&self.confusion) {
            s.push_str(&format!(
                "{:<20} {:>9} {:>9} {:>9}\n",
                label.as_str(),
                counts[0],
                counts[1],
                counts[2]
            ));
        }
        s
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score `predictions` against `gold`, matched by instance id. Predicted
/// evidence beyond `k_ev` items is ignored.
pub fn evaluate(predictions: &[Prediction], gold: &[Instance], k_ev: usize) -> Result<EvalReport> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.instance_id.as_str(), p).is_some() {
            return Err(Error::Eval(format!("duplicate prediction for {:?}", p.instance_id)));
        }
    }
    let mut gold_ids = BTreeSet::new();
    for g in gold {
        if !gold_ids.insert(g.instance_id.as_str()) {
            return Err(Error::Eval(format!("duplicate gold instance {:?}", g.instance_id)));
        }
    }
    let missing: Vec<&str> = gold_ids.iter().copied().filter(|id| !by_id.contains_key(id)).collect();
    let extra: BTreeSet<&str> = by_id.keys().copied().filter(|id| !gold_ids.contains(id)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Eval(format!(
            "unmatched instance ids: no prediction for {missing:?}; no gold for {extra:?}"
        )));
    }

    let mut confusion = [[0usize; 3]; 3];
    let (mut label_hits, mut fever_hits) = (0, 0);
    let (mut ev_hits, mut ev_predicted, mut ev_gold) = (0, 0, 0);
    let mut flagged = Vec::new();
    for g in gold {
        let p = by_id[g.instance_id.as_str()];
        let evidence = &p.predicted_evidence[..p.predicted_evidence.len().min(k_ev)];
        confusion[g.label.index()][p.predicted_label.index()] += 1;
        label_hits += usize::from(g.label == p.predicted_label);
        fever_hits += usize::from(instance_correct(
            g.label,
            p.predicted_label,
            &g.gold_evidence_groups,
            evidence,
        ));
        if g.label != Label::Nei {
            if g.gold_evidence_groups.iter().all(|grp| grp.is_empty()) {
                flagged.push(g.instance_id.clone());
            }
            let union: BTreeSet<&EvidenceRef> = g.gold_evidence_groups.iter().flatten().collect();
            let predicted: BTreeSet<&EvidenceRef> = evidence.iter().collect();
            ev_hits += predicted.intersection(&union).count();
            ev_predicted += predicted.len();
            ev_gold += union.len();
        }
    }
    let n = gold.len();
    let precision = ratio(ev_hits, ev_predicted);
    let recall = ratio(ev_hits, ev_gold);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    flagged.sort();
    if !flagged.is_empty() {
        log::warn!("{} verifiable instances have no gold evidence", flagged.len());
    }
    Ok(EvalReport {
        instances: n,
        label_accuracy: ratio(label_hits, n),
        fever_score: ratio(fever_hits, n),
        evidence_precision: precision,
        evidence_recall: recall,
        evidence_f1: f1,
        confusion,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(d: &str, i: usize) -> EvidenceRef {
        EvidenceRef::new(d, i)
    }

    fn group(items: &[(&str, usize)]) -> BTreeSet<EvidenceRef> {
        items.iter().map(|&(d, i)| r(d, i)).collect()
    }

    #[test]
    fn subset_rule() {
        assert!(evidence_correct(&[group(&[("d1", 0)])], &[r("d1", 0), r("d2", 3)]));
        assert!(!evidence_correct(&[group(&[("d1", 0), ("d1", 1)])], &[r("d1", 0)]));
        let two = [group(&[("a", 0), ("b", 0)]), group(&[("c", 1)])];
        assert!(evidence_correct(&two, &[r("c", 1)]));
        assert!(!evidence_correct(&[], &[r("c", 1)]));
    }

    #[test]
    fn eq8_cases() {
        use Label::*;
        assert!(instance_correct(Nei, Nei, &[], &[]));
        assert!(!instance_correct(Supported, Supported, &[group(&[("a", 0)])], &[]));
        assert!(!instance_correct(Supported, Refuted, &[group(&[("a", 0)])], &[r("a", 0)]));
    }

    fn inst(id: &str, label: Label, groups: Vec<BTreeSet<EvidenceRef>>) -> Instance {
        Instance {
            instance_id: id.into(),
            claim: "c".into(),
            label,
            gold_evidence_groups: groups,
        }
    }

    fn pred(id: &str, label: Label, ev: Vec<EvidenceRef>) -> Prediction {
        Prediction {
            instance_id: id.into(),
            predicted_label: label,
            probabilities: [1.0 / 3.0; 3],
            predicted_evidence: ev,
        }
    }

    #[test]
    fn perfect_and_evidence_wrong() {
        let gold = vec![
            inst("1", Label::Supported, vec![group(&[("a", 0)])]),
            inst("2", Label::Refuted, vec![group(&[("b", 1)])]),
        ];
        let good = vec![pred("1", Label::Supported, vec![r("a", 0)]), pred("2", Label::Refuted, vec![r("b", 1)])];
        let rep = evaluate(&good, &gold, 5).unwrap();
        assert_eq!((rep.label_accuracy, rep.fever_score, rep.evidence_f1), (1.0, 1.0, 1.0));
        let bad = vec![pred("1", Label::Supported, vec![r("x", 0)]), pred("2", Label::Refuted, vec![])];
        let rep = evaluate(&bad, &gold, 5).unwrap();
        assert_eq!((rep.label_accuracy, rep.fever_score), (1.0, 0.0));
    }

    #[test]
    fn k_ev_truncates() {
        let gold = vec![inst("1", Label::Supported, vec![group(&[("a", 0)])])];
        let p = vec![pred("1", Label::Supported, vec![r("x", 0), r("a", 0)])];
        assert_eq!(evaluate(&p, &gold, 1).unwrap().fever_score, 0.0);
        assert_eq!(evaluate(&p, &gold, 2).unwrap().fever_score, 1.0);
    }

    #[test]
    fn id_errors() {
        let gold = vec![inst("1", Label::Nei, vec![])];
        let dup = vec![pred("1", Label::Nei, vec![]), pred("1", Label::Nei, vec![])];
        assert!(evaluate(&dup, &gold, 5).unwrap_err().to_string().contains("duplicate"));
        let other = vec![pred("2", Label::Nei, vec![])];
        let err = evaluate(&other, &gold, 5).unwrap_err().to_string();
        assert!(err.contains("\"1\"") && err.contains("\"2\""), "{err}");
    }

    #[test]
    fn flags_missing_annotation() {
        let gold = vec![inst("1", Label::Supported, vec![])];
        let rep = evaluate(&[pred("1", Label::Supported, vec![])], &gold, 5).unwrap();
        assert_eq!(rep.flagged, ["1"]);
        assert_eq!(rep.fever_score, 0.0);
    }

    #[test]
    fn all_nei_perfect() {
        let gold: Vec<_> = (0..4).map(|i| inst(&i.to_string(), Label::Nei, vec![])).collect();
        let preds: Vec<_> = (0..4).map(|i| pred(&i.to_string(), Label::Nei, vec![])).collect();
        let rep = evaluate(&preds, &gold, 5).unwrap();
        assert_eq!((rep.label_accuracy, rep.fever_score), (1.0, 1.0));
    }
}
