use rayon::prelude::*;

use crate::data::{EvidenceRef, EvidenceSet, Label, Prediction};
use crate::error::{Error, Result};
use crate::gat::argmax;
use crate::model::Model;

/// Classify one parsed instance. The predicted evidence is the first `k_ev`
/// evidence sentences in input order that name their source document
/// sentence.
pub fn predict(model: &Model, es: &EvidenceSet, k_ev: usize) -> Result<Prediction> {
    predict_counted(model, es, k_ev).map(|(p, _)| p)
}

/// [`predict`] plus the number of graphs built on the way.
pub fn predict_counted(model: &Model, es: &EvidenceSet, k_ev: usize) -> Result<(Prediction, usize)> {
    let instance_id = es
        .instance_id
        .clone()
        .ok_or_else(|| Error::validation("instance_id", "required for prediction"))?;
    let prep = model.prepare(es)?;
    let probabilities = model.probabilities(&prep)?;
    let predicted_label = Label::from_index(argmax(&probabilities)).expect("three classes");
    let predicted_evidence = es
        .evidence
        .iter()
        .filter_map(|s| s.source_index.map(|i| EvidenceRef::new(s.source_doc.clone(), i)))
        .take(k_ev)
        .collect();
    let p = Prediction {
        instance_id,
        predicted_label,
        probabilities,
        predicted_evidence,
    };
    Ok((p, prep.graphs_built))
}

/// Predict every set in parallel; output is sorted by instance id.
pub fn predict_all(model: &Model, sets: &[EvidenceSet], k_ev: usize) -> Result<Vec<Prediction>> {
    predict_all_counted(model, sets, k_ev).map(|(p, _)| p)
}

pub fn predict_all_counted(model: &Model, sets: &[EvidenceSet], k_ev: usize) -> Result<(Vec<Prediction>, usize)> {
    let results: Vec<(Prediction, usize)> = sets
        .par_iter()
        .map(|es| predict_counted(model, es, k_ev))
        .collect::<Result<_>>()?;
    let graphs = results.iter().map(|r| r.1).sum();
    let mut out: Vec<Prediction> = results.into_iter().map(|r| r.0).collect();
    out.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok((out, graphs))
}
