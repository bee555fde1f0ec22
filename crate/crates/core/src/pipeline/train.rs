//! Two-stage training.
//!
//! Stage 1 fits the encoder and a linear head on `h([CLS])`. Stage 2 freezes
//! the encoder, caches its outputs, and fits the graph branch (or, with the
//! graph disabled, keeps fitting the `h([CLS])` head).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checkpoint::{Checkpoint, EpochRecord, TrainingLog};
use crate::config::Config;
use crate::data::{EvidenceSet, Instance};
use crate::error::Result;
use crate::gat::argmax;
use crate::model::{Model, Prepared, Vocab};
use crate::nn::{AdamW, ParamGrads, ParamStore, Tape, Tensor, Var};

pub const STAGE1_PARAMS: &[&str] = &["enc.", "cls."];
pub const GRAPH_PARAMS: &[&str] = &["proj.", "gcn.", "gat.", "align.", "head."];

/// Gradients, loss and correctness of one training example.
pub(crate) type Step = (ParamGrads, f64, bool);

/// Anything that owns a parameter store the optimizer can update.
pub(crate) trait Trainable: Sync {
    fn params_mut(&mut self) -> &mut ParamStore;
}

impl Trainable for Model {
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
}

/// Minibatch AdamW over `n` examples. Per-example gradients are computed in
/// parallel and summed in example order, so results do not depend on the
/// thread count.
pub(crate) fn fit<M, F>(
    model: &mut M,
    n: usize,
    epochs: usize,
    config: &Config,
    stage: u8,
    rng: &mut ChaCha8Rng,
    example: F,
) -> Result<Vec<EpochRecord>>
where
    M: Trainable,
    F: Fn(&M, usize) -> Result<Step> + Sync,
{
    let mut opt = AdamW::new(config.learning_rate, config.weight_decay);
    let mut records = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let current = &*model;
            let steps: Vec<Result<Step>> = batch.par_iter().map(|&i| example(current, i)).collect();
            let params = model.params_mut();
            params.zero_grads();
            for s in steps {
                let (grads, loss, correct) = s?;
                grads.accumulate(params);
                loss_sum += loss;
                hits += usize::from(correct);
            }
            params.scale_grads(1.0 / batch.len() as f64);
            opt.step(params);
        }
        let record = EpochRecord {
            stage,
            epoch,
            loss: if n > 0 { loss_sum / n as f64 } else { 0.0 },
            accuracy: if n > 0 { hits as f64 / n as f64 } else { 0.0 },
        };
        log::info!(
            "stage {stage} epoch {epoch}: loss {:.4} acc {:.3}",
            record.loss,
            record.accuracy
        );
        records.push(record);
    }
    Ok(records)
}

/// Pair each instance with its SRL parse by instance id. Instances without
/// one are dropped; the second value counts them.
pub fn pair_instances<'a>(
    instances: &'a [Instance],
    srl: &'a [EvidenceSet],
) -> (Vec<(&'a Instance, &'a EvidenceSet)>, usize) {
    let by_id: HashMap<&str, &EvidenceSet> = srl
        .iter()
        .filter_map(|es| es.instance_id.as_deref().map(|id| (id, es)))
        .collect();
    let mut skipped = 0;
    let pairs = instances
        .iter()
        .filter_map(|inst| match by_id.get(inst.instance_id.as_str()) {
            Some(es) => Some((inst, *es)),
            None => {
                log::warn!("instance {:?} has no SRL parse; skipped", inst.instance_id);
                skipped += 1;
                None
            }
        })
        .collect();
    (pairs, skipped)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainingLog,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(&self.model, self.log.clone())
    }
}

/// Build the vocabulary from the paired parses, initialize from
/// `config.seed`, and run both stages.
pub fn train(instances: &[Instance], srl: &[EvidenceSet], config: &Config) -> Result<TrainOutcome> {
    let (pairs, skipped) = pair_instances(instances, srl);
    let vocab = Vocab::build(pairs.iter().map(|(_, es)| *es));
    let mut model = Model::new(config.clone(), vocab)?;
    let mut log = train_model(&mut model, &pairs)?;
    log.skipped_instances = skipped;
    Ok(TrainOutcome { model, log })
}

/// Train an existing model in place.
pub fn train_model(model: &mut Model, pairs: &[(&Instance, &EvidenceSet)]) -> Result<TrainingLog> {
    let prepared: Vec<Prepared> = pairs
        .par_iter()
        .map(|(_, es)| model.prepare(es))
        .collect::<Result<_>>()?;
    let gold: Vec<usize> = pairs.iter().map(|(inst, _)| inst.label.index()).collect();
    let mut log = TrainingLog {
        truncated_tokens: prepared.iter().map(|p| p.layout.truncated_tokens).sum(),
        missing_nodes: prepared.iter().map(|p| p.missing_nodes).sum(),
        graphs_built: prepared.iter().map(|p| p.graphs_built).sum(),
        ..TrainingLog::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
    rng.set_stream(1);
    let config = model.config.clone();
    let n = prepared.len();

    model.params.set_trainable(STAGE1_PARAMS);
    let records = fit(model, n, config.stage1_epochs, &config, 1, &mut rng, |m, i| {
        let mut tape = Tape::new();
        let enc = m.encode(&mut tape, &prepared[i])?;
        let logits = m.cls_logits(&mut tape, enc.cls)?;
        finish(tape, logits, gold[i])
    })?;
    log.epochs.extend(records);

    let cache: Vec<(Tensor, Tensor)> = prepared
        .par_iter()
        .map(|p| {
            let mut tape = Tape::new();
            let enc = model.encode(&mut tape, p)?;
            Ok((tape.value(enc.states).clone(), tape.value(enc.cls).clone()))
        })
        .collect::<Result<_>>()?;
    model.params.set_trainable(if config.use_graph { GRAPH_PARAMS } else { &["cls."] });
    let records = fit(model, n, config.stage2_epochs, &config, 2, &mut rng, |m, i| {
        let mut tape = Tape::new();
        let states = tape.constant(cache[i].0.clone());
        let cls = tape.constant(cache[i].1.clone());
        let logits = m.logits(&mut tape, &prepared[i], states, cls)?;
        finish(tape, logits, gold[i])
    })?;
    log.epochs.extend(records);
    model.params.set_trainable(&[""]);
    Ok(log)
}

pub(crate) fn finish(mut tape: Tape, logits: Var, gold: usize) -> Result<Step> {
    let correct = argmax(tape.value(logits).data()) == gold;
    let loss = tape.cross_entropy(logits, gold)?;
    let value = tape.value(loss).data()[0];
    Ok((tape.backward(loss)?.into_param_grads(), value, correct))
}

/// Fraction of `pairs` whose predicted label matches the gold label.
pub fn accuracy(model: &Model, pairs: &[(&Instance, &EvidenceSet)]) -> Result<f64> {
    let hits = pairs
        .par_iter()
        .map(|(inst, es)| {
            let p = model.probabilities(&model.prepare(es)?)?;
            Ok(usize::from(argmax(&p) == inst.label.index()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(if pairs.is_empty() { 0.0 } else { hits.iter().sum::<usize>() as f64 / pairs.len() as f64 })
}
