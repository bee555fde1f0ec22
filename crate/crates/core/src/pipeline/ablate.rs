//! The four model variants: with or without evidence reordering, and with
//! or without the graph branch.

use std::collections::HashMap;

use serde::Serialize;

use super::predict::predict_all_counted;
use super::train::{accuracy, pair_instances, train};
use crate::config::Config;
use crate::data::{EvidenceSet, Instance};
use crate::error::Result;
use crate::eval::evaluate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoReorder,
    NoGraph,
    NoBoth,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoReorder, Variant::NoGraph, Variant::NoBoth];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoReorder => "no-reorder",
            Variant::NoGraph => "no-graph",
            Variant::NoBoth => "no-both",
        }
    }

    pub fn apply(self, config: &Config) -> Config {
        let (reorder, use_graph) = match self {
            Variant::Full => (true, true),
            Variant::NoReorder => (false, true),
            Variant::NoGraph => (true, false),
            Variant::NoBoth => (false, false),
        };
        Config {
            reorder,
            use_graph,
            ..config.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    /// Means over seeds.
    pub train_accuracy: f64,
    pub dev_accuracy: f64,
    pub dev_fever: f64,
    /// Per-seed dev accuracy.
    pub dev_accuracies: Vec<f64>,
    /// Graphs constructed during training and dev prediction, all seeds.
    pub graphs_built: usize,
}

/// Train each variant once per seed and score it on `dev`.
pub fn ablate(
    train_set: &[Instance],
    dev: &[Instance],
    srl: &[EvidenceSet],
    config: &Config,
    seeds: &[u64],
    variants: &[Variant],
) -> Result<Vec<AblationRow>> {
    let by_id: HashMap<&str, &EvidenceSet> = srl
        .iter()
        .filter_map(|es| es.instance_id.as_deref().map(|id| (id, es)))
        .collect();
    let dev_sets: Vec<EvidenceSet> = dev
        .iter()
        .filter_map(|i| by_id.get(i.instance_id.as_str()).map(|es| (*es).clone()))
        .collect();
    let dev_gold: Vec<Instance> = dev
        .iter()
        .filter(|i| by_id.contains_key(i.instance_id.as_str()))
        .cloned()
        .collect();
    let mut rows = Vec::new();
    for &variant in variants {
        let mut row = AblationRow {
            variant,
            seeds: seeds.to_vec(),
            train_accuracy: 0.0,
            dev_accuracy: 0.0,
            dev_fever: 0.0,
            dev_accuracies: Vec::new(),
            graphs_built: 0,
        };
        for &seed in seeds {
            let cfg = Config {
                seed,
                ..variant.apply(config)
            };
            let out = train(train_set, srl, &cfg)?;
            let (pairs, _) = pair_instances(train_set, srl);
            row.train_accuracy += accuracy(&out.model, &pairs)?;
            let (preds, graphs) = predict_all_counted(&out.model, &dev_sets, cfg.top_sentences)?;
            let report = evaluate(&preds, &dev_gold, cfg.top_sentences)?;
            row.dev_accuracies.push(report.label_accuracy);
            row.dev_fever += report.fever_score;
            row.graphs_built += out.log.graphs_built + graphs;
            log::info!(
                "{} seed {seed}: dev accuracy {:.3}",
                variant.name(),
                report.label_accuracy
            );
        }
        let n = seeds.len().max(1) as f64;
        row.train_accuracy /= n;
        row.dev_fever /= n;
        row.dev_accuracy = row.dev_accuracies.iter().sum::<f64>() / n;
        rows.push(row);
    }
    Ok(rows)
}

pub fn format_table(rows: &[AblationRow]) -> String {
    let mut s = format!(
        "{:<12} {:>9} {:>9} {:>9} {:>8}\n",
        "variant", "train", "dev acc", "dev fever", "graphs"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<12} {:>9.2} {:>9.2} {:>9.2} {:>8}\n",
            r.variant.name(),
            100.0 * r.train_accuracy,
            100.0 * r.dev_accuracy,
            100.0 * r.dev_fever,
            r.graphs_built
        ));
    }
    s
}
