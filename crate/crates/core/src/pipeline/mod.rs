//! Retrieval, evidence selection, training, prediction, synthetic data, and
//! ablation runs.

pub mod ablate;
pub mod predict;
pub mod retrieval;
pub mod selection;
pub mod synth;
pub mod train;

pub use ablate::{ablate, AblationRow, Variant};
pub use predict::{predict, predict_all};
pub use retrieval::{retrieve_documents, RetrievedDoc};
pub use selection::{lexical_score, rank_evidence, select_evidence, LexicalScorer, RankedSentence, Scorer, TrainedScorer};
pub use synth::{synthesize, SynthData, SynthOptions};
pub use train::{accuracy, pair_instances, train, train_model, TrainOutcome};
