//! Mapping time expressions in free text to calendar slots: the phrase
//! table and its rule-based reader, the template dataset, and a recurrent
//! multi-label classifier trained on it.

mod dataset;
mod metrics;
mod model;
mod names;
mod phrases;
mod vocab;

pub use dataset::{
    generate_dataset, read_dataset, split_dataset, write_dataset, DatasetSplit, LabeledSample,
    DATASET_SIZE, DEFAULT_FRAMES,
};
pub use metrics::{micro_scores, micro_scores_dense, MicroCounter, Scores};
pub use model::{
    train_mapper, EpochMetrics, LossMode, MapperConfig, MapperModel, OutputMode, TrainedMapper,
    THRESHOLD,
};
pub use names::parse_participants;
pub use phrases::{oracle_map, rule_map, tokenize, PhraseTable, DEFAULT_PHRASES, EXCLUSION_WORDS};
pub use vocab::{encode_sentence, Vocab, UNK};
