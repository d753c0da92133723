//! Training, scoring, checkpoints and batch prediction.

mod checkpoint;
mod gradcheck;
mod metrics;
mod predict;
mod train;

pub use checkpoint::{
    checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_FORMAT,
};
pub use gradcheck::{
    gradcheck_config, gradcheck_sentence, model_gradcheck, GradCheckOptions, FIXTURE_CLASSES,
    FIXTURE_LABELS,
};
pub use metrics::{precision_recall_f1, ClassReport, EvalReport, TriggerSet};
pub use predict::{annotate_jsonl, predict_file};
pub use train::{
    encode_all, evaluate_model, gold_triggers, predict_triggers, train, train_with_progress,
    EpochLog, TrainConfig, TrainOutcome,
};
