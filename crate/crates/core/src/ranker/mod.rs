//! Shared-bottom multi-task ranker.
//!
//! Input features pass through a ReLU trunk shared by all heads; each head
//! owns a ReLU tower and a linear output layer with one primary unit and,
//! when distilled, one auxiliary unit trained against a teacher soft label.

mod checkpoint;
mod config;
mod loss;
mod model;
mod train;

pub use checkpoint::{
    checkpoint_fingerprint, checkpoint_from_str, checkpoint_to_string, load_checkpoint,
    save_checkpoint, CHECKPOINT_FORMAT,
};
pub use config::{OutputKind, RankerConfig, TaskHead};
pub use loss::{compute_loss, LossEval, LossSpec, LossTerm, TermKind};
pub use model::{
    apply_feature_defaults, Dense, ForwardCache, HeadOutput, RankerModel, Tower, FEATURE_DEFAULT,
};
pub use train::{predict, HeadScores, ScoreTable, Supervision, TrainOptions, TrainReport, Trainer};
