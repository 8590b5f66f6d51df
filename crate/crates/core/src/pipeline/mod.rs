//! Training and inference orchestration around a persisted artifact.

mod artifact;
mod infer;
mod train;

pub use artifact::{load_artifact, save_artifact, HighOrderSection, LowOrderSection, ModelArtifact, FORMAT_VERSION};
pub use infer::{infer, scores_to_csv, InferConfig, InferOutput, InferReport, NUM_CHANNELS, SCORES_CSV_HEADER};
pub use train::{channel_scores, train, ChannelScores, EpochLoss, PreparedGraph, TrainConfig, TrainOutput, MAX_POOL_SIZE};
