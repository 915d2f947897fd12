//! Data containers, synthetic corpus, training, evaluation and the
//! modality-comparison experiment.

mod checkpoint;
mod config;
pub mod disk;
pub mod corpus;
mod eval;
mod experiment;
mod features;
mod gradcheck;
mod manifest;
mod synth;
mod tensorfile;
mod train;
mod wer;

pub use checkpoint::{load_checkpoint, load_reducer, save_checkpoint, save_reducer, CheckpointHeader, ParamEntry};
pub use config::{Condition, TrainConfig};
pub use eval::{decode_probs, evaluate, DecoderConfig, EvalReport, UtteranceResult};
pub use experiment::{
    build_sample, fit_side_standardizer, prepare, run_condition, run_experiment, side_features, ConditionReport,
    ExperimentConfig, ExperimentReport, LmSettings, PreparedCorpus,
};
pub use features::{
    downsample_video, extract_utterance, reduce_eeg, strided_rows, video_tensor, EegFrontEnd, EegReducer,
    FeatureConfig, Standardizer, UtteranceFeatures,
};
pub use gradcheck::{model_gradcheck, relative_error, tiny_config, GradcheckReport};
pub use manifest::{entry_path, manifest_base, Manifest, ManifestEntry};
pub use synth::{utterance_plan, Generator, Split, SynthConfig, Utterance, UtteranceSpec, EEG_CHANNELS, EEG_SAMPLE_RATE_HZ};
pub use tensorfile::{TensorData, TensorFile, MAGIC, VERSION};
pub use train::{loss_csv, mean_loss, train, validation_split, write_loss_csv, EpochStats, Sample};
pub use wer::wer;
