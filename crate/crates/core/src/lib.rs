//! Multimodal continuous speech recognition from EEG, audio and video.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`dsp`] band-pass/notch conditioning, statistical EEG features and MFCC.
//! * [`kpca`] polynomial-kernel PCA used to denoise the EEG feature space.
//! * [`video`] grayscale conversion, resizing and stream alignment.
//! * [`nn`] dense tensors, layers with hand-written reverse-mode gradients,
//!   the two recognition architectures and the Adam optimizer.
//! * [`ctc`] CTC loss plus greedy and prefix-beam-search decoding.
//! * [`lm`] character n-gram language model used for shallow fusion.
//! * [`harness`] tensor container format, synthetic corpus, training,
//!   evaluation and the modality-comparison experiment.

pub mod ctc;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod kpca;
pub mod lm;
pub mod nn;
pub mod video;

pub use error::{Error, Result};

/// Frame rate shared by every feature stream and the video, in Hz.
pub const FRAME_RATE_HZ: u32 = 100;
