//! Neural speech codec over complex spectra: a window-attention
//! encoder/decoder pyramid with cross-scale residual product
//! quantization, a scalable bitstream, and checkpointing.
//!
//! The coding pipeline is `waveform -> spectrum -> patch tokens ->
//! encoder pyramid -> quantizer stages -> mirrored decoder -> spectrum ->
//! waveform`. Each transmitted stream adds one residual quantizer stage;
//! stage 0 codes the bottleneck and every further stage refines the
//! decoder one scale higher, so a prefix of the bitstream is always a
//! valid lower-rate coding.

pub mod attention;
pub mod bitstream;
pub mod checkpoint;
pub mod config;
pub mod csrvq;
pub mod encdec;
pub mod error;
pub mod layers;
pub mod patch;
pub mod shuffle;
pub mod vq;

pub use config::{ArchConfig, CodecConfig, CodecMode, VqConfig};
pub use csrvq::{
    merge_frames, sample_streams, unmerge_frames, CodecModel, EncodeOptions, EncodeResult,
    EncodedPayload,
};
pub use encdec::{encoder_forward, FeatureMap};
pub use error::CodecError;
pub use layers::Ctx;
pub use vq::{vq_loss, CodeStats, Probe, ProductVq, QuantOutput};
