//! Inference kernels for the three networks and the weight-bundle format.
//!
//! Everything runs in `f32` on one thread. Layers are immutable once built,
//! so a [`ModelBundle`] can be shared by any number of streams; recurrent
//! state lives in [`RecurrentState`] values owned by each stream.

mod bundle;
mod cells;
mod layer;
mod sampling;
mod tensor;

pub use bundle::{
    load_bundle, save_bundle, validate, BundleDims, BundleMetadata, Model, ModelBundle, ACOUSTIC,
    CONDITIONING_DIM, CONVERSION, EXCITATION_LEVELS, FORMAT_VERSION, FRAME_RATE, MAGIC,
    SAMPLE_RATE_NET, VOCODER_FEATURE_DIM,
};
pub use cells::{
    conv1d_forward, conv1d_frame, dense_forward, dual_dense_forward, dual_dense_logits, gru_step,
    lstm_step, CellState, RecurrentState,
};
pub(crate) use cells::{dual_mix, gru_update, GruScratch};
pub use layer::{sigmoid, Activation, BlockMask, Layer, LayerKind, LayerSpec, SPARSE_BLOCK};
pub use sampling::{sample_categorical, sample_categorical_seeded, sampler_rng, softmax, SamplerRng};
pub use tensor::Tensor2;
