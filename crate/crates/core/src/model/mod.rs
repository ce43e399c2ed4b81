//! Full autoregressive model: configuration, construction, forward and
//! backward passes, sampling and checkpoints.

mod checkpoint;
mod config;
mod net;
mod sample;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{DeepMixer, ModelConfig, Placement, SkipStyle, MODEL_KEYS};
pub(crate) use config::{parse_f64, parse_usize};
pub use net::{build_model, shift_right, ModelCache, Poolformer, START_CODE, VOCAB};
pub use sample::{choose_token, sample, sample_full_forward, Sampler};
