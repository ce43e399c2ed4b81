//! Neural building blocks with explicit forward and analytic backward passes.
//!
//! Every layer reads its weights from a shared [`ParamStore`] through
//! [`ParamId`] handles and writes gradients into a second store of identical
//! layout (see [`ParamStore::zeros_like`]). Activations are `[S × D]`
//! matrices, one sequence at a time.

mod activation;
mod attention;
mod check;
mod dense;
mod embed;
mod norm;
mod params;
mod pool;
mod resblock;
mod rglru;

pub use activation::{dropout_backward, dropout_forward, gelu, gelu_grad, sigmoid};
pub use attention::{AttentionCache, AttentionState, CausalAttention};
pub use check::LayerGradCheck;
pub use dense::Dense;
pub use embed::{sinusoidal_embed, SinusoidalTable};
pub use norm::{Norm, NormCache, NormKind};
pub use params::{ParamBuilder, ParamId, ParamStore};
pub use pool::{DownPool, UpPool};
pub use resblock::{Mixer, MixerKind, MixerState, ResBlock, ResBlockCache};
pub use rglru::{count_rnn_params, ring_init, LruMode, RgLru, RgLruCache, RingPreset, RnnKind, GATE_EXPONENT};

use crate::rng::SeededRng;

/// Train/eval switch plus the random stream that feeds dropout masks.
#[derive(Debug, Clone)]
pub struct ForwardCtx {
    train: bool,
    rng: SeededRng,
}

impl ForwardCtx {
    pub fn eval() -> Self {
        ForwardCtx {
            train: false,
            rng: SeededRng::new(0),
        }
    }

    pub fn train(rng: SeededRng) -> Self {
        ForwardCtx { train: true, rng }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub(crate) fn rng(&mut self) -> &mut SeededRng {
        &mut self.rng
    }
}
