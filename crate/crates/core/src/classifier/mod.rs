//! Transformer classifier: tokenizer, encoder, task heads, training and
//! masked-LM domain adaptation.

mod adapt;
mod config;
mod encoder;
mod loss;
mod model;
mod params;
mod tokenizer;
mod train;

pub use adapt::{domain_adapt, mask_tokens, AdaptOutcome};
pub use config::{AdaptConfig, LinearSchedule, Task, TrainConfig};
pub use encoder::{Batch, Encoder, EncoderConfig};
pub use loss::{bce_tensor, binary_loss, binary_loss_grad, multilabel_loss, multilabel_loss_grad, EPS, LABEL_DIM};
pub use model::{
    Classifier, EncoderCheckpoint, Prediction, RunConfig, CONFIG_FILE, ENCODER_CONFIG_FILE, ENCODER_WEIGHTS_FILE,
    HISTORY_FILE, VOCAB_FILE, WEIGHTS_FILE,
};
pub use params::{Init, ParamStore};
pub use tokenizer::{pieces, Encoding, Tokenizer, CLS, MASK, PAD, SEP, SPECIALS, UNK};
pub use train::{selection_f1, train, EpochRecord, Example, History};
