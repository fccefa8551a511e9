//! A hand-rolled f64 encoder-decoder for table reconstruction from chart
//! inputs, sized to train on a CPU in minutes. No autograd framework:
//! gradients are derived by hand and validated with finite differences.

pub mod bias;
pub mod checkpoint;
pub mod dataset;
pub mod gradcheck;
pub mod model;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use dataset::{
    build_micro_corpus, copy_accuracy, example_from_record, vocab_from_records, CopyReport,
    DatasetError, MicroCorpus, MicroExample,
};
pub use gradcheck::{grad_check, grad_check_corrupted, GradCheckReport};
pub use model::{
    embed_inputs, encode, greedy_decode, loss, loss_and_grads, MicroModelParams, ModelConfig,
    ModelError, MultimodalInput, OcrIn, RegionIn,
};
pub use tensor::Mat;
pub use train::{train_micro, TrainOptions, TrainReport};
pub use vocab::{Vocab, VocabError, BOS, EOS, PAD, UNK};
