//! Trains the micro model on the fixed-shape copy corpus and prints the
//! numbers the acceptance gate cares about: initial loss vs ln V, the
//! final/initial loss ratio, and held-out copy accuracy.
//!
//! Usage: micro_train [steps] [lr] [momentum] [seed] [d_model] [n_heads] [layers]

use std::time::Instant;

use chartab_model::{
    build_micro_corpus, copy_accuracy, train_micro, MicroModelParams, ModelConfig, TrainOptions,
};

fn main() {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1200);
    let lr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let momentum: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let d_model: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(32);
    let n_heads: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let layers: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);

    let t0 = Instant::now();
    let corpus = build_micro_corpus(200, 50, seed).expect("corpus");
    println!(
        "corpus: {} train / {} held-out, vocab {} ({} ocr sentinels), input len {}+{}+{}",
        corpus.train.len(),
        corpus.heldout.len(),
        corpus.vocab.len(),
        corpus.vocab.n_ocr(),
        corpus.train[0].input.regions.len(),
        corpus.train[0].input.ocr.len(),
        corpus.train[0].input.text.len(),
    );

    let mut config = ModelConfig::micro(corpus.vocab.len(), corpus.vocab.n_ocr());
    config.d_model = d_model;
    config.n_heads = n_heads;
    config.n_enc_layers = layers;
    config.n_dec_layers = layers;
    config.d_ff = 4 * d_model;
    let mut params = MicroModelParams::init(&config, seed).expect("init");
    let pairs: Vec<_> =
        corpus.train.iter().map(|ex| (ex.input.clone(), ex.target.clone())).collect();
    let opts = TrainOptions { steps, lr, momentum, seed, final_lr_fraction: 0.05 };
    let report = train_micro(&mut params, &pairs, &opts).expect("train");

    let ln_v = (corpus.vocab.len() as f64).ln();
    let anchor_gap = (report.initial_loss - ln_v).abs() / ln_v;
    let ratio = report.final_loss / report.initial_loss;
    let train_copy = copy_accuracy(&params, &corpus.train, &corpus.vocab).expect("train copy");
    let held_copy = copy_accuracy(&params, &corpus.heldout, &corpus.vocab).expect("held copy");
    println!("initial loss {:.4} (ln V = {:.4}, gap {:.2}%)", report.initial_loss, ln_v, 100.0 * anchor_gap);
    println!("final loss   {:.4} (ratio {:.3})", report.final_loss, ratio);
    println!(
        "copy accuracy: train {}/{} = {:.3}, held-out {}/{} = {:.3}",
        train_copy.correct,
        train_copy.slots,
        train_copy.fraction(),
        held_copy.correct,
        held_copy.slots,
        held_copy.fraction()
    );
    println!("elapsed {:.1}s over {} steps", t0.elapsed().as_secs_f64(), steps);
}
