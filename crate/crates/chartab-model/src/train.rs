//! SGD-with-momentum training loop over (input, target) pairs, batch 1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{loss, loss_and_grads, MicroModelParams, ModelError, MultimodalInput};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
    /// The step size decays linearly to `lr × final_lr_fraction` by the last
    /// step; 1.0 keeps it constant.
    pub final_lr_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> TrainOptions {
        TrainOptions { steps: 400, lr: 0.05, momentum: 0.9, seed: 0, final_lr_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Per-step training loss, in order.
    pub step_losses: Vec<f64>,
    /// Mean corpus loss before the first update.
    pub initial_loss: f64,
    /// Mean corpus loss after the last update.
    pub final_loss: f64,
}

fn mean_loss(
    params: &MicroModelParams,
    corpus: &[(MultimodalInput, Vec<usize>)],
) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for (input, target) in corpus {
        total += loss(params, input, target)?;
    }
    Ok(total / corpus.len() as f64)
}

/// Runs `steps` single-sample updates with a fresh shuffle each epoch.
/// Updates `params` in place and reports the loss trajectory.
pub fn train_micro(
    params: &mut MicroModelParams,
    corpus: &[(MultimodalInput, Vec<usize>)],
    opts: &TrainOptions,
) -> Result<TrainReport, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::Input("training corpus is empty".into()));
    }
    if !opts.lr.is_finite() || opts.lr <= 0.0 {
        return Err(ModelError::Config(format!("learning rate {} must be positive", opts.lr)));
    }
    if !(0.0..1.0).contains(&opts.momentum) {
        return Err(ModelError::Config(format!("momentum {} must be in [0, 1)", opts.momentum)));
    }
    if !(0.0..=1.0).contains(&opts.final_lr_fraction) {
        return Err(ModelError::Config(format!(
            "final_lr_fraction {} must be in [0, 1]",
            opts.final_lr_fraction
        )));
    }
    let initial_loss = mean_loss(params, corpus)?;
    let mut velocity = MicroModelParams::zeros_like(&params.config);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut step_losses = Vec::with_capacity(opts.steps);
    for step in 0..opts.steps {
        let at = step % corpus.len();
        if at == 0 {
            let epoch = (step / corpus.len()) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            order.shuffle(&mut rng);
        }
        let (input, target) = &corpus[order[at]];
        let (l, grads) = loss_and_grads(params, input, target)?;
        if !l.is_finite() {
            return Err(ModelError::Diverged { step });
        }
        step_losses.push(l);
        let progress = if opts.steps > 1 { step as f64 / (opts.steps - 1) as f64 } else { 0.0 };
        let lr = opts.lr * (1.0 - progress * (1.0 - opts.final_lr_fraction));
        let g_tensors = grads.tensors();
        for (((_, g), (_, v)), (_, p)) in
            g_tensors.iter().zip(velocity.tensors_mut()).zip(params.tensors_mut())
        {
            for i in 0..g.data.len() {
                v.data[i] = opts.momentum * v.data[i] + g.data[i];
                p.data[i] -= lr * v.data[i];
            }
        }
        if !params.all_finite() {
            return Err(ModelError::Diverged { step });
        }
    }
    let final_loss = mean_loss(params, corpus)?;
    Ok(TrainReport { step_losses, initial_loss, final_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, OcrIn, RegionIn};
    use crate::vocab::EOS;
    use rand::Rng;

    fn tiny_corpus(cfg: &ModelConfig) -> Vec<(MultimodalInput, Vec<usize>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        (0..4)
            .map(|k| {
                let input = MultimodalInput {
                    regions: vec![RegionIn {
                        features: (0..cfg.d_region).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        loc: [0.1, 0.2, 0.3, 0.4, 0.02],
                    }],
                    ocr: vec![OcrIn { id: 4 + k, loc: [0.5, 0.5, 0.6, 0.6, 0.01] }],
                    text: vec![8 + k, 9, 10],
                };
                (input, vec![4 + k, 11, EOS])
            })
            .collect()
    }

    #[test]
    fn loss_drops_on_a_memorizable_corpus() {
        let cfg = ModelConfig::tiny(20, 6);
        let mut params = MicroModelParams::init(&cfg, 3).unwrap();
        let corpus = tiny_corpus(&cfg);
        let opts = TrainOptions { steps: 120, lr: 0.05, momentum: 0.9, seed: 5, final_lr_fraction: 1.0 };
        let report = train_micro(&mut params, &corpus, &opts).unwrap();
        assert_eq!(report.step_losses.len(), 120);
        assert!(
            report.final_loss < 0.5 * report.initial_loss,
            "initial {} final {}",
            report.initial_loss,
            report.final_loss
        );
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = ModelConfig::tiny(20, 6);
        let corpus = tiny_corpus(&cfg);
        let opts = TrainOptions { steps: 40, lr: 0.05, momentum: 0.9, seed: 5, final_lr_fraction: 1.0 };
        let mut a = MicroModelParams::init(&cfg, 3).unwrap();
        let ra = train_micro(&mut a, &corpus, &opts).unwrap();
        let mut b = MicroModelParams::init(&cfg, 3).unwrap();
        let rb = train_micro(&mut b, &corpus, &opts).unwrap();
        assert_eq!(ra.step_losses, rb.step_losses);
        assert_eq!(a, b);
    }

    #[test]
    fn bad_options_are_rejected() {
        let cfg = ModelConfig::tiny(20, 6);
        let mut params = MicroModelParams::init(&cfg, 3).unwrap();
        let corpus = tiny_corpus(&cfg);
        assert!(train_micro(
            &mut params,
            &corpus,
            &TrainOptions { lr: 0.0, ..TrainOptions::default() }
        )
        .is_err());
        assert!(train_micro(
            &mut params,
            &corpus,
            &TrainOptions { momentum: 1.0, ..TrainOptions::default() }
        )
        .is_err());
        assert!(train_micro(&mut params, &[], &TrainOptions::default()).is_err());
    }
}
