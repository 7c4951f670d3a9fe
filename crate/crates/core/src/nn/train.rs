use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::SyntheticDataset;
use super::model::{Activation, Mlp, XavierForm};
use crate::error::{Error, Result};
use crate::harness::{finite_or_null, iterations_from_draw, trial_rng};
use crate::optim::{Optimizer, OptimizerSpec};

/// Epoch whose metrics are reported alongside the final ones.
pub const REPORT_EPOCH: usize = 5;

const GAIN_SHAPE: f64 = 1.0;
const GAIN_SCALE: f64 = 2.5;
const MIN_GAIN: f64 = 1e-3;
const EPOCHS_MEAN: f64 = 60.0;
const EPOCHS_STD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub gain: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
    #[serde(default)]
    pub init: XavierForm,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::InvalidConfig(format!("gain must be positive, got {}", self.gain)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

/// Hidden layer widths and activation of a two-input, two-class network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    #[serde(default = "Architecture::default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: Self::default_hidden(),
            activation: Activation::default(),
        }
    }
}

impl Architecture {
    fn default_hidden() -> Vec<usize> {
        vec![16]
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(2).chain(self.hidden.iter().copied()).chain(std::iter::once(2)).collect()
    }

    /// Model initialized from the config's gain, form and seed.
    pub fn build(&self, config: &TrainingConfig) -> Result<Mlp> {
        Mlp::xavier(
            &self.sizes(),
            self.activation,
            config.gain,
            config.init,
            &mut trial_rng(config.seed, 0),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingReport {
    pub config: TrainingConfig,
    /// One entry per completed epoch.
    pub metrics: Vec<EpochMetrics>,
    pub diverged: bool,
    /// Optimizer steps taken.
    pub steps: u64,
    /// Coordinates whose sign strictly reversed in a single step, summed over all steps.
    pub sign_flips: u64,
}

impl TrainingReport {
    /// Metrics at `epoch`, or the last completed epoch if the run stopped earlier.
    pub fn at_epoch(&self, epoch: usize) -> Option<&EpochMetrics> {
        self.metrics.iter().take(epoch).next_back()
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.metrics.last()
    }
}

/// Fraction of `labels` matched by `preds`.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len().max(1) as f64
}

fn strictly_flipped(before: f64, after: f64) -> bool {
    before * after < 0.0
}

/// Mini-batch training with one optimizer state per parameter tensor.
///
/// The training split is reshuffled every epoch from the config seed. A step that produces a
/// non-finite gradient or parameter stops the run; completed epochs are kept and the report
/// is flagged as diverged.
pub fn train(model: &mut Mlp, data: &SyntheticDataset, config: &TrainingConfig) -> Result<TrainingReport> {
    config.validate()?;
    if model.input_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: model.input_dim(),
        });
    }
    if data.train.is_empty() {
        return Err(Error::InvalidConfig("training split is empty".into()));
    }
    let mut optimizers = model
        .tensors()
        .map(|t| Optimizer::new(config.optimizer, t.len()))
        .collect::<Result<Vec<_>>>()?;
    let (train_x, train_y) = data.subset(&data.train);
    let (val_x, val_y) = data.subset(&data.validation);

    let mut rng = trial_rng(config.seed, 1);
    let mut order = data.train.clone();
    let mut report = TrainingReport {
        config: *config,
        metrics: Vec::with_capacity(config.epochs),
        diverged: false,
        steps: 0,
        sign_flips: 0,
    };

    'epochs: for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (x, y) = data.subset(batch);
            let cache = model.forward(&x)?;
            let grads = model.backward(&cache, &y)?;
            report.steps += 1;
            for ((theta, g), opt) in model.tensors_mut().zip(&grads.tensors).zip(&mut optimizers) {
                let before = theta.clone();
                match opt.step(theta, g) {
                    Ok(_) => {}
                    Err(Error::Divergence { .. } | Error::NonFiniteGradient { .. }) => {
                        report.diverged = true;
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                }
                report.sign_flips += before.iter().zip(theta.iter()).filter(|(b, a)| strictly_flipped(**b, **a)).count() as u64;
            }
        }

        let (loss, train_pred) = model.evaluate(&train_x, &train_y)?;
        if !loss.is_finite() {
            report.diverged = true;
            break;
        }
        let val_acc = if val_y.is_empty() {
            f64::NAN
        } else {
            accuracy(&model.evaluate(&val_x, &val_y)?.1, &val_y)
        };
        report.metrics.push(EpochMetrics {
            epoch,
            train_acc: accuracy(&train_pred, &train_y),
            val_acc,
            loss,
        });
    }
    Ok(report)
}

/// Build and train one model per config, in parallel on the current rayon pool.
pub fn train_many(
    arch: &Architecture,
    data: &SyntheticDataset,
    configs: &[TrainingConfig],
) -> Result<Vec<TrainingReport>> {
    configs
        .par_iter()
        .map(|c| {
            let mut model = arch.build(c)?;
            train(&mut model, data, c)
        })
        .collect()
}

/// Run `index` of the randomized protocol: gain ~ Gamma(1, 2.5) (redrawn below 1e−3),
/// epochs ~ N(60, 10) rounded and clamped to at least one. The draws depend only on
/// `(seed, index)`, so different optimizers see matched runs.
pub fn sample_training_config(seed: u64, index: u64, optimizer: OptimizerSpec, batch_size: usize) -> TrainingConfig {
    let mut rng = trial_rng(seed, index);
    let gamma = Gamma::new(GAIN_SHAPE, GAIN_SCALE).expect("valid gamma parameters");
    let mut gain = gamma.sample(&mut rng);
    while gain < MIN_GAIN {
        gain = gamma.sample(&mut rng);
    }
    let epochs = iterations_from_draw(Normal::new(EPOCHS_MEAN, EPOCHS_STD).expect("valid normal").sample(&mut rng));
    let run_seed = rand::Rng::random::<u64>(&mut rng);
    TrainingConfig {
        gain,
        epochs,
        batch_size,
        optimizer,
        seed: run_seed,
        init: XavierForm::default(),
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    #[serde(serialize_with = "finite_or_null")]
    pub mean: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / n as f64
        };
        let std = match n {
            0 => f64::NAN,
            1 => 0.0,
            _ => (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt(),
        };
        Self { mean, std }
    }
}

/// Aggregate over runs of one optimizer. Runs without any completed epoch are left out of
/// the accuracy statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub runs: usize,
    pub diverged: usize,
    pub report_epoch: usize,
    pub val_acc_at_report_epoch: MeanStd,
    pub train_acc_at_report_epoch: MeanStd,
    pub val_acc_final: MeanStd,
    pub train_acc_final: MeanStd,
    pub sign_flips: u64,
}

pub fn summarize(reports: &[TrainingReport]) -> RunSummary {
    let pick = |f: &dyn Fn(&TrainingReport) -> Option<f64>| -> MeanStd {
        MeanStd::of(&reports.iter().filter_map(f).collect::<Vec<_>>())
    };
    RunSummary {
        runs: reports.len(),
        diverged: reports.iter().filter(|r| r.diverged).count(),
        report_epoch: REPORT_EPOCH,
        val_acc_at_report_epoch: pick(&|r| r.at_epoch(REPORT_EPOCH).map(|m| m.val_acc)),
        train_acc_at_report_epoch: pick(&|r| r.at_epoch(REPORT_EPOCH).map(|m| m.train_acc)),
        val_acc_final: pick(&|r| r.last().map(|m| m.val_acc)),
        train_acc_final: pick(&|r| r.last().map(|m| m.train_acc)),
        sign_flips: reports.iter().map(|r| r.sign_flips).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::make_dataset;
    use crate::optim::{Family, RuleKind};

    fn sgd(rule: RuleKind) -> OptimizerSpec {
        Family::Sgd.preset(rule).unwrap()
    }

    #[test]
    fn zero_epochs_rejected() {
        let data = make_dataset(20, 0.1, 0).unwrap();
        let config = TrainingConfig {
            gain: 1.0,
            epochs: 0,
            batch_size: 4,
            optimizer: sgd(RuleKind::Additive),
            seed: 0,
            init: XavierForm::Product,
        };
        let mut model = Architecture::default().build(&TrainingConfig { epochs: 1, ..config }).unwrap();
        assert!(train(&mut model, &data, &config).is_err());
    }

    #[test]
    fn sampled_configs() {
        let spec = sgd(RuleKind::Hybrid);
        let a = sample_training_config(11, 3, spec, 16);
        assert_eq!(a, sample_training_config(11, 3, spec, 16));
        assert_ne!(a, sample_training_config(11, 4, spec, 16));
        let other = sample_training_config(11, 3, sgd(RuleKind::Additive), 16);
        assert_eq!((a.gain, a.epochs, a.seed), (other.gain, other.epochs, other.seed));
        assert!(a.gain >= MIN_GAIN && a.epochs >= 1);
    }

    #[test]
    fn gamma_gain_mean() {
        let spec = sgd(RuleKind::Additive);
        let n = 100_000;
        let mean = (0..n).map(|i| sample_training_config(2024, i, spec, 8).gain).sum::<f64>() / n as f64;
        assert!((mean / 2.5 - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn epoch_rounding() {
        assert_eq!(iterations_from_draw(59.6), 60);
        assert_eq!(iterations_from_draw(-3.0), 1);
    }

    #[test]
    fn deterministic_training() {
        let data = make_dataset(60, 0.1, 1).unwrap();
        let config = sample_training_config(5, 0, sgd(RuleKind::Hybrid), 8);
        let config = TrainingConfig { epochs: 6, ..config };
        let arch = Architecture::default();
        let run = || {
            let mut m = arch.build(&config).unwrap();
            let report = train(&mut m, &data, &config).unwrap();
            (m, report)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn summary_statistics() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
        assert!(MeanStd::of(&[]).mean.is_nan());
    }
}
