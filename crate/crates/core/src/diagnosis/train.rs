use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::collect::DiagnosisSample;
use super::model::{argmax_lowest, ClassifierModel, ClassifierShape};
use crate::error::{invalid, Error, Result};
use crate::nn::{adam_update, softmax_crossentropy, AdamState, Parameterized, Tensor2};
use crate::rng::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTraining {
    /// Fraction of each class used for training.
    pub split: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shape: ClassifierShape,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        Self {
            split: 0.8,
            max_epochs: 50,
            patience: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            shape: ClassifierShape::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Validation accuracy of the returned (best validation loss) model.
    pub val_accuracy: f64,
    pub train_accuracy: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Per class: shuffle, then take `round(split·n)` (kept within [1, n−1])
/// for training.
pub fn stratified_split(samples: &[DiagnosisSample], split: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(split > 0.0 && split < 1.0) {
        return Err(invalid(format!("split must lie in (0, 1), got {split}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }
    let mut rng = derived_rng(seed, 0x5b17);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (label, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(invalid(format!("class {label} has {} sample(s), need at least 2", idx.len())));
        }
        idx.shuffle(&mut rng);
        let n_train = ((split * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Mean loss and accuracy with dropout off.
pub fn evaluate(model: &ClassifierModel, samples: &[&DiagnosisSample], batch_size: usize) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (mut loss, mut correct) = (0.0, 0usize);
    for chunk in samples.chunks(batch_size.max(1)) {
        let matrices: Vec<&Tensor2> = chunk.iter().map(|s| &s.matrix).collect();
        let logits = model.logits(&model.batch_inputs(&matrices)?)?;
        for (b, s) in chunk.iter().enumerate() {
            loss += softmax_crossentropy(logits.row(b), s.label)?.0;
            if argmax_lowest(logits.row(b)) == s.label {
                correct += 1;
            }
        }
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains on a stratified split with early stopping on validation loss and
/// returns the model from the best epoch.
pub fn train_classifier(
    samples: &[DiagnosisSample],
    classes: usize,
    config: &ClassifierTraining,
    seed: u64,
) -> Result<(ClassifierModel, TrainingReport)> {
    let first = samples.first().ok_or_else(|| invalid("no samples to train on"))?;
    let (timesteps, obs_dim) = (first.matrix.rows(), first.matrix.cols());
    if let Some(bad) = samples.iter().find(|s| s.label >= classes) {
        return Err(invalid(format!("label {} outside {classes} classes", bad.label)));
    }
    if samples.iter().any(|s| s.matrix.rows() != timesteps || s.matrix.cols() != obs_dim) {
        return Err(invalid("samples differ in shape"));
    }
    if samples.iter().any(|s| !s.matrix.is_finite()) {
        return Err(Error::NonFinite("diagnosis sample".into()));
    }
    let (train_idx, val_idx) = stratified_split(samples, config.split, seed)?;
    let train_set: Vec<&DiagnosisSample> = train_idx.iter().map(|&i| &samples[i]).collect();
    let val_set: Vec<&DiagnosisSample> = val_idx.iter().map(|&i| &samples[i]).collect();

    let mut init_rng = derived_rng(seed, 1);
    let mut model = ClassifierModel::new(obs_dim, timesteps, classes, &config.shape, &mut init_rng);
    model.fit_input_scale(&train_set);
    let mut opt = AdamState::for_params(&model.param_slices(), config.learning_rate);
    let mut shuffle_rng = derived_rng(seed, 2);
    let mut dropout_rng = derived_rng(seed, 3);

    let (mut best_loss, first_acc) = evaluate(&model, &val_set, 256)?;
    let mut best = (model.clone(), 0usize, first_acc);
    let mut stale = 0usize;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&DiagnosisSample> = chunk.iter().map(|&i| train_set[i]).collect();
            let matrices: Vec<&Tensor2> = batch.iter().map(|s| &s.matrix).collect();
            let inputs = model.batch_inputs(&matrices)?;
            let (logits, cache) = model.forward_train(inputs, &mut dropout_rng)?;
            let inv_b = 1.0 / batch.len() as f64;
            let mut d_logits = Tensor2::zeros(logits.rows(), logits.cols());
            for (b, s) in batch.iter().enumerate() {
                let (l, g) = softmax_crossentropy(logits.row(b), s.label)?;
                epoch_loss += l;
                d_logits.row_mut(b).iter_mut().zip(g).for_each(|(d, v)| *d = v * inv_b);
            }
            let mut grads = model.zero_grads();
            model.backward(&cache, &d_logits, &mut grads);
            adam_update(&mut model.param_slices_mut(), &grads.into_vecs(), &mut opt)?;
        }
        if !model.params_finite() {
            return Err(Error::NonFinite(format!("classifier parameters at epoch {epoch}")));
        }
        let (val_loss, val_accuracy) = evaluate(&model, &val_set, 256)?;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            val_loss,
            val_accuracy,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best = (model.clone(), epoch, val_accuracy);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (model, best_epoch, val_accuracy) = best;
    let (_, train_accuracy) = evaluate(&model, &train_set, 256)?;
    Ok((model, TrainingReport { val_accuracy, train_accuracy, best_epoch, history }))
}

/// `counts[true][predicted]` over `samples`.
pub fn confusion_matrix(model: &ClassifierModel, samples: &[&DiagnosisSample]) -> Result<Vec<Vec<usize>>> {
    let d = model.classes();
    let mut counts = vec![vec![0usize; d]; d];
    for chunk in samples.chunks(256) {
        let matrices: Vec<&Tensor2> = chunk.iter().map(|s| &s.matrix).collect();
        let logits = model.logits(&model.batch_inputs(&matrices)?)?;
        for (b, s) in chunk.iter().enumerate() {
            counts[s.label][argmax_lowest(logits.row(b))] += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnosis::Method;

    fn sample(label: usize, v: f64) -> DiagnosisSample {
        DiagnosisSample { matrix: Tensor2::from_vec(2, 2, vec![v; 4]).unwrap(), label, method: Method::B, truncated: false }
    }

    #[test]
    fn split_is_stratified() {
        let samples: Vec<_> = (0..30).map(|i| sample(i % 3, i as f64)).collect();
        let (train, val) = stratified_split(&samples, 0.8, 1).unwrap();
        assert_eq!(train.len(), 24);
        assert_eq!(val.len(), 6);
        for c in 0..3 {
            assert_eq!(val.iter().filter(|&&i| samples[i].label == c).count(), 2);
        }
    }

    #[test]
    fn singleton_class_rejected() {
        let samples = vec![sample(0, 0.0), sample(0, 1.0), sample(1, 2.0)];
        assert!(matches!(stratified_split(&samples, 0.8, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn one_class_is_trivially_perfect() {
        let samples: Vec<_> = (0..6).map(|i| sample(0, i as f64 * 0.1)).collect();
        let config = ClassifierTraining {
            max_epochs: 2,
            shape: ClassifierShape { projection: 4, hidden: 3, dense: vec![4], dropout: 0.3 },
            ..Default::default()
        };
        let (_, report) = train_classifier(&samples, 1, &config, 0).unwrap();
        assert_eq!(report.val_accuracy, 1.0);
    }
}
