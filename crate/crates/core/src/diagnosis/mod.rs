//! Single-trial damage diagnosis: paired healthy/damaged sample collection
//! and a recurrent classifier over the resulting sensor time series.

mod collect;
mod dataset;
mod model;
mod train;

pub use collect::{collect_samples, run_probe, CollectionConfig, DiagnosisSample, Method, Probe};
pub use dataset::{write_confusion_csv, Dataset, DatasetHeader, DATASET_FORMAT_VERSION};
pub use model::{argmax_lowest, diagnose, ClassifierModel, ClassifierShape};
pub use train::{
    confusion_matrix, evaluate, stratified_split, train_classifier, ClassifierTraining, EpochRecord, TrainingReport,
};
