//! Shared fixtures for the processor benchmarks.

use faircredit::classifier::{fit, predict_proba};
use faircredit::dataset::{german_credit, stratified_split};
use faircredit::{SplitFractions, TabularDataset, TrainConfig};

pub struct Fixture {
    pub train: TabularDataset,
    pub test: TabularDataset,
    /// Baseline probabilities on the test rows.
    pub probabilities: Vec<f64>,
}

/// The German data split 70/30 with seed 0 and a baseline fitted on train.
pub fn german_fixture() -> Fixture {
    let ds = german_credit().expect("bundled German credit data");
    let split = stratified_split(&ds, SplitFractions::new(0.7, 0.0, 0.3), 0).expect("split");
    let train = ds.subset(&split.train).expect("train subset");
    let test = ds.subset(&split.test).expect("test subset");
    let model = fit(&train, &TrainConfig::default()).expect("baseline fit");
    let probabilities = predict_proba(&model, &test).expect("predict");
    Fixture { train, test, probabilities }
}
