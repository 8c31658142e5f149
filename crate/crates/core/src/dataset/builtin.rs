//! Bundled dataset definitions.

use std::path::Path;

use super::{curate, load_csv, load_csv_reader, FeatureSchema, TabularDataset};
use crate::error::Result;

const GERMAN_CSV: &str = include_str!("../../data/german_credit.csv");
const GERMAN_SCHEMA: &str = include_str!("../../data/german_credit.toml");
const CONSUMER_SCHEMA: &str = include_str!("../../data/consumer_loans.toml");

pub fn german_credit_schema() -> FeatureSchema {
    FeatureSchema::from_toml_str(GERMAN_SCHEMA).expect("bundled German credit schema is valid")
}

/// The UCI German credit data (1000 applications), curated and encoded.
pub fn german_credit() -> Result<TabularDataset> {
    let schema = german_credit_schema();
    let raw = load_csv_reader(GERMAN_CSV.as_bytes(), &schema)?;
    curate(&raw, &schema)
}

pub fn consumer_loans_schema() -> FeatureSchema {
    FeatureSchema::from_toml_str(CONSUMER_SCHEMA).expect("bundled consumer-loans schema is valid")
}

/// The consumer-loans file, which is not redistributed and must be fetched separately.
pub fn consumer_loans(path: &Path) -> Result<TabularDataset> {
    let schema = consumer_loans_schema();
    curate(&load_csv(path, &schema)?, &schema)
}
