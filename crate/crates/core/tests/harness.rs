use faircredit::harness::{emit_plot_data, emit_report, load_dataset, parse_processor, run_benchmark_on, run_pipeline_on, MetricSummary, ReportFormat};
use faircredit::{DatasetId, Error, PipelineSpec, Processor, ProcessorType};

fn spec(p: Processor, folds: usize) -> PipelineSpec {
    PipelineSpec {
        folds,
        ..PipelineSpec::new(DatasetId::German, p, 7)
    }
}

#[test]
fn identity_matches_baseline_bit_for_bit() {
    let data = load_dataset(&DatasetId::German, None).unwrap();
    let base = run_pipeline_on(&data, &spec(Processor::None, 3)).unwrap();
    let id = run_pipeline_on(&data, &spec(Processor::Identity, 3)).unwrap();
    assert_eq!(base.mean, id.mean);
    assert_eq!(base.std, id.std);
    assert_eq!(base.fold_fingerprint, id.fold_fingerprint);
}

#[test]
fn means_recompute_from_folds() {
    let data = load_dataset(&DatasetId::German, None).unwrap();
    let r = run_pipeline_on(&data, &spec(Processor::Reweighing, 4)).unwrap();
    assert_eq!(r.folds.len(), 4);
    let reports = r.successful_reports();
    let n = reports.len() as f64;
    let bacc = reports.iter().map(|f| f.balanced_accuracy).sum::<f64>() / n;
    let profit = reports.iter().map(|f| f.profit).sum::<f64>() / n;
    assert!((r.mean.balanced_accuracy.unwrap() - bacc).abs() < 1e-12);
    assert!((r.mean.profit.unwrap() - profit).abs() < 1e-12);
    let (mean, _) = MetricSummary::aggregate(&reports);
    assert_eq!(mean, r.mean);
}

#[test]
fn single_split_mode_runs() {
    let data = load_dataset(&DatasetId::German, None).unwrap();
    let r = run_pipeline_on(&data, &spec(Processor::None, 0)).unwrap();
    assert_eq!(r.folds.len(), 1);
    assert_eq!(r.failed_folds(), 0);
}

#[test]
fn table_order_and_baseline() {
    let data = load_dataset(&DatasetId::German, None).unwrap();
    let specs: Vec<PipelineSpec> = ["ceo", "reweighing", "prejudice_remover{eta=1}"]
        .iter()
        .map(|s| spec(s.parse().unwrap(), 2))
        .collect();
    let table = run_benchmark_on(&data, &specs).unwrap();
    let kinds: Vec<ProcessorType> = table.rows.iter().map(|r| r.kind).collect();
    assert_eq!(kinds, [ProcessorType::Pre, ProcessorType::In, ProcessorType::Post, ProcessorType::None]);
    assert!(table.baseline().is_some());
    let csv = emit_report(&table, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let plots = emit_plot_data(&table).unwrap();
    assert!(plots.iter().all(|(_, body)| body.lines().count() == table.rows.len() + 1));
}

#[test]
fn mismatched_rows_and_types_are_config_errors() {
    let data = load_dataset(&DatasetId::German, None).unwrap();
    let mut other = spec(Processor::Reweighing, 2);
    other.seed = 8;
    let err = run_benchmark_on(&data, &[spec(Processor::None, 2), other]).unwrap_err();
    assert!(err.is_config());
    assert!(matches!(parse_processor("roc", Some("pre")), Err(Error::Config(_))));
    assert!(run_benchmark_on(&data, &[]).unwrap_err().is_config());
}
