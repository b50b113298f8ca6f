use super::*;
use crate::dataset::{generate_synthetic, prepare, DatasetSplit, SyntheticConfig};
use crate::error::Error;
use crate::graph::Representation;
use crate::model::{MagrecConfig, MagrecModel};

fn small_split(n_domains: usize) -> DatasetSplit {
    let cfg = SyntheticConfig {
        n_users: 10,
        n_items_per_domain: 12,
        n_domains,
        min_events: 10,
        max_events: 14,
        ..SyntheticConfig::default()
    };
    prepare(&generate_synthetic(&cfg).unwrap(), 1)
}

fn small_run(epochs: usize) -> RunConfig {
    RunConfig {
        model: MagrecConfig {
            batch_size: 16,
            ..MagrecConfig::tiny()
        },
        epochs,
        ..RunConfig::default()
    }
}

#[test]
fn ten_samples_make_one_partial_batch() {
    let split = small_split(2);
    let mut data = PreparedData::new(&split, Representation::Interacting).unwrap();
    data.train.truncate(10);
    let run = RunConfig {
        model: MagrecConfig::tiny(),
        ..small_run(1)
    };
    let mut model = MagrecModel::new(run.model.clone(), data.sizes(), 0).unwrap();
    let settings = TrainSettings::from_run(&run);
    let mut adam = crate::autograd::AdamState::for_store(settings.adam, &model.store);
    train_epoch(&mut model, &mut adam, &data.train, 512, 0, 1).unwrap();
    assert_eq!(adam.step_count(), 1);

    // 5 samples in batches of 2: the trailing single sample is skipped
    let mut adam = crate::autograd::AdamState::for_store(settings.adam, &model.store);
    train_epoch(&mut model, &mut adam, &data.train[..5], 2, 0, 1).unwrap();
    assert_eq!(adam.step_count(), 2);
}

#[test]
fn too_small_train_split_is_a_config_error() {
    let split = small_split(2);
    let mut data = PreparedData::new(&split, Representation::Flattened).unwrap();
    data.train.truncate(1);
    assert!(matches!(train(&small_run(1), &data), Err(Error::Config(_))));
}

#[test]
fn same_seed_same_validation_bits() {
    let split = small_split(2);
    let data = PreparedData::new(&split, Representation::Interacting).unwrap();
    let a = train(&small_run(1), &data).unwrap();
    let b = train(&small_run(1), &data).unwrap();
    assert_eq!(
        a.history[0].validation.overall.logloss.to_bits(),
        b.history[0].validation.overall.logloss.to_bits()
    );
    let c = train(&RunConfig { seed: 9, ..small_run(1) }, &data).unwrap();
    assert_ne!(a.history[0].validation, c.history[0].validation);
}

#[test]
fn evaluation_is_batch_size_invariant() {
    let split = small_split(2);
    let data = PreparedData::new(&split, Representation::Interacting).unwrap();
    let out = train(&small_run(1), &data).unwrap();
    let a = evaluate(&out.model, &data.validation, 7, 0, 1).unwrap();
    let b = evaluate(&out.model, &data.validation, 512, 0, 1).unwrap();
    assert_eq!(a, b);
    assert!(matches!(evaluate(&out.model, &[], 7, 0, 1), Err(Error::Data(_))));
}

#[test]
fn ablation_rows_are_unique_and_reproducible() {
    let split = small_split(2);
    let data = PreparedData::new(&split, Representation::Interacting).unwrap();
    let run = small_run(2);
    let rows = ablation_run(&run, &data).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| r.label == "RIE+GIE+DC").count(), 1);
    let mut labels: Vec<_> = rows.iter().map(|r| r.label.clone()).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), 6);

    let gie_only = RunConfig {
        model: with_flags(&run.model, (false, true, false)),
        ..run.clone()
    };
    let standalone = train(&gie_only, &data).unwrap();
    assert_eq!(rows[1].label, "GIE");
    assert_eq!(rows[1].validation, standalone.best().validation);
    assert!(variants_csv(&rows).contains("RIE/validation/overall,all,logloss,"));
}

#[test]
fn sweep_on_one_domain_matches_flattened_and_interacting() {
    let split = small_split(1);
    let rows = representation_sweep(&small_run(2), &split).unwrap();
    let labels: Vec<_> = rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["disjoint", "flattened", "interacting"]);
    assert_eq!(rows[1].validation, rows[2].validation);
    assert_eq!(rows[1].test, rows[2].test);
}

#[test]
fn baseline_trains_and_scores() {
    let split = small_split(2);
    let data = PreparedData::new(&split, Representation::Flattened).unwrap();
    let model = MeanPoolBaseline::new(data.sizes(), 8, 8, 0);
    let out = train_scorer(model, &data, &TrainSettings::from_run(&small_run(2))).unwrap();
    let p = predict_all(&out.model, &data.test, 64).unwrap();
    assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
}
