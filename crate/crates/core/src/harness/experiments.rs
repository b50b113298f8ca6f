use std::fmt::Write as _;

use super::metrics::{MetricsReport, REPORT_CSV_HEADER};
use super::run::RunConfig;
use super::train::{evaluate, train, PreparedData};
use crate::dataset::DatasetSplit;
use crate::error::Result;
use crate::graph::Representation;
use crate::model::MagrecConfig;

/// `(use_rie, use_gie, use_dc)` rows of the ablation table.
pub const ABLATION_ROWS: [(bool, bool, bool); 6] = [
    (false, true, true),
    (false, true, false),
    (true, false, false),
    (true, true, false),
    (true, false, true),
    (true, true, true),
];

#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub label: String,
    pub best_epoch: usize,
    pub validation: MetricsReport,
    pub test: Option<MetricsReport>,
}

fn run_variant(label: String, run: &RunConfig, data: &PreparedData) -> Result<VariantResult> {
    let outcome = train(run, data)?;
    let test = if data.test.is_empty() {
        None
    } else {
        Some(evaluate(&outcome.model, &data.test, run.eval_batch_size, run.seed, outcome.best_epoch)?)
    };
    Ok(VariantResult {
        label,
        best_epoch: outcome.best_epoch,
        validation: outcome.best().validation.clone(),
        test,
    })
}

pub fn with_flags(model: &MagrecConfig, (rie, gie, dc): (bool, bool, bool)) -> MagrecConfig {
    MagrecConfig {
        use_rie: rie,
        use_gie: gie,
        use_dc: dc,
        ..model.clone()
    }
}

/// Trains every ablation row on the same data and seed.
pub fn ablation_run(run: &RunConfig, data: &PreparedData) -> Result<Vec<VariantResult>> {
    ABLATION_ROWS
        .iter()
        .map(|&flags| {
            let variant = RunConfig {
                model: with_flags(&run.model, flags),
                ..run.clone()
            };
            run_variant(variant.model.ablation_label(), &variant, data)
        })
        .collect()
}

/// Trains once per graph representation on the same split and seed.
pub fn representation_sweep(run: &RunConfig, split: &DatasetSplit) -> Result<Vec<VariantResult>> {
    Representation::ALL
        .iter()
        .map(|&repr| {
            let variant = RunConfig { repr, ..run.clone() };
            let data = PreparedData::new(split, repr)?;
            run_variant(repr.to_string(), &variant, &data)
        })
        .collect()
}

pub fn variants_csv(rows: &[VariantResult]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.validation.csv_rows(Some(&format!("{}/validation", r.label))));
        if let Some(t) = &r.test {
            out.push_str(&t.csv_rows(Some(&format!("{}/test", r.label))));
        }
    }
    out
}

pub fn variants_table(rows: &[VariantResult]) -> String {
    let mut out = format!(
        "{:<14} {:>6} {:>12} {:>10} {:>12} {:>10}\n",
        "variant", "epoch", "val logloss", "val auc", "test logloss", "test auc"
    );
    let auc = |m: Option<f64>| m.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
    for r in rows {
        let (tl, ta) = match &r.test {
            Some(t) => (format!("{:.4}", t.overall.logloss), auc(t.overall.auc)),
            None => ("-".into(), "-".into()),
        };
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>12.4} {:>10} {:>12} {:>10}",
            r.label,
            r.best_epoch,
            r.validation.overall.logloss,
            auc(r.validation.overall.auc),
            tl,
            ta
        );
    }
    out
}
