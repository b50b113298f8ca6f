use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::autograd::bce_value;
use crate::dataset::DomainId;
use crate::error::{Error, Result};

/// Ranking counts behind the Mann-Whitney AUC: concordant and tied
/// positive/negative pairs.
fn pair_counts(scores: &[f64], labels: &[f64]) -> Result<(u128, u128, u128)> {
    if scores.len() != labels.len() {
        return Err(Error::dims("auc", &[scores.len()], &[labels.len()]));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut concordant, mut tied) = (0u128, 0u128);
    let mut negatives_below = 0u128;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] > 0.5 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        concordant += p * negatives_below;
        tied += p * n;
        negatives_below += n;
        i = j;
    }
    let positives = labels.iter().filter(|&&y| y > 0.5).count() as u128;
    let pairs = positives * (labels.len() as u128 - positives);
    Ok((concordant, tied, pairs))
}

/// Area under the ROC curve with half credit for ties, via one sort.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (c, t, pairs) = pair_counts(scores, labels)?;
    if pairs == 0 {
        return Err(Error::MetricUndefined(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    Ok((2 * c + t) as f64 / (2 * pairs) as f64)
}

/// Mean binary cross-entropy with the training-loss clamp.
pub fn logloss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Data("logloss of an empty prediction set".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::dims("logloss", &[scores.len()], &[labels.len()]));
    }
    Ok(bce_value(scores, labels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub logloss: f64,
    /// Absent when only one class is present.
    pub auc: Option<f64>,
    pub n: usize,
}

impl Metrics {
    pub fn compute(scores: &[f64], labels: &[f64]) -> Result<Self> {
        let auc = match auc(scores, labels) {
            Ok(v) => Some(v),
            Err(Error::MetricUndefined(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            logloss: logloss(scores, labels)?,
            auc,
            n: scores.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_domain: BTreeMap<DomainId, Metrics>,
    pub overall: Metrics,
    pub seed: u64,
    pub epoch: usize,
}

pub const REPORT_CSV_HEADER: &str = "scope,domain,metric,value,n";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl MetricsReport {
    pub fn compute(scores: &[f64], labels: &[f64], domains: &[DomainId], seed: u64, epoch: usize) -> Result<Self> {
        if domains.len() != scores.len() {
            return Err(Error::dims("metrics report", &[scores.len()], &[domains.len()]));
        }
        let mut groups: BTreeMap<DomainId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for ((&s, &y), &d) in scores.iter().zip(labels).zip(domains) {
            let g = groups.entry(d).or_default();
            g.0.push(s);
            g.1.push(y);
        }
        let per_domain = groups
            .into_iter()
            .map(|(d, (s, y))| Ok((d, Metrics::compute(&s, &y)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            per_domain,
            overall: Metrics::compute(scores, labels)?,
            seed,
            epoch,
        })
    }

    /// True when no AUC in the report is defined.
    pub fn auc_undefined_only(&self) -> bool {
        self.overall.auc.is_none() && self.per_domain.values().all(|m| m.auc.is_none())
    }

    /// CSV rows (without header); `scope_prefix` is prepended as `prefix/`.
    pub fn csv_rows(&self, scope_prefix: Option<&str>) -> String {
        let scope = |s: &str| match scope_prefix {
            Some(p) => format!("{p}/{s}"),
            None => s.to_string(),
        };
        let mut out = String::new();
        for (d, m) in &self.per_domain {
            let _ = writeln!(out, "{},{d},logloss,{},{}", scope("domain"), m.logloss, m.n);
            let _ = writeln!(out, "{},{d},auc,{},{}", scope("domain"), fmt_opt(m.auc), m.n);
        }
        let m = &self.overall;
        let _ = writeln!(out, "{},all,logloss,{},{}", scope("overall"), m.logloss, m.n);
        let _ = writeln!(out, "{},all,auc,{},{}", scope("overall"), fmt_opt(m.auc), m.n);
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_CSV_HEADER}\n{}", self.csv_rows(None))
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("seed {}  epoch {}\n", self.seed, self.epoch);
        let _ = writeln!(out, "{:<10} {:>10} {:>10} {:>8}", "domain", "logloss", "auc", "n");
        let row = |out: &mut String, name: &str, m: &Metrics| {
            let auc = m.auc.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
            let _ = writeln!(out, "{:<10} {:>10.4} {:>10} {:>8}", name, m.logloss, auc, m.n);
        };
        for (d, m) in &self.per_domain {
            row(&mut out, &d.to_string(), m);
        }
        row(&mut out, "all", &self.overall);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tape;
    use proptest::prelude::*;

    /// Quadratic pairwise oracle.
    fn auc_pairwise(scores: &[f64], labels: &[f64]) -> f64 {
        let (mut num, mut pairs) = (0u128, 0u128);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] > 0.5 && labels[j] < 0.5 {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        num += 2;
                    } else if scores[i] == scores[j] {
                        num += 1;
                    }
                }
            }
        }
        num as f64 / (2 * pairs) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.2, 0.4], &[1.0, 1.0]), Err(Error::MetricUndefined(_))));
    }

    #[test]
    fn logloss_examples() {
        assert!((logloss(&[0.5], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(logloss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() <= 1.1e-7);
        assert!(logloss(&[], &[]).is_err());
    }

    #[test]
    fn logloss_equals_training_loss() {
        let p = [0.2, 0.7, 0.999, 1e-9];
        let y = [0.0, 1.0, 1.0, 0.0];
        let mut t = Tape::new();
        let pv = t.constant(4, 1, p.to_vec()).unwrap();
        let l = t.bce_loss(pv, &y).unwrap();
        assert!((t.scalar(l) - logloss(&p, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn single_domain_report_matches_overall() {
        let r = MetricsReport::compute(&[0.2, 0.8, 0.6], &[0.0, 1.0, 0.0], &[3, 3, 3], 1, 2).unwrap();
        assert_eq!(r.per_domain[&3], r.overall);
    }

    #[test]
    fn overall_logloss_is_weighted_mean() {
        let s = [0.2, 0.8, 0.6, 0.1, 0.35];
        let y = [0.0, 1.0, 0.0, 1.0, 1.0];
        let r = MetricsReport::compute(&s, &y, &[0, 0, 1, 1, 1], 0, 0).unwrap();
        let weighted: f64 = r.per_domain.values().map(|m| m.logloss * m.n as f64).sum::<f64>() / 5.0;
        assert!((weighted - r.overall.logloss).abs() < 1e-9);
        assert_eq!(r.per_domain.values().map(|m| m.n).sum::<usize>(), r.overall.n);
    }

    #[test]
    fn single_class_domain_reports_absent_auc() {
        let r = MetricsReport::compute(&[0.2, 0.8, 0.6], &[1.0, 1.0, 0.0], &[0, 0, 1], 0, 0).unwrap();
        assert_eq!(r.per_domain[&0].auc, None);
        assert!(r.per_domain[&0].logloss > 0.0);
        assert!(r.overall.auc.is_some());
        assert!(!r.auc_undefined_only());
        let csv = r.to_csv();
        assert!(csv.starts_with("scope,domain,metric,value,n\n"));
        assert!(csv.contains("domain,0,auc,NA,2\n"));
        assert!(csv.contains("overall,all,auc,0.5,3\n"));
    }

    proptest! {
        #[test]
        fn sort_auc_equals_pairwise(
            data in prop::collection::vec((0u8..20, prop::bool::ANY), 2..500)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 20.0).collect();
            let labels: Vec<f64> = data.iter().map(|(_, y)| f64::from(u8::from(*y))).collect();
            let p = labels.iter().filter(|&&y| y > 0.5).count();
            prop_assume!(p > 0 && p < labels.len());
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc_pairwise(&scores, &labels));
        }
    }
}
