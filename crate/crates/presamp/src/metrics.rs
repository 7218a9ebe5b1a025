//! Ranking metrics over full-catalog recommendation lists: HR@k, NDCG@k,
//! precision/recall@k, catalog coverage@k, and average precision over the
//! complete ranking (reported as `pr_auc_ap`).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One user's evaluation input: the full ranked list (no duplicates, no
/// excluded items) and the set of held-out relevant items.
#[derive(Debug, Clone)]
pub struct EvalInstance {
    pub ranking: Vec<usize>,
    pub relevant: BTreeSet<usize>,
    pub catalog_size: usize,
}

impl EvalInstance {
    fn hits_at(&self, k: usize) -> usize {
        self.ranking
            .iter()
            .take(k)
            .filter(|i| self.relevant.contains(i))
            .count()
    }
}

pub fn hr_at_k(inst: &EvalInstance, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(if inst.hits_at(k) > 0 { 1.0 } else { 0.0 })
}

pub fn ndcg_at_k(inst: &EvalInstance, k: usize) -> Result<f64> {
    check_k(k)?;
    if inst.relevant.is_empty() {
        return Ok(0.0);
    }
    let gain = |p: usize| 1.0 / ((p + 1) as f64).log2();
    let dcg: f64 = inst
        .ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| inst.relevant.contains(item))
        .map(|(idx, _)| gain(idx + 1))
        .sum();
    let idcg: f64 = (1..=k.min(inst.relevant.len())).map(gain).sum();
    Ok(dcg / idcg)
}

pub fn precision_recall_at_k(inst: &EvalInstance, k: usize) -> Result<(f64, f64)> {
    check_k(k)?;
    if inst.relevant.is_empty() {
        return Err(Error::validation("precision/recall undefined with zero relevant items".to_string()));
    }
    let hits = inst.hits_at(k) as f64;
    Ok((hits / k as f64, hits / inst.relevant.len() as f64))
}

/// Fraction of the catalog reached by at least one user's top-k.
pub fn coverage_at_k(instances: &[EvalInstance], k: usize, catalog_size: usize) -> Result<f64> {
    check_k(k)?;
    if catalog_size == 0 {
        return Err(Error::validation("coverage needs a nonempty catalog".to_string()));
    }
    let mut seen = BTreeSet::new();
    for inst in instances {
        seen.extend(inst.ranking.iter().take(k).copied());
    }
    Ok(seen.len() as f64 / catalog_size as f64)
}

/// Average precision over the complete ranked list.
pub fn pr_auc(inst: &EvalInstance) -> Result<f64> {
    if inst.relevant.is_empty() {
        return Err(Error::validation("average precision undefined with zero relevant items".to_string()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (idx, item) in inst.ranking.iter().enumerate() {
        if inst.relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (idx + 1) as f64;
        }
    }
    Ok(sum / inst.relevant.len() as f64)
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::validation("k must be >= 1".to_string()));
    }
    Ok(())
}

/// Mean and per-user values for one metric at one cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricValues {
    pub mean: f64,
    pub per_user: Vec<f64>,
}

fn summarize(per_user: Vec<f64>) -> MetricValues {
    let mean = if per_user.is_empty() {
        0.0
    } else {
        per_user.iter().sum::<f64>() / per_user.len() as f64
    };
    MetricValues { mean, per_user }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsAtK {
    pub k: usize,
    pub hr: MetricValues,
    pub ndcg: MetricValues,
    pub precision: MetricValues,
    pub recall: MetricValues,
    pub coverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub at_k: Vec<MetricsAtK>,
    pub pr_auc_ap: MetricValues,
    pub evaluated_users: usize,
    /// Users dropped because they had no relevant items.
    pub excluded_users: usize,
}

impl MetricsReport {
    pub fn mean(&self, metric: &str, k: usize) -> Option<f64> {
        if metric == "pr_auc_ap" {
            return Some(self.pr_auc_ap.mean);
        }
        let at = self.at_k.iter().find(|m| m.k == k)?;
        match metric {
            "hr" => Some(at.hr.mean),
            "ndcg" => Some(at.ndcg.mean),
            "precision" => Some(at.precision.mean),
            "recall" => Some(at.recall.mean),
            "coverage" => Some(at.coverage),
            _ => None,
        }
    }
}

/// Aggregate all metrics over a set of users; users with zero relevant items
/// are excluded from every average and counted.
pub fn metrics_report(instances: &[EvalInstance], ks: &[usize]) -> Result<MetricsReport> {
    if ks.is_empty() {
        return Err(Error::validation("need at least one cutoff k".to_string()));
    }
    let catalog_size = instances
        .first()
        .map(|i| i.catalog_size)
        .ok_or_else(|| Error::validation("no users to evaluate".to_string()))?;
    let kept: Vec<&EvalInstance> = instances.iter().filter(|i| !i.relevant.is_empty()).collect();
    let excluded_users = instances.len() - kept.len();

    let mut at_k = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut hr = Vec::with_capacity(kept.len());
        let mut ndcg = Vec::with_capacity(kept.len());
        let mut precision = Vec::with_capacity(kept.len());
        let mut recall = Vec::with_capacity(kept.len());
        for inst in &kept {
            hr.push(hr_at_k(inst, k)?);
            ndcg.push(ndcg_at_k(inst, k)?);
            let (p, r) = precision_recall_at_k(inst, k)?;
            precision.push(p);
            recall.push(r);
        }
        let kept_owned: Vec<EvalInstance> = kept.iter().map(|i| (*i).clone()).collect();
        at_k.push(MetricsAtK {
            k,
            hr: summarize(hr),
            ndcg: summarize(ndcg),
            precision: summarize(precision),
            recall: summarize(recall),
            coverage: coverage_at_k(&kept_owned, k, catalog_size)?,
        });
    }
    let ap: Vec<f64> = kept.iter().map(|i| pr_auc(i)).collect::<Result<_>>()?;
    Ok(MetricsReport {
        at_k,
        pr_auc_ap: summarize(ap),
        evaluated_users: kept.len(),
        excluded_users,
    })
}
