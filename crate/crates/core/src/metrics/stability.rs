use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ClemoError, Result};
use crate::surrogate::SurrogateModel;

/// Size of the largest feature set compared by the stability index.
pub const TOP_K: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContributionRule {
    /// `β_{c,j}·θ⁰_j`, the feature's effect at the present problem.
    #[default]
    EffectAtPresent,
    /// `|β_{c,j}|`.
    AbsoluteCoefficient,
}

impl ContributionRule {
    fn apply(self, beta: f64, theta: f64) -> f64 {
        match self {
            ContributionRule::EffectAtPresent => beta * theta,
            ContributionRule::AbsoluteCoefficient => beta.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    /// Index into the parameter vector.
    pub feature: usize,
    pub name: String,
    pub value: f64,
}

/// Nonzero contributions per component, largest magnitude first (ties by
/// feature index).
pub fn feature_contributions(
    model: &SurrogateModel,
    theta0: &[f64],
    rule: ContributionRule,
) -> Result<Vec<Vec<Contribution>>> {
    check_dim("present parameter vector", model.num_features() - 1, theta0.len())?;
    Ok((0..model.num_components())
        .map(|c| {
            let row = &model.row(c)[1..];
            let mut list: Vec<Contribution> = row
                .iter()
                .zip(theta0)
                .enumerate()
                .map(|(j, (&b, &t))| Contribution {
                    feature: j,
                    name: model.param_names()[j].clone(),
                    value: rule.apply(b, t),
                })
                .filter(|c| c.value != 0.0)
                .collect();
            list.sort_by(|a, b| {
                b.value
                    .abs()
                    .total_cmp(&a.value.abs())
                    .then(a.feature.cmp(&b.feature))
            });
            list
        })
        .collect())
}

/// Overlap of two top-k feature sets relative to the largest possible one.
pub fn k_concordance(a: &[usize], b: &[usize], k: usize) -> f64 {
    let fa: BTreeSet<usize> = a.iter().take(k).copied().collect();
    let fb: BTreeSet<usize> = b.iter().take(k).copied().collect();
    let denom = fa.len().max(fb.len());
    if denom == 0 {
        return 1.0;
    }
    fa.intersection(&fb).count() as f64 / denom as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub std: f64,
    pub normalized_std: f64,
    pub fsi: f64,
    /// k-FSI for k = 1..=5.
    pub fsi_by_k: Vec<f64>,
}

pub fn stability(
    models: &[SurrogateModel],
    theta0: &[f64],
    rule: ContributionRule,
) -> Result<StabilityReport> {
    if models.len() < 2 {
        return Err(ClemoError::Data("stability needs at least two models".into()));
    }
    let layout = models[0].layout_owned();
    if models
        .iter()
        .any(|m| m.layout_owned() != layout || m.num_features() != models[0].num_features())
    {
        return Err(ClemoError::Data("models do not share a layout".into()));
    }
    let contributions: Vec<Vec<Vec<Contribution>>> = models
        .iter()
        .map(|m| feature_contributions(m, theta0, rule))
        .collect::<Result<_>>()?;
    let n_comp = layout.num_components();
    let m = models.len() as f64;

    let mut stds = Vec::new();
    let mut normalized = Vec::new();
    for c in 0..n_comp {
        let union: BTreeSet<usize> = contributions
            .iter()
            .flat_map(|per| per[c].iter().take(TOP_K).map(|x| x.feature))
            .collect();
        if union.is_empty() {
            continue;
        }
        let mut sd_sum = 0.0;
        let mut abs_sum = 0.0;
        for &j in &union {
            let vals: Vec<f64> = models
                .iter()
                .map(|model| rule.apply(model.row(c)[j + 1], theta0[j]))
                .collect();
            if vals.iter().any(|v| *v != vals[0]) {
                let mean = vals.iter().sum::<f64>() / m;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
                sd_sum += var.sqrt();
            }
            abs_sum += vals.iter().map(|v| v.abs()).sum::<f64>() / m;
        }
        let sd = sd_sum / union.len() as f64;
        let mean_abs = abs_sum / union.len() as f64;
        stds.push(sd);
        normalized.push(if mean_abs > 0.0 { sd / mean_abs } else { 0.0 });
    }
    let avg = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };

    let ranked: Vec<Vec<Vec<usize>>> = contributions
        .iter()
        .map(|per| {
            per.iter()
                .map(|list| list.iter().map(|x| x.feature).collect())
                .collect()
        })
        .collect();
    let mut fsi_by_k = Vec::with_capacity(TOP_K);
    for k in 1..=TOP_K {
        let mut total = 0.0;
        let mut count = 0usize;
        for a in 0..models.len() {
            for b in a + 1..models.len() {
                for c in 0..n_comp {
                    total += k_concordance(&ranked[a][c], &ranked[b][c], k);
                    count += 1;
                }
            }
        }
        fsi_by_k.push(total / count as f64);
    }

    Ok(StabilityReport {
        std: avg(&stds),
        normalized_std: avg(&normalized),
        fsi: fsi_by_k.iter().sum(),
        fsi_by_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::Layout;

    fn model(rows: Vec<f64>, q: usize) -> SurrogateModel {
        let comps = rows.len() / (q + 1);
        let mut labels = vec!["f".to_string()];
        labels.extend((1..comps).map(|c| format!("x{c}")));
        let layout = Layout {
            component_labels: labels,
            explained_vars: (0..comps - 1).collect(),
            binary_mask: vec![false; comps],
        };
        let names: Vec<String> = (1..=q).map(|j| format!("feature{j}")).collect();
        SurrogateModel::new(&layout, &names, rows).unwrap()
    }

    #[test]
    fn ranking_by_magnitude() {
        let m = model(vec![0.0, 2.0, -3.0], 2);
        let r = feature_contributions(&m, &[1.0, 1.0], ContributionRule::default()).unwrap();
        let names: Vec<_> = r[0].iter().map(|c| (c.name.as_str(), c.value)).collect();
        assert_eq!(names, vec![("feature2", -3.0), ("feature1", 2.0)]);

        let zero = model(vec![5.0, 0.0, 0.0], 2);
        assert!(feature_contributions(&zero, &[1.0, 1.0], ContributionRule::default()).unwrap()[0]
            .is_empty());
    }

    #[test]
    fn identical_models_are_fully_stable() {
        let m = model(vec![0.0, 1.0, -2.0, 3.0, 0.5, 0.0, 0.1, 0.2], 3);
        let r = stability(&[m.clone(), m.clone(), m], &[1.0, 2.0, 3.0], ContributionRule::default())
            .unwrap();
        assert_eq!(r.fsi, 5.0);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn disjoint_rankings_score_zero() {
        let a = model(vec![0.0, 1.0, 0.0], 2);
        let b = model(vec![0.0, 0.0, 1.0], 2);
        let r = stability(&[a, b], &[1.0, 1.0], ContributionRule::default()).unwrap();
        assert_eq!(r.fsi, 0.0);
    }

    #[test]
    fn three_concordance_with_two_shared() {
        assert!((k_concordance(&[0, 1, 2], &[1, 0, 3], 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn needs_two_models() {
        let a = model(vec![0.0, 1.0], 1);
        assert!(stability(&[a], &[1.0], ContributionRule::default()).is_err());
    }
}
