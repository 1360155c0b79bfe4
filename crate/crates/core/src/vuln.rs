//! Feature-level vulnerability statistics over a set of attack results.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::AttackResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVulnerability {
    /// `direction.attribute`
    pub feature: String,
    pub selection_count: usize,
    /// Mean of `best_fitness − clean_fitness` over the runs selecting this feature.
    pub mean_impact: f64,
    /// Fraction of those runs whose predicted intention changed.
    pub flip_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VulnFormat {
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum VulnError {
    #[error("no attack results to aggregate")]
    EmptyResults,
    #[error("no feature was selected by any attack run")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Groups runs by targeted feature; runs that fell back to the zero
/// perturbation are not counted. Sorted by count descending, then label.
pub fn aggregate(results: &[AttackResult]) -> Result<Vec<FeatureVulnerability>, VulnError> {
    if results.is_empty() {
        return Err(VulnError::EmptyResults);
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for r in results {
        if let Some(f) = &r.feature {
            let g = groups.entry(f.as_str()).or_default();
            g.0.push(r.impact());
            g.1 += usize::from(r.intention_flipped());
        }
    }
    let mut out: Vec<FeatureVulnerability> = groups
        .into_iter()
        .map(|(feature, (mut impacts, flips))| {
            // order-independent summation so equal multisets give equal bytes
            impacts.sort_by(f64::total_cmp);
            let n = impacts.len();
            FeatureVulnerability {
                feature: feature.to_string(),
                selection_count: n,
                mean_impact: impacts.iter().sum::<f64>() / n as f64,
                flip_rate: flips as f64 / n as f64,
            }
        })
        .collect();
    out.sort_by(|a, b| b.selection_count.cmp(&a.selection_count).then_with(|| a.feature.cmp(&b.feature)));
    Ok(out)
}

pub fn emit<W: Write>(vulns: &[FeatureVulnerability], format: VulnFormat, writer: W) -> Result<(), VulnError> {
    if vulns.is_empty() {
        return Err(VulnError::EmptyReport);
    }
    match format {
        VulnFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            for v in vulns {
                w.serialize(v)?;
            }
            w.flush()?;
        }
        VulnFormat::Json => {
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, vulns)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn emit_to_path(
    vulns: &[FeatureVulnerability],
    format: VulnFormat,
    path: &std::path::Path,
) -> Result<(), VulnError> {
    if vulns.is_empty() {
        return Err(VulnError::EmptyReport);
    }
    let file = std::fs::File::create(path)?;
    emit(vulns, format, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{AttackMethod, PredictionOutcome};
    use crate::prompt::ParseError;

    fn run(feature: Option<&str>, impact: f64) -> AttackResult {
        let failed = PredictionOutcome::Failed(ParseError::MissingIntention);
        AttackResult {
            scenario_id: "s".into(),
            method: AttackMethod::DifferentialEvolution,
            rng_seed: 0,
            budget: 0.1,
            feature: feature.map(str::to_string),
            delta: 0.0,
            clean_fitness: 1.0,
            best_fitness: 1.0 + impact,
            trace: vec![],
            total_queries: 0,
            clean_prediction: failed.clone(),
            attacked_prediction: failed,
        }
    }

    #[test]
    fn hand_computed_means() {
        let rs =
            vec![run(Some("A"), 5.0), run(Some("B"), 5.0), run(Some("A"), 5.0), run(Some("A"), 0.2), run(None, 0.0)];
        let v = aggregate(&rs).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].feature.as_str(), v[0].selection_count), ("A", 3));
        assert!((v[0].mean_impact - 3.4).abs() < 1e-12);
        assert_eq!((v[1].feature.as_str(), v[1].mean_impact), ("B", 5.0));
        assert_eq!(v.iter().map(|x| x.selection_count).sum::<usize>(), 4);
    }

    #[test]
    fn ties_break_by_label() {
        let v = aggregate(&[run(Some("Z"), 1.0), run(Some("M"), 1.0)]).unwrap();
        assert_eq!(v[0].feature, "M");
    }

    #[test]
    fn empty_cases() {
        assert!(matches!(aggregate(&[]), Err(VulnError::EmptyResults)));
        assert!(matches!(emit(&[], VulnFormat::Csv, Vec::new()), Err(VulnError::EmptyReport)));
    }

    #[test]
    fn csv_and_json_outputs() {
        let v = aggregate(&[run(Some("A"), 1.0), run(Some("B"), 2.0)]).unwrap();
        let mut buf = Vec::new();
        emit(&v, VulnFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next(), Some("feature,selection_count,mean_impact,flip_rate"));

        let mut buf = Vec::new();
        emit(&v, VulnFormat::Json, &mut buf).unwrap();
        let back: Vec<FeatureVulnerability> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, v);
    }
}
