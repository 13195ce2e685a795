//! Non-dominated frontiers over (ReLUs, FLOPs, accuracy, latency) and
//! iso-comparison improvement rows.
//!
//! Dominance is weak-Pareto: at least as good on every selected axis and
//! strictly better on one. Accuracy is always ingested, never computed
//! here.

use std::path::Path;

use crate::cost::CostEstimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Ours,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub label: String,
    pub relus: f64,
    /// MACs.
    pub flops: f64,
    /// Ingested top-1 accuracy, percent.
    pub accuracy: Option<f64>,
    pub cost: Option<CostEstimate>,
    pub source: Source,
}

impl DesignPoint {
    pub fn new(label: impl Into<String>, relus: f64, flops: f64) -> Self {
        Self {
            label: label.into(),
            relus,
            flops,
            accuracy: None,
            cost: None,
            source: Source::External,
        }
    }

    pub fn with_accuracy(mut self, acc: f64) -> Self {
        self.accuracy = Some(acc);
        self
    }

    pub fn with_cost(mut self, cost: CostEstimate) -> Self {
        self.cost = Some(cost);
        self
    }
}

/// Frontier axes. Accuracy is maximized; everything else minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Relus,
    Flops,
    Accuracy,
    Latency,
}

impl Axis {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "relus" | "relu" => Some(Axis::Relus),
            "flops" | "flop" => Some(Axis::Flops),
            "acc" | "accuracy" => Some(Axis::Accuracy),
            "lat" | "latency" => Some(Axis::Latency),
            _ => None,
        }
    }
}

/// Objective vector with minimization orientation on every entry.
fn objective_vector(p: &DesignPoint, axes: &[Axis]) -> Result<Vec<f64>> {
    axes.iter()
        .map(|axis| match axis {
            Axis::Relus => Ok(p.relus),
            Axis::Flops => Ok(p.flops),
            Axis::Accuracy => p
                .accuracy
                .map(|a| -a)
                .ok_or_else(|| Error::MissingAccuracy(p.label.clone())),
            Axis::Latency => p
                .cost
                .map(|c| c.total_seconds)
                .ok_or_else(|| Error::MissingCost(p.label.clone())),
        })
        .collect()
}

fn dominates_vec(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Non-dominated subset under the selected axes. Points with identical
/// objective vectors collapse to the lexicographically smallest label.
/// Output is ordered by ascending ReLU count, then label.
pub fn frontier(points: &[DesignPoint], axes: &[Axis]) -> Result<Vec<DesignPoint>> {
    if axes.is_empty() {
        return Err(Error::BadCalibration("frontier needs at least one axis".into()));
    }
    let vectors: Vec<Vec<f64>> = points
        .iter()
        .map(|p| objective_vector(p, axes))
        .collect::<Result<_>>()?;

    let mut keep: Vec<&DesignPoint> = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i != j && dominates_vec(&vectors[j], &vectors[i]) {
                continue 'outer;
            }
            // Duplicate objective vectors: deterministic tie-break by label.
            if i != j
                && vectors[i] == vectors[j]
                && (q.label.as_str(), j) < (p.label.as_str(), i)
            {
                continue 'outer;
            }
        }
        keep.push(p);
    }
    let mut out: Vec<DesignPoint> = keep.into_iter().cloned().collect();
    out.sort_by(|a, b| {
        a.relus
            .partial_cmp(&b.relus)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.label.cmp(&b.label))
    });
    Ok(out)
}

/// One improvement row: ratios are baseline/ours, the accuracy delta is
/// ours - baseline, everything rounded to one displayed decimal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementRow {
    pub relu_ratio: f64,
    pub flop_ratio: f64,
    pub acc_delta: f64,
    pub he_ratio: f64,
    pub gc_ratio: f64,
    pub lat_ratio: f64,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Iso-comparison of two costed design points.
pub fn iso_compare(baseline: &DesignPoint, ours: &DesignPoint) -> Result<ImprovementRow> {
    let bc = baseline
        .cost
        .ok_or_else(|| Error::MissingCost(baseline.label.clone()))?;
    let oc = ours.cost.ok_or_else(|| Error::MissingCost(ours.label.clone()))?;
    let ba = baseline
        .accuracy
        .ok_or_else(|| Error::MissingAccuracy(baseline.label.clone()))?;
    let oa = ours
        .accuracy
        .ok_or_else(|| Error::MissingAccuracy(ours.label.clone()))?;
    Ok(ImprovementRow {
        relu_ratio: round1(baseline.relus / ours.relus),
        flop_ratio: round1(baseline.flops / ours.flops),
        acc_delta: round1(oa - ba),
        he_ratio: round1(bc.he_seconds / oc.he_seconds),
        gc_ratio: round1(bc.gc_seconds / oc.gc_seconds),
        lat_ratio: round1(bc.total_seconds / oc.total_seconds),
    })
}

/// Reads `label,relus,flops_m,acc` rows.
pub fn read_results_csv(path: &Path, source: Source) -> Result<Vec<DesignPoint>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let label = record.get(0).unwrap_or("").trim().to_string();
        let relus: f64 = record
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad relu count for '{label}'")))?;
        let flops_m: f64 = record
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad flops_m for '{label}'")))?;
        let accuracy = match record.get(3).map(str::trim) {
            None | Some("") => None,
            Some(v) => {
                let acc: f64 = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad accuracy for '{label}'")))?;
                if !(0.0..=100.0).contains(&acc) {
                    return Err(Error::AccuracyOutOfRange { label, acc });
                }
                Some(acc)
            }
        };
        points.push(DesignPoint {
            label,
            relus,
            flops: flops_m * 1e6,
            accuracy,
            cost: None,
            source,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{estimate_counts, CostCalibration, Dataset};

    fn pt(label: &str, relus: f64, acc: f64) -> DesignPoint {
        DesignPoint::new(label, relus, 1e6).with_accuracy(acc)
    }

    #[test]
    fn single_point_is_its_own_frontier() {
        let p = vec![pt("a", 10.0, 50.0)];
        let f = frontier(&p, &[Axis::Relus, Axis::Accuracy]).unwrap();
        assert_eq!(f, p);
    }

    #[test]
    fn pareto_chain_all_survive() {
        // Descending ReLUs with descending accuracy: nothing dominates.
        let rows = [
            (163.3, 80.86),
            (104.4, 79.96),
            (52.2, 77.14),
            (26.1, 72.65),
            (13.1, 68.25),
            (6.5, 63.29),
            (3.2, 56.33),
        ];
        let points: Vec<DesignPoint> = rows
            .iter()
            .enumerate()
            .map(|(i, &(r, a))| pt(&format!("p{i}"), r, a))
            .collect();
        let f = frontier(&points, &[Axis::Relus, Axis::Accuracy]).unwrap();
        assert_eq!(f.len(), 7);
    }

    #[test]
    fn dominated_point_is_dropped() {
        let points = vec![pt("good", 10.0, 60.0), pt("bad", 20.0, 50.0)];
        let f = frontier(&points, &[Axis::Relus, Axis::Accuracy]).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].label, "good");
    }

    #[test]
    fn duplicates_collapse_by_label() {
        let points = vec![pt("b", 10.0, 60.0), pt("a", 10.0, 60.0)];
        let f = frontier(&points, &[Axis::Relus, Axis::Accuracy]).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].label, "a");
    }

    #[test]
    fn frontier_is_idempotent() {
        let points = vec![
            pt("a", 10.0, 60.0),
            pt("b", 20.0, 70.0),
            pt("c", 15.0, 55.0),
            pt("d", 30.0, 65.0),
        ];
        let once = frontier(&points, &[Axis::Relus, Axis::Accuracy]).unwrap();
        let twice = frontier(&once, &[Axis::Relus, Axis::Accuracy]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn iso_compare_identity_row() {
        let calib = CostCalibration::default_for(Dataset::Cifar100);
        let cost = estimate_counts(25_000, 559e6, &calib).unwrap();
        let a = pt("a", 25_000.0, 70.59).with_cost(cost);
        let row = iso_compare(&a, &a).unwrap();
        assert_eq!(row.relu_ratio, 1.0);
        assert_eq!(row.flop_ratio, 1.0);
        assert_eq!(row.acc_delta, 0.0);
        assert_eq!(row.lat_ratio, 1.0);
    }

    #[test]
    fn iso_compare_missing_cost_errors() {
        let a = pt("a", 25.0, 70.0);
        assert!(matches!(iso_compare(&a, &a), Err(Error::MissingCost(_))));
    }
}
