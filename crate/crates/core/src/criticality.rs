//! Stage criticality ordering from externally measured probe accuracies.
//!
//! A probe reports the accuracy a network reaches when only one stage keeps
//! its ReLUs. Stages whose ReLUs buy more accuracy are more critical. The
//! tool never trains anything; probe data arrives as CSV.

use std::path::Path;

use crate::accounting;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;

/// One stage's probe measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct StageProbe {
    /// 1-based stage id.
    pub stage_id: usize,
    pub relus_in_stage: u64,
    /// Vanilla training accuracy, percent.
    pub acc_vanilla: f64,
    /// Accuracy with knowledge distillation, percent (optional column).
    pub acc_kd: Option<f64>,
}

/// Stages ordered most -> least critical. Always a permutation of
/// `1..=len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalityOrder(Vec<usize>);

impl CriticalityOrder {
    /// Builds an order from 1-based stage ids, most critical first.
    pub fn new(stages: Vec<usize>) -> Result<Self> {
        let d = stages.len();
        let mut seen = vec![false; d];
        for &s in &stages {
            if s == 0 || s > d || seen[s - 1] {
                return Err(Error::IncompleteOrder { expected: d });
            }
            seen[s - 1] = true;
        }
        Ok(Self(stages))
    }

    /// Stage ids, most critical first.
    pub fn stages(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Least critical stage (1-based).
    pub fn least_critical(&self) -> usize {
        *self.0.last().expect("order is never empty")
    }

    /// "S3 > S2 > S4 > S1" style rendering.
    pub fn display(&self) -> String {
        self.0
            .iter()
            .map(|s| format!("S{s}"))
            .collect::<Vec<_>>()
            .join(" > ")
    }
}

/// Ranks stages most -> least critical by probe accuracy (the distilled
/// column when `use_kd` is set). Ties break toward the stage achieving the
/// accuracy with fewer ReLUs, then toward the lower stage index. The
/// minimum-accuracy stage lands last, matching the convention that the
/// least significant ReLUs score zero.
pub fn rank(probes: &[StageProbe], use_kd: bool) -> Result<CriticalityOrder> {
    if probes.len() < 2 {
        return Err(Error::NotEnoughProbes);
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in probes {
        if !seen.insert(p.stage_id) {
            return Err(Error::DuplicateStage(p.stage_id));
        }
    }
    let mut scored: Vec<(f64, u64, usize)> = probes
        .iter()
        .map(|p| {
            let acc = if use_kd {
                p.acc_kd.ok_or(Error::MissingKdColumn(p.stage_id))?
            } else {
                p.acc_vanilla
            };
            Ok((acc, p.relus_in_stage, p.stage_id))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    CriticalityOrder::new(scored.into_iter().map(|(_, _, s)| s).collect())
}

/// True iff the stage's share of the network's ReLUs is >= every other
/// stage's share (plurality, not majority).
pub fn dominates(spec: &NetworkSpec, stage_id: usize) -> Result<bool> {
    if stage_id == 0 || stage_id > spec.stage_count() {
        return Err(Error::UnknownStage(stage_id));
    }
    let fractions = accounting::relu_distribution(spec);
    let own = fractions[stage_id - 1];
    Ok(fractions.iter().all(|&f| own >= f))
}

/// Reads `stage,relus,acc,acc_kd` rows. The `acc_kd` column may be empty.
pub fn read_probes_csv(path: &Path) -> Result<Vec<StageProbe>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let mut probes = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::Parse(format!("probe row is missing column {i}")))
        };
        let stage_id: usize = field(0)?
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad stage id '{}'", field(0).unwrap())))?;
        let relus: u64 = field(1)?
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad relu count '{}'", field(1).unwrap())))?;
        let acc: f64 = field(2)?
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad accuracy '{}'", field(2).unwrap())))?;
        let acc_kd = match record.get(3).map(str::trim) {
            None | Some("") => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad distilled accuracy '{v}'")))?,
            ),
        };
        for (label, value) in [("acc", acc), ("acc_kd", acc_kd.unwrap_or(acc))] {
            if !(0.0..=100.0).contains(&value) {
                return Err(Error::Parse(format!(
                    "{label} {value} out of range [0, 100] for stage {stage_id}"
                )));
            }
        }
        probes.push(StageProbe { stage_id, relus_in_stage: relus, acc_vanilla: acc, acc_kd });
    }
    Ok(probes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_family, Family, InputDims, ScalingMethod};

    fn probes(rows: &[(usize, u64, f64)]) -> Vec<StageProbe> {
        rows.iter()
            .map(|&(s, r, kd)| StageProbe {
                stage_id: s,
                relus_in_stage: r,
                acc_vanilla: kd,
                acc_kd: Some(kd),
            })
            .collect()
    }

    #[test]
    fn resnet18_m16_order() {
        let p = probes(&[
            (1, 81_920, 52.67),
            (2, 32_768, 62.10),
            (3, 16_384, 64.64),
            (4, 8_192, 59.70),
        ]);
        let order = rank(&p, true).unwrap();
        assert_eq!(order.stages(), &[3, 2, 4, 1]);
    }

    #[test]
    fn hrn_2x5x3x_order_shifts() {
        let p = probes(&[
            (1, 81_920, 53.68),
            (2, 32_768, 61.30),
            (3, 40_960, 68.17),
            (4, 30_720, 63.83),
        ]);
        let order = rank(&p, true).unwrap();
        assert_eq!(order.stages(), &[3, 4, 2, 1]);
    }

    #[test]
    fn tie_breaks_toward_fewer_relus() {
        let p = probes(&[(1, 20, 60.0), (2, 10, 60.0)]);
        let order = rank(&p, true).unwrap();
        assert_eq!(order.stages(), &[2, 1]);
    }

    #[test]
    fn rank_is_scale_invariant() {
        let base = probes(&[(1, 10, 52.6), (2, 20, 62.1), (3, 30, 64.6), (4, 40, 59.7)]);
        let scaled: Vec<StageProbe> = base
            .iter()
            .map(|p| StageProbe {
                acc_vanilla: p.acc_vanilla * 0.5,
                acc_kd: p.acc_kd.map(|a| a * 0.5),
                ..p.clone()
            })
            .collect();
        assert_eq!(rank(&base, true).unwrap(), rank(&scaled, true).unwrap());
    }

    #[test]
    fn duplicate_and_empty_inputs_error() {
        let dup = probes(&[(1, 10, 50.0), (1, 20, 60.0)]);
        assert!(matches!(rank(&dup, false), Err(Error::DuplicateStage(1))));
        assert!(matches!(rank(&[], false), Err(Error::NotEnoughProbes)));
    }

    #[test]
    fn stage1_dominates_resnet18() {
        let spec =
            build_family(Family::ResNet18, 64, ScalingMethod::Uniform, InputDims::cifar(), 100)
                .unwrap();
        assert!(dominates(&spec, 1).unwrap());
        assert!(!dominates(&spec, 2).unwrap());
    }

    #[test]
    fn stage1_does_not_dominate_hrn_5x5x3x() {
        let spec = build_family(
            Family::ResNet18,
            16,
            ScalingMethod::Heterogeneous { alpha: 5, beta: 5, gamma: 3 },
            InputDims::cifar(),
            100,
        )
        .unwrap();
        assert!(!dominates(&spec, 1).unwrap());
        assert!(dominates(&spec, 3).unwrap());
    }

    #[test]
    fn equal_fractions_both_dominate() {
        let spec = crate::network::NetworkSpec::from_stages(
            "two-equal",
            InputDims::new(8, 8, 3),
            10,
            16,
            &[2, 2],
            &[16, 80],
        )
        .unwrap();
        // Stage1: (stem + 4 sites) * 16ch * 64px = Stage2: 4 sites * 80ch * 16px.
        let (per, _) = crate::accounting::stage_relus(&spec);
        assert_eq!(per[0], per[1]);
        assert!(dominates(&spec, 1).unwrap());
        assert!(dominates(&spec, 2).unwrap());
    }

    #[test]
    fn unknown_stage_errors() {
        let spec =
            build_family(Family::ResNet18, 16, ScalingMethod::Uniform, InputDims::cifar(), 100)
                .unwrap();
        assert!(matches!(dominates(&spec, 5), Err(Error::UnknownStage(5))));
    }
}
