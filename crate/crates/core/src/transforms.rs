//! Coarse-grained ReLU optimization rewrites: Cull, Thin, ScaleCh,
//! ReLU-reuse, and the single-pass plan generator that chains them.
//!
//! All transforms are pure spec-to-spec rewrites. Cull and Thin touch only
//! the ReLU layout (FLOPs unchanged); ScaleCh touches only channel counts;
//! Reuse annotates surviving sites with a reuse factor, which the
//! accounting layer costs under the partition model.

use crate::accounting::{self, StageProfile};
use crate::criticality::{dominates, CriticalityOrder};
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, SiteRole};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransformStep {
    /// Remove every ReLU in one stage (stem included for Stage1).
    Cull { stage: usize },
    /// Drop alternate ReLU layers across the given stages: the stem and
    /// each block's first ReLU go inactive; each block's second survives.
    Thin { stages: Vec<usize> },
    /// Multiply every channel count (stem and stages) by num/den.
    ScaleCh { num: u32, den: u32 },
    /// Reuse ReLUs across channels: every active site activates only a
    /// 1/n channel slice. n in {4, 8, 16} uses the three-partition layer
    /// structure; n = 2 is the naive two-group split.
    Reuse { n: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub step: TransformStep,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransformPlan {
    pub steps: Vec<PlanStep>,
}

impl TransformPlan {
    pub fn push(&mut self, step: TransformStep, note: impl Into<String>) {
        self.steps.push(PlanStep { step, note: note.into() });
    }

    pub fn validate(&self) -> Result<()> {
        let culls = self
            .steps
            .iter()
            .filter(|s| matches!(s.step, TransformStep::Cull { .. }))
            .count();
        if culls > 1 {
            return Err(Error::InvalidNetwork("a plan carries at most one cull".into()));
        }
        for s in &self.steps {
            if let TransformStep::Reuse { n } = s.step {
                if !matches!(n, 2 | 4 | 8 | 16) {
                    return Err(Error::UnsupportedReuse(n));
                }
            }
        }
        Ok(())
    }

    /// Applies every step in order.
    pub fn apply(&self, spec: &NetworkSpec) -> Result<NetworkSpec> {
        self.validate()?;
        let mut out = spec.clone();
        for s in &self.steps {
            out = match &s.step {
                TransformStep::Cull { stage } => cull(&out, *stage)?,
                TransformStep::Thin { stages } => thin(&out, stages)?,
                TransformStep::ScaleCh { num, den } => scale_channels(&out, *num, *den)?,
                TransformStep::Reuse { n } => relu_reuse(&out, *n)?,
            };
        }
        Ok(out)
    }
}

fn check_stage(spec: &NetworkSpec, stage: usize) -> Result<()> {
    if stage == 0 || stage > spec.stage_count() {
        return Err(Error::UnknownStage(stage));
    }
    Ok(())
}

/// Deactivates every ReLU site in the stage. Convolutions (and so FLOPs and
/// parameters) are untouched. Idempotent.
pub fn cull(spec: &NetworkSpec, stage: usize) -> Result<NetworkSpec> {
    check_stage(spec, stage)?;
    let mut out = spec.clone();
    for site in &mut out.stages[stage - 1].relu_layout {
        site.active = false;
    }
    Ok(out)
}

/// Thins the selected stages: the stem site and each block's first ReLU go
/// inactive; each block's second ReLU keeps its current state.
pub fn thin(spec: &NetworkSpec, stages: &[usize]) -> Result<NetworkSpec> {
    for &s in stages {
        check_stage(spec, s)?;
    }
    let mut out = spec.clone();
    for &s in stages {
        let k = s - 1;
        let stage = &mut out.stages[k];
        for pos in 0..stage.relu_layout.len() {
            match stage.site_role(pos, k == 0) {
                SiteRole::Stem | SiteRole::BlockFirst(_) => stage.relu_layout[pos].active = false,
                SiteRole::BlockSecond(_) => {}
            }
        }
    }
    Ok(out)
}

/// Scales every channel count by num/den. Errors when any resulting count
/// is non-integral; ReLU counts scale by exactly the same factor.
pub fn scale_channels(spec: &NetworkSpec, num: u32, den: u32) -> Result<NetworkSpec> {
    if num == 0 || den == 0 {
        return Err(Error::InvalidNetwork("scale factor must be positive".into()));
    }
    let scaled = |c: u32, stage: usize| -> Result<u32> {
        let v = c as u64 * num as u64;
        if v % den as u64 != 0 {
            return Err(Error::NonIntegralChannels { stage, channels: c, num, den });
        }
        Ok((v / den as u64) as u32)
    };
    let mut out = spec.clone();
    out.base_channels = scaled(spec.base_channels, 0)?;
    for (k, stage) in out.stages.iter_mut().enumerate() {
        stage.channels = scaled(stage.channels, k + 1)?;
    }
    out.validate()?;
    Ok(out)
}

/// Channel divisor a reuse factor demands: lcm(4, n).
fn reuse_divisor(n: u32) -> Result<u32> {
    match n {
        2 => Ok(2),
        4 | 8 | 16 => Ok(n),
        other => Err(Error::UnsupportedReuse(other)),
    }
}

/// Sets reuse factor `n` on every active ReLU site. The site's layer is
/// costed as three partitions (reuse c/4 identity, activated c/n, the rest
/// conv-only) plus a 1x1 mixing convolution; n = 2 dispatches to the naive
/// two-group split.
pub fn relu_reuse(spec: &NetworkSpec, n: u32) -> Result<NetworkSpec> {
    let divisor = reuse_divisor(n)?;
    for (k, stage) in spec.stages.iter().enumerate() {
        for (pos, site) in stage.relu_layout.iter().enumerate() {
            if !site.active {
                continue;
            }
            let channels = match stage.site_role(pos, k == 0) {
                SiteRole::Stem => spec.base_channels,
                _ => stage.channels,
            };
            if channels % divisor != 0 {
                return Err(Error::ReuseDivisibility { n, divisor, stage: k + 1, channels });
            }
        }
    }
    let mut out = spec.clone();
    for stage in &mut out.stages {
        for site in &mut stage.relu_layout {
            if site.active {
                site.reuse_n = n;
            }
        }
    }
    Ok(out)
}

/// One generated network variant.
#[derive(Debug, Clone)]
pub struct PlanVariant {
    pub label: String,
    pub plan: TransformPlan,
    pub spec: NetworkSpec,
    pub profile: StageProfile,
}

/// Generates the single-pass optimization family for a spec under a
/// criticality order: the base (culled when the least critical stage holds
/// the ReLU plurality), the thinned network, its 0.5x channel scaling, and
/// reuse factors 4, 8, 16 on the thinned network. Variants whose
/// preconditions fail (odd channels, indivisible slices) are skipped.
/// Output is sorted by descending ReLU count.
pub fn generate_plan(spec: &NetworkSpec, order: &CriticalityOrder) -> Result<Vec<PlanVariant>> {
    if order.len() != spec.stage_count() {
        return Err(Error::IncompleteOrder { expected: spec.stage_count() });
    }
    let least = order.least_critical();
    let culled = dominates(spec, least)?;

    let mut base_plan = TransformPlan::default();
    let base = if culled {
        base_plan.push(
            TransformStep::Cull { stage: least },
            format!("S{least} is least critical and holds the ReLU plurality"),
        );
        cull(spec, least)?
    } else {
        spec.clone()
    };

    let remaining: Vec<usize> = (1..=spec.stage_count())
        .filter(|&s| !(culled && s == least))
        .collect();
    let mut thin_plan = base_plan.clone();
    thin_plan.push(
        TransformStep::Thin { stages: remaining.clone() },
        "drop ReLUs from alternate layers",
    );
    let thinned = thin(&base, &remaining)?;

    let mut variants = vec![
        PlanVariant {
            label: "base".into(),
            profile: accounting::profile(&base),
            plan: base_plan,
            spec: base,
        },
        PlanVariant {
            label: "thin".into(),
            profile: accounting::profile(&thinned),
            plan: thin_plan.clone(),
            spec: thinned.clone(),
        },
    ];

    if let Ok(scaled) = scale_channels(&thinned, 1, 2) {
        let mut plan = thin_plan.clone();
        plan.push(TransformStep::ScaleCh { num: 1, den: 2 }, "halve every channel count");
        variants.push(PlanVariant {
            label: "scale-0.5".into(),
            profile: accounting::profile(&scaled),
            plan,
            spec: scaled,
        });
    }

    for n in [4u32, 8, 16] {
        if let Ok(reused) = relu_reuse(&thinned, n) {
            let mut plan = thin_plan.clone();
            plan.push(
                TransformStep::Reuse { n },
                format!("activate a 1/{n} channel slice per surviving site"),
            );
            variants.push(PlanVariant {
                label: format!("reuse-{n}"),
                profile: accounting::profile(&reused),
                plan,
                spec: reused,
            });
        }
    }

    variants.sort_by(|a, b| {
        b.profile
            .total_relus
            .cmp(&a.profile.total_relus)
            .then_with(|| a.label.cmp(&b.label))
    });
    Ok(variants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::{stage_flops, stage_relus};
    use crate::network::{build_family, Family, InputDims, ScalingMethod};

    fn hrn(m: u32, a: u32, b: u32, g: u32) -> NetworkSpec {
        build_family(
            Family::ResNet18,
            m,
            ScalingMethod::Heterogeneous { alpha: a, beta: b, gamma: g },
            InputDims::cifar(),
            100,
        )
        .unwrap()
    }

    #[test]
    fn cull_stage1_resnet18() {
        let spec = build_family(Family::ResNet18, 64, ScalingMethod::Uniform, InputDims::cifar(), 100)
            .unwrap();
        let culled = cull(&spec, 1).unwrap();
        let (per, total) = stage_relus(&culled);
        assert_eq!(per[0], 0);
        assert_eq!(total, 557_056 - 327_680);
        // FLOPs untouched.
        assert_eq!(stage_flops(&spec).1, stage_flops(&culled).1);
        // Idempotent.
        assert_eq!(cull(&culled, 1).unwrap(), culled);
    }

    #[test]
    fn cull_removes_stem_site_too() {
        let spec = hrn(32, 2, 5, 3);
        let culled = cull(&spec, 1).unwrap();
        let (per_before, _) = stage_relus(&spec);
        assert_eq!(per_before[0], 163_840);
        assert_eq!(stage_relus(&culled).0[0], 0);
    }

    #[test]
    fn thin_all_hrn_5x5x3x() {
        let spec = hrn(16, 5, 5, 3);
        let thinned = thin(&spec, &[1, 2, 3, 4]).unwrap();
        let (_, total) = stage_relus(&thinned);
        assert_eq!(total, 163_328);
        assert_eq!(stage_flops(&spec).1, stage_flops(&thinned).1);
    }

    #[test]
    fn cull_then_thin_matches_table_chain() {
        let spec = hrn(32, 2, 5, 3);
        let out = thin(&cull(&spec, 1).unwrap(), &[2, 3, 4]).unwrap();
        assert_eq!(stage_relus(&out).1, 104_448);
    }

    #[test]
    fn thin_on_inactive_spec_is_noop() {
        let spec = hrn(16, 2, 5, 3);
        let mut dead = spec.clone();
        for stage in &mut dead.stages {
            for site in &mut stage.relu_layout {
                site.active = false;
            }
        }
        assert_eq!(thin(&dead, &[1, 2, 3, 4]).unwrap(), dead);
    }

    #[test]
    fn scale_channels_halves_relus() {
        let spec = thin(&cull(&hrn(16, 2, 5, 3), 1).unwrap(), &[2, 3, 4]).unwrap();
        assert_eq!(stage_relus(&spec).1, 52_224);
        let scaled = scale_channels(&spec, 1, 2).unwrap();
        assert_eq!(stage_relus(&scaled).1, 26_112);
        assert_eq!(scaled.base_channels, 8);
    }

    #[test]
    fn scale_identity_and_odd_error() {
        let spec = hrn(16, 2, 5, 3);
        assert_eq!(scale_channels(&spec, 1, 1).unwrap(), spec);
        let odd = NetworkSpec::from_stages("odd", InputDims::cifar(), 10, 16, &[2, 2], &[16, 33])
            .unwrap();
        assert!(matches!(
            scale_channels(&odd, 1, 2),
            Err(Error::NonIntegralChannels { stage: 2, .. })
        ));
    }

    #[test]
    fn reuse_divides_relus_exactly() {
        let thinned = thin(&cull(&hrn(16, 2, 5, 3), 1).unwrap(), &[2, 3, 4]).unwrap();
        for (n, want) in [(4u32, 13_056u64), (8, 6_528), (16, 3_264)] {
            let reused = relu_reuse(&thinned, n).unwrap();
            assert_eq!(stage_relus(&reused).1, want, "n={n}");
        }
    }

    #[test]
    fn reuse_rejects_bad_factor_and_divisibility() {
        let spec = hrn(16, 2, 5, 3);
        assert!(matches!(relu_reuse(&spec, 3), Err(Error::UnsupportedReuse(3))));
        let narrow =
            NetworkSpec::from_stages("narrow", InputDims::cifar(), 10, 16, &[2, 2], &[16, 12])
                .unwrap();
        assert!(matches!(
            relu_reuse(&narrow, 8),
            Err(Error::ReuseDivisibility { stage: 2, channels: 12, .. })
        ));
    }

    #[test]
    fn reuse_flops_near_targets() {
        let thinned = thin(&cull(&hrn(16, 2, 5, 3), 1).unwrap(), &[2, 3, 4]).unwrap();
        for (n, target) in [(4u32, 121.6e6), (8, 130.5e6), (16, 137.2e6)] {
            let reused = relu_reuse(&thinned, n).unwrap();
            let total = stage_flops(&reused).1 as f64;
            let rel = (total - target).abs() / target;
            assert!(rel < 0.10, "n={n}: {total} vs {target} ({rel:.3})");
        }
    }

    #[test]
    fn plan_for_2x5x3x_culls_stage1() {
        let order = CriticalityOrder::new(vec![3, 4, 2, 1]).unwrap();
        let variants = generate_plan(&hrn(16, 2, 5, 3), &order).unwrap();
        let base = &variants[0];
        assert!(base
            .plan
            .steps
            .iter()
            .any(|s| matches!(s.step, TransformStep::Cull { stage: 1 })));
    }

    #[test]
    fn plan_for_5x5x3x_has_no_cull_and_thins_all() {
        let order = CriticalityOrder::new(vec![3, 2, 4, 1]).unwrap();
        let variants = generate_plan(&hrn(16, 5, 5, 3), &order).unwrap();
        for v in &variants {
            assert!(!v.plan.steps.iter().any(|s| matches!(s.step, TransformStep::Cull { .. })));
        }
        let thin_variant = variants.iter().find(|v| v.label == "thin").unwrap();
        match &thin_variant.plan.steps.last().unwrap().step {
            TransformStep::Thin { stages } => assert_eq!(stages, &vec![1, 2, 3, 4]),
            other => panic!("unexpected step {other:?}"),
        }
        assert_eq!(thin_variant.profile.total_relus, 163_328);
    }

    #[test]
    fn plan_relus_descend() {
        let order = CriticalityOrder::new(vec![3, 4, 2, 1]).unwrap();
        let variants = generate_plan(&hrn(16, 2, 5, 3), &order).unwrap();
        let relus: Vec<u64> = variants.iter().map(|v| v.profile.total_relus).collect();
        let mut sorted = relus.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        assert_eq!(relus, sorted);
        assert_eq!(variants.len(), 6);
    }

    #[test]
    fn cull_thin_commute_on_disjoint_stages() {
        let spec = hrn(16, 5, 7, 2);
        let a = thin(&cull(&spec, 1).unwrap(), &[2, 3, 4]).unwrap();
        let b = cull(&thin(&spec, &[2, 3, 4]).unwrap(), 1).unwrap();
        assert_eq!(a, b);
    }
}
