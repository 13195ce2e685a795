//! Exact per-stage ReLU, FLOP, and parameter accounting.
//!
//! Counting conventions:
//! - one multiply-accumulate is one FLOP; batch norm, elementwise adds, and
//!   pooling are free;
//! - every convolution costs `f^2 * c_in * c_out * h_out * w_out` MACs and
//!   `f^2 * c_in * c_out` parameters (1x1 projections with f = 1);
//! - a ReLU site over `c` channels at `h x w` contributes `c*h*w / reuse_n`
//!   ReLUs;
//! - the first block of every stage after Stage1 downsamples: stride 2 on
//!   its first convolution and on its 1x1 shortcut projection. Stage1
//!   blocks carry no projection;
//! - the stem's ReLU and cost are attributed to Stage1; the head
//!   (global average pool + FC) contributes `c_last * classes` FLOPs and
//!   parameters but no ReLU.
//!
//! A layer whose active ReLU site reuses its channels (reuse_n = N) is
//! costed under the partition model: the reuse quarter is an identity copy,
//! the activated 1/N slice and the remaining conv-only slice are grouped
//! convolutions reading their own input slice, and one full 1x1
//! cross-channel mixing convolution is added.

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, SiteRole};

/// Raw counts for one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageCounts {
    pub relus: u64,
    pub flops: u64,
    pub params: u64,
}

/// Per-stage and total counts plus ReLU distribution fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct StageProfile {
    pub per_stage: Vec<StageCounts>,
    pub head_flops: u64,
    pub head_params: u64,
    pub total_relus: u64,
    pub total_flops: u64,
    pub total_params: u64,
    /// Fraction of the network's ReLUs held by each stage; sums to 1.
    pub relu_fractions: Vec<f64>,
}

/// Cost fraction of a partition-rewritten convolution relative to its dense
/// cost, as an exact rational (numerator, denominator).
///
/// N = 2 is the naive two-group split (one conv-only half, one activated
/// half); N in {4, 8, 16} is the three-partition scheme.
fn reuse_cost_fraction(n: u32) -> (u64, u64) {
    match n {
        0 | 1 => (1, 1),
        2 => (1, 2),
        n if n % 4 == 0 => {
            let n = n as u64;
            ((3 * n - 4).pow(2) + 16, 16 * n * n)
        }
        // Validated at transform time; anything else is costed densely.
        _ => (1, 1),
    }
}

fn conv_flops(f: u64, c_in: u64, c_out: u64, h: u64, w: u64) -> u64 {
    f * f * c_in * c_out * h * w
}

/// Dense conv cost scaled by the reuse fraction, plus the 1x1 mixing conv.
fn rewritten_conv_flops(f: u64, c_in: u64, c_out: u64, h: u64, w: u64, n: u32) -> u64 {
    let base = conv_flops(f, c_in, c_out, h, w) as u128;
    let (num, den) = reuse_cost_fraction(n);
    let grouped = base * num as u128 / den as u128;
    let mix = (c_in * c_out * h * w) as u128;
    (grouped + mix) as u64
}

fn profile_inner(spec: &NetworkSpec, honor_reuse: bool) -> StageProfile {
    let f = spec.kernel_size as u64;
    let mut per_stage = Vec::with_capacity(spec.stage_count());

    for (k, stage) in spec.stages.iter().enumerate() {
        let (h, w) = spec.stage_dims(k);
        let (h, w) = (h as u64, w as u64);
        let c = stage.channels as u64;
        let mut counts = StageCounts::default();

        for (pos, site) in stage.relu_layout.iter().enumerate() {
            let role = stage.site_role(pos, k == 0);
            let (c_in, c_out) = match role {
                SiteRole::Stem => (spec.input.channels as u64, spec.base_channels as u64),
                SiteRole::BlockFirst(b) => {
                    let c_in = if b == 0 { spec.stage_input_channels(k) as u64 } else { c };
                    (c_in, c)
                }
                SiteRole::BlockSecond(_) => (c, c),
            };
            let n = if honor_reuse { site.reuse_n } else { 1 };
            if site.active {
                counts.relus += c_out * h * w / n as u64;
            }
            counts.flops += if site.active && n > 1 {
                rewritten_conv_flops(f, c_in, c_out, h, w, n)
            } else {
                conv_flops(f, c_in, c_out, h, w)
            };
            counts.params += f * f * c_in * c_out;
        }

        // 1x1 shortcut projection on the downsampling block.
        if k > 0 && stage.blocks > 0 {
            let c_in = spec.stage_input_channels(k) as u64;
            counts.flops += c_in * c * h * w;
            counts.params += c_in * c;
        }

        per_stage.push(counts);
    }

    let c_last = spec.stage_input_channels(spec.stage_count()) as u64;
    let head = c_last * spec.num_classes as u64;

    let total_relus: u64 = per_stage.iter().map(|s| s.relus).sum();
    let total_flops: u64 = per_stage.iter().map(|s| s.flops).sum::<u64>() + head;
    let total_params: u64 = per_stage.iter().map(|s| s.params).sum::<u64>() + head;
    let relu_fractions = per_stage
        .iter()
        .map(|s| if total_relus == 0 { 0.0 } else { s.relus as f64 / total_relus as f64 })
        .collect();

    StageProfile {
        per_stage,
        head_flops: head,
        head_params: head,
        total_relus,
        total_flops,
        total_params,
        relu_fractions,
    }
}

/// Full profile of a spec under its current ReLU layout.
pub fn profile(spec: &NetworkSpec) -> StageProfile {
    profile_inner(spec, true)
}

/// Per-stage ReLU counts (stem attributed to Stage1) and the total.
pub fn stage_relus(spec: &NetworkSpec) -> (Vec<u64>, u64) {
    let p = profile(spec);
    let per: Vec<u64> = p.per_stage.iter().map(|s| s.relus).collect();
    (per, p.total_relus)
}

/// Per-stage MAC counts and the total (head included in the total).
pub fn stage_flops(spec: &NetworkSpec) -> (Vec<u64>, u64) {
    let p = profile(spec);
    let per: Vec<u64> = p.per_stage.iter().map(|s| s.flops).collect();
    (per, p.total_flops)
}

/// Per-stage parameter counts and the total.
pub fn stage_params(spec: &NetworkSpec) -> (Vec<u64>, u64) {
    let p = profile(spec);
    let per: Vec<u64> = p.per_stage.iter().map(|s| s.params).collect();
    (per, p.total_params)
}

/// Total FLOPs with reuse rewrites ignored (every convolution dense).
/// This is the figure homomorphic-latency estimation uses, since grouped
/// convolutions bring no benefit there.
pub fn dense_flops(spec: &NetworkSpec) -> u64 {
    profile_inner(spec, false).total_flops
}

/// Stagewise ReLU distribution fractions (sum to 1).
pub fn relu_distribution(spec: &NetworkSpec) -> Vec<f64> {
    profile(spec).relu_fractions
}

/// Stage ReLU counts over block sites only (the stem excluded), with the
/// layout ignored. These are the weights the equalization chain compares:
/// `2 * blocks_k * c_k * d_k^2`.
pub fn body_stage_relus(spec: &NetworkSpec) -> Vec<u64> {
    spec.stages
        .iter()
        .enumerate()
        .map(|(k, stage)| {
            let (h, w) = spec.stage_dims(k);
            2 * stage.blocks as u64 * stage.channels as u64 * h as u64 * w as u64
        })
        .collect()
}

/// Analytical per-stage complexity ratios `(params/relu, flops/relu)` for a
/// four-stage network: `flops/relu = f^2 * c_k` and
/// `params/relu = f^2 * c_k / d_k^2`.
pub fn complexity_ratios(spec: &NetworkSpec) -> Result<Vec<(f64, f64)>> {
    if spec.stage_count() != 4 {
        return Err(Error::InvalidNetwork(format!(
            "complexity ratios are defined for 4-stage networks, got {} stages",
            spec.stage_count()
        )));
    }
    let f2 = (spec.kernel_size * spec.kernel_size) as f64;
    Ok(spec
        .stages
        .iter()
        .enumerate()
        .map(|(k, stage)| {
            let (h, w) = spec.stage_dims(k);
            let c = stage.channels as f64;
            (f2 * c / (h as f64 * w as f64), f2 * c)
        })
        .collect())
}

/// Normalized stagewise profiles for multipliers `(a, b, g)`, scaled so
/// Stage1 reads 64: FLOPs follow `[1, a^2/4, (ab)^2/16, (abg)^2/64]` and
/// ReLUs `[1, a/4, ab/16, abg/64]`. Exact integers for integer multipliers.
pub fn normalized_profile(a: u32, b: u32, g: u32) -> ([u64; 4], [u64; 4]) {
    let (a, b, g) = (a as u64, b as u64, g as u64);
    let flops = [64, 16 * a * a, 4 * a * a * b * b, a * a * b * b * g * g];
    let relus = [64, 16 * a, 4 * a * b, a * b * g];
    (flops, relus)
}
