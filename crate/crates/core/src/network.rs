//! Stage-based architectural IR for four-stage (and three-stage) residual
//! networks, family constructors, and the JSON document format.
//!
//! A network is a stem convolution, a sequence of stages of identical basic
//! blocks (two 3x3 convolutions, each followed by a ReLU site), and a head
//! (global average pool + fully connected). Spatial resolution halves at
//! every stage boundary after Stage1. The stem's ReLU site is attributed to
//! Stage1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input feature-map dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputDims {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
}

impl InputDims {
    pub const fn new(height: u32, width: u32, channels: u32) -> Self {
        Self { height, width, channels }
    }

    /// 32x32x3 (CIFAR-style input).
    pub const fn cifar() -> Self {
        Self::new(32, 32, 3)
    }

    /// 64x64x3 (TinyImageNet-style input).
    pub const fn tiny_imagenet() -> Self {
        Self::new(64, 64, 3)
    }
}

/// One ReLU position. `reuse_n` > 1 means the site activates only a 1/N
/// slice of its channels; `active == false` means the nonlinearity has been
/// removed entirely (the convolution stays).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReluSite {
    /// Topological index over the whole network; the stem site is 0.
    pub site: u32,
    pub active: bool,
    pub reuse_n: u32,
}

/// Which convolution a ReLU site follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteRole {
    /// The stem convolution (counted with Stage1).
    Stem,
    /// First 3x3 convolution of block `b` within its stage.
    BlockFirst(usize),
    /// Second 3x3 convolution of block `b` within its stage.
    BlockSecond(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    /// Stage compute ratio: number of basic blocks.
    pub blocks: u32,
    /// Output channels of every block in the stage.
    pub channels: u32,
    /// One entry per ReLU site: the stem (Stage1 only) then two per block.
    pub relu_layout: Vec<ReluSite>,
}

impl StageSpec {
    /// Number of ReLU sites this stage holds.
    pub fn site_count(&self, is_first_stage: bool) -> usize {
        2 * self.blocks as usize + usize::from(is_first_stage)
    }

    /// Role of the site at position `pos` in `relu_layout`.
    pub fn site_role(&self, pos: usize, is_first_stage: bool) -> SiteRole {
        if is_first_stage {
            if pos == 0 {
                return SiteRole::Stem;
            }
            let p = pos - 1;
            if p % 2 == 0 {
                SiteRole::BlockFirst(p / 2)
            } else {
                SiteRole::BlockSecond(p / 2)
            }
        } else if pos % 2 == 0 {
            SiteRole::BlockFirst(pos / 2)
        } else {
            SiteRole::BlockSecond(pos / 2)
        }
    }
}

/// Full architectural description of a stem/stages/head residual network.
/// Immutable after construction; transforms return rewritten copies.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub name: String,
    pub input: InputDims,
    pub num_classes: u32,
    /// Stem output channels, `m`.
    pub base_channels: u32,
    /// Spatial kernel extent `f` of the 3x3 body convolutions (default 3).
    pub kernel_size: u32,
    pub stages: Vec<StageSpec>,
}

impl NetworkSpec {
    /// Builds a spec from block counts and channel lists, with a fresh
    /// all-active ReLU layout.
    pub fn from_stages(
        name: impl Into<String>,
        input: InputDims,
        num_classes: u32,
        base_channels: u32,
        blocks: &[u32],
        channels: &[u32],
    ) -> Result<Self> {
        assert_eq!(blocks.len(), channels.len());
        let stages = blocks
            .iter()
            .zip(channels)
            .map(|(&b, &c)| StageSpec { blocks: b, channels: c, relu_layout: Vec::new() })
            .collect();
        let mut spec = Self {
            name: name.into(),
            input,
            num_classes,
            base_channels,
            kernel_size: 3,
            stages,
        };
        spec.rebuild_layout();
        spec.validate()?;
        Ok(spec)
    }

    /// Reassigns topological site indices and marks every site active with
    /// no reuse. Used on construction and after structural edits.
    pub fn rebuild_layout(&mut self) {
        let mut next = 0u32;
        for (k, stage) in self.stages.iter_mut().enumerate() {
            let count = 2 * stage.blocks as usize + usize::from(k == 0);
            stage.relu_layout = (0..count)
                .map(|_| {
                    let s = ReluSite { site: next, active: true, reuse_n: 1 };
                    next += 1;
                    s
                })
                .collect();
        }
    }

    /// Spatial size of stage `k` (0-based): input halved k times.
    pub fn stage_dims(&self, k: usize) -> (u32, u32) {
        (self.input.height >> k, self.input.width >> k)
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Total number of ReLU sites: 1 (stem) + sum over stages of 2*blocks.
    pub fn site_count(&self) -> usize {
        1 + self.stages.iter().map(|s| 2 * s.blocks as usize).sum::<usize>()
    }

    /// Channels feeding stage `k`: the nearest preceding stage that
    /// actually has blocks (zero-block stages pass their input through),
    /// else the stem output.
    pub fn stage_input_channels(&self, k: usize) -> u32 {
        self.stages[..k]
            .iter()
            .rev()
            .find(|s| s.blocks > 0)
            .map(|s| s.channels)
            .unwrap_or(self.base_channels)
    }

    /// True when any site reuses its ReLU across a channel slice.
    pub fn has_reuse(&self) -> bool {
        self.stages
            .iter()
            .any(|s| s.relu_layout.iter().any(|r| r.reuse_n > 1))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.stages.len();
        if d == 0 {
            return Err(Error::InvalidNetwork("network needs at least one stage".into()));
        }
        if self.base_channels == 0 {
            return Err(Error::InvalidNetwork("stem channels must be >= 1".into()));
        }
        if self.kernel_size == 0 {
            return Err(Error::InvalidNetwork("kernel size must be >= 1".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidNetwork("class count must be >= 1".into()));
        }
        let shrink = 1u32 << (d - 1);
        if self.input.height % shrink != 0 || self.input.width % shrink != 0 || self.input.height < shrink || self.input.width < shrink {
            return Err(Error::InvalidNetwork(format!(
                "input {}x{} cannot be halved {} times",
                self.input.height,
                self.input.width,
                d - 1
            )));
        }
        let mut next = 0u32;
        for (k, stage) in self.stages.iter().enumerate() {
            if stage.channels == 0 {
                return Err(Error::InvalidNetwork(format!("stage {} has zero channels", k + 1)));
            }
            let want = stage.site_count(k == 0);
            if stage.relu_layout.len() != want {
                return Err(Error::InvalidNetwork(format!(
                    "stage {} declares {} blocks but carries {} ReLU sites (expected {})",
                    k + 1,
                    stage.blocks,
                    stage.relu_layout.len(),
                    want
                )));
            }
            for site in &stage.relu_layout {
                if site.site != next {
                    return Err(Error::InvalidNetwork(format!(
                        "ReLU site indices must be topological: expected {}, found {}",
                        next, site.site
                    )));
                }
                if site.reuse_n == 0 {
                    return Err(Error::InvalidNetwork("reuse_n must be >= 1".into()));
                }
                next += 1;
            }
        }
        Ok(())
    }
}

/// Channel scaling taxonomy. Uniform fixes every stagewise multiplier at 2;
/// homogeneous uses one shared factor; heterogeneous frees them all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMethod {
    Uniform,
    Homogeneous(u32),
    Heterogeneous { alpha: u32, beta: u32, gamma: u32 },
}

impl ScalingMethod {
    /// Stagewise multipliers for a network with `count` channel steps
    /// (stage count minus one).
    pub fn multipliers(&self, count: usize) -> Result<Vec<u32>> {
        let all = match *self {
            ScalingMethod::Uniform => [2, 2, 2],
            ScalingMethod::Homogeneous(s) => [s, s, s],
            ScalingMethod::Heterogeneous { alpha, beta, gamma } => [alpha, beta, gamma],
        };
        if count > all.len() {
            return Err(Error::InvalidNetwork(format!(
                "no multipliers defined beyond a 4-stage network (asked for {count})"
            )));
        }
        let m = all[..count].to_vec();
        if m.iter().any(|&x| x < 1) {
            return Err(Error::InvalidNetwork("channel multipliers must be >= 1".into()));
        }
        Ok(m)
    }
}

/// Supported backbone families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    ResNet18,
    ResNet20,
    ResNet32,
    ResNet34,
    ResNet56,
    WideResNet { depth: u32, widen: u32 },
}

impl Family {
    /// Stage compute ratios for this family.
    pub fn stage_blocks(&self) -> Result<Vec<u32>> {
        match *self {
            Family::ResNet18 => Ok(vec![2, 2, 2, 2]),
            Family::ResNet34 => Ok(vec![3, 4, 6, 3]),
            Family::ResNet20 => Ok(vec![3, 3, 3]),
            Family::ResNet32 => Ok(vec![5, 5, 5]),
            Family::ResNet56 => Ok(vec![9, 9, 9]),
            Family::WideResNet { depth, .. } => {
                if depth < 10 || (depth - 4) % 6 != 0 {
                    return Err(Error::InvalidDepth {
                        family: "WideResNet",
                        depth,
                        expected: "6n+4 with n >= 1",
                    });
                }
                let n = (depth - 4) / 6;
                Ok(vec![n, n, n])
            }
        }
    }
}

/// Constructs a family member. Stage channels follow
/// `[m, am, abm, abgm]` for four-stage families and `[m, l1*m, l1*l2*m]`
/// for three-stage ones; WideResNet fixes the stem at 16 channels and
/// scales stages by its widen factor.
pub fn build_family(
    family: Family,
    m: u32,
    scaling: ScalingMethod,
    input: InputDims,
    num_classes: u32,
) -> Result<NetworkSpec> {
    let blocks = family.stage_blocks()?;
    if let Family::WideResNet { depth, widen } = family {
        if m != 16 {
            return Err(Error::InvalidNetwork(format!(
                "WideResNet keeps a 16-channel stem (got m={m})"
            )));
        }
        if widen == 0 {
            return Err(Error::InvalidNetwork("widen factor must be >= 1".into()));
        }
        if !matches!(scaling, ScalingMethod::Uniform) {
            return Err(Error::InvalidNetwork(
                "WideResNet scales channels through its widen factor; use uniform scaling".into(),
            ));
        }
        let channels: Vec<u32> = [16, 32, 64].iter().map(|c| c * widen).collect();
        return NetworkSpec::from_stages(
            format!("WRN{depth}x{widen}"),
            input,
            num_classes,
            16,
            &blocks,
            &channels,
        );
    }

    if m == 0 {
        return Err(Error::InvalidNetwork("base channels must be >= 1".into()));
    }
    let lambdas = scaling.multipliers(blocks.len() - 1)?;
    let mut channels = vec![m];
    for l in &lambdas {
        channels.push(channels.last().unwrap() * l);
    }
    let fam = match family {
        Family::ResNet18 => "ResNet18",
        Family::ResNet20 => "ResNet20",
        Family::ResNet32 => "ResNet32",
        Family::ResNet34 => "ResNet34",
        Family::ResNet56 => "ResNet56",
        Family::WideResNet { .. } => unreachable!(),
    };
    let name = match scaling {
        ScalingMethod::Uniform => format!("{fam}(m={m})"),
        ScalingMethod::Homogeneous(s) => {
            let tags: Vec<String> = lambdas.iter().map(|_| format!("{s}x")).collect();
            format!("{fam}(m={m})-{}", tags.join(""))
        }
        ScalingMethod::Heterogeneous { .. } => {
            let tags: Vec<String> = lambdas.iter().map(|l| format!("{l}x")).collect();
            format!("HRN-{}(m={m})", tags.join(""))
        }
    };
    NetworkSpec::from_stages(name, input, num_classes, m, &blocks, &channels)
}

// --- JSON document format -------------------------------------------------

const DOC_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDoc {
    h: u32,
    w: u32,
    c: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    blocks: u32,
    channels: u32,
    relu_layout: Vec<ReluSite>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    version: u32,
    name: String,
    input: InputDoc,
    classes: u32,
    m: u32,
    f: u32,
    stages: Vec<StageDoc>,
}

/// Serializes a spec to the versioned JSON document (stable field order,
/// trailing newline).
pub fn serialize(spec: &NetworkSpec) -> String {
    let doc = NetworkDoc {
        version: DOC_VERSION,
        name: spec.name.clone(),
        input: InputDoc { h: spec.input.height, w: spec.input.width, c: spec.input.channels },
        classes: spec.num_classes,
        m: spec.base_channels,
        f: spec.kernel_size,
        stages: spec
            .stages
            .iter()
            .map(|s| StageDoc {
                blocks: s.blocks,
                channels: s.channels,
                relu_layout: s.relu_layout.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("spec serialization cannot fail");
    text.push('\n');
    text
}

/// Parses a versioned JSON document back into a validated spec.
pub fn deserialize(text: &str) -> Result<NetworkSpec> {
    let doc: NetworkDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.version != DOC_VERSION {
        return Err(Error::UnsupportedVersion(doc.version));
    }
    let spec = NetworkSpec {
        name: doc.name,
        input: InputDims::new(doc.input.h, doc.input.w, doc.input.c),
        num_classes: doc.classes,
        base_channels: doc.m,
        kernel_size: doc.f,
        stages: doc
            .stages
            .into_iter()
            .map(|s| StageSpec { blocks: s.blocks, channels: s.channels, relu_layout: s.relu_layout })
            .collect(),
    };
    spec.validate()?;
    Ok(spec)
}
