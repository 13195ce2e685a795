//! Shared test oracles: an independent layer-by-layer cost enumerator and
//! a random-spec generator. The enumerator propagates concrete tensor
//! shapes through the network, listing every convolution explicitly; it
//! shares no arithmetic with the library's per-stage closed forms.

use rand::rngs::StdRng;
use rand::Rng;
use reluforge::network::{InputDims, NetworkSpec};

/// One concrete operation with explicit shapes.
#[derive(Debug, Clone)]
pub struct LayerRecord {
    /// 0-based stage this op belongs to; stem counts with stage 0.
    pub stage: usize,
    pub kernel: u64,
    pub c_in: u64,
    pub c_out: u64,
    pub h_out: u64,
    pub w_out: u64,
    /// (active, reuse_n) when a ReLU follows this op.
    pub relu: Option<(bool, u32)>,
}

impl LayerRecord {
    pub fn dense_macs(&self) -> u64 {
        self.kernel * self.kernel * self.c_in * self.c_out * self.h_out * self.w_out
    }

    pub fn params(&self) -> u64 {
        self.kernel * self.kernel * self.c_in * self.c_out
    }

    pub fn macs(&self) -> u64 {
        match self.relu {
            Some((true, n)) if n > 1 => {
                let base = self.dense_macs() as u128;
                let (num, den) = match n {
                    2 => (1u128, 2u128),
                    n => {
                        let n = n as u128;
                        ((3 * n - 4) * (3 * n - 4) + 16, 16 * n * n)
                    }
                };
                let mix = (self.c_in * self.c_out * self.h_out * self.w_out) as u128;
                (base * num / den + mix) as u64
            }
            _ => self.dense_macs(),
        }
    }

    pub fn relus(&self) -> u64 {
        match self.relu {
            Some((true, n)) => self.c_out * self.h_out * self.w_out / n as u64,
            _ => 0,
        }
    }
}

/// Walks the network, propagating (channels, height, width) op by op.
pub fn enumerate_layers(spec: &NetworkSpec) -> (Vec<LayerRecord>, u64 /* head macs+params */) {
    let f = spec.kernel_size as u64;
    let mut layers = Vec::new();

    let mut c = spec.input.channels as u64;
    let mut h = spec.input.height as u64;
    let mut w = spec.input.width as u64;

    // Stem: 3x3, full resolution, ReLU attributed to stage 0.
    let stem_site = spec.stages[0].relu_layout[0];
    layers.push(LayerRecord {
        stage: 0,
        kernel: f,
        c_in: c,
        c_out: spec.base_channels as u64,
        h_out: h,
        w_out: w,
        relu: Some((stem_site.active, stem_site.reuse_n)),
    });
    c = spec.base_channels as u64;

    for (k, stage) in spec.stages.iter().enumerate() {
        if k > 0 {
            h /= 2;
            w /= 2;
        }
        let c_stage = stage.channels as u64;
        let mut site_pos = usize::from(k == 0);
        for b in 0..stage.blocks as usize {
            let block_in = if b == 0 { c } else { c_stage };
            for conv in 0..2 {
                let c_in = if conv == 0 { block_in } else { c_stage };
                let site = stage.relu_layout[site_pos];
                site_pos += 1;
                layers.push(LayerRecord {
                    stage: k,
                    kernel: f,
                    c_in,
                    c_out: c_stage,
                    h_out: h,
                    w_out: w,
                    relu: Some((site.active, site.reuse_n)),
                });
            }
            if b == 0 && k > 0 {
                // Shortcut projection, no ReLU.
                layers.push(LayerRecord {
                    stage: k,
                    kernel: 1,
                    c_in: block_in,
                    c_out: c_stage,
                    h_out: h,
                    w_out: w,
                    relu: None,
                });
            }
        }
        if stage.blocks > 0 {
            c = c_stage;
        }
    }

    let head = c * spec.num_classes as u64;
    (layers, head)
}

pub fn brute_stage_relus(spec: &NetworkSpec) -> (Vec<u64>, u64) {
    let (layers, _) = enumerate_layers(spec);
    let mut per = vec![0u64; spec.stage_count()];
    for l in &layers {
        per[l.stage] += l.relus();
    }
    let total = per.iter().sum();
    (per, total)
}

/// Stage ReLU counts with the stem's site excluded from Stage1: the
/// quantity the equalization chain orders.
pub fn brute_body_relus(spec: &NetworkSpec) -> Vec<u64> {
    let (layers, _) = enumerate_layers(spec);
    let mut per = vec![0u64; spec.stage_count()];
    for (i, l) in layers.iter().enumerate() {
        if i == 0 {
            continue; // stem
        }
        per[l.stage] += l.relus();
    }
    per
}

pub fn brute_total_flops(spec: &NetworkSpec) -> u64 {
    let (layers, head) = enumerate_layers(spec);
    layers.iter().map(LayerRecord::macs).sum::<u64>() + head
}

pub fn brute_total_params(spec: &NetworkSpec) -> u64 {
    let (layers, head) = enumerate_layers(spec);
    layers.iter().map(LayerRecord::params).sum::<u64>() + head
}

/// A random valid spec: 1-4 stages, occasional zero-block stages, channel
/// counts that occasionally allow reuse factors.
pub fn random_spec(rng: &mut StdRng) -> NetworkSpec {
    let d = rng.gen_range(1..=4usize);
    let side = *[16u32, 32, 64].get(rng.gen_range(0..3)).unwrap();
    let m = rng.gen_range(1..=8u32) * if rng.gen_bool(0.5) { 16 } else { 1 };
    let mut blocks = Vec::with_capacity(d);
    let mut channels = Vec::with_capacity(d);
    let mut c = m.max(1);
    for k in 0..d {
        let b = if k > 0 && rng.gen_bool(0.15) { 0 } else { rng.gen_range(1..=4u32) };
        blocks.push(b);
        if k > 0 {
            c = (c * rng.gen_range(1..=4u32)).min(2048);
        }
        channels.push(c);
    }
    let classes = rng.gen_range(2..=1000u32);
    NetworkSpec::from_stages(
        format!("random-{d}s"),
        InputDims::new(side, side, 3),
        classes,
        m,
        &blocks,
        &channels,
    )
    .expect("generator emits valid specs")
}
