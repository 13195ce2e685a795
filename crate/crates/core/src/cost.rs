//! Private-inference cost model: garbled-circuit latency and storage from
//! ReLU counts, homomorphic latency from an anchor table, and their
//! composition.
//!
//! GC cost is linear in the ReLU count with zero intercept. HE latency is
//! deliberately not a linear function of FLOPs: measured latencies depend
//! on packing, rotation counts, and slot utilization, so the model
//! interpolates a table of measured (flops, seconds) anchors and never
//! extrapolates beyond clamping to the nearest anchor's seconds-per-FLOP
//! ratio.

use std::path::Path;

use crate::accounting;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;

/// Bytes of garbled-table storage per ReLU (18 KiB).
pub const DEFAULT_GC_STORAGE_BYTES_PER_RELU: u64 = 18 * 1024;

/// Seconds of GC latency per thousand ReLUs under the default calibration
/// (Delphi-style two-party setup, four evaluation threads).
pub const DEFAULT_GC_SECONDS_PER_KILORELU: f64 = 0.1123;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Linear in (log flops, log seconds) between anchors.
    LogLinear,
    /// Seconds of the anchor nearest in log-flops.
    Nearest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeAnchor {
    /// MACs of the measured network.
    pub flops: f64,
    pub seconds: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostCalibration {
    pub gc_seconds_per_kilorelu: f64,
    pub gc_storage_bytes_per_relu: u64,
    /// Sorted by flops, strictly increasing.
    pub he_anchors: Vec<HeAnchor>,
    pub interpolation: Interpolation,
}

/// Datasets the shipped calibration covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Cifar100,
    TinyImageNet,
}

impl Dataset {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cifar" | "cifar100" | "cifar-100" => Some(Dataset::Cifar100),
            "tiny" | "tinyimagenet" | "tiny-imagenet" => Some(Dataset::TinyImageNet),
            _ => None,
        }
    }

    pub fn file_stem(&self) -> &'static str {
        match self {
            Dataset::Cifar100 => "cifar100",
            Dataset::TinyImageNet => "tinyimagenet",
        }
    }
}

const GC_CSV: &str = include_str!("../calib/gc.csv");
const HE_CIFAR100_CSV: &str = include_str!("../calib/he_cifar100.csv");
const HE_TINYIMAGENET_CSV: &str = include_str!("../calib/he_tinyimagenet.csv");

impl CostCalibration {
    pub fn new(
        gc_seconds_per_kilorelu: f64,
        gc_storage_bytes_per_relu: u64,
        mut he_anchors: Vec<HeAnchor>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if !(gc_seconds_per_kilorelu > 0.0) {
            return Err(Error::BadCalibration(format!(
                "GC coefficient must be positive, got {gc_seconds_per_kilorelu}"
            )));
        }
        if he_anchors.is_empty() {
            return Err(Error::EmptyAnchors);
        }
        for a in &he_anchors {
            if !(a.flops > 0.0) || !(a.seconds > 0.0) {
                return Err(Error::BadCalibration(format!(
                    "anchor '{}' must have positive flops and seconds",
                    a.label
                )));
            }
        }
        he_anchors.sort_by(|a, b| a.flops.partial_cmp(&b.flops).unwrap());
        for w in he_anchors.windows(2) {
            if w[0].flops == w[1].flops {
                return Err(Error::DuplicateAnchor(w[0].flops / 1e6));
            }
        }
        Ok(Self { gc_seconds_per_kilorelu, gc_storage_bytes_per_relu, he_anchors, interpolation })
    }

    /// Calibration shipped with the tool, measured on a Delphi-style
    /// 32-core server. Replace with your own CSVs for other hardware.
    pub fn default_for(dataset: Dataset) -> Self {
        let he = match dataset {
            Dataset::Cifar100 => HE_CIFAR100_CSV,
            Dataset::TinyImageNet => HE_TINYIMAGENET_CSV,
        };
        Self::from_csv_strings(GC_CSV, he).expect("shipped calibration parses")
    }

    /// Reads `gc.csv` and `he_<dataset>.csv` from a directory.
    pub fn load_dir(dir: &Path, dataset: Dataset) -> Result<Self> {
        let gc_path = dir.join("gc.csv");
        let he_path = dir.join(format!("he_{}.csv", dataset.file_stem()));
        let gc = std::fs::read_to_string(&gc_path)
            .map_err(|e| Error::BadCalibration(format!("{}: {e}", gc_path.display())))?;
        let he = std::fs::read_to_string(&he_path)
            .map_err(|e| Error::BadCalibration(format!("{}: {e}", he_path.display())))?;
        Self::from_csv_strings(&gc, &he)
    }

    /// Parses `seconds_per_kilorelu,storage_kib_per_relu` (one row) and
    /// `flops_m,seconds[,label]` rows.
    pub fn from_csv_strings(gc_csv: &str, he_csv: &str) -> Result<Self> {
        let mut gc_reader = csv::Reader::from_reader(gc_csv.as_bytes());
        let row = gc_reader
            .records()
            .next()
            .ok_or_else(|| Error::BadCalibration("gc.csv has no data row".into()))??;
        let coeff: f64 = row
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::BadCalibration("bad seconds_per_kilorelu".into()))?;
        let kib: f64 = row
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::BadCalibration("bad storage_kib_per_relu".into()))?;

        let mut anchors = Vec::new();
        let mut he_reader = csv::ReaderBuilder::new().flexible(true).from_reader(he_csv.as_bytes());
        for record in he_reader.records() {
            let record = record?;
            let flops_m: f64 = record
                .get(0)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::BadCalibration("bad flops_m value".into()))?;
            let seconds: f64 = record
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::BadCalibration("bad seconds value".into()))?;
            let label = record.get(2).unwrap_or("").trim().to_string();
            anchors.push(HeAnchor { flops: flops_m * 1e6, seconds, label });
        }
        Self::new(coeff, (kib * 1024.0).round() as u64, anchors, Interpolation::LogLinear)
    }
}

/// Garbled-circuit latency: additive, zero intercept.
pub fn gc_latency(relus: f64, calib: &CostCalibration) -> f64 {
    relus / 1000.0 * calib.gc_seconds_per_kilorelu
}

/// Garbled-table storage in bytes.
pub fn storage(relus: u64, calib: &CostCalibration) -> u64 {
    relus * calib.gc_storage_bytes_per_relu
}

/// HE seconds plus whether the query fell outside the anchor range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeEstimate {
    pub seconds: f64,
    pub extrapolated: bool,
}

/// Homomorphic-latency lookup. Exact at anchors; log-linear (or nearest)
/// between them; outside the table, clamps to the nearest anchor's
/// seconds-per-FLOP ratio and flags the extrapolation.
pub fn he_latency(flops: f64, calib: &CostCalibration) -> Result<HeEstimate> {
    let anchors = &calib.he_anchors;
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    if let Some(hit) = anchors
        .iter()
        .find(|a| (a.flops - flops).abs() <= 1e-9 * a.flops.max(1.0))
    {
        return Ok(HeEstimate { seconds: hit.seconds, extrapolated: false });
    }
    let first = anchors.first().unwrap();
    let last = anchors.last().unwrap();
    if flops < first.flops {
        return Ok(HeEstimate {
            seconds: flops * (first.seconds / first.flops),
            extrapolated: true,
        });
    }
    if flops > last.flops {
        return Ok(HeEstimate {
            seconds: flops * (last.seconds / last.flops),
            extrapolated: true,
        });
    }
    let hi = anchors.partition_point(|a| a.flops < flops);
    let (a, b) = (&anchors[hi - 1], &anchors[hi]);
    let seconds = match calib.interpolation {
        Interpolation::LogLinear => {
            let t = (flops.ln() - a.flops.ln()) / (b.flops.ln() - a.flops.ln());
            (a.seconds.ln() + t * (b.seconds.ln() - a.seconds.ln())).exp()
        }
        Interpolation::Nearest => {
            if (flops.ln() - a.flops.ln()) <= (b.flops.ln() - flops.ln()) {
                a.seconds
            } else {
                b.seconds
            }
        }
    };
    Ok(HeEstimate { seconds, extrapolated: false })
}

/// One private inference's modeled cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub gc_seconds: f64,
    pub he_seconds: f64,
    /// gc + he.
    pub total_seconds: f64,
    pub storage_bytes: u64,
    pub he_extrapolated: bool,
}

/// Assembles a cost estimate from raw counts.
pub fn estimate_counts(relus: u64, flops: f64, calib: &CostCalibration) -> Result<CostEstimate> {
    let gc = gc_latency(relus as f64, calib);
    let he = if flops > 0.0 {
        he_latency(flops, calib)?
    } else {
        // Zero linear work clamps to the cheapest anchor's ratio.
        HeEstimate { seconds: 0.0, extrapolated: true }
    };
    Ok(CostEstimate {
        gc_seconds: gc,
        he_seconds: he.seconds,
        total_seconds: gc + he.seconds,
        storage_bytes: storage(relus, calib),
        he_extrapolated: he.extrapolated,
    })
}

/// Cost of a spec. HE latency uses the dense FLOP count when a reuse
/// transform is present: grouped convolutions do not reduce homomorphic
/// work.
pub fn estimate_spec(spec: &NetworkSpec, calib: &CostCalibration) -> Result<CostEstimate> {
    let profile = accounting::profile(spec);
    let flops_for_he = if spec.has_reuse() {
        accounting::dense_flops(spec)
    } else {
        profile.total_flops
    };
    estimate_counts(profile.total_relus, flops_for_he as f64, calib)
}

/// Zero-intercept least-squares fit of seconds against kilo-ReLUs. Feed it
/// measured (kilorelus, seconds) pairs to recalibrate the GC coefficient.
pub fn fit_gc_coefficient(pairs: &[(f64, f64)]) -> f64 {
    let num: f64 = pairs.iter().map(|(x, y)| x * y).sum();
    let den: f64 = pairs.iter().map(|(x, _)| x * x).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calib() -> CostCalibration {
        CostCalibration::default_for(Dataset::Cifar100)
    }

    #[test]
    fn gc_latency_examples() {
        let c = calib();
        let at_300k = gc_latency(300_000.0, &c);
        assert!((at_300k - 33.7).abs() / 33.7 < 0.03);
        let at_25k = gc_latency(25_000.0, &c);
        assert!((at_25k - 2.8).abs() / 2.8 < 0.03);
        assert_eq!(gc_latency(0.0, &c), 0.0);
    }

    #[test]
    fn gc_is_additive() {
        let c = calib();
        let a = gc_latency(123_456.0, &c);
        let b = gc_latency(7_890.0, &c);
        assert!((gc_latency(131_346.0, &c) - (a + b)).abs() < 1e-9);
        assert_eq!(storage(123_456 + 7_890, &c), storage(123_456, &c) + storage(7_890, &c));
    }

    #[test]
    fn he_exact_at_anchors() {
        let c = calib();
        assert_eq!(he_latency(2461e6, &c).unwrap().seconds, 1004.0);
        assert_eq!(he_latency(559e6, &c).unwrap().seconds, 268.0);
        assert_eq!(he_latency(45e6, &c).unwrap().seconds, 49.0);
    }

    #[test]
    fn he_below_range_clamps_ratio() {
        let c = calib();
        let e = he_latency(30e6, &c).unwrap();
        assert!(e.extrapolated);
        assert!((e.seconds - 30.0 * 49.0 / 45.0).abs() < 1e-9);
    }

    #[test]
    fn he_monotone_between_monotone_anchors() {
        let anchors = vec![
            HeAnchor { flops: 1e6, seconds: 1.0, label: String::new() },
            HeAnchor { flops: 1e8, seconds: 40.0, label: String::new() },
            HeAnchor { flops: 1e9, seconds: 300.0, label: String::new() },
        ];
        let c = CostCalibration::new(0.1, 18432, anchors, Interpolation::LogLinear).unwrap();
        let mut last = 0.0;
        for i in 1..=100 {
            let f = 1e6 * (1000f64).powf(i as f64 / 100.0);
            let s = he_latency(f, &c).unwrap().seconds;
            assert!(s >= last - 1e-12, "not monotone at {f}: {s} < {last}");
            last = s;
        }
    }

    #[test]
    fn storage_examples() {
        let c = calib();
        assert_eq!(storage(1, &c), 18_432);
        assert_eq!(storage(0, &c), 0);
        let r18 = storage(557_056, &c) as f64 / (1u64 << 30) as f64;
        assert!((r18 - 9.56).abs() < 0.02, "{r18}");
    }

    #[test]
    fn estimate_composes() {
        let c = calib();
        let e = estimate_counts(163_000, 1055e6, &c).unwrap();
        assert!((e.total_seconds - 788.0).abs() / 788.0 < 0.01, "{}", e.total_seconds);
        assert!((e.total_seconds - (e.gc_seconds + e.he_seconds)).abs() < 1e-12);
    }

    #[test]
    fn zero_network_estimate() {
        let c = calib();
        let e = estimate_counts(0, 0.0, &c).unwrap();
        assert_eq!(e.gc_seconds, 0.0);
        assert_eq!(e.storage_bytes, 0);
        assert!(e.he_extrapolated);
    }

    #[test]
    fn empty_anchor_table_rejected() {
        assert!(matches!(
            CostCalibration::new(0.1, 18432, vec![], Interpolation::LogLinear),
            Err(Error::EmptyAnchors)
        ));
    }

    #[test]
    fn duplicate_anchor_rejected() {
        let anchors = vec![
            HeAnchor { flops: 1e6, seconds: 1.0, label: String::new() },
            HeAnchor { flops: 1e6, seconds: 2.0, label: String::new() },
        ];
        assert!(matches!(
            CostCalibration::new(0.1, 18432, anchors, Interpolation::LogLinear),
            Err(Error::DuplicateAnchor(_))
        ));
    }

    #[test]
    fn fit_recovers_exact_linear_data() {
        let pairs: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 * 10.0, i as f64 * 1.123)).collect();
        assert!((fit_gc_coefficient(&pairs) - 0.1123).abs() < 1e-12);
    }
}
