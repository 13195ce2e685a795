//! The `forge` command line: build/synth/analyze/rank/transform/plan/cost/
//! pareto subcommands plus `reproduce` for the shipped golden tables.
//!
//! Exit codes: 0 success, 1 domain errors (infeasible problem, bad spec,
//! failed precondition), 2 usage errors (unparseable flags, missing files).
//! Output is deterministic: identical inputs and flags yield identical
//! bytes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::accounting;
use crate::cost::{self, CostCalibration, Dataset};
use crate::criticality::{self, CriticalityOrder};
use crate::equalization::{self, EqualizationMode, EqualizationProblem};
use crate::error::Error;
use crate::network::{self, build_family, Family, InputDims, NetworkSpec, ScalingMethod};
use crate::pareto::{self, Axis, DesignPoint, Source};
use crate::report::{
    fmt_gib, fmt_kilo, fmt_mega, fmt_percent, fmt_seconds, OutputFormat, Report,
};
use crate::transforms::{self, TransformPlan, TransformStep};

/// Environment variable naming the default calibration directory.
pub const CALIB_DIR_ENV: &str = "FORGE_CALIB_DIR";

#[derive(Debug)]
enum CliError {
    /// Bad invocation: unknown values, missing files. Exit 2.
    Usage(String),
    /// The inputs parsed but the domain rejected them. Exit 1.
    Domain(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser)]
#[command(
    name = "forge",
    version,
    about = "Synthesize and analyze ReLU-budgeted CNN architectures for private inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a family backbone and write its network document.
    Build(BuildArgs),
    /// Report ReLU/FLOP/parameter counts for a network document.
    Analyze(AnalyzeArgs),
    /// Rank stage criticality from probe accuracies.
    Rank(RankArgs),
    /// Solve the ReLU-equalization inequalities and emit HybReNet tuples.
    Synth(SynthArgs),
    /// Apply cull/thin/scale/reuse rewrites to a network document.
    Transform(TransformArgs),
    /// Generate the single-pass optimization family for a network.
    Plan(PlanArgs),
    /// Estimate private-inference latency and storage.
    Cost(CostArgs),
    /// Compare design points: frontiers and improvement tables.
    Pareto(ParetoArgs),
    /// Regenerate the shipped golden tables from constructors alone.
    Reproduce(ReproduceArgs),
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Transform(a) => cmd_transform(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Pareto(a) => cmd_pareto(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("forge: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("forge: {msg}");
            ExitCode::from(1)
        }
    }
}

// --- shared parsing helpers -------------------------------------------------

fn parse_format(name: &str) -> CliResult<OutputFormat> {
    OutputFormat::parse(name)
        .ok_or_else(|| usage(format!("unknown format '{name}' (expected table, csv, or json)")))
}

fn parse_u32_list(text: &str, what: &str) -> CliResult<Vec<u32>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| usage(format!("bad {what} entry '{p}' in '{text}'")))
        })
        .collect()
}

fn parse_order(text: &str) -> CliResult<CriticalityOrder> {
    let ids: Vec<usize> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("bad stage id '{p}' in order '{text}'")))
        })
        .collect::<CliResult<_>>()?;
    CriticalityOrder::new(ids).map_err(|e| usage(e.to_string()))
}

/// "cifar" / "tiny" or an explicit "HxW[xC]". Returns dims and the
/// dataset's default class count when one is implied.
fn parse_input(text: &str) -> CliResult<(InputDims, Option<u32>)> {
    match text.to_ascii_lowercase().as_str() {
        "cifar" | "cifar100" | "cifar-100" | "cifar10" => {
            let classes = if text.eq_ignore_ascii_case("cifar10") { 10 } else { 100 };
            Ok((InputDims::cifar(), Some(classes)))
        }
        "tiny" | "tinyimagenet" | "tiny-imagenet" => Ok((InputDims::tiny_imagenet(), Some(200))),
        other => {
            let parts: Vec<&str> = other.split('x').collect();
            if parts.len() < 2 || parts.len() > 3 {
                return Err(usage(format!(
                    "unknown input '{text}' (expected cifar, tiny, or HxW[xC])"
                )));
            }
            let nums: Vec<u32> = parts
                .iter()
                .map(|p| p.parse::<u32>().map_err(|_| usage(format!("bad input size '{text}'"))))
                .collect::<CliResult<_>>()?;
            let c = nums.get(2).copied().unwrap_or(3);
            Ok((InputDims::new(nums[0], nums[1], c), None))
        }
    }
}

fn parse_ratio(text: &str) -> CliResult<(u32, u32)> {
    if let Some((n, d)) = text.split_once('/') {
        let num = n.trim().parse::<u32>().map_err(|_| usage(format!("bad ratio '{text}'")))?;
        let den = d.trim().parse::<u32>().map_err(|_| usage(format!("bad ratio '{text}'")))?;
        return Ok((num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let digits = format!("{int}{frac}");
        let num = digits.parse::<u32>().map_err(|_| usage(format!("bad ratio '{text}'")))?;
        let den = 10u32
            .checked_pow(frac.len() as u32)
            .ok_or_else(|| usage(format!("ratio '{text}' has too many digits")))?;
        return Ok((num, den));
    }
    let num = text.trim().parse::<u32>().map_err(|_| usage(format!("bad ratio '{text}'")))?;
    Ok((num, 1))
}

fn require_file(path: &Path) -> CliResult<()> {
    if !path.is_file() {
        return Err(usage(format!("no such file: {}", path.display())));
    }
    Ok(())
}

fn read_spec(path: &Path) -> CliResult<NetworkSpec> {
    require_file(path)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    network::deserialize(&text).map_err(CliError::from)
}

fn write_or_print(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content).map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_calibration(dir: Option<&Path>, dataset: Dataset) -> CliResult<CostCalibration> {
    let env_dir = std::env::var_os(CALIB_DIR_ENV).map(PathBuf::from);
    let dir = dir.map(Path::to_path_buf).or(env_dir);
    match dir {
        Some(d) => {
            let gc = d.join("gc.csv");
            let he = d.join(format!("he_{}.csv", dataset.file_stem()));
            for p in [&gc, &he] {
                require_file(p)?;
            }
            CostCalibration::load_dir(&d, dataset).map_err(CliError::from)
        }
        None => Ok(CostCalibration::default_for(dataset)),
    }
}

fn parse_dataset(name: &str) -> CliResult<Dataset> {
    Dataset::parse(name)
        .ok_or_else(|| usage(format!("unknown dataset '{name}' (expected cifar100 or tinyimagenet)")))
}

fn spec_filename(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        match ch {
            'A'..='Z' => out.push(ch.to_ascii_lowercase()),
            'a'..='z' | '0'..='9' => out.push(ch),
            '(' | ')' | '=' | ',' | ' ' | '-' | '_' | '[' | ']' => {
                if !out.ends_with('-') && !out.is_empty() {
                    out.push('-');
                }
            }
            _ => {}
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    format!("{out}.json")
}

// --- build ------------------------------------------------------------------

#[derive(Args)]
struct BuildArgs {
    /// Backbone family: resnet18, resnet20, resnet32, resnet34,
    /// resnet56, or wrn (with --depth/--widen).
    #[arg(long)]
    family: String,
    /// Stem output channels.
    #[arg(long)]
    m: Option<u32>,
    /// Heterogeneous channel multipliers "a,b,g".
    #[arg(long)]
    abg: Option<String>,
    /// Homogeneous channel multiplier s (a = b = g = s).
    #[arg(long)]
    homogeneous: Option<u32>,
    /// WideResNet depth (6n+4).
    #[arg(long)]
    depth: Option<u32>,
    /// WideResNet widen factor k.
    #[arg(long)]
    widen: Option<u32>,
    /// Input: cifar, tiny, or HxW[xC].
    #[arg(long, default_value = "cifar")]
    input: String,
    /// Output classes (defaults to the dataset's class count).
    #[arg(long)]
    classes: Option<u32>,
    /// Output path (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn cmd_build(a: BuildArgs) -> CliResult {
    let family = match a.family.to_ascii_lowercase().as_str() {
        "resnet18" => Family::ResNet18,
        "resnet20" => Family::ResNet20,
        "resnet32" => Family::ResNet32,
        "resnet34" => Family::ResNet34,
        "resnet56" => Family::ResNet56,
        "wrn" | "wideresnet" => {
            let depth = a.depth.ok_or_else(|| usage("wrn needs --depth"))?;
            let widen = a.widen.ok_or_else(|| usage("wrn needs --widen"))?;
            Family::WideResNet { depth, widen }
        }
        other => return Err(usage(format!("unknown family '{other}'"))),
    };
    let scaling = match (&a.abg, a.homogeneous) {
        (Some(_), Some(_)) => return Err(usage("--abg and --homogeneous are exclusive")),
        (Some(abg), None) => {
            let v = parse_u32_list(abg, "multiplier")?;
            if v.len() != 3 {
                return Err(usage(format!("--abg needs three values, got {}", v.len())));
            }
            ScalingMethod::Heterogeneous { alpha: v[0], beta: v[1], gamma: v[2] }
        }
        (None, Some(s)) => ScalingMethod::Homogeneous(s),
        (None, None) => ScalingMethod::Uniform,
    };
    let m = a.m.unwrap_or(match family {
        Family::ResNet18 | Family::ResNet34 => 64,
        _ => 16,
    });
    let (input, default_classes) = parse_input(&a.input)?;
    let classes = a
        .classes
        .or(default_classes)
        .ok_or_else(|| usage("custom input sizes need --classes"))?;
    let spec = build_family(family, m, scaling, input, classes)?;
    write_or_print(a.out.as_deref(), &network::serialize(&spec))
}

// --- analyze ------------------------------------------------------------------

#[derive(Args)]
struct AnalyzeArgs {
    /// Network document to analyze.
    spec: PathBuf,
    /// Add one row per stage (plus head and total).
    #[arg(long)]
    per_stage: bool,
    #[arg(long, default_value = "table")]
    format: String,
}

fn cmd_analyze(a: AnalyzeArgs) -> CliResult {
    let format = parse_format(&a.format)?;
    let spec = read_spec(&a.spec)?;
    let profile = accounting::profile(&spec);

    if a.per_stage {
        let mut report = Report::new(vec![
            "stage", "blocks", "channels", "relus", "relu_share", "flops", "params",
        ]);
        for (k, (stage, counts)) in spec.stages.iter().zip(&profile.per_stage).enumerate() {
            report.push_row(vec![
                format!("S{}", k + 1),
                stage.blocks.to_string(),
                stage.channels.to_string(),
                fmt_kilo(counts.relus),
                fmt_percent(profile.relu_fractions[k]),
                fmt_mega(counts.flops),
                fmt_kilo(counts.params),
            ]);
        }
        report.push_row(vec![
            "head".into(),
            String::new(),
            String::new(),
            fmt_kilo(0),
            String::new(),
            fmt_mega(profile.head_flops),
            fmt_kilo(profile.head_params),
        ]);
        report.push_row(vec![
            "total".into(),
            String::new(),
            String::new(),
            fmt_kilo(profile.total_relus),
            String::new(),
            fmt_mega(profile.total_flops),
            fmt_kilo(profile.total_params),
        ]);
        print!("{}", report.render(format));
        return Ok(());
    }

    let mut report = Report::new(vec!["field", "value"]);
    report.push_row(vec!["network".to_string(), spec.name.clone()]);
    report.push_row(vec![
        "input".to_string(),
        format!("{}x{}x{}", spec.input.height, spec.input.width, spec.input.channels),
    ]);
    report.push_row(vec!["classes".to_string(), spec.num_classes.to_string()]);
    report.push_row(vec!["stages".to_string(), spec.stage_count().to_string()]);
    report.push_row(vec!["relus".to_string(), fmt_kilo(profile.total_relus)]);
    report.push_row(vec!["flops".to_string(), fmt_mega(profile.total_flops)]);
    report.push_row(vec!["params".to_string(), fmt_kilo(profile.total_params)]);
    print!("{}", report.render(format));
    Ok(())
}

// --- rank ---------------------------------------------------------------------

#[derive(Args)]
struct RankArgs {
    /// Probe CSV: stage,relus,acc,acc_kd.
    probes: PathBuf,
    /// Rank by the distilled-accuracy column.
    #[arg(long)]
    kd: bool,
}

fn cmd_rank(a: RankArgs) -> CliResult {
    require_file(&a.probes)?;
    let probes = criticality::read_probes_csv(&a.probes)?;
    let order = criticality::rank(&probes, a.kd)?;
    println!("{}", order.display());
    Ok(())
}

// --- synth --------------------------------------------------------------------

#[derive(Args)]
struct SynthArgs {
    /// Backbone whose stage compute ratios to fix: resnet18 or resnet34.
    #[arg(long, default_value = "resnet18")]
    backbone: String,
    /// Explicit stage compute ratios, overriding the backbone's.
    #[arg(long)]
    phi: Option<String>,
    /// Criticality order, most to least critical, e.g. "3,2,4,1".
    #[arg(long)]
    order: String,
    /// width (free multipliers), depth (free compute ratios), or mixed.
    #[arg(long, default_value = "width")]
    mode: String,
    /// Inclusive multiplier bounds "lo,hi".
    #[arg(long, default_value = "2,16")]
    bounds: String,
    /// Inclusive compute-ratio bounds "lo,hi" (depth/mixed modes).
    #[arg(long, default_value = "1,16")]
    phi_bounds: String,
    /// Fixed multipliers for depth mode, e.g. "2,2,2".
    #[arg(long)]
    lambda: Option<String>,
    /// Stem channels for realized specs.
    #[arg(long, default_value_t = 16)]
    m: u32,
    #[arg(long, default_value = "cifar")]
    input: String,
    #[arg(long)]
    classes: Option<u32>,
    /// Write every selected spec into this directory.
    #[arg(long)]
    emit_specs: Option<PathBuf>,
    /// Also list and emit the low-ReLU (first multiplier = 2) variants.
    #[arg(long)]
    low_relu: bool,
    #[arg(long, default_value = "table")]
    format: String,
}

fn cmd_synth(a: SynthArgs) -> CliResult {
    let format = parse_format(&a.format)?;
    let order = parse_order(&a.order)?;
    let d = order.len();
    let phi = match &a.phi {
        Some(text) => parse_u32_list(text, "compute ratio")?,
        None => match a.backbone.to_ascii_lowercase().as_str() {
            "resnet18" => vec![2; d],
            "resnet34" => {
                if d != 4 {
                    return Err(usage("resnet34 is a 4-stage backbone"));
                }
                vec![3, 4, 6, 3]
            }
            other => return Err(usage(format!("unknown backbone '{other}' (or pass --phi)"))),
        },
    };
    if phi.len() != d {
        return Err(usage(format!("--phi needs {d} values to match the order")));
    }
    let mode = match a.mode.to_ascii_lowercase().as_str() {
        "width" => EqualizationMode::Width,
        "depth" => EqualizationMode::Depth,
        "mixed" => EqualizationMode::Mixed,
        other => return Err(usage(format!("unknown mode '{other}'"))),
    };
    let lb = parse_u32_list(&a.bounds, "bound")?;
    let pb = parse_u32_list(&a.phi_bounds, "bound")?;
    if lb.len() != 2 || pb.len() != 2 {
        return Err(usage("bounds take exactly two values: lo,hi"));
    }

    let mut problem = match mode {
        EqualizationMode::Width => EqualizationProblem::width(order, phi.clone())?,
        EqualizationMode::Depth | EqualizationMode::Mixed => {
            let lambda = match &a.lambda {
                Some(text) => parse_u32_list(text, "multiplier")?,
                None => vec![2; d - 1],
            };
            if lambda.len() != d - 1 {
                return Err(usage(format!("--lambda needs {} values", d - 1)));
            }
            let mut p = EqualizationProblem::depth(
                CriticalityOrder::new(parse_order(&a.order)?.stages().to_vec()).unwrap(),
                lambda,
            )?;
            p.mode = mode;
            p.phi = phi.clone();
            p
        }
    };
    problem = problem.with_lambda_bounds(lb[0], lb[1]).with_phi_bounds(pb[0], pb[1]);

    let constraints = equalization::derive_inequalities(&problem)?;
    let rendered: Vec<String> = constraints.iter().map(|c| c.display(d)).collect();
    println!("constraints: {}", rendered.join(", "));

    let result = equalization::solve(&problem)?;
    if result.infeasible_within_bounds() {
        return Err(CliError::Domain(format!(
            "infeasible within bounds {}..={} (multipliers), {}..={} (compute ratios)",
            problem.lambda_bounds.0, problem.lambda_bounds.1, problem.phi_bounds.0, problem.phi_bounds.1
        )));
    }
    let selected = equalization::select_minimal(&result, problem.mode);

    let (input, default_classes) = parse_input(&a.input)?;
    let classes = a.classes.or(default_classes).unwrap_or(100);

    let mut report = Report::new(vec!["name", "phi", "multipliers", "relus", "flops"]);
    let mut emitted: Vec<NetworkSpec> = Vec::new();
    for t in &selected {
        let spec =
            equalization::realize(&t.solution.phi, a.m, &t.solution.lambda, input, classes)?;
        let profile = accounting::profile(&spec);
        report.push_row(vec![
            t.name.clone(),
            t.solution.phi.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
            t.solution.lambda.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
            fmt_kilo(profile.total_relus),
            fmt_mega(profile.total_flops),
        ]);
        emitted.push(spec);
        if a.low_relu {
            let low = equalization::low_relu_variant(
                &t.solution.phi,
                a.m,
                &t.solution.lambda,
                input,
                classes,
            )?;
            if low.name != emitted.last().unwrap().name {
                let profile = accounting::profile(&low);
                let lam = equalization::low_relu_lambda(&t.solution.lambda);
                report.push_row(vec![
                    format!("HRN-{}", lam.iter().map(|l| format!("{l}x")).collect::<String>()),
                    t.solution.phi.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
                    lam.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
                    fmt_kilo(profile.total_relus),
                    fmt_mega(profile.total_flops),
                ]);
                emitted.push(low);
            }
        }
    }
    print!("{}", report.render(format));

    if let Some(dir) = &a.emit_specs {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Domain(format!("{}: {e}", dir.display())))?;
        for spec in &emitted {
            let path = dir.join(spec_filename(&spec.name));
            std::fs::write(&path, network::serialize(spec))
                .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        }
        println!("wrote {} specs to {}", emitted.len(), a.emit_specs.unwrap().display());
    }
    Ok(())
}

// --- transform ------------------------------------------------------------------

#[derive(Args)]
struct TransformArgs {
    spec: PathBuf,
    /// "auto" culls the least critical stage when it holds the ReLU
    /// plurality; a stage number culls unconditionally.
    #[arg(long)]
    cull: Option<String>,
    /// "all" or a comma list of stages to thin.
    #[arg(long)]
    thin: Option<String>,
    /// Channel scale factor, e.g. "0.5" or "1/2".
    #[arg(long)]
    scale: Option<String>,
    /// ReLU-reuse factor (2, 4, 8, or 16).
    #[arg(long)]
    reuse: Option<u32>,
    /// Criticality order for --cull auto (default "3,2,4,1" on 4 stages).
    #[arg(long)]
    order: Option<String>,
    /// Output path (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn cmd_transform(a: TransformArgs) -> CliResult {
    let spec = read_spec(&a.spec)?;
    let d = spec.stage_count();
    let mut plan = TransformPlan::default();

    if let Some(cull) = &a.cull {
        if cull.eq_ignore_ascii_case("auto") {
            let order = match &a.order {
                Some(text) => parse_order(text)?,
                None if d == 4 => CriticalityOrder::new(vec![3, 2, 4, 1]).unwrap(),
                None => {
                    return Err(usage(format!(
                        "--cull auto on a {d}-stage network needs --order"
                    )))
                }
            };
            if order.len() != d {
                return Err(usage(format!("--order needs {d} stages")));
            }
            let least = order.least_critical();
            if criticality::dominates(&spec, least)? {
                plan.push(TransformStep::Cull { stage: least }, "auto: least critical stage holds the plurality");
            }
        } else {
            let stage: usize = cull
                .trim_start_matches(['s', 'S'])
                .parse()
                .map_err(|_| usage(format!("bad --cull value '{cull}'")))?;
            plan.push(TransformStep::Cull { stage }, "requested");
        }
    }
    if let Some(thin) = &a.thin {
        let stages: Vec<usize> = if thin.eq_ignore_ascii_case("all") {
            let culled = plan.steps.iter().find_map(|s| match s.step {
                TransformStep::Cull { stage } => Some(stage),
                _ => None,
            });
            (1..=d).filter(|&s| Some(s) != culled).collect()
        } else {
            thin.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| usage(format!("bad --thin entry '{p}'")))
                })
                .collect::<CliResult<_>>()?
        };
        plan.push(TransformStep::Thin { stages }, "requested");
    }
    if let Some(scale) = &a.scale {
        let (num, den) = parse_ratio(scale)?;
        plan.push(TransformStep::ScaleCh { num, den }, "requested");
    }
    if let Some(n) = a.reuse {
        plan.push(TransformStep::Reuse { n }, "requested");
    }

    let out = plan.apply(&spec)?;
    let text = network::serialize(&out);
    if let Some(path) = &a.out {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        let profile = accounting::profile(&out);
        println!(
            "wrote {}: {} ReLUs, {} FLOPs",
            path.display(),
            fmt_kilo(profile.total_relus),
            fmt_mega(profile.total_flops)
        );
        Ok(())
    } else {
        print!("{text}");
        Ok(())
    }
}

// --- plan -----------------------------------------------------------------------

#[derive(Args)]
struct PlanArgs {
    spec: PathBuf,
    /// Probe CSV fixing the criticality order.
    #[arg(long)]
    order_file: Option<PathBuf>,
    /// Explicit order, most to least critical.
    #[arg(long)]
    order: Option<String>,
    /// Rank probes by the distilled column.
    #[arg(long)]
    kd: bool,
    /// Write every generated spec into this directory.
    #[arg(long)]
    emit_specs: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: String,
}

fn cmd_plan(a: PlanArgs) -> CliResult {
    let format = parse_format(&a.format)?;
    let spec = read_spec(&a.spec)?;
    let order = match (&a.order_file, &a.order) {
        (Some(path), None) => {
            require_file(path)?;
            let probes = criticality::read_probes_csv(path)?;
            criticality::rank(&probes, a.kd)?
        }
        (None, Some(text)) => parse_order(text)?,
        (None, None) if spec.stage_count() == 4 => CriticalityOrder::new(vec![3, 2, 4, 1]).unwrap(),
        _ => return Err(usage("pass exactly one of --order-file or --order")),
    };
    if order.len() != spec.stage_count() {
        return Err(usage(format!("order covers {} stages, network has {}", order.len(), spec.stage_count())));
    }

    let variants = transforms::generate_plan(&spec, &order)?;
    let mut report = Report::new(vec!["variant", "steps", "relus", "flops"]);
    for v in &variants {
        let steps: Vec<String> = v
            .plan
            .steps
            .iter()
            .map(|s| match &s.step {
                TransformStep::Cull { stage } => format!("cull(S{stage})"),
                TransformStep::Thin { stages } => format!(
                    "thin({})",
                    stages.iter().map(|s| format!("S{s}")).collect::<Vec<_>>().join("+")
                ),
                TransformStep::ScaleCh { num, den } => format!("scalech({num}/{den})"),
                TransformStep::Reuse { n } => format!("reuse({n})"),
            })
            .collect();
        report.push_row(vec![
            v.label.clone(),
            if steps.is_empty() { "-".into() } else { steps.join(" ") },
            fmt_kilo(v.profile.total_relus),
            fmt_mega(v.profile.total_flops),
        ]);
    }
    print!("{}", report.render(format));

    if let Some(dir) = &a.emit_specs {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Domain(format!("{}: {e}", dir.display())))?;
        for v in &variants {
            let path = dir.join(spec_filename(&format!("{}-{}", spec.name, v.label)));
            std::fs::write(&path, network::serialize(&v.spec))
                .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        }
        println!("wrote {} specs to {}", variants.len(), dir.display());
    }
    Ok(())
}

// --- cost -----------------------------------------------------------------------

#[derive(Args)]
struct CostArgs {
    spec: PathBuf,
    /// Calibration directory holding gc.csv and he_<dataset>.csv
    /// (default: $FORGE_CALIB_DIR, else the shipped calibration).
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value = "table")]
    format: String,
}

fn cmd_cost(a: CostArgs) -> CliResult {
    let format = parse_format(&a.format)?;
    let dataset = parse_dataset(&a.dataset)?;
    let spec = read_spec(&a.spec)?;
    let calib = load_calibration(a.calib.as_deref(), dataset)?;
    let profile = accounting::profile(&spec);
    let estimate = cost::estimate_spec(&spec, &calib)?;

    let mut report = Report::new(vec!["field", "value"]);
    report.push_row(vec!["network".to_string(), spec.name.clone()]);
    report.push_row(vec!["relus".to_string(), fmt_kilo(profile.total_relus)]);
    report.push_row(vec!["flops".to_string(), fmt_mega(profile.total_flops)]);
    if spec.has_reuse() {
        report.push_row(vec![
            "flops_he_basis".to_string(),
            fmt_mega(accounting::dense_flops(&spec)),
        ]);
    }
    report.push_row(vec!["gc_latency".to_string(), fmt_seconds(estimate.gc_seconds)]);
    let he = if estimate.he_extrapolated {
        format!("{} (extrapolated)", fmt_seconds(estimate.he_seconds))
    } else {
        fmt_seconds(estimate.he_seconds)
    };
    report.push_row(vec!["he_latency".to_string(), he]);
    report.push_row(vec!["total_latency".to_string(), fmt_seconds(estimate.total_seconds)]);
    report.push_row(vec!["gc_storage".to_string(), fmt_gib(estimate.storage_bytes)]);
    print!("{}", report.render(format));
    Ok(())
}

// --- pareto ---------------------------------------------------------------------

#[derive(Args)]
struct ParetoArgs {
    /// Our design points: label,relus,flops_m,acc.
    ours: PathBuf,
    /// Baseline design points, same schema.
    baseline: PathBuf,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    dataset: String,
    /// "table10" (row-paired improvement table) or "frontier".
    #[arg(long, default_value = "table10")]
    report: String,
    /// Frontier axes, e.g. "relus,acc".
    #[arg(long, default_value = "relus,acc")]
    axes: String,
    #[arg(long, default_value = "table")]
    format: String,
}

fn cmd_pareto(a: ParetoArgs) -> CliResult {
    let format = parse_format(&a.format)?;
    let dataset = parse_dataset(&a.dataset)?;
    require_file(&a.ours)?;
    require_file(&a.baseline)?;
    let calib = load_calibration(a.calib.as_deref(), dataset)?;

    let mut ours = pareto::read_results_csv(&a.ours, Source::Ours)?;
    let mut baseline = pareto::read_results_csv(&a.baseline, Source::External)?;
    for p in ours.iter_mut().chain(baseline.iter_mut()) {
        let est = cost::estimate_counts(p.relus.round() as u64, p.flops, &calib)?;
        p.cost = Some(est);
    }

    match a.report.as_str() {
        "table10" => {
            if ours.len() != baseline.len() {
                return Err(usage(format!(
                    "row-paired report needs equal point counts (ours {}, baseline {})",
                    ours.len(),
                    baseline.len()
                )));
            }
            let mut report = Report::new(vec![
                "baseline", "re", "fl", "acc", "lat", "ours", "re", "fl", "acc", "lat",
                "re_x", "fl_x", "acc_d", "he_x", "gc_x", "lat_x",
            ]);
            for (b, o) in baseline.iter().zip(&ours) {
                let row = pareto::iso_compare(b, o)?;
                let cell = |p: &DesignPoint| -> Vec<String> {
                    vec![
                        p.label.clone(),
                        fmt_kilo(p.relus.round() as u64),
                        fmt_mega(p.flops.round() as u64),
                        format!("{:.2}", p.accuracy.unwrap_or(f64::NAN)),
                        fmt_seconds(p.cost.unwrap().total_seconds),
                    ]
                };
                let mut cells = cell(b);
                cells.extend(cell(o));
                cells.extend([
                    format!("{:.1}x", row.relu_ratio),
                    format!("{:.1}x", row.flop_ratio),
                    format!("{:.1}", row.acc_delta),
                    format!("{:.1}x", row.he_ratio),
                    format!("{:.1}x", row.gc_ratio),
                    format!("{:.1}x", row.lat_ratio),
                ]);
                report.push_row(cells);
            }
            print!("{}", report.render(format));
        }
        "frontier" => {
            let axes: Vec<Axis> = a
                .axes
                .split(',')
                .map(|p| {
                    Axis::parse(p.trim()).ok_or_else(|| usage(format!("unknown axis '{p}'")))
                })
                .collect::<CliResult<_>>()?;
            let mut all = ours;
            all.extend(baseline);
            let front = pareto::frontier(&all, &axes)?;
            let mut report = Report::new(vec!["label", "source", "relus", "flops", "acc", "lat"]);
            for p in &front {
                report.push_row(vec![
                    p.label.clone(),
                    match p.source {
                        Source::Ours => "ours".to_string(),
                        Source::External => "external".to_string(),
                    },
                    fmt_kilo(p.relus.round() as u64),
                    fmt_mega(p.flops.round() as u64),
                    p.accuracy.map_or(String::new(), |a| format!("{a:.2}")),
                    p.cost.map_or(String::new(), |c| fmt_seconds(c.total_seconds)),
                ]);
            }
            print!("{}", report.render(format));
        }
        other => return Err(usage(format!("unknown report '{other}' (table10 or frontier)"))),
    }
    Ok(())
}

// --- reproduce ------------------------------------------------------------------

#[derive(Args)]
struct ReproduceArgs {
    /// Golden table number: 3, 5, 8, 9, or 11.
    #[arg(long)]
    table: u32,
    #[arg(long, default_value = "table")]
    format: String,
}

fn hrn18(m: u32, a: u32, b: u32, g: u32) -> NetworkSpec {
    build_family(
        Family::ResNet18,
        m,
        ScalingMethod::Heterogeneous { alpha: a, beta: b, gamma: g },
        InputDims::cifar(),
        100,
    )
    .expect("static configuration")
}

fn cmd_reproduce(a: ReproduceArgs) -> CliResult {
    let format = parse_format(&a.format)?;
    match a.table {
        3 => {
            let rows = [
                ("2x2x2x(m=32)", hrn18(32, 2, 2, 2)),
                ("4x4x4x(m=16)", hrn18(16, 4, 4, 4)),
                ("3x7x2x(m=16)", hrn18(16, 3, 7, 2)),
            ];
            let mut report =
                Report::new(vec!["model", "relus", "stage1", "stage2", "stage3", "stage4"]);
            for (label, spec) in rows {
                let profile = accounting::profile(&spec);
                let mut cells = vec![label.to_string(), fmt_kilo(profile.total_relus)];
                cells.extend(profile.relu_fractions.iter().map(|f| fmt_percent(*f)));
                report.push_row(cells);
            }
            print!("{}", report.render(format));
        }
        5 => {
            // The published optimization chain: the equalized network is
            // thinned; the low-ReLU variants are culled, thinned, scaled,
            // and reused.
            let mut report = Report::new(vec!["network", "m", "steps", "relus", "flops"]);
            let equalized_order = CriticalityOrder::new(vec![3, 2, 4, 1]).unwrap();
            let low_order = CriticalityOrder::new(vec![3, 4, 2, 1]).unwrap();
            push_plan_rows(&mut report, "5x5x3x", 16, "thin", &hrn18(16, 5, 5, 3), &equalized_order)?;
            push_plan_rows(&mut report, "2x5x3x", 32, "thin", &hrn18(32, 2, 5, 3), &low_order)?;
            for label in ["thin", "scale-0.5", "reuse-4", "reuse-8", "reuse-16"] {
                push_plan_rows(&mut report, "2x5x3x", 16, label, &hrn18(16, 2, 5, 3), &low_order)?;
            }
            print!("{}", report.render(format));
        }
        8 => {
            let rows: Vec<(String, NetworkSpec)> = vec![
                (
                    "WRN22x8".into(),
                    build_family(
                        Family::WideResNet { depth: 22, widen: 8 },
                        16,
                        ScalingMethod::Uniform,
                        InputDims::cifar(),
                        100,
                    )?,
                ),
                (
                    "ResNet18".into(),
                    build_family(Family::ResNet18, 64, ScalingMethod::Uniform, InputDims::cifar(), 100)?,
                ),
                ("HRN-5x5x3x".into(), hrn18(16, 5, 5, 3)),
                ("HRN-5x7x2x".into(), hrn18(16, 5, 7, 2)),
                ("HRN-6x6x2x".into(), hrn18(16, 6, 6, 2)),
                ("HRN-7x5x2x".into(), hrn18(16, 7, 5, 2)),
            ];
            print_count_table(rows, format);
        }
        9 => {
            let rows: Vec<(String, NetworkSpec)> = vec![
                ("HRN-2x5x3x".into(), hrn18(16, 2, 5, 3)),
                ("HRN-2x7x2x".into(), hrn18(16, 2, 7, 2)),
                ("HRN-2x6x2x".into(), hrn18(16, 2, 6, 2)),
                ("HRN-2x5x2x".into(), hrn18(16, 2, 5, 2)),
            ];
            print_count_table(rows, format);
        }
        11 => {
            let rows = [
                (2, 2, 2),
                (3, 3, 3),
                (4, 4, 4),
                (6, 6, 6),
                (5, 7, 2),
                (7, 5, 2),
                (6, 6, 2),
                (5, 5, 3),
            ];
            let mut report = Report::new(vec![
                "multipliers", "flops_s1", "flops_s2", "flops_s3", "flops_s4", "relus_s1",
                "relus_s2", "relus_s3", "relus_s4",
            ]);
            for (al, be, ga) in rows {
                let (flops, relus) = accounting::normalized_profile(al, be, ga);
                let mut cells = vec![format!("{al}x{be}x{ga}x")];
                cells.extend(flops.iter().map(u64::to_string));
                cells.extend(relus.iter().map(u64::to_string));
                report.push_row(cells);
            }
            print!("{}", report.render(format));
        }
        other => {
            return Err(usage(format!(
                "table {other} is not reproducible here (choose 3, 5, 8, 9, or 11)"
            )))
        }
    }
    Ok(())
}

fn push_plan_rows(
    report: &mut Report,
    name: &str,
    m: u32,
    label_filter: &str,
    spec: &NetworkSpec,
    order: &CriticalityOrder,
) -> CliResult {
    let variants = transforms::generate_plan(spec, order)?;
    for v in variants.iter().filter(|v| v.label == label_filter) {
        let steps: Vec<String> = v
            .plan
            .steps
            .iter()
            .map(|s| match &s.step {
                TransformStep::Cull { stage } => format!("cull(S{stage})"),
                TransformStep::Thin { .. } => "thin".to_string(),
                TransformStep::ScaleCh { num, den } => format!("scalech({num}/{den})"),
                TransformStep::Reuse { n } => format!("reuse({n})"),
            })
            .collect();
        report.push_row(vec![
            name.to_string(),
            m.to_string(),
            steps.join(" "),
            fmt_kilo(v.profile.total_relus),
            fmt_mega(v.profile.total_flops),
        ]);
    }
    Ok(())
}

fn print_count_table(rows: Vec<(String, NetworkSpec)>, format: OutputFormat) {
    let mut report = Report::new(vec!["network", "channels", "relus", "flops"]);
    for (label, spec) in rows {
        let profile = accounting::profile(&spec);
        let channels: Vec<String> =
            spec.stages.iter().map(|s| s.channels.to_string()).collect();
        report.push_row(vec![
            label,
            channels.join(","),
            fmt_kilo(profile.total_relus),
            fmt_mega(profile.total_flops),
        ]);
    }
    print!("{}", report.render(format));
}
