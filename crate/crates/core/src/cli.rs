//! `barkit` command-line front end.
//!
//! Exit codes: 0 ok, 2 usage/validation, 3 I/O or format, 4 alignment,
//! 5 numerical-check failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::augment::{
    bar_replace, cutmix3d, mix_labels, sample_regions, AugmentedSample, Method, Provenance, RegionPolicy, Replaced,
    SoftLabel,
};
use crate::error::Error;
use crate::pipeline::{run_comparison, DemoConfig};
use crate::preview::{slice_pgm, Axis};
use crate::rng::{seeded, substream};
use crate::supcon::{check_line, finite_diff_check, random_batch, soft_supcon_loss};
use crate::volume::{load_atlas, load_nifti, save_nifti, validate_alignment};

const LABEL_TOL: f64 = 1e-6;
const GRADCHECK_EPS: f64 = 1e-4;
const GRADCHECK_TOL: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "barkit", version, about = "Atlas-driven volume augmentation and contrastive-loss tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one augmented volume plus its JSON metadata.
    Augment(AugmentArgs),
    /// Per-region voxel counts as TSV.
    Atlas(AtlasArgs),
    /// Evaluate the contrastive loss on random batches and check its gradient.
    LossCheck(LossCheckArgs),
    /// Run the phantom pretrain/fine-tune comparison.
    Demo(DemoArgs),
    /// Save one slice as a PGM image.
    Preview(PreviewArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bar,
    Cutmix,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub anchor: PathBuf,
    #[arg(long)]
    pub donor: PathBuf,
    #[arg(long)]
    pub atlas: PathBuf,
    #[arg(long)]
    pub lut: PathBuf,
    /// Replace exactly this many regions (bar).
    #[arg(long, conflicts_with_all = ["bernoulli", "alpha"])]
    pub regions: Option<usize>,
    /// Include each region with this probability (bar).
    #[arg(long, conflicts_with = "alpha")]
    pub bernoulli: Option<f64>,
    /// Beta(alpha, alpha) parameter (cutmix).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated class weights of the anchor.
    #[arg(long, allow_hyphen_values = true)]
    pub label_anchor: String,
    /// Comma-separated class weights of the donor.
    #[arg(long, allow_hyphen_values = true)]
    pub label_donor: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
}

#[derive(Debug, Args)]
pub struct AtlasArgs {
    #[arg(long)]
    pub atlas: PathBuf,
    #[arg(long)]
    pub lut: PathBuf,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(long)]
    pub index: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum Failure {
    Lib(Error),
    Usage(String),
    CheckFailed(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Lib(e) => e.exit_code(),
            Failure::Usage(_) => 2,
            Failure::CheckFailed(_) => 5,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Usage(m) | Failure::CheckFailed(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Augment(args) => cmd_augment(&args),
        Command::Atlas(args) => cmd_atlas_stats(&args),
        Command::LossCheck(args) => cmd_loss_check(&args),
        Command::Demo(args) => cmd_demo(&args),
        Command::Preview(args) => cmd_preview(&args),
    }
}

fn parse_label(text: &str, flag: &str) -> CliResult<SoftLabel> {
    let weights = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Failure::Usage(format!("{flag}: expected comma-separated numbers, got {text:?}")))?;
    SoftLabel::from_weights(&weights, LABEL_TOL).map_err(|e| Failure::Usage(format!("{flag}: {e}")))
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::Lib(Error::IoFailure { path: path.clone(), source: e }))
}

pub fn cmd_augment(args: &AugmentArgs) -> CliResult<()> {
    let label_anchor = parse_label(&args.label_anchor, "--label-anchor")?;
    let label_donor = parse_label(&args.label_donor, "--label-donor")?;
    if label_anchor.classes() != label_donor.classes() {
        return Err(Failure::Usage(format!(
            "anchor label has {} classes but donor label has {}",
            label_anchor.classes(),
            label_donor.classes()
        )));
    }
    let policy = match args.method {
        MethodArg::Bar => {
            if args.alpha.is_some() {
                return Err(Failure::Usage("--alpha applies to cutmix only".into()));
            }
            match (args.regions, args.bernoulli) {
                (Some(k), _) => RegionPolicy::FixedCount { k },
                (None, Some(p)) => RegionPolicy::Bernoulli { p },
                (None, None) => RegionPolicy::default(),
            }
        }
        MethodArg::Cutmix => {
            if args.regions.is_some() || args.bernoulli.is_some() {
                return Err(Failure::Usage("--regions/--bernoulli apply to bar only".into()));
            }
            RegionPolicy::default()
        }
    };

    let anchor = load_nifti(&args.anchor)?;
    let donor = load_nifti(&args.donor)?;
    let atlas = load_atlas(&args.atlas, &args.lut)?;
    validate_alignment(&anchor, &atlas)?;
    validate_alignment(&donor, &atlas)?;

    let mut rng = seeded(args.seed);
    let (replacement, method, replaced) = match args.method {
        MethodArg::Bar => {
            policy.validate(atlas.region_count())?;
            let regions = sample_regions(&atlas, policy, &mut rng)?;
            let out = bar_replace(&anchor, &donor, &atlas, &regions)?;
            (out, Method::Bar, Replaced::Regions(regions))
        }
        MethodArg::Cutmix => {
            let out = cutmix3d(&anchor, &donor, args.alpha.unwrap_or(1.0), &mut rng, &atlas)?;
            (out.replacement, Method::CutMix, Replaced::Cuboid(out.cuboid))
        }
    };
    let label = mix_labels(&label_anchor, &label_donor, replacement.ratio)?;
    let sample = AugmentedSample {
        volume: replacement.volume,
        ratio: replacement.ratio,
        label,
        provenance: Provenance {
            method,
            seed: args.seed,
            stream: 0,
            anchor: 0,
            donor: 1,
            replaced,
        },
    };
    save_nifti(&sample.volume, &args.out)?;
    let record = sample.record(args.anchor.display().to_string(), args.donor.display().to_string());
    let mut json = serde_json::to_string_pretty(&record).expect("record serializes");
    json.push('\n');
    write_file(&args.meta, json.as_bytes())?;
    println!("ratio={:.6}", sample.ratio);
    Ok(())
}

pub fn cmd_atlas_stats(args: &AtlasArgs) -> CliResult<()> {
    let atlas = load_atlas(&args.atlas, &args.lut)?;
    let brain = atlas.brain_voxel_count();
    if brain == 0 {
        eprintln!("warning: atlas has no brain voxels");
        return Ok(());
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (id, count) in atlas.region_voxel_counts() {
        let name = &atlas.lut()[&id];
        let _ = writeln!(out, "{id}\t{name}\t{count}\t{:.6}", count as f64 / brain as f64);
    }
    Ok(())
}

pub fn cmd_loss_check(args: &LossCheckArgs) -> CliResult<()> {
    if args.n < 2 || args.d < 2 {
        return Err(Failure::Usage(format!("need --n >= 2 and --d >= 2, got n={} d={}", args.n, args.d)));
    }
    if !(args.tau > 0.0 && args.tau.is_finite()) {
        return Err(Failure::Usage(format!("--tau must be positive, got {}", args.tau)));
    }
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let mut worst: f64 = 0.0;
    for trial in 0..args.trials {
        let batch = random_batch(args.n, args.d, args.tau, &mut substream(args.seed, trial as u64))?;
        let loss = soft_supcon_loss(&batch)?.value;
        let err = finite_diff_check(&batch, GRADCHECK_EPS)?;
        println!("{}", check_line(args.n, args.d, args.tau, loss, err));
        worst = worst.max(err);
    }
    if worst >= GRADCHECK_TOL {
        return Err(Failure::CheckFailed(format!(
            "gradient check failed: max relative error {worst:.3e} >= {GRADCHECK_TOL:.0e}"
        )));
    }
    Ok(())
}

pub fn cmd_demo(args: &DemoArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::IoFailure {
        path: args.config.clone(),
        source: e,
    })?;
    let cfg = DemoConfig::from_json(&text)?;
    let report = run_comparison(&cfg)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::IoFailure {
        path: args.out_dir.clone(),
        source: e,
    })?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&args.out_dir.join("report.json"), json.as_bytes())?;
    let table = report.table();
    write_file(&args.out_dir.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

pub fn cmd_preview(args: &PreviewArgs) -> CliResult<()> {
    let vol = load_nifti(&args.input)?;
    let pgm = slice_pgm(&vol, args.axis, args.index)?;
    write_file(&args.out, &pgm)
}
