//! `gcsc` — command line front end for the convolutional sparse coding
//! toolkit: dictionary training, sparse coding, reconstruction, inpainting,
//! salt-and-pepper denoising, and PSNR reporting.
//!
//! Every file-producing command writes a JSON run manifest next to its
//! primary output, recording the tool version and all resolved parameters;
//! `gcsc replay <manifest>` re-executes the recorded run. Code and dictionary
//! outputs depend only on flags and seeds, so reruns are byte-identical.
//!
//! Exit codes: 0 success, 1 file problems, 2 usage errors, 3 numerical
//! failures.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gcsc::{
    gcmp, gcomp, gct, inpaint, io, prune_noise_atoms, psnr, reconstruct, report, snp_denoise,
    stgcomp, train, CglsConfig, Error, GrayImage, LearnAlgorithm, LearnConfig, PixelMask,
    PursuitConfig, PursuitResult, QualityReport, SnpConfig,
};

const TOOL: &str = "gcsc";
const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Atoms whose energy concentrates on fewer pixels than this are treated as
/// impulse-like by `denoise-snp --prune-eps`.
const PRUNE_MIN_PIXELS: usize = 3;

#[derive(Parser)]
#[command(
    name = TOOL,
    version,
    about = "Convolutional sparse coding with a per-pixel overlap budget",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a dictionary of small local atoms from training images
    Train(TrainArgs),
    /// Sparse-code an image against a dictionary
    Encode(EncodeArgs),
    /// Render the image a code file represents
    Reconstruct(ReconstructArgs),
    /// Fill missing pixels from the surviving observations
    Inpaint(InpaintArgs),
    /// Split an image into a clean component and impulse noise
    DenoiseSnp(DenoiseArgs),
    /// Peak signal-to-noise ratio between two images
    Psnr(PsnrArgs),
    /// Re-run a recorded manifest
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TrainAlgo {
    /// Joint update of all atoms per iteration.
    Cmod,
    /// Sequential per-atom sweep (faster; the default).
    Cbcd,
}

impl From<TrainAlgo> for LearnAlgorithm {
    fn from(a: TrainAlgo) -> Self {
        match a {
            TrainAlgo::Cmod => LearnAlgorithm::Cmod,
            TrainAlgo::Cbcd => LearnAlgorithm::Cbcd,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EncodeAlgo {
    /// Greedy matching pursuit under the per-pixel budget.
    Gcmp,
    /// Like gcmp, plus a least-squares refit of all coefficients per layer.
    Gcomp,
    /// One-shot thresholding: sort correlations once, keep the top layers.
    Gct,
    /// Staged gcomp: budget grows delta-k layers at a time.
    Stgcomp,
}

impl EncodeAlgo {
    fn name(self) -> &'static str {
        match self {
            EncodeAlgo::Gcmp => "gcmp",
            EncodeAlgo::Gcomp => "gcomp",
            EncodeAlgo::Gct => "gct",
            EncodeAlgo::Stgcomp => "stgcomp",
        }
    }
}

#[derive(Clone, clap::Args, Serialize, Deserialize)]
struct TrainArgs {
    /// Training images (PGM).
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Number of atoms to learn.
    #[arg(long)]
    p: usize,
    /// Atom side length (atoms are m x m).
    #[arg(long)]
    m: usize,
    /// Per-pixel budget used when coding the training images.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Alternations between coding and dictionary update.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Dictionary update rule.
    #[arg(long, value_enum, default_value = "cbcd")]
    algo: TrainAlgo,
    /// Mean-squared-error tolerance of the inner least-squares solver.
    #[arg(long = "cgls-tol", default_value_t = 1.0)]
    cgls_tol: f64,
    /// Seed for the random initial dictionary.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for coding the training images; 0 means all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output dictionary (.gcdict).
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration error trace [default: <out>.trace.csv].
    #[arg(long)]
    #[serde(default)]
    trace: Option<PathBuf>,
}

impl TrainArgs {
    fn resolve(&mut self) {
        let out = self.out.clone();
        self.trace.get_or_insert_with(|| out.with_extension("trace.csv"));
    }
}

#[derive(Clone, clap::Args, Serialize, Deserialize)]
struct EncodeArgs {
    /// Image to code (PGM).
    image: PathBuf,
    /// Dictionary file (.gcdict).
    #[arg(long)]
    dict: PathBuf,
    /// Pursuit algorithm.
    #[arg(long, value_enum, default_value = "gcmp")]
    algo: EncodeAlgo,
    /// Per-pixel budget (layers). gcmp/gcomp accept --k and/or --eps.
    #[arg(long)]
    #[serde(default)]
    k: Option<usize>,
    /// Stop once the residual l2 norm drops to this value. 0 never stops
    /// early, so the run ends at the layer cap with a warning.
    #[arg(long)]
    #[serde(default)]
    eps: Option<f64>,
    /// Layers added per stage (stgcomp only).
    #[arg(long = "delta-k", default_value_t = 1)]
    delta_k: usize,
    /// Output code (.gccode).
    #[arg(long)]
    out: PathBuf,
    /// Metrics CSV to append to [default: <out>.metrics.csv].
    #[arg(long)]
    #[serde(default)]
    metrics: Option<PathBuf>,
}

impl EncodeArgs {
    fn resolve(&mut self) {
        let out = self.out.clone();
        self.metrics
            .get_or_insert_with(|| out.with_extension("metrics.csv"));
    }
}

#[derive(Clone, clap::Args, Serialize, Deserialize)]
struct ReconstructArgs {
    /// Code file (.gccode).
    code: PathBuf,
    /// Dictionary the code was built against (.gcdict).
    #[arg(long)]
    dict: PathBuf,
    /// Output image (PGM; values clamp to [0,1] on save).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, clap::Args, Serialize, Deserialize)]
struct InpaintArgs {
    /// Corrupted image (PGM). Missing pixels are forced to 0 before coding,
    /// whatever the file holds there.
    image: PathBuf,
    /// Observation mask (PGM): 0 means missing, anything else observed.
    #[arg(long)]
    mask: PathBuf,
    /// Dictionary file (.gcdict).
    #[arg(long)]
    dict: PathBuf,
    /// Per-pixel budget for the masked pursuit.
    #[arg(long)]
    k: usize,
    /// Output image (PGM): the dictionary reconstruction on the full canvas.
    #[arg(long)]
    out: PathBuf,
    /// Also write the masked code here (.gccode).
    #[arg(long = "code-out")]
    #[serde(default)]
    code_out: Option<PathBuf>,
    /// Metrics CSV to append to [default: <out>.metrics.csv]. The row scores
    /// the reconstruction against the zeroed input, missing pixels included.
    #[arg(long)]
    #[serde(default)]
    metrics: Option<PathBuf>,
}

impl InpaintArgs {
    fn resolve(&mut self) {
        let out = self.out.clone();
        self.metrics
            .get_or_insert_with(|| out.with_extension("metrics.csv"));
    }
}

#[derive(Clone, clap::Args, Serialize, Deserialize)]
struct DenoiseArgs {
    /// Noisy image (PGM).
    image: PathBuf,
    /// Dictionary for the image component (.gcdict).
    #[arg(long)]
    dict: PathBuf,
    /// Per-pixel budget for the image component.
    #[arg(long)]
    k: usize,
    /// Per-pixel budget for the impulse component.
    #[arg(long = "k-noise")]
    k_noise: usize,
    /// Treat the input as dark-on-light text: code the inverted image and
    /// undo the inversion on output.
    #[arg(long = "invert-text")]
    #[serde(default)]
    invert_text: bool,
    /// Drop atoms whose energy sits on fewer than 3 pixels (within this
    /// tolerance) from the dictionary first, so they cannot absorb impulses.
    /// 0 disables pruning.
    #[arg(long = "prune-eps", default_value_t = 0.01)]
    prune_eps: f64,
    /// Output for the clean component (PGM).
    #[arg(long)]
    out: PathBuf,
    /// Output for the impulse component [default: <out>.noise.pgm]. Negative
    /// impulses clamp to 0 in the PGM.
    #[arg(long = "noise-out")]
    #[serde(default)]
    noise_out: Option<PathBuf>,
    /// Metrics CSV to append to [default: <out>.metrics.csv]. The row scores
    /// the clean component against the noisy input.
    #[arg(long)]
    #[serde(default)]
    metrics: Option<PathBuf>,
}

impl DenoiseArgs {
    fn resolve(&mut self) {
        let out = self.out.clone();
        self.noise_out
            .get_or_insert_with(|| out.with_extension("noise.pgm"));
        self.metrics
            .get_or_insert_with(|| out.with_extension("metrics.csv"));
    }
}

#[derive(Clone, clap::Args, Serialize, Deserialize)]
struct PsnrArgs {
    /// Reference image (PGM).
    a: PathBuf,
    /// Image to compare (PGM).
    b: PathBuf,
    /// Peak signal value in the PSNR formula.
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

#[derive(Clone, clap::Args)]
struct ReplayArgs {
    /// A .manifest.json written by an earlier run.
    manifest: PathBuf,
}

// ===== run manifests =====

/// What gets written next to every primary output: enough to audit a run or
/// feed it back through `gcsc replay`.
#[derive(Serialize, Deserialize)]
struct RunManifest {
    tool: String,
    version: String,
    #[serde(flatten)]
    run: RunSpec,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
enum RunSpec {
    Train(TrainArgs),
    Encode(EncodeArgs),
    Reconstruct(ReconstructArgs),
    Inpaint(InpaintArgs),
    DenoiseSnp(DenoiseArgs),
}

impl RunSpec {
    fn primary_out(&self) -> &Path {
        match self {
            RunSpec::Train(a) => &a.out,
            RunSpec::Encode(a) => &a.out,
            RunSpec::Reconstruct(a) => &a.out,
            RunSpec::Inpaint(a) => &a.out,
            RunSpec::DenoiseSnp(a) => &a.out,
        }
    }
}

fn manifest_path(primary_out: &Path) -> PathBuf {
    let mut name = primary_out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary_out.with_file_name(name)
}

fn write_manifest(run: &RunSpec) -> Result<(), Failure> {
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        run: run.clone(),
    };
    let body = serde_json::to_string_pretty(&manifest)
        .expect("manifest serialization cannot fail") + "\n";
    let path = manifest_path(run.primary_out());
    fs::write(&path, body).map_err(|e| Failure::file(&path, e))
}

// ===== failures and exit codes =====

enum Failure {
    /// Bad flag combinations caught after clap parsing.
    Usage(String),
    /// File problems on CLI-owned outputs (manifests, CSV appends).
    File { path: PathBuf, source: std::io::Error },
    /// A manifest that does not parse or came from another tool.
    Manifest { path: PathBuf, reason: String },
    Lib(Error),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    fn file(path: &Path, source: std::io::Error) -> Self {
        Failure::File { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Lib(Error::Param(_)) => 2,
            Failure::Lib(e) if e.is_numerical() => 3,
            _ => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "{msg}"),
            Failure::File { path, source } => {
                write!(f, "i/o error on {}: {source}", path.display())
            }
            Failure::Manifest { path, reason } => {
                write!(f, "bad manifest {}: {reason}", path.display())
            }
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

// ===== shared helpers =====

/// Appends `rows` (newline-separated, no trailing newline needed) to a CSV,
/// writing `header` first when the file does not exist yet.
fn append_csv(path: &Path, header: &str, rows: &str) -> Result<(), Failure> {
    let fresh = !path.exists();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Failure::file(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(header);
        text.push('\n');
    }
    text.push_str(rows.trim_end());
    text.push('\n');
    file.write_all(text.as_bytes())
        .map_err(|e| Failure::file(path, e))
}

/// CSV image identifier: the input's file stem.
fn image_id(path: &Path) -> String {
    path.file_stem().unwrap_or(path.as_os_str()).to_string_lossy().into_owned()
}

fn warn_if_unfinished(result: &PursuitResult, cfg: &PursuitConfig) {
    if result.truncated {
        eprintln!(
            "{TOOL}: warning: stopped at the layer cap ({} layers) with the \
             stopping rule unmet; the code is a truncated run",
            result.layers_used
        );
    } else if let Some(eps) = cfg.epsilon {
        if result.residual_norm > eps {
            eprintln!(
                "{TOOL}: warning: pursuit stalled at residual l2 {:.3e} before \
                 reaching --eps {eps}",
                result.residual_norm
            );
        }
    }
}

// ===== commands =====

fn run_train(args: &TrainArgs) -> Result<(), Failure> {
    if args.jobs > 0 {
        // the global pool can only be sized once per process; later calls
        // (e.g. a replay in-process) keep the first size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build_global();
    }
    let mut images = Vec::with_capacity(args.images.len());
    for path in &args.images {
        images.push(io::load_image(path)?);
    }
    let cfg = LearnConfig {
        outer_iters: args.iters,
        seed: args.seed,
        cgls: CglsConfig { tol: args.cgls_tol, ..CglsConfig::default() },
        algorithm: args.algo.into(),
        ..LearnConfig::new(args.p, args.m, args.k)
    };
    let (dict, trace) = train(&images, &cfg)?;
    io::save_dictionary(&args.out, &dict)?;

    let trace_path = args.trace.clone().unwrap_or_else(|| args.out.with_extension("trace.csv"));
    let csv = trace.to_csv();
    let (header, rows) = csv.split_once('\n').expect("trace csv always has a header line");
    append_csv(&trace_path, header, rows)?;

    if let Some(last) = trace.rows.last() {
        println!(
            "trained {} atoms ({}x{}) on {} image(s) in {} iteration(s): \
             final squared error {:.6e}",
            dict.p(),
            dict.m(),
            dict.m(),
            images.len(),
            trace.rows.len(),
            last.error_post_update
        );
    }
    Ok(())
}

fn pursuit_config(args: &EncodeArgs) -> Result<PursuitConfig, Failure> {
    match args.algo {
        EncodeAlgo::Gct => {
            if args.k.is_none() {
                return Err(Failure::usage("--algo gct needs --k"));
            }
            if args.eps.is_some() {
                return Err(Failure::usage(
                    "--algo gct decides everything from one correlation pass; drop --eps",
                ));
            }
        }
        EncodeAlgo::Stgcomp => {
            if args.k.is_none() {
                return Err(Failure::usage("--algo stgcomp needs --k"));
            }
        }
        EncodeAlgo::Gcmp | EncodeAlgo::Gcomp => {
            if args.k.is_none() && args.eps.is_none() {
                return Err(Failure::usage("encode needs a stopping rule: --k and/or --eps"));
            }
        }
    }
    Ok(PursuitConfig {
        target_k: args.k,
        epsilon: args.eps,
        delta_k: args.delta_k,
        ..PursuitConfig::default()
    })
}

fn run_encode(args: &EncodeArgs) -> Result<(), Failure> {
    let x = io::load_image(&args.image)?;
    let dict = io::load_dictionary(&args.dict)?;
    let cfg = pursuit_config(args)?;
    let result = match args.algo {
        EncodeAlgo::Gcmp => gcmp(&x, &dict, &cfg, None)?,
        EncodeAlgo::Gcomp => gcomp(&x, &dict, &cfg, None)?,
        EncodeAlgo::Gct => gct(&x, &dict, args.k.expect("checked above"))?,
        EncodeAlgo::Stgcomp => stgcomp(&x, &dict, &cfg)?,
    };
    warn_if_unfinished(&result, &cfg);

    io::save_code(&args.out, &result.code)?;
    let quality = report(&x, &result.code, &dict)?;
    let k_column = args.k.unwrap_or(result.measured_l0inf);
    let row = quality.csv_row(&image_id(&args.image), args.algo.name(), k_column);
    let metrics = args.metrics.clone().unwrap_or_else(|| args.out.with_extension("metrics.csv"));
    append_csv(&metrics, QualityReport::CSV_HEADER, &row)?;

    println!(
        "coded {} with {}: {} layers, {} placements, residual l2 {:.6e}",
        image_id(&args.image),
        args.algo.name(),
        result.layers_used,
        result.code.l0(),
        result.residual_norm
    );
    Ok(())
}

fn run_reconstruct(args: &ReconstructArgs) -> Result<(), Failure> {
    let code = io::load_code(&args.code)?;
    let dict = io::load_dictionary(&args.dict)?;
    let img = reconstruct(&code, &dict)?;
    io::save_image(&args.out, &img)?;
    println!(
        "rendered {}x{} image from {} placements",
        img.height(),
        img.width(),
        code.l0()
    );
    Ok(())
}

fn run_inpaint(args: &InpaintArgs) -> Result<(), Failure> {
    let mut y = io::load_image(&args.image)?;
    let mask = io::load_mask(&args.mask)?;
    let dict = io::load_dictionary(&args.dict)?;
    if mask.height() != y.height() || mask.width() != y.width() {
        return Err(Failure::usage(format!(
            "mask is {}x{} but the image is {}x{}",
            mask.height(),
            mask.width(),
            y.height(),
            y.width()
        )));
    }
    zero_missing(&mut y, &mask);

    let (filled, result) = inpaint(&y, &mask, &dict, args.k)?;
    io::save_image(&args.out, &filled)?;
    if let Some(code_out) = &args.code_out {
        io::save_code(code_out, &result.code)?;
    }

    let quality = report(&y, &result.code, &dict)?;
    let row = quality.csv_row(&image_id(&args.image), "inpaint", args.k);
    let metrics = args.metrics.clone().unwrap_or_else(|| args.out.with_extension("metrics.csv"));
    append_csv(&metrics, QualityReport::CSV_HEADER, &row)?;

    println!(
        "inpainted {} from {} of {} pixels: {} placements, psnr vs zeroed input {}",
        image_id(&args.image),
        mask.count_observed(),
        y.pixels(),
        result.code.l0(),
        db(quality.psnr_db)
    );
    Ok(())
}

/// The model assumes missing pixels hold the value zero; enforce that rather
/// than trust the input file.
fn zero_missing(y: &mut GrayImage, mask: &PixelMask) {
    for r in 0..y.height() {
        for c in 0..y.width() {
            if !mask.observed(r, c) {
                y.set(r, c, 0.0);
            }
        }
    }
}

fn run_denoise(args: &DenoiseArgs) -> Result<(), Failure> {
    let x = io::load_image(&args.image)?;
    let mut dict = io::load_dictionary(&args.dict)?;
    if args.prune_eps > 0.0 {
        dict = prune_noise_atoms(&dict, args.prune_eps, PRUNE_MIN_PIXELS)?;
    }
    let cfg = SnpConfig {
        invert_text: args.invert_text,
        ..SnpConfig::new(args.k, args.k_noise)
    };
    let out = snp_denoise(&x, &dict, &cfg)?;

    io::save_image(&args.out, &out.clean)?;
    let noise_path = args.noise_out.clone().unwrap_or_else(|| args.out.with_extension("noise.pgm"));
    io::save_image(&noise_path, &out.noise)?;

    // Score the clean component against the noisy input; the residual is
    // whatever the joint image + impulse model failed to explain.
    let joint_residual = x
        .as_slice()
        .iter()
        .zip(out.clean.as_slice().iter().zip(out.noise.as_slice()))
        .map(|(&xi, (&ci, &ni))| (xi - ci - ni) * (xi - ci - ni))
        .sum::<f64>()
        .sqrt();
    let bounds = gcsc::l0_l0inf_bounds(&out.image_code)?;
    let quality = QualityReport {
        psnr_db: psnr(&x, &out.clean, 1.0)?,
        l0: bounds.l0,
        l0inf: bounds.l0inf,
        residual_l2: joint_residual,
        pixels: x.pixels(),
    };
    let row = quality.csv_row(&image_id(&args.image), "snp", args.k);
    let metrics = args.metrics.clone().unwrap_or_else(|| args.out.with_extension("metrics.csv"));
    append_csv(&metrics, QualityReport::CSV_HEADER, &row)?;

    println!(
        "separated {} in {} iteration(s): {} image placements, {} impulses, \
         clean-vs-input psnr {}",
        image_id(&args.image),
        out.iterations,
        out.image_code.l0(),
        out.noise_code.l0(),
        db(quality.psnr_db)
    );
    Ok(())
}

fn run_psnr(args: &PsnrArgs) -> Result<(), Failure> {
    let a = io::load_image(&args.a)?;
    let b = io::load_image(&args.b)?;
    let value = psnr(&a, &b, args.peak)?;
    println!("{value}");
    Ok(())
}

fn run_replay(args: &ReplayArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.manifest).map_err(|e| Failure::file(&args.manifest, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Failure::Manifest {
        path: args.manifest.clone(),
        reason: e.to_string(),
    })?;
    if manifest.tool != TOOL {
        return Err(Failure::Manifest {
            path: args.manifest.clone(),
            reason: format!("recorded by {:?}, not {TOOL}", manifest.tool),
        });
    }
    if manifest.version != VERSION {
        eprintln!(
            "{TOOL}: warning: manifest was written by version {}, replaying with {VERSION}",
            manifest.version
        );
    }
    run_spec(manifest.run)
}

/// Display for PSNR values in human-facing lines: "inf" or fixed precision.
fn db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.2} dB")
    }
}

fn run_spec(run: RunSpec) -> Result<(), Failure> {
    match &run {
        RunSpec::Train(a) => run_train(a)?,
        RunSpec::Encode(a) => run_encode(a)?,
        RunSpec::Reconstruct(a) => run_reconstruct(a)?,
        RunSpec::Inpaint(a) => run_inpaint(a)?,
        RunSpec::DenoiseSnp(a) => run_denoise(a)?,
    }
    write_manifest(&run)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(mut a) => {
            a.resolve();
            run_spec(RunSpec::Train(a))
        }
        Command::Encode(mut a) => {
            a.resolve();
            run_spec(RunSpec::Encode(a))
        }
        Command::Reconstruct(a) => run_spec(RunSpec::Reconstruct(a)),
        Command::Inpaint(mut a) => {
            a.resolve();
            run_spec(RunSpec::Inpaint(a))
        }
        Command::DenoiseSnp(mut a) => {
            a.resolve();
            run_spec(RunSpec::DenoiseSnp(a))
        }
        Command::Psnr(a) => run_psnr(&a),
        Command::Replay(a) => run_replay(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{TOOL}: error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
