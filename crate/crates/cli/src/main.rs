use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use music_imaging::analysis::{find_peaks, match_peaks};
use music_imaging::config::{ExperimentConfig, ForwardModel, SweepConfig};
use music_imaging::experiment::{self, CompareWith, Error};
use music_imaging::imaging::{omega_of, theoretical_map, GridSpec, TheoryMode, DEFAULT_FLOOR};
use music_imaging::numerics::directions;
use music_imaging::scene::{reference_scene_with, Scene, DEFAULT_SEED};
use music_imaging::spectral::{
    add_noise, decompose, read_msr, singular_values_csv, write_msr, Selection,
};

#[derive(Parser)]
#[command(
    name = "music-imaging",
    version,
    about = "MUSIC imaging of small inhomogeneities among random scatterers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the reference scene (three targets, 100 random scatterers) as JSON.
    Scene(SceneArgs),
    /// Synthesize an MSR matrix and write it as .csv or .bin.
    Forward(ForwardArgs),
    /// Image one or more MSR files (several files give the multi-frequency map).
    Image(ImageArgs),
    /// Evaluate the closed-form predictor map for a scene.
    Theory(TheoryArgs),
    /// Compare a bundle with another bundle or with its own predictor map.
    Compare(CompareArgs),
    /// Run every combination of a sweep configuration.
    Sweep(RunArgs),
    /// Run one experiment configuration end to end.
    Run(RunArgs),
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    random_radius: f64,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1.0, 2.0])]
    eps_range: Vec<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SceneInput {
    /// Scene JSON file; the reference scene with `--seed` when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl SceneInput {
    fn load(&self) -> Result<Scene, Error> {
        match &self.scene {
            Some(path) => Ok(Scene::from_json(&read_text(path)?)?),
            None => Ok(music_imaging::scene::reference_scene(self.seed)?),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Asymptotic,
    FoldyLax,
}

impl From<Model> for ForwardModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Asymptotic => ForwardModel::Asymptotic,
            Model::FoldyLax => ForwardModel::FoldyLax,
        }
    }
}

#[derive(Args)]
struct ForwardArgs {
    #[command(flatten)]
    input: SceneInput,
    #[arg(long)]
    lambda: f64,
    #[arg(long = "n", default_value_t = 32)]
    n_directions: usize,
    #[arg(long, value_enum, default_value_t = Model::FoldyLax)]
    model: Model,
    /// Add Gaussian noise at this SNR in dB.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    noise_seed: u64,
    /// Output file, `.csv` or `.bin`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 101)]
    nx: usize,
    #[arg(long, default_value_t = 101)]
    ny: usize,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
}

#[derive(Args)]
struct ImageArgs {
    /// MSR files, one per wavelength.
    #[arg(long, required = true, num_args = 1..)]
    msr: Vec<PathBuf>,
    /// Wavelengths matching `--msr`, in the same order.
    #[arg(long, required = true, num_args = 1..)]
    lambda: Vec<f64>,
    /// `first_k:K` or `threshold:RATIO`.
    #[arg(long, value_parser = parse_selection)]
    selection: Selection,
    #[command(flatten)]
    grid: GridArgs,
    /// Scene whose targets are used to report peak matches.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    peak_separation: f64,
    #[arg(long, env = experiment::OUTPUT_DIR_ENV, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    TargetsOnly,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    input: SceneInput,
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Mode::TargetsOnly)]
    mode: Mode,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, env = experiment::OUTPUT_DIR_ENV, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Bundle directory of a previous run.
    a: PathBuf,
    /// Second bundle; the first bundle's predictor map when omitted.
    b: Option<PathBuf>,
    /// Ignore points this close to any scatterer (default: a quarter of the shortest wavelength).
    #[arg(long)]
    exclusion: Option<f64>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration JSON.
    config: PathBuf,
    /// Output directory; defaults to the configuration's `outputs`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_selection(text: &str) -> Result<Selection, String> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| format!("expected first_k:K or threshold:RATIO, got {text:?}"))?;
    match kind {
        "first_k" => value
            .parse()
            .map(Selection::FirstK)
            .map_err(|e| format!("first_k: {e}")),
        "threshold" => value
            .parse()
            .map(Selection::Threshold)
            .map_err(|e| format!("threshold: {e}")),
        other => Err(format!("unknown selection scheme {other:?}")),
    }
}

/// Prints a line, treating a closed pipe as success.
fn emit(line: &str) -> Result<(), Error> {
    match writeln!(io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn make_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn check_grid(args: &GridArgs) -> Result<(), Error> {
    let invalid = |field: &'static str, message: &str| {
        Error::Config(music_imaging::config::ConfigError::Invalid {
            field,
            message: message.into(),
        })
    };
    if args.nx < 2 || args.ny < 2 {
        return Err(invalid("grid", "needs at least 2 points per axis"));
    }
    if !(args.floor > 0.0 && args.floor.is_finite()) {
        return Err(invalid("floor", "must be positive"));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<f64, Error> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(Error::Config(music_imaging::config::ConfigError::Invalid {
            field: "lambda",
            message: format!("{lambda} is not a positive wavelength"),
        }))
    }
}

fn scene_cmd(args: SceneArgs) -> Result<(), Error> {
    let scene = reference_scene_with(
        args.seed,
        args.random_radius,
        [args.eps_range[0], args.eps_range[1]],
    )?;
    match args.out {
        Some(path) => write_text(&path, &scene.to_json()),
        None => emit(&scene.to_json()),
    }
}

fn forward_cmd(args: ForwardArgs) -> Result<(), Error> {
    let scene = args.input.load()?;
    let lambda = check_lambda(args.lambda)?;
    if args.n_directions == 0 {
        return Err(Error::Config(music_imaging::config::ConfigError::Invalid {
            field: "n",
            message: "must be positive".into(),
        }));
    }
    let dirs = directions(args.n_directions);
    let mut k = experiment::synthesize(&scene, &dirs, omega_of(lambda), args.model.into())?;
    if let Some(snr) = args.snr {
        k = add_noise(&k, snr, args.noise_seed)?;
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        make_dir(parent)?;
    }
    write_msr(&args.out, &k)?;
    Ok(())
}

fn image_cmd(args: ImageArgs) -> Result<(), Error> {
    check_grid(&args.grid)?;
    if args.msr.len() != args.lambda.len() {
        return Err(Error::Config(music_imaging::config::ConfigError::Invalid {
            field: "lambda",
            message: format!(
                "{} MSR files but {} wavelengths",
                args.msr.len(),
                args.lambda.len()
            ),
        }));
    }
    let scene = args
        .scene
        .as_deref()
        .map(|p| Ok::<_, Error>(Scene::from_json(&read_text(p)?)?))
        .transpose()?;
    let mut subs = Vec::new();
    let mut omegas = Vec::new();
    let mut dim = None;
    for (path, &lambda) in args.msr.iter().zip(&args.lambda) {
        let omega = omega_of(check_lambda(lambda)?);
        let k = read_msr(path, omega)?;
        if dim.is_some_and(|d| d != k.dim()) {
            return Err(Error::Config(music_imaging::config::ConfigError::Invalid {
                field: "msr",
                message: "all MSR files must have the same size".into(),
            }));
        }
        dim = Some(k.dim());
        subs.push(decompose(&k)?.select(args.selection)?);
        omegas.push(omega);
    }
    let dirs = directions(dim.expect("at least one file"));
    let domain = scene
        .as_ref()
        .map(|s| s.domain())
        .unwrap_or_else(|| GridSpec::default().domain);
    let grid = GridSpec::new(domain, args.grid.nx, args.grid.ny);
    let map = experiment::image(&subs, &dirs, &omegas, grid, args.grid.floor)?;

    let out = args.out_dir;
    make_dir(&out)?;
    experiment::write_map(&out, "map_music", &map)?;
    for (sub, lambda) in subs.iter().zip(&args.lambda) {
        let name = format!("singular_values_{}.csv", experiment::lambda_label(*lambda));
        write_text(&out.join(name), &singular_values_csv(sub.singular_values()))?;
    }
    if let Some(scene) = scene {
        let targets = scene.target_centers();
        let peaks = find_peaks(&map, targets.len(), args.peak_separation);
        let report = match_peaks(&peaks, &targets, grid.cell_diagonal());
        write_text(&out.join("peaks.json"), &report.to_json())?;
    }
    Ok(())
}

fn theory_cmd(args: TheoryArgs) -> Result<(), Error> {
    check_grid(&args.grid)?;
    let scene = args.input.load()?;
    let mode = match args.mode {
        Mode::Full => TheoryMode::Full,
        Mode::TargetsOnly => TheoryMode::TargetsOnly,
    };
    let grid = GridSpec::new(scene.domain(), args.grid.nx, args.grid.ny);
    let map = theoretical_map(
        &scene,
        grid,
        omega_of(check_lambda(args.lambda)?),
        mode,
        args.grid.floor,
    );
    make_dir(&args.out_dir)?;
    experiment::write_map(&args.out_dir, "map_theory", &map)
}

fn compare_cmd(args: CompareArgs) -> Result<(), Error> {
    let with = match &args.b {
        Some(b) => CompareWith::Bundle(b),
        None => CompareWith::Theory,
    };
    let report = experiment::compare(&args.a, with, args.exclusion)?;
    let text = serde_json::to_string_pretty(&report).expect("report serialization is infallible");
    if let Some(path) = &args.out {
        write_text(path, &text)?;
    }
    emit(&text)
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run_cmd(args: RunArgs) -> Result<(), Error> {
    let config = ExperimentConfig::from_json(&read_text(&args.config)?)?;
    let out = experiment::resolve_output_dir(args.out_dir.as_deref().unwrap_or(&config.outputs));
    let output = experiment::run(&config, &base_dir(&args.config), &out)?;
    let peaks = &output.summary.peaks;
    emit(&format!(
        "{}: {} of {} targets matched within {:.4}",
        out.display(),
        peaks.matched,
        peaks.k,
        peaks.match_radius
    ))
}

fn sweep_cmd(args: RunArgs) -> Result<(), Error> {
    let config = SweepConfig::from_json(&read_text(&args.config)?)?;
    let out =
        experiment::resolve_output_dir(args.out_dir.as_deref().unwrap_or(&config.base.outputs));
    let entries = experiment::sweep(&config, &base_dir(&args.config), &out)?;
    for e in &entries {
        emit(&format!(
            "{}: {} matched, {} unmatched",
            e.directory, e.matched, e.unmatched
        ))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scene(a) => scene_cmd(a),
        Command::Forward(a) => forward_cmd(a),
        Command::Image(a) => image_cmd(a),
        Command::Theory(a) => theory_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Run(a) => run_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
