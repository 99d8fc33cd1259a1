//! Reproducible experiment bundles: scene → data → SVD → maps → peaks,
//! written to one directory per run.
//!
//! A bundle contains `scene.json`, `msr_<λ>.csv` and
//! `singular_values_<λ>.csv` per wavelength, `map_music.{csv,pgm,pgm.json}`,
//! `map_theory.{csv,pgm,pgm.json}` when a predictor is requested,
//! `peaks.json` and `summary.json`. Nothing time- or host-dependent is
//! recorded, so identical configurations give byte-identical bundles.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{background_median, find_peaks, match_peaks, Peak, PeakReport};
use crate::config::{ConfigError, ExperimentConfig, ForwardModel, SweepConfig};
use crate::forward::{asymptotic_msr, foldy_lax_msr, ForwardError};
use crate::imaging::{
    compare_maps, multifreq_map, music_map, omega_of, theoretical_map, GridSpec, ImageGrid,
    ImagingError, MapComparison, TheoryMode,
};
use crate::numerics::{directions, DirectionSet};
use crate::scene::{validate_separation, Scene, SceneError};
use crate::spectral::{
    add_noise, decompose, singular_values_csv, write_msr, MsrMatrix, Selection, SignalSubspace,
    SpectralError,
};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "MUSIC_IMAGING_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("forward model: {0}")]
    Forward(#[from] ForwardError),
    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),
    #[error("imaging: {0}")]
    Imaging(#[from] ImagingError),
    #[error("bundle {path}: {message}")]
    Bundle { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// 2 for configuration and input problems, 3 for numerical failures,
    /// 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Scene(_) | Error::Bundle { .. } => 2,
            Error::Forward(
                ForwardError::MagneticContrast(_) | ForwardError::BackgroundSpeed(_),
            ) => 2,
            Error::Forward(_) => 3,
            Error::Spectral(
                SpectralError::SvdFailed | SpectralError::NonFinite | SpectralError::ZeroMatrix,
            ) => 3,
            Error::Spectral(SpectralError::Io(_)) => 1,
            Error::Spectral(_) => 2,
            Error::Imaging(ImagingError::Format(_) | ImagingError::GridMismatch(_)) => 2,
            Error::Imaging(_) => 3,
            Error::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// `out_dir`, unless [`OUTPUT_DIR_ENV`] is set.
pub fn resolve_output_dir(out_dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => out_dir.to_path_buf(),
    }
}

/// File-name label of a wavelength, e.g. `0.3`.
pub fn lambda_label(lambda: f64) -> String {
    format!("{lambda}")
}

/// MSR matrix from the chosen forward model.
pub fn synthesize(
    scene: &Scene,
    dirs: &DirectionSet,
    omega: f64,
    model: ForwardModel,
) -> Result<MsrMatrix, Error> {
    Ok(match model {
        ForwardModel::Asymptotic => asymptotic_msr(scene, dirs, omega),
        ForwardModel::FoldyLax => foldy_lax_msr(scene, dirs, omega)?,
    })
}

/// Single-frequency MUSIC map for one subspace, or the multi-frequency map
/// otherwise. `subs` and `omegas` are paired.
pub fn image(
    subs: &[SignalSubspace],
    dirs: &DirectionSet,
    omegas: &[f64],
    grid: GridSpec,
    floor: f64,
) -> Result<ImageGrid, Error> {
    if subs.len() == 1 && omegas.len() == 1 {
        return Ok(music_map(&subs[0], dirs, omegas[0], grid, floor));
    }
    // ascending frequency order
    let mut order: Vec<usize> = (0..omegas.len()).collect();
    order.sort_by(|&a, &b| omegas[a].total_cmp(&omegas[b]));
    let subs_sorted: Vec<SignalSubspace> =
        order.iter().filter_map(|&i| subs.get(i).cloned()).collect();
    let omegas_sorted: Vec<f64> = order.iter().map(|&i| omegas[i]).collect();
    Ok(multifreq_map(
        &subs_sorted,
        dirs,
        &omegas_sorted,
        grid,
        floor,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySummary {
    pub lambda: f64,
    pub omega: f64,
    pub sigma_1: f64,
    /// Singular values above `1e-10 σ_1`.
    pub numerical_rank: usize,
    pub selected_count: usize,
    pub noise_seed: Option<u64>,
    pub separation_violations: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapStats {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// Median outside disks of radius `λ_min / 2` around every scatterer.
    pub background_median: Option<f64>,
}

impl MapStats {
    fn of(map: &ImageGrid, centers: &[crate::Point], radius: f64) -> MapStats {
        let mut v = map.values().to_vec();
        v.sort_by(f64::total_cmp);
        let median = if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
        };
        MapStats {
            min: v[0],
            max: v[v.len() - 1],
            median,
            background_median: background_median(map, centers, radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub mode: TheoryMode,
    pub lambda: f64,
    pub exclusion_radius: f64,
    /// Imaging maps compared directly.
    pub map: Option<MapComparison>,
    /// `|P_noise f|²` maps, i.e. inverse squares of the imaging maps.
    pub residual: Option<MapComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub k: usize,
    pub min_separation: f64,
    pub match_radius: f64,
    pub matched: usize,
    pub unmatched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub config: ExperimentConfig,
    pub scene_seed: Option<u64>,
    pub targets: usize,
    pub randoms: usize,
    pub frequencies: Vec<FrequencySummary>,
    pub music: MapStats,
    pub theory: Option<TheorySummary>,
    pub peaks: PeakSummary,
    pub advisories: Vec<String>,
}

/// Everything a run computes, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scene: Scene,
    pub msr: Vec<MsrMatrix>,
    pub subspaces: Vec<SignalSubspace>,
    pub music: ImageGrid,
    pub theory: Option<ImageGrid>,
    pub peaks: PeakReport,
    pub summary: RunSummary,
}

/// Runs `config` in memory. Relative scene paths resolve against `base`.
pub fn execute(config: &ExperimentConfig, base: &Path) -> Result<RunOutput, Error> {
    config.validate()?;
    let scene = config.scene.resolve(base)?;
    let dirs = directions(config.n_directions);
    let grid = GridSpec::new(scene.domain(), config.grid.nx, config.grid.ny);

    let mut msr = Vec::new();
    let mut subspaces = Vec::new();
    let mut frequencies = Vec::new();
    let mut advisories = Vec::new();
    for (index, &lambda) in config.wavelengths.iter().enumerate() {
        let omega = omega_of(lambda);
        let mut k = synthesize(&scene, &dirs, omega, config.forward)?;
        let mut noise_seed = None;
        if let Some(noise) = config.noise {
            let seed = noise.seed.wrapping_add(index as u64);
            k = add_noise(&k, noise.snr_db, seed)?;
            noise_seed = Some(seed);
        }
        let sub = decompose(&k)?.select(config.selection)?;
        for note in scene.advisories(omega) {
            let note = format!("lambda {lambda}: {note}");
            log::warn!("{note}");
            advisories.push(note);
        }
        frequencies.push(FrequencySummary {
            lambda,
            omega,
            sigma_1: sub.singular_values().first().copied().unwrap_or(0.0),
            numerical_rank: sub.numerical_rank(1e-10),
            selected_count: sub.selected_count(),
            noise_seed,
            separation_violations: validate_separation(&scene, omega),
        });
        msr.push(k);
        subspaces.push(sub);
    }

    let omegas: Vec<f64> = frequencies.iter().map(|f| f.omega).collect();
    let music = image(&subspaces, &dirs, &omegas, grid, config.floor)?;

    let lambda_min = config
        .wavelengths
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let all_centers = scene.all_centers();
    let music_stats = MapStats::of(&music, &all_centers, lambda_min / 2.0);

    let (theory, theory_summary) = match config.theory {
        Some(mode) => {
            let omega = omega_of(lambda_min);
            let map = theoretical_map(&scene, grid, omega, mode, config.floor);
            let exclusion = lambda_min / 4.0;
            let direct = compare_maps(&music, &map, &all_centers, exclusion).ok();
            let inv_sq = |g: &ImageGrid| g.map(|v| 1.0 / (v * v));
            let residual =
                compare_maps(&inv_sq(&music), &inv_sq(&map), &all_centers, exclusion).ok();
            let summary = TheorySummary {
                mode,
                lambda: lambda_min,
                exclusion_radius: exclusion,
                map: direct,
                residual,
            };
            (Some(map), Some(summary))
        }
        None => (None, None),
    };

    let targets = scene.target_centers();
    let match_radius = config.match_radius.unwrap_or_else(|| grid.cell_diagonal());
    let found: Vec<Peak> = find_peaks(&music, targets.len(), config.peak_separation);
    let peaks = match_peaks(&found, &targets, match_radius);

    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        scene_seed: config.scene.seed(),
        targets: scene.inhomogeneities().len(),
        randoms: scene.randoms().len(),
        frequencies,
        music: music_stats,
        theory: theory_summary,
        peaks: PeakSummary {
            k: targets.len(),
            min_separation: config.peak_separation,
            match_radius,
            matched: peaks.matches.len(),
            unmatched: peaks.unmatched.len(),
        },
        advisories,
    };

    Ok(RunOutput {
        scene,
        msr,
        subspaces,
        music,
        theory,
        peaks,
        summary,
    })
}

/// Writes `<stem>.csv`, a 16-bit `<stem>.pgm`, and its `<stem>.pgm.json` scale.
pub fn write_map(dir: &Path, stem: &str, map: &ImageGrid) -> Result<(), Error> {
    write_file(&dir.join(format!("{stem}.csv")), map.to_csv())?;
    let (pgm, scale) = map.to_pgm(16);
    write_file(&dir.join(format!("{stem}.pgm")), pgm)?;
    let sidecar = serde_json::to_string_pretty(&scale).expect("scale serialization is infallible");
    write_file(&dir.join(format!("{stem}.pgm.json")), sidecar)
}

/// Runs `config` and writes the bundle into `out_dir`.
pub fn run(config: &ExperimentConfig, base: &Path, out_dir: &Path) -> Result<RunOutput, Error> {
    let output = execute(config, base)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_file(&out_dir.join("scene.json"), output.scene.to_json())?;
    for (k, f) in output.msr.iter().zip(&output.summary.frequencies) {
        let label = lambda_label(f.lambda);
        write_msr(&out_dir.join(format!("msr_{label}.csv")), k)?;
    }
    for (sub, f) in output.subspaces.iter().zip(&output.summary.frequencies) {
        let label = lambda_label(f.lambda);
        write_file(
            &out_dir.join(format!("singular_values_{label}.csv")),
            singular_values_csv(sub.singular_values()),
        )?;
    }
    write_map(out_dir, "map_music", &output.music)?;
    if let Some(theory) = &output.theory {
        write_map(out_dir, "map_theory", theory)?;
    }
    write_file(&out_dir.join("peaks.json"), output.peaks.to_json())?;
    let summary =
        serde_json::to_string_pretty(&output.summary).expect("summary serialization is infallible");
    write_file(&out_dir.join("summary.json"), summary)?;
    Ok(output)
}

/// A bundle read back from disk.
pub struct Bundle {
    pub scene: Scene,
    pub summary: RunSummary,
    pub music: ImageGrid,
    pub theory: Option<ImageGrid>,
}

impl Bundle {
    pub fn load(dir: &Path) -> Result<Bundle, Error> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(io_err(&path))
        };
        let scene = Scene::from_json(&read("scene.json")?)?;
        let summary: RunSummary =
            serde_json::from_str(&read("summary.json")?).map_err(|e| Error::Bundle {
                path: dir.join("summary.json"),
                message: e.to_string(),
            })?;
        let music = ImageGrid::from_csv(&read("map_music.csv")?)?;
        let theory_path = dir.join("map_theory.csv");
        let theory = if theory_path.exists() {
            Some(ImageGrid::from_csv(&read("map_theory.csv")?)?)
        } else {
            None
        };
        Ok(Bundle {
            scene,
            summary,
            music,
            theory,
        })
    }

    pub fn lambda_min(&self) -> f64 {
        self.summary
            .config
            .wavelengths
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// What a bundle's MUSIC map is compared against.
pub enum CompareWith<'a> {
    Bundle(&'a Path),
    /// The bundle's own closed-form map.
    Theory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub exclusion_radius: f64,
    pub map: MapComparison,
    pub residual: MapComparison,
    pub peaks_a: Vec<Peak>,
    pub peaks_b: Vec<Peak>,
    /// Peaks of `b` matched against peaks of `a` within `λ_min / 2`.
    pub peak_agreement: PeakReport,
    pub background_median_a: Option<f64>,
    pub background_median_b: Option<f64>,
    /// `background_median_b / background_median_a`.
    pub background_ratio: Option<f64>,
}

/// Compares bundle `a` with another bundle or with its own theory map.
/// Points within `exclusion` of any scatterer are ignored; the default is
/// a quarter of the shortest wavelength.
pub fn compare(
    a: &Path,
    with: CompareWith<'_>,
    exclusion: Option<f64>,
) -> Result<ComparisonReport, Error> {
    let bundle_a = Bundle::load(a)?;
    let map_b = match with {
        CompareWith::Bundle(b) => Bundle::load(b)?.music,
        CompareWith::Theory => bundle_a.theory.clone().ok_or_else(|| Error::Bundle {
            path: a.to_path_buf(),
            message: "no map_theory.csv; rerun with a theory mode".into(),
        })?,
    };
    let lambda = bundle_a.lambda_min();
    let exclusion = exclusion.unwrap_or(lambda / 4.0);
    let centers = bundle_a.scene.all_centers();
    let map = compare_maps(&bundle_a.music, &map_b, &centers, exclusion)?;
    let inv_sq = |g: &ImageGrid| g.map(|v| 1.0 / (v * v));
    let residual = compare_maps(
        &inv_sq(&bundle_a.music),
        &inv_sq(&map_b),
        &centers,
        exclusion,
    )?;

    let k = bundle_a.scene.inhomogeneities().len();
    let sep = bundle_a.summary.config.peak_separation;
    let peaks_a = find_peaks(&bundle_a.music, k, sep);
    let peaks_b = find_peaks(&map_b, k, sep);
    let truths: Vec<crate::Point> = peaks_a.iter().map(|p| p.location()).collect();
    let peak_agreement = match_peaks(&peaks_b, &truths, lambda / 2.0);

    let background_median_a = background_median(&bundle_a.music, &centers, lambda / 2.0);
    let background_median_b = background_median(&map_b, &centers, lambda / 2.0);
    let background_ratio = match (background_median_a, background_median_b) {
        (Some(a), Some(b)) if a > 0.0 => Some(b / a),
        _ => None,
    };
    Ok(ComparisonReport {
        exclusion_radius: exclusion,
        map,
        residual,
        peaks_a,
        peaks_b,
        peak_agreement,
        background_median_a,
        background_median_b,
        background_ratio,
    })
}

fn selection_label(s: Selection) -> String {
    match s {
        Selection::FirstK(k) => format!("first_k-{k}"),
        Selection::Threshold(r) => format!("threshold-{r}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub directory: String,
    pub lambda: f64,
    pub n_directions: usize,
    pub selection: Selection,
    pub matched: usize,
    pub unmatched: usize,
    pub background_median: Option<f64>,
}

/// Runs every entry of the sweep in parallel, each into its own
/// subdirectory of `out_dir`, and writes an index to `sweep.json`.
pub fn sweep(config: &SweepConfig, base: &Path, out_dir: &Path) -> Result<Vec<SweepEntry>, Error> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let entries = config.entries();
    let results: Vec<Result<SweepEntry, Error>> = entries
        .par_iter()
        .map(|entry| {
            let lambda = entry.wavelengths[0];
            let name = format!(
                "lambda_{}_n_{}_{}",
                lambda_label(lambda),
                entry.n_directions,
                selection_label(entry.selection)
            );
            let output = run(entry, base, &out_dir.join(&name))?;
            Ok(SweepEntry {
                directory: name,
                lambda,
                n_directions: entry.n_directions,
                selection: entry.selection,
                matched: output.summary.peaks.matched,
                unmatched: output.summary.peaks.unmatched,
                background_median: output.summary.music.background_median,
            })
        })
        .collect();
    let index = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let text = serde_json::to_string_pretty(&index).expect("index serialization is infallible");
    write_file(&out_dir.join("sweep.json"), text)?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GridSize, SceneSource};
    use crate::geometry::Rect;

    fn small_config(scene: SceneSource) -> ExperimentConfig {
        ExperimentConfig {
            scene,
            wavelengths: vec![0.4],
            n_directions: 16,
            selection: Selection::FirstK(1),
            noise: None,
            grid: GridSize { nx: 21, ny: 21 },
            forward: ForwardModel::Asymptotic,
            theory: None,
            floor: 1e-6,
            peak_separation: 0.3,
            match_radius: None,
            outputs: PathBuf::from("out"),
        }
    }

    #[test]
    fn empty_scene_gives_flat_map() {
        let empty = Scene::empty(Rect::centered_square(1.0)).unwrap();
        let inline: serde_json::Value = serde_json::from_str(&empty.to_json()).unwrap();
        let mut config = small_config(SceneSource::Inline(inline));
        config.selection = Selection::Threshold(0.1);
        let out = execute(&config, Path::new(".")).unwrap();
        assert!(out.music.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(out.peaks.peaks.is_empty());
    }

    #[test]
    fn exit_codes() {
        let config_err = Error::Config(ConfigError::Invalid {
            field: "x",
            message: String::new(),
        });
        assert_eq!(config_err.exit_code(), 2);
        assert_eq!(
            Error::Forward(ForwardError::SingularCoupling { omega: 1.0 }).exit_code(),
            3
        );
        assert_eq!(Error::Spectral(SpectralError::SvdFailed).exit_code(), 3);
    }

    #[test]
    fn selection_labels_are_path_safe() {
        assert_eq!(selection_label(Selection::FirstK(3)), "first_k-3");
        assert_eq!(selection_label(Selection::Threshold(0.1)), "threshold-0.1");
    }
}
