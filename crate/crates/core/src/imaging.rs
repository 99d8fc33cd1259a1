//! MUSIC imaging maps, the closed-form Bessel predictor, and map comparison.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Rect};
use crate::numerics::{bessel_j0, bessel_j1, DirectionSet};
use crate::scene::Scene;
use crate::spectral::{Selection, SignalSubspace};

/// Default lower clamp for residual norms before taking reciprocals.
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("grids differ: {0}")]
    GridMismatch(String),
    #[error("no grid points remain after excluding neighbourhoods of the scatterers")]
    EmptyMask,
    #[error("{subspaces} subspaces for {omegas} frequencies")]
    LengthMismatch { subspaces: usize, omegas: usize },
    #[error("subspace dimension {got} does not match {expected} directions")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("at least one frequency is required")]
    NoFrequencies,
    #[error("malformed map data: {0}")]
    Format(String),
}

/// Regular `nx × ny` lattice over `domain`, corners included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    /// 101 × 101 over `[-1, 1]²`, step 0.02.
    fn default() -> Self {
        GridSpec {
            domain: Rect::centered_square(1.0),
            nx: 101,
            ny: 101,
        }
    }
}

impl GridSpec {
    pub fn new(domain: Rect, nx: usize, ny: usize) -> Self {
        GridSpec { domain, nx, ny }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step_x(&self) -> f64 {
        if self.nx > 1 {
            self.domain.width() / (self.nx - 1) as f64
        } else {
            0.0
        }
    }

    pub fn step_y(&self) -> f64 {
        if self.ny > 1 {
            self.domain.height() / (self.ny - 1) as f64
        } else {
            0.0
        }
    }

    /// Length of one cell diagonal.
    pub fn cell_diagonal(&self) -> f64 {
        self.step_x().hypot(self.step_y())
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.domain.min.x + i as f64 * self.step_x(),
            self.domain.min.y + j as f64 * self.step_y(),
        )
    }

    /// Point for flat index `j * nx + i`.
    pub fn point_at(&self, index: usize) -> Point {
        self.point(index % self.nx, index / self.nx)
    }
}

/// Provenance of a map.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImageMeta {
    pub kind: String,
    pub omegas: Vec<f64>,
    pub selection: Option<Selection>,
}

/// Real values on a [`GridSpec`], stored row-major: index `j * nx + i` with
/// `i` along x and `j` along y.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    spec: GridSpec,
    values: Vec<f64>,
    meta: ImageMeta,
}

impl ImageGrid {
    pub fn from_values(
        spec: GridSpec,
        values: Vec<f64>,
        meta: ImageMeta,
    ) -> Result<Self, ImagingError> {
        if values.len() != spec.len() {
            return Err(ImagingError::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        Ok(ImageGrid { spec, values, meta })
    }

    /// Evaluates `f` at every grid point in parallel.
    pub fn evaluate<F>(spec: GridSpec, meta: ImageMeta, f: F) -> ImageGrid
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let values = (0..spec.len())
            .into_par_iter()
            .map(|idx| f(spec.point_at(idx)))
            .collect();
        ImageGrid { spec, values, meta }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &ImageMeta {
        &self.meta
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    /// Applies `f` pointwise, keeping grid and provenance.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        ImageGrid {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Location and value of the largest entry (first on ties).
    pub fn argmax(&self) -> Option<(Point, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, v)| (self.spec.point_at(i), v))
    }

    /// `x,y,value` rows in storage order.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(40 * self.values.len());
        out.push_str("x,y,value\n");
        for (idx, v) in self.values.iter().enumerate() {
            let p = self.spec.point_at(idx);
            out.push_str(&format!("{:?},{:?},{:?}\n", p.x, p.y, v));
        }
        out
    }

    /// Parses the output of [`ImageGrid::to_csv`], recovering the lattice from
    /// the coordinates.
    pub fn from_csv(text: &str) -> Result<ImageGrid, ImagingError> {
        let fail = |m: String| ImagingError::Format(m);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| fail(e.to_string()))?;
        if headers != vec!["x", "y", "value"] {
            return Err(fail(format!("expected header x,y,value, got {headers:?}")));
        }
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| fail(e.to_string()))?;
            if record.len() != 3 {
                return Err(fail(format!("row {}: expected 3 fields", line + 2)));
            }
            let mut parsed = [0.0; 3];
            for (k, slot) in parsed.iter_mut().enumerate() {
                let v: f64 = record[k]
                    .trim()
                    .parse()
                    .map_err(|e| fail(format!("row {}: {e}", line + 2)))?;
                if !v.is_finite() {
                    return Err(fail(format!("row {}: non-finite value", line + 2)));
                }
                *slot = v;
            }
            rows.push((parsed[0], parsed[1], parsed[2]));
        }
        if rows.is_empty() {
            return Err(fail("no rows".into()));
        }
        let y0 = rows[0].1;
        let nx = rows.iter().take_while(|r| r.1 == y0).count();
        if !rows.len().is_multiple_of(nx) {
            return Err(fail(format!(
                "{} rows do not fill rows of length {nx}",
                rows.len()
            )));
        }
        let ny = rows.len() / nx;
        let first = rows[0];
        let last = rows[rows.len() - 1];
        let domain = Rect::new(Point::new(first.0, first.1), Point::new(last.0, last.1));
        let degenerate_ok = |lo: f64, hi: f64, n: usize| if n == 1 { lo == hi } else { hi > lo };
        if !degenerate_ok(domain.min.x, domain.max.x, nx)
            || !degenerate_ok(domain.min.y, domain.max.y, ny)
        {
            return Err(fail("coordinates do not span an increasing lattice".into()));
        }
        if !(domain.width().is_finite() && domain.height().is_finite()) {
            return Err(fail("coordinate span overflows".into()));
        }
        let spec = GridSpec::new(domain, nx, ny);
        let tol = 1e-9 * (domain.width().abs() + domain.height().abs() + 1.0);
        for (idx, r) in rows.iter().enumerate() {
            let p = spec.point_at(idx);
            if (p.x - r.0).abs() > tol || (p.y - r.1).abs() > tol {
                return Err(fail(format!(
                    "row {}: point ({}, {}) is off the lattice",
                    idx + 2,
                    r.0,
                    r.1
                )));
            }
        }
        let meta = ImageMeta {
            kind: "csv".into(),
            ..ImageMeta::default()
        };
        Ok(ImageGrid {
            spec,
            values: rows.into_iter().map(|r| r.2).collect(),
            meta,
        })
    }

    /// Binary PGM (P5) with `bits` = 8 or 16 per pixel. Values in `[0, max]`
    /// map linearly onto `[0, maxval]`; negatives clamp to 0. The top image
    /// row is the largest y.
    pub fn to_pgm(&self, bits: u8) -> (Vec<u8>, PgmScale) {
        let maxval: u32 = if bits == 16 { 65535 } else { 255 };
        let max = self.values.iter().copied().fold(0.0f64, f64::max);
        let scale = PgmScale {
            width: self.spec.nx,
            height: self.spec.ny,
            maxval,
            value_min: 0.0,
            value_max: max,
        };
        let mut out = format!("P5\n{} {}\n{}\n", self.spec.nx, self.spec.ny, maxval).into_bytes();
        for j in (0..self.spec.ny).rev() {
            for i in 0..self.spec.nx {
                let v = self.value(i, j).max(0.0);
                let level = if max > 0.0 {
                    (v / max * maxval as f64).round().min(maxval as f64) as u32
                } else {
                    0
                };
                if bits == 16 {
                    out.extend_from_slice(&(level as u16).to_be_bytes());
                } else {
                    out.push(level as u8);
                }
            }
        }
        (out, scale)
    }
}

/// Sidecar record of a PGM's normalization: `value = pixel / maxval * value_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmScale {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub value_min: f64,
    pub value_max: f64,
}

/// `f(x) = [e^{iωθ_n·x}]_n / √N`, a unit vector.
pub fn test_vector(x: Point, dirs: &DirectionSet, omega: f64) -> DVector<Complex64> {
    let scale = 1.0 / (dirs.count() as f64).sqrt();
    DVector::from_iterator(
        dirs.count(),
        dirs.iter()
            .map(|t| Complex64::from_polar(scale, omega * t.dot(x))),
    )
}

/// `F(x) = 1 / max(|P_noise f(x)|, floor)` over the grid.
pub fn music_map(
    sub: &SignalSubspace,
    dirs: &DirectionSet,
    omega: f64,
    grid: GridSpec,
    floor: f64,
) -> ImageGrid {
    assert_eq!(
        sub.dim(),
        dirs.count(),
        "subspace and direction set disagree"
    );
    let meta = ImageMeta {
        kind: "music".into(),
        omegas: vec![omega],
        selection: sub.scheme(),
    };
    ImageGrid::evaluate(grid, meta, |x| {
        let f = test_vector(x, dirs, omega);
        1.0 / sub.residual_norm_unchecked(&f).max(floor)
    })
}

/// Which scatterers enter the closed-form predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryMode {
    /// Targets and random scatterers.
    Full,
    /// Targets only, as if their singular values could be isolated.
    TargetsOnly,
}

/// Predicted `|P_noise f(x)|²`:
/// `1 - Σ_c [J0(ω|x-c|)² + Σ_{h=1,2} ((x-c)·e_h/|x-c|)² J1(ω|x-c|)²]`
/// over the scatterer centers `c` selected by `mode`. The direction factor
/// is taken as zero at `x = c`.
pub fn theoretical_residual_sq(scene: &Scene, x: Point, omega: f64, mode: TheoryMode) -> f64 {
    let centers: Box<dyn Iterator<Item = Point>> = match mode {
        TheoryMode::Full => Box::new(scene.scatterers().map(|s| s.center)),
        TheoryMode::TargetsOnly => Box::new(scene.inhomogeneities().iter().map(|s| s.center)),
    };
    let mut value = 1.0;
    for c in centers {
        let d = x - c;
        let r = d.norm();
        let t = omega * r;
        let j0 = bessel_j0(t);
        let directional = if r > 0.0 {
            let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
            e.iter().map(|eh| (d.dot(*eh) / r).powi(2)).sum::<f64>()
        } else {
            0.0
        };
        value -= j0 * j0 + directional * bessel_j1(t).powi(2);
    }
    value
}

/// Closed-form predictor of the MUSIC map: the reciprocal square root of
/// [`theoretical_residual_sq`], clamped below at `floor²`.
pub fn theoretical_map(
    scene: &Scene,
    grid: GridSpec,
    omega: f64,
    mode: TheoryMode,
    floor: f64,
) -> ImageGrid {
    let meta = ImageMeta {
        kind: match mode {
            TheoryMode::Full => "theory_full",
            TheoryMode::TargetsOnly => "theory_targets_only",
        }
        .into(),
        omegas: vec![omega],
        selection: None,
    };
    ImageGrid::evaluate(grid, meta, |x| {
        1.0 / theoretical_residual_sq(scene, x, omega, mode)
            .max(floor * floor)
            .sqrt()
    })
}

/// `Q(x) = 1 / max(|(1/F) Σ_f P_noise(f(x; ω_f))|, floor)`: the projected
/// complex vectors are averaged before the norm is taken.
pub fn multifreq_map(
    subs: &[SignalSubspace],
    dirs: &DirectionSet,
    omegas: &[f64],
    grid: GridSpec,
    floor: f64,
) -> Result<ImageGrid, ImagingError> {
    if subs.len() != omegas.len() {
        return Err(ImagingError::LengthMismatch {
            subspaces: subs.len(),
            omegas: omegas.len(),
        });
    }
    if subs.is_empty() {
        return Err(ImagingError::NoFrequencies);
    }
    if let Some(bad) = subs.iter().find(|s| s.dim() != dirs.count()) {
        return Err(ImagingError::DimensionMismatch {
            expected: dirs.count(),
            got: bad.dim(),
        });
    }
    let meta = ImageMeta {
        kind: "multifreq".into(),
        omegas: omegas.to_vec(),
        selection: subs[0].scheme(),
    };
    let count = omegas.len() as f64;
    Ok(ImageGrid::evaluate(grid, meta, |x| {
        let mut acc = DVector::<Complex64>::zeros(dirs.count());
        for (sub, &omega) in subs.iter().zip(omegas) {
            acc += sub.project_noise_unchecked(&test_vector(x, dirs, omega));
        }
        let norm = acc.norm() / count;
        1.0 / norm.max(floor)
    }))
}

/// Agreement between two maps on the points farther than `exclusion_radius`
/// from every center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapComparison {
    /// `‖a - b‖ / ‖b‖`.
    pub rel_l2: f64,
    /// Pearson correlation.
    pub correlation: f64,
    pub points: usize,
}

pub fn compare_maps(
    a: &ImageGrid,
    b: &ImageGrid,
    centers: &[Point],
    exclusion_radius: f64,
) -> Result<MapComparison, ImagingError> {
    if a.spec != b.spec {
        return Err(ImagingError::GridMismatch(format!(
            "{:?} vs {:?}",
            a.spec, b.spec
        )));
    }
    let pairs: Vec<(f64, f64)> = (0..a.values.len())
        .filter(|&idx| {
            let p = a.spec.point_at(idx);
            centers.iter().all(|c| p.distance(*c) > exclusion_radius)
        })
        .map(|idx| (a.values[idx], b.values[idx]))
        .collect();
    if pairs.is_empty() {
        return Err(ImagingError::EmptyMask);
    }
    let n = pairs.len() as f64;
    let diff: f64 = pairs
        .iter()
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let reference: f64 = pairs.iter().map(|(_, y)| y * y).sum::<f64>().sqrt();
    let rel_l2 = if reference > 0.0 {
        diff / reference
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        cov += (x - mean_a) * (y - mean_b);
        var_a += (x - mean_a).powi(2);
        var_b += (y - mean_b).powi(2);
    }
    let correlation = if var_a > 0.0 && var_b > 0.0 {
        cov / (var_a * var_b).sqrt()
    } else if diff == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(MapComparison {
        rel_l2,
        correlation,
        points: pairs.len(),
    })
}

/// Angular frequency of wavelength `lambda`.
pub fn omega_of(lambda: f64) -> f64 {
    2.0 * PI / lambda
}
