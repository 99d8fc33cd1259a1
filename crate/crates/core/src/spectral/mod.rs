//! SVD of the MSR matrix, signal-subspace selection, noise-subspace
//! residuals, and measurement noise.

mod io;

pub use io::{
    decode_binary, decode_csv, encode_binary, encode_csv, read_msr, singular_values_csv, write_msr,
};

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{directions, DirectionSet};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix must be square with dimension {expected}, got {rows}x{cols}")]
    Shape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("vector length {got} does not match dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid selection {0}")]
    InvalidSelection(String),
    #[error("cannot add noise to a zero matrix")]
    ZeroMatrix,
    #[error("signal-to-noise ratio must be finite, got {0}")]
    InvalidSnr(f64),
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("malformed MSR data: {0}")]
    Format(String),
    #[error("unsupported MSR file extension {0:?} (expected .csv or .bin)")]
    Extension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Multi-static response matrix: entry `(j, l)` is the far field observed in
/// direction `-θ_j` for incidence `θ_l` at angular frequency `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrMatrix {
    entries: DMatrix<Complex64>,
    dirs: DirectionSet,
    omega: f64,
}

impl MsrMatrix {
    pub fn new(
        entries: DMatrix<Complex64>,
        dirs: DirectionSet,
        omega: f64,
    ) -> Result<Self, SpectralError> {
        let n = dirs.count();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(SpectralError::Shape {
                expected: n,
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        Ok(MsrMatrix {
            entries,
            dirs,
            omega,
        })
    }

    /// Wraps a square matrix using the uniform direction set of matching size.
    pub fn from_entries(entries: DMatrix<Complex64>, omega: f64) -> Result<Self, SpectralError> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(SpectralError::Shape {
                expected: entries.nrows(),
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let dirs = directions(entries.nrows());
        MsrMatrix::new(entries, dirs, omega)
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dirs(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.dirs.count()
    }

    pub fn scaled(&self, c: Complex64) -> MsrMatrix {
        MsrMatrix {
            entries: &self.entries * c,
            ..self.clone()
        }
    }
}

/// Rule for choosing how many leading singular vectors span the signal space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Keep every `σ_j` with `σ_j / σ_1 >= ratio`.
    Threshold(f64),
    /// Keep the `k` largest.
    FirstK(usize),
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Threshold(r) => write!(f, "threshold({r})"),
            Selection::FirstK(k) => write!(f, "first_k({k})"),
        }
    }
}

/// Full SVD `K = Σ σ_m U_m V_m*` with a chosen leading block of left vectors.
#[derive(Debug, Clone)]
pub struct SignalSubspace {
    left: DMatrix<Complex64>,
    right_adjoint: DMatrix<Complex64>,
    singular_values: Vec<f64>,
    selected: usize,
    scheme: Option<Selection>,
}

/// Singular value decomposition with singular values in descending order.
/// No vectors are selected until [`SignalSubspace::select`] is applied.
pub fn decompose(k: &MsrMatrix) -> Result<SignalSubspace, SpectralError> {
    let m = k.entries();
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let n = m.nrows();
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(SpectralError::SvdFailed)?;
    let u = svd.u.ok_or(SpectralError::SvdFailed)?;
    let v_t = svd.v_t.ok_or(SpectralError::SvdFailed)?;
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let left = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    let right_adjoint = DMatrix::from_fn(n, n, |r, c| v_t[(order[r], c)]);
    let singular_values = order.iter().map(|&i| sigma[i].max(0.0)).collect();
    Ok(SignalSubspace {
        left,
        right_adjoint,
        singular_values,
        selected: 0,
        scheme: None,
    })
}

impl SignalSubspace {
    pub fn dim(&self) -> usize {
        self.left.nrows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn selected_count(&self) -> usize {
        self.selected
    }

    pub fn scheme(&self) -> Option<Selection> {
        self.scheme
    }

    /// Left singular vector `U_m` (0-based), selected or not.
    pub fn left_vector(&self, m: usize) -> DVector<Complex64> {
        self.left.column(m).into_owned()
    }

    /// The selected vectors as columns of an `N × k` matrix.
    pub fn selected_vectors(&self) -> DMatrix<Complex64> {
        self.left.columns(0, self.selected).into_owned()
    }

    /// `Σ σ_m U_m V_m*` over all singular triplets.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let sigma = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.singular_values.iter().map(|&s| Complex64::new(s, 0.0)),
        ));
        &self.left * sigma * &self.right_adjoint
    }

    /// Number of singular values above `rel_tol · σ_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * top)
            .count()
    }

    /// Copy of this decomposition with the leading vectors chosen by `scheme`.
    /// A zero matrix under a threshold rule selects nothing.
    pub fn select(&self, scheme: Selection) -> Result<SignalSubspace, SpectralError> {
        let n = self.dim();
        let selected = match scheme {
            Selection::Threshold(ratio) => {
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(SpectralError::InvalidSelection(format!(
                        "{scheme}: ratio must lie in (0, 1)"
                    )));
                }
                let top = self.singular_values.first().copied().unwrap_or(0.0);
                if top == 0.0 {
                    0
                } else {
                    self.singular_values
                        .iter()
                        .take_while(|&&s| s / top >= ratio)
                        .count()
                }
            }
            Selection::FirstK(k) => {
                if k == 0 || k > n {
                    return Err(SpectralError::InvalidSelection(format!(
                        "{scheme}: k must lie in 1..={n}"
                    )));
                }
                k
            }
        };
        Ok(SignalSubspace {
            selected,
            scheme: Some(scheme),
            ..self.clone()
        })
    }

    /// `|P_noise f|`.
    pub fn residual_norm(&self, f: &DVector<Complex64>) -> Result<f64, SpectralError> {
        self.check_len(f.len())?;
        Ok(self.residual_norm_unchecked(f))
    }

    pub(crate) fn residual_norm_unchecked(&self, f: &DVector<Complex64>) -> f64 {
        self.project_noise_unchecked(f).norm()
    }

    /// `P_noise f = f - Σ ⟨U_m, f⟩ U_m`.
    pub fn project_noise(
        &self,
        f: &DVector<Complex64>,
    ) -> Result<DVector<Complex64>, SpectralError> {
        self.check_len(f.len())?;
        Ok(self.project_noise_unchecked(f))
    }

    pub(crate) fn project_noise_unchecked(&self, f: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = f.clone();
        for m in 0..self.selected {
            let u = self.left.column(m);
            let c = u.dotc(f);
            out.axpy(-c, &u, Complex64::new(1.0, 0.0));
        }
        out
    }

    fn check_len(&self, got: usize) -> Result<(), SpectralError> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(SpectralError::DimensionMismatch {
                expected: self.dim(),
                got,
            })
        }
    }
}

/// Adds circularly-symmetric complex Gaussian noise scaled so that
/// `‖E‖_F² = ‖K‖_F² · 10^(-snr_db/10)` exactly.
///
/// Entries of `E` are drawn row by row from a ChaCha8 stream seeded by `seed`,
/// real part before imaginary part, then rescaled as a whole.
pub fn add_noise(k: &MsrMatrix, snr_db: f64, seed: u64) -> Result<MsrMatrix, SpectralError> {
    if !snr_db.is_finite() {
        return Err(SpectralError::InvalidSnr(snr_db));
    }
    let signal = k.entries().norm_squared();
    if signal == 0.0 {
        return Err(SpectralError::ZeroMatrix);
    }
    let n = k.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            raw[(j, l)] = Complex64::new(re, im);
        }
    }
    let target = signal * 10f64.powf(-snr_db / 10.0);
    let scale = (target / raw.norm_squared()).sqrt();
    let entries = k.entries() + raw * Complex64::new(scale, 0.0);
    MsrMatrix::new(entries, k.dirs().clone(), k.omega())
}
