//! Far-field data: the small-volume asymptotic model and a Foldy-Lax
//! multiple-scattering solver for point scatterers.
//!
//! Both emit the same normalization: the far-field pattern with the common
//! prefactor `ω²(1+i)/(4√(ωπ))` removed. Observation directions are
//! `ϑ_j = -θ_j`, so entry `(j, l)` of an MSR matrix is `u_far(-θ_j, θ_l)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Point;
use crate::numerics::{bessel_j0, bessel_y0, DirectionSet};
use crate::scene::{Scatterer, Scene};
use crate::spectral::MsrMatrix;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("Foldy-Lax coupling matrix is singular at omega = {omega}")]
    SingularCoupling { omega: f64 },
    #[error("Foldy-Lax solver supports dielectric contrast only; scatterer at {0:?} has permeability contrast")]
    MagneticContrast(Point),
    #[error("Foldy-Lax solver requires unit background wave speed (eps0 * mu0 = 1), got {0}")]
    BackgroundSpeed(f64),
    #[error("angular frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
}

/// `e^{iωθ·x}`.
pub fn incident_field(x: Point, theta: Point, omega: f64) -> Complex64 {
    Complex64::from_polar(1.0, omega * theta.dot(x))
}

/// The common far-field prefactor `ω²(1+i)/(4√(ωπ))`.
pub fn far_field_constant(omega: f64) -> Complex64 {
    Complex64::new(1.0, 1.0) * (omega * omega / (4.0 * (omega * PI).sqrt()))
}

/// Weight of one scatterer in the asymptotic expansion for the pair `(obs, inc)`.
///
/// The dipole term `μ0/(μ+μ0) (√2ϑ)·(√2θ)` is present only for scatterers
/// whose permeability differs from the background.
fn asymptotic_weight(
    s: &Scatterer,
    background_eps: f64,
    background_mu: f64,
    obs: Point,
    inc: Point,
) -> f64 {
    let speed = (background_eps * background_mu).sqrt();
    let dielectric = (s.medium.permittivity - background_eps) * PI / speed;
    let magnetic = if s.medium.permeability != background_mu {
        background_mu / (s.medium.permeability + background_mu) * 2.0 * obs.dot(inc)
    } else {
        0.0
    };
    s.radius * s.radius * (dielectric - magnetic)
}

/// First-order asymptotic far-field pattern `u_far(obs, inc)`.
///
/// With `include_constant` unset the prefactor `ω²(1+i)/(4√(ωπ))` is left out,
/// matching the MSR convention used everywhere downstream.
pub fn asymptotic_far_field(
    scene: &Scene,
    obs: Point,
    inc: Point,
    omega: f64,
    include_constant: bool,
) -> Complex64 {
    let bg = scene.background();
    let sum: Complex64 = scene
        .scatterers()
        .map(|s| {
            let w = asymptotic_weight(s, bg.permittivity, bg.permeability, obs, inc);
            Complex64::from_polar(w, omega * (inc - obs).dot(s.center))
        })
        .sum();
    if include_constant {
        sum * far_field_constant(omega)
    } else {
        sum
    }
}

/// MSR matrix of the asymptotic model.
pub fn asymptotic_msr(scene: &Scene, dirs: &DirectionSet, omega: f64) -> MsrMatrix {
    let n = dirs.count();
    let theta = dirs.vectors();
    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            (0..n)
                .map(|j| asymptotic_far_field(scene, -theta[j], theta[l], omega, false))
                .collect()
        })
        .collect();
    let entries = DMatrix::from_fn(n, n, |j, l| columns[l][j]);
    MsrMatrix::new(entries, dirs.clone(), omega).expect("square by construction")
}

/// Outgoing 2D Green function `(i/4) H0⁽¹⁾(ω r)` for `r > 0`.
pub fn green_function(r: f64, omega: f64) -> Complex64 {
    let t = omega * r;
    let y0 = bessel_y0(t).expect("distinct scatterers have positive separation");
    Complex64::new(0.0, 0.25) * Complex64::new(bessel_j0(t), y0)
}

/// MSR matrix from the Foldy-Lax model of point scatterers.
///
/// Each scatterer `p` has coupling `τ_p = ω²(ε_p - ε0)π r_p²`. For incidence
/// `θ_l` the exciting fields solve
/// `ψ_p - Σ_{q≠p} τ_q G(c_p, c_q) ψ_q = e^{iωθ_l·c_p}`, and the entry is
/// `Σ_p (ε_p - ε0)π r_p² e^{iωθ_j·c_p} ψ_p`, the far field divided by the
/// common prefactor. With one scatterer this is exactly the asymptotic value.
///
/// The coupling matrix is factorized once; columns are solved in parallel.
pub fn foldy_lax_msr(
    scene: &Scene,
    dirs: &DirectionSet,
    omega: f64,
) -> Result<MsrMatrix, ForwardError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(ForwardError::InvalidFrequency(omega));
    }
    let bg = scene.background();
    let speed_sq = bg.permittivity * bg.permeability;
    if (speed_sq - 1.0).abs() > 1e-12 {
        return Err(ForwardError::BackgroundSpeed(speed_sq));
    }
    if let Some(s) = scene
        .scatterers()
        .find(|s| s.medium.permeability != bg.permeability)
    {
        return Err(ForwardError::MagneticContrast(s.center));
    }

    let n = dirs.count();
    let theta = dirs.vectors();
    let scatterers: Vec<&Scatterer> = scene.scatterers().collect();
    let count = scatterers.len();
    if count == 0 {
        return Ok(MsrMatrix::new(DMatrix::zeros(n, n), dirs.clone(), omega).expect("square"));
    }

    let strength: Vec<f64> = scatterers
        .iter()
        .map(|s| (s.medium.permittivity - bg.permittivity) * s.area())
        .collect();
    let coupling: Vec<f64> = strength.iter().map(|a| omega * omega * a).collect();

    let system = DMatrix::from_fn(count, count, |p, q| {
        if p == q {
            Complex64::new(1.0, 0.0)
        } else {
            let r = scatterers[p].center.distance(scatterers[q].center);
            -coupling[q] * green_function(r, omega)
        }
    });
    let lu = system.lu();
    if !lu.is_invertible() {
        return Err(ForwardError::SingularCoupling { omega });
    }

    // phases[p][j] = e^{iωθ_j·c_p}; serves both as incident field and as
    // the far-field phase for observation -θ_j.
    let phases: Vec<Vec<Complex64>> = scatterers
        .iter()
        .map(|s| {
            theta
                .iter()
                .map(|&t| incident_field(s.center, t, omega))
                .collect()
        })
        .collect();

    let columns: Vec<Option<Vec<Complex64>>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let rhs = DVector::from_fn(count, |p, _| phases[p][l]);
            let psi = lu.solve(&rhs)?;
            if psi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return None;
            }
            Some(
                (0..n)
                    .map(|j| {
                        (0..count)
                            .map(|p| strength[p] * phases[p][j] * psi[p])
                            .sum()
                    })
                    .collect(),
            )
        })
        .collect();

    let mut entries = DMatrix::zeros(n, n);
    for (l, column) in columns.into_iter().enumerate() {
        let column = column.ok_or(ForwardError::SingularCoupling { omega })?;
        for (j, v) in column.into_iter().enumerate() {
            entries[(j, l)] = v;
        }
    }
    Ok(MsrMatrix::new(entries, dirs.clone(), omega).expect("square"))
}
