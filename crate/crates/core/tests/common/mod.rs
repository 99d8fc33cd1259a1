//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use music_imaging::numerics::DirectionSet;
use music_imaging::spectral::SignalSubspace;
use music_imaging::{Complex64, Point};
use nalgebra::{DMatrix, DVector};

fn simpson(a: f64, fa: Complex64, b: f64, fb: Complex64, fm: Complex64) -> Complex64 {
    (fa + fm * 4.0 + fb) * ((b - a) / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    fa: Complex64,
    b: f64,
    fb: Complex64,
    m: f64,
    fm: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive_step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of a complex integrand on `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    let f: &dyn Fn(f64) -> Complex64 = &f;
    // split first so the initial estimate sees the oscillation
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = lo + h;
            let mid = 0.5 * (lo + hi);
            let (flo, fhi, fmid) = (f(lo), f(hi), f(mid));
            let whole = simpson(lo, flo, hi, fhi, fmid);
            adaptive_step(
                f,
                lo,
                flo,
                hi,
                fhi,
                mid,
                fmid,
                whole,
                tol / pieces as f64,
                40,
            )
        })
        .sum()
}

/// `(1/2π) ∮ e^{iωθ·x} dθ` by quadrature to absolute tolerance `tol`.
pub fn circle_average(omega: f64, x: Point, tol: f64) -> Complex64 {
    adaptive_simpson(
        |phi| Complex64::from_polar(1.0, omega * (phi.cos() * x.x + phi.sin() * x.y)),
        0.0,
        2.0 * PI,
        tol,
    ) / (2.0 * PI)
}

/// `(1/2π) ∮ (ξ·θ) e^{iωθ·x} dθ` by quadrature to absolute tolerance `tol`.
pub fn weighted_circle_average(omega: f64, x: Point, xi: Point, tol: f64) -> Complex64 {
    adaptive_simpson(
        |phi| {
            let (s, c) = phi.sin_cos();
            Complex64::from_polar(1.0, omega * (c * x.x + s * x.y)) * (xi.x * c + xi.y * s)
        },
        0.0,
        2.0 * PI,
        tol,
    ) / (2.0 * PI)
}

/// Both circle averages at tolerance `1e-14`.
pub fn circle_averages(omega: f64, x: Point, xi: Point) -> (Complex64, Complex64) {
    (
        circle_average(omega, x, 1e-14),
        weighted_circle_average(omega, x, xi, 1e-14),
    )
}

/// Discrete direction averages matching [`circle_averages`].
pub fn direction_averages(
    dirs: &DirectionSet,
    omega: f64,
    x: Point,
    xi: Point,
) -> (Complex64, Complex64) {
    let n = dirs.count() as f64;
    let mut plain = Complex64::new(0.0, 0.0);
    let mut weighted = Complex64::new(0.0, 0.0);
    for t in dirs.iter() {
        let e = Complex64::from_polar(1.0, omega * t.dot(x));
        plain += e;
        weighted += e * t.dot(xi);
    }
    (plain / n, weighted / n)
}

/// `‖(I - U U*) f‖` with the projector formed densely.
pub fn dense_residual(u: &DMatrix<Complex64>, f: &DVector<Complex64>) -> f64 {
    let n = f.len();
    let projector = DMatrix::<Complex64>::identity(n, n) - u * u.adjoint();
    (projector * f).norm()
}

/// Orthogonal projector onto the selected left singular vectors.
pub fn signal_projector(sub: &SignalSubspace) -> DMatrix<Complex64> {
    let u = sub.selected_vectors();
    &u * u.adjoint()
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va * vb).sqrt()
}
