//! Special functions, incident direction sets, and the circle quadrature
//! identities relating discrete direction sums to Bessel functions.

mod bessel;

pub use bessel::{bessel_j0, bessel_j1, bessel_y0};

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("{function} is undefined at argument {argument}")]
    Domain {
        function: &'static str,
        argument: f64,
    },
}

/// `N` uniformly spaced unit vectors on the circle,
/// `θ_j = -[cos(2π(j-1)/N), sin(2π(j-1)/N)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    vectors: Vec<Point>,
}

impl DirectionSet {
    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Point] {
        &self.vectors
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Point> + '_ {
        self.vectors.iter().copied()
    }
}

/// Builds the uniform direction set of size `n`.
///
/// # Panics
/// Panics if `n == 0`.
pub fn directions(n: usize) -> DirectionSet {
    assert!(n >= 1, "direction count must be positive");
    let vectors = (0..n)
        .map(|j| {
            let angle = 2.0 * PI * j as f64 / n as f64;
            let (s, c) = angle.sin_cos();
            Point::new(-c, -s)
        })
        .collect();
    DirectionSet { vectors }
}

/// Deviations of the discrete direction averages from their Bessel limits:
///
/// * `r0 = |(1/N) Σ e^{iωθ_n·x} - J0(ω|x|)|`
/// * `r1 = |(1/N) Σ (ξ·θ_n) e^{iωθ_n·x} - i (x̂·ξ) J1(ω|x|)|`
///
/// The reference term of `r1` is zero at `x = 0`.
pub fn plane_wave_average_residuals(
    dirs: &DirectionSet,
    omega: f64,
    x: Point,
    xi: Point,
) -> (f64, f64) {
    let n = dirs.count() as f64;
    let mut plain = Complex64::new(0.0, 0.0);
    let mut weighted = Complex64::new(0.0, 0.0);
    for theta in dirs.iter() {
        let phase = Complex64::from_polar(1.0, omega * theta.dot(x));
        plain += phase;
        weighted += phase * xi.dot(theta);
    }
    plain /= n;
    weighted /= n;

    let r = x.norm();
    let r0 = (plain - bessel_j0(omega * r)).norm();
    let reference = match x.normalized() {
        Some(unit) => Complex64::new(0.0, unit.dot(xi) * bessel_j1(omega * r)),
        None => Complex64::new(0.0, 0.0),
    };
    let r1 = (weighted - reference).norm();
    (r0, r1)
}

/// `(1/N) Σ (θ_n·ξ)²`, which equals 1/2 for every unit ξ once `N >= 3`.
pub fn dipole_quadrature(dirs: &DirectionSet, xi: Point) -> f64 {
    dirs.iter().map(|t| t.dot(xi).powi(2)).sum::<f64>() / dirs.count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_directions_are_axis_aligned() {
        let d = directions(4);
        let want = [
            Point::new(-1.0, 0.0),
            Point::new(0.0, -1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        for (got, want) in d.iter().zip(want) {
            assert!((got - want).norm() < 1e-15);
        }
    }

    #[test]
    fn directions_are_unit_and_sum_to_zero() {
        for n in [1usize, 2, 3, 5, 32, 257] {
            let d = directions(n);
            assert_eq!(d.count(), n);
            for t in d.iter() {
                assert!((t.norm() - 1.0).abs() < 1e-12);
            }
            if n > 1 {
                let sum = d.iter().fold(Point::ORIGIN, |acc, t| acc + t);
                assert!(sum.norm() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn consecutive_spacing_is_uniform() {
        let d = directions(32);
        let step = 2.0 * PI / 32.0;
        for w in d.vectors().windows(2) {
            let angle = w[0].dot(w[1]).clamp(-1.0, 1.0).acos();
            assert!((angle - step).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_vanish_at_origin() {
        let d = directions(7);
        let (r0, r1) = plane_wave_average_residuals(&d, 3.0, Point::ORIGIN, Point::new(1.0, 0.0));
        assert!(r0 < 1e-12);
        assert!(r1 < 1e-12);
    }

    #[test]
    fn undersampled_sum_misses_j0() {
        let d = directions(5);
        let (r0, _) = plane_wave_average_residuals(
            &d,
            2.0 * PI / 0.4,
            Point::new(0.5, 0.5),
            Point::new(1.0, 0.0),
        );
        assert!(r0 > 1e-2, "r0 = {r0}");
    }

    #[test]
    fn dipole_quadrature_small_cases() {
        assert_eq!(dipole_quadrature(&directions(4), Point::new(1.0, 0.0)), 0.5);
        assert!((dipole_quadrature(&directions(1), Point::new(1.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((dipole_quadrature(&directions(32), Point::new(0.6, 0.8)) - 0.5).abs() < 1e-12);
    }
}
