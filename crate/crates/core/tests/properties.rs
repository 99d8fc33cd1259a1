mod common;

use std::f64::consts::PI;

use music_imaging::analysis::{find_peaks, match_peaks, Peak};
use music_imaging::forward::{asymptotic_msr, foldy_lax_msr};
use music_imaging::geometry::Rect;
use music_imaging::imaging::{
    music_map, omega_of, test_vector, GridSpec, ImageGrid, ImageMeta, DEFAULT_FLOOR,
};
use music_imaging::numerics::{
    bessel_j0, bessel_j1, dipole_quadrature, directions, plane_wave_average_residuals,
};
use music_imaging::scene::{generate_randoms, Medium, RandomField, Scatterer, Scene};
use music_imaging::spectral::{decompose, MsrMatrix, Selection};
use music_imaging::{Complex64, Point};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn square(n: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec(complex(), n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

fn sized_square() -> impl Strategy<Value = DMatrix<Complex64>> {
    (2usize..12).prop_flat_map(square)
}

fn unit_vector(n: usize) -> impl Strategy<Value = DVector<Complex64>> {
    prop::collection::vec(complex(), n)
        .prop_filter("nonzero", |v| v.iter().any(|c| c.norm() > 1e-3))
        .prop_map(|v| {
            let f = DVector::from_vec(v);
            let norm = f.norm();
            f / Complex64::new(norm, 0.0)
        })
}

/// Disjoint dielectric disks inside `[-1, 1]²`.
fn scene_strategy(max_count: usize) -> impl Strategy<Value = Scene> {
    (any::<u64>(), 1..=max_count, 0.01..0.05f64, 1.1..3.0f64).prop_map(
        |(seed, count, radius, eps_hi)| {
            let field = RandomField {
                count,
                domain: Rect::centered_square(1.0),
                radius,
                eps_range: [1.05, eps_hi],
            };
            let placed = generate_randoms(seed, &field, &[]).expect("sparse field fits");
            let (targets, randoms) = placed.split_at(count.div_ceil(2));
            Scene::new(
                Medium::VACUUM,
                targets.to_vec(),
                randoms.to_vec(),
                field.domain,
            )
            .expect("disjoint by construction")
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn left_vectors_are_orthonormal(m in sized_square()) {
        let sub = decompose(&MsrMatrix::from_entries(m, 1.0).unwrap()).unwrap();
        let n = sub.dim();
        let u = sub.select(Selection::FirstK(n)).unwrap().selected_vectors();
        let gram = u.adjoint() * &u;
        prop_assert!((gram - DMatrix::<Complex64>::identity(n, n)).norm() < 1e-10);
        let s = sub.singular_values();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn decomposition_reconstructs_matrix(m in sized_square()) {
        let sub = decompose(&MsrMatrix::from_entries(m.clone(), 1.0).unwrap()).unwrap();
        prop_assert!((sub.reconstruct() - &m).norm() <= 1e-10 * m.norm().max(1.0));
    }

    #[test]
    fn residual_matches_dense_projector(m in square(8), f in unit_vector(8), k in 1usize..=8) {
        let sub = decompose(&MsrMatrix::from_entries(m, 1.0).unwrap()).unwrap().select(Selection::FirstK(k)).unwrap();
        let got = sub.residual_norm(&f).unwrap();
        let want = common::dense_residual(&sub.selected_vectors(), &f);
        prop_assert!((got - want).abs() < 1e-10);
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&got));
    }

    #[test]
    fn noise_projection_is_idempotent_and_orthogonal(m in square(6), f in unit_vector(6), k in 1usize..=6) {
        let sub = decompose(&MsrMatrix::from_entries(m, 1.0).unwrap()).unwrap().select(Selection::FirstK(k)).unwrap();
        let p = sub.project_noise(&f).unwrap();
        let pp = sub.project_noise(&p).unwrap();
        prop_assert!((&pp - &p).norm() < 1e-12);
        let u = sub.selected_vectors();
        prop_assert!((u.adjoint() * &p).norm() < 1e-12);
    }

    #[test]
    fn selected_span_is_scale_invariant(m in square(8), re in -3.0..3.0f64, im in -3.0..3.0f64, k in 1usize..8) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-2);
        let k0 = MsrMatrix::from_entries(m, 1.0).unwrap();
        let a = decompose(&k0).unwrap();
        let s = a.singular_values();
        // a well-separated cut is needed for the subspace to be determined
        prop_assume!(s[k - 1] - s[k] > 1e-3 * s[0]);
        let a = a.select(Selection::FirstK(k)).unwrap();
        let b = decompose(&k0.scaled(c)).unwrap().select(Selection::FirstK(k)).unwrap();
        let gap = (common::signal_projector(&a) - common::signal_projector(&b)).norm();
        prop_assert!(gap < 1e-8, "projector gap {gap}");
    }

    #[test]
    fn threshold_counts_ties_as_selected(values in prop::collection::vec(0.0..1.0f64, 2..8)) {
        let mut s = values;
        s.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(s[0] > 0.0);
        let m = DMatrix::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|&v| Complex64::new(v, 0.0))));
        let sub = decompose(&MsrMatrix::from_entries(m, 1.0).unwrap()).unwrap();
        let sigma = sub.singular_values().to_vec();
        let ratio = sigma[sigma.len() / 2] / sigma[0];
        prop_assume!(ratio > 0.0 && ratio < 1.0);
        let chosen = sub.select(Selection::Threshold(ratio)).unwrap().selected_count();
        prop_assert_eq!(chosen, sigma.iter().filter(|&&v| v / sigma[0] >= ratio).count());
    }

    #[test]
    fn asymptotic_msr_is_symmetric(scene in scene_strategy(6), lambda in 0.2..1.0f64) {
        let k = asymptotic_msr(&scene, &directions(16), omega_of(lambda));
        let e = k.entries();
        prop_assert!((e - e.transpose()).norm() <= 1e-10 * e.norm().max(1e-300));
    }

    #[test]
    fn foldy_lax_msr_is_symmetric(scene in scene_strategy(6), lambda in 0.2..1.0f64) {
        let k = foldy_lax_msr(&scene, &directions(16), omega_of(lambda)).unwrap();
        let e = k.entries();
        prop_assert!((e - e.transpose()).norm() <= 1e-10 * e.norm().max(1e-300));
    }

    #[test]
    fn asymptotic_msr_is_additive_over_scatterers(scene in scene_strategy(6), lambda in 0.2..1.0f64) {
        let dirs = directions(12);
        let omega = omega_of(lambda);
        let whole = asymptotic_msr(&scene, &dirs, omega);
        let mut sum = DMatrix::<Complex64>::zeros(12, 12);
        for s in scene.scatterers() {
            let single = Scene::new(scene.background(), vec![*s], vec![], scene.domain()).unwrap();
            sum += asymptotic_msr(&single, &dirs, omega).entries();
        }
        prop_assert!((whole.entries() - sum).norm() <= 1e-12 * whole.entries().norm().max(1.0));
    }

    #[test]
    fn foldy_lax_approaches_born_linearly(scene in scene_strategy(5), lambda in 0.3..1.0f64) {
        prop_assume!(scene.len() >= 2);
        let dirs = directions(12);
        let omega = omega_of(lambda);
        let diff = |delta: f64| {
            let s = scene.with_scaled_contrast(delta).unwrap();
            let a = asymptotic_msr(&s, &dirs, omega);
            let f = foldy_lax_msr(&s, &dirs, omega).unwrap();
            (f.entries() - a.entries()).norm() / a.entries().norm()
        };
        let (d1, d2) = (diff(1e-3), diff(5e-4));
        prop_assume!(d1 > 1e-12);
        let ratio = d1 / d2;
        prop_assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "ratio {ratio}");
    }

    #[test]
    fn dipole_quadrature_is_one_half(n in 3usize..200, angle in 0.0..(2.0 * PI)) {
        let xi = Point::new(angle.cos(), angle.sin());
        prop_assert!((dipole_quadrature(&directions(n), xi) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn generated_fields_are_disjoint_and_inside(seed in any::<u64>(), count in 1usize..60, radius in 0.01..0.05f64) {
        let domain = Rect::centered_square(1.0);
        let blocker = Scatterer::inhomogeneity(Point::new(0.25, 0.0), 0.1, Medium::dielectric(3.0).unwrap()).unwrap();
        let field = RandomField { count, domain, radius, eps_range: [1.0, 2.0] };
        let placed = generate_randoms(seed, &field, &[blocker]).unwrap();
        prop_assert_eq!(placed.len(), count);
        for (i, a) in placed.iter().enumerate() {
            prop_assert!(domain.contains_strictly(a.center));
            prop_assert!(!a.overlaps(&blocker));
            prop_assert!((1.0..=2.0).contains(&a.medium.permittivity));
            for b in &placed[i + 1..] {
                prop_assert!(!a.overlaps(b));
            }
        }
        prop_assert_eq!(generate_randoms(seed, &field, &[blocker]).unwrap(), placed);
    }

    #[test]
    fn matching_ignores_input_order(
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8),
        truths in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8),
        radius in 0.05..1.0f64,
        rot in 0usize..8,
    ) {
        let peaks: Vec<Peak> = pts.iter().map(|&(x, y)| Peak { x, y, value: x + 2.0 }).collect();
        let truths: Vec<Point> = truths.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let a = match_peaks(&peaks, &truths, radius);
        let mut p2 = peaks.clone();
        p2.reverse();
        let mut t2 = truths.clone();
        let r = rot % t2.len();
        t2.rotate_left(r);
        let b = match_peaks(&p2, &t2, radius);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn found_peaks_are_separated_strict_maxima(
        bumps in prop::collection::vec((-0.9..0.9f64, -0.9..0.9f64, 0.5..3.0f64), 1..6),
        k in 1usize..6,
        sep in 0.05..0.6f64,
    ) {
        let grid = GridSpec::new(Rect::centered_square(1.0), 31, 31);
        let map = ImageGrid::evaluate(grid, ImageMeta::default(), |p| {
            bumps.iter().map(|&(x, y, h)| h * (-(p.distance(Point::new(x, y)) / 0.12).powi(2)).exp()).sum()
        });
        let peaks = find_peaks(&map, k, sep);
        prop_assert!(peaks.len() <= k);
        for (i, p) in peaks.iter().enumerate() {
            if i > 0 {
                prop_assert!(peaks[i - 1].value >= p.value);
            }
            for q in &peaks[i + 1..] {
                prop_assert!(p.location().distance(q.location()) >= sep);
            }
            let idx = map.values().iter().position(|v| *v == p.value).unwrap();
            let (ci, cj) = (idx % grid.nx, idx / grid.nx);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (a, b) = (ci as i64 + di, cj as i64 + dj);
                    if (di, dj) != (0, 0) && a >= 0 && b >= 0 && a < grid.nx as i64 && b < grid.ny as i64 {
                        prop_assert!(map.value(a as usize, b as usize) < p.value);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn music_map_is_at_least_one(scene in scene_strategy(4), k in 1usize..4) {
        let dirs = directions(24);
        let omega = omega_of(0.4);
        let sub = decompose(&asymptotic_msr(&scene, &dirs, omega)).unwrap().select(Selection::FirstK(k)).unwrap();
        let map = music_map(&sub, &dirs, omega, GridSpec::new(scene.domain(), 21, 21), DEFAULT_FLOOR);
        prop_assert!(map.values().iter().all(|&v| v >= 1.0 - 1e-12));
    }

    #[test]
    fn single_target_is_the_top_peak(cx in -0.8..0.8f64, cy in -0.8..0.8f64) {
        let grid = GridSpec::new(Rect::centered_square(1.0), 41, 41);
        // snap to the lattice so the peak can be exact
        let i = ((cx + 1.0) / grid.step_x()).round() as usize;
        let j = ((cy + 1.0) / grid.step_y()).round() as usize;
        let center = grid.point(i, j);
        let target = Scatterer::inhomogeneity(center, 0.05, Medium::dielectric(2.0).unwrap()).unwrap();
        let scene = Scene::new(Medium::VACUUM, vec![target], vec![], grid.domain).unwrap();
        let dirs = directions(32);
        let omega = omega_of(0.4);
        let sub = decompose(&asymptotic_msr(&scene, &dirs, omega)).unwrap().select(Selection::FirstK(1)).unwrap();
        let map = music_map(&sub, &dirs, omega, grid, DEFAULT_FLOOR);
        let peaks = find_peaks(&map, 1, 0.3);
        prop_assert_eq!(peaks.len(), 1);
        prop_assert!(peaks[0].location().distance(center) < 1e-9);
    }

    #[test]
    fn test_vector_is_unit(x in -2.0..2.0f64, y in -2.0..2.0f64, n in 1usize..64, lambda in 0.1..2.0f64) {
        let f = test_vector(Point::new(x, y), &directions(n), omega_of(lambda));
        prop_assert!((f.norm() - 1.0).abs() < 1e-12);
    }
}

/// Direction sums against quadrature of the circle integrals, and both
/// against the Bessel closed forms, once `N` resolves the oscillation.
#[test]
fn plane_wave_averages_converge_at_moderate_and_large_arguments() {
    let xi_set = [
        Point::new(1.0, 0.0),
        Point::new(0.0, 1.0),
        Point::new(0.6, -0.8),
    ];
    for target in [1.0, 10.0, 50.0] {
        for angle in [0.0f64, 0.7, 2.2, 4.0] {
            let x = Point::new(angle.cos(), angle.sin());
            let omega = target;
            for xi in xi_set {
                let (plain_q, weighted_q) = common::circle_averages(omega, x, xi);
                let xhat = x.normalized().unwrap();
                let j0 = bessel_j0(omega);
                let j1 = Complex64::new(0.0, xhat.dot(xi) * bessel_j1(omega));
                assert!(
                    (plain_q - j0).norm() < 1e-10,
                    "quadrature vs J0 at {target}"
                );
                assert!(
                    (weighted_q - j1).norm() < 1e-10,
                    "quadrature vs J1 at {target}"
                );

                let n = (omega as usize) + 40;
                let dirs = directions(n);
                let (plain_d, weighted_d) = common::direction_averages(&dirs, omega, x, xi);
                assert!((plain_d - plain_q).norm() < 1e-10, "N={n} at {target}");
                assert!(
                    (weighted_d - weighted_q).norm() < 1e-10,
                    "N={n} at {target}"
                );
                let (r0, r1) = plane_wave_average_residuals(&dirs, omega, x, xi);
                assert!(r0 < 1e-10 && r1 < 1e-10);
            }
        }
    }
}

/// Too few directions alias the sum away from its limit.
#[test]
fn plane_wave_averages_fail_when_undersampled() {
    let x = Point::new(0.8, 0.3);
    let omega = 50.0;
    let (r0, _) = plane_wave_average_residuals(&directions(8), omega, x, Point::new(1.0, 0.0));
    assert!(r0 > 1e-3);
}
