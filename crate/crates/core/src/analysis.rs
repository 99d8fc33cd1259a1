//! Peak extraction, peak-to-truth matching, and map summary statistics.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::imaging::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl Peak {
    pub fn location(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakMatch {
    pub truth: Point,
    pub found: Point,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
    pub matches: Vec<PeakMatch>,
    pub unmatched: Vec<Point>,
}

impl PeakReport {
    pub fn all_matched(&self) -> bool {
        self.unmatched.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Lattice points strictly greater than every existing 8-neighbour.
fn local_maxima(grid: &ImageGrid) -> Vec<Peak> {
    let spec = grid.spec();
    let (nx, ny) = (spec.nx as isize, spec.ny as isize);
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = grid.value(i as usize, j as usize);
            let mut strict = true;
            let mut neighbours = 0;
            'scan: for dj in -1..=1 {
                for di in -1..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx || b >= ny {
                        continue;
                    }
                    neighbours += 1;
                    if grid.value(a as usize, b as usize) >= v {
                        strict = false;
                        break 'scan;
                    }
                }
            }
            if strict && neighbours > 0 {
                let p = spec.point(i as usize, j as usize);
                out.push(Peak {
                    x: p.x,
                    y: p.y,
                    value: v,
                });
            }
        }
    }
    out
}

/// Up to `k` strict local maxima, taken greedily by descending value and
/// skipping any closer than `min_separation` to one already chosen.
pub fn find_peaks(grid: &ImageGrid, k: usize, min_separation: f64) -> Vec<Peak> {
    let mut candidates = local_maxima(grid);
    candidates.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    let mut chosen: Vec<Peak> = Vec::with_capacity(k);
    for c in candidates {
        if chosen.len() == k {
            break;
        }
        if chosen
            .iter()
            .all(|p| p.location().distance(c.location()) >= min_separation)
        {
            chosen.push(c);
        }
    }
    chosen
}

fn lexicographic(a: Point, b: Point) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Greedy one-to-one assignment of peaks to truths by increasing distance,
/// accepting pairs no farther apart than `radius`.
///
/// Ties are broken by coordinates, so the result does not depend on the
/// order of either input list. Matches are listed by distance, unmatched
/// truths lexicographically.
pub fn match_peaks(peaks: &[Peak], truths: &[Point], radius: f64) -> PeakReport {
    let mut pairs: Vec<(f64, Point, Point)> = Vec::new();
    for t in truths {
        for p in peaks {
            let d = t.distance(p.location());
            if d <= radius {
                pairs.push((d, *t, p.location()));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(lexicographic(a.1, b.1))
            .then(lexicographic(a.2, b.2))
    });

    let mut truth_used = vec![false; truths.len()];
    let mut peak_used = vec![false; peaks.len()];
    let mut matches = Vec::new();
    for (d, t, f) in pairs {
        let ti = truths
            .iter()
            .enumerate()
            .position(|(i, x)| !truth_used[i] && *x == t);
        let pi = peaks
            .iter()
            .enumerate()
            .position(|(i, p)| !peak_used[i] && p.location() == f);
        if let (Some(ti), Some(pi)) = (ti, pi) {
            truth_used[ti] = true;
            peak_used[pi] = true;
            matches.push(PeakMatch {
                truth: t,
                found: f,
                distance: d,
            });
        }
    }
    let mut unmatched: Vec<Point> = truths
        .iter()
        .zip(&truth_used)
        .filter(|(_, used)| !**used)
        .map(|(t, _)| *t)
        .collect();
    unmatched.sort_by(|a, b| lexicographic(*a, *b));

    let mut sorted_peaks = peaks.to_vec();
    sorted_peaks.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(lexicographic(a.location(), b.location()))
    });
    PeakReport {
        peaks: sorted_peaks,
        matches,
        unmatched,
    }
}

/// Median of the map over points farther than `radius` from every center,
/// or `None` if no such point exists.
pub fn background_median(grid: &ImageGrid, centers: &[Point], radius: f64) -> Option<f64> {
    let spec = grid.spec();
    let mut values: Vec<f64> = grid
        .values()
        .iter()
        .enumerate()
        .filter(|(idx, _)| {
            let p = spec.point_at(*idx);
            centers.iter().all(|c| p.distance(*c) > radius)
        })
        .map(|(_, v)| *v)
        .collect();
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::imaging::{GridSpec, ImageMeta};

    fn grid_from(f: impl Fn(Point) -> f64 + Sync) -> ImageGrid {
        ImageGrid::evaluate(
            GridSpec::new(Rect::centered_square(1.0), 21, 21),
            ImageMeta::default(),
            f,
        )
    }

    #[test]
    fn constant_grid_has_no_peaks() {
        assert!(find_peaks(&grid_from(|_| 1.0), 3, 0.1).is_empty());
    }

    #[test]
    fn finds_bumps_in_value_order() {
        let bumps = [
            (Point::new(0.5, 0.5), 3.0),
            (Point::new(-0.5, -0.5), 2.0),
            (Point::new(0.5, -0.5), 1.0),
        ];
        let g = grid_from(|p| {
            bumps
                .iter()
                .map(|(c, h)| h * (-(p.distance(*c) / 0.1).powi(2)).exp())
                .sum()
        });
        let peaks = find_peaks(&g, 2, 0.3);
        assert_eq!(peaks.len(), 2);
        assert!(peaks[0].location().distance(bumps[0].0) < 1e-9);
        assert!(peaks[1].location().distance(bumps[1].0) < 1e-9);
        let all = find_peaks(&g, 10, 0.3);
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn separation_suppresses_close_maxima() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(0.2, 0.0);
        let g = grid_from(|p| {
            2.0 * (-(p.distance(a) / 0.05).powi(2)).exp() + (-(p.distance(b) / 0.05).powi(2)).exp()
        });
        assert_eq!(find_peaks(&g, 2, 0.3).len(), 1);
        assert_eq!(find_peaks(&g, 2, 0.1).len(), 2);
    }

    #[test]
    fn exact_peaks_match_with_zero_distance() {
        let truths = [Point::new(0.1, 0.2), Point::new(-0.3, 0.4)];
        let peaks: Vec<Peak> = truths
            .iter()
            .map(|t| Peak {
                x: t.x,
                y: t.y,
                value: 1.0,
            })
            .collect();
        let r = match_peaks(&peaks, &truths, 0.01);
        assert!(r.all_matched());
        assert!(r.matches.iter().all(|m| m.distance == 0.0));
    }

    #[test]
    fn no_peaks_leaves_all_unmatched() {
        let truths = [Point::new(0.1, 0.2), Point::new(-0.3, 0.4)];
        let r = match_peaks(&[], &truths, 1.0);
        assert_eq!(r.unmatched.len(), 2);
    }

    #[test]
    fn report_json_shape() {
        let r = match_peaks(
            &[Peak {
                x: 0.0,
                y: 0.0,
                value: 2.0,
            }],
            &[Point::new(0.0, 0.1), Point::new(5.0, 5.0)],
            0.5,
        );
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["peaks"][0]["value"], 2.0);
        assert_eq!(v["matches"][0]["truth"], serde_json::json!([0.0, 0.1]));
        assert_eq!(v["matches"][0]["found"], serde_json::json!([0.0, 0.0]));
        assert_eq!(v["unmatched"], serde_json::json!([[5.0, 5.0]]));
    }

    #[test]
    fn median_outside_disks() {
        let g = grid_from(|p| if p.norm() < 0.3 { 100.0 } else { p.x + 2.0 });
        let m = background_median(&g, &[Point::ORIGIN], 0.3).unwrap();
        assert!((m - 2.0).abs() < 1e-9);
        assert!(background_median(&g, &[Point::ORIGIN], 5.0).is_none());
    }
}
