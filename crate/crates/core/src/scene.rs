//! Physical configuration: background medium, target inhomogeneities, and
//! randomly placed nuisance scatterers.
//!
//! Every scatterer is a disk `center + radius·B` with `B` the unit disk, so
//! its polarization area is `π·radius²`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Rect};

/// Separation bound on `ω|z_i - z_j|` below which two targets are reported.
pub const SEPARATION_BOUND: f64 = 0.75;

/// Attempts allowed per requested scatterer during rejection sampling.
pub const ATTEMPTS_PER_SCATTERER: usize = 1000;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid medium: permittivity {permittivity} and permeability {permeability} must be positive")]
    InvalidMedium {
        permittivity: f64,
        permeability: f64,
    },
    #[error("invalid radius {0}: must be positive and finite")]
    InvalidRadius(f64),
    #[error("domain must have finite bounds and positive extent")]
    InvalidDomain,
    #[error("scatterer centered at {0:?} is not strictly inside the domain")]
    OutsideDomain(Point),
    #[error("scatterers centered at {a:?} and {b:?} overlap")]
    Overlap { a: Point, b: Point },
    #[error("permittivity range [{0}, {1}] must satisfy 1 <= a <= b")]
    InvalidPermittivityRange(f64, f64),
    #[error("could not place {requested} scatterers within {attempts} attempts (placed {placed})")]
    Crowded {
        requested: usize,
        placed: usize,
        attempts: usize,
    },
    #[error("scene JSON: {0}")]
    Json(String),
}

/// Electric permittivity and magnetic permeability, both relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    #[serde(rename = "eps")]
    pub permittivity: f64,
    #[serde(rename = "mu")]
    pub permeability: f64,
}

impl Medium {
    pub const VACUUM: Medium = Medium {
        permittivity: 1.0,
        permeability: 1.0,
    };

    pub fn new(permittivity: f64, permeability: f64) -> Result<Self, SceneError> {
        let m = Medium {
            permittivity,
            permeability,
        };
        m.check()?;
        Ok(m)
    }

    /// Dielectric-only medium with unit permeability.
    pub fn dielectric(permittivity: f64) -> Result<Self, SceneError> {
        Medium::new(permittivity, 1.0)
    }

    fn check(&self) -> Result<(), SceneError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.permittivity) && ok(self.permeability) {
            Ok(())
        } else {
            Err(SceneError::InvalidMedium {
                permittivity: self.permittivity,
                permeability: self.permeability,
            })
        }
    }
}

impl Default for Medium {
    fn default() -> Self {
        Medium::VACUUM
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScattererKind {
    Inhomogeneity,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub center: Point,
    pub radius: f64,
    pub medium: Medium,
    pub kind: ScattererKind,
}

impl Scatterer {
    pub fn new(
        center: Point,
        radius: f64,
        medium: Medium,
        kind: ScattererKind,
    ) -> Result<Self, SceneError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(SceneError::InvalidRadius(radius));
        }
        medium.check()?;
        Ok(Scatterer {
            center,
            radius,
            medium,
            kind,
        })
    }

    pub fn inhomogeneity(center: Point, radius: f64, medium: Medium) -> Result<Self, SceneError> {
        Scatterer::new(center, radius, medium, ScattererKind::Inhomogeneity)
    }

    pub fn random(center: Point, radius: f64, medium: Medium) -> Result<Self, SceneError> {
        Scatterer::new(center, radius, medium, ScattererKind::Random)
    }

    /// `π·radius²`, the area of `radius·B` for the unit disk `B`.
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn overlaps(&self, other: &Scatterer) -> bool {
        self.center.distance(other.center) <= self.radius + other.radius
    }
}

/// Background medium plus the target and nuisance scatterers inside `domain`.
///
/// Construction validates that every center is strictly inside the domain and
/// that no two disks overlap. Scenes are immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    background: Medium,
    inhomogeneities: Vec<Scatterer>,
    randoms: Vec<Scatterer>,
    domain: Rect,
}

impl Scene {
    pub fn new(
        background: Medium,
        inhomogeneities: Vec<Scatterer>,
        randoms: Vec<Scatterer>,
        domain: Rect,
    ) -> Result<Self, SceneError> {
        background.check()?;
        if !domain.is_valid() {
            return Err(SceneError::InvalidDomain);
        }
        let inhomogeneities: Vec<_> = inhomogeneities
            .into_iter()
            .map(|s| Scatterer {
                kind: ScattererKind::Inhomogeneity,
                ..s
            })
            .collect();
        let randoms: Vec<_> = randoms
            .into_iter()
            .map(|s| Scatterer {
                kind: ScattererKind::Random,
                ..s
            })
            .collect();
        let all: Vec<&Scatterer> = inhomogeneities.iter().chain(&randoms).collect();
        for s in &all {
            Scatterer::new(s.center, s.radius, s.medium, s.kind)?;
            if !domain.contains_strictly(s.center) {
                return Err(SceneError::OutsideDomain(s.center));
            }
        }
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if a.overlaps(b) {
                    return Err(SceneError::Overlap {
                        a: a.center,
                        b: b.center,
                    });
                }
            }
        }
        Ok(Scene {
            background,
            inhomogeneities,
            randoms,
            domain,
        })
    }

    pub fn empty(domain: Rect) -> Result<Self, SceneError> {
        Scene::new(Medium::VACUUM, Vec::new(), Vec::new(), domain)
    }

    pub fn background(&self) -> Medium {
        self.background
    }

    pub fn inhomogeneities(&self) -> &[Scatterer] {
        &self.inhomogeneities
    }

    pub fn randoms(&self) -> &[Scatterer] {
        &self.randoms
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Targets first, then random scatterers.
    pub fn scatterers(&self) -> impl Iterator<Item = &Scatterer> {
        self.inhomogeneities.iter().chain(&self.randoms)
    }

    pub fn len(&self) -> usize {
        self.inhomogeneities.len() + self.randoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target_centers(&self) -> Vec<Point> {
        self.inhomogeneities.iter().map(|s| s.center).collect()
    }

    pub fn all_centers(&self) -> Vec<Point> {
        self.scatterers().map(|s| s.center).collect()
    }

    /// Same geometry with every material contrast `ε - ε0` multiplied by `factor`.
    pub fn with_scaled_contrast(&self, factor: f64) -> Result<Scene, SceneError> {
        let eps0 = self.background.permittivity;
        let scale = |s: &Scatterer| Scatterer {
            medium: Medium {
                permittivity: eps0 + factor * (s.medium.permittivity - eps0),
                ..s.medium
            },
            ..*s
        };
        Scene::new(
            self.background,
            self.inhomogeneities.iter().map(scale).collect(),
            self.randoms.iter().map(scale).collect(),
            self.domain,
        )
    }

    /// Non-fatal modelling concerns at angular frequency `omega`: radii above
    /// a quarter wavelength, and random scatterers whose permittivity or
    /// permeability is not below every target's.
    pub fn advisories(&self, omega: f64) -> Vec<String> {
        let mut notes = Vec::new();
        let quarter_wave = 0.25 * 2.0 * PI / omega;
        for s in self.scatterers() {
            if s.radius > quarter_wave {
                notes.push(format!(
                    "scatterer at ({}, {}) has radius {} above a quarter wavelength ({quarter_wave:.4})",
                    s.center.x, s.center.y, s.radius
                ));
            }
        }
        let min_eps = self
            .inhomogeneities
            .iter()
            .map(|s| s.medium.permittivity)
            .fold(f64::INFINITY, f64::min);
        let min_mu = self
            .inhomogeneities
            .iter()
            .map(|s| s.medium.permeability)
            .fold(f64::INFINITY, f64::min);
        let strong = self
            .randoms
            .iter()
            .filter(|s| s.medium.permittivity >= min_eps || s.medium.permeability > min_mu)
            .count();
        if strong > 0 && !self.inhomogeneities.is_empty() {
            notes.push(format!(
                "{strong} random scatterers are not weaker than the weakest target; the leading singular values may not belong to the targets"
            ));
        }
        notes
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SceneDocument::from(self))
            .expect("scene serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let doc: SceneDocument =
            serde_json::from_str(text).map_err(|e| SceneError::Json(e.to_string()))?;
        doc.try_into()
    }
}

/// Every pair `(i, j)`, `i < j`, of target indices with `ω|z_i - z_j| <= 0.75`.
pub fn validate_separation(scene: &Scene, omega: f64) -> Vec<(usize, usize)> {
    let targets = scene.inhomogeneities();
    let mut pairs = Vec::new();
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            if omega * targets[i].center.distance(targets[j].center) <= SEPARATION_BOUND {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Parameters for drawing nuisance scatterers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomField {
    pub count: usize,
    pub domain: Rect,
    pub radius: f64,
    pub eps_range: [f64; 2],
}

/// Draws `field.count` random scatterers from a ChaCha8 stream seeded by
/// `seed`.
///
/// Each attempt draws `x` then `y` uniformly in the domain; a center is
/// rejected when it is not strictly inside the domain or its disk touches an
/// already placed scatterer or anything in `avoid`. The permittivity is drawn
/// uniformly from the closed range only after a center is accepted.
pub fn generate_randoms(
    seed: u64,
    field: &RandomField,
    avoid: &[Scatterer],
) -> Result<Vec<Scatterer>, SceneError> {
    let [lo, hi] = field.eps_range;
    if !(lo.is_finite() && hi.is_finite() && lo >= 1.0 && lo <= hi) {
        return Err(SceneError::InvalidPermittivityRange(lo, hi));
    }
    if !(field.radius.is_finite() && field.radius > 0.0) {
        return Err(SceneError::InvalidRadius(field.radius));
    }
    if !field.domain.is_valid() {
        return Err(SceneError::InvalidDomain);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = ATTEMPTS_PER_SCATTERER * field.count;
    let mut placed: Vec<Scatterer> = Vec::with_capacity(field.count);
    let mut attempts = 0;
    let d = field.domain;
    while placed.len() < field.count {
        if attempts >= budget {
            return Err(SceneError::Crowded {
                requested: field.count,
                placed: placed.len(),
                attempts,
            });
        }
        attempts += 1;
        let x = rng.random_range(d.min.x..d.max.x);
        let y = rng.random_range(d.min.y..d.max.y);
        let candidate = Scatterer {
            center: Point::new(x, y),
            radius: field.radius,
            medium: Medium::VACUUM,
            kind: ScattererKind::Random,
        };
        if !d.contains_strictly(candidate.center)
            || placed.iter().chain(avoid).any(|s| s.overlaps(&candidate))
        {
            continue;
        }
        let eps = if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        };
        placed.push(Scatterer {
            medium: Medium {
                permittivity: eps,
                permeability: 1.0,
            },
            ..candidate
        });
    }
    Ok(placed)
}

/// Seed used for the reference scene when none is given.
pub const DEFAULT_SEED: u64 = 1;

/// Target locations of the reference experiment.
pub const REFERENCE_TARGETS: [Point; 3] = [
    Point::new(0.25, 0.0),
    Point::new(-0.4, 0.5),
    Point::new(-0.3, -0.7),
];

/// Three dielectric targets (`r = 0.1`, `ε = 3`) at [`REFERENCE_TARGETS`] and 100
/// random scatterers (`r = 0.05`, `ε ∈ [1, 2]`) in `[-1, 1]²`.
pub fn reference_scene(seed: u64) -> Result<Scene, SceneError> {
    reference_scene_with(seed, 0.05, [1.0, 2.0])
}

/// The reference scene with a different nuisance radius and permittivity range.
pub fn reference_scene_with(
    seed: u64,
    random_radius: f64,
    eps_range: [f64; 2],
) -> Result<Scene, SceneError> {
    let domain = Rect::centered_square(1.0);
    let targets = REFERENCE_TARGETS
        .iter()
        .map(|&z| Scatterer::inhomogeneity(z, 0.1, Medium::dielectric(3.0)?))
        .collect::<Result<Vec<_>, _>>()?;
    let field = RandomField {
        count: 100,
        domain,
        radius: random_radius,
        eps_range,
    };
    let randoms = generate_randoms(seed, &field, &targets)?;
    Scene::new(Medium::VACUUM, targets, randoms, domain)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScattererRecord {
    center: Point,
    radius: f64,
    eps: f64,
    mu: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDocument {
    background: Medium,
    inhomogeneities: Vec<ScattererRecord>,
    randoms: Vec<ScattererRecord>,
    domain: Rect,
}

impl From<&Scatterer> for ScattererRecord {
    fn from(s: &Scatterer) -> Self {
        ScattererRecord {
            center: s.center,
            radius: s.radius,
            eps: s.medium.permittivity,
            mu: s.medium.permeability,
        }
    }
}

impl From<&Scene> for SceneDocument {
    fn from(scene: &Scene) -> Self {
        SceneDocument {
            background: scene.background,
            inhomogeneities: scene.inhomogeneities.iter().map(Into::into).collect(),
            randoms: scene.randoms.iter().map(Into::into).collect(),
            domain: scene.domain,
        }
    }
}

impl TryFrom<SceneDocument> for Scene {
    type Error = SceneError;

    fn try_from(doc: SceneDocument) -> Result<Scene, SceneError> {
        let build = |r: ScattererRecord, kind| {
            Scatterer::new(r.center, r.radius, Medium::new(r.eps, r.mu)?, kind)
        };
        let inhomogeneities = doc
            .inhomogeneities
            .into_iter()
            .map(|r| build(r, ScattererKind::Inhomogeneity))
            .collect::<Result<Vec<_>, _>>()?;
        let randoms = doc
            .randoms
            .into_iter()
            .map(|r| build(r, ScattererKind::Random))
            .collect::<Result<Vec<_>, _>>()?;
        Scene::new(doc.background, inhomogeneities, randoms, doc.domain)
    }
}
