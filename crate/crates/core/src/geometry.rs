//! Regions, locations, distances and point-process sampling.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, stored in polar form around the region center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    radius: f64,
    angle: f64,
    x: f64,
    y: f64,
}

fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

impl Location {
    /// Builds a location from polar coordinates. A negative radius is
    /// folded onto the opposite ray.
    pub fn polar(radius: f64, angle: f64) -> Self {
        let (radius, angle) = if radius < 0.0 {
            (-radius, angle + PI)
        } else {
            (radius, angle)
        };
        let angle = normalize_angle(angle);
        Self {
            radius,
            angle,
            x: radius * angle.cos(),
            y: radius * angle.sin(),
        }
    }

    pub fn cartesian(x: f64, y: f64) -> Self {
        Self {
            radius: x.hypot(y),
            angle: y.atan2(x),
            x,
            y,
        }
    }

    pub fn origin() -> Self {
        Self::cartesian(0.0, 0.0)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn distance_to(&self, other: &Location) -> f64 {
        distance(self, other)
    }

    pub fn squared_distance_to(&self, other: &Location) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Euclidean distance between two locations.
///
/// Evaluated from the cartesian view; this is algebraically the polar law of
/// cosines `sqrt(p_a^2 + p_b^2 - 2 p_a p_b cos(theta_a - theta_b))` without its
/// cancellation error for nearby points.
pub fn distance(a: &Location, b: &Location) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// The deployment area containing every IoT device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum AreaRegion {
    /// Disk centered at the origin.
    Disk { radius_m: f64 },
    /// Simple polygon, vertices in meters relative to the region center.
    Polygon { vertices_m: Vec<[f64; 2]> },
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    fn on_segment(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
        c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

impl AreaRegion {
    pub fn disk(radius_m: f64) -> Self {
        AreaRegion::Disk { radius_m }
    }

    pub fn polygon(vertices_m: Vec<[f64; 2]>) -> Self {
        AreaRegion::Polygon { vertices_m }
    }

    /// Axis-aligned square of the given side, centered at the origin.
    pub fn square(side_m: f64) -> Self {
        let h = side_m / 2.0;
        AreaRegion::Polygon {
            vertices_m: vec![[-h, -h], [h, -h], [h, h], [-h, h]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AreaRegion::Disk { radius_m } => {
                if !(radius_m.is_finite() && *radius_m > 0.0) {
                    return Err(Error::InvalidRegion(format!(
                        "disk radius must be positive, got {radius_m}"
                    )));
                }
            }
            AreaRegion::Polygon { vertices_m } => {
                let n = vertices_m.len();
                if n < 3 {
                    return Err(Error::InvalidRegion(
                        "polygon needs at least three vertices".into(),
                    ));
                }
                if vertices_m.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidRegion("non-finite vertex".into()));
                }
                if self.area() <= 0.0 {
                    return Err(Error::InvalidRegion("polygon has zero area".into()));
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                        if adjacent {
                            continue;
                        }
                        if segments_intersect(
                            vertices_m[i],
                            vertices_m[(i + 1) % n],
                            vertices_m[j],
                            vertices_m[(j + 1) % n],
                        ) {
                            return Err(Error::InvalidRegion(format!(
                                "polygon edges {i} and {j} intersect"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Lebesgue measure of the region in square meters.
    pub fn area(&self) -> f64 {
        match self {
            AreaRegion::Disk { radius_m } => PI * radius_m * radius_m,
            AreaRegion::Polygon { vertices_m } => {
                let n = vertices_m.len();
                let twice: f64 = (0..n)
                    .map(|i| {
                        let a = vertices_m[i];
                        let b = vertices_m[(i + 1) % n];
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum();
                twice.abs() / 2.0
            }
        }
    }

    pub fn contains(&self, loc: &Location) -> bool {
        match self {
            AreaRegion::Disk { radius_m } => loc.radius() <= *radius_m,
            AreaRegion::Polygon { vertices_m } => {
                let (x, y) = (loc.x(), loc.y());
                let n = vertices_m.len();
                let mut inside = false;
                let mut j = n - 1;
                for i in 0..n {
                    let (xi, yi) = (vertices_m[i][0], vertices_m[i][1]);
                    let (xj, yj) = (vertices_m[j][0], vertices_m[j][1]);
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
        }
    }

    /// (min_x, min_y, max_x, max_y)
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match self {
            AreaRegion::Disk { radius_m } => (-radius_m, -radius_m, *radius_m, *radius_m),
            AreaRegion::Polygon { vertices_m } => vertices_m.iter().fold(
                (f64::MAX, f64::MAX, f64::MIN, f64::MIN),
                |(a, b, c, d), v| (a.min(v[0]), b.min(v[1]), c.max(v[0]), d.max(v[1])),
            ),
        }
    }

    /// Largest distance from the origin to any point of the region.
    pub fn max_radius(&self) -> f64 {
        match self {
            AreaRegion::Disk { radius_m } => *radius_m,
            AreaRegion::Polygon { vertices_m } => vertices_m
                .iter()
                .map(|v| v[0].hypot(v[1]))
                .fold(0.0, f64::max),
        }
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Location {
        match self {
            AreaRegion::Disk { radius_m } => {
                let r = radius_m * rng.random::<f64>().sqrt();
                let theta = rng.random_range(-PI..PI);
                Location::polar(r, theta)
            }
            AreaRegion::Polygon { .. } => {
                let (x0, y0, x1, y1) = self.bounding_box();
                loop {
                    let loc =
                        Location::cartesian(rng.random_range(x0..x1), rng.random_range(y0..y1));
                    if self.contains(&loc) {
                        return loc;
                    }
                }
            }
        }
    }
}

/// Area of the region in square meters.
pub fn area_of(region: &AreaRegion) -> f64 {
    region.area()
}

/// `count` i.i.d. uniform points in the region.
pub fn sample_uniform<R: Rng + ?Sized>(
    region: &AreaRegion,
    count: usize,
    rng: &mut R,
) -> Vec<Location> {
    (0..count).map(|_| region.sample_point(rng)).collect()
}

/// Homogeneous Poisson point process of the given density (points per m^2).
pub fn sample_hppp<R: Rng + ?Sized>(
    density: f64,
    region: &AreaRegion,
    rng: &mut R,
) -> Result<Vec<Location>> {
    if !(density.is_finite() && density >= 0.0) {
        return Err(crate::error::invalid("density", format!("{density}")));
    }
    let mean = density * region.area();
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| crate::error::invalid("density", e.to_string()))?
        .sample(rng) as usize;
    Ok(sample_uniform(region, count, rng))
}

/// Installed, candidate and temporary base-station locations.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub installed: Vec<Location>,
    pub candidates: Vec<Location>,
    pub temporary: Vec<Location>,
    pub region: AreaRegion,
}

impl NetworkLayout {
    pub fn new(
        installed: Vec<Location>,
        candidates: Vec<Location>,
        temporary: Vec<Location>,
        region: AreaRegion,
    ) -> Result<Self> {
        region.validate()?;
        let layout = Self {
            installed,
            candidates,
            temporary,
            region,
        };
        for loc in layout.all_sites() {
            if !layout.region.contains(&loc) {
                return Err(Error::InvalidRegion(format!(
                    "location ({:.1}, {:.1}) outside region",
                    loc.x(),
                    loc.y()
                )));
            }
        }
        for a in &layout.installed {
            if layout.candidates.iter().any(|c| distance(a, c) == 0.0) {
                return Err(Error::InvalidRegion(
                    "installed and candidate locations overlap".into(),
                ));
            }
        }
        Ok(layout)
    }

    /// Layout with uniformly sampled installed and candidate locations.
    pub fn random<R: Rng + ?Sized>(
        region: AreaRegion,
        installed: usize,
        candidates: usize,
        rng: &mut R,
    ) -> Result<Self> {
        region.validate()?;
        let inst = sample_uniform(&region, installed, rng);
        let cand = sample_uniform(&region, candidates, rng);
        Self::new(inst, cand, Vec::new(), region)
    }

    pub fn num_installed(&self) -> usize {
        self.installed.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Locations of the extended set {1..B+C}: installed then candidates.
    pub fn placement_sites(&self) -> Vec<Location> {
        self.installed
            .iter()
            .chain(&self.candidates)
            .copied()
            .collect()
    }

    /// Installed, candidates, then temporary.
    pub fn all_sites(&self) -> Vec<Location> {
        self.installed
            .iter()
            .chain(&self.candidates)
            .chain(&self.temporary)
            .copied()
            .collect()
    }
}
