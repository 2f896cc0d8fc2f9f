//! Averages of smooth functions over an area region by composite
//! Gauss-Legendre rules with panel doubling.
//!
//! Disks are integrated in polar coordinates about their center. Polygons are
//! fanned into triangles from the first vertex; signed triangle areas make
//! the fan valid for non-convex simple polygons. Each triangle is mapped from
//! the unit square with a collapsed (Duffy) transform.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::geometry::AreaRegion;

const ORDER: usize = 12;
const START_PANELS: usize = 2;
const MAX_LEVEL: u32 = 7;

/// Default absolute tolerance between successive refinements.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Nodes and weights of the base rule, mapped to `[0, 1]`.
fn unit_rule() -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(ORDER).unwrap());
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Composite rule over `[0, 1]` with `panels` equal panels.
fn composite(rule: &[(f64, f64)], panels: usize) -> Vec<(f64, f64)> {
    let h = 1.0 / panels as f64;
    let mut out = Vec::with_capacity(rule.len() * panels);
    for k in 0..panels {
        for &(x, w) in rule {
            out.push(((k as f64 + x) * h, w * h));
        }
    }
    out
}

fn disk_mean<F: Fn(f64, f64) -> f64>(
    radius: f64,
    f: &F,
    pts: &[(f64, f64)],
    theta_pts: &[(f64, f64)],
) -> f64 {
    // (1/(pi R^2)) int_0^R int_-pi^pi f p dtheta dp with p = R u and
    // theta = -pi + 2 pi s reduces to 2 int int f u du ds.
    let mut acc = 0.0;
    for &(u, wu) in pts {
        let p = radius * u;
        let mut inner = 0.0;
        for &(s, ws) in theta_pts {
            let th = -PI + 2.0 * PI * s;
            let (sin, cos) = th.sin_cos();
            inner += ws * f(p * cos, p * sin);
        }
        acc += wu * u * inner;
    }
    2.0 * acc
}

fn polygon_mean<F: Fn(f64, f64) -> f64>(vertices: &[[f64; 2]], f: &F, pts: &[(f64, f64)]) -> f64 {
    let a = vertices[0];
    let mut total = 0.0;
    let mut twice_area = 0.0;
    for k in 1..vertices.len() - 1 {
        let (b, c) = (vertices[k], vertices[k + 1]);
        // Twice the signed area of (a, b, c).
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det == 0.0 {
            continue;
        }
        twice_area += det;
        let mut acc = 0.0;
        for &(u, wu) in pts {
            for &(v, wv) in pts {
                let x = a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]);
                let y = a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1]);
                acc += wu * wv * u * f(x, y);
            }
        }
        total += det * acc;
    }
    // Orientation cancels between the weights and the area.
    2.0 * total / twice_area
}

/// Mean of `f(x, y)` over `region` with respect to the uniform density.
/// Panels are doubled until two successive estimates differ by less than
/// `tol`.
pub fn region_mean<F: Fn(f64, f64) -> f64>(region: &AreaRegion, f: F, tol: f64) -> Result<f64> {
    region.validate()?;
    let rule = unit_rule();
    let mut previous: Option<f64> = None;
    for level in 0..=MAX_LEVEL {
        let panels = START_PANELS << level;
        let value = match region {
            AreaRegion::Disk { radius_m } => {
                let radial = composite(&rule, panels);
                let angular = composite(&rule, 2 * panels);
                disk_mean(*radius_m, &f, &radial, &angular)
            }
            AreaRegion::Polygon { vertices_m } => {
                polygon_mean(vertices_m, &f, &composite(&rule, panels))
            }
        };
        if !value.is_finite() {
            return Err(Error::NonConvergence("integrand is not finite".into()));
        }
        if let Some(prev) = previous {
            if (value - prev).abs() < tol {
                return Ok(value);
            }
        }
        previous = Some(value);
    }
    Err(Error::NonConvergence(format!(
        "no agreement to {tol:e} after {MAX_LEVEL} refinements"
    )))
}
