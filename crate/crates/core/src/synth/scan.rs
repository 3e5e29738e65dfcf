//! Orthographic virtual scanner.

use serde::{Deserialize, Serialize};

use super::mesh::{ray_triangle, Mesh};
use super::shapes::ShapeParams;
use crate::error::{Error, Result};
use crate::point::{downsample, normalize_unit_sphere, Point, PointSet};
use crate::rng::Rng;

/// Orthographic camera looking at `target` from direction `direction`,
/// casting a `resolution x resolution` grid of parallel rays over a square
/// window of half-width `half_extent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub target: Point,
    /// Unit vector from the target toward the camera.
    pub direction: Point,
    pub distance: f64,
    pub half_extent: f64,
    pub resolution: usize,
}

fn normalize(v: Point) -> Point {
    let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / l, v[1] / l, v[2] / l]
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl Camera {
    pub fn new(target: Point, direction: Point, distance: f64, half_extent: f64, resolution: usize) -> Self {
        Self {
            target,
            direction: normalize(direction),
            distance,
            half_extent,
            resolution,
        }
    }

    /// Ray origins and the shared ray direction.
    pub fn rays(&self) -> (Vec<Point>, Point) {
        let d = self.direction;
        let helper = if d[1].abs() < 0.9 { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
        let u = normalize(cross(helper, d));
        let v = cross(d, u);
        let res = self.resolution.max(1);
        let center = [
            self.target[0] + d[0] * self.distance,
            self.target[1] + d[1] * self.distance,
            self.target[2] + d[2] * self.distance,
        ];
        let mut origins = Vec::with_capacity(res * res);
        for i in 0..res {
            // Cell centers, so the window edge itself is never sampled.
            let a = self.half_extent * (2.0 * (i as f64 + 0.5) / res as f64 - 1.0);
            for j in 0..res {
                let b = self.half_extent * (2.0 * (j as f64 + 0.5) / res as f64 - 1.0);
                origins.push([
                    center[0] + a * u[0] + b * v[0],
                    center[1] + a * u[1] + b * v[1],
                    center[2] + a * u[2] + b * v[2],
                ]);
            }
        }
        (origins, [-d[0], -d[1], -d[2]])
    }
}

/// Eight cameras along the cube-corner directions, framing the mesh.
pub fn standard_rig(mesh: &Mesh, resolution: usize) -> Vec<Camera> {
    let (lo, hi) = mesh.bounds();
    let target = [
        (lo[0] + hi[0]) / 2.0,
        (lo[1] + hi[1]) / 2.0,
        (lo[2] + hi[2]) / 2.0,
    ];
    let radius = 0.5
        * ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt();
    let mut cams = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                cams.push(Camera::new(target, [sx, sy, sz], 3.0 * radius, 1.05 * radius, resolution));
            }
        }
    }
    cams
}

/// First-hit points with the index of the triangle that was hit.
pub fn scan_hits(mesh: &Mesh, cameras: &[Camera]) -> Vec<(Point, usize)> {
    let mut hits = Vec::new();
    for cam in cameras {
        let (origins, dir) = cam.rays();
        for o in origins {
            let mut best: Option<(f64, usize)> = None;
            for (ti, tri) in mesh.triangles.iter().enumerate() {
                if let Some(t) = ray_triangle(o, dir, tri) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, ti));
                    }
                }
            }
            if let Some((t, ti)) = best {
                hits.push(([o[0] + t * dir[0], o[1] + t * dir[1], o[2] + t * dir[2]], ti));
            }
        }
    }
    hits
}

/// Union over cameras of the first surface hit of every ray.
pub fn virtual_scan(mesh: &Mesh, cameras: &[Camera]) -> Result<PointSet> {
    if cameras.is_empty() {
        return Err(Error::invalid("virtual scan needs at least one camera"));
    }
    let hits = scan_hits(mesh, cameras);
    if hits.is_empty() {
        return Err(Error::NoHits);
    }
    PointSet::new(hits.into_iter().map(|(p, _)| p).collect())
}

/// Builds the mesh, scans it with the standard rig, downsamples to `n`
/// points by farthest-point sampling and normalizes to the unit sphere.
pub fn generate_shape(
    params: &ShapeParams,
    n: usize,
    scan_resolution: usize,
    rng: &mut Rng,
) -> Result<(Mesh, PointSet)> {
    if n < 8 {
        return Err(Error::invalid(format!("shape needs at least 8 points, got {n}")));
    }
    let mesh = params.mesh()?;
    let dense = virtual_scan(&mesh, &standard_rig(&mesh, scan_resolution))?;
    if dense.len() < n {
        return Err(Error::invalid(format!(
            "scan produced {} points, fewer than the {n} requested; raise the scan resolution",
            dense.len()
        )));
    }
    let sparse = downsample(&dense, n, rng)?;
    Ok((mesh, normalize_unit_sphere(&sparse)?))
}
