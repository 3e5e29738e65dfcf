//! Triangle soups built from a few primitives, and ray intersection.

use std::f64::consts::PI;

use crate::point::{sub, Point};

pub type Triangle = [Point; 3];

#[inline]
fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Möller-Trumbore. Returns the ray parameter of the hit, if any.
pub fn ray_triangle(origin: Point, dir: Point, tri: &Triangle) -> Option<f64> {
    const EPS: f64 = 1e-12;
    let e1 = sub(tri[1], tri[0]);
    let e2 = sub(tri[2], tri[0]);
    let p = cross(dir, e2);
    let det = dot(e1, p);
    if det.abs() < EPS {
        return None;
    }
    let inv = 1.0 / det;
    let s = sub(origin, tri[0]);
    let u = dot(s, p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = cross(s, e1);
    let v = dot(dir, q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = dot(e2, q) * inv;
    (t > EPS).then_some(t)
}

/// Distance from `p` to the plane of `tri`.
pub fn plane_distance(p: Point, tri: &Triangle) -> f64 {
    let n = cross(sub(tri[1], tri[0]), sub(tri[2], tri[0]));
    let len = dot(n, n).sqrt();
    (dot(sub(p, tri[0]), n) / len).abs()
}

#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub triangles: Vec<Triangle>,
}

impl Mesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn append(&mut self, other: Mesh) {
        self.triangles.extend(other.triangles);
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for t in &self.triangles {
            for v in t {
                for k in 0..3 {
                    lo[k] = lo[k].min(v[k]);
                    hi[k] = hi[k].max(v[k]);
                }
            }
        }
        (lo, hi)
    }

    fn quad(&mut self, a: Point, b: Point, c: Point, d: Point) {
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    /// Axis-aligned box.
    pub fn cuboid(center: Point, half: Point) -> Self {
        let [cx, cy, cz] = center;
        let [hx, hy, hz] = half;
        let v = |sx: f64, sy: f64, sz: f64| [cx + sx * hx, cy + sy * hy, cz + sz * hz];
        let mut m = Mesh::new();
        m.quad(v(-1., -1., -1.), v(-1., 1., -1.), v(1., 1., -1.), v(1., -1., -1.));
        m.quad(v(-1., -1., 1.), v(1., -1., 1.), v(1., 1., 1.), v(-1., 1., 1.));
        m.quad(v(-1., -1., -1.), v(1., -1., -1.), v(1., -1., 1.), v(-1., -1., 1.));
        m.quad(v(-1., 1., -1.), v(-1., 1., 1.), v(1., 1., 1.), v(1., 1., -1.));
        m.quad(v(-1., -1., -1.), v(-1., -1., 1.), v(-1., 1., 1.), v(-1., 1., -1.));
        m.quad(v(1., -1., -1.), v(1., 1., -1.), v(1., 1., 1.), v(1., -1., 1.));
        m
    }

    /// Capped frustum along +y from `base_y`, with radii at bottom and top.
    pub fn frustum(
        center_xz: (f64, f64),
        base_y: f64,
        height: f64,
        r_bottom: f64,
        r_top: f64,
        segments: usize,
    ) -> Self {
        let (cx, cz) = center_xz;
        let ring = |r: f64, y: f64, i: usize| {
            let a = 2.0 * PI * i as f64 / segments as f64;
            [cx + r * a.cos(), y, cz + r * a.sin()]
        };
        let (y0, y1) = (base_y, base_y + height);
        let mut m = Mesh::new();
        for i in 0..segments {
            let j = (i + 1) % segments;
            m.quad(ring(r_bottom, y0, i), ring(r_top, y1, i), ring(r_top, y1, j), ring(r_bottom, y0, j));
            m.triangles.push([[cx, y0, cz], ring(r_bottom, y0, j), ring(r_bottom, y0, i)]);
            m.triangles.push([[cx, y1, cz], ring(r_top, y1, i), ring(r_top, y1, j)]);
        }
        m
    }

    pub fn cylinder(center_xz: (f64, f64), base_y: f64, height: f64, radius: f64, segments: usize) -> Self {
        Self::frustum(center_xz, base_y, height, radius, radius, segments)
    }

    /// UV ellipsoid with poles on the y axis.
    pub fn ellipsoid(center: Point, radii: Point, stacks: usize, slices: usize) -> Self {
        let v = |i: usize, j: usize| {
            let theta = PI * i as f64 / stacks as f64;
            let phi = 2.0 * PI * j as f64 / slices as f64;
            [
                center[0] + radii[0] * theta.sin() * phi.cos(),
                center[1] + radii[1] * theta.cos(),
                center[2] + radii[2] * theta.sin() * phi.sin(),
            ]
        };
        let mut m = Mesh::new();
        for i in 0..stacks {
            for j in 0..slices {
                let jn = (j + 1) % slices;
                if i > 0 {
                    m.triangles.push([v(i, j), v(i, jn), v(i + 1, j)]);
                }
                if i + 1 < stacks {
                    m.triangles.push([v(i, jn), v(i + 1, jn), v(i + 1, j)]);
                }
            }
        }
        m
    }
}
