//! Points, planes, antenna arrays, mirror images and near-field array responses.
//!
//! Right-handed Cartesian coordinates in meters. Arrays are immutable once
//! built; UPA elements are ordered row-major over the `(u, v)` grid, i.e.
//! index `iu * n_v + iv`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const ORTHO_TOL: f64 = 1e-12;

/// Wavelength for a carrier frequency in Hz.
pub fn wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

/// Wavenumber 2π/λ for a carrier frequency in Hz.
pub fn wavenumber(frequency_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI / wavelength(frequency_hz)
}

/// A point (or free vector) in 3D space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

fn check_orthonormal(vs: &[Point3]) -> Result<()> {
    for (i, a) in vs.iter().enumerate() {
        if !a.is_finite() || (a.norm() - 1.0).abs() > ORTHO_TOL {
            return invalid(format!("axis {i} is not a unit vector: {a:?}"));
        }
        for b in &vs[i + 1..] {
            if a.dot(*b).abs() > ORTHO_TOL {
                return invalid("axes are not mutually orthogonal");
            }
        }
    }
    Ok(())
}

/// A finite rectangular patch of a plane.
///
/// The patch spans `origin + s·axis_u + t·axis_v` with `|s| ≤ length_u/2`,
/// `|t| ≤ length_v/2`; `normal = axis_u × axis_v` points into the half-space
/// where transmitters and receivers live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub origin: Point3,
    pub normal: Point3,
    pub axis_u: Point3,
    pub axis_v: Point3,
    pub length_u: f64,
    pub length_v: f64,
}

impl PlaneSpec {
    pub fn new(
        origin: Point3,
        axis_u: Point3,
        axis_v: Point3,
        length_u: f64,
        length_v: f64,
    ) -> Result<Self> {
        check_orthonormal(&[axis_u, axis_v])?;
        if !origin.is_finite() {
            return invalid("plane origin must be finite");
        }
        if !(length_u > 0.0 && length_v > 0.0 && length_u.is_finite() && length_v.is_finite()) {
            return invalid(format!("plane extents must be positive, got {length_u} x {length_v}"));
        }
        Ok(Self {
            origin,
            normal: axis_u.cross(axis_v),
            axis_u,
            axis_v,
            length_u,
            length_v,
        })
    }

    /// Square patch of side `side` centered at the origin of the x-y plane, normal +z.
    pub fn xy_square(side: f64) -> Result<Self> {
        Self::new(Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), side, side)
    }

    /// Re-validates a deserialized plane.
    pub fn validate(&self) -> Result<()> {
        check_orthonormal(&[self.axis_u, self.axis_v, self.normal])?;
        if self.axis_u.cross(self.axis_v).dot(self.normal) < 0.0 {
            return invalid("plane normal must equal axis_u x axis_v");
        }
        if !(self.length_u > 0.0 && self.length_v > 0.0) {
            return invalid("plane extents must be positive");
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.length_u * self.length_v
    }

    /// Signed distance of `p` from the infinite plane along the normal.
    pub fn height_of(&self, p: Point3) -> f64 {
        (p - self.origin).dot(self.normal)
    }

    /// Coordinates `(s, t, h)` of `p` in the plane frame.
    pub fn to_local(&self, p: Point3) -> Point3 {
        let d = p - self.origin;
        Point3::new(d.dot(self.axis_u), d.dot(self.axis_v), d.dot(self.normal))
    }

    pub fn from_local(&self, l: Point3) -> Point3 {
        self.origin + self.axis_u * l.x + self.axis_v * l.y + self.normal * l.z
    }
}

/// Reflects `p` across the infinite plane containing `plane`.
pub fn mirror_point(p: Point3, plane: &PlaneSpec) -> Point3 {
    p - plane.normal * (2.0 * plane.height_of(p))
}

/// Ordered antenna element positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    elements: Vec<Point3>,
    center: Point3,
}

impl ArrayGeometry {
    pub fn from_elements(elements: Vec<Point3>) -> Result<Self> {
        if elements.is_empty() {
            return invalid("array needs at least one element");
        }
        if elements.iter().any(|p| !p.is_finite()) {
            return invalid("array element positions must be finite");
        }
        let n = elements.len() as f64;
        let sum = elements.iter().fold(Point3::ORIGIN, |a, &p| a + p);
        Ok(Self { center: sum * (1.0 / n), elements })
    }

    pub fn single(p: Point3) -> Self {
        Self { elements: vec![p], center: p }
    }

    pub fn elements(&self) -> &[Point3] {
        &self.elements
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element-wise mirror image across a plane (same ordering).
    pub fn mirrored(&self, plane: &PlaneSpec) -> Self {
        let elements: Vec<Point3> = self.elements.iter().map(|&p| mirror_point(p, plane)).collect();
        Self { center: mirror_point(self.center, plane), elements }
    }

    pub fn translated(&self, by: Point3) -> Self {
        Self {
            elements: self.elements.iter().map(|&p| p + by).collect(),
            center: self.center + by,
        }
    }
}

/// Uniform planar array of `n_u × n_v` elements centered at `center`.
pub fn make_upa(
    center: Point3,
    n_u: usize,
    n_v: usize,
    spacing: f64,
    axes: (Point3, Point3),
) -> Result<ArrayGeometry> {
    if n_u == 0 || n_v == 0 {
        return invalid("UPA dimensions must be at least 1");
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return invalid(format!("UPA spacing must be positive, got {spacing}"));
    }
    if !center.is_finite() {
        return invalid("UPA center must be finite");
    }
    check_orthonormal(&[axes.0, axes.1])?;
    let (au, av) = axes;
    let off_u = 0.5 * (n_u as f64 - 1.0);
    let off_v = 0.5 * (n_v as f64 - 1.0);
    let mut elements = Vec::with_capacity(n_u * n_v);
    for iu in 0..n_u {
        for iv in 0..n_v {
            let s = (iu as f64 - off_u) * spacing;
            let t = (iv as f64 - off_v) * spacing;
            elements.push(center + au * s + av * t);
        }
    }
    // The grid is symmetric about `center`; store it exactly instead of the rounded mean.
    Ok(ArrayGeometry { elements, center })
}

/// Uniform linear array of `n` elements along `axis`.
pub fn make_ula(center: Point3, n: usize, spacing: f64, axis: Point3) -> Result<ArrayGeometry> {
    let other = if axis.x.abs() < 0.9 { Point3::new(1.0, 0.0, 0.0) } else { Point3::new(0.0, 1.0, 0.0) };
    let perp = axis
        .cross(other)
        .normalized()
        .ok_or_else(|| crate::Error::Validation("ULA axis must be non-zero".into()))?;
    make_upa(center, n, 1, spacing, (axis, perp))
}

/// Near-field array response: entry n is `exp(j·κ·‖u_n − focus‖)`.
pub fn nf_array_response(array: &ArrayGeometry, focus: Point3, wavenumber: f64) -> Vec<Complex64> {
    array
        .elements()
        .iter()
        .map(|&p| Complex64::from_polar(1.0, wavenumber * p.distance(focus)))
        .collect()
}
