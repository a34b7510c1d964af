//! Part-affinity geometry and bottom-up grouping of candidate keypoints.
//!
//! A limb from `a` to `b` owns a band of pixels: points whose projection on the
//! limb direction falls within `[0, length]` and whose perpendicular offset is
//! at most the limb width. Inside the band the ideal affinity field is the
//! limb's unit direction; outside it is zero.

mod grouping;
mod parts;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

pub use grouping::{group_keypoints, GroupingParams, Keypoint, Skeleton};
pub use parts::{check_catalog_tree, default_limb_catalog, LimbSpec, PartKind, UnknownPart};

/// Endpoints closer than this are treated as the same point.
pub const DEGENERATE_TOLERANCE: f64 = 1e-9;

/// Slack allowed on stored field magnitudes.
pub const FIELD_MAGNITUDE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate limb: endpoints coincide")]
    DegenerateLimb,
    #[error("limb width must be positive")]
    NonPositiveWidth,
    #[error("affinity field has no samples")]
    EmptyField,
    #[error("at least two samples are required along a limb, got {0}")]
    TooFewSamples(usize),
    #[error("field vector magnitude {0} exceeds 1")]
    FieldMagnitude(String),
    #[error("invalid limb {0} -> {1}")]
    InvalidLimb(PartKind, PartKind),
    #[error("{0}")]
    InvalidCatalog(&'static str),
}

/// A point or displacement in continuous frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2D<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// True when the point lies inside a `width` x `height` frame.
    pub fn in_bounds(self, width: u32, height: u32) -> bool {
        self.x >= T::zero()
            && self.y >= T::zero()
            && self.x < T::lit(f64::from(width))
            && self.y < T::lit(f64::from(height))
    }

    pub fn cast<U: Real>(self) -> Point2D<U> {
        Point2D::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Point2D<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> Sub for Point2D<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> Mul<T> for Point2D<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Real> Neg for Point2D<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Unit vector pointing from `a` to `b`.
pub fn limb_unit_vector<T: Real>(a: Point2D<T>, b: Point2D<T>) -> Result<Point2D<T>, GeometryError> {
    let d = b - a;
    let len = d.norm();
    if !(len > T::lit(DEGENERATE_TOLERANCE)) {
        return Err(GeometryError::DegenerateLimb);
    }
    Ok(Point2D::new(d.x / len, d.y / len))
}

/// Whether `p` falls inside the band of the limb `a -> b` with half-width `width`.
///
/// The transverse test is symmetric: `|v_perp . (p - a)| <= width`.
pub fn point_on_limb<T: Real>(
    p: Point2D<T>,
    a: Point2D<T>,
    b: Point2D<T>,
    width: T,
) -> Result<bool, GeometryError> {
    if !(width > T::zero()) {
        return Err(GeometryError::NonPositiveWidth);
    }
    let v = limb_unit_vector(a, b)?;
    let length = (b - a).norm();
    let rel = p - a;
    let along = v.dot(rel);
    let across = v.perp().dot(rel);
    Ok(along >= T::zero() && along <= length && across.abs() <= width)
}

/// Ideal affinity field of the limb `a -> b` at `p`: the unit direction on the limb, zero elsewhere.
pub fn field_value<T: Real>(
    p: Point2D<T>,
    a: Point2D<T>,
    b: Point2D<T>,
    width: T,
) -> Result<Point2D<T>, GeometryError> {
    let v = limb_unit_vector(a, b)?;
    if point_on_limb(p, a, b, width)? {
        Ok(v)
    } else {
        Ok(Point2D::zero())
    }
}

/// A per-limb vector field sampled on the integer pixel grid of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityField<T> {
    pub limb: (PartKind, PartKind),
    width: usize,
    height: usize,
    vectors: Vec<Point2D<T>>,
}

impl<T: Real> AffinityField<T> {
    /// An all-zero field over a `width` x `height` grid.
    pub fn zeros(limb: (PartKind, PartKind), width: usize, height: usize) -> Self {
        Self { limb, width, height, vectors: vec![Point2D::zero(); width * height] }
    }

    pub fn constant(
        limb: (PartKind, PartKind),
        width: usize,
        height: usize,
        value: Point2D<T>,
    ) -> Result<Self, GeometryError> {
        check_magnitude(value)?;
        Ok(Self { limb, width, height, vectors: vec![value; width * height] })
    }

    /// Synthesizes the ideal field for one limb type from the given instances
    /// (one `(a, b)` pair per person). Where bands of several instances
    /// overlap, their unit vectors are averaged.
    pub fn from_limbs(
        limb: (PartKind, PartKind),
        width: usize,
        height: usize,
        instances: &[(Point2D<T>, Point2D<T>)],
        band: T,
    ) -> Result<Self, GeometryError> {
        let mut field = Self::zeros(limb, width, height);
        let mut counts = vec![0u32; width * height];
        for &(a, b) in instances {
            let v = limb_unit_vector(a, b)?;
            let pad = band + T::one();
            let (x0, x1) = grid_span(a.x.min(b.x) - pad, a.x.max(b.x) + pad, width);
            let (y0, y1) = grid_span(a.y.min(b.y) - pad, a.y.max(b.y) + pad, height);
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = Point2D::new(T::lit(x as f64), T::lit(y as f64));
                    if point_on_limb(p, a, b, band)? {
                        let i = y * width + x;
                        field.vectors[i] = field.vectors[i] + v;
                        counts[i] += 1;
                    }
                }
            }
        }
        for (vec, &n) in field.vectors.iter_mut().zip(&counts) {
            if n > 1 {
                *vec = *vec * (T::one() / T::lit(f64::from(n)));
            }
        }
        Ok(field)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Point2D<T>> {
        (x < self.width && y < self.height).then(|| self.vectors[y * self.width + x])
    }

    pub fn set(&mut self, x: usize, y: usize, value: Point2D<T>) -> Result<(), GeometryError> {
        check_magnitude(value)?;
        if x < self.width && y < self.height {
            self.vectors[y * self.width + x] = value;
        }
        Ok(())
    }

    /// Field value at the grid sample nearest to `p`.
    pub fn nearest(&self, p: Point2D<T>) -> Result<Point2D<T>, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyField);
        }
        let snap = |c: T, n: usize| -> usize {
            let r = c.round();
            if !(r > T::zero()) {
                0
            } else {
                r.to_usize().unwrap_or(usize::MAX).min(n - 1)
            }
        };
        let (x, y) = (snap(p.x, self.width), snap(p.y, self.height));
        Ok(self.vectors[y * self.width + x])
    }
}

fn grid_span<T: Real>(lo: T, hi: T, n: usize) -> (usize, usize) {
    let lo = lo.floor().max(T::zero()).to_usize().unwrap_or(0).min(n);
    let hi = (hi.ceil() + T::one()).max(T::zero()).to_usize().unwrap_or(n).min(n);
    (lo, hi.max(lo))
}

fn check_magnitude<T: Real>(v: Point2D<T>) -> Result<(), GeometryError> {
    let n = v.norm();
    if !v.is_finite() || n > T::one() + T::lit(FIELD_MAGNITUDE_SLACK) {
        return Err(GeometryError::FieldMagnitude(format!("{n}")));
    }
    Ok(())
}

/// Mean alignment between `field` and the candidate limb `a -> b`, sampled at
/// `n_samples` evenly spaced points from `a` to `b` inclusive. Lies in `[-1, 1]`.
pub fn limb_affinity_score<T: Real>(
    a: Point2D<T>,
    b: Point2D<T>,
    field: &AffinityField<T>,
    n_samples: usize,
) -> Result<T, GeometryError> {
    if n_samples < 2 {
        return Err(GeometryError::TooFewSamples(n_samples));
    }
    let v = limb_unit_vector(a, b)?;
    if field.is_empty() {
        return Err(GeometryError::EmptyField);
    }
    let d = b - a;
    let last = T::lit((n_samples - 1) as f64);
    let mut total = T::zero();
    for i in 0..n_samples {
        let t = T::lit(i as f64) / last;
        total += field.nearest(a + d * t)?.dot(v);
    }
    Ok(total / T::lit(n_samples as f64))
}
