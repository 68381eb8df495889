//! Points of R^n and straight segments between them.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointError {
    #[error("a point needs at least one coordinate")]
    Empty,
    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("segment endpoints coincide")]
    Degenerate,
    #[error("lambda {0} outside [0, 1]")]
    Lambda(f64),
}

/// A finite point of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, PointError> {
        if coords.is_empty() {
            return Err(PointError::Empty);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(PointError::NonFinite { index, value });
        }
        Ok(Point(coords))
    }

    /// Builds a point from coordinates already known to be finite.
    ///
    /// Panics on empty or non-finite input.
    pub fn from_slice(coords: &[f64]) -> Self {
        Point::new(coords.to_vec()).expect("finite, nonempty coordinates")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// `self - other` as a plain vector.
    pub fn sub(&self, other: &Point) -> Vec<f64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        norm(&self.sub(other))
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = PointError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The segment `z(λ) = x + λ(y − x)`, `λ ∈ [0, 1]`, with `x ≠ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    x: Point,
    y: Point,
}

impl Segment {
    pub fn new(x: Point, y: Point) -> Result<Self, PointError> {
        if x.dim() != y.dim() {
            return Err(PointError::Dimension { expected: x.dim(), got: y.dim() });
        }
        if x == y {
            return Err(PointError::Degenerate);
        }
        Ok(Segment { x, y })
    }

    pub fn x(&self) -> &Point {
        &self.x
    }

    pub fn y(&self) -> &Point {
        &self.y
    }

    /// `x + λ(y − x)`; `λ` must lie in `[0, 1]`.
    pub fn point(&self, lambda: f64) -> Result<Point, PointError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(PointError::Lambda(lambda));
        }
        Ok(self.point_unchecked(lambda))
    }

    pub(crate) fn point_unchecked(&self, lambda: f64) -> Point {
        Point(
            self.x
                .0
                .iter()
                .zip(&self.y.0)
                .map(|(a, b)| a + lambda * (b - a))
                .collect(),
        )
    }

    /// The reversed segment `y → x`.
    pub fn reversed(&self) -> Segment {
        Segment { x: self.y.clone(), y: self.x.clone() }
    }
}

/// Free-function form of [`Segment::point`].
pub fn segment_point(seg: &Segment, lambda: f64) -> Result<Point, PointError> {
    seg.point(lambda)
}
