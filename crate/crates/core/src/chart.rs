//! Coordinate charts and points.
//!
//! Every chart carries the fixed light-cone coordinate order `(u, v, x3, ..., xD)`
//! where `D >= 4` is the spacetime dimension. The transverse coordinates are
//! `x^e` with `e` running from 3 to `D` inclusive, so a chart always has at
//! least two transverse directions.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Slot of the `u` coordinate in the fixed ordering.
pub const U: usize = 0;
/// Slot of the `v` coordinate in the fixed ordering.
pub const V: usize = 1;
/// Slot of the `x3` coordinate (the distinguished transverse direction).
pub const X3: usize = 2;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("chart dimension must be at least 4, got {0}")]
    DimensionTooSmall(usize),
    #[error("point has {got} coordinates, chart has dimension {want}")]
    WrongLength { got: usize, want: usize },
    #[error("coordinate {index} of point is not finite")]
    NonFinite { index: usize },
}

#[derive(Debug)]
struct ChartInner {
    dim: usize,
    labels: Vec<String>,
}

/// A light-cone coordinate chart `(u, v, x3, ..., xD)`.
///
/// Cheap to clone; shared by every field and metric living on it.
#[derive(Clone)]
pub struct Chart(Arc<ChartInner>);

impl Chart {
    /// Chart of spacetime dimension `dim` (number of coordinates).
    pub fn new(dim: usize) -> Result<Self, ChartError> {
        if dim < 4 {
            return Err(ChartError::DimensionTooSmall(dim));
        }
        let mut labels = vec!["u".to_string(), "v".to_string()];
        for e in 3..=dim {
            labels.push(format!("x{e}"));
        }
        Ok(Chart(Arc::new(ChartInner { dim, labels })))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    /// Number of transverse directions, `D - 2`.
    pub fn transverse_count(&self) -> usize {
        self.0.dim - 2
    }

    /// Transverse labels `e` in the `3..=D` convention.
    pub fn transverse_range(&self) -> std::ops::RangeInclusive<usize> {
        3..=self.0.dim
    }

    /// Coordinate slot of the transverse label `e` (with `e` in `3..=D`).
    pub fn slot_of(&self, e: usize) -> usize {
        debug_assert!((3..=self.0.dim).contains(&e));
        e - 1
    }

    /// Transverse label of a coordinate slot (slot in `2..D`).
    pub fn label_of_slot(&self, slot: usize) -> usize {
        debug_assert!((2..self.0.dim).contains(&slot));
        slot + 1
    }

    pub fn coord_name(&self, slot: usize) -> &str {
        &self.0.labels[slot]
    }

    /// Slot of a coordinate name, if it names a coordinate of this chart.
    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.0.labels.iter().position(|l| l == name)
    }

    pub fn same_chart(&self, other: &Chart) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.dim == other.0.dim
    }
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chart(D={})", self.0.dim)
    }
}

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        self.0.dim == other.0.dim
    }
}
impl Eq for Chart {}

/// A point of a chart: one finite real value per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(chart: &Chart, coords: Vec<f64>) -> Result<Self, ChartError> {
        if coords.len() != chart.dim() {
            return Err(ChartError::WrongLength {
                got: coords.len(),
                want: chart.dim(),
            });
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(ChartError::NonFinite { index });
        }
        Ok(Point { coords })
    }

    /// Point from raw coordinates, skipping validation. Used internally where
    /// finiteness is already known.
    pub fn from_raw(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.coords[slot]
    }

    /// Copy of this point with one coordinate replaced.
    pub fn with_coord(&self, slot: usize, value: f64) -> Point {
        let mut coords = self.coords.clone();
        coords[slot] = value;
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Set of coordinate slots a field may depend on, as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct CoordMask(u64);

impl CoordMask {
    pub const EMPTY: CoordMask = CoordMask(0);

    pub fn single(slot: usize) -> CoordMask {
        CoordMask(1 << slot)
    }

    pub fn union(self, other: CoordMask) -> CoordMask {
        CoordMask(self.0 | other.0)
    }

    pub fn contains(self, slot: usize) -> bool {
        self.0 & (1 << slot) != 0
    }

    pub fn with(self, slot: usize) -> CoordMask {
        CoordMask(self.0 | (1 << slot))
    }

    pub fn without(self, slot: usize) -> CoordMask {
        CoordMask(self.0 & !(1 << slot))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// True if every slot of `self` is also in `allowed`.
    pub fn subset_of(self, allowed: CoordMask) -> bool {
        self.0 & !allowed.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |s| self.contains(*s))
    }
}

impl fmt::Debug for CoordMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoordMask{{")?;
        let mut first = true;
        for s in self.iter() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_labels_follow_convention() {
        let chart = Chart::new(5).unwrap();
        assert_eq!(chart.dim(), 5);
        assert_eq!(chart.coord_name(0), "u");
        assert_eq!(chart.coord_name(1), "v");
        assert_eq!(chart.coord_name(2), "x3");
        assert_eq!(chart.coord_name(4), "x5");
        assert_eq!(chart.transverse_count(), 3);
        assert_eq!(chart.coord_index("x4"), Some(3));
        assert_eq!(chart.coord_index("w"), None);
        assert_eq!(chart.slot_of(3), X3);
    }

    #[test]
    fn chart_rejects_small_dimension() {
        assert!(Chart::new(3).is_err());
        assert!(Chart::new(4).is_ok());
    }

    #[test]
    fn point_validation() {
        let chart = Chart::new(4).unwrap();
        assert!(Point::new(&chart, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Point::new(&chart, vec![1.0, 2.0, 3.0, f64::NAN]).is_err());
        let p = Point::new(&chart, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.get(2), 3.0);
        assert_eq!(p.with_coord(2, 9.0).get(2), 9.0);
        assert_eq!(p.get(2), 3.0);
    }

    #[test]
    fn mask_ops() {
        let m = CoordMask::single(0).union(CoordMask::single(2));
        assert!(m.contains(0));
        assert!(!m.contains(1));
        assert!(m.subset_of(m.with(5)));
        assert!(!m.with(5).subset_of(m));
        assert_eq!(m.without(0), CoordMask::single(2));
    }
}
