//! Seeded region sampling and deterministic reductions.
//!
//! Random points come from ChaCha8 seeded streams so every report is
//! reproducible from (scene, seed). Reductions track the worst offender with
//! a stable tie-break on generation order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chart::{Chart, Point};

/// Axis-aligned box of coordinate ranges, one `(lo, hi)` pair per coordinate.
#[derive(Clone, Debug)]
pub struct Region {
    pub ranges: Vec<(f64, f64)>,
}

impl Region {
    pub fn new(ranges: Vec<(f64, f64)>) -> Self {
        Region { ranges }
    }

    /// Default sampling box: `u` in `[0.5, 2]`, `v` in `[-2, 2]`, transverse
    /// coordinates in `[-1, 1]`. Chosen to stay clear of the `u = 0`
    /// singularities that several shipped families carry.
    pub fn default_box(chart: &Chart) -> Self {
        let mut ranges = vec![(0.5, 2.0), (-2.0, 2.0)];
        ranges.resize(chart.dim(), (-1.0, 1.0));
        Region { ranges }
    }

    pub fn sample(&self, chart: &Chart, seed: u64, count: usize) -> Vec<Point> {
        assert_eq!(self.ranges.len(), chart.dim());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let coords = self
                    .ranges
                    .iter()
                    .map(|(lo, hi)| {
                        if lo == hi {
                            *lo
                        } else {
                            rng.gen_range(*lo..*hi)
                        }
                    })
                    .collect();
                Point::from_raw(coords)
            })
            .collect()
    }

    /// Regular grid with `n` points per axis (axes with `lo == hi` contribute
    /// a single fixed value). Points are emitted in row-major coordinate
    /// order, so the output is deterministic.
    pub fn grid(&self, chart: &Chart, n: usize) -> Vec<Point> {
        assert_eq!(self.ranges.len(), chart.dim());
        assert!(n >= 1);
        let axes: Vec<Vec<f64>> = self
            .ranges
            .iter()
            .map(|(lo, hi)| {
                if lo == hi || n == 1 {
                    vec![*lo]
                } else {
                    (0..n)
                        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let total: usize = axes.iter().map(|a| a.len()).product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            out.push(Point::from_raw(
                idx.iter().zip(&axes).map(|(i, axis)| axis[*i]).collect(),
            ));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

/// Running maximum of |value| with the first point attaining it.
#[derive(Clone, Debug)]
pub struct WorstCase {
    pub max_abs: f64,
    pub worst_point: Option<Point>,
}

impl WorstCase {
    pub fn new() -> Self {
        WorstCase {
            max_abs: 0.0,
            worst_point: None,
        }
    }

    pub fn update(&mut self, value: f64, p: &Point) {
        let a = value.abs();
        if self.worst_point.is_none() || a > self.max_abs {
            self.max_abs = a;
            self.worst_point = Some(p.clone());
        }
    }

    pub fn merge(&mut self, other: &WorstCase) {
        if let Some(p) = &other.worst_point {
            self.update(other.max_abs, p);
        }
    }
}

impl Default for WorstCase {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_reproducible() {
        let chart = Chart::new(5).unwrap();
        let region = Region::default_box(&chart);
        let a = region.sample(&chart, 42, 10);
        let b = region.sample(&chart, 42, 10);
        assert_eq!(a, b);
        let c = region.sample(&chart, 43, 10);
        assert_ne!(a, c);
        for p in &a {
            assert!(p.get(0) >= 0.5 && p.get(0) <= 2.0);
            assert!(p.get(2) >= -1.0 && p.get(2) <= 1.0);
        }
    }

    #[test]
    fn grid_covers_corners() {
        let chart = Chart::new(4).unwrap();
        let region = Region::new(vec![(0.0, 1.0), (0.0, 1.0), (0.0, 0.0), (2.0, 3.0)]);
        let g = region.grid(&chart, 3);
        assert_eq!(g.len(), 27);
        assert_eq!(g[0].coords(), &[0.0, 0.0, 0.0, 2.0]);
        assert_eq!(g[26].coords(), &[1.0, 1.0, 0.0, 3.0]);
    }

    #[test]
    fn worst_case_tracks_first_maximum() {
        let chart = Chart::new(4).unwrap();
        let p1 = Point::new(&chart, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let p2 = Point::new(&chart, vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let mut w = WorstCase::new();
        w.update(-3.0, &p1);
        w.update(3.0, &p2);
        assert_eq!(w.max_abs, 3.0);
        assert_eq!(w.worst_point.as_ref().unwrap(), &p1);
    }
}
