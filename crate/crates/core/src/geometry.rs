//! Multi-dimensional points and axis-aligned boxes.
//!
//! Every other module works in terms of [`Point`] and [`Envelope`]. All
//! predicates use plain `min`/`max` comparisons with no epsilon; boxes that
//! share a face are treated as intersecting with zero volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in d-dimensional space, d >= 1, all coordinates finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidGeometry("point must have d >= 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        Ok(Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// An axis-aligned d-dimensional box. `lo[k] <= hi[k]` for every axis;
/// zero-extent (degenerate) boxes are permitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Envelope {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidGeometry("envelope must have d >= 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for k in 0..lo.len() {
            if !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(Error::InvalidGeometry(format!(
                    "non-finite bound on axis {k}"
                )));
            }
            if lo[k] > hi[k] {
                return Err(Error::InvalidGeometry(format!(
                    "lo[{k}] = {} exceeds hi[{k}] = {}",
                    lo[k], hi[k]
                )));
            }
        }
        Ok(Envelope { lo, hi })
    }

    /// Degenerate zero-extent box at a point.
    pub fn from_point(p: &Point) -> Self {
        Envelope {
            lo: p.coords.clone(),
            hi: p.coords.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Product of side lengths. Degenerate boxes return 0.
    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product()
    }

    /// Sum of side lengths.
    pub fn margin(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).sum()
    }

    pub fn center(&self) -> Point {
        Point {
            coords: self
                .lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| 0.5 * (l + h))
                .collect(),
        }
    }

    fn check_dim(&self, other: &Envelope) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Component-wise max(lo)/min(hi); `None` when the boxes are disjoint in
    /// any dimension. Touching boxes yield a zero-volume envelope.
    pub fn intersection(&self, other: &Envelope) -> Result<Option<Envelope>> {
        self.check_dim(other)?;
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let l = self.lo[k].max(other.lo[k]);
            let h = self.hi[k].min(other.hi[k]);
            if l > h {
                return Ok(None);
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(Some(Envelope { lo, hi }))
    }

    /// True when the boxes share at least one point (boundaries count).
    pub fn intersects(&self, other: &Envelope) -> bool {
        debug_assert_eq!(self.dim(), other.dim());
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .all(|((l, h), (ol, oh))| *l <= *oh && *ol <= *h)
    }

    /// Smallest envelope containing both inputs.
    pub fn union(&self, other: &Envelope) -> Result<Envelope> {
        self.check_dim(other)?;
        Ok(Envelope {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.min(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.max(*b))
                .collect(),
        })
    }

    /// Smallest envelope containing `self` and `p`.
    pub fn expand(&self, p: &Point) -> Result<Envelope> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        let mut out = self.clone();
        out.include_point(&p.coords);
        Ok(out)
    }

    /// In-place expansion used when accumulating MBRs over many points.
    pub fn include_point(&mut self, coords: &[f64]) {
        debug_assert_eq!(coords.len(), self.dim());
        for (k, c) in coords.iter().enumerate() {
            self.lo[k] = self.lo[k].min(*c);
            self.hi[k] = self.hi[k].max(*c);
        }
    }

    pub fn include_envelope(&mut self, other: &Envelope) {
        debug_assert_eq!(other.dim(), self.dim());
        for k in 0..self.dim() {
            self.lo[k] = self.lo[k].min(other.lo[k]);
            self.hi[k] = self.hi[k].max(other.hi[k]);
        }
    }

    /// Volume and margin growth needed to include `x`; both are >= 0.
    pub fn enlargement(&self, x: &Envelope) -> Result<(f64, f64)> {
        let u = self.union(x)?;
        Ok((u.volume() - self.volume(), u.margin() - self.margin()))
    }

    pub fn contains_point(&self, coords: &[f64]) -> bool {
        debug_assert_eq!(coords.len(), self.dim());
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(coords)
            .all(|((l, h), c)| *l <= *c && *c <= *h)
    }

    pub fn contains_envelope(&self, other: &Envelope) -> bool {
        debug_assert_eq!(other.dim(), self.dim());
        (0..self.dim()).all(|k| self.lo[k] <= other.lo[k] && other.hi[k] <= self.hi[k])
    }
}

/// Tight envelope of a non-empty coordinate iterator.
pub fn mbr_of_points<'a, I>(mut points: I) -> Option<Envelope>
where
    I: Iterator<Item = &'a [f64]>,
{
    let first = points.next()?;
    let mut env = Envelope {
        lo: first.to_vec(),
        hi: first.to_vec(),
    };
    for p in points {
        env.include_point(p);
    }
    Some(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(lo: &[f64], hi: &[f64]) -> Envelope {
        Envelope::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn volume_unit_square() {
        assert_eq!(env(&[0.0, 0.0], &[1.0, 1.0]).volume(), 1.0);
    }

    #[test]
    fn volume_rect() {
        assert_eq!(env(&[0.0, 0.0], &[2.0, 3.0]).volume(), 6.0);
    }

    #[test]
    fn volume_degenerate() {
        assert_eq!(env(&[0.5, 0.5], &[0.5, 0.5]).volume(), 0.0);
    }

    #[test]
    fn margin_values() {
        assert_eq!(env(&[0.0, 0.0], &[1.0, 1.0]).margin(), 2.0);
        assert_eq!(env(&[0.0, 0.0], &[2.0, 3.0]).margin(), 5.0);
        assert_eq!(env(&[0.5, 0.5], &[0.5, 0.5]).margin(), 0.0);
    }

    #[test]
    fn intersection_overlapping() {
        let a = env(&[0.0, 0.0], &[2.0, 2.0]);
        let b = env(&[1.0, 1.0], &[3.0, 3.0]);
        let got = a.intersection(&b).unwrap().unwrap();
        assert_eq!(got, env(&[1.0, 1.0], &[2.0, 2.0]));
    }

    #[test]
    fn intersection_disjoint() {
        let a = env(&[0.0, 0.0], &[1.0, 1.0]);
        let b = env(&[2.0, 2.0], &[3.0, 3.0]);
        assert!(a.intersection(&b).unwrap().is_none());
        assert!(!a.intersects(&b));
    }

    #[test]
    fn intersection_idempotent() {
        let a = env(&[0.0, 1.0], &[2.0, 4.0]);
        assert_eq!(a.intersection(&a).unwrap().unwrap(), a);
    }

    #[test]
    fn intersection_touching_has_zero_volume() {
        let a = env(&[0.0, 0.0], &[1.0, 1.0]);
        let b = env(&[1.0, 0.0], &[2.0, 1.0]);
        let got = a.intersection(&b).unwrap().unwrap();
        assert_eq!(got.volume(), 0.0);
        assert!(a.intersects(&b));
    }

    #[test]
    fn intersection_dim_mismatch() {
        let a = env(&[0.0, 0.0], &[1.0, 1.0]);
        let b = env(&[0.0], &[1.0]);
        assert!(a.intersection(&b).is_err());
    }

    #[test]
    fn union_and_expand() {
        let a = env(&[0.0, 0.0], &[1.0, 1.0]);
        let b = env(&[2.0, 2.0], &[3.0, 3.0]);
        assert_eq!(a.union(&b).unwrap(), env(&[0.0, 0.0], &[3.0, 3.0]));

        let inside = Point::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(a.expand(&inside).unwrap(), a);

        let p = Point::new(vec![1.0, 2.0]).unwrap();
        let q = Point::new(vec![3.0, 0.0]).unwrap();
        let spanning = Envelope::from_point(&p).expand(&q).unwrap();
        assert_eq!(spanning, env(&[1.0, 0.0], &[3.0, 2.0]));
    }

    #[test]
    fn enlargement_contained_is_zero() {
        let a = env(&[0.0, 0.0], &[2.0, 2.0]);
        let x = env(&[0.5, 0.5], &[1.0, 1.0]);
        assert_eq!(a.enlargement(&x).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn enlargement_point_outside() {
        let a = env(&[0.0, 0.0], &[1.0, 1.0]);
        let x = env(&[2.0, 1.0], &[2.0, 1.0]);
        // union is [0,2] x [0,1]
        assert_eq!(a.enlargement(&x).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn enlargement_symmetric_cases() {
        let a = env(&[0.0, 0.0], &[1.0, 1.0]);
        let left = env(&[-1.0, 0.0], &[-1.0, 0.0]);
        let right = env(&[2.0, 1.0], &[2.0, 1.0]);
        assert_eq!(a.enlargement(&left).unwrap(), a.enlargement(&right).unwrap());
    }

    #[test]
    fn invalid_envelope_rejected() {
        assert!(Envelope::new(vec![1.0], vec![0.0]).is_err());
        assert!(Envelope::new(vec![], vec![]).is_err());
        assert!(Envelope::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Envelope::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
    }
}
