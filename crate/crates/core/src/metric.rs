//! Weighted Tychonoff metric on the cube of sequences with coordinates in `[0, 1]`.
//!
//! Coordinate `n` (1-based) carries weight `base^(1-n)`, so the metric is a
//! geometric series and everything beyond a finite prefix can be summed in
//! closed form. Points are eventually constant: a finite prefix followed by a
//! constant tail value.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Geometric weight schedule `w_n = base^(1-n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightSchedule {
    base: f64,
}

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule {
            base: std::f64::consts::E,
        }
    }
}

impl WeightSchedule {
    pub fn new(base: f64) -> Result<Self> {
        if !(base.is_finite() && base > 1.0) {
            return Err(Error::invalid(format!(
                "weight base must exceed 1, got {base}"
            )));
        }
        Ok(WeightSchedule { base })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    /// Weight of coordinate `n` (1-based). `weight(1) == 1`.
    pub fn weight(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        self.base.powf(1.0 - n as f64)
    }

    pub fn weights(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|n| self.weight(n)).collect()
    }

    /// `Σ_{n>N} w_n = base^(1-N) / (base - 1)`.
    pub fn tail_sum(&self, n: usize) -> f64 {
        self.base.powf(1.0 - n as f64) / (self.base - 1.0)
    }

    /// Sum of all weights, `base / (base - 1)`: the diameter of the cube.
    pub fn diameter_bound(&self) -> f64 {
        self.base / (self.base - 1.0)
    }

    /// Truncation depth for slack `epsilon`: `N = floor(log_base(base / epsilon)) + 1`.
    ///
    /// The returned depth satisfies `tail_sum(N) < epsilon <= base^(2-N)`.
    pub fn truncation_for(&self, epsilon: f64) -> Result<TruncationSchedule> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!(
                "truncation epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let ln_base = self.base.ln();
        let level = (ln_base - epsilon.ln()) / ln_base;
        let mut n = level.floor() as usize + 1;
        // rounding in the logarithm must not break tail_sum(N) < epsilon
        while self.tail_sum(n) >= epsilon {
            n += 1;
        }
        Ok(TruncationSchedule { epsilon, n })
    }

    /// Exact weighted distance between two eventually constant points.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        let len = x.prefix.len().max(y.prefix.len());
        let head: f64 = (1..=len)
            .map(|n| self.weight(n) * (x.coordinate(n) - y.coordinate(n)).abs())
            .sum();
        head + (x.tail - y.tail).abs() * self.tail_sum(len)
    }

    /// `Σ_{n<=N} w_n |x_n - y_n|`.
    pub fn truncated_distance(&self, x: &Point, y: &Point, n: usize) -> f64 {
        (1..=n)
            .map(|k| self.weight(k) * (x.coordinate(k) - y.coordinate(k)).abs())
            .sum()
    }

    /// Largest distance from `center` to any point of the cube.
    pub fn farthest_distance(&self, center: &Point) -> f64 {
        let len = center.prefix.len();
        let head: f64 = center
            .prefix
            .iter()
            .enumerate()
            .map(|(i, &c)| self.weight(i + 1) * c.max(1.0 - c))
            .sum();
        head + center.tail.max(1.0 - center.tail) * self.tail_sum(len)
    }

    /// Largest possible contribution of coordinates beyond `n` to the distance from `center`.
    pub fn farthest_tail(&self, center: &Point, n: usize) -> f64 {
        let len = center.prefix.len();
        let head: f64 = (n + 1..=len.max(n))
            .map(|k| {
                let c = center.coordinate(k);
                self.weight(k) * c.max(1.0 - c)
            })
            .sum();
        head + center.tail.max(1.0 - center.tail) * self.tail_sum(len.max(n))
    }
}

/// Truncation depth `N` paired with the slack `epsilon` it was derived from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationSchedule {
    pub epsilon: f64,
    pub n: usize,
}

/// A point of the cube: explicit prefix, then a constant tail.
///
/// Trailing prefix coordinates equal to the tail are dropped, so structural
/// equality coincides with equality of the underlying sequences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    prefix: Vec<f64>,
    tail: f64,
}

impl Point {
    pub fn new(prefix: Vec<f64>, tail: f64) -> Result<Self> {
        for (i, &v) in prefix.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::CoordinateOutOfRange {
                    index: i + 1,
                    value: v,
                });
            }
        }
        if !(0.0..=1.0).contains(&tail) {
            return Err(Error::CoordinateOutOfRange {
                index: prefix.len() + 1,
                value: tail,
            });
        }
        let mut p = Point { prefix, tail };
        p.normalize();
        Ok(p)
    }

    pub fn zero() -> Self {
        Point {
            prefix: Vec::new(),
            tail: 0.0,
        }
    }

    pub fn constant(value: f64) -> Result<Self> {
        Point::new(Vec::new(), value)
    }

    fn normalize(&mut self) {
        while self.prefix.last() == Some(&self.tail) {
            self.prefix.pop();
        }
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Coordinate `n` (1-based).
    pub fn coordinate(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        self.prefix.get(n - 1).copied().unwrap_or(self.tail)
    }

    /// The first `n` coordinates.
    pub fn head(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.coordinate(k)).collect()
    }

    /// Drops the first `n` coordinates.
    pub fn shift_left(&self, n: usize) -> Point {
        let prefix = self.prefix.iter().skip(n).copied().collect();
        let mut p = Point {
            prefix,
            tail: self.tail,
        };
        p.normalize();
        p
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.prefix.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ";{}]", self.tail)
    }
}

impl FromStr for Point {
    type Err = Error;

    /// Parses `[v1,v2,...;tail]`, e.g. `[0.5,0.25;0]` or `[;1]`.
    fn from_str(s: &str) -> Result<Self> {
        let malformed = |reason: &str| Error::Parse {
            literal: s.to_string(),
            reason: reason.to_string(),
        };
        let body = s
            .trim()
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .ok_or_else(|| malformed("expected `[prefix;tail]`"))?;
        let (head, tail) = body
            .split_once(';')
            .ok_or_else(|| malformed("missing `;tail`"))?;
        let parse = |tok: &str| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| malformed(&format!("`{}` is not a number", tok.trim())))
        };
        let prefix = if head.trim().is_empty() {
            Vec::new()
        } else {
            head.split(',').map(parse).collect::<Result<Vec<_>>>()?
        };
        let tail = parse(tail)?;
        Point::new(prefix, tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(s: &str) -> Point {
        s.parse().unwrap()
    }

    #[test]
    fn single_unit_coordinate() {
        let w = WeightSchedule::default();
        assert_eq!(w.distance(&Point::zero(), &p("[1;0]")), 1.0);
    }

    #[test]
    fn two_unit_coordinates() {
        let w = WeightSchedule::default();
        assert_relative_eq!(
            w.distance(&Point::zero(), &p("[1,1;0]")),
            1.367_879_441_171_442,
            epsilon = 1e-15
        );
    }

    #[test]
    fn distance_to_self_is_zero() {
        let w = WeightSchedule::default();
        let x = p("[0.3,0.9,0.1;0.5]");
        assert_eq!(w.distance(&x, &x), 0.0);
    }

    #[test]
    fn tail_is_summed_in_closed_form() {
        let w = WeightSchedule::default();
        // all-zeros vs all-ones is the full diameter
        let d = w.distance(&Point::zero(), &Point::constant(1.0).unwrap());
        assert_relative_eq!(d, w.diameter_bound(), epsilon = 1e-15);
    }

    #[test]
    fn diameters() {
        assert_relative_eq!(
            WeightSchedule::default().diameter_bound(),
            1.581_976_706_869_326,
            epsilon = 1e-15
        );
        assert_eq!(WeightSchedule::new(2.0).unwrap().diameter_bound(), 2.0);
        assert!(WeightSchedule::new(7.5).unwrap().diameter_bound() > 1.0);
    }

    #[test]
    fn schedules() {
        let w = WeightSchedule::default();
        assert_eq!(w.truncation_for(0.001).unwrap().n, 8);
        assert_eq!(w.truncation_for(1.0 / std::f64::consts::E).unwrap().n, 3);
        assert!(w.truncation_for(0.0).is_err());
        assert!(w.truncation_for(1.0).is_err());
    }

    #[test]
    fn tail_sum_matches_series() {
        let w = WeightSchedule::default();
        for n in 1..12 {
            let series: f64 = (n + 1..200).map(|k| w.weight(k)).sum();
            assert_relative_eq!(w.tail_sum(n), series, epsilon = 1e-14);
            assert!(w.tail_sum(n) < w.base().powf(1.0 - n as f64));
        }
    }

    #[test]
    fn weights_decrease() {
        let w = WeightSchedule::default();
        assert_eq!(w.weight(1), 1.0);
        for n in 1..40 {
            assert!(w.weight(n + 1) < w.weight(n));
        }
    }

    #[test]
    fn point_literals() {
        let x = p("[0.5, 0.25 ; 0]");
        assert_eq!(x.prefix(), &[0.5, 0.25]);
        assert_eq!(x.coordinate(3), 0.0);
        assert_eq!(x.to_string(), "[0.5,0.25;0]");
        assert_eq!(p("[;1]"), Point::constant(1.0).unwrap());
        // trailing coordinates equal to the tail are folded into it
        assert_eq!(p("[0.5,0,0;0]"), p("[0.5;0]"));
        assert!("[0.5;".parse::<Point>().is_err());
        assert!("[0.5]".parse::<Point>().is_err());
        assert!("[1.5;0]".parse::<Point>().is_err());
        assert!("[a;0]".parse::<Point>().is_err());
    }

    #[test]
    fn shift_left_drops_coordinates() {
        let x = p("[0.1,0.2,0.3;0.4]");
        assert_eq!(x.shift_left(1), p("[0.2,0.3;0.4]"));
        assert_eq!(x.shift_left(5), p("[;0.4]"));
        assert_eq!(x.shift_left(0), x);
    }

    #[test]
    fn farthest_distance_matches_corner() {
        let w = WeightSchedule::default();
        let c = p("[0.2,0.7;0.4]");
        let corner = p("[1,0;1]");
        assert_relative_eq!(
            w.farthest_distance(&c),
            w.distance(&c, &corner),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            w.farthest_tail(&c, 1),
            w.farthest_distance(&c) - 0.8,
            epsilon = 1e-15
        );
    }
}
