//! Certified measures of balls, their complements, and finite unions of both.
//!
//! For a ball `B(θ, r)` and truncation depth `N`, with `τ_N` the exact tail
//! sum of the weights,
//!
//! ```text
//! B_N(θ, r - τ_N) × [0,1]^∞  ⊂  B(θ, r)  ⊂  B_N(θ, r) × [0,1]^∞
//! ```
//!
//! so `[μ_N(θ, r - τ_N), μ_N(θ, r)]` brackets the measure of the ball at every
//! `N`. Both ends move monotonically towards each other as `N` grows.

mod union;

use std::fmt;

use serde::Serialize;

pub use union::{Atom, RegionPi, UnionOptions, UnionReport};

use crate::error::{Error, Result};
use crate::metric::{Point, WeightSchedule};
use crate::piecewise::{PiecewisePolyDensity, DEFAULT_BREAKPOINT_BUDGET};

/// Allowance for floating-point error in an exactly computed volume.
pub(crate) const ROUNDING_SLACK: f64 = 1e-12;

/// An open ball of the infinite cube.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ball {
    center: Point,
    radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, x: &Point, weights: &WeightSchedule) -> bool {
        weights.distance(&self.center, x) < self.radius
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B({}, {})", self.center, self.radius)
    }
}

/// Certified interval `[lo, hi]` around a measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
    #[serde(rename = "N_used")]
    pub n_used: usize,
    /// the true value lies in `[lo, hi]`
    pub certified: bool,
    /// the requested tolerance was met
    pub converged: bool,
}

impl Enclosure {
    pub fn exact(value: f64, n_used: usize) -> Self {
        Enclosure {
            lo: value,
            hi: value,
            n_used,
            certified: true,
            converged: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn overlaps(&self, other: &Enclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// `[1 - hi, 1 - lo]`
    pub fn complement(&self) -> Self {
        Enclosure {
            lo: 1.0 - self.hi,
            hi: 1.0 - self.lo,
            ..*self
        }
    }
}

/// Shared parameters for measure computations.
#[derive(Clone, Copy, Debug)]
pub struct MeasureContext {
    pub weights: WeightSchedule,
    pub breakpoint_budget: usize,
    /// deepest truncation tried before giving up on the tolerance
    pub max_dim: usize,
}

impl Default for MeasureContext {
    fn default() -> Self {
        MeasureContext {
            weights: WeightSchedule::default(),
            breakpoint_budget: DEFAULT_BREAKPOINT_BUDGET,
            max_dim: 40,
        }
    }
}

/// Widen an exactly computed volume by the rounding allowance, keeping exact
/// zeros and ones (those come from support tests, not arithmetic).
fn widen(lo: f64, hi: f64) -> (f64, f64) {
    let lo = if lo <= 0.0 || lo >= 1.0 {
        lo
    } else {
        (lo - ROUNDING_SLACK).max(0.0)
    };
    let hi = if hi <= 0.0 || hi >= 1.0 {
        hi
    } else {
        (hi + ROUNDING_SLACK).min(1.0)
    };
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}

impl MeasureContext {
    pub fn with_weights(weights: WeightSchedule) -> Self {
        MeasureContext {
            weights,
            ..Default::default()
        }
    }

    /// Enclosures at `N = 1, 2, ..., max_n`, each intersected with the previous one.
    ///
    /// Stops early (shorter result) if the breakpoint budget runs out.
    pub fn ball_trace(&self, ball: &Ball, max_n: usize) -> Vec<Enclosure> {
        let mut out = Vec::new();
        self.walk(ball, max_n, |e| {
            out.push(e);
            true
        });
        out
    }

    /// Drives the sandwich upwards in `N`; `visit` returns `false` to stop.
    /// Returns `false` if the walk ended because of the breakpoint budget.
    fn walk(&self, ball: &Ball, max_n: usize, mut visit: impl FnMut(Enclosure) -> bool) -> bool {
        let w = &self.weights;
        let r = ball.radius;
        if r > w.farthest_distance(&ball.center) {
            visit(Enclosure::exact(1.0, 0));
            return true;
        }
        let mut density: Option<PiecewisePolyDensity> = None;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for n in 1..=max_n {
            let term = PiecewisePolyDensity::term_density(ball.center.coordinate(n), w.weight(n))
                .expect("validated center");
            let next = match density.take() {
                None => Ok(term),
                Some(d) => d.convolve_with_budget(&term, self.breakpoint_budget),
            };
            let d = match next {
                Ok(d) => d,
                Err(_) => return false,
            };
            let tail = w.tail_sum(n);
            let (l, h) = widen(d.cdf(r - tail), d.cdf(r));
            lo = lo.max(l);
            hi = hi.min(h);
            density = Some(d);
            let e = Enclosure {
                lo,
                hi,
                n_used: n,
                certified: true,
                converged: false,
            };
            if !visit(e) {
                break;
            }
        }
        true
    }

    /// Certified enclosure of the measure of `ball`, refined until its width is
    /// at most `tol`.
    ///
    /// When the breakpoint budget or `max_dim` is hit first, the best enclosure
    /// so far is returned with `converged == false`.
    pub fn measure_ball(&self, ball: &Ball, tol: f64) -> Result<Enclosure> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let mut best = Enclosure {
            lo: 0.0,
            hi: 1.0,
            n_used: 0,
            certified: true,
            converged: false,
        };
        self.walk(ball, self.max_dim, |e| {
            best = e;
            if e.width() <= tol {
                best.converged = true;
                return false;
            }
            true
        });
        Ok(best)
    }

    /// `[1 - hi, 1 - lo]` of [`measure_ball`](Self::measure_ball).
    pub fn measure_complement(&self, ball: &Ball, tol: f64) -> Result<Enclosure> {
        Ok(self.measure_ball(ball, tol)?.complement())
    }

    /// Projection of `ball` onto the coordinates beyond `n`.
    ///
    /// `Σ_{k>n} w_k |x_k - θ_k| = base^(-n) d(x', θ')` for the shifted
    /// sequences, so the projection is again a ball, of radius `base^n · r`.
    pub fn project_tail(&self, ball: &Ball, n: usize) -> Ball {
        Ball {
            center: ball.center.shift_left(n),
            radius: self.weights.base().powi(n as i32) * ball.radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ball(c: &str, r: f64) -> Ball {
        Ball::new(c.parse().unwrap(), r).unwrap()
    }

    #[test]
    fn beyond_the_diameter_everything_is_inside() {
        let ctx = MeasureContext::default();
        for c in ["[;0]", "[0.3,0.9;0.5]", "[;1]"] {
            let e = ctx.measure_ball(&ball(c, 1.6), 1e-6).unwrap();
            assert_eq!((e.lo, e.hi), (1.0, 1.0));
            assert!(e.converged);
            let e = ctx.measure_complement(&ball(c, 1.6), 1e-6).unwrap();
            assert_eq!((e.lo, e.hi), (0.0, 0.0));
        }
    }

    #[test]
    fn origin_ball_converges() {
        let ctx = MeasureContext::default();
        let e = ctx.measure_ball(&ball("[;0]", 0.3), 1e-4).unwrap();
        assert!(e.converged);
        assert!(e.width() <= 1e-4);
        // the N = 2 corner value is an upper bound that all deeper truncations undercut
        assert!(e.hi <= 0.122_322_682_280_657 + 1e-12);
        let deep = crate::volume::volume_conv(
            &crate::volume::FiniteBallSpec::new(vec![0.0; 12], 0.3, WeightSchedule::default())
                .unwrap(),
        )
        .unwrap();
        assert!(e.lo <= deep && deep <= e.hi + 1e-12, "{e:?} vs {deep}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Ball::new(Point::zero(), 0.0).is_err());
        assert!(Ball::new(Point::zero(), -1.0).is_err());
        let ctx = MeasureContext::default();
        assert!(ctx.measure_ball(&ball("[;0]", 0.3), 0.0).is_err());
    }

    #[test]
    fn complement_reflects() {
        let ctx = MeasureContext::default();
        let b = ball("[0.2,0.7;0.5]", 0.4);
        let e = ctx.measure_ball(&b, 1e-3).unwrap();
        let c = ctx.measure_complement(&b, 1e-3).unwrap();
        assert_eq!(c.lo + e.hi, 1.0);
        assert_relative_eq!(c.width(), e.width(), epsilon = 1e-15);
    }

    #[test]
    fn trace_is_monotone() {
        let ctx = MeasureContext::default();
        let t = ctx.ball_trace(&ball("[0.1,0.6,0.9;0.3]", 0.5), 9);
        assert_eq!(t.len(), 9);
        for pair in t.windows(2) {
            assert!(pair[1].lo >= pair[0].lo);
            assert!(pair[1].hi <= pair[0].hi);
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let ctx = MeasureContext {
            breakpoint_budget: 64,
            ..Default::default()
        };
        let e = ctx.measure_ball(&ball("[;0]", 0.3), 1e-9).unwrap();
        assert!(!e.converged);
        assert!(e.certified);
        assert!(e.n_used >= 1);
    }

    #[test]
    fn tail_projection_radius() {
        let ctx = MeasureContext::default();
        let b = ball("[0.1,0.2,0.3;0.4]", 0.1);
        let p = ctx.project_tail(&b, 1);
        assert_relative_eq!(p.radius(), 0.271_828_182_845_904_5, epsilon = 1e-15);
        assert_eq!(p.center(), &"[0.2,0.3;0.4]".parse::<Point>().unwrap());
        assert_eq!(ctx.project_tail(&b, 0), b);
    }
}
