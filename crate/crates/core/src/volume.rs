//! Finite-dimensional projected ball volumes.
//!
//! `μ_N(θ, r) = Vol{x ∈ [0,1]^N : Σ_{n<=N} w_n |x_n - θ_n| < r}` is the CDF at
//! `r` of a sum of independent folded uniforms. Two independent routes compute
//! it: piecewise-polynomial convolution, and an exact inclusion–exclusion sum
//! over the mixture decomposition of every `|x_n - θ_n|`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::WeightSchedule;
use crate::piecewise::{PiecewisePolyDensity, DEFAULT_BREAKPOINT_BUDGET};

/// Largest dimension accepted by [`volume_ie`]; its cost grows like `4^N`.
pub const IE_MAX_DIM: usize = 12;

/// A ball of the truncated cube `[0,1]^N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteBallSpec {
    center: Vec<f64>,
    radius: f64,
    #[serde(skip)]
    weights: WeightSchedule,
}

impl FiniteBallSpec {
    pub fn new(center: Vec<f64>, radius: f64, weights: WeightSchedule) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        for (i, &c) in center.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::CoordinateOutOfRange {
                    index: i + 1,
                    value: c,
                });
            }
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(FiniteBallSpec {
            center,
            radius,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weights(&self) -> WeightSchedule {
        self.weights
    }

    /// Same center and weights, different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.center.clone(), radius, self.weights)
    }

    /// Truncated distance `Σ_{n<=N} w_n |x_n - θ_n|` from the center.
    pub fn truncated_distance(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .enumerate()
            .map(|(i, (&c, &v))| self.weights.weight(i + 1) * (v - c).abs())
            .sum()
    }
}

/// Density of `Σ_{n<=N} w_n |X_n - θ_n|` for independent uniform `X_n`.
pub fn sum_density(
    center: &[f64],
    weights: &WeightSchedule,
    budget: usize,
) -> Result<PiecewisePolyDensity> {
    let mut terms = center
        .iter()
        .enumerate()
        .map(|(i, &c)| PiecewisePolyDensity::term_density(c, weights.weight(i + 1)));
    let mut acc = terms
        .next()
        .ok_or_else(|| Error::invalid("dimension must be at least 1"))??;
    for term in terms {
        acc = acc.convolve_with_budget(&term?, budget)?;
    }
    Ok(acc)
}

pub fn volume_conv(spec: &FiniteBallSpec) -> Result<f64> {
    volume_conv_with_budget(spec, DEFAULT_BREAKPOINT_BUDGET)
}

pub fn volume_conv_with_budget(spec: &FiniteBallSpec, budget: usize) -> Result<f64> {
    let density = sum_density(&spec.center, &spec.weights, budget)?;
    Ok(density.cdf(spec.radius))
}

/// Exact `m · 2^e` decomposition of a positive finite double.
fn dyadic(x: f64) -> (u64, i32) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i32;
    (m, e)
}

/// Volume by inclusion–exclusion in exact rational arithmetic.
///
/// `w_n |X_n - θ_n|` is a mixture: uniform on `[0, w_n θ_n]` with probability
/// `θ_n`, uniform on `[0, w_n (1 - θ_n)]` otherwise. For every one of the `2^N`
/// mixture branches, `P(Σ U(0, a_n) < r)` equals
/// `Σ_S (-1)^|S| (r - Σ_{n∈S} a_n)_+^N / (N! Π a_n)`, which is evaluated on
/// integers after scaling all inputs by a common power of two.
pub fn volume_ie(spec: &FiniteBallSpec) -> Result<f64> {
    let dim = spec.dim();
    if dim > IE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim,
            max: IE_MAX_DIM,
        });
    }
    let weights: Vec<f64> = (1..=dim).map(|n| spec.weights.weight(n)).collect();
    // branch 0 has length w θ and probability θ, branch 1 has w (1 - θ) and 1 - θ
    let branches: Vec<[(f64, f64); 2]> = spec
        .center
        .iter()
        .zip(&weights)
        .map(|(&c, &w)| [(w * c, c), (w * (1.0 - c), 1.0 - c)])
        .collect();

    let values: Vec<f64> = (0u32..(1u32 << dim))
        .into_par_iter()
        .map(|mask| {
            let mut prob = 1.0;
            let mut lengths = Vec::with_capacity(dim);
            for (n, br) in branches.iter().enumerate() {
                let (len, p) = br[((mask >> n) & 1) as usize];
                if p == 0.0 {
                    return 0.0;
                }
                prob *= p;
                lengths.push(len);
            }
            prob * box_simplex_fraction(&lengths, spec.radius)
        })
        .collect();
    Ok(values.iter().sum::<f64>().clamp(0.0, 1.0))
}

/// `P(Σ U(0, a_n) < r)` for independent uniforms, computed exactly.
fn box_simplex_fraction(lengths: &[f64], r: f64) -> f64 {
    let total: f64 = lengths.iter().sum();
    if r >= total {
        // all corners are below r; the exact sum is 1
        let exact = lengths
            .iter()
            .fold(BigRational::zero(), |acc, &a| acc + rational(a));
        if rational(r) >= exact {
            return 1.0;
        }
    }
    let parts: Vec<(u64, i32)> = lengths.iter().map(|&a| dyadic(a)).collect();
    let (rm, re) = dyadic(r);
    let base = parts.iter().map(|p| p.1).min().unwrap().min(re);
    let scale = |(m, e): (u64, i32)| BigUint::from(m) << ((e - base) as usize);
    let big_r = BigInt::from(scale((rm, re)));
    let big_a: Vec<BigInt> = parts.iter().map(|&p| BigInt::from(scale(p))).collect();

    let dim = lengths.len() as u32;
    let mut numerator = BigInt::zero();
    // depth-first over subsets; supersets of a subset with sum >= r vanish
    let mut stack: Vec<(usize, BigInt, bool)> = vec![(0, BigInt::zero(), false)];
    while let Some((next, sum, odd)) = stack.pop() {
        let term = (&big_r - &sum).pow(dim);
        if odd {
            numerator -= term;
        } else {
            numerator += term;
        }
        for (k, a) in big_a.iter().enumerate().skip(next) {
            let s = &sum + a;
            if s < big_r {
                stack.push((k + 1, s, !odd));
            }
        }
    }
    let mut denominator = big_a.iter().fold(BigInt::from(1u8), |acc, a| acc * a);
    for k in 2..=dim {
        denominator *= k;
    }
    BigRational::new(numerator, denominator)
        .to_f64()
        .unwrap_or(f64::NAN)
        .clamp(0.0, 1.0)
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Outcome of comparing a shell volume against the `ε 2^N` majorant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShellCheck {
    pub dim: usize,
    pub radius: f64,
    pub eps: f64,
    pub shell: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `μ_N(r) - μ_N(r - ε)` against `ε 2^N`.
pub fn shell_check(
    center: &[f64],
    radius: f64,
    eps: f64,
    weights: &WeightSchedule,
) -> Result<ShellCheck> {
    if !(eps > 0.0 && eps < radius) {
        return Err(Error::invalid(format!(
            "shell width must satisfy 0 < eps < r, got eps = {eps}, r = {radius}"
        )));
    }
    let spec = FiniteBallSpec::new(center.to_vec(), radius, *weights)?;
    let density = sum_density(&spec.center, weights, DEFAULT_BREAKPOINT_BUDGET)?;
    let shell = density.cdf(radius) - density.cdf(radius - eps);
    let bound = eps * 2f64.powi(spec.dim() as i32);
    Ok(ShellCheck {
        dim: spec.dim(),
        radius,
        eps,
        shell,
        bound,
        holds: shell <= bound + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(center: &[f64], r: f64) -> FiniteBallSpec {
        FiniteBallSpec::new(center.to_vec(), r, WeightSchedule::default()).unwrap()
    }

    #[test]
    fn one_dimensional_interval() {
        assert_relative_eq!(volume_conv(&spec(&[0.0], 0.5)).unwrap(), 0.5);
        assert_relative_eq!(volume_ie(&spec(&[0.5], 0.25)).unwrap(), 0.5);
        assert_relative_eq!(volume_conv(&spec(&[0.5], 0.25)).unwrap(), 0.5);
    }

    #[test]
    fn simplex_corners() {
        // r^N / (N! Π w_n) while r <= w_N
        let two = 0.122_322_682_280_657_04;
        assert_relative_eq!(
            volume_conv(&spec(&[0.0, 0.0], 0.3)).unwrap(),
            two,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            volume_ie(&spec(&[0.0, 0.0], 0.3)).unwrap(),
            two,
            epsilon = 1e-15
        );
        let three = 0.008_297_844_727_977_324;
        let r = (-2.0f64).exp();
        assert_relative_eq!(
            volume_ie(&spec(&[0.0; 3], r)).unwrap(),
            three,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            volume_conv(&spec(&[0.0; 3], r)).unwrap(),
            three,
            epsilon = 1e-14
        );
    }

    #[test]
    fn covering_radius_gives_full_volume() {
        let c = [0.2f64, 0.9, 0.5, 0.0];
        let w = WeightSchedule::default();
        let reach: f64 = c
            .iter()
            .enumerate()
            .map(|(i, &v)| w.weight(i + 1) * v.max(1.0 - v))
            .sum();
        assert_eq!(volume_conv(&spec(&c, reach)).unwrap(), 1.0);
        assert_eq!(volume_ie(&spec(&c, reach * 1.01)).unwrap(), 1.0);
    }

    #[test]
    fn routes_agree_on_a_mixed_center() {
        let s = spec(&[0.3, 0.8, 0.1, 0.55, 0.9], 0.7);
        let a = volume_conv(&s).unwrap();
        let b = volume_ie(&s).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn ie_rejects_large_dimension() {
        let s = spec(&[0.5; 13], 0.5);
        assert_eq!(
            volume_ie(&s),
            Err(Error::DimensionTooLarge { dim: 13, max: 12 })
        );
    }

    #[test]
    fn spec_preconditions() {
        let w = WeightSchedule::default();
        assert!(FiniteBallSpec::new(vec![], 0.3, w).is_err());
        assert!(FiniteBallSpec::new(vec![0.2], 0.0, w).is_err());
        assert!(FiniteBallSpec::new(vec![1.2], 0.3, w).is_err());
    }

    #[test]
    fn shell_examples() {
        let w = WeightSchedule::default();
        let s = shell_check(&[0.0; 3], 0.5, 0.01, &w).unwrap();
        assert_relative_eq!(s.bound, 0.08);
        assert!(s.holds);
        assert!(s.shell > 0.0);

        let s = shell_check(&[0.0], 0.5, 0.1, &w).unwrap();
        assert_relative_eq!(s.shell, 0.1, epsilon = 1e-15);
        assert_relative_eq!(s.bound, 0.2);
        assert!(s.holds);

        let tiny = shell_check(&[0.0; 4], 0.5, 1e-9, &w).unwrap();
        assert!(tiny.shell < 1e-8);

        assert!(shell_check(&[0.0], 0.5, 0.6, &w).is_err());
    }

    #[test]
    fn dyadic_decomposition_is_exact() {
        for x in [1.0, 0.3, 1e-300, 5e-324, 123.456, std::f64::consts::E] {
            let (m, e) = dyadic(x);
            assert_eq!(m as f64 * 2f64.powi(e), x);
        }
    }
}
