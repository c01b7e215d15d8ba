//! Exact piecewise-polynomial probability densities.
//!
//! A density is a strictly increasing list of breakpoints `b_0 < ... < b_m`
//! and, for every interval `[b_{i-1}, b_i)`, a polynomial in the local variable
//! `u - b_{i-1}`. Sums of independent terms `w |X - θ|` with `X` uniform have
//! densities of exactly this form, and convolution keeps them in it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly;

/// Default cap on the number of breakpoints a convolution may produce.
pub const DEFAULT_BREAKPOINT_BUDGET: usize = 1 << 20;

/// Breakpoints closer than this fraction of the support length are merged.
const MERGE_TOLERANCE: f64 = 1e-14;

/// Candidate breakpoint lists beyond this length are refused outright.
const CANDIDATE_HARD_CAP: usize = 1 << 27;

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePolyDensity {
    breakpoints: Vec<f64>,
    /// coefficients per piece; every piece has `stride` slots
    stride: usize,
    coeffs: Vec<f64>,
    /// `cumulative[i]` is the mass left of `breakpoints[i]`
    cumulative: Vec<f64>,
}

/// Serialized form: `{breakpoints, pieces}`.
#[derive(Clone, Debug, Serialize)]
pub struct DensityRecord {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Vec<f64>>,
}

impl PiecewisePolyDensity {
    /// Builds and validates a density from explicit pieces.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() + 1 != breakpoints.len() {
            return Err(Error::invalid(
                "a density needs m + 1 breakpoints for m >= 1 pieces",
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid(
                "breakpoints must be finite and strictly increasing",
            ));
        }
        if breakpoints[0] < 0.0 {
            return Err(Error::invalid("densities live on [0, ∞)"));
        }
        let stride = pieces.iter().map(Vec::len).max().unwrap_or(1).max(1);
        let mut coeffs = vec![0.0; pieces.len() * stride];
        for (i, p) in pieces.iter().enumerate() {
            coeffs[i * stride..i * stride + p.len()].copy_from_slice(p);
        }
        let density = Self::assemble(breakpoints, stride, coeffs);
        let mass = density.total_mass();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("total mass is {mass}, expected 1")));
        }
        for i in 0..density.piece_count() {
            let (a, b) = (density.breakpoints[i], density.breakpoints[i + 1]);
            for s in 0..=4 {
                let x = a + (b - a) * s as f64 / 4.0;
                if poly::eval(density.piece(i), x - a) < -1e-12 {
                    return Err(Error::invalid(format!("density is negative near {x}")));
                }
            }
        }
        Ok(density)
    }

    fn assemble(breakpoints: Vec<f64>, stride: usize, coeffs: Vec<f64>) -> Self {
        let m = breakpoints.len() - 1;
        let mut cumulative = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..m {
            let len = breakpoints[i + 1] - breakpoints[i];
            acc += poly::integral(&coeffs[i * stride..(i + 1) * stride], len);
            cumulative.push(acc);
        }
        PiecewisePolyDensity {
            breakpoints,
            stride,
            coeffs,
            cumulative,
        }
    }

    /// Law of `w |X - θ|` for `X` uniform on `[0, 1]`.
    ///
    /// Value `2/w` on `[0, w·min(θ, 1-θ))`, then `1/w` up to `w·max(θ, 1-θ)`.
    pub fn term_density(theta: f64, w: f64) -> Result<Self> {
        Self::folded_uniform(theta, w, 0.0, 1.0)
    }

    /// Law of `w |X - θ|` for `X` uniform on `[lo, hi]`.
    pub fn folded_uniform(theta: f64, w: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid(format!(
                "center coordinate {theta} outside [0, 1]"
            )));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::invalid(format!("weight must be positive, got {w}")));
        }
        if !(lo < hi) {
            return Err(Error::invalid(format!("empty interval [{lo}, {hi}]")));
        }
        let height = 1.0 / (w * (hi - lo));
        let (breakpoints, values) = if theta <= lo {
            (vec![w * (lo - theta), w * (hi - theta)], vec![height])
        } else if theta >= hi {
            (vec![w * (theta - hi), w * (theta - lo)], vec![height])
        } else {
            let near = (theta - lo).min(hi - theta);
            let far = (theta - lo).max(hi - theta);
            if near == far {
                (vec![0.0, w * near], vec![2.0 * height])
            } else {
                (vec![0.0, w * near, w * far], vec![2.0 * height, height])
            }
        };
        Ok(Self::assemble(breakpoints, 1, values))
    }

    /// Uniform density on `[a, b]`.
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid uniform support [{a}, {b}]"
            )));
        }
        Ok(Self::assemble(vec![a, b], 1, vec![1.0 / (b - a)]))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn piece_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn piece(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.stride..(i + 1) * self.stride]
    }

    pub fn degree(&self) -> usize {
        self.stride - 1
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Index of the piece containing `x`, if `x` lies in the support.
    fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if !(x >= lo && x < hi) {
            return None;
        }
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        Some(idx - 1)
    }

    /// Density value at `x` (zero outside the support).
    pub fn eval(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => poly::eval(self.piece(i), x - self.breakpoints[i]),
            None => 0.0,
        }
    }

    /// `P(S <= r)`, clamped to `[0, 1]`.
    pub fn cdf(&self, r: f64) -> f64 {
        let (lo, hi) = self.support();
        if r <= lo {
            return 0.0;
        }
        if r >= hi {
            return 1.0;
        }
        let i = self.locate(r).expect("r inside the support");
        let partial = poly::integral(self.piece(i), r - self.breakpoints[i]);
        (self.cumulative[i] + partial).clamp(0.0, 1.0)
    }

    pub fn to_record(&self) -> DensityRecord {
        DensityRecord {
            breakpoints: self.breakpoints.clone(),
            pieces: (0..self.piece_count())
                .map(|i| self.piece(i).to_vec())
                .collect(),
        }
    }

    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.convolve_with_budget(other, DEFAULT_BREAKPOINT_BUDGET)
    }

    /// Exact density of the sum of independent variables with densities `self`
    /// and `other`. Result pieces have degree `deg f + deg g + 1`.
    pub fn convolve_with_budget(&self, other: &Self, budget: usize) -> Result<Self> {
        let candidates = self.breakpoints.len() * other.breakpoints.len();
        if candidates > CANDIDATE_HARD_CAP {
            return Err(Error::BreakpointBudget {
                required: candidates,
                budget,
            });
        }
        let mut sums = Vec::with_capacity(candidates);
        for &a in &self.breakpoints {
            for &b in &other.breakpoints {
                sums.push(a + b);
            }
        }
        sums.sort_unstable_by(f64::total_cmp);
        let (f_lo, f_hi) = self.support();
        let (g_lo, g_hi) = other.support();
        let span = (f_hi - f_lo) + (g_hi - g_lo);
        let end = f_hi + g_hi;
        let tol = MERGE_TOLERANCE * span;
        let mut merged: Vec<f64> = Vec::with_capacity(sums.len());
        for s in sums {
            match merged.last() {
                Some(&last) if s - last <= tol => {}
                _ => merged.push(s),
            }
        }
        *merged.last_mut().unwrap() = end;
        if merged.len() < 2 {
            merged = vec![f_lo + g_lo, end];
        }
        if merged.len() > budget {
            return Err(Error::BreakpointBudget {
                required: merged.len(),
                budget,
            });
        }

        let stride = self.stride + other.stride;
        let mut coeffs = vec![0.0; (merged.len() - 1) * stride];
        let mut acc = Accumulator {
            breakpoints: &merged,
            stride,
            coeffs: &mut coeffs,
        };

        // Moments of reversed pieces are reused across all partners.
        let f_len: Vec<f64> = self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
        let g_len: Vec<f64> = other.breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
        let f_rev: Vec<Vec<f64>> = (0..self.piece_count())
            .map(|i| poly::compose_affine(self.piece(i), f_len[i], -1.0))
            .collect();
        let g_rev: Vec<Vec<f64>> = (0..other.piece_count())
            .map(|j| poly::compose_affine(other.piece(j), g_len[j], -1.0))
            .collect();
        let f_mom: Vec<Vec<f64>> = (0..self.piece_count())
            .map(|i| poly::reversed_moments(self.piece(i), f_len[i], other.stride))
            .collect();
        let g_mom: Vec<Vec<f64>> = (0..other.piece_count())
            .map(|j| poly::reversed_moments(other.piece(j), g_len[j], self.stride))
            .collect();

        for i in 0..self.piece_count() {
            let p = self.piece(i);
            if p.iter().all(|&c| c == 0.0) {
                continue;
            }
            let (a, l1) = (self.breakpoints[i], f_len[i]);
            for j in 0..other.piece_count() {
                let q = other.piece(j);
                if q.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let (b, l2) = (other.breakpoints[j], g_len[j]);
                let origin = a + b;
                let (lmin, lmax) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };

                // rising edge: t in [0, lmin)
                acc.add(origin, origin + lmin, &poly::truncated_convolution(p, q));

                // plateau: t in [lmin, lmax)
                if lmax > lmin {
                    let plateau = if l1 <= l2 {
                        plateau_poly(q, &f_mom[i])
                    } else {
                        plateau_poly(p, &g_mom[j])
                    };
                    acc.add(origin + lmin, origin + lmax, &plateau);
                }

                // falling edge: t in [lmax, l1 + l2), via s = l1 + l2 - t
                let falling = poly::truncated_convolution(&f_rev[i], &g_rev[j]);
                acc.add(
                    origin + lmax,
                    origin + l1 + l2,
                    &poly::compose_affine(&falling, lmin, -1.0),
                );
            }
        }

        Ok(Self::assemble(merged, stride, coeffs))
    }
}

/// Coefficients in `τ` of `Σ_k c_k Σ_l C(k,l) τ^l M_{k-l}` where `M` are the
/// reversed moments of the shorter piece.
fn plateau_poly(longer: &[f64], moments: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; longer.len()];
    for (k, &ck) in longer.iter().enumerate() {
        if ck == 0.0 {
            continue;
        }
        for (l, slot) in out.iter_mut().enumerate().take(k + 1) {
            *slot += ck * poly::binomial(k, l) * moments[k - l];
        }
    }
    out
}

struct Accumulator<'a> {
    breakpoints: &'a [f64],
    stride: usize,
    coeffs: &'a mut [f64],
}

impl Accumulator<'_> {
    fn nearest(&self, x: f64) -> usize {
        let bps = self.breakpoints;
        let idx = bps.partition_point(|&b| b < x);
        if idx == 0 {
            0
        } else if idx == bps.len() || x - bps[idx - 1] <= bps[idx] - x {
            idx - 1
        } else {
            idx
        }
    }

    /// Adds the polynomial `p(t - start)` on `[start, end)` to every result
    /// piece it covers, re-expanded about each piece's left breakpoint.
    fn add(&mut self, start: f64, end: f64, p: &[f64]) {
        let first = self.nearest(start);
        let last = self.nearest(end);
        for k in first..last {
            let shifted = poly::compose_affine(p, self.breakpoints[k] - start, 1.0);
            let slot = &mut self.coeffs[k * self.stride..(k + 1) * self.stride];
            for (dst, src) in slot.iter_mut().zip(shifted) {
                *dst += src;
            }
        }
    }
}
