//! Kronecker curves `t ↦ ({tλ_1}, {tλ_2}, ...)` and how long they spend in
//! small cubes.
//!
//! For a frequency sequence `Λ` and indices `n_1 < ... < n_k` chosen so the
//! frequencies grow fast enough, the set of `t ∈ [0,1]` whose curve point lies
//! in a cube of edge `δ` has measure at most
//!
//! ```text
//! (2 + λ_{n_1}) Π_{j<k} (2 + δ λ_{n_j}^{-1} λ_{n_{j+1}}) δ λ_{n_k}^{-1}
//! ```
//!
//! This module selects such indices, evaluates that count, and measures the
//! hitting set directly by a certified scan over `t`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::Enclosure;
use crate::metric::{Point, WeightSchedule};
use crate::perm::enumerate_sigma;
use crate::volume::{volume_conv, FiniteBallSpec};

/// Default cap on the number of generated frequencies.
pub const DEFAULT_FREQUENCY_BUDGET: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyKind {
    /// `√2, √3, √5, ...`
    SqrtPrimes,
    /// a fixed list supplied by the caller
    Explicit,
}

/// Increasing positive frequencies `λ_1 < λ_2 < ...`, extended on demand.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencySequence {
    kind: FrequencyKind,
    values: Vec<f64>,
    #[serde(skip)]
    primes: Vec<u64>,
    #[serde(skip)]
    budget: usize,
}

impl FrequencySequence {
    /// The first `count` square roots of primes.
    pub fn sqrt_primes(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("count must be at least 1"));
        }
        let mut f = FrequencySequence {
            kind: FrequencyKind::SqrtPrimes,
            values: Vec::new(),
            primes: Vec::new(),
            budget: DEFAULT_FREQUENCY_BUDGET.max(count),
        };
        f.ensure(count)?;
        Ok(f)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !(values[0] > 0.0) || values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "frequencies must be positive and strictly increasing",
            ));
        }
        let budget = values.len();
        Ok(FrequencySequence {
            kind: FrequencyKind::Explicit,
            values,
            primes: Vec::new(),
            budget,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        if self.kind == FrequencyKind::SqrtPrimes {
            self.budget = budget.max(self.values.len());
        }
        self
    }

    pub fn kind(&self) -> &FrequencyKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `λ_n`, 1-based.
    pub fn get(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }

    /// The primes behind the first `len()` square-root frequencies.
    pub fn primes(&self) -> &[u64] {
        &self.primes[..self.primes.len().min(self.values.len())]
    }

    /// Makes at least `count` terms available.
    pub fn ensure(&mut self, count: usize) -> Result<()> {
        if count <= self.values.len() {
            return Ok(());
        }
        if self.kind == FrequencyKind::Explicit || count > self.budget {
            return Err(Error::FrequencyBudget {
                needed: f64::NAN,
                budget: self.budget,
            });
        }
        let limit = nth_prime_upper_bound(count);
        self.sieve(limit);
        self.values = self.primes[..count]
            .iter()
            .map(|&p| (p as f64).sqrt())
            .collect();
        Ok(())
    }

    /// Least index `n` with `λ_n > x`, or with `λ_n >= x` when `inclusive`.
    pub fn first_index_above(&mut self, x: f64, inclusive: bool) -> Result<usize> {
        let pass = |v: f64| if inclusive { v >= x } else { v > x };
        loop {
            if let Some(i) = self.values.iter().position(|&v| pass(v)) {
                return Ok(i + 1);
            }
            let next = (self.values.len() * 2).max(64).min(self.budget);
            if next <= self.values.len() {
                return Err(Error::FrequencyBudget {
                    needed: x,
                    budget: self.budget,
                });
            }
            if self.kind == FrequencyKind::SqrtPrimes
                && x * x > nth_prime_upper_bound(self.budget) as f64
            {
                return Err(Error::FrequencyBudget {
                    needed: x,
                    budget: self.budget,
                });
            }
            self.ensure(next)?;
        }
    }

    fn sieve(&mut self, limit: u64) {
        if self.primes.last().is_some_and(|&p| p >= limit) {
            return;
        }
        let limit = limit as usize;
        let mut composite = vec![false; limit + 1];
        let mut primes = Vec::new();
        for n in 2..=limit {
            if composite[n] {
                continue;
            }
            primes.push(n as u64);
            let mut m = n * n;
            while m <= limit {
                composite[m] = true;
                m += n;
            }
        }
        self.primes = primes;
    }

    /// `({tλ_1}, ..., {tλ_n})`.
    pub fn curve_point(&self, t: f64, n: usize) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!(
                "curve parameter must lie in [0, 1], got {t}"
            )));
        }
        if n > self.values.len() {
            return Err(Error::invalid(format!(
                "{n} coordinates requested, {} frequencies available",
                self.values.len()
            )));
        }
        Ok(self.values[..n].iter().map(|&l| (t * l).fract()).collect())
    }
}

/// `p_n < n (ln n + ln ln n)` for `n >= 6`.
fn nth_prime_upper_bound(n: usize) -> u64 {
    if n < 6 {
        return 13;
    }
    let n = n as f64;
    (n * (n.ln() + n.ln().ln())).ceil() as u64
}

/// Indices `n_1 < ... < n_k` with fast-growing frequencies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexSelection {
    pub delta: f64,
    /// 1-based
    pub indices: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub strengthened: bool,
}

impl IndexSelection {
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    /// Re-checks every growth constraint, returning the first violation.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if !(self.delta > 0.0 && self.delta < 0.1) {
            return fail(format!("delta {} outside (0, 0.1)", self.delta));
        }
        if self.lambdas.is_empty() || self.lambdas.len() != self.indices.len() {
            return fail("empty or inconsistent selection".into());
        }
        if !(self.lambdas[0] > 1.0) {
            return fail(format!(
                "first frequency {} is not above 1",
                self.lambdas[0]
            ));
        }
        for j in 1..self.lambdas.len() {
            let (prev, next) = (self.lambdas[j - 1], self.lambdas[j]);
            if self.indices[j] <= self.indices[j - 1] {
                return fail("indices must increase".into());
            }
            if !(1.0 / next < 0.25 * self.delta / prev) {
                return fail(format!(
                    "growth constraint fails between positions {j} and {}",
                    j + 1
                ));
            }
            let m = (j + 1) as f64;
            if self.strengthened && !(2.0 * prev / (self.delta * next) <= 2.0 / (m * m)) {
                return fail(format!(
                    "strengthened constraint fails between positions {j} and {}",
                    j + 1
                ));
            }
        }
        Ok(())
    }
}

/// Greedy choice of the least admissible indices.
///
/// Always `λ_{n_1} > 1` and `λ_{n_{j+1}} > 4 λ_{n_j} / δ`; when `strengthened`,
/// also `λ_{n_{j+1}} >= (j+1)^2 λ_{n_j} / δ`, which caps the counting bound by
/// `δ^k c`.
pub fn select_indices(
    delta: f64,
    k: usize,
    freqs: &mut FrequencySequence,
    strengthened: bool,
) -> Result<IndexSelection> {
    if !(delta > 0.0 && delta < 0.1) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 0.1), got {delta}"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut indices = vec![freqs.first_index_above(1.0, false)?];
    let mut lambdas = vec![freqs.get(indices[0]).expect("just found")];
    for j in 1..k {
        let prev = lambdas[j - 1];
        let mut n = freqs.first_index_above(4.0 * prev / delta, false)?;
        if strengthened {
            let m = (j + 1) as f64;
            n = n.max(freqs.first_index_above(m * m * prev / delta, true)?);
        }
        // rounding in the thresholds must not admit a violating index
        loop {
            freqs.ensure(n)?;
            let next = freqs.get(n).expect("ensured");
            let m = (j + 1) as f64;
            let ok = 1.0 / next < 0.25 * delta / prev
                && (!strengthened || 2.0 * prev / (delta * next) <= 2.0 / (m * m));
            if ok {
                break;
            }
            n += 1;
        }
        indices.push(n);
        lambdas.push(freqs.get(n).expect("ensured"));
    }
    let sel = IndexSelection {
        delta,
        indices,
        lambdas,
        strengthened,
    };
    sel.verify()?;
    Ok(sel)
}

/// `(2 + λ_{n_1}) Π_{j<k} (2 + δ λ_{n_j}^{-1} λ_{n_{j+1}}) δ λ_{n_k}^{-1}`.
pub fn counting_bound(sel: &IndexSelection) -> f64 {
    let d = sel.delta;
    let l = &sel.lambdas;
    let mut b = 2.0 + l[0];
    for j in 1..l.len() {
        b *= 2.0 + d * l[j] / l[j - 1];
    }
    b * d / l[l.len() - 1]
}

/// `Π_{m=1}^{terms} (1 + 2/m^2)`.
pub fn product_constant_partial(terms: u64) -> f64 {
    // logarithms, smallest first, keep the long product accurate
    (1..=terms)
        .rev()
        .map(|m| (2.0 / (m as f64 * m as f64)).ln_1p())
        .sum::<f64>()
        .exp()
}

/// Certified bracket `[P_M, P_M e^{2/M}]` around the infinite product, from
/// `Π_{m>M} (1 + 2/m^2) <= exp(Σ_{m>M} 2/m^2) <= e^{2/M}`.
pub fn product_constant_bracket(terms: u64) -> (f64, f64) {
    let p = product_constant_partial(terms);
    (p, p * (2.0 / terms as f64).exp())
}

/// `c = Π_{m>=1} (1 + 2/m^2) = sinh(π√2) / (π√2)`.
pub fn product_constant() -> f64 {
    let x = std::f64::consts::PI * std::f64::consts::SQRT_2;
    x.sinh() / x
}

/// The constant in the final covering estimate, `9c`.
pub fn covering_constant() -> f64 {
    9.0 * product_constant()
}

/// Certified enclosure of the measure of
/// `{t ∈ [0,1] : |{t λ_{n_m}} - α_m| <= δ/2 for all m}`.
///
/// `resolution` is the initial step in `t` and must not exceed `δ / (4 λ_{n_k})`.
pub fn hitting_measure(
    cube_center: &[f64],
    sel: &IndexSelection,
    resolution: f64,
) -> Result<Enclosure> {
    if cube_center.len() != sel.k() {
        return Err(Error::invalid(format!(
            "cube center has {} coordinates, selection has {}",
            cube_center.len(),
            sel.k()
        )));
    }
    let max = sel.delta / (4.0 * sel.lambdas[sel.k() - 1]);
    if !(resolution > 0.0 && resolution <= max) {
        return Err(Error::ResolutionTooCoarse { resolution, max });
    }
    window_measure(cube_center, &sel.lambdas, sel.delta, resolution)
}

/// Boundary cells are bisected this many times below the scan step.
const REFINE_DEPTH: u32 = 30;
const CHUNK: usize = 4096;

/// [`hitting_measure`] for arbitrary frequencies and window edge `0 < delta <= 1`.
pub fn window_measure(
    alpha: &[f64],
    lambdas: &[f64],
    delta: f64,
    resolution: f64,
) -> Result<Enclosure> {
    if alpha.is_empty() || alpha.len() != lambdas.len() {
        return Err(Error::invalid("need one window center per frequency"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!(
            "window edge must lie in (0, 1], got {delta}"
        )));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::invalid(format!(
            "resolution must lie in (0, 1], got {resolution}"
        )));
    }
    let windows: Vec<(f64, f64)> = alpha
        .iter()
        .map(|&a| (a - delta / 2.0, a + delta / 2.0))
        .collect();
    let steps = (1.0 / resolution).ceil() as usize;
    let chunks = steps.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut inside = 0.0;
            let mut boundary = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(steps) {
                let a = i as f64 * resolution;
                let b = ((i + 1) as f64 * resolution).min(1.0);
                scan(
                    a,
                    b,
                    lambdas,
                    &windows,
                    REFINE_DEPTH,
                    &mut inside,
                    &mut boundary,
                );
            }
            (inside, boundary)
        })
        .collect();
    let inside: f64 = parts.iter().map(|p| p.0).sum();
    let boundary: f64 = parts.iter().map(|p| p.1).sum();
    let slack = 1e-12;
    Ok(Enclosure {
        lo: (inside - slack).max(0.0),
        hi: (inside + boundary + slack).min(1.0),
        n_used: lambdas.len(),
        certified: true,
        converged: true,
    })
}

#[derive(PartialEq)]
enum Class {
    Inside,
    Outside,
    Boundary,
}

fn scan(
    a: f64,
    b: f64,
    lambdas: &[f64],
    windows: &[(f64, f64)],
    depth: u32,
    inside: &mut f64,
    boundary: &mut f64,
) {
    match classify(a, b, lambdas, windows) {
        Class::Inside => *inside += b - a,
        Class::Outside => {}
        Class::Boundary if depth == 0 => *boundary += b - a,
        Class::Boundary => {
            let mid = 0.5 * (a + b);
            scan(a, mid, lambdas, windows, depth - 1, inside, boundary);
            scan(mid, b, lambdas, windows, depth - 1, inside, boundary);
        }
    }
}

/// Classifies `[a, b]` against the window product. On `[a, b]` the map
/// `t ↦ {tλ}` is an increasing line segment, broken at each integer of `tλ`.
fn classify(a: f64, b: f64, lambdas: &[f64], windows: &[(f64, f64)]) -> Class {
    let mut all_inside = true;
    for (&l, &(w_lo, w_hi)) in lambdas.iter().zip(windows) {
        let eta = 4.0 * f64::EPSILON * (b * l).max(1.0);
        let (ua, ub) = (a * l - eta, b * l + eta);
        let (fa, fb) = (ua.floor(), ub.floor());
        // ranges of the fractional part, widened for rounding
        let ranges: Vec<(f64, f64)> = if fb - fa >= 2.0 {
            vec![(0.0, 1.0)]
        } else if fb > fa {
            vec![((ua - fa).max(0.0), 1.0), (0.0, (ub - fb).min(1.0))]
        } else {
            vec![((ua - fa).max(0.0), (ub - fa).min(1.0))]
        };
        let disjoint = ranges.iter().all(|&(lo, hi)| hi < w_lo || lo > w_hi);
        if disjoint {
            return Class::Outside;
        }
        let contained = ranges.iter().all(|&(lo, hi)| lo >= w_lo && hi <= w_hi);
        all_inside &= contained;
    }
    if all_inside {
        Class::Inside
    } else {
        Class::Boundary
    }
}

/// Distinctness of two curve points under the first `perms` permutations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitCheck {
    pub t1: f64,
    pub t2: f64,
    pub k: usize,
    pub perms: usize,
    pub distinct: bool,
    /// smallest sup-norm gap over the checked permutations
    pub min_separation: f64,
}

/// Checks that the `k`-prefix of the curve at `t1` differs (by more than
/// `1e-9` somewhere) from every permuted `k`-prefix of the curve at `t2`.
pub fn orbit_distinctness_check(
    t1: f64,
    t2: f64,
    freqs: &mut FrequencySequence,
    k: usize,
    perms: usize,
) -> Result<OrbitCheck> {
    if t1 == t2 {
        return Err(Error::invalid("the two curve parameters must differ"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let sigma = enumerate_sigma(perms)?;
    let reach = sigma
        .iter()
        .map(|s| s.support_bound())
        .max()
        .unwrap_or(0)
        .max(k);
    freqs.ensure(reach)?;
    let x = freqs.curve_point(t1, k)?;
    let y = freqs.curve_point(t2, reach)?;
    let mut min_separation = f64::INFINITY;
    for s in &sigma {
        let gap = (1..=k)
            .map(|n| (x[n - 1] - y[s.apply(n) - 1]).abs())
            .fold(0.0, f64::max);
        min_separation = min_separation.min(gap);
    }
    Ok(OrbitCheck {
        t1,
        t2,
        k,
        perms,
        distinct: min_separation > 1e-9,
        min_separation,
    })
}

/// Kolmogorov distance between `{t_i λ}` on the grid `t_i = (i + 1/2) T / grid`
/// of `[0, T]` and the uniform law on `[0, 1]`.
pub fn equidistribution_gap(lambda: f64, horizon: f64, grid: usize) -> f64 {
    let step = horizon / grid as f64;
    let mut v: Vec<f64> = (0..grid)
        .map(|i| ((i as f64 + 0.5) * step * lambda).fract())
        .collect();
    v.sort_by(f64::total_cmp);
    let n = grid as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

/// Hitting measures summed over the `δ`-grid cubes meeting a target ball of `[0,1]^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridAggregate {
    pub cubes: usize,
    /// volume of the target ball
    pub epsilon1: f64,
    pub sum_lo: f64,
    pub sum_hi: f64,
    /// `3 c ε_1`
    pub bound: f64,
    pub holds: bool,
}

/// Covers the ball `B_k(center, radius)` (weighted metric on `[0,1]^k`) by
/// the cubes of the `δ`-grid that meet it and sums their hitting measures.
pub fn grid_aggregate(
    center: &[f64],
    radius: f64,
    sel: &IndexSelection,
    resolution: f64,
) -> Result<GridAggregate> {
    let k = sel.k();
    let target = FiniteBallSpec::new(center.to_vec(), radius, WeightSchedule::default())?;
    if target.dim() != k {
        return Err(Error::invalid(format!(
            "target has dimension {}, selection has {k}",
            target.dim()
        )));
    }
    let weights = target.weights().weights(k);
    let per_axis = (1.0 / sel.delta - 1e-9).ceil() as usize;
    let mut cubes = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let lo: Vec<f64> = idx.iter().map(|&i| i as f64 * sel.delta).collect();
        let near: f64 = (0..k)
            .map(|m| {
                let hi = (lo[m] + sel.delta).min(1.0);
                weights[m] * (lo[m] - center[m]).max(center[m] - hi).max(0.0)
            })
            .sum();
        if near < radius {
            cubes.push(
                lo.iter()
                    .map(|&l| l + sel.delta / 2.0)
                    .collect::<Vec<f64>>(),
            );
        }
        let mut m = 0;
        while m < k {
            idx[m] += 1;
            if idx[m] < per_axis {
                break;
            }
            idx[m] = 0;
            m += 1;
        }
        if m == k {
            break;
        }
    }
    let enclosures = cubes
        .iter()
        .map(|alpha| hitting_measure(alpha, sel, resolution))
        .collect::<Result<Vec<_>>>()?;
    let epsilon1 = volume_conv(&target)?;
    let sum_lo = enclosures.iter().map(|e| e.lo).sum();
    let sum_hi: f64 = enclosures.iter().map(|e| e.hi).sum();
    let bound = 3.0 * product_constant() * epsilon1;
    Ok(GridAggregate {
        cubes: cubes.len(),
        epsilon1,
        sum_lo,
        sum_hi,
        bound,
        holds: sum_hi <= bound,
    })
}

/// Curve point as an eventually-zero point of the cube.
pub fn curve_prefix_point(freqs: &FrequencySequence, t: f64, n: usize) -> Result<Point> {
    Point::new(freqs.curve_point(t, n)?, 0.0)
}
