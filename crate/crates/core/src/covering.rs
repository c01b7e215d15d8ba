//! Ball families versus cylinder families.
//!
//! Among balls of the cube, no family in which no member contains another can
//! pile up unboundedly at a point. Cylinders behave differently: the sets
//! `D_j = I_j × I_{j-1} × ... × I_1 × I × I × ...` with `I_i = [0, i/(i+1)]`
//! are pairwise non-nested, yet all contain `0`.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::Ball;
use crate::metric::{Point, WeightSchedule};

/// Sufficient test for `inner ⊂ outer`: `d(c_in, c_out) + r_in <= r_out`.
pub fn contains_ball(inner: &Ball, outer: &Ball, weights: &WeightSchedule) -> bool {
    weights.distance(inner.center(), outer.center()) + inner.radius() <= outer.radius()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
}

impl BallFamily {
    pub fn new(balls: Vec<Ball>) -> Self {
        BallFamily { balls }
    }

    pub fn overlap_count(&self, x: &Point, weights: &WeightSchedule) -> usize {
        self.balls.iter().filter(|b| b.contains(x, weights)).count()
    }
}

/// The family `D_1, ..., D_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CylinderFamily {
    pub k: usize,
}

impl CylinderFamily {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("a cylinder family needs k >= 1"));
        }
        Ok(CylinderFamily { k })
    }

    /// Right end of the interval `D_j` imposes on coordinate `n`
    /// (`i/(i+1)` with `i = j + 1 - n`, or 1 past coordinate `j`).
    pub fn upper(j: usize, n: usize) -> Ratio<u64> {
        if n > j {
            Ratio::one()
        } else {
            let i = (j + 1 - n) as u64;
            Ratio::new(i, i + 1)
        }
    }

    pub fn member_contains(j: usize, x: &Point) -> bool {
        (1..=j).all(|n| {
            let u = Self::upper(j, n);
            x.coordinate(n) <= *u.numer() as f64 / *u.denom() as f64
        })
    }

    pub fn overlap_count(&self, x: &Point) -> usize {
        (1..=self.k)
            .filter(|&j| Self::member_contains(j, x))
            .count()
    }

    /// Product measure `Π_{i<=j} i/(i+1)`.
    pub fn measure(j: usize) -> Ratio<u64> {
        (1..=j).fold(Ratio::one(), |acc, n| acc * Self::upper(j, n))
    }

    /// First coordinate at which `D_a` sticks out of `D_b`.
    pub fn witness(a: usize, b: usize) -> Option<usize> {
        (1..=a.max(b)).find(|&n| Self::upper(a, n) > Self::upper(b, n))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonContainment {
    /// `D_member ⊄ D_other`
    pub member: usize,
    pub other: usize,
    pub coordinate: usize,
    pub member_upper: String,
    pub other_upper: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderDemo {
    pub k: usize,
    pub measures: Vec<String>,
    pub witnesses: Vec<NonContainment>,
    pub common_point: String,
    pub overlap_at_common_point: usize,
    pub partial_sums: Vec<String>,
    pub partial_sums_f64: Vec<f64>,
    pub note: String,
}

pub fn cylinder_demo(k: usize) -> Result<CylinderDemo> {
    if k < 2 {
        return Err(Error::invalid("the cylinder demo needs k >= 2"));
    }
    let family = CylinderFamily::new(k)?;
    let measures = (1..=k)
        .map(|j| CylinderFamily::measure(j).to_string())
        .collect();
    let mut witnesses = Vec::new();
    for a in 1..=k {
        for b in (1..=k).filter(|&b| b != a) {
            let coordinate = CylinderFamily::witness(a, b)
                .ok_or_else(|| Error::invalid(format!("D_{a} is contained in D_{b}")))?;
            witnesses.push(NonContainment {
                member: a,
                other: b,
                coordinate,
                member_upper: CylinderFamily::upper(a, coordinate).to_string(),
                other_upper: CylinderFamily::upper(b, coordinate).to_string(),
            });
        }
    }
    let zero = Point::zero();
    let mut sum = BigRational::zero();
    let mut partial_sums = Vec::with_capacity(k);
    let mut partial_sums_f64 = Vec::with_capacity(k);
    for j in 1..=k {
        sum += BigRational::new(BigInt::one(), BigInt::from(j + 1));
        partial_sums.push(sum.to_string());
        partial_sums_f64.push(sum.to_f64().unwrap_or(f64::NAN));
    }
    Ok(CylinderDemo {
        k,
        measures,
        witnesses,
        common_point: zero.to_string(),
        overlap_at_common_point: family.overlap_count(&zero),
        partial_sums,
        partial_sums_f64,
        note: "the measures 1/(j+1) sum to a divergent harmonic tail, so the family has no finite total measure"
            .to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub members: usize,
    pub samples: u64,
    pub seed: u64,
    /// `histogram[c]` = number of samples lying in exactly `c` members
    pub histogram: Vec<u64>,
    pub max_overlap: usize,
    pub argmax: Option<Point>,
    /// recount at `argmax` agrees with `max_overlap`
    pub consistent: bool,
}

const AUDIT_BLOCK: u64 = 1 << 12;
/// Sampled points have this many random coordinates, then a random constant tail.
const SAMPLE_DEPTH: usize = 40;

/// Checks that no ball provably contains another, then samples the overlap
/// count at uniform points.
pub fn family_audit(
    family: &BallFamily,
    samples: u64,
    seed: u64,
    weights: &WeightSchedule,
) -> Result<AuditReport> {
    if family.balls.is_empty() {
        return Err(Error::invalid("the family is empty"));
    }
    for (i, inner) in family.balls.iter().enumerate() {
        for (j, outer) in family.balls.iter().enumerate() {
            if i != j && contains_ball(inner, outer, weights) {
                return Err(Error::Containment {
                    inner: i + 1,
                    outer: j + 1,
                });
            }
        }
    }
    let blocks = samples.div_ceil(AUDIT_BLOCK);
    type Part = (Vec<u64>, Option<(usize, Point)>);
    let parts: Vec<Part> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut hist = vec![0u64; family.balls.len() + 1];
            let mut best: Option<(usize, Point)> = None;
            for _ in b * AUDIT_BLOCK..((b + 1) * AUDIT_BLOCK).min(samples) {
                let prefix = (0..SAMPLE_DEPTH).map(|_| rng.gen::<f64>()).collect();
                let x = Point::new(prefix, rng.gen::<f64>()).expect("unit interval");
                let c = family.overlap_count(&x, weights);
                hist[c] += 1;
                if best.as_ref().is_none_or(|(m, _)| c > *m) {
                    best = Some((c, x));
                }
            }
            (hist, best)
        })
        .collect();
    let mut histogram = vec![0u64; family.balls.len() + 1];
    let mut best: Option<(usize, Point)> = None;
    for (hist, b) in parts {
        histogram.iter_mut().zip(hist).for_each(|(h, v)| *h += v);
        if let Some((c, x)) = b {
            if best.as_ref().is_none_or(|(m, _)| c > *m) {
                best = Some((c, x));
            }
        }
    }
    while histogram.len() > 1 && histogram.last() == Some(&0) {
        histogram.pop();
    }
    if samples == 0 {
        histogram.clear();
    }
    let max_overlap = best.as_ref().map_or(0, |(c, _)| *c);
    let consistent = match &best {
        Some((c, x)) => {
            let brute = family
                .balls
                .iter()
                .filter(|b| weights.distance(b.center(), x) < b.radius())
                .count();
            brute == *c && histogram.len() == c + 1
        }
        None => true,
    };
    Ok(AuditReport {
        members: family.balls.len(),
        samples,
        seed,
        histogram,
        max_overlap,
        argmax: best.map(|(_, x)| x),
        consistent,
    })
}
