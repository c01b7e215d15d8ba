//! Statistical estimates of truncated volumes, used as an independent check on
//! the exact and certified routes.
//!
//! Samples are drawn in fixed-size blocks. Block `b` uses a ChaCha stream keyed
//! by `(seed, b)`, so results are identical regardless of how blocks are
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Atom, RegionPi};
use crate::metric::WeightSchedule;
use crate::volume::FiniteBallSpec;

pub const MIN_SAMPLES: u64 = 1000;
const BLOCK: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMethod {
    /// independent uniform points
    Plain,
    /// scrambled Halton points
    Quasi,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    pub estimate: f64,
    /// `sqrt(p(1-p)/samples)`
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    #[serde(rename = "N_trunc")]
    pub n_trunc: usize,
    pub method: SampleMethod,
    /// set in quasi mode, where the binomial formula is only indicative
    pub stderr_heuristic: bool,
}

impl SampleReport {
    /// `estimate ± k · stderr`
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (
            self.estimate - k * self.stderr,
            self.estimate + k * self.stderr,
        )
    }
}

/// Hit rate of the truncated ball `B_N(θ, r)` under uniform sampling of `[0,1]^N`.
pub fn mc_volume(
    spec: &FiniteBallSpec,
    samples: u64,
    seed: u64,
    method: SampleMethod,
) -> Result<SampleReport> {
    let weights = spec.weights().weights(spec.dim());
    let center = spec.center().to_vec();
    let r = spec.radius();
    estimate(spec.dim(), samples, seed, method, |x| {
        let s: f64 = x
            .iter()
            .zip(&center)
            .zip(&weights)
            .map(|((v, c), w)| w * (v - c).abs())
            .sum();
        s < r
    })
}

/// Hit rate of the truncated union at depth `n` (see [`RegionPi::contains_truncated`]).
pub fn mc_region(
    region: &RegionPi,
    n: usize,
    weights: &WeightSchedule,
    samples: u64,
    seed: u64,
    method: SampleMethod,
) -> Result<SampleReport> {
    let w = weights.weights(n);
    let atoms: Vec<(bool, Vec<f64>, f64)> = region
        .atoms()
        .iter()
        .map(|a| {
            let b = a.ball();
            (
                matches!(a, Atom::Complement(_)),
                b.center().head(n),
                b.radius(),
            )
        })
        .collect();
    estimate(n, samples, seed, method, |x| {
        atoms.iter().any(|(complement, center, r)| {
            let s: f64 = x
                .iter()
                .zip(center)
                .zip(&w)
                .map(|((v, c), w)| w * (v - c).abs())
                .sum();
            (s < *r) != *complement
        })
    })
}

/// Estimate of the volume of `{x ∈ [0,1]^dim : hit(x)}`.
pub fn estimate<F>(
    dim: usize,
    samples: u64,
    seed: u64,
    method: SampleMethod,
    hit: F,
) -> Result<SampleReport>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    if samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "at least {MIN_SAMPLES} samples are required, got {samples}"
        )));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let blocks = samples.div_ceil(BLOCK);
    let halton = (method == SampleMethod::Quasi).then(|| Halton::new(dim, seed));
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(samples);
            let mut x = vec![0.0; dim];
            let mut count = 0u64;
            match &halton {
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(b);
                    for _ in start..end {
                        x.iter_mut().for_each(|v| *v = rng.gen::<f64>());
                        count += hit(&x) as u64;
                    }
                }
                Some(h) => {
                    for i in start..end {
                        h.point(i + 1, &mut x);
                        count += hit(&x) as u64;
                    }
                }
            }
            count
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(SampleReport {
        estimate: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        seed,
        n_trunc: dim,
        method,
        stderr_heuristic: method == SampleMethod::Quasi,
    })
}

/// Halton sequence with a random permutation of the digits at every position
/// and dimension, drawn from the seed.
struct Halton {
    bases: Vec<u32>,
    /// `perms[d][k]` permutes digit `k` (from the radix point) in dimension `d`
    perms: Vec<Vec<Vec<u32>>>,
}

impl Halton {
    fn new(dim: usize, seed: u64) -> Self {
        let bases = first_primes(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let perms = bases
            .iter()
            .map(|&b| {
                (0..digit_count(b))
                    .map(|_| {
                        let mut p: Vec<u32> = (0..b).collect();
                        for i in (1..p.len()).rev() {
                            p.swap(i, rng.gen_range(0..=i));
                        }
                        p
                    })
                    .collect()
            })
            .collect();
        Halton { bases, perms }
    }

    fn point(&self, index: u64, out: &mut [f64]) {
        for ((v, &b), perms) in out.iter_mut().zip(&self.bases).zip(&self.perms) {
            let inv = 1.0 / b as f64;
            let mut scale = inv;
            let mut i = index;
            let mut acc = 0.0;
            for p in perms {
                acc += p[(i % b as u64) as usize] as f64 * scale;
                i /= b as u64;
                scale *= inv;
            }
            *v = acc.min(1.0 - f64::EPSILON / 2.0);
        }
    }
}

/// Digits needed in base `b` to resolve about 2^-40.
fn digit_count(b: u32) -> usize {
    (40.0 * std::f64::consts::LN_2 / (b as f64).ln()).ceil() as usize
}

fn first_primes(count: usize) -> Vec<u32> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u32;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
