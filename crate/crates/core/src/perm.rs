//! Finite permutations of the positive integers and their action on points.
//!
//! Convention: `compose(s, t)(n) = s(t(n))` and `act(s, x)_n = x_{s(n)}`, so
//! `act(compose(s, t), x) == act(t, act(s, x))`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metric::Point;

/// A bijection of `{1, 2, ...}` fixing every `n` beyond some `m`.
///
/// Stored as the images of `1..=m` with `σ(m) != m`, so each permutation has
/// exactly one representation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FinitePermutation {
    mapping: Vec<usize>,
}

impl FinitePermutation {
    pub fn identity() -> Self {
        FinitePermutation {
            mapping: Vec::new(),
        }
    }

    /// From the images of `1..=m` (1-based).
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let m = mapping.len();
        let mut seen = vec![false; m + 1];
        for &v in &mapping {
            if v == 0 || v > m || seen[v] {
                return Err(Error::invalid(format!(
                    "{mapping:?} is not a bijection of 1..={m}"
                )));
            }
            seen[v] = true;
        }
        Ok(Self::normalized(mapping))
    }

    fn normalized(mut mapping: Vec<usize>) -> Self {
        while mapping.last() == Some(&mapping.len()) {
            mapping.pop();
        }
        FinitePermutation { mapping }
    }

    /// Images of `1..=m`, where `m` is the largest moved point (0 for the identity).
    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn support_bound(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn apply(&self, n: usize) -> usize {
        debug_assert!(n >= 1);
        self.mapping.get(n - 1).copied().unwrap_or(n)
    }

    /// `n ↦ self(other(n))`.
    pub fn compose(&self, other: &Self) -> Self {
        let m = self.support_bound().max(other.support_bound());
        Self::normalized((1..=m).map(|n| self.apply(other.apply(n))).collect())
    }

    pub fn invert(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &v) in self.mapping.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        FinitePermutation { mapping: inv }
    }

    /// `(σx)_n = x_{σ(n)}`.
    pub fn act(&self, x: &Point) -> Point {
        let len = x.prefix().len().max(self.support_bound());
        let prefix = (1..=len).map(|n| x.coordinate(self.apply(n))).collect();
        Point::new(prefix, x.tail()).expect("coordinates come from a valid point")
    }

    /// Disjoint cycles of length at least 2, each starting at its smallest
    /// element, ordered by that element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.mapping.len() + 1];
        let mut out = Vec::new();
        for start in 1..=self.mapping.len() {
            if seen[start] || self.apply(start) == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut n = self.apply(start);
            while n != start {
                seen[n] = true;
                cycle.push(n);
                n = self.apply(n);
            }
            out.push(cycle);
        }
        out
    }
}

impl fmt::Display for FinitePermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return f.write_str("()");
        }
        for c in cycles {
            let body: Vec<String> = c.iter().map(|n| n.to_string()).collect();
            write!(f, "({})", body.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for FinitePermutation {
    type Err = Error;

    /// Disjoint cycle notation, e.g. `(1 2)(4 5 6)`; `()` is the identity.
    fn from_str(s: &str) -> Result<Self> {
        let malformed = |reason: String| Error::Parse {
            literal: s.to_string(),
            reason,
        };
        let mut images: Vec<(usize, usize)> = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            let inner = rest
                .strip_prefix('(')
                .ok_or_else(|| malformed("expected `(`".into()))?;
            let close = inner
                .find(')')
                .ok_or_else(|| malformed("unclosed cycle".into()))?;
            let cycle = inner[..close]
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| match t.parse::<usize>() {
                    Ok(n) if n >= 1 => Ok(n),
                    _ => Err(malformed(format!("`{t}` is not a positive integer"))),
                })
                .collect::<Result<Vec<_>>>()?;
            for (i, &n) in cycle.iter().enumerate() {
                images.push((n, cycle[(i + 1) % cycle.len()]));
            }
            rest = inner[close + 1..].trim_start();
        }
        let m = images.iter().map(|&(n, _)| n).max().unwrap_or(0);
        let mut mapping: Vec<usize> = (1..=m).collect();
        let mut touched = vec![false; m + 1];
        for (n, img) in images {
            if touched[n] {
                return Err(malformed(format!("{n} appears in more than one place")));
            }
            touched[n] = true;
            mapping[n - 1] = img;
        }
        Ok(Self::normalized(mapping))
    }
}

impl Serialize for FinitePermutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The first `k` elements of the canonical enumeration of all finite
/// permutations: by largest moved point `m` ascending, then lexicographically
/// by the images of `1..=m`.
pub fn enumerate_sigma(k: usize) -> Result<Vec<FinitePermutation>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(SigmaIter::default().take(k).collect())
}

/// Unbounded iterator over the canonical enumeration.
#[derive(Clone, Debug, Default)]
pub struct SigmaIter {
    /// next candidate mapping of `1..=m`; `None` before the identity is emitted
    current: Option<Vec<usize>>,
}

impl Iterator for SigmaIter {
    type Item = FinitePermutation;

    fn next(&mut self) -> Option<FinitePermutation> {
        let Some(cur) = self.current.as_mut() else {
            self.current = Some(vec![1, 2]);
            return Some(FinitePermutation::identity());
        };
        loop {
            if !next_permutation(cur) {
                let m = cur.len() + 1;
                *cur = (1..=m).collect();
                continue;
            }
            if cur.last() != Some(&cur.len()) {
                return Some(FinitePermutation {
                    mapping: cur.clone(),
                });
            }
        }
    }
}

/// Advances to the next permutation in lexicographic order; `false` after the last.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len())
        .rev()
        .find(|&j| v[j] > v[i - 1])
        .expect("exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// `[σ_1 θ, ..., σ_k θ]` over the canonical enumeration.
pub fn orbit_prefix(theta: &Point, k: usize) -> Result<Vec<Point>> {
    Ok(enumerate_sigma(k)?.iter().map(|s| s.act(theta)).collect())
}
