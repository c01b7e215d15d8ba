//! Finite unions of balls and ball complements, by certified branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::{Ball, Enclosure, MeasureContext, ROUNDING_SLACK};
use crate::error::{Error, Result};
use crate::metric::WeightSchedule;
use crate::piecewise::PiecewisePolyDensity;

/// Generator of the ball algebra: a ball or the complement of one.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Atom {
    Ball(Ball),
    Complement(Ball),
}

impl Atom {
    pub fn ball(&self) -> &Ball {
        match self {
            Atom::Ball(b) | Atom::Complement(b) => b,
        }
    }
}

/// A finite union of atoms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionPi {
    atoms: Vec<Atom>,
}

impl RegionPi {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("a region needs at least one atom"));
        }
        Ok(RegionPi { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn min_radius(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.ball().radius())
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership of `x ∈ [0,1]^N` in the truncated union: each ball becomes
    /// `B_N(θ, r)` and each complement becomes `[0,1]^N \ B_N(θ, r)`.
    pub fn contains_truncated(&self, x: &[f64], weights: &WeightSchedule) -> bool {
        self.atoms.iter().any(|atom| {
            let b = atom.ball();
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| weights.weight(i + 1) * (v - b.center().coordinate(i + 1)).abs())
                .sum();
            match atom {
                Atom::Ball(_) => s < b.radius(),
                Atom::Complement(_) => s >= b.radius(),
            }
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct UnionOptions {
    pub tol: f64,
    /// maximum number of evaluated boxes
    pub node_budget: usize,
}

impl Default for UnionOptions {
    fn default() -> Self {
        UnionOptions {
            tol: 1e-2,
            node_budget: 4096,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UnionReport {
    #[serde(flatten)]
    pub enclosure: Enclosure,
    pub nodes: usize,
    /// exact tail sum `τ_N` used as the slack
    pub tail_slack: f64,
    /// `k · τ_N · 2^N`
    pub majorant: f64,
    pub within_majorant: bool,
}

/// Per-box densities are capped far below the single-ball budget: a box that
/// needs more breakpoints is cheaper to split than to resolve.
const BOX_BREAKPOINT_BUDGET: usize = 1 << 12;

/// Atoms sharing one truncated center; their union depends on the distance
/// to that center alone.
struct CenterGroup {
    center: Vec<f64>,
    /// radii of ball atoms
    balls: Vec<f64>,
    /// radii of complement atoms
    complements: Vec<f64>,
}

impl CenterGroup {
    fn collect(atoms: &[Atom], n: usize) -> Vec<CenterGroup> {
        let mut groups: Vec<CenterGroup> = Vec::new();
        for atom in atoms {
            let center = atom.ball().center().head(n);
            let idx = match groups.iter().position(|g| g.center == center) {
                Some(i) => i,
                None => {
                    groups.push(CenterGroup {
                        center,
                        balls: Vec::new(),
                        complements: Vec::new(),
                    });
                    groups.len() - 1
                }
            };
            match atom {
                Atom::Ball(b) => groups[idx].balls.push(b.radius()),
                Atom::Complement(b) => groups[idx].complements.push(b.radius()),
            }
        }
        groups
    }
}

struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    volume: f64,
    frac_lo: f64,
    frac_hi: f64,
    refinable: bool,
    seq: usize,
}

impl Cell {
    fn gap(&self) -> f64 {
        self.volume * (self.frac_hi - self.frac_lo)
    }
}

struct Ranked(Cell);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        // largest gap first, then oldest
        self.0
            .gap()
            .total_cmp(&other.0.gap())
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

impl MeasureContext {
    /// Smallest depth `N <= max_dim` with `τ_N < min r` whose boundary shells
    /// (`≈ 2 τ_N` per atom) use at most half of `tol`.
    pub fn union_truncation(&self, region: &RegionPi, tol: f64) -> Result<usize> {
        let k = region.atoms.len() as f64;
        let min_r = region.min_radius();
        let mut admissible = None;
        for n in 1..=self.max_dim.max(1) {
            let tau = self.weights.tail_sum(n);
            if tau >= min_r {
                continue;
            }
            admissible = Some(n);
            if 2.0 * k * tau <= tol / 2.0 {
                return Ok(n);
            }
        }
        admissible.ok_or_else(|| {
            Error::invalid(format!(
                "no truncation depth up to {} has tail slack below the smallest radius {min_r}",
                self.max_dim
            ))
        })
    }

    /// Certified enclosure of the measure of a finite union of atoms.
    ///
    /// The cube `[0,1]^N` is subdivided into boxes. Atoms with the same
    /// truncated center are grouped, since their union depends on one distance
    /// only. Per box and group, interval bounds on the truncated distance
    /// (widened by the tail slack `τ_N`) decide the group outright where they
    /// can; otherwise the exact box-restricted law of the distance brackets the
    /// group's fraction. A box's union fraction is bracketed by
    /// `[max_g lo_g, min(1, Σ_g hi_g)]`, and only boxes where two or more
    /// groups are undetermined are split further.
    pub fn measure_union(&self, region: &RegionPi, opts: &UnionOptions) -> Result<UnionReport> {
        if !(opts.tol > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                opts.tol
            )));
        }
        if opts.node_budget == 0 {
            return Err(Error::invalid("node budget must be positive"));
        }
        let n = self.union_truncation(region, opts.tol)?;
        let tail = self.weights.tail_sum(n);
        let weights = self.weights.weights(n);
        let groups = CenterGroup::collect(&region.atoms, n);

        let mut seq = 0usize;
        let mut nodes = 1usize;
        let root = self.evaluate(
            &groups,
            &weights,
            tail,
            vec![0.0; n],
            vec![1.0; n],
            1.0,
            &mut seq,
        );
        let mut total_lo = root.volume * root.frac_lo;
        let mut total_hi = root.volume * root.frac_hi;
        let mut leaves: Vec<Cell> = Vec::new();
        let mut queue = BinaryHeap::new();
        if root.refinable {
            queue.push(Ranked(root));
        } else {
            leaves.push(root);
        }

        while total_hi - total_lo > opts.tol && nodes + 2 <= opts.node_budget {
            let Some(Ranked(cell)) = queue.pop() else {
                break;
            };
            total_lo -= cell.volume * cell.frac_lo;
            total_hi -= cell.volume * cell.frac_hi;
            let axis = (0..n)
                .max_by(|&i, &j| {
                    let wi = weights[i] * (cell.hi[i] - cell.lo[i]);
                    let wj = weights[j] * (cell.hi[j] - cell.lo[j]);
                    wi.total_cmp(&wj).then(j.cmp(&i))
                })
                .expect("n >= 1");
            let mid = 0.5 * (cell.lo[axis] + cell.hi[axis]);
            let half = 0.5 * cell.volume;
            let mut left_hi = cell.hi.clone();
            left_hi[axis] = mid;
            let mut right_lo = cell.lo.clone();
            right_lo[axis] = mid;
            let children = [
                self.evaluate(&groups, &weights, tail, cell.lo, left_hi, half, &mut seq),
                self.evaluate(&groups, &weights, tail, right_lo, cell.hi, half, &mut seq),
            ];
            nodes += 2;
            for child in children {
                total_lo += child.volume * child.frac_lo;
                total_hi += child.volume * child.frac_hi;
                if child.refinable {
                    queue.push(Ranked(child));
                } else {
                    leaves.push(child);
                }
            }
        }

        // re-sum in creation order so the result does not depend on heap layout
        leaves.extend(queue.into_iter().map(|r| r.0));
        leaves.sort_by_key(|c| c.seq);
        let lo: f64 = leaves.iter().map(|c| c.volume * c.frac_lo).sum();
        let hi: f64 = leaves.iter().map(|c| c.volume * c.frac_hi).sum();
        let lo = (lo - ROUNDING_SLACK).clamp(0.0, 1.0);
        let hi = (hi + ROUNDING_SLACK).clamp(0.0, 1.0);
        let majorant = region.atoms.len() as f64 * tail * 2f64.powi(n as i32);
        Ok(UnionReport {
            enclosure: Enclosure {
                lo,
                hi,
                n_used: n,
                certified: true,
                converged: hi - lo <= opts.tol,
            },
            nodes,
            tail_slack: tail,
            majorant,
            within_majorant: hi - lo <= majorant,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        groups: &[CenterGroup],
        weights: &[f64],
        tail: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
        volume: f64,
        seq: &mut usize,
    ) -> Cell {
        let mut frac_lo = 0.0f64;
        let mut frac_hi = 0.0f64;
        let mut undetermined = 0usize;
        for group in groups {
            let (mut s_min, mut s_max) = (0.0, 0.0);
            for i in 0..weights.len() {
                let c = group.center[i];
                let near = if c < lo[i] {
                    lo[i] - c
                } else if c > hi[i] {
                    c - hi[i]
                } else {
                    0.0
                };
                let far = (c - lo[i]).abs().max((hi[i] - c).abs());
                s_min += weights[i] * near;
                s_max += weights[i] * far;
            }
            let slack = ROUNDING_SLACK * (1.0 + s_max);
            // the full distance lies in [s_min, s_max + tail] on this box
            let inside_ball = |r: f64| s_max + tail + slack < r;
            let outside_ball = |r: f64| s_min - slack >= r;
            let certain = group.balls.iter().any(|&r| inside_ball(r))
                || group.complements.iter().any(|&r| outside_ball(r));
            if certain {
                frac_lo = 1.0;
                frac_hi += 1.0;
                continue;
            }
            let balls: Vec<f64> = group
                .balls
                .iter()
                .copied()
                .filter(|&r| !outside_ball(r))
                .collect();
            let complements: Vec<f64> = group
                .complements
                .iter()
                .copied()
                .filter(|&r| !inside_ball(r))
                .collect();
            if balls.is_empty() && complements.is_empty() {
                continue;
            }
            undetermined += 1;
            let (g_lo, g_hi) =
                self.group_fraction(&group.center, &balls, &complements, weights, tail, &lo, &hi);
            frac_lo = frac_lo.max(g_lo);
            frac_hi += g_hi;
        }
        let frac_hi = frac_hi.min(1.0);
        let id = *seq;
        *seq += 1;
        Cell {
            lo,
            hi,
            volume,
            frac_lo,
            frac_hi,
            refinable: undetermined >= 2 && frac_hi > frac_lo,
            seq: id,
        }
    }

    /// Bounds on the fraction of a box covered by the union of one center
    /// group's atoms, from the exact law of the truncated distance `S` with `x`
    /// uniform on the box.
    ///
    /// Balls cover `{S < r - τ}` surely and `{S < r}` at most; complements
    /// cover `{S >= r}` surely and `{S >= r - τ}` at most. Either way the union
    /// is `{S < a} ∪ {S >= b}` for suitable `a`, `b`.
    #[allow(clippy::too_many_arguments)]
    fn group_fraction(
        &self,
        center: &[f64],
        balls: &[f64],
        complements: &[f64],
        weights: &[f64],
        tail: f64,
        lo: &[f64],
        hi: &[f64],
    ) -> (f64, f64) {
        let budget = self.breakpoint_budget.min(BOX_BREAKPOINT_BUDGET);
        let density = (0..weights.len()).try_fold(None::<PiecewisePolyDensity>, |acc, i| {
            let term = PiecewisePolyDensity::folded_uniform(center[i], weights[i], lo[i], hi[i])?;
            match acc {
                None => Ok::<_, Error>(Some(term)),
                Some(d) => Ok(Some(d.convolve_with_budget(&term, budget)?)),
            }
        });
        let density = match density {
            Ok(Some(d)) => d,
            _ => return (0.0, 1.0),
        };
        let prefix_suffix = |below: f64, above: f64| {
            if below >= above {
                1.0
            } else {
                let left = if below.is_finite() {
                    density.cdf(below)
                } else {
                    0.0
                };
                let right = if above.is_finite() {
                    1.0 - density.cdf(above)
                } else {
                    0.0
                };
                left + right
            }
        };
        let max_or = |v: &[f64], shift: f64| {
            v.iter()
                .map(|r| r - shift)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let min_or =
            |v: &[f64], shift: f64| v.iter().map(|r| r - shift).fold(f64::INFINITY, f64::min);
        let sure = prefix_suffix(max_or(balls, tail), min_or(complements, 0.0));
        let possible = prefix_suffix(max_or(balls, 0.0), min_or(complements, tail));
        (
            (sure - ROUNDING_SLACK).clamp(0.0, 1.0),
            (possible + ROUNDING_SLACK).clamp(0.0, 1.0),
        )
    }
}
