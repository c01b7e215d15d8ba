use mu0::kronecker::{counting_bound, hitting_measure, select_indices, FrequencySequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `{t ∈ [0,1] : |{tλ} - α| <= h}` as sorted disjoint intervals.
fn hits(lambda: f64, alpha: f64, h: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = ((alpha - h).max(0.0), (alpha + h).min(1.0));
    (0..=lambda.ceil() as i64)
        .map(|r| ((r as f64 + lo) / lambda, (r as f64 + hi) / lambda))
        .map(|(a, b)| (a.max(0.0), b.min(1.0)))
        .filter(|(a, b)| a < b)
        .collect()
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn exact_measure(alpha: &[f64], lambdas: &[f64], delta: f64) -> f64 {
    let mut set = vec![(0.0, 1.0)];
    for (&a, &l) in alpha.iter().zip(lambdas) {
        set = intersect(&set, &hits(l, a, delta / 2.0));
    }
    set.iter().map(|(a, b)| b - a).sum()
}

#[test]
fn scan_encloses_the_exact_measure() {
    let mut freqs = FrequencySequence::sqrt_primes(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in [1, 2] {
        for delta in [0.05, 0.02] {
            for strengthened in [false, true] {
                let sel = select_indices(delta, k, &mut freqs, strengthened).unwrap();
                let res = delta / (4.0 * sel.lambdas[k - 1]);
                for _ in 0..10 {
                    let alpha: Vec<f64> = (0..k)
                        .map(|_| rng.gen_range(delta / 2.0..1.0 - delta / 2.0))
                        .collect();
                    let e = hitting_measure(&alpha, &sel, res).unwrap();
                    let exact = exact_measure(&alpha, &sel.lambdas, delta);
                    assert!(e.lo <= exact && exact <= e.hi, "{e:?} vs {exact}");
                    assert!(e.width() < 1e-8);
                    assert!(e.hi <= counting_bound(&sel));
                }
            }
        }
    }
}
