use mu0::covering::contains_ball;
use mu0::measure::{Ball, MeasureContext};
use mu0::perm::FinitePermutation;
use mu0::volume::{volume_conv, volume_ie, FiniteBallSpec};
use mu0::{PiecewisePolyDensity, Point, WeightSchedule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..=1.0
}

fn point() -> impl Strategy<Value = Point> {
    (prop::collection::vec(unit(), 0..8), unit()).prop_map(|(p, t)| Point::new(p, t).unwrap())
}

fn permutation(max: usize) -> impl Strategy<Value = FinitePermutation> {
    (0..=max)
        .prop_flat_map(|m| Just((1..=m).collect::<Vec<usize>>()).prop_shuffle())
        .prop_map(|v| FinitePermutation::from_mapping(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metric_is_symmetric(x in point(), y in point()) {
        let w = WeightSchedule::default();
        prop_assert_eq!(w.distance(&x, &y), w.distance(&y, &x));
    }

    #[test]
    fn triangle_inequality(x in point(), y in point(), z in point()) {
        let w = WeightSchedule::default();
        prop_assert!(w.distance(&x, &z) <= w.distance(&x, &y) + w.distance(&y, &z) + 1e-12);
    }

    #[test]
    fn distance_stays_below_the_diameter(x in point(), y in point(), base in 1.1f64..8.0) {
        let w = WeightSchedule::new(base).unwrap();
        prop_assert!(w.distance(&x, &y) <= w.diameter_bound() + 1e-12);
        prop_assert!(w.distance(&x, &y) <= w.farthest_distance(&x) + 1e-12);
    }

    #[test]
    fn convolution_commutes_and_keeps_mass(a in unit(), b in unit(), w in 0.05f64..1.0) {
        let p = PiecewisePolyDensity::term_density(a, 1.0).unwrap();
        let q = PiecewisePolyDensity::term_density(b, w).unwrap();
        let pq = p.convolve(&q).unwrap();
        let qp = q.convolve(&p).unwrap();
        prop_assert!((pq.total_mass() - 1.0).abs() < 1e-12);
        for i in 0..=40 {
            let s = i as f64 * 0.05;
            prop_assert!((pq.cdf(s) - qp.cdf(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_associates(a in unit(), b in unit(), c in unit()) {
        let w = WeightSchedule::default();
        let t = |x: f64, n: usize| PiecewisePolyDensity::term_density(x, w.weight(n)).unwrap();
        let left = t(a, 1).convolve(&t(b, 2)).unwrap().convolve(&t(c, 3)).unwrap();
        let right = t(a, 1).convolve(&t(b, 2).convolve(&t(c, 3)).unwrap()).unwrap();
        for i in 0..=40 {
            let s = i as f64 * 0.04;
            prop_assert!((left.cdf(s) - right.cdf(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_is_monotone(center in prop::collection::vec(unit(), 1..6)) {
        let spec = FiniteBallSpec::new(center.clone(), 1.0, WeightSchedule::default()).unwrap();
        let d = mu0::volume::sum_density(spec.center(), &spec.weights(), 1 << 20).unwrap();
        let mut prev = 0.0;
        for i in 0..=200 {
            let v = d.cdf(i as f64 * 0.01);
            prop_assert!(v >= prev - 1e-14);
            prop_assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn exact_routes_agree(center in prop::collection::vec(unit(), 1..7), r in 0.01f64..1.6) {
        let spec = FiniteBallSpec::new(center, r, WeightSchedule::default()).unwrap();
        let conv = volume_conv(&spec).unwrap();
        let ie = volume_ie(&spec).unwrap();
        prop_assert!((conv - ie).abs() <= 1e-9, "{} vs {}", conv, ie);
    }

    #[test]
    fn volumes_shrink_with_dimension(center in prop::collection::vec(unit(), 2..9), r in 0.05f64..1.2) {
        let w = WeightSchedule::default();
        let mut prev = 1.0;
        for n in 1..=center.len() {
            let v = volume_conv(&FiniteBallSpec::new(center[..n].to_vec(), r, w).unwrap()).unwrap();
            prop_assert!(v <= prev + 1e-12);
            prev = v;
            // deeper truncations never drop below the shrunken shallow ball
            if w.tail_sum(n) < r {
                let floor = volume_conv(&FiniteBallSpec::new(center[..n].to_vec(), r - w.tail_sum(n), w).unwrap()).unwrap();
                for m in n..=center.len() {
                    let deep = volume_conv(&FiniteBallSpec::new(center[..m].to_vec(), r, w).unwrap()).unwrap();
                    prop_assert!(deep >= floor - 1e-12);
                }
            }
        }
    }

    #[test]
    fn enclosures_grow_with_radius(c in point(), r in 0.05f64..1.0, dr in 0.01f64..0.5) {
        let ctx = MeasureContext::default();
        let small = ctx.ball_trace(&Ball::new(c.clone(), r).unwrap(), 6);
        let large = ctx.ball_trace(&Ball::new(c, r + dr).unwrap(), 6);
        for (s, l) in small.iter().zip(&large) {
            prop_assert!(s.lo <= l.lo + 1e-12 && s.hi <= l.hi + 1e-12);
        }
        for pair in small.windows(2) {
            prop_assert!(pair[1].lo >= pair[0].lo && pair[1].hi <= pair[0].hi);
        }
    }

    #[test]
    fn group_axioms(s in permutation(7), t in permutation(7), u in permutation(7)) {
        let id = FinitePermutation::identity();
        prop_assert_eq!(s.compose(&t).compose(&u), s.compose(&t.compose(&u)));
        prop_assert_eq!(s.compose(&id), s.clone());
        prop_assert_eq!(id.compose(&s), s.clone());
        prop_assert!(s.compose(&s.invert()).is_identity());
        prop_assert!(s.invert().compose(&s).is_identity());
    }

    #[test]
    fn action_is_compatible(s in permutation(9), t in permutation(9), x in point()) {
        prop_assert_eq!(s.compose(&t).act(&x), t.act(&s.act(&x)));
    }

    #[test]
    fn cycle_notation_round_trips(s in permutation(9)) {
        prop_assert_eq!(s.to_string().parse::<FinitePermutation>().unwrap(), s);
    }
}

/// Uniform point of `B(θ, r)` by rejection over a box around `θ`.
fn sample_in_ball(b: &Ball, w: &WeightSchedule, rng: &mut ChaCha8Rng) -> Point {
    let depth = 30;
    loop {
        let prefix: Vec<f64> = (1..=depth)
            .map(|n| {
                let c = b.center().coordinate(n);
                let h = (b.radius() / w.weight(n)).min(1.0);
                rng.gen_range((c - h).max(0.0)..=(c + h).min(1.0))
            })
            .collect();
        let x = Point::new(prefix, b.center().tail()).unwrap();
        if b.contains(&x, w) {
            return x;
        }
    }
}

#[test]
fn containment_test_is_sound() {
    let w = WeightSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut proven = 0;
    while proven < 20 {
        let c1 = Point::new((0..4).map(|_| rng.gen()).collect(), rng.gen()).unwrap();
        let c2 = Point::new((0..4).map(|_| rng.gen()).collect(), rng.gen()).unwrap();
        let inner = Ball::new(c1, rng.gen_range(0.02..0.3)).unwrap();
        let outer = Ball::new(c2, rng.gen_range(0.3..1.2)).unwrap();
        if !contains_ball(&inner, &outer, &w) {
            continue;
        }
        proven += 1;
        for _ in 0..1000 {
            let x = sample_in_ball(&inner, &w, &mut rng);
            assert!(outer.contains(&x, &w));
        }
    }
}

#[test]
fn tail_projection_agrees_with_membership() {
    let ctx = MeasureContext::default();
    let w = ctx.weights;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=3 {
        let center = Point::new((0..6).map(|_| rng.gen()).collect(), rng.gen()).unwrap();
        let ball = Ball::new(center.clone(), 0.1).unwrap();
        let proj = ctx.project_tail(&ball, n);
        for _ in 0..1000 {
            // agree with the center on the first n coordinates, random afterwards
            let mut prefix = center.head(n);
            prefix.extend((0..8).map(|_| rng.gen::<f64>()));
            let x = Point::new(prefix, rng.gen()).unwrap();
            assert_eq!(ball.contains(&x, &w), proj.contains(&x.shift_left(n), &w));
        }
    }
}
