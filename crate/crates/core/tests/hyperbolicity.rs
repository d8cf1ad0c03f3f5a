use rand::Rng;

use hyperbary::hyperbolicity::{
    estimate_delta, quadruple_defect, side_point, tripod_map, EstimateMode, Region, Side,
};
use hyperbary::rng::stream_rng;
use hyperbary::spaces::{EuclideanPlane, GeodesicSpace, MetricTree, PlanePoint, PoincareDisk};

/// `min{(x|y)_p, (y|z)_p} - (x|z)_p` from raw coordinates, over all 24
/// orderings.
fn brute_force_defect(pts: &[(f64, f64); 4]) -> f64 {
    let d = |a: usize, b: usize| ((pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2)).sqrt();
    let mut best = f64::NEG_INFINITY;
    for p in 0..4 {
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    let mut seen = [p, x, y, z];
                    seen.sort();
                    if seen != [0, 1, 2, 3] {
                        continue;
                    }
                    let g = |a: usize, b: usize| 0.5 * (d(p, a) + d(p, b) - d(a, b));
                    best = best.max(g(x, y).min(g(y, z)) - g(x, z));
                }
            }
        }
    }
    best
}

#[test]
fn unit_square_defect() {
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let plane = EuclideanPlane::default();
    let pts: Vec<PlanePoint> = corners.iter().map(|&(x, y)| PlanePoint::new(x, y)).collect();
    let (v, _) = quadruple_defect(&plane, [&pts[0], &pts[1], &pts[2], &pts[3]]);
    let oracle = brute_force_defect(&corners);
    assert!((v - oracle).abs() < 1e-15);
    // p, y opposite: (x|y)_p = (y|z)_p = √2/2 and (x|z)_p = 1 - √2/2.
    assert!((oracle - (2f64.sqrt() - 1.0)).abs() < 1e-15);
}

#[test]
fn random_plane_quadruples_match_brute_force() {
    let mut rng = stream_rng(31, 0);
    let plane = EuclideanPlane::default();
    for _ in 0..1000 {
        let c: [(f64, f64); 4] = std::array::from_fn(|_| (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)));
        let pts: Vec<PlanePoint> = c.iter().map(|&(x, y)| PlanePoint::new(x, y)).collect();
        let (v, _) = quadruple_defect(&plane, [&pts[0], &pts[1], &pts[2], &pts[3]]);
        assert!((v - brute_force_defect(&c)).abs() < 1e-12);
    }
}

#[test]
fn trees_are_zero_hyperbolic() {
    let mut rng = stream_rng(32, 0);
    for seed in 0..20 {
        let n = rng.random_range(2..=40);
        let t = MetricTree::random(n, 0.1, 2.0, &mut rng).unwrap();
        let est = estimate_delta(&t, Region::Sampler, 20_000, seed).unwrap();
        assert!(est.delta_hat <= 1e-12, "{}", est.delta_hat);
    }
}

#[test]
fn exhaustive_mode_finds_the_true_maximum() {
    let mut rng = stream_rng(33, 0);
    let disk = PoincareDisk::default();
    let pts: Vec<_> = (0..7).map(|_| disk.random_point(&mut rng)).collect();
    let est = estimate_delta(&disk, Region::Points(&pts), 1_000_000, 0).unwrap();
    assert_eq!(est.mode, EstimateMode::ExhaustiveOnSample);
    let mut best = f64::NEG_INFINITY;
    for a in 0..7 {
        for b in 0..7 {
            for c in 0..7 {
                for d in 0..7 {
                    best = best.max(quadruple_defect(&disk, [&pts[a], &pts[b], &pts[c], &pts[d]]).0);
                }
            }
        }
    }
    assert_eq!(est.delta_hat, best);
}

#[test]
fn disk_estimate_stays_below_ln2() {
    // The hyperbolic plane satisfies the four-point condition with ln 2,
    // so any sample must stay below it while a radius-3 ball gets close.
    let disk = PoincareDisk::new(3.0).unwrap();
    let est = estimate_delta(&disk, Region::Sampler, 200_000, 5).unwrap();
    assert!(est.delta_hat <= 2f64.ln() + 1e-12, "{}", est.delta_hat);
    assert!(est.delta_hat > 0.5, "{}", est.delta_hat);
    let [p, x, y, z] = &est.witness;
    let (v, _) = quadruple_defect(&disk, [p, x, y, z]);
    assert!((v - est.delta_hat).abs() < 1e-12);
}

#[test]
fn estimate_is_independent_of_thread_count() {
    let disk = PoincareDisk::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_delta(&disk, Region::Sampler, 50_000, 9).unwrap())
    };
    assert_eq!(run(1), run(4));
}

fn tripod_check<S: GeodesicSpace>(space: &S, delta: f64, trials: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let sides = [Side::XP, Side::XQ, Side::PQ];
    let (mut expansion, mut shortfall) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..trials {
        let (x, p, q) = (space.random_point(&mut rng), space.random_point(&mut rng), space.random_point(&mut rng));
        let tri = tripod_map(space, &x, &p, &q);
        let (su, sv) = (sides[rng.random_range(0..3)], sides[rng.random_range(0..3)]);
        let (lu, lv) = (tri.side_length(su), tri.side_length(sv));
        let (s, t) = (rng.random::<f64>() * lu, rng.random::<f64>() * lv);
        let u = side_point(space, (&x, &p, &q), su, s);
        let v = side_point(space, (&x, &p, &q), sv, t);
        let d = space.distance(&u, &v);
        let dt = tri.distance(&tri.position(su, s), &tri.position(sv, t));
        expansion = expansion.max(dt - d);
        shortfall = shortfall.max(d - dt - 4.0 * delta);
    }
    (expansion, shortfall)
}

#[test]
fn tripod_map_is_a_rough_isometry() {
    let disk = PoincareDisk::new(3.0).unwrap();
    let delta = estimate_delta(&disk, Region::Sampler, 100_000, 3).unwrap().delta_hat;
    let (expansion, shortfall) = tripod_check(&disk, delta, 20_000, 7);
    assert!(expansion <= 1e-9, "tripod map expands by {expansion}");
    assert!(shortfall <= 1e-9, "tripod map shrinks by more than 4δ: {shortfall}");

    // Triangles in trees are tripods.
    let t = MetricTree::random(30, 0.1, 2.0, &mut stream_rng(8, 0)).unwrap();
    let (expansion, shortfall) = tripod_check(&t, 0.0, 20_000, 9);
    assert!(expansion <= 1e-9 && shortfall <= 1e-9, "{expansion} {shortfall}");
}
