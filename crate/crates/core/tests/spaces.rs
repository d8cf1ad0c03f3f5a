use proptest::prelude::*;
use rand::Rng;

use hyperbary::rng::stream_rng;
use hyperbary::spaces::io::{format_tree, parse_point, parse_tree};
use hyperbary::spaces::{
    diameter_of_finite_set, DiskPoint, EuclideanPlane, GeodesicSpace, MetricTree, PoincareDisk, PointRef, TreePoint,
};

/// Distances among `points` by subdividing the edges at every point and
/// running Floyd-Warshall on the resulting weighted graph.
fn floyd_warshall_oracle(tree: &MetricTree, points: &[TreePoint]) -> Vec<Vec<f64>> {
    let nv = tree.num_vertices();
    // Node of each point: a vertex, or a fresh node on its edge.
    let mut node_of = Vec::new();
    let mut on_edge: Vec<Vec<(f64, usize)>> = vec![Vec::new(); tree.edges().len()];
    let mut next = nv;
    for p in points {
        match tree.to_ref(p) {
            PointRef::Vertex { id } => node_of.push((0..nv).find(|&v| tree.label(v) == id).unwrap()),
            PointRef::Edge { edge, offset } => {
                on_edge[edge].push((offset, next));
                node_of.push(next);
                next += 1;
            }
            _ => unreachable!(),
        }
    }
    let mut d = vec![vec![f64::INFINITY; next]; next];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (e, edge) in tree.edges().iter().enumerate() {
        let mut stops = vec![(0.0, edge.u)];
        let mut inner = on_edge[e].clone();
        inner.sort_by(|a, b| a.0.total_cmp(&b.0));
        stops.extend(inner);
        stops.push((edge.length, edge.v));
        for w in stops.windows(2) {
            let ((a, i), (b, j)) = (w[0], w[1]);
            d[i][j] = d[i][j].min(b - a);
            d[j][i] = d[i][j];
        }
    }
    for k in 0..next {
        for i in 0..next {
            for j in 0..next {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    node_of.iter().map(|&i| node_of.iter().map(|&j| d[i][j]).collect()).collect()
}

#[test]
fn tree_distances_match_subdivided_graph() {
    let mut rng = stream_rng(21, 0);
    for _ in 0..100 {
        let n = rng.random_range(1..=25);
        let t = MetricTree::random(n, 0.1, 3.0, &mut rng).unwrap();
        let mut pts: Vec<TreePoint> = (0..12).map(|_| t.random_point(&mut rng)).collect();
        pts.extend((0..n.min(4)).map(TreePoint::Vertex));
        let oracle = floyd_warshall_oracle(&t, &pts);
        for (i, p) in pts.iter().enumerate() {
            for (j, q) in pts.iter().enumerate() {
                assert!((t.distance(p, q) - oracle[i][j]).abs() < 1e-12, "{p:?} {q:?}");
            }
        }
    }
}

fn check_axioms<S: GeodesicSpace>(space: &S, seed: u64) -> Result<(), TestCaseError> {
    let mut rng = stream_rng(seed, 0);
    let (p, q, r) = (space.random_point(&mut rng), space.random_point(&mut rng), space.random_point(&mut rng));
    let (pq, qr, pr) = (space.distance(&p, &q), space.distance(&q, &r), space.distance(&p, &r));
    prop_assert_eq!(space.distance(&p, &p), 0.0);
    prop_assert!((pq - space.distance(&q, &p)).abs() <= 1e-12 * (1.0 + pq));
    prop_assert!(pr <= pq + qr + 1e-12 * (1.0 + pr));
    // Geodesic points split the distance exactly.
    let t: f64 = rng.random();
    let m = space.geodesic_point(&p, &q, t).unwrap();
    space.validate(&m).unwrap();
    prop_assert!((space.distance(&p, &m) - t * pq).abs() <= 1e-9 * (1.0 + pq));
    prop_assert!((space.distance(&m, &q) - (1.0 - t) * pq).abs() <= 1e-9 * (1.0 + pq));
    prop_assert_eq!(space.geodesic_point(&p, &q, 0.0).unwrap(), p.clone());
    prop_assert!(space.distance(&space.geodesic_point(&p, &q, 1.0).unwrap(), &q) <= 1e-9 * (1.0 + pq));
    prop_assert!(space.geodesic_point(&p, &q, 1.5).is_err());
    // Points survive the exchange format.
    let back = space.from_ref(&space.to_ref(&m)).unwrap();
    prop_assert!(space.distance(&back, &m) <= 1e-12);
    Ok(())
}

proptest! {
    #[test]
    fn tree_metric_and_geodesics(seed in any::<u64>(), n in 1usize..40) {
        let t = MetricTree::random(n, 0.1, 2.0, &mut stream_rng(seed, 1)).unwrap();
        check_axioms(&t, seed)?;
    }

    #[test]
    fn disk_metric_and_geodesics(seed in any::<u64>(), radius in 0.1f64..6.0) {
        check_axioms(&PoincareDisk::new(radius).unwrap(), seed)?;
    }

    #[test]
    fn plane_metric_and_geodesics(seed in any::<u64>()) {
        check_axioms(&EuclideanPlane::default(), seed)?;
    }

    #[test]
    fn disk_distance_formulas_agree(seed in any::<u64>()) {
        let d = PoincareDisk::default();
        let mut rng = stream_rng(seed, 0);
        let (p, q) = (d.random_point(&mut rng), d.random_point(&mut rng));
        let a = d.distance(&p, &q);
        prop_assert!((a - d.distance_arccosh(&p, &q)).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn tree_files_round_trip(seed in any::<u64>(), n in 1usize..30) {
        let t = MetricTree::random(n, 0.1, 2.0, &mut stream_rng(seed, 0)).unwrap();
        let back = parse_tree(&format_tree(&t)).unwrap();
        let mut rng = stream_rng(seed, 1);
        for _ in 0..5 {
            let (p, q) = (t.random_point(&mut rng), t.random_point(&mut rng));
            prop_assert_eq!(t.distance(&p, &q), back.distance(&p, &q));
        }
    }
}

#[test]
fn radial_disk_geodesic() {
    let d = PoincareDisk::default();
    let m = d.geodesic_point(&DiskPoint::ORIGIN, &DiskPoint::new(0.5, 0.0), 0.5).unwrap();
    let expected = (0.5f64.atanh() / 2.0).tanh();
    assert!((m.x - expected).abs() < 1e-15 && m.y.abs() < 1e-15);
    assert!((m.x - 0.2679491924311227).abs() < 1e-12);
}

#[test]
fn parsed_points_are_checked_against_the_space() {
    let t = parse_tree("edge a b 1.5\nedge b c 2\n").unwrap();
    assert_eq!(parse_point(&t, "vertex c").unwrap(), TreePoint::Vertex(2));
    assert!(parse_point(&t, "vertex z").is_err());
    assert!(parse_point(&t, "edge 1 2.5").is_err());
    assert!(parse_point(&PoincareDisk::default(), "0.8 0.8").is_err());
    let d = diameter_of_finite_set(&t, &[TreePoint::Vertex(0), TreePoint::Vertex(2)]).unwrap();
    assert_eq!(d, 3.5);
}
