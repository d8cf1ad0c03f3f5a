use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeodesicSpace, PointRef, SpaceKind};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

/// A point of a metric tree.
///
/// Points are kept canonical: a point at an edge end is always the
/// corresponding `Vertex`, and `Edge` offsets (measured from `edge.u`) lie
/// strictly inside `(0, length)`. Equality of canonical points is equality of
/// locations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreePoint {
    Vertex(usize),
    Edge { edge: usize, offset: f64 },
}

/// A finite metric tree: connected, acyclic, positive edge lengths.
///
/// The tree is rooted at vertex 0. Every point has rooted coordinates
/// `(c, h)`: the vertex `c` below it and the height `h` above `c` along the
/// edge to `c`'s parent. Distances and geodesics reduce to lowest common
/// ancestor queries on those coordinates.
#[derive(Debug, Clone)]
pub struct MetricTree {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<TreeEdge>,
    parent: Vec<Option<(usize, usize)>>,
    /// For each edge, the endpoint farther from the root.
    child: Vec<usize>,
    depth: Vec<usize>,
    root_dist: Vec<f64>,
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl MetricTree {
    pub fn new(labels: Vec<String>, edges: Vec<TreeEdge>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return invalid("a tree needs at least one vertex");
        }
        if edges.len() + 1 != n {
            return invalid(format!(
                "a tree on {n} vertices has {} edges, found {}",
                n - 1,
                edges.len()
            ));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return invalid(format!("duplicate vertex label {l:?}"));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return invalid(format!("edge {k} references a missing vertex"));
            }
            if e.u == e.v {
                return invalid(format!("edge {k} is a loop"));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return invalid(format!("edge {k} has non-positive length {}", e.length));
            }
            adjacency[e.u].push((e.v, k));
            adjacency[e.v].push((e.u, k));
        }

        let mut parent = vec![None; n];
        let mut child = vec![usize::MAX; edges.len()];
        let mut depth = vec![0usize; n];
        let mut root_dist = vec![0.0f64; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(a) = queue.pop_front() {
            for &(b, k) in &adjacency[a] {
                if !seen[b] {
                    seen[b] = true;
                    parent[b] = Some((a, k));
                    child[k] = b;
                    depth[b] = depth[a] + 1;
                    root_dist[b] = root_dist[a] + edges[k].length;
                    queue.push_back(b);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return invalid("edges do not connect all vertices");
        }
        Ok(Self {
            labels,
            index,
            edges,
            parent,
            child,
            depth,
            root_dist,
        })
    }

    /// Builds a tree from labelled edges; vertices are numbered in order of
    /// first appearance.
    pub fn from_labeled_edges(edges: &[(String, String, f64)]) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut id = |l: &String, labels: &mut Vec<String>| {
            *index.entry(l.clone()).or_insert_with(|| {
                labels.push(l.clone());
                labels.len() - 1
            })
        };
        let mut out = Vec::with_capacity(edges.len());
        for (u, v, length) in edges {
            let u = id(u, &mut labels);
            let v = id(v, &mut labels);
            out.push(TreeEdge { u, v, length: *length });
        }
        if labels.is_empty() {
            labels.push("0".into());
        }
        Self::new(labels, out)
    }

    /// Path `0 — 1 — ... — n` with the given edge lengths.
    pub fn path(lengths: &[f64]) -> Result<Self> {
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &length)| TreeEdge { u: i, v: i + 1, length })
            .collect();
        Self::new(default_labels(lengths.len() + 1), edges)
    }

    /// Star with centre 0 and leaf `i + 1` at distance `lengths[i]`.
    pub fn star(lengths: &[f64]) -> Result<Self> {
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(i, &length)| TreeEdge { u: 0, v: i + 1, length })
            .collect();
        Self::new(default_labels(lengths.len() + 1), edges)
    }

    /// Random recursive tree: vertex `i` attaches to a uniform earlier vertex,
    /// edge lengths uniform in `[min_len, max_len)`.
    pub fn random<R: Rng + ?Sized>(n: usize, min_len: f64, max_len: f64, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return invalid("a tree needs at least one vertex");
        }
        if !(min_len > 0.0 && max_len > min_len) {
            return invalid("random tree edge lengths need 0 < min_len < max_len");
        }
        let edges = (1..n)
            .map(|i| TreeEdge {
                u: rng.random_range(0..i),
                v: i,
                length: rng.random_range(min_len..max_len),
            })
            .collect();
        Self::new(default_labels(n), edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn vertex(&self, label: &str) -> Result<TreePoint> {
        match self.index.get(label) {
            Some(&v) => Ok(TreePoint::Vertex(v)),
            None => invalid(format!("unknown vertex {label:?}")),
        }
    }

    /// Canonical point at `offset` from `edges[edge].u`.
    pub fn edge_point(&self, edge: usize, offset: f64) -> Result<TreePoint> {
        let Some(e) = self.edges.get(edge) else {
            return invalid(format!("edge {edge} does not exist"));
        };
        if !offset.is_finite() || offset < 0.0 || offset > e.length {
            return invalid(format!(
                "offset {offset} outside [0, {}] on edge {edge}",
                e.length
            ));
        }
        Ok(self.canonical(edge, offset))
    }

    fn canonical(&self, edge: usize, offset: f64) -> TreePoint {
        let e = &self.edges[edge];
        if offset <= 0.0 {
            TreePoint::Vertex(e.u)
        } else if offset >= e.length {
            TreePoint::Vertex(e.v)
        } else {
            TreePoint::Edge { edge, offset }
        }
    }

    /// Rooted coordinates `(c, h)`.
    fn rooted(&self, p: &TreePoint) -> (usize, f64) {
        match *p {
            TreePoint::Vertex(v) => (v, 0.0),
            TreePoint::Edge { edge, offset } => {
                let e = &self.edges[edge];
                let c = self.child[edge];
                if c == e.u {
                    (c, offset)
                } else {
                    (c, e.length - offset)
                }
            }
        }
    }

    fn from_rooted(&self, c: usize, h: f64) -> TreePoint {
        let Some((p, k)) = self.parent[c] else {
            return TreePoint::Vertex(c);
        };
        let len = self.edges[k].length;
        let snap = 1e-14 * (1.0 + len);
        if h <= snap {
            TreePoint::Vertex(c)
        } else if h >= len - snap {
            TreePoint::Vertex(p)
        } else if self.edges[k].u == c {
            TreePoint::Edge { edge: k, offset: h }
        } else {
            TreePoint::Edge { edge: k, offset: len - h }
        }
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap().0;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap().0;
        }
        while a != b {
            a = self.parent[a].unwrap().0;
            b = self.parent[b].unwrap().0;
        }
        a
    }

    /// The point on the root path of vertex `c` at root distance `target`.
    fn point_above(&self, c: usize, target: f64) -> TreePoint {
        let mut w = c;
        loop {
            if target >= self.root_dist[w] {
                return TreePoint::Vertex(w);
            }
            match self.parent[w] {
                None => return TreePoint::Vertex(w),
                Some((p, _)) if target > self.root_dist[p] => {
                    return self.from_rooted(w, self.root_dist[w] - target);
                }
                Some((p, _)) => w = p,
            }
        }
    }
}

impl GeodesicSpace for MetricTree {
    type Point = TreePoint;

    fn kind(&self) -> SpaceKind {
        SpaceKind::Tree
    }

    fn distance(&self, p: &TreePoint, q: &TreePoint) -> f64 {
        let (c1, h1) = self.rooted(p);
        let (c2, h2) = self.rooted(q);
        if c1 == c2 {
            return (h1 - h2).abs();
        }
        let r1 = self.root_dist[c1] - h1;
        let r2 = self.root_dist[c2] - h2;
        let l = self.lca(c1, c2);
        let d = if l == c2 {
            r1 - r2
        } else if l == c1 {
            r2 - r1
        } else {
            (r1 - self.root_dist[l]) + (r2 - self.root_dist[l])
        };
        d.max(0.0)
    }

    /// Double sweep: in a tree the point farthest from any point is an end
    /// of a diameter.
    fn set_diameter(&self, points: &[TreePoint]) -> f64 {
        let farthest = |from: usize| {
            points
                .iter()
                .enumerate()
                .map(|(j, q)| (self.distance(&points[from], q), j))
                .fold((0.0, from), |best, cur| if cur.0 > best.0 { cur } else { best })
        };
        if points.is_empty() {
            return 0.0;
        }
        let (_, end) = farthest(0);
        farthest(end).0
    }

    fn geodesic_unchecked(&self, p: &TreePoint, q: &TreePoint, t: f64) -> TreePoint {
        if t <= 0.0 {
            return *p;
        }
        if t >= 1.0 {
            return *q;
        }
        let total = self.distance(p, q);
        if total == 0.0 {
            return *p;
        }
        let s = t * total;
        let (c1, h1) = self.rooted(p);
        let (c2, h2) = self.rooted(q);
        if c1 == c2 {
            return self.from_rooted(c1, h1 + t * (h2 - h1));
        }
        let r1 = self.root_dist[c1] - h1;
        let r2 = self.root_dist[c2] - h2;
        let l = self.lca(c1, c2);
        let up_from_p = if l == c2 {
            f64::INFINITY
        } else if l == c1 {
            0.0
        } else {
            r1 - self.root_dist[l]
        };
        if s <= up_from_p {
            self.point_above(c1, r1 - s)
        } else {
            self.point_above(c2, r2 - (total - s))
        }
    }

    fn validate(&self, p: &TreePoint) -> Result<()> {
        match *p {
            TreePoint::Vertex(v) if v < self.num_vertices() => Ok(()),
            TreePoint::Vertex(v) => invalid(format!("vertex {v} does not exist")),
            TreePoint::Edge { edge, offset } => match self.edges.get(edge) {
                Some(e) if offset > 0.0 && offset < e.length => Ok(()),
                Some(_) => invalid(format!("non-canonical offset {offset} on edge {edge}")),
                None => invalid(format!("edge {edge} does not exist")),
            },
        }
    }

    /// Uniform edge, then uniform offset along it.
    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> TreePoint {
        if self.edges.is_empty() {
            return TreePoint::Vertex(0);
        }
        let k = rng.random_range(0..self.edges.len());
        let offset = rng.random::<f64>() * self.edges[k].length;
        self.canonical(k, offset)
    }

    fn to_ref(&self, p: &TreePoint) -> PointRef {
        match *p {
            TreePoint::Vertex(v) => PointRef::Vertex {
                id: self.labels[v].clone(),
            },
            TreePoint::Edge { edge, offset } => PointRef::Edge { edge, offset },
        }
    }

    fn from_ref(&self, r: &PointRef) -> Result<TreePoint> {
        match r {
            PointRef::Vertex { id } => self.vertex(id),
            PointRef::Edge { edge, offset } => self.edge_point(*edge, *offset),
            other => invalid(format!("{} point given for a tree", other.kind())),
        }
    }
}
