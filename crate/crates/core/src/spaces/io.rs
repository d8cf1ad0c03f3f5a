//! Text formats for trees and points.
//!
//! Tree description: one `edge <u> <v> <length>` line per edge; an optional
//! `vertex <id>` line declares a vertex (needed only for a single-vertex
//! tree). Points: `vertex <id>`, `edge <index> <offset>` (offset from the
//! edge's first vertex, edges numbered from 0 in file order), or two decimal
//! coordinates for the disk and the plane. `#` starts a comment.

use super::{GeodesicSpace, MetricTree, PointRef, SpaceKind, TreeEdge};
use crate::error::{Error, Result};

pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn parse_f64(tok: &str, what: &str) -> std::result::Result<f64, String> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("invalid {what} {tok:?}"))
}

pub fn parse_tree(text: &str) -> Result<MetricTree> {
    let mut labels: Vec<String> = Vec::new();
    let mut edges_raw: Vec<(String, String, f64)> = Vec::new();
    for (line, tokens) in content_lines(text) {
        let err = |message: String| Error::Parse { line, message };
        match tokens.as_slice() {
            ["edge", u, v, len] => {
                let length = parse_f64(len, "edge length").map_err(err)?;
                edges_raw.push((u.to_string(), v.to_string(), length));
            }
            ["vertex", id] => labels.push(id.to_string()),
            _ => return Err(err(format!("expected `edge <u> <v> <length>`, got {:?}", tokens.join(" ")))),
        }
    }
    if edges_raw.is_empty() {
        return match labels.as_slice() {
            [one] => MetricTree::new(vec![one.clone()], vec![]),
            [] => Err(Error::Parse { line: 0, message: "tree file has no edges".into() }),
            _ => Err(Error::InvalidInput("several vertices but no edges".into())),
        };
    }
    let tree = MetricTree::from_labeled_edges(&edges_raw)?;
    for l in &labels {
        tree.vertex(l)?;
    }
    Ok(tree)
}

pub fn format_tree(tree: &MetricTree) -> String {
    let mut out = String::new();
    if tree.edges().is_empty() {
        out.push_str(&format!("vertex {}\n", tree.label(0)));
    }
    for TreeEdge { u, v, length } in tree.edges() {
        out.push_str(&format!("edge {} {} {:?}\n", tree.label(*u), tree.label(*v), length));
    }
    out
}

/// Parses point tokens for a space of the given kind.
pub fn parse_point_ref(tokens: &[&str], kind: SpaceKind) -> std::result::Result<PointRef, String> {
    match (tokens, kind) {
        (["vertex", id], SpaceKind::Tree) => Ok(PointRef::Vertex { id: id.to_string() }),
        (["edge", e, off], SpaceKind::Tree) => Ok(PointRef::Edge {
            edge: e.parse().map_err(|_| format!("invalid edge index {e:?}"))?,
            offset: parse_f64(off, "edge offset")?,
        }),
        ([x, y], SpaceKind::Disk) => Ok(PointRef::Disk {
            x: parse_f64(x, "coordinate")?,
            y: parse_f64(y, "coordinate")?,
        }),
        ([x, y], SpaceKind::Plane) => Ok(PointRef::Plane {
            x: parse_f64(x, "coordinate")?,
            y: parse_f64(y, "coordinate")?,
        }),
        _ => Err(format!("cannot read {:?} as a {kind} point", tokens.join(" "))),
    }
}

/// Parses a single point written in the text syntax.
pub fn parse_point<S: GeodesicSpace>(space: &S, text: &str) -> Result<S::Point> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let r = parse_point_ref(&tokens, space.kind()).map_err(Error::InvalidInput)?;
    space.from_ref(&r)
}

/// Parses a point-list file: one point per line.
pub fn parse_points<S: GeodesicSpace>(space: &S, text: &str) -> Result<Vec<S::Point>> {
    let pts: Vec<S::Point> = content_lines(text)
        .map(|(line, tokens)| {
            let r = parse_point_ref(&tokens, space.kind()).map_err(|message| Error::Parse { line, message })?;
            space.from_ref(&r).map_err(|e| Error::Parse { line, message: e.to_string() })
        })
        .collect::<Result<_>>()?;
    if pts.is_empty() {
        return Err(Error::InvalidInput("point list is empty".into()));
    }
    Ok(pts)
}

pub fn format_point_ref(r: &PointRef) -> String {
    match r {
        PointRef::Vertex { id } => format!("vertex {id}"),
        PointRef::Edge { edge, offset } => format!("edge {edge} {offset:?}"),
        PointRef::Disk { x, y } | PointRef::Plane { x, y } => format!("{x:?} {y:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{GeodesicSpace, PoincareDisk, TreePoint};

    #[test]
    fn tree_file_round_trip() {
        let text = "# path\nedge a b 1\nedge b c 2.5 # trailing\n\n";
        let tree = parse_tree(text).unwrap();
        assert_eq!(tree.num_vertices(), 3);
        let a = tree.vertex("a").unwrap();
        let c = tree.vertex("c").unwrap();
        assert_eq!(tree.distance(&a, &c), 3.5);
        let again = parse_tree(&format_tree(&tree)).unwrap();
        assert_eq!(again.edges(), tree.edges());
    }

    #[test]
    fn tree_file_errors_name_the_line() {
        match parse_tree("edge a b 1\nedge b c x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_tree("edge a b 1\nedge b a 1\n").is_err());
        assert!(parse_tree("").is_err());
        let single = parse_tree("vertex solo\n").unwrap();
        assert_eq!(single.num_vertices(), 1);
    }

    #[test]
    fn point_lists() {
        let disk = PoincareDisk::default();
        let pts = parse_points(&disk, "0 0\n# skip\n0.5 0.25\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert!(matches!(parse_points(&disk, "0 0\n2 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_points(&disk, "# nothing\n").is_err());
    }

    #[test]
    fn point_syntax() {
        let tree = parse_tree("edge a b 2\n").unwrap();
        assert_eq!(parse_point(&tree, "vertex b").unwrap(), TreePoint::Vertex(1));
        assert_eq!(
            parse_point(&tree, "edge 0 0.5").unwrap(),
            TreePoint::Edge { edge: 0, offset: 0.5 }
        );
        assert!(parse_point(&tree, "0.1 0.2").is_err());
        let disk = PoincareDisk::default();
        assert!(parse_point(&disk, "0.1 0.2").is_ok());
        assert!(parse_point(&disk, "vertex a").is_err());
        assert!(parse_point(&disk, "0.9 0.9").is_err());
    }
}
