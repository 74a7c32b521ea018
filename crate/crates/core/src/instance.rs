//! Graph streams with per-vertex capacities, b-matchings, and the `msbm 1`
//! text format.
//!
//! Vertices are dense `0..n` ids. Edges are held in arrival order; the edge
//! at position `i` has arrival index `i + 1`. Parallel edges are allowed and
//! are distinguished only by arrival index.

use std::fmt::{self, Write as _};

use thiserror::Error;

pub type VertexId = usize;

/// Opaque payload resolved by an oracle.
pub type Key = u64;

/// Position of an edge in the stream (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

impl EdgeId {
    /// 1-based arrival index `t`.
    pub fn arrival(self) -> usize {
        self.0 + 1
    }
}

/// Serialized as the 1-based arrival index.
impl serde::Serialize for EdgeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.arrival() as u64)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.arrival())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub key: Key,
}

impl Edge {
    pub fn endpoints(&self) -> [VertexId; 2] {
        [self.u, self.v]
    }

    pub fn touches(&self, x: VertexId) -> bool {
        self.u == x || self.v == x
    }

    pub fn shares_endpoint(&self, other: &Edge) -> bool {
        self.touches(other.u) || self.touches(other.v)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("instance must have at least one vertex")]
    NoVertices,
    #[error("capacity vector has length {got}, expected {expected}")]
    CapacityLength { expected: usize, got: usize },
    #[error("capacity of vertex {vertex} must be positive")]
    ZeroCapacity { vertex: VertexId },
    #[error("edge {edge}: vertex {vertex} out of range (n = {n})")]
    VertexOutOfRange { edge: usize, vertex: VertexId, n: usize },
    #[error("edge {edge}: self-loop at vertex {vertex}")]
    SelfLoop { edge: usize, vertex: VertexId },
    #[error("unknown edge id {0}")]
    UnknownEdge(usize),
    #[error("adding {edge} exceeds the capacity of vertex {vertex}")]
    CapacityExceeded { edge: EdgeId, vertex: VertexId },
    #[error("{0} is already in the b-matching")]
    DuplicateEdge(EdgeId),
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

/// An immutable edge stream over a capacitated vertex set.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    capacities: Vec<u32>,
    edges: Vec<Edge>,
}

impl Instance {
    pub fn new(capacities: Vec<u32>, edges: Vec<Edge>) -> Result<Self, ModelError> {
        let n = capacities.len();
        if n == 0 {
            return Err(ModelError::NoVertices);
        }
        if let Some(vertex) = capacities.iter().position(|&b| b == 0) {
            return Err(ModelError::ZeroCapacity { vertex });
        }
        for (i, e) in edges.iter().enumerate() {
            for vertex in e.endpoints() {
                if vertex >= n {
                    return Err(ModelError::VertexOutOfRange { edge: i + 1, vertex, n });
                }
            }
            if e.u == e.v {
                return Err(ModelError::SelfLoop { edge: i + 1, vertex: e.u });
            }
        }
        Ok(Self { capacities, edges })
    }

    pub fn uniform(num_vertices: usize, b: u32, edges: Vec<Edge>) -> Result<Self, ModelError> {
        Self::new(vec![b; num_vertices], edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.capacities.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn capacity(&self, v: VertexId) -> u32 {
        self.capacities[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn get(&self, id: EdgeId) -> Result<&Edge, ModelError> {
        self.edges.get(id.0).ok_or(ModelError::UnknownEdge(id.0))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn key(&self, id: EdgeId) -> Key {
        self.edges[id.0].key
    }

    pub fn keys_of<'a>(&'a self, ids: impl IntoIterator<Item = &'a EdgeId>) -> Vec<Key> {
        ids.into_iter().map(|&id| self.key(id)).collect()
    }

    /// True when every capacity equals 1, i.e. feasible sets are matchings.
    pub fn is_matching_instance(&self) -> bool {
        self.capacities.iter().all(|&b| b == 1)
    }

    pub fn max_capacity(&self) -> u32 {
        self.capacities.iter().copied().max().unwrap_or(1)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices()];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// Same graph with every key replaced by the edge's 0-based position.
    pub fn rekeyed_by_position(&self) -> Self {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| Edge { key: i as Key, ..*e })
            .collect();
        Self { capacities: self.capacities.clone(), edges }
    }

    /// Canonical `msbm 1` document: no comments, uniform capacities collapsed.
    pub fn to_stream_string(&self) -> String {
        let mut out = String::new();
        out.push_str("msbm 1\n");
        let _ = writeln!(out, "n {}", self.num_vertices());
        let first = self.capacities[0];
        if self.capacities.iter().all(|&b| b == first) {
            let _ = writeln!(out, "b uniform {first}");
        } else {
            out.push_str("b list");
            for b in &self.capacities {
                let _ = write!(out, " {b}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "m {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(out, "e {} {} {}", e.u, e.v, e.key);
        }
        out
    }
}

/// Parses an `msbm 1` stream document. Arrival order is line order.
pub fn parse_stream(text: &str) -> Result<Instance, ParseError> {
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((i + 1, content))
    });
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| ParseError::new(text.lines().count().max(1), format!("unexpected end of document, expected {what}")))
    };

    let (line, magic) = next("header `msbm 1`")?;
    if magic.split_whitespace().collect::<Vec<_>>() != ["msbm", "1"] {
        return Err(ParseError::new(line, format!("malformed header `{magic}`, expected `msbm 1`")));
    }

    let (line, n_line) = next("`n <num_vertices>`")?;
    let n = match n_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["n", n] => parse_num::<usize>(n, line, "vertex count")?,
        _ => return Err(ParseError::new(line, format!("malformed header `{n_line}`, expected `n <num_vertices>`"))),
    };
    if n == 0 {
        return Err(ParseError::new(line, "vertex count must be positive"));
    }

    let (line, b_line) = next("capacity line")?;
    let tokens: Vec<&str> = b_line.split_whitespace().collect();
    let capacities = match tokens.as_slice() {
        ["b", "uniform", k] => {
            let k = parse_capacity(k, line)?;
            vec![k; n]
        }
        ["b", "list", rest @ ..] => {
            if rest.len() != n {
                return Err(ParseError::new(line, format!("capacity list has {} entries, expected {n}", rest.len())));
            }
            rest.iter().map(|t| parse_capacity(t, line)).collect::<Result<Vec<_>, _>>()?
        }
        _ => {
            return Err(ParseError::new(
                line,
                format!("malformed header `{b_line}`, expected `b uniform <k>` or `b list ...`"),
            ))
        }
    };

    let (line, m_line) = next("`m <num_edges>`")?;
    let m = match m_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["m", m] => parse_num::<usize>(m, line, "edge count")?,
        _ => return Err(ParseError::new(line, format!("malformed header `{m_line}`, expected `m <num_edges>`"))),
    };

    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, e_line) = next("edge line `e <u> <v> <key>`")?;
        let (u, v, key) = match e_line.split_whitespace().collect::<Vec<_>>()[..] {
            ["e", u, v, key] => (
                parse_num::<usize>(u, line, "vertex id")?,
                parse_num::<usize>(v, line, "vertex id")?,
                parse_num::<Key>(key, line, "key")?,
            ),
            _ => return Err(ParseError::new(line, format!("malformed edge line `{e_line}`"))),
        };
        for x in [u, v] {
            if x >= n {
                return Err(ParseError::new(line, format!("vertex id {x} out of range (n = {n})")));
            }
        }
        if u == v {
            return Err(ParseError::new(line, format!("self-loop at line {line}")));
        }
        edges.push(Edge { u, v, key });
    }
    if let Some((line, extra)) = lines.next() {
        return Err(ParseError::new(line, format!("trailing content `{extra}` after {m} edges")));
    }

    Instance::new(capacities, edges).map_err(|e| ParseError::new(0, e.to_string()))
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, ParseError> {
    tok.parse()
        .map_err(|_| ParseError::new(line, format!("invalid {what} `{tok}`")))
}

fn parse_capacity(tok: &str, line: usize) -> Result<u32, ParseError> {
    match tok.parse::<i64>() {
        Ok(b) if b >= 1 && b <= u32::MAX as i64 => Ok(b as u32),
        Ok(_) => Err(ParseError::new(line, format!("non-positive capacity `{tok}`"))),
        Err(_) => Err(ParseError::new(line, format!("invalid capacity `{tok}`"))),
    }
}

/// A set of edges whose per-vertex degree never exceeds the capacity.
#[derive(Clone, Debug, PartialEq)]
pub struct BMatching {
    edges: Vec<EdgeId>,
    degree: Vec<u32>,
}

impl BMatching {
    pub fn empty(num_vertices: usize) -> Self {
        Self { edges: Vec::new(), degree: vec![0; num_vertices] }
    }

    pub fn from_edges(inst: &Instance, ids: impl IntoIterator<Item = EdgeId>) -> Result<Self, ModelError> {
        let mut m = Self::empty(inst.num_vertices());
        for id in ids {
            m.insert(inst, id)?;
        }
        Ok(m)
    }

    pub fn can_add(&self, inst: &Instance, id: EdgeId) -> bool {
        let e = inst.edge(id);
        e.endpoints().iter().all(|&v| self.degree[v] < inst.capacity(v))
    }

    pub fn insert(&mut self, inst: &Instance, id: EdgeId) -> Result<(), ModelError> {
        let e = *inst.get(id)?;
        if self.contains(id) {
            return Err(ModelError::DuplicateEdge(id));
        }
        for v in e.endpoints() {
            if self.degree[v] >= inst.capacity(v) {
                return Err(ModelError::CapacityExceeded { edge: id, vertex: v });
            }
        }
        for v in e.endpoints() {
            self.degree[v] += 1;
        }
        let pos = self.edges.binary_search(&id).unwrap_or_else(|p| p);
        self.edges.insert(pos, id);
        Ok(())
    }

    pub fn contains(&self, id: EdgeId) -> bool {
        self.edges.binary_search(&id).is_ok()
    }

    /// Edge ids in ascending arrival order.
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn degree(&self, v: VertexId) -> u32 {
        self.degree[v]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn keys(&self, inst: &Instance) -> Vec<Key> {
        inst.keys_of(&self.edges)
    }
}

/// `M ∩ N(e)`: edges of `matching` sharing an endpoint with `e`, excluding `e`.
pub fn neighbors_in(inst: &Instance, e: EdgeId, matching: &[EdgeId]) -> Vec<EdgeId> {
    let target = inst.edge(e);
    matching
        .iter()
        .copied()
        .filter(|&x| x != e && inst.edge(x).shares_endpoint(target))
        .collect()
}

/// Whether `edges` respects every capacity. Duplicate ids count twice.
pub fn is_feasible(inst: &Instance, edges: &[EdgeId]) -> Result<bool, ModelError> {
    let mut degree = vec![0u32; inst.num_vertices()];
    for &id in edges {
        let e = inst.get(id)?;
        degree[e.u] += 1;
        degree[e.v] += 1;
    }
    Ok(degree.iter().zip(inst.capacities()).all(|(d, b)| d <= b))
}

/// Greedy maximal b-matching in arrival order. Its size lower-bounds
/// `M_max` and is at least `M_max / 2`.
pub fn greedy_maximal(inst: &Instance) -> BMatching {
    let mut m = BMatching::empty(inst.num_vertices());
    for id in inst.edge_ids() {
        if m.can_add(inst, id) {
            m.insert(inst, id).expect("checked by can_add");
        }
    }
    m
}

/// Exact maximum cardinality of a feasible b-matching by exhaustive search.
pub fn max_cardinality_exact(inst: &Instance) -> usize {
    fn go(inst: &Instance, i: usize, degree: &mut [u32], size: usize, best: &mut usize) {
        let m = inst.num_edges();
        if size + (m - i) <= *best {
            return;
        }
        if i == m {
            *best = size;
            return;
        }
        let e = inst.edges()[i];
        if degree[e.u] < inst.capacity(e.u) && degree[e.v] < inst.capacity(e.v) {
            degree[e.u] += 1;
            degree[e.v] += 1;
            go(inst, i + 1, degree, size + 1, best);
            degree[e.u] -= 1;
            degree[e.v] -= 1;
        }
        go(inst, i + 1, degree, size, best);
    }
    let mut best = 0;
    go(inst, 0, &mut vec![0; inst.num_vertices()], 0, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(u: VertexId, v: VertexId, key: Key) -> Edge {
        Edge { u, v, key }
    }

    #[test]
    fn minimal_document() {
        let inst = parse_stream("msbm 1\nn 2\nb uniform 1\nm 1\ne 0 1 0\n").unwrap();
        assert_eq!(inst.num_vertices(), 2);
        assert_eq!(inst.edges(), &[e(0, 1, 0)]);
        assert_eq!(EdgeId(0).arrival(), 1);
    }

    #[test]
    fn empty_edge_section() {
        let inst = parse_stream("msbm 1\nn 3\nb list 1 2 3\nm 0\n").unwrap();
        assert_eq!(inst.num_edges(), 0);
        assert_eq!(inst.capacities(), &[1, 2, 3]);
    }

    #[test]
    fn self_loop_names_line() {
        let doc = "msbm 1\n# comment\nn 4\nb uniform 1\nm 2\ne 0 1 0\ne 3 3 1\n";
        let err = parse_stream(doc).unwrap_err();
        assert_eq!(err.line, 7);
        assert!(err.message.contains("self-loop at line 7"), "{err}");
    }

    #[test]
    fn parse_errors() {
        let cases = [
            ("msbm 2\nn 1\nb uniform 1\nm 0\n", 1),
            ("msbm 1\nn 2\nb uniform 0\nm 0\n", 3),
            ("msbm 1\nn 2\nb list 1 -1\nm 0\n", 3),
            ("msbm 1\nn 2\nb list 1\nm 0\n", 3),
            ("msbm 1\nn 2\nb uniform 1\nm 1\ne 0 2 0\n", 5),
            ("msbm 1\nn 2\nb uniform 1\nm 2\ne 0 1 0\n", 5),
            ("msbm 1\nn 2\nb uniform 1\nm 0\ne 0 1 0\n", 5),
            ("msbm 1\nn x\nb uniform 1\nm 0\n", 2),
        ];
        for (doc, line) in cases {
            let err = parse_stream(doc).unwrap_err();
            assert_eq!(err.line, line, "{doc:?}: {err}");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let doc = "# header\nmsbm 1\n\nn 3 # three\nb uniform 2\nm 2\ne 0 1 5\n  # mid\ne 1 2 6\n";
        let inst = parse_stream(doc).unwrap();
        assert_eq!(inst.edges(), &[e(0, 1, 5), e(1, 2, 6)]);
        assert_eq!(inst.to_stream_string(), "msbm 1\nn 3\nb uniform 2\nm 2\ne 0 1 5\ne 1 2 6\n");
    }

    #[test]
    fn neighbors() {
        // a=0, b=1, c=2, d=3
        let inst = Instance::uniform(4, 1, vec![e(0, 1, 0), e(1, 2, 1), e(2, 3, 2), e(0, 2, 3), e(1, 3, 4)]).unwrap();
        assert_eq!(neighbors_in(&inst, EdgeId(0), &[EdgeId(1)]), vec![EdgeId(1)]);
        assert_eq!(neighbors_in(&inst, EdgeId(0), &[EdgeId(2)]), vec![]);
        assert_eq!(
            neighbors_in(&inst, EdgeId(0), &[EdgeId(3), EdgeId(4), EdgeId(2)]),
            vec![EdgeId(3), EdgeId(4)]
        );
        assert_eq!(neighbors_in(&inst, EdgeId(0), &[EdgeId(0)]), vec![]);
    }

    #[test]
    fn star_feasibility() {
        let inst = Instance::new(vec![2, 1, 1, 1], vec![e(0, 1, 0), e(0, 2, 1), e(0, 3, 2)]).unwrap();
        assert!(!is_feasible(&inst, &[EdgeId(0), EdgeId(1), EdgeId(2)]).unwrap());
        assert!(is_feasible(&inst, &[EdgeId(0), EdgeId(2)]).unwrap());
        assert!(is_feasible(&inst, &[]).unwrap());
        assert_eq!(is_feasible(&inst, &[EdgeId(9)]), Err(ModelError::UnknownEdge(9)));
    }

    #[test]
    fn bmatching_insert_respects_capacity() {
        let inst = Instance::new(vec![2, 1, 1, 1], vec![e(0, 1, 0), e(0, 2, 1), e(0, 3, 2)]).unwrap();
        let mut m = BMatching::empty(4);
        m.insert(&inst, EdgeId(2)).unwrap();
        m.insert(&inst, EdgeId(0)).unwrap();
        assert_eq!(m.edges(), &[EdgeId(0), EdgeId(2)]);
        assert!(!m.can_add(&inst, EdgeId(1)));
        assert!(matches!(m.insert(&inst, EdgeId(1)), Err(ModelError::CapacityExceeded { vertex: 0, .. })));
        assert_eq!(m.insert(&inst, EdgeId(0)), Err(ModelError::DuplicateEdge(EdgeId(0))));
    }

    #[test]
    fn invalid_instances() {
        assert_eq!(Instance::new(vec![], vec![]), Err(ModelError::NoVertices));
        assert_eq!(Instance::new(vec![1, 0], vec![]), Err(ModelError::ZeroCapacity { vertex: 1 }));
        assert!(matches!(Instance::uniform(2, 1, vec![e(1, 1, 0)]), Err(ModelError::SelfLoop { .. })));
    }

    #[test]
    fn greedy_is_half_of_exact() {
        // path a-b-c-d: greedy in this order takes the middle edge only
        let inst = Instance::uniform(4, 1, vec![e(1, 2, 0), e(0, 1, 1), e(2, 3, 2)]).unwrap();
        assert_eq!(greedy_maximal(&inst).len(), 1);
        assert_eq!(max_cardinality_exact(&inst), 2);
    }
}
