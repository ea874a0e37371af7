//! Undirected graphs on `p` nodes and families of candidate graphs.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};

/// Simple undirected graph with nodes `0..p`.
///
/// Edges are kept as a sorted list of `(a, b)` pairs with `a < b`, which is
/// also the canonical form used for equality, hashing and ordering. Node
/// degrees are maintained alongside.
#[derive(Clone)]
pub struct Graph {
    p: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl Graph {
    pub fn empty(p: usize) -> Self {
        Graph { p, edges: Vec::new(), degrees: vec![0; p] }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Graph::empty(p);
        for a in 0..p {
            for b in a + 1..p {
                g.add_edge(a, b).expect("valid pair");
            }
        }
        g
    }

    pub fn from_edges<I>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(p);
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    fn key(&self, a: usize, b: usize) -> Result<(usize, usize)> {
        if a == b {
            return Err(GgmError::domain(format!("self-loop on node {a}")));
        }
        if a >= self.p || b >= self.p {
            return Err(GgmError::domain(format!(
                "edge ({a}, {b}) out of range for p = {}",
                self.p
            )));
        }
        Ok((a.min(b), a.max(b)))
    }

    /// Adds `{a, b}`; returns whether the edge was new.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<bool> {
        let e = self.key(a, b)?;
        match self.edges.binary_search(&e) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.edges.insert(pos, e);
                self.degrees[a] += 1;
                self.degrees[b] += 1;
                Ok(true)
            }
        }
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> Result<bool> {
        let e = self.key(a, b)?;
        match self.edges.binary_search(&e) {
            Ok(pos) => {
                self.edges.remove(pos);
                self.degrees[a] -= 1;
                self.degrees[b] -= 1;
                Ok(true)
            }
            Err(_) => Ok(false),
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn degree(&self, a: usize) -> usize {
        self.degrees[a]
    }

    /// `deg(G)`: the largest node degree (0 for the empty graph).
    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Neighbours of `a` in increasing order.
    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(u, v)| {
            if u == a {
                Some(v)
            } else if v == a {
                Some(u)
            } else {
                None
            }
        })
    }

    pub fn neighborhood(&self, a: usize) -> Vec<usize> {
        self.neighbors(a).collect()
    }

    /// Edges as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.edges.clone()
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.p == other.p && self.edges().all(|(a, b)| other.has_edge(a, b))
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            p: self.p(),
            edges: self.edges().map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let mut g = Graph::empty(json.p);
        for &[a, b] in &json.edges {
            if a >= b {
                return Err(GgmError::Parse(format!(
                    "graph edge [{a}, {b}] must satisfy a < b"
                )));
            }
            g.add_edge(a, b)?;
        }
        Ok(g)
    }
}

/// Degree of every node; entries sum to twice the edge count.
pub fn degree_profile(g: &Graph) -> Vec<usize> {
    (0..g.p()).map(|a| g.degree(a)).collect()
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.edges == other.edges
    }
}

impl Eq for Graph {}

impl Hash for Graph {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.p.hash(state);
        self.edges.hash(state);
    }
}

impl PartialOrd for Graph {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: fewer edges first, then lexicographic edge list.
impl Ord for Graph {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.p()
            .cmp(&other.p())
            .then(self.edges.len().cmp(&other.edges.len()))
            .then_with(|| self.edges.cmp(&other.edges))
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(p={}, {:?})", self.p(), self.edge_list())
    }
}

/// Wire format `{"p": int, "edges": [[a, b], ...]}` with `a < b`, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub p: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = GraphJson::deserialize(d)?;
        Graph::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// Which construction produced a family member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Qe,
    C01,
    La,
    Ew,
    User,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Qe => "qe",
            Provenance::C01 => "c01",
            Provenance::La => "la",
            Provenance::Ew => "ew",
            Provenance::User => "user",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Ordered, duplicate-free list of graphs sharing a node count and a degree cap.
#[derive(Debug, Clone)]
pub struct GraphFamily {
    p: usize,
    d_max: usize,
    graphs: Vec<Graph>,
    provenance: Vec<Provenance>,
    index: HashMap<u64, Vec<usize>>,
    /// Set when a construction stopped early (QE size cap, truncated lasso paths).
    pub truncated: bool,
}

impl GraphFamily {
    pub fn new(p: usize, d_max: usize) -> Self {
        GraphFamily {
            p,
            d_max,
            graphs: Vec::new(),
            provenance: Vec::new(),
            index: HashMap::new(),
            truncated: false,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Graph, Provenance)> {
        self.graphs.iter().zip(self.provenance.iter().copied())
    }

    fn hash_of(g: &Graph) -> u64 {
        let mut h = DefaultHasher::new();
        g.hash(&mut h);
        h.finish()
    }

    pub fn contains(&self, g: &Graph) -> bool {
        self.index
            .get(&Self::hash_of(g))
            .is_some_and(|ids| ids.iter().any(|&i| self.graphs[i] == *g))
    }

    /// Appends `g` unless already present; returns whether it was inserted.
    pub fn push(&mut self, g: Graph, prov: Provenance) -> Result<bool> {
        if g.p() != self.p {
            return Err(GgmError::domain(format!(
                "graph on {} nodes pushed into a family on {} nodes",
                g.p(),
                self.p
            )));
        }
        if g.max_degree() > self.d_max {
            return Err(GgmError::domain(format!(
                "graph degree {} exceeds the family cap {}",
                g.max_degree(),
                self.d_max
            )));
        }
        if self.contains(&g) {
            return Ok(false);
        }
        self.index.entry(Self::hash_of(&g)).or_default().push(self.graphs.len());
        self.graphs.push(g);
        self.provenance.push(prov);
        Ok(true)
    }

    /// Largest degree over members (0 for an empty family).
    pub fn max_member_degree(&self) -> usize {
        self.graphs.iter().map(Graph::max_degree).max().unwrap_or(0)
    }

    /// Family built from user-supplied graphs; the degree cap is the largest member degree.
    pub fn from_graphs(p: usize, graphs: Vec<Graph>) -> Result<Self> {
        let d_max = graphs.iter().map(Graph::max_degree).max().unwrap_or(0);
        let mut fam = GraphFamily::new(p, d_max);
        for g in graphs {
            fam.push(g, Provenance::User)?;
        }
        Ok(fam)
    }
}

/// Deduplicated union; the first occurrence of a graph keeps its provenance.
pub fn family_union(fams: &[&GraphFamily]) -> Result<GraphFamily> {
    let first = fams
        .first()
        .ok_or_else(|| GgmError::domain("family union of an empty list"))?;
    let mut out = GraphFamily::new(first.p, first.d_max);
    for fam in fams {
        if fam.p != first.p {
            return Err(GgmError::domain(format!(
                "cannot union families on {} and {} nodes",
                first.p, fam.p
            )));
        }
        if fam.d_max != first.d_max {
            return Err(GgmError::domain(format!(
                "cannot union families with degree caps {} and {}",
                first.d_max, fam.d_max
            )));
        }
        out.truncated |= fam.truncated;
        for (g, prov) in fam.iter() {
            out.push(g.clone(), prov)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn degree_profiles() {
        assert_eq!(degree_profile(&Graph::empty(5)), vec![0; 5]);
        assert_eq!(degree_profile(&Graph::complete(4)), vec![3; 4]);
        let path = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(degree_profile(&path), vec![1, 2, 1]);
        assert_eq!(path.max_degree(), 2);
    }

    #[test]
    fn rejects_loops_and_out_of_range() {
        let mut g = Graph::empty(3);
        assert!(g.add_edge(1, 1).is_err());
        assert!(g.add_edge(0, 3).is_err());
        assert!(g.add_edge(2, 0).unwrap());
        assert!(!g.add_edge(0, 2).unwrap());
        assert_eq!(g.edge_list(), vec![(0, 2)]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = Graph::from_edges(4, [(2, 3), (0, 1)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"p":4,"edges":[[0,1],[2,3]]}"#);
        let back: Graph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<Graph>(r#"{"p":3,"edges":[[2,1]]}"#).is_err());
        assert!(serde_json::from_str::<Graph>(r#"{"p":3,"edges":[[1,5]]}"#).is_err());
    }

    #[test]
    fn union_idempotent_and_disjoint() {
        let mut a = GraphFamily::new(3, 2);
        a.push(Graph::empty(3), Provenance::C01).unwrap();
        let u = family_union(&[&a, &a]).unwrap();
        assert_eq!(u.graphs(), a.graphs());

        let mut b = GraphFamily::new(3, 2);
        b.push(Graph::from_edges(3, [(0, 1)]).unwrap(), Provenance::La).unwrap();
        let u = family_union(&[&a, &b]).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(u.provenance(1), Provenance::La);

        let c = GraphFamily::new(4, 2);
        assert!(family_union(&[&a, &c]).is_err());
    }

    #[test]
    fn union_keeps_first_provenance() {
        let g = Graph::from_edges(3, [(0, 2)]).unwrap();
        let mut a = GraphFamily::new(3, 2);
        a.push(g.clone(), Provenance::Qe).unwrap();
        let mut b = GraphFamily::new(3, 2);
        b.push(g, Provenance::Ew).unwrap();
        let u = family_union(&[&a, &b]).unwrap();
        assert_eq!(u.len(), 1);
        assert_eq!(u.provenance(0), Provenance::Qe);
    }

    #[test]
    fn push_enforces_degree_cap() {
        let mut f = GraphFamily::new(4, 1);
        assert!(f.push(Graph::from_edges(4, [(0, 1), (0, 2)]).unwrap(), Provenance::User).is_err());
    }

    fn arb_edges(p: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
        proptest::collection::vec((0..p, 0..p), 0..12)
            .prop_map(|v| v.into_iter().filter(|(a, b)| a != b).collect())
    }

    proptest! {
        #[test]
        fn equality_ignores_order_and_orientation(edges in arb_edges(7), seed in any::<u64>()) {
            let g1 = Graph::from_edges(7, edges.iter().copied()).unwrap();
            let mut shuffled: Vec<_> = edges.iter().map(|&(a, b)| if seed % 2 == 0 { (b, a) } else { (a, b) }).collect();
            shuffled.reverse();
            let g2 = Graph::from_edges(7, shuffled).unwrap();
            prop_assert_eq!(&g1, &g2);
            let total: usize = degree_profile(&g1).iter().sum();
            prop_assert_eq!(total, 2 * g1.n_edges());
        }

        #[test]
        fn union_commutes_as_sets(e1 in arb_edges(5), e2 in arb_edges(5), e3 in arb_edges(5)) {
            let fam = |es: &[Vec<(usize, usize)>]| {
                let mut f = GraphFamily::new(5, 4);
                for e in es {
                    f.push(Graph::from_edges(5, e.iter().copied()).unwrap(), Provenance::User).unwrap();
                }
                f
            };
            let a = fam(&[e1.clone()]);
            let b = fam(&[e2.clone(), e3.clone()]);
            let ab: HashSet<Graph> = family_union(&[&a, &b]).unwrap().graphs().iter().cloned().collect();
            let ba: HashSet<Graph> = family_union(&[&b, &a]).unwrap().graphs().iter().cloned().collect();
            prop_assert_eq!(ab, ba);
        }
    }
}
