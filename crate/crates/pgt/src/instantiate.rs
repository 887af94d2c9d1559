//! Materializes instantiations with full provenance labels. This is the
//! desk-scale verification path: template-side algorithms are checked against
//! graphs produced here, never the other way around.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::template::{InstanceAddress, ParametricGraphTemplate, TemplateId, VertexId};
use crate::weight::Weight;

static INSTANTIATION_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of instantiations performed by this process. Lets callers assert
/// that template-side queries never expanded a graph.
pub fn instantiation_count() -> u64 {
    INSTANTIATION_COUNT.load(Ordering::Relaxed)
}

/// Canonical string form `origin@i0.i1`; vertices of the root instance use
/// the bare origin id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConcreteVertexId(pub String);

impl fmt::Display for ConcreteVertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn concrete_id(origin: &VertexId, address: &InstanceAddress) -> ConcreteVertexId {
    if address.is_root() {
        ConcreteVertexId(origin.0.clone())
    } else {
        ConcreteVertexId(format!("{origin}@{address}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteVertex {
    pub id: ConcreteVertexId,
    pub origin: VertexId,
    pub address: InstanceAddress,
    pub dummy: bool,
}

/// Index of the template edge an instantiated edge was copied from.
pub type EdgeRef = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteEdge {
    pub src: ConcreteVertexId,
    pub dst: ConcreteVertexId,
    pub weight: Weight,
    pub origin: Option<EdgeRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConcreteGraph {
    pub vertices: Vec<ConcreteVertex>,
    pub edges: Vec<ConcreteEdge>,
}

impl ConcreteGraph {
    pub fn vertex(&self, id: &ConcreteVertexId) -> Option<&ConcreteVertex> {
        self.vertices.iter().find(|v| &v.id == id)
    }

    pub fn contains_label(&self, origin: &VertexId, address: &InstanceAddress) -> bool {
        self.vertices
            .iter()
            .any(|v| &v.origin == origin && &v.address == address)
    }

    fn sort(&mut self) {
        self.vertices.sort_by(|a, b| a.id.cmp(&b.id));
        self.edges
            .sort_by(|a, b| (&a.src, &a.dst, &a.weight, a.origin).cmp(&(&b.src, &b.dst, &b.weight, b.origin)));
    }
}

/// Expands the template into its flat graph, carrying `(origin, address)`
/// labels on every vertex. Fails if the exact size exceeds `limit`.
pub fn instantiate(pgt: &ParametricGraphTemplate, limit: &BigUint) -> Result<ConcreteGraph> {
    let violations = pgt.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidTemplate(violations));
    }
    let size = pgt.instantiation_size();
    if &size.vertices > limit || &size.edges > limit {
        return Err(Error::SizeLimitExceeded {
            vertices: size.vertices,
            edges: size.edges,
            limit: limit.clone(),
        });
    }
    INSTANTIATION_COUNT.fetch_add(1, Ordering::Relaxed);

    let owner = pgt.owner_map();
    let params = pgt.parameter_map();

    // Parameters fit in u64 once the size check passed: every template on an
    // owner path repeats at least one vertex.
    let shape_of = |t: &TemplateId| -> Vec<u64> {
        pgt.root_path(t)
            .iter()
            .skip(1)
            .map(|id| u64::try_from(&params[id]).expect("parameter bounded by size limit"))
            .collect()
    };

    let mut g = ConcreteGraph::default();
    let mut shapes: BTreeMap<TemplateId, Vec<u64>> = BTreeMap::new();
    for v in &pgt.vertices {
        let t = &owner[v];
        let shape = shapes.entry(t.clone()).or_insert_with(|| shape_of(t)).clone();
        for addr in enumerate_addresses(&shape) {
            let address = InstanceAddress::from_indices(&addr);
            g.vertices.push(ConcreteVertex {
                id: concrete_id(v, &address),
                origin: v.clone(),
                address,
                dummy: pgt.dummy_vertices.contains(v),
            });
        }
    }

    for (idx, e) in pgt.edges.iter().enumerate() {
        let tu = &owner[&e.src];
        let tv = &owner[&e.dst];
        if let Some(spec) = &e.sibling {
            // One edge u_j -> v_{f(j)} per instance j, within each instance
            // of the surrounding template.
            let shape = shapes.entry(tu.clone()).or_insert_with(|| shape_of(tu)).clone();
            let (outer, p) = shape.split_at(shape.len().saturating_sub(1));
            let p = if shape.is_empty() { 1 } else { p[0] };
            for prefix in enumerate_addresses(outer) {
                for j in 0..p {
                    let mut a_src = prefix.clone();
                    a_src.push(j);
                    let mut a_dst = prefix.clone();
                    a_dst.push(spec.apply(j, p));
                    g.edges.push(ConcreteEdge {
                        src: concrete_id(&e.src, &InstanceAddress::from_indices(&a_src)),
                        dst: concrete_id(&e.dst, &InstanceAddress::from_indices(&a_dst)),
                        weight: e.weight.clone(),
                        origin: Some(idx),
                    });
                }
            }
        } else {
            // The deeper endpoint drives the enumeration; the shallower one
            // takes the shared address prefix.
            let (su, sv) = (
                shapes.entry(tu.clone()).or_insert_with(|| shape_of(tu)).clone(),
                shapes.entry(tv.clone()).or_insert_with(|| shape_of(tv)).clone(),
            );
            let deep = su.len().max(sv.len());
            let deep_shape = if su.len() == deep { &su } else { &sv };
            for addr in enumerate_addresses(deep_shape) {
                let a_src = InstanceAddress::from_indices(&addr[..su.len()]);
                let a_dst = InstanceAddress::from_indices(&addr[..sv.len()]);
                g.edges.push(ConcreteEdge {
                    src: concrete_id(&e.src, &a_src),
                    dst: concrete_id(&e.dst, &a_dst),
                    weight: e.weight.clone(),
                    origin: Some(idx),
                });
            }
        }
    }

    g.sort();
    Ok(g)
}

fn enumerate_addresses(shape: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for &p in shape {
        let mut next = Vec::with_capacity(out.len() * p as usize);
        for prefix in &out {
            for j in 0..p {
                let mut a = prefix.clone();
                a.push(j);
                next.push(a);
            }
        }
        out = next;
    }
    out
}

/// Collapses every instance of `v` into a single vertex labeled `(v, root)`.
/// Parallel edges are preserved.
pub fn merge_vertex_instances(g: &ConcreteGraph, v: &VertexId) -> Result<ConcreteGraph> {
    if !g.vertices.iter().any(|cv| &cv.origin == v) {
        return Err(Error::UnknownOrigin(v.clone()));
    }
    let merged_id = concrete_id(v, &InstanceAddress::root());
    let mut out = ConcreteGraph::default();
    let mut merged_dummy = false;
    for cv in &g.vertices {
        if &cv.origin == v {
            merged_dummy |= cv.dummy;
        } else {
            out.vertices.push(cv.clone());
        }
    }
    out.vertices.push(ConcreteVertex {
        id: merged_id.clone(),
        origin: v.clone(),
        address: InstanceAddress::root(),
        dummy: merged_dummy,
    });
    let rename: BTreeMap<&ConcreteVertexId, &ConcreteVertexId> = g
        .vertices
        .iter()
        .filter(|cv| &cv.origin == v)
        .map(|cv| (&cv.id, &merged_id))
        .collect();
    for e in &g.edges {
        out.edges.push(ConcreteEdge {
            src: (*rename.get(&e.src).unwrap_or(&&e.src)).clone(),
            dst: (*rename.get(&e.dst).unwrap_or(&&e.dst)).clone(),
            weight: e.weight.clone(),
            origin: e.origin,
        });
    }
    out.sort();
    Ok(out)
}

/// Contracts every unbounded-weight edge, merging its endpoints. The label of
/// a merged class comes from its non-dummy members; classes of dummies only
/// keep an arbitrary (smallest) dummy label.
pub fn contract_infinite_edges(g: &ConcreteGraph) -> ConcreteGraph {
    let index: BTreeMap<&ConcreteVertexId, usize> =
        g.vertices.iter().enumerate().map(|(i, v)| (&v.id, i)).collect();
    let mut dsu = Dsu::new(g.vertices.len());
    for e in &g.edges {
        if e.weight.is_infinite() {
            dsu.union(index[&e.src], index[&e.dst]);
        }
    }

    // Pick each class representative: the smallest non-dummy label, or the
    // smallest label if the whole class is dummies.
    let mut rep: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..g.vertices.len() {
        let root = dsu.find(i);
        let cur = rep.entry(root).or_insert(i);
        let better = match (g.vertices[*cur].dummy, g.vertices[i].dummy) {
            (true, false) => true,
            (false, true) => false,
            _ => g.vertices[i].id < g.vertices[*cur].id,
        };
        if better {
            *cur = i;
        }
    }

    let mut out = ConcreteGraph::default();
    for (&root, &keep) in &rep {
        let _ = root;
        out.vertices.push(g.vertices[keep].clone());
    }
    for e in &g.edges {
        if e.weight.is_infinite() {
            continue;
        }
        let s = rep[&dsu.find(index[&e.src])];
        let d = rep[&dsu.find(index[&e.dst])];
        out.edges.push(ConcreteEdge {
            src: g.vertices[s].id.clone(),
            dst: g.vertices[d].id.clone(),
            weight: e.weight.clone(),
            origin: e.origin,
        });
    }
    out.sort();
    out
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Tests whether relabeling the origins of `g1` with `mapping` yields a graph
/// identical to `g2` up to a label-respecting vertex bijection: the bijection
/// must preserve mapped origins and carry the edge multiset (weights
/// included) exactly onto `g2`'s.
pub fn label_isomorphic(
    g1: &ConcreteGraph,
    g2: &ConcreteGraph,
    mapping: &BTreeMap<VertexId, VertexId>,
) -> Result<bool> {
    for v in &g1.vertices {
        if !mapping.contains_key(&v.origin) {
            return Err(Error::IncompleteMapping(v.origin.clone()));
        }
    }
    if g1.vertices.len() != g2.vertices.len() || g1.edges.len() != g2.edges.len() {
        return Ok(false);
    }

    let label1: Vec<(VertexId, InstanceAddress)> = g1
        .vertices
        .iter()
        .map(|v| (mapping[&v.origin].clone(), v.address.clone()))
        .collect();
    let label2: Vec<(VertexId, InstanceAddress)> = g2
        .vertices
        .iter()
        .map(|v| (v.origin.clone(), v.address.clone()))
        .collect();

    // Fast path: if mapped labels are unique and match exactly, they force
    // the bijection and only the edge multisets need comparing.
    let set1: BTreeSet<_> = label1.iter().collect();
    let set2: BTreeSet<_> = label2.iter().collect();
    if set1.len() == label1.len() && set1 == set2 {
        let id1: BTreeMap<&ConcreteVertexId, usize> =
            g1.vertices.iter().enumerate().map(|(i, v)| (&v.id, i)).collect();
        let id2: BTreeMap<&ConcreteVertexId, usize> =
            g2.vertices.iter().enumerate().map(|(i, v)| (&v.id, i)).collect();
        let mut e1: Vec<(&(VertexId, InstanceAddress), &(VertexId, InstanceAddress), &Weight)> = g1
            .edges
            .iter()
            .map(|e| (&label1[id1[&e.src]], &label1[id1[&e.dst]], &e.weight))
            .collect();
        let mut e2: Vec<_> = g2
            .edges
            .iter()
            .map(|e| (&label2[id2[&e.src]], &label2[id2[&e.dst]], &e.weight))
            .collect();
        e1.sort();
        e2.sort();
        return Ok(e1 == e2);
    }

    // General case: search for a bijection constrained by mapped origins,
    // narrowed first by iterated neighborhood refinement.
    Ok(iso_search(g1, g2, mapping))
}

fn iso_search(
    g1: &ConcreteGraph,
    g2: &ConcreteGraph,
    mapping: &BTreeMap<VertexId, VertexId>,
) -> bool {
    let n = g1.vertices.len();
    let idx1: BTreeMap<&ConcreteVertexId, usize> =
        g1.vertices.iter().enumerate().map(|(i, v)| (&v.id, i)).collect();
    let idx2: BTreeMap<&ConcreteVertexId, usize> =
        g2.vertices.iter().enumerate().map(|(i, v)| (&v.id, i)).collect();

    type AdjKey = (usize, bool, Weight);
    let adj_of = |edges: &[ConcreteEdge], idx: &BTreeMap<&ConcreteVertexId, usize>| {
        let mut adj: Vec<BTreeMap<AdjKey, usize>> = vec![BTreeMap::new(); n];
        for e in edges {
            let (s, d) = (idx[&e.src], idx[&e.dst]);
            *adj[s].entry((d, true, e.weight.clone())).or_insert(0) += 1;
            *adj[d].entry((s, false, e.weight.clone())).or_insert(0) += 1;
        }
        adj
    };
    let adj1 = adj_of(&g1.edges, &idx1);
    let adj2 = adj_of(&g2.edges, &idx2);

    // Joint color refinement over both graphs.
    let mut color1: Vec<u64> = Vec::with_capacity(n);
    let mut color2: Vec<u64> = Vec::with_capacity(n);
    {
        let mut palette: BTreeMap<String, u64> = BTreeMap::new();
        let assign = |key: String, palette: &mut BTreeMap<String, u64>| {
            let next = palette.len() as u64;
            *palette.entry(key).or_insert(next)
        };
        for v in &g1.vertices {
            color1.push(assign(mapping[&v.origin].to_string(), &mut palette));
        }
        for v in &g2.vertices {
            color2.push(assign(v.origin.to_string(), &mut palette));
        }
    }
    for _ in 0..n {
        let mut palette: BTreeMap<(u64, Vec<(u64, bool, Weight, usize)>), u64> = BTreeMap::new();
        let refine = |colors: &[u64], adj: &[BTreeMap<AdjKey, usize>], out: &mut Vec<u64>,
                      palette: &mut BTreeMap<(u64, Vec<(u64, bool, Weight, usize)>), u64>| {
            for (i, &c) in colors.iter().enumerate() {
                let mut sig: Vec<(u64, bool, Weight, usize)> = adj[i]
                    .iter()
                    .map(|(&(nb, dir, ref w), &cnt)| (colors[nb], dir, w.clone(), cnt))
                    .collect();
                sig.sort();
                let next = palette.len() as u64;
                out.push(*palette.entry((c, sig)).or_insert(next));
            }
        };
        let mut next1 = Vec::with_capacity(n);
        let mut next2 = Vec::with_capacity(n);
        refine(&color1, &adj1, &mut next1, &mut palette);
        refine(&color2, &adj2, &mut next2, &mut palette);
        if next1 == color1 && next2 == color2 {
            break;
        }
        color1 = next1;
        color2 = next2;
    }

    let mut count1: BTreeMap<u64, usize> = BTreeMap::new();
    let mut count2: BTreeMap<u64, usize> = BTreeMap::new();
    for &c in &color1 {
        *count1.entry(c).or_insert(0) += 1;
    }
    for &c in &color2 {
        *count2.entry(c).or_insert(0) += 1;
    }
    if count1 != count2 {
        return false;
    }

    // Backtracking assignment, scarcest color class first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (count1[&color1[i]], color1[i], i));
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut inverse: Vec<Option<usize>> = vec![None; n];

    fn consistent(
        i: usize,
        j: usize,
        assigned: &[Option<usize>],
        inverse: &[Option<usize>],
        adj1: &[BTreeMap<(usize, bool, Weight), usize>],
        adj2: &[BTreeMap<(usize, bool, Weight), usize>],
    ) -> bool {
        // Edge bundles between i and already-assigned vertices must appear
        // with the same multiplicity between j and their images, and j must
        // not carry bundles to assigned images that i lacks.
        for (&(nb, dir, ref w), &cnt) in &adj1[i] {
            let target = if nb == i { Some(j) } else { assigned[nb] };
            if let Some(m) = target {
                if adj2[j].get(&(m, dir, w.clone())) != Some(&cnt) {
                    return false;
                }
            }
        }
        for (&(nb, dir, ref w), &cnt) in &adj2[j] {
            let source = if nb == j { Some(i) } else { inverse[nb] };
            if let Some(m) = source {
                if adj1[i].get(&(m, dir, w.clone())) != Some(&cnt) {
                    return false;
                }
            }
        }
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        k: usize,
        order: &[usize],
        color1: &[u64],
        color2: &[u64],
        adj1: &[BTreeMap<(usize, bool, Weight), usize>],
        adj2: &[BTreeMap<(usize, bool, Weight), usize>],
        assigned: &mut Vec<Option<usize>>,
        inverse: &mut Vec<Option<usize>>,
    ) -> bool {
        if k == order.len() {
            return true;
        }
        let i = order[k];
        for j in 0..color2.len() {
            if inverse[j].is_some() || color2[j] != color1[i] {
                continue;
            }
            if !consistent(i, j, assigned, inverse, adj1, adj2) {
                continue;
            }
            assigned[i] = Some(j);
            inverse[j] = Some(i);
            if rec(k + 1, order, color1, color2, adj1, adj2, assigned, inverse) {
                return true;
            }
            assigned[i] = None;
            inverse[j] = None;
        }
        false
    }

    rec(0, &order, &color1, &color2, &adj1, &adj2, &mut assigned, &mut inverse)
}

/// Identity relabeling over the origins present in `g`.
pub fn identity_mapping(g: &ConcreteGraph) -> BTreeMap<VertexId, VertexId> {
    g.vertices
        .iter()
        .map(|v| (v.origin.clone(), v.origin.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::PgtBuilder;
    use crate::testkit::{fixtures, rewrite_instantiate, LeafOrder};
    use num_traits::One;

    fn lim() -> BigUint {
        BigUint::from(1_000_000u32)
    }

    #[test]
    fn ex_path_expansion() {
        let g = instantiate(&fixtures::ex_path(3), &lim()).unwrap();
        let ids: Vec<&str> = g.vertices.iter().map(|v| v.id.0.as_str()).collect();
        assert_eq!(ids, vec!["s", "t", "v@0", "v@1", "v@2"]);
        assert_eq!(g.edges.len(), 6);
        for j in 0..3 {
            assert!(g
                .edges
                .iter()
                .any(|e| e.src.0 == "s" && e.dst.0 == format!("v@{j}")));
            assert!(g
                .edges
                .iter()
                .any(|e| e.src.0 == format!("v@{j}") && e.dst.0 == "t"));
        }
    }

    #[test]
    fn unit_parameters_reproduce_template() {
        let g = instantiate(&fixtures::ex_path(1), &lim()).unwrap();
        let ids: Vec<&str> = g.vertices.iter().map(|v| v.id.0.as_str()).collect();
        assert_eq!(ids, vec!["s", "t", "v"]);
        assert!(g.vertices.iter().all(|v| v.address.is_root()));
    }

    #[test]
    fn sibling_cyclic_shift_wiring() {
        let g = instantiate(&fixtures::ex_sib(), &lim()).unwrap();
        assert_eq!(g.vertices.len(), 6);
        for j in 0u64..4 {
            let target = (j + 1) % 4;
            assert!(g.edges.iter().any(|e| e.src.0 == format!("u@{j}")
                && e.dst.0 == format!("u@{target}")
                && e.weight == Weight::from(2)));
        }
    }

    #[test]
    fn sibling_instances_have_one_copy_each_way() {
        // Bijectivity: per sibling edge, each instance has exactly one
        // outgoing and one incoming copy.
        for pgt in [fixtures::ex_sib()] {
            let g = instantiate(&pgt, &lim()).unwrap();
            for (idx, e) in pgt.edges.iter().enumerate() {
                if e.sibling.is_none() {
                    continue;
                }
                for v in &g.vertices {
                    if v.origin != e.src {
                        continue;
                    }
                    let outs = g
                        .edges
                        .iter()
                        .filter(|ce| ce.origin == Some(idx) && ce.src == v.id)
                        .count();
                    assert_eq!(outs, 1);
                }
                for v in &g.vertices {
                    if v.origin != e.dst {
                        continue;
                    }
                    let ins = g
                        .edges
                        .iter()
                        .filter(|ce| ce.origin == Some(idx) && ce.dst == v.id)
                        .count();
                    assert_eq!(ins, 1);
                }
            }
        }
    }

    #[test]
    fn counts_match_size_estimate() {
        for pgt in [
            fixtures::ex_path(4),
            fixtures::ex_sib(),
            fixtures::fig1(),
            fixtures::ex_in(),
            fixtures::ex_in2(3),
        ] {
            let size = pgt.instantiation_size();
            let g = instantiate(&pgt, &lim()).unwrap();
            assert_eq!(BigUint::from(g.vertices.len()), size.vertices);
            assert_eq!(BigUint::from(g.edges.len()), size.edges);
        }
    }

    #[test]
    fn size_limit_is_exact() {
        let pgt = fixtures::ex_path(3);
        // 5 vertices, 6 edges: a limit of 5 fails on the edge count.
        let err = instantiate(&pgt, &BigUint::from(5u32)).unwrap_err();
        match err {
            Error::SizeLimitExceeded { vertices, edges, limit } => {
                assert_eq!(vertices, BigUint::from(5u32));
                assert_eq!(edges, BigUint::from(6u32));
                assert_eq!(limit, BigUint::from(5u32));
            }
            other => panic!("expected SizeLimitExceeded, got {other:?}"),
        }
        instantiate(&pgt, &BigUint::from(6u32)).unwrap();
    }

    #[test]
    fn invalid_template_rejected() {
        let mut pgt = fixtures::ex_path(3);
        pgt.vertices.insert(VertexId("ghost".into()));
        assert!(matches!(
            instantiate(&pgt, &lim()),
            Err(Error::InvalidTemplate(_))
        ));
    }

    #[test]
    fn matches_literal_rewriting_in_both_orders() {
        for pgt in [
            fixtures::ex_path(3),
            fixtures::ex_sib(),
            fixtures::fig1(),
            fixtures::ex_in2(2),
        ] {
            let canonical = instantiate(&pgt, &lim()).unwrap();
            let first = rewrite_instantiate(&pgt, LeafOrder::First);
            let last = rewrite_instantiate(&pgt, LeafOrder::Last);
            let identity = identity_mapping(&canonical);
            assert!(label_isomorphic(&first, &canonical, &identity).unwrap());
            assert!(label_isomorphic(&last, &canonical, &identity).unwrap());
            assert!(label_isomorphic(&first, &last, &identity).unwrap());
        }
    }

    #[test]
    fn merge_vertex_instances_ex_path() {
        let g = instantiate(&fixtures::ex_path(3), &lim()).unwrap();
        let merged = merge_vertex_instances(&g, &"v".into()).unwrap();
        assert_eq!(merged.vertices.len(), 3);
        let sv = merged
            .edges
            .iter()
            .filter(|e| e.src.0 == "s" && e.dst.0 == "v")
            .count();
        let vt = merged
            .edges
            .iter()
            .filter(|e| e.src.0 == "v" && e.dst.0 == "t")
            .count();
        assert_eq!((sv, vt), (3, 3));
    }

    #[test]
    fn merge_root_vertex_is_identity() {
        let g = instantiate(&fixtures::ex_path(3), &lim()).unwrap();
        let merged = merge_vertex_instances(&g, &"s".into()).unwrap();
        assert_eq!(merged, g);
        assert!(matches!(
            merge_vertex_instances(&g, &"zz".into()),
            Err(Error::UnknownOrigin(_))
        ));
    }

    #[test]
    fn merge_e_in_fig1_drops_five_vertices() {
        let g = instantiate(&fixtures::fig1(), &lim()).unwrap();
        let merged = merge_vertex_instances(&g, &"e".into()).unwrap();
        assert_eq!(g.vertices.len() - merged.vertices.len(), 5);
    }

    #[test]
    fn contract_without_infinite_edges_is_identity() {
        let g = instantiate(&fixtures::fig1(), &lim()).unwrap();
        assert_eq!(contract_infinite_edges(&g), g);
    }

    #[test]
    fn contract_single_infinite_edge() {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let u = b.add_vertex("u", &root).unwrap();
        let w = b.add_vertex("w", &root).unwrap();
        let x = b.add_vertex("x", &root).unwrap();
        b.add_edge(&u, &w, Weight::Infinity);
        b.add_edge(&x, &u, Weight::from(2));
        b.add_edge(&w, &x, Weight::from(3));
        let g = instantiate(&b.build(), &lim()).unwrap();
        let contracted = contract_infinite_edges(&g);
        assert_eq!(contracted.vertices.len(), 2);
        assert_eq!(contracted.edges.len(), 2);
        // Degree sums preserved minus the contracted edge.
        let before: usize = g.edges.len();
        assert_eq!(contracted.edges.len(), before - 1);
    }

    #[test]
    fn label_isomorphic_basics() {
        let g = instantiate(&fixtures::ex_sib(), &lim()).unwrap();
        let identity = identity_mapping(&g);
        assert!(label_isomorphic(&g, &g, &identity).unwrap());

        let mut reweighted = g.clone();
        reweighted.edges[0].weight = Weight::from(9);
        assert!(!label_isomorphic(&reweighted, &g, &identity).unwrap());

        let mut incomplete = identity;
        incomplete.remove(&VertexId("u".into()));
        assert!(matches!(
            label_isomorphic(&g, &g, &incomplete),
            Err(Error::IncompleteMapping(_))
        ));
    }

    #[test]
    fn label_isomorphism_respects_wiring() {
        // Same origin multisets, different sibling wiring: shift 1 yields one
        // 4-cycle, shift 2 two 2-cycles. Not isomorphic.
        let shift1 = instantiate(&fixtures::ex_sib(), &lim()).unwrap();
        let mut pgt = fixtures::ex_sib();
        pgt.edges[1].sibling = Some(crate::template::SiblingSpec::CyclicShift(2));
        let shift2 = instantiate(&pgt, &lim()).unwrap();
        let identity = identity_mapping(&shift1);
        assert!(!label_isomorphic(&shift1, &shift2, &identity).unwrap());
    }

    #[test]
    fn instantiation_counter_increments() {
        let before = instantiation_count();
        let _ = instantiate(&fixtures::ex_path(2), &lim()).unwrap();
        assert_eq!(instantiation_count(), before + 1);
    }

    #[test]
    fn parameters_only_bounded_by_limit() {
        let huge = BigUint::one() << 64;
        let pgt = fixtures::ex_path_big(huge);
        assert!(matches!(
            instantiate(&pgt, &lim()),
            Err(Error::SizeLimitExceeded { .. })
        ));
    }
}
