//! Exact maximum flow on flat graphs, the template-side flow queries, and
//! their brute-force counterparts over explicit instantiations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::instantiate::{concrete_id, instantiate, ConcreteGraph};
use crate::template::{InstanceAddress, ParametricGraphTemplate, VertexId};
use crate::transforms::{edge_reweight, partial_instantiate_upwards_multi};
use crate::weight::Weight;

/// A plain weighted directed graph over vertex ids. Parallel edges are kept;
/// the solver sums them into one capacity on ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatGraph {
    pub vertices: BTreeSet<VertexId>,
    pub edges: Vec<(VertexId, VertexId, Weight)>,
}

impl FlatGraph {
    pub fn add_vertex(&mut self, v: impl Into<String>) -> VertexId {
        let v = VertexId(v.into());
        self.vertices.insert(v.clone());
        v
    }

    pub fn add_edge(&mut self, src: &VertexId, dst: &VertexId, weight: Weight) {
        self.vertices.insert(src.clone());
        self.vertices.insert(dst.clone());
        self.edges.push((src.clone(), dst.clone(), weight));
    }

    /// A concrete graph viewed as a flat graph: vertex ids become opaque ids,
    /// provenance labels are dropped.
    pub fn from_concrete(g: &ConcreteGraph) -> FlatGraph {
        let mut out = FlatGraph::default();
        for v in &g.vertices {
            out.vertices.insert(VertexId(v.id.0.clone()));
        }
        for e in &g.edges {
            out.edges
                .push((VertexId(e.src.0.clone()), VertexId(e.dst.0.clone()), e.weight.clone()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeFlow {
    pub src: VertexId,
    pub dst: VertexId,
    pub flow: BigUint,
    pub capacity: Weight,
}

/// An exact maximum flow together with the minimum cut certifying it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub value: Weight,
    pub source: VertexId,
    pub sink: VertexId,
    /// Flow per summed arc; parallel input edges appear as one entry.
    pub edge_flows: Vec<EdgeFlow>,
    /// Source side of the minimum cut: the residual-reachable set from the
    /// source (canonical tie-break).
    pub source_side: BTreeSet<VertexId>,
}

impl FlowResult {
    /// Re-derives the duality certificate: conservation at inner vertices,
    /// capacity bounds, and value == capacity of the reported cut.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let mut net: BTreeMap<&VertexId, (BigUint, BigUint)> = BTreeMap::new();
        for ef in &self.edge_flows {
            if let Weight::Finite(cap) = &ef.capacity {
                if &ef.flow > cap {
                    return Err(format!("flow exceeds capacity on ({}, {})", ef.src, ef.dst));
                }
            }
            let out = net.entry(&ef.src).or_default();
            out.0 += &ef.flow;
            let inn = net.entry(&ef.dst).or_default();
            inn.1 += &ef.flow;
        }
        for (v, (out, inn)) in &net {
            if *v != &self.source && *v != &self.sink && out != inn {
                return Err(format!("conservation violated at `{v}`: out {out}, in {inn}"));
            }
        }
        let (src_out, src_in) = net.get(&self.source).cloned().unwrap_or_default();
        let net_source = if src_out >= src_in {
            Weight::Finite(src_out - src_in)
        } else {
            return Err("negative net outflow at source".to_owned());
        };
        if self.value.is_finite() && net_source != self.value {
            return Err(format!("flow value {} != net source outflow {net_source}", self.value));
        }
        if !self.source_side.contains(&self.source) || self.source_side.contains(&self.sink) {
            return Err("cut does not separate source from sink".to_owned());
        }
        let mut cut = Weight::zero();
        for ef in &self.edge_flows {
            if self.source_side.contains(&ef.src) && !self.source_side.contains(&ef.dst) {
                cut += ef.capacity.clone();
            }
        }
        if cut != self.value {
            return Err(format!("cut capacity {cut} != flow value {}", self.value));
        }
        Ok(())
    }
}

/// Exact integral maximum flow via blocking-flow augmentation. Unbounded
/// capacities are replaced by `1 + sum of finite capacities`, which no finite
/// cut can reach; if the resulting value still reaches that constant, no
/// finite cut exists and the value is reported as unbounded.
pub fn max_st_flow(g: &FlatGraph, s: &VertexId, t: &VertexId) -> Result<FlowResult> {
    if s == t {
        return Err(Error::SourceEqualsSink);
    }
    for v in [s, t] {
        if !g.vertices.contains(v) {
            return Err(Error::UnknownVertex(v.clone()));
        }
    }

    let mut finite_sum = BigUint::zero();
    for (_, _, w) in &g.edges {
        if let Weight::Finite(c) = w {
            finite_sum += c;
        }
    }
    let saturation = &finite_sum + BigUint::one();

    // Sum parallel edges; drop self-loops.
    let mut caps: BTreeMap<(&VertexId, &VertexId), (BigUint, Weight)> = BTreeMap::new();
    for (src, dst, w) in &g.edges {
        if src == dst {
            continue;
        }
        let entry = caps.entry((src, dst)).or_insert((BigUint::zero(), Weight::zero()));
        entry.0 += match w {
            Weight::Finite(c) => c.clone(),
            Weight::Infinity => saturation.clone(),
        };
        entry.1 += w.clone();
    }

    let ids: Vec<&VertexId> = g.vertices.iter().collect();
    let index: BTreeMap<&VertexId, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut dinic = Dinic::new(ids.len());
    let mut arc_refs = Vec::new();
    for (&(src, dst), (cap, declared)) in &caps {
        let arc = dinic.add_edge(index[src], index[dst], cap.clone());
        arc_refs.push((src, dst, arc, declared.clone()));
    }
    let value = dinic.run(index[s], index[t]);

    let mut edge_flows = Vec::new();
    for (src, dst, arc, declared) in arc_refs {
        edge_flows.push(EdgeFlow {
            src: src.clone(),
            dst: dst.clone(),
            flow: dinic.flow_of(arc),
            capacity: declared,
        });
    }
    let reachable = dinic.residual_reachable(index[s]);
    let source_side: BTreeSet<VertexId> = ids
        .iter()
        .enumerate()
        .filter(|(i, _)| reachable[*i])
        .map(|(_, v)| (*v).clone())
        .collect();

    let value = if value >= saturation {
        Weight::Infinity
    } else {
        Weight::Finite(value)
    };
    let result = FlowResult {
        value,
        source: s.clone(),
        sink: t.clone(),
        edge_flows,
        source_side,
    };
    debug_assert!(
        result.value.is_infinite() || result.verify().is_ok(),
        "flow certificate failed: {:?}",
        result.verify()
    );
    Ok(result)
}

/// Flow between all instances of `s` and all instances of `t`, computed on
/// the reweighted template graph. The instantiation is never materialized.
pub fn max_all_st_flow(
    pgt: &ParametricGraphTemplate,
    s: &VertexId,
    t: &VertexId,
) -> Result<FlowResult> {
    let violations = pgt.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidTemplate(violations));
    }
    if s == t {
        return Err(Error::SourceEqualsSink);
    }
    max_st_flow(&edge_reweight(pgt), s, t)
}

/// Flow between the single addressed instance of `s` and of `t`: both are
/// lifted into the root by upwards partial instantiation, then the reweighted
/// graph is solved.
pub fn max_single_st_flow(
    pgt: &ParametricGraphTemplate,
    s: &VertexId,
    addr_s: &InstanceAddress,
    t: &VertexId,
    addr_t: &InstanceAddress,
) -> Result<FlowResult> {
    let violations = pgt.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidTemplate(violations));
    }
    if s == t && addr_s == addr_t {
        return Err(Error::SourceEqualsSink);
    }
    let (lifted, targets, _relabeling) =
        partial_instantiate_upwards_multi(pgt, &[(s.clone(), addr_s.clone()), (t.clone(), addr_t.clone())])?;
    max_st_flow(&edge_reweight(&lifted), &targets[0], &targets[1])
}

/// Reference implementation of the all-instances flow: instantiate, attach a
/// super source and sink with unbounded edges, and solve.
pub fn brute_force_all_st_flow(
    pgt: &ParametricGraphTemplate,
    s: &VertexId,
    t: &VertexId,
    limit: &BigUint,
) -> Result<FlowResult> {
    if s == t {
        return Err(Error::SourceEqualsSink);
    }
    let concrete = instantiate(pgt, limit)?;
    if !concrete.vertices.iter().any(|v| &v.origin == s) {
        return Err(Error::UnknownVertex(s.clone()));
    }
    if !concrete.vertices.iter().any(|v| &v.origin == t) {
        return Err(Error::UnknownVertex(t.clone()));
    }
    let mut flat = FlatGraph::from_concrete(&concrete);
    let super_s = fresh_vertex(&flat, "__source");
    let super_t = fresh_vertex(&flat, "__sink");
    flat.vertices.insert(super_s.clone());
    flat.vertices.insert(super_t.clone());
    for v in &concrete.vertices {
        if &v.origin == s {
            flat.edges
                .push((super_s.clone(), VertexId(v.id.0.clone()), Weight::Infinity));
        }
        if &v.origin == t {
            flat.edges
                .push((VertexId(v.id.0.clone()), super_t.clone(), Weight::Infinity));
        }
    }
    max_st_flow(&flat, &super_s, &super_t)
}

/// Reference implementation of the single-instance flow: instantiate and
/// solve between the two labeled vertices.
pub fn brute_force_single_st_flow(
    pgt: &ParametricGraphTemplate,
    s: &VertexId,
    addr_s: &InstanceAddress,
    t: &VertexId,
    addr_t: &InstanceAddress,
    limit: &BigUint,
) -> Result<FlowResult> {
    pgt.check_address(s, addr_s)?;
    pgt.check_address(t, addr_t)?;
    if s == t && addr_s == addr_t {
        return Err(Error::SourceEqualsSink);
    }
    let concrete = instantiate(pgt, limit)?;
    let cs = concrete_id(s, addr_s);
    let ct = concrete_id(t, addr_t);
    for id in [&cs, &ct] {
        if concrete.vertex(id).is_none() {
            return Err(Error::UnknownVertex(VertexId(id.0.clone())));
        }
    }
    let flat = FlatGraph::from_concrete(&concrete);
    max_st_flow(&flat, &VertexId(cs.0), &VertexId(ct.0))
}

fn fresh_vertex(g: &FlatGraph, base: &str) -> VertexId {
    let mut name = base.to_owned();
    while g.vertices.contains(&VertexId(name.clone())) {
        name.push('~');
    }
    VertexId(name)
}

/// Blocking-flow (level graph) augmentation with arbitrary-precision
/// capacities. Residual capacities are tracked directly so no signed
/// arithmetic is needed.
struct Dinic {
    adj: Vec<Vec<usize>>,
    // arcs stored as (to, residual); arc i^1 is the reverse of arc i
    to: Vec<usize>,
    resid: Vec<BigUint>,
    cap: Vec<BigUint>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            resid: Vec::new(),
            cap: Vec::new(),
            level: vec![-1; n],
            iter: vec![0; n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: BigUint) -> usize {
        let arc = self.to.len();
        self.adj[from].push(arc);
        self.to.push(to);
        self.resid.push(cap.clone());
        self.cap.push(cap);
        self.adj[to].push(arc + 1);
        self.to.push(from);
        self.resid.push(BigUint::zero());
        self.cap.push(BigUint::zero());
        arc
    }

    fn flow_of(&self, arc: usize) -> BigUint {
        &self.cap[arc] - &self.resid[arc]
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut q = VecDeque::new();
        q.push_back(s);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if self.level[v] == -1 && !self.resid[a].is_zero() {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        self.level[t] != -1
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: Option<BigUint>) -> BigUint {
        if u == t {
            return pushed.expect("sink reached with a bound");
        }
        while self.iter[u] < self.adj[u].len() {
            let a = self.adj[u][self.iter[u]];
            let v = self.to[a];
            if !self.resid[a].is_zero() && self.level[v] == self.level[u] + 1 {
                let bound = match &pushed {
                    Some(p) => p.min(&self.resid[a]).clone(),
                    None => self.resid[a].clone(),
                };
                let got = self.dfs(v, t, Some(bound));
                if !got.is_zero() {
                    self.resid[a] -= &got;
                    self.resid[a ^ 1] += &got;
                    return got;
                }
            }
            self.iter[u] += 1;
        }
        BigUint::zero()
    }

    fn run(&mut self, s: usize, t: usize) -> BigUint {
        let mut total = BigUint::zero();
        while self.bfs(s, t) {
            self.iter.fill(0);
            loop {
                let pushed = self.dfs(s, t, None);
                if pushed.is_zero() {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::new();
        q.push_back(s);
        while let Some(u) = q.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if !seen[v] && !self.resid[a].is_zero() {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(edges: &[(&str, &str, u64)]) -> FlatGraph {
        let mut g = FlatGraph::default();
        for (s, d, w) in edges {
            let s = g.add_vertex(*s);
            let d = g.add_vertex(*d);
            g.add_edge(&s, &d, Weight::from(*w));
        }
        g
    }

    #[test]
    fn two_vertex_direct() {
        let g = flat(&[("s", "t", 7)]);
        let r = max_st_flow(&g, &"s".into(), &"t".into()).unwrap();
        assert_eq!(r.value, Weight::from(7));
        r.verify().unwrap();
    }

    #[test]
    fn diamond_unit_capacities() {
        let g = flat(&[("s", "a", 1), ("s", "b", 1), ("a", "t", 1), ("b", "t", 1)]);
        let r = max_st_flow(&g, &"s".into(), &"t".into()).unwrap();
        assert_eq!(r.value, Weight::from(2));
        r.verify().unwrap();
    }

    #[test]
    fn classic_network() {
        let g = flat(&[
            ("s", "a", 10),
            ("s", "b", 10),
            ("a", "c", 4),
            ("a", "d", 8),
            ("b", "d", 9),
            ("c", "t", 10),
            ("d", "c", 6),
            ("d", "t", 10),
        ]);
        let r = max_st_flow(&g, &"s".into(), &"t".into()).unwrap();
        assert_eq!(r.value, Weight::from(19));
        r.verify().unwrap();
    }

    #[test]
    fn parallel_edges_sum() {
        let g = flat(&[("s", "t", 3), ("s", "t", 4)]);
        let r = max_st_flow(&g, &"s".into(), &"t".into()).unwrap();
        assert_eq!(r.value, Weight::from(7));
        assert_eq!(r.edge_flows.len(), 1);
    }

    #[test]
    fn source_equals_sink_rejected() {
        let g = flat(&[("s", "t", 1)]);
        assert!(matches!(
            max_st_flow(&g, &"s".into(), &"s".into()),
            Err(Error::SourceEqualsSink)
        ));
    }

    #[test]
    fn missing_vertex_rejected() {
        let g = flat(&[("s", "t", 1)]);
        assert!(matches!(
            max_st_flow(&g, &"s".into(), &"x".into()),
            Err(Error::UnknownVertex(_))
        ));
    }

    #[test]
    fn infinite_capacity_bypass() {
        // The unbounded middle edge must not constrain the flow.
        let mut g = flat(&[("s", "a", 5), ("b", "t", 5)]);
        g.add_edge(&"a".into(), &"b".into(), Weight::Infinity);
        let r = max_st_flow(&g, &"s".into(), &"t".into()).unwrap();
        assert_eq!(r.value, Weight::from(5));
        r.verify().unwrap();
    }

    #[test]
    fn unbounded_path_reported_as_infinite() {
        let mut g = FlatGraph::default();
        let s = g.add_vertex("s");
        let t = g.add_vertex("t");
        g.add_edge(&s, &t, Weight::Infinity);
        let r = max_st_flow(&g, &s, &t).unwrap();
        assert_eq!(r.value, Weight::Infinity);
    }

    #[test]
    fn disconnected_is_zero() {
        let g = flat(&[("s", "a", 3), ("b", "t", 3)]);
        let r = max_st_flow(&g, &"s".into(), &"t".into()).unwrap();
        assert_eq!(r.value, Weight::zero());
        r.verify().unwrap();
    }

    #[test]
    fn big_capacities_exact() {
        let huge = BigUint::parse_bytes(b"340282366920938463463374607431768211456", 10).unwrap();
        let mut g = FlatGraph::default();
        let s = g.add_vertex("s");
        let m = g.add_vertex("m");
        let t = g.add_vertex("t");
        g.add_edge(&s, &m, Weight::Finite(huge.clone()));
        g.add_edge(&m, &t, Weight::Finite(&huge - BigUint::one()));
        let r = max_st_flow(&g, &s, &t).unwrap();
        assert_eq!(r.value, Weight::Finite(&huge - BigUint::one()));
        r.verify().unwrap();
    }
}
