//! The data model for parametric graph templates: a directed template graph
//! plus a tree of nested templates, each repeated a parametric number of
//! times when the graph is expanded.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::weight::Weight;

/// Reserved prefix for vertices introduced by instance merging. Vertices with
/// this prefix must be flagged as dummies or validation rejects them.
pub const DUMMY_PREFIX: &str = "__dummy";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateId(pub String);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        VertexId(s.to_owned())
    }
}

impl From<&str> for TemplateId {
    fn from(s: &str) -> Self {
        TemplateId(s.to_owned())
    }
}

/// Wires a sibling edge across the instances of its owning template.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SiblingSpec {
    /// `f(x) = (x + delta) mod P`; bijective for every delta.
    CyclicShift(i64),
    /// Explicit image list; must have length P and be a bijection on `0..P`.
    Permutation(Vec<u64>),
}

impl SiblingSpec {
    /// Instance index of the edge head given the index `j` of its tail.
    pub fn apply(&self, j: u64, parameter: u64) -> u64 {
        match self {
            SiblingSpec::CyclicShift(delta) => {
                let p = parameter as i128;
                let x = (j as i128 + *delta as i128).rem_euclid(p);
                x as u64
            }
            SiblingSpec::Permutation(map) => map[j as usize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub weight: Weight,
    pub sibling: Option<SiblingSpec>,
}

impl Edge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, weight: Weight) -> Self {
        Edge {
            src: VertexId(src.into()),
            dst: VertexId(dst.into()),
            weight,
            sibling: None,
        }
    }
}

/// One template: a node of the template tree owning the vertices that belong
/// to it directly (vertices of descendants are not repeated here).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateNode {
    pub id: TemplateId,
    pub parameter: BigUint,
    pub owned_vertices: BTreeSet<VertexId>,
    pub children: Vec<TemplateNode>,
}

impl TemplateNode {
    pub fn new(id: impl Into<String>, parameter: BigUint) -> Self {
        TemplateNode {
            id: TemplateId(id.into()),
            parameter,
            owned_vertices: BTreeSet::new(),
            children: Vec::new(),
        }
    }

    fn walk<'a>(&'a self, depth: usize, f: &mut impl FnMut(&'a TemplateNode, usize)) {
        f(self, depth);
        for c in &self.children {
            c.walk(depth + 1, f);
        }
    }
}

/// The succinct graph representation: template graph, template tree, and
/// parameters. Instances of the same template are indistinguishable except
/// through sibling edges, which wire adjacent instances by a bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParametricGraphTemplate {
    pub vertices: BTreeSet<VertexId>,
    pub edges: Vec<Edge>,
    pub root: TemplateNode,
    /// Vertices introduced by instance merging; their labels are dropped when
    /// contracting unbounded-weight edges.
    pub dummy_vertices: BTreeSet<VertexId>,
}

/// Identifies one instance of a vertex: one index per template on the path
/// below the root down to the vertex's own template.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceAddress(pub Vec<BigUint>);

impl InstanceAddress {
    pub fn root() -> Self {
        InstanceAddress(Vec::new())
    }

    pub fn from_indices(indices: &[u64]) -> Self {
        InstanceAddress(indices.iter().map(|&i| BigUint::from(i)).collect())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses the dotted form `i0.i1`; the empty string is the root address.
    pub fn parse(s: &str) -> Option<Self> {
        if s.is_empty() {
            return Some(InstanceAddress::root());
        }
        let mut parts = Vec::new();
        for p in s.split('.') {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            parts.push(p.parse::<BigUint>().ok()?);
        }
        Some(InstanceAddress(parts))
    }
}

impl fmt::Display for InstanceAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("."))
    }
}

/// A violated structural invariant. Violations are data, not failures:
/// `validate` reports all of them instead of stopping at the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EdgeEndpointUnknown { src: VertexId, dst: VertexId, missing: VertexId },
    VertexUnowned { vertex: VertexId },
    VertexMultiplyOwned { vertex: VertexId, templates: Vec<TemplateId> },
    OwnedVertexNotInGraph { template: TemplateId, vertex: VertexId },
    DuplicateTemplateId { template: TemplateId },
    RootParameterNotOne { parameter: BigUint },
    ZeroParameter { template: TemplateId },
    EmptyTemplate { template: TemplateId },
    NoJumping { src: VertexId, dst: VertexId },
    SiblingAcrossTemplates { src: VertexId, dst: VertexId },
    SiblingNotBijective { src: VertexId, dst: VertexId, reason: String },
    ReservedIdPrefix { vertex: VertexId },
    ReservedIdCharacter { vertex: VertexId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EdgeEndpointUnknown { src, dst, missing } => {
                write!(f, "edge ({src}, {dst}) references unknown vertex `{missing}`")
            }
            Violation::VertexUnowned { vertex } => {
                write!(f, "vertex `{vertex}` is not owned by any template")
            }
            Violation::VertexMultiplyOwned { vertex, templates } => {
                let names: Vec<String> = templates.iter().map(|t| t.to_string()).collect();
                write!(f, "vertex `{vertex}` is owned by several templates: {}", names.join(", "))
            }
            Violation::OwnedVertexNotInGraph { template, vertex } => {
                write!(f, "template `{template}` owns `{vertex}` which is not a graph vertex")
            }
            Violation::DuplicateTemplateId { template } => {
                write!(f, "template id `{template}` occurs more than once")
            }
            Violation::RootParameterNotOne { parameter } => {
                write!(f, "root template has parameter {parameter}, expected 1")
            }
            Violation::ZeroParameter { template } => {
                write!(f, "template `{template}` has parameter 0")
            }
            Violation::EmptyTemplate { template } => {
                write!(f, "non-root template `{template}` owns no vertices")
            }
            Violation::NoJumping { src, dst } => {
                write!(f, "edge ({src}, {dst}) jumps template levels")
            }
            Violation::SiblingAcrossTemplates { src, dst } => {
                write!(f, "sibling edge ({src}, {dst}) connects different templates")
            }
            Violation::SiblingNotBijective { src, dst, reason } => {
                write!(f, "sibling edge ({src}, {dst}) has a non-bijective function: {reason}")
            }
            Violation::ReservedIdPrefix { vertex } => {
                write!(f, "vertex id `{vertex}` uses the reserved prefix `{DUMMY_PREFIX}` without being a dummy")
            }
            Violation::ReservedIdCharacter { vertex } => {
                write!(f, "vertex id `{vertex}` contains the reserved character `@`")
            }
        }
    }
}

/// Exact vertex and edge counts of the instantiation, computed without
/// materializing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeEstimate {
    pub vertices: BigUint,
    pub edges: BigUint,
}

impl ParametricGraphTemplate {
    /// Checks every structural invariant and returns all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        let mut ids = BTreeSet::new();
        let mut owners: BTreeMap<&VertexId, Vec<&TemplateNode>> = BTreeMap::new();
        self.root.walk(0, &mut |node, _| {
            if !ids.insert(node.id.clone()) {
                out.push(Violation::DuplicateTemplateId { template: node.id.clone() });
            }
            for v in &node.owned_vertices {
                owners.entry(v).or_default().push(node);
                if !self.vertices.contains(v) {
                    out.push(Violation::OwnedVertexNotInGraph {
                        template: node.id.clone(),
                        vertex: v.clone(),
                    });
                }
            }
            if node.parameter.is_zero() {
                out.push(Violation::ZeroParameter { template: node.id.clone() });
            }
        });

        if !self.root.parameter.is_one() {
            out.push(Violation::RootParameterNotOne { parameter: self.root.parameter.clone() });
        }
        self.root.walk(0, &mut |node, depth| {
            if depth > 0 && node.owned_vertices.is_empty() {
                out.push(Violation::EmptyTemplate { template: node.id.clone() });
            }
        });

        for v in &self.vertices {
            match owners.get(v) {
                None => out.push(Violation::VertexUnowned { vertex: v.clone() }),
                Some(nodes) if nodes.len() > 1 => out.push(Violation::VertexMultiplyOwned {
                    vertex: v.clone(),
                    templates: nodes.iter().map(|n| n.id.clone()).collect(),
                }),
                _ => {}
            }
            if v.0.starts_with(DUMMY_PREFIX) && !self.dummy_vertices.contains(v) {
                out.push(Violation::ReservedIdPrefix { vertex: v.clone() });
            }
            if v.0.contains('@') {
                out.push(Violation::ReservedIdCharacter { vertex: v.clone() });
            }
        }

        // Edge rules need unambiguous ownership; skip edges whose endpoints
        // are already reported above.
        let owner_of = |v: &VertexId| -> Option<&TemplateNode> {
            match owners.get(v) {
                Some(nodes) if nodes.len() == 1 => Some(nodes[0]),
                _ => None,
            }
        };
        let parents = self.parent_map();
        for e in &self.edges {
            for end in [&e.src, &e.dst] {
                if !self.vertices.contains(end) {
                    out.push(Violation::EdgeEndpointUnknown {
                        src: e.src.clone(),
                        dst: e.dst.clone(),
                        missing: end.clone(),
                    });
                }
            }
            let (su, sv) = match (owner_of(&e.src), owner_of(&e.dst)) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            if let Some(spec) = &e.sibling {
                if su.id != sv.id {
                    out.push(Violation::SiblingAcrossTemplates {
                        src: e.src.clone(),
                        dst: e.dst.clone(),
                    });
                    continue;
                }
                if let Some(reason) = sibling_bijectivity_error(spec, &su.parameter) {
                    out.push(Violation::SiblingNotBijective {
                        src: e.src.clone(),
                        dst: e.dst.clone(),
                        reason,
                    });
                }
            } else if su.id != sv.id {
                let parent_child = parents.get(&su.id) == Some(&sv.id)
                    || parents.get(&sv.id) == Some(&su.id);
                if !parent_child {
                    out.push(Violation::NoJumping { src: e.src.clone(), dst: e.dst.clone() });
                }
            }
        }

        out
    }

    /// The deepest template that owns `v`.
    pub fn template_of(&self, v: &VertexId) -> Result<TemplateId> {
        let mut best: Option<(usize, TemplateId)> = None;
        self.root.walk(0, &mut |node, depth| {
            if node.owned_vertices.contains(v) {
                match &best {
                    Some((d, _)) if *d >= depth => {}
                    _ => best = Some((depth, node.id.clone())),
                }
            }
        });
        best.map(|(_, id)| id).ok_or_else(|| Error::UnknownVertex(v.clone()))
    }

    /// Vertices of `t`'s parent adjacent to a vertex owned by `t`. The root
    /// has no parent and therefore no boundary vertices.
    pub fn boundary_vertices(&self, t: &TemplateId) -> Result<BTreeSet<VertexId>> {
        let node = self.find_node(t).ok_or_else(|| Error::UnknownTemplate(t.clone()))?;
        let parent = match self.parent_map().get(t) {
            Some(p) => p.clone(),
            None => return Ok(BTreeSet::new()),
        };
        let parent_node = self.find_node(&parent).expect("parent exists");
        let mut out = BTreeSet::new();
        for e in &self.edges {
            for (a, b) in [(&e.src, &e.dst), (&e.dst, &e.src)] {
                if node.owned_vertices.contains(a) && parent_node.owned_vertices.contains(b) {
                    out.insert(b.clone());
                }
            }
        }
        Ok(out)
    }

    /// Searches for a path that leaves a template and re-enters it: for each
    /// cross-template edge (u, x), a breadth-first search from x for any
    /// vertex of u's template yields a witness.
    pub fn template_cycle_witness(&self) -> Option<Vec<VertexId>> {
        let owner = self.owner_map();
        let mut adj: BTreeMap<&VertexId, Vec<&VertexId>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(&e.src).or_default().push(&e.dst);
        }
        for e in &self.edges {
            let (tu, tx) = match (owner.get(&e.src), owner.get(&e.dst)) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            if tu == tx {
                continue;
            }
            // BFS from x; the first vertex of T(u) reached in >= 1 step closes
            // a template-cycle u, x, ..., y.
            let mut prev: BTreeMap<&VertexId, &VertexId> = BTreeMap::new();
            let mut queue = VecDeque::new();
            queue.push_back(&e.dst);
            let mut seen = BTreeSet::new();
            seen.insert(&e.dst);
            while let Some(cur) = queue.pop_front() {
                for &next in adj.get(cur).into_iter().flatten() {
                    if !seen.insert(next) {
                        continue;
                    }
                    prev.insert(next, cur);
                    if owner.get(next) == Some(tu) {
                        let mut path = vec![next.clone()];
                        let mut at = next;
                        while let Some(&p) = prev.get(at) {
                            path.push(p.clone());
                            at = p;
                        }
                        path.push(e.dst.clone());
                        // `prev` chains stop at x, which is pushed again above
                        // when the hit is x's direct successor; dedupe.
                        if path.len() >= 2 && path[path.len() - 1] == path[path.len() - 2] {
                            path.pop();
                        }
                        path.push(e.src.clone());
                        path.reverse();
                        return Some(path);
                    }
                    queue.push_back(next);
                }
            }
        }
        None
    }

    pub fn is_template_acyclic(&self) -> bool {
        self.template_cycle_witness().is_none()
    }

    /// Exact instantiation size: every vertex contributes the product of the
    /// parameters on its root path, every edge the product over all templates
    /// containing one of its endpoints.
    pub fn instantiation_size(&self) -> SizeEstimate {
        let multipliers = self.path_products();
        let owner = self.owner_map();
        let mut vertices = BigUint::zero();
        for v in &self.vertices {
            if let Some(t) = owner.get(v) {
                vertices += &multipliers[t];
            }
        }
        let mut edges = BigUint::zero();
        for e in &self.edges {
            if let (Some(tu), Some(tv)) = (owner.get(&e.src), owner.get(&e.dst)) {
                edges += self.edge_multiplier(tu, tv, &multipliers);
            }
        }
        SizeEstimate { vertices, edges }
    }

    /// Product of the parameters of all templates containing an endpoint of
    /// an edge whose endpoints are owned by `tu` and `tv`.
    pub(crate) fn edge_multiplier(
        &self,
        tu: &TemplateId,
        tv: &TemplateId,
        path_products: &BTreeMap<TemplateId, BigUint>,
    ) -> BigUint {
        if tu == tv {
            return path_products[tu].clone();
        }
        let du = self.depth_of(tu);
        let dv = self.depth_of(tv);
        let (hi, lo) = if du >= dv { (tu, tv) } else { (tv, tu) };
        // Valid edges connect nested templates, so the union of the two root
        // paths is the deeper one's path. Fall back to an explicit union for
        // graphs that have not been validated.
        if self.is_ancestor_or_self(lo, hi) {
            path_products[hi].clone()
        } else {
            let mut set: BTreeSet<TemplateId> = self.root_path(tu).into_iter().collect();
            set.extend(self.root_path(tv));
            let params = self.parameter_map();
            set.iter().fold(BigUint::one(), |acc, t| acc * &params[t])
        }
    }

    /// Least common ancestor of the owning templates of `u` and `v`.
    pub fn lca_template(&self, u: &VertexId, v: &VertexId) -> Result<TemplateId> {
        let tu = self.template_of(u)?;
        let tv = self.template_of(v)?;
        let pu = self.root_path(&tu);
        let pv = self.root_path(&tv);
        let mut lca = pu[0].clone();
        for (a, b) in pu.iter().zip(pv.iter()) {
            if a == b {
                lca = a.clone();
            } else {
                break;
            }
        }
        Ok(lca)
    }

    /// Height of the template tree; a single template has height 0.
    pub fn tree_height(&self) -> usize {
        let mut h = 0;
        self.root.walk(0, &mut |_, depth| h = h.max(depth));
        h
    }

    pub fn find_node(&self, t: &TemplateId) -> Option<&TemplateNode> {
        let mut found = None;
        self.root.walk(0, &mut |node, _| {
            if &node.id == t && found.is_none() {
                found = Some(node);
            }
        });
        found
    }

    /// Map from vertex to its owning template (deepest owner wins if the
    /// structure is invalid and a vertex is owned twice).
    pub fn owner_map(&self) -> BTreeMap<VertexId, TemplateId> {
        let mut depth_seen: BTreeMap<VertexId, usize> = BTreeMap::new();
        let mut out = BTreeMap::new();
        self.root.walk(0, &mut |node, depth| {
            for v in &node.owned_vertices {
                if depth_seen.get(v).is_none_or(|d| depth > *d) {
                    depth_seen.insert(v.clone(), depth);
                    out.insert(v.clone(), node.id.clone());
                }
            }
        });
        out
    }

    pub fn parent_map(&self) -> BTreeMap<TemplateId, TemplateId> {
        let mut out = BTreeMap::new();
        self.root.walk(0, &mut |node, _| {
            for c in &node.children {
                out.insert(c.id.clone(), node.id.clone());
            }
        });
        out
    }

    pub fn parameter_map(&self) -> BTreeMap<TemplateId, BigUint> {
        let mut out = BTreeMap::new();
        self.root.walk(0, &mut |node, _| {
            out.insert(node.id.clone(), node.parameter.clone());
        });
        out
    }

    /// For each template, the product of the parameters on its root path
    /// (inclusive), computed in one pre-order traversal.
    pub fn path_products(&self) -> BTreeMap<TemplateId, BigUint> {
        fn rec(node: &TemplateNode, acc: &BigUint, out: &mut BTreeMap<TemplateId, BigUint>) {
            let here = acc * &node.parameter;
            out.insert(node.id.clone(), here.clone());
            for c in &node.children {
                rec(c, &here, out);
            }
        }
        let mut out = BTreeMap::new();
        rec(&self.root, &BigUint::one(), &mut out);
        out
    }

    pub fn depth_of(&self, t: &TemplateId) -> usize {
        let mut found = 0;
        self.root.walk(0, &mut |node, depth| {
            if &node.id == t {
                found = depth;
            }
        });
        found
    }

    /// Template ids from the root down to `t`, inclusive.
    pub fn root_path(&self, t: &TemplateId) -> Vec<TemplateId> {
        let parents = self.parent_map();
        let mut path = vec![t.clone()];
        let mut cur = t.clone();
        while let Some(p) = parents.get(&cur) {
            path.push(p.clone());
            cur = p.clone();
        }
        path.reverse();
        path
    }

    fn is_ancestor_or_self(&self, anc: &TemplateId, t: &TemplateId) -> bool {
        self.root_path(t).contains(anc)
    }

    /// Parameters (as u64) along the root path below the root down to the
    /// owner of `v`, i.e. one entry per address component.
    pub(crate) fn address_shape(&self, v: &VertexId) -> Result<Vec<(TemplateId, BigUint)>> {
        let owner = self.template_of(v)?;
        let params = self.parameter_map();
        Ok(self
            .root_path(&owner)
            .into_iter()
            .skip(1)
            .map(|t| {
                let p = params[&t].clone();
                (t, p)
            })
            .collect())
    }

    /// Checks that `addr` is a valid instance address for `v`.
    pub fn check_address(&self, v: &VertexId, addr: &InstanceAddress) -> Result<()> {
        let shape = self.address_shape(v)?;
        if shape.len() != addr.0.len() {
            return Err(Error::BadAddress {
                vertex: v.clone(),
                address: addr.clone(),
                reason: format!("expected {} components, got {}", shape.len(), addr.0.len()),
            });
        }
        for ((t, p), idx) in shape.iter().zip(addr.0.iter()) {
            if idx >= p {
                return Err(Error::BadAddress {
                    vertex: v.clone(),
                    address: addr.clone(),
                    reason: format!("index {idx} out of range for template `{t}` with parameter {p}"),
                });
            }
        }
        Ok(())
    }
}

fn sibling_bijectivity_error(spec: &SiblingSpec, parameter: &BigUint) -> Option<String> {
    match spec {
        SiblingSpec::CyclicShift(_) => None,
        SiblingSpec::Permutation(map) => {
            if BigUint::from(map.len()) != *parameter {
                return Some(format!(
                    "permutation has length {}, parameter is {parameter}",
                    map.len()
                ));
            }
            let mut seen = vec![false; map.len()];
            for &img in map {
                let Ok(i) = usize::try_from(img) else {
                    return Some(format!("image {img} out of range"));
                };
                if i >= map.len() || seen[i] {
                    return Some(format!("image {img} repeated or out of range"));
                }
                seen[i] = true;
            }
            None
        }
    }
}

/// Incremental construction of a template. Structural mistakes (unknown
/// parents, duplicate ids) fail immediately; semantic rules are checked by
/// `validate` on the finished value.
pub struct PgtBuilder {
    root: TemplateNode,
    vertices: BTreeSet<VertexId>,
    edges: Vec<Edge>,
    dummy_vertices: BTreeSet<VertexId>,
}

impl PgtBuilder {
    pub fn new(root_id: impl Into<String>) -> Self {
        PgtBuilder {
            root: TemplateNode::new(root_id, BigUint::one()),
            vertices: BTreeSet::new(),
            edges: Vec::new(),
            dummy_vertices: BTreeSet::new(),
        }
    }

    pub fn add_template(
        &mut self,
        id: impl Into<String>,
        parent: &TemplateId,
        parameter: u64,
    ) -> Result<TemplateId> {
        self.add_template_big(id, parent, BigUint::from(parameter))
    }

    pub fn add_template_big(
        &mut self,
        id: impl Into<String>,
        parent: &TemplateId,
        parameter: BigUint,
    ) -> Result<TemplateId> {
        let id = TemplateId(id.into());
        if find_mut(&mut self.root, &id).is_some() {
            return Err(Error::Document(format!("duplicate template id `{id}`")));
        }
        let node = find_mut(&mut self.root, parent)
            .ok_or_else(|| Error::UnknownTemplate(parent.clone()))?;
        node.children.push(TemplateNode {
            id: id.clone(),
            parameter,
            owned_vertices: BTreeSet::new(),
            children: Vec::new(),
        });
        Ok(id)
    }

    pub fn add_vertex(&mut self, id: impl Into<String>, owner: &TemplateId) -> Result<VertexId> {
        let id = VertexId(id.into());
        if self.vertices.contains(&id) {
            return Err(Error::Document(format!("duplicate vertex id `{id}`")));
        }
        let node = find_mut(&mut self.root, owner)
            .ok_or_else(|| Error::UnknownTemplate(owner.clone()))?;
        node.owned_vertices.insert(id.clone());
        self.vertices.insert(id.clone());
        Ok(id)
    }

    pub fn add_edge(&mut self, src: &VertexId, dst: &VertexId, weight: Weight) {
        self.edges.push(Edge {
            src: src.clone(),
            dst: dst.clone(),
            weight,
            sibling: None,
        });
    }

    pub fn add_sibling_edge(
        &mut self,
        src: &VertexId,
        dst: &VertexId,
        weight: Weight,
        spec: SiblingSpec,
    ) {
        self.edges.push(Edge {
            src: src.clone(),
            dst: dst.clone(),
            weight,
            sibling: Some(spec),
        });
    }

    pub fn mark_dummy(&mut self, v: &VertexId) {
        self.dummy_vertices.insert(v.clone());
    }

    pub fn root_id(&self) -> TemplateId {
        self.root.id.clone()
    }

    pub fn build(self) -> ParametricGraphTemplate {
        ParametricGraphTemplate {
            vertices: self.vertices,
            edges: self.edges,
            root: self.root,
            dummy_vertices: self.dummy_vertices,
        }
    }
}

fn find_mut<'a>(node: &'a mut TemplateNode, id: &TemplateId) -> Option<&'a mut TemplateNode> {
    if &node.id == id {
        return Some(node);
    }
    for c in &mut node.children {
        if let Some(hit) = find_mut(c, id) {
            return Some(hit);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::fixtures;

    #[test]
    fn fig1_is_valid() {
        assert_eq!(fixtures::fig1().validate(), Vec::new());
    }

    #[test]
    fn single_template_intra_edges_valid() {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let x = b.add_vertex("x", &root).unwrap();
        let y = b.add_vertex("y", &root).unwrap();
        b.add_edge(&x, &y, Weight::from(1));
        assert_eq!(b.build().validate(), Vec::new());
    }

    #[test]
    fn jumping_edge_reported() {
        // Edge from a root vertex straight into a grandchild template.
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template("T1", &root, 2).unwrap();
        let t2 = b.add_template("T2", &t1, 2).unwrap();
        let r = b.add_vertex("r", &root).unwrap();
        let m = b.add_vertex("m", &t1).unwrap();
        let d = b.add_vertex("d", &t2).unwrap();
        b.add_edge(&r, &d, Weight::from(1));
        let _ = m;
        let violations = b.build().validate();
        assert_eq!(violations.len(), 1);
        assert!(matches!(&violations[0], Violation::NoJumping { src, dst }
            if src.0 == "r" && dst.0 == "d"));
    }

    #[test]
    fn unowned_and_doubly_owned_vertices_reported() {
        let mut pgt = fixtures::ex_path(2);
        pgt.vertices.insert(VertexId("ghost".into()));
        let violations = pgt.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::VertexUnowned { vertex } if vertex.0 == "ghost")));

        let mut pgt = fixtures::ex_path(2);
        pgt.root.owned_vertices.insert(VertexId("v".into()));
        let violations = pgt.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::VertexMultiplyOwned { vertex, .. } if vertex.0 == "v")));
    }

    #[test]
    fn root_parameter_must_be_one() {
        let mut pgt = fixtures::ex_path(2);
        pgt.root.parameter = BigUint::from(3u32);
        assert!(pgt
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::RootParameterNotOne { .. })));
    }

    #[test]
    fn empty_non_root_template_reported() {
        let mut pgt = fixtures::ex_path(2);
        pgt.root.children[0].owned_vertices.clear();
        pgt.vertices.remove(&VertexId("v".into()));
        pgt.edges.clear();
        assert!(pgt
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::EmptyTemplate { .. })));
    }

    #[test]
    fn sibling_permutation_must_be_bijective() {
        let mut pgt = fixtures::ex_sib();
        pgt.edges[1].sibling = Some(SiblingSpec::Permutation(vec![0, 0, 2, 3]));
        assert!(pgt
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::SiblingNotBijective { .. })));

        let mut pgt = fixtures::ex_sib();
        pgt.edges[1].sibling = Some(SiblingSpec::Permutation(vec![1, 0]));
        assert!(pgt
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::SiblingNotBijective { .. })));

        let mut pgt = fixtures::ex_sib();
        pgt.edges[1].sibling = Some(SiblingSpec::Permutation(vec![2, 0, 3, 1]));
        assert_eq!(pgt.validate(), Vec::new());
    }

    #[test]
    fn sibling_across_templates_reported() {
        let mut pgt = fixtures::ex_path(3);
        pgt.edges[0].sibling = Some(SiblingSpec::CyclicShift(1));
        assert!(pgt
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::SiblingAcrossTemplates { .. })));
    }

    #[test]
    fn reserved_prefix_needs_dummy_flag() {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        b.add_vertex("__dummy_fake", &root).unwrap();
        assert!(b
            .build()
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::ReservedIdPrefix { .. })));

        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let d = b.add_vertex("__dummy_real", &root).unwrap();
        b.mark_dummy(&d);
        assert_eq!(b.build().validate(), Vec::new());
    }

    #[test]
    fn template_of_examples() {
        let fig1 = fixtures::fig1();
        assert_eq!(fig1.template_of(&"e".into()).unwrap().0, "T3");
        assert_eq!(fig1.template_of(&"a".into()).unwrap().0, "T0");
        assert!(matches!(
            fig1.template_of(&"zz".into()),
            Err(crate::error::Error::UnknownVertex(_))
        ));

        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        b.add_vertex("only", &root).unwrap();
        assert_eq!(b.build().template_of(&"only".into()).unwrap().0, "T0");
    }

    #[test]
    fn boundary_vertices_examples() {
        let ex = fixtures::ex_path(3);
        let boundary = ex.boundary_vertices(&"T1".into()).unwrap();
        let expect: BTreeSet<VertexId> = ["s", "t"].iter().map(|s| (*s).into()).collect();
        assert_eq!(boundary, expect);

        // Template with no cross edges has no boundary vertices.
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template("T1", &root, 2).unwrap();
        b.add_vertex("r", &root).unwrap();
        b.add_vertex("x", &t1).unwrap();
        let pgt = b.build();
        assert!(pgt.boundary_vertices(&"T1".into()).unwrap().is_empty());

        // The root has no boundary vertices.
        assert!(ex.boundary_vertices(&"T0".into()).unwrap().is_empty());
        assert!(matches!(
            ex.boundary_vertices(&"T9".into()),
            Err(crate::error::Error::UnknownTemplate(_))
        ));

        // Deepest template of the reference graph: the T2-owned neighbors of e.
        let fig1 = fixtures::fig1();
        let boundary = fig1.boundary_vertices(&"T3".into()).unwrap();
        let expect: BTreeSet<VertexId> = ["c", "d"].iter().map(|s| (*s).into()).collect();
        assert_eq!(boundary, expect);
    }

    #[test]
    fn template_cycle_examples() {
        // s -> v -> t leaves the root template and returns to it.
        let ex = fixtures::ex_path(3);
        assert!(!ex.is_template_acyclic());
        let witness = ex.template_cycle_witness().unwrap();
        assert_eq!(witness.len(), 3);
        assert_eq!(witness[0].0, "s");
        assert_eq!(witness[1].0, "v");
        assert_eq!(witness[2].0, "t");

        // A single template cannot have template-cycles.
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let x = b.add_vertex("x", &root).unwrap();
        let y = b.add_vertex("y", &root).unwrap();
        b.add_edge(&x, &y, Weight::from(1));
        b.add_edge(&y, &x, Weight::from(1));
        assert!(b.build().is_template_acyclic());

        // One-way pipeline into a child with no way back.
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template("T1", &root, 5).unwrap();
        let r = b.add_vertex("r", &root).unwrap();
        let c = b.add_vertex("c", &t1).unwrap();
        b.add_edge(&r, &c, Weight::from(1));
        assert!(b.build().is_template_acyclic());
    }

    #[test]
    fn witness_satisfies_definition() {
        let fixtures = [fixtures::ex_path(2), fixtures::ex_in2(3), fixtures::fig1()];
        for pgt in fixtures {
            if let Some(path) = pgt.template_cycle_witness() {
                let owner = pgt.owner_map();
                let first = &owner[&path[0]];
                let last = &owner[path.last().unwrap()];
                assert_eq!(first, last);
                assert!(path[1..path.len() - 1].iter().any(|p| &owner[p] != first));
                // Consecutive vertices are joined by edges.
                for w in path.windows(2) {
                    assert!(pgt
                        .edges
                        .iter()
                        .any(|e| e.src == w[0] && e.dst == w[1]));
                }
            }
        }
    }

    #[test]
    fn instantiation_size_examples() {
        let fig1 = fixtures::fig1();
        let size = fig1.instantiation_size();
        assert_eq!(size.vertices, BigUint::from(16u32));

        let ex = fixtures::ex_path(3);
        let size = ex.instantiation_size();
        assert_eq!(size.vertices, BigUint::from(5u32));
        assert_eq!(size.edges, BigUint::from(6u32));

        // With all parameters 1 the instantiation is the template graph.
        let ex1 = fixtures::ex_path(1);
        let size = ex1.instantiation_size();
        assert_eq!(size.vertices, BigUint::from(3u32));
        assert_eq!(size.edges, BigUint::from(2u32));
    }

    #[test]
    fn sibling_edges_count_owner_parameter() {
        let size = fixtures::ex_sib().instantiation_size();
        assert_eq!(size.vertices, BigUint::from(6u32));
        assert_eq!(size.edges, BigUint::from(12u32));
    }

    #[test]
    fn lca_examples() {
        let fig1 = fixtures::fig1();
        assert_eq!(fig1.lca_template(&"e".into(), &"b".into()).unwrap().0, "T0");
        assert_eq!(fig1.lca_template(&"c".into(), &"e".into()).unwrap().0, "T2");
        assert_eq!(fig1.lca_template(&"e".into(), &"e".into()).unwrap().0, "T3");
    }

    #[test]
    fn tree_height_examples() {
        assert_eq!(fixtures::fig1().tree_height(), 2);
        assert_eq!(fixtures::ex_path(3).tree_height(), 1);
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        b.add_vertex("x", &root).unwrap();
        assert_eq!(b.build().tree_height(), 0);
    }

    #[test]
    fn address_checks() {
        let fig1 = fixtures::fig1();
        fig1.check_address(&"e".into(), &InstanceAddress::from_indices(&[1, 2]))
            .unwrap();
        assert!(fig1
            .check_address(&"e".into(), &InstanceAddress::from_indices(&[1]))
            .is_err());
        assert!(fig1
            .check_address(&"e".into(), &InstanceAddress::from_indices(&[1, 3]))
            .is_err());
        fig1.check_address(&"a".into(), &InstanceAddress::root()).unwrap();
    }

    #[test]
    fn address_parsing() {
        assert_eq!(InstanceAddress::parse(""), Some(InstanceAddress::root()));
        assert_eq!(
            InstanceAddress::parse("1.0.2"),
            Some(InstanceAddress::from_indices(&[1, 0, 2]))
        );
        assert_eq!(InstanceAddress::parse("1..2"), None);
        assert_eq!(InstanceAddress::parse("x"), None);
        assert_eq!(InstanceAddress::from_indices(&[1, 0, 2]).to_string(), "1.0.2");
    }
}
