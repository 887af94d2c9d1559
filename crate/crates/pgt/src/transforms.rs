//! Template-to-template and template-to-graph transformations: edge
//! reweighting, instance merging via unbounded dummy paths, and upwards
//! partial instantiation.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::flow::FlatGraph;
use crate::template::{
    InstanceAddress, ParametricGraphTemplate, TemplateId, TemplateNode, VertexId, DUMMY_PREFIX,
};
use crate::weight::Weight;

/// The reweighted template graph: same vertices and edges, each weight scaled
/// by the product of the parameters of all templates containing an endpoint.
pub type ReweightedGraph = FlatGraph;

/// Scales every edge weight by the repetition count of the edge. Runs on the
/// template alone; parameter magnitudes only affect big-integer arithmetic.
pub fn edge_reweight(pgt: &ParametricGraphTemplate) -> ReweightedGraph {
    let products = pgt.path_products();
    let owner = pgt.owner_map();
    let mut out = FlatGraph {
        vertices: pgt.vertices.clone(),
        edges: Vec::with_capacity(pgt.edges.len()),
    };
    for e in &pgt.edges {
        let (Some(tu), Some(tv)) = (owner.get(&e.src), owner.get(&e.dst)) else {
            continue;
        };
        let factor = pgt.edge_multiplier(tu, tv, &products);
        out.edges.push((e.src.clone(), e.dst.clone(), e.weight.scale(&factor)));
    }
    out
}

/// Rewrites the template so that `v` belongs to the root: every cross-template
/// edge at `v` becomes a path through fresh dummy vertices whose edge adjacent
/// to `v`'s side has unbounded weight. Instantiating the result and contracting
/// the unbounded edges merges all instances of `v`.
///
/// Returns the transformed template and the origin relabeling that witnesses
/// the equivalence (the identity on the original vertices).
pub fn instance_merge(
    pgt: &ParametricGraphTemplate,
    v: &VertexId,
) -> Result<(ParametricGraphTemplate, BTreeMap<VertexId, VertexId>)> {
    let violations = pgt.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidTemplate(violations));
    }
    if !pgt.vertices.contains(v) {
        return Err(Error::UnknownVertex(v.clone()));
    }
    for e in &pgt.edges {
        if e.sibling.is_some() && (&e.src == v || &e.dst == v) {
            return Err(Error::UnsupportedSiblingMerge(v.clone()));
        }
    }

    let mut out = pgt.clone();
    let mut counter = 0u64;
    let relabeling: BTreeMap<VertexId, VertexId> =
        pgt.vertices.iter().map(|u| (u.clone(), u.clone())).collect();

    loop {
        let owner = out.template_of(v)?;
        let Some(parent) = out.parent_map().get(&owner).cloned() else {
            break; // v is in the root
        };
        let owner_map = out.owner_map();
        let mut new_edges = Vec::with_capacity(out.edges.len());
        let mut new_dummies = Vec::new();
        for e in &out.edges {
            let touches_v = &e.src == v || &e.dst == v;
            if !touches_v {
                new_edges.push(e.clone());
                continue;
            }
            let other = if &e.src == v { &e.dst } else { &e.src };
            if owner_map.get(other) == Some(&owner) {
                new_edges.push(e.clone());
                continue;
            }
            let d = fresh_dummy(&out, &mut counter);
            new_dummies.push(d.clone());
            if &e.dst == v {
                // (u, v) becomes (u, d) with the original weight, (d, v) with
                // unbounded weight.
                let mut first = e.clone();
                first.dst = d.clone();
                new_edges.push(first);
                new_edges.push(crate::template::Edge {
                    src: d,
                    dst: v.clone(),
                    weight: Weight::Infinity,
                    sibling: None,
                });
            } else {
                let mut second = e.clone();
                second.src = d.clone();
                new_edges.push(crate::template::Edge {
                    src: v.clone(),
                    dst: d,
                    weight: Weight::Infinity,
                    sibling: None,
                });
                new_edges.push(second);
            }
        }
        out.edges = new_edges;
        for d in new_dummies {
            out.vertices.insert(d.clone());
            out.dummy_vertices.insert(d.clone());
            node_mut(&mut out.root, &owner)
                .expect("owner exists")
                .owned_vertices
                .insert(d);
        }
        node_mut(&mut out.root, &owner)
            .expect("owner exists")
            .owned_vertices
            .remove(v);
        node_mut(&mut out.root, &parent)
            .expect("parent exists")
            .owned_vertices
            .insert(v.clone());
    }

    Ok((out, relabeling))
}

/// Moves the addressed instance of `v` into the root without changing the
/// instantiated graph: each template on the root path with parameter above 1
/// is split into a parameter-1 part that keeps the addressed instance and a
/// fresh copy with parameter P-1; afterwards the parameter-1 path templates
/// dissolve into the root.
///
/// Returns the transformed template, the vertex standing for the addressed
/// instance, and the origin relabeling onto the input's vertices.
pub fn partial_instantiate_upwards(
    pgt: &ParametricGraphTemplate,
    v: &VertexId,
    addr: &InstanceAddress,
) -> Result<(ParametricGraphTemplate, VertexId, BTreeMap<VertexId, VertexId>)> {
    let (out, mut targets, relabeling) =
        partial_instantiate_upwards_multi(pgt, &[(v.clone(), addr.clone())])?;
    Ok((out, targets.remove(0), relabeling))
}

/// Sequential upwards partial instantiation of several addressed instances.
/// Later targets are tracked through the splits performed for earlier ones:
/// at an already-split template, an equal index continues in the parameter-1
/// part and a different index moves into the parameter-(P-1) copy with the
/// extracted index removed from the numbering.
pub fn partial_instantiate_upwards_multi(
    pgt: &ParametricGraphTemplate,
    targets: &[(VertexId, InstanceAddress)],
) -> Result<(ParametricGraphTemplate, Vec<VertexId>, BTreeMap<VertexId, VertexId>)> {
    let violations = pgt.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidTemplate(violations));
    }
    for (v, addr) in targets {
        pgt.check_address(v, addr)?;
    }

    let mut engine = Splitter {
        pgt: pgt.clone(),
        tracked: targets.to_vec(),
        origin_of: pgt.vertices.iter().map(|u| (u.clone(), u.clone())).collect(),
        counter: 0,
    };
    for k in 0..targets.len() {
        engine.lift_to_root(k)?;
    }
    let Splitter { pgt: out, tracked, origin_of, .. } = engine;
    Ok((out, tracked.into_iter().map(|(v, _)| v).collect(), origin_of))
}

struct Splitter {
    pgt: ParametricGraphTemplate,
    tracked: Vec<(VertexId, InstanceAddress)>,
    origin_of: BTreeMap<VertexId, VertexId>,
    counter: u64,
}

impl Splitter {
    fn lift_to_root(&mut self, k: usize) -> Result<()> {
        loop {
            let v = self.tracked[k].0.clone();
            let shape = self.pgt.address_shape(&v)?;
            let Some(level) = shape.iter().position(|(_, p)| !p.is_one()) else {
                break;
            };
            let template = shape[level].0.clone();
            self.split(k, &template, level)?;
        }
        // All path templates now have parameter 1; dissolve them into the
        // root, deepest first.
        let v = self.tracked[k].0.clone();
        let owner = self.pgt.template_of(&v)?;
        let mut path = self.pgt.root_path(&owner);
        path.remove(0);
        for t in path.into_iter().rev() {
            self.dissolve(&t);
        }
        debug_assert!(self.tracked[k].1.is_root());
        Ok(())
    }

    /// Splits `template` (parameter P > 1) for the tracked target `k`, whose
    /// address component at `level` selects the instance kept in the
    /// parameter-1 part.
    fn split(&mut self, k: usize, template: &TemplateId, level: usize) -> Result<()> {
        let node = self
            .pgt
            .find_node(template)
            .ok_or_else(|| Error::UnknownTemplate(template.clone()))?
            .clone();
        let parent = self.pgt.parent_map()[template].clone();
        let subtree_vertices = collect_vertices(&node);
        for e in &self.pgt.edges {
            if e.sibling.is_some() && subtree_vertices.contains(&e.src) {
                let owner = self.pgt.template_of(&e.src)?;
                if owner == *template {
                    return Err(Error::UnsupportedSiblingSplit(template.clone()));
                }
            }
        }

        // Fresh ids for the copy.
        let mut vert_map: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        for u in &subtree_vertices {
            let copy = self.fresh_vertex(u);
            vert_map.insert(u.clone(), copy);
        }
        let mut tmpl_map: BTreeMap<TemplateId, TemplateId> = BTreeMap::new();
        collect_templates(&node, &mut |t| {
            let copy = self.fresh_template(t);
            tmpl_map.insert(t.clone(), copy);
        });

        let mut copy_node = clone_subtree(&node, &tmpl_map, &vert_map);
        copy_node.parameter = &node.parameter - BigUint::one();

        // Duplicate edges touching the subtree; edges crossing its boundary
        // keep their outside endpoint.
        let mut extra = Vec::new();
        for e in &self.pgt.edges {
            let src_in = subtree_vertices.contains(&e.src);
            let dst_in = subtree_vertices.contains(&e.dst);
            if !src_in && !dst_in {
                continue;
            }
            let mut copy = e.clone();
            if src_in {
                copy.src = vert_map[&e.src].clone();
            }
            if dst_in {
                copy.dst = vert_map[&e.dst].clone();
            }
            extra.push(copy);
        }
        self.pgt.edges.extend(extra);

        for (orig, copy) in &vert_map {
            self.pgt.vertices.insert(copy.clone());
            if self.pgt.dummy_vertices.contains(orig) {
                self.pgt.dummy_vertices.insert(copy.clone());
            }
            let origin = self.origin_of[orig].clone();
            self.origin_of.insert(copy.clone(), origin);
        }

        node_mut(&mut self.pgt.root, template)
            .expect("split template exists")
            .parameter = BigUint::one();
        node_mut(&mut self.pgt.root, &parent)
            .expect("parent exists")
            .children
            .push(copy_node);

        // Retarget tracked instances: an equal index at the split level stays
        // in the parameter-1 part (the level degenerates to index 0), a
        // different index moves into the copy with the kept index removed
        // from the numbering.
        let kept = self.tracked[k].1 .0[level].clone();
        for (u, addr) in &mut self.tracked {
            if !vert_map.contains_key(u) {
                continue;
            }
            let idx = addr.0[level].clone();
            if idx == kept {
                addr.0[level] = BigUint::zero();
            } else {
                *u = vert_map[u].clone();
                addr.0[level] = if idx > kept { idx - BigUint::one() } else { idx };
            }
        }
        Ok(())
    }

    /// Removes a parameter-1 template, handing its vertices and children to
    /// its parent. Sibling edges it owned degenerate to plain edges.
    fn dissolve(&mut self, template: &TemplateId) {
        let parent = self.pgt.parent_map()[template].clone();
        let owner_map = self.pgt.owner_map();
        for e in &mut self.pgt.edges {
            if e.sibling.is_some() && owner_map.get(&e.src) == Some(template) {
                e.sibling = None;
            }
        }
        let node = remove_child(&mut self.pgt.root, template).expect("dissolved template exists");
        debug_assert!(node.parameter.is_one());
        let level = self.pgt.root_path(&parent).len() - 1; // address index of `template`
        let dissolved_vertices = collect_vertices(&node);
        let parent_node = node_mut(&mut self.pgt.root, &parent).expect("parent exists");
        parent_node.owned_vertices.extend(node.owned_vertices.clone());
        parent_node.children.extend(node.children.clone());

        for (u, addr) in &mut self.tracked {
            if dissolved_vertices.contains(u) {
                debug_assert!(addr.0[level].is_zero());
                addr.0.remove(level);
            }
        }
    }

    fn fresh_vertex(&mut self, base: &VertexId) -> VertexId {
        loop {
            self.counter += 1;
            let id = VertexId(format!("{base}~{}", self.counter));
            if !self.pgt.vertices.contains(&id) {
                return id;
            }
        }
    }

    fn fresh_template(&mut self, base: &TemplateId) -> TemplateId {
        loop {
            self.counter += 1;
            let id = TemplateId(format!("{base}~{}", self.counter));
            if self.pgt.find_node(&id).is_none() {
                return id;
            }
        }
    }
}

fn collect_vertices(node: &TemplateNode) -> BTreeSet<VertexId> {
    let mut out = node.owned_vertices.clone();
    for c in &node.children {
        out.extend(collect_vertices(c));
    }
    out
}

fn collect_templates(node: &TemplateNode, f: &mut impl FnMut(&TemplateId)) {
    f(&node.id);
    for c in &node.children {
        collect_templates(c, f);
    }
}

fn clone_subtree(
    node: &TemplateNode,
    tmpl_map: &BTreeMap<TemplateId, TemplateId>,
    vert_map: &BTreeMap<VertexId, VertexId>,
) -> TemplateNode {
    TemplateNode {
        id: tmpl_map[&node.id].clone(),
        parameter: node.parameter.clone(),
        owned_vertices: node.owned_vertices.iter().map(|v| vert_map[v].clone()).collect(),
        children: node
            .children
            .iter()
            .map(|c| clone_subtree(c, tmpl_map, vert_map))
            .collect(),
    }
}

fn node_mut<'a>(node: &'a mut TemplateNode, id: &TemplateId) -> Option<&'a mut TemplateNode> {
    if &node.id == id {
        return Some(node);
    }
    for c in &mut node.children {
        if let Some(hit) = node_mut(c, id) {
            return Some(hit);
        }
    }
    None
}

fn remove_child(node: &mut TemplateNode, id: &TemplateId) -> Option<TemplateNode> {
    if let Some(pos) = node.children.iter().position(|c| &c.id == id) {
        return Some(node.children.remove(pos));
    }
    for c in &mut node.children {
        if let Some(hit) = remove_child(c, id) {
            return Some(hit);
        }
    }
    None
}

fn fresh_dummy(pgt: &ParametricGraphTemplate, counter: &mut u64) -> VertexId {
    loop {
        let id = VertexId(format!("{DUMMY_PREFIX}~{counter}"));
        *counter += 1;
        if !pgt.vertices.contains(&id) {
            return id;
        }
    }
}
