//! Test support: reference fixtures, a generator of random valid templates,
//! and an independent instantiation oracle that follows the leaf-rewriting
//! procedure literally. Production code must not depend on this module.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::instantiate::{concrete_id, ConcreteEdge, ConcreteGraph, ConcreteVertex};
use crate::template::{
    InstanceAddress, ParametricGraphTemplate, PgtBuilder, SiblingSpec, TemplateId, VertexId,
};
use crate::weight::Weight;

pub mod fixtures {
    use super::*;

    /// Root `{s, t}`, child `{v}` repeated `p` times, unit edges `s->v->t`.
    pub fn ex_path(p: u64) -> ParametricGraphTemplate {
        ex_path_big(BigUint::from(p))
    }

    pub fn ex_path_big(p: BigUint) -> ParametricGraphTemplate {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template_big("T1", &root, p).unwrap();
        let s = b.add_vertex("s", &root).unwrap();
        let t = b.add_vertex("t", &root).unwrap();
        let v = b.add_vertex("v", &t1).unwrap();
        b.add_edge(&s, &v, Weight::from(1));
        b.add_edge(&v, &t, Weight::from(1));
        b.build()
    }

    /// Root `{s, t}`, child `{u}` repeated four times with a cyclic-shift
    /// sibling edge `u -> u`.
    pub fn ex_sib() -> ParametricGraphTemplate {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template("T1", &root, 4).unwrap();
        let s = b.add_vertex("s", &root).unwrap();
        let t = b.add_vertex("t", &root).unwrap();
        let u = b.add_vertex("u", &t1).unwrap();
        b.add_edge(&s, &u, Weight::from(1));
        b.add_sibling_edge(&u, &u, Weight::from(2), SiblingSpec::CyclicShift(1));
        b.add_edge(&u, &t, Weight::from(1));
        b.build()
    }

    /// Root `{s}`, child `{u, t}` repeated three times, edges `s->u` (5) and
    /// `u->t` (1). The sink lives inside the repeated template.
    pub fn ex_in() -> ParametricGraphTemplate {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template("T1", &root, 3).unwrap();
        let s = b.add_vertex("s", &root).unwrap();
        let u = b.add_vertex("u", &t1).unwrap();
        let t = b.add_vertex("t", &t1).unwrap();
        b.add_edge(&s, &u, Weight::from(5));
        b.add_edge(&u, &t, Weight::from(1));
        b.build()
    }

    /// Template-cyclic fixture: root `{s, x, t}`, child `{u}` repeated `p`
    /// times, edges `s->u`, `u->x`, `x->u`, `u->t`, all unit weight. Paths
    /// leave the child template through `x` and re-enter it, so instance
    /// addresses matter for single-instance flows.
    pub fn ex_in2(p: u64) -> ParametricGraphTemplate {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template("T1", &root, p).unwrap();
        let s = b.add_vertex("s", &root).unwrap();
        let x = b.add_vertex("x", &root).unwrap();
        let t = b.add_vertex("t", &root).unwrap();
        let u = b.add_vertex("u", &t1).unwrap();
        b.add_edge(&s, &u, Weight::from(1));
        b.add_edge(&u, &x, Weight::from(1));
        b.add_edge(&x, &u, Weight::from(1));
        b.add_edge(&u, &t, Weight::from(1));
        b.build()
    }

    /// The nested three-template reference graph: templates T0..T3 with
    /// parameters 1, 2, 2, 3 and height 2; the instantiation has 16 vertices.
    pub fn fig1() -> ParametricGraphTemplate {
        let mut b = PgtBuilder::new("T0");
        let root = b.root_id();
        let t1 = b.add_template("T1", &root, 2).unwrap();
        let t2 = b.add_template("T2", &root, 2).unwrap();
        let t3 = b.add_template("T3", &t2, 3).unwrap();
        let a = b.add_vertex("a", &root).unwrap();
        let f = b.add_vertex("f", &root).unwrap();
        let g = b.add_vertex("g", &root).unwrap();
        let i = b.add_vertex("i", &root).unwrap();
        let bx = b.add_vertex("b", &t1).unwrap();
        let c = b.add_vertex("c", &t2).unwrap();
        let d = b.add_vertex("d", &t2).unwrap();
        let e = b.add_vertex("e", &t3).unwrap();
        b.add_edge(&a, &bx, Weight::from(2));
        b.add_edge(&bx, &f, Weight::from(1));
        b.add_edge(&f, &c, Weight::from(3));
        b.add_edge(&c, &e, Weight::from(1));
        b.add_edge(&e, &d, Weight::from(1));
        b.add_edge(&d, &g, Weight::from(2));
        b.add_edge(&g, &i, Weight::from(4));
        b.build()
    }
}

/// Bounds for the random template generator. All produced templates pass
/// validation.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_vertices: usize,
    pub max_edges: usize,
    pub max_height: usize,
    pub max_templates: usize,
    pub max_parameter: u64,
    pub max_weight: u64,
    pub sibling_edges: bool,
    /// Minimum number of vertices owned by the root directly.
    pub root_min_vertices: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_vertices: 12,
            max_edges: 24,
            max_height: 3,
            max_templates: 5,
            max_parameter: 4,
            max_weight: 9,
            sibling_edges: false,
            root_min_vertices: 0,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generates a random valid template within the given bounds.
pub fn random_template(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> ParametricGraphTemplate {
    let template_count = rng.gen_range(1..=cfg.max_templates);
    let mut b = PgtBuilder::new("T0");
    let root = b.root_id();

    // Random tree of bounded height.
    let mut nodes: Vec<(TemplateId, usize)> = vec![(root.clone(), 0)];
    for k in 1..template_count {
        let candidates: Vec<(TemplateId, usize)> = nodes
            .iter()
            .filter(|(_, d)| *d < cfg.max_height)
            .cloned()
            .collect();
        if candidates.is_empty() {
            break;
        }
        let (parent, depth) = candidates[rng.gen_range(0..candidates.len())].clone();
        let parameter = rng.gen_range(1..=cfg.max_parameter);
        let id = b.add_template(format!("T{k}"), &parent, parameter).unwrap();
        nodes.push((id, depth + 1));
    }

    // Every non-root template owns at least one vertex.
    let mut vertex_count = 0usize;
    let mut owned: Vec<(VertexId, TemplateId)> = Vec::new();
    let add_vertex = |b: &mut PgtBuilder, t: &TemplateId, vertex_count: &mut usize| {
        let id = b.add_vertex(format!("v{vertex_count}"), t).unwrap();
        *vertex_count += 1;
        id
    };
    for (t, _) in nodes.iter().skip(1) {
        let v = add_vertex(&mut b, t, &mut vertex_count);
        owned.push((v, t.clone()));
    }
    for _ in 0..cfg.root_min_vertices {
        let v = add_vertex(&mut b, &root, &mut vertex_count);
        owned.push((v, root.clone()));
    }
    let remaining = cfg.max_vertices.saturating_sub(vertex_count);
    for _ in 0..rng.gen_range(0..=remaining) {
        let (t, _) = nodes[rng.gen_range(0..nodes.len())].clone();
        let v = add_vertex(&mut b, &t, &mut vertex_count);
        owned.push((v, t));
    }

    // Group vertices by owner and record parent/child pairs.
    let mut by_owner: BTreeMap<TemplateId, Vec<VertexId>> = BTreeMap::new();
    for (v, t) in &owned {
        by_owner.entry(t.clone()).or_default().push(v.clone());
    }
    let pgt_so_far = b.build();
    let parents = pgt_so_far.parent_map();
    let params = pgt_so_far.parameter_map();
    let mut b = rebuild(pgt_so_far);

    let mut pairs: Vec<(TemplateId, TemplateId)> = Vec::new();
    for t in by_owner.keys() {
        pairs.push((t.clone(), t.clone()));
        if let Some(p) = parents.get(t) {
            if by_owner.contains_key(p) {
                pairs.push((t.clone(), p.clone()));
                pairs.push((p.clone(), t.clone()));
            }
        }
    }

    let edge_count = rng.gen_range(0..=cfg.max_edges);
    for _ in 0..edge_count {
        if pairs.is_empty() {
            break;
        }
        let weight = Weight::from(rng.gen_range(0..=cfg.max_weight));
        let (ta, tb) = pairs[rng.gen_range(0..pairs.len())].clone();
        let vs = &by_owner[&ta];
        let vd = &by_owner[&tb];
        let src = vs[rng.gen_range(0..vs.len())].clone();
        let dst = vd[rng.gen_range(0..vd.len())].clone();
        let sibling_here = cfg.sibling_edges && ta == tb && ta != TemplateId("T0".into()) && rng.gen_bool(0.3);
        if sibling_here {
            let p = u64::try_from(&params[&ta]).unwrap();
            let spec = if rng.gen_bool(0.5) {
                SiblingSpec::CyclicShift(rng.gen_range(-(p as i64)..=(p as i64)))
            } else {
                let mut map: Vec<u64> = (0..p).collect();
                map.shuffle(rng);
                SiblingSpec::Permutation(map)
            };
            b.add_sibling_edge(&src, &dst, weight, spec);
        } else {
            b.add_edge(&src, &dst, weight);
        }
    }

    let pgt = b.build();
    debug_assert!(pgt.validate().is_empty(), "generator must produce valid templates");
    pgt
}

/// Rebuilds a builder from a finished template so edges can still be added.
fn rebuild(pgt: ParametricGraphTemplate) -> PgtBuilder {
    let mut b = PgtBuilder::new(pgt.root.id.0.clone());
    fn add(b: &mut PgtBuilder, node: &crate::template::TemplateNode, parent: Option<&TemplateId>) {
        if let Some(p) = parent {
            b.add_template_big(node.id.0.clone(), p, node.parameter.clone()).unwrap();
        }
        for v in &node.owned_vertices {
            b.add_vertex(v.0.clone(), &node.id).unwrap();
        }
        for c in &node.children {
            add(b, c, Some(&node.id));
        }
    }
    add(&mut b, &pgt.root, None);
    for e in &pgt.edges {
        match &e.sibling {
            Some(spec) => b.add_sibling_edge(&e.src, &e.dst, e.weight.clone(), spec.clone()),
            None => b.add_edge(&e.src, &e.dst, e.weight.clone()),
        }
    }
    for d in &pgt.dummy_vertices {
        b.mark_dummy(d);
    }
    b
}

/// Picks a random existing vertex.
pub fn random_vertex(rng: &mut ChaCha8Rng, pgt: &ParametricGraphTemplate) -> VertexId {
    let all: Vec<&VertexId> = pgt.vertices.iter().collect();
    all[rng.gen_range(0..all.len())].clone()
}

/// All valid instance addresses of `v`, enumerated in lexicographic order.
/// Only usable when the address space is desk-scale.
pub fn all_addresses(pgt: &ParametricGraphTemplate, v: &VertexId) -> Vec<InstanceAddress> {
    let owner = pgt.template_of(v).expect("vertex exists");
    let params = pgt.parameter_map();
    let shape: Vec<u64> = pgt
        .root_path(&owner)
        .iter()
        .skip(1)
        .map(|t| u64::try_from(&params[t]).expect("desk-scale parameter"))
        .collect();
    let mut out = vec![Vec::new()];
    for p in shape {
        let mut next = Vec::new();
        for prefix in &out {
            for j in 0..p {
                let mut a = prefix.clone();
                a.push(j);
                next.push(a);
            }
        }
        out = next;
    }
    out.into_iter().map(|a| InstanceAddress::from_indices(&a)).collect()
}

/// Which leaf the literal rewriting procedure picks next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafOrder {
    First,
    Last,
}

/// Instantiation by the literal rewriting procedure: repeatedly pick a leaf
/// template, copy its contents once per repetition, and remove it. Serves as
/// an order-sensitive oracle for the production instantiator.
pub fn rewrite_instantiate(pgt: &ParametricGraphTemplate, order: LeafOrder) -> ConcreteGraph {
    #[derive(Clone)]
    struct Node {
        id: TemplateId,
        parameter: u64,
        vertices: Vec<(VertexId, Vec<u64>)>,
        children: Vec<Node>,
    }
    #[derive(Clone)]
    struct REdge {
        src: (VertexId, Vec<u64>),
        dst: (VertexId, Vec<u64>),
        weight: Weight,
        origin: usize,
        sibling: Option<(TemplateId, SiblingSpec)>,
    }

    fn build(node: &crate::template::TemplateNode) -> Node {
        Node {
            id: node.id.clone(),
            parameter: u64::try_from(&node.parameter).expect("desk-scale parameter"),
            vertices: node.owned_vertices.iter().map(|v| (v.clone(), Vec::new())).collect(),
            children: node.children.iter().map(build).collect(),
        }
    }

    let owner = pgt.owner_map();
    let mut tree = build(&pgt.root);
    let mut edges: Vec<REdge> = pgt
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| REdge {
            src: (e.src.clone(), Vec::new()),
            dst: (e.dst.clone(), Vec::new()),
            weight: e.weight.clone(),
            origin: i,
            sibling: e.sibling.clone().map(|s| (owner[&e.src].clone(), s)),
        })
        .collect();

    // Paths from the root to each current leaf (beyond the root itself).
    fn leaves(node: &Node, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node.children.is_empty() {
            if !path.is_empty() {
                out.push(path.clone());
            }
            return;
        }
        for (i, c) in node.children.iter().enumerate() {
            path.push(i);
            leaves(c, path, out);
            path.pop();
        }
    }

    loop {
        let mut all = Vec::new();
        leaves(&tree, &mut Vec::new(), &mut all);
        if all.is_empty() {
            break;
        }
        let pick = match order {
            LeafOrder::First => all.first().unwrap().clone(),
            LeafOrder::Last => all.last().unwrap().clone(),
        };
        // Detach the chosen leaf.
        let mut parent = &mut tree;
        for &i in &pick[..pick.len() - 1] {
            parent = &mut parent.children[i];
        }
        let leaf = parent.children.remove(*pick.last().unwrap());
        let members: std::collections::BTreeSet<(VertexId, Vec<u64>)> =
            leaf.vertices.iter().cloned().collect();

        // Copy vertices into the parent with a fresh leading index.
        for (v, addr) in &leaf.vertices {
            for j in 0..leaf.parameter {
                let mut a = vec![j];
                a.extend(addr.iter().cloned());
                parent.vertices.push((v.clone(), a));
            }
        }

        let mut next_edges = Vec::with_capacity(edges.len());
        for e in edges {
            let src_in = members.contains(&e.src);
            let dst_in = members.contains(&e.dst);
            if !src_in && !dst_in {
                next_edges.push(e);
                continue;
            }
            let is_sibling_here = matches!(&e.sibling, Some((t, _)) if *t == leaf.id);
            for j in 0..leaf.parameter {
                let extend = |(v, addr): &(VertexId, Vec<u64>), idx: u64| {
                    let mut a = vec![idx];
                    a.extend(addr.iter().cloned());
                    (v.clone(), a)
                };
                let (src, dst) = if is_sibling_here {
                    let (_, spec) = e.sibling.as_ref().unwrap();
                    (extend(&e.src, j), extend(&e.dst, spec.apply(j, leaf.parameter)))
                } else {
                    (
                        if src_in { extend(&e.src, j) } else { e.src.clone() },
                        if dst_in { extend(&e.dst, j) } else { e.dst.clone() },
                    )
                };
                next_edges.push(REdge {
                    src,
                    dst,
                    weight: e.weight.clone(),
                    origin: e.origin,
                    sibling: if is_sibling_here { None } else { e.sibling.clone() },
                });
            }
        }
        edges = next_edges;
    }

    let mut g = ConcreteGraph::default();
    for (v, addr) in &tree.vertices {
        let address = InstanceAddress::from_indices(addr);
        g.vertices.push(ConcreteVertex {
            id: concrete_id(v, &address),
            origin: v.clone(),
            address,
            dummy: pgt.dummy_vertices.contains(v),
        });
    }
    for e in &edges {
        let a_src = InstanceAddress::from_indices(&e.src.1);
        let a_dst = InstanceAddress::from_indices(&e.dst.1);
        g.edges.push(ConcreteEdge {
            src: concrete_id(&e.src.0, &a_src),
            dst: concrete_id(&e.dst.0, &a_dst),
            weight: e.weight.clone(),
            origin: Some(e.origin),
        });
    }
    let mut g_sorted = g;
    g_sorted.vertices.sort_by(|a, b| a.id.cmp(&b.id));
    g_sorted
        .edges
        .sort_by(|a, b| (&a.src, &a.dst, &a.weight, a.origin).cmp(&(&b.src, &b.dst, &b.weight, b.origin)));
    g_sorted
}
