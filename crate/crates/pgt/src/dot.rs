//! Graphviz rendering. Templates become nested clusters captioned with their
//! repetition count; output ordering is deterministic.

use std::fmt::Write as _;

use crate::instantiate::ConcreteGraph;
use crate::template::{ParametricGraphTemplate, SiblingSpec, TemplateNode};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders the template graph; each non-root template is a cluster labeled
/// `id ×P`, the root caption labels the whole digraph.
pub fn export_template_dot(pgt: &ParametricGraphTemplate) -> String {
    let mut out = String::new();
    out.push_str("digraph template {\n");
    let _ = writeln!(out, "  label={};", quote(&format!("{} ×{}", pgt.root.id, pgt.root.parameter)));
    let mut sorted_root = pgt.root.clone();
    sort_node(&mut sorted_root);
    for v in &sorted_root.owned_vertices {
        let _ = writeln!(out, "  {};", quote(&v.0));
    }
    for child in &sorted_root.children {
        render_cluster(child, 1, &mut out);
    }
    let mut edges: Vec<String> = pgt
        .edges
        .iter()
        .map(|e| {
            let label = match &e.sibling {
                None => e.weight.to_string(),
                Some(SiblingSpec::CyclicShift(d)) => format!("{} Δ{:+}", e.weight, d),
                Some(SiblingSpec::Permutation(_)) => format!("{} π", e.weight),
            };
            let style = if e.sibling.is_some() { ", style=dashed" } else { "" };
            format!(
                "  {} -> {} [label={}{}];\n",
                quote(&e.src.0),
                quote(&e.dst.0),
                quote(&label),
                style
            )
        })
        .collect();
    edges.sort();
    for e in edges {
        out.push_str(&e);
    }
    out.push_str("}\n");
    out
}

fn sort_node(node: &mut TemplateNode) {
    node.children.sort_by(|a, b| a.id.cmp(&b.id));
    for c in &mut node.children {
        sort_node(c);
    }
}

fn render_cluster(node: &TemplateNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(out, "{pad}subgraph cluster_{} {{", sanitize(&node.id.0));
    let _ = writeln!(out, "{pad}  label={};", quote(&format!("{} ×{}", node.id, node.parameter)));
    for v in &node.owned_vertices {
        let _ = writeln!(out, "{pad}  {};", quote(&v.0));
    }
    for child in &node.children {
        render_cluster(child, depth + 1, out);
    }
    let _ = writeln!(out, "{pad}}}");
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Renders an instantiated graph as a flat digraph.
pub fn export_concrete_dot(g: &ConcreteGraph) -> String {
    let mut out = String::new();
    out.push_str("digraph instantiation {\n");
    let mut verts: Vec<&str> = g.vertices.iter().map(|v| v.id.0.as_str()).collect();
    verts.sort_unstable();
    for v in verts {
        let _ = writeln!(out, "  {};", quote(v));
    }
    let mut edges: Vec<String> = g
        .edges
        .iter()
        .map(|e| {
            format!(
                "  {} -> {} [label={}];\n",
                quote(&e.src.0),
                quote(&e.dst.0),
                quote(&e.weight.to_string())
            )
        })
        .collect();
    edges.sort();
    for e in edges {
        out.push_str(&e);
    }
    out.push_str("}\n");
    out
}
