//! The on-disk JSON form of templates and loop programs. Numeric fields that
//! can exceed machine integers (parameters, weights, sizes) are decimal
//! strings; canonical serialization sorts keys and id-ordered lists so a
//! parse/serialize round trip is byte-identical.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instantiate::ConcreteGraph;
use crate::loops::{ArrayValue, BinOp, Inputs, LoopProgram, ReduceOp, VertexKind};
use crate::template::{
    Edge, ParametricGraphTemplate, SiblingSpec, TemplateId, TemplateNode, VertexId,
};
use crate::weight::Weight;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexEntry {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum SiblingEntry {
    #[serde(rename = "cyclic_shift")]
    CyclicShift { delta: i64 },
    #[serde(rename = "permutation")]
    Permutation { map: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub src: String,
    pub dst: String,
    pub weight: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sibling: Option<SiblingEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub id: String,
    pub parameter: String,
    pub vertices: Vec<String>,
    pub children: Vec<TemplateEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateDocument {
    pub vertices: Vec<VertexEntry>,
    pub edges: Vec<EdgeEntry>,
    pub templates: TemplateEntry,
}

impl TemplateDocument {
    pub fn parse(text: &str) -> Result<TemplateDocument> {
        serde_json::from_str(text).map_err(|e| Error::Document(format!("JSON parse error: {e}")))
    }

    /// Serializes with sorted keys, sorted vertex/edge lists, and children in
    /// id order. Parsing the output and serializing again is the identity.
    pub fn to_canonical_json(&self) -> String {
        let mut doc = self.clone();
        doc.sort();
        let value = serde_json::to_value(&doc).expect("document serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    fn sort(&mut self) {
        self.vertices.sort_by(|a, b| a.id.cmp(&b.id));
        self.edges.sort_by(|a, b| {
            let ka = (&a.src, &a.dst, &a.weight, a.rank, format!("{:?}", a.sibling));
            let kb = (&b.src, &b.dst, &b.weight, b.rank, format!("{:?}", b.sibling));
            ka.cmp(&kb)
        });
        fn sort_tmpl(t: &mut TemplateEntry) {
            t.vertices.sort();
            t.children.sort_by(|a, b| a.id.cmp(&b.id));
            for c in &mut t.children {
                sort_tmpl(c);
            }
        }
        sort_tmpl(&mut self.templates);
    }

    pub fn has_kinds(&self) -> bool {
        self.vertices
            .iter()
            .any(|v| v.kind.as_deref().is_some_and(|k| k != "dummy"))
    }

    pub fn from_pgt(pgt: &ParametricGraphTemplate) -> TemplateDocument {
        let vertices = pgt
            .vertices
            .iter()
            .map(|v| VertexEntry {
                id: v.0.clone(),
                kind: pgt.dummy_vertices.contains(v).then(|| "dummy".to_owned()),
                dims: None,
                sizes: None,
            })
            .collect();
        TemplateDocument {
            vertices,
            edges: pgt.edges.iter().map(|e| edge_entry(e, None)).collect(),
            templates: template_entry(&pgt.root),
        }
    }

    pub fn from_program(lp: &LoopProgram) -> TemplateDocument {
        let vertices = lp
            .pgt
            .vertices
            .iter()
            .map(|v| {
                let kind = lp.kinds.get(v);
                let sizes = kind.and_then(|k| k.sizes());
                VertexEntry {
                    id: v.0.clone(),
                    kind: kind.map(kind_to_string).or_else(|| {
                        lp.pgt.dummy_vertices.contains(v).then(|| "dummy".to_owned())
                    }),
                    dims: sizes.map(|s| s.len()),
                    sizes: sizes.map(|s| s.iter().map(|x| x.to_string()).collect()),
                }
            })
            .collect();
        let edges = lp
            .pgt
            .edges
            .iter()
            .zip(lp.ranks.iter())
            .map(|(e, rank)| edge_entry(e, *rank))
            .collect();
        TemplateDocument {
            vertices,
            edges,
            templates: template_entry(&lp.pgt.root),
        }
    }

    pub fn to_pgt(&self) -> Result<ParametricGraphTemplate> {
        let (pgt, _, _) = self.convert()?;
        Ok(pgt)
    }

    pub fn to_program(&self) -> Result<LoopProgram> {
        let (pgt, kinds, ranks) = self.convert()?;
        for v in &pgt.vertices {
            if !kinds.contains_key(v) && !pgt.dummy_vertices.contains(v) {
                return Err(Error::Document(format!(
                    "vertex `{v}` has no kind; a loop program types every vertex"
                )));
            }
        }
        Ok(LoopProgram { pgt, kinds, ranks })
    }

    fn convert(&self) -> Result<(ParametricGraphTemplate, BTreeMap<VertexId, VertexKind>, Vec<Option<u32>>)> {
        let mut vertices = std::collections::BTreeSet::new();
        let mut kinds: BTreeMap<VertexId, VertexKind> = BTreeMap::new();
        let mut dummies = std::collections::BTreeSet::new();
        for entry in &self.vertices {
            if entry.id.contains('@') {
                return Err(Error::Document(format!(
                    "vertex id `{}` contains the reserved character `@`",
                    entry.id
                )));
            }
            let id = VertexId(entry.id.clone());
            if !vertices.insert(id.clone()) {
                return Err(Error::Document(format!("duplicate vertex id `{}`", entry.id)));
            }
            match entry.kind.as_deref() {
                None => {}
                Some("dummy") => {
                    dummies.insert(id);
                }
                Some(k) => {
                    let kind = kind_from_entry(k, entry)?;
                    kinds.insert(id, kind);
                }
            }
        }

        let mut edges = Vec::with_capacity(self.edges.len());
        let mut ranks = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let weight = Weight::parse(&e.weight).ok_or_else(|| {
                Error::Document(format!(
                    "bad weight `{}` on edge ({}, {}): expected a nonnegative decimal integer or \"inf\"",
                    e.weight, e.src, e.dst
                ))
            })?;
            let sibling = e.sibling.as_ref().map(|s| match s {
                SiblingEntry::CyclicShift { delta } => SiblingSpec::CyclicShift(*delta),
                SiblingEntry::Permutation { map } => SiblingSpec::Permutation(map.clone()),
            });
            edges.push(Edge {
                src: VertexId(e.src.clone()),
                dst: VertexId(e.dst.clone()),
                weight,
                sibling,
            });
            ranks.push(e.rank);
        }

        let root = template_node(&self.templates)?;
        Ok((
            ParametricGraphTemplate {
                vertices,
                edges,
                root,
                dummy_vertices: dummies,
            },
            kinds,
            ranks,
        ))
    }
}

fn edge_entry(e: &Edge, rank: Option<u32>) -> EdgeEntry {
    EdgeEntry {
        src: e.src.0.clone(),
        dst: e.dst.0.clone(),
        weight: e.weight.to_string(),
        rank,
        sibling: e.sibling.as_ref().map(|s| match s {
            SiblingSpec::CyclicShift(delta) => SiblingEntry::CyclicShift { delta: *delta },
            SiblingSpec::Permutation(map) => SiblingEntry::Permutation { map: map.clone() },
        }),
    }
}

fn template_entry(node: &TemplateNode) -> TemplateEntry {
    TemplateEntry {
        id: node.id.0.clone(),
        parameter: node.parameter.to_string(),
        vertices: node.owned_vertices.iter().map(|v| v.0.clone()).collect(),
        children: node.children.iter().map(template_entry).collect(),
    }
}

fn template_node(entry: &TemplateEntry) -> Result<TemplateNode> {
    let parameter = parse_biguint(&entry.parameter).ok_or_else(|| {
        Error::Document(format!(
            "bad parameter `{}` for template `{}`",
            entry.parameter, entry.id
        ))
    })?;
    Ok(TemplateNode {
        id: TemplateId(entry.id.clone()),
        parameter,
        owned_vertices: entry.vertices.iter().map(|v| VertexId(v.clone())).collect(),
        children: entry
            .children
            .iter()
            .map(template_node)
            .collect::<Result<Vec<_>>>()?,
    })
}

fn parse_biguint(s: &str) -> Option<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn kind_to_string(kind: &VertexKind) -> String {
    match kind {
        VertexKind::InputMem { .. } => "input".into(),
        VertexKind::OutputMem { .. } => "output".into(),
        VertexKind::TempMem { .. } => "temp".into(),
        VertexKind::Parfor => "parfor".into(),
        VertexKind::Reduce(ReduceOp::Add) => "reduce:+".into(),
        VertexKind::Reduce(ReduceOp::Mul) => "reduce:*".into(),
        VertexKind::Copy => "copy".into(),
        VertexKind::PassThrough => "passthrough".into(),
        VertexKind::Read => "read".into(),
        VertexKind::Write => "write".into(),
        VertexKind::BinOp(BinOp::Add) => "binop:+".into(),
        VertexKind::BinOp(BinOp::Sub) => "binop:-".into(),
        VertexKind::BinOp(BinOp::Mul) => "binop:*".into(),
        VertexKind::BinOp(BinOp::Div) => "binop:/".into(),
        VertexKind::Const(c) => format!("const:{}", rational_to_string(c)),
    }
}

fn kind_from_entry(kind: &str, entry: &VertexEntry) -> Result<VertexKind> {
    let sizes = || -> Result<Vec<u64>> {
        let sizes = entry.sizes.as_ref().ok_or_else(|| {
            Error::Document(format!("memory vertex `{}` needs sizes", entry.id))
        })?;
        let parsed: Option<Vec<u64>> = sizes.iter().map(|s| s.parse().ok()).collect();
        let parsed = parsed.ok_or_else(|| {
            Error::Document(format!("bad sizes for vertex `{}`", entry.id))
        })?;
        if parsed.is_empty() {
            return Err(Error::Document(format!(
                "memory vertex `{}` needs at least one dimension",
                entry.id
            )));
        }
        if let Some(dims) = entry.dims {
            if dims != parsed.len() {
                return Err(Error::Document(format!(
                    "vertex `{}`: dims {dims} does not match {} sizes",
                    entry.id,
                    parsed.len()
                )));
            }
        }
        Ok(parsed)
    };
    let kind = match kind {
        "input" => VertexKind::InputMem { sizes: sizes()? },
        "output" => VertexKind::OutputMem { sizes: sizes()? },
        "temp" => VertexKind::TempMem { sizes: sizes()? },
        "parfor" => VertexKind::Parfor,
        "reduce:+" => VertexKind::Reduce(ReduceOp::Add),
        "reduce:*" => VertexKind::Reduce(ReduceOp::Mul),
        "copy" => VertexKind::Copy,
        "passthrough" => VertexKind::PassThrough,
        "read" => VertexKind::Read,
        "write" => VertexKind::Write,
        "binop:+" => VertexKind::BinOp(BinOp::Add),
        "binop:-" => VertexKind::BinOp(BinOp::Sub),
        "binop:*" => VertexKind::BinOp(BinOp::Mul),
        "binop:/" => VertexKind::BinOp(BinOp::Div),
        other => {
            if let Some(text) = other.strip_prefix("const:") {
                VertexKind::Const(parse_rational(text).ok_or_else(|| {
                    Error::Document(format!("bad constant `{text}` on vertex `{}`", entry.id))
                })?)
            } else {
                return Err(Error::Document(format!(
                    "unknown kind `{other}` on vertex `{}`",
                    entry.id
                )));
            }
        }
    };
    if !kind.is_memory() && (entry.dims.is_some() || entry.sizes.is_some()) {
        return Err(Error::Document(format!(
            "vertex `{}` is not a memory vertex but declares dims/sizes",
            entry.id
        )));
    }
    Ok(kind)
}

/// Parses an exact number: an integer (`-3`), a fraction (`5/3`), or a
/// terminating decimal (`1.25`).
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().ok()?;
        let d: BigInt = den.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = int_part.starts_with('-');
        let int: BigInt = if int_part == "-" { BigInt::zero() } else { int_part.parse().ok()? };
        let frac: BigInt = frac_part.parse().ok()?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let magnitude = int.abs() * &scale + frac;
        let signed = if negative { -magnitude } else { magnitude };
        return Some(BigRational::new(signed, scale));
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(n))
}

/// Exact text form: integers as decimals, terminating fractions as decimals,
/// anything else as `p/q`.
pub fn rational_to_string(r: &BigRational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let reduced = r.reduced();
    let mut den = reduced.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den.is_one() {
        let digits = twos.max(fives);
        let scale = BigInt::from(10u32).pow(digits);
        let scaled = (reduced.numer() * &scale) / reduced.denom();
        let negative = scaled.is_negative();
        let text = scaled.abs().to_string();
        let text = format!("{:0>width$}", text, width = digits as usize + 1);
        let split = text.len() - digits as usize;
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        out.push_str(&text[..split]);
        out.push('.');
        out.push_str(&text[split..]);
        out
    } else {
        format!("{}/{}", reduced.numer(), reduced.denom())
    }
}

/// Parses the CLI's nested-array input document: an object mapping array
/// names to nested arrays of exact number strings.
pub fn parse_input_arrays(text: &str) -> Result<Inputs> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Document(format!("JSON parse error: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Document("inputs must be a JSON object".into()))?;
    let mut out = Inputs::new();
    for (name, nested) in obj {
        out.insert(name.clone(), parse_nested_array(name, nested)?);
    }
    Ok(out)
}

fn parse_nested_array(name: &str, value: &serde_json::Value) -> Result<ArrayValue> {
    let mut sizes = Vec::new();
    let mut cursor = value;
    loop {
        match cursor {
            serde_json::Value::Array(items) => {
                sizes.push(items.len() as u64);
                match items.first() {
                    Some(first) => cursor = first,
                    None => break,
                }
            }
            _ => break,
        }
    }
    if sizes.is_empty() {
        return Err(Error::Document(format!("array `{name}` must be a nested JSON array")));
    }
    let mut data = Vec::new();
    fn walk(
        name: &str,
        value: &serde_json::Value,
        sizes: &[u64],
        data: &mut Vec<BigRational>,
    ) -> Result<()> {
        match sizes {
            [] => {
                let text = value
                    .as_str()
                    .ok_or_else(|| Error::Document(format!("array `{name}`: entries must be strings")))?;
                let r = parse_rational(text)
                    .ok_or_else(|| Error::Document(format!("array `{name}`: bad number `{text}`")))?;
                data.push(r);
                Ok(())
            }
            [head, rest @ ..] => {
                let items = value
                    .as_array()
                    .ok_or_else(|| Error::Document(format!("array `{name}` is ragged")))?;
                if items.len() as u64 != *head {
                    return Err(Error::Document(format!("array `{name}` is ragged")));
                }
                for item in items {
                    walk(name, item, rest, data)?;
                }
                Ok(())
            }
        }
    }
    walk(name, value, &sizes, &mut data)?;
    Ok(ArrayValue { sizes, data })
}

/// Renders output arrays as nested arrays of exact number strings.
pub fn arrays_to_json(arrays: &BTreeMap<String, ArrayValue>) -> serde_json::Value {
    let mut out = serde_json::Map::new();
    for (name, array) in arrays {
        out.insert(name.clone(), nested_array_json(array));
    }
    serde_json::Value::Object(out)
}

fn nested_array_json(array: &ArrayValue) -> serde_json::Value {
    fn build(sizes: &[u64], data: &[BigRational]) -> serde_json::Value {
        match sizes {
            [] => serde_json::Value::String(rational_to_string(&data[0])),
            [head, rest @ ..] => {
                let head = *head as usize;
                let chunk = if head == 0 { 0 } else { data.len() / head };
                let items = (0..head)
                    .map(|i| build(rest, &data[i * chunk..(i + 1) * chunk]))
                    .collect();
                serde_json::Value::Array(items)
            }
        }
    }
    build(&array.sizes, &array.data)
}

/// JSON form of an instantiated graph: the input schema plus address labels.
pub fn concrete_to_json(g: &ConcreteGraph) -> serde_json::Value {
    let vertices: Vec<serde_json::Value> = g
        .vertices
        .iter()
        .map(|v| {
            let mut m = serde_json::Map::new();
            m.insert("id".into(), v.id.0.clone().into());
            m.insert("origin".into(), v.origin.0.clone().into());
            m.insert(
                "address".into(),
                serde_json::Value::Array(
                    v.address.0.iter().map(|i| i.to_string().into()).collect(),
                ),
            );
            if v.dummy {
                m.insert("kind".into(), "dummy".into());
            }
            serde_json::Value::Object(m)
        })
        .collect();
    let edges: Vec<serde_json::Value> = g
        .edges
        .iter()
        .map(|e| {
            let mut m = serde_json::Map::new();
            m.insert("src".into(), e.src.0.clone().into());
            m.insert("dst".into(), e.dst.0.clone().into());
            m.insert("weight".into(), e.weight.to_string().into());
            serde_json::Value::Object(m)
        })
        .collect();
    let mut root = serde_json::Map::new();
    root.insert("vertices".into(), serde_json::Value::Array(vertices));
    root.insert("edges".into(), serde_json::Value::Array(edges));
    serde_json::Value::Object(root)
}
