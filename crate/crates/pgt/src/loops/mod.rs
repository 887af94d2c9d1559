//! Parallel-loop program frontend: typed vertices over a parametric graph
//! template, a serial-execution interpreter with race detection, and
//! flow-based data-movement bounds.

mod build;
mod interp;

pub use build::{build_cross_correlation, build_matmul};
pub use interp::{detect_races, interpret, interpret_with_schedule, Schedule};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::flow::{max_all_st_flow, max_single_st_flow};
use crate::instantiate::ConcreteVertexId;
use crate::template::{InstanceAddress, ParametricGraphTemplate, TemplateId, VertexId, Violation};
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Add,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Role of a vertex in a parallel-loop program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexKind {
    InputMem { sizes: Vec<u64> },
    OutputMem { sizes: Vec<u64> },
    TempMem { sizes: Vec<u64> },
    Parfor,
    Reduce(ReduceOp),
    Copy,
    PassThrough,
    Read,
    Write,
    BinOp(BinOp),
    Const(BigRational),
}

impl VertexKind {
    pub fn is_memory(&self) -> bool {
        matches!(
            self,
            VertexKind::InputMem { .. } | VertexKind::OutputMem { .. } | VertexKind::TempMem { .. }
        )
    }

    pub fn sizes(&self) -> Option<&[u64]> {
        match self {
            VertexKind::InputMem { sizes }
            | VertexKind::OutputMem { sizes }
            | VertexKind::TempMem { sizes } => Some(sizes),
            _ => None,
        }
    }
}

/// A program: a parametric graph template whose vertices carry kinds and
/// whose edges carry input ranks (position of the edge among the inputs of
/// its destination).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopProgram {
    pub pgt: ParametricGraphTemplate,
    pub kinds: BTreeMap<VertexId, VertexKind>,
    /// One entry per edge of `pgt.edges`.
    pub ranks: Vec<Option<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramViolation {
    Template(Violation),
    MissingKind { vertex: VertexId },
    UnknownKindVertex { vertex: VertexId },
    MemoryNotInRoot { vertex: VertexId },
    SiblingEdgeInProgram { src: VertexId, dst: VertexId },
    ParforHasInput { vertex: VertexId },
    ParforTargetNotInChild { vertex: VertexId, target: VertexId },
    ReduceInputNotFromChild { vertex: VertexId },
    ReduceOutputToMemory { vertex: VertexId },
    CopyTargetInParent { vertex: VertexId, target: VertexId },
    CopyTargetMemory { vertex: VertexId, target: VertexId },
    PassThroughTwoMemoryNeighbors { vertex: VertexId },
    ReadFirstInputInvalid { vertex: VertexId },
    ReadExtraInputFromMemory { vertex: VertexId, source: VertexId },
    ReadOutputToMemory { vertex: VertexId },
    WriteInputFromMemory { vertex: VertexId, source: VertexId },
    WriteOutputInvalid { vertex: VertexId },
    OperatorTouchesMemory { vertex: VertexId },
    WrongInDegree { vertex: VertexId, expected: String, got: usize },
    WrongOutDegree { vertex: VertexId, expected: String, got: usize },
    CyclicTemplateGraph,
    RanksIncomplete { vertex: VertexId, reason: String },
}

impl fmt::Display for ProgramViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ProgramViolation::*;
        match self {
            Template(v) => write!(f, "{v}"),
            MissingKind { vertex } => write!(f, "vertex `{vertex}` has no kind"),
            UnknownKindVertex { vertex } => {
                write!(f, "kind declared for unknown vertex `{vertex}`")
            }
            MemoryNotInRoot { vertex } => {
                write!(f, "memory vertex `{vertex}` does not belong to the root template")
            }
            SiblingEdgeInProgram { src, dst } => {
                write!(f, "programs do not admit sibling edges (found ({src}, {dst}))")
            }
            ParforHasInput { vertex } => write!(f, "parfor `{vertex}` has an input edge"),
            ParforTargetNotInChild { vertex, target } => {
                write!(f, "parfor `{vertex}` must target a child template, not `{target}`")
            }
            ReduceInputNotFromChild { vertex } => {
                write!(f, "reduce `{vertex}` must take its input from a child template")
            }
            ReduceOutputToMemory { vertex } => {
                write!(f, "reduce `{vertex}` must not output to a memory vertex")
            }
            CopyTargetInParent { vertex, target } => {
                write!(f, "copy `{vertex}` targets `{target}` in a parent template")
            }
            CopyTargetMemory { vertex, target } => {
                write!(f, "copy `{vertex}` targets memory vertex `{target}`")
            }
            PassThroughTwoMemoryNeighbors { vertex } => {
                write!(f, "pass-through `{vertex}` has two memory neighbors")
            }
            ReadFirstInputInvalid { vertex } => {
                write!(f, "read `{vertex}` must take its first input from memory or a pass-through")
            }
            ReadExtraInputFromMemory { vertex, source } => {
                write!(f, "read `{vertex}` takes a non-first input from memory vertex `{source}`")
            }
            ReadOutputToMemory { vertex } => {
                write!(f, "read `{vertex}` must not output to a memory vertex")
            }
            WriteInputFromMemory { vertex, source } => {
                write!(f, "write `{vertex}` takes an input from memory vertex `{source}`")
            }
            WriteOutputInvalid { vertex } => {
                write!(f, "write `{vertex}` must output to memory or a pass-through")
            }
            OperatorTouchesMemory { vertex } => {
                write!(f, "operator `{vertex}` is connected to a memory vertex")
            }
            WrongInDegree { vertex, expected, got } => {
                write!(f, "vertex `{vertex}` has in-degree {got}, expected {expected}")
            }
            WrongOutDegree { vertex, expected, got } => {
                write!(f, "vertex `{vertex}` has out-degree {got}, expected {expected}")
            }
            CyclicTemplateGraph => write!(f, "the template graph has a cycle"),
            RanksIncomplete { vertex, reason } => {
                write!(f, "input ranks of `{vertex}` are not well-formed: {reason}")
            }
        }
    }
}

/// Dense row-major array of exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayValue {
    pub sizes: Vec<u64>,
    pub data: Vec<BigRational>,
}

impl ArrayValue {
    pub fn zeros(sizes: &[u64]) -> Self {
        let len: u64 = sizes.iter().product();
        ArrayValue {
            sizes: sizes.to_vec(),
            data: vec![BigRational::from_integer(BigInt::from(0)); len as usize],
        }
    }

    pub fn flat_index(&self, index: &[u64]) -> Option<usize> {
        if index.len() != self.sizes.len() {
            return None;
        }
        let mut flat = 0u64;
        for (i, (&idx, &size)) in index.iter().zip(self.sizes.iter()).enumerate() {
            let _ = i;
            if idx >= size {
                return None;
            }
            flat = flat * size + idx;
        }
        Some(flat as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RacePair {
    pub array: VertexId,
    pub index: Vec<BigInt>,
    pub first: ConcreteVertexId,
    pub second: ConcreteVertexId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UndefinedReason {
    OutOfBounds { vertex: ConcreteVertexId, array: VertexId, index: Vec<BigInt> },
    NonIntegralIndex { vertex: ConcreteVertexId },
    IndexArityMismatch { vertex: ConcreteVertexId, array: VertexId, expected: usize, got: usize },
    DivisionByZero { vertex: ConcreteVertexId },
    NoArrayForAccess { vertex: ConcreteVertexId },
    AmbiguousValue { vertex: ConcreteVertexId },
}

impl fmt::Display for UndefinedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use UndefinedReason::*;
        match self {
            OutOfBounds { vertex, array, index } => {
                let idx: Vec<String> = index.iter().map(|i| i.to_string()).collect();
                write!(f, "out-of-bounds access at `{vertex}`: {array}[{}]", idx.join(", "))
            }
            NonIntegralIndex { vertex } => write!(f, "non-integral index at `{vertex}`"),
            IndexArityMismatch { vertex, array, expected, got } => write!(
                f,
                "`{vertex}` addresses {array} with {got} indices, expected {expected}"
            ),
            DivisionByZero { vertex } => write!(f, "division by zero at `{vertex}`"),
            NoArrayForAccess { vertex } => {
                write!(f, "`{vertex}` accesses memory through a wire that reaches no array")
            }
            AmbiguousValue { vertex } => {
                write!(f, "`{vertex}` receives several instance values on one input")
            }
        }
    }
}

/// Result of one serial execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionReport {
    /// Output arrays by vertex name; withheld when the execution is undefined.
    pub outputs: Option<BTreeMap<String, ArrayValue>>,
    pub races: Vec<RacePair>,
    pub undefined: Option<UndefinedReason>,
    /// Total dataflow weight of the execution graph: one per instantiated
    /// edge that does not originate at a loop-index vertex.
    pub movement_weight_total: BigUint,
}

impl LoopProgram {
    pub fn kind(&self, v: &VertexId) -> Option<&VertexKind> {
        self.kinds.get(v)
    }
}

/// Checks all program well-formedness rules. Structural template violations
/// are included.
pub fn validate_program(lp: &LoopProgram) -> Vec<ProgramViolation> {
    let mut out: Vec<ProgramViolation> = lp
        .pgt
        .validate()
        .into_iter()
        .map(ProgramViolation::Template)
        .collect();

    for v in &lp.pgt.vertices {
        if !lp.kinds.contains_key(v) {
            out.push(ProgramViolation::MissingKind { vertex: v.clone() });
        }
    }
    for v in lp.kinds.keys() {
        if !lp.pgt.vertices.contains(v) {
            out.push(ProgramViolation::UnknownKindVertex { vertex: v.clone() });
        }
    }
    if !out.is_empty() {
        // Degree rules assume a structurally sound, fully-typed graph.
        return out;
    }

    let owner = lp.pgt.owner_map();
    let parents = lp.pgt.parent_map();
    let root = lp.pgt.root.id.clone();
    let is_child_of = |t: &TemplateId, of: &TemplateId| parents.get(t) == Some(of);
    let kind = |v: &VertexId| &lp.kinds[v];

    let mut ins: BTreeMap<&VertexId, Vec<(usize, &VertexId)>> = BTreeMap::new();
    let mut outs: BTreeMap<&VertexId, Vec<(usize, &VertexId)>> = BTreeMap::new();
    for (i, e) in lp.pgt.edges.iter().enumerate() {
        ins.entry(&e.dst).or_default().push((i, &e.src));
        outs.entry(&e.src).or_default().push((i, &e.dst));
        if e.sibling.is_some() {
            out.push(ProgramViolation::SiblingEdgeInProgram {
                src: e.src.clone(),
                dst: e.dst.clone(),
            });
        }
    }
    let empty: Vec<(usize, &VertexId)> = Vec::new();

    for v in &lp.pgt.vertices {
        let inputs = ins.get(v).unwrap_or(&empty);
        let outputs = outs.get(v).unwrap_or(&empty);
        let indeg = inputs.len();
        let outdeg = outputs.len();
        let tv = &owner[v];
        match kind(v) {
            VertexKind::InputMem { .. } | VertexKind::OutputMem { .. } | VertexKind::TempMem { .. } => {
                if tv != &root {
                    out.push(ProgramViolation::MemoryNotInRoot { vertex: v.clone() });
                }
            }
            VertexKind::Parfor => {
                if indeg != 0 {
                    out.push(ProgramViolation::ParforHasInput { vertex: v.clone() });
                }
                if outdeg != 1 {
                    out.push(ProgramViolation::WrongOutDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: outdeg,
                    });
                } else {
                    let target = outputs[0].1;
                    if !is_child_of(&owner[target], tv) {
                        out.push(ProgramViolation::ParforTargetNotInChild {
                            vertex: v.clone(),
                            target: target.clone(),
                        });
                    }
                }
            }
            VertexKind::Reduce(_) => {
                if indeg != 1 {
                    out.push(ProgramViolation::WrongInDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: indeg,
                    });
                } else if !is_child_of(&owner[inputs[0].1], tv) {
                    out.push(ProgramViolation::ReduceInputNotFromChild { vertex: v.clone() });
                }
                if outdeg != 1 {
                    out.push(ProgramViolation::WrongOutDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: outdeg,
                    });
                } else if kind(outputs[0].1).is_memory() {
                    out.push(ProgramViolation::ReduceOutputToMemory { vertex: v.clone() });
                }
            }
            VertexKind::Copy => {
                if indeg != 1 {
                    out.push(ProgramViolation::WrongInDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: indeg,
                    });
                }
                for (_, u) in outputs {
                    if is_child_of(tv, &owner[u]) {
                        out.push(ProgramViolation::CopyTargetInParent {
                            vertex: v.clone(),
                            target: (*u).clone(),
                        });
                    }
                    if kind(u).is_memory() {
                        out.push(ProgramViolation::CopyTargetMemory {
                            vertex: v.clone(),
                            target: (*u).clone(),
                        });
                    }
                }
            }
            VertexKind::PassThrough => {
                if indeg != 1 {
                    out.push(ProgramViolation::WrongInDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: indeg,
                    });
                }
                if outdeg != 1 {
                    out.push(ProgramViolation::WrongOutDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: outdeg,
                    });
                }
                let memory_neighbors = inputs
                    .iter()
                    .chain(outputs.iter())
                    .filter(|(_, u)| kind(u).is_memory())
                    .count();
                if memory_neighbors > 1 {
                    out.push(ProgramViolation::PassThroughTwoMemoryNeighbors { vertex: v.clone() });
                }
            }
            VertexKind::Read => {
                if indeg < 2 {
                    out.push(ProgramViolation::WrongInDegree {
                        vertex: v.clone(),
                        expected: "at least 2 (array and indices)".into(),
                        got: indeg,
                    });
                } else if let Some(ranked) = check_ranks(lp, v, inputs, &mut out) {
                    let first = ranked[0];
                    if !kind(first).is_memory() && !matches!(kind(first), VertexKind::PassThrough) {
                        out.push(ProgramViolation::ReadFirstInputInvalid { vertex: v.clone() });
                    }
                    for u in &ranked[1..] {
                        if kind(u).is_memory() {
                            out.push(ProgramViolation::ReadExtraInputFromMemory {
                                vertex: v.clone(),
                                source: (*u).clone(),
                            });
                        }
                    }
                }
                if outdeg != 1 {
                    out.push(ProgramViolation::WrongOutDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: outdeg,
                    });
                } else if kind(outputs[0].1).is_memory() {
                    out.push(ProgramViolation::ReadOutputToMemory { vertex: v.clone() });
                }
            }
            VertexKind::Write => {
                if indeg < 2 {
                    out.push(ProgramViolation::WrongInDegree {
                        vertex: v.clone(),
                        expected: "at least 2 (value and indices)".into(),
                        got: indeg,
                    });
                } else {
                    check_ranks(lp, v, inputs, &mut out);
                }
                for (_, u) in inputs {
                    if kind(u).is_memory() {
                        out.push(ProgramViolation::WriteInputFromMemory {
                            vertex: v.clone(),
                            source: (*u).clone(),
                        });
                    }
                }
                if outdeg != 1 {
                    out.push(ProgramViolation::WrongOutDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: outdeg,
                    });
                } else {
                    let target = kind(outputs[0].1);
                    if !target.is_memory() && !matches!(target, VertexKind::PassThrough) {
                        out.push(ProgramViolation::WriteOutputInvalid { vertex: v.clone() });
                    }
                }
            }
            VertexKind::BinOp(_) => {
                if indeg != 2 {
                    out.push(ProgramViolation::WrongInDegree {
                        vertex: v.clone(),
                        expected: "2".into(),
                        got: indeg,
                    });
                } else {
                    check_ranks(lp, v, inputs, &mut out);
                }
                if outdeg != 1 {
                    out.push(ProgramViolation::WrongOutDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: outdeg,
                    });
                }
                if inputs.iter().chain(outputs.iter()).any(|(_, u)| kind(u).is_memory()) {
                    out.push(ProgramViolation::OperatorTouchesMemory { vertex: v.clone() });
                }
            }
            VertexKind::Const(_) => {
                if indeg != 0 {
                    out.push(ProgramViolation::WrongInDegree {
                        vertex: v.clone(),
                        expected: "0".into(),
                        got: indeg,
                    });
                }
                if outdeg != 1 {
                    out.push(ProgramViolation::WrongOutDegree {
                        vertex: v.clone(),
                        expected: "1".into(),
                        got: outdeg,
                    });
                }
                if outputs.iter().any(|(_, u)| kind(u).is_memory()) {
                    out.push(ProgramViolation::OperatorTouchesMemory { vertex: v.clone() });
                }
            }
        }
    }

    if has_cycle(&lp.pgt) {
        out.push(ProgramViolation::CyclicTemplateGraph);
    }
    out
}

/// Verifies the input ranks of `v` form exactly 0..k-1 and returns the
/// sources in rank order.
fn check_ranks<'a>(
    lp: &LoopProgram,
    v: &VertexId,
    inputs: &[(usize, &'a VertexId)],
    out: &mut Vec<ProgramViolation>,
) -> Option<Vec<&'a VertexId>> {
    let mut by_rank: BTreeMap<u32, &VertexId> = BTreeMap::new();
    for (edge_idx, src) in inputs {
        let Some(rank) = lp.ranks[*edge_idx] else {
            out.push(ProgramViolation::RanksIncomplete {
                vertex: v.clone(),
                reason: format!("edge from `{src}` has no rank"),
            });
            return None;
        };
        if by_rank.insert(rank, src).is_some() {
            out.push(ProgramViolation::RanksIncomplete {
                vertex: v.clone(),
                reason: format!("rank {rank} repeated"),
            });
            return None;
        }
    }
    let expected: Vec<u32> = (0..inputs.len() as u32).collect();
    let got: Vec<u32> = by_rank.keys().copied().collect();
    if got != expected {
        out.push(ProgramViolation::RanksIncomplete {
            vertex: v.clone(),
            reason: format!("ranks {got:?} do not form 0..{}", inputs.len()),
        });
        return None;
    }
    Some(by_rank.into_values().collect())
}

fn has_cycle(pgt: &ParametricGraphTemplate) -> bool {
    let mut indeg: BTreeMap<&VertexId, usize> = pgt.vertices.iter().map(|v| (v, 0)).collect();
    let mut adj: BTreeMap<&VertexId, Vec<&VertexId>> = BTreeMap::new();
    for e in &pgt.edges {
        *indeg.entry(&e.dst).or_insert(0) += 1;
        adj.entry(&e.src).or_default().push(&e.dst);
    }
    let mut queue: Vec<&VertexId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(v, _)| *v).collect();
    let mut seen = 0usize;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &u in adj.get(v).into_iter().flatten() {
            let d = indeg.get_mut(u).expect("edge endpoints validated");
            *d -= 1;
            if *d == 0 {
                queue.push(u);
            }
        }
    }
    seen != pgt.vertices.len()
}

/// Weights for flow-based movement analysis: loop-index edges carry nothing,
/// every other edge moves one unit.
pub fn assign_dataflow_weights(lp: &LoopProgram) -> ParametricGraphTemplate {
    let mut pgt = lp.pgt.clone();
    for e in &mut pgt.edges {
        let from_parfor = matches!(lp.kinds.get(&e.src), Some(VertexKind::Parfor));
        e.weight = if from_parfor { Weight::zero() } else { Weight::from(1) };
    }
    pgt
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowMode {
    All,
    Single { addr_s: InstanceAddress, addr_t: InstanceAddress },
}

/// Upper bound on the data moved between the instances of `s` and of `t`
/// when they execute on different processors.
pub fn data_movement_bound(
    lp: &LoopProgram,
    s: &VertexId,
    t: &VertexId,
    mode: &FlowMode,
) -> Result<Weight> {
    let violations = validate_program(lp);
    if !violations.is_empty() {
        return Err(Error::InvalidProgram(violations));
    }
    let weighted = assign_dataflow_weights(lp);
    let result = match mode {
        FlowMode::All => max_all_st_flow(&weighted, s, t)?,
        FlowMode::Single { addr_s, addr_t } => {
            max_single_st_flow(&weighted, s, addr_s, t, addr_t)?
        }
    };
    Ok(result.value)
}

/// Named input arrays for one execution.
pub type Inputs = BTreeMap<String, ArrayValue>;

pub(crate) fn check_inputs(lp: &LoopProgram, inputs: &Inputs) -> Result<()> {
    let mut expected: BTreeSet<&str> = BTreeSet::new();
    for (v, kind) in &lp.kinds {
        if let VertexKind::InputMem { sizes } = kind {
            expected.insert(v.0.as_str());
            match inputs.get(&v.0) {
                None => {
                    return Err(Error::InputShapeMismatch(format!("missing input array `{v}`")))
                }
                Some(a) if a.sizes != *sizes => {
                    return Err(Error::InputShapeMismatch(format!(
                        "array `{v}` has sizes {:?}, expected {:?}",
                        a.sizes, sizes
                    )))
                }
                Some(a) => {
                    let want: u64 = sizes.iter().product();
                    if a.data.len() as u64 != want {
                        return Err(Error::InputShapeMismatch(format!(
                            "array `{v}` has {} entries, expected {want}",
                            a.data.len()
                        )));
                    }
                }
            }
        }
    }
    for name in inputs.keys() {
        if !expected.contains(name.as_str()) {
            return Err(Error::InputShapeMismatch(format!(
                "`{name}` is not an input array of the program"
            )));
        }
    }
    Ok(())
}
