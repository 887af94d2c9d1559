//! Serial execution of a loop program over its instantiation: pass-through
//! wires collapse into the memory vertices they reach, vertices evaluate in a
//! topological order, and unordered writes to the same array cell are
//! reported as races.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::cmp::Reverse;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::instantiate::{instantiate, ConcreteGraph, ConcreteVertexId};
use crate::template::VertexId;

use super::{
    check_inputs, validate_program, ArrayValue, ExecutionReport, Inputs, LoopProgram, RacePair,
    ReduceOp, UndefinedReason, VertexKind,
};

/// Which canonical topological order drives the serial execution. Race-free
/// programs produce identical outputs under either.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Ready vertices run in ascending id order.
    Canonical,
    /// Ready vertices run in descending id order.
    Alternate,
}

pub fn interpret(lp: &LoopProgram, inputs: &Inputs, limit: &BigUint) -> Result<ExecutionReport> {
    interpret_with_schedule(lp, inputs, limit, Schedule::Canonical)
}

/// Runs the canonical execution and returns the unordered same-cell write
/// pairs it observed.
pub fn detect_races(lp: &LoopProgram, inputs: &Inputs, limit: &BigUint) -> Result<Vec<RacePair>> {
    Ok(interpret(lp, inputs, limit)?.races)
}

struct EvalEdge {
    src_class: usize,
    dst_class: usize,
    rank: Option<u32>,
    src_kind_parfor: bool,
    dst_concrete: usize,
}

pub fn interpret_with_schedule(
    lp: &LoopProgram,
    inputs: &Inputs,
    limit: &BigUint,
    schedule: Schedule,
) -> Result<ExecutionReport> {
    let violations = validate_program(lp);
    if !violations.is_empty() {
        return Err(Error::InvalidProgram(violations));
    }
    check_inputs(lp, inputs)?;
    let concrete = instantiate(&lp.pgt, limit)?;

    let kind_of = |origin: &VertexId| &lp.kinds[origin];
    let index: BTreeMap<&ConcreteVertexId, usize> = concrete
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (&v.id, i))
        .collect();

    // Movement weight: one unit per instantiated edge not fed by a loop index.
    let mut movement = BigUint::zero();
    for e in &concrete.edges {
        let src_origin = &concrete.vertices[index[&e.src]].origin;
        if !matches!(kind_of(src_origin), VertexKind::Parfor) {
            movement += 1u32;
        }
    }

    // Collapse pass-through wires into the memory vertices they touch.
    let mut dsu: Vec<usize> = (0..concrete.vertices.len()).collect();
    fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
        if dsu[x] != x {
            let r = find(dsu, dsu[x]);
            dsu[x] = r;
        }
        dsu[x]
    }
    for e in &concrete.edges {
        let (si, di) = (index[&e.src], index[&e.dst]);
        let sk = kind_of(&concrete.vertices[si].origin);
        let dk = kind_of(&concrete.vertices[di].origin);
        let pt_pair = matches!(sk, VertexKind::PassThrough) && matches!(dk, VertexKind::PassThrough);
        let pt_mem = (matches!(sk, VertexKind::PassThrough) && dk.is_memory())
            || (sk.is_memory() && matches!(dk, VertexKind::PassThrough));
        if pt_pair || pt_mem {
            let (rs, rd) = (find(&mut dsu, si), find(&mut dsu, di));
            if rs != rd {
                dsu[rs] = rd;
            }
        }
    }
    // Per class: the memory member if any, else the smallest member.
    let n = concrete.vertices.len();
    let mut class_rep: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut dsu, i);
        let cur = class_rep.entry(r).or_insert(i);
        let cur_mem = kind_of(&concrete.vertices[*cur].origin).is_memory();
        let new_mem = kind_of(&concrete.vertices[i].origin).is_memory();
        if (new_mem && !cur_mem)
            || (new_mem == cur_mem && concrete.vertices[i].id < concrete.vertices[*cur].id)
        {
            *cur = i;
        }
    }
    let class_of = {
        let mut out = vec![0usize; n];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = class_rep[&find(&mut dsu, i)];
        }
        out
    };

    let mut eval_edges: Vec<EvalEdge> = Vec::new();
    for e in &concrete.edges {
        let (si, di) = (index[&e.src], index[&e.dst]);
        let (cs, cd) = (class_of[si], class_of[di]);
        if cs == cd {
            continue;
        }
        let rank = e.origin.and_then(|idx| lp.ranks[idx]);
        eval_edges.push(EvalEdge {
            src_class: cs,
            dst_class: cd,
            rank,
            src_kind_parfor: matches!(kind_of(&concrete.vertices[si].origin), VertexKind::Parfor),
            dst_concrete: di,
        });
    }

    // Kahn with a deterministic heap over concrete ids.
    let classes: BTreeSet<usize> = class_of.iter().copied().collect();
    let mut indeg: BTreeMap<usize, usize> = classes.iter().map(|&c| (c, 0)).collect();
    let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut incoming: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ee) in eval_edges.iter().enumerate() {
        *indeg.get_mut(&ee.dst_class).expect("class known") += 1;
        outgoing.entry(ee.src_class).or_default().push(i);
        incoming.entry(ee.dst_class).or_default().push(i);
    }

    enum Ready {
        Asc(BinaryHeap<Reverse<(String, usize)>>),
        Desc(BinaryHeap<(String, usize)>),
    }
    impl Ready {
        fn push(&mut self, key: String, c: usize) {
            match self {
                Ready::Asc(h) => h.push(Reverse((key, c))),
                Ready::Desc(h) => h.push((key, c)),
            }
        }
        fn pop(&mut self) -> Option<usize> {
            match self {
                Ready::Asc(h) => h.pop().map(|Reverse((_, c))| c),
                Ready::Desc(h) => h.pop().map(|(_, c)| c),
            }
        }
    }
    let mut ready = match schedule {
        Schedule::Canonical => Ready::Asc(BinaryHeap::new()),
        Schedule::Alternate => Ready::Desc(BinaryHeap::new()),
    };
    for (&c, &d) in &indeg {
        if d == 0 {
            ready.push(concrete.vertices[c].id.0.clone(), c);
        }
    }

    // Array state keyed by memory origin (memory vertices are root-owned and
    // have a single instance).
    let mut arrays: BTreeMap<VertexId, ArrayValue> = BTreeMap::new();
    for (v, kind) in &lp.kinds {
        if let Some(sizes) = kind.sizes() {
            let initial = match inputs.get(&v.0) {
                Some(a) => a.clone(),
                None => ArrayValue::zeros(sizes),
            };
            arrays.insert(v.clone(), initial);
        }
    }

    let mut values: BTreeMap<usize, BigRational> = BTreeMap::new();
    // (write class, array, integral index tuple)
    let mut write_events: Vec<(usize, VertexId, Vec<BigInt>)> = Vec::new();
    let mut undefined: Option<UndefinedReason> = None;

    'eval: while let Some(c) = ready.pop() {
        let origin = &concrete.vertices[c].origin;
        let kind = kind_of(origin);

        // Gather inputs by rank. Values from loop-index vertices are the
        // instance index of the edge's direct target.
        let gather = |values: &BTreeMap<usize, BigRational>| -> Vec<(Option<u32>, usize, Option<BigRational>)> {
            let mut ins: Vec<(Option<u32>, usize, Option<BigRational>)> = incoming
                .get(&c)
                .into_iter()
                .flatten()
                .map(|&iedge| {
                    let ee = &eval_edges[iedge];
                    let val = if ee.src_kind_parfor {
                        let addr = &concrete.vertices[ee.dst_concrete].address;
                        let last = addr.0.last().cloned().unwrap_or_default();
                        Some(BigRational::from_integer(BigInt::from(last)))
                    } else {
                        values.get(&ee.src_class).cloned()
                    };
                    (ee.rank, ee.src_class, val)
                })
                .collect();
            ins.sort_by_key(|(rank, src, _)| (*rank, *src));
            ins
        };

        let halt = |reason: UndefinedReason, undefined: &mut Option<UndefinedReason>| {
            undefined.get_or_insert(reason);
        };

        match kind {
            VertexKind::InputMem { .. } | VertexKind::OutputMem { .. } | VertexKind::TempMem { .. } => {}
            VertexKind::Parfor => {}
            VertexKind::Const(x) => {
                values.insert(c, x.clone());
            }
            VertexKind::Copy | VertexKind::PassThrough => {
                let ins = gather(&values);
                let provided: Vec<&BigRational> = ins.iter().filter_map(|(_, _, v)| v.as_ref()).collect();
                if provided.len() != 1 {
                    halt(
                        UndefinedReason::AmbiguousValue { vertex: concrete.vertices[c].id.clone() },
                        &mut undefined,
                    );
                    break 'eval;
                }
                values.insert(c, provided[0].clone());
            }
            VertexKind::Reduce(op) => {
                let ins = gather(&values);
                let mut acc: Option<BigRational> = None;
                for (_, _, v) in ins {
                    let Some(v) = v else {
                        halt(
                            UndefinedReason::AmbiguousValue { vertex: concrete.vertices[c].id.clone() },
                            &mut undefined,
                        );
                        break 'eval;
                    };
                    acc = Some(match (acc, op) {
                        (None, _) => v,
                        (Some(a), ReduceOp::Add) => a + v,
                        (Some(a), ReduceOp::Mul) => a * v,
                    });
                }
                if let Some(a) = acc {
                    values.insert(c, a);
                }
            }
            VertexKind::BinOp(op) => {
                let ins = gather(&values);
                let (Some(x), Some(y)) = (ins[0].2.clone(), ins[1].2.clone()) else {
                    halt(
                        UndefinedReason::AmbiguousValue { vertex: concrete.vertices[c].id.clone() },
                        &mut undefined,
                    );
                    break 'eval;
                };
                let out = match op {
                    super::BinOp::Add => x + y,
                    super::BinOp::Sub => x - y,
                    super::BinOp::Mul => x * y,
                    super::BinOp::Div => {
                        if y.is_zero() {
                            halt(
                                UndefinedReason::DivisionByZero {
                                    vertex: concrete.vertices[c].id.clone(),
                                },
                                &mut undefined,
                            );
                            break 'eval;
                        }
                        x / y
                    }
                };
                values.insert(c, out);
            }
            VertexKind::Read => {
                let ins = gather(&values);
                // Rank 0 carries the array; the source class must be memory.
                let array_class = ins[0].1;
                let array_origin = concrete.vertices[array_class].origin.clone();
                if !kind_of(&array_origin).is_memory() {
                    halt(
                        UndefinedReason::NoArrayForAccess { vertex: concrete.vertices[c].id.clone() },
                        &mut undefined,
                    );
                    break 'eval;
                }
                match resolve_index(&concrete, c, &array_origin, &arrays, &ins[1..]) {
                    Err(reason) => {
                        halt(reason, &mut undefined);
                        break 'eval;
                    }
                    Ok((flat, _)) => {
                        let value = arrays[&array_origin].data[flat].clone();
                        values.insert(c, value);
                    }
                }
            }
            VertexKind::Write => {
                let ins = gather(&values);
                let Some(x) = ins[0].2.clone() else {
                    halt(
                        UndefinedReason::AmbiguousValue { vertex: concrete.vertices[c].id.clone() },
                        &mut undefined,
                    );
                    break 'eval;
                };
                // The array is whatever the single output edge reaches.
                let out_edges: Vec<usize> = outgoing.get(&c).cloned().unwrap_or_default();
                let target = out_edges
                    .iter()
                    .map(|&i| eval_edges[i].dst_class)
                    .find(|&d| kind_of(&concrete.vertices[d].origin).is_memory());
                let Some(target) = target else {
                    halt(
                        UndefinedReason::NoArrayForAccess { vertex: concrete.vertices[c].id.clone() },
                        &mut undefined,
                    );
                    break 'eval;
                };
                let array_origin = concrete.vertices[target].origin.clone();
                match resolve_index(&concrete, c, &array_origin, &arrays, &ins[1..]) {
                    Err(reason) => {
                        halt(reason, &mut undefined);
                        break 'eval;
                    }
                    Ok((flat, idx)) => {
                        arrays.get_mut(&array_origin).expect("array exists").data[flat] = x.clone();
                        write_events.push((c, array_origin, idx));
                        values.insert(c, x);
                    }
                }
            }
        }

        for &oedge in outgoing.get(&c).into_iter().flatten() {
            let d = eval_edges[oedge].dst_class;
            let slot = indeg.get_mut(&d).expect("class known");
            *slot -= 1;
            if *slot == 0 {
                ready.push(concrete.vertices[d].id.0.clone(), d);
            }
        }
    }

    let races = find_races(&concrete, &eval_edges, &write_events);

    let outputs = if undefined.is_some() {
        None
    } else {
        let mut out = BTreeMap::new();
        for (v, kind) in &lp.kinds {
            if matches!(kind, VertexKind::OutputMem { .. }) {
                out.insert(v.0.clone(), arrays[v].clone());
            }
        }
        Some(out)
    };

    Ok(ExecutionReport {
        outputs,
        races,
        undefined,
        movement_weight_total: movement,
    })
}

type IndexInput = (Option<u32>, usize, Option<BigRational>);

/// Evaluates index inputs into an integral in-bounds tuple.
fn resolve_index(
    concrete: &ConcreteGraph,
    c: usize,
    array: &VertexId,
    arrays: &BTreeMap<VertexId, ArrayValue>,
    index_inputs: &[IndexInput],
) -> std::result::Result<(usize, Vec<BigInt>), UndefinedReason> {
    let slot = &arrays[array];
    if index_inputs.len() != slot.sizes.len() {
        return Err(UndefinedReason::IndexArityMismatch {
            vertex: concrete.vertices[c].id.clone(),
            array: array.clone(),
            expected: slot.sizes.len(),
            got: index_inputs.len(),
        });
    }
    let mut tuple = Vec::with_capacity(index_inputs.len());
    for (_, _, v) in index_inputs {
        let Some(v) = v else {
            return Err(UndefinedReason::AmbiguousValue { vertex: concrete.vertices[c].id.clone() });
        };
        if !v.is_integer() {
            return Err(UndefinedReason::NonIntegralIndex { vertex: concrete.vertices[c].id.clone() });
        }
        tuple.push(v.to_integer());
    }
    let as_u64: Option<Vec<u64>> = tuple
        .iter()
        .map(|i| if i.is_negative() { None } else { i.to_u64() })
        .collect();
    let flat = as_u64.and_then(|idx| slot.flat_index(&idx));
    match flat {
        Some(flat) => Ok((flat, tuple)),
        None => Err(UndefinedReason::OutOfBounds {
            vertex: concrete.vertices[c].id.clone(),
            array: array.clone(),
            index: tuple,
        }),
    }
}

/// Pairs of writes to the same array cell with no directed path between them
/// in the evaluation graph.
fn find_races(
    concrete: &ConcreteGraph,
    eval_edges: &[EvalEdge],
    write_events: &[(usize, VertexId, Vec<BigInt>)],
) -> Vec<RacePair> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for ee in eval_edges {
        adj.entry(ee.src_class).or_default().push(ee.dst_class);
    }
    let writes: BTreeSet<usize> = write_events.iter().map(|(c, _, _)| *c).collect();
    // Reachability restricted to the write vertices: one BFS per write,
    // recording which other writes it reaches.
    let mut reaches: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &w in &writes {
        let mut seen = BTreeSet::new();
        let mut q = VecDeque::new();
        q.push_back(w);
        seen.insert(w);
        let mut hit = BTreeSet::new();
        while let Some(x) = q.pop_front() {
            for &y in adj.get(&x).into_iter().flatten() {
                if seen.insert(y) {
                    if writes.contains(&y) {
                        hit.insert(y);
                    }
                    q.push_back(y);
                }
            }
        }
        reaches.insert(w, hit);
    }

    let mut out = Vec::new();
    for (i, (w1, a1, idx1)) in write_events.iter().enumerate() {
        for (w2, a2, idx2) in write_events.iter().skip(i + 1) {
            if w1 == w2 || a1 != a2 || idx1 != idx2 {
                continue;
            }
            let ordered = reaches[w1].contains(w2) || reaches[w2].contains(w1);
            if !ordered {
                let (first, second) = if concrete.vertices[*w1].id <= concrete.vertices[*w2].id {
                    (*w1, *w2)
                } else {
                    (*w2, *w1)
                };
                out.push(RacePair {
                    array: a1.clone(),
                    index: idx1.clone(),
                    first: concrete.vertices[first].id.clone(),
                    second: concrete.vertices[second].id.clone(),
                });
            }
        }
    }
    out.sort_by(|a, b| (&a.first, &a.second).cmp(&(&b.first, &b.second)));
    out.dedup();
    out
}
