//! Reference program constructions: dense matrix multiplication and 1-D
//! cross-correlation as nested parallel loops.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::template::{PgtBuilder, VertexId};
use crate::weight::Weight;

use super::{LoopProgram, ReduceOp, VertexKind};

struct ProgramBuilder {
    b: PgtBuilder,
    kinds: BTreeMap<VertexId, VertexKind>,
    ranks: Vec<Option<u32>>,
}

impl ProgramBuilder {
    fn new() -> Self {
        ProgramBuilder {
            b: PgtBuilder::new("T0"),
            kinds: BTreeMap::new(),
            ranks: Vec::new(),
        }
    }

    fn vertex(
        &mut self,
        id: &str,
        owner: &crate::template::TemplateId,
        kind: VertexKind,
    ) -> VertexId {
        let v = self.b.add_vertex(id, owner).expect("fresh id");
        self.kinds.insert(v.clone(), kind);
        v
    }

    fn edge(&mut self, src: &VertexId, dst: &VertexId, rank: Option<u32>) {
        self.b.add_edge(src, dst, Weight::from(1));
        self.ranks.push(rank);
    }

    fn finish(self) -> LoopProgram {
        LoopProgram {
            pgt: self.b.build(),
            kinds: self.kinds,
            ranks: self.ranks,
        }
    }
}

/// Multiplication of an `n×k` matrix by a `k×m` matrix: two parallel loops
/// over the output coordinates and a reduction over the shared dimension.
pub fn build_matmul(n: u64, k: u64, m: u64) -> Result<LoopProgram> {
    if n == 0 || k == 0 || m == 0 {
        return Err(Error::InputShapeMismatch(
            "matrix dimensions must be positive".into(),
        ));
    }
    let mut p = ProgramBuilder::new();
    let root = p.b.root_id();
    let ti = p.b.add_template("Ti", &root, n).expect("fresh template");
    let tj = p.b.add_template("Tj", &ti, m).expect("fresh template");
    let tk = p.b.add_template("Tk", &tj, k).expect("fresh template");

    let a1 = p.vertex("A1", &root, VertexKind::InputMem { sizes: vec![n, k] });
    let a2 = p.vertex("A2", &root, VertexKind::InputMem { sizes: vec![k, m] });
    let bb = p.vertex("B", &root, VertexKind::OutputMem { sizes: vec![n, m] });
    let pf_i = p.vertex("loop_i", &root, VertexKind::Parfor);

    let ci = p.vertex("i", &ti, VertexKind::Copy);
    let pf_j = p.vertex("loop_j", &ti, VertexKind::Parfor);
    let p1i = p.vertex("a1_wire_i", &ti, VertexKind::PassThrough);
    let p2i = p.vertex("a2_wire_i", &ti, VertexKind::PassThrough);
    let ptb = p.vertex("b_wire_i", &ti, VertexKind::PassThrough);

    let cj = p.vertex("j", &tj, VertexKind::Copy);
    let cij = p.vertex("i_inner", &tj, VertexKind::Copy);
    let pf_k = p.vertex("loop_k", &tj, VertexKind::Parfor);
    let p1j = p.vertex("a1_wire_j", &tj, VertexKind::PassThrough);
    let p2j = p.vertex("a2_wire_j", &tj, VertexKind::PassThrough);
    let red = p.vertex("acc", &tj, VertexKind::Reduce(ReduceOp::Add));
    let wr = p.vertex("store", &tj, VertexKind::Write);

    let ck = p.vertex("kk", &tk, VertexKind::Copy);
    let r1 = p.vertex("load_a1", &tk, VertexKind::Read);
    let r2 = p.vertex("load_a2", &tk, VertexKind::Read);
    let mul = p.vertex("mul", &tk, VertexKind::BinOp(super::BinOp::Mul));

    p.edge(&pf_i, &ci, None);
    p.edge(&pf_j, &cj, None);
    p.edge(&pf_k, &ck, None);
    p.edge(&ci, &cij, None);
    p.edge(&a1, &p1i, None);
    p.edge(&p1i, &p1j, None);
    p.edge(&a2, &p2i, None);
    p.edge(&p2i, &p2j, None);
    p.edge(&p1j, &r1, Some(0));
    p.edge(&cij, &r1, Some(1));
    p.edge(&ck, &r1, Some(2));
    p.edge(&p2j, &r2, Some(0));
    p.edge(&ck, &r2, Some(1));
    p.edge(&cj, &r2, Some(2));
    p.edge(&r1, &mul, Some(0));
    p.edge(&r2, &mul, Some(1));
    p.edge(&mul, &red, None);
    p.edge(&red, &wr, Some(0));
    p.edge(&cij, &wr, Some(1));
    p.edge(&cj, &wr, Some(2));
    p.edge(&wr, &ptb, None);
    p.edge(&ptb, &bb, None);

    Ok(p.finish())
}

/// 1-D cross-correlation of a length-`n` signal with a length-`k` filter:
/// one parallel loop over the `n-k+1` output positions, a reduction over the
/// filter taps.
pub fn build_cross_correlation(n: u64, k: u64) -> Result<LoopProgram> {
    if n == 0 || k == 0 {
        return Err(Error::InputShapeMismatch("array sizes must be positive".into()));
    }
    if k > n {
        return Err(Error::InputShapeMismatch(format!(
            "filter size {k} exceeds signal size {n}"
        )));
    }
    let out_size = n - k + 1;
    let mut p = ProgramBuilder::new();
    let root = p.b.root_id();
    let ti = p.b.add_template("Ti", &root, out_size).expect("fresh template");
    let tj = p.b.add_template("Tj", &ti, k).expect("fresh template");

    let a1 = p.vertex("A1", &root, VertexKind::InputMem { sizes: vec![n] });
    let a2 = p.vertex("A2", &root, VertexKind::InputMem { sizes: vec![k] });
    let bb = p.vertex("B", &root, VertexKind::OutputMem { sizes: vec![out_size] });
    let pf_i = p.vertex("loop_i", &root, VertexKind::Parfor);

    let ci = p.vertex("i", &ti, VertexKind::Copy);
    let pf_j = p.vertex("loop_j", &ti, VertexKind::Parfor);
    let p1 = p.vertex("a1_wire", &ti, VertexKind::PassThrough);
    let p2 = p.vertex("a2_wire", &ti, VertexKind::PassThrough);
    let red = p.vertex("acc", &ti, VertexKind::Reduce(ReduceOp::Add));
    let wr = p.vertex("store", &ti, VertexKind::Write);

    let cj = p.vertex("j", &tj, VertexKind::Copy);
    let add = p.vertex("offset", &tj, VertexKind::BinOp(super::BinOp::Add));
    let r1 = p.vertex("load_a1", &tj, VertexKind::Read);
    let r2 = p.vertex("load_a2", &tj, VertexKind::Read);
    let mul = p.vertex("mul", &tj, VertexKind::BinOp(super::BinOp::Mul));

    p.edge(&pf_i, &ci, None);
    p.edge(&pf_j, &cj, None);
    p.edge(&a1, &p1, None);
    p.edge(&a2, &p2, None);
    p.edge(&ci, &add, Some(0));
    p.edge(&cj, &add, Some(1));
    p.edge(&p1, &r1, Some(0));
    p.edge(&add, &r1, Some(1));
    p.edge(&p2, &r2, Some(0));
    p.edge(&cj, &r2, Some(1));
    p.edge(&r1, &mul, Some(0));
    p.edge(&r2, &mul, Some(1));
    p.edge(&mul, &red, None);
    p.edge(&red, &wr, Some(0));
    p.edge(&ci, &wr, Some(1));
    p.edge(&wr, &bb, None);

    Ok(p.finish())
}
