//! Succinct representation of hierarchically repeating directed graphs and
//! flow queries answered on the representation itself.
//!
//! A [`ParametricGraphTemplate`] is a directed template graph together with a
//! tree of nested vertex sets (templates), each repeated a parametric number
//! of times by [`instantiate`]. Maximum-flow queries over all instances of a
//! source and sink ([`max_all_st_flow`]) or a single addressed instance of
//! each ([`max_single_st_flow`]) are answered in time polynomial in the
//! template, never materializing the expansion; brute-force counterparts over
//! explicit instantiations serve as verification oracles.
//!
//! The [`loops`] module builds such templates from nested parallel-loop
//! programs and derives data-movement upper bounds from flows.

pub mod document;
pub mod dot;
pub mod error;
pub mod flow;
pub mod instantiate;
pub mod loops;
pub mod template;
pub mod testkit;
pub mod transforms;
pub mod weight;

pub use error::{Error, Result};
pub use flow::{
    brute_force_all_st_flow, brute_force_single_st_flow, max_all_st_flow, max_single_st_flow,
    max_st_flow, FlatGraph, FlowResult,
};
pub use instantiate::{
    contract_infinite_edges, instantiate, instantiation_count, label_isomorphic,
    merge_vertex_instances, ConcreteGraph, ConcreteVertex, ConcreteVertexId,
};
pub use template::{
    Edge, InstanceAddress, ParametricGraphTemplate, PgtBuilder, SiblingSpec, SizeEstimate,
    TemplateId, TemplateNode, VertexId, Violation,
};
pub use transforms::{
    edge_reweight, instance_merge, partial_instantiate_upwards, partial_instantiate_upwards_multi,
    ReweightedGraph,
};
pub use weight::Weight;
