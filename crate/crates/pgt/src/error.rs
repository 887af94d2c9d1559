use num_bigint::BigUint;

use crate::template::{InstanceAddress, TemplateId, VertexId, Violation};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(VertexId),
    #[error("unknown template `{0}`")]
    UnknownTemplate(TemplateId),
    #[error("no vertex with origin `{0}` in the graph")]
    UnknownOrigin(VertexId),
    #[error("instantiation has {vertices} vertices and {edges} edges, exceeding the limit {limit}")]
    SizeLimitExceeded {
        vertices: BigUint,
        edges: BigUint,
        limit: BigUint,
    },
    #[error("template is not valid ({} violations; first: {})", .0.len(), .0[0])]
    InvalidTemplate(Vec<Violation>),
    #[error("source and sink are the same vertex instance")]
    SourceEqualsSink,
    #[error("bad address {address} for vertex `{vertex}`: {reason}")]
    BadAddress {
        vertex: VertexId,
        address: InstanceAddress,
        reason: String,
    },
    #[error("template `{0}` carries sibling edges and cannot be split by partial instantiation")]
    UnsupportedSiblingSplit(TemplateId),
    #[error("vertex `{0}` is an endpoint of a sibling edge and cannot be instance-merged")]
    UnsupportedSiblingMerge(VertexId),
    #[error("relabeling does not cover origin `{0}`")]
    IncompleteMapping(VertexId),
    #[error("input array mismatch: {0}")]
    InputShapeMismatch(String),
    #[error("program is not well-formed ({} violations; first: {})", .0.len(), .0[0])]
    InvalidProgram(Vec<crate::loops::ProgramViolation>),
    #[error("document error: {0}")]
    Document(String),
}
