use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: need at least 3 points, got {0}")]
    InvalidGrid(usize),
    #[error("shape mismatch: expected length {expected}, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("operator is not hermitian in the weighted product (defect {0:e})")]
    InvalidOperator(f64),
    #[error("operator is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("eigenvalue {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error("density must be positive; node {node} has {value:e}")]
    InvalidDensity { node: usize, value: f64 },
    #[error("infeasible constraints: compatibility gap {gap:e} at node {node}")]
    Infeasible { node: usize, gap: f64 },
    #[error("degenerate Volterra kernel at node {node}: diagonal factor {factor:e}")]
    DegenerateKernel { node: usize, factor: f64 },
    #[error("k - |grad sqrt n|^2 is below the floor at {} node(s), first at {}", .nodes.len(), .nodes[0])]
    AssumptionViolated { nodes: Vec<usize> },
    #[error("regularization parameter must lie in (0, 1], got {0}")]
    InvalidEta(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid option: {0}")]
    InvalidOption(&'static str),
}
