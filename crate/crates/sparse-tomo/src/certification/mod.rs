//! Numerical certificates for the structural hypotheses of the recovery guarantees: the Gram
//! matrix and its square root, quasi-diagonalization constants, coherence, restricted isometry
//! constants, null space witnesses and sample-complexity bounds.

pub mod complexity;
pub mod gram;
pub mod rip;

pub use complexity::{sample_complexity, ComplexityInputs, ComplexityVariant, SampleComplexity};
pub use gram::{
    compute_gram, default_gram_resolution, estimate_quasi_diag, tail_operator_norm, truncation_residual,
    uniform_bound, Coherence, GramCertificate, QuasiDiag, TruncationReport,
};
pub use rip::{rnsp_search, RipEstimate, RipMethod, RipProblem, RnspReport, ENUMERATION_LIMIT};
