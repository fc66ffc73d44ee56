//! Hypothesis checks, indices and a brute-force oracle for small problems.

pub mod hypotheses;
pub mod index;
pub mod oracle;

pub use hypotheses::{canonical_decomposition, check_m_hypotheses, check_r_hypotheses, HypothesisReport, Violation};
pub use index::{index_at, IndexReport};
pub use oracle::{brute_force_oracle, brute_force_oracle_with, OracleOptions, OracleReport, SearchBox, MAX_ORACLE_DIM};
