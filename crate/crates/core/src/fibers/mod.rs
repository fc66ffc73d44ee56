//! Splitting along the ground state, slice inversion, fiber tracing,
//! classification and preimage solving.

pub mod classify;
pub mod problem;
pub mod slice;
pub mod solve;
pub mod split;
pub mod trace;

pub use classify::{classify_fold, classify_fold_with, critical_points_on_fiber, ClassifyOptions, CriticalPoint, FoldClassification, Verdict};
pub use problem::{FoldProblem, Form, LinearPart};
pub use slice::{invert_slice, slice_residual, SliceSolution};
pub use solve::{solve_preimages, solve_preimages_with, PairOrdering, Relation, Solution, SolveOptions, SolveReport};
pub use split::{build_split, SplitSpace};
pub use trace::{fiber_point, trace_fiber, trace_fiber_with, Fiber, FiberPoint, TraceOptions, SLICE_TOL};
