//! Identical code folding: fingerprints, congruence classes, pairwise
//! comparison and merging.

mod classes;
mod compare;
mod fingerprint;
mod merge;
mod pipeline;

use thiserror::Error;

pub use classes::{
    build_initial_classes, call_vectors, refine_classes, refine_classes_traced, resolve_callee, CallTarget,
    CallVectors, CongruenceClass, SplitEvent,
};
pub use compare::{
    check_operand, check_operand_with, compare_functions, compare_functions_with, AnyDecl, CorrespondenceMap,
    DeclContext, EdgeId, Location, Reason, Verdict,
};
pub use fingerprint::{fingerprint_function, Fingerprint};
pub use merge::{
    apply_merges, plan_merges, thunk_body, FoldReport, FoldedEntry, Mechanism, MergeGroup, MergePlan, Merged,
    BYTES_PER_STATEMENT,
};
pub use pipeline::{equal_groups, fold_module, FoldOptions, FoldResult};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IcfError {
    #[error("function {0} has no body")]
    ExternalFunction(String),
    #[error("inconsistent merge plan: {0}")]
    PlanInconsistent(String),
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
}
