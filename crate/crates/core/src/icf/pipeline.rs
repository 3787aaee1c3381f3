use rayon::prelude::*;

use crate::ir::{FunctionFlags, MiniModule};

use super::{
    apply_merges, build_initial_classes, call_vectors, compare_functions_with, fingerprint_function, plan_merges,
    refine_classes, FoldReport, IcfError, MergePlan,
};

#[derive(Debug, Clone, Copy, Default)]
pub struct FoldOptions {
    /// Worker threads for pairwise comparison; 0 lets rayon decide.
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub module: MiniModule,
    pub report: FoldReport,
    pub plan: MergePlan,
    pub initial_classes: usize,
    pub refined_classes: usize,
}

/// Groups of mutually equal functions, each ascending, ordered by first member.
/// Only groups with at least two members are returned.
pub fn equal_groups(m: &MiniModule, opts: FoldOptions) -> Result<(Vec<Vec<usize>>, usize, usize), IcfError> {
    let mut fps = Vec::new();
    for (i, f) in m.functions.iter().enumerate() {
        if f.is_defined() {
            fps.push((i, fingerprint_function(f)?));
        }
    }
    let initial = build_initial_classes(&fps);
    let refined = refine_classes(&initial, &call_vectors(m));

    let candidates: Vec<&Vec<usize>> = refined.iter().map(|c| &c.members).filter(|c| c.len() > 1).collect();
    let split = |members: &Vec<usize>| -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &f in members {
            let found = groups
                .iter_mut()
                .find(|g| compare_functions_with(&m.functions[g[0]], &m.functions[f], &m.declarations).is_equal());
            match found {
                Some(g) => g.push(f),
                None => groups.push(vec![f]),
            }
        }
        groups
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| IcfError::ThreadPool(e.to_string()))?;
    let per_class: Vec<Vec<Vec<usize>>> = pool.install(|| candidates.par_iter().map(|c| split(c)).collect());
    let mut groups: Vec<Vec<usize>> = per_class.into_iter().flatten().filter(|g| g.len() > 1).collect();
    groups.sort_by_key(|g| g[0]);
    Ok((groups, initial.len(), refined.len()))
}

/// Fingerprint, classify, refine, compare and merge.
pub fn fold_module(m: &MiniModule, opts: FoldOptions) -> Result<FoldResult, IcfError> {
    let (groups, initial_classes, refined_classes) = equal_groups(m, opts)?;
    let flags: Vec<FunctionFlags> = m.functions.iter().map(|f| f.flags).collect();
    let plan = plan_merges(&groups, &flags);
    let (module, report) = apply_merges(m, &plan)?;
    Ok(FoldResult { module, report, plan, initial_classes, refined_classes })
}
