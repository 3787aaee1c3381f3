//! Time profiles: first/last visit ranks recorded during a start-up run,
//! merging of several runs, and start-up-first ordering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratio::Ratio;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("profiles cover different function sets")]
    UniverseMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRecord {
    #[serde(rename = "first")]
    pub first_visit: Option<u64>,
    #[serde(rename = "last")]
    pub last_visit: Option<u64>,
    pub runs: u64,
}

impl VisitRecord {
    /// Distance between first and last visit; small values suggest code
    /// that only runs during start-up.
    pub fn startup_score(&self) -> Option<u64> {
        Some(self.last_visit? - self.first_visit?)
    }
}

/// Dynamic call order of one simulated start-up.
pub type CallTrace = Vec<String>;

/// One name per line; blank lines and `#` comments are ignored.
pub fn parse_trace(text: &str) -> CallTrace {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub entries: BTreeMap<String, VisitRecord>,
    pub function_counter: u64,
}

impl TimeProfile {
    pub fn empty(universe: &[String]) -> Self {
        TimeProfile {
            entries: universe.iter().map(|n| (n.clone(), VisitRecord::default())).collect(),
            function_counter: 0,
        }
    }

    pub fn get(&self, name: &str) -> Option<&VisitRecord> {
        self.entries.get(name)
    }

    pub fn visited(&self) -> usize {
        self.entries.values().filter(|r| r.first_visit.is_some()).count()
    }
}

/// Replay a trace through the time-profiler counter.
pub fn record_run(trace: &[String], universe: &[String]) -> Result<TimeProfile, ProfileError> {
    let mut p = TimeProfile::empty(universe);
    let mut counter = 0u64;
    for name in trace {
        let rec = p.entries.get_mut(name).ok_or_else(|| ProfileError::UnknownFunction(name.clone()))?;
        if rec.first_visit.is_none() {
            rec.first_visit = Some(counter);
            rec.last_visit = Some(counter);
            rec.runs = 1;
            counter += 1;
        } else {
            rec.last_visit = Some(counter);
        }
    }
    p.function_counter = counter;
    Ok(p)
}

fn weighted_mean(parts: [(Option<u64>, u64); 2]) -> Option<Ratio> {
    let mut num = 0u128;
    let mut den = 0u128;
    for (v, w) in parts {
        if let Some(v) = v {
            num += v as u128 * w as u128;
            den += w as u128;
        }
    }
    (den > 0).then(|| Ratio::new(num, den))
}

/// Runs-weighted mean of visit ranks, re-ranked densely by mean first visit
/// (ties by name). A merged last visit becomes the number of functions whose
/// mean first visit precedes the mean last visit, never below the function's
/// own first rank.
pub fn merge_profiles(p: &TimeProfile, q: &TimeProfile) -> Result<TimeProfile, ProfileError> {
    let pk: BTreeSet<&String> = p.entries.keys().collect();
    let qk: BTreeSet<&String> = q.entries.keys().collect();
    if pk != qk {
        return Err(ProfileError::UniverseMismatch);
    }
    struct Mean<'a> {
        name: &'a str,
        first: Ratio,
        last: Ratio,
    }
    let mut means: Vec<Mean> = Vec::new();
    let mut out = TimeProfile::default();
    for (name, a) in &p.entries {
        let b = &q.entries[name];
        let runs = a.runs + b.runs;
        out.entries.insert(name.clone(), VisitRecord { first_visit: None, last_visit: None, runs });
        // A profile with a recorded visit but zero runs still counts once.
        let wa = a.runs.max(a.first_visit.is_some() as u64);
        let wb = b.runs.max(b.first_visit.is_some() as u64);
        let first = weighted_mean([(a.first_visit, wa), (b.first_visit, wb)]);
        let last = weighted_mean([(a.last_visit.or(a.first_visit), wa), (b.last_visit.or(b.first_visit), wb)]);
        if let (Some(first), Some(last)) = (first, last) {
            means.push(Mean { name, first, last });
        }
    }
    means.sort_by(|x, y| x.first.cmp(&y.first).then_with(|| x.name.cmp(y.name)));
    for (rank, m) in means.iter().enumerate() {
        let before = means.partition_point(|o| o.first < m.last);
        let rec = out.entries.get_mut(m.name).expect("name from same universe");
        rec.first_visit = Some(rank as u64);
        rec.last_visit = Some((before as u64).max(rank as u64));
    }
    out.function_counter = means.len() as u64;
    Ok(out)
}

/// Visited functions ascending by first visit, then the rest in declaration
/// order.
pub fn order_functions(p: &TimeProfile, universe: &[String]) -> Vec<String> {
    let mut visited: Vec<(u64, &String)> =
        universe.iter().filter_map(|n| p.get(n).and_then(|r| r.first_visit).map(|f| (f, n))).collect();
    visited.sort();
    let mut out: Vec<String> = visited.into_iter().map(|(_, n)| n.clone()).collect();
    out.extend(universe.iter().filter(|n| p.get(n).and_then(|r| r.first_visit).is_none()).cloned());
    out
}

/// Fill partitions `0..k` with profiled functions in order, `capacity` each;
/// everything else lands in partition `k`.
pub fn partition_functions(
    p: &TimeProfile,
    order: &[String],
    k: usize,
    capacity: usize,
) -> Result<Vec<Vec<String>>, ProfileError> {
    if k == 0 {
        return Err(ProfileError::InvalidArgument("partition count must be at least 1".into()));
    }
    if capacity == 0 {
        return Err(ProfileError::InvalidArgument("partition capacity must be at least 1".into()));
    }
    let mut parts: Vec<Vec<String>> = vec![Vec::new(); k + 1];
    let mut filled = 0usize;
    for name in order {
        let profiled = p.get(name).is_some_and(|r| r.first_visit.is_some());
        if profiled && filled < k * capacity {
            parts[filled / capacity].push(name.clone());
            filled += 1;
        } else {
            parts[k].push(name.clone());
        }
    }
    Ok(parts)
}
