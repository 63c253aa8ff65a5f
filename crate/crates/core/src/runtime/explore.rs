//! Exhaustive depth-bounded enumeration of interleavings.
//!
//! States are deduplicated on their fingerprint. When histories matter the
//! key also includes a hash of the non-ε actions taken so far, so two paths
//! are merged only if they produced the same history in the same order.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use super::cloud::{ClientStatus, CloudConfig};
use super::wf::check_wf;
use super::RuntimeError;

pub const DEFAULT_MAX_STATES: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    pub depth: usize,
    pub check_wf: bool,
    pub check_progress: bool,
    /// Keep paths apart when their histories differ.
    pub distinguish_histories: bool,
    pub max_states: usize,
}

impl ExploreOptions {
    /// `max_states` comes from `CTRD_MAX_STATES` when set.
    pub fn new(depth: usize) -> Self {
        let max_states = std::env::var("CTRD_MAX_STATES")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(DEFAULT_MAX_STATES);
        ExploreOptions {
            depth,
            check_wf: false,
            check_progress: false,
            distinguish_histories: false,
            max_states,
        }
    }

    pub fn with_checks(mut self) -> Self {
        self.check_wf = true;
        self.check_progress = true;
        self
    }

    pub fn with_histories(mut self) -> Self {
        self.distinguish_histories = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafKind {
    /// Nothing enabled, every client done (or faulted).
    Quiescent,
    /// Nothing enabled, some client blocked.
    Deadlock,
    /// Depth bound reached with steps still enabled.
    Bound,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExploreStats {
    pub states: usize,
    pub leaves: usize,
    pub quiescent_leaves: usize,
    pub bound_leaves: usize,
    pub deadlock_leaves: usize,
    pub wf_violations: Vec<String>,
    pub progress_violations: Vec<String>,
    pub duplicated_faults: usize,
    pub blocked_states: usize,
}

impl ExploreStats {
    pub fn is_clean(&self) -> bool {
        self.wf_violations.is_empty() && self.progress_violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("StateSpaceLimit: more than {0} states")]
    StateSpaceLimit(usize),
}

fn progress_check(config: &CloudConfig, stats: &mut ExploreStats, depth: usize) {
    let enabled_any = !config.enabled().is_empty();
    let mut blocked = false;
    for ci in 0..config.clients.len() {
        let id = config.clients[ci].id;
        match config.client_status(ci) {
            ClientStatus::Faulted(RuntimeError::DuplicatedIdentifier(_)) => {
                stats.duplicated_faults += 1
            }
            ClientStatus::Faulted(e) => stats
                .progress_violations
                .push(format!("depth {depth}: client {id} stuck: {e}")),
            ClientStatus::Waiting(o) => stats.progress_violations.push(format!(
                "depth {depth}: client {id} reads {o}, held by no replica"
            )),
            ClientStatus::Blocked(_) => blocked = true,
            ClientStatus::Running | ClientStatus::Done => {}
        }
    }
    if blocked {
        stats.blocked_states += 1;
    }
    if !enabled_any {
        let running: Vec<_> = (0..config.clients.len())
            .filter(|ci| config.client_status(*ci) == ClientStatus::Running)
            .collect();
        if !running.is_empty() {
            stats.progress_violations.push(format!(
                "depth {depth}: running clients {running:?} have no enabled step"
            ));
        }
    }
}

struct Explorer<'a> {
    opts: &'a ExploreOptions,
    visited: HashMap<(u128, u64), usize>,
    stats: ExploreStats,
    visit: &'a mut dyn FnMut(&CloudConfig, LeafKind),
}

impl Explorer<'_> {
    fn dfs(
        &mut self,
        config: &CloudConfig,
        depth: usize,
        history: u64,
    ) -> Result<(), ExploreError> {
        let key = (
            config.fingerprint(),
            if self.opts.distinguish_histories {
                history
            } else {
                0
            },
        );
        match self.visited.get(&key) {
            Some(d) if *d <= depth => return Ok(()),
            _ => {}
        }
        self.visited.insert(key, depth);
        self.stats.states += 1;
        if self.stats.states > self.opts.max_states {
            return Err(ExploreError::StateSpaceLimit(self.opts.max_states));
        }
        if self.opts.check_wf {
            for v in check_wf(config) {
                self.stats.wf_violations.push(format!("depth {depth}: {v}"));
            }
        }
        if self.opts.check_progress {
            progress_check(config, &mut self.stats, depth);
        }

        let enabled = config.enabled();
        if enabled.is_empty() || depth >= self.opts.depth {
            let kind = if !enabled.is_empty() {
                self.stats.bound_leaves += 1;
                LeafKind::Bound
            } else if config
                .clients
                .iter()
                .enumerate()
                .any(|(ci, _)| matches!(config.client_status(ci), ClientStatus::Blocked(_)))
            {
                self.stats.deadlock_leaves += 1;
                LeafKind::Deadlock
            } else {
                self.stats.quiescent_leaves += 1;
                LeafKind::Quiescent
            };
            self.stats.leaves += 1;
            (self.visit)(config, kind);
            return Ok(());
        }

        for choice in enabled {
            let mut next = config.clone();
            let entry = next.step(choice).expect("enabled choices always apply");
            let mut h = history;
            if !entry.action.is_eps() || entry.rule == "STUCK" {
                let mut hasher = DefaultHasher::new();
                history.hash(&mut hasher);
                (
                    entry.rule,
                    entry.client,
                    entry.server,
                    &entry.action,
                    &entry.result,
                )
                    .hash(&mut hasher);
                h = hasher.finish();
            }
            self.dfs(&next, depth + 1, h)?;
        }
        Ok(())
    }
}

/// Runs a depth-first search from `config`, calling `visit` on every leaf.
pub fn explore(
    config: &CloudConfig,
    opts: &ExploreOptions,
    visit: &mut dyn FnMut(&CloudConfig, LeafKind),
) -> Result<ExploreStats, ExploreError> {
    let mut ex = Explorer {
        opts,
        visited: HashMap::new(),
        stats: ExploreStats::default(),
        visit,
    };
    ex.dfs(config, 0, 0)?;
    Ok(ex.stats)
}
