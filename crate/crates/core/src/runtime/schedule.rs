//! Drivers that repeatedly pick one enabled choice until nothing is left.

use std::fmt;
use std::str::FromStr;

use super::cloud::{ClientStatus, CloudConfig, StepChoice};
use super::RuntimeError;
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheduler {
    Seeded(u64),
    /// Rotates through the enabled list by step number.
    RoundRobin,
    /// Rotates over choice categories (client, send, deliver, gc, request)
    /// so every persistently enabled message step is eventually taken.
    DrainFair,
}

impl FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" | "seeded" => Ok(Scheduler::Seeded(0)),
            "round-robin" | "rr" => Ok(Scheduler::RoundRobin),
            "drain-fair" | "fair" => Ok(Scheduler::DrainFair),
            other => Err(format!("unknown scheduler `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    /// No choice enabled and every client finished.
    Quiescent,
    /// No choice enabled but some client is still waiting.
    Deadlock(Vec<String>),
    StepLimit,
    Fault(RuntimeError),
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunOutcome::Quiescent => f.write_str("quiescent"),
            RunOutcome::Deadlock(who) => write!(f, "deadlock ({})", who.join(", ")),
            RunOutcome::StepLimit => f.write_str("step limit"),
            RunOutcome::Fault(e) => write!(f, "fault: {e}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: CloudConfig,
    pub outcome: RunOutcome,
    pub steps: usize,
}

struct Picker {
    sched: Scheduler,
    rng: SplitMix64,
    step: usize,
    category: usize,
    per_category: [usize; StepChoice::CATEGORIES],
}

impl Picker {
    fn new(sched: Scheduler) -> Self {
        let seed = match sched {
            Scheduler::Seeded(s) => s,
            _ => 0,
        };
        Picker {
            sched,
            rng: SplitMix64::new(seed),
            step: 0,
            category: 0,
            per_category: [0; StepChoice::CATEGORIES],
        }
    }

    fn pick(&mut self, enabled: &[StepChoice]) -> StepChoice {
        let i = self.step;
        self.step += 1;
        match self.sched {
            Scheduler::Seeded(_) => enabled[self.rng.below(enabled.len())],
            Scheduler::RoundRobin => enabled[i % enabled.len()],
            Scheduler::DrainFair => {
                for k in 0..StepChoice::CATEGORIES {
                    let cat = (self.category + k) % StepChoice::CATEGORIES;
                    let group: Vec<&StepChoice> =
                        enabled.iter().filter(|c| c.category() == cat).collect();
                    if group.is_empty() {
                        continue;
                    }
                    self.category = (cat + 1) % StepChoice::CATEGORIES;
                    let n = self.per_category[cat];
                    self.per_category[cat] += 1;
                    return *group[n % group.len()];
                }
                unreachable!("enabled list is non-empty")
            }
        }
    }
}

/// Why a configuration with no enabled choice is stuck, if it is.
pub fn waiting_clients(config: &CloudConfig) -> Vec<String> {
    (0..config.clients.len())
        .filter_map(|ci| {
            let id = config.clients[ci].id;
            match config.client_status(ci) {
                ClientStatus::Blocked(x) => Some(format!("client {id} awaits {x}")),
                ClientStatus::Waiting(o) => Some(format!("client {id} reads unknown {o}")),
                _ => None,
            }
        })
        .collect()
}

pub fn first_fault(config: &CloudConfig) -> Option<RuntimeError> {
    config.clients.iter().find_map(|c| c.fault.clone())
}

pub fn run(mut config: CloudConfig, sched: Scheduler, max_steps: usize) -> RunResult {
    let mut picker = Picker::new(sched);
    let mut steps = 0;
    loop {
        if let Some(e) = first_fault(&config) {
            return RunResult {
                config,
                outcome: RunOutcome::Fault(e),
                steps,
            };
        }
        let enabled = config.enabled();
        if enabled.is_empty() {
            let waiting = waiting_clients(&config);
            let outcome = if waiting.is_empty() {
                RunOutcome::Quiescent
            } else {
                RunOutcome::Deadlock(waiting)
            };
            return RunResult {
                config,
                outcome,
                steps,
            };
        }
        if steps >= max_steps {
            return RunResult {
                config,
                outcome: RunOutcome::StepLimit,
                steps,
            };
        }
        let choice = picker.pick(&enabled);
        config.step(choice).expect("enabled choices always apply");
        steps += 1;
    }
}
