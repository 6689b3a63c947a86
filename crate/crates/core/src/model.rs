//! Dual-criticality sporadic task model.
//!
//! Tasks have implicit deadlines (deadline = period), one of two criticality
//! levels, and a worst-case execution budget per level. The system starts in
//! LO mode and switches to HI mode the instant a HI task executes beyond its
//! LO budget without signalling completion; LO tasks are dropped at that
//! point.

use crate::rat::Rat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Criticality level of a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    #[serde(rename = "LO")]
    Lo,
    #[serde(rename = "HI")]
    Hi,
}

/// A sporadic task with implicit deadline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCTask {
    pub id: String,
    /// Minimum release separation; also the relative deadline.
    #[serde(rename = "T")]
    pub period: Rat,
    #[serde(rename = "chi")]
    pub criticality: Criticality,
    /// LO-mode worst-case execution time.
    #[serde(rename = "CL")]
    pub wcet_lo: Rat,
    /// HI-mode worst-case execution time. Equal to `wcet_lo` for LO tasks.
    #[serde(rename = "CH")]
    pub wcet_hi: Rat,
}

impl MCTask {
    pub fn lo(id: &str, period: Rat, wcet: Rat) -> Self {
        MCTask {
            id: id.to_string(),
            period,
            criticality: Criticality::Lo,
            wcet_lo: wcet.clone(),
            wcet_hi: wcet,
        }
    }

    pub fn hi(id: &str, period: Rat, wcet_lo: Rat, wcet_hi: Rat) -> Self {
        MCTask {
            id: id.to_string(),
            period,
            criticality: Criticality::Hi,
            wcet_lo,
            wcet_hi,
        }
    }

    pub fn is_hi(&self) -> bool {
        self.criticality == Criticality::Hi
    }

    /// LO-mode utilization `C^L / T`.
    pub fn u_lo(&self) -> Rat {
        &self.wcet_lo / &self.period
    }

    /// HI-mode utilization `C^H / T`.
    pub fn u_hi(&self) -> Rat {
        &self.wcet_hi / &self.period
    }
}

/// A task system together with the number of identical processors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSet {
    #[serde(rename = "m")]
    pub processors: u32,
    pub tasks: Vec<MCTask>,
}

/// Normalized system utilizations (each sum already divided by `m`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemUtilization {
    /// LO-mode utilization of LO tasks.
    pub lo_lo: Rat,
    /// LO-mode utilization of HI tasks.
    pub hi_lo: Rat,
    /// HI-mode utilization of HI tasks.
    pub hi_hi: Rat,
}

impl SystemUtilization {
    /// `max(U_H^H, U_H^L + U_L^L)`, the load bound in either mode.
    pub fn u_bound(&self) -> Rat {
        (&self.hi_lo + &self.lo_lo).max(self.hi_hi.clone())
    }
}

/// A single violated model invariant, with the offending task where one exists.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("duplicate task id {0:?}")]
    DuplicateId(String),
    #[error("task {0:?}: nonpositive period")]
    NonPositivePeriod(String),
    #[error("task {0:?}: nonpositive execution time")]
    NonPositiveWcet(String),
    #[error("task {0:?}: C_L > C_H")]
    WcetLoExceedsHi(String),
    #[error("task {0:?}: LO task with C_L != C_H")]
    LoTaskWcetMismatch(String),
    #[error("task {0:?}: u_L > 1")]
    ULoExceedsOne(String),
    #[error("task {0:?}: u_H > 1")]
    UHiExceedsOne(String),
    #[error("no processors")]
    NoProcessors,
}

/// Error carrying every violation found in a task set.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct InvalidTaskSet(pub Vec<Violation>);

impl fmt::Display for InvalidTaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid task set: ")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl TaskSet {
    pub fn new(processors: u32, tasks: Vec<MCTask>) -> Self {
        TaskSet { processors, tasks }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn hi_tasks(&self) -> impl Iterator<Item = &MCTask> {
        self.tasks.iter().filter(|t| t.is_hi())
    }

    pub fn lo_tasks(&self) -> impl Iterator<Item = &MCTask> {
        self.tasks.iter().filter(|t| !t.is_hi())
    }

    pub fn n_hi(&self) -> usize {
        self.hi_tasks().count()
    }

    pub fn task(&self, id: &str) -> Option<&MCTask> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Every violated invariant, in task order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.processors == 0 {
            out.push(Violation::NoProcessors);
        }
        let mut seen = BTreeSet::new();
        for t in &self.tasks {
            if !seen.insert(t.id.clone()) {
                out.push(Violation::DuplicateId(t.id.clone()));
            }
            if !t.period.is_positive() {
                out.push(Violation::NonPositivePeriod(t.id.clone()));
                continue; // utilizations are undefined
            }
            if !t.wcet_lo.is_positive() || !t.wcet_hi.is_positive() {
                out.push(Violation::NonPositiveWcet(t.id.clone()));
                continue;
            }
            if t.wcet_lo > t.wcet_hi {
                out.push(Violation::WcetLoExceedsHi(t.id.clone()));
            }
            if !t.is_hi() && t.wcet_lo != t.wcet_hi {
                out.push(Violation::LoTaskWcetMismatch(t.id.clone()));
            }
            if t.u_lo() > Rat::one() {
                out.push(Violation::ULoExceedsOne(t.id.clone()));
            }
            if t.u_hi() > Rat::one() {
                out.push(Violation::UHiExceedsOne(t.id.clone()));
            }
        }
        out
    }

    pub fn validated(self) -> Result<Self, InvalidTaskSet> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(InvalidTaskSet(violations))
        }
    }

    /// Normalized utilization sums `(U_L^L, U_H^L, U_H^H)`.
    pub fn system_utilizations(&self) -> SystemUtilization {
        let m = Rat::from(self.processors);
        let lo_lo: Rat = self.lo_tasks().map(|t| t.u_lo()).sum();
        let hi_lo: Rat = self.hi_tasks().map(|t| t.u_lo()).sum();
        let hi_hi: Rat = self.hi_tasks().map(|t| t.u_hi()).sum();
        SystemUtilization {
            lo_lo: lo_lo / &m,
            hi_lo: hi_lo / &m,
            hi_hi: hi_hi / &m,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task set serializes")
    }

    /// Parse and validate a task-set file. Unknown keys are rejected.
    pub fn from_json(s: &str) -> Result<Self, TaskSetFileError> {
        let ts: TaskSet = serde_json::from_str(s)?;
        ts.validated().map_err(TaskSetFileError::Invalid)
    }
}

/// Error loading a task-set file.
#[derive(Debug, thiserror::Error)]
pub enum TaskSetFileError {
    #[error("malformed task set file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(InvalidTaskSet),
}
