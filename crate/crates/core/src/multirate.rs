//! Multi-rate fluid model and its sufficient schedulability test.
//!
//! After the mode switch the transition period is partitioned into `n_H`
//! windows of fixed duration; each HI task gets one rate per window plus a
//! stable rate used after the transition period. The test combines the
//! LO-mode conditions, per-window and stable platform feasibility, the
//! carry-over budget conditions, and the transition-job conditions. Setting
//! all window durations to zero and all window rates to the stable rate
//! recovers the dual-rate model exactly: [`embed_dual_rate`] of an
//! assignment passes this test if and only if the dual-rate test accepts
//! the original.

use crate::dualrate::{CoverageError, DualRateAssignment};
use crate::model::{MCTask, TaskSet};
use crate::rat::Rat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// LO rates, `n_H` transition windows with per-task per-window rates, and
/// stable HI rates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiRateAssignment {
    #[serde(rename = "thetaL")]
    pub theta_lo: BTreeMap<String, Rat>,
    /// Window durations, in order; zero-width windows are legal.
    pub windows: Vec<Rat>,
    /// Per HI task: one rate per transition window, in `[0, 1]`.
    #[serde(rename = "thetaTrans")]
    pub theta_trans: BTreeMap<String, Vec<Rat>>,
    #[serde(rename = "thetaH")]
    pub theta_hi: BTreeMap<String, Rat>,
}

/// Earliest completion window index per HI task, in `[1, n_H + 1]`.
///
/// Index `n_H + 1` means the earliest possible carry-over deadline falls
/// past the end of the transition period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletionIndex {
    pub k: BTreeMap<String, usize>,
}

/// Conditions of the sufficient test, named by what they guard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    /// Per task: `theta^L >= u^L`.
    LoTaskRate,
    /// `sum theta^L <= m`.
    LoPlatform,
    /// Per window: `sum theta^H_{i,j} <= m` (1-based window index).
    TransitionPlatform(usize),
    /// `sum theta^H <= m`.
    StablePlatform,
    /// Carry-over budget through window `k_i` covers `C^H - C^L`.
    CarryOverBudget,
    /// `theta^L <= theta^H_{i,j}` for windows at or after `k_i`.
    CarryOverWindowRateFloor(usize),
    /// `theta^L <= theta^H`.
    CarryOverStableRateFloor,
    /// Average rate before `k_i` is at least `u^H`.
    EarlyTransitionDemand,
    /// Rates are non-decreasing across the windows before `k_i`.
    TransitionMonotonicity(usize),
    /// `theta^H_{i,j} >= u^H` for windows at or after `k_i`.
    LateTransitionRateFloor(usize),
    /// `theta^H >= u^H`.
    StableRateFloor,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::LoTaskRate => write!(f, "LO task rate below u^L"),
            Condition::LoPlatform => write!(f, "LO rates exceed platform"),
            Condition::TransitionPlatform(j) => {
                write!(f, "window {j} rates exceed platform")
            }
            Condition::StablePlatform => write!(f, "stable rates exceed platform"),
            Condition::CarryOverBudget => write!(f, "carry-over budget short"),
            Condition::CarryOverWindowRateFloor(j) => {
                write!(f, "window {j} rate below theta^L")
            }
            Condition::CarryOverStableRateFloor => write!(f, "stable rate below theta^L"),
            Condition::EarlyTransitionDemand => write!(f, "early-transition demand short"),
            Condition::TransitionMonotonicity(j) => {
                write!(f, "window {j} rate decreases inside prefix")
            }
            Condition::LateTransitionRateFloor(j) => {
                write!(f, "window {j} rate below u^H")
            }
            Condition::StableRateFloor => write!(f, "stable rate below u^H"),
        }
    }
}

/// Outcome of [`multi_rate_test`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MultiRateVerdict {
    Schedulable,
    Failed {
        condition: Condition,
        task: Option<String>,
    },
}

impl MultiRateVerdict {
    pub fn is_schedulable(&self) -> bool {
        matches!(self, MultiRateVerdict::Schedulable)
    }
}

/// The remaining time to a carry-over deadline is not positive: the LO rate
/// leaves no HI-mode time at all (`theta^L` strictly below `u^L`).
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("task {task:?}: no remaining time before the carry-over deadline (T - C^L/theta^L = {remaining})")]
pub struct NoRemainingTime {
    pub task: String,
    pub remaining: Rat,
}

impl MultiRateAssignment {
    pub fn check_coverage(&self, ts: &TaskSet) -> Result<(), CoverageError> {
        let n_hi = ts.n_hi();
        if self.windows.len() != n_hi {
            return Err(CoverageError::UnknownTask(format!(
                "expected {n_hi} windows, got {}",
                self.windows.len()
            )));
        }
        for t in &ts.tasks {
            if !self.theta_lo.contains_key(&t.id) {
                return Err(CoverageError::MissingLoRate(t.id.clone()));
            }
            if t.is_hi() {
                match self.theta_trans.get(&t.id) {
                    Some(row) if row.len() == n_hi => {}
                    _ => return Err(CoverageError::MissingHiRate(t.id.clone())),
                }
                if !self.theta_hi.contains_key(&t.id) {
                    return Err(CoverageError::MissingHiRate(t.id.clone()));
                }
            }
        }
        for id in self.theta_lo.keys() {
            if ts.task(id).is_none() {
                return Err(CoverageError::UnknownTask(id.clone()));
            }
        }
        for id in self.theta_trans.keys().chain(self.theta_hi.keys()) {
            if !ts.task(id).is_some_and(|t| t.is_hi()) {
                return Err(CoverageError::UnknownTask(id.clone()));
            }
        }
        for (id, r) in &self.theta_lo {
            if !r.is_positive() || *r > Rat::one() {
                return Err(CoverageError::RateOutOfRange(id.clone()));
            }
        }
        for (id, r) in &self.theta_hi {
            if !r.is_positive() || *r > Rat::one() {
                return Err(CoverageError::RateOutOfRange(id.clone()));
            }
        }
        for (id, row) in &self.theta_trans {
            if row.iter().any(|r| r.is_negative() || *r > Rat::one()) {
                return Err(CoverageError::RateOutOfRange(id.clone()));
            }
        }
        if self.windows.iter().any(|w| w.is_negative()) {
            return Err(CoverageError::RateOutOfRange("window".into()));
        }
        Ok(())
    }

    /// Total transition-period length.
    pub fn window_sum(&self) -> Rat {
        self.windows.iter().sum()
    }

    pub fn lo_rate_sum(&self) -> Rat {
        self.theta_lo.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assignment serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Earliest completion window of a carry-over job (1-based).
///
/// With `rem = T - C^L/theta^L`, this is the window whose end first reaches
/// `rem`: the unique `k` with `sum_{j<k} w_j < rem <= sum_{j<=k} w_j`, or
/// `n_H + 1` when the whole transition period ends before `rem`. A job
/// completing exactly at the mode switch (`rem = 0`, i.e.
/// `theta^L = u^L`) is assigned window 1 with an empty prefix, which makes
/// the carry-over budget condition degenerate to `C^H <= C^L`.
pub fn earliest_completion_window(
    task: &MCTask,
    theta_lo: &Rat,
    windows: &[Rat],
) -> Result<usize, NoRemainingTime> {
    let rem = &task.period - &(&task.wcet_lo / theta_lo);
    if rem.is_negative() {
        return Err(NoRemainingTime {
            task: task.id.clone(),
            remaining: rem,
        });
    }
    if rem.is_zero() {
        return Ok(1);
    }
    let mut prefix = Rat::zero();
    for (idx, w) in windows.iter().enumerate() {
        let next = &prefix + w;
        if prefix < rem && next >= rem {
            return Ok(idx + 1);
        }
        prefix = next;
    }
    Ok(windows.len() + 1)
}

/// Compute every HI task's completion window for an assignment.
pub fn completion_indices(
    ts: &TaskSet,
    a: &MultiRateAssignment,
) -> Result<CompletionIndex, NoRemainingTime> {
    let mut k = BTreeMap::new();
    for t in ts.hi_tasks() {
        k.insert(
            t.id.clone(),
            earliest_completion_window(t, &a.theta_lo[&t.id], &a.windows)?,
        );
    }
    Ok(CompletionIndex { k })
}

/// Carry-over budget conditions for one HI task at completion window `k`.
///
/// Checks, in order: the budget inequality (prefix execution plus the rate
/// in the completion window covers `C^H - C^L` by the earliest deadline),
/// and the `theta^L` floors on the rates from window `k` on and on the
/// stable rate.
pub fn carry_over_test(
    task: &MCTask,
    a: &MultiRateAssignment,
    k: usize,
) -> Result<(), Condition> {
    let n_h = a.windows.len();
    let theta_lo = &a.theta_lo[&task.id];
    let rates = &a.theta_trans[&task.id];
    let stable = &a.theta_hi[&task.id];

    let rem = &task.period - &(&task.wcet_lo / theta_lo);
    let prefix_len: Rat = a.windows[..k - 1].iter().sum();
    let prefix_exec: Rat = rates[..k - 1]
        .iter()
        .zip(&a.windows[..k - 1])
        .map(|(r, w)| r * w)
        .sum();
    let closing_rate = if k <= n_h { &rates[k - 1] } else { stable };
    let lhs = &prefix_exec + &(closing_rate * &(&rem - &prefix_len));
    if lhs < &task.wcet_hi - &task.wcet_lo {
        return Err(Condition::CarryOverBudget);
    }
    for j in k..=n_h {
        if &rates[j - 1] < theta_lo {
            return Err(Condition::CarryOverWindowRateFloor(j));
        }
    }
    if stable < theta_lo {
        return Err(Condition::CarryOverStableRateFloor);
    }
    Ok(())
}

/// Transition- and stable-job conditions for one HI task at completion
/// window `k`.
///
/// Checks, in order: the prefix demand average (execution across the
/// windows before `k` is at least `u^H` of their span), monotonicity of
/// the rates within that prefix, the `u^H` floor on rates from window `k`
/// on, and the `u^H` floor on the stable rate.
pub fn transition_and_stable_test(
    task: &MCTask,
    a: &MultiRateAssignment,
    k: usize,
) -> Result<(), Condition> {
    let n_h = a.windows.len();
    let rates = &a.theta_trans[&task.id];
    let u_hi = task.u_hi();

    let prefix_len: Rat = a.windows[..k - 1].iter().sum();
    let prefix_exec: Rat = rates[..k - 1]
        .iter()
        .zip(&a.windows[..k - 1])
        .map(|(r, w)| r * w)
        .sum();
    if prefix_exec < &u_hi * &prefix_len {
        return Err(Condition::EarlyTransitionDemand);
    }
    // Non-decreasing rates inside the prefix (windows 1..k-1). The pair
    // crossing into window k is not constrained; with k = n_H + 1 there is
    // no window k at all.
    for j in 1..k.saturating_sub(1) {
        if rates[j - 1] > rates[j] {
            return Err(Condition::TransitionMonotonicity(j));
        }
    }
    for j in k..=n_h {
        if rates[j - 1] < u_hi {
            return Err(Condition::LateTransitionRateFloor(j));
        }
    }
    if a.theta_hi[&task.id] < u_hi {
        return Err(Condition::StableRateFloor);
    }
    Ok(())
}

/// Sufficient schedulability test for the multi-rate model.
///
/// Completion windows are always recomputed from the assignment itself;
/// indices a solver may have assumed internally are never trusted. On
/// failure the verdict names the first violated condition in the order:
/// LO task rates, LO platform, HI platform (per window, then stable),
/// carry-over conditions per task, transition conditions per task.
pub fn multi_rate_test(
    ts: &TaskSet,
    a: &MultiRateAssignment,
) -> Result<MultiRateVerdict, CoverageError> {
    multi_rate_conditions(ts, a, false)
}

/// The test body, with the LO platform bound optionally skipped.
///
/// The assignment search validates candidates against everything except
/// that bound, which its caller checks separately over the full task set.
pub(crate) fn multi_rate_conditions(
    ts: &TaskSet,
    a: &MultiRateAssignment,
    skip_lo_platform: bool,
) -> Result<MultiRateVerdict, CoverageError> {
    a.check_coverage(ts)?;
    let failed = |condition, task: Option<&str>| {
        Ok(MultiRateVerdict::Failed {
            condition,
            task: task.map(str::to_string),
        })
    };

    for t in &ts.tasks {
        if a.theta_lo[&t.id] < t.u_lo() {
            return failed(Condition::LoTaskRate, Some(&t.id));
        }
    }
    let m = Rat::from(ts.processors);
    if !skip_lo_platform && a.lo_rate_sum() > m {
        return failed(Condition::LoPlatform, None);
    }
    for (idx, _) in a.windows.iter().enumerate() {
        let sum: Rat = ts.hi_tasks().map(|t| a.theta_trans[&t.id][idx].clone()).sum();
        if sum > m {
            return failed(Condition::TransitionPlatform(idx + 1), None);
        }
    }
    let stable_sum: Rat = ts.hi_tasks().map(|t| a.theta_hi[&t.id].clone()).sum();
    if stable_sum > m {
        return failed(Condition::StablePlatform, None);
    }

    // theta^L >= u^L has been established, so the remaining time is
    // non-negative for every HI task and completion windows exist.
    let ki = match completion_indices(ts, a) {
        Ok(ki) => ki,
        Err(e) => return failed(Condition::LoTaskRate, Some(&e.task)),
    };
    for t in ts.hi_tasks() {
        if let Err(c) = carry_over_test(t, a, ki.k[&t.id]) {
            return failed(c, Some(&t.id));
        }
    }
    for t in ts.hi_tasks() {
        if let Err(c) = transition_and_stable_test(t, a, ki.k[&t.id]) {
            return failed(c, Some(&t.id));
        }
    }
    Ok(MultiRateVerdict::Schedulable)
}

/// Express a dual-rate assignment in the multi-rate model: all windows have
/// zero width and every window rate equals the stable rate.
pub fn embed_dual_rate(ts: &TaskSet, d: &DualRateAssignment) -> MultiRateAssignment {
    let n_hi = ts.n_hi();
    MultiRateAssignment {
        theta_lo: d.theta_lo.clone(),
        windows: vec![Rat::zero(); n_hi],
        theta_trans: ts
            .hi_tasks()
            .map(|t| (t.id.clone(), vec![d.theta_hi[&t.id].clone(); n_hi]))
            .collect(),
        theta_hi: d.theta_hi.clone(),
    }
}
