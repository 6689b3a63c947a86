//! Dual-rate fluid model: exact schedulability test and optimal rate
//! assignment.
//!
//! Every task runs at a single rate `theta^L` in LO mode; each HI task
//! switches to a single rate `theta^H` after the mode switch. The test is
//! exact (necessary and sufficient) for this model. The assigner is
//! dual-rate optimal: whenever any rate vector satisfies the five test
//! conditions, it finds one.

use crate::model::TaskSet;
use crate::rat::{Rat, Round};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// One LO rate per task, one HI rate per HI task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualRateAssignment {
    #[serde(rename = "thetaL")]
    pub theta_lo: BTreeMap<String, Rat>,
    #[serde(rename = "thetaH")]
    pub theta_hi: BTreeMap<String, Rat>,
}

/// The five conditions of the exact dual-rate test, in check order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualRateEq {
    /// (1) per task: `theta^L >= u^L`
    LoTaskRate,
    /// (2) per HI task: `u^L/theta^L + (u^H - u^L)/theta^H <= 1`
    HiCarryOver,
    /// (3) per HI task: `theta^H >= theta^L`
    HiRateOrder,
    /// (4) `sum theta^L <= m`
    LoPlatform,
    /// (5) `sum theta^H <= m`
    HiPlatform,
}

impl fmt::Display for DualRateEq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            DualRateEq::LoTaskRate => 1,
            DualRateEq::HiCarryOver => 2,
            DualRateEq::HiRateOrder => 3,
            DualRateEq::LoPlatform => 4,
            DualRateEq::HiPlatform => 5,
        };
        write!(f, "Eq({n})")
    }
}

/// Outcome of [`dual_rate_test`]: the first violated condition, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DualRateVerdict {
    Schedulable,
    Failed {
        eq: DualRateEq,
        task: Option<String>,
    },
}

impl DualRateVerdict {
    pub fn is_schedulable(&self) -> bool {
        matches!(self, DualRateVerdict::Schedulable)
    }
}

/// Mismatch between an assignment and the task set it is checked against.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CoverageError {
    #[error("no LO rate for task {0:?}")]
    MissingLoRate(String),
    #[error("no HI rate for HI task {0:?}")]
    MissingHiRate(String),
    #[error("rate given for unknown or non-HI task {0:?}")]
    UnknownTask(String),
    #[error("task {0:?}: rate outside (0, 1]")]
    RateOutOfRange(String),
}

impl DualRateAssignment {
    /// Check that the assignment covers exactly the tasks of `ts` and all
    /// rates lie in `(0, 1]`.
    pub fn check_coverage(&self, ts: &TaskSet) -> Result<(), CoverageError> {
        for t in &ts.tasks {
            if !self.theta_lo.contains_key(&t.id) {
                return Err(CoverageError::MissingLoRate(t.id.clone()));
            }
            if t.is_hi() && !self.theta_hi.contains_key(&t.id) {
                return Err(CoverageError::MissingHiRate(t.id.clone()));
            }
        }
        for id in self.theta_lo.keys() {
            if ts.task(id).is_none() {
                return Err(CoverageError::UnknownTask(id.clone()));
            }
        }
        for id in self.theta_hi.keys() {
            if !ts.task(id).is_some_and(|t| t.is_hi()) {
                return Err(CoverageError::UnknownTask(id.clone()));
            }
        }
        let in_range = |r: &Rat| r.is_positive() && *r <= Rat::one();
        for (id, r) in self.theta_lo.iter().chain(self.theta_hi.iter()) {
            if !in_range(r) {
                return Err(CoverageError::RateOutOfRange(id.clone()));
            }
        }
        Ok(())
    }

    pub fn lo_rate_sum(&self) -> Rat {
        self.theta_lo.values().sum()
    }

    pub fn hi_rate_sum(&self) -> Rat {
        self.theta_hi.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assignment serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Exact dual-rate schedulability test.
///
/// Returns the first violated condition in the order (1)..(5), with the
/// offending task for the per-task conditions.
pub fn dual_rate_test(
    ts: &TaskSet,
    a: &DualRateAssignment,
) -> Result<DualRateVerdict, CoverageError> {
    a.check_coverage(ts)?;
    let failed = |eq, task: Option<&str>| {
        Ok(DualRateVerdict::Failed {
            eq,
            task: task.map(str::to_string),
        })
    };

    for t in &ts.tasks {
        if a.theta_lo[&t.id] < t.u_lo() {
            return failed(DualRateEq::LoTaskRate, Some(&t.id));
        }
    }
    for t in ts.hi_tasks() {
        let th_lo = &a.theta_lo[&t.id];
        let th_hi = &a.theta_hi[&t.id];
        let lhs = t.u_lo() / th_lo + (t.u_hi() - t.u_lo()) / th_hi;
        if lhs > Rat::one() {
            return failed(DualRateEq::HiCarryOver, Some(&t.id));
        }
    }
    for t in ts.hi_tasks() {
        if a.theta_hi[&t.id] < a.theta_lo[&t.id] {
            return failed(DualRateEq::HiRateOrder, Some(&t.id));
        }
    }
    let m = Rat::from(ts.processors);
    if a.lo_rate_sum() > m {
        return failed(DualRateEq::LoPlatform, None);
    }
    if a.hi_rate_sum() > m {
        return failed(DualRateEq::HiPlatform, None);
    }
    Ok(DualRateVerdict::Schedulable)
}

/// Minimal LO rate compatible with condition (2) for a given HI rate:
/// `theta^L = u^L theta^H / (theta^H - (u^H - u^L))`.
///
/// Defined for `theta^H > u^H - u^L`, which holds whenever
/// `theta^H >= u^H` and `u^L > 0`. Conditions (1) and (3) hold
/// automatically at this boundary.
fn lo_rate_at_boundary(u_lo: &Rat, u_hi: &Rat, theta_hi: &Rat) -> Rat {
    let gap = u_hi - u_lo;
    u_lo * theta_hi / (theta_hi - gap)
}

/// Dual-rate optimal rate assignment.
///
/// LO tasks receive `theta^L = u^L`. HI rates are chosen by water-filling
/// on the HI platform budget: eliminating `theta^L` through the condition
/// (2) boundary leaves a separable convex objective in the HI rates, whose
/// minimizer equalizes marginal gains. The float search runs to a `1e-9`
/// budget tolerance; the candidate is then snapped to exact rationals,
/// rescaled so the HI sum meets the platform bound exactly, and accepted
/// only if the exact test passes.
pub fn dual_rate_assign(ts: &TaskSet) -> Option<DualRateAssignment> {
    let m = Rat::from(ts.processors);
    let hi_util_sum: Rat = ts.hi_tasks().map(|t| t.u_hi()).sum();
    if hi_util_sum > m {
        return None; // condition (5) unsatisfiable: theta^H >= u^H is forced
    }

    let mut theta_lo = BTreeMap::new();
    let mut theta_hi = BTreeMap::new();
    for t in &ts.tasks {
        if !t.is_hi() {
            theta_lo.insert(t.id.clone(), t.u_lo());
        } else if t.wcet_lo == t.wcet_hi {
            // Degenerate HI task: condition (2) reduces to theta^L >= u^L.
            theta_lo.insert(t.id.clone(), t.u_lo());
            theta_hi.insert(t.id.clone(), t.u_hi());
        }
    }

    let flexible: Vec<_> = ts.hi_tasks().filter(|t| t.wcet_lo != t.wcet_hi).collect();
    let budget_exact = &m - &theta_hi.values().sum::<Rat>();

    if !flexible.is_empty() {
        let rates = water_fill(&flexible, &budget_exact);
        for (t, rate) in flexible.iter().zip(rates) {
            theta_lo.insert(t.id.clone(), lo_rate_at_boundary(&t.u_lo(), &t.u_hi(), &rate));
            theta_hi.insert(t.id.clone(), rate);
        }
    }

    let a = DualRateAssignment { theta_lo, theta_hi };
    match dual_rate_test(ts, &a) {
        Ok(DualRateVerdict::Schedulable) => Some(a),
        _ => None,
    }
}

/// Water-filling over the HI rates of non-degenerate HI tasks: minimize the
/// sum of boundary LO rates subject to `sum theta^H <= budget`,
/// `u^H <= theta^H <= 1`. Returns exact rates with the budget met exactly.
fn water_fill(tasks: &[&crate::model::MCTask], budget_exact: &Rat) -> Vec<Rat> {
    let n = tasks.len();
    let u_lo: Vec<f64> = tasks.iter().map(|t| t.u_lo().to_f64()).collect();
    let gap: Vec<f64> = tasks
        .iter()
        .map(|t| (t.u_hi() - t.u_lo()).to_f64())
        .collect();
    let lo_bound: Vec<f64> = tasks.iter().map(|t| t.u_hi().to_f64()).collect();
    let budget = budget_exact.to_f64();

    // theta_i(lambda) clamps the stationary point of the per-task marginal
    // u^L d / (theta - d)^2 = lambda into [u^H, 1].
    let theta_at = |lambda: f64, i: usize| -> f64 {
        let t = gap[i] + (u_lo[i] * gap[i] / lambda).sqrt();
        t.clamp(lo_bound[i], 1.0)
    };
    let sum_at = |lambda: f64| -> f64 { (0..n).map(|i| theta_at(lambda, i)).sum() };

    let floats: Vec<f64> = if n as f64 <= budget {
        vec![1.0; n]
    } else {
        // Bisect the multiplier; sum_at is continuous and non-increasing.
        let mut lo = 1e-18;
        let mut hi = (0..n)
            .map(|i| gap[i] / u_lo[i])
            .fold(1e-12, f64::max)
            * 2.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum_at(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if (sum_at(hi) - budget).abs() < 1e-9 && hi - lo < 1e-15 * hi.max(1.0) {
                break;
            }
        }
        (0..n).map(|i| theta_at(hi, i)).collect()
    };

    // Exact assembly: round rates up on the 1e-9 lattice, clamp into
    // [u^H, 1], then shave any exact budget excess back into the slack
    // above the lower bounds so the exact HI-platform check cannot fail.
    let mut rates: Vec<Rat> = floats
        .iter()
        .zip(tasks)
        .map(|(&f, t)| {
            Rat::from_f64_decimals(f, 9, Round::Up)
                .max(t.u_hi())
                .min(Rat::one())
        })
        .collect();
    let sum: Rat = rates.iter().sum();
    if &sum > budget_exact {
        let mut excess = &sum - budget_exact;
        for (rate, t) in rates.iter_mut().zip(tasks) {
            if !excess.is_positive() {
                break;
            }
            let cut = excess.clone().min(&*rate - t.u_hi());
            if cut.is_positive() {
                *rate = &*rate - &cut;
                excess = excess - cut;
            }
        }
        if excess.is_positive() {
            // Cannot happen when sum u^H <= budget; bail to the floors.
            for (rate, t) in rates.iter_mut().zip(tasks) {
                *rate = t.u_hi();
            }
        }
    }
    rates
}
