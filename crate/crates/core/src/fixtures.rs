//! Example data used by tests, benchmarks and documentation.

use crate::dualrate::DualRateAssignment;
use crate::model::{MCTask, TaskSet};
use crate::multirate::MultiRateAssignment;
use crate::rat::{rat, Rat};

/// A four-task dual-criticality system on two processors that is schedulable
/// under the multi-rate fluid model but not under the dual-rate model.
pub fn reference_system() -> TaskSet {
    TaskSet::new(
        2,
        vec![
            MCTask::hi("t1", rat("7"), rat("2.8"), rat("4.9")),
            MCTask::hi("t2", rat("5"), rat("1.5"), rat("4")),
            MCTask::hi("t3", rat("35"), rat("3.5"), rat("10.5")),
            MCTask::lo("t4", rat("35"), rat("15.75")),
        ],
    )
}

/// The (optimal, infeasible on two processors) dual-rate assignment for
/// [`reference_system`]: the LO-mode rates sum to 2.015 > 2.
pub fn reference_dual_rate() -> DualRateAssignment {
    DualRateAssignment {
        theta_lo: [
            ("t1", "0.700"),
            ("t2", "0.641"),
            ("t3", "0.224"),
            ("t4", "0.450"),
        ]
        .iter()
        .map(|(id, v)| (id.to_string(), rat(v)))
        .collect(),
        theta_hi: [("t1", "0.700"), ("t2", "0.939"), ("t3", "0.360")]
            .iter()
            .map(|(id, v)| (id.to_string(), rat(v)))
            .collect(),
    }
}

/// A feasible multi-rate assignment for [`reference_system`].
///
/// The LO rates of t1 and t2 sit exactly on the carry-over budget boundary
/// (4/7 and 0.6). The rate for t3 is 0.186865, which puts its earliest
/// carry-over deadline just past the end of the transition period; the LO
/// rates then sum to 1.8082935714..., within the platform bound of 2.
pub fn reference_multi_rate() -> MultiRateAssignment {
    let theta_lo = [
        ("t1", Rat::ratio(4, 7)),
        ("t2", rat("0.600")),
        ("t3", rat("0.186865")),
        ("t4", rat("0.450")),
    ]
    .iter()
    .map(|(id, v)| (id.to_string(), v.clone()))
    .collect();
    let windows = vec![rat("2.1"), rat("0.4"), rat("13.76")];
    let theta_trans = [
        ("t1", ["1.000", "0.7", "0.7"]),
        ("t2", ["1.000", "1.000", "0.8"]),
        ("t3", ["0.000", "0.300", "0.500"]),
    ]
    .iter()
    .map(|(id, vs)| (id.to_string(), vs.iter().map(|v| rat(v)).collect()))
    .collect();
    let theta_hi = [("t1", "0.7"), ("t2", "0.8"), ("t3", "0.3")]
        .iter()
        .map(|(id, v)| (id.to_string(), rat(v)))
        .collect();
    MultiRateAssignment {
        theta_lo,
        windows,
        theta_trans,
        theta_hi,
    }
}
