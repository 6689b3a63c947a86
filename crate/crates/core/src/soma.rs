//! Rate and window assignment search for the multi-rate model.
//!
//! The entry point [`soma`] fixes LO tasks at their utilization rate, sorts
//! HI tasks by earliest possible carry-over completion, searches for rates
//! and window durations minimizing the total LO rate of HI tasks, and
//! declares success when the LO platform check passes on top of the
//! per-task and HI platform conditions.
//!
//! The search itself runs in floating point: windows are aligned with the
//! carry-over deadlines of the sorted tasks, each task holds a `u^H` floor
//! across the transition, window slack is spent on the rate in a task's
//! own completion window and on monotone prefix ramps, and LO rates follow
//! from the carry-over budget in closed form. Candidates are then rebuilt
//! in exact arithmetic and validated by the exact test; a degenerate
//! candidate embedding the optimal dual-rate assignment (all windows zero)
//! is always evaluated as well, so the search succeeds whenever the
//! dual-rate assigner does.

use crate::dualrate::dual_rate_assign;
use crate::model::{MCTask, TaskSet};
use crate::multirate::{embed_dual_rate, multi_rate_conditions, MultiRateAssignment};
use crate::rat::{Rat, Round};
use std::collections::BTreeMap;

/// Solver knobs, exposed on the command line.
#[derive(Clone, Debug)]
pub struct SomaParams {
    /// Cap on alternating-search rounds per candidate structure.
    pub max_iters: usize,
    /// Relative objective change treated as converged.
    pub tol: f64,
    /// Evaluate only the dual-rate-seeded candidate (ablation).
    pub seed_only: bool,
}

impl Default for SomaParams {
    fn default() -> Self {
        SomaParams {
            max_iters: 200,
            tol: 1e-7,
            seed_only: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SomaStatus {
    Success,
    Failure,
}

/// Result of a [`soma`] run, with solver diagnostics.
#[derive(Clone, Debug)]
pub struct SomaOutcome {
    pub status: SomaStatus,
    /// Present iff `status == Success`; always passes the exact test.
    pub assignment: Option<MultiRateAssignment>,
    /// Total LO rate over HI tasks of the returned assignment.
    pub objective: Option<Rat>,
    pub iterations: usize,
    /// Whether the returned assignment is the dual-rate-seeded candidate.
    pub used_seed_candidate: bool,
}

impl SomaOutcome {
    pub fn is_success(&self) -> bool {
        self.status == SomaStatus::Success
    }

    fn failure(iterations: usize) -> Self {
        SomaOutcome {
            status: SomaStatus::Failure,
            assignment: None,
            objective: None,
            iterations,
            used_seed_candidate: false,
        }
    }
}

/// HI tasks in ascending order of `T - C^L/u^H`, the earliest possible
/// carry-over completion time. Stable under ties.
pub fn sort_hi_tasks(ts: &TaskSet) -> Vec<String> {
    let mut hi: Vec<&MCTask> = ts.hi_tasks().collect();
    hi.sort_by(|a, b| {
        let key = |t: &MCTask| &t.period - &(&t.wcet_lo / &t.u_hi());
        key(a).cmp(&key(b))
    });
    hi.iter().map(|t| t.id.clone()).collect()
}

/// Search for a multi-rate assignment with the given HI-task ordering.
///
/// Returns an assignment satisfying every condition of the exact test
/// except possibly the LO platform bound (which the caller checks), or
/// `None` when neither the search nor the dual-rate-seeded candidate
/// produces one. When the dual-rate assigner succeeds, this never returns
/// `None`.
pub fn solve_assignment(
    ts: &TaskSet,
    ordering: &[String],
    params: &SomaParams,
) -> Option<MultiRateAssignment> {
    solve_detailed(ts, ordering, params).map(|d| d.assignment)
}

struct Solved {
    assignment: MultiRateAssignment,
    objective: Rat,
    iterations: usize,
    from_seed: bool,
}

/// SOMA: sort, solve, and check the LO platform bound.
pub fn soma(ts: &TaskSet) -> SomaOutcome {
    soma_with(ts, &SomaParams::default())
}

pub fn soma_with(ts: &TaskSet, params: &SomaParams) -> SomaOutcome {
    let ordering = sort_hi_tasks(ts);
    let Some(solved) = solve_detailed(ts, &ordering, params) else {
        return SomaOutcome::failure(0);
    };
    let m = Rat::from(ts.processors);
    if solved.assignment.lo_rate_sum() > m {
        return SomaOutcome::failure(solved.iterations);
    }
    debug_assert!(
        crate::multirate::multi_rate_test(ts, &solved.assignment)
            .is_ok_and(|v| v.is_schedulable()),
        "success outcome must pass the exact test"
    );
    SomaOutcome {
        status: SomaStatus::Success,
        assignment: Some(solved.assignment),
        objective: Some(solved.objective),
        iterations: solved.iterations,
        used_seed_candidate: solved.from_seed,
    }
}

fn solve_detailed(ts: &TaskSet, ordering: &[String], params: &SomaParams) -> Option<Solved> {
    let hi: Vec<&MCTask> = ordering.iter().map(|id| ts.task(id).expect("id")).collect();
    debug_assert_eq!(hi.len(), ts.n_hi());

    // Seed candidate: the optimal dual-rate assignment embedded with all
    // windows at zero width.
    let seed = dual_rate_assign(ts).map(|d| {
        let a = embed_dual_rate(ts, &d);
        let objective: Rat = ts.hi_tasks().map(|t| a.theta_lo[&t.id].clone()).sum();
        (a, objective)
    });

    let searched = if params.seed_only || hi.is_empty() {
        None
    } else {
        search(ts, &hi, params)
    };

    match (searched, seed) {
        (Some((a, obj, iters)), Some((sa, sobj))) => Some(if obj <= sobj {
            Solved {
                assignment: a,
                objective: obj,
                iterations: iters,
                from_seed: false,
            }
        } else {
            Solved {
                assignment: sa,
                objective: sobj,
                iterations: iters,
                from_seed: true,
            }
        }),
        (Some((a, obj, iters)), None) => Some(Solved {
            assignment: a,
            objective: obj,
            iterations: iters,
            from_seed: false,
        }),
        (None, Some((sa, sobj))) => Some(Solved {
            assignment: sa,
            objective: sobj,
            iterations: 0,
            from_seed: true,
        }),
        (None, None) => {
            if hi.is_empty() {
                // Pure LO system: rates at utilization, no windows.
                let a = MultiRateAssignment {
                    theta_lo: ts.tasks.iter().map(|t| (t.id.clone(), t.u_lo())).collect(),
                    windows: vec![],
                    theta_trans: BTreeMap::new(),
                    theta_hi: BTreeMap::new(),
                };
                Some(Solved {
                    assignment: a,
                    objective: Rat::zero(),
                    iterations: 0,
                    from_seed: false,
                })
            } else {
                None
            }
        }
    }
}

/// Platform headroom kept by the float phase so exact snapping never tips
/// a window sum over `m`.
const MARGIN: f64 = 1e-6;

/// Smallest lattice multiple of `1e-9` at or above `x`. Falls back to `x`
/// itself when the float image is unreliable (denormal-scale values).
fn snap_rate_up(x: &Rat) -> Rat {
    let f = x.to_f64();
    if !f.is_finite() {
        return x.clone();
    }
    let snapped = Rat::from_f64_decimals(f, 9, Round::Up);
    // Float rounding may land the image below the exact value; one more
    // lattice step always clears it.
    if &snapped >= x {
        snapped
    } else {
        snapped + Rat::ratio(1, 1_000_000_000)
    }
}

struct Ctx {
    m: f64,
    t: Vec<f64>,
    c_lo: Vec<f64>,
    d_c: Vec<f64>,
    u_lo: Vec<f64>,
    u_hi: Vec<f64>,
    degenerate: Vec<bool>,
}

impl Ctx {
    fn new(ts: &TaskSet, hi: &[&MCTask]) -> Ctx {
        Ctx {
            m: ts.processors as f64,
            t: hi.iter().map(|t| t.period.to_f64()).collect(),
            c_lo: hi.iter().map(|t| t.wcet_lo.to_f64()).collect(),
            d_c: hi.iter().map(|t| (&t.wcet_hi - &t.wcet_lo).to_f64()).collect(),
            u_lo: hi.iter().map(|t| t.u_lo().to_f64()).collect(),
            u_hi: hi.iter().map(|t| t.u_hi().to_f64()).collect(),
            degenerate: hi.iter().map(|t| t.wcet_lo == t.wcet_hi).collect(),
        }
    }
}

/// Float state of one candidate structure: `tail_from` is the first sorted
/// index whose carry-over deadline is pushed past the transition period
/// (its window slot has zero width).
#[derive(Clone)]
struct State {
    theta: Vec<f64>,
    windows: Vec<f64>,
    rates: Vec<Vec<f64>>,
    tail_from: usize,
    feasible: bool,
}

fn search(
    ts: &TaskSet,
    hi: &[&MCTask],
    params: &SomaParams,
) -> Option<(MultiRateAssignment, Rat, usize)> {
    let cx = Ctx::new(ts, hi);
    let h = hi.len();
    if cx.u_hi.iter().sum::<f64>() > cx.m + 1e-9 {
        return None; // stable platform bound unsatisfiable
    }

    let mut iterations = 0;
    let mut best: Option<(State, f64)> = None;
    // Try pushing progressively longer suffixes of tasks past the
    // transition period; keep the structure with the lowest objective.
    let mut tail_from = h;
    loop {
        let (state, obj, iters) = alternate(&cx, tail_from, params);
        iterations += iters;
        if state.feasible && best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((state, obj));
        }
        if tail_from == 0 {
            break;
        }
        tail_from -= 1;
        // Pushing a task out is only meaningful if its deadline can sit
        // past the remaining windows at a LO rate no higher than u^H.
        if cx.degenerate[tail_from] {
            break;
        }
    }

    let (state, _) = best?;
    let assignment = assemble_exact(ts, hi, &cx, &state)?;
    let objective: Rat = hi.iter().map(|t| assignment.theta_lo[&t.id].clone()).sum();
    // The exact assembly can only improve on the float estimate or bail;
    // re-validate and hand the candidate up.
    match multi_rate_conditions(ts, &assignment, true) {
        Ok(v) if v.is_schedulable() => Some((assignment, objective, iterations)),
        _ => None,
    }
}

/// Alternate window sizing, rate allocation, and LO-rate updates to a
/// fixed point for one structure.
fn alternate(cx: &Ctx, tail_from: usize, params: &SomaParams) -> (State, f64, usize) {
    let h = cx.t.len();
    let mut st = State {
        theta: cx.u_hi.clone(),
        windows: vec![0.0; h],
        rates: vec![vec![0.0; h]; h],
        tail_from,
        feasible: true,
    };
    let mut prev_obj = f64::INFINITY;
    let mut best: Option<(State, f64)> = None;
    let mut iters = 0;
    for _ in 0..params.max_iters {
        iters += 1;
        update_windows(cx, &mut st);
        st.feasible = allocate_rates(cx, &mut st);
        if !st.feasible {
            break;
        }
        update_theta(cx, &mut st);
        let obj: f64 = st.theta.iter().sum();
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((st.clone(), obj));
        }
        if (prev_obj - obj).abs() <= params.tol * obj.max(1.0) {
            prev_obj = obj;
            break;
        }
        prev_obj = obj;
    }
    // Under oscillation the final iterate may be the worse phase; hand
    // back the best snapshot seen.
    match best {
        Some((state, obj)) => (state, obj, iters),
        None => (st, f64::INFINITY, iters),
    }
}

fn remaining_time(cx: &Ctx, i: usize, theta: f64) -> f64 {
    cx.t[i] - cx.c_lo[i] / theta.max(1e-12)
}

/// Windows end at the carry-over deadlines of the in-window tasks; window
/// slots of pushed-out and degenerate tasks collapse to zero width.
fn update_windows(cx: &Ctx, st: &mut State) {
    let mut acc = 0.0;
    for i in 0..cx.t.len() {
        let w = if i >= st.tail_from || cx.degenerate[i] {
            0.0
        } else {
            (remaining_time(cx, i, st.theta[i]) - acc).max(0.0)
        };
        st.windows[i] = w;
        acc += w;
    }
}

/// Distribute each window's capacity: `u^H` floors for every HI task,
/// full boost to the rate in a task's own completion window (most urgent
/// first), then monotone right-packed ramps replacing the flat prefix and
/// pushed-out profiles where that frees early capacity.
fn allocate_rates(cx: &Ctx, st: &mut State) -> bool {
    let h = cx.t.len();
    let budget = cx.m - MARGIN;
    let w = st.windows.clone();

    for i in 0..h {
        for j in 0..h {
            st.rates[i][j] = cx.u_hi[i];
        }
    }
    let floor_sum: f64 = cx.u_hi.iter().sum();
    let mut cap = vec![budget - floor_sum; h];
    if cap.iter().any(|&c| c < -1e-9) {
        return false;
    }

    // Completion-window boosts.
    for j in 0..st.tail_from {
        if cx.degenerate[j] || w[j] <= 0.0 {
            continue;
        }
        let give = (1.0 - st.rates[j][j]).min(cap[j]).max(0.0);
        st.rates[j][j] += give;
        cap[j] -= give;
    }

    // Reshape ramps, latest tasks first. In-window tasks ramp over their
    // prefix; pushed-out tasks ramp over the whole transition period. The
    // flat floor is always restorable, so a failed pack never loses
    // feasibility.
    let w_total: f64 = w[..st.tail_from].iter().sum();
    for i in (0..h).rev() {
        if cx.degenerate[i] {
            continue;
        }
        let span = if i < st.tail_from { i } else { h };
        if span == 0 {
            continue;
        }
        let span_len: f64 = if i < st.tail_from {
            w[..i].iter().sum()
        } else {
            w_total
        };
        let p_min = cx.u_hi[i] * span_len;
        for j in 0..span {
            cap[j] += st.rates[i][j];
            st.rates[i][j] = 0.0;
        }
        if !pack_right(&mut st.rates[i], &mut cap, &w, span, p_min, cx.d_c[i]) {
            for j in 0..span {
                st.rates[i][j] = cx.u_hi[i];
                cap[j] -= cx.u_hi[i];
            }
        }
    }

    // Ramps that concentrated late often free early capacity; a second
    // boost round turns it into lower LO rates for the urgent tasks.
    for j in 0..st.tail_from {
        if cx.degenerate[j] || w[j] <= 0.0 {
            continue;
        }
        let give = (1.0 - st.rates[j][j]).min(cap[j]).max(0.0);
        st.rates[j][j] += give;
        cap[j] -= give;
    }
    true
}

/// Fill a monotone non-decreasing profile over `windows[..span]` from the
/// right, bounded per window by remaining capacity and 1, aiming for an
/// executed volume in `[p_min, p_max]`. On success the profile is written
/// into `row` and charged against `cap`; on failure (volume short of
/// `p_min`) both are left untouched.
fn pack_right(
    row: &mut [f64],
    cap: &mut [f64],
    windows: &[f64],
    span: usize,
    p_min: f64,
    p_max: f64,
) -> bool {
    let mut achieved = 0.0;
    let mut ceiling = 1.0f64;
    let mut packed = vec![0.0; span];
    for j in (0..span).rev() {
        if windows[j] <= 0.0 {
            continue; // filled in below
        }
        let allowed = ceiling.min(cap[j]).max(0.0);
        let want = if achieved >= p_max {
            0.0
        } else {
            ((p_max - achieved) / windows[j]).min(allowed)
        };
        packed[j] = want;
        achieved += want * windows[j];
        ceiling = want;
        if want <= 0.0 {
            break; // monotone: nothing may precede a zero rate
        }
    }
    // Zero-width windows inherit the nearest rate to their left, capped by
    // their own capacity; a final min-sweep keeps the profile monotone.
    let mut left = 0.0f64;
    for j in 0..span {
        if windows[j] <= 0.0 {
            packed[j] = left.min(cap[j].max(0.0));
        } else {
            left = packed[j];
        }
    }
    for j in (0..span.saturating_sub(1)).rev() {
        packed[j] = packed[j].min(packed[j + 1]);
    }
    let achieved: f64 = (0..span).map(|j| packed[j] * windows[j]).sum();
    if achieved + 1e-12 < p_min {
        return false;
    }
    for j in 0..span {
        row[j] = packed[j];
        cap[j] -= packed[j];
    }
    true
}

/// Closed-form LO rates from the carry-over budgets at the current rates
/// and windows.
fn update_theta(cx: &Ctx, st: &mut State) {
    let h = cx.t.len();
    let w_total: f64 = st.windows[..st.tail_from].iter().sum();
    let mut acc = 0.0;
    for i in 0..h {
        if cx.degenerate[i] {
            st.theta[i] = cx.u_lo[i];
            continue;
        }
        let (w_pre, closing, span) = if i < st.tail_from {
            (acc, st.rates[i][i].max(cx.u_hi[i]), i)
        } else {
            (w_total, cx.u_hi[i], st.windows.len())
        };
        let executed: f64 = st.rates[i][..span]
            .iter()
            .zip(&st.windows[..span])
            .map(|(r, w)| r * w)
            .sum();
        let need = (cx.d_c[i] - executed).max(0.0);
        let rem_req = w_pre + need / closing;
        let theta = if cx.t[i] - rem_req <= 1e-12 {
            cx.u_hi[i]
        } else {
            (cx.c_lo[i] / (cx.t[i] - rem_req)).min(cx.u_hi[i]).max(cx.u_lo[i])
        };
        st.theta[i] = theta;
        if i < st.tail_from {
            acc += st.windows[i];
        }
    }
}

/// Rebuild the float candidate exactly: snap rates down onto the `1e-9`
/// lattice (platform-safe), lift them back to their exact floors, restore
/// monotone prefixes, then derive LO rates and windows sequentially so
/// every carry-over budget holds by construction with the completion
/// windows landing exactly where assumed.
fn assemble_exact(
    ts: &TaskSet,
    hi: &[&MCTask],
    cx: &Ctx,
    st: &State,
) -> Option<MultiRateAssignment> {
    let h = hi.len();
    let m = Rat::from(ts.processors);
    let nudge = Rat::ratio(1_000_000_001, 1_000_000_000);

    // Exact rate matrix with floors.
    let mut rates: Vec<Vec<Rat>> = Vec::with_capacity(h);
    for i in 0..h {
        let u_hi = hi[i].u_hi();
        let mut row: Vec<Rat> = (0..h)
            .map(|j| {
                let snapped = Rat::from_f64_decimals(st.rates[i][j], 9, Round::Down)
                    .max(Rat::zero())
                    .min(Rat::one());
                let floored = cx.degenerate[i] || (i < st.tail_from && j >= i);
                if floored {
                    snapped.max(u_hi.clone())
                } else {
                    snapped
                }
            })
            .collect();
        // Monotone span: the prefix for in-window tasks, everything for
        // pushed-out tasks.
        let span = if i < st.tail_from { i } else { h };
        for j in (0..span.saturating_sub(1)).rev() {
            row[j] = row[j].clone().min(row[j + 1].clone());
        }
        rates.push(row);
    }

    // Sequential LO rates and window widths. A prefix whose exact executed
    // volume falls short of the u^H demand average is lifted back to the
    // flat floor (which meets the average for any widths); window sums are
    // re-checked at the end.
    let mut windows: Vec<Rat> = vec![Rat::zero(); h];
    let mut theta: Vec<Rat> = vec![Rat::zero(); h];
    let mut acc = Rat::zero();
    for i in 0..st.tail_from {
        if cx.degenerate[i] {
            theta[i] = hi[i].u_lo();
            continue; // zero-width slot
        }
        let u_hi = hi[i].u_hi();
        let mut executed: Rat = (0..i).map(|j| &rates[i][j] * &windows[j]).sum();
        if executed < &u_hi * &acc {
            for j in 0..i {
                rates[i][j] = rates[i][j].clone().max(u_hi.clone());
            }
            executed = (0..i).map(|j| &rates[i][j] * &windows[j]).sum();
        }
        let delta_c = &hi[i].wcet_hi - &hi[i].wcet_lo;
        let need = &delta_c - &executed;
        let closing = rates[i][i].clone();
        let rem_req = if need.is_positive() {
            &acc + &(&need / &closing)
        } else {
            acc.clone()
        };
        if rem_req >= hi[i].period {
            return None;
        }
        let mut th = &hi[i].wcet_lo / &(&hi[i].period - &rem_req);
        if !need.is_positive() {
            th = th * nudge.clone(); // strictly past the accumulated windows
        }
        // Snapping up onto the decimal lattice only widens the remaining
        // time, and keeps the window chain from compounding denominators.
        let th = snap_rate_up(&th).max(hi[i].u_lo()).min(hi[i].u_hi());
        let rem = &hi[i].period - &(&hi[i].wcet_lo / &th);
        if rem < acc {
            return None;
        }
        windows[i] = &rem - &acc;
        theta[i] = th;
        acc = rem;
    }
    let w_total = acc.clone();
    for i in st.tail_from..h {
        if cx.degenerate[i] {
            theta[i] = hi[i].u_lo();
            continue;
        }
        let u_hi = hi[i].u_hi();
        let mut executed: Rat = (0..h).map(|j| &rates[i][j] * &windows[j]).sum();
        if executed < &u_hi * &w_total {
            for j in 0..h {
                rates[i][j] = rates[i][j].clone().max(u_hi.clone());
            }
            executed = (0..h).map(|j| &rates[i][j] * &windows[j]).sum();
        }
        let delta_c = &hi[i].wcet_hi - &hi[i].wcet_lo;
        let need = &delta_c - &executed;
        let rem_req = if need.is_positive() {
            &w_total + &(&need / &u_hi)
        } else {
            w_total.clone()
        };
        if rem_req >= hi[i].period {
            return None;
        }
        let mut th = &hi[i].wcet_lo / &(&hi[i].period - &rem_req);
        if !need.is_positive() || rem_req == w_total {
            th = th * nudge.clone();
        }
        let th = snap_rate_up(&th).max(hi[i].u_lo()).min(hi[i].u_hi());
        // The pushed-out deadline must fall strictly past the transition.
        let rem = &hi[i].period - &(&hi[i].wcet_lo / &th);
        if rem <= w_total {
            return None;
        }
        theta[i] = th;
    }

    // Platform check per window slot, after any floor lifts.
    for j in 0..h {
        let sum: Rat = (0..h).map(|i| rates[i][j].clone()).sum();
        if sum > m {
            return None;
        }
    }

    let mut theta_lo: BTreeMap<String, Rat> = ts
        .lo_tasks()
        .map(|t| (t.id.clone(), t.u_lo()))
        .collect();
    let mut theta_trans = BTreeMap::new();
    let mut theta_hi = BTreeMap::new();
    for i in 0..h {
        theta_lo.insert(hi[i].id.clone(), theta[i].clone());
        theta_trans.insert(hi[i].id.clone(), rates[i].clone());
        theta_hi.insert(hi[i].id.clone(), hi[i].u_hi());
    }
    Some(MultiRateAssignment {
        theta_lo,
        windows,
        theta_trans,
        theta_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{MCTask, TaskSet};
    use crate::multirate::multi_rate_test;
    use crate::rat::rat;

    #[test]
    fn sort_order_reference() {
        let ts = fixtures::reference_system();
        // Keys: 7 - 2.8/0.7 = 3, 5 - 1.5/0.8 = 3.125, 35 - 3.5/0.3 = 23.33...
        assert_eq!(sort_hi_tasks(&ts), vec!["t1", "t2", "t3"]);
    }

    #[test]
    fn sort_is_stable_on_ties() {
        let ts = TaskSet::new(
            2,
            vec![
                MCTask::hi("b", rat("10"), rat("4"), rat("8")),
                MCTask::hi("a", rat("10"), rat("4"), rat("8")),
                MCTask::hi("c", rat("20"), rat("8"), rat("16")),
            ],
        );
        assert_eq!(sort_hi_tasks(&ts), vec!["b", "a", "c"]);
    }

    #[test]
    fn single_hi_task_identity() {
        let ts = TaskSet::new(2, vec![MCTask::hi("only", rat("5"), rat("1"), rat("2"))]);
        assert_eq!(sort_hi_tasks(&ts), vec!["only"]);
    }

    #[test]
    fn reference_system_succeeds() {
        let ts = fixtures::reference_system();
        let out = soma(&ts);
        assert!(out.is_success(), "outcome: {out:?}");
        let a = out.assignment.unwrap();
        assert!(multi_rate_test(&ts, &a).unwrap().is_schedulable());
        assert!(a.lo_rate_sum() <= rat("2"), "sum {}", a.lo_rate_sum());
        // The dual-rate model cannot schedule this system, so success must
        // come from the multi-rate search itself.
        assert!(!out.used_seed_candidate);
    }

    #[test]
    fn saturated_lo_task_forces_failure() {
        let mut ts = fixtures::reference_system();
        for t in &mut ts.tasks {
            if t.id == "t4" {
                t.wcet_lo = rat("35");
                t.wcet_hi = rat("35");
            }
        }
        assert!(!soma(&ts).is_success());
    }

    #[test]
    fn hi_overload_fails() {
        let ts = TaskSet::new(
            1,
            vec![
                MCTask::hi("a", rat("2"), rat("1"), rat("1.5")),
                MCTask::hi("b", rat("2"), rat("0.5"), rat("1")),
            ],
        );
        assert!(!soma(&ts).is_success());
    }

    #[test]
    fn dual_feasible_always_succeeds_with_no_worse_objective() {
        let ts = TaskSet::new(
            2,
            vec![
                MCTask::hi("a", rat("10"), rat("2"), rat("5")),
                MCTask::hi("b", rat("8"), rat("1"), rat("3")),
                MCTask::lo("c", rat("5"), rat("1")),
                MCTask::lo("d", rat("10"), rat("3")),
            ],
        );
        let dual = crate::dualrate::dual_rate_assign(&ts).expect("dual feasible");
        let dual_obj: Rat = ts.hi_tasks().map(|t| dual.theta_lo[&t.id].clone()).sum();
        let out = soma(&ts);
        assert!(out.is_success());
        assert!(out.objective.unwrap() <= dual_obj);
    }

    #[test]
    fn seed_only_mode_follows_dual_rate() {
        let params = SomaParams {
            seed_only: true,
            ..SomaParams::default()
        };
        // Dual-infeasible system: seed-only must fail.
        let ts = fixtures::reference_system();
        assert!(!soma_with(&ts, &params).is_success());
        // Dual-feasible system: seed-only succeeds via the embedding.
        let mut ts2 = ts.clone();
        ts2.tasks.retain(|t| t.id != "t4");
        let out = soma_with(&ts2, &params);
        assert!(out.is_success());
        assert!(out.used_seed_candidate);
    }

    #[test]
    fn pure_lo_system() {
        let ts = TaskSet::new(
            2,
            vec![
                MCTask::lo("a", rat("4"), rat("2")),
                MCTask::lo("b", rat("8"), rat("6")),
            ],
        );
        let out = soma(&ts);
        assert!(out.is_success());
        let a = out.assignment.unwrap();
        assert!(a.windows.is_empty());
        assert!(multi_rate_test(&ts, &a).unwrap().is_schedulable());
    }

    #[test]
    fn degenerate_hi_tasks_handled() {
        let ts = TaskSet::new(
            2,
            vec![
                MCTask::hi("a", rat("4"), rat("2"), rat("2")),
                MCTask::hi("b", rat("5"), rat("1"), rat("3")),
                MCTask::lo("c", rat("10"), rat("4")),
            ],
        );
        let out = soma(&ts);
        assert!(out.is_success());
        let a = out.assignment.unwrap();
        assert_eq!(a.theta_lo["a"], rat("0.5"));
        assert!(multi_rate_test(&ts, &a).unwrap().is_schedulable());
    }
}
