//! Best-bound branch-and-bound over LP relaxations.
//!
//! Branching picks the most fractional binary (lowest id on ties); the open
//! node with the smallest relaxation bound is processed next (oldest node
//! on ties). Child LPs are warm-started from the parent's optimal tableau
//! and re-optimized with the dual simplex. Parent tableaus are kept only
//! while a memory budget allows; otherwise children restart from the root
//! tableau and re-apply their full list of fixings.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::ParamError;
use crate::model::{MilpModel, VarKind};
use crate::simplex::{LpStatus, Tableau};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Relative optimality gap `(incumbent - bound) / max(1, |incumbent|)`.
    pub rel_gap: f64,
    pub int_tol: f64,
    pub node_limit: usize,
    /// Bytes of parent tableaus that open nodes may hold for warm starts.
    pub warm_start_budget: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            time_limit: 1200.0,
            rel_gap: 1e-6,
            int_tol: 1e-6,
            node_limit: usize::MAX,
            warm_start_budget: 256 << 20,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.time_limit > 0.0) {
            return Err(ParamError::TimeLimit(self.time_limit));
        }
        for (name, value) in [("rel_gap", self.rel_gap), ("int_tol", self.int_tol)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(ParamError::Tolerance { name, value });
            }
        }
        Ok(())
    }

    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = seconds;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// A limit stopped the search; the incumbent is feasible but unproven.
    FeasibleTimeLimit,
    /// A limit stopped the search before any incumbent was found.
    NoSolutionTimeLimit,
    Infeasible,
    Unbounded,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeLimit => "feasible-time-limit",
            SolveStatus::NoSolutionTimeLimit => "no-solution-time-limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        }
    }

    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// One value per model variable; empty when no solution exists.
    pub assignment: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
}

impl MilpSolution {
    /// `(incumbent - best bound) / max(1, |incumbent|)`, clamped at zero.
    pub fn gap(&self) -> f64 {
        if !self.status.has_solution() {
            return f64::INFINITY;
        }
        ((self.objective - self.best_bound) / self.objective.abs().max(1.0)).max(0.0)
    }
}

struct Stored {
    tab: Tableau,
    bytes: usize,
    budget_used: Rc<Cell<usize>>,
}

impl Drop for Stored {
    fn drop(&mut self) {
        self.budget_used.set(self.budget_used.get() - self.bytes);
    }
}

struct Node {
    id: usize,
    bound: f64,
    fixings: Vec<(usize, f64)>,
    parent: Option<Rc<Stored>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smaller bound and smaller id rank higher.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

/// Solves `model` to optimality (within `params.rel_gap`) or until a limit.
pub fn solve_milp(model: &MilpModel, params: &SolverParams) -> MilpSolution {
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(params.time_limit.min(1e9));
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let constant = model.objective().constant;
    let mut result = MilpSolution {
        status: SolveStatus::Infeasible,
        assignment: Vec::new(),
        objective: f64::INFINITY,
        best_bound: f64::INFINITY,
        nodes: 0,
        lp_iterations: 0,
        wall_time: Duration::ZERO,
    };
    let Some(mut root) = Tableau::from_model(model) else {
        result.wall_time = start.elapsed();
        return result;
    };
    let root_status = root.optimize(Some(deadline));
    result.nodes = 1;
    result.lp_iterations = root.iterations;
    match root_status {
        LpStatus::Infeasible => {
            result.wall_time = start.elapsed();
            return result;
        }
        LpStatus::Unbounded => {
            result.status = SolveStatus::Unbounded;
            result.objective = f64::NEG_INFINITY;
            result.best_bound = f64::NEG_INFINITY;
            result.wall_time = start.elapsed();
            return result;
        }
        LpStatus::Limit => {
            result.status = SolveStatus::NoSolutionTimeLimit;
            result.best_bound = f64::NEG_INFINITY;
            result.wall_time = start.elapsed();
            return result;
        }
        LpStatus::Optimal => {}
    }
    let budget_used = Rc::new(Cell::new(0usize));
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut limit_hit = false;

    // Root is processed like any other node but without re-solving.
    let mut pending: Option<(Tableau, Vec<(usize, f64)>)> = Some((root.clone(), Vec::new()));
    loop {
        let (tab, fixings) = match pending.take() {
            Some(p) => p,
            None => {
                let Some(node) = heap.pop() else { break };
                if let Some((inc, _)) = &incumbent {
                    if node.bound >= inc - abs_gap(*inc, params.rel_gap) {
                        heap.clear();
                        break;
                    }
                }
                if Instant::now() >= deadline || result.nodes >= params.node_limit {
                    heap.push(node);
                    limit_hit = true;
                    break;
                }
                result.nodes += 1;
                let mut tab = match &node.parent {
                    Some(stored) => {
                        let mut t = stored.tab.clone();
                        let &(j, v) = node.fixings.last().expect("child has a fixing");
                        t.fix_var(j, v);
                        t
                    }
                    None => {
                        let mut t = root.clone();
                        for &(j, v) in &node.fixings {
                            t.fix_var(j, v);
                        }
                        t
                    }
                };
                drop(node.parent);
                let before = tab.iterations;
                let status = tab.optimize(Some(deadline));
                result.lp_iterations += tab.iterations - before;
                match status {
                    LpStatus::Optimal => {}
                    LpStatus::Infeasible => continue,
                    LpStatus::Unbounded => continue,
                    LpStatus::Limit => {
                        heap.push(Node { id: node.id, bound: node.bound, fixings: node.fixings, parent: None });
                        limit_hit = true;
                        break;
                    }
                }
                (tab, node.fixings)
            }
        };
        let bound = tab.objective() + constant;
        if let Some((inc, _)) = &incumbent {
            if bound >= inc - abs_gap(*inc, params.rel_gap) {
                continue;
            }
        }
        let x = tab.structural_values();
        let branch_var = most_fractional(&binaries, &x, params.int_tol);
        match branch_var {
            None => {
                if let Some((obj, assignment)) = polish_incumbent(model, &tab, &binaries, deadline) {
                    if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                        log::debug!("incumbent {obj} at node {}", result.nodes);
                        incumbent = Some((obj, assignment));
                    }
                }
            }
            Some(j) => {
                let bytes = tab.byte_size();
                let parent = if budget_used.get() + bytes <= params.warm_start_budget {
                    budget_used.set(budget_used.get() + bytes);
                    Some(Rc::new(Stored { tab, bytes, budget_used: Rc::clone(&budget_used) }))
                } else {
                    None
                };
                for v in [0.0, 1.0] {
                    let mut f = fixings.clone();
                    f.push((j, v));
                    next_id += 1;
                    heap.push(Node { id: next_id, bound, fixings: f, parent: parent.clone() });
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    drop(heap);
    result.wall_time = start.elapsed();
    match incumbent {
        Some((obj, assignment)) => {
            result.objective = obj;
            result.assignment = assignment;
            result.best_bound = if limit_hit { open_bound.min(obj) } else { obj };
            let gap = ((obj - result.best_bound) / obj.abs().max(1.0)).max(0.0);
            result.status =
                if !limit_hit || gap <= params.rel_gap { SolveStatus::Optimal } else { SolveStatus::FeasibleTimeLimit };
        }
        None => {
            if limit_hit {
                result.status = SolveStatus::NoSolutionTimeLimit;
                result.best_bound = open_bound;
            } else {
                result.status = SolveStatus::Infeasible;
            }
        }
    }
    result
}

fn abs_gap(incumbent: f64, rel_gap: f64) -> f64 {
    rel_gap * incumbent.abs().max(1.0)
}

fn most_fractional(binaries: &[usize], x: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in binaries {
        let frac = x[j] - x[j].floor();
        let dist = frac.min(1.0 - frac);
        if dist > tol && best.is_none_or(|(_, b)| dist > b) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Rounds binaries of an integral LP point and checks the model. If rounding
/// leaves a violation above tolerance, the continuous part is re-optimized
/// with every binary fixed.
fn polish_incumbent(
    model: &MilpModel,
    tab: &Tableau,
    binaries: &[usize],
    deadline: Instant,
) -> Option<(f64, Vec<f64>)> {
    let mut x = tab.structural_values();
    for &j in binaries {
        x[j] = x[j].round();
    }
    let ev = model.evaluate(&x).ok()?;
    if ev.feasible {
        return Some((ev.objective, x));
    }
    let mut fixed = tab.clone();
    for &j in binaries {
        fixed.fix_var(j, x[j]);
    }
    if fixed.optimize(Some(deadline)) != LpStatus::Optimal {
        return None;
    }
    let mut y = fixed.structural_values();
    for &j in binaries {
        y[j] = x[j];
    }
    let ev = model.evaluate(&y).ok()?;
    ev.feasible.then_some((ev.objective, y))
}
