//! Dense bounded-variable simplex on a condensed (Tucker) tableau.
//!
//! Every row `i` of the model gets a logical variable `s_i = a_i·x` whose
//! bounds encode the comparator, so the system is homogeneous: the basic
//! variables are always a linear combination of the nonbasic ones,
//! `x_B = T x_N`. The tableau `T` is `m × n` (rows × structural columns),
//! which keeps memory linear in the row count for the tall, narrow models
//! produced by the counterfactual formulations.
//!
//! Two drivers share the tableau: a primal method (composite phase 1 that
//! minimizes the sum of infeasibilities, then phase 2) and a dual method
//! used to re-optimize after bound changes in branch-and-bound.

use std::sync::Arc;
use std::time::Instant;

use crate::dense_lu::Lu;
use crate::model::{Comparator, MilpModel};

pub(crate) const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_STREAK: usize = 30;
const REFACTOR_EVERY: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration or time limit reached before a conclusion.
    Limit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values (one per model variable). Meaningful only when
    /// `status` is `Optimal`.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Solves the continuous relaxation of `model` (binaries relaxed to `[0,1]`).
pub fn solve_lp(model: &MilpModel) -> LpSolution {
    let mut tab = match Tableau::from_model(model) {
        Some(t) => t,
        None => {
            return LpSolution {
                status: LpStatus::Infeasible,
                values: vec![f64::NAN; model.num_vars()],
                objective: f64::INFINITY,
                iterations: 0,
            }
        }
    };
    let status = tab.optimize(None);
    LpSolution {
        status,
        values: tab.structural_values(),
        objective: tab.objective() + model.objective().constant,
        iterations: tab.iterations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Basic(usize),
    Nonbasic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Done,
    Infeasible,
    Unbounded,
    Limit,
}

#[derive(Clone)]
pub(crate) struct Tableau {
    m: usize,
    n: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    pos: Vec<Pos>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    value: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    rows: Arc<Vec<Vec<(usize, f64)>>>,
    pub(crate) iterations: usize,
    since_refactor: usize,
}

impl Tableau {
    /// Builds the initial all-logical basis. Returns `None` when an empty row
    /// is violated by its own right-hand side.
    pub(crate) fn from_model(model: &MilpModel) -> Option<Self> {
        let n = model.num_vars();
        let mut rows = Vec::new();
        let mut lo_rows = Vec::new();
        let mut up_rows = Vec::new();
        for c in model.constraints() {
            let (lo, up) = match c.cmp {
                Comparator::Le => (f64::NEG_INFINITY, c.rhs),
                Comparator::Ge => (c.rhs, f64::INFINITY),
                Comparator::Eq => (c.rhs, c.rhs),
            };
            if c.terms.is_empty() {
                if lo > PRIMAL_TOL || up < -PRIMAL_TOL {
                    return None;
                }
                continue;
            }
            rows.push(c.terms.iter().map(|&(v, a)| (v.0, a)).collect::<Vec<_>>());
            lo_rows.push(lo);
            up_rows.push(up);
        }
        let m = rows.len();
        let mut t = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                t[i * n + j] = a;
            }
        }
        let mut lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
        lower.extend(lo_rows);
        upper.extend(up_rows);
        let mut cost = vec![0.0; n + m];
        for &(v, a) in &model.objective().terms {
            cost[v.0] += a;
        }
        let mut value = vec![0.0; n + m];
        for j in 0..n {
            value[j] = if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                0.0
            };
        }
        let mut pos = Vec::with_capacity(n + m);
        pos.extend((0..n).map(Pos::Nonbasic));
        pos.extend((0..m).map(Pos::Basic));
        let mut tab = Self {
            m,
            n,
            t,
            basis: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            pos,
            lower,
            upper,
            value,
            d: cost[..n].to_vec(),
            cost,
            rows: Arc::new(rows),
            iterations: 0,
            since_refactor: 0,
        };
        tab.recompute_basics();
        Some(tab)
    }

    pub(crate) fn byte_size(&self) -> usize {
        self.t.len() * 8 + (self.n + self.m) * 48
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.value[..self.n].to_vec()
    }

    pub(crate) fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.value[j]).sum()
    }

    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        &self.t[r * self.n..(r + 1) * self.n]
    }

    fn recompute_basics(&mut self) {
        for r in 0..self.m {
            let row = &self.t[r * self.n..(r + 1) * self.n];
            let v: f64 = row.iter().zip(&self.nonbasic).map(|(a, &j)| a * self.value[j]).sum();
            self.value[self.basis[r]] = v;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let mut d: Vec<f64> = self.nonbasic.iter().map(|&j| self.cost[j]).collect();
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                for (dc, a) in d.iter_mut().zip(self.row(r)) {
                    *dc += cb * a;
                }
            }
        }
        self.d = d;
    }

    /// Fixes variable `j` to `v` (both bounds), shifting basics if nonbasic.
    pub(crate) fn fix_var(&mut self, j: usize, v: f64) {
        self.lower[j] = v;
        self.upper[j] = v;
        if let Pos::Nonbasic(c) = self.pos[j] {
            let delta = v - self.value[j];
            if delta != 0.0 {
                self.value[j] = v;
                for r in 0..self.m {
                    let a = self.t[r * self.n + c];
                    if a != 0.0 {
                        self.value[self.basis[r]] += a * delta;
                    }
                }
            }
        }
    }

    fn violation(&self, j: usize) -> f64 {
        let x = self.value[j];
        (self.lower[j] - x).max(x - self.upper[j]).max(0.0)
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().all(|&j| self.violation(j) <= PRIMAL_TOL)
    }

    fn can_increase(&self, j: usize) -> bool {
        self.value[j] < self.upper[j] - PRIMAL_TOL
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.value[j] > self.lower[j] + PRIMAL_TOL
    }

    fn dual_feasible(&self) -> bool {
        self.nonbasic.iter().zip(&self.d).all(|(&j, &dc)| {
            if self.lower[j] == self.upper[j] {
                return true;
            }
            !(dc < -DUAL_TOL && self.can_increase(j) || dc > DUAL_TOL && self.can_decrease(j))
        })
    }

    /// Exchange pivot: basic of row `r` leaves, nonbasic of column `c` enters.
    fn pivot(&mut self, r: usize, c: usize) {
        let n = self.n;
        let piv = self.t[r * n + c];
        let inv = 1.0 / piv;
        let mut prow: Vec<f64> = self.row(r).iter().map(|a| -a * inv).collect();
        prow[c] = inv;
        for (i, chunk) in self.t.chunks_exact_mut(n).enumerate() {
            if i == r {
                continue;
            }
            let f = chunk[c];
            if f.abs() <= DROP_TOL {
                chunk[c] = 0.0;
                continue;
            }
            chunk[c] = 0.0;
            for (a, p) in chunk.iter_mut().zip(&prow) {
                *a += f * p;
            }
        }
        let f = self.d[c];
        self.d[c] = 0.0;
        if f != 0.0 {
            for (a, p) in self.d.iter_mut().zip(&prow) {
                *a += f * p;
            }
        }
        self.t[r * n..(r + 1) * n].copy_from_slice(&prow);
        let p = self.basis[r];
        let q = self.nonbasic[c];
        self.basis[r] = q;
        self.nonbasic[c] = p;
        self.pos[q] = Pos::Basic(r);
        self.pos[p] = Pos::Nonbasic(c);
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Moves nonbasic column `c` by `step`, updating every basic value.
    fn shift_nonbasic(&mut self, c: usize, step: f64) {
        if step == 0.0 {
            return;
        }
        let q = self.nonbasic[c];
        self.value[q] += step;
        for r in 0..self.m {
            let a = self.t[r * self.n + c];
            if a != 0.0 {
                self.value[self.basis[r]] += a * step;
            }
        }
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.m + self.n) + 10_000
    }

    fn out_of_time(&self, deadline: Option<Instant>) -> bool {
        self.iterations % 32 == 0 && deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Primal simplex: composite phase 1 while any basic is out of bounds,
    /// then phase 2 on the true costs.
    fn primal(&mut self, deadline: Option<Instant>) -> Phase {
        let start = self.iterations;
        let mut degenerate = 0usize;
        let mut weights = vec![0.0; self.m];
        let mut g = vec![0.0; self.n];
        loop {
            if self.iterations - start > self.iteration_cap() || self.out_of_time(deadline) {
                return Phase::Limit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let mut infeasible = false;
            for (r, w) in weights.iter_mut().enumerate() {
                let j = self.basis[r];
                *w = if self.value[j] < self.lower[j] - PRIMAL_TOL {
                    infeasible = true;
                    -1.0
                } else if self.value[j] > self.upper[j] + PRIMAL_TOL {
                    infeasible = true;
                    1.0
                } else {
                    0.0
                };
            }
            if infeasible {
                g.iter_mut().for_each(|v| *v = 0.0);
                for (r, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        for (gc, a) in g.iter_mut().zip(self.row(r)) {
                            *gc += w * a;
                        }
                    }
                }
            } else {
                g.copy_from_slice(&self.d);
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64, f64)> = None;
            for c in 0..self.n {
                let j = self.nonbasic[c];
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                let dir = if g[c] < -DUAL_TOL && self.can_increase(j) {
                    1.0
                } else if g[c] > DUAL_TOL && self.can_decrease(j) {
                    -1.0
                } else {
                    continue;
                };
                let better = match entering {
                    None => true,
                    Some((bc, _, score)) => {
                        if bland {
                            j < self.nonbasic[bc]
                        } else {
                            g[c].abs() > score
                        }
                    }
                };
                if better {
                    entering = Some((c, dir, g[c].abs()));
                }
            }
            let Some((c, dir, _)) = entering else {
                return if infeasible { Phase::Infeasible } else { Phase::Done };
            };
            let q = self.nonbasic[c];
            let range = self.upper[q] - self.lower[q];

            // Harris pass 1: largest step with bounds relaxed by the tolerance.
            let mut theta_max = f64::INFINITY;
            for r in 0..self.m {
                let alpha = self.t[r * self.n + c] * dir;
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.basis[r];
                let x = self.value[j];
                let (l, u) = (self.lower[j], self.upper[j]);
                let ratio = if x < l - PRIMAL_TOL {
                    if alpha > 0.0 { (l - x) / alpha } else { continue }
                } else if x > u + PRIMAL_TOL {
                    if alpha < 0.0 { (u - x) / alpha } else { continue }
                } else if alpha > 0.0 {
                    if bland { (u - x) / alpha } else { (u + PRIMAL_TOL - x) / alpha }
                } else if bland {
                    (l - x) / alpha
                } else {
                    (l - PRIMAL_TOL - x) / alpha
                };
                if ratio < theta_max {
                    theta_max = ratio;
                }
            }
            // Pass 2: among rows blocking within theta_max, take the largest pivot.
            let mut leave: Option<(usize, f64, f64, f64)> = None; // (row, step, |alpha|, bound)
            if theta_max.is_finite() {
                for r in 0..self.m {
                    let alpha = self.t[r * self.n + c] * dir;
                    if alpha.abs() < PIVOT_TOL {
                        continue;
                    }
                    let j = self.basis[r];
                    let x = self.value[j];
                    let (l, u) = (self.lower[j], self.upper[j]);
                    let bound = if x < l - PRIMAL_TOL {
                        if alpha > 0.0 { l } else { continue }
                    } else if x > u + PRIMAL_TOL {
                        if alpha < 0.0 { u } else { continue }
                    } else if alpha > 0.0 {
                        u
                    } else {
                        l
                    };
                    if !bound.is_finite() {
                        continue;
                    }
                    let ratio = ((bound - x) / alpha).max(0.0);
                    if ratio <= theta_max {
                        let take = match leave {
                            None => true,
                            Some((br, bstep, ba, _)) => {
                                if bland {
                                    ratio < bstep || (ratio == bstep && j < self.basis[br])
                                } else {
                                    alpha.abs() > ba
                                }
                            }
                        };
                        if take {
                            leave = Some((r, ratio, alpha.abs(), bound));
                        }
                    }
                }
            }
            let flip = range.is_finite() && leave.is_none_or(|(_, step, _, _)| range <= step);
            if flip {
                self.shift_nonbasic(c, dir * range);
                // snap to the opposite bound exactly
                self.value[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                self.iterations += 1;
                degenerate = 0;
                continue;
            }
            let Some((r, step, _, bound)) = leave else {
                return if infeasible { Phase::Limit } else { Phase::Unbounded };
            };
            if step <= 1e-11 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let p = self.basis[r];
            self.shift_nonbasic(c, dir * step);
            self.value[p] = bound;
            self.pivot(r, c);
        }
    }

    /// Dual simplex from a dual-feasible basis.
    fn dual(&mut self, deadline: Option<Instant>) -> Phase {
        let start = self.iterations;
        loop {
            if self.iterations - start > self.iteration_cap() || self.out_of_time(deadline) {
                return Phase::Limit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let v = self.violation(self.basis[r]);
                if v > PRIMAL_TOL && leave.is_none_or(|(_, best)| v > best) {
                    leave = Some((r, v));
                }
            }
            let Some((r, _)) = leave else {
                return Phase::Done;
            };
            let p = self.basis[r];
            let target = if self.value[p] < self.lower[p] { self.lower[p] } else { self.upper[p] };
            let delta = target - self.value[p];

            let mut bound = f64::INFINITY;
            for c in 0..self.n {
                let a = self.t[r * self.n + c];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.nonbasic[c];
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                let increase = (delta > 0.0) == (a > 0.0);
                let eff = if increase {
                    if !self.can_increase(j) {
                        continue;
                    }
                    self.d[c].max(0.0)
                } else {
                    if !self.can_decrease(j) {
                        continue;
                    }
                    (-self.d[c]).max(0.0)
                };
                bound = bound.min((eff + DUAL_TOL) / a.abs());
            }
            if !bound.is_finite() {
                return Phase::Infeasible;
            }
            let mut enter: Option<(usize, f64)> = None;
            for c in 0..self.n {
                let a = self.t[r * self.n + c];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.nonbasic[c];
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                let increase = (delta > 0.0) == (a > 0.0);
                let eff = if increase {
                    if !self.can_increase(j) {
                        continue;
                    }
                    self.d[c].max(0.0)
                } else {
                    if !self.can_decrease(j) {
                        continue;
                    }
                    (-self.d[c]).max(0.0)
                };
                if eff / a.abs() <= bound && enter.is_none_or(|(_, best)| a.abs() > best) {
                    enter = Some((c, a.abs()));
                }
            }
            let (c, _) = enter.expect("bound is finite so some column qualifies");
            let step = delta / self.t[r * self.n + c];
            self.shift_nonbasic(c, step);
            self.value[p] = target;
            self.pivot(r, c);
        }
    }

    /// Largest mismatch between row activities and logical values, plus
    /// structural bound violations.
    fn residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * self.value[j]).sum();
            worst = worst.max((act - self.value[self.n + i]).abs());
        }
        worst
    }

    /// Rebuilds `T`, the basic values and the reduced costs from the original
    /// rows for the current basis. Returns false if the basis matrix is
    /// numerically singular (the tableau is then left untouched).
    fn refactor(&mut self) -> bool {
        self.since_refactor = 0;
        let n = self.n;
        let s_basic: Vec<(usize, usize)> =
            (0..self.m).filter(|&r| self.basis[r] < n).map(|r| (r, self.basis[r])).collect();
        let l_nonbasic: Vec<(usize, usize)> =
            (0..n).filter(|&c| self.nonbasic[c] >= n).map(|c| (c, self.nonbasic[c] - n)).collect();
        let k = s_basic.len();
        debug_assert_eq!(k, l_nonbasic.len());
        // structural id -> position in S
        let mut s_index = vec![usize::MAX; n];
        for (b, &(_, j)) in s_basic.iter().enumerate() {
            s_index[j] = b;
        }
        let mut new_t = vec![0.0; self.m * n];
        if k > 0 {
            let mut kmat = vec![0.0; k * k];
            for (a, &(_, i)) in l_nonbasic.iter().enumerate() {
                for &(j, v) in &self.rows[i] {
                    if s_index[j] != usize::MAX {
                        kmat[a * k + s_index[j]] = v;
                    }
                }
            }
            let Some(lu) = Lu::factor(kmat, k, 1e-13) else {
                return false;
            };
            let kinv = lu.inverse();
            // G = Kinv · A_{L,NS}, stored per tableau column c (only NS columns used).
            let mut g = vec![0.0; k * n];
            for (a, &(_, i)) in l_nonbasic.iter().enumerate() {
                for &(j, v) in &self.rows[i] {
                    if let Pos::Nonbasic(c) = self.pos[j] {
                        for b in 0..k {
                            g[b * n + c] += kinv[b * k + a] * v;
                        }
                    }
                }
            }
            // basic structural rows
            for (b, &(r, _)) in s_basic.iter().enumerate() {
                let row = &mut new_t[r * n..(r + 1) * n];
                for c in 0..n {
                    if self.nonbasic[c] < n {
                        row[c] = -g[b * n + c];
                    }
                }
                for (a, &(c, _)) in l_nonbasic.iter().enumerate() {
                    row[c] = kinv[b * k + a];
                }
            }
            // basic logical rows: s_i = (A_iS Kinv) s_L + (A_iNS - A_iS G) x_NS
            for r in 0..self.m {
                let p = self.basis[r];
                if p < n {
                    continue;
                }
                let row_i = &self.rows[p - n];
                let out = &mut new_t[r * n..(r + 1) * n];
                for &(j, v) in row_i {
                    match self.pos[j] {
                        Pos::Nonbasic(c) => out[c] += v,
                        Pos::Basic(_) => {
                            let b = s_index[j];
                            for c in 0..n {
                                if self.nonbasic[c] < n {
                                    out[c] -= v * g[b * n + c];
                                }
                            }
                            for (a, &(c, _)) in l_nonbasic.iter().enumerate() {
                                out[c] += v * kinv[b * k + a];
                            }
                        }
                    }
                }
            }
        } else {
            for r in 0..self.m {
                let i = self.basis[r] - n;
                for &(j, v) in &self.rows[i] {
                    if let Pos::Nonbasic(c) = self.pos[j] {
                        new_t[r * n + c] = v;
                    }
                }
            }
        }
        self.t = new_t;
        self.recompute_basics();
        self.recompute_reduced_costs();
        true
    }

    /// Re-optimizes from the current basis.
    pub(crate) fn optimize(&mut self, deadline: Option<Instant>) -> LpStatus {
        let mut status = self.optimize_once(deadline);
        if status == LpStatus::Optimal && self.residual() > 1e-9 && self.refactor() {
            status = self.optimize_once(deadline);
        }
        // a ray found on a drifted tableau is usually a rounding artefact
        if status == LpStatus::Unbounded && self.refactor() {
            status = self.optimize_once(deadline);
        }
        status
    }

    fn optimize_once(&mut self, deadline: Option<Instant>) -> LpStatus {
        let phase = if self.primal_feasible() {
            self.primal(deadline)
        } else if self.dual_feasible() {
            match self.dual(deadline) {
                Phase::Done => self.primal(deadline),
                Phase::Infeasible if self.since_refactor > 0 => {
                    // confirm on a clean tableau before declaring infeasibility
                    if self.refactor() && !self.primal_feasible() && self.dual_feasible() {
                        match self.dual(deadline) {
                            Phase::Done => self.primal(deadline),
                            other => other,
                        }
                    } else {
                        self.primal(deadline)
                    }
                }
                Phase::Limit if deadline.is_some_and(|d| Instant::now() >= d) => Phase::Limit,
                Phase::Limit => self.primal(deadline),
                other => other,
            }
        } else {
            self.primal(deadline)
        };
        match phase {
            Phase::Done => LpStatus::Optimal,
            Phase::Infeasible => LpStatus::Infeasible,
            Phase::Unbounded => LpStatus::Unbounded,
            Phase::Limit => LpStatus::Limit,
        }
    }
}
