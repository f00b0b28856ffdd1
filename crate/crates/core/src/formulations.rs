//! Builds the counterfactual MILP: the ℓ1-Mahalanobis plus 1-LOF cost, the
//! nearest-neighbour selection (pairwise or big-M), and validity rows for
//! each classifier family. Solutions are decoded back into actions.

use std::collections::BTreeMap;
use std::time::Instant;

use milp::{solve_milp, Comparator, MilpModel, SolveStatus, SolverParams, VarId};
use serde::{Deserialize, Serialize};

use crate::actionspace::{ActionSpace, MilpConstants};
use crate::classifiers::{Classifier, Forest, LinearKind};
use crate::data::{FeatureKind, StandardScaler};
use crate::error::{Error, Result};
use crate::stats::{LofContext, MahalanobisContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// One row per ordered pair of reference points.
    Original,
    /// Two big-M rows per reference point around a shared distance variable.
    Reduced,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Original => "original",
            Formulation::Reduced => "reduced",
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Formulation::Original),
            "reduced" => Ok(Formulation::Reduced),
            _ => Err(Error::InvalidParameter(format!("unknown formulation `{s}` (expected original|reduced)"))),
        }
    }
}

/// Number of rows emitted per constraint family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    pub action_choice: usize,
    pub md_envelope: usize,
    pub nearest_sum: usize,
    pub rho_floor: usize,
    pub rho_cost: usize,
    pub max_changes: usize,
    pub nearest: usize,
    pub validity: usize,
    pub leaf_choice: usize,
    pub leaf_path: usize,
}

impl ConstraintCounts {
    pub fn total(&self) -> usize {
        self.action_choice
            + self.md_envelope
            + self.nearest_sum
            + self.rho_floor
            + self.rho_cost
            + self.max_changes
            + self.nearest
            + self.validity
            + self.leaf_choice
            + self.leaf_path
    }
}

/// Variable ids of one built model.
#[derive(Debug, Clone)]
pub struct FormulationHandles {
    /// `pi[d][i]`: candidate `i` chosen for action dimension `d`.
    pub pi: Vec<Vec<VarId>>,
    /// `mu[n]`: reference point `n` is the nearest one.
    pub mu: Vec<VarId>,
    /// `delta[k]`: `|⟨U_k, a⟩|` for encoded column `k`.
    pub delta: Vec<VarId>,
    /// `rho[n]`: reachability distance to `x⁽ⁿ⁾` when it is the nearest.
    pub rho: Vec<VarId>,
    /// Nearest distance, reduced formulation only.
    pub t: Option<VarId>,
    /// `phi[tree][leaf]` for forest validity.
    pub phi: Vec<Vec<VarId>>,
    pub formulation: Option<Formulation>,
    pub counts: ConstraintCounts,
}

/// Everything the builder needs for one rejected instance.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub classifier: &'a Classifier,
    pub mahalanobis: &'a MahalanobisContext,
    pub lof: &'a LofContext,
    pub space: &'a ActionSpace,
    pub constants: &'a MilpConstants,
    /// Weight of the 1-LOF term.
    pub lambda: f64,
    /// Validity margin: the decision value must be at least this.
    pub margin: f64,
}

fn sum_terms(terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    terms.into_iter().filter(|t| t.1 != 0.0).collect()
}

/// Adds the action choice, Mahalanobis envelope, 1-LOF rows, change budget
/// and the objective.
pub fn build_cost_common(
    model: &mut MilpModel,
    space: &ActionSpace,
    constants: &MilpConstants,
    mahalanobis: &MahalanobisContext,
    lof: &LofContext,
    lambda: f64,
) -> Result<FormulationHandles> {
    let width = space.width();
    let n_ref = lof.len();
    if mahalanobis.dim() != width {
        return Err(Error::WidthMismatch { expected: width, got: mahalanobis.dim() });
    }
    if constants.c.len() != n_ref || constants.c.iter().any(|r| r.len() != space.n_candidates()) {
        return Err(Error::WidthMismatch { expected: n_ref, got: constants.c.len() });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    let mut counts = ConstraintCounts::default();

    let mut pi = Vec::with_capacity(space.dims.len());
    for (d, dim) in space.dims.iter().enumerate() {
        let ids: Vec<VarId> =
            (0..dim.len()).map(|i| model.add_binary(format!("pi_{d}_{i}"))).collect::<std::result::Result<_, _>>()?;
        let row: Vec<(VarId, f64)> = ids.iter().map(|&v| (v, 1.0)).collect();
        model.add_named_constraint(format!("choose_{d}"), &row, Comparator::Eq, 1.0)?;
        counts.action_choice += 1;
        pi.push(ids);
    }

    // U times each candidate's displacement, column by column
    let u = mahalanobis.u();
    let mut ua: Vec<Vec<Vec<f64>>> = Vec::with_capacity(space.dims.len());
    for dim in &space.dims {
        ua.push(
            dim.candidates
                .iter()
                .map(|c| (0..width).map(|k| c.displacement.iter().map(|&(col, v)| u[(k, col)] * v).sum()).collect())
                .collect(),
        );
    }
    let mut delta = Vec::with_capacity(width);
    for k in 0..width {
        let bound: f64 = ua.iter().map(|dim| dim.iter().map(|v: &Vec<f64>| v[k].abs()).fold(0.0, f64::max)).sum();
        let dk = model.add_continuous(format!("delta_{k}"), 0.0, bound)?;
        let mut lin = Vec::new();
        for (d, dim) in ua.iter().enumerate() {
            for (i, v) in dim.iter().enumerate() {
                lin.push((pi[d][i], v[k]));
            }
        }
        let mut up = sum_terms(lin.iter().map(|&(p, c)| (p, -c)).collect());
        up.push((dk, 1.0));
        let mut lo = sum_terms(lin);
        lo.push((dk, 1.0));
        model.add_named_constraint(format!("md_pos_{k}"), &up, Comparator::Ge, 0.0)?;
        model.add_named_constraint(format!("md_neg_{k}"), &lo, Comparator::Ge, 0.0)?;
        counts.md_envelope += 2;
        delta.push(dk);
    }

    let mu: Vec<VarId> =
        (0..n_ref).map(|n| model.add_binary(format!("mu_{n}"))).collect::<std::result::Result<_, _>>()?;
    let row: Vec<(VarId, f64)> = mu.iter().map(|&v| (v, 1.0)).collect();
    model.add_named_constraint("nearest_sum", &row, Comparator::Eq, 1.0)?;
    counts.nearest_sum = 1;

    let d1 = lof.d1();
    let mut rho = Vec::with_capacity(n_ref);
    for n in 0..n_ref {
        let cn = constants.big_c[n];
        let r = model.add_continuous(format!("rho_{n}"), 0.0, d1[n].max(cn))?;
        model.add_named_constraint(format!("rho_floor_{n}"), &[(r, 1.0), (mu[n], -d1[n])], Comparator::Ge, 0.0)?;
        let mut row = vec![(r, 1.0), (mu[n], -cn)];
        for (d, ids) in pi.iter().enumerate() {
            for (i, &p) in ids.iter().enumerate() {
                row.push((p, -constants.c[n][space.flat(d, i)]));
            }
        }
        model.add_named_constraint(format!("rho_cost_{n}"), &sum_terms(row), Comparator::Ge, -cn)?;
        counts.rho_floor += 1;
        counts.rho_cost += 1;
        rho.push(r);
    }

    // Σ_d (1 − π_{d,zero}) ≤ K over dimensions that can change at all
    let movable: Vec<usize> = (0..space.dims.len()).filter(|&d| space.dims[d].len() > 1).collect();
    let row: Vec<(VarId, f64)> = movable.iter().map(|&d| (pi[d][space.dims[d].zero], -1.0)).collect();
    model.add_named_constraint(
        "max_changes",
        &row,
        Comparator::Le,
        space.max_changes as f64 - movable.len() as f64,
    )?;
    counts.max_changes = 1;

    let lrd = lof.lrd1();
    let mut obj: Vec<(VarId, f64)> = delta.iter().map(|&v| (v, 1.0)).collect();
    if lambda > 0.0 {
        obj.extend(rho.iter().zip(lrd).map(|(&v, &l)| (v, lambda * l)));
    }
    model.set_objective(&obj, 0.0)?;

    Ok(FormulationHandles { pi, mu, delta, rho, t: None, phi: Vec::new(), formulation: None, counts })
}

fn distance_terms(space: &ActionSpace, constants: &MilpConstants, handles: &FormulationHandles, n: usize, sign: f64) -> Vec<(VarId, f64)> {
    let mut row = Vec::new();
    for (d, ids) in handles.pi.iter().enumerate() {
        for (i, &p) in ids.iter().enumerate() {
            row.push((p, sign * constants.c[n][space.flat(d, i)]));
        }
    }
    row
}

/// Pairwise nearest-neighbour rows: for every ordered pair `(n, m)`,
/// `Σ (c⁽ⁿ⁾ − c⁽ᵐ⁾) π ≤ C_n (1 − μ_n)`. The `n = m` rows are kept.
pub fn add_nearest_original(
    model: &mut MilpModel,
    handles: &mut FormulationHandles,
    space: &ActionSpace,
    constants: &MilpConstants,
) -> Result<()> {
    let n_ref = handles.mu.len();
    for n in 0..n_ref {
        let cn = constants.big_c[n];
        for m in 0..n_ref {
            let mut row = Vec::new();
            for (d, ids) in handles.pi.iter().enumerate() {
                for (i, &p) in ids.iter().enumerate() {
                    let j = space.flat(d, i);
                    row.push((p, constants.c[n][j] - constants.c[m][j]));
                }
            }
            let mut row = sum_terms(row);
            row.push((handles.mu[n], cn));
            model.add_named_constraint(format!("nn_{n}_{m}"), &row, Comparator::Le, cn)?;
            handles.counts.nearest += 1;
        }
    }
    handles.formulation = Some(Formulation::Original);
    Ok(())
}

/// Big-M nearest-neighbour rows around `t ∈ [0, M]`:
/// `Σ c⁽ⁿ⁾ π − M (1 − μ_n) ≤ t` and `t ≤ Σ c⁽ⁿ⁾ π` for every `n`.
pub fn add_nearest_reduced(
    model: &mut MilpModel,
    handles: &mut FormulationHandles,
    space: &ActionSpace,
    constants: &MilpConstants,
) -> Result<()> {
    let big_m = constants.big_m;
    let t = model.add_continuous("t", 0.0, big_m)?;
    for n in 0..handles.mu.len() {
        let mut upper = sum_terms(distance_terms(space, constants, handles, n, 1.0));
        upper.push((handles.mu[n], big_m));
        upper.push((t, -1.0));
        model.add_named_constraint(format!("nn_up_{n}"), &upper, Comparator::Le, big_m)?;
        let mut lower = sum_terms(distance_terms(space, constants, handles, n, -1.0));
        lower.push((t, 1.0));
        model.add_named_constraint(format!("nn_lo_{n}"), &lower, Comparator::Le, 0.0)?;
        handles.counts.nearest += 2;
    }
    handles.t = Some(t);
    handles.formulation = Some(Formulation::Reduced);
    Ok(())
}

/// `w·(x̄ + a) + b ≥ margin` on unscaled inputs.
pub fn add_validity_linear(
    model: &mut MilpModel,
    handles: &mut FormulationHandles,
    space: &ActionSpace,
    weights: &[f64],
    intercept: f64,
    margin: f64,
) -> Result<()> {
    add_validity_scaled_svm(model, handles, space, weights, intercept, &StandardScaler::identity(space.width()), margin)
}

/// `Σ_{d,i} (w_d a_{d,i} / σ_d) π_{d,i} + w·scaled(x̄) + b ≥ margin`, using
/// `scaled(x̄ + a) = scaled(x̄) + a / σ`.
pub fn add_validity_scaled_svm(
    model: &mut MilpModel,
    handles: &mut FormulationHandles,
    space: &ActionSpace,
    weights: &[f64],
    intercept: f64,
    scaler: &StandardScaler,
    margin: f64,
) -> Result<()> {
    if weights.len() != space.width() || scaler.width() != space.width() {
        return Err(Error::WidthMismatch { expected: space.width(), got: weights.len().min(scaler.width()) });
    }
    let base: f64 = weights.iter().zip(scaler.apply(&space.x_bar)).map(|(w, z)| w * z).sum::<f64>() + intercept;
    let mut row = Vec::new();
    for (d, dim) in space.dims.iter().enumerate() {
        for (i, cand) in dim.candidates.iter().enumerate() {
            let coef: f64 = cand.displacement.iter().map(|&(c, a)| weights[c] * a / scaler.stds[c]).sum();
            row.push((handles.pi[d][i], coef));
        }
    }
    model.add_named_constraint("validity", &sum_terms(row), Comparator::Ge, margin - base)?;
    handles.counts.validity += 1;
    Ok(())
}

/// Leaf indicators per tree tied to the action choice, and
/// `Σ p φ ≥ T (0.5 + margin)`.
pub fn add_validity_forest(
    model: &mut MilpModel,
    handles: &mut FormulationHandles,
    space: &ActionSpace,
    forest: &Forest,
    margin: f64,
) -> Result<()> {
    if forest.n_features != space.width() {
        return Err(Error::WidthMismatch { expected: space.width(), got: forest.n_features });
    }
    let mut dim_of_col = vec![0; space.width()];
    for (d, dim) in space.dims.iter().enumerate() {
        for c in dim.columns.clone() {
            dim_of_col[c] = d;
        }
    }
    let mut validity = Vec::new();
    for (ti, tree) in forest.trees.iter().enumerate() {
        let mut leaf_ids = Vec::new();
        for (li, leaf) in tree.leaves().iter().enumerate() {
            let phi = model.add_binary(format!("phi_{ti}_{li}"))?;
            leaf_ids.push(phi);
            validity.push((phi, leaf.prob));
            let mut dims: Vec<usize> = leaf.conditions.iter().map(|c| dim_of_col[c.0]).collect();
            dims.sort_unstable();
            dims.dedup();
            for d in dims {
                let dim = &space.dims[d];
                let compatible: Vec<usize> = (0..dim.len())
                    .filter(|&i| {
                        leaf.conditions.iter().filter(|c| dim_of_col[c.0] == d).all(|&(col, left, thr)| {
                            let shift: f64 = dim.candidates[i].displacement.iter().filter(|e| e.0 == col).map(|e| e.1).sum();
                            let v = space.x_bar[col] + shift;
                            (v <= thr) == left
                        })
                    })
                    .collect();
                if compatible.is_empty() {
                    model.set_bounds(phi, 0.0, 0.0)?;
                } else if compatible.len() < dim.len() {
                    let mut row = vec![(phi, 1.0)];
                    row.extend(compatible.iter().map(|&i| (handles.pi[d][i], -1.0)));
                    model.add_named_constraint(format!("path_{ti}_{li}_{d}"), &row, Comparator::Le, 0.0)?;
                    handles.counts.leaf_path += 1;
                }
            }
        }
        let row: Vec<(VarId, f64)> = leaf_ids.iter().map(|&v| (v, 1.0)).collect();
        model.add_named_constraint(format!("leaf_{ti}"), &row, Comparator::Eq, 1.0)?;
        handles.counts.leaf_choice += 1;
        handles.phi.push(leaf_ids);
    }
    let rhs = forest.trees.len() as f64 * (0.5 + margin);
    model.add_named_constraint("validity", &sum_terms(validity), Comparator::Ge, rhs)?;
    handles.counts.validity += 1;
    Ok(())
}

/// Assembles the full model for `problem`.
pub fn build_model(problem: &Problem<'_>, formulation: Formulation) -> Result<(MilpModel, FormulationHandles)> {
    let Problem { classifier, mahalanobis, lof, space, constants, lambda, margin } = *problem;
    if classifier.width() != space.width() {
        return Err(Error::WidthMismatch { expected: space.width(), got: classifier.width() });
    }
    let mut model = MilpModel::new();
    let mut h = build_cost_common(&mut model, space, constants, mahalanobis, lof, lambda)?;
    match formulation {
        Formulation::Original => add_nearest_original(&mut model, &mut h, space, constants)?,
        Formulation::Reduced => add_nearest_reduced(&mut model, &mut h, space, constants)?,
    }
    match classifier {
        Classifier::Linear(m) => match (&m.scaler, m.kind) {
            (Some(s), LinearKind::Svm) => {
                add_validity_scaled_svm(&mut model, &mut h, space, &m.weights, m.intercept, s, margin)?
            }
            _ => add_validity_linear(&mut model, &mut h, space, &m.weights, m.intercept, margin)?,
        },
        Classifier::Forest(f) => add_validity_forest(&mut model, &mut h, space, f, margin)?,
    }
    Ok((model, h))
}

/// A changed feature: numeric offset or new category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionValue {
    Offset(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub formulation: Formulation,
    pub status: String,
    /// Changed features only.
    pub action: BTreeMap<String, ActionValue>,
    /// Chosen candidate index per action dimension.
    pub choice: Vec<usize>,
    pub counterfactual: Vec<f64>,
    pub objective: f64,
    /// `Σ δ` read from the solution.
    pub md_term: f64,
    /// `λ Σ lrd_1 ρ` read from the solution.
    pub lof_term: f64,
    /// `‖U a‖₁` recomputed from the decoded action.
    pub md_l1: f64,
    /// `q_1` recomputed from the decoded counterfactual.
    pub q1: f64,
    pub n_star: usize,
    /// Nearest distance `t` (reduced formulation only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub valid: bool,
    pub decision_value: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub time_s: f64,
    pub build_time_s: f64,
    pub gap: f64,
    pub constraint_counts: ConstraintCounts,
    pub total_rows: usize,
}

/// Result of [`explain`]: an explanation, or proof that no action works.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Found(Explanation),
    NoRecourse { status: SolveStatus, nodes: usize, time_s: f64, counts: ConstraintCounts },
}

impl Outcome {
    pub fn explanation(&self) -> Option<&Explanation> {
        match self {
            Outcome::Found(e) => Some(e),
            Outcome::NoRecourse { .. } => None,
        }
    }
}

/// Reads the chosen candidate of each dimension from a solution.
pub fn decode_choice(handles: &FormulationHandles, values: &[f64]) -> Vec<usize> {
    handles
        .pi
        .iter()
        .map(|ids| {
            ids.iter()
                .enumerate()
                .fold(0, |best, (i, v)| if values[v.index()] > values[ids[best].index()] { i } else { best })
        })
        .collect()
}

/// Builds and solves the MILP for the instance held by `problem.space`.
pub fn explain(problem: &Problem<'_>, formulation: Formulation, params: &SolverParams) -> Result<Outcome> {
    let space = problem.space;
    if problem.classifier.predict(&space.x_bar)? == 1 {
        return Err(Error::Precondition("instance is already accepted by the classifier".into()));
    }
    let build_start = Instant::now();
    let (model, h) = build_model(problem, formulation)?;
    let build_time_s = build_start.elapsed().as_secs_f64();
    let sol = solve_milp(&model, params);
    let time_s = sol.wall_time.as_secs_f64();
    if !sol.status.has_solution() {
        return Ok(Outcome::NoRecourse { status: sol.status, nodes: sol.nodes, time_s, counts: h.counts });
    }
    let x = &sol.assignment;
    let choice = decode_choice(&h, x);
    let counterfactual = space.counterfactual(&choice);
    let displacement = space.displacement(&choice);
    let n_star = h.mu.iter().enumerate().fold(0, |b, (n, v)| if x[v.index()] > x[h.mu[b].index()] { n } else { b });
    let md_term: f64 = h.delta.iter().map(|v| x[v.index()]).sum();
    let lof_term: f64 = problem.lambda * h.rho.iter().zip(problem.lof.lrd1()).map(|(v, l)| x[v.index()] * l).sum::<f64>();
    let decision_value = problem.classifier.decision_value(&counterfactual)?;
    let mut action = BTreeMap::new();
    for (dim, &i) in space.dims.iter().zip(&choice) {
        if i == dim.zero {
            continue;
        }
        let value = match dim.kind {
            FeatureKind::Categorical => ActionValue::Category(dim.label(i)),
            _ => ActionValue::Offset(dim.candidates[i].value),
        };
        action.insert(dim.name.clone(), value);
    }
    Ok(Outcome::Found(Explanation {
        formulation,
        status: sol.status.as_str().to_string(),
        action,
        choice,
        counterfactual: counterfactual.clone(),
        objective: sol.objective,
        md_term,
        lof_term,
        md_l1: problem.mahalanobis.l1_of(&displacement),
        q1: problem.lof.q1_surrogate(&counterfactual).1,
        n_star,
        t: h.t.map(|v| x[v.index()]),
        valid: decision_value >= 0.0,
        decision_value,
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        time_s,
        build_time_s,
        gap: sol.gap(),
        constraint_counts: h.counts,
        total_rows: model.num_constraints(),
    }))
}
