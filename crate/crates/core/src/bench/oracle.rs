use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulations::Problem;

/// Largest action space the oracle will enumerate.
pub const ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub choice: Vec<usize>,
    pub objective: f64,
    pub md_l1: f64,
    pub q1: f64,
}

/// Enumerates every action with at most `K` changes whose counterfactual is
/// accepted, and returns the minimizer of `‖U a‖₁ + λ q_1(x̄ + a)`. Ties go
/// to the lexicographically smallest choice vector.
pub fn brute_force_oracle(problem: &Problem<'_>) -> Result<Option<OracleResult>> {
    let space = problem.space;
    let size = space.size();
    if size > ENUMERATION_CAP {
        return Err(Error::EnumerationCap { size, cap: ENUMERATION_CAP });
    }
    let mut best: Option<OracleResult> = None;
    let mut failure = None;
    space.for_each_choice(|choice| {
        if failure.is_some() || space.changes(choice) > space.max_changes {
            return;
        }
        let x = space.counterfactual(choice);
        match problem.classifier.decision_value(&x) {
            Ok(v) if v >= problem.margin => {}
            Ok(_) => return,
            Err(e) => {
                failure = Some(e);
                return;
            }
        }
        let md_l1 = problem.mahalanobis.l1_of(&space.displacement(choice));
        let q1 = problem.lof.q1_surrogate(&x).1;
        let objective = md_l1 + problem.lambda * q1;
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(OracleResult { choice: choice.to_vec(), objective, md_l1, q1 });
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}
