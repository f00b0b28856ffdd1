use milp::{solve_lp, solve_milp, Comparator, LpStatus, MilpModel, SolveStatus, SolverParams, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight() -> SolverParams {
    SolverParams { rel_gap: 1e-9, ..Default::default() }
}

/// Random model over `nb` binaries with absolute-value envelopes
/// `y_k >= ±(a_k·x + b_k)` and a few knapsack rows on the binaries.
struct RandomInstance {
    model: MilpModel,
    nb: usize,
    cost: Vec<f64>,
    envelopes: Vec<(Vec<f64>, f64)>,
    rows: Vec<(Vec<f64>, Comparator, f64)>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> RandomInstance {
    let nb = rng.gen_range(1..=12);
    let mut model = MilpModel::new();
    let xs: Vec<VarId> = (0..nb).map(|i| model.add_binary(format!("x{i}")).unwrap()).collect();
    let cost: Vec<f64> = (0..nb).map(|_| rng.gen_range(-2.0..3.0)).collect();
    let n_env = rng.gen_range(0..4);
    let mut envelopes = Vec::new();
    let mut obj: Vec<(VarId, f64)> = xs.iter().zip(&cost).map(|(&x, &c)| (x, c)).collect();
    for k in 0..n_env {
        let a: Vec<f64> = (0..nb).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let y = model.add_continuous(format!("y{k}"), 0.0, f64::INFINITY).unwrap();
        let mut up: Vec<(VarId, f64)> = xs.iter().zip(&a).map(|(&x, &c)| (x, c)).collect();
        up.push((y, -1.0));
        model.add_constraint(&up, Comparator::Le, -b).unwrap();
        let mut lo: Vec<(VarId, f64)> = xs.iter().zip(&a).map(|(&x, &c)| (x, -c)).collect();
        lo.push((y, -1.0));
        model.add_constraint(&lo, Comparator::Le, b).unwrap();
        obj.push((y, 1.0));
        envelopes.push((a, b));
    }
    let mut rows = Vec::new();
    for _ in 0..rng.gen_range(1..4) {
        let a: Vec<f64> = (0..nb).map(|_| rng.gen_range(-1.0..3.0_f64).round()).collect();
        let cmp = match rng.gen_range(0..3) {
            0 => Comparator::Le,
            1 => Comparator::Ge,
            _ => Comparator::Le,
        };
        let rhs = rng.gen_range(-1.0..4.0_f64).round() + 0.5 * rng.gen_range(0..2) as f64;
        let terms: Vec<(VarId, f64)> = xs.iter().zip(&a).map(|(&x, &c)| (x, c)).collect();
        model.add_constraint(&terms, cmp, rhs).unwrap();
        rows.push((a, cmp, rhs));
    }
    model.set_objective(&obj, rng.gen_range(-1.0..1.0)).unwrap();
    RandomInstance { model, nb, cost, envelopes, rows }
}

fn enumerate(inst: &RandomInstance) -> Option<f64> {
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << inst.nb) {
        let x: Vec<f64> = (0..inst.nb).map(|i| ((mask >> i) & 1) as f64).collect();
        let ok = inst.rows.iter().all(|(a, cmp, rhs)| {
            let lhs: f64 = a.iter().zip(&x).map(|(a, x)| a * x).sum();
            match cmp {
                Comparator::Le => lhs <= rhs + 1e-9,
                Comparator::Ge => lhs >= rhs - 1e-9,
                Comparator::Eq => (lhs - rhs).abs() <= 1e-9,
            }
        });
        if !ok {
            continue;
        }
        let mut v: f64 = inst.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
        for (a, b) in &inst.envelopes {
            v += (a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() + b).abs();
        }
        v += inst.model.objective().constant;
        if best.is_none_or(|b| v < b) {
            best = Some(v);
        }
    }
    best
}

#[test]
fn random_small_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..300 {
        let inst = random_instance(&mut rng);
        let sol = solve_milp(&inst.model, &tight());
        match enumerate(&inst) {
            None => assert_eq!(sol.status, SolveStatus::Infeasible, "case {case}"),
            Some(best) => {
                assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
                assert!((sol.objective - best).abs() < 1e-7, "case {case}: {} vs {best}", sol.objective);
                let ev = inst.model.evaluate(&sol.assignment).unwrap();
                assert!(ev.feasible, "case {case}: violation {}", ev.worst_violation);
                assert!(sol.gap() >= 0.0);
            }
        }
    }
}

#[test]
fn knapsack_five_items() {
    // max 10a + 13b + 7c + 8d + 4e  s.t. 3a + 4b + 2c + 3d + 1e <= 7
    let values = [10.0, 13.0, 7.0, 8.0, 4.0];
    let weights = [3.0, 4.0, 2.0, 3.0, 1.0];
    let mut m = MilpModel::new();
    let xs: Vec<VarId> = (0..5).map(|i| m.add_binary(format!("k{i}")).unwrap()).collect();
    let row: Vec<_> = xs.iter().zip(&weights).map(|(&x, &w)| (x, w)).collect();
    m.add_constraint(&row, Comparator::Le, 7.0).unwrap();
    let obj: Vec<_> = xs.iter().zip(&values).map(|(&x, &v)| (x, -v)).collect();
    m.set_objective(&obj, 0.0).unwrap();
    let mut best = f64::INFINITY;
    for mask in 0..32u32 {
        let w: f64 = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
        if w <= 7.0 {
            let v: f64 = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| -values[i]).sum();
            best = best.min(v);
        }
    }
    let sol = solve_milp(&m, &tight());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.objective, best);
    assert_eq!(best, -24.0);
}

#[test]
fn deterministic_node_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let a = solve_milp(&inst.model, &tight());
        let b = solve_milp(&inst.model, &tight());
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.lp_iterations, b.lp_iterations);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.status, b.status);
    }
}

#[test]
fn tiny_time_limit_reports_status_contract() {
    // A set-partitioning style model big enough that 1 ms cannot finish it.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = MilpModel::new();
    let n = 60;
    let xs: Vec<VarId> = (0..n).map(|i| m.add_binary(format!("x{i}")).unwrap()).collect();
    for r in 0..40 {
        let row: Vec<_> = xs.iter().map(|&x| (x, rng.gen_range(1..20) as f64)).collect();
        m.add_named_constraint(format!("r{r}"), &row, Comparator::Ge, 97.5).unwrap();
    }
    let obj: Vec<_> = xs.iter().map(|&x| (x, rng.gen_range(1..30) as f64)).collect();
    m.set_objective(&obj, 0.0).unwrap();
    let sol = solve_milp(&m, &SolverParams::default().with_time_limit(0.001));
    match sol.status {
        SolveStatus::FeasibleTimeLimit => assert!(m.evaluate(&sol.assignment).unwrap().feasible),
        SolveStatus::NoSolutionTimeLimit => assert!(sol.assignment.is_empty()),
        SolveStatus::Optimal => assert!(m.evaluate(&sol.assignment).unwrap().feasible),
        other => panic!("unexpected status {other}"),
    }
}

/// Vertex enumeration for 2-variable LPs with box bounds.
fn lp2_oracle(rows: &[([f64; 2], Comparator, f64)], bounds: [(f64, f64); 2], c: [f64; 2]) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = rows.iter().map(|(a, _, b)| (*a, *b)).collect();
    lines.push(([1.0, 0.0], bounds[0].0));
    lines.push(([1.0, 0.0], bounds[0].1));
    lines.push(([0.0, 1.0], bounds[1].0));
    lines.push(([0.0, 1.0], bounds[1].1));
    let feasible = |p: [f64; 2]| {
        (0..2).all(|k| p[k] >= bounds[k].0 - 1e-9 && p[k] <= bounds[k].1 + 1e-9)
            && rows.iter().all(|(a, cmp, b)| {
                let v = a[0] * p[0] + a[1] * p[1];
                match cmp {
                    Comparator::Le => v <= b + 1e-9,
                    Comparator::Ge => v >= b - 1e-9,
                    Comparator::Eq => (v - b).abs() <= 1e-9,
                }
            })
    };
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a, b) = (lines[i], lines[j]);
            let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let p = [(a.1 * b.0[1] - a.0[1] * b.1) / det, (a.0[0] * b.1 - a.1 * b.0[0]) / det];
            if feasible(p) {
                let v = c[0] * p[0] + c[1] * p[1];
                if best.is_none_or(|bv| v < bv) {
                    best = Some(v);
                }
            }
        }
    }
    best
}

#[test]
fn random_two_variable_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..500 {
        let bounds = [(rng.gen_range(-3.0..0.0), rng.gen_range(0.5..4.0)), (rng.gen_range(-3.0..0.0), rng.gen_range(0.5..4.0))];
        let c = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", bounds[0].0, bounds[0].1).unwrap();
        let y = m.add_continuous("y", bounds[1].0, bounds[1].1).unwrap();
        let mut rows = Vec::new();
        for _ in 0..rng.gen_range(1..6) {
            let a = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let cmp = if rng.gen_bool(0.5) { Comparator::Le } else { Comparator::Ge };
            let b = rng.gen_range(-2.0..2.0);
            m.add_constraint(&[(x, a[0]), (y, a[1])], cmp, b).unwrap();
            rows.push((a, cmp, b));
        }
        m.set_objective(&[(x, c[0]), (y, c[1])], 0.0).unwrap();
        let sol = solve_lp(&m);
        match lp2_oracle(&rows, bounds, c) {
            None => assert_eq!(sol.status, LpStatus::Infeasible, "case {case}"),
            Some(v) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.objective - v).abs() < 1e-8, "case {case}: {} vs {v}", sol.objective);
            }
        }
    }
}
