//! Exports random models, re-parses the LP text with an independent reader
//! and checks that both models have the same optimum.

use std::collections::HashMap;

use milp::{export_lp, solve_milp, Comparator, MilpModel, SolveStatus, SolverParams, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parses `[+|-] [coef] name ...` followed by an optional trailing constant.
fn parse_terms(tokens: &[&str]) -> (Vec<(String, f64)>, f64) {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    if let Some(c) = coef {
                        constant += sign * c;
                        sign = 1.0;
                    }
                    coef = Some(v);
                } else {
                    terms.push((tok.to_string(), sign * coef.unwrap_or(1.0)));
                    coef = None;
                    sign = 1.0;
                }
            }
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    (terms, constant)
}

fn parse_lp(text: &str) -> MilpModel {
    let mut section = "";
    let mut statements: HashMap<&str, Vec<String>> = HashMap::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('\\') || trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "Minimize" | "Subject To" | "Bounds" | "Binaries" | "End" => {
                section = match trimmed {
                    "Minimize" => "obj",
                    "Subject To" => "st",
                    "Bounds" => "bounds",
                    "Binaries" => "bin",
                    _ => "end",
                };
                continue;
            }
            _ => {}
        }
        let list = statements.entry(section).or_default();
        if line.starts_with("   ") && !list.is_empty() {
            let last = list.last_mut().unwrap();
            last.push(' ');
            last.push_str(trimmed);
        } else {
            list.push(trimmed.to_string());
        }
    }
    let mut names: Vec<String> = Vec::new();
    let mut bounds: HashMap<String, (f64, f64)> = HashMap::new();
    let mut binaries: Vec<String> = Vec::new();
    let note = |n: &str, names: &mut Vec<String>| {
        if !names.iter().any(|x| x == n) {
            names.push(n.to_string());
        }
    };
    let parse_num = |t: &str| -> f64 {
        match t {
            "inf" | "+inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            _ => t.parse().unwrap(),
        }
    };
    for s in statements.get("bin").into_iter().flatten() {
        for n in s.split_whitespace() {
            binaries.push(n.to_string());
            note(n, &mut names);
        }
    }
    for s in statements.get("bounds").into_iter().flatten() {
        let t: Vec<&str> = s.split_whitespace().collect();
        let (name, lo, up) = match t.as_slice() {
            [n, "free"] => (*n, f64::NEG_INFINITY, f64::INFINITY),
            [n, ">=", v] => (*n, parse_num(v), f64::INFINITY),
            [n, "=", v] => (*n, parse_num(v), parse_num(v)),
            [l, "<=", n, "<=", u] => (*n, parse_num(l), parse_num(u)),
            other => panic!("bad bound {other:?}"),
        };
        note(name, &mut names);
        bounds.insert(name.to_string(), (lo, up));
    }
    let mut rows = Vec::new();
    for s in statements.get("st").into_iter().flatten() {
        let (name, rest) = s.split_once(':').unwrap();
        let t: Vec<&str> = rest.split_whitespace().collect();
        let k = t.iter().position(|x| matches!(*x, "<=" | ">=" | "=")).unwrap();
        let (terms, _) = parse_terms(&t[..k]);
        for (n, _) in &terms {
            note(n, &mut names);
        }
        let cmp = match t[k] {
            "<=" => Comparator::Le,
            ">=" => Comparator::Ge,
            _ => Comparator::Eq,
        };
        rows.push((name.to_string(), terms, cmp, parse_num(t[k + 1])));
    }
    let obj_stmt = &statements["obj"][0];
    let (_, obj_rest) = obj_stmt.split_once(':').unwrap();
    let t: Vec<&str> = obj_rest.split_whitespace().collect();
    let (obj_terms, constant) = parse_terms(&t);
    for (n, _) in &obj_terms {
        note(n, &mut names);
    }
    let mut model = MilpModel::new();
    let mut ids: HashMap<String, VarId> = HashMap::new();
    for n in &names {
        let id = if binaries.contains(n) {
            model.add_binary(n.clone()).unwrap()
        } else {
            let (lo, up) = bounds.get(n).copied().unwrap_or((0.0, f64::INFINITY));
            model.add_continuous(n.clone(), lo, up).unwrap()
        };
        ids.insert(n.clone(), id);
    }
    for (name, terms, cmp, rhs) in rows {
        let r: Vec<_> = terms.iter().map(|(n, a)| (ids[n], *a)).collect();
        model.add_named_constraint(name, &r, cmp, rhs).unwrap();
    }
    let o: Vec<_> = obj_terms.iter().map(|(n, a)| (ids[n], *a)).collect();
    model.set_objective(&o, constant).unwrap();
    model
}

fn random_model(rng: &mut ChaCha8Rng) -> MilpModel {
    let mut m = MilpModel::new();
    let nb = rng.gen_range(1..8);
    let nc = rng.gen_range(0..4);
    let mut vars = Vec::new();
    for i in 0..nb {
        vars.push(m.add_binary(format!("b{i}")).unwrap());
    }
    for i in 0..nc {
        vars.push(m.add_continuous(format!("z_{i}"), rng.gen_range(-2.0..0.0), rng.gen_range(0.1..3.0)).unwrap());
    }
    for _ in 0..rng.gen_range(1..15) {
        let mut row = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.6) {
                row.push((v, rng.gen_range(-3.0..3.0)));
            }
        }
        let cmp = [Comparator::Le, Comparator::Ge, Comparator::Le][rng.gen_range(0..3)];
        m.add_constraint(&row, cmp, rng.gen_range(-1.0..2.0)).unwrap();
    }
    let obj: Vec<_> = vars.iter().map(|&v| (v, rng.gen_range(-1.0..1.0) / 3.0)).collect();
    m.set_objective(&obj, rng.gen_range(-5.0..5.0)).unwrap();
    m
}

#[test]
fn export_then_reparse_preserves_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = SolverParams { rel_gap: 1e-9, ..Default::default() };
    for case in 0..150 {
        let m = random_model(&mut rng);
        let text = export_lp(&m);
        let back = parse_lp(&text);
        assert_eq!(back.num_vars(), m.num_vars(), "case {case}");
        assert_eq!(back.num_constraints(), m.num_constraints(), "case {case}");
        let a = solve_milp(&m, &params);
        let b = solve_milp(&back, &params);
        assert_eq!(a.status, b.status, "case {case}");
        if a.status == SolveStatus::Optimal {
            assert!((a.objective - b.objective).abs() < 1e-9, "case {case}");
        }
        // the reparsed model exports to the same text
        assert_eq!(export_lp(&back), text, "case {case}");
    }
}

#[test]
fn long_rows_wrap_and_reparse() {
    let mut m = MilpModel::new();
    let vars: Vec<_> = (0..30).map(|i| m.add_binary(format!("p{i}")).unwrap()).collect();
    let row: Vec<_> = vars.iter().map(|&v| (v, 0.1)).collect();
    m.add_constraint(&row, Comparator::Ge, 0.25).unwrap();
    m.set_objective(&row, 0.0).unwrap();
    let text = export_lp(&m);
    assert!(text.lines().all(|l| l.len() < 255));
    let back = parse_lp(&text);
    assert_eq!(back.constraints()[0].terms.len(), 30);
}
