//! CPLEX LP-format writer.
//!
//! Output is fully determined by the model: sections appear in the order
//! `Minimize`, `Subject To`, `Bounds`, `Binaries`, `End`; variables and rows
//! are written in id order and every number is printed with up to 17
//! significant digits.

use std::fmt::Write;

use crate::model::{MilpModel, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

/// Formats `v` like C's `%.17g`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-5..17).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                out.push_str(digits);
                out.extend(std::iter::repeat_n('0', int_len - digits.len()));
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        } else {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(digits);
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        let _ = write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    out
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(VarId, f64)]) {
    for (k, &(v, a)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = &model.variable(v).name;
        let sign = if a < 0.0 { "-" } else { "+" };
        let mag = a.abs();
        if k == 0 && sign == "+" {
            if mag == 1.0 {
                let _ = write!(out, " {name}");
            } else {
                let _ = write!(out, " {} {name}", format_g17(mag));
            }
        } else if mag == 1.0 {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {} {name}", format_g17(mag));
        }
    }
}

/// Renders `model` as CPLEX LP text.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ generated by milp\n");
    out.push_str("Minimize\n obj:");
    let obj = model.objective();
    if obj.terms.is_empty() && obj.constant == 0.0 {
        out.push_str(" 0");
    } else {
        write_terms(&mut out, model, &obj.terms);
        if obj.constant != 0.0 {
            let sign = if obj.constant < 0.0 { "-" } else { "+" };
            if obj.terms.is_empty() && obj.constant > 0.0 {
                let _ = write!(out, " {}", format_g17(obj.constant));
            } else {
                let _ = write!(out, " {sign} {}", format_g17(obj.constant.abs()));
            }
        }
    }
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        if c.terms.is_empty() {
            // LP files cannot express an empty row; anchor it on the first variable.
            if let Some(v) = model.variables().first() {
                let _ = write!(out, " 0 {}", v.name);
            }
        }
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.cmp, format_g17(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables() {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        let line = match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => format!(" {} free", v.name),
            (true, false) => format!(" {} >= {}", v.name, format_g17(v.lower)),
            (false, true) => format!(" -inf <= {} <= {}", v.name, format_g17(v.upper)),
            (true, true) if v.lower == v.upper => format!(" {} = {}", v.name, format_g17(v.lower)),
            (true, true) => format!(" {} <= {} <= {}", format_g17(v.lower), v.name, format_g17(v.upper)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    let binaries: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            out.push(' ');
            out.push_str(&chunk.join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}
