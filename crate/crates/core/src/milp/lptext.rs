//! Plain-text serialization of MILP models (LP-style format).
//!
//! The writer emits `Minimize`, `Subject To`, `Bounds`, `Binary`, and
//! `End` sections. Coefficients use 17 significant digits (`{:.16e}`),
//! which is enough for every `f64` to survive a write/parse round trip
//! bit-exactly. Every variable gets one `Bounds` line, in variable-index
//! order, so the parser can rebuild the model with identical indices.
//! Infinite bounds print as `-inf` / `+inf`. The model name rides along
//! as a leading `\` comment line. Each constraint occupies one line.

use crate::error::Error;
use crate::Result;

use super::model::{MilpModel, Sense, VarKind};

/// Render a model as LP-format text. Fails if a name would not survive
/// tokenization (whitespace, ':', or number-like names).
pub fn export_lp_text(model: &MilpModel) -> Result<String> {
    model.validate()?;
    check_name(&model.name)?;
    for v in &model.variables {
        check_name(&v.name)?;
    }
    for c in &model.constraints {
        check_name(&c.name)?;
    }

    let mut out = String::new();
    out.push_str(&format!("\\ {}\n", model.name));
    out.push_str("Minimize\n");
    out.push_str(" obj:");
    for &(j, c) in &model.objective {
        push_term(&mut out, c, Some(&model.variables[j].name));
    }
    if model.objective_offset.to_bits() != 0.0f64.to_bits() {
        push_term(&mut out, model.objective_offset, None);
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for con in &model.constraints {
        out.push_str(&format!(" {}:", con.name));
        for &(j, c) in &con.coeffs {
            push_term(&mut out, c, Some(&model.variables[j].name));
        }
        let sense = match con.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        out.push_str(&format!(" {} {}\n", sense, fmt_num(con.rhs)));
    }

    out.push_str("Bounds\n");
    for v in &model.variables {
        out.push_str(&format!(
            " {} <= {} <= {}\n",
            fmt_bound(v.lb),
            v.name,
            fmt_bound(v.ub)
        ));
    }

    out.push_str("Binary\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary {
            out.push_str(&format!(" {}\n", v.name));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Parse LP-format text produced by [`export_lp_text`] (or hand-written
/// in the same shape) back into a model. Variables are created in the
/// order their `Bounds` lines appear, which reproduces the original
/// variable indices exactly.
pub fn parse_lp_text(text: &str) -> Result<MilpModel> {
    let mut name = String::from("parsed");
    let mut section = LpSection::Preamble;
    let mut saw_name = false;

    // Collected raw pieces; variables must exist before rows/objective
    // can be indexed, and Bounds may legally follow Subject To in
    // hand-written files, so resolve names at the end.
    let mut objective_line: Option<String> = None;
    let mut constraint_lines: Vec<String> = Vec::new();
    let mut bound_lines: Vec<String> = Vec::new();
    let mut binary_names: Vec<String> = Vec::new();

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('\\') {
            if !saw_name {
                let c = comment.trim();
                if !c.is_empty() {
                    name = c.to_string();
                    saw_name = true;
                }
            }
            continue;
        }
        match line {
            "Minimize" => {
                section = LpSection::Objective;
                continue;
            }
            "Subject To" => {
                section = LpSection::Constraints;
                continue;
            }
            "Bounds" => {
                section = LpSection::Bounds;
                continue;
            }
            "Binary" => {
                section = LpSection::Binary;
                continue;
            }
            "End" => {
                section = LpSection::Done;
                continue;
            }
            _ => {}
        }
        match section {
            LpSection::Preamble | LpSection::Done => {
                return Err(Error::parse(format!("unexpected text outside sections: {line}")));
            }
            LpSection::Objective => match &mut objective_line {
                Some(existing) => {
                    existing.push(' ');
                    existing.push_str(line);
                }
                None => objective_line = Some(line.to_string()),
            },
            LpSection::Constraints => constraint_lines.push(line.to_string()),
            LpSection::Bounds => bound_lines.push(line.to_string()),
            LpSection::Binary => {
                for tok in line.split_whitespace() {
                    binary_names.push(tok.to_string());
                }
            }
        }
    }

    let mut model = MilpModel::new(name);

    // Variables, in Bounds-line order.
    for line in &bound_lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 || toks[1] != "<=" || toks[3] != "<=" {
            return Err(Error::parse(format!("malformed bounds line: {line}")));
        }
        let lb = parse_bound(toks[0])?;
        let ub = parse_bound(toks[4])?;
        model.add_continuous(toks[2], lb, ub);
    }
    let positions: std::collections::HashMap<String, usize> = model
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.clone(), j))
        .collect();
    let index_of = move |n: &str| -> Result<usize> {
        positions
            .get(n)
            .copied()
            .ok_or_else(|| Error::parse(format!("unknown variable name: {n}")))
    };

    // Objective.
    let mut objective = Vec::new();
    let mut offset = 0.0;
    if let Some(line) = objective_line {
        let body = match line.split_once(':') {
            Some((_, b)) => b.to_string(),
            None => line,
        };
        let (terms, constant, rest) = parse_terms(&body)?;
        if !rest.is_empty() {
            return Err(Error::parse(format!(
                "unexpected trailing objective tokens: {}",
                rest.join(" ")
            )));
        }
        offset = constant;
        for (c, n) in terms {
            objective.push((index_of(&n)?, c));
        }
    }

    // Constraints.
    let mut parsed_cons = Vec::new();
    for line in &constraint_lines {
        let Some((cname, body)) = line.split_once(':') else {
            return Err(Error::parse(format!("constraint line lacks a name: {line}")));
        };
        let (terms, constant, rest) = parse_terms(body)?;
        if constant != 0.0 {
            return Err(Error::parse(format!(
                "constant term on constraint left-hand side: {line}"
            )));
        }
        if rest.len() != 2 {
            return Err(Error::parse(format!(
                "constraint needs '<sense> <rhs>' tail: {line}"
            )));
        }
        let sense = match rest[0].as_str() {
            "<=" => Sense::Le,
            ">=" => Sense::Ge,
            "=" => Sense::Eq,
            other => return Err(Error::parse(format!("unknown sense token: {other}"))),
        };
        let rhs: f64 = rest[1]
            .parse()
            .map_err(|_| Error::parse(format!("bad right-hand side: {}", rest[1])))?;
        let mut coeffs = Vec::new();
        for (c, n) in terms {
            coeffs.push((index_of(&n)?, c));
        }
        parsed_cons.push((cname.trim().to_string(), coeffs, sense, rhs));
    }
    for (cname, coeffs, sense, rhs) in parsed_cons {
        model.add_constraint(cname, coeffs, sense, rhs);
    }
    model.set_objective(objective, offset);

    for n in &binary_names {
        let j = index_of(n)?;
        model.variables[j].kind = VarKind::Binary;
    }

    model.validate()?;
    Ok(model)
}

enum LpSection {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binary,
    Done,
}

fn check_name(name: &str) -> Result<()> {
    let bad = name.is_empty()
        || name.contains(char::is_whitespace)
        || name.contains(':')
        || name.parse::<f64>().is_ok();
    if bad {
        return Err(Error::validation(format!(
            "name {name:?} cannot be serialized to LP text"
        )));
    }
    Ok(())
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        fmt_num(x)
    }
}

fn parse_bound(tok: &str) -> Result<f64> {
    match tok {
        "+inf" | "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse()
            .map_err(|_| Error::parse(format!("bad bound token: {tok}"))),
    }
}

/// Append ` {+|-} {abs} [name]` to `out`. A separate sign token keeps
/// negation exact: the parser computes `sign * abs`, and negating an
/// f64 is always bit-exact.
fn push_term(out: &mut String, c: f64, name: Option<&str>) {
    let sign = if c.is_sign_negative() { '-' } else { '+' };
    match name {
        Some(n) => out.push_str(&format!(" {} {} {}", sign, fmt_num(c.abs()), n)),
        None => out.push_str(&format!(" {} {}", sign, fmt_num(c.abs()))),
    }
}

/// Parse a run of `sign number [name]` terms. Returns the named terms,
/// the summed bare constants, and whatever tokens follow the terms
/// (the constraint sense/rhs tail, or nothing).
#[allow(clippy::type_complexity)]
fn parse_terms(body: &str) -> Result<(Vec<(f64, String)>, f64, Vec<String>)> {
    let toks: Vec<&str> = body.split_whitespace().collect();
    let mut terms = Vec::new();
    // First bare constant is assigned, not added: `0.0 + (-0.0)` would
    // lose the sign of a lone negative-zero offset.
    let mut constant: Option<f64> = None;
    let mut i = 0;
    while i < toks.len() {
        let sign = match toks[i] {
            "+" => 1.0,
            "-" => -1.0,
            _ => break,
        };
        let Some(numtok) = toks.get(i + 1) else {
            return Err(Error::parse("dangling sign at end of term list".to_string()));
        };
        let mag: f64 = numtok
            .parse()
            .map_err(|_| Error::parse(format!("bad coefficient token: {numtok}")))?;
        let value = if sign < 0.0 { -mag } else { mag };
        // A name follows unless the next token starts another term or
        // the sense/rhs tail.
        match toks.get(i + 2) {
            Some(&t) if t != "+" && t != "-" && t != "<=" && t != ">=" && t != "=" => {
                terms.push((value, t.to_string()));
                i += 3;
            }
            _ => {
                constant = Some(match constant {
                    None => value,
                    Some(c) => c + value,
                });
                i += 2;
            }
        }
    }
    let rest = toks[i..].iter().map(|s| s.to_string()).collect();
    Ok((terms, constant.unwrap_or(0.0), rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> MilpModel {
        let mut m = MilpModel::new("sample");
        let x = m.add_continuous("x", -1.5, f64::INFINITY);
        let y = m.add_continuous("y", f64::NEG_INFINITY, 2.25);
        let b = m.add_binary("b");
        m.add_constraint("c0", vec![(x, 1.0), (y, -2.5), (b, 0.125)], Sense::Le, 3.75);
        m.add_constraint("c1", vec![(y, 1.0)], Sense::Ge, -0.5);
        m.add_constraint("c2", vec![(x, 1.0), (b, 1.0)], Sense::Eq, 1.0);
        m.set_objective(vec![(x, 0.3), (b, -7.0)], 0.1);
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample_model();
        let text = export_lp_text(&m).unwrap();
        let back = parse_lp_text(&text).unwrap();
        assert_eq!(back.name, m.name);
        assert_eq!(back.num_vars(), m.num_vars());
        for (a, b) in m.variables.iter().zip(back.variables.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.lb.to_bits(), b.lb.to_bits());
            assert_eq!(a.ub.to_bits(), b.ub.to_bits());
        }
        assert_eq!(back.objective, m.objective);
        assert_eq!(back.objective_offset.to_bits(), m.objective_offset.to_bits());
        assert_eq!(back.num_constraints(), m.num_constraints());
        for (a, b) in m.constraints.iter().zip(back.constraints.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.coeffs, b.coeffs, "constraint matrix must survive");
            assert_eq!(a.sense, b.sense);
            assert_eq!(a.rhs.to_bits(), b.rhs.to_bits());
        }
    }

    #[test]
    fn round_trip_survives_awkward_values() {
        let mut m = MilpModel::new("awkward");
        let x = m.add_continuous("x", 0.1, 0.3); // not dyadic
        let y = m.add_continuous("y", -1.0 / 3.0, f64::MAX);
        m.add_constraint(
            "c0",
            vec![(x, f64::MIN_POSITIVE), (y, -1e300)],
            Sense::Ge,
            2.2250738585072014e-308,
        );
        m.set_objective(vec![(x, 1.0 + f64::EPSILON)], -0.0);
        let back = parse_lp_text(&export_lp_text(&m).unwrap()).unwrap();
        assert_eq!(back.constraints[0].coeffs, m.constraints[0].coeffs);
        assert_eq!(back.constraints[0].rhs.to_bits(), m.constraints[0].rhs.to_bits());
        assert_eq!(back.variables[1].ub.to_bits(), m.variables[1].ub.to_bits());
        assert_eq!(back.objective, m.objective);
        assert_eq!(back.objective_offset.to_bits(), m.objective_offset.to_bits());
    }

    #[test]
    fn sections_appear_in_order_with_all_bounds() {
        let text = export_lp_text(&sample_model()).unwrap();
        let mini = text.find("Minimize").unwrap();
        let subj = text.find("Subject To").unwrap();
        let bnds = text.find("Bounds").unwrap();
        let bin = text.find("Binary").unwrap();
        let end = text.find("End").unwrap();
        assert!(mini < subj && subj < bnds && bnds < bin && bin < end);
        assert!(text.starts_with("\\ sample\n"));
        // One bounds line per variable, in index order.
        let bounds_block = &text[bnds..bin];
        let lines: Vec<&str> = bounds_block.lines().skip(1).collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains(" x "));
        assert!(lines[1].contains(" y "));
        assert!(lines[2].contains(" b "));
        assert!(lines[1].starts_with(" -inf <= y"));
        assert!(text.contains("+inf"));
    }

    #[test]
    fn rejects_unserializable_names() {
        let mut m = MilpModel::new("bad names");
        m.add_continuous("x", 0.0, 1.0);
        assert!(export_lp_text(&m).is_err());

        let mut m2 = MilpModel::new("ok");
        m2.add_continuous("inf", 0.0, 1.0); // parses as a number
        assert!(export_lp_text(&m2).is_err());
    }

    #[test]
    fn parses_handwritten_text() {
        let text = "\\ tiny\nMinimize\n obj: + 2.0 x - 1.0 y + 0.5\nSubject To\n r0: + 1.0 x + 1.0 y <= 4.0\nBounds\n 0.0 <= x <= +inf\n -inf <= y <= 1.0\nBinary\nEnd\n";
        let m = parse_lp_text(text).unwrap();
        assert_eq!(m.name, "tiny");
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.objective, vec![(0, 2.0), (1, -1.0)]);
        assert_eq!(m.objective_offset, 0.5);
        assert_eq!(m.constraints[0].rhs, 4.0);
        assert_eq!(m.constraints[0].sense, Sense::Le);
    }

    #[test]
    fn negative_zero_offset_survives() {
        let mut m = MilpModel::new("negzero");
        m.add_continuous("x", 0.0, 1.0);
        m.set_objective(vec![], -0.0);
        let back = parse_lp_text(&export_lp_text(&m).unwrap()).unwrap();
        assert_eq!(back.objective_offset.to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn empty_model_exports_header_sections_only() {
        let m = MilpModel::new("empty");
        let text = export_lp_text(&m).unwrap();
        for section in ["\\ empty", "Minimize", "Subject To", "Bounds", "End"] {
            assert!(text.contains(section), "missing {section:?} in {text:?}");
        }
        let back = parse_lp_text(&text).unwrap();
        assert_eq!(back.num_vars(), 0);
        assert_eq!(back.num_constraints(), 0);
        assert!(back.objective.is_empty());
    }

    #[test]
    fn single_variable_model_lists_bounds_and_objective() {
        let mut m = MilpModel::new("one");
        let x = m.add_continuous("x", -2.0, 5.0);
        m.set_objective(vec![(x, 3.0)], 0.0);
        let text = export_lp_text(&m).unwrap();
        assert!(
            text.contains("obj: + 3.0000000000000000e0 x"),
            "objective line in {text:?}"
        );
        assert!(
            text.contains("-2.0000000000000000e0 <= x <= 5.0000000000000000e0"),
            "bounds line in {text:?}"
        );
        let back = parse_lp_text(&text).unwrap();
        assert_eq!(back.objective, vec![(0, 3.0)]);
        assert_eq!(back.variables[0].lb, -2.0);
        assert_eq!(back.variables[0].ub, 5.0);
    }
}
