//! Compact text form of attachment functions.
//!
//! ```text
//! const:1.0
//! affine:0.5
//! power:0.3,shift=1          (shift defaults to 1)
//! table:[1,1.5,2],tail=hold  (tail = hold | affine(s) | power(r))
//! scaled:2,f=affine:1
//! interp:theta=0.25,g=const:1,f=affine:1   (θ= is accepted too)
//! ```
//!
//! Any form takes a trailing `rv=<index>` to override the declared
//! regular-variation index. Nested specs may be wrapped in parentheses;
//! that is required only when a nested spec itself contains a key the
//! outer form also uses.

use std::fmt;

use super::{AttachmentFunction, Kind, TailRule};
use crate::error::{Error, Result};

fn err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Splits on commas that are not inside brackets or parentheses.
fn split_top(s: &str) -> Result<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(err(format!("unbalanced brackets in '{s}'")));
                }
            }
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(err(format!("unbalanced brackets in '{s}'")));
    }
    parts.push(&s[start..]);
    Ok(parts)
}

fn strip_parens(s: &str) -> &str {
    let t = s.trim();
    if t.starts_with('(') && t.ends_with(')') {
        // Only strip when the outer pair encloses everything.
        let inner = &t[1..t.len() - 1];
        let mut depth = 0i32;
        for ch in inner.chars() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth < 0 {
                        return t;
                    }
                }
                _ => {}
            }
        }
        return inner.trim();
    }
    t
}

fn num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| err(format!("expected a number for {what}, got '{}'", s.trim())))
}

/// Key/value pairs after the optional positional head. Fragments that do not
/// start with one of `keys` are glued back onto the previous value, so a
/// nested `power:0.3,shift=2` survives the comma split.
fn key_values(parts: &[&str], keys: &[&str]) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for part in parts {
        let key = part.split_once('=').map(|(k, _)| k.trim());
        match key {
            Some(k) if keys.contains(&k) => {
                let v = part.split_once('=').unwrap().1;
                out.push((k.to_string(), v.to_string()));
            }
            _ => match out.last_mut() {
                Some((_, v)) => {
                    v.push(',');
                    v.push_str(part);
                }
                None => return Err(err(format!("unexpected fragment '{}'", part.trim()))),
            },
        }
    }
    Ok(out)
}

fn tail_rule(s: &str) -> Result<TailRule> {
    let s = s.trim();
    if s == "hold" || s == "hold-last" {
        return Ok(TailRule::Hold);
    }
    let arg = |prefix: &str| -> Option<&str> {
        s.strip_prefix(prefix)
            .and_then(|r| r.strip_prefix('('))
            .and_then(|r| r.strip_suffix(')'))
    };
    if let Some(a) = arg("affine") {
        return Ok(TailRule::Affine {
            slope: num(a, "tail slope")?,
        });
    }
    if let Some(a) = arg("power") {
        return Ok(TailRule::Power {
            rho: num(a, "tail exponent")?,
        });
    }
    Err(err(format!("unknown tail rule '{s}' (hold, affine(s), power(r))")))
}

pub(super) fn parse(spec: &str) -> Result<AttachmentFunction> {
    let spec = strip_parens(spec);
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| err(format!("missing ':' in '{spec}'")))?;
    let parts = split_top(body)?;
    let mut rv: Option<Option<f64>> = None;
    let mut take_rv = |kvs: &[(String, String)]| -> Result<()> {
        for (k, v) in kvs {
            if k == "rv" {
                rv = Some(Some(num(v, "rv")?));
            }
        }
        Ok(())
    };

    let f = match kind.trim() {
        "const" | "constant" => {
            let kvs = key_values(&parts[1..], &["rv"])?;
            take_rv(&kvs)?;
            AttachmentFunction::constant(num(parts[0], "constant")?)?
        }
        "affine" => {
            let kvs = key_values(&parts[1..], &["rv"])?;
            take_rv(&kvs)?;
            AttachmentFunction::affine(num(parts[0], "delta")?)?
        }
        "power" => {
            let kvs = key_values(&parts[1..], &["shift", "rv"])?;
            take_rv(&kvs)?;
            let mut shift = 1.0;
            for (k, v) in &kvs {
                if k == "shift" {
                    shift = num(v, "shift")?;
                }
            }
            AttachmentFunction::power(num(parts[0], "exponent")?, shift)?
        }
        "table" => {
            let head = parts[0].trim();
            let inner = head
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| err(format!("table values must be a [..] list, got '{head}'")))?;
            let values = inner
                .split(',')
                .map(|v| num(v, "table value"))
                .collect::<Result<Vec<_>>>()?;
            let kvs = key_values(&parts[1..], &["tail", "rv"])?;
            take_rv(&kvs)?;
            let mut tail = None;
            for (k, v) in &kvs {
                if k == "tail" {
                    tail = Some(tail_rule(v)?);
                }
            }
            AttachmentFunction::table(values, tail)?
        }
        "scaled" => {
            let kvs = key_values(&parts[1..], &["f", "base", "rv"])?;
            take_rv(&kvs)?;
            let base = kvs
                .iter()
                .find(|(k, _)| k == "f" || k == "base")
                .ok_or_else(|| err("scaled needs f=<spec>"))?;
            let c = num(parts[0], "scale factor")?;
            super::scale(&parse(&base.1)?, c)?
        }
        "interp" | "interpolate" => {
            let kvs = key_values(&parts, &["theta", "θ", "g", "f", "rv"])?;
            take_rv(&kvs)?;
            let get = |name: &[&str]| {
                kvs.iter()
                    .find(|(k, _)| name.contains(&k.as_str()))
                    .map(|(_, v)| v.clone())
            };
            let theta = num(
                &get(&["theta", "θ"]).ok_or_else(|| err("interp needs theta="))?,
                "theta",
            )?;
            let g = parse(&get(&["g"]).ok_or_else(|| err("interp needs g=<spec>"))?)?;
            let f = parse(&get(&["f"]).ok_or_else(|| err("interp needs f=<spec>"))?)?;
            super::interpolate(&g, &f, theta)?
        }
        other => {
            return Err(err(format!(
                "unknown function kind '{other}' (const, affine, power, table, scaled, interp)"
            )))
        }
    };
    match rv {
        Some(r) => f.with_rv_index(r),
        None => Ok(f),
    }
}

fn write_nested(f: &AttachmentFunction, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(out, "(")?;
    write(f, out)?;
    write!(out, ")")
}

pub(super) fn write(f: &AttachmentFunction, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    match f.kind() {
        Kind::Constant { c } => write!(out, "const:{c}")?,
        Kind::Affine { delta } => write!(out, "affine:{delta}")?,
        Kind::Power { rho, shift } => write!(out, "power:{rho},shift={shift}")?,
        Kind::Table { values, tail } => {
            let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            write!(out, "table:[{}]", vals.join(","))?;
            match tail {
                Some(TailRule::Hold) => write!(out, ",tail=hold")?,
                Some(TailRule::Affine { slope }) => write!(out, ",tail=affine({slope})")?,
                Some(TailRule::Power { rho }) => write!(out, ",tail=power({rho})")?,
                None => {}
            }
        }
        Kind::Scaled { c, base } => {
            write!(out, "scaled:{c},f=")?;
            write_nested(base, out)?;
        }
        Kind::Interp { theta, g, f } => {
            write!(out, "interp:theta={theta},g=")?;
            write_nested(g, out)?;
            write!(out, ",f=")?;
            write_nested(f, out)?;
        }
    }
    let declared = AttachmentFunction::from_kind(f.kind().clone()).rv_index();
    if f.rv_index() != declared {
        if let Some(r) = f.rv_index() {
            write!(out, ",rv={r}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_forms_parse() {
        for s in [
            "const:1.0",
            "affine:0.5",
            "power:0.3,shift=1",
            "interp:θ=0.25,g=const:1,f=affine:1",
            "table:[1,1.5,2,2.2],tail=hold",
        ] {
            let f = parse(s).unwrap();
            assert!(f.eval(3).unwrap() > 0.0, "{s}");
        }
    }

    #[test]
    fn nested_commas_survive() {
        let f = parse("interp:theta=0.5,g=power:0.3,shift=2,f=affine:1").unwrap();
        match f.kind() {
            Kind::Interp { g, .. } => {
                assert_eq!(g.kind(), &Kind::Power { rho: 0.3, shift: 2.0 })
            }
            _ => panic!(),
        }
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "const:2",
            "affine:0.25",
            "power:0.7,shift=3",
            "table:[1,2,3],tail=power(0.5)",
            "table:[1,2],tail=affine(0.5),rv=0.2",
            "scaled:0.5,f=affine:1",
            "interp:theta=0.3,g=(power:0.2,shift=1),f=(interp:theta=0.5,g=const:1,f=affine:2)",
        ] {
            let f = parse(s).unwrap();
            let again = parse(&f.to_string()).unwrap();
            assert_eq!(f, again, "{s} -> {f}");
        }
    }

    #[test]
    fn bad_specs_are_parse_errors() {
        for s in [
            "",
            "affine",
            "affine:x",
            "table:1,2",
            "interp:g=const:1",
            "cubic:1",
            "table:[1,2],tail=wobble",
        ] {
            assert!(matches!(parse(s), Err(Error::Parse(_))), "{s}");
        }
    }

    #[test]
    fn json_round_trip_validates() {
        let f = parse("interp:theta=0.25,g=const:1,f=affine:1").unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"kind\":\"interp\""));
        let back: AttachmentFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
        let bad = r#"{"kind":"affine","delta":-1}"#;
        assert!(serde_json::from_str::<AttachmentFunction>(bad).is_err());
    }
}
