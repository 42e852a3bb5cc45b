//! Report serialization: JSON (sorted keys, exact strings), Markdown and CSV.

use std::fmt::Write as _;

use clab_core::analyzer::{Certificate, RefutationWitness, SeparationReport, ShiftDemo, TailBound};
use clab_core::chabauty::{COORDINATE_FORMULA, METRIC_FORMULA};
use clab_core::dynamics::{ContractionReport, GroupExpansivity};
use clab_core::module::PIVOT_RULE;
use clab_core::padic::fmt_rational;
use clab_core::{ClosedSubgroup, Distance, DistanceKind, ExactRational as Q};
use serde_json::{json, Value};

use crate::literal::subgroup_literal;
use crate::scenario::{RunOptions, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?} (json, md, csv)")),
        }
    }
}

pub fn q(x: &Q) -> Value {
    Value::String(fmt_rational(x))
}

pub fn pair(p: &(ClosedSubgroup, ClosedSubgroup)) -> Value {
    json!([subgroup_literal(&p.0), subgroup_literal(&p.1)])
}

pub fn distance(d: &Distance) -> Value {
    let kind = match d.kind {
        DistanceKind::Exact => "exact",
        DistanceKind::Grid => "grid",
        DistanceKind::Enclosure => "enclosure",
    };
    json!({"lower": d.fmt_endpoint(&d.lower), "upper": d.fmt_endpoint(&d.upper), "kind": kind})
}

pub fn tail(t: &TailBound) -> Value {
    json!({"bound": q(&t.bound), "derivation": t.derivation})
}

pub fn separation(r: &SeparationReport) -> Value {
    json!({
        "pair": pair(&r.pair),
        "horizon": r.horizon,
        "distances": r.distances.iter().map(|(n, d)| {
            let mut row = distance(d);
            row["n"] = json!(n);
            row
        }).collect::<Vec<_>>(),
        "sup": distance(&r.sup),
        "argmax": r.argmax,
        "tail": r.tail.as_ref().map(tail),
    })
}

pub fn certificate(c: &Certificate) -> Value {
    json!({
        "delta": q(&c.delta),
        "reduction": c.reduction,
        "cases": c.cases.iter().map(|e| json!({
            "class": e.class,
            "pair": pair(&e.pair),
            "min_sup": q(&e.min_sup),
            "time": e.time,
        })).collect::<Vec<_>>(),
        "notes": c.notes,
    })
}

pub fn witness(w: &RefutationWitness, checked: bool) -> Value {
    json!({
        "delta": q(&w.delta),
        "pair": pair(&w.pair),
        "family": w.family,
        "parameters": w.parameters.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "separation": separation(&w.separation),
        "tail": tail(&w.tail),
        "checked": checked,
    })
}

pub fn group_expansivity(g: &GroupExpansivity) -> Value {
    json!({
        "expansive": g.expansive,
        "rule": g.rule,
        "eigen_valuations": g.eigen_valuations.iter().map(|(p, l, v)| json!({"p": p, "eigenvalue": q(l), "valuation": v})).collect::<Vec<_>>(),
        "shrinkage": g.shrinkage.as_ref().map(|s| json!({
            "horizon": s.horizon,
            "norm_at_horizon": q(&s.norm_at_horizon),
            "norm_at_double": q(&s.norm_at_double),
            "shrinks": s.shrinks,
        })),
    })
}

pub fn contraction(c: &ContractionReport) -> Value {
    json!({
        "c_t": subgroup_literal(&c.c_t),
        "c_t_inverse": subgroup_literal(&c.c_tinv),
        "m_t": subgroup_literal(&c.m_t),
        "product_open": c.product_open,
        "decomposition_holds": c.decomposition_holds,
        "invariant": c.invariant,
        "factor_invariance": c.factor_invariance,
    })
}

pub fn shift_demo(d: &ShiftDemo, formula_checks: &[bool]) -> Value {
    json!({
        "horizon": d.horizon,
        "note": d.note,
        "all_closed_form": d.curves.iter().all(|c| c.closed_form),
        "all_match_min_support": formula_checks.iter().all(|&b| b),
        "all_monotone": d.curves.iter().all(|c| c.monotone),
        "curves": d.curves.iter().zip(formula_checks).map(|(c, f)| json!({
            "support": c.subgroup.support().iter().collect::<Vec<_>>(),
            "distances": c.distances.iter().map(|d| d.fmt_endpoint(&d.upper)).collect::<Vec<_>>(),
            "closed_form": c.closed_form,
            "matches_min_support": f,
            "monotone": c.monotone,
        })).collect::<Vec<_>>(),
    })
}

pub fn conventions(opts: &RunOptions) -> Value {
    json!({
        "metric_formula": METRIC_FORMULA,
        "coordinate_formula": COORDINATE_FORMULA,
        "pivot_rule": PIVOT_RULE,
        "precision_k": opts.precision,
        "budget": opts.budget,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

impl RunReport {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "scenario": self.id,
            "anchor": self.anchor,
            "task": self.task,
            "ambient": self.ambient,
            "automorphism": self.automorphism,
            "verdict": self.verdict.as_str(),
            "payload": self.payload,
            "conventions": self.conventions,
        });
        if let Some(t) = self.elapsed {
            v["timing_ms"] = json!(t.as_millis() as u64);
        }
        v
    }
}

/// Serializes one or more reports. JSON is one compact object per line.
pub fn emit(reports: &[RunReport], format: Format) -> String {
    match format {
        Format::Json => reports.iter().map(|r| format!("{}\n", r.to_json())).collect(),
        Format::Markdown => reports.iter().map(markdown).collect::<Vec<_>>().join("\n"),
        Format::Csv => reports.iter().map(csv_table).collect::<Vec<_>>().join("\n"),
    }
}

fn s(v: &Value) -> String {
    match v {
        Value::String(x) => x.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn pair_str(v: &Value) -> String {
    format!("{} vs {}", s(&v[0]), s(&v[1]))
}

pub fn markdown(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Scenario `{}`\n", r.id);
    let _ = writeln!(out, "- anchor: {}", r.anchor);
    let _ = writeln!(out, "- task: {}", r.task);
    let _ = writeln!(out, "- ambient: `{}`", r.ambient);
    let _ = writeln!(out, "- automorphism: `{}`", r.automorphism);
    let _ = writeln!(out, "- verdict: **{}**", r.verdict.as_str());
    if let Some(t) = r.elapsed {
        let _ = writeln!(out, "- timing: {} ms", t.as_millis());
    }
    if let Value::Object(c) = &r.conventions {
        out.push_str("\n## Conventions\n\n");
        for (k, v) in c {
            let _ = writeln!(out, "- {k}: `{}`", s(v));
        }
    }
    md_payload(&mut out, &r.payload, 2);
    out
}

fn heading(level: usize) -> String {
    "#".repeat(level.min(6))
}

fn md_payload(out: &mut String, p: &Value, level: usize) {
    let Value::Object(map) = p else { return };
    let mut rest = serde_json::Map::new();
    for (k, v) in map {
        match k.as_str() {
            "certificate" if v.is_object() => md_certificate(out, v, level),
            "witness" if v.is_object() => md_witness(out, v, level),
            "separation" if v.is_object() => md_separation(out, v, level),
            "factor" | "quotient" | "full" | "refusal_witness" if v.is_object() => {
                let _ = writeln!(out, "\n{} {k}\n", heading(level));
                if let Some(verdict) = v.get("verdict") {
                    let _ = writeln!(out, "verdict: **{}**", s(verdict));
                }
                md_payload(out, v, level + 1);
            }
            "verdict" => {}
            _ => {
                rest.insert(k.clone(), v.clone());
            }
        }
    }
    if !rest.is_empty() {
        let _ = writeln!(out, "\n{} Details\n", heading(level));
        let _ = writeln!(out, "```json\n{}\n```", serde_json::to_string_pretty(&Value::Object(rest)).unwrap_or_default());
    }
}

fn md_certificate(out: &mut String, c: &Value, level: usize) {
    let _ = writeln!(out, "\n{} Certificate\n", heading(level));
    let _ = writeln!(out, "delta = `{}`\n", s(&c["delta"]));
    for line in c["reduction"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "- {}", s(line));
    }
    let _ = writeln!(out, "\n{} Case transcript\n", heading(level + 1));
    out.push_str("| class | worst pair | min sup | time |\n|---|---|---|---|\n");
    for e in c["cases"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "| {} | {} | `{}` | {} |", s(&e["class"]), pair_str(&e["pair"]), s(&e["min_sup"]), e["time"]);
    }
    let notes = c["notes"].as_array().cloned().unwrap_or_default();
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            let _ = writeln!(out, "- note: {}", s(&n));
        }
    }
}

fn md_witness(out: &mut String, w: &Value, level: usize) {
    let _ = writeln!(out, "\n{} Witness\n", heading(level));
    let _ = writeln!(out, "- family: {}", s(&w["family"]));
    let _ = writeln!(out, "- pair: {}", pair_str(&w["pair"]));
    let _ = writeln!(out, "- delta: `{}`", s(&w["delta"]));
    if let Value::Object(ps) = &w["parameters"] {
        for (k, v) in ps {
            let _ = writeln!(out, "- {k}: `{}`", s(v));
        }
    }
    let _ = writeln!(out, "- tail bound: `{}` ({})", s(&w["tail"]["bound"]), s(&w["tail"]["derivation"]));
    let _ = writeln!(out, "- re-checked: {}", w["checked"]);
    md_separation(out, &w["separation"], level + 1);
}

fn md_separation(out: &mut String, r: &Value, level: usize) {
    let _ = writeln!(out, "\n{} Separation over |n| <= {}\n", heading(level), r["horizon"]);
    let _ = writeln!(out, "pair {}; sup `{}` at n = {}\n", pair_str(&r["pair"]), s(&r["sup"]["upper"]), r["argmax"]);
    out.push_str("| n | lower | upper |\n|---|---|---|\n");
    for d in r["distances"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "| {} | `{}` | `{}` |", d["n"], s(&d["lower"]), s(&d["upper"]));
    }
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn separation_rows(r: &Value) -> Vec<Vec<String>> {
    r["distances"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|d| vec![d["n"].to_string(), s(&d["lower"]), s(&d["upper"])])
        .collect()
}

/// The report's main table as CSV: separation tables use `n,distance_lower,distance_upper`.
pub fn csv_table(r: &RunReport) -> String {
    let p = &r.payload;
    if p["separation"].is_object() {
        return csv_string(&["n", "distance_lower", "distance_upper"], separation_rows(&p["separation"]));
    }
    if p["witness"].is_object() {
        return csv_string(&["n", "distance_lower", "distance_upper"], separation_rows(&p["witness"]["separation"]));
    }
    if let Value::Object(tables) = &p["tables"] {
        let mut rows = Vec::new();
        for (name, t) in tables {
            for row in t.as_array().into_iter().flatten() {
                rows.push(vec![name.clone(), s(&row["a"]), s(&row["b"]), s(&row["lower"]), s(&row["upper"])]);
            }
        }
        return csv_string(&["table", "a", "b", "distance_lower", "distance_upper"], rows);
    }
    if p["certificate"].is_object() {
        let rows = p["certificate"]["cases"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|e| vec![s(&e["class"]), s(&e["pair"][0]), s(&e["pair"][1]), s(&e["min_sup"]), e["time"].to_string()])
            .collect();
        return csv_string(&["class", "pair_a", "pair_b", "min_sup", "time"], rows);
    }
    if let Some(curves) = p["demo"]["curves"].as_array() {
        let mut rows = Vec::new();
        for c in curves {
            let support = c["support"].as_array().into_iter().flatten().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            for (n, d) in c["distances"].as_array().into_iter().flatten().enumerate() {
                rows.push(vec![support.clone(), n.to_string(), s(d)]);
            }
        }
        return csv_string(&["support", "n", "distance"], rows);
    }
    let mut rows = Vec::new();
    flatten("", p, &mut rows);
    csv_string(&["key", "value"], rows)
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
    let key = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&key(k), x, rows)),
        Value::Array(xs) if xs.iter().any(|x| x.is_object() || x.is_array()) => {
            xs.iter().enumerate().for_each(|(i, x)| flatten(&key(&i.to_string()), x, rows))
        }
        _ => rows.push(vec![prefix.to_owned(), s(v)]),
    }
}
