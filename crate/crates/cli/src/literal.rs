//! Literal syntax for ambients, subgroups and automorphisms.
//!
//! Every literal is either a compact string (`"qp:3"`, `"lattice:2"`,
//! `"diag:3,1"`) or a JSON object with a `"kind"` field. Rationals are always
//! strings. [`subgroup_literal`] prints the compact form back.

use clab_core::padic::{fmt_rational, parse_rational, PrimeContext};
use clab_core::{
    AmbientGroup, Automorphism, CircleSubgroup, ClabError, ClosedSubgroup, ExactRational as Q, QpMatrix,
    QpModule, QpSubgroup, RealSubgroup, Result, ShiftSubgroup,
};
use num_traits::{One, Zero};
use serde_json::{json, Map, Value};

fn malformed(what: &str, v: impl std::fmt::Display) -> ClabError {
    ClabError::Malformed(format!("{what}: {v}"))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| malformed("missing field", key))
}

fn as_u64(v: &Value, what: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| malformed(what, v))
}

fn as_i64(v: &Value, what: &str) -> Result<i64> {
    v.as_i64().ok_or_else(|| malformed(what, v))
}

/// Rational from a JSON string (or integer).
pub fn rational(v: &Value) -> Result<Q> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) if n.is_i64() => Ok(Q::from_integer(n.as_i64().unwrap().into())),
        _ => Err(malformed("expected a rational string", v)),
    }
}

fn rationals(s: &str) -> Result<Vec<Q>> {
    s.split(',').map(parse_rational).collect()
}

fn columns(s: &str) -> Result<Vec<Vec<Q>>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(';').map(rationals).collect()
}

fn json_columns(v: &Value) -> Result<Vec<Vec<Q>>> {
    let Value::Array(cols) = v else { return Err(malformed("expected a list of columns", v)) };
    cols.iter()
        .map(|c| match c {
            Value::Array(xs) => xs.iter().map(rational).collect(),
            _ => Err(malformed("expected a column", c)),
        })
        .collect()
}

pub fn parse_ambient(v: &Value, precision: u32) -> Result<AmbientGroup> {
    let ctx = |p: u64| PrimeContext::new(p, precision);
    match v {
        Value::String(s) => {
            let parts: Vec<&str> = s.trim().split(':').collect();
            let num = |i: usize| -> Result<u64> {
                parts.get(i).and_then(|x| x.parse().ok()).ok_or_else(|| malformed("ambient", s))
            };
            match parts[0] {
                "z" | "Z" => Ok(AmbientGroup::Integers),
                "r" | "R" => Ok(AmbientGroup::Reals),
                "circle" | "T" => Ok(AmbientGroup::Circle),
                "qp" if parts.len() == 2 => Ok(AmbientGroup::PAdicLine(ctx(num(1)?)?)),
                "qp" if parts.len() == 3 => match num(2)? {
                    1 => Ok(AmbientGroup::PAdicLine(ctx(num(1)?)?)),
                    n => Ok(AmbientGroup::PAdicSpace(ctx(num(1)?)?, n as usize)),
                },
                "product" if parts.len() == 2 => {
                    let primes: Vec<u64> = parts[1]
                        .split(',')
                        .map(|x| x.trim().parse().map_err(|_| malformed("prime", x)))
                        .collect::<Result<_>>()?;
                    AmbientGroup::product(&primes, precision)
                }
                "shift" if parts.len() == 3 => AmbientGroup::shift(num(1)? as u32, num(2)? as i64),
                _ => Err(malformed("unknown ambient", s)),
            }
        }
        Value::Object(o) => {
            let kind = o.get("kind").or_else(|| o.get("ambient")).and_then(Value::as_str).unwrap_or_default();
            match kind.to_ascii_lowercase().as_str() {
                "qp2" => parse_ambient(&json!({"kind": "qp", "p": field(o, "p")?, "n": 2}), precision),
                "z" | "r" | "circle" => parse_ambient(&Value::String(kind.into()), precision),
                "qp" => {
                    let p = as_u64(field(o, "p")?, "prime")?;
                    let n = o.get("n").map(|n| as_u64(n, "dimension")).transpose()?.unwrap_or(1);
                    parse_ambient(&Value::String(format!("qp:{p}:{n}")), precision)
                }
                "product" => {
                    let Value::Array(ps) = field(o, "primes")? else { return Err(malformed("primes", "expected a list")) };
                    let primes: Vec<u64> = ps.iter().map(|x| as_u64(x, "prime")).collect::<Result<_>>()?;
                    AmbientGroup::product(&primes, precision)
                }
                "shift" => AmbientGroup::shift(
                    as_u64(field(o, "order")?, "order")? as u32,
                    as_i64(field(o, "window")?, "window")?,
                ),
                _ => Err(malformed("unknown ambient", kind)),
            }
        }
        _ => Err(malformed("ambient literal", v)),
    }
}

pub fn ambient_literal(a: &AmbientGroup) -> String {
    match a {
        AmbientGroup::Integers => "z".into(),
        AmbientGroup::Reals => "r".into(),
        AmbientGroup::Circle => "circle".into(),
        AmbientGroup::PAdicLine(c) => format!("qp:{}", c.p()),
        AmbientGroup::PAdicSpace(c, n) => format!("qp:{}:{n}", c.p()),
        AmbientGroup::PrimeProduct(cs) => {
            format!("product:{}", cs.iter().map(|c| c.p().to_string()).collect::<Vec<_>>().join(","))
        }
        AmbientGroup::ShiftGroup { order, window } => format!("shift:{order}:{window}"),
    }
}

fn parse_qp(s: &str) -> Result<QpSubgroup> {
    match s.trim() {
        "zero" | "0" => Ok(QpSubgroup::Zero),
        "full" => Ok(QpSubgroup::Full),
        t => match t.strip_prefix("lattice:") {
            Some(k) => k.trim().parse().map(QpSubgroup::Lattice).map_err(|_| malformed("lattice exponent", k)),
            None => Err(malformed("Q_p subgroup", t)),
        },
    }
}

fn qp_literal(x: &QpSubgroup) -> String {
    match x {
        QpSubgroup::Zero => "zero".into(),
        QpSubgroup::Full => "full".into(),
        QpSubgroup::Lattice(k) => format!("lattice:{k}"),
    }
}

fn parse_shift(s: &str) -> Result<ShiftSubgroup> {
    let (support, tail) = match s.split_once(';') {
        Some((a, t)) => {
            let t = t.trim().strip_prefix("tail=").ok_or_else(|| malformed("shift tail", t))?;
            (a, Some(t.trim().parse().map_err(|_| malformed("shift tail", t))?))
        }
        None => (s, None),
    };
    let coords: Vec<i64> = if support.trim().is_empty() {
        vec![]
    } else {
        support.split(',').map(|x| x.trim().parse().map_err(|_| malformed("shift coordinate", x))).collect::<Result<_>>()?
    };
    Ok(ShiftSubgroup::new(coords, tail))
}

/// Parses a subgroup literal for the given ambient and returns it in canonical form.
pub fn parse_subgroup(amb: &AmbientGroup, v: &Value) -> Result<ClosedSubgroup> {
    let h = match v {
        Value::String(s) => parse_subgroup_str(amb, s.trim())?,
        Value::Object(o) => parse_subgroup_obj(amb, o)?,
        _ => return Err(malformed("subgroup literal", v)),
    };
    h.validate(amb)?;
    clab_core::subgroups::canonicalize(amb, &h)
}

fn parse_subgroup_str(amb: &AmbientGroup, s: &str) -> Result<ClosedSubgroup> {
    if s == "trivial" {
        return Ok(ClosedSubgroup::trivial(amb));
    }
    if s == "full" {
        return ClosedSubgroup::full(amb);
    }
    let (head, rest) = s.split_once(':').unwrap_or((s, ""));
    Ok(match (amb, head) {
        (AmbientGroup::Integers, "int") => ClosedSubgroup::Int(rest.parse().map_err(|_| malformed("index", rest))?),
        (AmbientGroup::Integers, _) => ClosedSubgroup::Int(s.parse().map_err(|_| malformed("Z subgroup", s))?),
        (AmbientGroup::Reals, "spacing") => ClosedSubgroup::Real(RealSubgroup::Spacing(parse_rational(rest)?)),
        (AmbientGroup::Circle, "cyclic") => {
            ClosedSubgroup::Circle(CircleSubgroup::Cyclic(rest.parse().map_err(|_| malformed("order", rest))?))
        }
        (AmbientGroup::PAdicLine(_), _) => ClosedSubgroup::Qp(parse_qp(s)?),
        (AmbientGroup::PAdicSpace(_, n), "zero") => ClosedSubgroup::Module(QpModule::zero(*n)),
        (AmbientGroup::PAdicSpace(..), "line") => ClosedSubgroup::Module(QpModule::line(rationals(rest)?)?),
        (AmbientGroup::PAdicSpace(_, n), "lattice") => ClosedSubgroup::Module(QpModule::lattice(*n, columns(rest)?)?),
        (AmbientGroup::PAdicSpace(_, n), "module") => {
            let (v, l) = rest.split_once('|').ok_or_else(|| malformed("module literal needs vectors|lattice", s))?;
            ClosedSubgroup::Module(QpModule::new(*n, columns(v)?, columns(l)?)?)
        }
        (AmbientGroup::PrimeProduct(_), _) => {
            ClosedSubgroup::Product(s.split(';').map(parse_qp).collect::<Result<_>>()?)
        }
        (AmbientGroup::ShiftGroup { .. }, "shift") => ClosedSubgroup::Shift(parse_shift(rest)?),
        _ => return Err(malformed(&format!("subgroup of {}", amb.name()), s)),
    })
}

fn parse_subgroup_obj(amb: &AmbientGroup, o: &Map<String, Value>) -> Result<ClosedSubgroup> {
    let kind = field(o, "kind")?.as_str().unwrap_or_default();
    Ok(match kind {
        "module" => {
            let n = match amb {
                AmbientGroup::PAdicSpace(_, n) => *n,
                _ => return Err(ClabError::AmbientMismatch("module literal outside Q_p^n".into())),
            };
            let vecs = o.get("vectors").map(json_columns).transpose()?.unwrap_or_default();
            let lat = o.get("lattice").map(json_columns).transpose()?.unwrap_or_default();
            ClosedSubgroup::Module(QpModule::new(n, vecs, lat)?)
        }
        "product" => {
            let Value::Array(cs) = field(o, "components")? else { return Err(malformed("components", "expected a list")) };
            ClosedSubgroup::Product(
                cs.iter().map(|c| c.as_str().ok_or_else(|| malformed("component", c)).and_then(parse_qp)).collect::<Result<_>>()?,
            )
        }
        "shift" => {
            let Value::Array(xs) = field(o, "support")? else { return Err(malformed("support", "expected a list")) };
            let support: Vec<i64> = xs.iter().map(|x| as_i64(x, "coordinate")).collect::<Result<_>>()?;
            let tail = match o.get("tail") {
                None | Some(Value::Null) => None,
                Some(t) => Some(as_i64(t, "tail")?),
            };
            ClosedSubgroup::Shift(ShiftSubgroup::new(support, tail))
        }
        "line" => ClosedSubgroup::Module(QpModule::line(vec![rational(field(o, "a")?)?, rational(field(o, "b")?)?])?),
        "lattice" => ClosedSubgroup::Qp(QpSubgroup::Lattice(as_i64(field(o, "k")?, "exponent")?)),
        "int" => ClosedSubgroup::Int(as_u64(field(o, "n")?, "index")?),
        "cyclic" => ClosedSubgroup::Circle(CircleSubgroup::Cyclic(as_u64(field(o, "n")?, "order")?)),
        "spacing" => ClosedSubgroup::Real(RealSubgroup::Spacing(rational(field(o, "a")?)?)),
        "zero" | "trivial" | "full" => parse_subgroup_str(amb, if kind == "zero" { "trivial" } else { kind })?,
        _ => return Err(malformed("unknown subgroup kind", kind)),
    })
}

fn cols_literal(cols: &[Vec<Q>]) -> String {
    cols.iter().map(|c| c.iter().map(fmt_rational).collect::<Vec<_>>().join(",")).collect::<Vec<_>>().join(";")
}

/// Compact literal that [`parse_subgroup`] reads back to the same subgroup.
pub fn subgroup_literal(h: &ClosedSubgroup) -> String {
    match h {
        ClosedSubgroup::Int(n) => format!("int:{n}"),
        ClosedSubgroup::Real(RealSubgroup::Trivial) | ClosedSubgroup::Circle(CircleSubgroup::Cyclic(1)) => "trivial".into(),
        ClosedSubgroup::Real(RealSubgroup::Full) | ClosedSubgroup::Circle(CircleSubgroup::Full) => "full".into(),
        ClosedSubgroup::Real(RealSubgroup::Spacing(a)) => format!("spacing:{}", fmt_rational(a)),
        ClosedSubgroup::Circle(CircleSubgroup::Cyclic(n)) => format!("cyclic:{n}"),
        ClosedSubgroup::Qp(x) => qp_literal(x),
        ClosedSubgroup::Module(m) => {
            if m.is_zero() {
                "zero".into()
            } else if m.lattice_gens().is_empty() && m.vector_dim() == m.dim() {
                "full".into()
            } else if m.lattice_gens().is_empty() && m.vector_dim() == 1 {
                format!("line:{}", cols_literal(m.vectors()))
            } else if m.vectors().is_empty() {
                format!("lattice:{}", cols_literal(m.lattice_gens()))
            } else {
                format!("module:{}|{}", cols_literal(m.vectors()), cols_literal(m.lattice_gens()))
            }
        }
        ClosedSubgroup::Product(cs) => cs.iter().map(qp_literal).collect::<Vec<_>>().join(";"),
        ClosedSubgroup::Shift(s) => {
            let sup = s.support().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
            match s.tail() {
                Some(t) => format!("shift:{sup};tail={t}"),
                None => format!("shift:{sup}"),
            }
        }
    }
}

fn sign(s: &str) -> Result<i8> {
    match s.trim() {
        "1" | "+1" => Ok(1),
        "-1" => Ok(-1),
        _ => Err(malformed("sign must be 1 or -1", s)),
    }
}

fn diag_matrix(p: u64, diag: Vec<Q>) -> Result<Automorphism> {
    Ok(Automorphism::QpMatrix(QpMatrix::diagonal(p, diag)?))
}

/// Parses an automorphism literal acting on `amb`.
pub fn parse_automorphism(amb: &AmbientGroup, v: &Value) -> Result<Automorphism> {
    let t = match v {
        Value::String(s) => parse_automorphism_str(amb, s.trim())?,
        Value::Object(o) => parse_automorphism_obj(amb, o)?,
        _ => return Err(malformed("automorphism literal", v)),
    };
    t.validate(amb)?;
    Ok(t)
}

fn parse_automorphism_str(amb: &AmbientGroup, s: &str) -> Result<Automorphism> {
    let (head, rest) = s.split_once(':').unwrap_or((s, ""));
    let one = || Q::one();
    Ok(match (amb, head) {
        (_, "id") => return parse_automorphism_str(amb, &identity_literal(amb)),
        (AmbientGroup::Integers, "sign") => Automorphism::IntSign(sign(rest)?),
        (AmbientGroup::Circle, "sign") => Automorphism::CircleSign(sign(rest)?),
        (AmbientGroup::Reals, "scalar") => Automorphism::RealScalar(parse_rational(rest)?),
        (AmbientGroup::PAdicLine(c), "scalar") => Automorphism::QpScalar { p: c.p(), q: parse_rational(rest)? },
        (AmbientGroup::PAdicSpace(c, n), "scalar") => diag_matrix(c.p(), vec![parse_rational(rest)?; *n])?,
        (AmbientGroup::PAdicSpace(c, _), "diag") => diag_matrix(c.p(), rationals(rest)?)?,
        (AmbientGroup::PrimeProduct(cs), "scalars") => Automorphism::Product {
            primes: cs.iter().map(|c| c.p()).collect(),
            scalars: rationals(rest)?,
        },
        (AmbientGroup::PrimeProduct(cs), "scalar") => Automorphism::Product {
            primes: cs.iter().map(|c| c.p()).collect(),
            scalars: vec![parse_rational(rest)?; cs.len()],
        },
        (AmbientGroup::ShiftGroup { .. }, "shift") => {
            Automorphism::Shift(rest.trim().parse().map_err(|_| malformed("shift amount", rest))?)
        }
        (AmbientGroup::PAdicLine(c), "diag") => Automorphism::QpScalar { p: c.p(), q: rationals(rest)?.first().cloned().unwrap_or_else(one) },
        _ => return Err(malformed(&format!("automorphism of {}", amb.name()), s)),
    })
}

fn identity_literal(amb: &AmbientGroup) -> String {
    match amb {
        AmbientGroup::Integers | AmbientGroup::Circle => "sign:1".into(),
        AmbientGroup::ShiftGroup { .. } => "shift:0".into(),
        AmbientGroup::PrimeProduct(_) => "scalar:1".into(),
        _ => "scalar:1".into(),
    }
}

fn parse_automorphism_obj(amb: &AmbientGroup, o: &Map<String, Value>) -> Result<Automorphism> {
    let kind = field(o, "kind")?.as_str().unwrap_or_default();
    let s_field = |k: &str| -> Result<String> {
        let v = field(o, k)?;
        Ok(match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    };
    Ok(match kind {
        "int_sign" => Automorphism::IntSign(sign(&s_field("s")?)?),
        "circle_sign" => Automorphism::CircleSign(sign(&s_field("s")?)?),
        "real_scalar" => Automorphism::RealScalar(rational(field(o, "alpha")?)?),
        "qp_scalar" => {
            let p = as_u64(field(o, "p")?, "prime")?;
            let q = rational(field(o, "q")?)?;
            match amb {
                AmbientGroup::PAdicSpace(_, n) => diag_matrix(p, vec![q; *n])?,
                _ => Automorphism::QpScalar { p, q },
            }
        }
        "qp_matrix" => {
            let p = as_u64(field(o, "p")?, "prime")?;
            let Value::Array(rows) = field(o, "entries")? else { return Err(malformed("entries", "expected rows")) };
            let entries: Vec<Vec<Q>> = rows
                .iter()
                .map(|r| match r {
                    Value::Array(xs) => xs.iter().map(rational).collect(),
                    _ => Err(malformed("matrix row", r)),
                })
                .collect::<Result<_>>()?;
            let eigen = match o.get("eigen") {
                None | Some(Value::Null) => None,
                Some(Value::Array(pairs)) => Some(
                    pairs
                        .iter()
                        .map(|e| {
                            let e = e.as_object().ok_or_else(|| malformed("eigenpair", e))?;
                            let value = rational(field(e, "value")?)?;
                            let Value::Array(xs) = field(e, "vector")? else { return Err(malformed("eigenvector", "expected a list")) };
                            Ok((value, xs.iter().map(rational).collect::<Result<Vec<_>>>()?))
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                Some(other) => return Err(malformed("eigen", other)),
            };
            let m = match eigen {
                Some(e) => QpMatrix::new(p, entries, e)?,
                None => {
                    let n = entries.len();
                    let off_diag_zero = entries.iter().enumerate().all(|(i, r)| {
                        r.len() == n && r.iter().enumerate().all(|(j, x)| i == j || x.is_zero())
                    });
                    if !off_diag_zero {
                        return Err(malformed("non-diagonal matrix needs an eigen decomposition", "eigen"));
                    }
                    QpMatrix::diagonal(p, (0..n).map(|i| entries[i][i].clone()).collect())?
                }
            };
            Automorphism::QpMatrix(m)
        }
        "product" => {
            let Value::Array(xs) = field(o, "scalars")? else { return Err(malformed("scalars", "expected a list")) };
            Automorphism::Product { primes: amb.primes(), scalars: xs.iter().map(rational).collect::<Result<_>>()? }
        }
        "shift" => Automorphism::Shift(as_i64(field(o, "s")?, "shift amount")?),
        _ => return Err(malformed("unknown automorphism kind", kind)),
    })
}

/// JSON literal of an automorphism, in the object syntax.
pub fn automorphism_literal(t: &Automorphism) -> Value {
    let strs = |xs: &[Q]| xs.iter().map(|x| Value::String(fmt_rational(x))).collect::<Vec<_>>();
    match t {
        Automorphism::IntSign(s) => json!({"kind": "int_sign", "s": s}),
        Automorphism::CircleSign(s) => json!({"kind": "circle_sign", "s": s}),
        Automorphism::RealScalar(a) => json!({"kind": "real_scalar", "alpha": fmt_rational(a)}),
        Automorphism::QpScalar { p, q } => json!({"kind": "qp_scalar", "p": p, "q": fmt_rational(q)}),
        Automorphism::QpMatrix(m) => json!({
            "kind": "qp_matrix",
            "p": m.p(),
            "entries": m.entries().iter().map(|r| strs(r)).collect::<Vec<_>>(),
            "eigen": m.eigen().iter().map(|(l, v)| json!({"value": fmt_rational(l), "vector": strs(v)})).collect::<Vec<_>>(),
        }),
        Automorphism::Product { scalars, .. } => json!({"kind": "product", "scalars": strs(scalars)}),
        Automorphism::Shift(s) => json!({"kind": "shift", "s": s}),
    }
}

/// `δ` from `"1/1000"`, `"3^-6"`, `"p^-6"` (prime of the ambient) or `"1e-3"`.
pub fn parse_delta(s: &str, amb: &AmbientGroup) -> Result<Q> {
    let s = s.trim();
    let d = if let Some(e) = s.strip_prefix("p^") {
        let p = *amb.primes().first().ok_or_else(|| malformed("p^k needs a p-adic ambient", s))?;
        parse_rational(&format!("{p}^{e}"))?
    } else if let Some((m, e)) = s.split_once(['e', 'E']) {
        parse_rational(m)? * parse_rational(&format!("10^{e}"))?
    } else {
        parse_rational(s)?
    };
    if d <= Q::zero() {
        return Err(ClabError::Domain(format!("delta must be positive, got {s}")));
    }
    Ok(d)
}
