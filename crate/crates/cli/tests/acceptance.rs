//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Tolerances are pinned here. All comparisons are exact rational comparisons
//! (enclosures for the real line), with grid depth K = 24, oracle precision
//! p^-8, and wall-clock limits of 10 s (criterion 1) and 30 s (criterion 2).

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use clab_cli::catalogue::{catalogue, find};
use clab_cli::{run_scenario, RunOptions, RunReport, Scenario, Verdict};
use clab_core::chabauty::chabauty_dist;
use clab_core::dynamics::{shrinkage_test, QpMatrix};
use clab_core::padic::{p_power, parse_rational, q};
use clab_core::subgroups::{decompose_product, equal, member};
use clab_core::{
    is_expansive_on_g, AmbientGroup, Automorphism, ClosedSubgroup, Element, ExactRational as Q, MetricConfig,
    PrimeContext, QpModule, QpSubgroup,
};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const PRECISION_K: u32 = 24;
const ORACLE_PRECISION: u32 = 8;
const CERTIFY_LIMIT: Duration = Duration::from_secs(10);
const REFUTE_LIMIT: Duration = Duration::from_secs(30);

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn opts() -> RunOptions {
    RunOptions { precision: PRECISION_K, ..RunOptions::default() }
}

fn run(s: &Scenario) -> Result<RunReport, String> {
    run_scenario(s, &opts()).map_err(|e| format!("{}: {e}", s.id))
}

fn builtin(id: &str) -> Result<RunReport, String> {
    run(&find(id).ok_or_else(|| format!("missing built-in {id}"))?)
}

fn rat(v: &Value) -> Result<Q, String> {
    v.as_str().ok_or_else(|| format!("not a string: {v}")).and_then(|s| parse_rational(s).map_err(|e| e.to_string()))
}

fn qp(p: u64) -> AmbientGroup {
    AmbientGroup::PAdicLine(PrimeContext::new(p, PRECISION_K).unwrap())
}

/// Every windowed distance and the tail of a witness payload lie below its delta.
fn witness_below(w: &Value) -> Result<(), String> {
    let delta = rat(&w["delta"])?;
    let pair = &w["pair"];
    ensure!(pair[0] != pair[1], "witness pair is not distinct: {pair}");
    ensure!(w["checked"] == json!(true), "witness failed its own re-check");
    for d in w["separation"]["distances"].as_array().into_iter().flatten() {
        let upper = rat(&d["upper"])?;
        ensure!(upper < delta, "distance {} at n = {} is not below {}", d["upper"], d["n"], w["delta"]);
    }
    let tail = rat(&w["tail"]["bound"])?;
    ensure!(tail < delta, "tail bound {} is not below {}", w["tail"]["bound"], w["delta"]);
    Ok(())
}

fn c1_qp_certificate() -> Check {
    for p in [2u64, 3, 5] {
        let start = Instant::now();
        let r = builtin(&format!("qp_scalar_p{p}"))?;
        let took = start.elapsed();
        ensure!(r.verdict == Verdict::ExpansiveCertified, "p = {p}: verdict {}", r.verdict.as_str());
        let delta = rat(&r.payload["certificate"]["delta"])?;
        ensure!(delta == q(1, p as i64), "p = {p}: delta {delta}");
        let scan = &r.payload["scan"];
        ensure!(scan["kmax"] == json!(20) && scan["horizon"] == json!(60), "p = {p}: scan parameters {scan}");
        ensure!(scan["pairs"] == json!(43 * 42 / 2), "p = {p}: scanned {} pairs", scan["pairs"]);
        let min_sup = rat(&scan["min_sup"])?;
        ensure!(min_sup >= Q::one() && min_sup > delta, "p = {p}: min sup {min_sup}");
        ensure!(took < CERTIFY_LIMIT, "p = {p}: took {took:?}");
    }
    Ok("delta = 1/p for p in {2,3,5}; 903 pairs each, min sup 1".into())
}

fn c2_qp2_refutation() -> Check {
    let start = Instant::now();
    let r = builtin("qp2_diag_refute")?;
    let took = start.elapsed();
    ensure!(r.verdict == Verdict::NotExpansiveWitnessed, "verdict {}", r.verdict.as_str());
    let w = &r.payload["witness"];
    ensure!(w["delta"] == json!("1/729"), "delta {}", w["delta"]);
    ensure!(w["separation"]["distances"].as_array().map(Vec::len) == Some(401), "window is not |n| <= 200");
    witness_below(w)?;
    let amb = AmbientGroup::PAdicSpace(PrimeContext::new(3, PRECISION_K).unwrap(), 2);
    let parse = |v: &Value| clab_cli::literal::parse_subgroup(&amb, v).map_err(|e| e.to_string());
    let (a, b) = (parse(&w["pair"][0])?, parse(&w["pair"][1])?);
    ensure!(!equal(&amb, &a, &b).map_err(|e| e.to_string())?, "lines coincide");
    ensure!(took < REFUTE_LIMIT, "took {took:?}");
    Ok(format!("pair {} / {}, sup {}, tail {}", w["pair"][0], w["pair"][1], w["separation"]["sup"]["upper"], w["tail"]["bound"]))
}

fn c3_transfer_triple() -> Check {
    let r = builtin("qp2_scalar_transfer")?;
    let p = &r.payload;
    ensure!(p["factor"]["verdict"] == json!("expansive_certified"), "factor verdict {}", p["factor"]["verdict"]);
    ensure!(p["quotient"]["verdict"] == json!("expansive_certified"), "quotient verdict {}", p["quotient"]["verdict"]);
    ensure!(r.verdict == Verdict::NotExpansiveWitnessed, "full-space verdict {}", r.verdict.as_str());
    witness_below(&p["witness"])?;
    Ok("factor certified, quotient certified, plane refuted".into())
}

fn c4_products() -> Check {
    let r = builtin("product_2_3_certify")?;
    ensure!(r.verdict == Verdict::ExpansiveCertified, "verdict {}", r.verdict.as_str());
    ensure!(r.payload["certificate"]["delta"] == json!("1/3"), "delta {}", r.payload["certificate"]["delta"]);
    let c = builtin("product_2_3_contraction")?;
    let rep = &c.payload["contraction"];
    ensure!(rep["decomposition_holds"] == json!(true), "decomposition fails: {rep}");
    ensure!(rep["factor_invariance"] == json!([true, true]), "factor invariance {}", rep["factor_invariance"]);
    let u = builtin("product_unit_factor")?;
    ensure!(u.payload["refusal"]["prime"] == json!(3), "refusal {}", u.payload["refusal"]);
    ensure!(u.payload["group_expansivity"]["expansive"] == json!(false), "group rule disagrees");
    ensure!(u.verdict == Verdict::NotExpansiveWitnessed, "unit-factor verdict {}", u.verdict.as_str());
    Ok("delta = 1/3; C(T) splits; unit factor refused at p = 3".into())
}

fn small_rat(rng: &mut ChaCha8Rng) -> Q {
    loop {
        let x = q(rng.gen_range(-20..=20), rng.gen_range(1..=20));
        if !x.is_zero() {
            return x;
        }
    }
}

fn c5_decomposition() -> Check {
    let primes = [2u64, 3, 5];
    let amb = AmbientGroup::product(&primes, PRECISION_K).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    for _ in 0..200 {
        let ngens = rng.gen_range(1..=2);
        let gens: Vec<Vec<Q>> = (0..ngens)
            .map(|_| (0..3).map(|_| if rng.gen_bool(0.15) { Q::zero() } else { small_rat(&mut rng) }).collect())
            .collect();
        let elems: Vec<Element> = gens.iter().cloned().map(Element::Vector).collect();
        let dec = decompose_product(&amb, &elems).map_err(|e| e.to_string())?;
        // H inside the product of its factor parts
        let mut ok = gens.iter().all(|g| {
            dec.components.iter().enumerate().all(|(i, c)| {
                member(&qp(primes[i]), &Element::Scalar(g[i].clone()), &ClosedSubgroup::Qp(*c)).unwrap_or(false)
            })
        });
        // and each factor part inside H, via verified lifts
        ok &= dec.components.iter().zip(&dec.lifts).all(|(c, l)| match (c, l) {
            (QpSubgroup::Zero, None) => true,
            (QpSubgroup::Lattice(_), Some(l)) => l.verify(&primes, PRECISION_K),
            _ => false,
        });
        failures += !ok as usize;
    }
    ensure!(failures == 0, "{failures} closures failed");
    Ok("200 closures in Q_2 x Q_3 x Q_5, 0 failures".into())
}

fn qp2_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<ClosedSubgroup> {
    let mut out = vec![ClosedSubgroup::Module(QpModule::zero(2)), ClosedSubgroup::Module(QpModule::full(2))];
    let entry = |rng: &mut ChaCha8Rng| q(rng.gen_range(-9..=9), [1, 3, 9][rng.gen_range(0..3)]);
    while out.len() < n {
        let m = match rng.gen_range(0..3) {
            0 => QpModule::line(vec![entry(rng), entry(rng)]),
            1 => QpModule::lattice(2, vec![vec![entry(rng), entry(rng)], vec![entry(rng), entry(rng)]]),
            _ => QpModule::new(2, vec![vec![entry(rng), entry(rng)]], vec![vec![entry(rng), entry(rng)]]),
        };
        if let Ok(m) = m {
            out.push(ClosedSubgroup::Module(m.canonicalize(3)));
        }
    }
    out
}

fn c6_metric() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..500 {
        let s = common::sample_point_pair(&mut rng);
        let got = s.module().frame(s.p).dist_point(&s.point()).max(p_power(s.p, -(ORACLE_PRECISION as i64)));
        let want = common::oracle_dist(&s, ORACLE_PRECISION);
        ensure!(got == want, "sample {i}: dist_point {got} vs oracle {want} on {s:?}");
    }
    let amb = AmbientGroup::PAdicSpace(PrimeContext::new(3, PRECISION_K).unwrap(), 2);
    let sample = qp2_sample(&mut rng, 30);
    let cfg = MetricConfig::with_precision(PRECISION_K);
    let n = sample.len();
    let mut d = vec![vec![Q::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = chabauty_dist(&amb, &sample[i], &sample[j], &cfg).map_err(|e| e.to_string())?.upper;
        }
    }
    for i in 0..n {
        for j in 0..n {
            ensure!(d[i][j] == d[j][i], "symmetry fails on {} {}", sample[i], sample[j]);
            let same = equal(&amb, &sample[i], &sample[j]).map_err(|e| e.to_string())?;
            ensure!(d[i][j].is_zero() == same, "identity fails on {} {}", sample[i], sample[j]);
            for k in 0..n {
                ensure!(d[i][k] <= &d[i][j] + &d[j][k], "triangle fails on {} {} {}", sample[i], sample[j], sample[k]);
            }
        }
    }
    let r = builtin("metric_convergence")?;
    let t = &r.payload["tables"];
    let rows = |name: &str| t[name].as_array().cloned().unwrap_or_default();
    ensure!(rows("lattice_to_zero").len() == 21, "missing lattice_to_zero rows");
    for (k, row) in rows("lattice_to_zero").iter().enumerate() {
        ensure!(rat(&row["upper"])? == p_power(3, -(k as i64)), "d(3^{k}Z_3, 0) = {}", row["upper"]);
    }
    let mut prev: Option<Q> = None;
    for (k, row) in rows("full_to_lattice").iter().enumerate() {
        let (lo, hi) = (rat(&row["lower"])?, rat(&row["upper"])?);
        ensure!(lo == p_power(3, -(k as i64) - 1) && hi == p_power(3, -(k as i64)), "d(Q_3, 3^-{k}Z_3) bracket [{lo}, {hi}]");
        ensure!(prev.as_ref().is_none_or(|p| hi < *p), "full_to_lattice is not decreasing at k = {k}");
        prev = Some(hi);
    }
    ensure!(rows("lattice_to_unit_ball").len() == 20, "missing lattice_to_unit_ball rows");
    for row in rows("lattice_to_unit_ball") {
        ensure!(rat(&row["upper"])?.is_one(), "d({}, Z_3) = {}", row["a"], row["upper"]);
    }
    Ok("500 oracle samples, axioms on 30 subgroups, convergence tables exact".into())
}

fn power_scenarios() -> Vec<(String, Value, Value)> {
    let mut out = Vec::new();
    for (p, qs) in [(2u64, ["2", "1/2", "6", "3", "12"]), (3, ["3", "1/3", "54", "2", "18"]), (5, ["5", "1/25", "7", "10", "3/5"])] {
        for s in qs {
            out.push((format!("qp:{p}"), json!(format!("scalar:{s}")), json!(format!("scalar:{}", square(s)))));
        }
    }
    for s in ["2,3", "2,2", "1/2,9", "6,3", "3,3"] {
        let sq: Vec<String> = s.split(',').map(square).collect();
        out.push(("product:2,3".into(), json!(format!("scalars:{s}")), json!(format!("scalars:{}", sq.join(",")))));
    }
    out
}

fn square(s: &str) -> String {
    let x = parse_rational(s).unwrap();
    clab_core::padic::fmt_rational(&(&x * &x))
}

fn c7_power_invariance() -> Check {
    let cases = power_scenarios();
    ensure!(cases.len() == 20, "expected 20 scenarios");
    for (i, (amb, t, t2)) in cases.iter().enumerate() {
        let mk = |t: &Value| Scenario::new(&format!("power_{i}"), "", json!(amb), t.clone(), clab_cli::Task::Certify, json!({}));
        let (a, b) = (run(&mk(t))?, run(&mk(t2))?);
        ensure!(a.verdict == b.verdict, "{amb} {t}: {} vs {} for the square", a.verdict.as_str(), b.verdict.as_str());
    }
    Ok("20 scalar/product cases agree for T and T^2".into())
}

fn c8_group_consistency() -> Check {
    let mut certified = 0;
    for s in catalogue() {
        let r = run(&s)?;
        if r.verdict == Verdict::ExpansiveCertified {
            certified += 1;
            ensure!(r.payload["group_expansivity"]["expansive"] == json!(true), "{}: certificate without an expansive rule", s.id);
        }
        for part in ["factor", "quotient"] {
            let p = &r.payload[part];
            if p["verdict"] == json!("expansive_certified") {
                ensure!(p["group_expansivity"]["expansive"] == json!(true), "{} {part}: rule disagrees", s.id);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..100 {
        let p = [2u64, 3, 5][rng.gen_range(0..3)];
        let n = rng.gen_range(1..=3);
        let diag: Vec<Q> = (0..n)
            .map(|_| p_power(p, rng.gen_range(-2..=2)) * q(p as i64 * rng.gen_range(0..4) + 1, p as i64 * rng.gen_range(0..4) + 1))
            .collect();
        let t = Automorphism::QpMatrix(QpMatrix::diagonal(p, diag).map_err(|e| e.to_string())?);
        let rule = is_expansive_on_g(&t, 6).map_err(|e| format!("matrix {i}: {e}"))?;
        let shrink = shrinkage_test(&t, 6).map_err(|e| e.to_string())?;
        ensure!(rule.expansive == shrink.shrinks, "matrix {i}: rule {} vs shrinkage {}", rule.expansive, shrink.shrinks);
    }
    Ok(format!("{certified} catalogue certificates match the rule; 100 random matrices agree"))
}

fn c9_coordinate_refutations() -> Check {
    let mut count = 0;
    for (amb, t) in [("z", "id"), ("circle", "sign:1"), ("circle", "sign:-1"), ("r", "scalar:1/2")] {
        for delta in ["1/10", "1/1000", "1/1000000"] {
            let s = Scenario::new("coordinate", "", json!(amb), json!(t), clab_cli::Task::Refute, json!({"delta": delta, "horizon": 10}));
            let r = run(&s)?;
            ensure!(r.verdict == Verdict::NotExpansiveWitnessed, "{amb} {t} {delta}: {}", r.verdict.as_str());
            let w = &r.payload["witness"];
            witness_below(w)?;
            if amb == "r" {
                let kinds: Vec<&Value> = w["separation"]["distances"].as_array().into_iter().flatten().map(|d| &d["kind"]).collect();
                ensure!(kinds.iter().all(|k| **k == json!("enclosure") || **k == json!("exact")), "real distances are not enclosures");
            }
            count += 1;
        }
    }
    Ok(format!("{count} witnesses (Z, circle +-1, R with alpha = 1/2) below delta in {{1e-1, 1e-3, 1e-6}}"))
}

fn c10_shift_demo() -> Check {
    let r = builtin("shift_demo")?;
    let d = &r.payload["demo"];
    let curves = d["curves"].as_array().cloned().unwrap_or_default();
    ensure!(curves.len() == 50, "{} curves", curves.len());
    ensure!(r.payload["range"] == json!([0, 16]) && d["horizon"] == json!(16), "demo parameters");
    for c in &curves {
        let min = c["support"].as_array().and_then(|s| s.iter().filter_map(Value::as_i64).min()).ok_or("empty support")?;
        ensure!((0..=16).contains(&min), "support outside [0, 16]");
        for (n, v) in c["distances"].as_array().into_iter().flatten().enumerate() {
            ensure!(rat(v)? == p_power(2, -(n as i64 + min)), "support {}: d at n = {n} is {v}", c["support"]);
        }
        ensure!(c["monotone"] == json!(true), "support {} is not monotone", c["support"]);
    }
    ensure!(d["all_closed_form"] == json!(true), "closed form mismatch");
    Ok("50 curves equal 2^-(n + min S) and decrease through n = 16".into())
}

fn main() {
    println!(
        "acceptance: exact rational comparisons, K = {PRECISION_K}, oracle precision p^-{ORACLE_PRECISION}, limits {CERTIFY_LIMIT:?} / {REFUTE_LIMIT:?}"
    );
    let criteria: [Criterion; 10] = [
        ("Q_p certificate and exhaustive scan", c1_qp_certificate),
        ("Q_3^2 diagonal refutation", c2_qp2_refutation),
        ("subspace / quotient / plane triple", c3_transfer_triple),
        ("product certificate and contraction", c4_products),
        ("product decomposition of closures", c5_decomposition),
        ("metric soundness", c6_metric),
        ("power invariance", c7_power_invariance),
        ("group expansivity consistency", c8_group_consistency),
        ("coordinate refutations", c9_coordinate_refutations),
        ("shift demo", c10_shift_demo),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({:.2?})", i + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({:.2?})", i + 1, start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
