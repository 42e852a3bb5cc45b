//! Built-in scenarios, one per reproduced result.

use serde_json::{json, Value};

use crate::scenario::{Scenario, Task};

fn sc(id: &str, anchor: &str, ambient: &str, t: &str, task: Task, params: Value) -> Scenario {
    Scenario::new(id, anchor, json!(ambient), json!(t), task, params)
}

fn convergence_tables() -> Value {
    let lat = |k: i64| format!("lattice:{k}");
    let rows = |f: &dyn Fn(i64) -> (String, String), ks: std::ops::RangeInclusive<i64>| {
        ks.map(|k| {
            let (a, b) = f(k);
            json!([a, b])
        })
        .collect::<Vec<_>>()
    };
    json!({
        "tables": {
            "lattice_to_zero": rows(&|k| (lat(k), "zero".into()), 0..=20),
            "full_to_lattice": rows(&|k| ("full".into(), lat(-k)), 0..=20),
            "lattice_to_unit_ball": rows(&|l| (lat(l), lat(0)), 1..=20),
        }
    })
}

pub fn catalogue() -> Vec<Scenario> {
    use Task::*;
    vec![
        sc("sub_z_fixed_family", "integer subgroups: the identity fixes the accumulating family mZ", "z", "id", Refute,
            json!({"delta": "1/1000", "horizon": 10})),
        sc("real_contraction_half", "real line: contraction by 1/2 is not expansive on subgroups", "r", "scalar:1/2", Refute,
            json!({"delta": "1/1000", "horizon": 20})),
        sc("real_expansion_two", "real line: expansion by 2 is not expansive on subgroups", "r", "scalar:2", Refute,
            json!({"delta": "1/10", "horizon": 20})),
        sc("real_identity_spacing", "real line: isometries fix every lattice aZ", "r", "scalar:-1", Refute,
            json!({"delta": "1/1000", "horizon": 5})),
        sc("circle_identity_roots", "circle: the identity fixes the roots-of-unity family", "circle", "sign:1", Refute,
            json!({"delta": "1/1000", "horizon": 5})),
        sc("circle_inversion_roots", "circle: inversion fixes every finite cyclic subgroup", "circle", "sign:-1", Refute,
            json!({"delta": "1/1000", "horizon": 5})),
        sc("qp_scalar_p2", "p-adic line: multiplication by p is expansive (p = 2)", "qp:2", "scalar:2", Certify,
            json!({"scan": {"kmax": 20, "horizon": 60}})),
        sc("qp_scalar_p3", "p-adic line: multiplication by p is expansive (p = 3)", "qp:3", "scalar:3", Certify,
            json!({"scan": {"kmax": 20, "horizon": 60}})),
        sc("qp_scalar_p5", "p-adic line: multiplication by p is expansive (p = 5)", "qp:5", "scalar:5", Certify,
            json!({"scan": {"kmax": 20, "horizon": 60}})),
        sc("qp_scalar_inverse_p3", "p-adic line: multiplication by 1/p is expansive", "qp:3", "scalar:1/3", Certify, json!({})),
        sc("qp_scalar_cube_p3", "p-adic line: scalars of higher valuation give a smaller delta", "qp:3", "scalar:54", Certify, json!({})),
        sc("qp_unit_scalar", "p-adic line: a unit scalar fixes every lattice", "qp:3", "scalar:2", Certify,
            json!({"delta": "3^-6"})),
        sc("qp2_diag_refute", "p-adic plane: diag(p, 1) is not expansive on subgroups", "qp:3:2", "diag:3,1", Refute,
            json!({"delta": "3^-6", "horizon": 200})),
        sc("qp2_scalar_refute", "p-adic plane: p Id fixes every line", "qp:3:2", "scalar:3", Refute,
            json!({"delta": "3^-6", "horizon": 50})),
        sc("qp2_scalar_transfer", "p-adic plane: expansive on a line and on the quotient but not on the plane", "qp:3:2",
            "scalar:3", TransferTriple, json!({"subspace": "line:1,0", "delta": "3^-6", "horizon": 50})),
        sc("qp2_diag_certify_scope", "p-adic plane: no certificate outside scalar and product actions", "qp:3:2", "diag:3,1/3",
            Certify, json!({})),
        sc("product_2_3_certify", "prime products: (2 Id, 3 Id) is expansive", "product:2,3", "scalars:2,3", Certify, json!({})),
        sc("product_2_3_contraction", "prime products: contraction groups split over the factors", "product:2,3", "scalars:2,3",
            Contract, json!({})),
        sc("product_unit_factor", "prime products: a unit factor breaks expansivity", "product:2,3", "scalars:2,2", Certify,
            json!({"delta": "1/10"})),
        sc("product_decomposition", "prime products: closed subgroups are products of their factor parts", "product:2,3,5", "scalars:2,3,5",
            Decompose, json!({"generators": ["1,1,1", "2,3,5", "1/2,1/3,1/5", "1,0,1;0,1/9,0"]})),
        sc("qp_contraction_p3", "contraction model: C(T) is all of Q_p for T = p", "qp:3", "scalar:3", Contract, json!({})),
        sc("qp2_mixed_contraction", "contraction model: C(T) C(T^-1) is open when no eigenvalue is a unit", "qp:3:2", "diag:3,1/3",
            Contract, json!({})),
        sc("qp2_unit_eigen_contraction", "contraction model: a unit eigenvalue leaves a nontrivial M(T)", "qp:3:2", "diag:3,1",
            Contract, json!({})),
        sc("shift_demo", "shift on a torsion contraction group: orbits of coordinate subgroups tend to {e}", "shift:2:32", "shift:1",
            ShiftDemo, json!({"count": 50, "lo": 0, "hi": 16, "horizon": 16, "seed": 0})),
        sc("metric_convergence", "metric: lattices tend to 0 and to Q_p, unit-ball neighbours stay at distance 1", "qp:3", "id",
            MetricTable, convergence_tables()),
        sc("separation_diag_lines", "p-adic plane: two lines stay close under every power of diag(p, 1)", "qp:3:2", "diag:3,1",
            Separation, json!({"a": "line:1,1", "b": "line:19684,1", "horizon": 100, "delta": "3^-3"})),
    ]
}

pub fn find(id: &str) -> Option<Scenario> {
    catalogue().into_iter().find(|s| s.id == id)
}
