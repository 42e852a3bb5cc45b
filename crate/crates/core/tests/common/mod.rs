//! Shared helpers for integration tests: a brute-force nearest-point oracle
//! in ℚₚ² and seeded samplers.
#![allow(dead_code)]

use clab_core::padic::{p_power, q};
use clab_core::{ExactRational as Q, QpModule};
use rand::Rng;

/// Integer generator of a module in ℚₚ²; `free` means ℚₚ-coefficients.
#[derive(Debug, Clone, Copy)]
pub struct Gen {
    pub v: [i64; 2],
    pub free: bool,
}

/// A module with integer generators and a point `x / p^x_exp`.
#[derive(Debug, Clone)]
pub struct PointSample {
    pub p: u64,
    pub gens: Vec<Gen>,
    pub x: [i64; 2],
    pub x_exp: u32,
}

impl PointSample {
    pub fn module(&self) -> QpModule {
        let col = |g: &Gen| g.v.iter().map(|&c| Q::from_integer(c.into())).collect::<Vec<_>>();
        let vectors = self.gens.iter().filter(|g| g.free).map(col).collect();
        let lattice = self.gens.iter().filter(|g| !g.free).map(col).collect();
        QpModule::new(2, vectors, lattice).expect("sampled generators are valid")
    }

    pub fn point(&self) -> Vec<Q> {
        let d = (self.p as i64).pow(self.x_exp);
        self.x.iter().map(|&n| q(n, d)).collect()
    }
}

fn v_int(n: i128, p: i128, cap: u32) -> u32 {
    if n == 0 {
        return cap;
    }
    let (mut n, mut v) = (n, 0);
    while n % p == 0 && v < cap {
        n /= p;
        v += 1;
    }
    v
}

/// Coefficient bound exponent `A`: some nearest point has coefficients in `p^{-A} ℤₚ`.
fn coefficient_exponent(s: &PointSample) -> u32 {
    let p = s.p as i128;
    s.x_exp
        + match s.gens.as_slice() {
            [g] => v_int(g.v[0] as i128, p, 64).min(v_int(g.v[1] as i128, p, 64)),
            [g, h] => v_int(g.v[0] as i128 * h.v[1] as i128 - g.v[1] as i128 * h.v[0] as i128, p, 64),
            _ => panic!("oracle handles one or two generators"),
        }
}

/// `max(min_h |x - h|, p^{-prec})` by enumerating every coefficient tuple modulo `p^{A+prec}`.
///
/// A nearest point has `|h| <= |x|`, so Cramer's rule bounds its coefficients by
/// `p^A`; coefficients matter only modulo `p^{prec}` since generators are integral.
pub fn oracle_dist(s: &PointSample, prec: u32) -> Q {
    let p = s.p as i128;
    let a = coefficient_exponent(s);
    let cap = a + prec;
    let m = p.pow(cap);
    let lift = p.pow(a - s.x_exp);
    let target = [(s.x[0] as i128 * lift).rem_euclid(m), (s.x[1] as i128 * lift).rem_euclid(m)];
    let step = |g: &Gen| if g.free { 1 } else { p.pow(a) };
    let gens: Vec<(i128, [i128; 2])> = s.gens.iter().map(|g| (step(g), [g.v[0] as i128, g.v[1] as i128])).collect();
    let eval = |c1: i128, c2: i128| -> u32 {
        (0..2)
            .map(|k| {
                let mut d = target[k] - c1 * gens[0].1[k];
                if gens.len() > 1 {
                    d -= c2 * gens[1].1[k];
                }
                v_int(d.rem_euclid(m), p, cap)
            })
            .min()
            .unwrap()
    };
    let mut best = 0;
    'outer: for c1 in (0..m).step_by(gens[0].0 as usize) {
        let c2s: Box<dyn Iterator<Item = i128>> =
            if gens.len() > 1 { Box::new((0..m).step_by(gens[1].0 as usize)) } else { Box::new(0..1) };
        for c2 in c2s {
            best = best.max(eval(c1, c2));
            if best == cap {
                break 'outer;
            }
        }
    }
    p_power(s.p, a as i64 - best as i64)
}

/// Random module/point pair whose oracle enumeration stays at desk scale.
pub fn sample_point_pair<R: Rng>(rng: &mut R) -> PointSample {
    loop {
        let two = rng.gen_bool(0.5);
        let p: u64 = if two { 2 } else { *[2u64, 3].get(rng.gen_range(0..2)).unwrap() };
        let bound = (p as i64).pow(3);
        let gen = |rng: &mut dyn rand::RngCore, free: bool| Gen { v: [rng.gen_range(0..bound), rng.gen_range(0..bound)], free };
        let gens = if two {
            match rng.gen_range(0..2) {
                0 => vec![gen(rng, false), gen(rng, false)],
                _ => vec![gen(rng, true), gen(rng, false)],
            }
        } else {
            let free = rng.gen_bool(0.5);
            vec![gen(rng, free)]
        };
        let x = [rng.gen_range(-bound..=bound), rng.gen_range(-bound..=bound)];
        let s = PointSample { p, gens, x, x_exp: rng.gen_range(0..=1) };
        if s.gens.iter().any(|g| g.v == [0, 0]) {
            continue;
        }
        if s.gens.len() == 2 {
            let (g, h) = (s.gens[0].v, s.gens[1].v);
            if g[0] * h[1] == g[1] * h[0] {
                continue;
            }
        }
        if coefficient_exponent(&s) <= 2 {
            return s;
        }
    }
}
