use clab_core::padic::{p_power, q};
use clab_core::subgroups::{coset_reps, element_norm, equal, member, module_ball};
use clab_core::{AmbientGroup, ClosedSubgroup, Element, ExactRational as Q, PrimeContext, QpModule};
use num_traits::Zero;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rat(rng: &mut ChaCha8Rng, p: i64) -> Q {
    q(rng.gen_range(-12..=12), [1, p, p * p][rng.gen_range(0..3)])
}

fn vec3(rng: &mut ChaCha8Rng, p: i64) -> Vec<Q> {
    (0..3).map(|_| rat(rng, p)).collect()
}

fn add_scaled(a: &[Q], c: &Q, b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + c * y).collect()
}

/// Same module, different generators.
fn scramble(m: &QpModule, p: i64, rng: &mut ChaCha8Rng) -> QpModule {
    let mut vs: Vec<Vec<Q>> = m.vectors().to_vec();
    let mut ls: Vec<Vec<Q>> = m.lattice_gens().to_vec();
    for _ in 0..6 {
        match rng.gen_range(0..6) {
            0 if !vs.is_empty() => {
                let i = rng.gen_range(0..vs.len());
                let c = loop {
                    let c = rat(rng, p);
                    if !c.is_zero() {
                        break c;
                    }
                };
                vs[i] = vs[i].iter().map(|x| x * &c).collect();
            }
            1 if vs.len() >= 2 => {
                let (i, j) = (0, 1 + rng.gen_range(0..vs.len() - 1));
                vs[i] = add_scaled(&vs[i], &rat(rng, p), &vs[j]);
            }
            2 if ls.len() >= 2 => {
                let i = rng.gen_range(0..ls.len());
                let j = (i + 1 + rng.gen_range(0..ls.len() - 1)) % ls.len();
                ls[i] = add_scaled(&ls[i], &Q::from_integer(rng.gen_range(-5..=5).into()), &ls[j]);
            }
            3 if !ls.is_empty() && !vs.is_empty() => {
                let i = rng.gen_range(0..ls.len());
                let j = rng.gen_range(0..vs.len());
                ls[i] = add_scaled(&ls[i], &rat(rng, p), &vs[j]);
            }
            4 if !ls.is_empty() => {
                // multiply by a p-adic unit
                let i = rng.gen_range(0..ls.len());
                let u = q(p * rng.gen_range(1..5) + 1, p * rng.gen_range(0..5) + 1);
                ls[i] = ls[i].iter().map(|x| x * &u).collect();
            }
            5 if !ls.is_empty() => {
                let i = rng.gen_range(0..ls.len());
                ls.push(ls[i].iter().map(|x| x * Q::from_integer(p.into())).collect());
            }
            _ => {}
        }
    }
    vs.shuffle(rng);
    ls.shuffle(rng);
    QpModule::new(m.dim(), vs, ls).unwrap()
}

fn random_module(rng: &mut ChaCha8Rng, p: i64) -> QpModule {
    loop {
        let nv = rng.gen_range(0..=2);
        let nl = rng.gen_range(0..=3);
        let vs = (0..nv).map(|_| vec3(rng, p)).collect();
        let ls = (0..nl).map(|_| vec3(rng, p)).collect();
        if let Ok(m) = QpModule::new(3, vs, ls) {
            return m;
        }
    }
}

#[test]
fn canonical_form_survives_200_scrambles() {
    let p = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = QpModule::new(3, vec![vec![q(1, 3), q(2, 1), q(0, 1)]], vec![vec![q(1, 1), q(1, 1), q(9, 1)], vec![q(0, 1), q(3, 1), q(1, 9)]])
        .unwrap();
    let canon = m.canonicalize(p as u64);
    assert_eq!(canon.canonicalize(p as u64), canon);
    let mut current = m.clone();
    for _ in 0..200 {
        current = scramble(&current, p, &mut rng);
        assert_eq!(current.canonicalize(p as u64), canon);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn scrambles_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = [2i64, 3, 5][rng.gen_range(0..3)];
        let m = random_module(&mut rng, p);
        let s = scramble(&m, p, &mut rng);
        prop_assert_eq!(m.canonicalize(p as u64), s.canonicalize(p as u64));
    }

    #[test]
    fn equal_iff_canonical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = [2i64, 3][rng.gen_range(0..2)];
        let a = random_module(&mut rng, p);
        let b = if rng.gen_bool(0.4) { scramble(&a, p, &mut rng) } else { random_module(&mut rng, p) };
        let amb = AmbientGroup::PAdicSpace(PrimeContext::new(p as u64, 24).unwrap(), 3);
        let by_membership = equal(&amb, &ClosedSubgroup::Module(a.clone()), &ClosedSubgroup::Module(b.clone())).unwrap();
        prop_assert_eq!(by_membership, a.canonicalize(p as u64) == b.canonicalize(p as u64));
    }

    #[test]
    fn balls_sit_inside(seed in any::<u64>(), j in -1i64..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 2i64;
        let amb = AmbientGroup::PAdicSpace(PrimeContext::new(2, 24).unwrap(), 3);
        let h = ClosedSubgroup::Module(random_module(&mut rng, p).canonicalize(2));
        let r = p_power(2, -j);
        let ball = module_ball(&amb, &h, &r).unwrap();
        prop_assert!(clab_core::subgroups::contains(&amb, &h, &ball).unwrap());
        let small = p_power(2, -j - 2);
        if let Ok(reps) = coset_reps(&amb, &h, &r, &small, 1 << 12) {
            for x in &reps {
                prop_assert!(member(&amb, x, &h).unwrap());
                prop_assert!(element_norm(&amb, x).unwrap() <= r);
            }
        }
    }
}

#[test]
fn membership_of_generators() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let amb = AmbientGroup::PAdicSpace(PrimeContext::new(5, 24).unwrap(), 3);
    for _ in 0..50 {
        let m = random_module(&mut rng, 5);
        let h = ClosedSubgroup::Module(m.canonicalize(5));
        for g in m.vectors().iter().chain(m.lattice_gens()) {
            assert!(member(&amb, &Element::Vector(g.clone()), &h).unwrap());
        }
    }
}
