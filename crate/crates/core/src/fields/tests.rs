use num_traits::Zero;
use rand::Rng;

use super::evaluator::field_by_enumeration;
use super::*;
use crate::dynamics::{apply_generator, replica_rng, simulate};
use crate::error::Error;
use crate::model::{nu_sample, Geometry, ModelSpec};
use crate::orthopoly::{resolved_table, DualityTable};
use crate::rational::{q, qr, Q};

fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new(0, q(1), qr(1, 2)).unwrap(),
        ModelSpec::new(-1, q(2), qr(1, 2)).unwrap(),
        ModelSpec::new(1, q(1), qr(1, 2)).unwrap(),
    ]
}

fn rational_phi(v: usize, salt: i64) -> Vec<Q> {
    (0..v as i64).map(|x| qr((x * 7 + salt) % 11 - 5, 4)).collect()
}

fn random_eta(spec: &ModelSpec, v: usize, seed: u64) -> Vec<u32> {
    let mut rng = replica_rng(seed, 0);
    let cap = spec.site_cap().unwrap_or(3);
    (0..v).map(|_| rng.gen_range(0..=cap)).collect()
}

fn setup_for<'a>(spec: &'a ModelSpec, geom: &'a Geometry, table: &'a DualityTable, k: usize) -> FieldSetup<'a> {
    FieldSetup::new(spec, geom, table, k).unwrap()
}

#[test]
fn product_evaluation_matches_enumeration() {
    let geom = Geometry::nearest_neighbor(1, 9).unwrap();
    for spec in models() {
        let table = resolved_table(&spec, &geom, 3).unwrap();
        for k in 1..=3 {
            let setup = setup_for(&spec, &geom, &table, k);
            let phi = rational_phi(9, k as i64);
            for seed in 0..3 {
                let eta = random_eta(&spec, 9, seed);
                let fast: Q = field_eval(setup, &phi, &eta).unwrap();
                assert_eq!(fast, field_by_enumeration(setup, &phi, &eta).unwrap());
            }
        }
    }
}

#[test]
fn first_order_field_is_linear() {
    let geom = Geometry::nearest_neighbor(1, 9).unwrap();
    for spec in models() {
        let table = resolved_table(&spec, &geom, 3).unwrap();
        let setup = setup_for(&spec, &geom, &table, 1);
        let phi = rational_phi(9, 1);
        let eta = random_eta(&spec, 9, 4);
        let expect: Q = (0..9).map(|x| &phi[x] * table.dd(1, eta[x])).sum::<Q>() / q(3);
        assert_eq!(field_eval(setup, &phi, &eta).unwrap(), expect);
        let psi = rational_phi(9, 5);
        assert_eq!(
            field_eval_mixed(setup, &phi, &psi, &eta).unwrap(),
            field_eval(setup, &psi, &eta).unwrap()
        );
    }
}

#[test]
fn mixed_field_with_psi_equal_phi_is_the_field() {
    let geom = Geometry::nearest_neighbor(1, 9).unwrap();
    for spec in models() {
        let table = resolved_table(&spec, &geom, 3).unwrap();
        for k in 1..=3 {
            let setup = setup_for(&spec, &geom, &table, k);
            let phi = rational_phi(9, 2);
            let eta = random_eta(&spec, 9, 8);
            let y: Q = field_eval(setup, &phi, &eta).unwrap();
            assert_eq!(field_eval_mixed(setup, &phi, &phi, &eta).unwrap(), y);
        }
    }
}

#[test]
fn gradient_decomposition_is_exact() {
    for (dim, side) in [(1, 9), (2, 4)] {
        let geom = Geometry::nearest_neighbor(dim, side).unwrap();
        let v = geom.volume();
        for spec in models() {
            let table = resolved_table(&spec, &geom, 3).unwrap();
            for k in 1..=3 {
                let setup = setup_for(&spec, &geom, &table, k);
                let phi = rational_phi(v, 3);
                for seed in 0..3 {
                    let eta = random_eta(&spec, v, 10 + seed);
                    let ev = FieldEvaluator::new(setup, &phi, &eta).unwrap();
                    for x in 0..v {
                        for j in 0..geom.degree() {
                            let y = geom.neighbor(x, j);
                            match ev.grad(x, y) {
                                Ok(g) => assert_eq!(g, ev.gradient_decomposition(x, y).unwrap()),
                                Err(Error::InadmissibleMove(_)) => {}
                                Err(e) => panic!("{e}"),
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn leading_term_uses_degree_one_constant() {
    let geom = Geometry::nearest_neighbor(1, 9).unwrap();
    for spec in models() {
        let table = resolved_table(&spec, &geom, 3).unwrap();
        let setup = setup_for(&spec, &geom, &table, 2);
        let phi = rational_phi(9, 6);
        let eta = [1, 1, 0, 2, 1, 0, 2, 1, 1]
            .iter()
            .map(|&c: &u32| c.min(spec.site_cap().unwrap_or(9)))
            .collect::<Vec<_>>();
        let ev = FieldEvaluator::new(setup, &phi, &eta).unwrap();
        let c = table.c_measured();
        let (x, y) = (0, 1);
        let z = ev.z_field(1, 0, x, y, eta[x] - 1, eta[y]).unwrap();
        let expect = -c * q(9) * (&phi[y] - &phi[x]) * z;
        assert_eq!(ev.leading_gradient_term(x, y).unwrap(), expect);
    }
}

#[test]
fn empty_source_is_inadmissible() {
    let geom = Geometry::nearest_neighbor(1, 9).unwrap();
    let spec = models().remove(0);
    let table = resolved_table(&spec, &geom, 3).unwrap();
    let setup = setup_for(&spec, &geom, &table, 2);
    let ev = FieldEvaluator::new(setup, &rational_phi(9, 0), &[0; 9]).unwrap();
    assert!(matches!(ev.grad(0, 1), Err(Error::InadmissibleMove(_))));
}

#[test]
fn drift_equals_generator_action() {
    let geom = Geometry::nearest_neighbor(1, 9).unwrap();
    for spec in models() {
        let table = resolved_table(&spec, &geom, 3).unwrap();
        for k in 1..=3 {
            let setup = setup_for(&spec, &geom, &table, k);
            let phi = rational_phi(9, 7);
            let eta = random_eta(&spec, 9, 21);
            let ev = FieldEvaluator::new(setup, &phi, &eta).unwrap();
            let ly = apply_generator(&spec, &geom, |e: &[u32]| field_eval(setup, &phi, e).unwrap(), &eta);
            assert_eq!(ev.drift_exact(), q(81) * ly);
        }
    }
}

#[test]
fn carre_du_champ_forms_agree_exactly() {
    for (dim, side) in [(1, 9), (2, 4)] {
        let geom = Geometry::nearest_neighbor(dim, side).unwrap();
        let v = geom.volume();
        for spec in models() {
            let table = resolved_table(&spec, &geom, 3).unwrap();
            for k in 1..=3 {
                let setup = setup_for(&spec, &geom, &table, k);
                let phi = rational_phi(v, 9);
                let eta = random_eta(&spec, v, 30 + k as u64);
                let ev = FieldEvaluator::new(setup, &phi, &eta).unwrap();
                let a = ev.carre_du_champ();
                assert!(!a.is_zero());
                assert_eq!(a, ev.carre_du_champ_defining().unwrap());
            }
        }
    }
}

#[test]
fn odd_side_in_one_dimension_needs_float_scaling() {
    let geom = Geometry::nearest_neighbor(1, 6).unwrap();
    let spec = models().remove(0);
    let table = resolved_table(&spec, &geom, 3).unwrap();
    let setup = setup_for(&spec, &geom, &table, 1);
    assert!(FieldEvaluator::<Q>::new(setup, &rational_phi(6, 0), &[0; 6]).is_err());
    assert!(FieldEvaluator::<f64>::new(setup, &[0.5; 6], &[0; 6]).is_ok());
}

#[test]
fn tracker_agrees_with_direct_evaluation() {
    let geom = Geometry::nearest_neighbor(1, 12).unwrap();
    let phi_fn = TestFunction::sine(1);
    let phi = phi_fn.sample(&geom.torus);
    for spec in models() {
        let table = resolved_table(&spec, &geom, 3).unwrap();
        for k in 1..=3 {
            let setup = setup_for(&spec, &geom, &table, k);
            let mut rng = replica_rng(77, k as u64);
            let eta0 = nu_sample(&spec, 12, &mut rng);
            let traj = simulate(&spec, &geom, eta0.clone(), 0.02, 144.0, &mut rng);
            let mut tracker = FieldTracker::new(setup, &phi, &eta0);
            for (i, ev) in traj.events.iter().enumerate() {
                tracker.apply_move(ev.from as usize, ev.to as usize);
                if i % 7 != 0 {
                    continue;
                }
                let direct = FieldEvaluator::<f64>::new(setup, &phi.values, tracker.occupancy()).unwrap();
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
                assert!(close(tracker.value(), direct.value()));
                assert!(
                    close(tracker.drift(), direct.drift_exact()),
                    "{} {}",
                    tracker.drift(),
                    direct.drift_exact()
                );
                assert!(close(tracker.carre_du_champ(), direct.carre_du_champ()));
                assert!(close(tracker.drift_closed(), direct.drift_closed(&phi.laplacians)));
                assert!(close(tracker.qv_closed(), direct.qv_closed(&phi.gradients)));
            }
        }
    }
}

#[test]
fn incremental_tree_matches_rebuild() {
    let geom = Geometry::nearest_neighbor(2, 6).unwrap();
    let spec = models().remove(2);
    let table = resolved_table(&spec, &geom, 3).unwrap();
    let setup = setup_for(&spec, &geom, &table, 3);
    let phi = TestFunction::sine(2).sample(&geom.torus);
    let mut rng = replica_rng(3, 1);
    let eta0 = nu_sample(&spec, geom.volume(), &mut rng);
    let traj = simulate(&spec, &geom, eta0.clone(), 0.05, 36.0, &mut rng);
    let mut ev = FieldEvaluator::<f64>::new(setup, &phi.values, &eta0).unwrap();
    for e in &traj.events {
        ev.apply_move(e.from as usize, e.to as usize);
    }
    let fresh = FieldEvaluator::<f64>::new(setup, &phi.values, &traj.final_state()).unwrap();
    for j in 0..=3 {
        let (a, b) = (ev.value_order(j), fresh.value_order(j));
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} {b}");
    }
}

#[test]
fn martingale_grid_checks() {
    let geom = Geometry::nearest_neighbor(1, 8).unwrap();
    let spec = models().remove(2);
    let table = resolved_table(&spec, &geom, 3).unwrap();
    let setup = setup_for(&spec, &geom, &table, 2);
    let phi = TestFunction::sine(1).sample(&geom.torus);
    let mut rng = replica_rng(1, 1);
    let eta0 = nu_sample(&spec, 8, &mut rng);
    let traj = simulate(&spec, &geom, eta0, 0.1, 64.0, &mut rng);
    assert!(matches!(
        dynkin_martingale(setup, &phi, &traj, &[0.05, 0.2]),
        Err(Error::GridBeyondHorizon { .. })
    ));
    let s = dynkin_martingale(setup, &phi, &traj, &[0.0, 0.05, 0.1]).unwrap();
    assert_eq!(s.rows[0].m, 0.0);
    assert_eq!(s.rows.len(), 3);
    let fresh = field_eval::<f64>(setup, &phi.values, &traj.final_state()).unwrap();
    assert!((s.last().y - fresh).abs() < 1e-10);
}
