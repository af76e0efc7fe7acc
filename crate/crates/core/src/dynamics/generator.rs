//! Generator action, pointwise duality and detailed-balance checks.

use num_traits::{Signed, Zero};

use crate::model::{
    nu_weight_unnormalized, CoordVector, DualConfig, Geometry, InclusionLambdaReading, ModelSpec, Occupancy,
};
use crate::orthopoly::DualityTable;
use crate::rational::{q, Q};
use crate::scalar::Scalar;

/// `(Lf)(eta) = sum_{x, r} p(r) eta_x (alpha + sigma eta_{x+r}) [f(eta^{x, x+r}) - f(eta)]`.
pub fn apply_generator<S: Scalar, F: Fn(&[u32]) -> S>(spec: &ModelSpec, geom: &Geometry, f: F, eta: &[u32]) -> S {
    let base = f(eta);
    let mut acc = S::zero();
    let mut moved: Occupancy = eta.to_vec();
    for x in 0..geom.volume() {
        if eta[x] == 0 {
            continue;
        }
        for j in 0..geom.degree() {
            let y = geom.neighbor(x, j);
            let rate = spec.pair_rate_q(eta[x], eta[y]);
            if rate.is_zero() {
                continue;
            }
            let rate = S::from_q(&(rate * &geom.kernel.weights[j]));
            moved[x] -= 1;
            moved[y] += 1;
            acc = acc + rate * (f(&moved) - base.clone());
            moved[x] += 1;
            moved[y] -= 1;
        }
    }
    acc
}

/// Product `D(xi, eta) = prod_x d(xi_x, eta_x)` for a dense `xi`.
fn product_duality(xi: &[u32], eta: &[u32], d: &dyn Fn(u32, u32) -> Option<Q>) -> Q {
    let mut acc = Q::from_integer(1.into());
    for (x, &m) in xi.iter().enumerate() {
        if m > 0 {
            match d(m, eta[x]) {
                Some(v) => acc *= v,
                None => return Q::zero(),
            }
        }
    }
    acc
}

/// `[L D(xi, .)](eta) - [L D(., eta)](xi)` for a single-site polynomial `d`.
pub fn duality_residual(
    spec: &ModelSpec,
    geom: &Geometry,
    xi: &[u32],
    eta: &[u32],
    d: &dyn Fn(u32, u32) -> Option<Q>,
) -> Q {
    let lhs = apply_generator(spec, geom, |e: &[u32]| product_duality(xi, e, d), eta);
    let rhs = apply_generator(spec, geom, |x: &[u32]| product_duality(x, eta, d), xi);
    lhs - rhs
}

/// Exact duality residual for the normalized polynomials of `table`.
pub fn check_duality_pointwise(
    spec: &ModelSpec,
    geom: &Geometry,
    xi: &DualConfig,
    eta: &[u32],
    table: &DualityTable,
) -> Q {
    duality_residual(spec, geom, &xi.to_dense(geom.volume()), eta, &|m, n| {
        table.d(m as usize, n).ok()
    })
}

/// Rate of moving one particle from a site with `from` particles to a site with
/// `to` particles along kernel offset `j`.
pub type MoveRate<'a> = &'a dyn Fn(u32, u32, usize) -> Q;

pub fn standard_rate<'a>(spec: &'a ModelSpec, geom: &'a Geometry) -> impl Fn(u32, u32, usize) -> Q + 'a {
    move |from, to, j| spec.pair_rate_q(from, to) * &geom.kernel.weights[j]
}

/// Index of the kernel offset `-r_j`.
fn reverse_offset(geom: &Geometry, j: usize) -> usize {
    let neg: Vec<i64> = geom.kernel.offsets[j].iter().map(|c| -c).collect();
    geom.kernel
        .offsets
        .iter()
        .position(|r| *r == neg)
        .expect("kernel is symmetric")
}

/// Max over transitions out of `states` of `|w(s) c(s, s') - w(s') c(s', s)|`.
pub fn detailed_balance_check(
    geom: &Geometry,
    states: &[Occupancy],
    weight: &dyn Fn(&[u32]) -> Q,
    rate: MoveRate,
) -> Q {
    let mut worst = Q::zero();
    for s in states {
        let ws = weight(s);
        let mut t = s.clone();
        for x in 0..geom.volume() {
            if s[x] == 0 {
                continue;
            }
            for j in 0..geom.degree() {
                let y = geom.neighbor(x, j);
                let forward = rate(s[x], s[y], j);
                if forward.is_zero() {
                    continue;
                }
                t[x] -= 1;
                t[y] += 1;
                let backward = rate(t[y], t[x], reverse_offset(geom, j));
                let v = (&ws * forward - weight(&t) * backward).abs();
                if v > worst {
                    worst = v;
                }
                t[x] += 1;
                t[y] -= 1;
            }
        }
    }
    worst
}

/// Product weight `prod_x nu(eta_x)`, unnormalized.
pub fn nu_product_weight(spec: &ModelSpec) -> impl Fn(&[u32]) -> Q + '_ {
    move |eta| {
        eta.iter().fold(Q::from_integer(1.into()), |acc, &n| {
            acc * nu_weight_unnormalized(spec, n)
        })
    }
}

/// `Lambda(xi)` on dense dual configurations under a given inclusion reading.
pub fn lambda_product_weight(spec: &ModelSpec, reading: InclusionLambdaReading) -> impl Fn(&[u32]) -> Q + '_ {
    move |xi| {
        xi.iter().fold(Q::from_integer(1.into()), |acc, &m| {
            let w = match spec.family {
                crate::model::Family::Inclusion => reading.weight(&spec.alpha, m as u64),
                _ => crate::model::lambda_weight(spec, m as u64).unwrap_or_else(|_| Q::zero()),
            };
            acc * w
        })
    }
}

/// Detailed balance of the labelled coordinate process with respect to `weight`.
/// Particle `i` jumps by `r` at rate `p(r) (alpha + sigma #{j != i : x_j = x_i + r})`.
pub fn detailed_balance_coordinates(
    spec: &ModelSpec,
    geom: &Geometry,
    states: &[CoordVector],
    weight: &dyn Fn(&[usize]) -> Q,
) -> Q {
    let mut worst = Q::zero();
    for s in states {
        let ws = weight(s);
        for i in 0..s.len() {
            for j in 0..geom.degree() {
                let fwd = coordinate_rate(spec, geom, s, i, j);
                if fwd.is_zero() {
                    continue;
                }
                let mut t = s.clone();
                t[i] = geom.neighbor(s[i], j);
                let bwd = coordinate_rate(spec, geom, &t, i, reverse_offset(geom, j));
                let v = (&ws * fwd - weight(&t) * bwd).abs();
                if v > worst {
                    worst = v;
                }
            }
        }
    }
    worst
}

pub fn coordinate_rate(spec: &ModelSpec, geom: &Geometry, x: &[usize], i: usize, j: usize) -> Q {
    let target = geom.neighbor(x[i], j);
    let others = x.iter().enumerate().filter(|&(l, &p)| l != i && p == target).count() as i64;
    let f = &spec.alpha + q(spec.sigma() * others);
    if f.is_negative() {
        Q::zero()
    } else {
        f * &geom.kernel.weights[j]
    }
}

/// All occupancies on `geom` with entries in `0..=cap`.
pub fn capped_occupancies(volume: usize, cap: u32) -> Vec<Occupancy> {
    let mut out = vec![vec![]];
    for _ in 0..volume {
        let mut next = Vec::with_capacity(out.len() * (cap as usize + 1));
        for s in &out {
            for c in 0..=cap {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// All coordinate vectors of `k` labelled particles on `volume` sites.
pub fn all_coordinates(volume: usize, k: usize) -> Vec<CoordVector> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|s: Vec<usize>| {
                (0..volume).map(move |x| {
                    let mut t = s.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Kernel, Pi_of, Torus};
    use crate::orthopoly::{enumerate_multisets, resolve_convention, table_for_pair};
    use crate::rational::qr;

    fn models() -> Vec<ModelSpec> {
        vec![
            ModelSpec::new(0, q(1), qr(1, 2)).unwrap(),
            ModelSpec::new(-1, q(2), qr(1, 2)).unwrap(),
            ModelSpec::new(1, q(1), qr(1, 2)).unwrap(),
        ]
    }

    #[test]
    fn generator_kills_constants_and_conserves_mass() {
        let geom = Geometry::nearest_neighbor(1, 5).unwrap();
        for spec in models() {
            let eta = vec![1, 0, 2, 1, 0];
            assert_eq!(apply_generator(&spec, &geom, |_| q(7), &eta), q(0));
            let mass = apply_generator(&spec, &geom, |e: &[u32]| q(e.iter().sum::<u32>() as i64), &eta);
            assert_eq!(mass, q(0));
        }
    }

    #[test]
    fn affine_degree_one_is_dual_for_single_particle() {
        let geom = Geometry::nearest_neighbor(1, 5).unwrap();
        for spec in models() {
            let d = |m: u32, n: u32| Some(if m == 1 { q(3) - qr(2, 5) * q(n as i64) } else { q(0) });
            for x in 0..5 {
                let xi = DualConfig::from_sites(&[x]).to_dense(5);
                for eta in [vec![0, 1, 2, 1, 0], vec![2, 0, 0, 1, 1]] {
                    assert_eq!(duality_residual(&spec, &geom, &xi, &eta, &d), q(0));
                }
            }
        }
    }

    #[test]
    fn resolved_tables_are_exactly_dual() {
        let geom = Geometry::nearest_neighbor(1, 5).unwrap();
        for spec in models() {
            let (pair, _) = resolve_convention(&spec, &geom).unwrap();
            let table = table_for_pair(&spec, &pair, 3).unwrap();
            let cap = spec.site_cap().unwrap_or(2);
            let etas = capped_occupancies(5, cap);
            for k in 1..=3 {
                for xi in enumerate_multisets(5, k, spec.site_cap()).iter().step_by(3) {
                    for eta in etas.iter().step_by(17) {
                        assert_eq!(check_duality_pointwise(&spec, &geom, xi, eta, &table), q(0));
                    }
                }
            }
        }
    }

    #[test]
    fn detailed_balance_holds_for_all_three_weights() {
        let geom = Geometry::new(Torus::new(1, 3).unwrap(), Kernel::nearest_neighbor(1)).unwrap();
        for spec in models() {
            let cap = spec.site_cap().unwrap_or(2);
            let states = capped_occupancies(3, cap);
            let rate = standard_rate(&spec, &geom);
            assert_eq!(
                detailed_balance_check(&geom, &states, &nu_product_weight(&spec), &rate),
                q(0)
            );
            let lam = lambda_product_weight(&spec, InclusionLambdaReading::RisingOverFactorial);
            assert_eq!(detailed_balance_check(&geom, &states, &lam, &rate), q(0));
            let coords = all_coordinates(3, 3);
            let pi = |x: &[usize]| Pi_of(&spec, x).unwrap_or_else(|_| q(0));
            assert_eq!(detailed_balance_coordinates(&spec, &geom, &coords, &pi), q(0));
        }
    }

    #[test]
    fn perturbed_rate_breaks_detailed_balance() {
        let geom = Geometry::nearest_neighbor(1, 3).unwrap();
        let spec = ModelSpec::new(1, q(1), qr(1, 2)).unwrap();
        let states = capped_occupancies(3, 2);
        let rate = |from: u32, to: u32, j: usize| {
            let base = standard_rate(&spec, &geom)(from, to, j);
            if j == 0 {
                base * qr(101, 100)
            } else {
                base
            }
        };
        assert!(detailed_balance_check(&geom, &states, &nu_product_weight(&spec), &rate) > q(0));
    }

    #[test]
    fn wrong_inclusion_readings_break_balance() {
        let geom = Geometry::nearest_neighbor(1, 3).unwrap();
        let spec = ModelSpec::new(1, q(2), qr(1, 2)).unwrap();
        let states = capped_occupancies(3, 2);
        let rate = standard_rate(&spec, &geom);
        for reading in [
            InclusionLambdaReading::FactorialTimesRising,
            InclusionLambdaReading::Rising,
        ] {
            let w = lambda_product_weight(&spec, reading);
            assert!(detailed_balance_check(&geom, &states, &w, &rate) > q(0));
        }
    }
}
