//! Deterministic reference values for the Monte Carlo suites.
//!
//! Fields are expanded in the duality basis: `Y(eta) = n^{-kd/2} sum_xi
//! Lambda(xi) Phi(xi) D(xi, eta)` with `Phi(xi) = prod_x phi_x^{xi_x}`.
//! Duality moves the time evolution onto the finite `k`-particle chain and
//! orthogonality `E[D(xi) D(xi')] = 1{xi = xi'} / mu(xi)` closes the sums.

use crate::dynamics::{exact_semigroup, poisson_weights, DualStateSpace};
use crate::fields::{FieldSetup, SiteFunction};
use crate::model::{DualConfig, MarginalLaw};
use crate::orthopoly::mu_of;
use crate::rational::to_f64;

fn tensor(values: &[f64], xi: &DualConfig) -> f64 {
    xi.iter().map(|(x, c)| values[x].powi(c as i32)).product()
}

fn lambda_of(setup: &FieldSetup, xi: &DualConfig) -> f64 {
    xi.iter().map(|(_, c)| setup.table.lambda_f64(c as usize)).product()
}

/// Per-state weight `Lambda(xi)^2 / mu(xi)` of the dual quadratic form.
fn dual_weights(setup: &FieldSetup, space: &DualStateSpace) -> Vec<f64> {
    space
        .states
        .iter()
        .map(|xi| {
            let l = lambda_of(setup, xi);
            l * l / to_f64(&mu_of(setup.table, xi))
        })
        .collect()
}

/// Dual coefficients of `n^2 L Y - alpha k (chi/2) X(phi^{k-1} (x) Delta phi)`.
pub fn drift_error_coefficients(setup: &FieldSetup, phi: &SiteFunction, space: &DualStateSpace) -> Vec<f64> {
    let n = setup.n() as f64;
    let big_phi: Vec<f64> = space.states.iter().map(|xi| tensor(&phi.values, xi)).collect();
    let generated = space.apply(&big_phi);
    let half_chi_alpha = setup.spec.alpha_f64() * setup.geom.kernel.chi_f64() / 2.0;
    space
        .states
        .iter()
        .zip(generated)
        .map(|(xi, g)| {
            let mix: f64 = xi
                .iter()
                .map(|(x, c)| {
                    let rest: f64 = xi
                        .iter()
                        .filter(|&(y, _)| y != x)
                        .map(|(y, cy)| phi.values[y].powi(cy as i32))
                        .product();
                    c as f64 * phi.values[x].powi(c as i32 - 1) * phi.laplacians[x] * rest
                })
                .sum();
            n * n * g - half_chi_alpha * mix
        })
        .collect()
}

/// `E[(int_0^t F(eta_s) ds)^2]` for a stationary start, where `F` has dual
/// coefficients `w`; uses `2 int_0^t (t - u) E[F P_u F] du` and uniformization.
pub fn integrated_second_moment(setup: &FieldSetup, space: &DualStateSpace, w: &[f64], t: f64) -> f64 {
    let n = setup.n() as f64;
    let kd = (setup.k as i32) * setup.dim() as i32;
    let kappa = dual_weights(setup, space);
    let q = space.max_exit().max(1e-300);
    let qs = q * n * n;
    let weights = poisson_weights(qs * t);
    // tail[m] = P(N >= m) for N ~ Poisson(qs t).
    let mut tail = vec![0.0; weights.len() + 2];
    for m in (0..weights.len()).rev() {
        tail[m] = tail[m + 1] + weights[m];
    }
    let mut cur = w.to_vec();
    let mut acc = 0.0;
    for j in 0..weights.len() {
        if j > 0 {
            let g = space.apply(&cur);
            cur.iter_mut().zip(g).for_each(|(c, gi)| *c += gi / q);
        }
        let integral = t / qs * tail[j + 1] - (j + 1) as f64 / (qs * qs) * tail[j + 2];
        let form: f64 = kappa.iter().zip(w).zip(&cur).map(|((k, a), b)| k * a * b).sum();
        acc += integral * form;
    }
    2.0 * acc * n.powi(-kd)
}

/// `E[Y_t(phi) Y_0(psi)] = n^{-kd} sum_{xi, xi'} Phi(xi) Psi(xi') Lambda(xi) Lambda(xi') p_{n^2 t}(xi, xi') / mu(xi')`.
///
/// The normalization belongs to the arrival state `xi'`; by reversibility of
/// `Lambda` this equals the transposed kernel `p(xi', xi)` divided by `mu(xi)`.
pub fn dual_covariance(setup: &FieldSetup, phi: &[f64], psi: &[f64], space: &DualStateSpace, t: f64) -> f64 {
    let n = setup.n() as f64;
    let kd = (setup.k as i32) * setup.dim() as i32;
    let p = exact_semigroup(space, t, n * n);
    let a: Vec<f64> = space
        .states
        .iter()
        .map(|xi| tensor(phi, xi) * lambda_of(setup, xi))
        .collect();
    let b: Vec<f64> = space
        .states
        .iter()
        .map(|xi| tensor(psi, xi) * lambda_of(setup, xi) / to_f64(&mu_of(setup.table, xi)))
        .collect();
    let mut acc = 0.0;
    for (i, row) in p.iter().enumerate() {
        let inner: f64 = row.iter().zip(&b).map(|(pij, bj)| pij * bj).sum();
        acc += a[i] * inner;
    }
    acc * n.powi(-kd)
}

/// `E[prod_i dd(m_i, eta_x)]` for all `r`-tuples of degrees `<= k`, summed
/// directly against the marginal law until the sums stop changing.
pub fn marginal_product_moments(setup: &FieldSetup, r: usize) -> Vec<f64> {
    let k = setup.k;
    let size = (k + 1).pow(r as u32);
    let law = MarginalLaw::new(setup.spec);
    let compute = |n_max: usize| -> Vec<f64> {
        let pmf = law.pmf_table(n_max);
        let mut out = vec![0.0; size];
        for (n, p) in pmf.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let dd: Vec<f64> = (0..=k).map(|m| setup.table.dd_f64(m, n as u32)).collect();
            for (flat, slot) in out.iter_mut().enumerate() {
                *slot += p * digits(flat, k + 1, r).iter().map(|&m| dd[m]).product::<f64>();
            }
        }
        out
    };
    let mut n_max = match setup.spec.site_cap() {
        Some(cap) => return compute(cap as usize),
        None => 32,
    };
    let mut prev = compute(n_max);
    loop {
        n_max *= 2;
        let next = compute(n_max);
        let converged = prev
            .iter()
            .zip(&next)
            .all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs().max(1e-300));
        if converged || n_max >= 1 << 14 {
            return next;
        }
        prev = next;
    }
}

fn digits(mut flat: usize, base: usize, r: usize) -> Vec<usize> {
    let mut out = vec![0; r];
    for d in out.iter_mut() {
        *d = flat % base;
        flat /= base;
    }
    out
}

/// `E[prod_{i<r} Y(phi_i)]` under the stationary product measure, through the
/// site-wise factorization of the `r`-variate generating function.
pub fn analytic_joint_moment(setup: &FieldSetup, phis: &[&[f64]]) -> f64 {
    let k = setup.k;
    let r = phis.len();
    let base = k + 1;
    let size = base.pow(r as u32);
    let moments = marginal_product_moments(setup, r);
    let all_digits: Vec<Vec<usize>> = (0..size).map(|f| digits(f, base, r)).collect();
    let mut acc = vec![0.0; size];
    acc[0] = 1.0;
    for x in 0..setup.geom.volume() {
        let site: Vec<f64> = (0..size)
            .map(|f| {
                let pw: f64 = all_digits[f]
                    .iter()
                    .zip(phis)
                    .map(|(&m, p)| p[x].powi(m as i32))
                    .product();
                pw * moments[f]
            })
            .collect();
        let mut next = vec![0.0; size];
        for (i, a) in acc.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, s) in site.iter().enumerate() {
                if let Some(target) = add_digits(&all_digits[i], &all_digits[j], base) {
                    next[target] += a * s;
                }
            }
        }
        acc = next;
    }
    let n = setup.n() as f64;
    let exponent = -((r * k) as f64) * setup.dim() as f64 / 2.0;
    acc[size - 1] * n.powf(exponent)
}

fn add_digits(a: &[usize], b: &[usize], base: usize) -> Option<usize> {
    let mut flat = 0;
    let mut scale = 1;
    for (x, y) in a.iter().zip(b) {
        let s = x + y;
        if s >= base {
            return None;
        }
        flat += s * scale;
        scale *= base;
    }
    Some(flat)
}
