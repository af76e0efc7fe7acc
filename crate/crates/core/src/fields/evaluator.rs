//! Field `Y^{(n,k)}(phi)(eta) = n^{-kd/2} sum_{|xi| = k} Phi_n(xi) DD(xi, eta)`.
//!
//! With `S_x(t) = sum_m dd(m, eta_x) phi(x/n)^m t^m`, the sum over `xi` is the
//! coefficient `[t^k] prod_x S_x(t)`, kept in a product tree so a single-site
//! change costs `O(k^2 log V)`.

use crate::error::{Error, Result};
use crate::model::{Geometry, ModelSpec, Occupancy};
use crate::orthopoly::DualityTable;
use crate::rational::Q;
use crate::scalar::Scalar;
use crate::series;

use super::product_tree::ProductTree;

/// Scalars usable for field evaluation: table lookups and rates.
pub trait FieldScalar: Scalar {
    fn dd(table: &DualityTable, m: usize, n: u32) -> Self;
    fn rate(spec: &ModelSpec, geom: &Geometry, from: u32, to: u32, j: usize) -> Self;
}

impl FieldScalar for f64 {
    #[inline]
    fn dd(table: &DualityTable, m: usize, n: u32) -> Self {
        table.dd_f64(m, n)
    }
    #[inline]
    fn rate(spec: &ModelSpec, geom: &Geometry, from: u32, to: u32, j: usize) -> Self {
        geom.kernel.weight_f64(j) * spec.pair_rate_f64(from, to)
    }
}

impl FieldScalar for Q {
    fn dd(table: &DualityTable, m: usize, n: u32) -> Self {
        table.dd(m, n)
    }
    fn rate(spec: &ModelSpec, geom: &Geometry, from: u32, to: u32, j: usize) -> Self {
        spec.pair_rate_q(from, to) * &geom.kernel.weights[j]
    }
}

/// Model, geometry, table and field order shared by all evaluations.
#[derive(Clone, Copy)]
pub struct FieldSetup<'a> {
    pub spec: &'a ModelSpec,
    pub geom: &'a Geometry,
    pub table: &'a DualityTable,
    pub k: usize,
}

impl<'a> FieldSetup<'a> {
    pub fn new(spec: &'a ModelSpec, geom: &'a Geometry, table: &'a DualityTable, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("field order k must be at least 1".into()));
        }
        if k > table.m_max && table.spec.site_cap().is_none() {
            return Err(Error::Config(format!(
                "table degree {} below field order {k}",
                table.m_max
            )));
        }
        Ok(FieldSetup { spec, geom, table, k })
    }

    pub fn n(&self) -> u64 {
        self.geom.torus.side as u64
    }

    pub fn dim(&self) -> i64 {
        self.geom.torus.dim as i64
    }

    /// `n^(e/2)` in scalar `S`.
    pub fn n_pow_half<S: Scalar>(&self, e: i64) -> Result<S> {
        S::n_pow_half(self.n(), e).ok_or_else(|| {
            Error::Config(format!(
                "n^({e}/2) is irrational for n = {}; use a perfect-square side",
                self.n()
            ))
        })
    }
}

/// Field evaluator holding the current configuration.
#[derive(Clone)]
pub struct FieldEvaluator<'a, S: FieldScalar> {
    pub setup: FieldSetup<'a>,
    phi_pow: Vec<Vec<S>>,
    eta: Occupancy,
    tree: ProductTree<S>,
    scales: Vec<S>,
}

impl<'a, S: FieldScalar> FieldEvaluator<'a, S> {
    pub fn new(setup: FieldSetup<'a>, phi: &[S], eta: &[u32]) -> Result<Self> {
        let v = setup.geom.volume();
        if phi.len() != v || eta.len() != v {
            return Err(Error::Config(
                "test function and configuration must cover every site".into(),
            ));
        }
        let k = setup.k;
        let phi_pow: Vec<Vec<S>> = phi.iter().map(|p| (0..=k).map(|m| p.powi(m)).collect()).collect();
        let scales = (0..=k)
            .map(|j| setup.n_pow_half::<S>(-(j as i64) * setup.dim()))
            .collect::<Result<Vec<S>>>()?;
        let leaves: Vec<Vec<S>> = (0..v).map(|x| leaf_series(&setup, &phi_pow[x], eta[x])).collect();
        Ok(FieldEvaluator {
            tree: ProductTree::new(&leaves, k + 1),
            setup,
            phi_pow,
            eta: eta.to_vec(),
            scales,
        })
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.eta
    }

    fn leaf(&self, x: usize, count: u32) -> Vec<S> {
        leaf_series(&self.setup, &self.phi_pow[x], count)
    }

    /// `Y^{(n,k)}`.
    pub fn value(&self) -> S {
        self.value_order(self.setup.k)
    }

    /// `Y^{(n,j)}` for `j <= k` from the same product.
    pub fn value_order(&self, j: usize) -> S {
        self.scales[j].clone() * self.tree.root()[j].clone()
    }

    pub fn set_count(&mut self, x: usize, count: u32) {
        self.eta[x] = count;
        let leaf = self.leaf(x, count);
        self.tree.set_leaf(x, &leaf);
    }

    pub fn apply_move(&mut self, x: usize, y: usize) {
        let (cx, cy) = (self.eta[x] - 1, self.eta[y] + 1);
        self.set_count(x, cx);
        self.set_count(y, cy);
    }

    fn check_move(&self, x: usize, y: usize) -> Result<()> {
        if x == y {
            return Err(Error::InadmissibleMove(format!("source and target coincide at {x}")));
        }
        if self.eta[x] == 0 {
            return Err(Error::InadmissibleMove(format!("site {x} is empty")));
        }
        if let Some(cap) = self.setup.spec.site_cap() {
            if self.eta[y] >= cap {
                return Err(Error::InadmissibleMove(format!("site {y} is full")));
            }
        }
        Ok(())
    }

    /// `Y(eta^{x,y}) - Y(eta)`.
    pub fn delta_move(&self, x: usize, y: usize) -> Result<S> {
        self.check_move(x, y)?;
        let lx = self.leaf(x, self.eta[x] - 1);
        let ly = self.leaf(y, self.eta[y] + 1);
        let moved = self.tree.product_with(&[(x, Some(&lx)), (y, Some(&ly))]);
        let k = self.setup.k;
        Ok(self.scales[k].clone() * (moved[k].clone() - self.tree.root()[k].clone()))
    }

    /// Discrete gradient `n^{d/2+1} [Y(eta^{x,y}) - Y(eta)]`.
    pub fn grad(&self, x: usize, y: usize) -> Result<S> {
        let pre = self.setup.n_pow_half::<S>(self.setup.dim() + 2)?;
        Ok(pre * self.delta_move(x, y)?)
    }

    /// `Z^{(n,kk,l)}_{x,y}` evaluated with `eta_x`, `eta_y` replaced by `cx`, `cy`:
    /// the part of `Y^{(n,kk)}` carried by `xi` with `xi_x + xi_y = l`.
    pub fn z_field(&self, kk: usize, l: usize, x: usize, y: usize, cx: u32, cy: u32) -> Result<S> {
        if l > kk || kk > self.setup.k {
            return Ok(S::zero());
        }
        let rest = self.tree.product_excluding(&[x, y]);
        let mut pair = S::zero();
        for a in 0..=l {
            pair = pair
                + self.phi_pow[x][a].clone()
                    * self.phi_pow[y][l - a].clone()
                    * S::dd(self.setup.table, a, cx)
                    * S::dd(self.setup.table, l - a, cy);
        }
        Ok(self.scales[kk].clone() * rest[kk - l].clone() * pair)
    }

    /// The gradient expanded over degrees:
    /// `sum_{s=1}^k sum_{m=1}^s n^{1-(m-1)d/2} (phi_y^m - phi_x^m) g(m) Z^{(n,k-m,s-m)}_{x,y}(eta - delta_x)`.
    pub fn gradient_decomposition(&self, x: usize, y: usize) -> Result<S> {
        Ok(self
            .gradient_decomposition_terms(x, y)?
            .into_iter()
            .fold(S::zero(), |acc, t| acc + t))
    }

    /// The `(s, m)` terms of the decomposition, `1 <= m <= s <= k`, in that order.
    pub fn gradient_decomposition_terms(&self, x: usize, y: usize) -> Result<Vec<S>> {
        self.check_move(x, y)?;
        let k = self.setup.k;
        let d = self.setup.dim();
        let mut terms = Vec::with_capacity(k * (k + 1) / 2);
        for s in 1..=k {
            for m in 1..=s {
                terms.push(self.decomposition_term(x, y, s, m, d)?);
            }
        }
        Ok(terms)
    }

    fn decomposition_term(&self, x: usize, y: usize, s: usize, m: usize, d: i64) -> Result<S> {
        let pre = self.setup.n_pow_half::<S>(2 - (m as i64 - 1) * d)?;
        let g = S::from_q(&self.setup.table.pair.g(m));
        let dphi = self.phi_pow[y][m].clone() - self.phi_pow[x][m].clone();
        let z = self.z_field(self.setup.k - m, s - m, x, y, self.eta[x] - 1, self.eta[y])?;
        Ok(pre * dphi * g * z)
    }

    /// Leading `s = 1` term `n (phi_y - phi_x) g(1) Z^{(n,k-1,0)}_{x,y}(eta - delta_x)`.
    pub fn leading_gradient_term(&self, x: usize, y: usize) -> Result<S> {
        self.check_move(x, y)?;
        self.decomposition_term(x, y, 1, 1, self.setup.dim())
    }

    /// `X^{(n,k)}(phi^{k-1} (x) psi)`: the field of the symmetrized tensor
    /// with one factor replaced by `psi`, via prefix and suffix products.
    pub fn mixed(&self, psi: &[S]) -> S {
        let k = self.setup.k;
        let len = k + 1;
        let v = self.eta.len();
        let mut prefix = Vec::with_capacity(v + 1);
        prefix.push(series::unit::<S>(len));
        for x in 0..v {
            let next = series::mul(&prefix[x], self.tree.leaf(x), len);
            prefix.push(next);
        }
        let mut suffix = series::unit::<S>(len);
        let mut acc = S::zero();
        for x in (0..v).rev() {
            let mut tx = vec![S::zero(); len];
            for (m, slot) in tx.iter_mut().enumerate().skip(1) {
                *slot = S::dd(self.setup.table, m, self.eta[x])
                    * S::from_i64(m as i64)
                    * self.phi_pow[x][m - 1].clone()
                    * psi[x].clone();
            }
            let others = series::mul(&prefix[x], &suffix, len);
            let term = series::mul(&tx, &others, len);
            acc = acc + term[k].clone();
            suffix = series::mul(&suffix, self.tree.leaf(x), len);
        }
        self.scales[k].clone() * acc / S::from_i64(k as i64)
    }

    /// `n^2 L Y` by summing over all admissible moves.
    pub fn drift_exact(&self) -> S {
        let n2 = S::from_i64((self.setup.n() * self.setup.n()) as i64);
        n2 * self.sum_over_moves(|delta| delta)
    }

    /// `alpha k (chi/2) X(phi^{k-1} (x) Delta phi)`.
    pub fn drift_closed(&self, laplacian: &[S]) -> S {
        let spec = self.setup.spec;
        let chi_half = S::from_q(&(self.setup.geom.kernel.chi.clone() / crate::rational::q(2)));
        S::from_q(&spec.alpha) * S::from_i64(self.setup.k as i64) * chi_half * self.mixed(laplacian)
    }

    /// `n^2 Gamma Y = n^{-d} sum rate * grad^2 = n^2 sum rate * (Y(eta') - Y(eta))^2`.
    pub fn carre_du_champ(&self) -> S {
        let n2 = S::from_i64((self.setup.n() * self.setup.n()) as i64);
        n2 * self.sum_over_moves(|delta| delta.clone() * delta)
    }

    /// `n^2 [L(Y^2) - 2 Y L Y]`, evaluating `Y` from scratch at every neighbour.
    pub fn carre_du_champ_defining(&self) -> Result<S> {
        let setup = self.setup;
        let phi: Vec<S> = self.phi_pow.iter().map(|p| p[1].clone()).collect();
        let f = |eta: &[u32]| -> S {
            FieldEvaluator::new(setup, &phi, eta)
                .map(|e| e.value())
                .unwrap_or_else(|_| S::zero())
        };
        let y = f(&self.eta);
        let l_sq = crate::dynamics::apply_generator(
            setup.spec,
            setup.geom,
            |e: &[u32]| {
                let v = f(e);
                v.clone() * v
            },
            &self.eta,
        );
        let l_y = crate::dynamics::apply_generator(setup.spec, setup.geom, f, &self.eta);
        let n2 = S::from_i64((setup.n() * setup.n()) as i64);
        Ok(n2 * (l_sq - S::from_i64(2) * y * l_y))
    }

    fn sum_over_moves(&self, g: impl Fn(S) -> S) -> S {
        let geom = self.setup.geom;
        let mut acc = S::zero();
        for x in 0..geom.volume() {
            if self.eta[x] == 0 {
                continue;
            }
            for j in 0..geom.degree() {
                let y = geom.neighbor(x, j);
                let rate: S = S::rate(self.setup.spec, geom, self.eta[x], self.eta[y], j);
                if rate == S::zero() {
                    continue;
                }
                let delta = self.delta_move(x, y).expect("positive-rate moves are admissible");
                acc = acc + rate * g(delta);
            }
        }
        acc
    }
}

impl<'a> FieldEvaluator<'a, f64> {
    /// `rho (alpha + sigma rho) c^2 n^{-d} sum_{x,r} <r, grad phi(x/n)>^2 p(r) (Y^{(n,k-1)})^2`
    /// with `c = -g(1)` the degree-1 constant of the convention.
    pub fn qv_closed(&self, gradients: &[Vec<f64>]) -> f64 {
        let lower = self.value_order(self.setup.k - 1);
        qv_prefactor(&self.setup, gradients) * lower * lower
    }
}

/// Deterministic factor of the quadratic-variation target.
pub fn qv_prefactor(setup: &FieldSetup, gradients: &[Vec<f64>]) -> f64 {
    let c = setup.table.pair.c_conv();
    let c2 = crate::rational::to_f64(&(c.clone() * c));
    let mob = crate::rational::to_f64(&setup.spec.mobility());
    let geom = setup.geom;
    let nd = (setup.n() as f64).powi(setup.dim() as i32);
    mob * c2 * gradient_energy(geom, gradients) / nd
}

/// `sum_{x,r} <r, grad phi(x/n)>^2 p(r)`.
pub fn gradient_energy(geom: &Geometry, gradients: &[Vec<f64>]) -> f64 {
    site_gradient_weights(geom, gradients).iter().sum()
}

/// Per-site `sum_r <r, grad phi(x/n)>^2 p(r)`.
pub fn site_gradient_weights(geom: &Geometry, gradients: &[Vec<f64>]) -> Vec<f64> {
    gradients
        .iter()
        .map(|g| {
            geom.kernel
                .offsets
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    let dot: f64 = r.iter().zip(g).map(|(a, b)| *a as f64 * b).sum();
                    dot * dot * geom.kernel.weight_f64(j)
                })
                .sum()
        })
        .collect()
}

fn leaf_series<S: FieldScalar>(setup: &FieldSetup, phi_pow: &[S], count: u32) -> Vec<S> {
    (0..=setup.k)
        .map(|m| S::dd(setup.table, m, count) * phi_pow[m].clone())
        .collect()
}

/// `Y^{(n,k)}(phi)(eta)` from scratch.
pub fn field_eval<S: FieldScalar>(setup: FieldSetup, phi: &[S], eta: &[u32]) -> Result<S> {
    Ok(FieldEvaluator::new(setup, phi, eta)?.value())
}

/// `X^{(n,k)}(phi^{k-1} (x) psi)(eta)` from scratch.
pub fn field_eval_mixed<S: FieldScalar>(setup: FieldSetup, phi: &[S], psi: &[S], eta: &[u32]) -> Result<S> {
    Ok(FieldEvaluator::new(setup, phi, eta)?.mixed(psi))
}

/// Brute-force field by summing over all `xi` with `k` particles; test oracle.
pub fn field_by_enumeration(setup: FieldSetup, phi: &[Q], eta: &[u32]) -> Result<Q> {
    let v = setup.geom.volume();
    let scale: Q = setup.n_pow_half(-(setup.k as i64) * setup.dim())?;
    let mut acc = Q::from_integer(0.into());
    for xi in crate::orthopoly::enumerate_multisets(v, setup.k, setup.spec.site_cap()) {
        let phi_xi = xi
            .iter()
            .fold(Q::from_integer(1.into()), |a, (x, c)| a * phi[x].powi(c as usize));
        acc += phi_xi * crate::orthopoly::eval_dd(setup.table, &xi, eta);
    }
    Ok(scale * acc)
}
