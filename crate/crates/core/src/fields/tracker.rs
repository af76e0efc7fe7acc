//! Incremental evaluation of the field, its drift and its carre du champ
//! along a trajectory.
//!
//! For the move `x -> y` put `Q_{x,y}(t) = S'_x S'_y / (S_x S_y) - 1`, where
//! primes denote the leaves after the move. Then
//! `Y(eta^{x,y}) - Y(eta) = n^{-kd/2} [t^k] P(t) Q_{x,y}(t)` with `P` the full
//! product. Keeping `A = sum rate * Q` and `B_{ab} = sum rate * Q_a Q_b`
//! makes the drift and the carre du champ `O(k^2)` reads, and an event only
//! touches the moves adjacent to the two updated sites.

use crate::model::Occupancy;

use super::evaluator::{site_gradient_weights, FieldSetup};
use super::product_tree::ProductTree;
use super::test_function::SiteFunction;

/// Events between from-scratch recomputations of the accumulated sums.
const REFRESH_INTERVAL: u64 = 4096;

/// Largest supported series length, i.e. field order plus one.
pub const MAX_SERIES_LEN: usize = 8;

type Buf = [f64; MAX_SERIES_LEN];

fn buf_mul(a: &[f64], b: &[f64], len: usize) -> Buf {
    let mut out = [0.0; MAX_SERIES_LEN];
    for k in 0..len {
        let mut acc = 0.0;
        for i in 0..=k {
            acc += a[i] * b[k - i];
        }
        out[k] = acc;
    }
    out
}

fn buf_inv(a: &[f64], len: usize) -> Buf {
    let mut out = [0.0; MAX_SERIES_LEN];
    let a0 = 1.0 / a[0];
    out[0] = a0;
    for k in 1..len {
        let mut acc = 0.0;
        for i in 1..=k {
            acc += a[i] * out[k - i];
        }
        out[k] = -acc * a0;
    }
    out
}

pub struct FieldTracker<'a> {
    setup: FieldSetup<'a>,
    len: usize,
    phi_pow: Vec<Vec<f64>>,
    laplacian: Vec<f64>,
    site_grad: Vec<f64>,
    move_grad: Vec<f64>,
    eta: Occupancy,
    tree: ProductTree<f64>,
    rates: Vec<f64>,
    q: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    u: Vec<f64>,
    a1: f64,
    a2: f64,
    scale: Vec<f64>,
    n2: f64,
    nd: f64,
    qv_factor: f64,
    since_refresh: u64,
    touched: Vec<usize>,
}

impl<'a> FieldTracker<'a> {
    pub fn new(setup: FieldSetup<'a>, phi: &SiteFunction, eta: &[u32]) -> Self {
        let k = setup.k;
        let len = k + 1;
        let geom = setup.geom;
        let v = geom.volume();
        let n = setup.n() as f64;
        let d = setup.dim() as i32;
        let phi_pow: Vec<Vec<f64>> = phi
            .values
            .iter()
            .map(|p| (0..=k).map(|m| p.powi(m as i32)).collect())
            .collect();
        assert!(len <= MAX_SERIES_LEN, "field order {k} exceeds the tracker limit");
        let leaves: Vec<Vec<f64>> = (0..v)
            .map(|x| leaf(&setup, &phi_pow[x], eta[x])[..len].to_vec())
            .collect();
        let move_grad: Vec<f64> = (0..v)
            .flat_map(|x| {
                let g = &phi.gradients[x];
                (0..geom.degree()).map(move |j| {
                    let dot: f64 = geom.kernel.offsets[j].iter().zip(g).map(|(a, b)| *a as f64 * b).sum();
                    dot * dot * geom.kernel.weight_f64(j)
                })
            })
            .collect();
        let mut t = FieldTracker {
            setup,
            len,
            laplacian: phi.laplacians.clone(),
            site_grad: site_gradient_weights(geom, &phi.gradients),
            move_grad,
            phi_pow,
            eta: eta.to_vec(),
            tree: ProductTree::new(&leaves, len),
            rates: vec![0.0; v * geom.degree()],
            q: vec![0.0; v * geom.degree() * len],
            a: vec![0.0; len],
            b: vec![0.0; len * len],
            u: vec![0.0; len],
            a1: 0.0,
            a2: 0.0,
            scale: (0..=k).map(|j| n.powf(-(j as f64) * d as f64 / 2.0)).collect(),
            n2: n * n,
            nd: n.powi(d),
            qv_factor: super::evaluator::qv_prefactor(&setup, &phi.gradients),
            since_refresh: 0,
            touched: Vec::new(),
        };
        t.refresh();
        t
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.eta
    }

    /// `Y^{(n,k)}`.
    pub fn value(&self) -> f64 {
        self.value_order(self.setup.k)
    }

    pub fn value_order(&self, j: usize) -> f64 {
        self.scale[j] * self.tree.root()[j]
    }

    /// `n^2 L Y`.
    pub fn drift(&self) -> f64 {
        let k = self.setup.k;
        let p = self.tree.root();
        let s: f64 = (0..=k).map(|j| p[j] * self.a[k - j]).sum();
        self.n2 * self.scale[k] * s
    }

    /// `n^2 Gamma Y`.
    pub fn carre_du_champ(&self) -> f64 {
        let k = self.setup.k;
        let len = self.len;
        let p = self.tree.root();
        let mut s = 0.0;
        for a in 0..=k {
            for b in 0..=k {
                s += p[a] * p[b] * self.b[(k - a) * len + (k - b)];
            }
        }
        self.n2 * self.scale[k] * self.scale[k] * s
    }

    /// `alpha k (chi/2) X(phi^{k-1} (x) Delta phi)`, using
    /// `X = n^{-kd/2} / k [t^k] P(t) U(t)` with `U = sum_x T_x / S_x`.
    pub fn drift_closed(&self) -> f64 {
        let k = self.setup.k;
        let p = self.tree.root();
        let s: f64 = (0..=k).map(|j| p[j] * self.u[k - j]).sum();
        let spec = self.setup.spec;
        spec.alpha_f64() * self.setup.geom.kernel.chi_f64() / 2.0 * self.scale[k] * s
    }

    fn site_u(&self, x: usize) -> Buf {
        let len = self.len;
        let mut tx = [0.0; MAX_SERIES_LEN];
        for (m, slot) in tx.iter_mut().enumerate().take(len).skip(1) {
            *slot = self.setup.table.dd_f64(m, self.eta[x]) * m as f64 * self.phi_pow[x][m - 1] * self.laplacian[x];
        }
        buf_mul(&tx, &buf_inv(self.tree.leaf(x), len), len)
    }

    fn account_u(&mut self, x: usize, sign: f64) {
        let ux = self.site_u(x);
        for (a, b) in self.u.iter_mut().zip(ux) {
            *a += sign * b;
        }
    }

    /// Quadratic-variation target built from the order `k - 1` field.
    pub fn qv_closed(&self) -> f64 {
        let lower = self.value_order(self.setup.k - 1);
        self.qv_factor * lower * lower
    }

    /// `n^{-d} sum_x w_x (eta_x - rho)` with `w_x = sum_r <r, grad phi>^2 p(r)`.
    pub fn replacement_linear(&self) -> f64 {
        self.a1 / self.nd
    }

    /// `n^{-d} sum_{x,r} <r, grad phi>^2 p(r) (eta_x - rho)(eta_{x+r} - rho)`.
    pub fn replacement_quadratic(&self) -> f64 {
        self.a2 / self.nd
    }

    pub fn apply_move(&mut self, x: usize, y: usize) {
        self.collect_touched(x, y);
        let touched = std::mem::take(&mut self.touched);
        for &s in &touched {
            self.account_site(s, -1.0);
        }
        self.account_u(x, -1.0);
        self.account_u(y, -1.0);
        self.eta[x] -= 1;
        self.eta[y] += 1;
        for &s in &[x, y] {
            let l = leaf(&self.setup, &self.phi_pow[s], self.eta[s]);
            self.tree.set_leaf(s, &l[..self.len]);
        }
        self.account_u(x, 1.0);
        self.account_u(y, 1.0);
        for &s in &touched {
            self.recompute_site(s);
            self.account_site(s, 1.0);
        }
        self.touched = touched;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh();
        }
    }

    fn collect_touched(&mut self, x: usize, y: usize) {
        let geom = self.setup.geom;
        self.touched.clear();
        for &s in &[x, y] {
            self.touched.push(s);
            for j in 0..geom.degree() {
                self.touched.push(geom.neighbor(s, j));
            }
        }
        self.touched.sort_unstable();
        self.touched.dedup();
    }

    /// Recomputes every accumulated sum from the current state.
    pub fn refresh(&mut self) {
        let v = self.eta.len();
        self.a.iter_mut().for_each(|c| *c = 0.0);
        self.b.iter_mut().for_each(|c| *c = 0.0);
        self.u.iter_mut().for_each(|c| *c = 0.0);
        self.a1 = 0.0;
        self.a2 = 0.0;
        for s in 0..v {
            self.recompute_site(s);
            self.account_site(s, 1.0);
            self.account_u(s, 1.0);
        }
        self.since_refresh = 0;
    }

    fn recompute_site(&mut self, x: usize) {
        let geom = self.setup.geom;
        let len = self.len;
        let kdeg = geom.degree();
        for j in 0..kdeg {
            let y = geom.neighbor(x, j);
            let idx = x * kdeg + j;
            let rate = geom.kernel.weight_f64(j) * self.setup.spec.pair_rate_f64(self.eta[x], self.eta[y]);
            self.rates[idx] = rate;
            let slot = &mut self.q[idx * len..(idx + 1) * len];
            if rate <= 0.0 {
                slot.iter_mut().for_each(|c| *c = 0.0);
                continue;
            }
            let before = buf_mul(self.tree.leaf(x), self.tree.leaf(y), len);
            let nx = leaf(&self.setup, &self.phi_pow[x], self.eta[x] - 1);
            let ny = leaf(&self.setup, &self.phi_pow[y], self.eta[y] + 1);
            let after = buf_mul(&nx, &ny, len);
            let ratio = buf_mul(&after, &buf_inv(&before, len), len);
            for (m, c) in slot.iter_mut().enumerate() {
                *c = ratio[m] - if m == 0 { 1.0 } else { 0.0 };
            }
        }
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) the moves out of `x` and the
    /// replacement-statistic terms anchored at `x`.
    fn account_site(&mut self, x: usize, sign: f64) {
        let geom = self.setup.geom;
        let len = self.len;
        let kdeg = geom.degree();
        let rho = self.setup.spec.rho_f64();
        let ex = self.eta[x] as f64 - rho;
        self.a1 += sign * self.site_grad[x] * ex;
        for j in 0..kdeg {
            let idx = x * kdeg + j;
            let y = geom.neighbor(x, j);
            self.a2 += sign * self.move_grad[idx] * ex * (self.eta[y] as f64 - rho);
            let rate = self.rates[idx];
            if rate <= 0.0 {
                continue;
            }
            let q = &self.q[idx * len..(idx + 1) * len];
            for a in 0..len {
                self.a[a] += sign * rate * q[a];
                for b in 0..len {
                    self.b[a * len + b] += sign * rate * q[a] * q[b];
                }
            }
        }
    }
}

fn leaf(setup: &FieldSetup, phi_pow: &[f64], count: u32) -> Buf {
    let mut out = [0.0; MAX_SERIES_LEN];
    for (m, slot) in out.iter_mut().enumerate().take(setup.k + 1) {
        *slot = setup.table.dd_f64(m, count) * phi_pow[m];
    }
    out
}
