//! Particle system specification: model family, transition kernel, torus,
//! configurations, the stationary product marginals and the duality weights.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, as_nonneg_integer, binom_q, factorial, fmt_q, q, rising, to_f64, Q};

/// Model family with its sign parameter `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Independent,
    Exclusion,
    Inclusion,
}

impl Family {
    pub fn sigma(self) -> i64 {
        match self {
            Family::Independent => 0,
            Family::Exclusion => -1,
            Family::Inclusion => 1,
        }
    }

    pub fn from_sigma(sigma: i64) -> Result<Self> {
        match sigma {
            0 => Ok(Family::Independent),
            -1 => Ok(Family::Exclusion),
            1 => Ok(Family::Inclusion),
            s => Err(Error::InvalidModel(format!("sigma must be -1, 0 or 1, got {s}"))),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Family::Independent => "IRW",
            Family::Exclusion => "SEP",
            Family::Inclusion => "SIP",
        }
    }
}

/// `(sigma, alpha, rho)`: jump rate `p(r) eta_i (alpha + sigma eta_{i+r})`,
/// stationary density `rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub alpha: Q,
    pub rho: Q,
    alpha_f: f64,
    rho_f: f64,
}

impl ModelSpec {
    pub fn new(sigma: i64, alpha: Q, rho: Q) -> Result<Self> {
        let family = Family::from_sigma(sigma)?;
        if !alpha.is_positive() {
            return Err(Error::InvalidModel(format!(
                "alpha must be positive, got {}",
                fmt_q(&alpha)
            )));
        }
        if !rho.is_positive() {
            return Err(Error::InvalidModel(format!(
                "rho must be positive, got {}",
                fmt_q(&rho)
            )));
        }
        if family == Family::Exclusion {
            if as_nonneg_integer(&alpha).is_none() {
                return Err(Error::InvalidModel(format!(
                    "exclusion requires integer alpha, got {}",
                    fmt_q(&alpha)
                )));
            }
            if rho >= alpha {
                return Err(Error::InvalidModel(format!(
                    "exclusion requires rho < alpha, got rho = {}",
                    fmt_q(&rho)
                )));
            }
        }
        Ok(ModelSpec {
            family,
            alpha_f: to_f64(&alpha),
            rho_f: to_f64(&rho),
            alpha,
            rho,
        })
    }

    pub fn sigma(&self) -> i64 {
        self.family.sigma()
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha_f
    }

    pub fn rho_f64(&self) -> f64 {
        self.rho_f
    }

    /// Maximal site occupancy (exclusion only).
    pub fn site_cap(&self) -> Option<u32> {
        match self.family {
            Family::Exclusion => as_nonneg_integer(&self.alpha).map(|a| a as u32),
            _ => None,
        }
    }

    /// Rate factor `eta_from * (alpha + sigma eta_to)` (kernel weight excluded).
    pub fn pair_rate_f64(&self, eta_from: u32, eta_to: u32) -> f64 {
        let f = eta_from as f64 * (self.alpha_f + self.sigma() as f64 * eta_to as f64);
        f.max(0.0)
    }

    pub fn pair_rate_q(&self, eta_from: u32, eta_to: u32) -> Q {
        let f = q(eta_from as i64) * (&self.alpha + q(self.sigma() * eta_to as i64));
        if f.is_negative() {
            Q::zero()
        } else {
            f
        }
    }

    /// `Var_nu(eta_x) = rho (1 + sigma rho / alpha)`.
    pub fn variance(&self) -> Q {
        &self.rho * (Q::one() + q(self.sigma()) * &self.rho / &self.alpha)
    }

    /// `rho (alpha + sigma rho)`, the prefactor of the quadratic-variation target.
    pub fn mobility(&self) -> Q {
        &self.rho * (&self.alpha + q(self.sigma()) * &self.rho)
    }
}

/// Symmetric, irreducible, finite-range transition kernel on `Z^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub dim: usize,
    pub radius: usize,
    /// Offsets with positive weight.
    pub offsets: Vec<Vec<i64>>,
    pub weights: Vec<Q>,
    weights_f: Vec<f64>,
    /// Per-axis second moment `sum_r r_l^2 p(r)`.
    pub chi: Q,
}

impl Kernel {
    /// Validates and normalizes raw weights.
    pub fn build(dim: usize, radius: usize, entries: &[(Vec<i64>, Q)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be at least 1".into()));
        }
        let mut table: BTreeMap<Vec<i64>, Q> = BTreeMap::new();
        for (off, w) in entries {
            if off.len() != dim {
                return Err(Error::InvalidKernel(format!(
                    "offset {off:?} does not have dimension {dim}"
                )));
            }
            if off.iter().any(|c| c.unsigned_abs() as usize > radius) {
                return Err(Error::InvalidKernel(format!(
                    "offset {off:?} lies outside range {radius}"
                )));
            }
            if w.is_negative() {
                return Err(Error::InvalidKernel(format!("negative weight {} at {off:?}", fmt_q(w))));
            }
            *table.entry(off.clone()).or_insert_with(Q::zero) += w;
        }
        if let Some(w0) = table.get(&vec![0; dim]) {
            if !w0.is_zero() {
                return Err(Error::ZeroAtOriginViolation(fmt_q(w0)));
            }
        }
        table.retain(|_, w| !w.is_zero());
        if table.is_empty() {
            return Err(Error::EmptySupport);
        }

        let weight_of = |r: &Vec<i64>| table.get(r).cloned().unwrap_or_else(Q::zero);
        let mut by_norm: HashMap<i64, Vec<i64>> = HashMap::new();
        for r in box_points(dim, radius) {
            let norm2: i64 = r.iter().map(|c| c * c).sum();
            match by_norm.get(&norm2) {
                None => {
                    by_norm.insert(norm2, r);
                }
                Some(rep) => {
                    let (a, b) = (weight_of(rep), weight_of(&r));
                    if a != b {
                        return Err(Error::SymmetryViolation {
                            offset: rep.clone(),
                            weight: fmt_q(&a),
                            image: r,
                            image_weight: fmt_q(&b),
                        });
                    }
                }
            }
        }

        let support: Vec<Vec<i64>> = table.keys().cloned().collect();
        if !generates_full_lattice(&support, dim) {
            return Err(Error::ReducibleKernel { dim });
        }

        let total: Q = table.values().cloned().sum();
        let offsets: Vec<Vec<i64>> = table.keys().cloned().collect();
        let weights: Vec<Q> = table.values().map(|w| w / &total).collect();
        let chis: Vec<Q> = (0..dim)
            .map(|l| offsets.iter().zip(&weights).map(|(r, w)| q(r[l] * r[l]) * w).sum())
            .collect();
        if chis.iter().any(|c| c != &chis[0]) {
            return Err(Error::InvalidKernel("per-axis second moments differ".into()));
        }
        let weights_f = weights.iter().map(to_f64).collect();
        Ok(Kernel {
            dim,
            radius,
            offsets,
            weights,
            weights_f,
            chi: chis[0].clone(),
        })
    }

    pub fn nearest_neighbor(dim: usize) -> Self {
        let mut entries = Vec::new();
        for l in 0..dim {
            for s in [-1, 1] {
                let mut r = vec![0; dim];
                r[l] = s;
                entries.push((r, Q::one()));
            }
        }
        Kernel::build(dim, 1, &entries).expect("nearest-neighbour kernel is valid")
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn weight_f64(&self, j: usize) -> f64 {
        self.weights_f[j]
    }

    pub fn weights_f64(&self) -> &[f64] {
        &self.weights_f
    }

    pub fn chi_f64(&self) -> f64 {
        to_f64(&self.chi)
    }
}

fn box_points(dim: usize, radius: usize) -> Vec<Vec<i64>> {
    let r = radius as i64;
    let mut pts = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for p in &pts {
            for c in -r..=r {
                let mut v = p.clone();
                v.push(c);
                next.push(v);
            }
        }
        pts = next;
    }
    pts
}

/// Whether integer combinations of `gens` give all of `Z^dim`, by integer
/// row reduction to echelon form and checking unit pivots.
fn generates_full_lattice(gens: &[Vec<i64>], dim: usize) -> bool {
    let mut rows: Vec<Vec<i64>> = gens.to_vec();
    let mut det: i64 = 1;
    for col in 0..dim {
        loop {
            let mut nz: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][col] != 0).collect();
            if nz.is_empty() {
                return false;
            }
            nz.sort_by_key(|&i| rows[i][col].abs());
            let p = nz[0];
            if nz.len() == 1 {
                det *= rows[p][col].abs();
                rows.swap_remove(p);
                break;
            }
            let pivot = rows[p].clone();
            for &i in &nz[1..] {
                let f = rows[i][col] / pivot[col];
                for c in 0..dim {
                    rows[i][c] -= f * pivot[c];
                }
            }
        }
        if det != 1 {
            return false;
        }
    }
    det == 1
}

/// The discrete torus `(Z/L)^d` with row-major site indexing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Torus {
    pub dim: usize,
    pub side: usize,
}

impl Torus {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::InvalidTorus(format!("bad torus d = {dim}, L = {side}")));
        }
        Ok(Torus { dim, side })
    }

    pub fn volume(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn coords(&self, mut site: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for l in (0..self.dim).rev() {
            c[l] = site % self.side;
            site /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.side + c)
    }

    pub fn shift(&self, site: usize, offset: &[i64]) -> usize {
        let l = self.side as i64;
        let c: Vec<usize> = self
            .coords(site)
            .iter()
            .zip(offset)
            .map(|(&x, &r)| (x as i64 + r).rem_euclid(l) as usize)
            .collect();
        self.index(&c)
    }

    /// Macroscopic position `x / n` of a site.
    pub fn position(&self, site: usize) -> Vec<f64> {
        self.coords(site).iter().map(|&c| c as f64 / self.side as f64).collect()
    }
}

/// Torus plus kernel with a precomputed neighbour table.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub torus: Torus,
    pub kernel: Kernel,
    neighbors: Vec<usize>,
}

impl Geometry {
    pub fn new(torus: Torus, kernel: Kernel) -> Result<Self> {
        if torus.dim != kernel.dim {
            return Err(Error::InvalidTorus(format!(
                "torus dimension {} != kernel dimension {}",
                torus.dim, kernel.dim
            )));
        }
        if torus.side <= 2 * kernel.radius {
            return Err(Error::InvalidTorus(format!(
                "side L = {} must exceed twice the kernel range {}",
                torus.side, kernel.radius
            )));
        }
        let v = torus.volume();
        let mut neighbors = Vec::with_capacity(v * kernel.len());
        for s in 0..v {
            for r in &kernel.offsets {
                neighbors.push(torus.shift(s, r));
            }
        }
        let g = Geometry {
            torus,
            kernel,
            neighbors,
        };
        if !g.is_torus_irreducible() {
            return Err(Error::ReducibleKernel { dim: g.torus.dim });
        }
        Ok(g)
    }

    pub fn nearest_neighbor(dim: usize, side: usize) -> Result<Self> {
        Geometry::new(Torus::new(dim, side)?, Kernel::nearest_neighbor(dim))
    }

    pub fn volume(&self) -> usize {
        self.torus.volume()
    }

    /// Number of kernel offsets.
    pub fn degree(&self) -> usize {
        self.kernel.len()
    }

    #[inline]
    pub fn neighbor(&self, site: usize, j: usize) -> usize {
        self.neighbors[site * self.kernel.len() + j]
    }

    /// Site `site - r_j`; for symmetric kernels this is another neighbour.
    pub fn back_neighbor(&self, site: usize, j: usize) -> usize {
        let neg: Vec<i64> = self.kernel.offsets[j].iter().map(|c| -c).collect();
        self.torus.shift(site, &neg)
    }

    fn is_torus_irreducible(&self) -> bool {
        let v = self.volume();
        let mut seen = vec![false; v];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(s) = queue.pop_front() {
            for j in 0..self.degree() {
                let t = self.neighbor(s, j);
                if !seen[t] {
                    seen[t] = true;
                    count += 1;
                    queue.push_back(t);
                }
            }
        }
        count == v
    }
}

/// Dense occupation numbers `eta_x`.
pub type Occupancy = Vec<u32>;

/// Labelled particle positions.
pub type CoordVector = Vec<usize>;

/// Sparse dual configuration: a finite multiset of sites.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualConfig(pub BTreeMap<usize, u32>);

impl DualConfig {
    pub fn from_sites(sites: &[usize]) -> Self {
        let mut m = BTreeMap::new();
        for &s in sites {
            *m.entry(s).or_insert(0) += 1;
        }
        DualConfig(m)
    }

    pub fn from_dense(eta: &[u32]) -> Self {
        DualConfig(
            eta.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| (s, c))
                .collect(),
        )
    }

    pub fn to_dense(&self, volume: usize) -> Occupancy {
        let mut eta = vec![0; volume];
        for (&s, &c) in &self.0 {
            eta[s] = c;
        }
        eta
    }

    pub fn size(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn count(&self, site: usize) -> u32 {
        self.0.get(&site).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|(&s, &c)| (s, c))
    }

    /// Sorted list of occupied sites with multiplicity.
    pub fn sites(&self) -> Vec<usize> {
        self.iter()
            .flat_map(|(s, c)| std::iter::repeat_n(s, c as usize))
            .collect()
    }

    pub fn from_coords(x: &[usize]) -> Self {
        Self::from_sites(x)
    }
}

/// Single-site marginal of the product measure `nu_rho`: Poisson, binomial
/// or negative binomial according to the family.
#[derive(Clone, Debug)]
pub struct MarginalLaw {
    family: Family,
    alpha: f64,
    rho: f64,
    p0: f64,
}

impl MarginalLaw {
    pub fn new(spec: &ModelSpec) -> Self {
        let (a, r) = (spec.alpha_f64(), spec.rho_f64());
        let p0 = match spec.family {
            Family::Independent => (-r).exp(),
            Family::Exclusion => (1.0 - r / a).powf(a),
            Family::Inclusion => (a / (a + r)).powf(a),
        };
        MarginalLaw {
            family: spec.family,
            alpha: a,
            rho: r,
            p0,
        }
    }

    /// `P(eta = n + 1) / P(eta = n)`.
    pub fn ratio(&self, n: u32) -> f64 {
        let n = n as f64;
        match self.family {
            Family::Independent => self.rho / (n + 1.0),
            Family::Exclusion => {
                let p = self.rho / self.alpha;
                ((self.alpha - n) / (n + 1.0) * p / (1.0 - p)).max(0.0)
            }
            Family::Inclusion => {
                let p = self.rho / (self.rho + self.alpha);
                (self.alpha + n) / (n + 1.0) * p
            }
        }
    }

    pub fn pmf_table(&self, n_max: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n_max + 1);
        let mut p = self.p0;
        for n in 0..=n_max {
            out.push(p);
            p *= self.ratio(n as u32);
        }
        out
    }

    pub fn pmf(&self, n: u32) -> f64 {
        self.pmf_table(n as usize)[n as usize]
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let mut n = 0u32;
        let mut p = self.p0;
        let mut cdf = p;
        while cdf < u {
            p *= self.ratio(n);
            n += 1;
            cdf += p;
            if p == 0.0 && cdf < u {
                // Rounding left the CDF just short of one.
                break;
            }
        }
        n
    }

    /// `sup_{m >= n} P(m+1)/P(m)`, used to bound tails geometrically.
    pub fn ratio_sup_from(&self, n: u32) -> f64 {
        match self.family {
            Family::Inclusion if self.alpha < 1.0 => self.rho / (self.rho + self.alpha),
            _ => self.ratio(n),
        }
    }
}

/// Draws `eta ~ nu_rho` on `volume` sites.
pub fn nu_sample<R: Rng + ?Sized>(spec: &ModelSpec, volume: usize, rng: &mut R) -> Occupancy {
    let law = MarginalLaw::new(spec);
    (0..volume).map(|_| law.sample(rng)).collect()
}

pub fn nu_marginal_pmf(spec: &ModelSpec, n: u32) -> f64 {
    MarginalLaw::new(spec).pmf(n)
}

/// Unnormalized single-site weight proportional to the marginal pmf, exact.
/// The normalization is the same at every site, so it cancels in
/// detailed-balance ratios.
pub fn nu_weight_unnormalized(spec: &ModelSpec, n: u32) -> Q {
    let (a, r) = (&spec.alpha, &spec.rho);
    let nn = n as u64;
    match spec.family {
        Family::Independent => pow(r, nn) / Q::from_integer(factorial(nn)),
        Family::Exclusion => binom_q(a, nn) * pow(&(r / (a - r)), nn),
        Family::Inclusion => rising(a, nn) / Q::from_integer(factorial(nn)) * pow(&(r / (a + r)), nn),
    }
}

fn pow(x: &Q, m: u64) -> Q {
    (0..m).fold(Q::one(), |acc, _| acc * x)
}

/// Readings of the inclusion-process duality weight `lambda(m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InclusionLambdaReading {
    /// `Gamma(alpha + m) / (m! Gamma(alpha))`.
    RisingOverFactorial,
    /// `m! Gamma(alpha + m) / Gamma(alpha)`.
    FactorialTimesRising,
    /// `Gamma(alpha + m) / Gamma(alpha)`.
    Rising,
}

impl InclusionLambdaReading {
    pub const ALL: [InclusionLambdaReading; 3] = [
        InclusionLambdaReading::RisingOverFactorial,
        InclusionLambdaReading::FactorialTimesRising,
        InclusionLambdaReading::Rising,
    ];

    pub fn weight(self, alpha: &Q, m: u64) -> Q {
        let r = rising(alpha, m);
        let f = Q::from_integer(factorial(m));
        match self {
            InclusionLambdaReading::RisingOverFactorial => r / f,
            InclusionLambdaReading::FactorialTimesRising => r * f,
            InclusionLambdaReading::Rising => r,
        }
    }
}

/// Single-site duality weight `lambda(m)`.
pub fn lambda_weight(spec: &ModelSpec, m: u64) -> Result<Q> {
    match spec.family {
        Family::Independent => Ok(Q::one() / Q::from_integer(factorial(m))),
        Family::Exclusion => {
            let cap = as_nonneg_integer(&spec.alpha).unwrap_or(0);
            if m > cap {
                return Err(Error::OutOfSupport(format!(
                    "exclusion weight lambda({m}) with alpha = {cap}"
                )));
            }
            Ok(binom_q(&spec.alpha, m))
        }
        Family::Inclusion => Ok(InclusionLambdaReading::RisingOverFactorial.weight(&spec.alpha, m)),
    }
}

/// `pi(m) = m! lambda(m)`.
pub fn pi_weight(spec: &ModelSpec, m: u64) -> Result<Q> {
    Ok(lambda_weight(spec, m)? * Q::from_integer(factorial(m)))
}

/// `Lambda(xi) = prod_x lambda(xi_x)`.
#[allow(non_snake_case)]
pub fn Lambda_of(spec: &ModelSpec, xi: &DualConfig) -> Result<Q> {
    xi.iter()
        .try_fold(Q::one(), |acc, (_, c)| Ok(acc * lambda_weight(spec, c as u64)?))
}

/// `Pi(x) = prod_x pi(xi_x)` over the occupation numbers of `x`.
#[allow(non_snake_case)]
pub fn Pi_of(spec: &ModelSpec, x: &[usize]) -> Result<Q> {
    DualConfig::from_coords(x)
        .iter()
        .try_fold(Q::one(), |acc, (_, c)| Ok(acc * pi_weight(spec, c as u64)?))
}

/// Number of coordinate vectors projecting to `xi`: `k! / prod xi_x!`.
#[allow(non_snake_case)]
pub fn N_of(xi: &DualConfig) -> BigInt {
    let k = xi.size() as u64;
    xi.iter().fold(factorial(k), |acc, (_, c)| acc / factorial(c as u64))
}

/// `E_nu[(eta)_j]` (falling factorial moment), exact.
pub fn factorial_moment(spec: &ModelSpec, j: u64) -> Q {
    match spec.family {
        Family::Independent => pow(&spec.rho, j),
        _ => {
            let s = q(spec.sigma());
            let prod = (0..j).fold(Q::one(), |acc, i| acc * (&spec.alpha + &s * q(i as i64)));
            prod * pow(&(&spec.rho / &spec.alpha), j)
        }
    }
}

/// `E_nu[eta^m]`, via Stirling numbers of the second kind.
pub fn raw_moment(spec: &ModelSpec, m: u64) -> Q {
    let s2 = stirling2_row(m as usize);
    s2.iter()
        .enumerate()
        .map(|(j, c)| q(*c) * factorial_moment(spec, j as u64))
        .sum()
}

fn stirling2_row(m: usize) -> Vec<i64> {
    let mut row = vec![1i64];
    for n in 1..=m {
        let mut next = vec![0i64; n + 1];
        for k in 1..=n {
            let prev_k = if k < row.len() { row[k] } else { 0 };
            next[k] = k as i64 * prev_k + row[k - 1];
        }
        row = next;
    }
    row
}

/// Parses kernel weights from `(offset, weight)` text pairs.
pub fn kernel_from_pairs(dim: usize, radius: usize, pairs: &[(Vec<i64>, String)]) -> Result<Kernel> {
    let entries = pairs
        .iter()
        .map(|(o, w)| Ok((o.clone(), rational::parse_q(w)?)))
        .collect::<Result<Vec<_>>>()?;
    Kernel::build(dim, radius, &entries)
}
