//! Single-site orthogonal duality polynomials.
//!
//! The unnormalized polynomials `dd(m, n)` are the coefficients of
//! `f(t, n) = e(t) h(t)^n`; the normalized ones are `d(m, n) = dd(m, n) / lambda(m)`.
//! Each row is stored in Newton form `dd(m, n) = sum_j beta_{m,j} binom(n, j)`,
//! which follows from `h^n = sum_j binom(n, j) (h - 1)^j`, so evaluation at
//! any `n` is exact and no table can overflow.

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::generator::duality_residual;
use crate::error::{Error, Result};
use crate::model::{lambda_weight, raw_moment, DualConfig, Family, Geometry, MarginalLaw, ModelSpec, Occupancy};
use crate::rational::{fmt_q, q, to_f64, Q};
use crate::series;

/// Tail mass tolerated by truncated float sums.
pub const TAIL_TOLERANCE: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairOrigin {
    /// Family prefactor and Moebius factor as printed, up to argument signs.
    Printed,
    /// Family prefactor kept, Moebius numerator solved from the mean-zero condition.
    MeanZeroFallback,
}

/// The pair `(e, h)` with `f(t, n) = e(t) h(t)^n`, stored as truncated series.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratingPair {
    pub sign_e: i8,
    pub sign_h: i8,
    pub origin: PairOrigin,
    pub e: Vec<Q>,
    pub h: Vec<Q>,
    /// Numerator and denominator coefficients of `h = (1 - a t) / (1 - b t)`
    /// (before the sign substitution).
    pub h_num: Q,
    pub h_den: Q,
}

impl GeneratingPair {
    pub fn order(&self) -> usize {
        self.e.len() - 1
    }

    /// `g(m) = [t^m] h(t)`: `dd(m, n+1) = sum_j g(m-j) dd(j, n)`.
    pub fn g(&self, m: usize) -> Q {
        self.h.get(m).cloned().unwrap_or_else(Q::zero)
    }

    /// `g~(m) = [t^m] 1/h(t)`: `dd(m, n-1) = sum_j g~(m-j) dd(j, n)`.
    pub fn g_tilde(&self) -> Vec<Q> {
        series::inv(&self.h, self.h.len())
    }

    /// Degree-1 constant of this convention, `c = -g(1)`, so that `dd(1, n) = -c (n - rho)`.
    pub fn c_conv(&self) -> Q {
        -self.g(1)
    }

    pub fn label(&self) -> String {
        let s = |v: i8| if v > 0 { '+' } else { '-' };
        format!("({},{})", s(self.sign_e), s(self.sign_h))
    }
}

/// Family prefactor `e(t)`: `exp(-t)`, `(1 + t)^alpha`, `(1 - t)^-alpha`.
pub fn family_prefactor(spec: &ModelSpec, len: usize) -> Vec<Q> {
    match spec.family {
        Family::Independent => series::exp(&q(-1), len),
        Family::Exclusion => series::binomial(&spec.alpha, &q(1), len),
        Family::Inclusion => series::binomial(&(-spec.alpha.clone()), &q(-1), len),
    }
}

/// The family constant as printed: `1/rho`, `alpha/rho` (sigma = +1),
/// `(alpha + rho)/rho` (sigma = -1).
pub fn c_printed(spec: &ModelSpec, sigma: i64) -> Q {
    match sigma {
        0 => Q::one() / &spec.rho,
        1 => &spec.alpha / &spec.rho,
        _ => (&spec.alpha + &spec.rho) / &spec.rho,
    }
}

fn assemble(spec: &ModelSpec, order: usize, sign_e: i8, sign_h: i8, a: Q, origin: PairOrigin) -> GeneratingPair {
    let len = order + 1;
    let b = q(spec.sigma());
    let e = series::scale(&family_prefactor(spec, len), &q(sign_e as i64));
    let h = series::scale(&series::mobius(&a, &b, len), &q(sign_h as i64));
    GeneratingPair {
        sign_e,
        sign_h,
        origin,
        e,
        h,
        h_num: a,
        h_den: b,
    }
}

/// Printed pair with argument signs `e(sign_e t)`, `h(sign_h t)`, where
/// `h = (1 - c_{-sigma} t) / (1 - sigma t)`.
pub fn build_generating_pair(spec: &ModelSpec, order: usize, sign_e: i8, sign_h: i8) -> GeneratingPair {
    let a = c_printed(spec, -spec.sigma());
    assemble(spec, order, sign_e, sign_h, a, PairOrigin::Printed)
}

/// Keeps `e(sign_e t)` and solves the Moebius numerator from
/// `e'(0) + rho h'(0) = 0`, i.e. `a = sigma + e'(0) / rho`.
pub fn build_mean_zero_pair(spec: &ModelSpec, order: usize, sign_e: i8) -> GeneratingPair {
    let e1 = family_prefactor(spec, 2)[1].clone() * q(sign_e as i64);
    let a = q(spec.sigma()) + e1 / &spec.rho;
    assemble(spec, order, sign_e, 1, a, PairOrigin::MeanZeroFallback)
}

/// Duality polynomial table for one model and convention.
#[derive(Clone, Debug)]
pub struct DualityTable {
    pub spec: ModelSpec,
    pub pair: GeneratingPair,
    pub m_max: usize,
    pub n_max: usize,
    newton: Vec<Vec<Q>>,
    newton_f: Vec<Vec<f64>>,
    dd_f: Vec<Vec<f64>>,
    d_f: Vec<Vec<f64>>,
    monomial: Vec<Vec<Q>>,
    pub lambda: Vec<Q>,
    lambda_f: Vec<f64>,
    /// `E_nu[dd(m, eta)^2]`, exact.
    pub norms: Vec<Q>,
    /// Certified bound on the tail beyond `n_max` of the truncated Gram sums.
    pub tail_bound: f64,
}

impl DualityTable {
    /// Builds the table up to degree `m_max` with float lookups up to `n_max`.
    /// Fails if the truncated Gram sums cannot be certified at `n_max`.
    pub fn build(spec: &ModelSpec, pair: &GeneratingPair, m_max: usize, n_max: usize) -> Result<Self> {
        let m_max = match spec.site_cap() {
            Some(cap) => m_max.min(cap as usize),
            None => m_max,
        };
        if pair.order() < m_max {
            return Err(Error::InvalidModel(format!(
                "generating pair order {} below requested degree {m_max}",
                pair.order()
            )));
        }
        let len = m_max + 1;
        let h_minus_one: Vec<Q> = pair.h[..len]
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { c - Q::one() } else { c.clone() })
            .collect();
        let mut newton = vec![vec![Q::zero(); len]; len];
        let mut power = pair.e[..len].to_vec();
        for j in 0..len {
            for m in 0..len {
                newton[m][j] = power[m].clone();
            }
            power = series::mul(&power, &h_minus_one, len);
        }
        let monomial: Vec<Vec<Q>> = newton.iter().map(|row| newton_to_monomial(row)).collect();
        let lambda: Vec<Q> = (0..len).map(|m| lambda_weight(spec, m as u64)).collect::<Result<_>>()?;
        let norms: Vec<Q> = (0..len)
            .map(|m| expectation_of_product(spec, &monomial[m], &monomial[m]))
            .collect();

        let mut table = DualityTable {
            spec: spec.clone(),
            pair: pair.clone(),
            m_max,
            n_max,
            newton_f: newton.iter().map(|r| r.iter().map(to_f64).collect()).collect(),
            newton,
            dd_f: vec![],
            d_f: vec![],
            monomial,
            lambda_f: lambda.iter().map(to_f64).collect(),
            lambda,
            norms,
            tail_bound: 0.0,
        };
        table.tail_bound = table.gram_tail_bound(n_max);
        let scale = table.norms.iter().map(to_f64).fold(1.0, f64::max);
        if table.tail_bound > TAIL_TOLERANCE * scale {
            return Err(Error::TruncationTooSmall {
                n_max,
                tail: table.tail_bound,
                tolerance: TAIL_TOLERANCE * scale,
            });
        }
        let cache = match spec.site_cap() {
            Some(cap) => cap as usize,
            None => n_max.max(64),
        };
        table.dd_f = (0..len)
            .map(|m| (0..=cache).map(|n| to_f64(&table.dd(m, n as u32))).collect())
            .collect();
        table.d_f = (0..len)
            .map(|m| table.dd_f[m].iter().map(|v| v / table.lambda_f[m]).collect())
            .collect();
        Ok(table)
    }

    /// Builds the table choosing the smallest certified `n_max`.
    pub fn auto(spec: &ModelSpec, pair: &GeneratingPair, m_max: usize) -> Result<Self> {
        if let Some(cap) = spec.site_cap() {
            return Self::build(spec, pair, m_max, cap as usize);
        }
        let mut n_max = 16;
        loop {
            match Self::build(spec, pair, m_max, n_max) {
                Err(Error::TruncationTooSmall { .. }) if n_max < 1 << 16 => n_max *= 2,
                other => return other,
            }
        }
    }

    /// Unnormalized polynomial `dd(m, n)`; zero beyond the table degree for exclusion.
    pub fn dd(&self, m: usize, n: u32) -> Q {
        if m > self.m_max {
            return Q::zero();
        }
        let mut binom = Q::one();
        let mut acc = Q::zero();
        for (j, beta) in self.newton[m].iter().enumerate() {
            if j > 0 {
                if (n as usize) < j {
                    break;
                }
                binom = binom * q(n as i64 - j as i64 + 1) / q(j as i64);
            }
            acc += beta * &binom;
        }
        acc
    }

    /// Normalized polynomial `d(m, n) = dd(m, n) / lambda(m)`.
    pub fn d(&self, m: usize, n: u32) -> Result<Q> {
        if m > self.m_max {
            return Err(Error::OutOfSupport(format!(
                "degree {m} beyond table degree {}",
                self.m_max
            )));
        }
        Ok(self.dd(m, n) / &self.lambda[m])
    }

    #[inline]
    pub fn dd_f64(&self, m: usize, n: u32) -> f64 {
        if m > self.m_max {
            return 0.0;
        }
        match self.dd_f[m].get(n as usize) {
            Some(v) => *v,
            None => newton_eval_f64(&self.newton_f[m], n),
        }
    }

    #[inline]
    pub fn d_f64(&self, m: usize, n: u32) -> f64 {
        match self.d_f.get(m).and_then(|row| row.get(n as usize)) {
            Some(v) => *v,
            None => self.dd_f64(m, n) / self.lambda_f[m],
        }
    }

    pub fn lambda_f64(&self, m: usize) -> f64 {
        self.lambda_f[m]
    }

    /// Monomial coefficients of `dd(m, .)`.
    pub fn monomial(&self, m: usize) -> &[Q] {
        &self.monomial[m]
    }

    /// Per-site normalization `mu(m) = 1 / E[d(m)^2] = lambda(m)^2 / E[dd(m)^2]`.
    pub fn mu_single(&self, m: usize) -> Q {
        &self.lambda[m] * &self.lambda[m] / &self.norms[m]
    }

    /// Exact Gram matrix `E[d(m) d(m')]` of the normalized polynomials.
    pub fn gram_exact(&self) -> Vec<Vec<Q>> {
        let len = self.m_max + 1;
        (0..len)
            .map(|a| {
                (0..len)
                    .map(|b| {
                        expectation_of_product(&self.spec, &self.monomial[a], &self.monomial[b])
                            / (&self.lambda[a] * &self.lambda[b])
                    })
                    .collect()
            })
            .collect()
    }

    /// Gram matrix of the normalized polynomials as truncated float sums
    /// over `n <= n_max`, with the certified tail bound.
    pub fn gram_truncated(&self) -> (Vec<Vec<f64>>, f64) {
        let len = self.m_max + 1;
        let pmf = MarginalLaw::new(&self.spec).pmf_table(self.n_max);
        let mut g = vec![vec![0.0; len]; len];
        for (n, p) in pmf.iter().enumerate() {
            for a in 0..len {
                let da = self.d_f64(a, n as u32);
                for b in 0..len {
                    g[a][b] += da * self.d_f64(b, n as u32) * p;
                }
            }
        }
        let lam_min = self.lambda_f.iter().cloned().fold(f64::INFINITY, f64::min);
        (g, self.tail_bound / (lam_min * lam_min))
    }

    /// Bound on `sum_{n > n_max} |dd(a, n) dd(b, n)| nu(n)` over all `a, b`.
    fn gram_tail_bound(&self, n_max: usize) -> f64 {
        if let Some(cap) = self.spec.site_cap() {
            return if n_max >= cap as usize { 0.0 } else { f64::INFINITY };
        }
        let law = MarginalLaw::new(&self.spec);
        let mut worst: f64 = 0.0;
        for a in 0..=self.m_max {
            for b in 0..=self.m_max {
                let prod = poly_mul(&self.monomial[a], &self.monomial[b]);
                let coef: f64 = prod.iter().map(|c| to_f64(&c.abs())).sum();
                let deg = (prod.len() - 1) as i32;
                let n1 = (n_max + 1) as f64;
                let growth = ((n1 + 1.0) / n1).powi(deg);
                let r = growth * law.ratio_sup_from(n_max as u32 + 1);
                if r >= 1.0 {
                    return f64::INFINITY;
                }
                let first = n1.powi(deg) * law.pmf(n_max as u32 + 1);
                worst = worst.max(coef * first / (1.0 - r));
            }
        }
        worst
    }

    /// Degree-1 constant read off the table: `dd(1, 0) - dd(1, 1)`.
    pub fn c_measured(&self) -> Q {
        self.dd(1, 0) - self.dd(1, 1)
    }

    /// Wide CSV: one row per degree `m`, one column per `n <= n_max`, exact values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m");
        for n in 0..=self.n_max {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for m in 0..=self.m_max {
            let _ = write!(out, "{m}");
            for n in 0..=self.n_max {
                let _ = write!(out, ",{}", fmt_q(&self.dd(m, n as u32)));
            }
            out.push('\n');
        }
        out
    }

    pub fn metadata(&self) -> TableMetadata {
        TableMetadata {
            sigma: self.spec.sigma(),
            alpha: fmt_q(&self.spec.alpha),
            rho: fmt_q(&self.spec.rho),
            sign_e: self.pair.sign_e,
            sign_h: self.pair.sign_h,
            origin: self.pair.origin,
            m_max: self.m_max,
            n_max: self.n_max,
            tail_bound: self.tail_bound,
            g: self.pair.h.iter().map(fmt_q).collect(),
            lambda: self.lambda.iter().map(fmt_q).collect(),
            c_conv: fmt_q(&self.pair.c_conv()),
            c_printed: fmt_q(&c_printed(&self.spec, self.spec.sigma())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TableMetadata {
    pub sigma: i64,
    pub alpha: String,
    pub rho: String,
    pub sign_e: i8,
    pub sign_h: i8,
    pub origin: PairOrigin,
    pub m_max: usize,
    pub n_max: usize,
    pub tail_bound: f64,
    pub g: Vec<String>,
    pub lambda: Vec<String>,
    pub c_conv: String,
    pub c_printed: String,
}

fn newton_eval_f64(row: &[f64], n: u32) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for (j, beta) in row.iter().enumerate() {
        if j > 0 {
            if (n as usize) < j {
                break;
            }
            binom = binom * (n as f64 - j as f64 + 1.0) / j as f64;
        }
        acc += beta * binom;
    }
    acc
}

fn poly_mul(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `sum_j beta_j binom(n, j)` as monomial coefficients in `n`.
fn newton_to_monomial(beta: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::zero(); beta.len()];
    let mut basis = vec![Q::one()];
    for (j, b) in beta.iter().enumerate() {
        if j > 0 {
            basis = poly_mul(&basis, &[q(-(j as i64) + 1), Q::one()]);
            let jj = q(j as i64);
            basis.iter_mut().for_each(|c| *c /= &jj);
        }
        for (i, c) in basis.iter().enumerate() {
            out[i] += b * c;
        }
    }
    out
}

/// `E_nu[p(eta) p'(eta)]` for polynomials in monomial form, exact.
pub fn expectation_of_product(spec: &ModelSpec, a: &[Q], b: &[Q]) -> Q {
    poly_mul(a, b)
        .iter()
        .enumerate()
        .map(|(i, c)| c * raw_moment(spec, i as u64))
        .sum()
}

/// Monic orthogonal polynomials under `nu_rho`, by Gram-Schmidt on raw
/// moments. Independent of the generating-function construction.
pub fn gram_schmidt_oracle(spec: &ModelSpec, m_max: usize) -> Vec<Vec<Q>> {
    let mut basis: Vec<Vec<Q>> = Vec::new();
    for m in 0..=m_max {
        let mut p = vec![Q::zero(); m + 1];
        p[m] = Q::one();
        for prev in &basis {
            let coef = expectation_of_product(spec, &p, prev) / expectation_of_product(spec, prev, prev);
            for (i, c) in prev.iter().enumerate() {
                p[i] -= &coef * c;
            }
        }
        basis.push(p);
    }
    basis
}

/// `D(xi, eta) = prod_x d(xi_x, eta_x)`.
pub fn eval_d(table: &DualityTable, xi: &DualConfig, eta: &[u32]) -> Result<Q> {
    xi.iter()
        .try_fold(Q::one(), |acc, (x, m)| Ok(acc * table.d(m as usize, eta[x])?))
}

/// `DD(xi, eta) = prod_x dd(xi_x, eta_x) = Lambda(xi) D(xi, eta)`.
pub fn eval_dd(table: &DualityTable, xi: &DualConfig, eta: &[u32]) -> Q {
    xi.iter()
        .fold(Q::one(), |acc, (x, m)| acc * table.dd(m as usize, eta[x]))
}

pub fn eval_d_f64(table: &DualityTable, xi: &DualConfig, eta: &[u32]) -> f64 {
    xi.iter().map(|(x, m)| table.d_f64(m as usize, eta[x])).product()
}

/// `mu(xi) = prod_x mu(xi_x)`.
pub fn mu_of(table: &DualityTable, xi: &DualConfig) -> Q {
    xi.iter()
        .fold(Q::one(), |acc, (_, m)| acc * table.mu_single(m as usize))
}

/// Outcome of testing one candidate convention.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateReport {
    pub label: String,
    pub origin: PairOrigin,
    pub mean_zero: bool,
    pub orthogonal: bool,
    /// `None` when the candidate already failed mean zero or orthogonality.
    pub max_duality_residual: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConventionReport {
    pub family: String,
    pub candidates: Vec<CandidateReport>,
    pub selected: String,
    pub selected_origin: PairOrigin,
    pub c_conv: String,
    pub c_printed: String,
    pub c_measured_d: String,
    pub g: Vec<String>,
    pub g_tilde: Vec<String>,
}

/// Degree checked during resolution.
pub const RESOLUTION_DEGREE: usize = 3;

/// Sample of dual configurations and occupancies used to test duality.
pub fn resolution_sample(spec: &ModelSpec, geom: &Geometry, k_max: usize) -> (Vec<DualConfig>, Vec<Occupancy>) {
    let v = geom.volume();
    let cap = spec.site_cap().unwrap_or(3);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut xis = Vec::new();
    for k in 1..=k_max {
        let mut all = enumerate_multisets(v, k, spec.site_cap());
        if all.len() > 40 {
            for i in 0..40 {
                let j = rng.gen_range(i..all.len());
                all.swap(i, j);
            }
            all.truncate(40);
        }
        xis.extend(all);
    }
    let etas = (0..16)
        .map(|_| (0..v).map(|_| rng.gen_range(0..=cap)).collect())
        .collect();
    (xis, etas)
}

/// All dual configurations with `k` particles on `volume` sites.
pub fn enumerate_multisets(volume: usize, k: usize, cap: Option<u32>) -> Vec<DualConfig> {
    fn rec(
        start: usize,
        volume: usize,
        left: usize,
        cur: &mut Vec<usize>,
        cap: Option<u32>,
        out: &mut Vec<DualConfig>,
    ) {
        if left == 0 {
            out.push(DualConfig::from_sites(cur));
            return;
        }
        for s in start..volume {
            if let Some(c) = cap {
                if cur.iter().filter(|&&x| x == s).count() as u32 >= c {
                    continue;
                }
            }
            cur.push(s);
            rec(s, volume, left - 1, cur, cap, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, volume, k, &mut Vec::new(), cap, &mut out);
    out
}

fn evaluate_candidate(spec: &ModelSpec, geom: &Geometry, pair: &GeneratingPair) -> Result<CandidateReport> {
    let table = DualityTable::auto(spec, pair, RESOLUTION_DEGREE)?;
    let mean_zero = expectation_of_product(spec, table.monomial(1), &[Q::one()]).is_zero();
    let gram = table.gram_exact();
    let orthogonal = (0..gram.len()).all(|a| (0..gram.len()).all(|b| a == b || gram[a][b].is_zero()));
    let mut max_res = Q::zero();
    let checked = mean_zero && orthogonal;
    if checked {
        let (xis, etas) = resolution_sample(spec, geom, RESOLUTION_DEGREE);
        'outer: for xi in &xis {
            for eta in &etas {
                let r = duality_residual(spec, geom, &xi.to_dense(geom.volume()), eta, &|m, n| {
                    table.d(m as usize, n).ok()
                })
                .abs();
                if r > max_res {
                    max_res = r;
                }
                if !max_res.is_zero() {
                    break 'outer;
                }
            }
        }
    }
    let passed = mean_zero && orthogonal && max_res.is_zero();
    Ok(CandidateReport {
        label: pair.label(),
        origin: pair.origin,
        mean_zero,
        orthogonal,
        max_duality_residual: checked.then(|| to_f64(&max_res)),
        passed,
    })
}

/// Printed candidates in tie-break order: fewest sign flips first, and among
/// single flips the one keeping `e` as printed.
pub const SIGN_ORDER: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Picks the sign convention under which the family generating function
/// yields mean-zero, pairwise orthogonal polynomials satisfying exact
/// generator duality on `geom`. Falls back to solving the Moebius numerator
/// from the mean-zero condition when no printed sign variant passes.
pub fn resolve_convention(spec: &ModelSpec, geom: &Geometry) -> Result<(GeneratingPair, ConventionReport)> {
    resolve_from_candidates(spec, geom, default_candidates(spec))
}

pub fn default_candidates(spec: &ModelSpec) -> Vec<Vec<GeneratingPair>> {
    let order = RESOLUTION_DEGREE;
    vec![
        SIGN_ORDER
            .iter()
            .map(|&(se, sh)| build_generating_pair(spec, order, se, sh))
            .collect(),
        [1i8, -1]
            .iter()
            .map(|&se| build_mean_zero_pair(spec, order, se))
            .collect(),
    ]
}

/// Tries candidate tiers in order; the first passing pair of the first tier
/// with any pass is selected.
pub fn resolve_from_candidates(
    spec: &ModelSpec,
    geom: &Geometry,
    tiers: Vec<Vec<GeneratingPair>>,
) -> Result<(GeneratingPair, ConventionReport)> {
    let mut reports = Vec::new();
    let mut chosen: Option<GeneratingPair> = None;
    for tier in tiers {
        for pair in tier {
            let rep = evaluate_candidate(spec, geom, &pair)?;
            let passed = rep.passed;
            reports.push(rep);
            if passed && chosen.is_none() {
                chosen = Some(pair);
            }
        }
        if chosen.is_some() {
            break;
        }
    }
    let pair = chosen.ok_or_else(|| {
        let summary: Vec<String> = reports
            .iter()
            .map(|r| {
                format!(
                    "{} {:?}: mean_zero={} orthogonal={} residual={:?}",
                    r.label, r.origin, r.mean_zero, r.orthogonal, r.max_duality_residual
                )
            })
            .collect();
        Error::NoConsistentConvention(summary.join("; "))
    })?;
    let table = DualityTable::auto(spec, &pair, RESOLUTION_DEGREE)?;
    let report = ConventionReport {
        family: spec.family.short_name().to_string(),
        candidates: reports,
        selected: pair.label(),
        selected_origin: pair.origin,
        c_conv: fmt_q(&pair.c_conv()),
        c_printed: fmt_q(&c_printed(spec, spec.sigma())),
        c_measured_d: fmt_q(&(table.c_measured() / &table.lambda[1])),
        g: pair.h.iter().map(fmt_q).collect(),
        g_tilde: pair.g_tilde().iter().map(fmt_q).collect(),
    };
    Ok((pair, report))
}

/// Smallest torus on which the kernel is admissible, used for resolution.
pub fn resolution_geometry(geom: &Geometry) -> Result<Geometry> {
    let side = (2 * geom.kernel.radius + 1).max(3);
    let side = if geom.torus.dim == 1 { side.max(5) } else { side };
    Geometry::new(crate::model::Torus::new(geom.torus.dim, side)?, geom.kernel.clone())
}

/// Resolves the convention and builds a table of degree `m_max` with it.
pub fn resolved_table(spec: &ModelSpec, geom: &Geometry, m_max: usize) -> Result<DualityTable> {
    let small = resolution_geometry(geom)?;
    let (pair, _) = resolve_convention(spec, &small)?;
    table_for_pair(spec, &pair, m_max)
}

/// The same convention truncated at a different series order.
pub fn extend_pair(spec: &ModelSpec, pair: &GeneratingPair, order: usize) -> GeneratingPair {
    match pair.origin {
        PairOrigin::Printed => build_generating_pair(spec, order, pair.sign_e, pair.sign_h),
        PairOrigin::MeanZeroFallback => build_mean_zero_pair(spec, order, pair.sign_e),
    }
}

/// Extends a resolved pair to order `m_max` and builds its table.
pub fn table_for_pair(spec: &ModelSpec, pair: &GeneratingPair, m_max: usize) -> Result<DualityTable> {
    let full = extend_pair(spec, pair, m_max.max(RESOLUTION_DEGREE));
    DualityTable::auto(spec, &full, m_max)
}

/// Which inclusion-process weight reading makes `Lambda(xi) / mu(xi)`
/// constant over all `xi` with `k` particles, for every `k <= k_max`.
pub fn lambda_reading_consistent(
    table: &DualityTable,
    reading: crate::model::InclusionLambdaReading,
    k_max: usize,
) -> bool {
    let ratio = |m: usize| {
        // With d = dd / lambda and mu = lambda^2 / E[dd^2], Lambda / mu = E[dd^2] / lambda per site.
        &table.norms[m] / reading.weight(&table.spec.alpha, m as u64)
    };
    for k in 1..=k_max {
        let parts = partitions(k);
        let vals: Vec<Q> = parts
            .iter()
            .map(|p| p.iter().fold(Q::one(), |acc, &m| acc * ratio(m)))
            .collect();
        if vals.iter().any(|v| v != &vals[0]) {
            return false;
        }
    }
    true
}

/// Integer partitions of `k`.
pub fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=left.min(max)).rev() {
            cur.push(p);
            rec(left - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

/// `c(k) = Lambda(xi) / mu(xi)` for any `xi` with `k` particles in distinct sites.
pub fn lambda_mu_ratio(table: &DualityTable, k: usize) -> Q {
    (0..k).fold(Q::one(), |acc, _| acc * (&table.norms[1] / &table.lambda[1]))
}
