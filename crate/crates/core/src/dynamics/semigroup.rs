//! Exact transition probabilities of the `k`-particle dual process by
//! uniformization on the finite state space of `k` particles.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{DualConfig, Geometry, ModelSpec};
use crate::orthopoly::enumerate_multisets;

pub const DEFAULT_STATE_LIMIT: usize = 20_000;

/// Poisson tail tolerance for uniformization.
const POISSON_TAIL: f64 = 1e-15;

/// States of the `k`-particle process and its generator in sparse form.
#[derive(Clone, Debug)]
pub struct DualStateSpace {
    pub k: usize,
    pub states: Vec<DualConfig>,
    index: HashMap<DualConfig, usize>,
    /// Off-diagonal microscopic rates per row.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub exit: Vec<f64>,
}

impl DualStateSpace {
    pub fn new(spec: &ModelSpec, geom: &Geometry, k: usize, limit: usize) -> Result<Self> {
        let count = multiset_count(geom.volume(), k);
        if count > limit {
            return Err(Error::StateTooLarge { states: count, limit });
        }
        let states = enumerate_multisets(geom.volume(), k, spec.site_cap());
        let index: HashMap<DualConfig, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut rows = Vec::with_capacity(states.len());
        let mut exit = Vec::with_capacity(states.len());
        for s in &states {
            let dense = s.to_dense(geom.volume());
            let mut row: HashMap<usize, f64> = HashMap::new();
            let mut out = 0.0;
            for (x, c) in s.iter() {
                for j in 0..geom.degree() {
                    let y = geom.neighbor(x, j);
                    let rate = geom.kernel.weight_f64(j) * spec.pair_rate_f64(c, dense[y]);
                    if rate <= 0.0 {
                        continue;
                    }
                    let mut t = dense.clone();
                    t[x] -= 1;
                    t[y] += 1;
                    let idx = index[&DualConfig::from_dense(&t)];
                    *row.entry(idx).or_insert(0.0) += rate;
                    out += rate;
                }
            }
            let mut row: Vec<(usize, f64)> = row.into_iter().collect();
            row.sort_by_key(|e| e.0);
            rows.push(row);
            exit.push(out);
        }
        Ok(DualStateSpace {
            k,
            states,
            index,
            rows,
            exit,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, xi: &DualConfig) -> Option<usize> {
        self.index.get(xi).copied()
    }

    /// `(G v)(xi) = sum_xi' G(xi, xi') (v(xi') - v(xi))`, microscopic rates.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, r)| r * (v[j] - v[i])).sum())
            .collect()
    }

    pub fn max_exit(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }

    /// Uniformized one-step operator `P v = v + G v / q`.
    fn step(&self, v: &[f64], q: f64) -> Vec<f64> {
        let gv = self.apply(v);
        v.iter().zip(gv).map(|(a, b)| a + b / q).collect()
    }

    /// `e^{t s G} v` for macroscopic time `t` and time scale `s`.
    pub fn propagate(&self, v: &[f64], t: f64, time_scale: f64) -> Vec<f64> {
        let q = self.max_exit().max(1e-300);
        let lam = q * t * time_scale;
        let weights = poisson_weights(lam);
        let mut out = vec![0.0; v.len()];
        let mut cur = v.to_vec();
        for (j, w) in weights.iter().enumerate() {
            if j > 0 {
                cur = self.step(&cur, q);
            }
            for (o, c) in out.iter_mut().zip(&cur) {
                *o += w * c;
            }
        }
        out
    }

    /// Sequence `P^j v` for `j = 0..terms`, the building block for time integrals.
    pub fn powers(&self, v: &[f64], terms: usize) -> (f64, Vec<Vec<f64>>) {
        let q = self.max_exit().max(1e-300);
        let mut out = Vec::with_capacity(terms);
        let mut cur = v.to_vec();
        for j in 0..terms {
            if j > 0 {
                cur = self.step(&cur, q);
            }
            out.push(cur.clone());
        }
        (q, out)
    }
}

fn multiset_count(v: usize, k: usize) -> usize {
    // binom(v + k - 1, k), saturating
    let mut num: u128 = 1;
    for i in 0..k as u128 {
        num = num * (v as u128 + i) / (i + 1);
        if num > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    num as usize
}

/// Poisson(lam) probabilities `j = 0..J`, computed by ratio recurrence from
/// the mode and normalized; terms below `POISSON_TAIL` relative to the mode
/// are dropped at the upper end.
pub fn poisson_weights(lam: f64) -> Vec<f64> {
    if lam <= 0.0 {
        return vec![1.0];
    }
    let mode = lam.floor() as usize;
    let mut up = vec![1.0];
    let mut j = mode;
    while *up.last().unwrap() > POISSON_TAIL * 1e-3 {
        let next = up.last().unwrap() * lam / (j + 1) as f64;
        up.push(next);
        j += 1;
    }
    let mut down = vec![0.0; mode];
    let mut w = 1.0;
    for i in (0..mode).rev() {
        w *= (i + 1) as f64 / lam;
        if w < 1e-300 {
            break;
        }
        down[i] = w;
    }
    down.extend(up);
    let total: f64 = down.iter().sum();
    down.iter_mut().for_each(|v| *v /= total);
    down
}

/// Dense transition matrix `p_t(xi, xi')` at macroscopic time `t`.
pub fn exact_semigroup(space: &DualStateSpace, t: f64, time_scale: f64) -> Vec<Vec<f64>> {
    let n = space.len();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        columns.push(space.propagate(&e, t, time_scale));
    }
    (0..n).map(|i| (0..n).map(|j| columns[j][i]).collect()).collect()
}
