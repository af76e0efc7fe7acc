//! Replica fan-out. Each replica owns the stream `replica_rng(seed, i)` and
//! results are collected in replica order, so outputs do not depend on the
//! number of worker threads.

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::{replica_rng, simulate};
use crate::error::Result;
use crate::fields::{dynkin_martingale, FieldSetup, MartingaleSample, SiteFunction};
use crate::model::{nu_sample, DualConfig, ModelSpec, Occupancy};

use super::report::cell;

use rand_chacha::ChaCha8Rng;

pub fn par_replicas<T, F>(seed: u64, replicas: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| f(&mut replica_rng(seed, i)))
        .collect()
}

/// Stationary trajectories on `[0, horizon]` at time scale `n^2`, replayed
/// through the Dynkin martingale at the grid times.
pub fn martingale_runs(
    setup: FieldSetup,
    phi: &SiteFunction,
    horizon: f64,
    grid: &[f64],
    seed: u64,
    replicas: usize,
) -> Result<Vec<MartingaleSample>> {
    let n = setup.n() as f64;
    let v = setup.geom.volume();
    par_replicas(seed, replicas, |rng| {
        let eta0 = nu_sample(setup.spec, v, rng);
        let traj = simulate(setup.spec, setup.geom, eta0, horizon, n * n, rng);
        dynkin_martingale(setup, phi, &traj, grid)
    })
}

/// Uniform occupancy in `0..=cap` per site, `cap` lowered to the site capacity.
pub fn random_eta<R: Rng + ?Sized>(spec: &ModelSpec, volume: usize, cap: u32, rng: &mut R) -> Occupancy {
    let cap = spec.site_cap().map_or(cap, |c| c.min(cap));
    (0..volume).map(|_| rng.gen_range(0..=cap)).collect()
}

/// `k` particles on uniformly chosen sites, respecting the site capacity.
pub fn random_dual<R: Rng + ?Sized>(spec: &ModelSpec, volume: usize, k: usize, rng: &mut R) -> DualConfig {
    let cap = spec.site_cap().unwrap_or(u32::MAX);
    let mut dense = vec![0u32; volume];
    let mut placed = 0;
    while placed < k {
        let x = rng.gen_range(0..volume);
        if dense[x] < cap {
            dense[x] += 1;
            placed += 1;
        }
    }
    DualConfig::from_dense(&dense)
}

/// Header and row cells of the per-replica martingale table.
pub fn martingale_header() -> Vec<&'static str> {
    MartingaleSample::CSV_HEADER.split(',').collect()
}

pub fn martingale_cells(replica: usize, sample: &MartingaleSample) -> Vec<Vec<String>> {
    sample
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![replica.to_string()];
            row.extend(
                [
                    r.t,
                    r.y,
                    r.m,
                    r.n,
                    r.drift_integral,
                    r.cdc_integral,
                    r.qv_closed_integral,
                    r.drift_error_integral,
                    r.replacement_linear_integral,
                    r.replacement_quadratic_integral,
                ]
                .map(cell),
            );
            row
        })
        .collect()
}
