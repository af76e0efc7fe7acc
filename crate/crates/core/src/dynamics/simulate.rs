//! Exact (Gillespie) simulation of the occupancy, dual and labelled
//! coordinate processes.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fenwick::Fenwick;
use crate::model::{CoordVector, DualConfig, Geometry, ModelSpec, Occupancy};

/// Events between full Fenwick rebuilds.
const REBUILD_INTERVAL: u64 = 1 << 14;

/// Independent stream for replica `replica` under master seed `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// `Exp(rate)` waiting time.
pub fn exp_time<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub from: u32,
    pub to: u32,
}

/// Initial configuration plus the ordered list of jumps up to `horizon`.
/// Times are macroscopic: microscopic rates are multiplied by `time_scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: Occupancy,
    pub events: Vec<Event>,
    pub horizon: f64,
    pub time_scale: f64,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Occupancy {
        let mut eta = self.initial.clone();
        for ev in self.events.iter().take_while(|e| e.time <= t) {
            eta[ev.from as usize] -= 1;
            eta[ev.to as usize] += 1;
        }
        eta
    }

    pub fn final_state(&self) -> Occupancy {
        self.state_at(f64::INFINITY)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,from,to\n");
        for e in &self.events {
            let _ = writeln!(out, "{:.17e},{},{}", e.time, e.from, e.to);
        }
        out
    }
}

/// Event-driven simulator of the occupancy process.
pub struct Simulator<'a> {
    spec: &'a ModelSpec,
    geom: &'a Geometry,
    eta: Occupancy,
    rates: Fenwick,
    time: f64,
    time_scale: f64,
    since_rebuild: u64,
    scratch: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ModelSpec, geom: &'a Geometry, eta: Occupancy, time_scale: f64) -> Self {
        let rates: Vec<f64> = (0..geom.volume()).map(|x| site_rate(spec, geom, &eta, x)).collect();
        Simulator {
            spec,
            geom,
            rates: Fenwick::new(&rates),
            eta,
            time: 0.0,
            time_scale,
            since_rebuild: 0,
            scratch: vec![0.0; geom.degree()],
        }
    }

    pub fn state(&self) -> &Occupancy {
        &self.eta
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Total jump rate in macroscopic time.
    pub fn total_rate(&self) -> f64 {
        self.rates.total() * self.time_scale
    }

    /// Performs the next jump if it happens before `horizon`; otherwise
    /// advances the clock to `horizon` and returns `None`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R, horizon: f64) -> Option<Event> {
        let total = self.rates.total();
        if total <= 0.0 {
            self.time = horizon;
            return None;
        }
        let dt = exp_time(rng, total * self.time_scale);
        if self.time + dt > horizon {
            self.time = horizon;
            return None;
        }
        self.time += dt;
        let x = self.rates.find(rng.gen::<f64>() * total);
        let k = self.geom.degree();
        let mut site_total = 0.0;
        for j in 0..k {
            let y = self.geom.neighbor(x, j);
            let w = self.geom.kernel.weight_f64(j) * self.spec.pair_rate_f64(self.eta[x], self.eta[y]);
            self.scratch[j] = w;
            site_total += w;
        }
        let mut u = rng.gen::<f64>() * site_total;
        let mut choice = k - 1;
        for j in 0..k {
            if u < self.scratch[j] {
                choice = j;
                break;
            }
            u -= self.scratch[j];
        }
        while self.scratch[choice] <= 0.0 {
            choice -= 1;
        }
        let y = self.geom.neighbor(x, choice);
        self.apply_move(x, y);
        Some(Event {
            time: self.time,
            from: x as u32,
            to: y as u32,
        })
    }

    fn apply_move(&mut self, x: usize, y: usize) {
        self.eta[x] -= 1;
        self.eta[y] += 1;
        self.since_rebuild += 1;
        for &s in &[x, y] {
            self.refresh(s);
            for j in 0..self.geom.degree() {
                self.refresh(self.geom.neighbor(s, j));
            }
        }
        if self.since_rebuild >= REBUILD_INTERVAL {
            self.rates.rebuild();
            self.since_rebuild = 0;
        }
    }

    fn refresh(&mut self, s: usize) {
        let r = site_rate(self.spec, self.geom, &self.eta, s);
        self.rates.set(s, r);
    }
}

/// Microscopic exit rate of site `x`.
pub fn site_rate(spec: &ModelSpec, geom: &Geometry, eta: &[u32], x: usize) -> f64 {
    if eta[x] == 0 {
        return 0.0;
    }
    (0..geom.degree())
        .map(|j| geom.kernel.weight_f64(j) * spec.pair_rate_f64(eta[x], eta[geom.neighbor(x, j)]))
        .sum()
}

pub fn simulate<R: Rng + ?Sized>(
    spec: &ModelSpec,
    geom: &Geometry,
    eta0: Occupancy,
    horizon: f64,
    time_scale: f64,
    rng: &mut R,
) -> Trajectory {
    let mut sim = Simulator::new(spec, geom, eta0.clone(), time_scale);
    let mut events = Vec::new();
    while let Some(ev) = sim.step(rng, horizon) {
        events.push(ev);
    }
    Trajectory {
        initial: eta0,
        events,
        horizon,
        time_scale,
    }
}

/// The dual process is the same particle system started from `xi0`.
pub fn simulate_dual<R: Rng + ?Sized>(
    spec: &ModelSpec,
    geom: &Geometry,
    xi0: &DualConfig,
    horizon: f64,
    time_scale: f64,
    rng: &mut R,
) -> Trajectory {
    simulate(spec, geom, xi0.to_dense(geom.volume()), horizon, time_scale, rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordEvent {
    pub time: f64,
    pub particle: u32,
    pub to: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordTrajectory {
    pub initial: CoordVector,
    pub events: Vec<CoordEvent>,
    pub horizon: f64,
}

impl CoordTrajectory {
    pub fn final_state(&self) -> CoordVector {
        let mut x = self.initial.clone();
        for e in &self.events {
            x[e.particle as usize] = e.to as usize;
        }
        x
    }
}

/// Labelled coordinate process: particle `i` jumps by `r` at rate
/// `p(r) (alpha + sigma #{j != i : x_j = x_i + r})`.
pub fn simulate_coordinates<R: Rng + ?Sized>(
    spec: &ModelSpec,
    geom: &Geometry,
    x0: &CoordVector,
    horizon: f64,
    time_scale: f64,
    rng: &mut R,
) -> CoordTrajectory {
    let mut x = x0.clone();
    let k = geom.degree();
    let mut rates = vec![0.0; x.len() * k];
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        let mut total = 0.0;
        for i in 0..x.len() {
            for j in 0..k {
                let target = geom.neighbor(x[i], j);
                let others = x.iter().enumerate().filter(|&(l, &p)| l != i && p == target).count();
                let f = (spec.alpha_f64() + spec.sigma() as f64 * others as f64).max(0.0);
                let r = geom.kernel.weight_f64(j) * f;
                rates[i * k + j] = r;
                total += r;
            }
        }
        if total <= 0.0 {
            break;
        }
        t += exp_time(rng, total * time_scale);
        if t > horizon {
            break;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut pick = rates.len() - 1;
        for (idx, r) in rates.iter().enumerate() {
            if u < *r {
                pick = idx;
                break;
            }
            u -= r;
        }
        while rates[pick] <= 0.0 {
            pick -= 1;
        }
        let (i, j) = (pick / k, pick % k);
        x[i] = geom.neighbor(x[i], j);
        events.push(CoordEvent {
            time: t,
            particle: i as u32,
            to: x[i] as u32,
        });
    }
    CoordTrajectory {
        initial: x0.clone(),
        events,
        horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::nu_sample;
    use crate::rational::{q, qr};

    fn sip() -> ModelSpec {
        ModelSpec::new(1, q(1), qr(1, 2)).unwrap()
    }

    #[test]
    fn mass_is_conserved_and_times_increase() {
        let geom = Geometry::nearest_neighbor(2, 4).unwrap();
        for spec in [
            ModelSpec::new(0, q(1), qr(1, 2)).unwrap(),
            ModelSpec::new(-1, q(2), qr(1, 2)).unwrap(),
            sip(),
        ] {
            let mut rng = replica_rng(1, 0);
            let eta0 = nu_sample(&spec, geom.volume(), &mut rng);
            let traj = simulate(&spec, &geom, eta0.clone(), 2.0, 1.0, &mut rng);
            assert!(!traj.events.is_empty());
            assert!(traj.events.windows(2).all(|w| w[0].time <= w[1].time));
            let fin = traj.final_state();
            assert_eq!(fin.iter().sum::<u32>(), eta0.iter().sum::<u32>());
            if let Some(cap) = spec.site_cap() {
                assert!(fin.iter().all(|&c| c <= cap));
            }
        }
    }

    #[test]
    fn replica_streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| replica_rng(9, 3).gen()).collect();
        let b: Vec<u64> = (0..4).map(|_| replica_rng(9, 3).gen()).collect();
        assert_eq!(a, b);
        let mut r1 = replica_rng(9, 3);
        let mut r2 = replica_rng(9, 4);
        assert_ne!(r1.gen::<u64>(), r2.gen::<u64>());
    }

    #[test]
    fn event_count_matches_integrated_rate() {
        let geom = Geometry::nearest_neighbor(1, 6).unwrap();
        let spec = sip();
        let reps = 2000;
        let mut diffs = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut rng = replica_rng(11, r as u64);
            let eta0 = nu_sample(&spec, 6, &mut rng);
            let mut sim = Simulator::new(&spec, &geom, eta0, 1.0);
            let mut integral = 0.0;
            let mut count = 0.0;
            let horizon = 1.0;
            loop {
                let (t0, rate) = (sim.time(), sim.total_rate());
                let ev = sim.step(&mut rng, horizon);
                integral += rate * (sim.time() - t0);
                if ev.is_none() {
                    break;
                }
                count += 1.0;
            }
            diffs.push(count - integral);
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * (var / n).sqrt(), "mean {mean}");
    }

    #[test]
    fn single_dual_particle_walks_at_rate_alpha() {
        let geom = Geometry::nearest_neighbor(1, 7).unwrap();
        let spec = ModelSpec::new(1, qr(3, 2), qr(1, 2)).unwrap();
        let reps = 4000;
        let mut total = 0.0;
        for r in 0..reps {
            let mut rng = replica_rng(5, r);
            let traj = simulate_dual(&spec, &geom, &DualConfig::from_sites(&[2]), 1.0, 1.0, &mut rng);
            total += traj.events.len() as f64;
        }
        let mean = total / reps as f64;
        let se = (1.5f64 / reps as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * se, "{mean}");
    }
}
