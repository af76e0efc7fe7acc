//! Dynkin martingale `M_t = Y_t - Y_0 - int_0^t n^2 L Y ds` and its
//! quadratic-variation companion `N_t = M_t^2 - int_0^t n^2 Gamma Y ds`,
//! integrated exactly along a piecewise-constant trajectory.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

use super::evaluator::FieldSetup;
use super::test_function::SiteFunction;
use super::tracker::FieldTracker;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRow {
    pub t: f64,
    pub y: f64,
    pub drift_integral: f64,
    pub m: f64,
    pub cdc_integral: f64,
    pub n: f64,
    pub qv_closed_integral: f64,
    /// `int (n^2 L Y - drift_closed) ds`.
    pub drift_error_integral: f64,
    pub replacement_linear_integral: f64,
    pub replacement_quadratic_integral: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSample {
    pub rows: Vec<MartingaleRow>,
}

impl MartingaleSample {
    pub const CSV_HEADER: &'static str = "replica,t,y,m,n,drift_integral,cdc_integral,qv_closed_integral,drift_error_integral,replacement_linear_integral,replacement_quadratic_integral";

    pub fn last(&self) -> &MartingaleRow {
        self.rows.last().expect("non-empty grid")
    }

    pub fn write_csv_rows(&self, replica: u64, out: &mut String) {
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{replica},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t,
                r.y,
                r.m,
                r.n,
                r.drift_integral,
                r.cdc_integral,
                r.qv_closed_integral,
                r.drift_error_integral,
                r.replacement_linear_integral,
                r.replacement_quadratic_integral
            );
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Rates {
    drift: f64,
    cdc: f64,
    qv: f64,
    err: f64,
    lin: f64,
    quad: f64,
}

impl Rates {
    fn read(t: &FieldTracker) -> Self {
        let drift = t.drift();
        Rates {
            drift,
            cdc: t.carre_du_champ(),
            qv: t.qv_closed(),
            err: drift - t.drift_closed(),
            lin: t.replacement_linear(),
            quad: t.replacement_quadratic(),
        }
    }
}

/// Replays `traj` and records the martingale statistics at each grid time.
pub fn dynkin_martingale(
    setup: FieldSetup,
    phi: &SiteFunction,
    traj: &Trajectory,
    grid: &[f64],
) -> Result<MartingaleSample> {
    if let Some(&bad) = grid.iter().find(|&&g| g > traj.horizon || g < 0.0) {
        return Err(Error::GridBeyondHorizon {
            point: bad,
            horizon: traj.horizon,
        });
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("grid must be non-decreasing".into()));
    }
    let mut tracker = FieldTracker::new(setup, phi, &traj.initial);
    let y0 = tracker.value();
    let mut acc = MartingaleRow::default();
    let mut now = 0.0;
    let mut rates = Rates::read(&tracker);
    let mut rows = Vec::with_capacity(grid.len());
    let mut events = traj.events.iter().peekable();

    let advance = |acc: &mut MartingaleRow, rates: &Rates, dt: f64| {
        acc.drift_integral += rates.drift * dt;
        acc.cdc_integral += rates.cdc * dt;
        acc.qv_closed_integral += rates.qv * dt;
        acc.drift_error_integral += rates.err * dt;
        acc.replacement_linear_integral += rates.lin * dt;
        acc.replacement_quadratic_integral += rates.quad * dt;
    };

    for &g in grid {
        while let Some(ev) = events.peek() {
            if ev.time > g {
                break;
            }
            advance(&mut acc, &rates, ev.time - now);
            now = ev.time;
            tracker.apply_move(ev.from as usize, ev.to as usize);
            rates = Rates::read(&tracker);
            events.next();
        }
        advance(&mut acc, &rates, g - now);
        now = g;
        let y = tracker.value();
        let m = y - y0 - acc.drift_integral;
        rows.push(MartingaleRow {
            t: g,
            y,
            m,
            n: m * m - acc.cdc_integral,
            ..acc
        });
    }
    Ok(MartingaleSample { rows })
}
