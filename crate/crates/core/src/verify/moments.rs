//! Second and fourth moments of the field across `n`.
//!
//! The process starts from its invariant product measure, so the law of
//! `Y_t` does not depend on `t`; replicas are drawn from that measure directly.

use crate::error::Result;
use crate::fields::{field_eval, FieldSetup};
use crate::model::nu_sample;

use super::config::Context;
use super::exact::analytic_joint_moment;
use super::replicas::par_replicas;
use super::report::{cell, Check, SuiteReport};
use super::stats::{fit_unless_vanishing, EstimateWithError, ScalingPoint};

/// Exact moments are skipped above this many sites.
pub const ANALYTIC_VOLUME_LIMIT: usize = 4096;

pub fn suite_moments(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let tol = ctx.tolerances();
    let z = tol.se_multiplier;
    let k = ctx.k();
    let mut report = SuiteReport::new("moments", ctx.seed(), &["n", "replica", "y"]);
    let table = ctx.table(k)?;
    let mut second = Vec::new();
    let mut fourth = Vec::new();
    let mut exact = Vec::new();
    for &n in &exp.n_list {
        let geom = ctx.geometry_with_side(n)?;
        let setup = FieldSetup::new(&ctx.spec, &geom, &table, k)?;
        let phi = ctx.config.phi().sample(&geom.torus).values;
        let v = geom.volume();
        let seed = report.seeds.derive(&format!("n={n}"), exp.replicas);
        let ys = par_replicas(seed, exp.replicas, |rng| {
            field_eval(setup, &phi, &nu_sample(&ctx.spec, v, rng))
        })?;
        for (i, y) in ys.iter().enumerate() {
            report.data.push(vec![n.to_string(), i.to_string(), cell(*y)]);
        }
        let m2 = EstimateWithError::from_samples(&ys.iter().map(|y| y * y).collect::<Vec<_>>(), seed)?;
        let m4 = EstimateWithError::from_samples(&ys.iter().map(|y| y.powi(4)).collect::<Vec<_>>(), seed)?;
        if v <= ANALYTIC_VOLUME_LIMIT {
            let e2 = analytic_joint_moment(&setup, &[&phi, &phi]);
            let e4 = analytic_joint_moment(&setup, &[&phi, &phi, &phi, &phi]);
            for (name, est, e) in [("second", &m2, e2), ("fourth", &m4, e4)] {
                report.check(Check::info(
                    &format!("{name}_moment_exact/n={n}"),
                    est.consistent_with(e, z),
                    est.z_score(e),
                    z,
                    format!("Monte Carlo {:.5e} +- {:.2e}, exact {e:.5e}", est.mean, est.std_error),
                ));
            }
            exact.push((n, e2, e4));
        }
        report.estimate(&format!("second_moment/n={n}"), m2.clone());
        report.estimate(&format!("fourth_moment/n={n}"), m4.clone());
        second.push(ScalingPoint {
            n: n as f64,
            estimate: m2,
        });
        fourth.push(ScalingPoint {
            n: n as f64,
            estimate: m4,
        });
    }
    for (name, pts) in [("second_moment", second), ("fourth_moment", fourth)] {
        let fit = fit_unless_vanishing(&format!("{name}_vs_n"), pts, 0.0, tol.moment_slope_tolerance, z)?;
        match fit {
            Some(s) => {
                report.check(Check::gating(
                    &format!("{name}_flat"),
                    s.verdict.passed(),
                    s.slope,
                    0.0,
                    format!("slope {:.3} +- {:.3}, widened by {}", s.slope, s.slope_se, s.tolerance),
                ));
                report.scaling.push(s);
            }
            None => report.check(Check::gating(
                &format!("{name}_flat"),
                true,
                0.0,
                0.0,
                "moment vanishes identically",
            )),
        }
    }
    for (j, name) in [(1usize, "second"), (2, "fourth")] {
        if exact.len() >= 2 {
            let vals: Vec<f64> = exact.iter().map(|e| if j == 1 { e.1 } else { e.2 }).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(0.0, f64::max);
            report.check(Check::info(
                &format!("{name}_moment_exact_range"),
                true,
                hi / lo,
                0.0,
                exact
                    .iter()
                    .zip(&vals)
                    .map(|(e, v)| format!("n={}: {v:.6e}", e.0))
                    .collect::<Vec<_>>()
                    .join(", "),
            ));
        }
    }
    Ok(report.finish())
}
