//! Two-time covariance `E[Y_t(phi) Y_0(psi)]` against the dual semigroup.

use crate::dynamics::{simulate, DualStateSpace};
use crate::error::Result;
use crate::fields::{field_eval, FieldSetup};
use crate::model::nu_sample;

use super::config::Context;
use super::exact::{analytic_joint_moment, dual_covariance};
use super::replicas::par_replicas;
use super::report::{cell, Check, SuiteReport};
use super::stats::EstimateWithError;

pub fn suite_covariance(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let tol = ctx.tolerances();
    let z = tol.se_multiplier;
    let k = ctx.k();
    let mut report = SuiteReport::new("covariance", ctx.seed(), &["replica", "t", "y_t_phi", "y_0_psi"]);
    let geom = &ctx.geom;
    let table = ctx.table(k)?;
    let setup = FieldSetup::new(&ctx.spec, geom, &table, k)?;
    let phi = ctx.config.phi().sample(&geom.torus).values;
    let psi = ctx.config.psi().sample(&geom.torus).values;
    let space = DualStateSpace::new(&ctx.spec, geom, k, exp.state_limit)?;
    let n = setup.n() as f64;
    let v = geom.volume();
    let t_list = exp.t_list.clone();
    let horizon = t_list.iter().copied().fold(0.0, f64::max);

    let static_dual = dual_covariance(&setup, &phi, &psi, &space, 0.0);
    let static_analytic = analytic_joint_moment(&setup, &[&phi, &psi]);
    let gap = (static_dual - static_analytic).abs();
    let allowed = tol.analytic_tolerance * static_dual.abs().max(1.0);
    report.check(Check::gating(
        "static_covariance_analytic",
        gap <= allowed,
        gap,
        allowed,
        format!("t = 0: dual {static_dual:.12e}, analytic {static_analytic:.12e}"),
    ));

    let seed = report.seeds.derive("trajectories", exp.replicas);
    let samples = par_replicas(seed, exp.replicas, |rng| {
        let eta0 = nu_sample(&ctx.spec, v, rng);
        let traj = simulate(&ctx.spec, geom, eta0, horizon, n * n, rng);
        let y0 = field_eval(setup, &psi, &traj.initial)?;
        t_list
            .iter()
            .map(|&t| Ok((field_eval(setup, &phi, &traj.state_at(t))?, y0)))
            .collect::<Result<Vec<_>>>()
    })?;
    for (i, row) in samples.iter().enumerate() {
        for (&t, (yt, y0)) in t_list.iter().zip(row) {
            report.data.push(vec![i.to_string(), cell(t), cell(*yt), cell(*y0)]);
        }
    }
    for (j, &t) in t_list.iter().enumerate() {
        let products: Vec<f64> = samples.iter().map(|row| row[j].0 * row[j].1).collect();
        let est = EstimateWithError::from_samples(&products, seed)?;
        let exact = dual_covariance(&setup, &phi, &psi, &space, t);
        report.check(Check::gating(
            &format!("covariance_t={t}"),
            est.consistent_with(exact, z),
            est.z_score(exact),
            z,
            format!(
                "Monte Carlo {:.5e} +- {:.2e}, dual semigroup {exact:.5e}",
                est.mean, est.std_error
            ),
        ));
        report.estimate(&format!("covariance/t={t}"), est);
    }
    Ok(report.finish())
}
