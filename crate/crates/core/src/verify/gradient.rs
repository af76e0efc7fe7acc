//! Gradient of the field along a particle move against its expansion in
//! lower-order fields.

use rand::Rng;

use crate::dynamics::replica_rng;
use crate::error::Result;
use crate::fields::{FieldEvaluator, FieldSetup};
use crate::model::nu_sample;

use super::config::Context;
use super::exact::analytic_joint_moment;
use super::report::{cell, Check, SuiteReport};

/// Field orders drawn by the randomized cases.
pub const GRADIENT_MAX_ORDER: usize = 3;

pub fn suite_gradient(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let tol = ctx.tolerances();
    let mut report = SuiteReport::new(
        "gradient",
        ctx.seed(),
        &["case", "k", "x", "y", "definitional", "decomposition", "relative_error"],
    );
    let table = ctx.table(GRADIENT_MAX_ORDER)?;
    let geom = &ctx.geom;
    let v = geom.volume();
    let phi = ctx.config.phi().sample(&geom.torus);
    let seed = report.seeds.derive("cases", exp.cases);
    let mut rng = replica_rng(seed, 0);
    let mut field_sd = [0.0; GRADIENT_MAX_ORDER + 1];
    for (k, sd) in field_sd.iter_mut().enumerate().skip(1) {
        let setup = FieldSetup::new(&ctx.spec, geom, &table, k)?;
        *sd = analytic_joint_moment(&setup, &[&phi.values, &phi.values])
            .max(0.0)
            .sqrt();
    }
    let mut worst = 0.0f64;
    for case in 0..exp.cases {
        let k = rng.gen_range(1..=GRADIENT_MAX_ORDER);
        let setup = FieldSetup::new(&ctx.spec, geom, &table, k)?;
        // Draw stationary configurations until one admits a move.
        let (eta, x, y) = loop {
            let eta = nu_sample(&ctx.spec, v, &mut rng);
            let x = rng.gen_range(0..v);
            let y = geom.neighbor(x, rng.gen_range(0..geom.degree()));
            let full = ctx.spec.site_cap().is_some_and(|c| eta[y] >= c);
            if eta[x] > 0 && !full {
                break (eta, x, y);
            }
        };
        let ev = FieldEvaluator::<f64>::new(setup, &phi.values, &eta)?;
        let a = ev.grad(x, y)?;
        let terms = ev.gradient_decomposition_terms(x, y)?;
        let b: f64 = terms.iter().sum();
        // Both sides cancel to rounding when the move leaves the field
        // unchanged, so the scale is floored at the stationary size of the field.
        let y0 = ev.value();
        let scale = terms
            .iter()
            .map(|t| t.abs())
            .sum::<f64>()
            .max(y0.abs())
            .max((y0 + a).abs())
            .max(field_sd[k]);
        let rel = if scale == 0.0 { 0.0 } else { (a - b).abs() / scale };
        worst = worst.max(rel);
        report.data.push(vec![
            case.to_string(),
            k.to_string(),
            x.to_string(),
            y.to_string(),
            cell(a),
            cell(b),
            cell(rel),
        ]);
    }
    report.check(Check::gating(
        "gradient_decomposition",
        worst <= tol.gradient_relative,
        worst,
        tol.gradient_relative,
        format!("{} randomized moves, k <= {GRADIENT_MAX_ORDER}", exp.cases),
    ));
    Ok(report.finish())
}
