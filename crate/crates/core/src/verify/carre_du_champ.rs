//! Carre du champ as a sum of squared jumps against `L(f^2) - 2 f L f`, in
//! exact rational arithmetic.

use num_rational::BigRational;

use crate::dynamics::replica_rng;
use crate::error::{Error, Result};
use crate::fields::{FieldEvaluator, FieldSetup};
use crate::rational::{to_f64, Q};

use super::config::Context;
use super::replicas::random_eta;
use super::report::{cell, Check, SuiteReport};

pub const CDC_MAX_ORDER: usize = 3;

pub fn suite_carre_du_champ(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let mut report = SuiteReport::new(
        "carre_du_champ",
        ctx.seed(),
        &["k", "instance", "sum_of_squares", "equal"],
    );
    let table = ctx.table(CDC_MAX_ORDER)?;
    let geom = &ctx.geom;
    let v = geom.volume();
    let sampled = ctx.config.phi().sample(&geom.torus);
    // Float samples are dyadic rationals, so the identity is tested exactly.
    let phi: Vec<Q> = sampled
        .values
        .iter()
        .map(|&p| {
            BigRational::from_float(p).ok_or_else(|| Error::Config(format!("test function value {p} is not finite")))
        })
        .collect::<Result<_>>()?;
    let seed = report.seeds.derive("eta", exp.instances * CDC_MAX_ORDER);
    let mut rng = replica_rng(seed, 0);
    let mut mismatches = 0usize;
    for k in 1..=CDC_MAX_ORDER {
        let setup = FieldSetup::new(&ctx.spec, geom, &table, k)?;
        for i in 0..exp.instances {
            let eta = random_eta(&ctx.spec, v, exp.eta_cap, &mut rng);
            let ev = FieldEvaluator::<Q>::new(setup, &phi, &eta)?;
            let squares = ev.carre_du_champ();
            let defining = ev.carre_du_champ_defining()?;
            let equal = squares == defining;
            mismatches += usize::from(!equal);
            report.data.push(vec![
                k.to_string(),
                i.to_string(),
                cell(to_f64(&squares)),
                equal.to_string(),
            ]);
        }
    }
    report.check(Check::gating(
        "carre_du_champ_identity",
        mismatches == 0,
        mismatches as f64,
        0.0,
        format!(
            "{} instances per order k <= {CDC_MAX_ORDER} on {v} sites",
            exp.instances
        ),
    ));
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qr};
    use crate::verify::config::{ModelConfig, RunConfig};

    #[test]
    fn identity_holds_on_a_square_side() {
        let mut cfg = RunConfig::new(ModelConfig::new(-1, q(2), qr(1, 2), 1, 9));
        cfg.experiment.instances = 2;
        let r = suite_carre_du_champ(&Context::new(cfg).unwrap()).unwrap();
        assert!(r.verdict.passed());
    }

    #[test]
    fn irrational_scaling_is_a_config_error() {
        let cfg = RunConfig::new(ModelConfig::new(0, q(1), qr(1, 2), 1, 6));
        assert!(matches!(
            suite_carre_du_champ(&Context::new(cfg).unwrap()),
            Err(Error::Config(_))
        ));
    }
}
