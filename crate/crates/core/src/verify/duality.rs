//! Generator duality in exact arithmetic, and semigroup duality by Monte Carlo.

use num_traits::{Signed, Zero};

use crate::dynamics::{capped_occupancies, check_duality_pointwise, replica_rng, simulate, simulate_dual};
use crate::error::Result;
use crate::model::{DualConfig, Occupancy};
use crate::orthopoly::{enumerate_multisets, eval_d_f64};
use crate::rational::to_f64;

use super::config::Context;
use super::replicas::{par_replicas, random_dual, random_eta};
use super::report::{cell, Check, SuiteReport};
use super::stats::{pooled_se, EstimateWithError};

/// Highest dual order checked exhaustively.
pub const DUALITY_MAX_ORDER: usize = 3;

/// Occupancies tested against every dual configuration: all of them when
/// there are at most `limit`, otherwise `samples` uniform draws.
pub fn duality_occupancies(ctx: &Context, seed: u64) -> Vec<Occupancy> {
    let exp = ctx.experiment();
    let v = ctx.geom.volume();
    let cap = ctx.spec.site_cap().map_or(exp.eta_cap, |c| c.min(exp.eta_cap));
    let total = (cap as f64 + 1.0).powi(v as i32);
    if total <= exp.exhaustive_eta_limit as f64 {
        capped_occupancies(v, cap)
    } else {
        let mut rng = replica_rng(seed, 0);
        (0..exp.eta_samples)
            .map(|_| random_eta(&ctx.spec, v, cap, &mut rng))
            .collect()
    }
}

pub fn suite_duality(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let tol = ctx.tolerances();
    let mut report = SuiteReport::new(
        "duality",
        ctx.seed(),
        &[
            "part",
            "k",
            "index",
            "t",
            "lhs",
            "rhs",
            "lhs_se",
            "rhs_se",
            "nonzero_residuals",
            "max_abs_residual",
        ],
    );
    let table = ctx.table(DUALITY_MAX_ORDER)?;
    let v = ctx.geom.volume();

    let eta_seed = report.seeds.derive("exact/eta", exp.eta_samples);
    let etas = duality_occupancies(ctx, eta_seed);
    let mut total_nonzero = 0usize;
    let mut overall_max = 0.0f64;
    for k in 0..=DUALITY_MAX_ORDER {
        let xis = enumerate_multisets(v, k, ctx.spec.site_cap());
        let mut nonzero = 0usize;
        let mut max_abs = 0.0f64;
        for xi in &xis {
            for eta in &etas {
                let r = check_duality_pointwise(&ctx.spec, &ctx.geom, xi, eta, &table);
                if !r.is_zero() {
                    nonzero += 1;
                    max_abs = max_abs.max(to_f64(&r.abs()));
                }
            }
        }
        report.data.push(vec![
            "exact".into(),
            k.to_string(),
            xis.len().to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            nonzero.to_string(),
            cell(max_abs),
        ]);
        total_nonzero += nonzero;
        overall_max = overall_max.max(max_abs);
    }
    report.check(Check::gating(
        "generator_duality_exact",
        total_nonzero == 0,
        overall_max,
        0.0,
        format!(
            "{} occupancies x all dual configurations with k <= {DUALITY_MAX_ORDER}; {total_nonzero} nonzero residuals under convention {}",
            etas.len(),
            table.pair.label()
        ),
    ));

    // Semigroup duality: E_eta[D(xi, eta_t)] against E_xi[D(xi_t, eta)].
    let pair_seed = report.seeds.derive("mc/pairs", exp.duality_pairs);
    let mut rng = replica_rng(pair_seed, 0);
    let cap = ctx.spec.site_cap().map_or(exp.eta_cap, |c| c.min(exp.eta_cap));
    let pairs: Vec<(DualConfig, Occupancy)> = (0..exp.duality_pairs)
        .map(|i| {
            let k = 1 + i % DUALITY_MAX_ORDER;
            (
                random_dual(&ctx.spec, v, k, &mut rng),
                random_eta(&ctx.spec, v, cap, &mut rng),
            )
        })
        .collect();
    let mut worst_z = 0.0f64;
    let mut all_ok = true;
    for (i, (xi, eta)) in pairs.iter().enumerate() {
        for &t in &exp.duality_times {
            let lseed = report.seeds.derive(&format!("mc/{i}/t={t}/eta"), exp.replicas);
            let rseed = report.seeds.derive(&format!("mc/{i}/t={t}/xi"), exp.replicas);
            let lhs = par_replicas(lseed, exp.replicas, |rng| {
                let traj = simulate(&ctx.spec, &ctx.geom, eta.clone(), t, 1.0, rng);
                Ok(eval_d_f64(&table, xi, &traj.final_state()))
            })?;
            let rhs = par_replicas(rseed, exp.replicas, |rng| {
                let traj = simulate_dual(&ctx.spec, &ctx.geom, xi, t, 1.0, rng);
                Ok(eval_d_f64(&table, &DualConfig::from_dense(&traj.final_state()), eta))
            })?;
            let l = EstimateWithError::from_samples(&lhs, lseed)?;
            let r = EstimateWithError::from_samples(&rhs, rseed)?;
            let se = pooled_se(&l, &r);
            let diff = (l.mean - r.mean).abs();
            let ok = diff <= tol.se_multiplier * se;
            if se > 0.0 {
                worst_z = worst_z.max(diff / se);
            } else if diff > 0.0 {
                worst_z = f64::INFINITY;
            }
            all_ok &= ok;
            report.data.push(vec![
                "monte_carlo".into(),
                xi.size().to_string(),
                i.to_string(),
                cell(t),
                cell(l.mean),
                cell(r.mean),
                cell(l.std_error),
                cell(r.std_error),
                String::new(),
                String::new(),
            ]);
            report.estimate(&format!("pair{i}/t={t}/eta_side"), l);
            report.estimate(&format!("pair{i}/t={t}/xi_side"), r);
        }
    }
    report.check(Check::gating(
        "semigroup_duality_monte_carlo",
        all_ok,
        worst_z,
        tol.se_multiplier,
        "largest |difference| / pooled SE over the (xi, eta, t) grid",
    ));
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qr};
    use crate::verify::config::{ConventionOverride, ModelConfig, RunConfig};

    fn config(sigma: i64, alpha: i64) -> RunConfig {
        let mut cfg = RunConfig::new(ModelConfig::new(sigma, q(alpha), qr(1, 2), 1, 5));
        cfg.experiment.replicas = 200;
        cfg.experiment.eta_samples = 30;
        cfg.experiment.duality_pairs = 2;
        cfg
    }

    #[test]
    fn resolved_convention_passes_and_flipped_fails() {
        let ctx = Context::new(config(1, 1)).unwrap();
        let r = suite_duality(&ctx).unwrap();
        assert!(r.find_check("generator_duality_exact").unwrap().passed);
        let mut cfg = config(1, 1);
        // Reversing both signs only multiplies D by (-1)^k; flip one.
        cfg.convention_override = Some(ConventionOverride { sign_e: 1, sign_h: -1 });
        let r = suite_duality(&Context::new(cfg).unwrap()).unwrap();
        assert!(!r.find_check("generator_duality_exact").unwrap().passed);
        assert!(!r.verdict.passed());
    }

    #[test]
    fn order_zero_and_one_rows_are_clean() {
        let ctx = Context::new(config(-1, 2)).unwrap();
        let r = suite_duality(&ctx).unwrap();
        for row in r.data.rows.iter().filter(|row| row[0] == "exact").take(2) {
            assert_eq!(row[8], "0");
        }
    }
}
