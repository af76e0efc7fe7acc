//! Martingale problem at finite `n`: centering of `M_T` and `N_T`, and the
//! quadratic variation against its closed form in the order `k - 1` field.

use crate::error::Result;
use crate::fields::{FieldSetup, TestFunction};
use crate::model::Geometry;
use crate::rational::to_f64;

use super::config::Context;
use super::replicas::{martingale_cells, martingale_header, martingale_runs};
use super::report::{Check, SuiteReport};
use super::stats::{pooled_se, EstimateWithError};

/// `chi rho (alpha + sigma rho) c^2 (n^{-d} sum_x |grad phi(x/n)|^2) T`, the
/// deterministic quadratic variation of the `k = 1` martingale.
pub fn first_order_qv_target(ctx: &Context, geom: &Geometry, phi: &TestFunction, horizon: f64) -> f64 {
    let rho = ctx.spec.rho_f64();
    let mobility = rho * (ctx.spec.alpha_f64() + ctx.spec.sigma() as f64 * rho);
    let c = to_f64(&ctx.pair.c_conv());
    let v = geom.volume();
    let energy: f64 = (0..v)
        .map(|x| phi.gradient(&geom.torus.position(x)).iter().map(|g| g * g).sum::<f64>())
        .sum::<f64>()
        / v as f64;
    geom.kernel.chi_f64() * mobility * c * c * energy * horizon
}

pub fn suite_martingale(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let tol = ctx.tolerances();
    let z = tol.se_multiplier;
    let k = ctx.k();
    let mut report = SuiteReport::new("martingale", ctx.seed(), &martingale_header());
    let table = ctx.table(k)?;
    let setup = FieldSetup::new(&ctx.spec, &ctx.geom, &table, k)?;
    let phi_fn = ctx.config.phi();
    let phi = phi_fn.sample(&ctx.geom.torus);
    let t = exp.horizon;
    let seed = report.seeds.derive("trajectories", exp.replicas);
    let runs = martingale_runs(setup, &phi, t, &[t], seed, exp.replicas)?;
    for (i, s) in runs.iter().enumerate() {
        for row in martingale_cells(i, s) {
            report.data.push(row);
        }
    }
    let last: Vec<_> = runs.iter().map(|s| *s.last()).collect();
    let column = |f: &dyn Fn(&crate::fields::MartingaleRow) -> f64| -> Result<EstimateWithError> {
        EstimateWithError::from_samples(&last.iter().map(f).collect::<Vec<_>>(), seed)
    };
    let m = column(&|r| r.m)?;
    let nn = column(&|r| r.n)?;
    let cdc = column(&|r| r.cdc_integral)?;
    let qv = column(&|r| r.qv_closed_integral)?;
    let m2 = column(&|r| r.m * r.m)?;
    let paired = column(&|r| r.cdc_integral - r.qv_closed_integral)?;

    report.check(Check::gating(
        "m_centered",
        m.consistent_with(0.0, z),
        m.z_score(0.0),
        z,
        format!("mean M_T = {:.4e} +- {:.2e}", m.mean, m.std_error),
    ));
    report.check(Check::gating(
        "n_centered",
        nn.consistent_with(0.0, z),
        nn.z_score(0.0),
        z,
        format!("mean N_T = {:.4e} +- {:.2e}", nn.mean, nn.std_error),
    ));
    let se = pooled_se(&cdc, &qv);
    let diff = cdc.mean - qv.mean;
    let qv_z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    report.check(Check::gating(
        "qv_matches_lower_order",
        qv_z.abs() <= z,
        qv_z,
        z,
        format!(
            "mean int n^2 Gamma Y = {:.4e}, closed order-{} form = {:.4e}, two-sample SE {se:.2e}",
            cdc.mean,
            k - 1,
            qv.mean
        ),
    ));
    report.check(Check::info(
        "qv_matches_lower_order_paired",
        paired.consistent_with(0.0, z),
        paired.z_score(0.0),
        z,
        format!("paired difference {:.4e} +- {:.2e}", paired.mean, paired.std_error),
    ));
    report.check(Check::info(
        "m_squared_matches_qv",
        (m2.mean - cdc.mean).abs() <= z * pooled_se(&m2, &cdc),
        m2.mean - cdc.mean,
        z * pooled_se(&m2, &cdc),
        format!("mean M_T^2 = {:.4e}", m2.mean),
    ));
    if k == 1 {
        let target = first_order_qv_target(ctx, &ctx.geom, &phi_fn, t);
        let rel = if target == 0.0 {
            cdc.mean.abs()
        } else {
            ((cdc.mean - target) / target).abs()
        };
        report.check(Check::gating(
            "qv_deterministic_target",
            rel <= tol.qv_relative,
            rel,
            tol.qv_relative,
            format!("mean int n^2 Gamma Y = {:.4e} against {target:.4e}", cdc.mean),
        ));
    }
    report.estimate("M_T", m);
    report.estimate("N_T", nn);
    report.estimate("cdc_integral", cdc);
    report.estimate("qv_closed_integral", qv);
    report.estimate("M_T_squared", m2);
    report.estimate("cdc_minus_qv", paired);
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TestFunction;
    use crate::rational::{q, qr};
    use crate::verify::config::{ModelConfig, RunConfig};

    fn small(sigma: i64, alpha: i64, k: usize) -> RunConfig {
        let mut cfg = RunConfig::new(ModelConfig::new(sigma, q(alpha), qr(1, 2), 1, 12));
        cfg.field.k = k;
        cfg.experiment.replicas = 400;
        cfg
    }

    #[test]
    fn first_order_target_is_the_riemann_sum() {
        // sin(2 pi u) on Z/12: n^{-1} sum cos^2 (2 pi)^2 = 2 pi^2; nearest
        // neighbour chi = 1, IRW with rho = 1/2 and c^2 = 1.
        let ctx = Context::new(small(0, 1, 1)).unwrap();
        let target = first_order_qv_target(&ctx, &ctx.geom, &TestFunction::sine(1), 1.0);
        let c = to_f64(&ctx.pair.c_conv());
        let expect = 0.5 * c * c * 2.0 * std::f64::consts::PI.powi(2);
        assert!((target - expect).abs() < 1e-12 * expect, "{target} {expect}");
    }

    #[test]
    fn centered_statistics_pass_for_small_systems() {
        for (sigma, alpha, k) in [(0, 1, 1), (1, 1, 2), (-1, 2, 2)] {
            let r = suite_martingale(&Context::new(small(sigma, alpha, k)).unwrap()).unwrap();
            for name in ["m_centered", "n_centered"] {
                assert!(r.find_check(name).unwrap().passed, "sigma {sigma} k {k}: {name}");
            }
        }
    }

    #[test]
    fn constant_function_gives_zero_statistics() {
        let mut cfg = small(1, 1, 2);
        cfg.field.phi = Some(TestFunction::Trig {
            constant: 0.0,
            terms: vec![],
        });
        cfg.experiment.replicas = 10;
        let r = suite_martingale(&Context::new(cfg).unwrap()).unwrap();
        for name in ["M_T", "N_T", "cdc_integral", "qv_closed_integral"] {
            assert_eq!(r.find_estimate(name).unwrap().mean, 0.0, "{name}");
        }
        assert!(r.verdict.passed());
    }
}
