//! Second-order Taylor remainder of the discrete kernel Laplacian.

use num_traits::Zero;

use crate::error::Result;
use crate::model::Kernel;
use crate::rational::{fmt_q, to_f64, Q};

use super::config::Context;
use super::report::{cell, Check, SuiteReport};

/// `sum_r r_j p(r)` for every axis `j`, exact.
pub fn first_moments(kernel: &Kernel) -> Vec<Q> {
    (0..kernel.dim)
        .map(|j| {
            kernel
                .offsets
                .iter()
                .zip(&kernel.weights)
                .fold(Q::zero(), |acc, (r, w)| acc + Q::from_integer(r[j].into()) * w)
        })
        .collect()
}

/// `sum_r r_j r_l p(r)` for `j < l`, exact.
pub fn cross_moments(kernel: &Kernel) -> Vec<Q> {
    let mut out = Vec::new();
    for j in 0..kernel.dim {
        for l in j + 1..kernel.dim {
            out.push(
                kernel
                    .offsets
                    .iter()
                    .zip(&kernel.weights)
                    .fold(Q::zero(), |acc, (r, w)| acc + Q::from_integer((r[j] * r[l]).into()) * w),
            );
        }
    }
    out
}

/// `psi_n(x/n) = n [n^2 sum_r p(r) (phi((x+r)/n) - phi(x/n)) - (chi/2) Delta phi(x/n)]`
/// on every site of the side-`n` torus.
pub fn taylor_remainder(ctx: &Context, n: usize) -> Result<Vec<f64>> {
    let geom = ctx.geometry_with_side(n)?;
    let f = ctx.config.phi().sample(&geom.torus);
    let chi = geom.kernel.chi_f64();
    let nf = n as f64;
    Ok((0..geom.volume())
        .map(|x| {
            let diff: f64 = (0..geom.degree())
                .map(|j| geom.kernel.weight_f64(j) * (f.values[geom.neighbor(x, j)] - f.values[x]))
                .sum();
            nf * (nf * nf * diff - chi / 2.0 * f.laplacians[x])
        })
        .collect())
}

pub fn suite_taylor(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let tol = ctx.tolerances();
    let mut report = SuiteReport::new("taylor", ctx.seed(), &["n", "mean_abs_remainder", "max_abs_remainder"]);
    let kernel = &ctx.geom.kernel;
    let first = first_moments(kernel);
    let cross = cross_moments(kernel);
    let first_ok = first.iter().all(Zero::is_zero);
    let cross_ok = cross.iter().all(Zero::is_zero);
    report.check(Check::gating(
        "first_moments_vanish",
        first_ok,
        first.iter().map(|v| to_f64(v).abs()).fold(0.0, f64::max),
        0.0,
        first.iter().map(fmt_q).collect::<Vec<_>>().join(" "),
    ));
    report.check(Check::gating(
        "cross_moments_vanish",
        cross_ok,
        cross.iter().map(|v| to_f64(v).abs()).fold(0.0, f64::max),
        0.0,
        cross.iter().map(fmt_q).collect::<Vec<_>>().join(" "),
    ));

    let mut sums = Vec::new();
    for &n in &exp.n_list {
        let psi = taylor_remainder(ctx, n)?;
        let nd = (n as f64).powi(ctx.geom.torus.dim as i32);
        let mean_abs = psi.iter().map(|v| v.abs()).sum::<f64>() / nd;
        let max_abs = psi.iter().map(|v| v.abs()).fold(0.0, f64::max);
        report.data.push(vec![n.to_string(), cell(mean_abs), cell(max_abs)]);
        sums.push(mean_abs);
    }
    // Absolute floor for remainders that vanish up to rounding.
    let floor = 1e-9;
    let mut worst_growth = 0.0f64;
    let mut bounded = true;
    for w in sums.windows(2) {
        if w[1] > floor {
            let growth = w[1] / w[0].max(floor) - 1.0;
            worst_growth = worst_growth.max(growth);
            bounded &= growth <= tol.growth_tolerance;
        }
    }
    report.check(Check::gating(
        "remainder_bounded",
        bounded,
        worst_growth,
        tol.growth_tolerance,
        format!(
            "n^-d sum_x |psi_n(x/n)| over n = {:?}: {}",
            exp.n_list,
            sums.iter().map(|s| format!("{s:.4e}")).collect::<Vec<_>>().join(", ")
        ),
    ));
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TestFunction;
    use crate::rational::RationalInput;
    use crate::rational::{q, qr};
    use crate::verify::config::{KernelWeights, ModelConfig, OffsetInput, RunConfig};

    #[test]
    fn cosine_remainder_matches_closed_form() {
        // n^2 (cos(2 pi (x+1)/n) + cos(2 pi (x-1)/n) - 2 cos(2 pi x/n)) / 2
        // = n^2 (cos(2 pi / n) - 1) cos(2 pi x / n).
        let mut cfg = RunConfig::new(ModelConfig::new(0, q(1), qr(1, 2), 1, 16));
        cfg.field.phi = Some(TestFunction::cosine(1));
        let ctx = Context::new(cfg).unwrap();
        let n = 16.0f64;
        let psi = taylor_remainder(&ctx, 16).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        for (x, v) in psi.iter().enumerate() {
            let c = (tau * x as f64 / n).cos();
            let expect = n * (n * n * ((tau / n).cos() - 1.0) * c + tau * tau / 2.0 * c);
            assert!((v - expect).abs() < 1e-9, "{v} {expect}");
        }
        assert!(suite_taylor(&ctx).unwrap().verdict.passed());
    }

    #[test]
    fn longer_range_kernel_has_exact_cancellations() {
        let mut model = ModelConfig::new(0, q(1), qr(1, 2), 2, 9);
        model.radius = 2;
        model.kernel_weights = KernelWeights::Pairs(
            [[1, 0], [-1, 0], [0, 1], [0, -1], [2, 0], [-2, 0], [0, 2], [0, -2]]
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    (
                        OffsetInput::Vector(o.to_vec()),
                        RationalInput::Text(if i < 4 { "1/6" } else { "1/12" }.into()),
                    )
                })
                .collect(),
        );
        let cfg = RunConfig::new(model);
        let ctx = Context::new(cfg).unwrap();
        let r = suite_taylor(&ctx).unwrap();
        assert!(r.verdict.passed(), "{:?}", r.failed_checks());
    }

    #[test]
    fn constant_function_has_zero_remainder() {
        let mut cfg = RunConfig::new(ModelConfig::new(0, q(1), qr(1, 2), 1, 8));
        cfg.field.phi = Some(TestFunction::Trig {
            constant: 2.0,
            terms: vec![],
        });
        let ctx = Context::new(cfg).unwrap();
        assert!(taylor_remainder(&ctx, 8).unwrap().iter().all(|v| *v == 0.0));
        assert!(suite_taylor(&ctx).unwrap().verdict.passed());
    }
}
