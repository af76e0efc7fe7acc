//! Gram matrix of the single-site polynomials and constancy of `Lambda / mu`.

use num_traits::{One, Zero};

use crate::dynamics::replica_rng;
use crate::error::Result;
use crate::model::Lambda_of;
use crate::orthopoly::{mu_of, TAIL_TOLERANCE};
use crate::rational::{fmt_q, to_f64, Q};

use super::config::Context;
use super::replicas::random_dual;
use super::report::{cell, Check, SuiteReport};

/// Orders `k` for which `Lambda / mu` is compared across configurations.
pub const RATIO_MAX_ORDER: usize = 3;

pub fn suite_orthogonality(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let tol = ctx.tolerances();
    let mut report = SuiteReport::new("orthogonality", ctx.seed(), &["kind", "a", "b", "float", "exact"]);
    let table = ctx.table(exp.m_max)?;
    let exact = table.gram_exact();
    let (float, tail) = table.gram_truncated();
    let len = table.m_max + 1;

    let mut max_off_float = 0.0f64;
    let mut exact_off_zero = true;
    let mut diag_exact_ok = true;
    let mut max_diag_rel = 0.0f64;
    for a in 0..len {
        for b in 0..len {
            report.data.push(vec![
                "gram".into(),
                a.to_string(),
                b.to_string(),
                cell(float[a][b]),
                fmt_q(&exact[a][b]),
            ]);
            if a != b {
                max_off_float = max_off_float.max(float[a][b].abs());
                exact_off_zero &= exact[a][b].is_zero();
            } else {
                let target = Q::one() / table.mu_single(a);
                diag_exact_ok &= exact[a][a] == target;
                let t = to_f64(&target);
                max_diag_rel = max_diag_rel.max((float[a][a] - t).abs() / t.abs());
            }
        }
    }
    let exclusion = ctx.spec.sigma() == -1;
    report.check(Check {
        gating: exclusion,
        ..Check::gating(
            "gram_offdiagonal_exact",
            exact_off_zero,
            if exact_off_zero { 0.0 } else { 1.0 },
            0.0,
            format!("exact Gram matrix up to degree {}", table.m_max),
        )
    });
    report.check(Check {
        gating: !exclusion,
        ..Check::gating(
            "gram_offdiagonal_float",
            max_off_float < tol.gram_tolerance,
            max_off_float,
            tol.gram_tolerance,
            format!("truncated sums over n <= {}", table.n_max),
        )
    });
    report.check(Check {
        gating: !exclusion,
        ..Check::gating(
            "gram_tail_certified",
            tail < TAIL_TOLERANCE,
            tail,
            TAIL_TOLERANCE,
            "bound on the neglected tail of the float sums",
        )
    });
    report.check(Check::gating(
        "gram_diagonal_exact",
        diag_exact_ok,
        if diag_exact_ok { 0.0 } else { 1.0 },
        0.0,
        "E[d(m)^2] = 1 / mu(m) exactly",
    ));
    report.check(Check::info(
        "gram_diagonal_float",
        max_diag_rel < tol.gram_tolerance,
        max_diag_rel,
        tol.gram_tolerance,
        "relative error of the float diagonal",
    ));

    let seed = report.seeds.derive("ratio/xi", exp.ratio_samples * RATIO_MAX_ORDER);
    let mut rng = replica_rng(seed, 0);
    let v = ctx.geom.volume();
    let mut worst_rel = 0.0f64;
    let mut exact_const = true;
    for k in 1..=RATIO_MAX_ORDER {
        let ratios: Vec<Q> = (0..exp.ratio_samples)
            .map(|_| {
                let xi = random_dual(&ctx.spec, v, k, &mut rng);
                Ok(Lambda_of(&ctx.spec, &xi)? / mu_of(&table, &xi))
            })
            .collect::<Result<_>>()?;
        let first = to_f64(&ratios[0]);
        for (i, r) in ratios.iter().enumerate() {
            exact_const &= r == &ratios[0];
            let rel = ((to_f64(r) - first) / first).abs();
            worst_rel = worst_rel.max(rel);
            report.data.push(vec![
                "lambda_over_mu".into(),
                k.to_string(),
                i.to_string(),
                cell(to_f64(r)),
                fmt_q(r),
            ]);
        }
    }
    report.check(Check::gating(
        "lambda_mu_ratio_constant",
        worst_rel <= tol.ratio_tolerance,
        worst_rel,
        tol.ratio_tolerance,
        format!(
            "{} random configurations per order k <= {RATIO_MAX_ORDER}",
            exp.ratio_samples
        ),
    ));
    report.check(Check::info(
        "lambda_mu_ratio_exact",
        exact_const,
        if exact_const { 0.0 } else { 1.0 },
        0.0,
        "ratios equal as rationals",
    ));
    let mean_zero = exact[0][1].is_zero();
    report.check(Check::gating(
        "degree_one_mean_zero",
        mean_zero,
        to_f64(&exact[0][1]),
        0.0,
        "E[d(1)] = 0",
    ));
    Ok(report.finish())
}
