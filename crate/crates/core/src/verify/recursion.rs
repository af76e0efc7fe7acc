//! Generating-function identities: direct expansion of `e(t) h(t)^n`,
//! the shift recursion in `n`, and the degree-one constant.

use num_traits::Zero;

use crate::error::Result;
use crate::orthopoly::{extend_pair, table_for_pair};
use crate::rational::{fmt_q, to_f64};
use crate::series;

use super::config::Context;
use super::report::{Check, SuiteReport};

pub fn suite_recursion(ctx: &Context) -> Result<SuiteReport> {
    let exp = ctx.experiment();
    let m_top = exp.recursion_degree;
    let n_top = exp.recursion_n;
    let mut report = SuiteReport::new("recursion", ctx.seed(), &["n", "m", "direct", "shift", "table"]);
    let len = m_top + 1;
    let pair = extend_pair(&ctx.spec, &ctx.pair, m_top);
    let table = table_for_pair(&ctx.spec, &ctx.pair, m_top)?;
    let cap = ctx.spec.site_cap();

    let mut shift_ok = true;
    let mut table_ok = true;
    let mut compared = 0usize;
    let mut col = pair.e[..len].to_vec();
    for n in 0..=n_top {
        if n > 0 {
            col = series::mul(&col, &pair.h, len);
        }
        let direct = series::mul(&pair.e, &series::pow(&pair.h, n as usize, len), len);
        let in_support = cap.is_none_or(|c| n <= c);
        for m in 0..len {
            shift_ok &= direct[m] == col[m];
            let tab = table.dd(m, n);
            if in_support {
                table_ok &= direct[m] == tab;
                compared += 1;
            }
            report.data.push(vec![
                n.to_string(),
                m.to_string(),
                fmt_q(&direct[m]),
                fmt_q(&col[m]),
                if in_support { fmt_q(&tab) } else { String::new() },
            ]);
        }
    }
    report.check(Check::gating(
        "direct_equals_shift",
        shift_ok,
        if shift_ok { 0.0 } else { 1.0 },
        0.0,
        format!("[t^m] e h^n against n-fold multiplication by h, m <= {m_top}, n <= {n_top}"),
    ));
    report.check(Check::gating(
        "direct_equals_table",
        table_ok,
        if table_ok { 0.0 } else { 1.0 },
        0.0,
        format!("{compared} coefficients against the Newton-form table inside the support"),
    ));

    let g_tilde = pair.g_tilde();
    let c = pair.c_conv();
    let constant_ok = g_tilde[1] == c && c == -pair.g(1) && table.c_measured() == c;
    report.check(Check::gating(
        "degree_one_constant",
        constant_ok,
        to_f64(&c),
        to_f64(&g_tilde[1]),
        format!(
            "g~(1) = {}, -g(1) = {}, measured {}",
            fmt_q(&g_tilde[1]),
            fmt_q(&c),
            fmt_q(&table.c_measured())
        ),
    ));

    // Up and down recursions on the table itself.
    let mut rec_ok = true;
    for n in 0..n_top {
        for m in 0..=table.m_max {
            let up_in = cap.is_none_or(|c| n < c);
            if up_in {
                let up = (0..=m).fold(crate::rational::Q::zero(), |acc, j| {
                    acc + pair.g(m - j) * table.dd(j, n)
                });
                rec_ok &= up == table.dd(m, n + 1);
            }
            let down_in = n >= 1 && cap.is_none_or(|c| n <= c);
            if down_in {
                let down = (0..=m).fold(crate::rational::Q::zero(), |acc, j| {
                    acc + &g_tilde[m - j] * table.dd(j, n)
                });
                rec_ok &= down == table.dd(m, n - 1);
            }
        }
    }
    report.check(Check::gating(
        "shift_recursions",
        rec_ok,
        if rec_ok { 0.0 } else { 1.0 },
        0.0,
        "dd(., n+1) = g * dd(., n) and dd(., n-1) = g~ * dd(., n)",
    ));
    Ok(report.finish())
}
