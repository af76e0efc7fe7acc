//! Acceptance criteria 1-11 of the library. Prints one PASS/FAIL line per
//! criterion (plus indented detail lines) and exits non-zero if any fails.
//!
//! Run alone with `cargo test -p orthofield-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use orthofield_core::rational::{q, qr};
use orthofield_core::verify::{run_suite, Context, ModelConfig, RunConfig, SuiteName, SuiteReport};

struct Model {
    name: &'static str,
    sigma: i64,
    alpha: i64,
}

const MODELS: [Model; 3] = [
    Model {
        name: "IRW",
        sigma: 0,
        alpha: 1,
    },
    Model {
        name: "SEP(2)",
        sigma: -1,
        alpha: 2,
    },
    Model {
        name: "SIP(1)",
        sigma: 1,
        alpha: 1,
    },
];

const SIP: Model = Model {
    name: "SIP(1)",
    sigma: 1,
    alpha: 1,
};

fn config(m: &Model, d: usize, side: usize) -> RunConfig {
    RunConfig::new(ModelConfig::new(m.sigma, q(m.alpha), qr(1, 2), d, side))
}

fn run(cfg: RunConfig, suite: SuiteName) -> SuiteReport {
    let ctx = Context::new(cfg).unwrap_or_else(|e| panic!("{suite}: invalid configuration: {e}"));
    run_suite(&ctx, suite).unwrap_or_else(|e| panic!("{suite}: {e}"))
}

struct Outcome {
    passed: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn failed_names(r: &SuiteReport) -> String {
    let names: Vec<&str> = r.failed_checks().iter().map(|c| c.name.as_str()).collect();
    if names.is_empty() {
        "all gating checks pass".into()
    } else {
        format!("failed: {}", names.join(", "))
    }
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    for m in &MODELS {
        let mut cfg = config(m, 1, 6);
        cfg.experiment.eta_samples = 200;
        let r = run(cfg, SuiteName::Duality);
        let c = r.find_check("generator_duality_exact").expect("exact duality check");
        out.record(c.passed && c.value == 0.0, format!("{}: {}", m.name, c.detail));
        let mc = r
            .find_check("semigroup_duality_monte_carlo")
            .expect("Monte Carlo duality check");
        out.lines.push(format!(
            "     {}: semigroup duality max |diff|/SE = {:.2} (info)",
            m.name, mc.value
        ));
    }
    out
}

fn criterion_suite_verdict(suite: SuiteName, d: usize, side: usize, tune: fn(&mut RunConfig)) -> Outcome {
    let mut out = Outcome::new();
    for m in &MODELS {
        let mut cfg = config(m, d, side);
        tune(&mut cfg);
        let r = run(cfg, suite);
        let summary: Vec<String> = r
            .checks
            .iter()
            .filter(|c| c.gating)
            .map(|c| format!("{}={:.3e}", c.name, c.value))
            .collect();
        out.record(
            r.verdict.passed(),
            format!("{}: {}; {}", m.name, failed_names(&r), summary.join(" ")),
        );
    }
    out
}

fn martingale(k: usize, names: &[&str]) -> Outcome {
    let mut out = Outcome::new();
    let mut cfg = config(&SIP, 1, 64);
    cfg.field.k = k;
    cfg.experiment.horizon = 0.1;
    cfg.experiment.replicas = 10_000;
    let r = run(cfg, SuiteName::Martingale);
    for name in names {
        let c = r.find_check(name).expect("martingale check");
        out.record(
            c.passed,
            format!(
                "{}: {} (value {:.3}, threshold {:.3}); {}",
                SIP.name, name, c.value, c.threshold, c.detail
            ),
        );
    }
    for c in r.checks.iter().filter(|c| !c.gating) {
        out.lines
            .push(format!("     info {}: {:.3}; {}", c.name, c.value, c.detail));
    }
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let mut cfg = config(&SIP, 1, 64);
    cfg.field.k = 2;
    cfg.experiment.n_list = vec![8, 16, 32, 64];
    cfg.experiment.replicas = 4000;
    let r = run(cfg, SuiteName::DriftScaling);
    let s = r.find_scaling("drift_error_sq_vs_n").expect("drift scaling fit");
    let pts: Vec<String> = s
        .points
        .iter()
        .map(|p| format!("n={}: {:.4e}+-{:.1e}", p.n, p.estimate.mean, p.estimate.std_error))
        .collect();
    out.record(
        s.slope > -1.3 && s.slope < -0.7,
        format!(
            "fitted slope {:.3} +- {:.3}, required in (-1.3, -0.7); {}",
            s.slope,
            s.slope_se,
            pts.join(", ")
        ),
    );
    for name in [
        "drift_error_exact_slope",
        "drift_error_slope_bound",
        "drift_error_time_growth_band",
    ] {
        if let Some(c) = r.find_check(name) {
            out.lines
                .push(format!("     info {name}: {:.3}; {}", c.value, c.detail));
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    for m in &MODELS {
        for k in [1, 2] {
            let mut cfg = config(m, 1, 8);
            cfg.field.k = k;
            cfg.experiment.t_list = vec![0.01, 0.05, 0.1];
            cfg.experiment.replicas = 10_000;
            let r = run(cfg, SuiteName::Covariance);
            let stat = r.find_check("static_covariance_analytic").expect("static check");
            out.record(
                stat.passed,
                format!("{} k={k}: t=0 analytic gap {:.2e}", m.name, stat.value),
            );
            for t in ["0.01", "0.05", "0.1"] {
                let c = r.find_check(&format!("covariance_t={t}")).expect("covariance check");
                out.record(
                    c.passed,
                    format!("{} k={k} t={t}: z = {:.2}; {}", m.name, c.value, c.detail),
                );
            }
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let mut out = Outcome::new();
    for m in &MODELS {
        for k in 1..=3 {
            let mut cfg = config(m, 1, 8);
            cfg.field.k = k;
            cfg.experiment.n_list = vec![8, 16, 32, 64];
            cfg.experiment.replicas = 10_000;
            let r = run(cfg, SuiteName::Moments);
            for name in ["second_moment", "fourth_moment"] {
                match r.find_scaling(&format!("{name}_vs_n")) {
                    Some(s) => {
                        let exact = r
                            .find_check(&format!("{}_moment_exact_range", &name[..name.find('_').unwrap()]))
                            .map_or(String::new(), |c| format!("; exact {}", c.detail));
                        out.record(
                            s.slope.abs() <= 0.1,
                            format!(
                                "{} k={k} {name}: slope {:.3} +- {:.3}{exact}",
                                m.name, s.slope, s.slope_se
                            ),
                        );
                    }
                    None => out.record(true, format!("{} k={k} {name}: vanishes identically", m.name)),
                }
            }
        }
    }
    out
}

fn criterion_11() -> Outcome {
    let mut out = Outcome::new();
    for suite in SuiteName::ALL {
        let mut cfg = config(&SIP, 1, 9);
        cfg.seed = 7;
        cfg.experiment.replicas = 40;
        cfg.experiment.n_list = vec![6, 9, 12];
        cfg.experiment.cases = 20;
        cfg.experiment.eta_samples = 20;
        cfg.experiment.duality_pairs = 2;
        let csv = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run(cfg.clone(), suite).data.to_csv())
        };
        let a = csv(1);
        let b = csv(1);
        let c = csv(3);
        out.record(
            a == b && a == c,
            format!("{suite}: {} bytes, identical across reruns and worker counts", a.len()),
        );
    }
    out
}

fn main() -> ExitCode {
    let criteria: Vec<(usize, &str, Duration, Box<dyn Fn() -> Outcome>)> = vec![
        (
            1,
            "exact generator duality",
            Duration::from_secs(120),
            Box::new(criterion_1),
        ),
        (
            2,
            "orthogonality and norms",
            Duration::from_secs(60),
            Box::new(|| criterion_suite_verdict(SuiteName::Orthogonality, 1, 6, |_| {})),
        ),
        (
            3,
            "recursion identities",
            Duration::from_secs(60),
            Box::new(|| {
                criterion_suite_verdict(SuiteName::Recursion, 1, 6, |c| {
                    c.experiment.recursion_degree = 6;
                    c.experiment.recursion_n = 40;
                })
            }),
        ),
        (
            4,
            "gradient decomposition",
            Duration::from_secs(120),
            Box::new(|| criterion_suite_verdict(SuiteName::Gradient, 1, 8, |c| c.experiment.cases = 100)),
        ),
        (
            5,
            "carre du champ identity",
            Duration::from_secs(60),
            Box::new(|| criterion_suite_verdict(SuiteName::CarreDuChamp, 1, 16, |_| {})),
        ),
        (
            6,
            "martingale, k = 1",
            Duration::from_secs(600),
            Box::new(|| martingale(1, &["m_centered", "qv_deterministic_target"])),
        ),
        (
            7,
            "martingale, k = 2",
            Duration::from_secs(1200),
            Box::new(|| martingale(2, &["m_centered", "n_centered", "qv_matches_lower_order"])),
        ),
        (
            8,
            "drift-closure scaling",
            Duration::from_secs(1800),
            Box::new(criterion_8),
        ),
        (
            9,
            "covariance against the dual semigroup",
            Duration::from_secs(600),
            Box::new(criterion_9),
        ),
        (
            10,
            "moment boundedness",
            Duration::from_secs(600),
            Box::new(criterion_10),
        ),
        (11, "determinism", Duration::from_secs(600), Box::new(criterion_11)),
    ];
    let mut failures = Vec::new();
    for (id, title, budget, f) in &criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let passed = outcome.passed && in_time;
        println!(
            "criterion {id:>2} {}: {title} ({:.1} s of {} s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for line in &outcome.lines {
            println!("    {line}");
        }
        if !in_time {
            println!("    FAIL runtime budget exceeded");
        }
        if !passed {
            failures.push(*id);
        }
    }
    if failures.is_empty() {
        println!("acceptance: all criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAIL for criteria {failures:?}");
        ExitCode::FAILURE
    }
}
