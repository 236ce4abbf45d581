//! Named check suites: enumeration oracles, equality-case recursions, chain
//! inequalities, schedule properties, cost identities and exactness cases.
//!
//! Every check carries a pass flag and a short human-readable detail line.

use std::sync::Arc;

use num_complex::Complex64;

use crate::bounds::{
    cost_recursion_bound, fn_gron_bound, full_history_closed_form, full_history_corrected_bound, full_history_direct,
    full_history_equality_case, full_history_upper_bound, gronwall_backward_bound, mc_lp_bound, stirling_chain,
    stirling_log_chain, talk1_chain, two_step_closed_form, two_step_direct, GronwallInputs,
};
use crate::engine::{estimate, predicted_cost, MlpParams};
use crate::error::{MlpError, Result};
use crate::model::builtin;
use crate::numeric::rel_diff;
use crate::schedule::{check_phi_properties, phi_power_ratio};
use crate::stream::{derive_stream, Stream, StreamKey};

pub const SUITES: [&str; 8] = [
    "mc",
    "recursions",
    "stirling",
    "talk1",
    "phi",
    "gronwall",
    "cost",
    "exactness",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(suite: &'static str, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        suite,
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

/// Run one suite by name, or every suite for `"all"`.
pub fn run_suite(name: &str) -> Result<Vec<Check>> {
    match name {
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s)?);
            }
            Ok(out)
        }
        "mc" => Ok(mc_suite()),
        "recursions" => recursions_suite(),
        "stirling" => stirling_suite(),
        "talk1" => talk1_suite(),
        "phi" => phi_suite(),
        "gronwall" => gronwall_suite(),
        "cost" => cost_suite(),
        "exactness" => exactness_suite(),
        other => Err(MlpError::InvalidParameter(format!("unknown suite '{other}'"))),
    }
}

/// Exact `(E|mean of n Rademacher signs|^p)^{1/p}` by enumerating all `2ⁿ` sign tuples.
pub fn rademacher_mean_lp(n: u32, p: f64) -> f64 {
    let total = 1u64 << n;
    let mut acc = 0.0;
    for mask in 0..total {
        let plus = mask.count_ones() as f64;
        let mean = (2.0 * plus - n as f64) / n as f64;
        acc += mean.abs().powf(p);
    }
    (acc / total as f64).powf(1.0 / p)
}

fn mc_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let mut worst_slack = f64::INFINITY;
    let mut worst_eq: f64 = 0.0;
    let mut all = true;
    for p in [2.0, 3.0, 4.0] {
        for n in 1..=12u32 {
            let lhs = rademacher_mean_lp(n, p);
            // a Rademacher sign has E|X|^p = 1
            let rhs = mc_lp_bound(p, n as u64, 1.0, true).expect("valid order");
            let slack = rhs - lhs;
            worst_slack = worst_slack.min(slack);
            all &= slack >= -1e-12;
            if p == 2.0 {
                worst_eq = worst_eq.max((rhs - lhs).abs());
            }
        }
    }
    out.push(check(
        "mc",
        "centered bound dominates enumerated Rademacher means (n<=12, p in {2,3,4})",
        all,
        format!("min slack {worst_slack:e}"),
    ));
    out.push(check(
        "mc",
        "equality at p=2",
        worst_eq <= 1e-12,
        format!("max |bound - exact| {worst_eq:e}"),
    ));
    let v = rademacher_mean_lp(2, 4.0);
    out.push(check(
        "mc",
        "p=4 n=2 enumerated value",
        (v - 0.5f64.powf(0.25)).abs() < 1e-15 && v <= 1.5f64.sqrt(),
        format!("{v} <= {}", 1.5f64.sqrt()),
    ));
    let v = rademacher_mean_lp(5, 3.0);
    let b = mc_lp_bound(3.0, 5, 1.0, true).expect("valid order");
    out.push(check("mc", "p=3 n=5 enumerated value", v <= b, format!("{v} <= {b}")));
    out
}

fn complex_uniform(s: &mut Stream, radius: f64) -> Complex64 {
    Complex64::new(
        radius * (2.0 * s.next_uniform() - 1.0),
        radius * (2.0 * s.next_uniform() - 1.0),
    )
}

fn crel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn recursions_suite() -> Result<Vec<Check>> {
    const S: &str = "recursions";
    let mut out = Vec::new();
    let mut rng = derive_stream(20_240_501, &[1]);

    let mut worst: f64 = 0.0;
    let mut instances = 0;
    while instances < 100 {
        let b1 = complex_uniform(&mut rng, 1.5);
        let b2 = complex_uniform(&mut rng, 1.5);
        if (b1 * b1 + 4.0 * b2).norm() < 0.1 {
            continue;
        }
        let k = (rng.next_uniform() * 31.0) as usize;
        let alphas: Vec<Complex64> = (0..=k).map(|_| complex_uniform(&mut rng, 1.0)).collect();
        let closed = two_step_closed_form(b1, b2, &alphas, k)?;
        let direct = two_step_direct(b1, b2, &alphas, k)?;
        worst = worst.max(crel(closed, direct));
        instances += 1;
    }
    out.push(check(
        S,
        "two-step closed form vs direct (100 random instances, k<=30)",
        worst <= 1e-8,
        format!("max rel diff {worst:e}"),
    ));

    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let gamma = (i % 2) as u8;
        let beta = 0.5 + 1.5 * rng.next_uniform();
        let k = (rng.next_uniform() * 21.0) as usize;
        let alphas: Vec<Complex64> = (0..=k).map(|_| complex_uniform(&mut rng, 1.0)).collect();
        let closed = full_history_closed_form(gamma, beta, &alphas, k)?;
        let direct = full_history_direct(gamma, beta, &alphas, k)?;
        worst = worst.max(crel(closed, direct));
    }
    out.push(check(
        S,
        "full-history closed form vs direct (50 random instances, k<=20)",
        worst <= 1e-8,
        format!("max rel diff {worst:e}"),
    ));

    let alpha_grid = [0.0, 0.5, 1.0, 2.0];
    // (gamma, restrict to alpha1 = 0, label)
    let families: [(u8, Option<bool>, &str); 3] = [
        (1, None, "gamma=1"),
        (0, Some(false), "gamma=0, alpha1=0"),
        (0, Some(true), "gamma=0, alpha1>0"),
    ];
    for (gamma, linear, label) in families {
        let mut worst_ratio: f64 = 0.0;
        let mut first_violation = None;
        for beta in [1.0, 1.5, 2.0] {
            for a0 in alpha_grid {
                for a1 in alpha_grid {
                    if linear.is_some_and(|l| l != (a1 > 0.0)) {
                        continue;
                    }
                    let xs = full_history_equality_case(gamma, beta, a0, a1, 20)?;
                    for (k, x) in xs.iter().enumerate() {
                        let bound = full_history_upper_bound(gamma, beta, a0, a1, k as u32)?;
                        if *x > bound * (1.0 + 1e-12) && first_violation.is_none() {
                            first_violation = Some(format!("beta={beta} a0={a0} a1={a1} k={k}: x={x} > {bound:.6}"));
                        }
                        if bound > 0.0 {
                            worst_ratio = worst_ratio.max(x / bound);
                        }
                    }
                }
            }
        }
        out.push(check(
            S,
            format!("full-history bound dominates equality case ({label}, beta in {{1,1.5,2}}, k<=20)"),
            first_violation.is_none(),
            match first_violation {
                Some(v) => format!("max x/bound {worst_ratio:.6}; first violation {v}"),
                None => format!("max x/bound {worst_ratio:.6}"),
            },
        ));
    }

    let mut all = true;
    for beta in [1.0, 1.5, 2.0] {
        for a0 in alpha_grid {
            for a1 in alpha_grid {
                let xs = full_history_equality_case(0, beta, a0, a1, 20)?;
                for (k, x) in xs.iter().enumerate() {
                    all &= *x <= full_history_corrected_bound(0, beta, a0, a1, k as u32)? * (1.0 + 1e-12);
                }
            }
        }
    }
    out.push(check(
        S,
        "corrected bound dominates gamma=0 equality case for all alpha",
        all,
        "",
    ));

    let xs = full_history_equality_case(1, 1.0, 1.0, 1.0, 2)?;
    let bound = full_history_upper_bound(1, 1.0, 1.0, 1.0, 2)?;
    out.push(check(
        S,
        "hand value x2 = 5 at gamma=1, beta=1",
        xs[2] == 5.0 && xs[2] <= bound,
        format!("x2 = {} <= {bound:.4}", xs[2]),
    ));

    let ones = vec![Complex64::new(1.0, 0.0); 11];
    let x10 = two_step_closed_form(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), &ones, 10)?;
    out.push(check(
        S,
        "two-step cumulative sum",
        (x10.re - 11.0).abs() < 1e-12,
        format!("x10 = {x10}"),
    ));
    Ok(out)
}

fn stirling_suite() -> Result<Vec<Check>> {
    let mut all = true;
    let mut worst = f64::INFINITY;
    for n in 1..=30u64 {
        let (lo, mid, hi) = stirling_log_chain(n)?;
        all &= lo <= mid + 1e-12 && mid <= hi + 1e-12;
        worst = worst.min((mid - lo).min(hi - mid));
    }
    let (lo, mid, hi) = stirling_chain(1)?;
    Ok(vec![
        check(
            "stirling",
            "factorial chain n<=30 in log domain",
            all,
            format!("min log slack {worst:e}"),
        ),
        check(
            "stirling",
            "n=1 upper bound attained",
            mid == 1.0 && hi == 1.0 && (lo - 0.5f64.sqrt()).abs() < 1e-15,
            format!("({lo}, {mid}, {hi})"),
        ),
    ])
}

fn talk1_suite() -> Result<Vec<Check>> {
    let mut chain = true;
    let mut root = true;
    let mut failures = Vec::new();
    for m in 1..=400u32 {
        let r = talk1_chain(m as f64, 100)?;
        if !r.chain_holds || !r.attained_at_root {
            failures.push(m);
        }
        chain &= r.chain_holds;
        root &= r.attained_at_root;
    }
    Ok(vec![
        check(
            "talk1",
            "chain holds for m in 1..=400",
            chain,
            format!("failures {failures:?}"),
        ),
        check(
            "talk1",
            "maximum attained at floor or ceil of sqrt(m)",
            root,
            format!("failures {failures:?}"),
        ),
    ])
}

fn phi_suite() -> Result<Vec<Check>> {
    let report = check_phi_properties(100_000)?;
    let mut out = vec![
        check(
            "phi",
            "phi(m+1) <= 2 phi(m) and monotone for m <= 1e5",
            report.doubling_violations.is_empty() && report.monotone_violations.is_empty(),
            format!(
                "{} doubling, {} monotone violations",
                report.doubling_violations.len(),
                report.monotone_violations.len()
            ),
        ),
        check(
            "phi",
            "phi(m)^3/m decreasing over decades",
            report.ratios_decreasing,
            report
                .cubic_ratios
                .iter()
                .map(|(m, r)| format!("{m}:{r}"))
                .collect::<Vec<_>>()
                .join(" "),
        ),
    ];
    let at = |m: u64| {
        report
            .cubic_ratios
            .iter()
            .find(|(k, _)| *k == m)
            .map(|x| x.1)
            .unwrap_or(f64::NAN)
    };
    out.push(check(
        "phi",
        "phi(m)^3/m at 1e4 and 1e7",
        (at(10_000) - 0.8).abs() < 1e-12 && (at(10_000_000) - 0.016_637_5).abs() < 1e-12,
        format!("{} {}", at(10_000), at(10_000_000)),
    ));
    let mut decreasing = true;
    for p_hat in [2.0, 3.0, 4.0, 6.0] {
        let r: Vec<f64> = [100_000u64, 1_000_000, 10_000_000]
            .iter()
            .map(|&m| phi_power_ratio(m, p_hat))
            .collect::<Result<_>>()?;
        decreasing &= r[0] > r[1] && r[1] > r[2];
    }
    out.push(check(
        "phi",
        "phi(m)^(p/2)/m decreasing for p in {2,3,4,6}",
        decreasing,
        "",
    ));
    Ok(out)
}

/// Backward trapezoidal solution of `α(t) = β(t) + γ∫ₜᵀ α(s) ds` on `nodes`
/// equal intervals; returns `(t_j, α_j)` from `t = 0` to `t = T`.
pub fn gronwall_equality_solution(
    beta_fn: &dyn Fn(f64) -> f64,
    gamma: f64,
    horizon: f64,
    nodes: usize,
) -> Vec<(f64, f64)> {
    let h = horizon / nodes as f64;
    let mut alpha = vec![0.0; nodes + 1];
    alpha[nodes] = beta_fn(horizon);
    let mut integral = 0.0;
    for j in (0..nodes).rev() {
        let t = j as f64 * h;
        alpha[j] = (beta_fn(t) + gamma * (integral + 0.5 * h * alpha[j + 1])) / (1.0 - 0.5 * gamma * h);
        integral += 0.5 * h * (alpha[j] + alpha[j + 1]);
    }
    alpha.into_iter().enumerate().map(|(j, a)| (j as f64 * h, a)).collect()
}

/// Equality-case functions of the weighted Gronwall hypothesis on a uniform
/// grid over `[τ, T]`, starting from `f_0 ≡ sup_f0`; returns `f_N(τ)`.
pub fn fn_gron_equality_value(g: &GronwallInputs, nodes: usize) -> f64 {
    let h = (g.horizon - g.tau) / nodes as f64;
    let mf = g.m as f64;
    let mut levels: Vec<Vec<f64>> = vec![vec![g.sup_f0; nodes + 1]];
    // tail[i][j] = (∫_{t_j}^T f_i^p)^{1/p} by the trapezoid rule
    let tail = |f: &[f64]| {
        let mut out = vec![0.0; nodes + 1];
        let mut acc = 0.0;
        for j in (0..nodes).rev() {
            acc += 0.5 * h * (f[j].powf(g.p) + f[j + 1].powf(g.p));
            out[j] = acc.powf(1.0 / g.p);
        }
        out
    };
    let mut tails = vec![tail(&levels[0])];
    for n in 1..=g.n as usize {
        let mut f = vec![g.a / mf.powf(n as f64 / 2.0); nodes + 1];
        for (i, ti) in tails.iter().enumerate() {
            let w = g.b / mf.powf((n - i - 1) as f64 / 2.0);
            for j in 0..=nodes {
                f[j] += w * ti[j];
            }
        }
        tails.push(tail(&f));
        levels.push(f);
    }
    levels[g.n as usize][0]
}

type Profile = Arc<dyn Fn(f64) -> f64>;

fn gronwall_suite() -> Result<Vec<Check>> {
    const S: &str = "gronwall";
    let mut out = Vec::new();
    let betas: Vec<(&str, Profile)> = vec![
        ("beta=1", Arc::new(|_| 1.0)),
        ("beta=1+(1-t)^2", Arc::new(|t: f64| 1.0 + (1.0 - t).powi(2))),
        ("beta=exp(-t)", Arc::new(|t: f64| (-t).exp())),
    ];
    let mut worst: f64 = 0.0;
    for (_, beta) in &betas {
        for gamma in [0.0, 0.5, 1.0, 2.0] {
            for (t, a) in gronwall_equality_solution(beta.as_ref(), gamma, 1.0, 256) {
                let bound = gronwall_backward_bound(beta.as_ref(), gamma, 1.0, t)?;
                worst = worst.max(a / bound);
            }
        }
    }
    out.push(check(
        S,
        "backward Gronwall bound dominates 256-node equality solutions",
        worst <= 1.0 + 1e-3,
        format!("max alpha/bound {worst:.9}"),
    ));

    let mut worst: f64 = 0.0;
    let mut ordered = true;
    for m in [1u64, 2, 3, 4, 9, 10] {
        for n in 1..=6u32 {
            for p in [1.0, 2.0, 3.0] {
                for (a, b, sup_f0) in [(1.0, 1.0, 1.0), (0.5, 2.0, 0.0), (0.0, 0.7, 2.0)] {
                    for tau in [0.0, 0.5] {
                        let g = GronwallInputs {
                            a,
                            b,
                            m,
                            n,
                            p,
                            horizon: 1.0,
                            tau,
                            sup_f0,
                        };
                        let (sharp, relaxed) = fn_gron_bound(&g)?;
                        let value = fn_gron_equality_value(&g, 256);
                        if sharp > 0.0 {
                            worst = worst.max(value / sharp);
                        } else if value > 0.0 {
                            worst = f64::INFINITY;
                        }
                        ordered &= sharp <= relaxed * (1.0 + 1e-12);
                    }
                }
            }
        }
    }
    out.push(check(
        S,
        "weighted Gronwall bound dominates 256-node equality solutions",
        worst <= 1.0 + 1e-3,
        format!("max f_N/sharp {worst:.9}"),
    ));

    for m in 1..=10u64 {
        for n in 1..=10u32 {
            for p in [2.0, 3.0, 4.0] {
                let g = GronwallInputs {
                    a: 1.0,
                    b: 1.0,
                    m,
                    n,
                    p,
                    horizon: 1.0,
                    tau: 0.0,
                    sup_f0: 1.0,
                };
                let (sharp, relaxed) = fn_gron_bound(&g)?;
                ordered &= sharp <= relaxed * (1.0 + 1e-12);
            }
        }
    }
    out.push(check(S, "sharp <= relaxed over M,N <= 10, p in {2,3,4}", ordered, ""));
    Ok(out)
}

fn cost_suite() -> Result<Vec<Check>> {
    const S: &str = "cost";
    let mut identity = true;
    let mut dominated = true;
    let mut mismatches = Vec::new();
    for d in [1usize, 5] {
        let p = builtin("flat-ode", d, 1.0)?;
        let x = vec![0.0; d];
        for n in 0..=5u32 {
            for base in 1..=3u64 {
                let predicted = predicted_cost(n, base, d)?;
                let run = estimate(
                    &p,
                    &MlpParams::raw(n, base),
                    0.0,
                    &x,
                    &StreamKey::root(n as u64 * 7 + base),
                )?;
                if run.ledger != predicted {
                    identity = false;
                    mismatches.push((n, base, d));
                }
                let rec = cost_recursion_bound(n, base, (d + 2) as f64)?;
                dominated &= (predicted.total() as f64) <= rec.recursion && rec.recursion <= rec.closed * (1.0 + 1e-12);
            }
        }
    }
    Ok(vec![
        check(
            S,
            "instrumented ledger equals predicted cost (n<=5, base<=3, d in {1,5})",
            identity,
            format!("mismatches {mismatches:?}"),
        ),
        check(
            S,
            "predicted <= cost recursion <= (d+2)(1+sqrt2)^n base^n",
            dominated,
            "",
        ),
    ])
}

fn exactness_suite() -> Result<Vec<Check>> {
    const S: &str = "exactness";
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for d in [1usize, 5, 20] {
        let p = builtin("constant-source", d, 1.0)?;
        let x = vec![0.0; d];
        for n in 1..=3u32 {
            for params in [MlpParams::raw(n, 2), MlpParams::scheduled(n, 3)] {
                for seed in 0..4 {
                    let r = estimate(&p, &params, 0.0, &x, &StreamKey::root(seed))?;
                    worst = worst.max((r.value - 1.0).abs());
                }
            }
        }
    }
    out.push(check(
        S,
        "constant source gives T - t",
        worst <= 1e-12,
        format!("max deviation {worst:e}"),
    ));

    let mut worst: f64 = 0.0;
    for c in [0.0, 1.5, -3.25] {
        let mut p = builtin("heat-quadratic", 3, 1.0)?;
        p.g = Arc::new(move |_| c);
        for n in 1..=3u32 {
            let r = estimate(
                &p,
                &MlpParams::raw(n, 2),
                0.3,
                &[0.5, -0.2, 1.0],
                &StreamKey::root(n as u64),
            )?;
            worst = worst.max((r.value - c).abs());
        }
    }
    out.push(check(
        S,
        "zero nonlinearity with constant datum gives the constant",
        worst == 0.0,
        format!("max deviation {worst:e}"),
    ));

    let mut worst: f64 = 0.0;
    for name in ["heat-quadratic", "flat-ode", "linear-reaction"] {
        let p = builtin(name, 4, 1.0)?;
        let x = [0.3, -1.2, 0.8, 2.0];
        for n in 1..=3u32 {
            let r = estimate(&p, &MlpParams::raw(n, 2), 1.0, &x, &StreamKey::root(11))?;
            worst = worst.max(rel_diff(r.value, (p.g)(&x)));
        }
    }
    out.push(check(
        S,
        "at the horizon the estimate equals the datum",
        worst == 0.0,
        format!("max deviation {worst:e}"),
    ));
    Ok(out)
}
