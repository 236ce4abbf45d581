//! Experiment harness: empirical L^p errors against exact references,
//! convergence sweeps along the depth, complexity sweeps along the tolerance,
//! and CSV output.

use std::io::Write;
use std::time::Instant;

use crate::bounds::{mlp_error_bound, BoundInputs};
use crate::engine::{predicted_cost, replicate, BaseMode, CostLedger, MlpParams};
use crate::error::{MlpError, Result};
use crate::model::{reference_value, ProblemSpec};
use crate::numeric::{compensated_sum, MeanAccumulator};
use crate::schedule::{choose_n, kp_constant, phi, ComplexityQuery};

/// Empirical error of one configuration against the exact reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub reps: usize,
    pub p_hat: f64,
    pub mean: f64,
    pub empirical_lp: f64,
    pub reference: f64,
    pub bound_relaxed: f64,
    pub bound_sharp: f64,
    /// `empirical_lp ≤ bound_relaxed`.
    pub pass: bool,
    pub ledger: CostLedger,
    pub wall_ms: f64,
}

/// One line of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub problem: String,
    pub d: usize,
    pub horizon: f64,
    pub form: String,
    pub n: u32,
    pub base_mode: BaseMode,
    pub base: u64,
    pub p_hat: f64,
    pub reps: usize,
    pub t: f64,
    pub empirical_lp: f64,
    pub bound_relaxed: f64,
    pub bound_sharp: f64,
    pub ledger: CostLedger,
    pub wall_ms: f64,
}

pub const CSV_HEADER: [&str; 19] = [
    "problem",
    "d",
    "T",
    "form",
    "n",
    "base_mode",
    "base",
    "p_hat",
    "reps",
    "t",
    "empirical_lp",
    "bound_relaxed",
    "bound_sharp",
    "cost_f",
    "cost_g",
    "cost_uniform",
    "cost_gaussian",
    "cost_total",
    "wall_ms",
];

/// `(mean |vᵢ − ref|^p̂)^{1/p̂}` with compensated summation.
pub fn empirical_lp_error(values: &[f64], reference: f64, p_hat: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(MlpError::EmptyInput);
    }
    if !(p_hat >= 1.0) {
        return Err(MlpError::OrderBelowOne(p_hat));
    }
    let sum = compensated_sum(values.iter().map(|v| (v - reference).abs().powf(p_hat)));
    Ok((sum / values.len() as f64).powf(1.0 / p_hat))
}

/// Bound inputs for a problem, depth and base at point `x`. Problems whose
/// growth exponent is 0 use the exact moment `‖1 + ‖·‖⁰‖_p̂ = 2`.
pub fn bound_inputs(problem: &ProblemSpec, n: u32, base: u64, p_hat: f64, x: &[f64]) -> Result<BoundInputs> {
    let lp = kp_constant(p_hat)?;
    Ok(BoundInputs {
        lipschitz: problem.lipschitz,
        frak_l: problem.frak_l,
        horizon: problem.horizon,
        growth_p: problem.growth_p,
        growth_q: problem.growth_q,
        p_hat,
        frak_m: lp.frak_m,
        d: problem.d,
        x_norm: problem.scaled_norm(x),
        n,
        base,
        exact_moment: (problem.growth_q == 0.0).then_some(2.0),
        ..BoundInputs::default()
    })
}

/// Replicate the estimator and compare against the reference.
pub fn error_report(
    problem: &ProblemSpec,
    params: &MlpParams,
    t: f64,
    x: &[f64],
    reps: usize,
    root_seed: u64,
) -> Result<ErrorReport> {
    let reference = reference_value(problem, t, x)?;
    let base = params.base()?;
    let (bound_sharp, bound_relaxed) = mlp_error_bound(&bound_inputs(problem, params.n, base, params.p_hat, x)?)?;
    let start = Instant::now();
    let runs = replicate(problem, params, t, x, reps, root_seed)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let empirical_lp = empirical_lp_error(&values, reference, params.p_hat)?;
    let mut mean = MeanAccumulator::new();
    values.iter().for_each(|v| mean.add(*v));
    Ok(ErrorReport {
        reps,
        p_hat: params.p_hat,
        mean: mean.mean(),
        empirical_lp,
        reference,
        bound_relaxed,
        bound_sharp,
        pass: empirical_lp <= bound_relaxed,
        ledger: runs[0].ledger,
        wall_ms,
    })
}

fn row(problem: &ProblemSpec, params: &MlpParams, t: f64, report: &ErrorReport) -> Result<StudyRow> {
    Ok(StudyRow {
        problem: problem.name.clone(),
        d: problem.d,
        horizon: problem.horizon,
        form: problem.form.as_str().to_string(),
        n: params.n,
        base_mode: params.base_mode,
        base: params.base()?,
        p_hat: params.p_hat,
        reps: report.reps,
        t,
        empirical_lp: report.empirical_lp,
        bound_relaxed: report.bound_relaxed,
        bound_sharp: report.bound_sharp,
        ledger: report.ledger,
        wall_ms: report.wall_ms,
    })
}

/// Settings of a depth sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceConfig {
    pub n_list: Vec<u32>,
    pub base_mode: BaseMode,
    /// Fixed `m` for every row; `None` runs the diagonal `m = n`.
    pub m: Option<u64>,
    pub p_hat: f64,
    pub reps: usize,
    pub root_seed: u64,
    pub t: f64,
    pub x: Vec<f64>,
}

/// One row per depth in `n_list`.
pub fn convergence_study(problem: &ProblemSpec, cfg: &ConvergenceConfig) -> Result<Vec<StudyRow>> {
    cfg.n_list
        .iter()
        .map(|&n| {
            let params = MlpParams {
                n,
                base_mode: cfg.base_mode,
                m: cfg.m.unwrap_or(n as u64),
                p_hat: cfg.p_hat,
            };
            let report = error_report(problem, &params, cfg.t, &cfg.x, cfg.reps, cfg.root_seed)?;
            let r = row(problem, &params, cfg.t, &report)?;
            debug_assert_eq!(r.ledger, predicted_cost(n, r.base, problem.d)?);
            Ok(r)
        })
        .collect()
}

/// Settings of a tolerance sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityConfig {
    pub eps_list: Vec<f64>,
    pub delta: f64,
    pub p_hat: f64,
    pub reps: usize,
    pub root_seed: u64,
    /// Replaces the problem's selector constant `L`.
    pub selector_lipschitz: Option<f64>,
    /// Refuse depths whose single-realization cost exceeds this.
    pub cost_budget: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityRow {
    pub eps: f64,
    pub row: StudyRow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityStudy {
    pub rows: Vec<ComplexityRow>,
    /// Least-squares slope of `ln cost` against `ln(1/ε)`.
    pub slope: Option<f64>,
}

/// Selector query for a problem at tolerance `eps`, in the single-constant
/// growth form with standard Brownian coordinates.
pub fn complexity_query(
    problem: &ProblemSpec,
    eps: f64,
    delta: f64,
    p_hat: f64,
    lipschitz: Option<f64>,
) -> Result<ComplexityQuery> {
    Ok(ComplexityQuery {
        d: problem.d,
        eps,
        delta,
        lp: kp_constant(p_hat)?,
        lipschitz: lipschitz.unwrap_or_else(|| problem.selector_constant()),
        growth_p: problem.growth_p,
        growth_q: problem.growth_q,
        horizon: problem.horizon,
    })
}

/// For each tolerance: select the depth, run `U_{n,n}` with base `φ(n)` at
/// `(0, 0)`, and record cost and error.
pub fn complexity_study(problem: &ProblemSpec, cfg: &ComplexityConfig) -> Result<ComplexityStudy> {
    if cfg.eps_list.is_empty() {
        return Err(MlpError::EmptyInput);
    }
    let x = vec![0.0; problem.d];
    let mut rows = Vec::with_capacity(cfg.eps_list.len());
    for &eps in &cfg.eps_list {
        let q = complexity_query(problem, eps, cfg.delta, cfg.p_hat, cfg.selector_lipschitz)?;
        let n = choose_n(&q)?;
        if let Some(budget) = cfg.cost_budget {
            let base = phi(n as u64)?;
            let predicted = predicted_cost(n, base, problem.d)?.total();
            if predicted > budget {
                return Err(MlpError::CostBudget { n, predicted, budget });
            }
        }
        let params = MlpParams {
            n,
            base_mode: BaseMode::Scheduled,
            m: n as u64,
            p_hat: cfg.p_hat,
        };
        let report = error_report(problem, &params, 0.0, &x, cfg.reps, cfg.root_seed)?;
        rows.push(ComplexityRow {
            eps,
            row: row(problem, &params, 0.0, &report)?,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((1.0 / r.eps).ln(), (r.row.ledger.total() as f64).ln()))
        .collect();
    Ok(ComplexityStudy {
        slope: fit_slope(&points),
        rows,
    })
}

/// Ordinary least-squares slope; `None` without two distinct abscissae.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Write rows with the fixed header. Floats use shortest round-trip decimals.
pub fn write_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let csv_err = |e: csv::Error| MlpError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.d.to_string(),
            r.horizon.to_string(),
            r.form.clone(),
            r.n.to_string(),
            r.base_mode.as_str().to_string(),
            r.base.to_string(),
            r.p_hat.to_string(),
            r.reps.to_string(),
            r.t.to_string(),
            r.empirical_lp.to_string(),
            r.bound_relaxed.to_string(),
            r.bound_sharp.to_string(),
            r.ledger.f_evals.to_string(),
            r.ledger.g_evals.to_string(),
            r.ledger.uniform_draws.to_string(),
            r.ledger.gaussian_scalar_draws.to_string(),
            r.ledger.total().to_string(),
            r.wall_ms.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| MlpError::Csv(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;

    #[test]
    fn lp_error_examples() {
        assert_eq!(empirical_lp_error(&[3.0, 3.0], 3.0, 2.0), Ok(0.0));
        assert_eq!(empirical_lp_error(&[0.0, 2.0], 1.0, 2.0), Ok(1.0));
        assert_eq!(empirical_lp_error(&[0.0, 2.0], 1.0, 4.0), Ok(1.0));
        assert_eq!(empirical_lp_error(&[], 1.0, 2.0), Err(MlpError::EmptyInput));
    }

    #[test]
    fn slope_of_a_line() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
        assert!((fit_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_slope(&pts[..1]), None);
        assert_eq!(fit_slope(&[(1.0, 1.0), (1.0, 2.0)]), None);
    }

    fn config(n_list: Vec<u32>, reps: usize, d: usize) -> ConvergenceConfig {
        ConvergenceConfig {
            n_list,
            base_mode: BaseMode::Scheduled,
            m: None,
            p_hat: 2.0,
            reps,
            root_seed: 1,
            t: 0.0,
            x: vec![0.0; d],
        }
    }

    #[test]
    fn constant_source_rows_are_exact() {
        let p = builtin("constant-source", 3, 1.0).unwrap();
        let rows = convergence_study(&p, &config(vec![1, 2, 3], 20, 3)).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert_eq!(r.empirical_lp, 0.0);
            assert_eq!(r.ledger, predicted_cost(r.n, r.base, 3).unwrap());
        }
    }

    #[test]
    fn heat_rows_improve_and_stay_below_bound() {
        let p = builtin("heat-quadratic", 10, 1.0).unwrap();
        let rows = convergence_study(&p, &config(vec![2, 5], 500, 10)).unwrap();
        assert!(rows[1].empirical_lp < rows[0].empirical_lp);
        assert!(rows.iter().all(|r| r.empirical_lp <= r.bound_relaxed));
        assert!(rows.iter().all(|r| r.bound_sharp <= r.bound_relaxed));
    }

    #[test]
    fn csv_layout() {
        let p = builtin("constant-source", 1, 1.0).unwrap();
        let rows = convergence_study(&p, &config(vec![1], 2, 1)).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 19);
        assert_eq!(
            &fields[..10],
            &["constant-source", "1", "1", "terminal", "1", "phi", "1", "2", "2", "0"]
        );
        assert_eq!(fields[10], "0");
    }

    #[test]
    fn complexity_with_small_selector_constant() {
        // with L = 0.01 the bound is ≈ 2.77η at n = 1, 2.42η at n = 4 and 1.42η at n = 5
        let p = builtin("heat-quadratic", 5, 1.0).unwrap();
        let eta = complexity_query(&p, 1.0, 0.5, 2.0, Some(0.01)).unwrap().eta();
        let cfg = ComplexityConfig {
            eps_list: vec![3.0 * eta, 2.5 * eta, 1.5 * eta],
            delta: 0.5,
            p_hat: 2.0,
            reps: 4,
            root_seed: 3,
            selector_lipschitz: Some(0.01),
            cost_budget: None,
        };
        let study = complexity_study(&p, &cfg).unwrap();
        let ns: Vec<u32> = study.rows.iter().map(|r| r.row.n).collect();
        assert_eq!(ns, vec![1, 4, 5]);
        let costs: Vec<u64> = study.rows.iter().map(|r| r.row.ledger.total()).collect();
        assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{costs:?}");
        assert!(study.slope.unwrap() > 0.0);
    }

    #[test]
    fn complexity_with_problem_constants_hits_cap() {
        let p = builtin("heat-quadratic", 5, 1.0).unwrap();
        let cfg = ComplexityConfig {
            eps_list: vec![10.0],
            delta: 0.5,
            p_hat: 2.0,
            reps: 10,
            root_seed: 3,
            selector_lipschitz: None,
            cost_budget: None,
        };
        assert!(matches!(complexity_study(&p, &cfg), Err(MlpError::SelectorCap { .. })));
    }

    #[test]
    fn complexity_budget_refuses_large_trees() {
        let p = crate::model::builtin("heat-quadratic", 5, 1.0).unwrap();
        let eta = complexity_query(&p, 1.0, 0.5, 2.0, Some(0.01)).unwrap().eta();
        let cfg = ComplexityConfig {
            eps_list: vec![1.5 * eta],
            delta: 0.5,
            p_hat: 2.0,
            reps: 1,
            root_seed: 0,
            selector_lipschitz: Some(0.01),
            cost_budget: Some(1_000),
        };
        assert!(matches!(
            complexity_study(&p, &cfg),
            Err(MlpError::CostBudget {
                n: 5,
                budget: 1_000,
                ..
            })
        ));
    }
}
