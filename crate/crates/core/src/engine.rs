//! The full-history recursive multilevel Picard estimator with exact cost
//! accounting.
//!
//! For depth `n`, base `b`, horizon `T` and diffusion scale `s` the estimator
//! at `(t, x)` with index `θ` is
//!
//! ```text
//! U_n(t,x) = 1{n≥1}/bⁿ Σ_{k=1}^{bⁿ} g(x + s√(T−t) Z^{(θ,0,−k)})
//!          + Σ_{i=0}^{n−1} (T−t)/b^{n−i} Σ_{k=1}^{b^{n−i}}
//!              [ f(𝒰, Y, U_i^{(θ,i,k)}(𝒰,Y)) − 1{i≥1} f(𝒰, Y, U_{i−1}^{(θ,−i,k)}(𝒰,Y)) ]
//! ```
//!
//! where `𝒰 = t + (T−t)u` and `Y = x + s√((T−t)u) Z` are drawn once from the
//! stream of `(θ,i,k)` and shared by both recursive evaluations. Every child
//! samples its Brownian point at a single time, so the simulation is exact.

use rayon::prelude::*;

use crate::error::{MlpError, Result};
use crate::model::ProblemSpec;
use crate::numeric::{CompensatedSum, MeanAccumulator};
use crate::schedule::phi;
use crate::stream::{derive_stream, StreamKey};

/// How the sample base is obtained from `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseMode {
    /// Base `m`.
    Raw,
    /// Base `φ(m)`.
    Scheduled,
}

impl BaseMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaseMode::Raw => "raw",
            BaseMode::Scheduled => "phi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlpParams {
    pub n: u32,
    pub base_mode: BaseMode,
    pub m: u64,
    pub p_hat: f64,
}

impl MlpParams {
    pub fn raw(n: u32, m: u64) -> Self {
        Self {
            n,
            base_mode: BaseMode::Raw,
            m,
            p_hat: 2.0,
        }
    }

    pub fn scheduled(n: u32, m: u64) -> Self {
        Self {
            n,
            base_mode: BaseMode::Scheduled,
            m,
            p_hat: 2.0,
        }
    }

    /// Effective sample base.
    pub fn base(&self) -> Result<u64> {
        match self.base_mode {
            BaseMode::Raw if self.m == 0 => Err(MlpError::InvalidParameter("base must be at least 1".into())),
            BaseMode::Raw => Ok(self.m),
            BaseMode::Scheduled => phi(self.m),
        }
    }
}

/// Exact counts for one realization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CostLedger {
    pub f_evals: u64,
    pub g_evals: u64,
    pub uniform_draws: u64,
    pub gaussian_scalar_draws: u64,
}

impl CostLedger {
    pub fn total(&self) -> u64 {
        self.f_evals + self.g_evals + self.uniform_draws + self.gaussian_scalar_draws
    }

    pub fn checked_add(&self, other: &CostLedger) -> Option<CostLedger> {
        Some(CostLedger {
            f_evals: self.f_evals.checked_add(other.f_evals)?,
            g_evals: self.g_evals.checked_add(other.g_evals)?,
            uniform_draws: self.uniform_draws.checked_add(other.uniform_draws)?,
            gaussian_scalar_draws: self.gaussian_scalar_draws.checked_add(other.gaussian_scalar_draws)?,
        })
    }

    fn checked_scale(&self, k: u64) -> Option<CostLedger> {
        Some(CostLedger {
            f_evals: self.f_evals.checked_mul(k)?,
            g_evals: self.g_evals.checked_mul(k)?,
            uniform_draws: self.uniform_draws.checked_mul(k)?,
            gaussian_scalar_draws: self.gaussian_scalar_draws.checked_mul(k)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub value: f64,
    pub ledger: CostLedger,
    pub key: StreamKey,
}

const TREE_LIMIT: u64 = 1 << 63;

fn check_tree(base: u64, n: u32) -> Result<()> {
    match base.checked_pow(n) {
        Some(v) if v <= TREE_LIMIT => Ok(()),
        _ => Err(MlpError::TreeTooLarge { base, n }),
    }
}

struct Evaluator<'a> {
    problem: &'a ProblemSpec,
    root_seed: u64,
    powers: Vec<u64>,
    ledger: CostLedger,
}

impl Evaluator<'_> {
    fn eval(&mut self, n: u32, t: f64, x: &[f64], path: &mut Vec<i64>) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let p = self.problem;
        let d = p.d;
        let tau = p.horizon - t;
        let mut z = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut total = CompensatedSum::new();

        let spread = p.diffusion_scale * tau.sqrt();
        let mut g_mean = MeanAccumulator::new();
        for k in 1..=self.powers[n as usize] {
            path.extend_from_slice(&[0, -(k as i64)]);
            let mut s = derive_stream(self.root_seed, path);
            path.truncate(path.len() - 2);
            s.fill_gaussian(&mut z).expect("dimension checked");
            for j in 0..d {
                y[j] = x[j] + spread * z[j];
            }
            g_mean.add((p.g)(&y));
        }
        self.ledger.g_evals += self.powers[n as usize];
        self.ledger.gaussian_scalar_draws += self.powers[n as usize] * d as u64;
        total.add(g_mean.mean());

        for i in 0..n {
            let count = self.powers[(n - i) as usize];
            let mut level = MeanAccumulator::new();
            for k in 1..=count {
                path.extend_from_slice(&[i as i64, k as i64]);
                let mut s = derive_stream(self.root_seed, path);
                let u = s.next_uniform();
                s.fill_gaussian(&mut z).expect("dimension checked");
                let r = t + tau * u;
                let step = p.diffusion_scale * (tau * u).sqrt();
                for j in 0..d {
                    y[j] = x[j] + step * z[j];
                }
                let upper = self.eval(i, r, &y, path);
                path.truncate(path.len() - 2);
                let mut diff = (p.f)(r, &y, upper);
                self.ledger.f_evals += 1;
                if i >= 1 {
                    path.extend_from_slice(&[-(i as i64), k as i64]);
                    let lower = self.eval(i - 1, r, &y, path);
                    path.truncate(path.len() - 2);
                    diff -= (p.f)(r, &y, lower);
                    self.ledger.f_evals += 1;
                }
                level.add(diff);
            }
            self.ledger.uniform_draws += count;
            self.ledger.gaussian_scalar_draws += count * d as u64;
            total.add(tau * level.mean());
        }
        total.value()
    }
}

/// One realization of `U_n(t, x)` keyed by `key`. `t` is in the problem's form.
pub fn estimate(p: &ProblemSpec, params: &MlpParams, t: f64, x: &[f64], key: &StreamKey) -> Result<Realization> {
    if p.d == 0 {
        return Err(MlpError::EmptyDimension);
    }
    p.check_point(x)?;
    let tt = p.terminal_time(t)?;
    let base = params.base()?;
    check_tree(base, params.n)?;
    let powers: Vec<u64> = (0..=params.n).map(|k| base.pow(k)).collect();
    let mut ev = Evaluator {
        problem: p,
        root_seed: key.root_seed,
        powers,
        ledger: CostLedger::default(),
    };
    let mut path = key.path.clone();
    let value = ev.eval(params.n, tt, x, &mut path);
    Ok(Realization {
        value,
        ledger: ev.ledger,
        key: key.clone(),
    })
}

/// The ledger every realization with these parameters produces:
/// `C₀ = 0`, `C_n = bⁿ(g:1, gauss:d) + Σ_{i<n} b^{n−i}(uniform:1, gauss:d, f:1 + C_i, [i≥1] f:1 + C_{i−1})`.
pub fn predicted_cost(n: u32, base: u64, d: usize) -> Result<CostLedger> {
    if base == 0 {
        return Err(MlpError::InvalidParameter("base must be at least 1".into()));
    }
    let overflow = || MlpError::Overflow("predicted cost");
    let d = d as u64;
    let mut costs: Vec<CostLedger> = vec![CostLedger::default()];
    for level in 1..=n {
        let bn = base.checked_pow(level).ok_or_else(overflow)?;
        let mut c = CostLedger {
            g_evals: bn,
            gaussian_scalar_draws: bn.checked_mul(d).ok_or_else(overflow)?,
            ..CostLedger::default()
        };
        for i in 0..level {
            let mut child = CostLedger {
                f_evals: 1,
                uniform_draws: 1,
                gaussian_scalar_draws: d,
                g_evals: 0,
            }
            .checked_add(&costs[i as usize])
            .ok_or_else(overflow)?;
            if i >= 1 {
                child = child
                    .checked_add(&CostLedger {
                        f_evals: 1,
                        ..CostLedger::default()
                    })
                    .and_then(|c| c.checked_add(&costs[i as usize - 1]))
                    .ok_or_else(overflow)?;
            }
            let k = base.checked_pow(level - i).ok_or_else(overflow)?;
            c = c
                .checked_add(&child.checked_scale(k).ok_or_else(overflow)?)
                .ok_or_else(overflow)?;
        }
        c.total_checked().ok_or_else(overflow)?;
        costs.push(c);
    }
    Ok(costs[n as usize])
}

impl CostLedger {
    fn total_checked(&self) -> Option<u64> {
        self.f_evals
            .checked_add(self.g_evals)?
            .checked_add(self.uniform_draws)?
            .checked_add(self.gaussian_scalar_draws)
    }
}

/// `reps` independent realizations keyed `(root_seed, (rep,))`, evaluated in
/// parallel and returned in replication order.
pub fn replicate(
    p: &ProblemSpec,
    params: &MlpParams,
    t: f64,
    x: &[f64],
    reps: usize,
    root_seed: u64,
) -> Result<Vec<Realization>> {
    if reps == 0 {
        return Err(MlpError::InvalidParameter("reps must be at least 1".into()));
    }
    p.check_point(x)?;
    p.terminal_time(t)?;
    check_tree(params.base()?, params.n)?;
    (0..reps)
        .into_par_iter()
        .map(|r| estimate(p, params, t, x, &StreamKey::new(root_seed, vec![r as i64])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;
    use std::sync::Arc;

    fn key(seed: u64) -> StreamKey {
        StreamKey::root(seed)
    }

    #[test]
    fn depth_zero_is_free() {
        let p = builtin("heat-quadratic", 10, 1.0).unwrap();
        let r = estimate(&p, &MlpParams::raw(0, 2), 0.0, &[0.0; 10], &key(3)).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.ledger, CostLedger::default());
    }

    #[test]
    fn constant_source_is_exact() {
        let p = builtin("constant-source", 3, 1.0).unwrap();
        for seed in 0..5 {
            let r = estimate(&p, &MlpParams::raw(2, 3), 0.0, &[0.0; 3], &key(seed)).unwrap();
            assert_eq!(r.value, 1.0);
        }
    }

    #[test]
    fn constant_datum_is_exact() {
        let mut p = builtin("heat-quadratic", 2, 1.0).unwrap();
        p.g = Arc::new(|_| 0.37);
        for n in 1..4 {
            let r = estimate(&p, &MlpParams::raw(n, 2), 0.2, &[0.5, -1.0], &key(n as u64)).unwrap();
            assert_eq!(r.value, 0.37);
        }
    }

    #[test]
    fn horizon_returns_datum() {
        let p = builtin("flat-ode", 2, 1.0).unwrap();
        let r = estimate(&p, &MlpParams::raw(3, 2), 1.0, &[0.1, 0.2], &key(1)).unwrap();
        assert_eq!(r.value, 1.0);
        let p = builtin("heat-quadratic", 2, 1.0).unwrap();
        let r = estimate(&p, &MlpParams::raw(2, 2), 1.0, &[1.0, 1.0], &key(1)).unwrap();
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn predicted_cost_examples() {
        assert_eq!(
            predicted_cost(1, 3, 2),
            Ok(CostLedger {
                f_evals: 3,
                g_evals: 3,
                uniform_draws: 3,
                gaussian_scalar_draws: 12
            })
        );
        assert_eq!(predicted_cost(1, 3, 2).unwrap().total(), 21);
        assert_eq!(predicted_cost(0, 5, 7), Ok(CostLedger::default()));
    }

    #[test]
    fn predicted_cost_matches_instrumentation_small() {
        // n = 2, base 2, d = 1 by hand: C1 = (f2, g2, u2, gauss4),
        // C2 = 4 g-children + 4 level-0 children + 2 level-1 children each
        // carrying C1 plus two f-evaluations.
        let hand = CostLedger {
            f_evals: 4 + 2 * (2 + 2),
            g_evals: 4 + 2 * 2,
            uniform_draws: 4 + 2 + 2 * 2,
            gaussian_scalar_draws: 4 + 4 + 2 + 2 * 4,
        };
        assert_eq!(predicted_cost(2, 2, 1), Ok(hand));
        let p = builtin("flat-ode", 1, 1.0).unwrap();
        let r = estimate(&p, &MlpParams::raw(2, 2), 0.0, &[0.0], &key(0)).unwrap();
        assert_eq!(r.ledger, hand);
    }

    #[test]
    fn tree_guard() {
        let p = builtin("heat-quadratic", 1, 1.0).unwrap();
        let err = estimate(&p, &MlpParams::raw(64, 2), 0.0, &[0.0], &key(0)).unwrap_err();
        assert_eq!(err, MlpError::TreeTooLarge { base: 2, n: 64 });
        assert!(predicted_cost(40, 3, 1).is_err());
    }

    #[test]
    fn argument_checks() {
        let p = builtin("heat-quadratic", 2, 1.0).unwrap();
        assert!(matches!(
            estimate(&p, &MlpParams::raw(1, 2), 1.5, &[0.0, 0.0], &key(0)),
            Err(MlpError::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            estimate(&p, &MlpParams::raw(1, 2), -0.1, &[0.0, 0.0], &key(0)),
            Err(MlpError::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            estimate(&p, &MlpParams::raw(1, 2), 0.0, &[0.0], &key(0)),
            Err(MlpError::DimensionMismatch { .. })
        ));
        assert!(replicate(&p, &MlpParams::raw(1, 2), 0.0, &[0.0, 0.0], 0, 0).is_err());
    }

    #[test]
    fn scheduled_base() {
        assert_eq!(MlpParams::scheduled(3, 5).base(), Ok(3));
        assert_eq!(MlpParams::scheduled(3, 0).base(), Err(MlpError::ScheduleUndefined));
        assert!(MlpParams::raw(3, 0).base().is_err());
    }

    #[test]
    fn replicate_is_deterministic() {
        let p = builtin("heat-quadratic", 3, 1.0).unwrap();
        let a = replicate(&p, &MlpParams::raw(2, 2), 0.0, &[0.0; 3], 2, 9).unwrap();
        let b = replicate(&p, &MlpParams::raw(2, 2), 0.0, &[0.0; 3], 2, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].value, a[1].value);
        assert_eq!(a[1].key, StreamKey::new(9, vec![1]));
    }

    #[test]
    fn replicate_constant_source() {
        let p = builtin("constant-source", 2, 1.0).unwrap();
        let rs = replicate(&p, &MlpParams::raw(2, 2), 0.25, &[0.0; 2], 20, 4).unwrap();
        assert!(rs.iter().all(|r| r.value == 0.75));
    }

    #[test]
    fn heat_quadratic_mean_matches_reference() {
        let p = builtin("heat-quadratic", 10, 1.0).unwrap();
        let rs = replicate(&p, &MlpParams::raw(2, 2), 0.0, &[0.0; 10], 1000, 17).unwrap();
        let n = rs.len() as f64;
        let mean = rs.iter().map(|r| r.value).sum::<f64>() / n;
        let var = rs.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 20.0).abs() <= 5.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn initial_form_matches_reversed_terminal() {
        let p = builtin("flat-ode", 2, 1.0).unwrap();
        let q = p.clone().with_form(crate::model::Form::Initial);
        let a = estimate(&p, &MlpParams::raw(2, 2), 0.3, &[0.0; 2], &key(5)).unwrap();
        let b = estimate(&q, &MlpParams::raw(2, 2), 0.7, &[0.0; 2], &key(5)).unwrap();
        assert_eq!(a.value, b.value);
    }
}
