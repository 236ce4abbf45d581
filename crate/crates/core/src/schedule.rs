//! Sample-count schedule `φ(m) = ⌊exp(√ln m)⌋`, the L^p Monte Carlo
//! constants, and the iteration-depth selector `n(d, ε)`.

use crate::bounds::{eta_constant, BoundInputs};
use crate::error::{MlpError, Result};

/// Largest depth the selector scans before giving up.
pub const SELECTOR_CAP: u32 = 64;

/// `⌊exp(√ln m)⌋` for `m ≥ 1`.
///
/// The floating estimate is corrected against the exact characterisation
/// `φ(m) ≥ k ⟺ (ln k)² ≤ ln m`, so values sitting next to an integer boundary
/// are decided by a comparison rather than by rounding inside `exp`.
pub fn phi(m: u64) -> Result<u64> {
    if m == 0 {
        return Err(MlpError::ScheduleUndefined);
    }
    let ln_m = (m as f64).ln();
    let reached = |k: u64| {
        let ln_k = (k as f64).ln();
        ln_k * ln_k <= ln_m
    };
    let mut k = (ln_m.sqrt().exp().floor() as u64).max(1);
    while reached(k + 1) {
        k += 1;
    }
    while k > 1 && !reached(k) {
        k -= 1;
    }
    Ok(k)
}

/// `φ(m)^{p̂/2} / m`, the quantity that must vanish along the schedule.
pub fn phi_power_ratio(m: u64, p_hat: f64) -> Result<f64> {
    Ok((phi(m)? as f64).powf(p_hat / 2.0) / m as f64)
}

/// Outcome of the schedule property scan.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiReport {
    pub m_max: u64,
    /// `m` with `φ(m+1) > 2φ(m)`.
    pub doubling_violations: Vec<u64>,
    /// `m` with `φ(m+1) < φ(m)`.
    pub monotone_violations: Vec<u64>,
    /// `(m, φ(m)³/m)` for `m = 10³, …, 10⁷`.
    pub cubic_ratios: Vec<(u64, f64)>,
    pub ratios_decreasing: bool,
}

impl PhiReport {
    pub fn pass(&self) -> bool {
        self.doubling_violations.is_empty() && self.monotone_violations.is_empty() && self.ratios_decreasing
    }
}

/// Exhaustively check doubling and monotonicity up to `m_max`, and record the
/// decay of `φ(m)³/m` over decades.
pub fn check_phi_properties(m_max: u64) -> Result<PhiReport> {
    if m_max < 2 {
        return Err(MlpError::InvalidParameter(format!(
            "m_max must be at least 2, got {m_max}"
        )));
    }
    let mut doubling_violations = Vec::new();
    let mut monotone_violations = Vec::new();
    let mut prev = phi(1)?;
    for m in 1..m_max {
        let next = phi(m + 1)?;
        if next > 2 * prev {
            doubling_violations.push(m);
        }
        if next < prev {
            monotone_violations.push(m);
        }
        prev = next;
    }
    let cubic_ratios = (3..=7)
        .map(|e| {
            let m = 10u64.pow(e);
            phi_power_ratio(m, 6.0).map(|r| (m, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios_decreasing = cubic_ratios.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(PhiReport {
        m_max,
        doubling_violations,
        monotone_violations,
        cubic_ratios,
        ratios_decreasing,
    })
}

/// L^p Monte Carlo constants: order `p_hat`, centering constant `kp` and
/// `frak_m = kp·√(p_hat − 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpConstants {
    pub p_hat: f64,
    pub kp: f64,
    pub frak_m: f64,
}

impl LpConstants {
    /// Constants with an explicit centering constant `kp ≥ 1`.
    pub fn with_kp(p_hat: f64, kp: f64) -> Result<Self> {
        if !(p_hat >= 2.0) {
            return Err(MlpError::OrderBelowTwo(p_hat));
        }
        if !(kp >= 1.0) || !kp.is_finite() {
            return Err(MlpError::InvalidParameter(format!(
                "centering constant must be finite and at least 1, got {kp}"
            )));
        }
        Ok(Self {
            p_hat,
            kp,
            frak_m: kp * (p_hat - 1.0).sqrt(),
        })
    }
}

/// Default constants: `kp = 1` at `p_hat = 2`, `kp = 2` above.
pub fn kp_constant(p_hat: f64) -> Result<LpConstants> {
    let kp = if p_hat == 2.0 { 1.0 } else { 2.0 };
    LpConstants::with_kp(p_hat, kp)
}

/// Inputs of the depth selector. `lipschitz`, `growth_p` and `growth_q` are
/// the single-constant form `max{|f(t,x,0)|, |g(x)|} ≤ L d^p (1 + Σ|x_k|)^q`
/// with `L` also the Lipschitz constant of `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexityQuery {
    pub d: usize,
    pub eps: f64,
    pub delta: f64,
    pub lp: LpConstants,
    pub lipschitz: f64,
    pub growth_p: f64,
    pub growth_q: f64,
    pub horizon: f64,
}

impl ComplexityQuery {
    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(MlpError::EmptyDimension);
        }
        if !(self.eps > 0.0) {
            return Err(MlpError::InvalidParameter(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.delta > 0.0) {
            return Err(MlpError::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        let finite = [self.lipschitz, self.growth_p, self.growth_q, self.horizon];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MlpError::InvalidParameter(
                "selector constants must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// The prefactor `η_{d,p̂}` of the selector bound.
    pub fn eta(&self) -> f64 {
        eta_constant(&BoundInputs {
            lipschitz: self.lipschitz,
            horizon: self.horizon,
            growth_p: self.growth_p,
            growth_q: self.growth_q,
            p_hat: self.lp.p_hat,
            frak_m: self.lp.frak_m,
            d: self.d,
            ..BoundInputs::default()
        })
    }

    /// `ln( η [(1+2LT) exp(φ(n)^{p̂/2}/n) / φ(n)^{1/2}]^n )`.
    pub fn log_bound(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(MlpError::InvalidParameter("selector depth must be at least 1".into()));
        }
        let base = phi(n as u64)? as f64;
        let nf = n as f64;
        let growth = (1.0 + 2.0 * self.lipschitz * self.horizon).ln();
        Ok(self.eta().ln() + nf * growth + base.powf(self.lp.p_hat / 2.0) - 0.5 * nf * base.ln())
    }
}

/// Smallest `n ≥ 1` whose scheduled error bound is at most `eps`.
pub fn choose_n(q: &ComplexityQuery) -> Result<u32> {
    q.validate()?;
    let target = q.eps.ln();
    for n in 1..=SELECTOR_CAP {
        if q.log_bound(n)? <= target {
            return Ok(n);
        }
    }
    Err(MlpError::SelectorCap {
        cap: SELECTOR_CAP,
        eps: q.eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(lipschitz: f64, eps: f64) -> ComplexityQuery {
        ComplexityQuery {
            d: 5,
            eps,
            delta: 0.5,
            lp: kp_constant(2.0).unwrap(),
            lipschitz,
            growth_p: 0.0,
            growth_q: 0.0,
            horizon: 1.0,
        }
    }

    #[test]
    fn phi_small_values() {
        assert_eq!(phi(1), Ok(1));
        assert_eq!(phi(2), Ok(2));
        assert_eq!(phi(5), Ok(3));
        assert_eq!(phi(100), Ok(8));
    }

    #[test]
    fn phi_large_values() {
        assert_eq!(phi(10_000), Ok(20));
        assert_eq!(phi(1_000_000), Ok(41));
        assert_eq!(phi(10_000_000), Ok(55));
    }

    #[test]
    fn phi_zero_is_undefined() {
        assert_eq!(phi(0), Err(MlpError::ScheduleUndefined));
    }

    #[test]
    fn phi_matches_threshold_definition() {
        // exp((ln 3)²) ≈ 3.34, so φ jumps from 2 to 3 at m = 4
        assert_eq!(phi(3), Ok(2));
        assert_eq!(phi(4), Ok(3));
        // exp((ln 4)²) ≈ 6.83
        assert_eq!(phi(6), Ok(3));
        assert_eq!(phi(7), Ok(4));
    }

    #[test]
    fn phi_report_passes() {
        let report = check_phi_properties(100_000).unwrap();
        assert!(report.pass(), "{report:?}");
        let r: Vec<f64> = report.cubic_ratios.iter().map(|x| x.1).collect();
        assert!((r[1] - 0.8).abs() < 1e-12);
        assert!((r[4] - 0.0166375).abs() < 1e-12);
    }

    #[test]
    fn phi_report_boundary() {
        let report = check_phi_properties(2).unwrap();
        assert!(report.doubling_violations.is_empty());
        assert!(check_phi_properties(1).is_err());
    }

    #[test]
    fn kp_conventions() {
        assert_eq!(kp_constant(2.0).unwrap().frak_m, 1.0);
        assert!((kp_constant(4.0).unwrap().frak_m - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((kp_constant(3.0).unwrap().frak_m - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(kp_constant(1.5), Err(MlpError::OrderBelowTwo(1.5)));
        assert!(LpConstants::with_kp(2.0, 0.5).is_err());
    }

    #[test]
    fn selector_trivial_when_eps_is_large() {
        let q = query(1.0, 1e6);
        assert_eq!(choose_n(&q), Ok(1));
    }

    #[test]
    fn selector_trivial_when_eta_vanishes() {
        let q = query(0.0, 1e-9);
        assert_eq!(choose_n(&q), Ok(1));
    }

    #[test]
    fn eta_at_unit_constants() {
        // d enters as d^{p+q} = 1 here
        let q = query(1.0, 0.1);
        assert!((q.eta() - 4.0 * 2.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn selector_benchmark_exceeds_cap() {
        // direct scan in the log domain puts the answer at n = 308
        let q = query(1.0, 0.1);
        assert_eq!(choose_n(&q), Err(MlpError::SelectorCap { cap: 64, eps: 0.1 }));
    }

    #[test]
    fn selector_small_lipschitz_regressions() {
        assert_eq!(choose_n(&query(0.5, 0.1)), Ok(45));
        assert_eq!(choose_n(&query(0.1, 0.1)), Ok(14));
    }

    #[test]
    fn selector_is_minimal() {
        let q = query(0.1, 0.1);
        let n = choose_n(&q).unwrap();
        assert!(q.log_bound(n).unwrap() <= q.eps.ln());
        assert!(q.log_bound(n - 1).unwrap() > q.eps.ln());
    }

    #[test]
    fn selector_rejects_bad_eps() {
        assert!(choose_n(&query(1.0, 0.0)).is_err());
        assert!(choose_n(&query(1.0, f64::NAN)).is_err());
    }
}
