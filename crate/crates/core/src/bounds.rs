//! Analytic bounds: Gronwall-type estimates, moment bounds, Monte Carlo L^p
//! bounds, factorial chains, the MLP error bound, closed forms of the linear
//! recursions behind the cost analysis, and the selector prefactor `η`.
//!
//! Products of powers and factorials are accumulated as logarithms and
//! exponentiated once at the end.

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{MlpError, Result};
use crate::numeric::ln_factorial;
use crate::schedule::kp_constant;

/// Every scalar a bound may need. Unused fields are ignored by each formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    /// Lipschitz constant `L` of the nonlinearity.
    pub lipschitz: f64,
    /// Growth constant `𝔏`.
    pub frak_l: f64,
    pub horizon: f64,
    /// Power of `d` in the growth condition.
    pub growth_p: f64,
    /// Polynomial growth exponent in `‖x‖`.
    pub growth_q: f64,
    pub p_hat: f64,
    pub frak_m: f64,
    pub d: usize,
    pub x_norm: f64,
    pub n: u32,
    pub base: u64,
    pub alpha: f64,
    pub frak_d: f64,
    pub beta_exp: f64,
    /// Replaces the closed-form moment term in [`mlp_error_bound`] when set.
    pub exact_moment: Option<f64>,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            lipschitz: 0.0,
            frak_l: 0.0,
            horizon: 1.0,
            growth_p: 0.0,
            growth_q: 0.0,
            p_hat: 2.0,
            frak_m: 1.0,
            d: 1,
            x_norm: 0.0,
            n: 0,
            base: 1,
            alpha: 0.0,
            frak_d: 0.0,
            beta_exp: 0.0,
            exact_moment: None,
        }
    }
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if !(0.0..=horizon).contains(&t) {
        return Err(MlpError::TimeOutOfRange { t, horizon });
    }
    Ok(())
}

/// `⌊m^e⌋`, snapping to an integer when the floating power lands within
/// `1e-9` relative of one (so `4^{3/2}` is 8, not 7).
pub fn floor_pow(m: u64, e: f64) -> f64 {
    let x = (m as f64).powf(e);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r
    } else {
        x.floor()
    }
}

fn ln_fact_real(k: f64) -> f64 {
    if k < 170.0 {
        ln_factorial(k as u64)
    } else {
        ln_gamma(k + 1.0)
    }
}

/// `β(t)·exp(γ(T − t))`, the backward Gronwall bound for
/// `α(t) ≤ β(t) + γ∫ₜᵀ α(s) ds` with `β` nonincreasing.
pub fn gronwall_backward_bound(beta_fn: &dyn Fn(f64) -> f64, gamma: f64, horizon: f64, t: f64) -> Result<f64> {
    check_time(t, horizon)?;
    Ok(beta_fn(t) * (gamma * (horizon - t)).exp())
}

/// `max{T,1}((1+‖x‖²)^{r/2} + (r+1)d^{r/2})·exp(r(r+3)T/2)`, a bound on
/// `sup_{t≤T} E‖x + W_t‖^r`.
pub fn gaussian_moment_bound(r: f64, x_norm: f64, d: usize, horizon: f64) -> f64 {
    let d = d as f64;
    horizon.max(1.0)
        * ((1.0 + x_norm * x_norm).powf(r / 2.0) + (r + 1.0) * d.powf(r / 2.0))
        * (r * (r + 3.0) * horizon / 2.0).exp()
}

/// `2((1+‖x‖²)^{q/2} + (qp̂+1)^{1/p̂} d^{q/2})·exp([q(qp̂+3)+1]T/2)`, a bound on
/// `sup_{s≤T} (E[(1 + ‖x+W_s‖^q)^{p̂}])^{1/p̂}`.
pub fn lp_growth_moment_bound(q: f64, p_hat: f64, x_norm: f64, d: usize, horizon: f64) -> f64 {
    let d = d as f64;
    2.0 * ((1.0 + x_norm * x_norm).powf(q / 2.0) + (q * p_hat + 1.0).powf(1.0 / p_hat) * d.powf(q / 2.0))
        * ((q * (q * p_hat + 3.0) + 1.0) * horizon / 2.0).exp()
}

/// `exp(L(T−t))·(g_moment + (T−t)^{(q−1)/q}·f_moment_integral)`, the L^q bound
/// on the fixed-point solution along the Brownian path.
pub fn fixedpoint_lq_bound(
    lipschitz: f64,
    horizon: f64,
    t: f64,
    q: f64,
    g_moment: f64,
    f_moment_integral: f64,
) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(MlpError::OrderBelowOne(q));
    }
    check_time(t, horizon)?;
    let tau = horizon - t;
    Ok((lipschitz * tau).exp() * (g_moment + tau.powf((q - 1.0) / q) * f_moment_integral))
}

/// `𝔏(T+1)·exp(LT)·lp_growth_moment_bound(q, p̂, ‖x‖, d, T)`, uniform in `t`.
pub fn apriori_solution_bound(inputs: &BoundInputs, t: f64) -> Result<f64> {
    check_time(t, inputs.horizon)?;
    if inputs.frak_l == 0.0 {
        return Ok(0.0);
    }
    let moment = lp_growth_moment_bound(inputs.growth_q, inputs.p_hat, inputs.x_norm, inputs.d, inputs.horizon);
    Ok(inputs.frak_l * (inputs.horizon + 1.0) * (inputs.lipschitz * inputs.horizon).exp() * moment)
}

/// L^p error bound for a mean of `n_samples` i.i.d. copies.
///
/// Centered: `√((p−1)/n)·moment` with `moment = ‖X − EX‖_p`.
/// Uncentered: `𝔪(p)/√n·moment` with `moment = ‖X‖_p`.
pub fn mc_lp_bound(p: f64, n_samples: u64, moment: f64, centered: bool) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(MlpError::OrderBelowTwo(p));
    }
    if n_samples == 0 {
        return Err(MlpError::InvalidParameter("n_samples must be at least 1".into()));
    }
    let n = n_samples as f64;
    if centered {
        Ok(((p - 1.0) / n).sqrt() * moment)
    } else {
        Ok(kp_constant(p)?.frak_m / n.sqrt() * moment)
    }
}

/// `(ln lower, ln n!, ln upper)` for
/// `2^{−1/2} n^{n+1/2} e^{1−n} ≤ n! ≤ n^{n+1/2} e^{1−n}`.
pub fn stirling_log_chain(n: u64) -> Result<(f64, f64, f64)> {
    if n == 0 {
        return Err(MlpError::InvalidParameter("factorial chain needs n >= 1".into()));
    }
    let nf = n as f64;
    let ln_upper = (nf + 0.5) * nf.ln() + 1.0 - nf;
    let ln_lower = ln_upper - 0.5 * std::f64::consts::LN_2;
    Ok((ln_lower, ln_factorial(n), ln_upper))
}

/// The factorial chain exponentiated: `(lower, n!, upper)`.
pub fn stirling_chain(n: u64) -> Result<(f64, f64, f64)> {
    let (a, b, c) = stirling_log_chain(n)?;
    Ok((a.exp(), b.exp(), c.exp()))
}

/// Outcome of the scan behind `max_n m^{n/2}/n! ≤ m^{⌊√m⌋/2}/⌊√m⌋! < e^{√m}/⌊√m⌋^{1/2} ≤ e^{√m}`.
/// All values are natural logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct Talk1Report {
    pub m: f64,
    pub ln_max: f64,
    pub argmax: u64,
    pub ln_floor_term: f64,
    pub ln_middle: f64,
    pub ln_upper: f64,
    pub attained_at_root: bool,
    pub chain_holds: bool,
}

/// Scan `m^{n/2}/n!` over `0 ≤ n ≤ n_scan` and check the chain.
pub fn talk1_chain(m: f64, n_scan: u64) -> Result<Talk1Report> {
    if !(m >= 1.0) || !m.is_finite() {
        return Err(MlpError::InvalidParameter(format!("m must be at least 1, got {m}")));
    }
    let ln_term = |n: u64| 0.5 * n as f64 * m.ln() - ln_factorial(n);
    let (argmax, ln_max) =
        (0..=n_scan).map(|n| (n, ln_term(n))).fold(
            (0, f64::NEG_INFINITY),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    let root = m.sqrt();
    let lo = root.floor() as u64;
    let hi = root.ceil() as u64;
    let slack = 1e-12 * ln_max.abs().max(1.0);
    let attained_at_root = (ln_term(lo) - ln_max).abs() <= slack || (ln_term(hi) - ln_max).abs() <= slack;
    let ln_floor_term = ln_term(lo);
    let ln_middle = root - 0.5 * (lo as f64).ln();
    let ln_upper = root;
    let chain_holds = ln_max <= ln_floor_term + slack && ln_floor_term < ln_middle && ln_middle <= ln_upper;
    Ok(Talk1Report {
        m,
        ln_max,
        argmax,
        ln_floor_term,
        ln_middle,
        ln_upper,
        attained_at_root,
        chain_holds,
    })
}

/// Inputs of the weighted Gronwall bound for sequences of functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GronwallInputs {
    pub a: f64,
    pub b: f64,
    pub m: u64,
    pub n: u32,
    pub p: f64,
    pub horizon: f64,
    pub tau: f64,
    pub sup_f0: f64,
}

/// `(sharp, relaxed)` bounds on `f_N(τ)` for
/// `f_n(t) ≤ a/M^{n/2} + Σ_{i<n} b/M^{(n−i−1)/2} (∫ₜᵀ f_i^p)^{1/p}`.
pub fn fn_gron_bound(g: &GronwallInputs) -> Result<(f64, f64)> {
    if g.m == 0 || g.n == 0 {
        return Err(MlpError::InvalidParameter("M and N must be positive".into()));
    }
    if !(g.p >= 1.0) {
        return Err(MlpError::OrderBelowOne(g.p));
    }
    check_time(g.tau, g.horizon)?;
    let span = (g.horizon - g.tau).powf(1.0 / g.p);
    let lead = g.a + g.b * span * g.sup_f0;
    if lead == 0.0 {
        return Ok((0.0, 0.0));
    }
    let ln_m = (g.m as f64).ln();
    let nf = g.n as f64;
    let ln_num = lead.ln() + (nf - 1.0) * (g.b * span).ln_1p();
    let k = floor_pow(g.m, g.p / 2.0);
    let ln_sharp = ln_num - 0.5 * (nf - k) * ln_m - ln_fact_real(k) / g.p;
    let ln_relaxed = ln_num - 0.5 * nf * ln_m + (g.m as f64).powf(g.p / 2.0) / g.p;
    Ok((ln_sharp.exp(), ln_relaxed.exp()))
}

/// `(sharp, relaxed)` L^p̂ error bounds for the MLP approximation at depth `n`
/// with base `m`:
/// `𝔪𝔏(T+1)e^{LT}(1+2LT)^n / divisor × moment`, where the sharp divisor is
/// `m^{(n−K)/2}(K!)^{1/p̂}` with `K = ⌊m^{p̂/2}⌋` and the relaxed divisor is
/// `m^{n/2} e^{−m^{p̂/2}/p̂}`.
pub fn mlp_error_bound(inputs: &BoundInputs) -> Result<(f64, f64)> {
    if inputs.base == 0 {
        return Err(MlpError::InvalidParameter("base must be at least 1".into()));
    }
    if !(inputs.p_hat >= 2.0) {
        return Err(MlpError::OrderBelowTwo(inputs.p_hat));
    }
    let moment = inputs.exact_moment.unwrap_or_else(|| {
        lp_growth_moment_bound(inputs.growth_q, inputs.p_hat, inputs.x_norm, inputs.d, inputs.horizon)
    });
    if inputs.frak_m == 0.0 || inputs.frak_l == 0.0 || moment == 0.0 {
        return Ok((0.0, 0.0));
    }
    let lt = inputs.lipschitz * inputs.horizon;
    let nf = inputs.n as f64;
    let ln_num = inputs.frak_m.ln()
        + inputs.frak_l.ln()
        + (inputs.horizon + 1.0).ln()
        + lt
        + nf * (2.0 * lt).ln_1p()
        + moment.ln();
    let ln_m = (inputs.base as f64).ln();
    let k = floor_pow(inputs.base, inputs.p_hat / 2.0);
    let ln_sharp = ln_num - 0.5 * (nf - k) * ln_m - ln_fact_real(k) / inputs.p_hat;
    let ln_relaxed = ln_num - 0.5 * nf * ln_m + (inputs.base as f64).powf(inputs.p_hat / 2.0) / inputs.p_hat;
    Ok((ln_sharp.exp(), ln_relaxed.exp()))
}

/// `η = 𝔪 L 2^{max{q,1}} d^{p+q} ((1+L²)^{q/2} + (qp̂+1)^{1/p̂}) exp([q(qp̂+3)+1]T/2 + (L+1)T)`.
pub fn eta_constant(inputs: &BoundInputs) -> f64 {
    let l = inputs.lipschitz;
    let q = inputs.growth_q;
    let p_hat = inputs.p_hat;
    let t = inputs.horizon;
    inputs.frak_m
        * l
        * 2f64.powf(q.max(1.0))
        * (inputs.d as f64).powf(inputs.growth_p + q)
        * ((1.0 + l * l).powf(q / 2.0) + (q * p_hat + 1.0).powf(1.0 / p_hat))
        * ((q * (q * p_hat + 3.0) + 1.0) * t / 2.0 + (l + 1.0) * t).exp()
}

/// `x_k = α_k + 1_{k≥1}β₁x_{k−1} + 1_{k≥2}β₂x_{k−2}` by direct iteration.
pub fn two_step_direct(beta1: Complex64, beta2: Complex64, alphas: &[Complex64], k: usize) -> Result<Complex64> {
    if alphas.len() <= k {
        return Err(MlpError::InvalidParameter(format!(
            "need {} alphas, got {}",
            k + 1,
            alphas.len()
        )));
    }
    let mut xs: Vec<Complex64> = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let mut x = alphas[j];
        if j >= 1 {
            x += beta1 * xs[j - 1];
        }
        if j >= 2 {
            x += beta2 * xs[j - 2];
        }
        xs.push(x);
    }
    Ok(xs[k])
}

/// Closed form of the two-step recursion through the roots
/// `b_{1,2} = (β₁ ± √(β₁² + 4β₂))/2`.
pub fn two_step_closed_form(beta1: Complex64, beta2: Complex64, alphas: &[Complex64], k: usize) -> Result<Complex64> {
    if alphas.len() <= k {
        return Err(MlpError::InvalidParameter(format!(
            "need {} alphas, got {}",
            k + 1,
            alphas.len()
        )));
    }
    let disc = beta1 * beta1 + 4.0 * beta2;
    let scale = 1f64.max(beta1.norm_sqr()).max(beta2.norm());
    if disc.norm() <= 1e-9 * scale {
        return Err(MlpError::DegenerateRoots);
    }
    let root = disc.sqrt();
    let b1 = (beta1 + root) / 2.0;
    let b2 = (beta1 - root) / 2.0;
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, alpha) in alphas.iter().enumerate().take(k + 1) {
        let e = (k + 1 - l) as i32;
        acc += alpha * (b1.powi(e) - b2.powi(e));
    }
    Ok(acc / (b1 - b2))
}

fn check_gamma(gamma: u8) -> Result<()> {
    if gamma > 1 {
        return Err(MlpError::InvalidParameter(format!("gamma must be 0 or 1, got {gamma}")));
    }
    Ok(())
}

/// `x_k = α_k + Σ_{l<k} (k−l)^γ β^{k−l} [x_l + 1_{l≥1} x_{l−1}]` by direct iteration.
pub fn full_history_direct(gamma: u8, beta: f64, alphas: &[Complex64], k: usize) -> Result<Complex64> {
    check_gamma(gamma)?;
    if alphas.len() <= k {
        return Err(MlpError::InvalidParameter(format!(
            "need {} alphas, got {}",
            k + 1,
            alphas.len()
        )));
    }
    let mut xs: Vec<Complex64> = Vec::with_capacity(k + 1);
    for (j, &alpha) in alphas.iter().enumerate().take(k + 1) {
        let mut x = alpha;
        for l in 0..j {
            let w = ((j - l) as f64).powi(gamma as i32) * beta.powi((j - l) as i32);
            let mut inner = xs[l];
            if l >= 1 {
                inner += xs[l - 1];
            }
            x += w * inner;
        }
        xs.push(x);
    }
    Ok(xs[k])
}

/// Closed form of the full-history recursion with `S = √(5^γβ² + 4^γβ)`.
pub fn full_history_closed_form(gamma: u8, beta: f64, alphas: &[Complex64], k: usize) -> Result<Complex64> {
    check_gamma(gamma)?;
    if !(beta > 0.0) {
        return Err(MlpError::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if alphas.len() <= k {
        return Err(MlpError::InvalidParameter(format!(
            "need {} alphas, got {}",
            k + 1,
            alphas.len()
        )));
    }
    let g = gamma as i32;
    let s = (5f64.powi(g) * beta * beta + 4f64.powi(g) * beta).sqrt();
    let centre = 3f64.powi(g) * beta;
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..=k {
        let mut coeff = alphas[l];
        if l >= 1 {
            coeff -= 2f64.powi(g) * beta * alphas[l - 1];
        }
        if l >= 2 {
            coeff += gamma as f64 * beta * beta * alphas[l - 2];
        }
        let e = (k + 1 - l) as i32;
        let weight = ((centre + s).powi(e) - (centre - s).powi(e)) / (2f64.powi(1 + g * (k - l) as i32) * s);
        acc += coeff * weight;
    }
    Ok(acc)
}

/// Bound on solutions of
/// `x_k ≤ 1_{k≥1}(α₀+α₁k)β^k + Σ_{l<k}(k−l)^γ β^{k−l}[x_l + x_{max(l−1,0)}]`:
/// `(α₀+α₁)(1+√2)^k β^k / 2` for `γ = 0`, `(α₀+α₁)(3β)^k / √5` for `γ = 1`.
pub fn full_history_upper_bound(gamma: u8, beta: f64, alpha0: f64, alpha1: f64, k: u32) -> Result<f64> {
    check_gamma(gamma)?;
    if !(beta >= 1.0) {
        return Err(MlpError::InvalidParameter(format!(
            "beta must be at least 1, got {beta}"
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let kk = k as i32;
    Ok(match gamma {
        0 => (alpha0 + alpha1) * 0.5 * (1.0 + std::f64::consts::SQRT_2).powi(kk) * beta.powi(kk),
        _ => (alpha0 + alpha1) / 5f64.sqrt() * (3.0 * beta).powi(kk),
    })
}

/// Bound that holds for every admissible `α₀, α₁`. The `γ = 0` branch of
/// [`full_history_upper_bound`] needs `α₁ = 0`: with `α₁ > 0` the first
/// differences of `(α₀+α₁k)β^k` do not vanish beyond `k = 1`, and e.g.
/// `β = 1, α₀ = 0, α₁ = 1` gives `x₂ = 3 > (1+√2)²/2`. The `γ = 0` equality
/// case is dominated termwise by the `γ = 1` one, so the `γ = 1` bound applies.
pub fn full_history_corrected_bound(gamma: u8, beta: f64, alpha0: f64, alpha1: f64, k: u32) -> Result<f64> {
    if gamma == 0 && alpha1 > 0.0 {
        full_history_upper_bound(1, beta, alpha0, alpha1, k)
    } else {
        full_history_upper_bound(gamma, beta, alpha0, alpha1, k)
    }
}

/// The inequality above taken with equality: the largest admissible sequence.
pub fn full_history_equality_case(gamma: u8, beta: f64, alpha0: f64, alpha1: f64, k: u32) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let mut xs: Vec<f64> = Vec::with_capacity(k as usize + 1);
    for j in 0..=k as usize {
        let mut x = if j >= 1 {
            (alpha0 + alpha1 * j as f64) * beta.powi(j as i32)
        } else {
            0.0
        };
        for l in 0..j {
            let w = ((j - l) as f64).powi(gamma as i32) * beta.powi((j - l) as i32);
            x += w * (xs[l] + xs[l.saturating_sub(1)]);
        }
        xs.push(x);
    }
    Ok(xs)
}

/// Cost recursion value and its closed-form ceiling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBound {
    /// `FC_n = 1_{n≥1} α mⁿ + Σ_{k<n} m^{n−k}(α + FC_k + FC_{max(k−1,0)})`.
    pub recursion: f64,
    /// `α (1+√2)ⁿ mⁿ`.
    pub closed: f64,
}

pub fn cost_recursion_bound(n: u32, base: u64, alpha_d: f64) -> Result<CostBound> {
    if base == 0 {
        return Err(MlpError::InvalidParameter("base must be at least 1".into()));
    }
    let m = base as f64;
    let mut fc: Vec<f64> = Vec::with_capacity(n as usize + 1);
    for j in 0..=n as usize {
        let mut v = if j >= 1 { alpha_d * m.powi(j as i32) } else { 0.0 };
        for k in 0..j {
            v += m.powi((j - k) as i32) * (alpha_d + fc[k] + fc[k.saturating_sub(1)]);
        }
        if !v.is_finite() {
            return Err(MlpError::Overflow("cost recursion"));
        }
        fc.push(v);
    }
    let closed = if n == 0 {
        0.0
    } else {
        alpha_d * ((1.0 + std::f64::consts::SQRT_2) * m).powi(n as i32)
    };
    if !closed.is_finite() {
        return Err(MlpError::Overflow("cost closed bound"));
    }
    Ok(CostBound {
        recursion: fc[n as usize],
        closed,
    })
}
