//! Problem definitions for semilinear heat equations
//! `∂ₜu + (s²/2)Δu + f(t, x, u) = 0`, `u(T, ·) = g`, and the built-in
//! benchmark problems with exact references.
//!
//! With `s = √2` this is `∂ₜu + Δu + f(u) = 0`. Growth constants are stated
//! for the standard Brownian form obtained by the substitution `x ↦ s·x`, so
//! bound evaluations use `‖x‖ / s`.

use std::fmt;
use std::sync::Arc;

use crate::error::{MlpError, Result};
use crate::numeric::{norm, MeanAccumulator};
use crate::stream::derive_stream;

pub type Nonlinearity = Arc<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;
pub type Datum = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Reference = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

pub const BUILTIN_NAMES: [&str; 4] = ["heat-quadratic", "constant-source", "flat-ode", "linear-reaction"];

/// Default reaction rate of the `linear-reaction` problem.
pub const LINEAR_REACTION_RATE: f64 = 0.5;

/// Direction of time in which `t` is given.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    /// `u(T, ·) = g`, solved backward from the horizon.
    Terminal,
    /// `u(0, ·) = g`, forward heat flow; mapped onto the terminal form by `t ↦ T − t`.
    Initial,
}

impl Form {
    pub fn as_str(&self) -> &'static str {
        match self {
            Form::Terminal => "terminal",
            Form::Initial => "initial",
        }
    }
}

impl std::str::FromStr for Form {
    type Err = MlpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "terminal" => Ok(Form::Terminal),
            "initial" => Ok(Form::Initial),
            other => Err(MlpError::InvalidParameter(format!("unknown form '{other}'"))),
        }
    }
}

/// One semilinear problem. `f` and `g` are given in terminal form.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub d: usize,
    pub horizon: f64,
    pub f: Nonlinearity,
    pub g: Datum,
    /// Lipschitz constant of `f` in its value argument.
    pub lipschitz: f64,
    /// Growth constant: `max{|f(t,s·y,0)|, |g(s·y)|} ≤ 𝔏(1 + ‖y‖^q)`.
    pub frak_l: f64,
    /// Power of `d` in the single-constant growth form used by the selector.
    pub growth_p: f64,
    pub growth_q: f64,
    pub diffusion_scale: f64,
    pub form: Form,
    /// Exact solution in terminal form.
    pub reference: Option<Reference>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("horizon", &self.horizon)
            .field("lipschitz", &self.lipschitz)
            .field("frak_l", &self.frak_l)
            .field("growth_p", &self.growth_p)
            .field("growth_q", &self.growth_q)
            .field("diffusion_scale", &self.diffusion_scale)
            .field("form", &self.form)
            .field("reference", &self.reference.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn with_form(mut self, form: Form) -> Self {
        self.form = form;
        self
    }

    /// Terminal-form time for a user-facing `t`.
    pub fn terminal_time(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(MlpError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(match self.form {
            Form::Terminal => t,
            Form::Initial => self.horizon - t,
        })
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(MlpError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `‖x‖ / s`, the point norm in the standard Brownian coordinates.
    pub fn scaled_norm(&self, x: &[f64]) -> f64 {
        norm(x) / self.diffusion_scale
    }

    /// Constant `L` of the single-constant form
    /// `max{|f(t,y,0)|, |g(y)|} ≤ L d^p (1 + Σ|y_k|)^q`, also Lipschitz for `f`.
    pub fn selector_constant(&self) -> f64 {
        let c_q = if self.growth_q >= 1.0 { 1.0 } else { 2.0 };
        self.lipschitz.max(self.frak_l * c_q)
    }
}

fn base_spec(name: &str, d: usize, horizon: f64, f: Nonlinearity, g: Datum) -> ProblemSpec {
    ProblemSpec {
        name: name.to_string(),
        d,
        horizon,
        f,
        g,
        lipschitz: 0.0,
        frak_l: 0.0,
        growth_p: 0.0,
        growth_q: 0.0,
        diffusion_scale: std::f64::consts::SQRT_2,
        form: Form::Terminal,
        reference: None,
    }
}

fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `f ≡ 0`, `g = ‖x‖²`: `u = ‖x‖² + 2d(T − t)`.
pub fn heat_quadratic(d: usize, horizon: f64) -> ProblemSpec {
    let dim = d as f64;
    ProblemSpec {
        frak_l: 2.0,
        growth_q: 2.0,
        reference: Some(Arc::new(move |t, x| squared_norm(x) + 2.0 * dim * (horizon - t))),
        ..base_spec(
            "heat-quadratic",
            d,
            horizon,
            Arc::new(|_, _, _| 0.0),
            Arc::new(squared_norm),
        )
    }
}

/// `f ≡ 1`, `g ≡ 0`: `u = T − t`.
pub fn constant_source(d: usize, horizon: f64) -> ProblemSpec {
    ProblemSpec {
        frak_l: 0.5,
        reference: Some(Arc::new(move |t, _| horizon - t)),
        ..base_spec(
            "constant-source",
            d,
            horizon,
            Arc::new(|_, _, _| 1.0),
            Arc::new(|_| 0.0),
        )
    }
}

/// `f(v) = cos v`, `g ≡ c`: the solution is the backward ODE solution
/// `y' = −cos y`, `y(T) = c`, namely `y(t) = gd(atanh(sin c) + T − t)` with
/// the Gudermannian `gd(z) = 2 atan(tanh(z/2))`. Requires `|c| < π/2`.
pub fn flat_ode(d: usize, horizon: f64, c: f64) -> Result<ProblemSpec> {
    if !(c.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(MlpError::InvalidParameter(format!(
            "flat-ode datum must satisfy |c| < pi/2, got {c}"
        )));
    }
    let offset = c.sin().atanh();
    Ok(ProblemSpec {
        lipschitz: 1.0,
        frak_l: c.abs().max(1.0) / 2.0,
        reference: Some(Arc::new(move |t, _| gudermannian(offset + horizon - t))),
        ..base_spec(
            "flat-ode",
            d,
            horizon,
            Arc::new(|_, _, v: f64| v.cos()),
            Arc::new(move |_| c),
        )
    })
}

fn gudermannian(z: f64) -> f64 {
    2.0 * (z / 2.0).tanh().atan()
}

/// `f(v) = a·v`, `g = ‖x‖²`: `u = e^{a(T−t)}(‖x‖² + 2d(T − t))`.
pub fn linear_reaction(d: usize, horizon: f64, a: f64) -> ProblemSpec {
    let dim = d as f64;
    ProblemSpec {
        lipschitz: a.abs(),
        frak_l: 2.0,
        growth_q: 2.0,
        reference: Some(Arc::new(move |t, x| {
            (a * (horizon - t)).exp() * (squared_norm(x) + 2.0 * dim * (horizon - t))
        })),
        ..base_spec(
            "linear-reaction",
            d,
            horizon,
            Arc::new(move |_, _, v| a * v),
            Arc::new(squared_norm),
        )
    }
}

/// Built-in problem by name with default parameters.
pub fn builtin(name: &str, d: usize, horizon: f64) -> Result<ProblemSpec> {
    if d == 0 {
        return Err(MlpError::EmptyDimension);
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(MlpError::InvalidParameter(format!(
            "horizon must be finite and nonnegative, got {horizon}"
        )));
    }
    match name {
        "heat-quadratic" => Ok(heat_quadratic(d, horizon)),
        "constant-source" => Ok(constant_source(d, horizon)),
        "flat-ode" => flat_ode(d, horizon, 1.0),
        "linear-reaction" => Ok(linear_reaction(d, horizon, LINEAR_REACTION_RATE)),
        other => Err(MlpError::UnknownProblem(other.to_string())),
    }
}

/// Exact solution at user-facing time `t`.
pub fn reference_value(p: &ProblemSpec, t: f64, x: &[f64]) -> Result<f64> {
    p.check_point(x)?;
    let tt = p.terminal_time(t)?;
    let reference = p
        .reference
        .as_ref()
        .ok_or_else(|| MlpError::NoReference(p.name.clone()))?;
    Ok(reference(tt, x))
}

/// Classical RK4 for `y' = −f(y)` from `y(T) = c` back to time `t`.
pub fn ode_backward(f: &dyn Fn(f64) -> f64, c: f64, horizon: f64, t: f64, steps: usize) -> f64 {
    // in reversed time s = T − t the equation reads dy/ds = f(y)
    let h = (horizon - t) / steps as f64;
    let mut y = c;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

fn sample_point(stream: &mut crate::stream::Stream, d: usize, radius: f64) -> Vec<f64> {
    (0..d).map(|_| radius * (2.0 * stream.next_uniform() - 1.0)).collect()
}

/// Largest observed `|f(t,x,v) − f(t,x,w)| / (L|v − w|)` over random triples;
/// at most `1 + 1e-12` when the declared Lipschitz constant holds.
pub fn lipschitz_ratio(p: &ProblemSpec, samples: usize, seed: u64) -> f64 {
    let mut s = derive_stream(seed, &[1]);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let t = p.horizon * s.next_uniform();
        let x = sample_point(&mut s, p.d, 3.0);
        let v = 20.0 * (s.next_uniform() - 0.5);
        let w = 20.0 * (s.next_uniform() - 0.5);
        if v == w {
            continue;
        }
        let diff = ((p.f)(t, &x, v) - (p.f)(t, &x, w)).abs();
        let allowed = p.lipschitz * (v - w).abs();
        let ratio = if allowed == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / allowed
        };
        worst = worst.max(ratio);
    }
    worst
}

/// Largest observed `max{|f(t,x,0)|, |g(x)|} / (𝔏(1 + ‖x/s‖^q))`; at most 1
/// when the declared growth constants hold.
pub fn growth_ratio(p: &ProblemSpec, samples: usize, seed: u64) -> f64 {
    let mut s = derive_stream(seed, &[2]);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let t = p.horizon * s.next_uniform();
        let x = sample_point(&mut s, p.d, 5.0);
        let value = (p.f)(t, &x, 0.0).abs().max((p.g)(&x).abs());
        let allowed = p.frak_l * (1.0 + p.scaled_norm(&x).powf(p.growth_q));
        let ratio = if allowed == 0.0 {
            if value == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            value / allowed
        };
        worst = worst.max(ratio);
    }
    worst
}

/// Monte Carlo residual of the fixed-point equation
/// `u(t,x) = E[g(x + sW_{T−t})] + ∫ₜᵀ E[f(r, x + sW_{r−t}, u(r, ·))] dr`
/// in terminal time, with trapezoidal quadrature on `nodes` equal intervals.
/// Returns `(residual, standard_error)`.
pub fn fixed_point_residual(
    p: &ProblemSpec,
    t: f64,
    x: &[f64],
    samples: usize,
    nodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    p.check_point(x)?;
    if !(0.0..=p.horizon).contains(&t) {
        return Err(MlpError::TimeOutOfRange { t, horizon: p.horizon });
    }
    if samples < 2 || nodes == 0 {
        return Err(MlpError::InvalidParameter("need at least 2 samples and 1 node".into()));
    }
    let reference = p
        .reference
        .as_ref()
        .ok_or_else(|| MlpError::NoReference(p.name.clone()))?;
    let h = (p.horizon - t) / nodes as f64;
    let step = p.diffusion_scale * h.sqrt();
    let mut stream = derive_stream(seed, &[3]);
    let mut z = vec![0.0; p.d];
    let mut y = vec![0.0; p.d];
    let mut mean = MeanAccumulator::new();
    let mut second = MeanAccumulator::new();
    for _ in 0..samples {
        y.copy_from_slice(x);
        let mut integral = 0.5 * h * (p.f)(t, &y, reference(t, &y));
        for j in 1..=nodes {
            stream.fill_gaussian(&mut z)?;
            for (yi, zi) in y.iter_mut().zip(&z) {
                *yi += step * zi;
            }
            let r = t + j as f64 * h;
            let w = if j == nodes { 0.5 * h } else { h };
            integral += w * (p.f)(r, &y, reference(r, &y));
        }
        let sample = (p.g)(&y) + integral;
        mean.add(sample);
        second.add(sample * sample);
    }
    let m = mean.mean();
    let var = (second.mean() - m * m).max(0.0) * samples as f64 / (samples as f64 - 1.0);
    Ok((reference(t, x) - m, (var / samples as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_reference_values() {
        let p = builtin("heat-quadratic", 10, 1.0).unwrap();
        assert_eq!(reference_value(&p, 0.0, &[0.0; 10]), Ok(20.0));
        let p = builtin("heat-quadratic", 2, 1.0).unwrap();
        assert_eq!(reference_value(&p, 1.0, &[1.0, 1.0]), Ok(2.0));
    }

    #[test]
    fn constant_source_reference() {
        let p = builtin("constant-source", 4, 1.0).unwrap();
        assert_eq!(reference_value(&p, 0.25, &[0.3; 4]), Ok(0.75));
    }

    #[test]
    fn flat_ode_closed_form_matches_integrator() {
        for c in [1.0, 0.0, -0.4] {
            let p = flat_ode(3, 1.0, c).unwrap();
            for t in [0.0, 0.3, 1.0] {
                let exact = reference_value(&p, t, &[0.0; 3]).unwrap();
                let rk = ode_backward(&|y: f64| y.cos(), c, 1.0, t, 4096);
                assert!((exact - rk).abs() < 1e-12, "c={c} t={t}: {exact} vs {rk}");
            }
        }
    }

    #[test]
    fn flat_ode_frozen_values() {
        // adaptive eighth-order integration of y' = -cos y at tolerance 1e-12
        let p0 = flat_ode(1, 1.0, 0.0).unwrap();
        let v0 = reference_value(&p0, 0.0, &[0.0]).unwrap();
        assert!((v0 - 0.865_769_483_239_619_1).abs() < 1e-10, "{v0}");
        let p1 = builtin("flat-ode", 1, 1.0).unwrap();
        let v1 = reference_value(&p1, 0.0, &[0.0]).unwrap();
        assert!((v1 - 1.355_751_357_841_491_5).abs() < 1e-10, "{v1}");
    }

    #[test]
    fn flat_ode_rejects_out_of_range_datum() {
        assert!(flat_ode(1, 1.0, 2.0).is_err());
    }

    #[test]
    fn linear_reaction_solves_the_pde() {
        // check u_t + Δu + a u = 0 by finite differences
        let a = LINEAR_REACTION_RATE;
        let p = linear_reaction(2, 1.0, a);
        let u = p.reference.clone().unwrap();
        let (t, x) = (0.4, [0.3, -0.7]);
        let h = 1e-4;
        let ut = (u(t + h, &x) - u(t - h, &x)) / (2.0 * h);
        let mut lap = 0.0;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            lap += (u(t, &xp) - 2.0 * u(t, &x) + u(t, &xm)) / (h * h);
        }
        let residual = ut + lap + a * u(t, &x);
        assert!(residual.abs() < 1e-5, "{residual}");
    }

    #[test]
    fn initial_form_reverses_time() {
        let p = builtin("constant-source", 1, 2.0).unwrap().with_form(Form::Initial);
        assert_eq!(reference_value(&p, 0.5, &[0.0]), Ok(0.5));
    }

    #[test]
    fn unknown_and_missing() {
        assert!(matches!(builtin("nosuch", 1, 1.0), Err(MlpError::UnknownProblem(_))));
        let mut p = builtin("constant-source", 1, 1.0).unwrap();
        p.reference = None;
        assert!(matches!(
            reference_value(&p, 0.0, &[0.0]),
            Err(MlpError::NoReference(_))
        ));
        let p = builtin("constant-source", 2, 1.0).unwrap();
        assert!(matches!(
            reference_value(&p, 0.0, &[0.0]),
            Err(MlpError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            reference_value(&p, 1.5, &[0.0, 0.0]),
            Err(MlpError::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn declared_constants_hold() {
        for name in BUILTIN_NAMES {
            for d in [1, 4] {
                let p = builtin(name, d, 1.0).unwrap();
                assert!(lipschitz_ratio(&p, 1000, 7) <= 1.0 + 1e-12, "{name}");
                assert!(growth_ratio(&p, 1000, 7) <= 1.0, "{name}");
            }
        }
    }

    #[test]
    fn selector_constants() {
        assert_eq!(builtin("heat-quadratic", 5, 1.0).unwrap().selector_constant(), 2.0);
        assert_eq!(builtin("constant-source", 5, 1.0).unwrap().selector_constant(), 1.0);
        assert_eq!(builtin("flat-ode", 5, 1.0).unwrap().selector_constant(), 1.0);
    }
}
