//! Exact map between the moving-potential problem and the static problem in
//! the rescaled frame `x̄ = x/L(t)`, `τ = t/(L₀L(t))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::numerics::{interp_linear, is_strictly_increasing, trapezoid};
use crate::units::PhysicalConstants;

/// Linear scale law `L(t) = L₀ + v t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleLaw {
    l0: f64,
    v: f64,
}

impl ScaleLaw {
    pub fn new(l0: f64, v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: "v",
                value: v,
                reason: "must be finite",
            });
        }
        Ok(Self {
            l0: require_positive("L0", l0)?,
            v,
        })
    }

    pub fn static_law(l0: f64) -> Result<Self> {
        Self::new(l0, 0.0)
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// End of the validity window for a contracting law (`v < 0`).
    pub fn window_end(&self) -> Option<f64> {
        (self.v < 0.0).then(|| self.l0 / self.v.abs())
    }

    /// Supremum of `τ` for an expanding law.
    pub fn tau_limit(&self) -> Option<f64> {
        (self.v > 0.0).then(|| 1.0 / (self.l0 * self.v))
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let limit = self.window_end().unwrap_or(f64::INFINITY);
        if t.is_nan() || t < 0.0 || t >= limit {
            return Err(Error::TimeOutOfWindow { t, limit });
        }
        Ok(())
    }

    pub fn scale_factor(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.l0 + self.v * t)
    }

    pub fn tau_of_t(&self, t: f64) -> Result<f64> {
        let l = self.scale_factor(t)?;
        Ok(t / (self.l0 * l))
    }

    /// Inverse of [`ScaleLaw::tau_of_t`].
    pub fn t_of_tau(&self, tau: f64) -> Result<f64> {
        let den = 1.0 - tau * self.l0 * self.v;
        if tau.is_nan() || tau < 0.0 || den <= 0.0 {
            return Err(Error::DomainError(format!(
                "tau = {tau} is not reached by the scale law (L0 = {}, v = {})",
                self.l0, self.v
            )));
        }
        Ok(tau * self.l0 * self.l0 / den)
    }

    /// The quadratic gauge phase `m v x² / (2ħ L)`.
    pub fn quadratic_phase(&self, consts: &PhysicalConstants, x: f64, l: f64) -> f64 {
        consts.mass() * self.v * x * x / (2.0 * consts.hbar() * l)
    }
}

fn check_grid(grid: &[f64], amplitude: &[Complex64]) -> Result<()> {
    if grid.len() != amplitude.len() {
        return Err(Error::GridMismatch(format!(
            "{} grid points but {} amplitudes",
            grid.len(),
            amplitude.len()
        )));
    }
    if grid.len() < 2 || !is_strictly_increasing(grid) {
        return Err(Error::DomainError(
            "grid must have at least two strictly increasing finite points".into(),
        ));
    }
    if amplitude.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::DomainError("amplitude contains non-finite values".into()));
    }
    Ok(())
}

/// Lab-frame wave function `Ψ(x, t)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LabWaveSample {
    pub(crate) x: Vec<f64>,
    pub(crate) t: f64,
    pub(crate) amplitude: Vec<Complex64>,
}

impl LabWaveSample {
    pub fn new(x: Vec<f64>, t: f64, amplitude: Vec<Complex64>) -> Result<Self> {
        check_grid(&x, &amplitude)?;
        Ok(Self { x, t, amplitude })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(&self.x, &self.amplitude)
    }

    /// `⟨self|other⟩` by the trapezoid rule; grids must coincide.
    pub fn inner(&self, other: &LabWaveSample) -> Result<Complex64> {
        if self.x != other.x {
            return Err(Error::GridMismatch("inner product of samples on different grids".into()));
        }
        Ok(inner(&self.x, &self.amplitude, &other.amplitude))
    }
}

/// Rescaled-frame wave function `Φ(x̄, τ)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledWaveSample {
    pub(crate) xbar: Vec<f64>,
    pub(crate) tau: f64,
    pub(crate) amplitude: Vec<Complex64>,
}

impl RescaledWaveSample {
    pub fn new(xbar: Vec<f64>, tau: f64, amplitude: Vec<Complex64>) -> Result<Self> {
        check_grid(&xbar, &amplitude)?;
        Ok(Self {
            xbar,
            tau,
            amplitude,
        })
    }

    /// Samples a real stationary profile on a grid.
    pub fn from_real(xbar: Vec<f64>, values: &[f64]) -> Result<Self> {
        let amplitude = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::new(xbar, 0.0, amplitude)
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(&self.xbar, &self.amplitude)
    }

    /// Linear interpolation of the amplitude; zero outside the sampled range.
    pub fn value_at(&self, xbar: f64) -> Complex64 {
        let n = self.xbar.len();
        if xbar < self.xbar[0] || xbar > self.xbar[n - 1] {
            return Complex64::new(0.0, 0.0);
        }
        interp_linear(&self.xbar, &self.amplitude, xbar)
    }
}

pub(crate) fn norm_squared(x: &[f64], amp: &[Complex64]) -> f64 {
    let dens: Vec<f64> = amp.iter().map(|a| a.norm_sqr()).collect();
    trapezoid(x, &dens)
}

pub(crate) fn inner(x: &[f64], a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..x.len().saturating_sub(1) {
        let h = x[j + 1] - x[j];
        acc += 0.5 * h * (a[j].conj() * b[j] + a[j + 1].conj() * b[j + 1]);
    }
    acc
}

/// Lifts a stationary rescaled solution `Φ(x̄)` of energy `Ē` to the lab frame at time `t`:
/// `Ψ(x,t) = L^{-1/2} exp(i m v x²/2ħL) exp(-i Ē t/ħL₀L) Φ(x/L)` on the grid `x = L x̄`.
pub fn lift_solution(
    law: &ScaleLaw,
    consts: &PhysicalConstants,
    ebar: f64,
    phi: &RescaledWaveSample,
    t: f64,
) -> Result<LabWaveSample> {
    let l = law.scale_factor(t)?;
    let tau = law.tau_of_t(t)?;
    let energy_phase = Complex64::from_polar(1.0, -ebar * tau / consts.hbar());
    let pref = 1.0 / l.sqrt();
    let x: Vec<f64> = phi.xbar.iter().map(|xb| l * xb).collect();
    let amplitude = x
        .iter()
        .zip(&phi.amplitude)
        .map(|(&xl, &a)| {
            Complex64::from_polar(pref, law.quadratic_phase(consts, xl, l)) * energy_phase * a
        })
        .collect();
    Ok(LabWaveSample { x, t, amplitude })
}

/// Inverse of [`lift_solution`] at fixed `t`: recovers `Φ(x̄)` on `x̄ = x/L`.
pub fn unlift_solution(
    law: &ScaleLaw,
    consts: &PhysicalConstants,
    ebar: f64,
    psi: &LabWaveSample,
) -> Result<RescaledWaveSample> {
    let l = law.scale_factor(psi.t)?;
    let tau = law.tau_of_t(psi.t)?;
    let energy_phase = Complex64::from_polar(1.0, ebar * tau / consts.hbar());
    let pref = l.sqrt();
    let xbar = psi.x.iter().map(|x| x / l).collect();
    let amplitude = psi
        .x
        .iter()
        .zip(&psi.amplitude)
        .map(|(&xl, &a)| {
            Complex64::from_polar(pref, -law.quadratic_phase(consts, xl, l)) * energy_phase * a
        })
        .collect();
    Ok(RescaledWaveSample {
        xbar,
        tau,
        amplitude,
    })
}

/// Lifts a time-evolved rescaled state `Φ(x̄, τ)` (its dynamical phase already
/// included) and evaluates it at arbitrary lab positions.
pub fn lift_evolved_onto(
    law: &ScaleLaw,
    consts: &PhysicalConstants,
    phi: &RescaledWaveSample,
    x_lab: &[f64],
) -> Result<LabWaveSample> {
    let t = law.t_of_tau(phi.tau)?;
    let l = law.scale_factor(t)?;
    let pref = 1.0 / l.sqrt();
    let amplitude = x_lab
        .iter()
        .map(|&x| Complex64::from_polar(pref, law.quadratic_phase(consts, x, l)) * phi.value_at(x / l))
        .collect();
    LabWaveSample::new(x_lab.to_vec(), t, amplitude)
}

/// Pointwise linear combination `Σ c_k Ψ_k` of samples sharing grid and time.
pub fn superpose(states: &[(Complex64, &LabWaveSample)]) -> Result<LabWaveSample> {
    let (_, first) = states
        .first()
        .ok_or_else(|| Error::GridMismatch("empty superposition".into()))?;
    let mut amplitude = vec![Complex64::new(0.0, 0.0); first.x.len()];
    for (c, s) in states {
        if s.x != first.x || s.t != first.t {
            return Err(Error::GridMismatch(format!(
                "state at t = {} on {} points does not match t = {} on {} points",
                s.t,
                s.x.len(),
                first.t,
                first.x.len()
            )));
        }
        for (acc, a) in amplitude.iter_mut().zip(&s.amplitude) {
            *acc += c * a;
        }
    }
    Ok(LabWaveSample {
        x: first.x.clone(),
        t: first.t,
        amplitude,
    })
}
