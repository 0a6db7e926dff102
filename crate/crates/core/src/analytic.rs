//! Closed-form resonance parameters for the moving delta well and the moving
//! square barrier, and the survival exponents built from them.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Checked, Error, RegimeWarning, Result};
use crate::numerics::bisect;
use crate::scaling_frame::ScaleLaw;
use crate::units::PhysicalConstants;

/// Strength ratio below which the large-strength expansions are flagged.
pub const LARGE_STRENGTH_MIN: f64 = 10.0;

/// Where a resonance or survival curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Fitted,
    Oracle,
}

/// One metastable level of the rescaled problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub index_n: usize,
    pub kbar_n: f64,
    pub ebar_n: f64,
    /// Evanescent wavenumber inside the barrier; `None` for the delta well.
    pub kprime_n: Option<f64>,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub delta_shift: f64,
    #[serde(rename = "C2_min")]
    pub c2_min: f64,
    pub origin: Provenance,
}

impl Resonance {
    /// Decay exponent per unit rescaled time, `2|F/G|/ħ`.
    pub fn rate_per_tau(&self, consts: &PhysicalConstants) -> f64 {
        2.0 * (self.f / self.g).abs() / consts.hbar()
    }

    /// `γ(t) = 2|F/G| τ(t) / ħ`.
    pub fn gamma(&self, consts: &PhysicalConstants, law: &ScaleLaw, t: f64) -> Result<f64> {
        Ok(self.rate_per_tau(consts) * law.tau_of_t(t)?)
    }

    /// Width `|F/G|` of the Lorentzian peak in rescaled energy.
    pub fn width(&self) -> f64 {
        (self.f / self.g).abs()
    }
}

/// Sampled survival curve `t ↦ (τ, γ, P)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub tau: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    pub provenance: Provenance,
}

impl SurvivalCurve {
    /// Builds a curve with `P = exp(-γ)` from a rate per unit rescaled time.
    pub fn from_rate(
        rate_per_tau: f64,
        law: &ScaleLaw,
        times: &[f64],
        provenance: Provenance,
    ) -> Result<Self> {
        let tau = times
            .iter()
            .map(|&t| law.tau_of_t(t))
            .collect::<Result<Vec<_>>>()?;
        let gamma: Vec<f64> = tau.iter().map(|s| rate_per_tau * s).collect();
        let p = gamma.iter().map(|g| (-g).exp()).collect();
        Ok(Self {
            times: times.to_vec(),
            tau,
            gamma,
            p,
            provenance,
        })
    }
}

fn check_index(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "resonance index starts at 1",
        });
    }
    Ok(())
}

fn regime(condition: &'static str, measured: f64) -> Option<RegimeWarning> {
    (measured < LARGE_STRENGTH_MIN).then_some(RegimeWarning {
        condition,
        measured,
        required: LARGE_STRENGTH_MIN,
    })
}

/// Delta barrier `V̄₀ δ(x̄ - ā)` in front of a hard wall at `x̄ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaModel {
    pub consts: PhysicalConstants,
    strength: f64,
    abar: f64,
}

impl DeltaModel {
    /// `strength` may be zero (free particle); it must not be negative.
    pub fn new(consts: PhysicalConstants, strength: f64, abar: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "V0bar",
                value: strength,
                reason: "must be finite and >= 0",
            });
        }
        Ok(Self {
            consts,
            strength,
            abar: require_positive("abar", abar)?,
        })
    }

    /// Model from the dimensionless strength `2mV̄₀ā/ħ²`.
    pub fn from_dimensionless(consts: PhysicalConstants, s: f64, abar: f64) -> Result<Self> {
        Self::new(consts, s * consts.kinetic_scale() / abar, abar)
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn abar(&self) -> f64 {
        self.abar
    }

    /// `2mV̄₀ā/ħ²`.
    pub fn dimensionless_strength(&self) -> f64 {
        self.consts.two_m_over_hbar2() * self.strength * self.abar
    }

    /// `2mV̄₀/(ħ²k̄)`.
    pub fn beta(&self, kbar: f64) -> f64 {
        self.consts.two_m_over_hbar2() * self.strength / kbar
    }

    fn check_k(kbar: f64) -> Result<()> {
        if kbar.is_finite() && kbar > 0.0 {
            Ok(())
        } else {
            Err(Error::DomainError(format!("kbar must be > 0, got {kbar}")))
        }
    }

    /// Exterior-to-interior amplitude ratio squared.
    pub fn c2(&self, kbar: f64) -> Result<f64> {
        Self::check_k(kbar)?;
        let (s, c) = (kbar * self.abar).sin_cos();
        let inner = c + self.beta(kbar) * s;
        Ok(s * s + inner * inner)
    }

    /// The variant with an extra `ā` in the denominator of the coupling,
    /// `2mV̄₀/(ħ²k̄ā)`. Kept only for comparison.
    pub fn c2_abar_variant(&self, kbar: f64) -> Result<f64> {
        Self::check_k(kbar)?;
        let (s, c) = (kbar * self.abar).sin_cos();
        let inner = c + self.beta(kbar) / self.abar * s;
        Ok(s * s + inner * inner)
    }

    pub fn resonance(&self, n: usize) -> Result<Checked<Resonance>> {
        check_index(n)?;
        let kn = n as f64 * std::f64::consts::PI / self.abar;
        let beta = self.beta(kn);
        let q = 1.0 + beta * beta;
        let m = self.consts.mass();
        let hb2 = self.consts.hbar().powi(2);
        let f2 = 1.0 / q;
        let g2 = (m * self.abar / (hb2 * kn)).powi(2) * q;
        let res = Resonance {
            index_n: n,
            kbar_n: kn,
            ebar_n: self.consts.energy_of(kn),
            kprime_n: None,
            f: f2.sqrt(),
            g: g2.sqrt(),
            delta_shift: 2.0 * self.strength / self.abar / q,
            c2_min: f2,
            origin: Provenance::Analytic,
        };
        Ok(Checked::new(res, regime("2mV0bar/(hbar^2 kbar_n)", beta)))
    }

    pub fn gamma(&self, law: &ScaleLaw, n: usize, t: f64) -> Result<Checked<f64>> {
        let res = self.resonance(n)?;
        let g = res.value.gamma(&self.consts, law, t)?;
        Ok(Checked::new(g, res.warning))
    }

    /// Large-strength static decay rate `ħ⁵(nπ)³ / (2m³a⁴(V̄₀/L₀)²)` with `a = āL₀`.
    pub fn static_rate(&self, law: &ScaleLaw, n: usize) -> Result<Checked<f64>> {
        check_index(n)?;
        let hb = self.consts.hbar();
        let m = self.consts.mass();
        let a = self.abar * law.l0();
        let lab_strength = self.strength / law.l0();
        let npi = n as f64 * std::f64::consts::PI;
        let rate = hb.powi(5) * npi.powi(3) / (2.0 * m.powi(3) * a.powi(4) * lab_strength.powi(2));
        let beta = self.beta(npi / self.abar);
        Ok(Checked::new(rate, regime("2mV0bar/(hbar^2 kbar_n)", beta)))
    }
}

/// Square barrier of height `V̄₀` on `(ā, b̄)` in front of a hard wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierModel {
    pub consts: PhysicalConstants,
    height: f64,
    abar: f64,
    bbar: f64,
}

/// Pre-scan resolution for root bracketing.
const ROOT_SCAN_SAMPLES: usize = 10_000;

impl BarrierModel {
    pub fn new(consts: PhysicalConstants, height: f64, abar: f64, bbar: f64) -> Result<Self> {
        let height = require_positive("V0bar", height)?;
        let abar = require_positive("abar", abar)?;
        let bbar = require_positive("bbar", bbar)?;
        if bbar <= abar {
            return Err(Error::InvalidParameter {
                name: "bbar",
                value: bbar,
                reason: "must exceed abar",
            });
        }
        Ok(Self {
            consts,
            height,
            abar,
            bbar,
        })
    }

    /// Model from the dimensionless height `2mV̄₀ā²/ħ²`.
    pub fn from_dimensionless(consts: PhysicalConstants, s: f64, abar: f64, bbar: f64) -> Result<Self> {
        Self::new(consts, s * consts.kinetic_scale() / (abar * abar), abar, bbar)
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn abar(&self) -> f64 {
        self.abar
    }

    pub fn bbar(&self) -> f64 {
        self.bbar
    }

    /// Largest under-barrier wavenumber `√(2mV̄₀)/ħ`.
    pub fn k_cut(&self) -> f64 {
        (self.consts.two_m_over_hbar2() * self.height).sqrt()
    }

    pub fn kprime(&self, kbar: f64) -> Result<f64> {
        let q2 = self.k_cut().powi(2) - kbar * kbar;
        if !(kbar > 0.0 && q2 > 0.0) {
            return Err(Error::DomainError(format!(
                "kbar = {kbar} is not an under-barrier wavenumber (cut {})",
                self.k_cut()
            )));
        }
        Ok(q2.sqrt())
    }

    pub fn a_coef(&self, kbar: f64) -> Result<f64> {
        let kp = self.kprime(kbar)?;
        let (s, c) = (kbar * self.abar).sin_cos();
        Ok(0.5 * (-kp * self.abar).exp() * (s + kbar / kp * c))
    }

    pub fn b_coef(&self, kbar: f64) -> Result<f64> {
        let kp = self.kprime(kbar)?;
        let (s, c) = (kbar * self.abar).sin_cos();
        Ok(0.5 * (kp * self.abar).exp() * (s - kbar / kp * c))
    }

    pub fn c2(&self, kbar: f64) -> Result<f64> {
        let kp = self.kprime(kbar)?;
        let a = self.a_coef(kbar)?;
        let b = self.b_coef(kbar)?;
        let r = kp * kp / (kbar * kbar);
        let e = (2.0 * kp * self.bbar).exp();
        Ok((1.0 + r) * e * a * a + 2.0 * (1.0 - r) * a * b + (1.0 + r) / e * b * b)
    }

    /// Zeros of `A(k̄)` in `(0, k_cut)`, ascending.
    pub fn roots(&self) -> Vec<f64> {
        let kc = self.k_cut();
        let shape = |k: f64| {
            let kp = (kc * kc - k * k).sqrt();
            let (s, c) = (k * self.abar).sin_cos();
            s + k / kp * c
        };
        let ks: Vec<f64> = (1..=ROOT_SCAN_SAMPLES)
            .map(|j| kc * j as f64 / (ROOT_SCAN_SAMPLES + 1) as f64)
            .collect();
        let mut roots = Vec::new();
        for w in ks.windows(2) {
            let (f0, f1) = (shape(w[0]), shape(w[1]));
            if f0 == 0.0 {
                roots.push(w[0]);
            } else if f0 * f1 < 0.0 {
                roots.push(bisect(shape, w[0], w[1], 0.0));
            }
        }
        roots
    }

    pub fn resonance(&self, n: usize) -> Result<Checked<Resonance>> {
        check_index(n)?;
        let roots = self.roots();
        let k = *roots.get(n - 1).ok_or(Error::NoSuchResonance {
            requested: n,
            available: roots.len(),
        })?;
        let kp = self.kprime(k)?;
        let m = self.consts.mass();
        let hb2 = self.consts.hbar().powi(2);
        let (s, c) = (k * self.abar).sin_cos();
        let thick = 2.0 * kp * (self.bbar - self.abar);
        let g2 = 0.25
            * (m * self.abar / (hb2 * k)).powi(2)
            * (1.0 + kp * kp / (k * k))
            * (c - k / kp * s).powi(2)
            * thick.exp();
        let f2 = (s - k / kp * c).powi(2) / (1.0 + k * k / (kp * kp)) * (-thick).exp();
        let delta = hb2 * k / (m * self.abar)
            * ((k * k - kp * kp) / (k * k + kp * kp))
            * ((kp * s - k * c) / (kp * c - k * s))
            * (-thick).exp();
        let res = Resonance {
            index_n: n,
            kbar_n: k,
            ebar_n: self.consts.energy_of(k),
            kprime_n: Some(kp),
            f: f2.sqrt(),
            g: g2.sqrt(),
            delta_shift: delta,
            c2_min: f2,
            origin: Provenance::Analytic,
        };
        Ok(Checked::new(res, regime("kbar'_n abar", kp * self.abar)))
    }

    /// Closed-form prefactor `8ħ²k̄³/(mā) (k̄'/(k̄²+k̄'²))² e^{-2k̄'(b̄-ā)}`, equal to `2|F/G|`.
    pub fn gamma_prefactor(&self, n: usize) -> Result<f64> {
        let res = self.resonance(n)?.value;
        let (k, kp) = (res.kbar_n, res.kprime_n.unwrap_or_default());
        let hb2 = self.consts.hbar().powi(2);
        Ok(8.0 * hb2 * k.powi(3) / (self.consts.mass() * self.abar)
            * (kp / (k * k + kp * kp)).powi(2)
            * (-2.0 * kp * (self.bbar - self.abar)).exp())
    }

    pub fn gamma(&self, law: &ScaleLaw, n: usize, t: f64) -> Result<Checked<f64>> {
        let pref = self.gamma_prefactor(n)?;
        let warning = self.resonance(n)?.warning;
        Ok(Checked::new(
            pref / self.consts.hbar() * law.tau_of_t(t)?,
            warning,
        ))
    }

    /// Thick, high barrier static rate `8ħk³/(m a k'²) e^{-2k'(b-a)}` in lab units.
    pub fn static_rate(&self, law: &ScaleLaw, n: usize) -> Result<Checked<f64>> {
        let res = self.resonance(n)?;
        let (k, kp, a, b) = self.lab_quantities(law, &res.value);
        let rate = 8.0 * self.consts.hbar() * k.powi(3) / (self.consts.mass() * a * kp * kp)
            * (-2.0 * kp * (b - a)).exp();
        Ok(Checked::new(rate, res.warning))
    }

    /// Static rate without the `k' ≫ k` simplification:
    /// `8ħk³/(m a) (k'/(k²+k'²))² e^{-2k'(b-a)}`.
    pub fn static_rate_full(&self, law: &ScaleLaw, n: usize) -> Result<f64> {
        let res = self.resonance(n)?.value;
        let (k, kp, a, b) = self.lab_quantities(law, &res);
        Ok(8.0 * self.consts.hbar() * k.powi(3) / (self.consts.mass() * a)
            * (kp / (k * k + kp * kp)).powi(2)
            * (-2.0 * kp * (b - a)).exp())
    }

    fn lab_quantities(&self, law: &ScaleLaw, res: &Resonance) -> (f64, f64, f64, f64) {
        let l0 = law.l0();
        (
            res.kbar_n / l0,
            res.kprime_n.unwrap_or_default() / l0,
            self.abar * l0,
            self.bbar * l0,
        )
    }
}

/// `γ(t) = Γ(Ēₙ) τ(t)` for any rescaled-frame rate function.
pub fn general_gamma(
    static_rate_fn: impl Fn(f64) -> f64,
    law: &ScaleLaw,
    ebar_n: f64,
    t: f64,
) -> Result<f64> {
    Ok(static_rate_fn(ebar_n) * law.tau_of_t(t)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn nat() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn delta_c2_examples() {
        let free = DeltaModel::new(nat(), 0.0, 1.0).unwrap();
        for k in [0.3, 1.0, 7.7] {
            assert!((free.c2(k).unwrap() - 1.0).abs() < 1e-14);
        }
        let m = DeltaModel::new(nat(), 100.0, 1.0).unwrap();
        assert!((m.c2(2.0 * PI).unwrap() - 1.0).abs() < 1e-12);
        assert!(m.c2(0.0).is_err());
    }

    #[test]
    fn delta_resonance_substitution() {
        let m = DeltaModel::new(nat(), 100.0, 1.0).unwrap();
        let r = m.resonance(1).unwrap();
        assert!(r.warning.is_none());
        let r = r.value;
        assert_eq!(r.kbar_n, PI);
        let f2 = 1.0 / (1.0 + (200.0 / PI).powi(2));
        assert!((r.f * r.f - f2).abs() < 1e-15);
        assert!((r.c2_min - r.f * r.f).abs() < 1e-18);
        assert!(m.resonance(0).is_err());
    }

    #[test]
    fn delta_small_strength_warns() {
        let m = DeltaModel::from_dimensionless(nat(), 10.0, 1.0).unwrap();
        assert!(m.resonance(1).unwrap().warning.is_some());
    }

    #[test]
    fn delta_f_vanishes_for_huge_strength() {
        let m = DeltaModel::new(nat(), 1e9, 1.0).unwrap();
        let r = m.resonance(1).unwrap().value;
        assert!((r.f - PI / 2e9).abs() / r.f < 1e-9);
    }

    #[test]
    fn delta_static_rate_values() {
        let m = DeltaModel::new(nat(), 100.0, 1.0).unwrap();
        let law = ScaleLaw::new(1.0, 0.0).unwrap();
        let g1 = m.static_rate(&law, 1).unwrap().value;
        assert!((g1 - PI.powi(3) / 2e4).abs() < 1e-15);
        let g2 = m.static_rate(&law, 2).unwrap().value;
        assert!((g2 / g1 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn delta_gamma_examples() {
        let m = DeltaModel::new(nat(), 100.0, 1.0).unwrap();
        let law = ScaleLaw::new(1.0, 1.0).unwrap();
        assert_eq!(m.gamma(&law, 1, 0.0).unwrap().value, 0.0);
        let r = m.resonance(1).unwrap().value;
        let plateau = 2.0 * r.f / r.g;
        assert!((m.gamma(&law, 1, 1e12).unwrap().value - plateau).abs() < 1e-10 * plateau);
    }

    #[test]
    fn barrier_coefficients() {
        let m = BarrierModel::from_dimensionless(nat(), 40.0, 1.0, 2.0).unwrap();
        for k in [0.5, 2.0, 4.4, 6.0] {
            let kp = m.kprime(k).unwrap();
            let lhs = m.a_coef(k).unwrap() * (kp).exp() + m.b_coef(k).unwrap() * (-kp).exp();
            assert!((lhs - k.sin()).abs() < 1e-12);
            assert!(m.c2(k).unwrap() >= 0.0);
        }
        assert!(m.a_coef(1e-6).unwrap() > 0.0);
        assert!(m.kprime(40f64.sqrt()).is_err());
    }

    #[test]
    fn barrier_roots_fig2() {
        let m = BarrierModel::from_dimensionless(nat(), 40.0, 1.0, 2.0).unwrap();
        let roots = m.roots();
        assert_eq!(roots.len(), 2);
        for &k in &roots {
            assert!(m.a_coef(k).unwrap().abs() < 1e-12);
            assert!((k).tan() < 0.0);
            let kp = m.kprime(k).unwrap();
            assert!(((k).tan() + k / kp).abs() < 1e-9);
        }
        assert!(matches!(
            m.resonance(3),
            Err(Error::NoSuchResonance { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn barrier_prefactor_is_two_f_over_g() {
        let m = BarrierModel::from_dimensionless(nat(), 40.0, 1.0, 2.0).unwrap();
        for n in 1..=2 {
            let r = m.resonance(n).unwrap().value;
            let pref = m.gamma_prefactor(n).unwrap();
            assert!((2.0 * r.f / r.g - pref).abs() < 1e-12 * pref);
        }
    }

    #[test]
    fn general_gamma_composition() {
        let law = ScaleLaw::new(1.3, 0.2).unwrap();
        let m = DeltaModel::new(nat(), 100.0, 1.0).unwrap();
        let r = m.resonance(1).unwrap().value;
        let rate = r.rate_per_tau(&nat());
        let via = general_gamma(|_| rate, &law, r.ebar_n, 3.0).unwrap();
        assert_eq!(via, m.gamma(&law, 1, 3.0).unwrap().value);
        assert_eq!(general_gamma(|_| 0.0, &law, 1.0, 5.0).unwrap(), 0.0);
    }
}
