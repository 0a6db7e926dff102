//! Plane-wave transfer matrices for piecewise-constant potentials with delta
//! points. Used as a code path independent of the ODE integrator.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::PhysicalConstants;

/// One interface at position `x`: the potential to its right and an optional
/// delta strength sitting on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interface {
    pub x: f64,
    pub delta_strength: f64,
    pub v_right: f64,
}

/// Maps plane-wave coefficients `(α, β)` to `(ψ, ψ')` at `x`.
fn wave_matrix(q: Complex64, x: f64) -> Matrix2<Complex64> {
    let i = Complex64::i();
    let ep = (i * q * x).exp();
    let em = (-i * q * x).exp();
    Matrix2::new(ep, em, i * q * ep, -i * q * em)
}

fn local_wavenumber(consts: &PhysicalConstants, energy: f64, v: f64) -> Complex64 {
    Complex64::new(consts.two_m_over_hbar2() * (energy - v), 0.0).sqrt()
}

/// Exterior amplitude squared `C²` for the solution that starts as
/// `sin(k̄x̄)` at a hard wall in a region where `V = 0`.
///
/// Interfaces must be sorted and the last region must be free (`V = 0`).
pub fn exterior_c2(consts: &PhysicalConstants, kbar: f64, interfaces: &[Interface]) -> Result<f64> {
    if !(kbar > 0.0) {
        return Err(Error::DomainError(format!("kbar must be > 0, got {kbar}")));
    }
    if interfaces.last().is_some_and(|s| s.v_right != 0.0) {
        return Err(Error::DomainError("last region must be free".into()));
    }
    let energy = consts.energy_of(kbar);
    let half_i = Complex64::new(0.0, 0.5);
    // sin(kx) = (e^{ikx} - e^{-ikx}) / 2i
    let mut coef = Vector2::new(-half_i, half_i);
    let mut q = Complex64::new(kbar, 0.0);
    for s in interfaces {
        let jump = Matrix2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(consts.two_m_over_hbar2() * s.delta_strength, 0.0),
            Complex64::new(1.0, 0.0),
        );
        let q_next = local_wavenumber(consts, energy, s.v_right);
        let inv = wave_matrix(q_next, s.x)
            .try_inverse()
            .ok_or_else(|| Error::DomainError(format!("degenerate interface at x = {}", s.x)))?;
        coef = inv * jump * wave_matrix(q, s.x) * coef;
        q = q_next;
    }
    // real solution: α e^{ikx} + conj(α) e^{-ikx} = 2|α| cos(kx + arg α)
    Ok(4.0 * coef[0].norm_sqr())
}
