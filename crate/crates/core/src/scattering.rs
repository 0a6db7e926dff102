//! Real stationary scattering states of the rescaled problem, the `C²(k̄)`
//! landscape, resonance extraction and the confined-state assembly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{BarrierModel, DeltaModel, Provenance, Resonance, SurvivalCurve};
use crate::error::{require_positive, Error, Result};
use crate::numerics::{bisect, golden_section, interp_linear, parabolic_vertex, trapezoid};
use crate::scaling_frame::ScaleLaw;
use crate::units::PhysicalConstants;

/// Points per shortest length scale demanded of the integrator grid.
pub const MIN_POINTS_PER_SCALE: usize = 20;
/// Relative depth a sampled dip must have to count as a minimum.
pub const MINIMUM_NOISE_FLOOR: f64 = 1e-8;
pub const MINIMUM_RTOL: f64 = 1e-10;

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PotentialKind {
    Delta { position: f64, strength: f64 },
    SquareBarrier { height: f64, start: f64, end: f64 },
    Generic { evaluator: Evaluator },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Delta { position, strength } => f
                .debug_struct("Delta")
                .field("position", position)
                .field("strength", strength)
                .finish(),
            Self::SquareBarrier { height, start, end } => f
                .debug_struct("SquareBarrier")
                .field("height", height)
                .field("start", start)
                .field("end", end)
                .finish(),
            Self::Generic { .. } => f.write_str("Generic"),
        }
    }
}

/// Static potential `V̄(x̄)` with a hard wall at 0 and `V̄ = 0` beyond `support_end`.
#[derive(Debug, Clone)]
pub struct RescaledPotential {
    kind: PotentialKind,
    support_end: f64,
    well_end: f64,
    breakpoints: Vec<f64>,
    max_height: f64,
}

impl RescaledPotential {
    pub fn delta(strength: f64, abar: f64) -> Result<Self> {
        let model = DeltaModel::new(PhysicalConstants::default(), strength, abar)?;
        Ok(Self::from(&model))
    }

    pub fn square_barrier(height: f64, abar: f64, bbar: f64) -> Result<Self> {
        let model = BarrierModel::new(PhysicalConstants::default(), height, abar, bbar)?;
        Ok(Self::from(&model))
    }

    /// Arbitrary potential. `breakpoints` lists discontinuities inside
    /// `(0, support_end)`; `well_end` bounds the confining region.
    pub fn generic(
        evaluator: Evaluator,
        support_end: f64,
        well_end: f64,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        let support_end = require_positive("support_end", support_end)?;
        let well_end = require_positive("well_end", well_end)?;
        if well_end > support_end {
            return Err(Error::InvalidParameter {
                name: "well_end",
                value: well_end,
                reason: "must not exceed support_end",
            });
        }
        let mut bp: Vec<f64> = breakpoints
            .into_iter()
            .chain([well_end, support_end])
            .filter(|&b| b > 0.0 && b <= support_end)
            .collect();
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let max_height = (1..=1000)
            .map(|j| evaluator(support_end * j as f64 / 1000.0).abs())
            .fold(0.0, f64::max);
        if !max_height.is_finite() {
            return Err(Error::DomainError("potential is not finite on its support".into()));
        }
        Ok(Self {
            kind: PotentialKind::Generic { evaluator },
            support_end,
            well_end,
            breakpoints: bp,
            max_height,
        })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn well_end(&self) -> f64 {
        self.well_end
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Largest `|V̄|` on the support, excluding delta points.
    pub fn max_height(&self) -> f64 {
        self.max_height
    }

    /// Regular part of `V̄(x̄)`; delta points are reported by [`Self::delta_points`].
    pub fn smooth_value(&self, x: f64) -> f64 {
        if x <= 0.0 || x > self.support_end {
            return 0.0;
        }
        match &self.kind {
            PotentialKind::Delta { .. } => 0.0,
            PotentialKind::SquareBarrier { height, start, end } => {
                if x > *start && x <= *end {
                    *height
                } else {
                    0.0
                }
            }
            PotentialKind::Generic { evaluator } => evaluator(x),
        }
    }

    /// `(position, strength)` of every delta point.
    pub fn delta_points(&self) -> Vec<(f64, f64)> {
        match self.kind {
            PotentialKind::Delta { position, strength } => vec![(position, strength)],
            _ => Vec::new(),
        }
    }

    fn delta_at(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::Delta { position, strength } if position == x => strength,
            _ => 0.0,
        }
    }

    /// Under-barrier wavenumber cut `√(2m max V̄)/ħ`, if the potential has a finite top.
    pub fn k_cut(&self, consts: &PhysicalConstants) -> Option<f64> {
        (self.max_height > 0.0).then(|| (consts.two_m_over_hbar2() * self.max_height).sqrt())
    }

    fn segments(&self) -> Vec<(f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints.iter().copied());
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

impl From<&DeltaModel> for RescaledPotential {
    fn from(m: &DeltaModel) -> Self {
        Self {
            kind: PotentialKind::Delta {
                position: m.abar(),
                strength: m.strength(),
            },
            support_end: m.abar(),
            well_end: m.abar(),
            breakpoints: vec![m.abar()],
            max_height: 0.0,
        }
    }
}

impl From<&BarrierModel> for RescaledPotential {
    fn from(m: &BarrierModel) -> Self {
        Self {
            kind: PotentialKind::SquareBarrier {
                height: m.height(),
                start: m.abar(),
                end: m.bbar(),
            },
            support_end: m.bbar(),
            well_end: m.abar(),
            breakpoints: vec![m.abar(), m.bbar()],
            max_height: m.height(),
        }
    }
}

/// Real solution at wavenumber `k̄`: sampled on `[0, x̄_max]`, `C cos(k̄x̄ + θ)` beyond.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringState {
    pub kbar: f64,
    pub ebar: f64,
    pub x: Vec<f64>,
    pub interior: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub theta: f64,
    /// Prüfer angle of `(Φ, Φ'/k̄)` at `x̄_max`, continuous from 0 at the wall.
    pub prufer_phase: f64,
}

impl ScatteringState {
    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap_or(&0.0)
    }

    pub fn c2(&self) -> f64 {
        self.c * self.c
    }

    pub fn value_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x <= self.x_max() {
            interp_linear(&self.x, &self.interior, x)
        } else {
            self.c * (self.kbar * x + self.theta).cos()
        }
    }

    /// `∫₀^R Φ²`, with the exterior part done in closed form.
    pub fn norm_squared_to(&self, r: f64) -> f64 {
        let sq: Vec<f64> = self.interior.iter().map(|p| p * p).collect();
        let inner = trapezoid(&self.x, &sq);
        let (k, th, xm) = (self.kbar, self.theta, self.x_max());
        let outer = self.c2()
            * (0.5 * (r - xm) + ((2.0 * (k * r + th)).sin() - (2.0 * (k * xm + th)).sin()) / (4.0 * k));
        inner + outer
    }
}

struct Shot {
    phi: f64,
    dphi: f64,
    nodes: usize,
    samples: Option<(Vec<f64>, Vec<f64>)>,
}

fn check_resolution(pot: &RescaledPotential, consts: &PhysicalConstants, kbar: f64, h: f64) -> Result<()> {
    if !(kbar.is_finite() && kbar > 0.0) {
        return Err(Error::DomainError(format!("kbar must be > 0, got {kbar}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "grid_step",
            value: h,
            reason: "must be finite and > 0",
        });
    }
    let e = consts.energy_of(kbar);
    let q2 = consts.two_m_over_hbar2() * (pot.max_height + e).max(pot.max_height - e).max(e);
    let scale = (2.0 * PI / q2.sqrt()).min(pot.support_end);
    if h * MIN_POINTS_PER_SCALE as f64 > scale {
        return Err(Error::ResolutionError {
            step: h,
            scale,
            min_points: MIN_POINTS_PER_SCALE,
        });
    }
    Ok(())
}

/// Numerov shooting from the hard wall to `support_end`, segment by segment.
fn shoot(pot: &RescaledPotential, consts: &PhysicalConstants, kbar: f64, h: f64, record: bool) -> Shot {
    let energy = consts.energy_of(kbar);
    let s = consts.two_m_over_hbar2();
    let (mut phi, mut dphi) = (0.0, kbar);
    let mut nodes = 0;
    let mut xs_out = Vec::new();
    let mut ps_out = Vec::new();
    if record {
        xs_out.push(0.0);
        ps_out.push(0.0);
    }
    let mut buf = Vec::new();
    for (x0, x1) in pot.segments() {
        let len = x1 - x0;
        let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
        let hs = len / n as f64;
        let eps = 1e-9 * hs;
        let f = |x: f64| s * (pot.smooth_value(x.clamp(x0 + eps, x1 - eps)) - energy);
        let w = hs * hs / 12.0;
        // a(x) = 1 - h²f/12 for j = -1..=n+1
        let fv: Vec<f64> = (0..n + 3).map(|j| f(x0 + (j as f64 - 1.0) * hs)).collect();
        let a = |j: usize| 1.0 - w * fv[j];
        let b = |j: usize| 1.0 - 2.0 * w * fv[j];
        buf.clear();
        buf.resize(n + 2, 0.0);
        buf[0] = phi;
        let r1 = 2.0 * (1.0 + 5.0 * w * fv[1]) * phi;
        let r2 = 2.0 * hs * dphi;
        buf[1] = (r1 * b(0) + a(0) * r2) / (a(2) * b(0) + a(0) * b(2));
        // summed form: y = aΦ, D_j = y_{j+1} - y_j, D_j = D_{j-1} + h² f_j Φ_j
        let h2s = hs * hs;
        let mut y = a(2) * buf[1];
        let mut d = y - a(1) * buf[0];
        let mut d_prev = d;
        for j in 1..=n {
            d_prev = d;
            d += h2s * fv[j + 1] * buf[j];
            y += d;
            buf[j + 1] = y / a(j + 2);
        }
        for j in 0..n {
            if (buf[j] >= 0.0) != (buf[j + 1] >= 0.0) {
                nodes += 1;
            }
        }
        if record {
            for j in 1..=n {
                xs_out.push(if j == n { x1 } else { x0 + j as f64 * hs });
                ps_out.push(buf[j]);
            }
        }
        phi = buf[n];
        // bΦ = 2y - Φ, so b₊Φ₊ - b₋Φ₋ = 2(D_n + D_{n-1}) - (Φ₊ - Φ₋)
        dphi = (2.0 * (d + d_prev) - (buf[n + 1] - buf[n - 1])) / (2.0 * hs);
        dphi += s * pot.delta_at(x1) * phi;
    }
    Shot {
        phi,
        dphi,
        nodes,
        samples: record.then_some((xs_out, ps_out)),
    }
}

fn prufer(shot: &Shot, kbar: f64) -> f64 {
    PI * shot.nodes as f64 + shot.phi.atan2(shot.dphi / kbar).rem_euclid(PI)
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Integrates the rescaled stationary equation from `Φ(0) = 0, Φ'(0) = k̄`.
pub fn integrate_state(
    pot: &RescaledPotential,
    consts: &PhysicalConstants,
    kbar: f64,
    grid_step: f64,
) -> Result<ScatteringState> {
    check_resolution(pot, consts, kbar, grid_step)?;
    let shot = shoot(pot, consts, kbar, grid_step, true);
    let prufer_phase = prufer(&shot, kbar);
    let (x, interior) = shot.samples.unwrap_or_default();
    let xm = pot.support_end;
    let q = shot.dphi / kbar;
    Ok(ScatteringState {
        kbar,
        ebar: consts.energy_of(kbar),
        x,
        interior,
        c: shot.phi.hypot(q),
        theta: wrap_angle((-q).atan2(shot.phi) - kbar * xm),
        prufer_phase,
    })
}

/// `C²(k̄) = Φ(x̄_max)² + (Φ'(x̄_max)/k̄)²` without storing samples.
pub fn c2_at(pot: &RescaledPotential, consts: &PhysicalConstants, kbar: f64, grid_step: f64) -> Result<f64> {
    check_resolution(pot, consts, kbar, grid_step)?;
    let shot = shoot(pot, consts, kbar, grid_step, false);
    Ok(shot.phi.powi(2) + (shot.dphi / kbar).powi(2))
}

/// `C²` on `n_samples` equally spaced wavenumbers spanning `kbar_range`.
pub fn scan_c2(
    pot: &RescaledPotential,
    consts: &PhysicalConstants,
    kbar_range: (f64, f64),
    n_samples: usize,
    grid_step: f64,
) -> Result<Vec<(f64, f64)>> {
    let (k0, k1) = kbar_range;
    if !(k0 > 0.0 && k1 > k0 && k1.is_finite()) || n_samples < 2 {
        return Err(Error::DomainError(format!(
            "scan needs 0 < kmin < kmax and at least two samples, got ({k0}, {k1}) with {n_samples}"
        )));
    }
    (0..n_samples)
        .into_par_iter()
        .map(|j| {
            let k = k0 + (k1 - k0) * j as f64 / (n_samples - 1) as f64;
            c2_at(pot, consts, k, grid_step).map(|c| (k, c))
        })
        .collect()
}

/// A sampled local minimum of `C²`: the three samples around it and the
/// current best estimate of its position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimumBracket {
    /// 1-based ordinal among the minima of the scan.
    pub index: usize,
    pub k_lo: f64,
    pub k_hi: f64,
    pub k_min: f64,
    pub c2_min: f64,
}

/// Interior samples lower than both neighbours by more than the noise floor.
pub fn locate_minima(scan: &[(f64, f64)]) -> Vec<MinimumBracket> {
    let mut out = Vec::new();
    for w in scan.windows(3) {
        let [(x0, y0), (x1, y1), (x2, y2)] = [w[0], w[1], w[2]];
        let floor = MINIMUM_NOISE_FLOOR * y1.abs().max(f64::MIN_POSITIVE);
        if y1 < y0 - floor && y1 < y2 - floor {
            let k = parabolic_vertex([x0, x1, x2], [y0, y1, y2]).clamp(x0, x2);
            out.push(MinimumBracket {
                index: out.len() + 1,
                k_lo: x0,
                k_hi: x2,
                k_min: k,
                c2_min: y1,
            });
        }
    }
    out
}

/// Golden-section refinement of a bracketed minimum on the true `C²`.
pub fn refine_minimum(
    pot: &RescaledPotential,
    consts: &PhysicalConstants,
    bracket: &MinimumBracket,
    grid_step: f64,
) -> Result<MinimumBracket> {
    c2_at(pot, consts, bracket.k_lo, grid_step)?;
    c2_at(pot, consts, bracket.k_hi, grid_step)?;
    let f = |k: f64| c2_at(pot, consts, k, grid_step).unwrap_or(f64::INFINITY);
    let (k, c) = golden_section(f, bracket.k_lo, bracket.k_hi, MINIMUM_RTOL);
    Ok(MinimumBracket {
        k_min: k,
        c2_min: c,
        ..*bracket
    })
}

/// Scan, locate and refine every minimum of `C²` in a range.
pub fn find_minima(
    pot: &RescaledPotential,
    consts: &PhysicalConstants,
    kbar_range: (f64, f64),
    n_samples: usize,
    grid_step: f64,
) -> Result<Vec<MinimumBracket>> {
    let scan = scan_c2(pot, consts, kbar_range, n_samples, grid_step)?;
    locate_minima(&scan)
        .par_iter()
        .map(|b| refine_minimum(pot, consts, b, grid_step))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub grid_step: f64,
    pub samples: usize,
    pub residual_threshold: f64,
    /// Window half-width in units of the estimated resonance width `F/G`.
    pub window_widths: f64,
    /// Energy that `δ` is measured from; the fitted centre when absent.
    pub reference_energy: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid_step: 1e-4,
            samples: 41,
            residual_threshold: 1e-3,
            window_widths: 1.0,
            reference_energy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceFit {
    pub resonance: Resonance,
    pub fit_window: (f64, f64),
    pub residual: f64,
    pub samples_used: usize,
    /// Wavenumber of the fitted minimum of `C²`.
    pub k_argmin: f64,
}

/// Quadratic model `F² + G²(E - E_c)²` fitted to energy samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub f2: f64,
    pub g2: f64,
    pub e_center: f64,
    /// RMS misfit divided by `F²`.
    pub residual: f64,
}

/// Least-squares fit of `F² + G²(E - E_c)²`, first linear then
/// Levenberg-Marquardt in `(ln F², ln G², E_c)`.
pub fn fit_quadratic(energies: &[f64], c2: &[f64]) -> Result<QuadraticFit> {
    let n = energies.len();
    if n < 7 || c2.len() != n {
        return Err(Error::DomainError(format!("need at least 7 paired samples, got {n}")));
    }
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (e0, hw) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let ys = c2.iter().copied().fold(f64::INFINITY, f64::min).abs().max(f64::MIN_POSITIVE);
    let e: Vec<f64> = energies.iter().map(|x| (x - e0) / hw).collect();
    let y: Vec<f64> = c2.iter().map(|v| v / ys).collect();
    let design = DMatrix::from_fn(n, 3, |i, j| e[i].powi(j as i32));
    let coef = design
        .svd(true, true)
        .solve(&DVector::from_column_slice(&y), 1e-14)
        .map_err(|m| Error::DomainError(m.to_string()))?;
    let (c0, c1, c2q) = (coef[0], coef[1], coef[2]);
    if !(c2q > 0.0) {
        return Err(Error::FitDiverged {
            residual: f64::INFINITY,
            threshold: 0.0,
        });
    }
    let mut ec = -c1 / (2.0 * c2q);
    let mut f2 = c0 - c1 * c1 / (4.0 * c2q);
    if !(f2 > 0.0) {
        f2 = y.iter().copied().fold(f64::INFINITY, f64::min).max(1e-300);
    }
    let mut p = Vector3::new(f2.ln(), c2q.ln(), ec);
    let model = |p: &Vector3<f64>, x: f64| p[0].exp() + p[1].exp() * (x - p[2]).powi(2);
    let cost = |p: &Vector3<f64>| e.iter().zip(&y).map(|(&x, &v)| (model(p, x) - v).powi(2)).sum::<f64>();
    let mut lambda = 1e-3;
    let mut c = cost(&p);
    for _ in 0..200 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&x, &v) in e.iter().zip(&y) {
            let (a, g) = (p[0].exp(), p[1].exp());
            let d = x - p[2];
            let row = Vector3::new(a, g * d * d, -2.0 * g * d);
            jtj += row * row.transpose();
            jtr += row * (model(&p, x) - v);
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p - step;
            let ct = cost(&trial);
            if ct.is_finite() && ct <= c {
                let rel = (c - ct) / c.max(f64::MIN_POSITIVE);
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    f2 = p[0].exp();
    ec = p[2];
    let rms = (c / n as f64).sqrt();
    Ok(QuadraticFit {
        f2: f2 * ys,
        g2: p[1].exp() * ys / (hw * hw),
        e_center: e0 + ec * hw,
        residual: rms / f2,
    })
}

/// Fits `C²(Ē) ≈ G²(Δ+δ)² + F²` around a refined minimum.
///
/// With `window_halfwidth = None` the half-width is `options.window_widths`
/// times the width `F/G` estimated from the local curvature.
pub fn fit_resonance(
    pot: &RescaledPotential,
    consts: &PhysicalConstants,
    bracket: &MinimumBracket,
    window_halfwidth: Option<f64>,
    options: &FitOptions,
) -> Result<ResonanceFit> {
    if options.samples < 7 {
        return Err(Error::InvalidParameter {
            name: "samples",
            value: options.samples as f64,
            reason: "fit needs at least 7 samples",
        });
    }
    let h = options.grid_step;
    let c2e = |e: f64| -> Result<f64> {
        if e <= 0.0 {
            return Err(Error::WindowTooWide(format!("window reaches non-positive energy {e}")));
        }
        c2_at(pot, consts, consts.wavenumber_of(e), h)
    };
    let e_min = consts.energy_of(bracket.k_min);
    let c_min = c2e(e_min)?;
    let halfwidth = match window_halfwidth {
        Some(w) => require_positive("window_halfwidth", w)?,
        None => {
            let mut de = 0.25 * (consts.energy_of(bracket.k_hi) - consts.energy_of(bracket.k_lo));
            for _ in 0..6 {
                let curv = 0.5 * (c2e(e_min + de)? + c2e(e_min - de)?) - c_min;
                if !(curv > 0.0) {
                    break;
                }
                let width = c_min.sqrt() * de / curv.sqrt();
                let done = (width / de - 1.0).abs() < 0.05;
                de = width;
                if done {
                    break;
                }
            }
            options.window_widths * de
        }
    };
    let n = options.samples;
    let energies: Vec<f64> = (0..n)
        .map(|j| e_min - halfwidth + 2.0 * halfwidth * j as f64 / (n - 1) as f64)
        .collect();
    let values = energies
        .par_iter()
        .map(|&e| c2e(e))
        .collect::<Result<Vec<f64>>>()?;
    let dips = values
        .windows(3)
        .filter(|w| w[1] < w[0] && w[1] < w[2])
        .count();
    let argmin = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if dips > 1 || argmin == 0 || argmin == n - 1 {
        return Err(Error::WindowTooWide(format!(
            "window [{}, {}] holds {dips} minima, lowest sample at position {argmin} of {n}",
            energies[0],
            energies[n - 1]
        )));
    }
    let q = fit_quadratic(&energies, &values)?;
    if !(q.residual <= options.residual_threshold) {
        return Err(Error::FitDiverged {
            residual: q.residual,
            threshold: options.residual_threshold,
        });
    }
    let e_ref = options.reference_energy.unwrap_or(q.e_center);
    let kprime_n = match pot.kind() {
        PotentialKind::SquareBarrier { height, .. } => {
            Some(consts.wavenumber_of((height - e_ref).max(0.0)))
        }
        _ => None,
    };
    Ok(ResonanceFit {
        resonance: Resonance {
            index_n: bracket.index,
            kbar_n: consts.wavenumber_of(e_ref),
            ebar_n: e_ref,
            kprime_n,
            f: q.f2.sqrt(),
            g: q.g2.sqrt(),
            delta_shift: e_ref - q.e_center,
            c2_min: q.f2,
            origin: Provenance::Fitted,
        },
        fit_window: (energies[0], energies[n - 1]),
        residual: q.residual,
        samples_used: n,
        k_argmin: consts.wavenumber_of(q.e_center),
    })
}

/// Superposition of box-quantised scattering states approximating a state
/// confined in the well.
#[derive(Debug, Clone, Serialize)]
pub struct AssembledState {
    pub box_length_r: f64,
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub member_states: Vec<ScatteringState>,
    /// `∫₀^R Φ_j²` for each member; member `j` enters as `Φ_j / norm_j`.
    pub member_norms: Vec<f64>,
    pub confinement_leak: f64,
    /// `|⟨φₙ|Ψ⟩|²` for the normalised assembled state.
    pub target_overlap: f64,
    pub target_wavenumber: f64,
}

impl AssembledState {
    /// Assembled (unnormalised) state at `x̄`.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.box_length_r {
            return 0.0;
        }
        self.member_states
            .iter()
            .zip(&self.weights)
            .zip(&self.member_norms)
            .map(|((s, c), n)| c * s.value_at(x) / n)
            .sum()
    }
}

/// Normalised `sin(k x̄)` on `(0, well_end)`; zero outside.
pub fn target_profile(k: f64, well_end: f64) -> impl Fn(f64) -> f64 {
    let norm2 = 0.5 * well_end - (2.0 * k * well_end).sin() / (4.0 * k);
    let scale = 1.0 / norm2.sqrt();
    move |x| {
        if x > 0.0 && x < well_end {
            scale * (k * x).sin()
        } else {
            0.0
        }
    }
}

/// Interior wavenumber of the confined target for a resonance: `nπ/ā` for a
/// delta well, the resonance wavenumber otherwise.
pub fn target_wavenumber(pot: &RescaledPotential, resonance: &Resonance) -> f64 {
    match pot.kind() {
        PotentialKind::Delta { .. } => resonance.index_n as f64 * PI / pot.well_end(),
        _ => resonance.kbar_n,
    }
}

/// Box eigen-wavenumber with `Φ(R) = 0` and `j + 1` total half-turns.
fn box_wavenumber(
    pot: &RescaledPotential,
    consts: &PhysicalConstants,
    r: f64,
    j: usize,
    h: f64,
) -> f64 {
    let xm = pot.support_end;
    let target = (j + 1) as f64 * PI;
    let phase = |k: f64| prufer(&shoot(pot, consts, k, h, false), k) + k * (r - xm) - target;
    let hi = target / (r - xm);
    let mut lo = target / r;
    for _ in 0..60 {
        if phase(lo) <= 0.0 {
            break;
        }
        lo *= 0.5;
    }
    bisect(phase, lo, hi, 1e-15 * hi)
}

/// Projects the target `φₙ` onto `n_members` box-quantised scattering states
/// centred on the resonance.
pub fn assemble_confined_state(
    pot: &RescaledPotential,
    consts: &PhysicalConstants,
    resonance: &Resonance,
    box_length_r: f64,
    n_members: usize,
    grid_step: f64,
) -> Result<AssembledState> {
    let required = 50.0 * pot.well_end();
    if !(box_length_r >= required && box_length_r > pot.support_end) {
        return Err(Error::BoxTooSmall {
            length: box_length_r,
            required,
        });
    }
    if n_members == 0 {
        return Err(Error::InvalidParameter {
            name: "n_members",
            value: 0.0,
            reason: "need at least one member",
        });
    }
    let xm = pot.support_end;
    let kc = consts.wavenumber_of((resonance.ebar_n - resonance.delta_shift).max(0.0));
    check_resolution(pot, consts, kc.max(f64::MIN_POSITIVE), grid_step)?;
    let centre_phase = prufer(&shoot(pot, consts, kc, grid_step, false), kc) + kc * (box_length_r - xm);
    let jc = ((centre_phase / PI - 1.0).round().max(0.0)) as usize;
    let j0 = jc.saturating_sub((n_members - 1) / 2);
    let members: Vec<ScatteringState> = (j0..j0 + n_members)
        .into_par_iter()
        .map(|j| {
            let k = box_wavenumber(pot, consts, box_length_r, j, grid_step);
            integrate_state(pot, consts, k, grid_step)
        })
        .collect::<Result<_>>()?;

    let kt = target_wavenumber(pot, resonance);
    let we = pot.well_end();
    let phi_t = target_profile(kt, we);
    let x = &members[0].x;
    let n_in = x.partition_point(|&v| v <= we);
    let xin = &x[..n_in];
    let target: Vec<f64> = xin.iter().map(|&v| phi_t(v)).collect();
    let norms: Vec<f64> = members.iter().map(|s| s.norm_squared_to(box_length_r).sqrt()).collect();
    let weights: Vec<f64> = members
        .iter()
        .zip(&norms)
        .map(|(s, n)| {
            let prod: Vec<f64> = s.interior[..n_in].iter().zip(&target).map(|(a, b)| a * b).collect();
            trapezoid(xin, &prod) / n
        })
        .collect();
    let mut psi = vec![0.0; n_in];
    for ((s, c), n) in members.iter().zip(&weights).zip(&norms) {
        for (p, v) in psi.iter_mut().zip(&s.interior[..n_in]) {
            *p += c * v / n;
        }
    }
    let total: f64 = weights.iter().map(|c| c * c).sum();
    let inside = trapezoid(xin, &psi.iter().map(|p| p * p).collect::<Vec<_>>());
    Ok(AssembledState {
        box_length_r,
        weights,
        member_states: members,
        member_norms: norms,
        confinement_leak: 1.0 - inside / total,
        target_overlap: total,
        target_wavenumber: kt,
    })
}

/// `γ(t) = 2|F/G| τ(t)/ħ` and `P = e^{-γ}` for a resonance.
pub fn survival_curve(
    resonance: &Resonance,
    consts: &PhysicalConstants,
    law: &ScaleLaw,
    times: &[f64],
) -> Result<SurvivalCurve> {
    SurvivalCurve::from_rate(resonance.rate_per_tau(consts), law, times, resonance.origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn free_state_is_sine() {
        let pot = RescaledPotential::delta(0.0, 1.0).unwrap();
        let s = integrate_state(&pot, &nat(), 2.3, 1e-3).unwrap();
        assert!((s.c - 1.0).abs() < 1e-10);
        assert!((s.theta + PI / 2.0).abs() < 1e-9);
        assert!((s.prufer_phase - 2.3).abs() < 1e-9);
    }

    #[test]
    fn delta_matches_closed_form() {
        let model = DeltaModel::new(nat(), 7.0, 1.3).unwrap();
        let pot = RescaledPotential::from(&model);
        for k in [0.4, 2.0, 5.5, 11.0] {
            let num = c2_at(&pot, &nat(), k, 2e-4).unwrap();
            let exact = model.c2(k).unwrap();
            assert!((num - exact).abs() < 1e-8 * exact, "k={k}: {num} vs {exact}");
        }
    }

    #[test]
    fn coarse_step_is_rejected() {
        let pot = RescaledPotential::delta(1.0, 1.0).unwrap();
        assert!(matches!(
            integrate_state(&pot, &nat(), 50.0, 0.1),
            Err(Error::ResolutionError { .. })
        ));
        assert!(matches!(integrate_state(&pot, &nat(), 0.0, 1e-3), Err(Error::DomainError(_))));
    }

    #[test]
    fn parabola_vertex_recovered() {
        let scan: Vec<(f64, f64)> = (0..50)
            .map(|j| {
                let k = 0.1 * j as f64;
                (k, 2.0 + 3.0 * (k - 2.345_678).powi(2))
            })
            .collect();
        let m = locate_minima(&scan);
        assert_eq!(m.len(), 1);
        assert!((m[0].k_min - 2.345_678).abs() < 1e-9);
        let mono: Vec<(f64, f64)> = (0..50).map(|j| (j as f64, j as f64)).collect();
        assert!(locate_minima(&mono).is_empty());
    }

    #[test]
    fn synthetic_quadratic_fit_is_exact() {
        let (f2, g2, ec) = (2.5e-4, 410.0, 4.93);
        let e: Vec<f64> = (0..21).map(|j| ec - 0.002 + 0.0003 * j as f64).collect();
        let y: Vec<f64> = e.iter().map(|x| f2 + g2 * (x - ec).powi(2)).collect();
        let q = fit_quadratic(&e, &y).unwrap();
        assert!((q.f2 - f2).abs() < 1e-10 * f2);
        assert!((q.g2 - g2).abs() < 1e-10 * g2);
        assert!((q.e_center - ec).abs() < 1e-10 * ec);
    }

    #[test]
    fn box_too_small() {
        let model = DeltaModel::new(nat(), 100.0, 1.0).unwrap();
        let pot = RescaledPotential::from(&model);
        let res = model.resonance(1).unwrap().value;
        assert!(matches!(
            assemble_confined_state(&pot, &nat(), &res, 10.0, 11, 1e-3),
            Err(Error::BoxTooSmall { .. })
        ));
    }
}
