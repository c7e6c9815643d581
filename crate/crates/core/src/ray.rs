//! Functionals on paths `t ↦ φ(t)` in the space of Kähler potentials.
//!
//! The geodesic equation is realized as `φ″ = |∂φ′|² / g_φ` with
//! `g_φ = g + ∂∂̄φ`; it is four times the Monge–Ampère determinant divided by
//! `g_φ`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ivp::{self, GeodesicSeries, TimeDerivative};
use crate::surface::{integrate_area, metric_from_potential, reduced_metric, KahlerMetric, ScalarField};

/// Relative tolerance of the adaptive Simpson rule used for lengths.
pub const LENGTH_TOLERANCE: f64 = 1e-10;

/// Panels of the composite Simpson rule used in the WZW pairing.
const WZW_PANELS: usize = 128;

/// `(φ, φ′, φ″)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PathJet {
    pub phi: ScalarField,
    pub dphi: ScalarField,
    pub ddphi: ScalarField,
}

/// A path known in closed form.
pub trait PotentialFamily: fmt::Debug + Send + Sync {
    fn base(&self) -> &KahlerMetric;
    fn jet(&self, t: f64) -> Result<PathJet>;
}

/// Potentials on a uniform time grid.
#[derive(Debug, Clone)]
pub struct SampledPath {
    t0: f64,
    step: f64,
    values: Vec<ScalarField>,
}

impl SampledPath {
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| self.t0 + self.step * i as f64)
            .collect()
    }

    pub fn values(&self) -> &[ScalarField] {
        &self.values
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.step;
        let i = x.round();
        if (x - i).abs() > 1e-9 || i < 0.0 || i as usize >= self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "t = {t} is not a node of the sampled grid"
            )));
        }
        Ok(i as usize)
    }

    /// Fourth-order differences; the second derivative is third order at the two outer nodes per end.
    fn jet(&self, i: usize) -> PathJet {
        let n = self.values.len();
        let h = self.step;
        let f = |k: usize| self.values[k].values();
        let combine = |idx: [usize; 5], w: [f64; 5], scale: f64| {
            let len = self.values[0].values().len();
            let mut acc = vec![0.0; len];
            for (k, wk) in idx.iter().zip(w) {
                for (a, v) in acc.iter_mut().zip(f(*k)) {
                    *a += wk * v;
                }
            }
            let surface = self.values[0].surface();
            ScalarField::from_values(surface, acc.into_iter().map(|a| a * scale).collect())
                .expect("finite differences")
        };
        let d1 = 1.0 / (12.0 * h);
        let d2 = 1.0 / (12.0 * h * h);
        let (dphi, ddphi) = if i >= 2 && i + 2 < n {
            let idx = [i - 2, i - 1, i, i + 1, i + 2];
            (
                combine(idx, [1.0, -8.0, 0.0, 8.0, -1.0], d1),
                combine(idx, [-1.0, 16.0, -30.0, 16.0, -1.0], d2),
            )
        } else if i < 2 {
            let idx = [0, 1, 2, 3, 4];
            if i == 0 {
                (
                    combine(idx, [-25.0, 48.0, -36.0, 16.0, -3.0], d1),
                    combine(idx, [35.0, -104.0, 114.0, -56.0, 11.0], d2),
                )
            } else {
                (
                    combine(idx, [-3.0, -10.0, 18.0, -6.0, 1.0], d1),
                    combine(idx, [11.0, -20.0, 6.0, 4.0, -1.0], d2),
                )
            }
        } else {
            let idx = [n - 1, n - 2, n - 3, n - 4, n - 5];
            if i == n - 1 {
                (
                    combine(idx, [25.0, -48.0, 36.0, -16.0, 3.0], d1),
                    combine(idx, [35.0, -104.0, 114.0, -56.0, 11.0], d2),
                )
            } else {
                (
                    combine(idx, [3.0, 10.0, -18.0, 6.0, -1.0], d1),
                    combine(idx, [11.0, -20.0, 6.0, 4.0, -1.0], d2),
                )
            }
        };
        PathJet {
            phi: self.values[i].clone(),
            dphi,
            ddphi,
        }
    }
}

#[derive(Debug, Clone)]
pub enum PathSource {
    Series(GeodesicSeries),
    Sampled(SampledPath),
    Exact(Arc<dyn PotentialFamily>),
}

/// A path of potentials over a fixed base metric.
#[derive(Debug, Clone)]
pub struct PathInH {
    base: KahlerMetric,
    source: PathSource,
}

impl PathInH {
    pub fn from_series(series: GeodesicSeries) -> Self {
        Self {
            base: series.base().clone(),
            source: PathSource::Series(series),
        }
    }

    pub fn from_family(family: Arc<dyn PotentialFamily>) -> Self {
        Self {
            base: family.base().clone(),
            source: PathSource::Exact(family),
        }
    }

    /// Potentials at `t0, t0 + step, …`; at least five samples.
    pub fn sampled(base: &KahlerMetric, t0: f64, step: f64, values: Vec<ScalarField>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::InvalidArgument(format!(
                "a sampled path needs at least 5 samples, got {}",
                values.len()
            )));
        }
        if !(step > 0.0 && step.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad time grid t0 = {t0}, step = {step}")));
        }
        if values.iter().any(|v| v.surface() != base.surface()) {
            return Err(Error::SurfaceMismatch);
        }
        Ok(Self {
            base: base.clone(),
            source: PathSource::Sampled(SampledPath { t0, step, values }),
        })
    }

    pub fn base(&self) -> &KahlerMetric {
        &self.base
    }

    pub fn source(&self) -> &PathSource {
        &self.source
    }

    /// Sample times of a sampled path.
    pub fn sample_times(&self) -> Option<Vec<f64>> {
        match &self.source {
            PathSource::Sampled(s) => Some(s.times()),
            _ => None,
        }
    }

    pub fn jet(&self, t: f64) -> Result<PathJet> {
        match &self.source {
            PathSource::Series(series) => Ok(PathJet {
                phi: ivp::evaluate(series, t, TimeDerivative::Value),
                dphi: ivp::evaluate(series, t, TimeDerivative::Dt),
                ddphi: ivp::evaluate(series, t, TimeDerivative::Dtt),
            }),
            PathSource::Sampled(s) => Ok(s.jet(s.index_of(t)?)),
            PathSource::Exact(f) => f.jet(t),
        }
    }

    pub fn potential(&self, t: f64) -> Result<ScalarField> {
        match &self.source {
            PathSource::Series(series) => Ok(ivp::evaluate(series, t, TimeDerivative::Value)),
            PathSource::Sampled(s) => Ok(s.values[s.index_of(t)?].clone()),
            PathSource::Exact(f) => Ok(f.jet(t)?.phi),
        }
    }
}

/// `(ψ, χ)_φ = ∫ ψ χ dVol_φ`.
pub fn mabuchi_inner(
    psi: &ScalarField,
    chi: &ScalarField,
    phi: &ScalarField,
    base: &KahlerMetric,
) -> Result<f64> {
    if psi.surface() != base.surface() || chi.surface() != base.surface() {
        return Err(Error::SurfaceMismatch);
    }
    let metric = metric_from_potential(base, phi)?;
    let density = psi * chi;
    Ok(integrate_area(&(&density * metric.coefficient())).value)
}

/// Geodesic defect `φ″ − |∂φ′|²/g_φ` and its sup-norm.
#[derive(Debug, Clone)]
pub struct GeodesicResidual {
    pub sup_norm: f64,
    pub field: ScalarField,
}

pub fn geodesic_residual(path: &PathInH, t: f64) -> Result<GeodesicResidual> {
    let jet = path.jet(t)?;
    let field = geodesic_defect(&path.base, &jet)?;
    Ok(GeodesicResidual {
        sup_norm: field.sup_norm(),
        field,
    })
}

/// Pointwise geodesic defect of a path jet.
pub fn geodesic_defect(base: &KahlerMetric, jet: &PathJet) -> Result<ScalarField> {
    let metric = reduced_metric(base, &jet.phi)?;
    let grad = ScalarField::gradient_pairing_reduced(&jet.dphi, &jet.dphi);
    let values = jet
        .ddphi
        .values()
        .iter()
        .zip(grad.values())
        .zip(metric.values())
        .map(|((tt, q), g)| tt - q / g)
        .collect();
    ScalarField::from_values(base.surface(), values)
}

/// `D_tψ = ψ_t − Re(∂ψ ∂̄φ′)/g_φ`, given ψ and ∂ψ/∂t at time t.
pub fn covariant_derivative(
    path: &PathInH,
    psi: &ScalarField,
    psi_t: &ScalarField,
    t: f64,
) -> Result<ScalarField> {
    let jet = path.jet(t)?;
    let metric = reduced_metric(&path.base, &jet.phi)?;
    let pairing = ScalarField::gradient_pairing_reduced(psi, &jet.dphi);
    let values = psi_t
        .values()
        .iter()
        .zip(pairing.values())
        .zip(metric.values())
        .map(|((pt, q), g)| pt - q / g)
        .collect();
    ScalarField::from_values(path.base.surface(), values)
}

/// First variation of the WZW functional along `δF` over `[t0, t1]`.
///
/// `δI = ½ ∫ δF Ω²` over `M × [t0, t1] × S¹` with the angle of period 2π, which
/// equals `4π ∫dt ∫_M δF R i dz∧dz̄` for the determinant `R`. `δF` must vanish at
/// both ends of the interval.
pub fn wzw_first_variation(
    path: &PathInH,
    interval: (f64, f64),
    delta_f: impl Fn(f64) -> Result<ScalarField>,
) -> Result<f64> {
    let (t0, t1) = interval;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("empty interval [{t0}, {t1}]")));
    }
    let times: Vec<f64> = match &path.source {
        PathSource::Sampled(s) => s
            .times()
            .into_iter()
            .filter(|&t| t >= t0 - 1e-12 && t <= t1 + 1e-12)
            .collect(),
        _ => (0..=WZW_PANELS)
            .map(|i| t0 + (t1 - t0) * i as f64 / WZW_PANELS as f64)
            .collect(),
    };
    if times.len() < 3 {
        return Err(Error::InvalidArgument("interval holds fewer than 3 samples".into()));
    }
    let mut integrand = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let df = delta_f(t)?;
        if i == 0 || i + 1 == times.len() {
            if df.sup_norm() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "variation does not vanish at the interval end t = {t}"
                )));
            }
            integrand.push(0.0);
            continue;
        }
        if df.is_zero() {
            integrand.push(0.0);
            continue;
        }
        let jet = path.jet(t)?;
        let r = ivp::hcma_density(&path.base, &jet.phi, &jet.dphi, &jet.ddphi)?;
        integrand.push(integrate_area(&(&df * &r)).value);
    }
    let h = times[1] - times[0];
    Ok(4.0 * std::f64::consts::PI * grid_quadrature(&integrand, h))
}

/// Composite Simpson on a uniform grid, closing an odd interval count with the 3/8 rule.
fn grid_quadrature(y: &[f64], h: f64) -> f64 {
    let n = y.len() - 1;
    if n == 1 {
        return 0.5 * h * (y[0] + y[1]);
    }
    let simpson_end = if n % 2 == 0 { n } else { n - 3 };
    let mut acc = 0.0;
    let mut i = 0;
    while i < simpson_end {
        acc += h / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
        i += 2;
    }
    if n % 2 == 1 {
        let k = simpson_end;
        acc += 3.0 * h / 8.0 * (y[k] + 3.0 * y[k + 1] + 3.0 * y[k + 2] + y[k + 3]);
    }
    acc
}

/// `E(t) = ∫ φ′² dVol_φ`.
pub fn energy(path: &PathInH, t: f64) -> Result<f64> {
    let jet = path.jet(t)?;
    let metric = metric_from_potential(&path.base, &jet.phi)?;
    let density = &(&jet.dphi * &jet.dphi) * metric.coefficient();
    Ok(integrate_area(&density).value)
}

/// `∫_{t0}^{t1} sqrt(E(t)) dt`.
pub fn length(path: &PathInH, t0: f64, t1: f64) -> Result<f64> {
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    let speed = |t: f64| energy(path, t).map(|e| e.max(0.0).sqrt());
    if let PathSource::Sampled(s) = &path.source {
        let i0 = s.index_of(t0)?;
        let i1 = s.index_of(t1)?;
        let ys = (i0..=i1)
            .map(|i| speed(s.t0 + s.step * i as f64))
            .collect::<Result<Vec<_>>>()?;
        return Ok(grid_quadrature(&ys, s.step));
    }
    // Simpson with interval halving; the Richardson correction is added at the end.
    let mut panels = 2;
    let mut ys = vec![speed(t0)?, speed(0.5 * (t0 + t1))?, speed(t1)?];
    let simpson = |ys: &[f64]| {
        let h = (t1 - t0) / (ys.len() - 1) as f64;
        grid_quadrature(ys, h)
    };
    let mut coarse = simpson(&ys);
    loop {
        panels *= 2;
        let h = (t1 - t0) / panels as f64;
        let mut refined = Vec::with_capacity(panels + 1);
        for (i, y) in ys.iter().enumerate() {
            refined.push(*y);
            if i + 1 < ys.len() {
                refined.push(speed(t0 + h * (2 * i + 1) as f64)?);
            }
        }
        ys = refined;
        let fine = simpson(&ys);
        let err = (fine - coarse) / 15.0;
        if err.abs() <= LENGTH_TOLERANCE * fine.abs().max(1e-300) || panels >= 1 << 14 {
            return Ok(fine + err);
        }
        coarse = fine;
    }
}

/// `‖φ(t)‖_{C⁰}` at the given times.
#[derive(Debug, Clone, PartialEq)]
pub struct C0Profile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub strictly_increasing: bool,
}

pub fn c0_profile(path: &PathInH, times: &[f64]) -> Result<C0Profile> {
    let values = times
        .iter()
        .map(|&t| path.potential(t).map(|p| p.sup_norm()))
        .collect::<Result<Vec<_>>>()?;
    let strictly_increasing = values.windows(2).all(|w| w[1] > w[0]);
    Ok(C0Profile {
        times: times.to_vec(),
        values,
        strictly_increasing,
    })
}

/// Energy, length and C⁰ growth along sampled times.
#[derive(Debug, Clone, PartialEq)]
pub struct RayDiagnostics {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub length: f64,
    pub c0: Vec<f64>,
    /// `max |E(t) − E(t₀)| / E(t₀)`, zero for a path at rest.
    pub speed_drift: f64,
}

/// Diagnostics at `times`, which must be increasing with at least two entries.
pub fn diagnose(path: &PathInH, times: &[f64]) -> Result<RayDiagnostics> {
    if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("diagnostic times must increase".into()));
    }
    let energies = times
        .iter()
        .map(|&t| energy(path, t))
        .collect::<Result<Vec<_>>>()?;
    let total = length(path, times[0], times[times.len() - 1])?;
    let c0 = c0_profile(path, times)?.values;
    Ok(RayDiagnostics {
        times: times.to_vec(),
        speed_drift: speed_drift(&energies),
        energy: energies,
        length: total,
        c0,
    })
}

pub fn speed_drift(energies: &[f64]) -> f64 {
    match energies.first() {
        Some(&e0) if e0 > 0.0 => energies
            .iter()
            .map(|e| (e - e0).abs() / e0)
            .fold(0.0, f64::max),
        _ => 0.0,
    }
}
