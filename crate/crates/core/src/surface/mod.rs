//! Model surfaces, scalar fields and the Kähler calculus on them.
//!
//! Conventions: a Kähler form is `ω = i·g·dz∧dz̄` with `i·dz∧dz̄ = 2 dx∧dy`,
//! and in complex dimension one the volume form is ω itself.
//!
//! Two surfaces are supported: the flat unit torus ℂ/(ℤ+iℤ) (Fourier
//! pseudospectral, `resolution` modes per axis) and CP¹ restricted to
//! rotationally symmetric data (Chebyshev in `s = r²/(1+r²)`, `resolution`
//! nodes over `0 ≤ r ≤ radial_cutoff`).

mod radial;
mod torus;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, PositivityFailure, Result};
use radial::RadialGrid;
use torus::TorusGrid;

/// Relative out-of-band mass above which a field is considered aliased.
pub const ALIAS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    UnitTorus,
    RadialCP1,
}

#[derive(Debug)]
enum Grid {
    Torus(TorusGrid),
    Radial(RadialGrid),
}

/// A model surface together with its discretisation. Cheap to clone.
#[derive(Clone)]
pub struct ModelSurface {
    grid: Arc<Grid>,
}

impl fmt::Debug for ModelSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.grid {
            Grid::Torus(t) => write!(f, "UnitTorus(n={})", t.n),
            Grid::Radial(r) => write!(f, "RadialCP1(n={}, R={})", r.n, r.cutoff),
        }
    }
}

impl PartialEq for ModelSurface {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.grid, &other.grid) {
            return true;
        }
        match (&*self.grid, &*other.grid) {
            (Grid::Torus(a), Grid::Torus(b)) => a.n == b.n,
            (Grid::Radial(a), Grid::Radial(b)) => a.n == b.n && a.cutoff == b.cutoff,
            _ => false,
        }
    }
}

impl ModelSurface {
    pub fn unit_torus(resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::ResolutionTooSmall(resolution));
        }
        Ok(Self {
            grid: Arc::new(Grid::Torus(TorusGrid::new(resolution))),
        })
    }

    pub fn radial_cp1(resolution: usize, radial_cutoff: f64) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::ResolutionTooSmall(resolution));
        }
        if !(radial_cutoff.is_finite() && radial_cutoff > 1.0) {
            return Err(Error::InvalidCutoff(radial_cutoff));
        }
        Ok(Self {
            grid: Arc::new(Grid::Radial(RadialGrid::new(resolution, radial_cutoff))),
        })
    }

    pub fn kind(&self) -> SurfaceKind {
        match &*self.grid {
            Grid::Torus(_) => SurfaceKind::UnitTorus,
            Grid::Radial(_) => SurfaceKind::RadialCP1,
        }
    }

    pub fn resolution(&self) -> usize {
        match &*self.grid {
            Grid::Torus(t) => t.n,
            Grid::Radial(r) => r.n,
        }
    }

    pub fn radial_cutoff(&self) -> Option<f64> {
        match &*self.grid {
            Grid::Torus(_) => None,
            Grid::Radial(r) => Some(r.cutoff),
        }
    }

    /// Number of nodes carrying field values.
    pub fn len(&self) -> usize {
        match &*self.grid {
            Grid::Torus(t) => t.len(),
            Grid::Radial(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of a node: `(x, y)` on the torus, `(r, 0)` on CP¹.
    pub fn node(&self, idx: usize) -> (f64, f64) {
        match &*self.grid {
            Grid::Torus(t) => t.node(idx),
            Grid::Radial(r) => r.node(idx),
        }
    }

    /// Compactified radial coordinate `s = r²/(1+r²)` at each node (CP¹ only).
    pub fn radial_s(&self) -> Option<&[f64]> {
        match &*self.grid {
            Grid::Torus(_) => None,
            Grid::Radial(r) => Some(&r.s),
        }
    }

    pub(crate) fn dz_raw(&self, v: &[Complex64]) -> Vec<Complex64> {
        match &*self.grid {
            Grid::Torus(t) => t.dz(v),
            Grid::Radial(r) => r.dz(v),
        }
    }

    pub(crate) fn dzbar_raw(&self, v: &[Complex64]) -> Vec<Complex64> {
        match &*self.grid {
            Grid::Torus(t) => t.dzbar(v),
            // on the real axis ∂f/∂z̄ = f_u·z = ∂f/∂z
            Grid::Radial(r) => r.dz(v),
        }
    }

    pub(crate) fn dzdzbar_raw(&self, v: &[Complex64]) -> Vec<Complex64> {
        match &*self.grid {
            Grid::Torus(t) => t.dzdzbar(v),
            Grid::Radial(r) => r.dzdzbar(v),
        }
    }

    /// `w = (1−s)²` on CP¹ and `w = 1` on the torus; every metric coefficient is a smooth multiple of w.
    pub fn pole_weight(&self, idx: usize) -> f64 {
        match &*self.grid {
            Grid::Torus(_) => 1.0,
            Grid::Radial(r) => (1.0 - r.s[idx]).powi(2),
        }
    }

    pub(crate) fn band_overflow(&self, v: &[Complex64]) -> f64 {
        match &*self.grid {
            Grid::Torus(t) => t.band_overflow(v),
            Grid::Radial(r) => r.band_overflow(v),
        }
    }

    /// ∫_M h · i dz∧dz̄ together with a bound on the unresolved polar cap (0 on the torus).
    pub(crate) fn integrate_density(&self, h: &[f64]) -> Integral {
        match &*self.grid {
            Grid::Torus(t) => Integral {
                value: t.integrate_density(h),
                tail_bound: 0.0,
            },
            Grid::Radial(r) => {
                let w: Vec<f64> = h
                    .iter()
                    .zip(&r.s)
                    .map(|(x, s)| x / ((1.0 - s) * (1.0 - s)))
                    .collect();
                let two_pi = 2.0 * std::f64::consts::PI;
                let cap = r.cap_integral(&w);
                Integral {
                    value: two_pi * (r.integrate_s(&w) + cap.value),
                    tail_bound: two_pi * cap.bound,
                }
            }
        }
    }

    /// ∂/∂x on the torus (finite-difference comparisons); `None` on CP¹.
    pub(crate) fn dx_raw(&self, v: &[Complex64]) -> Option<Vec<Complex64>> {
        match &*self.grid {
            Grid::Torus(t) => Some(t.dx(v)),
            Grid::Radial(_) => None,
        }
    }
}

/// Result of a quadrature over M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Bound on the contribution beyond the radial cutoff; zero on the torus.
    pub tail_bound: f64,
}

/// A real-valued function on a model surface, stored as nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    surface: ModelSurface,
    values: Vec<f64>,
}

/// A complex-valued function on a model surface, stored as nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    surface: ModelSurface,
    values: Vec<Complex64>,
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

impl ScalarField {
    pub fn from_values(surface: &ModelSurface, values: Vec<f64>) -> Result<Self> {
        if values.len() != surface.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                surface.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self {
            surface: surface.clone(),
            values,
        })
    }

    pub fn constant(surface: &ModelSurface, c: f64) -> Self {
        Self {
            surface: surface.clone(),
            values: vec![c; surface.len()],
        }
    }

    pub fn zeros(surface: &ModelSurface) -> Self {
        Self::constant(surface, 0.0)
    }

    /// Samples `f(x, y)` on the torus grid.
    pub fn from_torus_fn(surface: &ModelSurface, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if surface.kind() != SurfaceKind::UnitTorus {
            return Err(Error::SurfaceMismatch);
        }
        let values = (0..surface.len())
            .map(|i| {
                let (x, y) = surface.node(i);
                f(x, y)
            })
            .collect();
        Self::from_values(surface, values)
    }

    /// Samples `f(u)` with `u = |z|²` on the radial CP¹ grid.
    pub fn from_radial_fn(surface: &ModelSurface, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_radial_s_fn(surface, |s| f(s / (1.0 - s)))
    }

    /// Samples `f(s)` with `s = |z|²/(1+|z|²)` on the radial CP¹ grid.
    pub fn from_radial_s_fn(surface: &ModelSurface, f: impl Fn(f64) -> f64) -> Result<Self> {
        let s = surface.radial_s().ok_or(Error::SurfaceMismatch)?;
        let values = s.iter().map(|&s| f(s)).collect();
        Self::from_values(surface, values)
    }

    pub fn surface(&self) -> &ModelSurface {
        &self.surface
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            surface: self.surface.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.surface, other.surface);
        Self {
            surface: self.surface.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            surface: self.surface.clone(),
            values: to_complex(&self.values),
        }
    }

    /// Unchecked ∂f/∂z (see [`differentiate`] for the guarded version).
    pub fn dz(&self) -> ComplexField {
        ComplexField {
            surface: self.surface.clone(),
            values: self.surface.dz_raw(&to_complex(&self.values)),
        }
    }

    pub fn dzbar(&self) -> ComplexField {
        ComplexField {
            surface: self.surface.clone(),
            values: self.surface.dzbar_raw(&to_complex(&self.values)),
        }
    }

    /// Unchecked ∂²f/∂z∂z̄, real for a real field.
    pub fn dzdzbar(&self) -> ScalarField {
        let v = self.surface.dzdzbar_raw(&to_complex(&self.values));
        Self {
            surface: self.surface.clone(),
            values: v.into_iter().map(|c| c.re).collect(),
        }
    }

    /// `Re(∂p · ∂̄q)`; for `p = q` this is `|∂p|²`.
    pub fn gradient_pairing(p: &ScalarField, q: &ScalarField) -> ScalarField {
        let dp = p.dz();
        let dq = q.dzbar();
        ScalarField {
            surface: p.surface.clone(),
            values: dp
                .values
                .iter()
                .zip(&dq.values)
                .map(|(a, b)| (a * b).re)
                .collect(),
        }
    }

    /// `∂∂̄f / w` with `w` the pole weight of the surface.
    pub fn dzdzbar_reduced(&self) -> ScalarField {
        let c = to_complex(&self.values);
        let values = match &*self.surface.grid {
            Grid::Torus(t) => t.dzdzbar(&c).into_iter().map(|v| v.re).collect(),
            Grid::Radial(r) => r.dzdzbar_reduced(&c).into_iter().map(|v| v.re).collect(),
        };
        Self {
            surface: self.surface.clone(),
            values,
        }
    }

    /// `Re(∂p ∂̄q) / w` with `w` the pole weight of the surface.
    pub fn gradient_pairing_reduced(p: &ScalarField, q: &ScalarField) -> ScalarField {
        match &*p.surface.grid {
            Grid::Torus(_) => Self::gradient_pairing(p, q),
            Grid::Radial(r) => ScalarField {
                surface: p.surface.clone(),
                values: r.pairing_reduced(&to_complex(&p.values), &to_complex(&q.values)),
            },
        }
    }

    /// Relative spectral mass outside the resolved band.
    pub fn band_overflow(&self) -> f64 {
        self.surface.band_overflow(&to_complex(&self.values))
    }

    /// Rejects fields whose content has spilled past the resolved band.
    pub fn check_band(&self, context: &str) -> Result<()> {
        let fraction = self.band_overflow();
        if fraction > ALIAS_TOLERANCE {
            return Err(Error::Aliasing {
                context: context.to_string(),
                fraction,
            });
        }
        Ok(())
    }

    /// ∂f/∂x on the torus; used to compare against finite differences.
    pub fn dx(&self) -> Option<ScalarField> {
        let v = self.surface.dx_raw(&to_complex(&self.values))?;
        Some(Self {
            surface: self.surface.clone(),
            values: v.into_iter().map(|c| c.re).collect(),
        })
    }
}

impl ComplexField {
    pub fn from_values(surface: &ModelSurface, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != surface.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                surface.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self {
            surface: surface.clone(),
            values,
        })
    }

    pub fn zeros(surface: &ModelSurface) -> Self {
        Self {
            surface: surface.clone(),
            values: vec![Complex64::new(0.0, 0.0); surface.len()],
        }
    }

    pub fn surface(&self) -> &ModelSurface {
        &self.surface
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            surface: self.surface.clone(),
            values: self.values.iter().map(|c| c.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            surface: self.surface.clone(),
            values: self.values.iter().map(|c| c.im).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            surface: self.surface.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert_eq!(self.surface, other.surface);
        Self {
            surface: self.surface.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn dz(&self) -> Self {
        Self {
            surface: self.surface.clone(),
            values: self.surface.dz_raw(&self.values),
        }
    }

    pub fn dzbar(&self) -> Self {
        Self {
            surface: self.surface.clone(),
            values: self.surface.dzbar_raw(&self.values),
        }
    }

    pub fn dzdzbar(&self) -> Self {
        Self {
            surface: self.surface.clone(),
            values: self.surface.dzdzbar_raw(&self.values),
        }
    }

    pub fn band_overflow(&self) -> f64 {
        self.surface.band_overflow(&self.values)
    }
}

macro_rules! field_ops {
    ($ty:ty, $scalar:ty) => {
        impl Add for &$ty {
            type Output = $ty;
            fn add(self, rhs: Self) -> $ty {
                self.zip_map(rhs, |a, b| a + b)
            }
        }
        impl Sub for &$ty {
            type Output = $ty;
            fn sub(self, rhs: Self) -> $ty {
                self.zip_map(rhs, |a, b| a - b)
            }
        }
        impl Mul for &$ty {
            type Output = $ty;
            fn mul(self, rhs: Self) -> $ty {
                self.zip_map(rhs, |a, b| a * b)
            }
        }
        impl Mul<$scalar> for &$ty {
            type Output = $ty;
            fn mul(self, rhs: $scalar) -> $ty {
                self.map(|a| a * rhs)
            }
        }
        impl Neg for &$ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                self.map(|a| -a)
            }
        }
    };
}

field_ops!(ScalarField, f64);
field_ops!(ComplexField, Complex64);

/// The Kähler form `ω = i·g·dz∧dz̄` on a model surface.
#[derive(Debug, Clone, PartialEq)]
pub struct KahlerMetric {
    g: ScalarField,
    potential_tag: Option<ScalarField>,
}

impl KahlerMetric {
    /// Wraps a coefficient field, checking `min g > 0`.
    pub fn from_coefficient(g: ScalarField) -> Result<Self> {
        check_positive(&g)?;
        Ok(Self {
            g,
            potential_tag: None,
        })
    }

    /// g ≡ 1 on the torus.
    pub fn flat(surface: &ModelSurface) -> Result<Self> {
        if surface.kind() != SurfaceKind::UnitTorus {
            return Err(Error::SurfaceMismatch);
        }
        Self::from_coefficient(ScalarField::constant(surface, 1.0))
    }

    /// Fubini–Study, `g = (1+r²)^{-2} = (1−s)²`.
    pub fn fubini_study(surface: &ModelSurface) -> Result<Self> {
        Self::from_coefficient(ScalarField::from_radial_s_fn(surface, |s| {
            (1.0 - s) * (1.0 - s)
        })?)
    }

    /// Flat metric on the torus, Fubini–Study on CP¹.
    pub fn standard(surface: &ModelSurface) -> Self {
        match surface.kind() {
            SurfaceKind::UnitTorus => Self::flat(surface),
            SurfaceKind::RadialCP1 => Self::fubini_study(surface),
        }
        .expect("standard metrics are positive")
    }

    pub fn surface(&self) -> &ModelSurface {
        self.g.surface()
    }

    pub fn coefficient(&self) -> &ScalarField {
        &self.g
    }

    /// `g / w` with `w` the pole weight of the surface.
    pub fn reduced_coefficient(&self) -> ScalarField {
        let surface = self.surface();
        let values = self
            .g
            .values()
            .iter()
            .enumerate()
            .map(|(i, g)| g / surface.pole_weight(i))
            .collect();
        ScalarField {
            surface: surface.clone(),
            values,
        }
    }

    /// Accumulated potential relative to the metric this one was derived from.
    pub fn potential_tag(&self) -> Option<&ScalarField> {
        self.potential_tag.as_ref()
    }
}

fn check_positive(g: &ScalarField) -> Result<()> {
    let (node, value) = g.min();
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::Positivity(PositivityFailure {
            node,
            location: g.surface().node(node),
            value,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Dz,
    Dzbar,
    DzDzbar,
}

/// Spectral complex derivative with the aliasing guard applied to the input.
///
/// On CP¹ the first derivatives are reported along the positive real axis;
/// the full fields are `e^{∓iθ}` times these radial profiles.
pub fn differentiate(f: &ScalarField, mode: DerivativeMode) -> Result<ComplexField> {
    f.check_band("differentiate")?;
    Ok(match mode {
        DerivativeMode::Dz => f.dz(),
        DerivativeMode::Dzbar => f.dzbar(),
        DerivativeMode::DzDzbar => f.dzdzbar().to_complex(),
    })
}

/// ∫_M f · ω for `ω = i·g·dz∧dz̄`.
pub fn integrate(f: &ScalarField, metric: &KahlerMetric) -> Result<f64> {
    Ok(integrate_with_tail(f, metric)?.value)
}

/// As [`integrate`], also reporting the bound on the polar cap beyond the cutoff.
pub fn integrate_with_tail(f: &ScalarField, metric: &KahlerMetric) -> Result<Integral> {
    if f.surface() != metric.surface() {
        return Err(Error::SurfaceMismatch);
    }
    check_positive(metric.coefficient())?;
    let density = f * metric.coefficient();
    Ok(f.surface().integrate_density(density.values()))
}

/// ∫_M h · i dz∧dz̄ against the coordinate area form.
pub fn integrate_area(h: &ScalarField) -> Integral {
    h.surface().integrate_density(h.values())
}

/// `g_φ = g + ∂∂̄φ`, or the location of the first non-positive coefficient.
pub fn metric_from_potential(base: &KahlerMetric, phi: &ScalarField) -> Result<KahlerMetric> {
    if base.surface() != phi.surface() {
        return Err(Error::SurfaceMismatch);
    }
    let tag = match &base.potential_tag {
        Some(t) => t + phi,
        None => phi.clone(),
    };
    if phi.is_zero() {
        return Ok(KahlerMetric {
            g: base.g.clone(),
            potential_tag: Some(tag),
        });
    }
    let g = &base.g + &phi.dzdzbar();
    check_positive(&g)?;
    Ok(KahlerMetric {
        g,
        potential_tag: Some(tag),
    })
}

/// `g_φ / w` for `g_φ = g + ∂∂̄φ`, with the same positivity check as [`metric_from_potential`].
pub fn reduced_metric(base: &KahlerMetric, phi: &ScalarField) -> Result<ScalarField> {
    if base.surface() != phi.surface() {
        return Err(Error::SurfaceMismatch);
    }
    let red = &base.reduced_coefficient() + &phi.dzdzbar_reduced();
    let (node, value) = red.min();
    if value > 0.0 {
        Ok(red)
    } else {
        let surface = phi.surface();
        Err(Error::Positivity(PositivityFailure {
            node,
            location: surface.node(node),
            value: value * surface.pole_weight(node),
        }))
    }
}
