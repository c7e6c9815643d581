//! Bidegree expansion near a smooth divisor in the product family `M × Δ`.
//!
//! The total potential relative to `π*ω_D` is
//!
//! ```text
//! Ψ = Σ_{i,j} Sⁱ S̄ʲ ψ_ij,    ψ_ij = e_ij + θ_ij
//! ```
//!
//! where `e_ij` comes from the extension form and `θ_ij` (`i, j ≥ 1`) is the
//! unknown correction. With `A = [[g + Ψ_zz̄, Ψ_zS̄], [Ψ_Sz̄, Ψ_SS̄]]` one has
//! `ω² = 2 det A · (i dz∧dz̄)∧(i dS∧dS̄)`; the normal bundle is flat, so no
//! curvature terms enter. The `Sᵃ S̄ᵇ` coefficient of `det A` is affine in
//! `ψ_{a+1,b+1}` with slope `(a+1)(b+1) g`, which drives the recursion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ray::{PathInH, PathJet, PotentialFamily};
use crate::surface::{ComplexField, KahlerMetric, ScalarField};

/// Constant in `θ_11 = −κ h` for a constant perturbation `h`.
pub const KAPPA: f64 = 1.0;
/// Constant in `Φ(x) = κ′ θ_11 e^{−2x}` for a series carrying only `θ_11`.
pub const KAPPA_PRIME: f64 = 1.0;
/// Largest order accepted by [`solve_order`].
pub const DEFAULT_MAX_ORDER: usize = 5;
/// Defect below which a series counts as S¹-invariant.
pub const INVARIANCE_TOLERANCE: f64 = 1e-10;

/// `ω̃_V = π*ω_D + i∂∂̄(|S|² h + S^p k + S̄^p k̄)`; the twist term is optional.
#[derive(Debug, Clone)]
pub struct ExtensionForm {
    base: KahlerMetric,
    h: ScalarField,
    twist: Option<(usize, ComplexField)>,
}

impl ExtensionForm {
    pub fn new(base: &KahlerMetric, h: ScalarField) -> Result<Self> {
        if h.surface() != base.surface() {
            return Err(Error::SurfaceMismatch);
        }
        Ok(Self {
            base: base.clone(),
            h,
            twist: None,
        })
    }

    /// The pure pullback `π*ω_D`.
    pub fn pullback(base: &KahlerMetric) -> Self {
        Self {
            base: base.clone(),
            h: ScalarField::zeros(base.surface()),
            twist: None,
        }
    }

    /// Adds `S^weight k + S̄^weight k̄`, which breaks S¹-invariance.
    pub fn with_twist(mut self, weight: usize, k: ComplexField) -> Result<Self> {
        if weight == 0 {
            return Err(Error::InvalidArgument("twist weight must be at least 1".into()));
        }
        if k.surface() != self.base.surface() {
            return Err(Error::SurfaceMismatch);
        }
        self.twist = Some((weight, k));
        Ok(self)
    }

    pub fn base(&self) -> &KahlerMetric {
        &self.base
    }

    pub fn h(&self) -> &ScalarField {
        &self.h
    }

    pub fn twist(&self) -> Option<(usize, &ComplexField)> {
        self.twist.as_ref().map(|(p, k)| (*p, k))
    }

    /// True when the data is invariant under `S ↦ αS`.
    pub fn invariant(&self) -> bool {
        self.twist.as_ref().is_none_or(|(_, k)| k.sup_norm() == 0.0)
    }

    /// Pullback by `S ↦ αS`, `|α| = 1`.
    pub fn rotated(&self, alpha: Complex64) -> Self {
        let twist = self
            .twist
            .as_ref()
            .map(|(p, k)| (*p, k.scale(alpha.powu(*p as u32))));
        Self {
            base: self.base.clone(),
            h: self.h.clone(),
            twist,
        }
    }

    /// Extension coefficients `e_ij` of the potential.
    fn coefficients(&self) -> BTreeMap<(usize, usize), ComplexField> {
        let mut out = BTreeMap::new();
        if !self.h.is_zero() {
            out.insert((1, 1), self.h.to_complex());
        }
        if let Some((p, k)) = &self.twist {
            out.insert((*p, 0), k.clone());
            out.insert((0, *p), k.conj());
        }
        out
    }
}

/// Solution `θ_ij` for `1 ≤ i, j`, `i + j ≤ K + 1`.
#[derive(Debug, Clone)]
pub struct BidegreeSeries {
    extension: ExtensionForm,
    thetas: BTreeMap<(usize, usize), ComplexField>,
    order: usize,
}

impl BidegreeSeries {
    pub fn extension(&self) -> &ExtensionForm {
        &self.extension
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn thetas(&self) -> &BTreeMap<(usize, usize), ComplexField> {
        &self.thetas
    }

    /// θ_ij; gauge-fixed entries with `i = 0` or `j = 0` read as zero.
    pub fn theta(&self, i: usize, j: usize) -> ComplexField {
        self.thetas
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| ComplexField::zeros(self.extension.base.surface()))
    }

    /// S¹-weight `j − i` carried by θ_ij.
    pub fn weight(i: usize, j: usize) -> i64 {
        j as i64 - i as i64
    }

    /// Replaces θ_ij (and θ_ji by its conjugate); used to inject test perturbations.
    pub fn with_theta(&self, i: usize, j: usize, field: ComplexField) -> Result<Self> {
        if i == 0 || j == 0 {
            return Err(Error::InvalidArgument(format!(
                "θ_{i}{j} is fixed to zero by the gauge"
            )));
        }
        if field.surface() != self.extension.base.surface() {
            return Err(Error::SurfaceMismatch);
        }
        let mut out = self.clone();
        if i == j {
            out.thetas.insert((i, j), field.re().to_complex());
        } else {
            out.thetas.insert((j, i), field.conj());
            out.thetas.insert((i, j), field);
        }
        Ok(out)
    }

    /// Pullback by `S ↦ αS`: `θ_ij ↦ αⁱ ᾱʲ θ_ij`.
    pub fn rotated(&self, alpha: Complex64) -> Self {
        let thetas = self
            .thetas
            .iter()
            .map(|(&(i, j), f)| {
                let c = alpha.powu(i as u32) * alpha.conj().powu(j as u32);
                ((i, j), f.scale(c))
            })
            .collect();
        Self {
            extension: self.extension.rotated(alpha),
            thetas,
            order: self.order,
        }
    }

    /// Number of θ_ij with `i + j = total` whose sup-norm exceeds `tol`.
    pub fn nonzero_count(&self, total: usize, tol: f64) -> usize {
        self.thetas
            .iter()
            .filter(|(&(i, j), f)| i + j == total && f.sup_norm() > tol)
            .count()
    }

    /// `max |θ_ij − conj θ_ji|`.
    pub fn reality_defect(&self) -> f64 {
        self.thetas
            .iter()
            .map(|(&(i, j), f)| (f - &self.theta(j, i).conj()).sup_norm())
            .fold(0.0, f64::max)
    }

    /// `φ = Σ Sⁱ S̄ʲ θ_ij` at `S = ρ e^{iϑ}`, complex so reality can be inspected.
    pub fn reconstruct(&self, rho: f64, angle: f64) -> ComplexField {
        let surface = self.extension.base.surface();
        let mut acc = vec![Complex64::new(0.0, 0.0); surface.len()];
        for (&(i, j), f) in &self.thetas {
            let c = Complex64::from_polar(rho.powi((i + j) as i32), (i as f64 - j as f64) * angle);
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += c * v;
            }
        }
        ComplexField::from_values(surface, acc).expect("finite reconstruction")
    }

    /// Half of the root-test radius of `m ↦ max_{i+j=m} ‖θ_ij‖`, infinite for a vanishing tail.
    pub fn trust_radius(&self) -> f64 {
        let blocks: Vec<(usize, f64)> = (2..=self.order + 1)
            .map(|m| {
                let norm = self
                    .thetas
                    .iter()
                    .filter(|(&(i, j), _)| i + j == m)
                    .map(|(_, f)| f.sup_norm())
                    .fold(0.0, f64::max);
                (m, norm)
            })
            .collect();
        let scale = blocks.iter().fold(1.0_f64, |a, b| a.max(b.1));
        let live: Vec<(f64, f64)> = blocks
            .iter()
            .filter(|(_, n)| *n > 1e-13 * scale)
            .map(|&(m, n)| (m as f64, n.ln()))
            .collect();
        if live.len() < 2 {
            return f64::INFINITY;
        }
        let k = live.len() as f64;
        let mx = live.iter().map(|p| p.0).sum::<f64>() / k;
        let my = live.iter().map(|p| p.1).sum::<f64>() / k;
        let num: f64 = live.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = live.iter().map(|p| (p.0 - mx).powi(2)).sum();
        0.5 * (-num / den).exp()
    }
}

/// Field coefficients of the total potential with cached derivatives.
struct Potential {
    psi: BTreeMap<(usize, usize), ComplexField>,
    dz: BTreeMap<(usize, usize), ComplexField>,
    dzbar: BTreeMap<(usize, usize), ComplexField>,
    lap: BTreeMap<(usize, usize), ComplexField>,
}

impl Potential {
    fn new() -> Self {
        Self {
            psi: BTreeMap::new(),
            dz: BTreeMap::new(),
            dzbar: BTreeMap::new(),
            lap: BTreeMap::new(),
        }
    }

    fn insert(&mut self, key: (usize, usize), f: ComplexField) {
        self.dz.insert(key, f.dz());
        self.dzbar.insert(key, f.dzbar());
        self.lap.insert(key, f.dzdzbar());
        self.psi.insert(key, f);
    }

    /// `Sᵃ S̄ᵇ` coefficient of `det A`, omitting `g·(a+1)(b+1)ψ_{a+1,b+1}` when `skip_top`.
    fn det_coefficient(&self, g: &ScalarField, a: usize, b: usize, skip_top: bool) -> Vec<Complex64> {
        let len = g.values().len();
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        let mut axpy = |w: f64, p: &[Complex64], q: &[Complex64]| {
            for (o, (x, y)) in acc.iter_mut().zip(p.iter().zip(q)) {
                *o += w * x * y;
            }
        };
        // A11[i,j] · A22[a−i, b−j] with A22[i',j'] = (i'+1)(j'+1) ψ_{i'+1,j'+1}
        for i in 0..=a {
            for j in 0..=b {
                let top = (a + 1 - i, b + 1 - j);
                let Some(q) = self.psi.get(&top) else { continue };
                let w = (top.0 * top.1) as f64;
                if i == 0 && j == 0 {
                    if !skip_top {
                        let gc: Vec<Complex64> = g.values().iter().map(|&v| v.into()).collect();
                        axpy(w, &gc, q.values());
                    }
                    if let Some(l) = self.lap.get(&(0, 0)) {
                        axpy(w, l.values(), q.values());
                    }
                } else if let Some(l) = self.lap.get(&(i, j)) {
                    axpy(w, l.values(), q.values());
                }
            }
        }
        // −A12[i,j] · A21[a−i, b−j] with A12[i,j] = (j+1) ∂ψ_{i,j+1}, A21[i',j'] = (i'+1) ∂̄ψ_{i'+1,j'}
        for i in 0..=a {
            for j in 0..=b {
                let left = (i, j + 1);
                let right = (a + 1 - i, b - j);
                let (Some(p), Some(q)) = (self.dz.get(&left), self.dzbar.get(&right)) else {
                    continue;
                };
                axpy(-(((j + 1) * right.0) as f64), p.values(), q.values());
            }
        }
        acc
    }
}

fn potential_of(series: &BidegreeSeries) -> Potential {
    let mut total = series.extension.coefficients();
    for (&key, th) in &series.thetas {
        let merged = match total.get(&key) {
            Some(e) => e + th,
            None => th.clone(),
        };
        total.insert(key, merged);
    }
    let mut p = Potential::new();
    for (key, f) in total {
        p.insert(key, f);
    }
    p
}

/// Solves `ω² ≡ 0 mod S^K` for `θ_ij`, `i + j ≤ K + 1`.
pub fn solve_order(extension: &ExtensionForm, order: usize) -> Result<BidegreeSeries> {
    solve_order_with_limit(extension, order, DEFAULT_MAX_ORDER)
}

pub fn solve_order_with_limit(
    extension: &ExtensionForm,
    order: usize,
    max_order: usize,
) -> Result<BidegreeSeries> {
    if order == 0 || order > max_order {
        return Err(Error::InvalidArgument(format!(
            "order must lie in 1..={max_order}, got {order}"
        )));
    }
    let base = &extension.base;
    let g = base.coefficient();
    let surface = base.surface();
    let ext = extension.coefficients();
    let mut potential = Potential::new();
    for (&key, e) in &ext {
        potential.insert(key, e.clone());
    }
    let mut thetas = BTreeMap::new();
    // total degree d = a + b + 2 of the unknown ψ_{a+1,b+1}
    for d in 2..=order + 1 {
        let mut solved = Vec::new();
        for a in 0..=d - 2 {
            let b = d - 2 - a;
            let key = (a + 1, b + 1);
            let rest = potential.det_coefficient(g, a, b, true);
            let w = ((a + 1) * (b + 1)) as f64;
            let psi: Vec<Complex64> = rest
                .iter()
                .zip(g.values())
                .map(|(r, g)| -r / (w * g))
                .collect();
            let psi = ComplexField::from_values(surface, psi)?;
            let theta = match ext.get(&key) {
                Some(e) => &psi - e,
                None => psi.clone(),
            };
            let overflow = theta.band_overflow();
            if overflow > crate::surface::ALIAS_TOLERANCE {
                return Err(Error::Aliasing {
                    context: format!("θ_{}{} (total order {d})", key.0, key.1),
                    fraction: overflow,
                });
            }
            solved.push((key, psi, theta));
        }
        for (key, psi, theta) in solved {
            potential.insert(key, psi);
            thetas.insert(key, theta);
        }
    }
    Ok(BidegreeSeries {
        extension: extension.clone(),
        thetas,
        order,
    })
}

/// Sup-norms of the `Sᵃ S̄ᵇ` coefficients of `2 det A` for `a + b < k`, in `(a, b)` order.
pub fn residual_mod_sk(series: &BidegreeSeries, k: usize) -> Result<Vec<((usize, usize), f64)>> {
    if k > series.order {
        return Err(Error::InvalidArgument(format!(
            "residual order {k} exceeds the series order {}",
            series.order
        )));
    }
    let potential = potential_of(series);
    let g = series.extension.base.coefficient();
    let mut out = Vec::new();
    for total in 0..k {
        for a in 0..=total {
            let b = total - a;
            let c = potential.det_coefficient(g, a, b, false);
            let norm = c.iter().map(|z| 2.0 * z.norm()).fold(0.0, f64::max);
            out.push(((a, b), norm));
        }
    }
    Ok(out)
}

/// Largest spread of `φ` over `phases` equally spaced arguments of S, at three radii.
pub fn equivariance_check(series: &BidegreeSeries, phases: usize) -> Result<f64> {
    if phases < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 phases, got {phases}")));
    }
    let reach = series.trust_radius().min(0.5);
    let mut defect: f64 = 0.0;
    for frac in [1.0 / 3.0, 2.0 / 3.0, 1.0] {
        let rho = reach * frac;
        let samples: Vec<ComplexField> = (0..phases)
            .map(|m| series.reconstruct(rho, 2.0 * PI * m as f64 / phases as f64))
            .collect();
        for node in 0..series.extension.base.surface().len() {
            let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
                let v = f.values()[node].re;
                (lo.min(v), hi.max(v))
            });
            defect = defect.max(hi - lo);
        }
    }
    Ok(defect)
}

/// The ray `x ↦ Φ(x)`, `Φ` the total potential at `S = e^{−x}` relative to `ω_D`.
#[derive(Debug, Clone)]
pub struct DegenerationRay {
    pub xs: Vec<f64>,
    pub potentials: Vec<ScalarField>,
    pub trust_radius: f64,
    /// Set when `e^{−x0}` lies outside the trust region.
    pub warning: Option<String>,
    family: Arc<RayFamily>,
}

impl DegenerationRay {
    /// The ray with exact x-derivatives, for the functionals in [`crate::ray`].
    pub fn path(&self) -> PathInH {
        PathInH::from_family(self.family.clone())
    }
}

/// `Φ(x) = Σ_m c_m e^{−m x}` with `c_m = Σ_{i+j=m} Re ψ_ij`.
#[derive(Debug)]
struct RayFamily {
    base: KahlerMetric,
    modes: Vec<(usize, ScalarField)>,
}

impl PotentialFamily for RayFamily {
    fn base(&self) -> &KahlerMetric {
        &self.base
    }

    fn jet(&self, x: f64) -> Result<PathJet> {
        let surface = self.base.surface();
        let mut phi = vec![0.0; surface.len()];
        let mut dphi = vec![0.0; surface.len()];
        let mut ddphi = vec![0.0; surface.len()];
        for (m, c) in &self.modes {
            let m = *m as f64;
            let e = (-m * x).exp();
            for (i, v) in c.values().iter().enumerate() {
                phi[i] += e * v;
                dphi[i] -= m * e * v;
                ddphi[i] += m * m * e * v;
            }
        }
        Ok(PathJet {
            phi: ScalarField::from_values(surface, phi)?,
            dphi: ScalarField::from_values(surface, dphi)?,
            ddphi: ScalarField::from_values(surface, ddphi)?,
        })
    }
}

pub fn to_geodesic_ray(series: &BidegreeSeries, x0: f64, x1: f64, samples: usize) -> Result<DegenerationRay> {
    if !(x1 > x0) || samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need x0 < x1 and at least 2 samples, got [{x0}, {x1}] with {samples}"
        )));
    }
    let defect = equivariance_check(series, 8)?;
    if !series.extension.invariant() || defect > INVARIANCE_TOLERANCE {
        return Err(Error::NotInvariant(defect));
    }
    let potential = potential_of(series);
    let surface = series.extension.base.surface();
    let mut modes: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&(i, j), f) in &potential.psi {
        let acc = modes.entry(i + j).or_insert_with(|| vec![0.0; surface.len()]);
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += v.re;
        }
    }
    let modes = modes
        .into_iter()
        .map(|(m, v)| ScalarField::from_values(surface, v).map(|f| (m, f)))
        .collect::<Result<Vec<_>>>()?;
    let family = Arc::new(RayFamily {
        base: series.extension.base.clone(),
        modes,
    });
    let xs: Vec<f64> = (0..samples)
        .map(|i| x0 + (x1 - x0) * i as f64 / (samples - 1) as f64)
        .collect();
    let potentials = xs
        .iter()
        .map(|&x| family.jet(x).map(|j| j.phi))
        .collect::<Result<Vec<_>>>()?;
    let trust_radius = series.trust_radius();
    let warning = ((-x0).exp() > trust_radius).then(|| {
        format!(
            "|S| = e^(-{x0}) = {:.4} exceeds the trust radius {trust_radius:.4}",
            (-x0).exp()
        )
    });
    Ok(DegenerationRay {
        xs,
        potentials,
        trust_radius,
        warning,
        family,
    })
}
