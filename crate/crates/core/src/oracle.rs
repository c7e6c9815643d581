//! Ground truth that does not go through the θ_k recursion.
//!
//! [`taylor_from_evolution`] integrates `φ_tt = |∂φ_t|² / (g + ∂∂̄φ)` in
//! truncated power series arithmetic, one node at a time. [`RotationRay`]
//! is the closed-form geodesic generated by `z ↦ eᵗz` on CP¹.

use crate::error::{Error, Result};
use crate::ray::{PathJet, PotentialFamily};
use crate::surface::{KahlerMetric, ModelSurface, ScalarField, SurfaceKind};

pub const MAX_JET_ORDER: usize = 10;

/// Per-node truncated power series in t: `coefficients[m]` multiplies tᵐ.
#[derive(Debug, Clone, PartialEq)]
pub struct JetField {
    surface: ModelSurface,
    coefficients: Vec<ScalarField>,
}

impl JetField {
    pub fn new(surface: &ModelSurface, coefficients: Vec<ScalarField>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("a jet needs at least one coefficient".into()));
        }
        if coefficients.iter().any(|c| c.surface() != surface) {
            return Err(Error::SurfaceMismatch);
        }
        Ok(Self {
            surface: surface.clone(),
            coefficients,
        })
    }

    pub fn constant(field: &ScalarField, order: usize) -> Self {
        let mut coefficients = vec![ScalarField::zeros(field.surface()); order + 1];
        coefficients[0] = field.clone();
        Self {
            surface: field.surface().clone(),
            coefficients,
        }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn surface(&self) -> &ModelSurface {
        &self.surface
    }

    pub fn coefficient(&self, m: usize) -> &ScalarField {
        &self.coefficients[m]
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self {
            surface: self.surface.clone(),
            coefficients: self.coefficients[..=order.min(self.order())].to_vec(),
        }
    }

    /// d/dt, lowering the order by one.
    pub fn dt(&self) -> Self {
        let coefficients = if self.order() == 0 {
            vec![ScalarField::zeros(&self.surface)]
        } else {
            (1..=self.order())
                .map(|m| &self.coefficients[m] * m as f64)
                .collect()
        };
        Self {
            surface: self.surface.clone(),
            coefficients,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        Self {
            surface: self.surface.clone(),
            coefficients: (0..=order)
                .map(|m| &self.coefficients[m] + &other.coefficients[m])
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let len = self.surface.len();
        let coefficients = (0..=order)
            .map(|m| {
                let mut acc = vec![0.0; len];
                for a in 0..=m {
                    let p = self.coefficients[a].values();
                    let q = other.coefficients[m - a].values();
                    for (o, (x, y)) in acc.iter_mut().zip(p.iter().zip(q)) {
                        *o += x * y;
                    }
                }
                field(&self.surface, acc)
            })
            .collect();
        Self {
            surface: self.surface.clone(),
            coefficients,
        }
    }

    /// Series quotient; the divisor's leading coefficient must be nonzero at every node.
    pub fn div(&self, other: &Self) -> Result<Self> {
        let order = self.order().min(other.order());
        let lead = other.coefficients[0].values();
        if let Some(node) = lead.iter().position(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::JetDivision(node));
        }
        let len = self.surface.len();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        for m in 0..=order {
            let mut acc = self.coefficients[m].values().to_vec();
            for j in 1..=m {
                let gj = other.coefficients[j].values();
                let fm = &out[m - j];
                for i in 0..len {
                    acc[i] -= gj[i] * fm[i];
                }
            }
            for (a, l) in acc.iter_mut().zip(lead) {
                *a /= l;
            }
            out.push(acc);
        }
        Ok(Self {
            surface: self.surface.clone(),
            coefficients: out.into_iter().map(|v| field(&self.surface, v)).collect(),
        })
    }

    /// Coefficientwise `∂∂̄ / w`, `w` the pole weight.
    pub fn dzdzbar_reduced(&self) -> Self {
        Self {
            surface: self.surface.clone(),
            coefficients: self
                .coefficients
                .iter()
                .map(ScalarField::dzdzbar_reduced)
                .collect(),
        }
    }

    /// The jet of `|∂f|² / w`, `w` the pole weight.
    pub fn gradient_norm_sq_reduced(&self) -> Self {
        let len = self.surface.len();
        let coefficients = (0..=self.order())
            .map(|m| {
                let mut acc = vec![0.0; len];
                for a in 0..=m {
                    let pair = ScalarField::gradient_pairing_reduced(
                        &self.coefficients[a],
                        &self.coefficients[m - a],
                    );
                    for (o, q) in acc.iter_mut().zip(pair.values()) {
                        *o += q;
                    }
                }
                field(&self.surface, acc)
            })
            .collect();
        Self {
            surface: self.surface.clone(),
            coefficients,
        }
    }
}

fn field(surface: &ModelSurface, values: Vec<f64>) -> ScalarField {
    ScalarField::from_values(surface, values).expect("finite jet arithmetic")
}

/// Taylor coefficients θ_1 … θ_K of the geodesic with `φ(0) = 0`, `φ_t(0) = ψ₀`.
pub fn taylor_from_evolution(
    base: &KahlerMetric,
    psi0: &ScalarField,
    order: usize,
) -> Result<Vec<ScalarField>> {
    if order == 0 || order > MAX_JET_ORDER {
        return Err(Error::InvalidArgument(format!(
            "jet order must lie in 1..={MAX_JET_ORDER}, got {order}"
        )));
    }
    if psi0.surface() != base.surface() {
        return Err(Error::SurfaceMismatch);
    }
    let surface = base.surface();
    let mut thetas = vec![psi0.clone()];
    for k in 2..=order {
        // φ known through t^{k−1}; the t^{k−2} coefficient of φ_tt fixes θ_k.
        let mut coefficients = vec![ScalarField::zeros(surface)];
        coefficients.extend(thetas.iter().cloned());
        let phi = JetField::new(surface, coefficients)?;
        let velocity = phi.dt().truncate(k - 2);
        // numerator and denominator both divided by the pole weight
        let metric = JetField::constant(&base.reduced_coefficient(), k - 2)
            .add(&phi.dzdzbar_reduced().truncate(k - 2));
        let force = velocity.gradient_norm_sq_reduced().div(&metric)?;
        let scale = 1.0 / (k * (k - 1)) as f64;
        thetas.push(force.coefficient(k - 2) * scale);
    }
    Ok(thetas)
}

/// `φ_t = log(1 + e^{2t}|z|²) − log(1 + |z|²)` on CP¹ with the Fubini–Study base.
#[derive(Debug, Clone)]
pub struct RotationRay {
    base: KahlerMetric,
}

impl RotationRay {
    pub fn new(surface: &ModelSurface) -> Result<Self> {
        if surface.kind() != SurfaceKind::RadialCP1 {
            return Err(Error::InvalidArgument(
                "the rotation ray lives on the radial CP¹ model".into(),
            ));
        }
        Ok(Self {
            base: KahlerMetric::fubini_study(surface)?,
        })
    }

    pub fn base(&self) -> &KahlerMetric {
        &self.base
    }

    /// `(φ, φ′, φ″)` at time t, in closed form.
    pub fn sample(&self, t: f64) -> PathJet {
        let surface = self.base.surface();
        let s = surface.radial_s().expect("radial surface");
        let e = (2.0 * t).exp();
        let mut phi = Vec::with_capacity(s.len());
        let mut dphi = Vec::with_capacity(s.len());
        let mut ddphi = Vec::with_capacity(s.len());
        for &s in s {
            // (1 + e u)/(1 + u) = 1 − s + e s; σ = e s / (1 − s + e s)
            let q = 1.0 - s + e * s;
            let sigma = e * s / q;
            phi.push((s * (e - 1.0)).ln_1p());
            dphi.push(2.0 * sigma);
            ddphi.push(4.0 * sigma * (1.0 - sigma));
        }
        PathJet {
            phi: field(surface, phi),
            dphi: field(surface, dphi),
            ddphi: field(surface, ddphi),
        }
    }

    /// `g_φ` at time t in closed form: `e^{2t} (1−s)² / (1 − s + e^{2t}s)²`.
    pub fn metric_coefficient(&self, t: f64) -> ScalarField {
        let e = (2.0 * t).exp();
        ScalarField::from_radial_s_fn(self.base.surface(), |s| {
            e * ((1.0 - s) / (1.0 - s + e * s)).powi(2)
        })
        .expect("finite metric")
    }
}

impl PotentialFamily for RotationRay {
    fn base(&self) -> &KahlerMetric {
        &self.base
    }

    fn jet(&self, t: f64) -> Result<PathJet> {
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time {t} is not finite")));
        }
        Ok(self.sample(t))
    }
}

/// Convenience form of [`RotationRay::sample`].
pub fn rotation_ray_cp1(surface: &ModelSurface, t: f64) -> Result<PathJet> {
    RotationRay::new(surface)?.jet(t)
}

/// `max |φ″ − |∂φ′|²/g_φ|` at time t, every term in closed form.
///
/// With `q = 1 − s + e^{2t}s`: `|∂φ′|² = 4e^{4t} s(1−s)³/q⁴` and `g_φ = e^{2t}(1−s)²/q²`.
pub fn rotation_ray_identity_defect(surface: &ModelSurface, t: f64) -> Result<f64> {
    let ray = RotationRay::new(surface)?;
    let jet = ray.sample(t);
    let e = (2.0 * t).exp();
    let s = surface.radial_s().expect("radial surface");
    let defect = s
        .iter()
        .zip(jet.ddphi.values())
        .map(|(&s, tt)| {
            let q = 1.0 - s + e * s;
            let grad = 4.0 * e * e * s * (1.0 - s).powi(3) / q.powi(4);
            let g = e * (1.0 - s).powi(2) / (q * q);
            (tt - grad / g).abs()
        })
        .fold(0.0, f64::max);
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_velocity() {
        let m = ModelSurface::unit_torus(16).unwrap();
        let g = KahlerMetric::flat(&m).unwrap();
        let th = taylor_from_evolution(&g, &ScalarField::constant(&m, 2.5), 6).unwrap();
        assert_eq!(th[0], ScalarField::constant(&m, 2.5));
        for t in &th[1..] {
            assert!(t.sup_norm() < 1e-14);
        }
    }

    #[test]
    fn second_coefficient_on_torus() {
        let m = ModelSurface::unit_torus(32).unwrap();
        let g = KahlerMetric::flat(&m).unwrap();
        let eps = 0.3;
        let psi = ScalarField::from_torus_fn(&m, |x, _| eps * (2.0 * PI * x).cos()).unwrap();
        let th = taylor_from_evolution(&g, &psi, 2).unwrap();
        for (i, v) in th[1].values().iter().enumerate() {
            let (x, _) = m.node(i);
            assert_abs_diff_eq!(*v, 0.5 * PI * PI * eps * eps * (2.0 * PI * x).sin().powi(2), epsilon = 1e-13);
        }
    }

    #[test]
    fn third_coefficient_is_resolution_converged() {
        let eps = 0.1;
        let coarse = {
            let m = ModelSurface::unit_torus(32).unwrap();
            let psi = ScalarField::from_torus_fn(&m, |x, _| eps * (2.0 * PI * x).cos()).unwrap();
            taylor_from_evolution(&KahlerMetric::flat(&m).unwrap(), &psi, 3).unwrap()
        };
        let fine = {
            let m = ModelSurface::unit_torus(64).unwrap();
            let psi = ScalarField::from_torus_fn(&m, |x, _| eps * (2.0 * PI * x).cos()).unwrap();
            taylor_from_evolution(&KahlerMetric::flat(&m).unwrap(), &psi, 3).unwrap()
        };
        // node (i, j) on the coarse grid is node (2i, 2j) on the fine grid
        let scale = fine[2].sup_norm();
        for j in 0..32 {
            for i in 0..32 {
                let c = coarse[2].values()[j * 32 + i];
                let f = fine[2].values()[2 * j * 64 + 2 * i];
                assert!((c - f).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn jet_division_inverts_product() {
        let m = ModelSurface::unit_torus(8).unwrap();
        let a = JetField::new(
            &m,
            (0..4)
                .map(|k| ScalarField::from_torus_fn(&m, |x, y| 1.0 + k as f64 * (x - y)).unwrap())
                .collect(),
        )
        .unwrap();
        let b = JetField::new(
            &m,
            (0..4)
                .map(|k| ScalarField::from_torus_fn(&m, |x, _| 2.0 + (k as f64 * x).sin()).unwrap())
                .collect(),
        )
        .unwrap();
        let back = a.mul(&b).div(&b).unwrap();
        for k in 0..4 {
            let d = (back.coefficient(k) - a.coefficient(k)).sup_norm();
            assert!(d < 1e-13);
        }
        let zero = JetField::constant(&ScalarField::zeros(&m), 3);
        assert!(matches!(a.div(&zero), Err(Error::JetDivision(0))));
    }

    #[test]
    fn rotation_ray_closed_forms() {
        let m = ModelSurface::radial_cp1(64, 50.0).unwrap();
        let at0 = rotation_ray_cp1(&m, 0.0).unwrap();
        assert!(at0.phi.is_zero());
        for (j, &s) in m.radial_s().unwrap().iter().enumerate() {
            assert_abs_diff_eq!(at0.dphi.values()[j], 2.0 * s, epsilon = 1e-15);
        }
        let t: f64 = 0.7;
        let jet = rotation_ray_cp1(&m, t).unwrap();
        for j in 0..m.len() {
            let u = m.node(j).0.powi(2);
            let e = (2.0 * t).exp();
            assert_abs_diff_eq!(jet.phi.values()[j], (1.0 + e * u).ln() - (1.0 + u).ln(), epsilon = 1e-12);
            assert_abs_diff_eq!(jet.dphi.values()[j], 2.0 * e * u / (1.0 + e * u), epsilon = 1e-14);
        }
        assert!(rotation_ray_cp1(&ModelSurface::unit_torus(8).unwrap(), 0.0).is_err());
    }

    #[test]
    fn rotation_ray_closed_metric_matches_spectral() {
        let m = ModelSurface::radial_cp1(64, 50.0).unwrap();
        let ray = RotationRay::new(&m).unwrap();
        let t = 0.5;
        let spectral = crate::surface::metric_from_potential(ray.base(), &ray.sample(t).phi).unwrap();
        let d = (spectral.coefficient() - &ray.metric_coefficient(t)).sup_norm();
        assert!(d < 1e-10, "{d:e}");
    }

    #[test]
    fn rotation_ray_solves_geodesic_equation() {
        let m = ModelSurface::radial_cp1(64, 50.0).unwrap();
        let d = rotation_ray_identity_defect(&m, 0.5).unwrap();
        assert!(d < 1e-12, "{d:e}");
        // the same identity with spectral derivatives of the sampled velocity
        let ray = RotationRay::new(&m).unwrap();
        let r = crate::ray::geodesic_defect(ray.base(), &ray.sample(0.5)).unwrap();
        assert!(r.sup_norm() < 1e-10, "{:e}", r.sup_norm());
    }
}
