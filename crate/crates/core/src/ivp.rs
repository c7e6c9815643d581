//! Cauchy problem for the geodesic equation as a power series in t.
//!
//! The potential is `φ(x, t) = Σ_{k≥1} θ_k(x) tᵏ` with `θ_1 = ψ₀` and
//! `φ(·, 0) = 0`. Restricted to functions of `t = Re S`, the Monge–Ampère
//! determinant reads
//!
//! ```text
//! R(t) = ¼ [ (g + ∂∂̄φ) φ_tt − |∂φ_t|² ]
//! ```
//!
//! and each θ_k is read off the t^{k−2} coefficient of R:
//!
//! ```text
//! k(k−1) g θ_k = Σ_{a+b=k−2} (a+1)(b+1) Re(∂θ_{a+1} ∂̄θ_{b+1})
//!              − Σ_{j=1}^{k−2} (k−j)(k−j−1) θ_{k−j} ∂∂̄θ_j
//! ```

use crate::error::{Error, Result};
use crate::surface::{metric_from_potential, KahlerMetric, ScalarField};

/// Norm below which a coefficient counts as zero for radius estimation.
const ZERO_COEFFICIENT: f64 = 1e-13;

/// Truncated series `φ = Σ_{k=1}^{K} θ_k tᵏ` solving the Cauchy problem.
#[derive(Debug, Clone)]
pub struct GeodesicSeries {
    base: KahlerMetric,
    thetas: Vec<ScalarField>,
}

impl GeodesicSeries {
    /// The order-2 truncation `θ_1 = ψ₀`, `θ_2 = |∂ψ₀|²/(2g)`.
    pub fn new(base: &KahlerMetric, psi0: &ScalarField) -> Result<Self> {
        if psi0.surface() != base.surface() {
            return Err(Error::SurfaceMismatch);
        }
        psi0.check_band("initial velocity")?;
        let theta2 = compute_theta2(base, psi0)?;
        Ok(Self {
            base: base.clone(),
            thetas: vec![psi0.clone(), theta2],
        })
    }

    /// Solves to truncation order `order ≥ 2`.
    pub fn solve(base: &KahlerMetric, psi0: &ScalarField, order: usize) -> Result<Self> {
        let series = Self::new(base, psi0)?;
        if order <= 2 {
            return Ok(series);
        }
        extend_series(&series, order)
    }

    /// Builds a series from given coefficients without solving anything.
    ///
    /// Meant for diagnostics on synthetic data (e.g. radius estimation).
    pub fn from_coefficients(base: &KahlerMetric, thetas: Vec<ScalarField>) -> Result<Self> {
        if thetas.len() < 2 {
            return Err(Error::InvalidArgument(
                "a series needs at least θ_1 and θ_2".into(),
            ));
        }
        if thetas.iter().any(|t| t.surface() != base.surface()) {
            return Err(Error::SurfaceMismatch);
        }
        Ok(Self {
            base: base.clone(),
            thetas,
        })
    }

    pub fn base(&self) -> &KahlerMetric {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.thetas.len()
    }

    /// θ_1 … θ_K.
    pub fn thetas(&self) -> &[ScalarField] {
        &self.thetas
    }

    /// θ_k for `1 ≤ k ≤ K`.
    pub fn theta(&self, k: usize) -> Option<&ScalarField> {
        k.checked_sub(1).and_then(|i| self.thetas.get(i))
    }

    pub fn initial_velocity(&self) -> &ScalarField {
        &self.thetas[0]
    }

    /// Warning text when `|t|` exceeds the estimated convergence radius.
    pub fn trust_warning(&self, t: f64) -> Option<String> {
        let est = radius_estimate(self).ok()?;
        (t.abs() > est.radius).then(|| {
            format!(
                "t = {t} lies outside the estimated convergence radius {:.4}",
                est.radius
            )
        })
    }
}

/// `θ_2 = |∂ψ₀|² / (2g)`.
pub fn compute_theta2(base: &KahlerMetric, psi0: &ScalarField) -> Result<ScalarField> {
    if psi0.surface() != base.surface() {
        return Err(Error::SurfaceMismatch);
    }
    let grad = ScalarField::gradient_pairing_reduced(psi0, psi0);
    Ok(grad.zip_map(&base.reduced_coefficient(), |q, g| q / (2.0 * g)))
}

/// Extends a series to `target_order` through the residual-driven recursion.
pub fn extend_series(series: &GeodesicSeries, target_order: usize) -> Result<GeodesicSeries> {
    let current = series.order();
    if target_order <= current {
        return Err(Error::InvalidArgument(format!(
            "target order {target_order} must exceed the current order {current}"
        )));
    }
    // Everything is divided by the pole weight so that no cancellation occurs near a pole.
    let g = series.base.reduced_coefficient();
    let mut thetas = series.thetas.clone();
    let mut laps: Vec<ScalarField> = thetas.iter().map(ScalarField::dzdzbar_reduced).collect();

    for k in current + 1..=target_order {
        let mut acc = vec![0.0; g.values().len()];
        // gradient convolution, a = 0..k−2 with θ index a+1 and b+1 = k−1−a
        for a in 0..=k - 2 {
            let b = k - 2 - a;
            let w = ((a + 1) * (b + 1)) as f64;
            let pair = ScalarField::gradient_pairing_reduced(&thetas[a], &thetas[b]);
            for (out, q) in acc.iter_mut().zip(pair.values()) {
                *out += w * q;
            }
        }
        // metric correction, j = 1..k−2 pairs ∂∂̄θ_j with θ_{k−j}
        for j in 1..=k - 2 {
            let m = k - j;
            let w = (m * (m - 1)) as f64;
            let lj = laps[j - 1].values();
            let tm = thetas[m - 1].values();
            for (out, (l, t)) in acc.iter_mut().zip(lj.iter().zip(tm)) {
                *out -= w * l * t;
            }
        }
        let kk = (k * (k - 1)) as f64;
        let values = acc
            .iter()
            .zip(g.values())
            .map(|(a, g)| a / (kk * g))
            .collect();
        let theta = ScalarField::from_values(g.surface(), values)?;
        theta.check_band(&format!("θ_{k} (order {k})"))?;
        laps.push(theta.dzdzbar_reduced());
        thetas.push(theta);
    }
    Ok(GeodesicSeries {
        base: series.base.clone(),
        thetas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDerivative {
    Value,
    Dt,
    Dtt,
}

/// Horner evaluation of the truncated series or one of its t-derivatives.
pub fn evaluate(series: &GeodesicSeries, t: f64, order: TimeDerivative) -> ScalarField {
    let shift = match order {
        TimeDerivative::Value => 0,
        TimeDerivative::Dt => 1,
        TimeDerivative::Dtt => 2,
    };
    let surface = series.base.surface();
    let mut acc = vec![0.0; surface.len()];
    // coefficient of t^{k−shift} is k!/(k−shift)! θ_k
    for k in (shift.max(1)..=series.order()).rev() {
        let factor = match shift {
            0 => 1.0,
            1 => k as f64,
            _ => (k * (k - 1)) as f64,
        };
        for (a, th) in acc.iter_mut().zip(series.thetas[k - 1].values()) {
            *a = *a * t + factor * th;
        }
    }
    if shift == 0 {
        for a in acc.iter_mut() {
            *a *= t;
        }
    }
    ScalarField::from_values(surface, acc).expect("finite series values")
}

/// Pointwise Monge–Ampère determinant along the series.
#[derive(Debug, Clone)]
pub struct HcmaResidual {
    pub sup_norm: f64,
    pub field: ScalarField,
}

/// `R(t) = ¼[(g + ∂∂̄φ) φ_tt − |∂φ_t|²]`.
pub fn hcma_residual(series: &GeodesicSeries, t: f64) -> Result<HcmaResidual> {
    let phi = evaluate(series, t, TimeDerivative::Value);
    let dphi = evaluate(series, t, TimeDerivative::Dt);
    let ddphi = evaluate(series, t, TimeDerivative::Dtt);
    let field = hcma_density(&series.base, &phi, &dphi, &ddphi)?;
    Ok(HcmaResidual {
        sup_norm: field.sup_norm(),
        field,
    })
}

/// The determinant form for an arbitrary path jet `(φ, φ_t, φ_tt)`.
pub fn hcma_density(
    base: &KahlerMetric,
    phi: &ScalarField,
    dphi: &ScalarField,
    ddphi: &ScalarField,
) -> Result<ScalarField> {
    let metric = metric_from_potential(base, phi)?;
    let grad = ScalarField::gradient_pairing(dphi, dphi);
    let gphi = metric.coefficient();
    let values = gphi
        .values()
        .iter()
        .zip(ddphi.values())
        .zip(grad.values())
        .map(|((g, tt), q)| 0.25 * (g * tt - q))
        .collect();
    ScalarField::from_values(phi.surface(), values)
}

/// First sampled `t ∈ [0, t_max]` where `ω_φ` stops being positive.
pub fn positivity_horizon(series: &GeodesicSeries, t_max: f64, steps: usize) -> Result<Option<f64>> {
    if steps < 2 {
        return Err(Error::InvalidArgument("positivity scan needs at least 2 steps".into()));
    }
    for i in 0..steps {
        let t = t_max * i as f64 / (steps - 1) as f64;
        let phi = evaluate(series, t, TimeDerivative::Value);
        match metric_from_potential(&series.base, &phi) {
            Ok(_) => {}
            Err(Error::Positivity(_)) => return Ok(Some(t)),
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusMethod {
    RatioTest,
    RootTest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusEstimate {
    /// Positive, `f64::INFINITY` when the tail vanishes.
    pub radius: f64,
    pub method: RadiusMethod,
    /// `‖θ_k‖_∞` for k = 1 … K.
    pub coefficient_norms: Vec<f64>,
}

/// Root-test estimate of the convergence radius from `‖θ_k‖_∞`.
pub fn radius_estimate(series: &GeodesicSeries) -> Result<RadiusEstimate> {
    radius_estimate_with(series, RadiusMethod::RootTest)
}

pub fn radius_estimate_with(series: &GeodesicSeries, method: RadiusMethod) -> Result<RadiusEstimate> {
    if series.order() < 4 {
        return Err(Error::InvalidArgument(format!(
            "radius estimation needs order ≥ 4, got {}",
            series.order()
        )));
    }
    let norms: Vec<f64> = series.thetas.iter().map(ScalarField::sup_norm).collect();
    let scale = norms.iter().fold(1.0_f64, |m, &n| m.max(n));
    let live: Vec<(usize, f64)> = norms
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &n)| n > ZERO_COEFFICIENT * scale)
        .map(|(i, &n)| (i + 1, n))
        .collect();
    if live.is_empty() {
        return Ok(RadiusEstimate {
            radius: f64::INFINITY,
            method,
            coefficient_norms: norms,
        });
    }
    let radius = match method {
        RadiusMethod::RatioTest => {
            let tail: Vec<&(usize, f64)> = live.iter().rev().take(2).collect();
            if tail.len() < 2 {
                f64::INFINITY
            } else {
                let (k1, n1) = *tail[0];
                let (k0, n0) = *tail[1];
                (n0 / n1).powf(1.0 / (k1 - k0) as f64)
            }
        }
        RadiusMethod::RootTest => {
            if live.len() < 2 {
                f64::INFINITY
            } else {
                // least-squares slope of log‖θ_k‖ against k
                let n = live.len() as f64;
                let mk = live.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
                let ml = live.iter().map(|(_, v)| v.ln()).sum::<f64>() / n;
                let num: f64 = live
                    .iter()
                    .map(|(k, v)| (*k as f64 - mk) * (v.ln() - ml))
                    .sum();
                let den: f64 = live.iter().map(|(k, _)| (*k as f64 - mk).powi(2)).sum();
                (-num / den).exp()
            }
        }
    };
    Ok(RadiusEstimate {
        radius,
        method,
        coefficient_norms: norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ModelSurface;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn torus_setup(eps: f64) -> (KahlerMetric, ScalarField) {
        let m = ModelSurface::unit_torus(32).unwrap();
        let psi = ScalarField::from_torus_fn(&m, |x, _| eps * (2.0 * PI * x).cos()).unwrap();
        (KahlerMetric::flat(&m).unwrap(), psi)
    }

    #[test]
    fn theta2_on_torus() {
        let eps = 0.1;
        let (g, psi) = torus_setup(eps);
        let th2 = compute_theta2(&g, &psi).unwrap();
        for (i, v) in th2.values().iter().enumerate() {
            let (x, _) = g.surface().node(i);
            let expect = 0.5 * PI * PI * eps * eps * (2.0 * PI * x).sin().powi(2);
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn theta2_on_fubini_study() {
        let m = ModelSurface::radial_cp1(48, 50.0).unwrap();
        let g = KahlerMetric::fubini_study(&m).unwrap();
        let psi = ScalarField::from_radial_s_fn(&m, |s| 2.0 * s).unwrap();
        let th2 = compute_theta2(&g, &psi).unwrap();
        for (j, &s) in m.radial_s().unwrap().iter().enumerate() {
            // 2r²/(1+r²)² = 2s(1−s)
            assert_abs_diff_eq!(th2.values()[j], 2.0 * s * (1.0 - s), epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_velocity_is_exact() {
        let m = ModelSurface::unit_torus(16).unwrap();
        let g = KahlerMetric::flat(&m).unwrap();
        let psi = ScalarField::constant(&m, 1.3);
        let s = GeodesicSeries::solve(&g, &psi, 7).unwrap();
        for k in 2..=7 {
            assert!(s.theta(k).unwrap().sup_norm() < 1e-14);
        }
        let v = evaluate(&s, 0.7, TimeDerivative::Value);
        for x in v.values() {
            assert_abs_diff_eq!(*x, 0.7 * 1.3, epsilon = 1e-14);
        }
        assert!(hcma_residual(&s, 0.4).unwrap().sup_norm < 1e-14);
        assert_eq!(positivity_horizon(&s, 3.0, 10).unwrap(), None);
        assert_eq!(radius_estimate(&s).unwrap().radius, f64::INFINITY);
    }

    #[test]
    fn evaluate_at_zero() {
        let (g, psi) = torus_setup(0.1);
        let s = GeodesicSeries::solve(&g, &psi, 5).unwrap();
        assert!(evaluate(&s, 0.0, TimeDerivative::Value).is_zero());
        assert_eq!(evaluate(&s, 0.0, TimeDerivative::Dt), psi);
        let tt = evaluate(&s, 0.0, TimeDerivative::Dtt);
        assert_eq!(tt, s.theta(2).unwrap() * 2.0);
    }

    #[test]
    fn evaluate_matches_direct_sum() {
        let (g, psi) = torus_setup(0.2);
        let s = GeodesicSeries::solve(&g, &psi, 6).unwrap();
        let t: f64 = 0.37;
        let v = evaluate(&s, t, TimeDerivative::Value);
        let d = evaluate(&s, t, TimeDerivative::Dt);
        let dd = evaluate(&s, t, TimeDerivative::Dtt);
        for i in 0..v.values().len() {
            let mut sv = 0.0;
            let mut sd = 0.0;
            let mut sdd = 0.0;
            for k in 1..=6 {
                let th = s.theta(k).unwrap().values()[i];
                sv += th * t.powi(k as i32);
                sd += k as f64 * th * t.powi(k as i32 - 1);
                if k >= 2 {
                    sdd += (k * (k - 1)) as f64 * th * t.powi(k as i32 - 2);
                }
            }
            assert_abs_diff_eq!(v.values()[i], sv, epsilon = 1e-15);
            assert_abs_diff_eq!(d.values()[i], sd, epsilon = 1e-15);
            assert_abs_diff_eq!(dd.values()[i], sdd, epsilon = 1e-14);
        }
    }

    #[test]
    fn residual_vanishes_to_truncation_order() {
        let (g, psi) = torus_setup(0.1);
        let s = GeodesicSeries::solve(&g, &psi, 6).unwrap();
        let r1 = hcma_residual(&s, 0.1).unwrap().sup_norm;
        let r2 = hcma_residual(&s, 0.05).unwrap().sup_norm;
        assert!(r1 / r2 >= 2f64.powf(6.0 - 1.2), "ratio {}", r1 / r2);
    }

    #[test]
    fn synthetic_radius() {
        let m = ModelSurface::unit_torus(8).unwrap();
        let g = KahlerMetric::flat(&m).unwrap();
        let c: f64 = 3.0;
        let thetas = (1..=8)
            .map(|k| ScalarField::constant(&m, c.powi(k)))
            .collect();
        let s = GeodesicSeries::from_coefficients(&g, thetas).unwrap();
        for method in [RadiusMethod::RatioTest, RadiusMethod::RootTest] {
            let r = radius_estimate_with(&s, method).unwrap().radius;
            assert!((r - 1.0 / c).abs() < 0.05 / c, "{method:?}: {r}");
        }
    }

    #[test]
    fn large_amplitude_has_finite_horizon() {
        let (g, psi) = torus_setup(1.0);
        let s = GeodesicSeries::solve(&g, &psi, 4).unwrap();
        let h = positivity_horizon(&s, 1.0, 201).unwrap();
        assert!(matches!(h, Some(t) if t > 0.0 && t < 1.0), "{h:?}");
    }

    #[test]
    fn radius_requires_order_four() {
        let (g, psi) = torus_setup(0.1);
        let s = GeodesicSeries::new(&g, &psi).unwrap();
        assert!(radius_estimate(&s).is_err());
    }
}
