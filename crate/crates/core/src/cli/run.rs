use std::f64::consts::PI;
use std::sync::Arc;

use crate::divisor::{self, BidegreeSeries, ExtensionForm};
use crate::error::Error;
use crate::ivp::{self, GeodesicSeries};
use crate::oracle::RotationRay;
use crate::ray::{self, PathInH};
use crate::surface::{integrate, integrate_area, KahlerMetric, ModelSurface, ScalarField, SurfaceKind};

use super::config::{Problem, RayFamilyChoice, ScenarioConfig, Tolerances};
use super::output::{Cell, Outputs, Real, Summary, Table};

/// A run that could not complete.
#[derive(Debug)]
pub enum RunError {
    /// Inputs that are well-formed JSON but unusable; exit code 3.
    Config(String),
    /// A numerical or I/O failure during the run; exit code 1.
    Runtime(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

pub fn surface_label(m: &ModelSurface) -> String {
    match m.radial_cutoff() {
        Some(r) => format!("radial_cp1(n={}, cutoff={r})", m.resolution()),
        None => format!("unit_torus(n={})", m.resolution()),
    }
}

pub fn log_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let (a, b) = (t0.ln(), t1.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn lin_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Least-squares slope of `log y` against `log t`, over the points with `y > 0`.
pub fn loglog_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&t, &y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn mean(f: &ScalarField, base: &KahlerMetric) -> Result<f64, Error> {
    let one = ScalarField::constant(f.surface(), 1.0);
    Ok(integrate(f, base)? / integrate(&one, base)?)
}

/// `4π ∫_M R i dz∧dz̄`, the WZW first-variation integrand for `δF ≡ 1`.
fn wzw_density(path: &PathInH, t: f64) -> Result<f64, Error> {
    let jet = path.jet(t)?;
    let r = ivp::hcma_density(path.base(), &jet.phi, &jet.dphi, &jet.ddphi)?;
    Ok(4.0 * PI * integrate_area(&r).value)
}

fn residual_table(path: &PathInH, times: &[f64]) -> Result<(Table, f64, f64), Error> {
    let mut table = Table::new(&["t", "hcma", "geodesic", "wzw"]);
    let (mut max_hcma, mut max_geo) = (0.0_f64, 0.0_f64);
    for &t in times {
        let jet = path.jet(t)?;
        let hcma = ivp::hcma_density(path.base(), &jet.phi, &jet.dphi, &jet.ddphi)?.sup_norm();
        let geo = ray::geodesic_residual(path, t)?.sup_norm;
        let wzw = wzw_density(path, t)?;
        max_hcma = max_hcma.max(hcma);
        max_geo = max_geo.max(geo);
        table.push(vec![Cell::Real(t), Cell::Real(hcma), Cell::Real(geo), Cell::Real(wzw)]);
    }
    Ok((table, max_hcma, max_geo))
}

/// Energy, C⁰ norm and cumulative length from `from` at each time.
fn ray_table(path: &PathInH, from: f64, times: &[f64]) -> Result<(Table, Vec<f64>, f64), Error> {
    let mut table = Table::new(&["x", "energy", "c0", "length"]);
    let mut energies = Vec::with_capacity(times.len());
    let mut cumulative = 0.0;
    let mut previous = from;
    for &t in times {
        if t > previous {
            cumulative += ray::length(path, previous, t)?;
            previous = t;
        }
        let e = ray::energy(path, t)?;
        let c0 = path.potential(t)?.sup_norm();
        energies.push(e);
        table.push(vec![Cell::Real(t), Cell::Real(e), Cell::Real(c0), Cell::Real(cumulative)]);
    }
    Ok((table, energies, cumulative))
}

pub fn run(problem: Problem, config: &ScenarioConfig, tol: &Tolerances, seed: u64) -> Result<Outputs, RunError> {
    config.check(problem).map_err(RunError::Config)?;
    match problem {
        Problem::Ivp => run_ivp(config, tol),
        Problem::Divisor => run_divisor(config),
        Problem::Ray => run_ray(config),
        Problem::Validate => Ok(super::validate::run_validate(tol, seed)),
    }
}

fn setup(config: &ScenarioConfig, problem: Problem) -> Result<(ModelSurface, KahlerMetric), RunError> {
    let surface = config.surface_for(problem).map_err(RunError::Config)?;
    let base = config.metric_for(&surface).map_err(RunError::Config)?;
    Ok((surface, base))
}

fn run_ivp(config: &ScenarioConfig, tol: &Tolerances) -> Result<Outputs, RunError> {
    let (surface, base) = setup(config, Problem::Ivp)?;
    let spec = &config.ivp;
    let psi0 = spec.velocity.build(&surface).map_err(RunError::Config)?;
    let series = GeodesicSeries::solve(&base, &psi0, spec.order)?;
    let mut summary = Summary::new("ivp", surface_label(&surface));
    summary.order = Some(spec.order);

    let mut series_table = Table::new(&["k", "sup_norm", "mean"]);
    for (k, theta) in series.thetas().iter().enumerate() {
        series_table.push(vec![
            Cell::Int(k as i64 + 1),
            Cell::Real(theta.sup_norm()),
            Cell::Real(mean(theta, &base)?),
        ]);
    }
    summary.radius_estimate = Some(Real(ivp::radius_estimate(&series)?.radius));
    summary.positivity_horizon = ivp::positivity_horizon(&series, spec.horizon_t_max, spec.horizon_steps)?.map(Real);

    let times = log_spaced(spec.t_min, spec.t_max, spec.t_samples);
    if let Some(w) = series.trust_warning(spec.t_max) {
        summary.warnings.push(w);
    }
    let path = PathInH::from_series(series);
    let (residuals, max_hcma, max_geo) = residual_table(&path, &times)?;
    let hcma: Vec<f64> = residuals
        .rows
        .iter()
        .map(|r| match r[1] {
            Cell::Real(v) => v,
            Cell::Int(v) => v as f64,
        })
        .collect();
    let slope = loglog_slope(&times, &hcma);
    let threshold = spec.order as f64 - tol.residual_slope_margin;
    summary.fitted_residual_order = Some(Real(slope));
    summary.residual_order_threshold = Some(Real(threshold));
    summary.max_hcma_residual = Some(Real(max_hcma));
    summary.max_geodesic_residual = Some(Real(max_geo));
    if slope < threshold {
        summary.warnings.push(format!(
            "fitted residual order {slope:.3} is below the expected {threshold:.3}"
        ));
    }

    let (ray_tab, energies, total) = ray_table(&path, 0.0, &times)?;
    summary.speed_drift = Some(Real(ray::speed_drift(&energies)));
    summary.length = Some(Real(total));
    Ok(Outputs {
        series: Some(series_table),
        residuals: Some(residuals),
        ray: Some(ray_tab),
        summary,
    })
}

fn run_divisor(config: &ScenarioConfig) -> Result<Outputs, RunError> {
    let (surface, base) = setup(config, Problem::Divisor)?;
    let spec = &config.divisor;
    let h = spec.h.build(&surface).map_err(RunError::Config)?;
    let mut extension = ExtensionForm::new(&base, h)?;
    if let Some(twist) = &spec.twist {
        let k = twist.field.build(&surface).map_err(RunError::Config)?;
        extension = extension.with_twist(twist.weight, k.to_complex())?;
    }
    let series = divisor::solve_order(&extension, spec.order)?;
    let residuals = divisor::residual_mod_sk(&series, spec.order)?;
    let mut summary = Summary::new("divisor", surface_label(&surface));
    summary.order = Some(spec.order);

    let mut series_table = Table::new(&["i", "j", "weight", "sup_norm", "mean", "residual"]);
    for (&(i, j), theta) in series.thetas() {
        // θ_ij is fixed by the S^{i−1} S̄^{j−1} coefficient
        let residual = residuals
            .iter()
            .find(|(key, _)| *key == (i - 1, j - 1))
            .map_or(f64::NAN, |r| r.1);
        series_table.push(vec![
            Cell::Int(i as i64),
            Cell::Int(j as i64),
            Cell::Int(BidegreeSeries::weight(i, j)),
            Cell::Real(theta.sup_norm()),
            Cell::Real(mean(&theta.re(), &base)?),
            Cell::Real(residual),
        ]);
    }
    summary.max_residual_mod_sk = Some(Real(residuals.iter().map(|r| r.1).fold(0.0, f64::max)));
    summary.equivariance_defect = Some(Real(divisor::equivariance_check(&series, spec.phases)?));
    summary.radius_estimate = Some(Real(series.trust_radius()));

    let xs = lin_spaced(spec.x_min, spec.x_max, spec.samples);
    let (residual_tab, ray_tab) = match divisor::to_geodesic_ray(&series, spec.x_min, spec.x_max, spec.samples) {
        Ok(degeneration) => {
            if let Some(w) = &degeneration.warning {
                summary.warnings.push(w.clone());
            }
            if degeneration.potentials.iter().all(ScalarField::is_zero) {
                summary.warnings.push("the extracted ray is identically zero".into());
            }
            let path = degeneration.path();
            let (residual_tab, max_hcma, max_geo) = residual_table(&path, &xs)?;
            let (ray_tab, energies, total) = ray_table(&path, spec.x_min, &xs)?;
            let c0 = ray::c0_profile(&path, &xs)?;
            summary.max_hcma_residual = Some(Real(max_hcma));
            summary.max_geodesic_residual = Some(Real(max_geo));
            summary.speed_drift = Some(Real(ray::speed_drift(&energies)));
            summary.length = Some(Real(total));
            summary.c0_strictly_increasing = Some(c0.strictly_increasing);
            (residual_tab, ray_tab)
        }
        Err(Error::NotInvariant(defect)) => {
            summary.warnings.push(format!(
                "no ray extracted: the series is not S¹-invariant (defect {defect:.3e})"
            ));
            summary.length = Some(Real(0.0));
            (
                Table::new(&["t", "hcma", "geodesic", "wzw"]),
                Table::new(&["x", "energy", "c0", "length"]),
            )
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Outputs {
        series: Some(series_table),
        residuals: Some(residual_tab),
        ray: Some(ray_tab),
        summary,
    })
}

fn run_ray(config: &ScenarioConfig) -> Result<Outputs, RunError> {
    let surface = config.surface_for(Problem::Ray).map_err(RunError::Config)?;
    if surface.kind() != SurfaceKind::RadialCP1 {
        return Err(RunError::Config("the rotation ray needs the radial_cp1 surface".into()));
    }
    if config.metric.is_some() {
        return Err(RunError::Config(
            "the rotation ray fixes the Fubini–Study metric; remove the metric key".into(),
        ));
    }
    let spec = &config.ray;
    let RayFamilyChoice::Rotation = spec.family;
    let path = PathInH::from_family(Arc::new(RotationRay::new(&surface)?));
    let mut summary = Summary::new("ray", surface_label(&surface));

    let xs = lin_spaced(0.0, spec.x_max, spec.samples);
    let (residual_tab, max_hcma, max_geo) = residual_table(&path, &xs)?;
    let (ray_tab, energies, total) = ray_table(&path, 0.0, &xs)?;
    let c0 = ray::c0_profile(&path, &lin_spaced(spec.c0_x0, spec.c0_x1, spec.c0_samples))?;
    summary.max_hcma_residual = Some(Real(max_hcma));
    summary.max_geodesic_residual = Some(Real(max_geo));
    summary.speed_drift = Some(Real(ray::speed_drift(&energies)));
    summary.length = Some(Real(total));
    let (first, last) = (c0.values[0], c0.values[c0.values.len() - 1]);
    summary.c0_ratio = Some(Real(if first > 0.0 { last / first } else { f64::INFINITY }));
    summary.c0_strictly_increasing = Some(c0.strictly_increasing);
    Ok(Outputs {
        series: None,
        residuals: Some(residual_tab),
        ray: Some(ray_tab),
        summary,
    })
}
