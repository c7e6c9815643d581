//! The invariant suites behind the `validate` subcommand.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divisor::{self, ExtensionForm};
use crate::error::Result;
use crate::ivp::{self, extend_series, GeodesicSeries};
use crate::oracle::{taylor_from_evolution, RotationRay};
use crate::ray::{self, PathInH, PathJet, PotentialFamily};
use crate::surface::{
    differentiate, integrate, metric_from_potential, DerivativeMode, KahlerMetric, ModelSurface, ScalarField,
};

use super::config::Tolerances;
use super::output::{Outputs, Summary, SuiteResult};
use super::run::{lin_spaced, log_spaced, loglog_slope};

const RAY_CUTOFF: f64 = 50.0;
const RAY_RESOLUTION: usize = 256;
const LENGTH_RESOLUTION: usize = 640;
const RANDOM_VARIATIONS: usize = 10;

/// `φ = a(t + t²)cos(2πx)` on the flat torus; not a geodesic for `a ≠ 0`.
#[derive(Debug)]
pub struct DriftingMode {
    pub base: KahlerMetric,
    pub amplitude: f64,
}

impl PotentialFamily for DriftingMode {
    fn base(&self) -> &KahlerMetric {
        &self.base
    }

    fn jet(&self, t: f64) -> Result<PathJet> {
        let a = self.amplitude;
        let mode = ScalarField::from_torus_fn(self.base.surface(), |x, _| a * (2.0 * PI * x).cos())?;
        Ok(PathJet {
            phi: &mode * (t + t * t),
            dphi: &mode * (1.0 + 2.0 * t),
            ddphi: &mode * 2.0,
        })
    }
}

fn flat_torus(n: usize) -> Result<(ModelSurface, KahlerMetric)> {
    let m = ModelSurface::unit_torus(n)?;
    let g = KahlerMetric::flat(&m)?;
    Ok((m, g))
}

fn cosine(m: &ModelSurface, a: f64) -> Result<ScalarField> {
    ScalarField::from_torus_fn(m, |x, _| a * (2.0 * PI * x).cos())
}

fn rotation_path(n: usize) -> Result<PathInH> {
    let m = ModelSurface::radial_cp1(n, RAY_CUTOFF)?;
    Ok(PathInH::from_family(Arc::new(RotationRay::new(&m)?)))
}

fn suite(name: &str, check: impl FnOnce() -> Result<SuiteResult>) -> SuiteResult {
    check().unwrap_or_else(|e| SuiteResult::failed(name, e.to_string()))
}

fn integrate_one() -> Result<SuiteResult> {
    let (m, g) = flat_torus(16)?;
    let v = integrate(&ScalarField::constant(&m, 1.0), &g)?;
    Ok(SuiteResult::below("calculus.integrate_one_exact", (v - 2.0).abs(), f64::MIN_POSITIVE))
}

fn divergence(tol: &Tolerances) -> Result<SuiteResult> {
    let (m, g) = flat_torus(32)?;
    let f = ScalarField::from_torus_fn(&m, |x, y| ((2.0 * PI * x).sin() + 0.5 * (2.0 * PI * y).cos()).exp())?;
    let v = integrate(&f.dzdzbar(), &g)?;
    Ok(SuiteResult::below("calculus.divergence_theorem", v.abs(), tol.divergence))
}

fn conjugacy(tol: &Tolerances) -> Result<SuiteResult> {
    let (m, _) = flat_torus(64)?;
    let f = ScalarField::from_torus_fn(&m, |x, y| (0.3 * (2.0 * PI * x).sin() * (4.0 * PI * y).cos()).exp())?;
    let dz = differentiate(&f, DerivativeMode::Dz)?;
    let dzbar = differentiate(&f, DerivativeMode::Dzbar)?;
    Ok(SuiteResult::below(
        "calculus.dz_dzbar_conjugate",
        (&dz - &dzbar.conj()).sup_norm(),
        tol.consistency,
    ))
}

/// Order of agreement between the spectral x-derivative and 4th-order differences.
fn spectral_vs_differences() -> Result<SuiteResult> {
    let mut ns = Vec::new();
    let mut errors = Vec::new();
    for n in [16, 32, 64, 128] {
        let m = ModelSurface::unit_torus(n)?;
        let f = ScalarField::from_torus_fn(&m, |x, _| (0.5 * (2.0 * PI * x).sin()).exp())?;
        let spectral = f.dx().expect("torus field");
        let h = 1.0 / n as f64;
        let v = f.values();
        let mut err: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let at = |k: isize| v[j * n + (i as isize + k).rem_euclid(n as isize) as usize];
                let fd = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
                err = err.max((fd - spectral.values()[j * n + i]).abs());
            }
        }
        ns.push(h);
        errors.push(err);
    }
    Ok(SuiteResult::above(
        "calculus.spectral_vs_fd_order",
        loglog_slope(&ns, &errors),
        3.5,
    ))
}

fn oracle_agreement(name: &str, base: &KahlerMetric, psi0: &ScalarField, tol: &Tolerances) -> Result<SuiteResult> {
    let order = 6;
    let series = extend_series(&GeodesicSeries::new(base, psi0)?, order)?;
    let oracle = taylor_from_evolution(base, psi0, order)?;
    let floor = 1e-14 * psi0.sup_norm();
    let worst = series
        .thetas()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).sup_norm() / b.sup_norm().max(floor))
        .fold(0.0, f64::max);
    Ok(SuiteResult::below(name, worst, tol.oracle))
}

fn oracle_torus(tol: &Tolerances) -> Result<SuiteResult> {
    let (m, g) = flat_torus(64)?;
    oracle_agreement("ivp.oracle_torus", &g, &cosine(&m, 0.1)?, tol)
}

fn oracle_fubini_study(tol: &Tolerances) -> Result<SuiteResult> {
    let m = ModelSurface::radial_cp1(64, RAY_CUTOFF)?;
    let g = KahlerMetric::fubini_study(&m)?;
    let psi0 = ScalarField::from_radial_s_fn(&m, |s| 2.0 * s)?;
    oracle_agreement("ivp.oracle_fubini_study", &g, &psi0, tol)
}

fn residual_order(order: usize, tol: &Tolerances) -> Result<SuiteResult> {
    let (m, g) = flat_torus(64)?;
    let series = GeodesicSeries::solve(&g, &cosine(&m, 0.1)?, order)?;
    let ts = log_spaced(1e-3, 1e-1, 9);
    let rs = ts
        .iter()
        .map(|&t| ivp::hcma_residual(&series, t).map(|r| r.sup_norm))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult::above(
        &format!("ivp.residual_order_k{order}"),
        loglog_slope(&ts, &rs),
        order as f64 - tol.residual_slope_margin,
    ))
}

fn rotation_geodesic(tol: &Tolerances) -> Result<Vec<SuiteResult>> {
    let path = rotation_path(RAY_RESOLUTION)?;
    let ts = lin_spaced(0.0, 1.0, 11);
    let mut worst: f64 = 0.0;
    let mut energies = Vec::new();
    for &t in &ts {
        worst = worst.max(ray::geodesic_residual(&path, t)?.sup_norm);
        energies.push(ray::energy(&path, t)?);
    }
    Ok(vec![
        SuiteResult::below("ray.rotation_geodesic_residual", worst, tol.geodesic),
        SuiteResult::below("ray.rotation_energy_drift", ray::speed_drift(&energies), tol.energy_drift),
    ])
}

/// `max |R − ¼ g_φ (φ″ − |∂φ′|²/g_φ)|` over a set of paths and times.
fn consistency(tol: &Tolerances) -> Result<SuiteResult> {
    let (m, g) = flat_torus(32)?;
    let cp1 = ModelSurface::radial_cp1(128, RAY_CUTOFF)?;
    let fs = KahlerMetric::fubini_study(&cp1)?;
    let paths = [
        (rotation_path(128)?, vec![0.0, 0.5, 1.0]),
        (
            PathInH::from_series(GeodesicSeries::solve(&g, &cosine(&m, 0.1)?, 6)?),
            vec![0.0, 0.05, 0.1],
        ),
        (
            PathInH::from_series(GeodesicSeries::solve(&fs, &ScalarField::from_radial_s_fn(&cp1, |s| 2.0 * s)?, 6)?),
            vec![0.0, 0.1, 0.2],
        ),
        (
            PathInH::from_family(Arc::new(DriftingMode { base: g.clone(), amplitude: 0.01 })),
            vec![0.0, 0.5, 1.0],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (path, times) in &paths {
        for &t in times {
            let jet = path.jet(t)?;
            let r = ivp::hcma_density(path.base(), &jet.phi, &jet.dphi, &jet.ddphi)?;
            let d = ray::geodesic_defect(path.base(), &jet)?;
            let g_phi = metric_from_potential(path.base(), &jet.phi)?;
            let pinned = &(g_phi.coefficient() * &d) * 0.25;
            worst = worst.max((&r - &pinned).sup_norm());
        }
    }
    Ok(SuiteResult::below("ray.hcma_geodesic_consistency", worst, tol.consistency))
}

fn wzw_random(tol: &Tolerances, seed: u64) -> Result<SuiteResult> {
    let path = rotation_path(RAY_RESOLUTION)?;
    let surface = path.base().surface().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..RANDOM_VARIATIONS {
        let c: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let shape = ScalarField::from_radial_s_fn(&surface, |s| c[0] + c[1] * s + c[2] * s * s)?;
        let norm = shape.sup_norm();
        let di = ray::wzw_first_variation(&path, (0.0, 1.0), |t| {
            Ok(&shape * if t <= 0.0 || t >= 1.0 { 0.0 } else { (PI * t).sin() })
        })?;
        worst = worst.max(di.abs() / norm);
    }
    Ok(SuiteResult::below("ray.wzw_geodesic_random", worst, tol.wzw))
}

fn wzw_non_geodesic() -> Result<SuiteResult> {
    let (m, g) = flat_torus(32)?;
    let path = PathInH::from_family(Arc::new(DriftingMode { base: g, amplitude: 0.01 }));
    let mode = cosine(&m, 1.0)?;
    let di = ray::wzw_first_variation(&path, (0.0, 1.0), |t| {
        Ok(&mode * if t <= 0.0 || t >= 1.0 { 0.0 } else { (PI * t).sin() })
    })?;
    Ok(SuiteResult::above("ray.wzw_non_geodesic", di.abs(), 1e-3))
}

fn divisor_residual(name: &str, extension: ExtensionForm, tol: &Tolerances) -> Result<SuiteResult> {
    let series = divisor::solve_order(&extension, 4)?;
    let worst = divisor::residual_mod_sk(&series, 4)?
        .iter()
        .map(|r| r.1)
        .fold(0.0, f64::max);
    Ok(SuiteResult::below(name, worst, tol.divisor_residual))
}

fn divisor_suites(tol: &Tolerances) -> Vec<SuiteResult> {
    let mut out = Vec::new();
    let setup = flat_torus(32);
    let (m, g) = match setup {
        Ok(v) => v,
        Err(e) => return vec![SuiteResult::failed("divisor.setup", e.to_string())],
    };
    out.push(suite("divisor.residual_constant_h", || {
        divisor_residual(
            "divisor.residual_constant_h",
            ExtensionForm::new(&g, ScalarField::constant(&m, 0.5))?,
            tol,
        )
    }));
    out.push(suite("divisor.residual_cosine_h", || {
        divisor_residual("divisor.residual_cosine_h", ExtensionForm::new(&g, cosine(&m, 0.3)?)?, tol)
    }));
    out.push(suite("divisor.residual_twisted", || {
        let twist = cosine(&m, 0.2)?.to_complex();
        let extension = ExtensionForm::new(&g, cosine(&m, 0.3)?)?.with_twist(1, twist)?;
        divisor_residual("divisor.residual_twisted", extension, tol)
    }));
    out.push(suite("divisor.trivial_extension_zero", || {
        let series = divisor::solve_order(&ExtensionForm::pullback(&g), 4)?;
        let worst = series.thetas().values().map(|f| f.sup_norm()).fold(0.0, f64::max);
        Ok(SuiteResult::below("divisor.trivial_extension_zero", worst, f64::MIN_POSITIVE))
    }));
    out.push(suite("divisor.invariance_defect", || {
        let series = divisor::solve_order(&ExtensionForm::new(&g, cosine(&m, 0.3)?)?, 4)?;
        Ok(SuiteResult::below(
            "divisor.invariance_defect",
            divisor::equivariance_check(&series, 8)?,
            tol.invariance,
        ))
    }));
    out.push(suite("divisor.injection_linearity", || {
        let series = divisor::solve_order(&ExtensionForm::new(&g, cosine(&m, 0.3)?)?, 4)?;
        let bump = cosine(&m, 1.0)?.to_complex();
        let ratios = [1e-3, 2e-3, 4e-3]
            .iter()
            .map(|&a| {
                let injected = series.with_theta(1, 2, bump.scale(a.into()))?;
                Ok(divisor::equivariance_check(&injected, 8)? / a)
            })
            .collect::<Result<Vec<f64>>>()?;
        let spread = ratios.iter().map(|r| (r / ratios[0] - 1.0).abs()).fold(0.0, f64::max);
        Ok(SuiteResult::below("divisor.injection_linearity", spread, 0.05))
    }));
    out.push(suite("divisor.ray_geodesic_residual", || {
        let series = divisor::solve_order(&ExtensionForm::new(&g, cosine(&m, 0.3)?)?, 4)?;
        let degeneration = divisor::to_geodesic_ray(&series, 1.0, 6.0, 11)?;
        let path = degeneration.path();
        let worst = degeneration
            .xs
            .iter()
            .map(|&x| ray::geodesic_residual(&path, x).map(|r| r.sup_norm))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(SuiteResult::below("divisor.ray_geodesic_residual", worst, tol.geodesic))
    }));
    out
}

fn length_linearity(tol: &Tolerances) -> Result<SuiteResult> {
    let path = rotation_path(LENGTH_RESOLUTION)?;
    let speeds = [1.0, 2.0, 4.0]
        .iter()
        .map(|&x1| ray::length(&path, 0.0, x1).map(|l| l / x1))
        .collect::<Result<Vec<_>>>()?;
    let spread = speeds.iter().map(|v| (v / speeds[0] - 1.0).abs()).fold(0.0, f64::max);
    Ok(SuiteResult::below("ray.length_linearity", spread, tol.length_linearity))
}

fn c0_growth() -> Result<Vec<SuiteResult>> {
    let path = rotation_path(RAY_RESOLUTION)?;
    let profile = ray::c0_profile(&path, &lin_spaced(0.5, 8.0, 16))?;
    let ratio = profile.values[profile.values.len() - 1] / profile.values[0];
    let drops = profile.values.windows(2).filter(|w| w[1] <= w[0]).count();
    Ok(vec![
        SuiteResult::above("ray.c0_ratio", ratio, 10.0),
        SuiteResult::below("ray.c0_non_increasing_steps", drops as f64, 0.5),
    ])
}

pub fn run_validate(tol: &Tolerances, seed: u64) -> Outputs {
    let mut suites = vec![
        suite("calculus.integrate_one_exact", integrate_one),
        suite("calculus.divergence_theorem", || divergence(tol)),
        suite("calculus.dz_dzbar_conjugate", || conjugacy(tol)),
        suite("calculus.spectral_vs_fd_order", spectral_vs_differences),
        suite("ivp.oracle_torus", || oracle_torus(tol)),
        suite("ivp.oracle_fubini_study", || oracle_fubini_study(tol)),
        suite("ivp.residual_order_k4", || residual_order(4, tol)),
        suite("ivp.residual_order_k6", || residual_order(6, tol)),
    ];
    match rotation_geodesic(tol) {
        Ok(v) => suites.extend(v),
        Err(e) => suites.push(SuiteResult::failed("ray.rotation_geodesic", e.to_string())),
    }
    suites.push(suite("ray.hcma_geodesic_consistency", || consistency(tol)));
    suites.push(suite("ray.wzw_geodesic_random", || wzw_random(tol, seed)));
    suites.push(suite("ray.wzw_non_geodesic", wzw_non_geodesic));
    suites.extend(divisor_suites(tol));
    suites.push(suite("ray.length_linearity", || length_linearity(tol)));
    match c0_growth() {
        Ok(v) => suites.extend(v),
        Err(e) => suites.push(SuiteResult::failed("ray.c0_growth", e.to_string())),
    }
    let mut summary = Summary::new("validate", "multiple".to_string());
    summary.passed = suites.iter().all(|s| s.passed);
    summary.suites = suites;
    Outputs {
        series: None,
        residuals: None,
        ray: None,
        summary,
    }
}
