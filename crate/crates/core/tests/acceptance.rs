//! Primary acceptance criteria, one test each. Every test writes a single
//! `criterion N: PASS|FAIL ...` line straight to stdout so it survives capture.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use hcma_core::divisor::{equivariance_check, residual_mod_sk, solve_order, to_geodesic_ray, ExtensionForm};
use hcma_core::ivp::{extend_series, hcma_density, hcma_residual, GeodesicSeries};
use hcma_core::oracle::{taylor_from_evolution, RotationRay};
use hcma_core::ray::{
    c0_profile, energy, geodesic_defect, geodesic_residual, length, speed_drift, wzw_first_variation, PathInH,
    PathJet, PotentialFamily,
};
use hcma_core::surface::{integrate, metric_from_potential, KahlerMetric, ModelSurface, ScalarField};
use hcma_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, passed: bool, detail: String) {
    let line = format!("criterion {n:>2}: {}  {detail}\n", if passed { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(passed, "criterion {n} failed: {detail}");
}

fn torus(n: usize) -> (ModelSurface, KahlerMetric) {
    let m = ModelSurface::unit_torus(n).unwrap();
    let g = KahlerMetric::flat(&m).unwrap();
    (m, g)
}

fn cp1(n: usize) -> (ModelSurface, KahlerMetric) {
    let m = ModelSurface::radial_cp1(n, 50.0).unwrap();
    let g = KahlerMetric::fubini_study(&m).unwrap();
    (m, g)
}

fn cosine(m: &ModelSurface, a: f64) -> ScalarField {
    ScalarField::from_torus_fn(m, |x, _| a * (2.0 * PI * x).cos()).unwrap()
}

fn rotation(n: usize) -> PathInH {
    let (m, _) = cp1(n);
    PathInH::from_family(Arc::new(RotationRay::new(&m).unwrap()))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `φ = a(t + t²)cos(2πx)` on the flat torus: not a geodesic.
#[derive(Debug)]
struct NonGeodesic {
    base: KahlerMetric,
    amplitude: f64,
}

impl PotentialFamily for NonGeodesic {
    fn base(&self) -> &KahlerMetric {
        &self.base
    }

    fn jet(&self, t: f64) -> Result<PathJet> {
        let c = cosine(self.base.surface(), self.amplitude);
        Ok(PathJet {
            phi: &c * (t + t * t),
            dphi: &c * (1.0 + 2.0 * t),
            ddphi: &c * 2.0,
        })
    }
}

#[test]
fn criterion_01_recursion_matches_oracle() {
    let start = Instant::now();
    let (mt, gt) = torus(64);
    let (mr, gr) = cp1(64);
    let cases = [
        ("torus", gt, cosine(&mt, 0.1)),
        ("fubini-study", gr, ScalarField::from_radial_s_fn(&mr, |s| 2.0 * s).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for (_, g, psi0) in &cases {
        let series = extend_series(&GeodesicSeries::new(g, psi0).unwrap(), 6).unwrap();
        let jets = taylor_from_evolution(g, psi0, 6).unwrap();
        for k in 1..=6 {
            let (a, b) = (series.theta(k).unwrap(), &jets[k - 1]);
            worst = worst.max((a - b).sup_norm() / b.sup_norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        worst < 1e-8 && secs < 10.0,
        format!("max relative θ_k gap {worst:.2e} (< 1e-8), {secs:.2} s (< 10 s)"),
    );
}

#[test]
fn criterion_02_residual_order() {
    let start = Instant::now();
    let ts: Vec<f64> = linspace(1e-3f64.ln(), 1e-1f64.ln(), 9).into_iter().map(f64::exp).collect();
    let (mt, gt) = torus(64);
    let (mr, gr) = cp1(64);
    let cases = [
        (gt, cosine(&mt, 0.1)),
        (gr, ScalarField::from_radial_s_fn(&mr, |s| 2.0 * s).unwrap()),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (g, psi0) in &cases {
        for order in [4, 6] {
            let series = GeodesicSeries::solve(g, psi0, order).unwrap();
            let rs: Vec<f64> = ts.iter().map(|&t| hcma_residual(&series, t).unwrap().sup_norm).collect();
            let slope = loglog_slope(&ts, &rs);
            ok &= slope >= order as f64 - 1.2;
            detail.push(format!("K={order}: {slope:.2}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        ok && secs < 10.0,
        format!("fitted slopes torus/FS [{}] (≥ K − 1.2), {secs:.2} s", detail.join(", ")),
    );
}

#[test]
fn criterion_03_rotation_ray_is_geodesic() {
    let path = rotation(256);
    let ts = linspace(0.0, 1.0, 21);
    let residual = ts
        .iter()
        .map(|&t| geodesic_residual(&path, t).unwrap().sup_norm)
        .fold(0.0, f64::max);
    let energies: Vec<f64> = ts.iter().map(|&t| energy(&path, t).unwrap()).collect();
    let drift = speed_drift(&energies);
    verdict(
        3,
        residual < 1e-8 && drift < 1e-6,
        format!("n=256, cutoff 50: geodesic residual {residual:.2e} (< 1e-8), energy drift {drift:.2e} (< 1e-6)"),
    );
}

#[test]
fn criterion_04_hcma_and_geodesic_forms_agree() {
    let (mt, gt) = torus(32);
    let (mr, gr) = cp1(128);
    let fs_series = GeodesicSeries::solve(&gr, &ScalarField::from_radial_s_fn(&mr, |s| 2.0 * s).unwrap(), 8).unwrap();
    let rot = RotationRay::new(&mr).unwrap();
    let h = 0.05;
    let sampled = PathInH::sampled(&gr, 0.0, h, (0..9).map(|i| rot.sample(h * i as f64).phi).collect()).unwrap();
    let paths: Vec<(PathInH, Vec<f64>)> = vec![
        (rotation(128), vec![0.0, 0.3, 1.0, 2.0]),
        (
            PathInH::from_series(GeodesicSeries::solve(&gt, &cosine(&mt, 0.1), 6).unwrap()),
            vec![0.0, 0.05, 0.1],
        ),
        (PathInH::from_series(fs_series), vec![0.0, 0.1, 0.3]),
        (PathInH::from_family(Arc::new(NonGeodesic { base: gt.clone(), amplitude: 0.01 })), vec![0.0, 0.5, 1.0]),
        (sampled, vec![0.0, 0.1, 0.2, 0.4]),
    ];
    let mut worst: f64 = 0.0;
    for (path, times) in &paths {
        for &t in times {
            let jet = path.jet(t).unwrap();
            let r = hcma_density(path.base(), &jet.phi, &jet.dphi, &jet.ddphi).unwrap();
            let d = geodesic_defect(path.base(), &jet).unwrap();
            let gphi = metric_from_potential(path.base(), &jet.phi).unwrap();
            let pinned = &(gphi.coefficient() * &d) * 0.25;
            worst = worst.max((&r - &pinned).sup_norm());
        }
    }
    verdict(
        4,
        worst < 1e-10,
        format!("max |R − ¼ g_φ·(geodesic defect)| over {} paths: {worst:.2e} (< 1e-10)", paths.len()),
    );
}

#[test]
fn criterion_05_wzw_variation() {
    let path = rotation(256);
    let surface = path.base().surface().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shape = ScalarField::from_radial_s_fn(&surface, |s| c[0] + c[1] * s + c[2] * s * s + c[3] * s.powi(3)).unwrap();
        let (t0, t1) = if i % 2 == 0 { (0.0, 1.0) } else { (0.5, 2.0) };
        let bump = |t: f64| {
            if t <= t0 || t >= t1 {
                0.0
            } else {
                (PI * (t - t0) / (t1 - t0)).sin().powi(2)
            }
        };
        let di = wzw_first_variation(&path, (t0, t1), |t| Ok(&shape * bump(t))).unwrap();
        worst = worst.max(di.abs() / shape.sup_norm());
    }
    let (m, g) = torus(32);
    let drifting = PathInH::from_family(Arc::new(NonGeodesic { base: g, amplitude: 0.01 }));
    let mode = cosine(&m, 1.0);
    let off = wzw_first_variation(&drifting, (0.0, 1.0), |t| {
        Ok(&mode * if t <= 0.0 || t >= 1.0 { 0.0 } else { (PI * t).sin() })
    })
    .unwrap()
    .abs();
    verdict(
        5,
        worst < 1e-8 && off > 1e-3,
        format!("geodesic max |δI|/‖δF‖ {worst:.2e} (< 1e-8, 10 draws); non-geodesic |δI| {off:.3e} (> 1e-3)"),
    );
}

#[test]
fn criterion_06_divisor_construction() {
    let (m, g) = torus(32);
    let twist = cosine(&m, 0.2).to_complex();
    let extensions = [
        ("constant h", ExtensionForm::new(&g, ScalarField::constant(&m, 0.5)).unwrap()),
        ("cosine h", ExtensionForm::new(&g, cosine(&m, 0.3)).unwrap()),
        (
            "cosine h with twist",
            ExtensionForm::new(&g, cosine(&m, 0.3)).unwrap().with_twist(1, twist).unwrap(),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (_, ext) in &extensions {
        for order in 1..=4 {
            let series = solve_order(ext, order).unwrap();
            let r = residual_mod_sk(&series, order).unwrap().iter().map(|r| r.1).fold(0.0, f64::max);
            worst = worst.max(r);
        }
    }
    let trivial = solve_order(&ExtensionForm::pullback(&g), 4).unwrap();
    let zero = trivial.thetas().values().all(|f| f.sup_norm() == 0.0);
    verdict(
        6,
        worst < 1e-10 && zero,
        format!("max residual mod S^K, K ≤ 4: {worst:.2e} (< 1e-10); trivial extension identically zero: {zero}"),
    );
}

#[test]
fn criterion_07_equivariance() {
    let (m, g) = torus(32);
    let mut defect: f64 = 0.0;
    for h in [ScalarField::constant(&m, 0.5), cosine(&m, 0.3)] {
        let series = solve_order(&ExtensionForm::new(&g, h).unwrap(), 4).unwrap();
        for phases in [8, 12] {
            defect = defect.max(equivariance_check(&series, phases).unwrap());
        }
    }
    let series = solve_order(&ExtensionForm::new(&g, cosine(&m, 0.3)).unwrap(), 4).unwrap();
    let bump = cosine(&m, 1.0).to_complex();
    let mut spread: f64 = 0.0;
    for (i, j) in [(1, 2), (1, 3), (2, 3)] {
        let ratios: Vec<f64> = [1e-3, 2e-3, 4e-3]
            .iter()
            .map(|&a| {
                let injected = series.with_theta(i, j, bump.scale(a.into())).unwrap();
                equivariance_check(&injected, 8).unwrap() / a
            })
            .collect();
        assert!(ratios[0] > 0.0, "injection at ({i}, {j}) went undetected");
        spread = spread.max(ratios.iter().map(|r| (r / ratios[0] - 1.0).abs()).fold(0.0, f64::max));
    }
    verdict(
        7,
        defect < 1e-10 && spread < 0.05,
        format!("invariant defect {defect:.2e} (< 1e-10, 8 and 12 phases); injected defect/amplitude spread {spread:.2e} (< 5%)"),
    );
}

#[test]
fn criterion_08_ray_diagnostics() {
    let (m, g) = torus(32);
    let series = solve_order(&ExtensionForm::new(&g, cosine(&m, 0.3)).unwrap(), 4).unwrap();
    let ray = to_geodesic_ray(&series, 1.0, 6.0, 11).unwrap();
    let path = ray.path();
    let divisor_residual = ray
        .xs
        .iter()
        .map(|&x| geodesic_residual(&path, x).unwrap().sup_norm)
        .fold(0.0, f64::max);

    let long = rotation(640);
    let speeds: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&x1| length(&long, 0.0, x1).unwrap() / x1).collect();
    let linearity = speeds.iter().map(|v| (v / speeds[0] - 1.0).abs()).fold(0.0, f64::max);

    let c0 = c0_profile(&rotation(256), &linspace(0.5, 8.0, 16)).unwrap();
    let ratio = c0.values[c0.values.len() - 1] / c0.values[0];
    verdict(
        8,
        divisor_residual < 1e-8 && linearity < 1e-6 && c0.strictly_increasing && ratio > 10.0,
        format!(
            "divisor ray residual {divisor_residual:.2e} (< 1e-8); length linearity {linearity:.2e} (< 1e-6, n=640); \
             C⁰ increasing {} with ratio {ratio:.2} (> 10)",
            c0.strictly_increasing
        ),
    );
}

#[test]
fn criterion_09_calculus_substrate() {
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [16, 32, 64, 128] {
        let (m, _) = torus(n);
        let f = ScalarField::from_torus_fn(&m, |x, y| (0.5 * (2.0 * PI * x).sin() + 0.2 * (2.0 * PI * y).cos()).exp()).unwrap();
        let spectral = f.dx().unwrap();
        let v = f.values();
        let h = 1.0 / n as f64;
        let mut err: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let at = |k: isize| v[j * n + (i as isize + k).rem_euclid(n as isize) as usize];
                let fd = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
                err = err.max((fd - spectral.values()[j * n + i]).abs());
            }
        }
        hs.push(h);
        errs.push(err);
    }
    let order = loglog_slope(&hs, &errs);
    let (m, g) = torus(32);
    let f = ScalarField::from_torus_fn(&m, |x, y| ((2.0 * PI * x).sin() * (2.0 * PI * y).cos()).exp()).unwrap();
    let divergence = integrate(&f.dzdzbar(), &g).unwrap().abs();
    let area = integrate(&ScalarField::constant(&m, 1.0), &g).unwrap();
    verdict(
        9,
        order >= 3.5 && divergence < 1e-12 && area == 2.0,
        format!("spectral-vs-FD order {order:.2} (≥ 3.5); divergence {divergence:.2e} (< 1e-12); ∫1 = {area}"),
    );
}

#[test]
fn criterion_10_validate_is_deterministic() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut codes = Vec::new();
    for dir in ["first", "second"] {
        let status = Command::new(env!("CARGO_BIN_EXE_hcma"))
            .args(["validate", "--out", dir])
            .current_dir(tmp.path())
            .output()
            .unwrap()
            .status;
        codes.push(status.code());
    }
    let mut identical = true;
    for entry in fs::read_dir(tmp.path().join("first")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = fs::read(tmp.path().join("first").join(&name)).unwrap();
        let b = fs::read(tmp.path().join("second").join(&name)).unwrap();
        identical &= a == b;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        10,
        identical && codes == [Some(0), Some(0)] && secs < 120.0,
        format!("two validate runs byte-identical {identical}, exit codes {codes:?}, {secs:.1} s (< 120 s)"),
    );
}
