//! Chebyshev kernels for rotationally symmetric functions on CP¹.
//!
//! A radial function f(|z|²) is sampled in the compactified coordinate
//! `s = r²/(1 + r²)` on Chebyshev–Gauss–Lobatto nodes covering `0 ≤ r ≤ R`.
//! With `u = r²` every operator is division free in `s`:
//!
//! * `∂f/∂z · (real axis) = sqrt(s(1−s)³) f_s`
//! * `∂²f/∂z∂z̄ = (1−s)² d/ds[s(1−s) f_s]`
//! * `i dz∧dz̄ = 2π ds/(1−s)²` after integrating out the angle.
//!
//! The polar cap `r > R` is covered for integration by a local polynomial
//! continuation of the integrand from the outermost nodes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Coefficients past the last one above this fraction of the largest are treated as roundoff.
const CHOP_TOLERANCE: f64 = 1e-14;

/// Gauss–Legendre rule with four points on [−1, 1].
const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

pub(crate) struct RadialGrid {
    pub n: usize,
    pub cutoff: f64,
    pub s_max: f64,
    pub s: Vec<f64>,
    dct: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialGrid")
            .field("n", &self.n)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

/// Integral of a polynomial cap estimate and its uncertainty.
pub(crate) struct CapEstimate {
    pub value: f64,
    pub bound: f64,
}

impl RadialGrid {
    pub fn new(n: usize, cutoff: f64) -> Self {
        let m = n - 1;
        let s_max = cutoff * cutoff / (1.0 + cutoff * cutoff);
        let s = (0..n)
            .map(|j| {
                let xi = (PI * j as f64 / m as f64).cos();
                0.5 * s_max * (1.0 + xi)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Self {
            n,
            cutoff,
            s_max,
            s,
            dct: planner.plan_fft_forward(2 * m),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// u = r² at node j.
    pub fn u(&self, j: usize) -> f64 {
        let s = self.s[j];
        s / (1.0 - s)
    }

    /// DCT-I: returns Σ_j'' a_j cos(π j k / m) scaled as the raw even-extension FFT.
    fn dct1(&self, a: &[Complex64]) -> Vec<Complex64> {
        let m = self.n - 1;
        let mut ext = Vec::with_capacity(2 * m);
        ext.extend_from_slice(a);
        for j in (1..m).rev() {
            ext.push(a[j]);
        }
        self.dct.process(&mut ext);
        ext.truncate(m + 1);
        ext
    }

    /// Nodal values → Chebyshev coefficients c_k with f(ξ) = Σ c_k T_k(ξ).
    pub fn coefficients(&self, values: &[Complex64]) -> Vec<Complex64> {
        let m = self.n - 1;
        let mut c = self.dct1(values);
        let mf = m as f64;
        for (k, ck) in c.iter_mut().enumerate() {
            *ck /= if k == 0 || k == m { 2.0 * mf } else { mf };
        }
        c
    }

    /// Chebyshev coefficients → nodal values.
    pub fn values(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let m = self.n - 1;
        let mut a = coeffs.to_vec();
        a[0] *= 2.0;
        a[m] *= 2.0;
        let mut v = self.dct1(&a);
        for x in v.iter_mut() {
            *x *= 0.5;
        }
        v
    }

    /// d/ds of the interpolant, nodal values in and out.
    ///
    /// The roundoff tail of the input spectrum is chopped first; otherwise it is
    /// amplified by O(n²) per derivative and compounds through the recursions.
    pub fn ds(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut c = self.coefficients(values);
        chop(&mut c);
        let m = self.n - 1;
        let mut d = vec![Complex64::new(0.0, 0.0); m + 2];
        for k in (0..m).rev() {
            d[k] = d[k + 2] + c[k + 1] * (2.0 * (k + 1) as f64);
        }
        d[0] *= 0.5;
        d.truncate(m + 1);
        let scale = 2.0 / self.s_max;
        for x in d.iter_mut() {
            *x *= scale;
        }
        self.values(&d)
    }

    /// ∂f/∂z along the positive real axis; the full field carries the factor e^{−iθ}.
    pub fn dz(&self, values: &[Complex64]) -> Vec<Complex64> {
        let fs = self.ds(values);
        fs.iter()
            .zip(&self.s)
            .map(|(d, &s)| *d * (s * (1.0 - s).powi(3)).sqrt())
            .collect()
    }

    pub fn dzdzbar(&self, values: &[Complex64]) -> Vec<Complex64> {
        let fs = self.ds(values);
        let inner: Vec<Complex64> = fs
            .iter()
            .zip(&self.s)
            .map(|(d, &s)| *d * (s * (1.0 - s)))
            .collect();
        let outer = self.ds(&inner);
        outer
            .iter()
            .zip(&self.s)
            .map(|(d, &s)| *d * (1.0 - s).powi(2))
            .collect()
    }

    /// `∂∂̄f / (1−s)²`, which avoids a cancellation near the cutoff.
    pub fn dzdzbar_reduced(&self, values: &[Complex64]) -> Vec<Complex64> {
        let fs = self.ds(values);
        let inner: Vec<Complex64> = fs
            .iter()
            .zip(&self.s)
            .map(|(d, &s)| *d * (s * (1.0 - s)))
            .collect();
        self.ds(&inner)
    }

    /// `Re(∂p ∂̄q) / (1−s)² = s(1−s) p_s q_s`.
    pub fn pairing_reduced(&self, p: &[Complex64], q: &[Complex64]) -> Vec<f64> {
        let ps = self.ds(p);
        let qs = self.ds(q);
        ps.iter()
            .zip(&qs)
            .zip(&self.s)
            .map(|((a, b), &s)| s * (1.0 - s) * (a * b.conj()).re)
            .collect()
    }

    /// Relative ℓ² mass of the Chebyshev coefficients beyond 2/3 of the degree.
    pub fn band_overflow(&self, values: &[Complex64]) -> f64 {
        let c = self.coefficients(values);
        let cut = (2 * (self.n - 1)) / 3;
        let total: f64 = c.iter().map(|x| x.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = c[cut + 1..].iter().map(|x| x.norm_sqr()).sum();
        (outside / total).sqrt()
    }

    /// ∫_0^{s_max} w ds by Clenshaw–Curtis (exact integration of the interpolant).
    pub fn integrate_s(&self, w: &[f64]) -> f64 {
        let cw: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let c = self.coefficients(&cw);
        let mut acc = 0.0;
        for (k, ck) in c.iter().enumerate() {
            if k % 2 == 0 {
                acc += ck.re * 2.0 / (1.0 - (k * k) as f64);
            }
        }
        acc * 0.5 * self.s_max
    }

    /// ∫_{s_max}^1 w ds from a local polynomial continuation of the outermost nodes.
    pub fn cap_integral(&self, w: &[f64]) -> CapEstimate {
        let width = 1.0 - self.s_max;
        let hi = self.cap_with_points(w, 8, width);
        let lo = self.cap_with_points(w, 6, width);
        CapEstimate {
            value: hi,
            bound: (hi - lo).abs() + 1e-15 * hi.abs(),
        }
    }

    fn cap_with_points(&self, w: &[f64], points: usize, width: f64) -> f64 {
        // Stencil from the node at s_max inward, strided so that it spans the cap.
        let mut stride = 1;
        while stride * (points - 1) < self.n - 1
            && self.s_max - self.s[stride * (points - 1)] < width
        {
            stride += 1;
        }
        let idx: Vec<usize> = (0..points)
            .map(|k| (k * stride).min(self.n - 1))
            .collect();
        let xs: Vec<f64> = idx.iter().map(|&j| self.s[j]).collect();
        let ys: Vec<f64> = idx.iter().map(|&j| w[j]).collect();
        let mid = 0.5 * (self.s_max + 1.0);
        GL4.iter()
            .map(|&(x, wt)| wt * 0.5 * width * lagrange(&xs, &ys, mid + 0.5 * width * x))
            .sum()
    }

    pub fn node(&self, j: usize) -> (f64, f64) {
        (self.u(j).sqrt(), 0.0)
    }
}

fn chop(c: &mut [Complex64]) {
    let peak = c.iter().fold(0.0_f64, |m, x| m.max(x.norm()));
    let floor = CHOP_TOLERANCE * peak;
    let keep = c.iter().rposition(|x| x.norm() > floor).map_or(0, |k| k + 1);
    for x in c[keep..].iter_mut() {
        *x = Complex64::new(0.0, 0.0);
    }
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != i {
                l *= (x - xk) / (xi - xk);
            }
        }
        acc += yi * l;
    }
    acc
}
