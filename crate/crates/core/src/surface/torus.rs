//! Fourier pseudospectral kernels on the unit torus ℂ/(ℤ+iℤ).
//!
//! Nodal values are stored row-major, `values[j * n + i]` at `(x, y) = (i/n, j/n)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Wavenumber shells past the last one above this fraction of the peak are treated as roundoff.
const CHOP_TOLERANCE: f64 = 1e-13;

pub(crate) struct TorusGrid {
    pub n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusGrid").field("n", &self.n).finish()
    }
}

impl TorusGrid {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    /// Signed wavenumber of FFT bin `i`.
    fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    fn is_nyquist(&self, i: usize) -> bool {
        self.n % 2 == 0 && i == self.n / 2
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        // rows (x direction) are contiguous
        plan.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[j * n + i];
            }
            plan.process(&mut column);
            for j in 0..n {
                data[j * n + i] = column[j];
            }
        }
        if inverse {
            let scale = 1.0 / (n * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn spectrum(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.fft2(&mut data, false);
        data
    }

    /// Zeroes the shells `max(|kx|, |ky|) = m` beyond the last one holding content above the roundoff floor.
    fn chop(&self, spec: &mut [Complex64]) {
        let n = self.n;
        let mut shell_peak = vec![0.0_f64; n / 2 + 1];
        for j in 0..n {
            for i in 0..n {
                let m = self.shell(i, j);
                shell_peak[m] = shell_peak[m].max(spec[j * n + i].norm());
            }
        }
        let peak = shell_peak.iter().fold(0.0_f64, |a, &b| a.max(b));
        let floor = CHOP_TOLERANCE * peak;
        let keep = shell_peak.iter().rposition(|&p| p > floor).unwrap_or(0);
        for j in 0..n {
            for i in 0..n {
                if self.shell(i, j) > keep {
                    spec[j * n + i] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    fn shell(&self, i: usize, j: usize) -> usize {
        self.wavenumber(i).unsigned_abs().max(self.wavenumber(j).unsigned_abs()) as usize
    }

    /// Applies a Fourier multiplier `m(kx, ky)`; odd derivatives zero the Nyquist bins.
    ///
    /// The roundoff tail is chopped first so that repeated derivatives do not amplify it.
    fn apply(
        &self,
        values: &[Complex64],
        odd: bool,
        multiplier: impl Fn(f64, f64) -> Complex64,
    ) -> Vec<Complex64> {
        let n = self.n;
        let mut data = values.to_vec();
        self.fft2(&mut data, false);
        self.chop(&mut data);
        for j in 0..n {
            let ky = self.wavenumber(j) as f64;
            for i in 0..n {
                let kx = self.wavenumber(i) as f64;
                let idx = j * n + i;
                if odd && (self.is_nyquist(i) || self.is_nyquist(j)) {
                    data[idx] = Complex64::new(0.0, 0.0);
                } else {
                    data[idx] *= multiplier(kx, ky);
                }
            }
        }
        self.fft2(&mut data, true);
        data
    }

    /// ∂/∂z = ½(∂x − i∂y) → π(i·kx + ky).
    pub fn dz(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.apply(values, true, |kx, ky| Complex64::new(PI * ky, PI * kx))
    }

    /// ∂/∂z̄ = ½(∂x + i∂y) → π(i·kx − ky).
    pub fn dzbar(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.apply(values, true, |kx, ky| Complex64::new(-PI * ky, PI * kx))
    }

    /// ∂²/∂z∂z̄ = ¼Δ → −π²(kx² + ky²).
    pub fn dzdzbar(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.apply(values, false, |kx, ky| {
            Complex64::new(-PI * PI * (kx * kx + ky * ky), 0.0)
        })
    }

    /// ∂/∂x, used by the finite-difference comparisons.
    pub fn dx(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.apply(values, true, |kx, _| Complex64::new(0.0, 2.0 * PI * kx))
    }

    /// Relative spectral mass (ℓ² of coefficients) beyond 2/3 of the Nyquist wavenumber.
    pub fn band_overflow(&self, values: &[Complex64]) -> f64 {
        let n = self.n;
        let kmax = (n / 2) as f64 * 2.0 / 3.0;
        let spec = self.spectrum(values);
        let mut total = 0.0;
        let mut outside = 0.0;
        for j in 0..n {
            let ky = self.wavenumber(j).abs() as f64;
            for i in 0..n {
                let kx = self.wavenumber(i).abs() as f64;
                let e = spec[j * n + i].norm_sqr();
                total += e;
                if kx > kmax || ky > kmax {
                    outside += e;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (outside / total).sqrt()
        }
    }

    /// ∫ h · i dz∧dz̄ = 2 ∫∫ h dx dy; the trapezoid rule is spectrally exact here.
    pub fn integrate_density(&self, h: &[f64]) -> f64 {
        2.0 * h.iter().sum::<f64>() / h.len() as f64
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        let n = self.n;
        ((idx % n) as f64 / n as f64, (idx / n) as f64 / n as f64)
    }
}
