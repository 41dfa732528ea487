//! Discrete convolution on uniform time grids.
//!
//! Densities are sampled at `t_k = k * step` starting at zero. Convolution
//! integrals are evaluated with the trapezoid rule through FFTs, so the
//! error scales with `(rate * step)^2` per convolution.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// A uniform grid `t_k = k * step`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub step: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(step: f64, n: usize) -> Self {
        Self { step, n }
    }

    /// Grid covering `[0, extent]` with the given step.
    pub fn with_extent(step: f64, extent: f64) -> Self {
        Self {
            step,
            n: (extent / step).ceil() as usize + 1,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| k as f64 * self.step).collect()
    }

    pub fn extent(&self) -> f64 {
        (self.n.saturating_sub(1)) as f64 * self.step
    }
}

/// FFT workspace reused across convolutions on one grid length.
pub struct Convolver {
    n: usize,
    padded: usize,
    planner: FftPlanner<f64>,
}

impl Convolver {
    pub fn new(n: usize) -> Self {
        let padded = (2 * n).next_power_of_two();
        Self {
            n,
            padded,
            planner: FftPlanner::new(),
        }
    }

    /// Trapezoid-rule convolution `(a * b)(t_k) = ∫ a(s) b(t_k - s) ds`
    /// restricted to the first `n` samples.
    pub fn convolve(&mut self, a: &[f64], b: &[f64], step: f64) -> Vec<f64> {
        assert_eq!(a.len(), self.n);
        assert_eq!(b.len(), self.n);
        let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fa.resize(self.padded, Complex::new(0.0, 0.0));
        let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fb.resize(self.padded, Complex::new(0.0, 0.0));

        let fft = self.planner.plan_fft_forward(self.padded);
        fft.process(&mut fa);
        fft.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= y;
        }
        let ifft = self.planner.plan_fft_inverse(self.padded);
        ifft.process(&mut fa);

        let scale = step / self.padded as f64;
        (0..self.n)
            .map(|k| {
                let full = fa[k].re * scale;
                // Trapezoid endpoint correction of the rectangle sum.
                full - 0.5 * step * (a[0] * b[k] + a[k] * b[0])
            })
            .collect()
    }
}

/// Trapezoid quadrature of uniformly sampled values.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    step * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Sums the convolution series `f + f*g + f*g*g + ...`, truncating when
/// the next term's sup-norm falls below `rel_tol` of the running sum's
/// sup-norm. Returns `None` if the series fails to converge within
/// `max_terms`.
pub fn convolution_series(
    f: &[f64],
    g: &[f64],
    step: f64,
    rel_tol: f64,
    max_terms: usize,
) -> Option<Vec<f64>> {
    let mut conv = Convolver::new(f.len());
    let mut sum = f.to_vec();
    let mut term = f.to_vec();
    for _ in 0..max_terms {
        term = conv.convolve(&term, g, step);
        let term_sup = term.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let sum_sup = sum.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if term_sup <= rel_tol * sum_sup {
            return Some(sum);
        }
        for (s, &t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_of_exponentials_matches_closed_form() {
        // (a e^{-a t}) * (b e^{-b t}) = ab/(b-a) (e^{-a t} - e^{-b t})
        let (a, b) = (3.0, 7.0);
        let grid = UniformGrid::with_extent(2e-4, 5.0);
        let fa: Vec<f64> = grid.times().iter().map(|&t| a * (-a * t).exp()).collect();
        let fb: Vec<f64> = grid.times().iter().map(|&t| b * (-b * t).exp()).collect();
        let mut conv = Convolver::new(grid.n);
        let got = conv.convolve(&fa, &fb, grid.step);
        for (k, &t) in grid.times().iter().enumerate() {
            let expect = a * b / (b - a) * ((-a * t).exp() - (-b * t).exp());
            assert!(
                (got[k] - expect).abs() < 1e-6,
                "t={t}: {} vs {expect}",
                got[k]
            );
        }
    }

    #[test]
    fn series_matches_geometric_mass() {
        // With g of mass q < 1, the series f + f*g + ... has mass 1/(1-q)
        // times the mass of f.
        let rate = 2.0;
        let q = 0.25;
        let grid = UniformGrid::with_extent(2e-3, 14.0);
        let f: Vec<f64> = grid
            .times()
            .iter()
            .map(|&t| rate * (-rate * t).exp())
            .collect();
        let g: Vec<f64> = f.iter().map(|&x| q * x).collect();
        let sum = convolution_series(&f, &g, grid.step, 1e-10, 200).unwrap();
        let mass = trapezoid(&sum, grid.step);
        assert!((mass - 1.0 / (1.0 - q)).abs() < 1e-4, "mass {mass}");
    }
}
