//! Periodic Fourier multipliers on an `n x n` grid.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Eigenvalue of the negative five-point Laplacian (times `h^2`) for mode `(kx, ky)`.
pub(crate) fn laplacian_symbol(kx: usize, ky: usize, n: usize) -> f64 {
    let t = 2.0 * std::f64::consts::PI / n as f64;
    (2.0 - 2.0 * (t * kx as f64).cos()) + (2.0 - 2.0 * (t * ky as f64).cos())
}

/// Multiplies the discrete Fourier coefficients of `values` by `symbol(kx, ky)`.
pub(crate) fn apply_multiplier(
    values: &[f64],
    n: usize,
    symbol: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    assert_eq!(values.len(), n * n);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut column = vec![Complex::new(0.0, 0.0); n];

    fwd.process(&mut data);
    for i in 0..n {
        for j in 0..n {
            column[j] = data[j * n + i];
        }
        fwd.process(&mut column);
        for j in 0..n {
            data[j * n + i] = column[j] * symbol(i, j);
        }
    }
    for i in 0..n {
        for j in 0..n {
            column[j] = data[j * n + i];
        }
        inv.process(&mut column);
        for j in 0..n {
            data[j * n + i] = column[j];
        }
    }
    inv.process(&mut data);
    let scale = 1.0 / (n * n) as f64;
    data.iter().map(|c| c.re * scale).collect()
}

/// Solves `-Δ_h x = rhs` (five-point, spacing folded into `rhs`) with zero mean.
pub(crate) fn solve_poisson(rhs: &[f64], n: usize) -> Vec<f64> {
    apply_multiplier(rhs, n, |kx, ky| {
        if kx == 0 && ky == 0 {
            0.0
        } else {
            1.0 / laplacian_symbol(kx, ky, n)
        }
    })
}
