use super::PointSampler;
use crate::grid::PeriodicGrid;
use crate::levelset::{LevelSet, GRADIENT_FLOOR};

/// Half-width of the interface band, in grid lengths.
pub const BAND_HALF_WIDTH: f64 = 1.5;

/// Probe distances along the normal, measured from the interface into the fluid, in grid
/// lengths. A quadratic through the three probes is differentiated at `at`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalProbe {
    pub offsets: [f64; 3],
    pub at: f64,
}

impl Default for NormalProbe {
    fn default() -> Self {
        Self {
            offsets: [1.5, 2.5, 3.5],
            at: 0.0,
        }
    }
}

impl NormalProbe {
    /// Weights `w` with `f'(at) = Σ w_k f(s_k)` for the quadratic interpolant.
    fn weights(&self, h: f64) -> [f64; 3] {
        let s = self.offsets.map(|o| o * h);
        let t = self.at * h;
        let mut w = [0.0; 3];
        for k in 0..3 {
            let (a, b) = (s[(k + 1) % 3], s[(k + 2) % 3]);
            w[k] = ((t - a) + (t - b)) / ((s[k] - a) * (s[k] - b));
        }
        w
    }
}

/// `∂f/∂n` evaluated at the interface point closest to each node.
///
/// Every node with a usable normal carries a value (closest-point extension); `band` marks
/// the nodes with `|psi| < 1.5 h` and `degenerate` those whose `|∇psi|` vanished.
#[derive(Clone, Debug)]
pub struct NormalDerivative<const C: usize> {
    pub grid: PeriodicGrid,
    pub values: Vec<[f64; C]>,
    pub band: Vec<bool>,
    pub degenerate: Vec<bool>,
}

impl<const C: usize> NormalDerivative<C> {
    /// Band samples only.
    pub fn band_values(&self) -> impl Iterator<Item = (usize, [f64; C])> + '_ {
        (0..self.values.len())
            .filter(|&k| self.band[k] && !self.degenerate[k])
            .map(|k| (k, self.values[k]))
    }

    /// `Σ_c (∂f_c/∂n)²` at every node.
    pub fn squared_norm(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.iter().map(|c| c * c).sum())
            .collect()
    }
}

pub fn interface_normal_derivative<const C: usize>(
    field: &impl PointSampler<C>,
    psi: &LevelSet,
    probe: NormalProbe,
) -> NormalDerivative<C> {
    let grid = *psi.grid();
    let h = grid.h();
    let n = grid.n();
    let weights = probe.weights(h);
    let offsets = probe.offsets.map(|o| o * h);
    let mut values = vec![[0.0; C]; grid.len()];
    let mut band = vec![false; grid.len()];
    let mut degenerate = vec![false; grid.len()];
    for j in 0..n {
        for i in 0..n {
            let k = grid.index(i, j);
            band[k] = psi.get(i, j).abs() < BAND_HALF_WIDTH * h;
            let grad = psi.gradient(i, j);
            let norm = grad[0].hypot(grad[1]);
            if norm < GRADIENT_FLOOR {
                degenerate[k] = true;
                continue;
            }
            let nv = [grad[0] / norm, grad[1] / norm];
            let [x, y] = grid.node_position(i, j);
            let d = psi.get(i, j) / norm;
            let base = [x - d * nv[0], y - d * nv[1]];
            for (w, s) in weights.iter().zip(offsets) {
                let f = field.sample_point(base[0] + s * nv[0], base[1] + s * nv[1]);
                for c in 0..C {
                    values[k][c] += w * f[c];
                }
            }
        }
    }
    NormalDerivative {
        grid,
        values,
        band,
        degenerate,
    }
}
