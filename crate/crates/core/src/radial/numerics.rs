//! Finite-difference stencils and trapezoid quadrature on a [`Grid`].
//!
//! Derivatives are second order: three-point centred differences at interior
//! nodes and three-point one-sided differences at the endpoints. Every
//! integral carries a truncation estimate obtained by comparing the trapezoid
//! rule on the full grid with the rule on every other node.

use super::Grid;

/// A quadrature value together with its truncation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Trapezoid rule of nodal samples over the grid.
pub fn trapezoid(grid: &Grid, f: &[f64]) -> Integral {
    debug_assert_eq!(grid.len(), f.len());
    let fine = trapezoid_raw(grid.nodes(), f);
    let idx = grid.coarse_indices();
    let xs: Vec<f64> = idx.iter().map(|&i| grid.nodes()[i]).collect();
    let fs: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
    let coarse = trapezoid_raw(&xs, &fs);
    Integral {
        value: fine,
        error: (fine - coarse).abs() / 3.0,
    }
}

fn trapezoid_raw(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xw, fw)| 0.5 * (xw[1] - xw[0]) * (fw[0] + fw[1]))
        .sum()
}

/// Running trapezoid integral `∫₀^{ξ_i} f dξ` at every node.
pub fn cumulative_trapezoid(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let x = grid.nodes();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..grid.intervals() {
        acc += 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
        out.push(acc);
    }
    out
}

/// Weights `(w₋, w₀, w₊)` of the centred first derivative at interior node `i`.
#[inline]
pub fn d1_weights(x: &[f64], i: usize) -> (f64, f64, f64) {
    let hm = x[i] - x[i - 1];
    let hp = x[i + 1] - x[i];
    (
        -hp / (hm * (hm + hp)),
        (hp - hm) / (hm * hp),
        hm / (hp * (hm + hp)),
    )
}

/// Weights `(w₋, w₀, w₊)` of the three-point second derivative at interior node `i`.
#[inline]
pub fn d2_weights(x: &[f64], i: usize) -> (f64, f64, f64) {
    let hm = x[i] - x[i - 1];
    let hp = x[i + 1] - x[i];
    let s = 2.0 / (hm + hp);
    (s / hm, -s * (1.0 / hm + 1.0 / hp), s / hp)
}

/// First derivative at every node.
pub fn derivative(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let x = grid.nodes();
    let n = grid.intervals();
    let mut d = vec![0.0; f.len()];
    {
        let h1 = x[1] - x[0];
        let h2 = x[2] - x[1];
        d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1]
            - h1 / (h2 * (h1 + h2)) * f[2];
    }
    for i in 1..n {
        let (a, b, c) = d1_weights(x, i);
        d[i] = a * f[i - 1] + b * f[i] + c * f[i + 1];
    }
    {
        let h1 = x[n - 1] - x[n - 2];
        let h2 = x[n] - x[n - 1];
        d[n] = h2 / (h1 * (h1 + h2)) * f[n - 2] - (h1 + h2) / (h1 * h2) * f[n - 1]
            + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f[n];
    }
    d
}

/// Second derivative at interior nodes; endpoints are set to 0.
pub fn second_derivative(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let x = grid.nodes();
    let n = grid.intervals();
    let mut d = vec![0.0; f.len()];
    for i in 1..n {
        let (a, b, c) = d2_weights(x, i);
        d[i] = a * f[i - 1] + b * f[i] + c * f[i + 1];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_exact_on_quadratics() {
        let g = Grid::graded(40, 1.7).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let d = derivative(&g, &f);
        let dd = second_derivative(&g, &f);
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((d[i] - (6.0 * x - 1.0)).abs() < 1e-10, "node {i}");
            if i > 0 && i < g.intervals() {
                assert!((dd[i] - 6.0).abs() < 1e-7, "node {i}: {}", dd[i]);
            }
        }
    }

    #[test]
    fn trapezoid_exact_on_linear_and_estimate_tracks_error() {
        let g = Grid::uniform(64).unwrap();
        let lin: Vec<f64> = g.nodes().iter().map(|x| 2.0 * x + 1.0).collect();
        let q = trapezoid(&g, &lin);
        assert!((q.value - 2.0).abs() < 1e-14);
        assert!(q.error < 1e-14);

        let sq: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        let q = trapezoid(&g, &sq);
        let err = (q.value - 1.0 / 3.0).abs();
        assert!((q.error - err).abs() < 1e-3 * err);
    }

    #[test]
    fn cumulative_ends_at_total() {
        let g = Grid::graded(50, 2.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).cos()).collect();
        let c = cumulative_trapezoid(&g, &f);
        assert_eq!(c[0], 0.0);
        assert!((c[g.intervals()] - trapezoid(&g, &f).value).abs() < 1e-14);
    }
}
