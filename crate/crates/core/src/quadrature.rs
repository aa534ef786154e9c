//! Angular quadrature over photon scattering directions.

use std::f64::consts::{PI, TAU};

/// Normalized dipole emission pattern for incident light propagating along
/// +z with linear polarization along x:
///   w(θ, φ) = (3/8π)(1 − sin²θ cos²φ),  ∫ w dΩ = 1.
pub fn angular_weight(theta: f64, phi: f64) -> f64 {
    let s = theta.sin();
    3.0 / (8.0 * PI) * (1.0 - s * s * phi.cos() * phi.cos())
}

/// Gauss-Legendre nodes and weights on [−1, 1], ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-angle initial guess, Newton refinement on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// One direction node of the product angular grid.
#[derive(Debug, Clone, Copy)]
pub struct AngularNode {
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub phi: f64,
    /// Combined weight: dipole pattern × quadrature measure. Summing this
    /// over the grid approximates ∫ w(θ,φ) dΩ = 1.
    pub weight: f64,
}

/// Product grid: Gauss-Legendre in cosθ × uniform midpoint rule in φ
/// (spectrally accurate for periodic integrands), weighted by
/// [`angular_weight`].
pub fn angular_grid(n_theta: usize, n_phi: usize) -> Vec<AngularNode> {
    let (ct, wt) = gauss_legendre(n_theta);
    let dphi = TAU / n_phi as f64;
    let mut grid = Vec::with_capacity(n_theta * n_phi);
    for (&c, &w) in ct.iter().zip(&wt) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        let theta = c.acos();
        for k in 0..n_phi {
            let phi = (k as f64 + 0.5) * dphi;
            grid.push(AngularNode {
                cos_theta: c,
                sin_theta: s,
                phi,
                weight: angular_weight(theta, phi) * w * dphi,
            });
        }
    }
    grid
}
