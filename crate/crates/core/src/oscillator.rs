//! Harmonic-oscillator matrix elements: quadratic position elements for the
//! trap potential, displacement-operator (Debye-Waller) amplitudes, and a
//! quadrature-based eigenfunction overlap diagnostic.

use num_complex::Complex64 as C64;

use crate::constants::PhysicalConstants;
use crate::modes::Mode;
use crate::trap::{Axis, DerivedTrap};

/// ln(n!) via lgamma-style series; exact for small n through a table.
pub fn ln_factorial(n: u32) -> f64 {
    const TABLE: [f64; 21] = [
        0.0,
        0.0,
        0.6931471805599453,
        1.791759469228055,
        3.1780538303479458,
        4.787491742782046,
        6.579251212010101,
        8.525161361065415,
        10.60460290274525,
        12.801827480081469,
        15.104412573075516,
        17.502307845873887,
        19.987214495661885,
        22.552163853123425,
        25.19122118273868,
        27.89927138384089,
        30.671860106080672,
        33.50507345013689,
        36.39544520803305,
        39.339884187199495,
        42.335616460753485,
    ];
    if (n as usize) < TABLE.len() {
        return TABLE[n as usize];
    }
    // Stirling series, plenty for the f64 targets here
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv / 12.0 * (1.0 - inv2 / 30.0 * (1.0 - 2.0 * inv2 / 7.0))
}

/// Matrix element ⟨n|½mω²x²|n'⟩ of one axis' contribution to the harmonic
/// trap potential, J. Nonzero only for n'−n ∈ {0, ±2}:
///   diagonal  ½ħω(n+½),   |Δn| = 2  (ħω/4)√((k+1)(k+2)) with k = min(n,n').
///
/// The shared constant −U0 on the full diagonal is added by the caller that
/// assembles the three-dimensional potential.
pub fn osc_elem_position_quadratic(
    n: u32,
    n_prime: u32,
    axis: Axis,
    constants: &PhysicalConstants,
    derived: &DerivedTrap,
) -> f64 {
    let omega = derived.omega_mean[axis.index()];
    let hw = constants.hbar * omega;
    if n == n_prime {
        0.5 * hw * (n as f64 + 0.5)
    } else if n.abs_diff(n_prime) == 2 {
        let k = n.min(n_prime) as f64;
        0.25 * hw * ((k + 1.0) * (k + 2.0)).sqrt()
    } else {
        0.0
    }
}

/// Generalized Laguerre polynomial L_k^α(x) by the three-term recurrence.
fn laguerre(k: u32, alpha: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0;
    let mut l = 1.0 + alpha - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * l - (jf + alpha) * lm1) / (jf + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// One-dimensional displacement amplitude ⟨n'|e^{iqx̂}|n⟩ for x̂ written in
/// the ladder basis, with η = q·x_zpf.
///
/// Closed Laguerre form: (iη)^{|Δn|} e^{−η²/2} √(n_<!/n_>!) L^{|Δn|}_{n_<}(η²).
/// Phase convention is i^{|Δn|} (sign(η) carried by η^{|Δn|}); only squared
/// magnitudes enter the scattering rates. The prefactor is evaluated in log
/// space so large n and |Δn| cannot overflow.
pub fn debye_waller_1d(n: u32, n_prime: u32, eta: f64) -> C64 {
    let lo = n.min(n_prime);
    let hi = n.max(n_prime);
    let d = hi - lo;
    if eta == 0.0 {
        return if d == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let x = eta * eta;
    let log_pref = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + d as f64 * eta.abs().ln();
    let magnitude = (log_pref - 0.5 * x).exp() * laguerre(lo, d as f64, x);
    let sign = if eta < 0.0 && d % 2 == 1 { -1.0 } else { 1.0 };
    // i^d
    let phase = match d % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    phase * (sign * magnitude)
}

/// Gauss-Hermite nodes and weights for ∫ e^{−x²} f(x) dx ≈ Σ w_i f(x_i).
///
/// Newton iteration on the orthonormal Hermite polynomials, walking the
/// positive roots from the outside in; nodes are returned in ascending
/// order. Weights are w_i = 2/p̃'_n(x_i)². Reliable for n up to a few
/// hundred (p̃_n grows like e^{x²/2} near the largest root).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // orthonormal Hermite polynomial p̃_k and its derivative √(2k)·p̃_{k−1}
    fn poly_pair(k: usize, x: f64) -> (f64, f64) {
        let mut pm1 = 0.0;
        let mut p = std::f64::consts::PI.powf(-0.25);
        for j in 0..k {
            let jf = j as f64;
            let next = x * (2.0 / (jf + 1.0)).sqrt() * p - (jf / (jf + 1.0)).sqrt() * pm1;
            pm1 = p;
            p = next;
        }
        (p, (2.0 * k as f64).sqrt() * pm1)
    }

    // bracket every positive root on a grid finer than the minimum root
    // spacing (≈ π/√(2n+1) at the center), then bisect and polish with
    // bracket-guarded Newton; immune to the basin-hopping that plain Newton
    // suffers between the tightly spaced edge roots
    let reach = (2.0 * n as f64 + 1.0).sqrt() + 1.0;
    let step = std::f64::consts::PI / (2.0 * n as f64 + 1.0).sqrt() / 4.0;
    let mut positive_roots: Vec<f64> = Vec::with_capacity(n / 2 + 1);
    if n % 2 == 1 {
        positive_roots.push(0.0);
    }
    let mut x_prev = 0.5 * step;
    let mut p_prev = poly_pair(n, x_prev).0;
    let mut x = x_prev + step;
    while x <= reach {
        let p = poly_pair(n, x).0;
        if p_prev * p < 0.0 {
            let (mut lo, mut hi) = (x_prev, x);
            let mut f_lo = p_prev;
            for _ in 0..20 {
                let mid = 0.5 * (lo + hi);
                let f_mid = poly_pair(n, mid).0;
                if f_lo * f_mid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    f_lo = f_mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            for _ in 0..40 {
                let (pv, dpv) = poly_pair(n, z);
                let dz = pv / dpv;
                let znew = z - dz;
                if !(lo..=hi).contains(&znew) {
                    break;
                }
                z = znew;
                if dz.abs() < 1e-15 * (1.0 + z.abs()) {
                    break;
                }
            }
            positive_roots.push(z);
        }
        x_prev = x;
        p_prev = p;
        x += step;
    }
    let m = (n + 1) / 2;
    assert_eq!(positive_roots.len(), m, "root bracketing failed for n = {n}");

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for (i, &z) in positive_roots.iter().enumerate() {
        let (_, dp) = poly_pair(n, z);
        let w = 2.0 / (dp * dp);
        // ascending positive roots map to the upper half
        nodes[n / 2 + i] = z;
        nodes[n - 1 - (n / 2 + i)] = -z;
        weights[n / 2 + i] = w;
        weights[n - 1 - (n / 2 + i)] = w;
    }
    (nodes, weights)
}

/// Normalized oscillator eigenfunction ψ_n for frequency ω at position x, in
/// units where the mass and ħ come from `scale` = √(mω/ħ):
/// ψ_n(x) = √scale · h̃_n(scale·x).
fn oscillator_eigenfunction(n: u32, scale: f64, x: f64) -> f64 {
    let u = scale * x;
    let mut hm1 = 0.0;
    let mut h = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    for j in 0..n {
        let jf = j as f64;
        let next = u * (2.0 / (jf + 1.0)).sqrt() * h - (jf / (jf + 1.0)).sqrt() * hm1;
        hm1 = h;
        h = next;
    }
    scale.sqrt() * h
}

/// Overlap ⟨ψ_v^(b)|ψ_v^(a)⟩ between same-index eigenfunctions of the two
/// slightly different spin-state oscillators, factorized per axis and
/// evaluated by 200-node Gauss-Hermite quadrature.
///
/// Validation only: the dynamics always takes this overlap as exactly 1.
pub fn mode_overlap_diagnostic(
    v: Mode,
    constants: &PhysicalConstants,
    derived: &DerivedTrap,
) -> f64 {
    let (nodes, weights) = gauss_hermite(200);
    let m = constants.atom_mass;
    let mut overlap = 1.0;
    for (axis, n) in [(0usize, v.vx), (1, v.vy), (2, v.vz)] {
        let sa = (m * derived.omega_a[axis] / constants.hbar).sqrt();
        let sb = (m * derived.omega_b[axis] / constants.hbar).sqrt();
        // integrate against the geometric-mean Gaussian weight
        let sg = (sa * sb).sqrt();
        let mut acc = 0.0;
        for (&u, &w) in nodes.iter().zip(&weights) {
            let x = u / sg;
            // divide the e^{−u²} quadrature weight back out of the integrand
            let f = oscillator_eigenfunction(n, sa, x)
                * oscillator_eigenfunction(n, sb, x)
                * (u * u).exp();
            acc += w * f;
        }
        overlap *= acc / sg;
    }
    overlap
}
