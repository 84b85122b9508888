//! Dipole–dipole coupling tensors and molecular-ensemble geometry.
//!
//! The frequency-domain coupling tensor is the double-curl Green's tensor of
//! the scalar kernel g(r) = e^{iκr}/r with κ = ω/c:
//!
//!   𝒟_ij(r, κ) = (−∇²δ_ij + ∂_i∂_j) g(r)
//!             = (e^{iκr}/r³) [ −(δ_ij − 3 r̂_i r̂_j)(1 − iκr)
//!                              + (δ_ij − r̂_i r̂_j) κ²r² ].
//!
//! Its static (κ → 0) limit is the near-field dipole tensor
//!
//!   𝒞_ij(r) = (3 r̂_i r̂_j − δ_ij)/r³,
//!
//! which is real, symmetric, traceless, scales as 1/r³ and transforms
//! covariantly under rotations. 𝒟 is even in r and at large κr is dominated
//! by its transverse (far-field) block, growing like κ²/r relative to the
//! longitudinal block's κ/r². The closed form is validated against a
//! finite-difference application of (−∇²δ + ∇∇) to g in the tests.
//!
//! The module also provides simple ensemble geometries (cubic lattices) and
//! the bare pair phase sums used to study phase matching.

use crate::Complex64;

/// A 3×3 complex Cartesian tensor.
pub type Tensor3x3 = [[Complex64; 3]; 3];

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Static near-field dipole coupling tensor 𝒞(r) = (3 r̂ r̂ − δ)/r³.
///
/// # Panics
/// Panics if r is the zero vector (self-coupling is excluded by
/// construction: sums run over distinct molecules).
pub fn tensor_c(r: [f64; 3]) -> Tensor3x3 {
    let rn = norm3(r);
    assert!(rn > 0.0, "coupling tensor requires a nonzero separation");
    let rhat = [r[0] / rn, r[1] / rn, r[2] / rn];
    let inv_r3 = 1.0 / (rn * rn * rn);
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            // r̂ᵢr̂ⱼ is formed first so the entry is bit-identical under i↔j.
            *v = Complex64::new((3.0 * (rhat[i] * rhat[j]) - delta) * inv_r3, 0.0);
        }
    }
    out
}

/// Retarded frequency-domain coupling tensor 𝒟(r, κ) with κ = ω/c
/// (κ may be negative: 𝒟(r, −κ) = conj 𝒟(r, κ) for real r).
///
/// # Panics
/// Panics if r is the zero vector.
pub fn tensor_d(r: [f64; 3], kappa: f64) -> Tensor3x3 {
    let rn = norm3(r);
    assert!(rn > 0.0, "coupling tensor requires a nonzero separation");
    let rhat = [r[0] / rn, r[1] / rn, r[2] / rn];
    let kr = kappa * rn;
    let phase = Complex64::new(0.0, kr).exp();
    let inv_r3 = 1.0 / (rn * rn * rn);
    let one_minus_ikr = Complex64::new(1.0, -kr);
    let kr2 = Complex64::new(kr * kr, 0.0);
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            // r̂ᵢr̂ⱼ is formed first so the entry is bit-identical under i↔j.
            let near = Complex64::new(delta - 3.0 * (rhat[i] * rhat[j]), 0.0);
            let far = Complex64::new(delta - rhat[i] * rhat[j], 0.0);
            *v = phase * inv_r3 * (-near * one_minus_ikr + far * kr2);
        }
    }
    out
}

/// Contract a tensor with real vectors on both sides: aᵀ · T · b.
pub fn contract_tensor(t: &Tensor3x3, a: [f64; 3], b: [f64; 3]) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            sum += Complex64::new(a[i], 0.0) * t[i][j] * Complex64::new(b[j], 0.0);
        }
    }
    sum
}

/// Positions of an M×M×M cubic lattice with the given spacing, with one
/// corner at `origin`.
pub fn cubic_lattice(m: usize, spacing: f64, origin: [f64; 3]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(m * m * m);
    for ix in 0..m {
        for iy in 0..m {
            for iz in 0..m {
                out.push([
                    origin[0] + spacing * ix as f64,
                    origin[1] + spacing * iy as f64,
                    origin[2] + spacing * iz as f64,
                ]);
            }
        }
    }
    out
}

/// Bare pair phase sum Σ_{a≠b} e^{i(k_in·r_b − k_out·r_a)} over ordered
/// distinct pairs. This isolates the constructive/destructive interference
/// of the pair terms; the coupling tensor and response factors are left out.
pub fn pair_phase_sum(positions: &[[f64; 3]], k_in: [f64; 3], k_out: [f64; 3]) -> Complex64 {
    let dot = |k: [f64; 3], r: [f64; 3]| k[0] * r[0] + k[1] * r[1] + k[2] * r[2];
    // Σ_{a≠b} = (Σ_b e^{ik_in·r_b})(Σ_a e^{−ik_out·r_a}) − Σ_a e^{i(k_in−k_out)·r_a}
    let mut sum_in = Complex64::new(0.0, 0.0);
    let mut sum_out = Complex64::new(0.0, 0.0);
    let mut sum_diag = Complex64::new(0.0, 0.0);
    for &r in positions {
        sum_in += Complex64::new(0.0, dot(k_in, r)).exp();
        sum_out += Complex64::new(0.0, -dot(k_out, r)).exp();
        sum_diag += Complex64::new(0.0, dot(k_in, r) - dot(k_out, r)).exp();
    }
    sum_in * sum_out - sum_diag
}
