//! Single-molecule response functions in time and frequency domain.
//!
//! All functions are built from the chain pattern
//!
//!   ⟨V₊ G V₋ G V₋ … ⟩ = Tᵀ · V₊ · G · V₋ · G · V₋ ⋯ |ground⟩
//!
//! in Liouville space, with G either the retarded propagator G(t) or the
//! resolvent G(ω). The "bar" time-domain forms absorb the −i factor carried
//! by each propagator; overall signal prefactors such as (−i/ħ)ⁿ live in the
//! signal-assembly layer, not here.
//!
//! Definitions (axes i, j, … are Cartesian component indices 0..3):
//!
//! * linear: ᾱ^{ij}(t) = ⟨V₊^i G(t) V₋^j⟩ and ᾱ^{ij}(ω) = ⟨V₊^i G(ω) V₋^j⟩;
//! * quadratic: β̄^{ijk}(t, t′) = ⟨V₊^i G(t) V₋^j G(t′) V₋^k⟩ and
//!   β̄^{ijk}(ω_first, ω_second) = ⟨V₊^i G(ω_first + ω_second) V₋^j G(ω_first) V₋^k⟩,
//!   where ω_first is the frequency absorbed at the earliest interaction
//!   (last index k) and ω_second the one absorbed at the middle leg (j);
//! * cubic: γ̄ analogues with three propagators and partial sums
//!   ω_first, ω_first + ω_second, ω_first + ω_second + ω_third.
//!
//! Time-ordered images sum the leg orderings so that each external leg is
//! tied to its own argument regardless of chronology:
//!
//!   TOβ^{i;(j,·),(k,·)} = β̄^{ijk}(image with k earliest)
//!                       + β̄^{ikj}(image with j earliest),
//!
//! and TOγ sums all 3! orderings. In frequency domain each leg keeps the
//! frequency it absorbs, so the partial-sum arguments follow the
//! chronological ordering of that image.
//!
//! Two routes are provided and cross-checked in the tests:
//! direct dense chains through [`SuperOpSpace`] operators, and sparse modal
//! decompositions ([`LinearModes`], [`QuadraticModes`], [`CubicModes`]) used
//! by the signal-assembly layer, which exploit the diagonal Liouvillian:
//! every chain is a finite sum of products of simple poles/exponentials.

use crate::core_model::SuperOpSpace;
use crate::Complex64;
use ndarray::{Array1, Array2};

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

// ---------------------------------------------------------------------------
// Direct chain evaluations
// ---------------------------------------------------------------------------

fn chain_time(space: &SuperOpSpace, det_axis: usize, legs: &[(usize, f64)]) -> Complex64 {
    // legs are listed from the latest interaction to the earliest, each with
    // the propagation delay that follows it (i.e. the delay between it and
    // the next-later vertex).
    let mut x = space.ground.clone();
    for &(axis, delay) in legs.iter().rev() {
        x = space.v_minus[axis].dot(&x);
        x = space.apply_propagator(delay, &x);
    }
    x = space.v_plus[det_axis].dot(&x);
    space.trace_dot(&x)
}

fn chain_freq(space: &SuperOpSpace, det_axis: usize, legs: &[(usize, Complex64)]) -> Complex64 {
    // legs as in `chain_time`, with the accumulated frequency that propagates
    // after each interaction.
    let mut x = space.ground.clone();
    for &(axis, omega) in legs.iter().rev() {
        x = space.v_minus[axis].dot(&x);
        x = space.apply_resolvent(omega, &x);
    }
    x = space.v_plus[det_axis].dot(&x);
    space.trace_dot(&x)
}

/// Linear response ᾱ^{ij}(t) = ⟨V₊^i G(t) V₋^j⟩ (vanishes for t < 0).
pub fn alpha_bar_time(space: &SuperOpSpace, i: usize, j: usize, t: f64) -> Complex64 {
    chain_time(space, i, &[(j, t)])
}

/// Linear response ᾱ^{ij}(ω) at complex frequency.
pub fn alpha_freq_c(space: &SuperOpSpace, i: usize, j: usize, omega: Complex64) -> Complex64 {
    chain_freq(space, i, &[(j, omega)])
}

/// Linear response ᾱ^{ij}(ω) at real frequency.
pub fn alpha_freq(space: &SuperOpSpace, i: usize, j: usize, omega: f64) -> Complex64 {
    alpha_freq_c(space, i, j, Complex64::new(omega, 0.0))
}

/// Quadratic response β̄^{ijk}(t, t′) = ⟨V₊^i G(t) V₋^j G(t′) V₋^k⟩.
pub fn beta_bar_time(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    t: f64,
    t_prime: f64,
) -> Complex64 {
    chain_time(space, i, &[(j, t), (k, t_prime)])
}

/// Quadratic response in frequency domain at complex arguments:
/// ⟨V₊^i G(ω_first + ω_second) V₋^j G(ω_first) V₋^k⟩.
pub fn beta_freq_c(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    omega_first: Complex64,
    omega_second: Complex64,
) -> Complex64 {
    chain_freq(
        space,
        i,
        &[(j, omega_first + omega_second), (k, omega_first)],
    )
}

/// Quadratic response in frequency domain at real arguments.
pub fn beta_freq(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    omega_first: f64,
    omega_second: f64,
) -> Complex64 {
    beta_freq_c(
        space,
        i,
        j,
        k,
        Complex64::new(omega_first, 0.0),
        Complex64::new(omega_second, 0.0),
    )
}

/// Time-ordered quadratic image: legs (j, t_j) and (k, t_k) interact at their
/// own times, detection at axis i and time t_i. Symmetric under exchanging
/// the two leg/time pairs.
pub fn to_beta_time(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    t_i: f64,
    t_j: f64,
    t_k: f64,
) -> Complex64 {
    beta_bar_time(space, i, j, k, t_i - t_j, t_j - t_k)
        + beta_bar_time(space, i, k, j, t_i - t_k, t_k - t_j)
}

/// Time-ordered quadratic image in frequency domain: leg j absorbs f_j and
/// leg k absorbs f_k; both chronological orderings are summed, each with the
/// appropriate partial-sum arguments. Symmetric under (j, f_j) ↔ (k, f_k).
pub fn to_beta_freq_c(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    f_j: Complex64,
    f_k: Complex64,
) -> Complex64 {
    beta_freq_c(space, i, j, k, f_k, f_j) + beta_freq_c(space, i, k, j, f_j, f_k)
}

/// Time-ordered quadratic image at real frequencies.
pub fn to_beta_freq(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    f_j: f64,
    f_k: f64,
) -> Complex64 {
    to_beta_freq_c(
        space,
        i,
        j,
        k,
        Complex64::new(f_j, 0.0),
        Complex64::new(f_k, 0.0),
    )
}

/// Cubic response γ̄^{ijkl}(t, t′, t″) = ⟨V₊^i G(t) V₋^j G(t′) V₋^k G(t″) V₋^l⟩.
// Four Cartesian indices plus three time/frequency arguments are inherent
// to a rank-4 response; bundling them would only obscure the call sites.
#[allow(clippy::too_many_arguments)]
pub fn gamma_bar_time(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    t: f64,
    t_prime: f64,
    t_second: f64,
) -> Complex64 {
    chain_time(space, i, &[(j, t), (k, t_prime), (l, t_second)])
}

/// Cubic response in frequency domain at complex arguments:
/// ⟨V₊^i G(ω₁+ω₂+ω₃) V₋^j G(ω₁+ω₂) V₋^k G(ω₁) V₋^l⟩.
// Four Cartesian indices plus three time/frequency arguments are inherent
// to a rank-4 response; bundling them would only obscure the call sites.
#[allow(clippy::too_many_arguments)]
pub fn gamma_freq_c(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    omega_first: Complex64,
    omega_second: Complex64,
    omega_third: Complex64,
) -> Complex64 {
    chain_freq(
        space,
        i,
        &[
            (j, omega_first + omega_second + omega_third),
            (k, omega_first + omega_second),
            (l, omega_first),
        ],
    )
}

/// Cubic response in frequency domain at real arguments.
// Four Cartesian indices plus three time/frequency arguments are inherent
// to a rank-4 response; bundling them would only obscure the call sites.
#[allow(clippy::too_many_arguments)]
pub fn gamma_freq(
    space: &SuperOpSpace,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    omega_first: f64,
    omega_second: f64,
    omega_third: f64,
) -> Complex64 {
    gamma_freq_c(
        space,
        i,
        j,
        k,
        l,
        Complex64::new(omega_first, 0.0),
        Complex64::new(omega_second, 0.0),
        Complex64::new(omega_third, 0.0),
    )
}

/// Time-ordered cubic image: legs (j, t_j), (k, t_k), (l, t_l) interact at
/// their own times; all 3! chronological orderings are summed.
pub fn to_gamma_time(
    space: &SuperOpSpace,
    i: usize,
    legs: [(usize, f64); 3],
    t_i: f64,
) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for perm in permutations3() {
        // perm lists leg positions from earliest to latest.
        let (e1, e2, e3) = (legs[perm[0]], legs[perm[1]], legs[perm[2]]);
        total += gamma_bar_time(
            space,
            i,
            e3.0,
            e2.0,
            e1.0,
            t_i - e3.1,
            e3.1 - e2.1,
            e2.1 - e1.1,
        );
    }
    total
}

/// Time-ordered cubic image in frequency domain: each leg keeps the frequency
/// it absorbs; partial sums follow the chronology of each ordering.
pub fn to_gamma_freq_c(space: &SuperOpSpace, i: usize, legs: [(usize, Complex64); 3]) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for perm in permutations3() {
        let (e1, e2, e3) = (legs[perm[0]], legs[perm[1]], legs[perm[2]]);
        total += gamma_freq_c(space, i, e3.0, e2.0, e1.0, e1.1, e2.1, e3.1);
    }
    total
}

/// All permutations of (0, 1, 2).
fn permutations3() -> [[usize; 3]; 6] {
    [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ]
}

// ---------------------------------------------------------------------------
// Sparse modal decompositions
// ---------------------------------------------------------------------------

/// Row covector (Tᵀ·M) for a superoperator M.
fn trace_row_through(space: &SuperOpSpace, m: &Array2<Complex64>) -> Array1<Complex64> {
    m.t().dot(&space.trace_row)
}

/// Sparse modal form of a linear chain:
///   time: ᾱ(t) = −i θ(t) Σ_p c_p e^{−iλ_p t},
///   freq: ᾱ(ω) = Σ_p c_p / (ω − λ_p).
#[derive(Debug, Clone)]
pub struct LinearModes {
    /// (coefficient, eigenvalue) pairs with structurally nonzero coefficient.
    pub terms: Vec<(Complex64, Complex64)>,
}

/// Sparse modal form of a quadratic chain:
///   time: β̄(t, t′) = −θ(t)θ(t′) Σ c e^{−iλ_out t} e^{−iλ_in t′},
///   freq: β̄(ω_f, ω_s) = Σ c / ((ω_f + ω_s − λ_out)(ω_f − λ_in)).
#[derive(Debug, Clone)]
pub struct QuadraticModes {
    /// (coefficient, λ_outer, λ_inner) triples.
    pub terms: Vec<(Complex64, Complex64, Complex64)>,
}

/// Sparse modal form of a cubic chain:
///   time: γ̄(t, t′, t″) = i θθθ Σ c e^{−iλ₁t} e^{−iλ₂t′} e^{−iλ₃t″},
///   freq: γ̄ = Σ c / ((Ω₃ − λ₁)(Ω₂ − λ₂)(Ω₁ − λ₃)) with partial sums Ω_k.
#[derive(Debug, Clone)]
pub struct CubicModes {
    /// (coefficient, λ₁ outer, λ₂ middle, λ₃ inner).
    pub terms: Vec<(Complex64, Complex64, Complex64, Complex64)>,
}

fn nonzero(c: Complex64) -> bool {
    c.re != 0.0 || c.im != 0.0
}

/// Modal decomposition of ⟨det · G · leg⟩ for arbitrary (already contracted)
/// detection and interaction superoperators.
pub fn linear_modes(
    space: &SuperOpSpace,
    det: &Array2<Complex64>,
    leg: &Array2<Complex64>,
) -> LinearModes {
    let row = trace_row_through(space, det);
    let col = leg.dot(&space.ground);
    let mut terms = Vec::new();
    for p in 0..space.ldim {
        let c = row[p] * col[p];
        if nonzero(c) {
            terms.push((c, space.lambda[p]));
        }
    }
    LinearModes { terms }
}

/// Modal decomposition of ⟨det · G · mid · G · first⟩.
pub fn quadratic_modes(
    space: &SuperOpSpace,
    det: &Array2<Complex64>,
    mid: &Array2<Complex64>,
    first: &Array2<Complex64>,
) -> QuadraticModes {
    let row = trace_row_through(space, det);
    let col = first.dot(&space.ground);
    let mut terms = Vec::new();
    for p in 0..space.ldim {
        if !nonzero(row[p]) {
            continue;
        }
        for q in 0..space.ldim {
            let c = row[p] * mid[[p, q]] * col[q];
            if nonzero(c) {
                terms.push((c, space.lambda[p], space.lambda[q]));
            }
        }
    }
    QuadraticModes { terms }
}

/// Modal decomposition of ⟨det · G · op_a · G · op_b · G · first⟩.
pub fn cubic_modes(
    space: &SuperOpSpace,
    det: &Array2<Complex64>,
    op_a: &Array2<Complex64>,
    op_b: &Array2<Complex64>,
    first: &Array2<Complex64>,
) -> CubicModes {
    let row = trace_row_through(space, det);
    let col = first.dot(&space.ground);
    let mut terms = Vec::new();
    for p in 0..space.ldim {
        if !nonzero(row[p]) {
            continue;
        }
        for q in 0..space.ldim {
            let rpq = row[p] * op_a[[p, q]];
            if !nonzero(rpq) {
                continue;
            }
            for r in 0..space.ldim {
                let c = rpq * op_b[[q, r]] * col[r];
                if nonzero(c) {
                    terms.push((c, space.lambda[p], space.lambda[q], space.lambda[r]));
                }
            }
        }
    }
    CubicModes { terms }
}

impl LinearModes {
    /// ᾱ(t); zero for t < 0.
    pub fn time(&self, t: f64) -> Complex64 {
        if t < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for &(c, l) in &self.terms {
            sum += c * (MINUS_I * l * t).exp();
        }
        MINUS_I * sum
    }

    /// ᾱ(ω) at complex frequency.
    pub fn freq(&self, omega: Complex64) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for &(c, l) in &self.terms {
            sum += c / (omega - l);
        }
        sum
    }
}

impl QuadraticModes {
    /// β̄(t, t′); zero unless both delays are ≥ 0.
    pub fn time(&self, t: f64, t_prime: f64) -> Complex64 {
        if t < 0.0 || t_prime < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for &(c, lo, li) in &self.terms {
            sum += c * (MINUS_I * (lo * t + li * t_prime)).exp();
        }
        -sum
    }

    /// β̄(ω_first, ω_second) at complex frequencies.
    pub fn freq(&self, omega_first: Complex64, omega_second: Complex64) -> Complex64 {
        let total = omega_first + omega_second;
        let mut sum = Complex64::new(0.0, 0.0);
        for &(c, lo, li) in &self.terms {
            sum += c / ((total - lo) * (omega_first - li));
        }
        sum
    }
}

impl CubicModes {
    /// γ̄(t, t′, t″); zero unless all delays are ≥ 0.
    pub fn time(&self, t: f64, t_prime: f64, t_second: f64) -> Complex64 {
        if t < 0.0 || t_prime < 0.0 || t_second < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for &(c, l1, l2, l3) in &self.terms {
            sum += c * (MINUS_I * (l1 * t + l2 * t_prime + l3 * t_second)).exp();
        }
        Complex64::new(0.0, 1.0) * sum
    }

    /// γ̄ at complex partial-sum building blocks (ω_first, ω_second, ω_third).
    pub fn freq(
        &self,
        omega_first: Complex64,
        omega_second: Complex64,
        omega_third: Complex64,
    ) -> Complex64 {
        let s2 = omega_first + omega_second;
        let s3 = s2 + omega_third;
        let mut sum = Complex64::new(0.0, 0.0);
        for &(c, l1, l2, l3) in &self.terms {
            sum += c / ((s3 - l1) * (s2 - l2) * (omega_first - l3));
        }
        sum
    }
}

/// Both leg orderings of a time-ordered quadratic image, for signal assembly.
/// `jk` has leg j adjacent to detection (k earliest); `kj` is the mirror.
#[derive(Debug, Clone)]
pub struct ToBeta {
    pub jk: QuadraticModes,
    pub kj: QuadraticModes,
}

/// Build the time-ordered quadratic image for detection operator `det` and
/// interaction operators `op_j`, `op_k` (already contracted).
pub fn to_beta_modes(
    space: &SuperOpSpace,
    det: &Array2<Complex64>,
    op_j: &Array2<Complex64>,
    op_k: &Array2<Complex64>,
) -> ToBeta {
    ToBeta {
        jk: quadratic_modes(space, det, op_j, op_k),
        kj: quadratic_modes(space, det, op_k, op_j),
    }
}

impl ToBeta {
    /// TOβ at interaction times (t_j, t_k) and detection time t_i.
    pub fn time(&self, t_i: f64, t_j: f64, t_k: f64) -> Complex64 {
        self.jk.time(t_i - t_j, t_j - t_k) + self.kj.time(t_i - t_k, t_k - t_j)
    }

    /// TOβ with leg j absorbing f_j and leg k absorbing f_k.
    pub fn freq(&self, f_j: Complex64, f_k: Complex64) -> Complex64 {
        self.jk.freq(f_k, f_j) + self.kj.freq(f_j, f_k)
    }
}

/// All 3! chronological orderings of a time-ordered cubic image, for signal
/// assembly. Each entry pairs a permutation (leg positions listed earliest
/// to latest) with the modal form of the corresponding chain.
#[derive(Debug, Clone)]
pub struct ToGamma {
    pub orderings: Vec<([usize; 3], CubicModes)>,
}

/// Build the time-ordered cubic image for detection operator `det` and three
/// interaction operators (already contracted).
pub fn to_gamma_modes(
    space: &SuperOpSpace,
    det: &Array2<Complex64>,
    ops: [&Array2<Complex64>; 3],
) -> ToGamma {
    let mut orderings = Vec::with_capacity(6);
    for perm in permutations3() {
        // perm = leg positions earliest → latest; the chain lists operators
        // latest-first after the detection operator.
        let modes = cubic_modes(space, det, ops[perm[2]], ops[perm[1]], ops[perm[0]]);
        orderings.push((perm, modes));
    }
    ToGamma { orderings }
}

impl ToGamma {
    /// TOγ with leg ℓ absorbing `f[ℓ]`; partial sums follow each ordering's
    /// chronology.
    pub fn freq(&self, f: [Complex64; 3]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (perm, modes) in &self.orderings {
            total += modes.freq(f[perm[0]], f[perm[1]], f[perm[2]]);
        }
        total
    }

    /// TOγ at interaction times `t[ℓ]` and detection time `t_i`.
    pub fn time(&self, t_i: f64, t: [f64; 3]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (perm, modes) in &self.orderings {
            let (t1, t2, t3) = (t[perm[0]], t[perm[1]], t[perm[2]]);
            total += modes.time(t_i - t3, t3 - t2, t2 - t1);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::{build_superop_space, MolecularModel};
    use crate::quad::adaptive_gk;
    use rand::Rng;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const Z: usize = 2;

    fn two_level(mu: f64, omega0: f64, gamma: f64) -> SuperOpSpace {
        build_superop_space(
            &MolecularModel::new(
                "two-level",
                vec![0.0, omega0],
                &[((0, 1), gamma)],
                &[((0, 1), [c(0.0, 0.0), c(0.0, 0.0), c(mu, 0.0)])],
                [0.0; 3],
            )
            .unwrap(),
        )
    }

    /// Three-level model with all three transitions dipole-allowed, so the
    /// quadratic response is nonzero. Energies 0, 1, 2.3.
    fn three_level(gamma: f64) -> SuperOpSpace {
        build_superop_space(
            &MolecularModel::new(
                "three-level",
                vec![0.0, 1.0, 2.3],
                &[
                    ((0, 1), gamma),
                    ((1, 2), 1.5 * gamma),
                    ((0, 2), 1.2 * gamma),
                ],
                &[
                    ((0, 1), [c(0.2, 0.0), c(0.0, 0.1), c(1.0, 0.0)]),
                    ((1, 2), [c(0.0, 0.0), c(0.3, 0.0), c(0.8, -0.2)]),
                    ((0, 2), [c(0.1, 0.0), c(0.0, 0.0), c(0.35, 0.1)]),
                ],
                [0.0; 3],
            )
            .unwrap(),
        )
    }

    #[test]
    fn two_level_alpha_freq_matches_closed_form() {
        let (mu, omega0, gamma) = (0.7, 1.3, 0.05);
        let space = two_level(mu, omega0, gamma);
        for &omega in &[0.2, 0.9, 1.3, 1.31, 2.7, -1.3, 10.0] {
            let got = alpha_freq(&space, Z, Z, omega);
            let expect = mu
                * mu
                * (c(1.0, 0.0) / c(omega - omega0, gamma) - c(1.0, 0.0) / c(omega + omega0, gamma));
            assert!(
                (got - expect).norm() <= 1e-10 * expect.norm().max(1.0),
                "alpha_freq({omega}) = {got}, closed form {expect}"
            );
        }
        // Absorptive sign: Im ᾱ < 0 at resonance.
        assert!(alpha_freq(&space, Z, Z, omega0).im < 0.0);
    }

    #[test]
    fn alpha_negative_frequency_reality() {
        // ᾱ(t) is real for Hermitian dipoles and symmetric damping, hence
        // ᾱ(−ω) = conj(ᾱ(ω)) for real ω. Checked on a complex-dipole model.
        let space = three_level(0.1);
        for axis_i in 0..3 {
            for axis_j in 0..3 {
                for &omega in &[0.4, 1.0, 1.9, 3.3] {
                    let plus = alpha_freq(&space, axis_i, axis_j, omega);
                    let minus = alpha_freq(&space, axis_i, axis_j, -omega);
                    assert!(
                        (minus - plus.conj()).norm() < 1e-12 * plus.norm().max(1.0),
                        "reality violated at axes ({axis_i},{axis_j}), ω = {omega}"
                    );
                }
            }
        }
    }

    #[test]
    fn alpha_bar_time_at_zero_is_expectation_of_commutator() {
        // G(0) = −i·I, so ᾱ(0) = −i⟨V₊V₋⟩.
        let space = three_level(0.1);
        for axis in 0..3 {
            let direct = alpha_bar_time(&space, axis, axis, 0.0);
            let y = space.v_minus[axis].dot(&space.ground);
            let y = space.v_plus[axis].dot(&y);
            let expect = MINUS_I * space.trace_dot(&y);
            assert!((direct - expect).norm() < 1e-14);
        }
        assert_eq!(alpha_bar_time(&space, Z, Z, -0.1), c(0.0, 0.0));
    }

    #[test]
    fn alpha_modal_matches_direct_chain() {
        let space = three_level(0.17);
        let modes = linear_modes(&space, &space.v_plus[Z], &space.v_minus[0]);
        for &t in &[0.0, 0.3, 2.7, 11.0] {
            let a = modes.time(t);
            let b = alpha_bar_time(&space, Z, 0, t);
            assert!(
                (a - b).norm() <= 1e-13 * b.norm().max(1.0),
                "t = {t}: {a} vs {b}"
            );
        }
        for &omega in &[0.45, 1.02, 2.9, -1.4] {
            let a = modes.freq(c(omega, 0.0));
            let b = alpha_freq(&space, Z, 0, omega);
            assert!(
                (a - b).norm() <= 1e-13 * b.norm().max(1.0),
                "ω = {omega}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn alpha_freq_is_fourier_transform_of_alpha_time() {
        // ᾱ(ω) = ∫₀^∞ ᾱ(t) e^{iωt} dt; all modes are damped coherences.
        let space = three_level(0.2);
        let omega = 0.83;
        let t_max = 60.0 / 0.2;
        let ft = adaptive_gk(
            &|t| alpha_bar_time(&space, Z, Z, t) * (c(0.0, omega) * t).exp(),
            0.0,
            t_max,
            1e-9,
            "alpha FT",
        )
        .unwrap()
        .value;
        let expect = alpha_freq(&space, Z, Z, omega);
        assert!(
            (ft - expect).norm() <= 1e-7 * expect.norm(),
            "FT {ft} vs resolvent {expect}"
        );
    }

    #[test]
    fn two_level_beta_is_exactly_zero() {
        // A two-level dipole has zero diagonal, so the trace closing a
        // second-order chain vanishes identically — in exact zeros, because
        // every multiplication yields structural 0.0 terms.
        let space = two_level(1.0, 1.0, 0.05);
        for &(t, tp) in &[(0.0, 0.0), (0.5, 0.2), (3.0, 1.0), (10.0, 7.3)] {
            let v = beta_bar_time(&space, Z, Z, Z, t, tp);
            assert_eq!(v, c(0.0, 0.0), "two-level β̄({t},{tp}) must be exactly zero");
        }
        for &(w1, w2) in &[(0.9, 0.7), (1.0, 1.0), (-0.3, 2.1)] {
            let v = beta_freq(&space, Z, Z, Z, w1, w2);
            assert_eq!(v, c(0.0, 0.0));
        }
        let modes = quadratic_modes(
            &space,
            &space.v_plus[Z],
            &space.v_minus[Z],
            &space.v_minus[Z],
        );
        assert!(
            modes.terms.is_empty(),
            "no structurally nonzero quadratic modes"
        );
    }

    #[test]
    fn strict_ladder_beta_is_exactly_zero() {
        // Three-level ladder with μ_ge and μ_ef but no μ_gf: after two
        // interactions the system cannot radiate back to a closed trace —
        // parity forbids the quadratic response.
        let space = build_superop_space(
            &MolecularModel::new(
                "ladder",
                vec![0.0, 1.0, 2.1],
                &[((0, 1), 0.1), ((1, 2), 0.1), ((0, 2), 0.1)],
                &[
                    ((0, 1), [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
                    ((1, 2), [c(0.0, 0.0), c(0.0, 0.0), c(0.7, 0.0)]),
                ],
                [0.0; 3],
            )
            .unwrap(),
        );
        assert_eq!(beta_bar_time(&space, Z, Z, Z, 1.3, 0.8), c(0.0, 0.0));
        assert_eq!(beta_freq(&space, Z, Z, Z, 1.1, 0.95), c(0.0, 0.0));
    }

    #[test]
    fn beta_modal_matches_direct_chain() {
        let space = three_level(0.12);
        let modes = quadratic_modes(
            &space,
            &space.v_plus[Z],
            &space.v_minus[Z],
            &space.v_minus[Z],
        );
        assert!(!modes.terms.is_empty());
        for &(t, tp) in &[(0.0, 0.0), (0.4, 1.2), (2.2, 0.1), (6.0, 3.0)] {
            let a = modes.time(t, tp);
            let b = beta_bar_time(&space, Z, Z, Z, t, tp);
            assert!(
                (a - b).norm() <= 1e-13 * b.norm().max(1.0),
                "({t},{tp}): {a} vs {b}"
            );
        }
        for &(w1, w2) in &[(0.8, 1.4), (1.0, 1.3), (2.2, -0.9)] {
            let a = modes.freq(c(w1, 0.0), c(w2, 0.0));
            let b = beta_freq(&space, Z, Z, Z, w1, w2);
            assert!(
                (a - b).norm() <= 1e-13 * b.norm().max(1.0),
                "({w1},{w2}): {a} vs {b}"
            );
        }
    }

    #[test]
    fn beta_freq_is_double_fourier_transform_of_beta_time() {
        // β̄(ω_f, ω_s) = ∫₀^∞ dt ∫₀^∞ dt′ e^{i(ω_f+ω_s)t} e^{iω_f t′} β̄(t, t′).
        // Both mode families are damped coherences (the trace kills population
        // modes on the outer leg; the ground state feeds only coherences on
        // the inner leg), so the real-frequency integral converges absolutely.
        let space = three_level(0.2);
        let modes = quadratic_modes(
            &space,
            &space.v_plus[Z],
            &space.v_minus[Z],
            &space.v_minus[Z],
        );
        let (wf, ws) = (0.83, 1.91);
        let t_max = 150.0;
        let outer = adaptive_gk(
            &|t| {
                let inner = adaptive_gk(
                    &|tp| modes.time(t, tp) * (c(0.0, wf) * tp).exp(),
                    0.0,
                    t_max,
                    1e-8,
                    "beta FT inner",
                )
                .unwrap()
                .value;
                inner * (c(0.0, wf + ws) * t).exp()
            },
            0.0,
            t_max,
            1e-7,
            "beta FT outer",
        )
        .unwrap()
        .value;
        let expect = beta_freq(&space, Z, Z, Z, wf, ws);
        assert!(
            (outer - expect).norm() <= 1e-4 * expect.norm(),
            "2-D FT {outer} vs closed form {expect} (rel {})",
            (outer - expect).norm() / expect.norm()
        );
    }

    #[test]
    fn time_ordered_beta_is_symmetric_under_leg_exchange() {
        let space = three_level(0.15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (ti, tj, tk) = (
                rng.gen_range(-2.0..8.0),
                rng.gen_range(-2.0..8.0),
                rng.gen_range(-2.0..8.0),
            );
            let (aj, ak) = (rng.gen_range(0..3), rng.gen_range(0..3));
            let a = to_beta_time(&space, Z, aj, ak, ti, tj, tk);
            let b = to_beta_time(&space, Z, ak, aj, ti, tk, tj);
            assert!(
                (a - b).norm() <= 1e-13 * a.norm().max(1e-30),
                "time-ordered leg exchange must be symmetric"
            );
            let (fj, fk) = (rng.gen_range(0.2..2.5), rng.gen_range(0.2..2.5));
            let a = to_beta_freq(&space, Z, aj, ak, fj, fk);
            let b = to_beta_freq(&space, Z, ak, aj, fk, fj);
            assert!((a - b).norm() <= 1e-13 * a.norm().max(1e-30));
        }
    }

    #[test]
    fn time_ordered_beta_selects_the_chronological_branch() {
        // For generic times exactly one ordering survives the step gates.
        let space = three_level(0.15);
        let (ti, tj, tk) = (5.0, 3.0, 1.0); // j later than k
        let expect = beta_bar_time(&space, Z, 0, 1, ti - tj, tj - tk);
        let got = to_beta_time(&space, Z, 0, 1, ti, tj, tk);
        assert!((got - expect).norm() < 1e-14 * expect.norm().max(1.0));
        // Swapping the leg times (j-leg now at 1, k-leg at 3) selects the
        // mirrored chain: the later k-leg's dipole leads, and the delays are
        // detection ← later (5−3) and later ← earlier (3−1) as before.
        let expect = beta_bar_time(&space, Z, 1, 0, ti - tj, tj - tk);
        let got = to_beta_time(&space, Z, 0, 1, ti, tk, tj);
        assert!((got - expect).norm() < 1e-14 * expect.norm().max(1.0));
    }

    #[test]
    fn to_beta_modes_match_direct_time_ordered_evaluation() {
        let space = three_level(0.21);
        let to = to_beta_modes(
            &space,
            &space.v_plus[Z],
            &space.v_minus[0],
            &space.v_minus[1],
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (ti, tj, tk) = (
                rng.gen_range(-1.0..9.0),
                rng.gen_range(-1.0..9.0),
                rng.gen_range(-1.0..9.0),
            );
            let a = to.time(ti, tj, tk);
            let b = to_beta_time(&space, Z, 0, 1, ti, tj, tk);
            assert!((a - b).norm() <= 1e-13 * b.norm().max(1e-30));
            let (fj, fk) = (rng.gen_range(-2.5..2.5), rng.gen_range(0.1..2.5));
            let a = to.freq(c(fj, 0.0), c(fk, 0.0));
            let b = to_beta_freq(&space, Z, 0, 1, fj, fk);
            assert!((a - b).norm() <= 1e-13 * b.norm().max(1e-30));
        }
    }

    #[test]
    fn gamma_is_nonzero_for_two_level() {
        let space = two_level(1.0, 1.0, 0.05);
        let v = gamma_bar_time(&space, Z, Z, Z, Z, 0.5, 0.3, 0.2);
        assert!(
            v.norm() > 1e-3,
            "two-level cubic response should not vanish: {v}"
        );
    }

    #[test]
    fn gamma_modal_matches_direct_chain() {
        let space = three_level(0.3);
        let modes = cubic_modes(
            &space,
            &space.v_plus[Z],
            &space.v_minus[Z],
            &space.v_minus[Z],
            &space.v_minus[Z],
        );
        for &(t1, t2, t3) in &[(0.2, 0.5, 0.1), (1.0, 0.0, 2.0), (4.0, 2.5, 0.7)] {
            let a = modes.time(t1, t2, t3);
            let b = gamma_bar_time(&space, Z, Z, Z, Z, t1, t2, t3);
            assert!((a - b).norm() <= 1e-13 * b.norm().max(1.0));
        }
        for &(w1, w2, w3) in &[(0.8, 0.9, 1.1), (1.3, -0.7, 2.0)] {
            let a = modes.freq(c(w1, 0.0), c(w2, 0.0), c(w3, 0.0));
            let b = gamma_freq(&space, Z, Z, Z, Z, w1, w2, w3);
            assert!((a - b).norm() <= 1e-13 * b.norm().max(1.0));
        }
    }

    #[test]
    fn gamma_freq_outer_leg_fourier_consistency() {
        // Transform only the latest propagation interval: the inner two legs
        // stay in frequency space (direct resolvent chain), the outer leg is
        // integrated numerically. Outer modes are damped coherences, so real
        // frequencies converge.
        let space = three_level(0.25);
        let (w1, w2, w3) = (0.83, 1.37, 0.52);
        let s2 = w1 + w2;
        let s3 = s2 + w3;
        let t_max = 60.0 / 0.25;
        // Inner part: x = G(s2) V₋ G(s1) V₋ g, then one more V₋, then the
        // time-domain outer propagation and trace against V₊.
        let mut x = space.v_minus[Z].dot(&space.ground);
        x = space.apply_resolvent(c(w1, 0.0), &x);
        x = space.v_minus[Z].dot(&x);
        x = space.apply_resolvent(c(s2, 0.0), &x);
        x = space.v_minus[Z].dot(&x);
        let ft = adaptive_gk(
            &|t| {
                let y = space.apply_propagator(t, &x);
                let y = space.v_plus[Z].dot(&y);
                space.trace_dot(&y) * (c(0.0, s3) * t).exp()
            },
            0.0,
            t_max,
            1e-9,
            "gamma outer FT",
        )
        .unwrap()
        .value;
        let expect = gamma_freq(&space, Z, Z, Z, Z, w1, w2, w3);
        assert!(
            (ft - expect).norm() <= 1e-4 * expect.norm(),
            "outer-leg FT {ft} vs {expect}"
        );
    }

    #[test]
    fn gamma_freq_middle_leg_fourier_consistency() {
        // Transform only the middle interval. Population modes live here and
        // are undamped, so the transform is taken with uniform damping η,
        // matched on the closed-form side by the shift ω₂ → ω₂ + iη,
        // ω₃ → ω₃ − iη (an exact identity for every η > 0).
        let space = three_level(0.25);
        let (w1, w2, w3) = (0.83, 1.37, 0.52);
        let eta = 0.15;
        let s2 = w1 + w2;
        let s3 = s2 + w3;
        let t_max = 140.0;
        let mut x0 = space.v_minus[Z].dot(&space.ground);
        x0 = space.apply_resolvent(c(w1, 0.0), &x0);
        x0 = space.v_minus[Z].dot(&x0);
        let row = {
            let mut y = space.v_plus[Z].t().dot(&space.trace_row);
            // (Tᵀ V₊ G(s3) V₋) as a row: apply the conjugate-side chain.
            // Row-vector application of a diagonal resolvent is elementwise.
            for (p, v) in y.iter_mut().enumerate() {
                if v.re != 0.0 || v.im != 0.0 {
                    *v /= c(s3, 0.0) - space.lambda[p];
                }
            }
            space.v_minus[Z].t().dot(&y)
        };
        let ft = adaptive_gk(
            &|tp| {
                let y = space.apply_propagator(tp, &x0);
                let val: Complex64 = row.iter().zip(y.iter()).map(|(r, v)| r * v).sum();
                val * (c(-eta, 0.0) * tp).exp() * (c(0.0, s2) * tp).exp()
            },
            0.0,
            t_max,
            1e-9,
            "gamma middle FT",
        )
        .unwrap()
        .value;
        let expect = gamma_freq_c(&space, Z, Z, Z, Z, c(w1, 0.0), c(w2, eta), c(w3, -eta));
        assert!(
            (ft - expect).norm() <= 1e-4 * expect.norm(),
            "middle-leg damped FT {ft} vs shifted closed form {expect}"
        );
    }

    #[test]
    fn time_ordered_gamma_matches_brute_sum_and_is_symmetric() {
        let space = three_level(0.2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let legs = [
                (rng.gen_range(0..3), rng.gen_range(-2.0..6.0)),
                (rng.gen_range(0..3), rng.gen_range(-2.0..6.0)),
                (rng.gen_range(0..3), rng.gen_range(-2.0..6.0)),
            ];
            let t_i: f64 = rng.gen_range(-2.0..8.0);
            let a = to_gamma_time(&space, Z, legs, t_i);
            // Any permutation of the leg list leaves the image unchanged.
            let shuffled = [legs[2], legs[0], legs[1]];
            let b = to_gamma_time(&space, Z, shuffled, t_i);
            assert!((a - b).norm() <= 1e-13 * a.norm().max(1e-30));

            let flegs = [
                (legs[0].0, c(rng.gen_range(-2.0..2.0), 0.1)),
                (legs[1].0, c(rng.gen_range(-2.0..2.0), 0.1)),
                (legs[2].0, c(rng.gen_range(-2.0..2.0), 0.1)),
            ];
            let a = to_gamma_freq_c(&space, Z, flegs);
            let shuffled = [flegs[1], flegs[2], flegs[0]];
            let b = to_gamma_freq_c(&space, Z, shuffled);
            assert!((a - b).norm() <= 1e-13 * a.norm().max(1e-30));
        }
    }

    #[test]
    fn responses_scale_with_dipole_power() {
        // ᾱ ∝ μ², β̄ ∝ μ³, γ̄ ∝ μ⁴ under uniform dipole scaling.
        let model = MolecularModel::new(
            "scaling",
            vec![0.0, 1.0, 2.3],
            &[((0, 1), 0.1), ((1, 2), 0.15), ((0, 2), 0.12)],
            &[
                ((0, 1), [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
                ((1, 2), [c(0.0, 0.0), c(0.0, 0.0), c(0.8, 0.0)]),
                ((0, 2), [c(0.0, 0.0), c(0.0, 0.0), c(0.4, 0.0)]),
            ],
            [0.0; 3],
        )
        .unwrap();
        let s = 1.7;
        let base = build_superop_space(&model);
        let scaled = build_superop_space(&model.with_scaled_dipole(s));
        let a0 = alpha_freq(&base, Z, Z, 0.9);
        let a1 = alpha_freq(&scaled, Z, Z, 0.9);
        assert!((a1 - a0 * s.powi(2)).norm() <= 1e-12 * a1.norm());
        let b0 = beta_bar_time(&base, Z, Z, Z, 1.1, 0.6);
        let b1 = beta_bar_time(&scaled, Z, Z, Z, 1.1, 0.6);
        assert!((b1 - b0 * s.powi(3)).norm() <= 1e-12 * b1.norm());
        let g0 = gamma_freq(&base, Z, Z, Z, Z, 0.8, 0.9, 1.1);
        let g1 = gamma_freq(&scaled, Z, Z, Z, Z, 0.8, 0.9, 1.1);
        assert!((g1 - g0 * s.powi(4)).norm() <= 1e-12 * g1.norm());
    }
}
