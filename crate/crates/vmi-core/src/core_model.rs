//! Few-level molecular models and their Liouville-space superoperators.
//!
//! A molecule is a d-level system (d ≥ 2) with a diagonal Hamiltonian
//! (level energies ε_n), symmetric non-negative pairwise dephasing rates
//! γ_nm (γ_nn = 0: populations undamped), and a Hermitian transition-dipole
//! operator V with zero diagonal (no permanent dipoles), one d×d matrix per
//! Cartesian component.
//!
//! Density matrices are vectorized as x_p = ρ_{nm} with p = n·d + m. In this
//! basis the left/right dipole actions are
//!
//!   (V_L)_{(nm),(n'm')} = V_{nn'} δ_{mm'},   (V_R)_{(nm),(n'm')} = δ_{nn'} V_{m'm},
//!
//! and the commutator/anticommutator combinations V₋ = V_L − V_R and
//! V₊ = (V_L + V_R)/2. The free Liouvillian (Hamiltonian commutator minus
//! the dephasing ) is diagonal:
//!
//!   λ_{nm} = (ε_n − ε_m) − i γ_nm,
//!
//! so the retarded Green's function G(t) = −i θ(t) exp(−iLt) and the
//! resolvent G(ω) = (ω − L)⁻¹ have exact elementwise forms. The resolvent is
//! nevertheless also exposed through a dense solve, which is validated
//! against the elementwise form in the tests.

use crate::linalg;
use crate::{Complex64, Result, VmiError};
use ndarray::{Array1, Array2};

/// A validated few-level molecular model.
#[derive(Debug, Clone)]
pub struct MolecularModel {
    /// Identifier used in diagnostics and output metadata.
    pub tag: String,
    /// Level energies ε_n (angular frequency units, ħ = 1).
    pub energies: Vec<f64>,
    /// Symmetric dephasing-rate matrix γ_nm ≥ 0 with zero diagonal.
    pub dephasing: Array2<f64>,
    /// Transition dipole matrices, one per Cartesian component; each is
    /// Hermitian with zero diagonal.
    pub dipole: [Array2<Complex64>; 3],
    /// Position of the molecule (same length unit as c·time).
    pub position: [f64; 3],
}

impl MolecularModel {
    /// Build and validate a model from sparse dipole/dephasing entries.
    ///
    /// # Arguments
    /// * `tag` — identifier for diagnostics.
    /// * `energies` — level energies, one per level (d = len ≥ 2); the ground
    ///   level is the unique minimum.
    /// * `dephasing_pairs` — entries ((n, m), γ) with n ≠ m; mirrored
    ///   symmetrically. Listing an unordered pair twice is rejected.
    /// * `dipole_pairs` — entries ((n, m), [μx, μy, μz]) with n ≠ m; the
    ///   (m, n) element is set to the complex conjugate. Listing an unordered
    ///   pair twice is rejected.
    /// * `position` — molecule position.
    ///
    /// # Errors
    /// [`VmiError::InvalidModel`] listing every violation found.
    pub fn new(
        tag: impl Into<String>,
        energies: Vec<f64>,
        dephasing_pairs: &[((usize, usize), f64)],
        dipole_pairs: &[((usize, usize), [Complex64; 3])],
        position: [f64; 3],
    ) -> Result<Self> {
        let tag = tag.into();
        let violations = validate_parts(&tag, &energies, dephasing_pairs, dipole_pairs);
        if !violations.is_empty() {
            return Err(VmiError::InvalidModel(violations.join("; ")));
        }
        let d = energies.len();
        let mut dephasing = Array2::zeros((d, d));
        for &((n, m), rate) in dephasing_pairs {
            dephasing[[n, m]] = rate;
            dephasing[[m, n]] = rate;
        }
        let mut dipole = [
            Array2::from_elem((d, d), Complex64::new(0.0, 0.0)),
            Array2::from_elem((d, d), Complex64::new(0.0, 0.0)),
            Array2::from_elem((d, d), Complex64::new(0.0, 0.0)),
        ];
        for &((n, m), mu) in dipole_pairs {
            for (axis, component) in mu.iter().enumerate() {
                dipole[axis][[n, m]] = *component;
                dipole[axis][[m, n]] = component.conj();
            }
        }
        Ok(MolecularModel {
            tag,
            energies,
            dephasing,
            dipole,
            position,
        })
    }

    /// Number of levels d.
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Index of the unique lowest-energy level.
    pub fn ground_index(&self) -> usize {
        let mut idx = 0;
        for (n, &e) in self.energies.iter().enumerate() {
            if e < self.energies[idx] {
                idx = n;
            }
        }
        idx
    }

    /// Return a copy of the model with every dipole entry scaled by `s`.
    /// Used by linearity/property tests.
    pub fn with_scaled_dipole(&self, s: f64) -> MolecularModel {
        let mut out = self.clone();
        for axis in 0..3 {
            out.dipole[axis].mapv_inplace(|v| v * s);
        }
        out
    }

    /// Return a copy at a different position.
    pub fn at_position(&self, position: [f64; 3]) -> MolecularModel {
        let mut out = self.clone();
        out.position = position;
        out
    }
}

/// Validate the raw parts of a model, returning every violation found
/// (empty = valid). Used both by [`MolecularModel::new`] and by the
/// configuration layer, which needs the complete list.
pub fn validate_parts(
    tag: &str,
    energies: &[f64],
    dephasing_pairs: &[((usize, usize), f64)],
    dipole_pairs: &[((usize, usize), [Complex64; 3])],
) -> Vec<String> {
    let mut violations = Vec::new();
    let d = energies.len();
    if d < 2 {
        violations.push(format!("{tag}: at least two levels required, found {d}"));
        // Index checks below would be meaningless; still continue so other
        // entry-level mistakes are reported.
    }
    if energies.iter().any(|e| !e.is_finite()) {
        violations.push(format!("{tag}: level energies must be finite"));
    }
    if d >= 2 {
        let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let ground_count = energies.iter().filter(|&&e| e == min).count();
        if ground_count > 1 {
            violations.push(format!(
                "{tag}: ground level degenerate ({ground_count} levels at energy {min})"
            ));
        }
    }
    let mut seen_deph = std::collections::BTreeSet::new();
    for &((n, m), rate) in dephasing_pairs {
        if n >= d || m >= d {
            violations.push(format!(
                "{tag}: dephasing entry references level ({n},{m}) outside 0..{d}"
            ));
            continue;
        }
        if n == m {
            violations.push(format!(
                "{tag}: dephasing rate on diagonal level pair ({n},{n}) not allowed \
                 (populations are undamped)"
            ));
            continue;
        }
        let key = (n.min(m), n.max(m));
        if !seen_deph.insert(key) {
            violations.push(format!(
                "{tag}: duplicate dephasing entry for level pair ({},{})",
                key.0, key.1
            ));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            violations.push(format!(
                "{tag}: dephasing rate for level pair ({n},{m}) must be finite and >= 0, got {rate}"
            ));
        }
    }
    let mut seen_dip = std::collections::BTreeSet::new();
    for &((n, m), mu) in dipole_pairs {
        if n >= d || m >= d {
            violations.push(format!(
                "{tag}: dipole entry references level ({n},{m}) outside 0..{d}"
            ));
            continue;
        }
        if n == m {
            violations.push(format!(
                "{tag}: permanent dipole on level {n} not allowed (dipole diagonal must vanish)"
            ));
            continue;
        }
        let key = (n.min(m), n.max(m));
        if !seen_dip.insert(key) {
            violations.push(format!(
                "{tag}: duplicate dipole entry for level pair ({},{}) \
                 (specify each unordered pair once; the mirror element is conjugated automatically)",
                key.0, key.1
            ));
        }
        if mu.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            violations.push(format!(
                "{tag}: dipole vector for level pair ({n},{m}) must be finite"
            ));
        }
    }
    violations
}

/// Liouville-space representation of one molecule.
///
/// All superoperators are d²×d² complex matrices in the vectorization
/// p = n·d + m; the free Liouvillian is diagonal with eigenvalues
/// λ_{nm} = (ε_n − ε_m) − i γ_nm stored in `lambda`.
#[derive(Debug, Clone)]
pub struct SuperOpSpace {
    /// Hilbert dimension d.
    pub dim: usize,
    /// Liouville dimension d².
    pub ldim: usize,
    /// Diagonal Liouvillian eigenvalues λ_p.
    pub lambda: Vec<Complex64>,
    /// Dense Liouvillian (diagonal by construction for these models).
    pub liouvillian: Array2<Complex64>,
    /// Left dipole action per Cartesian component.
    pub v_left: [Array2<Complex64>; 3],
    /// Right dipole action per Cartesian component.
    pub v_right: [Array2<Complex64>; 3],
    /// Commutator action V₋ = V_L − V_R per component.
    pub v_minus: [Array2<Complex64>; 3],
    /// Symmetrized action V₊ = (V_L + V_R)/2 per component.
    pub v_plus: [Array2<Complex64>; 3],
    /// Vectorized ground-state density matrix |g⟩⟨g|.
    pub ground: Array1<Complex64>,
    /// Trace covector T_p = δ_{nm}.
    pub trace_row: Array1<Complex64>,
}

/// Build the Liouville-space superoperators for a validated model.
pub fn build_superop_space(model: &MolecularModel) -> SuperOpSpace {
    let d = model.dim();
    let ldim = d * d;
    let zero = Complex64::new(0.0, 0.0);

    let mut lambda = vec![zero; ldim];
    for n in 0..d {
        for m in 0..d {
            lambda[n * d + m] = Complex64::new(
                model.energies[n] - model.energies[m],
                -model.dephasing[[n, m]],
            );
        }
    }
    let liouvillian = Array2::from_diag(&Array1::from_vec(lambda.clone()));

    let build_left = |v: &Array2<Complex64>| {
        let mut out = Array2::from_elem((ldim, ldim), zero);
        for n in 0..d {
            for m in 0..d {
                for k in 0..d {
                    out[[n * d + m, k * d + m]] = v[[n, k]];
                }
            }
        }
        out
    };
    let build_right = |v: &Array2<Complex64>| {
        let mut out = Array2::from_elem((ldim, ldim), zero);
        for n in 0..d {
            for m in 0..d {
                for k in 0..d {
                    out[[n * d + m, n * d + k]] = v[[k, m]];
                }
            }
        }
        out
    };

    let v_left = [
        build_left(&model.dipole[0]),
        build_left(&model.dipole[1]),
        build_left(&model.dipole[2]),
    ];
    let v_right = [
        build_right(&model.dipole[0]),
        build_right(&model.dipole[1]),
        build_right(&model.dipole[2]),
    ];
    let v_minus = [
        &v_left[0] - &v_right[0],
        &v_left[1] - &v_right[1],
        &v_left[2] - &v_right[2],
    ];
    let v_plus = [
        (&v_left[0] + &v_right[0]) * Complex64::new(0.5, 0.0),
        (&v_left[1] + &v_right[1]) * Complex64::new(0.5, 0.0),
        (&v_left[2] + &v_right[2]) * Complex64::new(0.5, 0.0),
    ];

    let g = model.ground_index();
    let mut ground = Array1::from_elem(ldim, zero);
    ground[g * d + g] = Complex64::new(1.0, 0.0);

    let mut trace_row = Array1::from_elem(ldim, zero);
    for n in 0..d {
        trace_row[n * d + n] = Complex64::new(1.0, 0.0);
    }

    SuperOpSpace {
        dim: d,
        ldim,
        lambda,
        liouvillian,
        v_left,
        v_right,
        v_minus,
        v_plus,
        ground,
        trace_row,
    }
}

impl SuperOpSpace {
    /// Trace functional applied to a vectorized operator.
    pub fn trace_dot(&self, x: &Array1<Complex64>) -> Complex64 {
        self.trace_row
            .iter()
            .zip(x.iter())
            .map(|(t, v)| t * v)
            .sum()
    }

    /// Contract the Cartesian components of a superoperator family with a
    /// real polarization vector: Σ_ν e_ν O^ν.
    pub fn contract(ops: &[Array2<Complex64>; 3], e: [f64; 3]) -> Array2<Complex64> {
        let mut out = &ops[0] * Complex64::new(e[0], 0.0);
        out = out + &ops[1] * Complex64::new(e[1], 0.0);
        out + &ops[2] * Complex64::new(e[2], 0.0)
    }

    /// Apply the resolvent (ω − L)⁻¹ elementwise (diagonal Liouvillian).
    ///
    /// Components that are exactly zero stay zero without evaluating the
    /// division, so structurally empty channels never produce NaN even at a
    /// pole of an unused eigenvalue.
    pub fn apply_resolvent(&self, omega: Complex64, x: &Array1<Complex64>) -> Array1<Complex64> {
        let mut out = x.clone();
        for (p, v) in out.iter_mut().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                *v /= omega - self.lambda[p];
            }
        }
        out
    }

    /// Apply the retarded propagator G(t) = −iθ(t)e^{−iLt} elementwise.
    pub fn apply_propagator(&self, t: f64, x: &Array1<Complex64>) -> Array1<Complex64> {
        if t < 0.0 {
            return Array1::from_elem(self.ldim, Complex64::new(0.0, 0.0));
        }
        let mut out = x.clone();
        for (p, v) in out.iter_mut().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                *v *= Complex64::new(0.0, -1.0)
                    * (Complex64::new(0.0, -1.0) * self.lambda[p] * t).exp();
            }
        }
        out
    }
}

/// Dense resolvent G(ω) = (ω − L)⁻¹ by direct solve.
///
/// # Errors
/// [`VmiError::Numerical`] if ω coincides with an eigenvalue of L whose
/// damping vanishes (singular matrix), e.g. ω = 0 on a population eigenvalue.
pub fn resolvent(space: &SuperOpSpace, omega: f64) -> Result<Array2<Complex64>> {
    let mut m = -&space.liouvillian;
    for p in 0..space.ldim {
        m[[p, p]] += Complex64::new(omega, 0.0);
    }
    linalg::lu_inverse(&m).ok_or_else(|| {
        VmiError::numerical(
            "resolvent",
            format!("(ω − L) is singular at ω = {omega}: ω coincides with an undamped eigenvalue"),
        )
    })
}

/// Retarded propagator G(t) = −iθ(t)e^{−iLt} as a dense matrix.
/// Returns the zero matrix for t < 0 and −i·I at t = 0.
pub fn propagator(space: &SuperOpSpace, t: f64) -> Array2<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if t < 0.0 {
        return Array2::from_elem((space.ldim, space.ldim), zero);
    }
    let diag: Vec<Complex64> = space
        .lambda
        .iter()
        .map(|&l| Complex64::new(0.0, -1.0) * (Complex64::new(0.0, -1.0) * l * t).exp())
        .collect();
    Array2::from_diag(&Array1::from_vec(diag))
}
