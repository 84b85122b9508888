//! Heterodyne signal assembly.
//!
//! A scenario is a small ensemble of few-level molecules driven by `n`
//! classical Gaussian pulses and read out against a heterodyne detection
//! pulse. Two families of observables are produced:
//!
//! * the **additive baseline** — each molecule responds independently; the
//!   signal is linear in the number of molecules;
//! * **pair corrections** — the leading corrections in which one molecule's
//!   source field acts on another, carried by the transverse coupling tensor
//!   (static 𝒞 with retarded time arguments in the time domain, radiative 𝒟
//!   at the exchanged frequency in the frequency domain). These scale with
//!   the number of ordered molecule pairs, N(N−1).
//!
//! Shipped prefactors (ħ = 1, field convention E = Σ_ζ ε ∫dω/2π 𝓔^ζ(ω)
//! e^{iζ(k·r−ωt)}):
//!
//! | signal                 | time domain      | frequency domain |
//! |------------------------|------------------|------------------|
//! | baseline, order n      | 2·(−1)ⁿ·Im[…]    | 2·(−1)ⁿ/(2π)ⁿ·Im[…] |
//! | pair, one field        | −(2/π)·Im[…]     | −(1/π²)·Im[…]    |
//! | pair, two fields       | 4π·Im[…]         | (1/π)·Im[…]      |
//! | pair, three fields     | 4π·Im[…]         | 1/(2π²)·Im[…]    |
//!
//! Each time/frequency pair is Fourier-consistent: the frequency prefactor is
//! the time prefactor times (1/2π) per remaining drive-frequency integral.
//! The time domain uses the static coupling 𝒞(r) with the source evaluated at
//! the retarded time τ − r/c; the frequency domain uses the radiative tensor
//! 𝒟(r, ω/c). The two domains therefore agree up to corrections of order
//! κr = ωr/c, which is also what the cross-domain consistency checks probe.
//!
//! Quadrature architecture (time domain): innermost Gaussian × exponential
//! integrals are closed forms ([`crate::quad::gauss_exp_integral`]); middle
//! layers are one-time cumulative panel tables over pulse supports
//! ([`crate::quad::CumulativeTable`]); exactly one outer adaptive integral
//! remains (over detection time for the baseline, over the vacuum absorption
//! time for pair terms). Every additive term contains at least one factor
//! that is Gaussian-bounded in the outer variable, so finite windows padded
//! by a few pulse widths capture the integrand to round-off.
//!
//! Time-domain signals require strictly positive dephasing on every
//! coherence; undamped models are rejected up front.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::Array2;

use crate::core_model::{build_superop_space, MolecularModel, SuperOpSpace};
use crate::fields::Pulse;
use crate::geometry::{tensor_c, tensor_d, Tensor3x3};
use crate::quad::{adaptive_gk, gauss_exp_integral, CumulativeTable, TABLE_REL_TOL};
use crate::response::{
    linear_modes, quadratic_modes, to_beta_modes, to_gamma_modes, LinearModes, QuadraticModes,
    ToBeta,
};
use crate::{Complex64, Result, VmiError};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// Width, in units of 1/σ (frequency) or σ (time), at which Gaussian pulse
/// factors are treated as zero: e^{−12²/2} ≈ 5·10⁻³² per factor.
const WINDOW_SIGMAS: f64 = 12.0;

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Evaluation domain of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Nested time integrals with retarded static coupling.
    Time,
    /// Nested frequency integrals with the radiative coupling tensor.
    Freq,
}

/// A driven ensemble: molecules, drive pulses (pulse j is the j-th entry),
/// and the heterodyne detection pulse.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// The molecules, each carrying its own position.
    pub molecules: Vec<MolecularModel>,
    /// Drive pulses; an order-n signal uses exactly n of them.
    pub drive: Vec<Pulse>,
    /// Heterodyne detection pulse.
    pub detection: Pulse,
    /// Speed of light c > 0 shared by all pulses and couplings.
    pub speed_of_light: f64,
    /// Relative tolerance for the outer adaptive quadratures.
    pub rel_tol: f64,
    /// Diagnostic rotating-wave truncation: drop ζ branches whose summed
    /// carrier cannot reach the detection spectrum. Off by default; the full
    /// branch sum is the reference behaviour.
    pub rwa: bool,
}

impl Scenario {
    /// Build a scenario with the default quadrature tolerance.
    ///
    /// # Errors
    /// [`VmiError::InvalidModel`] if the scenario is structurally invalid
    /// (no molecules, no drive pulses, non-positive c, or a pulse whose wave
    /// vector is inconsistent with c).
    pub fn new(
        molecules: Vec<MolecularModel>,
        drive: Vec<Pulse>,
        detection: Pulse,
        speed_of_light: f64,
    ) -> Result<Scenario> {
        let sc = Scenario {
            molecules,
            drive,
            detection,
            speed_of_light,
            rel_tol: crate::quad::QUAD_REL_DEFAULT,
            rwa: false,
        };
        sc.validate(None)?;
        Ok(sc)
    }

    /// Number of drive pulses.
    pub fn order(&self) -> usize {
        self.drive.len()
    }

    /// ζ branch assignments for the first `n` drive pulses, in lexicographic
    /// order with +1 before −1. Under the rotating-wave diagnostic, branches
    /// whose summed carrier lies outside the combined spectral windows of the
    /// pulses and the detection are dropped.
    pub fn branches(&self, n: usize) -> Vec<Vec<i8>> {
        let all = zeta_branches(n);
        if !self.rwa {
            return all;
        }
        let width = WINDOW_SIGMAS
            * (1.0 / self.detection.sigma
                + self
                    .drive
                    .iter()
                    .take(n)
                    .map(|p| 1.0 / p.sigma)
                    .sum::<f64>());
        all.into_iter()
            .filter(|br| {
                let total: f64 = br
                    .iter()
                    .zip(&self.drive)
                    .map(|(&z, p)| f64::from(z) * p.carrier)
                    .sum();
                (total - self.detection.carrier).abs() <= width
            })
            .collect()
    }

    /// Check structural consistency; with `Some(n)` additionally require
    /// exactly n drive pulses.
    ///
    /// # Errors
    /// [`VmiError::InvalidModel`] describing the first failed requirement.
    pub fn validate(&self, require_order: Option<usize>) -> Result<()> {
        if self.molecules.is_empty() {
            return Err(VmiError::InvalidModel(
                "scenario needs at least one molecule".into(),
            ));
        }
        if self.drive.is_empty() || self.drive.len() > 3 {
            return Err(VmiError::InvalidModel(format!(
                "scenario needs between 1 and 3 drive pulses, got {}",
                self.drive.len()
            )));
        }
        if !(self.speed_of_light > 0.0) || !self.speed_of_light.is_finite() {
            return Err(VmiError::InvalidModel(format!(
                "speed of light must be positive, got {}",
                self.speed_of_light
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 0.1) {
            return Err(VmiError::InvalidModel(format!(
                "quadrature tolerance must lie in (0, 0.1), got {}",
                self.rel_tol
            )));
        }
        for (idx, p) in self
            .drive
            .iter()
            .chain(std::iter::once(&self.detection))
            .enumerate()
        {
            let k_norm = dot(p.wave_vector, p.wave_vector).sqrt();
            let expected = p.carrier / self.speed_of_light;
            if (k_norm - expected).abs() > 1e-9 * expected.max(1e-300) {
                let label = if idx < self.drive.len() {
                    format!("drive pulse {}", idx + 1)
                } else {
                    "detection pulse".to_string()
                };
                return Err(VmiError::InvalidModel(format!(
                    "{label} has |k| = {k_norm} but carrier/c = {expected}; \
                     rebuild the pulse with the scenario speed of light"
                )));
            }
        }
        if let Some(n) = require_order {
            if self.drive.len() != n {
                return Err(VmiError::InvalidModel(format!(
                    "order-{n} signal requires exactly {n} drive pulses, got {}",
                    self.drive.len()
                )));
            }
        }
        Ok(())
    }
}

/// Per-term breakdown of a pair correction.
#[derive(Debug, Clone)]
pub struct VmiBreakdown {
    /// Named additive terms; their order is fixed per signal order.
    pub terms: Vec<(String, f64)>,
}

impl VmiBreakdown {
    /// Sum of all terms.
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|(_, v)| v).sum()
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// e^{iζ k·r}.
fn branch_phase(k: [f64; 3], zeta: i8, r: [f64; 3]) -> Complex64 {
    Complex64::new(0.0, f64::from(zeta) * dot(k, r)).exp()
}

/// e^{−i k_s·r} (detection conjugate).
fn detection_phase(ks: [f64; 3], r: [f64; 3]) -> Complex64 {
    Complex64::new(0.0, -dot(ks, r)).exp()
}

/// ∫ 𝓔^ζ(τ) e^{iλτ} dτ over `[lo, hi]` (`None` = unbounded), in closed form.
fn pulse_exp_integral(
    p: &Pulse,
    zeta: i8,
    lambda: Complex64,
    lo: Option<f64>,
    hi: Option<f64>,
) -> Complex64 {
    let amp = if zeta == 1 {
        p.amplitude
    } else {
        p.amplitude.conj()
    };
    let zc = f64::from(zeta) * p.carrier;
    let mu = Complex64::new(0.0, 1.0) * (lambda - Complex64::new(zc, 0.0));
    let carrier_phase = Complex64::new(0.0, zc * p.center_time).exp();
    amp * carrier_phase * gauss_exp_integral(p.center_time, p.sigma, mu, lo, hi)
}

/// All ζ branch assignments for n pulses in lexicographic order with +1
/// before −1: (+,+), (+,−), (−,+), (−,−) for n = 2.
fn zeta_branches(n: usize) -> Vec<Vec<i8>> {
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0..(1_u32 << n) {
        out.push(
            (0..n)
                .map(|j| {
                    if mask & (1 << (n - 1 - j)) == 0 {
                        1_i8
                    } else {
                        -1_i8
                    }
                })
                .collect(),
        );
    }
    out
}

/// Integration window for a drive frequency variable.
fn freq_window(p: &Pulse) -> (f64, f64) {
    let w = WINDOW_SIGMAS / p.sigma;
    (p.carrier - w, p.carrier + w)
}

/// Geometry of one ordered molecule pair (a = detected, b = partner).
struct PairGeometry {
    a: usize,
    b: usize,
    /// r_a − r_b (the coupling tensor is even in its argument).
    r_vec: [f64; 3],
    /// Retardation r/c.
    retard: f64,
    /// Static coupling 𝒞(r).
    coupling: Tensor3x3,
}

/// All ordered pairs (a ≠ b), validated to have positive separation, sorted
/// by molecule tags (then indices) so accumulation order is reproducible.
fn ordered_pairs(sc: &Scenario) -> Result<Vec<PairGeometry>> {
    let n = sc.molecules.len();
    if n < 2 {
        return Err(VmiError::InvalidModel(
            "pair corrections need at least two molecules".into(),
        ));
    }
    let mut out = Vec::with_capacity(n * (n - 1));
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let ra = sc.molecules[a].position;
            let rb = sc.molecules[b].position;
            let r_vec = [ra[0] - rb[0], ra[1] - rb[1], ra[2] - rb[2]];
            let dist = dot(r_vec, r_vec).sqrt();
            if !(dist > 0.0) {
                return Err(VmiError::InvalidModel(format!(
                    "molecules {} and {} coincide; pair couplings are singular \
                     at zero separation",
                    sc.molecules[a].tag, sc.molecules[b].tag
                )));
            }
            out.push(PairGeometry {
                a,
                b,
                r_vec,
                retard: dist / sc.speed_of_light,
                coupling: tensor_c(r_vec),
            });
        }
    }
    out.sort_by(|p, q| {
        let kp = (&sc.molecules[p.a].tag, &sc.molecules[p.b].tag, p.a, p.b);
        let kq = (&sc.molecules[q.a].tag, &sc.molecules[q.b].tag, q.a, q.b);
        kp.cmp(&kq)
    });
    Ok(out)
}

/// Reject models whose coherences are not all damped (time-domain signals
/// would have non-decaying integrands).
fn require_damped(sc: &Scenario) -> Result<()> {
    for m in &sc.molecules {
        let d = m.dim();
        for n in 0..d {
            for mm in 0..d {
                if n != mm && !(m.dephasing[(n, mm)] > 0.0) {
                    return Err(VmiError::InvalidModel(format!(
                        "time-domain signals require positive dephasing on every \
                         coherence; molecule {} has γ = 0 between levels {n} and {mm}",
                        m.tag
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Outer time window for vacuum-exchange integrals. Every additive term is
/// Gaussian-bounded by either the detection window or a (possibly retarded)
/// pulse window, so the union padded by a couple of widths suffices.
fn vacuum_window(sc: &Scenario, max_retard: f64) -> (f64, f64) {
    let (mut lo, mut hi) = sc.detection.support(WINDOW_SIGMAS);
    for p in &sc.drive {
        let (plo, phi) = p.support(WINDOW_SIGMAS);
        lo = lo.min(plo);
        hi = hi.max(phi + max_retard);
    }
    let pad = 2.0
        * sc.drive
            .iter()
            .chain(std::iter::once(&sc.detection))
            .map(|p| p.sigma)
            .fold(0.0_f64, f64::max);
    (lo - pad, hi + pad)
}

fn plus_op(space: &SuperOpSpace, e: [f64; 3]) -> Array2<Complex64> {
    SuperOpSpace::contract(&space.v_plus, e)
}

fn minus_op(space: &SuperOpSpace, e: [f64; 3]) -> Array2<Complex64> {
    SuperOpSpace::contract(&space.v_minus, e)
}

fn spaces_of(sc: &Scenario) -> Vec<SuperOpSpace> {
    sc.molecules.iter().map(build_superop_space).collect()
}

/// Trailing detection integral ∫_τ^∞ 𝓔_s^−(τ_s) e^{−iλτ_s} dτ_s.
fn detection_tail(det: &Pulse, lambda: Complex64, tau: f64) -> Complex64 {
    pulse_exp_integral(det, -1, -lambda, Some(tau), None)
}

/// Bit-pattern key for a complex number (exact-value table keying).
fn key_bits(z: Complex64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

// ---------------------------------------------------------------------------
// Time-domain chain tables
// ---------------------------------------------------------------------------

/// Key of a mid-layer table whose integrand is
/// 𝓔_mid^{ζm}(τ)·e^{i λ_mid τ}·∫_{−∞}^{τ} 𝓔_early^{ζe}(τ′) e^{i λ_early τ′} dτ′.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PairChainKey {
    mid_pulse: usize,
    zeta_mid: i8,
    early_pulse: usize,
    zeta_early: i8,
    lambda_mid: (u64, u64),
    lambda_early: (u64, u64),
}

/// Key of a mid-layer table whose integrand is
/// 𝓔^{ζ}(τ)·e^{i(λo−λi)τ}·∫_τ^∞ 𝓔_s^−(τ_s) e^{−iλoτ_s} dτ_s.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct DetChainKey {
    pulse: usize,
    zeta: i8,
    lambda_out: (u64, u64),
    lambda_in: (u64, u64),
}

type PairChainTables<'a> = HashMap<PairChainKey, CumulativeTable<'a>>;
type DetChainTables<'a> = HashMap<DetChainKey, CumulativeTable<'a>>;

fn build_pair_chain_table<'a>(sc: &'a Scenario, key: PairChainKey) -> Result<CumulativeTable<'a>> {
    let mid = &sc.drive[key.mid_pulse];
    let early = &sc.drive[key.early_pulse];
    let lm = Complex64::new(
        f64::from_bits(key.lambda_mid.0),
        f64::from_bits(key.lambda_mid.1),
    );
    let le = Complex64::new(
        f64::from_bits(key.lambda_early.0),
        f64::from_bits(key.lambda_early.1),
    );
    let (zm, ze) = (key.zeta_mid, key.zeta_early);
    let (lo, hi) = mid.support(WINDOW_SIGMAS);
    CumulativeTable::build(
        move |tau: f64| {
            mid.envelope_time(zm, tau)
                * (Complex64::new(0.0, 1.0) * lm * tau).exp()
                * pulse_exp_integral(early, ze, le, None, Some(tau))
        },
        lo,
        hi,
        TABLE_REL_TOL,
        "pair chain table",
    )
}

fn build_det_chain_table<'a>(sc: &'a Scenario, key: DetChainKey) -> Result<CumulativeTable<'a>> {
    let p = &sc.drive[key.pulse];
    let det = &sc.detection;
    let lo_l = Complex64::new(
        f64::from_bits(key.lambda_out.0),
        f64::from_bits(key.lambda_out.1),
    );
    let li_l = Complex64::new(
        f64::from_bits(key.lambda_in.0),
        f64::from_bits(key.lambda_in.1),
    );
    let z = key.zeta;
    let (lo, hi) = p.support(WINDOW_SIGMAS);
    CumulativeTable::build(
        move |tau: f64| {
            p.envelope_time(z, tau)
                * (Complex64::new(0.0, 1.0) * (lo_l - li_l) * tau).exp()
                * detection_tail(det, lo_l, tau)
        },
        lo,
        hi,
        TABLE_REL_TOL,
        "detection chain table",
    )
}

/// Insert (once) every pair-chain table needed by a quadratic modal family
/// whose inner leg couples pulse `early` below pulse `mid`.
fn ensure_pair_chain_tables<'a>(
    sc: &'a Scenario,
    tables: &mut PairChainTables<'a>,
    qm: &QuadraticModes,
    mid_pulse: usize,
    zeta_mid: i8,
    early_pulse: usize,
    zeta_early: i8,
) -> Result<()> {
    for &(_, lo, li) in &qm.terms {
        let key = PairChainKey {
            mid_pulse,
            zeta_mid,
            early_pulse,
            zeta_early,
            lambda_mid: key_bits(lo - li),
            lambda_early: key_bits(li),
        };
        if let Entry::Vacant(slot) = tables.entry(key) {
            slot.insert(build_pair_chain_table(sc, key)?);
        }
    }
    Ok(())
}

fn ensure_det_chain_tables<'a>(
    sc: &'a Scenario,
    tables: &mut DetChainTables<'a>,
    qm: &QuadraticModes,
    pulse: usize,
    zeta: i8,
) -> Result<()> {
    for &(_, lo, li) in &qm.terms {
        let key = DetChainKey {
            pulse,
            zeta,
            lambda_out: key_bits(lo),
            lambda_in: key_bits(li),
        };
        if let Entry::Vacant(slot) = tables.entry(key) {
            slot.insert(build_det_chain_table(sc, key)?);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Modal building blocks evaluated at the outer (vacuum) time
// ---------------------------------------------------------------------------

/// a-side linear response ᾱ_a^{det,ν}(τ_s−τ_v) with the detection integral
/// folded in: (−i) Σ_p c_p e^{iλ_p τ_v} ∫_{τ_v}^∞ 𝓔_s^− e^{−iλ_p τ_s} dτ_s.
fn a_alpha_at(det: &Pulse, modes: &LinearModes, tau_v: f64) -> Complex64 {
    let mut sum = C0;
    for &(c, l) in &modes.terms {
        sum += c * (Complex64::new(0.0, 1.0) * l * tau_v).exp() * detection_tail(det, l, tau_v);
    }
    MINUS_I * sum
}

/// b-side linear response ᾱ_b^{ν′,ε}(τ′_v−τ₁) with the pulse integral folded
/// in: (−i) Σ_q d_q e^{−iλ_q τ′_v} ∫_{−∞}^{τ′_v} 𝓔^ζ e^{iλ_q τ₁} dτ₁.
fn b_alpha_at(pulse: &Pulse, zeta: i8, modes: &LinearModes, tau_ret: f64) -> Complex64 {
    let mut sum = C0;
    for &(d, l) in &modes.terms {
        sum += d
            * (MINUS_I * l * tau_ret).exp()
            * pulse_exp_integral(pulse, zeta, l, None, Some(tau_ret));
    }
    MINUS_I * sum
}

/// a-side time-ordered quadratic image with detection and one drive pulse,
/// vacuum leg at τ_v: both chronological branches.
///
/// `field_mid` is the chain with the drive pulse adjacent to detection
/// (vacuum earliest — needs the detection chain table); `vac_mid` is the
/// chain with the vacuum leg adjacent to detection (fully closed form).
#[allow(clippy::too_many_arguments)]
fn a_tob_at(
    sc: &Scenario,
    det_tables: &DetChainTables<'_>,
    field_mid: &QuadraticModes,
    vac_mid: &QuadraticModes,
    pulse_idx: usize,
    zeta: i8,
    tau_v: f64,
) -> Complex64 {
    let det = &sc.detection;
    let pulse = &sc.drive[pulse_idx];
    let mut sum = C0;
    // Branch with the drive pulse between vacuum and detection:
    // β̄(τ_s−τ₂, τ₂−τ_v) → e^{iλ_i τ_v} × tail of the detection chain table.
    for &(c, lo, li) in &field_mid.terms {
        let key = DetChainKey {
            pulse: pulse_idx,
            zeta,
            lambda_out: key_bits(lo),
            lambda_in: key_bits(li),
        };
        let table = &det_tables[&key];
        sum += c * (Complex64::new(0.0, 1.0) * li * tau_v).exp() * table.integral_from(tau_v);
    }
    // Branch with the vacuum leg adjacent to detection:
    // β̄(τ_s−τ_v, τ_v−τ₂) → closed detection tail × closed pulse integral.
    for &(c, lo, li) in &vac_mid.terms {
        sum += c
            * (Complex64::new(0.0, 1.0) * (lo - li) * tau_v).exp()
            * detection_tail(det, lo, tau_v)
            * pulse_exp_integral(pulse, zeta, li, None, Some(tau_v));
    }
    -sum
}

/// b-side time-ordered quadratic image with emission leg at the retarded
/// time: Σ over both pulse orderings of the pair chain tables.
#[allow(clippy::too_many_arguments)]
fn b_tob_at(
    pair_tables: &PairChainTables<'_>,
    orderings: &[(usize, i8, usize, i8, &QuadraticModes)],
    tau_ret: f64,
) -> Complex64 {
    let mut sum = C0;
    for &(late, z_late, early, z_early, qm) in orderings {
        for &(d, lo, li) in &qm.terms {
            let key = PairChainKey {
                mid_pulse: late,
                zeta_mid: z_late,
                early_pulse: early,
                zeta_early: z_early,
                lambda_mid: key_bits(lo - li),
                lambda_early: key_bits(li),
            };
            let table = &pair_tables[&key];
            sum += d * (MINUS_I * lo * tau_ret).exp() * table.integral_to(tau_ret);
        }
    }
    -sum
}

// ---------------------------------------------------------------------------
// Baseline signals
// ---------------------------------------------------------------------------

/// Additive (single-molecule) heterodyne signal of the given order.
///
/// # Errors
/// [`VmiError::InvalidModel`] for structural problems (drive count, undamped
/// time-domain models); [`VmiError::Unsupported`] for orders outside 1–3;
/// [`VmiError::Numerical`] if a quadrature fails.
pub fn baseline_signal(sc: &Scenario, order: usize, domain: Domain) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(VmiError::Unsupported(format!(
            "baseline signals are implemented for orders 1-3, got {order}"
        )));
    }
    sc.validate(Some(order))?;
    if domain == Domain::Time {
        require_damped(sc)?;
    }
    let spaces = spaces_of(sc);
    match (order, domain) {
        (1, Domain::Freq) => baseline_freq_1(sc, &spaces),
        (2, Domain::Freq) => baseline_freq_2(sc, &spaces),
        (3, Domain::Freq) => baseline_freq_3(sc, &spaces),
        (1, Domain::Time) => baseline_time_1(sc, &spaces),
        (2, Domain::Time) => baseline_time_2(sc, &spaces),
        (3, Domain::Time) => baseline_time_3(sc, &spaces),
        _ => unreachable!(),
    }
}

fn baseline_freq_1(sc: &Scenario, spaces: &[SuperOpSpace]) -> Result<f64> {
    let det = &sc.detection;
    let p1 = &sc.drive[0];
    let (w_lo, w_hi) = freq_window(p1);
    let mut total = C0;
    for (m, space) in sc.molecules.iter().zip(spaces) {
        let modes = linear_modes(
            space,
            &plus_op(space, det.polarization),
            &minus_op(space, p1.polarization),
        );
        if modes.terms.is_empty() {
            continue;
        }
        for branch in sc.branches(1) {
            let z = branch[0];
            let phase = branch_phase(p1.wave_vector, z, m.position)
                * detection_phase(det.wave_vector, m.position);
            let f = |w: f64| {
                let x = f64::from(z) * w;
                det.envelope_freq(-1, x)
                    * p1.envelope_freq(z, w)
                    * modes.freq(Complex64::new(x, 0.0))
            };
            let q = adaptive_gk(
                &f,
                w_lo,
                w_hi,
                sc.rel_tol,
                "baseline order-1 frequency integral",
            )?;
            total += phase * q.value;
        }
    }
    Ok(-(1.0 / PI) * total.im)
}

fn baseline_freq_2(sc: &Scenario, spaces: &[SuperOpSpace]) -> Result<f64> {
    let det = &sc.detection;
    let (p1, p2) = (&sc.drive[0], &sc.drive[1]);
    let (w1_lo, w1_hi) = freq_window(p1);
    let (w2_lo, w2_hi) = freq_window(p2);
    let inner_tol = sc.rel_tol * 0.1;
    let mut total = C0;
    for (m, space) in sc.molecules.iter().zip(spaces) {
        let det_op = plus_op(space, det.polarization);
        let tob = to_beta_modes(
            space,
            &det_op,
            &minus_op(space, p2.polarization),
            &minus_op(space, p1.polarization),
        );
        if tob.jk.terms.is_empty() && tob.kj.terms.is_empty() {
            continue;
        }
        for branch in sc.branches(2) {
            let (z1, z2) = (branch[0], branch[1]);
            let phase = branch_phase(p1.wave_vector, z1, m.position)
                * branch_phase(p2.wave_vector, z2, m.position)
                * detection_phase(det.wave_vector, m.position);
            let outer = |w2: f64| {
                let f2 = f64::from(z2) * w2;
                let env2 = p2.envelope_freq(z2, w2);
                let inner = |w1: f64| {
                    let f1 = f64::from(z1) * w1;
                    det.envelope_freq(-1, f1 + f2)
                        * env2
                        * p1.envelope_freq(z1, w1)
                        * tob.freq(Complex64::new(f2, 0.0), Complex64::new(f1, 0.0))
                };
                match adaptive_gk(&inner, w1_lo, w1_hi, inner_tol, "baseline order-2 inner") {
                    Ok(q) => q.value,
                    Err(_) => Complex64::new(f64::NAN, 0.0),
                }
            };
            let q = adaptive_gk(
                &outer,
                w2_lo,
                w2_hi,
                sc.rel_tol,
                "baseline order-2 frequency integral",
            )?;
            total += phase * q.value;
        }
    }
    Ok(total.im / (2.0 * PI * PI))
}

fn baseline_freq_3(sc: &Scenario, spaces: &[SuperOpSpace]) -> Result<f64> {
    let det = &sc.detection;
    let (p1, p2, p3) = (&sc.drive[0], &sc.drive[1], &sc.drive[2]);
    let (w1_lo, w1_hi) = freq_window(p1);
    let (w2_lo, w2_hi) = freq_window(p2);
    let (w3_lo, w3_hi) = freq_window(p3);
    let mid_tol = sc.rel_tol * 0.1;
    let inner_tol = sc.rel_tol * 0.01;
    let mut total = C0;
    for (m, space) in sc.molecules.iter().zip(spaces) {
        let det_op = plus_op(space, det.polarization);
        let ops = [
            minus_op(space, p1.polarization),
            minus_op(space, p2.polarization),
            minus_op(space, p3.polarization),
        ];
        let tog = to_gamma_modes(space, &det_op, [&ops[0], &ops[1], &ops[2]]);
        for branch in sc.branches(3) {
            let (z1, z2, z3) = (branch[0], branch[1], branch[2]);
            let phase = branch_phase(p1.wave_vector, z1, m.position)
                * branch_phase(p2.wave_vector, z2, m.position)
                * branch_phase(p3.wave_vector, z3, m.position)
                * detection_phase(det.wave_vector, m.position);
            let outer = |w3: f64| {
                let f3 = f64::from(z3) * w3;
                let env3 = p3.envelope_freq(z3, w3);
                let mid = |w2: f64| {
                    let f2 = f64::from(z2) * w2;
                    let env23 = env3 * p2.envelope_freq(z2, w2);
                    let inner = |w1: f64| {
                        let f1 = f64::from(z1) * w1;
                        det.envelope_freq(-1, f1 + f2 + f3)
                            * env23
                            * p1.envelope_freq(z1, w1)
                            * tog.freq([
                                Complex64::new(f1, 0.0),
                                Complex64::new(f2, 0.0),
                                Complex64::new(f3, 0.0),
                            ])
                    };
                    match adaptive_gk(&inner, w1_lo, w1_hi, inner_tol, "baseline order-3 inner") {
                        Ok(q) => q.value,
                        Err(_) => Complex64::new(f64::NAN, 0.0),
                    }
                };
                match adaptive_gk(&mid, w2_lo, w2_hi, mid_tol, "baseline order-3 middle") {
                    Ok(q) => q.value,
                    Err(_) => Complex64::new(f64::NAN, 0.0),
                }
            };
            let q = adaptive_gk(
                &outer,
                w3_lo,
                w3_hi,
                sc.rel_tol,
                "baseline order-3 frequency integral",
            )?;
            total += phase * q.value;
        }
    }
    Ok(-total.im / (4.0 * PI * PI * PI))
}

fn baseline_time_1(sc: &Scenario, spaces: &[SuperOpSpace]) -> Result<f64> {
    let det = &sc.detection;
    let p1 = &sc.drive[0];
    let (t_lo, t_hi) = det.support(WINDOW_SIGMAS);
    let mut total = C0;
    for (m, space) in sc.molecules.iter().zip(spaces) {
        let modes = linear_modes(
            space,
            &plus_op(space, det.polarization),
            &minus_op(space, p1.polarization),
        );
        if modes.terms.is_empty() {
            continue;
        }
        for branch in sc.branches(1) {
            let z = branch[0];
            let phase = branch_phase(p1.wave_vector, z, m.position)
                * detection_phase(det.wave_vector, m.position);
            let f = |ts: f64| {
                let mut sum = C0;
                for &(c, l) in &modes.terms {
                    sum +=
                        c * (MINUS_I * l * ts).exp() * pulse_exp_integral(p1, z, l, None, Some(ts));
                }
                det.envelope_time(-1, ts) * MINUS_I * sum
            };
            let q = adaptive_gk(&f, t_lo, t_hi, sc.rel_tol, "baseline order-1 time integral")?;
            total += phase * q.value;
        }
    }
    Ok(-2.0 * total.im)
}

fn baseline_time_2(sc: &Scenario, spaces: &[SuperOpSpace]) -> Result<f64> {
    let det = &sc.detection;
    let (t_lo, t_hi) = det.support(WINDOW_SIGMAS);
    let mut total = C0;
    for (m, space) in sc.molecules.iter().zip(spaces) {
        let det_op = plus_op(space, det.polarization);
        let pulse_ops: Vec<Array2<Complex64>> = sc
            .drive
            .iter()
            .map(|p| minus_op(space, p.polarization))
            .collect();
        // Orderings: (late, early) ∈ {(1,0), (0,1)} by drive index.
        let orderings = [(1_usize, 0_usize), (0_usize, 1_usize)];
        let qms: Vec<QuadraticModes> = orderings
            .iter()
            .map(|&(late, early)| {
                quadratic_modes(space, &det_op, &pulse_ops[late], &pulse_ops[early])
            })
            .collect();
        let mut tables: PairChainTables<'_> = HashMap::new();
        for (ord_idx, &(late, early)) in orderings.iter().enumerate() {
            for &zl in &[1_i8, -1_i8] {
                for &ze in &[1_i8, -1_i8] {
                    ensure_pair_chain_tables(sc, &mut tables, &qms[ord_idx], late, zl, early, ze)?;
                }
            }
        }
        for branch in sc.branches(2) {
            let (z1, z2) = (branch[0], branch[1]);
            let zeta_of = [z1, z2];
            let phase = branch_phase(sc.drive[0].wave_vector, z1, m.position)
                * branch_phase(sc.drive[1].wave_vector, z2, m.position)
                * detection_phase(det.wave_vector, m.position);
            let f = |ts: f64| {
                let mut sum = C0;
                for (ord_idx, &(late, early)) in orderings.iter().enumerate() {
                    let (zl, ze) = (zeta_of[late], zeta_of[early]);
                    for &(c, lo, li) in &qms[ord_idx].terms {
                        let key = PairChainKey {
                            mid_pulse: late,
                            zeta_mid: zl,
                            early_pulse: early,
                            zeta_early: ze,
                            lambda_mid: key_bits(lo - li),
                            lambda_early: key_bits(li),
                        };
                        sum += c * (MINUS_I * lo * ts).exp() * tables[&key].integral_to(ts);
                    }
                }
                det.envelope_time(-1, ts) * (-sum)
            };
            let q = adaptive_gk(&f, t_lo, t_hi, sc.rel_tol, "baseline order-2 time integral")?;
            total += phase * q.value;
        }
    }
    Ok(2.0 * total.im)
}

/// Key of a top-layer (order-3) table: latest pulse envelope × exponential ×
/// a pair-chain table query.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct TripleChainKey {
    late_pulse: usize,
    zeta_late: i8,
    lambda_top: (u64, u64),
    inner: PairChainKey,
}

fn baseline_time_3(sc: &Scenario, spaces: &[SuperOpSpace]) -> Result<f64> {
    let det = &sc.detection;
    let (t_lo, t_hi) = det.support(WINDOW_SIGMAS);
    let orderings: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut total = C0;
    for (m, space) in sc.molecules.iter().zip(spaces) {
        let det_op = plus_op(space, det.polarization);
        let pulse_ops: Vec<Array2<Complex64>> = sc
            .drive
            .iter()
            .map(|p| minus_op(space, p.polarization))
            .collect();
        // ordering = [latest, middle, earliest] by drive index.
        let cms: Vec<crate::response::CubicModes> = orderings
            .iter()
            .map(|ord| {
                crate::response::cubic_modes(
                    space,
                    &det_op,
                    &pulse_ops[ord[0]],
                    &pulse_ops[ord[1]],
                    &pulse_ops[ord[2]],
                )
            })
            .collect();

        // Level-2 tables (middle × earliest), then level-3 tables on top.
        let mut pair_tables: PairChainTables<'_> = HashMap::new();
        for (ord_idx, ord) in orderings.iter().enumerate() {
            for &zm in &[1_i8, -1_i8] {
                for &ze in &[1_i8, -1_i8] {
                    for &(_, _l1, l2, l3) in &cms[ord_idx].terms {
                        let key = PairChainKey {
                            mid_pulse: ord[1],
                            zeta_mid: zm,
                            early_pulse: ord[2],
                            zeta_early: ze,
                            lambda_mid: key_bits(l2 - l3),
                            lambda_early: key_bits(l3),
                        };
                        if let Entry::Vacant(slot) = pair_tables.entry(key) {
                            slot.insert(build_pair_chain_table(sc, key)?);
                        }
                    }
                }
            }
        }
        let mut triple_tables: HashMap<TripleChainKey, CumulativeTable<'_>> = HashMap::new();
        for (ord_idx, ord) in orderings.iter().enumerate() {
            for branch in zeta_branches(3) {
                let (zl, zm, ze) = (branch[ord[0]], branch[ord[1]], branch[ord[2]]);
                for &(_, l1, l2, l3) in &cms[ord_idx].terms {
                    let inner = PairChainKey {
                        mid_pulse: ord[1],
                        zeta_mid: zm,
                        early_pulse: ord[2],
                        zeta_early: ze,
                        lambda_mid: key_bits(l2 - l3),
                        lambda_early: key_bits(l3),
                    };
                    let key = TripleChainKey {
                        late_pulse: ord[0],
                        zeta_late: zl,
                        lambda_top: key_bits(l1 - l2),
                        inner,
                    };
                    if let Entry::Vacant(slot) = triple_tables.entry(key) {
                        let late = &sc.drive[ord[0]];
                        let lt = l1 - l2;
                        let inner_table = &pair_tables[&inner];
                        let (lo_w, hi_w) = late.support(WINDOW_SIGMAS);
                        let t = CumulativeTable::build(
                            move |tau: f64| {
                                late.envelope_time(zl, tau)
                                    * (Complex64::new(0.0, 1.0) * lt * tau).exp()
                                    * inner_table.integral_to(tau)
                            },
                            lo_w,
                            hi_w,
                            TABLE_REL_TOL,
                            "triple chain table",
                        )?;
                        slot.insert(t);
                    }
                }
            }
        }

        for branch in sc.branches(3) {
            let phase = branch_phase(sc.drive[0].wave_vector, branch[0], m.position)
                * branch_phase(sc.drive[1].wave_vector, branch[1], m.position)
                * branch_phase(sc.drive[2].wave_vector, branch[2], m.position)
                * detection_phase(det.wave_vector, m.position);
            let f = |ts: f64| {
                let mut sum = C0;
                for (ord_idx, ord) in orderings.iter().enumerate() {
                    let (zl, zm, ze) = (branch[ord[0]], branch[ord[1]], branch[ord[2]]);
                    for &(c, l1, l2, l3) in &cms[ord_idx].terms {
                        let inner = PairChainKey {
                            mid_pulse: ord[1],
                            zeta_mid: zm,
                            early_pulse: ord[2],
                            zeta_early: ze,
                            lambda_mid: key_bits(l2 - l3),
                            lambda_early: key_bits(l3),
                        };
                        let key = TripleChainKey {
                            late_pulse: ord[0],
                            zeta_late: zl,
                            lambda_top: key_bits(l1 - l2),
                            inner,
                        };
                        sum += c * (MINUS_I * l1 * ts).exp() * triple_tables[&key].integral_to(ts);
                    }
                }
                // (−i)³ from the three propagators.
                det.envelope_time(-1, ts) * Complex64::new(0.0, 1.0) * sum
            };
            let q = adaptive_gk(&f, t_lo, t_hi, sc.rel_tol, "baseline order-3 time integral")?;
            total += phase * q.value;
        }
    }
    Ok(-2.0 * total.im)
}

// ---------------------------------------------------------------------------
// Pair corrections: order 1
// ---------------------------------------------------------------------------

/// Pair correction of the requested order, broken into its additive terms.
///
/// Order 1 has a single term (`pair_coupling`); order 2 has three terms named
/// by which drive pulses act on the partner molecule; order 3 likewise.
///
/// # Errors
/// [`VmiError::InvalidModel`] for structural problems (fewer than two
/// molecules, coincident positions, undamped time-domain models);
/// [`VmiError::Unsupported`] for orders outside 1–3;
/// [`VmiError::Numerical`] if a quadrature fails.
pub fn vmi_signal(sc: &Scenario, order: usize, domain: Domain) -> Result<VmiBreakdown> {
    if !(1..=3).contains(&order) {
        return Err(VmiError::Unsupported(format!(
            "pair corrections are implemented for orders 1-3, got {order}"
        )));
    }
    sc.validate(Some(order))?;
    if domain == Domain::Time {
        require_damped(sc)?;
    }
    let pairs = ordered_pairs(sc)?;
    let spaces = spaces_of(sc);
    match (order, domain) {
        (1, Domain::Freq) => {
            let v = s1_freq(sc, &spaces, &pairs, None)?;
            Ok(VmiBreakdown {
                terms: vec![(S1_TERM_NAME.into(), v)],
            })
        }
        (1, Domain::Time) => {
            let v = s1_time(sc, &spaces, &pairs)?;
            Ok(VmiBreakdown {
                terms: vec![(S1_TERM_NAME.into(), v)],
            })
        }
        (2, Domain::Freq) => s2_freq(sc, &spaces, &pairs),
        (2, Domain::Time) => s2_time(sc, &spaces, &pairs),
        (3, Domain::Freq) => s3_freq(sc, &spaces, &pairs),
        (3, Domain::Time) => s3_time(sc, &spaces, &pairs),
        _ => unreachable!(),
    }
}

/// Per-molecule linear modal families for the order-1 pair correction.
struct S1Modes {
    /// Detected side per vacuum axis ν: ⟨V₊^{ε_s} G V₋^ν⟩.
    a_det: [LinearModes; 3],
    /// Source side per emission axis ν′: ⟨V₊^{ν′} G V₋^{ε₁}⟩.
    b_src: [LinearModes; 3],
}

fn s1_modes(sc: &Scenario, spaces: &[SuperOpSpace]) -> Vec<S1Modes> {
    let det_pol = sc.detection.polarization;
    let p1_pol = sc.drive[0].polarization;
    spaces
        .iter()
        .map(|space| {
            let det_op = plus_op(space, det_pol);
            let leg_op = minus_op(space, p1_pol);
            S1Modes {
                a_det: [0, 1, 2].map(|nu| linear_modes(space, &det_op, &space.v_minus[nu])),
                b_src: [0, 1, 2].map(|nu| linear_modes(space, &space.v_plus[nu], &leg_op)),
            }
        })
        .collect()
}

fn s1_freq(
    sc: &Scenario,
    spaces: &[SuperOpSpace],
    pairs: &[PairGeometry],
    fixed_geometry: Option<[f64; 3]>,
) -> Result<f64> {
    let det = &sc.detection;
    let p1 = &sc.drive[0];
    let (w_lo, w_hi) = freq_window(p1);
    let modes = s1_modes(sc, spaces);
    let c_light = sc.speed_of_light;
    let n_mol = sc.molecules.len();

    let mut total = C0;
    for branch in sc.branches(1) {
        let z = branch[0];
        // Static pair data for this branch.
        let pair_phases: Vec<Complex64> = pairs
            .iter()
            .map(|pg| {
                branch_phase(p1.wave_vector, z, sc.molecules[pg.b].position)
                    * detection_phase(det.wave_vector, sc.molecules[pg.a].position)
            })
            .collect();
        let f = |w: f64| {
            let x = f64::from(z) * w;
            let xc = Complex64::new(x, 0.0);
            let env = det.envelope_freq(-1, x) * p1.envelope_freq(z, w);
            // Per-molecule per-axis response values at this frequency.
            let mut a_vals = vec![[C0; 3]; n_mol];
            let mut b_vals = vec![[C0; 3]; n_mol];
            for (i, ms) in modes.iter().enumerate() {
                for nu in 0..3 {
                    a_vals[i][nu] = ms.a_det[nu].freq(xc);
                    b_vals[i][nu] = ms.b_src[nu].freq(xc);
                }
            }
            let mut sum = C0;
            for (pg, ph) in pairs.iter().zip(&pair_phases) {
                let r = fixed_geometry.unwrap_or(pg.r_vec);
                let d = tensor_d(r, x / c_light);
                let mut contr = C0;
                for nu in 0..3 {
                    for nup in 0..3 {
                        contr += a_vals[pg.a][nu] * d[nu][nup] * b_vals[pg.b][nup];
                    }
                }
                sum += *ph * contr;
            }
            env * sum
        };
        let q = adaptive_gk(
            &f,
            w_lo,
            w_hi,
            sc.rel_tol,
            "pair order-1 frequency integral",
        )?;
        total += q.value;
    }
    Ok(-(1.0 / (PI * PI)) * total.im)
}

fn s1_time(sc: &Scenario, spaces: &[SuperOpSpace], pairs: &[PairGeometry]) -> Result<f64> {
    let det = &sc.detection;
    let p1 = &sc.drive[0];
    let max_retard = pairs.iter().map(|p| p.retard).fold(0.0_f64, f64::max);
    let (t_lo, t_hi) = vacuum_window(sc, max_retard);
    let modes = s1_modes(sc, spaces);

    let mut total = C0;
    for branch in sc.branches(1) {
        let z = branch[0];
        let pair_phases: Vec<Complex64> = pairs
            .iter()
            .map(|pg| {
                branch_phase(p1.wave_vector, z, sc.molecules[pg.b].position)
                    * detection_phase(det.wave_vector, sc.molecules[pg.a].position)
            })
            .collect();
        let f = |tv: f64| {
            let mut sum = C0;
            for (pg, ph) in pairs.iter().zip(&pair_phases) {
                let tr = tv - pg.retard;
                let mut contr = C0;
                for nu in 0..3 {
                    let a_val = a_alpha_at(det, &modes[pg.a].a_det[nu], tv);
                    if a_val == C0 {
                        continue;
                    }
                    for nup in 0..3 {
                        contr += a_val
                            * pg.coupling[nu][nup]
                            * b_alpha_at(p1, z, &modes[pg.b].b_src[nup], tr);
                    }
                }
                sum += *ph * contr;
            }
            sum
        };
        let q = adaptive_gk(&f, t_lo, t_hi, sc.rel_tol, "pair order-1 time integral")?;
        total += q.value;
    }
    Ok(-(2.0 / PI) * total.im)
}

// ---------------------------------------------------------------------------
// Pair corrections: order 2
// ---------------------------------------------------------------------------

/// Modal families for order-2 pair terms, per molecule.
struct S2Modes {
    /// a-side TOβ pieces per (drive pulse ℓ, vacuum axis ν):
    /// `field_mid[ℓ][ν]` has the pulse adjacent to detection,
    /// `vac_mid[ℓ][ν]` has the vacuum leg adjacent to detection.
    field_mid: Vec<[QuadraticModes; 3]>,
    vac_mid: Vec<[QuadraticModes; 3]>,
    /// a-side ᾱ per vacuum axis (detection, ν).
    a_det: [LinearModes; 3],
    /// b-side ᾱ per (emission axis ν′, drive pulse ℓ).
    b_src: Vec<[LinearModes; 3]>,
    /// b-side β̄ per (emission axis ν′, late pulse, early pulse).
    b_qm: Vec<Vec<Vec<QuadraticModes>>>,
}

fn s2_modes(sc: &Scenario, spaces: &[SuperOpSpace]) -> Vec<S2Modes> {
    let det_pol = sc.detection.polarization;
    let n_pulse = sc.drive.len();
    spaces
        .iter()
        .map(|space| {
            let det_op = plus_op(space, det_pol);
            let pulse_ops: Vec<Array2<Complex64>> = sc
                .drive
                .iter()
                .map(|p| minus_op(space, p.polarization))
                .collect();
            let field_mid = (0..n_pulse)
                .map(|l| {
                    [0, 1, 2].map(|nu| {
                        quadratic_modes(space, &det_op, &pulse_ops[l], &space.v_minus[nu])
                    })
                })
                .collect();
            let vac_mid = (0..n_pulse)
                .map(|l| {
                    [0, 1, 2].map(|nu| {
                        quadratic_modes(space, &det_op, &space.v_minus[nu], &pulse_ops[l])
                    })
                })
                .collect();
            let a_det = [0, 1, 2].map(|nu| linear_modes(space, &det_op, &space.v_minus[nu]));
            let mut b_src: Vec<[LinearModes; 3]> = (0..3)
                .map(|_| std::array::from_fn(|_| LinearModes { terms: Vec::new() }))
                .collect();
            for (nu, row) in b_src.iter_mut().enumerate() {
                for (l, slot) in row.iter_mut().enumerate().take(n_pulse) {
                    *slot = linear_modes(space, &space.v_plus[nu], &pulse_ops[l]);
                }
            }
            let b_qm = (0..3)
                .map(|nu| {
                    (0..n_pulse)
                        .map(|late| {
                            (0..n_pulse)
                                .map(|early| {
                                    quadratic_modes(
                                        space,
                                        &space.v_plus[nu],
                                        &pulse_ops[late],
                                        &pulse_ops[early],
                                    )
                                })
                                .collect::<Vec<_>>()
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            S2Modes {
                field_mid,
                vac_mid,
                a_det,
                b_src,
                b_qm,
            }
        })
        .collect()
}

/// Name of the single order-1 pair term.
pub const S1_TERM_NAME: &str = "pair_coupling";

/// Names of the order-2 pair terms, in evaluation order.
pub const S2_TERM_NAMES: [&str; 3] = [
    "field1_on_partner",
    "field2_on_partner",
    "both_fields_on_partner",
];

/// Names of the order-3 pair terms (cascades), in evaluation order.
pub const S3_TERM_NAMES: [&str; 3] = [
    "fields23_on_partner",
    "fields13_on_partner",
    "fields12_on_partner",
];

fn s2_freq(sc: &Scenario, spaces: &[SuperOpSpace], pairs: &[PairGeometry]) -> Result<VmiBreakdown> {
    let det = &sc.detection;
    let (p1, p2) = (&sc.drive[0], &sc.drive[1]);
    let (w1_lo, w1_hi) = freq_window(p1);
    let (w2_lo, w2_hi) = freq_window(p2);
    let inner_tol = sc.rel_tol * 0.1;
    let c_light = sc.speed_of_light;
    let det_pol = sc.detection.polarization;

    // Frequency-domain modal families (ToBeta directly).
    struct FreqModes {
        /// a-side TOβ per (pulse ℓ, ν): legs (ε_ℓ, ·) and (ν axis, ·).
        tob_a: Vec<[ToBeta; 3]>,
        a_det: [LinearModes; 3],
        b_src: Vec<[LinearModes; 3]>,
        /// b-side TOβ per ν′ with legs (ε₂, ·), (ε₁, ·).
        tob_b: [ToBeta; 3],
    }
    let fm: Vec<FreqModes> = spaces
        .iter()
        .map(|space| {
            let det_op = plus_op(space, det_pol);
            let pulse_ops: Vec<Array2<Complex64>> = sc
                .drive
                .iter()
                .map(|p| minus_op(space, p.polarization))
                .collect();
            FreqModes {
                tob_a: (0..2)
                    .map(|l| {
                        [0, 1, 2].map(|nu| {
                            to_beta_modes(space, &det_op, &pulse_ops[l], &space.v_minus[nu])
                        })
                    })
                    .collect(),
                a_det: [0, 1, 2].map(|nu| linear_modes(space, &det_op, &space.v_minus[nu])),
                b_src: (0..3)
                    .map(|nu| {
                        [0, 1].map(|l: usize| linear_modes(space, &space.v_plus[nu], &pulse_ops[l]))
                    })
                    .map(|pair| {
                        [
                            pair[0].clone(),
                            pair[1].clone(),
                            LinearModes { terms: vec![] },
                        ]
                    })
                    .collect(),
                tob_b: [0, 1, 2].map(|nu| {
                    to_beta_modes(space, &space.v_plus[nu], &pulse_ops[1], &pulse_ops[0])
                }),
            }
        })
        .collect();

    // term index 0: field 1 on partner; 1: field 2 on partner; 2: both.
    let mut term_vals = [0.0_f64; 3];
    for (term, val) in term_vals.iter_mut().enumerate() {
        let mut acc = C0;
        for branch in sc.branches(2) {
            let (z1, z2) = (branch[0], branch[1]);
            let pair_phases: Vec<Complex64> = pairs
                .iter()
                .map(|pg| {
                    let ra = sc.molecules[pg.a].position;
                    let rb = sc.molecules[pg.b].position;
                    match term {
                        0 => {
                            branch_phase(p2.wave_vector, z2, ra)
                                * detection_phase(det.wave_vector, ra)
                                * branch_phase(p1.wave_vector, z1, rb)
                        }
                        1 => {
                            branch_phase(p1.wave_vector, z1, ra)
                                * detection_phase(det.wave_vector, ra)
                                * branch_phase(p2.wave_vector, z2, rb)
                        }
                        _ => {
                            detection_phase(det.wave_vector, ra)
                                * branch_phase(p1.wave_vector, z1, rb)
                                * branch_phase(p2.wave_vector, z2, rb)
                        }
                    }
                })
                .collect();
            let outer = |w2: f64| {
                let f2 = f64::from(z2) * w2;
                let env2 = p2.envelope_freq(z2, w2);
                let inner = |w1: f64| {
                    let f1 = f64::from(z1) * w1;
                    let env = det.envelope_freq(-1, f1 + f2) * env2 * p1.envelope_freq(z1, w1);
                    let f1c = Complex64::new(f1, 0.0);
                    let f2c = Complex64::new(f2, 0.0);
                    let mut sum = C0;
                    for (pg, ph) in pairs.iter().zip(&pair_phases) {
                        let (ma, mb) = (&fm[pg.a], &fm[pg.b]);
                        let contr = match term {
                            0 => {
                                // Field 1 drives b; vacuum carries ζ₁ω₁.
                                let d = tensor_d(pg.r_vec, f1 / c_light);
                                let mut s = C0;
                                for nu in 0..3 {
                                    let av = ma.tob_a[1][nu].freq(f2c, f1c);
                                    if av == C0 {
                                        continue;
                                    }
                                    for nup in 0..3 {
                                        s += av * d[nu][nup] * mb.b_src[nup][0].freq(f1c);
                                    }
                                }
                                s
                            }
                            1 => {
                                let d = tensor_d(pg.r_vec, f2 / c_light);
                                let mut s = C0;
                                for nu in 0..3 {
                                    let av = ma.tob_a[0][nu].freq(f1c, f2c);
                                    if av == C0 {
                                        continue;
                                    }
                                    for nup in 0..3 {
                                        s += av * d[nu][nup] * mb.b_src[nup][1].freq(f2c);
                                    }
                                }
                                s
                            }
                            _ => {
                                let om = f1c + f2c;
                                let d = tensor_d(pg.r_vec, (f1 + f2) / c_light);
                                let mut s = C0;
                                for nu in 0..3 {
                                    let av = ma.a_det[nu].freq(om);
                                    if av == C0 {
                                        continue;
                                    }
                                    for nup in 0..3 {
                                        s += av * d[nu][nup] * mb.tob_b[nup].freq(f2c, f1c);
                                    }
                                }
                                s
                            }
                        };
                        sum += *ph * contr;
                    }
                    env * sum
                };
                match adaptive_gk(&inner, w1_lo, w1_hi, inner_tol, "pair order-2 inner") {
                    Ok(q) => q.value,
                    Err(_) => Complex64::new(f64::NAN, 0.0),
                }
            };
            let q = adaptive_gk(
                &outer,
                w2_lo,
                w2_hi,
                sc.rel_tol,
                "pair order-2 frequency integral",
            )?;
            acc += q.value;
        }
        *val = (1.0 / PI) * acc.im;
    }
    Ok(VmiBreakdown {
        terms: S2_TERM_NAMES
            .iter()
            .zip(term_vals)
            .map(|(n, v)| ((*n).to_string(), v))
            .collect(),
    })
}

fn s2_time(sc: &Scenario, spaces: &[SuperOpSpace], pairs: &[PairGeometry]) -> Result<VmiBreakdown> {
    let det = &sc.detection;
    let max_retard = pairs.iter().map(|p| p.retard).fold(0.0_f64, f64::max);
    let (t_lo, t_hi) = vacuum_window(sc, max_retard);
    let modes = s2_modes(sc, spaces);

    // Tables: detection chains for a-side TOβ, pair chains for b-side β̄.
    let mut det_tables: DetChainTables<'_> = HashMap::new();
    let mut pair_tables: PairChainTables<'_> = HashMap::new();
    for ms in &modes {
        for l in 0..2 {
            for nu in 0..3 {
                for &z in &[1_i8, -1_i8] {
                    ensure_det_chain_tables(sc, &mut det_tables, &ms.field_mid[l][nu], l, z)?;
                }
            }
        }
        for nu in 0..3 {
            for (late, early) in [(1_usize, 0_usize), (0_usize, 1_usize)] {
                for &zl in &[1_i8, -1_i8] {
                    for &ze in &[1_i8, -1_i8] {
                        ensure_pair_chain_tables(
                            sc,
                            &mut pair_tables,
                            &ms.b_qm[nu][late][early],
                            late,
                            zl,
                            early,
                            ze,
                        )?;
                    }
                }
            }
        }
    }

    let mut term_vals = [0.0_f64; 3];
    for (term, val) in term_vals.iter_mut().enumerate() {
        let mut acc = C0;
        for branch in sc.branches(2) {
            let (z1, z2) = (branch[0], branch[1]);
            let zeta_of = [z1, z2];
            let pair_phases: Vec<Complex64> = pairs
                .iter()
                .map(|pg| {
                    let ra = sc.molecules[pg.a].position;
                    let rb = sc.molecules[pg.b].position;
                    match term {
                        0 => {
                            branch_phase(sc.drive[1].wave_vector, z2, ra)
                                * detection_phase(det.wave_vector, ra)
                                * branch_phase(sc.drive[0].wave_vector, z1, rb)
                        }
                        1 => {
                            branch_phase(sc.drive[0].wave_vector, z1, ra)
                                * detection_phase(det.wave_vector, ra)
                                * branch_phase(sc.drive[1].wave_vector, z2, rb)
                        }
                        _ => {
                            detection_phase(det.wave_vector, ra)
                                * branch_phase(sc.drive[0].wave_vector, z1, rb)
                                * branch_phase(sc.drive[1].wave_vector, z2, rb)
                        }
                    }
                })
                .collect();
            let f = |tv: f64| {
                let mut sum = C0;
                for (pg, ph) in pairs.iter().zip(&pair_phases) {
                    let tr = tv - pg.retard;
                    let (ma, mb) = (&modes[pg.a], &modes[pg.b]);
                    let mut contr = C0;
                    match term {
                        0 | 1 => {
                            // a-pulse = the one NOT on the partner.
                            let (a_pulse, b_pulse) = if term == 0 { (1, 0) } else { (0, 1) };
                            let (za, zb) = (zeta_of[a_pulse], zeta_of[b_pulse]);
                            for nu in 0..3 {
                                let av = a_tob_at(
                                    sc,
                                    &det_tables,
                                    &ma.field_mid[a_pulse][nu],
                                    &ma.vac_mid[a_pulse][nu],
                                    a_pulse,
                                    za,
                                    tv,
                                );
                                if av == C0 {
                                    continue;
                                }
                                for nup in 0..3 {
                                    contr += av
                                        * pg.coupling[nu][nup]
                                        * b_alpha_at(
                                            &sc.drive[b_pulse],
                                            zb,
                                            &mb.b_src[nup][b_pulse],
                                            tr,
                                        );
                                }
                            }
                        }
                        _ => {
                            for nu in 0..3 {
                                let av = a_alpha_at(det, &ma.a_det[nu], tv);
                                if av == C0 {
                                    continue;
                                }
                                for nup in 0..3 {
                                    let orderings = [
                                        (1_usize, z2, 0_usize, z1, &mb.b_qm[nup][1][0]),
                                        (0_usize, z1, 1_usize, z2, &mb.b_qm[nup][0][1]),
                                    ];
                                    contr += av
                                        * pg.coupling[nu][nup]
                                        * b_tob_at(&pair_tables, &orderings, tr);
                                }
                            }
                        }
                    }
                    sum += *ph * contr;
                }
                sum
            };
            let q = adaptive_gk(&f, t_lo, t_hi, sc.rel_tol, "pair order-2 time integral")?;
            acc += q.value;
        }
        *val = 4.0 * PI * acc.im;
    }
    Ok(VmiBreakdown {
        terms: S2_TERM_NAMES
            .iter()
            .zip(term_vals)
            .map(|(n, v)| ((*n).to_string(), v))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Pair corrections: order 3 (cascades)
// ---------------------------------------------------------------------------

fn s3_partitions() -> [(usize, usize, usize); 3] {
    // (a-side pulse i, partner pulses (j, k)); term names follow this order.
    [(0, 1, 2), (1, 0, 2), (2, 0, 1)]
}

fn s3_freq(sc: &Scenario, spaces: &[SuperOpSpace], pairs: &[PairGeometry]) -> Result<VmiBreakdown> {
    let det = &sc.detection;
    let det_pol = det.polarization;
    let c_light = sc.speed_of_light;
    let windows: Vec<(f64, f64)> = sc.drive.iter().map(freq_window).collect();
    let mid_tol = sc.rel_tol * 0.1;
    let inner_tol = sc.rel_tol * 0.01;

    struct FreqModes3 {
        /// a-side TOβ per (pulse i, ν): legs (ε_i, ·), (ν, ·).
        tob_a: Vec<[ToBeta; 3]>,
        /// b-side TOβ per (partition index, ν′): legs (ε_j, ·), (ε_k, ·).
        tob_b: Vec<[ToBeta; 3]>,
    }
    let fm: Vec<FreqModes3> = spaces
        .iter()
        .map(|space| {
            let det_op = plus_op(space, det_pol);
            let pulse_ops: Vec<Array2<Complex64>> = sc
                .drive
                .iter()
                .map(|p| minus_op(space, p.polarization))
                .collect();
            FreqModes3 {
                tob_a: (0..3)
                    .map(|i| {
                        [0, 1, 2].map(|nu| {
                            to_beta_modes(space, &det_op, &pulse_ops[i], &space.v_minus[nu])
                        })
                    })
                    .collect(),
                tob_b: s3_partitions()
                    .iter()
                    .map(|&(_, j, k)| {
                        [0, 1, 2].map(|nu| {
                            to_beta_modes(space, &space.v_plus[nu], &pulse_ops[j], &pulse_ops[k])
                        })
                    })
                    .collect(),
            }
        })
        .collect();

    let mut term_vals = [0.0_f64; 3];
    for (term, val) in term_vals.iter_mut().enumerate() {
        let (i, j, k) = s3_partitions()[term];
        let mut acc = C0;
        for branch in sc.branches(3) {
            let (zi, zj, zk) = (branch[i], branch[j], branch[k]);
            let pair_phases: Vec<Complex64> = pairs
                .iter()
                .map(|pg| {
                    let ra = sc.molecules[pg.a].position;
                    let rb = sc.molecules[pg.b].position;
                    branch_phase(sc.drive[i].wave_vector, zi, ra)
                        * detection_phase(det.wave_vector, ra)
                        * branch_phase(sc.drive[j].wave_vector, zj, rb)
                        * branch_phase(sc.drive[k].wave_vector, zk, rb)
                })
                .collect();
            // Nested integration over (ω_k inner, ω_j middle, ω_i outer).
            let outer = |wi: f64| {
                let fi = f64::from(zi) * wi;
                let env_i = sc.drive[i].envelope_freq(zi, wi);
                let mid = |wj: f64| {
                    let fj = f64::from(zj) * wj;
                    let env_ij = env_i * sc.drive[j].envelope_freq(zj, wj);
                    let inner = |wk: f64| {
                        let fk = f64::from(zk) * wk;
                        let env = det.envelope_freq(-1, fi + fj + fk)
                            * env_ij
                            * sc.drive[k].envelope_freq(zk, wk);
                        let om_jk = fj + fk;
                        let fic = Complex64::new(fi, 0.0);
                        let fjc = Complex64::new(fj, 0.0);
                        let fkc = Complex64::new(fk, 0.0);
                        let omc = Complex64::new(om_jk, 0.0);
                        let mut sum = C0;
                        for (pg, ph) in pairs.iter().zip(&pair_phases) {
                            let (ma, mb) = (&fm[pg.a], &fm[pg.b]);
                            let d = tensor_d(pg.r_vec, om_jk / c_light);
                            let mut s = C0;
                            for nu in 0..3 {
                                let av = ma.tob_a[i][nu].freq(fic, omc);
                                if av == C0 {
                                    continue;
                                }
                                for nup in 0..3 {
                                    s += av * d[nu][nup] * mb.tob_b[term][nup].freq(fjc, fkc);
                                }
                            }
                            sum += *ph * s;
                        }
                        env * sum
                    };
                    match adaptive_gk(
                        &inner,
                        windows[k].0,
                        windows[k].1,
                        inner_tol,
                        "cascade inner",
                    ) {
                        Ok(q) => q.value,
                        Err(_) => Complex64::new(f64::NAN, 0.0),
                    }
                };
                match adaptive_gk(&mid, windows[j].0, windows[j].1, mid_tol, "cascade middle") {
                    Ok(q) => q.value,
                    Err(_) => Complex64::new(f64::NAN, 0.0),
                }
            };
            let q = adaptive_gk(
                &outer,
                windows[i].0,
                windows[i].1,
                sc.rel_tol,
                "cascade frequency integral",
            )?;
            acc += q.value;
        }
        *val = acc.im / (2.0 * PI * PI);
    }
    Ok(VmiBreakdown {
        terms: S3_TERM_NAMES
            .iter()
            .zip(term_vals)
            .map(|(n, v)| ((*n).to_string(), v))
            .collect(),
    })
}

fn s3_time(sc: &Scenario, spaces: &[SuperOpSpace], pairs: &[PairGeometry]) -> Result<VmiBreakdown> {
    let det = &sc.detection;
    let max_retard = pairs.iter().map(|p| p.retard).fold(0.0_f64, f64::max);
    let (t_lo, t_hi) = vacuum_window(sc, max_retard);
    let modes = s2_modes(sc, spaces); // same families cover order 3

    let mut det_tables: DetChainTables<'_> = HashMap::new();
    let mut pair_tables: PairChainTables<'_> = HashMap::new();
    for ms in &modes {
        for l in 0..3 {
            for nu in 0..3 {
                for &z in &[1_i8, -1_i8] {
                    ensure_det_chain_tables(sc, &mut det_tables, &ms.field_mid[l][nu], l, z)?;
                }
            }
        }
        for nu in 0..3 {
            for &(_, j, k) in &s3_partitions() {
                for (late, early) in [(j, k), (k, j)] {
                    for &zl in &[1_i8, -1_i8] {
                        for &ze in &[1_i8, -1_i8] {
                            ensure_pair_chain_tables(
                                sc,
                                &mut pair_tables,
                                &ms.b_qm[nu][late][early],
                                late,
                                zl,
                                early,
                                ze,
                            )?;
                        }
                    }
                }
            }
        }
    }

    let mut term_vals = [0.0_f64; 3];
    for (term, val) in term_vals.iter_mut().enumerate() {
        let (i, j, k) = s3_partitions()[term];
        let mut acc = C0;
        for branch in sc.branches(3) {
            let (zi, zj, zk) = (branch[i], branch[j], branch[k]);
            let pair_phases: Vec<Complex64> = pairs
                .iter()
                .map(|pg| {
                    let ra = sc.molecules[pg.a].position;
                    let rb = sc.molecules[pg.b].position;
                    branch_phase(sc.drive[i].wave_vector, zi, ra)
                        * detection_phase(det.wave_vector, ra)
                        * branch_phase(sc.drive[j].wave_vector, zj, rb)
                        * branch_phase(sc.drive[k].wave_vector, zk, rb)
                })
                .collect();
            let f = |tv: f64| {
                let mut sum = C0;
                for (pg, ph) in pairs.iter().zip(&pair_phases) {
                    let tr = tv - pg.retard;
                    let (ma, mb) = (&modes[pg.a], &modes[pg.b]);
                    let mut contr = C0;
                    for nu in 0..3 {
                        let av = a_tob_at(
                            sc,
                            &det_tables,
                            &ma.field_mid[i][nu],
                            &ma.vac_mid[i][nu],
                            i,
                            zi,
                            tv,
                        );
                        if av == C0 {
                            continue;
                        }
                        for nup in 0..3 {
                            let orderings = [
                                (j, zj, k, zk, &mb.b_qm[nup][j][k]),
                                (k, zk, j, zj, &mb.b_qm[nup][k][j]),
                            ];
                            contr +=
                                av * pg.coupling[nu][nup] * b_tob_at(&pair_tables, &orderings, tr);
                        }
                    }
                    sum += *ph * contr;
                }
                sum
            };
            let q = adaptive_gk(&f, t_lo, t_hi, sc.rel_tol, "cascade time integral")?;
            acc += q.value;
        }
        *val = 4.0 * PI * acc.im;
    }
    Ok(VmiBreakdown {
        terms: S3_TERM_NAMES
            .iter()
            .zip(term_vals)
            .map(|(n, v)| ((*n).to_string(), v))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Raw second-order pair diagrams
// ---------------------------------------------------------------------------

/// The five second-order pair-diagram shapes (before pulse relabeling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RawKind {
    /// Partner's field, emission, absorption, own field, detection.
    A1,
    /// Partner's field, emission, own field, absorption, detection.
    A2,
    /// Partner's field, own field, emission, absorption, detection.
    A3,
    /// Own field, partner's field, emission, absorption, detection.
    B1,
    /// Both fields on the partner (late/early ordering fixed).
    C1,
}

/// Evaluate each of the ten raw second-order pair diagrams separately in the
/// time domain. Their sum equals the recombined three-term order-2 pair
/// correction (same prefactor, same coupling), which is what the diagram
/// consistency check asserts.
///
/// # Errors
/// Same conditions as [`vmi_signal`] in the time domain.
pub fn raw_second_order_terms(sc: &Scenario) -> Result<Vec<(String, f64)>> {
    sc.validate(Some(2))?;
    require_damped(sc)?;
    let pairs = ordered_pairs(sc)?;
    let spaces = spaces_of(sc);
    let modes = s2_modes(sc, &spaces);
    let max_retard = pairs.iter().map(|p| p.retard).fold(0.0_f64, f64::max);
    let window = vacuum_window(sc, max_retard);

    let mut out = Vec::with_capacity(10);
    for (pb, pa) in [(0_usize, 1_usize), (1_usize, 0_usize)] {
        for kind in [
            RawKind::A1,
            RawKind::A2,
            RawKind::A3,
            RawKind::B1,
            RawKind::C1,
        ] {
            let name = raw_diagram_name(kind, pb, pa);
            let v = raw_diagram_value(sc, &modes, &pairs, window, kind, pb, pa)?;
            out.push((name, v));
        }
    }
    Ok(out)
}

fn raw_diagram_name(kind: RawKind, pb: usize, pa: usize) -> String {
    let (fb, fa) = (pb + 1, pa + 1);
    match kind {
        RawKind::A1 => format!("f{fb}b_vb_va_f{fa}a_det"),
        RawKind::A2 => format!("f{fb}b_vb_f{fa}a_va_det"),
        RawKind::A3 => format!("f{fb}b_f{fa}a_vb_va_det"),
        RawKind::B1 => format!("f{fa}a_f{fb}b_vb_va_det"),
        // For C1 the parameters are (late, early) on the partner.
        RawKind::C1 => format!("f{}b_f{fb}b_vb_va_det", fa),
    }
}

/// Key for cross-molecule chain tables used by the A3/B1 raw diagrams.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct CrossChainKey {
    mid_pulse: usize,
    zeta_mid: i8,
    early_pulse: usize,
    zeta_early: i8,
    lambda_mid: (u64, u64),
    lambda_early: (u64, u64),
}

#[allow(clippy::too_many_arguments)]
fn raw_diagram_value(
    sc: &Scenario,
    modes: &[S2Modes],
    pairs: &[PairGeometry],
    window: (f64, f64),
    kind: RawKind,
    pb: usize,
    pa: usize,
) -> Result<f64> {
    let det = &sc.detection;
    let (t_lo, t_hi) = window;

    // Pre-build whatever tables this diagram kind needs.
    let mut det_tables: DetChainTables<'_> = HashMap::new();
    let mut cross_tables: HashMap<CrossChainKey, CumulativeTable<'_>> = HashMap::new();
    let mut pairchain_tables: PairChainTables<'_> = HashMap::new();
    for ms in modes {
        match kind {
            RawKind::A1 => {
                for nu in 0..3 {
                    for &z in &[1_i8, -1_i8] {
                        ensure_det_chain_tables(sc, &mut det_tables, &ms.field_mid[pa][nu], pa, z)?;
                    }
                }
            }
            RawKind::A3 | RawKind::B1 => {
                // Mid/early roles differ: A3 has the a-field in the middle,
                // B1 has the b-field in the middle.
                let (mid, early) = if kind == RawKind::A3 {
                    (pa, pb)
                } else {
                    (pb, pa)
                };
                for nu in 0..3 {
                    for nup in 0..3 {
                        for &zm in &[1_i8, -1_i8] {
                            for &zep in &[1_i8, -1_i8] {
                                for &(_, _lo, li) in &ms.vac_mid[pa][nu].terms {
                                    for bsrc in modes {
                                        for &(_, lb) in &bsrc.b_src[nup][pb].terms {
                                            let (lm, le) = if kind == RawKind::A3 {
                                                (li, lb)
                                            } else {
                                                (lb, li)
                                            };
                                            let key = CrossChainKey {
                                                mid_pulse: mid,
                                                zeta_mid: zm,
                                                early_pulse: early,
                                                zeta_early: zep,
                                                lambda_mid: key_bits(lm),
                                                lambda_early: key_bits(le),
                                            };
                                            if let Entry::Vacant(slot) = cross_tables.entry(key) {
                                                let mp = &sc.drive[mid];
                                                let ep = &sc.drive[early];
                                                let (lo_w, hi_w) = mp.support(WINDOW_SIGMAS);
                                                let t = CumulativeTable::build(
                                                    move |tau: f64| {
                                                        mp.envelope_time(zm, tau)
                                                            * (Complex64::new(0.0, 1.0) * lm * tau)
                                                                .exp()
                                                            * pulse_exp_integral(
                                                                ep,
                                                                zep,
                                                                le,
                                                                None,
                                                                Some(tau),
                                                            )
                                                    },
                                                    lo_w,
                                                    hi_w,
                                                    TABLE_REL_TOL,
                                                    "cross chain table",
                                                )?;
                                                slot.insert(t);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            RawKind::C1 => {
                // (late, early) = (pb, pa) on the partner.
                for nu in 0..3 {
                    for &zl in &[1_i8, -1_i8] {
                        for &ze in &[1_i8, -1_i8] {
                            ensure_pair_chain_tables(
                                sc,
                                &mut pairchain_tables,
                                &ms.b_qm[nu][pb][pa],
                                pb,
                                zl,
                                pa,
                                ze,
                            )?;
                        }
                    }
                }
            }
            RawKind::A2 => {}
        }
    }

    let mut total = C0;
    for branch in sc.branches(2) {
        let zeta_of = [branch[0], branch[1]];
        let (za, zb) = (zeta_of[pa], zeta_of[pb]);
        let pair_phases: Vec<Complex64> = pairs
            .iter()
            .map(|pg| {
                let ra = sc.molecules[pg.a].position;
                let rb = sc.molecules[pg.b].position;
                match kind {
                    RawKind::C1 => {
                        detection_phase(det.wave_vector, ra)
                            * branch_phase(sc.drive[pb].wave_vector, zb, rb)
                            * branch_phase(sc.drive[pa].wave_vector, za, rb)
                    }
                    _ => {
                        branch_phase(sc.drive[pa].wave_vector, za, ra)
                            * detection_phase(det.wave_vector, ra)
                            * branch_phase(sc.drive[pb].wave_vector, zb, rb)
                    }
                }
            })
            .collect();
        let f = |tv: f64| {
            let mut sum = C0;
            for (pg, ph) in pairs.iter().zip(&pair_phases) {
                let tr = tv - pg.retard;
                let (ma, mb) = (&modes[pg.a], &modes[pg.b]);
                let mut contr = C0;
                for nu in 0..3 {
                    for nup in 0..3 {
                        let cpl = pg.coupling[nu][nup];
                        if cpl == C0 {
                            continue;
                        }
                        let piece = match kind {
                            RawKind::A1 => {
                                // a-side: pulse-mid branch only (table tail);
                                // b-side: closed ᾱ at the retarded time.
                                let mut a_sum = C0;
                                for &(c, lo, li) in &ma.field_mid[pa][nu].terms {
                                    let key = DetChainKey {
                                        pulse: pa,
                                        zeta: za,
                                        lambda_out: key_bits(lo),
                                        lambda_in: key_bits(li),
                                    };
                                    a_sum += c
                                        * (Complex64::new(0.0, 1.0) * li * tv).exp()
                                        * det_tables[&key].integral_from(tv);
                                }
                                (-a_sum) * b_alpha_at(&sc.drive[pb], zb, &mb.b_src[nup][pb], tr)
                            }
                            RawKind::A2 => {
                                // a-side vacuum-mid branch with the a-field
                                // constrained to (τ′_v, τ_v).
                                let mut a_sum = C0;
                                for &(c, lo, li) in &ma.vac_mid[pa][nu].terms {
                                    a_sum += c
                                        * (Complex64::new(0.0, 1.0) * (lo - li) * tv).exp()
                                        * detection_tail(det, lo, tv)
                                        * pulse_exp_integral(
                                            &sc.drive[pa],
                                            za,
                                            li,
                                            Some(tr),
                                            Some(tv),
                                        );
                                }
                                (-a_sum) * b_alpha_at(&sc.drive[pb], zb, &mb.b_src[nup][pb], tr)
                            }
                            RawKind::A3 | RawKind::B1 => {
                                let (mid, early) = if kind == RawKind::A3 {
                                    (pa, pb)
                                } else {
                                    (pb, pa)
                                };
                                let (zm, zep) = (zeta_of[mid], zeta_of[early]);
                                let mut s = C0;
                                for &(c, lo, li) in &ma.vac_mid[pa][nu].terms {
                                    let a_fac = c
                                        * (Complex64::new(0.0, 1.0) * (lo - li) * tv).exp()
                                        * detection_tail(det, lo, tv);
                                    for &(dcoef, lb) in &mb.b_src[nup][pb].terms {
                                        let (lm, le) = if kind == RawKind::A3 {
                                            (li, lb)
                                        } else {
                                            (lb, li)
                                        };
                                        let key = CrossChainKey {
                                            mid_pulse: mid,
                                            zeta_mid: zm,
                                            early_pulse: early,
                                            zeta_early: zep,
                                            lambda_mid: key_bits(lm),
                                            lambda_early: key_bits(le),
                                        };
                                        s += a_fac
                                            * dcoef
                                            * (MINUS_I * lb * tr).exp()
                                            * cross_tables[&key].integral_to(tr);
                                    }
                                }
                                // (−1) from the quadratic chain, (−i) linear.
                                (-Complex64::new(1.0, 0.0)) * MINUS_I * s
                            }
                            RawKind::C1 => {
                                let av = a_alpha_at(det, &ma.a_det[nu], tv);
                                let orderings = [(pb, zb, pa, za, &mb.b_qm[nup][pb][pa])];
                                av * b_tob_at(&pairchain_tables, &orderings, tr)
                            }
                        };
                        contr += piece * cpl;
                    }
                }
                sum += *ph * contr;
            }
            sum
        };
        let q = adaptive_gk(&f, t_lo, t_hi, sc.rel_tol, "raw pair diagram")?;
        total += q.value;
    }
    Ok(4.0 * PI * total.im)
}

// ---------------------------------------------------------------------------
// Effective field radiated by a partner molecule
// ---------------------------------------------------------------------------

/// The field a partner molecule (index `source`) contributes at the observer
/// molecule's position at time `t`, from its linear response to one drive
/// pulse: Ẽ_ν(t) = Σ_ν′ 𝒞_νν′(r)·P^{(1)}_ν′(t − r/c).
///
/// # Errors
/// [`VmiError::InvalidModel`] on bad indices, coincident molecules, or an
/// undamped source model.
pub fn effective_field_from_partner(
    sc: &Scenario,
    source: usize,
    observer: usize,
    pulse_idx: usize,
    t: f64,
) -> Result<[Complex64; 3]> {
    sc.validate(None)?;
    require_damped(sc)?;
    if source >= sc.molecules.len() || observer >= sc.molecules.len() || source == observer {
        return Err(VmiError::InvalidModel(format!(
            "effective field needs two distinct molecule indices below {}, got {source} and {observer}",
            sc.molecules.len()
        )));
    }
    if pulse_idx >= sc.drive.len() {
        return Err(VmiError::InvalidModel(format!(
            "pulse index {pulse_idx} out of range ({} drive pulses)",
            sc.drive.len()
        )));
    }
    let ra = sc.molecules[observer].position;
    let rb = sc.molecules[source].position;
    let r_vec = [ra[0] - rb[0], ra[1] - rb[1], ra[2] - rb[2]];
    let dist = dot(r_vec, r_vec).sqrt();
    if !(dist > 0.0) {
        return Err(VmiError::InvalidModel(
            "effective field is singular for coincident molecules".into(),
        ));
    }
    let coupling = tensor_c(r_vec);
    let retard = dist / sc.speed_of_light;
    let space = build_superop_space(&sc.molecules[source]);
    let pulse = &sc.drive[pulse_idx];
    let leg = minus_op(&space, pulse.polarization);
    let tau = t - retard;

    // First-order polarization of the source: P^(1)_ν′(τ) =
    // (−1)·Σ_ζ e^{iζk·r_b} ∫ 𝓔^ζ(τ₁) ᾱ^{ν′,ε}(τ−τ₁) dτ₁.
    let mut pol = [C0; 3];
    for (nup, slot) in pol.iter_mut().enumerate() {
        let m = linear_modes(&space, &space.v_plus[nup], &leg);
        let mut v = C0;
        for &z in &[1_i8, -1_i8] {
            let site = branch_phase(pulse.wave_vector, z, rb);
            let mut sum = C0;
            for &(d, l) in &m.terms {
                sum += d
                    * (MINUS_I * l * tau).exp()
                    * pulse_exp_integral(pulse, z, l, None, Some(tau));
            }
            v += site * MINUS_I * sum;
        }
        *slot = -v;
    }
    let mut out = [C0; 3];
    for nu in 0..3 {
        for nup in 0..3 {
            out[nu] += coupling[nu][nup] * pol[nup];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Ensemble scaling probe
// ---------------------------------------------------------------------------

/// One row of the ensemble scaling probe.
#[derive(Debug, Clone, Copy)]
pub struct ScalingPoint {
    /// Ensemble size.
    pub n_molecules: usize,
    /// Number of additive baseline terms (= N).
    pub baseline_terms: usize,
    /// Number of ordered-pair correction terms (= N(N−1)).
    pub pair_terms: usize,
    /// Order-1 baseline signal (frequency domain).
    pub baseline: f64,
    /// Order-1 pair correction with the coupling evaluated at the fixed
    /// reference separation for every ordered pair.
    pub vmi: f64,
}

/// Least-squares log-log exponents (baseline, pair) fitted over the probe
/// points: slope of ln|S| against ln N.
///
/// # Panics
/// Panics if fewer than two points are supplied or any signal is zero.
pub fn scaling_exponents(points: &[ScalingPoint]) -> (f64, f64) {
    assert!(points.len() >= 2, "exponent fit needs at least two points");
    let fit = |ys: Vec<f64>| {
        let xs: Vec<f64> = points.iter().map(|p| (p.n_molecules as f64).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    };
    let b = fit(points.iter().map(|p| p.baseline.abs().ln()).collect());
    let v = fit(points.iter().map(|p| p.vmi.abs().ln()).collect());
    (b, v)
}

/// Count-scaling probe: identical molecules on a line, drive and detection
/// propagating perpendicular to it so every site phase is exactly one.
///
/// The baseline is then exactly proportional to N. For the pair correction
/// the coupling tensor is evaluated at `reference_separation` for **every**
/// ordered pair — replacing the geometric variation by a fixed reference —
/// so the returned values isolate the N(N−1) pair counting.
///
/// # Errors
/// Propagates scenario validation and quadrature errors.
pub fn scaling_probe(
    template: &MolecularModel,
    drive: Pulse,
    detection: Pulse,
    speed_of_light: f64,
    line_spacing: f64,
    reference_separation: [f64; 3],
    sizes: &[usize],
) -> Result<Vec<ScalingPoint>> {
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n < 2 {
            return Err(VmiError::InvalidModel(
                "scaling probe needs at least two molecules per point".into(),
            ));
        }
        let molecules: Vec<MolecularModel> = (0..n)
            .map(|i| template.at_position([i as f64 * line_spacing, 0.0, 0.0]))
            .collect();
        let sc = Scenario::new(
            molecules,
            vec![drive.clone()],
            detection.clone(),
            speed_of_light,
        )?;
        let baseline = baseline_signal(&sc, 1, Domain::Freq)?;
        let spaces = spaces_of(&sc);
        let pairs = ordered_pairs(&sc)?;
        let vmi = s1_freq(&sc, &spaces, &pairs, Some(reference_separation))?;
        out.push(ScalingPoint {
            n_molecules: n,
            baseline_terms: n,
            pair_terms: pairs.len(),
            baseline,
            vmi,
        });
    }
    Ok(out)
}
