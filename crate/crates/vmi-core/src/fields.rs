//! Classical driving pulses and detection fields.
//!
//! Each pulse is a Gaussian wave packet with complex amplitude A, arrival
//! time T, duration σ, carrier frequency Ω > 0, wave vector k with
//! |k| = Ω/c, and a real unit polarization ε ⊥ k. The positive-frequency
//! envelope branch (ζ = +1) is
//!
//!   𝓔⁺(t) = A · exp(−(t−T)²/2σ²) · exp(−iΩ(t−T)),
//!
//! and ζ = −1 is its complex conjugate. The frequency-domain envelopes are
//! defined with the branch-matched transform 𝓔^ζ(ω) = ∫dt 𝓔^ζ(t) e^{iζωt},
//! so both branches peak at ω = +Ω:
//!
//!   𝓔⁺(ω) = A σ√(2π) e^{iωT} e^{−σ²(ω−Ω)²/2},   𝓔⁻(ω) = conj 𝓔⁺(ω).
//!
//! The full field at position r is Σ_ζ ε 𝓔^ζ-weighted with the plane-wave
//! spatial phase e^{iζ k·r}; frequency integrals carry a 1/2π per field.

use crate::{Complex64, Result, VmiError};

const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

/// A validated Gaussian pulse (drive or detection/local oscillator).
#[derive(Debug, Clone)]
pub struct Pulse {
    /// Complex amplitude A.
    pub amplitude: Complex64,
    /// Arrival time T of the envelope peak.
    pub center_time: f64,
    /// Gaussian duration σ > 0.
    pub sigma: f64,
    /// Carrier frequency Ω > 0.
    pub carrier: f64,
    /// Wave vector with |k| = Ω/c.
    pub wave_vector: [f64; 3],
    /// Real unit polarization vector, orthogonal to k.
    pub polarization: [f64; 3],
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Pulse {
    /// Build a validated pulse.
    ///
    /// `direction` is the propagation direction (any nonzero length; it is
    /// normalized and scaled to |k| = Ω/c). `polarization` is normalized and
    /// must be orthogonal to the direction within 1e−12 after normalization.
    ///
    /// # Errors
    /// [`VmiError::InvalidModel`] on σ ≤ 0, Ω ≤ 0, c ≤ 0, zero direction or
    /// polarization, or non-transverse polarization.
    pub fn new(
        amplitude: Complex64,
        center_time: f64,
        sigma: f64,
        carrier: f64,
        direction: [f64; 3],
        polarization: [f64; 3],
        speed_of_light: f64,
    ) -> Result<Pulse> {
        let mut violations = Vec::new();
        if !(sigma > 0.0) || !sigma.is_finite() {
            violations.push(format!("pulse duration must be positive, got {sigma}"));
        }
        if !(carrier > 0.0) || !carrier.is_finite() {
            violations.push(format!("carrier frequency must be positive, got {carrier}"));
        }
        if !(speed_of_light > 0.0) || !speed_of_light.is_finite() {
            violations.push(format!(
                "propagation speed must be positive, got {speed_of_light}"
            ));
        }
        let dn = norm3(direction);
        if !(dn > 0.0) || !dn.is_finite() {
            violations.push("propagation direction must be a nonzero vector".to_string());
        }
        let pn = norm3(polarization);
        if !(pn > 0.0) || !pn.is_finite() {
            violations.push("polarization must be a nonzero vector".to_string());
        }
        if violations.is_empty() {
            let dir = [direction[0] / dn, direction[1] / dn, direction[2] / dn];
            let pol = [
                polarization[0] / pn,
                polarization[1] / pn,
                polarization[2] / pn,
            ];
            if dot3(dir, pol).abs() > 1e-12 {
                violations.push(format!(
                    "polarization must be transverse to the propagation direction \
                     (ε·k̂ = {:.3e})",
                    dot3(dir, pol)
                ));
            } else {
                let kmag = carrier / speed_of_light;
                return Ok(Pulse {
                    amplitude,
                    center_time,
                    sigma,
                    carrier,
                    wave_vector: [dir[0] * kmag, dir[1] * kmag, dir[2] * kmag],
                    polarization: pol,
                });
            }
        }
        Err(VmiError::InvalidModel(violations.join("; ")))
    }

    /// Time-domain envelope branch 𝓔^ζ(t); `zeta` must be ±1.
    pub fn envelope_time(&self, zeta: i8, t: f64) -> Complex64 {
        debug_assert!(zeta == 1 || zeta == -1);
        let u = t - self.center_time;
        let gauss = (-u * u / (2.0 * self.sigma * self.sigma)).exp();
        let plus = self.amplitude * gauss * Complex64::new(0.0, -self.carrier * u).exp();
        if zeta == 1 {
            plus
        } else {
            plus.conj()
        }
    }

    /// Frequency-domain envelope 𝓔^ζ(ω) = ∫dt 𝓔^ζ(t) e^{iζωt}.
    pub fn envelope_freq(&self, zeta: i8, omega: f64) -> Complex64 {
        debug_assert!(zeta == 1 || zeta == -1);
        let detuning = omega - self.carrier;
        let gauss = (-0.5 * self.sigma * self.sigma * detuning * detuning).exp();
        let plus = self.amplitude
            * (self.sigma * SQRT_TWO_PI * gauss)
            * Complex64::new(0.0, omega * self.center_time).exp();
        if zeta == 1 {
            plus
        } else {
            plus.conj()
        }
    }

    /// The pulse translated in time by `delta` (arrival at T + delta).
    pub fn shifted(&self, delta: f64) -> Pulse {
        let mut out = self.clone();
        out.center_time += delta;
        out
    }

    /// Support window (T − nσ·σ, T + nσ·σ) for quadrature bounds.
    pub fn support(&self, n_sigma: f64) -> (f64, f64) {
        (
            self.center_time - n_sigma * self.sigma,
            self.center_time + n_sigma * self.sigma,
        )
    }
}

/// Plane-wave spatial phase e^{i k·r}.
pub fn spatial_phase(k: [f64; 3], r: [f64; 3]) -> Complex64 {
    Complex64::new(0.0, dot3(k, r)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gk;
    use rand::Rng;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_pulse() -> Pulse {
        Pulse::new(
            c(1.3, -0.4),
            2.0,
            1.5,
            2.2,
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn wave_vector_magnitude_is_carrier_over_c() {
        let p = Pulse::new(
            c(1.0, 0.0),
            0.0,
            1.0,
            3.0,
            [0.0, 3.0, 4.0],
            [1.0, 0.0, 0.0],
            2.0,
        )
        .unwrap();
        let k = p.wave_vector;
        let kmag = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        assert!((kmag - 1.5).abs() < 1e-14);
        // Direction preserved.
        assert!((k[1] / kmag - 0.6).abs() < 1e-14);
        assert!((k[2] / kmag - 0.8).abs() < 1e-14);
    }

    #[test]
    fn envelope_branches_are_conjugate() {
        let p = sample_pulse();
        for &t in &[-1.0, 0.0, 2.0, 3.7] {
            let plus = p.envelope_time(1, t);
            let minus = p.envelope_time(-1, t);
            assert_eq!(minus, plus.conj());
        }
        for &w in &[0.5, 2.2, 4.0] {
            let plus = p.envelope_freq(1, w);
            let minus = p.envelope_freq(-1, w);
            assert_eq!(minus, plus.conj());
        }
    }

    #[test]
    fn both_frequency_branches_peak_at_positive_carrier() {
        let p = sample_pulse();
        for zeta in [1i8, -1] {
            let at_carrier = p.envelope_freq(zeta, p.carrier).norm();
            for &w in &[0.3, 1.0, 1.8, 2.6, 3.4, 5.0, -2.2] {
                assert!(
                    p.envelope_freq(zeta, w).norm() <= at_carrier + 1e-15,
                    "ζ = {zeta}: |𝓔(ω={w})| exceeds the carrier peak"
                );
            }
        }
    }

    #[test]
    fn frequency_envelope_matches_quadrature_transform() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for trial in 0..5 {
            let p = Pulse::new(
                c(rng.gen_range(0.2..2.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.4..2.5),
                rng.gen_range(1.0..4.0),
                [0.0, 0.0, 1.0],
                [0.0, 1.0, 0.0],
                1.0,
            )
            .unwrap();
            let (lo, hi) = p.support(12.0);
            for zeta in [1i8, -1] {
                let w = rng.gen_range(0.2..5.0);
                let ft = adaptive_gk(
                    &|t| {
                        p.envelope_time(zeta, t)
                            * Complex64::new(0.0, f64::from(zeta) * w * t).exp()
                    },
                    lo,
                    hi,
                    1e-10,
                    "pulse FT",
                )
                .unwrap()
                .value;
                let closed = p.envelope_freq(zeta, w);
                let scale = p.envelope_freq(zeta, p.carrier).norm();
                assert!(
                    (ft - closed).norm() <= 1e-8 * scale,
                    "trial {trial} ζ={zeta}: quadrature {ft} vs closed form {closed}"
                );
            }
        }
    }

    #[test]
    fn parseval_identity_holds() {
        // ∫|𝓔(t)|² dt = (1/2π) ∫|𝓔(ω)|² dω, both evaluated numerically.
        let p = sample_pulse();
        let (lo, hi) = p.support(12.0);
        let time_side = adaptive_gk(
            &|t| c(p.envelope_time(1, t).norm_sqr(), 0.0),
            lo,
            hi,
            1e-11,
            "Parseval time",
        )
        .unwrap()
        .value
        .re;
        let half_width = 12.0 / p.sigma;
        let freq_side = adaptive_gk(
            &|w| c(p.envelope_freq(1, w).norm_sqr(), 0.0),
            p.carrier - half_width,
            p.carrier + half_width,
            1e-11,
            "Parseval freq",
        )
        .unwrap()
        .value
        .re / (2.0 * std::f64::consts::PI);
        assert!(
            (time_side - freq_side).abs() <= 1e-10 * time_side,
            "Parseval: {time_side} vs {freq_side}"
        );
        // Cross-check against the closed form |A|²σ√π.
        let closed = p.amplitude.norm_sqr() * p.sigma * std::f64::consts::PI.sqrt();
        assert!((time_side - closed).abs() <= 1e-10 * closed);
    }

    #[test]
    fn envelope_is_negligible_beyond_six_sigma() {
        let p = sample_pulse();
        let bound = p.amplitude.norm() * (-18.0f64).exp();
        for &t in &[p.center_time - 6.0 * p.sigma, p.center_time + 6.0 * p.sigma] {
            assert!(p.envelope_time(1, t).norm() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn time_shift_multiplies_frequency_envelope_by_linear_phase() {
        let p = sample_pulse();
        let delta = 1.37;
        let q = p.shifted(delta);
        for zeta in [1i8, -1] {
            for &w in &[0.7, 2.2, 3.9] {
                let expect = p.envelope_freq(zeta, w)
                    * Complex64::new(0.0, f64::from(zeta) * w * delta).exp();
                let got = q.envelope_freq(zeta, w);
                assert!(
                    (got - expect).norm() <= 1e-13 * expect.norm().max(1e-30),
                    "shift phase mismatch at ζ={zeta}, ω={w}"
                );
            }
        }
    }

    #[test]
    fn invalid_pulses_are_rejected() {
        let ok = [0.0, 0.0, 1.0];
        let pol = [1.0, 0.0, 0.0];
        assert!(Pulse::new(c(1.0, 0.0), 0.0, -1.0, 1.0, ok, pol, 1.0).is_err());
        assert!(Pulse::new(c(1.0, 0.0), 0.0, 1.0, 0.0, ok, pol, 1.0).is_err());
        assert!(Pulse::new(c(1.0, 0.0), 0.0, 1.0, 1.0, [0.0; 3], pol, 1.0).is_err());
        assert!(Pulse::new(c(1.0, 0.0), 0.0, 1.0, 1.0, ok, [0.0; 3], 1.0).is_err());
        assert!(Pulse::new(c(1.0, 0.0), 0.0, 1.0, 1.0, ok, pol, -3.0).is_err());
        // Non-transverse polarization.
        let err = Pulse::new(c(1.0, 0.0), 0.0, 1.0, 1.0, ok, [0.1, 0.0, 1.0], 1.0).unwrap_err();
        assert!(err.to_string().contains("transverse"), "{err}");
        // A slightly unnormalized but transverse polarization is fine.
        assert!(Pulse::new(c(1.0, 0.0), 0.0, 1.0, 1.0, ok, [2.0, 0.0, 0.0], 1.0).is_ok());
    }

    #[test]
    fn spatial_phase_is_plane_wave() {
        let k = [0.0, 0.0, std::f64::consts::PI];
        assert!((spatial_phase(k, [0.0, 0.0, 1.0]) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((spatial_phase(k, [5.0, -3.0, 0.0]) - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(spatial_phase([0.0; 3], [1.0, 2.0, 3.0]), c(1.0, 0.0));
    }
}
