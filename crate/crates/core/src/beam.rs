//! Beam problem definition: moving-load PDE residual, delta-function models,
//! closed-form modal series with resonance handling, and the error metric.
//!
//! The governing equation is Euler-Bernoulli bending under a point load
//! moving at constant speed: m u_tt + EI u_xxxx = p delta(x - v t), simply
//! supported (u = u_xx = 0 at both ends), starting from rest. Damping terms
//! are accepted in the configuration but must be zero; the closed-form series
//! below is only valid without them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::DerivBundle;

/// Number of series terms used for ground-truth generation unless a caller
/// asks otherwise; the n^-4 tail is then below 2e-7 of the lead term.
pub const DEFAULT_N_TERMS: usize = 200;

/// Threshold on |1 - S_n^2| below which a mode is treated as resonant.
pub const DEFAULT_RESONANCE_EPS: f64 = 1e-8;

/// Default tolerance of the discrete (indicator) delta model.
pub const DEFAULT_DISCRETE_TOL: f64 = 1e-12;

/// Standard deviation making the Gaussian delta's peak exactly 1.
pub fn default_sigma() -> f64 {
    1.0 / (2.0 * std::f64::consts::PI).sqrt()
}

/// Physical constants and the space-time domain.
///
/// `ei` is the flexural rigidity E*I stored as one number; the factors are
/// never needed separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    /// Mass per unit length.
    pub m: f64,
    /// External damping coefficient; must be zero.
    pub c_e: f64,
    /// Internal damping coefficient; must be zero.
    pub c_i: f64,
    /// Flexural rigidity E*I.
    pub ei: f64,
    /// Beam length.
    pub length: f64,
    /// Load magnitude.
    pub p: f64,
    /// Load speed.
    pub v: f64,
    /// Final time; the load must stay on the beam until then.
    pub t_end: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            m: 1.0,
            c_e: 0.0,
            c_i: 0.0,
            ei: 1.0,
            length: std::f64::consts::PI,
            p: 1.0,
            v: 1.0,
            t_end: std::f64::consts::FRAC_PI_2,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !(self.ei > 0.0) || !(self.length > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Config(format!(
                "beam constants must be positive: m={}, ei={}, length={}, t_end={}",
                self.m, self.ei, self.length, self.t_end
            )));
        }
        if self.v < 0.0 || !self.v.is_finite() {
            return Err(Error::Config(format!("load speed must be >= 0, got {}", self.v)));
        }
        if self.c_e != 0.0 || self.c_i != 0.0 {
            return Err(Error::Config(format!(
                "damping is not supported: c_e={}, c_i={} (both must be 0)",
                self.c_e, self.c_i
            )));
        }
        if self.v * self.t_end > self.length {
            return Err(Error::Config(format!(
                "load leaves the beam: v*t_end = {} exceeds length {}",
                self.v * self.t_end,
                self.length
            )));
        }
        Ok(())
    }
}

/// Load regularization: a Gaussian density or the raw indicator.
///
/// The indicator variant is the failure-demonstration forcing: with random
/// collocation points its argument is almost surely nonzero, so the sampled
/// load vanishes everywhere and training sees no forcing at all.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DeltaModel {
    Gaussian {
        #[serde(default)]
        mu: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Discrete {
        #[serde(default = "default_discrete_tol")]
        tol: f64,
    },
}

fn default_discrete_tol() -> f64 {
    DEFAULT_DISCRETE_TOL
}

impl Default for DeltaModel {
    fn default() -> Self {
        DeltaModel::Gaussian {
            mu: 0.0,
            sigma: default_sigma(),
        }
    }
}

impl DeltaModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaModel::Gaussian { sigma, mu } => {
                if !(sigma > 0.0) || !mu.is_finite() {
                    return Err(Error::Config(format!(
                        "gaussian delta needs sigma > 0 and finite mu, got sigma={sigma}, mu={mu}"
                    )));
                }
            }
            DeltaModel::Discrete { tol } => {
                if !(tol > 0.0) {
                    return Err(Error::Config(format!(
                        "discrete delta needs tol > 0, got {tol}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Delta value at argument z = x - v t.
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            DeltaModel::Gaussian { mu, sigma } => gaussian_delta(z, mu, sigma),
            DeltaModel::Discrete { tol } => discrete_delta(z, tol),
        }
    }
}

/// Gaussian density (1/(sigma sqrt(2 pi))) exp(-(x-mu)^2 / (2 sigma^2)).
pub fn gaussian_delta(x: f64, mu: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Indicator delta: 1 when |arg| < tol, else 0.
pub fn discrete_delta(arg: f64, tol: f64) -> f64 {
    debug_assert!(tol > 0.0);
    if arg.abs() < tol {
        1.0
    } else {
        0.0
    }
}

/// Per-mode frequencies: driving Omega_n = n v pi / L, natural
/// omega_n = n^2 pi^2 / L^2 sqrt(EI / m), and their ratio S_n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModalConstants {
    pub n: usize,
    pub driving_freq: f64,
    pub natural_freq: f64,
    pub speed_ratio: f64,
}

pub fn modal_constants(n: usize, beam: &BeamConfig) -> Result<ModalConstants> {
    if n < 1 {
        return Err(Error::Usage("mode index must be >= 1".into()));
    }
    let pi = std::f64::consts::PI;
    let nf = n as f64;
    let driving_freq = nf * beam.v * pi / beam.length;
    let natural_freq =
        nf * nf * pi * pi / (beam.length * beam.length) * (beam.ei / beam.m).sqrt();
    Ok(ModalConstants {
        n,
        driving_freq,
        natural_freq,
        speed_ratio: driving_freq / natural_freq,
    })
}

/// sin(n pi x / L) with exact zeros at both ends.
///
/// In floating point sin(n*pi) is only ~1e-16 small, not zero; pinning the
/// endpoints keeps the boundary-value invariants literal.
pub fn sine_basis(n: usize, x: f64, length: f64) -> f64 {
    if x == 0.0 || x == length {
        0.0
    } else {
        ((n as f64) * std::f64::consts::PI * x / length).sin()
    }
}

/// Time bracket of one series mode away from resonance:
/// (sin(Omega t) - S sin(omega t)) / (1 - S^2).
pub fn generic_mode_response(c: &ModalConstants, t: f64) -> f64 {
    ((c.driving_freq * t).sin() - c.speed_ratio * (c.natural_freq * t).sin())
        / (1.0 - c.speed_ratio * c.speed_ratio)
}

/// L'Hopital limit of the bracket as S -> 1:
/// (sin(omega t) - omega t cos(omega t)) / 2.
pub fn resonant_mode_response(c: &ModalConstants, t: f64) -> f64 {
    let w = c.natural_freq;
    ((w * t).sin() - w * t * (w * t).cos()) / 2.0
}

/// Bracket with automatic resonance handling on |1 - S^2| < resonance_eps.
pub fn mode_response(c: &ModalConstants, t: f64, resonance_eps: f64) -> f64 {
    if (1.0 - c.speed_ratio * c.speed_ratio).abs() < resonance_eps {
        resonant_mode_response(c, t)
    } else {
        generic_mode_response(c, t)
    }
}

/// Truncated modal series for the undamped moving-load deflection:
/// u(x,t) = (2 p L^3 / (EI pi^4)) sum_n n^-4 sin(n pi x / L) B_n(t).
///
/// At the default parameters mode 1 is exactly resonant (S_1 = 1), so the
/// resonant branch is not an edge case here; it carries the lead term.
pub fn analytical_deflection(
    x: f64,
    t: f64,
    beam: &BeamConfig,
    n_terms: usize,
    resonance_eps: f64,
) -> f64 {
    debug_assert!(n_terms >= 1);
    let pi = std::f64::consts::PI;
    let prefactor =
        2.0 * beam.p * beam.length.powi(3) / (beam.ei * pi.powi(4));
    let mut sum = 0.0;
    for n in 1..=n_terms {
        let c = modal_constants(n, beam).expect("n >= 1");
        let nf = n as f64;
        sum += sine_basis(n, x, beam.length) * mode_response(&c, t, resonance_eps)
            / (nf * nf * nf * nf);
    }
    prefactor * sum
}

/// PDE residual m u_tt + EI u_xxxx - p delta(x - v t) from a derivative
/// bundle. Requires zero damping; the residual formula drops those terms.
pub fn pde_residual(
    d: &DerivBundle,
    x: f64,
    t: f64,
    beam: &BeamConfig,
    delta: &DeltaModel,
) -> Result<f64> {
    if beam.c_e != 0.0 || beam.c_i != 0.0 {
        return Err(Error::Config(format!(
            "residual requires zero damping: c_e={}, c_i={}",
            beam.c_e, beam.c_i
        )));
    }
    Ok(beam.m * d.u_tt + beam.ei * d.u_xxxx - beam.p * delta.eval(x - beam.v * t))
}

/// Relative error percent: 100 * ||pred - truth||_2 / ||truth||_2.
pub fn relative_error_percent(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Usage(format!(
            "relative error needs equal nonempty lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in pred.iter().zip(truth) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return Err(Error::Metric(
            "relative error against an all-zero truth is undefined".into(),
        ));
    }
    Ok(100.0 * (num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_peak_and_falloff() {
        let sigma = default_sigma();
        assert_relative_eq!(gaussian_delta(0.0, 0.0, sigma), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            gaussian_delta(sigma, 0.0, sigma),
            (-0.5f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn gaussian_mass_is_one() {
        // trapezoid over [mu - 8 sigma, mu + 8 sigma]
        for &sigma in &[default_sigma(), 0.05, 1e-3] {
            let mu = 0.3;
            let n = 40_000;
            let (a, b) = (mu - 8.0 * sigma, mu + 8.0 * sigma);
            let h = (b - a) / n as f64;
            let mut s = 0.5 * (gaussian_delta(a, mu, sigma) + gaussian_delta(b, mu, sigma));
            for i in 1..n {
                s += gaussian_delta(a + i as f64 * h, mu, sigma);
            }
            assert_relative_eq!(s * h, 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn gaussian_symmetric_and_decreasing() {
        let sigma = 0.2;
        let mu = 1.1;
        let mut prev = gaussian_delta(mu, mu, sigma);
        for i in 1..50 {
            let d = i as f64 * 0.05;
            let right = gaussian_delta(mu + d, mu, sigma);
            let left = gaussian_delta(mu - d, mu, sigma);
            assert_relative_eq!(right, left, max_relative = 1e-12);
            assert!(right < prev);
            prev = right;
        }
    }

    #[test]
    fn discrete_delta_cases() {
        assert_eq!(discrete_delta(0.0, 1e-12), 1.0);
        assert_eq!(discrete_delta(0.5, 1e-12), 0.0);
        assert_eq!(discrete_delta(1e-13, 1e-12), 1.0);
    }

    #[test]
    fn modal_constants_at_defaults() {
        let beam = BeamConfig::default();
        let c = modal_constants(2, &beam).unwrap();
        assert_relative_eq!(c.driving_freq, 2.0, max_relative = 1e-15);
        assert_relative_eq!(c.natural_freq, 4.0, max_relative = 1e-15);
        assert_relative_eq!(c.speed_ratio, 0.5, max_relative = 1e-15);
        let c = modal_constants(3, &beam).unwrap();
        assert_relative_eq!(c.driving_freq, 3.0, max_relative = 1e-15);
        assert_relative_eq!(c.natural_freq, 9.0, max_relative = 1e-15);
        assert_relative_eq!(c.speed_ratio, 1.0 / 3.0, max_relative = 1e-15);
        // mode 1 is exactly resonant at the defaults
        let c = modal_constants(1, &beam).unwrap();
        assert_eq!(c.speed_ratio, 1.0);
        assert!(modal_constants(0, &beam).is_err());
    }

    #[test]
    fn deflection_vanishes_on_boundaries_and_at_start() {
        let beam = BeamConfig::default();
        for &t in &[0.3, 1.0, PI / 2.0] {
            assert_eq!(analytical_deflection(0.0, t, &beam, 50, 1e-8), 0.0);
            assert_eq!(analytical_deflection(PI, t, &beam, 50, 1e-8), 0.0);
        }
        for &x in &[0.1, 1.0, 2.9] {
            assert_eq!(analytical_deflection(x, 0.0, &beam, 50, 1e-8), 0.0);
        }
    }

    // Golden values from an independent high-precision series evaluation
    // (40-digit arithmetic, resonance branch active for mode 1).
    #[test]
    fn deflection_matches_high_precision_goldens() {
        let beam = BeamConfig::default();
        let u200 = analytical_deflection(PI / 2.0, PI / 2.0, &beam, 200, 1e-8);
        assert_relative_eq!(u200, 0.3314520984091832, max_relative = 1e-13);
        let u1m = analytical_deflection(PI / 2.0, PI / 2.0, &beam, 1_000_000, 1e-8);
        assert_relative_eq!(u1m, 0.3314521116706366, max_relative = 1e-12);
        let u = analytical_deflection(PI / 4.0, PI / 3.0, &beam, 1_000_000, 1e-8);
        assert_relative_eq!(u, 0.14652232375964469, max_relative = 1e-12);
        let u = analytical_deflection(2.0, 1.2, &beam, 1_000_000, 1e-8);
        assert_relative_eq!(u, 0.09427158580318238, max_relative = 1e-12);
    }

    #[test]
    fn deflection_truncation_converges() {
        let beam = BeamConfig::default();
        let u = |n| analytical_deflection(1.1, 1.3, &beam, n, 1e-8);
        let d1 = (u(25) - u(50)).abs();
        let d2 = (u(50) - u(100)).abs();
        let d3 = (u(100) - u(200)).abs();
        assert!(d2 < d1 && d3 < d2);
        // tail scale: sum_{n>N} n^-4 ~ N^-3 / 3
        assert!(d3 < 1e-6);
    }

    #[test]
    fn resonance_branch_continuity() {
        // S = 1 - 1e-6 on mode 1 scale: generic and limit forms agree to 1e-4.
        let s = 1.0 - 1e-6;
        let c = ModalConstants {
            n: 1,
            natural_freq: 1.0,
            driving_freq: s,
            speed_ratio: s,
        };
        for i in 0..=100 {
            let t = i as f64 / 100.0 * PI / 2.0;
            let g = generic_mode_response(&c, t);
            let r = resonant_mode_response(&c, t);
            assert_relative_eq!(g, r, max_relative = 1e-4, epsilon = 1e-9);
        }
    }

    #[test]
    fn residual_of_zero_bundle_is_negative_load() {
        let beam = BeamConfig::default();
        let delta = DeltaModel::default();
        let d = DerivBundle::default();
        let r = pde_residual(&d, 0.0, 0.0, &beam, &delta).unwrap();
        assert_eq!(r, -1.0);
    }

    #[test]
    fn manufactured_solution_cancels_operator() {
        // u = sin(x) sin(t): u_tt = -u, u_xxxx = u, so the operator part
        // vanishes and the residual is exactly the negated load.
        let beam = BeamConfig::default();
        let delta = DeltaModel::default();
        for &(x, t) in &[(0.3_f64, 0.2_f64), (1.4, 1.0), (2.8, 0.6)] {
            let u = x.sin() * t.sin();
            let d = DerivBundle {
                u,
                u_t: x.sin() * t.cos(),
                u_tt: -u,
                u_x: x.cos() * t.sin(),
                u_xx: -u,
                u_xxxx: u,
            };
            let r = pde_residual(&d, x, t, &beam, &delta).unwrap();
            let g = gaussian_delta(x - t, 0.0, default_sigma());
            assert_relative_eq!(r, -g, max_relative = 1e-15);
        }
    }

    #[test]
    fn damping_is_rejected() {
        let beam = BeamConfig {
            c_e: 0.1,
            ..BeamConfig::default()
        };
        assert!(beam.validate().is_err());
        let d = DerivBundle::default();
        assert!(pde_residual(&d, 0.0, 0.0, &beam, &DeltaModel::default()).is_err());
    }

    #[test]
    fn domain_guard_rejects_load_leaving_beam() {
        let beam = BeamConfig {
            v: 3.0,
            ..BeamConfig::default()
        };
        assert!(beam.validate().is_err());
        assert!(BeamConfig::default().validate().is_ok());
    }

    #[test]
    fn relative_error_basics() {
        let truth = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(relative_error_percent(&truth, &truth).unwrap(), 0.0);
        let scaled: Vec<f64> = truth.iter().map(|v| v * 1.01).collect();
        assert_relative_eq!(
            relative_error_percent(&scaled, &truth).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert!(matches!(
            relative_error_percent(&[1.0], &[0.0]),
            Err(Error::Metric(_))
        ));
        assert!(matches!(
            relative_error_percent(&[1.0], &[1.0, 2.0]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            relative_error_percent(&[], &[]),
            Err(Error::Usage(_))
        ));
    }
}
