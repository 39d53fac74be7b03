//! Configuration builders shared by the integration tests.
#![allow(dead_code)]

use qutrit_otto::correlator::default_epsilon;
use qutrit_otto::{CorrelatorSpec, CycleConfig, GapConfig, GapSchedule, QuadConfig, SignTriple, SwitchingProfile};
use rand::Rng;

/// Gaussian switching for stage I at the origin and stage II one window later.
pub fn gaussian_pair(sigma_i: f64, sigma_ii: f64) -> (SwitchingProfile, SwitchingProfile) {
    let chi_i = SwitchingProfile::gaussian(0.0, sigma_i).unwrap();
    let probe = SwitchingProfile::gaussian(0.0, sigma_ii).unwrap();
    let center = 1.5 * (chi_i.half_window() + probe.half_window());
    (chi_i, probe.with_center(center))
}

/// Two thermal baths with gaussian switching and the default regulator,
/// scaled by `eps_factor`.
pub fn thermal_cycle(gaps: GapSchedule, t_i: f64, t_ii: f64, sigma_i: f64, sigma_ii: f64, eps_factor: f64) -> CycleConfig {
    let w = gaps.stage_i.max_frequency().max(gaps.stage_ii.max_frequency());
    let eps_i = eps_factor * default_epsilon(sigma_i, w);
    let eps_ii = eps_factor * default_epsilon(sigma_ii, w);
    let (switching_i, switching_ii) = gaussian_pair(sigma_i, sigma_ii);
    CycleConfig {
        gaps,
        correlator_i: CorrelatorSpec::inertial_thermal(t_i, eps_i).unwrap(),
        correlator_ii: CorrelatorSpec::inertial_thermal(t_ii, eps_ii).unwrap(),
        switching_i,
        switching_ii,
        lambda: 1e-2,
        quad: QuadConfig::default(),
    }
}

/// T_I = 2, T_II = 0.5, Ω₀₁: 0.8 → 1.0, Ω₁₂: 0.9 → 1.2, σ = 40. Stroke 1
/// takes the stage II gaps to the stage I gaps.
pub fn regression_config(eps_factor: f64) -> CycleConfig {
    let gaps = GapSchedule::new(GapConfig::new(1.0, 1.2).unwrap(), GapConfig::new(0.8, 0.9).unwrap());
    thermal_cycle(gaps, 2.0, 0.5, 40.0, 40.0, eps_factor)
}

/// Random gap schedule realising `triple`.
pub fn gaps_for<R: Rng>(rng: &mut R, triple: SignTriple) -> GapSchedule {
    loop {
        let a_ii = rng.gen_range(0.4..1.2);
        let b_ii = rng.gen_range(0.4..1.2);
        let d01 = triple.d01().as_f64() * rng.gen_range(0.05..0.4);
        let d12 = triple.d12().as_f64() * rng.gen_range(0.05..0.4);
        let (Ok(gi), Ok(gii)) = (GapConfig::new(a_ii + d01, b_ii + d12), GapConfig::new(a_ii, b_ii)) else {
            continue;
        };
        let gaps = GapSchedule::new(gi, gii);
        if qutrit_otto::detector::classify_signs(&gaps).ok() == Some(triple) {
            return gaps;
        }
    }
}

/// A random two-bath cycle realising `triple`.
pub fn random_cycle<R: Rng>(rng: &mut R, triple: SignTriple) -> CycleConfig {
    let gaps = gaps_for(rng, triple);
    let t_i = rng.gen_range(0.3..2.5);
    let t_ii = rng.gen_range(0.3..2.5);
    let sigma_i = rng.gen_range(5.0..30.0);
    let sigma_ii = rng.gen_range(5.0..30.0);
    thermal_cycle(gaps, t_i, t_ii, sigma_i, sigma_ii, 1.0)
}

/// Relative change |a − b| / |b|.
pub fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
