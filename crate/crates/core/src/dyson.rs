//! Second-order Dyson evolution of the full 3×3 density matrix.
//!
//! The field is traced out with the quasifree (Wick) rule, so only two-point
//! functions appear:
//!
//! ρ_out = ρ₀ + λ²[ Σ_{kl} w_k w_l W(τ_l, τ_k) J_k ρ₀ J_l
//!               − Σ_{kl} w_k w_l θ_{kl} W(τ_k, τ_l) J_k J_l ρ₀ + h.c. ]
//!
//! with J_k = Ĵₓ(t_k) in stage-local time, trapezoid weights w_k that include
//! χ(t_k), and θ_{kl} = 1 for k > l, ½ on the diagonal. The result is
//! hermitian and trace preserving by construction. A second pass on every
//! other grid point yields a Richardson estimate and a discretisation error.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::correlator::CorrelatorSpec;
use crate::cycle::isochoric_heat;
use crate::detector::{jx_interaction, GapConfig, QutritState, SwitchingProfile, E0, E1, E2};
use crate::error::{Error, Result};
use crate::response::{stage_response_set, QuadConfig, Stage};

type CMat = Matrix3<Complex64>;

pub const DEFAULT_LAMBDA: f64 = 1e-2;
pub const MIN_GRID: usize = 64;

/// Largest |Δρ| entry accepted as perturbative.
pub const PERTURBATIVE_LIMIT: f64 = 0.1;

/// Largest fine/coarse disagreement relative to max|Δρ|.
pub const GRID_TOLERANCE: f64 = 0.05;

/// ε/σ of sampled draws.
pub const DEFAULT_EPSILON_RATIO: f64 = 1.0 / 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub rho_out: CMat,
    pub grid_n: usize,
    pub lambda: f64,
    pub richardson_estimate: CMat,
    /// Entrywise |richardson − fine|.
    pub discretisation_error: Matrix3<f64>,
}

impl OracleResult {
    pub fn delta_p1(&self, rho0: &QutritState) -> f64 {
        self.richardson_estimate[(E1, E1)].re - rho0.p1()
    }

    pub fn delta_p2(&self, rho0: &QutritState) -> f64 {
        self.richardson_estimate[(E2, E2)].re - rho0.p2()
    }

    pub fn coherence(&self) -> Complex64 {
        self.richardson_estimate[(E2, E0)]
    }
}

/// Wightman values on the grid: `w[(k, l)] = W(τ_k, τ_l)`.
fn wightman_grid(spec: &CorrelatorSpec, taus: &[f64]) -> Result<Vec<Complex64>> {
    let n = taus.len();
    let mut w = vec![Complex64::new(0.0, 0.0); n * n];
    if spec.is_stationary() {
        let h = if n > 1 { taus[1] - taus[0] } else { 0.0 };
        let diffs: Vec<Complex64> = (0..n).map(|d| spec.stationary_value(h * d as f64)).collect();
        for k in 0..n {
            for l in 0..=k {
                w[k * n + l] = diffs[k - l];
                w[l * n + k] = diffs[k - l].conj();
            }
        }
    } else {
        for k in 0..n {
            for l in 0..=k {
                let v = spec.wightman(taus[k], taus[l])?;
                w[k * n + l] = v;
                w[l * n + k] = v.conj();
            }
        }
    }
    Ok(w)
}

/// λ⁻²·(ρ_out − ρ₀) on a uniform grid of `n + 1` points over the window.
fn second_order_shift(spec: &CorrelatorSpec, chi: &SwitchingProfile, g: &GapConfig, rho0: &CMat, n: usize) -> Result<CMat> {
    let h_win = chi.half_window();
    let step = 2.0 * h_win / n as f64;
    let ts: Vec<f64> = (0..=n).map(|k| -h_win + step * k as f64).collect();
    let taus: Vec<f64> = ts.iter().map(|t| chi.center() + t).collect();
    let weights: Vec<f64> = ts
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let end = if k == 0 || k == n { 0.5 } else { 1.0 };
            end * step * chi.local_value(t)
        })
        .collect();
    let js: Vec<CMat> = ts.iter().map(|&t| jx_interaction(t, g)).collect();
    let w = wightman_grid(spec, &taus)?;
    let m = n + 1;

    let mut a = CMat::zeros();
    let mut b = CMat::zeros();
    for l in 0..m {
        if weights[l] == 0.0 {
            continue;
        }
        let mut left = CMat::zeros();
        for k in 0..m {
            if weights[k] != 0.0 {
                left += js[k] * (w[l * m + k] * weights[k]);
            }
        }
        a += left * rho0 * js[l] * Complex64::from(weights[l]);
    }
    for k in 0..m {
        if weights[k] == 0.0 {
            continue;
        }
        let mut right = CMat::zeros();
        for l in 0..=k {
            if weights[l] != 0.0 {
                let theta = if l == k { 0.5 } else { 1.0 };
                right += js[l] * (w[k * m + l] * (theta * weights[l]));
            }
        }
        b -= js[k] * right * Complex64::from(weights[k]);
    }
    let b = b * rho0;
    Ok(a + b + b.adjoint())
}

/// Evolve `rho0` through one interaction stage to order λ².
pub fn evolve_second_order(
    spec: &CorrelatorSpec,
    chi: &SwitchingProfile,
    g: &GapConfig,
    rho0: &QutritState,
    lambda: f64,
    grid_n: usize,
) -> Result<OracleResult> {
    if grid_n < MIN_GRID || !grid_n.is_multiple_of(2) {
        return Err(Error::invalid("grid_n", format!("must be even and at least {MIN_GRID}, got {grid_n}")));
    }
    if !rho0.is_diagonal() {
        return Err(Error::invalid("rho0", "initial state must be diagonal"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be non-negative, got {lambda}")));
    }
    let r0 = rho0.to_matrix();
    if lambda == 0.0 {
        return Ok(OracleResult { rho_out: r0, grid_n, lambda, richardson_estimate: r0, discretisation_error: Matrix3::zeros() });
    }
    let (fine, coarse) = rayon::join(
        || second_order_shift(spec, chi, g, &r0, grid_n),
        || second_order_shift(spec, chi, g, &r0, grid_n / 2),
    );
    let l2 = Complex64::from(lambda * lambda);
    let fine = fine? * l2;
    let coarse = coarse? * l2;
    let rich = (fine * Complex64::from(4.0) - coarse) / Complex64::from(3.0);

    let size = fine.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if size > PERTURBATIVE_LIMIT {
        return Err(Error::PerturbativeBreakdown { norm: size, limit: PERTURBATIVE_LIMIT });
    }
    let disagreement = (fine - coarse).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if size > 0.0 && disagreement > GRID_TOLERANCE * size {
        return Err(Error::GridTooCoarse { grid_n, disagreement: disagreement / size });
    }
    let discretisation_error = (rich - fine).map(|z| z.norm());
    Ok(OracleResult { rho_out: r0 + fine, grid_n, lambda, richardson_estimate: r0 + rich, discretisation_error })
}

/// Bath of a randomized oracle draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DrawBath {
    Thermal { temperature: f64 },
    Accelerated { acceleration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleDraw {
    pub omega01: f64,
    pub omega12: f64,
    pub p1: f64,
    pub p2: f64,
    pub sigma: f64,
    pub bath: DrawBath,
    /// ε/σ.
    pub epsilon_ratio: f64,
}

impl OracleDraw {
    /// Sample a draw whose regulator ε = σ/25 is resolved by a 512-interval
    /// grid over a smooth-bump window and stays below a quarter of β.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let omega01 = rng.gen_range(0.3..1.5);
        let omega12 = rng.gen_range(0.3..1.5);
        let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        // Barycentric split of the simplex: p0 = lo, p1 = hi − lo, p2 = 1 − hi.
        let p1 = 0.05 + 0.85 * (hi - lo);
        let p2 = 0.05 + 0.85 * (1.0 - hi);
        let temperature: f64 = rng.gen_range(0.3..2.0);
        // Keep ε = σ/25 below β/4.
        let sigma = rng.gen_range(2.0..(25.0 / (4.0 * temperature)).min(8.0));
        let bath = if rng.gen_bool(0.5) {
            DrawBath::Thermal { temperature }
        } else {
            DrawBath::Accelerated { acceleration: 2.0 * std::f64::consts::PI * temperature }
        };
        let (p1, p2) = if p1 + p2 > 0.95 { (p1 * 0.95 / (p1 + p2), p2 * 0.95 / (p1 + p2)) } else { (p1, p2) };
        Self { omega01, omega12, p1, p2, sigma, bath, epsilon_ratio: DEFAULT_EPSILON_RATIO }
    }

    pub fn with_epsilon_ratio(self, epsilon_ratio: f64) -> Self {
        Self { epsilon_ratio, ..self }
    }

    pub fn epsilon(&self) -> f64 {
        self.sigma * self.epsilon_ratio
    }

    pub fn correlator(&self) -> Result<CorrelatorSpec> {
        match self.bath {
            DrawBath::Thermal { temperature } => CorrelatorSpec::inertial_thermal(temperature, self.epsilon()),
            DrawBath::Accelerated { acceleration } => CorrelatorSpec::accelerated_vacuum(acceleration, self.epsilon()),
        }
    }

    pub fn switching(&self) -> Result<SwitchingProfile> {
        SwitchingProfile::smooth_bump(0.0, self.sigma)
    }

    pub fn gaps(&self) -> Result<GapConfig> {
        GapConfig::new(self.omega01, self.omega12)
    }

    pub fn state(&self) -> Result<QutritState> {
        QutritState::diagonal(self.p1, self.p2)
    }
}

/// One compared quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Compared {
    pub closed_form: f64,
    pub oracle: f64,
    pub closed_form_error: f64,
    pub oracle_error: f64,
    /// |closed − oracle| / scale.
    pub rel_error: f64,
    pub passed: bool,
}

impl Compared {
    /// Pass when |a − b| ≤ max(rel_tol·scale, 3·(err_a + err_b)).
    fn new(closed_form: f64, oracle: f64, closed_form_error: f64, oracle_error: f64, scale: f64, rel_tol: f64) -> Self {
        let diff = (closed_form - oracle).abs();
        let allowed = (rel_tol * scale).max(3.0 * (closed_form_error + oracle_error));
        let rel_error = if scale > 0.0 { diff / scale } else { diff };
        Self { closed_form, oracle, closed_form_error, oracle_error, rel_error, passed: diff <= allowed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrawComparison {
    pub draw: OracleDraw,
    pub delta_p1: Compared,
    pub delta_p2: Compared,
    pub re_c: Compared,
    pub im_c: Compared,
    /// Largest off-diagonal entry outside the e₂–e₀ pair.
    pub forbidden_coherence: f64,
}

impl DrawComparison {
    pub fn passed(&self) -> bool {
        self.delta_p1.passed && self.delta_p2.passed && self.re_c.passed && self.im_c.passed
    }

    pub fn max_rel_error(&self) -> f64 {
        [self.delta_p1, self.delta_p2, self.re_c, self.im_c].iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }
}

/// Compare the closed-form stage shifts with the oracle for one draw.
/// Coherence components are judged against the scale |𝒞|.
pub fn compare_draw(draw: &OracleDraw, grid_n: usize, lambda: f64, quad: &QuadConfig, rel_tol: f64) -> Result<DrawComparison> {
    let spec = draw.correlator()?;
    let chi = draw.switching()?;
    let g = draw.gaps()?;
    let state = draw.state()?;
    let (rs, oracle) = rayon::join(
        || stage_response_set(&spec, &chi, &g, Stage::I, quad),
        || evolve_second_order(&spec, &chi, &g, &state, lambda, grid_n),
    );
    let rs = rs?;
    let oracle = oracle?;
    let heat = isochoric_heat(&rs, &state, &g, chi.sigma(), lambda)?;

    let c = 0.5 * lambda * lambda * chi.sigma();
    let e = rs.errors;
    let (p0, p1, p2) = (state.p0(), state.p1(), state.p2());
    let err_p2 = c * (p1 * e.f_plus_12 + p2 * e.f_minus_12);
    let err_p1 = c * (p0 * e.f_plus_01 + p1 * e.f_minus_01 + p2 * e.f_minus_12 + p1 * e.f_plus_12);
    let err_c = c * (p1 * e.x_int + p0 * e.y_int + p2 * e.z_int);
    let d = &oracle.discretisation_error;

    let dp1 = oracle.delta_p1(&state);
    let dp2 = oracle.delta_p2(&state);
    let coh = oracle.coherence();
    let c_scale = heat.coherence.norm();
    let r = &oracle.richardson_estimate;
    let forbidden = [r[(E1, E0)], r[(E0, E1)], r[(E2, E1)], r[(E1, E2)]].iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(DrawComparison {
        draw: *draw,
        delta_p1: Compared::new(heat.delta_p1, dp1, err_p1, d[(E1, E1)], heat.delta_p1.abs(), rel_tol),
        delta_p2: Compared::new(heat.delta_p2, dp2, err_p2, d[(E2, E2)], heat.delta_p2.abs(), rel_tol),
        re_c: Compared::new(heat.coherence.re, coh.re, err_c, d[(E2, E0)], c_scale, rel_tol),
        im_c: Compared::new(heat.coherence.im, coh.im, err_c, d[(E2, E0)], c_scale, rel_tol),
        forbidden_coherence: forbidden,
    })
}

/// Run `draws` independent comparisons concurrently, in draw order.
pub fn compare_draws(draws: &[OracleDraw], grid_n: usize, lambda: f64, quad: &QuadConfig, rel_tol: f64) -> Vec<Result<DrawComparison>> {
    draws.par_iter().map(|d| compare_draw(d, grid_n, lambda, quad, rel_tol)).collect()
}
