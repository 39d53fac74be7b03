//! Response functions ℱ(±Ω) and coherence integrals 𝒳, 𝒴, 𝒵 of one
//! interaction stage.
//!
//! All integrals are normalised by the stage's σ and evaluated in the
//! stage-local frame t = τ − τ_c. For stationary correlators the double
//! integral is reduced to a single integral over u = τ − τ′ by integrating the
//! switching overlap along s = (τ + τ′)/2 first (analytically for gaussian and
//! rectangular profiles). Otherwise, and on request, a nested adaptive
//! scheme splits the (τ, τ′) square along its diagonal.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlator::CorrelatorSpec;
use crate::detector::{GapConfig, SwitchingProfile, SwitchingShape};
use crate::error::{Error, Result};
use crate::quadrature::{self, geometric_points, NotConverged, Tolerance};

/// Upper bound on oscillation-keyed breakpoints per integral.
const MAX_PERIOD_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadPath {
    /// Separable path for stationary correlators, nested otherwise.
    #[default]
    Auto,
    Separable,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub max_depth: u32,
    pub path: QuadPath,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-4, max_depth: 40, path: QuadPath::Auto }
    }
}

impl QuadConfig {
    pub fn with_path(self, path: QuadPath) -> Self {
        Self { path, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid("quad.rel_tol", format!("must lie in (0, 1), got {}", self.rel_tol)));
        }
        if self.max_depth == 0 || self.max_depth > 60 {
            return Err(Error::invalid("quad.max_depth", format!("must lie in 1..=60, got {}", self.max_depth)));
        }
        Ok(())
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance::relative(self.rel_tol).with_max_depth(self.max_depth)
    }

    fn separable(&self, spec: &CorrelatorSpec) -> Result<bool> {
        match self.path {
            QuadPath::Auto => Ok(spec.is_stationary()),
            QuadPath::Generic => Ok(false),
            QuadPath::Separable if spec.is_stationary() => Ok(true),
            QuadPath::Separable => Err(Error::invalid("quad.path", "separable path needs a stationary correlator")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseWarning {
    /// Sudden switching: the coherence integrals (and ℱ itself) grow without
    /// bound as the regulator is removed.
    RectangularDivergence,
}

/// A value with its estimated absolute quadrature error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceIntegrals {
    pub x: Integral<Complex64>,
    pub y: Integral<Complex64>,
    pub z: Integral<Complex64>,
}

/// Per-entry absolute error estimates of a [`ResponseSet`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EntryErrors {
    pub f_plus_01: f64,
    pub f_minus_01: f64,
    pub f_plus_12: f64,
    pub f_minus_12: f64,
    pub x_int: f64,
    pub y_int: f64,
    pub z_int: f64,
}

/// The four response values and three coherence integrals of one stage.
/// Complex entries serialise as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseSet {
    pub stage: Stage,
    pub f_plus_01: f64,
    pub f_minus_01: f64,
    pub f_plus_12: f64,
    pub f_minus_12: f64,
    pub x_int: Complex64,
    pub y_int: Complex64,
    pub z_int: Complex64,
    /// Sum of the per-entry error estimates.
    pub quad_error: f64,
    pub errors: EntryErrors,
    pub warnings: Vec<ResponseWarning>,
}

impl ResponseSet {
    /// Build a set from bare response values, e.g. for closure algebra on
    /// synthetic inputs. Coherence integrals are zero.
    pub fn from_responses(stage: Stage, f_plus_01: f64, f_minus_01: f64, f_plus_12: f64, f_minus_12: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            stage,
            f_plus_01,
            f_minus_01,
            f_plus_12,
            f_minus_12,
            x_int: zero,
            y_int: zero,
            z_int: zero,
            quad_error: 0.0,
            errors: EntryErrors::default(),
            warnings: Vec::new(),
        }
    }

    /// The four ℱ values, in the order (+01, −01, +12, −12).
    pub fn responses(&self) -> [f64; 4] {
        [self.f_plus_01, self.f_minus_01, self.f_plus_12, self.f_minus_12]
    }

    pub fn has_warning(&self, w: ResponseWarning) -> bool {
        self.warnings.contains(&w)
    }
}

/// Warnings implied by the switching profile alone.
pub fn switching_warnings(chi: &SwitchingProfile) -> Vec<ResponseWarning> {
    match chi.shape() {
        SwitchingShape::Rectangular => vec![ResponseWarning::RectangularDivergence],
        _ => Vec::new(),
    }
}

/// ℱ(Ω) = (1/σ)∬ dτ dτ′ χ(τ)χ(τ′) e^{−iΩ(τ−τ′)} W(τ, τ′). Positive Ω is
/// excitation.
pub fn response(spec: &CorrelatorSpec, chi: &SwitchingProfile, omega: f64, quad: &QuadConfig) -> Result<Integral<f64>> {
    quad.validate()?;
    if quad.separable(spec)? {
        separable_response(spec, chi, omega, quad)
    } else {
        let est = nested(spec, chi, Region::Full, quad, |t, tp| Complex64::from_polar(1.0, -omega * (t - tp)), omega.abs())?;
        let re = est.value.re;
        let allowed = est.error.max(quad.rel_tol * re.abs());
        if est.value.im.abs() > allowed {
            return Err(Error::ComplexResponse { imag: est.value.im, error: est.error });
        }
        Ok(Integral { value: re, error: est.error })
    }
}

/// 𝒳, 𝒴, 𝒵 for gaps `g`, with kernels (in stage-local time)
/// 𝒳: e^{−i(Ω₁₂t + Ω₀₁t′)}, 𝒴: Θ(t − t′)e^{−i(Ω₀₁t + Ω₁₂t′)},
/// 𝒵: Θ(t′ − t)e^{−i(Ω₀₁t + Ω₁₂t′)}.
pub fn coherence_integrals(spec: &CorrelatorSpec, chi: &SwitchingProfile, g: &GapConfig, quad: &QuadConfig) -> Result<CoherenceIntegrals> {
    quad.validate()?;
    if quad.separable(spec)? {
        let x = separable_x(spec, chi, g, quad)?;
        let y = separable_y(spec, chi, g, quad)?;
        Ok(CoherenceIntegrals { x, y, z: Integral { value: y.value.conj(), error: y.error } })
    } else {
        let (a, b) = (g.omega01(), g.omega12());
        let w = g.omega02();
        let x = nested(spec, chi, Region::Full, quad, |t, tp| Complex64::from_polar(1.0, -(b * t + a * tp)), w)?;
        let y = nested(spec, chi, Region::Lower, quad, |t, tp| Complex64::from_polar(1.0, -(a * t + b * tp)), w)?;
        let z = nested(spec, chi, Region::Upper, quad, |t, tp| Complex64::from_polar(1.0, -(a * t + b * tp)), w)?;
        Ok(CoherenceIntegrals { x, y, z })
    }
}

/// All stage integrals, evaluated concurrently.
pub fn stage_response_set(spec: &CorrelatorSpec, chi: &SwitchingProfile, g: &GapConfig, stage: Stage, quad: &QuadConfig) -> Result<ResponseSet> {
    quad.validate()?;
    let omegas = [g.omega01(), -g.omega01(), g.omega12(), -g.omega12()];
    let (fs, coh) = rayon::join(
        || omegas.par_iter().map(|&w| response(spec, chi, w, quad)).collect::<Result<Vec<_>>>(),
        || coherence_integrals(spec, chi, g, quad),
    );
    let fs = fs?;
    let coh = coh?;
    let errors = EntryErrors {
        f_plus_01: fs[0].error,
        f_minus_01: fs[1].error,
        f_plus_12: fs[2].error,
        f_minus_12: fs[3].error,
        x_int: coh.x.error,
        y_int: coh.y.error,
        z_int: coh.z.error,
    };
    let quad_error = fs.iter().map(|f| f.error).sum::<f64>() + coh.x.error + coh.y.error + coh.z.error;
    Ok(ResponseSet {
        stage,
        f_plus_01: fs[0].value,
        f_minus_01: fs[1].value,
        f_plus_12: fs[2].value,
        f_minus_12: fs[3].value,
        x_int: coh.x.value,
        y_int: coh.y.value,
        z_int: coh.z.value,
        quad_error,
        errors,
        warnings: switching_warnings(chi),
    })
}

fn failure(e: NotConverged) -> Error {
    Error::QuadratureFailure { value: e.estimate.value.norm(), error: e.estimate.error, tolerance: e.tolerance }
}

/// Breakpoints on [0, upper]: geometric near the iε peak at u = 0, then one
/// per oscillation period of the fastest phase.
fn lag_points(upper: f64, epsilon: f64, omega: f64) -> Vec<f64> {
    let mut pts = geometric_points(0.0, upper, 0.0, epsilon, 4.0);
    if omega > 0.0 {
        let n = ((omega * upper / (2.0 * PI)).ceil() as usize).min(MAX_PERIOD_POINTS);
        pts.extend((1..n).map(|k| upper * k as f64 / n as f64));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
    }
    pts
}

/// Switching overlap along s at lag u:
/// ∫ ds χ(s + u/2) χ(s − u/2) cos(ν s), with χ in stage-local time.
///
/// The gaussian result omits the constant factor e^{−ν²σ²/4}, returned
/// separately by [`overlap_scale`] so that the lag integral keeps its
/// relative accuracy when that factor is tiny.
fn overlap(chi: &SwitchingProfile, u: f64, nu: f64) -> std::result::Result<f64, NotConverged> {
    let sigma = chi.sigma();
    let u = u.abs();
    match chi.shape() {
        SwitchingShape::Gaussian => Ok(sigma * PI.sqrt() * (-u * u / (4.0 * sigma * sigma)).exp()),
        SwitchingShape::Rectangular => {
            let len = (sigma - u).max(0.0);
            if nu == 0.0 {
                Ok(len)
            } else {
                Ok(2.0 * (0.5 * nu * len).sin() / nu)
            }
        }
        SwitchingShape::SmoothBump => {
            let a = 0.5 * (sigma - u);
            if a <= 0.0 {
                return Ok(0.0);
            }
            let tol = Tolerance { abs: 0.0, rel: 1e-10, l1_rel: 1e-13, max_depth: 30 };
            let f = |s: f64| chi.local_value(s + 0.5 * u) * chi.local_value(s - 0.5 * u) * (nu * s).cos();
            let pts: Vec<f64> = if nu > 0.0 {
                let n = ((nu * a / PI).ceil() as usize).clamp(1, MAX_PERIOD_POINTS);
                (0..=n).map(|k| a * k as f64 / n as f64).collect()
            } else {
                vec![0.0, a]
            };
            quadrature::integrate_real(f, &pts, tol).map(|(v, _)| 2.0 * v)
        }
    }
}

fn overlap_scale(chi: &SwitchingProfile, nu: f64) -> f64 {
    match chi.shape() {
        SwitchingShape::Gaussian => {
            let x = nu * chi.sigma();
            (-0.25 * x * x).exp()
        }
        _ => 1.0,
    }
}

/// (2/σ)·∫₀^U Re[e^{−iωu}W(u)]·overlap(u, ν) du. Used for ℱ (ν = 0) and 𝒳.
fn separable_real(spec: &CorrelatorSpec, chi: &SwitchingProfile, omega: f64, nu: f64, fastest: f64, quad: &QuadConfig) -> Result<Integral<f64>> {
    let upper = 2.0 * chi.half_window();
    let pts = lag_points(upper, spec.epsilon(), fastest);
    let inner_failure = RefCell::new(None);
    let f = |u: f64| {
        let k = overlap(chi, u, nu).unwrap_or_else(|e| {
            inner_failure.borrow_mut().get_or_insert(e);
            e.estimate.value.re
        });
        (Complex64::from_polar(1.0, -omega * u) * spec.stationary_value(u)).re * k
    };
    let (v, err) = quadrature::integrate_real(f, &pts, quad.tolerance()).map_err(failure)?;
    if let Some(e) = inner_failure.into_inner() {
        return Err(failure(e));
    }
    let c = 2.0 / chi.sigma() * overlap_scale(chi, nu);
    Ok(Integral { value: c * v, error: c * err })
}

fn separable_response(spec: &CorrelatorSpec, chi: &SwitchingProfile, omega: f64, quad: &QuadConfig) -> Result<Integral<f64>> {
    separable_real(spec, chi, omega, 0.0, omega.abs(), quad)
}

fn separable_x(spec: &CorrelatorSpec, chi: &SwitchingProfile, g: &GapConfig, quad: &QuadConfig) -> Result<Integral<Complex64>> {
    let nu = 0.5 * (g.omega12() - g.omega01());
    let r = separable_real(spec, chi, nu, g.omega02(), g.omega02(), quad)?;
    Ok(Integral { value: Complex64::new(r.value, 0.0), error: r.error })
}

/// 𝒴 = (1/σ)∫₀^U W(u) e^{−iμu} M(u) du with μ = (Ω₀₁ − Ω₁₂)/2.
fn separable_y(spec: &CorrelatorSpec, chi: &SwitchingProfile, g: &GapConfig, quad: &QuadConfig) -> Result<Integral<Complex64>> {
    let mu = 0.5 * (g.omega01() - g.omega12());
    let nu = g.omega02();
    let upper = 2.0 * chi.half_window();
    let pts = lag_points(upper, spec.epsilon(), nu);
    let inner_failure = RefCell::new(None);
    let f = |u: f64| {
        let m = overlap(chi, u, nu).unwrap_or_else(|e| {
            inner_failure.borrow_mut().get_or_insert(e);
            e.estimate.value.re
        });
        Complex64::from_polar(m, -mu * u) * spec.stationary_value(u)
    };
    let est = quadrature::integrate(f, &pts, quad.tolerance()).map_err(failure)?;
    if let Some(e) = inner_failure.into_inner() {
        return Err(failure(e));
    }
    let c = overlap_scale(chi, nu) / chi.sigma();
    Ok(Integral { value: est.value * c, error: est.error * c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Full,
    /// t′ < t.
    Lower,
    /// t′ > t.
    Upper,
}

/// (1/σ)∬ χ(t)χ(t′) kernel(t, t′) W(τ_c + t, τ_c + t′) over the window
/// square restricted to `region`, outer integral over t.
fn nested<K>(spec: &CorrelatorSpec, chi: &SwitchingProfile, region: Region, quad: &QuadConfig, kernel: K, fastest: f64) -> Result<Integral<Complex64>>
where
    K: Fn(f64, f64) -> Complex64,
{
    let h = chi.half_window();
    let tc = chi.center();
    let eps = spec.epsilon();
    let inner_tol = Tolerance::relative(1e-2 * quad.rel_tol).with_max_depth(quad.max_depth);
    let failed: RefCell<Option<Error>> = RefCell::new(None);
    let inner_err = RefCell::new(0.0f64);

    let inner = |t: f64| -> Complex64 {
        if failed.borrow().is_some() {
            return Complex64::new(0.0, 0.0);
        }
        let (lo, hi) = match region {
            Region::Full => (-h, h),
            Region::Lower => (-h, t),
            Region::Upper => (t, h),
        };
        if hi <= lo {
            return Complex64::new(0.0, 0.0);
        }
        let pts = geometric_points(lo, hi, t, eps, 4.0);
        let f = |tp: f64| {
            let w = match spec.wightman(tc + t, tc + tp) {
                Ok(w) => w,
                Err(e) => {
                    failed.borrow_mut().get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            };
            kernel(t, tp) * w * chi.local_value(tp)
        };
        match quadrature::integrate(f, &pts, inner_tol) {
            Ok(est) => {
                let mut e = inner_err.borrow_mut();
                *e = e.max(est.error);
                est.value * chi.local_value(t)
            }
            Err(e) => {
                failed.borrow_mut().get_or_insert(failure(e));
                Complex64::new(0.0, 0.0)
            }
        }
    };

    let mut pts = vec![-h, h];
    if fastest > 0.0 {
        let n = ((fastest * 2.0 * h / (2.0 * PI)).ceil() as usize).clamp(1, MAX_PERIOD_POINTS);
        pts = (0..=n).map(|k| -h + 2.0 * h * k as f64 / n as f64).collect();
    }
    let est = quadrature::integrate(inner, &pts, quad.tolerance()).map_err(failure)?;
    if let Some(e) = failed.into_inner() {
        return Err(e);
    }
    let sigma = chi.sigma();
    let error = (est.error + inner_err.into_inner() * 2.0 * h) / sigma;
    Ok(Integral { value: est.value / sigma, error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thermal(t: f64, eps: f64) -> CorrelatorSpec {
        CorrelatorSpec::inertial_thermal(t, eps).unwrap()
    }

    #[test]
    fn zero_frequency_symmetry() {
        let spec = thermal(1.0, 1e-3);
        let chi = SwitchingProfile::smooth_bump(0.0, 4.0).unwrap();
        let q = QuadConfig::default();
        let a = response(&spec, &chi, 0.0, &q).unwrap();
        let b = response(&spec, &chi, -0.0, &q).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn gaussian_overlap_closed_form_matches_quadrature() {
        let chi = SwitchingProfile::gaussian(0.0, 1.7).unwrap();
        for (u, nu) in [(0.0, 0.0), (0.9, 0.0), (2.5, 1.3), (4.0, 0.4)] {
            let tol = Tolerance { abs: 0.0, rel: 1e-12, l1_rel: 0.0, max_depth: 40 };
            let (num, _) = quadrature::integrate_real(
                |s| chi.local_value(s + 0.5 * u) * chi.local_value(s - 0.5 * u) * (nu * s).cos(),
                &[-20.0, 0.0, 20.0],
                tol,
            )
            .unwrap();
            let closed = overlap(&chi, u, nu).unwrap() * overlap_scale(&chi, nu);
            assert!((num - closed).abs() < 1e-10 * num.abs().max(1e-12), "u={u} nu={nu}: {num} vs {closed}");
        }
    }

    #[test]
    fn rectangular_overlap_closed_form() {
        let chi = SwitchingProfile::rectangular(0.0, 3.0).unwrap();
        let nu: f64 = 0.8;
        let u = 1.1;
        let a = 0.5 * (3.0 - u);
        let expect = 2.0 * (nu * a).sin() / nu;
        assert!((overlap(&chi, u, nu).unwrap() - expect).abs() < 1e-15);
        assert_eq!(overlap(&chi, 3.5, nu).unwrap(), 0.0);
        assert!(switching_warnings(&chi).contains(&ResponseWarning::RectangularDivergence));
    }

    #[test]
    fn vacuum_suppresses_excitation() {
        let spec = CorrelatorSpec::inertial_vacuum(1e-3).unwrap();
        let chi = SwitchingProfile::gaussian(0.0, 5.0).unwrap();
        let q = QuadConfig::default();
        let up = response(&spec, &chi, 1.0, &q).unwrap();
        let down = response(&spec, &chi, -1.0, &q).unwrap();
        assert!(up.value.abs() < 1e-4 * down.value);
        // Long-time de-excitation rate of an inertial detector: Ω/2π.
        assert!((down.value / (PI.sqrt()) - 1.0 / (2.0 * PI)).abs() < 1e-2 / (2.0 * PI));
    }

    #[test]
    fn separable_rejects_tabulated() {
        use crate::correlator::TabulatedCorrelator;
        let table = TabulatedCorrelator::sample(vec![-1.0, 1.0], vec![-1.0, 1.0], |_, _| Complex64::new(1.0, 0.0)).unwrap();
        let spec = CorrelatorSpec::tabulated(table, 1e-3).unwrap();
        let chi = SwitchingProfile::smooth_bump(0.0, 1.0).unwrap();
        let q = QuadConfig::default().with_path(QuadPath::Separable);
        assert!(matches!(response(&spec, &chi, 1.0, &q), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn constant_table_gives_switching_fourier_transform() {
        use crate::correlator::TabulatedCorrelator;
        let table = TabulatedCorrelator::sample(vec![-1.0, 1.0], vec![-1.0, 1.0], |_, _| Complex64::new(1.0, 0.0)).unwrap();
        let spec = CorrelatorSpec::tabulated(table, 1e-2).unwrap();
        let chi = SwitchingProfile::rectangular(0.0, 2.0).unwrap();
        let omega = 1.3;
        let f = response(&spec, &chi, omega, &QuadConfig::default()).unwrap();
        let ft = 2.0 * (omega).sin() / omega;
        assert!((f.value - ft * ft / 2.0).abs() < 1e-5);
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        let q = QuadConfig { rel_tol: 0.0, ..QuadConfig::default() };
        assert!(q.validate().is_err());
    }
}
