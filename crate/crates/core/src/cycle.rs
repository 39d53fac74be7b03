//! The four strokes of the qutrit Otto cycle.
//!
//! Stroke 1 changes the gaps from their stage-II to their stage-I values at
//! fixed populations, stroke 2 couples the detector to the field with the
//! stage-I switching, stroke 3 returns the gaps to stage II and stroke 4
//! couples with the stage-II switching. Works are done on the qutrit, heats
//! flow into it, and everything is kept to order λ².

use num_complex::Complex64;
use serde::Serialize;

use crate::correlator::CorrelatorSpec;
use crate::detector::{supports_disjoint, GapConfig, GapSchedule, QutritState, SwitchingProfile};
use crate::error::{Error, Result};
use crate::pwc::{self, PwcReport};
use crate::response::{stage_response_set, QuadConfig, ResponseSet, Stage};

/// Largest |δp| or |𝒞| accepted as perturbative.
pub const PERTURBATIVE_LIMIT: f64 = 0.1;

/// Default threshold above which a residual coherence is flagged.
pub const COHERENCE_FLAG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdiabaticStroke {
    /// Stroke 1: stage-II gaps to stage-I gaps.
    ToStageI,
    /// Stroke 3: stage-I gaps back to stage-II gaps.
    ToStageII,
}

/// Work done on the qutrit by a gap change at fixed populations.
pub fn adiabatic_work(state: &QutritState, s: &GapSchedule, direction: AdiabaticStroke) -> f64 {
    let w = (state.p1() + state.p2()) * s.delta01() + state.p2() * s.delta12();
    match direction {
        AdiabaticStroke::ToStageI => w,
        AdiabaticStroke::ToStageII => -w,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatExchange {
    pub q: f64,
    pub delta_p1: f64,
    pub delta_p2: f64,
    pub coherence: Complex64,
}

fn non_negative(x: f64) -> f64 {
    x.max(0.0)
}

/// Response values clamped at zero, in the order (+01, −01, +12, −12).
fn clamped(rs: &ResponseSet) -> [f64; 4] {
    rs.responses().map(non_negative)
}

/// Population shifts, coherence and heat of one isochoric stroke.
pub fn isochoric_heat(rs: &ResponseSet, state: &QutritState, g: &GapConfig, sigma: f64, lambda: f64) -> Result<HeatExchange> {
    let [fp01, fm01, fp12, fm12] = clamped(rs);
    let (p0, p1, p2) = (state.p0(), state.p1(), state.p2());
    let c = 0.5 * lambda * lambda * sigma;
    let delta_p2 = c * (p1 * fp12 - p2 * fm12);
    let delta_p1 = c * (p0 * fp01 - p1 * fm01 + p2 * fm12 - p1 * fp12);
    let coherence = (rs.x_int * p1 - rs.y_int * p0 - rs.z_int * p2) * c;
    let norm = delta_p1.abs().max(delta_p2.abs()).max(coherence.norm());
    if !(norm <= PERTURBATIVE_LIMIT) {
        return Err(Error::PerturbativeBreakdown { norm, limit: PERTURBATIVE_LIMIT });
    }
    let q = (delta_p1 + delta_p2) * g.omega01() + delta_p2 * g.omega12();
    Ok(HeatExchange { q, delta_p1, delta_p2, coherence })
}

/// Initial populations fixed by cycle closure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureSolution {
    pub p1: f64,
    pub p2: f64,
    pub xi: f64,
    pub response_i: ResponseSet,
    pub response_ii: ResponseSet,
}

/// σ-weighted response sums over both stages:
/// (Σσℱ(Ω₀₁), Σσℱ(−Ω₀₁), Σσℱ(Ω₁₂), Σσℱ(−Ω₁₂)), plus the per-stage terms.
struct Weighted {
    i: [f64; 4],
    ii: [f64; 4],
}

impl Weighted {
    fn new(rs_i: &ResponseSet, rs_ii: &ResponseSet, sigma_i: f64, sigma_ii: f64) -> Self {
        Self { i: clamped(rs_i).map(|f| sigma_i * f), ii: clamped(rs_ii).map(|f| sigma_ii * f) }
    }

    fn sum(&self, k: usize) -> f64 {
        self.i[k] + self.ii[k]
    }

    fn xi(&self) -> f64 {
        let (a, b, g, d) = (self.sum(0), self.sum(1), self.sum(2), self.sum(3));
        a * g + a * d + b * d
    }

    fn scale(&self) -> f64 {
        self.i.iter().chain(self.ii.iter()).fold(0.0f64, |m, x| m.max(*x))
    }
}

/// Solve δp₂ᴵ + δp₂ᴵᴵ = 0 and (δp₁ᴵ+δp₂ᴵ) + (δp₁ᴵᴵ+δp₂ᴵᴵ) = 0 for (p₁, p₂).
pub fn solve_closure(rs_i: &ResponseSet, rs_ii: &ResponseSet, sigma_i: f64, sigma_ii: f64) -> Result<ClosureSolution> {
    for (name, s) in [("sigma_i", sigma_i), ("sigma_ii", sigma_ii)] {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid(name, format!("must be positive, got {s}")));
        }
    }
    let w = Weighted::new(rs_i, rs_ii, sigma_i, sigma_ii);
    let xi = w.xi();
    let floor = 1e-24 * w.scale() * w.scale();
    if !(xi > floor) || !xi.is_finite() {
        return Err(Error::DegenerateClosure { xi });
    }
    let (a, g, d) = (w.sum(0), w.sum(2), w.sum(3));
    Ok(ClosureSolution { p1: a * d / xi, p2: a * g / xi, xi, response_i: rs_i.clone(), response_ii: rs_ii.clone() })
}

/// Stage-I shifts from the closed forms
/// δp₁ᴵ+δp₂ᴵ = λ²σᴵσᴵᴵΓ⁻¹·D·[ℱᴵ(Ω₀₁)ℱᴵᴵ(−Ω₀₁) − ℱᴵ(−Ω₀₁)ℱᴵᴵ(Ω₀₁)] and
/// δp₂ᴵ = λ²σᴵσᴵᴵΓ⁻¹·A·[ℱᴵ(Ω₁₂)ℱᴵᴵ(−Ω₁₂) − ℱᴵ(−Ω₁₂)ℱᴵᴵ(Ω₁₂)], with
/// A = Σσℱ(Ω₀₁), D = Σσℱ(−Ω₁₂) and Γ = 2Ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormShifts {
    pub gamma: f64,
    pub sum_i: f64,
    pub delta_p2_i: f64,
}

pub fn closed_form_shifts(rs_i: &ResponseSet, rs_ii: &ResponseSet, sigma_i: f64, sigma_ii: f64, lambda: f64) -> Result<ClosedFormShifts> {
    let w = Weighted::new(rs_i, rs_ii, sigma_i, sigma_ii);
    let xi = w.xi();
    if !(xi > 0.0) {
        return Err(Error::DegenerateClosure { xi });
    }
    let gamma = 2.0 * xi;
    let l2 = lambda * lambda;
    let sum_i = l2 / gamma * w.sum(3) * (w.i[0] * w.ii[1] - w.i[1] * w.ii[0]);
    let delta_p2_i = l2 / gamma * w.sum(0) * (w.i[2] * w.ii[3] - w.i[3] * w.ii[2]);
    Ok(ClosedFormShifts { gamma, sum_i, delta_p2_i })
}

/// ⟨W_ext⟩ = (δp₂ᴵ+δp₁ᴵ)ΔΩ₀₁ + δp₂ᴵΔΩ₁₂.
pub fn extracted_work(delta_p1_i: f64, delta_p2_i: f64, gaps: &GapSchedule) -> f64 {
    (delta_p1_i + delta_p2_i) * gaps.delta01() + delta_p2_i * gaps.delta12()
}

/// ⟨W_ext⟩ from the closed-form shifts alone.
pub fn closed_form_extracted_work(rs_i: &ResponseSet, rs_ii: &ResponseSet, sigma_i: f64, sigma_ii: f64, lambda: f64, gaps: &GapSchedule) -> Result<f64> {
    let s = closed_form_shifts(rs_i, rs_ii, sigma_i, sigma_ii, lambda)?;
    Ok(s.sum_i * gaps.delta01() + s.delta_p2_i * gaps.delta12())
}

/// `w_ext` equals −(w1 + w3) algebraically. It is evaluated from the stage-I
/// shifts because w1 and w3 are O(1) while their sum is O(λ²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrokeLedger {
    pub w1: f64,
    pub q2: f64,
    pub w3: f64,
    pub q4: f64,
    pub w_ext: f64,
    pub delta_p1_i: f64,
    pub delta_p2_i: f64,
    pub delta_p1_ii: f64,
    pub delta_p2_ii: f64,
    pub c_i: Complex64,
    pub c_ii: Complex64,
}

impl StrokeLedger {
    /// Run the four strokes from closure-determined populations.
    pub fn from_closure(closure: &ClosureSolution, gaps: &GapSchedule, sigma_i: f64, sigma_ii: f64, lambda: f64) -> Result<Self> {
        let state0 = QutritState::diagonal(closure.p1, closure.p2)?;
        let w1 = adiabatic_work(&state0, gaps, AdiabaticStroke::ToStageI);
        let heat_i = isochoric_heat(&closure.response_i, &state0, &gaps.stage_i, sigma_i, lambda)?;
        let state1 = QutritState::new(closure.p1 + heat_i.delta_p1, closure.p2 + heat_i.delta_p2, heat_i.coherence)?;
        let w3 = adiabatic_work(&state1, gaps, AdiabaticStroke::ToStageII);
        // To order λ², the stage-II shifts are driven by the initial populations.
        let heat_ii = isochoric_heat(&closure.response_ii, &state0, &gaps.stage_ii, sigma_ii, lambda)?;
        Ok(Self {
            w1,
            q2: heat_i.q,
            w3,
            q4: heat_ii.q,
            w_ext: extracted_work(heat_i.delta_p1, heat_i.delta_p2, gaps),
            delta_p1_i: heat_i.delta_p1,
            delta_p2_i: heat_i.delta_p2,
            delta_p1_ii: heat_ii.delta_p1,
            delta_p2_ii: heat_ii.delta_p2,
            c_i: heat_i.coherence,
            c_ii: heat_ii.coherence,
        })
    }

    /// max(|δp₂ᴵ + δp₂ᴵᴵ|, |Σδᴵ + Σδᴵᴵ|).
    pub fn closure_residual(&self) -> f64 {
        let r2 = (self.delta_p2_i + self.delta_p2_ii).abs();
        let r12 = (self.delta_p1_i + self.delta_p2_i + self.delta_p1_ii + self.delta_p2_ii).abs();
        r2.max(r12)
    }

    pub fn first_law_residual(&self) -> f64 {
        (self.w_ext - (self.q2 + self.q4)).abs()
    }

    pub fn residual_coherence(&self) -> Complex64 {
        self.c_i + self.c_ii
    }
}

/// Everything needed to run one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleConfig {
    pub gaps: GapSchedule,
    pub correlator_i: CorrelatorSpec,
    pub correlator_ii: CorrelatorSpec,
    pub switching_i: SwitchingProfile,
    pub switching_ii: SwitchingProfile,
    pub lambda: f64,
    pub quad: QuadConfig,
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !supports_disjoint(&self.switching_i, &self.switching_ii) {
            return Err(Error::invalid(
                "switching",
                "interaction windows overlap: need center_i + sigma_i/2 < center_ii - sigma_ii/2",
            ));
        }
        self.quad.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub ledger: StrokeLedger,
    pub closure: ClosureSolution,
    pub closed_form_w_ext: f64,
    pub first_law_residual: f64,
    pub closure_residual: f64,
    pub residual_coherence: Complex64,
    /// |𝒞ᴵ + 𝒞ᴵᴵ| above [`COHERENCE_FLAG`].
    pub coherence_flagged: bool,
    /// Absent when a gap change vanishes exactly (degenerate cycle).
    pub pwc: Option<PwcReport>,
    pub pwc_error: Option<String>,
}

/// Compute both response sets, solve closure and run the strokes.
pub fn run_cycle(cfg: &CycleConfig) -> Result<CycleReport> {
    cfg.validate()?;
    let (rs_i, rs_ii) = rayon::join(
        || stage_response_set(&cfg.correlator_i, &cfg.switching_i, &cfg.gaps.stage_i, Stage::I, &cfg.quad),
        || stage_response_set(&cfg.correlator_ii, &cfg.switching_ii, &cfg.gaps.stage_ii, Stage::II, &cfg.quad),
    );
    cycle_from_responses(rs_i?, rs_ii?, cfg.switching_i.sigma(), cfg.switching_ii.sigma(), cfg.lambda, &cfg.gaps)
}

/// The part of [`run_cycle`] after the response sets are known.
pub fn cycle_from_responses(rs_i: ResponseSet, rs_ii: ResponseSet, sigma_i: f64, sigma_ii: f64, lambda: f64, gaps: &GapSchedule) -> Result<CycleReport> {
    let closure = solve_closure(&rs_i, &rs_ii, sigma_i, sigma_ii)?;
    let ledger = StrokeLedger::from_closure(&closure, gaps, sigma_i, sigma_ii, lambda)?;

    // Size of a single term in the shift formulas.
    let max_f = rs_i.responses().iter().chain(rs_ii.responses().iter()).fold(0.0f64, |m, f| m.max(f.abs()));
    let shift_scale = 0.5 * lambda * lambda * sigma_i.max(sigma_ii) * max_f;
    let closure_residual = ledger.closure_residual();
    if closure_residual > 1e-9 * shift_scale {
        return Err(Error::ClosureViolation { residual: closure_residual });
    }
    let first_law_residual = ledger.first_law_residual();
    let closed_form_w_ext = closed_form_extracted_work(&rs_i, &rs_ii, sigma_i, sigma_ii, lambda, gaps)?;
    let residual_coherence = ledger.residual_coherence();
    let (pwc, pwc_error) = match pwc::pwc_report(&rs_i, &rs_ii, sigma_i, sigma_ii, gaps) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(CycleReport {
        ledger,
        closure,
        closed_form_w_ext,
        first_law_residual,
        closure_residual,
        residual_coherence,
        coherence_flagged: residual_coherence.norm() > COHERENCE_FLAG,
        pwc,
        pwc_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaps(a: (f64, f64), b: (f64, f64)) -> GapSchedule {
        GapSchedule::new(GapConfig::new(a.0, a.1).unwrap(), GapConfig::new(b.0, b.1).unwrap())
    }

    fn set(stage: Stage, f: [f64; 4]) -> ResponseSet {
        ResponseSet::from_responses(stage, f[0], f[1], f[2], f[3])
    }

    #[test]
    fn adiabatic_examples() {
        let s = gaps((1.3, 1.0), (1.0, 0.4));
        assert_eq!(adiabatic_work(&QutritState::ground(), &s, AdiabaticStroke::ToStageI), 0.0);
        let w = adiabatic_work(&QutritState::diagonal(1.0, 0.0).unwrap(), &s, AdiabaticStroke::ToStageI);
        assert!((w - 0.3).abs() < 1e-15);
        let st = QutritState::diagonal(0.2, 0.1).unwrap();
        let sum = adiabatic_work(&st, &s, AdiabaticStroke::ToStageI) + adiabatic_work(&st, &s, AdiabaticStroke::ToStageII);
        assert_eq!(sum, 0.0);
    }

    #[test]
    fn heat_examples() {
        let g = GapConfig::new(1.0, 1.5).unwrap();
        let st = QutritState::diagonal(0.3, 0.2).unwrap();
        let h = isochoric_heat(&set(Stage::I, [0.0; 4]), &st, &g, 2.0, 0.1).unwrap();
        assert_eq!((h.q, h.delta_p1, h.delta_p2), (0.0, 0.0, 0.0));

        let rs = set(Stage::I, [0.1, 0.4, 0.2, 0.5]);
        let st = QutritState::diagonal(1.0, 0.0).unwrap();
        let h = isochoric_heat(&rs, &st, &g, 2.0, 0.1).unwrap();
        assert!((h.delta_p2 - 0.5 * 0.01 * 2.0 * 0.2).abs() < 1e-15);

        let huge = isochoric_heat(&rs, &st, &g, 2.0, 10.0);
        assert!(matches!(huge, Err(Error::PerturbativeBreakdown { .. })));
    }

    #[test]
    fn heat_ignores_coherence_integrals() {
        let g = GapConfig::new(1.0, 1.5).unwrap();
        let st = QutritState::diagonal(0.3, 0.2).unwrap();
        let mut rs = set(Stage::I, [0.1, 0.4, 0.2, 0.5]);
        let a = isochoric_heat(&rs, &st, &g, 2.0, 0.1).unwrap();
        rs.x_int = Complex64::new(0.3, -0.1);
        rs.y_int = Complex64::new(-2.0, 5.0);
        rs.z_int = Complex64::new(1.0, 1.0);
        let b = isochoric_heat(&rs, &st, &g, 2.0, 0.1).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!((a.delta_p1, a.delta_p2), (b.delta_p1, b.delta_p2));
        assert_ne!(a.coherence, b.coherence);
    }

    #[test]
    fn identical_stages_produce_nothing() {
        let s = gaps((1.0, 1.0), (1.0, 1.0));
        let rs = set(Stage::I, [0.1, 0.3, 0.1, 0.3]);
        let r = cycle_from_responses(rs.clone(), ResponseSet { stage: Stage::II, ..rs }, 4.0, 4.0, 0.01, &s).unwrap();
        assert_eq!(r.ledger.w_ext, 0.0);
        assert!(r.ledger.q2.abs() < 1e-18 && r.ledger.q4.abs() < 1e-18);
        assert!(r.pwc.is_none());
    }

    #[test]
    fn gibbs_fixed_point() {
        let t: f64 = 0.8;
        let w: f64 = 1.1;
        let r = (-w / t).exp();
        let rs = set(Stage::I, [r * 0.4, 0.4, r * 0.4, 0.4]);
        let c = solve_closure(&rs, &ResponseSet { stage: Stage::II, ..rs.clone() }, 3.0, 5.0).unwrap();
        let p0 = 1.0 - c.p1 - c.p2;
        assert!((c.p1 / p0 - r).abs() < 1e-14);
        assert!((c.p2 / c.p1 - r).abs() < 1e-14);
    }

    #[test]
    fn degenerate_closure() {
        let z = set(Stage::I, [0.0; 4]);
        assert!(matches!(solve_closure(&z, &z, 1.0, 1.0), Err(Error::DegenerateClosure { .. })));
    }

    #[test]
    fn overlapping_windows_rejected() {
        let g = GapConfig::new(1.0, 1.0).unwrap();
        let spec = CorrelatorSpec::inertial_thermal(1.0, 1e-3).unwrap();
        let cfg = CycleConfig {
            gaps: GapSchedule::new(g, g),
            correlator_i: spec.clone(),
            correlator_ii: spec,
            switching_i: SwitchingProfile::smooth_bump(0.0, 2.0).unwrap(),
            switching_ii: SwitchingProfile::smooth_bump(1.5, 2.0).unwrap(),
            lambda: 0.01,
            quad: QuadConfig::default(),
        };
        assert!(matches!(run_cycle(&cfg), Err(Error::InvalidParameter { .. })));
    }

    fn responses() -> impl Strategy<Value = [f64; 4]> {
        proptest::array::uniform4(1e-3f64..2.0)
    }

    proptest! {
        #[test]
        fn closure_and_first_law(fi in responses(), fii in responses(), si in 0.5f64..20.0, sii in 0.5f64..20.0,
                                 a in (0.2f64..2.0, 0.2f64..2.0), b in (0.2f64..2.0, 0.2f64..2.0)) {
            let lambda = 1e-2;
            let s = gaps(a, b);
            let r = cycle_from_responses(set(Stage::I, fi), set(Stage::II, fii), si, sii, lambda, &s).unwrap();
            let c = &r.closure;
            prop_assert!(c.xi > 0.0);
            prop_assert!(c.p1 >= 0.0 && c.p2 >= 0.0 && c.p1 + c.p2 <= 1.0);
            let lam2sig = lambda * lambda * si.max(sii);
            prop_assert!(r.closure_residual < 1e-12 * lam2sig);
            let q = r.ledger.q2.abs().max(r.ledger.q4.abs()).max(1e-300);
            prop_assert!(r.first_law_residual < 1e-12 * q.max(r.ledger.w_ext.abs()));
            let w = r.ledger.w_ext;
            prop_assert!((w - r.closed_form_w_ext).abs() <= 1e-10 * w.abs().max(1e-14 * lam2sig));
        }

        #[test]
        fn closed_form_shifts_match_strokes(fi in responses(), fii in responses(), si in 0.5f64..20.0, sii in 0.5f64..20.0) {
            let s = gaps((1.0, 1.2), (0.8, 0.9));
            let r = cycle_from_responses(set(Stage::I, fi), set(Stage::II, fii), si, sii, 1e-2, &s).unwrap();
            let cf = closed_form_shifts(&r.closure.response_i, &r.closure.response_ii, si, sii, 1e-2).unwrap();
            let sum = r.ledger.delta_p1_i + r.ledger.delta_p2_i;
            let scale = 1e-4 * si.max(sii) * 2.0;
            prop_assert!((sum - cf.sum_i).abs() <= 1e-10 * scale);
            prop_assert!((r.ledger.delta_p2_i - cf.delta_p2_i).abs() <= 1e-10 * scale);
            prop_assert!(cf.gamma > 0.0);
        }
    }
}
