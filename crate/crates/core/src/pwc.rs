//! Effective temperatures and the positive work condition (PWC).
//!
//! With Ω₂₁ = −Ω₁₂ and ΔΩ₂₁ = −ΔΩ₁₂ the cycle extracts work iff
//! 𝒜(Ω₀₁)S(Ω₀₁)ΔΩ₀₁ + 𝒜(Ω₂₁)S(Ω₂₁)ΔΩ₂₁ > 0, where
//! S(Ω) = e^{Ωᴵᴵ/Tᴵᴵ(Ωᴵᴵ)} − e^{Ωᴵ/Tᴵ(Ωᴵ)} and 𝒜 is the harmonic combination
//! of σℱ over the two stages. Quadrants refer to the plane with S(Ω₂₁) on the
//! horizontal axis and S(Ω₀₁) on the vertical axis.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::detector::{classify_signs, GapSchedule, Sign, SignTriple};
use crate::error::{Error, Result};
use crate::response::ResponseSet;

/// Largest exponent accepted before reporting [`Error::Overflow`].
const MAX_EXPONENT: f64 = 700.0;

/// Signed effective temperature; infinite when ℱ(Ω) = ℱ(−Ω).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectiveTemperature {
    Finite(f64),
    Infinite,
}

impl EffectiveTemperature {
    /// Ω/T, zero for an infinite temperature.
    pub fn boltzmann_exponent(&self, omega: f64) -> f64 {
        match self {
            EffectiveTemperature::Finite(t) => omega / t,
            EffectiveTemperature::Infinite => 0.0,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            EffectiveTemperature::Finite(t) => Some(*t),
            EffectiveTemperature::Infinite => None,
        }
    }
}

impl Serialize for EffectiveTemperature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EffectiveTemperature::Finite(t) => s.serialize_f64(*t),
            EffectiveTemperature::Infinite => s.serialize_str("inf"),
        }
    }
}

/// 1/T = (1/Ω)·ln(ℱ(−Ω)/ℱ(Ω)).
pub fn effective_temperature(f_plus: f64, f_minus: f64, omega: f64) -> Result<EffectiveTemperature> {
    if !(f_plus > 0.0) {
        return Err(Error::NonPositiveResponse { which: "f_plus", value: f_plus });
    }
    if !(f_minus > 0.0) {
        return Err(Error::NonPositiveResponse { which: "f_minus", value: f_minus });
    }
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::invalid("omega", "effective temperature needs a nonzero frequency"));
    }
    let log_ratio = (f_minus / f_plus).ln();
    if log_ratio == 0.0 {
        Ok(EffectiveTemperature::Infinite)
    } else {
        Ok(EffectiveTemperature::Finite(omega / log_ratio))
    }
}

fn checked_exp(x: f64) -> Result<f64> {
    if x > MAX_EXPONENT {
        Err(Error::Overflow { exponent: x })
    } else {
        Ok(x.exp())
    }
}

/// S = e^{Ωᴵᴵ/Tᴵᴵ} − e^{Ωᴵ/Tᴵ}.
pub fn s_value(omega_i: f64, omega_ii: f64, t_i: EffectiveTemperature, t_ii: EffectiveTemperature) -> Result<f64> {
    Ok(checked_exp(t_ii.boltzmann_exponent(omega_ii))? - checked_exp(t_i.boltzmann_exponent(omega_i))?)
}

/// 𝒜 = [1/(σᴵℱᴵ) + 1/(σᴵᴵℱᴵᴵ)]⁻¹.
pub fn a_weight(f_i: f64, sigma_i: f64, f_ii: f64, sigma_ii: f64) -> Result<f64> {
    if !(f_i > 0.0) {
        return Err(Error::NonPositiveResponse { which: "f_i", value: f_i });
    }
    if !(f_ii > 0.0) {
        return Err(Error::NonPositiveResponse { which: "f_ii", value: f_ii });
    }
    let (x, y) = (sigma_i * f_i, sigma_ii * f_ii);
    Ok(x * y / (x + y))
}

/// θ = [𝒜(Ω₂₁)/𝒜(Ω₀₁)]·|ΔΩ₁₂/ΔΩ₀₁|; zero when ΔΩ₁₂ = 0.
pub fn theta_slope(a_01: f64, a_21: f64, delta01: f64, delta12: f64) -> Result<f64> {
    if delta01 == 0.0 {
        return Err(Error::ZeroDelta { which: "delta01" });
    }
    Ok(a_21 / a_01 * (delta12 / delta01).abs())
}

/// Quadrant of (S(Ω₂₁), S(Ω₀₁)); points on an axis go to the quadrant on
/// the non-negative side.
pub fn quadrant(s_21: f64, s_01: f64) -> u8 {
    match (s_21 >= 0.0, s_01 >= 0.0) {
        (true, true) => 1,
        (false, true) => 2,
        (false, false) => 3,
        (true, false) => 4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PwcInputs {
    pub s_01: f64,
    pub s_21: f64,
    pub a_01: f64,
    pub a_21: f64,
    pub delta01: f64,
    pub delta12: f64,
}

/// Reduced half-plane form S(Ω₀₁) > ±θ·S(Ω₂₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryForm {
    /// +1 for S(Ω₀₁) > θS(Ω₂₁), −1 for S(Ω₀₁) > −θS(Ω₂₁).
    pub orientation: i8,
    pub theta: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PwcVerdict {
    /// 𝒜(Ω₀₁)S(Ω₀₁)ΔΩ₀₁ + 𝒜(Ω₂₁)S(Ω₂₁)ΔΩ₂₁.
    pub lhs: f64,
    pub satisfied: bool,
    pub boundary: Option<BoundaryForm>,
}

/// General inequality, plus the reduced boundary form for triples with
/// ΔΩ₀₁ > 0. Triples with ΔΩ₀₁ < 0 are the stage-swapped images of those and
/// are judged by the general inequality alone.
pub fn evaluate_pwc(inputs: &PwcInputs, triple: SignTriple) -> Result<PwcVerdict> {
    let lhs = inputs.a_01 * inputs.s_01 * inputs.delta01 - inputs.a_21 * inputs.s_21 * inputs.delta12;
    let boundary = match triple.d01() {
        Sign::Plus => {
            let theta = theta_slope(inputs.a_01, inputs.a_21, inputs.delta01, inputs.delta12)?;
            let orientation: i8 = match triple.d12() {
                Sign::Plus => 1,
                Sign::Minus => -1,
            };
            let satisfied = inputs.s_01 > f64::from(orientation) * theta * inputs.s_21;
            Some(BoundaryForm { orientation, theta, satisfied })
        }
        Sign::Minus => None,
    };
    Ok(PwcVerdict { lhs, satisfied: lhs > 0.0, boundary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PwcReport {
    pub t_eff_i_01: EffectiveTemperature,
    pub t_eff_i_12: EffectiveTemperature,
    pub t_eff_ii_01: EffectiveTemperature,
    pub t_eff_ii_12: EffectiveTemperature,
    pub s_01: f64,
    pub s_21: f64,
    pub a_01: f64,
    pub a_21: f64,
    pub theta: f64,
    pub sign_triple: SignTriple,
    pub lhs: f64,
    pub pwc_satisfied: bool,
    /// Truth value of the reduced form, when one applies to the triple.
    pub boundary_satisfied: Option<bool>,
    pub quadrant: u8,
}

/// Assemble the PWC report of a cycle from its two response sets.
pub fn pwc_report(rs_i: &ResponseSet, rs_ii: &ResponseSet, sigma_i: f64, sigma_ii: f64, gaps: &GapSchedule) -> Result<PwcReport> {
    let triple = classify_signs(gaps)?;
    let (gi, gii) = (gaps.stage_i, gaps.stage_ii);
    let t_eff_i_01 = effective_temperature(rs_i.f_plus_01, rs_i.f_minus_01, gi.omega01())?;
    let t_eff_i_12 = effective_temperature(rs_i.f_plus_12, rs_i.f_minus_12, gi.omega12())?;
    let t_eff_ii_01 = effective_temperature(rs_ii.f_plus_01, rs_ii.f_minus_01, gii.omega01())?;
    let t_eff_ii_12 = effective_temperature(rs_ii.f_plus_12, rs_ii.f_minus_12, gii.omega12())?;

    // e^{Ω/T(Ω)} is ℱ(−Ω)/ℱ(Ω); at Ω₂₁ = −Ω₁₂ it is ℱ(Ω₁₂)/ℱ(−Ω₁₂). Using the
    // ratios directly avoids a round trip through T.
    let ratio = |num: f64, den: f64| checked_exp((num / den).ln());
    let s_01 = ratio(rs_ii.f_minus_01, rs_ii.f_plus_01)? - ratio(rs_i.f_minus_01, rs_i.f_plus_01)?;
    let s_21 = ratio(rs_ii.f_plus_12, rs_ii.f_minus_12)? - ratio(rs_i.f_plus_12, rs_i.f_minus_12)?;
    let a_01 = a_weight(rs_i.f_plus_01, sigma_i, rs_ii.f_plus_01, sigma_ii)?;
    let a_21 = a_weight(rs_i.f_minus_12, sigma_i, rs_ii.f_minus_12, sigma_ii)?;
    let theta = theta_slope(a_01, a_21, gaps.delta01(), gaps.delta12())?;
    let inputs = PwcInputs { s_01, s_21, a_01, a_21, delta01: gaps.delta01(), delta12: gaps.delta12() };
    let verdict = evaluate_pwc(&inputs, triple)?;
    Ok(PwcReport {
        t_eff_i_01,
        t_eff_i_12,
        t_eff_ii_01,
        t_eff_ii_12,
        s_01,
        s_21,
        a_01,
        a_21,
        theta,
        sign_triple: triple,
        lhs: verdict.lhs,
        pwc_satisfied: verdict.satisfied,
        boundary_satisfied: verdict.boundary.map(|b| b.satisfied),
        quadrant: quadrant(s_21, s_01),
    })
}

/// Rectangular sampling of the S(Ω₂₁)–S(Ω₀₁) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionGridSpec {
    pub s21_range: (f64, f64),
    pub s01_range: (f64, f64),
    pub n_s21: usize,
    pub n_s01: usize,
}

impl Default for RegionGridSpec {
    fn default() -> Self {
        Self { s21_range: (-1.0, 1.0), s01_range: (-1.0, 1.0), n_s21: 41, n_s01: 41 }
    }
}

impl RegionGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_s21 < 2 || self.n_s01 < 2 {
            return Err(Error::invalid("grid", "need at least two samples per axis"));
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(self.s21_range) || !ok(self.s01_range) {
            return Err(Error::invalid("grid", "ranges must be finite with min < max"));
        }
        Ok(())
    }

    pub fn s21_step(&self) -> f64 {
        (self.s21_range.1 - self.s21_range.0) / (self.n_s21 - 1) as f64
    }

    pub fn s01_step(&self) -> f64 {
        (self.s01_range.1 - self.s01_range.0) / (self.n_s01 - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionPoint {
    pub s21: f64,
    pub s01: f64,
    pub satisfied: bool,
}

/// Mark the PWC region of a sign triple with slope θ. Rows run over S(Ω₀₁)
/// (outer) and S(Ω₂₁) (inner).
pub fn region_grid(case: SignTriple, theta: f64, grid: &RegionGridSpec) -> Result<Vec<RegionPoint>> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::invalid("theta", format!("must be finite and non-negative, got {theta}")));
    }
    grid.validate()?;
    let s01_sign = case.d01().as_f64();
    let s21_sign = case.d12().as_f64();
    let (h21, h01) = (grid.s21_step(), grid.s01_step());
    let rows: Vec<Vec<RegionPoint>> = (0..grid.n_s01)
        .into_par_iter()
        .map(|i| {
            let s01 = grid.s01_range.0 + h01 * i as f64;
            (0..grid.n_s21)
                .map(|j| {
                    let s21 = grid.s21_range.0 + h21 * j as f64;
                    RegionPoint { s21, s01, satisfied: s01_sign * s01 - s21_sign * theta * s21 > 0.0 }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::GapConfig;
    use crate::response::Stage;
    use proptest::prelude::*;

    #[test]
    fn temperature_inverts_definition() {
        let t0: f64 = 0.7;
        let omega = 1.3;
        let t = effective_temperature(1.0, (omega / t0).exp(), omega).unwrap();
        assert!((t.finite().unwrap() - t0).abs() < 1e-14);
        assert_eq!(effective_temperature(0.5, 0.5, 1.0).unwrap(), EffectiveTemperature::Infinite);
        assert!(matches!(effective_temperature(0.0, 1.0, 1.0), Err(Error::NonPositiveResponse { .. })));
        assert!(effective_temperature(1.0, 0.5, 1.0).unwrap().finite().unwrap() < 0.0);
    }

    #[test]
    fn s_value_cases() {
        let t = EffectiveTemperature::Finite(0.5);
        assert_eq!(s_value(1.0, 1.0, t, t).unwrap(), 0.0);
        // Ωᴵᴵ/Tᴵᴵ < Ωᴵ/Tᴵ gives S < 0.
        let s = s_value(1.0, 0.5, EffectiveTemperature::Finite(0.5), EffectiveTemperature::Finite(0.5)).unwrap();
        assert!(s < 0.0);
        assert!(matches!(s_value(1.0, 1000.0, t, EffectiveTemperature::Finite(1.0)), Err(Error::Overflow { .. })));
    }

    #[test]
    fn a_weight_cases() {
        assert!((a_weight(0.3, 2.0, 0.3, 2.0).unwrap() - 0.3).abs() < 1e-15);
        let big = a_weight(1e12, 1.0, 0.2, 3.0).unwrap();
        assert!((big - 0.6).abs() < 1e-9);
        assert!(a_weight(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn theta_cases() {
        assert_eq!(theta_slope(2.0, 2.0, 0.3, -0.3).unwrap(), 1.0);
        assert_eq!(theta_slope(2.0, 1.0, 0.3, 0.0).unwrap(), 0.0);
        let a = theta_slope(1.0, 1.5, 0.4, 0.1).unwrap();
        let b = theta_slope(1.0, 1.5, 0.4, 0.2).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-15);
        assert!(matches!(theta_slope(1.0, 1.0, 0.0, 0.1), Err(Error::ZeroDelta { .. })));
    }

    #[test]
    fn quadrant_labels() {
        assert_eq!(quadrant(1.0, 1.0), 1);
        assert_eq!(quadrant(-1.0, 1.0), 2);
        assert_eq!(quadrant(-1.0, -1.0), 3);
        assert_eq!(quadrant(1.0, -1.0), 4);
    }

    fn triple(s: &str) -> SignTriple {
        s.parse().unwrap()
    }

    #[test]
    fn region_geometry() {
        let grid = RegionGridSpec::default();
        for p in region_grid(triple("+++"), 0.8, &grid).unwrap() {
            match quadrant(p.s21, p.s01) {
                2 if p.s21 < 0.0 && p.s01 > 0.0 => assert!(p.satisfied),
                4 if p.s21 > 0.0 && p.s01 < 0.0 => assert!(!p.satisfied),
                _ => {}
            }
        }
        let pts = region_grid(triple("+-+"), 0.8, &grid).unwrap();
        assert!(pts.iter().filter(|p| p.s21 < 0.0 && p.s01 < 0.0).all(|p| !p.satisfied));
        assert!(pts.iter().any(|p| p.s21 > 0.0 && p.s01 < 0.0 && p.satisfied));
        assert!(pts.iter().any(|p| p.s21 > 0.0 && p.s01 < 0.0 && !p.satisfied));
    }

    #[test]
    fn theta_one_splits_along_diagonal() {
        let grid = RegionGridSpec { n_s21: 11, n_s01: 11, ..Default::default() };
        for p in region_grid(triple("+++"), 1.0, &grid).unwrap() {
            assert_eq!(p.satisfied, p.s01 > p.s21);
        }
    }

    fn thermal_set(stage: Stage, t: f64, g: GapConfig, scale: f64) -> ResponseSet {
        let b = |w: f64| scale * w / (1.0 - (-w / t).exp());
        ResponseSet::from_responses(stage, b(g.omega01()) * (-g.omega01() / t).exp(), b(g.omega01()), b(g.omega12()) * (-g.omega12() / t).exp(), b(g.omega12()))
    }

    #[test]
    fn thermal_report_recovers_bath_temperatures() {
        let gi = GapConfig::new(1.0, 1.2).unwrap();
        let gii = GapConfig::new(0.8, 0.9).unwrap();
        let rs_i = thermal_set(Stage::I, 2.0, gi, 1.0);
        let rs_ii = thermal_set(Stage::II, 0.5, gii, 1.0);
        let r = pwc_report(&rs_i, &rs_ii, 3.0, 3.0, &GapSchedule::new(gi, gii)).unwrap();
        for (t, expect) in [(r.t_eff_i_01, 2.0), (r.t_eff_i_12, 2.0), (r.t_eff_ii_01, 0.5), (r.t_eff_ii_12, 0.5)] {
            assert!((t.finite().unwrap() - expect).abs() < 1e-12);
        }
        assert_eq!(r.sign_triple, triple("+++"));
        assert!(r.pwc_satisfied);
        assert_eq!(r.boundary_satisfied, Some(true));
    }

    proptest! {
        #[test]
        fn temperature_symmetric_in_omega(fp in 1e-3f64..10.0, fm in 1e-3f64..10.0, w in 0.01f64..5.0) {
            // T(−Ω) uses ℱ(Ω) and ℱ(−Ω) with their roles exchanged.
            let a = effective_temperature(fp, fm, w).unwrap();
            let b = effective_temperature(fm, fp, -w).unwrap();
            match (a, b) {
                (EffectiveTemperature::Finite(x), EffectiveTemperature::Finite(y)) => prop_assert!((x - y).abs() <= 1e-12 * x.abs()),
                (x, y) => prop_assert_eq!(x, y),
            }
        }

        #[test]
        fn a_weight_below_both(fi in 1e-3f64..10.0, si in 0.1f64..50.0, fii in 1e-3f64..10.0, sii in 0.1f64..50.0) {
            let a = a_weight(fi, si, fii, sii).unwrap();
            prop_assert!(a > 0.0 && a < (fi * si).min(fii * sii));
        }

        #[test]
        fn reduced_form_matches_general(
            s01 in -3.0f64..3.0, s21 in -3.0f64..3.0,
            a01 in 0.01f64..5.0, a21 in 0.01f64..5.0,
            d01 in 0.01f64..1.0, d12 in -1.0f64..1.0,
        ) {
            prop_assume!(d12 != 0.0 && d01 + d12 != 0.0);
            let gaps_triple = SignTriple::new(Sign::Plus, if d12 > 0.0 { Sign::Plus } else { Sign::Minus },
                if d01 + d12 > 0.0 { Sign::Plus } else { Sign::Minus }).unwrap();
            let v = evaluate_pwc(&PwcInputs { s_01: s01, s_21: s21, a_01: a01, a_21: a21, delta01: d01, delta12: d12 }, gaps_triple).unwrap();
            prop_assume!(v.lhs.abs() > 1e-12);
            prop_assert_eq!(v.satisfied, v.boundary.unwrap().satisfied);
        }
    }
}
