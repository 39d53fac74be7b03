//! Pullback Wightman functions W(τ, τ′) along detector trajectories.
//!
//! The built-in kinds are the 3+1 dimensional massless scalar two-point
//! functions for an inertial detector in the vacuum, a uniformly accelerated
//! detector in the vacuum, and an inertial detector in a thermal state. All
//! three are stationary and are evaluated at Δτ − iε. A fourth kind accepts a
//! user-supplied table on a rectangular (τ, τ′) grid.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::detector::SwitchingProfile;
use crate::error::{Error, Result};
use crate::response::{self, QuadConfig};

/// Default regulator ε = 10⁻³·min(σ, 1/Ω_max).
pub fn default_epsilon(sigma: f64, omega_max: f64) -> f64 {
    1e-3 * sigma.min(1.0 / omega_max)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelatorKind {
    InertialVacuum,
    AcceleratedVacuum { acceleration: f64 },
    InertialThermal { temperature: f64 },
    UserTabulated(Arc<TabulatedCorrelator>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSpec {
    kind: CorrelatorKind,
    epsilon: f64,
    stationary: bool,
}

impl CorrelatorSpec {
    pub fn new(kind: CorrelatorKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::DegenerateRegulator(epsilon));
        }
        match &kind {
            CorrelatorKind::AcceleratedVacuum { acceleration } if !(*acceleration > 0.0 && acceleration.is_finite()) => {
                return Err(Error::invalid("acceleration", format!("must be positive, got {acceleration}")));
            }
            CorrelatorKind::InertialThermal { temperature } if !(*temperature > 0.0 && temperature.is_finite()) => {
                return Err(Error::invalid("temperature", format!("must be positive, got {temperature}")));
            }
            _ => {}
        }
        let stationary = !matches!(kind, CorrelatorKind::UserTabulated(_));
        let spec = Self { kind, epsilon, stationary };
        if let Some(beta) = spec.beta() {
            if epsilon >= 0.5 * beta {
                return Err(Error::invalid("epsilon", format!("regulator {epsilon} must be below β/2 = {}", 0.5 * beta)));
            }
        }
        Ok(spec)
    }

    pub fn inertial_vacuum(epsilon: f64) -> Result<Self> {
        Self::new(CorrelatorKind::InertialVacuum, epsilon)
    }

    pub fn accelerated_vacuum(acceleration: f64, epsilon: f64) -> Result<Self> {
        Self::new(CorrelatorKind::AcceleratedVacuum { acceleration }, epsilon)
    }

    pub fn inertial_thermal(temperature: f64, epsilon: f64) -> Result<Self> {
        Self::new(CorrelatorKind::InertialThermal { temperature }, epsilon)
    }

    pub fn tabulated(table: TabulatedCorrelator, epsilon: f64) -> Result<Self> {
        Self::new(CorrelatorKind::UserTabulated(Arc::new(table)), epsilon)
    }

    pub fn kind(&self) -> &CorrelatorKind {
        &self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Whether W depends on τ − τ′ only.
    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kind.clone(), epsilon)
    }

    /// KMS temperature: T for the thermal state, a/2π for the accelerated
    /// vacuum.
    pub fn temperature(&self) -> Option<f64> {
        match self.kind {
            CorrelatorKind::InertialThermal { temperature } => Some(temperature),
            CorrelatorKind::AcceleratedVacuum { acceleration } => Some(acceleration / (2.0 * PI)),
            _ => None,
        }
    }

    fn beta(&self) -> Option<f64> {
        self.temperature().map(|t| 1.0 / t)
    }

    /// W(τ, τ′).
    pub fn wightman(&self, tau: f64, tau_prime: f64) -> Result<Complex64> {
        match &self.kind {
            CorrelatorKind::UserTabulated(table) => table.interpolate(tau, tau_prime),
            _ => Ok(self.stationary_value(tau - tau_prime)),
        }
    }

    /// W as a function of u = τ − τ′ for the stationary built-ins.
    ///
    /// # Panics
    /// On a tabulated correlator.
    pub fn stationary_value(&self, u: f64) -> Complex64 {
        let x = Complex64::new(u, -self.epsilon);
        match self.kind {
            CorrelatorKind::InertialVacuum => -1.0 / (4.0 * PI * PI * x * x),
            CorrelatorKind::InertialThermal { temperature } => {
                let z = x * (PI * temperature);
                -(temperature * temperature / 4.0) * csch2(z)
            }
            CorrelatorKind::AcceleratedVacuum { acceleration } => {
                let z = x * (0.5 * acceleration);
                -(acceleration * acceleration / (16.0 * PI * PI)) * csch2(z)
            }
            CorrelatorKind::UserTabulated(_) => panic!("stationary_value called on a tabulated correlator"),
        }
    }
}

/// 1/sinh²(z), evaluated without overflow for large |Re z|.
fn csch2(z: Complex64) -> Complex64 {
    let z = if z.re < 0.0 { -z } else { z };
    if z.re > 1.0 {
        let w = (-2.0 * z).exp();
        4.0 * w / ((1.0 - w) * (1.0 - w))
    } else {
        let s = z.sinh();
        1.0 / (s * s)
    }
}

/// W sampled on a rectangular (τ, τ′) grid, bilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCorrelator {
    taus: Vec<f64>,
    tau_primes: Vec<f64>,
    /// Row-major: index `i * tau_primes.len() + j`.
    values: Vec<Complex64>,
}

impl TabulatedCorrelator {
    pub fn new(taus: Vec<f64>, tau_primes: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if taus.len() < 2 || tau_primes.len() < 2 {
            return Err(Error::Table("need at least two distinct values of tau and tau_prime".into()));
        }
        if !sorted(&taus) || !sorted(&tau_primes) {
            return Err(Error::Table("grid coordinates must be strictly increasing".into()));
        }
        if values.len() != taus.len() * tau_primes.len() {
            return Err(Error::Table(format!(
                "expected {} values for a {}x{} grid, got {}",
                taus.len() * tau_primes.len(),
                taus.len(),
                tau_primes.len(),
                values.len()
            )));
        }
        Ok(Self { taus, tau_primes, values })
    }

    /// Build a table by sampling `f` on the given grid.
    pub fn sample(taus: Vec<f64>, tau_primes: Vec<f64>, mut f: impl FnMut(f64, f64) -> Complex64) -> Result<Self> {
        let values = taus.iter().flat_map(|&t| tau_primes.iter().map(move |&tp| (t, tp))).map(|(t, tp)| f(t, tp)).collect();
        Self::new(taus, tau_primes, values)
    }

    /// Parse CSV with header `tau,tau_prime,re_w,im_w`; rows may come in any
    /// order but must cover the full grid exactly once.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Table(format!("missing column `{name}`")))
        };
        let (ct, ctp, cre, cim) = (col("tau")?, col("tau_prime")?, col("re_w")?, col("im_w")?);

        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Table(format!("row {}: column {} is not a number", line + 2, c + 1)))
            };
            rows.push((field(ct)?, field(ctp)?, Complex64::new(field(cre)?, field(cim)?)));
        }

        let unique = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let taus = unique(rows.iter().map(|r| r.0).collect());
        let tau_primes = unique(rows.iter().map(|r| r.1).collect());
        let n = taus.len() * tau_primes.len();
        if rows.len() != n {
            return Err(Error::Table(format!("{} rows do not form a full {}x{} grid", rows.len(), taus.len(), tau_primes.len())));
        }
        let mut values = vec![None; n];
        for (t, tp, w) in rows {
            let i = taus.binary_search_by(|x| x.total_cmp(&t)).unwrap();
            let j = tau_primes.binary_search_by(|x| x.total_cmp(&tp)).unwrap();
            let slot = &mut values[i * tau_primes.len() + j];
            if slot.is_some() {
                return Err(Error::Table(format!("duplicate grid point ({t}, {tp})")));
            }
            *slot = Some(w);
        }
        let values = values.into_iter().map(|v| v.expect("grid fully covered")).collect();
        Self::new(taus, tau_primes, values)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.taus[0], *self.taus.last().unwrap())
    }

    pub fn tau_prime_range(&self) -> (f64, f64) {
        (self.tau_primes[0], *self.tau_primes.last().unwrap())
    }

    pub fn interpolate(&self, tau: f64, tau_prime: f64) -> Result<Complex64> {
        let locate = |grid: &[f64], x: f64| -> Option<(usize, f64)> {
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            if !(x >= lo && x <= hi) {
                return None;
            }
            let k = grid.partition_point(|g| *g <= x).clamp(1, grid.len() - 1) - 1;
            Some((k, (x - grid[k]) / (grid[k + 1] - grid[k])))
        };
        let outside = Error::OutsideTable { tau, tau_prime };
        let (i, s) = locate(&self.taus, tau).ok_or(outside)?;
        let (j, t) = locate(&self.tau_primes, tau_prime).ok_or(Error::OutsideTable { tau, tau_prime })?;
        let m = self.tau_primes.len();
        let v = |a: usize, b: usize| self.values[a * m + b];
        Ok(v(i, j) * ((1.0 - s) * (1.0 - t)) + v(i + 1, j) * (s * (1.0 - t)) + v(i, j + 1) * ((1.0 - s) * t) + v(i + 1, j + 1) * (s * t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmsCheck {
    pub measured_ratio: f64,
    pub expected_ratio: f64,
    pub rel_error: f64,
}

/// Compare ℱ(ω)/ℱ(−ω) at a gaussian switching of width `sigma` with the
/// detailed-balance value e^{−ω/T}.
pub fn kms_ratio_check(spec: &CorrelatorSpec, omega: f64, sigma: f64, quad: &QuadConfig) -> Result<KmsCheck> {
    let temperature = spec.temperature().ok_or(Error::NotThermal)?;
    let chi = SwitchingProfile::gaussian(0.0, sigma)?;
    let expected_ratio = (-omega / temperature).exp();
    if omega == 0.0 {
        return Ok(KmsCheck { measured_ratio: 1.0, expected_ratio, rel_error: 0.0 });
    }
    let up = response::response(spec, &chi, omega, quad)?;
    let down = response::response(spec, &chi, -omega, quad)?;
    let measured_ratio = up.value / down.value;
    Ok(KmsCheck { measured_ratio, expected_ratio, rel_error: (measured_ratio - expected_ratio).abs() / expected_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn specs(eps: f64) -> Vec<CorrelatorSpec> {
        vec![
            CorrelatorSpec::inertial_vacuum(eps).unwrap(),
            CorrelatorSpec::inertial_thermal(0.7, eps).unwrap(),
            CorrelatorSpec::accelerated_vacuum(1.3, eps).unwrap(),
        ]
    }

    #[test]
    fn vacuum_small_regulator_limit() {
        let s = CorrelatorSpec::inertial_vacuum(1e-9).unwrap();
        let w = s.wightman(1.0, 0.0).unwrap();
        let expect = -1.0 / (4.0 * PI * PI);
        assert!((w.re - expect).abs() < 1e-12);
        assert!((expect + 2.533e-2).abs() < 1e-5);
    }

    #[test]
    fn cold_thermal_matches_vacuum() {
        let eps = 1e-3;
        let vac = CorrelatorSpec::inertial_vacuum(eps).unwrap();
        let cold = CorrelatorSpec::inertial_thermal(1e-4, eps).unwrap();
        for u in [-3.0, -0.2, 0.0, 0.01, 0.5, 2.0] {
            let a = vac.stationary_value(u);
            let b = cold.stationary_value(u);
            assert!((a - b).norm() <= 1e-6 * a.norm(), "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn unruh_identification() {
        let eps = 1e-3;
        let a = 2.3;
        let acc = CorrelatorSpec::accelerated_vacuum(a, eps).unwrap();
        let th = CorrelatorSpec::inertial_thermal(a / (2.0 * PI), eps).unwrap();
        for k in -200..=200 {
            let u = 0.05 * k as f64;
            let x = acc.stationary_value(u);
            let y = th.stationary_value(u);
            assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300), "u={u}");
        }
    }

    #[test]
    fn large_separation_does_not_overflow() {
        let s = CorrelatorSpec::inertial_thermal(5.0, 1e-3).unwrap();
        let w = s.stationary_value(500.0);
        assert!(w.re.is_finite() && w.im.is_finite());
        assert!(w.norm() < 1e-300);
    }

    #[test]
    fn regulator_must_be_positive() {
        assert!(matches!(CorrelatorSpec::inertial_vacuum(0.0), Err(Error::DegenerateRegulator(_))));
        assert!(matches!(CorrelatorSpec::inertial_vacuum(-1e-3), Err(Error::DegenerateRegulator(_))));
        assert!(CorrelatorSpec::inertial_thermal(-1.0, 1e-3).is_err());
        assert!(CorrelatorSpec::accelerated_vacuum(0.0, 1e-3).is_err());
    }

    #[test]
    fn temperatures() {
        assert_eq!(CorrelatorSpec::inertial_thermal(0.4, 1e-3).unwrap().temperature(), Some(0.4));
        let t = CorrelatorSpec::accelerated_vacuum(2.0 * PI, 1e-3).unwrap().temperature().unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert_eq!(CorrelatorSpec::inertial_vacuum(1e-3).unwrap().temperature(), None);
        let q = QuadConfig::default();
        assert!(matches!(kms_ratio_check(&CorrelatorSpec::inertial_vacuum(1e-3).unwrap(), 1.0, 10.0, &q), Err(Error::NotThermal)));
    }

    #[test]
    fn kms_zero_frequency_is_exact() {
        let s = CorrelatorSpec::inertial_thermal(1.0, 1e-3).unwrap();
        let k = kms_ratio_check(&s, 0.0, 10.0, &QuadConfig::default()).unwrap();
        assert_eq!(k.measured_ratio, 1.0);
        assert_eq!(k.expected_ratio, 1.0);
    }

    #[test]
    fn table_round_trip_through_csv() {
        let th = CorrelatorSpec::inertial_thermal(1.0, 0.05).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect();
        let mut csv_text = String::from("tau,tau_prime,re_w,im_w\n");
        for &t in grid.iter().rev() {
            for &tp in &grid {
                let w = th.wightman(t, tp).unwrap();
                csv_text.push_str(&format!("{t:e},{tp:e},{:e},{:e}\n", w.re, w.im));
            }
        }
        let table = TabulatedCorrelator::from_csv(csv_text.as_bytes()).unwrap();
        assert_eq!(table.tau_range(), (-1.0, 1.0));
        let spec = CorrelatorSpec::tabulated(table, 0.05).unwrap();
        assert!(!spec.is_stationary());
        let exact = th.wightman(0.3, -0.2).unwrap();
        assert!((spec.wightman(0.3, -0.2).unwrap() - exact).norm() < 1e-9 * exact.norm());
        assert!(matches!(spec.wightman(1.5, 0.0), Err(Error::OutsideTable { .. })));
    }

    #[test]
    fn table_rejects_incomplete_grid() {
        let text = "tau,tau_prime,re_w,im_w\n0,0,1,0\n0,1,1,0\n1,0,1,0\n";
        assert!(TabulatedCorrelator::from_csv(text.as_bytes()).is_err());
        let text = "tau,re_w,im_w\n0,1,0\n";
        assert!(TabulatedCorrelator::from_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn bilinear_interpolation_is_exact_on_bilinear_data() {
        let f = |t: f64, tp: f64| Complex64::new(1.0 + 2.0 * t - tp + 0.5 * t * tp, t - 3.0 * tp);
        let table = TabulatedCorrelator::sample(vec![0.0, 0.4, 1.0], vec![-1.0, 0.0, 2.0], f).unwrap();
        for (t, tp) in [(0.1, -0.5), (0.7, 1.9), (1.0, 2.0), (0.0, -1.0)] {
            assert!((table.interpolate(t, tp).unwrap() - f(t, tp)).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn hermiticity_and_stationarity(t in -20.0f64..20.0, tp in -20.0f64..20.0, shift in -50.0f64..50.0) {
            for s in specs(1e-2) {
                let w = s.wightman(t, tp).unwrap();
                let wr = s.wightman(tp, t).unwrap();
                prop_assert!((w - wr.conj()).norm() <= 1e-12 * w.norm().max(1e-300));
                let ws = s.wightman(t + shift, tp + shift).unwrap();
                let tol = 1e-9 * w.norm().max(1e-300) * (1.0 + shift.abs());
                prop_assert!((w - ws).norm() <= tol, "{} vs {}", w, ws);
            }
        }

        #[test]
        fn positive_type(
            pts in proptest::collection::vec(-3.0f64..3.0, 2..7),
            re in proptest::collection::vec(-1.0f64..1.0, 7),
            im in proptest::collection::vec(-1.0f64..1.0, 7),
        ) {
            // Σ c̄ₖ cₗ W(τₖ, τₗ) ≥ −O(ε) for finite point sets.
            for s in specs(0.05) {
                let mut q = Complex64::new(0.0, 0.0);
                let mut scale = 0.0;
                for (k, &tk) in pts.iter().enumerate() {
                    for (l, &tl) in pts.iter().enumerate() {
                        let ck = Complex64::new(re[k], im[k]);
                        let cl = Complex64::new(re[l], im[l]);
                        let w = s.wightman(tk, tl).unwrap();
                        q += ck.conj() * cl * w;
                        scale += ck.norm() * cl.norm() * w.norm();
                    }
                }
                prop_assert!(q.re >= -1e-9 * scale, "quadratic form {} (scale {})", q, scale);
            }
        }
    }
}
