//! Algebraic structure of the ladder-type qutrit.
//!
//! Basis order is `{e₂, e₁, e₀}` everywhere (index 0 is the *highest* level),
//! which is the reverse of the natural energy order. The ground energy is
//! fixed at ε₀ = 0.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Row/column index of |e₂⟩.
pub const E2: usize = 0;
/// Row/column index of |e₁⟩.
pub const E1: usize = 1;
/// Row/column index of |e₀⟩.
pub const E0: usize = 2;

/// Level spacings of one stage. `omega02` is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapConfig {
    omega01: f64,
    omega12: f64,
}

impl GapConfig {
    pub fn new(omega01: f64, omega12: f64) -> Result<Self> {
        if !(omega01 > 0.0 && omega01.is_finite()) {
            return Err(Error::invalid("omega01", format!("must be a positive finite energy, got {omega01}")));
        }
        if !(omega12 > 0.0 && omega12.is_finite()) {
            return Err(Error::invalid("omega12", format!("must be a positive finite energy, got {omega12}")));
        }
        Ok(Self { omega01, omega12 })
    }

    pub fn omega01(&self) -> f64 {
        self.omega01
    }

    pub fn omega12(&self) -> f64 {
        self.omega12
    }

    pub fn omega02(&self) -> f64 {
        self.omega01 + self.omega12
    }

    /// Largest transition frequency of the stage (Ω₀₂).
    pub fn max_frequency(&self) -> f64 {
        self.omega02()
    }

    pub fn is_evenly_gapped(&self) -> bool {
        self.omega01 == self.omega12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    fn of(x: f64) -> Option<Sign> {
        if x > 0.0 {
            Some(Sign::Plus)
        } else if x < 0.0 {
            Some(Sign::Minus)
        } else {
            None
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Signs of (ΔΩ₀₁, ΔΩ₁₂, ΔΩ₀₂). Only the six triples compatible with
/// ΔΩ₀₂ = ΔΩ₀₁ + ΔΩ₁₂ can be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignTriple {
    d01: Sign,
    d12: Sign,
    d02: Sign,
}

impl SignTriple {
    pub const ALL: [SignTriple; 6] = [
        SignTriple { d01: Sign::Plus, d12: Sign::Plus, d02: Sign::Plus },
        SignTriple { d01: Sign::Plus, d12: Sign::Minus, d02: Sign::Plus },
        SignTriple { d01: Sign::Minus, d12: Sign::Plus, d02: Sign::Plus },
        SignTriple { d01: Sign::Plus, d12: Sign::Minus, d02: Sign::Minus },
        SignTriple { d01: Sign::Minus, d12: Sign::Plus, d02: Sign::Minus },
        SignTriple { d01: Sign::Minus, d12: Sign::Minus, d02: Sign::Minus },
    ];

    pub fn new(d01: Sign, d12: Sign, d02: Sign) -> Result<Self> {
        let t = SignTriple { d01, d12, d02 };
        if d01 == d12 && d02 != d01 {
            return Err(Error::invalid("sign_triple", format!("{t} is incompatible with ΔΩ₀₂ = ΔΩ₀₁ + ΔΩ₁₂")));
        }
        Ok(t)
    }

    pub fn d01(&self) -> Sign {
        self.d01
    }

    pub fn d12(&self) -> Sign {
        self.d12
    }

    pub fn d02(&self) -> Sign {
        self.d02
    }

    /// Triple of the cycle run in the opposite direction (stages swapped).
    pub fn reversed(&self) -> SignTriple {
        SignTriple { d01: self.d01.flip(), d12: self.d12.flip(), d02: self.d02.flip() }
    }
}

impl fmt::Display for SignTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.d01.symbol(), self.d12.symbol(), self.d02.symbol())
    }
}

impl Serialize for SignTriple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl FromStr for SignTriple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sym: Vec<char> = s.trim().chars().collect();
        let parse = |c: char| match c {
            '+' => Ok(Sign::Plus),
            '-' | '−' => Ok(Sign::Minus),
            _ => Err(Error::invalid("case", format!("unrecognised sign `{c}` in `{s}`"))),
        };
        if sym.len() != 3 {
            return Err(Error::invalid("case", format!("expected three signs, got `{s}`")));
        }
        SignTriple::new(parse(sym[0])?, parse(sym[1])?, parse(sym[2])?)
    }
}

/// Gap configurations of both isochoric stages.
///
/// The cycle starts at the stage-II gaps; the first adiabatic stroke moves
/// them to the stage-I values, so ΔΩ = Ωᴵ − Ωᴵᴵ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSchedule {
    pub stage_i: GapConfig,
    pub stage_ii: GapConfig,
}

impl GapSchedule {
    pub fn new(stage_i: GapConfig, stage_ii: GapConfig) -> Self {
        Self { stage_i, stage_ii }
    }

    pub fn delta01(&self) -> f64 {
        self.stage_i.omega01() - self.stage_ii.omega01()
    }

    pub fn delta12(&self) -> f64 {
        self.stage_i.omega12() - self.stage_ii.omega12()
    }

    pub fn delta02(&self) -> f64 {
        self.delta01() + self.delta12()
    }

    /// The same engine started at the other isochoric stroke.
    pub fn swapped(&self) -> GapSchedule {
        GapSchedule { stage_i: self.stage_ii, stage_ii: self.stage_i }
    }

    pub fn is_degenerate(&self) -> bool {
        self.delta01() == 0.0 || self.delta12() == 0.0 || self.delta02() == 0.0
    }
}

/// Sign pattern of the gap changes; fails on an exactly vanishing delta.
pub fn classify_signs(s: &GapSchedule) -> Result<SignTriple> {
    let d01 = Sign::of(s.delta01()).ok_or(Error::ZeroDelta { which: "delta01" })?;
    let d12 = Sign::of(s.delta12()).ok_or(Error::ZeroDelta { which: "delta12" })?;
    let d02 = Sign::of(s.delta02()).ok_or(Error::ZeroDelta { which: "delta02" })?;
    SignTriple::new(d01, d12, d02)
}

/// Spin-1 Ĵₓ in the basis `{e₂, e₁, e₀}`.
pub fn jx_matrix() -> Matrix3<Complex64> {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    Matrix3::new(z, a, z, a, z, a, z, a, z)
}

/// Ĵₓ(τ) in the interaction picture of the free Hamiltonian with gaps `g`.
pub fn jx_interaction(tau: f64, g: &GapConfig) -> Matrix3<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let up01 = Complex64::from_polar(s, g.omega01() * tau);
    let up12 = Complex64::from_polar(s, g.omega12() * tau);
    let mut m = Matrix3::zeros();
    m[(E1, E0)] = up01;
    m[(E0, E1)] = up01.conj();
    m[(E2, E1)] = up12;
    m[(E1, E2)] = up12.conj();
    m
}

/// diag(ε₂, ε₁, ε₀) = diag(Ω₀₂, Ω₀₁, 0).
pub fn free_hamiltonian(g: &GapConfig) -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(g.omega02(), g.omega01(), 0.0))
}

/// Qutrit state restricted to the form reachable at second order from a
/// diagonal initial state: populations plus the single e₂–e₀ coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QutritState {
    p1: f64,
    p2: f64,
    /// ⟨e₂|ρ|e₀⟩.
    coherence: Complex64,
}

impl QutritState {
    pub fn new(p1: f64, p2: f64, coherence: Complex64) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if !(p1 >= -SLACK && p1.is_finite()) {
            return Err(Error::invalid("p1", format!("population must be non-negative, got {p1}")));
        }
        if !(p2 >= -SLACK && p2.is_finite()) {
            return Err(Error::invalid("p2", format!("population must be non-negative, got {p2}")));
        }
        if p1 + p2 > 1.0 + SLACK {
            return Err(Error::invalid("p1+p2", format!("populations sum to {} > 1", p1 + p2)));
        }
        Ok(Self { p1, p2, coherence })
    }

    pub fn diagonal(p1: f64, p2: f64) -> Result<Self> {
        Self::new(p1, p2, Complex64::new(0.0, 0.0))
    }

    pub fn ground() -> Self {
        Self { p1: 0.0, p2: 0.0, coherence: Complex64::new(0.0, 0.0) }
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn p0(&self) -> f64 {
        1.0 - self.p1 - self.p2
    }

    pub fn coherence(&self) -> Complex64 {
        self.coherence
    }

    pub fn is_diagonal(&self) -> bool {
        self.coherence == Complex64::new(0.0, 0.0)
    }

    pub fn to_matrix(&self) -> Matrix3<Complex64> {
        let mut m = Matrix3::zeros();
        m[(E2, E2)] = self.p2.into();
        m[(E1, E1)] = self.p1.into();
        m[(E0, E0)] = self.p0().into();
        m[(E2, E0)] = self.coherence;
        m[(E0, E2)] = self.coherence.conj();
        m
    }

    /// Tr[ρ H_d] for gaps `g`.
    pub fn energy(&self, g: &GapConfig) -> f64 {
        (self.p1 + self.p2) * g.omega01() + self.p2 * g.omega12()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchingShape {
    /// exp(−x²/2) with x = (τ − τ_c)/σ; not compactly supported.
    Gaussian,
    /// exp(1 − 1/(1 − y²)) with y = 2(τ − τ_c)/σ, so χ(τ_c) = 1.
    SmoothBump,
    /// Indicator of [τ_c − σ/2, τ_c + σ/2].
    Rectangular,
}

impl FromStr for SwitchingShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SwitchingShape::Gaussian),
            "smooth_bump" => Ok(SwitchingShape::SmoothBump),
            "rectangular" => Ok(SwitchingShape::Rectangular),
            other => Err(Error::invalid(
                "switching.shape",
                format!("unknown shape `{other}` (expected gaussian, smooth_bump or rectangular)"),
            )),
        }
    }
}

/// Gaussian profiles are truncated at this many σ on either side.
pub const GAUSSIAN_CUTOFF: f64 = 6.0;

/// Switching function χ((τ − τ_c)/σ), symmetric about its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingProfile {
    shape: SwitchingShape,
    center: f64,
    sigma: f64,
}

impl SwitchingProfile {
    pub fn new(shape: SwitchingShape, center: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("switching.sigma", format!("must be positive, got {sigma}")));
        }
        if !center.is_finite() {
            return Err(Error::invalid("switching.center", "must be finite"));
        }
        Ok(Self { shape, center, sigma })
    }

    pub fn gaussian(center: f64, sigma: f64) -> Result<Self> {
        Self::new(SwitchingShape::Gaussian, center, sigma)
    }

    pub fn smooth_bump(center: f64, sigma: f64) -> Result<Self> {
        Self::new(SwitchingShape::SmoothBump, center, sigma)
    }

    pub fn rectangular(center: f64, sigma: f64) -> Result<Self> {
        Self::new(SwitchingShape::Rectangular, center, sigma)
    }

    pub fn shape(&self) -> SwitchingShape {
        self.shape
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_compact(&self) -> bool {
        self.shape != SwitchingShape::Gaussian
    }

    pub fn with_center(&self, center: f64) -> Self {
        Self { center, ..*self }
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.shape, self.center, sigma)
    }

    /// Value at proper time `tau`.
    pub fn value(&self, tau: f64) -> f64 {
        self.local_value(tau - self.center)
    }

    /// Value at offset `t = τ − τ_c` from the center.
    pub fn local_value(&self, t: f64) -> f64 {
        match self.shape {
            SwitchingShape::Gaussian => {
                let x = t / self.sigma;
                (-0.5 * x * x).exp()
            }
            SwitchingShape::SmoothBump => {
                let y = 2.0 * t / self.sigma;
                let y2 = y * y;
                if y2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - y2)).exp()
                } else {
                    0.0
                }
            }
            SwitchingShape::Rectangular => {
                if t.abs() <= 0.5 * self.sigma {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the integration window around the center: σ/2 for the
    /// compact shapes, `GAUSSIAN_CUTOFF`·σ for the gaussian.
    pub fn half_window(&self) -> f64 {
        match self.shape {
            SwitchingShape::Gaussian => GAUSSIAN_CUTOFF * self.sigma,
            _ => 0.5 * self.sigma,
        }
    }

    /// Integration window `[lo, hi]` in absolute proper time. For compact
    /// shapes this is exactly the support.
    pub fn window(&self) -> (f64, f64) {
        let h = self.half_window();
        (self.center - h, self.center + h)
    }

    /// Nominal support `[τ_c − σ/2, τ_c + σ/2]` used for the stage ordering
    /// rule.
    pub fn nominal_support(&self) -> (f64, f64) {
        (self.center - 0.5 * self.sigma, self.center + 0.5 * self.sigma)
    }
}

/// Strict disjointness of the two interaction windows:
/// τᴵ + σᴵ/2 < τᴵᴵ − σᴵᴵ/2.
pub fn supports_disjoint(first: &SwitchingProfile, second: &SwitchingProfile) -> bool {
    first.nominal_support().1 < second.nominal_support().0
}
