//! Globally adaptive Gauss–Kronrod (10/21) quadrature for complex integrands.
//!
//! Panels are bisected in order of decreasing error estimate until the total
//! estimate falls below `max(abs, rel·|I|, l1_rel·∫|f|)`. Callers pass
//! breakpoints to seed the panel list wherever the integrand has structure on
//! scales much finer than the interval (e.g. the iε peak of a Wightman
//! function).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_023_183_282,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_146,
];

const MAX_PANELS: usize = 1 << 15;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Absolute floor expressed relative to the L1 norm of the integrand.
    pub l1_rel: f64,
    /// Maximum number of bisections of an initial panel.
    pub max_depth: u32,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel, l1_rel: 1e-3 * rel, max_depth: 40 }
    }

    pub fn with_max_depth(self, max_depth: u32) -> Self {
        Self { max_depth, ..self }
    }

    pub fn with_l1_rel(self, l1_rel: f64) -> Self {
        Self { l1_rel, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    /// Estimate of ∫|f|.
    pub l1: f64,
    pub evaluations: usize,
}

impl Estimate {
    pub fn zero() -> Self {
        Self { value: Complex64::new(0.0, 0.0), error: 0.0, l1: 0.0, evaluations: 0 }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;

    fn add(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            error: self.error + o.error,
            l1: self.l1 + o.l1,
            evaluations: self.evaluations + o.evaluations,
        }
    }
}

/// Failed to reach the tolerance; carries the best estimate obtained.
#[derive(Debug, Clone, Copy)]
pub struct NotConverged {
    pub estimate: Estimate,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    l1: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn component_error(resk: f64, resg: f64, resabs: f64, resasc: f64, half: f64) -> f64 {
    let mut err = ((resk - resg) * half).abs();
    let resabs = resabs * half;
    let resasc = resasc * half;
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

fn gk21<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64, depth: u32) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [Complex64::new(0.0, 0.0); 21];
    fv[20] = f(center);
    for j in 0..10 {
        let dx = half * XGK[j];
        fv[2 * j] = f(center - dx);
        fv[2 * j + 1] = f(center + dx);
    }
    let weight = |i: usize| if i == 20 { WGK[10] } else { WGK[i / 2] };

    let mut resk = Complex64::new(0.0, 0.0);
    let mut resg = Complex64::new(0.0, 0.0);
    let mut abs_re = 0.0;
    let mut abs_im = 0.0;
    for (i, v) in fv.iter().enumerate() {
        let w = weight(i);
        resk += v * w;
        abs_re += w * v.re.abs();
        abs_im += w * v.im.abs();
    }
    for (j, wg) in WG.iter().enumerate() {
        let k = 2 * j + 1;
        resg += (fv[2 * k] + fv[2 * k + 1]) * *wg;
    }
    let mean = resk * 0.5;
    let mut asc_re = 0.0;
    let mut asc_im = 0.0;
    for (i, v) in fv.iter().enumerate() {
        let w = weight(i);
        asc_re += w * (v.re - mean.re).abs();
        asc_im += w * (v.im - mean.im).abs();
    }
    let error = component_error(resk.re, resg.re, abs_re, asc_re, half)
        + component_error(resk.im, resg.im, abs_im, asc_im, half);
    let l1 = fv.iter().enumerate().map(|(i, v)| weight(i) * v.norm()).sum::<f64>() * half;
    Panel { a, b, value: resk * half, error, l1, depth }
}

/// Integrate `f` over `[points[0], points[last]]`, seeding one panel per
/// consecutive pair of (sorted, deduplicated) points.
pub fn integrate<F>(mut f: F, points: &[f64], tol: Tolerance) -> Result<Estimate, NotConverged>
where
    F: FnMut(f64) -> Complex64,
{
    let mut pts: Vec<f64> = points.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Ok(Estimate::zero());
    }

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut evaluations = 0usize;
    for w in pts.windows(2) {
        heap.push(gk21(&mut f, w[0], w[1], 0));
        evaluations += 21;
    }

    let totals = |heap: &BinaryHeap<Panel>, frozen: &[Panel]| {
        let mut v = Complex64::new(0.0, 0.0);
        let mut e = 0.0;
        let mut l1 = 0.0;
        for p in heap.iter().chain(frozen.iter()) {
            v += p.value;
            e += p.error;
            l1 += p.l1;
        }
        (v, e, l1)
    };

    let (mut value, mut error, mut l1) = totals(&heap, &frozen);
    let mut iteration = 0usize;
    loop {
        let target = tol.abs.max(tol.rel * value.norm()).max(tol.l1_rel * l1);
        if error <= target {
            let (v, e, l) = totals(&heap, &frozen);
            return Ok(Estimate { value: v, error: e, l1: l, evaluations });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                let (v, e, l) = totals(&heap, &frozen);
                return Err(NotConverged { estimate: Estimate { value: v, error: e, l1: l, evaluations }, tolerance: target });
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= tol.max_depth || mid <= worst.a || mid >= worst.b || heap.len() + frozen.len() >= MAX_PANELS {
            frozen.push(worst);
            continue;
        }
        let left = gk21(&mut f, worst.a, mid, worst.depth + 1);
        let right = gk21(&mut f, mid, worst.b, worst.depth + 1);
        evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
        iteration += 1;
        if iteration.is_multiple_of(64) {
            (value, error, l1) = totals(&heap, &frozen);
        }
    }
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F>(mut f: F, points: &[f64], tol: Tolerance) -> Result<(f64, f64), NotConverged>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Complex64::new(f(x), 0.0), points, tol).map(|e| (e.value.re, e.error))
}

/// Breakpoints clustering geometrically around `x0` on `[lo, hi]`, starting
/// at distance `scale` and growing by a factor of `ratio`.
pub fn geometric_points(lo: f64, hi: f64, x0: f64, scale: f64, ratio: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    if x0 > lo && x0 < hi {
        pts.push(x0);
    }
    if scale > 0.0 && ratio > 1.0 {
        let mut d = scale;
        while x0 - d > lo || x0 + d < hi {
            for x in [x0 - d, x0 + d] {
                if x > lo && x < hi {
                    pts.push(x);
                }
            }
            d *= ratio;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
