//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Used by the integral branches of the special functions and by the
//! Caputo quadrature oracle. The interval is first cut into a fixed number
//! of equal panels; the panel with the largest error estimate is then
//! bisected until the requested tolerance is met.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature did not reach tolerance: estimate {value:e} with error {abs_error:e} after {intervals} intervals")]
pub struct QuadError {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadSettings {
    /// Equal panels before adaptive refinement.
    pub panels: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            panels: 8,
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (k, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrate `f` over `[a, b]` with the given settings.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    settings: QuadSettings,
) -> Result<QuadResult, QuadError> {
    integrate_with_breaks(f, a, b, &[], settings)
}

/// As [`integrate`], additionally splitting the initial panels at the
/// supplied interior break points (points outside `(a, b)` are ignored).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    settings: QuadSettings,
) -> Result<QuadResult, QuadError> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let panels = settings.panels.max(1);
    let mut cuts: Vec<f64> = (0..=panels)
        .map(|k| lo + (hi - lo) * k as f64 / panels as f64)
        .collect();
    cuts.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let mut segments: Vec<Segment> = cuts.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    let mut evaluations = 15 * segments.len();
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let target = settings.abs_tol.max(settings.rel_tol * total.abs());
        if error <= target {
            return Ok(QuadResult {
                value: sign * total,
                abs_error: error,
                evaluations,
            });
        }
        if !error.is_finite() || segments.len() >= settings.max_intervals {
            return Err(QuadError {
                value: sign * total,
                abs_error: error,
                intervals: segments.len(),
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval no longer splittable in double precision.
            return Err(QuadError {
                value: sign * total,
                abs_error: error,
                intervals: segments.len() + 1,
            });
        }
        segments.push(gk15(&f, seg.a, mid));
        segments.push(gk15(&f, mid, seg.b));
        evaluations += 30;
    }
}
