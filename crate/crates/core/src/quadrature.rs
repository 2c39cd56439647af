//! Globally adaptive Gauss-Kronrod (7/15) quadrature for complex integrands
//! on finite intervals, seeded with caller-supplied breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes and the center.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Deepest bisection level allowed for any seed interval.
    pub max_depth: u32,
    /// Sub-intervals allowed on top of the seeded ones.
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            rel_tol: 1e-6,
            abs_tol: 0.0,
            max_depth: 30,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    /// Estimated absolute error.
    pub error: f64,
    /// Integral of |f|, used as the scale for roundoff-limited cases.
    pub l1: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn relative_error(&self) -> f64 {
        let n = self.value.norm();
        if n > 0.0 {
            self.error / n
        } else if self.error == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    l1: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64, depth: u32) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut l1 = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let sum = f1 + f2;
        kronrod += sum * WGK[j];
        l1 += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Piece {
        a,
        b,
        value,
        error,
        l1: l1 * half.abs(),
        depth,
    }
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the
/// sub-intervals delimited by `points` (sorted, duplicates ignored).
///
/// The interval with the largest error estimate is bisected until the total
/// error drops below `max(rel_tol·|I|, abs_tol, 1e-14·∫|f|)` or a limit is hit.
pub fn integrate<F>(mut f: F, points: &[f64], settings: &QuadSettings) -> QuadResult
where
    F: FnMut(f64) -> Complex64,
{
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Piece> = Vec::new();
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gauss_kronrod(&mut f, w[0], w[1], 0));
            evaluations += 15;
        }
    }

    let totals = |heap: &BinaryHeap<Piece>, frozen: &[Piece]| {
        let mut v = Complex64::new(0.0, 0.0);
        let mut e = 0.0;
        let mut l = 0.0;
        for p in heap.iter().chain(frozen.iter()) {
            v += p.value;
            e += p.error;
            l += p.l1;
        }
        (v, e, l)
    };

    let seeds = heap.len();
    let (mut value, mut error, mut l1) = totals(&heap, &frozen);
    let tolerance = |v: Complex64, l: f64| {
        (settings.rel_tol * v.norm())
            .max(settings.abs_tol)
            .max(1e-14 * l)
    };

    let mut converged = true;
    while error > tolerance(value, l1) {
        if heap.len() + frozen.len() >= settings.max_intervals + seeds {
            converged = false;
            break;
        }
        let Some(worst) = heap.pop() else {
            converged = false;
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= settings.max_depth || mid <= worst.a || mid >= worst.b {
            frozen.push(worst);
            continue;
        }
        let left = gauss_kronrod(&mut f, worst.a, mid, worst.depth + 1);
        let right = gauss_kronrod(&mut f, mid, worst.b, worst.depth + 1);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
    }

    // fresh sums to shed accumulated update drift
    let (value, error, l1) = totals(&heap, &frozen);
    let converged = converged && error <= tolerance(value, l1) * (1.0 + 1e-9);
    QuadResult {
        value,
        error,
        l1,
        evaluations,
        converged,
    }
}

/// Sorts breakpoints, keeps those inside `[lo, hi]` and adds the endpoints.
pub fn breakpoints(lo: f64, hi: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = interior
        .into_iter()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn real<F: Fn(f64) -> f64>(f: F) -> impl FnMut(f64) -> Complex64 {
        move |x| Complex64::new(f(x), 0.0)
    }

    #[test]
    fn single_rule_is_exact_for_degree_21() {
        let mut f = real(|x: f64| x.powi(20) + 3.0 * x.powi(21));
        let p = gauss_kronrod(&mut f, -1.0, 1.0, 0);
        assert!((p.value.re - 2.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn narrow_lorentzian_with_breakpoint() {
        let eps = 1e-6;
        let f = real(move |x: f64| eps / (PI * (x * x + eps * eps)));
        let r = integrate(f, &breakpoints(-1.0, 1.0, [0.0]), &QuadSettings::default());
        let exact = 2.0 * (1.0 / eps).atan() / PI;
        assert!(r.converged);
        assert!(
            (r.value.re - exact).abs() < 1e-8,
            "{} vs {}",
            r.value.re,
            exact
        );
    }

    #[test]
    fn complex_pole_off_axis() {
        // ∫_{-1}^{1} dx / (x - i h) = ln((1 - ih)/(-1 - ih))
        let h = 1e-3;
        let z = Complex64::new(0.0, h);
        let r = integrate(
            |x| 1.0 / (x - z),
            &[-1.0, 0.3, 1.0],
            &QuadSettings::default(),
        );
        let exact = (Complex64::new(1.0, -h)).ln() - (Complex64::new(-1.0, -h)).ln();
        assert!(r.converged);
        assert!((r.value - exact).norm() < 1e-6 * exact.norm());
    }

    #[test]
    fn reports_non_convergence() {
        let settings = QuadSettings {
            max_intervals: 4,
            ..QuadSettings::default()
        };
        let r = integrate(real(|x: f64| 1.0 / x.sqrt()), &[0.0, 1.0], &settings);
        assert!(!r.converged);
    }
}
