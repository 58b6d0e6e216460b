//! Globally adaptive Gauss-Kronrod (7/15) quadrature and the Gaussian
//! Q-function.

use crate::error::{Error, Result};

/// Absolute tolerance used for every probability integral in the crate.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

const MAX_INTERVALS: usize = 4096;

// Published QUADPACK nodes and weights, kept at full printed precision.
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

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Gaussian tail probability `Q(x) = P(Z > x)` for a standard normal `Z`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut gauss = f_center * WG[3];
    let mut kronrod = f_center * WGK[7];
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..7 {
        let x = half * XGK[j];
        let lo = f(center - x);
        let hi = f(center + x);
        fv1[j] = lo;
        fv2[j] = hi;
        kronrod += WGK[j] * (lo + hi);
        res_abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let width = half.abs();
    Segment {
        a,
        b,
        value: kronrod * half,
        error: rescale_error((kronrod - gauss) * half, res_abs * width, res_asc * width),
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`, splitting the
/// interval first at every point of `breaks` that falls strictly inside it.
///
/// Subdivision always bisects the segment with the largest error estimate.
pub fn integrate<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let mut segments: Vec<Segment> = edges
        .windows(2)
        .map(|w| kronrod15(&f, w[0], w[1]))
        .collect();

    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= tol {
            break;
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: total_error,
                tolerance: tol,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further in double precision.
            return Err(Error::Quadrature {
                estimate: total_error,
                tolerance: tol,
            });
        }
        segments.push(kronrod15(&f, seg.a, mid));
        segments.push(kronrod15(&f, mid, seg.b));
    }

    // Sum in position order so the result does not depend on refinement history.
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(sign * segments.iter().map(|s| s.value).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 1.0, &[], 1e-12).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(f64::exp, 1.0, 0.0, &[], 1e-12).unwrap();
        assert_abs_diff_eq!(v, 1.0 - std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn steep_integrand_with_break() {
        // Smoothed step of width 1e-4 centred at 0.3.
        let f = |x: f64| q_function((0.3 - x) / 1e-4);
        let v = integrate(f, 0.0, 1.0, &[0.3], 1e-10).unwrap();
        assert_abs_diff_eq!(v, 0.7, epsilon = 1e-9);
    }

    #[test]
    fn q_function_reference_points() {
        assert_abs_diff_eq!(q_function(0.0), 0.5, epsilon = 1e-15);
        // Q(1.959963984540054) = 0.025
        assert_abs_diff_eq!(q_function(1.959_963_984_540_054), 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(q_function(-1.0) + q_function(1.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sqrt_singularity_converges() {
        let v = integrate(f64::sqrt, 0.0, 1.0, &[], 1e-9).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-9);
    }
}
