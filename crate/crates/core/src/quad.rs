//! Adaptive Gauss-Kronrod quadrature and improper tail integrals.
//!
//! The tail integrals that appear throughout (`∫_r^∞ ds/f(s)` and
//! `∫_δ^∞ ds/√(2G(s))`) are computed by mapping the tail to the unit
//! interval with the substitution v = 1 - r/s and refining adaptively.
//! Divergence is detected beforehand on dyadic blocks: if the block
//! increments do not decay geometrically up to 2^60·r, the integral is
//! declared divergent.

use crate::error::{Error, Result};

/// Gauss-Kronrod 7-15 abscissae (positive half, descending).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// 7-point Gauss weights.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15-point Kronrod weights.
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

/// Quadrature tolerances. Defaults follow the tail-integral contract:
/// absolute 1e-12, relative 1e-10.
#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol { abs: 1e-12, rel: 1e-10 }
    }
}

/// One Gauss-Kronrod 7-15 panel. Returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);

    let f_center = f(center);
    let mut result_gauss = 0.0;
    let mut result_kronrod = f_center * WGK[7];
    let mut resabs = result_kronrod.abs();

    let mut fv1 = [0.0_f64; 7];
    let mut fv2 = [0.0_f64; 7];

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        let fsum = f1 + f2;
        result_kronrod += WGK[j] * fsum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * fsum;
        }
    }
    result_gauss += WG[3] * f_center;

    let mean = result_kronrod * 0.5;
    let mut resasc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let integral = result_kronrod * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((result_kronrod - result_gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * 1.0_f64.min((200.0 * err / resasc).powf(1.5));
    }
    let round = 50.0 * f64::EPSILON * resabs;
    if round > err {
        err = round;
    }
    (integral, err)
}

/// Adaptive integration of `f` over the finite interval [a, b].
///
/// Bisects the worst panel until the summed error estimate meets the
/// tolerance or the panel budget is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_PANELS: usize = 4096;

    // (a, b, integral, error)
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (i0, e0) = gk15(&f, a, b);
    panels.push((a, b, i0, e0));

    loop {
        let mut total = 0.0;
        let mut err = 0.0;
        let mut worst = 0;
        let mut worst_err = -1.0;
        for (k, p) in panels.iter().enumerate() {
            total += p.2;
            err += p.3;
            if p.3 > worst_err {
                worst_err = p.3;
                worst = k;
            }
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureNonConverged { estimate: total, error: err });
        }
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // interval no longer splittable in f64
            return Err(Error::QuadratureNonConverged { estimate: total, error: err });
        }
        let (il, el) = gk15(&f, pa, mid);
        let (ir, er) = gk15(&f, mid, pb);
        panels.push((pa, mid, il, el));
        panels.push((mid, pb, ir, er));
    }
}

/// Outcome of the dyadic divergence probe on `∫_r^∞ w`.
enum TailProbe {
    Convergent,
    Divergent { partial: f64, doublings: usize },
}

/// Probe convergence of `∫_r^∞ w(s) ds` on dyadic blocks [2^k r, 2^(k+1) r].
///
/// The admitted integrands decay at least like a power, so a convergent
/// tail shows geometrically decaying block increments. If increments fail
/// to decay by a fixed factor per doubling up to k = 60, declare divergent.
fn probe_tail<F: Fn(f64) -> f64>(w: &F, r: f64, tol: QuadTol) -> Result<TailProbe> {
    const MAX_DOUBLINGS: usize = 60;
    const DECAY: f64 = 0.999;

    let mut lo = r;
    let mut partial = 0.0;
    let mut prev_block = f64::INFINITY;
    let mut stalled = 0usize;
    for k in 0..MAX_DOUBLINGS {
        let hi = lo * 2.0;
        let block = integrate(w, lo, hi, QuadTol { abs: tol.abs * 0.1, rel: tol.rel })?;
        partial += block;
        if block <= tol.abs.max(tol.rel * partial.abs()) {
            return Ok(TailProbe::Convergent);
        }
        if block >= DECAY * prev_block {
            stalled += 1;
            if stalled >= 5 {
                return Ok(TailProbe::Divergent { partial, doublings: k + 1 });
            }
        } else {
            stalled = 0;
        }
        prev_block = block;
        lo = hi;
    }
    Ok(TailProbe::Divergent { partial, doublings: MAX_DOUBLINGS })
}

/// Improper integral `∫_r^∞ w(s) ds` for a positive, eventually decaying
/// integrand, with divergence detection.
///
/// Beyond `r_eff = max(r, 1)` the tail is mapped to [0, 1) with
/// s = r_eff/(1 - v); the finite piece [r, r_eff] is integrated directly.
pub fn tail_integral<F: Fn(f64) -> f64>(w: F, r: f64, tol: QuadTol) -> Result<f64> {
    assert!(r >= 0.0, "tail integral needs r >= 0");
    let r_eff = r.max(1.0);

    // a convergent tail must at least be finite where we probe it
    for k in [1.0, 4.0, 16.0, 256.0] {
        if !w(r_eff * k).is_finite() {
            return Err(Error::NotSuperlinear(format!(
                "tail integrand not finite at s = {}",
                r_eff * k
            )));
        }
    }

    match probe_tail(&w, r_eff, tol)? {
        TailProbe::Convergent => {}
        TailProbe::Divergent { partial, doublings } => {
            return Err(Error::QuadratureNonConverged {
                estimate: partial,
                error: f64::INFINITY,
            })
            .map_err(|_| {
                Error::NotSuperlinear(format!(
                    "tail blocks still {partial:.3e} after {doublings} doublings"
                ))
            });
        }
    }

    let head = if r < r_eff { integrate(&w, r, r_eff, tol)? } else { 0.0 };
    // v = 1 - r_eff/s, ds = r_eff/(1-v)^2 dv; clip the endpoint: the
    // integrand vanishes there for every convergent tail.
    let tail = integrate(
        |v| {
            let one_minus = 1.0 - v;
            if one_minus <= f64::EPSILON {
                return 0.0;
            }
            let s = r_eff / one_minus;
            w(s) * r_eff / (one_minus * one_minus)
        },
        0.0,
        1.0,
        tol,
    )?;
    Ok(head + tail)
}
