//! Synthesis of the singular delayed control α(t) = B'(t) y(t−τ) and the
//! continuation of blowing-up trajectories past their blow-up time:
//! neutral representation solve, time reflection across T∞, and periodic
//! extension.
//!
//! Time bookkeeping: with τ = T∞ − ε, the delayed problem lives in the
//! shifted scale t̃ = t − τ. The kernel singularity sits at t* = ε
//! (t = T∞ in the original scale), and the history is the uncontrolled
//! trajectory through the identification hist(θ) = u⁰(θ + τ), θ ∈ [−τ, 0].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::law::{least_squares_slope, ForcingLaw, TruncatedForcing};
use crate::quad::{self, QuadTol};
use crate::scalar::{self, BlowupSolution, StepControl};

// ---------------------------------------------------------------------------
// Kernel
// ---------------------------------------------------------------------------

/// B(t) = a |t − t*|^(−γ) + m with the constant correction m = −a/(t*)^γ,
/// the minimal choice with B(0) = 0 and B' > 0 on (0, t*).
#[derive(Debug, Clone, Copy)]
pub struct SingularKernel {
    pub a: f64,
    pub gamma: f64,
    pub q: f64,
    /// Singular time in the shifted scale (= ε).
    pub t_star: f64,
    /// Delay τ = T∞ − ε.
    pub tau: f64,
    pub m_offset: f64,
}

/// Build the control kernel for a window of width ε before T∞.
pub fn build_kernel(q: f64, a: f64, gamma: f64, eps: f64, t_inf: f64) -> Result<SingularKernel> {
    if !(q > 1.0) {
        return Err(Error::InvalidLaw(format!("kernel needs q > 1, got {q}")));
    }
    if !(gamma > 0.0 && gamma < 1.0 / q) {
        return Err(Error::BadExponent { gamma, q });
    }
    if !(a > 0.0) {
        return Err(Error::InvalidLaw(format!("kernel amplitude must be positive, got {a}")));
    }
    if !(2.0 * eps < t_inf) {
        return Err(Error::BadWindow { two_eps: 2.0 * eps, t_inf });
    }
    let t_star = eps;
    let kernel = SingularKernel {
        a,
        gamma,
        q,
        t_star,
        tau: t_inf - eps,
        m_offset: -a / t_star.powf(gamma),
    };
    debug_assert!(kernel.b(0.0).abs() < 1e-12 * a.max(1.0));
    Ok(kernel)
}

impl SingularKernel {
    pub fn b(&self, t: f64) -> f64 {
        self.a * (t - self.t_star).abs().powf(-self.gamma) + self.m_offset
    }

    /// B'(t); positive before t*, negative after.
    pub fn b_prime(&self, t: f64) -> f64 {
        let d = t - self.t_star;
        self.a * self.gamma * d.abs().powf(-self.gamma - 1.0) * if d < 0.0 { 1.0 } else { -1.0 }
    }
}

// ---------------------------------------------------------------------------
// Control schedule
// ---------------------------------------------------------------------------

/// The control exposed through its antiderivative: α = dA/dt with
/// A(t) = B(t̃) hist(t̃−τ) − ∫₀^t̃ B hist'(·−τ), finite off the singular
/// times. α vanishes outside the active windows (T∞−ε, T∞) mod 2T∞ and
/// their reflections.
#[derive(Clone)]
pub struct ControlSchedule {
    pub kernel: SingularKernel,
    pub t_inf: f64,
    pub eps: f64,
    history: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ControlSchedule {
    /// Active window in original time, first period.
    pub fn active_window(&self) -> (f64, f64) {
        (self.t_inf - self.eps, self.t_inf)
    }

    /// Bang-bang sign: +1 on [0, T∞) mod 2T∞, −1 on [T∞, 2T∞).
    pub fn sign_at(&self, t: f64) -> f64 {
        let period = 2.0 * self.t_inf;
        let phase = t.rem_euclid(period);
        if phase < self.t_inf {
            1.0
        } else {
            -1.0
        }
    }

    fn hist_delayed(&self, shifted_t: f64) -> f64 {
        (self.history)(shifted_t - self.kernel.tau)
    }

    fn hist_delayed_slope(&self, shifted_t: f64) -> f64 {
        let h = 1e-7 * self.kernel.tau.max(1e-3);
        (self.hist_delayed(shifted_t + h) - self.hist_delayed(shifted_t - h)) / (2.0 * h)
    }

    /// Pointwise α(t) (periodic, reflected sign on the mirror window);
    /// `None` outside the active windows. Diagnostic use only: α is not
    /// integrable near the singular times.
    pub fn alpha_at(&self, t: f64) -> Option<f64> {
        let period = 2.0 * self.t_inf;
        let phase = t.rem_euclid(period);
        let (lo, hi) = self.active_window();
        if phase > lo && phase < hi {
            let shifted = phase - self.kernel.tau;
            Some(self.kernel.b_prime(shifted) * self.hist_delayed(shifted))
        } else if phase > hi && phase < hi + self.eps {
            // reflected control: α̂(t) = −α(2T∞ − t)
            self.alpha_at(period - phase).map(|v| -v)
        } else {
            None
        }
    }

    /// Antiderivative A with α = dA/dt on the first active window;
    /// zero before the window. Diverges as t ↑ T∞ (the control is only
    /// W^(-1,q')). Evaluated for phase inside [0, T∞).
    pub fn antiderivative(&self, t: f64) -> Result<f64> {
        let period = 2.0 * self.t_inf;
        let phase = t.rem_euclid(period);
        let (lo, hi) = self.active_window();
        if phase <= lo {
            return Ok(0.0);
        }
        if phase >= hi {
            return Err(Error::OutOfRange(format!(
                "antiderivative evaluated past the singular time (phase {phase})"
            )));
        }
        let shifted = phase - self.kernel.tau; // in (0, t*)
        let correction = quad::integrate(
            |s| self.kernel.b(s) * self.hist_delayed_slope(s),
            0.0,
            shifted,
            QuadTol { abs: 1e-12, rel: 1e-9 },
        )?;
        Ok(self.kernel.b(shifted) * self.hist_delayed(shifted) - correction)
    }
}

// ---------------------------------------------------------------------------
// Piecewise trajectory
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentTag {
    Original,
    SingularGrowth,
    Reflected,
    Periodic,
}

impl SegmentTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentTag::Original => "original",
            SegmentTag::SingularGrowth => "singular-growth",
            SegmentTag::Reflected => "reflected",
            SegmentTag::Periodic => "periodic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub tag: SegmentTag,
    /// The segment opens at a singular (+∞) endpoint.
    pub singular_start: bool,
    /// The segment closes at a singular (+∞) endpoint.
    pub singular_end: bool,
}

impl Segment {
    /// Trapezoid L¹ mass of the sampled part.
    pub fn l1(&self) -> f64 {
        trapezoid(&self.t, &self.u)
    }

    /// Trapezoid L¹ mass using every k-th sample (refinement diagnostics).
    pub fn l1_strided(&self, stride: usize) -> f64 {
        let t: Vec<f64> = self.t.iter().copied().step_by(stride).collect();
        let u: Vec<f64> = self.u.iter().copied().step_by(stride).collect();
        trapezoid(&t, &u)
    }
}

fn trapezoid(t: &[f64], u: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..t.len() {
        acc += 0.5 * (u[i] + u[i - 1]) * (t[i] - t[i - 1]);
    }
    acc
}

/// A controlled trajectory split into tagged segments with marked
/// singular endpoints, periodically extended.
#[derive(Debug, Clone)]
pub struct PiecewiseTrajectory {
    pub segments: Vec<Segment>,
    /// Period of the extension, 2 T∞.
    pub period: f64,
}

impl PiecewiseTrajectory {
    pub fn t_end(&self) -> f64 {
        self.segments.last().and_then(|s| s.t.last()).copied().unwrap_or(0.0)
    }

    /// Piecewise-linear evaluation across segments.
    pub fn eval(&self, t: f64) -> Option<f64> {
        for seg in &self.segments {
            let (first, last) = (*seg.t.first()?, *seg.t.last()?);
            if t < first || t > last {
                continue;
            }
            let idx = match seg.t.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
                Ok(i) => return Some(seg.u[i]),
                Err(i) => i,
            };
            if idx == 0 || idx >= seg.t.len() {
                continue;
            }
            let (t0, t1) = (seg.t[idx - 1], seg.t[idx]);
            let (u0, u1) = (seg.u[idx - 1], seg.u[idx]);
            let w = (t - t0) / (t1 - t0);
            return Some(u0 + w * (u1 - u0));
        }
        None
    }

    pub fn min_sample(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.u.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// L¹ mass of the samples falling in [k·period, (k+1)·period].
    pub fn l1_over_period(&self, k: usize) -> f64 {
        let lo = k as f64 * self.period;
        let hi = lo + self.period;
        let mut acc = 0.0;
        for seg in &self.segments {
            let mut t_prev: Option<(f64, f64)> = None;
            for (&t, &u) in seg.t.iter().zip(&seg.u) {
                if let Some((tp, up)) = t_prev {
                    if tp >= lo && t <= hi {
                        acc += 0.5 * (u + up) * (t - tp);
                    }
                }
                t_prev = Some((t, u));
            }
        }
        acc
    }

    pub fn complete_periods(&self) -> usize {
        (self.t_end() / self.period + 1e-9) as usize
    }
}

// ---------------------------------------------------------------------------
// Neutral representation solve
// ---------------------------------------------------------------------------

/// Grid for the shifted interval [0, τ]: uniform backbone plus geometric
/// clusters into the singularity from both sides.
#[derive(Debug, Clone, Copy)]
pub struct NeutralGridSpec {
    pub base_points: usize,
    pub cluster_ratio: f64,
    /// Closest resolved distance to t*.
    pub cluster_floor: f64,
}

impl Default for NeutralGridSpec {
    fn default() -> Self {
        // the floor must sit several decades below t* so the terminal
        // decade of the log-log fit is clean of the bounded part
        NeutralGridSpec { base_points: 240, cluster_ratio: 0.8, cluster_floor: 1e-13 }
    }
}

pub fn build_shifted_grid(tau: f64, t_star: f64, spec: NeutralGridSpec) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=spec.base_points)
        .map(|i| tau * i as f64 / spec.base_points as f64)
        .collect();
    let mut cluster = |d0: f64, side: f64| {
        let mut d = d0;
        while d > spec.cluster_floor {
            let t = t_star + side * d;
            if t > 0.0 && t < tau {
                nodes.push(t);
            }
            d *= spec.cluster_ratio;
        }
        nodes.push(t_star + side * spec.cluster_floor);
    };
    cluster(t_star * 0.5, -1.0);
    cluster(((tau - t_star) * 0.5).max(t_star * 0.5).min(tau - t_star), 1.0);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // drop near-duplicates and anything inside the floor gap around t*
    let mut out = Vec::with_capacity(nodes.len());
    for t in nodes {
        if (t - t_star).abs() < spec.cluster_floor * (1.0 - 1e-9) {
            continue;
        }
        if out.last().is_none_or(|&p: &f64| t - p > 1e-16 * tau.max(1.0)) {
            out.push(t);
        }
    }
    out
}

/// Converged solution of the neutral representation identity on [0, τ].
#[derive(Debug, Clone)]
pub struct NeutralSolution {
    /// Shifted-time nodes.
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    /// Bounded part z − B·hist(·−τ).
    pub ac_part: Vec<f64>,
    /// sup |t−t*|^γ |z|, the L^q certificate.
    pub weighted_norm: f64,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub kernel: SingularKernel,
}

/// Picard iteration on
/// z(t) = y⁰(t) + B(t) hist(t−τ)
///        − ∫₀^t B(s) d/ds[Φ(t,s,z(s)) hist(s−τ)] ds
///        − ∫₀^t Φ(t,s,z(s)) c(s, z(s)) ds,
/// with Φ the truncated-flow sensitivity and c an optional extra
/// absorption (the elliptic flux in the boundary-coupled problem).
pub fn solve_neutral(
    f_trunc: &TruncatedForcing,
    history: &dyn Fn(f64) -> f64,
    kernel: &SingularKernel,
    spec: NeutralGridSpec,
    mut extra_absorption: Option<&mut dyn FnMut(f64, f64) -> f64>,
) -> Result<NeutralSolution> {
    solve_neutral_from(f_trunc, history, None, kernel, spec, extra_absorption.take())
}

/// `solve_neutral` with the initial value decoupled from the history:
/// the comparison majorant shares the delayed history of the boundary
/// trajectory but starts from its own state.
pub fn solve_neutral_from(
    f_trunc: &TruncatedForcing,
    history: &dyn Fn(f64) -> f64,
    initial: Option<f64>,
    kernel: &SingularKernel,
    spec: NeutralGridSpec,
    mut extra_absorption: Option<&mut dyn FnMut(f64, f64) -> f64>,
) -> Result<NeutralSolution> {
    let tau = kernel.tau;
    let t_star = kernel.t_star;
    let gamma = kernel.gamma;
    let grid = build_shifted_grid(tau, t_star, spec);
    let n = grid.len();

    let hist: Vec<f64> = grid.iter().map(|&s| history(s - tau)).collect();
    let b: Vec<f64> = grid.iter().map(|&s| kernel.b(s)).collect();
    let xi = initial.unwrap_or_else(|| history(0.0));
    let mut y0 = Vec::with_capacity(n);
    for &s in &grid {
        y0.push(f_trunc.flow(s, xi)?);
    }

    let weight = |t: f64| -> f64 { (t - t_star).abs().powf(gamma).min(1.0) };
    let weights: Vec<f64> = grid.iter().map(|&t| weight(t)).collect();

    let mut z: Vec<f64> = (0..n).map(|j| y0[j] + b[j] * hist[j]).collect();
    let mut residuals: Vec<f64> = Vec::new();
    let mut relax = 1.0;
    let max_sweeps = 80;

    let mut p_row = vec![0.0; n];
    let mut dp_row = vec![0.0; n];
    let mut z_new = vec![0.0; n];

    for sweep in 0..max_sweeps {
        // per-sweep extra absorption values c(s_j, z_j)
        let c_vals: Option<Vec<f64>> = extra_absorption.as_mut().map(|c| grid.iter().zip(&z).map(|(&s, &zz)| c(s, zz)).collect());

        for i in 0..n {
            let t_i = grid[i];
            // P(t_i, s_j) = Φ(t_i, s_j, z_j) · hist_j for s_j <= t_i
            for j in 0..=i {
                let sens = if z[j] >= f_trunc.knee {
                    1.0 // plateau: the truncated field is constant above the knee
                } else {
                    f_trunc.flow_and_sensitivity(t_i - grid[j], z[j])?.1
                };
                p_row[j] = sens * hist[j];
            }
            derivative_nonuniform(&grid[..=i], &p_row[..=i], &mut dp_row[..=i]);

            // ∫ B dP by trapezoid on the refined grid
            let mut integral = 0.0;
            for j in 1..=i {
                integral += 0.5
                    * (b[j] * dp_row[j] + b[j - 1] * dp_row[j - 1])
                    * (grid[j] - grid[j - 1]);
            }

            // extra absorption term ∫ Φ c
            let mut c_integral = 0.0;
            if let Some(cv) = &c_vals {
                let phi_c = |j: usize| -> Result<f64> {
                    let sens = if z[j] >= f_trunc.knee {
                        1.0
                    } else {
                        f_trunc.flow_and_sensitivity(t_i - grid[j], z[j])?.1
                    };
                    Ok(sens * cv[j])
                };
                let mut prev = phi_c(0)?;
                for j in 1..=i {
                    let cur = phi_c(j)?;
                    c_integral += 0.5 * (cur + prev) * (grid[j] - grid[j - 1]);
                    prev = cur;
                }
            }

            z_new[i] = y0[i] + b[i] * hist[i] - integral - c_integral;
        }

        let mut resid: f64 = 0.0;
        for j in 0..n {
            resid = resid.max(weights[j] * (z_new[j] - z[j]).abs());
        }
        let scale = z.iter().zip(&weights).map(|(&v, &w)| (v * w).abs()).fold(1.0, f64::max);

        // under-relaxation if the residual stopped decreasing
        if residuals.last().is_some_and(|&prev| resid > prev) {
            relax = 0.5;
        }
        for j in 0..n {
            z[j] += relax * (z_new[j] - z[j]);
        }
        residuals.push(resid);

        if resid <= 1e-8 * scale {
            let ac_part: Vec<f64> = (0..n).map(|j| z[j] - b[j] * hist[j]).collect();
            let weighted_norm =
                z.iter().zip(&weights).map(|(&v, &w)| (v * w).abs()).fold(0.0, f64::max);
            return Ok(NeutralSolution {
                t: grid,
                z,
                ac_part,
                weighted_norm,
                iterations: sweep + 1,
                residuals,
                kernel: *kernel,
            });
        }
    }
    Err(Error::FixedPointDiverged { iterations: max_sweeps, history: residuals })
}

/// Three-point derivative on a nonuniform grid (one-sided at the ends).
fn derivative_nonuniform(t: &[f64], f: &[f64], out: &mut [f64]) {
    let n = t.len();
    if n < 2 {
        if n == 1 {
            out[0] = 0.0;
        }
        return;
    }
    out[0] = (f[1] - f[0]) / (t[1] - t[0]);
    out[n - 1] = (f[n - 1] - f[n - 2]) / (t[n - 1] - t[n - 2]);
    for j in 1..n - 1 {
        let hl = t[j] - t[j - 1];
        let hr = t[j + 1] - t[j];
        out[j] = (f[j + 1] * hl * hl - f[j - 1] * hr * hr + f[j] * (hr * hr - hl * hl))
            / (hl * hr * (hl + hr));
    }
}

// ---------------------------------------------------------------------------
// Reflection, periodic extension, pipeline
// ---------------------------------------------------------------------------

/// Mirror the trajectory on [0, T∞) across T∞: Y(t) = u(2T∞ − t) on
/// (T∞, 2T∞], opening at a singular endpoint and closing at u₀.
pub fn reflect_and_extend(first_half: &[Segment], t_inf: f64) -> Segment {
    let mut t = Vec::new();
    let mut u = Vec::new();
    for seg in first_half.iter().rev() {
        for (&tt, &uu) in seg.t.iter().rev().zip(seg.u.iter().rev()) {
            let mirrored = 2.0 * t_inf - tt;
            if t.last().is_none_or(|&p: &f64| mirrored > p) {
                t.push(mirrored);
                u.push(uu);
            }
        }
    }
    Segment { t, u, tag: SegmentTag::Reflected, singular_start: true, singular_end: false }
}

/// Tile a [0, 2T∞] template over [0, horizon]; samples repeat exactly.
pub fn periodic_extend(
    template: &PiecewiseTrajectory,
    horizon: f64,
) -> Result<PiecewiseTrajectory> {
    let period = template.period;
    let first = template.segments.first().and_then(|s| s.u.first()).copied().unwrap_or(0.0);
    let last = template.segments.last().and_then(|s| s.u.last()).copied().unwrap_or(0.0);
    let gap = (first - last).abs();
    let tol = 1e-8 * first.abs().max(1.0);
    if gap > tol {
        return Err(Error::TemplateMismatch { gap, tol });
    }

    let mut segments = template.segments.clone();
    let mut k = 1usize;
    'tiling: loop {
        let shift = k as f64 * period;
        if shift >= horizon {
            break;
        }
        for seg in &template.segments {
            let mut t = Vec::new();
            let mut u = Vec::new();
            for (&tt, &uu) in seg.t.iter().zip(&seg.u) {
                let shifted = tt + shift;
                if shifted > horizon {
                    break;
                }
                t.push(shifted);
                u.push(uu);
            }
            if t.len() >= 2 {
                segments.push(Segment {
                    t,
                    u,
                    tag: SegmentTag::Periodic,
                    singular_start: seg.singular_start,
                    singular_end: seg.singular_end,
                });
            }
            if segments.last().is_some_and(|s| s.t.last().copied().unwrap_or(0.0) >= horizon) {
                break 'tiling;
            }
        }
        k += 1;
    }
    Ok(PiecewiseTrajectory { segments, period })
}

/// Sup deviation between the controlled trajectory and the closed-form
/// uncontrolled one on [0, T∞ − ε].
pub fn coincidence_check(
    trajectory: &PiecewiseTrajectory,
    closed: &BlowupSolution,
    eps: f64,
) -> Result<f64> {
    let t_cut = closed.t_inf - eps;
    let mut worst: f64 = 0.0;
    for seg in &trajectory.segments {
        for (&t, &u) in seg.t.iter().zip(&seg.u) {
            if t <= t_cut {
                worst = worst.max((u - closed.eval(t)?).abs());
            }
        }
    }
    Ok(worst)
}

/// Log-log diagnostics of the singular growth near the blow-up time.
#[derive(Debug, Clone, Copy)]
pub struct SingularFit {
    /// Slope of log z vs −log |t−t*| over the terminal resolved decade.
    pub gamma_fit: f64,
    /// Prefactor of the |t−t*|^(−γ) law (smooth part subtracted).
    pub prefactor_fit: f64,
    /// Singular-time estimate from the linearized fit.
    pub t_star_fit: f64,
}

/// Fit the singular structure z ≈ A |t*−t|^(−γ) + smooth(t) from samples
/// approaching t* from the left.
pub fn fit_singular_growth(
    t: &[f64],
    z: &[f64],
    t_star: f64,
    gamma_nominal: f64,
    smooth: &dyn Fn(f64) -> f64,
) -> Result<SingularFit> {
    let mut below: Vec<(f64, f64)> = t
        .iter()
        .zip(z)
        .filter(|(&tt, _)| tt < t_star)
        .map(|(&tt, &zz)| (t_star - tt, zz))
        .collect();
    below.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if below.len() < 10 {
        return Err(Error::InsufficientDecade { got: below.len(), need: 10 });
    }
    let d_min = below[0].0;

    // raw log-log slope over the terminal decade
    let decade: Vec<(f64, f64)> = below
        .iter()
        .filter(|(d, _)| *d <= 10.0 * d_min)
        .map(|&(d, zz)| (-d.ln(), zz.max(1e-300).ln()))
        .collect();
    if decade.len() < 4 {
        return Err(Error::InsufficientDecade { got: decade.len(), need: 4 });
    }
    let gamma_fit = least_squares_slope(&decade);

    // prefactor at the nominal exponent, smooth part removed
    let mut pref = 0.0;
    let mut count = 0.0;
    for &(d, zz) in below.iter().filter(|(d, _)| *d <= 10.0 * d_min) {
        pref += (zz - smooth(t_star - d)) * d.powf(gamma_nominal);
        count += 1.0;
    }
    let prefactor_fit = pref / count;

    // singular-time recovery: (z − smooth)^(-1/γ) is linear in t with
    // root at t*; fit over a wider window
    let line: Vec<(f64, f64)> = below
        .iter()
        .filter(|(d, _)| *d <= 1e4 * d_min)
        .map(|&(d, zz)| {
            let excess = (zz - smooth(t_star - d)).max(1e-300);
            (t_star - d, excess.powf(-1.0 / gamma_nominal))
        })
        .collect();
    let slope = least_squares_slope(&line);
    let n = line.len() as f64;
    let mt: f64 = line.iter().map(|p| p.0).sum::<f64>() / n;
    let mv: f64 = line.iter().map(|p| p.1).sum::<f64>() / n;
    let t_star_fit = if slope.abs() > 1e-300 { mt - mv / slope } else { f64::NAN };

    Ok(SingularFit { gamma_fit, prefactor_fit, t_star_fit })
}

/// Configuration of the scalar controlled-explosion pipeline.
#[derive(Debug, Clone, Copy)]
pub struct ControlConfig {
    pub q: f64,
    pub a: f64,
    pub gamma: f64,
    /// Width of the control window before T∞.
    pub eps: f64,
    /// Truncation knee; defaults to M_ε = u⁰(T∞−ε).
    pub knee: Option<f64>,
    /// When false, run the pure bang-bang variant (no truncation, no
    /// kernel): admissible when Φ⁻¹ is integrable at 0 (powers p > 2).
    pub truncate: bool,
    pub grid: NeutralGridSpec,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            q: 2.0,
            a: 1.0,
            gamma: 0.2,
            eps: 0.125,
            knee: None,
            truncate: true,
            grid: NeutralGridSpec::default(),
        }
    }
}

/// Outcome of the scalar controlled-explosion pipeline.
pub struct ControlledExplosion {
    pub trajectory: PiecewiseTrajectory,
    pub schedule: Option<ControlSchedule>,
    pub neutral: Option<NeutralSolution>,
    pub closed: BlowupSolution,
    /// Numeric blow-up estimate of the uncontrolled problem.
    pub t_est: f64,
    pub singular_fit: Option<SingularFit>,
    pub knee: Option<f64>,
}

/// Run the whole scalar program: uncontrolled trajectory to T∞−ε, the
/// neutral singular-growth window, reflection over T∞ and periodic
/// extension to `horizon`.
pub fn controlled_explosion(
    law: &ForcingLaw,
    u0: f64,
    config: ControlConfig,
    horizon: f64,
) -> Result<ControlledExplosion> {
    let closed = scalar::closed_trajectory(law, u0)?;
    let t_inf = closed.t_inf;
    let eps = config.eps;
    if !(2.0 * eps < t_inf) {
        return Err(Error::BadWindow { two_eps: 2.0 * eps, t_inf });
    }
    let tau = t_inf - eps;

    // numeric uncontrolled run: segment 1 and the T_est certificate
    let est = scalar::integrate_until_blowup(law, u0, StepControl::default())?;
    let mut seg1_t = Vec::new();
    let mut seg1_u = Vec::new();
    for (&t, &u) in est.path.t.iter().zip(&est.path.y) {
        if t < tau {
            seg1_t.push(t);
            seg1_u.push(u);
        }
    }
    seg1_t.push(tau);
    seg1_u.push(closed.eval(tau)?);
    let seg1 = Segment {
        t: seg1_t,
        u: seg1_u,
        tag: SegmentTag::Original,
        singular_start: false,
        singular_end: false,
    };

    let (seg2, schedule, neutral, fit, knee) = if config.truncate {
        let knee = match config.knee {
            Some(k) => k,
            None => closed.eval(tau)?, // M_ε = u⁰(T∞−ε)
        };
        let f_trunc = law.truncate(knee);
        let kernel = build_kernel(config.q, config.a, config.gamma, eps, t_inf)?;
        let closed_for_history = closed.clone();
        let history =
            move |theta: f64| closed_for_history.eval(theta + tau).unwrap_or(f64::INFINITY);
        let neutral = solve_neutral(&f_trunc, &history, &kernel, config.grid, None)?;

        // singular-growth samples: shifted nodes in [0, t*) map to [τ, T∞);
        // the s = 0 node repeats u⁰(τ) so the segments abut without a gap
        let mut t2 = Vec::new();
        let mut u2 = Vec::new();
        for (&s, &zz) in neutral.t.iter().zip(&neutral.z) {
            if s < kernel.t_star {
                t2.push(tau + s);
                u2.push(zz);
            }
        }
        let seg2 = Segment {
            t: t2,
            u: u2,
            tag: SegmentTag::SingularGrowth,
            singular_start: false,
            singular_end: true,
        };

        // fit against the unperturbed truncated flow as the smooth part
        let xi = history(0.0);
        let flow_ref = f_trunc.clone();
        let smooth = move |s: f64| flow_ref.flow(s, xi).unwrap_or(0.0);
        let fit = fit_singular_growth(
            &neutral.t,
            &neutral.z,
            kernel.t_star,
            kernel.gamma,
            &smooth,
        )?;
        let schedule = ControlSchedule { kernel, t_inf, eps, history: Arc::new(history) };
        (seg2, Some(schedule), Some(neutral), Some(fit), Some(knee))
    } else {
        // pure bang-bang: the singular window is the uncontrolled
        // trajectory itself (integrable for p > 2)
        let mut t2 = Vec::new();
        let mut u2 = Vec::new();
        let mut d = eps;
        while d > config.grid.cluster_floor {
            t2.push(t_inf - d);
            u2.push(closed.eval(t_inf - d)?);
            d *= config.grid.cluster_ratio;
        }
        let seg2 = Segment {
            t: t2,
            u: u2,
            tag: SegmentTag::SingularGrowth,
            singular_start: false,
            singular_end: true,
        };
        (seg2, None, None, None, None)
    };

    let seg3 = reflect_and_extend(&[seg1.clone(), seg2.clone()], t_inf);
    let template =
        PiecewiseTrajectory { segments: vec![seg1, seg2, seg3], period: 2.0 * t_inf };
    let trajectory = periodic_extend(&template, horizon)?;

    Ok(ControlledExplosion {
        trajectory,
        schedule,
        neutral,
        closed,
        t_est: est.t_est,
        singular_fit: fit,
        knee,
    })
}
