//! The dynamic-boundary problem on the ball: a quasi-static radial
//! elliptic interior coupled to the boundary law b' = λ f(b) − c(b),
//! where c(b) is the radial flux of the elliptic solve at boundary value
//! b. Detects the boundary blow-up, fits its time, emits the rate
//! diagnostics of the domination regimes, and runs the controlled
//! continuation past T∞ with the scalar comparison majorant.

use std::cell::RefCell;

use crate::elliptic::{
    self, solve_dirichlet, Absorption, GridSpec, RadialGrid, RadialProfile,
};
use crate::error::{Error, Result};
use crate::law::{
    domination_report, least_squares_slope, AbsorptionLaw, DominationRegime, DominationReport,
    ForcingLaw, ProbeGrid,
};
use crate::neutral::{
    self, build_kernel, periodic_extend, reflect_and_extend, NeutralGridSpec,
    PiecewiseTrajectory, Segment, SegmentTag,
};
use crate::ode::{Dopri5, HermitePath, StepOutcome, StopReason};

/// Relative slack of the flux-bound validator 0 ≤ c ≤ √(2G(b)); covers
/// the one-sided difference error of the boundary flux.
pub const FLUX_BOUND_SLACK: f64 = 1e-6;
/// Strictness margin of the domination gate: λ must exceed λ₀ by 1%.
pub const GATE_MARGIN: f64 = 0.01;

/// Configuration of a dynamic-boundary evolution.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub radius: f64,
    pub dim: u32,
    pub u0: f64,
    /// Boundary value at which blow-up is declared.
    pub cap: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Radial grid; the boundary refinement must resolve the layer of the
    /// largest boundary values (depth ~ Ψ(cap)).
    pub grid: GridSpec,
    /// Number of interior snapshots kept.
    pub snapshots: usize,
    /// Subsolution parameters ν > 1 to certify against.
    pub nu_values: Vec<f64>,
    /// Override the domination gate (logged by the caller).
    pub force: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            radius: 1.0,
            dim: 3,
            u0: 2.0,
            cap: 1e8,
            rtol: 1e-10,
            atol: 1e-12,
            grid: GridSpec { h_interior: 1e-2, h_boundary: 1e-11, ratio: 0.85 },
            snapshots: 24,
            nu_values: vec![1.1, 1.5, 2.0],
            force: false,
        }
    }
}

/// Warm-started elliptic flux map b ↦ (c(b), profile).
///
/// The grid adapts to the boundary-layer width of the current boundary
/// value (≈ b/√(2G(b))): a fixed backbone away from the boundary plus a
/// two-zone geometric refinement, finely graded over the last decades of
/// the layer so the one-sided flux is accurate to ~1e-7 relative. Nodes
/// much deeper than the layer would only feed f64 cancellation noise.
pub struct FluxSolver<'a> {
    g: &'a dyn Absorption,
    radius: f64,
    dim: u32,
    spec: GridSpec,
    grid: RadialGrid,
    grid_depth: f64,
    adaptive: bool,
    last: Option<Vec<f64>>,
}

/// Fine grading over the layer decades (flux accuracy ~ (1-q)²).
const DEEP_RATIO: f64 = 0.998;
/// Resolved depth as a fraction of the layer width.
const DEPTH_FACTOR: f64 = 1e-3;
/// Decades below the layer top graded at `DEEP_RATIO`.
const FINE_DECADES: f64 = 4.5;

impl<'a> FluxSolver<'a> {
    pub fn new(g: &'a dyn Absorption, radius: f64, dim: u32, spec: GridSpec) -> Result<Self> {
        let depth = spec.h_interior * radius * 0.1;
        let grid = Self::build_grid(radius, dim, spec, depth)?;
        Ok(FluxSolver { g, radius, dim, spec, grid, grid_depth: depth, adaptive: true, last: None })
    }

    /// Grid frozen at the layer width of `anchor_b`: for truncated
    /// absorptions the flux saturates at g(M)R/N, so one moderate grid
    /// serves the whole range without rebuild churn.
    pub fn fixed(
        g: &'a dyn Absorption,
        radius: f64,
        dim: u32,
        spec: GridSpec,
        anchor_b: f64,
    ) -> Result<Self> {
        let mut solver = Self::new(g, radius, dim, spec)?;
        solver.ensure_grid(anchor_b)?;
        solver.adaptive = false;
        Ok(solver)
    }

    /// Layer width of the boundary value: u/√(2G(u)) (≈ Ψ(u) for powers).
    fn layer(&self, b: f64) -> Option<f64> {
        let slope = self.g.sqrt_2g(b);
        if slope > 0.0 && b > 0.0 {
            Some(b / slope)
        } else {
            None
        }
    }

    fn build_grid(radius: f64, dim: u32, spec: GridSpec, depth: f64) -> Result<RadialGrid> {
        let h_int = spec.h_interior * radius;
        let mut dists = vec![0.0_f64];
        let split = depth * 10f64.powf(FINE_DECADES);
        let mut d = depth;
        while d < radius {
            dists.push(d);
            let ratio = if d < split { DEEP_RATIO } else { spec.ratio };
            let next = d / ratio;
            if next - d >= h_int {
                break;
            }
            d = next;
        }
        let switch = *dists.last().unwrap();
        let remaining = radius - switch;
        let n_uniform = (remaining / h_int).ceil().max(1.0) as usize;
        for i in 1..n_uniform {
            dists.push(switch + remaining * i as f64 / n_uniform as f64);
        }
        dists.push(radius); // exact: maps to the origin node
        let mut nodes: Vec<f64> = dists.into_iter().map(|d| radius - d).collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup();
        Ok(RadialGrid { radius, dim, nodes })
    }

    fn ensure_grid(&mut self, b: f64) -> Result<()> {
        if !self.adaptive {
            return Ok(());
        }
        let wanted = match self.layer(b) {
            Some(layer) => (layer * DEPTH_FACTOR)
                .max(self.spec.h_boundary * self.radius)
                .min(self.spec.h_interior * self.radius * 0.1),
            None => self.spec.h_interior * self.radius * 0.1,
        };
        // rebuild only when the depth class changes materially
        if wanted < 0.6 * self.grid_depth || wanted > 1.8 * self.grid_depth {
            let new_grid = Self::build_grid(self.radius, self.dim, self.spec, wanted)?;
            self.last = self.last.take().map(|u| {
                let old = RadialProfile {
                    grid: self.grid.clone(),
                    u,
                    boundary_flux: 0.0,
                    gradient_bound_ok: true,
                };
                new_grid.nodes.iter().map(|&r| old.eval(r)).collect()
            });
            self.grid = new_grid;
            self.grid_depth = wanted;
        }
        Ok(())
    }

    pub fn profile(&mut self, b: f64) -> Result<RadialProfile> {
        self.ensure_grid(b)?;
        // warm start first, cold layer start as the fallback
        let warm = solve_dirichlet(self.g, &self.grid, b.max(0.0), self.last.as_deref());
        let profile = match warm {
            Ok(p) => p,
            Err(_) => solve_dirichlet(self.g, &self.grid, b.max(0.0), None)?,
        };
        self.last = Some(profile.u.clone());
        Ok(profile)
    }

    pub fn flux(&mut self, b: f64) -> Result<f64> {
        Ok(self.profile(b)?.boundary_flux)
    }
}

/// The flux map b ↦ c(b) tabulated on a log grid and interpolated by
/// cubic Hermite in log-log coordinates. c(b) is smooth, so ~40 solves
/// per decade reproduce it to ~1e-8 relative; the time stepper then
/// costs nothing per stage.
pub struct FluxCache {
    ln_b: Vec<f64>,
    ln_c: Vec<f64>,
    slopes: Vec<f64>,
    zero: bool,
}

impl FluxCache {
    pub fn build(solver: &mut FluxSolver<'_>, b_lo: f64, b_hi: f64, per_decade: usize) -> Result<Self> {
        assert!(b_lo > 0.0 && b_hi > b_lo);
        let decades = (b_hi / b_lo).log10();
        let n = ((decades * per_decade as f64).ceil() as usize).max(8);
        let mut ln_b = Vec::with_capacity(n + 1);
        let mut c_raw = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let b = b_lo * (b_hi / b_lo).powf(i as f64 / n as f64);
            ln_b.push(b.ln());
            c_raw.push(solver.flux(b)?);
        }
        if c_raw.iter().all(|&c| c.abs() <= 1e-12) {
            return Ok(FluxCache { ln_b, ln_c: Vec::new(), slopes: Vec::new(), zero: true });
        }
        if c_raw.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::OutOfRange(
                "flux map is neither identically zero nor positive; cannot tabulate".into(),
            ));
        }
        let ln_c: Vec<f64> = c_raw.iter().map(|c| c.ln()).collect();
        let m = ln_b.len();
        let mut slopes = vec![0.0; m];
        for (i, slope) in slopes.iter_mut().enumerate() {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(m - 1));
            *slope = (ln_c[hi] - ln_c[lo]) / (ln_b[hi] - ln_b[lo]);
        }
        Ok(FluxCache { ln_b, ln_c, slopes, zero: false })
    }

    pub fn eval(&self, b: f64) -> f64 {
        if self.zero {
            return 0.0;
        }
        let x = b.max(1e-300).ln();
        let n = self.ln_b.len();
        if x <= self.ln_b[0] {
            // power-law extension below the table
            return (self.ln_c[0] + self.slopes[0] * (x - self.ln_b[0])).exp();
        }
        if x >= self.ln_b[n - 1] {
            return (self.ln_c[n - 1] + self.slopes[n - 1] * (x - self.ln_b[n - 1])).exp();
        }
        let i = self.ln_b.partition_point(|&v| v < x) - 1;
        let h = self.ln_b[i + 1] - self.ln_b[i];
        let s = (x - self.ln_b[i]) / h;
        let (y0, y1) = (self.ln_c[i], self.ln_c[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        y.exp()
    }
}

/// Result of an uncontrolled dynamic-boundary run.
#[derive(Debug)]
pub struct BoundaryEvolution {
    pub times: Vec<f64>,
    pub boundary_values: Vec<f64>,
    pub fluxes: Vec<f64>,
    /// Dense boundary trace.
    pub path: HermitePath,
    pub snapshots: Vec<(f64, RadialProfile)>,
    pub t_inf_est: f64,
    /// Slope of the Φ(b) fit; recovers the effective forcing rate.
    pub lambda_fit: f64,
    /// Ψ(u₀) when the Keller-Osserman integral converges.
    pub psi_u0: Option<f64>,
    /// Restricted domination report probed on τ ≥ u₀.
    pub report: DominationReport,
    pub flux_bound_violations: usize,
    pub monotonicity_violations: usize,
}

/// Domination report restricted to the orbit range [u₀, cap]: the gate of
/// the restricted-global-domination argument with τ₋ = u₀.
pub fn restricted_report(f: &ForcingLaw, g: &AbsorptionLaw, u0: f64, cap: f64) -> DominationReport {
    let probe = ProbeGrid {
        tau_min: u0,
        tau_split: (10.0 * u0).min(cap * 0.5),
        tau_max: cap.max(100.0 * u0),
        per_decade: 16,
    };
    domination_report(f, g, probe)
}

fn gate(f: &ForcingLaw, report: &DominationReport, force: bool) -> Result<()> {
    let threshold = report.lambda_0 * (1.0 + GATE_MARGIN);
    if f.lambda >= threshold || force {
        Ok(())
    } else {
        Err(Error::DominationFailed {
            lambda: f.lambda,
            threshold: report.lambda_0,
            margin: GATE_MARGIN,
        })
    }
}

/// Evolve the uncontrolled problem until the boundary value exceeds the
/// cap, then extrapolate the blow-up time by the Φ-linearization fit.
pub fn evolve_uncontrolled(
    f: &ForcingLaw,
    g: &AbsorptionLaw,
    cfg: &EvolutionConfig,
) -> Result<BoundaryEvolution> {
    let report = restricted_report(f, g, cfg.u0, cfg.cap);
    gate(f, &report, cfg.force)?;

    let solver_cell = RefCell::new(FluxSolver::new(g, cfg.radius, cfg.dim, cfg.grid)?);

    // tabulate the flux map once; the stages then cost an interpolation
    let cache =
        FluxCache::build(&mut solver_cell.borrow_mut(), 0.25 * cfg.u0, 10.0 * cfg.cap, 40)?;

    // forcing must beat the flux at the initial state
    let c0 = cache.eval(cfg.u0);
    if f.lambda * f.f(cfg.u0) <= c0 && !cfg.force {
        return Err(Error::DominationFailed {
            lambda: f.lambda,
            threshold: c0 / f.f(cfg.u0),
            margin: 0.0,
        });
    }

    let psi_u0 = g.psi(cfg.u0).ok();
    let phi_u0 = f.phi(cfg.u0)?;
    // watchdog horizon: the boundary blows up no later than Ψ(u₀) and no
    // sooner than Φ(u₀)/λ
    let horizon = match psi_u0 {
        Some(p) => 2.0 * p + 10.0 * phi_u0 / f.lambda,
        None => 10.0 * phi_u0 / f.lambda,
    };

    let rhs = |b: f64| -> f64 { f.lambda * f.f(b) - cache.eval(b) };

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut fluxes = Vec::new();
    let mut path = HermitePath::default();
    {
        let d0 = rhs(cfg.u0);
        times.push(0.0);
        values.push(cfg.u0);
        fluxes.push(c0);
        path.push(0.0, cfg.u0, d0);
    }

    let ode = Dopri5 { rtol: cfg.rtol, atol: cfg.atol, ..Dopri5::default() };
    let cap = cfg.cap;
    let time_resolved = |t: f64, b: f64, db: f64| -> bool {
        if b < 1e4_f64.min(cap * 1e-4).max(10.0 * cfg.u0) {
            return false;
        }
        // remaining time ≈ Φ(b)·f(b)/b' from the effective linearization
        match f.phi(b) {
            Ok(phi) if db > 0.0 => phi * f.f(b) / db <= 50.0 * f64::EPSILON * t.abs().max(1.0),
            _ => false,
        }
    };
    let out = ode.integrate(
        |_, y, dy| dy[0] = rhs(y[0]),
        0.0,
        &[cfg.u0],
        horizon,
        |t, y, dy| {
            times.push(t);
            values.push(y[0]);
            fluxes.push(f.lambda * f.f(y[0]) - dy[0]);
            path.push(t, y[0], dy[0]);
            if y[0] >= cap || time_resolved(t, y[0], dy[0]) {
                StepOutcome::Stop
            } else {
                StepOutcome::Continue
            }
        },
    );
    if out.stopped == StopReason::ReachedEnd {
        return Err(Error::CapNotReached { reached: out.y[0], cap, horizon });
    }

    // flux bound and boundary monotonicity audits over accepted steps
    let mut flux_bound_violations = 0;
    for (&b, &c) in values.iter().zip(&fluxes) {
        let bound = g.sqrt_2g(b) * (1.0 + FLUX_BOUND_SLACK) + 1e-12;
        if !(c >= -1e-12 && c <= bound) {
            flux_bound_violations += 1;
        }
    }
    let mut monotonicity_violations = 0;
    for w in values.windows(2) {
        if w[1] < w[0] {
            monotonicity_violations += 1;
        }
    }

    let b_top = *values.last().unwrap();
    let (t_inf_est, lambda_fit, _) = fit_boundary_blowup(f, &times, &values, b_top)?;

    // interior snapshots at log-spaced times toward the blow-up
    let snapshots = take_snapshots(&solver_cell, &path, t_inf_est, cfg.snapshots)?;

    Ok(BoundaryEvolution {
        times,
        boundary_values: values,
        fluxes,
        path,
        snapshots,
        t_inf_est,
        lambda_fit,
        psi_u0,
        report,
        flux_bound_violations,
        monotonicity_violations,
    })
}

fn fit_boundary_blowup(
    f: &ForcingLaw,
    times: &[f64],
    values: &[f64],
    b_top: f64,
) -> Result<(f64, f64, usize)> {
    let mut pairs = Vec::new();
    for (&t, &b) in times.iter().zip(values) {
        if b >= b_top / 10.0 {
            pairs.push((t, f.phi(b)?));
        }
    }
    if pairs.len() < 3 {
        return Err(Error::InsufficientDecade { got: pairs.len(), need: 3 });
    }
    let slope = least_squares_slope(&pairs);
    let lambda_fit = -slope;
    if !(lambda_fit > 0.0) {
        return Err(Error::InsufficientDecade { got: pairs.len(), need: 3 });
    }
    let n = pairs.len() as f64;
    let mt: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mp: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    Ok((mt + mp / lambda_fit, lambda_fit, pairs.len()))
}

fn take_snapshots(
    solver: &RefCell<FluxSolver<'_>>,
    path: &HermitePath,
    t_inf_est: f64,
    count: usize,
) -> Result<Vec<(f64, RadialProfile)>> {
    let t_last = path.t_end();
    let mut stamps = vec![0.0];
    // half uniform, half log-clustered toward the blow-up time
    let uniform = count / 2;
    for i in 1..=uniform {
        stamps.push(t_last * i as f64 / (uniform + 1) as f64);
    }
    let rem_max = (t_inf_est - 0.0).max(1e-300);
    let rem_min = (t_inf_est - t_last).max(1e-14 * t_inf_est);
    for i in 0..count - uniform {
        let w = i as f64 / (count - uniform) as f64;
        let rem = rem_max * (rem_min / rem_max).powf(w);
        let t = (t_inf_est - rem).clamp(0.0, t_last);
        stamps.push(t);
    }
    stamps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stamps.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * t_inf_est);

    let mut out = Vec::with_capacity(stamps.len());
    for t in stamps {
        let b = path.eval(t);
        let profile = solver.borrow_mut().profile(b)?;
        out.push((t, profile));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Rate diagnostics
// ---------------------------------------------------------------------------

/// One terminal-window diagnostic row.
#[derive(Debug, Clone, Copy)]
pub struct RateRow {
    pub t: f64,
    pub remaining: f64,
    pub b: f64,
    /// Φ(b)/(T∞ − t): tends to λ (strong) or (λL−1)/L (weak).
    pub phi_ratio: f64,
    /// b / Φ⁻¹(λ_eff (T∞−t)): tends to 1 from above.
    pub forcing_ratio: f64,
    /// b / Ψ⁻¹(T∞−t): the restart upper envelope, ≤ 1.
    pub psi_restart_ratio: f64,
    /// b / Ψ⁻¹(ν_min(Ψ(u₀)−t)): the traveling-subsolution lower
    /// envelope, ≥ 1 wherever defined.
    pub psi_envelope_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RateDiagnostics {
    pub regime: DominationRegime,
    /// λ (strong) or (λL−1)/L (weak): the coefficient entering Φ⁻¹.
    pub lambda_eff: f64,
    pub rows: Vec<RateRow>,
    /// Values at the last accepted sample.
    pub terminal: RateRow,
}

/// Terminal rate diagnostics over the last decade of remaining time.
pub fn rate_diagnostics(
    evo: &BoundaryEvolution,
    f: &ForcingLaw,
    g: &AbsorptionLaw,
) -> Result<RateDiagnostics> {
    let regime = evo.report.regime;
    let lambda_eff = match regime {
        DominationRegime::StrongDomination => f.lambda,
        DominationRegime::WeakDomination => {
            let l = evo.report.l_at_infinity;
            (f.lambda * l - 1.0) / l
        }
        DominationRegime::NoDomination => {
            return Err(Error::DominationFailed {
                lambda: f.lambda,
                threshold: f64::INFINITY,
                margin: GATE_MARGIN,
            })
        }
    };

    let t_last = *evo.times.last().unwrap();
    // keep the window above the f64 time resolution of T∞ − t, where the
    // pointwise ratios would be pure ulp noise
    let rem_floor = (evo.t_inf_est - t_last).max(1e-9 * evo.t_inf_est);
    let nu_min = 1.1;
    let mut rows = Vec::new();
    for (&t, &b) in evo.times.iter().zip(&evo.boundary_values) {
        let rem = evo.t_inf_est - t;
        if rem > 10.0 * rem_floor || rem < rem_floor {
            continue;
        }
        let phi = f.phi(b)?;
        let forcing_ratio = b / f.phi_inv(lambda_eff * rem)?;
        let psi_restart_ratio = match g.psi_inv(rem) {
            Ok(v) => b / v,
            Err(_) => f64::NAN,
        };
        let psi_envelope_ratio = match evo.psi_u0 {
            Some(t_psi) if t_psi > t => match g.psi_inv(nu_min * (t_psi - t)) {
                Ok(v) => b / v,
                Err(_) => f64::NAN,
            },
            _ => f64::NAN,
        };
        rows.push(RateRow {
            t,
            remaining: rem,
            b,
            phi_ratio: phi / rem,
            forcing_ratio,
            psi_restart_ratio,
            psi_envelope_ratio,
        });
    }
    if rows.len() < 10 {
        return Err(Error::InsufficientDecade { got: rows.len(), need: 10 });
    }
    let terminal = *rows.last().unwrap();
    Ok(RateDiagnostics { regime, lambda_eff, rows, terminal })
}

// ---------------------------------------------------------------------------
// Controlled continuation
// ---------------------------------------------------------------------------

/// Configuration of the controlled dynamic-boundary run.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryControlConfig {
    /// Control window as a fraction of the fitted blow-up time.
    pub eps_fraction: f64,
    pub q: f64,
    pub a: f64,
    pub gamma: f64,
    /// Horizon in units of T∞ (3.0 covers one and a half periods).
    pub horizon_factor: f64,
    pub neutral_grid: NeutralGridSpec,
    /// Interior reconstructions per period.
    pub snapshots: usize,
}

impl Default for BoundaryControlConfig {
    fn default() -> Self {
        BoundaryControlConfig {
            eps_fraction: 0.1,
            q: 2.0,
            a: 1.0,
            gamma: 0.2,
            horizon_factor: 3.0,
            neutral_grid: NeutralGridSpec::default(),
            snapshots: 16,
        }
    }
}

/// One interior certificate sample of the controlled run.
pub struct ControlledSnapshot {
    pub t: f64,
    pub profile: RadialProfile,
    /// Scalar majorant value V(t).
    pub majorant: f64,
    /// Whether the absorption was truncated at this time (control active).
    pub truncated: bool,
}

/// Outcome of the controlled dynamic-boundary run.
pub struct ControlledBoundary {
    pub uncontrolled: BoundaryEvolution,
    /// Boundary trace of the controlled solution over [0, horizon].
    pub boundary: PiecewiseTrajectory,
    /// Scalar controlled majorant V^α on the same horizon.
    pub majorant: PiecewiseTrajectory,
    pub snapshots: Vec<ControlledSnapshot>,
    pub knee: f64,
    pub eps: f64,
    pub t_inf: f64,
    /// sup over samples of c(t)/√(V(t)).
    pub flux_constant: f64,
    /// Violations of u ≤ V over all snapshot nodes and times.
    pub comparison_violations: usize,
    /// Violations of 0 ≤ c ≤ √(2G_eff(b)) over sampled times.
    pub flux_bound_violations: usize,
    /// All interior snapshot values finite.
    pub interior_finite: bool,
}

/// Run the controlled problem: uncontrolled evolution to T∞ − ε, neutral
/// continuation of the boundary trace with the elliptic flux as the extra
/// absorption, reflection and periodic extension, interior reconstruction
/// and the scalar comparison certificate.
pub fn evolve_controlled(
    f: &ForcingLaw,
    g: &AbsorptionLaw,
    cfg: &EvolutionConfig,
    ctrl: &BoundaryControlConfig,
) -> Result<ControlledBoundary> {
    let evo = evolve_uncontrolled(f, g, cfg)?;
    let t_inf = evo.t_inf_est;
    let eps = ctrl.eps_fraction * t_inf;
    let tau = t_inf - eps;
    let knee = evo.path.eval(tau);
    let kernel = build_kernel(ctrl.q, ctrl.a, ctrl.gamma, eps, t_inf)?;

    let f_trunc = f.truncate(knee);
    let g_trunc = g.truncate(knee);
    let path = evo.path.clone();
    let history = move |theta: f64| path.eval(theta + tau);

    // boundary trace on the singular window, with the truncated-g elliptic
    // flux as the extra absorption (quasi-static coupling); the truncated
    // flux saturates at g(M)R/N, so one tabulation covers the whole range
    let flux_cell =
        RefCell::new(FluxSolver::fixed(&g_trunc, cfg.radius, cfg.dim, cfg.grid, cfg.u0)?);
    let z_top = {
        let hist_peak = evo.path.eval(eps).max(cfg.u0);
        10.0 * ctrl.a.max(1.0) * hist_peak * ctrl.neutral_grid.cluster_floor.powf(-ctrl.gamma)
            + 100.0 * knee
    };
    let trunc_cache =
        FluxCache::build(&mut flux_cell.borrow_mut(), 1e-3 * cfg.u0, z_top, 40)?;
    let mut flux_fn = |_s: f64, z: f64| -> f64 { trunc_cache.eval(z) };
    let pde_neutral = neutral::solve_neutral(
        &f_trunc,
        &history,
        &kernel,
        ctrl.neutral_grid,
        Some(&mut flux_fn),
    )?;

    // scalar majorant: same kernel and delayed history, no flux, started
    // from its own truncated flow at τ
    let v_at_tau = f_trunc.flow(tau, cfg.u0)?;
    let v_neutral = neutral::solve_neutral_from(
        &f_trunc,
        &history,
        Some(v_at_tau),
        &kernel,
        ctrl.neutral_grid,
        None,
    )?;

    let horizon = ctrl.horizon_factor * t_inf;
    let boundary = assemble(&evo.path, tau, t_inf, &pde_neutral.t, &pde_neutral.z, horizon)?;
    let majorant = {
        // V on [0, τ] is the truncated scalar flow
        let mut t1 = Vec::new();
        let mut u1 = Vec::new();
        let n1 = 200;
        for i in 0..=n1 {
            let t = tau * i as f64 / n1 as f64;
            t1.push(t);
            u1.push(f_trunc.flow(t, cfg.u0)?);
        }
        let seg1 = Segment {
            t: t1,
            u: u1,
            tag: SegmentTag::Original,
            singular_start: false,
            singular_end: false,
        };
        assemble_with_first(seg1, tau, t_inf, &v_neutral.t, &v_neutral.z, horizon)?
    };

    // interior reconstruction and certificates at sampled times
    let full_cell = RefCell::new(FluxSolver::new(g, cfg.radius, cfg.dim, cfg.grid)?);
    let mut snapshots = Vec::new();
    let mut comparison_violations = 0;
    let mut flux_bound_violations = 0;
    let mut interior_finite = true;
    let mut flux_constant: f64 = 0.0;

    let n_snap = (ctrl.snapshots as f64 * ctrl.horizon_factor / 2.0).ceil() as usize;
    for i in 0..n_snap {
        let t = horizon * (i as f64 + 0.5) / n_snap as f64;
        let (Some(b), Some(v)) = (boundary.eval(t), majorant.eval(t)) else {
            continue;
        };
        let phase = t.rem_euclid(2.0 * t_inf);
        let active = phase > t_inf - eps && phase < t_inf + eps;
        let profile = if active {
            flux_cell.borrow_mut().profile(b)?
        } else {
            full_cell.borrow_mut().profile(b)?
        };
        if !profile.u.iter().all(|x| x.is_finite()) {
            interior_finite = false;
        }
        // comparison ordering u ≤ V at every node
        for &u in &profile.u {
            if u > v * (1.0 + 1e-9) + 1e-9 {
                comparison_violations += 1;
            }
        }
        // flux bound with the absorption in force at this time
        let c = profile.boundary_flux;
        let bound = if active { g_trunc.sqrt_2g(b) } else { g.sqrt_2g(b) };
        if !(c >= -1e-12 && c <= bound * (1.0 + FLUX_BOUND_SLACK) + 1e-12) {
            flux_bound_violations += 1;
        }
        if v > 0.0 {
            flux_constant = flux_constant.max(c / v.sqrt());
        }
        snapshots.push(ControlledSnapshot { t, profile, majorant: v, truncated: active });
    }

    Ok(ControlledBoundary {
        uncontrolled: evo,
        boundary,
        majorant,
        snapshots,
        knee,
        eps,
        t_inf,
        flux_constant,
        comparison_violations,
        flux_bound_violations,
        interior_finite,
    })
}

/// Assemble segments [0,τ] (from a dense path) + (τ, T∞) (neutral nodes)
/// + reflection, then tile periodically to the horizon.
fn assemble(
    path: &HermitePath,
    tau: f64,
    t_inf: f64,
    shifted_t: &[f64],
    z: &[f64],
    horizon: f64,
) -> Result<PiecewiseTrajectory> {
    let mut t1 = Vec::new();
    let mut u1 = Vec::new();
    for (&t, &b) in path.t.iter().zip(&path.y) {
        if t < tau {
            t1.push(t);
            u1.push(b);
        }
    }
    t1.push(tau);
    u1.push(path.eval(tau));
    let seg1 = Segment {
        t: t1,
        u: u1,
        tag: SegmentTag::Original,
        singular_start: false,
        singular_end: false,
    };
    assemble_with_first(seg1, tau, t_inf, shifted_t, z, horizon)
}

fn assemble_with_first(
    seg1: Segment,
    tau: f64,
    t_inf: f64,
    shifted_t: &[f64],
    z: &[f64],
    horizon: f64,
) -> Result<PiecewiseTrajectory> {
    let t_star = t_inf - tau;
    let mut t2 = Vec::new();
    let mut u2 = Vec::new();
    for (&s, &zz) in shifted_t.iter().zip(z) {
        if s < t_star {
            t2.push(tau + s);
            u2.push(zz);
        }
    }
    // keep the trace continuous at τ
    if let (Some(first2), Some(last1)) = (u2.first_mut(), seg1.u.last()) {
        if t2[0] == tau {
            *first2 = *last1;
        }
    }
    let seg2 = Segment {
        t: t2,
        u: u2,
        tag: SegmentTag::SingularGrowth,
        singular_start: false,
        singular_end: true,
    };
    let seg3 = reflect_and_extend(&[seg1.clone(), seg2.clone()], t_inf);
    let template =
        PiecewiseTrajectory { segments: vec![seg1, seg2, seg3], period: 2.0 * t_inf };
    periodic_extend(&template, horizon)
}

/// Interior-confinement and subsolution certificates of an uncontrolled
/// run against the large solution and the traveling Ψ⁻¹ envelope.
pub struct ConfinementReport {
    /// max over snapshots of u(r, t) for r ≤ 0.9 R.
    pub interior_max: f64,
    /// U∞(0.9R).
    pub large_solution_at_09: f64,
    /// Subsolution violations over all (ν, snapshot, node) triples.
    pub subsolution_violations: usize,
    /// Interior-bound violations u(r,t) ≤ U∞(r) over snapshot nodes.
    pub interior_bound_violations: usize,
}

pub fn confinement_report(
    evo: &BoundaryEvolution,
    g: &AbsorptionLaw,
    large: &elliptic::LargeSolution,
    nu_values: &[f64],
) -> Result<ConfinementReport> {
    let radius = large.radius;
    let mut interior_max: f64 = 0.0;
    let mut subsolution_violations = 0;
    let mut interior_bound_violations = 0;
    let t_psi = evo.psi_u0.ok_or_else(|| {
        Error::KellerOssermanFails("confinement needs the Keller-Osserman integral".into())
    })?;

    for (t, profile) in &evo.snapshots {
        for (&r, &u) in profile.grid.nodes.iter().zip(&profile.u) {
            if r <= 0.9 * radius {
                interior_max = interior_max.max(u);
            }
            // upper bound by the large solution (1% slack near the anchor)
            if r < radius {
                let cap = large.eval(r)?;
                if u > cap * (1.0 + 1e-2) + 1e-9 {
                    interior_bound_violations += 1;
                }
            }
            // lower bound by the traveling subsolution, T = Ψ(u₀)
            for &nu in nu_values {
                if *t < t_psi {
                    let envelope = g.psi_inv(nu * (t_psi - t + radius - r))?;
                    if u < envelope * (1.0 - 1e-9) - 1e-9 {
                        subsolution_violations += 1;
                    }
                }
            }
        }
    }
    Ok(ConfinementReport {
        interior_max,
        large_solution_at_09: large.eval(0.9 * radius)?,
        subsolution_violations,
        interior_bound_violations,
    })
}
