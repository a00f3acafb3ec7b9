//! Experiment runners: each resolves its config sections, runs the
//! owning solver module, and emits CSV artifacts plus a metadata sidecar.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;

use blowup_core::boundary::{evolve_controlled, evolve_uncontrolled, rate_diagnostics};
use blowup_core::elliptic::{large_solution, solve_dirichlet, RadialGrid, RadialProfile};
use blowup_core::law::{AbsorptionLaw, ForcingLaw};
use blowup_core::neutral::{coincidence_check, controlled_explosion};
use blowup_core::scalar::{self, integrate_until_blowup};
use blowup_core::selfsim::{sample_points, SelfSimilarSolution, SimValue};

use crate::config::{Config, Sidecar};
use crate::csvio::{fmt_real, CsvWriter};

pub struct RunContext<'a> {
    pub out_dir: &'a Path,
    pub workers: usize,
    pub force: bool,
}

fn write_sidecar(
    out_dir: &Path,
    experiment: &str,
    config: &Config,
    started: Instant,
) -> Result<()> {
    let sidecar = Sidecar {
        experiment: experiment.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_ms: started.elapsed().as_millis() as u64,
        config: config.clone(),
    };
    let text = toml::to_string_pretty(&sidecar)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(format!("{experiment}.meta.toml")), text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// ode
// ---------------------------------------------------------------------------

pub fn run_ode(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let forcing = config.forcing.as_ref().context("missing [forcing] section")?;
    let scalar_spec = config.scalar.as_ref().context("missing [scalar] section")?;
    let law = forcing.build()?;
    let est = integrate_until_blowup(&law, scalar_spec.u0, scalar_spec.step_control())?;
    let t_closed = scalar::blowup_time(&law, scalar_spec.u0).ok();

    let mut w = CsvWriter::create(&ctx.out_dir.join("trajectory.csv"), &["t", "u"])?;
    for (&t, &u) in est.path.t.iter().zip(&est.path.y) {
        w.reals(&[t, u])?;
    }
    w.finish()?;

    let mut s = CsvWriter::create(
        &ctx.out_dir.join("summary.csv"),
        &["u0", "lambda", "t_est", "t_closed", "abs_err", "lambda_fit", "fit_samples"],
    )?;
    let t_closed_v = t_closed.unwrap_or(f64::NAN);
    s.row(&[
        fmt_real(scalar_spec.u0),
        fmt_real(law.lambda),
        fmt_real(est.t_est),
        fmt_real(t_closed_v),
        fmt_real((est.t_est - t_closed_v).abs()),
        fmt_real(est.lambda_fit),
        est.fit_samples.to_string(),
    ])?;
    s.finish()?;
    write_sidecar(ctx.out_dir, "ode", config, started)
}

// ---------------------------------------------------------------------------
// control-ode
// ---------------------------------------------------------------------------

pub fn run_control_ode(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let forcing = config.forcing.as_ref().context("missing [forcing] section")?;
    let scalar_spec = config.scalar.as_ref().context("missing [scalar] section")?;
    let control = config.control.as_ref().context("missing [control] section")?;
    let law = forcing.build()?;
    let cfg = control.scalar_config();
    let horizon = control.horizon.unwrap_or(4.0 * scalar::blowup_time(&law, scalar_spec.u0)?);
    let run = controlled_explosion(&law, scalar_spec.u0, cfg, horizon)?;

    let mut w = CsvWriter::create(
        &ctx.out_dir.join("trajectory.csv"),
        &["t", "u", "segment_tag", "is_singular_endpoint"],
    )?;
    for seg in &run.trajectory.segments {
        if seg.singular_start {
            if let Some(&t0) = seg.t.first() {
                w.row(&[fmt_real(t0), "inf".into(), seg.tag.as_str().into(), "1".into()])?;
            }
        }
        for (&t, &u) in seg.t.iter().zip(&seg.u) {
            w.row(&[fmt_real(t), fmt_real(u), seg.tag.as_str().into(), "0".into()])?;
        }
        if seg.singular_end {
            if let Some(&t1) = seg.t.last() {
                w.row(&[fmt_real(t1), "inf".into(), seg.tag.as_str().into(), "1".into()])?;
            }
        }
    }
    w.finish()?;

    let coincidence = coincidence_check(&run.trajectory, &run.closed, cfg.eps)?;
    let fit = run.singular_fit;
    let mut s = CsvWriter::create(
        &ctx.out_dir.join("summary.csv"),
        &[
            "t_est",
            "t_inf_closed",
            "knee",
            "gamma_fit",
            "prefactor_fit",
            "t_star_fit",
            "l1_period_0",
            "l1_period_1",
            "coincidence_dev",
            "min_sample",
        ],
    )?;
    s.reals(&[
        run.t_est,
        run.closed.t_inf,
        run.knee.unwrap_or(f64::INFINITY),
        fit.map_or(f64::NAN, |f| f.gamma_fit),
        fit.map_or(f64::NAN, |f| f.prefactor_fit),
        fit.map_or(f64::NAN, |f| f.t_star_fit),
        run.trajectory.l1_over_period(0),
        run.trajectory.l1_over_period(1),
        coincidence,
        run.trajectory.min_sample(),
    ])?;
    s.finish()?;
    write_sidecar(ctx.out_dir, "control-ode", config, started)
}

// ---------------------------------------------------------------------------
// elliptic / large
// ---------------------------------------------------------------------------

fn write_profile(path: &Path, profile: &RadialProfile, g: &AbsorptionLaw) -> Result<()> {
    let mut w =
        CsvWriter::create(path, &["r", "u", "u_prime", "psi_inv_of_dist", "ratio"])?;
    let du = profile.derivative();
    let radius = profile.grid.radius;
    for ((&r, &u), &d) in profile.grid.nodes.iter().zip(&profile.u).zip(&du) {
        let dist = radius - r;
        let psi_inv = if dist > 0.0 { g.psi_inv(dist).unwrap_or(f64::NAN) } else { f64::INFINITY };
        w.reals(&[r, u, d, psi_inv, u / psi_inv])?;
    }
    w.finish()
}

pub fn run_elliptic(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let absorption = config.absorption.as_ref().context("missing [absorption] section")?;
    let geometry = config.geometry.as_ref().context("missing [geometry] section")?;
    let elliptic = config.elliptic.as_ref().context("missing [elliptic] section")?;
    let g = absorption.build()?;
    let grid = RadialGrid::new(geometry.radius, geometry.dimension, geometry.grid_spec())?;
    let profile = solve_dirichlet(&g, &grid, elliptic.beta, None)?;

    write_profile(&ctx.out_dir.join("profile.csv"), &profile, &g)?;
    let mut s = CsvWriter::create(
        &ctx.out_dir.join("summary.csv"),
        &["beta", "center_value", "boundary_flux", "gradient_bound_ok"],
    )?;
    s.row(&[
        fmt_real(elliptic.beta),
        fmt_real(profile.u[0]),
        fmt_real(profile.boundary_flux),
        (profile.gradient_bound_ok as u8).to_string(),
    ])?;
    s.finish()?;
    write_sidecar(ctx.out_dir, "elliptic", config, started)
}

pub fn run_large(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let absorption = config.absorption.as_ref().context("missing [absorption] section")?;
    let geometry = config.geometry.as_ref().context("missing [geometry] section")?;
    let g = absorption.build()?;
    let sol =
        large_solution(&g, geometry.radius, geometry.dimension, geometry.grid_spec())?;

    write_profile(&ctx.out_dir.join("profile.csv"), &sol.profile, &g)?;
    let mut s = CsvWriter::create(
        &ctx.out_dir.join("summary.csv"),
        &["closure_distance", "sweeps", "center_value"],
    )?;
    s.row(&[
        fmt_real(sol.closure_distance),
        sol.sweeps.to_string(),
        fmt_real(sol.profile.u[0]),
    ])?;
    s.finish()?;
    write_sidecar(ctx.out_dir, "large", config, started)
}

// ---------------------------------------------------------------------------
// dynbc / control-pde
// ---------------------------------------------------------------------------

pub fn run_dynbc(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let forcing = config.forcing.as_ref().context("missing [forcing] section")?;
    let absorption = config.absorption.as_ref().context("missing [absorption] section")?;
    let f = forcing.build()?;
    let g = absorption.build()?;
    let cfg = config.evolution_config(ctx.force)?;
    if ctx.force {
        eprintln!("warning: --force overrides the domination gate");
    }
    let evo = evolve_uncontrolled(&f, &g, &cfg)?;
    let diag = rate_diagnostics(&evo, &f, &g).ok();

    let mut w = CsvWriter::create(
        &ctx.out_dir.join("boundary.csv"),
        &["t", "b", "c", "t_inf_est", "ratio_phi", "ratio_psi", "ratio_two_sided"],
    )?;
    let lambda_eff = diag.as_ref().map_or(f.lambda, |d| d.lambda_eff);
    for ((&t, &b), &c) in evo.times.iter().zip(&evo.boundary_values).zip(&evo.fluxes) {
        let rem = evo.t_inf_est - t;
        let (r_phi, r_psi, r_two) = if rem > 0.0 {
            (
                f.phi(b).map_or(f64::NAN, |p| p / rem),
                g.psi_inv(rem).map_or(f64::NAN, |v| b / v),
                f.phi_inv(lambda_eff * rem).map_or(f64::NAN, |v| b / v),
            )
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        w.reals(&[t, b, c, evo.t_inf_est, r_phi, r_psi, r_two])?;
    }
    w.finish()?;

    for (i, (t, profile)) in evo.snapshots.iter().enumerate() {
        let path = ctx.out_dir.join(format!("snapshot_{i:03}.csv"));
        write_profile(&path, profile, &g)?;
        // prepend is cheap to skip: snapshot time goes to the summary
        let _ = t;
    }

    let mut s = CsvWriter::create(
        &ctx.out_dir.join("summary.csv"),
        &[
            "t_inf_est",
            "lambda_fit",
            "psi_u0",
            "lambda_0",
            "flux_bound_violations",
            "monotonicity_violations",
            "terminal_phi_ratio",
            "terminal_forcing_ratio",
        ],
    )?;
    s.reals(&[
        evo.t_inf_est,
        evo.lambda_fit,
        evo.psi_u0.unwrap_or(f64::INFINITY),
        evo.report.lambda_0,
        evo.flux_bound_violations as f64,
        evo.monotonicity_violations as f64,
        diag.as_ref().map_or(f64::NAN, |d| d.terminal.phi_ratio),
        diag.as_ref().map_or(f64::NAN, |d| d.terminal.forcing_ratio),
    ])?;
    s.finish()?;
    write_sidecar(ctx.out_dir, "dynbc", config, started)
}

pub fn run_control_pde(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let forcing = config.forcing.as_ref().context("missing [forcing] section")?;
    let absorption = config.absorption.as_ref().context("missing [absorption] section")?;
    let control = config.control.as_ref().context("missing [control] section")?;
    let f = forcing.build()?;
    let g = absorption.build()?;
    let cfg = config.evolution_config(ctx.force)?;
    let ctrl = control.boundary_config();
    let run = evolve_controlled(&f, &g, &cfg, &ctrl)?;

    let mut w = CsvWriter::create(
        &ctx.out_dir.join("boundary.csv"),
        &["t", "u", "segment_tag", "is_singular_endpoint"],
    )?;
    for seg in &run.boundary.segments {
        if seg.singular_start {
            if let Some(&t0) = seg.t.first() {
                w.row(&[fmt_real(t0), "inf".into(), seg.tag.as_str().into(), "1".into()])?;
            }
        }
        for (&t, &u) in seg.t.iter().zip(&seg.u) {
            w.row(&[fmt_real(t), fmt_real(u), seg.tag.as_str().into(), "0".into()])?;
        }
        if seg.singular_end {
            if let Some(&t1) = seg.t.last() {
                w.row(&[fmt_real(t1), "inf".into(), seg.tag.as_str().into(), "1".into()])?;
            }
        }
    }
    w.finish()?;

    let mut m = CsvWriter::create(&ctx.out_dir.join("majorant.csv"), &["t", "v"])?;
    for seg in &run.majorant.segments {
        for (&t, &v) in seg.t.iter().zip(&seg.u) {
            m.reals(&[t, v])?;
        }
    }
    m.finish()?;

    for (i, snap) in run.snapshots.iter().enumerate() {
        write_profile(&ctx.out_dir.join(format!("snapshot_{i:03}.csv")), &snap.profile, &g)?;
    }

    let mut s = CsvWriter::create(
        &ctx.out_dir.join("summary.csv"),
        &[
            "t_inf_est",
            "eps",
            "knee",
            "flux_constant",
            "comparison_violations",
            "flux_bound_violations",
            "interior_finite",
        ],
    )?;
    s.row(&[
        fmt_real(run.t_inf),
        fmt_real(run.eps),
        fmt_real(run.knee),
        fmt_real(run.flux_constant),
        run.comparison_violations.to_string(),
        run.flux_bound_violations.to_string(),
        (run.interior_finite as u8).to_string(),
    ])?;
    s.finish()?;
    write_sidecar(ctx.out_dir, "control-pde", config, started)
}

// ---------------------------------------------------------------------------
// selfsim
// ---------------------------------------------------------------------------

pub fn run_selfsim(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let spec = config.selfsim.as_ref().context("missing [selfsim] section")?;
    let sol = SelfSimilarSolution::new(spec.m)
        .map_err(|e| anyhow::anyhow!("invalid self-similar family: {e}"))?;
    let samples = sample_points(config.seed(), spec.samples, spec.span);

    let mut w = CsvWriter::create(
        &ctx.out_dir.join("selfsim.csv"),
        &["x_n", "t", "u_or_flag", "is_blown_up", "t_inf_of_xn"],
    )?;
    for &(x_n, t) in &samples {
        let (value, flag) = match sol.solution(x_n, t) {
            SimValue::Finite(v) => (fmt_real(v), "0"),
            SimValue::BlownUp => ("inf".to_string(), "1"),
        };
        w.row(&[
            fmt_real(x_n),
            fmt_real(t),
            value,
            flag.to_string(),
            fmt_real(sol.blowup_time(x_n)),
        ])?;
    }
    w.finish()?;
    write_sidecar(ctx.out_dir, "selfsim", config, started)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

pub fn run_sweep(config: &Config, ctx: &RunContext) -> Result<()> {
    let started = Instant::now();
    let sweep = config.sweep.as_ref().context("missing [sweep] section")?;
    let base_cfg = config.evolution_config(ctx.force)?;

    // lexicographic cell order: p, lambda, m, u0
    let mut cells = Vec::new();
    for &p in &sweep.p {
        for &lambda in &sweep.lambda {
            for &m in &sweep.m {
                for &u0 in &sweep.u0 {
                    cells.push((p, lambda, m, u0));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers.max(1))
        .build()
        .context("worker pool")?;

    let rows: Vec<Vec<String>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, lambda, m, u0)| {
                let mut cfg = base_cfg.clone();
                cfg.u0 = u0;
                if let Some(cap) = sweep.cap {
                    cfg.cap = cap;
                }
                let cell = (|| -> Result<(f64, f64, f64), blowup_core::Error> {
                    let f = ForcingLaw::power(p, 0.0, lambda)?;
                    let g = AbsorptionLaw::power(m)?;
                    let evo = evolve_uncontrolled(&f, &g, &cfg)?;
                    let diag = rate_diagnostics(&evo, &f, &g)?;
                    Ok((evo.t_inf_est, diag.terminal.phi_ratio, diag.terminal.forcing_ratio))
                })();
                match cell {
                    Ok((t_inf, phi_ratio, forcing_ratio)) => vec![
                        fmt_real(p),
                        fmt_real(lambda),
                        fmt_real(m),
                        fmt_real(u0),
                        "ok".to_string(),
                        fmt_real(t_inf),
                        fmt_real(phi_ratio),
                        fmt_real(forcing_ratio),
                    ],
                    Err(e) => vec![
                        fmt_real(p),
                        fmt_real(lambda),
                        fmt_real(m),
                        fmt_real(u0),
                        error_tag(&e).to_string(),
                        "nan".to_string(),
                        "nan".to_string(),
                        "nan".to_string(),
                    ],
                }
            })
            .collect()
    });

    let mut w = CsvWriter::create(
        &ctx.out_dir.join("sweep.csv"),
        &["p", "lambda", "m", "u0", "status", "t_inf_est", "terminal_phi_ratio", "terminal_forcing_ratio"],
    )?;
    for row in rows {
        w.row(&row)?;
    }
    w.finish()?;
    write_sidecar(ctx.out_dir, "sweep", config, started)
}

fn error_tag(e: &blowup_core::Error) -> &'static str {
    use blowup_core::Error::*;
    match e {
        DominationFailed { .. } => "domination-failed",
        CapNotReached { .. } => "cap-not-reached",
        NewtonStalled { .. } => "newton-stalled",
        NonConvergedGrid { .. } => "grid-not-converged",
        InsufficientDecade { .. } => "insufficient-decade",
        KellerOssermanFails(_) => "keller-osserman-fails",
        NotSuperlinear(_) => "not-superlinear",
        _ => "error",
    }
}
