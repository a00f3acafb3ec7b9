//! The `check` experiment: a quick battery over the module invariants,
//! one pass/fail line each.

use blowup_core::elliptic::{solve_dirichlet, GridSpec, RadialGrid};
use blowup_core::law::{
    domination_report, psi_inv_identity_residuals, AbsorptionLaw, DominationRegime, ForcingLaw,
    ProbeGrid,
};
use blowup_core::neutral::{controlled_explosion, ControlConfig};
use blowup_core::scalar::{closed_trajectory, integrate_until_blowup, StepControl};
use blowup_core::selfsim::{sample_points, SelfSimilarSolution};
use blowup_core::variation::{verify_representation, FlowMap};

struct Check {
    name: &'static str,
    run: fn() -> Result<String, String>,
}

fn check_phi_round_trip() -> Result<String, String> {
    let law = ForcingLaw::power(2.5, 0.3, 1.2).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut r = 1e-3;
    while r <= 1e6 {
        let z = law.phi(r).map_err(|e| e.to_string())?;
        let back = law.phi_inv(z).map_err(|e| e.to_string())?;
        worst = worst.max((back - r).abs() / r);
        r *= 10.0;
    }
    if worst < 1e-9 {
        Ok(format!("round-trip err {worst:.1e}"))
    } else {
        Err(format!("round-trip err {worst:.1e}"))
    }
}

fn check_psi_identities() -> Result<String, String> {
    let g = AbsorptionLaw::power(3.0).map_err(|e| e.to_string())?;
    let (r1, r2) = psi_inv_identity_residuals(&g, 0.4, 1e-4).map_err(|e| e.to_string())?;
    if r1 < 1e-5 && r2 < 1e-3 {
        Ok(format!("Ψ⁻¹ identity residuals {r1:.1e}, {r2:.1e}"))
    } else {
        Err(format!("Ψ⁻¹ identity residuals {r1:.1e}, {r2:.1e}"))
    }
}

fn check_blowup_fit() -> Result<String, String> {
    let law = ForcingLaw::power(2.0, 0.0, 1.0).map_err(|e| e.to_string())?;
    let est =
        integrate_until_blowup(&law, 1.0, StepControl::default()).map_err(|e| e.to_string())?;
    let err = (est.t_est - 1.0).abs();
    if err < 1e-6 {
        Ok(format!("T_est err {err:.1e}"))
    } else {
        Err(format!("T_est err {err:.1e}"))
    }
}

fn check_conservation() -> Result<String, String> {
    let law = ForcingLaw::power(3.0, 0.0, 2.0).map_err(|e| e.to_string())?;
    let sol = closed_trajectory(&law, 0.8).map_err(|e| e.to_string())?;
    let reference = law.phi(0.8).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 1..20 {
        let t = sol.t_inf * i as f64 / 21.0;
        let u = sol.eval(t).map_err(|e| e.to_string())?;
        let value = law.phi(u).map_err(|e| e.to_string())? + law.lambda * t;
        worst = worst.max((value - reference).abs() / reference);
    }
    if worst < 1e-9 {
        Ok(format!("Φ-conservation drift {worst:.1e}"))
    } else {
        Err(format!("Φ-conservation drift {worst:.1e}"))
    }
}

fn check_flow_semigroup() -> Result<String, String> {
    let fm = FlowMap::scalar(|u| u.sin() + 0.5);
    let direct = fm.flow(1.5, 0.0, &[0.4]).map_err(|e| e.to_string())?;
    let mid = fm.flow(0.7, 0.0, &[0.4]).map_err(|e| e.to_string())?;
    let via = fm.flow(1.5, 0.7, &mid).map_err(|e| e.to_string())?;
    let err = (direct[0] - via[0]).abs();
    if err < 1e-8 {
        Ok(format!("semigroup gap {err:.1e}"))
    } else {
        Err(format!("semigroup gap {err:.1e}"))
    }
}

fn check_representation() -> Result<String, String> {
    let fm = FlowMap::scalar(|u| u * u);
    let r = verify_representation(&fm, |t, _, b| b[0] = -t.sin(), 0.0, &[1.0], 0.5, 4)
        .map_err(|e| e.to_string())?;
    if r <= 1e-6 {
        Ok(format!("representation residual {r:.1e}"))
    } else {
        Err(format!("representation residual {r:.1e}"))
    }
}

fn check_domination() -> Result<String, String> {
    let f = ForcingLaw::power(2.0, 0.0, 1.0).map_err(|e| e.to_string())?;
    let g = AbsorptionLaw::power(3.0).map_err(|e| e.to_string())?;
    let rep = domination_report(&f, &g, ProbeGrid::default());
    let err = (rep.lambda_0 - 0.5_f64.sqrt()).abs();
    if rep.regime == DominationRegime::WeakDomination && err < 1e-10 {
        Ok(format!("λ₀ err {err:.1e}"))
    } else {
        Err(format!("regime {:?}, λ₀ err {err:.1e}", rep.regime))
    }
}

fn check_controlled_pipeline() -> Result<String, String> {
    let law = ForcingLaw::power(2.0, 0.0, 1.0).map_err(|e| e.to_string())?;
    let run = controlled_explosion(&law, 1.0, ControlConfig::default(), 2.0)
        .map_err(|e| e.to_string())?;
    let fit = run.singular_fit.ok_or("missing singular fit")?;
    let min = run.trajectory.min_sample();
    if (fit.gamma_fit - 0.2).abs() <= 0.02 && min > 0.0 {
        Ok(format!("γ fit {:.3}, min {min:.2e}", fit.gamma_fit))
    } else {
        Err(format!("γ fit {:.3}, min {min:.2e}", fit.gamma_fit))
    }
}

fn check_elliptic_gradient_bound() -> Result<String, String> {
    let g = AbsorptionLaw::power(3.0).map_err(|e| e.to_string())?;
    let grid = RadialGrid::new(1.0, 3, GridSpec::default()).map_err(|e| e.to_string())?;
    let p = solve_dirichlet(&g, &grid, 10.0, None).map_err(|e| e.to_string())?;
    if p.gradient_bound_ok {
        Ok(format!("flux {:.5e}", p.boundary_flux))
    } else {
        Err("gradient bound violated".into())
    }
}

fn check_selfsim() -> Result<String, String> {
    let sol = SelfSimilarSolution::new(3.0).map_err(|e| e.to_string())?;
    let samples = sample_points(1, 200, 3.0);
    let dev = sol.scaling_invariance(2.0, &samples).map_err(|e| e.to_string())?;
    let res = sol.profile_boundary_residual().map_err(|e| e.to_string())?.abs();
    if dev <= 1e-12 && res <= 1e-10 {
        Ok(format!("scaling {dev:.1e}, boundary residual {res:.1e}"))
    } else {
        Err(format!("scaling {dev:.1e}, boundary residual {res:.1e}"))
    }
}

/// Run every check; returns the number of failures.
pub fn run_all() -> usize {
    let checks = [
        Check { name: "phi-round-trip", run: check_phi_round_trip },
        Check { name: "psi-inverse-identities", run: check_psi_identities },
        Check { name: "blowup-time-fit", run: check_blowup_fit },
        Check { name: "phi-conservation", run: check_conservation },
        Check { name: "flow-semigroup", run: check_flow_semigroup },
        Check { name: "representation-residual", run: check_representation },
        Check { name: "domination-threshold", run: check_domination },
        Check { name: "controlled-explosion", run: check_controlled_pipeline },
        Check { name: "elliptic-gradient-bound", run: check_elliptic_gradient_bound },
        Check { name: "self-similar-exactness", run: check_selfsim },
    ];
    let mut failures = 0;
    for check in &checks {
        match (check.run)() {
            Ok(detail) => println!("[PASS] {}: {detail}", check.name),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {}: {detail}", check.name);
            }
        }
    }
    failures
}
