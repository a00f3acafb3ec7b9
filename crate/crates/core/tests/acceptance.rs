//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured quantities (run with `--nocapture` to see them all).
//! Expensive evolutions are shared across criteria through `OnceLock`.

use std::sync::OnceLock;
use std::time::Instant;

use blowup_core::boundary::{
    confinement_report, evolve_controlled, evolve_uncontrolled, rate_diagnostics,
    BoundaryControlConfig, BoundaryEvolution, ConfinementReport, ControlledBoundary,
    EvolutionConfig, RateDiagnostics,
};
use blowup_core::elliptic::{large_solution, GridSpec, LargeSolution};
use blowup_core::law::{domination_report, AbsorptionLaw, DominationRegime, ForcingLaw, ProbeGrid};
use blowup_core::neutral::{controlled_explosion, ControlConfig};
use blowup_core::scalar::{integrate_until_blowup, StepControl};
use blowup_core::selfsim::{sample_points, SelfSimilarSolution, SimValue};
use blowup_core::variation::{verify_representation, FlowMap};
use blowup_core::Error;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

struct StrongBundle {
    evo: BoundaryEvolution,
    diag: RateDiagnostics,
    large: LargeSolution,
    confinement: ConfinementReport,
}

fn strong_run() -> &'static StrongBundle {
    static CELL: OnceLock<StrongBundle> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = ForcingLaw::power(3.0, 0.0, 1.0).unwrap();
        let g = AbsorptionLaw::power(3.0).unwrap();
        let cfg = EvolutionConfig::default(); // u0 = 2, N = 3, R = 1, cap 1e8
        let evo = evolve_uncontrolled(&f, &g, &cfg).unwrap();
        let diag = rate_diagnostics(&evo, &f, &g).unwrap();
        let large = large_solution(&g, 1.0, 3, GridSpec::default()).unwrap();
        let confinement = confinement_report(&evo, &g, &large, &cfg.nu_values).unwrap();
        StrongBundle { evo, diag, large, confinement }
    })
}

fn weak_run() -> &'static (BoundaryEvolution, RateDiagnostics) {
    static CELL: OnceLock<(BoundaryEvolution, RateDiagnostics)> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = ForcingLaw::power(2.0, 0.0, 2.0).unwrap();
        let g = AbsorptionLaw::power(3.0).unwrap();
        let cfg = EvolutionConfig::default();
        let evo = evolve_uncontrolled(&f, &g, &cfg).unwrap();
        let diag = rate_diagnostics(&evo, &f, &g).unwrap();
        (evo, diag)
    })
}

fn controlled_run() -> &'static ControlledBoundary {
    static CELL: OnceLock<ControlledBoundary> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = ForcingLaw::power(3.0, 0.0, 1.0).unwrap();
        let g = AbsorptionLaw::power(3.0).unwrap();
        let cfg = EvolutionConfig::default();
        let ctrl = BoundaryControlConfig::default(); // ε = 0.1 T∞, horizon 3 T∞
        evolve_controlled(&f, &g, &cfg, &ctrl).unwrap()
    })
}

#[test]
fn criterion_01_squares_example_reproduction() {
    let t0 = Instant::now();
    let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
    let run = controlled_explosion(&law, 1.0, ControlConfig::default(), 4.0).unwrap();

    let t_err = (run.t_est - 1.0).abs();
    assert!(t_err <= 1e-6, "blow-up time estimate off by {t_err:.2e}");

    assert!(run.trajectory.t_end() >= 4.0 - 1e-9, "trajectory must cover [0, 4]");
    let min = run.trajectory.min_sample();
    assert!(min > 0.0, "positivity violated: min sample {min}");

    let p0 = run.trajectory.l1_over_period(0);
    let p1 = run.trajectory.l1_over_period(1);
    assert!(p0.is_finite() && p1.is_finite());
    let l1_gap = (p0 / p1 - 1.0).abs();
    assert!(l1_gap <= 0.01, "per-period L1 masses differ by {l1_gap:.2e}");

    let fit = run.singular_fit.unwrap();
    assert!(
        (fit.gamma_fit - 0.2).abs() <= 0.02,
        "singular exponent fit {} not within 0.2 ± 0.02",
        fit.gamma_fit
    );

    println!(
        "[PASS] criterion 01: T_est err {t_err:.2e}, L1/period {p0:.6} (gap {l1_gap:.2e}), \
         gamma fit {:.4}, min {min:.3e}  [{:.1?}]",
        fit.gamma_fit,
        t0.elapsed()
    );
}

#[test]
fn criterion_02_power_blowup_times() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for &p in &[1.5, 2.0, 3.0] {
        for &lambda in &[0.5, 1.0, 2.0] {
            for &u0 in &[0.5_f64, 1.0, 4.0] {
                let law = ForcingLaw::power(p, 0.0, lambda).unwrap();
                let exact = 1.0 / (lambda * (p - 1.0) * u0.powf(p - 1.0));
                let est = integrate_until_blowup(&law, u0, StepControl::default()).unwrap();
                let rel = (est.t_est - exact).abs() / exact;
                worst = worst.max(rel);
                assert!(
                    rel <= 1e-6,
                    "p={p} lambda={lambda} u0={u0}: rel err {rel:.2e}"
                );
            }
        }
    }
    println!(
        "[PASS] criterion 02: 27 power cells, worst relative T error {worst:.2e}  [{:.1?}]",
        t0.elapsed()
    );
}

#[test]
fn criterion_03_variation_of_constants_representation() {
    let t0 = Instant::now();

    // unperturbed
    let fm = FlowMap::scalar(|u| u * u);
    let r1 = verify_representation(&fm, |_, _, b| b[0] = 0.0, 0.0, &[1.0], 0.5, 8).unwrap();
    assert!(r1 <= 1e-6, "unperturbed residual {r1:.2e}");

    // time forcing: y' = y² + sin t
    let r2 = verify_representation(&fm, |t, _, b| b[0] = -t.sin(), 0.0, &[1.0], 0.5, 8).unwrap();
    assert!(r2 <= 1e-6, "sin-forced residual {r2:.2e}");

    // linear rotation with εy damping (the Duhamel case)
    let rot = FlowMap::new(2, |y, dy| {
        dy[0] = y[1];
        dy[1] = -y[0];
    })
    .with_jacobian(|_, j| j.copy_from_slice(&[0.0, 1.0, -1.0, 0.0]));
    let r3 = verify_representation(
        &rot,
        |_, y, b| {
            b[0] = 0.1 * y[0];
            b[1] = 0.1 * y[1];
        },
        0.0,
        &[1.0, 0.5],
        1.0,
        8,
    )
    .unwrap();
    assert!(r3 <= 1e-6, "Duhamel residual {r3:.2e}");

    // sensitivity against finite differences of the flow
    let fm_fd = FlowMap::scalar(|u| u * u);
    let phi = fm_fd.sensitivity(0.5, 0.0, &[1.0]).unwrap()[0];
    let d = 1e-6;
    let up = fm_fd.flow(0.5, 0.0, &[1.0 + d]).unwrap()[0];
    let dn = fm_fd.flow(0.5, 0.0, &[1.0 - d]).unwrap()[0];
    let fd = (up - dn) / (2.0 * d);
    let sens_rel = (phi - fd).abs() / fd.abs();
    assert!(sens_rel <= 1e-5, "sensitivity vs finite differences {sens_rel:.2e}");

    println!(
        "[PASS] criterion 03: residuals {r1:.1e}/{r2:.1e}/{r3:.1e}, sensitivity-FD {sens_rel:.1e}  [{:.1?}]",
        t0.elapsed()
    );
}

#[test]
fn criterion_04_large_solution_boundary_profiles() {
    let t0 = Instant::now();

    // m = 3: U∞(r)/Ψ⁻¹(1−r) within [0.98, 1.02] for 1−r ≤ 1e−2
    let large = &strong_run().large;
    let mut band = (f64::INFINITY, 0.0_f64);
    for (&r, &u) in large.profile.grid.nodes.iter().zip(&large.profile.u) {
        let d = 1.0 - r;
        if d <= 1e-2 {
            let ratio = u / (SQRT_2 / d);
            band = (band.0.min(ratio), band.1.max(ratio));
            assert!(
                (0.98..=1.02).contains(&ratio),
                "m=3 profile ratio {ratio:.5} at distance {d:.2e}"
            );
        }
    }

    // g = e^s: ratio against log(2/d²) within [0.95, 1.05]
    let g = AbsorptionLaw::exp().unwrap();
    let sol = large_solution(&g, 1.0, 3, GridSpec::default()).unwrap();
    let mut band_exp = (f64::INFINITY, 0.0_f64);
    for (&r, &u) in sol.profile.grid.nodes.iter().zip(&sol.profile.u) {
        let d = 1.0 - r;
        if d <= 1e-2 {
            let ratio = u / (2.0 / (d * d)).ln();
            band_exp = (band_exp.0.min(ratio), band_exp.1.max(ratio));
            assert!(
                (0.95..=1.05).contains(&ratio),
                "exp profile ratio {ratio:.5} at distance {d:.2e}"
            );
        }
    }

    println!(
        "[PASS] criterion 04: m=3 band [{:.4}, {:.4}], exp band [{:.4}, {:.4}]  [{:.1?}]",
        band.0,
        band.1,
        band_exp.0,
        band_exp.1,
        t0.elapsed()
    );
}

#[test]
fn criterion_05_boundary_blowup_and_confinement() {
    let t0 = Instant::now();
    let bundle = strong_run();
    let psi_u0 = bundle.evo.psi_u0.unwrap(); // Ψ₃(2) = √2/2

    assert!((psi_u0 - SQRT_2 / 2.0).abs() <= 1e-12);
    assert!(
        bundle.evo.t_inf_est <= psi_u0 + 1e-3,
        "T_est {} above Ψ(u₀) = {psi_u0}",
        bundle.evo.t_inf_est
    );

    let conf = &bundle.confinement;
    assert!(
        conf.interior_max < conf.large_solution_at_09,
        "interior max {} reached U∞(0.9R) = {}",
        conf.interior_max,
        conf.large_solution_at_09
    );
    assert_eq!(conf.subsolution_violations, 0, "subsolution bound violated");

    println!(
        "[PASS] criterion 05: T_est {:.6} ≤ Ψ(u₀) {:.6}; interior ≤ {:.3} < U∞(0.9R) = {:.3}; \
         subsolution violations 0  [{:.1?}]",
        bundle.evo.t_inf_est,
        psi_u0,
        conf.interior_max,
        conf.large_solution_at_09,
        t0.elapsed()
    );
}

#[test]
fn criterion_06_strong_domination_rate() {
    let t0 = Instant::now();
    let bundle = strong_run();
    let term = bundle.diag.terminal;

    // limsup coefficient: b (T∞−t)^(1/(p−1)) ≤ (1/(λ(p−1)))^(1/(p−1)) × 1.05
    let coeff = term.b * term.remaining.powf(0.5);
    let limit = (1.0_f64 / 2.0).powf(0.5);
    assert!(
        coeff <= limit * 1.05,
        "terminal coefficient {coeff:.5} above {limit:.5} × 1.05"
    );

    // Ψ-based lower envelope of the traveling subsolution
    assert!(
        term.psi_envelope_ratio >= 0.95,
        "Ψ lower-envelope ratio {:.4} < 0.95",
        term.psi_envelope_ratio
    );

    println!(
        "[PASS] criterion 06: terminal coeff {coeff:.5} ≤ {:.5}, Ψ-envelope ratio {:.2e} ≥ 0.95  [{:.1?}]",
        limit * 1.05,
        term.psi_envelope_ratio,
        t0.elapsed()
    );
}

#[test]
fn criterion_07_weak_domination_two_sided_rate() {
    let t0 = Instant::now();
    let (_, diag) = weak_run();
    assert_eq!(diag.regime, DominationRegime::WeakDomination);
    let term = diag.terminal;

    // ratio against (ℓ/((λℓ−1)(p−1)))^(1/(p−1)) (T∞−t)^(−1/(p−1)), ℓ = √2
    let ell = SQRT_2;
    let coeff_limit = ell / ((2.0 * ell - 1.0) * 1.0);
    let coeff = term.b * term.remaining;
    let ratio = coeff / coeff_limit;
    assert!(
        (0.95..=1.05).contains(&ratio),
        "two-sided terminal ratio {ratio:.5} outside [0.95, 1.05]"
    );
    assert!(
        (0.95..=1.05).contains(&term.forcing_ratio),
        "Φ⁻¹ ratio {:.5} outside [0.95, 1.05]",
        term.forcing_ratio
    );

    println!(
        "[PASS] criterion 07: two-sided ratio {ratio:.5}, Φ⁻¹ ratio {:.5}  [{:.1?}]",
        term.forcing_ratio,
        t0.elapsed()
    );
}

#[test]
fn criterion_08_domination_threshold() {
    let t0 = Instant::now();
    let f = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
    let g = AbsorptionLaw::power(3.0).unwrap();
    let report = domination_report(&f, &g, ProbeGrid::default());
    let lambda0 = (2.0_f64 / 4.0).sqrt(); // √(2/(m+1)), m = 3
    let err = (report.lambda_0 - lambda0).abs();
    assert!(err <= 1e-10, "λ₀ = {} off the exact {lambda0} by {err:.2e}", report.lambda_0);
    assert_eq!(report.regime, DominationRegime::WeakDomination);

    // the evolution refuses 0.9 λ₀ and accepts 1.1 λ₀
    let cfg = EvolutionConfig { cap: 1e6, ..EvolutionConfig::default() };
    let f_low = ForcingLaw::power(2.0, 0.0, 0.9 * lambda0).unwrap();
    let refused = matches!(
        evolve_uncontrolled(&f_low, &g, &cfg),
        Err(Error::DominationFailed { .. })
    );
    assert!(refused, "run with λ = 0.9 λ₀ was not refused");
    let f_hi = ForcingLaw::power(2.0, 0.0, 1.1 * lambda0).unwrap();
    let evo = evolve_uncontrolled(&f_hi, &g, &cfg).unwrap();
    assert!(evo.t_inf_est.is_finite());

    println!(
        "[PASS] criterion 08: λ₀ err {err:.2e}; 0.9λ₀ refused, 1.1λ₀ ran (T_est {:.4})  [{:.1?}]",
        evo.t_inf_est,
        t0.elapsed()
    );
}

#[test]
fn criterion_09_self_similar_exactness() {
    let t0 = Instant::now();
    let sol = SelfSimilarSolution::new(3.0).unwrap();

    // blow-up time map (p = 2)
    let t_err = (sol.blowup_time(1.0) - (SQRT_2 + 1.0)).abs();
    assert!(t_err <= 1e-12, "T∞(1) error {t_err:.2e}");

    // residuals on 10³ samples clear of the singular set
    let samples = sample_points(42, 2000, 4.0);
    let mut checked = 0;
    let mut worst_interior: f64 = 0.0;
    for &(x, _) in &samples {
        if x > sol.c_offset + 0.05 && checked < 1000 {
            worst_interior = worst_interior.max(sol.interior_residual(x).unwrap().abs());
            checked += 1;
        }
    }
    assert!(checked >= 1000, "not enough interior samples");
    assert!(worst_interior <= 1e-8, "interior residual {worst_interior:.2e}");

    let boundary_res = sol.profile_boundary_residual().unwrap().abs();
    assert!(boundary_res <= 1e-8, "profile boundary residual {boundary_res:.2e}");

    // restriction to the shifted domain: dynamic-boundary defect at x_N = R
    let mut worst_defect: f64 = 0.0;
    for i in 1..100 {
        let t = sol.blowup_time(1.0) * i as f64 / 101.0;
        worst_defect = worst_defect.max(sol.shifted_boundary_defect(1.0, t).unwrap().abs());
    }
    assert!(worst_defect <= 1e-8, "shifted-domain defect {worst_defect:.2e}");

    // scaling invariance and agreement of the two printed forms
    let pairs = sample_points(7, 1000, 3.0);
    for mu in [2.0, 0.5] {
        let dev = sol.scaling_invariance(mu, &pairs).unwrap();
        assert!(dev <= 1e-12, "scaling deviation {dev:.2e} at mu = {mu}");
    }
    let mut worst_forms: f64 = 0.0;
    for &(x, t) in &pairs {
        if let (SimValue::Finite(a), SimValue::Finite(b)) =
            (sol.solution(x, t), sol.solution_time_form(x, t))
        {
            worst_forms = worst_forms.max((a - b).abs() / a.abs());
        }
    }
    assert!(worst_forms <= 1e-12, "printed forms disagree by {worst_forms:.2e}");

    println!(
        "[PASS] criterion 09: interior {worst_interior:.1e}, boundary {boundary_res:.1e}, \
         defect {worst_defect:.1e}, forms {worst_forms:.1e}, T∞(1) err {t_err:.1e}  [{:.1?}]",
        t0.elapsed()
    );
}

#[test]
fn criterion_10_comparison_certificates() {
    let t0 = Instant::now();

    // comparison ordering u^α ≤ V^α in the controlled run
    let run = controlled_run();
    assert_eq!(
        run.comparison_violations, 0,
        "controlled comparison u ≤ V violated {} times",
        run.comparison_violations
    );
    assert!(run.interior_finite, "controlled interior not finite");

    // Ψ⁻¹ subsolution lower bound in the uncontrolled runs
    let strong = strong_run();
    assert_eq!(strong.confinement.subsolution_violations, 0);
    assert_eq!(strong.confinement.interior_bound_violations, 0);

    println!(
        "[PASS] criterion 10: zero comparison violations over {} snapshots; \
         subsolution and interior bounds clean  [{:.1?}]",
        run.snapshots.len(),
        t0.elapsed()
    );
}

#[test]
fn criterion_11_flux_bound() {
    let t0 = Instant::now();
    let strong = strong_run();
    let (weak, _) = weak_run();
    let run = controlled_run();

    assert_eq!(strong.evo.flux_bound_violations, 0, "strong run flux bound violated");
    assert_eq!(weak.flux_bound_violations, 0, "weak run flux bound violated");
    assert_eq!(run.uncontrolled.flux_bound_violations, 0);
    assert_eq!(run.flux_bound_violations, 0, "controlled run flux bound violated");

    let steps = strong.evo.times.len() + weak.times.len();
    println!(
        "[PASS] criterion 11: 0 ≤ c(t) ≤ √(2G(b)) at every accepted step \
         ({steps} uncontrolled steps + {} controlled samples)  [{:.1?}]",
        run.snapshots.len(),
        t0.elapsed()
    );
}
