//! Scalar nonlinearities: the boundary forcing f with its blow-up
//! functional Φ, the interior absorption g with its Keller-Osserman
//! functional Ψ, quasi-bang-bang truncations, and the forcing/absorption
//! domination analysis.
//!
//! Φ(r) = ∫_r^∞ ds/f(s) linearizes the blow-up of u' = λf(u):
//! Φ(u(t)) = λ(T∞ - t). Ψ(δ) = ∫_δ^∞ ds/√(2G(s)) is the boundary
//! profile functional of large solutions: U∞ ~ Ψ⁻¹(dist to boundary).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{self, QuadTol};
use crate::roots;

pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance of the monotone inversions Φ⁻¹, Ψ⁻¹.
pub const TOL_INV: f64 = 1e-12;

fn validation_grid() -> impl Iterator<Item = f64> {
    // log-spaced 1e-6 .. 1e6 plus the origin
    let pts = (0..=48).map(|i| 10f64.powf(-6.0 + 0.25 * i as f64));
    std::iter::once(0.0).chain(pts)
}

// ---------------------------------------------------------------------------
// Forcing law
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub enum ForcingKind {
    /// f(u) = (k + u)^p
    Power { p: f64, k: f64 },
    /// f(u) = e^u
    Exponential,
    /// user map, with optional analytic Φ and Φ⁻¹
    Custom { name: String, f: ScalarMap, phi: Option<ScalarMap>, phi_inv: Option<ScalarMap> },
}

impl fmt::Debug for ForcingKind {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcingKind::Power { p, k } => write!(w, "Power {{ p: {p}, k: {k} }}"),
            ForcingKind::Exponential => write!(w, "Exponential"),
            ForcingKind::Custom { name, .. } => write!(w, "Custom({name})"),
        }
    }
}

/// The boundary forcing F(u, 0) = λ f(u).
#[derive(Debug, Clone)]
pub struct ForcingLaw {
    pub kind: ForcingKind,
    pub lambda: f64,
    /// α_f of the large-r monotonicity property f(s)/s^α_f increasing, when known.
    pub monotonicity_exponent: Option<f64>,
}

impl ForcingLaw {
    pub fn power(p: f64, k: f64, lambda: f64) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::InvalidLaw(format!("power forcing needs p > 0, got {p}")));
        }
        if !(k >= 0.0) {
            return Err(Error::InvalidLaw(format!("power forcing needs k >= 0, got {k}")));
        }
        let law = ForcingLaw {
            kind: ForcingKind::Power { p, k },
            lambda,
            monotonicity_exponent: if p > 1.0 { Some(p) } else { None },
        };
        law.validate()?;
        Ok(law)
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        let law =
            ForcingLaw { kind: ForcingKind::Exponential, lambda, monotonicity_exponent: None };
        law.validate()?;
        Ok(law)
    }

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lambda: f64,
    ) -> Result<Self> {
        let law = ForcingLaw {
            kind: ForcingKind::Custom {
                name: name.into(),
                f: Arc::new(f),
                phi: None,
                phi_inv: None,
            },
            lambda,
            monotonicity_exponent: None,
        };
        law.validate()?;
        Ok(law)
    }

    /// Attach analytic Φ / Φ⁻¹ to a custom law.
    pub fn with_analytic_phi(
        mut self,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        if let ForcingKind::Custom { phi: p, phi_inv: pi, .. } = &mut self.kind {
            *p = Some(Arc::new(phi));
            *pi = Some(Arc::new(phi_inv));
        }
        self
    }

    pub fn with_monotonicity_exponent(mut self, alpha_f: f64) -> Self {
        self.monotonicity_exponent = Some(alpha_f);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidLaw(format!("lambda must be > 0, got {}", self.lambda)));
        }
        let mut prev = f64::NEG_INFINITY;
        for u in validation_grid() {
            let v = self.f(u);
            if !v.is_finite() && u < 500.0 {
                return Err(Error::InvalidLaw(format!("f({u}) is not finite")));
            }
            if v < 0.0 {
                return Err(Error::InvalidLaw(format!("f({u}) = {v} < 0")));
            }
            if v.is_finite() && v < prev * (1.0 - 1e-12) {
                return Err(Error::InvalidLaw(format!("f not nondecreasing near u = {u}")));
            }
            if v.is_finite() {
                prev = v;
            }
        }
        Ok(())
    }

    /// Bare forcing value f(u) (without λ).
    pub fn f(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.kind {
            ForcingKind::Power { p, k } => (k + u).powf(*p),
            ForcingKind::Exponential => u.exp(),
            ForcingKind::Custom { f, .. } => f(u),
        }
    }

    /// Φ(r) = ∫_r^∞ ds/f(s). Analytic where available, tail quadrature
    /// otherwise. Errors with `NotSuperlinear` on a divergent tail.
    pub fn phi(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::OutOfRange(format!("phi needs r >= 0, got {r}")));
        }
        match &self.kind {
            ForcingKind::Power { p, k } => {
                if *p <= 1.0 {
                    return Err(Error::NotSuperlinear(format!("power exponent p = {p} <= 1")));
                }
                Ok((k + r).powf(1.0 - p) / (p - 1.0))
            }
            ForcingKind::Exponential => Ok((-r).exp()),
            ForcingKind::Custom { f, phi, .. } => {
                if let Some(phi) = phi {
                    return Ok(phi(r));
                }
                let f = f.clone();
                quad::tail_integral(move |s| 1.0 / f(s), r, QuadTol::default())
            }
        }
    }

    /// Φ(0⁺), the supremum of the range of Φ (possibly +∞).
    pub fn phi_sup(&self) -> f64 {
        match &self.kind {
            ForcingKind::Power { p, k } => {
                if *k == 0.0 {
                    f64::INFINITY
                } else {
                    k.powf(1.0 - p) / (p - 1.0)
                }
            }
            ForcingKind::Exponential => 1.0,
            ForcingKind::Custom { .. } => self.phi(0.0).unwrap_or(f64::INFINITY),
        }
    }

    /// Φ⁻¹(z): the unique r with Φ(r) = z, to relative 1e-12.
    pub fn phi_inv(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::OutOfRange(format!("phi_inv needs z > 0, got {z}")));
        }
        match &self.kind {
            ForcingKind::Power { p, k } => {
                if *p <= 1.0 {
                    return Err(Error::NotSuperlinear(format!("power exponent p = {p} <= 1")));
                }
                let r = ((p - 1.0) * z).powf(-1.0 / (p - 1.0)) - k;
                if r < 0.0 {
                    return Err(Error::OutOfRange(format!(
                        "z = {z} exceeds phi(0) = {}",
                        self.phi_sup()
                    )));
                }
                Ok(r)
            }
            ForcingKind::Exponential => {
                if z > 1.0 {
                    return Err(Error::OutOfRange(format!("z = {z} exceeds phi(0) = 1")));
                }
                Ok(-z.ln())
            }
            ForcingKind::Custom { phi_inv, .. } => {
                if let Some(phi_inv) = phi_inv {
                    return Ok(phi_inv(z));
                }
                if z >= self.phi_sup() {
                    // phi(0) finite and exceeded
                    if self.phi_sup().is_finite() && z > self.phi_sup() {
                        return Err(Error::OutOfRange(format!(
                            "z = {z} exceeds phi(0) = {}",
                            self.phi_sup()
                        )));
                    }
                }
                roots::invert_decreasing(|r| self.phi(r), |r| -1.0 / self.f(r), z, 1.0)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Absorption law
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub enum AbsorptionKind {
    /// g(s) = s^m
    Power { m: f64 },
    /// g(s) = e^s
    Exp,
    /// g(s) = s e^{2s}
    SExp2S,
    /// user map with its primitive G
    Custom { name: String, g: ScalarMap, big_g: ScalarMap },
}

impl fmt::Debug for AbsorptionKind {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbsorptionKind::Power { m } => write!(w, "Power {{ m: {m} }}"),
            AbsorptionKind::Exp => write!(w, "Exp"),
            AbsorptionKind::SExp2S => write!(w, "SExp2S"),
            AbsorptionKind::Custom { name, .. } => write!(w, "Custom({name})"),
        }
    }
}

/// The interior absorption G(u, 0) = g(u) with primitive G(s) = ∫_0^s g.
#[derive(Debug, Clone)]
pub struct AbsorptionLaw {
    pub kind: AbsorptionKind,
}

impl AbsorptionLaw {
    pub fn power(m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::InvalidLaw(format!("power absorption needs m > 0, got {m}")));
        }
        let law = AbsorptionLaw { kind: AbsorptionKind::Power { m } };
        law.validate()?;
        Ok(law)
    }

    pub fn exp() -> Result<Self> {
        let law = AbsorptionLaw { kind: AbsorptionKind::Exp };
        law.validate()?;
        Ok(law)
    }

    pub fn s_exp_2s() -> Result<Self> {
        let law = AbsorptionLaw { kind: AbsorptionKind::SExp2S };
        law.validate()?;
        Ok(law)
    }

    pub fn custom(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        big_g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let law = AbsorptionLaw {
            kind: AbsorptionKind::Custom {
                name: name.into(),
                g: Arc::new(g),
                big_g: Arc::new(big_g),
            },
        };
        law.validate()?;
        Ok(law)
    }

    /// The zero absorption (decoupled limit g ≡ 0).
    pub fn zero() -> Self {
        AbsorptionLaw {
            kind: AbsorptionKind::Custom {
                name: "zero".into(),
                g: Arc::new(|_| 0.0),
                big_g: Arc::new(|_| 0.0),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let g0 = self.big_g(0.0);
        if g0.abs() > 1e-14 {
            return Err(Error::InvalidLaw(format!("G(0) = {g0} != 0")));
        }
        let mut prev = f64::NEG_INFINITY;
        let mut prev_big = f64::NEG_INFINITY;
        for s in validation_grid() {
            let v = self.g(s);
            let big = self.big_g(s);
            if v < 0.0 {
                return Err(Error::InvalidLaw(format!("g({s}) = {v} < 0")));
            }
            if v.is_finite() && v < prev * (1.0 - 1e-12) {
                return Err(Error::InvalidLaw(format!("g not nondecreasing near s = {s}")));
            }
            if big.is_finite() && big < prev_big - 1e-14 {
                return Err(Error::InvalidLaw(format!("G not nondecreasing near s = {s}")));
            }
            if v.is_finite() {
                prev = v;
            }
            if big.is_finite() {
                prev_big = big;
            }
        }
        Ok(())
    }

    pub fn g(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match &self.kind {
            AbsorptionKind::Power { m } => s.powf(*m),
            AbsorptionKind::Exp => s.exp(),
            AbsorptionKind::SExp2S => s * (2.0 * s).exp(),
            AbsorptionKind::Custom { g, .. } => g(s),
        }
    }

    /// G(s) = ∫_0^s g.
    pub fn big_g(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match &self.kind {
            AbsorptionKind::Power { m } => s.powf(m + 1.0) / (m + 1.0),
            AbsorptionKind::Exp => s.exp() - 1.0,
            AbsorptionKind::SExp2S => ((2.0 * s).exp() * (2.0 * s - 1.0) + 1.0) / 4.0,
            AbsorptionKind::Custom { big_g, .. } => big_g(s),
        }
    }

    /// √(2 G(s)), the gradient scale of the absorption.
    pub fn sqrt_2g(&self, s: f64) -> f64 {
        (2.0 * self.big_g(s)).sqrt()
    }

    /// Ψ(δ) = ∫_δ^∞ ds/√(2G(s)). Analytic for powers, tail quadrature
    /// otherwise. Errors with `KellerOssermanFails` on divergence.
    pub fn psi(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::OutOfRange(format!("psi needs delta > 0, got {delta}")));
        }
        match &self.kind {
            AbsorptionKind::Power { m } => {
                if *m <= 1.0 {
                    return Err(Error::KellerOssermanFails(format!(
                        "power absorption m = {m} <= 1"
                    )));
                }
                Ok((2.0 * (m + 1.0)).sqrt() / (m - 1.0) * delta.powf(-(m - 1.0) / 2.0))
            }
            _ => {
                let this = self.clone();
                quad::tail_integral(
                    move |s| {
                        let w = this.sqrt_2g(s);
                        if w > 0.0 {
                            1.0 / w
                        } else {
                            f64::INFINITY
                        }
                    },
                    delta,
                    QuadTol::default(),
                )
                .map_err(|e| match e {
                    Error::NotSuperlinear(msg) => Error::KellerOssermanFails(msg),
                    other => other,
                })
            }
        }
    }

    /// Ψ⁻¹(z) to relative 1e-12.
    pub fn psi_inv(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::OutOfRange(format!("psi_inv needs z > 0, got {z}")));
        }
        match &self.kind {
            AbsorptionKind::Power { m } => {
                if *m <= 1.0 {
                    return Err(Error::KellerOssermanFails(format!(
                        "power absorption m = {m} <= 1"
                    )));
                }
                // Ψ_m⁻¹(z) = (2(m+1)/(m-1)^2)^{1/(m-1)} z^{-2/(m-1)}
                let k = (2.0 * (m + 1.0) / ((m - 1.0) * (m - 1.0))).powf(1.0 / (m - 1.0));
                Ok(k * z.powf(-2.0 / (m - 1.0)))
            }
            _ => roots::invert_decreasing(
                |d| self.psi(d),
                |d| {
                    let w = self.sqrt_2g(d);
                    if w > 0.0 {
                        -1.0 / w
                    } else {
                        f64::NEG_INFINITY
                    }
                },
                z,
                1.0,
            ),
        }
    }

    /// Whether the Keller-Osserman integral converges for this law.
    pub fn keller_osserman_holds(&self) -> bool {
        self.psi(1.0).is_ok()
    }

    /// Probe the ratio Ψ(ηs)/Ψ(s) on a grid: a numeric look at the
    /// no-powers condition. Returns (s, ratio) pairs; no limit is certified.
    pub fn psi_scaling_probe(&self, eta: f64, s_values: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(s_values.len());
        for &s in s_values {
            out.push((s, self.psi(eta * s)? / self.psi(s)?));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Truncations
// ---------------------------------------------------------------------------

/// Quasi-bang-bang truncation of a forcing law: frozen at f(knee) above
/// the knee, globally Lipschitz.
#[derive(Debug, Clone)]
pub struct TruncatedForcing {
    pub base: ForcingLaw,
    pub knee: f64,
}

impl ForcingLaw {
    pub fn truncate(&self, knee: f64) -> TruncatedForcing {
        assert!(knee > 0.0, "truncation level must be positive");
        TruncatedForcing { base: self.clone(), knee }
    }
}

impl TruncatedForcing {
    /// f_M(u) = f(min(u, M)).
    pub fn f(&self, u: f64) -> f64 {
        self.base.f(u.min(self.knee))
    }

    /// λ f_M(u), the right-hand side of the truncated scalar problem.
    pub fn rhs(&self, u: f64) -> f64 {
        self.base.lambda * self.f(u)
    }

    /// Plateau value f(M).
    pub fn plateau(&self) -> f64 {
        self.base.f(self.knee)
    }

    /// Exact flow of u' = λ f_M(u): value at elapsed time dt >= 0 from xi,
    /// assembled from Φ below the knee and the linear plateau above it.
    pub fn flow(&self, dt: f64, xi: f64) -> Result<f64> {
        assert!(dt >= 0.0, "truncated flow runs forward only");
        let lambda = self.base.lambda;
        if xi >= self.knee {
            return Ok(xi + lambda * self.plateau() * dt);
        }
        let to_knee = (self.base.phi(xi)? - self.base.phi(self.knee)?) / lambda;
        if dt <= to_knee {
            self.base.phi_inv(self.base.phi(xi)? - lambda * dt)
        } else {
            Ok(self.knee + lambda * self.plateau() * (dt - to_knee))
        }
    }

    /// Flow together with its sensitivity ∂φ/∂ξ = h(φ)/h(ξ), h = λ f_M.
    pub fn flow_and_sensitivity(&self, dt: f64, xi: f64) -> Result<(f64, f64)> {
        let value = self.flow(dt, xi)?;
        let h_xi = self.rhs(xi);
        if h_xi <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "sensitivity undefined where the field vanishes (xi = {xi})"
            )));
        }
        Ok((value, self.rhs(value) / h_xi))
    }
}

/// Truncation of an absorption law, with the matching primitive
/// G_M(u) = G(min(u,M)) + g(M)·(u-M)_+.
#[derive(Debug, Clone)]
pub struct TruncatedAbsorption {
    pub base: AbsorptionLaw,
    pub knee: f64,
}

impl AbsorptionLaw {
    pub fn truncate(&self, knee: f64) -> TruncatedAbsorption {
        assert!(knee > 0.0, "truncation level must be positive");
        TruncatedAbsorption { base: self.clone(), knee }
    }
}

impl TruncatedAbsorption {
    pub fn g(&self, u: f64) -> f64 {
        self.base.g(u.min(self.knee))
    }

    pub fn big_g(&self, u: f64) -> f64 {
        if u <= self.knee {
            self.base.big_g(u)
        } else {
            self.base.big_g(self.knee) + self.base.g(self.knee) * (u - self.knee)
        }
    }

    pub fn sqrt_2g(&self, u: f64) -> f64 {
        (2.0 * self.big_g(u)).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Domination analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominationRegime {
    /// f/√(2G) → ∞: any λ dominates at infinity.
    StrongDomination,
    /// f/√(2G) → L ∈ (0, ∞): λ must exceed 1/L.
    WeakDomination,
    /// f/√(2G) → 0: the absorption wins.
    NoDomination,
}

/// Where and how densely to probe the ratio f/√(2G).
#[derive(Debug, Clone, Copy)]
pub struct ProbeGrid {
    /// Left end of the compact window (0, τ₀].
    pub tau_min: f64,
    /// Split point τ₀ between the compact and the large-τ windows.
    pub tau_split: f64,
    /// Right end of the large-τ window.
    pub tau_max: f64,
    /// Grid points per decade.
    pub per_decade: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid { tau_min: 1e-6, tau_split: 1.0, tau_max: 1e8, per_decade: 16 }
    }
}

impl ProbeGrid {
    fn log_points(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
        let decades = (hi / lo).log10();
        let n = ((decades * per_decade as f64).ceil() as usize).max(2);
        (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
    }

    pub fn compact_window(&self) -> Vec<f64> {
        Self::log_points(self.tau_min, self.tau_split, self.per_decade)
    }

    pub fn large_window(&self) -> Vec<f64> {
        Self::log_points(self.tau_split, self.tau_max, self.per_decade)
    }
}

/// Numeric domination report: windowed liminf estimates of f/√(2G),
/// the combined minimum L₀ of the restricted-global-domination argument,
/// and the induced threshold λ₀ = 1/L₀.
#[derive(Debug, Clone)]
pub struct DominationReport {
    pub l_at_infinity: f64,
    pub l_near_zero: f64,
    pub l_star: f64,
    pub l_zero: f64,
    pub lambda_0: f64,
    pub regime: DominationRegime,
    /// Least-squares slope of ln(f/√(2G)) vs ln τ on the large window.
    pub loglog_slope: f64,
}

/// Flat-trend threshold for the log-log slope classification.
const FLAT_SLOPE: f64 = 1e-3;

fn ratio(f: &ForcingLaw, g: &AbsorptionLaw, tau: f64) -> f64 {
    let num = f.f(tau);
    let den = g.sqrt_2g(tau);
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    }
}

/// Estimate the domination balance of `f` against `g` on `probe`.
///
/// Always produces a report; `NoDomination` is flagged, never an error.
pub fn domination_report(f: &ForcingLaw, g: &AbsorptionLaw, probe: ProbeGrid) -> DominationReport {
    let compact = probe.compact_window();
    let large = probe.large_window();

    let ratios_compact: Vec<f64> = compact.iter().map(|&t| ratio(f, g, t)).collect();
    let ratios_large: Vec<f64> = large.iter().map(|&t| ratio(f, g, t)).collect();

    // trend of ln(ratio) vs ln(tau) on the large window
    let pairs: Vec<(f64, f64)> = large
        .iter()
        .zip(&ratios_large)
        .filter(|(_, &r)| r.is_finite() && r > 0.0)
        .map(|(&t, &r)| (t.ln(), r.ln()))
        .collect();
    let slope = if pairs.len() >= 2 { least_squares_slope(&pairs) } else { 0.0 };

    let all_infinite = ratios_large.iter().all(|r| r.is_infinite());
    let regime = if all_infinite || slope > FLAT_SLOPE {
        DominationRegime::StrongDomination
    } else if slope < -FLAT_SLOPE {
        DominationRegime::NoDomination
    } else {
        DominationRegime::WeakDomination
    };

    // windowed minima standing in for the analytic liminfs
    let last_decade_min = windowed_min(&large, &ratios_large, large[large.len() - 1] / 10.0);
    let l_at_infinity = match regime {
        DominationRegime::StrongDomination => f64::INFINITY,
        DominationRegime::WeakDomination => last_decade_min,
        DominationRegime::NoDomination => 0.0,
    };
    let l_near_zero = {
        let hi = compact[0] * 10.0;
        let vals: Vec<f64> = compact
            .iter()
            .zip(&ratios_compact)
            .filter(|(&t, _)| t <= hi)
            .map(|(_, &r)| r)
            .collect();
        fold_min(&vals)
    };
    let l_star = fold_min(&ratios_compact);

    let global_min = fold_min(
        &ratios_compact.iter().chain(&ratios_large).copied().collect::<Vec<_>>(),
    );
    let l_zero = l_at_infinity.min(l_star).min(global_min);
    let lambda_0 = if l_zero > 0.0 { 1.0 / l_zero } else { f64::INFINITY };

    DominationReport { l_at_infinity, l_near_zero, l_star, l_zero, lambda_0, regime, loglog_slope: slope }
}

fn fold_min(values: &[f64]) -> f64 {
    values.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min)
}

fn windowed_min(taus: &[f64], ratios: &[f64], from: f64) -> f64 {
    let vals: Vec<f64> = taus
        .iter()
        .zip(ratios)
        .filter(|(&t, _)| t >= from)
        .map(|(_, &r)| r)
        .collect();
    fold_min(&vals)
}

/// Centered least-squares slope; the centering keeps the fit stable when
/// the abscissae span a tiny interval far from zero.
pub fn least_squares_slope(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx.abs() < 1e-300 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Central-difference check of the Ψ⁻¹ identities
/// (Ψ⁻¹)'(ζ) = -√(2G(Ψ⁻¹(ζ))) and (Ψ⁻¹)''(ζ) = g(Ψ⁻¹(ζ)).
/// Returns the two absolute identity residuals at ζ.
pub fn psi_inv_identity_residuals(g: &AbsorptionLaw, zeta: f64, h: f64) -> Result<(f64, f64)> {
    let um = g.psi_inv(zeta - h)?;
    let u0 = g.psi_inv(zeta)?;
    let up = g.psi_inv(zeta + h)?;
    let d1 = (up - um) / (2.0 * h);
    let d2 = (up - 2.0 * u0 + um) / (h * h);
    Ok(((d1 + g.sqrt_2g(u0)).abs(), (d2 - g.g(u0)).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Test-local tail oracle, independent of quad.rs: dyadic blocks,
    /// each integrated by composite Simpson.
    fn oracle_tail(w: impl Fn(f64) -> f64, r: f64) -> f64 {
        let simpson = |a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut s = w(a) + w(b);
            for i in 1..n {
                let x = a + i as f64 * h;
                s += w(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let mut total = 0.0;
        let mut lo = r.max(1e-12);
        if r < lo {
            total += simpson(r, lo, 64);
        }
        for _ in 0..200 {
            let hi = lo * 2.0;
            let block = simpson(lo, hi, 512);
            total += block;
            if block < 1e-14 * total.max(1.0) {
                break;
            }
            lo = hi;
        }
        total
    }

    #[test]
    fn phi_power_matches_closed_form() {
        // Φ_p(s) = 1/((p-1) s^(p-1)): p=2, r=1 -> 1
        let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(law.phi(1.0).unwrap(), 1.0, max_relative = 1e-14);
        // p=3, r=2 -> 1/8
        let law = ForcingLaw::power(3.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(law.phi(2.0).unwrap(), 0.125, max_relative = 1e-14);
    }

    #[test]
    fn phi_custom_matches_quadrature_oracle() {
        // f(s) = (1+s)^3, r = 0: ∫_0^∞ (1+s)^-3 ds = 1/2
        let law = ForcingLaw::custom("cubic-shift", |s| (1.0 + s).powi(3), 1.0).unwrap();
        let expect = oracle_tail(|s| (1.0 + s).powi(-3), 0.0);
        assert_relative_eq!(expect, 0.5, max_relative = 1e-6);
        assert_relative_eq!(law.phi(0.0).unwrap(), expect, max_relative = 1e-8);
        assert_relative_eq!(law.phi(0.0).unwrap(), 0.5, max_relative = 1e-10);
    }

    #[test]
    fn phi_not_superlinear_for_small_powers() {
        let law = ForcingLaw::power(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(law.phi(1.0), Err(Error::NotSuperlinear(_))));
        // linear custom law: detected by the tail probe instead
        let law = ForcingLaw::custom("linear", |s| s + 1.0, 1.0).unwrap();
        assert!(matches!(law.phi(1.0), Err(Error::NotSuperlinear(_))));
    }

    #[test]
    fn phi_inv_closed_forms() {
        let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(law.phi_inv(0.25).unwrap(), 4.0, max_relative = 1e-12);
        let law = ForcingLaw::power(3.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(law.phi_inv(0.125).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn phi_inv_custom_bisection_oracle() {
        // z = 0.5 = Φ(0) for f = (1+s)^3
        let law = ForcingLaw::custom("cubic-shift", |s| (1.0 + s).powi(3), 1.0).unwrap();
        // oracle: brute bisection on the quadrature Φ
        let mut lo = 0.0_f64;
        let mut hi = 4.0_f64;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if law.phi(mid).unwrap() > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let got = law.phi_inv(0.5).unwrap();
        assert!((got - oracle).abs() <= 1e-8_f64.max(1e-8 * oracle.abs()));
        assert!(got.abs() <= 1e-8); // analytic answer is r = 0
    }

    #[test]
    fn phi_inv_round_trip_log_grid() {
        for law in [
            ForcingLaw::power(2.0, 0.0, 1.0).unwrap(),
            ForcingLaw::power(3.0, 0.5, 2.0).unwrap(),
            ForcingLaw::exponential(1.0).unwrap(),
        ] {
            let mut r = 1e-3;
            while r <= 1e6 {
                let z = law.phi(r).unwrap();
                if z > 0.0 && z.is_finite() {
                    let back = law.phi_inv(z).unwrap();
                    assert_relative_eq!(back, r, max_relative = 1e-9);
                }
                r *= 10.0;
            }
        }
    }

    #[test]
    fn psi_power_closed_form_m3() {
        // Ψ_3(1) = √8/2 = √2
        let g = AbsorptionLaw::power(3.0).unwrap();
        assert_relative_eq!(g.psi(1.0).unwrap(), 2.0_f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(g.psi_inv(2.0_f64.sqrt()).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn psi_exp_matches_quadrature_oracle() {
        let g = AbsorptionLaw::exp().unwrap();
        let expect = oracle_tail(|s| 1.0 / (2.0 * (s.exp() - 1.0)).sqrt(), 1.0);
        assert_relative_eq!(g.psi(1.0).unwrap(), expect, max_relative = 1e-7);
    }

    #[test]
    fn psi_quadrature_agrees_with_power_closed_form() {
        // same law through the quadrature path
        let m = 3.0;
        let g_quad = AbsorptionLaw::custom(
            "cubic",
            move |s| s.powf(m),
            move |s| s.powf(m + 1.0) / (m + 1.0),
        )
        .unwrap();
        let g_closed = AbsorptionLaw::power(m).unwrap();
        let mut d = 1e-2;
        while d <= 1e4 {
            assert_relative_eq!(
                g_quad.psi(d).unwrap(),
                g_closed.psi(d).unwrap(),
                max_relative = 1e-9
            );
            d *= 100.0;
        }
    }

    #[test]
    fn psi_fails_without_keller_osserman() {
        let g = AbsorptionLaw::power(1.0).unwrap();
        assert!(matches!(g.psi(1.0), Err(Error::KellerOssermanFails(_))));
        let zero = AbsorptionLaw::zero();
        assert!(matches!(zero.psi(1.0), Err(Error::KellerOssermanFails(_))));
    }

    #[test]
    fn psi_inv_identities_hold_to_second_order() {
        let g = AbsorptionLaw::power(3.0).unwrap();
        // observed order: residuals shrink ~h^2
        let (r1a, r2a) = psi_inv_identity_residuals(&g, 0.5, 1e-3).unwrap();
        let (r1b, r2b) = psi_inv_identity_residuals(&g, 0.5, 5e-4).unwrap();
        assert!(r1a < 1e-4, "first identity residual {r1a}");
        assert!(r2a < 1e-2, "second identity residual {r2a}");
        assert!(r1b < r1a * 0.3, "first identity not O(h^2): {r1b} vs {r1a}");
        assert!(r2b < r2a * 0.3, "second identity not O(h^2): {r2b} vs {r2a}");
    }

    #[test]
    fn truncation_behaves_like_base_below_knee() {
        // Example with knee 7/8: value(0.5) = 0.25, value(2) = 49/64
        let f = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        let t = f.truncate(7.0 / 8.0);
        assert_relative_eq!(t.f(0.5), 0.25, max_relative = 1e-15);
        assert_relative_eq!(t.f(2.0), 49.0 / 64.0, max_relative = 1e-15);
        // continuity at the knee
        assert_relative_eq!(t.f(7.0 / 8.0 - 1e-12), t.f(7.0 / 8.0 + 1e-12), epsilon = 1e-9);
        // absorption plateau: m=3, M=10 -> value(15) = 1000
        let g = AbsorptionLaw::power(3.0).unwrap().truncate(10.0);
        assert_relative_eq!(g.g(15.0), 1000.0, max_relative = 1e-15);
    }

    #[test]
    fn truncated_flow_crosses_the_knee_continuously() {
        let f = ForcingLaw::power(2.0, 0.0, 1.0).unwrap().truncate(8.0);
        // below the knee the flow is 1/(1/xi - t)
        let v = f.flow(0.5, 1.0).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
        // knee reached from xi=1 at t = 1 - 1/8; beyond it the flow is linear
        let t_knee = 1.0 - 1.0 / 8.0;
        let v = f.flow(t_knee + 0.1, 1.0).unwrap();
        assert_relative_eq!(v, 8.0 + 64.0 * 0.1, max_relative = 1e-10);
        // sensitivity positive and continuous across the knee
        let (_, s1) = f.flow_and_sensitivity(t_knee - 1e-9, 1.0).unwrap();
        let (_, s2) = f.flow_and_sensitivity(t_knee + 1e-9, 1.0).unwrap();
        assert_relative_eq!(s1, s2, max_relative = 1e-5);
    }

    #[test]
    fn domination_regimes_for_powers() {
        let g = AbsorptionLaw::power(3.0).unwrap();
        // 2p = m+1: weak, L = sqrt((m+1)/2) = sqrt 2
        let f = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        let rep = domination_report(&f, &g, ProbeGrid::default());
        assert_eq!(rep.regime, DominationRegime::WeakDomination);
        assert_relative_eq!(rep.l_at_infinity, 2.0_f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(rep.lambda_0, 1.0 / 2.0_f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(rep.lambda_0 * rep.l_zero, 1.0, max_relative = 1e-12);

        // 2p > m+1: strong
        let f = ForcingLaw::power(3.0, 0.0, 1.0).unwrap();
        let rep = domination_report(&f, &g, ProbeGrid::default());
        assert_eq!(rep.regime, DominationRegime::StrongDomination);
        assert!(rep.l_at_infinity.is_infinite());

        // 2p < m+1: none (ratio ~ tau^(-1/2))
        let f = ForcingLaw::power(1.5, 0.0, 1.0).unwrap();
        let rep = domination_report(&f, &g, ProbeGrid::default());
        assert_eq!(rep.regime, DominationRegime::NoDomination);
        assert_relative_eq!(rep.loglog_slope, -0.5, max_relative = 1e-6);
    }

    #[test]
    fn weak_power_ratio_is_constant_on_grid() {
        // for 2p = m+1 the ratio equals sqrt((m+1)/2) at every point
        let f = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
        let g = AbsorptionLaw::power(3.0).unwrap();
        for tau in ProbeGrid::default().large_window() {
            assert_relative_eq!(
                f.f(tau) / g.sqrt_2g(tau),
                2.0_f64.sqrt(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn technicality_inequalities_for_power_forcing() {
        // ν Φ⁻¹(ν^(α-1) ζ) >= Φ⁻¹(ζ) for ν > 1, reversed for ν < 1
        let law = ForcingLaw::power(2.5, 0.0, 1.0).unwrap();
        let alpha = law.monotonicity_exponent.unwrap();
        for &zeta in &[1e-4, 1e-3, 1e-2] {
            for &nu in &[1.5_f64, 2.0, 4.0] {
                let lhs = nu * law.phi_inv(nu.powf(alpha - 1.0) * zeta).unwrap();
                let rhs = law.phi_inv(zeta).unwrap();
                assert!(lhs >= rhs * (1.0 - 1e-12), "nu={nu} zeta={zeta}");
            }
            for &nu in &[0.25, 0.5] {
                let lhs = nu * law.phi_inv(f64::powf(nu, alpha - 1.0) * zeta).unwrap();
                let rhs = law.phi_inv(zeta).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-12), "nu={nu} zeta={zeta}");
            }
        }
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(ForcingLaw::power(-1.0, 0.0, 1.0).is_err());
        assert!(ForcingLaw::power(2.0, -0.5, 1.0).is_err());
        assert!(ForcingLaw::power(2.0, 0.0, 0.0).is_err());
        assert!(ForcingLaw::custom("decreasing", |s| 1.0 / (1.0 + s), 1.0).is_err());
        assert!(AbsorptionLaw::custom("negative", |_| -1.0, |s| -s).is_err());
    }
}
