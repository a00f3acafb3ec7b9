//! Embedded Dormand-Prince 5(4) integrator with step-size control,
//! plus a small implicit-midpoint fallback for stiff perturbations.

/// Why an integration returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Reached the requested end time.
    ReachedEnd,
    /// The observer asked to stop.
    ObserverStop,
    /// Step size collapsed below the floor (singularity or stiffness).
    StepFloor,
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub t: f64,
    pub y: Vec<f64>,
    pub stopped: StopReason,
    pub accepted: usize,
    pub rejected: usize,
}

/// Observer verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    /// Relative step floor (scaled by max(1, |t|)).
    pub h_floor: f64,
    /// Hard cap on the step size (useful when accepted steps feed an
    /// interpolant whose error must stay below the step error).
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_floor: 1e-15,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

// Dormand-Prince coefficients.
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] =
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const A7: [f64; 6] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// 5th-minus-4th order error weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Dopri5 {
    /// Integrate y' = rhs(t, y) from (t0, y0) toward t_end (t_end > t0).
    ///
    /// After every accepted step the observer sees (t, y, y') and may stop
    /// the run. Non-finite stage values are treated as a rejected step.
    pub fn integrate<R, O>(
        &self,
        rhs: R,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        mut observer: O,
    ) -> Integration
    where
        R: Fn(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64], &[f64]) -> StepOutcome,
    {
        let n = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
        let mut y_stage = vec![0.0; n];
        let mut y_new = vec![0.0; n];

        rhs(t, &y, &mut k[0]);

        let span = t_end - t0;
        let mut h = self.h_init.unwrap_or(1e-4 * span).min(span).max(1e-300);
        let mut accepted = 0;
        let mut rejected = 0;

        for _ in 0..self.max_steps {
            if t >= t_end {
                return Integration { t, y, stopped: StopReason::ReachedEnd, accepted, rejected };
            }
            let floor = self.h_floor * t.abs().max(1.0);
            if h < floor {
                return Integration { t, y, stopped: StopReason::StepFloor, accepted, rejected };
            }
            if h > self.h_max {
                h = self.h_max;
            }
            if t + h > t_end {
                h = t_end - t;
            }

            // stages 2..7
            let mut stage_ok = true;
            for s in 1..7 {
                let a: &[f64] = match s {
                    1 => &A2,
                    2 => &A3,
                    3 => &A4,
                    4 => &A5,
                    5 => &A6,
                    _ => &A7,
                };
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, &aj) in a.iter().enumerate() {
                        acc += aj * k[j][i];
                    }
                    y_stage[i] = y[i] + h * acc;
                }
                if !y_stage.iter().all(|v| v.is_finite()) {
                    stage_ok = false;
                    break;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                rhs(t + C[s - 1] * h, &y_stage, &mut tail[0]);
            }
            // 7th stage value is the 5th-order solution (FSAL)
            y_new.copy_from_slice(&y_stage);

            if !stage_ok || !y_new.iter().all(|v| v.is_finite()) {
                h *= 0.5;
                rejected += 1;
                continue;
            }

            // error norm
            let mut err_sq = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, &ej) in E.iter().enumerate() {
                    e += ej * k[j][i];
                }
                e *= h;
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                let r = e / scale;
                err_sq += r * r;
            }
            let err = (err_sq / n as f64).sqrt();

            if err <= 1.0 {
                t += h;
                y.copy_from_slice(&y_new);
                k.swap(0, 6); // FSAL
                accepted += 1;
                if observer(t, &y, &k[0]) == StepOutcome::Stop {
                    return Integration {
                        t,
                        y,
                        stopped: StopReason::ObserverStop,
                        accepted,
                        rejected,
                    };
                }
            } else {
                rejected += 1;
            }

            let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            h *= factor.clamp(0.2, 5.0);
        }
        Integration { t, y, stopped: StopReason::StepFloor, accepted, rejected }
    }
}

/// A scalar trajectory sampled at accepted steps, with derivatives,
/// evaluable anywhere in range by cubic Hermite interpolation.
#[derive(Debug, Clone, Default)]
pub struct HermitePath {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl HermitePath {
    pub fn push(&mut self, t: f64, y: f64, dy: f64) {
        if let Some(&last) = self.t.last() {
            if t <= last {
                return;
            }
        }
        self.t.push(t);
        self.y.push(y);
        self.dy.push(dy);
    }

    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("empty path")
    }

    /// Cubic Hermite evaluation; clamps to the sampled range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        assert!(n > 0, "empty path");
        if t <= self.t[0] {
            return self.y[0];
        }
        if t >= self.t[n - 1] {
            return self.y[n - 1];
        }
        let idx = match self.t.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.t[idx + 1] - self.t[idx];
        let s = (t - self.t[idx]) / h;
        let (y0, y1) = (self.y[idx], self.y[idx + 1]);
        let (m0, m1) = (self.dy[idx] * h, self.dy[idx + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }
}

/// Fixed-step implicit midpoint scheme with damped fixed-point/Newton
/// inner solve. Used as the fallback when the explicit pair underflows
/// on a stiff monotone perturbation.
pub fn implicit_midpoint<R>(rhs: R, t0: f64, y0: &[f64], t_end: f64, steps: usize) -> Vec<f64>
where
    R: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let h = (t_end - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut mid = vec![0.0; n];
    let mut f = vec![0.0; n];
    for s in 0..steps {
        let t_mid = t0 + (s as f64 + 0.5) * h;
        // fixed point on the midpoint state
        mid.copy_from_slice(&y);
        for _ in 0..100 {
            rhs(t_mid, &mid, &mut f);
            let mut delta = 0.0_f64;
            for i in 0..n {
                let next = y[i] + 0.5 * h * f[i];
                delta = delta.max((next - mid[i]).abs());
                mid[i] = next;
            }
            if delta <= 1e-14 * (1.0 + mid.iter().fold(0.0_f64, |a, v| a.max(v.abs()))) {
                break;
            }
        }
        rhs(t_mid, &mid, &mut f);
        for i in 0..n {
            y[i] += h * f[i];
        }
    }
    y
}
