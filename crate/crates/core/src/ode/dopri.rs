//! Dormand–Prince 5(4) with step-size control.

use super::OdeError;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus the embedded fourth-order ones
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Debug)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
}

impl StepControl {
    pub fn new(tol: f64) -> Self {
        StepControl {
            atol: tol,
            rtol: tol,
            max_steps: 200_000,
            h_init: None,
        }
    }
}

/// What the observer wants after an accepted step.
pub enum Next {
    /// Continue with the step size capped at the given magnitude.
    Continue(f64),
    Stop,
}

#[derive(Debug, Clone)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub t_end: f64,
}

/// Integrate `y' = f(t, y)` from `t0` towards `t1` (either direction).
/// `observe` sees every accepted state, starting with the initial one.
pub fn dopri5<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    ctl: &StepControl,
    mut observe: O,
) -> Result<(Vec<f64>, RunStats), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), OdeError>,
    O: FnMut(f64, &[f64]) -> Result<Next, OdeError>,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut stats = RunStats {
        accepted: 0,
        rejected: 0,
        t_end: t0,
    };
    let mut cap = match observe(t, &y)? {
        Next::Continue(c) => c,
        Next::Stop => return Ok((y, stats)),
    };
    if span == 0.0 {
        return Ok((y, stats));
    }
    let mut k = vec![vec![0.0; n]; 7];
    f(t, &y, &mut k[0])?;
    let mut h = ctl.h_init.unwrap_or_else(|| initial_step(&y, &k[0], ctl, span));
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(OdeError::MaxSteps { at: t });
        }
        h = h.min(cap).min((t1 - t).abs());
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { at: t, value: max_abs(&y) });
        }
        let hs = h * dir;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += hs * A[s][j] * k[j][i];
                }
                y_stage[i] = acc;
            }
            let (_, tail) = k.split_at_mut(s);
            f(t + C[s] * hs, &y_stage, &mut tail[0])?;
            if s == 6 {
                y_new.copy_from_slice(&y_stage);
            }
        }
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
            err += (hs * e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            continue;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        if err <= 1.0 {
            t += hs;
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            stats.accepted += 1;
            stats.t_end = t;
            match observe(t, &y)? {
                Next::Continue(c) => cap = c,
                Next::Stop => break,
            }
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= fac.min(1.0);
        }
    }
    Ok((y, stats))
}

fn max_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn initial_step(y: &[f64], dy: &[f64], ctl: &StepControl, span: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = ctl.atol + ctl.rtol * a.abs();
        d0 = d0.max(a.abs() / sc);
        d1 = d1.max(b.abs() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-10 * span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let (y, stats) = dopri5(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            10.0,
            &StepControl::new(1e-12),
            |_, _| Ok(Next::Continue(f64::INFINITY)),
        )
        .unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((stats.t_end - 10.0).abs() < 1e-15);
    }

    #[test]
    fn backwards_exponential() {
        let (y, _) = dopri5(
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            1.0,
            &[1.0],
            -1.0,
            &StepControl::new(1e-11),
            |_, _| Ok(Next::Continue(f64::INFINITY)),
        )
        .unwrap();
        assert!((y[0] - (-2f64).exp()).abs() < 1e-9);
    }
}
