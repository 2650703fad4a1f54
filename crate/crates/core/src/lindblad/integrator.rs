//! Adaptive Dormand-Prince 5(4) stepping for linear complex systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-8,
            atol: 1e-12,
        }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(y)` through each time in `outputs` (increasing, from
/// `t0`), calling `observe(k, t, y)` at every output. `h0` seeds the step.
pub fn integrate<F, O>(
    mut f: F,
    y0: Vec<Complex64>,
    t0: f64,
    outputs: &[f64],
    h0: f64,
    tol: Tolerances,
    mut observe: O,
) -> Result<Vec<Complex64>>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> Result<()>,
{
    let n = y0.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut y = y0;
    let mut k: Vec<Vec<Complex64>> = vec![vec![zero; n]; 7];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut t = t0;
    let mut h = h0;
    f(&y, &mut k[0]);
    let mut steps = 0usize;
    for (idx, &target) in outputs.iter().enumerate() {
        if target < t - 1e-12 * t.abs().max(1.0) {
            return Err(Error::invalid("t_grid", "times must be increasing"));
        }
        while target - t > 1e-13 * target.abs().max(1.0) {
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            for s in 1..7 {
                stage.copy_from_slice(&y);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j] * step;
                    if a != 0.0 {
                        for (st, &kv) in stage.iter_mut().zip(kj) {
                            *st += kv * a;
                        }
                    }
                }
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
                f(&stage, &mut k[s]);
            }
            let e = &mut stage;
            e.fill(zero);
            for (kj, &ej) in k.iter().zip(&E) {
                if ej != 0.0 {
                    for (ev, &kv) in e.iter_mut().zip(kj) {
                        *ev += kv * (ej * step);
                    }
                }
            }
            let mut err = 0.0;
            for ((ev, yo), yn) in e.iter().zip(&y).zip(&y_new) {
                let scale = tol.atol + tol.rtol * yo.norm().max(yn.norm());
                let r = ev.norm() / scale;
                err += r * r;
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    achieved: t,
                    target,
                    reason: "non-finite error estimate".into(),
                });
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            steps += 1;
            if h < 1e-14 * target.abs().max(1.0) {
                return Err(Error::Integration {
                    achieved: t,
                    target,
                    reason: format!("step size underflow ({h:e})"),
                });
            }
            if steps > 200_000_000 {
                return Err(Error::Integration {
                    achieved: t,
                    target,
                    reason: "step budget exhausted".into(),
                });
            }
        }
        t = target;
        observe(idx, t, &y)?;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotating_oscillator() {
        // y' = -i ω y
        let omega = 3.0;
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let mut seen = Vec::new();
        integrate(
            |y, dy| dy[0] = y[0] * Complex64::new(0.0, -omega),
            vec![Complex64::new(1.0, 0.0)],
            0.0,
            &times,
            0.01,
            Tolerances::default(),
            |_, t, y| {
                seen.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        for (t, y) in seen {
            let exact = Complex64::from_polar(1.0, -omega * t);
            assert!((y - exact).norm() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn decay() {
        let out = integrate(
            |y, dy| dy[0] = -y[0] * 2.0,
            vec![Complex64::new(1.0, 0.0)],
            0.0,
            &[1.0],
            0.1,
            Tolerances::default(),
            |_, _, _| Ok(()),
        )
        .unwrap();
        assert!((out[0].re - (-2.0f64).exp()).abs() < 1e-9);
    }
}
