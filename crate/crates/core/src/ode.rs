//! Adaptive Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Step-size control and the dense-output polynomial follow Hairer, Nørsett
//! & Wanner's DOPRI5. Solutions are sampled on a caller-supplied monotone
//! grid through the dense output, so accepted steps are never shortened to
//! hit grid points.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },
    #[error("maximum number of steps ({steps}) exceeded at x = {x}")]
    TooManySteps { steps: usize, x: f64 },
    #[error("right-hand side failed at x = {x}: {msg}")]
    Rhs { x: f64, msg: String },
    #[error("invalid integration request: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    /// Largest permitted |h|; `None` means the whole interval.
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Stop (returning a partial solution) once any |y_i| exceeds this.
    pub blowup: Option<f64>,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: None,
            max_steps: 5_000_000,
            blowup: None,
        }
    }
}

impl Rk45Options {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Rk45Options {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

/// Samples of an integration on the requested grid.
#[derive(Debug, Clone)]
pub struct GridSolution {
    /// `values[i]` is the state at `grid[i]`; shorter than the grid when the
    /// integration stopped early.
    pub values: Vec<Vec<f64>>,
    /// Where and why integration stopped early, if it did.
    pub stopped_at: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl GridSolution {
    pub fn is_complete(&self) -> bool {
        self.stopped_at.is_none()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates `y' = f(x, y)` from `(x0, y0)` and samples the solution at
/// every point of `grid`. The grid must be monotone in the direction of
/// integration and start at or beyond `x0` in that direction.
pub fn integrate_on_grid<F>(
    mut f: F,
    x0: f64,
    y0: &[f64],
    grid: &[f64],
    opts: &Rk45Options,
) -> Result<GridSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let n = y0.len();
    let mut sol = GridSolution {
        values: Vec::with_capacity(grid.len()),
        stopped_at: None,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if grid.is_empty() {
        return Ok(sol);
    }
    let x_end = *grid.last().unwrap();
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    for w in grid.windows(2) {
        if dir * (w[1] - w[0]) < 0.0 {
            return Err(OdeError::Invalid("grid is not monotone".into()));
        }
    }
    if dir * (grid[0] - x0) < 0.0 {
        return Err(OdeError::Invalid(
            "grid starts behind the initial point".into(),
        ));
    }

    let mut call = |x: f64, y: &[f64], out: &mut [f64]| -> Result<(), OdeError> {
        f(x, y, out).map_err(|msg| OdeError::Rhs { x, msg })
    };

    let mut x = x0;
    let mut y = y0.to_vec();
    let mut next = 0;
    while next < grid.len() && grid[next] == x0 {
        sol.values.push(y.clone());
        next += 1;
    }
    let span = (x_end - x0).abs();
    if next == grid.len() || span == 0.0 {
        while sol.values.len() < grid.len() {
            sol.values.push(y.clone());
        }
        return Ok(sol);
    }
    let h_max = opts.h_max.unwrap_or(span).min(span);

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut cont = vec![vec![0.0; n]; 5];
    call(x, &y, &mut k1)?;
    if !all_finite(&k1) {
        return Err(OdeError::Rhs {
            x,
            msg: "non-finite derivative at the initial point".into(),
        });
    }

    // initial step (Hairer's heuristic)
    let sk = |yi: f64| opts.atol + opts.rtol * yi.abs();
    let d0 = (y.iter().map(|&v| (v / sk(v)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k1
        .iter()
        .zip(&y)
        .map(|(&k, &v)| (k / sk(v)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(h_max);
    axpy(&mut ytmp, &y, dir * h, &[(1.0, &k1)]);
    call(x + dir * h, &ytmp, &mut k2)?;
    let d2 = (k2
        .iter()
        .zip(&k1)
        .zip(&y)
        .map(|((&a, &b), &v)| ((a - b) / sk(v)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(1.0 / 5.0)
    };
    h = (100.0 * h).min(h1).min(h_max);
    if !h.is_finite() || h <= 0.0 {
        h = 1e-6 * span;
    }

    let h_min = 16.0 * f64::EPSILON * (x0.abs().max(x_end.abs()).max(1.0));
    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps { steps, x });
        }
        steps += 1;
        let remaining = (x_end - x).abs();
        if h > remaining {
            h = remaining;
        }
        if h < h_min {
            return Err(OdeError::StepSizeUnderflow { x });
        }
        let hs = dir * h;

        axpy(&mut ytmp, &y, hs, &[(A21, &k1)]);
        call(x + C2 * hs, &ytmp, &mut k2)?;
        axpy(&mut ytmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
        call(x + C3 * hs, &ytmp, &mut k3)?;
        axpy(&mut ytmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        call(x + C4 * hs, &ytmp, &mut k4)?;
        axpy(
            &mut ytmp,
            &y,
            hs,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        );
        call(x + C5 * hs, &ytmp, &mut k5)?;
        axpy(
            &mut ytmp,
            &y,
            hs,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        call(x + hs, &ytmp, &mut k6)?;
        axpy(
            &mut ynew,
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let xnew = x + hs;
        call(xnew, &ynew, &mut k7)?;

        let mut err = 0.0;
        for i in 0..n {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let s = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / s).powi(2);
        }
        err = (err / n as f64).sqrt();
        if !err.is_finite() || !all_finite(&ynew) || !all_finite(&k7) {
            // treat like a hard rejection
            sol.rejected_steps += 1;
            h *= 0.2;
            reject = true;
            continue;
        }

        // PI step-size controller
        let fac11 = err.powf(0.2 - 0.04 * 0.75);
        let fac = (fac11 / facold.powf(0.04) / 0.9).clamp(0.1, 5.0);
        let hnew = h / fac;
        if err <= 1.0 {
            facold = err.max(1e-4);
            sol.accepted_steps += 1;
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - hs * k7[i] - bspl;
                cont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let last = (x_end - xnew).abs() <= h_min;
            while next < grid.len() && (dir * (grid[next] - xnew) <= 0.0 || last) {
                let theta = ((grid[next] - x) / hs).clamp(0.0, 1.0);
                let theta1 = 1.0 - theta;
                let v: Vec<f64> = (0..n)
                    .map(|i| {
                        cont[0][i]
                            + theta
                                * (cont[1][i]
                                    + theta1
                                        * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])))
                    })
                    .collect();
                sol.values.push(v);
                next += 1;
            }
            x = xnew;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if next >= grid.len() {
                return Ok(sol);
            }
            if let Some(limit) = opts.blowup {
                if y.iter().any(|v| v.abs() > limit) {
                    sol.stopped_at = Some(x);
                    return Ok(sol);
                }
            }
            let hnew = if reject { hnew.min(h) } else { hnew };
            reject = false;
            h = hnew.min(h_max);
        } else {
            sol.rejected_steps += 1;
            h /= (fac11 / 0.9).min(5.0);
            reject = true;
        }
    }
}

/// Integrates from `x0` to `x1` and returns the state at `x1`.
pub fn integrate_to<F>(
    f: F,
    x0: f64,
    y0: &[f64],
    x1: f64,
    opts: &Rk45Options,
) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let sol = integrate_on_grid(f, x0, y0, &[x1], opts)?;
    sol.values.into_iter().next().ok_or(OdeError::Invalid(
        "integration stopped before the end point".into(),
    ))
}

/// Samples on an increasing grid of a solution anchored at an interior point.
#[derive(Debug, Clone)]
pub struct AnchoredSolution {
    /// `None` where the integration stopped before reaching the point.
    pub values: Vec<Option<Vec<f64>>>,
    /// Points where either half stopped early (blow-up).
    pub stopped_at: Vec<f64>,
}

impl AnchoredSolution {
    pub fn is_complete(&self) -> bool {
        self.stopped_at.is_empty()
    }
}

/// Integrates from `(x0, y0)` outwards in both directions to cover an
/// increasing `grid`; `x0` may lie anywhere in (or at an end of) the grid.
pub fn integrate_from_anchor<F>(
    mut f: F,
    x0: f64,
    y0: &[f64],
    grid: &[f64],
    opts: &Rk45Options,
) -> Result<AnchoredSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OdeError::Invalid("grid must be strictly increasing".into()));
    }
    let split = grid.partition_point(|&g| g < x0);
    let mut out = AnchoredSolution {
        values: vec![None; grid.len()],
        stopped_at: Vec::new(),
    };
    let fwd = &grid[split..];
    if !fwd.is_empty() {
        let sol = integrate_on_grid(&mut f, x0, y0, fwd, opts)?;
        if let Some(s) = sol.stopped_at {
            out.stopped_at.push(s);
        }
        for (k, v) in sol.values.into_iter().enumerate() {
            out.values[split + k] = Some(v);
        }
    }
    if split > 0 {
        let back: Vec<f64> = grid[..split].iter().rev().copied().collect();
        let sol = integrate_on_grid(&mut f, x0, y0, &back, opts)?;
        if let Some(s) = sol.stopped_at {
            out.stopped_at.push(s);
        }
        for (k, v) in sol.values.into_iter().enumerate() {
            out.values[split - 1 - k] = Some(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchored_in_the_middle() {
        let grid: Vec<f64> = (0..=20).map(|i| -1.0 + i as f64 * 0.1).collect();
        let sol = integrate_from_anchor(
            |_, y, d| {
                d[0] = y[0];
                Ok(())
            },
            0.05,
            &[0.05f64.exp()],
            &grid,
            &Rk45Options::default(),
        )
        .unwrap();
        assert!(sol.is_complete());
        for (x, v) in grid.iter().zip(&sol.values) {
            assert!((v.as_ref().unwrap()[0] - x.exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn exponential_growth() {
        let y = integrate_to(
            |_, y, d| {
                d[0] = y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            1.0,
            &Rk45Options::default(),
        )
        .unwrap();
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_matches_cosine_on_fine_grid() {
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let sol = integrate_on_grid(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            &grid,
            &Rk45Options::default(),
        )
        .unwrap();
        assert_eq!(sol.values.len(), grid.len());
        let worst = grid
            .iter()
            .zip(&sol.values)
            .map(|(x, v)| (v[0] - x.cos()).abs().max((v[1] + x.sin()).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "worst {worst}");
    }

    #[test]
    fn backward_integration() {
        let grid = [-0.5, -1.0];
        let sol = integrate_on_grid(
            |_, y, d| {
                d[0] = y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &grid,
            &Rk45Options::default(),
        )
        .unwrap();
        assert!((sol.values[1][0] - (-1f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn blowup_returns_partial_solution() {
        // y' = y^2, y(0) = 1 escapes at x = 1
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let opts = Rk45Options {
            blowup: Some(1e8),
            ..Rk45Options::with_tol(1e-8, 1e-10)
        };
        let sol = integrate_on_grid(
            |_, y, d| {
                d[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &grid,
            &opts,
        )
        .unwrap();
        assert!(!sol.is_complete());
        let stop = sol.stopped_at.unwrap();
        assert!(stop < 1.0 && stop > 0.99, "stopped at {stop}");
        assert!(sol.values.len() <= 11);
    }

    #[test]
    fn rejects_non_monotone_grid() {
        let r = integrate_on_grid(
            |_, _, _| Ok(()),
            0.0,
            &[1.0],
            &[0.5, 0.2],
            &Rk45Options::default(),
        );
        assert!(matches!(r, Err(OdeError::Invalid(_))));
    }
}
