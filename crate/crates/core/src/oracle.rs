//! Independent verification: direct integration of the nonlinear equations,
//! a method-of-lines solver for the generalized Burgers PDE, pointwise
//! residuals and pole detection.
//!
//! Nothing here reuses the family modules' derivations; coefficient
//! expressions are only ever evaluated pointwise.

use serde::Serialize;

use crate::colehopf::PoleMask;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{GridFunction, SpaceTimeField};
use crate::ode::{integrate_from_anchor, integrate_on_grid, Rk45Options};

/// Blow-up threshold for direct integration.
pub const BLOWUP: f64 = 1e8;

/// A second-order nonlinear ODE `ψ'' = F(x, ψ, ψ')`.
#[derive(Debug, Clone)]
pub enum Equation {
    /// `ψ'' = μ(β − ψ²)ψ' − αψ + vψ² + hψ³ + gψ⁴ + f`
    PerturbedVdp {
        mu: f64,
        beta: f64,
        alpha: f64,
        v: Expr,
        h: Expr,
        g: Expr,
        f: Expr,
    },
    /// `ψ'' + (c₀ + c₁ψ + c₂ψ²)ψ' + Σ b_k ψ^k = 0`
    Lienard { c: [Expr; 3], b: [Expr; 5] },
    /// `ψ'' = ψ'²/ψ − ψ'/x + (αψ² + β)/x + γψ³ + δ/ψ`
    Painleve3 {
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
    },
    /// `ψ'' = S + (V + Fψ')ψ + Wψ² [+ V₁ψ']`
    Convective {
        f: Expr,
        w: Expr,
        v: Expr,
        s: Expr,
        v1: Option<Expr>,
    },
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::PerturbedVdp { .. } => "perturbed-van-der-pol",
            Equation::Lienard { .. } => "lienard",
            Equation::Painleve3 { .. } => "painleve-iii",
            Equation::Convective { .. } => "convective",
        }
    }

    /// `ψ''` demanded by the equation.
    pub fn rhs(&self, x: f64, psi: f64, dpsi: f64) -> Result<f64> {
        Ok(match self {
            Equation::PerturbedVdp {
                mu,
                beta,
                alpha,
                v,
                h,
                g,
                f,
            } => {
                let p2 = psi * psi;
                mu * (beta - p2) * dpsi - alpha * psi
                    + v.eval(x)? * p2
                    + h.eval(x)? * p2 * psi
                    + g.eval(x)? * p2 * p2
                    + f.eval(x)?
            }
            Equation::Lienard { c, b } => {
                let damping = c[0].eval(x)? + c[1].eval(x)? * psi + c[2].eval(x)? * psi * psi;
                let mut force = 0.0;
                let mut pk = 1.0;
                for bk in b {
                    force += bk.eval(x)? * pk;
                    pk *= psi;
                }
                -damping * dpsi - force
            }
            Equation::Painleve3 {
                alpha,
                beta,
                gamma,
                delta,
            } => {
                if psi == 0.0 || x == 0.0 {
                    return Err(Error::Numerical(format!(
                        "Painlevé III is singular at x = {x}"
                    )));
                }
                dpsi * dpsi / psi - dpsi / x
                    + (alpha * psi * psi + beta) / x
                    + gamma * psi.powi(3)
                    + delta / psi
            }
            Equation::Convective { f, w, v, s, v1 } => {
                let mut r =
                    s.eval(x)? + (v.eval(x)? + f.eval(x)? * dpsi) * psi + w.eval(x)? * psi * psi;
                if let Some(v1) = v1 {
                    r += v1.eval(x)? * dpsi;
                }
                r
            }
        })
    }

    /// Whether the equation is singular at `ψ = 0` (and so needs `ψ ≈ 0`
    /// masked).
    fn divides_by_psi(&self) -> bool {
        matches!(self, Equation::Painleve3 { .. })
    }
}

/// Direct integration result; `psi`/`dpsi` rows are NaN beyond a blow-up.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub solution: GridFunction,
    pub stopped_at: Vec<f64>,
}

impl OracleSolution {
    pub fn is_complete(&self) -> bool {
        self.stopped_at.is_empty()
    }
}

/// Integrates `eq` from `(ψ, ψ')(x0) = ic` over an increasing grid with
/// relative and absolute tolerance `tol`; stops at |ψ| > 1e8.
pub fn integrate_ode(
    eq: &Equation,
    ic: (f64, f64),
    x0: f64,
    grid: &[f64],
    tol: f64,
) -> Result<OracleSolution> {
    if !(1e-12..=1e-6).contains(&tol) {
        return Err(Error::InvalidInput(format!(
            "tolerance {tol:e} outside [1e-12, 1e-6]"
        )));
    }
    let gf = GridFunction::new(grid.to_vec())?;
    let opts = Rk45Options {
        blowup: Some(BLOWUP),
        ..Rk45Options::with_tol(tol, tol)
    };
    let rhs = |x: f64, y: &[f64], d: &mut [f64]| -> std::result::Result<(), String> {
        d[0] = y[1];
        d[1] = eq.rhs(x, y[0], y[1]).map_err(|e| e.to_string())?;
        Ok(())
    };
    let sol = integrate_from_anchor(rhs, x0, &[ic.0, ic.1], grid, &opts)?;
    let mut psi = vec![f64::NAN; grid.len()];
    let mut dpsi = vec![f64::NAN; grid.len()];
    for (i, v) in sol.values.iter().enumerate() {
        if let Some(v) = v {
            psi[i] = v[0];
            dpsi[i] = v[1];
        }
    }
    Ok(OracleSolution {
        solution: gf.with_row("psi", psi)?.with_row("dpsi", dpsi)?,
        stopped_at: sol.stopped_at,
    })
}

/// `ψ_t = Mψ_xx + Hψψ_x + Vψ + Wψ²`.
#[derive(Debug, Clone)]
pub struct BurgersPde {
    pub m: Expr,
    pub h: Expr,
    pub v: Expr,
    pub w: Expr,
}

impl BurgersPde {
    /// `ψ_t − (Mψ_xx + Hψψ_x + Vψ + Wψ²)` given the coefficient values.
    pub fn residual(coef: [f64; 4], psi: f64, psi_t: f64, psi_x: f64, psi_xx: f64) -> f64 {
        let [m, h, v, w] = coef;
        psi_t - (m * psi_xx + h * psi * psi_x + v * psi + w * psi * psi)
    }

    /// `[M, H, V, W]` at `x`.
    pub fn coeffs(&self, x: f64) -> Result<[f64; 4]> {
        Ok([
            self.m.eval(x)?,
            self.h.eval(x)?,
            self.v.eval(x)?,
            self.w.eval(x)?,
        ])
    }
}

/// Dirichlet data for the method-of-lines solve.
#[derive(Debug, Clone)]
pub enum BoundaryTrace {
    Fixed(f64, f64),
    /// Piecewise-linear in time.
    Sampled {
        t: Vec<f64>,
        left: Vec<f64>,
        right: Vec<f64>,
    },
}

impl BoundaryTrace {
    pub fn at(&self, t: f64) -> (f64, f64) {
        match self {
            BoundaryTrace::Fixed(l, r) => (*l, *r),
            BoundaryTrace::Sampled { t: ts, left, right } => {
                let n = ts.len();
                let k = ts.partition_point(|&s| s <= t).clamp(1, n - 1);
                let s = ((t - ts[k - 1]) / (ts[k] - ts[k - 1])).clamp(0.0, 1.0);
                (
                    left[k - 1] + s * (left[k] - left[k - 1]),
                    right[k - 1] + s * (right[k] - right[k - 1]),
                )
            }
        }
    }

    /// Trace of the edge columns of a field.
    pub fn from_field(f: &SpaceTimeField) -> Self {
        BoundaryTrace::Sampled {
            t: f.t.clone(),
            left: f.values.iter().map(|r| r[0]).collect(),
            right: f.values.iter().map(|r| *r.last().unwrap()).collect(),
        }
    }
}

/// Method of lines on a uniform grid: centered second-order differences in
/// space, adaptive RK45 in time, Dirichlet ends from `boundary`. Output at
/// the times `t_out` (increasing, starting at 0).
pub fn integrate_pde_mol(
    pde: &BurgersPde,
    x: &[f64],
    psi0: &[f64],
    t_out: &[f64],
    boundary: &BoundaryTrace,
    tol: f64,
) -> Result<SpaceTimeField> {
    let n = x.len();
    if n < 100 {
        return Err(Error::InvalidInput(
            "method of lines needs at least 100 points".into(),
        ));
    }
    if psi0.len() != n || psi0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "initial profile must be finite and match the grid".into(),
        ));
    }
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let coef: Vec<[f64; 4]> = x.iter().map(|&xi| pde.coeffs(xi)).collect::<Result<_>>()?;
    let inv_h2 = 1.0 / (h * h);
    let inv_2h = 0.5 / h;
    let rhs = |t: f64, y: &[f64], d: &mut [f64]| -> std::result::Result<(), String> {
        let (l, r) = boundary.at(t);
        let m = y.len();
        for j in 0..m {
            let i = j + 1;
            let um = if j == 0 { l } else { y[j - 1] };
            let up = if j + 1 == m { r } else { y[j + 1] };
            let u = y[j];
            let [mm, hh, vv, ww] = coef[i];
            d[j] = mm * (up - 2.0 * u + um) * inv_h2
                + hh * u * (up - um) * inv_2h
                + vv * u
                + ww * u * u;
        }
        Ok(())
    };
    let opts = Rk45Options {
        blowup: Some(BLOWUP),
        ..Rk45Options::with_tol(tol, tol)
    };
    let y0 = &psi0[1..n - 1];
    let sol = integrate_on_grid(rhs, 0.0, y0, t_out, &opts)?;
    if let Some(t) = sol.stopped_at {
        return Err(Error::Numerical(format!(
            "method-of-lines solution blew up at t = {t}"
        )));
    }
    let values = t_out
        .iter()
        .zip(sol.values)
        .map(|(&t, inner)| {
            let (l, r) = boundary.at(t);
            let mut row = Vec::with_capacity(n);
            row.push(l);
            row.extend(inner);
            row.push(r);
            row
        })
        .collect();
    Ok(SpaceTimeField {
        x: x.to_vec(),
        t: t_out.to_vec(),
        values,
    })
}

/// Residual statistics over the unmasked points.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub equation: String,
    pub threshold: f64,
    pub linf: f64,
    pub l2: f64,
    pub mask_fraction: f64,
    pub pass: bool,
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub residual: Vec<f64>,
    #[serde(skip)]
    pub masked: Vec<usize>,
}

impl ResidualReport {
    /// Builds a report from pointwise residuals; non-finite residuals are
    /// treated as masked. `l2` is the root mean square.
    pub fn from_pointwise(
        equation: &str,
        x: Vec<f64>,
        residual: Vec<f64>,
        masked: &[bool],
        threshold: f64,
    ) -> Self {
        let mut linf: f64 = 0.0;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut masked_idx = Vec::new();
        for (i, r) in residual.iter().enumerate() {
            if masked.get(i).copied().unwrap_or(false) || !r.is_finite() {
                masked_idx.push(i);
                continue;
            }
            linf = linf.max(r.abs());
            sum += r * r;
            count += 1;
        }
        let n = residual.len().max(1);
        let l2 = if count > 0 {
            (sum / count as f64).sqrt()
        } else {
            0.0
        };
        ResidualReport {
            equation: equation.to_string(),
            threshold,
            linf,
            l2,
            mask_fraction: masked_idx.len() as f64 / n as f64,
            pass: count > 0 && linf <= threshold,
            x,
            residual,
            masked: masked_idx,
        }
    }

    /// Largest residual divided by the largest unmasked residual scale given.
    pub fn relative_linf(&self, scale: f64) -> f64 {
        self.linf / scale.abs().max(f64::MIN_POSITIVE)
    }
}

/// Pointwise residual `ψ'' − F(x, ψ, ψ')` of a candidate with rows `psi`,
/// `dpsi`, `ddpsi`; `mask` (if any) adds pole regions.
pub fn residual_report(
    eq: &Equation,
    candidate: &GridFunction,
    mask: Option<&PoleMask>,
    threshold: f64,
) -> Result<ResidualReport> {
    let row = |name: &str| {
        candidate
            .row_by_name(name)
            .ok_or_else(|| Error::InvalidInput(format!("candidate is missing the `{name}` row")))
    };
    let (psi, dpsi, ddpsi) = (row("psi")?, row("dpsi")?, row("ddpsi")?);
    let x = candidate.x();
    let scale = psi
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut masked = vec![false; x.len()];
    let mut res = vec![f64::NAN; x.len()];
    for i in 0..x.len() {
        if mask.map_or(false, |m| m.is_masked(i)) {
            masked[i] = true;
            continue;
        }
        if eq.divides_by_psi() && psi[i].abs() < 1e-8 * scale {
            masked[i] = true;
            continue;
        }
        if !(psi[i].is_finite() && dpsi[i].is_finite() && ddpsi[i].is_finite()) {
            masked[i] = true;
            continue;
        }
        res[i] = match eq.rhs(x[i], psi[i], dpsi[i]) {
            Ok(r) => ddpsi[i] - r,
            Err(_) => {
                masked[i] = true;
                f64::NAN
            }
        };
    }
    Ok(ResidualReport::from_pointwise(
        eq.name(),
        x.to_vec(),
        res,
        &masked,
        threshold,
    ))
}

/// Pointwise comparison of a printed formula against the recomputed one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaCheck {
    pub formula: String,
    pub max_abs_diff: f64,
    pub agrees: bool,
}

/// Tolerance for [`compare_formulas`].
pub const FORMULA_TOL: f64 = 1e-9;

/// Compares two expressions at the given points; a failed evaluation counts
/// as disagreement.
pub fn compare_formulas(
    formula: &str,
    printed: &Expr,
    recomputed: &Expr,
    points: &[f64],
) -> FormulaCheck {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for &x in points {
        match (printed.eval(x), recomputed.eval(x)) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => {
                let d = (a - b).abs();
                worst = worst.max(d);
                if d > FORMULA_TOL * (1.0 + b.abs()) {
                    ok = false;
                }
            }
            _ => {
                ok = false;
                worst = f64::INFINITY;
            }
        }
    }
    FormulaCheck {
        formula: formula.to_string(),
        max_abs_diff: worst,
        agrees: ok,
    }
}

/// Zeros of the `phi` row (and `dphi` if present, for Hermite refinement).
pub fn pole_detect(phi: &GridFunction) -> Result<PoleMask> {
    let v = phi
        .row_by_name("phi")
        .ok_or_else(|| Error::InvalidInput("grid function has no `phi` row".into()))?;
    Ok(PoleMask::detect(phi.x(), v, phi.row_by_name("dphi")))
}
