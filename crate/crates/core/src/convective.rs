//! Second-order convective equations
//! `ψ'' = S + (V + Fψ')ψ + Wψ²` linearized by `ψ = P + Qφ'/φ`, `φ'' = Uφ`.
//!
//! Forward: `Q = −2/F`, `P = −2W/F²`, and `U` from the first-order linear
//! equation that `a₀ = 0` leaves, `U' = A + BU`. The coefficients must obey
//! `V + (F'' − 2W')/F + (6WF' − 2F'² − 4W²)/F² = 0`.
//!
//! Reverse: `F = −2/Q`, `W = −2P/Q²`, `V = (QQ'' + 4P² + 2(PQ)')/Q²`, and
//! `S` from `a₀ = 0`.

use serde::Serialize;

use crate::colehopf::{psi_derivatives, PoleMask};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Jet};
use crate::grid::{hermite, linspace, GridFunction};
use crate::lincore::Ode2Spec;
use crate::ode::{integrate_from_anchor, Rk45Options};
use crate::oracle::Equation;

pub const CONSTRAINT_TOL: f64 = 1e-8;
pub const CHECK_POINTS: usize = 201;

/// `U` either in closed form or sampled (with `U'`) on a grid.
#[derive(Debug, Clone)]
pub enum UField {
    Expr(Expr),
    Grid(GridFunction),
}

impl UField {
    /// `(U, U')` at `x`; sampled fields use cubic Hermite interpolation.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        match self {
            UField::Expr(e) => {
                let d = e.derivs(x, 1)?;
                Ok((d[0], d[1]))
            }
            UField::Grid(g) => {
                let xs = g.x();
                let (u, du) = (g.row_by_name("U").unwrap(), g.row_by_name("dU").unwrap());
                let n = xs.len();
                if !(x >= xs[0] && x <= xs[n - 1]) {
                    return Err(Error::InvalidInput(format!("x = {x} outside the sampled U")));
                }
                let k = xs.partition_point(|&s| s <= x).clamp(1, n - 1);
                let (x0, x1) = (xs[k - 1], xs[k]);
                let v = hermite(x0, x1, (u[k - 1], u[k]), (du[k - 1], du[k]), x);
                // derivative of the interpolant by a small centred difference
                let e = 1e-6 * (x1 - x0);
                let (a, b) = ((x - e).max(x0), (x + e).min(x1));
                let d = (hermite(x0, x1, (u[k - 1], u[k]), (du[k - 1], du[k]), b)
                    - hermite(x0, x1, (u[k - 1], u[k]), (du[k - 1], du[k]), a))
                    / (b - a);
                Ok((v, d))
            }
        }
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match self {
            UField::Expr(e) => Some(e),
            UField::Grid(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvectiveSystem {
    pub f: Expr,
    pub w: Expr,
    pub v: Expr,
    pub s: Expr,
    pub q: Expr,
    pub p: Expr,
    pub u: UField,
    pub constraint_norm: f64,
    pub domain: (f64, f64),
}

fn check_nonzero(e: &Expr, what: &str, domain: (f64, f64)) -> Result<()> {
    let xs = linspace(domain.0, domain.1, 2 * CHECK_POINTS - 1);
    let vals: Vec<f64> = xs.iter().map(|&x| e.eval(x)).collect::<std::result::Result<_, _>>()?;
    for i in 0..vals.len() {
        let crosses = i + 1 < vals.len() && vals[i].signum() != vals[i + 1].signum();
        if vals[i] == 0.0 || !vals[i].is_finite() || crosses {
            return Err(Error::ZeroCrossing {
                what: what.into(),
                x: xs[i],
            });
        }
    }
    Ok(())
}

fn check_domain(domain: (f64, f64)) -> Result<()> {
    if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
        return Err(Error::InvalidInput(format!("bad domain [{}, {}]", domain.0, domain.1)));
    }
    Ok(())
}

/// `V + (F'' − 2W')/F + (6WF' − 2F'² − 4W²)/F²` at `x`.
pub fn constraint_defect(f: &Expr, w: &Expr, v: &Expr, x: f64) -> Result<f64> {
    let fd = f.derivs(x, 2)?;
    let wd = w.derivs(x, 1)?;
    let (f0, f1, f2) = (fd[0], fd[1], fd[2]);
    Ok(v.eval(x)? + (f2 - 2.0 * wd[1]) / f0 + (6.0 * wd[0] * f1 - 2.0 * f1 * f1 - 4.0 * wd[0] * wd[0]) / (f0 * f0))
}

/// `(A, B)` of `U' = A + BU` at `x`.
fn u_equation(f: &Expr, w: &Expr, v: &Expr, s: &Expr, p: &Expr, q: &Expr, x: f64) -> Result<(f64, f64)> {
    let pd = p.derivs(x, 2)?;
    let qd = q.derivs(x, 1)?;
    let (fv, wv, vv, sv) = (f.eval(x)?, w.eval(x)?, v.eval(x)?, s.eval(x)?);
    let a = -(pd[2] - wv * pd[0] * pd[0] - (vv + fv * pd[1]) * pd[0] - sv) / qd[0];
    let b = fv * pd[0] - 2.0 * qd[1] / qd[0];
    Ok((a, b))
}

/// Forward direction. `U` is returned in closed form when the `U`
/// equation has constant coefficients on the domain, otherwise sampled on
/// `n` points by RK45 from `U(x0) = u0`.
pub fn conv_forward(
    f: Expr,
    w: Expr,
    v: Expr,
    s: Expr,
    u0: f64,
    x0: f64,
    domain: (f64, f64),
    n: usize,
) -> Result<ConvectiveSystem> {
    check_domain(domain)?;
    if f.as_constant() == Some(0.0) {
        return Err(Error::Unsupported(
            "F = 0: the linearization divides by F; this case needs an added R(x)ψ³ term, which is not supported".into(),
        ));
    }
    check_nonzero(&f, "F", domain)?;
    let q = -2.0 / &f;
    let p = -2.0 * &w / f.powi(2);
    let pts = linspace(domain.0, domain.1, CHECK_POINTS);
    let mut worst: f64 = 0.0;
    for &x in &pts {
        let d = constraint_defect(&f, &w, &v, x)?;
        worst = if d.is_finite() { worst.max(d.abs()) } else { f64::INFINITY };
    }
    if !(worst <= CONSTRAINT_TOL) {
        return Err(Error::Validation {
            what: "convective coefficient constraint".into(),
            norm: worst,
            tol: CONSTRAINT_TOL,
        });
    }
    // constant-coefficient fast path
    let (a0, b0) = u_equation(&f, &w, &v, &s, &p, &q, pts[0])?;
    let mut constant = true;
    for &x in &pts {
        let (a, b) = u_equation(&f, &w, &v, &s, &p, &q, x)?;
        if (a - a0).abs() > 1e-12 * (1.0 + a0.abs()) || (b - b0).abs() > 1e-12 * (1.0 + b0.abs()) {
            constant = false;
            break;
        }
    }
    let u = if constant {
        let xv = Expr::var() - x0;
        UField::Expr(if b0 == 0.0 {
            u0 + a0 * xv
        } else {
            (u0 + a0 / b0) * (b0 * xv).exp() - a0 / b0
        })
    } else {
        let grid = linspace(domain.0, domain.1, n.max(2));
        let rhs = |x: f64, y: &[f64], d: &mut [f64]| -> std::result::Result<(), String> {
            let (a, b) = u_equation(&f, &w, &v, &s, &p, &q, x).map_err(|e| e.to_string())?;
            d[0] = a + b * y[0];
            Ok(())
        };
        let sol = integrate_from_anchor(rhs, x0, &[u0], &grid, &Rk45Options::default())?;
        let mut uu = Vec::with_capacity(grid.len());
        let mut du = Vec::with_capacity(grid.len());
        for (x, y) in grid.iter().zip(&sol.values) {
            let y = y
                .as_ref()
                .ok_or_else(|| Error::Numerical(format!("U integration stopped before x = {x}")))?;
            let (a, b) = u_equation(&f, &w, &v, &s, &p, &q, *x)?;
            uu.push(y[0]);
            du.push(a + b * y[0]);
        }
        UField::Grid(GridFunction::new(grid)?.with_row("U", uu)?.with_row("dU", du)?)
    };
    Ok(ConvectiveSystem {
        f,
        w,
        v,
        s,
        q,
        p,
        u,
        constraint_norm: worst,
        domain,
    })
}

/// Reverse direction from `(P, Q, U)`.
pub fn conv_reverse(p: Expr, q: Expr, u: Expr, domain: (f64, f64)) -> Result<ConvectiveSystem> {
    check_domain(domain)?;
    check_nonzero(&q, "Q", domain)?;
    let (dp, ddp) = (p.deriv(1), p.deriv(2));
    let (dq, ddq) = (q.deriv(1), q.deriv(2));
    let q2 = q.powi(2);
    let f = -2.0 / &q;
    let w = -2.0 * &p / &q2;
    let v = (&q * &ddq + 4.0 * p.powi(2) + 2.0 * (&p * &q).deriv(1)) / &q2;
    let s = &ddp - &w * p.powi(2) - (&f * &q * &u + &v + &f * &dp) * &p + &q * u.deriv(1) + 2.0 * &u * &dq;
    let mut worst: f64 = 0.0;
    for x in linspace(domain.0, domain.1, CHECK_POINTS) {
        let d = constraint_defect(&f, &w, &v, x)?;
        worst = if d.is_finite() { worst.max(d.abs()) } else { f64::INFINITY };
    }
    Ok(ConvectiveSystem {
        f,
        w,
        v,
        s,
        q,
        p,
        u: UField::Expr(u),
        constraint_norm: worst,
        domain,
    })
}

/// `[a₀, a₁, a₂, a₃]` as printed, at `x`.
pub fn conv_ai_residuals(sys: &ConvectiveSystem, x: f64) -> Result<[f64; 4]> {
    let pd = sys.p.derivs(x, 2)?;
    let qd = sys.q.derivs(x, 2)?;
    let (p, p1, p2) = (pd[0], pd[1], pd[2]);
    let (q, q1, q2) = (qd[0], qd[1], qd[2]);
    let (f, w, v, s) = (sys.f.eval(x)?, sys.w.eval(x)?, sys.v.eval(x)?, sys.s.eval(x)?);
    let (u, u1) = sys.u.eval(x)?;
    let a3 = q * f + 2.0;
    let a2 = q * (f * p - w * q) - (2.0 + f * q) * q1;
    let a1 = q2 - f * p * q1 - u * f * q * q - (2.0 * u + v + f * p1 + 2.0 * w * p) * q;
    let a0 = p2 - w * p * p - (f * q * u + v + f * p1) * p + q * u1 + 2.0 * u * q1 - s;
    Ok([a0, a1, a2, a3])
}

impl ConvectiveSystem {
    pub fn equation(&self) -> Equation {
        Equation::Convective {
            f: self.f.clone(),
            w: self.w.clone(),
            v: self.v.clone(),
            s: self.s.clone(),
            v1: None,
        }
    }

    pub fn max_ai(&self, points: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &x in points {
            for a in conv_ai_residuals(self, x)? {
                worst = worst.max(a.abs());
            }
        }
        Ok(worst)
    }

    /// Solves `φ'' = Uφ` from `(φ, φ')(x0)` on `grid` (augmented with the
    /// `U` equation when `U` is sampled) and returns rows `U, dU, phi, dphi`.
    pub fn solve_phi(&self, ic: (f64, f64), x0: f64, grid: &[f64]) -> Result<GridFunction> {
        let opts = Rk45Options::default();
        let (uu, du, phi, dphi) = match &self.u {
            UField::Expr(ue) => {
                let spec = Ode2Spec::new(ue.clone());
                let sol = crate::lincore::solve_linear_ode(&spec, ic, x0, grid)?;
                let mut uu = Vec::new();
                let mut du = Vec::new();
                for &x in grid {
                    let d = ue.derivs(x, 1)?;
                    uu.push(d[0]);
                    du.push(d[1]);
                }
                (
                    uu,
                    du,
                    sol.row_by_name("phi").unwrap().to_vec(),
                    sol.row_by_name("dphi").unwrap().to_vec(),
                )
            }
            UField::Grid(_) => {
                let (u_start, _) = self.u.eval(x0)?;
                let (f, w, v, s, p, q) = (&self.f, &self.w, &self.v, &self.s, &self.p, &self.q);
                let rhs = |x: f64, y: &[f64], d: &mut [f64]| -> std::result::Result<(), String> {
                    let (a, b) = u_equation(f, w, v, s, p, q, x).map_err(|e| e.to_string())?;
                    d[0] = a + b * y[0];
                    d[1] = y[2];
                    d[2] = y[0] * y[1];
                    Ok(())
                };
                let sol = integrate_from_anchor(rhs, x0, &[u_start, ic.0, ic.1], grid, &opts)?;
                let mut out = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                for (x, y) in grid.iter().zip(&sol.values) {
                    let y = y
                        .as_ref()
                        .ok_or_else(|| Error::Numerical(format!("phi integration stopped before x = {x}")))?;
                    let (a, b) = u_equation(f, w, v, s, p, q, *x)?;
                    out.0.push(y[0]);
                    out.1.push(a + b * y[0]);
                    out.2.push(y[1]);
                    out.3.push(y[2]);
                }
                out
            }
        };
        GridFunction::new(grid.to_vec())?
            .with_row("U", uu)?
            .with_row("dU", du)?
            .with_row("phi", phi)?
            .with_row("dphi", dphi)
    }

    /// `ψ = P + Qφ'/φ` with analytic `ψ'`, `ψ''`; rows `psi, dpsi, ddpsi`.
    pub fn transform(&self, phi: &GridFunction) -> Result<(GridFunction, PoleMask)> {
        let x = phi.x();
        let (ph, dph) = (phi.row_by_name("phi").unwrap(), phi.row_by_name("dphi").unwrap());
        let (uu, du) = (phi.row_by_name("U").unwrap(), phi.row_by_name("dU").unwrap());
        let mask = PoleMask::detect(x, ph, Some(dph));
        if mask.fraction() >= 1.0 {
            return Err(Error::EntirelySingular);
        }
        let b = Bindings::new();
        let mut rows = [Vec::new(), Vec::new(), Vec::new()];
        for i in 0..x.len() {
            let d = if mask.is_masked(i) {
                [f64::NAN; 3]
            } else {
                let pj = self.p.jet(x[i], 2, &b)?;
                let qj = self.q.jet(x[i], 2, &b)?;
                let uj = Jet::from_derivatives(&[uu[i], du[i]])?;
                psi_derivatives(&pj, &qj, &uj, None, dph[i] / ph[i])
            };
            for k in 0..3 {
                rows[k].push(d[k]);
            }
        }
        let [a, b2, c] = rows;
        Ok((
            GridFunction::new(x.to_vec())?
                .with_row("psi", a)?
                .with_row("dpsi", b2)?
                .with_row("ddpsi", c)?,
            mask,
        ))
    }
}

/// Coefficients of the reduced equation `ξ'' = S̃ + (Ṽ + F̃ξ')ξ + W̃ξ²`
/// obtained from `ψ'' = S + (V + Fψ')ψ + Wψ² + V₁ψ'` by `ξ = pψ`,
/// `p = exp(−½∫_{x0}^x V₁)`. Rows: `p, dp, S, V, F, W` (reduced).
#[derive(Debug, Clone)]
pub struct Reduced {
    pub coeffs: GridFunction,
}

pub fn conv_reduce(v1: &Expr, f: &Expr, v: &Expr, w: &Expr, s: &Expr, x0: f64, grid: &[f64]) -> Result<Reduced> {
    let rhs = |x: f64, _y: &[f64], d: &mut [f64]| -> std::result::Result<(), String> {
        d[0] = v1.eval(x).map_err(|e| e.to_string())?;
        if !d[0].is_finite() {
            return Err(format!("V1 is not finite at x = {x}"));
        }
        Ok(())
    };
    let sol = integrate_from_anchor(rhs, x0, &[0.0], grid, &Rk45Options::default())?;
    let mut rows: [Vec<f64>; 6] = Default::default();
    for (x, y) in grid.iter().zip(&sol.values) {
        let integral = y
            .as_ref()
            .ok_or_else(|| Error::Numerical(format!("integral of V1 diverges before x = {x}")))?[0];
        let p = (-0.5 * integral).exp();
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Numerical(format!("p = exp(-∫V1/2) overflows at x = {x}")));
        }
        let vd = v1.derivs(*x, 1)?;
        let lp1 = -0.5 * vd[0]; // p'/p
        let lp2 = 0.25 * vd[0] * vd[0] - 0.5 * vd[1]; // p''/p
        let fv = f.eval(*x)?;
        rows[0].push(p);
        rows[1].push(p * lp1);
        rows[2].push(p * s.eval(*x)?);
        rows[3].push(v.eval(*x)? + lp2);
        rows[4].push(fv / p);
        rows[5].push((w.eval(*x)? - fv * lp1) / p);
    }
    let mut g = GridFunction::new(grid.to_vec())?;
    for (name, row) in ["p", "dp", "S", "V", "F", "W"].into_iter().zip(rows) {
        g.push_row(name, row)?;
    }
    Ok(Reduced { coeffs: g })
}

/// Largest relative difference between `φ` solved numerically for
/// `U = Ce^{−2ax} + a²` and the modified-Bessel closed form, with the
/// numeric initial data taken from the closed form at the left end.
pub fn bessel_check(a: f64, c: f64, c1: f64, c2: f64, domain: (f64, f64), n: usize) -> Result<f64> {
    let params = Bindings::from_pairs(&[
        ("a", a),
        ("C", c),
        ("C1", c1),
        ("C2", c2),
        ("x0", domain.0),
        ("x1", domain.1),
    ]);
    let entry = crate::lincore::catalog_phi("convective-bessel", &params)?;
    let grid = linspace(domain.0, domain.1, n);
    let exact = entry.sample(&grid)?;
    let ic = entry.eval(domain.0)?;
    let numeric = crate::lincore::solve_linear_ode(&entry.linear, ic, domain.0, &grid)?;
    let (pe, pn) = (exact.row_by_name("phi").unwrap(), numeric.row_by_name("phi").unwrap());
    let scale = pe.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(pe
        .iter()
        .zip(pn)
        .fold(0.0f64, |m, (e, v)| m.max((e - v).abs() / scale)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTrip {
    pub coefficients: f64,
    pub pq: f64,
}

/// Max pointwise differences of reverse∘forward on `(F, W, V, S)` and of
/// forward∘reverse on `(P, Q)`.
pub fn round_trip(sys: &ConvectiveSystem, points: &[f64]) -> Result<RoundTrip> {
    let u = match &sys.u {
        UField::Expr(e) => e.clone(),
        UField::Grid(_) => {
            return Err(Error::Unsupported("round trip needs a closed-form U".into()));
        }
    };
    let back = conv_reverse(sys.p.clone(), sys.q.clone(), u, sys.domain)?;
    let mut coeffs: f64 = 0.0;
    let mut pq: f64 = 0.0;
    let fwd_q = -2.0 / &back.f;
    let fwd_p = -2.0 * &back.w / back.f.powi(2);
    for &x in points {
        for (a, b) in [(&sys.f, &back.f), (&sys.w, &back.w), (&sys.v, &back.v), (&sys.s, &back.s)] {
            coeffs = coeffs.max((a.eval(x)? - b.eval(x)?).abs());
        }
        pq = pq.max((fwd_q.eval(x)? - sys.q.eval(x)?).abs());
        pq = pq.max((fwd_p.eval(x)? - sys.p.eval(x)?).abs());
    }
    Ok(RoundTrip { coefficients: coeffs, pq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::lincore::catalog_phi;
    use crate::oracle::residual_report;

    fn e(t: &str) -> Expr {
        parse_expr(t, &[]).unwrap()
    }

    fn example() -> ConvectiveSystem {
        conv_forward(e("1"), e("1"), e("4"), e("0"), 2.0, 0.0, (0.0, 2.0), 201).unwrap()
    }

    #[test]
    fn forward_example() {
        let sys = example();
        assert_eq!(sys.constraint_norm, 0.0);
        let u = sys.u.as_expr().expect("closed form");
        for x in [0.0, 0.3, 1.7] {
            assert_eq!(sys.q.eval(x).unwrap(), -2.0);
            assert_eq!(sys.p.eval(x).unwrap(), -2.0);
            assert!((u.eval(x).unwrap() - (f64::exp(-2.0 * x) + 1.0)).abs() < 1e-14);
        }
        for a in conv_ai_residuals(&sys, 0.3).unwrap() {
            assert!(a.abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_system_and_violations() {
        let z = conv_forward(e("1"), e("0"), e("0"), e("0"), 0.0, 0.0, (0.0, 1.0), 50).unwrap();
        assert_eq!(z.p.eval(0.5).unwrap(), 0.0);
        assert_eq!(z.u.eval(0.5).unwrap().0, 0.0);
        match conv_forward(e("1"), e("1"), e("0"), e("0"), 0.0, 0.0, (0.0, 1.0), 50) {
            Err(Error::Validation { norm, .. }) => assert!((norm - 4.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            conv_forward(e("0"), e("1"), e("0"), e("0"), 0.0, 0.0, (0.0, 1.0), 50),
            Err(Error::Unsupported(m)) if m.contains("R(x)")
        ));
        assert!(matches!(
            conv_forward(e("x"), e("0"), e("0"), e("0"), 0.0, 0.0, (-1.0, 1.0), 50),
            Err(Error::ZeroCrossing { .. })
        ));
    }

    #[test]
    fn tampering() {
        let mut sys = example();
        let before = conv_ai_residuals(&sys, 0.4).unwrap();
        sys.v = &sys.v + 1.0;
        let after = conv_ai_residuals(&sys, 0.4).unwrap();
        assert!((after[1] - before[1] - 2.0).abs() < 1e-12);
        let sys = example();
        let f = sys.f.eval(1.1).unwrap();
        assert_eq!(sys.q.eval(1.1).unwrap() * f + 2.0, 0.0);
    }

    #[test]
    fn reverse_examples() {
        let r = conv_reverse(e("-2"), e("-2"), e("exp(-2*x) + 1"), (0.0, 2.0)).unwrap();
        for x in [0.1, 1.2] {
            assert!((r.f.eval(x).unwrap() - 1.0).abs() < 1e-15);
            assert!((r.w.eval(x).unwrap() - 1.0).abs() < 1e-15);
            assert!((r.v.eval(x).unwrap() - 4.0).abs() < 1e-15);
            assert!(r.s.eval(x).unwrap().abs() < 1e-14);
        }
        let r = conv_reverse(e("0"), e("-2"), e("0.7"), (0.0, 1.0)).unwrap();
        assert_eq!(r.s.eval(0.5).unwrap(), 0.0);
        assert_eq!(r.v.eval(0.5).unwrap(), 0.0);
        let r = conv_reverse(e("x"), e("-2"), e("0"), (0.0, 1.0)).unwrap();
        for x in [0.2, 0.9] {
            assert!((r.w.eval(x).unwrap() + x / 2.0).abs() < 1e-15);
            assert!((r.v.eval(x).unwrap() - (x * x - 1.0)).abs() < 1e-14);
        }
        assert!(r.constraint_norm <= 1e-12);
        assert!(r.max_ai(&linspace(0.0, 1.0, 11)).unwrap() <= 1e-10);
        assert!(conv_reverse(e("0"), e("x"), e("0"), (-1.0, 1.0)).is_err());
    }

    #[test]
    fn round_trips() {
        let sys = example();
        let rt = round_trip(&sys, &linspace(0.0, 2.0, 21)).unwrap();
        assert!(rt.coefficients <= 1e-10 && rt.pq <= 1e-10, "{rt:?}");
        // forward of a reverse system reproduces P, Q and U from U(x0)
        let r = conv_reverse(e("x"), e("-2"), e("sin(x)"), (0.0, 1.0)).unwrap();
        let f = conv_forward(r.f.clone(), r.w.clone(), r.v.clone(), r.s.clone(), 0.0, 0.0, (0.0, 1.0), 101).unwrap();
        for x in linspace(0.0, 1.0, 11) {
            assert!((f.p.eval(x).unwrap() - x).abs() < 1e-12);
            assert!((f.u.eval(x).unwrap().0 - x.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn end_to_end_with_bessel() {
        let sys = example();
        let grid = linspace(0.0, 2.0, 201);
        let phi = sys.solve_phi((1.0, 0.0), 0.0, &grid).unwrap();
        let (cand, mask) = sys.transform(&phi).unwrap();
        let r = residual_report(&sys.equation(), &cand, Some(&mask), 1e-7).unwrap();
        assert!(r.pass, "{}", r.linf);
        let entry = catalog_phi("convective-bessel", &Bindings::from_pairs(&[("a", 1.0), ("C", 1.0)])).unwrap();
        assert!(entry.is_validated());
        let rel = bessel_check(1.0, 1.0, 1.0, 1.0, (0.0, 2.0), 201).unwrap();
        assert!(rel <= 1e-8, "{rel}");
    }

    #[test]
    fn sampled_u_path() {
        // F = 1 + x/4, W chosen so the constraint holds with V = 0
        let f = e("1 + x/4");
        let w = e("0");
        // V = -F''/F + 2F'^2/F^2 makes the constraint vanish for W = 0
        let v = e("2*(1/4)^2/(1 + x/4)^2");
        let sys = conv_forward(f, w, v, e("0.3"), 0.5, 0.0, (0.0, 1.0), 101).unwrap();
        assert!(matches!(sys.u, UField::Grid(_)));
        assert!(sys.max_ai(&linspace(0.0, 1.0, 23)).unwrap() <= 1e-7);
        let grid = linspace(0.0, 1.0, 101);
        let phi = sys.solve_phi((1.0, 0.2), 0.0, &grid).unwrap();
        let (cand, mask) = sys.transform(&phi).unwrap();
        let r = residual_report(&sys.equation(), &cand, Some(&mask), 1e-8).unwrap();
        assert!(r.pass, "{}", r.linf);
    }

    #[test]
    fn reductions() {
        let grid = linspace(0.0, 1.0, 11);
        let red = conv_reduce(&e("0"), &e("1"), &e("2"), &e("3"), &e("4"), 0.0, &grid).unwrap();
        assert_eq!(red.coeffs.row_by_name("p").unwrap()[5], 1.0);
        assert_eq!(red.coeffs.row_by_name("V").unwrap()[5], 2.0);
        let red = conv_reduce(&e("-2"), &e("1"), &e("2"), &e("0"), &e("0"), 0.0, &grid).unwrap();
        let p = red.coeffs.row_by_name("p").unwrap();
        assert!((p[10] - 1f64.exp()).abs() < 1e-9);
        assert!((red.coeffs.row_by_name("V").unwrap()[3] - 3.0).abs() < 1e-12);

        let grid = linspace(1.0, 2.0, 101);
        let (f, v, w, s, v1) = (e("1"), e("0.5"), e("0.2"), e("0.1"), e("-2/x"));
        let red = conv_reduce(&v1, &f, &v, &w, &s, 1.0, &grid).unwrap();
        let c = &red.coeffs;
        for (i, &x) in grid.iter().enumerate() {
            assert!((c.row_by_name("p").unwrap()[i] - x).abs() < 1e-9);
            assert!((c.row_by_name("V").unwrap()[i] - 0.5).abs() < 1e-12);
            assert!((c.row_by_name("F").unwrap()[i] - 1.0 / x).abs() < 1e-9);
        }
        // ψ of the V₁ equation mapped by ξ = pψ solves the reduced one
        let eq = Equation::Convective {
            f: f.clone(),
            w: w.clone(),
            v: v.clone(),
            s: s.clone(),
            v1: Some(v1.clone()),
        };
        let sol = crate::oracle::integrate_ode(&eq, (0.1, 0.0), 1.0, &grid, 1e-12).unwrap();
        let (ps, dps) = (
            sol.solution.row_by_name("psi").unwrap(),
            sol.solution.row_by_name("dpsi").unwrap(),
        );
        for (i, &x) in grid.iter().enumerate() {
            let (p, dp) = (c.row_by_name("p").unwrap()[i], c.row_by_name("dp").unwrap()[i]);
            let (xi, dxi) = (p * ps[i], dp * ps[i] + p * dps[i]);
            // ξ'' from the original equation
            let ddpsi = eq.rhs(x, ps[i], dps[i]).unwrap();
            let ddp = p * (0.25 * 4.0 / (x * x) - 0.5 * 2.0 / (x * x));
            let ddxi = ddp * ps[i] + 2.0 * dp * dps[i] + p * ddpsi;
            let reduced = c.row_by_name("S").unwrap()[i]
                + (c.row_by_name("V").unwrap()[i] + c.row_by_name("F").unwrap()[i] * dxi) * xi
                + c.row_by_name("W").unwrap()[i] * xi * xi;
            assert!((ddxi - reduced).abs() <= 1e-8, "{x}: {}", ddxi - reduced);
        }
    }
}
