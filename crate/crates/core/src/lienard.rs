//! Polynomial Lienard equations `ψ'' + (c₀ + c₁ψ + c₂ψ²)ψ' + Σ b_k ψ^k = 0`
//! reached from `φ'' = Uφ` through `ψ = P + φ'/φ`.
//!
//! The `b_k` are found by expanding in powers of `r = φ'/φ` (with
//! `r' = U − r²`) and zeroing `r⁴ … r⁰` in turn.

use serde::Serialize;

use crate::colehopf::LinearizationPair;
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Bindings, Expr};
use crate::lincore::{LinearSpec, Ode2Spec};
use crate::oracle::{compare_formulas, Equation, FormulaCheck};

/// The order in which the triangular system must be solved.
pub const SOLVE_ORDER: [usize; 5] = [4, 3, 2, 1, 0];

#[derive(Debug, Clone)]
pub struct LienardSystem {
    pub c: [Expr; 3],
    pub b: [Expr; 5],
    pub p: Expr,
    pub u: Expr,
}

// Polynomials in r with Expr coefficients; zero constants are dropped.
type Poly = Vec<Option<Expr>>;

fn add_opt(a: &Option<Expr>, b: &Option<Expr>) -> Option<Expr> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        (Some(a), None) => Some(a.clone()),
        (None, b) => b.clone(),
    }
}

fn lift(e: &Expr) -> Option<Expr> {
    match e.as_constant() {
        Some(c) if c == 0.0 => None,
        _ => Some(e.clone()),
    }
}

fn poly_add(a: &Poly, b: &Poly) -> Poly {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| add_opt(a.get(i).unwrap_or(&None), b.get(i).unwrap_or(&None)))
        .collect()
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out: Poly = vec![None; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            if let (Some(x), Some(y)) = (ai, bj) {
                out[i + j] = add_opt(&out[i + j], &Some(x * y));
            }
        }
    }
    out
}

fn scale(a: &Poly, e: &Expr) -> Poly {
    match lift(e) {
        None => Vec::new(),
        Some(e) => a.iter().map(|c| c.as_ref().map(|c| &e * c)).collect(),
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `b₀ … b₄` from the r-power matching, solved in the mandatory order
/// `4, 3, 2, 1, 0`.
pub fn lienard_b(c: [Expr; 3], p: Expr, u: Expr) -> LienardSystem {
    lienard_b_ordered(c, p, u, &SOLVE_ORDER).expect("canonical order")
}

/// As [`lienard_b`] with an explicit solve order; anything but descending
/// powers is rejected since each `b_k` needs `b_{k+1} … b₄` first.
pub fn lienard_b_ordered(c: [Expr; 3], p: Expr, u: Expr, order: &[usize]) -> Result<LienardSystem> {
    if order != SOLVE_ORDER {
        return Err(Error::InvalidInput(format!(
            "b_k must be solved in the order {SOLVE_ORDER:?}, got {order:?}"
        )));
    }
    let dp = p.deriv(1);
    let ddp = p.deriv(2);
    let du = u.deriv(1);
    // ψ = P + r, ψ' = P' + U − r², ψ'' = P'' + U' − 2Ur + 2r³
    let psi: Poly = vec![lift(&p), Some(Expr::constant(1.0))];
    let dpsi: Poly = vec![lift(&(&dp + &u)), None, Some(Expr::constant(-1.0))];
    let ddpsi: Poly = vec![
        lift(&(&ddp + &du)),
        lift(&(-2.0 * &u)),
        None,
        Some(Expr::constant(2.0)),
    ];
    let psi2 = poly_mul(&psi, &psi);
    let damping = poly_add(
        &poly_add(&vec![lift(&c[0])], &scale(&psi, &c[1])),
        &scale(&psi2, &c[2]),
    );
    let known = poly_add(&ddpsi, &poly_mul(&damping, &dpsi));

    let mut b: [Option<Expr>; 5] = Default::default();
    for &k in order {
        // coefficient of r^k in Σ_j b_j (P + r)^j is Σ_{j≥k} b_j C(j,k) P^{j−k}
        let mut acc = known.get(k).cloned().flatten();
        for (j, bj) in b.iter().enumerate().skip(k + 1) {
            let bj = bj.as_ref().expect("higher b solved first");
            let term = match j - k {
                0 => unreachable!(),
                1 => binom(j, k) * bj * &p,
                m => binom(j, k) * bj * p.powi(m as i32),
            };
            if p.as_constant() != Some(0.0) {
                acc = add_opt(&acc, &Some(term));
            }
        }
        b[k] = Some(match acc {
            Some(a) => -a,
            None => Expr::constant(0.0),
        });
    }
    let b = b.map(|e| e.expect("all solved"));
    Ok(LienardSystem { c, b, p, u })
}

/// `U = P² − P'`, the choice that makes `b₀` vanish.
pub fn riccati_u(p: &Expr) -> Expr {
    p.powi(2) - p.deriv(1)
}

/// The coefficient relations as printed, for comparison with the
/// recomputed set.
pub fn printed_b(c: &[Expr; 3], p: &Expr, u: &Expr) -> [Expr; 5] {
    let [c0, c1, c2] = c;
    let dp = p.deriv(1);
    let ddp = p.deriv(2);
    let du = u.deriv(1);
    let p2 = p.powi(2);
    [
        &ddp - c0 * &dp + &du - 2.0 * p.powi(3) + 2.0 * p * u + c0 * (&p2 - u),
        (6.0 + c1) * &p2 - 2.0 * c0 * p - c1 * &dp - (c1 + 2.0) * u,
        c2 * &p2 - 2.0 * (3.0 - c1) * p - c2 * (&dp - u) + c0,
        c1 - 2.0 * c2 * p + 2.0,
        c2.clone(),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct LienardReport {
    pub diff: Vec<FormulaCheck>,
    /// Largest |b₀| over the check points when `U = P² − P'`.
    pub riccati_b0: Option<f64>,
}

impl LienardSystem {
    pub fn equation(&self) -> Equation {
        Equation::Lienard {
            c: self.c.clone(),
            b: self.b.clone(),
        }
    }

    pub fn pair(&self, domain: (f64, f64)) -> Result<LinearizationPair> {
        Ok(LinearizationPair {
            p: self.p.clone(),
            q: Expr::constant(1.0),
            linear: LinearSpec::ode2(Ode2Spec::new(self.u.clone()), domain)?,
            nonlinear: self.equation(),
        })
    }

    /// Printed-vs-recomputed table over `points`.
    pub fn compare_printed(&self, points: &[f64]) -> Vec<FormulaCheck> {
        let printed = printed_b(&self.c, &self.p, &self.u);
        (0..5)
            .rev()
            .map(|k| compare_formulas(&format!("b{k}"), &printed[k], &self.b[k], points))
            .collect()
    }

    /// Residual of the equation at `x` for `ψ = P + r` with `φ'' = Uφ`,
    /// written out in r for an arbitrary `r`.
    pub fn r_residual(&self, x: f64, r: f64) -> Result<f64> {
        let pj = self.p.derivs(x, 2)?;
        let uj = self.u.derivs(x, 1)?;
        let psi = pj[0] + r;
        let dpsi = pj[1] + uj[0] - r * r;
        let ddpsi = pj[2] + uj[1] - 2.0 * uj[0] * r + 2.0 * r.powi(3);
        Ok(ddpsi - self.equation().rhs(x, psi, dpsi)?)
    }
}

/// Max |b₀| at `points` when `U` is taken from [`riccati_u`].
pub fn riccati_b0_norm(c: &[Expr; 3], p: &Expr, points: &[f64]) -> Result<f64> {
    let sys = lienard_b(c.clone(), p.clone(), riccati_u(p));
    let mut worst: f64 = 0.0;
    for &x in points {
        worst = worst.max(sys.b[0].eval(x)?.abs());
    }
    Ok(worst)
}

/// Parses three damping coefficients in `x`.
pub fn parse_c(texts: [&str; 3], params: &Bindings) -> Result<[Expr; 3]> {
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut out: [Expr; 3] = std::array::from_fn(|_| Expr::constant(0.0));
    for (i, t) in texts.iter().enumerate() {
        out[i] = parse_expr(t, &names)?.bind(params);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colehopf::transform_with_derivatives;
    use crate::grid::linspace;
    use crate::lincore::solve_linear_ode;
    use crate::oracle::residual_report;

    fn k(v: f64) -> Expr {
        Expr::constant(v)
    }

    fn cs(c0: f64, c1: f64, c2: f64) -> [Expr; 3] {
        [k(c0), k(c1), k(c2)]
    }

    #[test]
    fn constant_u_triangular() {
        let u = 0.7;
        let sys = lienard_b(cs(0.0, 0.0, 1.0), k(0.0), k(u));
        let b: Vec<f64> = sys.b.iter().map(|e| e.eval(0.3).unwrap()).collect();
        // ψ'' + ψ²ψ' + Σ b_k ψ^k with ψ = r, r' = u − r²
        assert_eq!(b[4], 1.0);
        assert!((b[3] + 2.0).abs() < 1e-15);
        assert!((b[2] + u).abs() < 1e-15);
        assert!((b[1] - 2.0 * u).abs() < 1e-15);
        assert!(b[0].abs() < 1e-15);
        for r in [-1.3, 0.0, 0.4, 2.0] {
            assert!(sys.r_residual(0.3, r).unwrap().abs() < 1e-12);
        }
        // ψ = √u tanh(√u x) from φ = cosh(√u x)
        let s = u.sqrt();
        let x = linspace(0.1, 1.0, 41);
        let phi: Vec<f64> = x.iter().map(|v| (s * v).cosh()).collect();
        let dphi: Vec<f64> = x.iter().map(|v| s * (s * v).sinh()).collect();
        let (g, m) = transform_with_derivatives(
            &sys.p,
            &k(1.0),
            &Ode2Spec::new(sys.u.clone()),
            &x,
            &phi,
            &dphi,
        )
        .unwrap();
        let r = residual_report(&sys.equation(), &g, Some(&m), 1e-10).unwrap();
        assert!(r.pass, "{}", r.linf);
    }

    #[test]
    fn trivial_case() {
        let sys = lienard_b(cs(0.0, 0.0, 0.0), k(0.0), k(0.0));
        for x in linspace(1.0, 2.0, 11) {
            let psi = 1.0 / x;
            let res = 2.0 / x.powi(3) - sys.equation().rhs(x, psi, -1.0 / (x * x)).unwrap();
            assert!(res.abs() <= 1e-12);
        }
    }

    #[test]
    fn printed_b3_differs_by_four() {
        let p = Expr::var();
        let u = Expr::var().powi(2);
        let sys = lienard_b(cs(0.0, 0.0, 1.0), p, u);
        let pts = linspace(-1.0, 1.0, 11);
        let diff = sys.compare_printed(&pts);
        assert_eq!(diff[0].formula, "b4");
        assert!(diff[0].agrees);
        assert_eq!(diff[1].formula, "b3");
        assert!(!diff[1].agrees);
        assert!((diff[1].max_abs_diff - 4.0).abs() < 1e-12);
        for x in [-0.5, 0.25] {
            for r in [-1.0, 0.5, 3.0] {
                assert!(sys.r_residual(x, r).unwrap().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn riccati_choice_kills_b0() {
        assert_eq!(riccati_u(&k(0.0)).eval(0.5).unwrap(), 0.0);
        let inv = parse_expr("1/x", &[]).unwrap();
        for x in [1.0, 1.5, 2.0] {
            assert!((riccati_u(&inv).eval(x).unwrap() - 2.0 / (x * x)).abs() < 1e-14);
        }
        let th = parse_expr("tanh(x)", &[]).unwrap();
        let t = 0.8f64.tanh();
        assert!((riccati_u(&th).eval(0.8).unwrap() - (2.0 * t * t - 1.0)).abs() < 1e-14);
        let pts = linspace(1.0, 2.0, 50);
        assert!(riccati_b0_norm(&cs(0.5, -1.0, 2.0), &inv, &pts).unwrap() <= 1e-10);
        assert!(riccati_b0_norm(&cs(0.5, -1.0, 2.0), &th, &pts).unwrap() <= 1e-10);
    }

    #[test]
    fn order_is_enforced() {
        assert!(lienard_b_ordered(cs(0.0, 0.0, 1.0), k(0.0), k(1.0), &[0, 1, 2, 3, 4]).is_err());
        assert!(lienard_b_ordered(cs(0.0, 0.0, 1.0), k(0.0), k(1.0), &[4, 2, 3, 1, 0]).is_err());
    }

    #[test]
    fn numerical_solution_satisfies_assembled_equation() {
        let p = parse_expr("0.3*x", &[]).unwrap();
        let u = parse_expr("1 + 0.2*x^2", &[]).unwrap();
        let sys = lienard_b([k(0.4), parse_expr("x", &[]).unwrap(), k(-0.5)], p, u);
        let x = linspace(0.0, 1.0, 101);
        let sol = solve_linear_ode(&Ode2Spec::new(sys.u.clone()), (1.0, 0.2), 0.0, &x).unwrap();
        let (g, m) = transform_with_derivatives(
            &sys.p,
            &k(1.0),
            &Ode2Spec::new(sys.u.clone()),
            &x,
            sol.row_by_name("phi").unwrap(),
            sol.row_by_name("dphi").unwrap(),
        )
        .unwrap();
        let r = residual_report(&sys.equation(), &g, Some(&m), 1e-8).unwrap();
        assert!(r.pass, "{}", r.linf);
    }
}
