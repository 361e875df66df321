//! Perturbed Van der Pol equation
//! `ψ'' = μ(β − ψ²)ψ' − αψ + vψ² + hψ³ + gψ⁴ + f` paired with `φ'' = Uφ`
//! through `ψ = P + φ'/φ`.
//!
//! The generative chain: `g = −μ`, `h = 2(μP + 1)`,
//! `v = μP' + μU − (μP + 6)P + μβ`, `U = 3P² − μβP + α/2` and
//! `f = P'' − 2μβP' + (6P' + α + μ²β²)P + 4(P − μβ)P² − μβα/2`.

use serde::Serialize;

use crate::colehopf::LinearizationPair;
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Bindings, Expr};
use crate::grid::linspace;
use crate::lincore::{LinearSpec, Ode2Spec};
use crate::oracle::{compare_formulas, Equation, FormulaCheck};

/// Points used for the built-in consistency checks.
pub const CHECK_POINTS: usize = 50;
pub const F_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VdpParams {
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Non-negative root of `k² = μ²β² − 4α`; `None` when `k² < 0`.
    pub k: Option<f64>,
}

impl VdpParams {
    pub fn new(mu: f64, beta: f64, alpha: f64) -> Self {
        let k2 = mu * mu * beta * beta - 4.0 * alpha;
        VdpParams {
            mu,
            beta,
            alpha,
            k: (k2 >= 0.0).then(|| k2.sqrt()),
        }
    }

    pub fn k_squared(&self) -> f64 {
        self.mu * self.mu * self.beta * self.beta - 4.0 * self.alpha
    }

    fn mb(&self) -> f64 {
        self.mu * self.beta
    }
}

#[derive(Debug, Clone)]
pub struct VdpSystem {
    pub params: VdpParams,
    pub p: Expr,
    pub g: f64,
    pub h: Expr,
    pub v: Expr,
    pub u: Expr,
    pub f: Expr,
}

/// Builds `g, h, v, U, f` from `P`.
pub fn vdp_coeffs(p: Expr, params: VdpParams) -> VdpSystem {
    let (mu, beta, alpha) = (params.mu, params.beta, params.alpha);
    let mb = params.mb();
    let dp = p.deriv(1);
    let ddp = p.deriv(2);
    let u = 3.0 * p.powi(2) - mb * &p + alpha / 2.0;
    let h = 2.0 * (mu * &p + 1.0);
    let v = mu * &dp + mu * &u - (mu * &p + 6.0) * &p + mb;
    let f =
        &ddp - 2.0 * mb * &dp + (6.0 * &dp + alpha + mb * mb) * &p + 4.0 * (&p - mb) * p.powi(2)
            - mb * alpha / 2.0;
    let _ = beta;
    VdpSystem {
        params,
        p,
        g: -mu,
        h,
        v,
        u,
        f,
    }
}

/// `[a₀, a₁, a₂, a₃, a₄]` exactly as printed, at `x`.
pub fn vdp_residuals(sys: &VdpSystem, x: f64) -> Result<[f64; 5]> {
    let VdpParams {
        mu, beta, alpha, ..
    } = sys.params;
    let pj = sys.p.derivs(x, 2)?;
    let (p, dp, ddp) = (pj[0], pj[1], pj[2]);
    let uj = sys.u.derivs(x, 1)?;
    let (u, du) = (uj[0], uj[1]);
    let g = sys.g;
    let h = sys.h.eval(x)?;
    let v = sys.v.eval(x)?;
    let f = sys.f.eval(x)?;
    let a4 = -mu - g;
    let a3 = -(2.0 * mu + 4.0 * g) * p - h + 2.0;
    let a2 = mu * dp - (6.0 * g + mu) * p * p - 3.0 * h * p - v + mu * u + mu * beta;
    let a1 = -4.0 * g * p.powi(3) - 3.0 * h * p * p + (2.0 * mu * dp - 2.0 * v + 2.0 * mu * u) * p
        - 2.0 * u
        + alpha;
    let a0 = ddp + mu * (p * p - beta) * dp + du - g * p.powi(4) - h * p.powi(3)
        + (mu * u - v) * p * p
        + alpha * p
        - mu * beta * u
        - f;
    Ok([a0, a1, a2, a3, a4])
}

impl VdpSystem {
    pub fn equation(&self) -> Equation {
        Equation::PerturbedVdp {
            mu: self.params.mu,
            beta: self.params.beta,
            alpha: self.params.alpha,
            v: self.v.clone(),
            h: self.h.clone(),
            g: Expr::constant(self.g),
            f: self.f.clone(),
        }
    }

    pub fn linear(&self) -> Ode2Spec {
        Ode2Spec::new(self.u.clone())
    }

    pub fn pair(&self, domain: (f64, f64)) -> Result<LinearizationPair> {
        Ok(LinearizationPair {
            p: self.p.clone(),
            q: Expr::constant(1.0),
            linear: LinearSpec::ode2(self.linear(), domain)?,
            nonlinear: self.equation(),
        })
    }

    /// Largest |a_i| over the points.
    pub fn max_residual(&self, points: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &x in points {
            for a in vdp_residuals(self, x)? {
                worst = worst.max(a.abs());
            }
        }
        Ok(worst)
    }
}

/// The unforced (`f = 0`) family. At `α = 0` (`k = μβ`) the specialization
/// `P = cμβ / (2(e^{−μβx} + c))`, `c = C1 + C2`, is used directly.
pub fn vdp_unforced_p(params: VdpParams, c1: f64, c2: f64, domain: (f64, f64)) -> Result<Expr> {
    let k = params.k.ok_or_else(|| {
        Error::Unsupported(format!("k^2 = {} < 0 (complex k)", params.k_squared()))
    })?;
    let mb = params.mb();
    let (p, den) = if params.alpha == 0.0 {
        let b = Bindings::from_pairs(&[("m", mb), ("c", c1 + c2)]);
        (
            parse_expr("c*m/(2*(exp(-m*x) + c))", &["m", "c"])?.bind(&b),
            parse_expr("exp(-m*x) + c", &["m", "c"])?.bind(&b),
        )
    } else {
        let b = Bindings::from_pairs(&[("m", mb), ("k", k), ("C1", c1), ("C2", c2)]);
        let names = ["m", "k", "C1", "C2"];
        (
            parse_expr(
                "(2*C1*m*exp(m*x/2) + C2*(m + k)*exp(k*x/2) + (m - k)*exp(-k*x/2))/(4*(C1*exp(m*x/2) + C2*exp(k*x/2) + exp(-k*x/2)))",
                &names,
            )?
            .bind(&b),
            parse_expr("C1*exp(m*x/2) + C2*exp(k*x/2) + exp(-k*x/2)", &names)?.bind(&b),
        )
    };
    let fine = linspace(domain.0, domain.1, 401);
    let dens: Vec<f64> = fine
        .iter()
        .map(|&x| den.eval(x))
        .collect::<std::result::Result<_, _>>()?;
    let scale = dens.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    for (i, d) in dens.iter().enumerate() {
        let crosses = i + 1 < dens.len() && d.signum() != dens[i + 1].signum();
        if d.abs() <= 1e-12 * scale || crosses {
            return Err(Error::ZeroCrossing {
                what: "denominator of P".into(),
                x: fine[i],
            });
        }
    }
    let sys = vdp_coeffs(p.clone(), params);
    let mut worst: f64 = 0.0;
    for x in linspace(domain.0, domain.1, CHECK_POINTS) {
        worst = worst.max(sys.f.eval(x)?.abs());
    }
    if !(worst <= F_TOL) {
        return Err(Error::Validation {
            what: "f = 0 for the unforced P".into(),
            norm: worst,
            tol: F_TOL,
        });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `P = g`
    Plus,
    /// `P = −g + μβ/3`
    Minus,
}

/// Forced family from a chosen `g(x)`; checks both branches give the same
/// `U` at 20 points of `domain`.
pub fn vdp_forced_family(
    g: &Expr,
    branch: Branch,
    params: VdpParams,
    domain: (f64, f64),
) -> Result<VdpSystem> {
    let plus = g.clone();
    let minus = -g + params.mb() / 3.0;
    let (u_plus, u_minus) = (
        vdp_coeffs(plus.clone(), params).u,
        vdp_coeffs(minus.clone(), params).u,
    );
    let mut worst: f64 = 0.0;
    for x in linspace(domain.0, domain.1, 20) {
        if let (Ok(a), Ok(b)) = (u_plus.eval(x), u_minus.eval(x)) {
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    if worst > 1e-12 {
        return Err(Error::Validation {
            what: "branch invariance of U".into(),
            norm: worst,
            tol: 1e-12,
        });
    }
    Ok(vdp_coeffs(
        if branch == Branch::Plus { plus } else { minus },
        params,
    ))
}

/// Printed case-specific closed forms compared with the generative chain.
/// Returns an empty list when the parameters match none of the cases.
pub fn printed_case_checks(
    params: VdpParams,
    c1: f64,
    c2: f64,
    domain: (f64, f64),
) -> Result<Vec<FormulaCheck>> {
    let VdpParams { mu, beta, alpha, k } = params;
    let Some(k) = k else { return Ok(Vec::new()) };
    let pts = linspace(domain.0, domain.1, CHECK_POINTS);
    let mut out = Vec::new();
    let b = Bindings::from_pairs(&[
        ("mu", mu),
        ("beta", beta),
        ("alpha", alpha),
        ("k", k),
        ("c", c1 + c2),
    ]);
    let names = ["mu", "beta", "alpha", "k", "c"];
    let e = |t: &str| -> Result<Expr> { Ok(parse_expr(t, &names)?.bind(&b)) };
    if c1 == 0.0 && c2 == 0.0 {
        let sys = vdp_coeffs(e("(mu*beta - k)/4")?, params);
        out.push(compare_formulas(
            "case 1: U",
            &e("alpha/2 + (3*k + mu*beta)*(k - mu*beta)/16")?,
            &sys.u,
            &pts,
        ));
        out.push(compare_formulas(
            "case 1: v",
            &e("-mu^3*beta^2/8 + (mu/2)*(alpha - beta + k^2/4) + 3*k/2")?,
            &sys.v,
            &pts,
        ));
        out.push(compare_formulas(
            "case 1: h",
            &e("(mu/2)*(mu*beta - k) + 2")?,
            &sys.h,
            &pts,
        ));
    }
    if k == 0.0 && c1 == 0.0 {
        let p = vdp_unforced_p(params, c1, c2, domain)?;
        let sys = vdp_coeffs(p.clone(), params);
        out.push(compare_formulas("case 2: P", &e("mu*beta/4")?, &p, &pts));
        out.push(compare_formulas(
            "case 2: U",
            &e("alpha/2 - mu^2*beta^2/16")?,
            &sys.u,
            &pts,
        ));
        out.push(compare_formulas(
            "case 2: h",
            &e("mu^2*beta/2 + 2")?,
            &sys.h,
            &pts,
        ));
        out.push(compare_formulas(
            "case 2: v",
            &e("(mu/2)*(alpha - beta - mu^2*beta^2/4)")?,
            &sys.v,
            &pts,
        ));
    }
    if alpha == 0.0 {
        let p = vdp_unforced_p(params, c1, c2, domain)?;
        let sys = vdp_coeffs(p.clone(), params);
        out.push(compare_formulas(
            "case 3: P",
            &e("c*mu*beta*exp(mu*beta*x/2)/(c + exp(-mu*beta*x))")?,
            &p,
            &pts,
        ));
        out.push(compare_formulas(
            "case 3: U",
            &e("-c*mu^2*beta^2*(exp(-mu*beta*x) - c)/(exp(-mu*beta*x) + c)^2")?,
            &sys.u,
            &pts,
        ));
        out.push(compare_formulas(
            "case 3: v",
            &e("mu*beta*(exp(-mu*beta*x) - 2*c)/(exp(-mu*beta*x) + c)")?,
            &sys.v,
            &pts,
        ));
        out.push(compare_formulas(
            "case 3: h",
            &e("2 + mu^2*beta*c/(exp(-mu*beta*x) + c)")?,
            &sys.h,
            &pts,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Expr {
        Expr::constant(v)
    }

    #[test]
    fn half_constant_system() {
        let sys = vdp_coeffs(c(0.5), VdpParams::new(1.0, 3.0, 2.0));
        assert_eq!(sys.g, -1.0);
        for x in [-1.0, 0.3] {
            assert!((sys.h.eval(x).unwrap() - 3.0).abs() < 1e-15);
            assert!(sys.v.eval(x).unwrap().abs() < 1e-15);
            assert!((sys.u.eval(x).unwrap() - 0.25).abs() < 1e-15);
            assert!(sys.f.eval(x).unwrap().abs() < 1e-15);
        }
        for a in vdp_residuals(&sys, 0.7).unwrap() {
            assert!(a.abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_p_system() {
        let sys = vdp_coeffs(c(0.0), VdpParams::new(1.0, 1.0, 0.0));
        assert_eq!(sys.h.eval(0.0).unwrap(), 2.0);
        assert_eq!(sys.u.eval(0.0).unwrap(), 0.0);
        assert_eq!(sys.f.eval(0.0).unwrap(), 0.0);
        assert_eq!(sys.v.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn linear_p_branches() {
        let params = VdpParams::new(1.0, 1.0, 0.0);
        let g = Expr::var();
        let plus = vdp_forced_family(&g, Branch::Plus, params, (-1.0, 1.0)).unwrap();
        let minus = vdp_forced_family(&g, Branch::Minus, params, (-1.0, 1.0)).unwrap();
        for x in [-0.5, 0.2, 1.3] {
            let u = 3.0 * x * x - x;
            assert!((plus.u.eval(x).unwrap() - u).abs() < 1e-14);
            assert!((minus.u.eval(x).unwrap() - u).abs() < 1e-14);
            // f from the generative chain for P = x
            let fp: f64 = 4.0 * x * x * x - 4.0 * x * x + 7.0 * x - 2.0;
            assert!((plus.f.eval(x).unwrap() - fp).abs() < 1e-13);
            // the printed cubic belongs to P = -x + 1/3
            let fm: f64 = -4.0 * x * x * x + (6.0 + 1.0 / 3.0) * x + 1.0 / 27.0;
            assert!((minus.f.eval(x).unwrap() - fm).abs() < 1e-13);
        }
    }

    #[test]
    fn tangent_forcing() {
        let g = parse_expr("tan(x)", &[]).unwrap();
        let params = VdpParams::new(1.0, 3.0, 2.0);
        let sys = vdp_forced_family(&g, Branch::Plus, params, (-1.2, 1.2)).unwrap();
        // |x| ≤ 1.2 keeps a distance of 0.37 from the poles at ±π/2
        assert!(sys.max_residual(&linspace(-1.2, 1.2, 41)).unwrap() <= 1e-10);
        assert!(vdp_residuals(&sys, std::f64::consts::FRAC_PI_2).is_err());
    }

    #[test]
    fn tampering_shows_up() {
        let mut sys = vdp_coeffs(c(0.5), VdpParams::new(1.0, 3.0, 2.0));
        sys.h = &sys.h + 1.0;
        assert!((vdp_residuals(&sys, 0.0).unwrap()[3] + 1.0).abs() < 1e-15);
        let mut sys = vdp_coeffs(c(0.5), VdpParams::new(1.0, 3.0, 2.0));
        sys.g = 0.0;
        assert_eq!(vdp_residuals(&sys, 0.0).unwrap()[4], -1.0);
    }

    #[test]
    fn unforced_family() {
        let d = (-2.0, 2.0);
        let p = vdp_unforced_p(VdpParams::new(1.0, 3.0, 2.0), 0.0, 0.0, d).unwrap();
        assert!((p.eval(0.4).unwrap() - 0.5).abs() < 1e-15);
        let p = vdp_unforced_p(VdpParams::new(2.0, 1.0, 1.0), 0.0, 1.0, d).unwrap();
        assert!((p.eval(0.4).unwrap() - 0.5).abs() < 1e-15);
        let p = vdp_unforced_p(VdpParams::new(1.0, 2.0, 0.0), 0.5, 0.5, d).unwrap();
        assert!((p.eval(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            vdp_unforced_p(VdpParams::new(1.0, 1.0, 1.0), 0.0, 0.0, d),
            Err(Error::Unsupported(_))
        ));
        // C1 = -1, C2 = 0 puts a zero of the denominator at x = 0 when k = 0
        assert!(matches!(
            vdp_unforced_p(VdpParams::new(1.0, 3.0, 2.0), -1.0, 0.0, d),
            Err(Error::ZeroCrossing { .. })
        ));
    }

    #[test]
    fn printed_cases() {
        let d = (-2.0, 2.0);
        let c1 = printed_case_checks(VdpParams::new(1.0, 3.0, 2.0), 0.0, 0.0, d).unwrap();
        assert_eq!(c1.len(), 3);
        assert!(c1.iter().all(|c| c.agrees), "{c1:?}");
        let c2 = printed_case_checks(VdpParams::new(2.0, 1.0, 1.0), 0.0, 1.0, d).unwrap();
        assert!(c2.iter().all(|c| c.agrees), "{c2:?}");
        let c3 = printed_case_checks(VdpParams::new(1.0, 2.0, 0.0), 0.5, 0.5, d).unwrap();
        let verdict: Vec<bool> = c3.iter().map(|c| c.agrees).collect();
        assert_eq!(verdict, vec![false, false, true, true]);
    }
}
