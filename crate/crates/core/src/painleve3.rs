//! Painlevé III linearization with a free function `P(x)`.
//!
//! For `γ > 0` take `Q = 1/√γ` (or the negative root). With
//! `δ = −β²/(αQ + 2)²` every `P` gives a linear equation
//! `φ'' = Kφ' + Uφ` whose solutions map to Painlevé III solutions through
//! `ψ = P + Qφ'/φ`.

use serde::Serialize;

use crate::colehopf::{LinearizationPair, PoleMask};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::grid::GridFunction;
use crate::lincore::{catalog_phi, ClosedFormEntry, LinearSpec, Ode2Spec};
use crate::oracle::{residual_report, Equation, ResidualReport};

/// Default working domain, away from the `x = 0` singularity.
pub const DEFAULT_DOMAIN: (f64, f64) = (0.5, 3.0);

#[derive(Debug, Clone, Serialize)]
pub struct P3Config {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub q: f64,
    pub delta: f64,
    #[serde(skip)]
    pub p: Expr,
    #[serde(skip)]
    pub k: Expr,
    #[serde(skip)]
    pub u: Expr,
}

/// `δ` for which the equation linearizes.
pub fn linearizable_delta(alpha: f64, beta: f64, q: f64) -> f64 {
    -beta * beta / (alpha * q + 2.0).powi(2)
}

pub fn p3_linearize(
    alpha: f64,
    beta: f64,
    gamma: f64,
    p: Expr,
    negative_root: bool,
) -> Result<P3Config> {
    if !(gamma > 0.0) {
        return Err(Error::Unsupported(format!("gamma = {gamma} has no real Q")));
    }
    let q = if negative_root { -1.0 } else { 1.0 } / gamma.sqrt();
    let aq2 = alpha * q + 2.0;
    if aq2 == 0.0 {
        return Err(Error::InvalidInput(
            "alpha*Q + 2 = 0 leaves delta undefined".into(),
        ));
    }
    let delta = linearizable_delta(alpha, beta, q);
    let x = Expr::var();
    let k = -(2.0 * &x * &p + alpha * q * q + q) / (q * &x);
    let u = -p.deriv(1) / q - p.powi(2) / (q * q) - (alpha * q + 1.0) / (q * &x) * &p
        + beta / (q * aq2);
    Ok(P3Config {
        alpha,
        beta,
        gamma,
        q,
        delta,
        p,
        k,
        u,
    })
}

impl P3Config {
    pub fn equation(&self) -> Equation {
        Equation::Painleve3 {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
        }
    }

    pub fn linear(&self) -> Ode2Spec {
        Ode2Spec::with_k(self.u.clone(), self.k.clone())
    }

    pub fn pair(&self, domain: (f64, f64)) -> Result<LinearizationPair> {
        if domain.0 <= 0.0 && domain.1 >= 0.0 {
            return Err(Error::InvalidInput(
                "Painlevé III domain must exclude x = 0".into(),
            ));
        }
        Ok(LinearizationPair {
            p: self.p.clone(),
            q: Expr::constant(self.q),
            linear: LinearSpec::ode2(self.linear(), domain)?,
            nonlinear: self.equation(),
        })
    }
}

/// Residual of the Painlevé III equation for a candidate with rows `psi`,
/// `dpsi`, `ddpsi`; points where `ψ ≈ 0` are masked.
pub fn p3_residual(
    cfg: &P3Config,
    candidate: &GridFunction,
    mask: Option<&PoleMask>,
    threshold: f64,
) -> Result<ResidualReport> {
    residual_report(&cfg.equation(), candidate, mask, threshold)
}

/// The worked examples' closed-form `φ`, residual-checked. `params` may set
/// `a`, `b`, `c`, `d` (example 1) and `C1`, `C2`.
pub fn p3_example_phi(example: u8, params: &Bindings) -> Result<ClosedFormEntry> {
    let name = match example {
        1 => "painleve3-example1",
        2 => "painleve3-example2",
        3 => "painleve3-example3",
        _ => return Err(Error::UnknownEntry(format!("painleve3-example{example}"))),
    };
    catalog_phi(name, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colehopf::transform_with_derivatives;
    use crate::expr::parse_expr;
    use crate::grid::linspace;

    #[test]
    fn example_one_coefficients() {
        let cfg = p3_linearize(-1.0, 1.0, 1.0, Expr::constant(0.0), false).unwrap();
        assert_eq!((cfg.q, cfg.delta), (1.0, -1.0));
        for x in [0.6, 1.7] {
            assert!(cfg.k.eval(x).unwrap().abs() < 1e-15);
            assert!((cfg.u.eval(x).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn example_two_coefficients() {
        let cfg = p3_linearize(-1.0, 1.0, 1.0, parse_expr("sin(x)", &[]).unwrap(), false).unwrap();
        for x in [0.6, 1.7, 2.9] {
            let (s, c) = (f64::sin(x), f64::cos(x));
            assert!((cfg.k.eval(x).unwrap() + 2.0 * s).abs() < 1e-14);
            assert!((cfg.u.eval(x).unwrap() - (-s * s - c + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_from_gamma() {
        let cfg = p3_linearize(0.0, 2.0, 4.0, Expr::constant(0.0), false).unwrap();
        assert_eq!(cfg.q, 0.5);
        assert_eq!(cfg.delta, -1.0);
        assert!((cfg.q * cfg.q * cfg.gamma - 1.0).abs() <= 1e-14);
        assert!(p3_linearize(0.0, 1.0, -1.0, Expr::constant(0.0), false).is_err());
        // alpha*Q + 2 = 0
        assert!(p3_linearize(-2.0, 1.0, 1.0, Expr::constant(0.0), false).is_err());
    }

    fn tanh_candidate(cfg: &P3Config) -> (GridFunction, PoleMask) {
        let x = linspace(0.5, 3.0, 101);
        let phi: Vec<f64> = x.iter().map(|v| v.cosh()).collect();
        let dphi: Vec<f64> = x.iter().map(|v| v.sinh()).collect();
        transform_with_derivatives(
            &cfg.p,
            &Expr::constant(cfg.q),
            &cfg.linear(),
            &x,
            &phi,
            &dphi,
        )
        .unwrap()
    }

    #[test]
    fn residuals() {
        let cfg = p3_linearize(-1.0, 1.0, 1.0, Expr::constant(0.0), false).unwrap();
        let (g, m) = tanh_candidate(&cfg);
        let r = p3_residual(&cfg, &g, Some(&m), 1e-8).unwrap();
        assert!(r.pass, "{}", r.linf);
        // constant psi = 1 from phi = e^x
        let x = linspace(0.5, 3.0, 11);
        let e: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let (g1, _) =
            transform_with_derivatives(&cfg.p, &Expr::constant(1.0), &cfg.linear(), &x, &e, &e)
                .unwrap();
        assert!(p3_residual(&cfg, &g1, None, 0.0).unwrap().linf == 0.0);

        let mut bad = cfg.clone();
        bad.delta = -1.1;
        let r = p3_residual(&bad, &g, Some(&m), 1e-8).unwrap();
        let smallest = r
            .residual
            .iter()
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min);
        assert!(smallest >= 1e-3 && !r.pass);
    }
}
