//! Generalized Burgers equation `ψ_t = Mψ_xx + Hψψ_x + Vψ + Wψ²`, linearized
//! by `ψ = P + Qφ_x/φ` with `φ_t = Mφ_xx`.
//!
//! Given `M` and `H`: `Q = 2M/H`, `P = 2MH'/H² − M'/H`,
//! `W = −HM'/(2M) + H'`, `V = −MH''/H`, and the pair must satisfy
//! `(HM'/(2M) − H')P² + (MH''/H − HP')P − MP'' = 0`.

use serde::Serialize;

use crate::colehopf::PoleMask;
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::grid::{d1_uniform, d2_centered, d3_centered, linspace, SpaceTimeField};
use crate::lincore::{solve_heat, Boundary, HeatSpec};
use crate::oracle::{integrate_pde_mol, BoundaryTrace, BurgersPde, ResidualReport};

/// Largest compatibility defect accepted as linearizable.
pub const COMPAT_TOL: f64 = 1e-8;
/// Points on which the compatibility defect is sampled.
pub const COMPAT_POINTS: usize = 201;
/// Largest masked share of the field before a solve is abandoned.
pub const MAX_MASKED: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct BurgersFamily {
    #[serde(skip)]
    pub m: Expr,
    #[serde(skip)]
    pub h: Expr,
    #[serde(skip)]
    pub q: Expr,
    #[serde(skip)]
    pub p: Expr,
    #[serde(skip)]
    pub w: Expr,
    #[serde(skip)]
    pub v: Expr,
    pub compat_norm: f64,
    pub domain: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum FamilyKind {
    RationalH,
    CosH,
    ExpH,
    QuadraticM,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rationalH" => Ok(FamilyKind::RationalH),
            "cosH" => Ok(FamilyKind::CosH),
            "expH" => Ok(FamilyKind::ExpH),
            "quadraticM" => Ok(FamilyKind::QuadraticM),
            _ => Err(Error::InvalidInput(format!(
                "unknown family `{s}` (expected rationalH, cosH, expH or quadraticM)"
            ))),
        }
    }
}

/// Pointwise compatibility defect.
pub fn compat_defect(fam: &BurgersFamily, x: f64) -> Result<f64> {
    let m = fam.m.derivs(x, 1)?;
    let h = fam.h.derivs(x, 2)?;
    let p = fam.p.derivs(x, 2)?;
    Ok((h[0] * m[1] / (2.0 * m[0]) - h[1]) * p[0] * p[0]
        + (m[0] * h[2] / h[0] - h[0] * p[1]) * p[0]
        - m[0] * p[2])
}

/// `H²H''' − 5HH'H'' + 4H'³`, which must vanish when `M` is constant.
pub fn constant_m_condition(h: &Expr, x: f64) -> Result<f64> {
    let d = h.derivs(x, 3)?;
    Ok(d[0] * d[0] * d[3] - 5.0 * d[0] * d[1] * d[2] + 4.0 * d[1].powi(3))
}

fn check_domain(domain: (f64, f64)) -> Result<()> {
    if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
        return Err(Error::InvalidInput(format!(
            "bad domain [{}, {}]",
            domain.0, domain.1
        )));
    }
    Ok(())
}

/// Derives `Q, P, W, V` and the compatibility norm. Does not reject an
/// incompatible pair; see [`BurgersFamily::accept`].
pub fn burgers_derive(m: Expr, h: Expr, domain: (f64, f64)) -> Result<BurgersFamily> {
    check_domain(domain)?;
    let fine = linspace(domain.0, domain.1, 2 * COMPAT_POINTS - 1);
    let hs: Vec<f64> = fine
        .iter()
        .map(|&x| h.eval(x))
        .collect::<std::result::Result<_, _>>()?;
    let scale = hs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..hs.len() {
        let crosses = i + 1 < hs.len() && hs[i].signum() != hs[i + 1].signum();
        if !hs[i].is_finite() || hs[i].abs() <= 1e-12 * scale || crosses {
            return Err(Error::ZeroCrossing {
                what: "H".into(),
                x: fine[i],
            });
        }
    }
    for &x in &fine {
        let mv = m.eval(x)?;
        if !(mv > 0.0) {
            return Err(Error::InvalidInput(format!(
                "M must be positive; M({x}) = {mv}"
            )));
        }
    }
    let dm = m.deriv(1);
    let dh = h.deriv(1);
    let q = 2.0 * &m / &h;
    let p = 2.0 * &m * &dh / h.powi(2) - &dm / &h;
    let w = -(&h * &dm) / (2.0 * &m) + &dh;
    let v = -(&m * h.deriv(2)) / &h;
    let mut fam = BurgersFamily {
        m,
        h,
        q,
        p,
        w,
        v,
        compat_norm: 0.0,
        domain,
    };
    let mut worst: f64 = 0.0;
    for x in linspace(domain.0, domain.1, COMPAT_POINTS) {
        let d = compat_defect(&fam, x)?;
        worst = if d.is_finite() {
            worst.max(d.abs())
        } else {
            f64::INFINITY
        };
    }
    fam.compat_norm = worst;
    Ok(fam)
}

impl BurgersFamily {
    pub fn accept(self) -> Result<Self> {
        if self.compat_norm <= COMPAT_TOL {
            Ok(self)
        } else {
            Err(Error::Validation {
                what: "compatibility between M and H".into(),
                norm: self.compat_norm,
                tol: COMPAT_TOL,
            })
        }
    }

    pub fn pde(&self) -> BurgersPde {
        BurgersPde {
            m: self.m.clone(),
            h: self.h.clone(),
            v: self.v.clone(),
            w: self.w.clone(),
        }
    }
}

fn param(params: &Bindings, name: &str, default: f64) -> f64 {
    params.get(name).unwrap_or(default)
}

/// The admissible families. Parameters (defaults in brackets):
/// `rationalH` a [1], b [3], A [1]; `cosH` B [1], omega [1], beta0 [0], A [1];
/// `expH` C [2], alpha [1], A [1]; `quadraticM` a1 [1], b1 [2].
pub fn burgers_families(
    kind: FamilyKind,
    params: &Bindings,
    domain: (f64, f64),
) -> Result<BurgersFamily> {
    check_domain(domain)?;
    let x = Expr::var();
    let (m, h) = match kind {
        FamilyKind::RationalH => {
            let (a, b, big_a) = (
                param(params, "a", 1.0),
                param(params, "b", 3.0),
                param(params, "A", 1.0),
            );
            (Expr::constant(big_a), 1.0 / (a * &x + b))
        }
        FamilyKind::CosH => {
            let (b, om, b0, big_a) = (
                param(params, "B", 1.0),
                param(params, "omega", 1.0),
                param(params, "beta0", 0.0),
                param(params, "A", 1.0),
            );
            if om == 0.0 || b == 0.0 {
                return Err(Error::InvalidInput(
                    "cosH needs B != 0 and omega != 0".into(),
                ));
            }
            // keep 0.1/ω away from the zeros of cos(ωx + β₀)
            let margin = 0.1 / om.abs();
            let (lo, hi) = {
                let (s0, s1) = (om * domain.0 + b0, om * domain.1 + b0);
                (s0.min(s1), s0.max(s1))
            };
            let half_pi = std::f64::consts::FRAC_PI_2;
            let pi = std::f64::consts::PI;
            let first = ((lo - om.abs() * margin - half_pi) / pi).ceil();
            let z = half_pi + first * pi;
            if z <= hi + om.abs() * margin {
                return Err(Error::InvalidInput(format!(
                    "cos(omega*x + beta0) vanishes within {margin} of the domain at x = {}",
                    (z - b0) / om
                )));
            }
            (Expr::constant(big_a), b / (om * &x + b0).cos())
        }
        FamilyKind::ExpH => {
            let (c, al, big_a) = (
                param(params, "C", 2.0),
                param(params, "alpha", 1.0),
                param(params, "A", 1.0),
            );
            (Expr::constant(big_a), c * (al * &x).exp())
        }
        FamilyKind::QuadraticM => {
            let (a1, b1) = (param(params, "a1", 1.0), param(params, "b1", 2.0));
            ((a1 * &x + b1).powi(2), Expr::constant(1.0))
        }
    };
    if let Some(a) = m.as_constant() {
        if !(a > 0.0) {
            return Err(Error::InvalidInput(format!("A must be positive, got {a}")));
        }
    }
    burgers_derive(m, h, domain)?.accept()
}

#[derive(Debug, Clone)]
pub struct BurgersSolution {
    pub psi: SpaceTimeField,
    pub phi: SpaceTimeField,
    pub report: ResidualReport,
}

/// Solves the heat problem from `φ0 > 0`, maps to `ψ` and evaluates the
/// Burgers residual on interior points (three cells in from each edge,
/// first and last time levels excluded): `ψ_t` by central time differences,
/// spatial derivatives from analytic `P, Q` and differenced `φ`.
///
/// Without explicit boundary conditions both ends are Robin with
/// `ρ ≈ φ0'/φ0`, which holds `ψ` near its initial edge values.
pub fn burgers_solve(
    fam: &BurgersFamily,
    phi0: &Expr,
    t_end: f64,
    nx: usize,
    nt: usize,
    bc: Option<(Boundary, Boundary)>,
    threshold: f64,
) -> Result<BurgersSolution> {
    let (a, b) = fam.domain;
    let x = linspace(a, b, nx.max(2));
    for &xi in &x {
        let v = phi0.eval(xi)?;
        if !(v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "phi0 must be positive; phi0({xi}) = {v}"
            )));
        }
    }
    let (left, right) = match bc {
        Some(lr) => lr,
        None => {
            // ρ from the same one-sided differences the heat solver imposes,
            // so the sampled φ0 already satisfies the discrete condition
            let h = (b - a) / (nx - 1) as f64;
            let f = |xi: f64| phi0.eval(xi);
            let (l0, l1, l2) = (f(a)?, f(a + h)?, f(a + 2.0 * h)?);
            let (r0, r1, r2) = (f(b)?, f(b - h)?, f(b - 2.0 * h)?);
            (
                Boundary::Robin((-3.0 * l0 + 4.0 * l1 - l2) / (2.0 * h * l0)),
                Boundary::Robin((3.0 * r0 - 4.0 * r1 + r2) / (2.0 * h * r0)),
            )
        }
    };
    let spec = HeatSpec {
        m: fam.m.clone(),
        left,
        right,
    };
    let heat = solve_heat(&spec, fam.domain, phi0, t_end, nx, nt)?;
    let h = (b - a) / (nx - 1) as f64;
    let dt = t_end / nt as f64;

    let pj: Vec<[f64; 3]> = x
        .iter()
        .map(|&xi| fam.p.derivs(xi, 2).map(|d| [d[0], d[1], d[2]]))
        .collect::<std::result::Result<_, _>>()?;
    let qj: Vec<[f64; 3]> = x
        .iter()
        .map(|&xi| fam.q.derivs(xi, 2).map(|d| [d[0], d[1], d[2]]))
        .collect::<std::result::Result<_, _>>()?;

    let levels = heat.phi.values.len();
    let mut psi = Vec::with_capacity(levels);
    let mut flags = Vec::with_capacity(levels);
    let mut masked = 0usize;
    for (phi, phx) in heat.phi.values.iter().zip(&heat.phi_x.values) {
        let mask = PoleMask::detect(&x, phi, Some(phx));
        let row: Vec<f64> = (0..nx)
            .map(|i| {
                if mask.is_masked(i) {
                    f64::NAN
                } else {
                    pj[i][0] + qj[i][0] * phx[i] / phi[i]
                }
            })
            .collect();
        masked += mask.flags().iter().filter(|&&f| f).count();
        flags.push(mask.flags().to_vec());
        psi.push(row);
    }
    let fraction = masked as f64 / (levels * nx) as f64;
    if fraction >= 1.0 {
        return Err(Error::EntirelySingular);
    }
    if fraction > MAX_MASKED {
        return Err(Error::MostlySingular { fraction });
    }

    let coef: Vec<[f64; 4]> = x
        .iter()
        .map(|&xi| fam.pde().coeffs(xi))
        .collect::<Result<_>>()?;
    // spatial side Mψ_xx + Hψψ_x + Vψ + Wψ² on every level
    let inner = 3..nx.saturating_sub(3);
    let mut spatial = Vec::with_capacity(levels);
    for n in 0..levels {
        let phi = &heat.phi.values[n];
        let phx = &heat.phi_x.values[n];
        let row: Vec<f64> = inner
            .clone()
            .map(|i| {
                if flags[n][i - 3..=i + 3].iter().any(|&f| f) {
                    return f64::NAN;
                }
                let r = phx[i] / phi[i];
                let f2 = d2_centered(phi, i, h) / phi[i];
                let f3 = d3_centered(phi, i, h) / phi[i];
                let r_x = f2 - r * r;
                let r_xx = f3 - 3.0 * r * f2 + 2.0 * r.powi(3);
                let [_, p1, p2] = pj[i];
                let [q0, q1, q2] = qj[i];
                let ps_x = p1 + q1 * r + q0 * r_x;
                let ps_xx = p2 + q2 * r + 2.0 * q1 * r_x + q0 * r_xx;
                -BurgersPde::residual(coef[i], psi[n][i], 0.0, ps_x, ps_xx)
            })
            .collect();
        spatial.push(row);
    }
    // ψ_t by central differences; the spatial side is averaged over the same
    // three levels (¼, ½, ¼) so the sign-alternating CN mode cancels in both
    let mut rx = Vec::new();
    let mut res = Vec::new();
    let mut rmask = Vec::new();
    for n in 1..levels - 1 {
        for (k, i) in inner.clone().enumerate() {
            rx.push(x[i]);
            let s = 0.25 * spatial[n - 1][k] + 0.5 * spatial[n][k] + 0.25 * spatial[n + 1][k];
            rmask.push(!s.is_finite());
            let ps_t = (psi[n + 1][i] - psi[n - 1][i]) / (2.0 * dt);
            res.push(ps_t - s);
        }
    }
    let mut report = ResidualReport::from_pointwise("burgers", rx, res, &rmask, threshold);
    report.mask_fraction = fraction;
    let psi = SpaceTimeField {
        x: x.clone(),
        t: heat.phi.t.clone(),
        values: psi,
    };
    Ok(BurgersSolution {
        psi,
        phi: heat.phi,
        report,
    })
}

/// L∞ difference at the final time between the transformed solution and a
/// direct method-of-lines integration started from its initial profile and
/// driven by its edge values.
pub fn burgers_mol_check(fam: &BurgersFamily, sol: &BurgersSolution, tol: f64) -> Result<f64> {
    let f = &sol.psi;
    if f.values
        .iter()
        .any(|r| !r[0].is_finite() || !r[r.len() - 1].is_finite())
    {
        return Err(Error::Numerical(
            "transformed solution is singular at an edge".into(),
        ));
    }
    let t_end = *f.t.last().unwrap();
    let mol = integrate_pde_mol(
        &fam.pde(),
        &f.x,
        &f.values[0],
        &[0.0, t_end],
        &BoundaryTrace::from_field(f),
        tol,
    )?;
    let mut worst: f64 = 0.0;
    for (a, b) in mol.last().iter().zip(f.last()) {
        if b.is_finite() {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// `ψ_x` of the last level by differences, handy for reports.
pub fn last_gradient(sol: &BurgersSolution) -> Vec<f64> {
    let x = &sol.psi.x;
    d1_uniform(sol.psi.last(), x[1] - x[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn e(t: &str) -> Expr {
        parse_expr(t, &[]).unwrap()
    }

    #[test]
    fn exp_family_coefficients() {
        let fam = burgers_derive(e("1"), e("2*exp(x)"), (0.0, 1.0)).unwrap();
        for x in [0.0, 0.4, 1.0] {
            let ex = f64::exp(-x);
            assert!((fam.q.eval(x).unwrap() - ex).abs() < 1e-15);
            assert!((fam.p.eval(x).unwrap() - ex).abs() < 1e-15);
            assert!((fam.w.eval(x).unwrap() - 2.0 / ex).abs() < 1e-13);
            assert!((fam.v.eval(x).unwrap() + 1.0).abs() < 1e-15);
        }
        assert!(fam.compat_norm <= 1e-12);
    }

    #[test]
    fn classical_and_rejected() {
        let fam = burgers_derive(e("1"), e("1"), (0.0, 1.0)).unwrap();
        assert_eq!(fam.compat_norm, 0.0);
        assert_eq!(fam.q.eval(0.5).unwrap(), 2.0);
        assert_eq!(fam.p.eval(0.5).unwrap(), 0.0);
        let bad = burgers_derive(e("1"), e("x^2"), (1.0, 2.0)).unwrap();
        assert!(bad.compat_norm > 1.0);
        assert!(matches!(bad.accept(), Err(Error::Validation { .. })));
        assert!(
            (compat_defect(&burgers_derive(e("1"), e("x^2"), (1.0, 2.0)).unwrap(), 1.0).unwrap()
                + 24.0)
                .abs()
                < 1e-12
        );
        assert!(matches!(
            burgers_derive(e("1"), e("x"), (-1.0, 1.0)),
            Err(Error::ZeroCrossing { .. })
        ));
        assert!(matches!(
            burgers_derive(e("x"), e("1"), (-1.0, 1.0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn families_are_compatible() {
        let b = Bindings::new();
        for k in [
            FamilyKind::RationalH,
            FamilyKind::CosH,
            FamilyKind::ExpH,
            FamilyKind::QuadraticM,
        ] {
            let fam = burgers_families(k, &b, (0.0, 1.0)).unwrap();
            assert!(fam.compat_norm <= 1e-10, "{k:?}: {}", fam.compat_norm);
            if fam.m.as_constant().is_some() {
                for x in linspace(0.0, 1.0, 7) {
                    assert!(constant_m_condition(&fam.h, x).unwrap().abs() <= 1e-10);
                }
            }
        }
        let near = Bindings::from_pairs(&[("omega", 1.0), ("beta0", 0.5)]);
        assert!(burgers_families(FamilyKind::CosH, &near, (0.0, 1.1)).is_err());
        assert!(burgers_families(
            FamilyKind::ExpH,
            &Bindings::from_pairs(&[("A", -1.0)]),
            (0.0, 1.0)
        )
        .is_err());
    }

    #[test]
    fn translation_invariance() {
        let b = Bindings::new();
        let a = burgers_families(FamilyKind::ExpH, &b, (0.0, 1.0)).unwrap();
        let s = burgers_families(FamilyKind::ExpH, &b, (0.7, 1.7)).unwrap();
        assert!((a.compat_norm - s.compat_norm).abs() <= 1e-12);
    }

    #[test]
    fn steady_exp_solution() {
        let fam = burgers_families(FamilyKind::ExpH, &Bindings::new(), (0.0, 1.0)).unwrap();
        let sol = burgers_solve(&fam, &e("exp(x)"), 0.5, 200, 200, None, 1e-6).unwrap();
        assert!(sol.report.pass, "{}", sol.report.linf);
        for (x, v) in sol.psi.x.iter().zip(sol.psi.last()) {
            // edge values carry the O(h²) of the one-sided Robin ρ
            assert!(
                (v - 2.0 * f64::exp(-x)).abs() < 2e-5,
                "{x} {}",
                v - 2.0 * f64::exp(-x)
            );
        }
    }

    #[test]
    fn classical_cole_hopf() {
        let fam = burgers_derive(e("1"), e("1"), (0.0, 1.0))
            .unwrap()
            .accept()
            .unwrap();
        let bc = (
            Boundary::Dirichlet(crate::lincore::parse_boundary_expr("1 + exp(t)").unwrap()),
            Boundary::Dirichlet(crate::lincore::parse_boundary_expr("1 + exp(t - 1)").unwrap()),
        );
        let sol = burgers_solve(&fam, &e("1 + exp(-x)"), 0.5, 200, 200, Some(bc), 1e-5).unwrap();
        let t = 0.5f64;
        for (x, v) in sol.psi.x.iter().zip(sol.psi.last()) {
            let z = (t - x).exp();
            assert!((v + 2.0 * z / (1.0 + z)).abs() < 1e-5);
        }
        assert!(sol.report.pass, "{}", sol.report.linf);
        let d = burgers_mol_check(&fam, &sol, 1e-9).unwrap();
        assert!(d <= 1e-3, "{d}");
    }

    #[test]
    fn rejects_nonpositive_phi0() {
        let fam = burgers_derive(e("1"), e("1"), (0.0, 1.0)).unwrap();
        assert!(burgers_solve(&fam, &e("x - 0.5"), 0.1, 50, 50, None, 1e-5).is_err());
    }
}
