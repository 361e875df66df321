//! The generalized Cole–Hopf map `ψ = P + Q φ'/φ`: forward transform of
//! sampled `φ`, initial-condition matching, and masking of the poles that
//! zeros of `φ` create.
//!
//! Derivatives of `ψ` are obtained from the linear equation, never by
//! differencing: with `r = φ'/φ` and `φ'' = Kφ' + Uφ`,
//! `r' = U + K r − r²` and `r'' = U' + K' r + K r' − 2 r r'`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Jet};
use crate::grid::{hermite, GridFunction};
use crate::lincore::{solve_linear_ode, LinearKind, LinearSpec, Ode2Spec};
use crate::oracle::Equation;

/// Relative threshold below which `|φ|` counts as a zero.
pub const POLE_THRESHOLD: f64 = 1e-8;
/// Mask half-width in grid steps.
pub const MASK_STEPS: f64 = 2.0;

/// Regions excluded from residual norms because `φ` vanishes there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleMask {
    pub half_width: f64,
    /// Located zeros of `φ`.
    pub zeros: Vec<f64>,
    /// Sorted, disjoint open intervals around the zeros.
    pub intervals: Vec<(f64, f64)>,
    #[serde(skip)]
    masked: Vec<bool>,
}

impl PoleMask {
    /// Empty mask over `n` points.
    pub fn none(n: usize) -> Self {
        PoleMask {
            half_width: 0.0,
            zeros: Vec::new(),
            intervals: Vec::new(),
            masked: vec![false; n],
        }
    }

    /// Locates zeros of sampled `φ` (sign changes refined by bisection on
    /// the cubic Hermite interpolant to 1e-10, plus near-zeros below the
    /// threshold) and masks points within two grid steps of each.
    pub fn detect(x: &[f64], phi: &[f64], dphi: Option<&[f64]>) -> Self {
        let n = x.len();
        let scale = phi
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let thr = POLE_THRESHOLD * scale;
        let step = x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let hw = MASK_STEPS * step;
        let slopes: Vec<f64> = match dphi {
            Some(d) => d.to_vec(),
            None => finite_slopes(x, phi),
        };

        let mut zeros = Vec::new();
        for i in 0..n {
            let v = phi[i];
            if !v.is_finite() {
                continue;
            }
            if v == 0.0 {
                zeros.push(x[i]);
                continue;
            }
            if v.abs() < thr {
                let left_ok = i == 0 || phi[i - 1].abs() >= v.abs();
                let right_ok = i + 1 == n || phi[i + 1].abs() > v.abs();
                if left_ok && right_ok {
                    zeros.push(x[i]);
                }
            }
            if i + 1 < n
                && phi[i + 1].is_finite()
                && phi[i + 1] != 0.0
                && v.signum() != phi[i + 1].signum()
            {
                zeros.push(bisect(
                    x[i],
                    x[i + 1],
                    (v, phi[i + 1]),
                    (slopes[i], slopes[i + 1]),
                ));
            }
        }
        zeros.sort_by(f64::total_cmp);
        zeros.dedup_by(|a, b| (*a - *b).abs() < 1e-10);

        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for &z in &zeros {
            let (lo, hi) = (z - hw, z + hw);
            match intervals.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => intervals.push((lo, hi)),
            }
        }
        let masked = (0..n)
            .map(|i| {
                !phi[i].is_finite()
                    || phi[i].abs() < thr
                    || intervals.iter().any(|&(lo, hi)| x[i] > lo && x[i] < hi)
            })
            .collect();
        PoleMask {
            half_width: hw,
            zeros,
            intervals,
            masked,
        }
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.masked[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.masked
    }

    pub fn masked_indices(&self) -> Vec<usize> {
        (0..self.masked.len()).filter(|&i| self.masked[i]).collect()
    }

    pub fn fraction(&self) -> f64 {
        if self.masked.is_empty() {
            return 0.0;
        }
        self.masked.iter().filter(|&&m| m).count() as f64 / self.masked.len() as f64
    }

    /// Also masks point `i` (e.g. where the target equation itself is
    /// singular).
    pub fn mask_point(&mut self, i: usize) {
        self.masked[i] = true;
    }
}

fn finite_slopes(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            if a == b {
                0.0
            } else {
                (f[b] - f[a]) / (x[b] - x[a])
            }
        })
        .collect()
}

fn bisect(x0: f64, x1: f64, f: (f64, f64), d: (f64, f64)) -> f64 {
    let (mut a, mut b) = (x0, x1);
    let mut fa = f.0;
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        let fm = hermite(x0, x1, f, d, m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `ψ` samples (NaN at masked points) with their mask.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub psi: Vec<f64>,
    pub mask: PoleMask,
}

/// `ψ_i = P(x_i) + Q(x_i) φ'_i/φ_i` at unmasked points.
pub fn apply_transform(
    p: &Expr,
    q: &Expr,
    x: &[f64],
    phi: &[f64],
    dphi: &[f64],
) -> Result<Transformed> {
    check_samples(x, phi, dphi)?;
    let mask = PoleMask::detect(x, phi, Some(dphi));
    if mask.fraction() == 1.0 {
        return Err(Error::EntirelySingular);
    }
    let mut psi = vec![f64::NAN; x.len()];
    for i in 0..x.len() {
        if !mask.is_masked(i) {
            psi[i] = p.eval(x[i])? + q.eval(x[i])? * dphi[i] / phi[i];
        }
    }
    Ok(Transformed { psi, mask })
}

fn check_samples(x: &[f64], phi: &[f64], dphi: &[f64]) -> Result<()> {
    if phi.len() != x.len() || dphi.len() != x.len() {
        return Err(Error::InvalidInput(
            "phi samples do not match the grid".into(),
        ));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "grid must be strictly increasing".into(),
        ));
    }
    if phi.iter().chain(dphi).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("phi samples must be finite".into()));
    }
    Ok(())
}

/// `(ψ, ψ', ψ'')` at one point from jets of `P`, `Q` (order 2), `U`, `K`
/// (order 1) and `r = φ'/φ`.
pub fn psi_derivatives(p: &Jet, q: &Jet, u: &Jet, k: Option<&Jet>, r: f64) -> [f64; 3] {
    let (k0, k1) = k.map_or((0.0, 0.0), |k| (k.d(0), k.d(1)));
    let r1 = u.d(0) + k0 * r - r * r;
    let r2 = u.d(1) + k1 * r + k0 * r1 - 2.0 * r * r1;
    [
        p.d(0) + q.d(0) * r,
        p.d(1) + q.d(1) * r + q.d(0) * r1,
        p.d(2) + q.d(2) * r + 2.0 * q.d(1) * r1 + q.d(0) * r2,
    ]
}

/// Transform with analytic derivatives; rows `psi`, `dpsi`, `ddpsi` (NaN at
/// masked points).
pub fn transform_with_derivatives(
    p: &Expr,
    q: &Expr,
    linear: &Ode2Spec,
    x: &[f64],
    phi: &[f64],
    dphi: &[f64],
) -> Result<(GridFunction, PoleMask)> {
    check_samples(x, phi, dphi)?;
    let mask = PoleMask::detect(x, phi, Some(dphi));
    if mask.fraction() == 1.0 {
        return Err(Error::EntirelySingular);
    }
    let b = Bindings::new();
    let n = x.len();
    let mut rows = [vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]];
    for i in 0..n {
        if mask.is_masked(i) {
            continue;
        }
        let pj = p.jet(x[i], 2, &b)?;
        let qj = q.jet(x[i], 2, &b)?;
        let uj = linear.u.jet(x[i], 1, &b)?;
        let kj = match &linear.k {
            Some(k) => Some(k.jet(x[i], 1, &b)?),
            None => None,
        };
        let d = psi_derivatives(&pj, &qj, &uj, kj.as_ref(), dphi[i] / phi[i]);
        for k in 0..3 {
            rows[k][i] = d[k];
        }
    }
    let [a, bb, c] = rows;
    let gf = GridFunction::new(x.to_vec())?
        .with_row("psi", a)?
        .with_row("dpsi", bb)?
        .with_row("ddpsi", c)?;
    Ok((gf, mask))
}

/// `(ψ, ψ')` at `x0` implied by `(φ, φ')(x0)`.
pub fn ic_from_phi(
    p: &Expr,
    q: &Expr,
    phi0: f64,
    dphi0: f64,
    linear: &Ode2Spec,
    x0: f64,
) -> Result<(f64, f64)> {
    if phi0 == 0.0 {
        return Err(Error::PoleAtAnchor { x: x0 });
    }
    let b = Bindings::new();
    let pj = p.jet(x0, 1, &b)?;
    let qj = q.jet(x0, 1, &b)?;
    let (u, k) = linear.coeffs(x0)?;
    let r = dphi0 / phi0;
    Ok((
        pj.d(0) + qj.d(0) * r,
        pj.d(1) + qj.d(1) * r + qj.d(0) * (u + k * r - r * r),
    ))
}

/// Everything a family module hands to the solvers.
#[derive(Debug, Clone)]
pub struct LinearizationPair {
    pub p: Expr,
    pub q: Expr,
    pub linear: LinearSpec,
    pub nonlinear: Equation,
}

/// Solution of a pair: `φ` samples, transformed `ψ` with derivatives.
#[derive(Debug, Clone)]
pub struct PairSolution {
    pub phi: GridFunction,
    pub psi: GridFunction,
    pub mask: PoleMask,
}

impl LinearizationPair {
    pub fn ode2(&self) -> Result<&Ode2Spec> {
        match &self.linear.kind {
            LinearKind::Ode2(s) => Ok(s),
            LinearKind::Heat(_) => Err(Error::InvalidInput("pair is not an ODE pair".into())),
        }
    }

    /// Solves the linear ODE from `(φ, φ')(x0)` on `n` points of the domain
    /// and transforms.
    pub fn solve(&self, phi_ic: (f64, f64), x0: f64, n: usize) -> Result<PairSolution> {
        let spec = self.ode2()?;
        let grid = self.linear.grid(n);
        let phi = solve_linear_ode(spec, phi_ic, x0, &grid)?;
        let (psi, mask) =
            transform_with_derivatives(&self.p, &self.q, spec, &grid, phi.row(0), phi.row(1))?;
        Ok(PairSolution { phi, psi, mask })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::grid::linspace;

    fn c(v: f64) -> Expr {
        Expr::constant(v)
    }

    #[test]
    fn constant_solution_from_exponential() {
        let x = linspace(0.0, 1.0, 11);
        let phi: Vec<f64> = x.iter().map(|v| (v / 2.0).exp()).collect();
        let dphi: Vec<f64> = phi.iter().map(|v| v / 2.0).collect();
        let t = apply_transform(&c(0.5), &c(1.0), &x, &phi, &dphi).unwrap();
        assert!(t.psi.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert_eq!(t.mask.fraction(), 0.0);
    }

    #[test]
    fn tanh_from_cosh() {
        let x = linspace(-2.0, 2.0, 41);
        let phi: Vec<f64> = x.iter().map(|v| v.cosh()).collect();
        let dphi: Vec<f64> = x.iter().map(|v| v.sinh()).collect();
        let t = apply_transform(&c(0.0), &c(1.0), &x, &phi, &dphi).unwrap();
        for (xi, p) in x.iter().zip(&t.psi) {
            assert!((p - xi.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_pole_is_masked() {
        let x = linspace(2.0, 4.0, 201);
        let phi: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let dphi: Vec<f64> = x.iter().map(|v| v.cos()).collect();
        let t = apply_transform(&c(0.0), &c(1.0), &x, &phi, &dphi).unwrap();
        assert_eq!(t.mask.zeros.len(), 1);
        assert!((t.mask.zeros[0] - std::f64::consts::PI).abs() < 1e-9);
        for (i, xi) in x.iter().enumerate() {
            let near = (xi - std::f64::consts::PI).abs() < 0.02 - 1e-12;
            assert_eq!(t.mask.is_masked(i), near, "x = {xi}");
            assert_eq!(t.psi[i].is_nan(), near);
        }
    }

    #[test]
    fn entirely_singular() {
        let x = [0.0, 1.0];
        let r = apply_transform(&c(0.0), &c(1.0), &x, &[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::EntirelySingular)));
    }

    #[test]
    fn initial_conditions() {
        let spec = Ode2Spec::new(c(0.25));
        assert_eq!(
            ic_from_phi(&c(0.5), &c(1.0), 1.0, 0.5, &spec, 0.0).unwrap(),
            (1.0, 0.0)
        );
        let spec = Ode2Spec::new(c(1.0));
        assert_eq!(
            ic_from_phi(&c(0.0), &c(1.0), 1.0, 0.0, &spec, 0.0).unwrap(),
            (0.0, 1.0)
        );
        assert!(matches!(
            ic_from_phi(&c(0.0), &c(1.0), 0.0, 1.0, &spec, 0.0),
            Err(Error::PoleAtAnchor { .. })
        ));
    }

    #[test]
    fn near_zero_without_sign_change() {
        let x = linspace(-1.0, 1.0, 201);
        let phi: Vec<f64> = x.iter().map(|v| v * v + 1e-12).collect();
        let m = PoleMask::detect(&x, &phi, None);
        assert_eq!(m.zeros.len(), 1);
        assert!(m.zeros[0].abs() < 1e-12);
        assert!(m.is_masked(100));
        assert!(!m.is_masked(0));
    }

    #[test]
    fn derivatives_follow_the_linear_equation() {
        // phi = cosh x solves phi'' = phi: psi = tanh, psi' = sech^2
        let x = linspace(-1.0, 1.0, 5);
        let phi: Vec<f64> = x.iter().map(|v| v.cosh()).collect();
        let dphi: Vec<f64> = x.iter().map(|v| v.sinh()).collect();
        let spec = Ode2Spec::new(c(1.0));
        let (g, _) = transform_with_derivatives(&c(0.0), &c(1.0), &spec, &x, &phi, &dphi).unwrap();
        for (i, v) in x.iter().enumerate() {
            let s2 = 1.0 / v.cosh().powi(2);
            assert!((g.row(1)[i] - s2).abs() < 1e-15);
            assert!((g.row(2)[i] + 2.0 * v.tanh() * s2).abs() < 1e-14);
        }
        let p = parse_expr("x^2", &[]).unwrap();
        let q = parse_expr("2 + x", &[]).unwrap();
        let k = parse_expr("sin(x)", &[]).unwrap();
        let spec = Ode2Spec::with_k(parse_expr("1 + x", &[]).unwrap(), k);
        let (psi, dpsi) = ic_from_phi(&p, &q, 2.0, 1.0, &spec, 0.3).unwrap();
        let b = Bindings::new();
        let d = psi_derivatives(
            &p.jet(0.3, 2, &b).unwrap(),
            &q.jet(0.3, 2, &b).unwrap(),
            &spec.u.jet(0.3, 1, &b).unwrap(),
            Some(&spec.k.as_ref().unwrap().jet(0.3, 1, &b).unwrap()),
            0.5,
        );
        assert_eq!((d[0], d[1]), (psi, dpsi));
    }
}
