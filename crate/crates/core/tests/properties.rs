use proptest::prelude::*;

use colehopf::burgers::{burgers_families, constant_m_condition, FamilyKind};
use colehopf::colehopf::{apply_transform, ic_from_phi, transform_with_derivatives};
use colehopf::convective::{conv_forward, conv_reverse};
use colehopf::expr::{parse_expr, Bindings, Expr};
use colehopf::grid::linspace;
use colehopf::lienard::lienard_b;
use colehopf::lincore::{solve_linear_ode, Ode2Spec};
use colehopf::oracle::{integrate_ode, residual_report};
use colehopf::painleve3::p3_linearize;
use colehopf::vdp::{vdp_coeffs, vdp_residuals, VdpParams};

/// Smooth expression text in `x`, bounded on [−1, 1].
fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("x^2".to_string()),
        (-2.0f64..2.0).prop_map(|c| format!("({c})")),
        (-2.0f64..2.0).prop_map(|c| format!("({c}*x)")),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(2 + ({b})^2)")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("exp(({a})/2)")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.prop_map(|a| format!("ln(2 + cos({a}))")),
        ]
    })
}

fn e(t: &str) -> Expr {
    parse_expr(t, &[]).unwrap()
}

fn poly(c: &[f64]) -> Expr {
    let text: Vec<String> = c.iter().enumerate().map(|(k, v)| format!("({v})*x^{k}")).collect();
    e(&text.join(" + "))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jets_match_central_differences(text in expr_text(), x in -1.0f64..1.0) {
        let ex = e(&text);
        let b = Bindings::new();
        let j = ex.jet(x, 2, &b).unwrap();
        let h = 1e-5;
        let d1 = (ex.eval(x + h).unwrap() - ex.eval(x - h).unwrap()) / (2.0 * h);
        let d2 = (ex.jet(x + h, 1, &b).unwrap().d(1) - ex.jet(x - h, 1, &b).unwrap().d(1)) / (2.0 * h);
        prop_assert!(rel(j.d(1), d1) <= 1e-6, "{} vs {}", j.d(1), d1);
        prop_assert!(rel(j.d(2), d2) <= 1e-6, "{} vs {}", j.d(2), d2);
    }

    #[test]
    fn jet_algebra(a in expr_text(), b in expr_text(), c in expr_text(), x in -1.0f64..1.0) {
        let (a, b, c) = (e(&a), e(&b), e(&c));
        let bind = Bindings::new();
        let pairs = [
            (&a + &b, &b + &a),
            (&a * &b, &b * &a),
            ((&a + &b) + &c, &a + (&b + &c)),
            ((&a * &b) * &c, &a * (&b * &c)),
        ];
        for (l, r) in pairs {
            let (jl, jr) = (l.jet(x, 4, &bind).unwrap(), r.jet(x, 4, &bind).unwrap());
            for k in 0..=4 {
                let scale = jl.d(k).abs().max(jr.d(k).abs()).max(1.0);
                prop_assert!((jl.d(k) - jr.d(k)).abs() <= 1e-14 * scale, "order {}: {} vs {}", k, jl.d(k), jr.d(k));
            }
        }
    }

    #[test]
    fn parse_print_parse(text in expr_text(), xs in prop::collection::vec(-1.0f64..1.0, 10)) {
        let a = e(&text);
        let printed = a.to_string();
        let b = parse_expr(&printed, &[]).unwrap();
        let bind = Bindings::new();
        for x in xs {
            let (ja, jb) = (a.jet(x, 2, &bind).unwrap(), b.jet(x, 2, &bind).unwrap());
            for k in 0..=2 {
                prop_assert!(rel(ja.d(k), jb.d(k)) <= 1e-14, "{} -> {}", text, printed);
            }
        }
    }

    #[test]
    fn log_derivative_ignores_scaling(c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], w in 0.5f64..2.0) {
        let x = linspace(0.0, 1.0, 41);
        let phi: Vec<f64> = x.iter().map(|v| (w * v).cosh() + 0.5).collect();
        let dphi: Vec<f64> = x.iter().map(|v| w * (w * v).sinh()).collect();
        let sphi: Vec<f64> = phi.iter().map(|v| c * v).collect();
        let sdphi: Vec<f64> = dphi.iter().map(|v| c * v).collect();
        let (p, q) = (e("sin(x)"), e("2 + x"));
        let a = apply_transform(&p, &q, &x, &phi, &dphi).unwrap();
        let b = apply_transform(&p, &q, &x, &sphi, &sdphi).unwrap();
        for (u, v) in a.psi.iter().zip(&b.psi) {
            prop_assert!((u - v).abs() <= 1e-14 * u.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vdp_construction(c in prop::collection::vec(-2.0f64..2.0, 4),
                        mu in -2.0f64..2.0, beta in -2.0f64..2.0, alpha in -2.0f64..2.0,
                        xs in prop::collection::vec(-1.0f64..1.0, 20)) {
        let sys = vdp_coeffs(poly(&c), VdpParams::new(mu, beta, alpha));
        for x in xs {
            for a in vdp_residuals(&sys, x).unwrap() {
                prop_assert!(a.abs() <= 1e-10, "{}", a);
            }
        }
    }

    #[test]
    fn vdp_oracle_matches_transform(c in prop::collection::vec(-1.0f64..1.0, 3), dphi0 in -0.5f64..0.5) {
        // φ'' = Uφ with U ≥ 1/4 on [0, 1] has no zero when φ(0) = 1, |φ'(0)| small
        let sys = vdp_coeffs(poly(&c), VdpParams::new(1.0, 3.0, 2.0));
        let spec = Ode2Spec::new(sys.u.clone());
        let mut ok = true;
        for x in linspace(0.0, 1.0, 21) {
            ok &= sys.u.eval(x).unwrap() >= 0.25;
        }
        prop_assume!(ok);
        let x = linspace(0.0, 1.0, 101);
        let phi = solve_linear_ode(&spec, (1.0, dphi0), 0.0, &x).unwrap();
        let (ph, dph) = (phi.row_by_name("phi").unwrap(), phi.row_by_name("dphi").unwrap());
        prop_assume!(ph.iter().all(|v| *v > 0.0));
        let one = Expr::constant(1.0);
        let (cand, _) = transform_with_derivatives(&sys.p, &one, &spec, &x, ph, dph).unwrap();
        let ic = ic_from_phi(&sys.p, &one, 1.0, dphi0, &spec, 0.0).unwrap();
        let direct = integrate_ode(&sys.equation(), ic, 0.0, &x, 1e-10).unwrap();
        prop_assert!(direct.is_complete());
        let psi = cand.row_by_name("psi").unwrap();
        let scale = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in psi.iter().zip(direct.solution.row_by_name("psi").unwrap()) {
            prop_assert!((a - b).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn lienard_transformed_solutions(c in prop::collection::vec(-1.0f64..1.0, 3),
                                     p in prop::collection::vec(-1.0f64..1.0, 3),
                                     u in prop::collection::vec(-0.5f64..0.5, 2),
                                     dphi0 in -0.5f64..0.5) {
        let cs = [Expr::constant(c[0]), Expr::constant(c[1]), Expr::constant(c[2])];
        let u = poly(&[2.0, u[0], u[1]]);
        let sys = lienard_b(cs, poly(&p), u.clone());
        let spec = Ode2Spec::new(u);
        let x = linspace(0.0, 1.0, 101);
        let phi = solve_linear_ode(&spec, (1.0, dphi0), 0.0, &x).unwrap();
        let (cand, mask) = transform_with_derivatives(
            &sys.p, &Expr::constant(1.0), &spec, &x,
            phi.row_by_name("phi").unwrap(), phi.row_by_name("dphi").unwrap()).unwrap();
        let r = residual_report(&sys.equation(), &cand, Some(&mask), 1e-8).unwrap();
        prop_assert!(r.pass && r.mask_fraction == 0.0, "{}", r.linf);
    }

    #[test]
    fn painleve_superposition_and_delta_gate(p in prop::collection::vec(-1.0f64..1.0, 4),
                                             c1 in 0.1f64..2.0, c2 in 0.1f64..2.0,
                                             eps in 1e-4f64..0.1) {
        let cfg = p3_linearize(-1.0, 1.0, 1.0, poly(&p), false).unwrap();
        let spec = cfg.linear();
        let x = linspace(0.5, 2.0, 151);
        for ic in [(c1, 0.0), (1.0, c2)] {
            let phi = solve_linear_ode(&spec, ic, 0.5, &x).unwrap();
            let (cand, mask) = transform_with_derivatives(
                &cfg.p, &Expr::constant(cfg.q), &spec, &x,
                phi.row_by_name("phi").unwrap(), phi.row_by_name("dphi").unwrap()).unwrap();
            let r = residual_report(&cfg.equation(), &cand, Some(&mask), 1e-8).unwrap();
            prop_assert!(r.pass, "{}", r.linf);
            let mut bad = cfg.clone();
            bad.delta += eps;
            let rb = residual_report(&bad.equation(), &cand, Some(&mask), 1e-8).unwrap();
            let psi = cand.row_by_name("psi").unwrap();
            let max_psi = psi.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
            let min_res = rb.residual.iter().filter(|v| v.is_finite())
                .fold(f64::INFINITY, |m, v| m.min(v.abs()));
            prop_assert!(min_res >= 0.5 * eps / max_psi, "{} < {}", min_res, 0.5 * eps / max_psi);
        }
    }

    #[test]
    fn burgers_compat_translation(shift in -2.0f64..2.0) {
        // alpha fixed at 1; the defect's roundoff grows like e^{-2 shift}
        let b = Bindings::new();
        let a = burgers_families(FamilyKind::ExpH, &b, (0.0, 1.0)).unwrap();
        let s = burgers_families(FamilyKind::ExpH, &b, (shift, shift + 1.0)).unwrap();
        prop_assert!((a.compat_norm - s.compat_norm).abs() <= 1e-12, "{} {}", a.compat_norm, s.compat_norm);
    }

    #[test]
    fn constant_m_condition_holds(x in 0.0f64..1.0) {
        for kind in [FamilyKind::RationalH, FamilyKind::CosH, FamilyKind::ExpH] {
            let fam = burgers_families(kind, &Bindings::new(), (0.0, 1.0)).unwrap();
            prop_assert!(constant_m_condition(&fam.h, x).unwrap().abs() <= 1e-10);
        }
        let fam = burgers_families(FamilyKind::QuadraticM, &Bindings::new(), (0.0, 1.0)).unwrap();
        let w = e("x + 2");
        prop_assert_eq!(w.eval(x).unwrap() * w.deriv(2).eval(x).unwrap(), 0.0);
        prop_assert!(fam.compat_norm <= 1e-10);
    }

    #[test]
    fn convective_round_trip(p in prop::collection::vec(-1.0f64..1.0, 3),
                             q in prop::collection::vec(-0.3f64..0.3, 2),
                             u in prop::collection::vec(-1.0f64..1.0, 2)) {
        let pe = poly(&p);
        let qe = poly(&[-2.0, q[0], q[1]]);
        let ue = poly(&u);
        let domain = (0.0, 1.0);
        let rev = conv_reverse(pe.clone(), qe.clone(), ue.clone(), domain).unwrap();
        prop_assert!(rev.constraint_norm <= 1e-8);
        let fwd = conv_forward(rev.f.clone(), rev.w.clone(), rev.v.clone(), rev.s.clone(),
                               ue.eval(0.0).unwrap(), 0.0, domain, 101).unwrap();
        for x in linspace(0.0, 1.0, 11) {
            prop_assert!((fwd.p.eval(x).unwrap() - pe.eval(x).unwrap()).abs() <= 1e-10);
            prop_assert!((fwd.q.eval(x).unwrap() - qe.eval(x).unwrap()).abs() <= 1e-10);
            prop_assert!((fwd.u.eval(x).unwrap().0 - ue.eval(x).unwrap()).abs() <= 1e-8);
        }
    }
}
