//! Modified Bessel functions of integer order 0 and 1 for real positive
//! arguments.
//!
//! `I_0`, `I_1` use their power series (convergent for all z). `K_0`, `K_1`
//! use the logarithmic series for `z <= 2` and the integral representation
//! `K_n(z) = ∫_0^∞ exp(-z cosh t) cosh(n t) dt` with the trapezoidal rule
//! (spectrally accurate for this integrand) above that.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn series_i(n: u32, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = (0.5 * z).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..500 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

pub fn bessel_i0(z: f64) -> f64 {
    series_i(0, z)
}

pub fn bessel_i1(z: f64) -> f64 {
    series_i(1, z)
}

fn k_integral(n: u32, z: f64) -> f64 {
    let h = 0.05;
    let mut sum = 0.5 * (-z).exp();
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let term = (-z * t.cosh()).exp() * (n as f64 * t).cosh();
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * h
}

pub fn bessel_k0(z: f64) -> f64 {
    assert!(z > 0.0, "K0 requires z > 0");
    if z > 2.0 {
        return k_integral(0, z);
    }
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        harmonic += 1.0 / k as f64;
        sum += term * harmonic;
        if term * harmonic < 1e-17 * sum.abs() {
            break;
        }
    }
    -((0.5 * z).ln() + EULER_GAMMA) * bessel_i0(z) + sum
}

pub fn bessel_k1(z: f64) -> f64 {
    assert!(z > 0.0, "K1 requires z > 0");
    if z > 2.0 {
        return k_integral(1, z);
    }
    // digamma at positive integers: psi(m) = -gamma + H_{m-1}
    let q = 0.25 * z * z;
    let mut term = 1.0; // (z^2/4)^k / (k! (k+1)!)
    let mut psi_k1 = -EULER_GAMMA; // psi(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // psi(k+2)
    let mut sum = term * (psi_k1 + psi_k2);
    for k in 1..200 {
        term *= q / (k as f64 * (k + 1) as f64);
        psi_k1 += 1.0 / k as f64;
        psi_k2 += 1.0 / (k + 1) as f64;
        let t = term * (psi_k1 + psi_k2);
        sum += t;
        if t.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    1.0 / z + (0.5 * z).ln() * bessel_i1(z) - 0.25 * z * sum
}
