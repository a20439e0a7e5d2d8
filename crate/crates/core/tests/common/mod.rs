//! Independent reference integrators used to validate the closed-form kernel
//! and the tanh moment quadrature. These deliberately avoid the crate's own
//! quadrature machinery: the ReLU oracle is a composite Simpson rule over the
//! positive quadrant with the explicit bivariate normal density, the tanh
//! oracle a dense trapezoid rule over the whole plane.

#![allow(dead_code)]

/// `E[relu(z1) relu(z2)]` for standard normal z1, z2 with correlation `rho`,
/// by composite Simpson integration of `z1 z2 N_rho(z1, z2)` over the
/// positive quadrant (where the integrand is smooth).
pub fn relu_cross_moment_oracle(rho: f64) -> f64 {
    if rho <= -1.0 {
        return 0.0;
    }
    if rho >= 1.0 {
        // Degenerate limit: E[z^2 1_{z>0}] by 1-D Simpson.
        return simpson_1d(0.0, 13.0, 5200, |z| {
            z * z * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        });
    }
    let det = 1.0 - rho * rho;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let r = 13.0;
    let n = 5200;
    // Simpson in z1 of (Simpson in z2 of z1 z2 N(z1, z2)).
    simpson_1d(0.0, r, n, |z1| {
        let inner = simpson_1d(0.0, r, n, |z2| {
            let quad = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (2.0 * det);
            if quad > 700.0 {
                0.0
            } else {
                z2 * (-quad).exp()
            }
        });
        z1 * norm * inner
    })
}

fn simpson_1d(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    // n must be even; one extra subinterval is harmless.
    let n = n + (n % 2);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * k as f64);
    }
    sum * h / 3.0
}

/// (second moment, cross moment) of `tanh(s z)` under standard normals with
/// correlation `rho`, by dense trapezoid sums. The Gaussian decay makes the
/// trapezoid rule spectrally accurate on a truncated range.
pub fn tanh_moments_trapezoid(s: f64, rho: f64) -> (f64, f64) {
    let r = 14.0;
    let n_1d = 1_000_000usize;
    let second = trapezoid_1d(-r, r, n_1d, |z| {
        let t = (s * z).tanh();
        t * t * (-0.5 * z * z).exp()
    }) / (2.0 * std::f64::consts::PI).sqrt();

    let cross = if rho >= 1.0 {
        second
    } else if rho <= -1.0 {
        -second
    } else {
        let det = 1.0 - rho * rho;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
        let n = 2800usize;
        let h = 2.0 * r / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let z1 = -r + h * i as f64;
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            let t1 = (s * z1).tanh();
            let mut inner = 0.0;
            for j in 0..=n {
                let z2 = -r + h * j as f64;
                let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
                let quad = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (2.0 * det);
                if quad < 700.0 {
                    inner += wj * (s * z2).tanh() * (-quad).exp();
                }
            }
            sum += wi * t1 * inner;
        }
        sum * h * h * norm
    };
    (second, cross)
}

fn trapezoid_1d(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for k in 1..n {
        sum += f(a + h * k as f64);
    }
    sum * h
}
