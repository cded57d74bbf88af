//! Numeric utilities: error functions and adaptive quadrature.
//!
//! The quadrature here backs the closed-form density checks; it has to be
//! more accurate than any Monte Carlo noise it is compared against, so the
//! default panel tolerance is 1e-10.

/// Error function.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x^2) * erfc(x)` for `x >= 0`,
/// stable for arguments where `exp(x^2)` alone would overflow.
#[allow(clippy::excessive_precision)]
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 4.0 {
        // exp(x^2) <= e^16, no overflow and erfc is far from underflow.
        (x * x).exp() * libm::erfc(x)
    } else {
        // Rational tail approximation in z = 1/x^2 (Cody-style).
        const P: [f64; 6] = [
            3.05326634961232344e-1,
            3.60344899949804439e-1,
            1.25781726111229246e-1,
            1.60837851487422766e-2,
            6.58749161529837803e-4,
            1.63153871373020978e-2,
        ];
        const Q: [f64; 5] = [
            2.56852019228982242e0,
            1.87295284992346047e0,
            5.27905102951428412e-1,
            6.05183413124413191e-2,
            2.33520497626869185e-3,
        ];
        let z = 1.0 / (x * x);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        // 1/sqrt(pi) = FRAC_2_SQRT_PI / 2
        (std::f64::consts::FRAC_2_SQRT_PI / 2.0 - r) / x
    }
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Integrate `f` over `[a, +inf)` by panel doubling: panels `[a, b]`,
/// `[b, 2b]`, ... are summed until two consecutive panels contribute less
/// than `tol / 50` each. Suitable for integrands with monotone-ish decay
/// (Gaussian or power-law tails alike).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    let panel_tol = tol / 50.0;
    let mut lo = a;
    let mut hi = if a.abs() < 1.0 { a + 1.0 } else { 2.0 * a.abs() };
    let mut total = 0.0;
    let mut small_streak = 0u32;
    for _ in 0..220 {
        let part = integrate(&f, lo, hi, panel_tol);
        total += part;
        if part.abs() < panel_tol {
            small_streak += 1;
            if small_streak >= 2 {
                break;
            }
        } else {
            small_streak = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    total
}
