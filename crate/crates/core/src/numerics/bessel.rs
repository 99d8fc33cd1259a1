//! Bessel functions J0, J1 and Y0 for real arguments.
//!
//! Three regimes are used:
//!
//! * `|t| < 1`: the ascending power series, which converges in a handful of
//!   terms with no cancellation.
//! * `1 <= |t| <= 20`: Miller's backward recurrence, normalized with
//!   `J0 + 2 Σ J_2k = 1`. Y0 comes from the Neumann series over the same
//!   even-order values.
//! * `|t| > 20`: Hankel's asymptotic expansion. The smallest term of the
//!   divergent series is about `exp(-2t)`, well below double precision here.
//!
//! Accuracy is better than 1e-13 relative away from zeros for `|t| <= 1e4`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::NumericsError;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 1.0;
const ASYMPTOTIC_LIMIT: f64 = 20.0;

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(t: f64) -> f64 {
    let x = t.abs();
    if x < SERIES_LIMIT {
        j0_series(x)
    } else if x <= ASYMPTOTIC_LIMIT {
        miller(x).j0
    } else {
        j0_hankel(x)
    }
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(t: f64) -> f64 {
    let x = t.abs();
    let value = if x < SERIES_LIMIT {
        j1_series(x)
    } else if x <= ASYMPTOTIC_LIMIT {
        miller(x).j1
    } else {
        j1_hankel(x)
    };
    if t < 0.0 {
        -value
    } else {
        value
    }
}

/// Bessel function of the second kind, order zero. Defined for `t > 0` only.
pub fn bessel_y0(t: f64) -> Result<f64, NumericsError> {
    if t <= 0.0 || !t.is_finite() {
        return Err(NumericsError::Domain {
            function: "Y0",
            argument: t,
        });
    }
    let x = t;
    let value = if x < SERIES_LIMIT {
        y0_series(x)
    } else if x <= ASYMPTOTIC_LIMIT {
        y0_miller(x)
    } else {
        y0_hankel(x)
    };
    Ok(value)
}

fn y0_miller(x: f64) -> f64 {
    let m = miller(x);
    2.0 / PI * ((x / 2.0).ln() + EULER_GAMMA) * m.j0 - 4.0 / PI * m.neumann_sum
}

/// `cos(x - π/4)` and `sin(x - π/4)`, expanded so a large argument is not shifted.
fn quarter_phase(x: f64) -> (f64, f64) {
    let (s, c) = x.sin_cos();
    ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
}

fn j0_hankel(x: f64) -> f64 {
    let (p, q) = hankel_pq(0.0, x);
    let (cos_chi, sin_chi) = quarter_phase(x);
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

fn j1_hankel(x: f64) -> f64 {
    let (p, q) = hankel_pq(1.0, x);
    // x - 3π/4 = (x - π/4) - π/2
    let (c0, s0) = quarter_phase(x);
    let (cos_chi, sin_chi) = (s0, -c0);
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

fn y0_hankel(x: f64) -> f64 {
    let (p, q) = hankel_pq(0.0, x);
    let (cos_chi, sin_chi) = quarter_phase(x);
    (2.0 / (PI * x)).sqrt() * (p * sin_chi + q * cos_chi)
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn j1_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..40 {
        term *= q / (k * (k + 1)) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Y0(x) = (2/π)(ln(x/2) + γ) J0(x) + (2/π) Σ_{k≥1} (-1)^{k+1} H_k (x²/4)^k / (k!)²
fn y0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..40 {
        term *= q / (k * k) as f64;
        harmonic += 1.0 / k as f64;
        let contrib = -term * harmonic;
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    2.0 / PI * (((x / 2.0).ln() + EULER_GAMMA) * j0_series(x) + sum)
}

struct MillerValues {
    j0: f64,
    j1: f64,
    /// Σ_{k≥1} (-1)^k J_2k(x) / k
    neumann_sum: f64,
}

/// Backward recurrence `J_{k-1} = (2k/x) J_k - J_{k+1}` from a high even order.
fn miller(x: f64) -> MillerValues {
    let start = {
        let m = x as usize + 30 + (10.0 * x.sqrt()) as usize;
        m + (m % 2)
    };
    let mut next = 0.0; // J_{k+1}
    let mut current = 1e-30; // J_k
    let mut norm = 0.0;
    let mut neumann = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        if k % 2 == 0 {
            let half = (k / 2) as f64;
            norm += 2.0 * current;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            neumann += sign * current / half;
        }
        let prev = 2.0 * k as f64 / x * current - next;
        next = current;
        current = prev;
        if k == 1 {
            j1 = next;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            neumann *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += current;
    MillerValues {
        j0: current / norm,
        j1: j1 / norm,
        neumann_sum: neumann / norm,
    }
}

/// P and Q of Hankel's expansion for integer order `nu` at large `x`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    // a_k = Π_{j=1..k} (μ - (2j-1)²) / (k! 8^k), term_k = a_k / x^k
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last {
            break;
        }
        last = term.abs();
        // k odd contributes to Q, k even to P, with alternating signs per pair
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}
