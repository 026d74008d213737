//! Self-contained special functions on the real line.
//!
//! Cylindrical Bessel functions use the classical split: an ascending power
//! series for 0 <= x <= 13 and the large-argument phase/amplitude expansion
//! J_n(x) = sqrt(2/(pi x)) (P cos chi - Q sin chi) beyond. The cut sits where
//! the two error curves cross: the optimally truncated expansion bottoms out
//! near e^{-2x} (about 5e-12 at x = 13) while the alternating series loses
//! roughly the magnitude of its largest term (about 1e-12 there). The test
//! suite pins 1e-10 against a 50-digit reference table over [1e-3, 200].
//! Spherical functions of order 0 and 1 have closed forms and are evaluated
//! directly.

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const FRAC_2_PI: f64 = std::f64::consts::FRAC_2_PI;

/// Switch point between the ascending series and the asymptotic expansion.
const SERIES_CUT: f64 = 13.0;

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=80u32 {
        term *= -q / ((m * m) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

fn j1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for m in 1..=80u32 {
        term *= -q / ((m * (m + 1)) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

fn y0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for m in 1..=80u32 {
        term *= q / ((m * m) as f64);
        harmonic += 1.0 / m as f64;
        sum += sign * harmonic * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j0_series(x) + sum)
}

fn y1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    // sum over k >= 0 of (-1)^k (H_k + H_{k+1}) q^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut hk = 0.0;
    let mut hk1 = 1.0;
    let mut sum = hk + hk1;
    let mut sign = -1.0;
    for k in 1..=80u32 {
        term *= q / ((k * (k + 1)) as f64);
        hk += 1.0 / k as f64;
        hk1 += 1.0 / (k + 1) as f64;
        sum += sign * (hk + hk1) * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j1_series(x))
        - FRAC_2_PI / x
        - x / (2.0 * std::f64::consts::PI) * sum
}

/// Phase/amplitude coefficients P and Q of the large-argument expansion,
/// truncated at the smallest term (mu = 4 n^2).
fn asymptotic_pq(mu: f64, x: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..=60u32 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (8.0 * k as f64 * x);
        if a.abs() >= prev {
            break;
        }
        prev = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-18 {
            break;
        }
    }
    (p, q)
}

fn bessel_asymptotic(order: u32, x: f64) -> (f64, f64) {
    let mu = (4 * order * order) as f64;
    let (p, q) = asymptotic_pq(mu, x);
    let chi = x - (0.5 * order as f64 + 0.25) * std::f64::consts::PI;
    let amp = (2.0 / (std::f64::consts::PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// Evaluates the Bessel function of the first kind J0(x). Defined for all
/// real x; even in x.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_CUT {
        j0_series(ax)
    } else {
        bessel_asymptotic(0, ax).0
    }
}

/// Evaluates the Bessel function of the first kind J1(x). Odd in x.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_CUT {
        j1_series(ax)
    } else {
        bessel_asymptotic(1, ax).0
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Evaluates the Bessel function of the second kind Y0(x) for x > 0.
pub fn bessel_y0(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("Y0 requires x > 0, got {x}")));
    }
    Ok(if x <= SERIES_CUT {
        y0_series(x)
    } else {
        bessel_asymptotic(0, x).1
    })
}

/// Evaluates the Bessel function of the second kind Y1(x) for x > 0.
pub fn bessel_y1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("Y1 requires x > 0, got {x}")));
    }
    Ok(if x <= SERIES_CUT {
        y1_series(x)
    } else {
        bessel_asymptotic(1, x).1
    })
}

/// Evaluates the Hankel function of the first kind H_n(x) = J_n(x) + i Y_n(x)
/// for order 0 or 1 and x > 0.
pub fn hankel1(order: u32, x: f64) -> Result<Complex64> {
    if order > 1 {
        return Err(Error::invalid(format!("hankel1 supports orders 0 and 1, got {order}")));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!("hankel1 requires x > 0, got {x}")));
    }
    Ok(if x <= SERIES_CUT {
        if order == 0 {
            Complex64::new(j0_series(x), y0_series(x))
        } else {
            Complex64::new(j1_series(x), y1_series(x))
        }
    } else {
        let (j, y) = bessel_asymptotic(order, x);
        Complex64::new(j, y)
    })
}

/// Evaluates the spherical Bessel function j_0(x) = sin(x)/x, with the
/// removable singularity at x = 0 filled by its series.
pub fn sph_bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-2 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
    } else {
        x.sin() / x
    }
}

/// Evaluates the spherical Bessel function j_1(x) = sin(x)/x^2 - cos(x)/x.
/// The direct formula cancels near zero, so a Taylor series takes over below
/// 1e-2 where the formula's relative error crosses 1e-11.
pub(crate) fn sph_bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-2 {
        let x2 = x * x;
        x / 3.0 - x * x2 / 30.0 + x * x2 * x2 / 840.0
    } else {
        (x.sin() / x - x.cos()) / x
    }
}

/// Evaluates the spherical Hankel function of the first kind
/// h_0(x) = -i e^{ix} / x for x > 0.
pub fn sph_hankel1_0(x: f64) -> Result<Complex64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("h0 requires x > 0, got {x}")));
    }
    let (s, c) = x.sin_cos();
    Ok(Complex64::new(s, -c) / x)
}

/// Evaluates the spherical Hankel function of the first kind
/// h_1(x) = -(1 + i/x) e^{ix} / x for x > 0.
pub fn sph_hankel1_1(x: f64) -> Result<Complex64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("h1 requires x > 0, got {x}")));
    }
    let (s, c) = x.sin_cos();
    // real part sin/x^2 - cos/x, imaginary part -cos/x^2 - sin/x
    Ok(Complex64::new((s / x - c) / x, (-c / x - s) / x))
}

/// Evaluates the scaled modified Bessel function e^{-z} I_n(z) for orders
/// 0..=2 and z >= 0. The scaling keeps the value in [0, 1] for every z, so
/// products with Gaussian envelopes stay finite.
pub(crate) fn bessel_i_scaled(order: u32, z: f64) -> f64 {
    assert!(order <= 2, "orders 0..=2 only");
    assert!(z >= 0.0, "modified Bessel argument must be nonnegative");
    if z <= SERIES_CUT {
        // all-positive ascending series, then exact exponential scaling
        let q = 0.25 * z * z;
        let mut fact_shift = 1.0;
        for m in 1..=order {
            fact_shift *= m as f64;
        }
        let mut term = (0.5 * z).powi(order as i32) / fact_shift;
        let mut sum = term;
        for m in 1..=120u32 {
            term *= q / ((m * (m + order)) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum * (-z).exp()
    } else {
        let mu = (4 * order * order) as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut prev = f64::INFINITY;
        for k in 1..=60u32 {
            let odd = (2 * k - 1) as f64;
            term *= -(mu - odd * odd) / (8.0 * k as f64 * z);
            if term.abs() >= prev {
                break;
            }
            prev = term.abs();
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

/// Kernel family selector for [`kernel_normal_derivative`]: outgoing Hankel
/// kernels or regular Bessel kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Hankel,
    Bessel,
}

/// Normal derivative at `x` of the order-zero radial kernel centred at `y`:
/// d/d nu_x K0(k |x - y|) = -k K1(k r) ((x - y) . nu) / r, where K0 is
/// H_0^(1) or J_0 in dimension 2 and h_0^(1) or j_0 in dimension 3.
pub fn kernel_normal_derivative(
    dim: usize,
    family: KernelFamily,
    x: [f64; 3],
    nu: [f64; 3],
    y: [f64; 3],
    k: f64,
) -> Result<Complex64> {
    if dim != 2 && dim != 3 {
        return Err(Error::DimensionMismatch { expected: 2, got: dim });
    }
    if !(k > 0.0) {
        return Err(Error::domain(format!("wavenumber must be positive, got {k}")));
    }
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r <= 0.0 {
        return Err(Error::domain("kernel evaluated at zero separation"));
    }
    let k1 = match (dim, family) {
        (2, KernelFamily::Hankel) => hankel1(1, k * r)?,
        (2, KernelFamily::Bessel) => Complex64::new(bessel_j1(k * r), 0.0),
        (3, KernelFamily::Hankel) => sph_hankel1_1(k * r)?,
        (3, KernelFamily::Bessel) => Complex64::new(sph_bessel_j1(k * r), 0.0),
        _ => unreachable!(),
    };
    let proj = (d[0] * nu[0] + d[1] * nu[1] + d[2] * nu[2]) / r;
    Ok(-k * proj * k1)
}
