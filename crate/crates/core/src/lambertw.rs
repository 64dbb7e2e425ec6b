//! Lambert W on the two branches that carry closed-loop poles.
//!
//! `W_0` and `W_{-1}` are evaluated for real arguments. On `[-1/e, 0)` both
//! branches are real; below `-1/e` they become a complex-conjugate pair with
//! `W_0` in the upper half plane. Values are refined with Halley's iteration
//! on `f(w) = w e^w - z`, seeded by the branch-point series or a logarithmic
//! asymptotic depending on the distance from `-1/e`.

use std::f64::consts::E;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A complex value as returned by [`lambert_w`]. Both parts are finite.
pub type ComplexValue = Complex64;

/// `-1/e`, where `W_0` and `W_{-1}` meet at `W = -1`.
pub const BRANCH_POINT: f64 = -1.0 / E;

const MAX_ITERATIONS: usize = 50;
const STEP_TOL: f64 = 1e-14;
/// Radius in `e z + 1` inside which the branch-point series seeds Halley.
const SERIES_RADIUS: f64 = 0.2;

/// Branch index of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `k = 0`
    Principal,
    /// `k = -1`
    Lower,
}

impl Branch {
    pub fn new(k: i32) -> Result<Self> {
        match k {
            0 => Ok(Branch::Principal),
            -1 => Ok(Branch::Lower),
            other => Err(Error::InvalidBranch(other)),
        }
    }

    pub fn index(self) -> i32 {
        match self {
            Branch::Principal => 0,
            Branch::Lower => -1,
        }
    }
}

impl TryFrom<i32> for Branch {
    type Error = Error;

    fn try_from(k: i32) -> Result<Self> {
        Branch::new(k)
    }
}

/// Evaluates `W_k(z)` for a real argument.
///
/// For `-1/e <= z < 0` the result is real, with `W_0(z)` in `[-1, 0)` and
/// `W_{-1}(z) <= -1`. For `z < -1/e` the principal branch returns the root
/// with positive imaginary part and the lower branch returns its conjugate.
/// The principal branch also accepts `z >= 0`; the lower branch requires
/// `z < 0`.
pub fn lambert_w(branch: Branch, z: f64) -> Result<ComplexValue> {
    check_domain(branch, z)?;
    if z >= BRANCH_POINT {
        return Ok(Complex64::new(real_branch(branch, z), 0.0));
    }
    let upper = complex_principal(z);
    Ok(match branch {
        Branch::Principal => upper,
        Branch::Lower => upper.conj(),
    })
}

/// Real-only evaluation. Arguments below `-1/e` are a domain error on
/// either branch since the result would be complex.
pub fn lambert_w_real(branch: Branch, z: f64) -> Result<f64> {
    check_domain(branch, z)?;
    if z < BRANCH_POINT {
        return Err(Error::Domain(format!(
            "W_{}({z}) is complex; real evaluation requires z >= -1/e",
            branch.index()
        )));
    }
    Ok(real_branch(branch, z))
}

/// `|w e^w - z|`.
pub fn lambert_w_residual(w: ComplexValue, z: f64) -> f64 {
    (w * w.exp() - z).norm()
}

fn check_domain(branch: Branch, z: f64) -> Result<()> {
    if !z.is_finite() {
        return Err(Error::Domain(format!(
            "Lambert W argument must be finite, got {z}"
        )));
    }
    if branch == Branch::Lower && z >= 0.0 {
        return Err(Error::Domain(format!("W_-1 requires z < 0, got {z}")));
    }
    Ok(())
}

fn real_branch(branch: Branch, z: f64) -> f64 {
    if z == BRANCH_POINT {
        return -1.0;
    }
    if branch == Branch::Principal && z == 0.0 {
        return 0.0;
    }
    // distance from the branch point in the series variable
    let q = (z - BRANCH_POINT) * E;
    if q <= 0.0 {
        return -1.0;
    }
    let p = (2.0 * q).sqrt();
    let guess = match branch {
        Branch::Principal => {
            if q < SERIES_RADIUS || z < 0.0 {
                branch_series(p)
            } else if z < 3.0 {
                z.ln_1p()
            } else {
                let lz = z.ln();
                lz - lz.ln()
            }
        }
        Branch::Lower => {
            if z > -0.1 && q >= SERIES_RADIUS {
                let l1 = (-z).ln();
                l1 - (-l1).ln()
            } else {
                branch_series(-p)
            }
        }
    };
    halley_real(guess, z)
}

/// `-1 + p - p^2/3 + 11 p^3/72`, the expansion of W about `-1/e`.
fn branch_series(p: f64) -> f64 {
    -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0))
}

fn halley_real(mut w: f64, z: f64) -> f64 {
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - z;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= STEP_TOL * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// `W_0(z)` for real `z < -1/e`, the root with `0 < Im w < pi`.
fn complex_principal(z: f64) -> Complex64 {
    let q = (z - BRANCH_POINT) * E;
    let guess = if q > -10.0 * SERIES_RADIUS {
        let p = Complex64::new(0.0, (-2.0 * q).sqrt());
        let one = Complex64::new(1.0, 0.0);
        -one + p * (one + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
    } else {
        let l1 = Complex64::new(z, 0.0).ln();
        l1 - l1.ln()
    };
    halley_complex(guess, z)
}

fn halley_complex(mut w: Complex64, z: f64) -> Complex64 {
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - z;
        if f.norm() == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (wp1 * 2.0);
        if denom.norm() == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.norm() <= STEP_TOL * (1.0 + w.norm()) {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_maps_to_zero() {
        let w = lambert_w(Branch::Principal, 0.0).unwrap();
        assert_eq!(w, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn branch_point_is_minus_one_on_both_branches() {
        assert_eq!(
            lambert_w(Branch::Principal, BRANCH_POINT).unwrap(),
            Complex64::new(-1.0, 0.0)
        );
        assert_eq!(
            lambert_w(Branch::Lower, BRANCH_POINT).unwrap(),
            Complex64::new(-1.0, 0.0)
        );
    }

    #[test]
    fn omega_constant_matches_bisection() {
        let omega = bisect(0.5, 0.6, |w| w * w.exp() - 1.0);
        let w = lambert_w(Branch::Principal, 1.0).unwrap();
        assert_eq!(w.im, 0.0);
        assert!((w.re - omega).abs() < 1e-15, "{} vs {omega}", w.re);
    }

    #[test]
    fn real_branches_match_bisection() {
        for &z in &[-0.35, -0.3, -0.2, -0.1, -0.05, -1e-3, -1e-6] {
            let w0 = bisect(-1.0, 0.0, |w| w * w.exp() - z);
            let wm1 = bisect(-60.0, -1.0, |w| w * w.exp() - z);
            let a = lambert_w_real(Branch::Principal, z).unwrap();
            let b = lambert_w_real(Branch::Lower, z).unwrap();
            assert!(
                (a - w0).abs() < 1e-12 * (1.0 + w0.abs()),
                "W0({z}) {a} vs {w0}"
            );
            assert!(
                (b - wm1).abs() < 1e-12 * (1.0 + wm1.abs()),
                "W-1({z}) {b} vs {wm1}"
            );
        }
    }

    #[test]
    fn underdamped_argument_gives_upper_half_plane_root() {
        let z = -1.8837 / E;
        let w = lambert_w(Branch::Principal, z).unwrap();
        assert!(w.im > 0.0 && w.im < std::f64::consts::PI);
        assert!(lambert_w_residual(w, z) <= 1e-12);
        assert_eq!(lambert_w(Branch::Lower, z).unwrap(), w.conj());
    }

    #[test]
    fn residual_helper() {
        assert!(lambert_w_residual(Complex64::new(-1.0, 0.0), BRANCH_POINT) < 1e-16);
        assert_eq!(lambert_w_residual(Complex64::new(0.0, 0.0), 0.0), 0.0);
        assert!(lambert_w_residual(Complex64::new(-1.0, 0.5), BRANCH_POINT) > 0.0);
    }

    #[test]
    fn rejects_bad_branches_and_domains() {
        assert_eq!(Branch::new(1), Err(Error::InvalidBranch(1)));
        assert_eq!(Branch::try_from(-2), Err(Error::InvalidBranch(-2)));
        assert_eq!(Branch::new(-1).unwrap().index(), -1);
        assert!(matches!(
            lambert_w(Branch::Lower, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            lambert_w(Branch::Lower, 0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            lambert_w(Branch::Principal, f64::NAN),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            lambert_w_real(Branch::Principal, -0.5),
            Err(Error::Domain(_))
        ));
        assert!(lambert_w_real(Branch::Principal, BRANCH_POINT).is_ok());
    }

    #[test]
    fn branch_ordering_on_real_segment() {
        for i in 1..500 {
            let z = BRANCH_POINT * (i as f64 / 500.0);
            let w0 = lambert_w_real(Branch::Principal, z).unwrap();
            let wm1 = lambert_w_real(Branch::Lower, z).unwrap();
            assert!(wm1 < -1.0 && -1.0 < w0 && w0 < 0.0, "z={z}: {wm1} {w0}");
        }
    }

    #[test]
    fn continuous_across_branch_point() {
        for z in [BRANCH_POINT + 1e-8, BRANCH_POINT - 1e-8] {
            for b in [Branch::Principal, Branch::Lower] {
                let w = lambert_w(b, z).unwrap();
                assert!(
                    (w - Complex64::new(-1.0, 0.0)).norm() < 1e-3,
                    "{b:?} {z}: {w}"
                );
            }
        }
    }

    #[test]
    fn frozen_complex_values() {
        // principal-branch values cross-checked with an independent
        // arbitrary-precision evaluation
        let cases = [
            (
                -0.5,
                Complex64::new(-0.7940236323446893, 0.7701117505103791),
            ),
            (-5.0, Complex64::new(0.8448446054321697, 1.9750087548890337)),
            (
                -1.1,
                Complex64::new(-0.25152220430297697, 1.392038801181596),
            ),
        ];
        for (z, expected) in cases {
            let w = lambert_w(Branch::Principal, z).unwrap();
            assert!(
                (w - expected).norm() < 1e-12,
                "W0({z}) = {w}, expected {expected}"
            );
        }
    }
}
