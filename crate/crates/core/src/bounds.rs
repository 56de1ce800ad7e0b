//! Closed-form advantage bounds in exact rational arithmetic.

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::constructions::SpongeParams;
use crate::error::{Error, Result};

pub fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn ratio(a: u64, b: u64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

pub fn pow2(e: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(1) << e)
}

fn pow(base: u64, e: u64) -> BigRational {
    BigRational::from_integer(num_traits::pow(BigInt::from(base), e as usize))
}

/// `min(1, max(0, r))`.
pub fn clamp(r: &BigRational) -> BigRational {
    if r.is_negative() {
        BigRational::zero()
    } else if *r > BigRational::one() {
        BigRational::one()
    } else {
        r.clone()
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    let (n, d) = (r.numer(), r.denom());
    // scale down huge operands so the quotient stays finite
    let shift = n.bits().max(d.bits()).saturating_sub(1000);
    let n: f64 = (n >> shift).to_string().parse().unwrap_or(f64::NAN);
    let d: f64 = (d >> shift).to_string().parse().unwrap_or(f64::NAN);
    n / d
}

/// `a/b` form, integers without a denominator.
pub fn format(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `(1 - k²/n) / (2q+1)^k`.
pub fn classical_lifting_factor(k: usize, n: usize, q: usize) -> BigRational {
    (int(1) - ratio((k * k) as u64, n as u64)) / pow(2 * q as u64 + 1, k as u64)
}

/// `(1 - k²/n) / (8q+1)^{2k}`.
pub fn quantum_lifting_factor(k: usize, n: usize, q: usize) -> BigRational {
    (int(1) - ratio((k * k) as u64, n as u64)) / pow(8 * q as u64 + 1, 2 * k as u64)
}

/// Generalised double-sided search: `8(8q+1)² r_max / N`.
pub fn double_sided_search(q: u64, r_max: u64, big_n: u64) -> BigRational {
    int(8) * pow(8 * q + 1, 2) * ratio(r_max, big_n)
}

/// Zero search on `{0,1}^{2n}`: `8(8q+1)² / 2^n`.
pub fn double_sided_zero(n_half: u64, q: u64) -> BigRational {
    int(8) * pow(8 * q + 1, 2) / pow2(n_half)
}

/// Fixed point search on `N` elements: `8(8q+1)² / N`.
pub fn fixed_point(big_n: u64, q: u64) -> BigRational {
    double_sided_search(q, 1, big_n)
}

/// Sponge lifting: `2(8q+1)^{2kℓ} (p_max + (kℓ+k+1)² / 2^c)`.
pub fn sponge_lift(params: &SpongeParams, q: u64, k: u64, p_max: &BigRational) -> BigRational {
    let l = params.ell() as u64;
    let cap = pow(k * l + k + 1, 2) / pow2(params.c as u64);
    int(2) * pow(8 * q + 1, 2 * k * l) * (p_max + cap)
}

/// `(8q+1)^{2ℓ} (4/2^n + 2(ℓ+2)²/2^c)`.
pub fn sponge_preimage(params: &SpongeParams, q: u64) -> BigRational {
    let l = params.ell() as u64;
    pow(8 * q + 1, 2 * l) * (int(4) / pow2(params.n as u64) + int(2) * pow(l + 2, 2) / pow2(params.c as u64))
}

fn collision_like(params: &SpongeParams, q: u64, out_bits: u64) -> BigRational {
    let l = params.ell() as u64;
    pow(8 * q + 1, 4 * l) * (int(12) / pow2(out_bits) + int(2) * pow(2 * l + 3, 2) / pow2(params.c as u64))
}

/// `(8q+1)^{4ℓ} (12/2^n + 2(2ℓ+3)²/2^c)`.
pub fn sponge_collision(params: &SpongeParams, q: u64) -> BigRational {
    collision_like(params, q, params.n as u64)
}

/// Collision formula with `2^{min(m,n)}` in the first term.
pub fn sponge_oneway(params: &SpongeParams, q: u64) -> BigRational {
    collision_like(params, q, params.m.min(params.n) as u64)
}

/// `2(8q+1)^{2kℓ} (C(2k,k)/2^{(k-1)n} + (kℓ+k+1)²/2^c)`.
pub fn sponge_multicollision(params: &SpongeParams, q: u64, k: u64) -> BigRational {
    let l = params.ell() as u64;
    let c2k = BigRational::from_integer(BigInt::from(binomial(BigUint::from(2 * k), BigUint::from(k))));
    let first = c2k / pow2((k.saturating_sub(1)) * params.n as u64);
    let cap = pow(k * l + k + 1, 2) / pow2(params.c as u64);
    int(2) * pow(8 * q + 1, 2 * k * l) * (first + cap)
}

/// Davies-Meyer collision bound in the ideal cipher model: `6(8q+1)⁴ / (2^n - 4)`.
pub fn icm_collision(n: u64, q: u64) -> Result<BigRational> {
    let denom = pow2(n) - int(4);
    if !denom.is_positive() {
        return Err(Error::Parameter(format!("2^{n} - 4 is not positive")));
    }
    Ok(int(6) * pow(8 * q + 1, 4) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(double_sided_zero(10, 1), ratio(81, 128));
        assert_eq!(to_f64(&double_sided_zero(10, 1)), 0.6328125);
        assert_eq!(fixed_point(16, 0), ratio(1, 2));
        assert_eq!(double_sided_search(0, 1, 16), ratio(1, 2));
        assert_eq!(icm_collision(3, 0).unwrap(), ratio(3, 2));
        assert_eq!(clamp(&icm_collision(3, 0).unwrap()), int(1));
        assert!(icm_collision(2, 0).is_err());
    }

    #[test]
    fn lifting_factors() {
        assert_eq!(classical_lifting_factor(1, 4, 2), ratio(3, 20));
        assert_eq!(quantum_lifting_factor(1, 4, 1), ratio(3, 324));
        assert_eq!(quantum_lifting_factor(2, 4, 1), int(0));
    }

    #[test]
    fn formatting_and_floats() {
        assert_eq!(format(&ratio(6, 4)), "3/2");
        assert_eq!(format(&int(7)), "7");
        let huge = pow(17, 400) / pow(17, 399);
        assert_eq!(to_f64(&huge), 17.0);
    }
}
