//! Coefficient ring: rationals extended by the transcendental constant pi.
//!
//! Every coefficient is r0 + r1*pi + r2*pi^2 with exact rational r_i. The
//! pipeline never produces pi-degree above two (the generating function is
//! linear in pi and enters at most twice through nested derivations), so the
//! bound is enforced as a hard invariant rather than grown dynamically:
//! a violation means the engine is being used outside its design envelope.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Exact rational scalar.
pub type Rat = BigRational;

/// Build a rational from a signed numerator and denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Build an integer rational.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Element of Q[pi] truncated at pi^2: parts[d] is the coefficient of pi^d.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Coeff {
    parts: [Rat; 3],
}

impl Coeff {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_rat(Rat::one())
    }

    pub fn from_rat(r: Rat) -> Self {
        let mut c = Self::zero();
        c.parts[0] = r;
        c
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rat(rat_int(n))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rat(rat(num, den))
    }

    /// r * pi^d. Panics if d > 2.
    pub fn pi_term(r: Rat, d: u32) -> Self {
        assert!(d <= 2, "pi-degree {d} exceeds the supported bound 2");
        let mut c = Self::zero();
        c.parts[d as usize] = r;
        c
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().all(Rat::is_zero)
    }

    /// Largest d with a nonzero pi^d part, or 0 for the zero coefficient.
    pub fn pi_degree(&self) -> u32 {
        for d in (0..3).rev() {
            if !self.parts[d].is_zero() {
                return d as u32;
            }
        }
        0
    }

    /// True when the coefficient is a plain rational (no pi part).
    pub fn is_rational(&self) -> bool {
        self.parts[1].is_zero() && self.parts[2].is_zero()
    }

    pub fn rational_part(&self) -> &Rat {
        &self.parts[0]
    }

    pub fn part(&self, d: u32) -> &Rat {
        &self.parts[d as usize]
    }

    /// Split into (pi-free part, part with pi). Used by the pi-graded
    /// bookkeeping in the normal form stages.
    pub fn split_pi(&self) -> (Coeff, Coeff) {
        let mut free = Coeff::zero();
        free.parts[0] = self.parts[0].clone();
        let mut with = Coeff::zero();
        with.parts[1] = self.parts[1].clone();
        with.parts[2] = self.parts[2].clone();
        (free, with)
    }

    pub fn scale(&self, r: &Rat) -> Self {
        let mut c = self.clone();
        for p in &mut c.parts {
            *p *= r;
        }
        c
    }

    /// Exact equality with a plain rational.
    pub fn eq_rat(&self, r: &Rat) -> bool {
        self.is_rational() && &self.parts[0] == r
    }

    /// Floating point value, with pi at its nearest f64.
    pub fn to_f64(&self) -> f64 {
        let pi = std::f64::consts::PI;
        rat_to_f64(&self.parts[0]) + rat_to_f64(&self.parts[1]) * pi + rat_to_f64(&self.parts[2]) * pi * pi
    }
}

/// Convert an exact rational to the nearest f64, robust against numerators or
/// denominators that individually overflow f64 range.
pub fn rat_to_f64(r: &Rat) -> f64 {
    if let Some(x) = r.to_f64() {
        if x.is_finite() {
            return x;
        }
    }
    // Fallback: scale so the integer quotient carries ~63 significant bits.
    let neg = r.is_negative();
    let a = r.numer().abs();
    let b = r.denom().abs();
    if a.is_zero() {
        return 0.0;
    }
    let s: i64 = 63 + b.bits() as i64 - a.bits() as i64;
    let q = if s >= 0 {
        (a << s as usize) / &b
    } else {
        a / (&b << (-s) as usize)
    };
    let x = q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-s as i32);
    if neg {
        -x
    } else {
        x
    }
}

impl Add for Coeff {
    type Output = Coeff;
    fn add(mut self, rhs: Coeff) -> Coeff {
        for (a, b) in self.parts.iter_mut().zip(rhs.parts) {
            *a += b;
        }
        self
    }
}

impl AddAssign<&Coeff> for Coeff {
    fn add_assign(&mut self, rhs: &Coeff) {
        for (a, b) in self.parts.iter_mut().zip(&rhs.parts) {
            *a += b;
        }
    }
}

impl Sub for Coeff {
    type Output = Coeff;
    fn sub(mut self, rhs: Coeff) -> Coeff {
        for (a, b) in self.parts.iter_mut().zip(rhs.parts) {
            *a -= b;
        }
        self
    }
}

impl Neg for Coeff {
    type Output = Coeff;
    fn neg(mut self) -> Coeff {
        for a in &mut self.parts {
            *a = -std::mem::take(a);
        }
        self
    }
}

impl Mul for &Coeff {
    type Output = Coeff;
    fn mul(self, rhs: &Coeff) -> Coeff {
        let mut out = Coeff::zero();
        for (i, a) in self.parts.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.parts.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let d = i + j;
                assert!(d <= 2, "pi-degree {d} exceeds the supported bound 2");
                out.parts[d] += a * b;
            }
        }
        out
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::grammar::emit_coeff_debug(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_pi_grading() {
        let a = Coeff::from_ratio(1, 2) + Coeff::pi_term(rat(3, 4), 1);
        let b = Coeff::from_int(2) + Coeff::pi_term(rat(-1, 4), 1);
        let s = a.clone() + b.clone();
        assert_eq!(s.part(0), &rat(5, 2));
        assert_eq!(s.part(1), &rat(1, 2));
        let p = &a * &b;
        // (1/2 + 3/4 pi)(2 - 1/4 pi) = 1 + (3/2 - 1/8) pi - 3/16 pi^2
        assert_eq!(p.part(0), &rat_int(1));
        assert_eq!(p.part(1), &rat(11, 8));
        assert_eq!(p.part(2), &rat(-3, 16));
        assert_eq!(p.pi_degree(), 2);
    }

    #[test]
    #[should_panic(expected = "pi-degree")]
    fn pi_cubed_is_rejected() {
        let a = Coeff::pi_term(Rat::one(), 2);
        let b = Coeff::pi_term(Rat::one(), 1);
        let _ = &a * &b;
    }

    #[test]
    fn f64_conversion_matches_components() {
        let c = Coeff::from_ratio(1, 3) + Coeff::pi_term(rat(2, 1), 1);
        let expect = 1.0 / 3.0 + 2.0 * std::f64::consts::PI;
        assert!((c.to_f64() - expect).abs() < 1e-15);
    }

    #[test]
    fn robust_rational_to_f64() {
        // numerator alone overflows f64, ratio does not
        let big = BigInt::from(10).pow(400);
        let r = Rat::new(big.clone() * 3, big * 2);
        assert!((rat_to_f64(&r) - 1.5).abs() < 1e-15);
        let tiny = Rat::new(BigInt::one(), BigInt::from(10).pow(400));
        assert_eq!(rat_to_f64(&tiny), 0.0);
    }
}
