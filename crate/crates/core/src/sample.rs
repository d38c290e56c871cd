//! Deterministic exact sampling of rational points on the constraint variety.
//!
//! Identity checking needs points that satisfy Xi = 0 (and sometimes H2 = h)
//! exactly, not to rounding. A four-square decomposition of 2ab for h = a/b
//! seeds the level with p = 0, and exact rational rotations along the
//! commuting symmetry flows spread the points over the level without moving
//! H2 or Xi at all. The plain constraint sampler instead solves Xi = 0 for
//! one momentum coordinate. Everything is a pure function of the seed.

use crate::coeff::Rat;
use crate::error::StarkError;
use crate::space::{self, Point};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Write m as a sum of four squares, largest term first.
pub fn four_square(m: u64) -> Result<[u64; 4], StarkError> {
    let isqrt = |v: u64| -> u64 {
        let mut r = (v as f64).sqrt() as u64;
        while r * r > v {
            r -= 1;
        }
        while (r + 1) * (r + 1) <= v {
            r += 1;
        }
        r
    };
    let top = isqrt(m);
    for n1 in (0..=top).rev() {
        let r1 = m - n1 * n1;
        for n2 in (0..=isqrt(r1).min(n1)).rev() {
            let r2 = r1 - n2 * n2;
            for n3 in (0..=isqrt(r2).min(n2)).rev() {
                let r3 = r2 - n3 * n3;
                let n4 = isqrt(r3);
                if n4 * n4 == r3 && n4 <= n3 {
                    return Ok([n1, n2, n3, n4]);
                }
            }
        }
    }
    Err(StarkError::FourSquare(m.to_string()))
}

/// Exact point on the unit circle: t parametrizes (c, s) with c^2 + s^2 = 1.
pub fn rational_rotation(t: &Rat) -> (Rat, Rat) {
    let one = Rat::from_integer(1.into());
    let t2 = t * t;
    let den = &one + &t2;
    let c = (&one - &t2) / &den;
    let s = (t + t) / den;
    (c, s)
}

/// Rotation acting on index pairs of a coordinate vector. With sign +1 the
/// pair turns as (a, b) -> (c a + s b, -s a + c b); sign -1 flips s.
fn rotate_pairs(vals: &mut [Rat], pairs: &[(usize, usize, i8)], c: &Rat, s: &Rat) {
    for &(ia, ib, sign) in pairs {
        let se = if sign >= 0 { s.clone() } else { -s.clone() };
        let a = vals[ia].clone();
        let b = vals[ib].clone();
        vals[ia] = c * &a + &se * &b;
        vals[ib] = c * &b - &se * &a;
    }
}

// q1..q4 are indices 0..3 and p1..p4 are 4..7 in the canonical space.
const FLOW_H2: [(usize, usize, i8); 4] = [(0, 4, 1), (1, 5, 1), (2, 6, 1), (3, 7, 1)];
const FLOW_K3: [(usize, usize, i8); 4] = [(0, 4, -1), (1, 5, -1), (2, 6, 1), (3, 7, 1)];
const FLOW_L3: [(usize, usize, i8); 4] = [(0, 1, 1), (2, 3, -1), (4, 5, 1), (6, 7, -1)];
const FLOW_XI: [(usize, usize, i8); 4] = [(0, 1, -1), (2, 3, -1), (4, 5, -1), (6, 7, -1)];
const FLOW_K1: [(usize, usize, i8); 4] = [(0, 6, -1), (1, 7, -1), (2, 4, -1), (3, 5, -1)];
const FLOW_L1: [(usize, usize, i8); 4] = [(0, 3, 1), (1, 2, -1), (4, 7, 1), (5, 6, -1)];

const SYMMETRY_FLOWS: [&[(usize, usize, i8); 4]; 6] =
    [&FLOW_H2, &FLOW_K3, &FLOW_L3, &FLOW_XI, &FLOW_K1, &FLOW_L1];

/// Seeded source of exact rational sample points.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Small rational with numerator in [-6, 6] and denominator in [1, 4].
    pub fn small_rat(&mut self) -> Rat {
        let num: i64 = self.rng.gen_range(-6..=6);
        let den: i64 = self.rng.gen_range(1..=4);
        Rat::new(num.into(), den.into())
    }

    pub fn nonzero_rat(&mut self) -> Rat {
        let mag: i64 = self.rng.gen_range(1..=6);
        let den: i64 = self.rng.gen_range(1..=4);
        let sign = if self.rng.gen::<bool>() { 1 } else { -1 };
        Rat::new((sign * mag).into(), den.into())
    }

    fn finish(&mut self, mut vals: Vec<Rat>) -> Point {
        let s = space::canonical();
        let h2 = {
            let half = Rat::new(1.into(), 2.into());
            let sq = vals.iter().take(8).fold(Rat::zero(), |acc, v| acc + v * v);
            half * sq
        };
        vals.resize(s.dim(), Rat::zero());
        vals[s.index_of("h").unwrap()] = h2;
        vals[s.index_of("eps").unwrap()] = Rat::new(1.into(), 10.into());
        vals[s.index_of("beta").unwrap()] = self.nonzero_rat();
        Point::new(s, vals)
    }

    /// Unconstrained rational point; h is set to the actual H2 value so that
    /// level identities can be evaluated coherently.
    pub fn canonical_point(&mut self) -> Point {
        let vals: Vec<Rat> = (0..8).map(|_| self.small_rat()).collect();
        self.finish(vals)
    }

    /// Exact point of the zero set of Xi: draw everything but p2 and solve
    /// q1 p2 = q2 p1 - q3 p4 + q4 p3 with q1 forced nonzero.
    pub fn constraint_point(&mut self) -> Point {
        let mut vals: Vec<Rat> = (0..8).map(|_| self.small_rat()).collect();
        vals[0] = self.nonzero_rat();
        let num = &vals[1] * &vals[4] - &vals[2] * &vals[7] + &vals[3] * &vals[6];
        vals[5] = num / &vals[0];
        self.finish(vals)
    }

    /// Exact point with H2 = h and Xi = 0. The four-square seed q = n/b,
    /// p = 0 is spread over the level by rational rotations along the six
    /// symmetry flows, each of which fixes H2 and Xi.
    pub fn level_point(&mut self, h: &Rat) -> Result<Point, StarkError> {
        if !h.is_positive() {
            return Err(StarkError::BadLevel("h > 0 on an oscillator level".into()));
        }
        let a = h.numer().clone();
        let b = h.denom().clone();
        let m = (BigInt::from(2) * &a * &b)
            .to_u64()
            .ok_or_else(|| StarkError::FourSquare("2 a b does not fit in u64".into()))?;
        let n = four_square(m)?;
        let mut vals: Vec<Rat> = n
            .iter()
            .map(|&ni| Rat::new(BigInt::from(ni), b.clone()))
            .chain(std::iter::repeat_with(Rat::zero).take(4))
            .collect();
        for _round in 0..2 {
            for flow in SYMMETRY_FLOWS {
                let (c, s) = rational_rotation(&self.small_rat());
                rotate_pairs(&mut vals, flow, &c, &s);
            }
        }
        let mut pt = self.finish(vals);
        pt.set("h", h.clone())?;
        Ok(pt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gens;
    use crate::poly::q;

    #[test]
    fn four_square_covers_small_integers() {
        for m in 0..=200u64 {
            let n = four_square(m).unwrap();
            assert_eq!(n.iter().map(|x| x * x).sum::<u64>(), m, "m = {m}");
            assert!(n.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rotations_stay_on_the_circle() {
        for (num, den) in [(0i64, 1i64), (1, 1), (-2, 3), (7, 2), (5, 4)] {
            let (c, s) = rational_rotation(&q(num, den));
            assert_eq!(&c * &c + &s * &s, q(1, 1));
        }
    }

    #[test]
    fn constraint_points_sit_on_the_zero_set() {
        let mut sampler = Sampler::new(7);
        let xi = gens::table().get("Xi").clone();
        let h2 = gens::table().get("H2").clone();
        for _ in 0..20 {
            let pt = sampler.constraint_point();
            assert!(xi.eval_exact(&pt).unwrap().is_zero());
            let h2_val = h2.eval_exact(&pt).unwrap();
            assert!(h2_val.eq_rat(pt.value_of("h").unwrap()));
        }
    }

    #[test]
    fn level_points_pin_energy_and_constraint() {
        let mut sampler = Sampler::new(11);
        let xi = gens::table().get("Xi").clone();
        let h2 = gens::table().get("H2").clone();
        for h in [q(1, 1), q(3, 2), q(2, 3), q(5, 1)] {
            let pt = sampler.level_point(&h).unwrap();
            assert!(xi.eval_exact(&pt).unwrap().is_zero());
            assert!(h2.eval_exact(&pt).unwrap().eq_rat(&h));
            assert!(pt.value_of("h").unwrap() == &h);
        }
        assert!(matches!(
            sampler.level_point(&q(-1, 1)),
            Err(StarkError::BadLevel(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let a = Sampler::new(3).level_point(&q(1, 1)).unwrap();
        let b = Sampler::new(3).level_point(&q(1, 1)).unwrap();
        let c = Sampler::new(4).level_point(&q(1, 1)).unwrap();
        assert_eq!(a.to_f64(), b.to_f64());
        assert_ne!(a.to_f64(), c.to_f64());
    }

    #[test]
    fn level_points_move_between_draws() {
        let mut sampler = Sampler::new(5);
        let a = sampler.level_point(&q(1, 1)).unwrap();
        let b = sampler.level_point(&q(1, 1)).unwrap();
        assert_ne!(a.to_f64(), b.to_f64());
    }
}
