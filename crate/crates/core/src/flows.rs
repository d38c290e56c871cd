//! Exact periodic flows: pullback, averaging, and the homological inverse.
//!
//! Every flow this engine averages over is a simultaneous rotation of
//! disjoint coordinate pairs at one frequency, so the pullback of a
//! polynomial is a trigonometric polynomial in t whose coefficients are
//! polynomials in the remaining variables. Averages, antiderivatives, and
//! the time-weighted integral that solves the homological equation are then
//! finite mode-by-mode computations with no analysis left over.

use crate::bracket::Structure;
use crate::coeff::{Coeff, Rat};
use crate::error::StarkError;
use crate::poly::Poly;
use crate::space::{Point, Space};
use num_traits::Zero;
use std::collections::BTreeMap;

/// One rotating pair: with sign +1 the flow moves (x_a, x_b) as
/// (cos wt x_a + sin wt x_b, -sin wt x_a + cos wt x_b); sign -1 flips the
/// direction of rotation.
#[derive(Clone, Copy, Debug)]
pub struct RotationPair {
    pub a: usize,
    pub b: usize,
    pub sign: i8,
}

/// A one-parameter group of simultaneous pair rotations at frequency omega.
#[derive(Clone, Debug)]
pub struct FlowSpec {
    space: Space,
    omega: Rat,
    pairs: Vec<RotationPair>,
}

impl FlowSpec {
    pub fn new(space: Space, omega: Rat, pairs: &[(&str, &str, i8)]) -> Self {
        assert!(omega > Rat::zero(), "flow frequency must be positive");
        let mut seen = vec![false; space.n_main()];
        let pairs = pairs
            .iter()
            .map(|&(a, b, sign)| {
                let ia = space.index_of(a).expect("pair variable");
                let ib = space.index_of(b).expect("pair variable");
                assert!(ia < space.n_main() && ib < space.n_main());
                assert!(!seen[ia] && !seen[ib] && ia != ib, "pairs must be disjoint");
                seen[ia] = true;
                seen[ib] = true;
                RotationPair { a: ia, b: ib, sign }
            })
            .collect();
        FlowSpec { space, omega, pairs }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn omega(&self) -> &Rat {
        &self.omega
    }

    pub fn pairs(&self) -> &[RotationPair] {
        &self.pairs
    }

    /// The velocity {x_i, G} this flow assigns to each main variable.
    fn velocity(&self, i: usize) -> Poly {
        for p in &self.pairs {
            let w = if p.sign >= 0 { self.omega.clone() } else { -self.omega.clone() };
            if p.a == i {
                return Poly::var_idx(self.space.clone(), p.b).scale_rat(&w);
            }
            if p.b == i {
                return Poly::var_idx(self.space.clone(), p.a).scale_rat(&(-w));
            }
        }
        Poly::zero(self.space.clone())
    }

    /// Check that this pair table is exactly the Hamiltonian flow of g under
    /// the given Poisson structure: {x_i, g} must match pair by pair.
    pub fn check_against(&self, structure: &Structure, g: &Poly) -> Result<(), StarkError> {
        for i in 0..self.space.n_main() {
            let xi = Poly::var_idx(self.space.clone(), i);
            let got = structure.bracket(&xi, g);
            if got != self.velocity(i) {
                return Err(StarkError::Verification(format!(
                    "flow velocity mismatch at {}",
                    self.space.name(i)
                )));
            }
        }
        Ok(())
    }

    /// Advance a point by the rotation with base angle cos = c, sin = s.
    pub fn rotate_point(&self, pt: &Point, c: &Rat, s: &Rat) -> Point {
        let mut vals = pt.values.clone();
        for p in &self.pairs {
            let se = if p.sign >= 0 { s.clone() } else { -s.clone() };
            let a = vals[p.a].clone();
            let b = vals[p.b].clone();
            vals[p.a] = c * &a + &se * &b;
            vals[p.b] = c * &b - &se * &a;
        }
        Point::new(self.space.clone(), vals)
    }

    /// Pull a polynomial back along the flow: f composed with the rotation at
    /// time t, organized by harmonics of the base frequency.
    pub fn pullback(&self, f: &Poly) -> TrigPoly {
        crate::space::require_same(self.space(), f.space()).expect("pullback space");
        let dim = self.space.dim();
        let mut images: Vec<TrigPoly> = Vec::with_capacity(dim);
        for i in 0..dim {
            images.push(self.var_image(i));
        }
        let mut acc = TrigPoly::zero(self.space.clone(), self.omega.clone());
        let mut powers: BTreeMap<(usize, u16), TrigPoly> = BTreeMap::new();
        for (mono, coeff) in f.terms() {
            let mut term = TrigPoly::constant_poly(Poly::constant(
                self.space.clone(),
                Coeff::one(),
            ), self.omega.clone());
            for (i, &e) in mono.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let p = powers
                    .entry((i, e))
                    .or_insert_with(|| images[i].pow(e))
                    .clone();
                term = term.mul(&p);
            }
            acc = acc.add(&term.scale(coeff));
        }
        acc
    }

    fn var_image(&self, i: usize) -> TrigPoly {
        let var = |j: usize| Poly::var_idx(self.space.clone(), j);
        for p in &self.pairs {
            let sgn = Rat::from_integer(if p.sign >= 0 { 1.into() } else { (-1).into() });
            if p.a == i {
                let mut out = TrigPoly::zero(self.space.clone(), self.omega.clone());
                out.cos.insert(1, var(p.a));
                out.sin.insert(1, var(p.b).scale_rat(&sgn));
                return out;
            }
            if p.b == i {
                let mut out = TrigPoly::zero(self.space.clone(), self.omega.clone());
                out.cos.insert(1, var(p.b));
                out.sin.insert(1, var(p.a).scale_rat(&(-sgn)));
                return out;
            }
        }
        TrigPoly::constant_poly(var(i), self.omega.clone())
    }

    /// Mean of f over one period of the flow.
    pub fn average(&self, f: &Poly) -> Poly {
        self.pullback(f).mean()
    }
}

/// Finite Fourier series in one angle: sum of P_m cos(m w t) + Q_m sin(m w t)
/// with polynomial coefficients. The normal form machinery never needs more.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    space: Space,
    base: Rat,
    cos: BTreeMap<u32, Poly>,
    sin: BTreeMap<u32, Poly>,
}

impl TrigPoly {
    pub fn zero(space: Space, base: Rat) -> Self {
        TrigPoly { space, base, cos: BTreeMap::new(), sin: BTreeMap::new() }
    }

    pub fn constant_poly(p: Poly, base: Rat) -> Self {
        let mut out = TrigPoly::zero(p.space().clone(), base);
        if !p.is_zero() {
            out.cos.insert(0, p);
        }
        out
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn base_frequency(&self) -> &Rat {
        &self.base
    }

    pub fn is_zero(&self) -> bool {
        self.cos.is_empty() && self.sin.is_empty()
    }

    /// Highest harmonic present.
    pub fn top_mode(&self) -> u32 {
        let a = self.cos.keys().next_back().copied().unwrap_or(0);
        let b = self.sin.keys().next_back().copied().unwrap_or(0);
        a.max(b)
    }

    pub fn cos_mode(&self, m: u32) -> Poly {
        self.cos.get(&m).cloned().unwrap_or_else(|| Poly::zero(self.space.clone()))
    }

    pub fn sin_mode(&self, m: u32) -> Poly {
        self.sin.get(&m).cloned().unwrap_or_else(|| Poly::zero(self.space.clone()))
    }

    fn insert_cos(&mut self, m: u32, p: Poly) {
        if p.is_zero() {
            return;
        }
        let cur = self.cos_mode(m).add(&p);
        if cur.is_zero() {
            self.cos.remove(&m);
        } else {
            self.cos.insert(m, cur);
        }
    }

    fn insert_sin(&mut self, m: u32, p: Poly) {
        if m == 0 || p.is_zero() {
            return;
        }
        let cur = self.sin_mode(m).add(&p);
        if cur.is_zero() {
            self.sin.remove(&m);
        } else {
            self.sin.insert(m, cur);
        }
    }

    fn compatible(&self, other: &TrigPoly) {
        crate::space::require_same(&self.space, &other.space).expect("trig space");
        assert_eq!(self.base, other.base, "mixed base frequencies");
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        self.compatible(other);
        let mut out = self.clone();
        for (&m, p) in &other.cos {
            out.insert_cos(m, p.clone());
        }
        for (&m, p) in &other.sin {
            out.insert_sin(m, p.clone());
        }
        out
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> TrigPoly {
        let mut out = TrigPoly::zero(self.space.clone(), self.base.clone());
        for (&m, p) in &self.cos {
            out.cos.insert(m, p.neg());
        }
        for (&m, p) in &self.sin {
            out.sin.insert(m, p.neg());
        }
        out
    }

    pub fn scale(&self, c: &Coeff) -> TrigPoly {
        let mut out = TrigPoly::zero(self.space.clone(), self.base.clone());
        for (&m, p) in &self.cos {
            let sp = p.scale(c);
            if !sp.is_zero() {
                out.cos.insert(m, sp);
            }
        }
        for (&m, p) in &self.sin {
            let sp = p.scale(c);
            if !sp.is_zero() {
                out.sin.insert(m, sp);
            }
        }
        out
    }

    /// Product via the product-to-sum identities; harmonics stay integral.
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        self.compatible(other);
        let half = Rat::new(1.into(), 2.into());
        let mut out = TrigPoly::zero(self.space.clone(), self.base.clone());
        for (&m, p) in &self.cos {
            for (&n, q) in &other.cos {
                // cos cos = (cos(m-n) + cos(m+n)) / 2
                let pq = p.mul(q).scale_rat(&half);
                out.insert_cos(m.abs_diff(n), pq.clone());
                out.insert_cos(m + n, pq);
            }
            for (&n, q) in &other.sin {
                // cos(m) sin(n) = (sin(m+n) - sin(m-n)) / 2
                let pq = p.mul(q).scale_rat(&half);
                out.insert_sin(m + n, pq.clone());
                if n >= m {
                    out.insert_sin(n - m, pq);
                } else {
                    out.insert_sin(m - n, pq.neg());
                }
            }
        }
        for (&m, p) in &self.sin {
            for (&n, q) in &other.cos {
                // sin(m) cos(n) = (sin(m+n) + sin(m-n)) / 2
                let pq = p.mul(q).scale_rat(&half);
                out.insert_sin(m + n, pq.clone());
                if m >= n {
                    out.insert_sin(m - n, pq);
                } else {
                    out.insert_sin(n - m, pq.neg());
                }
            }
            for (&n, q) in &other.sin {
                // sin sin = (cos(m-n) - cos(m+n)) / 2
                let pq = p.mul(q).scale_rat(&half);
                out.insert_cos(m.abs_diff(n), pq.clone());
                out.insert_cos(m + n, pq.neg());
            }
        }
        out
    }

    pub fn pow(&self, e: u16) -> TrigPoly {
        let mut out = TrigPoly::constant_poly(
            Poly::constant(self.space.clone(), Coeff::one()),
            self.base.clone(),
        );
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Mean over one period: the zero-frequency cosine coefficient.
    pub fn mean(&self) -> Poly {
        self.cos_mode(0)
    }

    /// Time derivative along the flow.
    pub fn d_dt(&self) -> TrigPoly {
        let mut out = TrigPoly::zero(self.space.clone(), self.base.clone());
        for (&m, p) in &self.cos {
            if m == 0 {
                continue;
            }
            let w = Rat::from_integer(m.into()) * &self.base;
            out.insert_sin(m, p.scale_rat(&(-w)));
        }
        for (&m, p) in &self.sin {
            let w = Rat::from_integer(m.into()) * &self.base;
            out.insert_cos(m, p.scale_rat(&w));
        }
        out
    }

    /// Value at the angle whose base-frequency cosine and sine are (c, s);
    /// higher harmonics come from the exact angle-addition recurrence.
    pub fn eval_at_cs(&self, c: &Rat, s: &Rat) -> Poly {
        let top = self.top_mode();
        let mut cs = Vec::with_capacity(top as usize + 1);
        let mut sn = Vec::with_capacity(top as usize + 1);
        cs.push(Rat::from_integer(1.into()));
        sn.push(Rat::zero());
        for m in 1..=top {
            let cm = &cs[(m - 1) as usize] * c - &sn[(m - 1) as usize] * s;
            let sm = &sn[(m - 1) as usize] * c + &cs[(m - 1) as usize] * s;
            cs.push(cm);
            sn.push(sm);
        }
        let mut acc = Poly::zero(self.space.clone());
        for (&m, p) in &self.cos {
            acc = acc.add(&p.scale_rat(&cs[m as usize]));
        }
        for (&m, p) in &self.sin {
            acc = acc.add(&p.scale_rat(&sn[m as usize]));
        }
        acc
    }

    /// The value at t = 0 of the zero-mean antiderivative along the flow.
    /// Fails if the mean is nonzero; constants have no periodic primitive.
    pub fn fourier_antiderivative(&self) -> Result<Poly, StarkError> {
        if !self.mean().is_zero() {
            return Err(StarkError::HomologicalMean);
        }
        let mut acc = Poly::zero(self.space.clone());
        for (&m, p) in &self.sin {
            let w = Rat::from_integer(m.into()) * &self.base;
            acc = acc.add(&p.scale_rat(&(-Rat::from_integer(1.into()) / w)));
        }
        Ok(acc)
    }

    /// The time-weighted period integral (1/T) int_0^T t f(t) dt. For a
    /// zero-mean input this is the antiderivative above; a nonzero mean
    /// contributes (T/2) mean, which brings in one power of pi.
    pub fn weighted_time_average(&self) -> Poly {
        let half_period = Coeff::pi_term(Rat::from_integer(1.into()) / &self.base, 1);
        let mut acc = self.mean().scale(&half_period);
        for (&m, p) in &self.sin {
            let w = Rat::from_integer(m.into()) * &self.base;
            acc = acc.add(&p.scale_rat(&(-Rat::from_integer(1.into()) / w)));
        }
        acc
    }
}

fn rat2() -> Rat {
    Rat::from_integer(2.into())
}

/// Oscillator flow upstairs: every (q_i, p_i) pair turns once per period.
pub fn x_h2() -> FlowSpec {
    FlowSpec::new(
        crate::space::canonical(),
        Rat::from_integer(1.into()),
        &[("q1", "p1", 1), ("q2", "p2", 1), ("q3", "p3", 1), ("q4", "p4", 1)],
    )
}

/// Flow of the vertical angular-momentum-like integral upstairs; the first
/// two pairs turn against the last two.
pub fn x_k3() -> FlowSpec {
    FlowSpec::new(
        crate::space::canonical(),
        Rat::from_integer(1.into()),
        &[("q1", "p1", -1), ("q2", "p2", -1), ("q3", "p3", 1), ("q4", "p4", 1)],
    )
}

/// Flow of the third angular momentum component upstairs.
pub fn x_l3() -> FlowSpec {
    FlowSpec::new(
        crate::space::canonical(),
        Rat::from_integer(1.into()),
        &[("q1", "q2", 1), ("q3", "q4", -1), ("p1", "p2", 1), ("p3", "p4", -1)],
    )
}

/// Flow of the constraint: the circle action whose invariants everything
/// downstairs is written in.
pub fn x_xi() -> FlowSpec {
    FlowSpec::new(
        crate::space::canonical(),
        Rat::from_integer(1.into()),
        &[("q1", "q2", -1), ("q3", "q4", -1), ("p1", "p2", -1), ("p3", "p4", -1)],
    )
}

/// Induced oscillator flow on the invariants: (U, V) turns at twice the
/// upstairs frequency, everything else is fixed.
pub fn y_h2() -> FlowSpec {
    FlowSpec::new(
        crate::space::invariant(),
        rat2(),
        &[("U1", "V1", 1), ("U2", "V2", 1), ("U3", "V3", 1), ("U4", "V4", 1)],
    )
}

/// Induced flow of K3 on the invariants, used by the second normalization.
pub fn y_k3() -> FlowSpec {
    FlowSpec::new(
        crate::space::invariant(),
        rat2(),
        &[("K1", "L2", -1), ("K2", "L1", 1), ("U1", "U4", -1), ("V1", "V4", -1)],
    )
}

/// Residual circle action on the product of spheres: K3 = (xi3 + eta3) / 2
/// under the abstract bracket rotates the equatorial pairs oppositely at
/// half speed.
pub fn z_k3() -> FlowSpec {
    FlowSpec::new(
        crate::space::xieta(),
        Rat::new(1.into(), 2.into()),
        &[("xi1", "xi2", -1), ("eta1", "eta2", 1)],
    )
}

/// Mean of cos^j sin^k over the circle: the double-factorial moment formula,
/// zero unless both exponents are even.
pub fn circle_moment(j: u32, k: u32) -> Rat {
    if j % 2 == 1 || k % 2 == 1 {
        return Rat::zero();
    }
    fn dbl(n: i64) -> i64 {
        if n <= 0 {
            1
        } else {
            n * dbl(n - 2)
        }
    }
    Rat::new(
        (dbl(j as i64 - 1) * dbl(k as i64 - 1)).into(),
        dbl((j + k) as i64).into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gens;
    use crate::poly::{q, qi};
    use crate::sample::{rational_rotation, Sampler};
    use crate::space;

    #[test]
    fn flow_specs_match_their_hamiltonians() {
        let canon = Structure::Canonical;
        let inv = gens::invariant_structure();
        for (flow, name) in [(x_h2(), "H2"), (x_k3(), "K3"), (x_l3(), "L3"), (x_xi(), "Xi")] {
            flow.check_against(&canon, gens::table().get(name)).unwrap();
        }
        y_h2().check_against(&inv, &gens::inv_var("H2")).unwrap();
        y_k3().check_against(&inv, &gens::inv_var("K3")).unwrap();
    }

    #[test]
    fn single_pair_averages_match_the_moment_formula() {
        // independent oracle: binomial expansion with circle moments
        let s = space::canonical();
        let flow = x_h2();
        let binom = |n: u16, r: u16| -> i64 {
            let mut acc = 1i64;
            for i in 0..r {
                acc = acc * (n - i) as i64 / (i + 1) as i64;
            }
            acc
        };
        for (a, b) in [(2u16, 0u16), (1, 1), (4, 0), (2, 2), (3, 1), (6, 0), (3, 3)] {
            let f = Poly::var(s.clone(), "q1").unwrap().pow(a as u32).mul(
                &Poly::var(s.clone(), "p1").unwrap().pow(b as u32),
            );
            let got = flow.average(&f);
            let mut oracle = Poly::zero(s.clone());
            for i in 0..=a {
                for j in 0..=b {
                    let qexp = (i + j) as u32;
                    let pexp = (a - i + b - j) as u32;
                    let csexp = (i + b - j) as u32;
                    let snexp = (a - i + j) as u32;
                    let sign = if j % 2 == 1 { -1 } else { 1 };
                    let coeff = q(sign * binom(a, i) * binom(b, j), 1)
                        * circle_moment(csexp, snexp);
                    let term = Poly::var(s.clone(), "q1")
                        .unwrap()
                        .pow(qexp)
                        .mul(&Poly::var(s.clone(), "p1").unwrap().pow(pexp))
                        .scale_rat(&coeff);
                    oracle = oracle.add(&term);
                }
            }
            assert_eq!(got, oracle, "monomial q1^{a} p1^{b}");
        }
    }

    #[test]
    fn pullback_evaluates_to_the_rotated_point() {
        let mut sampler = Sampler::new(23);
        let flow = y_h2();
        let f = gens::inv_var("U4")
            .mul(&gens::inv_var("V1"))
            .add(&gens::inv_var("H2").mul(&gens::inv_var("K3")))
            .sub(&gens::inv_var("U1").pow(3));
        let tp = flow.pullback(&f);
        let pt_can = sampler.constraint_point();
        let pt = gens::push_forward(&pt_can).unwrap();
        for t in [q(1, 3), q(-2, 1), q(5, 4)] {
            let (c, s) = rational_rotation(&t);
            let lhs = tp.eval_at_cs(&c, &s).eval_exact(&pt).unwrap();
            let rhs = f.eval_exact(&flow.rotate_point(&pt, &c, &s)).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn derivative_of_pullback_is_pullback_of_bracket() {
        let flow = y_h2();
        let inv = gens::invariant_structure();
        let f = gens::inv_var("U4").mul(&gens::inv_var("V1")).add(
            &gens::inv_var("U1").mul(&gens::inv_var("U4")),
        );
        let lhs = flow.pullback(&f).d_dt();
        let dot = inv.bracket(&f, &gens::inv_var("H2"));
        let rhs = flow.pullback(&dot);
        assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn homological_solvers_agree_up_to_the_mean_term() {
        let flow = y_h2();
        let f = gens::inv_var("U4").mul(&gens::inv_var("V1"));
        let tp = flow.pullback(&f);
        let weighted = tp.weighted_time_average();
        let mean = tp.mean();
        let centred = tp.sub(&TrigPoly::constant_poly(mean.clone(), tp.base_frequency().clone()));
        let plain = centred.fourier_antiderivative().unwrap();
        let half_period = Coeff::pi_term(q(1, 1) / tp.base_frequency(), 1);
        assert_eq!(weighted, plain.add(&mean.scale(&half_period)));
        assert!(matches!(
            tp.fourier_antiderivative(),
            Err(StarkError::HomologicalMean)
        ));
    }

    #[test]
    fn antiderivative_solves_the_homological_equation() {
        // Y(F) = g - <g> exactly, checked as trig polynomials
        let flow = y_h2();
        let inv = gens::invariant_structure();
        let g = gens::inv_var("U4").mul(&gens::inv_var("V1")).add(
            &gens::inv_var("K3").mul(&gens::inv_var("V4")),
        );
        let tp = flow.pullback(&g);
        let mean = tp.mean();
        let centred = tp.sub(&TrigPoly::constant_poly(mean.clone(), tp.base_frequency().clone()));
        let f = centred.fourier_antiderivative().unwrap();
        let lie = inv.bracket(&f, &gens::inv_var("H2"));
        assert_eq!(lie, g.sub(&mean));
    }

    #[test]
    fn circle_moments_pin_classical_values() {
        assert_eq!(circle_moment(0, 0), qi(1));
        assert_eq!(circle_moment(2, 0), q(1, 2));
        assert_eq!(circle_moment(4, 0), q(3, 8));
        assert_eq!(circle_moment(2, 2), q(1, 8));
        assert_eq!(circle_moment(6, 0), q(5, 16));
        assert_eq!(circle_moment(1, 2), q(0, 1));
    }

    #[test]
    fn product_to_sum_closure() {
        let s = space::invariant();
        let base = q(2, 1);
        let mut a = TrigPoly::zero(s.clone(), base.clone());
        a.insert_cos(1, gens::inv_var("U1"));
        a.insert_sin(2, gens::inv_var("V1"));
        let b = a.mul(&a);
        // cos^2 contributes a mean; sin(2)cos(1) has no mode 0
        assert_eq!(
            b.mean(),
            gens::inv_var("U1").pow(2).scale_rat(&q(1, 2)).add(
                &gens::inv_var("V1").pow(2).scale_rat(&q(1, 2)),
            ),
        );
        assert_eq!(b.top_mode(), 4);
        let back = b.eval_at_cs(&q(1, 1), &q(0, 1));
        assert_eq!(back, a.eval_at_cs(&q(1, 1), &q(0, 1)).pow(2));
    }
}
