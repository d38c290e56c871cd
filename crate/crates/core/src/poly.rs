//! Sparse multivariate polynomials over the pi-extended rationals.
//!
//! Monomials are exponent vectors ordered graded-lexicographically: higher
//! total degree wins, ties break lexicographically with earlier variables
//! more significant. Terms live in a BTreeMap keyed by monomial, so iteration
//! is deterministic and the leading term is the last entry.

use crate::coeff::{rat_to_f64, Coeff, Rat};
use crate::error::StarkError;
use crate::space::{require_same, Point, Space};
use num_traits::Zero;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// Exponent vector. Length always equals the space dimension.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct Monomial(pub Vec<u16>);

impl Monomial {
    pub fn unit(dim: usize) -> Self {
        Monomial(vec![0; dim])
    }

    pub fn var(dim: usize, idx: usize) -> Self {
        let mut m = Self::unit(dim);
        m.0[idx] = 1;
        m
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_add(*b).expect("exponent overflow"))
                .collect(),
        )
    }

    /// Componentwise divisibility.
    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn lcm(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| *a.max(b))
                .collect(),
        )
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {
                // lexicographic: earlier variable with larger exponent wins
                for (a, b) in self.0.iter().zip(&other.0) {
                    match a.cmp(b) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                Ordering::Equal
            }
            ord => ord,
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial attached to a variable space.
#[derive(Clone)]
pub struct Poly {
    space: Space,
    terms: BTreeMap<Monomial, Coeff>,
}

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        self.space.id == other.space.id && self.terms == other.terms
    }
}

impl Eq for Poly {}

impl Poly {
    pub fn zero(space: Space) -> Self {
        Poly {
            space,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(space: Space, c: Coeff) -> Self {
        let mut p = Self::zero(space);
        if !c.is_zero() {
            p.terms.insert(Monomial::unit(p.space.dim()), c);
        }
        p
    }

    pub fn one(space: Space) -> Self {
        Self::constant(space, Coeff::one())
    }

    pub fn from_rat(space: Space, r: Rat) -> Self {
        Self::constant(space, Coeff::from_rat(r))
    }

    pub fn var(space: Space, name: &str) -> Result<Self, StarkError> {
        let idx = space.index_of(name)?;
        let mut p = Self::zero(space);
        p.terms
            .insert(Monomial::var(p.space.dim(), idx), Coeff::one());
        Ok(p)
    }

    pub fn var_idx(space: Space, idx: usize) -> Self {
        let mut p = Self::zero(space);
        p.terms
            .insert(Monomial::var(p.space.dim(), idx), Coeff::one());
        p
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(Monomial::total_degree)
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, var_idx: usize) -> u16 {
        self.terms
            .keys()
            .map(|m| m.0[var_idx])
            .max()
            .unwrap_or(0)
    }

    /// Leading (maximal) term under the graded-lex order.
    pub fn leading(&self) -> Option<(&Monomial, &Coeff)> {
        self.terms.iter().next_back()
    }

    pub fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        require_same(&self.space, &other.space).expect("space mismatch in add");
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        let mut out = Poly::zero(self.space.clone());
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        require_same(&self.space, &other.space).expect("space mismatch in mul");
        let mut out = Poly::zero(self.space.clone());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    /// Multiply every term by one monomial. Cheaper than `mul` with a
    /// single-term polynomial and cannot merge terms.
    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        let mut out = Poly::zero(self.space.clone());
        for (ma, c) in &self.terms {
            out.terms.insert(ma.mul(m), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Coeff) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.space.clone());
        }
        let mut out = Poly::zero(self.space.clone());
        for (m, a) in &self.terms {
            let v = a * c;
            if !v.is_zero() {
                out.terms.insert(m.clone(), v);
            }
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Poly {
        self.scale(&Coeff::from_rat(r.clone()))
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one(self.space.clone());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, var_idx: usize) -> Poly {
        let mut out = Poly::zero(self.space.clone());
        for (m, c) in &self.terms {
            let e = m.0[var_idx];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[var_idx] = e - 1;
            out.add_term(dm, c.scale(&Rat::from_integer(num_bigint::BigInt::from(e))));
        }
        out
    }

    /// Substitution homomorphism: each variable of this polynomial's space is
    /// replaced by the given image polynomial (all in one shared target
    /// space). Powers of images are cached per call.
    pub fn substitute(&self, target: &Space, images: &[Poly]) -> Result<Poly, StarkError> {
        assert_eq!(
            images.len(),
            self.space.dim(),
            "one image per source variable required"
        );
        for im in images {
            require_same(target, im.space())?;
        }
        let mut power_cache: Vec<Vec<Poly>> = images
            .iter()
            .map(|im| vec![Poly::one(target.clone()), im.clone()])
            .collect();
        let mut out = Poly::zero(target.clone());
        for (m, c) in &self.terms {
            let mut term = Poly::constant(target.clone(), c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let cache = &mut power_cache[i];
                while cache.len() <= e as usize {
                    let next = cache.last().unwrap().mul(&images[i]);
                    cache.push(next);
                }
                term = term.mul(&cache[e as usize]);
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Set one variable to an exact rational, staying in the same space.
    pub fn set_var(&self, name: &str, value: &Rat) -> Result<Poly, StarkError> {
        let idx = self.space.index_of(name)?;
        let mut out = Poly::zero(self.space.clone());
        for (m, c) in &self.terms {
            let e = m.0[idx];
            let mut nm = m.clone();
            nm.0[idx] = 0;
            if e == 0 {
                out.add_term(nm, c.clone());
            } else {
                let mut f = Rat::from_integer(1.into());
                for _ in 0..e {
                    f *= value;
                }
                out.add_term(nm, c.scale(&f));
            }
        }
        Ok(out)
    }

    /// Terms whose exponent of the given variable equals d, with that
    /// variable's exponent cleared. Grading helper for series bookkeeping.
    pub fn coeff_of(&self, name: &str, d: u16) -> Result<Poly, StarkError> {
        let idx = self.space.index_of(name)?;
        let mut out = Poly::zero(self.space.clone());
        for (m, c) in &self.terms {
            if m.0[idx] == d {
                let mut nm = m.clone();
                nm.0[idx] = 0;
                out.add_term(nm, c.clone());
            }
        }
        Ok(out)
    }

    /// Exact evaluation at a rational point of the same space.
    pub fn eval_exact(&self, p: &Point) -> Result<Coeff, StarkError> {
        require_same(&self.space, &p.space)?;
        let mut acc = Coeff::zero();
        for (m, c) in &self.terms {
            let mut f = Rat::from_integer(1.into());
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    f *= &p.values[i];
                }
            }
            acc += &c.scale(&f);
        }
        Ok(acc)
    }

    /// Floating point evaluation. Exactness-critical checks must use
    /// `eval_exact`; this is for the numerical cross-checks only.
    pub fn eval_f64(&self, vals: &[f64]) -> f64 {
        assert_eq!(vals.len(), self.space.dim());
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64();
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t *= vals[i];
                }
            }
            acc += t;
        }
        acc
    }

    /// True when no coefficient carries a pi part.
    pub fn is_pi_free(&self) -> bool {
        self.terms.values().all(Coeff::is_rational)
    }

    /// Split into (pi-free part, pi-carrying part).
    pub fn split_pi(&self) -> (Poly, Poly) {
        let mut free = Poly::zero(self.space.clone());
        let mut with = Poly::zero(self.space.clone());
        for (m, c) in &self.terms {
            let (cf, cw) = c.split_pi();
            free.add_term(m.clone(), cf);
            with.add_term(m.clone(), cw);
        }
        (free, with)
    }

    /// Sum of polynomials, all in one space.
    pub fn sum<'a>(space: Space, parts: impl IntoIterator<Item = &'a Poly>) -> Poly {
        let mut acc = Poly::zero(space);
        for p in parts {
            acc = acc.add(p);
        }
        acc
    }

    /// Scale every coefficient by a rational function of no variables; used
    /// by the time rescaling step (division by a nonzero rational).
    pub fn div_rat(&self, r: &Rat) -> Poly {
        assert!(!r.is_zero(), "division by zero rational");
        self.scale_rat(&r.recip())
    }

    /// Evaluate only the parameter block to f64, returning a closure-friendly
    /// compiled form over the main variables.
    pub fn compile(&self, param_values: &[(&str, f64)]) -> Result<CompiledPoly, StarkError> {
        let dim = self.space.dim();
        let n_main = self.space.n_main();
        let mut pvals = vec![f64::NAN; dim];
        for (name, v) in param_values {
            let i = self.space.index_of(name)?;
            assert!(i >= n_main, "{name} is not a parameter");
            pvals[i] = *v;
        }
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            let mut coeff = c.to_f64();
            let mut exps = Vec::new();
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if i < n_main {
                    exps.push((i, e));
                } else {
                    assert!(
                        !pvals[i].is_nan(),
                        "parameter {} not bound at compile time",
                        self.space.name(i)
                    );
                    for _ in 0..e {
                        coeff *= pvals[i];
                    }
                }
            }
            if coeff != 0.0 {
                terms.push((coeff, exps));
            }
        }
        Ok(CompiledPoly { n_main, terms })
    }
}

/// Flat f64 form of a polynomial over the main variables of its space, with
/// all parameters already bound. Built once, evaluated many times by the
/// integrators.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    n_main: usize,
    terms: Vec<(f64, Vec<(usize, u16)>)>,
}

impl CompiledPoly {
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_main);
        let mut acc = 0.0;
        for (c, exps) in &self.terms {
            let mut t = *c;
            for &(i, e) in exps {
                for _ in 0..e {
                    t *= x[i];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn n_main(&self) -> usize {
        self.n_main
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::grammar::emit(self))
    }
}

/// Exact rational evaluation helper for pi-free results.
pub fn expect_rat(c: &Coeff) -> &Rat {
    assert!(c.is_rational(), "unexpected pi part in coefficient");
    c.rational_part()
}

pub use crate::coeff::rat as q;
pub use crate::coeff::rat_int as qi;

/// Convenience: f64 value of an exact rational.
pub fn qf(r: &Rat) -> f64 {
    rat_to_f64(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space;

    fn var(s: &Space, n: &str) -> Poly {
        Poly::var(s.clone(), n).unwrap()
    }

    #[test]
    fn graded_lex_order() {
        let dim = 3;
        let m = |e: [u16; 3]| Monomial(e.to_vec());
        assert!(m([1, 0, 0]) > m([0, 1, 0])); // same degree, earlier var wins
        assert!(m([0, 2, 0]) > m([1, 0, 0])); // higher degree wins
        assert!(m([1, 1, 0]) > m([1, 0, 1]));
        assert_eq!(m([0, 0, 0]), Monomial::unit(dim));
    }

    #[test]
    fn arithmetic_roundtrip() {
        let s = space::canonical();
        let q1 = var(&s, "q1");
        let p1 = var(&s, "p1");
        let a = q1.add(&p1); // q1 + p1
        let b = q1.sub(&p1); // q1 - p1
        let prod = a.mul(&b); // q1^2 - p1^2
        let expect = q1.mul(&q1).sub(&p1.mul(&p1));
        assert_eq!(prod, expect);
        assert_eq!(prod.total_degree(), 2);
        assert!(prod.sub(&expect).is_zero());
    }

    #[test]
    fn derivative_and_leibniz() {
        let s = space::canonical();
        let q1 = var(&s, "q1");
        let p1 = var(&s, "p1");
        let f = q1.mul(&q1).mul(&p1); // q1^2 p1
        let i_q1 = s.index_of("q1").unwrap();
        let df = f.derivative(i_q1);
        let expect = q1.mul(&p1).scale(&Coeff::from_int(2));
        assert_eq!(df, expect);
        // product rule on (q1 p1) * (q1 + p1)
        let g = q1.mul(&p1);
        let h = q1.add(&p1);
        let lhs = g.mul(&h).derivative(i_q1);
        let rhs = g.derivative(i_q1).mul(&h).add(&g.mul(&h.derivative(i_q1)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn substitution_is_a_homomorphism() {
        let inv = space::invariant();
        let can = space::canonical();
        let f = Poly::var(inv.clone(), "H2")
            .unwrap()
            .mul(&Poly::var(inv.clone(), "K3").unwrap());
        // images: H2 -> q1^2, K3 -> p1, rest -> 0 or matching params
        let mut images = vec![Poly::zero(can.clone()); inv.dim()];
        images[inv.index_of("H2").unwrap()] = var(&can, "q1").pow(2);
        images[inv.index_of("K3").unwrap()] = var(&can, "p1");
        let out = f.substitute(&can, &images).unwrap();
        assert_eq!(out, var(&can, "q1").pow(2).mul(&var(&can, "p1")));
    }

    #[test]
    fn exact_eval_and_compile_agree() {
        let s = space::canonical();
        let f = var(&s, "q1")
            .pow(2)
            .scale(&Coeff::from_ratio(1, 2))
            .add(&var(&s, "eps").mul(&var(&s, "p2")));
        let mut vals = vec![Rat::zero(); s.dim()];
        vals[s.index_of("q1").unwrap()] = q(3, 1);
        vals[s.index_of("p2").unwrap()] = q(1, 4);
        vals[s.index_of("eps").unwrap()] = q(1, 100);
        let pt = Point::new(s.clone(), vals);
        let exact = f.eval_exact(&pt).unwrap();
        assert!(exact.eq_rat(&(q(9, 2) + q(1, 400))));
        let compiled = f
            .compile(&[("h", 0.0), ("eps", 0.01), ("beta", 0.0)])
            .unwrap();
        let x = [3.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0];
        assert!((compiled.eval(&x) - exact.to_f64()).abs() < 1e-15);
    }

    #[test]
    fn set_var_and_coeff_of() {
        let s = space::invariant();
        let f = var(&s, "H2")
            .mul(&var(&s, "eps"))
            .add(&var(&s, "K3").mul(&var(&s, "eps").pow(2)));
        let at_zero = f.set_var("eps", &Rat::zero()).unwrap();
        assert!(at_zero.is_zero());
        let c1 = f.coeff_of("eps", 1).unwrap();
        assert_eq!(c1, var(&s, "H2"));
        let c2 = f.coeff_of("eps", 2).unwrap();
        assert_eq!(c2, var(&s, "K3"));
    }
}
