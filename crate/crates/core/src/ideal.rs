//! Polynomial ideals, Groebner bases, and normal forms.
//!
//! Membership tests and canonical representatives mod an ideal are the
//! workhorse behind every "equal on the constraint set" claim in this crate:
//! f = g on the zero set of an ideal I iff f - g reduces to zero against a
//! Groebner basis of I. The monomial order is the graded lexicographic order
//! baked into `Poly`.
//!
//! Leading coefficients of ideal generators must be free of pi so that
//! division stays inside the coefficient ring; reduced polynomials may carry
//! pi freely.

use crate::coeff::Rat;
use crate::error::StarkError;
use crate::poly::Poly;
use crate::space::{require_same, Space};
use num_traits::One;

/// A Groebner basis, inter-reduced, leading coefficients scaled to one.
#[derive(Debug, Clone)]
pub struct GroebnerBasis {
    space: Space,
    polys: Vec<Poly>,
}

impl GroebnerBasis {
    /// Complete `gens` to a Groebner basis by Buchberger's algorithm.
    pub fn new(space: Space, gens: &[Poly]) -> Result<Self, StarkError> {
        let mut basis: Vec<Poly> = Vec::new();
        for g in gens {
            require_same(&space, g.space())?;
            if g.is_zero() {
                continue;
            }
            basis.push(monic(g)?);
        }
        if basis.is_empty() {
            return Ok(GroebnerBasis { space, polys: basis });
        }

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..basis.len() {
            for j in (i + 1)..basis.len() {
                pairs.push((i, j));
            }
        }
        while let Some((i, j)) = pairs.pop() {
            let (mi, _) = basis[i].leading().expect("basis polys are nonzero");
            let (mj, _) = basis[j].leading().expect("basis polys are nonzero");
            // Buchberger's coprimality criterion.
            if mi.lcm(&mj).total_degree() == mi.total_degree() + mj.total_degree() {
                continue;
            }
            let s = s_polynomial(&basis[i], &basis[j]);
            let r = reduce(&s, &basis);
            if !r.is_zero() {
                let r = monic(&r)?;
                for k in 0..basis.len() {
                    pairs.push((k, basis.len()));
                }
                basis.push(r);
            }
        }

        // Inter-reduce until stable.
        loop {
            let mut changed = false;
            let mut next: Vec<Poly> = Vec::new();
            for i in 0..basis.len() {
                let others: Vec<Poly> = basis
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| p.clone())
                    .collect();
                let r = reduce(&basis[i], &others);
                if r != basis[i] {
                    changed = true;
                }
                if !r.is_zero() {
                    next.push(monic(&r)?);
                }
            }
            next.sort_by(|a, b| {
                let (ma, _) = a.leading().expect("nonzero");
                let (mb, _) = b.leading().expect("nonzero");
                ma.cmp(mb)
            });
            next.dedup();
            basis = next;
            if !changed {
                break;
            }
        }

        Ok(GroebnerBasis { space, polys: basis })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    /// Canonical representative of f mod the ideal.
    pub fn normal_form(&self, f: &Poly) -> Poly {
        reduce(f, &self.polys)
    }

    /// Ideal membership: does f vanish on the variety cut out by the basis?
    pub fn reduces_to_zero(&self, f: &Poly) -> bool {
        self.normal_form(f).is_zero()
    }

    /// Equality of f and g as functions on the variety.
    pub fn equal_mod(&self, f: &Poly, g: &Poly) -> bool {
        self.reduces_to_zero(&f.sub(g))
    }
}

/// Scale a nonzero polynomial so its leading coefficient is one.
fn monic(p: &Poly) -> Result<Poly, StarkError> {
    let (_, c) = p.leading().expect("monic of zero polynomial");
    if !c.is_rational() {
        return Err(StarkError::Verification(
            "ideal generator has a pi-dependent leading coefficient".into(),
        ));
    }
    let lc = c.rational_part().clone();
    Ok(p.scale_rat(&(Rat::one() / lc)))
}

fn s_polynomial(f: &Poly, g: &Poly) -> Poly {
    let (mf, _) = f.leading().expect("nonzero");
    let (mg, _) = g.leading().expect("nonzero");
    let lcm = mf.lcm(mg);
    let a = f.mul_monomial(&lcm.div(mf));
    let b = g.mul_monomial(&lcm.div(mg));
    a.sub(&b)
}

/// Multivariate division: remainder of f on division by `basis` (all monic).
fn reduce(f: &Poly, basis: &[Poly]) -> Poly {
    let space = f.space().clone();
    let mut work = f.clone();
    let mut rem = Poly::zero(space.clone());
    'outer: while let Some((mono, coeff)) = work.leading() {
        let mono = mono.clone();
        let coeff = coeff.clone();
        for g in basis {
            let (mg, _) = match g.leading() {
                Some(l) => l,
                None => continue,
            };
            if mg.divides(&mono) {
                let q = mono.div(mg);
                let sub = g.mul_monomial(&q).scale(&coeff);
                work = work.sub(&sub);
                continue 'outer;
            }
        }
        let mut t = Poly::zero(space.clone());
        t.add_term(mono.clone(), coeff.clone());
        rem = rem.add(&t);
        work = work.sub(&t);
    }
    rem
}

/// Remainder of f on division by a single polynomial (principal ideal case,
/// no completion needed).
pub fn remainder_single(f: &Poly, g: &Poly) -> Result<Poly, StarkError> {
    require_same(f.space(), g.space())?;
    let g = monic(g)?;
    Ok(reduce(f, std::slice::from_ref(&g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::qi;
    use crate::space;

    fn v(s: &Space, n: &str) -> Poly {
        Poly::var(s.clone(), n).unwrap()
    }

    /// <x^2 - y, x^3 - z> with x,y,z = q1,q2,q3 completes to the textbook
    /// basis {x^2 - y, xy - z, xz - y^2, y^3 - z^2}.
    #[test]
    fn buchberger_completion() {
        let s = space::canonical();
        let x = v(&s, "q1");
        let y = v(&s, "q2");
        let z = v(&s, "q3");
        let g1 = x.pow(2).sub(&y);
        let g2 = x.pow(3).sub(&z);
        let gb = GroebnerBasis::new(s.clone(), &[g1.clone(), g2.clone()]).unwrap();
        assert_eq!(gb.polys().len(), 4);
        let expected = [
            x.pow(2).sub(&y),
            x.mul(&y).sub(&z),
            x.mul(&z).sub(&y.pow(2)),
            y.pow(3).sub(&z.pow(2)),
        ];
        for e in &expected {
            assert!(gb.polys().contains(e), "missing {e:?}");
        }
        // x^4 == y^2 on the variety.
        assert_eq!(gb.normal_form(&x.pow(4)), y.pow(2));
        assert!(gb.reduces_to_zero(&x.pow(6).sub(&z.pow(2))));
        assert!(!gb.reduces_to_zero(&x));
    }

    #[test]
    fn normal_form_is_idempotent_and_linear_over_the_ideal() {
        let s = space::canonical();
        let x = v(&s, "q1");
        let y = v(&s, "q2");
        let z = v(&s, "q3");
        let gb =
            GroebnerBasis::new(s.clone(), &[x.pow(2).sub(&y), x.pow(3).sub(&z)]).unwrap();
        let f = x.pow(5).add(&y.mul(&z)).add(&Poly::from_rat(s.clone(), qi(7)));
        let nf = gb.normal_form(&f);
        assert_eq!(gb.normal_form(&nf), nf);
        // Adding a multiple of a generator never changes the normal form.
        let shifted = f.add(&x.pow(2).sub(&y).mul(&y.pow(3)));
        assert_eq!(gb.normal_form(&shifted), nf);
    }

    #[test]
    fn principal_remainder() {
        let s = space::canonical();
        let x = v(&s, "q1");
        let p = v(&s, "p1");
        let g = x.mul(&p).sub(&Poly::from_rat(s.clone(), qi(1)));
        let f = x.pow(2).mul(&p.pow(2));
        // x^2 p^2 = (xp - 1)(xp + 1) + 1.
        let r = remainder_single(&f, &g).unwrap();
        assert_eq!(r, Poly::from_rat(s.clone(), qi(1)));
    }

    #[test]
    fn pi_coefficients_reduce_fine() {
        let s = space::canonical();
        let x = v(&s, "q1");
        let y = v(&s, "q2");
        let gb = GroebnerBasis::new(s.clone(), &[x.pow(2).sub(&y)]).unwrap();
        let f = x.pow(2).scale(&crate::coeff::Coeff::pi_term(qi(3), 1));
        let nf = gb.normal_form(&f);
        assert_eq!(nf, y.scale(&crate::coeff::Coeff::pi_term(qi(3), 1)));
    }
}
