//! Poisson brackets.
//!
//! Two structures are used: the canonical bracket on the oscillator phase
//! space ({q_i, p_j} = delta_ij), and table-driven brackets on the invariant
//! and su(2) x su(2) spaces, where the bracket of two basis variables is a
//! stored polynomial and general brackets extend by the Leibniz rule,
//! {f, g} = sum_ij df/dx_i dg/dx_j {x_i, x_j}.
//!
//! Sign convention used throughout the crate: the derivation attached to a
//! generator G acts as L_G f = {f, G}. Parameters (h, eps, beta, k) are
//! central: all brackets treat them as constants.

use crate::error::StarkError;
use crate::poly::Poly;
use crate::space::{require_same, Space, SpaceId};
use std::sync::Arc;

/// Antisymmetric table of basis brackets over the main variables of a space.
#[derive(Debug)]
pub struct StructureTable {
    space: Space,
    /// entries[i][j] = {x_i, x_j}; dimension n_main x n_main.
    entries: Vec<Vec<Poly>>,
}

impl StructureTable {
    /// Build and validate antisymmetry ({x_i,x_j} + {x_j,x_i} = 0, zero
    /// diagonal).
    pub fn new(space: Space, entries: Vec<Vec<Poly>>) -> Result<Self, StarkError> {
        let n = space.n_main();
        assert_eq!(entries.len(), n);
        for row in &entries {
            assert_eq!(row.len(), n);
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                require_same(&space, e.space())?;
                if i == j && !e.is_zero() {
                    return Err(StarkError::Verification(format!(
                        "structure table has nonzero diagonal at {}",
                        space.name(i)
                    )));
                }
                if !e.add(&entries[j][i]).is_zero() {
                    return Err(StarkError::Verification(format!(
                        "structure table is not antisymmetric at ({}, {})",
                        space.name(i),
                        space.name(j)
                    )));
                }
            }
        }
        Ok(StructureTable { space, entries })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i][j]
    }
}

/// A Poisson structure a bracket can be computed in.
#[derive(Clone, Debug)]
pub enum Structure {
    /// {q_i, p_j} = delta_ij on the canonical space.
    Canonical,
    /// Bracket given by a structure table.
    Table(Arc<StructureTable>),
}

impl Structure {
    pub fn space(&self) -> Space {
        match self {
            Structure::Canonical => crate::space::canonical(),
            Structure::Table(t) => t.space.clone(),
        }
    }

    /// Poisson bracket {f, g}.
    pub fn bracket(&self, f: &Poly, g: &Poly) -> Poly {
        match self {
            Structure::Canonical => canonical_bracket(f, g),
            Structure::Table(t) => table_bracket(t, f, g),
        }
    }

    /// The derivation attached to g: f -> {f, g}.
    pub fn derive_along(&self, f: &Poly, g: &Poly) -> Poly {
        self.bracket(f, g)
    }
}

fn canonical_bracket(f: &Poly, g: &Poly) -> Poly {
    let space = f.space().clone();
    assert_eq!(space.id, SpaceId::Canonical, "canonical bracket needs the canonical space");
    require_same(&space, g.space()).expect("space mismatch in bracket");
    let mut acc = Poly::zero(space);
    for i in 0..4 {
        let qi = i;
        let pi = i + 4;
        let df_q = f.derivative(qi);
        let df_p = f.derivative(pi);
        if !df_q.is_zero() {
            let dg_p = g.derivative(pi);
            if !dg_p.is_zero() {
                acc = acc.add(&df_q.mul(&dg_p));
            }
        }
        if !df_p.is_zero() {
            let dg_q = g.derivative(qi);
            if !dg_q.is_zero() {
                acc = acc.sub(&df_p.mul(&dg_q));
            }
        }
    }
    acc
}

fn table_bracket(t: &StructureTable, f: &Poly, g: &Poly) -> Poly {
    require_same(&t.space, f.space()).expect("space mismatch in bracket");
    require_same(&t.space, g.space()).expect("space mismatch in bracket");
    let n = t.space.n_main();
    let df: Vec<Poly> = (0..n).map(|i| f.derivative(i)).collect();
    let dg: Vec<Poly> = (0..n).map(|j| g.derivative(j)).collect();
    let mut acc = Poly::zero(t.space.clone());
    for (i, dfi) in df.iter().enumerate() {
        if dfi.is_zero() {
            continue;
        }
        for (j, dgj) in dg.iter().enumerate() {
            if dgj.is_zero() || t.entries[i][j].is_zero() {
                continue;
            }
            acc = acc.add(&dfi.mul(dgj).mul(&t.entries[i][j]));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::qi;
    use crate::space;

    fn v(s: &Space, n: &str) -> Poly {
        Poly::var(s.clone(), n).unwrap()
    }

    #[test]
    fn canonical_pairs() {
        let s = space::canonical();
        let b = Structure::Canonical;
        for i in 1..=4 {
            for j in 1..=4 {
                let out = b.bracket(&v(&s, &format!("q{i}")), &v(&s, &format!("p{j}")));
                if i == j {
                    assert_eq!(out, Poly::from_rat(s.clone(), qi(1)));
                } else {
                    assert!(out.is_zero());
                }
                assert!(b
                    .bracket(&v(&s, &format!("q{i}")), &v(&s, &format!("q{j}")))
                    .is_zero());
                assert!(b
                    .bracket(&v(&s, &format!("p{i}")), &v(&s, &format!("p{j}")))
                    .is_zero());
            }
        }
    }

    #[test]
    fn antisymmetry_and_leibniz() {
        let s = space::canonical();
        let b = Structure::Canonical;
        let f = v(&s, "q1").mul(&v(&s, "p2")).add(&v(&s, "q3").pow(2));
        let g = v(&s, "p1").mul(&v(&s, "p3")).sub(&v(&s, "q2"));
        let h = v(&s, "q4").mul(&v(&s, "p4"));
        assert!(b.bracket(&f, &g).add(&b.bracket(&g, &f)).is_zero());
        let lhs = b.bracket(&f.mul(&g), &h);
        let rhs = b.bracket(&f, &h).mul(&g).add(&f.mul(&b.bracket(&g, &h)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn jacobi_identity_spot_check() {
        let s = space::canonical();
        let b = Structure::Canonical;
        let f = v(&s, "q1").mul(&v(&s, "q2"));
        let g = v(&s, "p1").mul(&v(&s, "p2"));
        let h = v(&s, "q1").mul(&v(&s, "p1"));
        let j = b
            .bracket(&f, &b.bracket(&g, &h))
            .add(&b.bracket(&g, &b.bracket(&h, &f)))
            .add(&b.bracket(&h, &b.bracket(&f, &g)));
        assert!(j.is_zero());
    }

    #[test]
    fn parameters_are_central() {
        let s = space::canonical();
        let b = Structure::Canonical;
        let f = v(&s, "eps").mul(&v(&s, "q1"));
        let g = v(&s, "p1");
        assert_eq!(b.bracket(&f, &g), v(&s, "eps"));
        assert!(b.bracket(&v(&s, "h"), &v(&s, "beta")).is_zero());
    }
}
