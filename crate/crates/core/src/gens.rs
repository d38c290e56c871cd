//! The sixteen quadratic first integrals of the oscillator circle action.
//!
//! The constraint Xi generates an S^1 action on R^8; the polynomials fixed by
//! it are generated by sixteen quadratics (K, L, H2, Xi, U, V). This module
//! defines them, embeds polynomials in those invariants back into (q, p),
//! derives the full Poisson structure on the invariant variables by exact
//! span decomposition, and exposes the two ideals that decide on-shell
//! identities: <Xi> on the zero level of the constraint and <Xi, H2 - h> on a
//! fixed energy level with symbolic h.

use crate::bracket::{Structure, StructureTable};
use crate::coeff::Rat;
use crate::error::StarkError;
use crate::ideal::GroebnerBasis;
use crate::linalg;
use crate::poly::{Monomial, Poly};
use crate::space::{self, Space};
use num_traits::Zero;
use once_cell::sync::Lazy;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Canonical-space definitions of the sixteen invariant variables, in the
/// index order of the invariant space.
pub struct GeneratorTable {
    canon: Space,
    inv: Space,
    polys: Vec<Poly>,
}

fn prod(s: &Space, a: &str, b: &str) -> Poly {
    Poly::var(s.clone(), a)
        .unwrap()
        .mul(&Poly::var(s.clone(), b).unwrap())
}

/// Signed sum of variable products, then an overall rational scale.
fn quad(s: &Space, scale: Rat, terms: &[(i64, &str, &str)]) -> Poly {
    let mut acc = Poly::zero(s.clone());
    for &(sign, a, b) in terms {
        let t = prod(s, a, b).scale_rat(&Rat::from_integer(sign.into()));
        acc = acc.add(&t);
    }
    acc.scale_rat(&scale)
}

impl GeneratorTable {
    fn build() -> Self {
        let c = space::canonical();
        let inv = space::invariant();
        let one = Rat::from_integer(1.into());
        let half = Rat::new(1.into(), 2.into());
        let defs: Vec<(&str, Poly)> = vec![
            (
                "K1",
                quad(&c, one.clone(), &[(-1, "q1", "q3"), (-1, "q2", "q4"), (-1, "p1", "p3"), (-1, "p2", "p4")]),
            ),
            (
                "K2",
                quad(&c, one.clone(), &[(-1, "q1", "q4"), (1, "q2", "q3"), (-1, "p1", "p4"), (1, "p2", "p3")]),
            ),
            (
                "K3",
                quad(
                    &c,
                    half.clone(),
                    &[
                        (1, "q3", "q3"),
                        (1, "q4", "q4"),
                        (1, "p3", "p3"),
                        (1, "p4", "p4"),
                        (-1, "q1", "q1"),
                        (-1, "q2", "q2"),
                        (-1, "p1", "p1"),
                        (-1, "p2", "p2"),
                    ],
                ),
            ),
            (
                "L1",
                quad(&c, one.clone(), &[(1, "q4", "p1"), (-1, "q3", "p2"), (1, "q2", "p3"), (-1, "q1", "p4")]),
            ),
            (
                "L2",
                quad(&c, one.clone(), &[(1, "q1", "p3"), (1, "q2", "p4"), (-1, "q3", "p1"), (-1, "q4", "p2")]),
            ),
            (
                "L3",
                quad(&c, one.clone(), &[(1, "q3", "p4"), (-1, "q4", "p3"), (1, "q2", "p1"), (-1, "q1", "p2")]),
            ),
            (
                "H2",
                quad(
                    &c,
                    half.clone(),
                    &[
                        (1, "q1", "q1"),
                        (1, "q2", "q2"),
                        (1, "q3", "q3"),
                        (1, "q4", "q4"),
                        (1, "p1", "p1"),
                        (1, "p2", "p2"),
                        (1, "p3", "p3"),
                        (1, "p4", "p4"),
                    ],
                ),
            ),
            (
                "Xi",
                quad(&c, one.clone(), &[(1, "q1", "p2"), (-1, "q2", "p1"), (1, "q3", "p4"), (-1, "q4", "p3")]),
            ),
            (
                "U1",
                quad(&c, one.clone(), &[(-1, "q1", "p1"), (-1, "q2", "p2"), (-1, "q3", "p3"), (-1, "q4", "p4")]),
            ),
            (
                "U2",
                quad(&c, one.clone(), &[(1, "q1", "q3"), (1, "q2", "q4"), (-1, "p1", "p3"), (-1, "p2", "p4")]),
            ),
            (
                "U3",
                quad(&c, one.clone(), &[(1, "q1", "q4"), (-1, "q2", "q3"), (1, "p2", "p3"), (-1, "p1", "p4")]),
            ),
            (
                "U4",
                quad(
                    &c,
                    half.clone(),
                    &[
                        (1, "q1", "q1"),
                        (1, "q2", "q2"),
                        (-1, "q3", "q3"),
                        (-1, "q4", "q4"),
                        (1, "p3", "p3"),
                        (1, "p4", "p4"),
                        (-1, "p1", "p1"),
                        (-1, "p2", "p2"),
                    ],
                ),
            ),
            (
                "V1",
                quad(
                    &c,
                    half,
                    &[
                        (1, "q1", "q1"),
                        (1, "q2", "q2"),
                        (1, "q3", "q3"),
                        (1, "q4", "q4"),
                        (-1, "p1", "p1"),
                        (-1, "p2", "p2"),
                        (-1, "p3", "p3"),
                        (-1, "p4", "p4"),
                    ],
                ),
            ),
            (
                "V2",
                quad(&c, one.clone(), &[(1, "q1", "p3"), (1, "q2", "p4"), (1, "q3", "p1"), (1, "q4", "p2")]),
            ),
            (
                "V3",
                quad(&c, one.clone(), &[(1, "q1", "p4"), (-1, "q2", "p3"), (1, "q4", "p1"), (-1, "q3", "p2")]),
            ),
            (
                "V4",
                quad(&c, one, &[(1, "q1", "p1"), (1, "q2", "p2"), (-1, "q3", "p3"), (-1, "q4", "p4")]),
            ),
        ];
        let mut polys = Vec::with_capacity(inv.n_main());
        for i in 0..inv.n_main() {
            let name = inv.name(i);
            let (dn, p) = defs.iter().find(|(n, _)| *n == name).expect("definition for every invariant");
            assert_eq!(*dn, name);
            polys.push(p.clone());
        }
        GeneratorTable { canon: c, inv, polys }
    }

    pub fn canonical_space(&self) -> &Space {
        &self.canon
    }

    pub fn invariant_space(&self) -> &Space {
        &self.inv
    }

    pub fn get(&self, name: &str) -> &Poly {
        let i = self.inv.index_of(name).expect("invariant variable name");
        &self.polys[i]
    }

    pub fn by_index(&self, i: usize) -> &Poly {
        &self.polys[i]
    }

    /// Substitution homomorphism from invariant polynomials to (q, p)
    /// polynomials; parameters map to themselves.
    pub fn embed(&self, f: &Poly) -> Poly {
        let mut images: Vec<Poly> = self.polys.clone();
        for i in self.inv.n_main()..self.inv.dim() {
            let name = self.inv.name(i);
            images.push(Poly::var(self.canon.clone(), name).expect("shared parameter name"));
        }
        f.substitute(&self.canon, &images).expect("embedding substitution")
    }
}

pub fn table() -> &'static GeneratorTable {
    static TABLE: Lazy<GeneratorTable> = Lazy::new(GeneratorTable::build);
    &TABLE
}

/// Variable of the invariant space, by name.
pub fn inv_var(name: &str) -> Poly {
    Poly::var(space::invariant(), name).expect("invariant variable")
}

/// Variable of the canonical space, by name.
pub fn can_var(name: &str) -> Poly {
    Poly::var(space::canonical(), name).expect("canonical variable")
}

/// The perturbed oscillator Hamiltonian on the invariant variables:
/// H2 + eps beta (U4 V1 + H2 U4 - K3 V1 - H2 K3).
pub fn hamiltonian_invariant() -> Poly {
    let perturbation = inv_var("U4")
        .mul(&inv_var("V1"))
        .add(&inv_var("H2").mul(&inv_var("U4")))
        .sub(&inv_var("K3").mul(&inv_var("V1")))
        .sub(&inv_var("H2").mul(&inv_var("K3")));
    inv_var("H2").add(&inv_var("eps").mul(&inv_var("beta")).mul(&perturbation))
}

/// Same Hamiltonian pushed down to (q, p).
pub fn hamiltonian_canonical() -> Poly {
    table().embed(&hamiltonian_invariant())
}

/// The Cartesian position the invariants project to: x = (U2-K1, U3-K2, U4-K3)
/// as polynomials in q alone.
pub fn cartesian_x() -> [Poly; 3] {
    let t = table();
    [
        t.embed(&inv_var("U2").sub(&inv_var("K1"))),
        t.embed(&inv_var("U3").sub(&inv_var("K2"))),
        t.embed(&inv_var("U4").sub(&inv_var("K3"))),
    ]
}

/// Numerators of the velocity components: <q,q> y = (V2, V3, V4).
pub fn cartesian_y_numerators() -> [Poly; 3] {
    let t = table();
    [
        t.embed(&inv_var("V2")),
        t.embed(&inv_var("V3")),
        t.embed(&inv_var("V4")),
    ]
}

/// |x| = <q, q> = H2 + V1, exactly.
pub fn qq_norm() -> Poly {
    table().embed(&inv_var("H2").add(&inv_var("V1")))
}

/// One polynomial identity among the invariants, stated as lhs = rhs; all of
/// them hold identically on R^8 (not only on the constraint set).
pub struct Relation {
    pub name: &'static str,
    pub lhs: Poly,
    pub rhs: Poly,
}

impl Relation {
    pub fn defect(&self) -> Poly {
        self.lhs.sub(&self.rhs)
    }
}

fn dot(names_a: [&str; 4], names_b: [&str; 4]) -> Poly {
    let mut acc = Poly::zero(space::invariant());
    for (a, b) in names_a.iter().zip(names_b.iter()) {
        acc = acc.add(&inv_var(a).mul(&inv_var(b)));
    }
    acc
}

fn dot3(names_a: [&str; 3], names_b: [&str; 3]) -> Poly {
    let mut acc = Poly::zero(space::invariant());
    for (a, b) in names_a.iter().zip(names_b.iter()) {
        acc = acc.add(&inv_var(a).mul(&inv_var(b)));
    }
    acc
}

fn minor(a: &str, b: &str, c: &str, d: &str) -> Poly {
    // a*b - c*d over invariant variables
    inv_var(a).mul(&inv_var(b)).sub(&inv_var(c).mul(&inv_var(d)))
}

/// The defining relations of the orbit map image: three norms, six bilinear
/// minors, and three derived sums used by the sphere reductions.
pub fn relations() -> Vec<Relation> {
    let u = ["U1", "U2", "U3", "U4"];
    let v = ["V1", "V2", "V3", "V4"];
    let k = ["K1", "K2", "K3"];
    let l = ["L1", "L2", "L3"];
    let h2 = inv_var("H2");
    let xi = inv_var("Xi");
    let h2sq = h2.mul(&h2);
    let xisq = xi.mul(&xi);
    let kk = dot3(k, k);
    let ll = dot3(l, l);
    vec![
        Relation { name: "uu_norm", lhs: dot(u, u), rhs: h2sq.sub(&xisq) },
        Relation { name: "vv_norm", lhs: dot(v, v), rhs: h2sq.sub(&xisq) },
        Relation { name: "uv_orthogonal", lhs: dot(u, v), rhs: Poly::zero(space::invariant()) },
        Relation {
            name: "minor_k1",
            lhs: minor("U2", "V1", "U1", "V2"),
            rhs: inv_var("L1").mul(&xi).sub(&inv_var("K1").mul(&h2)),
        },
        Relation {
            name: "minor_k2",
            lhs: minor("U3", "V1", "U1", "V3"),
            rhs: inv_var("L2").mul(&xi).sub(&inv_var("K2").mul(&h2)),
        },
        Relation {
            name: "minor_k3",
            lhs: minor("U4", "V1", "U1", "V4"),
            rhs: inv_var("L3").mul(&xi).sub(&inv_var("K3").mul(&h2)),
        },
        Relation {
            name: "minor_l1",
            lhs: minor("U4", "V3", "U3", "V4"),
            rhs: inv_var("K1").mul(&xi).sub(&inv_var("L1").mul(&h2)),
        },
        Relation {
            name: "minor_l2",
            lhs: minor("U2", "V4", "U4", "V2"),
            rhs: inv_var("K2").mul(&xi).sub(&inv_var("L2").mul(&h2)),
        },
        Relation {
            name: "minor_l3",
            lhs: minor("U3", "V2", "U2", "V3"),
            rhs: inv_var("K3").mul(&xi).sub(&inv_var("L3").mul(&h2)),
        },
        Relation { name: "kl_norm_sum", lhs: kk.add(&ll), rhs: h2sq.add(&xisq) },
        Relation { name: "kl_pairing", lhs: dot3(k, l), rhs: h2.mul(&xi) },
        Relation {
            name: "first_sphere",
            lhs: inv_var("U1").pow(2).add(&inv_var("V1").pow(2)),
            rhs: kk.sub(&xisq),
        },
    ]
}

/// Poisson structure on the sixteen invariant variables. Every bracket of two
/// generators is itself a linear combination of generators; the coefficients
/// are found by exact span decomposition, so building this table proves
/// closure with zero residual.
pub fn bracket_structure() -> Arc<StructureTable> {
    static TABLE: Lazy<Arc<StructureTable>> = Lazy::new(|| {
        Arc::new(build_bracket_structure().expect("invariant bracket closure"))
    });
    Arc::clone(&TABLE)
}

/// The invariant-space Poisson structure, ready for bracket evaluation.
pub fn invariant_structure() -> Structure {
    Structure::Table(bracket_structure())
}

fn build_bracket_structure() -> Result<StructureTable, StarkError> {
    let t = table();
    let n = t.inv.n_main();
    let canon = Structure::Canonical;

    // quadratic monomial basis over the main canonical variables
    let mut rows: BTreeMap<Monomial, usize> = BTreeMap::new();
    let dim = t.canon.dim();
    for i in 0..t.canon.n_main() {
        for j in i..t.canon.n_main() {
            let mut m = Monomial::unit(dim);
            m.0[i] += 1;
            m.0[j] += 1;
            let next = rows.len();
            rows.entry(m).or_insert(next);
        }
    }
    let coords = |p: &Poly| -> Result<Vec<Rat>, StarkError> {
        let mut v = vec![Rat::from_integer(0.into()); rows.len()];
        for (m, c) in p.terms() {
            let Some(&r) = rows.get(m) else {
                return Err(StarkError::Verification(
                    "generator bracket is not a quadratic in (q, p)".into(),
                ));
            };
            if !c.is_rational() {
                return Err(StarkError::Verification("pi in a generator bracket".into()));
            }
            v[r] = c.rational_part().clone();
        }
        Ok(v)
    };

    let matrix: Vec<Vec<Rat>> = {
        let cols: Vec<Vec<Rat>> = (0..n).map(|k| coords(&t.polys[k])).collect::<Result<_, _>>()?;
        (0..rows.len())
            .map(|r| cols.iter().map(|col| col[r].clone()).collect())
            .collect()
    };

    let mut entries = vec![vec![Poly::zero(t.inv.clone()); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let b = canon.bracket(&t.polys[i], &t.polys[j]);
            let coeffs = linalg::solve(&matrix, &coords(&b)?)?;
            let mut e = Poly::zero(t.inv.clone());
            for (k, ck) in coeffs.iter().enumerate() {
                if !ck.is_zero() {
                    e = e.add(&Poly::var_idx(t.inv.clone(), k).scale_rat(ck));
                }
            }
            entries[j][i] = e.neg();
            entries[i][j] = e;
        }
    }
    StructureTable::new(t.inv.clone(), entries)
}

/// Components of the derivation attached to one invariant generator: entry i
/// is {x_i, G}, a linear polynomial in the invariants.
pub fn induced_field(name: &str) -> Vec<Poly> {
    let inv = space::invariant();
    let g = inv.index_of(name).expect("invariant variable");
    let t = bracket_structure();
    (0..inv.n_main()).map(|i| t.entry(i, g).clone()).collect()
}

/// Groebner basis of the principal constraint ideal <Xi> in (q, p).
pub fn xi_constraint_basis() -> &'static GroebnerBasis {
    static GB: Lazy<GroebnerBasis> = Lazy::new(|| {
        let t = table();
        GroebnerBasis::new(t.canon.clone(), &[t.get("Xi").clone()]).expect("principal basis")
    });
    &GB
}

/// Groebner basis of <Xi, H2 - h> with h kept symbolic.
pub fn level_constraint_basis() -> &'static GroebnerBasis {
    static GB: Lazy<GroebnerBasis> = Lazy::new(|| {
        let t = table();
        let level = t.get("H2").sub(&can_var("h"));
        GroebnerBasis::new(t.canon.clone(), &[t.get("Xi").clone(), level]).expect("level basis")
    });
    &GB
}

/// Does an invariant polynomial vanish on the zero set of the constraint?
pub fn vanishes_on_orbit_space(f: &Poly) -> bool {
    xi_constraint_basis().reduces_to_zero(&table().embed(f))
}

/// Does an invariant polynomial vanish on the energy level inside the
/// constraint set (H2 = h, Xi = 0)?
pub fn vanishes_on_level(f: &Poly) -> bool {
    level_constraint_basis().reduces_to_zero(&table().embed(f))
}

/// Evaluate all sixteen invariants at a canonical point, carrying the
/// parameters along: the image of the orbit map as an invariant-space point.
pub fn push_forward(pt: &crate::space::Point) -> Result<crate::space::Point, StarkError> {
    let t = table();
    let inv = t.inv.clone();
    let mut vals = Vec::with_capacity(inv.dim());
    for i in 0..inv.n_main() {
        let c = t.polys[i].eval_exact(pt)?;
        if !c.is_rational() {
            return Err(StarkError::Verification("pi value in an orbit map image".into()));
        }
        vals.push(c.rational_part().clone());
    }
    for i in inv.n_main()..inv.dim() {
        vals.push(pt.value_of(inv.name(i))?.clone());
    }
    Ok(crate::space::Point::new(inv, vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q, qi};
    use crate::space::Point;

    fn probe_e1() -> Point {
        let s = space::canonical();
        let mut vals = vec![Rat::zero(); s.dim()];
        vals[s.index_of("q1").unwrap()] = q(1, 1);
        Point::new(s.clone(), vals)
    }

    #[test]
    fn generator_values_at_probe_point() {
        let t = table();
        let pt = probe_e1();
        let at = |n: &str| t.get(n).eval_exact(&pt).unwrap();
        assert!(at("K3").eq_rat(&q(-1, 2)));
        assert!(at("H2").eq_rat(&q(1, 2)));
        assert!(at("U4").eq_rat(&q(1, 2)));
        assert!(at("V1").eq_rat(&q(1, 2)));
        for n in ["K1", "K2", "L1", "L2", "L3", "Xi", "U1", "U2", "U3", "V2", "V3", "V4"] {
            assert!(at(n).is_zero(), "{n} should vanish at the probe point");
        }
    }

    #[test]
    fn constraint_is_central() {
        let t = table();
        let canon = Structure::Canonical;
        for i in 0..t.inv.n_main() {
            let b = canon.bracket(t.by_index(i), t.get("Xi"));
            assert!(b.is_zero(), "{{{}, Xi}} != 0", t.inv.name(i));
        }
        let xi_col = induced_field("Xi");
        assert!(xi_col.iter().all(Poly::is_zero));
    }

    #[test]
    fn pinned_structure_entries() {
        let inv = space::invariant();
        let e = |a: &str, b: &str| {
            let t = bracket_structure();
            t.entry(inv.index_of(a).unwrap(), inv.index_of(b).unwrap()).clone()
        };
        let two = |n: &str| inv_var(n).scale_rat(&q(2, 1));
        assert_eq!(e("U1", "H2"), two("V1"));
        assert_eq!(e("V4", "H2"), two("U4").neg());
        assert_eq!(e("K3", "U4"), two("U1").neg());
        assert_eq!(e("U1", "U4"), two("K3").neg());
        assert_eq!(e("V4", "U4"), two("H2").neg());
        assert_eq!(e("H2", "U4"), two("V4").neg());
        assert_eq!(e("K1", "V1"), two("V2"));
        assert_eq!(e("H2", "V1"), two("U1"));
        assert_eq!(e("U1", "V1"), two("H2"));
        assert_eq!(e("K1", "K3"), two("L2").neg());
        assert_eq!(e("K2", "K3"), two("L1"));
    }

    #[test]
    fn table_bracket_matches_canonical_bracket() {
        let t = table();
        let canon = Structure::Canonical;
        let invs = invariant_structure();
        let f = inv_var("U4").mul(&inv_var("V1")).sub(&inv_var("H2").mul(&inv_var("K3")));
        let g = inv_var("H2").add(&inv_var("K3").pow(2));
        let upstairs = canon.bracket(&t.embed(&f), &t.embed(&g));
        let downstairs = t.embed(&invs.bracket(&f, &g));
        assert_eq!(upstairs, downstairs);
    }

    #[test]
    fn relations_hold_identically() {
        let t = table();
        for rel in relations() {
            let defect = t.embed(&rel.defect());
            assert!(defect.is_zero(), "relation {} has nonzero defect", rel.name);
        }
    }

    #[test]
    fn hamiltonian_perturbation_is_the_vertical_coordinate() {
        // eps beta x3 |x| pulled back equals the invariant-variable form.
        let t = table();
        let x3 = cartesian_x()[2].clone();
        let direct = x3.mul(&qq_norm());
        let invariant_form = inv_var("U4")
            .mul(&inv_var("V1"))
            .add(&inv_var("H2").mul(&inv_var("U4")))
            .sub(&inv_var("K3").mul(&inv_var("V1")))
            .sub(&inv_var("H2").mul(&inv_var("K3")));
        assert_eq!(direct, t.embed(&invariant_form));
        let eps_coeff = hamiltonian_canonical().coeff_of("eps", 1).unwrap();
        assert_eq!(eps_coeff, direct.mul(&can_var("beta")));
    }

    #[test]
    fn on_shell_decision_procedure() {
        // U4 V1 - U1 V4 + H2 K3 = L3 Xi identically, hence zero on shell.
        let d = minor("U4", "V1", "U1", "V4");
        let with_energy = d.add(&inv_var("H2").mul(&inv_var("K3")));
        assert!(vanishes_on_orbit_space(&with_energy));
        assert!(!vanishes_on_orbit_space(&d));
        // <U,U> = h^2 needs the energy level, not just the constraint.
        let uu = dot(["U1", "U2", "U3", "U4"], ["U1", "U2", "U3", "U4"]);
        let claim = uu.sub(&inv_var("h").pow(2));
        assert!(vanishes_on_level(&claim));
        assert!(!vanishes_on_orbit_space(&claim));
    }

    #[test]
    fn sphere_identities_on_the_level() {
        let s1 = inv_var("U1").pow(2).add(&inv_var("V1").pow(2));
        let s4 = inv_var("U4").pow(2).add(&inv_var("V4").pow(2));
        let kk = dot3(["K1", "K2", "K3"], ["K1", "K2", "K3"]);
        let s4_rhs = inv_var("L1")
            .pow(2)
            .add(&inv_var("L2").pow(2))
            .add(&inv_var("K3").pow(2));
        assert!(vanishes_on_level(&s1.sub(&kk)));
        assert!(vanishes_on_level(&s4.sub(&s4_rhs)));
        // and the combined form used by the last reduction step
        let sum = s1.add(&s4);
        let rhs = inv_var("h")
            .pow(2)
            .add(&inv_var("K3").pow(2))
            .sub(&inv_var("L3").pow(2));
        assert!(vanishes_on_level(&sum.sub(&rhs)));
    }

    #[test]
    fn probe_values_of_constants() {
        let pt = probe_e1();
        let h = hamiltonian_canonical().set_var("eps", &Rat::zero()).unwrap();
        assert!(h.eval_exact(&pt).unwrap().eq_rat(&q(1, 2)));
        let _ = qi(0);
    }
}
