//! Variable spaces.
//!
//! Every polynomial is attached to one of four fixed variable spaces. Mixing
//! spaces without an explicit substitution homomorphism is an error; the
//! check is what keeps "upstairs" oscillator computations and "downstairs"
//! invariant computations from being conflated silently.
//!
//! Variable order is part of the space definition: it fixes the graded
//! lexicographic monomial order used by the ideal machinery and the canonical
//! print order.

use crate::coeff::Rat;
use crate::error::StarkError;
use std::fmt;
use std::sync::Arc;

/// Identifies one of the four fixed spaces.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SpaceId {
    /// Oscillator phase space q1..q4, p1..p4 plus parameters h, eps, beta.
    Canonical,
    /// The sixteen quadratic invariants plus parameters h, eps, beta.
    Invariant,
    /// su(2) x su(2) variables xi1..3, eta1..3 plus parameters h, k, eps, beta.
    XiEta,
    /// Orbit space chart sigma1..6 plus parameters h, k, eps, beta.
    Sigma,
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpaceId::Canonical => "canonical",
            SpaceId::Invariant => "invariant",
            SpaceId::XiEta => "xieta",
            SpaceId::Sigma => "sigma",
        };
        f.write_str(s)
    }
}

/// A variable space: an ordered list of variable names, split into main
/// variables and trailing parameters. Parameters take part in the monomial
/// order like any variable but are printed first inside a term.
#[derive(Debug)]
pub struct SpaceData {
    pub id: SpaceId,
    names: Vec<&'static str>,
    n_main: usize,
}

/// Shared handle to a space. Spaces are interned statics; equality is by id.
pub type Space = Arc<SpaceData>;

impl SpaceData {
    pub fn names(&self) -> &[&'static str] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Number of main (non-parameter) variables.
    pub fn n_main(&self) -> usize {
        self.n_main
    }

    /// Indices of the parameter block.
    pub fn param_range(&self) -> std::ops::Range<usize> {
        self.n_main..self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, StarkError> {
        self.names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| StarkError::UnknownVariable(name.to_string()))
    }

    pub fn name(&self, idx: usize) -> &'static str {
        self.names[idx]
    }
}

fn intern(id: SpaceId, names: Vec<&'static str>, n_main: usize) -> Space {
    Arc::new(SpaceData { id, names, n_main })
}

/// q1..q4, p1..p4 | h, eps, beta.
pub fn canonical() -> Space {
    use once_cell::sync::Lazy;
    static S: Lazy<Space> = Lazy::new(|| {
        intern(
            SpaceId::Canonical,
            vec!["q1", "q2", "q3", "q4", "p1", "p2", "p3", "p4", "h", "eps", "beta"],
            8,
        )
    });
    S.clone()
}

/// K1..K3, L1..L3, H2, Xi, U1..U4, V1..V4 | h, eps, beta.
pub fn invariant() -> Space {
    use once_cell::sync::Lazy;
    static S: Lazy<Space> = Lazy::new(|| {
        intern(
            SpaceId::Invariant,
            vec![
                "K1", "K2", "K3", "L1", "L2", "L3", "H2", "Xi", "U1", "U2", "U3", "U4", "V1",
                "V2", "V3", "V4", "h", "eps", "beta",
            ],
            16,
        )
    });
    S.clone()
}

/// xi1..xi3, eta1..eta3 | h, k, eps, beta.
pub fn xieta() -> Space {
    use once_cell::sync::Lazy;
    static S: Lazy<Space> = Lazy::new(|| {
        intern(
            SpaceId::XiEta,
            vec!["xi1", "xi2", "xi3", "eta1", "eta2", "eta3", "h", "k", "eps", "beta"],
            6,
        )
    });
    S.clone()
}

/// sigma1..sigma6 | h, k, eps, beta.
pub fn sigma() -> Space {
    use once_cell::sync::Lazy;
    static S: Lazy<Space> = Lazy::new(|| {
        intern(
            SpaceId::Sigma,
            vec![
                "sigma1", "sigma2", "sigma3", "sigma4", "sigma5", "sigma6", "h", "k", "eps",
                "beta",
            ],
            6,
        )
    });
    S.clone()
}

pub fn by_id(id: SpaceId) -> Space {
    match id {
        SpaceId::Canonical => canonical(),
        SpaceId::Invariant => invariant(),
        SpaceId::XiEta => xieta(),
        SpaceId::Sigma => sigma(),
    }
}

/// Check two spaces agree, with a descriptive error otherwise.
pub fn require_same(a: &Space, b: &Space) -> Result<(), StarkError> {
    if a.id == b.id {
        Ok(())
    } else {
        Err(StarkError::SpaceMismatch {
            expected: a.id.to_string(),
            got: b.id.to_string(),
        })
    }
}

/// A point assigns an exact rational to every variable of a space.
#[derive(Clone, Debug)]
pub struct Point {
    pub space: Space,
    pub values: Vec<Rat>,
}

impl Point {
    pub fn new(space: Space, values: Vec<Rat>) -> Self {
        assert_eq!(space.dim(), values.len(), "point dimension mismatch");
        Point { space, values }
    }

    pub fn value_of(&self, name: &str) -> Result<&Rat, StarkError> {
        Ok(&self.values[self.space.index_of(name)?])
    }

    pub fn set(&mut self, name: &str, v: Rat) -> Result<(), StarkError> {
        let i = self.space.index_of(name)?;
        self.values[i] = v;
        Ok(())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(crate::coeff::rat_to_f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spaces_have_expected_layout() {
        let c = canonical();
        assert_eq!(c.dim(), 11);
        assert_eq!(c.n_main(), 8);
        assert_eq!(c.index_of("p3").unwrap(), 6);
        assert_eq!(c.name(9), "eps");
        let i = invariant();
        assert_eq!(i.dim(), 19);
        assert_eq!(i.index_of("Xi").unwrap(), 7);
        assert_eq!(i.index_of("V4").unwrap(), 15);
        assert!(i.index_of("nope").is_err());
        assert!(require_same(&c, &canonical()).is_ok());
        assert!(require_same(&c, &i).is_err());
    }
}
