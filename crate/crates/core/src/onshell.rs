//! Certified rewriting of invariant polynomials on the constraint surface
//! and on a fixed energy level.
//!
//! Equalities between invariant expressions come in three strengths: exact
//! identity, equality modulo the constraint ideal, and equality modulo the
//! constraint ideal together with the energy relation. A chain records a
//! head polynomial and a sequence of claimed rewrites; pushing a step
//! re-proves the claim at the stated strength, so a chain that exists is a
//! chain whose every link has been checked.

use crate::error::StarkError;
use crate::gens;
use crate::poly::Poly;
use crate::space;

/// Strength of a certified equality, ordered strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CertLevel {
    /// Equality of polynomials.
    Identity,
    /// Equality modulo the constraint ideal.
    OrbitSpace,
    /// Equality modulo the constraint ideal and the energy relation.
    EnergyLevel,
}

impl std::fmt::Display for CertLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CertLevel::Identity => "identity",
            CertLevel::OrbitSpace => "orbit space",
            CertLevel::EnergyLevel => "energy level",
        };
        f.write_str(s)
    }
}

/// One certified link: `result` equals the previous polynomial of the chain
/// at strength `level`.
#[derive(Debug, Clone)]
pub struct RewriteStep {
    pub label: String,
    pub level: CertLevel,
    pub result: Poly,
}

/// A head polynomial plus the certified rewrites applied to it.
#[derive(Debug, Clone)]
pub struct CertifiedChain {
    steps: Vec<RewriteStep>,
}

impl CertifiedChain {
    /// Open a chain at `head`. Chains live in the invariant space; the
    /// decision procedures certify nothing else.
    pub fn start(label: &str, head: Poly) -> Self {
        assert_eq!(
            head.space().id,
            space::invariant().id,
            "chains certify invariant-space rewrites"
        );
        CertifiedChain {
            steps: vec![RewriteStep {
                label: label.to_string(),
                level: CertLevel::Identity,
                result: head,
            }],
        }
    }

    fn push(mut self, label: &str, level: CertLevel, claim: Poly) -> Result<Self, StarkError> {
        let diff = self.current().sub(&claim);
        let ok = match level {
            CertLevel::Identity => diff.is_zero(),
            CertLevel::OrbitSpace => gens::vanishes_on_orbit_space(&diff),
            CertLevel::EnergyLevel => gens::vanishes_on_level(&diff),
        };
        if !ok {
            return Err(StarkError::RewriteNotCertified(label.to_string()));
        }
        self.steps.push(RewriteStep {
            label: label.to_string(),
            level,
            result: claim,
        });
        Ok(self)
    }

    /// Rewrite that must hold as a polynomial identity.
    pub fn identity(self, label: &str, claim: Poly) -> Result<Self, StarkError> {
        self.push(label, CertLevel::Identity, claim)
    }

    /// Rewrite valid on the zero set of the constraint.
    pub fn on_orbit(self, label: &str, claim: Poly) -> Result<Self, StarkError> {
        self.push(label, CertLevel::OrbitSpace, claim)
    }

    /// Rewrite valid on a fixed energy level inside that zero set.
    pub fn on_level(self, label: &str, claim: Poly) -> Result<Self, StarkError> {
        self.push(label, CertLevel::EnergyLevel, claim)
    }

    pub fn head(&self) -> &Poly {
        &self.steps[0].result
    }

    pub fn current(&self) -> &Poly {
        &self.steps.last().expect("chain is never empty").result
    }

    pub fn steps(&self) -> &[RewriteStep] {
        &self.steps
    }

    /// Weakest strength used anywhere in the chain; the strength at which
    /// head and current are provably equal.
    pub fn weakest(&self) -> CertLevel {
        self.steps
            .iter()
            .map(|s| s.level)
            .max()
            .expect("chain is never empty")
    }
}

/// Restriction onto the energy level: substitute the energy variable by the
/// level parameter. The difference `f - set_energy(f)` is a multiple of the
/// energy relation, so the two agree on the level by construction.
pub fn set_energy(f: &Poly) -> Result<Poly, StarkError> {
    let s = space::invariant();
    let images: Vec<Poly> = s
        .names()
        .iter()
        .map(|&n| {
            let target = if n == "H2" { "h" } else { n };
            Poly::var(s.clone(), target).expect("invariant variable")
        })
        .collect();
    f.substitute(&s, &images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gens::inv_var;
    use crate::poly::q;

    fn vertical_minor() -> Poly {
        // U4 V1 - U1 V4
        inv_var("U4")
            .mul(&inv_var("V1"))
            .sub(&inv_var("U1").mul(&inv_var("V4")))
    }

    #[test]
    fn set_energy_pins_the_energy_variable() {
        // H2 K3 + H2^2  ->  h K3 + h^2
        let f = inv_var("H2")
            .mul(&inv_var("K3"))
            .add(&inv_var("H2").pow(2));
        let want = inv_var("h").mul(&inv_var("K3")).add(&inv_var("h").pow(2));
        let got = set_energy(&f).unwrap();
        assert_eq!(got, want);
        // the substitution is the identity on energy-free input
        let free = inv_var("K3").mul(&inv_var("L3"));
        assert_eq!(set_energy(&free).unwrap(), free);
        // and its defect is invisible on the level
        assert!(gens::vanishes_on_level(&f.sub(&got)));
        assert!(!gens::vanishes_on_orbit_space(&f.sub(&got)));
    }

    #[test]
    fn chain_tracks_its_weakest_link() {
        // U4 V1 - U1 V4 = L3 Xi - K3 H2, so the minor collapses to -H2 K3 on
        // the orbit space and to -h K3 on the level.
        let minus_h2k3 = inv_var("H2").mul(&inv_var("K3")).scale_rat(&q(-1, 1));
        let chain = CertifiedChain::start("vertical minor", vertical_minor())
            .on_orbit("drop the constraint multiple", minus_h2k3.clone())
            .unwrap()
            .on_level("pin the energy", set_energy(&minus_h2k3).unwrap())
            .unwrap();
        assert_eq!(chain.weakest(), CertLevel::EnergyLevel);
        assert_eq!(chain.steps().len(), 3);
        assert_eq!(
            chain.current(),
            &inv_var("h").mul(&inv_var("K3")).scale_rat(&q(-1, 1))
        );
        assert!(chain.weakest() > CertLevel::Identity);
    }

    #[test]
    fn identity_steps_require_exact_equality() {
        // equal mod the constraint, but not equal
        let minus_h2k3 = inv_var("H2").mul(&inv_var("K3")).scale_rat(&q(-1, 1));
        let err = CertifiedChain::start("vertical minor", vertical_minor())
            .identity("claimed exact", minus_h2k3)
            .unwrap_err();
        assert!(matches!(err, StarkError::RewriteNotCertified(_)));
    }

    #[test]
    fn level_only_facts_fail_on_the_orbit_space() {
        // |U|^2 = H2^2 - Xi^2 identically, so |U|^2 - (h^2 - Xi^2) needs the
        // energy relation, not just the constraint.
        let uu = inv_var("U1")
            .pow(2)
            .add(&inv_var("U2").pow(2))
            .add(&inv_var("U3").pow(2))
            .add(&inv_var("U4").pow(2));
        let claim = inv_var("h").pow(2).sub(&inv_var("Xi").pow(2));
        let start = CertifiedChain::start("first sphere", uu);
        assert!(start.clone().on_orbit("too strong", claim.clone()).is_err());
        let chain = start.on_level("level certifies", claim).unwrap();
        assert_eq!(chain.weakest(), CertLevel::EnergyLevel);
    }

    #[test]
    fn bogus_claims_are_rejected_at_every_strength() {
        let wrong = inv_var("H2").mul(&inv_var("K3"));
        let start = CertifiedChain::start("vertical minor", vertical_minor());
        assert!(start.clone().identity("sign slip", wrong.clone()).is_err());
        assert!(start.clone().on_orbit("sign slip", wrong.clone()).is_err());
        assert!(start.on_level("sign slip", wrong).is_err());
    }
}
