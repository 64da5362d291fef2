//! Bundled default configurations.
//!
//! Free mode: `F = F(a,b,c)` with the positive automorphism
//! `a ↦ b, b ↦ c, c ↦ ab`, edge word `x = x₁ = a`, and `y = ab`. The
//! automorphism is cancellation-free with exponential growth, which is what
//! the distortion experiments feed on; the artifact records growth evidence
//! and does not certify any dynamical property.
//!
//! Surface mode ships the genus-2 one-relator presentation as the minimal
//! closed hyperbolic surface case; automorphism tables are user-supplied.

use crate::amalgam::{AmalgamCaps, AmalgamContext, EdgeSpec};
use crate::base::BaseGroup;
use crate::torus::{Automorphism, MappingTorus};
use crate::words::{Alphabet, Presentation};

pub const DEFAULT_BASE: &str = "a b c";
pub const DEFAULT_EDGE: &str = "a";
pub const DEFAULT_Y: &str = "ab";

pub const DEFAULT_FORWARD: [(&str, &str); 3] = [("a", "b"), ("b", "c"), ("c", "ab")];
pub const DEFAULT_BACKWARD: [(&str, &str); 3] = [("a", "cA"), ("b", "a"), ("c", "b")];

pub fn default_free_base() -> BaseGroup {
    BaseGroup::free(Alphabet::new(["a", "b", "c"]).unwrap())
}

pub fn default_free_torus() -> MappingTorus {
    let base = default_free_base();
    let alpha = base.alphabet().clone();
    let forward = DEFAULT_FORWARD
        .iter()
        .map(|(_, img)| alpha.parse_word(img).unwrap())
        .collect();
    let backward = DEFAULT_BACKWARD
        .iter()
        .map(|(_, img)| alpha.parse_word(img).unwrap())
        .collect();
    let aut = Automorphism::new(&base, forward, backward).expect("default tables are invertible");
    MappingTorus::new(base, aut).expect("default base avoids the stable letter")
}

pub fn default_free_amalgam() -> AmalgamContext {
    let torus = default_free_torus();
    let x = torus.base().alphabet().parse_word(DEFAULT_EDGE).unwrap();
    let edge = EdgeSpec::new(x.clone(), x).expect("default edge word is valid");
    AmalgamContext::new(torus, edge, AmalgamCaps::default()).expect("default context is valid")
}

/// Genus-2 closed surface group: one relator `[a,b][c,d]`, which satisfies
/// C'(1/8) and so supports Dehn's algorithm.
pub fn genus2_presentation() -> Presentation {
    Presentation::parse("gens: a b c d\nrel: a b A B c d C D\n").unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build() {
        let t = default_free_torus();
        assert_eq!(t.alphabet().len(), 4);
        let m = default_free_amalgam();
        assert_eq!(m.alphabet().len(), 8);
        assert_eq!(m.alphabet().name(0), "a");
        assert_eq!(m.alphabet().name(3), "t");
        assert_eq!(m.alphabet().name(4), "a1");
        assert_eq!(m.alphabet().name(7), "t1");
    }

    #[test]
    fn genus2_is_small_cancellation() {
        let p = genus2_presentation();
        assert!(p.satisfies_sixth());
    }
}
