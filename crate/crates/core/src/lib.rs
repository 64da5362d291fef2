//! Desk-scale workbench for word metrics in a cyclic amalgam of two
//! mapping-torus groups.
//!
//! The pipeline, bottom to top:
//!
//! * [`words`] — freely reduced words, presentations, small-cancellation
//!   checking, Dehn's algorithm.
//! * [`base`] — the base group `F`, either free or a C'(1/6) surface-style
//!   quotient with a capped shortlex-geodesic canonicalizer.
//! * [`torus`] — automorphisms of `F` and exact `u·t^k` normal forms in the
//!   mapping torus `G = F ⋊ ⟨t⟩`.
//! * [`amalgam`] — the amalgam `M = G ∗_C G₁` over the cyclic edge subgroup
//!   `C = ⟨x⟩ = ⟨x₁⟩`: syllable normal forms, coset-shortest rewriting to a
//!   canonical word, and exact membership in the subgroup generated by the
//!   two base groups.
//! * [`metric`] — radius-capped Cayley-ball enumeration, bidirectional
//!   distance search over canonical keys, Gromov products, hyperbolicity and
//!   quasiconvexity estimation, distortion tables.
//! * [`experiments`] — reproducible quantitative experiments composing the
//!   layers below, with fixed CSV schemas.
//! * [`preset`] — the bundled default configurations.

pub mod amalgam;
pub mod base;
pub mod experiments;
pub mod metric;
pub mod preset;
pub mod torus;
pub mod words;
