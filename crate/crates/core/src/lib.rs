//! Constraint Handling Rules toolkit: the reference semantics and the
//! annotated semantics with token stores, unfolding of annotated rules, the
//! safe and weak-safe rule replacement conditions, and bounded checkers for
//! answer equivalence, normal termination and normal confluence.

pub mod analysis;
pub mod answer;
pub mod builtins;
pub mod canon;
pub mod explore;
pub mod omega_t;
pub mod omega_t_prime;
pub mod replace;
pub mod syntax;
pub mod terms;
pub mod unfold;
