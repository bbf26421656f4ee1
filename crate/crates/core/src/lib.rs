//! Strategic simplicity for finite mechanisms.
//!
//! A mechanism is strategically simple when every agent, knowing only their
//! own utility and a belief about the others' utilities, has a strategy that
//! is a best response to every strategic belief compatible with that
//! first-order belief. This crate decides the property exactly through the
//! local-dictatorship test ([`check_simple`]), cross-checks it with a direct
//! belief-polytope oracle ([`oracle_check`]), and ships the bilateral-trade
//! and three-alternative voting environments together with exhaustive
//! enumeration up to relabeling.
//!
//! All cardinal computations use exact rationals ([`Q`]).
//!
//! ```
//! use ssm_core::{check_simple, voting, Classification, OrdinalDomain};
//!
//! let b = voting::mechanism_b();
//! let dom = OrdinalDomain::full(2, 3);
//! assert_eq!(check_simple(&b, &dom).unwrap(), Classification::Type2);
//! ```

pub mod beliefs;
pub mod canonical;
pub mod dominance;
pub mod error;
pub mod format;
pub mod lp;
pub mod mechanism;
mod search;
pub mod simplicity;
pub mod trade;
pub mod voting;

use num_bigint::BigInt;
use num_rational::BigRational;

pub use beliefs::{
    br_intersection, compatible_polytope, non_responsiveness_check, oracle_check, outcome_correspondence,
    BeliefPolytope, OracleReport, OracleVerdict, OutcomePoint, UtilityBelief, Witness,
};
pub use canonical::{canonicalize, CanonicalForm, Symmetry};
pub use dominance::{mixed_ud, pure_ud, supporting_belief, UdSet};
pub use error::{Error, Result};
pub use lp::{LpOutcome, RationalLp, Sense};
pub use mechanism::{
    validate, AlternativeSet, Mechanism, MechanismTable, OrdinalDomain, Preference, Utility, ValidationReport,
    Violation,
};
pub use simplicity::{
    build_delegation, check_equivalence, check_simple, check_simple_star, local_dictators, structure_check,
    Classification, DelegationMechanism, DictatorReport, EquivalenceReport, StarVerdict, StructureReport,
};

/// Exact rational numbers used for utilities, beliefs and LP data.
pub type Q = BigRational;

/// Shorthand for the rational `n/d`.
///
/// # Panics
/// If `d` is zero.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/mechanisms.md")]
    mod mechanisms {}
    #[doc = include_str!("../../../book/src/dominance.md")]
    mod dominance {}
    #[doc = include_str!("../../../book/src/simplicity.md")]
    mod simplicity {}
    #[doc = include_str!("../../../book/src/beliefs.md")]
    mod beliefs {}
    #[doc = include_str!("../../../book/src/trade.md")]
    mod trade {}
    #[doc = include_str!("../../../book/src/voting.md")]
    mod voting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
