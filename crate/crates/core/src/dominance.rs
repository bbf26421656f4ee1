//! Undominated strategies under ordinal and cardinal weak dominance.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lp::{LpOutcome, RationalLp, Sense};
use crate::mechanism::{Mechanism, Preference, Utility};
use crate::Q;

/// What a UD set was computed from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UdBasis {
    Ordinal(Preference),
    Cardinal(Utility),
}

/// The strategies of one agent that are not weakly dominated, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UdSet {
    pub agent: usize,
    pub basis: UdBasis,
    pub strategies: Vec<usize>,
}

impl UdSet {
    pub fn contains(&self, s: usize) -> bool {
        self.strategies.contains(&s)
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn labels<'a>(&self, mech: &'a Mechanism) -> Vec<&'a str> {
        self.strategies.iter().map(|&s| mech.strategy_label(self.agent, s)).collect()
    }
}

/// Strategies of `agent` not weakly dominated by another pure strategy given `pref`.
pub fn pure_ud(mech: &Mechanism, agent: usize, pref: &Preference) -> Result<UdSet> {
    mech.check_agent(agent)?;
    mech.check_preference(pref)?;
    Ok(UdSet { agent, basis: UdBasis::Ordinal(pref.clone()), strategies: pure_ud_ranks(mech, agent, pref.ranks()) })
}

/// Ordinal UD set from a rank vector (0 = best).
pub(crate) fn pure_ud_ranks(mech: &Mechanism, agent: usize, rank: &[usize]) -> Vec<usize> {
    let rows: Vec<&[usize]> = (0..mech.num_strategies(agent)).map(|s| mech.row(agent, s)).collect();
    ud_of_rows(&rows, rank)
}

/// Indices of outcome rows not weakly dominated by another row under `rank`.
pub(crate) fn ud_of_rows(rows: &[&[usize]], rank: &[usize]) -> Vec<usize> {
    (0..rows.len())
        .filter(|&s| {
            !(0..rows.len()).any(|t| {
                t != s && {
                    let mut strict = false;
                    let weak = rows[s].iter().zip(rows[t]).all(|(&a, &b)| {
                        strict |= rank[b] < rank[a];
                        rank[b] <= rank[a]
                    });
                    weak && strict
                }
            })
        })
        .collect()
}

/// Strategies of `agent` not weakly dominated by any mixture of the other strategies given `u`.
///
/// Each strategy is tested with an exact LP; nothing is inferred from the ordinal test.
pub fn mixed_ud(mech: &Mechanism, agent: usize, u: &Utility) -> Result<UdSet> {
    mech.check_agent(agent)?;
    mech.check_utility(u)?;
    Ok(UdSet { agent, basis: UdBasis::Cardinal(u.clone()), strategies: mixed_ud_values(mech, agent, u.values())? })
}

pub(crate) fn mixed_ud_values(mech: &Mechanism, agent: usize, u: &[Q]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for s in 0..mech.num_strategies(agent) {
        if !mixed_dominated(mech, agent, u, s)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Whether `s` is weakly dominated by a mixture over the agent's other strategies.
///
/// Variables: the mixture weights, then one slack per opponent profile capped at 1.
/// `s` is dominated iff the program is feasible with a positive total slack.
pub(crate) fn mixed_dominated(mech: &Mechanism, agent: usize, u: &[Q], s: usize) -> Result<bool> {
    let k = mech.num_strategies(agent);
    if k == 1 {
        return Ok(false);
    }
    let others: Vec<usize> = (0..k).filter(|&t| t != s).collect();
    let opp = mech.num_opp_profiles(agent);
    let m = others.len();
    let mut lp = RationalLp::maximize(m + opp);
    lp.add_constraint((0..m).map(|j| (j, Q::one())).collect(), Sense::Eq, Q::one());
    for t in 0..opp {
        let mut coeffs: Vec<(usize, Q)> =
            others.iter().enumerate().map(|(j, &o)| (j, u[mech.outcome_vs(agent, o, t)].clone())).collect();
        coeffs.push((m + t, -Q::one()));
        lp.add_constraint(coeffs, Sense::Ge, u[mech.outcome_vs(agent, s, t)].clone());
        lp.set_objective(m + t, Q::one());
        lp.set_upper(m + t, Q::one());
    }
    Ok(match lp.solve()? {
        LpOutcome::Optimal { value, .. } => value.is_positive(),
        LpOutcome::Infeasible => false,
        LpOutcome::Unbounded => {
            return Err(Error::Lp { message: "dominance program unbounded".into(), program: lp.to_string() })
        }
    })
}

/// A full-support strategic belief (indexed by opponent profile) against which
/// `s` maximizes expected utility.
///
/// Fails with a precondition error when `s` is weakly dominated given `u`,
/// since then no such belief exists.
pub fn supporting_belief(mech: &Mechanism, agent: usize, u: &Utility, s: usize) -> Result<Vec<Q>> {
    mech.check_agent(agent)?;
    mech.check_utility(u)?;
    if s >= mech.num_strategies(agent) {
        return Err(Error::StrategyOutOfRange { agent, strategy: s });
    }
    let opp = mech.num_opp_profiles(agent);
    let u = u.values();
    // variables: mu_0..mu_{opp-1}, delta
    let mut lp = RationalLp::maximize(opp + 1);
    lp.set_objective(opp, Q::one());
    lp.set_upper(opp, Q::one());
    lp.add_constraint((0..opp).map(|t| (t, Q::one())).collect(), Sense::Eq, Q::one());
    for t in 0..opp {
        lp.add_constraint(vec![(t, Q::one()), (opp, -Q::one())], Sense::Ge, Q::zero());
    }
    for other in (0..mech.num_strategies(agent)).filter(|&o| o != s) {
        let coeffs =
            (0..opp).map(|t| (t, &u[mech.outcome_vs(agent, s, t)] - &u[mech.outcome_vs(agent, other, t)])).collect();
        lp.add_constraint(coeffs, Sense::Ge, Q::zero());
    }
    match lp.solve()? {
        LpOutcome::Optimal { value, mut x } if value.is_positive() => {
            x.truncate(opp);
            Ok(x)
        }
        _ => Err(Error::Precondition(format!(
            "strategy {} of agent {} is weakly dominated, so no full-support belief supports it",
            mech.strategy_label(agent, s),
            agent + 1
        ))),
    }
}

/// Expected utility of `s` against a strategic belief indexed by opponent profile.
pub fn expected_utility(mech: &Mechanism, agent: usize, u: &[Q], s: usize, belief: &[Q]) -> Q {
    belief.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(|(t, p)| p * &u[mech.outcome_vs(agent, s, t)]).sum()
}
