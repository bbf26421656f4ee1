//! The direct oracle: compatible strategic beliefs, robust best responses and
//! outcome correspondences, all in exact arithmetic.
//!
//! Beliefs have finite support. A utility belief puts weight on finitely
//! many opponent utility profiles; the compatible strategic beliefs split
//! each weight arbitrarily (correlation allowed) over that profile's joint
//! undominated strategies. The resulting set is a polytope with one simplex
//! block per supported profile.

use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dominance::mixed_ud_values;
use crate::error::{Error, Result};
use crate::lp::{LpOutcome, RationalLp, Sense};
use crate::mechanism::{Mechanism, OrdinalDomain, Preference, Utility};
use crate::simplicity::{check_simple, local_dictators, Classification};
use crate::{q, Q};

/// A finite-support belief of `agent` over the other agents' utility profiles.
///
/// Each profile lists one utility per opponent, in increasing agent order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtilityBelief {
    pub agent: usize,
    pub support: Vec<(Vec<Utility>, Q)>,
}

impl UtilityBelief {
    pub fn new(mech: &Mechanism, agent: usize, support: Vec<(Vec<Utility>, Q)>) -> Result<Self> {
        mech.check_agent(agent)?;
        if support.is_empty() {
            return Err(Error::InvalidBelief("empty support".into()));
        }
        let mut total = Q::zero();
        for (profile, p) in &support {
            if !p.is_positive() {
                return Err(Error::InvalidBelief(format!("probability {p} is not positive")));
            }
            if profile.len() + 1 != mech.agents() {
                return Err(Error::InvalidBelief(format!(
                    "profile lists {} utilities, expected {}",
                    profile.len(),
                    mech.agents() - 1
                )));
            }
            for u in profile {
                mech.check_utility(u)?;
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::InvalidBelief(format!("probabilities sum to {total}, not 1")));
        }
        Ok(UtilityBelief { agent, support })
    }

    /// Weight placed on opponent `k` (position among the opponents) having preference `pref`.
    pub fn marginal(&self, k: usize, pref: &Preference) -> Q {
        self.support.iter().filter(|(profile, _)| profile[k].preference() == *pref).map(|(_, p)| p.clone()).sum()
    }
}

/// One block of the polytope: `weight` split over the opponent profiles `profiles`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub weight: Q,
    /// Opponent-profile indices (see [`Mechanism::opp_index`]).
    pub profiles: Vec<usize>,
}

/// A set of strategic beliefs over `S_{-i}` given as a product of scaled simplices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeliefPolytope {
    agent: usize,
    opp_count: usize,
    blocks: Vec<Block>,
}

impl BeliefPolytope {
    pub fn from_blocks(agent: usize, opp_count: usize, blocks: Vec<Block>) -> Self {
        BeliefPolytope { agent, opp_count, blocks }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// True when the polytope contains a single strategic belief.
    pub fn is_point(&self) -> bool {
        self.blocks.iter().all(|b| b.profiles.len() == 1)
    }

    /// Opponent profiles that can receive positive probability.
    pub fn support(&self) -> BTreeSet<usize> {
        self.blocks.iter().flat_map(|b| b.profiles.iter().copied()).collect()
    }

    /// Strategic belief induced by splitting block `k` according to `split[k]`
    /// (one weight per profile of the block, summing to 1).
    pub fn project(&self, split: &[Vec<Q>]) -> Result<Vec<Q>> {
        if split.len() != self.blocks.len() {
            return Err(Error::InvalidBelief("one split per block expected".into()));
        }
        let mut out = vec![Q::zero(); self.opp_count];
        for (block, lambda) in self.blocks.iter().zip(split) {
            if lambda.len() != block.profiles.len()
                || lambda.iter().any(Signed::is_negative)
                || !lambda.iter().sum::<Q>().is_one()
            {
                return Err(Error::InvalidBelief("split is not a distribution over the block".into()));
            }
            for (&t, l) in block.profiles.iter().zip(lambda) {
                out[t] += &block.weight * l;
            }
        }
        Ok(out)
    }

    /// Builds the LP over the split variables with `objective[t]` per opponent profile.
    fn program(&self, maximize: bool, objective: impl Fn(usize) -> Q) -> RationalLp {
        let vars: usize = self.blocks.iter().map(|b| b.profiles.len()).sum();
        let mut lp = if maximize { RationalLp::maximize(vars) } else { RationalLp::minimize(vars) };
        let mut next = 0;
        for block in &self.blocks {
            let idx: Vec<usize> = (next..next + block.profiles.len()).collect();
            for (&v, &t) in idx.iter().zip(&block.profiles) {
                let c = objective(t);
                if !c.is_zero() {
                    lp.set_objective(v, c);
                }
            }
            lp.add_constraint(idx.iter().map(|&v| (v, Q::one())).collect(), Sense::Eq, block.weight.clone());
            next += block.profiles.len();
        }
        lp
    }

    /// Smallest and largest probability the polytope assigns to opponent profile `t`.
    pub fn coordinate_range(&self, t: usize) -> Result<(Q, Q)> {
        let indicator = |s: usize| if s == t { Q::one() } else { Q::zero() };
        let lo = self.program(false, indicator).solve()?;
        let hi = self.program(true, indicator).solve()?;
        match (lo, hi) {
            (LpOutcome::Optimal { value: a, .. }, LpOutcome::Optimal { value: b, .. }) => Ok((a, b)),
            _ => Err(Error::Lp { message: "coordinate range program not optimal".into(), program: String::new() }),
        }
    }

    /// Whether the strategic belief `belief` (indexed by opponent profile) lies in the polytope.
    pub fn contains(&self, belief: &[Q]) -> Result<bool> {
        if belief.len() != self.opp_count {
            return Ok(false);
        }
        let mut lp = self.program(true, |_| Q::zero());
        let mut by_profile: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut next = 0;
        for block in &self.blocks {
            for (k, &t) in block.profiles.iter().enumerate() {
                by_profile.entry(t).or_default().push(next + k);
            }
            next += block.profiles.len();
        }
        for (t, p) in belief.iter().enumerate() {
            match by_profile.get(&t) {
                Some(vars) => lp.add_constraint(vars.iter().map(|&v| (v, Q::one())).collect(), Sense::Eq, p.clone()),
                None if p.is_zero() => {}
                None => return Ok(false),
            }
        }
        Ok(matches!(lp.solve()?, LpOutcome::Optimal { .. }))
    }

    /// Minimum over the polytope of `sum_t belief(t) * diff(t)`, solved as an LP.
    pub fn minimize(&self, diff: impl Fn(usize) -> Q) -> Result<Q> {
        let lp = self.program(false, diff);
        match lp.solve()? {
            LpOutcome::Optimal { value, .. } => Ok(value),
            other => Err(Error::Lp { message: format!("belief program returned {other:?}"), program: lp.to_string() }),
        }
    }
}

/// The compatible strategic beliefs for `belief`: each supported opponent
/// profile's weight may be spread over its joint mixed-UD strategies.
pub fn compatible_polytope(mech: &Mechanism, belief: &UtilityBelief) -> Result<BeliefPolytope> {
    let mut cache = UdCache::default();
    compatible_polytope_cached(mech, belief, &mut cache)
}

#[derive(Default)]
pub(crate) struct UdCache {
    map: HashMap<(usize, Vec<Q>), Vec<usize>>,
}

impl UdCache {
    fn get(&mut self, mech: &Mechanism, agent: usize, u: &Utility) -> Result<Vec<usize>> {
        let key = (agent, u.values().to_vec());
        if let Some(ud) = self.map.get(&key) {
            return Ok(ud.clone());
        }
        let ud = mixed_ud_values(mech, agent, u.values())?;
        self.map.insert(key, ud.clone());
        Ok(ud)
    }
}

fn compatible_polytope_cached(mech: &Mechanism, belief: &UtilityBelief, cache: &mut UdCache) -> Result<BeliefPolytope> {
    let i = belief.agent;
    mech.check_agent(i)?;
    let opps: Vec<usize> = (0..mech.agents()).filter(|&j| j != i).collect();
    let mut blocks = Vec::with_capacity(belief.support.len());
    for (profile, weight) in &belief.support {
        let mut sets = Vec::with_capacity(opps.len());
        for (&j, u) in opps.iter().zip(profile) {
            let ud = cache.get(mech, j, u)?;
            if ud.is_empty() {
                return Err(Error::Lp { message: format!("empty UD set for agent {}", j + 1), program: String::new() });
            }
            sets.push(ud);
        }
        blocks.push(Block { weight: weight.clone(), profiles: mech.opp_product(i, &sets) });
    }
    Ok(BeliefPolytope::from_blocks(i, mech.num_opp_profiles(i), blocks))
}

/// Strategies of `agent` in `mixed_ud(u)` that maximize expected utility
/// against every strategic belief in `poly`.
///
/// For each pair `(s, s')` the worst case of `EU(s) - EU(s')` over the
/// polytope is an LP; `s` survives when every such minimum is non-negative.
pub fn br_intersection(mech: &Mechanism, agent: usize, u: &Utility, poly: &BeliefPolytope) -> Result<Vec<usize>> {
    mech.check_agent(agent)?;
    mech.check_utility(u)?;
    if poly.agent != agent {
        return Err(Error::InvalidBelief(format!(
            "polytope belongs to agent {}, not agent {}",
            poly.agent + 1,
            agent + 1
        )));
    }
    let ud = mixed_ud_values(mech, agent, u.values())?;
    robust_among(mech, agent, u.values(), poly, &ud)
}

fn robust_among(mech: &Mechanism, agent: usize, u: &[Q], poly: &BeliefPolytope, ud: &[usize]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    'candidates: for &s in ud {
        for other in (0..mech.num_strategies(agent)).filter(|&o| o != s) {
            let worst = poly.minimize(|t| &u[mech.outcome_vs(agent, s, t)] - &u[mech.outcome_vs(agent, other, t)])?;
            if worst.is_negative() {
                continue 'candidates;
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Robust best-response sets of every agent and the outcomes they generate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomePoint {
    pub strategies: Vec<Vec<usize>>,
    pub outcomes: BTreeSet<usize>,
}

/// The outcome correspondence at a profile of utilities and utility beliefs.
///
/// Fails with [`Error::EmptyIntersection`] if some agent has no robust best response.
pub fn outcome_correspondence(
    mech: &Mechanism,
    utilities: &[Utility],
    beliefs: &[UtilityBelief],
) -> Result<OutcomePoint> {
    if utilities.len() != mech.agents() || beliefs.len() != mech.agents() {
        return Err(Error::InvalidProfile("one utility and one belief per agent expected".into()));
    }
    let mut strategies = Vec::with_capacity(mech.agents());
    for (i, (u, b)) in utilities.iter().zip(beliefs).enumerate() {
        if b.agent != i {
            return Err(Error::InvalidBelief(format!("belief #{} belongs to agent {}", i + 1, b.agent + 1)));
        }
        let poly = compatible_polytope(mech, b)?;
        let robust = br_intersection(mech, i, u, &poly)?;
        if robust.is_empty() {
            return Err(Error::EmptyIntersection { agent: i });
        }
        strategies.push(robust);
    }
    let sizes: Vec<usize> = strategies.iter().map(Vec::len).collect();
    let mut outcomes = BTreeSet::new();
    for flat in 0..sizes.iter().product::<usize>() {
        let mut idx = flat;
        let mut profile = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            profile[i] = strategies[i][idx % sizes[i]];
            idx /= sizes[i];
        }
        outcomes.insert(mech.outcome(&profile));
    }
    Ok(OutcomePoint { strategies, outcomes })
}

/// A utility and belief for which `agent` has no robust best response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub agent: usize,
    pub utility: Utility,
    pub belief: UtilityBelief,
}

impl Witness {
    pub fn describe(&self, mech: &Mechanism) -> String {
        let alts = mech.alternatives();
        let fmt_u = |u: &Utility| {
            let parts: Vec<String> = (0..alts.len()).map(|a| format!("{}={}", alts.label(a), u.value(a))).collect();
            parts.join(" ")
        };
        let mut out = format!("agent {} with utility {}", self.agent + 1, fmt_u(&self.utility));
        for (profile, p) in &self.belief.support {
            let us: Vec<String> = profile.iter().map(&fmt_u).collect();
            out.push_str(&format!("\n  {p}: {}", us.join(" | ")));
        }
        out
    }

    /// Re-checks the witness against the compatible polytope.
    pub fn confirm(&self, mech: &Mechanism) -> Result<bool> {
        let poly = compatible_polytope(mech, &self.belief)?;
        Ok(br_intersection(mech, self.agent, &self.utility, &poly)?.is_empty())
    }
}

/// Everything the oracle observed on one mechanism.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub trials: usize,
    pub seed: u64,
    /// Verdict of the local-dictator test, for comparison.
    pub dictator_test: Classification,
    /// Random trials that produced an empty intersection.
    pub empty_trials: Vec<Witness>,
    /// Result of the targeted search, run only when the local-dictator test fails.
    pub targeted: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Pass,
    Fail(Witness),
}

impl OracleReport {
    pub fn verdict(&self) -> OracleVerdict {
        match self.empty_trials.first().or(self.targeted.as_ref()) {
            Some(w) => OracleVerdict::Fail(w.clone()),
            None => OracleVerdict::Pass,
        }
    }

    /// Whether the oracle and the local-dictator test agree.
    pub fn concordant(&self) -> bool {
        if self.dictator_test.is_simple() {
            self.empty_trials.is_empty()
        } else {
            self.targeted.is_some() || !self.empty_trials.is_empty()
        }
    }
}

const GRID: [(i64, i64); 15] = [
    (1, 100),
    (1, 20),
    (1, 10),
    (1, 5),
    (1, 4),
    (1, 3),
    (2, 5),
    (1, 2),
    (3, 5),
    (2, 3),
    (3, 4),
    (4, 5),
    (9, 10),
    (19, 20),
    (99, 100),
];

/// A finite grid of cardinal representatives of `pref`.
pub fn utility_grid(pref: &Preference) -> Vec<Utility> {
    let m = pref.len();
    if m < 3 {
        return vec![Utility::evenly_spaced(pref)];
    }
    let values: Vec<Q> = GRID.iter().rev().map(|&(n, d)| q(n, d)).collect();
    let mut combos = Vec::new();
    let mut current = Vec::new();
    fn rec(values: &[Q], start: usize, need: usize, cur: &mut Vec<Q>, out: &mut Vec<Vec<Q>>) {
        if cur.len() == need {
            out.push(cur.clone());
            return;
        }
        for k in start..values.len() {
            cur.push(values[k].clone());
            rec(values, k + 1, need, cur, out);
            cur.pop();
        }
    }
    rec(&values, 0, m - 2, &mut current, &mut combos);
    const CAP: usize = 400;
    if combos.len() > CAP {
        let step = combos.len().div_ceil(CAP);
        combos = combos.into_iter().step_by(step).collect();
    }
    // middle values first: they are the most informative
    combos.sort_by_key(|c| {
        let mid = q(1, 2);
        let dist: Q = c.iter().map(|v| (v - &mid).abs()).sum();
        dist
    });
    combos.into_iter().map(|c| Utility::for_preference(pref, &c).expect("grid values are valid")).collect()
}

/// A handful of qualitatively different representatives of `pref`.
pub fn representatives(pref: &Preference) -> Vec<Utility> {
    let m = pref.len() as i64;
    if m < 3 {
        return vec![Utility::evenly_spaced(pref)];
    }
    let k = m - 2;
    let mut interiors: Vec<Vec<Q>> = vec![
        (1..=k).map(|j| q(m - 1 - j, m - 1)).collect(),
        (1..=k).map(|j| q(k + 1 - j, 10 * (k + 1))).collect(),
        (1..=k).map(|j| Q::one() - q(j, 10 * (k + 1))).collect(),
        (1..=k).map(|j| q(k + 1 - j, 100 * (k + 1))).collect(),
        (1..=k).map(|j| Q::one() - q(j, 100 * (k + 1))).collect(),
    ];
    interiors.dedup();
    interiors.into_iter().map(|c| Utility::for_preference(pref, &c).expect("representative values are valid")).collect()
}

/// A random representative of `pref` with interior values on a 1/60 grid.
pub fn random_utility<R: Rng>(pref: &Preference, rng: &mut R) -> Utility {
    let m = pref.len();
    if m < 3 {
        return Utility::evenly_spaced(pref);
    }
    const D: i64 = 60;
    let mut picks = BTreeSet::new();
    while picks.len() < m - 2 {
        picks.insert(rng.random_range(1..D));
    }
    let interior: Vec<Q> = picks.into_iter().rev().map(|n| q(n, D)).collect();
    Utility::for_preference(pref, &interior).expect("distinct grid values are valid")
}

/// A random belief of `agent` over opponent utility profiles drawn from `dom`,
/// with between one and `max_support` profiles.
pub fn random_belief<R: Rng>(dom: &OrdinalDomain, agent: usize, max_support: usize, rng: &mut R) -> UtilityBelief {
    sample_belief(dom, agent, max_support, rng, |pref, rng| random_utility(pref, rng))
}

fn sample_belief<R: Rng>(
    dom: &OrdinalDomain,
    agent: usize,
    max_support: usize,
    rng: &mut R,
    mut draw: impl FnMut(&Preference, &mut R) -> Utility,
) -> UtilityBelief {
    let size = rng.random_range(1..=max_support.max(1));
    let weights: Vec<i64> = (0..size).map(|_| rng.random_range(1..=12)).collect();
    let total: i64 = weights.iter().sum();
    let support = weights
        .into_iter()
        .map(|w| {
            let profile = (0..dom.agents())
                .filter(|&j| j != agent)
                .map(|j| {
                    let prefs = dom.preferences(j);
                    let pref = &prefs[rng.random_range(0..prefs.len())];
                    draw(pref, rng)
                })
                .collect();
            (profile, q(w, total))
        })
        .collect();
    UtilityBelief { agent, support }
}

/// `diffs[k][s][s']`: minimum of `u(g(s,t)) - u(g(s',t))` over the profiles `t` of block `k`.
pub(crate) fn min_differences(mech: &Mechanism, agent: usize, u: &[Q], blocks: &[&[usize]]) -> Vec<Vec<Vec<Q>>> {
    let k = mech.num_strategies(agent);
    blocks
        .iter()
        .map(|profiles| {
            (0..k)
                .map(|s| {
                    (0..k)
                        .map(|o| {
                            profiles
                                .iter()
                                .map(|&t| &u[mech.outcome_vs(agent, s, t)] - &u[mech.outcome_vs(agent, o, t)])
                                .min()
                                .expect("blocks are nonempty")
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Looks for weights over the blocks under which every strategy in `ud` is
/// strictly beaten, in the worst case, by some other strategy.
///
/// For each assignment of a beating strategy to every member of `ud`, an LP
/// maximizes the margin `delta` by which all of them lose; a positive margin
/// yields the weights. Returns the weights and the assignment.
pub(crate) fn find_breaking_weights(
    diffs: &[Vec<Vec<Q>>],
    ud: &[usize],
    strategies: usize,
) -> Result<Option<(Vec<Q>, Vec<usize>)>> {
    let blocks = diffs.len();
    if ud.is_empty() || blocks == 0 {
        return Ok(None);
    }
    let mut options: Vec<Vec<usize>> = Vec::with_capacity(ud.len());
    for &s in ud {
        let beaters: Vec<usize> =
            (0..strategies).filter(|&o| o != s && diffs.iter().any(|d| d[s][o].is_negative())).collect();
        if beaters.is_empty() {
            return Ok(None);
        }
        options.push(beaters);
    }
    let sizes: Vec<usize> = options.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    for flat in 0..total {
        let mut idx = flat;
        let mut choice = vec![0; ud.len()];
        for k in (0..ud.len()).rev() {
            choice[k] = options[k][idx % sizes[k]];
            idx /= sizes[k];
        }
        let mut lp = RationalLp::maximize(blocks + 1);
        lp.set_objective(blocks, Q::one());
        lp.set_upper(blocks, Q::one());
        lp.add_constraint((0..blocks).map(|k| (k, Q::one())).collect(), Sense::Eq, Q::one());
        for (&s, &o) in ud.iter().zip(&choice) {
            let mut coeffs: Vec<(usize, Q)> = (0..blocks).map(|k| (k, diffs[k][s][o].clone())).collect();
            coeffs.push((blocks, Q::one()));
            lp.add_constraint(coeffs, Sense::Le, Q::zero());
        }
        if let LpOutcome::Optimal { value, mut x } = lp.solve()? {
            if value.is_positive() {
                x.truncate(blocks);
                return Ok(Some((x, choice)));
            }
        }
    }
    Ok(None)
}

/// Candidate opponent types for the targeted search: per opponent, one
/// utility for each distinct mixed-UD set reachable from the domain's
/// preferences with the representative utilities.
fn candidate_types(mech: &Mechanism, dom: &OrdinalDomain, agent: usize) -> Result<Vec<(Vec<Utility>, Vec<usize>)>> {
    let opps: Vec<usize> = (0..mech.agents()).filter(|&j| j != agent).collect();
    let mut per_opp: Vec<Vec<(Utility, Vec<usize>)>> = Vec::with_capacity(opps.len());
    for &j in &opps {
        let mut seen: Vec<(Utility, Vec<usize>)> = Vec::new();
        for pref in dom.preferences(j) {
            for u in representatives(pref) {
                let ud = mixed_ud_values(mech, j, u.values())?;
                if !seen.iter().any(|(_, s)| *s == ud) {
                    seen.push((u, ud));
                }
            }
        }
        per_opp.push(seen);
    }
    let sizes: Vec<usize> = per_opp.iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for flat in 0..sizes.iter().product::<usize>() {
        let mut idx = flat;
        let mut pick = vec![0; sizes.len()];
        for k in (0..sizes.len()).rev() {
            pick[k] = idx % sizes[k];
            idx /= sizes[k];
        }
        let utilities: Vec<Utility> = pick.iter().enumerate().map(|(k, &p)| per_opp[k][p].0.clone()).collect();
        let sets: Vec<Vec<usize>> = pick.iter().enumerate().map(|(k, &p)| per_opp[k][p].1.clone()).collect();
        out.push((utilities, mech.opp_product(agent, &sets)));
    }
    Ok(out)
}

/// Searches for a utility and belief with an empty robust best-response set.
///
/// Agents and preferences taking part in `hint` (a profile without a local
/// dictator) are tried first. For every candidate utility on a finite grid
/// the belief search over the candidate opponent types is exhaustive; the
/// witness is confirmed with [`br_intersection`] before it is returned.
pub fn targeted_witness_search(
    mech: &Mechanism,
    dom: &OrdinalDomain,
    hint: Option<&[Preference]>,
) -> Result<Option<Witness>> {
    dom.check_fits(mech)?;
    let mut agents: Vec<usize> = (0..mech.agents()).collect();
    if let Some(h) = hint {
        let report = local_dictators(mech, dom, h)?;
        agents.sort_by_key(|&i| std::cmp::Reverse(report.ud[i].len()));
    }
    for i in agents {
        let types = candidate_types(mech, dom, i)?;
        let blocks: Vec<&[usize]> = types.iter().map(|(_, b)| b.as_slice()).collect();
        let mut prefs: Vec<&Preference> = dom.preferences(i).iter().collect();
        if let Some(h) = hint {
            prefs.sort_by_key(|p| **p != h[i]);
        }
        for pref in prefs {
            for u in utility_grid(pref) {
                let ud = mixed_ud_values(mech, i, u.values())?;
                if ud.len() < 2 {
                    continue;
                }
                let diffs = min_differences(mech, i, u.values(), &blocks);
                let Some((weights, _)) = find_breaking_weights(&diffs, &ud, mech.num_strategies(i))? else {
                    continue;
                };
                let support: Vec<(Vec<Utility>, Q)> = types
                    .iter()
                    .zip(&weights)
                    .filter(|(_, w)| w.is_positive())
                    .map(|((us, _), w)| (us.clone(), w.clone()))
                    .collect();
                let witness = Witness { agent: i, utility: u, belief: UtilityBelief::new(mech, i, support)? };
                if witness.confirm(mech)? {
                    return Ok(Some(witness));
                }
            }
        }
    }
    Ok(None)
}

fn trial(
    mech: &Mechanism,
    dom: &OrdinalDomain,
    seed: u64,
    index: usize,
    cache: &mut UdCache,
) -> Result<Option<Witness>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let i = rng.random_range(0..mech.agents());
    let prefs = dom.preferences(i);
    let u = random_utility(&prefs[rng.random_range(0..prefs.len())], &mut rng);
    let belief = sample_belief(dom, i, 4, &mut rng, |pref, rng| {
        let reps = representatives(pref);
        if rng.random_bool(0.5) {
            reps[rng.random_range(0..reps.len())].clone()
        } else {
            random_utility(pref, rng)
        }
    });
    let poly = compatible_polytope_cached(mech, &belief, cache)?;
    let ud = cache.get(mech, i, &u)?;
    let robust = robust_among(mech, i, u.values(), &poly, &ud)?;
    Ok(robust.is_empty().then_some(Witness { agent: i, utility: u, belief }))
}

/// Samples `trials` (agent, utility, belief) triples and checks that each has
/// a robust best response; if the local-dictator test fails, also runs
/// [`targeted_witness_search`].
///
/// Trials use per-trial streams of a ChaCha generator seeded with `seed`, so
/// the report does not depend on the thread count.
pub fn oracle_check(mech: &Mechanism, dom: &OrdinalDomain, trials: usize, seed: u64) -> Result<OracleReport> {
    dom.check_fits(mech)?;
    let dictator_test = check_simple(mech, dom)?;
    let results: Vec<Option<Witness>> = (0..trials)
        .into_par_iter()
        .map_init(UdCache::default, |cache, t| trial(mech, dom, seed, t, cache))
        .collect::<Result<_>>()?;
    let empty_trials: Vec<Witness> = results.into_iter().flatten().collect();
    let targeted = match &dictator_test {
        Classification::NotStrategicallySimple { witness } => targeted_witness_search(mech, dom, Some(witness))?,
        _ => None,
    };
    Ok(OracleReport { trials, seed, dictator_test, empty_trials, targeted })
}

/// Result of [`non_responsiveness_check`].
#[derive(Clone, Debug)]
pub struct NonResponsiveness {
    pub dictator: usize,
    pub outcomes: BTreeSet<usize>,
    pub samples: usize,
    /// First sample whose outcome set differed, with that set.
    pub divergence: Option<(usize, BTreeSet<usize>)>,
}

impl NonResponsiveness {
    pub fn invariant(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Holds the first local dictator's utility and belief fixed at `profile`
/// and resamples everyone else's (same ordinal preferences), checking that
/// the outcome correspondence does not move.
pub fn non_responsiveness_check(
    mech: &Mechanism,
    dom: &OrdinalDomain,
    profile: &[Preference],
    samples: usize,
    seed: u64,
) -> Result<NonResponsiveness> {
    let report = local_dictators(mech, dom, profile)?;
    let dictator =
        *report.dictators.first().ok_or_else(|| Error::Precondition("no local dictator at this profile".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fixed_u = random_utility(&profile[dictator], &mut rng);
    let fixed_b = random_belief(dom, dictator, 3, &mut rng);
    let mut reference: Option<BTreeSet<usize>> = None;
    for sample in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample as u64 + 1);
        let mut us = Vec::with_capacity(mech.agents());
        let mut bs = Vec::with_capacity(mech.agents());
        for (i, pref) in profile.iter().enumerate() {
            if i == dictator {
                us.push(fixed_u.clone());
                bs.push(fixed_b.clone());
            } else {
                us.push(random_utility(pref, &mut rng));
                bs.push(random_belief(dom, i, 3, &mut rng));
            }
        }
        let point = outcome_correspondence(mech, &us, &bs)?;
        match &reference {
            None => reference = Some(point.outcomes),
            Some(r) if *r != point.outcomes => {
                return Ok(NonResponsiveness {
                    dictator,
                    outcomes: r.clone(),
                    samples: sample + 1,
                    divergence: Some((sample, point.outcomes)),
                })
            }
            Some(_) => {}
        }
    }
    Ok(NonResponsiveness { dictator, outcomes: reference.unwrap_or_default(), samples, divergence: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::AlternativeSet;
    use crate::voting::{figure1, mechanism_a};

    fn alts() -> AlternativeSet {
        AlternativeSet::new(["a", "b", "c"]).unwrap()
    }

    fn pref(code: &str) -> Preference {
        Preference::parse(code, &alts()).unwrap()
    }

    fn uniform_over_types(mech: &Mechanism, agent: usize) -> UtilityBelief {
        let support = Preference::all(3).iter().map(|p| (vec![Utility::evenly_spaced(p)], q(1, 6))).collect();
        UtilityBelief::new(mech, agent, support).unwrap()
    }

    // Worst case of EU(s) - EU(s') computed block by block.
    fn separable_min(mech: &Mechanism, agent: usize, u: &[Q], poly: &BeliefPolytope, s: usize, o: usize) -> Q {
        poly.blocks()
            .iter()
            .map(|b| {
                let worst = b
                    .profiles
                    .iter()
                    .map(|&t| &u[mech.outcome_vs(agent, s, t)] - &u[mech.outcome_vs(agent, o, t)])
                    .min()
                    .unwrap();
                &b.weight * worst
            })
            .sum()
    }

    #[test]
    fn figure1_br_threshold_at_one_half() {
        let m = figure1();
        let t = m.strategy_index(0, "T").unwrap();
        let b = m.strategy_index(0, "B").unwrap();
        let belief = uniform_over_types(&m, 0);
        let poly = compatible_polytope(&m, &belief).unwrap();
        for (qv, expected) in [(q(3, 4), vec![t]), (q(1, 4), vec![b]), (q(1, 2), vec![t, b])] {
            let u = Utility::new(vec![qv.clone(), q(0, 1), q(1, 1)]).unwrap();
            // closed form: EU(T) = q, EU(B) = (q + 1) / 3
            let eu_t = qv.clone();
            let eu_b = (&qv + Q::one()) / q(3, 1);
            assert_eq!(eu_t > eu_b, expected == vec![t]);
            assert_eq!(br_intersection(&m, 0, &u, &poly).unwrap(), expected, "q = {qv}");
        }
    }

    #[test]
    fn dominant_strategy_is_always_robust() {
        let m = figure1();
        let u = Utility::new(vec![q(1, 1), q(1, 3), q(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let belief = random_belief(&OrdinalDomain::full(2, 3), 0, 3, &mut rng);
            let poly = compatible_polytope(&m, &belief).unwrap();
            assert_eq!(br_intersection(&m, 0, &u, &poly).unwrap(), vec![m.strategy_index(0, "T").unwrap()]);
        }
    }

    #[test]
    fn lp_minimum_matches_separable_form() {
        let m = mechanism_a();
        let dom = OrdinalDomain::full(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let agent = rng.random_range(0..2);
            let u = random_utility(&dom.preferences(agent)[rng.random_range(0..6)], &mut rng);
            let poly = compatible_polytope(&m, &random_belief(&dom, agent, 4, &mut rng)).unwrap();
            for s in 0..5 {
                for o in 0..5 {
                    let lp = poly
                        .minimize(|t| &u.values()[m.outcome_vs(agent, s, t)] - &u.values()[m.outcome_vs(agent, o, t)])
                        .unwrap();
                    assert_eq!(lp, separable_min(&m, agent, u.values(), &poly, s, o));
                }
            }
        }
    }

    #[test]
    fn figure1_segment() {
        let m = figure1();
        let belief = UtilityBelief::new(
            &m,
            0,
            vec![
                (vec![Utility::evenly_spaced(&pref("cab"))], q(1, 2)),
                (vec![Utility::evenly_spaced(&pref("cba"))], q(1, 2)),
            ],
        )
        .unwrap();
        let poly = compatible_polytope(&m, &belief).unwrap();
        let c2 = m.opp_index(0, &[m.strategy_index(1, "C2").unwrap()]).unwrap();
        let r = m.opp_index(0, &[m.strategy_index(1, "R").unwrap()]).unwrap();
        assert_eq!(poly.coordinate_range(c2).unwrap(), (q(1, 2), q(1, 1)));
        assert_eq!(poly.coordinate_range(r).unwrap(), (q(0, 1), q(1, 2)));
        let mut end = vec![Q::zero(); 4];
        end[c2] = q(1, 1);
        assert!(poly.contains(&end).unwrap());
        end[c2] = q(1, 2);
        end[r] = q(1, 2);
        assert!(poly.contains(&end).unwrap());
        end[c2] = q(1, 4);
        end[r] = q(3, 4);
        assert!(!poly.contains(&end).unwrap());
    }

    #[test]
    fn singleton_ud_support_gives_a_point() {
        let m = figure1();
        let belief = UtilityBelief::new(&m, 0, vec![(vec![Utility::evenly_spaced(&pref("abc"))], q(1, 1))]).unwrap();
        assert!(compatible_polytope(&m, &belief).unwrap().is_point());
    }

    #[test]
    fn outcome_correspondence_examples() {
        let m = figure1();
        let a_top = Utility::evenly_spaced(&pref("abc"));
        let beliefs = vec![uniform_over_types(&m, 0), uniform_over_types(&m, 1)];
        let point = outcome_correspondence(&m, &[a_top.clone(), a_top], &beliefs).unwrap();
        assert_eq!(point.outcomes, BTreeSet::from([0]));
        let u1 = Utility::new(vec![q(3, 4), q(0, 1), q(1, 1)]).unwrap();
        let u2 = Utility::evenly_spaced(&pref("bac"));
        let point = outcome_correspondence(&m, &[u1, u2], &beliefs).unwrap();
        assert_eq!(point.strategies[0], vec![m.strategy_index(0, "T").unwrap()]);
        assert_eq!(point.outcomes, BTreeSet::from([0]));
    }

    #[test]
    fn oracle_on_simple_and_constant_mechanisms() {
        let dom = OrdinalDomain::full(2, 3);
        let r = oracle_check(&figure1(), &dom, 300, 1).unwrap();
        assert_eq!(r.verdict(), OracleVerdict::Pass);
        assert!(r.concordant());
        let constant = Mechanism::from_grid(&["a", "b", "c"], &["x"], &["y"], &[&["c"]]).unwrap();
        assert_eq!(oracle_check(&constant, &dom, 50, 2).unwrap().verdict(), OracleVerdict::Pass);
    }

    #[test]
    fn oracle_finds_pennies_witness() {
        let m = Mechanism::from_grid(&["a", "b", "c"], &["U", "D"], &["L", "R"], &[&["a", "b"], &["b", "a"]]).unwrap();
        let dom = OrdinalDomain::full(2, 3);
        let r = oracle_check(&m, &dom, 50, 3).unwrap();
        assert!(!r.dictator_test.is_simple());
        let w = r.targeted.clone().expect("witness");
        assert!(w.confirm(&m).unwrap());
        assert!(r.concordant());
    }

    #[test]
    fn oracle_reports_are_reproducible() {
        let dom = OrdinalDomain::full(2, 3);
        let a = oracle_check(&mechanism_a(), &dom, 60, 9).unwrap();
        let b = oracle_check(&mechanism_a(), &dom, 60, 9).unwrap();
        assert_eq!(a.verdict(), b.verdict());
        assert_eq!(a.empty_trials, b.empty_trials);
    }

    #[test]
    fn non_responsiveness_examples() {
        let dom = OrdinalDomain::full(2, 3);
        let r = non_responsiveness_check(&figure1(), &dom, &[pref("cab"), pref("cba")], 25, 4).unwrap();
        assert_eq!(r.dictator, 0);
        assert!(r.invariant());
        let constant = Mechanism::from_grid(&["a", "b", "c"], &["x"], &["y"], &[&["c"]]).unwrap();
        assert!(non_responsiveness_check(&constant, &dom, &[pref("abc"), pref("abc")], 5, 4).unwrap().invariant());
    }

    #[test]
    fn representatives_do_not_matter_when_ud_sets_agree() {
        let m = mechanism_a();
        let u = Utility::new(vec![q(0, 1), q(2, 5), q(1, 1)]).unwrap();
        for reps in [(q(1, 2), q(1, 3)), (q(1, 10), q(9, 10))] {
            let b1 = UtilityBelief::new(
                &m,
                0,
                vec![
                    (vec![Utility::for_preference(&pref("bac"), std::slice::from_ref(&reps.0)).unwrap()], q(1, 3)),
                    (vec![Utility::for_preference(&pref("bca"), std::slice::from_ref(&reps.1)).unwrap()], q(2, 3)),
                ],
            )
            .unwrap();
            let poly = compatible_polytope(&m, &b1).unwrap();
            // mixed UD equals pure UD for this mechanism, so the answer is fixed
            assert_eq!(br_intersection(&m, 0, &u, &poly).unwrap(), vec![m.strategy_index(0, "c+").unwrap()]);
        }
    }
}
