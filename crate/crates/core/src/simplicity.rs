//! Local dictators, the type 1 / type 2 classification, delegation
//! mechanisms and the structural properties every simple mechanism has.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beliefs::{self, find_breaking_weights, BeliefPolytope, Block, UtilityBelief, Witness};
use crate::dominance::{mixed_ud_values, pure_ud_ranks, ud_of_rows};
use crate::error::{Error, Result};
use crate::mechanism::{AlternativeSet, Mechanism, OrdinalDomain, Preference, RawTable, Utility};

/// Pure UD sets for every agent and every admissible preference: `[agent][pref]`.
pub(crate) fn ud_table(mech: &Mechanism, dom: &OrdinalDomain) -> Vec<Vec<Vec<usize>>> {
    (0..mech.agents()).map(|i| dom.preferences(i).iter().map(|p| pure_ud_ranks(mech, i, p.ranks())).collect()).collect()
}

/// For each dictator, the alternative each of their UD strategies enforces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnforcedMap {
    pub agent: usize,
    /// `(strategy, alternative)` pairs in strategy order.
    pub outcomes: Vec<(usize, usize)>,
}

/// Local dictators at one preference profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DictatorReport {
    pub profile: Vec<Preference>,
    /// Pure UD set of each agent at this profile.
    pub ud: Vec<Vec<usize>>,
    pub dictators: Vec<usize>,
    pub enforced: Vec<EnforcedMap>,
}

impl DictatorReport {
    pub fn is_dictator(&self, agent: usize) -> bool {
        self.dictators.contains(&agent)
    }
}

fn dictators_at(mech: &Mechanism, ud: &[&[usize]]) -> (Vec<usize>, Vec<EnforcedMap>) {
    let mut dictators = Vec::new();
    let mut enforced = Vec::new();
    for i in 0..mech.agents() {
        let sets: Vec<Vec<usize>> = (0..mech.agents()).filter(|&j| j != i).map(|j| ud[j].to_vec()).collect();
        let opp = mech.opp_product(i, &sets);
        let mut map = Vec::with_capacity(ud[i].len());
        let ok = ud[i].iter().all(|&s| {
            let first = mech.outcome_vs(i, s, opp[0]);
            map.push((s, first));
            opp.iter().all(|&t| mech.outcome_vs(i, s, t) == first)
        });
        if ok {
            dictators.push(i);
            enforced.push(EnforcedMap { agent: i, outcomes: map });
        }
    }
    (dictators, enforced)
}

fn profile_indices(mech: &Mechanism, dom: &OrdinalDomain, profile: &[Preference]) -> Result<Vec<usize>> {
    dom.check_fits(mech)?;
    if profile.len() != mech.agents() {
        return Err(Error::InvalidProfile(format!("expected {} preferences, got {}", mech.agents(), profile.len())));
    }
    profile
        .iter()
        .enumerate()
        .map(|(i, p)| {
            dom.index_of(i, p).ok_or_else(|| {
                Error::InvalidProfile(format!(
                    "preference {} of agent {} is outside the domain",
                    p.display(mech.alternatives()),
                    i + 1
                ))
            })
        })
        .collect()
}

/// The agents satisfying the local-dictator condition at `profile`.
pub fn local_dictators(mech: &Mechanism, dom: &OrdinalDomain, profile: &[Preference]) -> Result<DictatorReport> {
    profile_indices(mech, dom, profile)?;
    let ud: Vec<Vec<usize>> = profile.iter().enumerate().map(|(i, p)| pure_ud_ranks(mech, i, p.ranks())).collect();
    let refs: Vec<&[usize]> = ud.iter().map(Vec::as_slice).collect();
    let (dictators, enforced) = dictators_at(mech, &refs);
    Ok(DictatorReport { profile: profile.to_vec(), ud, dictators, enforced })
}

/// Verdict of [`check_simple`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification {
    /// The first profile (in domain order) without a local dictator.
    NotStrategicallySimple {
        witness: Vec<Preference>,
    },
    /// Agents that are local dictators at every profile.
    Type1 {
        dictators: Vec<usize>,
    },
    Type2,
}

impl Classification {
    pub fn is_simple(&self) -> bool {
        !matches!(self, Classification::NotStrategicallySimple { .. })
    }

    pub fn describe(&self, alts: &AlternativeSet) -> String {
        match self {
            Classification::NotStrategicallySimple { witness } => {
                let codes: Vec<String> = witness.iter().map(|p| p.display(alts)).collect();
                format!("not strategically simple (no local dictator at {})", codes.join(","))
            }
            Classification::Type1 { dictators } => {
                let ds: Vec<String> = dictators.iter().map(|d| (d + 1).to_string()).collect();
                format!("Type 1 strategically simple (delegate: agent {})", ds.join(", "))
            }
            Classification::Type2 => "Type 2 strategically simple".to_string(),
        }
    }
}

/// Per-profile dictator table plus the classification.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub reports: Vec<DictatorReport>,
    pub classification: Classification,
}

/// Computes the dictator set at every profile of the domain.
pub fn analyze(mech: &Mechanism, dom: &OrdinalDomain) -> Result<Analysis> {
    dom.check_fits(mech)?;
    let uds = ud_table(mech, dom);
    let mut reports = Vec::with_capacity(dom.num_profiles());
    for idx in dom.profiles() {
        let ud: Vec<&[usize]> = idx.iter().enumerate().map(|(i, &k)| uds[i][k].as_slice()).collect();
        let (dictators, enforced) = dictators_at(mech, &ud);
        reports.push(DictatorReport {
            profile: dom.profile_preferences(&idx),
            ud: ud.iter().map(|s| s.to_vec()).collect(),
            dictators,
            enforced,
        });
    }
    let classification = classify(mech.agents(), reports.iter().map(|r| (&r.profile, &r.dictators)));
    Ok(Analysis { reports, classification })
}

fn classify<'a>(agents: usize, reports: impl Iterator<Item = (&'a Vec<Preference>, &'a Vec<usize>)>) -> Classification {
    let mut common: BTreeSet<usize> = (0..agents).collect();
    for (profile, dictators) in reports {
        if dictators.is_empty() {
            return Classification::NotStrategicallySimple { witness: profile.clone() };
        }
        common.retain(|d| dictators.contains(d));
    }
    if common.is_empty() {
        Classification::Type2
    } else {
        Classification::Type1 { dictators: common.into_iter().collect() }
    }
}

/// Decides strategic simplicity on `dom` through the local-dictator condition.
pub fn check_simple(mech: &Mechanism, dom: &OrdinalDomain) -> Result<Classification> {
    dom.check_fits(mech)?;
    let uds = ud_table(mech, dom);
    let mut common: BTreeSet<usize> = (0..mech.agents()).collect();
    for idx in dom.profiles() {
        let ud: Vec<&[usize]> = idx.iter().enumerate().map(|(i, &k)| uds[i][k].as_slice()).collect();
        let (dictators, _) = dictators_at(mech, &ud);
        if dictators.is_empty() {
            return Ok(Classification::NotStrategicallySimple { witness: dom.profile_preferences(&idx) });
        }
        common.retain(|d| dictators.contains(d));
    }
    Ok(if common.is_empty() {
        Classification::Type2
    } else {
        Classification::Type1 { dictators: common.into_iter().collect() }
    })
}

/// One second-stage mechanism: the direct mechanism the non-delegates play
/// after the delegate picked `delegate_strategy`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageTwo {
    pub delegate_strategy: usize,
    /// Outcome for each profile of reported preferences (domain indices of
    /// the non-delegates in increasing agent order, first most significant).
    pub outcomes: Vec<usize>,
}

/// A delegation mechanism equivalent to a type 1 mechanism.
#[derive(Clone, Debug)]
pub struct DelegationMechanism {
    pub delegate: usize,
    alternatives: AlternativeSet,
    delegate_labels: Vec<String>,
    domain: OrdinalDomain,
    pub stages: Vec<StageTwo>,
    /// `dominant[k][r]`: the strategy of the `k`-th non-delegate in the
    /// original mechanism that is dominant for their `r`-th preference.
    pub dominant: Vec<Vec<usize>>,
}

impl DelegationMechanism {
    pub fn non_delegates(&self) -> Vec<usize> {
        (0..self.domain.agents()).filter(|&j| j != self.delegate).collect()
    }

    pub fn alternatives(&self) -> &AlternativeSet {
        &self.alternatives
    }

    pub fn domain(&self) -> &OrdinalDomain {
        &self.domain
    }

    fn report_sizes(&self) -> Vec<usize> {
        self.non_delegates().iter().map(|&j| self.domain.preferences(j).len()).collect()
    }

    /// Outcome of stage `stage` when the non-delegates report `reports`.
    pub fn stage_outcome(&self, stage: usize, reports: &[usize]) -> usize {
        let sizes = self.report_sizes();
        let idx = reports.iter().zip(&sizes).fold(0, |acc, (r, s)| acc * s + r);
        self.stages[stage].outcomes[idx]
    }

    /// Truthful reporting is weakly dominant in every stage.
    pub fn truthful_is_dominant(&self) -> bool {
        let nd = self.non_delegates();
        let sizes = self.report_sizes();
        let total: usize = sizes.iter().product();
        (0..self.stages.len()).all(|stage| {
            (0..total).all(|flat| {
                let mut reports = decode(flat, &sizes);
                nd.iter().enumerate().all(|(k, &j)| {
                    let truth = reports[k];
                    let pref = &self.domain.preferences(j)[truth];
                    let honest = self.stage_outcome(stage, &reports);
                    let ok = (0..sizes[k]).all(|lie| {
                        reports[k] = lie;
                        pref.weakly_prefers(honest, self.stage_outcome(stage, &reports))
                    });
                    reports[k] = truth;
                    ok
                })
            })
        })
    }

    /// Reduced normal form of the two-stage game.
    ///
    /// Each non-delegate strategy is a contingent plan (one report per
    /// delegate choice). Duplicate strategies are merged and strategies that
    /// are weakly dominated for every admissible preference are dropped,
    /// repeatedly, until neither step changes the table.
    pub fn to_normal_form(&self) -> Result<Mechanism> {
        const MAX_PLANS: usize = 1 << 20;
        let nd = self.non_delegates();
        let stages = self.stages.len();
        let n = self.domain.agents();
        let mut labels: Vec<Vec<String>> = vec![Vec::new(); n];
        let mut plans: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n];
        labels[self.delegate] = self.delegate_labels.clone();
        for &j in &nd {
            let r = self.domain.preferences(j).len();
            let count = (r as u128)
                .checked_pow(stages as u32)
                .filter(|&c| c <= MAX_PLANS as u128)
                .ok_or_else(|| Error::Precondition(format!("too many contingent plans for agent {}", j + 1)))?
                as usize;
            for flat in 0..count {
                let plan = decode(flat, &vec![r; stages]);
                let codes: Vec<String> =
                    plan.iter().map(|&k| self.domain.preferences(j)[k].display(&self.alternatives)).collect();
                let label = if codes.iter().all(|c| *c == codes[0]) { codes[0].clone() } else { codes.join("/") };
                labels[j].push(label);
                plans[j].push(plan);
            }
        }
        let sizes: Vec<usize> = (0..n).map(|i| labels[i].len()).collect();
        let total: usize = sizes.iter().product();
        let mut outcomes = Vec::with_capacity(total);
        for flat in 0..total {
            let p = decode(flat, &sizes);
            let stage = p[self.delegate];
            let reports: Vec<usize> = nd.iter().map(|&j| plans[j][p[j]][stage]).collect();
            outcomes.push(self.stage_outcome(stage, &reports));
        }
        let raw = RawTable::new(sizes, outcomes);
        let (raw, keep) = raw.reduce(&self.domain);
        let strategies = (0..n).map(|i| keep[i].iter().map(|&s| labels[i][s].clone()).collect()).collect();
        Mechanism::new(self.alternatives.labels().to_vec(), strategies, raw.outcomes().to_vec())
    }
}

fn decode(mut idx: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &size) in out.iter_mut().zip(sizes).rev() {
        *slot = idx % size;
        idx /= size;
    }
    out
}

/// Builds the delegation mechanism for a type 1 mechanism with delegate `delegate`.
///
/// Every non-delegate must have a single UD strategy per preference; that
/// strategy is then weakly dominant in the whole mechanism, and each
/// delegate choice induces a direct mechanism in which truthful reporting is
/// dominant. Both facts are checked rather than assumed.
pub fn build_delegation(mech: &Mechanism, dom: &OrdinalDomain, delegate: usize) -> Result<DelegationMechanism> {
    mech.check_agent(delegate)?;
    match check_simple(mech, dom)? {
        Classification::Type1 { dictators } if dictators.contains(&delegate) => {}
        other => {
            return Err(Error::Precondition(format!(
                "agent {} is not a delegate: the mechanism is {}",
                delegate + 1,
                other.describe(mech.alternatives())
            )))
        }
    }
    let uds = ud_table(mech, dom);
    let nd: Vec<usize> = (0..mech.agents()).filter(|&j| j != delegate).collect();
    let mut dominant = Vec::with_capacity(nd.len());
    for &j in &nd {
        let mut per_pref = Vec::new();
        for (r, pref) in dom.preferences(j).iter().enumerate() {
            let ud = &uds[j][r];
            if ud.len() != 1 {
                return Err(Error::Precondition(format!(
                    "agent {} has {} undominated strategies for {}; expected exactly one",
                    j + 1,
                    ud.len(),
                    pref.display(mech.alternatives())
                )));
            }
            let d = ud[0];
            let dominant_everywhere = (0..mech.num_strategies(j))
                .all(|t| mech.row(j, d).iter().zip(mech.row(j, t)).all(|(&a, &b)| pref.weakly_prefers(a, b)));
            if !dominant_everywhere {
                return Err(Error::Precondition(format!(
                    "strategy {} of agent {} is undominated but not dominant for {}",
                    mech.strategy_label(j, d),
                    j + 1,
                    pref.display(mech.alternatives())
                )));
            }
            per_pref.push(d);
        }
        dominant.push(per_pref);
    }
    let sizes: Vec<usize> = nd.iter().map(|&j| dom.preferences(j).len()).collect();
    let total: usize = sizes.iter().product();
    let stages = (0..mech.num_strategies(delegate))
        .map(|s| {
            let outcomes = (0..total)
                .map(|flat| {
                    let reports = decode(flat, &sizes);
                    let mut profile = vec![0; mech.agents()];
                    profile[delegate] = s;
                    for (k, &j) in nd.iter().enumerate() {
                        profile[j] = dominant[k][reports[k]];
                    }
                    mech.outcome(&profile)
                })
                .collect();
            StageTwo { delegate_strategy: s, outcomes }
        })
        .collect();
    let deleg = DelegationMechanism {
        delegate,
        alternatives: mech.alternatives().clone(),
        delegate_labels: mech.strategy_labels(delegate).to_vec(),
        domain: dom.clone(),
        stages,
        dominant,
    };
    if !deleg.truthful_is_dominant() {
        return Err(Error::Precondition("a second-stage mechanism is not dominant-strategy".into()));
    }
    Ok(deleg)
}

/// First sampled profile at which two mechanisms' outcome correspondences differ.
#[derive(Clone, Debug)]
pub struct Divergence {
    pub sample: usize,
    pub utilities: Vec<Utility>,
    pub beliefs: Vec<UtilityBelief>,
    /// `None` marks an empty best-response intersection.
    pub left: Option<BTreeSet<usize>>,
    pub right: Option<BTreeSet<usize>>,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub divergence: Option<Divergence>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Compares the outcome correspondences of `mech` and the normal form of
/// `deleg` on `samples` sampled (utility, belief) profiles.
pub fn check_equivalence(
    mech: &Mechanism,
    deleg: &DelegationMechanism,
    dom: &OrdinalDomain,
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let other = deleg.to_normal_form()?;
    equivalent_on_samples(mech, &other, dom, samples, seed)
}

/// Sample-based equivalence of two mechanisms over the same alternatives.
pub fn equivalent_on_samples(
    a: &Mechanism,
    b: &Mechanism,
    dom: &OrdinalDomain,
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    dom.check_fits(a)?;
    dom.check_fits(b)?;
    if a.alternatives() != b.alternatives() {
        return Err(Error::Precondition("mechanisms have different alternative sets".into()));
    }
    let outcome = |m: &Mechanism, us: &[Utility], bs: &[UtilityBelief]| -> Result<Option<BTreeSet<usize>>> {
        match beliefs::outcome_correspondence(m, us, bs) {
            Ok(point) => Ok(Some(point.outcomes)),
            Err(Error::EmptyIntersection { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    for sample in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample as u64);
        let mut utilities = Vec::with_capacity(a.agents());
        let mut belief_list = Vec::with_capacity(a.agents());
        for i in 0..a.agents() {
            let prefs = dom.preferences(i);
            let pref = &prefs[rng.random_range(0..prefs.len())];
            utilities.push(beliefs::random_utility(pref, &mut rng));
            belief_list.push(beliefs::random_belief(dom, i, 3, &mut rng));
        }
        let left = outcome(a, &utilities, &belief_list)?;
        let right = outcome(b, &utilities, &belief_list)?;
        if left != right {
            return Ok(EquivalenceReport {
                samples: sample + 1,
                divergence: Some(Divergence { sample, utilities, beliefs: belief_list, left, right }),
            });
        }
    }
    Ok(EquivalenceReport { samples, divergence: None })
}

/// How the strategically-simple* check treats beliefs.
pub const STAR_INTERPRETATION: &str = "opponents with a dominant strategy are expected to play it; \
for opponents without one, the utility belief's weight may sit on any of their strategies, \
including dominated ones; the belief's marginal over opponent types is kept";

/// Outcome of [`check_simple_star`].
#[derive(Clone, Debug)]
pub struct StarVerdict {
    pub witness: Option<Witness>,
    /// Number of (agent, utility) pairs searched.
    pub utilities_tested: usize,
}

impl StarVerdict {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Polytope of strategic beliefs under the strategically-simple* reading:
/// each opponent type plays its dominant strategy if it has one and anything otherwise.
pub fn star_polytope(mech: &Mechanism, dom: &OrdinalDomain, belief: &UtilityBelief) -> Result<BeliefPolytope> {
    dom.check_fits(mech)?;
    let i = belief.agent;
    let opps: Vec<usize> = (0..mech.agents()).filter(|&j| j != i).collect();
    let mut blocks = Vec::with_capacity(belief.support.len());
    for (profile, weight) in &belief.support {
        let sets: Vec<Vec<usize>> =
            opps.iter().zip(profile).map(|(&j, u)| star_set(mech, j, &u.preference())).collect();
        blocks.push(Block { weight: weight.clone(), profiles: mech.opp_product(i, &sets) });
    }
    Ok(BeliefPolytope::from_blocks(i, mech.num_opp_profiles(i), blocks))
}

fn star_set(mech: &Mechanism, agent: usize, pref: &Preference) -> Vec<usize> {
    let ud = pure_ud_ranks(mech, agent, pref.ranks());
    if ud.len() == 1 {
        ud
    } else {
        (0..mech.num_strategies(agent)).collect()
    }
}

/// Checks the strategically-simple* variant by searching, for every agent,
/// admissible preference and a grid of cardinal utilities, for an opponent
/// type distribution that leaves no robust best response.
///
/// The set of strategic beliefs only depends on opponents' ordinal types, so
/// the belief search is exhaustive; the utility grid is not, so a pass is
/// evidence rather than proof. See [`STAR_INTERPRETATION`].
pub fn check_simple_star(mech: &Mechanism, dom: &OrdinalDomain) -> Result<StarVerdict> {
    dom.check_fits(mech)?;
    let mut tested = 0;
    for i in 0..mech.agents() {
        let opps: Vec<usize> = (0..mech.agents()).filter(|&j| j != i).collect();
        let type_sizes: Vec<usize> = opps.iter().map(|&j| dom.preferences(j).len()).collect();
        let type_count: usize = type_sizes.iter().product();
        let mut types = Vec::with_capacity(type_count);
        for flat in 0..type_count {
            let idx = decode(flat, &type_sizes);
            let prefs: Vec<Preference> = opps.iter().zip(&idx).map(|(&j, &k)| dom.preferences(j)[k].clone()).collect();
            let sets: Vec<Vec<usize>> = opps.iter().zip(&prefs).map(|(&j, p)| star_set(mech, j, p)).collect();
            types.push((prefs, mech.opp_product(i, &sets)));
        }
        for pref in dom.preferences(i) {
            for u in beliefs::utility_grid(pref) {
                tested += 1;
                let ud = mixed_ud_values(mech, i, u.values())?;
                let blocks: Vec<&[usize]> = types.iter().map(|(_, s)| s.as_slice()).collect();
                let diffs = beliefs::min_differences(mech, i, u.values(), &blocks);
                if let Some((weights, _)) = find_breaking_weights(&diffs, &ud, mech.num_strategies(i))? {
                    let support = types
                        .iter()
                        .zip(&weights)
                        .filter(|(_, w)| num_traits::Signed::is_positive(*w))
                        .map(|((prefs, _), w)| (prefs.iter().map(Utility::evenly_spaced).collect(), w.clone()))
                        .collect();
                    let belief = UtilityBelief::new(mech, i, support)?;
                    let poly = star_polytope(mech, dom, &belief)?;
                    let robust = beliefs::br_intersection(mech, i, &u, &poly)?;
                    if robust.is_empty() {
                        return Ok(StarVerdict {
                            witness: Some(Witness { agent: i, utility: u, belief }),
                            utilities_tested: tested,
                        });
                    }
                }
            }
        }
    }
    Ok(StarVerdict { witness: None, utilities_tested: tested })
}

/// Which structural property failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureProperty {
    /// Menu-best alternatives differ, but some UD strategy misses the menu-best outcome.
    MenuBestPlay,
    /// Menu-best alternatives agree, but no UD strategy achieves it at both profiles.
    CommonBestStrategy,
    /// Menu-best alternatives agree, but some UD strategy's outcome changes.
    ConstantAcrossProfiles,
    /// Two distinct opponent UD profiles offer the same menu.
    DistinctMenus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureViolation {
    pub property: StructureProperty,
    pub agent: usize,
    /// Domain indices of every agent's preference (the agent's own entry is the `R_i` tested).
    pub profile: Vec<usize>,
    /// The two opponent strategy profiles (opponent indices).
    pub pair: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct StructureReport {
    pub classification: Classification,
    pub pairs_checked: usize,
    pub violations: Vec<StructureViolation>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.property {
            StructureProperty::MenuBestPlay => "UD strategy misses the menu-best outcome",
            StructureProperty::CommonBestStrategy => "no UD strategy achieves the common menu-best outcome",
            StructureProperty::ConstantAcrossProfiles => "UD strategy outcome changes across opponent profiles",
            StructureProperty::DistinctMenus => "two opponent UD profiles offer the same menu",
        };
        write!(
            f,
            "agent {}: {what} (profile {:?}, opponent profiles #{} and #{})",
            self.agent + 1,
            self.profile,
            self.pair.0,
            self.pair.1
        )
    }
}

/// Evaluates the menu dichotomy and the distinct-menus property at every
/// profile where some opponent group has two or more joint UD profiles.
///
/// Both properties hold for every strategically simple mechanism; on other
/// mechanisms the report shows where they break. Distinct menus are only
/// required when every strategy is undominated for some preference.
pub fn structure_check(mech: &Mechanism, dom: &OrdinalDomain) -> Result<StructureReport> {
    let classification = check_simple(mech, dom)?;
    let menus_apply = satisfies_standing_assumption(mech, dom);
    let uds = ud_table(mech, dom);
    let mut violations = Vec::new();
    let mut pairs_checked = 0;
    for i in 0..mech.agents() {
        let opps: Vec<usize> = (0..mech.agents()).filter(|&j| j != i).collect();
        let opp_sizes: Vec<usize> = opps.iter().map(|&j| dom.preferences(j).len()).collect();
        for flat in 0..opp_sizes.iter().product::<usize>() {
            let opp_prefs = decode(flat, &opp_sizes);
            let sets: Vec<Vec<usize>> = opps.iter().zip(&opp_prefs).map(|(&j, &k)| uds[j][k].clone()).collect();
            let joint = mech.opp_product(i, &sets);
            if joint.len() < 2 {
                continue;
            }
            let menus: Vec<BTreeSet<usize>> = joint.iter().map(|&t| mech.menu_at(i, t)).collect();
            for (ri, pref) in dom.preferences(i).iter().enumerate() {
                let mut profile = Vec::with_capacity(mech.agents());
                let mut it = opp_prefs.iter();
                for j in 0..mech.agents() {
                    profile.push(if j == i { ri } else { *it.next().expect("opponent") });
                }
                let ud = &uds[i][ri];
                let best: Vec<usize> = menus.iter().map(|m| pref.best(m.iter().copied()).expect("nonempty")).collect();
                let mut report = |property, x: usize, y: usize| {
                    violations.push(StructureViolation {
                        property,
                        agent: i,
                        profile: profile.clone(),
                        pair: (joint[x], joint[y]),
                    })
                };
                let differing = (0..joint.len())
                    .flat_map(|x| (x + 1..joint.len()).map(move |y| (x, y)))
                    .find(|&(x, y)| best[x] != best[y]);
                if let Some((x, y)) = differing {
                    let all_best =
                        joint.iter().enumerate().all(|(k, &t)| ud.iter().all(|&s| mech.outcome_vs(i, s, t) == best[k]));
                    if !all_best {
                        report(StructureProperty::MenuBestPlay, x, y);
                    }
                }
                for x in 0..joint.len() {
                    for y in x + 1..joint.len() {
                        pairs_checked += 1;
                        let (t1, t2) = (joint[x], joint[y]);
                        if menus_apply && ri == 0 && menus[x] == menus[y] {
                            report(StructureProperty::DistinctMenus, x, y);
                        }
                        if best[x] != best[y] {
                            continue;
                        }
                        let a = best[x];
                        if !ud.iter().any(|&s| mech.outcome_vs(i, s, t1) == a && mech.outcome_vs(i, s, t2) == a) {
                            report(StructureProperty::CommonBestStrategy, x, y);
                        }
                        if !ud.iter().all(|&s| mech.outcome_vs(i, s, t1) == mech.outcome_vs(i, s, t2)) {
                            report(StructureProperty::ConstantAcrossProfiles, x, y);
                        }
                    }
                }
            }
        }
    }
    Ok(StructureReport { classification, pairs_checked, violations })
}

/// Strategies of `agent` that are undominated for at least one admissible preference.
pub fn ever_undominated(mech: &Mechanism, dom: &OrdinalDomain, agent: usize) -> Vec<usize> {
    let rows: Vec<&[usize]> = (0..mech.num_strategies(agent)).map(|s| mech.row(agent, s)).collect();
    let mut ever = BTreeSet::new();
    for pref in dom.preferences(agent) {
        ever.extend(ud_of_rows(&rows, pref.ranks()));
    }
    ever.into_iter().collect()
}

/// Whether every strategy of every agent is undominated for some admissible preference.
pub fn satisfies_standing_assumption(mech: &Mechanism, dom: &OrdinalDomain) -> bool {
    (0..mech.agents()).all(|i| ever_undominated(mech, dom, i).len() == mech.num_strategies(i))
}
