//! Bilateral trade: a seller (agent 1) and a buyer (agent 2) over the
//! alternatives "no trade" and trade at one of finitely many prices.
//!
//! Alternative 0 is no trade (`phi`); alternative `k >= 1` is trade at the
//! `k`-th smallest price.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Signed;
use rayon::prelude::*;

use crate::canonical::{canonicalize_with, CanonicalForm, Symmetry};
use crate::error::{Error, Result};
use crate::mechanism::{AlternativeSet, Mechanism, OrdinalDomain, Preference, RawTable};
use crate::search::{FastClass, Space};
use crate::simplicity::{check_simple, local_dictators, Classification};
use crate::Q;

/// Index of the no-trade alternative.
pub const NO_TRADE: usize = 0;
pub const SELLER: usize = 0;
pub const BUYER: usize = 1;

/// Prices and the two agents' value sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradeDomain {
    prices: Vec<Q>,
    seller_values: Vec<Q>,
    buyer_values: Vec<Q>,
}

impl TradeDomain {
    /// Sorts and deduplicates the sets, then checks that every price is
    /// positive, that each value set straddles the prices, and that no value
    /// equals a price.
    pub fn new(prices: Vec<Q>, seller_values: Vec<Q>, buyer_values: Vec<Q>) -> Result<Self> {
        let norm = |mut v: Vec<Q>| {
            v.sort();
            v.dedup();
            v
        };
        let (prices, seller_values, buyer_values) = (norm(prices), norm(seller_values), norm(buyer_values));
        if prices.is_empty() || prices.iter().any(|p| !p.is_positive()) {
            return Err(Error::InvalidDomain("prices must be a nonempty set of positive numbers".into()));
        }
        for (name, values) in [("seller", &seller_values), ("buyer", &buyer_values)] {
            let (lo, hi) = (&prices[0], prices.last().expect("nonempty"));
            match (values.first(), values.last()) {
                (Some(min), Some(max)) if min < lo && max > hi => {}
                _ => {
                    return Err(Error::InvalidDomain(format!(
                        "{name} values must include one below {lo} and one above {hi}"
                    )))
                }
            }
            if let Some(v) = values.iter().find(|v| prices.contains(v)) {
                return Err(Error::InvalidDomain(format!("{name} value {v} coincides with a price")));
            }
        }
        Ok(TradeDomain { prices, seller_values, buyer_values })
    }

    pub fn prices(&self) -> &[Q] {
        &self.prices
    }

    pub fn seller_values(&self) -> &[Q] {
        &self.seller_values
    }

    pub fn buyer_values(&self) -> &[Q] {
        &self.buyer_values
    }

    pub fn values(&self, agent: usize) -> &[Q] {
        if agent == SELLER {
            &self.seller_values
        } else {
            &self.buyer_values
        }
    }

    /// `phi` followed by the prices.
    pub fn alternatives(&self) -> AlternativeSet {
        let labels = std::iter::once("phi".to_string()).chain(self.prices.iter().map(Q::to_string));
        AlternativeSet::new(labels).expect("prices are distinct")
    }

    /// Alternative index of trade at `price`.
    pub fn price_index(&self, price: &Q) -> Option<usize> {
        self.prices.iter().position(|p| p == price).map(|k| k + 1)
    }

    /// The price of alternative `a`, or `None` for no trade.
    pub fn price_of(&self, a: usize) -> Option<&Q> {
        a.checked_sub(1).map(|k| &self.prices[k])
    }

    /// Whether `agent` with value `value` weakly prefers `a` to no trade.
    pub fn weakly_prefers_to_no_trade(&self, agent: usize, value: &Q, a: usize) -> bool {
        match self.price_of(a) {
            None => true,
            Some(t) if agent == SELLER => t > value,
            Some(t) => t < value,
        }
    }

    /// Ordinal preference of `agent` with the given value: the seller ranks
    /// higher prices higher and trade above no trade iff the price exceeds
    /// her value; the buyer mirrors this.
    pub fn preference(&self, agent: usize, value: &Q) -> Preference {
        let mut order: Vec<usize> = (1..=self.prices.len()).collect();
        if agent == SELLER {
            order.reverse();
        }
        let acceptable = order.iter().take_while(|&&a| self.weakly_prefers_to_no_trade(agent, value, a)).count();
        order.insert(acceptable, NO_TRADE);
        Preference::from_order(order).expect("a permutation")
    }
}

impl fmt::Display for TradeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Q]| v.iter().map(Q::to_string).collect::<Vec<_>>().join(",");
        write!(
            f,
            "prices {{{}}}, seller values {{{}}}, buyer values {{{}}}",
            join(&self.prices),
            join(&self.seller_values),
            join(&self.buyer_values)
        )
    }
}

/// The induced ordinal domain (distinct values with the same order collapse).
pub fn trade_domain_to_ordinal(dom: &TradeDomain) -> Result<OrdinalDomain> {
    let per_agent = [SELLER, BUYER]
        .iter()
        .map(|&i| {
            let mut prefs: Vec<Preference> = Vec::new();
            for v in dom.values(i) {
                let p = dom.preference(i, v);
                if !prefs.contains(&p) {
                    prefs.push(p);
                }
            }
            prefs
        })
        .collect();
    OrdinalDomain::new(per_agent)
}

/// Both agents accept or reject; trade at `price` iff both accept.
pub fn build_posted_price(dom: &TradeDomain, price: &Q) -> Result<Mechanism> {
    let t = dom.price_index(price).ok_or_else(|| Error::InvalidDomain(format!("{price} is not one of the prices")))?;
    Mechanism::new(
        dom.alternatives().labels().to_vec(),
        vec![vec!["accept".into(), "reject".into()], vec!["accept".into(), "reject".into()]],
        vec![t, NO_TRADE, NO_TRADE, NO_TRADE],
    )
}

/// The reduced normal form of "`proposer` offers a price from `cap_set` or
/// walks away; the other agent accepts or rejects".
///
/// The responder's strategies start as every acceptance set; duplicate
/// strategies are merged and strategies that are never undominated are
/// dropped, repeatedly, in a fixed order.
pub fn build_price_cap(dom: &TradeDomain, cap_set: &[Q], proposer: usize) -> Result<Mechanism> {
    if proposer > BUYER {
        return Err(Error::AgentOutOfRange { agent: proposer, agents: 2 });
    }
    let mut caps: Vec<usize> = cap_set
        .iter()
        .map(|p| dom.price_index(p).ok_or_else(|| Error::InvalidDomain(format!("{p} is not one of the prices"))))
        .collect::<Result<_>>()?;
    caps.sort_unstable();
    caps.dedup();
    if caps.is_empty() || caps.len() > 16 {
        return Err(Error::InvalidDomain("the price set must have between 1 and 16 prices".into()));
    }
    let alts = dom.alternatives();
    let mut offers = vec!["reject".to_string()];
    offers.extend(caps.iter().map(|&a| format!("offer_{}", alts.label(a))));
    let responses: Vec<String> = (0u32..1 << caps.len())
        .map(|set| {
            let accepted: Vec<&str> =
                caps.iter().enumerate().filter(|(k, _)| set & (1 << k) != 0).map(|(_, &a)| alts.label(a)).collect();
            format!("accept{{{}}}", accepted.join(","))
        })
        .collect();
    let outcome = |offer: usize, set: usize| {
        if offer > 0 && set & (1 << (offer - 1)) != 0 {
            caps[offer - 1]
        } else {
            NO_TRADE
        }
    };
    let (labels, outcomes) = if proposer == SELLER {
        let outcomes = (0..offers.len()).flat_map(|o| (0..responses.len()).map(move |r| outcome(o, r))).collect();
        (vec![offers, responses], outcomes)
    } else {
        let outcomes = (0..responses.len()).flat_map(|r| (0..offers.len()).map(move |o| outcome(o, r))).collect();
        (vec![responses, offers], outcomes)
    };
    let sizes = labels.iter().map(Vec::len).collect();
    let (raw, keep) = RawTable::new(sizes, outcomes).reduce(&trade_domain_to_ordinal(dom)?);
    let strategies = (0..2).map(|i| keep[i].iter().map(|&s| labels[i][s].clone()).collect()).collect();
    Mechanism::new(alts.labels().to_vec(), strategies, raw.outcomes().to_vec())
}

/// Dictators and reachable outcomes at one value pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValuePair {
    pub seller_value: Q,
    pub buyer_value: Q,
    pub dictators: Vec<usize>,
    /// Outcomes of undominated play.
    pub outcomes: BTreeSet<usize>,
    /// Highest and lowest reachable trade, when exactly one agent dictates.
    pub highest: Option<usize>,
    pub lowest: Option<usize>,
}

/// A failed property at some value pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TradeViolation {
    /// Both agents dictate but several outcomes are reachable.
    JointDictatorsManyOutcomes { pair: usize },
    /// One agent dictates but fewer than two outcomes, or no trade outcome, are reachable.
    SoleDictatorTooFewOutcomes { pair: usize },
    /// `agent` strictly prefers no trade to a reachable outcome.
    NotIndividuallyRational { pair: usize, agent: usize, outcome: usize },
    /// `agent` is the only dictator at `pair` but loses dictatorship at `other`
    /// after a change of their own value.
    DictatorshipLost { pair: usize, agent: usize, other: usize },
}

#[derive(Clone, Debug)]
pub struct TradeAnalysis {
    pub classification: Classification,
    /// Value pairs in seller-major order.
    pub pairs: Vec<ValuePair>,
    pub violations: Vec<TradeViolation>,
}

impl TradeAnalysis {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn describe(&self, dom: &TradeDomain) -> String {
        let alts = dom.alternatives();
        let mut out = String::new();
        for p in &self.pairs {
            let ds: Vec<&str> = p.dictators.iter().map(|&d| if d == SELLER { "S" } else { "B" }).collect();
            out.push_str(&format!(
                "vS={} vB={} dictators={{{}}} outcomes={}",
                p.seller_value,
                p.buyer_value,
                ds.join(","),
                alts.format_set(p.outcomes.iter().copied())
            ));
            if let (Some(h), Some(l)) = (p.highest, p.lowest) {
                out.push_str(&format!(" max={} min={}", alts.label(h), alts.label(l)));
            }
            out.push('\n');
        }
        for v in &self.violations {
            out.push_str(&format!("violation: {v:?}\n"));
        }
        out
    }
}

/// Checks that `mech` is a trade mechanism over `dom`'s alternatives in
/// which each agent has a strategy forcing no trade.
pub fn check_trade_mechanism(mech: &Mechanism, dom: &TradeDomain) -> Result<()> {
    if mech.agents() != 2 || mech.alternatives() != &dom.alternatives() {
        return Err(Error::NotTradeMechanism(format!(
            "expected two agents over the alternatives {:?}",
            dom.alternatives().labels()
        )));
    }
    for i in [SELLER, BUYER] {
        if !(0..mech.num_strategies(i)).any(|s| mech.row(i, s).iter().all(|&a| a == NO_TRADE)) {
            let who = if i == SELLER { "seller" } else { "buyer" };
            return Err(Error::NotTradeMechanism(format!("the {who} has no strategy that forces no trade")));
        }
    }
    Ok(())
}

/// Dictator sets and reachable outcomes at every value pair, together with
/// the properties every strategically simple trade mechanism satisfies:
/// a unique outcome when both agents dictate; at least two outcomes,
/// including a trade, when one does; ex post individual rationality; and a
/// sole dictator staying a dictator when only their own value changes.
pub fn analyze_trade(mech: &Mechanism, dom: &TradeDomain) -> Result<TradeAnalysis> {
    check_trade_mechanism(mech, dom)?;
    let ord = trade_domain_to_ordinal(dom)?;
    let classification = check_simple(mech, &ord)?;
    let value_pairs: Vec<(Q, Q)> =
        dom.seller_values.iter().flat_map(|s| dom.buyer_values.iter().map(move |b| (s.clone(), b.clone()))).collect();
    let pairs: Vec<ValuePair> = value_pairs
        .par_iter()
        .map(|(vs, vb)| {
            let profile = [dom.preference(SELLER, vs), dom.preference(BUYER, vb)];
            let report = local_dictators(mech, &ord, &profile)?;
            let outcomes: BTreeSet<usize> =
                report.ud[0].iter().flat_map(|&s| report.ud[1].iter().map(move |&t| mech.outcome(&[s, t]))).collect();
            let trades: Vec<usize> = outcomes.iter().copied().filter(|&a| a != NO_TRADE).collect();
            let sole = report.dictators.len() == 1;
            Ok(ValuePair {
                seller_value: vs.clone(),
                buyer_value: vb.clone(),
                dictators: report.dictators,
                highest: if sole { trades.last().copied() } else { None },
                lowest: if sole { trades.first().copied() } else { None },
                outcomes,
            })
        })
        .collect::<Result<_>>()?;
    let nb = dom.buyer_values.len();
    let mut violations = Vec::new();
    for (k, p) in pairs.iter().enumerate() {
        match p.dictators.len() {
            2 if p.outcomes.len() != 1 => violations.push(TradeViolation::JointDictatorsManyOutcomes { pair: k }),
            1 if p.outcomes.len() < 2 || p.outcomes.iter().all(|&a| a == NO_TRADE) => {
                violations.push(TradeViolation::SoleDictatorTooFewOutcomes { pair: k })
            }
            _ => {}
        }
        for &a in &p.outcomes {
            for (agent, value) in [(SELLER, &p.seller_value), (BUYER, &p.buyer_value)] {
                if !dom.weakly_prefers_to_no_trade(agent, value, a) {
                    violations.push(TradeViolation::NotIndividuallyRational { pair: k, agent, outcome: a });
                }
            }
        }
        if let [d] = p.dictators[..] {
            let (si, bi) = (k / nb, k % nb);
            let others: Vec<usize> = if d == SELLER {
                (0..dom.seller_values.len()).map(|s| s * nb + bi).collect()
            } else {
                (0..nb).map(|b| si * nb + b).collect()
            };
            for other in others {
                if !pairs[other].dictators.contains(&d) {
                    violations.push(TradeViolation::DictatorshipLost { pair: k, agent: d, other });
                }
            }
        }
    }
    Ok(TradeAnalysis { classification, pairs, violations })
}

/// Which classes [`search_trade`] returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TradeFilter {
    Type1,
    Type2,
}

/// Exhaustive search over trade mechanisms with at most `max_strategies`
/// strategies per agent, each agent having a strategy that forces no trade
/// and no duplicate strategies, up to strategy relabeling. Alternatives and
/// agents keep their roles.
///
/// Fails with [`Error::BudgetExceeded`] when more than `budget` candidate
/// grids would be examined.
pub fn search_trade(
    dom: &TradeDomain,
    max_strategies: usize,
    filter: TradeFilter,
    budget: u64,
) -> Result<Vec<Mechanism>> {
    if max_strategies == 0 || max_strategies > 8 {
        return Err(Error::Precondition("max_strategies must be between 1 and 8".into()));
    }
    let ord = trade_domain_to_ordinal(dom)?;
    let alts = dom.alternatives();
    if alts.len() > 255 {
        return Err(Error::InvalidDomain("too many prices".into()));
    }
    let ranks = |i: usize| -> Vec<Vec<u8>> {
        ord.preferences(i).iter().map(|p| p.ranks().iter().map(|&r| r as u8).collect()).collect()
    };
    let space = Space {
        alphabet: alts.len(),
        max_rows: max_strategies,
        max_cols: max_strategies,
        ranks: [ranks(SELLER), ranks(BUYER)],
        ever_undominated: false,
        opt_out: Some(NO_TRADE as u8),
    };
    let want = match filter {
        TradeFilter::Type1 => FastClass::Type1,
        TradeFilter::Type2 => FastClass::Type2,
    };
    let run = space.run(&move |c| c == want, budget.max(1), 0);
    if let Some(resume) = run.resume {
        return Err(Error::BudgetExceeded { examined: run.examined, found: run.matches.len(), resume });
    }
    let labels: Vec<&str> = alts.labels().iter().map(String::as_str).collect();
    let mut seen: BTreeSet<CanonicalForm> = BTreeSet::new();
    let mut out = Vec::new();
    for (grid, _) in &run.matches {
        let mech = crate::voting::grid_mechanism(&labels, grid)?;
        if seen.insert(canonicalize_with(&mech, Symmetry::STRATEGIES)?) {
            out.push(mech);
        }
    }
    Ok(out)
}

/// Searches for type 2 trade mechanisms; see [`search_trade`].
pub fn search_type2_trade(dom: &TradeDomain, max_strategies: usize) -> Result<Vec<Mechanism>> {
    search_trade(dom, max_strategies, TradeFilter::Type2, DEFAULT_TRADE_BUDGET)
}

/// Default candidate budget for [`search_type2_trade`].
pub const DEFAULT_TRADE_BUDGET: u64 = 20_000_000;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;
    use crate::simplicity::{build_delegation, check_equivalence};

    fn ints(v: &[i64]) -> Vec<Q> {
        v.iter().map(|&x| q(x, 1)).collect()
    }

    fn small() -> TradeDomain {
        TradeDomain::new(ints(&[2]), ints(&[1, 3]), ints(&[1, 3])).unwrap()
    }

    fn two_prices() -> TradeDomain {
        TradeDomain::new(ints(&[2, 4]), ints(&[1, 3, 5]), ints(&[1, 3, 5])).unwrap()
    }

    #[test]
    fn induced_preferences() {
        let d = small();
        let alts = d.alternatives();
        assert_eq!(d.preference(SELLER, &q(1, 1)).display(&alts), "2>phi");
        assert_eq!(d.preference(SELLER, &q(3, 1)).display(&alts), "phi>2");
        let ord = trade_domain_to_ordinal(&d).unwrap();
        assert_eq!(ord.preferences(SELLER).len(), 2);
        assert_eq!(ord.preferences(BUYER).len(), 2);
        let d2 = two_prices();
        assert_eq!(d2.preference(SELLER, &q(3, 1)).display(&d2.alternatives()), "4>phi>2");
        assert_eq!(d2.preference(BUYER, &q(3, 1)).display(&d2.alternatives()), "2>phi>4");
    }

    #[test]
    fn domain_invariants() {
        assert!(TradeDomain::new(ints(&[2]), ints(&[2, 3]), ints(&[1, 3])).is_err());
        assert!(TradeDomain::new(ints(&[2]), ints(&[3, 5]), ints(&[1, 3])).is_err());
        assert!(TradeDomain::new(vec![], ints(&[1, 3]), ints(&[1, 3])).is_err());
    }

    #[test]
    fn posted_price_is_type1_for_both() {
        let d = small();
        let m = build_posted_price(&d, &q(2, 1)).unwrap();
        assert_eq!(m.outcome(&[1, 1]), NO_TRADE);
        let ord = trade_domain_to_ordinal(&d).unwrap();
        assert_eq!(check_simple(&m, &ord).unwrap(), Classification::Type1 { dictators: vec![0, 1] });
        let a = analyze_trade(&m, &d).unwrap();
        assert!(a.passed());
        assert!(a.pairs.iter().all(|p| p.dictators.len() == 2 && p.outcomes.len() == 1));
        assert!(build_posted_price(&d, &q(3, 1)).is_err());
    }

    #[test]
    fn single_price_cap_is_posted_price_with_opt_out() {
        let d = small();
        let m = build_price_cap(&d, &ints(&[2]), SELLER).unwrap();
        assert_eq!(m.strategy_labels(0), ["reject", "offer_2"]);
        assert_eq!(m.strategy_labels(1), ["accept{}", "accept{2}"]);
        assert_eq!(
            canonicalize_with(&m, Symmetry::STRATEGIES).unwrap(),
            canonicalize_with(&build_posted_price(&d, &q(2, 1)).unwrap(), Symmetry::STRATEGIES).unwrap()
        );
    }

    #[test]
    fn two_price_cap_keeps_thresholds() {
        let d = two_prices();
        let m = build_price_cap(&d, &ints(&[2, 4]), SELLER).unwrap();
        assert_eq!(m.strategy_labels(0), ["reject", "offer_2", "offer_4"]);
        assert_eq!(m.strategy_labels(1), ["accept{}", "accept{2}", "accept{2,4}"]);
        let ord = trade_domain_to_ordinal(&d).unwrap();
        assert_eq!(check_simple(&m, &ord).unwrap(), Classification::Type1 { dictators: vec![SELLER] });
        let a = analyze_trade(&m, &d).unwrap();
        assert!(a.passed(), "{}", a.describe(&d));
        for s in 0..3 {
            for t in 0..3 {
                if s == 0 || t == 0 {
                    assert_eq!(m.outcome(&[s, t]), NO_TRADE);
                }
            }
        }
        let deleg = build_delegation(&m, &ord, SELLER).unwrap();
        assert!(check_equivalence(&m, &deleg, &ord, 30, 1).unwrap().is_equivalent());
    }

    #[test]
    fn buyer_proposer() {
        let d = two_prices();
        let m = build_price_cap(&d, &ints(&[2, 4]), BUYER).unwrap();
        assert_eq!(m.strategy_labels(1), ["reject", "offer_2", "offer_4"]);
        assert_eq!(m.strategy_labels(0), ["accept{}", "accept{4}", "accept{2,4}"]);
        let ord = trade_domain_to_ordinal(&d).unwrap();
        assert_eq!(check_simple(&m, &ord).unwrap(), Classification::Type1 { dictators: vec![BUYER] });
    }

    #[test]
    fn rejects_mechanisms_without_opt_out() {
        let d = small();
        let m = Mechanism::new(
            d.alternatives().labels().to_vec(),
            vec![vec!["x".into(), "y".into()], vec!["l".into(), "r".into()]],
            vec![1, 0, 1, 1],
        )
        .unwrap();
        assert!(matches!(analyze_trade(&m, &d), Err(Error::NotTradeMechanism(_))));
    }

    #[test]
    fn no_type2_trade_mechanisms_at_small_scale() {
        let d = small();
        assert!(search_type2_trade(&d, 2).unwrap().is_empty());
        assert!(search_type2_trade(&d, 3).unwrap().is_empty());
        let type1 = search_trade(&d, 2, TradeFilter::Type1, DEFAULT_TRADE_BUDGET).unwrap();
        let posted = canonicalize_with(&build_posted_price(&d, &q(2, 1)).unwrap(), Symmetry::STRATEGIES).unwrap();
        assert!(type1.iter().any(|m| canonicalize_with(m, Symmetry::STRATEGIES).unwrap() == posted));
    }
}
