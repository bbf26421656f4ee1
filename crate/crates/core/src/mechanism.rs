//! Mechanisms, preferences, normalized utilities and ordinal domains.
//!
//! Alternatives and strategies are addressed by index everywhere; labels only
//! matter for parsing and rendering. A [`Mechanism`] can only be built from a
//! table that passes [`validate`], so every analysis downstream can assume a
//! total outcome function without duplicate strategies.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::Q;

/// The finite outcome set `A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlternativeSet {
    labels: Vec<String>,
}

impl AlternativeSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidDomain("alternative set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if l.is_empty() || l.chars().any(char::is_whitespace) {
                return Err(Error::InvalidDomain(format!("bad alternative label {l:?}")));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidDomain(format!("duplicate alternative label {l:?}")));
            }
        }
        Ok(AlternativeSet { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// True when every label is one character, so preferences can be written `cab`.
    pub fn single_char_labels(&self) -> bool {
        self.labels.iter().all(|l| l.chars().count() == 1)
    }

    pub fn format_set(&self, set: impl IntoIterator<Item = usize>) -> String {
        let items: Vec<&str> = set.into_iter().map(|a| self.label(a)).collect();
        format!("{{{}}}", items.join(", "))
    }
}

/// A strict ranking of the alternatives, best first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Preference {
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl Preference {
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        let mut rank = vec![usize::MAX; m];
        for (pos, &a) in order.iter().enumerate() {
            if a >= m || rank[a] != usize::MAX {
                return Err(Error::InvalidPreference(format!("{order:?} is not a permutation of 0..{m}")));
            }
            rank[a] = pos;
        }
        if m == 0 {
            return Err(Error::InvalidPreference("empty preference".into()));
        }
        Ok(Preference { order, rank })
    }

    /// Parses `cab` (single-character labels) or `c > a > b`.
    pub fn parse(text: &str, alts: &AlternativeSet) -> Result<Self> {
        let text = text.trim();
        let tokens: Vec<String> = if text.contains('>') {
            text.split('>').map(|t| t.trim().to_string()).collect()
        } else if alts.single_char_labels() {
            text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
        } else {
            text.split_whitespace().map(String::from).collect()
        };
        let order = tokens
            .iter()
            .map(|t| {
                alts.index_of(t)
                    .ok_or_else(|| Error::InvalidPreference(format!("unknown alternative {t:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if order.len() != alts.len() {
            return Err(Error::InvalidPreference(format!(
                "{text:?} ranks {} alternatives, expected {}",
                order.len(),
                alts.len()
            )));
        }
        Preference::from_order(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of `a` in the ranking, 0 for the top alternative.
    pub fn rank(&self, a: usize) -> usize {
        self.rank[a]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.rank
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn top(&self) -> usize {
        self.order[0]
    }

    /// Strict preference `a P b`.
    pub fn prefers(&self, a: usize, b: usize) -> bool {
        self.rank[a] < self.rank[b]
    }

    /// Weak preference `a R b`.
    pub fn weakly_prefers(&self, a: usize, b: usize) -> bool {
        self.rank[a] <= self.rank[b]
    }

    /// The best element of `set`, or `None` if it is empty.
    pub fn best<I: IntoIterator<Item = usize>>(&self, set: I) -> Option<usize> {
        set.into_iter().min_by_key(|&a| self.rank[a])
    }

    pub fn display(&self, alts: &AlternativeSet) -> String {
        if alts.single_char_labels() {
            self.order.iter().map(|&a| alts.label(a)).collect()
        } else {
            let parts: Vec<&str> = self.order.iter().map(|&a| alts.label(a)).collect();
            parts.join(">")
        }
    }

    /// All `m!` rankings in lexicographic order of their index sequences.
    pub fn all(m: usize) -> Vec<Preference> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(m);
        let mut used = vec![false; m];
        fn rec(m: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Preference>) {
            if cur.len() == m {
                out.push(Preference::from_order(cur.clone()).expect("permutation"));
                return;
            }
            for a in 0..m {
                if !used[a] {
                    used[a] = true;
                    cur.push(a);
                    rec(m, cur, used, out);
                    cur.pop();
                    used[a] = false;
                }
            }
        }
        rec(m, &mut current, &mut used, &mut out);
        out
    }
}

/// A normalized von Neumann-Morgenstern utility: injective, min 0, max 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Utility {
    values: Vec<Q>,
}

impl Utility {
    pub fn new(values: Vec<Q>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidUtility("no alternatives".into()));
        }
        let min = values.iter().min().expect("nonempty");
        let max = values.iter().max().expect("nonempty");
        if !min.is_zero() || !max.is_one() {
            return Err(Error::InvalidUtility(format!(
                "utilities must have minimum 0 and maximum 1, got {min} and {max}"
            )));
        }
        let distinct: BTreeSet<&Q> = values.iter().collect();
        if distinct.len() != values.len() {
            return Err(Error::InvalidUtility("ties between alternatives are not allowed".into()));
        }
        Ok(Utility { values })
    }

    /// A utility inducing `pref`, with `interior` giving the values of the
    /// alternatives ranked second through second-to-last (best first).
    pub fn for_preference(pref: &Preference, interior: &[Q]) -> Result<Self> {
        let m = pref.len();
        if m == 1 {
            return Err(Error::InvalidUtility("a single alternative cannot be normalized to both 0 and 1".into()));
        }
        if interior.len() != m - 2 {
            return Err(Error::InvalidUtility(format!("expected {} interior values, got {}", m - 2, interior.len())));
        }
        let mut levels = Vec::with_capacity(m);
        levels.push(Q::one());
        levels.extend(interior.iter().cloned());
        levels.push(Q::zero());
        if levels.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidUtility(format!(
                "interior values must be strictly decreasing inside (0, 1): {interior:?}"
            )));
        }
        let mut values = vec![Q::zero(); m];
        for (pos, &a) in pref.order().iter().enumerate() {
            values[a] = levels[pos].clone();
        }
        Ok(Utility { values })
    }

    /// Evenly spaced levels `1, (m-2)/(m-1), ..., 0` along `pref`.
    pub fn evenly_spaced(pref: &Preference) -> Self {
        let m = pref.len() as i64;
        let interior: Vec<Q> = (1..m - 1).map(|k| Q::new((m - 1 - k).into(), (m - 1).into())).collect();
        Utility::for_preference(pref, &interior).expect("evenly spaced levels are valid")
    }

    pub fn value(&self, a: usize) -> &Q {
        &self.values[a]
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The ordinal preference this utility represents.
    pub fn preference(&self) -> Preference {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].cmp(&self.values[a]));
        Preference::from_order(order).expect("sorted indices form a permutation")
    }
}

/// Per-agent admissible preference sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrdinalDomain {
    per_agent: Vec<Vec<Preference>>,
}

impl OrdinalDomain {
    pub fn new(per_agent: Vec<Vec<Preference>>) -> Result<Self> {
        if per_agent.is_empty() {
            return Err(Error::InvalidDomain("no agents".into()));
        }
        let m = per_agent
            .iter()
            .flatten()
            .map(Preference::len)
            .next()
            .ok_or_else(|| Error::InvalidDomain("empty preference set".into()))?;
        for (i, prefs) in per_agent.iter().enumerate() {
            if prefs.is_empty() {
                return Err(Error::InvalidDomain(format!("agent {} has no admissible preference", i + 1)));
            }
            if prefs.iter().any(|p| p.len() != m) {
                return Err(Error::InvalidDomain(format!(
                    "agent {} has preferences over a different number of alternatives",
                    i + 1
                )));
            }
            let distinct: BTreeSet<&Preference> = prefs.iter().collect();
            if distinct.len() != prefs.len() {
                return Err(Error::InvalidDomain(format!("agent {} lists a preference twice", i + 1)));
            }
        }
        Ok(OrdinalDomain { per_agent })
    }

    /// Every agent may hold every strict ranking.
    pub fn full(agents: usize, alternatives: usize) -> Self {
        let all = Preference::all(alternatives);
        OrdinalDomain { per_agent: vec![all; agents] }
    }

    /// Rankings single-peaked with respect to `axis` (alternatives listed left to right).
    pub fn single_peaked(agents: usize, axis: &[usize]) -> Result<Self> {
        let m = axis.len();
        let mut pos = vec![usize::MAX; m];
        for (p, &a) in axis.iter().enumerate() {
            if a >= m || pos[a] != usize::MAX {
                return Err(Error::InvalidDomain(format!("{axis:?} is not an axis order")));
            }
            pos[a] = p;
        }
        let prefs: Vec<Preference> = Preference::all(m)
            .into_iter()
            .filter(|pref| {
                // every upper contour set is an interval of the axis
                let (mut lo, mut hi) = (pos[pref.top()], pos[pref.top()]);
                pref.order()[1..].iter().all(|&a| {
                    let p = pos[a];
                    if p + 1 == lo {
                        lo = p;
                        true
                    } else if p == hi + 1 {
                        hi = p;
                        true
                    } else {
                        false
                    }
                })
            })
            .collect();
        OrdinalDomain::new(vec![prefs; agents])
    }

    pub fn agents(&self) -> usize {
        self.per_agent.len()
    }

    pub fn alternatives(&self) -> usize {
        self.per_agent[0][0].len()
    }

    pub fn preferences(&self, agent: usize) -> &[Preference] {
        &self.per_agent[agent]
    }

    pub fn contains(&self, agent: usize, pref: &Preference) -> bool {
        self.per_agent.get(agent).is_some_and(|ps| ps.contains(pref))
    }

    pub fn index_of(&self, agent: usize, pref: &Preference) -> Option<usize> {
        self.per_agent.get(agent)?.iter().position(|p| p == pref)
    }

    pub fn num_profiles(&self) -> usize {
        self.per_agent.iter().map(Vec::len).product()
    }

    /// Preference-index profiles in lexicographic order, agent 1 most significant.
    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let sizes: Vec<usize> = self.per_agent.iter().map(Vec::len).collect();
        (0..self.num_profiles()).map(move |mut idx| {
            let mut out = vec![0; sizes.len()];
            for (slot, &size) in out.iter_mut().zip(&sizes).rev() {
                *slot = idx % size;
                idx /= size;
            }
            out
        })
    }

    pub fn profile_preferences(&self, profile: &[usize]) -> Vec<Preference> {
        profile.iter().enumerate().map(|(i, &k)| self.per_agent[i][k].clone()).collect()
    }

    pub(crate) fn check_fits(&self, mech: &Mechanism) -> Result<()> {
        if self.agents() != mech.agents() {
            return Err(Error::InvalidDomain(format!(
                "domain has {} agents, mechanism has {}",
                self.agents(),
                mech.agents()
            )));
        }
        if self.alternatives() != mech.alternatives().len() {
            return Err(Error::InvalidDomain(format!(
                "domain ranks {} alternatives, mechanism has {}",
                self.alternatives(),
                mech.alternatives().len()
            )));
        }
        Ok(())
    }
}

/// An outcome table that has not been validated yet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MechanismTable {
    pub alternatives: Vec<String>,
    pub strategies: Vec<Vec<String>>,
    /// Row-major over profiles, agent 1 most significant; `None` marks a missing entry.
    pub outcomes: Vec<Option<usize>>,
}

/// One problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoAgents,
    NoStrategies { agent: usize },
    BadAlternatives(String),
    DuplicateStrategyLabel { agent: usize, label: String },
    WrongTableSize { expected: usize, found: usize },
    MissingOutcome { profile: Vec<usize> },
    UnknownAlternative { profile: Vec<usize>, index: usize },
    DuplicateStrategies { agent: usize, first: usize, second: usize },
}

/// Result of checking totality, label uniqueness and the no-duplicate-strategies condition.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    labels: Vec<Vec<String>>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let label = |agent: usize, s: usize| -> String {
            self.labels.get(agent).and_then(|ls| ls.get(s)).cloned().unwrap_or_else(|| s.to_string())
        };
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            match v {
                Violation::NoAgents => write!(f, "mechanism has no agents")?,
                Violation::NoStrategies { agent } => write!(f, "agent {} has no strategies", agent + 1)?,
                Violation::BadAlternatives(msg) => write!(f, "{msg}")?,
                Violation::DuplicateStrategyLabel { agent, label } => {
                    write!(f, "agent {} declares strategy label {label:?} twice", agent + 1)?
                }
                Violation::WrongTableSize { expected, found } => {
                    write!(f, "outcome table has {found} entries, expected {expected}")?
                }
                Violation::MissingOutcome { profile } => {
                    write!(f, "totality violated: no outcome for profile {profile:?}")?
                }
                Violation::UnknownAlternative { profile, index } => {
                    write!(f, "profile {profile:?} maps to unknown alternative #{index}")?
                }
                Violation::DuplicateStrategies { agent, first, second } => write!(
                    f,
                    "duplicate strategies for agent {}: {} and {} yield identical outcomes everywhere",
                    agent + 1,
                    label(*agent, *first),
                    label(*agent, *second)
                )?,
            }
        }
        Ok(())
    }
}

/// Checks totality, label uniqueness and the absence of duplicate strategies.
pub fn validate(table: &MechanismTable) -> ValidationReport {
    let mut violations = Vec::new();
    if let Err(e) = AlternativeSet::new(table.alternatives.iter().cloned()) {
        violations.push(Violation::BadAlternatives(e.to_string()));
    }
    let n = table.strategies.len();
    if n == 0 {
        violations.push(Violation::NoAgents);
    }
    for (i, labels) in table.strategies.iter().enumerate() {
        if labels.is_empty() {
            violations.push(Violation::NoStrategies { agent: i });
        }
        let mut seen = BTreeSet::new();
        for l in labels {
            if !seen.insert(l) {
                violations.push(Violation::DuplicateStrategyLabel { agent: i, label: l.clone() });
            }
        }
    }
    let report = |violations| ValidationReport { violations, labels: table.strategies.clone() };
    if !violations.is_empty() {
        return report(violations);
    }
    let sizes: Vec<usize> = table.strategies.iter().map(Vec::len).collect();
    let expected: usize = sizes.iter().product();
    if table.outcomes.len() != expected {
        violations.push(Violation::WrongTableSize { expected, found: table.outcomes.len() });
        return report(violations);
    }
    let decode = |mut idx: usize| {
        let mut p = vec![0; n];
        for (slot, &size) in p.iter_mut().zip(&sizes).rev() {
            *slot = idx % size;
            idx /= size;
        }
        p
    };
    for (idx, o) in table.outcomes.iter().enumerate() {
        match o {
            None => violations.push(Violation::MissingOutcome { profile: decode(idx) }),
            Some(a) if *a >= table.alternatives.len() => {
                violations.push(Violation::UnknownAlternative { profile: decode(idx), index: *a })
            }
            _ => {}
        }
    }
    if !violations.is_empty() {
        return report(violations);
    }
    let outcomes: Vec<usize> = table.outcomes.iter().map(|o| o.expect("checked")).collect();
    let views = build_views(&sizes, &outcomes);
    for (i, rows) in views.iter().enumerate() {
        for s in 0..rows.len() {
            for t in s + 1..rows.len() {
                if rows[s] == rows[t] {
                    violations.push(Violation::DuplicateStrategies { agent: i, first: s, second: t });
                }
            }
        }
    }
    report(violations)
}

fn build_views(sizes: &[usize], outcomes: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let n = sizes.len();
    let mut strides = vec![1; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    (0..n)
        .map(|i| {
            let opp_sizes: Vec<usize> = (0..n).filter(|&j| j != i).map(|j| sizes[j]).collect();
            let opp_strides: Vec<usize> = (0..n).filter(|&j| j != i).map(|j| strides[j]).collect();
            let opp_count: usize = opp_sizes.iter().product();
            (0..sizes[i])
                .map(|s| {
                    (0..opp_count)
                        .map(|mut idx| {
                            let mut flat = s * strides[i];
                            for (k, &size) in opp_sizes.iter().enumerate().rev() {
                                flat += (idx % size) * opp_strides[k];
                                idx /= size;
                            }
                            outcomes[flat]
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// A bare outcome table used while building reduced normal forms, where
/// duplicate strategies are still allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct RawTable {
    sizes: Vec<usize>,
    outcomes: Vec<usize>,
}

impl RawTable {
    pub(crate) fn new(sizes: Vec<usize>, outcomes: Vec<usize>) -> Self {
        debug_assert_eq!(sizes.iter().product::<usize>(), outcomes.len());
        RawTable { sizes, outcomes }
    }

    pub(crate) fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    fn views(&self) -> Vec<Vec<Vec<usize>>> {
        build_views(&self.sizes, &self.outcomes)
    }

    /// Keeps only the listed strategies of `agent`, in the given order.
    fn restrict(&self, agent: usize, keep: &[usize]) -> RawTable {
        let mut sizes = self.sizes.clone();
        sizes[agent] = keep.len();
        let total: usize = sizes.iter().product();
        let n = sizes.len();
        let mut strides = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.sizes[i + 1];
        }
        let outcomes = (0..total)
            .map(|mut idx| {
                let mut flat = 0;
                for i in (0..n).rev() {
                    let mut s = idx % sizes[i];
                    idx /= sizes[i];
                    if i == agent {
                        s = keep[s];
                    }
                    flat += s * strides[i];
                }
                self.outcomes[flat]
            })
            .collect();
        RawTable { sizes, outcomes }
    }

    /// Repeatedly merges duplicate strategies (keeping the first) and drops
    /// strategies that are weakly dominated for every preference in `dom`.
    ///
    /// Returns the reduced table and, per agent, the surviving original indices.
    pub(crate) fn reduce(self, dom: &OrdinalDomain) -> (RawTable, Vec<Vec<usize>>) {
        let n = self.sizes.len();
        let mut table = self;
        let mut keep: Vec<Vec<usize>> = table.sizes.iter().map(|&k| (0..k).collect()).collect();
        loop {
            let mut changed = false;
            for i in 0..n {
                let views = table.views();
                let rows = &views[i];
                let mut survivors: Vec<usize> = Vec::new();
                for s in 0..rows.len() {
                    if !survivors.iter().any(|&t| rows[t] == rows[s]) {
                        survivors.push(s);
                    }
                }
                let refs: Vec<&[usize]> = survivors.iter().map(|&s| rows[s].as_slice()).collect();
                let mut ever = BTreeSet::new();
                for pref in dom.preferences(i) {
                    ever.extend(crate::dominance::ud_of_rows(&refs, pref.ranks()));
                }
                let survivors: Vec<usize> = ever.into_iter().map(|k| survivors[k]).collect();
                if survivors.len() != rows.len() {
                    changed = true;
                    table = table.restrict(i, &survivors);
                    keep[i] = survivors.iter().map(|&s| keep[i][s]).collect();
                }
            }
            if !changed {
                return (table, keep);
            }
        }
    }
}

/// A finite mechanism: strategy sets per agent and a total outcome function.
///
/// Immutable after construction. Opponent profiles `s_{-i}` are encoded as
/// mixed-radix indices over the other agents in increasing agent order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mechanism {
    alternatives: AlternativeSet,
    strategies: Vec<Vec<String>>,
    outcomes: Vec<usize>,
    strides: Vec<usize>,
    // views[i][s_i][opp] = g(s_i, opp)
    views: Vec<Vec<Vec<usize>>>,
}

impl TryFrom<MechanismTable> for Mechanism {
    type Error = Error;

    fn try_from(table: MechanismTable) -> Result<Self> {
        let report = validate(&table);
        if !report.is_valid() {
            return Err(Error::InvalidMechanism(report));
        }
        let alternatives = AlternativeSet::new(table.alternatives)?;
        let outcomes: Vec<usize> = table.outcomes.into_iter().map(|o| o.expect("validated")).collect();
        let sizes: Vec<usize> = table.strategies.iter().map(Vec::len).collect();
        let n = sizes.len();
        let mut strides = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let views = build_views(&sizes, &outcomes);
        Ok(Mechanism { alternatives, strategies: table.strategies, outcomes, strides, views })
    }
}

impl Mechanism {
    /// Builds a mechanism from a fully specified outcome vector.
    pub fn new(alternatives: Vec<String>, strategies: Vec<Vec<String>>, outcomes: Vec<usize>) -> Result<Self> {
        Mechanism::try_from(MechanismTable {
            alternatives,
            strategies,
            outcomes: outcomes.into_iter().map(Some).collect(),
        })
    }

    /// Two-agent convenience constructor: `grid[r]` lists the labels of row `r`'s outcomes.
    pub fn from_grid(alternatives: &[&str], rows: &[&str], cols: &[&str], grid: &[&[&str]]) -> Result<Self> {
        let alts = AlternativeSet::new(alternatives.iter().copied())?;
        let mut outcomes = Vec::with_capacity(rows.len() * cols.len());
        for (r, line) in grid.iter().enumerate() {
            if line.len() != cols.len() {
                return Err(Error::InvalidProfile(format!(
                    "row {} has {} entries, expected {}",
                    r + 1,
                    line.len(),
                    cols.len()
                )));
            }
            for label in line.iter() {
                outcomes.push(Some(
                    alts.index_of(label)
                        .ok_or_else(|| Error::InvalidProfile(format!("unknown alternative {label:?}")))?,
                ));
            }
        }
        Mechanism::try_from(MechanismTable {
            alternatives: alts.labels().to_vec(),
            strategies: vec![
                rows.iter().map(|s| s.to_string()).collect(),
                cols.iter().map(|s| s.to_string()).collect(),
            ],
            outcomes,
        })
    }

    pub fn agents(&self) -> usize {
        self.strategies.len()
    }

    pub fn alternatives(&self) -> &AlternativeSet {
        &self.alternatives
    }

    pub fn num_strategies(&self, agent: usize) -> usize {
        self.strategies[agent].len()
    }

    pub fn strategy_labels(&self, agent: usize) -> &[String] {
        &self.strategies[agent]
    }

    pub fn strategy_label(&self, agent: usize, s: usize) -> &str {
        &self.strategies[agent][s]
    }

    pub fn strategy_index(&self, agent: usize, label: &str) -> Option<usize> {
        self.strategies.get(agent)?.iter().position(|l| l == label)
    }

    pub fn num_profiles(&self) -> usize {
        self.outcomes.len()
    }

    /// Outcome table, row-major with agent 1 most significant.
    pub fn outcome_table(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn outcome(&self, profile: &[usize]) -> usize {
        let flat: usize = profile.iter().zip(&self.strides).map(|(s, k)| s * k).sum();
        self.outcomes[flat]
    }

    pub fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.agents() {
            return Err(Error::AgentOutOfRange { agent, agents: self.agents() });
        }
        Ok(())
    }

    /// Number of opponent profiles `|S_{-i}|`.
    pub fn num_opp_profiles(&self, agent: usize) -> usize {
        self.views[agent].first().map_or(0, Vec::len)
    }

    /// `g(s_i, s_{-i})` with the opponents encoded as an index.
    pub fn outcome_vs(&self, agent: usize, s: usize, opp: usize) -> usize {
        self.views[agent][s][opp]
    }

    /// The outcome row of strategy `s` for agent `agent` against every opponent profile.
    pub fn row(&self, agent: usize, s: usize) -> &[usize] {
        &self.views[agent][s]
    }

    /// Encodes the opponents' strategies (increasing agent order) as an index.
    pub fn opp_index(&self, agent: usize, opp: &[usize]) -> Result<usize> {
        self.check_agent(agent)?;
        if opp.len() + 1 != self.agents() {
            return Err(Error::InvalidProfile(format!(
                "expected {} opponent strategies, got {}",
                self.agents() - 1,
                opp.len()
            )));
        }
        let mut idx = 0;
        for (k, j) in (0..self.agents()).filter(|&j| j != agent).enumerate() {
            let s = opp[k];
            if s >= self.num_strategies(j) {
                return Err(Error::StrategyOutOfRange { agent: j, strategy: s });
            }
            idx = idx * self.num_strategies(j) + s;
        }
        Ok(idx)
    }

    pub fn opp_decode(&self, agent: usize, mut idx: usize) -> Vec<usize> {
        let sizes: Vec<usize> = (0..self.agents()).filter(|&j| j != agent).map(|j| self.num_strategies(j)).collect();
        let mut out = vec![0; sizes.len()];
        for (slot, &size) in out.iter_mut().zip(&sizes).rev() {
            *slot = idx % size;
            idx /= size;
        }
        out
    }

    /// Indices of all opponent profiles in the product of the given per-opponent sets.
    pub fn opp_product(&self, agent: usize, sets: &[Vec<usize>]) -> Vec<usize> {
        let opps: Vec<usize> = (0..self.agents()).filter(|&j| j != agent).collect();
        debug_assert_eq!(opps.len(), sets.len());
        let mut acc = vec![0usize];
        for (k, &j) in opps.iter().enumerate() {
            let size = self.num_strategies(j);
            acc = acc.iter().flat_map(|&prefix| sets[k].iter().map(move |&s| prefix * size + s)).collect();
        }
        acc
    }

    pub fn opp_label(&self, agent: usize, idx: usize) -> String {
        let opp = self.opp_decode(agent, idx);
        let labels: Vec<&str> =
            (0..self.agents()).filter(|&j| j != agent).zip(&opp).map(|(j, &s)| self.strategy_label(j, s)).collect();
        labels.join(",")
    }

    /// The menu `M_i(s_{-i})`: outcomes agent `agent` can reach against `opp`.
    pub fn menu(&self, agent: usize, opp: &[usize]) -> Result<BTreeSet<usize>> {
        let idx = self.opp_index(agent, opp)?;
        Ok(self.menu_at(agent, idx))
    }

    pub fn menu_at(&self, agent: usize, opp: usize) -> BTreeSet<usize> {
        self.views[agent].iter().map(|row| row[opp]).collect()
    }

    /// The `pref`-best element of the menu.
    pub fn best_in_menu(&self, agent: usize, opp: &[usize], pref: &Preference) -> Result<usize> {
        self.check_preference(pref)?;
        let menu = self.menu(agent, opp)?;
        Ok(pref.best(menu).expect("menus are nonempty"))
    }

    pub fn check_preference(&self, pref: &Preference) -> Result<()> {
        if pref.len() != self.alternatives.len() {
            return Err(Error::InvalidPreference(format!(
                "preference ranks {} alternatives, mechanism has {}",
                pref.len(),
                self.alternatives.len()
            )));
        }
        Ok(())
    }

    pub fn check_utility(&self, u: &Utility) -> Result<()> {
        if u.len() != self.alternatives.len() {
            return Err(Error::InvalidUtility(format!(
                "utility covers {} alternatives, mechanism has {}",
                u.len(),
                self.alternatives.len()
            )));
        }
        Ok(())
    }

    /// Relabels alternatives by `alt_perm` (old index -> new index) and moves
    /// strategy `s` of agent `i` to position `strategy_perms[i][s]`.
    pub fn relabel(&self, alt_perm: &[usize], strategy_perms: &[Vec<usize>]) -> Result<Mechanism> {
        let m = self.alternatives.len();
        let is_perm = |p: &[usize], len: usize| {
            p.len() == len && p.iter().collect::<BTreeSet<_>>().len() == len && p.iter().all(|&x| x < len)
        };
        if !is_perm(alt_perm, m) {
            return Err(Error::InvalidProfile(format!("{alt_perm:?} is not a permutation of alternatives")));
        }
        if strategy_perms.len() != self.agents()
            || (0..self.agents()).any(|i| !is_perm(&strategy_perms[i], self.num_strategies(i)))
        {
            return Err(Error::InvalidProfile("bad strategy permutation".into()));
        }
        let mut labels = vec![String::new(); m];
        for (a, &b) in alt_perm.iter().enumerate() {
            labels[b] = self.alternatives.label(a).to_string();
        }
        let strategies: Vec<Vec<String>> = (0..self.agents())
            .map(|i| {
                let mut ls = vec![String::new(); self.num_strategies(i)];
                for (s, &t) in strategy_perms[i].iter().enumerate() {
                    ls[t] = self.strategies[i][s].clone();
                }
                ls
            })
            .collect();
        let mut outcomes = vec![0; self.outcomes.len()];
        for (flat, profile) in self.profiles().enumerate() {
            let new_profile: Vec<usize> = profile.iter().enumerate().map(|(i, &s)| strategy_perms[i][s]).collect();
            let new_flat: usize = new_profile.iter().zip(&self.strides).map(|(s, k)| s * k).sum();
            outcomes[new_flat] = alt_perm[self.outcomes[flat]];
        }
        Mechanism::new(labels, strategies, outcomes)
    }

    /// All strategy profiles in table order.
    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let sizes: Vec<usize> = self.strategies.iter().map(Vec::len).collect();
        (0..self.outcomes.len()).map(move |mut idx| {
            let mut p = vec![0; sizes.len()];
            for (slot, &size) in p.iter_mut().zip(&sizes).rev() {
                *slot = idx % size;
                idx /= size;
            }
            p
        })
    }

    /// The mechanism with agents 1 and 2 swapped (two-agent mechanisms only).
    pub fn transpose(&self) -> Result<Mechanism> {
        if self.agents() != 2 {
            return Err(Error::Precondition("transpose needs exactly two agents".into()));
        }
        let (r, c) = (self.num_strategies(0), self.num_strategies(1));
        let mut outcomes = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                outcomes.push(self.outcome(&[i, j]));
            }
        }
        Mechanism::new(
            self.alternatives.labels().to_vec(),
            vec![self.strategies[1].clone(), self.strategies[0].clone()],
            outcomes,
        )
    }

    pub fn is_constant(&self) -> bool {
        self.outcomes.windows(2).all(|w| w[0] == w[1])
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.agents() == 2 {
            let width = self
                .strategies
                .iter()
                .flatten()
                .map(String::len)
                .chain(self.alternatives.labels().iter().map(String::len))
                .max()
                .unwrap_or(1);
            write!(f, "{:width$}", "")?;
            for c in &self.strategies[1] {
                write!(f, " {c:>width$}")?;
            }
            for (r, label) in self.strategies[0].iter().enumerate() {
                write!(f, "\n{label:width$}")?;
                for c in 0..self.num_strategies(1) {
                    write!(f, " {:>width$}", self.alternatives.label(self.outcome(&[r, c])))?;
                }
            }
            Ok(())
        } else {
            for (k, p) in self.profiles().enumerate() {
                if k > 0 {
                    writeln!(f)?;
                }
                let labels: Vec<&str> = p.iter().enumerate().map(|(i, &s)| self.strategy_label(i, s)).collect();
                write!(f, "{} -> {}", labels.join(" "), self.alternatives.label(self.outcomes[k]))?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voting::figure1;

    fn alts3() -> AlternativeSet {
        AlternativeSet::new(["a", "b", "c"]).unwrap()
    }

    #[test]
    fn figure1_menus() {
        let m = figure1();
        let l = m.strategy_index(1, "L").unwrap();
        let c2 = m.strategy_index(1, "C2").unwrap();
        assert_eq!(m.menu(0, &[l]).unwrap(), BTreeSet::from([0]));
        assert_eq!(m.menu(0, &[c2]).unwrap(), BTreeSet::from([0, 2]));
    }

    #[test]
    fn best_in_menu_examples() {
        let m = figure1();
        let alts = alts3();
        let cab = Preference::parse("cab", &alts).unwrap();
        let abc = Preference::parse("abc", &alts).unwrap();
        let c2 = m.strategy_index(1, "C2").unwrap();
        let r = m.strategy_index(1, "R").unwrap();
        assert_eq!(m.best_in_menu(0, &[c2], &cab).unwrap(), 2);
        assert_eq!(m.best_in_menu(0, &[r], &abc).unwrap(), 0);
    }

    #[test]
    fn single_strategy_menu_is_singleton() {
        let m = Mechanism::from_grid(&["a", "b", "c"], &["only"], &["x", "y", "z"], &[&["a", "b", "c"]]).unwrap();
        for col in 0..3 {
            assert_eq!(m.menu(0, &[col]).unwrap().len(), 1);
            let pref = Preference::parse("abc", &alts3()).unwrap();
            assert_eq!(m.best_in_menu(0, &[col], &pref).unwrap(), m.outcome(&[0, col]));
        }
    }

    #[test]
    fn menu_rejects_bad_input() {
        let m = figure1();
        assert!(matches!(m.menu(2, &[0]), Err(Error::AgentOutOfRange { .. })));
        assert!(matches!(m.menu(0, &[9]), Err(Error::StrategyOutOfRange { .. })));
        assert!(matches!(m.menu(0, &[0, 0]), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn validate_figure1() {
        let m = figure1();
        let table = MechanismTable {
            alternatives: m.alternatives().labels().to_vec(),
            strategies: vec![m.strategy_labels(0).to_vec(), m.strategy_labels(1).to_vec()],
            outcomes: m.outcome_table().iter().map(|&a| Some(a)).collect(),
        };
        assert!(validate(&table).is_valid());
    }

    #[test]
    fn validate_reports_duplicate_rows() {
        let table = MechanismTable {
            alternatives: vec!["a".into(), "b".into()],
            strategies: vec![vec!["U".into(), "D".into()], vec!["L".into(), "R".into()]],
            outcomes: vec![Some(0), Some(1), Some(0), Some(1)],
        };
        let report = validate(&table);
        assert_eq!(report.violations, vec![Violation::DuplicateStrategies { agent: 0, first: 0, second: 1 }]);
        assert!(report.to_string().contains("U and D"));
        assert!(Mechanism::try_from(table).is_err());
    }

    #[test]
    fn validate_reports_missing_entry() {
        let table = MechanismTable {
            alternatives: vec!["a".into(), "b".into()],
            strategies: vec![vec!["U".into(), "D".into()], vec!["L".into(), "R".into()]],
            outcomes: vec![Some(0), Some(1), None, Some(0)],
        };
        let report = validate(&table);
        assert_eq!(report.violations, vec![Violation::MissingOutcome { profile: vec![1, 0] }]);
    }

    #[test]
    fn utilities_reject_ties_and_bad_normalization() {
        assert!(Utility::new(vec![Q::from_integer(0.into()), Q::from_integer(1.into()), Q::from_integer(1.into())])
            .is_err());
        assert!(Utility::new(vec![crate::q(1, 5), crate::q(1, 2), Q::from_integer(1.into())]).is_err());
        let u = Utility::new(vec![crate::q(1, 2), Q::from_integer(0.into()), Q::from_integer(1.into())]).unwrap();
        assert_eq!(u.preference().display(&alts3()), "cab");
    }

    #[test]
    fn single_peaked_domain_has_four_orders() {
        let dom = OrdinalDomain::single_peaked(2, &[0, 1, 2]).unwrap();
        let alts = alts3();
        let codes: Vec<String> = dom.preferences(0).iter().map(|p| p.display(&alts)).collect();
        assert_eq!(codes, ["abc", "bac", "bca", "cba"]);
    }

    #[test]
    fn full_domain_profile_order() {
        let dom = OrdinalDomain::full(2, 3);
        let profiles: Vec<Vec<usize>> = dom.profiles().collect();
        assert_eq!(profiles.len(), 36);
        assert_eq!(profiles[0], vec![0, 0]);
        assert_eq!(profiles[1], vec![0, 1]);
        assert_eq!(profiles[35], vec![5, 5]);
    }

    #[test]
    fn transpose_round_trip() {
        let m = figure1();
        assert_eq!(m.transpose().unwrap().transpose().unwrap(), m);
    }
}
