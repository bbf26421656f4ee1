//! Two voters choosing among three alternatives: the example mechanisms,
//! exhaustive enumeration up to relabeling, and a welfare comparison against
//! dictatorship.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::canonical::{canonicalize, CanonicalForm};
use crate::dominance::pure_ud;
use crate::error::{Error, Result};
use crate::mechanism::{Mechanism, OrdinalDomain, Preference};
use crate::search::{FastClass, Space};
use crate::simplicity::{check_simple, Classification};

const ALTS: [&str; 3] = ["a", "b", "c"];

/// The 4x4 running example with strategies `T M1 M2 B` and `L C1 C2 R`.
pub fn figure1() -> Mechanism {
    Mechanism::from_grid(
        &ALTS,
        &["T", "M1", "M2", "B"],
        &["L", "C1", "C2", "R"],
        &[&["a", "a", "a", "a"], &["a", "b", "a", "b"], &["a", "b", "c", "b"], &["a", "b", "c", "c"]],
    )
    .expect("static grid is valid")
}

/// The anonymous 5x5 mechanism: default `a`, strong and weak votes for `b` and `c`.
pub fn mechanism_a() -> Mechanism {
    let labels = ["a", "b+", "b-", "c+", "c-"];
    Mechanism::from_grid(
        &ALTS,
        &labels,
        &labels,
        &[
            &["a", "a", "a", "a", "a"],
            &["a", "b", "b", "a", "b"],
            &["a", "b", "b", "c", "b"],
            &["a", "a", "c", "c", "c"],
            &["a", "b", "b", "c", "c"],
        ],
    )
    .expect("static grid is valid")
}

/// The 4x4 mechanism in which only agent 1 grades `b` votes and only agent 2 grades `c` votes.
///
/// This is [`figure1`] with vote labels.
pub fn mechanism_b() -> Mechanism {
    Mechanism::from_grid(
        &ALTS,
        &["a", "b+", "b-", "c"],
        &["a", "b", "c+", "c-"],
        &[&["a", "a", "a", "a"], &["a", "b", "a", "b"], &["a", "b", "c", "b"], &["a", "b", "c", "c"]],
    )
    .expect("static grid is valid")
}

/// Agent `dictator` (0 or 1) names the outcome; the other agent has a single strategy.
pub fn dictatorship(dictator: usize) -> Mechanism {
    let grid: [&[&str]; 3] = [&["a"], &["b"], &["c"]];
    let m = Mechanism::from_grid(&ALTS, &["a", "b", "c"], &["-"], &grid).expect("static grid is valid");
    if dictator == 0 {
        m
    } else {
        m.transpose().expect("two agents")
    }
}

/// Which classifications [`enumerate_ss`] keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnumFilter {
    Type1,
    Type2,
    /// Every strategically simple mechanism.
    All,
}

impl EnumFilter {
    fn keeps(self, class: FastClass) -> bool {
        match self {
            EnumFilter::Type1 => class == FastClass::Type1,
            EnumFilter::Type2 => class == FastClass::Type2,
            EnumFilter::All => class != FastClass::NotSimple,
        }
    }
}

impl FromStr for EnumFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "1" => Ok(EnumFilter::Type1),
            "type2" | "2" => Ok(EnumFilter::Type2),
            "all" => Ok(EnumFilter::All),
            other => Err(Error::InvalidDomain(format!("unknown filter {other:?} (type1, type2 or all)"))),
        }
    }
}

/// Options for [`enumerate_ss_with`].
#[derive(Clone, Copy, Debug)]
pub struct EnumerationOptions {
    pub max_strategies: usize,
    pub filter: EnumFilter,
    /// Candidate grids examined before the run stops with a resume token.
    pub budget: u64,
    /// Resume token from an earlier partial run (0 starts from the beginning).
    pub resume: u64,
}

impl EnumerationOptions {
    /// Large enough for the complete search with four strategies per agent.
    pub const DEFAULT_BUDGET: u64 = 5_000_000;

    pub fn new(max_strategies: usize, filter: EnumFilter) -> Self {
        EnumerationOptions { max_strategies, filter, budget: Self::DEFAULT_BUDGET, resume: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    /// Distinct canonical forms found, sorted, with their class.
    pub forms: Vec<(CanonicalForm, Classification)>,
    /// Candidate grids examined in this run.
    pub examined: u64,
    /// Set when the budget ran out before the search finished.
    pub resume: Option<u64>,
}

impl Enumeration {
    pub fn is_complete(&self) -> bool {
        self.resume.is_none()
    }
}

/// Enumerates two-agent mechanisms over three alternatives with at most
/// `max_strategies` strategies per agent, up to relabeling of strategies,
/// alternatives and agents, and returns the strategically simple ones the
/// filter keeps.
///
/// Candidates have no duplicate strategies and every strategy is undominated
/// for some preference. Fails with [`Error::BudgetExceeded`] if the default
/// budget does not cover the search; use [`enumerate_ss_with`] for partial runs.
pub fn enumerate_ss(max_strategies: usize, filter: EnumFilter) -> Result<Vec<CanonicalForm>> {
    let run = enumerate_ss_with(EnumerationOptions::new(max_strategies, filter))?;
    match run.resume {
        None => Ok(run.forms.into_iter().map(|(f, _)| f).collect()),
        Some(resume) => Err(Error::BudgetExceeded { examined: run.examined, found: run.forms.len(), resume }),
    }
}

pub fn enumerate_ss_with(opts: EnumerationOptions) -> Result<Enumeration> {
    if opts.max_strategies == 0 || opts.max_strategies > 6 {
        return Err(Error::Precondition("max_strategies must be between 1 and 6".into()));
    }
    let ranks: Vec<Vec<u8>> = Preference::all(3).iter().map(|p| p.ranks().iter().map(|&r| r as u8).collect()).collect();
    let space = Space {
        alphabet: 3,
        max_rows: opts.max_strategies,
        max_cols: opts.max_strategies,
        ranks: [ranks.clone(), ranks],
        ever_undominated: true,
        opt_out: None,
    };
    let filter = opts.filter;
    let run = space.run(&move |c| filter.keeps(c), opts.budget.max(1), opts.resume);
    let dom = OrdinalDomain::full(2, 3);
    let unique: BTreeSet<CanonicalForm> = run
        .matches
        .par_iter()
        .map(|(grid, _)| canonicalize(&grid_mechanism(&ALTS, grid)?))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let out = unique
        .into_iter()
        .map(|form| {
            let class = check_simple(&form.to_mechanism(), &dom)?;
            Ok((form, class))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Enumeration { forms: out, examined: run.examined, resume: run.resume })
}

pub(crate) fn grid_mechanism(alts: &[&str], grid: &crate::search::Grid) -> Result<Mechanism> {
    Mechanism::new(
        alts.iter().map(|s| s.to_string()).collect(),
        vec![(1..=grid.rows).map(|i| format!("s{i}")).collect(), (1..=grid.cols).map(|i| format!("t{i}")).collect()],
        grid.cells.iter().map(|&x| x as usize).collect(),
    )
}

/// One line of a welfare report.
#[derive(Clone, Debug, PartialEq)]
pub struct WelfareStat {
    pub criterion: &'static str,
    pub mechanism: &'static str,
    pub mean: f64,
    pub stderr: f64,
}

impl WelfareStat {
    /// Normal-approximation interval at the given z value.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }
}

/// Result of [`welfare_mc`].
#[derive(Clone, Debug, PartialEq)]
pub struct WelfareRun {
    pub samples: u64,
    pub seed: u64,
    pub dictator: usize,
    /// Utilitarian then Rawlsian; per criterion mechanism A, dictatorship, and the paired difference.
    pub stats: Vec<WelfareStat>,
    /// Samples in which some voter was exactly indifferent between two votes.
    pub ties: u64,
}

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489;

impl WelfareRun {
    pub const INTERPRETATION: &'static str = "voters independent; ordinal type uniform over the six orders; \
        middle utility uniform on (0,1); belief over the opponent's six ordinal types flat Dirichlet";

    pub fn stat(&self, criterion: &str, mechanism: &str) -> Option<&WelfareStat> {
        self.stats.iter().find(|s| s.criterion == criterion && s.mechanism == mechanism)
    }

    /// Whether mechanism A beats dictatorship on both criteria with the 99% interval above zero.
    pub fn a_dominates(&self) -> bool {
        ["utilitarian", "rawlsian"]
            .iter()
            .all(|c| self.stat(c, "A-minus-dictatorship").is_some_and(|s| s.interval(Z99).0 > 0.0))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("criterion,mechanism,mean,stderr,n,seed\n");
        for s in &self.stats {
            out.push_str(&format!(
                "{},{},{:.9},{:.9},{},{}\n",
                s.criterion, s.mechanism, s.mean, s.stderr, self.samples, self.seed
            ));
        }
        out
    }
}

impl fmt::Display for WelfareRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "welfare: {} samples, seed {}, dictator agent {}", self.samples, self.seed, self.dictator + 1)?;
        writeln!(f, "model: {}", Self::INTERPRETATION)?;
        for s in &self.stats {
            let (lo, hi) = s.interval(Z99);
            writeln!(
                f,
                "  {:<12} {:<22} mean {:.6}  stderr {:.6}  99% CI [{:.6}, {:.6}]",
                s.criterion, s.mechanism, s.mean, s.stderr, lo, hi
            )?;
        }
        write!(f, "ties broken by lowest strategy index: {}", self.ties)
    }
}

/// Mechanism-A play derived from the grid: a dominant vote per ordinal type
/// where one exists, otherwise the expected-utility comparison among the
/// undominated votes against the opponent types' dominant votes.
struct VoteModel {
    mech: Mechanism,
    prefs: Vec<Preference>,
    /// Dominant vote per type, if any.
    dominant: Vec<Option<usize>>,
    /// For types without a dominant vote: (vote, outcome against each opponent type).
    contested: Vec<Vec<(usize, [usize; 6])>>,
}

impl VoteModel {
    fn new() -> Self {
        let mech = mechanism_a();
        let prefs = Preference::all(3);
        let uds: Vec<Vec<usize>> = prefs.iter().map(|p| pure_ud(&mech, 0, p).expect("valid").strategies).collect();
        let dominant: Vec<Option<usize>> = uds.iter().map(|ud| (ud.len() == 1).then(|| ud[0])).collect();
        let contested = uds
            .iter()
            .map(|ud| {
                if ud.len() == 1 {
                    return Vec::new();
                }
                ud.iter()
                    .map(|&s| {
                        let mut against = [0; 6];
                        for (k, slot) in against.iter_mut().enumerate() {
                            // the opponent's undominated votes all give the same outcome against s
                            let outs: BTreeSet<usize> = uds[k].iter().map(|&t| mech.outcome(&[s, t])).collect();
                            assert_eq!(outs.len(), 1, "opponent type {k} is not pinned down");
                            *slot = *outs.iter().next().unwrap();
                        }
                        (s, against)
                    })
                    .collect()
            })
            .collect();
        VoteModel { mech, prefs, dominant, contested }
    }

    fn utility(&self, voter: &Voter, a: usize) -> f64 {
        match self.prefs[voter.kind].rank(a) {
            0 => 1.0,
            1 => voter.middle,
            _ => 0.0,
        }
    }

    /// The vote and whether the choice was an exact tie.
    fn vote(&self, voter: &Voter) -> (usize, bool) {
        if let Some(s) = self.dominant[voter.kind] {
            return (s, false);
        }
        let mut best: Option<(usize, f64)> = None;
        let mut tie = false;
        for (s, against) in &self.contested[voter.kind] {
            let eu: f64 = against.iter().zip(&voter.belief).map(|(&o, p)| p * self.utility(voter, o)).sum();
            match best {
                Some((_, b)) if eu == b => tie = true,
                Some((_, b)) if eu < b => {}
                _ => {
                    best = Some((*s, eu));
                    tie = false;
                }
            }
        }
        (best.expect("contested types have votes").0, tie)
    }
}

#[derive(Clone, Debug)]
struct Voter {
    /// Index into `Preference::all(3)`.
    kind: usize,
    middle: f64,
    belief: [f64; 6],
}

impl Voter {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        let kind = rng.random_range(0..6);
        let middle = loop {
            let x: f64 = rng.random();
            if x > 0.0 {
                break x;
            }
        };
        let mut belief = [0.0; 6];
        for slot in belief.iter_mut() {
            *slot = Exp1.sample(rng);
        }
        let total: f64 = belief.iter().sum();
        for slot in belief.iter_mut() {
            *slot /= total;
        }
        Voter { kind, middle, belief }
    }
}

/// Per-sample welfare: (utilitarian A, utilitarian dictatorship, Rawlsian A, Rawlsian dictatorship), tie flag.
fn sample_welfare(model: &VoteModel, voters: &[Voter; 2], dictator: usize) -> ([f64; 4], bool) {
    let (s0, t0) = model.vote(&voters[0]);
    let (s1, t1) = model.vote(&voters[1]);
    let a = model.mech.outcome(&[s0, s1]);
    let d = model.prefs[voters[dictator].kind].top();
    let ua = [model.utility(&voters[0], a), model.utility(&voters[1], a)];
    let ud = [model.utility(&voters[0], d), model.utility(&voters[1], d)];
    ([ua[0] + ua[1], ud[0] + ud[1], ua[0].min(ua[1]), ud[0].min(ud[1])], t0 || t1)
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: [f64; 6],
    sq: [f64; 6],
    ties: u64,
}

/// Monte Carlo comparison of mechanism A with the dictatorship of `dictator`.
///
/// Samples are drawn in chunks with per-chunk ChaCha streams and the chunk
/// sums are combined in chunk order, so the result is identical for any
/// thread count.
pub fn welfare_mc(samples: u64, seed: u64, dictator: usize) -> Result<WelfareRun> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    if dictator > 1 {
        return Err(Error::AgentOutOfRange { agent: dictator, agents: 2 });
    }
    const CHUNK: u64 = 10_000;
    let model = VoteModel::new();
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = CHUNK.min(samples - chunk * CHUNK);
            let mut m = Moments::default();
            for _ in 0..count {
                let voters = [Voter::sample(&mut rng), Voter::sample(&mut rng)];
                let (w, tie) = sample_welfare(&model, &voters, dictator);
                let values = [w[0], w[1], w[0] - w[1], w[2], w[3], w[2] - w[3]];
                for (k, v) in values.iter().enumerate() {
                    m.sum[k] += v;
                    m.sq[k] += v * v;
                }
                m.n += 1;
                m.ties += u64::from(tie);
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for p in parts {
        total.n += p.n;
        total.ties += p.ties;
        for k in 0..6 {
            total.sum[k] += p.sum[k];
            total.sq[k] += p.sq[k];
        }
    }
    let n = total.n as f64;
    let names = [
        ("utilitarian", "A"),
        ("utilitarian", "dictatorship"),
        ("utilitarian", "A-minus-dictatorship"),
        ("rawlsian", "A"),
        ("rawlsian", "dictatorship"),
        ("rawlsian", "A-minus-dictatorship"),
    ];
    let stats = names
        .iter()
        .enumerate()
        .map(|(k, &(criterion, mechanism))| {
            let mean = total.sum[k] / n;
            let var = if total.n > 1 { ((total.sq[k] - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            WelfareStat { criterion, mechanism, mean, stderr: (var / n).sqrt() }
        })
        .collect();
    Ok(WelfareRun { samples, seed, dictator, stats, ties: total.ties })
}

/// Classifications on the single-peaked domain with axis `a < b < c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SinglePeakedReport {
    pub mechanism_a: Classification,
    pub mechanism_b: Classification,
    pub dictatorship: Classification,
}

impl SinglePeakedReport {
    /// A stays type 2 while B and dictatorship are type 1.
    pub fn passed(&self) -> bool {
        self.mechanism_a == Classification::Type2
            && matches!(self.mechanism_b, Classification::Type1 { .. })
            && matches!(self.dictatorship, Classification::Type1 { .. })
    }
}

pub fn single_peaked_check() -> Result<SinglePeakedReport> {
    let dom = OrdinalDomain::single_peaked(2, &[0, 1, 2])?;
    Ok(SinglePeakedReport {
        mechanism_a: check_simple(&mechanism_a(), &dom)?,
        mechanism_b: check_simple(&mechanism_b(), &dom)?,
        dictatorship: check_simple(&dictatorship(0), &dom)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::{br_intersection, compatible_polytope, random_utility, UtilityBelief};
    use crate::mechanism::{AlternativeSet, Utility};
    use crate::{q, Q};
    use num_traits::{One, Zero};

    fn cell(m: &Mechanism, r: &str, c: &str) -> String {
        let o = m.outcome(&[m.strategy_index(0, r).unwrap(), m.strategy_index(1, c).unwrap()]);
        m.alternatives().label(o).to_string()
    }

    #[test]
    fn grid_cells() {
        let a = mechanism_a();
        assert_eq!(cell(&a, "b+", "c-"), "b");
        for c in ["a", "b+", "b-", "c+", "c-"] {
            assert_eq!(cell(&a, "a", c), "a");
        }
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(a.outcome(&[r, c]), a.outcome(&[c, r]));
            }
        }
        let b = mechanism_b();
        assert_eq!(cell(&b, "b-", "c+"), "c");
        assert_eq!(cell(&b, "a", "b"), "a");
        let relabeled: Vec<usize> = figure1().outcome_table().to_vec();
        assert_eq!(b.outcome_table(), relabeled.as_slice());
    }

    #[test]
    fn small_enumerations() {
        let one = enumerate_ss(1, EnumFilter::All).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].to_mechanism().is_constant());
        assert!(enumerate_ss(1, EnumFilter::Type2).unwrap().is_empty());
        assert!(enumerate_ss(3, EnumFilter::Type2).unwrap().is_empty());
        let type1 = enumerate_ss(3, EnumFilter::Type1).unwrap();
        assert!(type1.contains(&canonicalize(&dictatorship(0)).unwrap()));
    }

    #[test]
    fn partial_enumeration_reports_resume_token() {
        let mut opts = EnumerationOptions::new(3, EnumFilter::All);
        opts.budget = 100;
        let run = enumerate_ss_with(opts).unwrap();
        assert!(!run.is_complete());
        assert!(matches!(
            enumerate_ss_with(EnumerationOptions { budget: 100, resume: 1_000_000, ..opts }),
            Ok(Enumeration { resume: None, .. })
        ));
    }

    #[test]
    fn single_peaked() {
        let r = single_peaked_check().unwrap();
        assert_eq!(r.mechanism_a, Classification::Type2);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn both_a_top_sample_gives_a() {
        let model = VoteModel::new();
        let abc = Preference::all(3).iter().position(|p| p.top() == 0).unwrap();
        let voter = Voter { kind: abc, middle: 0.3, belief: [1.0 / 6.0; 6] };
        let (w, tie) = sample_welfare(&model, &[voter.clone(), voter], 0);
        assert!(!tie);
        assert_eq!(w[0], w[1]);
        assert_eq!(w[2], w[3]);
        assert_eq!(w[0], 2.0);
    }

    #[test]
    fn welfare_small_run_is_reproducible() {
        let a = welfare_mc(20_000, 7, 0).unwrap();
        let b = welfare_mc(20_000, 7, 0).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        for s in &a.stats {
            if s.mechanism != "A-minus-dictatorship" {
                let hi = if s.criterion == "utilitarian" { 2.0 } else { 1.0 };
                assert!((0.0..=hi).contains(&s.mean));
            }
        }
        assert_eq!(a.to_csv().lines().count(), 7);
    }

    // For c > b > a the two undominated votes are c+ and c-, and
    // EU(c+) - EU(c-) = p(b-) (1 - u(b)) - p(b+) u(b), where b+ and b- are
    // the dominant votes of the opponent types b > a > c and b > c > a.
    #[test]
    fn contested_vote_matches_closed_form_and_oracle() {
        let m = mechanism_a();
        let alts = AlternativeSet::new(ALTS).unwrap();
        let prefs = Preference::all(3);
        let cba = Preference::parse("cba", &alts).unwrap();
        let strong_b = prefs.iter().position(|p| p.display(&alts) == "bac").unwrap();
        let weak_b = prefs.iter().position(|p| p.display(&alts) == "bca").unwrap();
        assert_eq!(pure_ud(&m, 1, &prefs[strong_b]).unwrap().labels(&m), ["b+"]);
        assert_eq!(pure_ud(&m, 1, &prefs[weak_b]).unwrap().labels(&m), ["b-"]);
        let (cp, cm) = (m.strategy_index(0, "c+").unwrap(), m.strategy_index(0, "c-").unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let u = random_utility(&cba, &mut rng);
            let ub = u.value(1).clone();
            let weights: Vec<i64> = (0..6).map(|_| rng.random_range(0..5)).collect();
            let total: i64 = weights.iter().sum::<i64>().max(1);
            let mut support: Vec<(Vec<Utility>, Q)> = prefs
                .iter()
                .zip(&weights)
                .filter(|(_, &w)| w > 0)
                .map(|(p, &w)| (vec![random_utility(p, &mut rng)], q(w, total)))
                .collect();
            if support.is_empty() {
                support.push((vec![Utility::evenly_spaced(&prefs[0])], Q::one()));
            }
            let belief = UtilityBelief::new(&m, 0, support).unwrap();
            let p = |k: usize| belief.marginal(0, &prefs[k]);
            let diff = p(weak_b) * (Q::one() - &ub) - p(strong_b) * &ub;
            let expected = if diff > Q::zero() {
                vec![cp]
            } else if diff < Q::zero() {
                vec![cm]
            } else {
                vec![cp, cm]
            };
            let poly = compatible_polytope(&m, &belief).unwrap();
            assert_eq!(br_intersection(&m, 0, &u, &poly).unwrap(), expected);
        }
    }
}
