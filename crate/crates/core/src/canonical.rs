//! Canonical forms of mechanisms up to relabeling.
//!
//! The canonical form is the lexicographically smallest encoding over the
//! allowed relabelings: per-agent strategy permutations always, alternative
//! permutations and agent permutations when the [`Symmetry`] asks for them.
//! Orbits are enumerated explicitly; for each candidate the first agent's
//! strategies are put in sorted order, which minimizes over that agent's
//! permutations without enumerating them.

use std::fmt;

use crate::error::{Error, Result};
use crate::mechanism::{Mechanism, Preference};

/// Which relabelings are quotiented out (strategy permutations always are).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Symmetry {
    pub alternatives: bool,
    pub agents: bool,
}

impl Symmetry {
    /// Strategies, alternatives and agents.
    pub const FULL: Symmetry = Symmetry { alternatives: true, agents: true };
    /// Strategies and alternatives, agents kept in place.
    pub const NO_AGENT_SWAP: Symmetry = Symmetry { alternatives: true, agents: false };
    /// Strategy permutations only.
    pub const STRATEGIES: Symmetry = Symmetry { alternatives: false, agents: false };
}

/// Encoding: agent count, alternative count, strategy counts, then the
/// outcome table in profile order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm {
    bytes: Vec<u8>,
}

impl CanonicalForm {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn agents(&self) -> usize {
        self.bytes[0] as usize
    }

    fn sizes(&self) -> &[u8] {
        &self.bytes[2..2 + self.agents()]
    }

    fn table(&self) -> &[u8] {
        &self.bytes[2 + self.agents()..]
    }

    /// A mechanism with this canonical table, alternatives labelled `a, b, c, …`
    /// and strategies `s1, s2, …` (agent 1), `t1, t2, …` (agent 2) and so on.
    pub fn to_mechanism(&self) -> Mechanism {
        let m = self.bytes[1] as usize;
        let alternatives = (0..m).map(alt_label).collect();
        let strategies = self
            .sizes()
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let prefix = char::from(b's' + (i as u8 % 8));
                (1..=k).map(|s| format!("{prefix}{s}")).collect()
            })
            .collect();
        let outcomes = self.table().iter().map(|&o| o as usize).collect();
        Mechanism::new(alternatives, strategies, outcomes).expect("canonical forms encode valid mechanisms")
    }
}

fn alt_label(a: usize) -> String {
    if a < 26 {
        char::from(b'a' + a as u8).to_string()
    } else {
        format!("x{a}")
    }
}

/// Rows separated by `/`, e.g. `4x4 aaaa/abab/abcb/abcc` for two agents.
impl fmt::Display for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.sizes().iter().map(u8::to_string).collect();
        write!(f, "{} ", sizes.join("x"))?;
        let stride = self.table().len() / self.sizes()[0].max(1) as usize;
        for (k, chunk) in self.table().chunks(stride.max(1)).enumerate() {
            if k > 0 {
                f.write_str("/")?;
            }
            for &o in chunk {
                f.write_str(&alt_label(o as usize))?;
            }
        }
        Ok(())
    }
}

/// Canonical form under [`Symmetry::FULL`].
pub fn canonicalize(mech: &Mechanism) -> Result<CanonicalForm> {
    canonicalize_with(mech, Symmetry::FULL)
}

pub fn canonicalize_with(mech: &Mechanism, sym: Symmetry) -> Result<CanonicalForm> {
    let n = mech.agents();
    let m = mech.alternatives().len();
    if n > 255 || m > 255 || (0..n).any(|i| mech.num_strategies(i) > 255) {
        return Err(Error::Precondition(
            "canonical forms support at most 255 agents, alternatives and strategies".into(),
        ));
    }
    const MAX_ORBIT: u128 = 50_000_000;
    let alt_perms: Vec<Vec<usize>> = if sym.alternatives {
        Preference::all(m).into_iter().map(|p| p.order().to_vec()).collect()
    } else {
        vec![(0..m).collect()]
    };
    let agent_perms: Vec<Vec<usize>> = if sym.agents {
        Preference::all(n).into_iter().map(|p| p.order().to_vec()).collect()
    } else {
        vec![(0..n).collect()]
    };
    let inner: u128 =
        (1..n).map(|i| factorial(mech.num_strategies(i))).max().unwrap_or(1).saturating_pow(n.saturating_sub(1) as u32);
    if (alt_perms.len() as u128) * (agent_perms.len() as u128) * inner > MAX_ORBIT {
        return Err(Error::Precondition("relabeling orbit too large to enumerate".into()));
    }
    let mut best: Option<Vec<u8>> = None;
    for order in &agent_perms {
        // order[k] = original agent placed at position k
        let sizes: Vec<usize> = order.iter().map(|&a| mech.num_strategies(a)).collect();
        let rest_perms: Vec<Vec<Vec<usize>>> = sizes[1..].iter().map(|&k| all_perms(k)).collect();
        let table = permuted_agents(mech, order, &sizes);
        for alt in &alt_perms {
            // alt[k] = original alternative placed at label k; invert for old -> new
            let mut relabel = vec![0u8; m];
            for (new, &old) in alt.iter().enumerate() {
                relabel[old] = new as u8;
            }
            let mut pick = vec![0usize; rest_perms.len()];
            loop {
                let candidate = encode(&table, &sizes, &relabel, &rest_perms, &pick, m);
                if best.as_ref().is_none_or(|b| candidate < *b) {
                    best = Some(candidate);
                }
                if !advance(&mut pick, &rest_perms) {
                    break;
                }
            }
        }
    }
    Ok(CanonicalForm { bytes: best.expect("at least one candidate") })
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

fn all_perms(k: usize) -> Vec<Vec<usize>> {
    Preference::all(k).into_iter().map(|p| p.order().to_vec()).collect()
}

fn advance(pick: &mut [usize], perms: &[Vec<Vec<usize>>]) -> bool {
    for k in (0..pick.len()).rev() {
        pick[k] += 1;
        if pick[k] < perms[k].len() {
            return true;
        }
        pick[k] = 0;
    }
    false
}

/// The outcome table with agents reordered so that position `k` holds agent `order[k]`.
fn permuted_agents(mech: &Mechanism, order: &[usize], sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut profile = vec![0; order.len()];
    for mut idx in 0..total {
        for k in (0..order.len()).rev() {
            profile[order[k]] = idx % sizes[k];
            idx /= sizes[k];
        }
        out.push(mech.outcome(&profile));
    }
    out
}

fn encode(
    table: &[usize],
    sizes: &[usize],
    relabel: &[u8],
    rest_perms: &[Vec<Vec<usize>>],
    pick: &[usize],
    m: usize,
) -> Vec<u8> {
    let stride: usize = sizes[1..].iter().product();
    let mut rows: Vec<Vec<u8>> = (0..sizes[0]).map(|_| vec![0u8; stride]).collect();
    let mut tail = vec![0usize; sizes.len() - 1];
    for (first, row) in rows.iter_mut().enumerate() {
        for flat in 0..stride {
            let mut idx = flat;
            for k in (0..tail.len()).rev() {
                tail[k] = idx % sizes[k + 1];
                idx /= sizes[k + 1];
            }
            // strategy tail[k] of position k+1 moves to rest_perms[k][pick[k]][tail[k]]
            let mut target = 0;
            for k in 0..tail.len() {
                target = target * sizes[k + 1] + rest_perms[k][pick[k]][tail[k]];
            }
            row[target] = relabel[table[first * stride + flat]];
        }
    }
    rows.sort_unstable();
    let mut out = Vec::with_capacity(2 + sizes.len() + sizes[0] * stride);
    out.push(sizes.len() as u8);
    out.push(m as u8);
    out.extend(sizes.iter().map(|&k| k as u8));
    for row in rows {
        out.extend(row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voting::{figure1, mechanism_a, mechanism_b};

    #[test]
    fn figure1_and_b_share_a_form() {
        assert_eq!(canonicalize(&figure1()).unwrap(), canonicalize(&mechanism_b()).unwrap());
    }

    #[test]
    fn idempotent() {
        for m in [figure1(), mechanism_a()] {
            let c = canonicalize(&m).unwrap();
            assert_eq!(canonicalize(&c.to_mechanism()).unwrap(), c);
        }
    }

    #[test]
    fn transpose_is_quotiented_only_with_agent_symmetry() {
        let b = mechanism_b();
        let t = b.transpose().unwrap();
        assert_eq!(canonicalize(&b).unwrap(), canonicalize(&t).unwrap());
        assert_ne!(
            canonicalize_with(&b, Symmetry::STRATEGIES).unwrap(),
            canonicalize_with(&t, Symmetry::STRATEGIES).unwrap()
        );
        let a = mechanism_a();
        assert_eq!(
            canonicalize_with(&a, Symmetry::STRATEGIES).unwrap(),
            canonicalize_with(&a.transpose().unwrap(), Symmetry::STRATEGIES).unwrap()
        );
    }

    #[test]
    fn display_of_constant() {
        let m = Mechanism::from_grid(&["a", "b", "c"], &["x"], &["y"], &[&["c"]]).unwrap();
        assert_eq!(canonicalize(&m).unwrap().to_string(), "1x1 a");
    }

    #[test]
    fn three_agent_forms() {
        let strategies = vec![vec!["0".to_string(), "1".to_string()]; 3];
        // majority of three binary votes
        let outcomes: Vec<usize> = (0..8).map(|p: usize| usize::from(p.count_ones() >= 2)).collect();
        let m = Mechanism::new(vec!["a".into(), "b".into()], strategies.clone(), outcomes).unwrap();
        let flipped = m.relabel(&[1, 0], &[vec![1, 0], vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(canonicalize(&m).unwrap(), canonicalize(&flipped).unwrap());
    }
}
