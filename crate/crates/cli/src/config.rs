//! Run configuration: domain choice and defaults, optionally read from TOML.
//!
//! ```toml
//! seed = 7
//! samples = 200000
//! trials = 500
//! budget = 5000000
//! output = "welfare.csv"
//!
//! [domain]
//! kind = "explicit"            # full | single-peaked | explicit | trade
//! agents = [["abc", "acb"], ["cba", "cab"]]
//! ```
//!
//! A single-peaked domain takes `axis = "abc"`; a trade domain takes
//! `prices`, `seller_values` and `buyer_values` as lists of `p/q` strings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use ssm_core::format::parse_rational;
use ssm_core::trade::{trade_domain_to_ordinal, TradeDomain};
use ssm_core::{Mechanism, OrdinalDomain, Preference, Q};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_EQUIVALENCE_SAMPLES: usize = 200;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub trials: Option<usize>,
    pub budget: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub domain: DomainSpec,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    #[default]
    Full,
    SinglePeaked {
        /// Alternatives left to right, e.g. `"abc"` or `"a > b > c"`.
        axis: String,
    },
    Explicit {
        /// One list of preferences per agent.
        agents: Vec<Vec<String>>,
    },
    Trade {
        prices: Vec<String>,
        seller_values: Vec<String>,
        buyer_values: Vec<String>,
    },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        if self.samples == Some(0) || self.trials == Some(0) || self.budget == Some(0) {
            bail!("samples, trials and budget must be positive");
        }
        Ok(())
    }
}

impl DomainSpec {
    /// Parses the `--domain` flag: `full`, `single-peaked` (alphabetical axis)
    /// or `single-peaked:AXIS`.
    pub fn from_flag(flag: &str) -> Result<Self> {
        match flag.split_once(':') {
            None if flag == "full" => Ok(DomainSpec::Full),
            None if flag == "single-peaked" => Ok(DomainSpec::SinglePeaked { axis: String::new() }),
            Some(("single-peaked", axis)) => Ok(DomainSpec::SinglePeaked { axis: axis.to_string() }),
            _ => bail!("unknown domain {flag:?} (full, single-peaked or single-peaked:AXIS; use --config for others)"),
        }
    }

    pub fn trade_domain(&self) -> Result<Option<TradeDomain>> {
        match self {
            DomainSpec::Trade { prices, seller_values, buyer_values } => {
                Ok(Some(TradeDomain::new(rationals(prices)?, rationals(seller_values)?, rationals(buyer_values)?)?))
            }
            _ => Ok(None),
        }
    }

    /// The ordinal domain for `mech`.
    pub fn ordinal(&self, mech: &Mechanism) -> Result<OrdinalDomain> {
        let alts = mech.alternatives();
        let n = mech.agents();
        let dom = match self {
            DomainSpec::Full => OrdinalDomain::full(n, alts.len()),
            DomainSpec::SinglePeaked { axis } => {
                let order: Vec<usize> = if axis.is_empty() {
                    (0..alts.len()).collect()
                } else {
                    Preference::parse(axis, alts).context("single-peaked axis")?.order().to_vec()
                };
                OrdinalDomain::single_peaked(n, &order)?
            }
            DomainSpec::Explicit { agents } => {
                if agents.len() != n {
                    bail!("domain lists preferences for {} agents, mechanism has {n}", agents.len());
                }
                let per_agent = agents
                    .iter()
                    .map(|codes| codes.iter().map(|c| Preference::parse(c, alts)).collect::<ssm_core::Result<Vec<_>>>())
                    .collect::<ssm_core::Result<Vec<_>>>()?;
                OrdinalDomain::new(per_agent)?
            }
            DomainSpec::Trade { .. } => {
                let trade = self.trade_domain()?.expect("trade domain");
                if mech.alternatives() != &trade.alternatives() {
                    bail!(
                        "mechanism alternatives {:?} do not match the trade domain {:?}",
                        mech.alternatives().labels(),
                        trade.alternatives().labels()
                    );
                }
                trade_domain_to_ordinal(&trade)?
            }
        };
        Ok(dom)
    }

    pub fn describe(&self) -> String {
        match self {
            DomainSpec::Full => "full".into(),
            DomainSpec::SinglePeaked { axis } if axis.is_empty() => "single-peaked (alphabetical axis)".into(),
            DomainSpec::SinglePeaked { axis } => format!("single-peaked (axis {axis})"),
            DomainSpec::Explicit { agents } => {
                let parts: Vec<String> = agents.iter().map(|a| format!("{{{}}}", a.join(","))).collect();
                format!("explicit {}", parts.join(" x "))
            }
            DomainSpec::Trade { prices, seller_values, buyer_values } => format!(
                "trade: prices {{{}}}, seller values {{{}}}, buyer values {{{}}}",
                prices.join(","),
                seller_values.join(","),
                buyer_values.join(",")
            ),
        }
    }
}

pub fn rationals(items: &[String]) -> Result<Vec<Q>> {
    items
        .iter()
        .flat_map(|s| s.split(','))
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| Ok(parse_rational(s)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ssm_core::voting::figure1;

    #[test]
    fn parses_explicit_domain() {
        let config: RunConfig = toml::from_str(
            r#"
            seed = 3
            [domain]
            kind = "explicit"
            agents = [["cab"], ["cba", "abc"]]
            "#,
        )
        .unwrap();
        assert_eq!(config.seed, Some(3));
        let dom = config.domain.ordinal(&figure1()).unwrap();
        assert_eq!(dom.preferences(1).len(), 2);
    }

    #[test]
    fn parses_trade_domain() {
        let config: RunConfig = toml::from_str(
            r#"
            [domain]
            kind = "trade"
            prices = ["2", "4"]
            seller_values = ["1", "3", "5"]
            buyer_values = ["1", "3", "5"]
            "#,
        )
        .unwrap();
        assert_eq!(config.domain.trade_domain().unwrap().unwrap().prices().len(), 2);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("seeds = 1").is_err());
    }

    #[test]
    fn domain_flags() {
        assert_eq!(DomainSpec::from_flag("full").unwrap(), DomainSpec::Full);
        assert_eq!(
            DomainSpec::from_flag("single-peaked:bac").unwrap(),
            DomainSpec::SinglePeaked { axis: "bac".into() }
        );
        assert!(DomainSpec::from_flag("weird").is_err());
    }
}
