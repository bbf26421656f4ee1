//! Command surface of the `ssm` tool.
//!
//! [`run`] executes a parsed [`Cli`] and returns the report together with the
//! process exit status; `main` only prints and exits.

pub mod config;
mod render;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ssm_core::beliefs::OracleVerdict;
use ssm_core::simplicity::{analyze, check_simple_star, STAR_INTERPRETATION};
use ssm_core::trade::{self, TradeDomain, TradeFilter};
use ssm_core::voting::{self, EnumFilter, EnumerationOptions};
use ssm_core::{
    build_delegation, check_equivalence, local_dictators, oracle_check, structure_check, Classification, Mechanism,
    OrdinalDomain, Preference,
};

pub use config::{DomainSpec, RunConfig};
pub use ssm_core::format::{parse_mechanism, render_mechanism};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "ssm", version, about = "Strategic simplicity checks for finite mechanisms")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Preference domain: `full`, `single-peaked` or `single-peaked:AXIS`.
    #[arg(long, global = true)]
    pub domain: Option<String>,

    /// TOML run configuration (domain, seeds, sample counts, budgets, output path).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a mechanism and print the dictator table for every profile.
    Check { file: PathBuf },
    /// Local dictators at one preference profile.
    Dictators {
        file: PathBuf,
        /// One preference per agent, comma separated, e.g. `cab,cba`.
        #[arg(long)]
        profile: String,
    },
    /// Sample utilities and beliefs and look for agents without a robust best response.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the delegation mechanism of a type 1 mechanism and test equivalence.
    Delegation {
        file: PathBuf,
        /// Delegate agent, 1-based.
        #[arg(long)]
        delegate: usize,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enumerate strategically simple voting mechanisms (two agents, three alternatives).
    Enumerate {
        #[arg(long, default_value_t = 4)]
        max_strategies: usize,
        /// `type1`, `type2` or `all`.
        #[arg(long, default_value = "type2")]
        filter: String,
        #[arg(long)]
        budget: Option<u64>,
        /// Resume token printed by an earlier partial run.
        #[arg(long, default_value_t = 0)]
        resume: u64,
    },
    /// Exhaustive search over bilateral trade mechanisms.
    TradeSearch {
        /// Prices, comma separated (`p/q` or integers).
        #[arg(long)]
        prices: Option<String>,
        /// Values used for both agents unless the per-agent flags are given.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        seller_values: Option<String>,
        #[arg(long)]
        buyer_values: Option<String>,
        #[arg(long, default_value_t = 3)]
        max_strategies: usize,
        /// `type1` or `type2`.
        #[arg(long, default_value = "type2")]
        filter: String,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Check the trade properties of a mechanism over the configured trade domain.
    Trade { file: PathBuf },
    /// Monte Carlo welfare of mechanism A against dictatorship.
    Welfare {
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dictator of the comparison rule, 1-based.
        #[arg(long, default_value_t = 1)]
        dictator: usize,
        /// Also write the CSV report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Menu structure properties of a strategically simple mechanism.
    Structure { file: PathBuf },
    /// The variant in which opponents with a dominant strategy are expected to play it.
    Star { file: PathBuf },
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    CheckFailed = 1,
    InputError = 2,
    BudgetExceeded = 3,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub status: Status,
    /// Report text for standard output.
    pub body: String,
    /// Diagnostic for standard error.
    pub error: Option<String>,
}

impl Report {
    fn new(status: Status, body: String) -> Self {
        Report { status, body, error: None }
    }

    fn pass_if(ok: bool, body: String) -> Self {
        Report::new(if ok { Status::Pass } else { Status::CheckFailed }, body)
    }
}

/// Runs a command; errors become an input-error or budget status.
pub fn run(cli: &Cli) -> Report {
    match execute(cli) {
        Ok(report) => report,
        Err(err) => {
            let budget = err
                .chain()
                .any(|e| matches!(e.downcast_ref::<ssm_core::Error>(), Some(ssm_core::Error::BudgetExceeded { .. })));
            Report {
                status: if budget { Status::BudgetExceeded } else { Status::InputError },
                body: String::new(),
                error: Some(format!("error: {err:#}")),
            }
        }
    }
}

fn load_mechanism(path: &Path) -> Result<Mechanism> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_mechanism(&text).with_context(|| format!("{}", path.display()))
}

struct Ctx {
    config: RunConfig,
    format: Format,
}

impl Ctx {
    fn domain_for(&self, mech: &Mechanism) -> Result<OrdinalDomain> {
        self.config.domain.ordinal(mech)
    }
}

fn execute(cli: &Cli) -> Result<Report> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(flag) = &cli.domain {
        config.domain = DomainSpec::from_flag(flag)?;
    }
    let ctx = Ctx { config, format: cli.format };
    match &cli.command {
        Command::Check { file } => check(&ctx, file),
        Command::Dictators { file, profile } => dictators(&ctx, file, profile),
        Command::Oracle { file, trials, seed } => oracle(&ctx, file, *trials, *seed),
        Command::Delegation { file, delegate, samples, seed } => delegation(&ctx, file, *delegate, *samples, *seed),
        Command::Enumerate { max_strategies, filter, budget, resume } => {
            enumerate(&ctx, *max_strategies, filter, *budget, *resume)
        }
        Command::TradeSearch { prices, values, seller_values, buyer_values, max_strategies, filter, budget } => {
            let dom = trade_domain_from_flags(&ctx, prices, values, seller_values, buyer_values)?;
            trade_search(&ctx, &dom, *max_strategies, filter, *budget)
        }
        Command::Trade { file } => trade_check(&ctx, file),
        Command::Welfare { samples, seed, dictator, output } => {
            welfare(&ctx, *samples, *seed, *dictator, output.as_deref())
        }
        Command::Structure { file } => structure(&ctx, file),
        Command::Star { file } => star(&ctx, file),
    }
}

fn check(ctx: &Ctx, file: &Path) -> Result<Report> {
    let mech = load_mechanism(file)?;
    let dom = ctx.domain_for(&mech)?;
    let analysis = analyze(&mech, &dom)?;
    let body = match ctx.format {
        Format::Text => {
            let mut out = String::new();
            writeln!(out, "{}", render::summary(&mech, &ctx.config.domain))?;
            writeln!(out, "verdict: {}", analysis.classification.describe(mech.alternatives()))?;
            writeln!(out)?;
            out.push_str(&render::dictator_table(&mech, &analysis.reports));
            out
        }
        Format::Csv => render::dictator_csv(&mech, &analysis)?,
    };
    Ok(Report::pass_if(analysis.classification.is_simple(), body))
}

fn parse_profile(mech: &Mechanism, text: &str) -> Result<Vec<Preference>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != mech.agents() {
        bail!("profile {text:?} lists {} preferences, mechanism has {} agents", parts.len(), mech.agents());
    }
    Ok(parts.iter().map(|p| Preference::parse(p, mech.alternatives())).collect::<ssm_core::Result<_>>()?)
}

fn dictators(ctx: &Ctx, file: &Path, profile: &str) -> Result<Report> {
    let mech = load_mechanism(file)?;
    let dom = ctx.domain_for(&mech)?;
    let profile = parse_profile(&mech, profile)?;
    let report = local_dictators(&mech, &dom, &profile)?;
    let body = match ctx.format {
        Format::Text => render::dictator_table(&mech, std::slice::from_ref(&report)),
        Format::Csv => render::dictator_rows_csv(&mech, std::slice::from_ref(&report), None)?,
    };
    Ok(Report::pass_if(!report.dictators.is_empty(), body))
}

fn oracle(ctx: &Ctx, file: &Path, trials: Option<usize>, seed: Option<u64>) -> Result<Report> {
    let mech = load_mechanism(file)?;
    let dom = ctx.domain_for(&mech)?;
    let trials = trials.or(ctx.config.trials).unwrap_or(config::DEFAULT_TRIALS);
    let seed = seed.or(ctx.config.seed).unwrap_or(config::DEFAULT_SEED);
    let report = oracle_check(&mech, &dom, trials, seed)?;
    let verdict = report.verdict();
    let witness = match &verdict {
        OracleVerdict::Pass => None,
        OracleVerdict::Fail(w) => Some(w),
    };
    let body = match ctx.format {
        Format::Text => {
            let mut out = String::new();
            writeln!(out, "{}", render::summary(&mech, &ctx.config.domain))?;
            writeln!(out, "local-dictator test: {}", report.dictator_test.describe(mech.alternatives()))?;
            writeln!(
                out,
                "oracle: {trials} trials, seed {seed}, {} with an empty intersection",
                report.empty_trials.len()
            )?;
            if !report.dictator_test.is_simple() {
                let found = if report.targeted.is_some() { "found" } else { "not found" };
                writeln!(out, "targeted witness search: {found}")?;
            }
            match witness {
                None => writeln!(out, "verdict: pass (sampled finite-support beliefs only; evidence, not proof)")?,
                Some(w) => writeln!(out, "verdict: fail\nwitness: {}", w.describe(&mech))?,
            }
            writeln!(out, "agrees with the local-dictator test: {}", if report.concordant() { "yes" } else { "no" })?;
            out
        }
        Format::Csv => render::oracle_csv(&mech, &report, trials, seed)?,
    };
    Ok(Report::pass_if(witness.is_none(), body))
}

fn delegation(ctx: &Ctx, file: &Path, delegate: usize, samples: Option<usize>, seed: Option<u64>) -> Result<Report> {
    let mech = load_mechanism(file)?;
    let dom = ctx.domain_for(&mech)?;
    if delegate == 0 || delegate > mech.agents() {
        bail!("--delegate must be between 1 and {}", mech.agents());
    }
    let deleg = build_delegation(&mech, &dom, delegate - 1)?;
    let samples = samples.unwrap_or(config::DEFAULT_EQUIVALENCE_SAMPLES);
    let seed = seed.or(ctx.config.seed).unwrap_or(config::DEFAULT_SEED);
    let eq = check_equivalence(&mech, &deleg, &dom, samples, seed)?;
    let normal = deleg.to_normal_form()?;
    let body = match ctx.format {
        Format::Text => {
            let mut out = render::delegation(&mech, &deleg);
            writeln!(out, "reduced normal form:")?;
            out.push_str(&render_mechanism(&normal)?);
            match &eq.divergence {
                None => writeln!(out, "equivalence: same outcomes on {samples} sampled profiles (seed {seed})")?,
                Some(d) => writeln!(out, "equivalence: outcomes differ at sample {}", d.sample)?,
            }
            out
        }
        Format::Csv => render::delegation_csv(&mech, &deleg)?,
    };
    Ok(Report::pass_if(eq.is_equivalent(), body))
}

fn enumerate(ctx: &Ctx, max: usize, filter: &str, budget: Option<u64>, resume: u64) -> Result<Report> {
    let filter: EnumFilter = filter.parse()?;
    let mut opts = EnumerationOptions::new(max, filter);
    opts.budget = budget.or(ctx.config.budget).unwrap_or(EnumerationOptions::DEFAULT_BUDGET);
    opts.resume = resume;
    let run = voting::enumerate_ss_with(opts)?;
    let mut out = String::new();
    match ctx.format {
        Format::Text => {
            writeln!(out, "{} canonical forms ({} candidate grids examined)", run.forms.len(), run.examined)?;
            for (form, class) in &run.forms {
                writeln!(out, "{form}  {}", class_tag(class))?;
            }
        }
        Format::Csv => out.push_str(&render::forms_csv(&run.forms)?),
    }
    let status = match run.resume {
        None => Status::Pass,
        Some(token) => {
            let msg = format!("budget exhausted; rerun with --resume {token} to continue");
            return Ok(Report { status: Status::BudgetExceeded, body: out, error: Some(msg) });
        }
    };
    Ok(Report::new(status, out))
}

fn class_tag(class: &Classification) -> String {
    match class {
        Classification::Type1 { dictators } => {
            let ds: Vec<String> = dictators.iter().map(|d| (d + 1).to_string()).collect();
            format!("type1 [{}]", ds.join(","))
        }
        Classification::Type2 => "type2".into(),
        Classification::NotStrategicallySimple { .. } => "not-simple".into(),
    }
}

fn trade_domain_from_flags(
    ctx: &Ctx,
    prices: &Option<String>,
    values: &Option<String>,
    seller: &Option<String>,
    buyer: &Option<String>,
) -> Result<TradeDomain> {
    let from_config = ctx.config.domain.trade_domain()?;
    let list = |s: &Option<String>| -> Result<Option<Vec<ssm_core::Q>>> {
        s.as_ref().map(|s| config::rationals(std::slice::from_ref(s))).transpose()
    };
    let pick =
        |flag: Option<Vec<ssm_core::Q>>, fallback: Option<&[ssm_core::Q]>, name: &str| -> Result<Vec<ssm_core::Q>> {
            flag.or_else(|| fallback.map(<[_]>::to_vec))
                .ok_or_else(|| anyhow!("missing {name}: pass it as a flag or in a trade domain config"))
        };
    let cfg = from_config.as_ref();
    let prices = pick(list(prices)?, cfg.map(TradeDomain::prices), "--prices")?;
    let shared = list(values)?;
    let seller = pick(list(seller)?.or_else(|| shared.clone()), cfg.map(TradeDomain::seller_values), "--values")?;
    let buyer = pick(list(buyer)?.or(shared), cfg.map(TradeDomain::buyer_values), "--values")?;
    Ok(TradeDomain::new(prices, seller, buyer)?)
}

fn trade_search(ctx: &Ctx, dom: &TradeDomain, max: usize, filter: &str, budget: Option<u64>) -> Result<Report> {
    let filter = match filter.to_ascii_lowercase().as_str() {
        "type1" | "1" => TradeFilter::Type1,
        "type2" | "2" => TradeFilter::Type2,
        other => bail!("unknown filter {other:?} (type1 or type2)"),
    };
    let budget = budget.or(ctx.config.budget).unwrap_or(trade::DEFAULT_TRADE_BUDGET);
    let found = trade::search_trade(dom, max, filter, budget)?;
    let mut out = String::new();
    let mut violations = 0;
    match ctx.format {
        Format::Text => {
            writeln!(out, "trade domain: {dom}")?;
            writeln!(out, "{} {filter:?} mechanisms with at most {max} strategies per agent", found.len())?;
            for (k, m) in found.iter().enumerate() {
                let analysis = trade::analyze_trade(m, dom)?;
                violations += analysis.violations.len();
                writeln!(out, "\n# mechanism {}", k + 1)?;
                out.push_str(&render_mechanism(m)?);
                for v in &analysis.violations {
                    writeln!(out, "violation: {v:?}")?;
                }
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["index", "seller_strategies", "buyer_strategies", "grid", "violations"])?;
            for (k, m) in found.iter().enumerate() {
                let analysis = trade::analyze_trade(m, dom)?;
                violations += analysis.violations.len();
                w.write_record([
                    (k + 1).to_string(),
                    m.num_strategies(0).to_string(),
                    m.num_strategies(1).to_string(),
                    render::grid_code(m),
                    analysis.violations.len().to_string(),
                ])?;
            }
            out = String::from_utf8(w.into_inner()?)?;
        }
    }
    // a type 2 trade mechanism, or a property violation, is a failed check
    let ok = violations == 0 && (filter == TradeFilter::Type1 || found.is_empty());
    Ok(Report::pass_if(ok, out))
}

fn trade_check(ctx: &Ctx, file: &Path) -> Result<Report> {
    let mech = load_mechanism(file)?;
    let dom = ctx
        .config
        .domain
        .trade_domain()?
        .ok_or_else(|| anyhow!("`trade` needs a trade domain in the --config file"))?;
    let analysis = trade::analyze_trade(&mech, &dom)?;
    let body = match ctx.format {
        Format::Text => {
            let mut out =
                format!("trade domain: {dom}\nverdict: {}\n", analysis.classification.describe(mech.alternatives()));
            out.push_str(&analysis.describe(&dom));
            out
        }
        Format::Csv => render::trade_csv(&mech, &analysis)?,
    };
    Ok(Report::pass_if(analysis.passed(), body))
}

fn welfare(
    ctx: &Ctx,
    samples: Option<u64>,
    seed: Option<u64>,
    dictator: usize,
    output: Option<&Path>,
) -> Result<Report> {
    if dictator == 0 || dictator > 2 {
        bail!("--dictator must be 1 or 2");
    }
    let samples = samples.or(ctx.config.samples).unwrap_or(config::DEFAULT_SAMPLES);
    if samples == 0 {
        bail!("--samples must be positive");
    }
    let seed = seed.or(ctx.config.seed).unwrap_or(config::DEFAULT_SEED);
    let run = voting::welfare_mc(samples, seed, dictator - 1)?;
    let csv = run.to_csv();
    if let Some(path) = output.or(ctx.config.output.as_deref()) {
        std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    let body = match ctx.format {
        Format::Text => format!("{run}\n"),
        Format::Csv => csv,
    };
    Ok(Report::pass_if(run.a_dominates(), body))
}

fn structure(ctx: &Ctx, file: &Path) -> Result<Report> {
    let mech = load_mechanism(file)?;
    let dom = ctx.domain_for(&mech)?;
    let report = structure_check(&mech, &dom)?;
    let body = match ctx.format {
        Format::Text => {
            let mut out = String::new();
            writeln!(out, "{}", render::summary(&mech, &ctx.config.domain))?;
            writeln!(out, "verdict: {}", report.classification.describe(mech.alternatives()))?;
            writeln!(out, "opponent profile pairs checked: {}", report.pairs_checked)?;
            if report.passed() {
                writeln!(out, "menu dichotomy and distinct menus: hold everywhere")?;
            }
            for v in &report.violations {
                writeln!(out, "violation: {v}")?;
            }
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["property", "agent", "profile", "opponent_a", "opponent_b"])?;
            for v in &report.violations {
                let profile: Vec<String> = v.profile.iter().map(usize::to_string).collect();
                w.write_record([
                    format!("{:?}", v.property),
                    (v.agent + 1).to_string(),
                    profile.join(" "),
                    mech.opp_label(v.agent, v.pair.0),
                    mech.opp_label(v.agent, v.pair.1),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    // the properties are only guaranteed for simple mechanisms
    Ok(Report::pass_if(report.passed() && report.classification.is_simple(), body))
}

fn star(ctx: &Ctx, file: &Path) -> Result<Report> {
    let mech = load_mechanism(file)?;
    let dom = ctx.domain_for(&mech)?;
    let verdict = check_simple_star(&mech, &dom)?;
    let mut out = String::new();
    match ctx.format {
        Format::Text => {
            writeln!(out, "{}", render::summary(&mech, &ctx.config.domain))?;
            writeln!(out, "reading: {STAR_INTERPRETATION}")?;
            writeln!(out, "utilities searched: {}", verdict.utilities_tested)?;
            match &verdict.witness {
                None => writeln!(out, "verdict: pass (finite utility grid; evidence, not proof)")?,
                Some(w) => writeln!(out, "verdict: fail\nwitness: {}", w.describe(&mech))?,
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["verdict", "utilities_tested", "witness"])?;
            let witness = verdict.witness.as_ref().map(|x| x.describe(&mech).replace('\n', "; ")).unwrap_or_default();
            w.write_record([
                if verdict.passed() { "pass" } else { "fail" },
                &verdict.utilities_tested.to_string(),
                &witness,
            ])?;
            out = String::from_utf8(w.into_inner()?)?;
        }
    }
    Ok(Report::pass_if(verdict.passed(), out))
}
