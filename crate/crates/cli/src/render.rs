//! Text and CSV renderings of analysis results.

use std::fmt::Write as _;

use anyhow::Result;
use ssm_core::beliefs::OracleReport;
use ssm_core::simplicity::Analysis;
use ssm_core::trade::TradeAnalysis;
use ssm_core::{CanonicalForm, Classification, DelegationMechanism, DictatorReport, Mechanism};

use crate::config::DomainSpec;

pub fn summary(mech: &Mechanism, domain: &DomainSpec) -> String {
    let sizes: Vec<String> = (0..mech.agents()).map(|i| mech.num_strategies(i).to_string()).collect();
    format!(
        "mechanism: {} agents, {} strategies, alternatives {}\ndomain: {}",
        mech.agents(),
        sizes.join("x"),
        mech.alternatives().format_set(0..mech.alternatives().len()),
        domain.describe()
    )
}

fn profile_code(mech: &Mechanism, report: &DictatorReport) -> String {
    let codes: Vec<String> = report.profile.iter().map(|p| p.display(mech.alternatives())).collect();
    codes.join(",")
}

fn ud_code(mech: &Mechanism, report: &DictatorReport, agent: usize) -> String {
    let labels: Vec<&str> = report.ud[agent].iter().map(|&s| mech.strategy_label(agent, s)).collect();
    format!("{{{}}}", labels.join(","))
}

fn dictator_code(report: &DictatorReport) -> String {
    let ds: Vec<String> = report.dictators.iter().map(|d| (d + 1).to_string()).collect();
    format!("{{{}}}", ds.join(","))
}

fn enforced_code(mech: &Mechanism, report: &DictatorReport) -> String {
    let parts: Vec<String> = report
        .enforced
        .iter()
        .map(|map| {
            let pairs: Vec<String> = map
                .outcomes
                .iter()
                .map(|&(s, a)| format!("{}->{}", mech.strategy_label(map.agent, s), mech.alternatives().label(a)))
                .collect();
            format!("{}: {}", map.agent + 1, pairs.join(" "))
        })
        .collect();
    parts.join("; ")
}

/// Aligned table with one line per profile.
pub fn dictator_table(mech: &Mechanism, reports: &[DictatorReport]) -> String {
    let mut header = vec!["profile".to_string()];
    header.extend((0..mech.agents()).map(|i| format!("UD{}", i + 1)));
    header.push("dictators".into());
    header.push("enforced".into());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![profile_code(mech, r)];
            row.extend((0..mech.agents()).map(|i| ud_code(mech, r, i)));
            row.push(dictator_code(r));
            row.push(enforced_code(mech, r));
            row
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, &w)| format!("{cell:w$}")).collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).expect("write to string");
    }
    out
}

pub fn dictator_rows_csv(
    mech: &Mechanism,
    reports: &[DictatorReport],
    class: Option<&Classification>,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["profile".to_string()];
    header.extend((0..mech.agents()).map(|i| format!("ud{}", i + 1)));
    header.extend(["dictators".to_string(), "enforced".to_string()]);
    if class.is_some() {
        header.push("classification".into());
    }
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![profile_code(mech, r)];
        row.extend((0..mech.agents()).map(|i| ud_code(mech, r, i)));
        row.push(dictator_code(r));
        row.push(enforced_code(mech, r));
        if let Some(c) = class {
            row.push(c.describe(mech.alternatives()));
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn dictator_csv(mech: &Mechanism, analysis: &Analysis) -> Result<String> {
    dictator_rows_csv(mech, &analysis.reports, Some(&analysis.classification))
}

pub fn oracle_csv(mech: &Mechanism, report: &OracleReport, trials: usize, seed: u64) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trials", "seed", "dictator_test", "empty_trials", "targeted_witness", "concordant", "witness"])?;
    let witness = report
        .empty_trials
        .first()
        .or(report.targeted.as_ref())
        .map(|x| x.describe(mech).replace('\n', "; "))
        .unwrap_or_default();
    w.write_record([
        trials.to_string(),
        seed.to_string(),
        report.dictator_test.describe(mech.alternatives()),
        report.empty_trials.len().to_string(),
        report.targeted.is_some().to_string(),
        report.concordant().to_string(),
        witness,
    ])?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Outcome table of each second stage, indexed by the reported preferences.
pub fn delegation(mech: &Mechanism, deleg: &DelegationMechanism) -> String {
    let alts = deleg.alternatives();
    let nd = deleg.non_delegates();
    let mut out = format!("delegate: agent {}\n", deleg.delegate + 1);
    for (k, &j) in nd.iter().enumerate() {
        let plays: Vec<String> = deleg
            .domain()
            .preferences(j)
            .iter()
            .zip(&deleg.dominant[k])
            .map(|(p, &s)| format!("{}->{}", p.display(alts), mech.strategy_label(j, s)))
            .collect();
        out.push_str(&format!("agent {} dominant strategies: {}\n", j + 1, plays.join(" ")));
    }
    for stage in &deleg.stages {
        let label = mech.strategy_label(deleg.delegate, stage.delegate_strategy);
        let reached: std::collections::BTreeSet<usize> = stage.outcomes.iter().copied().collect();
        out.push_str(&format!("stage after {label}: outcomes {}", alts.format_set(reached)));
        if nd.len() == 1 {
            let cells: Vec<String> = deleg
                .domain()
                .preferences(nd[0])
                .iter()
                .enumerate()
                .map(|(r, p)| {
                    format!("{}->{}", p.display(alts), alts.label(deleg.stage_outcome(stage.delegate_strategy, &[r])))
                })
                .collect();
            out.push_str(&format!(" [{}]", cells.join(" ")));
        }
        out.push('\n');
    }
    out
}

pub fn delegation_csv(mech: &Mechanism, deleg: &DelegationMechanism) -> Result<String> {
    let alts = deleg.alternatives();
    let nd = deleg.non_delegates();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["delegate_strategy", "reports", "outcome"])?;
    let sizes: Vec<usize> = nd.iter().map(|&j| deleg.domain().preferences(j).len()).collect();
    let total: usize = sizes.iter().product();
    for stage in &deleg.stages {
        for flat in 0..total {
            let mut reports = vec![0; sizes.len()];
            let mut idx = flat;
            for (slot, &size) in reports.iter_mut().zip(&sizes).rev() {
                *slot = idx % size;
                idx /= size;
            }
            let codes: Vec<String> =
                nd.iter().zip(&reports).map(|(&j, &r)| deleg.domain().preferences(j)[r].display(alts)).collect();
            w.write_record([
                mech.strategy_label(deleg.delegate, stage.delegate_strategy).to_string(),
                codes.join(" "),
                alts.label(deleg.stage_outcome(stage.delegate_strategy, &reports)).to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn forms_csv(forms: &[(CanonicalForm, Classification)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["form", "class", "dictators"])?;
    for (form, class) in forms {
        let (name, ds) = match class {
            Classification::Type1 { dictators } => {
                ("type1", dictators.iter().map(|d| (d + 1).to_string()).collect::<Vec<_>>().join(" "))
            }
            Classification::Type2 => ("type2", String::new()),
            Classification::NotStrategicallySimple { .. } => ("not-simple", String::new()),
        };
        w.write_record([form.to_string(), name.to_string(), ds])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Rows separated by `/`, outcomes by spaces.
pub fn grid_code(mech: &Mechanism) -> String {
    let alts = mech.alternatives();
    let rows: Vec<String> = (0..mech.num_strategies(0))
        .map(|r| {
            let cells: Vec<&str> = (0..mech.num_strategies(1)).map(|c| alts.label(mech.outcome(&[r, c]))).collect();
            cells.join(" ")
        })
        .collect();
    rows.join(" / ")
}

pub fn trade_csv(mech: &Mechanism, analysis: &TradeAnalysis) -> Result<String> {
    let alts = mech.alternatives();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seller_value", "buyer_value", "dictators", "outcomes", "max", "min"])?;
    for p in &analysis.pairs {
        let ds: Vec<&str> = p.dictators.iter().map(|&d| if d == 0 { "S" } else { "B" }).collect();
        let os: Vec<&str> = p.outcomes.iter().map(|&a| alts.label(a)).collect();
        w.write_record([
            p.seller_value.to_string(),
            p.buyer_value.to_string(),
            ds.join(" "),
            os.join(" "),
            p.highest.map(|a| alts.label(a).to_string()).unwrap_or_default(),
            p.lowest.map(|a| alts.label(a).to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
