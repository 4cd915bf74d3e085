//! Table and figure data as CSV text.

use std::collections::{BTreeMap, BTreeSet};

use super::dataset::{AnalysisDataset, AnalysisRow, ParticipantRow};
use super::debt_aversion::learning_deltas;
use super::descriptive::{describe, median};
use super::effect::cohens_d;
use super::kde::{kernel_density, padded_grid};
use super::nonparam::{mann_whitney_u, wilcoxon_signed_rank};
use super::ols::{ols_clustered, RegressionResult};
use crate::error::AnalysisError;
use crate::model::{optimal_consumption, ModelParams, Treatment};
use crate::session::Ordering;

/// A rectangular CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| cells.iter().map(|c| quote(c)).collect::<Vec<_>>().join(",");
        out.push_str(&line(&self.header));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Six decimals; NaN and missing become an empty cell.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

/// Which country is "focal" for single-country columns and which get a
/// dummy in combined columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportOptions {
    /// Defaults to the first country (alphabetically) with any CRT data,
    /// else the first country.
    pub focal_country: Option<String>,
}

impl ReportOptions {
    fn focal(&self, ds: &AnalysisDataset) -> String {
        if let Some(c) = &self.focal_country {
            return c.clone();
        }
        let with_crt = ds.rows.iter().find(|r| r.crt_score.is_some()).map(|r| r.country.clone());
        with_crt.or_else(|| ds.countries().into_iter().next()).unwrap_or_default()
    }
}

fn rows_for<'a>(ds: &'a AnalysisDataset, country: &'a str) -> impl Iterator<Item = &'a AnalysisRow> + 'a {
    ds.rows.iter().filter(move |r| r.country == country)
}

fn measure(r: &AnalysisRow, m: &str) -> f64 {
    match m {
        "m1" => r.m1,
        "m2" => r.m2,
        _ => r.m3,
    }
}

const MEASURES: [&str; 3] = ["m1", "m2", "m3"];
const ORDERINGS: [Ordering; 2] = [Ordering::BorrowingFirst, Ordering::SavingFirst];

/// Participant-level summary statistics per country.
pub fn summary_statistics(ds: &AnalysisDataset) -> Result<Table, AnalysisError> {
    let participants = ds.participants()?;
    let mut t = Table::new("table1", &["country", "variable", "obs", "mean", "sd", "p5", "p95"]);
    for country in ds.countries() {
        let group: Vec<&ParticipantRow> = participants.iter().filter(|p| p.info.country == country).collect();
        let vars: [(&str, fn(&ParticipantRow) -> Option<f64>); 3] = [
            ("crt_score", |p| p.info.crt_score),
            ("female", |p| p.info.female),
            ("risk_aversion", |p| p.info.risk_aversion),
        ];
        for (name, get) in vars {
            let values: Vec<f64> = group.iter().filter_map(|p| get(p)).collect();
            if values.is_empty() {
                continue;
            }
            let s = describe(&values);
            t.rows.push(vec![
                country.clone(),
                name.to_string(),
                s.n.to_string(),
                fmt_num(s.mean),
                fmt_num(s.sd),
                fmt_num(s.p5),
                fmt_num(s.p95),
            ]);
        }
    }
    Ok(t)
}

fn p_cell(a: &[f64], b: &[f64]) -> String {
    match mann_whitney_u(a, b) {
        Ok(r) => fmt_num(r.p_two_sided),
        Err(_) => String::new(),
    }
}

fn round_header<'a>(lead: &[&'a str], rounds: &[usize], labels: &'a mut Vec<String>) -> Vec<&'a str> {
    labels.extend(rounds.iter().map(|r| format!("round_{r}")));
    lead.iter().copied().chain(labels.iter().map(String::as_str)).collect()
}

/// Median m1, m2, m3 by country, ordering and round, with a Mann-Whitney
/// p-value row comparing the two orderings round by round.
pub fn median_measures(ds: &AnalysisDataset) -> Table {
    let rounds = ds.rounds();
    let mut labels = Vec::new();
    let header = round_header(&["country", "measure", "row"], &rounds, &mut labels);
    let mut t = Table::new("table2", &header);
    for country in ds.countries() {
        for m in MEASURES {
            let sample = |o: Ordering, round: usize| -> Vec<f64> {
                rows_for(ds, &country)
                    .filter(|r| r.ordering == o && r.round == round)
                    .map(|r| measure(r, m))
                    .collect()
            };
            for o in ORDERINGS {
                let mut row = vec![country.clone(), m.to_string(), o.label().to_string()];
                row.extend(rounds.iter().map(|&r| {
                    let s = sample(o, r);
                    if s.is_empty() { String::new() } else { fmt_num(median(&s)) }
                }));
                t.rows.push(row);
            }
            let mut row = vec![country.clone(), m.to_string(), "p_value".to_string()];
            row.extend(rounds.iter().map(|&r| p_cell(&sample(Ordering::BorrowingFirst, r), &sample(Ordering::SavingFirst, r))));
            t.rows.push(row);
        }
    }
    t
}

/// Cohen's d, borrowing-treatment rounds minus saving-treatment rounds,
/// within each block of rounds.
pub fn effect_sizes(ds: &AnalysisDataset) -> Table {
    let rounds = ds.rounds();
    let per_block = rounds.len().div_ceil(2).max(1);
    let blocks: Vec<&[usize]> = rounds.chunks(per_block).collect();
    let mut labels: Vec<String> = blocks
        .iter()
        .map(|b| format!("rounds_{}_{}", b[0], b[b.len() - 1]))
        .collect();
    let header: Vec<&str> = ["country", "measure"].into_iter().chain(labels.iter_mut().map(|s| s.as_str())).collect();
    let mut t = Table::new("table3", &header);
    for country in ds.countries() {
        for m in MEASURES {
            let mut row = vec![country.clone(), m.to_string()];
            for block in &blocks {
                let pick = |tr: Treatment| -> Vec<f64> {
                    rows_for(ds, &country)
                        .filter(|r| block.contains(&r.round) && r.treatment == tr)
                        .map(|r| measure(r, m))
                        .collect()
                };
                row.push(match cohens_d(&pick(Treatment::Borrowing), &pick(Treatment::Saving)) {
                    Ok(d) => fmt_num(d),
                    Err(_) => String::new(),
                });
            }
            t.rows.push(row);
        }
    }
    t
}

/// Median learning deltas of m2 with Wilcoxon signed-rank p-values.
pub fn learning(ds: &AnalysisDataset) -> Result<Table, AnalysisError> {
    let rounds = ds.rounds();
    let participants = ds.participants()?;
    let mut labels = Vec::new();
    let header = round_header(&["country", "ordering", "delta", "row"], &rounds, &mut labels);
    let mut t = Table::new("table5", &header);
    for country in ds.countries() {
        for o in ORDERINGS {
            let deltas: Vec<_> = participants
                .iter()
                .filter(|p| p.info.country == country && p.info.ordering == o)
                .map(|p| learning_deltas(&p.m2_by_round))
                .collect();
            if deltas.is_empty() {
                continue;
            }
            for (kind, pick) in [
                ("previous", (|d: &super::LearningDeltas, i: usize| d.consecutive[i]) as fn(&_, usize) -> f64),
                ("first", |d: &super::LearningDeltas, i: usize| d.from_first[i]),
            ] {
                let mut med = vec![country.clone(), o.label().to_string(), kind.to_string(), "median".to_string()];
                let mut pv = vec![country.clone(), o.label().to_string(), kind.to_string(), "p_value".to_string()];
                med.push(String::new());
                pv.push(String::new());
                for i in 0..rounds.len().saturating_sub(1) {
                    let values: Vec<f64> = deltas.iter().map(|d| pick(d, i)).collect();
                    med.push(fmt_num(median(&values)));
                    pv.push(match wilcoxon_signed_rank(&values) {
                        Ok(w) => fmt_num(w.p_two_sided),
                        Err(_) => String::new(),
                    });
                }
                t.rows.push(med);
                t.rows.push(pv);
            }
        }
    }
    Ok(t)
}

/// One regression in a multi-column table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub label: String,
    /// `None` means all countries.
    pub country: Option<String>,
    pub covariates: Vec<String>,
}

fn spec(label: &str, country: Option<&str>, covariates: &[&str]) -> ModelSpec {
    ModelSpec {
        label: label.to_string(),
        country: country.map(str::to_string),
        covariates: covariates.iter().map(|s| s.to_string()).collect(),
    }
}

/// Columns of the m2 determinants table.
pub fn m2_models(ds: &AnalysisDataset, opts: &ReportOptions) -> Vec<ModelSpec> {
    let focal = opts.focal(ds);
    let dummies: Vec<String> = ds.countries().into_iter().filter(|c| *c != focal).map(|c| format!("country={c}")).collect();
    let mut combined = vec!["round"];
    combined.extend(dummies.iter().map(String::as_str));
    let f = Some(focal.as_str());
    vec![
        spec("(1)", None, &combined),
        spec("(2)", f, &["round", "crt_score", "crt_known"]),
        spec("(3)", f, &["round", "female"]),
        spec("(4)", f, &["round", "risk_aversion"]),
        spec("(5)", f, &["round", "crt_score", "female", "risk_aversion", "crt_known"]),
    ]
}

/// Columns of the debt-aversion regression table.
pub fn da_models(ds: &AnalysisDataset, opts: &ReportOptions) -> Vec<ModelSpec> {
    let focal = opts.focal(ds);
    let dummies: Vec<String> = ds.countries().into_iter().filter(|c| *c != focal).map(|c| format!("country={c}")).collect();
    let mut combined = vec!["saving_first"];
    combined.extend(dummies.iter().map(String::as_str));
    let f = Some(focal.as_str());
    vec![
        spec("(1)", None, &combined),
        spec("(2)", f, &["saving_first", "crt_score", "crt_known"]),
        spec("(3)", f, &["saving_first", "female"]),
        spec("(4)", f, &["saving_first", "risk_aversion"]),
        spec("(5)", f, &["saving_first", "crt_score", "female", "risk_aversion", "crt_known"]),
        spec("(6)", f, &["saving_first", "crt_score", "crt_score_sq", "female", "risk_aversion", "crt_known"]),
        spec("(7)", f, &["saving_first", "crt1", "crt2", "crt3", "female", "risk_aversion", "crt_known"]),
    ]
}

const REGRESSION_HEADER: [&str; 10] = [
    "model", "sample", "response", "term", "estimate", "std_error", "p_value", "n_obs", "n_clusters", "adj_r_squared",
];

fn push_regression(t: &mut Table, spec: &ModelSpec, result: Result<RegressionResult, AnalysisError>) {
    let sample = spec.country.clone().unwrap_or_else(|| "all".to_string());
    match result {
        Ok(r) => {
            for (i, name) in r.names.iter().enumerate() {
                t.rows.push(vec![
                    spec.label.clone(),
                    sample.clone(),
                    r.response.clone(),
                    name.clone(),
                    fmt_num(r.coefficients[i]),
                    fmt_num(r.std_errors[i]),
                    fmt_num(r.p_values[i]),
                    r.n_obs.to_string(),
                    r.n_clusters.to_string(),
                    fmt_num(r.adj_r_squared),
                ]);
            }
        }
        Err(e) => {
            let mut row = vec![spec.label.clone(), sample, String::new(), format!("not estimated: {e}")];
            row.resize(REGRESSION_HEADER.len(), String::new());
            t.rows.push(row);
        }
    }
}

/// m2 regressions; `treatment` restricts to one treatment's rounds.
pub fn m2_regressions(ds: &AnalysisDataset, opts: &ReportOptions, treatment: Option<Treatment>) -> Table {
    let name = match treatment {
        None => "table4",
        Some(Treatment::Saving) => "table6",
        Some(Treatment::Borrowing) => "table7",
    };
    let mut t = Table::new(name, &REGRESSION_HEADER);
    let base = match treatment {
        Some(tr) => ds.filter(|r| r.treatment == tr),
        None => ds.clone(),
    };
    for spec in m2_models(ds, opts) {
        let sample = match &spec.country {
            Some(c) => base.filter(|r| &r.country == c),
            None => base.clone(),
        };
        let covs: Vec<&str> = spec.covariates.iter().map(String::as_str).collect();
        push_regression(&mut t, &spec, ols_clustered(&sample, "m2", &covs));
    }
    t
}

/// Debt-aversion index regressions.
pub fn da_regressions(ds: &AnalysisDataset, opts: &ReportOptions) -> Result<Table, AnalysisError> {
    let participants = ds.participants()?;
    let mut t = Table::new("table_da", &REGRESSION_HEADER);
    for spec in da_models(ds, opts) {
        let sample: Vec<ParticipantRow> = participants
            .iter()
            .filter(|p| spec.country.as_ref().is_none_or(|c| &p.info.country == c))
            .cloned()
            .collect();
        let covs: Vec<&str> = spec.covariates.iter().map(String::as_str).collect();
        push_regression(&mut t, &spec, ols_clustered(sample.as_slice(), "da", &covs));
    }
    Ok(t)
}

/// Income streams and optimal consumption without shocks.
pub fn income_and_optimal(params: &ModelParams) -> Result<Table, AnalysisError> {
    let mut t = Table::new("fig1", &["period", "income_borrowing", "income_saving", "optimal_consumption"]);
    let p = params.with_sigma(0.0);
    let mut assets = 0.0;
    let b = p.with_treatment(Treatment::Borrowing);
    let s = p.with_treatment(Treatment::Saving);
    for t_ in 1..=p.horizon {
        let income = b.trend_income(t_);
        let c = optimal_consumption(income + assets, t_, &b)?;
        assets += income - c;
        t.rows.push(vec![t_.to_string(), fmt_num(income), fmt_num(s.trend_income(t_)), fmt_num(c)]);
    }
    Ok(t)
}

/// Mean and median consumption by period, with the mean unconditional
/// optimal consumption on the same incomes.
pub fn consumption_profiles(ds: &AnalysisDataset, params: &ModelParams) -> Result<Table, AnalysisError> {
    let mut t = Table::new(
        "fig2",
        &["country", "ordering", "round", "period", "n", "mean_consumption", "median_consumption", "mean_optimal"],
    );
    type Key = (String, &'static str, usize, usize);
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut by_path: BTreeMap<(&str, &str, usize), Vec<&super::dataset::PeriodRow>> = BTreeMap::new();
    for p in &ds.periods {
        by_path.entry((p.country.as_str(), p.participant_id.as_str(), p.round)).or_default().push(p);
    }
    for rows in by_path.values_mut() {
        rows.sort_by_key(|r| r.period);
        let first = rows[0];
        let tp = params.with_treatment(first.treatment).with_horizon(rows.len());
        let mut assets = 0.0;
        for r in rows.iter() {
            let c_opt = optimal_consumption(r.income + assets, r.period, &tp)?;
            assets += r.income - c_opt;
            let entry = groups
                .entry((r.country.clone(), r.ordering.label(), r.round, r.period))
                .or_default();
            entry.0.push(r.consumption);
            entry.1.push(c_opt);
        }
    }
    for ((country, ordering, round, period), (cons, opt)) in groups {
        let n = cons.len() as f64;
        t.rows.push(vec![
            country,
            ordering.to_string(),
            round.to_string(),
            period.to_string(),
            cons.len().to_string(),
            fmt_num(cons.iter().sum::<f64>() / n),
            fmt_num(median(&cons)),
            fmt_num(opt.iter().sum::<f64>() / n),
        ]);
    }
    Ok(t)
}

/// Median m1, m2, m3 by country, ordering and round in long form.
pub fn median_deviations(ds: &AnalysisDataset) -> Table {
    let mut t = Table::new("fig3", &["country", "ordering", "round", "n", "median_m1", "median_m2", "median_m3"]);
    let mut groups: BTreeMap<(String, &'static str, usize), Vec<&AnalysisRow>> = BTreeMap::new();
    for r in &ds.rows {
        groups.entry((r.country.clone(), r.ordering.label(), r.round)).or_default().push(r);
    }
    for ((country, ordering, round), rows) in groups {
        let mut row = vec![country, ordering.to_string(), round.to_string(), rows.len().to_string()];
        for m in MEASURES {
            let v: Vec<f64> = rows.iter().map(|r| measure(r, m)).collect();
            row.push(fmt_num(median(&v)));
        }
        t.rows.push(row);
    }
    t
}

/// Kernel density of the debt-aversion index per country on a shared grid,
/// plus pairwise Mann-Whitney tests between countries.
pub fn da_density(ds: &AnalysisDataset, grid_points: usize) -> Result<(Table, Table), AnalysisError> {
    let participants = ds.participants()?;
    let mut by_country: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in &participants {
        by_country.entry(p.info.country.as_str()).or_default().push(p.index.da);
    }
    let all: Vec<f64> = by_country.values().flatten().copied().collect();
    let grid = padded_grid(&all, 0.25, grid_points);
    let mut curves = Table::new("fig4", &["country", "x", "density"]);
    for (country, values) in &by_country {
        let bw = super::kde::silverman_bandwidth(values).ok();
        let Some(bw) = bw else { continue };
        for (x, y) in kernel_density(values, &grid, Some(bw))? {
            curves.rows.push(vec![country.to_string(), fmt_num(x), fmt_num(y)]);
        }
    }
    let mut tests = Table::new("fig4_tests", &["country_a", "country_b", "n_a", "n_b", "u", "p_value"]);
    let names: Vec<&&str> = by_country.keys().collect();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let (a, b) = (&by_country[*names[i]], &by_country[*names[j]]);
            let r = mann_whitney_u(a, b)?;
            tests.rows.push(vec![
                names[i].to_string(),
                names[j].to_string(),
                a.len().to_string(),
                b.len().to_string(),
                fmt_num(r.u_a),
                fmt_num(r.p_two_sided),
            ]);
        }
    }
    Ok((curves, tests))
}

/// What to build.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRequest {
    /// 1 to 7; 6 and 7 are the saving- and borrowing-only m2 regressions.
    pub tables: Vec<u8>,
    pub figures: Vec<u8>,
    /// Also emit the debt-aversion regression table.
    pub da_table: bool,
    pub options: ReportOptions,
    pub params: ModelParams,
}

impl Default for ReportRequest {
    fn default() -> Self {
        ReportRequest {
            tables: vec![1, 2, 3, 4, 5],
            figures: vec![2, 3, 4],
            da_table: true,
            options: ReportOptions::default(),
            params: ModelParams::default(),
        }
    }
}

/// Builds the requested tables and figures. Figures also yield a short
/// plot-spec text file.
pub fn build_report(ds: &AnalysisDataset, req: &ReportRequest) -> Result<Vec<(String, String)>, AnalysisError> {
    if ds.is_empty() {
        return Err(AnalysisError::Empty("dataset has no participant-round rows".into()));
    }
    let mut out = Vec::new();
    let mut push = |t: Table| out.push((format!("{}.csv", t.name), t.to_csv()));
    let tables: BTreeSet<u8> = req.tables.iter().copied().collect();
    for n in tables {
        match n {
            1 => push(summary_statistics(ds)?),
            2 => push(median_measures(ds)),
            3 => push(effect_sizes(ds)),
            4 => push(m2_regressions(ds, &req.options, None)),
            5 => push(learning(ds)?),
            6 => push(m2_regressions(ds, &req.options, Some(Treatment::Saving))),
            7 => push(m2_regressions(ds, &req.options, Some(Treatment::Borrowing))),
            other => return Err(AnalysisError::Domain(format!("no table {other}"))),
        }
    }
    if req.da_table {
        push(da_regressions(ds, &req.options)?);
    }
    let figures: BTreeSet<u8> = req.figures.iter().copied().collect();
    let mut specs = String::new();
    for n in figures {
        match n {
            1 => {
                push(income_and_optimal(&req.params)?);
                specs.push_str("fig1: lines x=period y=income_borrowing,income_saving,optimal_consumption\n");
            }
            2 => {
                push(consumption_profiles(ds, &req.params)?);
                specs.push_str("fig2: lines x=period y=mean_consumption,median_consumption,mean_optimal panel=ordering,round color=country\n");
            }
            3 => {
                push(median_deviations(ds));
                specs.push_str("fig3: lines x=round y=median_m1,median_m2,median_m3 panel=measure color=country style=ordering\n");
            }
            4 => {
                let (curves, tests) = da_density(ds, 201)?;
                push(curves);
                push(tests);
                specs.push_str("fig4: lines x=x y=density color=country; note p_value from fig4_tests\n");
            }
            other => return Err(AnalysisError::Domain(format!("no figure {other}"))),
        }
    }
    if !specs.is_empty() {
        out.push(("plots.txt".to_string(), specs));
    }
    Ok(out)
}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_csv())
    }
}

