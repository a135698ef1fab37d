use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use navnet_core::cluster::{
    assign, cluster_diagram, cluster_report, em_fit_restarts, hard_assignments, select_k, AlphabetKind, EmConfig,
    KScore, MarkovMixtureModel, SequenceSet,
};
use navnet_core::ctmc::{fit_enabling_sets, simulate, FitConfig, FitReport, FitStatus, SojournTarget};
use navnet_core::fixture;
use navnet_core::gspn::{parse_model, parse_params};
use navnet_core::logs::{
    estimate_rates, mining_stats, parse_log, read_sessions, sessionize, write_sessions, DropReport, FieldMapping,
    LogFormat, LogSource, PageTable, PlaceMapping, SessionSequence, TimeColumns,
};
use navnet_core::reach::{eliminate_vanishing, reachability_dot, tangible_dot, EdgeLabel};
use navnet_core::report::reproduce;
use navnet_core::{build_reachability_graph, tangible_graph, transient_measures, GspnModel, ParameterSet, Sojourn};
use serde::Serialize;

use crate::output::{json, Cell, Table};
use crate::{
    Alphabet, Cli, ClusterArgs, Command, FitArgs, Format, LogKind, LogOptions, Measure, MineArgs, ModelArgs,
    ReachArgs, ReportArgs, SimulateArgs, SolveArgs, StatsArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let text = match &cli.command {
        Command::Solve(a) => solve(a, cli.format)?,
        Command::Reach(a) => reach(a, cli.format)?,
        Command::Simulate(a) => simulate_cmd(a, cli.format, cli.seed)?,
        Command::Mine(a) => mine(a, cli.format)?,
        Command::Stats(a) => stats(a, cli.format)?,
        Command::Cluster(a) => {
            // the CLI stays single-threaded outside simulate
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
            pool.install(|| cluster(a, cli.format, cli.seed))?
        }
        Command::FitTopology(a) => fit_topology(a, cli.format)?,
        Command::Report(a) => report(a, cli.format)?,
    };
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_params(path: &Path) -> Result<ParameterSet> {
    parse_params(&read(path)?).with_context(|| format!("in parameter file {}", path.display()))
}

fn load_model_file(path: &Path) -> Result<GspnModel> {
    let model = parse_model(&read(path)?).with_context(|| format!("in model file {}", path.display()))?;
    model
        .ensure_valid()
        .with_context(|| format!("in model file {}", path.display()))?;
    Ok(model)
}

fn load_model(a: &ModelArgs) -> Result<(GspnModel, ParameterSet)> {
    let model = match (&a.model, a.fixture) {
        (Some(path), _) => load_model_file(path)?,
        (None, Some(_)) => fixture::model(),
        (None, None) => bail!("give --model or --fixture"),
    };
    let params = match (&a.params, a.fixture) {
        (Some(path), _) => load_params(path)?,
        (None, Some(_)) => fixture::params(usize::from(a.cluster))?,
        (None, None) => ParameterSet::new(),
    };
    Ok((model, params))
}

fn render(table: &Table, format: Format) -> Result<String> {
    match format {
        Format::Csv => table.to_csv(),
        _ => Ok(table.to_text()),
    }
}

fn solve(a: &SolveArgs, format: Format) -> Result<String> {
    let (model, params) = load_model(&a.model)?;
    let graph = tangible_graph(&model, &params)?;
    let m = transient_measures(&graph)?;
    if format == Format::Json {
        return json(&m);
    }
    let mut header = vec!["marking"];
    for c in &a.measures {
        header.push(match c {
            Measure::Sojourn => "sojourn_s",
            Measure::Occupancy => "occupancy_s",
            Measure::Visits => "visits",
            Measure::Cumulative => "cumulative_s",
        });
    }
    let opt = |v: Option<f64>, d: usize| v.map_or(Cell::Missing, |x| Cell::Num(x, d));
    let mut t = Table::new(&header);
    for r in &m.rows {
        let mut row = vec![Cell::text(&r.marking)];
        for c in &a.measures {
            row.push(match c {
                Measure::Sojourn => match r.sojourn_s {
                    Sojourn::Finite(x) => Cell::Num(x, 4),
                    Sojourn::Unbounded => Cell::text("inf"),
                },
                Measure::Occupancy => opt(r.occupancy_s, 4),
                Measure::Visits => opt(r.visits, 6),
                Measure::Cumulative => opt(r.cumulative_s, 4),
            });
        }
        t.push(row);
    }
    let absorption: f64 = m.rows.iter().filter_map(|r| r.occupancy_s).fold(0.0, |a, b| a + b);
    let mut total = vec![Cell::text("total")];
    for c in &a.measures {
        total.push(match c {
            Measure::Occupancy => Cell::Num(absorption, 4),
            Measure::Cumulative => Cell::Num(m.session_duration, 4),
            _ => Cell::Missing,
        });
    }
    t.push(total);
    let mut out = render(&t, format)?;
    if format == Format::Text {
        let _ = writeln!(out, "\nsession duration: {:.4} s", m.session_duration);
    }
    Ok(out)
}

fn edge_cells(label: &EdgeLabel) -> (Cell, Cell) {
    match *label {
        EdgeLabel::Rate(r) => (Cell::text("rate"), Cell::Num(r, 6)),
        EdgeLabel::Probability(p) => (Cell::text("probability"), Cell::Num(p, 6)),
    }
}

fn reach(a: &ReachArgs, format: Format) -> Result<String> {
    let (model, params) = load_model(&a.model)?;
    let full = build_reachability_graph(&model, &params)?;
    if a.tangible {
        let g = eliminate_vanishing(&full)?;
        if a.dot {
            return Ok(tangible_dot(&g, &model.name));
        }
        if format == Format::Json {
            return json(&g);
        }
        let mut t = Table::new(&["source", "target", "transition", "kind", "value"]);
        for e in &g.edges {
            t.push(vec![
                Cell::text(g.label(e.source)),
                Cell::text(g.label(e.target)),
                Cell::text(&e.transition),
                Cell::text("rate"),
                Cell::Num(e.rate, 6),
            ]);
        }
        return states_and_edges(g.states.iter().map(|s| (s.marking.label(), s.kind)), &t, format);
    }
    if a.dot {
        return Ok(reachability_dot(&full, &model.name));
    }
    if format == Format::Json {
        return json(&full);
    }
    let mut t = Table::new(&["source", "target", "transition", "kind", "value"]);
    for e in &full.edges {
        let (kind, value) = edge_cells(&e.label);
        t.push(vec![
            Cell::text(full.states[e.source].marking.label()),
            Cell::text(full.states[e.target].marking.label()),
            Cell::text(&e.transition),
            kind,
            value,
        ]);
    }
    states_and_edges(full.states.iter().map(|s| (s.marking.label(), s.kind)), &t, format)
}

fn states_and_edges(
    states: impl Iterator<Item = (String, navnet_core::StateKind)>,
    edges: &Table,
    format: Format,
) -> Result<String> {
    if format == Format::Csv {
        return edges.to_csv();
    }
    let mut s = Table::new(&["state", "marking", "kind"]);
    for (i, (label, kind)) in states.enumerate() {
        s.push(vec![Cell::Int(i as u64), Cell::text(label), Cell::text(format!("{kind:?}").to_lowercase())]);
    }
    Ok(format!("{}\n{}", s.to_text(), edges.to_text()))
}

fn simulate_cmd(a: &SimulateArgs, format: Format, seed: u64) -> Result<String> {
    let (model, params) = load_model(&a.model)?;
    let graph = tangible_graph(&model, &params)?;
    let sim = simulate(&graph, &graph.initial, a.runs, seed)?;
    let analytic = transient_measures(&graph)?;
    if format == Format::Json {
        #[derive(Serialize)]
        struct Out<'a> {
            simulation: &'a navnet_core::ctmc::SimulationReport,
            analytic: &'a navnet_core::TransientMeasures,
        }
        return json(&Out {
            simulation: &sim,
            analytic: &analytic,
        });
    }
    let mut t = Table::new(&[
        "marking",
        "visits",
        "visits_sim",
        "visits_se",
        "occupancy_s",
        "occupancy_sim",
        "occupancy_se",
    ]);
    for (s, r) in sim.states.iter().zip(&analytic.rows) {
        let (Some(n), Some(x)) = (r.visits, r.occupancy_s) else {
            continue;
        };
        t.push(vec![
            Cell::text(&s.marking),
            Cell::Num(n, 6),
            Cell::Num(s.visits, 6),
            Cell::Num(s.visits_se, 6),
            Cell::Num(x, 4),
            Cell::Num(s.occupancy_s, 4),
            Cell::Num(s.occupancy_se, 4),
        ]);
    }
    let mut out = render(&t, format)?;
    if format == Format::Text {
        let exact: f64 = analytic.rows.iter().filter_map(|r| r.occupancy_s).sum();
        let _ = writeln!(
            out,
            "\nruns {} seed {}: absorption time {:.4} s (se {:.4}), analytic {:.4} s",
            sim.runs, sim.seed, sim.absorption_time_s, sim.absorption_time_se, exact
        );
    }
    Ok(out)
}

fn log_source(o: &LogOptions) -> Result<LogSource> {
    let timestamp = if o.time_field.is_empty() {
        TimeColumns::Combined(o.date_field.clone())
    } else {
        TimeColumns::Split {
            date: o.date_field.clone(),
            time: o.time_field.clone(),
        }
    };
    let mapping = FieldMapping {
        user: o.user_field.clone(),
        timestamp,
        uri: o.uri_field.clone(),
    };
    let format = match o.log_format {
        LogKind::W3c => LogFormat::W3c,
        LogKind::Csv => {
            if !o.delimiter.is_ascii() {
                bail!("delimiter must be a single ASCII character");
            }
            LogFormat::Csv {
                delimiter: o.delimiter as u8,
            }
        }
    };
    Ok(LogSource {
        format,
        mapping,
        columns: o.columns.clone(),
    })
}

fn page_table(o: &LogOptions) -> Result<PageTable> {
    match &o.pages {
        Some(p) => PageTable::parse_tsv(&read(p)?).with_context(|| format!("in page table {}", p.display())),
        None => Ok(fixture::pages()),
    }
}

fn mine_log(path: &Path, o: &LogOptions) -> Result<(Vec<SessionSequence>, DropReport, PageTable)> {
    let source = log_source(o)?;
    let file = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let parsed = parse_log(std::io::BufReader::new(file), &source)
        .with_context(|| format!("in log {}", path.display()))?;
    let pages = page_table(o)?;
    let sessions = sessionize(&parsed.records, &pages, i64::from(o.gap_minutes) * 60);
    Ok((sessions, parsed.drops, pages))
}

fn mine(a: &MineArgs, format: Format) -> Result<String> {
    let (sessions, drops, pages) = mine_log(&a.log, &a.options)?;
    eprintln!(
        "kept {} of {} records ({} incomplete, {} bad timestamps, {} inconsistent); {} sessions",
        drops.kept,
        drops.total,
        drops.incomplete,
        drops.bad_timestamp,
        drops.inconsistent,
        sessions.len()
    );
    if a.rates {
        let model = match &a.model {
            Some(p) => load_model_file(p)?,
            None => fixture::model(),
        };
        let mapping = PlaceMapping::from_pages(&pages, a.end_place.clone());
        let est = estimate_rates(&sessions, &mapping, &model)?;
        if format == Format::Json {
            return json(&est);
        }
        let mut t = Table::new(&["symbol", "rate", "firings", "exposure_s"]);
        for (sym, rate) in est.params.iter() {
            t.push(vec![
                Cell::text(sym),
                Cell::Num(rate, 10),
                Cell::Int(est.firings[sym]),
                Cell::Num(est.exposure_s[sym], 3),
            ]);
        }
        let mut out = render(&t, format)?;
        if format == Format::Text && est.unmatched_moves > 0 {
            let _ = writeln!(out, "\n{} moves matched no enabled transition", est.unmatched_moves);
        }
        return Ok(out);
    }
    match format {
        Format::Csv => {
            let mut t = Table::new(&["user_id", "session", "step", "timestamp", "page", "category"]);
            for (i, s) in sessions.iter().enumerate() {
                for (j, e) in s.events.iter().enumerate() {
                    t.push(vec![
                        Cell::text(&s.user_id),
                        Cell::Int(i as u64),
                        Cell::Int(j as u64),
                        Cell::text(e.timestamp.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)),
                        Cell::text(&e.page),
                        Cell::text(e.category.to_string()),
                    ]);
                }
            }
            t.to_csv()
        }
        _ => {
            let mut buf = Vec::new();
            write_sessions(&sessions, &mut buf)?;
            Ok(String::from_utf8(buf)?)
        }
    }
}

fn stats(a: &StatsArgs, format: Format) -> Result<String> {
    let st = match (&a.input.log, &a.input.sessions) {
        (Some(log), _) => {
            let (sessions, drops, _) = mine_log(log, &a.options)?;
            mining_stats(&sessions, Some(&drops))
        }
        (None, Some(path)) => {
            let sessions =
                read_sessions(read(path)?.as_bytes()).with_context(|| format!("in session file {}", path.display()))?;
            mining_stats(&sessions, None)
        }
        (None, None) => bail!("give --log or --sessions"),
    };
    if format == Format::Json {
        return json(&st);
    }
    let mut t = Table::new(&["metric", "value"]);
    let mut num = |k: &str, v: Cell| t.push(vec![Cell::text(k), v]);
    num("total_records", Cell::Int(st.total_records as u64));
    num("kept_records", Cell::Int(st.kept_records as u64));
    for (k, v) in &st.dropped {
        num(&format!("dropped_{k}"), Cell::Int(*v as u64));
    }
    num("unique_users", Cell::Int(st.unique_users as u64));
    num("unique_visits", Cell::Int(st.unique_visits as u64));
    for (name, s) in [("visits_per_user", st.visits_per_user), ("views_per_visit", st.views_per_visit)] {
        num(&format!("{name}_mean"), Cell::Num(s.mean, 4));
        num(&format!("{name}_sd"), Cell::Num(s.sd, 4));
        num(&format!("{name}_min"), Cell::Num(s.min, 0));
        num(&format!("{name}_max"), Cell::Num(s.max, 0));
    }
    if let Some(g) = st.inter_visit_gap_s {
        num("inter_visit_gap_mean_s", Cell::Num(g.mean, 3));
        num("inter_visit_gap_min_s", Cell::Num(g.min, 3));
        num("inter_visit_gap_max_s", Cell::Num(g.max, 3));
    }
    render(&t, format)
}

fn cluster(a: &ClusterArgs, format: Format, seed: u64) -> Result<String> {
    let data = match (&a.input.sessions, &a.input.sequences) {
        (Some(p), _) => {
            let sessions =
                read_sessions(read(p)?.as_bytes()).with_context(|| format!("in session file {}", p.display()))?;
            let kind = match a.alphabet {
                Alphabet::Page => AlphabetKind::Page,
                Alphabet::Category => AlphabetKind::Category,
            };
            SequenceSet::from_sessions(&sessions, kind)?
        }
        (None, Some(p)) => {
            let text = read(p)?;
            let seqs: Vec<Vec<&str>> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.split_whitespace().collect())
                .collect();
            SequenceSet::from_labels(&seqs)?
        }
        (None, None) => bail!("give --sessions or --sequences"),
    };
    let base = EmConfig {
        tol: a.tol,
        max_iter: a.max_iter,
        restarts: a.restarts,
        ..EmConfig::new(1, seed)
    };
    let (model, scores): (MarkovMixtureModel, Vec<KScore>) = if a.k == "auto" {
        let sel = select_k(&data, a.k_max, &base)?;
        (sel.model, sel.scores)
    } else {
        let k: usize = a
            .k
            .parse()
            .map_err(|_| anyhow!("--k must be `auto` or a positive integer, got {:?}", a.k))?;
        (em_fit_restarts(&data, &EmConfig { k, ..base })?, Vec::new())
    };
    if let Some(c) = a.diagram {
        if c == 0 {
            bail!("clusters are numbered from 1");
        }
        return Ok(cluster_diagram(&model, c - 1, a.min_prob)?);
    }
    let rep = cluster_report(&model, &data, a.top, a.min_prob)?;
    let labels = hard_assignments(&model, &data);
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                chosen_k: usize,
                scores: &'a [KScore],
                model: &'a MarkovMixtureModel,
                report: &'a navnet_core::cluster::ClusterReport,
                assignments: Vec<usize>,
            }
            json(&Out {
                chosen_k: model.components.len(),
                scores: &scores,
                model: &model,
                report: &rep,
                assignments: labels.iter().map(|k| k + 1).collect(),
            })
        }
        Format::Csv => {
            let k = model.components.len();
            let names: Vec<String> = (1..=k).map(|i| format!("p{i}")).collect();
            let mut header = vec!["sequence", "cluster"];
            header.extend(names.iter().map(String::as_str));
            let mut t = Table::new(&header);
            for (i, seq) in data.sequences.iter().enumerate() {
                let labels_i: Vec<&str> = seq.iter().map(|&s| data.alphabet[s].as_str()).collect();
                let mut row = vec![Cell::Int(i as u64), Cell::Int(labels[i] as u64 + 1)];
                row.extend(assign(&model, &labels_i).into_iter().map(|p| Cell::Num(p, 6)));
                t.push(row);
            }
            t.to_csv()
        }
        Format::Text => {
            let mut out = String::new();
            if !scores.is_empty() {
                let mut t = Table::new(&["k", "log_likelihood", "parameters", "bic"]);
                for s in &scores {
                    t.push(vec![
                        Cell::Int(s.k as u64),
                        Cell::Num(s.log_likelihood, 3),
                        Cell::Int(s.parameters as u64),
                        Cell::Num(s.bic, 3),
                    ]);
                }
                out.push_str(&t.to_text());
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "{} clusters over {} sequences, log-likelihood {:.3}, {} iterations{}\n",
                model.components.len(),
                data.len(),
                model.log_likelihood,
                model.meta.iterations,
                if model.meta.converged { "" } else { " (not converged)" }
            );
            out.push_str(&rep.to_text());
            Ok(out)
        }
    }
}

fn fit_topology(a: &FitArgs, format: Format) -> Result<String> {
    let fit = match &a.targets {
        None => navnet_core::report::fixture_topology_fit()?,
        Some(path) => {
            let catalogs = a.params.iter().map(|p| load_params(p)).collect::<Result<Vec<_>>>()?;
            let targets = read_targets(path, catalogs.len())?;
            let in_degree = match &a.caps {
                Some(p) => read_caps(p)?,
                None => BTreeMap::new(),
            };
            let config = FitConfig {
                required: a.require.clone(),
                in_degree,
                ceiling: a.ceiling,
                ..FitConfig::default()
            };
            fit_enabling_sets(&targets, &catalogs, &config)?
        }
    };
    fit_output(&fit, format)
}

fn read_targets(path: &Path, catalogs: usize) -> Result<Vec<SojournTarget>> {
    let text = read(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.with_context(|| format!("in targets {}", path.display()))?;
        if row.len() != catalogs + 1 {
            bail!(
                "{} row {}: expected a marking and {catalogs} targets, got {} fields",
                path.display(),
                i + 2,
                row.len()
            );
        }
        let seconds = row
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{} row {}: bad number", path.display(), i + 2))?;
        out.push(SojournTarget {
            marking: row[0].trim().to_string(),
            seconds,
        });
    }
    Ok(out)
}

fn read_caps(path: &Path) -> Result<BTreeMap<String, usize>> {
    let text = read(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut caps = BTreeMap::new();
    for row in rdr.records() {
        let row = row.with_context(|| format!("in caps {}", path.display()))?;
        let (Some(sym), Some(cap)) = (row.get(0), row.get(1)) else {
            bail!("{}: expected symbol,cap rows", path.display());
        };
        let cap: usize = cap
            .trim()
            .parse()
            .with_context(|| format!("{}: bad cap for {sym}", path.display()))?;
        caps.insert(sym.trim().to_string(), cap);
    }
    Ok(caps)
}

fn braces(symbols: &[String]) -> String {
    format!("{{{}}}", symbols.join(","))
}

fn fit_output(fit: &FitReport, format: Format) -> Result<String> {
    if format == Format::Json {
        return json(fit);
    }
    let mut t = Table::new(&["marking", "status", "enabling_set", "residual", "best_uncapped", "best_residual", "alternatives"]);
    for m in &fit.markings {
        t.push(vec![
            Cell::text(&m.marking),
            Cell::text(match m.status {
                FitStatus::Fitted => "fitted",
                FitStatus::Irreconcilable => "irreconcilable",
            }),
            Cell::text(braces(&m.chosen.symbols)),
            Cell::Num(m.chosen.residual, 6),
            Cell::text(braces(&m.best.symbols)),
            Cell::Num(m.best.residual, 6),
            Cell::Int(m.alternatives.len() as u64),
        ]);
    }
    let mut out = render(&t, format)?;
    if format == Format::Text {
        let _ = writeln!(out, "\nsymbol use (shortfall against cap)");
        for (sym, used) in &fit.symbol_use {
            match fit.shortfall.get(sym) {
                Some(s) => {
                    let _ = writeln!(out, "  {sym}: {used} ({s} short)");
                }
                None => {
                    let _ = writeln!(out, "  {sym}: {used}");
                }
            }
        }
        let _ = writeln!(out, "caps respected: {}", fit.caps_respected);
    }
    Ok(out)
}

fn report(a: &ReportArgs, format: Format) -> Result<String> {
    let crate::FixtureName::Kupikniga = a.fixture;
    let clusters: Vec<usize> = match a.cluster {
        Some(c) => vec![usize::from(c)],
        None => vec![1, 2],
    };
    let r = reproduce(&clusters)?;
    match format {
        Format::Text => Ok(r.to_text()),
        Format::Json => json(&r),
        Format::Csv => {
            let mut t = Table::new(&["quantity", "cluster", "marking", "published", "computed", "rel_err"]);
            for c in &r.clusters {
                let sets = [("sojourn_s", &c.sojourn), ("visits", &c.visits), ("cumulative_s", &c.cumulative)];
                for (name, rows) in sets {
                    for x in rows {
                        t.push(vec![
                            Cell::text(name),
                            Cell::Int(c.cluster as u64),
                            Cell::text(&x.marking),
                            Cell::Num(x.published, 6),
                            Cell::Num(x.computed, 6),
                            Cell::Num(x.rel_err, 6),
                        ]);
                    }
                }
                t.push(vec![
                    Cell::text("session_s"),
                    Cell::Int(c.cluster as u64),
                    Cell::Missing,
                    Cell::Num(c.session.published, 6),
                    Cell::Num(c.session.computed, 6),
                    Cell::Num(c.session.rel_err, 6),
                ]);
                for (name, rows) in [("published_n_st_vs_cumulative", &c.cumulative_identity), ("published_n_st_vs_occupancy", &c.occupancy_identity)] {
                    for x in rows {
                        t.push(vec![
                            Cell::text(name),
                            Cell::Int(c.cluster as u64),
                            Cell::text(&x.marking),
                            Cell::Num(x.published_s, 6),
                            Cell::Num(x.product_s, 6),
                            Cell::Num(x.rel_err, 6),
                        ]);
                    }
                }
            }
            t.to_csv()
        }
    }
}
