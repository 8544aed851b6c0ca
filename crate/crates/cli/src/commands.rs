use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{Datelike, NaiveDate, Weekday};
use log::info;
use serde::Serialize;

use hedgegraph::allocate::{ewp, omv1_no_short, omv1_short, omv2_closed_form, omv2_no_short, with_jitter, Method};
use hedgegraph::backtest::{run_grid, EpsilonRule, PipelineConfig};
use hedgegraph::estimators::{sample_corr, sample_cov, Thresholds};
use hedgegraph::hedge_select::{hedge_scores, select_top_k, select_unconstrained};
use hedgegraph::market_data::{
    compute_returns, ingest_per_ticker_dir, ingest_wide_csv, slice, synth_panel, write_wide_csv, CorrelationRecipe,
    ReturnKind, ReturnPanel, SynthSpec, WindowSpec,
};
use hedgegraph::signed_graph::{from_matrix, summarize, write_edge_csv};

use crate::args::*;
use crate::manifest::{digest_input, RunManifest};

pub fn run(cli: &Cli) -> Result<()> {
    let config = serde_json::to_value(&cli.command)?;
    match &cli.command {
        Command::Ingest(a) => ingest(a, config),
        Command::Synth(a) => synth(a, config),
        Command::Hedge(a) => hedge(a, config),
        Command::Select(a) => select(a, config),
        Command::Allocate(a) => allocate(a, config),
        Command::Backtest(a) => backtest(a, config),
        Command::Graph(a) => graph(a, config),
    }
}

/// Collects outputs for one run and finishes with the manifest.
struct Sink {
    dir: PathBuf,
    manifest: RunManifest,
}

/// JSON outputs carry the run id of the manifest they belong to.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    run_id: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl Sink {
    fn new(dir: &Path, config: serde_json::Value, inputs: &[&Path]) -> Result<Sink> {
        let mut digests = Vec::new();
        for p in inputs {
            digests.extend(digest_input(p)?);
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Sink { dir: dir.to_path_buf(), manifest: RunManifest::new(config, digests) })
    }

    fn write_bytes(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.write_bytes(self.dir.join(name), bytes)
    }

    fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let stamped = Stamped { run_id: &self.manifest.run_id, body };
        let mut text = serde_json::to_string_pretty(&stamped)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn finish(self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn return_kind(r: Returns) -> ReturnKind {
    match r {
        Returns::Linear => ReturnKind::Linear,
        Returns::Log => ReturnKind::Log,
    }
}

fn load_returns(input: &PanelInput) -> Result<ReturnPanel> {
    let ingested = ingest_wide_csv(&input.panel)?;
    if ingested.dropped_rows > 0 {
        log::warn!("{}: dropped {} unusable rows", input.panel.display(), ingested.dropped_rows);
    }
    Ok(compute_returns(&ingested.panel, return_kind(input.returns), 1)?)
}

fn windowed(panel: &ReturnPanel, window: Option<&str>) -> Result<(ReturnPanel, WindowSpec)> {
    let spec = match window {
        Some(w) => WindowSpec::parse(w)?,
        None => WindowSpec::covering(panel).context("panel has no rows")?,
    };
    Ok((slice(panel, &spec)?, spec))
}

fn epsilon_rule(o: &Objective) -> Result<EpsilonRule> {
    Ok(match (o.epsilon_rule, o.epsilon) {
        (EpsilonRuleArg::MaxMean, None) => EpsilonRule::MaxMean,
        (EpsilonRuleArg::Q75Mean, None) => EpsilonRule::Q75Mean,
        (EpsilonRuleArg::Value, Some(v)) => EpsilonRule::Explicit(v),
        (EpsilonRuleArg::Value, None) => bail!("--epsilon-rule value needs --epsilon"),
        (_, Some(_)) => bail!("--epsilon is only used with --epsilon-rule value"),
    })
}

fn ingest(a: &IngestArgs, config: serde_json::Value) -> Result<()> {
    let ingested = match a.layout {
        Layout::Wide => ingest_wide_csv(&a.input)?,
        Layout::PerTicker => ingest_per_ticker_dir(&a.input, &a.price_column)?,
    };
    let mut sink = Sink::new(&a.output.out_dir, config, &[&a.input])?;
    let mut csv = Vec::new();
    write_wide_csv(&ingested.panel, &mut csv)?;
    let target = a.out.clone().unwrap_or_else(|| a.output.out_dir.join("panel.csv"));
    sink.write_bytes(target, &csv)?;
    println!(
        "rows kept: {}, rows dropped: {}, assets: {}",
        ingested.panel.n_rows(),
        ingested.dropped_rows,
        ingested.panel.n_assets()
    );
    sink.finish()
}

fn previous_weekday(d: NaiveDate) -> NaiveDate {
    let mut d = d.pred_opt().expect("date in range");
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d = d.pred_opt().expect("date in range");
    }
    d
}

fn synth(a: &SynthArgs, config: serde_json::Value) -> Result<()> {
    let start = NaiveDate::parse_from_str(&a.start, "%Y-%m-%d").with_context(|| format!("bad --start {:?}", a.start))?;
    let recipe = if a.blocks.is_empty() {
        CorrelationRecipe::Equicorrelated { rho: a.rho }
    } else {
        CorrelationRecipe::Block { sizes: a.blocks.clone(), within: a.within, between: a.between }
    };
    let spec = SynthSpec { recipe, daily_drift: a.drift, daily_vol: a.vol, start };
    let returns = synth_panel(a.seed, a.assets, a.days, &spec)?;
    let base_date = previous_weekday(returns.dates()[0]);
    let prices = returns.reconstruct_prices(base_date, &vec![100.0; returns.n_assets()])?;
    let mut sink = Sink::new(&a.output.out_dir, config, &[])?;
    let mut csv = Vec::new();
    write_wide_csv(&prices, &mut csv)?;
    sink.bytes("panel.csv", &csv)?;
    sink.finish()
}

fn hedge(a: &HedgeArgs, config: serde_json::Value) -> Result<()> {
    let panel = load_returns(&a.input)?;
    let (window, spec) = windowed(&panel, a.window.as_deref())?;
    let mut report = hedge_scores(&window)?;
    report.window = spec;
    let mut sink = Sink::new(&a.output.out_dir, config, &[&a.input.panel])?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    sink.bytes("hedge.csv", &csv)?;
    sink.json("hedge.json", &report)?;
    info!("scored {} assets over {} rows", report.len(), window.n_rows());
    sink.finish()
}

fn select(a: &SelectArgs, config: serde_json::Value) -> Result<()> {
    let panel = load_returns(&a.input)?;
    let (window, _) = windowed(&panel, a.window.as_deref())?;
    let report = hedge_scores(&window)?;
    let selection = match a.k {
        Some(k) => select_top_k(&report, k)?,
        None => select_unconstrained(&report),
    };
    let mut sink = Sink::new(&a.output.out_dir, config, &[&a.input.panel])?;
    sink.json("selection.json", &selection)?;
    println!("{}", selection.chosen.join(","));
    sink.finish()
}

fn allocate(a: &AllocateArgs, config: serde_json::Value) -> Result<()> {
    let panel = load_returns(&a.input)?;
    let (window, _) = windowed(&panel, a.window.as_deref())?;
    let rule = epsilon_rule(&a.objective)?;
    let universe = match a.k {
        Some(k) => select_top_k(&hedge_scores(&window)?, k)?.chosen,
        None => window.tickers().to_vec(),
    };
    let result = match a.method {
        MethodArg::Ewp => ewp(&universe)?,
        method => {
            let mut est = sample_cov(&window.select(&universe)?)?;
            if a.objective.jitter {
                est = with_jitter(&est)?;
            }
            let means: Vec<f64> = est.mean().iter().copied().collect();
            match (method, a.objective.gamma) {
                (MethodArg::Mp, Some(g)) => omv2_closed_form(&est, g)?,
                (MethodArg::Mp, None) => omv1_short(&est, rule.target(&means)?)?,
                (_, Some(g)) => omv2_no_short(&est, g)?,
                (_, None) => omv1_no_short(&est, Some(rule.target(&means)?))?,
            }
        }
    };
    let mut sink = Sink::new(&a.output.out_dir, config, &[&a.input.panel])?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    sink.bytes("allocation.csv", &csv)?;
    sink.json("allocation.json", &result)?;
    sink.finish()
}

fn parse_years(raw: &[String]) -> Result<Vec<WindowSpec>> {
    let bad = |s: &str| anyhow::anyhow!("bad year {s:?}");
    let mut years = Vec::new();
    for item in raw {
        if let Some((a, b)) = item.split_once(':') {
            let (a, b): (i32, i32) = (a.parse().map_err(|_| bad(a))?, b.parse().map_err(|_| bad(b))?);
            if a > b {
                bail!("empty year range {item}");
            }
            years.extend(a..=b);
        } else {
            years.push(item.parse().map_err(|_| bad(item))?);
        }
    }
    Ok(years.into_iter().map(WindowSpec::year).collect::<hedgegraph::Result<_>>()?)
}

fn parse_method(s: &str) -> Result<(bool, Method)> {
    let lower = s.to_ascii_lowercase();
    let (pm, rest) = match lower.strip_prefix("pm+") {
        Some(rest) => (true, rest),
        None => (false, lower.as_str()),
    };
    let method = match rest {
        "mp" => Method::MP,
        "mpns" => Method::MPNS,
        "ewp" => Method::EWP,
        _ => bail!("unknown method {s:?}; expected one of pm+mp, pm+mpns, pm+ewp, mp, mpns, ewp"),
    };
    Ok((pm, method))
}

fn backtest(a: &BacktestArgs, config: serde_json::Value) -> Result<()> {
    let years = parse_years(&a.years)?;
    let rule = epsilon_rule(&a.objective)?;
    let mut cfgs = Vec::new();
    for m in &a.methods {
        let (pm, method) = parse_method(m)?;
        let ks: Vec<Option<usize>> = if pm {
            if a.k.is_empty() {
                bail!("{m} needs --k");
            }
            a.k.iter().map(|&k| Some(k)).collect()
        } else {
            vec![None]
        };
        for k in ks {
            let mut cfg = PipelineConfig::new(k, method);
            cfg.gamma = a.objective.gamma;
            cfg.epsilon_rule = rule;
            cfg.return_kind = return_kind(a.input.returns);
            cfg.jitter = a.objective.jitter;
            cfgs.push(cfg);
        }
    }
    let panel = load_returns(&PanelInput { panel: a.input.panel.clone(), returns: Returns::Linear })?;
    let report = run_grid(&panel, &years, &cfgs)?;
    let mut sink = Sink::new(&a.output.out_dir, config, &[&a.input.panel])?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    sink.bytes("backtest.csv", &csv)?;
    sink.json("backtest.json", &report)?;
    print!("{}", String::from_utf8_lossy(&csv));
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        log::warn!("{} {} k={:?}: {}", row.test, row.method, row.k, row.error_message.as_deref().unwrap_or(""));
    }
    sink.finish()
}

fn graph(a: &GraphArgs, config: serde_json::Value) -> Result<()> {
    let panel = load_returns(&a.input)?;
    let (window, _) = windowed(&panel, a.window.as_deref())?;
    let taus = match (a.tau_plus, a.tau_minus) {
        (Some(p), Some(m)) => Some(Thresholds::new(p, m)?),
        _ => None,
    };
    let cov = sample_cov(&window)?;
    // thresholds are correlation levels, so they imply --corr
    let est = if a.corr || taus.is_some() { sample_corr(&cov)? } else { cov };
    let g = from_matrix(&est, taus)?.with_labels(window.tickers().to_vec())?;
    let summary = summarize(&g);
    let mut sink = Sink::new(&a.output.out_dir, config, &[&a.input.panel])?;
    let mut csv = Vec::new();
    write_edge_csv(&g, &mut csv)?;
    sink.bytes("edges.csv", &csv)?;
    sink.json("graph.json", &summary)?;
    println!(
        "edges: {} ({} negative), triangles T0..T3: {} {} {} {}, balanced: {}",
        g.edges().len(),
        summary.negative_edges,
        summary.census.t0,
        summary.census.t1,
        summary.census.t2,
        summary.census.t3,
        summary.balanced
    );
    sink.finish()
}
