//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod oracles;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use hedgegraph::allocate::{omv1_no_short, omv2_closed_form, omv2_no_short, Method};
use hedgegraph::backtest::{metrics_from_daily, run_pipeline, PipelineConfig};
use hedgegraph::estimators::CovEstimate;
use hedgegraph::hedge_select::{hedge_scores, hedge_scores_with_workers, select_top_k, HedgeReport};
use hedgegraph::market_data::{
    business_days, compute_returns, ingest_per_ticker_dir, ingest_wide_csv, ReturnKind, ReturnPanel, WindowSpec,
};
use hedgegraph::signed_graph::portfolio_variance;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn verdict(failures: Vec<String>, summary: String) -> Verdict {
    if failures.is_empty() {
        Verdict::Pass(summary)
    } else {
        Verdict::Fail(format!("{summary}; {} failure(s), first: {}", failures.len(), failures[0]))
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    match v {
        Verdict::Pass(s) if took > limit => Verdict::Fail(format!("{s}; took {took:.2?}, limit {limit:?}")),
        Verdict::Pass(s) => Verdict::Pass(format!("{s}; {took:.2?}")),
        other => other,
    }
}

fn variance_bound() -> Verdict {
    timed(Duration::from_secs(5), || {
        let mut rng = oracles::rng(101);
        let mut failures = Vec::new();
        let mut strict_checked = 0;
        for case in 0..1000 {
            let n = rng.random_range(2..=20);
            let m = loop {
                let m = oracles::random_cov(&mut rng, n, 0.0);
                if (0..n).any(|i| (0..n).any(|j| m[(i, j)] < 0.0)) {
                    break m;
                }
            };
            let est = CovEstimate::from_parts(&vec![0.0; n], m.clone()).unwrap();
            let w = oracles::random_simplex(&mut rng, n);
            let plain = portfolio_variance(&est, &w).unwrap();
            let abs = portfolio_variance(&est.abs(), &w).unwrap();
            if abs - plain < -1e-12 {
                failures.push(format!("case {case}: slack {}", abs - plain));
            }
            let neg_with_weight = (0..n).any(|i| (0..n).any(|j| m[(i, j)] < 0.0 && w[i] > 0.0 && w[j] > 0.0));
            if neg_with_weight {
                strict_checked += 1;
                if plain >= abs {
                    failures.push(format!("case {case}: not strict ({plain} vs {abs})"));
                }
            }
        }
        verdict(failures, format!("1000 matrices, {strict_checked} strict"))
    })
}

fn triangle_ordering() -> Verdict {
    let w = [1.0 / 3.0; 3];
    let mut failures = Vec::new();
    let mut got = Vec::new();
    for (negatives, expected) in [(3, 0.0), (2, 2.0 / 9.0), (1, 4.0 / 9.0), (0, 6.0 / 9.0)] {
        let mut m = DMatrix::identity(3, 3);
        for (e, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            let v = if e < negatives { -0.5 } else { 0.5 };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        let est = CovEstimate::from_parts(&[0.0; 3], m).unwrap();
        let v = portfolio_variance(&est, &w).unwrap();
        got.push(format!("T{negatives}={v:.6}"));
        if (v - expected).abs() > 1e-12 {
            failures.push(format!("T{negatives}: {v} vs {expected}"));
        }
    }
    verdict(failures, got.join(" "))
}

fn selection_oracle() -> Verdict {
    timed(Duration::from_secs(10), || {
        let mut rng = oracles::rng(103);
        let mut failures = Vec::new();
        let mut cases = 0;
        for r in 0..200 {
            let n = rng.random_range(1..=12);
            let tickers: Vec<String> = (0..n).map(|j| format!("T{j:02}")).collect();
            let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let means: Vec<f64> = (0..n).map(|_| rng.random_range(-0.01..0.01)).collect();
            let report = HedgeReport::from_scores(tickers.clone(), scores, means).unwrap();
            let products = report.products();
            for k in 1..=n {
                cases += 1;
                let sel = select_top_k(&report, k).unwrap();
                let (best, members) = oracles::brute_force_best_subset(&products, Some(k));
                let expected: Vec<String> = members.iter().map(|&i| tickers[i].clone()).collect();
                if sel.chosen != expected || (sel.objective - best).abs() > 1e-15 {
                    failures.push(format!("report {r}, k={k}: {:?} vs {:?}", sel.chosen, expected));
                }
            }
        }
        verdict(failures, format!("{cases} (report, k) cases"))
    })
}

fn closed_form() -> Verdict {
    let mut rng = oracles::rng(104);
    let mut failures = Vec::new();
    let (mut worst_res, mut worst_sum) = (0.0f64, 0.0f64);
    for case in 0..500 {
        let n = rng.random_range(2..=20);
        let m = oracles::random_cov(&mut rng, n, 0.1);
        let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let gamma = rng.random_range(0.1..10.0);
        let est = CovEstimate::from_parts(&mu, m.clone()).unwrap();
        match omv2_closed_form(&est, gamma) {
            Ok(res) => {
                let w = DVector::from_vec(res.weights);
                let nu = res.diagnostics.nu.unwrap_or(f64::NAN);
                let residual = (&m * &w * (2.0 * gamma) - DVector::from_vec(mu) - DVector::from_element(n, nu)).amax();
                let sum = (w.sum() - 1.0).abs();
                worst_res = worst_res.max(residual);
                worst_sum = worst_sum.max(sum);
                if !(residual <= 1e-8 && sum <= 1e-9) {
                    failures.push(format!("case {case}: residual {residual:e}, budget {sum:e}"));
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    let est = CovEstimate::from_parts(&[0.1, 0.1], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
    let w = omv2_closed_form(&est, 1.0).unwrap().weights;
    if (w[0] - 2.0 / 3.0).abs() > 1e-6 || (w[1] - 1.0 / 3.0).abs() > 1e-6 {
        failures.push(format!("worked example gave {w:?}"));
    }
    verdict(failures, format!("max residual {worst_res:.1e}, max budget error {worst_sum:.1e}, example {w:.6?}"))
}

fn simplex_vs_grid() -> Verdict {
    let mut rng = oracles::rng(105);
    let mut failures = Vec::new();
    let (mut worst_gap, mut worst_kkt) = (f64::NEG_INFINITY, 0.0f64);
    let mut note = |label: String, got: f64, grid: f64, kkt: f64, failures: &mut Vec<String>| {
        worst_gap = worst_gap.max(got - grid);
        worst_kkt = worst_kkt.max(kkt);
        if got - grid > 1e-5 || kkt > 1e-8 {
            failures.push(format!("{label}: gap {:e}, kkt {kkt:e}", got - grid));
        }
    };
    for case in 0..24 {
        let n = 2 + case % 2;
        let m = oracles::random_cov(&mut rng, n, 0.01);
        let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let est = CovEstimate::from_parts(&mu, m.clone()).unwrap();
        let var = |w: &[f64]| oracles::quad(&m, w);

        let gamma = rng.random_range(0.2..5.0);
        let risk = |w: &[f64]| gamma * oracles::quad(&m, w) - mu.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let res = omv2_no_short(&est, gamma).unwrap();
        let (grid, _) = oracles::simplex_grid_min(n, 1e-3, risk);
        note(format!("case {case} risk-aversion"), risk(&res.weights), grid, res.diagnostics.max_kkt_violation, &mut failures);

        let res = omv1_no_short(&est, None).unwrap();
        let (grid, _) = oracles::simplex_grid_min(n, 1e-3, var);
        note(format!("case {case} min-variance"), var(&res.weights), grid, res.diagnostics.max_kkt_violation, &mut failures);

        let (lo, hi) = mu.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let eps = lo + rng.random::<f64>() * (hi - lo);
        let res = omv1_no_short(&est, Some(eps)).unwrap();
        let (grid, _) = oracles::target_grid_min(&mu, eps, 1e-3, var);
        note(format!("case {case} target"), var(&res.weights), grid, res.diagnostics.max_kkt_violation, &mut failures);
    }
    verdict(failures, format!("72 solves, worst gap {worst_gap:.1e}, worst KKT {worst_kkt:.1e}"))
}

fn panel(cols: &[&[f64]]) -> ReturnPanel {
    let t = cols[0].len();
    let dates = business_days(NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), t);
    let tickers = (0..cols.len()).map(|j| ((b'A' + j as u8) as char).to_string()).collect();
    ReturnPanel::new(dates, tickers, DMatrix::from_fn(t, cols.len(), |i, j| cols[j][i]), ReturnKind::Log).unwrap()
}

fn hedge_exactness() -> Verdict {
    let mut failures = Vec::new();
    let h = hedge_scores(&panel(&[&[1.0, -1.0], &[-1.0, 1.0], &[2.0, -2.0]])).unwrap().scores;
    if h != [0.5, 1.0, 0.5] {
        failures.push(format!("worked example gave {h:?}"));
    }
    let col = [0.01, -0.02, 0.005, 0.03];
    let same = hedge_scores(&panel(&[&col, &col, &col, &col])).unwrap().scores;
    if same.iter().any(|s| *s != 0.0) {
        failures.push(format!("identical columns gave {same:?}"));
    }
    let mut rng = oracles::rng(106);
    let t = 500;
    let values = DMatrix::from_fn(t, 30, |_, _| rng.random_range(-0.03..0.03));
    let big = ReturnPanel::new(
        business_days(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), t),
        (0..30).map(|j| format!("X{j:02}")).collect(),
        values,
        ReturnKind::Log,
    )
    .unwrap();
    let base = hedge_scores_with_workers(&big, 1).unwrap().scores;
    for workers in [2, 8] {
        let other = hedge_scores_with_workers(&big, workers).unwrap().scores;
        if other.iter().zip(&base).any(|(a, b)| a.to_bits() != b.to_bits()) {
            failures.push(format!("{workers} workers differ from 1"));
        }
    }
    verdict(failures, format!("example {h:?}, identical columns zero, 1/2/8 workers bit-identical"))
}

fn metric_formulas() -> Verdict {
    let mut failures = Vec::new();
    let m = metrics_from_daily(&[0.001; 252]);
    let expected = 100.0 * (1.001f64.powi(252) - 1.0);
    if ((m.total_return_pct - expected) / expected).abs() > 1e-6 {
        failures.push(format!("constant return total {} vs {expected}", m.total_return_pct));
    }

    let mut rng = oracles::rng(107);
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let dates: Vec<NaiveDate> = business_days(start, 540).into_iter().filter(|d| *d < NaiveDate::from_ymd_opt(2022, 1, 1).unwrap()).collect();
    let t = dates.len();
    let log_returns = DMatrix::from_fn(t, 1, |_, _| rng.random_range(-0.03..0.03));
    let single = ReturnPanel::new(dates.clone(), vec!["ONLY".into()], log_returns.clone(), ReturnKind::Log).unwrap();
    let test = WindowSpec::year(2021).unwrap();
    let mut cfg = PipelineConfig::new(None, Method::EWP);
    cfg.return_kind = ReturnKind::Log;
    let out = run_pipeline(&single, &WindowSpec::year(2020).unwrap(), &test, &cfg).unwrap();
    let held: f64 = dates.iter().zip(log_returns.iter()).filter(|(d, _)| test.contains(**d)).map(|(_, r)| r).sum();
    let compounded = 100.0 * held.exp_m1();
    if (out.metrics.total_return_pct - compounded).abs() > 1e-9 * compounded.abs().max(1.0) {
        failures.push(format!("single asset total {} vs {compounded}", out.metrics.total_return_pct));
    }
    verdict(failures, format!("constant total {:.6}, single-asset total {:.6}", m.total_return_pct, out.metrics.total_return_pct))
}

fn market_reproduction() -> Verdict {
    let Some(path) = std::env::var_os("HG_MARKET_CHAMPIONS") else {
        return Verdict::Skip("set HG_MARKET_CHAMPIONS to the price data (wide CSV or per-ticker directory) to run".into());
    };
    let path = Path::new(&path);
    let column = std::env::var("HG_PRICE_COLUMN").unwrap_or_else(|_| "Close".into());
    let ingested = if path.is_dir() { ingest_per_ticker_dir(path, &column) } else { ingest_wide_csv(path) };
    let prices = match ingested {
        Ok(i) => i.panel,
        Err(e) => return Verdict::Fail(format!("cannot load {}: {e}", path.display())),
    };
    let returns = match compute_returns(&prices, ReturnKind::Linear, 1) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let (train, test) = (WindowSpec::year(2020).unwrap(), WindowSpec::year(2021).unwrap());
    let mut failures = Vec::new();
    let mut shown = Vec::new();
    for (k, expected, tol) in [(None, [29.0, 26.55, 13.91, 1.91], 1.0), (Some(5), [35.81, 34.31, 26.72, 1.28], 2.0)] {
        let cfg = PipelineConfig::new(k, Method::EWP);
        match run_pipeline(&returns, &train, &test, &cfg) {
            Ok(out) => {
                let m = out.metrics;
                let got = [m.total_return_pct, m.annual_return_pct, m.annual_vol_pct, m.sharpe];
                shown.push(format!("{}: {got:.2?}", cfg.label()));
                if got.iter().zip(expected).any(|(g, e)| (g - e).abs() > tol) {
                    failures.push(format!("{} {got:.2?} vs {expected:?} (±{tol})", cfg.label()));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", cfg.label())),
        }
    }
    verdict(failures, shown.join(", "))
}

fn backtest_determinism() -> Verdict {
    let tmp = match tempfile::TempDir::new() {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let exe = env!("CARGO_BIN_EXE_hedgegraph");
    let dir = tmp.path().to_str().unwrap().to_string();
    let synth = Command::new(exe)
        .args(["synth", "--seed", "11", "--assets", "10", "--days", "1100", "--rho", "0.15", "--out-dir", &dir])
        .status();
    if !matches!(synth, Ok(s) if s.success()) {
        return Verdict::Fail("synthetic panel generation failed".into());
    }
    let panel = format!("{dir}/panel.csv");
    let run = |out: &str| -> Option<Vec<u8>> {
        let status = Command::new(exe)
            .args(["backtest", "--panel", &panel, "--years", "2020:2024", "--k", "3", "5"])
            .args(["--methods", "pm+mp,pm+mpns,pm+ewp,mp,mpns,ewp", "--out-dir", out])
            .output()
            .ok()?;
        status.status.success().then(|| std::fs::read(format!("{out}/backtest.csv")).ok()).flatten()
    };
    match (run(&format!("{dir}/a")), run(&format!("{dir}/b"))) {
        (Some(a), Some(b)) if a == b => Verdict::Pass(format!("{} bytes identical across runs", a.len())),
        (Some(_), Some(_)) => Verdict::Fail("backtest.csv differs between runs".into()),
        _ => Verdict::Fail("backtest command failed".into()),
    }
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 9] = [
        ("negative-entry variance bound", variance_bound),
        ("triangle risk ordering", triangle_ordering),
        ("top-k selection vs exhaustive search", selection_oracle),
        ("closed-form risk-aversion weights", closed_form),
        ("simplex QP vs grid search", simplex_vs_grid),
        ("hedge score exactness", hedge_exactness),
        ("metric formulas", metric_formulas),
        ("market data reproduction", market_reproduction),
        ("backtest determinism", backtest_determinism),
    ];
    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for (i, (name, check)) in checks.iter().enumerate() {
        let line = match check() {
            Verdict::Pass(d) => {
                passed += 1;
                format!("PASS {}. {name}: {d}", i + 1)
            }
            Verdict::Skip(d) => {
                skipped += 1;
                format!("SKIP {}. {name}: {d}", i + 1)
            }
            Verdict::Fail(d) => {
                failed += 1;
                format!("FAIL {}. {name}: {d}", i + 1)
            }
        };
        println!("{line}");
    }
    println!("{passed} passed, {failed} failed, {skipped} skipped");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
