//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use momentgap::bounds::{
    bound_report, cg3_basis_diagonalization, dl_chain_lower, knabe_general, knabe_subsystem_boost, size_table_coefficients,
    verify_certificate, DlMode, Family, ReportOptions,
};
use momentgap::effective::{graph_gap, Representation};
use momentgap::golden::{self, ANY_GRAPH, BOOSTED, SIZE_TABLE};
use momentgap::graph::{compress, depth, depth_upper_bound, flatten_all, random_tree, spanning_tree, DepthMode};
use momentgap::permsym::haar_suite;
use momentgap::semiclassical::{ground_theta, sc_asymptotic_gap, sc_eigenvalues};
use momentgap::spectra::SolverOptions;
use momentgap::verify::{all_connected_graphs, compression_suite, dl_qub_suite, dl_rewrite_suite, oracle_suite};
use momentgap::{Check, Graph, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

struct Outcome {
    passed: bool,
    detail: String,
}

fn summarize(checks: &[Check]) -> Outcome {
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let worst = checks
        .iter()
        .filter(|c| c.tolerance > 0.0)
        .map(|c| c.deviation)
        .fold(0.0f64, f64::max);
    if failed.is_empty() {
        Outcome { passed: true, detail: format!("{} checks, worst deviation {worst:.2e}", checks.len()) }
    } else {
        let names: Vec<String> = failed.iter().take(3).map(|c| format!("{} ({:.3e})", c.name, c.deviation)).collect();
        Outcome { passed: false, detail: format!("{}/{} failed: {}", failed.len(), checks.len(), names.join("; ")) }
    }
}

fn opts() -> SolverOptions {
    SolverOptions { tol: 1e-10, ..Default::default() }
}

fn timed_gap(g: &Graph, k: usize, q: usize, repr: Representation) -> Result<(f64, Duration)> {
    let t = Instant::now();
    let r = graph_gap(g, k, q, repr, &opts())?;
    Ok((r.gap, t.elapsed()))
}

fn criterion_1() -> Result<Outcome> {
    let mut checks = Vec::new();
    let mut slowest = Duration::ZERO;
    for (q, table) in [(2, 0.6), (3, 0.7), (4, 0.7647)] {
        let (gap, t) = timed_gap(&Graph::star(3)?, 2, q, Representation::EffectiveK2)?;
        slowest = slowest.max(t);
        let qf = q as f64;
        checks.push(Check::new(format!("star3 q={q} closed form"), (gap - (1.0 - qf / (qf * qf + 1.0))).abs(), 1e-9));
        checks.push(Check::new(format!("star3 q={q} table"), (gap - table).abs(), 5e-5));
    }
    let (gap, t) = timed_gap(&Graph::star(4)?, 2, 2, Representation::EffectiveK2)?;
    slowest = slowest.max(t);
    checks.push(Check::new("star4 q=2", (gap - (1.5 - 89f64.sqrt() / 10.0)).abs(), 1e-9));
    let (gap, t) = timed_gap(&Graph::complete(3)?, 2, 2, Representation::EffectiveK2)?;
    slowest = slowest.max(t);
    checks.push(Check::new("complete3 q=2", (gap - 1.2).abs(), 1e-9));
    let (gap, t) = timed_gap(&Graph::complete(3)?, 2, 2, Representation::Full)?;
    slowest = slowest.max(t);
    checks.push(Check::new("complete3 q=2 full space", (gap - 1.2).abs(), 1e-9));
    for q in 2..=4 {
        let d = cg3_basis_diagonalization(q)?;
        let qf = q as f64;
        checks.push(Check::condition(format!("cg3 q={q} characteristic polynomial"), d.exact_match));
        checks.push(Check::new(format!("cg3 q={q} largest"), (d.eigenvalues[0] - (qf + 1.0).powi(2) / (qf * qf + 1.0)).abs(), 1e-12));
    }
    checks.push(Check::condition(format!("each gap under 1 s (slowest {slowest:?})"), slowest < Duration::from_secs(1)));
    Ok(summarize(&checks))
}

fn star_series(k: usize, q: usize, range: std::ops::RangeInclusive<usize>, repr: Representation) -> Result<Vec<(usize, f64)>> {
    range.map(|n| Ok((n, graph_gap(&Graph::star(n)?, k, q, repr, &opts())?.gap))).collect()
}

fn criterion_2(q3_series: &mut Vec<(usize, f64)>) -> Result<Outcome> {
    let t = Instant::now();
    let mut checks = Vec::new();
    for q in [2, 3, 4] {
        let series = star_series(2, q, 3..=14, Representation::EffectiveK2)?;
        for &(n, gap) in &series {
            let want = golden::star_gap(2, q, n).expect("tabulated");
            checks.push(Check::new(format!("k=2 q={q} n*={n}"), (gap - want).abs(), 5e-4));
        }
        if q == 3 {
            *q3_series = series;
        }
    }
    let elapsed = t.elapsed();
    checks.push(Check::condition(format!("runtime {elapsed:?} within 10 min"), elapsed < Duration::from_secs(600)));
    let mut o = summarize(&checks);
    o.detail = format!("{} in {elapsed:.1?}", o.detail);
    Ok(o)
}

fn criterion_3() -> Result<Outcome> {
    let mut checks = Vec::new();
    for (n, gap) in star_series(3, 2, 3..=6, Representation::EffectiveQr)? {
        let want = golden::star_gap(3, 2, n).expect("tabulated");
        checks.push(Check::new(format!("k=3 q=2 n*={n}"), (gap - want).abs(), 5e-4));
    }
    Ok(summarize(&checks))
}

fn criterion_4() -> Result<Outcome> {
    let mut checks = oracle_suite(3, 2, 2, 1e-8)?;
    checks.extend(oracle_suite(4, 2, 2, 1e-8)?);
    checks.extend(oracle_suite(3, 3, 2, 1e-7)?);
    Ok(summarize(&checks))
}

fn criterion_5() -> Result<Outcome> {
    let mut checks = Vec::new();
    for (k, q) in [(1, 2), (2, 2), (3, 2), (4, 2), (1, 3), (2, 3)] {
        checks.extend(haar_suite(k, q)?);
    }
    Ok(summarize(&checks))
}

fn criterion_6() -> Result<Outcome> {
    let mut checks = compression_suite(4)?;
    checks.extend(dl_rewrite_suite(2)?);
    Ok(summarize(&checks))
}

fn criterion_7() -> Result<Outcome> {
    Ok(summarize(&dl_qub_suite(50, 0xD1)?))
}

fn criterion_8() -> Result<Outcome> {
    let mut checks = Vec::new();
    let y = Graph::y(5, 5, 5)?;
    let da = depth(&spanning_tree(&y, y.center())?, DepthMode::Exact)?;
    checks.push(Check::condition(format!("depth(y(5,5,5)) = 3, got {}", da.depth), da.depth == 3));
    let mut rng = ChaCha8Rng::seed_from_u64(0x7EE5);
    for i in 0..200 {
        let n = 2 + i % 15;
        let g = random_tree(n, &mut rng)?;
        let t = spanning_tree(&g, g.center())?;
        let da = depth(&t, DepthMode::Exact)?;
        let ct = compress(&t, &da)?;
        let trace = flatten_all(&ct)?;
        checks.push(Check::condition(format!("tree {i}: flatten steps = CST height"), trace.steps.len() == ct.height()));
        let bound = depth_upper_bound(n);
        checks.push(Check::new(format!("tree {i}: depth within bound"), da.depth as f64 - bound, 0.0));
    }
    Ok(summarize(&checks))
}

fn criterion_9() -> Result<Outcome> {
    let mut checks = Vec::new();
    for row in ANY_GRAPH {
        checks.push(Check::new(format!("any-graph k={}", row.k), (knabe_general(row.star_gap) - row.lower).abs(), 5e-4));
    }
    for row in BOOSTED {
        let boosted = knabe_subsystem_boost(Family::Star, row.star_gap, row.m_star, row.n_star)?;
        checks.push(Check::new(format!("boosted gap k={}", row.k), (boosted - row.boosted_gap).abs(), 5e-4));
        checks.push(Check::new(format!("boosted lower k={}", row.k), (knabe_general(row.boosted_gap) - row.lower).abs(), 5e-4));
    }
    for (row, (lo, hi)) in SIZE_TABLE.iter().zip([(87.7, 90.0), (62.5, 64.0), (8.58, 9.0)]) {
        let (c, nc) = size_table_coefficients(row.k, row.gap);
        let rounded = (c * 100.0).round() / 100.0;
        let inside = rounded >= lo - 0.05 && rounded <= hi;
        checks.push(Check::condition(format!("size coefficient k={} ({c:.3}) in [{lo}, {hi}]", row.k), inside));
        checks.push(Check::condition(format!("size n-coefficient k={}", row.k), nc == row.n_coefficient));
    }
    Ok(summarize(&checks))
}

fn criterion_10() -> Result<Outcome> {
    let mut checks = Vec::new();
    let ropts = ReportOptions::default();
    let mut graphs: Vec<(String, Graph)> = Vec::new();
    for n in [3, 4] {
        for (i, g) in all_connected_graphs(n)?.into_iter().enumerate() {
            graphs.push((format!("n={n} #{i}"), g));
        }
    }
    for n in 3..=10 {
        graphs.push((format!("complete:{n}"), Graph::complete(n)?));
    }
    for n in [5, 6, 8] {
        graphs.push((format!("star:{n}"), Graph::star(n)?));
        graphs.push((format!("path:{n}"), Graph::path(n)?));
    }
    graphs.push(("grid:3x3".into(), Graph::grid(3, 3)?));
    graphs.push(("y:2,2,2".into(), Graph::y(2, 2, 2)?));
    for (name, g) in &graphs {
        let gap = graph_gap(g, 2, 2, Representation::EffectiveK2, &opts())?.gap;
        let cert = bound_report(g, name, 2, 2, &ropts)?;
        let lower = cert.lower.unwrap_or(0.0);
        checks.push(Check::new(format!("{name}: lower {lower:.4} <= gap {gap:.4}"), lower - gap, 1e-9));
        checks.push(Check::new(format!("{name}: gap {gap:.4} <= upper {}", cert.upper), gap - cert.upper, 1e-9));
        if g.is_complete() {
            let n = g.n() as f64;
            checks.push(Check::new(format!("{name}: gap >= (n-2)/5"), (n - 2.0) / 5.0 - gap, 1e-9));
            checks.push(Check::new(format!("{name}: gap <= n-1"), gap - (n - 1.0), 1e-9));
        }
    }
    Ok(summarize(&checks))
}

fn criterion_11() -> Result<Outcome> {
    let mut checks = Vec::new();
    let mut ok = true;
    for n in [4usize, 8, 16, 32, 64, 128] {
        let dmax = depth_upper_bound(n).floor() as usize;
        for g in 2..n {
            for d in 0..=dmax {
                for mode in [DlMode::ClosedForm, DlMode::BetaRecursion] {
                    let v = dl_chain_lower(g, d, 0.5, mode)?;
                    ok &= v > 0.0;
                    ok &= dl_chain_lower(g, d, 0.6, mode)? >= v;
                    if g + 1 < n {
                        ok &= dl_chain_lower(g + 1, d, 0.5, mode)? <= v;
                    }
                    if d < dmax {
                        ok &= dl_chain_lower(g, d + 1, 0.5, mode)? < v;
                    }
                }
            }
        }
    }
    checks.push(Check::condition("DL chain positive and monotone for g <= n-1, d <= depth bound", ok));
    let ropts = ReportOptions::default();
    for (name, g) in [
        ("grid:3x3", Graph::grid(3, 3)?),
        ("complete:6", Graph::complete(6)?),
        ("path:8", Graph::path(8)?),
        ("y:5,5,5", Graph::y(5, 5, 5)?),
        ("grid:4x4", Graph::grid(4, 4)?),
        ("star:30", Graph::star(30)?),
    ] {
        let cert = bound_report(&g, name, 2, 2, &ropts)?;
        checks.extend(verify_certificate(&cert));
    }
    Ok(summarize(&checks))
}

fn criterion_12(q3_series: &[(usize, f64)]) -> Result<Outcome> {
    let mut checks = Vec::new();
    checks.push(Check::condition("asymptotic gap q=2 is 0.75", sc_asymptotic_gap(2)? == 0.75));
    for q in 2..=5 {
        let lo = sc_eigenvalues(ground_theta(q), 0.0, q)?.eigenvalues.0;
        checks.push(Check::new(format!("ground manifold q={q}"), lo.abs(), 1e-12));
    }
    let limit = sc_asymptotic_gap(3)?;
    for &(n, gap) in q3_series {
        checks.push(Check::new(format!("q=3 n={n} below 8/9"), gap - limit, 0.0));
    }
    checks.push(Check::condition("q=3 series covers n = 3..=14", q3_series.len() == 12));
    Ok(summarize(&checks))
}

fn main() {
    // Skip when invoked by `cargo test` with a name filter aimed at other targets.
    if std::env::args().skip(1).any(|a| a == "--list") {
        return;
    }
    let mut q3 = Vec::new();
    let mut all = true;
    let mut report = |id: usize, r: Result<Outcome>, t: Duration| {
        let (passed, detail) = match r {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= passed;
        println!("criterion {id:>2}: {} [{t:.1?}] {detail}", if passed { "PASS" } else { "FAIL" });
    };
    macro_rules! run {
        ($id:expr, $e:expr) => {{
            let t = Instant::now();
            let r = $e;
            report($id, r, t.elapsed());
        }};
    }
    run!(1, criterion_1());
    run!(2, criterion_2(&mut q3));
    run!(3, criterion_3());
    run!(4, criterion_4());
    run!(5, criterion_5());
    run!(6, criterion_6());
    run!(7, criterion_7());
    run!(8, criterion_8());
    run!(9, criterion_9());
    run!(10, criterion_10());
    run!(11, criterion_11());
    run!(12, criterion_12(&q3));
    if !all {
        std::process::exit(1);
    }
}
