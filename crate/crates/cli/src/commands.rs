use crate::output::{Cell, Report, Table};
use crate::{BoundArgs, Cli, Command, DepthArgs, GapArgs, LogBaseArg, Method, Suite, TableArgs, TableKind, VerifyArgs};
use momentgap::bounds::{
    bound_report, cg_lower_k2, knabe_general, knabe_subsystem_boost, optimal_size, size_table_coefficients,
    verify_certificate, BoundCertificate, Family, LogBase, ReportOptions,
};
use momentgap::effective::{default_representation, graph_gap, Representation};
use momentgap::golden::{self, ANY_GRAPH, BOOSTED, SIZE_TABLE};
use momentgap::graph::{compress, depth_upper_bound, depth_with_budget, flatten_all, generate, spanning_tree, DepthMode, GraphKind};
use momentgap::permsym::{haar_suite, schur_weyl_rank};
use momentgap::report::all_passed;
use momentgap::spectra::SolverOptions;
use momentgap::verify::{compression_suite, dl_qub_suite, dl_rewrite_suite, oracle_suite};
use momentgap::{Check, Error, Graph, Result};
use serde_json::{json, Value};

pub fn run(cli: &Cli) -> Result<u8> {
    let (report, code) = match &cli.command {
        Command::Gap(a) => (gap(a)?, 0),
        Command::Table(a) => (table(a)?, 0),
        Command::Bounds(a) => (bounds(a)?, 0),
        Command::Depth(a) => (depth(a)?, 0),
        Command::Size(a) => (size(a)?, 0),
        Command::Verify(a) => verify(a)?,
    };
    let stdout = std::io::stdout();
    report
        .emit(cli.out, &mut stdout.lock())
        .map_err(|e| Error::Invalid(format!("cannot write output: {e}")))?;
    Ok(code)
}

fn load(descriptor: &str) -> Result<(GraphKind, Graph)> {
    let kind: GraphKind = descriptor.parse()?;
    let g = generate(&kind)?;
    g.check_connected()?;
    Ok((kind, g))
}

fn representation(method: Method, k: usize) -> Representation {
    match method {
        Method::Full => Representation::Full,
        Method::Effective => default_representation(k),
        Method::Qr => Representation::EffectiveQr,
    }
}

fn log_base(b: LogBaseArg) -> LogBase {
    match b {
        LogBaseArg::E => LogBase::E,
        LogBaseArg::Two => LogBase::Two,
    }
}

fn gap(a: &GapArgs) -> Result<Report> {
    let (kind, g) = load(&a.graph)?;
    let (k, q) = (a.moment.k, a.moment.q);
    let repr = representation(a.method, k);
    let opts = SolverOptions { tol: a.tol, seed: a.seed, max_iter: a.budget, ..Default::default() };
    let r = graph_gap(&g, k, q, repr, &opts)?;
    let params = json!({
        "graph": kind.to_string(), "k": k, "q": q, "method": repr.to_string(),
        "tol": a.tol, "budget": a.budget,
    });
    let result = json!({
        "gap": r.gap, "groundDim": r.ground_dim, "solver": r.method, "residual": r.residual,
        "iterations": r.iterations, "seed": r.seed, "penalty": r.penalty,
        "n": g.n(), "edges": g.edge_count(),
    });
    let table = Table {
        columns: vec!["graph", "k", "q", "representation", "gap", "ground_dim", "solver", "residual", "iterations", "seed"],
        rows: vec![vec![
            kind.to_string().into(),
            k.into(),
            q.into(),
            repr.to_string().into(),
            r.gap.into(),
            r.ground_dim.into(),
            r.method.to_string().into(),
            r.residual.into(),
            r.iterations.into(),
            Cell::Int(r.seed as u128),
        ]],
    };
    Ok(Report { command: "gap".into(), params, seed: Some(a.seed), result, table })
}

fn value_name(v: impl clap::ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn deviation(x: f64, reference: Option<f64>) -> Option<f64> {
    reference.map(|r| (x - r).abs())
}

fn table(a: &TableArgs) -> Result<Report> {
    let (k, q) = (a.moment.k, a.moment.q);
    let opts = SolverOptions { tol: a.tol, seed: a.seed, ..Default::default() };
    let mut params = json!({ "table": value_name(a.which) });
    let mut partial = false;
    let table = match a.which {
        TableKind::StarGaps | TableKind::CgGaps => {
            params["k"] = json!(k);
            params["q"] = json!(q);
            params["n_min"] = json!(a.n_min);
            params["n_max"] = json!(a.n_max);
            params["budget"] = json!(a.budget.to_string());
            let r = if k == 2 { 2u128 } else { schur_weyl_rank(k, q as u64) as u128 };
            let stars = a.which == TableKind::StarGaps;
            let mut rows = Vec::new();
            for n in a.n_min.max(3)..=a.n_max {
                let g = if stars { Graph::star(n)? } else { Graph::complete(n)? };
                let fits = r.checked_pow(n as u32).is_some_and(|d| d <= a.budget);
                let gap = if fits { Some(graph_gap(&g, k, q, default_representation(k), &opts)?.gap) } else { None };
                partial |= !fits;
                let status: Cell = if fits { "ok".into() } else { "skipped-budget".into() };
                if stars {
                    let reference = golden::star_gap(k, q, n);
                    let dev = gap.and_then(|x| deviation(x, reference));
                    rows.push(vec![n.into(), gap.into(), reference.into(), dev.into(), status]);
                } else {
                    let lower = if k == 2 { Some(cg_lower_k2(n, q)?) } else { None };
                    let upper = (n - 1) as f64;
                    let within = gap.map(|x| lower.is_none_or(|l| x >= l - 1e-9) && x <= upper + 1e-9);
                    let within: Cell = within.map_or(Cell::Empty, Cell::from);
                    rows.push(vec![n.into(), gap.into(), lower.into(), upper.into(), within, status]);
                }
            }
            let columns = if stars {
                vec!["n", "gap", "reference", "deviation", "status"]
            } else {
                vec!["n", "gap", "lower", "upper", "within", "status"]
            };
            Table { columns, rows }
        }
        TableKind::AnyG => Table {
            columns: vec!["k", "n_star", "star_gap", "lower", "reference", "deviation"],
            rows: ANY_GRAPH
                .iter()
                .map(|row| {
                    let lower = knabe_general(row.star_gap);
                    vec![row.k.into(), row.n_star.into(), row.star_gap.into(), lower.into(), row.lower.into(), (lower - row.lower).abs().into()]
                })
                .collect(),
        },
        TableKind::Boosted => {
            let mut rows = Vec::new();
            for row in BOOSTED {
                let boosted = knabe_subsystem_boost(Family::Star, row.star_gap, row.m_star, row.n_star)?;
                let lower = knabe_general(boosted);
                rows.push(vec![
                    row.k.into(),
                    row.m_star.into(),
                    row.star_gap.into(),
                    row.n_star.into(),
                    boosted.into(),
                    row.boosted_gap.into(),
                    (boosted - row.boosted_gap).abs().into(),
                    lower.into(),
                    row.lower.into(),
                    (lower - row.lower).abs().into(),
                ]);
            }
            Table {
                columns: vec![
                    "k", "m_star", "star_gap", "n_star", "boosted_gap", "boosted_reference", "boosted_deviation",
                    "lower", "reference", "deviation",
                ],
                rows,
            }
        }
        TableKind::SizeTable => Table {
            columns: vec!["k", "kappa", "gap", "coefficient", "reference", "deviation", "n_coefficient", "n_reference"],
            rows: SIZE_TABLE
                .iter()
                .map(|row| {
                    let (c, nc) = size_table_coefficients(row.k, row.gap);
                    vec![
                        row.k.into(),
                        row.kappa.into(),
                        row.gap.into(),
                        c.into(),
                        row.coefficient.into(),
                        (c - row.coefficient).abs().into(),
                        nc.into(),
                        row.n_coefficient.into(),
                    ]
                })
                .collect(),
        },
    };
    let records: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut m = serde_json::Map::new();
            for (col, cell) in table.columns.iter().zip(row) {
                let v = match cell {
                    Cell::Int(i) => json!(*i as u64),
                    Cell::Num(x) => json!(x),
                    Cell::Text(s) => json!(s),
                    Cell::Empty => Value::Null,
                };
                m.insert(col.to_string(), v);
            }
            Value::Object(m)
        })
        .collect();
    let result = json!({ "partial": partial, "rows": records });
    Ok(Report { command: "table".into(), params, seed: Some(a.seed), result, table })
}

fn certificate(a: &BoundArgs) -> Result<(GraphKind, Graph, BoundCertificate, Value)> {
    let (kind, g) = load(&a.graph)?;
    let depth_mode = if a.exact {
        Some(DepthMode::Exact)
    } else if a.heuristic {
        Some(DepthMode::Heuristic)
    } else {
        None
    };
    let opts = ReportOptions {
        budget: a.budget,
        epsilon: a.eps,
        log_base: log_base(a.log_base),
        depth_mode,
        solver: SolverOptions { tol: a.tol, seed: a.seed, ..Default::default() },
    };
    let cert = bound_report(&g, &kind.to_string(), a.moment.k, a.moment.q, &opts)?;
    let params = json!({
        "graph": kind.to_string(), "k": a.moment.k, "q": a.moment.q, "eps": a.eps,
        "log_base": opts.log_base, "budget": a.budget.to_string(),
        "depth": depth_mode.map_or("auto".to_string(), |m| format!("{m:?}").to_lowercase()),
        "tol": a.tol,
    });
    Ok((kind, g, cert, params))
}

fn checks_json(checks: &[Check]) -> Value {
    json!({ "all_passed": all_passed(checks), "checks": checks })
}

fn bounds(a: &BoundArgs) -> Result<Report> {
    let (_, _, cert, params) = certificate(a)?;
    let checks = verify_certificate(&cert);
    let result = json!({ "certificate": cert, "verification": checks_json(&checks) });
    let rows = cert
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let deps = s.depends.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
            let inputs = s.inputs.iter().map(|(k, v)| format!("{k}={}", crate::output::num(*v))).collect::<Vec<_>>().join(";");
            let id = serde_json::to_value(s.id).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            vec![i.into(), id.into(), s.output.into(), deps.into(), inputs.into(), s.anchor.clone().into()]
        })
        .collect();
    let table = Table { columns: vec!["step", "id", "output", "depends", "inputs", "anchor"], rows };
    Ok(Report { command: "bounds".into(), params, seed: Some(a.seed), result, table })
}

fn size(a: &BoundArgs) -> Result<Report> {
    let (_, g, cert, params) = certificate(a)?;
    let sb = cert
        .size
        .clone()
        .ok_or_else(|| Error::Vacuous(format!("no positive certified gap for {}", cert.target.graph)))?;
    let optimal = optimal_size(g.n(), a.moment.k, a.moment.q, a.eps, log_base(a.log_base))?;
    let result = json!({
        "tau": sb.tau, "gap": sb.gap, "edges": sb.edge_count, "n": sb.n, "optimal": optimal,
        "size": sb, "lower": cert.lower, "upper": cert.upper, "flags": cert.flags,
    });
    let table = Table {
        columns: vec!["graph", "n", "edges", "gap", "epsilon", "log_base", "tau", "optimal"],
        rows: vec![vec![
            cert.target.graph.clone().into(),
            sb.n.into(),
            sb.edge_count.into(),
            sb.gap.into(),
            sb.epsilon.into(),
            params["log_base"].as_str().unwrap_or_default().into(),
            sb.tau.into(),
            optimal.into(),
        ]],
    };
    Ok(Report { command: "size".into(), params, seed: Some(a.seed), result, table })
}

fn depth(a: &DepthArgs) -> Result<Report> {
    let (kind, g) = load(&a.graph)?;
    let root = match a.root.as_str() {
        "center" => g.center(),
        s => s.parse::<usize>().map_err(|_| Error::Parse(format!("root must be `center` or a vertex id, got {s:?}")))?,
    };
    if root >= g.n() {
        return Err(Error::Invalid(format!("root {root} is not a vertex of a {}-vertex graph", g.n())));
    }
    let mode = if a.exact { DepthMode::Exact } else { DepthMode::Heuristic };
    let tree = spanning_tree(&g, root)?;
    let da = depth_with_budget(&tree, mode, a.budget)?;
    let ct = compress(&tree, &da)?;
    let trace = flatten_all(&ct)?;
    let params = json!({ "graph": kind.to_string(), "root": root, "mode": mode, "budget": a.budget });
    let result = json!({
        "root": root,
        "depth": da.depth,
        "mode": mode,
        "labels": da.labels,
        "choice_trace": da.choice_trace,
        "paths": da.paths,
        "tree_height": tree.height(),
        "compressed_height": ct.height(),
        "flatten_steps": trace.steps.len(),
        "effective_flatten_steps": trace.effective,
        "log_bound": depth_upper_bound(g.n()),
    });
    let rows = da
        .labels
        .iter()
        .enumerate()
        .map(|(v, &l)| vec![v.into(), tree.parent(v).map_or(Cell::Empty, Cell::from), l.into()])
        .collect();
    let table = Table { columns: vec!["vertex", "parent", "label"], rows };
    Ok(Report { command: "depth".into(), params, seed: None, result, table })
}

fn verify(a: &VerifyArgs) -> Result<(Report, u8)> {
    let mut params = json!({ "suite": value_name(a.suite) });
    let mut seed = None;
    let checks = match a.suite {
        Suite::Haar => {
            let mut checks = Vec::new();
            for (k, q) in [(1, 2), (2, 2), (3, 2), (4, 2), (1, 3), (2, 3)] {
                checks.extend(haar_suite(k, q)?);
            }
            checks
        }
        Suite::Dl => {
            params["orderings"] = json!(a.orderings);
            seed = Some(a.seed);
            dl_qub_suite(a.orderings, a.seed)?
        }
        Suite::Compression => compression_suite(4)?,
        Suite::Rewrite => dl_rewrite_suite(2)?,
        Suite::Oracle => {
            let mut checks = oracle_suite(3, 2, 2, 1e-8)?;
            checks.extend(oracle_suite(4, 2, 2, 1e-8)?);
            checks.extend(oracle_suite(3, 3, 2, 1e-7)?);
            checks
        }
    };
    let code = if all_passed(&checks) { 0 } else { 1 };
    let rows = checks
        .iter()
        .map(|c| vec![c.name.clone().into(), c.deviation.into(), c.tolerance.into(), c.passed.into()])
        .collect();
    let table = Table { columns: vec!["check", "deviation", "tolerance", "passed"], rows };
    Ok((Report { command: "verify".into(), params, seed, result: checks_json(&checks), table }, code))
}
