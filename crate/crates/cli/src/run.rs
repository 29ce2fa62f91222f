//! Dispatch and serialization.

use hardcore_tree::criticality::{
    asymptotic_window, classify_order, find_lambda_cr, scan_lambda_grid, CriticalOptions, LimitOptions, Order,
    PhasePoint, WindowGuard, DEFAULT_PROBE_OFFSETS,
};
use hardcore_tree::dynamics::{occupancy_tv, product_form_law, sample_root_marginal, simulate_loss_network};
use hardcore_tree::exact::{dp_partition, root_marginal, tv_distance};
use hardcore_tree::maps::{fixed_points, verify_s_shape, ScalarMap};
use hardcore_tree::recursion::{iterate, seed_law, tracked_scalar, TrajectoryStatus};
use hardcore_tree::{ModelParams, TreeShape};
use serde_json::{json, Value};

use crate::config::{command_name, Command, Format, RunConfig};
use crate::{CliError, EXIT_OK, EXIT_UNDETERMINED};

pub const SCHEMA_VERSION: &str = "hardcore-tree/v1";
pub const CSV_SCHEMA: &str = "# schema=hardcore-tree/v1";

/// Serialized output and exit status of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub text: String,
}

#[derive(Debug, Default)]
struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), ..Default::default() }
    }

    fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    fn render(&self) -> String {
        let mut s = String::from(CSV_SCHEMA);
        s.push('\n');
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

struct Report {
    result: Value,
    diagnostics: Vec<String>,
    table: Table,
    undetermined: bool,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn phase_rows(points: &[PhasePoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            vec![
                p.lambda.to_string(),
                p.delta.to_string(),
                p.coexists.to_string(),
                p.m.to_string(),
                p.big_m.to_string(),
                p.iterations.to_string(),
            ]
        })
        .collect()
}

const PHASE_COLUMNS: [&str; 6] = ["lambda", "delta", "coexists", "m", "M", "iterations"];

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Output(e.to_string()))
}

/// Runs a validated configuration and renders its output.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Output(format!("worker pool: {e}")))?
            .install(|| dispatch(cfg))?,
        None => dispatch(cfg)?,
    };
    let text = match cfg.output.format {
        Format::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "config_echo": to_value(cfg)?,
                "result": report.result,
                "diagnostics": report.diagnostics,
            });
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Output(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => report.table.render(),
    };
    Ok(Outcome { exit_code: if report.undetermined { EXIT_UNDETERMINED } else { EXIT_OK }, text })
}

fn dispatch(cfg: &RunConfig) -> Result<Report, CliError> {
    let name = command_name(cfg.command);
    let engine = |source: hardcore_tree::Error| CliError::Engine { command: name, source };
    let m = &cfg.model;
    let params = || ModelParams::new(m.b.unwrap_or(2), m.c.unwrap_or(1), m.lambda.unwrap_or(1.0)).map_err(engine);
    let copts = CriticalOptions {
        gap_tol: cfg.numeric.gap_tol,
        limits: LimitOptions { tol: cfg.numeric.tol, max_two_steps: cfg.numeric.max_levels, ..Default::default() },
    };
    let (b, c) = (m.b.unwrap_or(2), m.c.unwrap_or(1));
    let x = &cfg.extra;
    match cfg.command {
        Command::Exact => {
            let params = params()?;
            let shape = TreeShape::new(b, x.depth.unwrap()).map_err(engine)?;
            let law = root_marginal(&shape, &cfg.bc, &params).map_err(engine)?;
            let pv = dp_partition(&shape, &cfg.bc, &params).map_err(engine)?;
            let probs = law.probs();
            let mut table = Table::new(&["spin", "prob", "log_z"]).meta("level", law.level());
            table.rows = probs
                .iter()
                .zip(&pv.log_z)
                .enumerate()
                .map(|(i, (p, z))| vec![i.to_string(), p.to_string(), z.to_string()])
                .collect();
            Ok(Report {
                result: json!({ "level": law.level(), "probs": probs, "log_z": pv.log_z }),
                diagnostics: vec![],
                table,
                undetermined: false,
            })
        }
        Command::Recurse => {
            let params = params()?;
            let seed = seed_law(&cfg.bc, c).map_err(engine)?;
            let t = iterate(&seed, &params, cfg.numeric.tol, cfg.numeric.max_levels).map_err(engine)?;
            let scalars: Vec<f64> = t.laws.iter().map(|l| tracked_scalar(l, &params)).collect();
            let n = t.laws.len();
            let (even, odd) = if (n - 1) % 2 == 0 { (n - 1, n - 2) } else { (n - 2, n - 1) };
            let undetermined = t.status == TrajectoryStatus::MaxIterations;
            let mut diagnostics = vec![];
            if undetermined {
                diagnostics.push(format!("no convergence within {} even levels", cfg.numeric.max_levels));
            }
            let mut columns = vec!["level".to_string(), "scalar".to_string()];
            columns.extend((0..=c).map(|i| format!("p{i}")));
            let mut table = Table::new(&columns).meta("status", to_value(&t.status)?.as_str().unwrap_or_default()).meta("m", t.m).meta("M", t.big_m);
            table.rows = t
                .laws
                .iter()
                .zip(&scalars)
                .enumerate()
                .map(|(k, (l, s))| {
                    let mut row = vec![k.to_string(), s.to_string()];
                    row.extend(l.probs().iter().map(|p| p.to_string()));
                    row
                })
                .collect();
            Ok(Report {
                result: json!({
                    "status": t.status,
                    "m": t.m,
                    "M": t.big_m,
                    "levels": n - 1,
                    "scalars": scalars,
                    "even_limit": t.laws[even].probs(),
                    "odd_limit": t.laws[odd].probs(),
                }),
                diagnostics,
                table,
                undetermined,
            })
        }
        Command::Fixpoints => {
            let map = x.map.unwrap();
            let set = fixed_points(&map, cfg.numeric.tol).map_err(engine)?;
            let mut diagnostics = vec![];
            let s_shape = match map {
                ScalarMap::J { .. } => Value::Null,
                _ => match verify_s_shape(&map, 50.0, 4000) {
                    Ok(r) => to_value(&r)?,
                    Err(e) => {
                        diagnostics.push(format!("S-shape check failed: {e}"));
                        Value::Null
                    }
                },
            };
            if set.critical {
                diagnostics.push("a fixed point is at tangency".into());
            }
            let mut table = Table::new(&["value", "derivative", "stability"])
                .meta("inflection", opt(set.inflection))
                .meta("critical", set.critical);
            table.rows = set
                .points
                .iter()
                .map(|p| vec![p.value.to_string(), p.derivative.to_string(), format!("{:?}", p.stability)])
                .collect();
            Ok(Report {
                result: json!({ "map": to_value(&map)?, "fixed_points": to_value(&set)?, "s_shape": s_shape }),
                diagnostics,
                table,
                undetermined: false,
            })
        }
        Command::Critical => {
            let r = find_lambda_cr(b, c, x.bracket, cfg.numeric.rel_tol, &copts).map_err(engine)?;
            let undetermined = r.lambda_cr.is_none() || r.order == Order::Undetermined;
            let (lo, hi) = r.lambda_cr_bracket.map_or((None, None), |(a, b)| (Some(a), Some(b)));
            let mut table = Table::new(&PHASE_COLUMNS)
                .meta("lambda_cr", opt(r.lambda_cr))
                .meta("bracket_lo", opt(lo))
                .meta("bracket_hi", opt(hi))
                .meta("order", format!("{:?}", r.order));
            table.rows = phase_rows(&r.points);
            Ok(Report { diagnostics: r.diagnostics.clone(), result: to_value(&r)?, table, undetermined })
        }
        Command::Scan => {
            let r = scan_lambda_grid(b, c, x.grid.as_ref().unwrap(), &copts).map_err(engine)?;
            let (lo, hi) = r.lambda_cr_bracket.map_or((None, None), |(a, b)| (Some(a), Some(b)));
            let mut table = Table::new(&PHASE_COLUMNS)
                .meta("consistent", r.consistent)
                .meta("bracket_lo", opt(lo))
                .meta("bracket_hi", opt(hi));
            table.rows = phase_rows(&r.points);
            Ok(Report { diagnostics: r.diagnostics.clone(), result: to_value(&r)?, table, undetermined: !r.consistent })
        }
        Command::Order => {
            let mut diagnostics = vec![];
            let lambda_cr = match x.lambda_cr {
                Some(l) => Some(l),
                None => {
                    let r = find_lambda_cr(b, c, x.bracket, cfg.numeric.rel_tol, &copts).map_err(engine)?;
                    diagnostics.extend(r.diagnostics);
                    r.lambda_cr
                }
            };
            let Some(lambda_cr) = lambda_cr else {
                return Ok(Report {
                    result: json!({ "order": Order::Undetermined, "lambda_cr": Value::Null }),
                    diagnostics,
                    table: Table::new(&["offset", "lambda", "delta", "coexists", "m", "M"]).meta("order", "Undetermined"),
                    undetermined: true,
                });
            };
            let r = classify_order(b, c, lambda_cr, &DEFAULT_PROBE_OFFSETS, &copts).map_err(engine)?;
            diagnostics.extend(r.diagnostics.iter().cloned());
            let mut table = Table::new(&["offset", "lambda", "delta", "coexists", "m", "M"])
                .meta("lambda_cr", lambda_cr)
                .meta("order", format!("{:?}", r.order))
                .meta("jump_estimate", opt(r.jump_estimate))
                .meta("slope", opt(r.slope))
                .meta("epsilon_bound", opt(r.epsilon_bound));
            table.rows = r
                .probes
                .iter()
                .map(|(o, p)| {
                    vec![
                        o.to_string(),
                        p.lambda.to_string(),
                        p.delta.to_string(),
                        p.coexists.to_string(),
                        p.m.to_string(),
                        p.big_m.to_string(),
                    ]
                })
                .collect();
            let mut result = to_value(&r)?;
            result["lambda_cr"] = json!(lambda_cr);
            Ok(Report { result, diagnostics, table, undetermined: r.order == Order::Undetermined })
        }
        Command::Window => {
            let mut guard = WindowGuard::default();
            if let Some(g) = x.guard {
                if c % 2 == 1 {
                    guard.odd_min_b = g;
                } else {
                    guard.even_min_b = g;
                }
            }
            let r = asymptotic_window(b, c, &guard, &copts).map_err(engine)?;
            let undetermined = r.probes.iter().any(|p| !p.point.determined);
            let mut diagnostics = vec![];
            for p in r.probes.iter().filter(|p| !p.agrees) {
                diagnostics.push(format!(
                    "probe γ = {} (λ = {}): predicted coexists = {}, observed {}",
                    p.gamma, p.lambda, p.predicted_coexists, p.point.coexists
                ));
            }
            let mut table = Table::new(&["gamma", "lambda", "predicted_coexists", "delta", "coexists", "agrees"])
                .meta("consistent", r.consistent);
            table.rows = r
                .probes
                .iter()
                .map(|p| {
                    vec![
                        p.gamma.to_string(),
                        p.lambda.to_string(),
                        p.predicted_coexists.to_string(),
                        p.point.delta.to_string(),
                        p.point.coexists.to_string(),
                        p.agrees.to_string(),
                    ]
                })
                .collect();
            Ok(Report { result: to_value(&r)?, diagnostics, table, undetermined })
        }
        Command::Sample => {
            let params = params()?;
            let shape = TreeShape::new(b, x.depth.unwrap()).map_err(engine)?;
            let seed = cfg.seed.unwrap_or(0);
            let est = sample_root_marginal(&shape, &cfg.bc, &params, x.sweeps, x.burn_in, seed).map_err(engine)?;
            let exact = root_marginal(&shape, &cfg.bc, &params).map_err(engine)?;
            let tv = tv_distance(&est.law, &exact).map_err(engine)?;
            let probs = est.law.probs();
            let exact_probs = exact.probs();
            let mut table = Table::new(&["spin", "prob", "std_error", "exact"])
                .meta("seed", seed)
                .meta("sweeps", x.sweeps)
                .meta("burn_in", x.burn_in)
                .meta("tv_to_exact", tv);
            table.rows = (0..probs.len())
                .map(|i| {
                    vec![i.to_string(), probs[i].to_string(), est.std_errors[i].to_string(), exact_probs[i].to_string()]
                })
                .collect();
            Ok(Report {
                result: json!({
                    "probs": probs,
                    "std_errors": est.std_errors,
                    "replica_laws": { "empty": est.replica_laws[0], "tau": est.replica_laws[1], "full": est.replica_laws[2] },
                    "exact_probs": exact_probs,
                    "tv_to_exact": tv,
                    "samples": est.samples,
                    "seed": seed,
                }),
                diagnostics: vec![],
                table,
                undetermined: false,
            })
        }
        Command::Simulate => {
            let graph = &x.graph.as_ref().unwrap().graph;
            let lambda = m.lambda.unwrap();
            let seed = cfg.seed.unwrap_or(0);
            let stats = simulate_loss_network(graph, c, lambda, x.horizon, seed).map_err(engine)?;
            let exact = product_form_law(graph, c, lambda).map_err(engine)?;
            let tv = occupancy_tv(&stats.occupancy, &exact);
            let key = |s: &[u8]| s.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("-");
            let rows: Vec<(String, f64, f64)> = exact
                .iter()
                .map(|(s, p)| (key(s), stats.occupancy.get(s).copied().unwrap_or(0.0), *p))
                .collect();
            let mut table = Table::new(&["state", "prob", "exact"])
                .meta("seed", seed)
                .meta("horizon", x.horizon)
                .meta("events", stats.events)
                .meta("tv_to_product_form", tv)
                .meta("blocking_overall", stats.blocking_overall());
            table.rows = rows.iter().map(|(s, p, e)| vec![s.clone(), p.to_string(), e.to_string()]).collect();
            let occupancy: Vec<Value> =
                rows.iter().map(|(s, p, e)| json!({ "state": s, "prob": p, "exact": e })).collect();
            Ok(Report {
                result: json!({
                    "occupancy": occupancy,
                    "tv_to_product_form": tv,
                    "blocking_per_node": stats.blocking_per_node(),
                    "blocking_overall": stats.blocking_overall(),
                    "max_flux_imbalance": stats.max_flux_imbalance(),
                    "events": stats.events,
                    "horizon": x.horizon,
                    "seed": seed,
                }),
                diagnostics: vec![],
                table,
                undetermined: false,
            })
        }
    }
}
