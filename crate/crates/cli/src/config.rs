//! Command-line and TOML configuration.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use hardcore_tree::dynamics::Graph;
use hardcore_tree::maps::ScalarMap;
use hardcore_tree::BoundaryCondition;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Exact,
    Recurse,
    Fixpoints,
    Critical,
    Scan,
    Order,
    Window,
    Sample,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Raw flags. Everything is optional so that a config file can fill gaps.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "hardcore-tree", version, about = "Multi-state hard core model on b-ary trees")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Branching factor.
    #[arg(long)]
    pub b: Option<u32>,
    /// Capacity: spins take values in 0..=C.
    #[arg(long = "C", alias = "c")]
    pub c: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Levels below the root of the finite tree.
    #[arg(long)]
    pub depth: Option<u32>,
    /// empty | full | const:K | spins:s0,s1,...
    #[arg(long)]
    pub bc: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "gap-tol")]
    pub gap_tol: Option<f64>,
    #[arg(long = "max-levels")]
    pub max_levels: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML file with the same keys as the flags (underscores for dashes).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// lo,hi
    #[arg(long)]
    pub bracket: Option<String>,
    /// Relative width at which the critical bracket stops shrinking.
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    /// start:stop:count
    #[arg(long)]
    pub grid: Option<String>,
    /// J | J2 | FKappa | HGamma
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Critical activity for `order`; searched for when absent.
    #[arg(long = "lambda-cr")]
    pub lambda_cr: Option<f64>,
    /// Smallest b accepted by `window`.
    #[arg(long)]
    pub guard: Option<u32>,
    #[arg(long)]
    pub sweeps: Option<u64>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<u64>,
    /// k2 | path:N | complete:N | star:N | empty:N | edges:N:0-1,1-2
    #[arg(long)]
    pub graph: Option<String>,
    /// Simulated time.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Service discipline of the loss network; only `power` (λ^i).
    #[arg(long)]
    pub discipline: Option<String>,
}

/// Keys accepted in a TOML config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub b: Option<u32>,
    #[serde(alias = "C")]
    pub c: Option<u32>,
    pub lambda: Option<f64>,
    pub depth: Option<u32>,
    pub bc: Option<String>,
    pub tol: Option<f64>,
    pub gap_tol: Option<f64>,
    pub max_levels: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub bracket: Option<String>,
    pub rel_tol: Option<f64>,
    pub grid: Option<String>,
    pub map: Option<String>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda_cr: Option<f64>,
    pub guard: Option<u32>,
    pub sweeps: Option<u64>,
    pub burn_in: Option<u64>,
    pub graph: Option<String>,
    pub horizon: Option<f64>,
    pub discipline: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub b: Option<u32>,
    #[serde(rename = "C")]
    pub c: Option<u32>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Numeric {
    pub tol: f64,
    pub gap_tol: f64,
    pub max_levels: u64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Output {
    pub format: Format,
    pub path: Option<PathBuf>,
}

/// Command-specific inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extra {
    pub depth: Option<u32>,
    pub bracket: Option<(f64, f64)>,
    pub grid: Option<Vec<f64>>,
    pub map: Option<ScalarMap>,
    pub lambda_cr: Option<f64>,
    pub guard: Option<u32>,
    pub sweeps: u64,
    pub burn_in: u64,
    pub graph: Option<GraphSpec>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSpec {
    pub spec: String,
    #[serde(skip)]
    pub graph: Graph,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelSpec,
    pub bc: BoundaryCondition,
    pub numeric: Numeric,
    pub output: Output,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub workers: Option<usize>,
    pub extra: Extra,
}

pub const DEFAULT_SWEEPS: u64 = 10_000;
pub const DEFAULT_BURN_IN: u64 = 1_000;
pub const DEFAULT_HORIZON: f64 = 1e5;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `argv` (program name first) and an optional config file.
/// Returns the config and any warnings about overridden file values.
pub fn parse_and_validate<I, T>(argv: I) -> Result<(RunConfig, Vec<String>), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str::<FileConfig>(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let mut warnings = Vec::new();
    let merged = merge(args, file, &mut warnings);
    Ok((validate(merged)?, warnings))
}

fn merge(args: Args, file: FileConfig, warnings: &mut Vec<String>) -> Args {
    macro_rules! pick {
        ($($field:ident),*) => {
            Args {
                $($field: match (args.$field, file.$field) {
                    (Some(a), Some(f)) => {
                        if a != f {
                            warnings.push(format!(
                                "flag value for `{}` overrides the config file",
                                stringify!($field)
                            ));
                        }
                        Some(a)
                    }
                    (a, f) => a.or(f),
                },)*
                config: args.config,
            }
        };
    }
    pick!(
        command, b, c, lambda, depth, bc, tol, gap_tol, max_levels, format, out, seed, workers, bracket, rel_tol, grid,
        map, kappa, gamma, lambda_cr, guard, sweeps, burn_in, graph, horizon, discipline
    )
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(usage(format!("{name} must be positive"))),
        other => Ok(other),
    }
}

fn require<T>(cmd: Command, name: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("{}: missing required --{name}", command_name(cmd))))
}

pub fn command_name(cmd: Command) -> &'static str {
    match cmd {
        Command::Exact => "exact",
        Command::Recurse => "recurse",
        Command::Fixpoints => "fixpoints",
        Command::Critical => "critical",
        Command::Scan => "scan",
        Command::Order => "order",
        Command::Window => "window",
        Command::Sample => "sample",
        Command::Simulate => "simulate",
    }
}

pub fn parse_bc(s: &str) -> Result<BoundaryCondition, CliError> {
    let s = s.trim();
    match s {
        "empty" => return Ok(BoundaryCondition::Empty),
        "full" => return Ok(BoundaryCondition::Full),
        _ => {}
    }
    let bad = || usage(format!("bad boundary condition `{s}`: expected empty, full, const:K or spins:s0,s1,..."));
    if let Some(k) = s.strip_prefix("const:") {
        return k.trim().parse().map(BoundaryCondition::Constant).map_err(|_| bad());
    }
    if let Some(list) = s.strip_prefix("spins:") {
        return list
            .split(',')
            .map(|x| x.trim().parse::<u8>())
            .collect::<Result<Vec<_>, _>>()
            .map(BoundaryCondition::PerVertex)
            .map_err(|_| bad());
    }
    Err(bad())
}

pub fn parse_bracket(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || usage(format!("bad bracket `{s}`: expected lo,hi with 0 < lo < hi"));
    let parts: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    match parts[..] {
        [lo, hi] if lo > 0.0 && hi > lo && hi.is_finite() => Ok((lo, hi)),
        _ => Err(bad()),
    }
}

/// `a:b:n` is `n` evenly spaced points from `a` to `b` inclusive.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || usage(format!("bad grid `{s}`: expected start:stop:count with 0 < start <= stop"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(a > 0.0 && b >= a && b.is_finite()) || n == 0 || (n == 1 && b != a) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

pub fn parse_graph(s: &str) -> Result<Graph, CliError> {
    let bad = || usage(format!("bad graph `{s}`: expected k2, path:N, complete:N, star:N, empty:N or edges:N:0-1,..."));
    let engine = |e: hardcore_tree::Error| usage(format!("graph: {e}"));
    if s == "k2" {
        return Graph::complete(2).map_err(engine);
    }
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    if kind == "edges" {
        let (n, list) = rest.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        let edges = list
            .split(',')
            .filter(|e| !e.is_empty())
            .map(|e| {
                let (x, y) = e.split_once('-').ok_or_else(bad)?;
                Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
            })
            .collect::<Result<Vec<(usize, usize)>, CliError>>()?;
        return Graph::from_edges(n, &edges).map_err(engine);
    }
    let n: usize = rest.parse().map_err(|_| bad())?;
    match kind {
        "path" => Graph::path(n),
        "complete" => Graph::complete(n),
        "empty" => Graph::empty(n),
        "star" => Graph::from_edges(n, &(1..n).map(|i| (0, i)).collect::<Vec<_>>()),
        _ => return Err(bad()),
    }
    .map_err(engine)
}

fn parse_map(s: &str, spec: &ModelSpec, kappa: Option<f64>, gamma: Option<f64>) -> Result<ScalarMap, CliError> {
    let need_b = || spec.b.ok_or_else(|| usage("fixpoints: --map needs --b"));
    let need_l = || spec.lambda.ok_or_else(|| usage("fixpoints: --map needs --lambda"));
    let map = match s.to_ascii_lowercase().as_str() {
        "j" => ScalarMap::J { b: need_b()?, lambda: need_l()? },
        "j2" => ScalarMap::J2 { b: need_b()?, lambda: need_l()? },
        "fkappa" | "f_kappa" => ScalarMap::FKappa {
            b: need_b()?,
            lambda: need_l()?,
            kappa: kappa.ok_or_else(|| usage("fixpoints: --map FKappa needs --kappa"))?,
        },
        "hgamma" | "h_gamma" => {
            ScalarMap::HGamma { gamma: gamma.ok_or_else(|| usage("fixpoints: --map HGamma needs --gamma"))? }
        }
        _ => return Err(usage(format!("unknown map `{s}`: expected J, J2, FKappa or HGamma"))),
    };
    map.validate().map_err(|e| usage(format!("fixpoints: {e}")))?;
    Ok(map)
}

fn validate(a: Args) -> Result<RunConfig, CliError> {
    let command = a.command.ok_or_else(|| usage("missing command"))?;
    let name = command_name(command);
    let lambda = positive("lambda", a.lambda)?;
    let tol = positive("tol", a.tol)?.unwrap_or(1e-12);
    let gap_tol = positive("gap-tol", a.gap_tol)?.unwrap_or(1e-8);
    let rel_tol = positive("rel-tol", a.rel_tol)?.unwrap_or(1e-7);
    let kappa = a.kappa;
    if kappa.is_some_and(|k| !(k >= 0.0 && k.is_finite())) {
        return Err(usage("kappa must be non-negative"));
    }
    let gamma = positive("gamma", a.gamma)?;
    let lambda_cr = positive("lambda-cr", a.lambda_cr)?;
    let horizon = positive("horizon", a.horizon)?.unwrap_or(DEFAULT_HORIZON);
    if let Some(b) = a.b {
        if b < 2 {
            return Err(usage(format!("b must be at least 2 (got {b})")));
        }
    }
    if let Some(c) = a.c {
        if c < 1 || c > 255 {
            return Err(usage(format!("C must lie in 1..=255 (got {c})")));
        }
    }
    let max_levels = match a.max_levels {
        Some(0) => return Err(usage("max-levels must be positive")),
        Some(n) => n,
        None => 100_000,
    };
    if a.workers == Some(0) {
        return Err(usage("workers must be positive"));
    }
    if let Some(d) = &a.discipline {
        match d.to_ascii_lowercase().as_str() {
            "power" | "lambda-power" => {}
            "fcfs" | "factorial" => {
                return Err(usage(
                    "the first-come-first-served discipline with activities λ^i/i! is not supported; \
                     the model uses λ_i = λ^i (use --discipline power)",
                ))
            }
            other => return Err(usage(format!("unknown discipline `{other}`: expected power"))),
        }
        if command != Command::Simulate {
            return Err(usage("--discipline only applies to simulate"));
        }
    }
    let model = ModelSpec { b: a.b, c: a.c, lambda };
    let bc = match &a.bc {
        Some(s) => parse_bc(s)?,
        None => BoundaryCondition::Empty,
    };
    if let (Some(c), Some(k)) = (a.c, bc.constant_spin(255)) {
        if k as u32 > c && !matches!(bc, BoundaryCondition::Full) {
            return Err(usage(format!("boundary spin {k} exceeds C = {c}")));
        }
    }
    let bracket = a.bracket.as_deref().map(parse_bracket).transpose()?;
    let grid = a.grid.as_deref().map(parse_grid).transpose()?;
    let graph = match &a.graph {
        Some(s) => Some(GraphSpec { spec: s.clone(), graph: parse_graph(s)? }),
        None => None,
    };
    let map = match &a.map {
        Some(s) => Some(parse_map(s, &model, kappa, gamma)?),
        None => None,
    };
    let sweeps = a.sweeps.unwrap_or(DEFAULT_SWEEPS);
    let burn_in = a.burn_in.unwrap_or(DEFAULT_BURN_IN.min(sweeps / 2));

    match command {
        Command::Exact => {
            require(command, "b", a.b)?;
            require(command, "C", a.c)?;
            require(command, "lambda", lambda)?;
            require(command, "depth", a.depth)?;
        }
        Command::Recurse => {
            require(command, "b", a.b)?;
            require(command, "C", a.c)?;
            require(command, "lambda", lambda)?;
            if matches!(bc, BoundaryCondition::PerVertex(_)) {
                return Err(usage("recurse: the boundary must be homogeneous"));
            }
        }
        Command::Fixpoints => {
            require(command, "map", map)?;
        }
        Command::Critical | Command::Window => {
            require(command, "b", a.b)?;
            require(command, "C", a.c)?;
        }
        Command::Order => {
            require(command, "b", a.b)?;
            require(command, "C", a.c)?;
        }
        Command::Scan => {
            require(command, "b", a.b)?;
            require(command, "C", a.c)?;
            require(command, "grid", grid.as_ref())?;
        }
        Command::Sample => {
            require(command, "b", a.b)?;
            require(command, "C", a.c)?;
            require(command, "lambda", lambda)?;
            require(command, "depth", a.depth)?;
            if sweeps <= burn_in {
                return Err(usage(format!("{name}: sweeps must exceed burn-in")));
            }
        }
        Command::Simulate => {
            require(command, "C", a.c)?;
            require(command, "lambda", lambda)?;
            require(command, "graph", graph.as_ref())?;
        }
    }
    Ok(RunConfig {
        command,
        model,
        bc,
        numeric: Numeric { tol, gap_tol, max_levels, rel_tol },
        output: Output { format: a.format.unwrap_or(Format::Json), path: a.out },
        seed: a.seed,
        workers: a.workers,
        extra: Extra {
            depth: a.depth,
            bracket,
            grid,
            map,
            lambda_cr,
            guard: a.guard,
            sweeps,
            burn_in,
            graph,
            horizon,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        let mut v = vec!["hardcore-tree"];
        v.extend_from_slice(args);
        parse_and_validate(v).map(|(c, _)| c)
    }

    #[test]
    fn critical_with_bracket() {
        let cfg = parse(&["critical", "--b", "2", "--C", "2", "--bracket", "6,9"]).unwrap();
        assert_eq!(cfg.command, Command::Critical);
        assert_eq!(cfg.model.b, Some(2));
        assert_eq!(cfg.model.c, Some(2));
        assert_eq!(cfg.extra.bracket, Some((6.0, 9.0)));
    }

    #[test]
    fn negative_lambda_rejected() {
        let err = parse(&["recurse", "--b", "2", "--C", "1", "--lambda", "-1"]).unwrap_err();
        assert!(err.to_string().contains("lambda must be positive"), "{err}");
    }

    #[test]
    fn unknown_command_and_missing_fields() {
        assert!(parse(&["bogus"]).is_err());
        let err = parse(&["exact", "--b", "2", "--C", "1", "--lambda", "1"]).unwrap_err();
        assert!(err.to_string().contains("--depth"));
        assert!(parse(&["critical", "--b", "1", "--C", "1"]).is_err());
    }

    #[test]
    fn boundary_and_grid_syntax() {
        assert_eq!(parse_bc("const:2").unwrap(), BoundaryCondition::Constant(2));
        assert_eq!(parse_bc("spins:0,1").unwrap(), BoundaryCondition::PerVertex(vec![0, 1]));
        assert!(parse_bc("half").is_err());
        let g = parse_grid("7.0:7.6:61").unwrap();
        assert_eq!(g.len(), 61);
        assert!((g[60] - 7.6).abs() < 1e-15);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_bracket("9,6").is_err());
    }

    #[test]
    fn factorial_discipline_rejected() {
        let err = parse(&["simulate", "--C", "1", "--lambda", "1", "--graph", "k2", "--discipline", "fcfs"]).unwrap_err();
        assert!(err.to_string().contains("λ_i = λ^i"));
    }

    #[test]
    fn graphs() {
        assert_eq!(parse_graph("k2").unwrap().vertex_count(), 2);
        assert_eq!(parse_graph("star:4").unwrap().neighbors(0).len(), 3);
        assert_eq!(parse_graph("edges:3:0-1,1-2").unwrap(), Graph::path(3).unwrap());
        assert!(parse_graph("path:13").is_err());
    }
}
