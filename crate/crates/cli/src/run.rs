//! Command-line front end: load a scenario, run valuations, checks, and
//! probes, and emit reports.
//!
//! Exit codes: 0 when everything passes, 1 when any check fails or errors,
//! 2 on unreadable files, malformed or invalid scenarios, and unknown names.

use crate::reports::{ReportOut, ValueOut};
use crate::scenario::{parse_scenario, serialize_doc, EnvDecl, PreparedCheck, Scenario};
use agentmix::{
    check_mixture_laws, check_mixture_laws_with, check_symmetry, closure_probe,
    extrema_probe, separability_probe, universal_env, value_at_with, Agent, EvalOptions,
    Rational, ValueResult, WeightVector, WeightedMeasure,
};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "agentmix",
    version,
    about = "Exact checks and valuations for agent and environment mixtures"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output format for value tables (checks and probes are JSON only).
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Overrides the seed of every randomized check.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Node budget for valuations; AGENTMIX_MAX_NODES works too.
    #[arg(long, global = true)]
    max_nodes: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Expected total reward of an agent in an environment up to depth t.
    Value {
        scenario: String,
        agent: String,
        env: String,
        #[arg(long)]
        t: usize,
    },
    /// Weighted score of an agent under a measure up to depth t.
    Upsilon {
        scenario: String,
        agent: String,
        measure: String,
        #[arg(long)]
        t: usize,
    },
    /// Run the scenario's checks in declaration order, one JSON line each.
    Check {
        scenario: String,
        /// Run a single named check.
        #[arg(long)]
        only: Option<String>,
    },
    /// Materialize a measure's mixture environment as a named declaration
    /// and print the extended scenario.
    Universal {
        scenario: String,
        measure: String,
        /// Name for the new environment.
        #[arg(long)]
        out: String,
    },
    /// Perturb an agent at a decision site and report the score split.
    ProbeExtrema {
        scenario: String,
        measure: String,
        agent: String,
        /// Decision site, written as a history ending in a percept.
        #[arg(long)]
        site: String,
        /// Perturbation radius, an exact rational.
        #[arg(long)]
        eps: String,
        #[arg(long)]
        t: usize,
    },
    /// Compare the value ranges of two agent sets in one environment.
    ProbeSeparability {
        scenario: String,
        env: String,
        #[arg(long, value_delimiter = ',', required = true)]
        inside: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        outside: Vec<String>,
        #[arg(long)]
        t: usize,
    },
}

fn fail2(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn resolve_path(given: &str) -> PathBuf {
    let candidates = [
        given.to_string(),
        format!("{given}.toml"),
        format!("fixtures/{given}"),
        format!("fixtures/{given}.toml"),
    ];
    for c in &candidates {
        if Path::new(c).is_file() {
            return PathBuf::from(c);
        }
    }
    PathBuf::from(given)
}

fn load_scenario(given: &str) -> Result<Scenario, ExitCode> {
    let path = resolve_path(given);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| fail2(format_args!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| fail2(e))
}

fn eval_options(flag: Option<u64>) -> EvalOptions {
    let from_env = std::env::var("AGENTMIX_MAX_NODES")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut options = EvalOptions::default();
    if let Some(n) = flag.or(from_env) {
        options.max_nodes = n;
    }
    options
}

fn lookup<'s, T>(
    map: &'s indexmap::IndexMap<String, T>,
    name: &str,
    kind: &str,
) -> Result<&'s T, ExitCode> {
    map.get(name)
        .ok_or_else(|| fail2(format_args!("unknown {kind} {name:?}")))
}

fn csv_field(tail: &Option<Rational>) -> String {
    tail.as_ref().map(|s| s.to_string()).unwrap_or_default()
}

fn emit_value(
    format: Format,
    first_col: (&str, &str),
    second_col: (&str, &str),
    result: &ValueResult<Rational>,
) {
    match format {
        Format::Json => {
            let out = ValueOut::from_result(result);
            println!("{}", serde_json::to_string(&out).expect("serializable"));
        }
        Format::Csv => {
            println!("{},{},t,value,tail", first_col.0, second_col.0);
            println!(
                "{},{},{},{},{}",
                first_col.1,
                second_col.1,
                result.t,
                result.value,
                csv_field(&result.tail)
            );
        }
    }
}

fn upsilon_with(
    scenario: &Scenario,
    measure: &WeightedMeasure<Rational>,
    agent: &Agent<Rational>,
    t: usize,
    options: &EvalOptions,
) -> agentmix::Result<ValueResult<Rational>> {
    let mut value = Rational::from_integer(0.into());
    for (w, env) in measure.entries() {
        value += w * value_at_with(&scenario.spaces, agent, env, t, options)?.value;
    }
    Ok(ValueResult {
        value,
        tail: measure.tail(&scenario.spaces, t),
        t,
    })
}

fn run_check(
    scenario: &Scenario,
    name: &str,
    check: &PreparedCheck,
    seed_override: Option<u64>,
) -> ReportOut {
    let spaces = &scenario.spaces;
    let op = check.op();
    let outcome = match check {
        PreparedCheck::MixtureLaws {
            weights,
            components,
            mixture,
            env,
            t,
        } => match mixture {
            Some(m) => check_mixture_laws_with(spaces, m, weights, components, env, *t)
                .map(|r| ReportOut::from_report(name, op, &r)),
            None => WeightVector::new(weights.clone()).and_then(|w| {
                check_mixture_laws(spaces, &w, components, env, *t)
                    .map(|r| ReportOut::from_report(name, op, &r))
            }),
        },
        PreparedCheck::Symmetry {
            measure,
            battery,
            t,
        } => check_symmetry(spaces, measure, battery, *t)
            .map(|o| ReportOut::from_symmetry(name, &o)),
        PreparedCheck::Separability {
            env,
            inside,
            outside,
            t,
        } => separability_probe(spaces, env, inside, outside, *t)
            .map(|o| ReportOut::from_separability(name, &o)),
        PreparedCheck::Closure {
            members,
            env,
            threshold,
            t,
            trials,
            seed,
        } => closure_probe(
            spaces,
            members,
            env,
            threshold,
            *t,
            *trials,
            seed_override.unwrap_or(*seed),
        )
        .map(|r| ReportOut::from_report(name, op, &r)),
        PreparedCheck::Extrema {
            measure,
            agent,
            site,
            eps,
            t,
        } => extrema_probe(spaces, measure, agent, site, eps, *t)
            .map(|o| ReportOut::from_extrema(name, &o)),
    };
    outcome.unwrap_or_else(|e| ReportOut::from_error(name, op, e.to_string()))
}

fn emit_reports(reports: &[ReportOut]) -> ExitCode {
    let mut all_pass = true;
    for report in reports {
        println!("{}", serde_json::to_string(report).expect("serializable"));
        all_pass &= !report.failed();
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn exec(cli: Cli) -> Result<ExitCode, ExitCode> {
    let options = eval_options(cli.max_nodes);
    match &cli.cmd {
        Cmd::Value {
            scenario,
            agent,
            env,
            t,
        } => {
            let sc = load_scenario(scenario)?;
            let a = lookup(&sc.agents, agent, "agent")?;
            let e = lookup(&sc.envs, env, "environment")?;
            match value_at_with(&sc.spaces, a, e, *t, &options) {
                Ok(result) => {
                    emit_value(cli.format, ("agent", agent), ("env", env), &result);
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Cmd::Upsilon {
            scenario,
            agent,
            measure,
            t,
        } => {
            let sc = load_scenario(scenario)?;
            let a = lookup(&sc.agents, agent, "agent")?;
            let m = lookup(&sc.measures, measure, "measure")?;
            match upsilon_with(&sc, m, a, *t, &options) {
                Ok(result) => {
                    emit_value(cli.format, ("agent", agent), ("measure", measure), &result);
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Cmd::Check { scenario, only } => {
            if cli.format == Format::Csv {
                return Err(fail2("csv output applies to value and upsilon only"));
            }
            let sc = load_scenario(scenario)?;
            let selected: Vec<&(String, PreparedCheck)> = match only {
                Some(name) => {
                    let found = sc.checks.iter().find(|(n, _)| n == name);
                    vec![found.ok_or_else(|| fail2(format_args!("unknown check {name:?}")))?]
                }
                None => sc.checks.iter().collect(),
            };
            let reports: Vec<ReportOut> = selected
                .iter()
                .map(|(name, check)| run_check(&sc, name, check, cli.seed))
                .collect();
            Ok(emit_reports(&reports))
        }
        Cmd::Universal {
            scenario,
            measure,
            out,
        } => {
            let sc = load_scenario(scenario)?;
            let m = lookup(&sc.measures, measure, "measure")?;
            universal_env(&sc.spaces, m).map_err(|e| fail2(e))?;
            if sc.doc.envs.contains_key(out)
                || sc.doc.agents.contains_key(out)
                || sc.doc.measures.contains_key(out)
            {
                return Err(fail2(format_args!("name {out:?} is already declared")));
            }
            let mut doc = sc.doc;
            doc.envs
                .insert(out.clone(), EnvDecl::Expr(format!("universal({measure})")));
            print!("{}", serialize_doc(&doc));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ProbeExtrema {
            scenario,
            measure,
            agent,
            site,
            eps,
            t,
        } => {
            if cli.format == Format::Csv {
                return Err(fail2("csv output applies to value and upsilon only"));
            }
            let sc = load_scenario(scenario)?;
            let m = lookup(&sc.measures, measure, "measure")?;
            let a = lookup(&sc.agents, agent, "agent")?;
            let site = sc
                .spaces
                .parse_history(site)
                .map_err(|e| fail2(format_args!("bad --site: {e}")))?;
            let eps = Rational::from_str(eps)
                .map_err(|e| fail2(format_args!("bad --eps: {e}")))?;
            let report = match extrema_probe(&sc.spaces, m, a, &site, &eps, *t) {
                Ok(outcome) => ReportOut::from_extrema("probe", &outcome),
                Err(e) => ReportOut::from_error("probe", "extrema", e.to_string()),
            };
            Ok(emit_reports(&[report]))
        }
        Cmd::ProbeSeparability {
            scenario,
            env,
            inside,
            outside,
            t,
        } => {
            if cli.format == Format::Csv {
                return Err(fail2("csv output applies to value and upsilon only"));
            }
            let sc = load_scenario(scenario)?;
            let e = lookup(&sc.envs, env, "environment")?;
            let pick = |names: &[String]| -> Result<Vec<Agent<Rational>>, ExitCode> {
                names
                    .iter()
                    .map(|n| lookup(&sc.agents, n, "agent").map(Agent::clone))
                    .collect()
            };
            let inside: Vec<Agent<Rational>> = pick(inside)?;
            let outside: Vec<Agent<Rational>> = pick(outside)?;
            let report = match separability_probe(&sc.spaces, e, &inside, &outside, *t) {
                Ok(outcome) => ReportOut::from_separability("probe", &outcome),
                Err(err) => ReportOut::from_error("probe", "separability", err.to_string()),
            };
            Ok(emit_reports(&[report]))
        }
    }
}

/// Parses arguments from the process environment and runs the command.
pub fn run_cli() -> ExitCode {
    let cli = Cli::parse();
    match exec(cli) {
        Ok(code) => code,
        Err(code) => code,
    }
}
