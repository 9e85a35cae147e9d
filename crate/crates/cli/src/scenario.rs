//! Scenario documents: a versioned TOML schema declaring symbol spaces and
//! named agents, environments, measures, and checks. Parsing validates the
//! whole document and resolves every name; serialization round-trips.
//!
//! Schema (version "1"):
//!
//! ```toml
//! version = "1"
//!
//! [spaces]
//! actions = ["a", "b"]
//! observations = ["x0"]
//! rewards = ["-1", "0", "1"]          # exact rationals, in [-1, 1]
//!
//! [agents]                            # expression form
//! U = "uniform"
//! Db = "constant(b)"
//! M = "mix((1/3,2/3), (Db,Da))"
//!
//! [agents.T]                          # table form
//! kind = "table"
//! default = { a = "1/2", b = "1/2" }  # optional, uniform if absent
//! [[agents.T.entries]]
//! history = "(x0,0)"
//! masses = { a = "1/4", b = "3/4" }   # omitted actions get mass 0
//!
//! [envs.E]                            # table form (expression form: expr = "...")
//! kind = "table"
//! horizon = 2                         # optional; quiet zero-reward percept after it
//! [[envs.E.entries]]
//! history = ""                        # the empty history
//! masses = { "(x0,0)" = "1" }         # keyed by percept text
//!
//! [measures]
//! Y = { weights = ["1/2", "1/2"], envs = ["E", "Ebar"] }
//!
//! [checks.laws]                       # executed in declaration order
//! op = "mixture_laws"                 # or symmetry | separability | closure | extrema
//! weights = ["1/3", "2/3"]
//! agents = ["Db", "Da"]
//! env = "E"
//! t = 3
//! ```
//!
//! Agent expressions: `uniform`, `constant(action)`,
//! `greedy(threshold, hi_action, lo_action)`, `mix((w,...), (names,...))`,
//! `dual(name)`, `symmetrize(name)`, `patch(name, history, (m,...))`
//! (masses in action order), `defect(name)` (a catalogued broken mixture).
//! Environment expressions: `silent`, `envdual(name)`,
//! `envmix((w,...), (names,...))` (weights may sum below 1; the rest rides a
//! silent environment), `terminating(name, gamma)`, `universal(measure)`.
//! References may point forward; cycles are rejected.

use crate::expr::{parse_call, parse_list};
use agentmix::defects::{catalogue, DefectSubject};
use agentmix::{
    env_dual, mix_agents, mix_envs, patch_agent, symmetrize, universal_env, Agent, Dist,
    Env, EnvWeightVector, History, Rational, Spaces, WeightVector, WeightedMeasure,
};
use indexmap::IndexMap;
use std::fmt;
use std::str::FromStr;
use toml::map::Map;
use toml::Value;

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    /// The text is not well-formed TOML.
    Parse { message: String },
    /// The document shape is wrong: unknown field, missing field, wrong type.
    Schema { path: String, message: String },
    /// The document is well-shaped but semantically invalid.
    Validation { path: String, message: String },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Parse { message } => write!(f, "parse error: {message}"),
            ScenarioError::Schema { path, message } => {
                write!(f, "schema error at {path}: {message}")
            }
            ScenarioError::Validation { path, message } => {
                write!(f, "validation error at {path}: {message}")
            }
        }
    }
}

impl std::error::Error for ScenarioError {}

pub type SResult<T> = Result<T, ScenarioError>;

fn schema(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn invalid(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------- document

/// The serializable form of a scenario, mirroring the TOML text.
#[derive(Clone, Debug, PartialEq)]
pub struct Doc {
    pub version: String,
    pub spaces: SpacesDecl,
    pub agents: IndexMap<String, AgentDecl>,
    pub envs: IndexMap<String, EnvDecl>,
    pub measures: IndexMap<String, MeasureDecl>,
    pub checks: IndexMap<String, CheckDecl>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpacesDecl {
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub rewards: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AgentDecl {
    Expr(String),
    Table {
        default: Option<IndexMap<String, String>>,
        entries: Vec<TableEntry>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnvDecl {
    Expr(String),
    Table {
        horizon: Option<usize>,
        default: Option<IndexMap<String, String>>,
        entries: Vec<TableEntry>,
    },
}

/// One table row: a history and a mass map (action names for agents,
/// percept texts for environments).
#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub history: String,
    pub masses: IndexMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureDecl {
    pub weights: Vec<String>,
    pub envs: Vec<String>,
}

/// One named check. `op` selects the operation; the other fields are
/// op-specific and optional at the schema level, with presence enforced
/// during validation.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CheckDecl {
    pub op: String,
    pub weights: Option<Vec<String>>,
    pub agents: Option<Vec<String>>,
    pub mixture: Option<String>,
    pub env: Option<String>,
    pub measure: Option<String>,
    pub battery: Option<Vec<String>>,
    pub inside: Option<Vec<String>>,
    pub outside: Option<Vec<String>>,
    pub members: Option<Vec<String>>,
    pub threshold: Option<String>,
    pub agent: Option<String>,
    pub site: Option<String>,
    pub eps: Option<String>,
    pub t: usize,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

/// A check resolved against the scenario's spaces and namespaces, ready to
/// execute.
#[derive(Clone)]
pub enum PreparedCheck {
    MixtureLaws {
        weights: Vec<Rational>,
        components: Vec<Agent<Rational>>,
        mixture: Option<Agent<Rational>>,
        env: Env<Rational>,
        t: usize,
    },
    Symmetry {
        measure: WeightedMeasure<Rational>,
        battery: Vec<Agent<Rational>>,
        t: usize,
    },
    Separability {
        env: Env<Rational>,
        inside: Vec<Agent<Rational>>,
        outside: Vec<Agent<Rational>>,
        t: usize,
    },
    Closure {
        members: Vec<Agent<Rational>>,
        env: Env<Rational>,
        threshold: Rational,
        t: usize,
        trials: usize,
        seed: u64,
    },
    Extrema {
        measure: WeightedMeasure<Rational>,
        agent: Agent<Rational>,
        site: History,
        eps: Rational,
        t: usize,
    },
}

impl PreparedCheck {
    pub fn op(&self) -> &'static str {
        match self {
            PreparedCheck::MixtureLaws { .. } => "mixture_laws",
            PreparedCheck::Symmetry { .. } => "symmetry",
            PreparedCheck::Separability { .. } => "separability",
            PreparedCheck::Closure { .. } => "closure",
            PreparedCheck::Extrema { .. } => "extrema",
        }
    }
}

/// A fully validated scenario: the document plus every named object
/// resolved against the declared spaces.
pub struct Scenario {
    pub doc: Doc,
    pub spaces: Spaces<Rational>,
    pub agents: IndexMap<String, Agent<Rational>>,
    pub envs: IndexMap<String, Env<Rational>>,
    pub measures: IndexMap<String, WeightedMeasure<Rational>>,
    pub checks: Vec<(String, PreparedCheck)>,
}

// ----------------------------------------------------------------- reading

fn want_table<'v>(v: &'v Value, path: &str) -> SResult<&'v Map<String, Value>> {
    v.as_table()
        .ok_or_else(|| schema(path, format!("expected a table, found {}", v.type_str())))
}

fn want_str<'v>(v: &'v Value, path: &str) -> SResult<&'v str> {
    v.as_str()
        .ok_or_else(|| schema(path, format!("expected a string, found {}", v.type_str())))
}

fn want_usize(v: &Value, path: &str) -> SResult<usize> {
    let n = v.as_integer().ok_or_else(|| {
        schema(path, format!("expected an integer, found {}", v.type_str()))
    })?;
    usize::try_from(n).map_err(|_| schema(path, "expected a nonnegative integer"))
}

fn want_str_array(v: &Value, path: &str) -> SResult<Vec<String>> {
    let items = v.as_array().ok_or_else(|| {
        schema(path, format!("expected an array, found {}", v.type_str()))
    })?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            Ok(want_str(item, &format!("{path}[{i}]"))?.to_string())
        })
        .collect()
}

fn want_mass_map(v: &Value, path: &str) -> SResult<IndexMap<String, String>> {
    let table = want_table(v, path)?;
    let mut map = IndexMap::new();
    for (key, item) in table {
        let text = want_str(item, &format!("{path}.{key}"))?;
        map.insert(key.clone(), text.to_string());
    }
    Ok(map)
}

fn check_keys(table: &Map<String, Value>, allowed: &[&str], path: &str) -> SResult<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let at = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            return Err(schema(&at, "unknown field"));
        }
    }
    Ok(())
}

fn get<'v>(table: &'v Map<String, Value>, key: &str) -> Option<&'v Value> {
    table.get(key)
}

fn require<'v>(table: &'v Map<String, Value>, key: &str, path: &str) -> SResult<&'v Value> {
    get(table, key).ok_or_else(|| schema(path, format!("missing required field {key:?}")))
}

fn read_entries(v: &Value, path: &str) -> SResult<Vec<TableEntry>> {
    let rows = v.as_array().ok_or_else(|| {
        schema(path, format!("expected an array of tables, found {}", v.type_str()))
    })?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let at = format!("{path}[{i}]");
        let table = want_table(row, &at)?;
        check_keys(table, &["history", "masses"], &at)?;
        let history = want_str(require(table, "history", &at)?, &format!("{at}.history"))?;
        let masses = want_mass_map(require(table, "masses", &at)?, &format!("{at}.masses"))?;
        entries.push(TableEntry {
            history: history.to_string(),
            masses,
        });
    }
    Ok(entries)
}

fn read_agent_decl(v: &Value, path: &str) -> SResult<AgentDecl> {
    if let Some(expr) = v.as_str() {
        return Ok(AgentDecl::Expr(expr.to_string()));
    }
    let table = want_table(v, path)?;
    if let Some(expr) = get(table, "expr") {
        check_keys(table, &["expr"], path)?;
        return Ok(AgentDecl::Expr(
            want_str(expr, &format!("{path}.expr"))?.to_string(),
        ));
    }
    check_keys(table, &["kind", "default", "entries"], path)?;
    let kind = want_str(require(table, "kind", path)?, &format!("{path}.kind"))?;
    if kind != "table" {
        return Err(schema(&format!("{path}.kind"), "expected \"table\""));
    }
    let default = get(table, "default")
        .map(|v| want_mass_map(v, &format!("{path}.default")))
        .transpose()?;
    let entries = get(table, "entries")
        .map(|v| read_entries(v, &format!("{path}.entries")))
        .transpose()?
        .unwrap_or_default();
    Ok(AgentDecl::Table { default, entries })
}

fn read_env_decl(v: &Value, path: &str) -> SResult<EnvDecl> {
    if let Some(expr) = v.as_str() {
        return Ok(EnvDecl::Expr(expr.to_string()));
    }
    let table = want_table(v, path)?;
    if let Some(expr) = get(table, "expr") {
        check_keys(table, &["expr"], path)?;
        return Ok(EnvDecl::Expr(
            want_str(expr, &format!("{path}.expr"))?.to_string(),
        ));
    }
    check_keys(table, &["kind", "horizon", "default", "entries"], path)?;
    let kind = want_str(require(table, "kind", path)?, &format!("{path}.kind"))?;
    if kind != "table" {
        return Err(schema(&format!("{path}.kind"), "expected \"table\""));
    }
    let horizon = get(table, "horizon")
        .map(|v| want_usize(v, &format!("{path}.horizon")))
        .transpose()?;
    let default = get(table, "default")
        .map(|v| want_mass_map(v, &format!("{path}.default")))
        .transpose()?;
    let entries = get(table, "entries")
        .map(|v| read_entries(v, &format!("{path}.entries")))
        .transpose()?
        .unwrap_or_default();
    Ok(EnvDecl::Table {
        horizon,
        default,
        entries,
    })
}

fn read_check_decl(v: &Value, path: &str) -> SResult<CheckDecl> {
    let table = want_table(v, path)?;
    check_keys(
        table,
        &[
            "op", "weights", "agents", "mixture", "env", "measure", "battery", "inside",
            "outside", "members", "threshold", "agent", "site", "eps", "t", "trials",
            "seed",
        ],
        path,
    )?;
    let op = want_str(require(table, "op", path)?, &format!("{path}.op"))?.to_string();
    let t = want_usize(require(table, "t", path)?, &format!("{path}.t"))?;
    let str_field = |key: &str| -> SResult<Option<String>> {
        get(table, key)
            .map(|v| Ok(want_str(v, &format!("{path}.{key}"))?.to_string()))
            .transpose()
    };
    let list_field = |key: &str| -> SResult<Option<Vec<String>>> {
        get(table, key)
            .map(|v| want_str_array(v, &format!("{path}.{key}")))
            .transpose()
    };
    Ok(CheckDecl {
        op,
        weights: list_field("weights")?,
        agents: list_field("agents")?,
        mixture: str_field("mixture")?,
        env: str_field("env")?,
        measure: str_field("measure")?,
        battery: list_field("battery")?,
        inside: list_field("inside")?,
        outside: list_field("outside")?,
        members: list_field("members")?,
        threshold: str_field("threshold")?,
        agent: str_field("agent")?,
        site: str_field("site")?,
        eps: str_field("eps")?,
        t,
        trials: get(table, "trials")
            .map(|v| want_usize(v, &format!("{path}.trials")))
            .transpose()?,
        seed: get(table, "seed")
            .map(|v| {
                let n = v.as_integer().ok_or_else(|| {
                    schema(&format!("{path}.seed"), "expected an integer")
                })?;
                u64::try_from(n)
                    .map_err(|_| schema(&format!("{path}.seed"), "expected a nonnegative integer"))
            })
            .transpose()?,
    })
}

/// Reads the document structure without resolving names.
pub fn parse_doc(text: &str) -> SResult<Doc> {
    let value: Value = text
        .parse()
        .map_err(|e: toml::de::Error| ScenarioError::Parse {
            message: e.to_string(),
        })?;
    let root = want_table(&value, "")?;
    check_keys(
        root,
        &["version", "spaces", "agents", "envs", "measures", "checks"],
        "",
    )?;
    let version = want_str(require(root, "version", "version")?, "version")?.to_string();
    if version != "1" {
        return Err(invalid(
            "version",
            format!("unrecognized version {version:?}, expected \"1\""),
        ));
    }
    let spaces_table = want_table(require(root, "spaces", "spaces")?, "spaces")?;
    check_keys(spaces_table, &["actions", "observations", "rewards"], "spaces")?;
    let spaces = SpacesDecl {
        actions: want_str_array(
            require(spaces_table, "actions", "spaces")?,
            "spaces.actions",
        )?,
        observations: want_str_array(
            require(spaces_table, "observations", "spaces")?,
            "spaces.observations",
        )?,
        rewards: want_str_array(
            require(spaces_table, "rewards", "spaces")?,
            "spaces.rewards",
        )?,
    };
    let mut sections: [IndexMap<String, Value>; 4] = Default::default();
    for (slot, key) in ["agents", "envs", "measures", "checks"].iter().enumerate() {
        if let Some(v) = get(root, key) {
            let table = want_table(v, key)?;
            for (name, item) in table {
                sections[slot].insert(name.clone(), item.clone());
            }
        }
    }
    let [agents_raw, envs_raw, measures_raw, checks_raw] = sections;
    let mut agents = IndexMap::new();
    for (name, v) in &agents_raw {
        agents.insert(name.clone(), read_agent_decl(v, &format!("agents.{name}"))?);
    }
    let mut envs = IndexMap::new();
    for (name, v) in &envs_raw {
        envs.insert(name.clone(), read_env_decl(v, &format!("envs.{name}"))?);
    }
    let mut measures = IndexMap::new();
    for (name, v) in &measures_raw {
        let path = format!("measures.{name}");
        let table = want_table(v, &path)?;
        check_keys(table, &["weights", "envs"], &path)?;
        measures.insert(
            name.clone(),
            MeasureDecl {
                weights: want_str_array(
                    require(table, "weights", &path)?,
                    &format!("{path}.weights"),
                )?,
                envs: want_str_array(require(table, "envs", &path)?, &format!("{path}.envs"))?,
            },
        );
    }
    let mut checks = IndexMap::new();
    for (name, v) in &checks_raw {
        checks.insert(name.clone(), read_check_decl(v, &format!("checks.{name}"))?);
    }
    Ok(Doc {
        version,
        spaces,
        agents,
        envs,
        measures,
        checks,
    })
}

// -------------------------------------------------------------- resolution

fn parse_rational(text: &str, path: &str) -> SResult<Rational> {
    Rational::from_str(text.trim())
        .map_err(|e| invalid(path, format!("bad rational {text:?}: {e}")))
}

struct Resolver<'d> {
    doc: &'d Doc,
    spaces: Spaces<Rational>,
    agents: IndexMap<String, Agent<Rational>>,
    envs: IndexMap<String, Env<Rational>>,
    measures: IndexMap<String, WeightedMeasure<Rational>>,
    stack: Vec<String>,
}

impl<'d> Resolver<'d> {
    fn enter(&mut self, path: &str) -> SResult<()> {
        if self.stack.iter().any(|p| p == path) {
            return Err(invalid(
                path,
                format!("circular reference: {} -> {path}", self.stack.join(" -> ")),
            ));
        }
        self.stack.push(path.to_string());
        Ok(())
    }

    fn agent(&mut self, name: &str, from: &str) -> SResult<Agent<Rational>> {
        if let Some(a) = self.agents.get(name) {
            return Ok(a.clone());
        }
        let doc = self.doc;
        let Some(decl) = doc.agents.get(name) else {
            return Err(invalid(from, format!("unknown agent {name:?}")));
        };
        let path = format!("agents.{name}");
        self.enter(&path)?;
        let agent = match decl {
            AgentDecl::Expr(expr) => self.agent_expr(expr, &path)?,
            AgentDecl::Table { default, entries } => self.table_agent(default, entries, &path)?,
        };
        self.stack.pop();
        self.agents.insert(name.to_string(), agent.clone());
        Ok(agent)
    }

    fn action_dist(
        &self,
        masses: &IndexMap<String, String>,
        path: &str,
    ) -> SResult<Dist<Rational>> {
        let n = self.spaces.num_actions();
        let mut mass = vec![Rational::from_integer(0.into()); n];
        for (key, text) in masses {
            let at = format!("{path}.{key}");
            let id = self
                .spaces
                .action_by_name(key)
                .ok_or_else(|| invalid(&at, format!("unknown action {key:?}")))?;
            mass[id.index()] = parse_rational(text, &at)?;
        }
        Dist::new(mass).map_err(|e| invalid(path, e.to_string()))
    }

    fn percept_dist(
        &self,
        masses: &IndexMap<String, String>,
        path: &str,
    ) -> SResult<Dist<Rational>> {
        let n = self.spaces.num_percepts();
        let mut mass = vec![Rational::from_integer(0.into()); n];
        for (key, text) in masses {
            let at = format!("{path}.{key}");
            let percept = self
                .spaces
                .parse_percept(key)
                .map_err(|e| invalid(&at, e.to_string()))?;
            mass[self.spaces.percept_index(percept)] = parse_rational(text, &at)?;
        }
        Dist::new(mass).map_err(|e| invalid(path, e.to_string()))
    }

    fn history(&self, text: &str, path: &str) -> SResult<History> {
        self.spaces
            .parse_history(text)
            .map_err(|e| invalid(path, e.to_string()))
    }

    fn table_agent(
        &self,
        default: &Option<IndexMap<String, String>>,
        entries: &[TableEntry],
        path: &str,
    ) -> SResult<Agent<Rational>> {
        let default = default
            .as_ref()
            .map(|m| self.action_dist(m, &format!("{path}.default")))
            .transpose()?;
        let mut rows = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            let at = format!("{path}.entries[{i}]");
            let history = self.history(&entry.history, &format!("{at}.history"))?;
            let dist = self.action_dist(&entry.masses, &format!("{at}.masses"))?;
            rows.push((history, dist));
        }
        Agent::table(&self.spaces, rows, default).map_err(|e| invalid(path, e.to_string()))
    }

    fn agent_expr(&mut self, expr: &str, path: &str) -> SResult<Agent<Rational>> {
        let call = parse_call(expr).map_err(|e| invalid(path, e))?;
        let arity = |n: usize| -> SResult<()> {
            if call.args.len() == n {
                Ok(())
            } else {
                Err(invalid(
                    path,
                    format!("{} expects {n} argument(s), got {}", call.head, call.args.len()),
                ))
            }
        };
        match call.head.as_str() {
            "uniform" => {
                arity(0)?;
                Ok(Agent::uniform())
            }
            "constant" => {
                arity(1)?;
                let id = self.spaces.action_by_name(&call.args[0]).ok_or_else(|| {
                    invalid(path, format!("unknown action {:?}", call.args[0]))
                })?;
                Agent::constant(&self.spaces, id).map_err(|e| invalid(path, e.to_string()))
            }
            "greedy" => {
                arity(3)?;
                let threshold = parse_rational(&call.args[0], path)?;
                let hi = self.spaces.action_by_name(&call.args[1]).ok_or_else(|| {
                    invalid(path, format!("unknown action {:?}", call.args[1]))
                })?;
                let lo = self.spaces.action_by_name(&call.args[2]).ok_or_else(|| {
                    invalid(path, format!("unknown action {:?}", call.args[2]))
                })?;
                Agent::last_reward_greedy(&self.spaces, threshold, hi, lo)
                    .map_err(|e| invalid(path, e.to_string()))
            }
            "mix" => {
                arity(2)?;
                let weights = self.weight_vector(&call.args[0], path)?;
                let names = parse_list(&call.args[1]).map_err(|e| invalid(path, e))?;
                let mut components = Vec::with_capacity(names.len());
                for n in &names {
                    components.push(self.agent(n, path)?);
                }
                mix_agents(weights, components).map_err(|e| invalid(path, e.to_string()))
            }
            "dual" => {
                arity(1)?;
                let base = self.agent(&call.args[0], path)?;
                agentmix::dual_agent(&self.spaces, &base)
                    .map_err(|e| invalid(path, e.to_string()))
            }
            "symmetrize" => {
                arity(1)?;
                let base = self.agent(&call.args[0], path)?;
                symmetrize(&self.spaces, &base).map_err(|e| invalid(path, e.to_string()))
            }
            "patch" => {
                arity(3)?;
                let base = self.agent(&call.args[0], path)?;
                let site = self.history(&call.args[1], path)?;
                let masses = parse_list(&call.args[2]).map_err(|e| invalid(path, e))?;
                let replacement = self.positional_action_dist(&masses, path)?;
                patch_agent(&self.spaces, &base, site, replacement)
                    .map_err(|e| invalid(path, e.to_string()))
            }
            "defect" => {
                arity(1)?;
                let defects =
                    catalogue(&self.spaces).map_err(|e| invalid(path, e.to_string()))?;
                let wanted = &call.args[0];
                let defect = defects
                    .iter()
                    .find(|d| d.name == wanted)
                    .ok_or_else(|| invalid(path, format!("unknown defect {wanted:?}")))?;
                match &defect.subject {
                    DefectSubject::Mixture { mixture, .. } => Ok(mixture.clone()),
                    _ => Err(invalid(
                        path,
                        format!("defect {wanted:?} is not a mixture defect"),
                    )),
                }
            }
            other => Err(invalid(path, format!("unknown agent expression {other:?}"))),
        }
    }

    fn positional_action_dist(&self, masses: &[String], path: &str) -> SResult<Dist<Rational>> {
        if masses.len() != self.spaces.num_actions() {
            return Err(invalid(
                path,
                format!(
                    "expected {} masses in action order, got {}",
                    self.spaces.num_actions(),
                    masses.len()
                ),
            ));
        }
        let mass = masses
            .iter()
            .map(|m| parse_rational(m, path))
            .collect::<SResult<Vec<_>>>()?;
        Dist::new(mass).map_err(|e| invalid(path, e.to_string()))
    }

    fn weight_vector(&self, arg: &str, path: &str) -> SResult<WeightVector<Rational>> {
        let items = parse_list(arg).map_err(|e| invalid(path, e))?;
        let weights = items
            .iter()
            .map(|w| parse_rational(w, path))
            .collect::<SResult<Vec<_>>>()?;
        WeightVector::new(weights).map_err(|e| invalid(path, e.to_string()))
    }

    fn env(&mut self, name: &str, from: &str) -> SResult<Env<Rational>> {
        if let Some(e) = self.envs.get(name) {
            return Ok(e.clone());
        }
        let doc = self.doc;
        let Some(decl) = doc.envs.get(name) else {
            return Err(invalid(from, format!("unknown environment {name:?}")));
        };
        let path = format!("envs.{name}");
        self.enter(&path)?;
        let env = match decl {
            EnvDecl::Expr(expr) => self.env_expr(expr, &path)?,
            EnvDecl::Table {
                horizon,
                default,
                entries,
            } => {
                let default = default
                    .as_ref()
                    .map(|m| self.percept_dist(m, &format!("{path}.default")))
                    .transpose()?;
                let mut rows = Vec::with_capacity(entries.len());
                for (i, entry) in entries.iter().enumerate() {
                    let at = format!("{path}.entries[{i}]");
                    let history = self.history(&entry.history, &format!("{at}.history"))?;
                    let dist = self.percept_dist(&entry.masses, &format!("{at}.masses"))?;
                    rows.push((history, dist));
                }
                Env::table(&self.spaces, rows, default, *horizon)
                    .map_err(|e| invalid(&path, e.to_string()))?
            }
        };
        self.stack.pop();
        self.envs.insert(name.to_string(), env.clone());
        Ok(env)
    }

    fn env_expr(&mut self, expr: &str, path: &str) -> SResult<Env<Rational>> {
        let call = parse_call(expr).map_err(|e| invalid(path, e))?;
        let arity = |n: usize| -> SResult<()> {
            if call.args.len() == n {
                Ok(())
            } else {
                Err(invalid(
                    path,
                    format!("{} expects {n} argument(s), got {}", call.head, call.args.len()),
                ))
            }
        };
        match call.head.as_str() {
            "silent" => {
                arity(0)?;
                Env::silent(&self.spaces).map_err(|e| invalid(path, e.to_string()))
            }
            "envdual" => {
                arity(1)?;
                let base = self.env(&call.args[0], path)?;
                env_dual(&self.spaces, &base).map_err(|e| invalid(path, e.to_string()))
            }
            "envmix" => {
                arity(2)?;
                let items = parse_list(&call.args[0]).map_err(|e| invalid(path, e))?;
                let weights = items
                    .iter()
                    .map(|w| parse_rational(w, path))
                    .collect::<SResult<Vec<_>>>()?;
                let weights =
                    EnvWeightVector::new(weights).map_err(|e| invalid(path, e.to_string()))?;
                let names = parse_list(&call.args[1]).map_err(|e| invalid(path, e))?;
                let mut components = Vec::with_capacity(names.len());
                for n in &names {
                    components.push(self.env(n, path)?);
                }
                mix_envs(&self.spaces, weights, components)
                    .map_err(|e| invalid(path, e.to_string()))
            }
            "terminating" => {
                arity(2)?;
                let base = self.env(&call.args[0], path)?;
                let gamma = parse_rational(&call.args[1], path)?;
                Env::terminating(&self.spaces, base, gamma)
                    .map_err(|e| invalid(path, e.to_string()))
            }
            "universal" => {
                arity(1)?;
                let measure = self.measure(&call.args[0], path)?;
                universal_env(&self.spaces, &measure).map_err(|e| invalid(path, e.to_string()))
            }
            other => Err(invalid(
                path,
                format!("unknown environment expression {other:?}"),
            )),
        }
    }

    fn measure(&mut self, name: &str, from: &str) -> SResult<WeightedMeasure<Rational>> {
        if let Some(m) = self.measures.get(name) {
            return Ok(m.clone());
        }
        let doc = self.doc;
        let Some(decl) = doc.measures.get(name) else {
            return Err(invalid(from, format!("unknown measure {name:?}")));
        };
        let path = format!("measures.{name}");
        self.enter(&path)?;
        if decl.weights.len() != decl.envs.len() {
            return Err(invalid(
                &path,
                format!(
                    "{} weights for {} environments",
                    decl.weights.len(),
                    decl.envs.len()
                ),
            ));
        }
        let weights = decl
            .weights
            .iter()
            .map(|w| parse_rational(w, &format!("{path}.weights")))
            .collect::<SResult<Vec<_>>>()?;
        let zero = Rational::from_integer(0.into());
        let one = Rational::from_integer(1.into());
        let total: Rational = weights.iter().cloned().sum();
        if weights.iter().any(|w| *w <= zero) || total != one {
            return Err(invalid(
                &path,
                format!(
                    "measure weights must be strictly positive and sum to exactly 1, \
                     got sum {total}"
                ),
            ));
        }
        let mut entries = Vec::with_capacity(weights.len());
        for (w, env_name) in weights.into_iter().zip(&decl.envs) {
            entries.push((w, self.env(env_name, &path)?));
        }
        let measure =
            WeightedMeasure::new(entries).map_err(|e| invalid(&path, e.to_string()))?;
        self.stack.pop();
        self.measures.insert(name.to_string(), measure.clone());
        Ok(measure)
    }

    fn agent_list(&mut self, names: &[String], path: &str) -> SResult<Vec<Agent<Rational>>> {
        names.iter().map(|n| self.agent(n, path)).collect()
    }

    fn prepare_check(&mut self, name: &str, decl: &'d CheckDecl) -> SResult<PreparedCheck> {
        let path = format!("checks.{name}");
        let need_str = |field: Option<&'d String>, what: &str| -> SResult<&'d String> {
            field.ok_or_else(|| schema(&path, format!("op {:?} needs field {what:?}", decl.op)))
        };
        let need_list = |field: Option<&'d Vec<String>>, what: &str| -> SResult<&'d Vec<String>> {
            field.ok_or_else(|| schema(&path, format!("op {:?} needs field {what:?}", decl.op)))
        };
        match decl.op.as_str() {
            "mixture_laws" => {
                let weight_texts = need_list(decl.weights.as_ref(), "weights")?;
                let weights = weight_texts
                    .iter()
                    .map(|w| parse_rational(w, &format!("{path}.weights")))
                    .collect::<SResult<Vec<_>>>()?;
                let components =
                    self.agent_list(need_list(decl.agents.as_ref(), "agents")?, &path)?;
                if weights.len() != components.len() {
                    return Err(invalid(
                        &path,
                        format!(
                            "{} weights for {} agents",
                            weights.len(),
                            components.len()
                        ),
                    ));
                }
                let mixture = decl
                    .mixture
                    .as_ref()
                    .map(|m| self.agent(m, &path))
                    .transpose()?;
                let env = self.env(need_str(decl.env.as_ref(), "env")?, &path)?;
                Ok(PreparedCheck::MixtureLaws {
                    weights,
                    components,
                    mixture,
                    env,
                    t: decl.t,
                })
            }
            "symmetry" => {
                let measure = self.measure(need_str(decl.measure.as_ref(), "measure")?, &path)?;
                let battery =
                    self.agent_list(need_list(decl.battery.as_ref(), "battery")?, &path)?;
                Ok(PreparedCheck::Symmetry {
                    measure,
                    battery,
                    t: decl.t,
                })
            }
            "separability" => {
                let env = self.env(need_str(decl.env.as_ref(), "env")?, &path)?;
                let inside = self.agent_list(need_list(decl.inside.as_ref(), "inside")?, &path)?;
                let outside =
                    self.agent_list(need_list(decl.outside.as_ref(), "outside")?, &path)?;
                Ok(PreparedCheck::Separability {
                    env,
                    inside,
                    outside,
                    t: decl.t,
                })
            }
            "closure" => {
                let members =
                    self.agent_list(need_list(decl.members.as_ref(), "members")?, &path)?;
                let env = self.env(need_str(decl.env.as_ref(), "env")?, &path)?;
                let threshold = parse_rational(
                    need_str(decl.threshold.as_ref(), "threshold")?,
                    &format!("{path}.threshold"),
                )?;
                Ok(PreparedCheck::Closure {
                    members,
                    env,
                    threshold,
                    t: decl.t,
                    trials: decl.trials.unwrap_or(16),
                    seed: decl.seed.unwrap_or(0),
                })
            }
            "extrema" => {
                let measure = self.measure(need_str(decl.measure.as_ref(), "measure")?, &path)?;
                let agent = self.agent(need_str(decl.agent.as_ref(), "agent")?, &path)?;
                let site = self.history(
                    need_str(decl.site.as_ref(), "site")?,
                    &format!("{path}.site"),
                )?;
                let eps = parse_rational(
                    need_str(decl.eps.as_ref(), "eps")?,
                    &format!("{path}.eps"),
                )?;
                Ok(PreparedCheck::Extrema {
                    measure,
                    agent,
                    site,
                    eps,
                    t: decl.t,
                })
            }
            other => Err(invalid(
                &format!("{path}.op"),
                format!("unknown op {other:?}"),
            )),
        }
    }
}

/// Parses and fully validates a scenario: document shape, spaces, every
/// named declaration, and every check's references.
pub fn parse_scenario(text: &str) -> SResult<Scenario> {
    let doc = parse_doc(text)?;
    let rewards = doc
        .spaces
        .rewards
        .iter()
        .enumerate()
        .map(|(i, r)| parse_rational(r, &format!("spaces.rewards[{i}]")))
        .collect::<SResult<Vec<_>>>()?;
    let spaces = Spaces::new(
        doc.spaces.actions.clone(),
        doc.spaces.observations.clone(),
        rewards,
    )
    .map_err(|e| invalid("spaces", e.to_string()))?;
    let mut resolver = Resolver {
        doc: &doc,
        spaces,
        agents: IndexMap::new(),
        envs: IndexMap::new(),
        measures: IndexMap::new(),
        stack: Vec::new(),
    };
    let agent_names: Vec<String> = doc.agents.keys().cloned().collect();
    for name in &agent_names {
        resolver.agent(name, "agents")?;
    }
    let env_names: Vec<String> = doc.envs.keys().cloned().collect();
    for name in &env_names {
        resolver.env(name, "envs")?;
    }
    let measure_names: Vec<String> = doc.measures.keys().cloned().collect();
    for name in &measure_names {
        resolver.measure(name, "measures")?;
    }
    let mut checks = Vec::with_capacity(doc.checks.len());
    for (name, decl) in &doc.checks {
        checks.push((name.clone(), resolver.prepare_check(name, decl)?));
    }
    let Resolver {
        spaces,
        agents: resolved_agents,
        envs: resolved_envs,
        measures: resolved_measures,
        ..
    } = resolver;
    // Re-insert in declaration order: resolution may have interned
    // referenced names before earlier-declared ones.
    let mut agents = IndexMap::new();
    for name in &agent_names {
        agents.insert(name.clone(), resolved_agents[name.as_str()].clone());
    }
    let mut envs = IndexMap::new();
    for name in &env_names {
        envs.insert(name.clone(), resolved_envs[name.as_str()].clone());
    }
    let mut measures = IndexMap::new();
    for name in &measure_names {
        measures.insert(name.clone(), resolved_measures[name.as_str()].clone());
    }
    Ok(Scenario {
        doc,
        spaces,
        agents,
        envs,
        measures,
        checks,
    })
}

// ------------------------------------------------------------ serialization

fn mass_map_value(map: &IndexMap<String, String>) -> Value {
    let mut out = Map::new();
    for (k, v) in map {
        out.insert(k.clone(), Value::String(v.clone()));
    }
    Value::Table(out)
}

fn entries_value(entries: &[TableEntry]) -> Value {
    Value::Array(
        entries
            .iter()
            .map(|e| {
                let mut row = Map::new();
                row.insert("history".into(), Value::String(e.history.clone()));
                row.insert("masses".into(), mass_map_value(&e.masses));
                Value::Table(row)
            })
            .collect(),
    )
}

fn str_array(items: &[String]) -> Value {
    Value::Array(items.iter().map(|s| Value::String(s.clone())).collect())
}

/// Renders the document back to TOML. Parsing the result yields an equal
/// [`Doc`].
pub fn serialize_doc(doc: &Doc) -> String {
    let mut root = Map::new();
    root.insert("version".into(), Value::String(doc.version.clone()));
    let mut spaces = Map::new();
    spaces.insert("actions".into(), str_array(&doc.spaces.actions));
    spaces.insert("observations".into(), str_array(&doc.spaces.observations));
    spaces.insert("rewards".into(), str_array(&doc.spaces.rewards));
    root.insert("spaces".into(), Value::Table(spaces));
    if !doc.agents.is_empty() {
        let mut agents = Map::new();
        for (name, decl) in &doc.agents {
            let v = match decl {
                AgentDecl::Expr(e) => Value::String(e.clone()),
                AgentDecl::Table { default, entries } => {
                    let mut t = Map::new();
                    t.insert("kind".into(), Value::String("table".into()));
                    if let Some(d) = default {
                        t.insert("default".into(), mass_map_value(d));
                    }
                    t.insert("entries".into(), entries_value(entries));
                    Value::Table(t)
                }
            };
            agents.insert(name.clone(), v);
        }
        root.insert("agents".into(), Value::Table(agents));
    }
    if !doc.envs.is_empty() {
        let mut envs = Map::new();
        for (name, decl) in &doc.envs {
            let v = match decl {
                EnvDecl::Expr(e) => Value::String(e.clone()),
                EnvDecl::Table {
                    horizon,
                    default,
                    entries,
                } => {
                    let mut t = Map::new();
                    t.insert("kind".into(), Value::String("table".into()));
                    if let Some(h) = horizon {
                        t.insert("horizon".into(), Value::Integer(*h as i64));
                    }
                    if let Some(d) = default {
                        t.insert("default".into(), mass_map_value(d));
                    }
                    t.insert("entries".into(), entries_value(entries));
                    Value::Table(t)
                }
            };
            envs.insert(name.clone(), v);
        }
        root.insert("envs".into(), Value::Table(envs));
    }
    if !doc.measures.is_empty() {
        let mut measures = Map::new();
        for (name, decl) in &doc.measures {
            let mut t = Map::new();
            t.insert("weights".into(), str_array(&decl.weights));
            t.insert("envs".into(), str_array(&decl.envs));
            measures.insert(name.clone(), Value::Table(t));
        }
        root.insert("measures".into(), Value::Table(measures));
    }
    if !doc.checks.is_empty() {
        let mut checks = Map::new();
        for (name, decl) in &doc.checks {
            let mut t = Map::new();
            t.insert("op".into(), Value::String(decl.op.clone()));
            let mut put_list = |key: &str, v: &Option<Vec<String>>| {
                if let Some(items) = v {
                    t.insert(key.into(), str_array(items));
                }
            };
            put_list("weights", &decl.weights);
            put_list("agents", &decl.agents);
            put_list("battery", &decl.battery);
            put_list("inside", &decl.inside);
            put_list("outside", &decl.outside);
            put_list("members", &decl.members);
            let mut put_str = |key: &str, v: &Option<String>| {
                if let Some(s) = v {
                    t.insert(key.into(), Value::String(s.clone()));
                }
            };
            put_str("mixture", &decl.mixture);
            put_str("env", &decl.env);
            put_str("measure", &decl.measure);
            put_str("threshold", &decl.threshold);
            put_str("agent", &decl.agent);
            put_str("site", &decl.site);
            put_str("eps", &decl.eps);
            t.insert("t".into(), Value::Integer(decl.t as i64));
            if let Some(trials) = decl.trials {
                t.insert("trials".into(), Value::Integer(trials as i64));
            }
            if let Some(seed) = decl.seed {
                t.insert("seed".into(), Value::Integer(seed as i64));
            }
            checks.insert(name.clone(), Value::Table(t));
        }
        root.insert("checks".into(), Value::Table(checks));
    }
    toml::to_string_pretty(&Value::Table(root)).expect("document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_err(text: &str) -> ScenarioError {
        parse_scenario(text).map(|_| ()).unwrap_err()
    }

    const MINIMAL: &str = r#"
version = "1"

[spaces]
actions = ["a", "b"]
observations = ["x0"]
rewards = ["-1", "0", "1"]

[agents]
U = "uniform"
Db = "constant(b)"
M = "mix((1/3,2/3), (U,Db))"

[envs.E]
kind = "table"
horizon = 1

[[envs.E.entries]]
history = ""
masses = { "(x0,1)" = "1" }

[measures]
Y = { weights = ["1"], envs = ["E"] }

[checks.laws]
op = "mixture_laws"
weights = ["1/2", "1/2"]
agents = ["U", "Db"]
env = "E"
t = 2
"#;

    #[test]
    fn minimal_scenario_parses_and_resolves() {
        let sc = parse_scenario(MINIMAL).unwrap();
        assert_eq!(sc.agents.len(), 3);
        assert_eq!(sc.checks.len(), 1);
        assert_eq!(sc.checks[0].0, "laws");
    }

    #[test]
    fn round_trip_is_identical() {
        let sc = parse_scenario(MINIMAL).unwrap();
        let text = serialize_doc(&sc.doc);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(sc.doc, again.doc);
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        let err = parse_err("version = ");
        assert!(matches!(err, ScenarioError::Parse { .. }), "{err}");
    }

    #[test]
    fn unknown_field_is_a_schema_error_with_a_path() {
        let text = MINIMAL.replace("[checks.laws]", "[checks.laws]\nwat = 1");
        let err = parse_err(&text);
        match err {
            ScenarioError::Schema { path, .. } => assert_eq!(path, "checks.laws.wat"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn subnormal_measure_weights_are_a_validation_error_naming_the_measure() {
        let text = MINIMAL.replace(
            r#"Y = { weights = ["1"], envs = ["E"] }"#,
            r#"Y = { weights = ["1/2", "1/3"], envs = ["E", "E"] }"#,
        );
        let err = parse_err(&text);
        match err {
            ScenarioError::Validation { path, message } => {
                assert_eq!(path, "measures.Y");
                assert!(message.contains("5/6"), "{message}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn dual_without_negation_closure_is_a_validation_error() {
        let text = MINIMAL
            .replace(r#"rewards = ["-1", "0", "1"]"#, r#"rewards = ["0", "1"]"#)
            .replace(r#"Db = "constant(b)""#, r#"Db = "dual(U)""#);
        let err = parse_err(&text);
        match err {
            ScenarioError::Validation { path, message } => {
                assert_eq!(path, "agents.Db");
                assert!(message.contains("negation"), "{message}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn forward_references_resolve_and_cycles_are_rejected() {
        let forward = MINIMAL.replace(
            r#"U = "uniform""#,
            r#"First = "dual(Db)"
U = "uniform""#,
        );
        assert!(parse_scenario(&forward).is_ok());
        let cyclic = MINIMAL.replace(r#"U = "uniform""#, r#"U = "symmetrize(M)""#);
        let err = parse_err(&cyclic);
        match err {
            ScenarioError::Validation { message, .. } => {
                assert!(message.contains("circular"), "{message}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn unknown_names_in_checks_are_validation_errors() {
        let text = MINIMAL.replace(r#"agents = ["U", "Db"]"#, r#"agents = ["U", "Nope"]"#);
        let err = parse_err(&text);
        match err {
            ScenarioError::Validation { path, message } => {
                assert_eq!(path, "checks.laws");
                assert!(message.contains("Nope"), "{message}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }
}
