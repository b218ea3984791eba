//! Command-line front end. Subcommands: enumerate, reduce (with optional
//! fragment-targeted variant), check, derive, witness, hspace.
//!
//! Exit codes: 0 success / redundant / target-reduction found; 1 negative
//! check, underivable clause or target-reduction failure; 2 usage errors;
//! 3 resource guard or timeout.

use crate::clause::{parse, Metarule};
use crate::engine::{Guard, Limits};
use crate::fragments::{enumerate, Constraint, EnumerateError, FragmentSpec};
use crate::reduction::{self, ReductionOptions, ReductionRelation};
use crate::resolution::derives_k;
use crate::theory;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::io::Write;
use std::time::{Duration, Instant};

#[derive(Parser, Debug)]
#[command(name = "metareduce", version, about = "Enumerate and logically reduce metarule fragments", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RelationArg {
    S,
    E,
    D,
}

#[derive(Args, Debug)]
struct FragmentArgs {
    /// Syntactic constraint of the fragment
    #[arg(long, default_value = "connected")]
    constraint: Constraint,
    /// Comma-separated literal arities, e.g. 1,2
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    arities: Vec<u8>,
    /// Maximum number of body literals
    #[arg(long, required = true)]
    max_body: usize,
}

impl FragmentArgs {
    fn spec(&self) -> FragmentSpec {
        FragmentSpec::new(self.constraint, self.arities.iter().copied(), self.max_body)
    }
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Resolution depth bound for entailment and derivation checks
    #[arg(long, default_value_t = 7)]
    depth: usize,
    /// Extra body-size slack for the entailment closure (trades time for completeness)
    #[arg(long, default_value_t = 0)]
    slack: usize,
    /// Wall-clock limit in seconds; 0 means none
    #[arg(long, default_value_t = 0)]
    timeout: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write output to a file instead of standard output
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

impl CommonArgs {
    fn limits(&self) -> Limits {
        Limits {
            deadline: (self.timeout > 0).then(|| Instant::now() + Duration::from_secs(self.timeout)),
            ..Limits::default()
        }
    }

    fn options(&self) -> ReductionOptions {
        ReductionOptions { slack: self.slack, limits: self.limits() }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Enumerate all metarules of a fragment, up to variable renaming
    Enumerate {
        #[command(flatten)]
        fragment: FragmentArgs,
        /// Print only the number of metarules
        #[arg(long)]
        count_only: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Reduce a fragment or a metarule file under a redundancy relation
    Reduce {
        #[command(flatten)]
        relation: RelationSpec,
        /// Reduce the clauses of this file instead of an enumerated fragment
        #[arg(long, conflicts_with_all = ["constraint", "arities", "max_body"])]
        set: Option<std::path::PathBuf>,
        #[arg(long, default_value = "connected")]
        constraint: Constraint,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        arities: Vec<u8>,
        #[arg(long)]
        max_body: Option<usize>,
        /// Run the fragment-targeted variant with this body bound on the target
        #[arg(long)]
        target_max_body: Option<usize>,
        /// Target fragment constraint (defaults to none)
        #[arg(long, default_value = "none")]
        target_constraint: Constraint,
        /// Target fragment arities (defaults to the input arities)
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        target_arities: Vec<u8>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Is a clause redundant with respect to a metarule file?
    Check {
        #[command(flatten)]
        relation: RelationSpec,
        #[arg(long, required = true)]
        set: std::path::PathBuf,
        /// The clause, in metarule syntax
        #[arg(long, required = true)]
        clause: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Search a bounded derivation of a clause from a metarule file
    Derive {
        #[arg(long, required = true)]
        set: std::path::PathBuf,
        #[arg(long, required = true)]
        clause: String,
        /// Print every derivation step
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print a named witness clause
    Witness {
        /// ci | ca | cim | datalog-s | singleton-s
        #[arg(long, required = true)]
        name: String,
        /// Parameter of the witness family (ignored for ci)
        #[arg(long)]
        param: Option<u32>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Hypothesis-space size (p^(m+1) k)^n
    Hspace {
        #[arg(long, required = true)]
        predicates: u64,
        #[arg(long, required = true)]
        metarules: u64,
        #[arg(long, required = true)]
        max_body: u32,
        #[arg(long, required = true)]
        clauses: u32,
    },
}

#[derive(Args, Debug)]
struct RelationSpec {
    /// Redundancy relation: s (subsumption), e (entailment), d (derivation)
    #[arg(long, value_enum, required = true)]
    relation: RelationArg,
}

impl RelationSpec {
    fn rel(&self, depth: usize) -> ReductionRelation {
        match self.relation {
            RelationArg::S => ReductionRelation::s(),
            RelationArg::E => ReductionRelation::e(depth),
            RelationArg::D => ReductionRelation::d(depth),
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

enum CmdError {
    Usage(String),
    Guard(Guard),
}

impl From<Guard> for CmdError {
    fn from(g: Guard) -> CmdError {
        CmdError::Guard(g)
    }
}

impl From<EnumerateError> for CmdError {
    fn from(e: EnumerateError) -> CmdError {
        match e {
            EnumerateError::UnsupportedSpec(s) => CmdError::Usage(s),
            EnumerateError::Guard(g) => CmdError::Guard(g),
        }
    }
}

/// Dispatch a command line; deterministic output for identical inputs and
/// flags.
pub fn run(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    crate::init_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(CmdError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(CmdError::Guard(g)) => {
            let _ = writeln!(stderr, "error: {g}");
            EXIT_GUARD
        }
    }
}

fn read_theory(path: &std::path::Path) -> Result<Vec<Metarule>, CmdError> {
    let content = std::fs::read_to_string(path).map_err(|e| CmdError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let m = parse(line).map_err(|e| CmdError::Usage(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        out.push(m);
    }
    Ok(out)
}

fn parse_clause(text: &str) -> Result<Metarule, CmdError> {
    parse(text).map_err(|e| CmdError::Usage(format!("--clause: {e}")))
}

fn emit(common: &CommonArgs, stdout: &mut dyn Write, body: &str) -> Result<(), CmdError> {
    match &common.out {
        Some(path) => std::fs::write(path, body).map_err(|e| CmdError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let _ = write!(stdout, "{body}");
            Ok(())
        }
    }
}

fn clause_lines(rules: &[Metarule]) -> String {
    let mut s = String::new();
    for m in rules {
        s.push_str(m.text());
        s.push('\n');
    }
    s
}

fn dispatch(cmd: Cmd, stdout: &mut dyn Write) -> Result<i32, CmdError> {
    match cmd {
        Cmd::Enumerate { fragment, count_only, common } => {
            let spec = fragment.spec();
            let rules = enumerate(&spec, &common.limits())?;
            let body = match (count_only, common.format) {
                (true, Format::Text) => format!("{}\n", rules.len()),
                (false, Format::Text) => clause_lines(&rules),
                (count, Format::Json) => {
                    let mut v = json!({ "fragment": spec.label(), "count": rules.len() });
                    if !count {
                        v["metarules"] = json!(rules.iter().map(|m| m.text()).collect::<Vec<_>>());
                    }
                    format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
                }
            };
            emit(&common, stdout, &body)?;
            Ok(EXIT_OK)
        }
        Cmd::Reduce {
            relation,
            set,
            constraint,
            arities,
            max_body,
            target_max_body,
            target_constraint,
            target_arities,
            common,
        } => {
            let rel = relation.rel(common.depth);
            let opts = common.options();
            let (label, theory, input_arities) = match set {
                Some(path) => {
                    let theory = read_theory(&path)?;
                    let arities: Vec<u8> = {
                        let mut a: Vec<u8> = theory
                            .iter()
                            .flat_map(|m| std::iter::once(m.head().arity()).chain(m.body().iter().map(|l| l.arity())))
                            .map(|a| a as u8)
                            .collect();
                        a.sort_unstable();
                        a.dedup();
                        a
                    };
                    (path.display().to_string(), theory, arities)
                }
                None => {
                    let (Some(max_body), false) = (max_body, arities.is_empty()) else {
                        return Err(CmdError::Usage("either --set FILE or --arities and --max-body are required".into()));
                    };
                    let spec = FragmentSpec::new(constraint, arities.iter().copied(), max_body);
                    let theory = enumerate(&spec, &opts.limits)?;
                    (spec.label(), theory, arities.clone())
                }
            };
            let outcome = match target_max_body {
                Some(tm) => {
                    let ta = if target_arities.is_empty() { input_arities } else { target_arities };
                    let target = FragmentSpec::new(target_constraint, ta, tm);
                    match reduction::mreduce(&label, &theory, rel, &target, &opts)? {
                        Some(o) => o,
                        None => {
                            let body = match common.format {
                                Format::Text => format!("not {}-reducible to {}\n", rel.letter(), target.label()),
                                Format::Json => format!(
                                    "{}\n",
                                    serde_json::to_string_pretty(&json!({
                                        "input": label,
                                        "relation": rel.letter(),
                                        "depth": rel.depth,
                                        "target": target.label(),
                                        "reducible": false,
                                    }))
                                    .unwrap()
                                ),
                            };
                            emit(&common, stdout, &body)?;
                            return Ok(EXIT_NEGATIVE);
                        }
                    }
                }
                None => reduction::reduce(&label, &theory, rel, &opts)?,
            };
            let body = match common.format {
                Format::Text => clause_lines(&outcome.kept),
                Format::Json => format!("{}\n", serde_json::to_string_pretty(&outcome.report).unwrap()),
            };
            emit(&common, stdout, &body)?;
            Ok(EXIT_OK)
        }
        Cmd::Check { relation, set, clause, common } => {
            let rel = relation.rel(common.depth);
            let opts = common.options();
            let c = parse_clause(&clause)?;
            let theory: Vec<Metarule> = read_theory(&set)?.into_iter().filter(|m| *m != c).collect();
            let redundant = reduction::is_redundant(&theory, &c, rel, &opts)?;
            let body = match common.format {
                Format::Text => format!("{}\n", if redundant { "redundant" } else { "not redundant" }),
                Format::Json => format!(
                    "{}\n",
                    serde_json::to_string_pretty(&json!({
                        "clause": c.text(),
                        "relation": rel.letter(),
                        "depth": rel.depth,
                        "redundant": redundant,
                    }))
                    .unwrap()
                ),
            };
            emit(&common, stdout, &body)?;
            Ok(if redundant { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Cmd::Derive { set, clause, trace, common } => {
            let c = parse_clause(&clause)?;
            let theory = read_theory(&set)?;
            let found = derives_k(&theory, &c, common.depth, &common.limits())?;
            match found {
                Some(t) => {
                    let body = match (common.format, trace) {
                        (Format::Json, _) | (_, true) => format!("{}\n", serde_json::to_string_pretty(&t.to_json()).unwrap()),
                        (Format::Text, false) => format!("derivable in {} steps\n", t.depth()),
                    };
                    emit(&common, stdout, &body)?;
                    Ok(EXIT_OK)
                }
                None => {
                    emit(&common, stdout, "not derivable\n")?;
                    Ok(EXIT_NEGATIVE)
                }
            }
        }
        Cmd::Witness { name, param, common } => {
            let need = |p: Option<u32>| p.ok_or_else(|| CmdError::Usage("--param is required for this witness".into()));
            let w = match name.as_str() {
                "ci" => theory::witness_ci(),
                "ca" => theory::witness_ca(need(param)?).map_err(|e| CmdError::Usage(e.to_string()))?,
                "cim" => theory::witness_cim(need(param)?).map_err(|e| CmdError::Usage(e.to_string()))?,
                "datalog-s" => theory::witness_datalog_s(need(param)?).map_err(|e| CmdError::Usage(e.to_string()))?,
                "singleton-s" => theory::witness_singleton_s(need(param)?).map_err(|e| CmdError::Usage(e.to_string()))?,
                other => return Err(CmdError::Usage(format!("unknown witness '{other}' (expected ci|ca|cim|datalog-s|singleton-s)"))),
            };
            let body = match common.format {
                Format::Text => format!("{}\n", w.text()),
                Format::Json => format!(
                    "{}\n",
                    serde_json::to_string_pretty(&json!({"name": name, "param": param, "metarule": w.text(), "body_size": w.body_size()})).unwrap()
                ),
            };
            emit(&common, stdout, &body)?;
            Ok(EXIT_OK)
        }
        Cmd::Hspace { predicates, metarules, max_body, clauses } => {
            let n = theory::hypothesis_space_size(predicates, metarules, max_body, clauses);
            let _ = writeln!(stdout, "{n}");
            Ok(EXIT_OK)
        }
    }
}
