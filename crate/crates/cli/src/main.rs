//! `chru`: parse, run, unfold and transform CHR programs.
//!
//! Exit codes: 0 success, 1 error, 2 search budget reached or verdict
//! unknown, 4 answers differ or a certificate does not replay.

mod cert;
mod suite;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chr_unfold::analysis::{
    check_normal_confluence, check_normal_termination, diff_qa, CheckOutcome, DiffVerdict, GoalDiff, Target,
};
use chr_unfold::canon::rules_equivalent;
use chr_unfold::explore::Limits;
use chr_unfold::omega_t_prime::WtPrime;
use chr_unfold::replace::{
    can_safely_replace, can_weakly_replace, replace_sequence, replace_step, Mode, ReplacementReport, SharpClause,
};
use chr_unfold::syntax::{parse_goal, parse_program, print_goal, AnnotatedProgram, Goal, ParsedProgram};
use chr_unfold::unfold::{enum_unfold_sites, unf_all, unfold};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use cert::Record;

const EXIT_ERROR: u8 = 1;
const EXIT_INCOMPLETE: u8 = 2;
const EXIT_DIFFER: u8 = 4;

#[derive(Parser)]
#[command(name = "chru", version, about = "Unfolding and safe rule replacement for CHR programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Transition system used by `run` and `verify`.
    #[arg(long, global = true, value_enum, default_value_t = Semantics::WtPrime)]
    semantics: Semantics,
    /// Largest number of rule applications in one derivation.
    #[arg(long, global = true, visible_alias = "depth", default_value_t = 64)]
    max_depth: usize,
    /// Largest number of distinct states explored per goal.
    #[arg(long, global = true, default_value_t = 20_000)]
    max_states: usize,
    /// A goal; may be repeated.
    #[arg(long = "goal", global = true)]
    goal: Vec<String>,
    /// File with one goal per line.
    #[arg(long, global = true)]
    goals: Option<PathBuf>,
    /// Seed of the random goal suite used when no goal is given.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Size of the random goal suite.
    #[arg(long, global = true, default_value_t = 8)]
    random_goals: usize,
    /// JSON-lines output.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Semantics {
    Wt,
    WtPrime,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it back.
    Parse { file: PathBuf },
    /// Number the body atoms of a plain program.
    Annotate { file: PathBuf },
    /// Print the qualified answers of each goal.
    Run { file: PathBuf },
    /// Unfold the body of one rule.
    Unfold {
        file: PathBuf,
        #[arg(long)]
        rule: String,
        /// Only use this rule as unfolder.
        #[arg(long)]
        with: Option<String>,
        /// Only the site at these body identifiers, e.g. `1,2`.
        #[arg(long, value_delimiter = ',')]
        at: Vec<u64>,
        /// Print every distinct unfolded version.
        #[arg(long, conflicts_with_all = ["with", "at"])]
        all: bool,
    },
    /// Decide whether a rule may be replaced by its unfolded versions.
    CheckReplace {
        file: PathBuf,
        #[arg(long)]
        rule: String,
        #[arg(long)]
        weak: bool,
    },
    /// Replace rules by their unfolded versions and certify the result.
    Transform {
        file: PathBuf,
        /// Replace this rule once instead of running a sequence.
        #[arg(long, conflicts_with = "sequence")]
        rule: Option<String>,
        /// Longest replacement sequence.
        #[arg(long)]
        sequence: Option<usize>,
        #[arg(long)]
        weak: bool,
        /// Replace `--rule` even when the check refuses.
        #[arg(long, requires = "rule")]
        force: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Compare two programs on a goal suite, or replay a certificate.
    Verify {
        #[arg(required_unless_present = "certificate")]
        original: Option<PathBuf>,
        #[arg(required_unless_present = "certificate")]
        transformed: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["original", "transformed"])]
        certificate: Option<PathBuf>,
        /// Directory for per-goal JSON witnesses.
        #[arg(long, conflicts_with = "certificate")]
        witnesses: Option<PathBuf>,
    },
}

fn emit(kind: &str, fields: Value) {
    let mut obj = match fields {
        Value::Object(m) => m,
        other => [("value".to_string(), other)].into_iter().collect(),
    };
    obj.insert("schema_version".into(), json!(cert::SCHEMA_VERSION));
    obj.insert("kind".into(), json!(kind));
    println!("{}", Value::Object(obj));
}

fn load(path: &Path) -> Result<ParsedProgram> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&text).with_context(|| format!("parsing {}", path.display()))
}

fn rule_index(p: &AnnotatedProgram, name: &str) -> Result<usize> {
    match p.rules.iter().position(|r| &*r.name == name) {
        Some(i) => Ok(i),
        None => bail!("no rule named {name}"),
    }
}

fn same_program(a: &AnnotatedProgram, b: &AnnotatedProgram) -> bool {
    a.rules.len() == b.rules.len() && a.rules.iter().zip(&b.rules).all(|(x, y)| rules_equivalent(x, y))
}

impl Cli {
    fn limits(&self) -> Result<Limits> {
        if self.max_depth == 0 || self.max_states == 0 {
            bail!("--max-depth and --max-states must be positive");
        }
        Ok(Limits { max_depth: self.max_depth, max_states: self.max_states })
    }

    fn suite(&self, program: &AnnotatedProgram) -> Result<Vec<Goal>> {
        let goals = suite::explicit(&self.goal, self.goals.as_deref())?;
        if !goals.is_empty() {
            return Ok(goals);
        }
        let goals = suite::random(program, self.seed, self.random_goals);
        if !self.json {
            eprintln!("% no goal given; using {} random goals (seed {})", goals.len(), self.seed);
        }
        Ok(goals)
    }

    fn target<'a>(&self, parsed: &'a ParsedProgram, annotated: &'a AnnotatedProgram) -> Result<Target<'a>> {
        match (self.semantics, parsed) {
            (Semantics::Wt, ParsedProgram::Plain(p)) => Ok(Target::Wt(p)),
            (Semantics::Wt, ParsedProgram::Annotated(_)) => bail!("--semantics wt needs a program without identifiers"),
            (Semantics::WtPrime, _) => Ok(Target::WtPrime(annotated)),
        }
    }
}

fn cmd_parse(cli: &Cli, file: &Path, annotate: bool) -> Result<u8> {
    let parsed = load(file)?;
    let (text, annotated) = if annotate {
        (parsed.into_annotated().to_string(), true)
    } else {
        (parsed.to_string(), matches!(parsed, ParsedProgram::Annotated(_)))
    };
    if cli.json {
        let rules: Vec<&str> = text.lines().collect();
        emit("program", json!({ "annotated": annotated, "rules": rules }));
    } else {
        print!("{text}");
    }
    Ok(0)
}

fn cmd_run(cli: &Cli, file: &Path) -> Result<u8> {
    let parsed = load(file)?;
    let annotated = parsed.clone().into_annotated();
    let target = cli.target(&parsed, &annotated)?;
    let goals = cli.suite(&annotated)?;
    let limits = cli.limits()?;
    let mut code = 0;
    for g in &goals {
        let qa = target.qualified_answers(g, limits);
        let lines = qa.answers.lines();
        if qa.truncated {
            code = EXIT_INCOMPLETE;
        }
        if cli.json {
            emit(
                "answers",
                json!({ "goal": print_goal(g), "answers": lines, "truncated": qa.truncated, "states": qa.states }),
            );
            continue;
        }
        if goals.len() > 1 {
            println!("?- {}", print_goal(g));
        }
        for l in &lines {
            println!("{l}");
        }
        if qa.truncated {
            eprintln!("% {}: search budget reached after {} states", print_goal(g), qa.states);
        }
    }
    Ok(code)
}

fn cmd_unfold(cli: &Cli, file: &Path, rule: &str, with: Option<&str>, at: &[u64], all: bool) -> Result<u8> {
    let p = load(file)?.into_annotated();
    let r = &p.rules[rule_index(&p, rule)?];
    let mut results = Vec::new();
    if all {
        results.extend(unf_all(&p, r).into_iter().map(|u| (None, Vec::new(), u)));
    } else {
        for site in enum_unfold_sites(&p, r) {
            if with.is_some_and(|w| *site.unfolder.name != *w) || (!at.is_empty() && site.ids() != at) {
                continue;
            }
            results.push((Some(site.unfolder.name.to_string()), site.ids(), unfold(&site)));
        }
    }
    if results.is_empty() && !cli.json {
        eprintln!("% no unfolding site for {rule}");
    }
    for (unfolder, ids, u) in results {
        if cli.json {
            emit("unfolded", json!({ "rule": rule, "unfolder": unfolder, "ids": ids, "result": u.to_string() }));
        } else {
            println!("{u}");
        }
    }
    Ok(0)
}

fn print_report(rep: &ReplacementReport) {
    let mode = match rep.mode {
        Mode::Safe => "safe",
        Mode::Weak => "weak",
    };
    println!("{}: {:?} ({mode} replacement)", rep.rule, rep.verdict);
    for e in &rep.u_plus {
        println!("U+: {} at {:?}", e.rule, e.ids);
    }
    for e in &rep.u_sharp {
        let clause = match e.clause {
            SharpClause::A => "a",
            SharpClause::B => "b",
        };
        println!("U#: {} clause ({clause}) at {:?}, head positions {:?}, witness {}", e.rule, e.ids, e.head_positions, e.witness);
    }
    for g in &rep.guard_checks {
        println!("unfolded: {} [guard {}]", g.unfolded, if g.equivalent { "kept" } else { "changed" });
    }
    for r in &rep.reasons {
        println!("reason: {r}");
    }
}

fn cmd_check(cli: &Cli, file: &Path, rule: &str, weak: bool) -> Result<u8> {
    let p = load(file)?.into_annotated();
    let i = rule_index(&p, rule)?;
    let rep = if weak { can_weakly_replace(&p, i) } else { can_safely_replace(&p, i) };
    if cli.json {
        emit("replacement_report", serde_json::to_value(&rep)?);
    } else {
        print_report(&rep);
    }
    Ok(0)
}

fn tally(diffs: &[GoalDiff]) -> (usize, usize, usize) {
    let count = |v| diffs.iter().filter(|d| d.verdict == v).count();
    (count(DiffVerdict::Equal), count(DiffVerdict::Differ), count(DiffVerdict::Unknown))
}

fn diff_code(diffs: &[GoalDiff]) -> u8 {
    match tally(diffs) {
        (_, d, _) if d > 0 => EXIT_DIFFER,
        (_, _, u) if u > 0 => EXIT_INCOMPLETE,
        _ => 0,
    }
}

fn print_diffs(diffs: &[GoalDiff]) {
    for d in diffs {
        println!("{}: {:?}", d.goal, d.verdict);
        for a in &d.only_left {
            println!("  only before: {a}");
        }
        for a in &d.only_right {
            println!("  only after: {a}");
        }
    }
}

fn default_out(file: &Path) -> PathBuf {
    let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into());
    file.with_file_name(format!("{stem}.unf.chr"))
}

struct TransformArgs<'a> {
    rule: Option<&'a str>,
    sequence: Option<usize>,
    weak: bool,
    force: bool,
    out: Option<&'a Path>,
    certificate: Option<&'a Path>,
}

fn cmd_transform(cli: &Cli, file: &Path, args: TransformArgs) -> Result<u8> {
    let original = load(file)?.into_annotated();
    let goals = cli.suite(&original)?;
    let limits = cli.limits()?;
    let mode = if args.weak { Mode::Weak } else { Mode::Safe };
    let certify = |p: &AnnotatedProgram| {
        check_normal_termination(&WtPrime(p), &goals, limits).holds()
            && check_normal_confluence(&WtPrime(p), &goals, limits).holds()
    };
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let result = if let Some(rule) = args.rule {
        let i = rule_index(&original, rule)?;
        let certified = mode == Mode::Safe || certify(&original);
        let step = replace_step(&original, i, mode, args.force, certified)?;
        warnings.extend(step.warnings);
        records.push(step_record(&step.report, !step.report.permits(mode)));
        step.program
    } else {
        let seq = replace_sequence(&original, mode, args.sequence.unwrap_or(16), certify);
        warnings.extend(seq.warnings);
        records.extend(seq.reports.iter().map(|r| step_record(r, false)));
        seq.programs.last().cloned().unwrap_or_default()
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let out = args.out.map(Path::to_path_buf).unwrap_or_else(|| default_out(file));
    if out == file {
        bail!("refusing to overwrite the input program");
    }
    let cert_path = args.certificate.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("cert.jsonl"));
    std::fs::write(&out, result.to_string()).with_context(|| format!("writing {}", out.display()))?;

    let diffs = diff_qa(Target::WtPrime(&original), Target::WtPrime(&result), &goals, limits);
    let (equal, differ, unknown) = tally(&diffs);
    let mut all = vec![Record::Header {
        original_path: file.display().to_string(),
        transformed_path: out.display().to_string(),
        original: original.to_string(),
        transformed: result.to_string(),
        weak: args.weak,
        max_depth: limits.max_depth,
        max_states: limits.max_states,
        seed: cli.seed,
    }];
    all.append(&mut records.clone());
    all.extend(diffs.iter().map(goal_record));
    all.push(Record::Summary { equal, differ, unknown });
    cert::write(&cert_path, &all)?;

    if cli.json {
        emit(
            "transform",
            json!({
                "steps": records.len(),
                "out": out.display().to_string(),
                "certificate": cert_path.display().to_string(),
                "equal": equal, "differ": differ, "unknown": unknown,
            }),
        );
    } else {
        for (n, r) in records.iter().enumerate() {
            if let Record::Step { rule, verdict, forced, .. } = r {
                println!("step {}: replaced {rule} ({verdict}{})", n + 1, if *forced { ", forced" } else { "" });
            }
        }
        print_diffs(&diffs);
        println!("wrote {} and {}", out.display(), cert_path.display());
    }
    Ok(diff_code(&diffs))
}

fn step_record(rep: &ReplacementReport, forced: bool) -> Record {
    Record::Step { rule: rep.rule.clone(), rule_index: rep.rule_index, verdict: format!("{:?}", rep.verdict), forced }
}

fn goal_record(d: &GoalDiff) -> Record {
    Record::Goal {
        goal: d.goal.clone(),
        verdict: format!("{:?}", d.verdict),
        original: d.left.clone(),
        transformed: d.right.clone(),
    }
}

#[derive(Serialize)]
struct GoalReport {
    goal: String,
    termination: [CheckOutcome; 2],
    confluence: [CheckOutcome; 2],
    answers: GoalDiff,
}

fn label(o: &CheckOutcome) -> &'static str {
    match o {
        CheckOutcome::Holds => "holds",
        CheckOutcome::FailsWith(_) => "fails",
        CheckOutcome::Unknown(_) => "unknown",
    }
}

/// Termination, confluence and answers of both programs, one goal per thread.
fn goal_reports(a: Target, b: Target, goals: &[Goal], limits: Limits) -> Vec<GoalReport> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = goals
            .iter()
            .map(|g| {
                scope.spawn(move || {
                    let one = std::slice::from_ref(g);
                    GoalReport {
                        goal: print_goal(g),
                        termination: [a.normal_termination(one, limits), b.normal_termination(one, limits)],
                        confluence: [a.normal_confluence(one, limits), b.normal_confluence(one, limits)],
                        answers: diff_qa(a, b, one, limits).remove(0),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("goal check panicked")).collect()
    })
}

fn cmd_verify(cli: &Cli, original: &Path, transformed: &Path, witnesses: Option<&Path>) -> Result<u8> {
    let (a, b) = (load(original)?, load(transformed)?);
    let (aa, ba) = (a.clone().into_annotated(), b.clone().into_annotated());
    let goals = cli.suite(&aa)?;
    let reports = goal_reports(cli.target(&a, &aa)?, cli.target(&b, &ba)?, &goals, cli.limits()?);
    if let Some(dir) = witnesses {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (n, r) in reports.iter().enumerate() {
            let path = dir.join(format!("goal-{}.json", n + 1));
            std::fs::write(&path, serde_json::to_string_pretty(r)? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if cli.json {
        for r in &reports {
            emit("goal_report", serde_json::to_value(r)?);
        }
    } else {
        let width = reports.iter().map(|r| r.goal.len()).chain([4]).max().unwrap_or(4);
        println!("{:width$}  {:17}  {:17}  answers", "goal", "termination", "confluence");
        for r in &reports {
            let pair = |o: &[CheckOutcome; 2]| format!("{}/{}", label(&o[0]), label(&o[1]));
            println!("{:width$}  {:17}  {:17}  {:?}", r.goal, pair(&r.termination), pair(&r.confluence), r.answers.verdict);
        }
        let diffs: Vec<GoalDiff> = reports.iter().map(|r| r.answers.clone()).collect();
        print_diffs(&diffs.iter().filter(|d| d.verdict != DiffVerdict::Equal).cloned().collect::<Vec<_>>());
        if let Some(dir) = witnesses {
            println!("witnesses in {}", dir.display());
        }
    }
    let diffs: Vec<GoalDiff> = reports.into_iter().map(|r| r.answers).collect();
    Ok(diff_code(&diffs))
}

/// Replays the recorded steps from the original program and recomputes
/// every recorded answer set.
fn cmd_replay(cli: &Cli, path: &Path) -> Result<u8> {
    let records = cert::read(path)?;
    let Some(Record::Header { transformed_path, original, transformed, weak, max_depth, max_states, .. }) =
        records.first()
    else {
        bail!("{}: missing header", path.display());
    };
    let parse = |t: &str| -> Result<AnnotatedProgram> { Ok(parse_program(t)?.into_annotated()) };
    let (start, end) = (parse(original)?, parse(transformed)?);
    let limits = Limits { max_depth: *max_depth, max_states: *max_states };
    let mode = if *weak { Mode::Weak } else { Mode::Safe };
    let mut problems = Vec::new();

    let mut current = start.clone();
    for r in &records {
        if let Record::Step { rule, rule_index, forced, .. } = r {
            match current.rules.get(*rule_index) {
                Some(x) if &*x.name == rule => {}
                _ => problems.push(format!("step on {rule}: no such rule at position {rule_index}")),
            }
            match replace_step(&current, *rule_index, mode, *forced, true) {
                Ok(step) => current = step.program,
                Err(e) => problems.push(format!("step on {rule}: {e}")),
            }
        }
    }
    if !same_program(&current, &end) {
        problems.push("replayed steps do not produce the recorded program".into());
    }
    let on_disk = [PathBuf::from(transformed_path), path.with_file_name(Path::new(transformed_path).file_name().unwrap_or_default())]
        .into_iter()
        .find(|p| p.is_file());
    if let Some(p) = on_disk {
        if !same_program(&load(&p)?.into_annotated(), &end) {
            problems.push(format!("{} differs from the certified program", p.display()));
        }
    }

    let mut diffs = Vec::new();
    for r in &records {
        if let Record::Goal { goal, verdict, original, transformed } = r {
            let g = parse_goal(goal).with_context(|| format!("goal {goal:?}"))?;
            let d = diff_qa(Target::WtPrime(&start), Target::WtPrime(&end), &[g], limits).remove(0);
            if format!("{:?}", d.verdict) != *verdict || d.left != *original || d.right != *transformed {
                problems.push(format!("{goal}: recorded {verdict}, recomputed {:?}", d.verdict));
            }
            diffs.push(d);
        }
    }

    if cli.json {
        emit("verification", json!({ "certificate": path.display().to_string(), "goals": diffs.len(), "problems": problems }));
    } else {
        print_diffs(&diffs);
        for p in &problems {
            println!("problem: {p}");
        }
        println!("{}", if problems.is_empty() { "certificate replays" } else { "certificate does not replay" });
    }
    Ok(if problems.is_empty() { diff_code(&diffs) } else { EXIT_DIFFER })
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Parse { file } => cmd_parse(cli, file, false),
        Command::Annotate { file } => cmd_parse(cli, file, true),
        Command::Run { file } => cmd_run(cli, file),
        Command::Unfold { file, rule, with, at, all } => cmd_unfold(cli, file, rule, with.as_deref(), at, *all),
        Command::CheckReplace { file, rule, weak } => cmd_check(cli, file, rule, *weak),
        Command::Transform { file, rule, sequence, weak, force, out, certificate } => cmd_transform(
            cli,
            file,
            TransformArgs {
                rule: rule.as_deref(),
                sequence: *sequence,
                weak: *weak,
                force: *force,
                out: out.as_deref(),
                certificate: certificate.as_deref(),
            },
        ),
        Command::Verify { certificate: Some(c), .. } => cmd_replay(cli, c),
        Command::Verify { original: Some(a), transformed: Some(b), witnesses, .. } => {
            cmd_verify(cli, a, b, witnesses.as_deref())
        }
        Command::Verify { .. } => bail!("verify needs two programs or --certificate"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
