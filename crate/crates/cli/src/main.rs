use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

use relforge::config::{load_tree, CacheStore, ConfigTree, FileFetcher};
use relforge::defaults::default_tree;
use relforge::issue::{
    apply_status_transition, change_type_for, compile_forms, process_submission, protocol_template,
    refresh_form_choices, FormDefinition, Submission, Ticket,
};
use relforge::ledger::{append_entry, render_release_notes, ChangelogEntry, Ledger, NotesTemplate, LEDGER_FILE};
use relforge::license::{
    annotate_source, generate_license_docs, parse_license_expr, validate_license_expr, LicenseRegistry,
};
use relforge::orchestrator::{dispatch, parse_event_log, replay, RepoEvent};
use relforge::pipeline::{run_pipeline, PipelineContext};
use relforge::report::ValidationReport;
use relforge::vcs::{BranchKind, RepoState};
use relforge::version::{
    bump, compare, finalize_version, next_dev_version, next_prerelease_version, parse_version, ChangeType, Phase,
    TagHistory,
};

#[derive(Parser)]
#[command(name = "relforge", version, about = "Release automation from a declarative control center")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Control-center directory; the bundled defaults are used when omitted.
    #[arg(long, global = true)]
    control: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the control center and regenerate project files.
    Sync(PipelineArgs),
    /// Validate the control center without writing anything.
    Validate(PipelineArgs),
    /// Parse, compare and compute versions.
    #[command(subcommand)]
    Version(VersionCmd),
    /// Compile issue forms and process tickets.
    #[command(subcommand)]
    Issue(IssueCmd),
    /// Maintain the changelog ledger.
    #[command(subcommand)]
    Changelog(ChangelogCmd),
    /// Parse, validate and apply license expressions.
    #[command(subcommand)]
    License(LicenseCmd),
    /// Plan the tasks for one event, or replay an event log.
    Dispatch(DispatchArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Project root that receives generated files.
    #[arg(long, default_value = ".")]
    workspace: PathBuf,
    /// Repository state as JSON; a single tag-less main branch when omitted.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Cache directory for inherited documents.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Do not fetch inherited documents; rely on the cache.
    #[arg(long)]
    offline: bool,
    /// Current time in seconds since the epoch, for cache freshness.
    #[arg(long)]
    now: Option<u64>,
}

#[derive(Subcommand)]
enum VersionCmd {
    /// Parse and print a version in canonical form.
    Parse { version: String },
    /// Compare two versions.
    Compare { left: String, right: String },
    /// Bump a release triple.
    Bump {
        release: String,
        #[arg(long = "type")]
        change: String,
    },
    /// Next developmental release for an issue.
    Next {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        issue: u64,
        /// Change type or issue type id.
        #[arg(long = "type")]
        change: String,
        /// Target branch; defaults to the issue branch's target, else main.
        #[arg(long)]
        target: Option<String>,
    },
    /// Next prerelease for an issue.
    Prerelease {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        issue: u64,
        #[arg(long)]
        phase: String,
    },
    /// Final release for a candidate merged into a target branch.
    Finalize {
        candidate: String,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "main")]
        target: String,
        #[arg(long = "type")]
        change: String,
    },
}

#[derive(Subcommand)]
enum IssueCmd {
    /// Compile issue forms from the control center.
    CompileForms {
        #[arg(long)]
        state: Option<PathBuf>,
        /// Write the forms under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a submission into a ticket and protocol document.
    Process {
        #[arg(long)]
        submission: PathBuf,
        /// Repository state used for the version choices.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Apply a status label to a ticket.
    Transition {
        #[arg(long)]
        ticket: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Subcommand)]
enum ChangelogCmd {
    /// Append an entry to the ledger file.
    Append {
        #[arg(long, default_value = LEDGER_FILE)]
        ledger: PathBuf,
        #[arg(long)]
        entry: PathBuf,
    },
    /// Render release notes for one version.
    Render {
        #[arg(long, default_value = LEDGER_FILE)]
        ledger: PathBuf,
        #[arg(long)]
        version: String,
    },
}

#[derive(Subcommand)]
enum LicenseCmd {
    /// Parse an expression and print it in canonical form.
    Parse { expression: String },
    /// Check an expression against the license registry.
    Validate { expression: String },
    /// Write license documents and identifier comments.
    Apply {
        expression: String,
        #[arg(long, default_value = ".")]
        workspace: PathBuf,
        /// Source files to annotate.
        files: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct DispatchArgs {
    #[arg(long, conflicts_with = "replay", required_unless_present = "replay")]
    event: Option<PathBuf>,
    /// JSON-lines event log to replay in order.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    state: PathBuf,
    /// Write the final repository state here after a replay.
    #[arg(long, requires = "replay")]
    out_state: Option<PathBuf>,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    fn finding(error: impl Display) -> Self {
        Self { code: 1, error: anyhow!("{error}") }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::usage(error)
    }
}

type Outcome = Result<u8, Failure>;

struct Ctx {
    json: bool,
    control: Option<PathBuf>,
}

impl Ctx {
    fn tree(&self) -> Result<ConfigTree, Failure> {
        match &self.control {
            Some(dir) => load_tree(dir).map_err(Failure::usage),
            None => Ok(default_tree()),
        }
    }

    /// Tree after inheritance, augmentation and rendering, without network.
    fn prepared_tree(&self, state: &RepoState) -> Result<ConfigTree, Failure> {
        let mut ctx = PipelineContext::offline();
        ctx.state = state.clone();
        let fetcher = self.control.as_ref().map(|d| FileFetcher::new(d.clone()));
        ctx.fetcher = fetcher.as_ref().map(|f| f as _);
        relforge::pipeline::prepare_tree(&self.tree()?, &ctx).map_err(Failure::finding)
    }

    fn emit(&self, value: Json, text: impl Display) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(&value).expect("json serializes"));
        } else {
            let text = text.to_string();
            if !text.is_empty() {
                println!("{}", text.trim_end());
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(Failure::usage)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("{} is not valid", path.display()))
        .map_err(Failure::usage)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::usage(anyhow!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))
}

fn load_state(path: &Path) -> Result<RepoState, Failure> {
    RepoState::from_json_str(&read(path)?).map_err(Failure::usage)
}

fn report_text(report: &ValidationReport) -> String {
    report.findings.iter().map(|f| format!("{f}\n")).collect()
}

fn exit_for(report: &ValidationReport) -> u8 {
    u8::from(report.has_errors())
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn change_type(tree: &ConfigTree, text: &str) -> Result<ChangeType, Failure> {
    text.parse()
        .ok()
        .or_else(|| change_type_for(tree, text))
        .ok_or_else(|| Failure::usage(anyhow!("unknown change or issue type {text:?}")))
}

fn run_pipeline_cmd(ctx: &Ctx, args: &PipelineArgs, write_files: bool) -> Outcome {
    let raw = ctx.tree()?;
    let mut pctx = PipelineContext::offline();
    if let Some(state) = &args.state {
        pctx.state = load_state(state)?;
    }
    let cache = CacheStore::new(args.cache.clone().unwrap_or_else(|| args.workspace.join(".relforge/cache")));
    let fetcher = ctx.control.as_ref().map(|d| FileFetcher::new(d.clone()));
    pctx.cache = Some(&cache);
    if !args.offline {
        pctx.fetcher = fetcher.as_ref().map(|f| f as _);
    }
    pctx.now = args.now.unwrap_or_else(now);
    let outcome = run_pipeline(&raw, write_files.then_some(args.workspace.as_path()), &pctx).map_err(Failure::finding)?;
    let mut text = report_text(&outcome.report);
    if let Some(sync) = &outcome.sync {
        for (verb, paths) in [
            ("created", &sync.created),
            ("updated", &sync.updated),
            ("deleted", &sync.deleted),
        ] {
            for p in paths {
                text.push_str(&format!("{verb} {p}\n"));
            }
        }
        text.push_str(&format!("{} file(s) changed, {} unchanged\n", sync.changed(), sync.unchanged.len()));
    } else if !outcome.report.has_errors() {
        text.push_str("control center is valid\n");
    }
    ctx.emit(serde_json::to_value(&outcome).expect("outcome serializes"), text);
    Ok(exit_for(&outcome.report))
}

fn version_cmd(ctx: &Ctx, cmd: &VersionCmd) -> Outcome {
    let parse = |s: &str| parse_version(s).map_err(Failure::finding);
    match cmd {
        VersionCmd::Parse { version } => {
            let v = parse(version)?;
            let value = json!({
                "version": v.to_string(),
                "release": v.release.to_string(),
                "pre": v.pre.map(|p| json!({"phase": p.phase.as_str(), "number": p.number})),
                "post": v.post(),
                "dev": v.dev(),
            });
            ctx.emit(value, &v);
        }
        VersionCmd::Compare { left, right } => {
            let ord = compare(&parse(left)?, &parse(right)?);
            let sign = match ord {
                std::cmp::Ordering::Less => "<",
                std::cmp::Ordering::Equal => "==",
                std::cmp::Ordering::Greater => ">",
            };
            ctx.emit(json!({"ordering": sign}), format!("{left} {sign} {right}"));
        }
        VersionCmd::Bump { release, change } => {
            let v = parse(release)?;
            if !v.is_final() {
                return Err(Failure::finding(format!("{release} is not a final release")));
            }
            let next = bump(v.release, change_type(&ctx.tree()?, change)?);
            ctx.emit(json!({"version": next.to_string()}), next);
        }
        VersionCmd::Next {
            state,
            issue,
            change,
            target,
        } => {
            let state = load_state(state)?;
            let change = change_type(&ctx.tree()?, change)?;
            let dev = state.development_branch(*issue);
            let target = match (target, dev.map(|b| &b.kind)) {
                (Some(t), _) => t.clone(),
                (None, Some(BranchKind::Development { target, .. })) => target.clone(),
                _ => state.default_branch().to_string(),
            };
            if state.branch(&target).is_none() {
                return Err(Failure::usage(anyhow!("no branch named {target}")));
            }
            let dev_history = dev.map(|b| b.tags.clone()).unwrap_or_default();
            let next = next_dev_version(&dev_history, &state.tags_of(&target), change, *issue).map_err(Failure::finding)?;
            ctx.emit(json!({"version": next.to_string()}), next);
        }
        VersionCmd::Prerelease { state, issue, phase } => {
            let state = load_state(state)?;
            let phase: Phase = phase.parse().map_err(Failure::usage)?;
            let history = state
                .branches()
                .fold(TagHistory::new(), |acc, b| acc.union(&b.tags));
            let next = next_prerelease_version(&history, *issue, phase).map_err(Failure::finding)?;
            ctx.emit(json!({"version": next.to_string()}), next);
        }
        VersionCmd::Finalize {
            candidate,
            state,
            target,
            change,
        } => {
            let state = load_state(state)?;
            if state.branch(target).is_none() {
                return Err(Failure::usage(anyhow!("no branch named {target}")));
            }
            let change = change_type(&ctx.tree()?, change)?;
            let final_version =
                finalize_version(&parse(candidate)?, &state.tags_of(target), change).map_err(Failure::finding)?;
            ctx.emit(json!({"version": final_version.to_string()}), final_version);
        }
    }
    Ok(0)
}

fn optional_state(path: Option<&Path>) -> Result<RepoState, Failure> {
    match path {
        Some(p) => load_state(p),
        None => Ok(RepoState::single_main("HEAD", &[])),
    }
}

fn refreshed_forms(tree: &ConfigTree, state: &RepoState) -> Result<(Vec<FormDefinition>, ValidationReport), Failure> {
    let (forms, report) = compile_forms(tree).map_err(Failure::finding)?;
    let api: Vec<String> = tree
        .get("package.api")
        .and_then(|n| n.as_sequence())
        .unwrap_or(&[])
        .iter()
        .map(|n| n.to_embedded_string())
        .collect();
    Ok((refresh_form_choices(&forms, state, &api), report))
}

fn issue_cmd(ctx: &Ctx, cmd: &IssueCmd) -> Outcome {
    match cmd {
        IssueCmd::CompileForms { state, out } => {
            let state = optional_state(state.as_deref())?;
            let tree = ctx.prepared_tree(&state)?;
            let (forms, report) = refreshed_forms(&tree, &state)?;
            let mut text = report_text(&report);
            for form in &forms {
                match out {
                    Some(dir) => {
                        let path = dir.join(form.file_name());
                        write(&path, &form.to_yaml())?;
                        text.push_str(&format!("wrote {}\n", path.display()));
                    }
                    None => text.push_str(&format!("--- {}\n{}", form.file_name(), form.to_yaml())),
                }
            }
            let value = json!({
                "forms": forms.iter().map(|f| json!({"path": f.file_name(), "form": f.to_issue_form()})).collect::<Vec<_>>(),
                "report": report,
            });
            ctx.emit(value, text);
            Ok(exit_for(&report))
        }
        IssueCmd::Process { submission, state } => {
            let submission: Submission = read_json(submission)?;
            let state = optional_state(state.as_deref())?;
            let tree = ctx.prepared_tree(&state)?;
            let (forms, _) = refreshed_forms(&tree, &state)?;
            let form = forms
                .iter()
                .find(|f| f.id == submission.form_id)
                .ok_or_else(|| Failure::finding(format!("no issue form {:?}", submission.form_id)))?;
            let (ticket, protocol) = process_submission(form, &submission, &tree).map_err(Failure::finding)?;
            let document = protocol.render(&protocol_template(&tree)).map_err(Failure::finding)?;
            let labels: Vec<&str> = ticket.labels.iter().map(String::as_str).collect();
            let text = format!(
                "#{} {}\nlabels: {}\nassignees: {}\n\n{}",
                ticket.number,
                ticket.title,
                labels.join(", "),
                ticket.assignees.join(", "),
                document
            );
            ctx.emit(json!({"ticket": ticket, "protocol": document}), text);
            Ok(0)
        }
        IssueCmd::Transition { ticket, label, state } => {
            let ticket: Ticket = read_json(ticket)?;
            let state = load_state(state)?;
            let tree = ctx.prepared_tree(&state)?;
            let (ticket, plan) = apply_status_transition(&ticket, label, &state, &tree).map_err(Failure::finding)?;
            let text = format!("#{} is now {}\n{}", ticket.number, ticket.status.as_str(), plan_text(&plan));
            ctx.emit(json!({"ticket": ticket, "plan": plan}), text);
            Ok(0)
        }
    }
}

fn load_ledger(path: &Path) -> Result<Ledger, Failure> {
    if !path.exists() {
        return Ok(Ledger::new());
    }
    Ledger::from_json_str(&read(path)?).map_err(Failure::finding)
}

fn changelog_cmd(ctx: &Ctx, cmd: &ChangelogCmd) -> Outcome {
    match cmd {
        ChangelogCmd::Append { ledger, entry } => {
            let entry: ChangelogEntry = read_json(entry)?;
            let id = entry.id.clone();
            let updated = append_entry(load_ledger(ledger)?, entry).map_err(Failure::finding)?;
            write(ledger, &updated.to_json_string())?;
            ctx.emit(
                json!({"appended": id, "entries": updated.len()}),
                format!("appended {id} ({} entries)", updated.len()),
            );
        }
        ChangelogCmd::Render { ledger, version } => {
            let version = parse_version(version).map_err(Failure::finding)?;
            let entries = load_ledger(ledger)?.for_version(&version);
            let template = NotesTemplate::from_tree(&ctx.prepared_tree(&RepoState::single_main("HEAD", &[]))?);
            let notes = render_release_notes(&entries, &template).map_err(Failure::finding)?;
            ctx.emit(json!({"version": version.to_string(), "notes": notes}), &notes);
        }
    }
    Ok(0)
}

fn registry_for(tree: &ConfigTree) -> Result<LicenseRegistry, Failure> {
    let mut registry = LicenseRegistry::bundled();
    for custom in tree.get("license.custom").and_then(|n| n.as_sequence()).unwrap_or(&[]) {
        let field = |k: &str| custom.get(k).and_then(|n| n.as_str()).unwrap_or("");
        registry
            .add_custom(field("id"), field("name"), field("text"))
            .map_err(Failure::finding)?;
    }
    Ok(registry)
}

fn comment_prefix(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "rs" | "c" | "h" | "cc" | "cpp" | "hpp" | "js" | "ts" | "java" | "go" | "kt" | "swift" | "scala" => "//",
        "sql" | "lua" | "hs" => "--",
        "tex" | "m" => "%",
        _ => "#",
    }
}

fn license_cmd(ctx: &Ctx, cmd: &LicenseCmd) -> Outcome {
    match cmd {
        LicenseCmd::Parse { expression } => {
            let expr = parse_license_expr(expression).map_err(Failure::finding)?;
            let value = json!({
                "expression": expr.to_string(),
                "licenses": expr.licenses().iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                "exceptions": expr.exceptions(),
            });
            ctx.emit(value, &expr);
            Ok(0)
        }
        LicenseCmd::Validate { expression } => {
            let expr = parse_license_expr(expression).map_err(Failure::finding)?;
            let tree = ctx.tree()?;
            let report = validate_license_expr(&expr, &registry_for(&tree)?);
            let text = if report.is_empty() {
                format!("{expr} is valid")
            } else {
                report_text(&report)
            };
            ctx.emit(serde_json::to_value(&report).expect("report serializes"), text);
            Ok(exit_for(&report))
        }
        LicenseCmd::Apply {
            expression,
            workspace,
            files,
        } => {
            let expr = parse_license_expr(expression).map_err(Failure::finding)?;
            let tree = ctx.prepared_tree(&RepoState::single_main("HEAD", &[]))?;
            let mut fields = std::collections::BTreeMap::new();
            for (key, path) in [("year", "license.year"), ("holder", "license.holder"), ("name", "name"), ("title", "title")] {
                if let Some(node) = tree.get(path) {
                    fields.insert(key.to_string(), node.to_embedded_string());
                }
            }
            let docs = generate_license_docs(&expr, &registry_for(&tree)?, &fields).map_err(Failure::finding)?;
            let mut written = Vec::new();
            for (path, text) in &docs {
                write(&workspace.join(path), text)?;
                written.push(path.clone());
            }
            let mut annotated = Vec::new();
            for file in files {
                let content = read(file)?;
                let updated = annotate_source(&content, comment_prefix(file), &expr);
                if updated != content {
                    write(file, &updated)?;
                    annotated.push(file.display().to_string());
                }
            }
            let mut text: String = written.iter().map(|p| format!("wrote {p}\n")).collect();
            text.extend(annotated.iter().map(|p| format!("annotated {p}\n")));
            ctx.emit(json!({"written": written, "annotated": annotated}), text);
            Ok(0)
        }
    }
}

fn plan_text(plan: &relforge::plan::ActionPlan) -> String {
    let mut out = String::new();
    for task in &plan.tasks {
        if task.params.is_empty() {
            out.push_str(&format!("{}\n", task.id));
        } else {
            out.push_str(&format!("{} {}\n", task.id, Json::Object(task.params.clone())));
        }
    }
    for w in &plan.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

fn dispatch_cmd(ctx: &Ctx, args: &DispatchArgs) -> Outcome {
    let state = load_state(&args.state)?;
    let tree = ctx.prepared_tree(&state)?;
    if let Some(path) = &args.event {
        let event = RepoEvent::from_json_str(&read(path)?).map_err(Failure::usage)?;
        let plan = dispatch(&event, &state, &tree).map_err(Failure::finding)?;
        ctx.emit(serde_json::to_value(&plan).expect("plan serializes"), plan_text(&plan));
        return Ok(0);
    }
    let log = args.replay.as_ref().expect("clap requires --event or --replay");
    let events = parse_event_log(&read(log)?)
        .map_err(|(line, e)| Failure::usage(anyhow!("{}:{line}: {e}", log.display())))?;
    let outcome = replay(&state, &events, &tree)
        .map_err(|(n, e)| Failure::finding(format!("event {n} in {}: {e}", log.display())))?;
    if let Some(out) = &args.out_state {
        write(out, &outcome.state.to_json_string())?;
    }
    ctx.emit(
        serde_json::to_value(&outcome).expect("outcome serializes"),
        outcome.tags.join("\n"),
    );
    Ok(0)
}

fn run(cli: &Cli) -> Outcome {
    let ctx = Ctx {
        json: cli.json,
        control: cli.control.clone(),
    };
    match &cli.command {
        Command::Sync(args) => run_pipeline_cmd(&ctx, args, true),
        Command::Validate(args) => run_pipeline_cmd(&ctx, args, false),
        Command::Version(cmd) => version_cmd(&ctx, cmd),
        Command::Issue(cmd) => issue_cmd(&ctx, cmd),
        Command::Changelog(cmd) => changelog_cmd(&ctx, cmd),
        Command::License(cmd) => license_cmd(&ctx, cmd),
        Command::Dispatch(args) => dispatch_cmd(&ctx, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            if cli.json {
                println!("{}", json!({"error": format!("{:#}", failure.error)}));
            }
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
