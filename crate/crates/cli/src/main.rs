mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rfs_core::checks::{self, ablation_experiment, check_tree_promises, CERTAINTY};
use rfs_core::classical::{classical_rfs, expected_classical_counts};
use rfs_core::conjugate::cp_rfs_run;
use rfs_core::instance::InstanceFile;
use rfs_core::quantum::{
    expected_quantum_counts, quantum_rfs_with_cap, qubits_required, AblationPlan,
};
use rfs_core::statevector::DEFAULT_QUBIT_CAP;
use rfs_core::translate::{from_aaronson, AaronsonFile};
use rfs_core::{BitString, FSTree, FSTreeConfig, GFamily, QueryLedger};

use report::{counts_map, ledger_map, Report, RunReport, Verdict};

#[derive(Parser)]
#[command(
    name = "rfs",
    version,
    about = "Recursive Fourier Sampling instances and solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file
    Gen(GenArgs),
    /// Solve an instance on one or all tracks
    Solve(SolveArgs),
    /// Skip uncomputation at one level and report what breaks
    Ablate(AblateArgs),
    /// Check an instance file, or run the desk-scale suite
    Verify(VerifyArgs),
    /// Convert between tree and Aaronson forms
    Translate(TranslateArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    /// Register widths n_1,...,n_{l+1}; a single width is repeated when
    /// --depth is given
    #[arg(long, value_delimiter = ',', required = true)]
    lengths: Vec<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// and | majority | parity | prf | table:<bits>
    #[arg(long = "g", default_value = "and")]
    g: String,
    #[arg(long, env = "RFS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    x1: Option<BitString>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Track {
    Classical,
    Quantum,
    Kickback,
}

impl Track {
    fn name(self) -> &'static str {
        match self {
            Track::Classical => "classical",
            Track::Quantum => "quantum",
            Track::Kickback => "kickback",
        }
    }
}

#[derive(clap::Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "classical")]
    track: Track,
    /// Defaults to the instance's x1, then to all zeros
    #[arg(long, conflicts_with = "all_x1")]
    x1: Option<BitString>,
    /// Sweep every x1
    #[arg(long)]
    all_x1: bool,
    /// Run all three tracks and require identical answers
    #[arg(long)]
    compare_all: bool,
    /// Allow quantum runs above the qubit cap
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AblateTrack {
    Quantum,
    Kickback,
}

#[derive(clap::Args)]
struct AblateArgs {
    instance: PathBuf,
    #[arg(long)]
    level: usize,
    #[arg(long, value_enum, default_value = "quantum")]
    track: AblateTrack,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Desk,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(required_unless_present = "suite")]
    instance: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "instance")]
    suite: Option<Suite>,
    #[arg(long, env = "RFS_SEED", default_value_t = 0)]
    seed: u64,
    /// Prefixes examined per level before switching to random sampling
    #[arg(long, default_value_t = 4096)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Form {
    Aaronson,
    Tree,
}

#[derive(clap::Args)]
struct TranslateArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    to: Form,
    /// Parameter x1 the Aaronson instance is taken at
    #[arg(long)]
    x1: Option<BitString>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Ablate(a) => ablate(a),
        Command::Verify(a) => verify(a),
        Command::Translate(a) => translate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(report: &Report, out: Option<&Path>) -> Result<bool> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    if out.is_some() {
        print!("{text}");
    }
    write_or_print(&text, out)?;
    if let Some(v) = report.first_failure() {
        eprintln!("FAIL {}: {}", v.name, v.detail.as_deref().unwrap_or(""));
    }
    Ok(report.passed)
}

fn load_tree(path: &Path) -> Result<(FSTree, InstanceFile)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file =
        InstanceFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let tree = FSTree::from_file(&file).with_context(|| format!("loading {}", path.display()))?;
    Ok((tree, file))
}

fn gen(a: GenArgs) -> Result<bool> {
    let lengths = match (a.depth, a.lengths.as_slice()) {
        (Some(d), [n]) => vec![*n; d + 1],
        (Some(d), ls) if ls.len() != d + 1 => {
            bail!("--depth {d} needs {} widths, got {}", d + 1, ls.len())
        }
        (_, ls) => ls.to_vec(),
    };
    let family: GFamily = a.g.parse()?;
    let mut cfg = FSTreeConfig::new(lengths, family, a.seed);
    if let Some(x1) = a.x1 {
        cfg = cfg.with_x1(x1);
    }
    let tree = FSTree::build(cfg)?;
    if tree.is_trivializing() {
        eprintln!("warning: linear g trivializes the recursion; the instance is less interesting to study");
    }
    let text = tree.to_json();
    match &a.out {
        Some(p) => {
            fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            println!("{}", tree.digest());
        }
        None => print!("{text}"),
    }
    Ok(true)
}

fn inputs_for(tree: &FSTree, x1: Option<BitString>, all: bool) -> Vec<BitString> {
    if all {
        return tree.inputs().collect();
    }
    vec![x1
        .or(tree.config().x1)
        .unwrap_or_else(|| BitString::zeros(tree.width(1)))]
}

fn quantum_cap(tree: &FSTree, force: bool) -> Result<usize> {
    let need = qubits_required(tree);
    if need > DEFAULT_QUBIT_CAP && !force {
        bail!(
            "{need} qubits exceed the cap of {DEFAULT_QUBIT_CAP}; use smaller widths or depth, or pass --force"
        );
    }
    Ok(need.max(DEFAULT_QUBIT_CAP))
}

fn run_track(tree: &FSTree, track: Track, x1: &BitString, cap: usize) -> Result<RunReport> {
    let ledger = QueryLedger::new();
    let truth = tree.eval_f(1, &[*x1])?;
    let mut run = RunReport {
        track: track.name().into(),
        x1: *x1,
        answer: None,
        success_probability: None,
        ledger: Default::default(),
        expected_counts: Default::default(),
        discard_error: None,
        verdicts: Vec::new(),
    };
    let expected = match track {
        Track::Classical => {
            run.answer = Some(classical_rfs(tree, x1, &ledger)?);
            expected_classical_counts(tree.lengths())
        }
        Track::Quantum => {
            let q = quantum_rfs_with_cap(tree, x1, &AblationPlan::none(), &ledger, cap)?;
            run.answer = Some(q.answer);
            run.success_probability = Some(q.success_probability);
            run.verdicts.push(Verdict::new(
                "success probability >= 1 - 1e-9",
                q.success_probability >= CERTAINTY,
                Some(format!("{}", q.success_probability)),
            ));
            expected_quantum_counts(tree.depth())
        }
        Track::Kickback => {
            let r = cp_rfs_run(tree, x1, &AblationPlan::none(), &ledger)?;
            run.verdicts.push(Verdict::new(
                "no live kickback tokens",
                r.live_tokens.is_empty() && r.tokens_conserved(),
                None,
            ));
            match r.outcome {
                Ok(b) => run.answer = Some(b),
                Err(e) => run.discard_error = Some(e.to_string()),
            }
            expected_quantum_counts(tree.depth())
        }
    };
    run.ledger = ledger_map(&ledger);
    run.expected_counts = counts_map(&expected);
    let counts_ok = expected.iter().all(|(k, n)| ledger.count(*k) == *n)
        && ledger.total() == expected.iter().map(|(_, n)| n).sum::<u64>();
    run.verdicts.push(Verdict::new(
        "query counts match closed form",
        counts_ok,
        None,
    ));
    run.verdicts.push(Verdict::new(
        "answer equals f_1(x1)",
        run.answer == Some(truth),
        Some(format!("f_1({x1}) = {}", truth as u8)),
    ));
    Ok(run)
}

fn solve(a: SolveArgs) -> Result<bool> {
    let started = Instant::now();
    let (tree, _) = load_tree(&a.instance)?;
    let tracks: Vec<Track> = if a.compare_all {
        vec![Track::Classical, Track::Quantum, Track::Kickback]
    } else {
        vec![a.track]
    };
    let cap = if tracks.contains(&Track::Quantum) {
        quantum_cap(&tree, a.force)?
    } else {
        DEFAULT_QUBIT_CAP
    };
    let inputs = inputs_for(&tree, a.x1, a.all_x1);
    let mut report = Report::new("solve", Some(tree.digest()));
    let per_input: Vec<Vec<RunReport>> = inputs
        .par_iter()
        .map(|x1| {
            tracks
                .iter()
                .map(|&t| run_track(&tree, t, x1, cap))
                .collect()
        })
        .collect::<Result<_>>()?;
    if a.compare_all {
        for (x1, runs) in inputs.iter().zip(&per_input) {
            let answers: Vec<Option<bool>> = runs.iter().map(|r| r.answer).collect();
            let agree = answers.iter().all(|b| b.is_some() && *b == answers[0]);
            report.verdicts.push(Verdict::new(
                format!("tracks agree at x1={x1}"),
                agree,
                Some(format!("{answers:?}")),
            ));
        }
    }
    report.runs = per_input.into_iter().flatten().collect();
    report.finish(started);
    emit(&report, a.out.as_deref())
}

fn ablate(a: AblateArgs) -> Result<bool> {
    let started = Instant::now();
    let (tree, _) = load_tree(&a.instance)?;
    if tree.is_trivializing() {
        eprintln!("warning: linear g: ablation may not fail");
    }
    if a.level == 0 || a.level > tree.depth() {
        bail!("--level must be in 1..={}", tree.depth());
    }
    quantum_cap(&tree, a.force)?;
    let finding = ablation_experiment(&tree, a.level)?;
    let mut report = Report::new("ablate", Some(tree.digest()));
    let summary = match a.track {
        AblateTrack::Quantum => serde_json::json!({
            "track": "quantum",
            "level": a.level,
            "min_success_probability": finding.min_success,
            "worst_x1": finding.worst_x1,
            "success_by_x1": finding.success_by_x1,
            "fails": finding.quantum_fails(),
        }),
        AblateTrack::Kickback => serde_json::json!({
            "track": "kickback",
            "level": a.level,
            "discard_errors": finding.discard_errors,
            "inputs": finding.inputs,
            "first_discard_error": finding.first_discard,
        }),
    };
    eprintln!(
        "{}",
        match a.track {
            AblateTrack::Quantum => format!(
                "level {} ablated: minimum success probability {:.6} at x1={}",
                a.level, finding.min_success, finding.worst_x1
            ),
            AblateTrack::Kickback => format!(
                "level {} ablated: {} of {} inputs fail discard{}",
                a.level,
                finding.discard_errors,
                finding.inputs,
                finding
                    .first_discard
                    .as_ref()
                    .map(|e| format!(" ({e})"))
                    .unwrap_or_default()
            ),
        }
    );
    report.ablation = Some(summary);
    report.finish(started);
    emit(&report, a.out.as_deref())?;
    Ok(true)
}

fn verify(a: VerifyArgs) -> Result<bool> {
    let started = Instant::now();
    if a.suite.is_some() {
        let mut report = Report::new("verify", None);
        report.verdicts = checks::run_desk_suite(a.seed, 20)?
            .into_iter()
            .map(Verdict::from)
            .collect();
        report.finish(started);
        return emit(&report, a.out.as_deref());
    }
    let path = a
        .instance
        .expect("clap requires an instance without --suite");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let file =
        InstanceFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    // unchecked, so a corrupted table is diagnosed rather than refused
    let tree = FSTree::build_unchecked(file.config()?)?;
    let mut report = Report::new("verify", Some(file.digest()));
    let promises = check_tree_promises(&tree, a.budget, a.seed)?;
    let promises_ok = promises.passed;
    report.verdicts.push(promises.into());
    if promises_ok {
        let bits: usize = tree.lengths().iter().sum();
        if bits <= 16 {
            report
                .verdicts
                .push(checks::check_classical_counts(&tree)?.into());
        }
        if qubits_required(&tree) <= 20 {
            report
                .verdicts
                .push(checks::check_quantum_counts(&tree)?.0.into());
            report
                .verdicts
                .push(checks::check_cross_track(&tree)?.into());
        }
        if tree.depth() <= 2 && tree.lengths().iter().all(|&n| n <= 2) {
            report
                .verdicts
                .push(checks::check_translation(&tree)?.into());
        }
    }
    report.finish(started);
    emit(&report, a.out.as_deref())
}

fn translate(a: TranslateArgs) -> Result<bool> {
    let started = Instant::now();
    let text =
        fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let is_aaronson = value.get("h").is_some();
    let mut report = Report::new("translate", None);
    match (a.to, is_aaronson) {
        (Form::Aaronson, false) => {
            let (tree, _) = load_tree(&a.input)?;
            report.instance_digest = Some(tree.digest());
            let x1 =
                a.x1.or(tree.config().x1)
                    .unwrap_or_else(|| BitString::zeros(tree.width(1)));
            let file =
                AaronsonFile::from_tree(&tree, &x1).context("not expressible in RFS_h form")?;
            let answer = file.instance()?.answer()?;
            let want = classical_rfs(&tree, &x1, &QueryLedger::new())?;
            report.verdicts.push(Verdict::new(
                "converted answer equals tree answer",
                answer == want,
                Some(format!(
                    "x1={x1}: G(s) = {}, f_1 = {}",
                    answer as u8, want as u8
                )),
            ));
            fs::write(&a.out, file.to_json())
                .with_context(|| format!("writing {}", a.out.display()))?;
        }
        (Form::Tree, true) => {
            let file = AaronsonFile::from_json(&text)?;
            let inst = file.instance()?;
            let tree = from_aaronson(&inst).context("not convertible to a tree")?;
            report.instance_digest = Some(tree.digest());
            let want = inst.answer()?;
            let ledger = QueryLedger::new();
            let agree = tree
                .inputs()
                .map(|x1| classical_rfs(&tree, &x1, &ledger))
                .collect::<rfs_core::Result<Vec<bool>>>()?
                .into_iter()
                .all(|b| b == want);
            report.verdicts.push(Verdict::new(
                "tree answers equal G(s) for every x1",
                agree,
                Some(format!("G(s) = {}", want as u8)),
            ));
            fs::write(&a.out, tree.to_json())
                .with_context(|| format!("writing {}", a.out.display()))?;
        }
        (Form::Aaronson, true) => bail!("{} is already in Aaronson form", a.input.display()),
        (Form::Tree, false) => bail!("{} is already in tree form", a.input.display()),
    }
    report.finish(started);
    emit(&report, None)
}
