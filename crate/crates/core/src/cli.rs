//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! standard error.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::conllu::{parse_conllu, serialize_conllu, Sentence, Treebank};
use crate::ensemble::{ensemble_predict, EnsembleError};
use crate::evaluation::{attachment_scores, evaluate, round_half_up_2, MetricReport};
use crate::harmonizer::{add_dummy_punct, fixed_numerals_to_flat, relabel_dep, strip_dummy_punct, RuleTable};
use crate::model::train::{train_with_progress, Stage};
use crate::model::{io, load_config, ModelConfig, ParserModel, TrainSchedule};
use crate::sampler::treebank_weights;

#[derive(Parser, Debug)]
#[command(
    name = "udparse",
    version,
    about = "Graph-based dependency parser for CoNLL-U treebanks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on one or more treebanks.
    Train(TrainArgs),
    /// Annotate a CoNLL-U file with one model or an ensemble.
    Parse(ParseArgs),
    /// Score a system file against gold data.
    Eval(EvalArgs),
    /// Rewrite annotation conventions.
    Harmonize(HarmonizeArgs),
    /// Show the sampling weight of each training treebank.
    SampleReport(SampleReportArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// JSON configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training treebank; repeat for multi-treebank training.
    #[arg(long = "treebank", required = true)]
    treebanks: Vec<PathBuf>,
    /// Where to write the model.
    #[arg(long)]
    out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ParseArgs {
    /// Model file; repeat to ensemble several models.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    /// Output file (standard output when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Append a period to sentences lacking final punctuation while parsing.
    #[arg(long)]
    add_dummy_punct: bool,
    /// Feed gold UPOS from the input to the model; required by models
    /// trained with a gold-UPOS channel.
    #[arg(long)]
    use_gold_upos: bool,
    /// Worker threads for prediction.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Gold treebank; repeat together with --system for several treebanks.
    #[arg(long = "gold", required = true)]
    gold: Vec<PathBuf>,
    /// System output, paired with --gold by position.
    #[arg(long = "system", required = true)]
    system: Vec<PathBuf>,
    /// Compare relations without their subtypes (default).
    #[arg(long, conflicts_with = "strict_deprel")]
    strip_subtypes: bool,
    /// Compare full relations including subtypes.
    #[arg(long)]
    strict_deprel: bool,
    /// Print a JSON report instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct HarmonizeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output file (standard output when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// `dep` replacement rules; the built-in table when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Rewrite `fixed` between numerals to `flat`.
    #[arg(long)]
    fixed_to_flat: bool,
    /// Replace `dep` using the rule table.
    #[arg(long)]
    relabel_dep: bool,
}

#[derive(Args, Debug)]
struct SampleReportArgs {
    #[arg(long = "treebank", required = true)]
    treebanks: Vec<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(String),
}

fn data<E: Display>(context: impl Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{}: {}", context, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_treebank(path: &Path) -> Result<Treebank, CliError> {
    let text = fs::read_to_string(path).map_err(data(path.display()))?;
    parse_conllu(&text, &stem(path)).map_err(data(path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(data(p.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(data("standard output")),
    }
}

fn fmt2(x: f64) -> String {
    format!("{:.2}", round_half_up_2(x))
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let (mut config, schedule): (ModelConfig, TrainSchedule) = match &args.config {
        Some(p) => load_config(p).map_err(|e| CliError::Usage(format!("{}: {}", p.display(), e)))?,
        None => (ModelConfig::default(), TrainSchedule::default()),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let treebanks = args
        .treebanks
        .iter()
        .map(|p| read_treebank(p))
        .collect::<Result<Vec<_>, _>>()?;

    let model: ParserModel<f32> = train_with_progress(config, schedule, &treebanks, |stats| {
        let stage = match stats.stage {
            Stage::Frozen => "frozen",
            Stage::Main => "main",
        };
        eprintln!(
            "{} epoch {}: loss {:.4}, lr {:.3e}",
            stage,
            stats.epoch + 1,
            stats.mean_loss,
            stats.last_lr
        );
    })
    .map_err(data("training"))?;

    io::save(&model, &args.out).map_err(data(args.out.display()))?;

    for tb in &treebanks {
        let predicted = Treebank::new(
            tb.name.clone(),
            tb.sentences
                .par_iter()
                .map(|s| model.predict(s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(data(&tb.name))?,
        );
        let (_, las) = attachment_scores(tb, &predicted, true).map_err(data(&tb.name))?;
        eprintln!("train LAS [{}]: {}", tb.name, fmt2(las));
    }
    Ok(())
}

fn cmd_parse(args: ParseArgs) -> Result<(), CliError> {
    let models = args
        .models
        .iter()
        .map(|p| io::load::<f32>(p).map_err(data(p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    for (m, path) in models.iter().zip(&args.models) {
        if m.config.use_gold_upos != args.use_gold_upos {
            return Err(CliError::Usage(if m.config.use_gold_upos {
                format!("{} reads gold UPOS; pass --use-gold-upos", path.display())
            } else {
                format!("{} was trained without gold UPOS input", path.display())
            }));
        }
    }
    let input = read_treebank(&args.input)?;

    let parse_one = |s: &Sentence| -> Result<Sentence, CliError> {
        let (prepared, marker) = if args.add_dummy_punct {
            add_dummy_punct(s)
        } else {
            (s.clone(), crate::harmonizer::PunctMarker::Absent)
        };
        let predicted = if models.len() == 1 {
            models[0].predict(&prepared).map_err(EnsembleError::from)
        } else {
            ensemble_predict(&models, &prepared)
        }
        .map_err(data(format!("{}: sentence", args.input.display())))?;
        strip_dummy_punct(&predicted, marker).map_err(data("dummy punctuation"))
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(data("thread pool"))?;
    let sentences = pool.install(|| input.sentences.par_iter().map(parse_one).collect::<Result<Vec<_>, _>>())?;

    let out = serialize_conllu(&Treebank::new(input.name, sentences));
    write_output(args.output.as_deref(), &out)
}

fn print_report(report: &MetricReport) {
    if report.treebanks.len() > 1 {
        for tb in &report.treebanks {
            println!("[{}] UAS: {}", tb.name, fmt2(tb.uas));
            println!("[{}] LAS: {}", tb.name, fmt2(tb.las));
            println!("[{}] UPOS: {}", tb.name, fmt2(tb.upos));
            println!("[{}] UFeats: {}", tb.name, fmt2(tb.ufeats));
        }
    }
    let m = &report.macro_avg;
    println!("UAS: {}", fmt2(m.uas));
    println!("LAS: {}", fmt2(m.las));
    println!("UPOS: {}", fmt2(m.upos));
    println!("UFeats: {}", fmt2(m.ufeats));
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    if args.gold.len() != args.system.len() {
        return Err(CliError::Usage(format!(
            "{} --gold files but {} --system files",
            args.gold.len(),
            args.system.len()
        )));
    }
    let pairs = args
        .gold
        .iter()
        .zip(&args.system)
        .map(|(g, s)| Ok((read_treebank(g)?, read_treebank(s)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = evaluate(&pairs, !args.strict_deprel).map_err(data("evaluation"))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(data("report"))?);
    } else {
        print_report(&report);
    }
    Ok(())
}

fn cmd_harmonize(args: HarmonizeArgs) -> Result<(), CliError> {
    let rules = match &args.rules {
        Some(p) => fs::read_to_string(p)
            .map_err(data(p.display()))?
            .parse::<RuleTable>()
            .map_err(data(p.display()))?,
        None => RuleTable::default(),
    };
    let both = !args.fixed_to_flat && !args.relabel_dep;
    let mut tb = read_treebank(&args.input)?;
    for s in &mut tb.sentences {
        if both || args.fixed_to_flat {
            *s = fixed_numerals_to_flat(s);
        }
        if both || args.relabel_dep {
            *s = relabel_dep(s, &rules);
        }
    }
    write_output(args.output.as_deref(), &serialize_conllu(&tb))
}

fn cmd_sample_report(args: SampleReportArgs) -> Result<(), CliError> {
    let treebanks = args
        .treebanks
        .iter()
        .map(|p| read_treebank(p))
        .collect::<Result<Vec<_>, _>>()?;
    let counts: Vec<usize> = treebanks.iter().map(Treebank::sentence_count).collect();
    let weights = treebank_weights(&counts).map_err(data("sampling weights"))?;
    for (tb, w) in treebanks.iter().zip(weights.as_slice()) {
        println!("{}\t{}\t{:.6}", tb.name, tb.sentence_count(), w);
    }
    Ok(())
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Parse(a) => cmd_parse(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Harmonize(a) => cmd_harmonize(a),
        Command::SampleReport(a) => cmd_sample_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {}", msg);
            1
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {}", msg);
            2
        }
    }
}
