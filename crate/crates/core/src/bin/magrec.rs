use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use magrec::config::KeyValues;
use magrec::dataset::{
    generate_synthetic, ingest, prepare, write_records_csv, write_split, DatasetSplit, LogFormat, WindowedSample,
};
use magrec::harness::{
    ablation_run, evaluate, load_split, representation_sweep, train, variants_csv, variants_table, DataSource,
    MetricsReport, PreparedData, RunConfig, VariantResult,
};
use magrec::model::{encode_samples, MagrecModel};
use magrec::{Error, Result};

#[derive(Parser)]
#[command(name = "magrec", about = "Multi-domain graph recommender: data, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Flat `key = value` run config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory written by `prepare`.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_seed: Option<u64>,
    /// disjoint, flattened or interacting.
    #[arg(long)]
    repr: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    no_rie: bool,
    #[arg(long)]
    no_gie: bool,
    #[arg(long)]
    no_dc: bool,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic positive-interaction log as CSV.
    GenSynthetic {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a log, sample negatives, window and split it into a directory.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        /// csv or jsonl; guessed from the extension when absent.
        #[arg(long)]
        format: Option<String>,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the history graphs of one split part.
    BuildGraphs {
        #[command(flatten)]
        run: RunArgs,
        /// train, validation or test.
        #[arg(long, default_value = "train")]
        part: String,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model and save its best checkpoint.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Metric CSV of the best epoch (validation and test).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-epoch CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on one split part.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        part: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train every RIE/GIE/DC combination.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train once per graph representation.
    SweepRepr {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

impl RunArgs {
    fn resolve(&self, base: Option<&Path>) -> Result<RunConfig> {
        let mut run = RunConfig::default();
        if let Some(path) = self.config.as_deref().or(base) {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            run.apply(&KeyValues::parse(&text)?)?;
        }
        let mut kv = KeyValues::default();
        if let Some(d) = &self.data_dir {
            kv.set("data_dir", d.display());
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.set(k, v);
            }
        };
        put("seed", self.seed.map(|v| v.to_string()));
        put("data_seed", self.data_seed.map(|v| v.to_string()));
        put("repr", self.repr.clone());
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("patience", self.patience.map(|v| v.to_string()));
        put("batch_size", self.batch_size.map(|v| v.to_string()));
        put("learning_rate", self.learning_rate.map(|v| v.to_string()));
        for (flag, key) in [(self.no_rie, "use_rie"), (self.no_gie, "use_gie"), (self.no_dc, "use_dc")] {
            if flag {
                kv.set(key, false);
            }
        }
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{pair}`")))?;
            kv.set(k.trim(), v.trim());
        }
        run.apply(&kv)?;
        run.validate()?;
        Ok(run)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn emit_csv(report: Option<&Path>, csv: &str) -> Result<()> {
    match report {
        Some(p) => write_out(p, csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn part<'a>(split: &'a DatasetSplit, name: &str) -> Result<&'a [WindowedSample]> {
    match name {
        "train" => Ok(&split.train),
        "validation" | "val" => Ok(&split.validation),
        "test" => Ok(&split.test),
        other => Err(Error::Config(format!("unknown split part `{other}`"))),
    }
}

/// Outcome that maps to exit code 4 when every reported AUC is undefined.
enum Outcome {
    Done,
    MetricsUndefined,
}

fn check_reports<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Outcome {
    if reports.into_iter().all(MetricsReport::auc_undefined_only) {
        Outcome::MetricsUndefined
    } else {
        Outcome::Done
    }
}

fn variant_reports(rows: &[VariantResult]) -> impl Iterator<Item = &MetricsReport> {
    rows.iter().flat_map(|r| std::iter::once(&r.validation).chain(r.test.as_ref()))
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::GenSynthetic { run, out } => {
            let run = run.resolve(None)?;
            let DataSource::Synthetic(cfg) = &run.data else {
                return Err(Error::Config("gen-synthetic needs synthetic.* settings, not data_dir".into()));
            };
            let records = generate_synthetic(cfg)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            let file = fs::File::create(&out).map_err(|e| io_err(&out, e))?;
            write_records_csv(file, &records)?;
            println!("wrote {} positive events to {}", records.len(), out.display());
        }
        Command::Prepare {
            input,
            format,
            data_seed,
            out,
        } => {
            let format = match format {
                Some(f) => f.parse()?,
                None => LogFormat::from_path(&input),
            };
            let records = ingest(&input, format)?;
            let split = prepare(&records, data_seed);
            write_split(&out, &split)?;
            println!(
                "train {}  validation {}  test {}  -> {}",
                split.train.len(),
                split.validation.len(),
                split.test.len(),
                out.display()
            );
        }
        Command::BuildGraphs { run, part: name, limit, out } => {
            let run = run.resolve(None)?;
            let split = load_split(&run)?;
            let samples = part(&split, &name)?;
            let mut buf = Vec::new();
            for (i, s) in samples.iter().take(limit.unwrap_or(usize::MAX)).enumerate() {
                writeln!(buf, "# sample {i} user {} candidate {}:{} label {}", s.user, s.candidate_item, s.candidate_domain, s.label)
                    .expect("writing to memory");
                match run.repr.build(s) {
                    Ok(g) => g.write_dump(&mut buf).expect("writing to memory"),
                    Err(e) => writeln!(buf, "# skipped: {e}").expect("writing to memory"),
                }
            }
            let text = String::from_utf8(buf).expect("ascii dump");
            match out {
                Some(p) => write_out(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Train {
            run,
            checkpoint,
            report,
            history,
        } => {
            let run = run.resolve(None)?;
            let split = load_split(&run)?;
            let data = PreparedData::new(&split, run.repr)?;
            info!("{} train / {} validation / {} test samples", data.train.len(), data.validation.len(), data.test.len());
            let outcome = train(&run, &data)?;
            let validation = outcome.best().validation.clone();
            let test = if data.test.is_empty() {
                None
            } else {
                Some(evaluate(&outcome.model, &data.test, run.eval_batch_size, run.seed, outcome.best_epoch)?)
            };
            println!("validation (best epoch {})\n{}", outcome.best_epoch, validation.to_table());
            let mut csv = format!("{}\n", magrec::harness::REPORT_CSV_HEADER);
            csv.push_str(&validation.csv_rows(Some("validation")));
            if let Some(t) = &test {
                println!("test\n{}", t.to_table());
                csv.push_str(&t.csv_rows(Some("test")));
            }
            emit_csv(report.as_deref(), &csv)?;
            if let Some(h) = history {
                write_out(&h, &outcome.history_csv())?;
            }
            if let Some(ckpt) = checkpoint {
                outcome.model.save(&ckpt, &data.vocab, run.seed)?;
                write_out(&run_path(&ckpt), &run.to_kv().render())?;
                println!("checkpoint: {}", ckpt.display());
            }
            return Ok(check_reports(std::iter::once(&validation).chain(test.as_ref())));
        }
        Command::Eval {
            run,
            checkpoint,
            part: name,
            report,
        } => {
            let saved = run_path(&checkpoint);
            let run = run.resolve(saved.exists().then_some(saved.as_path()))?;
            let (model, vocab) = MagrecModel::load(&checkpoint)?;
            let split = load_split(&run)?;
            let samples = part(&split, &name)?;
            let (encoded, dropped) = encode_samples(samples, run.repr, &vocab)?;
            if dropped > 0 {
                info!("dropped {dropped} samples without a graph");
            }
            let report_data = evaluate(&model, &encoded, run.eval_batch_size, run.seed, 0)?;
            println!("{name}\n{}", report_data.to_table());
            emit_csv(report.as_deref(), &report_data.to_csv())?;
            return Ok(check_reports(std::iter::once(&report_data)));
        }
        Command::Ablate { run, report } => {
            let run = run.resolve(None)?;
            let split = load_split(&run)?;
            let data = PreparedData::new(&split, run.repr)?;
            let rows = ablation_run(&run, &data)?;
            print!("{}", variants_table(&rows));
            emit_csv(report.as_deref(), &variants_csv(&rows))?;
            return Ok(check_reports(variant_reports(&rows)));
        }
        Command::SweepRepr { run, report } => {
            let run = run.resolve(None)?;
            let split = load_split(&run)?;
            let rows = representation_sweep(&run, &split)?;
            print!("{}", variants_table(&rows));
            emit_csv(report.as_deref(), &variants_csv(&rows))?;
            return Ok(check_reports(variant_reports(&rows)));
        }
    }
    Ok(Outcome::Done)
}

/// Run config saved next to a checkpoint.
fn run_path(ckpt: &Path) -> PathBuf {
    let mut p = ckpt.as_os_str().to_owned();
    p.push(".run");
    PathBuf::from(p)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Format { .. } | Error::Parse { .. } | Error::Io { .. } | Error::Checkpoint(_) => 3,
        Error::MetricUndefined(_) => 4,
        Error::Dimension { .. } | Error::Index { .. } | Error::Contract(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::MetricsUndefined) => {
            eprintln!("every reported AUC is undefined (single-class labels)");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
