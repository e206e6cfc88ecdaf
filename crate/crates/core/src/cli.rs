//! Command-line front end: `prepare`, `train`, `eval`, `predict`, `inspect`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{read_header, Checkpoint, MAGIC};
use crate::config::{apply_key, parse_config, preset, render_config};
use crate::datasets::{ClosedWorld, SplitData};
use crate::error::{Error, Result};
use crate::eval::{eval_auc, eval_label_prediction, eval_link_prediction, EvalReport, Subsample};
use crate::kbdata::{Triple, TripleSet, Vocab};
use crate::pipeline::{run, PretrainCache, RunData};
use crate::scoring::{Model, Scorer};
use crate::training::{TrainConfig, Validation};

#[derive(Debug, Parser)]
#[command(
    name = "kbembed",
    version,
    about = "Knowledge-base embedding models for link prediction"
)]
pub struct Cli {
    /// Worker threads for evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pool a split directory's positives and assign tensor cells to folds.
    Prepare(PrepareArgs),
    /// Train a model and write a checkpoint, training log and resolved config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on test data.
    Eval(EvalArgs),
    /// Rank completions of a triple with one missing slot.
    Predict(PredictArgs),
    /// Print a checkpoint header.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Split directory (train/valid/test.txt) or prepared closed-world directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Fold to use with a prepared directory.
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Config file of key=value lines; applied after --preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra key=value overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Cut-off of hits@k.
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    /// Also report mean and std over 4 x 5 random test subsets.
    #[arg(long)]
    pub subsample: bool,
    /// Also rank relation labels and report hits within the top 5%.
    #[arg(long)]
    pub labels: bool,
    /// Seed of the subsample splits.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for report.txt and report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub head: Option<String>,
    #[arg(long)]
    pub relation: Option<String>,
    #[arg(long)]
    pub tail: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    /// Drop completions that are known training positives.
    #[arg(long)]
    pub filtered: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// Loaded evaluation or training data.
pub struct Loaded {
    pub vocab: Vocab,
    pub train: TripleSet,
    pub valid: TripleSet,
    pub test: TripleSet,
    /// Positives of all parts, for filtered ranking.
    pub known: TripleSet,
    pub closed_world: bool,
}

pub fn load_data(args: &DataArgs) -> Result<Loaded> {
    if ClosedWorld::is_prepared(&args.data) {
        let cw = ClosedWorld::load(&args.data)?;
        let split = cw.fold(args.fold)?;
        return Ok(Loaded {
            known: cw.positives.clone(),
            vocab: cw.vocab,
            train: split.train,
            valid: split.valid,
            test: split.test,
            closed_world: true,
        });
    }
    let d = SplitData::load_dir(&args.data)?;
    Ok(Loaded {
        known: d.known(),
        vocab: d.vocab,
        train: d.train,
        valid: d.valid,
        test: d.test,
        closed_world: false,
    })
}

/// Preset, then config file, then `--seed`, then `--set` overrides.
pub fn resolve_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &args.preset {
        Some(p) => preset(p)?,
        None => TrainConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = match &args.preset {
            Some(p) => format!("preset={p}\n"),
            None => String::new(),
        };
        cfg = parse_config(&(base + &text))?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{kv}` is not key=value")))?;
        apply_key(&mut cfg, k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(a: &PrepareArgs, out: &mut dyn Write) -> Result<()> {
    let cw = ClosedWorld::from_split(&SplitData::load_dir(&a.data)?, a.folds, a.seed)?;
    cw.save(&a.out)?;
    writeln!(
        out,
        "prepared {} entities, {} relations, {} positives, {} cells in {} folds -> {}",
        cw.vocab.num_entities(),
        cw.vocab.num_relations(),
        cw.positives.len(),
        cw.folds.len(),
        cw.k,
        a.out.display()
    )?;
    Ok(())
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(a)?;
    let d = load_data(&a.data)?;
    let known = if d.closed_world {
        d.train.positives()
    } else {
        TripleSet::union_positives(&[&d.train, &d.valid])
    };
    let data = RunData {
        train: &d.train,
        valid: (!d.valid.is_empty()).then_some(Validation {
            set: &d.valid,
            known: &known,
        }),
        num_entities: d.vocab.num_entities(),
        num_relations: d.vocab.num_relations(),
    };
    let result = run(&cfg, data, &mut PretrainCache::new())?;
    std::fs::create_dir_all(&a.out)?;
    Checkpoint::new(result.model, &d.vocab, Some(cfg.clone()))?.save(&a.out.join("model.tatc"))?;
    std::fs::write(
        a.out.join("train_log.json"),
        serde_json::to_string_pretty(&result.log)?,
    )?;
    std::fs::write(a.out.join("config.txt"), render_config(&cfg))?;
    if let Some(t) = &result.log.training {
        for p in &t.validation {
            writeln!(
                out,
                "epoch {:>4}  {} {:.5}",
                p.epoch, cfg.validation_metric, p.value
            )?;
        }
        writeln!(out, "best epoch {}", t.best_epoch)?;
    }
    if let Some(lc) = &result.log.combination {
        writeln!(
            out,
            "combination: {} outer iterations, best {}",
            lc.objective.len() - 1,
            lc.best_iteration
        )?;
    }
    writeln!(out, "wrote {}", a.out.join("model.tatc").display())?;
    Ok(())
}

fn load_checkpoint(path: &Path, vocab: &Vocab) -> Result<Model> {
    let c = Checkpoint::load(path)?;
    c.header.check_vocab(vocab)?;
    Ok(c.model)
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let d = load_data(&a.data)?;
    let model = load_checkpoint(&a.model, &d.vocab)?;
    let mut report = if d.closed_world {
        EvalReport {
            k: a.topk,
            num_test: d.test.len(),
            auc_pr: Some(eval_auc(&model, &d.test)?),
            ..EvalReport::default()
        }
    } else {
        let sub = if a.subsample {
            Subsample::standard(a.seed)
        } else {
            Subsample::None
        };
        eval_link_prediction(&model, &d.test, &d.train, &d.known, a.topk, sub)?
    };
    if a.labels {
        report.label = Some(eval_label_prediction(&model, &d.test, 5)?);
    }
    let mut text = report.to_text();
    if !report.per_category.is_empty() {
        text.push('\n');
        text.push_str(&report.category_table());
    }
    write!(out, "{text}")?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &text)?;
        std::fs::write(dir.join("report.json"), report.to_json())?;
    }
    Ok(())
}

/// Top-`k` completions of a query with exactly one empty slot, best first.
pub fn predict_top(
    model: &Model,
    vocab: &Vocab,
    head: Option<&str>,
    relation: Option<&str>,
    tail: Option<&str>,
    k: usize,
    exclude: Option<&TripleSet>,
) -> Result<Vec<(String, f64)>> {
    let h = head.map(|n| vocab.require_entity(n)).transpose()?;
    let r = relation.map(|n| vocab.require_relation(n)).transpose()?;
    let t = tail.map(|n| vocab.require_entity(n)).transpose()?;
    let (mut scores, make): (Vec<f64>, Box<dyn Fn(usize) -> Triple>) = match (h, r, t) {
        (Some(h), Some(r), None) => {
            let mut s = vec![0.0; vocab.num_entities()];
            model.score_tails(h, r, &mut s);
            (s, Box::new(move |x| Triple::new(h, r, x)))
        }
        (None, Some(r), Some(t)) => {
            let mut s = vec![0.0; vocab.num_entities()];
            model.score_heads(r, t, &mut s);
            (s, Box::new(move |x| Triple::new(x, r, t)))
        }
        (Some(h), None, Some(t)) => {
            let mut s = vec![0.0; vocab.num_relations()];
            model.score_labels(h, t, &mut s);
            (s, Box::new(move |x| Triple::new(h, x, t)))
        }
        _ => {
            return Err(Error::config(
                "give exactly two of --head, --relation and --tail",
            ))
        }
    };
    if let Some(known) = exclude {
        for (x, s) in scores.iter_mut().enumerate() {
            if known.contains(&make(x)) {
                *s = f64::NEG_INFINITY;
            }
        }
    }
    let mut idx: Vec<usize> = (0..scores.len())
        .filter(|&x| scores[x] > f64::NEG_INFINITY)
        .collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    let name = |x: usize| match r {
        None => vocab.relation_name(x),
        Some(_) => vocab.entity_name(x),
    };
    Ok(idx
        .into_iter()
        .map(|x| (name(x).unwrap_or_default().to_string(), scores[x]))
        .collect())
}

fn predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let d = load_data(&a.data)?;
    let model = load_checkpoint(&a.model, &d.vocab)?;
    let train_pos = d.train.positives();
    let ranked = predict_top(
        &model,
        &d.vocab,
        a.head.as_deref(),
        a.relation.as_deref(),
        a.tail.as_deref(),
        a.topk,
        a.filtered.then_some(&train_pos),
    )?;
    for (i, (name, score)) in ranked.iter().enumerate() {
        writeln!(out, "{}\t{name}\t{score:.6}", i + 1)?;
    }
    Ok(())
}

fn inspect(a: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let mut r = std::io::BufReader::new(std::fs::File::open(&a.model)?);
    let header = read_header(&mut r)?;
    writeln!(out, "{MAGIC}")?;
    write!(out, "{}", header.to_text())?;
    Ok(())
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match &cli.command {
        Command::Prepare(a) => prepare(a, out),
        Command::Train(a) => train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Inspect(a) => inspect(a, out),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::config(e.to_string()))?;
    execute(&cli, out)
}
