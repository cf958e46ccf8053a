use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fmsense_core::data::{Modality, Snippet, SubjectId};
use fmsense_core::eval::{
    grid_search, make_fold_plan, run_crossval, train_with_retries, CrossvalConfig, EvalReport, GridConfig, GridSpace,
};
use fmsense_core::features::{sensors_for, FeatureCache};
use fmsense_core::fusion::FusionMode;
use fmsense_core::ingest::{label_counts, load_all, load_manifest, load_snippet, synthesize_dataset, write_dataset, write_table, SynthConfig};
use fmsense_core::nn::checkpoint::Checkpoint;
use fmsense_core::nn::presets::preset_for;
use fmsense_core::nn::{preset, ModelSpec, TrainConfig};
use fmsense_core::seed::{derive, stream};
use fmsense_core::{Error, ErrorKind};

use crate::{exit, Cli, Command, CrossvalArgs, FusionArg, PreprocessArgs, ReportArgs, ReportFormat, SynthArgs, TrainArgs, TuneArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => exit::USAGE,
                ErrorKind::Data => exit::DATA,
                ErrorKind::Numeric => exit::NUMERIC,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

struct Ctx {
    seed: u64,
    out_root: Option<PathBuf>,
}

impl Ctx {
    fn out(&self, p: &Path) -> PathBuf {
        match &self.out_root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Core(Error::Data(e.to_string())))
}

fn parse_modalities(names: &[String]) -> CliResult<Vec<Modality>> {
    let mut out = Vec::new();
    for n in names {
        let m: Modality = n.parse().map_err(|e: Error| usage(e.to_string()))?;
        if out.contains(&m) {
            return Err(usage(format!("modality {m} listed twice")));
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(usage("no modality given"));
    }
    Ok(out)
}

fn sensors_only(ms: &[Modality]) -> CliResult<()> {
    if ms.contains(&Modality::Fused) {
        return Err(usage("fused is not a sensor modality here"));
    }
    Ok(())
}

fn one_modality(name: &str) -> CliResult<Modality> {
    name.parse().map_err(|e: Error| usage(e.to_string()))
}

fn spec_for(network: Modality, name: Option<&str>) -> CliResult<ModelSpec> {
    match name {
        None => Ok(preset_for(network, 1).expect("every modality has a first preset")),
        Some(n) => {
            let (m, spec) = preset(n).ok_or_else(|| usage(format!("unknown preset '{n}'")))?;
            if m != network {
                return Err(usage(format!("preset '{n}' is for {m}, not {network}")));
            }
            Ok(spec)
        }
    }
}

fn subjects_with_snippets(snippets: &[Snippet]) -> Vec<SubjectId> {
    snippets.iter().map(|s| s.subject.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn run(cli: Cli) -> std::result::Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let ctx = Ctx {
        seed: cli.seed,
        out_root: cli.out_root.clone(),
    };
    match &cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Preprocess(a) => preprocess(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Crossval(a) => crossval(&ctx, a),
        Command::Tune(a) => tune(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> CliResult<()> {
    let modalities = parse_modalities(&a.modality)?;
    sensors_only(&modalities)?;
    let cfg = SynthConfig {
        n_subjects: a.subjects,
        snippets_per_subject: a.per_subject,
        class_balance: a.class_balance,
        seed: ctx.seed,
        separability: a.separability,
        signal_overlap: a.signal_overlap,
        modalities,
    };
    let (manifest, snippets) = synthesize_dataset(&cfg)?;
    let out = ctx.out(&a.out);
    write_dataset(&out, &manifest.dataset_name, &snippets)?;
    write_file(&out.join("synth_config.json"), &to_json(&cfg)?)?;
    let (pos, neg) = label_counts(&snippets);
    println!(
        "wrote {} snippets ({pos} FM+, {neg} FM-) for {} subjects to {}",
        snippets.len(),
        manifest.subjects.len(),
        out.display()
    );
    Ok(())
}

fn preprocess(ctx: &Ctx, a: &PreprocessArgs) -> CliResult<()> {
    let networks = parse_modalities(&a.modality)?;
    let manifest = load_manifest(&a.manifest)?;
    let snippets = load_all(&manifest)?;
    let sensors: Vec<Modality> = networks.iter().flat_map(|n| sensors_for(*n)).collect();
    let cache = FeatureCache::build(&snippets, &sensors)?;
    let all: Vec<usize> = (0..cache.len()).collect();
    let stats = if all.is_empty() { Default::default() } else { cache.fit_stats(&all)? };
    let out = ctx.out(&a.out);
    for &net in &networks {
        let xs = cache.matrices(net, &stats, &all)?;
        let dir = out.join(net.name().to_ascii_lowercase());
        for (id, x) in cache.ids.iter().zip(&xs) {
            write_table(&dir.join(format!("{id}.csv")), x.outer_iter().map(|r| r.to_vec()))?;
        }
    }
    let list: Vec<_> = stats.vid.into_iter().chain(stats.imu).collect();
    write_file(&out.join("norm_stats.json"), &to_json(&list)?)?;
    println!(
        "wrote {} feature sets for {} snippets to {}",
        networks.len(),
        cache.len(),
        out.display()
    );
    Ok(())
}

fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> CliResult<()> {
    let network = one_modality(&a.modality)?;
    let spec = spec_for(network, a.preset.as_deref())?;
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let cfg = TrainConfig {
        max_epochs: a.max_epochs,
        patience: a.patience,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let manifest = load_manifest(&a.manifest)?;
    let snippets = load_all(&manifest)?;
    let cache = FeatureCache::build(&snippets, &sensors_for(network))?;
    let all: Vec<usize> = (0..cache.len()).collect();
    if all.is_empty() {
        return Err(CliError::Core(Error::Data("manifest has no snippets".into())));
    }
    let stats = cache.fit_stats(&all)?;
    let xs = cache.matrices(network, &stats, &all)?;
    let mut best = None;
    for r in 0..a.reps {
        let seed_of = |attempt: usize| derive(ctx.seed, &[stream::TRAIN, 0, 0, r as u64, attempt as u64]);
        let (_, seed, model) = train_with_retries(&spec, &xs, &cache.labels, &cfg, seed_of)?;
        log::info!("repetition {r} (seed {seed}): validation loss {:.4}", model.best_val_loss);
        if best.as_ref().is_none_or(|(_, m): &(u64, fmsense_core::nn::TrainedModel)| model.best_val_loss < m.best_val_loss) {
            best = Some((seed, model));
        }
    }
    let (seed, model) = best.expect("at least one repetition");
    let out = ctx.out(&a.out);
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut log_csv = String::from("epoch,train_loss,val_loss\n");
    for e in &model.train_log {
        log_csv.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    write_file(&out.join("train_log.csv"), &log_csv)?;
    println!(
        "{network} {spec}: best epoch {} validation loss {:.4} (seed {seed})",
        model.best_epoch, model.best_val_loss
    );
    Checkpoint::new(network, stats.for_network(network), model).save(&out.join("model.json"))?;
    Ok(())
}

fn crossval(ctx: &Ctx, a: &CrossvalArgs) -> CliResult<()> {
    let modalities = parse_modalities(&a.modality)?;
    sensors_only(&modalities)?;
    let fusion = match a.fusion {
        FusionArg::None => {
            if modalities.len() > 1 {
                return Err(usage("several modalities need --fusion late or --fusion early"));
            }
            None
        }
        FusionArg::Late => Some(FusionMode::Late),
        FusionArg::Early => Some(FusionMode::Early),
    };
    let train = TrainConfig {
        max_epochs: a.max_epochs,
        patience: a.patience,
        ..TrainConfig::default()
    };
    let placeholder = CrossvalConfig {
        modalities: modalities.clone(),
        fusion,
        specs: BTreeMap::new(),
        train: train.clone(),
        repetitions: a.reps,
        threshold: fmsense_core::fusion::DEFAULT_THRESHOLD,
        seed: ctx.seed,
    };
    let networks = placeholder.networks();
    let mut specs = BTreeMap::new();
    for &net in &networks {
        specs.insert(net, spec_for(net, None)?);
    }
    for name in &a.preset {
        let (m, spec) = preset(name).ok_or_else(|| usage(format!("unknown preset '{name}'")))?;
        if !networks.contains(&m) {
            return Err(usage(format!("preset '{name}' is for {m}, which this experiment does not train")));
        }
        specs.insert(m, spec);
    }
    let cfg = CrossvalConfig::new(modalities, fusion, specs, train, a.reps, ctx.seed)?;

    let manifest = load_manifest(&a.manifest)?;
    let snippets = load_all(&manifest)?;
    let plan = make_fold_plan(&subjects_with_snippets(&snippets), a.folds, ctx.seed)?;
    let report = run_crossval(&snippets, &plan, &cfg)?;

    let out = ctx.out(&a.out);
    let text = report.to_text();
    write_file(&out.join("report.txt"), &text)?;
    write_file(&out.join("report.json"), &(report.to_json()? + "\n"))?;
    write_file(&out.join("per_fold.csv"), &report.per_fold_csv())?;
    write_file(&out.join("fold_plan.json"), &to_json(&plan)?)?;
    write_file(&out.join("config.json"), &to_json(&cfg)?)?;
    print!("{text}");
    Ok(())
}

fn tune(ctx: &Ctx, a: &TuneArgs) -> CliResult<()> {
    let network = one_modality(&a.modality)?;
    let manifest = load_manifest(&a.manifest)?;
    let known: BTreeSet<&str> = manifest.subjects.iter().map(SubjectId::as_str).collect();
    let holdout: BTreeSet<&str> = a.holdout_subjects.iter().map(String::as_str).collect();
    if let Some(s) = holdout.iter().find(|s| !known.contains(*s)) {
        return Err(usage(format!("holdout subject '{s}' is not in the manifest")));
    }
    let cv_subjects: Vec<SubjectId> = if a.cv_subjects.is_empty() {
        manifest.subjects.iter().filter(|s| !holdout.contains(s.as_str())).cloned().collect()
    } else {
        a.cv_subjects
            .iter()
            .map(|s| SubjectId::new(s.clone()))
            .collect::<fmsense_core::Result<_>>()?
    };
    if let Some(s) = cv_subjects.iter().find(|s| holdout.contains(s.as_str())) {
        return Err(usage(format!("subject '{s}' is both a tuning and a cross-validation subject")));
    }
    let tuning = manifest
        .snippets
        .iter()
        .filter(|e| holdout.contains(e.subject.as_str()))
        .map(|e| load_snippet(&manifest, &e.snippet_id))
        .collect::<fmsense_core::Result<Vec<_>>>()?;

    let mut cfg = GridConfig::new(network, ctx.seed);
    cfg.budget = a.budget;
    cfg.repeats = a.repeats;
    cfg.top = a.top;
    cfg.train.max_epochs = a.max_epochs;
    let result = grid_search(&GridSpace::default(), &tuning, &cv_subjects, &cfg)?;

    let out = ctx.out(&a.out);
    let mut text = format!(
        "evaluated {} of {} architectures x {} repeats = {} training runs\nrank  mean_val_loss  spec\n",
        result.configs_evaluated, result.space_size, cfg.repeats, result.runs
    );
    for (i, r) in result.ranked.iter().enumerate() {
        text.push_str(&format!("{:>4}  {:>13.6}  {}\n", i + 1, r.mean_val_loss, r.name));
    }
    if result.ranked.len() < cfg.top {
        eprintln!("warning: only {} architectures ranked, fewer than --top {}", result.ranked.len(), cfg.top);
    }
    write_file(&out.join("ranked_specs.json"), &to_json(&result)?)?;
    write_file(&out.join("ranked_specs.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn report(ctx: &Ctx, a: &ReportArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.input).map_err(|e| io_err(&a.input, e))?;
    let report = EvalReport::from_json(&text)?;
    let rendered = match a.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => report.to_json()? + "\n",
        ReportFormat::Csv => report.per_fold_csv(),
    };
    match &a.out {
        Some(p) => write_file(&ctx.out(p), &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
