use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use ted_core::analytics::{
    evaluate_dataset, render_ablation_text, render_eval_text, render_summary_text, summarize,
    window_ablation, write_correlations_csv, write_summary_csv, Scale, Transform,
};
use ted_core::engine::{score_dataset, write_scores_csv};
use ted_core::ingestion::{load_dataset, load_manifest, FeatureCsvSchema, LoadOptions, LoadedDataset};
use ted_core::interpret::{
    interpret, read_predictions_csv, render_interpret_text, train_on_records, write_predictions_csv,
    write_subject_f1_csv, AgreementThresholds, ForestModel, ForestParams, InterpretOptions,
    PredictionSource,
};
use ted_core::model::{
    AuProfile, AuSource, FeatureSet, ScoredFrame, SequenceKey, TedConfig, WindowOrientation,
};

use crate::args::{
    AuSourceArg, Command, CommonArgs, EvaluateArgs, Format, InterpretArgs, Orientation, ScaleArg,
    ScoreArgs, SummarizeArgs, SweepArgs, TedArgs,
};
use crate::error::CliError;

type WriteError = Box<dyn std::error::Error + Send + Sync>;

/// A loaded dataset with the fully resolved scoring configuration.
struct Prepared {
    cfg: TedConfig,
    dataset: LoadedDataset,
    inputs: Vec<PathBuf>,
    base_dir: PathBuf,
}

fn base_config(ted: &TedArgs) -> Result<(TedConfig, Option<AuProfile>), CliError> {
    let feature_sets = ted
        .feature_sets
        .iter()
        .map(|s| s.trim().parse::<FeatureSet>())
        .collect::<Result<_, _>>()?;
    let au_source = match ted.au_source {
        AuSourceArg::Manual => AuSource::Manual,
        AuSourceArg::Predicted => AuSource::Predicted,
    };
    let profile = match ted.profile.as_str() {
        "overall" => None,
        name => Some(AuProfile::builtin(name)?),
    };
    let cfg = TedConfig {
        window: ted.window as usize,
        window_orientation: match ted.orientation {
            Orientation::Trailing => WindowOrientation::Trailing,
            Orientation::Forward => WindowOrientation::Forward,
        },
        // placeholder until the data is loaded when the profile is "overall"
        profile: profile.clone().unwrap_or_else(AuProfile::happy),
        au_source,
        feature_sets,
    };
    Ok((cfg, profile))
}

fn prepare(common: &CommonArgs, ted: &TedArgs) -> Result<Prepared, CliError> {
    let (mut cfg, profile) = base_config(ted)?;
    if profile.is_some() {
        cfg.validate()?;
    }

    let schema = match &common.schema {
        Some(path) => FeatureCsvSchema::from_json_file(path)?,
        None => FeatureCsvSchema::default(),
    };
    let manifest = load_manifest(&common.manifest)?;
    let base_dir = common
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let opts = LoadOptions {
        schema,
        au_source: cfg.au_source,
        profile: profile.clone(),
    };
    let dataset = load_dataset(&manifest, &base_dir, &opts)?;
    for (key, finding) in &dataset.findings {
        eprintln!("warning: sequence {key}: {finding}");
    }

    if profile.is_none() {
        cfg.profile = match cfg.au_source {
            AuSource::Manual => AuProfile::new("overall", dataset.manual_au_ids.iter().copied())?,
            AuSource::Predicted => AuProfile::overall(dataset.records.iter().flat_map(|r| r.frames.iter()))?,
        };
        cfg.validate()?;
    }

    let mut inputs = vec![common.manifest.clone()];
    inputs.extend(common.schema.iter().cloned());
    inputs.extend(dataset.input_files.iter().cloned());
    Ok(Prepared {
        cfg,
        dataset,
        inputs,
        base_dir,
    })
}

fn score(prepared: &Prepared) -> Result<BTreeMap<SequenceKey, Vec<ScoredFrame>>, CliError> {
    let scored = score_dataset(&prepared.dataset.records, &prepared.cfg);
    if !scored.errors.is_empty() {
        let lines: Vec<String> = scored
            .errors
            .iter()
            .map(|e| format!("sequence {}: {}", e.key, e.error))
            .collect();
        return Err(CliError::Compute(lines.join("\n")));
    }
    Ok(scored.results)
}

/// Collects result files and writes them, with the run metadata, under the
/// output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    fn add_csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<(), WriteError>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        self.add(name, buf);
        Ok(())
    }

    fn finish<C: Serialize>(mut self, command: &str, config: &C, prepared: &Prepared) -> Result<(), CliError> {
        let metadata = RunMetadata {
            tool: "ted",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            arguments: config,
            ted_config: &prepared.cfg,
            inputs: digests(&prepared.inputs, &prepared.base_dir)?,
            outputs: self.files.iter().map(|(n, _)| n.clone()).collect(),
        };
        self.add_json("run_metadata.json", &metadata);

        fs::create_dir_all(&self.dir).map_err(|e| CliError::Output(format!("{}: {e}", self.dir.display())))?;
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        }
        eprintln!("wrote {} files to {}", self.files.len(), self.dir.display());
        Ok(())
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunMetadata<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    /// The only field that changes between identical runs.
    created_at: String,
    arguments: &'a C,
    ted_config: &'a TedConfig,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

fn digests(paths: &[PathBuf], base_dir: &Path) -> Result<Vec<InputDigest>, CliError> {
    paths
        .iter()
        .map(|path| {
            let bytes = fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
            let shown = path.strip_prefix(base_dir).unwrap_or(path);
            Ok(InputDigest {
                path: shown.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect()
}

fn report_text(outputs: &mut Outputs, format: Format, name: &str, text: String) {
    if format == Format::Text {
        print!("{text}");
        outputs.add(name, text.into_bytes());
    }
}

fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let prepared = prepare(&args.common, &args.ted)?;
    let scores = score(&prepared)?;
    let mut out = Outputs::new(&args.common.out);
    out.add_csv("scores.csv", |buf| Ok(write_scores_csv(buf, &scores)?))?;
    let frames: usize = scores.values().map(Vec::len).sum();
    report_text(
        &mut out,
        args.common.format,
        "scores.txt",
        format!("scored {frames} frames in {} sequences\n", scores.len()),
    );
    out.finish("score", args, &prepared)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let prepared = prepare(&args.common, &args.ted)?;
    let windows: Vec<usize> = args.windows.iter().map(|&w| w as usize).collect();
    let report = window_ablation(&prepared.dataset.records, &prepared.cfg, &windows)?;
    let mut out = Outputs::new(&args.common.out);
    out.add_json("ablation.json", &report);
    if args.common.format == Format::Csv {
        out.add_csv("ablation.csv", |buf| Ok(write_correlations_csv(buf, &report.windows)?))?;
    }
    report_text(&mut out, args.common.format, "ablation.txt", render_ablation_text(&report));
    out.finish("sweep", args, &prepared)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let prepared = prepare(&args.common, &args.ted)?;
    let report = evaluate_dataset(&prepared.dataset.records, &prepared.cfg)?;
    let mut out = Outputs::new(&args.common.out);
    out.add_json("evaluation.json", &report);
    if args.common.format == Format::Csv {
        out.add_csv("evaluation.csv", |buf| {
            Ok(write_correlations_csv(buf, std::slice::from_ref(&report))?)
        })?;
    }
    report_text(&mut out, args.common.format, "evaluation.txt", render_eval_text(&report));
    out.finish("evaluate", args, &prepared)
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<(), CliError> {
    let prepared = prepare(&args.common, &args.ted)?;
    let scores = score(&prepared)?;
    let scale = match args.scale {
        ScaleArg::Vas => Scale::Vas,
        ScaleArg::Opi => Scale::Opi,
    };
    let transform = if args.log { Transform::Log } else { Transform::None };
    let report = summarize(&prepared.dataset.records, &scores, scale, transform)?;
    let mut out = Outputs::new(&args.common.out);
    out.add_json("summary.json", &report);
    if args.common.format == Format::Csv {
        out.add_csv("summary.csv", |buf| Ok(write_summary_csv(buf, &report)?))?;
    }
    if args.plot_data {
        out.add_csv("summary_plot.csv", |buf| Ok(write_summary_csv(buf, &report)?))?;
    }
    report_text(&mut out, args.common.format, "summary.txt", render_summary_text(&report));
    out.finish("summarize", args, &prepared)
}

fn cmd_interpret(args: &InterpretArgs) -> Result<(), CliError> {
    let prepared = prepare(&args.common, &args.ted)?;
    let scores = score(&prepared)?;
    let params = ForestParams {
        n_trees: args.n_trees as usize,
        max_depth: args.max_depth.map(|d| d as usize),
        min_samples_leaf: args.min_samples_leaf as usize,
        balanced_bootstrap: args.balanced_bootstrap,
    };
    let feature_au_ids = prepared.cfg.profile.au_ids.clone();

    let mut inputs_extra = Vec::new();
    let source = if let Some(path) = &args.predictions {
        let file = fs::File::open(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        inputs_extra.push(path.clone());
        PredictionSource::External(read_predictions_csv(file, path)?)
    } else if let Some(path) = &args.model_in {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        inputs_extra.push(path.clone());
        PredictionSource::Model(ForestModel::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?)
    } else {
        PredictionSource::Loso {
            params: params.clone(),
            seed: args.seed,
        }
    };
    let opts = InterpretOptions {
        feature_au_ids: feature_au_ids.clone(),
        pspi_threshold: args.pspi_threshold,
        thresholds: AgreementThresholds {
            high_ted: args.high_ted,
            low_confidence: args.low_confidence,
            low_ted: args.low_ted,
            high_confidence: args.high_confidence,
        },
        source,
    };
    let (report, predictions) = interpret(&prepared.dataset.records, &scores, &opts)?;

    let mut out = Outputs::new(&args.common.out);
    out.add_json("interpret.json", &report);
    out.add_csv("predictions.csv", |buf| Ok(write_predictions_csv(buf, &predictions)?))?;
    if args.common.format == Format::Csv {
        out.add_csv("interpret.csv", |buf| Ok(write_subject_f1_csv(buf, &report.subjects)?))?;
    }
    report_text(&mut out, args.common.format, "interpret.txt", render_interpret_text(&report));

    if let Some(path) = &args.model_out {
        let model = train_on_records(
            &prepared.dataset.records,
            &feature_au_ids,
            args.pspi_threshold,
            &params,
            args.seed,
        )?;
        let mut text = model.to_json();
        text.push('\n');
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::Output(format!("{}: {e}", parent.display())))?;
        }
        fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    }

    let prepared = Prepared {
        inputs: prepared.inputs.iter().cloned().chain(inputs_extra).collect(),
        ..prepared
    };
    out.finish("interpret", args, &prepared)
}

pub fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Score(a) => cmd_score(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Interpret(a) => cmd_interpret(a),
    }
}
