use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ensemble_fusion::cascade::{cascade_predict, CascadeRule, CascadeSpec, PostCombiner};
use ensemble_fusion::combiners::{
    accuracy_weights, bagging_train, boosting_train_traced, fuse_tables, grid_search_weights, moe_train, out_of_fold_scores, stacking_train,
    Fusion, ModelBundle, Resampling,
};
use ensemble_fusion::eval::{confusion, metrics, report, stratified_split, ReferenceBaselines, RunMetadata};
use ensemble_fusion::learner::{extract_features, train, FeatureSet, LinearModel, TrainConfig};
use ensemble_fusion::preprocess::{encode_pgm, load_image, AugmentPlan, FlipAxis, Partition, Pipeline, PipelineInput, ResizeMode};
use ensemble_fusion::score_io::{
    features_to_string, manifest_to_string, parse_features, parse_manifest, parse_score_table, parse_split, score_table_to_string,
    split_to_string, DatasetManifest, ManifestEntry,
};
use ensemble_fusion::{Error, LabelSpace, ScoreTable, TiePolicy};

use crate::*;

type CliResult<T = ()> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Split(a) => split(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Features(a) => features(a),
        Command::TrainBase(a) => train_base(a),
        Command::Oof(a) => oof(a),
        Command::Predict(a) => predict(a),
        Command::Bag(a) => bag(a),
        Command::Boost(a) => boost(a),
        Command::Fuse(a) => fuse(a),
        Command::Cascade(a) => cascade(a),
        Command::Eval(a) => eval(a),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Engine(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Write through a sibling temp file and rename, so a failed run never
/// leaves a partial output behind.
fn write_atomic(path: &Path, contents: &[u8]) -> CliResult {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(contents).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn label_space(arg: &ClassesArg) -> CliResult<Option<LabelSpace>> {
    Ok(match &arg.classes {
        Some(c) => Some(LabelSpace::new(c.iter().map(|s| s.trim().to_string()))?),
        None => None,
    })
}

fn read_manifest(path: &Path, classes: &ClassesArg) -> CliResult<DatasetManifest> {
    Ok(parse_manifest(&read_text(path)?, label_space(classes)?.as_ref())?)
}

/// Manifest image paths are relative to the manifest's directory.
fn image_path(manifest: &Path, entry: &ManifestEntry) -> PathBuf {
    let p = Path::new(&entry.path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn read_scores(path: &Path) -> CliResult<ScoreTable> {
    let parsed = parse_score_table(&read_text(path)?, &stem(path))?;
    if parsed.renormalized_rows > 0 {
        eprintln!(
            "warning: {} rows of {} renormalized (sum off by at most 1e-3)",
            parsed.renormalized_rows,
            path.display()
        );
    }
    Ok(parsed.table)
}

fn read_tables(paths: &[PathBuf]) -> CliResult<Vec<ScoreTable>> {
    paths.iter().map(|p| read_scores(p)).collect()
}

fn read_split_ids(path: &Path, keep: Partition) -> CliResult<HashSet<String>> {
    Ok(parse_split(&read_text(path)?)?
        .into_iter()
        .filter(|(_, p)| *p == keep)
        .map(|(id, _)| id)
        .collect())
}

/// Feature rows, optionally restricted to one partition of a split. Derived
/// ids (`<id>#...`) follow their source sample.
fn load_features(input: &FeatureInput) -> CliResult<FeatureSet> {
    let set = parse_features(&read_text(&input.features)?, label_space(&input.classes)?.as_ref())?;
    let (Some(split), Some(partition)) = (&input.split, input.partition) else {
        return Ok(set);
    };
    let partition = match partition {
        PartitionArg::Train => Partition::Train,
        PartitionArg::Test => Partition::Test,
    };
    let sources = read_split_ids(split, partition)?;
    let keep: HashSet<&str> = set
        .ids()
        .iter()
        .filter(|id| sources.contains(id.split('#').next().unwrap_or(id)))
        .map(String::as_str)
        .collect();
    Ok(set.filter_ids(&keep))
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        l2: a.l2,
        seed: a.seed.seed,
    }
}

fn tie_policy(tie: TieArg, seed: u64) -> TiePolicy {
    match tie {
        TieArg::Lowest => TiePolicy::LowestIndex,
        TieArg::Random => TiePolicy::Random(seed),
    }
}

fn with_newline(mut s: String) -> Vec<u8> {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s.into_bytes()
}

fn split(a: SplitArgs) -> CliResult {
    let manifest = read_manifest(&a.manifest, &a.classes)?;
    let s = stratified_split(&manifest, a.ratio, a.seed.seed)?;
    write_atomic(&a.out, split_to_string(&s).as_bytes())?;
    println!("train {}  test {}", s.train_ids.len(), s.test_ids.len());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> CliResult {
    let manifest = read_manifest(&a.manifest, &a.classes)?;
    if a.size == 0 {
        return Err(CliError::Usage("--size must be positive".into()));
    }
    let rotations: Vec<u8> = if a.augment.contains(&AugmentArg::Rot90) { vec![1, 2, 3] } else { vec![] };
    let mut flips = Vec::new();
    if a.augment.contains(&AugmentArg::FlipH) {
        flips.push(FlipAxis::Horizontal);
    }
    if a.augment.contains(&AugmentArg::FlipV) {
        flips.push(FlipAxis::Vertical);
    }
    let plan = AugmentPlan::new(rotations, flips, 0)?;
    if !plan.is_identity() && a.split.is_none() {
        return Err(CliError::Usage("augmentation needs --split so test samples stay untouched".into()));
    }
    let partitions: Option<HashMap<String, Partition>> = match &a.split {
        Some(p) => Some(parse_split(&read_text(p)?)?.into_iter().collect()),
        None => None,
    };
    let mut inputs = Vec::with_capacity(manifest.len());
    for e in manifest.entries() {
        let partition = match &partitions {
            Some(map) => *map
                .get(&e.sample_id)
                .ok_or_else(|| Error::Misaligned(format!("sample {:?} missing from split", e.sample_id)))?,
            None => Partition::Test,
        };
        inputs.push(PipelineInput {
            sample_id: e.sample_id.clone(),
            label: e.label,
            partition,
            image: load_image(image_path(&a.manifest, e))?,
        });
    }
    let pipeline = Pipeline {
        side: a.size,
        mode: match a.mode {
            ModeArg::Pad => ResizeMode::Pad,
            ModeArg::Stretch => ResizeMode::Stretch,
        },
        fill: 0.0,
        normalize: !a.no_normalize,
        plan,
    };
    let prepared = pipeline.run(&inputs)?;
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    let mut entries = Vec::with_capacity(prepared.len());
    for (i, s) in prepared.iter().enumerate() {
        let name = format!("{i:06}.pgm");
        write_atomic(&a.out.join(&name), &encode_pgm(&s.image))?;
        entries.push(ManifestEntry {
            sample_id: s.sample_id.clone(),
            path: name,
            label: s.label,
        });
    }
    let out_manifest = DatasetManifest::new(manifest.label_space().clone(), entries)?;
    write_atomic(&a.out.join("manifest.csv"), manifest_to_string(&out_manifest).as_bytes())?;
    println!("{} inputs → {} images", inputs.len(), prepared.len());
    Ok(())
}

fn features(a: FeaturesArgs) -> CliResult {
    if a.side == 0 {
        return Err(CliError::Usage("--side must be positive".into()));
    }
    let manifest = read_manifest(&a.manifest, &a.classes)?;
    let mut rows = Vec::with_capacity(manifest.len());
    for e in manifest.entries() {
        rows.push(extract_features(&load_image(image_path(&a.manifest, e))?, a.side));
    }
    let set = FeatureSet::new(
        manifest.label_space().clone(),
        manifest.entries().iter().map(|e| e.sample_id.clone()).collect(),
        rows,
        manifest.entries().iter().map(|e| Some(e.label)).collect(),
    )?;
    write_atomic(&a.out, features_to_string(&set).as_bytes())
}

fn train_base(a: TrainBaseArgs) -> CliResult {
    let data = load_features(&a.input)?.to_dataset()?;
    let model = train(&data, &train_config(&a.train), None)?;
    println!("training accuracy {:.4}", model.accuracy(&data)?);
    write_atomic(&a.out, &with_newline(ModelBundle::Linear(model).to_json()))
}

fn oof(a: OofArgs) -> CliResult {
    let set = load_features(&a.input)?;
    let scores = out_of_fold_scores(&set, a.folds, &train_config(&a.train), &stem(&a.out))?;
    debug_assert!(scores.is_out_of_fold());
    write_atomic(&a.out, score_table_to_string(&scores.table).as_bytes())
}

fn predict(a: PredictArgs) -> CliResult {
    let bundle = ModelBundle::from_json(&read_text(&a.model)?)?;
    let set = load_features(&a.input)?;
    let table = bundle.score(&set, &stem(&a.out))?;
    write_atomic(&a.out, score_table_to_string(&table).as_bytes())
}

fn bag(a: BagArgs) -> CliResult {
    let data = load_features(&a.input)?.to_dataset()?;
    let config = train_config(&a.train);
    let ensemble = bagging_train(&data, a.replicates, &config, config.seed, Resampling::Bootstrap)?;
    println!("training accuracy {:.4}", ensemble.accuracy(&data)?);
    write_atomic(&a.out, &with_newline(ModelBundle::Bag(ensemble).to_json()))
}

fn boost(a: BoostArgs) -> CliResult {
    let data = load_features(&a.input)?.to_dataset()?;
    let (ensemble, trace) = boosting_train_traced(&data, a.rounds, &train_config(&a.train))?;
    for (i, r) in trace.rounds.iter().enumerate() {
        println!("round {}  error {:.6}  alpha {:.6}", i + 1, r.error, r.alpha);
    }
    println!("stopped: {:?}  training accuracy {:.4}", trace.stop, ensemble.accuracy(&data)?);
    write_atomic(&a.out, &with_newline(ModelBundle::Boost(ensemble).to_json()))
}

fn parse_weights(a: &FuseArgs, tables: &[ScoreTable]) -> CliResult<Vec<f64>> {
    let spec = a.weights.as_deref().expect("clap requires --weights for wavg").trim();
    let validation = || -> CliResult<Vec<ScoreTable>> {
        match &a.validation_scores {
            Some(paths) => read_tables(paths),
            None => Ok(tables.to_vec()),
        }
    };
    let weights = match spec {
        "accuracy" => accuracy_weights(&validation()?)?,
        "grid" => grid_search_weights(&validation()?, a.grid_steps)?,
        list => list
            .split(',')
            .map(|w| w.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::Usage(format!("--weights {list:?} is not a comma-separated list of numbers")))?,
    };
    let shown: Vec<String> = weights.iter().map(|w| format!("{w:.6}")).collect();
    eprintln!("weights {}", shown.join(","));
    Ok(weights)
}

fn load_meta(path: &Path) -> CliResult<LinearModel> {
    Ok(LinearModel::from_json(&read_text(path)?)?)
}

fn save_meta(a: &FuseArgs, model: &LinearModel) -> CliResult {
    match &a.save_meta {
        Some(p) => write_atomic(p, &with_newline(model.to_json())),
        None => Ok(()),
    }
}

fn features_by_id<'s>(set: &'s FeatureSet, table: &ScoreTable) -> CliResult<Vec<Vec<f64>>> {
    let index: HashMap<&'s str, usize> = set.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    table
        .rows()
        .iter()
        .map(|r| {
            index
                .get(r.sample_id.as_str())
                .map(|&i| set.rows()[i].clone())
                .ok_or_else(|| Error::Misaligned(format!("no features for sample {:?}", r.sample_id)).into())
        })
        .collect()
}

fn fuse(a: FuseArgs) -> CliResult {
    if a.weights.is_some() && a.method != MethodArg::Wavg {
        return Err(CliError::Usage("--weights only applies to --method wavg".into()));
    }
    let tables = read_tables(&a.scores)?;
    let policy = tie_policy(a.tie, a.train.seed.seed);
    let config = train_config(&a.train);
    let meta;
    let gate_features;
    let rule = match a.method {
        MethodArg::Majority => {
            if tables.len() % 2 == 0 {
                eprintln!("warning: {} voters; ties are broken by the tie policy", tables.len());
            }
            Fusion::Majority(policy)
        }
        MethodArg::Max => Fusion::Max(policy),
        MethodArg::Avg => Fusion::Average,
        MethodArg::Wavg => Fusion::Weighted(parse_weights(&a, &tables)?),
        MethodArg::Stack => {
            meta = match (&a.meta, &a.train_scores) {
                (Some(p), _) => load_meta(p)?,
                (None, Some(paths)) => {
                    let m = stacking_train(&read_tables(paths)?, &config)?;
                    save_meta(&a, &m)?;
                    m
                }
                (None, None) => return Err(CliError::Usage("stack needs --meta or --train-scores".into())),
            };
            Fusion::Stacking(&meta)
        }
        MethodArg::Moe => {
            let Some(fp) = &a.features else {
                return Err(CliError::Usage("moe needs --features for the rows being fused".into()));
            };
            gate_features = parse_features(&read_text(fp)?, None)?;
            meta = match (&a.meta, &a.train_scores, &a.train_features) {
                (Some(p), _, _) => load_meta(p)?,
                (None, Some(paths), Some(tf)) => {
                    let train_tables = read_tables(paths)?;
                    let train_set = parse_features(&read_text(tf)?, None)?;
                    let x = features_by_id(&train_set, &train_tables[0])?;
                    let labels = train_tables[0].labels()?;
                    let gate = moe_train(&x, &train_tables, &labels, &config)?;
                    save_meta(&a, &gate)?;
                    gate
                }
                _ => return Err(CliError::Usage("moe needs --meta, or --train-scores with --train-features".into())),
            };
            Fusion::MixtureOfExperts {
                gate: &meta,
                features: &gate_features,
            }
        }
    };
    let fused = fuse_tables(&tables, &rule, &stem(&a.out))?;
    write_atomic(&a.out, score_table_to_string(&fused).as_bytes())
}

fn cascade(a: CascadeArgs) -> CliResult {
    let spec = CascadeSpec {
        rule: match a.rule {
            RuleArg::Lift => CascadeRule::LiftProportional,
            RuleArg::Gate => CascadeRule::HardGate,
        },
        gate_threshold: a.threshold,
        post_combiner: match a.post {
            PostArg::Avg => PostCombiner::ProbAverage {},
            PostArg::Wavg => PostCombiner::WeightedAverage {
                weights: a.weights.clone().expect("clap requires --weights for wavg"),
            },
        },
        binary_negative: a.binary_negative.clone(),
        multi_negative: a.multi_negative.clone(),
    };
    let bin = read_scores(&a.binary)?;
    let multi = read_scores(&a.multi)?;
    let fused = cascade_predict(&bin, &multi, &spec)?;
    write_atomic(&a.out, score_table_to_string(&fused).as_bytes())?;
    if let Some(p) = &a.spec_out {
        write_atomic(p, &with_newline(spec.to_json()))?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let table = read_scores(&a.scores)?;
    let policy = tie_policy(a.tie, a.seed.seed);
    let cm = confusion(&table, policy)?;
    let m = metrics(&cm)?;
    let mut inputs = vec![file_name(&a.scores)];
    let spec = match &a.spec {
        Some(p) => {
            inputs.push(file_name(p));
            let value: serde_json::Value = serde_json::from_str(&read_text(p)?).map_err(|e| Error::Format {
                line: e.line() as u64,
                message: e.to_string(),
            })?;
            Some(value)
        }
        None => None,
    };
    let run = RunMetadata {
        command: "eval".into(),
        inputs,
        model_id: table.model_id().to_string(),
        split: a.split_name.clone(),
        tie_policy: policy,
    };
    let r = report(run, &cm, &m, spec, &ReferenceBaselines);
    write_atomic(&a.report, r.to_json().as_bytes())?;
    print!("{}", r.to_text());
    Ok(())
}
