use std::fmt::Write as _;
use std::path::Path;

use socketvib::container::Manifest;
use socketvib::dsp::{run_pipeline, PipelineConfig};
use socketvib::lstm::{
    evaluate, hyper_search, provenance_warnings, reference_preset, train, ModelParams, NetworkSpec, SearchSpace,
    TrainConfig,
};
use socketvib::report::{bar_chart_svg, classifier_table_csv, classifier_table_text, energy_chart_svg, ClassifierRow, TransmissionReport};
use socketvib::signal::{load_dataset, save_dataset, split_dataset, validate_dataset, Dataset, Finger};
use socketvib::sim::{batch_simulate, build_hand_model, HandArchetype, HandModel, ImpactorConfig, SimArchive, PRESET_VERSION};
use socketvib::workflow::{dataset_from_outputs, generate_dataset, summarize_outputs};

use crate::run::{CliError, CliResult, Run};
use crate::{Command, ImpactArgs, PipelineArgs};

pub fn execute(cmd: Command, mut run: Run) -> CliResult<()> {
    match cmd {
        Command::Simulate { hand, n, impact } => simulate(&mut run, hand, n, &impact)?,
        Command::Pipeline { archive, pipeline } => pipeline_cmd(&mut run, &archive, &pipeline)?,
        Command::Dataset {
            hand,
            archive,
            n,
            impact,
            pipeline,
        } => dataset(&mut run, hand, archive.as_deref(), n, &impact, &pipeline)?,
        Command::Split { dataset, fractions } => split(&mut run, &dataset, &fractions)?,
        Command::Train {
            train,
            val,
            preset,
            learning_rate,
            epochs,
            dense,
            hidden,
            batch_size,
            dropout,
        } => {
            let o = Overrides {
                preset,
                learning_rate,
                epochs,
                dense,
                hidden,
                batch_size,
                dropout,
            };
            train_cmd(&mut run, &train, &val, &o)?
        }
        Command::Eval { model, test } => eval(&mut run, &model, &test)?,
        Command::Search {
            train,
            val,
            budget,
            parallel,
        } => search(&mut run, &train, &val, budget, parallel)?,
        Command::TransmissionReport { archives, pipeline } => transmission(&mut run, &archives, &pipeline)?,
    }
    run.finish()
}

fn impactor(run: &Run, args: &ImpactArgs) -> CliResult<ImpactorConfig> {
    let mut m = run.config.sub("impactor");
    if let Some(mode) = args.impactor {
        m.set("mode", mode);
    }
    let mut c = ImpactorConfig::from_manifest(&m)?;
    if args.no_jitter {
        c = c.without_jitter();
    }
    c.validate()?;
    Ok(c)
}

fn hand_model(run: &mut Run, hand: HandArchetype, args: &ImpactArgs) -> HandModel {
    let mut m = build_hand_model(hand);
    if args.no_noise {
        m.sensor.noise_std = 0.0;
    }
    run.note("hand", hand);
    run.note("hand.preset_version", PRESET_VERSION);
    run.note("hand.noise_std", m.sensor.noise_std);
    m
}

fn pipeline_config(run: &mut Run, args: &PipelineArgs) -> CliResult<PipelineConfig> {
    let mut c = PipelineConfig::from_manifest(&run.config.sub("pipeline"))?;
    if let Some(r) = args.reduction {
        c.reduction = r;
    }
    run.record("pipeline", &c.to_manifest());
    Ok(c)
}

fn simulate(run: &mut Run, hand: HandArchetype, n: usize, args: &ImpactArgs) -> CliResult<()> {
    let model = hand_model(run, hand, args);
    let imp = impactor(run, args)?;
    run.record("impactor", &imp.to_manifest());
    run.note("n_per_finger", n);
    let archive = SimArchive {
        archetype: hand,
        seed: run.seed,
        n_per_finger: n,
        impactor: imp,
        outputs: batch_simulate(&model, &imp, n, run.seed)?,
    };
    let file = format!("sim-{}.bin", hand.code());
    archive.save(&run.path(&file))?;
    run.output(&file);
    println!("simulated {} impacts on {} -> {}", archive.outputs.len(), hand.long_name(), run.path(&file).display());
    Ok(())
}

fn pipeline_cmd(run: &mut Run, archive_path: &Path, args: &PipelineArgs) -> CliResult<()> {
    run.input("archive", archive_path)?;
    let archive = SimArchive::load(archive_path)?;
    let cfg = pipeline_config(run, args)?;
    let mut csv = String::from("finger,repetition,seed,impact_speed,peak_index,padded,no_contact,e0,e1,e2,e3,e4\n");
    for o in &archive.outputs {
        let p = run_pipeline(&o.output, &cfg)?;
        write!(
            csv,
            "{},{},{},{:.9e},{},{},{}",
            o.finger.name(),
            o.repetition,
            o.seed,
            o.output.impact_speed,
            p.peak,
            p.padded,
            p.no_contact
        )?;
        for e in p.energies {
            write!(csv, ",{e:.9e}")?;
        }
        csv.push('\n');
    }
    run.write("impacts.csv", &csv)?;
    let summary = summarize_outputs(archive.archetype, &archive.outputs, &cfg)?;
    let mut energy = String::from("finger,sensor_0,sensor_1,sensor_2,sensor_3,sensor_4\n");
    for (f, row) in Finger::ALL.iter().zip(&summary.matrix) {
        energy.push_str(f.name());
        for v in row {
            write!(energy, ",{v:.9e}")?;
        }
        energy.push('\n');
    }
    writeln!(energy, "mean,{:.9e}", summary.mean)?;
    run.write("energy.csv", &energy)?;
    run.write("energy.svg", &energy_chart_svg(&summary))?;
    println!("{}: mean socket energy {:.6e} over {} impacts", archive.archetype.code(), summary.mean, summary.impacts);
    Ok(())
}

fn dataset(
    run: &mut Run,
    hand: Option<HandArchetype>,
    archive: Option<&Path>,
    n: usize,
    impact: &ImpactArgs,
    pargs: &PipelineArgs,
) -> CliResult<()> {
    let cfg = pipeline_config(run, pargs)?;
    let d = match (archive, hand) {
        (Some(path), _) => {
            run.input("archive", path)?;
            let a = SimArchive::load(path)?;
            let mut prov = Manifest::new();
            prov.set("n_per_finger", a.n_per_finger);
            prov.merge_prefixed("impactor", &a.impactor.to_manifest());
            prov.merge_prefixed("pipeline", &cfg.to_manifest());
            dataset_from_outputs(a.archetype, &a.outputs, &cfg, a.seed, prov)?
        }
        (None, Some(hand)) => {
            let model = hand_model(run, hand, impact);
            let imp = impactor(run, impact)?;
            run.record("impactor", &imp.to_manifest());
            run.note("n_per_finger", n);
            generate_dataset(&model, &imp, &cfg, n, run.seed)?
        }
        (None, None) => return Err(CliError::Usage("dataset needs --hand or --archive".into())),
    };
    let violations = validate_dataset(&d);
    for v in &violations {
        eprintln!("warning: {v}");
    }
    let file = format!("dataset-{}.bin", d.manifest.archetype.code());
    save_dataset(&d, &run.path(&file))?;
    run.output(&file);
    println!("{} samples for {} ({:?} per finger) -> {}", d.len(), d.manifest.archetype.code(), d.counts(), run.path(&file).display());
    Ok(())
}

fn split(run: &mut Run, path: &Path, fractions: &[f64]) -> CliResult<()> {
    let [a, b, c] = fractions else {
        return Err(CliError::Usage("--fractions takes three values".into()));
    };
    run.input("dataset", path)?;
    let d = load_dataset(path)?;
    let (tr, va, te) = split_dataset(&d, [*a, *b, *c], run.seed)?;
    run.note("split.fractions", format!("{a},{b},{c}"));
    for (name, part) in [("train.bin", &tr), ("validation.bin", &va), ("test.bin", &te)] {
        save_dataset(part, &run.path(name))?;
        run.output(name);
    }
    println!("train {} / validation {} / test {}", tr.len(), va.len(), te.len());
    Ok(())
}

struct Overrides {
    preset: Option<HandArchetype>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    dense: Option<usize>,
    hidden: Option<usize>,
    batch_size: Option<usize>,
    dropout: Option<f64>,
}

fn load_split(run: &mut Run, name: &str, path: &Path) -> CliResult<Dataset> {
    run.input(name, path)?;
    Ok(load_dataset(path)?)
}

/// Preset of `hand`, then the config file, then explicit flags.
fn settings(run: &Run, hand: HandArchetype, o: &Overrides) -> CliResult<(NetworkSpec, TrainConfig)> {
    let (mut spec, mut cfg) = reference_preset(hand, run.seed);
    let net = run.config.sub("network");
    let tc = run.config.sub("train");
    spec.dense_units = o.dense.or(net.parse_opt("dense_units")?).unwrap_or(spec.dense_units);
    spec.lstm_hidden = o.hidden.or(net.parse_opt("lstm_hidden")?).unwrap_or(spec.lstm_hidden);
    spec.dropout = o.dropout.or(net.parse_opt("dropout")?).unwrap_or(spec.dropout);
    cfg.learning_rate = o.learning_rate.or(tc.parse_opt("learning_rate")?).unwrap_or(cfg.learning_rate);
    cfg.epochs = o.epochs.or(tc.parse_opt("epochs")?).unwrap_or(cfg.epochs);
    cfg.batch_size = o.batch_size.or(tc.parse_opt("batch_size")?).unwrap_or(cfg.batch_size);
    spec.validate()?;
    cfg.validate()?;
    Ok((spec, cfg))
}

fn train_cmd(run: &mut Run, train_path: &Path, val_path: &Path, o: &Overrides) -> CliResult<()> {
    let tr = load_split(run, "train", train_path)?;
    let va = load_split(run, "validation", val_path)?;
    let hand = o.preset.unwrap_or(tr.manifest.archetype);
    let (spec, cfg) = settings(run, hand, o)?;
    run.note("preset", hand);
    run.record("network", &spec.to_manifest());
    run.record("train", &cfg.to_manifest());
    let (params, history) = train(&spec, &cfg, &tr, &va)?;
    params.save(&run.path("model.bin"))?;
    run.output("model.bin");
    run.write("history.csv", &history.to_csv())?;
    run.note("best_epoch", history.best_epoch);
    run.note("best_val_accuracy", history.best_val_accuracy);
    println!(
        "best validation accuracy {:.2}% at epoch {} of {}",
        history.best_val_accuracy * 100.0,
        history.best_epoch,
        cfg.epochs
    );
    Ok(())
}

fn eval(run: &mut Run, model_path: &Path, test_path: &Path) -> CliResult<()> {
    run.input("model", model_path)?;
    let params = ModelParams::load(model_path)?;
    let test = load_split(run, "test", test_path)?;
    let warnings = provenance_warnings(&params, &test);
    if !warnings.is_empty() {
        return Err(CliError::Provenance(format!("refusing to evaluate: {}", warnings.join("; "))));
    }
    let r = evaluate(&params, &test)?;
    let row = ClassifierRow {
        archetype: test.manifest.archetype,
        val_accuracy: params.provenance.val_accuracy.map(|v| v * 100.0),
        test_accuracy: r.accuracy * 100.0,
        test_mean_precision: r.macro_precision.value * 100.0,
    };
    run.write("report.txt", &r.to_text())?;
    run.write("summary.csv", &classifier_table_csv(&[row]))?;
    run.note("accuracy", r.accuracy);
    print!("{}", classifier_table_text(&[row]));
    println!();
    print!("{}", r.to_text());
    Ok(())
}

fn search_space(run: &Run) -> CliResult<SearchSpace> {
    let m = run.config.sub("search");
    let d = SearchSpace::default();
    let pair = |lo: &str, hi: &str, def: (usize, usize)| -> CliResult<(usize, usize)> {
        Ok((m.parse_opt(lo)?.unwrap_or(def.0), m.parse_opt(hi)?.unwrap_or(def.1)))
    };
    let batch_sizes = match m.get("batch_sizes") {
        Some(s) => s
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| CliError::Usage(format!("bad batch size {v:?} in search.batch_sizes"))))
            .collect::<CliResult<_>>()?,
        None => d.batch_sizes.clone(),
    };
    let s = SearchSpace {
        learning_rate: (
            m.parse_opt("learning_rate_min")?.unwrap_or(d.learning_rate.0),
            m.parse_opt("learning_rate_max")?.unwrap_or(d.learning_rate.1),
        ),
        epochs: pair("epochs_min", "epochs_max", d.epochs)?,
        dense_units: pair("dense_min", "dense_max", d.dense_units)?,
        lstm_hidden: pair("hidden_min", "hidden_max", d.lstm_hidden)?,
        batch_sizes,
        template: d.template,
    };
    s.validate()?;
    Ok(s)
}

fn search(run: &mut Run, train_path: &Path, val_path: &Path, budget: usize, parallel: bool) -> CliResult<()> {
    let tr = load_split(run, "train", train_path)?;
    let va = load_split(run, "validation", val_path)?;
    let space = search_space(run)?;
    run.note("search.budget", budget);
    run.note("search.learning_rate", format!("{},{}", space.learning_rate.0, space.learning_rate.1));
    run.note("search.epochs", format!("{},{}", space.epochs.0, space.epochs.1));
    run.note("search.dense_units", format!("{},{}", space.dense_units.0, space.dense_units.1));
    run.note("search.lstm_hidden", format!("{},{}", space.lstm_hidden.0, space.lstm_hidden.1));
    let out = hyper_search(&space, budget, run.seed, &tr, &va, parallel)?;
    run.write("trials.csv", &out.to_csv())?;
    let mut best = Manifest::new();
    best.set("trial", out.best.index);
    best.set("val_accuracy", out.best.val_accuracy().unwrap_or(f64::NAN));
    best.merge_prefixed("network", &out.best.spec.to_manifest());
    best.merge_prefixed("train", &out.best.config.to_manifest());
    run.write("best.txt", &best.to_text())?;
    print!("{}", best.to_text());
    Ok(())
}

fn transmission(run: &mut Run, paths: &[std::path::PathBuf], args: &PipelineArgs) -> CliResult<()> {
    let cfg = pipeline_config(run, args)?;
    let mut summaries = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        run.input(&format!("archive{i}"), p)?;
        let a = SimArchive::load(p)?;
        summaries.push(summarize_outputs(a.archetype, &a.outputs, &cfg)?);
    }
    let report = TransmissionReport::new(summaries)?;
    run.write("energy.csv", &report.energy_csv())?;
    run.write("summary.csv", &report.summary_csv())?;
    run.write("report.txt", &report.to_text())?;
    for s in &report.summaries {
        run.write(&format!("energy-{}.svg", s.archetype.code()), &energy_chart_svg(s))?;
    }
    let groups: Vec<(String, Vec<f64>)> = report
        .summaries
        .iter()
        .map(|s| (s.archetype.code().to_string(), vec![s.mean]))
        .collect();
    run.write("mean-energy.svg", &bar_chart_svg("Mean socket energy per hand", "energy", &["mean energy"], &groups))?;
    match report.rho {
        Some(r) => run.note("spearman_rho", r),
        None => run.note("spearman_rho", "undefined"),
    }
    print!("{}", report.to_text());
    Ok(())
}
