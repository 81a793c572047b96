use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use copsel::config::{derive_seed, load_config, ExperimentConfig, ProfileName};
use copsel::cop::{from_document, random_instance, to_document, CopInstance};
use copsel::evolver::{read_population, select_subset, write_population, EvolvedPopulation, Sense, SubsetKind};
use copsel::features::{extract_features, read_feature_table, write_feature_table};
use copsel::harness::{
    benchmark_markdown, evolve_all, population_dir_name, read_benchmark_csv, read_study_csv, run_benchmark, run_pipeline,
    study_markdown, write_benchmark_csv, LabelStore,
};
use copsel::model::{load_model, save_model, train_model, LabelledExample};
use copsel::solvers::{measure_all, read_performance_csv, write_performance_csv, SolverKind};
use copsel::{Error, Result};

#[derive(Parser)]
#[command(name = "copsel", version, about = "Algorithm selection for constrained continuous optimization")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed (overrides the configured one).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Preset the configuration starts from.
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// TOML configuration file layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances for a problem label.
    Gen {
        #[arg(long)]
        label: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Run the instance evolver.
    Evolve {
        /// Base labels; defaults to the configured evolver bases.
        #[arg(long)]
        label: Vec<String>,
        /// Target solver; all three when omitted.
        #[arg(long)]
        target: Option<String>,
        /// `hard` or `easy`; both when omitted.
        #[arg(long)]
        sense: Option<String>,
    },
    /// Measure all solvers on instance files or directories.
    Measure { inputs: Vec<PathBuf> },
    /// Extract features of instance files or directories.
    Features { inputs: Vec<PathBuf> },
    /// Train a prediction model.
    Train {
        /// Subset kind (EP, PF, RO, PFR) drawn from evolved populations.
        #[arg(long, default_value = "PFR")]
        subset: String,
        /// Directory holding population directories.
        #[arg(long)]
        populations: Option<PathBuf>,
        /// Train on every instance present in both tables instead.
        #[arg(long, requires = "features")]
        performance: Option<PathBuf>,
        #[arg(long, requires = "performance")]
        features: Option<PathBuf>,
    },
    /// Predict the best solver for instance files or directories.
    Predict {
        #[arg(long)]
        model: PathBuf,
        inputs: Vec<PathBuf>,
    },
    /// Compare a candidate model with a baseline on fresh instances.
    Bench {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
    },
    /// Re-render markdown tables from the csv reports in the output directory.
    Report,
    /// Run the whole experiment.
    Run,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else {
        3
    }
}

fn load_instances(inputs: &[PathBuf]) -> Result<Vec<CopInstance>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<io::Result<_>>()?;
            inner.retain(|f| f.extension().is_some_and(|x| x == "json"));
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::config("no instance files given"));
    }
    files.iter().map(|f| from_document(&fs::read_to_string(f)?)).collect()
}

fn load_populations(dir: &Path) -> Result<Vec<EvolvedPopulation>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    dirs.retain(|d| d.join("run.json").is_file());
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::config(format!("no populations found under {}", dir.display())));
    }
    dirs.iter().map(|d| read_population(d)).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let profile: ProfileName = g.profile.parse()?;
    let mut overrides = g.overrides.clone();
    if let Some(seed) = g.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    let config: ExperimentConfig = load_config(profile, g.config.as_deref(), &overrides)?;
    let out = &g.out;
    config.echo(out)?;
    let master = config.experiment.seed;
    let suite = config.suite();

    match cli.command {
        Command::Gen { label, count } => {
            let spec = config.spec_for(&label)?;
            let dir = out.join("instances");
            fs::create_dir_all(&dir)?;
            for i in 0..count {
                let inst = random_instance(&spec, derive_seed(master, &["gen".to_string(), label.clone(), i.to_string()]))?;
                fs::write(dir.join(format!("{}.json", inst.id())), to_document(&inst))?;
                println!("{}", inst.id());
            }
        }
        Command::Evolve { label, target, sense } => {
            let mut cfg = config.clone();
            if !label.is_empty() {
                cfg.experiment.evolver_bases = label;
            }
            let target: Option<SolverKind> = target.map(|t| t.parse()).transpose().map_err(|e: Error| Error::config(e.to_string()))?;
            let sense: Option<Sense> = sense.map(|s| s.parse()).transpose().map_err(|e: Error| Error::config(e.to_string()))?;
            // Evolve everything with pipeline seeds, keep the requested runs.
            let pops = evolve_filtered(&cfg, target, sense)?;
            for pop in &pops {
                let dir = out.join("populations").join(population_dir_name(&pop.label, pop.target, pop.sense));
                write_population(&dir, pop)?;
                println!("{}", dir.display());
            }
        }
        Command::Measure { inputs } => {
            let instances = load_instances(&inputs)?;
            let e = &config.experiment;
            let mut records = Vec::new();
            for inst in &instances {
                let rec = measure_all(inst, &suite, e.budget, e.precision, e.repeats, derive_seed(master, &["truth", inst.id()]))?;
                info!("{}: mean FEN {:?}", inst.id(), rec.mean_fens());
                records.push(rec);
            }
            write_performance_csv(&records, e.budget, master, create(&out.join("performance.csv"))?)?;
        }
        Command::Features { inputs } => {
            let instances = load_instances(&inputs)?;
            let s = &config.features;
            let rows = instances
                .iter()
                .map(|i| {
                    let f = extract_features(i, s.n_samples, s.vicinity_radius_fraction, derive_seed(master, &["features", i.id()]))?;
                    Ok((i.id().to_string(), f))
                })
                .collect::<Result<Vec<_>>>()?;
            write_feature_table(&rows, create(&out.join("features.csv"))?)?;
        }
        Command::Train { subset, populations, performance, features } => {
            let kind: SubsetKind = subset.parse()?;
            let examples: Vec<LabelledExample> = match (populations, performance, features) {
                (_, Some(perf), Some(feat)) => {
                    let records = read_performance_csv(File::open(&perf)?)?;
                    let table: std::collections::BTreeMap<String, _> = read_feature_table(File::open(&feat)?)?.into_iter().collect();
                    records
                        .iter()
                        .filter_map(|r| table.get(&r.instance_id).map(|f| LabelledExample { features: f.clone(), mean_fen: r.mean_fens() }))
                        .collect()
                }
                (Some(dir), _, _) => {
                    let pops = load_populations(&dir)?;
                    let selected = select_subset(&pops, kind, config.training_sizes.get(kind), derive_seed(master, &["select"]))?;
                    let mut labels = LabelStore::default();
                    for s in &selected {
                        labels.ensure(&s.member.instance, &config, &suite, master)?;
                    }
                    let records: Vec<_> = labels.records.values().cloned().collect();
                    write_performance_csv(&records, config.experiment.budget, master, create(&out.join("performance.csv"))?)?;
                    let rows: Vec<_> = labels.features.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                    write_feature_table(&rows, create(&out.join("features.csv"))?)?;
                    selected.iter().filter_map(|s| labels.example(s.member.instance.id())).collect()
                }
                _ => return Err(Error::config("train needs --populations, or --performance with --features")),
            };
            let model_config = config.model_config(derive_seed(master, &["train", kind.as_str()]));
            let (model, reports) =
                train_model(&examples, &suite, config.experiment.budget, config.features, kind.as_str(), &model_config)?;
            fs::create_dir_all(out.join("models"))?;
            let path = out.join("models").join(format!("{kind}.model"));
            save_model(&model, &path)?;
            for r in &reports {
                info!("{} epochs, training SSE {:.4}, stop: {:?}", r.epochs, r.train_sse, r.stop);
            }
            println!("{}", path.display());
        }
        Command::Predict { model, inputs } => {
            let model = load_model(&model)?;
            let instances = load_instances(&inputs)?;
            let mut w = csv::Writer::from_writer(create(&out.join("predictions.csv"))?);
            w.write_record(["instance_id", "best", "predicted_de", "predicted_es", "predicted_pso"])?;
            let stdout = io::stdout();
            let mut so = stdout.lock();
            for inst in &instances {
                let p = model.predict(inst, &suite, derive_seed(master, &["features", inst.id()]))?;
                let f = p.predicted_fen;
                w.write_record([inst.id().to_string(), p.best.to_string(), f[0].to_string(), f[1].to_string(), f[2].to_string()])?;
                writeln!(so, "{}\t{}\tDE {:.0}\tES {:.0}\tPSO {:.0}", inst.id(), p.best, f[0], f[1], f[2])?;
            }
            w.flush()?;
        }
        Command::Bench { model_a, model_b } => {
            let a = load_model(&model_a)?;
            let b = load_model(&model_b)?;
            let outcome = run_benchmark(&config, &a, &b, derive_seed(master, &["bench"]))?;
            write_benchmark_csv(&outcome.rows, create(&out.join("benchmark.csv"))?)?;
            let md = benchmark_markdown(&outcome.rows, &format!("{}-PM", a.metadata.subset), &format!("{}-PM", b.metadata.subset));
            fs::write(out.join("benchmark.md"), &md)?;
            print!("{md}");
        }
        Command::Report => {
            let mut rendered = false;
            let study = out.join("study.csv");
            if study.is_file() {
                let rows = read_study_csv(File::open(&study)?)?;
                fs::write(out.join("study.md"), study_markdown(&rows, 0))?;
                rendered = true;
            }
            let bench = out.join("benchmark.csv");
            if bench.is_file() {
                let rows = read_benchmark_csv(File::open(&bench)?)?;
                let md = benchmark_markdown(&rows, "PFR-PM", "RO-PM");
                fs::write(out.join("benchmark.md"), &md)?;
                print!("{md}");
                rendered = true;
            }
            if !rendered {
                return Err(Error::config(format!("no study.csv or benchmark.csv in {}", out.display())));
            }
        }
        Command::Run => {
            let outcome = run_pipeline(&config, out)?;
            if let Some(b) = outcome.benchmark {
                print!("{}", benchmark_markdown(&b.rows, "PFR-PM", "RO-PM"));
            }
        }
    }
    Ok(())
}

/// Runs the requested subset of evolver runs with the seeds the full pipeline would use.
fn evolve_filtered(config: &ExperimentConfig, target: Option<SolverKind>, sense: Option<Sense>) -> Result<Vec<EvolvedPopulation>> {
    if target.is_none() && sense.is_none() {
        return evolve_all(config, derive_seed(config.experiment.seed, &["evolve"]));
    }
    let suite = config.suite();
    let seed = derive_seed(config.experiment.seed, &["evolve"]);
    let mut out = Vec::new();
    for label in &config.experiment.evolver_bases {
        let spec = config.spec_for(label)?;
        for t in SolverKind::ALL.into_iter().filter(|t| target.is_none_or(|x| x == *t)) {
            for s in Sense::ALL.into_iter().filter(|s| sense.is_none_or(|x| x == *s)) {
                let run_seed = derive_seed(seed, &[label.as_str(), t.as_str(), s.as_str()]);
                out.push(copsel::evolver::evolve_with(&config.evolver_config(t, s), &spec, &suite, run_seed)?);
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
