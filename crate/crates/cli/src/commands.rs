use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use eprop_core::checkpoint::{Checkpoint, DataSource};
use eprop_core::config::RunConfig;
use eprop_core::dataset::{
    build_feature_cache, load_split, BuildOptions, IndexMode, Split, SyntheticTask, Utterance,
};
use eprop_core::demo::{builtin_protocol, run_demo, write_demo_csv, Protocol};
use eprop_core::network::{init_network, NetworkConfig};
use eprop_core::trainer::{evaluate, MetricsRecord, MetricsWriter, Trainer};

use crate::{DemoArgs, EvalArgs, FeaturesArgs, TrainArgs};

pub enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<eprop_core::Error> for Failure {
    fn from(e: eprop_core::Error) -> Self {
        Failure::Run(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let cfg = match path {
        Some(p) => {
            if !p.is_file() {
                return Err(usage(anyhow!("config file {} not found", p.display())));
            }
            RunConfig::load(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(usage)?
        }
        None => RunConfig::default(),
    };
    Ok(cfg.with_env())
}

pub fn features(args: FeaturesArgs) -> CmdResult {
    let cfg = load_config(args.config.as_deref())?;
    cfg.features.validate().map_err(usage)?;
    let corpus_root = args.timit.unwrap_or_else(|| cfg.paths.timit_dir());
    if !corpus_root.is_dir() {
        return Err(usage(anyhow!(
            "corpus directory {} not found",
            corpus_root.display()
        )));
    }
    let opts = BuildOptions {
        corpus_root,
        cache_dir: args.out.unwrap_or_else(|| cfg.paths.cache_path()),
        seed: args.seed.unwrap_or(cfg.train.seed),
        mode: if args.partial {
            IndexMode::Partial
        } else {
            IndexMode::Strict
        },
        force: args.force,
    };
    let summary = build_feature_cache(&opts, &cfg.features)?;
    let m = &summary.manifest;
    println!(
        "{} train/val/test: {}/{}/{} utterances, {} phones -> {}",
        if summary.reused {
            "up to date"
        } else {
            "built"
        },
        m.count(Split::Train),
        m.count(Split::Val),
        m.count(Split::Test),
        m.phone_map.len(),
        opts.cache_dir.display()
    );
    Ok(())
}

struct Data {
    train: Vec<Utterance>,
    val: Vec<Utterance>,
    test: Vec<Utterance>,
    source: DataSource,
    network: NetworkConfig,
}

fn load_data(cfg: &RunConfig, synthetic: bool) -> Result<Data, Failure> {
    if synthetic {
        let task = SyntheticTask::new(cfg.synthetic.clone()).map_err(usage)?;
        let [train, val, test] = task.splits(cfg.train.seed);
        return Ok(Data {
            train,
            val,
            test,
            source: DataSource::Synthetic,
            network: cfg.synthetic_network(),
        });
    }
    let dir = cfg.paths.cache_path();
    if !dir.is_dir() {
        return Err(usage(anyhow!(
            "feature cache {} not found; run `eprop features` or pass --synthetic",
            dir.display()
        )));
    }
    let load = |s| load_split(&dir, s, &cfg.features).map(|(u, _)| u);
    Ok(Data {
        train: load(Split::Train)?,
        val: load(Split::Val)?,
        test: load(Split::Test)?,
        source: DataSource::Timit {
            feature_hash: cfg.features.hash(),
        },
        network: cfg.speech_network(),
    })
}

fn apply_overrides(cfg: &mut RunConfig, a: &TrainArgs) {
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(n) = a.iterations {
        cfg.train.iterations = Some(n);
    }
    if let Some(n) = a.eval_every {
        cfg.train.eval_every = n;
    }
    if let Some(m) = a.model {
        cfg.network.model = m;
    }
    if let Some(b) = a.broadcast {
        cfg.network.broadcast = b;
    }
    if let Some(l) = a.layers {
        cfg.network.n_layers = l;
    }
    if let Some(n) = a.neurons {
        cfg.network.n_neurons = n;
    }
    if a.no_clip {
        cfg.neuron.clip_izhikevich = false;
    }
}

fn report(rec: &MetricsRecord) {
    log::info!(
        "iter {:>6} {:<5} xent {:.4} miscls {:6.2}% rate {:6.2} Hz reg {:.4}",
        rec.iter,
        rec.split,
        rec.xent,
        rec.miscls_pct,
        rec.mean_rate_hz,
        rec.reg_err
    );
}

pub fn train(args: TrainArgs) -> CmdResult {
    let file_cfg = load_config(args.config.as_deref())?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| file_cfg.paths.output_dir.clone());
    let last_path = out_dir.join("last.ckpt");
    let best_path = out_dir.join("best.ckpt");

    let resumed = if args.resume {
        if !last_path.is_file() {
            return Err(usage(anyhow!(
                "nothing to resume: {} not found",
                last_path.display()
            )));
        }
        Some(Checkpoint::load(&last_path)?)
    } else {
        None
    };
    // A resumed run keeps its recorded configuration; only the iteration
    // budget may be extended.
    let mut cfg = match &resumed {
        Some(ck) => {
            let mut c = ck.run.clone().with_env();
            if let Some(n) = args.iterations {
                c.train.iterations = Some(n);
            }
            c
        }
        None => {
            let mut c = file_cfg;
            apply_overrides(&mut c, &args);
            c
        }
    };
    cfg.validate().map_err(usage)?;
    let synthetic = match &resumed {
        Some(ck) => ck.data == DataSource::Synthetic,
        None => args.synthetic,
    };
    let data = load_data(&cfg, synthetic)?;
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let (mut trainer, mut best) = match resumed {
        Some(ck) => {
            if ck.data != data.source {
                return Err(usage(anyhow!("checkpoint was trained on different data")));
            }
            let best = ck.best_val_miscls;
            let mut t = ck.into_trainer()?;
            t.config = cfg.train.clone();
            log::info!("resuming at iteration {}", t.progress.iter);
            (t, best)
        }
        None => {
            let params = init_network(&data.network, &cfg.neuron, cfg.train.seed)?;
            (Trainer::new(params, cfg.train.clone())?, None)
        }
    };
    cfg.network = trainer.params.config.clone();
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml_string()?)
        .with_context(|| format!("writing config to {}", out_dir.display()))?;

    let mut metrics = MetricsWriter::open(out_dir.join("metrics.csv"))?;
    let source = data.source.clone();
    trainer.fit(&data.train, &data.val, &mut |t, rec| {
        report(rec);
        metrics.write(rec)?;
        if best.is_none_or(|b| rec.miscls_pct < b) {
            best = Some(rec.miscls_pct);
            Checkpoint::from_trainer(t, &cfg, source.clone(), best).save(&best_path)?;
        }
        Checkpoint::from_trainer(t, &cfg, source.clone(), best).save(&last_path)
    })?;

    if best_path.is_file() && !data.test.is_empty() {
        let ck = Checkpoint::load(&best_path)?;
        let rec = evaluate(
            &ck.params,
            &data.test,
            &cfg.train.reg(),
            ck.progress.iter,
            "test",
        )?;
        report(&rec);
        metrics.write(&rec)?;
        println!(
            "best val {:.2}% at iter {}; test {:.2}% misclassified",
            best.unwrap_or(f64::NAN),
            ck.progress.iter,
            rec.miscls_pct
        );
    }
    Ok(())
}

pub fn eval(args: EvalArgs) -> CmdResult {
    if !args.checkpoint.is_file() {
        return Err(usage(anyhow!(
            "checkpoint {} not found",
            args.checkpoint.display()
        )));
    }
    let split: Split = args.split.parse().map_err(usage)?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let cfg = ck.run.clone().with_env();
    let data = load_data(&cfg, ck.data == DataSource::Synthetic)?;
    if data.source != ck.data {
        return Err(usage(anyhow!(
            "feature configuration differs from the checkpoint's"
        )));
    }
    let utts = match split {
        Split::Train => &data.train,
        Split::Val => &data.val,
        Split::Test => &data.test,
    };
    let rec = evaluate(
        &ck.params,
        utts,
        &cfg.train.reg(),
        ck.progress.iter,
        split.name(),
    )?;
    let out = args
        .out
        .unwrap_or_else(|| sibling(&args.checkpoint, "eval.csv"));
    MetricsWriter::open(&out)?.write(&rec)?;
    println!(
        "{}: misclassified {:.2}%, cross-entropy {:.4}, mean rate {:.2} Hz, reg error {:.4}",
        split.name(),
        rec.miscls_pct,
        rec.xent,
        rec.mean_rate_hz,
        rec.reg_err
    );
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent()
        .map_or_else(|| PathBuf::from(name), |d| d.join(name))
}

pub fn demo(args: DemoArgs) -> CmdResult {
    let path = Path::new(&args.protocol);
    let mut protocol = if path.is_file() {
        Protocol::load(path).map_err(usage)?
    } else {
        builtin_protocol(&args.protocol).map_err(|_| {
            usage(anyhow!(
                "protocol {:?} is neither a file nor a built-in protocol",
                args.protocol
            ))
        })?
    };
    if let Some(l) = args.learning_signal {
        protocol.learning_signal = l;
    }
    let rows = run_demo(&protocol, args.model).map_err(usage)?;
    write_demo_csv(&args.out, &rows)?;
    let max_eps = rows.iter().map(|r| r.eps_v.abs()).fold(0.0, f64::max);
    let last = rows.last().map_or(0.0, |r| r.acc_dw);
    println!(
        "{} steps -> {}; final accumulated dW {:.5}, max |eps_v| {:.4}",
        rows.len(),
        args.out.display(),
        last,
        max_eps
    );
    Ok(())
}
