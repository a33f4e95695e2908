use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sritm_core::dataset::{read_shard, synthetic_pairs, PairSample};
use sritm_core::trainer::{dataset_psnr, desk_preset, LogEvent, TrainConfig, Trainer};
use sritm_core::NetworkConfig;

use crate::config::{apply, gather, kv_pairs, log_resolved, lookup};
use crate::error::{io_err, CliError, CliResult, Context};
use crate::{Preset, TrainArgs};

pub const WEIGHTS_FILE: &str = "weights.sritm";
pub const LOG_FILE: &str = "train.log";
pub const CONFIG_FILE: &str = "config.txt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";

fn shard_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "srds"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(CliError::Usage(format!("no *.srds shards in {}", p.display())));
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn check_samples(data: &[PairSample], sf: usize) -> CliResult<()> {
    for (i, s) in data.iter().enumerate() {
        let (lr, hr) = (s.lr_sdr.shape(), s.hr_hdr.shape());
        if hr[1] != lr[1] * sf || hr[2] != lr[2] * sf {
            return Err(CliError::Usage(format!(
                "sample {i} pairs {lr:?} with {hr:?}, which is not a {sf}x upscale"
            )));
        }
    }
    Ok(())
}

struct Resolved {
    net: NetworkConfig,
    train: TrainConfig,
    data: Vec<PairSample>,
}

fn resolve(a: &TrainArgs) -> CliResult<Resolved> {
    let settings = gather(a.config.as_deref(), &a.sets)?;
    let sf = match lookup(&settings, "sf") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid value `{v}` for `sf`")))?,
        None => 2,
    };
    let preset = a.preset.map(|Preset::Desk| desk_preset(sf));
    let (mut net, mut train) = match &preset {
        Some(p) => (p.network.clone(), p.train.clone()),
        None => (NetworkConfig::full(sf), TrainConfig::default()),
    };
    apply(&settings, &mut net, &mut train)?;
    net.validate()?;
    train.validate()?;
    if train.checkpoint_dir.is_none() {
        train.checkpoint_dir = Some(a.out.join("checkpoints"));
    }

    let data = if !a.shards.is_empty() {
        let mut data = Vec::new();
        for f in shard_files(&a.shards)? {
            data.extend(read_shard(&f).context(|| format!("reading shard {}", f.display()))?);
        }
        data
    } else if let Some(p) = &preset {
        synthetic_pairs(p.scenes, p.scene_size, &p.dataset)?
    } else {
        return Err(CliError::Usage("no training data: pass --shards or --preset desk".into()));
    };
    if data.is_empty() {
        return Err(CliError::Usage("the shards hold no samples".into()));
    }
    check_samples(&data, net.sf)?;
    Ok(Resolved { net, train, data })
}

fn open_log(path: &Path, append: bool) -> CliResult<File> {
    OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| io_err(path, e))
}

pub fn run(a: &TrainArgs) -> CliResult<()> {
    let Resolved { net, train, data } = resolve(a)?;
    let mut pairs: Vec<(&str, String)> = vec![("out", a.out.display().to_string())];
    if let Some(r) = &a.resume {
        pairs.push(("resume", r.display().to_string()));
    }
    if let Some(u) = a.until {
        pairs.push(("until", u.to_string()));
    }
    pairs.push(("samples", data.len().to_string()));
    let net_kv = kv_pairs(&net.to_kv());
    let train_kv = kv_pairs(&train.to_kv());
    pairs.extend(net_kv.iter().chain(&train_kv).map(|(k, v)| (k.as_str(), v.clone())));
    log_resolved("train", &pairs);

    let ckpt_dir = train.checkpoint_dir.clone().expect("set during resolution");
    for d in [&a.out, &ckpt_dir] {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    let config_path = a.out.join(CONFIG_FILE);
    let config_text = format!("{}{}", net.to_kv(), train.to_kv());
    std::fs::write(&config_path, config_text).map_err(|e| io_err(&config_path, e))?;

    let mut trainer = match &a.resume {
        Some(p) => Trainer::resume(net, train, p).context(|| format!("resuming from {}", p.display()))?,
        None => Trainer::new(net, train)?,
    };
    let log_path = a.out.join(LOG_FILE);
    let mut log = open_log(&log_path, a.resume.is_some())?;
    let mut write_err = None;
    let until = a.until.unwrap_or(usize::MAX);
    let result = trainer.run_until(&data, until, |e| {
        if let Err(err) = writeln!(log, "{e}") {
            write_err.get_or_insert(err);
        }
        if !matches!(e, LogEvent::Step { .. }) {
            println!("{e}");
        }
    });
    if let Some(err) = write_err {
        return Err(io_err(&log_path, err));
    }
    result?;

    let last = a.out.join(LAST_CHECKPOINT);
    trainer.save_checkpoint(&last)?;
    let weights = a.out.join(WEIGHTS_FILE);
    trainer.net.save_weights(&weights)?;
    let psnr = dataset_psnr(&trainer.net, &data)?;
    let state = if trainer.finished() { "finished" } else { "stopped" };
    println!(
        "{state} at iteration {} of {}; training PSNR {psnr:.2} dB",
        trainer.iter(),
        trainer.cfg.total_iters()
    );
    println!("weights: {}", weights.display());
    println!("checkpoint: {}", last.display());
    Ok(())
}
