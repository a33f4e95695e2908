//! Overfits the desk preset and prints the training-set PSNR trace.
//!
//! `cargo run --release -p sritm-core --example desk_overfit [sf]`

use std::time::Instant;

use sritm_core::dataset::synthetic_pairs;
use sritm_core::trainer::{dataset_psnr, desk_preset, LogEvent, Trainer};

fn main() -> sritm_core::Result<()> {
    let sf = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let preset = desk_preset(sf);
    let data = synthetic_pairs(preset.scenes, preset.scene_size, &preset.dataset)?;
    let start = Instant::now();
    let mut trainer = Trainer::new(preset.network, preset.train)?;
    println!("initial psnr {:.2} dB", dataset_psnr(&trainer.net, &data)?);
    trainer.run(&data, |e| {
        if !matches!(e, LogEvent::Step { .. }) {
            println!("{e}  ({:.0}s)", start.elapsed().as_secs_f64());
        }
    })?;
    println!("final psnr {:.2} dB", dataset_psnr(&trainer.net, &data)?);
    Ok(())
}
