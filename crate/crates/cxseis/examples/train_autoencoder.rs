//! Short training run of the small real auto-encoder on synthetic
//! 64x64 patches, printing the per-epoch losses.

use cxseis::data::{extract_patches, normalize, split_patches, synth_volume, SplitSpec, SynthConfig};
use cxseis::model::{build, ArchitectureSpec, Preset};
use cxseis::train::{train, TrainConfig};

fn main() {
    let cfg = SynthConfig {
        layers: 12,
        wavelet_hz: 30.0,
        noise_std: 0.02,
        fault_count: 3,
        seed: 7,
        dims: [6, 96, 192],
        dt: 0.004,
        dx: 25.0,
    };
    let volume = synth_volume(&cfg).expect("volume");
    let (normed, _) = normalize(&volume).expect("normalize");
    let patches = extract_patches(&normed, 64, 32).expect("patches");
    let split = split_patches(&patches, &SplitSpec { train: 0.7, val: 0.3, test: 0.0, seed: 1 })
        .expect("split");
    println!("training on {} patches, validating on {}", split.train.len(), split.val.len());

    let train_cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        seeds: vec![1],
        ..TrainConfig::default()
    };
    let model = build(&ArchitectureSpec::preset(Preset::RSmall), 1).expect("build");
    let outcome = train(model, &split.train, &split.val, &train_cfg, 1).expect("train");

    for record in &outcome.log.epochs {
        println!(
            "epoch {:>2}: train {:.6}  val {:.6}  ({:.1}s)",
            record.epoch, record.train_loss, record.val_loss, record.wall_seconds
        );
    }
    println!("best validation loss: {:.6}", outcome.log.best_val_loss().unwrap());
}
