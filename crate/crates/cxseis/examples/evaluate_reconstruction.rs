//! Evaluate a briefly trained auto-encoder on a held-out inline
//! section: RMS/MAE per region plus an FK band-energy comparison.

use cxseis::data::{extract_patches, normalize, split_patches, synth_volume, SplitSpec, SynthConfig};
use cxseis::evaluate::{evaluate_model, fk_report, Reconstructor, Region};
use cxseis::model::{build, ArchitectureSpec, Preset};
use cxseis::train::{train, TrainConfig};

fn main() {
    let cfg = SynthConfig {
        layers: 12,
        wavelet_hz: 30.0,
        noise_std: 0.03,
        fault_count: 3,
        seed: 5,
        dims: [6, 96, 192],
        dt: 0.004,
        dx: 25.0,
    };
    let volume = synth_volume(&cfg).expect("volume");
    let (normed, _) = normalize(&volume).expect("normalize");
    let patches = extract_patches(&normed, 64, 32).expect("patches");
    let split = split_patches(&patches, &SplitSpec { train: 0.8, val: 0.2, test: 0.0, seed: 1 })
        .expect("split");

    let train_cfg = TrainConfig { epochs: 4, batch_size: 16, seeds: vec![1], ..TrainConfig::default() };
    let model = build(&ArchitectureSpec::preset(Preset::RSmall), 1).expect("build");
    let outcome = train(model, &split.train, &split.val, &train_cfg, 1).expect("train");
    let model = outcome.model;

    // the last inline was never patched into the training split
    let section = normed.inline_section(5);
    let regions = vec![
        Region { name: "top".into(), traces: [0, 48], times: [0, 96] },
        Region { name: "bottom".into(), traces: [48, 96], times: [96, 192] },
    ];
    let report = evaluate_model(&model, &section, &regions).expect("evaluate");
    println!("model {}", report.model);
    println!("global  rms {:.4}  mae {:.4}", report.global.rms, report.global.mae);
    for r in &report.regions {
        println!("{:<7} rms {:.4}  mae {:.4}", r.name, r.rms, r.mae);
    }

    let reconstruction = model.reconstruct(&section).expect("reconstruct");
    let fkr = fk_report(&section, &reconstruction, volume.dt, volume.dx, 50.0).expect("fk");
    println!(
        "FK energy below/above {} Hz: original {:.1}/{:.1}, reconstruction {:.1}/{:.1}",
        fkr.split_hz,
        fkr.original_band.below,
        fkr.original_band.above,
        fkr.reconstruction_band.below,
        fkr.reconstruction_band.above
    );
}
