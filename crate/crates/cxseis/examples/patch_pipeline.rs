//! Patch pipeline: normalize, take the analytic signal, cut 64x64
//! patches from every inline and crossline slice, and split them into
//! leak-free train/val/test sets.

use cxseis::data::{
    extract_patches_complex, normalize, split_patches, synth_volume, SplitSpec, SynthConfig,
};
use cxseis::signal::hilbert_volume;

fn main() {
    let cfg = SynthConfig {
        layers: 12,
        wavelet_hz: 30.0,
        noise_std: 0.02,
        fault_count: 3,
        seed: 11,
        dims: [6, 128, 192],
        dt: 0.004,
        dx: 25.0,
    };
    let volume = synth_volume(&cfg).expect("volume");
    // order matters: normalize first, then Hilbert, so the network sees
    // a real component inside [-1, 1]
    let (normed, scale) = normalize(&volume).expect("normalize");
    println!("normalization scale: {scale:.4}");
    let analytic = hilbert_volume(&normed).expect("analytic volume");

    let patches = extract_patches_complex(&analytic.re, &analytic.im, 64, 32).expect("patches");
    println!(
        "{} complex patches of {}x{}",
        patches.len(),
        patches.size,
        patches.size
    );

    let split = split_patches(&patches, &SplitSpec { train: 0.7, val: 0.15, test: 0.15, seed: 3 })
        .expect("split");
    println!(
        "split: train {} / val {} / test {}",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let csv = split.test.origins_csv();
    println!("first test origins:");
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
}
