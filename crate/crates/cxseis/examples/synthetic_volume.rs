//! Generate a synthetic faulted-layer volume, check its spectral peak,
//! and write it as an NPY file.

use cxseis::data::{dominant_frequency, synth_volume, SynthConfig};

fn main() {
    let cfg = SynthConfig {
        layers: 12,
        wavelet_hz: 30.0,
        noise_std: 0.02,
        fault_count: 3,
        seed: 7,
        dims: [4, 128, 256],
        dt: 0.004,
        dx: 25.0,
    };
    let volume = synth_volume(&cfg).expect("synthetic volume");
    let (il, xl, t) = volume.dims();
    println!("volume {il}x{xl}x{t}, dt {} s, dx {} m", volume.dt, volume.dx);
    println!("provenance: {}", volume.provenance);
    println!(
        "spectral peak {:.1} Hz (wavelet {} Hz)",
        dominant_frequency(&volume),
        cfg.wavelet_hz
    );

    let out = std::env::temp_dir().join("cxseis_synthetic.npy");
    volume.save_npy(&out).expect("save");
    println!("wrote {}", out.display());
}
