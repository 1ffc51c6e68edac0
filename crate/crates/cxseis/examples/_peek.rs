use cxseis::data::*;
use cxseis::model::{build, ArchitectureSpec, Preset};
use cxseis::train::{train, validation_loss, TrainConfig};
use cxseis::signal::hilbert_volume;
use cxseis::evaluate::{rms, Reconstructor};
use cxseis::grid::Array2D;

fn main() {
    let cfg = SynthConfig { layers: 40, wavelet_hz: 30.0, noise_std: 0.01, fault_count: 4,
        seed: 7, dims: [10, 288, 448], dt: 0.004, dx: 25.0 };
    let vol = synth_volume(&cfg).unwrap();
    let (normed, _) = normalize(&vol).unwrap();
    let var: f64 = normed.data().iter().map(|v| v * v).sum::<f64>() / normed.data().len() as f64;
    println!("data rms {:.4}", var.sqrt());
    let spec = SplitSpec { train: 0.8, val: 0.1, test: 0.1, seed: 1 };
    let section = normed.inline_section(9);
    let zero = Array2D::zeros(section.rows(), section.cols());
    let baseline = rms(&section, &zero).unwrap();
    println!("zero baseline {baseline:.5}");

    let av = hilbert_volume(&normed).unwrap();
    let cset = extract_patches_complex(&av.re, &av.im, 64, 32).unwrap();
    let csplit = split_patches(&cset, &spec).unwrap();

    for (bs, lr) in [(8usize, 1e-3), (4, 1e-3)] {
        let tc = TrainConfig { learning_rate: lr, epochs: 20, batch_size: bs, seeds: vec![1], ..TrainConfig::default() };
        let model = build(&ArchitectureSpec::preset(Preset::CSmall), 1).unwrap();
        let out = train(model, &csplit.train, &csplit.val, &tc, 1).unwrap();
        let e1 = out.log.epochs[0].val_loss;
        let vbest = validation_loss(&out.model, &csplit.val, 32).unwrap();
        let r = rms(&section, &out.model.reconstruct(&section).unwrap()).unwrap();
        let vals: Vec<String> = out.log.epochs.iter().map(|e| format!("{:.4}", e.val_loss)).collect();
        println!("C_small bs {bs} lr {lr}: e1 {e1:.5} best {vbest:.5} ratio {:.3} rms {r:.5} ({})",
            vbest / e1, if vbest < 0.5 * e1 && r < baseline { "OK" } else { "FAIL" });
        println!("  vals: {}", vals.join(" "));
    }
}
