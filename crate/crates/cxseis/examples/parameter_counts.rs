//! Parameter counts of the four auto-encoder presets under both
//! batch-norm counting conventions.

use cxseis::model::{build, published_count, ArchitectureSpec, Preset};

fn main() {
    println!(
        "{:<8} {:>10} {:>18} {:>18} {:>11}",
        "preset", "trainable", "on_graph_2per_bn", "on_graph_4per_bn", "published"
    );
    for preset in Preset::ALL {
        let model = build(&ArchitectureSpec::preset(preset), 0).expect("build");
        let counts = model.count_params();
        let (published, convention) = published_count(preset);
        let matched = match convention {
            "on_graph_2per_bn" => counts.on_graph_2per_bn,
            _ => counts.on_graph_4per_bn,
        };
        println!(
            "{:<8} {:>10} {:>18} {:>18} {:>11} ({}{})",
            preset.name(),
            counts.trainable,
            counts.on_graph_2per_bn,
            counts.on_graph_4per_bn,
            published,
            convention,
            if matched == published { ", match" } else { ", MISMATCH" }
        );
    }
}
