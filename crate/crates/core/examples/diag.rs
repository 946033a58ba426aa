// Scratch diagnostic: accuracy of the trained surrogate on transformed clean
// images, per method. Not part of the deliverable.

use bss_core::harness::ExperimentConfig;
use bss_core::model::{load_checkpoint, load_dataset, Classifier};
use bss_core::rng::RngStream;

fn main() {
    let cfg = ExperimentConfig::from_path(std::path::Path::new("configs/desk.toml")).unwrap();
    let data = load_dataset(&cfg.dataset_spec().unwrap(), 32).unwrap();
    let start = cfg.training.train_samples;
    let eval = &data[start..start + 400];
    let net = load_checkpoint(std::path::Path::new("checkpoints/surrogate.ckpt")).unwrap();

    let classes = net.num_classes();
    let mut confusion = vec![vec![0usize; classes]; classes];
    for s in eval {
        confusion[s.label][net.predict(&s.image).unwrap()] += 1;
    }
    println!("confusion (rows = true):");
    for (i, row) in confusion.iter().enumerate() {
        let total: usize = row.iter().sum();
        let acc = 100.0 * row[i] as f64 / total.max(1) as f64;
        println!("{i}: {row:?}  acc {acc:.0}%");
    }

    for name in ["bss", "1d-bss", "2d-bss-rp", "resize-pad", "block-shuffle-rotate"] {
        let method = cfg.build_method(name).unwrap().with_number_scale(3);
        let mut hits = 0usize;
        let mut total = 0usize;
        for (i, sample) in eval.iter().enumerate() {
            let outs = method
                .apply(&sample.image, RngStream::from_seed(33).child(i as u64))
                .unwrap();
            for o in &outs {
                if net.predict(&o.image).unwrap() == sample.label {
                    hits += 1;
                }
                total += 1;
            }
        }
        println!("{name:<22} transformed-clean accuracy: {:.1}%", 100.0 * hits as f64 / total as f64);
    }
    let mut hits = 0;
    for s in eval {
        if net.predict(&s.image).unwrap() == s.label {
            hits += 1;
        }
    }
    println!("{:<22} clean accuracy: {:.1}%", "identity", 100.0 * hits as f64 / eval.len() as f64);
}
