// Probe for the desk-scale learning experiment: trains the small model on
// the 12-node synthetic dataset and reports test MAE against the
// historical-average baseline. Used to calibrate the acceptance budget.

use std::time::Instant;
use sttgcn::data::{make_windows, split, synth_diffusion, HistoricalAverage, SplitTag};
use sttgcn::graph::{reconstruct_fusion_graph, ReconstructMethod, ReconstructOptions};
use sttgcn::metrics::mae;
use sttgcn::net::{self, ModelConfig};

fn main() {
    let t0 = Instant::now();
    let (series, graph) = synth_diffusion(12, 5000, 42).unwrap();
    let recon = reconstruct_fusion_graph(
        &graph,
        ReconstructMethod::L1Tucker,
        &ReconstructOptions::default(),
    )
    .unwrap();
    let aprime = recon.graph.matrix().clone();
    println!("setup: {:.2}s", t0.elapsed().as_secs_f64());

    let ds = split(make_windows(&series, 12, 12, 1).unwrap(), (6, 2, 2)).unwrap();
    let train_range = ds.split_range(SplitTag::Train).unwrap();
    let test_range = ds.split_range(SplitTag::Test).unwrap();
    println!(
        "samples: train {} val {} test {}",
        train_range.len(),
        ds.split_range(SplitTag::Val).unwrap().len(),
        test_range.len()
    );

    // Historical-average baseline over all steps the training split touches.
    let train_steps = train_range.end - 1 + 12 + 12;
    let ha = HistoricalAverage::fit(&series, train_steps, 288).unwrap();
    let test = &ds.samples[test_range];
    let mut y = Vec::new();
    let mut p = Vec::new();
    for s in test {
        for h in 0..12 {
            for i in 0..12 {
                y.push(s.target.get(h, i));
                p.push(ha.predict(s.start + 12 + h, i));
            }
        }
    }
    let base_mae = mae(&y, &p).unwrap();
    println!("baseline MAE: {base_mae:.6}");

    let mut cfg = ModelConfig::defaults(12);
    cfg.layers = 2;
    cfg.filters = [16, 16, 16];
    cfg.dilated_channels = 16;
    cfg.fc_hidden = 64;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.003;
    cfg.max_epochs = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(40);
    cfg.learning_rate = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.003);
    cfg.batch_size = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(32);
    cfg.patience = 30;
    cfg.seed = 42;
    println!("params: {}", cfg.param_count());

    let t1 = Instant::now();
    let out = net::train(&ds, &aprime, &cfg).unwrap();
    let train_secs = t1.elapsed().as_secs_f64();
    for h in &out.history {
        println!(
            "epoch {:3}  loss {:.6}  val mae {:.6}  ({:.1}s elapsed)",
            h.epoch,
            h.train_loss,
            h.val_mae,
            t1.elapsed().as_secs_f64()
        );
    }

    let preds = net::predict_samples(&out.params, &cfg, &aprime, test, ds.stats().unwrap()).unwrap();
    let pairs = net::train::horizon_pairs(test, &preds, 12);
    let mut ty = Vec::new();
    let mut tp = Vec::new();
    for (a, b) in &pairs {
        ty.extend_from_slice(a);
        tp.extend_from_slice(b);
    }
    let model_mae = mae(&ty, &tp).unwrap();
    println!(
        "train: {train_secs:.1}s total; best epoch {}; model test MAE {model_mae:.6}; ratio {:.4}",
        out.best_epoch,
        model_mae / base_mae
    );
}
