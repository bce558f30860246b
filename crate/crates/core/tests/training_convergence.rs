//! Convergence sanity: a small DFNO overfits one fixed batch.

use downscale_bench::datagen::{coarsen, derive_seed, gen_grf, GrfSpec};
use downscale_bench::grid::{GridField, Pair, PairedDataset, Split};
use downscale_bench::io::compute_norm_stats;
use downscale_bench::models::{Family, ModelSpec, PipelineSpec, Placement};
use downscale_bench::training::{train, Loss, TrainConfig};

#[test]
fn dfno_overfits_single_fixed_batch() {
    // Two 16x16 snapshots at factor 4 form one fixed batch; 2000 steps of
    // width-16 DFNO drive the training MSE below 1e-3.
    let mut pairs = Vec::new();
    for i in 0..2 {
        let hr = gen_grf(&GrfSpec {
            h: 16,
            w: 16,
            c: 1,
            alpha: 2.0,
            k_min: 1,
            k_max: 4,
            seed: derive_seed(99, &format!("overfit/{i}")),
            amplitude_std: 1.0,
        })
        .unwrap();
        let lr = coarsen(&hr, 4).unwrap();
        pairs.push(Pair {
            lr,
            hr,
            region_id: 0,
        });
    }
    let hr_fields: Vec<GridField> = pairs.iter().map(|p| p.hr.clone()).collect();
    let stats = compute_norm_stats(&hr_fields).unwrap();
    let ds = PairedDataset::new(pairs, Split::Train, stats).unwrap();

    let mut spec = ModelSpec::new(Family::Dfno);
    spec.width = 16;
    spec.n_blocks = 2;
    spec.modes = 4;
    spec.n_extractor_blocks = 6;
    spec.in_channels = 1;
    spec.train_factor = 4;

    let cfg = TrainConfig {
        lr: 2e-3,
        batch_size: 2,
        weight_decay: 1e-4,
        // No decay within the run: one batch per epoch, 2000 epochs = 2000
        // steps on the same fixed batch.
        lr_step: 10_000,
        lr_gamma: 0.5,
        epochs: 2000,
        loss: Loss::Mse,
        seed: 5,
        balance_regions: false,
        patches_per_snapshot: 1,
        hr_patch: 0,
        workers: 1,
    };
    let pipeline = PipelineSpec {
        placement: Placement::PreOperator,
        train_factor: 4,
        eval_factor: 4,
    };
    let (_, report) = train(&spec, &pipeline, &ds, None, &cfg, None).unwrap();
    let final_loss = *report.train_loss.last().unwrap();
    assert!(
        final_loss < 1e-3,
        "overfit sanity: train MSE {final_loss} after 2000 steps"
    );
}
