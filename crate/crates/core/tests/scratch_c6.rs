//! Scratch sizing run (deleted before ship).

use downscale_bench::datagen::{coarsen, derive_seed, gen_grf, GrfSpec};
use downscale_bench::evaluation::{bicubic_reference, zero_shot_evaluate};
use downscale_bench::grid::{GridField, Pair, PairedDataset, Split};
use downscale_bench::io::compute_norm_stats;
use downscale_bench::models::{Family, ModelSpec, PipelineSpec, Placement};
use downscale_bench::training::{train, Loss, TrainConfig};
use std::time::Instant;

fn dataset(n: usize, factor: usize, seed: u64, split: Split, stats_src: Option<&PairedDataset>) -> PairedDataset {
    let mut pairs = Vec::new();
    for i in 0..n {
        let hr = gen_grf(&GrfSpec {
            h: 64,
            w: 64,
            c: 1,
            alpha: 2.5,
            k_min: 1,
            k_max: 12,
            seed: derive_seed(seed, &format!("{split}/{i}")),
            amplitude_std: 1.0,
        })
        .unwrap();
        let lr = coarsen(&hr, factor).unwrap();
        pairs.push(Pair { lr, hr, region_id: 0 });
    }
    let stats = match stats_src {
        Some(ds) => ds.stats.clone(),
        None => {
            let hr: Vec<GridField> = pairs.iter().map(|p| p.hr.clone()).collect();
            compute_norm_stats(&hr).unwrap()
        }
    };
    PairedDataset::new(pairs, split, stats).unwrap()
}

#[test]
fn scratch_c6() {
    let t0 = Instant::now();
    let train_ds = dataset(64, 4, 100, Split::Train, None);
    let val_ds = dataset(16, 4, 200, Split::Val, Some(&train_ds));
    let test_ds = dataset(16, 4, 300, Split::Test, Some(&train_ds));
    let test_zs = dataset(16, 8, 300, Split::Test, Some(&train_ds));
    println!("datagen: {:.1}s", t0.elapsed().as_secs_f64());

    let bic4 = bicubic_reference(&test_ds).unwrap();
    let bic8 = bicubic_reference(&test_zs).unwrap();
    println!("bicubic mse f4={:.5} f8={:.5}", bic4.mse, bic8.mse);

    let mut spec = ModelSpec::new(Family::Dfno);
    spec.width = 12;
    spec.n_blocks = 3;
    spec.modes = 16;
    spec.n_extractor_blocks = 6;
    spec.in_channels = 1;
    spec.train_factor = 4;
    let cfg = TrainConfig {
        lr: 2e-3,
        batch_size: 16,
        weight_decay: 1e-4,
        lr_step: 6,
        lr_gamma: 0.5,
        epochs: 8,
        loss: Loss::Mse,
        seed: 7,
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
    let t1 = Instant::now();
    let (model, report) = train(&spec, &pipeline, &train_ds, Some(&val_ds), &cfg, None).unwrap();
    println!(
        "train: {:.1}s, losses {:?}",
        t1.elapsed().as_secs_f64(),
        report.train_loss
    );
    println!("val mse {:?}", report.val_mse);

    let std_eval = zero_shot_evaluate(&model, &train_ds.stats, &pipeline, &test_ds).unwrap();
    let zs_pipeline = PipelineSpec {
        placement: Placement::PreOperator,
        train_factor: 4,
        eval_factor: 8,
    };
    let zs_eval = zero_shot_evaluate(&model, &train_ds.stats, &zs_pipeline, &test_zs).unwrap();
    println!(
        "model mse f4={:.5} (bicubic {:.5}, ratio {:.3}) f8={:.5} (bicubic {:.5}, ratio {:.3})",
        std_eval.metrics.mse,
        bic4.mse,
        std_eval.metrics.mse / bic4.mse,
        zs_eval.metrics.mse,
        bic8.mse,
        zs_eval.metrics.mse / bic8.mse
    );
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
