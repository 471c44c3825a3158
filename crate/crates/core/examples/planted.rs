//! Trains both listwise losses on the planted-model benchmark and prints
//! per-fold metrics next to the planted-oracle ranking.
//!
//! `cargo run --release --example planted -- [seed] [jobs]`

use std::time::Instant;

use drugrank::dataset::{make_lco_folds, Dataset};
use drugrank::experiment::{evaluate_cells_with, run_cv, ExperimentConfig};
use drugrank::metrics::aggregate;
use drugrank::synth::{generate, SyntheticSpec};
use drugrank::LossKind;

fn main() -> drugrank::Result<()> {
    let arg = |i: usize, default: u64| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let seed = arg(1, 7);
    let jobs = arg(2, 1) as usize;

    let data = generate(&SyntheticSpec::new(100, 60, 4, seed))?;
    let ds = Dataset::assemble(&data.responses, &data.cells, &data.drugs, 5.0)?;
    let folds = make_lco_folds(&ds.cells, 5, seed)?;
    for loss in [LossKind::ListAll, LossKind::ListOne] {
        let cfg = ExperimentConfig::desk(loss, seed);
        let start = Instant::now();
        let cv = run_cv(&ds, &folds, &cfg, jobs)?;
        println!("{loss} ({:.1?})", start.elapsed());
        for f in &cv.folds {
            let oracle = evaluate_cells_with(&ds, &folds.test_cells(f.fold), f.fold, &cfg.ks, |c, drugs| {
                Ok(data.oracle_scores(c, drugs))
            })?;
            let oracle = aggregate(&oracle, Some(f.fold))?;
            let r = &f.report;
            let show = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.3}"));
            println!(
                "  fold {}: AP@1 {} (oracle {})  AH@5 {} (oracle {})  AH@20 {}  CI {} (oracle {})  sCI {}",
                f.fold,
                show(r.ap_at(1)),
                show(oracle.ap_at(1)),
                show(r.ah_at(5)),
                show(oracle.ah_at(5)),
                show(r.ah_at(20)),
                show(r.ci),
                show(oracle.ci),
                show(r.sci),
            );
        }
    }
    Ok(())
}
