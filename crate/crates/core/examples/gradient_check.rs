//! Finite-difference check of every parameter of both models, with and
//! without edge-type selection, on a six-token fixture.
//!
//!     cargo run --example gradient_check

use std::time::Instant;

use dgt::eval::{model_gradcheck, GradCheckOptions};
use dgt::models::ModelKind;

fn main() -> dgt::Result<()> {
    let options = GradCheckOptions::default();
    let configs = [
        (ModelKind::Gcn { layers: 1 }, false),
        (ModelKind::Gcn { layers: 1 }, true),
        (ModelKind::Gcn { layers: 2 }, false),
        (ModelKind::Gcn { layers: 2 }, true),
        (ModelKind::Moganed { hops: 3 }, false),
        (ModelKind::Moganed { hops: 3 }, true),
    ];
    for (kind, gtn) in configs {
        let start = Instant::now();
        let report = model_gradcheck(kind, gtn, &options)?;
        let worst = report.worst().expect("model has parameters");
        let scalars: usize = report.params.iter().map(|p| p.scalars).sum();
        println!(
            "{:<20} gtn={:<5} {:>5} scalars  worst {:.2e} in {:<26} {} ({:.2?})",
            format!("{kind:?}"),
            gtn,
            scalars,
            worst.max_rel_err,
            worst.name,
            if report.passed() { "PASS" } else { "FAIL" },
            start.elapsed()
        );
    }
    let corrupted = model_gradcheck(
        ModelKind::Gcn { layers: 1 },
        true,
        &GradCheckOptions { corrupt: true, ..options },
    )?;
    println!("corrupted gradient detected: {}", !corrupted.passed());
    Ok(())
}
