//! A small ε-sweep with log-log rate fits. The canonical sweep lives in
//! fixtures/canonical.cfg and runs through the `sweep` subcommand.
use std::sync::Arc;

use entrolimit::grid::PhaseGrid;
use entrolimit::harness::{eps_sweep, Profile, RunOptions, SweepConfig, ThetaRule};

fn main() -> entrolimit::Result<()> {
    let cfg = SweepConfig {
        grid: Arc::new(PhaseGrid::new(1, 1.0, 32, 9.0, 256)?),
        gamma: 2.0,
        theta_rule: ThetaRule::Sqrt,
        run: RunOptions { t_final: 0.1, limit_refine: 1, ..Default::default() },
        threads: entrolimit::cli::thread_count(),
        output_dir: None,
    };
    let r = eps_sweep(&Profile::default(), &[1e-1, 1e-2, 1e-3], &cfg)?;
    for (e, h) in r.epsilons.iter().zip(&r.h_final) {
        println!("eps {e:e}: H_final {h:.3e}");
    }
    println!("slope_H {:.3} (R^2 {:.3}), slope_stress {:.3}", r.slope_h, r.r2_h, r.slope_stress);
    println!("flags: {:?}", r.flags);
    Ok(())
}
