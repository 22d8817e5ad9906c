//! Observed order of every method against a finer run of the same method.
//!
//! cargo run --release --example convergence

use mb4nls::harness::{convergence_study, RunConfig};
use mb4nls::methods::MethodId;

fn main() -> mb4nls::Result<()> {
    for m in MethodId::ALL {
        let cfg = RunConfig {
            nx: 16,
            ny: 16,
            t_end: 0.4,
            method: m,
            ..RunConfig::default()
        };
        let r = convergence_study(&cfg, &[0.02, 0.01, 0.005])?;
        println!("{m:<7} expected {} observed {:.3}", m.order(), r.slope);
    }
    Ok(())
}
