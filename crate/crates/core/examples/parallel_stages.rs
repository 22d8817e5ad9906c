//! MB4 with the three stage systems on one worker and on three. The
//! trajectories must agree bit for bit; the speedup depends on the cores
//! available.
//!
//! cargo run --release --example parallel_stages [n] [steps]

use mb4nls::harness::{parallel_bench, RunConfig};

fn main() -> mb4nls::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(128), |s| s.parse()).expect("n");
    let steps: usize = args.next().map_or(Ok(3), |s| s.parse()).expect("steps");
    let cfg = RunConfig {
        nx: n,
        ny: n,
        t_end: 0.01 * steps as f64,
        ..RunConfig::default()
    };
    print!("{}", parallel_bench(&cfg, 3)?);
    Ok(())
}
