//! Energy and probability drift of all six integrators on a small grid.
//!
//! cargo run --release --example conservation [nx] [t_end]

use mb4nls::harness::{compare_methods, RunConfig};
use mb4nls::methods::MethodId;

fn main() -> mb4nls::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(24), |s| s.parse()).expect("nx");
    let t_end: f64 = args.next().map_or(Ok(0.5), |s| s.parse()).expect("t_end");
    let cfg = RunConfig {
        nx: n,
        ny: n,
        t_end,
        ..RunConfig::default()
    };
    let report = compare_methods(&cfg, &MethodId::ALL)?;
    print!("{report}");
    Ok(())
}
