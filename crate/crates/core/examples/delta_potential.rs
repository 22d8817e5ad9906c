//! Single attractive site: the density gathers around it while the energy
//! moves between its kinetic, interaction and potential parts.
//!
//! cargo run --release --example delta_potential [n] [t_end]

use mb4nls::harness::{run, RunConfig};

fn main() -> mb4nls::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(48), |s| s.parse()).expect("n");
    let t_end: f64 = args.next().map_or(Ok(1.0), |s| s.parse()).expect("t_end");
    let cfg = RunConfig {
        nx: n,
        ny: n,
        gamma: 0.05,
        v0: -50.0,
        t_end,
        ..RunConfig::default()
    };
    let tr = run(&cfg)?;
    println!("{:>6} {:>14} {:>14} {:>14} {:>18} {:>12}", "t", "UK", "UI", "UE", "H", "p(t)");
    let every = (tr.rows.len() / 10).max(1);
    for r in tr.rows.iter().step_by(every) {
        let o = &r.observables;
        println!(
            "{:>6.2} {:>14.6} {:>14.6} {:>14.6} {:>18.10} {:>12.5e}",
            r.t, o.u_kinetic, o.u_nonlinear, o.u_external, o.total_energy, o.participation
        );
    }
    println!("max relative energy drift {:.3e}", tr.max_energy_drift());
    Ok(())
}
