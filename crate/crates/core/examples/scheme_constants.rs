//! Prints the MB4 constants as a key = value dump and checks that the dump
//! reads back.
//!
//! cargo run --release --example scheme_constants [alpha1]

use mb4nls::scheme::{parse_dump, Mb4Scheme, DEFAULT_ALPHA1};

fn main() -> mb4nls::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map_or(Ok(DEFAULT_ALPHA1), |s| s.parse()).expect("alpha1");
    let scheme = Mb4Scheme::new(alpha, [1.0 / 3.0, 2.0 / 3.0, 1.0])?;
    let text = scheme.dump();
    print!("{text}");
    parse_dump(&text)?;
    let lam = scheme.eigenvalues();
    eprintln!("eigenvalues {:.6} {:.6} {:.6}", lam[0], lam[1], lam[2]);
    Ok(())
}
