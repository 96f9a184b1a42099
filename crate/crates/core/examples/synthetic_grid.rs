//! Evaluate the full model grid on a planted-signal synthetic corpus and print
//! the markdown tables.
//!
//! ```text
//! cargo run --release -p polprog-core --example synthetic_grid [seed] [n]
//! ```

use std::collections::BTreeMap;

use polprog_core::corpus::generate_synthetic;
use polprog_core::eval::{run_grid, GridConfig};
use polprog_core::report::render_grid;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));
    let n: usize = args.next().map_or(300, |s| s.parse().expect("n must be an integer"));

    let corpus = generate_synthetic(seed, n, 200).expect("synthetic corpus");
    let started = std::time::Instant::now();
    let grid = run_grid(&corpus, &GridConfig::default(), &BTreeMap::new()).expect("grid run");
    print!("{}", render_grid(&grid).expect("non-empty grid").markdown);
    eprintln!("{} cells in {:.2?}", grid.rows.len(), started.elapsed());
}
