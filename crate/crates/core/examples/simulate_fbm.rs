//! Samples fBM paths and compares the empirical covariance with the exact
//! one at a few grid points.
//!
//! `cargo run --release --example simulate_fbm -- [hurst] [paths]`

use fracbsde::fbm::{covariance, FbmSampler, Grid};

fn main() -> fracbsde::Result<()> {
    let mut args = std::env::args().skip(1);
    let hurst: f64 = args.next().map_or(0.75, |s| s.parse().expect("hurst"));
    let m: usize = args.next().map_or(50_000, |s| s.parse().expect("path count"));

    let grid = Grid::uniform(1.0, 8)?;
    let sampler = FbmSampler::new(grid.clone(), hurst, 1, 7)?;
    let paths = sampler.sample_paths(m);

    println!("H = {hurst}, {m} paths on 8 steps of [0, 1]");
    println!("{:>6} {:>6} {:>10} {:>10}", "s", "t", "exact", "empirical");
    for (i, j) in [(1, 1), (2, 6), (4, 8), (8, 8)] {
        let emp = (0..m).map(|p| paths.at3(p, i, 0) * paths.at3(p, j, 0)).sum::<f64>() / m as f64;
        let exact = covariance(grid.t(i), grid.t(j), hurst);
        println!("{:>6.3} {:>6.3} {exact:>10.5} {emp:>10.5}", grid.t(i), grid.t(j));
    }
    Ok(())
}
