//! Closed-form fractional Black-Scholes call price across Hurst indices.
//!
//! `cargo run --example closed_form_price`

use fracbsde::problems::{bs_closed_form, BsParams};

fn main() -> fracbsde::Result<()> {
    let p = BsParams {
        mu: 0.06,
        sigma: 0.2,
        r: 0.06,
        strike: 100.0,
        r_l: 0.06,
        r_b: 0.06,
    };
    println!("{:>6} {:>10} {:>10}", "H", "u(0,100)", "u(0,110)");
    for h in [0.5, 0.55, 0.6, 2.0 / 3.0, 0.75, 0.85, 0.95, 1.0] {
        let at = |x| bs_closed_form(0.0, x, &p, 0.5, h);
        println!("{h:>6.3} {:>10.4} {:>10.4}", at(100.0)?, at(110.0)?);
    }
    Ok(())
}
