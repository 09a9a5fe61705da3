//! The logarithmic nonlinearity and its δ-regularization near the pole.
//!
//!     cargo run --example potential_curves

use esfem_ch::potential::{big_f_log, big_f_log_delta, f_delta_prime_raw, f_delta_raw, f_log};

fn main() -> esfem_ch::Result<()> {
    let deltas = [1e-1, 1e-2, 1e-3];
    print!("{:>9} {:>12}", "r", "f(r)");
    for d in deltas {
        print!(" {:>12}", format!("f^{d:e}"));
    }
    println!();
    for r in [0.0, 0.5, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 1.0, 1.01] {
        let exact = if r < 1.0 { format!("{:12.6}", f_log(r)?) } else { format!("{:>12}", "-") };
        print!("{r:9.4} {exact}");
        for d in deltas {
            print!(" {:12.6}", f_delta_raw(r, d));
        }
        println!();
    }
    println!();
    for d in deltas {
        let lip = f_delta_prime_raw(1.0, d);
        println!(
            "delta={d:e}: slope beyond the knot = {lip:.6} = (1/delta)*{:.6};  F_log^delta(1 - delta) - F_log(1 - delta) = {:.1e}",
            lip * d,
            big_f_log_delta(1.0 - d, d) - big_f_log(1.0 - d)?
        );
    }
    Ok(())
}
