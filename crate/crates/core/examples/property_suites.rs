//! Runs the property suites and summarizes them per suite.
//!
//!     cargo run --release --example property_suites [suite] [seed]

use esfem_ch::verify::{self, Status, SUITES};

fn main() -> esfem_ch::Result<()> {
    let mut args = std::env::args().skip(1);
    let suite = args.next();
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse()).expect("seed");
    let names: Vec<&str> = match suite.as_deref() {
        Some(s) => vec![s],
        None => SUITES.to_vec(),
    };
    for name in names {
        let results = verify::run_suite(name, seed)?;
        let count = |s: Status| results.iter().filter(|r| r.status == s).count();
        println!("{name}: {} pass, {} fail, {} info", count(Status::Pass), count(Status::Fail), count(Status::Info));
        for r in results.iter().filter(|r| r.status == Status::Fail) {
            println!("  {r}");
        }
    }
    Ok(())
}
