//! Central-difference gradient check of every layer kind and the three
//! channel networks.

use glandseg::cli::gradcheck_suite;

fn main() -> glandseg::Result<()> {
    let eps = 1e-5;
    for c in gradcheck_suite(1, eps)? {
        let verdict = if c.max_rel_error < 1e-4 { "ok" } else { "FAIL" };
        println!("{:<32} {:>10.3e}  {:>5} entries  {verdict}", c.name, c.max_rel_error, c.checked);
    }
    Ok(())
}
