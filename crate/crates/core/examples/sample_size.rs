//! Demonstrations and horizon needed for a target accuracy.

use cirl::irl::sample_size;

fn main() -> cirl::Result<()> {
    println!("{:>6} {:>6} {:>8} {:>4}", "eps", "delta", "N", "T");
    for eps in [1.0, 0.5, 0.2, 0.1, 0.05] {
        for delta in [0.1, 0.01] {
            let (n, t) = sample_size(eps, delta, 1.0, 36, 0.9)?;
            println!("{eps:>6} {delta:>6} {n:>8} {t:>4}");
        }
    }
    Ok(())
}
