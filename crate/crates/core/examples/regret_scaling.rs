//! Monte Carlo regret of CaFE across horizons. Logarithmic growth on the
//! Bernoulli instance, roughly sqrt(T) log T on power(M=1).
//!
//! ```text
//! cargo run --release --example regret_scaling
//! ```

use cafe_fair::catalog::{build_bernoulli_instance, build_power_instance};
use cafe_fair::sim::{monte_carlo, write_results_csv, ExperimentSpec, PolicySpec};

fn main() -> cafe_fair::Result<()> {
    let horizons = vec![1_000, 10_000, 100_000];
    for inst in [build_bernoulli_instance()?, build_power_instance(1.0)?] {
        let spec = ExperimentSpec::new(&inst, PolicySpec::Cafe { epsilon: None }, horizons.clone(), 40, 1);
        let out = monte_carlo(&spec)?;
        println!("{}", inst.name);
        let mut prev = None;
        for &t in &horizons {
            let r = out.max_mean_regret(t).unwrap_or(f64::NAN);
            let growth = prev.map(|p: f64| format!("x{:.2}", r / p)).unwrap_or_default();
            println!("  T={t:<7} max_w mean regret {r:>9.2} {growth}");
            prev = Some(r);
        }
        if inst.name == "bernoulli" {
            let mut csv = Vec::new();
            write_results_csv(&out.records[..3], inst.model.params(), &mut csv)?;
            print!("  first rows:\n{}", String::from_utf8_lossy(&csv));
        }
    }
    Ok(())
}
