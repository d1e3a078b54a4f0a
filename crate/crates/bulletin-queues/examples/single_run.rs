//! One simulated afternoon in the two-queue system, narrated.
//!
//! Arrivals split between two queues; a bulletin goes out every r seconds,
//! alternating between the two information models, and every buffered
//! tenant re-decides: stay, give up, or switch sides. This example runs a
//! single seeded replication and walks through the metrics the simulator
//! reports, including the per-model renege/jockey split and the exact
//! conservation identity.

use bulletin_queues::sim::{run_replication, SimConfig};
use bulletin_queues::Result;

fn main() -> Result<()> {
    let mut config = SimConfig::baseline(6.0, 4.5, 3.5, 7)?;
    config.horizon = 2_000.0;
    config.warmup = 200.0;
    let (li, lj) = (config.lambda_i(), config.lambda_j());
    let metrics = run_replication(config)?;

    println!("arrivals split λ = ({li}, {lj}), initial rates μ = (4.5, 3.5), horizon 2000 s");
    println!();
    println!("population accounting over the whole run:");
    println!("  arrivals  {:>6}", metrics.arrivals);
    println!("  served    {:>6}", metrics.served);
    println!("  reneged   {:>6}", metrics.reneged);
    println!("  in system {:>6}  at the horizon", metrics.residual);
    println!(
        "  conservation: {} + {} + {} = {}  ({})",
        metrics.served,
        metrics.reneged,
        metrics.residual,
        metrics.arrivals,
        if metrics.conservation_ok() { "exact" } else { "BROKEN" }
    );
    println!();

    println!("impatience after warmup, by bulletin model:");
    println!(
        "  rate-chain bulletins:        {:>4} reneges ({:.4}/s), {:>4} switches ({:.4}/s)",
        metrics.renege_count_fsd,
        metrics.renege_rate_fsd,
        metrics.jockey_count_fsd,
        metrics.jockey_rate_fsd
    );
    println!(
        "  inter-change-time bulletins: {:>4} reneges ({:.4}/s), {:>4} switches ({:.4}/s)",
        metrics.renege_count_icd,
        metrics.renege_rate_icd,
        metrics.jockey_count_icd,
        metrics.jockey_rate_icd
    );
    println!();

    let fmt = |x: Option<f64>| match x {
        Some(v) => format!("{v:.4} s"),
        None => "n/a (empty bucket)".to_string(),
    };
    println!("median queueing delay by outcome:");
    println!("  served tenants   {}", fmt(metrics.wait_median_served));
    println!("  reneged tenants  {}", fmt(metrics.wait_median_reneged));
    println!("  switched tenants {}", fmt(metrics.wait_median_jockeyed));
    println!("  impatient union  {}", fmt(metrics.wait_median_impatient));
    println!();
    println!(
        "time-averaged occupancy: queue i {:.3}, queue j {:.3}",
        metrics.mean_queue_len[0], metrics.mean_queue_len[1]
    );
    Ok(())
}
