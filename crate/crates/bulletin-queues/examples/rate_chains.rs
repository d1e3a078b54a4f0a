//! Service-rate chains and how bulletins compare them.
//!
//! A bulletin advertises each queue's service capacity as a small discrete
//! distribution over rate levels. Tenants judge queues by first-order
//! stochastic dominance on those snapshots: a queue wins only when its rate
//! CDF sits at or below the other's everywhere, and strictly below
//! somewhere. This example builds a few chains by hand, shows the verdicts,
//! and prints the advertised stationary queue-length law one of them
//! implies.

use bulletin_queues::state::{
    fsd_compare, stationary_length_dist, FsdVerdict, ServiceRateChain,
};
use bulletin_queues::Result;

fn verdict_line(label: &str, a: &ServiceRateChain, b: &ServiceRateChain) -> Result<()> {
    let verdict = fsd_compare(a, b)?;
    let word = match verdict {
        FsdVerdict::XDominates => "first dominates",
        FsdVerdict::YDominates => "second dominates",
        FsdVerdict::NoDominance => "no dominance",
    };
    println!("{label:<44} {word}");
    Ok(())
}

fn main() -> Result<()> {
    // A queue running at μ = 5 that wobbles ±20% around its nominal rate.
    let steady = ServiceRateChain::new(vec![4.0, 5.0, 6.0], vec![0.25, 0.5, 0.25])?;
    // The same shape, shifted up: unambiguously faster.
    let faster = ServiceRateChain::new(vec![5.0, 6.0, 7.0], vec![0.25, 0.5, 0.25])?;
    // Same mean as `steady` but wildly spread: CDFs cross, so neither side
    // can claim dominance.
    let volatile = ServiceRateChain::new(vec![1.0, 5.0, 9.0], vec![0.3, 0.4, 0.3])?;

    println!("chain means:");
    for (name, chain) in [("steady", &steady), ("faster", &faster), ("volatile", &volatile)] {
        println!("  {name:<9} levels {:?}  mean {:.3}", chain.levels(), chain.effective_rate());
    }
    println!();

    verdict_line("steady vs faster", &steady, &faster)?;
    verdict_line("faster vs steady", &faster, &steady)?;
    verdict_line("steady vs volatile (equal means, crossing)", &steady, &volatile)?;
    verdict_line("steady vs steady", &steady, &steady)?;

    // What a tenant reads off a bulletin: the stationary occupancy the
    // advertised rate implies for its own queue.
    let dist = stationary_length_dist(2.0, 5.0)?;
    println!();
    println!(
        "advertised stationary law at λ = 2, μ = 5 (ρ = {:.2}, truncated at n = {}):",
        dist.rho(),
        dist.truncation_len()
    );
    let mut cumulative = 0.0;
    for (n, p) in dist.iter_truncated().take(8) {
        cumulative += p;
        println!("  P(N = {n}) = {p:.6}   P(N ≤ {n}) = {cumulative:.6}");
    }
    println!("  ... tail above the truncation point carries < 1e-9 mass");
    Ok(())
}
