//! Pilot run for the constant-effect ATT check: spread of the estimate over
//! replicates drawn from a seed range disjoint from the gated run.
//!
//! Usage: att_pilot [replicates] [master_seed]

use nnmatch::rng::derive_seed;
use nnmatch::sim::{generate_treatment_data, Scenario};
use nnmatch::{estimate_att, LocalFit};

fn main() {
    let mut args = std::env::args().skip(1);
    let replicates: u64 = args.next().map_or(200, |a| a.parse().expect("replicate count"));
    let master: u64 = args.next().map_or(9001, |a| a.parse().expect("master seed"));
    let scenario = Scenario::att_const();
    let fit = LocalFit::new(1, 17);
    let taus: Vec<f64> = (0..replicates)
        .map(|r| {
            let data = generate_treatment_data(&scenario, 4000, derive_seed(master, r)).expect("data");
            estimate_att(&data, &fit).expect("estimate").tau_hat
        })
        .collect();
    let n = taus.len() as f64;
    let mean = taus.iter().sum::<f64>() / n;
    let sd = (taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let within = taus.iter().filter(|t| (*t - 1.0).abs() <= 0.1).count();
    println!("replicates {replicates} master_seed {master}");
    println!("mean {mean:.6} sd {sd:.6} bias {:.6}", mean - 1.0);
    println!("within 0.1 of 1: {within}/{replicates}");
}
