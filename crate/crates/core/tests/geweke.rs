//! Geweke checks of the full sampler on a tiny model.

mod support;

use bentcable_core::{ChainSettings, Sampler};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::geweke::*;

#[test]
fn successive_conditional_matches_prior() {
    let rows = successive_conditional(50_000, 2024);
    for r in &rows {
        println!("{:14} prior {:9.5} chain {:9.5} z {:6.2} p {:.3}", r.name, r.prior, r.chain, r.z, r.p);
    }
    let worst = rows.iter().map(|r| r.p).fold(1.0, f64::min);
    assert!(worst > 0.01, "smallest p-value {worst}");
}

/// With the likelihood made flat the posterior is the prior, whose moments
/// are known in closed form.
#[test]
fn flat_likelihood_chain_reproduces_prior_moments() {
    const SWEEPS: usize = 300_000;
    let h = hyper();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut start = prior_draw(&mut rng, &h);
    for ind in &mut start.individuals {
        ind.sigma2 = 1e12;
    }
    let ds = dataset(&simulate_responses(&mut rng, &start));
    let pinned = bentcable_core::Pinned { sigma2: true, beta: true, mu_beta: true, sigma_beta: true, ..Default::default() };
    let settings = ChainSettings { adapt_interval: 0, pinned, ..ChainSettings::new(SWEEPS + 1, 0, 3) };
    let mut sampler = Sampler::with_state(&ds, &h, &settings, start).unwrap();
    let bm = batch_means(&mut sampler, SWEEPS, 50, |_| {});

    let log_onset = 3.5f64.ln();
    let exact = [
        ("omega", 0.5),
        // inverse gamma mean (b1/2) / (b0/2 - 1)
        ("sigma2_tau_a", 0.25 / 4.0),
        ("m_gradual", 1.5),
        ("mu_gamma", 0.0),
        ("mu_tau", log_onset),
        ("mu_tau_a", log_onset),
        ("mean_log_tau", log_onset),
    ];
    for (name, truth) in exact {
        let k = NAMES.iter().position(|n| *n == name).unwrap();
        let (m, se) = mean_and_se(&bm, k);
        println!("{name:14} exact {truth:.5} chain {m:.5} se {se:.5}");
        assert!((m - truth).abs() < 4.0 * se, "{name}: {m} vs {truth} (se {se})");
    }
}
