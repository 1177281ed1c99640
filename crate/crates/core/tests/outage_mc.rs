use mactrack_core::allocate::{check_feasibility, equal_power_gains, MseTarget};
use mactrack_core::model::{sample_channel, NetworkScenario, ScenarioTemplate};
use mactrack_core::outage::{outage_probability, weighted_exponential_tail, OutageInstance};
use mactrack_core::track::filtered_mse;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn empirical(s: &NetworkScenario, t: &MseTarget, trials: usize, rng: &mut ChaCha8Rng) -> f64 {
    let g = equal_power_gains(s);
    let mut hits = 0usize;
    for _ in 0..trials {
        let h = sample_channel(s, rng);
        if filtered_mse(t.prior_mse, s, &h, &g) > t.epsilon {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

#[test]
fn analytic_outage_matches_monte_carlo() {
    let template = ScenarioTemplate::paper_sec7();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let base = template.realize(10, &mut rng).unwrap();
    let trials = 100_000;
    for (p_t, eps) in [(30.0, 0.05), (300.0, 0.02), (3000.0, 0.01), (300.0, 0.05)] {
        let s = base.with_sum_power(p_t).unwrap();
        let t = check_feasibility(&s, template.initial_mse, eps);
        let analytic = outage_probability(&s, &t).unwrap();
        let emp = empirical(&s, &t, trials, &mut rng);
        let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!((analytic - emp).abs() <= 0.01, "P_T {p_t}: {analytic} vs {emp}");
        assert!(
            (analytic - emp).abs() <= 3.0 * se + 1e-12,
            "P_T {p_t}: {analytic} vs {emp}, se {se}"
        );

        let inst = OutageInstance::new(&s, &t).unwrap();
        if inst.eigenvalues[0] > 0.0 {
            let general = 1.0 - weighted_exponential_tail(&inst.eigenvalues, inst.threshold);
            assert!((general - analytic).abs() <= 1e-9);
        }
    }
}
