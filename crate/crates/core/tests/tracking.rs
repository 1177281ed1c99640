mod support;

use mactrack_core::allocate::{equal_power_allocation, min_mse_individual_power, min_mse_sum_power};
use mactrack_core::model::{sample_channel, sample_cn, GainAllocation, ScenarioTemplate, C64};
use mactrack_core::track::{evolve, filtered_mse, filtered_mse_forms, observe, predict, update, TrackState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn filtered_mse_matches_lmmse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for k in 0..1000 {
        let (s, h) = random_instance(1 + k % 12, &mut rng);
        let g: Vec<C64> = (0..s.n_sensors())
            .map(|_| C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect();
        let p = rng.random_range(0.01..2.0);
        let (a, b) = filtered_mse_forms(p, &s, &h, &g);
        assert!((a - b).abs() <= 1e-10 * p);
        assert!((b - lmmse_oracle(p, &s, &h, &g)).abs() <= 1e-10 * p);
    }
}

type Strategy = fn(&mactrack_core::NetworkScenario, &mactrack_core::ChannelRealization, f64) -> GainAllocation;

#[test]
fn filter_error_matches_its_own_mse() {
    let template = ScenarioTemplate::paper_sec7();
    let strategies: [(&str, Strategy); 3] = [
        ("equal", |s, h, p| equal_power_allocation(s, h, p)),
        ("sum", |s, h, p| min_mse_sum_power(s, h, p).unwrap()),
        ("individual", |s, h, p| min_mse_individual_power(s, h, p).unwrap()),
    ];
    for (name, strategy) in strategies {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let s = template.realize(10, &mut rng).unwrap().with_sum_power(3.0).unwrap();
        let model = *s.model();
        let mut theta = sample_cn(&mut rng, template.initial_mse);
        let mut state = TrackState::prior(C64::new(0.0, 0.0), template.initial_mse);
        let (mut err, mut claimed) = (0.0, 0.0);
        let steps = 1000;
        for n in 0..steps {
            if n > 0 {
                theta = evolve(theta, &model, &mut rng);
                state = predict(&state, &model);
            }
            let h = sample_channel(&s, &mut rng);
            let a = strategy(&s, &h, state.pred_mse);
            let y = observe(theta, &s, &h, &a.gains, &mut rng);
            state = update(&state, &s, &h, &a.gains, y);
            assert_eq!(state.filt_mse, filtered_mse(state.pred_mse, &s, &h, &a.gains));
            err += (theta - state.estimate).norm_sqr();
            claimed += state.filt_mse;
        }
        let ratio = err / claimed;
        assert!((ratio - 1.0).abs() <= 0.1, "{name}: ratio {ratio}");
    }
}
