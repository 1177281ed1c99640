use mactrack_core::allocate::{check_feasibility, sum_power_bounds};
use mactrack_core::model::{sample_channel, ScenarioTemplate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn large_n_sandwich_and_convergence() {
    let template = ScenarioTemplate::paper_sec7();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut medians = Vec::new();
    for n in [10, 20, 40, 80] {
        let (mut xis, mut zetas) = (Vec::new(), Vec::new());
        let mut checked = 0;
        for _ in 0..300 {
            let s = template.realize(n, &mut rng).unwrap();
            let h = sample_channel(&s, &mut rng);
            let t = check_feasibility(&s, template.initial_mse, 0.1);
            let b = sum_power_bounds(&s, &h, &t).unwrap();
            xis.push(b.xi);
            zetas.push(b.zeta);
            if let Some(upper) = b.upper {
                assert!(
                    b.lower < b.exact && b.exact < upper,
                    "{} < {} < {upper}",
                    b.lower,
                    b.exact
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
        medians.push((median(xis), median(zetas)));
    }
    for w in medians.windows(2) {
        assert!(w[1].0 < w[0].0, "{medians:?}");
        assert!(w[1].1 < w[0].1, "{medians:?}");
    }
}
