use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trace_styles::dtmc::{Dtmc, RewardStructure, RewardValue, StateSet};
use trace_styles::synth::{
    brute_force_bounded, brute_force_cumulative, direct_reach_reward, direct_unbounded_until,
    mc_estimate, random_dtmc, random_irreducible_dtmc, McOptions, McQuery, McStart,
};

fn chain(seed: u64, m: usize) -> Dtmc {
    random_dtmc(&mut ChaCha8Rng::seed_from_u64(seed), m, 3)
}

fn random_set(rng: &mut impl Rng, m: usize, p: f64) -> StateSet {
    StateSet::from_fn(m, |_| rng.gen_bool(p))
}

fn rewards(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(0.0..3.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounded_until_matches_enumeration(seed in any::<u64>(), m in 1usize..=6, n in 0u64..=10) {
        let d = chain(seed, m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let (p1, p2) = (random_set(&mut rng, m, 0.7), random_set(&mut rng, m, 0.3));
        let exact = brute_force_bounded(&d, &p1, &p2, n).unwrap();
        prop_assert!(max_diff(&d.bounded_until(&p1, &p2, n), &exact) < 1e-9);
    }

    #[test]
    fn cumulative_matches_enumeration(seed in any::<u64>(), m in 1usize..=6, n in 0u64..=10) {
        let d = chain(seed, m);
        let r = rewards(&mut ChaCha8Rng::seed_from_u64(seed ^ 2), m);
        let exact = brute_force_cumulative(&d, &r, n).unwrap();
        let got = d.cumulative_reward(&RewardStructure::new(r).unwrap(), n);
        prop_assert!(max_diff(&got, &exact) < 1e-9);
    }

    #[test]
    fn bounded_is_monotone_and_converges(seed in any::<u64>()) {
        let d = chain(seed, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let (p1, p2) = (random_set(&mut rng, 6, 0.7), random_set(&mut rng, 6, 0.3));
        let mut prev = d.bounded_until(&p1, &p2, 0);
        for n in 1..=200 {
            let cur = d.bounded_until(&p1, &p2, n);
            prop_assert!(cur.iter().zip(&prev).all(|(c, p)| *c >= p - 1e-15));
            prev = cur;
        }
        // the gap shrinks geometrically at a chain-dependent rate
        let inf = d.unbounded_until(&p1, &p2).unwrap();
        let mut n = 200;
        let mut gap = max_diff(&prev, &inf);
        while gap >= 1e-6 && n < 10_000_000 {
            n *= 2;
            let next = max_diff(&d.bounded_until(&p1, &p2, n), &inf);
            prop_assert!(next <= gap + 1e-12);
            gap = next;
        }
        prop_assert!(gap < 1e-6, "gap {} at N={}", gap, n);
    }

    #[test]
    fn until_and_reward_match_direct_solves(seed in any::<u64>(), m in 1usize..=6) {
        let d = chain(seed, m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let (p1, p2) = (random_set(&mut rng, m, 0.7), random_set(&mut rng, m, 0.3));
        // hitting the iteration cap is a reported outcome, not a wrong value
        let Ok(got) = d.unbounded_until(&p1, &p2) else { return Ok(()); };
        prop_assert!(max_diff(&got, &direct_unbounded_until(&d, &p1, &p2)) < 1e-8);

        let r = rewards(&mut rng, m);
        let Ok(got) = d.reach_reward(&RewardStructure::new(r.clone()).unwrap(), &p2) else {
            return Ok(());
        };
        let exact = direct_reach_reward(&d, &r, &p2);
        for (g, e) in got.iter().zip(&exact) {
            match (g, e) {
                (RewardValue::Finite(a), Some(b)) => prop_assert!((a - b).abs() < 1e-8),
                (RewardValue::Infinite, None) => {}
                _ => prop_assert!(false, "{:?} vs {:?}", g, e),
            }
        }
    }

    #[test]
    fn reach_reward_infinite_iff_target_missable(seed in any::<u64>(), m in 1usize..=6) {
        let d = chain(seed, m);
        let target = random_set(&mut ChaCha8Rng::seed_from_u64(seed ^ 5), m, 0.3);
        let (Ok(reach), Ok(r)) = (
            d.unbounded_until(&StateSet::full(m), &target),
            d.reach_reward(&RewardStructure::steps(m), &target),
        ) else {
            return Ok(());
        };
        for s in 0..m {
            prop_assert_eq!(r[s] == RewardValue::Infinite, reach[s] < 1.0 - 1e-9);
        }
    }

    #[test]
    fn steady_state_is_an_invariant_distribution(seed in any::<u64>(), m in 1usize..=6) {
        let d = chain(seed, m);
        let pi = d.steady_state().unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        for t in 0..m {
            let next: f64 = (0..m).map(|s| pi[s] * d.prob(s, t)).sum();
            prop_assert!((next - pi[t]).abs() < 1e-8);
        }
    }
}

fn mc(d: &Dtmc, query: McQuery, seed: u64, samples: usize) -> trace_styles::synth::McEstimate {
    mc_estimate(
        d,
        McStart::Initial,
        &query,
        &McOptions {
            samples,
            seed,
            ..McOptions::default()
        },
    )
}

/// Exact value at the initial state for the query rotated in by `i`, with
/// its Monte-Carlo estimate.
fn exact_and_estimate(i: usize, d: &Dtmc, rng: &mut ChaCha8Rng, samples: usize) -> (f64, trace_styles::synth::McEstimate) {
    let m = d.num_states();
    let mut phi2 = random_set(rng, m, 0.3);
    phi2.insert(rng.gen_range(0..m));
    let phi1 = random_set(rng, m, 0.7);
    let r = rewards(rng, m);
    let seed = rng.gen();
    match i % 5 {
        0 => {
            let n = rng.gen_range(1..=8);
            let exact = d.bounded_until(&phi1, &phi2, n)[0];
            (exact, mc(d, McQuery::BoundedUntil { phi1, phi2, bound: n }, seed, samples))
        }
        1 => {
            let exact = d.unbounded_until(&phi1, &phi2).unwrap()[0];
            (exact, mc(d, McQuery::UnboundedUntil { phi1, phi2 }, seed, samples))
        }
        2 => {
            let n = rng.gen_range(1..=8);
            let exact = d.cumulative_reward(&RewardStructure::new(r.clone()).unwrap(), n)[0];
            (exact, mc(d, McQuery::CumulativeReward { rewards: r, bound: n }, seed, samples))
        }
        3 => {
            let exact = d.reach_reward(&RewardStructure::new(r.clone()).unwrap(), &phi2).unwrap()[0]
                .finite()
                .expect("irreducible chains reach every target");
            (exact, mc(d, McQuery::ReachReward { rewards: r, target: phi2 }, seed, samples))
        }
        _ => {
            let pi = d.steady_state().unwrap();
            let exact = phi2.iter().map(|s| pi[s]).sum();
            (exact, mc(d, McQuery::SteadyOccupancy { phi: phi2 }, seed, samples.max(1_000_000)))
        }
    }
}

#[test]
fn monte_carlo_agrees_on_95_percent_of_random_models() {
    let mut agree = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let m = rng.gen_range(2..=6);
        let d = random_irreducible_dtmc(&mut rng, m, 3);
        let (exact, est) = exact_and_estimate(seed as usize, &d, &mut rng, 20_000);
        assert_eq!(est.censored, 0);
        if est.agrees_with(exact, 3.0) {
            agree += 1;
        }
    }
    assert!(agree >= 95, "{agree}/100 within 3 standard errors");
}

#[test]
fn every_analysis_agrees_with_a_million_samples() {
    for seed in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(77 + seed);
        let d = random_irreducible_dtmc(&mut rng, 6, 3);
        for i in 0..5 {
            let (exact, est) = exact_and_estimate(i, &d, &mut rng, 1_000_000);
            assert!(est.agrees_with(exact, 3.0), "chain {seed} query {i}: {exact} vs {est:?}");
        }
    }
}
