use std::collections::BTreeSet;

use frogsim_core::randomness::derive_seed;
use frogsim_core::{
    activation_front, build_chain, extract_minimizing_chain, passage_time, visited_region, BoxRegion, ChainSpec,
    Configuration, ExtendedTime, FrontEngine, SitePoint, WalkOracle,
};
use proptest::prelude::*;

fn dim_strategy() -> impl Strategy<Value = usize> {
    2usize..=3
}

fn site_in(dim: usize, radius: i64) -> impl Strategy<Value = SitePoint> {
    proptest::collection::vec(-radius..=radius, dim).prop_map(|c| SitePoint::new(&c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn occupancy_and_passage_are_monotone_in_density(
        seed in any::<u64>(),
        (dim, target) in dim_strategy().prop_flat_map(|d| (Just(d), site_in(d, 5))),
        r_low in 0.05f64..0.5,
        bump in 0.0f64..0.5,
    ) {
        let r_high = r_low + bump;
        let origin = SitePoint::origin(dim);
        let domain = BoxRegion::linf(origin, 7);
        let oracle = WalkOracle::new(seed, dim).unwrap();
        let sparse = Configuration::bernoulli(seed, domain, r_low).unwrap().force_occupied(origin);
        let dense = Configuration::bernoulli(seed, domain, r_high).unwrap().force_occupied(origin);
        for p in domain.iter() {
            prop_assert!(!sparse.is_occupied(&p) || dense.is_occupied(&p));
        }
        let dense = dense.force_occupied(target);
        let sparse = sparse.force_occupied(target);
        let h = 4000;
        let slow = passage_time(&oracle, &sparse, &origin, &target, &domain, h).unwrap().value;
        let fast = passage_time(&oracle, &dense, &origin, &target, &domain, h).unwrap().value;
        prop_assert!(fast <= slow, "dense {fast:?} > sparse {slow:?}");
    }

    #[test]
    fn passage_values_respect_speed_and_chain_identity(
        seed in any::<u64>(),
        (dim, target) in dim_strategy().prop_flat_map(|d| (Just(d), site_in(d, 6))),
        r in 0.1f64..0.9,
    ) {
        let origin = SitePoint::origin(dim);
        prop_assume!(target != origin);
        let domain = BoxRegion::linf(origin, 9);
        let oracle = WalkOracle::new(seed, dim).unwrap();
        let config = Configuration::bernoulli(seed, domain, r).unwrap().force_occupied(origin).force_occupied(target);
        let p = passage_time(&oracle, &config, &origin, &target, &domain, 5000).unwrap();
        if let Some(t) = p.value.finite() {
            prop_assert!(t >= target.l1());
            prop_assert_eq!(p.per_leg_times.iter().sum::<u64>(), t);
            let (spec, trace) = extract_minimizing_chain(&p, &oracle, &config).unwrap();
            prop_assert_eq!(trace.total_duration(), Some(t));
            prop_assert_eq!(spec.legs(), p.per_leg_times.len());
        }
    }

    #[test]
    fn front_engine_agrees_with_dijkstra(
        seed in any::<u64>(),
        dim in dim_strategy(),
        r in 0.1f64..0.8,
    ) {
        let origin = SitePoint::origin(dim);
        let domain = BoxRegion::linf(origin, 4);
        let oracle = WalkOracle::new(seed, dim).unwrap();
        let config = Configuration::bernoulli(seed, domain, r).unwrap().force_occupied(origin);
        let h = 300;
        let front = activation_front(&oracle, &config, &origin, &domain, h).unwrap();
        let engine = FrontEngine::new(&oracle, &config, &domain, h);
        for z in domain.iter().filter(|z| config.is_occupied(z)) {
            let dijkstra = passage_time(&oracle, &config, &origin, &z, &domain, h).unwrap().value;
            let (swept, _) = engine.passage(&origin, &z).unwrap();
            prop_assert_eq!(swept.value, dijkstra);
            prop_assert_eq!(front.get(&z), Some(dijkstra));
        }
    }

    #[test]
    fn visited_regions_are_nested(seed in any::<u64>(), r in 0.1f64..0.9, t1 in 0u64..60, dt in 0u64..60) {
        let origin = SitePoint::origin(2);
        let domain = BoxRegion::linf(origin, 12);
        let oracle = WalkOracle::new(seed, 2).unwrap();
        let config = Configuration::bernoulli(seed, domain, r).unwrap().force_occupied(origin);
        let front = activation_front(&oracle, &config, &origin, &domain, t1 + dt).unwrap();
        let (a, b) = (visited_region(&front, t1), visited_region(&front, t1 + dt));
        prop_assert!(a.contains(&origin));
        prop_assert!(a.is_subset(&b));
        for z in &b {
            prop_assert!(z.l1() <= t1 + dt);
        }
    }

    #[test]
    fn chain_traces_are_well_formed(
        seed in any::<u64>(),
        indices in proptest::collection::vec(1u64..4, 1..5),
        r in 0.05f64..0.9,
    ) {
        let spec = ChainSpec::new(indices.clone()).unwrap();
        let h = 400;
        let reach = h * spec.legs() as u64 + 1;
        let domain = BoxRegion::linf(SitePoint::origin(2), reach);
        let oracle = WalkOracle::new(seed, 2).unwrap();
        let config = Configuration::bernoulli(seed, domain, r).unwrap();
        let trace = build_chain(&oracle, &config, &spec, h);
        let mut seen: BTreeSet<SitePoint> = BTreeSet::new();
        for (leg, times) in trace.leg_times.iter().enumerate() {
            prop_assert_eq!(times[0], ExtendedTime::Finite(0));
            let finite: Vec<u64> = times.iter().filter_map(|t| t.finite()).collect();
            prop_assert!(finite.windows(2).all(|w| w[0] < w[1]));
            for s in &trace.visited_occupied[leg] {
                prop_assert!(seen.insert(*s), "site {s} counted fresh twice");
                prop_assert!(config.is_occupied(s));
            }
            if leg + 1 < trace.anchors.len() {
                let end = times[indices[leg] as usize].finite().unwrap();
                prop_assert_eq!(oracle.walk_position(&trace.anchors[leg], end), trace.anchors[leg + 1]);
            }
        }
        if let Some(total) = trace.total_duration() {
            prop_assert!(total >= spec.total());
            prop_assert!(trace.max_range <= total);
        }
        prop_assert!(trace.max_range <= trace.walked_steps());
    }

    #[test]
    fn triangle_inequality_holds(seed in any::<u64>(), r in 0.2f64..0.7, k in 0u64..1000) {
        let s = derive_seed(seed, 0, k);
        let domain = BoxRegion::linf(SitePoint::origin(2), 8);
        let oracle = WalkOracle::new(s, 2).unwrap();
        let config = Configuration::bernoulli(s, domain, r).unwrap();
        let sites: Vec<SitePoint> = config.occupied_in(&BoxRegion::linf(SitePoint::origin(2), 5)).collect();
        prop_assume!(sites.len() >= 3);
        let (x, y, z) = (sites[0], sites[sites.len() / 2], sites[sites.len() - 1]);
        let t = |a: &SitePoint, b: &SitePoint| passage_time(&oracle, &config, a, b, &domain, 2000).unwrap().value;
        if let (Some(xy), Some(yz), Some(xz)) = (t(&x, &y).finite(), t(&y, &z).finite(), t(&x, &z).finite()) {
            prop_assert!(xz <= xy + yz);
        }
    }
}
