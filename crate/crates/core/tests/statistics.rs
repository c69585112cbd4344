use frogsim_core::chain::{chain_statistics, duration_tail, ChainPlan};
use frogsim_core::estimator::MuParams;
use frogsim_core::walkstats::{adapted_chernoff_check, ckn_event_frequency, range_ball_deviation, CknParams, Schedule};
use frogsim_core::{delta, estimate_mu, BoxRegion, ChainSpec, HorizonPolicy, SitePoint};

fn ckn_params(c_ckn: f64, master_seed: u64) -> CknParams {
    CknParams {
        d: 2,
        n: 100,
        a: [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]].iter().map(|c| SitePoint::new(c)).collect(),
        b: BoxRegion::linf(SitePoint::new(&[6, 0]), 1).iter().collect(),
        delta: 0.09,
        r: 1.0,
        c_ckn,
        trials: 10_000,
        master_seed,
    }
}

// The constant is fitted on one batch and then frozen for a fresh batch.
#[test]
fn covering_shortfall_respects_fitted_constant() {
    let fitted = ckn_event_frequency(&ckn_params(0.2, 17)).unwrap().admissible_c;
    assert!(fitted > 0.0);
    let frozen = ckn_event_frequency(&ckn_params(fitted, 18)).unwrap();
    assert!(frozen.covering_shortfall.ci_low <= frozen.covering_bound, "{frozen:?}");
    assert!(frozen.occupied_shortfall.p_hat <= frozen.covering_shortfall.p_hat);
}

#[test]
fn range_rarely_misses_its_ball() {
    let p = range_ball_deviation(2, 10_000, 0.1, 1000, 3).unwrap();
    assert_eq!(p.successes, 0);
}

#[test]
fn adapted_sums_stay_below_bound() {
    let iid = adapted_chernoff_check(0.5, 100, 0.1, &Schedule::Iid, 20_000, 1).unwrap();
    assert_eq!(iid.frequency.successes, 0);
    for schedule in [Schedule::Alternating, Schedule::Adversarial] {
        let rep = adapted_chernoff_check(0.4, 30, 0.1, &schedule, 20_000, 2).unwrap();
        assert!(rep.holds, "{schedule:?}: {rep:?}");
    }
}

#[test]
fn chain_durations_dominate_fresh_counts() {
    let plan = ChainPlan {
        dim: 2,
        r: 0.1,
        specs: vec![ChainSpec::new(vec![1]).unwrap()],
        trials: 1000,
        master_seed: 6,
        horizon: 5000,
        duration_constant: 4.0,
        range_constant: 0.5,
        range_time: 10.0,
    };
    let stats = chain_statistics(&plan).unwrap();
    let dl = delta(2, 0.1).unwrap();
    for row in stats.rows.iter().filter(|r| !r.censored) {
        assert!(row.sum_sigma >= row.sum_i);
        assert!(row.max_range <= row.sum_sigma);
    }
    let t1 = (dl * dl).ceil() as u64 / 2;
    let tail = duration_tail(&stats.rows, t1);
    assert!(tail.p_hat > 0.0 && tail.p_hat < 1.0, "{tail:?}");
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let params = MuParams {
        dim: 2,
        r: 0.3,
        x: SitePoint::new(&[1, 1]),
        n_list: vec![8, 16],
        trials: 40,
        master_seed: 42,
        horizon: HorizonPolicy::Default,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| estimate_mu(&params).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one, four);
    for c in &one.cells {
        assert!(c.ratio.is_finite() && c.ratio > 0.0);
        assert!(c.censor_rate < 0.2);
    }
}

#[test]
fn monotone_coupling_across_densities() {
    let est = |r| {
        estimate_mu(&MuParams {
            dim: 2,
            r,
            x: SitePoint::new(&[1, 0]),
            n_list: vec![20],
            trials: 60,
            master_seed: 5,
            horizon: HorizonPolicy::Default,
        })
        .unwrap()
    };
    let (dense, sparse) = (est(0.8), est(0.2));
    let (d, s) = (&dense.cells[0], &sparse.cells[0]);
    let pooled = ((d.ci_high - d.ci_low).powi(2) + (s.ci_high - s.ci_low).powi(2)).sqrt() / 2.0;
    assert!(s.mu_hat >= d.mu_hat - 2.0 * pooled);
}
