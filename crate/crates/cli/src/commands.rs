use std::collections::BTreeSet;

use frogsim_core::chain::{chain_statistics, ChainPlan, ChainRow};
use frogsim_core::estimator::{MuParams, MuRow, SweepParams};
use frogsim_core::renorm::{estimate_good_probability, event_audit, recursion_batch, EventRow, GoodProbRow, RecursionRow};
use frogsim_core::stats::Proportion;
use frogsim_core::walkstats::{
    adapted_chernoff_check, ckn_event_frequency, hitting_probability, pz_exact_check, range_ball_deviation,
    range_growth, unit_box_subsets, CknParams, Schedule,
};
use frogsim_core::{
    activation_front, default_horizon, delta, estimate_mu, passage_time, scaling_sweep, visited_region, BoxGeometry,
    BoxRegion, ChainSpec, Configuration, HorizonPolicy, MuEstimate, RenormParams, SitePoint, WalkOracle,
};
use serde::Serialize;

use crate::output::{Sink, Table};
use crate::{ChainArgs, Cli, CliError, Command, PassageArgs, RenormArgs, ScheduleKind, StatsCommand};

type Result<T> = std::result::Result<T, CliError>;

/// Physical box sizes grow like `r^{-d/2}`; below this density they do not fit in memory.
const PHYSICAL_MIN_DENSITY: f64 = 0.05;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_site(p: &SitePoint, dim: usize, what: &str) -> Result<()> {
    if p.dim() != dim {
        return Err(usage(format!("--{what} has {} coordinates but --dim is {dim}", p.dim())));
    }
    Ok(())
}

fn direction(x: Option<SitePoint>, dim: usize, what: &str) -> Result<SitePoint> {
    let x = match x {
        Some(x) => x,
        None => SitePoint::unit_vector(dim, 0)?,
    };
    check_site(&x, dim, what)?;
    Ok(x)
}

fn horizon_policy(h: Option<u64>) -> HorizonPolicy {
    h.map_or(HorizonPolicy::Default, HorizonPolicy::Fixed)
}

fn f(x: f64) -> String {
    x.to_string()
}

fn proportion_cells(p: &Proportion) -> [String; 5] {
    [p.successes.to_string(), p.trials.to_string(), f(p.p_hat), f(p.ci_low), f(p.ci_high)]
}

fn join_sites<'a>(sites: impl IntoIterator<Item = &'a SitePoint>) -> String {
    sites.into_iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";")
}

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let mut sink = Sink::new(cli.out.as_deref());
    let name = match &cli.command {
        Command::Passage(a) => {
            passage(a, seed, &mut sink)?;
            "passage"
        }
        Command::Mu(a) => {
            let x = direction(a.x, a.dim, "x")?;
            let est = estimate_mu(&MuParams {
                dim: a.dim,
                r: a.r,
                x,
                n_list: a.n_list.clone(),
                trials: a.trials,
                master_seed: seed,
                horizon: horizon_policy(a.horizon),
            })?;
            sink.table(&mu_table(std::slice::from_ref(&est)))?;
            "mu"
        }
        Command::Sweep(a) => {
            let x = direction(a.x, a.dim, "x")?;
            let res = scaling_sweep(&SweepParams {
                dim: a.dim,
                r_list: a.r_list.clone(),
                x,
                n: a.n,
                trials: a.trials,
                master_seed: seed,
                horizon: horizon_policy(a.horizon),
            })?;
            sink.table(&mu_table(&res.estimates))?;
            sink.json("sweep.json", &res.fit)?;
            "sweep"
        }
        Command::Shape(a) => {
            shape(a.dim, a.r, &a.t_list, a.box_radius, seed, &mut sink)?;
            "shape"
        }
        Command::ChainCheck(a) => {
            chain_check(a, seed, &mut sink)?;
            "chain-check"
        }
        Command::Good(a) => {
            let geometries =
                a.r_list.iter().map(|&r| geometry(a.dim, r, &a.renorm)).collect::<Result<Vec<_>>>()?;
            let rows = estimate_good_probability(&geometries, a.trials, seed)?;
            let mut t = Table::new("good_prob", &GoodProbRow::HEADER);
            for r in rows {
                t.push(vec![
                    r.d.to_string(),
                    f(r.r),
                    f(r.c_ckn),
                    r.override_mode.to_string(),
                    r.trials.to_string(),
                    f(r.p_hat),
                    f(r.ci_low),
                    f(r.ci_high),
                ]);
            }
            sink.table(&t)?;
            "good"
        }
        Command::Recursion(a) => {
            let g = geometry(a.dim, a.r, &a.renorm)?;
            let xi = direction(a.xi, a.dim, "xi")?;
            let rows = recursion_batch(&g, &xi, a.trials, seed)?;
            let mut t = Table::new("recursion", &RecursionRow::HEADER);
            for r in rows {
                t.push(vec![
                    r.d.to_string(),
                    f(r.r),
                    r.xi,
                    r.seed.to_string(),
                    r.sigma_index.to_string(),
                    r.censored.to_string(),
                ]);
            }
            sink.table(&t)?;
            "recursion"
        }
        Command::Events(a) => {
            let g = geometry(a.dim, a.r, &a.renorm)?;
            let rows = event_audit(&g, a.trials, seed)?;
            let mut t = Table::new("events", &EventRow::HEADER);
            for r in &rows {
                t.push(r.record());
            }
            sink.table(&t)?;
            "events"
        }
        Command::Stats(s) => {
            stats(s, seed, &mut sink)?;
            "stats"
        }
    };
    sink.finish(name, cli, seed)?;
    Ok(())
}

fn passage(a: &PassageArgs, seed: u64, sink: &mut Sink) -> Result<()> {
    let source = match a.source {
        Some(s) => s,
        None => SitePoint::origin(a.dim),
    };
    check_site(&source, a.dim, "source")?;
    check_site(&a.target, a.dim, "target")?;
    let domain = BoxRegion::linf(SitePoint::origin(a.dim), a.box_radius);
    for p in [&source, &a.target] {
        if !domain.contains(p) {
            return Err(frogsim_core::FrogError::DomainTooSmall(format!(
                "site {p} lies outside the box of radius {}",
                a.box_radius
            ))
            .into());
        }
    }
    let mut config = Configuration::bernoulli(seed, domain, a.r)?;
    if a.force_source {
        config = config.force_occupied(source);
    }
    let oracle = WalkOracle::new(seed, a.dim)?;
    let horizon = match a.horizon {
        Some(h) => h,
        None => default_horizon(source.l1_dist(&a.target), delta(a.dim, a.r)?),
    };
    let res = passage_time(&oracle, &config, &source, &a.target, &domain, horizon)?;
    let mut t = Table::new("passage", &["source", "target", "value", "horizon", "legs", "path", "leg_times"]);
    t.push(vec![
        source.to_string(),
        a.target.to_string(),
        res.value.to_string(),
        horizon.to_string(),
        res.per_leg_times.len().to_string(),
        join_sites(&res.realized_path),
        res.per_leg_times.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
    ]);
    sink.table(&t)?;
    Ok(())
}

fn mu_table(estimates: &[MuEstimate]) -> Table {
    let mut t = Table::new("mu", &MuRow::HEADER);
    for row in estimates.iter().flat_map(MuEstimate::rows) {
        t.push(vec![
            row.d.to_string(),
            f(row.r),
            row.x,
            row.n.to_string(),
            row.trials.to_string(),
            f(row.mu_hat),
            f(row.ci_low),
            f(row.ci_high),
            f(row.delta),
            f(row.ratio),
            f(row.censor_rate),
            row.seed.to_string(),
        ]);
    }
    t
}

fn shape(dim: usize, r: f64, t_list: &[u64], box_radius: u64, seed: u64, sink: &mut Sink) -> Result<()> {
    let mut times: Vec<u64> = t_list.to_vec();
    times.sort_unstable();
    times.dedup();
    let horizon = *times.last().ok_or_else(|| usage("--t-list is empty"))?;
    let origin = SitePoint::origin(dim);
    let domain = BoxRegion::linf(origin, box_radius);
    let config = Configuration::bernoulli(seed, domain, r)?.force_occupied(origin);
    let oracle = WalkOracle::new(seed, dim)?;
    let front = activation_front(&oracle, &config, &origin, &domain, horizon)?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.push("t".into());
    let mut table = Table::new("shape", &header);
    for &t in &times {
        for z in visited_region(&front, t) {
            let mut row: Vec<String> = z.coords().iter().map(i64::to_string).collect();
            row.push(t.to_string());
            table.push(row);
        }
    }
    sink.table(&table)?;
    Ok(())
}

fn chain_check(a: &ChainArgs, seed: u64, sink: &mut Sink) -> Result<()> {
    let specs = a
        .specs
        .split(';')
        .map(|s| {
            let idx = s
                .split(',')
                .map(|t| t.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("cannot parse index sequence '{s}'")))?;
            Ok(ChainSpec::new(idx)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let dl = delta(a.dim, a.r)?;
    let horizon = a.horizon.unwrap_or_else(|| default_horizon(1, dl));
    let plan = ChainPlan {
        dim: a.dim,
        r: a.r,
        specs,
        trials: a.trials,
        master_seed: seed,
        horizon,
        duration_constant: a.duration_constant,
        range_constant: a.range_constant,
        range_time: a.range_time,
    };
    let stats = chain_statistics(&plan)?;
    let mut t = Table::new("chain_stats", &ChainRow::HEADER);
    for r in &stats.rows {
        t.push(vec![
            r.seed.to_string(),
            r.d.to_string(),
            f(r.r),
            r.nu.to_string(),
            r.sum_i.to_string(),
            r.sum_sigma.to_string(),
            r.max_range.to_string(),
            r.censored.to_string(),
        ]);
    }
    sink.table(&t)?;
    #[derive(Serialize)]
    struct Events<'a> {
        censor_rate: f64,
        duration_event: &'a Proportion,
        range_event: &'a Proportion,
    }
    sink.json(
        "chain_events.json",
        &Events { censor_rate: stats.censor_rate, duration_event: &stats.duration_event, range_event: &stats.range_event },
    )?;
    Ok(())
}

fn geometry(dim: usize, r: f64, a: &RenormArgs) -> Result<BoxGeometry> {
    if a.override_exponents {
        return Ok(BoxGeometry::desk(dim, r, a.c_ckn, a.desk_radius)?);
    }
    if r < PHYSICAL_MIN_DENSITY {
        return Err(usage(format!(
            "physical box sizes at r = {r} grow like r^(-d/2) and are intractable; \
             use r >= {PHYSICAL_MIN_DENSITY} or pass --override-exponents"
        )));
    }
    let g = BoxGeometry::physical(&RenormParams::new(dim, r, a.c_ckn)?);
    g.validate()?;
    Ok(g)
}

fn parse_gamma_sets(s: &str) -> Result<Vec<BTreeSet<SitePoint>>> {
    s.split('|')
        .map(|set| {
            set.split(';')
                .map(|p| p.parse::<SitePoint>().map_err(CliError::from))
                .collect::<Result<BTreeSet<_>>>()
        })
        .collect()
}

fn stats(s: &StatsCommand, seed: u64, sink: &mut Sink) -> Result<()> {
    match s {
        StatsCommand::Pz { dim, n, gamma } => {
            let sets = match gamma {
                Some(g) => parse_gamma_sets(g)?,
                None => unit_box_subsets(*dim)?,
            };
            let mut t = Table::new(
                "pz",
                &[
                    "gamma",
                    "n",
                    "paths",
                    "mean_num",
                    "mean_den",
                    "second_num",
                    "second_den",
                    "prob_num",
                    "prob_den",
                    "goal_num",
                    "goal_den",
                    "pz_holds",
                    "second_moment_holds",
                    "goal_holds",
                ],
            );
            for g in &sets {
                let rep = pz_exact_check(*dim, *n, g)?;
                let mut row = vec![join_sites(&rep.gamma), n.to_string(), rep.paths.to_string()];
                for fr in [rep.mean(), rep.second_moment(), rep.probability_above_half_mean(), rep.goal_bound()] {
                    row.push(fr.numerator.to_string());
                    row.push(fr.denominator.to_string());
                }
                row.extend([rep.pz_holds, rep.second_moment_holds, rep.goal_holds].map(|b| b.to_string()));
                t.push(row);
            }
            sink.table(&t)?;
        }
        StatsCommand::Range { dim, n_list, trials } => {
            let rows = range_growth(*dim, n_list, *trials, seed)?;
            let mut t = Table::new("range", &["d", "n", "trials", "mean", "ci_low", "ci_high", "phi", "ratio"]);
            for r in rows {
                t.push(vec![
                    dim.to_string(),
                    r.n.to_string(),
                    r.trials.to_string(),
                    f(r.mean),
                    f(r.ci_low),
                    f(r.ci_high),
                    f(r.phi),
                    f(r.ratio),
                ]);
            }
            sink.table(&t)?;
        }
        StatsCommand::Hitting { dim, z, n, trials } => {
            let mut t = Table::new(
                "hitting",
                &["d", "z", "n", "hits", "trials", "p_hat", "ci_low", "ci_high", "implied_constant", "regime_warning"],
            );
            for zi in z {
                check_site(zi, *dim, "z")?;
                let steps = n.unwrap_or(zi.l2_sq());
                let est = hitting_probability(*dim, zi, steps, *trials, seed)?;
                let mut row = vec![dim.to_string(), zi.to_string(), steps.to_string()];
                row.extend(proportion_cells(&est.probability));
                row.push(f(est.implied_constant));
                row.push(est.regime_warning.to_string());
                t.push(row);
            }
            sink.table(&t)?;
        }
        StatsCommand::Deviation { dim, n, beta, trials } => {
            let p = range_ball_deviation(*dim, *n, *beta, *trials, seed)?;
            let mut t = Table::new("deviation", &["d", "n", "beta", "events", "trials", "frequency", "ci_low", "ci_high"]);
            let mut row = vec![dim.to_string(), n.to_string(), f(*beta)];
            row.extend(proportion_cells(&p));
            t.push(row);
            sink.table(&t)?;
        }
        StatsCommand::Ckn { dim, n, a, b_center, b_radius, delta, r, c_ckn, trials } => {
            for p in a.iter().chain([b_center]) {
                check_site(p, *dim, "a/--b-center")?;
            }
            let b: Vec<SitePoint> = BoxRegion::linf(*b_center, *b_radius).iter().collect();
            let rep = ckn_event_frequency(&CknParams {
                d: *dim,
                n: *n,
                a: a.clone(),
                b,
                delta: *delta,
                r: *r,
                c_ckn: *c_ckn,
                trials: *trials,
                master_seed: seed,
            })?;
            let mut t = Table::new(
                "ckn",
                &[
                    "d",
                    "n",
                    "c_ckn",
                    "threshold",
                    "covering_frequency",
                    "covering_ci_high",
                    "covering_bound",
                    "occupied_frequency",
                    "occupied_ci_high",
                    "occupied_bound",
                    "admissible_c",
                    "early_saturation",
                    "mean_poor_walks",
                ],
            );
            t.push(vec![
                dim.to_string(),
                n.to_string(),
                f(*c_ckn),
                f(rep.threshold),
                f(rep.covering_shortfall.p_hat),
                f(rep.covering_shortfall.ci_high),
                f(rep.covering_bound),
                f(rep.occupied_shortfall.p_hat),
                f(rep.occupied_shortfall.ci_high),
                f(rep.occupied_bound),
                f(rep.admissible_c),
                f(rep.diagnostics.early_saturation.p_hat),
                f(rep.diagnostics.mean_poor_walks),
            ]);
            sink.table(&t)?;
        }
        StatsCommand::Chernoff { q, n, c, schedule, trials } => {
            let sched = match schedule {
                ScheduleKind::Iid => Schedule::Iid,
                ScheduleKind::Alternating => Schedule::Alternating,
                ScheduleKind::Adversarial => Schedule::Adversarial,
            };
            let rep = adapted_chernoff_check(*q, *n, *c, &sched, *trials, seed)?;
            let mut t = Table::new(
                "chernoff",
                &["q", "n", "c", "events", "trials", "frequency", "ci_low", "ci_high", "bound", "holds"],
            );
            let mut row = vec![f(*q), n.to_string(), f(*c)];
            row.extend(proportion_cells(&rep.frequency));
            row.push(f(rep.bound));
            row.push(rep.holds.to_string());
            t.push(row);
            sink.table(&t)?;
        }
    }
    Ok(())
}
