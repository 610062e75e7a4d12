//! Acceptance checks for the reproduced evaluation. Runs without the libtest
//! harness so every criterion prints a PASS/FAIL line.

mod support;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use misnc_core::{
    max_concurrent_lp, mincost_approx, mincost_exact, run_fptas, solve_lp,
    verify_offline_certificates, verify_online_certificates, FptasParams, LinearProgram, LpStatus,
    MulticastRequest, Network, OnlineConfig, OnlineState, PriceSystem, Relation,
};
use misnc_harness::{build_extended_butterfly, generate_online_trace, run_sweep, SweepConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{random_feasible_request, random_network, random_prices, ssp_min_cost};

const TRACE_SEED: u64 = 1;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs, || {
        format!("took {elapsed:?}, limit {limit_secs} s")
    })
}

fn butterfly_optimum() -> Outcome {
    let start = Instant::now();
    let (net, requests) = build_extended_butterfly(150.0);
    let opt = max_concurrent_lp(&net, &requests).map_err(|e| e.to_string())?;
    ensure((opt - 1.0).abs() <= 1e-6, || format!("lambda* = {opt}"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("lambda* = {opt:.9} in {:?}", start.elapsed()))
}

fn fptas_guarantee() -> Outcome {
    let start = Instant::now();
    let (net, requests) = build_extended_butterfly(150.0);
    let m = net.link_count();
    let mut lambdas = Vec::new();
    for eps in [0.4, 0.2, 0.1, 0.05, 0.01] {
        let params = FptasParams::from_epsilon(eps, m).map_err(|e| e.to_string())?;
        let sol = run_fptas(&net, &requests, &params).map_err(|e| e.to_string())?;
        let lambda = sol.lambda;
        let floor = (1.0 - eps).powi(3);
        ensure(lambda >= floor && lambda <= 1.0 + 1e-6, || {
            format!("eps {eps}: lambda {lambda} outside [{floor}, 1]")
        })?;
        for (e, link) in net.links().iter().enumerate() {
            ensure(sol.loads[e] <= link.capacity + 1e-6, || {
                format!("eps {eps}: {} load {}", link.id, sol.loads[e])
            })?;
            ensure(sol.account.kappa[e] < params.scale(), || {
                format!("eps {eps}: {} kappa {}", link.id, sol.account.kappa[e])
            })?;
        }
        let report = verify_offline_certificates(&sol, &net, &requests, Some(1.0));
        ensure(report.all_passed(), || format!("eps {eps}: {report:?}"))?;
        lambdas.push((eps, lambda));
    }
    for w in lambdas.windows(2) {
        ensure(w[1].1 >= w[0].1 - 0.02, || {
            format!("lambda fell from {:?} to {:?}", w[0], w[1])
        })?;
    }
    within(start.elapsed(), 120.0)?;
    let listed: Vec<String> = lambdas.iter().map(|(e, l)| format!("{e}:{l:.4}")).collect();
    Ok(format!("{} in {:?}", listed.join(" "), start.elapsed()))
}

fn online_run(config: OnlineConfig) -> Result<OnlineState, String> {
    let (net, _) = build_extended_butterfly(1.5);
    let trace = generate_online_trace(TRACE_SEED, 100, 100, 1.5);
    let mut state = OnlineState::new(net, config).map_err(|e| e.to_string())?;
    state.run(&trace).map_err(|e| e.to_string())?;
    Ok(state)
}

fn online_phi_one() -> Outcome {
    let start = Instant::now();
    let m = online_run(OnlineConfig::exact(1.0))?.metrics();
    ensure(m.acceptance_ratio == 1.0, || {
        format!("acceptance {}", m.acceptance_ratio)
    })?;
    ensure((1.05..=1.35).contains(&m.violation_ratio), || {
        format!("violation {}", m.violation_ratio)
    })?;
    ensure(m.bottleneck.as_deref() == Some("e10"), || {
        format!("bottleneck {:?}", m.bottleneck)
    })?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "acceptance {} violation {:.4} on {:?}",
        m.acceptance_ratio,
        m.violation_ratio,
        m.bottleneck.unwrap_or_default()
    ))
}

fn online_phi_four() -> Outcome {
    let m = online_run(OnlineConfig::exact(4.0))?.metrics();
    ensure((0.70..=0.90).contains(&m.acceptance_ratio), || {
        format!("acceptance {}", m.acceptance_ratio)
    })?;
    ensure(m.violation_ratio <= 1.05, || {
        format!("violation {}", m.violation_ratio)
    })?;
    Ok(format!(
        "acceptance {} violation {:.4}",
        m.acceptance_ratio, m.violation_ratio
    ))
}

fn online_certificates() -> Outcome {
    let mut runs = 0;
    for phi in [1.0, 2.0, 4.0, 8.0] {
        for config in [OnlineConfig::exact(phi), OnlineConfig::shifted(phi)] {
            let state = online_run(config)?;
            let report = verify_online_certificates(&state);
            ensure(report.checks.len() == 5, || {
                format!("{} checks", report.checks.len())
            })?;
            if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
                return Err(format!(
                    "phi {phi} {:?}: {} {}",
                    config.variant, bad.name, bad.detail
                ));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, 5 checks each"))
}

/// The min-cost program written out directly, with conservation at every node.
fn raw_mnc_cost(net: &Network, r: &MulticastRequest, prices: &[f64]) -> f64 {
    let m = net.link_count();
    let mut lp = LinearProgram::new();
    let conceptual: Vec<Vec<usize>> = r
        .receivers
        .iter()
        .map(|t| {
            (0..m)
                .map(|e| lp.add_variable(format!("g{t}_{e}"), 0.0))
                .collect()
        })
        .collect();
    let actual: Vec<usize> = (0..m)
        .map(|e| lp.add_variable(format!("f{e}"), prices[e]))
        .collect();
    for (slot, &t) in r.receivers.iter().enumerate() {
        for &v in net.nodes() {
            let mut row = Vec::new();
            for (e, link) in net.links().iter().enumerate() {
                if link.head == v {
                    row.push((conceptual[slot][e], 1.0));
                }
                if link.tail == v {
                    row.push((conceptual[slot][e], -1.0));
                }
            }
            let rhs = if v == t {
                1.0
            } else if v == r.source {
                -1.0
            } else {
                0.0
            };
            lp.add_constraint(row, Relation::Eq, rhs).unwrap();
        }
        for e in 0..m {
            lp.add_constraint(
                vec![(conceptual[slot][e], 1.0), (actual[e], -1.0)],
                Relation::Le,
                0.0,
            )
            .unwrap();
        }
    }
    for (e, link) in net.links().iter().enumerate() {
        lp.add_constraint(vec![(actual[e], 1.0)], Relation::Le, link.capacity / r.size)
            .unwrap();
    }
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective
}

fn mincost_oracle() -> Outcome {
    let (net, [a, _]) = build_extended_butterfly(150.0);
    let unit = vec![1.0; net.link_count()];
    let got = mincost_exact(&net, &a, &PriceSystem::new(unit.clone()).unwrap())
        .map_err(|e| e.to_string())?
        .cost;
    let raw = raw_mnc_cost(&net, &a, &unit);
    ensure((got - 13.0 / 3.0).abs() <= 1e-7, || format!("L = {got}"))?;
    ensure((got - raw).abs() <= 1e-7, || {
        format!("L = {got}, raw LP {raw}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut checked = 0;
    while checked < 50 {
        let n = rng.gen_range(3..=8);
        let net = random_network(&mut rng, n, 0.35);
        let Some(r) = random_feasible_request(&mut rng, &net, 1) else {
            continue;
        };
        let prices = random_prices(&mut rng, net.link_count());
        let caps: Vec<f64> = net.capacities().iter().map(|c| c / r.size).collect();
        let s = net.node_index(r.source).unwrap();
        let t = net.node_index(r.receivers[0]).unwrap();
        let oracle = ssp_min_cost(&net, s, t, &caps, &prices, 1.0).unwrap();
        let lp = mincost_exact(&net, &r, &PriceSystem::new(prices).unwrap())
            .map_err(|e| e.to_string())?
            .cost;
        ensure((lp - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()), || {
            format!("instance {checked}: lp {lp} vs min-cost flow {oracle}")
        })?;
        checked += 1;
    }
    Ok(format!("L = {got:.9}; 50 single-receiver instances agree"))
}

fn two_two_criteria() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    let mut checked = 0;
    let mut shifted_any = 0;
    while checked < 50 {
        let net = random_network(&mut rng, 8, 0.35);
        let Some(r) = random_feasible_request(&mut rng, &net, 4) else {
            continue;
        };
        let p = PriceSystem::new(random_prices(&mut rng, net.link_count())).unwrap();
        let exact = mincost_exact(&net, &r, &p).map_err(|e| e.to_string())?;
        let approx = mincost_approx(&net, &r, &p).map_err(|e| e.to_string())?;
        ensure(approx.cost <= 2.0 * exact.cost + 1e-9, || {
            format!("instance {checked}: {} > 2 x {}", approx.cost, exact.cost)
        })?;
        for (e, link) in net.links().iter().enumerate() {
            let f = approx.flow.link_flow[e];
            ensure(f <= 2.0 * link.capacity / r.size + 1e-9, || {
                format!("instance {checked}: {} carries {f}", link.id)
            })?;
        }
        let counts = approx.path_counts.clone().unwrap_or_default();
        let paths = approx.flow.paths.as_ref().ok_or("no paths recorded")?;
        for (ps, &w) in paths.iter().zip(&counts) {
            let threshold = 1.0 / (2.0 * (w * w) as f64);
            ensure(ps.iter().all(|p| p.flow >= threshold), || {
                format!("instance {checked}: path below {threshold}")
            })?;
        }
        let w_max = counts.iter().copied().max().unwrap_or(1);
        let floor = 1.0 / (2.0 * (w_max * w_max) as f64);
        ensure(approx.granularity >= floor, || {
            format!("instance {checked}: F_min {} < {floor}", approx.granularity)
        })?;
        if approx.flow.link_flow != exact.flow.link_flow {
            shifted_any += 1;
        }
        checked += 1;
    }
    Ok(format!("50 instances, {shifted_any} changed by shifting"))
}

fn load_comparison() -> Outcome {
    let config = SweepConfig {
        epsilons: vec![0.1],
        phis: vec![1.0],
        ..SweepConfig::default()
    };
    let sweep = run_sweep(&config).map_err(|e| e.to_string())?;
    ensure(sweep.link_rows.len() == 16, || {
        format!("{} rows", sweep.link_rows.len())
    })?;
    let max_gap = sweep
        .link_rows
        .iter()
        .map(|r| (r.offline_utilization.unwrap() - r.online_utilization.unwrap()).abs())
        .fold(0.0, f64::max);
    ensure(sweep.offline_bottleneck == sweep.online_bottleneck, || {
        format!(
            "offline {:?} vs online {:?}",
            sweep.offline_bottleneck, sweep.online_bottleneck
        )
    })?;
    Ok(format!(
        "16 rows, bottleneck {:?}, max utilization gap {max_gap:.4}",
        sweep.offline_bottleneck.unwrap_or_default()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("butterfly offline optimum", butterfly_optimum),
        ("fptas guarantee sweep", fptas_guarantee),
        ("online phi=1 reproduction", online_phi_one),
        ("online phi=4 reproduction", online_phi_four),
        ("online certificates", online_certificates),
        ("min-cost kernel oracle", mincost_oracle),
        ("(2,2)-criteria", two_two_criteria),
        ("offline/online load comparison", load_comparison),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
