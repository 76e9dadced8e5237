//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and fails if any criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bankfair_core::allocator::talmud_allocate;
use bankfair_core::domain::{position_weights, Slate};
use bankfair_core::metrics::{dcg_of, esp, gini, ideal_dcg, mmr, ndcg, var_accuracy, QualityReport};
use bankfair_core::regret::{normalized_satisfaction, regret_rejoice, FuzzyParams, RegretAnchor, SatisfactionModel};
use bankfair_core::reranker::{
    merit_variance, run_session, solve_user_slate, target_exposure, target_objective, Policy, SlateSettings,
};
use bankfair_core::session_log::log_to_string;
use bankfair_core::synthetic::{generate_dataset, SyntheticSpec};
use bankfair_core::{Dataset, ProviderCatalog, RunConfig, SolverMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn reference() -> Dataset {
    generate_dataset(&SyntheticSpec::default()).expect("reference dataset")
}

fn talmud_suite() -> Outcome {
    let start = Instant::now();
    let claims = [100.0, 200.0, 300.0];
    let expected = [
        (100.0, [100.0 / 3.0; 3]),
        (200.0, [50.0, 75.0, 75.0]),
        (300.0, [50.0, 100.0, 150.0]),
    ];
    for (estate, want) in expected {
        let got = talmud_allocate(estate, &claims).map_err(|e| e.to_string())?.shares;
        for (g, w) in got.iter().zip(want) {
            ensure!((g - w).abs() <= 1e-9, "estate {estate}: got {got:?}, want {want:?}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..10_000 {
        let n = rng.random_range(1..=10);
        let claims: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1000.0)).collect();
        let total: f64 = claims.iter().sum();
        let estate = rng.random_range(0.0..=total);
        let a = talmud_allocate(estate, &claims).map_err(|e| e.to_string())?.shares;
        let sum: f64 = a.iter().sum();
        ensure!((sum - estate).abs() <= 1e-9, "case {case}: exhaustion {sum} vs {estate}");
        for i in 0..n {
            ensure!(a[i] >= 0.0 && a[i] <= claims[i] + 1e-12, "case {case}: bound");
            for j in 0..n {
                if claims[i] <= claims[j] {
                    ensure!(a[i] <= a[j] + 1e-9, "case {case}: order");
                }
            }
        }
        let dual = talmud_allocate(total - estate, &claims).map_err(|e| e.to_string())?.shares;
        for i in 0..n {
            ensure!((a[i] - (claims[i] - dual[i])).abs() <= 1e-9, "case {case}: self-duality");
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("classic instance exact, 10000 random instances ok in {took:.2?}"))
}

fn regret_suite() -> Outcome {
    let q_star = 3.0;
    let mut worst: f64 = 0.0;
    for delta in [0.5, 1.0, 5.0] {
        let h = 1e-4 / delta;
        let at_ideal = regret_rejoice(q_star, q_star, delta).map_err(|e| e.to_string())?;
        ensure!(at_ideal == 0.0, "R(0) = {at_ideal}");
        let r = |q: f64| regret_rejoice(q.min(q_star), q_star, delta).expect("q <= q*");
        for i in 0..1000 {
            let q = h + (q_star - 2.0 * h) * i as f64 / 999.0;
            let x = q - q_star;
            let d1 = (r(q + h) - r(q - h)) / (2.0 * h);
            let d2 = (r(q + h) - 2.0 * r(q) + r(q - h)) / (h * h);
            let a1 = delta * (-delta * x).exp();
            let a2 = -delta * delta * (-delta * x).exp();
            ensure!(a1 > 0.0 && a2 < 0.0, "sign of derivatives at q={q}");
            let e1 = (d1 - a1).abs() / a1;
            let e2 = (d2 - a2).abs() / a2.abs();
            worst = worst.max(e1).max(e2);
            ensure!(e1 <= 1e-6 && e2 <= 1e-6, "delta {delta}, q {q}: rel err {e1:e}/{e2:e}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let q_star = rng.random_range(0.01..20.0);
        let delta = rng.random_range(0.01..50.0);
        let lo = normalized_satisfaction(0.0, q_star, delta).map_err(|e| e.to_string())?;
        let hi = normalized_satisfaction(q_star, q_star, delta).map_err(|e| e.to_string())?;
        ensure!(lo.abs() <= 1e-12 && (hi - 1.0).abs() <= 1e-12, "anchors {lo} {hi} at q*={q_star} delta={delta}");
    }
    let mut gap: f64 = 0.0;
    for q_star in [0.1, 1.0, 3.0, 10.0] {
        for i in 0..=1000 {
            let q = q_star * i as f64 / 1000.0;
            let z = normalized_satisfaction(q, q_star, 1e-4).map_err(|e| e.to_string())?;
            gap = gap.max((z - q / q_star).abs());
        }
    }
    ensure!(gap < 1e-3, "delta -> 0 gap {gap:e}");
    Ok(format!("worst derivative rel err {worst:.1e}, anchors exact, small-delta gap {gap:.1e}"))
}

fn lambda_zero_identity(reference: &Dataset) -> Outcome {
    let mut sets = vec![("reference", reference.clone())];
    for seed in [3, 4] {
        let spec = SyntheticSpec {
            users: 60,
            items: 25,
            providers: 4,
            intervals: 3,
            score_distribution: bankfair_core::synthetic::ScoreDistribution::Uniform,
            seed,
            ..Default::default()
        };
        sets.push(("small", generate_dataset(&spec).map_err(|e| e.to_string())?));
    }
    for (name, ds) in &sets {
        let config = RunConfig { lambda: 0.0, ..Default::default() };
        let plus = run_session(ds, &config, Policy::BankfairPlus).map_err(|e| e.to_string())?;
        let top = run_session(ds, &config, Policy::TopK).map_err(|e| e.to_string())?;
        for (a, b) in plus.decisions.iter().zip(&top.decisions) {
            ensure!(a.items == b.items, "{name}: slates differ at t={}", a.t);
        }
        ensure!(plus.metrics.ndcg_mean == 1.0, "{name}: mean NDCG {}", plus.metrics.ndcg_mean);
    }
    Ok("slates identical to top-K on 3 datasets, mean NDCG 1.0".into())
}

fn catalog(owners: &[usize]) -> ProviderCatalog {
    ProviderCatalog::from_pairs(owners.iter().enumerate().map(|(i, p)| (format!("i{i}"), format!("p{p}")))).unwrap()
}

fn inner_solver_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut literal = 0;
    let mut optimal = 0;
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(3..=8);
        let k = rng.random_range(1..=3);
        let p = rng.random_range(1..=3usize.min(n));
        let owners: Vec<usize> = (0..n).map(|i| if i < p { i } else { rng.random_range(0..p) }).collect();
        let cat = catalog(&owners);
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mu: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let delta = [0.1, 1.0, 5.0][case % 3];
        let anchor = if case % 2 == 0 { RegretAnchor::Unit } else { RegretAnchor::Scaled };
        let settings = SlateSettings {
            k,
            lambda: 0.5,
            model: SatisfactionModel::Regret { delta, anchor },
            w_norm: 1.0,
            mode: SolverMode::Exact,
            scan_points: 32,
        };
        let exact = solve_user_slate(0, &scores, &cat, &mu, &settings).map_err(|e| e.to_string())?;
        let fast = solve_user_slate(0, &scores, &cat, &mu, &SlateSettings { mode: SolverMode::Parametric, ..settings })
            .map_err(|e| e.to_string())?;
        let gap = exact.objective - fast.objective;
        worst = worst.max(gap);
        ensure!(
            fast.objective >= exact.objective - 1e-3 * exact.objective.abs(),
            "case {case}: parametric {} vs exact {}",
            fast.objective,
            exact.objective
        );
        if fast.objective >= exact.objective {
            optimal += 1;
        }
        if fast.objective >= 0.999 * exact.objective {
            literal += 1;
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(format!(
        "1000/1000 within 0.1% relative, {optimal}/1000 optimal, largest shortfall {worst:.1e}; \
         {literal}/1000 satisfy 0.999 x exact read literally (fails only for negative optima) in {took:.2?}"
    ))
}

fn target_exposure_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let mu = [rng.sample::<f64, _>(StandardNormal) * 0.5, rng.sample::<f64, _>(StandardNormal) * 0.5];
        let a: f64 = rng.random_range(0.05..0.95);
        let gamma = [a, 1.0 - a];
        let fuzzy = FuzzyParams::new(rng.random_range(0.0..=1.0), rng.random_range(1.0..200.0), rng.random_range(0.01..1.0))
            .map_err(|e| e.to_string())?;
        let e = target_exposure(&mu, &gamma, &fuzzy);
        let got = target_objective(&e, &mu, &gamma, &fuzzy);
        let grid = (0..=10_000)
            .map(|j| {
                let x = j as f64 / 10_000.0;
                target_objective(&[x, 1.0 - x], &mu, &gamma, &fuzzy)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(grid - got);
        ensure!(got >= grid - 1e-4, "case {case}: {got} vs grid {grid} (mu {mu:?}, gamma {gamma:?}, {fuzzy:?}, e {e:?})");
    }
    for _ in 0..20 {
        let n = rng.random_range(2..=6);
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let fuzzy = FuzzyParams::new(rng.random_range(0.05..=1.0), 50.0, 0.1).map_err(|e| e.to_string())?;
        let e = target_exposure(&vec![0.0; n], &gamma, &fuzzy);
        let v = merit_variance(&e, &gamma);
        ensure!(v < 1e-10, "mu = 0 variance {v:e}");
    }
    Ok(format!("100 two-provider draws within {worst:.1e} of grid optimum; mu = 0 lands on merit"))
}

fn directional_tradeoff(reference: &Dataset) -> Outcome {
    let mut out = Vec::new();
    for lambda in [0.0, 0.9] {
        let start = Instant::now();
        let log = run_session(reference, &RunConfig { lambda, ..Default::default() }, Policy::BankfairPlus)
            .map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure!(took < Duration::from_secs(60), "lambda {lambda} took {took:?}");
        out.push((log.metrics, took));
    }
    let (zero, high) = (out[0].0, out[1].0);
    ensure!(high.gini < zero.gini, "Gini {} !< {}", high.gini, zero.gini);
    ensure!(high.esp > zero.esp, "ESP {} !> {}", high.esp, zero.esp);
    ensure!(high.ndcg_mean <= zero.ndcg_mean, "NDCG {} !<= {}", high.ndcg_mean, zero.ndcg_mean);
    Ok(format!(
        "Gini {:.4} -> {:.4}, ESP {:.2} -> {:.2}, NDCG {:.4} -> {:.4} (sessions {:.2?} / {:.2?})",
        zero.gini, high.gini, zero.esp, high.esp, zero.ndcg_mean, high.ndcg_mean, out[0].1, out[1].1
    ))
}

fn individual_fairness_trend(reference: &Dataset) -> Outcome {
    let run = |delta: f64, policy: Policy| {
        run_session(reference, &RunConfig { lambda: 0.7, delta, ..Default::default() }, policy).map(|l| l.metrics)
    };
    let low = run(0.1, Policy::BankfairPlus).map_err(|e| e.to_string())?;
    let high = run(5.0, Policy::BankfairPlus).map_err(|e| e.to_string())?;
    let linear = run(5.0, Policy::BankfairLinear).map_err(|e| e.to_string())?;
    ensure!(high.mmr >= low.mmr, "MMR(5) {} < MMR(0.1) {}", high.mmr, low.mmr);
    ensure!(high.var <= low.var, "Var(5) {} > Var(0.1) {}", high.var, low.var);
    ensure!(high.mmr > linear.mmr, "MMR(5) {} <= linear {}", high.mmr, linear.mmr);
    Ok(format!(
        "MMR {:.4} -> {:.4} (linear {:.4}), Var {:.5} -> {:.5}",
        low.mmr, high.mmr, linear.mmr, low.var, high.var
    ))
}

fn metric_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..1000 {
        // provider exposure and merit
        let p = rng.random_range(2..=6);
        let exposure: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..5.0)).collect();
        let merit: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..1.0)).collect();
        let g = gini(&exposure, &merit).map_err(|e| e.to_string())?;
        let y: Vec<f64> = exposure.iter().zip(&merit).map(|(e, m)| e / m).collect();
        let mut pairs = 0.0;
        for a in &y {
            for b in &y {
                pairs += (a - b).abs();
            }
        }
        let oracle = pairs / (2.0 * p as f64 * y.iter().sum::<f64>());
        ensure!((g - oracle).abs() <= 1e-12, "case {case}: gini {g} vs {oracle}");
        let c = rng.random_range(0.1..10.0);
        let scaled: Vec<f64> = exposure.iter().map(|e| e * c).collect();
        let gs = gini(&scaled, &merit).map_err(|e| e.to_string())?;
        ensure!((gs - g).abs() <= 1e-12, "case {case}: gini not scale invariant");
        let mins: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..5.0)).collect();
        let met = exposure.iter().zip(&mins).filter(|(e, m)| e >= m).count() as f64 / p as f64;
        ensure!(esp(&exposure, &mins) == met, "case {case}: esp");

        // one user's slate
        let n = rng.random_range(3..=6);
        let k = rng.random_range(1..=3);
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut items: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            items.swap(i, rng.random_range(0..=i));
        }
        items.truncate(k);
        let slate = Slate::new(0, items.clone(), k).map_err(|e| e.to_string())?;
        let w = position_weights(k);
        let dcg_oracle: f64 = items.iter().enumerate().map(|(r, &i)| scores[i] / ((r + 2) as f64).log2()).sum();
        let mut best = f64::NEG_INFINITY;
        enumerate(n, k, &mut Vec::new(), &mut |s: &[usize]| {
            let v: f64 = s.iter().zip(&w).map(|(&i, w)| w * scores[i]).sum();
            best = best.max(v);
        });
        let got_ideal = ideal_dcg(&scores, k).map_err(|e| e.to_string())?;
        ensure!((got_ideal - best).abs() <= 1e-12, "case {case}: ideal {got_ideal} vs {best}");
        ensure!((dcg_of(&items, &scores) - dcg_oracle).abs() <= 1e-12, "case {case}: dcg");
        let nd = ndcg(&slate, &scores, k).map_err(|e| e.to_string())?;
        ensure!((0.0..=1.0).contains(&nd), "case {case}: ndcg {nd}");
        ensure!((nd - dcg_oracle / best).abs() <= 1e-12, "case {case}: ndcg oracle");

        // per-user accuracy spread
        let users = rng.random_range(2..=6);
        let equal = rng.random_bool(0.2);
        let triples: Vec<(usize, f64, f64)> = (0..users)
            .map(|u| (u, if equal { 0.5 } else { rng.random_range(0.01..1.0) }, 1.0))
            .collect();
        let report = QualityReport::from_decisions(triples.clone());
        let v = var_accuracy(&report).map_err(|e| e.to_string())?;
        let m = mmr(&report).map_err(|e| e.to_string())?;
        let vals: Vec<f64> = triples.iter().map(|t| t.1).collect();
        let mut pair_sum = 0.0;
        for a in 0..users {
            for b in a + 1..users {
                pair_sum += (vals[a] - vals[b]).powi(2);
            }
        }
        let var_oracle = pair_sum / (users * users) as f64;
        ensure!((v - var_oracle).abs() <= 1e-12, "case {case}: var {v} vs {var_oracle}");
        let mmr_oracle = vals.iter().cloned().fold(f64::INFINITY, f64::min) / vals.iter().cloned().fold(0.0, f64::max);
        ensure!((m - mmr_oracle).abs() <= 1e-12, "case {case}: mmr");
        ensure!((v == 0.0) == (m == 1.0), "case {case}: Var = 0 <=> MMR = 1 broken ({v}, {m})");
    }
    Ok("1000 random cases agree with brute-force oracles".into())
}

fn enumerate(n: usize, k: usize, current: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if current.len() == k {
        visit(current);
        return;
    }
    for i in 0..n {
        if !current.contains(&i) {
            current.push(i);
            enumerate(n, k, current, visit);
            current.pop();
        }
    }
}

fn determinism() -> Outcome {
    let config = RunConfig { lambda: 0.9, ..Default::default() };
    let mut logs = Vec::new();
    for _ in 0..2 {
        let ds = reference();
        let log = run_session(&ds, &config, Policy::BankfairPlus).map_err(|e| e.to_string())?;
        logs.push(log_to_string(&log, &ds));
    }
    ensure!(logs[0] == logs[1], "logs differ");
    Ok(format!("two runs byte-identical ({} bytes)", logs[0].len()))
}

fn performance() -> Outcome {
    let spec = SyntheticSpec {
        users: 2000,
        items: 1000,
        providers: 50,
        arrivals: Some(50_000),
        ..Default::default()
    };
    let ds = generate_dataset(&spec).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let log = run_session(&ds, &RunConfig { lambda: 0.7, ..Default::default() }, Policy::BankfairPlus)
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(log.decisions.len() == 50_000, "served {}", log.decisions.len());
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("50000 decisions, 50 providers, K=10 in {took:.2?}"))
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let reference = reference();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("talmud rule suite", Box::new(talmud_suite)),
        ("regret function suite", Box::new(regret_suite)),
        ("zero trade-off equals top-K", Box::new(|| lambda_zero_identity(&reference))),
        ("inner slate solver vs enumeration", Box::new(inner_solver_oracle)),
        ("target exposure vs grid", Box::new(target_exposure_oracle)),
        ("fairness/accuracy trade-off direction", Box::new(|| directional_tradeoff(&reference))),
        ("individual fairness grows with delta", Box::new(|| individual_fairness_trend(&reference))),
        ("metric invariants", Box::new(metric_invariants)),
        ("determinism", Box::new(determinism)),
        ("performance envelope", Box::new(performance)),
    ];
    let mut failed = 0;
    let mut stdout = std::io::stdout();
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let line = match &outcome {
            Ok(detail) => format!("acceptance {:>2} {name}: PASS ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                format!("acceptance {:>2} {name}: FAIL ({why})", n + 1)
            }
        };
        writeln!(stdout, "{line}").unwrap();
    }
    writeln!(stdout, "acceptance: {} passed, {failed} failed", criteria.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
