//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rayon::ThreadPoolBuilder;
use screen_trex::biobank::Branch;
use screen_trex::screen::reciprocal_estimate;
use screen_trex::sim::{mc_campaign, nhg_urn_study, simulate, Campaign, SimSpec};
use screen_trex::{decide, nhg_mean, report, screen_phenotype, ScreenConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cfg() -> ScreenConfig {
    ScreenConfig {
        master_seed: 20_240_501,
        ..ScreenConfig::default()
    }
}

/// Campaign results shared between the FDR criteria and the reciprocal check.
struct Shared {
    screening: Option<Campaign>,
    null: Option<Campaign>,
}

fn fdr_line(c: &Campaign, m: Branch) -> (bool, String) {
    let s = c.summary(m).expect("summary present");
    let pass = c.failures == 0 && s.fdr_within_estimate();
    (
        pass,
        format!(
            "{m}: reps={} mean FDP={:.4} (SE {:.4}) mean alpha_hat={:.4} mean |sel|={:.2} TPP={:.3} failures={}",
            s.reps, s.fdp.mean, s.fdp.se, s.alpha_hat.mean, s.n_selected.mean, s.tpp.mean, c.failures
        ),
    )
}

fn criterion_1(shared: &mut Shared) -> Outcome {
    let spec = SimSpec::gaussian(150, 300, 10, 2.0, 1);
    match mc_campaign(&spec, 200, &[Branch::Ordinary, Branch::Confidence], &cfg()) {
        Ok(c) => {
            let (pass, d) = fdr_line(&c, Branch::Ordinary);
            shared.screening = Some(c);
            outcome(pass, d)
        }
        Err(e) => outcome(false, format!("campaign failed: {e}")),
    }
}

fn criterion_2(shared: &Shared) -> Outcome {
    let Some(c) = &shared.screening else {
        return outcome(false, "screening campaign unavailable");
    };
    let (pass, d) = fdr_line(c, Branch::Confidence);
    let conf = c.summary(Branch::Confidence).unwrap().n_selected.mean;
    let ord = c.summary(Branch::Ordinary).unwrap().n_selected.mean;
    outcome(pass && conf <= ord, format!("{d}; ordinary mean |sel|={ord:.2}"))
}

fn criterion_3(shared: &mut Shared) -> Outcome {
    let spec = SimSpec::gaussian(150, 300, 0, 2.0, 2);
    match mc_campaign(&spec, 200, &[Branch::Ordinary], &cfg()) {
        Ok(c) => {
            let (pass, d) = fdr_line(&c, Branch::Ordinary);
            shared.null = Some(c);
            outcome(pass, d)
        }
        Err(e) => outcome(false, format!("campaign failed: {e}")),
    }
}

fn criterion_4(shared: &Shared) -> Outcome {
    let rows: Vec<_> = shared
        .screening
        .iter()
        .chain(shared.null.iter())
        .flat_map(|c| c.rows.iter())
        .collect();
    if rows.is_empty() {
        return outcome(false, "no screening results to check");
    }
    let bad = rows
        .iter()
        .filter(|r| r.alpha_hat * r.n_selected.max(1) as f64 != 1.0)
        .count();
    let spots = [(28, "3.57%"), (21, "4.76%"), (30, "3.33%")];
    let spot_ok = spots
        .iter()
        .all(|&(r, pct)| format!("{:.2}%", 100.0 * reciprocal_estimate(r)) == pct);
    let six = report::fmt_sig6(reciprocal_estimate(28)) == "0.0357143";
    outcome(
        bad == 0 && spot_ok && six,
        format!("{} results, {bad} with alpha_hat*max(R,1) != 1; spot values ok={spot_ok}", rows.len()),
    )
}

fn criterion_5() -> Outcome {
    let failures: Vec<String> = (0..500u64)
        .filter_map(|s| common::lars_matches_reference(s, 1e-8).err())
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "500 instances, {} mismatches{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn criterion_6() -> Outcome {
    // (nulls, dummies, stops)
    let grid: [(u64, u64, u64); 20] = [
        (1000, 1000, 1),
        (0, 5, 1),
        (1, 1, 1),
        (3, 1, 1),
        (5, 5, 5),
        (10, 3, 2),
        (20, 20, 1),
        (20, 20, 10),
        (50, 10, 3),
        (50, 100, 7),
        (100, 100, 1),
        (100, 100, 20),
        (200, 50, 5),
        (300, 300, 2),
        (500, 1000, 10),
        (990, 1000, 1),
        (1000, 200, 4),
        (1000, 1000, 5),
        (2000, 2000, 3),
        (7, 13, 13),
    ];
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for (i, &(nulls, dummies, stops)) in grid.iter().enumerate() {
        let exact = match nhg_mean(nulls + dummies, nulls, stops) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("nhg_mean failed: {e}")),
        };
        let (mean, se) = match nhg_urn_study(nulls, dummies, stops, 1_000_000, 0xC0FFEE + i as u64) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("urn study failed: {e}")),
        };
        let z = if se > 0.0 {
            (mean - exact).abs() / se
        } else if mean == exact {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
        if z > 3.0 {
            fails.push(format!("({nulls},{dummies},{stops}): exact {exact}, urn {mean} +- {se}"));
        }
    }
    let theorem = nhg_mean(2000, 1000, 1).map(|m| (m - 1000.0 / 1001.0).abs() < 1e-12).unwrap_or(false);
    outcome(
        fails.is_empty() && theorem,
        format!("20 grid points, max |z|={worst:.2}, p0=p=1000 closed form ok={theorem} {fails:?}"),
    )
}

fn criterion_7() -> Outcome {
    let values = [0.0, 0.02, 0.05, 1.0 / 15.0, 0.1, 0.2, 0.25, 1.0];
    let windows = [(0.05, 0.2), (0.02, 1.0), (0.1, 0.1)];
    let mut checked = 0;
    let mut bad = Vec::new();
    for &(lo, hi) in &windows {
        let c = ScreenConfig {
            alpha_l: lo,
            alpha_u: hi,
            ..ScreenConfig::default()
        };
        for &a in &values {
            for &ac in &values {
                checked += 1;
                let got = decide(a, ac, &c).as_str();
                let want = common::decide_oracle(a, ac, lo, hi);
                if got != want {
                    bad.push(format!("a={a} ac={ac} window=[{lo},{hi}]: {got} vs {want}"));
                }
            }
        }
    }
    outcome(
        bad.is_empty() && checked >= 64,
        format!("{checked} combinations, {} disagreements {:?}", bad.len(), bad.first()),
    )
}

fn criterion_8() -> Outcome {
    let spec = SimSpec::gaussian(300, 2000, 10, 1.0, 8);
    let pool = ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let res = pool.install(|| mc_campaign(&spec, 5, &[Branch::Ordinary, Branch::Fallback], &cfg()));
    match res {
        Ok(c) => {
            let times = |m: Branch| {
                common::median(c.rows.iter().filter(|r| r.method == m).map(|r| r.wall_time).collect())
            };
            let (ord, fb) = (times(Branch::Ordinary), times(Branch::Fallback));
            let ratio = fb / ord;
            outcome(
                ratio >= 3.0,
                format!("median ordinary {ord:.3}s, fallback {fb:.3}s, ratio {ratio:.2}"),
            )
        }
        Err(e) => outcome(false, format!("campaign failed: {e}")),
    }
}

fn criterion_9() -> Outcome {
    let spec = SimSpec::gaussian(300, 1000, 10, 1.0, 9);
    match mc_campaign(&spec, 100, &[Branch::Fallback], &cfg()) {
        Ok(c) => {
            let s = c.summary(Branch::Fallback).unwrap();
            let pass = c.failures == 0 && s.fdp.mean <= 0.1 + 2.0 * s.fdp.se;
            outcome(
                pass,
                format!(
                    "reps={} mean FDP={:.4} (SE {:.4}) mean |sel|={:.2} TPP={:.3}",
                    s.reps, s.fdp.mean, s.fdp.se, s.n_selected.mean, s.tpp.mean
                ),
            )
        }
        Err(e) => outcome(false, format!("campaign failed: {e}")),
    }
}

fn criterion_10() -> Outcome {
    let truth = match simulate(&SimSpec::gaussian(120, 200, 8, 2.0, 10)) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("simulation failed: {e}")),
    };
    let spec = SimSpec::gaussian(80, 120, 5, 2.0, 11);
    let methods = [Branch::Ordinary, Branch::Confidence, Branch::Fallback];
    let forced = ScreenConfig {
        alpha_l: 1.0,
        alpha_u: 1.0,
        ..cfg()
    };
    let run = |threads: usize| {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
        pool.install(|| {
            let a = screen_phenotype("det", &truth.dataset, &cfg());
            let b = screen_phenotype("det-fallback", &truth.dataset, &forced);
            let c = mc_campaign(&spec, 6, &methods, &cfg());
            (a, b, c)
        })
    };
    let runs = [run(1), run(4), run(4)];
    let key = |c: &Campaign| -> Vec<(usize, Branch, usize, u64, u64)> {
        c.rows
            .iter()
            .map(|r| (r.rep, r.method, r.n_selected, r.alpha_hat.to_bits(), r.fdp.to_bits()))
            .collect()
    };
    let mut same = true;
    for r in &runs[1..] {
        match (&runs[0], r) {
            ((Ok(a0), Ok(b0), Ok(c0)), (Ok(a), Ok(b), Ok(c))) => {
                same &= a0.same_outcome(a) && b0.same_outcome(b) && key(c0) == key(c);
            }
            _ => return outcome(false, "a run failed"),
        }
    }
    outcome(same, "1 thread vs 4 threads (twice): selections and alpha_hat bit-identical")
}

fn main() -> ExitCode {
    let mut shared = Shared {
        screening: None,
        null: None,
    };
    let mut all = true;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut(&mut Shared) -> Outcome, shared: &mut Shared| {
        let t0 = Instant::now();
        let o = f(shared);
        all &= o.pass;
        println!(
            "criterion {id:>2} {:<4} {name} [{:.1}s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            o.detail
        );
    };
    report(1, "ordinary FDR control", &mut criterion_1, &mut shared);
    report(2, "confidence FDR control", &mut |s: &mut Shared| criterion_2(s), &mut shared);
    report(3, "global-null control", &mut criterion_3, &mut shared);
    report(4, "reciprocal estimator", &mut |s: &mut Shared| criterion_4(s), &mut shared);
    report(5, "LARS reference equivalence", &mut |_| criterion_5(), &mut shared);
    report(6, "negative hypergeometric mean", &mut |_| criterion_6(), &mut shared);
    report(7, "branch truth table", &mut |_| criterion_7(), &mut shared);
    report(8, "fallback runtime ratio", &mut |_| criterion_8(), &mut shared);
    report(9, "fallback FDR control", &mut |_| criterion_9(), &mut shared);
    report(10, "determinism across threads", &mut |_| criterion_10(), &mut shared);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
