//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 1 8`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use edgewalk::config::{preset, ExperimentConfig};
use edgewalk::farm::Farm;
use edgewalk::formats::{read_csv, Provenance};
use edgewalk::pipeline::{self, EvolveOptions, GenerationRow, Session};
use edgewalk::report::{GroupSummary, Report, Role};
use edgewalk::stats::{bonferroni_threshold, mann_whitney, power_report};
use edgewalk_core::chaos::{measure_delta, perturbation_delta};
use edgewalk_core::controller::{sample_stable, sample_wrapped_cauchy, MotionConfig};
use edgewalk_core::network::{decode_bits, max_straight_ticks, state_mask, Gate, Topology};
use edgewalk_core::seed;
use edgewalk_core::survival::{fit_weibull, kaplan_meier, mean_fpt, SurvivalDataset};
use rand::Rng;

struct Check {
    lines: Vec<(bool, String)>,
}

impl Check {
    fn new() -> Self {
        Self { lines: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        self.lines.push((ok, what.into()));
    }

    fn passed(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(|(ok, _)| *ok)
    }
}

/// Study outputs shared between criteria.
#[derive(Default)]
struct Studies {
    grid: Option<(PathBuf, Report)>,
    cohort: Option<(PathBuf, Report)>,
    evolve: Vec<(PathBuf, Report)>,
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn farm() -> Farm {
    Farm::new(0).unwrap()
}

// 1. estimators

fn weibull_draws(n: usize, scale: f64, shape: f64, s: u64) -> Vec<f64> {
    let mut rng = seed::rng(s);
    (0..n)
        .map(|_| scale * (-(1.0 - rng.random::<f64>()).ln()).powf(1.0 / shape))
        .collect()
}

fn estimators(c: &mut Check, _: &mut Studies) {
    let mut rng = seed::rng(1);
    let mut exact = true;
    for _ in 0..50 {
        let n = rng.random_range(1..300);
        let times: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1..40u32))).collect();
        let km = kaplan_meier(&SurvivalDataset::new(times.clone(), vec![true; n]).unwrap()).unwrap();
        for probe in 0..45 {
            let t = f64::from(probe) + 0.5 * f64::from(probe % 2);
            let ecdf = times.iter().filter(|x| **x <= t).count() as f64 / n as f64;
            exact &= km.cdf_at(t) == ecdf;
        }
    }
    c.expect(
        exact,
        "uncensored Kaplan-Meier equals the empirical CDF bit for bit (50 samples)",
    );

    let data = SurvivalDataset::new(vec![1.0, 2.0, 3.0], vec![true, false, true]).unwrap();
    let km = kaplan_meier(&data).unwrap();
    let expected = [(0.5, 1.0), (1.0, 2.0 / 3.0), (2.5, 2.0 / 3.0), (3.0, 0.0)];
    let err = expected
        .iter()
        .map(|(t, s)| (km.survival_at(*t) - s).abs())
        .fold(0.0, f64::max);
    c.expect(err <= 1e-12, format!("censored 3-point case, max error {err:.1e}"));

    let draws = weibull_draws(2000, 1000.0, 1.5, 0);
    let fit = fit_weibull(&kaplan_meier(&SurvivalDataset::new(draws, vec![true; 2000]).unwrap()).unwrap()).unwrap();
    let (es, ek) = (fit.scale / 1000.0 - 1.0, fit.shape / 1.5 - 1.0);
    c.expect(
        es.abs() < 0.03 && ek.abs() < 0.05,
        format!(
            "Weibull recovery lambda {:.1} ({:+.2}%), k {:.4} ({:+.2}%)",
            fit.scale,
            100.0 * es,
            fit.shape,
            100.0 * ek
        ),
    );

    let e1 = (mean_fpt(1234.5, 1.0) - 1234.5).abs();
    let e2 = (mean_fpt(1.0, 2.0) - PI.sqrt() / 2.0).abs();
    c.expect(
        e1 <= 1e-10 && e2 <= 1e-10,
        format!("analytic means, errors {e1:.1e} and {e2:.1e}"),
    );
}

// 2. distributions

fn distributions(c: &mut Check, _: &mut Studies) {
    let n = 100_000;
    let mut rng = seed::rng(100);
    let mut xs: Vec<f64> = (0..n).map(|_| sample_wrapped_cauchy(0.0, &mut rng).unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x + PI) / (2.0 * PI);
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    let critical = 1.6276 / (n as f64).sqrt();
    c.expect(d < critical, format!("rho=0 KS uniformity D={d:.5} < {critical:.5}"));

    let mut rng = seed::rng(101);
    let zero = (0..n).all(|_| sample_wrapped_cauchy(1.0, &mut rng).unwrap() == 0.0);
    c.expect(zero, "rho=1 turns are exactly 0");

    let mut rng = seed::rng(102);
    let (mut cs, mut sn) = (0.0, 0.0);
    for _ in 0..n {
        let t = sample_wrapped_cauchy(0.75, &mut rng).unwrap();
        cs += t.cos();
        sn += t.sin();
    }
    let r = (cs * cs + sn * sn).sqrt() / n as f64;
    c.expect(
        (r - 0.75).abs() <= 0.01,
        format!("rho=0.75 mean resultant length {r:.4}"),
    );

    for (alpha, s) in [(1.2, 7u64), (1.6, 8)] {
        let mut rng = seed::rng(s);
        let mut xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_stable(alpha, &mut rng).unwrap().abs())
            .collect();
        xs.sort_by(|a, b| b.total_cmp(a));
        let k = 1000;
        let threshold = xs[k].ln();
        let hill = k as f64 / xs[..k].iter().map(|x| x.ln() - threshold).sum::<f64>();
        c.expect(
            (hill - alpha).abs() <= 0.15,
            format!("alpha={alpha} Hill tail exponent {hill:.3}"),
        );
    }
}

// 3. network engine

/// Next state from the digit encoding: inputs in ascending source order,
/// folded left through the node's gate row.
fn oracle_step(links: &[u8], gates: &[u8], n: usize, state: u64) -> u64 {
    let mut next = 0u64;
    for i in 0..n {
        let inputs: Vec<bool> = (0..n)
            .filter(|&j| links[i * n + j] != 0)
            .map(|j| ((state >> j) & 1 == 1) ^ (links[i * n + j] == 2))
            .collect();
        let value = match inputs.split_first() {
            None => (state >> i) & 1 == 1,
            Some((first, rest)) => rest
                .iter()
                .enumerate()
                .fold(*first, |acc, (m, &b)| match gates[i * (n - 1) + m] {
                    0 => acc & b,
                    1 => acc | b,
                    _ => acc ^ b,
                }),
        };
        next |= u64::from(value) << i;
    }
    next
}

fn network_engine(c: &mut Check, _: &mut Studies) {
    let mut rng = seed::rng(2024);
    let mut mismatches = 0usize;
    let mut states = 0usize;
    for sample in 0..200 {
        let n = [2, 4, 6, 8][sample % 4];
        let links: Vec<u8> = (0..n * n).map(|_| rng.random_range(0..3u8)).collect();
        let gates: Vec<u8> = (0..n * (n - 1)).map(|_| rng.random_range(0..3u8)).collect();
        let top = Topology::from_digits(n, &links, &gates).unwrap();
        for bits in 0..(1u64 << n) {
            states += 1;
            if top.next_state(bits) != oracle_step(&links, &gates, n, bits) {
                mismatches += 1;
            }
        }
    }
    c.expect(
        mismatches == 0,
        format!("truth-table oracle on 200 topologies, {mismatches} mismatches over {states} states"),
    );

    let mut inert_ok = true;
    for s in 0..200u64 {
        let mut rng = seed::rng(s);
        let n = 2 * rng.random_range(2..5usize);
        let top = Topology::random(n, &mut rng).unwrap();
        let mut gates = top.gates().to_vec();
        for i in 0..n {
            for col in top.in_degree(i).saturating_sub(1)..n - 1 {
                gates[i * (n - 1) + col] = Gate::from_digit(rng.random_range(0..3)).unwrap();
            }
        }
        let other = top.with_gates(gates).unwrap();
        inert_ok &= (0..(1u64 << n)).all(|b| top.next_state(b) == other.next_state(b));
    }
    c.expect(
        inert_ok,
        "rewriting inert gates leaves every transition unchanged (200 networks)",
    );

    let mut endpoints = true;
    for n in (2..=30).step_by(2) {
        let zero = decode_bits(0, n);
        let ones = decode_bits(state_mask(n), n);
        endpoints &= zero.straight_ticks == 0 && zero.turn_angle == -PI;
        endpoints &= ones.straight_ticks == (1u64 << (n / 2)) - 1 && ones.turn_angle == PI;
    }
    c.expect(
        endpoints,
        "decode endpoints (0, -pi) and (2^(N/2)-1, +pi) for N = 2..30",
    );

    let cm = MotionConfig::default().straight_distance(1 << 15) * 100.0;
    c.expect(
        max_straight_ticks(30) + 1 == 1 << 15 && cm == 1024.0,
        format!("2^15 ticks cover {cm} cm"),
    );
}

// 4. sensitivity

fn identity(n: usize) -> Topology {
    let mut links = vec![0u8; n * n];
    for i in 0..n {
        links[i * n + i] = 1;
    }
    Topology::from_digits(n, &links, &vec![0; n * (n - 1)]).unwrap()
}

fn sensitivity(c: &mut Check, _: &mut Studies) {
    let mut rng = seed::rng(8);
    let mut violations = 0usize;
    for k in 0..10_000u64 {
        let n = 2 * rng.random_range(2..16usize);
        let top = Topology::random(n, &mut rng).unwrap();
        let r = measure_delta(&top, 5, 200, k);
        let (lo, hi) = (-1.0 / n as f64, 1.0 - 1.0 / n as f64);
        violations += r
            .delta_runs
            .iter()
            .filter(|d| **d < lo - 1e-12 || **d > hi + 1e-12)
            .count();
    }
    c.expect(
        violations == 0,
        format!("per-run bounds [-1/N, 1-1/N] on 10^4 networks, {violations} violations"),
    );

    let frozen = Topology::from_digits(8, &[0; 64], &[2; 56]).unwrap();
    let zero = [identity(10), frozen]
        .iter()
        .all(|t| measure_delta(t, 100, 1000, 4).delta_runs.iter().all(|d| *d == 0.0));
    c.expect(zero, "identity and frozen networks give delta = 0 exactly");

    let mut rng = seed::rng(5);
    for n in [4usize, 6, 8] {
        let top = Topology::random(n, &mut rng).unwrap();
        let horizon = 100;
        let total: f64 = (0..(1u64 << n))
            .flat_map(|b| (0..n).map(move |f| (b, f)))
            .map(|(b, f)| perturbation_delta(&top, b, f, horizon))
            .sum();
        let exact = total / ((1u64 << n) * n as u64) as f64;
        let sampled = measure_delta(&top, 4000, horizon, 6 + n as u64);
        let half = (2.576 * sampled.delta_std() / (sampled.runs as f64).sqrt()).max(1e-12);
        c.expect(
            (sampled.delta_mean - exact).abs() <= half,
            format!(
                "N={n} exhaustive {exact:.5} vs sampled {:.5} +- {half:.5}",
                sampled.delta_mean
            ),
        );
    }
}

// 5-7. desk-scale studies

fn run_study(
    name: &str,
    config: &ExperimentConfig,
    body: impl FnOnce(&Session) -> edgewalk::Result<Report>,
) -> (PathBuf, Report) {
    let dir = scratch(name);
    let farm = farm();
    let mut session = Session::new(config, &dir, &farm);
    session.progress = true;
    let started = Instant::now();
    let report = body(&session).unwrap();
    eprintln!("[{name}] finished in {:.0} s", started.elapsed().as_secs_f64());
    (dir, report)
}

fn cell(report: &Report, rho: f64, alpha: f64) -> &GroupSummary {
    report
        .groups
        .iter()
        .find(|g| g.rho == Some(rho) && g.alpha == Some(alpha))
        .unwrap()
}

fn lmcrw_trend(c: &mut Check, studies: &mut Studies) {
    let config = preset("desk-lmcrw-grid").unwrap();
    let (dir, report) = run_study("desk-lmcrw-grid", &config, |s| s.sweep_lmcrw());
    let cells = config.lmcrw.rho.len() * config.lmcrw.alpha.len();
    c.expect(report.groups.len() == 35, format!("{cells} cells evaluated"));

    let best = report.best_cell.clone().unwrap();
    let position = |grid: &[f64], v: f64| grid.iter().position(|x| *x == v).unwrap() as i64;
    let (bi, bj) = (
        position(&config.lmcrw.rho, best.rho),
        position(&config.lmcrw.alpha, best.alpha),
    );
    let (ti, tj) = (position(&config.lmcrw.rho, 0.75), position(&config.lmcrw.alpha, 1.8));
    c.expect(
        (bi - ti).abs() <= 1 && (bj - tj).abs() <= 1,
        format!(
            "minimum-mean cell (rho={}, alpha={}) at {:.0} s",
            best.rho, best.alpha, best.mean_tf
        ),
    );

    let target = cell(&report, 0.75, 1.8);
    let brownian = cell(&report, 0.0, 2.0);
    let test = mann_whitney(&target.tfs(), &brownian.tfs()).unwrap();
    let (mt, mb) = (
        target.mean_tf.unwrap_or(f64::INFINITY),
        brownian.mean_tf.unwrap_or(f64::INFINITY),
    );
    c.expect(
        mt < mb && test.p_value < 0.05,
        format!(
            "t_f(0.75, 1.8) = {mt:.0} s < t_f(0, 2.0) = {mb:.0} s, Mann-Whitney p = {:.4}",
            test.p_value
        ),
    );
    c.expect(
        (500.0..=2000.0).contains(&best.mean_tf),
        format!("best-cell t_f {:.0} s within 0.5-2 x 10^3 s", best.mean_tf),
    );
    studies.grid = Some((dir, report));
}

fn table_row<'a>(report: &'a Report, group: &str) -> &'a edgewalk::report::TableRow {
    report.table.iter().find(|r| r.group == group).unwrap()
}

fn rbn_trend(c: &mut Check, studies: &mut Studies) {
    let config = preset("desk-rbn-cohort").unwrap();
    let (dir, report) = run_study("desk-rbn-cohort", &config, |s| s.rbn_study());
    for row in &report.table {
        eprintln!(
            "  {}: mean t_f {:?} s, sd {:?}, {} sentinel evaluations, worse/similar/better {:.0}/{:.0}/{:.0}%",
            row.group, row.mean_tf, row.sd_tf, row.sentinels, row.worse_pct, row.similar_pct, row.better_pct
        );
    }
    let (n20, n30) = (table_row(&report, "RBN N20"), table_row(&report, "RBN N30"));
    let (m20, m30) = (
        n20.mean_tf.unwrap_or(f64::INFINITY),
        n30.mean_tf.unwrap_or(f64::INFINITY),
    );
    c.expect(
        m20 < m30,
        format!(
            "cohort mean t_f N=20 {m20:.4e} s ({} sentinels) < N=30 {m30:.4e} s ({} sentinels)",
            n20.sentinels, n30.sentinels
        ),
    );
    match report.correlations.iter().find(|r| r.size == 18 && r.x == "delta") {
        Some(corr) => c.expect(
            corr.r < 0.0,
            format!(
                "N=18 Pearson r(delta, t_f) = {:.3} over {} networks (p = {:.3})",
                corr.r, corr.n, corr.p_value
            ),
        ),
        None => c.expect(false, "N=18 delta correlation unavailable"),
    }
    studies.cohort = Some((dir, report));
}

/// Orders post-evaluated groups by sentinel count, then by mean t_f.
fn post_eval_rank(g: &GroupSummary) -> (usize, f64) {
    (g.sentinels, g.mean_tf.unwrap_or(f64::INFINITY))
}

fn describe(g: &GroupSummary) -> String {
    format!(
        "{:.1} s ({} sentinels)",
        g.mean_tf.unwrap_or(f64::INFINITY),
        g.sentinels
    )
}

fn ga_progress(c: &mut Check, studies: &mut Studies) {
    let config = preset("desk-evolve-N20").unwrap();
    let (dir, report) = run_study("desk-evolve-N20", &config, |s| {
        Ok(s.evolve(EvolveOptions::default())?.unwrap())
    });
    for run in 0..config.evolve.runs {
        let rows: Vec<GenerationRow> = read_csv(&dir.join(format!("evolve/run_{run}/generations.csv"))).unwrap();
        let monotone = rows.windows(2).all(|w| w[1].hall_of_fame_tf <= w[0].hall_of_fame_tf);
        let (first, last) = (rows.first().unwrap(), rows.last().unwrap());
        c.expect(
            monotone && rows.len() == config.evolve.ga.generations + 1,
            format!(
                "N=20 run {run}: hall-of-fame fitness non-increasing over {} generations ({:.1} -> {:.1} s)",
                rows.len(),
                first.hall_of_fame_tf,
                last.hall_of_fame_tf
            ),
        );
        let evolved = find_role(&report, run, Role::Evolved);
        let initial = find_role(&report, run, Role::InitialBest);
        c.expect(
            post_eval_rank(evolved) <= post_eval_rank(initial),
            format!(
                "N=20 run {run}: post-evaluated hall of fame {} <= generation-0 best {}",
                describe(evolved),
                describe(initial)
            ),
        );
    }
    studies.evolve.push((dir, report));

    let config = preset("desk-evolve-N30").unwrap();
    let (dir, report) = run_study("desk-evolve-N30", &config, |s| {
        Ok(s.evolve(EvolveOptions::default())?.unwrap())
    });
    let cohort = cohort_means(studies, &preset("desk-rbn-cohort").unwrap());
    match cohort {
        Some((delta, d_bar)) => {
            for run in 0..config.evolve.runs {
                let evolved = find_role(&report, run, Role::Evolved);
                let (ed, eb) = (evolved.delta_mean.unwrap(), evolved.d_bar.unwrap_or(f64::INFINITY));
                c.expect(
                    ed < delta && eb < d_bar,
                    format!(
                        "N=30 run {run}: evolved delta {ed:.4} < cohort {delta:.4}, D-bar {eb:.3} < cohort {d_bar:.3}"
                    ),
                );
            }
        }
        None => c.expect(false, "N=30 random cohort unavailable"),
    }
    studies.evolve.push((dir, report));
}

fn find_role(report: &Report, run: usize, role: Role) -> &GroupSummary {
    let tag = if role == Role::Evolved { "evolved" } else { "initial" };
    report
        .groups
        .iter()
        .find(|g| g.role == role && g.id == format!("run_{run}_{tag}"))
        .unwrap()
}

/// Mean delta and mean D-bar of the N=30 random cohort, running the cohort
/// study when criterion 6 has not.
fn cohort_means(studies: &mut Studies, config: &ExperimentConfig) -> Option<(f64, f64)> {
    if studies.cohort.is_none() {
        let mut c = config.clone();
        c.rbn.sizes = vec![30];
        studies.cohort = Some(run_study("desk-rbn-cohort-N30", &c, |s| s.rbn_study()));
    }
    let (_, report) = studies.cohort.as_ref()?;
    let members: Vec<&GroupSummary> = report
        .groups
        .iter()
        .filter(|g| g.role == Role::Network && g.size == Some(30))
        .collect();
    if members.is_empty() {
        return None;
    }
    let n = members.len() as f64;
    let delta = members.iter().filter_map(|g| g.delta_mean).sum::<f64>() / n;
    let d_bar = members.iter().filter_map(|g| g.d_bar).sum::<f64>() / n;
    eprintln!("  N=30 cohort: mean delta {delta:.4}, mean D-bar {d_bar:.3} over {n} networks");
    Some((delta, d_bar))
}

// 8. statistics

fn statistics(c: &mut Check, _: &mut Studies) {
    let t100 = bonferroni_threshold(100);
    let t6 = bonferroni_threshold(6);
    c.expect(
        t100 == 0.0005,
        format!("Bonferroni threshold for 100 comparisons = {t100}"),
    );
    c.expect(
        format!("{t6:.4}") == "0.0083",
        format!("Bonferroni threshold for 6 comparisons = {t6:.6}"),
    );
    let power = power_report(20, 1.2, 0.05).unwrap();
    c.expect(
        (power - 0.95).abs() <= 0.03,
        format!("power at n=20, effect 1.2 sd, alpha 0.05 = {power:.4}"),
    );
}

// 9. reproducibility

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn reduced() -> ExperimentConfig {
    let mut c = preset("desk-rbn-cohort").unwrap();
    c.experiment.name = "reduced".into();
    c.experiment.seed = 2025;
    c.arena.trial_duration = 600.0;
    c.evaluation.evaluations = 3;
    c.evaluation.trials = 4;
    c.lmcrw.rho = vec![0.0, 0.75];
    c.lmcrw.alpha = vec![1.8, 2.0];
    c.rbn.sizes = vec![8, 10];
    c.rbn.networks = 3;
    c.chaos.runs = 30;
    c.chaos.horizon = 500;
    c.evolve.runs = 1;
    c.evolve.checkpoint_every = 3;
    c.evolve.ga.network_size = 10;
    c.evolve.ga.population = 6;
    c.evolve.ga.generations = 8;
    c.evolve.ga.eval_trials = 2;
    c.evolve.ga.post_eval_trials = 4;
    c
}

fn run_verb(config: &ExperimentConfig, dir: &Path, workers: usize, verb: &str, network: &Path) {
    let farm = Farm::new(workers).unwrap();
    let session = Session::new(config, dir, &farm);
    match verb {
        "sweep-lmcrw" => drop(session.sweep_lmcrw().unwrap()),
        "rbn-study" => drop(session.rbn_study().unwrap()),
        "evolve" => drop(session.evolve(EvolveOptions::default()).unwrap()),
        "post-eval" => drop(session.post_eval(network).unwrap()),
        "delta" => drop(session.delta(network).unwrap()),
        "replay" => drop(session.replay(Some(network), 1, 2).unwrap()),
        "analyze" => drop(pipeline::analyze(&dir.with_file_name("rbn-study_a"), dir).unwrap()),
        _ => unreachable!(),
    }
}

fn reproducibility(c: &mut Check, studies: &mut Studies) {
    let config = reduced();
    let root = scratch("reproducibility");
    let network = root.join("rbn-study_a/networks/N10_001.bn");
    for verb in [
        "rbn-study",
        "sweep-lmcrw",
        "evolve",
        "post-eval",
        "delta",
        "replay",
        "analyze",
    ] {
        let (a, b) = (root.join(format!("{verb}_a")), root.join(format!("{verb}_b")));
        run_verb(&config, &a, 1, verb, &network);
        run_verb(&config, &b, 0, verb, &network);
        let (ta, tb) = (tree(&a), tree(&b));
        c.expect(
            !ta.is_empty() && ta == tb,
            format!("{verb}: {} output files byte-identical across reruns", ta.len()),
        );
    }

    let farm = farm();
    let stopped = root.join("evolve_resumed");
    let session = Session::new(&config, &stopped, &farm);
    let mut resumed = true;
    for stop in [2, 5] {
        resumed &= session
            .evolve(EvolveOptions {
                resume: true,
                stop_after: Some(stop),
            })
            .unwrap()
            .is_none();
    }
    session
        .evolve(EvolveOptions {
            resume: true,
            stop_after: None,
        })
        .unwrap();
    c.expect(
        resumed && tree(&stopped) == tree(&root.join("evolve_a")),
        "GA stopped at generations 2 and 5 and resumed matches the uninterrupted run",
    );

    let provenance = Provenance {
        config_hash: config.hash(),
        base_seed: config.experiment.seed,
    };
    let stamped = tree(&root.join("rbn-study_a"))
        .values()
        .all(|bytes| String::from_utf8_lossy(bytes).contains(&provenance.config_hash));
    c.expect(stamped, "every output file carries the config hash");

    let desk: Vec<&(PathBuf, Report)> = studies
        .grid
        .iter()
        .chain(studies.cohort.iter())
        .chain(studies.evolve.iter())
        .collect();
    for (dir, report) in desk {
        let out = dir.join("analysis");
        let rebuilt = pipeline::analyze(dir, &out).unwrap();
        let same = &rebuilt == report
            && ["report.json", "groups.csv", "evaluations.csv", "table.csv", "heatmap.csv", "correlations.csv"]
                .iter()
                .all(|f| std::fs::read(out.join(f)).ok() == std::fs::read(dir.join(f)).ok());
        c.expect(
            same,
            format!(
                "{}: analysis of stored records equals the inline report",
                dir.file_name().unwrap().to_string_lossy()
            ),
        );
    }
}

type Criterion = fn(&mut Check, &mut Studies);

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("estimator oracles", estimators),
        ("distribution correctness", distributions),
        ("network engine", network_engine),
        ("sensitivity metric", sensitivity),
        ("desk-scale walk trend", lmcrw_trend),
        ("desk-scale random network trend", rbn_trend),
        ("desk-scale GA progress", ga_progress),
        ("statistics", statistics),
        ("reproducibility", reproducibility),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut studies = Studies::default();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let started = Instant::now();
        let mut check = Check::new();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut check, &mut studies)));
        if let Err(panic) = outcome {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            check.expect(false, format!("panicked: {msg}"));
        }
        for (ok, line) in &check.lines {
            println!("    [{}] {line}", if *ok { "ok" } else { "x" });
        }
        let passed = check.passed();
        failed += usize::from(!passed);
        println!(
            "criterion {number} ({name}): {} [{:.1} s]",
            if passed { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
