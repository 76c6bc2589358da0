//! Experiment pipelines behind the command-line verbs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use edgewalk_core::chaos::{activation_trace, classify_delta, measure_delta};
use edgewalk_core::controller::LmcrwParams;
use edgewalk_core::evolution::{evaluate, EvalContext, Evolution, GenerationStats, Genome, HallOfFame};
use edgewalk_core::seed;
use edgewalk_core::sim::{
    run_trial, straight_motion_stats, ControllerSpec, InitialStates, StraightStats, TrialOptions, TrialRecord,
    TrialSeeds,
};
use edgewalk_core::survival::{estimate_mean_fpt, FptEstimate, SurvivalDataset};
use edgewalk_core::{BooleanNetwork, Topology};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::farm::Farm;
use crate::formats::{self, FitRecord, Provenance, RecordRow};
use crate::report::{build_report, write_report, GroupEntry, Manifest, Report, Role, StudyKind, MANIFEST_FILE};

/// Environment seed of evaluation `e`; every controller evaluated in a study
/// faces the same targets and placements in evaluation `e`.
pub fn evaluation_seed(base: u64, e: usize) -> u64 {
    seed::derive(seed::derive_named(base, "evaluations"), e as u64)
}

pub fn network_seed(base: u64, size: usize, index: usize) -> u64 {
    seed::derive(seed::derive(seed::derive_named(base, "rbn"), size as u64), index as u64)
}

pub fn evolution_seed(base: u64, run: usize) -> u64 {
    seed::derive(seed::derive_named(base, "evolve"), run as u64)
}

pub fn lmcrw_spec(config: &ExperimentConfig, params: LmcrwParams) -> ControllerSpec {
    ControllerSpec::Lmcrw {
        params,
        scale: config.lmcrw.levy,
    }
}

pub fn network_spec(topology: Topology) -> ControllerSpec {
    ControllerSpec::Network {
        topology: Arc::new(topology),
        initial: InitialStates::PerRobotRandom,
    }
}

/// Trials of one evaluation and their pooled estimate.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub records: Vec<TrialRecord>,
    pub estimate: FptEstimate,
    pub straight: StraightStats,
}

pub fn run_evaluation(ctx: &EvalContext, spec: &ControllerSpec) -> Result<Evaluation> {
    let options = TrialOptions {
        stop_when_all_found: true,
        ..TrialOptions::default()
    };
    let mut records = Vec::with_capacity(ctx.trial_seeds.len());
    let mut straight = StraightStats::default();
    for &s in &ctx.trial_seeds {
        let out = run_trial(&ctx.arena, spec, TrialSeeds::new(s), options)?;
        straight.merge(&out.straight);
        records.push(out.record);
    }
    let estimate = estimate_mean_fpt(&SurvivalDataset::from_records(&records));
    Ok(Evaluation {
        records,
        estimate,
        straight,
    })
}

fn d_bar(evals: &[Evaluation], ticks_per_second: u32) -> Option<f64> {
    let logs: Vec<StraightStats> = evals.iter().map(|e| e.straight).collect();
    straight_motion_stats(&logs, ticks_per_second).ok()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveOptions {
    /// Continue from the checkpoint of each run when one exists.
    pub resume: bool,
    /// Checkpoint and stop once this many generations have been evaluated.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub provenance: Provenance,
    pub network_hash: String,
    pub size: usize,
    pub delta_mean: f64,
    pub delta_runs: Vec<f64>,
    pub regime: String,
    pub cycle_length: Option<usize>,
    pub runs: usize,
    pub horizon: u64,
}

/// One generation of an evolutionary run as written to its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: usize,
    pub best_tf: f64,
    pub mean_tf: f64,
    pub delta_of_best: f64,
    pub hall_of_fame_tf: f64,
    pub sentinels: usize,
}

/// `None` stands for an infinite value.
fn enc(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn dec(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StatsEntry {
    generation: usize,
    best_fitness: Option<f64>,
    mean_fitness: Option<f64>,
    best_index: usize,
    sentinels: usize,
    hall_of_fame_fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HallEntry {
    genes: Vec<f64>,
    fitness: Option<f64>,
    generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RowEntry {
    generation: usize,
    best_tf: Option<f64>,
    mean_tf: Option<f64>,
    delta_of_best: f64,
    hall_of_fame_tf: Option<f64>,
    sentinels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    provenance: Provenance,
    run: usize,
    generation: usize,
    population: Vec<Vec<f64>>,
    hall_of_fame: Option<HallEntry>,
    log: Vec<StatsEntry>,
    rows: Vec<RowEntry>,
    initial_best: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HallOfFameSidecar {
    provenance: Provenance,
    run: usize,
    size: usize,
    network_hash: String,
    fitness: Option<f64>,
    generation: usize,
    post_eval_mean_tf: Option<f64>,
    initial_best_post_eval_mean_tf: Option<f64>,
    delta_mean: Option<f64>,
    regime: Option<String>,
    d_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReplayInfo {
    provenance: Provenance,
    controller: String,
    evaluation: usize,
    trial: usize,
    trial_seed: u64,
    ticks_run: u64,
    found: usize,
    censored: usize,
}

#[derive(Serialize)]
struct CommandRow {
    robot: usize,
    step: usize,
    straight_ticks: u64,
    turn_angle: f64,
}

/// Evolution state, log rows and first-generation best of one run.
type RunState = (Evolution, Vec<GenerationRow>, Option<Genome>);

/// One experiment: resolved configuration, output directory and worker pool.
pub struct Session<'a> {
    pub config: &'a ExperimentConfig,
    pub provenance: Provenance,
    pub out: PathBuf,
    pub farm: &'a Farm,
    pub progress: bool,
}

impl<'a> Session<'a> {
    pub fn new(config: &'a ExperimentConfig, out: impl Into<PathBuf>, farm: &'a Farm) -> Self {
        Self {
            provenance: Provenance {
                config_hash: config.hash(),
                base_seed: config.experiment.seed,
            },
            config,
            out: out.into(),
            farm,
            progress: false,
        }
    }

    fn note(&self, msg: impl AsRef<str>) {
        if self.progress {
            eprintln!("[{}] {}", self.config.experiment.name, msg.as_ref());
        }
    }

    fn base(&self) -> u64 {
        self.config.experiment.seed
    }

    fn context(&self, e: usize, trials: usize) -> EvalContext {
        EvalContext::new(self.config.arena.clone(), evaluation_seed(self.base(), e), trials)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        formats::write_file(&self.out, name, text)
    }

    fn write_network(&self, name: &str, text: &str) -> Result<()> {
        self.write(name, &format!("{}{text}", self.provenance.comment_line()))
    }

    fn echo_config(&self) -> Result<()> {
        let mut echoed = self.config.clone();
        echoed.output = Default::default();
        let text = format!("{}{}", self.provenance.comment_line(), echoed.to_toml());
        self.write("config.toml", &text)
    }

    /// Evaluates every spec `evaluations` times, in parallel over (spec, evaluation).
    fn evaluate_groups(&self, specs: &[ControllerSpec], trials: usize) -> Result<Vec<Vec<Evaluation>>> {
        let evaluations = self.config.evaluation.evaluations;
        let tasks: Vec<(usize, usize)> = (0..specs.len())
            .flat_map(|g| (0..evaluations).map(move |e| (g, e)))
            .collect();
        let done = std::sync::atomic::AtomicUsize::new(0);
        let results = self.farm.try_map(&tasks, |&(g, e)| {
            let r = run_evaluation(&self.context(e, trials), &specs[g]);
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if k % evaluations.max(1) == 0 {
                self.note(format!("{k}/{} evaluations", tasks.len()));
            }
            r
        })?;
        let mut grouped: Vec<Vec<Evaluation>> = (0..specs.len()).map(|_| Vec::new()).collect();
        for ((g, _), r) in tasks.iter().zip(results) {
            grouped[*g].push(r);
        }
        Ok(grouped)
    }

    /// Writes one record file per evaluation and returns the fits.
    fn store_group(&self, entry: &mut GroupEntry, evals: &[Evaluation]) -> Result<Vec<FitRecord>> {
        entry.records.clear();
        for (e, ev) in evals.iter().enumerate() {
            let name = format!("records/{}/eval_{e:02}.csv", entry.id);
            let rows = formats::record_rows(&ev.records);
            self.write(&name, &formats::csv_text(&self.provenance, &rows)?)?;
            entry.records.push(name);
        }
        Ok(evals.iter().map(|e| FitRecord::from_estimate(&e.estimate)).collect())
    }

    fn finish(&self, manifest: Manifest, fits: Vec<Vec<FitRecord>>) -> Result<Report> {
        self.write(MANIFEST_FILE, &formats::json_text(&manifest)?)?;
        let report = build_report(&manifest, fits)?;
        write_report(&report, &self.out)?;
        Ok(report)
    }

    fn manifest(&self, kind: StudyKind, n_comparisons: usize) -> Manifest {
        Manifest {
            kind,
            provenance: self.provenance.clone(),
            n_comparisons,
            regime_tolerance: self.config.chaos.tolerance,
            trace_steps: self.config.chaos.trace_steps,
            baseline: None,
            groups: Vec::new(),
        }
    }

    fn baseline(&self, trials: usize) -> Result<(GroupEntry, Vec<FitRecord>)> {
        self.note("baseline walk");
        let spec = lmcrw_spec(self.config, self.config.baseline_params());
        let evals = self.evaluate_groups(&[spec], trials)?.remove(0);
        let mut entry = GroupEntry::new("baseline", Role::Baseline);
        entry.rho = Some(self.config.lmcrw.baseline_rho);
        entry.alpha = Some(self.config.lmcrw.baseline_alpha);
        entry.d_bar = d_bar(&evals, self.config.arena.ticks_per_second);
        let fits = self.store_group(&mut entry, &evals)?;
        Ok((entry, fits))
    }

    fn network_delta(&self, topology: &Topology, stream: u64) -> f64 {
        measure_delta(topology, self.config.chaos.runs, self.config.chaos.horizon, stream).delta_mean
    }

    /// Grid of walk parameters, one group per cell.
    pub fn sweep_lmcrw(&self) -> Result<Report> {
        self.echo_config()?;
        let c = self.config;
        let mut entries = Vec::new();
        let mut specs = Vec::new();
        for &rho in &c.lmcrw.rho {
            for &alpha in &c.lmcrw.alpha {
                let params = LmcrwParams::new(rho, alpha).map_err(|e| LabError::Config(e.to_string()))?;
                let mut entry = GroupEntry::new(format!("rho{rho}_alpha{alpha}"), Role::Cell);
                entry.rho = Some(rho);
                entry.alpha = Some(alpha);
                entries.push(entry);
                specs.push(lmcrw_spec(c, params));
            }
        }
        self.note(format!("{} cells", specs.len()));
        let evals = self.evaluate_groups(&specs, c.evaluation.trials)?;
        let mut manifest = self.manifest(StudyKind::LmcrwGrid, 1);
        let mut fits = Vec::new();
        for (mut entry, ev) in entries.into_iter().zip(&evals) {
            entry.d_bar = d_bar(ev, c.arena.ticks_per_second);
            fits.push(self.store_group(&mut entry, ev)?);
            manifest.groups.push(entry);
        }
        self.finish(manifest, fits)
    }

    /// Random network cohorts per size, compared with the baseline walk.
    pub fn rbn_study(&self) -> Result<Report> {
        self.echo_config()?;
        let c = self.config;
        let (base_entry, base_fits) = self.baseline(c.evaluation.trials)?;
        let mut entries = Vec::new();
        let mut networks = Vec::new();
        for &size in &c.rbn.sizes {
            for i in 0..c.rbn.networks {
                let s = network_seed(self.base(), size, i);
                let net = BooleanNetwork::generate_random(size, s)?;
                let text = formats::write_bn(net.topology(), net.state_bits());
                let id = format!("N{size}_{i:03}");
                let file = format!("networks/{id}.bn");
                self.write_network(&file, &text)?;
                let mut entry = GroupEntry::new(id, Role::Network);
                entry.size = Some(size);
                entry.network = Some(file);
                entry.network_hash = Some(formats::network_hash(&text));
                entries.push(entry);
                networks.push((net, s));
            }
        }
        self.note(format!("{} networks", networks.len()));
        let specs: Vec<ControllerSpec> = networks
            .iter()
            .map(|(n, _)| network_spec(n.topology().as_ref().clone()))
            .collect();
        let evals = self.evaluate_groups(&specs, c.evaluation.trials)?;
        self.note("sensitivity");
        let deltas = self.farm.map(&networks, |(n, s)| {
            self.network_delta(n.topology(), seed::derive_named(*s, "delta"))
        });

        let mut manifest = self.manifest(StudyKind::RbnStudy, c.rbn.networks);
        manifest.baseline = Some(base_entry);
        let mut fits = vec![base_fits];
        for ((mut entry, ev), delta) in entries.into_iter().zip(&evals).zip(deltas) {
            entry.delta_mean = Some(delta);
            entry.d_bar = d_bar(ev, c.arena.ticks_per_second);
            fits.push(self.store_group(&mut entry, ev)?);
            manifest.groups.push(entry);
        }
        self.finish(manifest, fits)
    }

    /// Evolutionary runs, each followed by post-evaluation of its hall of fame
    /// and of the best individual of its first generation. Returns `None`
    /// when stopped early by `stop_after`.
    pub fn evolve(&self, options: EvolveOptions) -> Result<Option<Report>> {
        self.echo_config()?;
        let c = self.config;
        let ga = &c.evolve.ga;
        let mut finals = Vec::new();
        for run in 0..c.evolve.runs {
            match self.evolve_run(run, options)? {
                Some(f) => finals.push(f),
                None => return Ok(None),
            }
        }

        let (base_entry, base_fits) = self.baseline(ga.post_eval_trials)?;
        let mut entries = Vec::new();
        let mut genomes = Vec::new();
        for (run, (hof, initial)) in finals.iter().enumerate() {
            for (role, tag, genome) in [(Role::Evolved, "evolved", hof), (Role::InitialBest, "initial", initial)] {
                let text = formats::write_bn(&genome.decode(), 0);
                let id = format!("run_{run}_{tag}");
                let file = format!("networks/{id}.bn");
                self.write_network(&file, &text)?;
                let mut entry = GroupEntry::new(id, role);
                entry.size = Some(ga.network_size);
                entry.network = Some(file);
                entry.network_hash = Some(formats::network_hash(&text));
                entries.push(entry);
                genomes.push((
                    genome.decode(),
                    seed::derive_named(evolution_seed(self.base(), run), tag),
                ));
            }
        }
        self.note("post-evaluation");
        let specs: Vec<ControllerSpec> = genomes.iter().map(|(t, _)| network_spec(t.clone())).collect();
        let evals = self.evaluate_groups(&specs, ga.post_eval_trials)?;
        let deltas = self.farm.map(&genomes, |(t, s)| {
            self.network_delta(t, seed::derive_named(*s, "delta"))
        });

        let mut manifest = self.manifest(StudyKind::Evolve, c.evolve.runs);
        manifest.baseline = Some(base_entry);
        let mut fits = vec![base_fits];
        for ((mut entry, ev), delta) in entries.into_iter().zip(&evals).zip(deltas) {
            entry.delta_mean = Some(delta);
            entry.d_bar = d_bar(ev, c.arena.ticks_per_second);
            fits.push(self.store_group(&mut entry, ev)?);
            manifest.groups.push(entry);
        }
        let report = self.finish(manifest, fits)?;

        for (run, (hof, _)) in finals.iter().enumerate() {
            let evolved = &report.groups[2 * run];
            let initial = &report.groups[2 * run + 1];
            let dir = format!("evolve/run_{run}");
            let text = formats::write_bn(&hof.decode(), 0);
            let checkpoint: Checkpoint = formats::read_json(&self.out.join(&dir).join("checkpoint.json"))?;
            let hall = checkpoint.hall_of_fame.as_ref();
            let sidecar = HallOfFameSidecar {
                provenance: self.provenance.clone(),
                run,
                size: ga.network_size,
                network_hash: formats::network_hash(&text),
                fitness: hall.and_then(|h| h.fitness),
                generation: hall.map_or(0, |h| h.generation),
                post_eval_mean_tf: evolved.mean_tf,
                initial_best_post_eval_mean_tf: initial.mean_tf,
                delta_mean: evolved.delta_mean,
                regime: evolved.regime.clone(),
                d_bar: evolved.d_bar,
            };
            self.write_network(&format!("{dir}/hall_of_fame.bn"), &text)?;
            self.write(&format!("{dir}/hall_of_fame.json"), &formats::json_text(&sidecar)?)?;
        }
        Ok(Some(report))
    }

    fn checkpoint_path(&self, run: usize) -> PathBuf {
        self.out.join(format!("evolve/run_{run}/checkpoint.json"))
    }

    fn write_checkpoint(
        &self,
        run: usize,
        evo: &Evolution,
        rows: &[GenerationRow],
        initial: Option<&Genome>,
    ) -> Result<()> {
        let cp = Checkpoint {
            provenance: self.provenance.clone(),
            run,
            generation: evo.generation(),
            population: evo.population().iter().map(|g| g.genes().to_vec()).collect(),
            hall_of_fame: evo.hall_of_fame().map(|h| HallEntry {
                genes: h.genome.genes().to_vec(),
                fitness: enc(h.fitness),
                generation: h.generation,
            }),
            log: evo
                .log()
                .iter()
                .map(|s| StatsEntry {
                    generation: s.generation,
                    best_fitness: enc(s.best_fitness),
                    mean_fitness: enc(s.mean_fitness),
                    best_index: s.best_index,
                    sentinels: s.sentinels,
                    hall_of_fame_fitness: enc(s.hall_of_fame_fitness),
                })
                .collect(),
            rows: rows
                .iter()
                .map(|r| RowEntry {
                    generation: r.generation,
                    best_tf: enc(r.best_tf),
                    mean_tf: enc(r.mean_tf),
                    delta_of_best: r.delta_of_best,
                    hall_of_fame_tf: enc(r.hall_of_fame_tf),
                    sentinels: r.sentinels,
                })
                .collect(),
            initial_best: initial.map(|g| g.genes().to_vec()),
        };
        let path = self.checkpoint_path(run);
        formats::write_file(path.parent().unwrap(), "checkpoint.json", &formats::json_text(&cp)?)
    }

    fn load_checkpoint(&self, run: usize) -> Result<Option<RunState>> {
        let path = self.checkpoint_path(run);
        if !path.exists() {
            return Ok(None);
        }
        let cp: Checkpoint = formats::read_json(&path)?;
        if cp.provenance != self.provenance || cp.run != run {
            return Err(LabError::Config(format!(
                "{}: checkpoint belongs to a different configuration or run",
                path.display()
            )));
        }
        let size = self.config.evolve.ga.network_size;
        let genome = |genes: Vec<f64>| Genome::new(size, genes).map_err(|e| LabError::data(&path, e.to_string()));
        let population = cp.population.into_iter().map(genome).collect::<Result<Vec<_>>>()?;
        let hall_of_fame = match cp.hall_of_fame {
            Some(h) => Some(HallOfFame {
                genome: genome(h.genes)?,
                fitness: dec(h.fitness),
                generation: h.generation,
            }),
            None => None,
        };
        let log = cp
            .log
            .into_iter()
            .map(|s| GenerationStats {
                generation: s.generation,
                best_fitness: dec(s.best_fitness),
                mean_fitness: dec(s.mean_fitness),
                best_index: s.best_index,
                sentinels: s.sentinels,
                hall_of_fame_fitness: dec(s.hall_of_fame_fitness),
            })
            .collect();
        let evo = Evolution::restore(
            self.config.evolve.ga.clone(),
            evolution_seed(self.base(), run),
            cp.generation,
            population,
            hall_of_fame,
            log,
        )
        .map_err(|e| LabError::data(&path, e.to_string()))?;
        let rows = cp
            .rows
            .into_iter()
            .map(|r| GenerationRow {
                generation: r.generation,
                best_tf: dec(r.best_tf),
                mean_tf: dec(r.mean_tf),
                delta_of_best: r.delta_of_best,
                hall_of_fame_tf: dec(r.hall_of_fame_tf),
                sentinels: r.sentinels,
            })
            .collect();
        let initial = cp.initial_best.map(genome).transpose()?;
        Ok(Some((evo, rows, initial)))
    }

    /// Returns the hall-of-fame genome and the first generation's best.
    fn evolve_run(&self, run: usize, options: EvolveOptions) -> Result<Option<(Genome, Genome)>> {
        let c = self.config;
        let ga = &c.evolve.ga;
        let run_seed = evolution_seed(self.base(), run);
        let env_seed = seed::derive_named(run_seed, "environments");
        let (mut evo, mut rows, mut initial) =
            match options.resume.then(|| self.load_checkpoint(run)).transpose()?.flatten() {
                Some(state) => state,
                None => (Evolution::new(ga.clone(), run_seed)?, Vec::new(), None),
            };
        // environments are fixed for the run unless reseeded per generation
        let fixed_ctx = EvalContext::new(c.arena.clone(), env_seed, ga.eval_trials);
        while !evo.is_finished() {
            if options.stop_after.is_some_and(|g| evo.generation() >= g) {
                self.write_checkpoint(run, &evo, &rows, initial.as_ref())?;
                return Ok(None);
            }
            let generation = evo.generation();
            let ctx = if ga.reseed_per_generation {
                EvalContext::new(
                    c.arena.clone(),
                    seed::derive(env_seed, generation as u64),
                    ga.eval_trials,
                )
            } else {
                fixed_ctx.clone()
            };
            let mut failure = None;
            let report = evo.step(|_, pop| {
                self.farm
                    .map(pop, |g| evaluate(g, &ctx).map(|r| r.0.mean_fpt))
                    .into_iter()
                    .map(|r| {
                        r.unwrap_or_else(|e| {
                            failure.get_or_insert(e);
                            f64::INFINITY
                        })
                    })
                    .collect()
            })?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            let best = &report.population[report.stats.best_index];
            if generation == 0 {
                initial = Some(best.clone());
            }
            let delta = self.network_delta(&best.decode(), seed::derive_named(run_seed, "delta"));
            rows.push(GenerationRow {
                generation,
                best_tf: report.stats.best_fitness,
                mean_tf: report.stats.mean_fitness,
                delta_of_best: delta,
                hall_of_fame_tf: report.stats.hall_of_fame_fitness,
                sentinels: report.stats.sentinels,
            });
            if generation % 10 == 0 {
                self.note(format!(
                    "run {run} generation {generation}: best {:.1} hall of fame {:.1}",
                    report.stats.best_fitness, report.stats.hall_of_fame_fitness
                ));
            }
            let every = c.evolve.checkpoint_every;
            if every > 0 && evo.generation() % every == 0 {
                self.write_checkpoint(run, &evo, &rows, initial.as_ref())?;
            }
        }
        self.write_checkpoint(run, &evo, &rows, initial.as_ref())?;
        self.write(
            &format!("evolve/run_{run}/generations.csv"),
            &formats::csv_text(&self.provenance, &rows)?,
        )?;
        let hof = evo
            .hall_of_fame()
            .expect("a finished run has a hall of fame")
            .genome
            .clone();
        let initial = initial.ok_or_else(|| LabError::Runtime("run finished without a first generation".into()))?;
        Ok(Some((hof, initial)))
    }

    /// Evaluations of one stored network against the baseline walk.
    pub fn post_eval(&self, network: &Path) -> Result<Report> {
        self.echo_config()?;
        let file = formats::read_bn(network)?;
        let text = formats::write_bn(&file.topology, file.state);
        self.write_network("networks/network.bn", &text)?;
        let (base_entry, base_fits) = self.baseline(self.config.evaluation.trials)?;
        let mut entry = GroupEntry::new("network", Role::Network);
        entry.size = Some(file.topology.size());
        entry.network = Some("networks/network.bn".into());
        entry.network_hash = Some(formats::network_hash(&text));
        entry.delta_mean = Some(self.network_delta(&file.topology, seed::derive_named(self.base(), "delta")));
        let evals = self
            .evaluate_groups(&[network_spec(file.topology.clone())], self.config.evaluation.trials)?
            .remove(0);
        entry.d_bar = d_bar(&evals, self.config.arena.ticks_per_second);
        let fits = self.store_group(&mut entry, &evals)?;
        let mut manifest = self.manifest(StudyKind::PostEval, 1);
        manifest.baseline = Some(base_entry);
        manifest.groups.push(entry);
        self.finish(manifest, vec![base_fits, fits])
    }

    /// Sensitivity and activation raster of one stored network.
    pub fn delta(&self, network: &Path) -> Result<DeltaReport> {
        self.echo_config()?;
        let file = formats::read_bn(network)?;
        let text = formats::write_bn(&file.topology, file.state);
        let ch = &self.config.chaos;
        let result = measure_delta(
            &file.topology,
            ch.runs,
            ch.horizon,
            seed::derive_named(self.base(), "delta"),
        );
        let trace = activation_trace(&file.topology, file.state, ch.trace_steps);
        let report = DeltaReport {
            provenance: self.provenance.clone(),
            network_hash: formats::network_hash(&text),
            size: file.topology.size(),
            delta_mean: result.delta_mean,
            regime: classify_delta(result.delta_mean, ch.tolerance).label().to_string(),
            cycle_length: trace.cycle.map(|c| c.length),
            runs: result.runs,
            horizon: result.horizon,
            delta_runs: result.delta_runs,
        };
        self.write("delta.json", &formats::json_text(&report)?)?;
        self.write(
            "trace.csv",
            &formats::raster_csv(&self.provenance, trace.size, &trace.rows),
        )?;
        Ok(report)
    }

    /// Re-runs one trial of a study: the stored network, or the baseline walk.
    pub fn replay(&self, network: Option<&Path>, evaluation: usize, trial: usize) -> Result<Vec<RecordRow>> {
        self.echo_config()?;
        let (spec, controller) = match network {
            Some(path) => {
                let file = formats::read_bn(path)?;
                let text = formats::write_bn(&file.topology, file.state);
                (
                    network_spec(file.topology),
                    format!("network {}", formats::network_hash(&text)),
                )
            }
            None => (
                lmcrw_spec(self.config, self.config.baseline_params()),
                format!(
                    "lmcrw rho={} alpha={}",
                    self.config.lmcrw.baseline_rho, self.config.lmcrw.baseline_alpha
                ),
            ),
        };
        let ctx = self.context(evaluation, trial + 1);
        let trial_seed = ctx.trial_seeds[trial];
        let options = TrialOptions {
            stop_when_all_found: true,
            record_commands: true,
            ..TrialOptions::default()
        };
        let out = run_trial(&self.config.arena, &spec, TrialSeeds::new(trial_seed), options)?;
        let mut rows = formats::record_rows(std::slice::from_ref(&out.record));
        for r in &mut rows {
            r.trial = trial;
        }
        let commands: Vec<CommandRow> = out
            .commands
            .unwrap_or_default()
            .iter()
            .enumerate()
            .flat_map(|(robot, log)| {
                log.iter().enumerate().map(move |(step, c)| CommandRow {
                    robot,
                    step,
                    straight_ticks: c.straight_ticks,
                    turn_angle: c.turn_angle,
                })
            })
            .collect();
        let info = ReplayInfo {
            provenance: self.provenance.clone(),
            controller,
            evaluation,
            trial,
            trial_seed,
            ticks_run: out.ticks_run,
            found: out.record.first_passage.len() - out.record.censored_count(),
            censored: out.record.censored_count(),
        };
        self.write("replay_records.csv", &formats::csv_text(&self.provenance, &rows)?)?;
        self.write("replay_commands.csv", &formats::csv_text(&self.provenance, &commands)?)?;
        self.write("replay.json", &formats::json_text(&info)?)?;
        Ok(rows)
    }
}

/// Rebuilds the report of a stored study from its manifest and trial records,
/// without simulating, and writes it with activation rasters into `out`.
pub fn analyze(input: &Path, out: &Path) -> Result<Report> {
    let manifest: Manifest = formats::read_json(&input.join(MANIFEST_FILE))?;
    let mut fits = Vec::new();
    for entry in manifest.baseline.iter().chain(&manifest.groups) {
        let mut group = Vec::new();
        for rel in &entry.records {
            let path = input.join(rel);
            let provenance = formats::read_csv_provenance(&path)?;
            if provenance != manifest.provenance {
                return Err(LabError::data(&path, "records belong to a different study"));
            }
            let rows: Vec<RecordRow> = formats::read_csv(&path)?;
            if rows.is_empty() {
                return Err(LabError::data(&path, "no trial records"));
            }
            let data = formats::rows_to_dataset(&rows).map_err(|e| LabError::data(&path, e.to_string()))?;
            group.push(FitRecord::from_estimate(&estimate_mean_fpt(&data)));
        }
        fits.push(group);
    }
    let report = build_report(&manifest, fits)?;
    write_report(&report, out)?;
    for entry in &manifest.groups {
        if let Some(rel) = &entry.network {
            let file = formats::read_bn(&input.join(rel))?;
            let trace = activation_trace(&file.topology, file.state, manifest.trace_steps);
            formats::write_file(
                out,
                &format!("rasters/{}.csv", entry.id),
                &formats::raster_csv(&manifest.provenance, trace.size, &trace.rows),
            )?;
        }
    }
    Ok(report)
}
