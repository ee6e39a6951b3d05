use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};

use pkf::mot::{track_sequence, TrackerConfig};
use pkf::par::{with_threads, Execution};
use pkf::sim::{self, FilterConfig, Method, MethodSummary, ScenarioConfig};

use crate::config::{load, write_manifest};
use crate::{Common, Failure, ScenarioFlags};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimulateRun {
    scenario: ScenarioConfig,
    filter: FilterConfig,
    methods: Vec<Method>,
    seeds: usize,
    threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepRun {
    scenario: ScenarioConfig,
    filter: FilterConfig,
    methods: Vec<Method>,
    seeds: usize,
    levels: Vec<f64>,
    threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BenchRun {
    scenario: ScenarioConfig,
    filter: FilterConfig,
    objects: Vec<usize>,
    repetitions: usize,
    threads: usize,
}

pub fn default_levels() -> Vec<f64> {
    (0..12).map(|i| (20 + 5 * i) as f64 / 100.0).collect()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Failure::input(format!("bad {what} '{x}'"))))
        .collect()
}

fn parse_methods(s: &str) -> Result<Vec<Method>, Failure> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for m in parse_list::<Method>(s, "method")? {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn apply_scenario_flags(scenario: &mut ScenarioConfig, methods: &mut Vec<Method>, seeds: &mut usize, f: &ScenarioFlags) -> Result<(), Failure> {
    if let Some(m) = &f.methods {
        *methods = parse_methods(m)?;
    }
    if let Some(n) = f.objects {
        scenario.n_objects = n;
        scenario.phase_offsets = None;
    }
    if let Some(n) = f.seeds {
        *seeds = n;
    }
    if let Some(n) = f.frames {
        scenario.n_frames = n;
    }
    if let Some(p) = f.p_detect {
        scenario.p_detect = p;
    }
    Ok(())
}

fn check_run(scenario: &ScenarioConfig, methods: &[Method], seeds: usize) -> Result<(), Failure> {
    scenario.validate()?;
    if scenario.n_objects == 0 || scenario.n_frames == 0 {
        return Err(Failure::input("objects and frames must be positive"));
    }
    if methods.is_empty() || seeds == 0 {
        return Err(Failure::input("need at least one method and one seed"));
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure { code: 1, message: format!("{}: {e}", dir.display()) })
}

fn echo(path: &Path) -> Result<(), Failure> {
    print!("{}", fs::read_to_string(path).map_err(pkf::Error::from)?);
    Ok(())
}

pub fn simulate(common: &Common, flags: &ScenarioFlags, noise: Option<f64>) -> Result<(), Failure> {
    let defaults = SimulateRun {
        scenario: ScenarioConfig::default(),
        filter: FilterConfig::default(),
        methods: Method::ALL.to_vec(),
        seeds: 20,
        threads: 0,
    };
    let mut run = load(defaults, common.config.as_deref(), "simulate")?.config;
    apply_scenario_flags(&mut run.scenario, &mut run.methods, &mut run.seeds, flags)?;
    if let Some(v) = noise {
        run.scenario.meas_noise_var = v;
    }
    if let Some(s) = common.seed {
        run.scenario.seed = s;
    }
    if let Some(t) = common.threads {
        run.threads = t;
    }
    check_run(&run.scenario, &run.methods, run.seeds)?;
    prepare_out(&common.out)?;

    let start = Instant::now();
    let runs = with_threads(run.threads, || sim::run_seeds(&run.scenario, &run.filter, &run.methods, run.seeds, Execution::Parallel))?;
    let rows = MethodSummary::from_runs(&runs);
    log::info!("simulate: {} seeds in {:.2} s", run.seeds, start.elapsed().as_secs_f64());
    let table = common.out.join("table1.csv");
    sim::write_table1_csv(&rows, &table)?;
    write_manifest(&common.out, "table1", "simulate", Some(run.scenario.seed), &run, None, &[&table])?;
    echo(&table)
}

pub fn sweep(common: &Common, flags: &ScenarioFlags, levels: Option<&str>) -> Result<(), Failure> {
    let defaults = SweepRun {
        scenario: ScenarioConfig { n_objects: 10, p_detect: 0.95, ..Default::default() },
        filter: FilterConfig::default(),
        methods: Method::ALL.to_vec(),
        seeds: 10,
        levels: default_levels(),
        threads: 0,
    };
    let mut run = load(defaults, common.config.as_deref(), "sweep")?.config;
    apply_scenario_flags(&mut run.scenario, &mut run.methods, &mut run.seeds, flags)?;
    if let Some(l) = levels {
        run.levels = parse_list(l, "noise level")?;
    }
    if let Some(s) = common.seed {
        run.scenario.seed = s;
    }
    if let Some(t) = common.threads {
        run.threads = t;
    }
    check_run(&run.scenario, &run.methods, run.seeds)?;
    if run.levels.is_empty() || run.levels.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Failure::input("noise levels must be non-negative"));
    }
    prepare_out(&common.out)?;

    let points = with_threads(run.threads, || {
        sim::noise_sweep(&run.scenario, &run.filter, &run.levels, &run.methods, run.seeds, Execution::Parallel)
    })?;
    let violations: usize = points.iter().map(|p| p.covariance_violations).sum();
    if violations > 0 {
        log::warn!("{violations} covariance health violations during the sweep");
    }
    let table = common.out.join("fig4.csv");
    sim::write_fig4_csv(&points, &table)?;
    write_manifest(&common.out, "fig4", "sweep", Some(run.scenario.seed), &run, None, &[&table])?;
    echo(&table)
}

pub fn bench(common: &Common, objects: Option<&str>, repetitions: Option<usize>) -> Result<(), Failure> {
    let defaults = BenchRun {
        scenario: ScenarioConfig::default(),
        filter: FilterConfig::default(),
        objects: vec![3, 5, 10, 20],
        repetitions: 101,
        threads: 1,
    };
    let mut run = load(defaults, common.config.as_deref(), "bench")?.config;
    if let Some(o) = objects {
        run.objects = parse_list(o, "object count")?;
    }
    if let Some(r) = repetitions {
        run.repetitions = r;
    }
    if let Some(s) = common.seed {
        run.scenario.seed = s;
    }
    if let Some(t) = common.threads {
        run.threads = t;
    }
    run.scenario.validate()?;
    if run.objects.is_empty() || run.objects.contains(&0) || run.repetitions == 0 {
        return Err(Failure::input("object counts and repetitions must be positive"));
    }
    prepare_out(&common.out)?;

    let rows = with_threads(run.threads, || sim::bench_update(&run.objects, &run.scenario, &run.filter, run.repetitions))?;
    let table = common.out.join("table2.csv");
    sim::write_table2_csv(&rows, &table)?;
    write_manifest(&common.out, "table2", "bench", Some(run.scenario.seed), &run, None, &[&table])?;
    echo(&table)
}

#[derive(Args, Debug, Clone)]
pub struct TrackFlags {
    /// MOT-Challenge detection file.
    #[arg(long)]
    pub det: Option<PathBuf>,
    /// Result file name without extension; defaults to the detection file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Start from the crowded-scene thresholds.
    #[arg(long)]
    pub crowded: bool,
    #[arg(long)]
    pub tau_ambig: Option<f64>,
    #[arg(long)]
    pub tau_weight: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub det_conf: Option<f64>,
    #[arg(long)]
    pub new_track_iou: Option<f64>,
    #[arg(long)]
    pub max_age: Option<u32>,
    #[arg(long)]
    pub min_hits: Option<u32>,
    /// Run per-track work on the thread pool.
    #[arg(long)]
    pub parallel: bool,
}

pub fn track(common: &Common, flags: &TrackFlags) -> Result<(), Failure> {
    let defaults = if flags.crowded { TrackerConfig::crowded() } else { TrackerConfig::default() };
    let loaded = load(defaults, common.config.as_deref(), "track")?;
    let mut cfg = loaded.config;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.tau_ambig, flags.tau_ambig);
    set(&mut cfg.tau_weight, flags.tau_weight);
    set(&mut cfg.alpha, flags.alpha);
    set(&mut cfg.det_conf_threshold, flags.det_conf);
    set(&mut cfg.new_track_iou, flags.new_track_iou);
    if let Some(v) = flags.max_age {
        cfg.max_age = v;
    }
    if let Some(v) = flags.min_hits {
        cfg.min_hits = v;
    }
    if flags.parallel {
        cfg.exec = Execution::Parallel;
    }
    if common.seed.is_some() {
        log::warn!("track is deterministic; --seed is ignored");
    }
    cfg.validate()?;
    let det = flags.det.clone().or(loaded.input).ok_or_else(|| Failure::input("no detection file given (--det)"))?;
    if !det.is_file() {
        return Err(Failure::input(format!("detection file {} not found", det.display())));
    }
    let name = match &flags.name {
        Some(n) => n.clone(),
        None => det.file_stem().and_then(|s| s.to_str()).unwrap_or("result").to_string(),
    };
    prepare_out(&common.out)?;
    let result = common.out.join(format!("{name}.txt"));

    let summary = with_threads(common.threads.unwrap_or(0), || track_sequence(&det, &result, &cfg))?;
    eprintln!("fps: {:.1}", summary.fps);
    write_manifest(&common.out, &name, "track", None, &cfg, Some(&det), &[&result])?;
    println!("{}", serde_json::to_string(&summary).map_err(pkf::Error::from)?);
    Ok(())
}

pub fn selftest(seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let start = Instant::now();
    let outcomes = pkf::selftest::run_all(seed);
    let mut table = String::from("check,passed,detail\n");
    for o in &outcomes {
        table.push_str(&format!("{},{},{}\n", o.name, o.passed, o.detail.replace(',', ";")));
    }
    print!("{table}");
    eprintln!("selftest: {:.2} s", start.elapsed().as_secs_f64());
    if let Some(dir) = out {
        prepare_out(dir)?;
        let path = dir.join("selftest.csv");
        fs::write(&path, &table).map_err(pkf::Error::from)?;
        write_manifest(dir, "selftest", "selftest", Some(seed), &serde_json::json!({ "seed": seed }), None, &[&path])?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(Failure { code: 1, message: format!("{failed} selftest checks failed") });
    }
    Ok(())
}
