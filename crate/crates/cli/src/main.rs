use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use varglue::bench::{
    evolve_and_measure, extrapolate_nisq_gates, nisq_infidelity, run_sweep, CircuitSpec, ExperimentConfig, Metric,
    Observable, SweepReport,
};
use varglue::circuit::{
    build_trotter, build_variational, gate_stats, trotter_init, CircuitPlan, ParamMode, ParamTable,
};
use varglue::cost::{CostKind, Objective, SampleSet};
use varglue::lattice::{build_terms, Boundary, LatticeSpec};
use varglue::optimize::{train, ResultArtifact};
use varglue::statekit::N_DENSE_CAP;
use varglue::upscale::{glue_open_map_with, upscale_periodic, GlueMap, SeamRule};
use varglue::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "varglue",
    version,
    about = "Variational Trotter circuits: train, glue, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Parameter artifact, parameter table, glue map or circuit plan (JSON).
    #[arg(long, global = true)]
    params: Option<PathBuf>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Replaces the configured seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Random input states for sampled costs.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// frobenius, sampled, observable or nisq.
    #[arg(long, global = true)]
    metric: Option<Metric>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train variational angles from the Trotter point.
    Optimize {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Keep shared angles on lattices with open axes.
        #[arg(long)]
        shared: bool,
    },
    /// Reuse trained angles on the configured (larger) lattice.
    Upscale {
        /// Shared bulk angles for open gluing.
        #[arg(long)]
        bulk: Option<PathBuf>,
        /// Angles on the bonds between boundary and inserted bulk.
        #[arg(long, value_enum, default_value_t = Seam::Bulk)]
        seam: Seam,
    },
    /// Cost and fidelity of one circuit against exact evolution.
    Evaluate,
    /// Run the configured sweep and write result rows as CSV.
    Sweep,
    /// NISQ infidelity: extrapolated from a size sweep, or of one circuit.
    Nisq {
        /// Extent of the swept axis to project to.
        #[arg(long, default_value_t = 50)]
        target: usize,
    },
    /// Observable dynamics under repeated application.
    Observable,
    /// Suzuki orders side by side under the noise model.
    SuzukiBench {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8")]
        orders: Vec<u32>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Seam {
    Bulk,
    Boundary,
}

impl From<Seam> for SeamRule {
    fn from(s: Seam) -> Self {
        match s {
            Seam::Bulk => SeamRule::Bulk,
            Seam::Boundary => SeamRule::Boundary,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Optimize { steps, lr, shared } => optimize(&cfg, *steps, *lr, *shared),
        Command::Upscale { bulk, seam } => upscale(&cfg, bulk.as_deref(), (*seam).into()),
        Command::Evaluate => evaluate(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Nisq { target } => nisq(cfg, *target),
        Command::Observable => observable(&cfg),
        Command::SuzukiBench { orders } => suzuki_bench(cli, cfg, orders),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_toml(&fs::read_to_string(path)?)?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(n) = cli.samples {
        cfg.samples = n;
    }
    if let Some(m) = cli.metric {
        cfg.metric = m;
    }
    // Relative paths inside the config are relative to the config file.
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.params = cli.params.clone().or_else(|| cfg.params.as_ref().map(|p| base.join(p)));
    cfg.out = cli.out.clone().or_else(|| cfg.out.as_ref().map(|p| base.join(p)));
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            fs::write(p, text)?;
            log::info!("wrote {}", p.display());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

enum Loaded {
    Table(ParamTable),
    Map(GlueMap),
    Plan(CircuitPlan),
}

fn load_circuit(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path)?;
    if let Ok(a) = ResultArtifact::from_json(&text) {
        return Ok(Loaded::Table(a.params));
    }
    if let Ok(t) = ParamTable::from_json(&text) {
        return Ok(Loaded::Table(t));
    }
    if let Ok(m) = GlueMap::from_json(&text) {
        return Ok(Loaded::Map(m));
    }
    if let Ok(p) = CircuitPlan::from_json(&text) {
        return Ok(Loaded::Plan(p));
    }
    Err(Error::Config(format!(
        "{} is not a parameter artifact, parameter table, glue map or circuit plan",
        path.display()
    )))
}

fn note_tau(loaded: &Loaded, tau: f64) {
    if let Loaded::Table(t) = loaded {
        if let Some(trained) = t.tau.filter(|t| *t != tau) {
            log::warn!("parameters were trained at tau = {trained}, config uses tau = {tau}");
        }
    }
}

fn load_table(path: &Path) -> Result<ParamTable> {
    match load_circuit(path)? {
        Loaded::Table(t) => Ok(t),
        _ => Err(Error::Config(format!("{} holds no parameter table", path.display()))),
    }
}

fn params_path(cfg: &ExperimentConfig) -> Result<&Path> {
    cfg.params
        .as_deref()
        .ok_or_else(|| Error::Config("--params is required".into()))
}

/// Optional parameter table for sweeps with a variational circuit.
fn sweep_params(cfg: &ExperimentConfig) -> Result<Option<ParamTable>> {
    let table = cfg.params.as_deref().map(load_table).transpose()?;
    if let Some(t) = &table {
        note_tau(&Loaded::Table(t.clone()), cfg.tau);
    }
    Ok(table)
}

fn circuit_on(loaded: &Loaded, spec: &LatticeSpec) -> Result<CircuitPlan> {
    match loaded {
        Loaded::Table(t) if t.mode() == ParamMode::Shared && spec.is_fully_periodic() => upscale_periodic(t, spec),
        Loaded::Table(t) => build_variational(t, spec),
        Loaded::Map(m) => {
            if &m.target != spec {
                return Err(Error::ShapeMismatch(format!(
                    "glue map targets {}, config has {spec}",
                    m.target
                )));
            }
            m.plan()
        }
        Loaded::Plan(p) => {
            p.check_qubits(spec.n_sites())?;
            Ok(p.clone())
        }
    }
}

fn cost_kind(metric: Metric, n: usize) -> CostKind {
    match metric {
        Metric::Frobenius => CostKind::Frobenius,
        Metric::Sampled => CostKind::Sampled,
        _ if n <= N_DENSE_CAP => CostKind::Frobenius,
        _ => CostKind::Sampled,
    }
}

fn optimize(cfg: &ExperimentConfig, steps: Option<usize>, lr: Option<f64>, shared: bool) -> Result<()> {
    let spec = cfg.lattice()?;
    let couplings = cfg.couplings();
    let terms = build_terms(&spec, &couplings)?;
    let mut init = trotter_init(cfg.tau, cfg.m, &couplings)?;
    if !spec.is_fully_periodic() && !shared {
        init = init.to_site_resolved(&spec)?;
    }
    init.lattice = Some(spec.clone());
    let kind = match cfg.metric {
        Metric::Frobenius => CostKind::Frobenius,
        Metric::Sampled => CostKind::Sampled,
        m => return Err(Error::Config(format!("cannot optimize the {} metric", m.label()))),
    };
    let seed = cfg.seeds[0];
    let samples = SampleSet::haar(spec.n_sites(), cfg.samples, seed);
    let obj = Objective::variational(kind, &init, &spec, &terms, cfg.tau, Some(&samples))?;
    let mut adam = cfg.optimizer.clone().unwrap_or_default();
    if let Some(s) = steps {
        adam.max_steps = s;
    }
    if let Some(r) = lr {
        adam.lr = r;
    }
    let (params, trace) = train(&obj, &init, &adam)?;
    log::info!(
        "{} cost {:.4e} -> {:.4e} in {} steps ({:.1} s)",
        kind.label(),
        trace.initial_cost(),
        trace.best_cost,
        trace.steps,
        trace.wall_time_s
    );
    let artifact = ResultArtifact {
        params,
        couplings,
        cost_kind: kind,
        cost_initial: trace.initial_cost(),
        cost_trace_final: trace.best_cost,
        steps: trace.steps,
        seed,
        samples: (kind == CostKind::Sampled).then_some(cfg.samples),
    };
    emit(cfg.out.as_deref(), &(artifact.to_json()? + "\n"))
}

/// Axis along which `target` extends `source`, and by how much.
fn extension(source: &LatticeSpec, target: &LatticeSpec) -> Result<(usize, usize)> {
    if source.dim() != target.dim() || source.boundary() != target.boundary() {
        return Err(Error::ShapeMismatch(format!("cannot extend {source} to {target}")));
    }
    let grown: Vec<usize> = (0..source.dim())
        .filter(|&a| source.extents()[a] != target.extents()[a])
        .collect();
    match grown.as_slice() {
        [] => {
            let axis = (0..source.dim())
                .rev()
                .find(|&a| source.boundary()[a] == Boundary::Open)
                .ok_or_else(|| Error::Config(format!("{source} has no open axis")))?;
            Ok((axis, 0))
        }
        [a] if target.extents()[*a] > source.extents()[*a] => Ok((*a, target.extents()[*a] - source.extents()[*a])),
        _ => Err(Error::ShapeMismatch(format!(
            "{target} must grow {source} along exactly one axis"
        ))),
    }
}

fn upscale(cfg: &ExperimentConfig, bulk: Option<&Path>, seam: SeamRule) -> Result<()> {
    let target = cfg.lattice()?;
    let table = load_table(params_path(cfg)?)?;
    let text = match table.mode() {
        ParamMode::Shared => upscale_periodic(&table, &target)?.to_json()?,
        ParamMode::SiteResolved => {
            let source = table
                .lattice
                .clone()
                .ok_or_else(|| Error::Config("boundary parameters carry no training lattice".into()))?;
            let bulk = bulk.ok_or_else(|| Error::Config("open gluing needs --bulk".into()))?;
            let bulk = load_table(bulk)?;
            let (axis, added) = extension(&source, &target)?;
            let map = glue_open_map_with(table.model(), &source, axis, added, Some(table), Some(bulk), seam)?;
            log::info!(
                "glued {} onto {}: {} of {} terms carry boundary angles",
                source,
                map.target,
                map.boundary_terms(),
                map.assignments.len()
            );
            map.to_json()?
        }
    };
    emit(cfg.out.as_deref(), &(text + "\n"))
}

fn evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let spec = cfg.lattice()?;
    let couplings = cfg.couplings();
    let terms = build_terms(&spec, &couplings)?;
    let n = spec.n_sites();
    let loaded = load_circuit(params_path(cfg)?)?;
    note_tau(&loaded, cfg.tau);
    let plan = circuit_on(&loaded, &spec)?.with_reps(cfg.reps);
    let trotter = build_trotter(cfg.tau, cfg.m, &spec, &couplings)?.with_reps(cfg.reps);
    let kind = cost_kind(cfg.metric, n);
    let samples = SampleSet::haar(n, cfg.samples, cfg.seeds[0]);
    let total = cfg.tau * cfg.reps as f64;
    let obj = Objective::fixed(kind, trotter.clone(), &terms, total, Some(&samples))?;
    let noise = cfg.noise()?;
    let report = |p: &CircuitPlan| -> Result<serde_json::Value> {
        let f = obj.fidelity_of(p)?;
        let stats = gate_stats(p);
        Ok(json!({
            "cost": obj.value_of(p)?,
            "fidelity": f,
            "gates": stats.gates,
            "depth": stats.depth_measured,
            "nisq_infidelity": nisq_infidelity(f, p, &noise),
        }))
    };
    let out = json!({
        "lattice": spec.to_string(),
        "n_sites": n,
        "metric": kind.label(),
        "tau": cfg.tau,
        "reps": cfg.reps,
        "pg": cfg.pg,
        "circuit": report(&plan)?,
        format!("trotter_m{}", cfg.m): report(&trotter)?,
    });
    emit(cfg.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
}

fn write_report(cfg: &ExperimentConfig, report: &SweepReport) -> Result<()> {
    for f in &report.failures {
        log::warn!("point {} ({}): {}", f.index, f.point, f.message);
    }
    for (metric, fit) in &report.fits {
        log::info!(
            "fit {metric}: slope {:.4e}, intercept {:.4e}, sigma {:.2e}",
            fit.slope,
            fit.intercept,
            fit.sigma
        );
    }
    emit(cfg.out.as_deref(), &report.to_csv_string()?)?;
    if let Some(out) = &cfg.out {
        if !report.fits.is_empty() {
            let path = out.with_extension("fits.json");
            fs::write(&path, serde_json::to_string_pretty(&report.fits)? + "\n")?;
            log::info!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig) -> Result<()> {
    let params = sweep_params(cfg)?;
    let report = run_sweep(cfg, params.as_ref())?;
    write_report(cfg, &report)
}

fn nisq(mut cfg: ExperimentConfig, target: usize) -> Result<()> {
    let Some(sweep) = cfg.sweep.clone() else {
        return nisq_point(&cfg);
    };
    if sweep.axis != varglue::bench::SweepAxis::N {
        return Err(Error::Config(
            "nisq extrapolation needs a size sweep (axis = \"n\")".into(),
        ));
    }
    cfg.metric = Metric::Nisq;
    let params = sweep_params(&cfg)?;
    let report = run_sweep(&cfg, params.as_ref())?;
    for f in &report.failures {
        log::warn!("point {} ({}): {}", f.index, f.point, f.message);
    }
    let base = cfg.lattice()?;
    let axis = sweep.lattice_axis.unwrap_or(base.dim() - 1);
    let spec = base.with_extent(axis, target)?;
    let couplings = cfg.couplings();
    let noise = cfg.noise()?;
    let mut out = Vec::new();
    for c in cfg.circuit_list() {
        let label = c.label();
        let Some(fit) = report.fits.get(&format!("{label}:approx_infidelity")) else {
            log::warn!("no size fit for {label}");
            continue;
        };
        let gates = c
            .plan(&spec, &couplings, cfg.tau, params.as_ref())?
            .with_reps(cfg.reps)
            .gate_count();
        let p = extrapolate_nisq_gates(fit, spec.n_sites(), gates, &noise);
        out.push(json!({
            "circuit": label,
            "fit": fit,
            "sigma_rel": fit.sigma / p.f_approx.max(f64::MIN_POSITIVE),
            "projection": p,
        }));
    }
    emit(cfg.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
}

/// NISQ infidelity of the supplied circuit on the configured lattice.
fn nisq_point(cfg: &ExperimentConfig) -> Result<()> {
    let spec = cfg.lattice()?;
    let terms = build_terms(&spec, &cfg.couplings())?;
    let n = spec.n_sites();
    let loaded = load_circuit(params_path(cfg)?)?;
    note_tau(&loaded, cfg.tau);
    let plan = circuit_on(&loaded, &spec)?.with_reps(cfg.reps);
    let total = cfg.tau * cfg.reps as f64;
    let noise = cfg.noise()?;
    let mut per_seed = Vec::new();
    for &seed in &cfg.seeds {
        let samples = SampleSet::haar(n, cfg.samples, seed);
        let obj = Objective::fixed(CostKind::Sampled, plan.clone(), &terms, total, Some(&samples))?;
        per_seed.push(obj.fidelity_of(&plan)?);
    }
    let f = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    let frob = if n <= N_DENSE_CAP {
        Some(Objective::fixed(CostKind::Frobenius, plan.clone(), &terms, total, None)?.fidelity_of(&plan)?)
    } else {
        None
    };
    let g = plan.gate_count();
    let out = json!({
        "lattice": spec.to_string(),
        "n_sites": n,
        "gates": g,
        "pg": noise.pg,
        "f_approx": f,
        "f_approx_per_seed": per_seed,
        "f_approx_frobenius": frob,
        "f_gates": noise.gate_fidelity(g),
        "nisq_infidelity": nisq_infidelity(f, &plan, &noise),
        "noise_floor": noise.floor(g),
    });
    emit(cfg.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
}

fn observable(cfg: &ExperimentConfig) -> Result<()> {
    let sites = cfg
        .observable
        .as_ref()
        .ok_or_else(|| Error::Config("observable sites are not configured".into()))?;
    let obs = Observable::z(sites);
    let spec = cfg.lattice()?;
    let couplings = cfg.couplings();
    let terms = build_terms(&spec, &couplings)?;
    let psi = cfg.initial.state(spec.n_sites());
    let loaded = cfg.params.as_deref().map(load_circuit).transpose()?;
    if let Some(l) = &loaded {
        note_tau(l, cfg.tau);
    }
    let mut curves = Vec::new();
    for c in cfg.circuit_list() {
        let plan = match (&c, &loaded) {
            (CircuitSpec::Variational, Some(l)) => circuit_on(l, &spec)?,
            _ => c.plan(&spec, &couplings, cfg.tau, None)?,
        };
        curves.push((
            c.label(),
            evolve_and_measure(&plan, &terms, &psi, cfg.reps, cfg.tau, &obs)?,
        ));
    }
    // Errors relative to the variational curve, when there is one.
    let reference = curves.iter().find(|(l, _)| l == "variational").map(|(_, r)| r.clone());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "circuit",
        "observable",
        "step",
        "time",
        "approx",
        "exact",
        "abs_err",
        "rel_err",
        "err_over_variational",
    ])?;
    for (label, records) in &curves {
        for r in records {
            let norm = reference
                .as_ref()
                .map(|v| v[r.step].abs_err)
                .filter(|e| *e > 0.0)
                .map_or(String::new(), |e| (r.abs_err / e).to_string());
            w.write_record([
                label.clone(),
                obs.to_string(),
                r.step.to_string(),
                r.time.to_string(),
                r.approx.to_string(),
                r.exact.to_string(),
                r.abs_err.to_string(),
                r.rel_err.to_string(),
                norm,
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    emit(cfg.out.as_deref(), &String::from_utf8_lossy(&bytes))
}

fn suzuki_bench(cli: &Cli, mut cfg: ExperimentConfig, orders: &[u32]) -> Result<()> {
    if cli.metric.is_none() {
        cfg.metric = Metric::Nisq;
    }
    let params = sweep_params(&cfg)?;
    cfg.circuits = orders
        .iter()
        .map(|&order| CircuitSpec::Suzuki { order, m: cfg.m })
        .collect();
    if params.is_some() {
        cfg.circuits.insert(0, CircuitSpec::Variational);
    }
    let report = run_sweep(&cfg, params.as_ref())?;
    write_report(&cfg, &report)
}
