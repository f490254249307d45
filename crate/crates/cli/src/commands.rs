use crate::exit::{fail, Code, Failure, OrExit};
use crate::{Cli, Command, Global};
use anyhow::Context;
use clap::Args;
use lambkit::circuit::{all_metrics, fit_mbvd, mbvd_admittance, AdmittanceTrace, FitOptions, FitReport, MbvdModel, ModeMetrics};
use lambkit::config::ToolkitConfig;
use lambkit::design::{design_sweep, DesignError, ResonatorDesign};
use lambkit::dispersion::{curves_to_csv, solve_modes, LambMode};
use lambkit::layout::{gen_chip, gen_reticle, gen_wafer_map, write_gdsii, ChipSpec, ReticleSpec};
use lambkit::process::{check_compatibility, golden_flow, simulate_stack, Adhesion, Flow, FlowReport, Mutation, ProcessError};
use lambkit::rf::{osl_solve, parse_touchstone, to_admittance_trace, CalStandards, ErrorBox, OslMeasurement, TouchstoneFile};
use lambkit::stats::{heatmap_csv, metrics_csv, metrics_vs_frequency, per_mode_deviation, simulate_wafer, thickness_relstd, StatsError, WaferSite};
use lambkit::Execution;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

struct Ctx {
    cfg: ToolkitConfig,
    out: PathBuf,
    quiet: bool,
    exec: Execution,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self, Failure> {
        let mut cfg = match &g.config {
            Some(p) => ToolkitConfig::load(p).or_exit(Code::Usage)?,
            None => ToolkitConfig::default(),
        };
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        std::fs::create_dir_all(&g.out)
            .with_context(|| format!("cannot create {}", g.out.display()))
            .or_exit(Code::Usage)?;
        Ok(Self {
            cfg,
            out: g.out.clone(),
            quiet: g.quiet,
            exec: if g.sequential { Execution::Sequential } else { Execution::Parallel },
        })
    }

    fn say(&self, msg: impl AsRef<str>) {
        // A closed pipe (for example `| head`) is not an error.
        if !self.quiet {
            let _ = writeln!(std::io::stdout(), "{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let p = self.out.join(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))
                .or_exit(Code::Usage)?;
        }
        std::fs::write(&p, bytes)
            .with_context(|| format!("cannot write {}", p.display()))
            .or_exit(Code::Usage)?;
        Ok(p)
    }

    fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Result<PathBuf, Failure> {
        let text = serde_json::to_string_pretty(v).or_exit(Code::Usage)?;
        self.write(name, text + "\n")
    }
}

pub fn run(cli: Cli) -> Result<Code, Failure> {
    let ctx = Ctx::new(&cli.global)?;
    match cli.command {
        Command::Disperse(a) => disperse(&ctx, a),
        Command::Design(a) => design(&ctx, a),
        Command::Layout(a) => layout(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::SimulateWafer(a) => simulate(&ctx, a),
        Command::FlowCheck(a) => flow_check(&ctx, a),
    }
}

fn parse_modes(raw: &[String]) -> Result<Vec<LambMode>, Failure> {
    let modes = raw
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<LambMode>().map_err(|e| fail(Code::Usage, e)))
        .collect::<Result<Vec<_>, _>>()?;
    if modes.is_empty() {
        return Err(fail(Code::Usage, "mode list is empty"));
    }
    Ok(modes)
}

fn pitches_m(cfg: &ToolkitConfig, um: &Option<Vec<f64>>) -> Result<Vec<f64>, Failure> {
    let p: Vec<f64> = match um {
        Some(v) => v.iter().map(|x| x * 1e-6).collect(),
        None => cfg.pitches.clone(),
    };
    if p.is_empty() || p.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(fail(Code::Usage, "pitches must be a non-empty list of positive values"));
    }
    Ok(p)
}

#[derive(Debug, Args)]
pub struct DisperseArgs {
    /// Comma-separated modes.
    #[arg(long, value_delimiter = ',', default_value = "A0,S0,A1,S1")]
    pub modes: Vec<String>,
    /// Smallest pitch (µm); sets the largest wavenumber.
    #[arg(long, default_value_t = 0.5)]
    pub pitch_min_um: f64,
    /// Largest pitch (µm).
    #[arg(long, default_value_t = 4.5)]
    pub pitch_max_um: f64,
    /// Number of wavenumbers, uniform in k.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

fn disperse(ctx: &Ctx, a: DisperseArgs) -> Result<Code, Failure> {
    let modes = parse_modes(&a.modes)?;
    if !(a.pitch_min_um > 0.0 && a.pitch_min_um < a.pitch_max_um && a.pitch_max_um.is_finite()) {
        return Err(fail(
            Code::Usage,
            format!("pitch range must satisfy 0 < min < max, got {} to {} µm", a.pitch_min_um, a.pitch_max_um),
        ));
    }
    if a.points < 2 {
        return Err(fail(Code::Usage, "need at least 2 points"));
    }
    let k_lo = PI / (a.pitch_max_um * 1e-6);
    let k_hi = PI / (a.pitch_min_um * 1e-6);
    let ks: Vec<f64> = (0..a.points)
        .map(|i| k_lo + (k_hi - k_lo) * i as f64 / (a.points - 1) as f64)
        .collect();
    let plate = ctx.cfg.plate().or_exit(Code::Usage)?;
    let curves = solve_modes(&plate, &modes, &ks, ctx.exec).or_exit(Code::Solver)?;
    let csv = curves_to_csv(&curves).or_exit(Code::Usage)?;
    let p = ctx.write("dispersion.csv", csv)?;
    for c in &curves {
        ctx.say(format!("{}: {} points, {} gap(s)", c.mode, c.samples.len(), c.gaps.len()));
    }
    ctx.say(format!("wrote {}", p.display()));
    Ok(Code::Ok)
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Comma-separated pitches (µm); defaults to the configured sweep.
    #[arg(long, value_delimiter = ',')]
    pub pitches_um: Option<Vec<f64>>,
    /// Mode to design for (defaults to the config).
    #[arg(long)]
    pub mode: Option<String>,
    /// Target |Z| at the design frequency (Ω).
    #[arg(long)]
    pub target_ohm: Option<f64>,
}

fn design_code(e: &DesignError) -> Code {
    match e {
        DesignError::Dispersion(_) => Code::Solver,
        DesignError::InvalidTarget(_) | DesignError::InvalidCapacitance(_) => Code::Usage,
        _ => Code::Layout,
    }
}

fn run_designs(ctx: &Ctx, a: &DesignArgs) -> Result<Vec<ResonatorDesign>, Failure> {
    let pitches = pitches_m(&ctx.cfg, &a.pitches_um)?;
    let mode = match &a.mode {
        Some(m) => parse_modes(std::slice::from_ref(m))?[0],
        None => ctx.cfg.design_mode,
    };
    let target = a.target_ohm.unwrap_or(ctx.cfg.target_impedance);
    let plate = ctx.cfg.plate().or_exit(Code::Usage)?;
    let results = design_sweep(&pitches, &plate, &ctx.cfg.capacitance, mode, target, &ctx.cfg.matching, ctx.exec);
    let mut designs = Vec::with_capacity(results.len());
    for (p, r) in pitches.iter().zip(results) {
        match r {
            Ok(d) => designs.push(d),
            Err(e) => {
                let code = design_code(&e);
                return Err(Failure {
                    code,
                    error: anyhow::Error::new(e).context(format!("pitch {:.0} nm", p * 1e9)),
                });
            }
        }
    }
    Ok(designs)
}

fn design(ctx: &Ctx, a: DesignArgs) -> Result<Code, Failure> {
    let designs = run_designs(ctx, &a)?;
    ctx.say("id                 pitch_nm  fingers  f_MHz     |Z|_ohm  layer  dose");
    for d in &designs {
        ctx.say(format!(
            "{:<18} {:>8.0}  {:>7}  {:>8.2}  {:>7.1}  {:<5?}  {:.2}",
            d.id,
            d.idt.pitch * 1e9,
            d.idt.n_fingers,
            d.f_mid * 1e-6,
            d.achieved_impedance,
            d.layer,
            d.dose
        ));
    }
    let p = ctx.write_json("designs.json", &designs)?;
    ctx.say(format!("wrote {}", p.display()));
    Ok(Code::Ok)
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Also write wafer_map.json and report the placement count.
    #[arg(long)]
    pub wafer_map: bool,
}

fn layout(ctx: &Ctx, a: LayoutArgs) -> Result<Code, Failure> {
    let designs = run_designs(ctx, &a.design)?;
    let (w_mm, h_mm) = ctx.cfg.chip_mm;
    let spec = ChipSpec {
        width: w_mm * 1e-3,
        height: h_mm * 1e-3,
        ..ChipSpec::standard(designs)
    };
    let chip = gen_chip(&spec, &ctx.cfg.layers, &ctx.cfg.idt_layout).or_exit(Code::Layout)?;
    let chip_cell = chip.cells.last().map(|c| c.name.clone()).unwrap_or_default();
    let reticle = gen_reticle(&ReticleSpec::standard(&ctx.cfg.layers), &chip, &chip_cell, &ctx.cfg.layers).or_exit(Code::Layout)?;
    let p = ctx.write("chip.gds", write_gdsii(&chip).or_exit(Code::Layout)?)?;
    ctx.say(format!("wrote {} ({} cells)", p.display(), chip.cells.len()));
    let p = ctx.write("reticle.gds", write_gdsii(&reticle).or_exit(Code::Layout)?)?;
    ctx.say(format!("wrote {}", p.display()));
    if a.wafer_map {
        let placements = gen_wafer_map(w_mm, h_mm, &ctx.cfg.wafer);
        let p = ctx.write_json("wafer_map.json", &placements)?;
        ctx.say(format!("{} placements", placements.len()));
        ctx.say(format!("wrote {}", p.display()));
    }
    Ok(Code::Ok)
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// One-port Touchstone files.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Number of motional branches.
    #[arg(long, default_value_t = 4)]
    pub branches: usize,
    /// Raw measurements of the short, open and load standards (.s1p).
    #[arg(long, num_args = 3, value_names = ["SHORT", "OPEN", "LOAD"])]
    pub cal: Option<Vec<PathBuf>>,
    /// Accepted for two-port kits; not used by the one-port correction.
    #[arg(long)]
    pub cal_thru: Option<PathBuf>,
    /// JSON description of the standards (default ideal −1, +1, 0).
    #[arg(long)]
    pub cal_kit: Option<PathBuf>,
    /// JSON fit options.
    #[arg(long)]
    pub fit_options: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FitResult {
    file: String,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<MbvdModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<FitReport>,
    metrics: Vec<ModeMetrics>,
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(p)
        .with_context(|| format!("cannot read {}", p.display()))
        .or_exit(Code::Usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse {}", p.display()))
        .or_exit(Code::Usage)
}

fn read_touchstone(p: &Path) -> anyhow::Result<TouchstoneFile> {
    let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
    parse_touchstone(&text).with_context(|| format!("cannot parse {}", p.display()))
}

fn same_grid(a: &TouchstoneFile, freqs: &[f64]) -> bool {
    a.points.len() == freqs.len()
        && a.points.iter().zip(freqs).all(|((f, _), g)| (f - g).abs() <= 1e-9 * g.abs().max(1.0))
}

/// Calibration grid and one error box per grid point.
type Calibration = (Vec<f64>, Vec<ErrorBox>);

fn calibration(a: &FitArgs) -> Result<Option<Calibration>, Failure> {
    if a.cal_thru.is_some() {
        log::warn!("--cal-thru is ignored: one-port correction uses short, open and load only");
    }
    let Some([s, o, l]) = a.cal.as_deref() else {
        return Ok(None);
    };
    let short = read_touchstone(s).or_exit(Code::Usage)?;
    let open = read_touchstone(o).or_exit(Code::Usage)?;
    let load = read_touchstone(l).or_exit(Code::Usage)?;
    let freqs: Vec<f64> = short.points.iter().map(|p| p.0).collect();
    if !same_grid(&open, &freqs) || !same_grid(&load, &freqs) {
        return Err(fail(Code::Usage, "calibration files use different frequency grids"));
    }
    let meas: Vec<OslMeasurement> = (0..freqs.len())
        .map(|i| OslMeasurement {
            short: short.points[i].1,
            open: open.points[i].1,
            load: load.points[i].1,
        })
        .collect();
    let kit: CalStandards = match &a.cal_kit {
        Some(p) => read_json(p)?,
        None => CalStandards::default(),
    };
    let boxes = osl_solve(&freqs, &meas, &kit, short.z0).or_exit(Code::Solver)?;
    Ok(Some((freqs, boxes)))
}

fn fit_one(path: &Path, cal: Option<&(Vec<f64>, Vec<ErrorBox>)>, branches: usize, opts: &FitOptions) -> anyhow::Result<(AdmittanceTrace, lambkit::circuit::FitOutcome)> {
    let file = read_touchstone(path)?;
    let boxes = match cal {
        Some((freqs, boxes)) => {
            anyhow::ensure!(same_grid(&file, freqs), "frequency grid differs from the calibration files");
            Some(boxes.as_slice())
        }
        None => None,
    };
    let trace = to_admittance_trace(&file, boxes)?;
    let outcome = fit_mbvd(&trace, branches, opts)?;
    Ok((trace, outcome))
}

fn fit(ctx: &Ctx, a: FitArgs) -> Result<Code, Failure> {
    let opts: FitOptions = match &a.fit_options {
        Some(p) => read_json(p)?,
        None => FitOptions::default(),
    };
    let cal = calibration(&a)?;
    let outcomes = ctx.exec.map(&a.files, |p| fit_one(p, cal.as_ref(), a.branches, &opts));
    let mut results = Vec::with_capacity(outcomes.len());
    let mut overlay = String::from("file,f_Hz,y_re_measured,y_im_measured,y_re_model,y_im_model\n");
    for (path, r) in a.files.iter().zip(outcomes) {
        let name = path.display().to_string();
        match r {
            Ok((trace, out)) => {
                let model_y = mbvd_admittance(&out.model, trace.frequencies()).map(|t| t.admittance().to_vec());
                if let Ok(model_y) = &model_y {
                    for ((f, ym), yf) in trace.frequencies().iter().zip(trace.admittance()).zip(model_y) {
                        overlay.push_str(&format!("{name},{f:e},{:e},{:e},{:e},{:e}\n", ym.re, ym.im, yf.re, yf.im));
                    }
                }
                let metrics = all_metrics(&out.model);
                ctx.say(format!(
                    "{name}: residual {:.3e}, {} iterations{}",
                    out.report.residual_norm,
                    out.report.iterations,
                    if out.report.converged { "" } else { " (not converged)" }
                ));
                for (i, m) in metrics.iter().enumerate() {
                    ctx.say(format!(
                        "  branch {i}: f_r {:.4} MHz, f_a {:.4} MHz, Q {:.0}, k2 {:.3}%",
                        m.f_r * 1e-6,
                        m.f_a * 1e-6,
                        m.q_r,
                        m.k_eff_sq * 100.0
                    ));
                }
                results.push(FitResult {
                    file: name,
                    ok: true,
                    error: None,
                    model: Some(out.model),
                    report: Some(out.report),
                    metrics,
                });
            }
            Err(e) => {
                log::error!("{name}: {e:#}");
                results.push(FitResult {
                    file: name,
                    ok: false,
                    error: Some(format!("{e:#}")),
                    model: None,
                    report: None,
                    metrics: Vec::new(),
                });
            }
        }
    }
    ctx.write_json("fit_results.json", &results)?;
    ctx.write("fit_overlay.csv", overlay)?;
    let ok = results.iter().filter(|r| r.ok).count();
    ctx.say(format!("{ok} of {} fits succeeded", results.len()));
    if ok == 0 {
        return Err(fail(Code::AllFitsFailed, "every fit failed"));
    }
    Ok(Code::Ok)
}

/// Site file as written by `simulate-wafer`, or a bare site array.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SiteFile {
    Run { seed: u64, sites: Vec<WaferSite> },
    Bare(Vec<WaferSite>),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Wafer-site JSON.
    pub sites: PathBuf,
}

fn stats_code(e: &StatsError) -> Code {
    match e {
        StatsError::Dispersion { .. } => Code::Solver,
        _ => Code::Statistics,
    }
}

fn or_stats<T>(r: Result<T, StatsError>) -> Result<T, Failure> {
    r.map_err(|e| Failure {
        code: stats_code(&e),
        error: e.into(),
    })
}

fn write_reports(ctx: &Ctx, sites: &[WaferSite], header: &str) -> Result<(), Failure> {
    let report = or_stats(per_mode_deviation(sites))?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let series = or_stats(metrics_vs_frequency(sites))?;
    ctx.write("deviation_report.csv", format!("{header}{}", report.to_csv()))?;
    ctx.write("metrics.csv", format!("{header}{}", metrics_csv(&series)))?;
    ctx.say("mode  pitch_nm  mean_f_MHz  relstd_%   n");
    for r in &report.rows {
        ctx.say(format!(
            "{:<4}  {:>8.0}  {:>10.3}  {:>8.3}  {:>3}",
            r.mode,
            r.pitch * 1e9,
            r.mean_f_hz * 1e-6,
            r.relstd_pct,
            r.n
        ));
    }
    if report.excluded > 0 {
        ctx.say(format!("{} failed site(s) excluded", report.excluded));
    }
    Ok(())
}

fn stats(ctx: &Ctx, a: StatsArgs) -> Result<Code, Failure> {
    let (seed, sites) = match read_json::<SiteFile>(&a.sites)? {
        SiteFile::Run { seed, sites } => (Some(seed), sites),
        SiteFile::Bare(sites) => (None, sites),
    };
    let header = seed.map(|s| format!("# seed={s}\n")).unwrap_or_default();
    write_reports(ctx, &sites, &header)?;
    Ok(Code::Ok)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated modes.
    #[arg(long, value_delimiter = ',', default_value = "S0,S1")]
    pub modes: Vec<String>,
    /// Comma-separated pitches (µm); defaults to the configured sweep.
    #[arg(long, value_delimiter = ',')]
    pub pitches_um: Option<Vec<f64>>,
    /// Re-solve the dispersion relation at every site instead of using
    /// first-order sensitivities.
    #[arg(long)]
    pub full_resolve: bool,
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<Code, Failure> {
    let modes = parse_modes(&a.modes)?;
    let pitches = pitches_m(&ctx.cfg, &a.pitches_um)?;
    let mut model = ctx.cfg.variation();
    model.full_resolve |= a.full_resolve;
    let plate = ctx.cfg.plate().or_exit(Code::Usage)?;
    let (w_mm, h_mm) = ctx.cfg.chip_mm;
    let placements = gen_wafer_map(w_mm, h_mm, &ctx.cfg.wafer);
    let radius = ctx.cfg.wafer.diameter_mm / 2.0;
    ctx.say(format!("seed: {}", model.seed));
    let sites = or_stats(simulate_wafer(&model, &pitches, &modes, &plate, &placements, radius, ctx.exec))?;
    ctx.say(format!("{} chips, {} sites", placements.len(), sites.len()));
    if let Ok(r) = thickness_relstd(&sites) {
        ctx.say(format!("thickness relstd: {r:.3}%"));
    }
    let header = format!("# seed={}\n", model.seed);
    ctx.write_json(
        "wafer_sites.json",
        &SiteFile::Run {
            seed: model.seed,
            sites: sites.clone(),
        },
    )?;
    write_reports(ctx, &sites, &header)?;
    for &mode in &modes {
        for &p in &pitches {
            let name = format!("heatmaps/{mode}_{:.0}nm.csv", p * 1e9);
            ctx.write(&name, format!("{header}{}", heatmap_csv(&sites, mode, p)))?;
        }
    }
    Ok(Code::Ok)
}

#[derive(Debug, Args)]
pub struct FlowCheckArgs {
    /// Flow JSON file.
    #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
    pub flow: Option<PathBuf>,
    /// Check a bundled flow: aln, ti, or a mutation name
    /// (wet-hf-mask-strip, developable-top-barc, no-rinse,
    /// oxygen-strip-over-al, full-ash-before-remover).
    #[arg(long)]
    pub builtin: Option<String>,
    /// Also write the per-step stack states.
    #[arg(long)]
    pub stack: bool,
}

fn builtin_flow(name: &str) -> Result<Flow, Failure> {
    let key = name.trim().to_ascii_lowercase().replace('_', "-");
    Ok(match key.as_str() {
        "aln" => golden_flow(Adhesion::AlN),
        "ti" => golden_flow(Adhesion::Ti),
        "wet-hf-mask-strip" => Mutation::WetHfMaskStrip.apply(),
        "developable-top-barc" => Mutation::DevelopableTopBarc.apply(),
        "no-rinse" => Mutation::NoRinse.apply(),
        "oxygen-strip-over-al" => Mutation::OxygenStripOverAl.apply(),
        "full-ash-before-remover" => Mutation::FullAshBeforeRemover.apply(),
        _ => return Err(fail(Code::Usage, format!("unknown built-in flow {name:?}"))),
    })
}

fn flow_check(ctx: &Ctx, a: FlowCheckArgs) -> Result<Code, Failure> {
    let flow: Flow = match (&a.flow, &a.builtin) {
        (Some(p), _) => read_json(p)?,
        (None, Some(name)) => builtin_flow(name)?,
        (None, None) => return Err(fail(Code::Usage, "no flow given")),
    };
    let to_fail = |e: ProcessError| Failure {
        code: Code::Usage,
        error: e.into(),
    };
    let violations = check_compatibility(&flow, &ctx.cfg.rates).map_err(to_fail)?;
    let report = FlowReport::new(&flow, violations);
    ctx.write_json("flow_report.json", &report)?;
    if a.stack {
        let states = simulate_stack(&flow, &ctx.cfg.rates).map_err(to_fail)?;
        ctx.write_json("stack.json", &states)?;
    }
    ctx.say(report.summary().trim_end());
    Ok(if report.errors > 0 { Code::FlowErrors } else { Code::Ok })
}
