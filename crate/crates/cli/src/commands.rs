use std::f64::consts::TAU;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use cqed_core::fit::{
    fit_spectrum, normalize_spectrum, BaselineMethod, FitModel, FitParams, FitResult, FitSetup, Normalization,
};
use cqed_core::io::{
    read_measured_file, write_json, write_model_curve_csv, write_resonance_csv, write_spectrum_csv, ParamFile,
    ResolvedParams, MODEL_CURVE_HEADER, SPECTRUM_HEADER,
};
use cqed_core::oracle::oracle_check as run_oracle_check;
use cqed_core::params::{
    amplitude_from_kappa, angular, beta_from_g, g_from_beta, g_max, hz_over_2pi, kappa_from_amplitude, validity_report,
    EmitterEnsemble, Geometry, Regime, ResonatorConfig, Verdict, DEFAULT_STRICTNESS,
};
use cqed_core::presets::{fiber_ring, SweepPanel, SURVEY, SWEEP_BETA, SWEEP_GAMMA_HZ_OVER_2PI, SWEEP_MIRROR};
use cqed_core::resonance::{resonance_map, MapConfig, ResonanceBranch, ResonanceModel};
use cqed_core::spectrum::{
    linspace, reflection_singlemode, spectrum_scan, ModelTag, ParamSnapshot, Spectrum, SpectrumPoint,
};
use cqed_core::DetuningPoint;
use serde::Serialize;

use crate::manifest::Run;
use crate::{Failure, Format, GlobalArgs};

type CmdResult = Result<(), Failure>;

const MHZ: f64 = 1e6;

fn input_error(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryArg {
    Ring,
    FabryPerot,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Ring => Geometry::Ring,
            GeometryArg::FabryPerot => Geometry::FabryPerot,
        }
    }
}

/// Emitter and resonator parameters shared by `spectrum` and `validity`.
/// Unspecified values fall back to the fiber ring experiment.
#[derive(Args, Debug, Clone, Default)]
pub struct SystemArgs {
    /// JSON parameter file; command-line flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of emitters
    #[arg(long)]
    pub n: Option<usize>,
    /// Per-emitter coupling efficiency β
    #[arg(long)]
    pub beta: Option<f64>,
    /// βN product; picks N = round(βN/β) and rescales β so that βN is exact
    #[arg(long)]
    pub beta_n: Option<f64>,
    /// Emitter decay rate γ/2π in MHz
    #[arg(long)]
    pub gamma_mhz: Option<f64>,
    /// Free spectral range ν_FSR in MHz
    #[arg(long)]
    pub fsr_mhz: Option<f64>,
    /// Cavity-atom detuning Δ_ca/2π in MHz
    #[arg(long, allow_hyphen_values = true)]
    pub delta_ca_mhz: Option<f64>,
    /// Intrinsic roundtrip amplitude transmission
    #[arg(long)]
    pub t_rt: Option<f64>,
    /// Input mirror amplitude reflectivity
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryArg>,
}

impl SystemArgs {
    fn any(&self) -> bool {
        self.config.is_some()
            || self.n.is_some()
            || self.beta.is_some()
            || self.beta_n.is_some()
            || self.gamma_mhz.is_some()
            || self.fsr_mhz.is_some()
            || self.delta_ca_mhz.is_some()
            || self.t_rt.is_some()
            || self.r.is_some()
            || self.geometry.is_some()
    }
}

fn set<T: PartialEq + Copy + std::fmt::Debug>(
    run: &mut Run,
    slot: &mut Option<T>,
    flag: Option<T>,
    flag_name: &str,
    key: &str,
) {
    if let Some(v) = flag {
        if let Some(old) = *slot {
            if old != v {
                run.warn(format!(
                    "{flag_name} sets `{key}` = {v:?}, overriding {old:?} from the config file"
                ));
            }
        }
        *slot = Some(v);
    }
}

/// Merges the config file, flags and defaults into a complete parameter file.
fn system_params(args: &SystemArgs, run: &mut Run) -> Result<ParamFile, Failure> {
    let mut p = match &args.config {
        Some(path) => {
            run.input(path);
            ParamFile::load(path)?
        }
        None => ParamFile::default(),
    };
    set(
        run,
        &mut p.gamma_hz_over_2pi,
        args.gamma_mhz.map(|x| x * MHZ),
        "--gamma-mhz",
        "gamma_hz_over_2pi",
    );
    set(
        run,
        &mut p.nu_fsr_hz,
        args.fsr_mhz.map(|x| x * MHZ),
        "--fsr-mhz",
        "nu_fsr_hz",
    );
    set(
        run,
        &mut p.delta_ca_hz_over_2pi,
        args.delta_ca_mhz.map(|x| x * MHZ),
        "--delta-ca-mhz",
        "delta_ca_hz_over_2pi",
    );
    set(run, &mut p.t_rt, args.t_rt, "--t-rt", "t_rt");
    set(run, &mut p.r, args.r, "--r", "r");
    set(
        run,
        &mut p.geometry,
        args.geometry.map(Geometry::from),
        "--geometry",
        "geometry",
    );

    if let Some(bn) = args.beta_n {
        if args.n.is_some() && args.beta.is_some() {
            return Err(input_error("give at most two of --n, --beta and --beta-n"));
        }
        if p.beta_list.is_some() {
            return Err(input_error(
                "--beta-n cannot be combined with `beta_list` from the config file",
            ));
        }
        let (n, beta) = match args.n {
            Some(0) if bn > 0.0 => return Err(input_error("--beta-n > 0 needs --n > 0")),
            Some(0) => (0, args.beta.or(p.beta).unwrap_or(fiber_ring().beta)),
            Some(n) => (n, bn / n as f64),
            None => {
                let hint = args.beta.or(p.beta).unwrap_or(fiber_ring().beta);
                let e = EmitterEnsemble::from_beta_n(bn, hint, 1.0, Regime::TimedDicke)?;
                (e.n_atoms(), e.beta())
            }
        };
        set(run, &mut p.n_atoms, Some(n), "--beta-n", "n_atoms");
        set(run, &mut p.beta, Some(beta), "--beta-n", "beta");
    } else {
        set(run, &mut p.n_atoms, args.n, "--n", "n_atoms");
        set(run, &mut p.beta, args.beta, "--beta", "beta");
    }

    let exp = fiber_ring();
    p.gamma_hz_over_2pi.get_or_insert(hz_over_2pi(exp.gamma));
    p.nu_fsr_hz.get_or_insert(exp.nu_fsr);
    if p.kappa0_hz_over_2pi.is_none() && p.kappa_ext_hz_over_2pi.is_none() {
        p.t_rt.get_or_insert(exp.resonator.t_rt());
        p.r.get_or_insert(exp.resonator.r());
    }
    if p.beta_list.is_none() {
        p.beta.get_or_insert(exp.beta);
        p.n_atoms.get_or_insert(0);
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    /// Atoms as sequential scatterers inside the roundtrip
    Cascaded,
    /// Single-mode Tavis-Cummings
    Tc,
    /// Ensemble on a waveguide, input mirror removed (r = 0)
    Waveguide,
    /// Cascaded model with a Dicke superatom (decay Nγ)
    Dicke,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long, value_enum, default_value_t = SpectrumModel::Cascaded)]
    pub model: SpectrumModel,
    #[command(flatten)]
    pub system: SystemArgs,
    /// Collective coupling g/2π in MHz for `--model tc`, instead of the value implied by β and N
    #[arg(long = "g")]
    pub g_mhz: Option<f64>,
    /// Half-width of the probe scan in free spectral ranges
    #[arg(long, default_value_t = 3.0)]
    pub span_fsr: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
}

#[derive(Serialize)]
struct SpectrumRun<'a> {
    model: SpectrumModel,
    system: &'a ParamFile,
    coupling_override_hz_over_2pi: Option<f64>,
    span_fsr: f64,
    points: usize,
    snapshot: &'a ParamSnapshot,
}

#[derive(Serialize)]
struct Table<'a> {
    columns: &'a [&'a str],
    rows: Vec<[f64; 3]>,
}

fn tc_with_coupling(g: f64, sys: &ResolvedParams, grid: &[f64]) -> Result<Spectrum, Failure> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(input_error(format!(
            "--g must be non-negative, got {}",
            hz_over_2pi(g) / MHZ
        )));
    }
    let res = &sys.resonator;
    let points = grid
        .iter()
        .map(|&delta_a| {
            let p = DetuningPoint::new(delta_a, sys.delta_ca);
            let reflection =
                reflection_singlemode(g, sys.ensemble.gamma_l_collective(), res.kappa0(), res.kappa_ext(), p)?;
            Ok(SpectrumPoint {
                delta_a,
                delta_c: p.delta_c(),
                reflection,
            })
        })
        .collect::<cqed_core::Result<Vec<_>>>()?;
    Ok(Spectrum {
        points,
        model: ModelTag::SingleModeTc,
        metadata: ParamSnapshot {
            model: ModelTag::SingleModeTc,
            ensemble: sys.ensemble.clone(),
            resonator: *res,
            delta_ca: sys.delta_ca,
        },
    })
}

pub fn spectrum(g: &GlobalArgs, a: SpectrumArgs) -> CmdResult {
    let mut run = Run::new("spectrum", &g.out_dir, g.prefix.as_deref())?;
    if a.g_mhz.is_some() && a.model != SpectrumModel::Tc {
        return Err(input_error("--g applies only to --model tc"));
    }
    if !(a.span_fsr > 0.0 && a.span_fsr.is_finite()) || a.points < 2 {
        return Err(input_error("--span-fsr must be positive and --points at least 2"));
    }
    let mut pf = system_params(&a.system, &mut run)?;
    if a.model == SpectrumModel::Dicke {
        if pf.regime == Some(Regime::TimedDicke) {
            run.warn("--model dicke overrides `regime` = timed_dicke from the config file");
        }
        pf.regime = Some(Regime::Dicke);
    }
    let sys = pf.resolve()?;
    let nu = sys.resonator.nu_fsr();
    let grid: Vec<f64> = linspace(-a.span_fsr * nu, a.span_fsr * nu, a.points)
        .into_iter()
        .map(angular)
        .collect();
    let tag = match a.model {
        SpectrumModel::Cascaded | SpectrumModel::Dicke => ModelTag::Cascaded,
        SpectrumModel::Tc => ModelTag::SingleModeTc,
        SpectrumModel::Waveguide => ModelTag::WaveguideLimit,
    };
    let spectrum = match a.g_mhz {
        Some(gm) => tc_with_coupling(angular(gm * MHZ), &sys, &grid)?,
        None => spectrum_scan(&sys.ensemble, &sys.resonator, sys.delta_ca, &grid, tag)?,
    };

    run.parameters(&SpectrumRun {
        model: a.model,
        system: &pf,
        coupling_override_hz_over_2pi: a.g_mhz.map(|x| x * MHZ),
        span_fsr: a.span_fsr,
        points: a.points,
        snapshot: &spectrum.metadata,
    })?;
    match g.format {
        Format::Csv => run.emit(".csv", |w| write_spectrum_csv(w, &spectrum))?,
        Format::Json => {
            let table = Table {
                columns: &SPECTRUM_HEADER,
                rows: spectrum
                    .points
                    .iter()
                    .map(|p| [hz_over_2pi(p.delta_a), hz_over_2pi(p.delta_c), p.reflection])
                    .collect(),
            };
            run.emit(".json", |w| write_json(w, &table))?
        }
    }
    run.emit(".params.json", |w| write_json(w, &spectrum.metadata))?;
    run.finish()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Panel {
    A,
    B,
    C,
    D,
}

impl From<Panel> for SweepPanel {
    fn from(p: Panel) -> Self {
        match p {
            Panel::A => SweepPanel::A,
            Panel::B => SweepPanel::B,
            Panel::C => SweepPanel::C,
            Panel::D => SweepPanel::D,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MapModel {
    Cascaded,
    Tc,
    Multimode,
}

impl From<MapModel> for ResonanceModel {
    fn from(m: MapModel) -> Self {
        match m {
            MapModel::Cascaded => ResonanceModel::Cascaded,
            MapModel::Tc => ResonanceModel::SingleModeTc,
            MapModel::Multimode => ResonanceModel::MultimodeTc,
        }
    }
}

#[derive(Args, Debug)]
pub struct ResonanceArgs {
    /// Sweep preset: a/c single-mode TC/cascaded at 200 MHz FSR, b/d multimode TC/cascaded at 10 MHz FSR
    #[arg(long, value_enum)]
    pub preset: Option<Panel>,
    #[arg(long, value_enum)]
    pub model: Option<MapModel>,
    /// γ/2π in MHz
    #[arg(long)]
    pub gamma_mhz: Option<f64>,
    /// Per-emitter β; N = βN/β
    #[arg(long)]
    pub beta: Option<f64>,
    /// ν_FSR in MHz
    #[arg(long)]
    pub fsr_mhz: Option<f64>,
    #[arg(long)]
    pub t_rt: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Δ_ca/2π in MHz
    #[arg(long, allow_hyphen_values = true)]
    pub delta_ca_mhz: Option<f64>,
    #[arg(long)]
    pub beta_n_min: Option<f64>,
    #[arg(long)]
    pub beta_n_max: Option<f64>,
    /// Number of βN steps; 0 gives an empty sweep
    #[arg(long)]
    pub steps: Option<usize>,
    /// Half-width of the detuning window in free spectral ranges
    #[arg(long)]
    pub window_fsr: Option<f64>,
    /// Largest |q| of the roundtrip phase condition Re φ = 2πq
    #[arg(long)]
    pub q_max: Option<i64>,
    /// Modes on each side of the central one in the multimode model
    #[arg(long)]
    pub modes_half: Option<usize>,
    /// Also compute the reflection contrast of each resonance
    #[arg(long)]
    pub contrast: bool,
}

#[derive(Serialize)]
struct ResonanceRun {
    preset: Option<Panel>,
    model: ResonanceModel,
    gamma_hz_over_2pi: f64,
    beta: f64,
    resonator: ResonatorConfig,
    delta_ca_hz_over_2pi: f64,
    q_min: i64,
    q_max: i64,
    window_hz_over_2pi: (f64, f64),
    modes_half: usize,
    with_contrast: bool,
    beta_n_grid: Vec<f64>,
}

#[derive(Serialize)]
struct ResonanceOutput<'a> {
    branches: &'a [ResonanceBranch],
    warnings: &'a [String],
}

pub fn resonances(g: &GlobalArgs, a: ResonanceArgs) -> CmdResult {
    let mut run = Run::new("resonances", &g.out_dir, g.prefix.as_deref())?;
    let (model, base, mut grid) = match (a.preset, a.model) {
        (Some(p), m) => {
            let panel = SweepPanel::from(p);
            let base = panel.map_config();
            let model = match m {
                Some(m) if ResonanceModel::from(m) != base.model => {
                    run.warn(format!("--model {m:?} overrides the model of preset {p:?}"));
                    m.into()
                }
                _ => base.model,
            };
            (model, base, panel.beta_n_grid())
        }
        (None, Some(m)) => {
            let res = ResonatorConfig::new(200e6, SWEEP_MIRROR, SWEEP_MIRROR, Geometry::Ring)?;
            let base = MapConfig::new(m.into(), angular(SWEEP_GAMMA_HZ_OVER_2PI), SWEEP_BETA, res);
            (m.into(), base, linspace(0.1, 4.0, 40))
        }
        (None, None) => return Err(input_error("give --preset or --model")),
    };

    let nu0 = base.resonator.nu_fsr();
    let span = base.delta_window.1 / (TAU * nu0);
    let resonator = ResonatorConfig::new(
        a.fsr_mhz.map(|x| x * MHZ).unwrap_or(nu0),
        a.t_rt.unwrap_or(base.resonator.t_rt()),
        a.r.unwrap_or(base.resonator.r()),
        base.resonator.geometry(),
    )?;
    let mut cfg = MapConfig::new(
        model,
        a.gamma_mhz.map(|x| angular(x * MHZ)).unwrap_or(base.gamma),
        a.beta.unwrap_or(base.beta),
        resonator,
    );
    let fsr = TAU * resonator.nu_fsr();
    let w = a.window_fsr.unwrap_or(span);
    if !(w > 0.0 && w.is_finite()) {
        return Err(input_error("--window-fsr must be positive"));
    }
    cfg.delta_window = (-w * fsr, w * fsr);
    let q = a.q_max.unwrap_or(*base.q_window.end());
    if q < 0 {
        return Err(input_error("--q-max must be non-negative"));
    }
    cfg.q_window = -q..=q;
    cfg.delta_ca = a.delta_ca_mhz.map(|x| angular(x * MHZ)).unwrap_or(base.delta_ca);
    cfg.modes_half = a.modes_half.unwrap_or(base.modes_half);
    cfg.with_contrast = a.contrast;

    if a.beta_n_min.is_some() || a.beta_n_max.is_some() || a.steps.is_some() {
        let lo = a.beta_n_min.or(grid.first().copied()).unwrap_or(0.0);
        let hi = a.beta_n_max.or(grid.last().copied()).unwrap_or(lo);
        let n = a.steps.unwrap_or(grid.len());
        if n > 1 && !(hi > lo) {
            return Err(input_error("--beta-n-max must exceed --beta-n-min"));
        }
        grid = linspace(lo, hi, n);
    }

    let map = resonance_map(&cfg, &grid)?;
    run.warnings(map.warnings.iter().cloned());
    run.parameters(&ResonanceRun {
        preset: a.preset,
        model: cfg.model,
        gamma_hz_over_2pi: hz_over_2pi(cfg.gamma),
        beta: cfg.beta,
        resonator: cfg.resonator,
        delta_ca_hz_over_2pi: hz_over_2pi(cfg.delta_ca),
        q_min: *cfg.q_window.start(),
        q_max: *cfg.q_window.end(),
        window_hz_over_2pi: (hz_over_2pi(cfg.delta_window.0), hz_over_2pi(cfg.delta_window.1)),
        modes_half: cfg.modes_half,
        with_contrast: cfg.with_contrast,
        beta_n_grid: grid,
    })?;
    match g.format {
        Format::Csv => run.emit(".csv", |w| write_resonance_csv(w, &map.branches))?,
        Format::Json => run.emit(".json", |w| {
            write_json(
                w,
                &ResonanceOutput {
                    branches: &map.branches,
                    warnings: &map.warnings,
                },
            )
        })?,
    }
    run.finish()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ValidityArgs {
    /// A custom row is added when a config file or any system flag is given
    #[command(flatten)]
    pub system: SystemArgs,
    /// Label of the custom row
    #[arg(long, default_value = "custom")]
    pub label: String,
    /// Leave out the survey table rows
    #[arg(long)]
    pub no_survey: bool,
    /// Factor turning "much smaller than" into a strict comparison
    #[arg(long, default_value_t = DEFAULT_STRICTNESS)]
    pub strictness: f64,
}

#[derive(Clone, Debug, Serialize)]
struct ValidityRow {
    label: String,
    g_n_hz_over_2pi: f64,
    gamma_l_hz_over_2pi: f64,
    nu_fsr_hz: f64,
    ratio_g_fsr: f64,
    ratio_loss_fsr: f64,
    printed_g_over_fsr: Option<f64>,
    printed_loss_ratio: Option<f64>,
    beta_n_product: Option<f64>,
    optical_depth: Option<f64>,
    coupling_below_fsr: Verdict,
    loss_below_fsr: Verdict,
    beta_n_below_fsr_bound: Option<Verdict>,
    beta_n_below_loss_bound: Option<Verdict>,
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    }
}

#[derive(Serialize)]
struct ValidityRun<'a> {
    strictness: f64,
    survey: bool,
    custom: Option<&'a ParamFile>,
}

pub fn validity(g: &GlobalArgs, a: ValidityArgs) -> CmdResult {
    let mut run = Run::new("validity", &g.out_dir, g.prefix.as_deref())?;
    let s = a.strictness;
    if !(s >= 1.0 && s.is_finite()) {
        return Err(input_error("--strictness must be at least 1"));
    }
    let mut rows = Vec::new();
    if !a.no_survey {
        for row in SURVEY {
            let (rg, rl) = row.ratios();
            rows.push(ValidityRow {
                label: row.label.to_string(),
                g_n_hz_over_2pi: row.g_n_hz_over_2pi,
                gamma_l_hz_over_2pi: row.gamma_hz_over_2pi,
                nu_fsr_hz: row.nu_fsr_hz,
                ratio_g_fsr: rg,
                ratio_loss_fsr: rl,
                printed_g_over_fsr: Some(row.printed_g_over_fsr),
                printed_loss_ratio: Some(row.printed_loss_ratio),
                beta_n_product: None,
                optical_depth: None,
                coupling_below_fsr: verdict(rg < 1.0 / s),
                loss_below_fsr: verdict(rl < 1.0 / s),
                beta_n_below_fsr_bound: None,
                beta_n_below_loss_bound: None,
            });
        }
    }
    let custom = if a.system.any() {
        Some(system_params(&a.system, &mut run)?)
    } else {
        None
    };
    if let Some(pf) = &custom {
        let sys = pf.resolve()?;
        let rep = validity_report(&sys.ensemble, &sys.resonator, s);
        rows.push(ValidityRow {
            label: a.label.clone(),
            g_n_hz_over_2pi: hz_over_2pi(cqed_core::params::collective_g(&sys.ensemble, &sys.resonator)),
            gamma_l_hz_over_2pi: hz_over_2pi(sys.ensemble.gamma_l_collective()),
            nu_fsr_hz: sys.resonator.nu_fsr(),
            ratio_g_fsr: rep.ratio_g_fsr,
            ratio_loss_fsr: rep.ratio_loss_fsr,
            printed_g_over_fsr: None,
            printed_loss_ratio: None,
            beta_n_product: Some(rep.beta_n_product),
            optical_depth: Some(rep.optical_depth),
            coupling_below_fsr: rep.verdicts.coupling_below_fsr,
            loss_below_fsr: rep.verdicts.loss_below_fsr,
            beta_n_below_fsr_bound: Some(rep.verdicts.beta_n_below_fsr_bound),
            beta_n_below_loss_bound: Some(rep.verdicts.beta_n_below_loss_bound),
        });
    }
    if rows.is_empty() {
        return Err(input_error(
            "--no-survey without a custom system leaves nothing to report",
        ));
    }
    run.parameters(&ValidityRun {
        strictness: s,
        survey: !a.no_survey,
        custom: custom.as_ref(),
    })?;
    match g.format {
        Format::Csv => run.emit(".csv", |w| {
            let mut out = csv::Writer::from_writer(w);
            for row in &rows {
                out.serialize(row)?;
            }
            out.flush()?;
            Ok(())
        })?,
        Format::Json => run.emit(".json", |w| write_json(w, &rows))?,
    }
    run.finish()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Median of the top 10 % of the signal
    TopDecileMedian,
    Max,
}

impl From<Baseline> for BaselineMethod {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::TopDecileMedian => BaselineMethod::TopDecileMedian,
            Baseline::Max => BaselineMethod::Max,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Measured spectrum with `probe_detuning_hz,signal` rows
    pub input: PathBuf,
    /// Input is raw counts; divide by a baseline before fitting
    #[arg(long)]
    pub raw: bool,
    #[arg(long, value_enum, default_value_t = Baseline::TopDecileMedian)]
    pub baseline: Baseline,
    /// γ/2π in MHz
    #[arg(long, default_value_t = 2.61)]
    pub gamma_mhz: f64,
    /// ν_FSR in MHz
    #[arg(long, default_value_t = 7.1)]
    pub fsr_mhz: f64,
    /// Per-emitter β of the power-law model
    #[arg(long, default_value_t = 0.005)]
    pub beta: f64,
    /// Initial βN
    #[arg(long, default_value_t = 10.0)]
    pub beta_n: f64,
    /// Initial Δ_ca/2π in MHz
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta_ca_mhz: f64,
    /// Roundtrip amplitude transmission, critical coupling at 5 % loss by default
    #[arg(long)]
    pub t_rt: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Initial amplitude scale
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Initial frequency offset in MHz
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub offset_mhz: f64,
    /// Fit t_rt and r as well
    #[arg(long)]
    pub free_mirrors: bool,
    #[arg(long, default_value_t = 20_000)]
    pub max_evaluations: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
}

#[derive(Serialize)]
struct FitReport<'a> {
    #[serde(flatten)]
    result: &'a FitResult,
    /// `g_N/2π` implied by the fitted βN
    coupling_hz_over_2pi: f64,
    /// `2 (g_N/2π) / ν_FSR`
    splitting_over_fsr: f64,
}

#[derive(Serialize)]
struct FitRun<'a> {
    raw_input: bool,
    baseline_method: Option<BaselineMethod>,
    baseline: Option<f64>,
    setup: &'a FitSetup,
}

pub fn fit(g: &GlobalArgs, a: FitArgs) -> CmdResult {
    let mut run = Run::new("fit", &g.out_dir, g.prefix.as_deref())?;
    run.input(&a.input);
    let norm = if a.raw {
        Normalization::Raw
    } else {
        Normalization::Normalized
    };
    let mut data = read_measured_file(&a.input, norm)?;
    if a.raw {
        data = normalize_spectrum(&data, a.baseline.into())?;
    }
    let model = FitModel {
        gamma: angular(a.gamma_mhz * MHZ),
        nu_fsr: a.fsr_mhz * MHZ,
        beta: a.beta,
    };
    let exp = fiber_ring();
    let initial = FitParams {
        beta_n_product: a.beta_n,
        delta_ca: angular(a.delta_ca_mhz * MHZ),
        t_rt: a.t_rt.unwrap_or(exp.resonator.t_rt()),
        r: a.r.unwrap_or(exp.resonator.r()),
        amplitude_scale: a.scale,
        frequency_offset: a.offset_mhz * MHZ,
    };
    let mut setup = FitSetup::new(model, initial);
    if a.free_mirrors {
        setup.fixed.clear();
    }
    setup.max_evaluations = a.max_evaluations;
    setup.restarts = a.restarts;
    setup.seed = g.seed;

    let result = fit_spectrum(&data, &setup)?;
    if !result.converged {
        run.warn(format!("fit did not converge within {} evaluations", a.max_evaluations));
    }
    let g_n = (2.0 * result.estimates.beta_n_product * model.gamma * model.nu_fsr).sqrt();
    let report = FitReport {
        result: &result,
        coupling_hz_over_2pi: hz_over_2pi(g_n),
        splitting_over_fsr: 2.0 * hz_over_2pi(g_n) / model.nu_fsr,
    };
    let curve = model.curve(&result.estimates, &data.detuning_hz)?;

    run.parameters(&FitRun {
        raw_input: a.raw,
        baseline_method: data.baseline_method,
        baseline: data.baseline,
        setup: &setup,
    })?;
    run.emit(".json", |w| write_json(w, &report))?;
    match g.format {
        Format::Csv => run.emit("_curve.csv", |w| write_model_curve_csv(w, &data, &curve))?,
        Format::Json => {
            let table = Table {
                columns: &MODEL_CURVE_HEADER,
                rows: data
                    .detuning_hz
                    .iter()
                    .zip(&data.signal)
                    .zip(&curve)
                    .map(|((x, y), m)| [*x, *y, *m])
                    .collect(),
            };
            run.emit("_curve.json", |w| write_json(w, &table))?
        }
    }
    run.finish()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[command(subcommand)]
    pub what: Conversion,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conversion {
    /// Roundtrip amplitudes t_rt, r to loss rates κ_0/2π, κ_ext/2π
    Rates {
        #[arg(long)]
        t_rt: f64,
        #[arg(long)]
        r: f64,
        /// ν_FSR in MHz
        #[arg(long)]
        fsr_mhz: f64,
    },
    /// Loss rates κ_0/2π, κ_ext/2π (MHz) to roundtrip amplitudes
    Mirrors {
        #[arg(long)]
        kappa0_mhz: f64,
        #[arg(long)]
        kappa_ext_mhz: f64,
        #[arg(long)]
        fsr_mhz: f64,
    },
    /// β (and N) to the single-emitter and collective coupling g/2π
    Coupling {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        gamma_mhz: f64,
        #[arg(long)]
        fsr_mhz: f64,
        #[arg(long, value_enum, default_value_t = GeometryArg::Ring)]
        geometry: GeometryArg,
    },
    /// Single-emitter coupling g/2π (MHz) to β
    Beta {
        #[arg(long)]
        g_mhz: f64,
        #[arg(long)]
        gamma_mhz: f64,
        #[arg(long)]
        fsr_mhz: f64,
        #[arg(long, value_enum, default_value_t = GeometryArg::Ring)]
        geometry: GeometryArg,
    },
}

fn conversion(c: &Conversion) -> cqed_core::Result<Vec<(&'static str, f64)>> {
    Ok(match *c {
        Conversion::Rates { t_rt, r, fsr_mhz } => {
            ResonatorConfig::new(fsr_mhz * MHZ, t_rt, r, Geometry::Ring)?;
            vec![
                (
                    "kappa0_hz_over_2pi",
                    hz_over_2pi(kappa_from_amplitude(t_rt, fsr_mhz * MHZ)),
                ),
                (
                    "kappa_ext_hz_over_2pi",
                    hz_over_2pi(kappa_from_amplitude(r, fsr_mhz * MHZ)),
                ),
            ]
        }
        Conversion::Mirrors {
            kappa0_mhz,
            kappa_ext_mhz,
            fsr_mhz,
        } => vec![
            ("t_rt", amplitude_from_kappa(angular(kappa0_mhz * MHZ), fsr_mhz * MHZ)?),
            ("r", amplitude_from_kappa(angular(kappa_ext_mhz * MHZ), fsr_mhz * MHZ)?),
        ],
        Conversion::Coupling {
            beta,
            n,
            gamma_mhz,
            fsr_mhz,
            geometry,
        } => {
            let (gamma, nu) = (angular(gamma_mhz * MHZ), fsr_mhz * MHZ);
            let g1 = g_from_beta(beta, gamma, nu, geometry.into())?;
            vec![
                ("g_hz_over_2pi", hz_over_2pi(g1)),
                ("g_n_hz_over_2pi", hz_over_2pi(g1 * (n as f64).sqrt())),
                ("beta_n_product", beta * n as f64),
                ("g_max_hz_over_2pi", hz_over_2pi(g_max(gamma, nu)?)),
            ]
        }
        Conversion::Beta {
            g_mhz,
            gamma_mhz,
            fsr_mhz,
            geometry,
        } => vec![(
            "beta",
            beta_from_g(
                angular(g_mhz * MHZ),
                angular(gamma_mhz * MHZ),
                fsr_mhz * MHZ,
                geometry.into(),
            )?,
        )],
    })
}

pub fn convert(g: &GlobalArgs, a: ConvertArgs) -> CmdResult {
    let mut run = Run::new("convert", &g.out_dir, g.prefix.as_deref())?;
    let values = conversion(&a.what)?;
    for (k, v) in &values {
        eprintln!("{k} = {v:?}");
    }
    run.parameters(&a.what)?;
    match g.format {
        Format::Csv => run.emit(".csv", |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["quantity", "value"])?;
            for (k, v) in &values {
                out.write_record([k.to_string(), cqed_core::io::fmt_f64(*v)])?;
            }
            out.flush()?;
            Ok(())
        })?,
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                values.iter().map(|(k, v)| (k.to_string(), (*v).into())).collect();
            run.emit(".json", |w| write_json(w, &map))?
        }
    }
    run.finish()?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    /// Number of random instances
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    /// Largest accepted |R_dense − R_closed|; exceeding it exits with status 3
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Serialize)]
struct OracleRun<'a> {
    seed: u64,
    #[serde(flatten)]
    args: &'a OracleArgs,
}

pub fn oracle_check(g: &GlobalArgs, a: OracleArgs) -> CmdResult {
    let mut run = Run::new("oracle-check", &g.out_dir, g.prefix.as_deref())?;
    let report = run_oracle_check(a.instances, g.seed)?;
    if report.skipped > 0 {
        run.warn(format!("{} instances skipped as singular", report.skipped));
    }
    run.parameters(&OracleRun { seed: g.seed, args: &a })?;
    run.emit(".json", |w| write_json(w, &report))?;
    run.finish()?;
    eprintln!("{} instances, max |ΔR| = {:e}", report.instances, report.max_abs_error);
    if !(report.max_abs_error < a.tolerance) {
        return Err(Failure::Numerical(format!(
            "max |ΔR| = {:e} is not below {:e}",
            report.max_abs_error, a.tolerance
        )));
    }
    Ok(())
}
