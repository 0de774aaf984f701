use std::path::Path;

use nvphot::ellipsoid_optics::table1::{to_csv as table1_csv, to_text as table1_text};
use nvphot::ensemble_sim::{
    matching_suspension, power_ladder, sample_ensemble, synthesize_observations, true_beta, SyntheticCrystal,
};
use nvphot::rate_model::{
    alpha_from_contrast, bracket_bounds, detected_rate_at_flux, max_detected_rate, odmr_contrast,
    odmr_contrast_ratio, quantum_yield_from_saturation, saturation_intensity, short_pulse_population, steady_state,
    BracketCorrection, OdmrData, QuantumYieldInput, ALPHA_EQUILIBRIUM,
};
use nvphot::sizing::{
    apply_irradiance_correction, compare_distributions, density_mode, fit_records, records_from_rows,
    size_distribution, CrystalRecord, Histogram, IrradianceMap, IrradianceProfile, Weighting,
};
use nvphot::spectra::{
    radiative_rate_from_spectra, spectral_quantities, thermodynamic_consistency, Spectrum, SpectrumKind,
    SyntheticBands,
};
use nvphot::{coupling_factors, table1_report, Ellipsoid, OpticalEnvironment};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, Assignment, BeamModel, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{FileDigest, Manifest, OutputDir};
use crate::table::{self, fmt_f64, fmt_opt, Column, Table};
use crate::{
    Cli, Command, CompareDlsArgs, FitSatArgs, Format, Medium, OdmrArgs, PulseArgs, QyArgs, RatesArgs,
    ShapeFactorsArgs, SimulateArgs, SizingArgs, SpectraArgs,
};

/// Mixed into the ensemble seed so that measurement noise does not reuse the
/// streams that drew the crystals.
const OBSERVATION_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::ShapeFactors(_) => "shape-factors",
        Command::Table1 => "table1",
        Command::Rates(_) => "rates",
        Command::Qy(_) => "qy",
        Command::Odmr(_) => "odmr",
        Command::Pulse(_) => "pulse",
        Command::SpectraKr(_) => "spectra-kr",
        Command::FitSat(_) => "fit-sat",
        Command::Sizing(_) => "sizing",
        Command::CompareDls(_) => "compare-dls",
        Command::Simulate(_) => "simulate",
    }
}

struct Context {
    command: &'static str,
    config: RunConfig,
    sources: Vec<String>,
    inputs: Vec<FileDigest>,
    out: OutputDir,
    formats: Vec<Format>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut assignments: Vec<Assignment> = Vec::new();
        if let Some(path) = &cli.config {
            let bytes = read_file(path)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| CliError::input(format!("{}: not UTF-8 text", path.display())))?;
            assignments.extend(config::parse_config_text(&text, &path.display().to_string())?);
            inputs.push(FileDigest::new("config", &path.display().to_string(), &bytes));
        }
        for s in &cli.sets {
            assignments.push(config::parse_override(s)?);
        }
        if let Command::Simulate(a) = &cli.command {
            let flags = [
                ("ensemble.crystal_count", a.crystals.map(Value::from), "--crystals"),
                ("ensemble.seed", a.seed.map(Value::from), "--seed"),
            ];
            for (key, value, flag) in flags {
                if let Some(value) = value {
                    assignments.push(Assignment {
                        key: key.into(),
                        value,
                        origin: flag.into(),
                    });
                }
            }
        }
        let config = config::resolve(&assignments)?;
        let sources = assignments
            .iter()
            .map(|a| format!("{}: {} = {}", a.origin, a.key, a.value))
            .collect();
        Ok(Self {
            command: command_name(&cli.command),
            config,
            sources,
            inputs,
            out: OutputDir::create(&cli.out_dir)?,
            formats: cli.format.clone(),
        })
    }

    fn read_table(&mut self, role: &str, path: &Path, schema: &[Column]) -> Result<Table> {
        let (t, bytes) = table::read_table(path, schema)?;
        self.inputs.push(FileDigest::new(role, &path.display().to_string(), &bytes));
        Ok(t)
    }

    fn emit(&mut self, format: Format, name: &str, data: &[u8]) -> Result<()> {
        if self.formats.contains(&format) {
            self.out.write(name, data)?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.formats.contains(&Format::Json) {
            self.out.write_json(name, value)?;
        }
        Ok(())
    }

    /// Prints a report on stdout and writes it as JSON.
    fn report(&mut self, name: &str, value: &Value) -> Result<()> {
        stdout(&pretty(value));
        self.json(name, value)
    }

    fn beam_profile(&mut self) -> Result<IrradianceProfile> {
        let beam = self.config.beam.clone();
        let map = match (beam.model, &beam.map_csv) {
            (BeamModel::Tabulated, Some(path)) => {
                let t = self.read_table("irradiance_map", path, table::IRRADIANCE_MAP)?;
                Some(IrradianceMap::from_points(&table::irradiance_points(&t)?)?)
            }
            _ => None,
        };
        beam.profile(map)
    }

    /// Reads observations, applies the beam profile and fits every crystal.
    fn fitted_records(&mut self, path: &Path) -> Result<(Vec<CrystalRecord>, IrradianceProfile)> {
        let t = self.read_table("observations", path, table::OBSERVATIONS)?;
        let rows = table::observations(&t)?;
        let profile = self.beam_profile()?;
        let mut records = apply_irradiance_correction(&records_from_rows(&rows), &profile)?;
        fit_records(&mut records, self.config.weighting);
        Ok((records, profile))
    }

    fn finish(self) -> Result<()> {
        let manifest = Manifest {
            tool: "nvphot",
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: nvphot::VERSION,
            command: self.command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            config_sources: self.sources,
            config: serde_json::to_value(&self.config).expect("config serializes"),
            inputs: self.inputs,
            outputs: Vec::new(),
        };
        self.out.finish(manifest)
    }
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes to stdout, ignoring a closed pipe.
fn stdout(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::input(format!("{name} must be positive, got {v}")))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut ctx = Context::new(cli)?;
    match &cli.command {
        Command::ShapeFactors(a) => shape_factors(&mut ctx, a)?,
        Command::Table1 => table1(&mut ctx)?,
        Command::Rates(a) => rates(&mut ctx, a)?,
        Command::Qy(a) => qy(&mut ctx, a)?,
        Command::Odmr(a) => odmr(&mut ctx, a)?,
        Command::Pulse(a) => pulse(&mut ctx, a)?,
        Command::SpectraKr(a) => spectra_kr(&mut ctx, a)?,
        Command::FitSat(a) => fit_sat(&mut ctx, a)?,
        Command::Sizing(a) => sizing(&mut ctx, a)?,
        Command::CompareDls(a) => compare_dls(&mut ctx, a)?,
        Command::Simulate(a) => simulate(&mut ctx, a)?,
    }
    ctx.finish()
}

fn shape_factors(ctx: &mut Context, a: &ShapeFactorsArgs) -> Result<()> {
    let [x, y, z] = a.axes[..] else {
        return Err(CliError::input(format!(
            "--axes needs exactly three values, got {}",
            a.axes.len()
        )));
    };
    let env = match a.medium {
        Some(Medium::Air) => OpticalEnvironment::air(),
        Some(Medium::Water) => OpticalEnvironment::water(),
        Some(Medium::Glass) => OpticalEnvironment::on_glass(),
        None => ctx.config.environment,
    };
    let shape = Ellipsoid::new(x, y, z)?;
    let fc = coupling_factors(&shape, &env)?;
    let report = json!({
        "axes": [x, y, z],
        "environment": env,
        "n_rel": fc.n_rel,
        "delta": fc.deltas.as_array(),
        "delta_sum": fc.deltas.sum(),
        "eta": fc.eta,
        "absorption": fc.absorption,
        "absorption_avg": fc.absorption_avg(),
        "emission": fc.emission,
        "emission_avg": fc.emission_avg(),
        "substrate_absorption_factor": fc.substrate_absorption_factor,
        "substrate_emission_factor": fc.substrate_emission_factor,
        "absorption_effective": fc.absorption_effective(),
        "emission_effective": fc.emission_effective(),
        "thermodynamic_residual": thermodynamic_consistency(&shape, &env)?,
    });
    ctx.report("shape_factors.json", &report)
}

fn table1(ctx: &mut Context) -> Result<()> {
    let sections = table1_report();
    stdout(&table1_text(&sections));
    ctx.emit(Format::Csv, "table1.csv", table1_csv(&sections).as_bytes())?;
    ctx.json("table1.json", &sections)
}

fn rates(ctx: &mut Context, a: &RatesArgs) -> Result<()> {
    let params = ctx.config.photophysics;
    let det = ctx.config.detection;
    let mut exc = ctx.config.excitation;
    if let Some(i) = a.intensity_kw_cm2 {
        exc.intensity_kw_cm2 = i;
    }
    det.validate()?;
    let populations = steady_state(&params, &exc)?;
    let i_s = saturation_intensity(&params, &exc)?;
    let p_s = a
        .beam_area_cm2
        .map(|area| positive("--beam-area-cm2", area).map(|area| i_s * area * 1e3))
        .transpose()?;
    let report = json!({
        "photophysics": params,
        "excitation": exc,
        "detection": det,
        "phi_det": det.phi_det(),
        "quantum_yield": params.quantum_yield(),
        "populations": populations,
        "max_detected_rate_mhz": max_detected_rate(&params, &det)?,
        "detected_rate_mhz": detected_rate_at_flux(&params, &det, exc.photon_flux())?,
        "saturation_intensity_kw_cm2": i_s,
        "beam_area_cm2": a.beam_area_cm2,
        "saturation_power_w": p_s,
        "odmr_contrast": odmr_contrast(&params, params.alpha).ok(),
    });
    ctx.report("rates.json", &report)
}

fn qy(ctx: &mut Context, a: &QyArgs) -> Result<()> {
    let cfg = &ctx.config;
    let correction = match (a.alpha, a.kts_over_k) {
        (Some(alpha), Some(kts_over_k)) => Some(BracketCorrection { alpha, kts_over_k }),
        _ => None,
    };
    let input = QuantumYieldInput {
        saturation_intensity_kw_cm2: a.is_kw_cm2,
        max_detected_rate_mhz: a.rate_mhz,
        phi_det: a.phi_det.unwrap_or_else(|| cfg.detection.phi_det()),
        sigma_cm2: a.sigma_cm2.unwrap_or(cfg.photophysics.sigma_cm2),
        wavelength_nm: a.wavelength_nm.unwrap_or(cfg.excitation.wavelength_nm),
        correction,
    };
    let estimate = quantum_yield_from_saturation(&input)?;
    let report = json!({
        "input": input,
        "estimate": estimate,
        "bracket_bounds": a.kts_over_k.map(bracket_bounds),
    });
    ctx.report("qy.json", &report)
}

fn odmr(ctx: &mut Context, a: &OdmrArgs) -> Result<()> {
    let p = ctx.config.photophysics;
    let k_over_kts = a.k_over_kts.unwrap_or(p.k_mhz() / p.k_ts_mhz);
    if !(k_over_kts.is_finite() && k_over_kts >= 0.0) {
        return Err(CliError::input(format!("k/k_TS must be finite and non-negative, got {k_over_kts}")));
    }
    let report = match a.contrast {
        Some(contrast) => {
            let est = alpha_from_contrast(&OdmrData { contrast, k_over_kts })?;
            json!({
                "contrast": contrast,
                "k_over_kts": k_over_kts,
                "alpha": est.alpha,
                "physical": est.physical,
                "round_trip_contrast": odmr_contrast_ratio(k_over_kts, est.alpha),
            })
        }
        None => {
            let alpha = a.alpha.unwrap_or(p.alpha);
            if !(0.0..=ALPHA_EQUILIBRIUM).contains(&alpha) {
                return Err(CliError::input(format!("alpha must lie in [0, 2/3], got {alpha}")));
            }
            json!({
                "alpha": alpha,
                "k_over_kts": k_over_kts,
                "contrast": odmr_contrast_ratio(k_over_kts, alpha),
            })
        }
    };
    ctx.report("odmr.json", &report)
}

fn pulse(ctx: &mut Context, a: &PulseArgs) -> Result<()> {
    let p = ctx.config.photophysics;
    let fluence = a.fluence_cm2.unwrap_or(ctx.config.excitation.pulse_fluence_cm2);
    let sigma = a.sigma_cm2.unwrap_or(p.sigma_cm2);
    let sigma_prime = a.sigma_prime_cm2.unwrap_or(p.sigma_prime_cm2);
    let r = short_pulse_population(fluence, sigma, sigma_prime)?;
    let total = sigma + sigma_prime;
    let report = json!({
        "fluence_cm2": fluence,
        "sigma_cm2": sigma,
        "sigma_prime_cm2": sigma_prime,
        "rho_closed_form": r.rho_closed_form,
        "rho_ode": r.rho_ode,
        "difference": r.rho_closed_form - r.rho_ode,
        "asymptote_closed_form": if total > 0.0 { 1.0 } else { 0.0 },
        "asymptote_ode": if total > 0.0 { sigma / total } else { 0.0 },
    });
    ctx.report("pulse.json", &report)
}

fn load_spectrum(ctx: &mut Context, role: &str, path: &Path, kind: SpectrumKind) -> Result<Spectrum> {
    let t = ctx.read_table(role, path, table::SPECTRUM)?;
    let (samples, wavelength) = table::spectrum_samples(&t)?;
    let s = if wavelength {
        Spectrum::from_wavelength_samples(kind, &samples)
    } else {
        Spectrum::new(kind, &samples)
    };
    s.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn spectra_kr(ctx: &mut Context, a: &SpectraArgs) -> Result<()> {
    let (absorption, luminescence, bands) = match (&a.absorption, &a.luminescence) {
        (Some(ap), Some(lp)) if !a.synthetic => (
            load_spectrum(ctx, "absorption", ap, SpectrumKind::AbsorptionShape)?,
            load_spectrum(ctx, "luminescence", lp, SpectrumKind::LuminescenceDensity)?,
            None,
        ),
        _ => {
            let b = SyntheticBands::nv_like();
            let (abs, lum) = b.spectra();
            (abs, lum, Some(b))
        }
    };
    let cfg = &ctx.config;
    let sigma_max = cfg.spectra.sigma_max_cm2.unwrap_or(cfg.photophysics.sigma_cm2);
    let n = cfg.spectra.refractive_index.unwrap_or(cfg.environment.n_crystal);
    let q = spectral_quantities(&absorption, &luminescence, sigma_max, cfg.spectra.degeneracy_ratio)?;
    let rate = radiative_rate_from_spectra(&q, n)?;
    let report = json!({
        "source": if bands.is_some() { "synthetic" } else { "files" },
        "synthetic_bands": bands,
        "sigma_max_cm2": q.sigma_max_cm2,
        "degeneracy_ratio": q.degeneracy_ratio,
        "refractive_index": rate.refractive_index,
        "mean_inv_cubed_cm3": q.mean_inv_cubed_cm3,
        "absorption_integral": q.absorption_integral,
        "prefactor_per_s_cm2": rate.prefactor,
        "mirror_symmetry": q.mirror_symmetry,
        "k_r_mhz": rate.k_r_mhz,
    });
    ctx.report("spectra_kr.json", &report)
}

const FIT_COLUMNS: [&str; 12] = [
    "crystal_id",
    "x_um",
    "y_um",
    "irradiance_rel",
    "points",
    "r_det_Hz",
    "r_det_err_Hz",
    "p_s_W",
    "p_s_err_W",
    "chi_square",
    "low_confidence",
    "error",
];

fn fits_csv(records: &[CrystalRecord]) -> Vec<u8> {
    let headers: Vec<String> = FIT_COLUMNS.iter().map(|s| s.to_string()).collect();
    table::write_csv(
        &headers,
        records.iter().map(|r| {
            let f = r.fit.as_ref();
            vec![
                r.id.clone(),
                fmt_f64(r.x_um),
                fmt_f64(r.y_um),
                fmt_f64(r.irradiance_factor),
                r.samples.len().to_string(),
                fmt_opt(f.map(|f| f.r_det)),
                fmt_opt(f.map(|f| f.r_det_std_err)),
                fmt_opt(f.map(|f| f.p_s)),
                fmt_opt(f.map(|f| f.p_s_std_err)),
                fmt_opt(f.map(|f| f.chi_square)),
                f.map(|f| f.low_confidence.to_string()).unwrap_or_default(),
                r.fit_error.clone().unwrap_or_default(),
            ]
        }),
    )
}

fn weighting_name(w: Weighting) -> &'static str {
    match w {
        Weighting::Unweighted => "unweighted",
        Weighting::Poisson => "poisson",
    }
}

fn fit_sat(ctx: &mut Context, a: &FitSatArgs) -> Result<()> {
    let (records, profile) = ctx.fitted_records(&a.obs)?;
    let p_s: Vec<f64> = records.iter().filter_map(|r| r.fit.map(|f| f.p_s)).collect();
    if p_s.is_empty() {
        let first = records.iter().find_map(|r| r.fit_error.clone()).unwrap_or_default();
        return Err(CliError::Numerical(format!("no crystal could be fitted ({first})")));
    }
    let summary = json!({
        "weighting": weighting_name(ctx.config.weighting),
        "beam": profile,
        "crystals": records.len(),
        "fitted": p_s.len(),
        "failed": records.len() - p_s.len(),
        "p_s_w": nvphot::numeric::mean_std(&p_s),
    });
    stdout(&pretty(&summary));
    ctx.emit(Format::Csv, "fits.csv", &fits_csv(&records))?;
    ctx.json("fits.json", &json!({ "summary": summary, "records": records }))?;
    ctx.emit(Format::Svg, "saturation.svg", svg_saturation(&records).as_bytes())
}

fn svg_saturation(records: &[CrystalRecord]) -> String {
    crate::svg::saturation(records)
}

fn histogram_csv(h: &Histogram) -> Vec<u8> {
    let headers = ["bin_lo_nm", "bin_hi_nm", "count"].map(String::from);
    table::write_csv(
        &headers,
        h.counts
            .iter()
            .enumerate()
            .map(|(i, c)| vec![fmt_f64(h.edges[i]), fmt_f64(h.edges[i + 1]), fmt_f64(*c)]),
    )
}

fn read_dls(ctx: &mut Context, path: &Path) -> Result<Histogram> {
    let t = ctx.read_table("dls", path, table::DLS)?;
    let points = table::weighted_diameters(&t, table::DLS)?;
    Ok(Histogram::from_weighted(&points, &ctx.config.sizing.binning)?)
}

fn sizing(ctx: &mut Context, a: &SizingArgs) -> Result<()> {
    let (records, profile) = ctx.fitted_records(&a.obs)?;
    let cfg = ctx.config.clone();
    let res = size_distribution(&records, &cfg.suspension, &cfg.detection, &cfg.sizing)?;
    let dls = a.dls.as_ref().map(|p| read_dls(ctx, p)).transpose()?;
    let comparison = dls
        .as_ref()
        .map(|d| compare_distributions(&res.histogram, d))
        .transpose()?;
    let summary = json!({
        "beta_hz_nm3": res.beta_hz_nm3,
        "beta_absolute": res.beta_absolute,
        "phi_det": res.phi_det,
        "total_volume_nm3": res.total_volume_nm3,
        "sized_crystals": res.crystals.len(),
        "excluded_crystals": res.excluded.len(),
        "diameter_mode_nm": density_mode(&res.diameters()),
        "histogram_mode_nm": res.histogram.mode(),
        "comparison": comparison,
    });
    stdout(&pretty(&summary));
    let report = json!({
        "summary": summary,
        "suspension": cfg.suspension,
        "detection": cfg.detection,
        "weighting": weighting_name(cfg.weighting),
        "beam": profile,
        "rdet_mode": cfg.sizing.rdet_mode,
        "excluded": res.excluded,
        "histogram": res.histogram,
        "dls_histogram": dls,
    });
    ctx.json("sizing.json", &report)?;

    let headers: Vec<String> = table::SIZED.iter().map(Column::header).collect();
    let rows = res.crystals.iter().map(|c| {
        vec![
            c.id.clone(),
            fmt_f64(c.r_det_hz),
            fmt_opt(c.p_s_w),
            fmt_f64(c.volume_nm3),
            fmt_f64(c.diameter_nm),
        ]
    });
    ctx.emit(Format::Csv, "crystals.csv", &table::write_csv(&headers, rows))?;
    ctx.emit(Format::Csv, "fits.csv", &fits_csv(&records))?;
    ctx.emit(Format::Csv, "histogram.csv", &histogram_csv(&res.histogram))?;
    if let Some(d) = &dls {
        ctx.emit(Format::Csv, "dls_histogram.csv", &histogram_csv(d))?;
    }
    let mut series = vec![("luminescence", &res.histogram)];
    if let Some(d) = &dls {
        series.push(("DLS", d));
    }
    let plot = crate::svg::histograms(&series, "diameter (nm)");
    ctx.emit(Format::Svg, "histogram.svg", plot.as_bytes())?;
    ctx.emit(Format::Svg, "saturation.svg", svg_saturation(&records).as_bytes())
}

fn compare_dls(ctx: &mut Context, a: &CompareDlsArgs) -> Result<()> {
    let t = ctx.read_table("diameters", &a.diameters, table::SIZED)?;
    let points = table::weighted_diameters(&t, table::SIZED)?;
    let lum = Histogram::from_weighted(&points, &ctx.config.sizing.binning)?;
    let dls = read_dls(ctx, &a.dls)?;
    let comparison = compare_distributions(&lum, &dls)?;
    let diameters: Vec<f64> = points.iter().map(|p| p.0).collect();
    let report = json!({
        "comparison": comparison,
        "luminescence_kde_mode_nm": density_mode(&diameters),
        "binning": ctx.config.sizing.binning,
        "luminescence_histogram": lum,
        "dls_histogram": dls,
    });
    ctx.report("comparison.json", &report)?;
    let plot = crate::svg::histograms(&[("luminescence", &lum), ("DLS", &dls)], "diameter (nm)");
    ctx.emit(Format::Svg, "comparison.svg", plot.as_bytes())
}

const TRUTH_COLUMNS: [&str; 21] = [
    "crystal_id",
    "axis_a_nm",
    "axis_b_nm",
    "axis_c_nm",
    "q_w",
    "q_x",
    "q_y",
    "q_z",
    "x_um",
    "y_um",
    "nv_count",
    "absorption_factor",
    "emission_factor",
    "single_dipole_emission_factor",
    "k_r_MHz",
    "sigma_cm2",
    "r_det_Hz",
    "p_s_W",
    "volume_nm3",
    "diameter_nm",
    "bright",
];

fn truth_csv(crystals: &[SyntheticCrystal]) -> Vec<u8> {
    let headers: Vec<String> = TRUTH_COLUMNS.iter().map(|s| s.to_string()).collect();
    table::write_csv(
        &headers,
        crystals.iter().map(|c| {
            let mut row = vec![c.id.clone()];
            row.extend(c.axes_nm.iter().map(|v| fmt_f64(*v)));
            row.extend(c.orientation.iter().map(|v| fmt_f64(*v)));
            row.extend([c.x_um, c.y_um].map(fmt_f64));
            row.push(c.nv_count.to_string());
            row.extend(
                [
                    c.absorption_factor,
                    c.emission_factor,
                    c.single_dipole_emission_factor,
                    c.k_r_mhz,
                    c.sigma_cm2,
                    c.r_det_hz,
                    c.p_s_w,
                    c.volume_nm3,
                    c.diameter_nm,
                ]
                .map(fmt_f64),
            );
            row.push(c.is_bright().to_string());
            row
        }),
    )
}

fn simulate(ctx: &mut Context, _: &SimulateArgs) -> Result<()> {
    let cfg = ctx.config.clone();
    let acq = &cfg.acquisition;
    let crystals = sample_ensemble(&cfg.ensemble)?;
    let powers = match &acq.powers_w {
        Some(p) => p.clone(),
        None => {
            positive("acquisition.power_lo_factor", acq.power_lo_factor)?;
            positive("acquisition.power_hi_factor", acq.power_hi_factor)?;
            power_ladder(&crystals, acq.power_count, acq.power_lo_factor, acq.power_hi_factor)
        }
    };
    if powers.is_empty() {
        return Err(CliError::input(
            "no excitation powers: the batch has no bright crystal or acquisition.power_count is 0",
        ));
    }
    let profile = ctx.beam_profile()?;
    let obs_seed = cfg.ensemble.seed ^ OBSERVATION_SEED_SALT;
    let rows = synthesize_observations(&crystals, &profile, &powers, acq.dwell_s, obs_seed)?;
    let suspension = matching_suspension(&crystals, acq.drop_volume_ml, cfg.suspension.density_g_cm3);
    suspension.validate()?;
    let bright = crystals.iter().filter(|c| c.is_bright()).count();

    let summary = json!({
        "crystals": crystals.len(),
        "bright_crystals": bright,
        "observations": rows.len(),
        "true_beta_hz_nm3": true_beta(&crystals),
        "total_volume_nm3": suspension.total_volume_nm3(),
    });
    stdout(&pretty(&summary));

    ctx.emit(Format::Csv, "sim_obs.csv", &table::observations_csv(&rows))?;
    ctx.emit(Format::Csv, "sim_truth.csv", &truth_csv(&crystals))?;
    let dls_headers = ["diameter_nm", "weight"].map(String::from);
    let dls_rows = crystals.iter().map(|c| vec![fmt_f64(c.diameter_nm), "1".to_string()]);
    ctx.emit(Format::Csv, "sim_dls.csv", &table::write_csv(&dls_headers, dls_rows))?;
    ctx.json(
        "sim_config.json",
        &json!({
            "summary": summary,
            "ensemble": cfg.ensemble,
            "acquisition": acq,
            "beam": profile,
            "powers_w": powers,
            "observation_seed": obs_seed,
            "suspension": suspension,
        }),
    )?;

    let drop = json!({
        "suspension": suspension,
        "detection": cfg.ensemble.detection,
        "beam": cfg.beam,
        "weighting": if acq.dwell_s.is_some() { Weighting::Poisson } else { Weighting::Unweighted },
    });
    let text = format!(
        "# Drop and instrument settings matching the simulated batch\n{}",
        config::flatten(&drop)
    );
    ctx.out.write("drop.cfg", text.as_bytes())
}
