mod commands;
mod config;
mod error;
mod output;
mod svg;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// NV-center photophysics in diamond nanocrystals: field factors, rate model,
/// spectra, and luminescence-based crystal sizing.
#[derive(Parser, Debug)]
#[command(name = "nvphot", version)]
pub struct Cli {
    /// Directory for reports and the run manifest
    #[arg(long, global = true, env = "NVPHOT_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// key = value configuration file with dotted keys
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Extra assignment applied after the config file (e.g. photophysics.alpha=0.1)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,

    /// Report formats to write
    #[arg(long, global = true, value_delimiter = ',', default_value = "json,csv,svg")]
    pub format: Vec<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Medium {
    Air,
    Water,
    /// In air, resting on a glass slide
    Glass,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Depolarization, shielding, absorption and emission factors of one ellipsoid
    ShapeFactors(ShapeFactorsArgs),
    /// Reference table of field factors for eight shapes in air and water
    Table1,
    /// Steady-state populations, saturated rate and saturation intensity
    Rates(RatesArgs),
    /// Quantum yield from a measured saturation curve
    Qy(QyArgs),
    /// ODMR contrast from alpha, or alpha from a measured contrast
    Odmr(OdmrArgs),
    /// Excited-triplet population after a short pulse
    Pulse(PulseArgs),
    /// Radiative rate from absorption and luminescence spectra
    SpectraKr(SpectraArgs),
    /// Fit saturation curves of every crystal in an observation file
    FitSat(FitSatArgs),
    /// Specific brightness and size distribution from saturation scans
    Sizing(SizingArgs),
    /// Compare a luminescence size distribution with a DLS distribution
    CompareDls(CompareDlsArgs),
    /// Seeded synthetic crystal batch with observations and ground truth
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
pub struct ShapeFactorsArgs {
    /// Semi-axes a,b,c (only ratios matter)
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub axes: Vec<f64>,
    /// Surrounding medium; defaults to the configured environment
    #[arg(long)]
    pub medium: Option<Medium>,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    /// Excitation intensity, kW/cm²
    #[arg(long)]
    pub intensity_kw_cm2: Option<f64>,
    /// Focal area converting the saturation intensity into a power, cm²
    #[arg(long)]
    pub beam_area_cm2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct QyArgs {
    /// Saturated detected rate, MHz
    #[arg(long)]
    pub rate_mhz: f64,
    /// Saturation intensity, kW/cm²
    #[arg(long)]
    pub is_kw_cm2: f64,
    /// Overall detection efficiency; defaults to the configured chain
    #[arg(long)]
    pub phi_det: Option<f64>,
    /// Absorption cross-section, cm²; defaults to the configured value
    #[arg(long)]
    pub sigma_cm2: Option<f64>,
    /// Excitation wavelength, nm
    #[arg(long)]
    pub wavelength_nm: Option<f64>,
    /// alpha for the bracket correction (needs --kts-over-k)
    #[arg(long, requires = "kts_over_k")]
    pub alpha: Option<f64>,
    /// k_TS / k for the bracket correction and its bounds
    #[arg(long)]
    pub kts_over_k: Option<f64>,
}

#[derive(Args, Debug)]
pub struct OdmrArgs {
    /// Measured relative contrast; inverted for alpha
    #[arg(long, conflicts_with = "alpha")]
    pub contrast: Option<f64>,
    /// Spin polarization; gives the expected contrast
    #[arg(long)]
    pub alpha: Option<f64>,
    /// k / k_TS; defaults to the configured photophysics
    #[arg(long)]
    pub k_over_kts: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PulseArgs {
    /// Photons per cm² in the pulse; defaults to excitation.pulse_fluence_cm2
    #[arg(long)]
    pub fluence_cm2: Option<f64>,
    #[arg(long)]
    pub sigma_cm2: Option<f64>,
    #[arg(long)]
    pub sigma_prime_cm2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SpectraArgs {
    /// Absorption band CSV (wavenumber_cm1 or wavelength_nm, value)
    #[arg(long, requires = "luminescence", required_unless_present = "synthetic")]
    pub absorption: Option<PathBuf>,
    /// Luminescence CSV (wavenumber_cm1 or wavelength_nm, value)
    #[arg(long)]
    pub luminescence: Option<PathBuf>,
    /// Use the bundled synthetic NV-like band pair
    #[arg(long, conflicts_with_all = ["absorption", "luminescence"])]
    pub synthetic: bool,
}

#[derive(Args, Debug)]
pub struct FitSatArgs {
    /// Observation CSV (crystal_id, x_um, y_um, power_W, rate_Hz[, dwell_s])
    #[arg(long)]
    pub obs: PathBuf,
}

#[derive(Args, Debug)]
pub struct SizingArgs {
    /// Observation CSV (crystal_id, x_um, y_um, power_W, rate_Hz[, dwell_s])
    #[arg(long)]
    pub obs: PathBuf,
    /// Optional DLS reference (diameter_nm, weight)
    #[arg(long)]
    pub dls: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareDlsArgs {
    /// Per-crystal sizing CSV with a diameter_nm column
    #[arg(long)]
    pub diameters: PathBuf,
    /// DLS reference (diameter_nm, weight)
    #[arg(long)]
    pub dls: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of crystals; overrides ensemble.crystal_count
    #[arg(long)]
    pub crystals: Option<usize>,
    /// RNG seed; overrides ensemble.seed
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
