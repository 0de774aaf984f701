//! Physical constants and unit conversions shared across modules.

/// Planck constant times the speed of light, J·m.
pub const HC_J_M: f64 = 1.98645e-25;

/// Speed of light in cm/s.
pub const SPEED_OF_LIGHT_CM_S: f64 = 2.997_924_58e10;

/// Refractive index of diamond in the visible.
pub const N_DIAMOND: f64 = 2.42;

/// Refractive index of water.
pub const N_WATER: f64 = 1.33;

/// Refractive index of a typical glass or fused-silica substrate.
pub const N_GLASS: f64 = 1.46;

/// Density of diamond, g/cm³.
pub const DIAMOND_DENSITY_G_CM3: f64 = 3.5;

/// Default excitation wavelength, nm.
pub const DEFAULT_WAVELENGTH_NM: f64 = 532.0;

/// Cubic nanometres per cubic centimetre.
pub const NM3_PER_CM3: f64 = 1e21;

/// Hertz per megahertz.
pub const HZ_PER_MHZ: f64 = 1e6;

/// Energy of one photon at `wavelength_nm`, in joules.
pub fn photon_energy_j(wavelength_nm: f64) -> f64 {
    HC_J_M / (wavelength_nm * 1e-9)
}

/// Converts a power density in kW/cm² to a photon flux in photons·s⁻¹·cm⁻².
pub fn kw_cm2_to_photon_flux(intensity_kw_cm2: f64, wavelength_nm: f64) -> f64 {
    intensity_kw_cm2 * 1e3 / photon_energy_j(wavelength_nm)
}

/// Converts a photon flux in photons·s⁻¹·cm⁻² to a power density in kW/cm².
pub fn photon_flux_to_kw_cm2(flux: f64, wavelength_nm: f64) -> f64 {
    flux * photon_energy_j(wavelength_nm) * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn photon_energy_at_532() {
        // hc/λ = 1.98645e-25 / 532e-9
        assert!((photon_energy_j(532.0) - 3.733_929_5e-19).abs() < 1e-25);
    }

    #[test]
    fn flux_round_trip() {
        let flux = kw_cm2_to_photon_flux(70.0, 532.0);
        assert!((photon_flux_to_kw_cm2(flux, 532.0) - 70.0).abs() < 1e-12);
    }
}
