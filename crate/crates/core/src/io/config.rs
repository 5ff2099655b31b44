//! TOML run configuration. Every key is optional; unknown keys are errors.
//!
//! ```toml
//! seed = 42
//!
//! [bath]
//! n_f_ppm = 16.0          # fluctuator concentration
//! gamma_f_mhz = 3.3       # fluctuator rate / 2π
//! w_mhz = 9.0             # inhomogeneous FWHM / 2π
//! r_inner_nm = 0.5
//! # r_outer_nm = 40.0     # omitted: chosen from tail_fraction
//! tail_fraction = 1e-3
//! group_weights = [0.25, 0.25, 0.25, 0.25]
//! probe_group = "B"
//! disorder = "pair_difference"   # or "single_gaussian"
//!
//! [decay]       # delta_mhz, t_min_us, t_max_us, points, n_configs, bootstrap, eta_samples, amplitude_fixed
//! [resonance]   # delta_min_mhz, delta_max_mhz, points, far_delta_mhz, samples
//! [spinlock]    # omega_mhz = [...], delta_mhz, samples, mode = "ideal" | "full"
//! [kinetics]    # gamma1_khz, gamma2_khz, t_max_us, points, stretched
//! [oracle]      # r_nm = [...], detuning_mhz = [...], pairing = "same" | "partner", t_max_us
//! [charge]      # a_nm, t_hop_ns, depletion_amp, depletion_width_nm, surplus_width_nm,
//!               # surplus_amp (omitted: balanced), n, pitch_nm, t_max_us, points, snapshots_us
//! [fit]         # model, amplitude_fixed, normalization = "earliest" | "late", late_points, resonance_samples
//! [output]      # dir
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bath::{BathParams, DisorderConvention, SpinLockMode};
use crate::error::{Error, Result};
use crate::units::{ppm_to_density, AngularFrequency, Length, NvAxis};

use super::readout::Normalization;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub bath: BathSection,
    pub decay: DecaySection,
    pub resonance: ResonanceSection,
    pub spinlock: SpinLockSection,
    pub kinetics: KineticsSection,
    pub oracle: OracleSection,
    pub charge: ChargeSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathSection {
    pub n_f_ppm: f64,
    pub gamma_f_mhz: f64,
    pub w_mhz: f64,
    pub r_inner_nm: f64,
    pub r_outer_nm: Option<f64>,
    pub tail_fraction: f64,
    pub group_weights: [f64; 4],
    pub probe_group: NvAxis,
    pub disorder: DisorderConvention,
}

impl Default for BathSection {
    fn default() -> Self {
        BathSection {
            n_f_ppm: 16.0,
            gamma_f_mhz: 3.3,
            w_mhz: 9.0,
            r_inner_nm: 0.5,
            r_outer_nm: None,
            tail_fraction: 1e-3,
            group_weights: [0.25; 4],
            probe_group: NvAxis::B,
            disorder: DisorderConvention::PairDifference,
        }
    }
}

impl BathSection {
    /// Bath parameters with `r_outer_nm`, or 40 nm as a placeholder when the
    /// cutoff is left to the adaptive rule.
    pub fn params(&self) -> Result<BathParams> {
        let p = BathParams {
            n_f: ppm_to_density(self.n_f_ppm)?,
            gamma_f: AngularFrequency::from_mhz(self.gamma_f_mhz),
            w: AngularFrequency::from_mhz(self.w_mhz),
            r_inner: Length(self.r_inner_nm),
            r_outer: Length(self.r_outer_nm.unwrap_or(40.0)),
            group_weights: self.group_weights,
            probe_group: self.probe_group,
            disorder: self.disorder,
        };
        p.validate().map_err(|e| Error::config(format!("[bath]: {e}")))?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub delta_mhz: f64,
    pub t_min_us: f64,
    pub t_max_us: f64,
    pub points: usize,
    pub n_configs: usize,
    pub bootstrap: usize,
    pub eta_samples: usize,
    pub amplitude_fixed: Option<f64>,
}

impl Default for DecaySection {
    fn default() -> Self {
        DecaySection {
            delta_mhz: 0.0,
            t_min_us: 0.1,
            t_max_us: 1000.0,
            points: 60,
            n_configs: 10_000,
            bootstrap: 200,
            eta_samples: 200_000,
            amplitude_fixed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceSection {
    pub delta_min_mhz: f64,
    pub delta_max_mhz: f64,
    pub points: usize,
    /// Detuning treated as "far" for the enhancement ratio.
    pub far_delta_mhz: f64,
    pub samples: usize,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        ResonanceSection {
            delta_min_mhz: -60.0,
            delta_max_mhz: 60.0,
            points: 61,
            far_delta_mhz: 1000.0,
            samples: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinLockSection {
    pub omega_mhz: Vec<f64>,
    pub delta_mhz: f64,
    pub samples: usize,
    pub mode: SpinLockMode,
}

impl Default for SpinLockSection {
    fn default() -> Self {
        SpinLockSection {
            omega_mhz: vec![1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0],
            delta_mhz: 0.0,
            samples: 200_000,
            mode: SpinLockMode::Ideal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticsSection {
    pub gamma1_khz: f64,
    pub gamma2_khz: f64,
    pub t_max_us: f64,
    pub points: usize,
    pub stretched: bool,
}

impl Default for KineticsSection {
    fn default() -> Self {
        KineticsSection {
            gamma1_khz: 10.6,
            gamma2_khz: 1.1,
            t_max_us: 1000.0,
            points: 101,
            stretched: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OraclePairing {
    #[default]
    Same,
    Partner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub r_nm: Vec<f64>,
    pub detuning_mhz: Vec<f64>,
    pub pairing: OraclePairing,
    /// Propagation window; omitted: chosen from the golden-rule rate.
    pub t_max_us: Option<f64>,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            r_nm: vec![6.0, 7.0, 8.0],
            detuning_mhz: vec![0.0, 2.0, 5.0],
            pairing: OraclePairing::Same,
            t_max_us: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargeSection {
    pub a_nm: f64,
    pub t_hop_ns: f64,
    pub depletion_amp: f64,
    pub depletion_width_nm: f64,
    pub surplus_width_nm: f64,
    pub surplus_amp: Option<f64>,
    pub n: usize,
    pub pitch_nm: f64,
    pub t_max_us: f64,
    pub points: usize,
    pub snapshots_us: Vec<f64>,
}

impl Default for ChargeSection {
    fn default() -> Self {
        ChargeSection {
            a_nm: 5.0,
            t_hop_ns: 10.0,
            depletion_amp: 1.0,
            depletion_width_nm: 800.0,
            surplus_width_nm: 1600.0,
            surplus_amp: None,
            n: 161,
            pitch_nm: 100.0,
            t_max_us: 300.0,
            points: 61,
            snapshots_us: Vec::new(),
        }
    }
}

impl ChargeSection {
    pub fn profile(&self) -> crate::charge::ProfileParams {
        use crate::charge::{ProfileParams, SurplusAmplitude};
        ProfileParams {
            depletion_amp: self.depletion_amp,
            depletion_width: self.depletion_width_nm,
            surplus_amp: self.surplus_amp.map_or(SurplusAmplitude::Balanced, SurplusAmplitude::Value),
            surplus_width: self.surplus_width_nm,
            n: self.n,
            pitch: self.pitch_nm,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    #[default]
    Stretched,
    Lorentzian,
    RatePair,
    Resonance,
    HopTime,
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "stretched" => Ok(FitModel::Stretched),
            "lorentzian" => Ok(FitModel::Lorentzian),
            "rate_pair" => Ok(FitModel::RatePair),
            "resonance" => Ok(FitModel::Resonance),
            "hop_time" => Ok(FitModel::HopTime),
            other => Err(Error::config(format!("unknown fit model '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub model: FitModel,
    pub amplitude_fixed: Option<f64>,
    pub normalization: Normalization,
    pub late_points: usize,
    pub resonance_samples: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            model: FitModel::Stretched,
            amplitude_fixed: None,
            normalization: Normalization::Earliest,
            late_points: 3,
            resonance_samples: 200_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// The configuration with output locations removed; this is what gets
    /// echoed and hashed, so relocating a run does not change its outputs.
    pub fn resolved(&self) -> RunConfig {
        RunConfig {
            output: OutputSection::default(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        let p = c.bath.params().unwrap();
        assert!((p.n_f.ppm() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sed = 1").is_err());
        assert!(RunConfig::from_toml("[bath]\nnf_ppm = 3").is_err());
        assert!(RunConfig::from_toml("[nonsense]").is_err());
    }

    #[test]
    fn parses_enums_and_overrides() {
        let c = RunConfig::from_toml(
            "seed = 9\n[bath]\nprobe_group = \"C\"\ndisorder = \"single_gaussian\"\nr_outer_nm = 30\n[spinlock]\nmode = \"full\"\n[fit]\nmodel = \"hop_time\"\nnormalization = \"late\"",
        )
        .unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.bath.probe_group, NvAxis::C);
        assert_eq!(c.spinlock.mode, SpinLockMode::Full);
        assert_eq!(c.fit.model, FitModel::HopTime);
        assert_eq!(c.fit.normalization, Normalization::Late);
        assert_eq!(c.bath.params().unwrap().r_outer, Length(30.0));
    }

    #[test]
    fn invalid_bath_is_config_error() {
        let c = RunConfig::from_toml("[bath]\ngroup_weights = [1, 1, 0, 0]").unwrap();
        assert_eq!(c.bath.params().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn resolved_drops_output() {
        let c = RunConfig::from_toml("[output]\ndir = \"x\"").unwrap();
        assert_eq!(c.resolved(), RunConfig::default());
    }
}
