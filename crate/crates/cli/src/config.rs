//! JSON configuration schema.
//!
//! Every frequency in a config file is an ordinary frequency (f = ω/2π) in
//! the unit named by its key suffix; [`Settings::to_device`] is the only
//! place where values are multiplied by 2π and turned into rad/s.
//!
//! ```json
//! {
//!   "qubits": [
//!     { "levels_ghz": [0, 5, 15, 18], "g_mhz": 100,
//!       "gamma_mhz": [0, 0, 0], "gamma_phi_mhz": [0, 0, 0] },
//!     { "levels_ghz": [0, 5, 15, 18], "g_mhz": 100 }
//!   ],
//!   "cavity": { "nu_ghz": 3, "Q": 10000, "n_max": 2 },
//!   "drive": { "omega_mhz": 300, "per_segment_omega": { "step2.pulse_a": 280 } },
//!   "mode": "sequential_ideal",
//!   "lindblad_dt_ns": null
//! }
//! ```
//!
//! `gamma_mhz[k]` is the relaxation rate of level `k + 1` into level `k` and
//! `gamma_phi_mhz[k]` the pure dephasing rate of level `k + 1`. Optional keys:
//! `decoherence_scale` (default 1), `guard_band_mhz` (default 500) and
//! `couple_idle_qubit` (default true).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fluxgate_core::dynamics::QubitDecoherence;
use fluxgate_core::protocol::{CavitySpec, DeviceConfig, Mode, QuditSpec, DEFAULT_GUARD_BAND};
use fluxgate_core::statespace::DEFAULT_N_MAX;
use fluxgate_core::TWO_PI;
use serde::{Deserialize, Serialize};

use crate::CliError;

const GHZ: f64 = 1e9;
const MHZ: f64 = 1e6;
const NS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSettings {
    pub levels_ghz: [f64; 4],
    pub g_mhz: f64,
    #[serde(default)]
    pub gamma_mhz: [f64; 3],
    #[serde(default)]
    pub gamma_phi_mhz: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySettings {
    pub nu_ghz: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSettings {
    pub omega_mhz: f64,
    #[serde(default)]
    pub per_segment_omega: BTreeMap<String, f64>,
}

/// A config file with every optional key resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub qubits: [QubitSettings; 2],
    pub cavity: CavitySettings,
    pub drive: DriveSettings,
    #[serde(default, with = "mode_name")]
    pub mode: Mode,
    #[serde(default)]
    pub lindblad_dt_ns: Option<f64>,
    #[serde(default = "one")]
    pub decoherence_scale: f64,
    #[serde(default = "default_guard_band_mhz")]
    pub guard_band_mhz: f64,
    #[serde(default = "yes")]
    pub couple_idle_qubit: bool,
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_guard_band_mhz() -> f64 {
    DEFAULT_GUARD_BAND / TWO_PI / MHZ
}

mod mode_name {
    use fluxgate_core::protocol::Mode;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(mode: &Mode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(mode.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mode, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(de::Error::custom)
    }
}

fn angular(hz: f64) -> f64 {
    TWO_PI * hz
}

impl Settings {
    /// The parameter set of the worked example: identical qubits with
    /// 5/10/3 GHz spacings, g = 100 MHz, Ω = 300 MHz, ν_c = 3 GHz, Q = 10⁴.
    pub fn paper_regime() -> Self {
        let qubit = QubitSettings {
            levels_ghz: [0.0, 5.0, 15.0, 18.0],
            g_mhz: 100.0,
            gamma_mhz: [0.0; 3],
            gamma_phi_mhz: [0.0; 3],
        };
        Self {
            qubits: [qubit.clone(), qubit],
            cavity: CavitySettings {
                nu_ghz: 3.0,
                q: 1e4,
                n_max: DEFAULT_N_MAX,
            },
            drive: DriveSettings {
                omega_mhz: 300.0,
                per_segment_omega: BTreeMap::new(),
            },
            mode: Mode::SequentialIdeal,
            lindblad_dt_ns: None,
            decoherence_scale: 1.0,
            guard_band_mhz: default_guard_band_mhz(),
            couple_idle_qubit: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Converts to internal units (rad/s, s). Does not validate.
    pub fn to_device(&self) -> DeviceConfig {
        let qubit = |q: &QubitSettings| QuditSpec {
            levels: q.levels_ghz.map(|f| angular(f * GHZ)),
            g: angular(q.g_mhz * MHZ),
            decoherence: QubitDecoherence {
                relaxation: q.gamma_mhz.map(|r| angular(r * MHZ)),
                dephasing: q.gamma_phi_mhz.map(|r| angular(r * MHZ)),
            },
        };
        DeviceConfig {
            qubits: [qubit(&self.qubits[0]), qubit(&self.qubits[1])],
            cavity: CavitySpec {
                frequency_hz: self.cavity.nu_ghz * GHZ,
                quality: self.cavity.q,
                n_max: self.cavity.n_max,
            },
            rabi: angular(self.drive.omega_mhz * MHZ),
            rabi_overrides: self
                .drive
                .per_segment_omega
                .iter()
                .map(|(label, &f)| (label.clone(), angular(f * MHZ)))
                .collect(),
            mode: self.mode,
            lindblad_dt: self.lindblad_dt_ns.map(|t| t * NS),
            decoherence_scale: self.decoherence_scale,
            guard_band: angular(self.guard_band_mhz * MHZ),
            couple_idle_qubit: self.couple_idle_qubit,
        }
    }

    /// Converted and validated device configuration.
    pub fn device(&self) -> Result<DeviceConfig, CliError> {
        let config = self.to_device();
        config
            .validate()
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        Ok(config)
    }

    /// Canonical compact JSON, the input of [`Settings::sha256`].
    pub fn canonical_json(&self) -> String {
        crate::report::to_json_compact(self)
    }

    pub fn sha256(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<(Settings, DeviceConfig), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let settings = Settings::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let device = settings
        .device()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    log::debug!("loaded {} (sha256 {})", path.display(), settings.sha256());
    Ok((settings, device))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "qubits": [
            { "levels_ghz": [0, 5, 15, 18], "g_mhz": 100 },
            { "levels_ghz": [0, 5, 15, 18], "g_mhz": 100 }
        ],
        "cavity": { "nu_ghz": 3, "Q": 10000 },
        "drive": { "omega_mhz": 300 }
    }"#;

    #[test]
    fn minimal_file_resolves_to_paper_regime() {
        let s = Settings::from_json(MINIMAL).unwrap();
        assert_eq!(s, Settings::paper_regime());
        assert_eq!(s.to_device(), DeviceConfig::paper_regime());
        s.device().unwrap();
    }

    #[test]
    fn resolved_settings_round_trip() {
        let mut s = Settings::paper_regime();
        s.mode = Mode::Lindblad;
        s.lindblad_dt_ns = Some(0.001);
        s.qubits[1].gamma_phi_mhz = [0.1, 0.2, 0.3];
        s.drive
            .per_segment_omega
            .insert("step1.pulse_a".into(), 250.0);
        let back = Settings::from_json(&s.canonical_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.sha256(), s.sha256());
    }

    #[test]
    fn conversion_is_angular() {
        let d = Settings::paper_regime().to_device();
        assert_eq!(d.rabi, TWO_PI * 300e6);
        assert_eq!(d.qubits[0].g, TWO_PI * 1e8);
        assert_eq!(d.cavity.frequency_hz, 3e9);
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = MINIMAL.replace("\"g_mhz\": 100 }", "\"g_mhz\": 100, \"g_hz\": 1 }");
        let err = Settings::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("g_hz") && err.contains("line 3"), "{err}");
    }

    #[test]
    fn detuned_cavity_is_rejected() {
        let mut s = Settings::paper_regime();
        s.cavity.nu_ghz = 2.9;
        let err = s.device().unwrap_err().to_string();
        assert!(err.contains("cavity off resonance"), "{err}");
    }

    #[test]
    fn negative_quality_is_a_domain_error() {
        let mut s = Settings::paper_regime();
        s.cavity.q = -10.0;
        let err = s.device().unwrap_err().to_string();
        assert!(err.contains("Q must be > 0"), "{err}");
    }

    #[test]
    fn mismatched_top_spacings_name_the_ratio() {
        let mut s = Settings::paper_regime();
        s.qubits[1].levels_ghz[3] = 18.0 + 3.6e-6;
        let err = s.device().unwrap_err().to_string();
        assert!(
            err.contains("spacings differ by 1.2e-6 relative; limit 1e-9"),
            "{err}"
        );
    }

    #[test]
    fn bad_mode_name() {
        let text = MINIMAL.replace("\"drive\"", "\"mode\": \"fast\", \"drive\"");
        let err = Settings::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("unknown mode"), "{err}");
    }
}
