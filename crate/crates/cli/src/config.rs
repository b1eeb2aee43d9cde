//! Run configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use aces_core::aces::DesignPolicy;
use aces_core::channels::PauliChannel;
use aces_core::estimation::{FitMethod, FitOptions};
use aces_core::models::{device_table, AppendixModel};
use aces_core::simulator::{GateKey, NoiseModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    TwirlDemo,
    ConfusionDemo,
    AcesRun,
    AppendixModels,
    Rb,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::TwirlDemo => "twirl-demo",
            Preset::ConfusionDemo => "confusion-demo",
            Preset::AcesRun => "aces-run",
            Preset::AppendixModels => "appendix-models",
            Preset::Rb => "rb",
        }
    }
}

/// Where the planted noise model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSource {
    Noiseless {
        #[serde(default = "two")]
        qubits: usize,
    },
    /// The two-qubit device table, without SPAM errors.
    AppendixTable,
    /// The device table plus the preset readout and/or initialization flips.
    Appendix { model: AppendixModel },
    /// Two-qubit model in which only the CZ (an `IZ` flip) and the readout of
    /// qubit 1 (an `X` flip) are noisy, tuned so the twirled demo curve has
    /// amplitude `a1` after `n1` CZs and `a2` after `n2`.
    Decoherence { n1: usize, a1: f64, n2: usize, a2: f64 },
    /// Depolarizing channels with eigenvalue `lambda_1q` on every
    /// single-qubit gate and `lambda_cz` on CZ.
    Depolarizing { lambda_1q: f64, lambda_cz: f64 },
    File { path: PathBuf },
    Inline { model: NoiseModel },
}

fn two() -> usize {
    2
}

impl Default for NoiseSource {
    fn default() -> Self {
        NoiseSource::AppendixTable
    }
}

impl NoiseSource {
    pub fn build(&self) -> Result<NoiseModel> {
        Ok(match self {
            NoiseSource::Noiseless { qubits } => NoiseModel::noiseless(*qubits)?,
            NoiseSource::AppendixTable => device_table(),
            NoiseSource::Appendix { model } => model.noise_model(),
            NoiseSource::Decoherence { n1, a1, n2, a2 } => decoherence_model(*n1, *a1, *n2, *a2)?,
            NoiseSource::Depolarizing { lambda_1q, lambda_cz } => {
                depolarizing_model(*lambda_1q, *lambda_cz)?
            }
            NoiseSource::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("noise model {}: {e}", path.display())))?
            }
            NoiseSource::Inline { model } => model.clone(),
        })
    }
}

fn decoherence_model(n1: usize, a1: f64, n2: usize, a2: f64) -> Result<NoiseModel> {
    if n1 == n2 || !(a1 > 0.0 && a1 <= 1.0 && a2 > 0.0 && a2 <= 1.0) {
        return Err(CliError::Config(format!(
            "decoherence amplitudes need distinct depths and values in (0, 1], got ({n1}, {a1}), ({n2}, {a2})"
        )));
    }
    // A_N = a·λ^N with λ the per-CZ eigenvalue seen by the probe
    let lambda = (a2 / a1).powf(1.0 / (n2 as f64 - n1 as f64));
    let a = a1 / lambda.powi(n1 as i32);
    if !(lambda > 0.0 && lambda <= 1.0 && a <= 1.0) {
        return Err(CliError::Config(format!(
            "amplitudes imply eigenvalue {lambda} and readout contrast {a}, outside (0, 1]"
        )));
    }
    let mut nm = NoiseModel::noiseless(2)?;
    let mut rates = vec![0.0; 15];
    rates[2] = (1.0 - lambda) / 2.0; // IZ
    nm.set_gate(GateKey::cz(0, 1), PauliChannel::from_error_rates(2, &rates)?)?;
    nm.set_spam(1, PauliChannel::from_error_rates(1, &[(1.0 - a) / 2.0, 0.0, 0.0])?)?;
    Ok(nm)
}

fn depolarizing_model(lambda_1q: f64, lambda_cz: f64) -> Result<NoiseModel> {
    let mut nm = NoiseModel::new(2)?;
    let one = PauliChannel::depolarizing(1, (1.0 - lambda_1q) / 4.0)?;
    for q in 0..2 {
        nm.set_gate(GateKey::SqrtX(q), one.clone())?;
        nm.set_gate(GateKey::S(q), one.clone())?;
    }
    nm.set_gate(GateKey::cz(0, 1), PauliChannel::depolarizing(2, (1.0 - lambda_cz) / 16.0)?)?;
    Ok(nm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwirlParams {
    pub n_cz: Vec<usize>,
    pub points: usize,
    /// Largest injected angle; the grid runs from 0.
    pub theta_max: f64,
}

impl Default for TwirlParams {
    fn default() -> Self {
        TwirlParams {
            n_cz: vec![1, 11],
            points: 25,
            theta_max: std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReadoutSource {
    /// Amplitude damping during readout on one qubit.
    Damping { gamma: f64, beta: f64 },
    /// The preset per-qubit readout bit flips.
    AppendixBitFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfusionParams {
    pub readout: ReadoutSource,
}

impl Default for ConfusionParams {
    fn default() -> Self {
        ConfusionParams {
            readout: ReadoutSource::Damping { gamma: 0.1, beta: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcesParams {
    pub design: DesignPolicy,
    pub sets: usize,
    /// Shot counts for the residual study; the run's main shot count is used
    /// for fidelities and the injected-error sweep.
    pub residual_shots: Vec<u64>,
    /// Injected `Rz` angles as fractions of a full turn.
    pub injected_turns: Vec<f64>,
    pub method: FitMethod,
    pub fit: FitOptions,
    pub mitigate: bool,
    pub histogram_bins: usize,
}

impl Default for AcesParams {
    fn default() -> Self {
        AcesParams {
            design: DesignPolicy::default(),
            sets: 250,
            residual_shots: vec![100, 1_000, 10_000],
            injected_turns: vec![0.0, 0.06, 0.08],
            method: FitMethod::BoundConstrained,
            fit: FitOptions::default(),
            mitigate: true,
            histogram_bins: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppendixParams {
    pub design: DesignPolicy,
    pub sets: usize,
    pub shots: Vec<u64>,
    pub fit: FitOptions,
    /// Independent data sets for the optimizer comparison.
    pub comparison_repetitions: usize,
    pub comparison_shots: u64,
}

impl Default for AppendixParams {
    fn default() -> Self {
        AppendixParams {
            design: DesignPolicy::default(),
            sets: 250,
            shots: vec![100, 1_000, 10_000, 100_000],
            fit: FitOptions::default(),
            comparison_repetitions: 50,
            comparison_shots: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbParams {
    pub depths_1q: Vec<usize>,
    pub depths_2q: Vec<usize>,
    pub circuits_per_depth: usize,
}

impl Default for RbParams {
    fn default() -> Self {
        RbParams {
            depths_1q: vec![1, 10, 25, 50, 100, 200, 400],
            depths_2q: vec![1, 3, 6, 10, 15, 25, 40],
            circuits_per_depth: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<Preset>,
    pub noise: NoiseSource,
    pub seed: u64,
    pub shots: u64,
    pub output_dir: Option<PathBuf>,
    pub twirl: TwirlParams,
    pub confusion: ConfusionParams,
    pub aces: AcesParams,
    pub appendix: AppendixParams,
    pub rb: RbParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: None,
            noise: NoiseSource::default(),
            seed: 0,
            shots: 10_000,
            output_dir: None,
            twirl: TwirlParams::default(),
            confusion: ConfusionParams::default(),
            aces: AcesParams::default(),
            appendix: AppendixParams::default(),
            rb: RbParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `preset`: the device table everywhere except the twirl
    /// demo, which starts from a noiseless register, and RB, which uses
    /// 256 shots per sequence.
    pub fn for_preset(preset: Preset) -> Self {
        let mut cfg = ExperimentConfig {
            preset: Some(preset),
            ..Default::default()
        };
        match preset {
            Preset::TwirlDemo => cfg.noise = NoiseSource::Noiseless { qubits: 2 },
            Preset::Rb => cfg.shots = 256,
            _ => {}
        }
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks the config against the command it is used with.
    pub fn validate(&self, preset: Preset) -> Result<()> {
        if let Some(p) = self.preset {
            if p != preset {
                return Err(CliError::Config(format!(
                    "config is for preset {}, not {}",
                    p.name(),
                    preset.name()
                )));
            }
        }
        if self.shots == 0 {
            return Err(CliError::Config("shots must be positive".into()));
        }
        match preset {
            Preset::TwirlDemo => {
                if self.twirl.points < 2 || self.twirl.n_cz.is_empty() {
                    return Err(CliError::Config("twirl demo needs n_cz and at least two points".into()));
                }
            }
            Preset::AcesRun => {
                if self.aces.sets == 0 || self.aces.histogram_bins == 0 {
                    return Err(CliError::Config("aces run needs sets and histogram bins".into()));
                }
                if self.aces.residual_shots.contains(&0) {
                    return Err(CliError::Config("residual shot counts must be positive".into()));
                }
            }
            Preset::AppendixModels => {
                if self.appendix.sets == 0 || self.appendix.shots.len() < 2 || self.appendix.shots.contains(&0) {
                    return Err(CliError::Config(
                        "appendix study needs sets and at least two positive shot counts".into(),
                    ));
                }
            }
            Preset::Rb => {
                if self.rb.depths_1q.is_empty() || self.rb.depths_2q.is_empty() || self.rb.circuits_per_depth == 0 {
                    return Err(CliError::Config("rb needs depths and circuits".into()));
                }
            }
            Preset::ConfusionDemo => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = ExperimentConfig::for_preset(Preset::AcesRun);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_and_preset_mismatch_are_config_errors() {
        let e = ExperimentConfig::from_json(r#"{"shotz": 3}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let cfg = ExperimentConfig::from_json(r#"{"preset": "rb"}"#).unwrap();
        assert_eq!(cfg.validate(Preset::AcesRun).unwrap_err().exit_code(), 2);
        assert!(cfg.validate(Preset::Rb).is_ok());
    }

    #[test]
    fn decoherence_model_hits_amplitudes() {
        let nm = decoherence_model(1, 0.8, 11, 0.67).unwrap();
        let cz = nm.gate(&GateKey::cz(0, 1)).unwrap().eigenvalues();
        let lambda = cz[2 * 1]; // IY
        let a = nm.spam()[1].eigenvalues()[3];
        assert!((a * lambda - 0.8).abs() < 1e-12);
        assert!((a * lambda.powi(11) - 0.67).abs() < 1e-12);
    }
}
