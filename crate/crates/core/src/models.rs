//! Preset noise models for the two-qubit device.

use serde::{Deserialize, Serialize};

use crate::channels::{ConfusionMatrix, PauliChannel};
use crate::error::{Error, Result};
use crate::simulator::{GateKey, NoiseModel};

/// Readout bit-flip probabilities used by the out-of-model presets.
pub const READOUT_FLIP: [f64; 2] = [0.02, 0.05];
/// Initialization bit-flip probabilities used by the out-of-model presets.
pub const PREP_FLIP: [f64; 2] = [0.019, 0.024];

/// `(p_I, [p_X, p_Y, p_Z])` for `√X₀, √X₁, S₀, S₁`.
const ONE_QUBIT_TABLE: [(GateKey, f64, [f64; 3]); 4] = [
    (GateKey::SqrtX(0), 0.998, [1.28e-5, 1.65e-3, 1.40e-4]),
    (GateKey::SqrtX(1), 0.997, [1.52e-4, 2.00e-3, 1.02e-3]),
    (GateKey::S(0), 0.999, [1.12e-3, 3.15e-4, 1.09e-4]),
    (GateKey::S(1), 0.998, [1.07e-3, 4.29e-4, 9.93e-4]),
];

/// CZ `p_II` and the 15 non-identity rates in canonical order IX … ZZ.
const CZ_IDENTITY: f64 = 0.974;
const CZ_TABLE: [f64; 15] = [
    1.12e-5, 1.90e-4, 3.45e-3, // IX IY IZ
    2.52e-6, 1.23e-4, 4.53e-4, 1.95e-3, // XI XX XY XZ
    1.66e-5, 4.08e-3, 1.05e-4, 7.74e-4, // YI YX YY YZ
    7.73e-5, 7.24e-3, 7.06e-3, 3.70e-5, // ZI ZX ZY ZZ
];

/// Measured-device gate model: asymmetric depolarizing channels on every
/// gate, ideal SPAM.
///
/// The published rows do not sum exactly to one; each keeps its identity
/// probability and the non-identity rates are rescaled to fill the rest, so
/// the CZ average fidelity is exactly `(4·0.974 + 1)/5 = 0.9792`.
pub fn device_table() -> NoiseModel {
    let mut nm = NoiseModel::new(2).expect("two qubits");
    for (key, pi, rates) in ONE_QUBIT_TABLE {
        nm.set_gate(key, PauliChannel::from_table_row(1, pi, &rates).expect("table row"))
            .expect("table key");
    }
    nm.set_gate(
        GateKey::cz(0, 1),
        PauliChannel::from_table_row(2, CZ_IDENTITY, &CZ_TABLE).expect("table row"),
    )
    .expect("table key");
    nm
}

/// The four out-of-model benchmark scenarios built on [`device_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AppendixModel {
    /// Ideal preparation and readout.
    I,
    /// Symmetric readout bit flips.
    II,
    /// Initialization bit flips.
    III,
    /// Both.
    IV,
}

impl AppendixModel {
    pub const ALL: [AppendixModel; 4] = [
        AppendixModel::I,
        AppendixModel::II,
        AppendixModel::III,
        AppendixModel::IV,
    ];

    pub fn has_readout_error(self) -> bool {
        matches!(self, AppendixModel::II | AppendixModel::IV)
    }

    pub fn has_prep_error(self) -> bool {
        matches!(self, AppendixModel::III | AppendixModel::IV)
    }

    pub fn noise_model(self) -> NoiseModel {
        let mut nm = device_table();
        with_spam_errors(&mut nm, self.has_readout_error(), self.has_prep_error())
            .expect("preset values are valid");
        nm
    }

    pub fn name(self) -> &'static str {
        match self {
            AppendixModel::I => "I",
            AppendixModel::II => "II",
            AppendixModel::III => "III",
            AppendixModel::IV => "IV",
        }
    }
}

/// Adds the preset readout and/or initialization bit flips to a two-qubit
/// model.
pub fn with_spam_errors(nm: &mut NoiseModel, readout: bool, prep: bool) -> Result<()> {
    if nm.num_qubits() != 2 {
        return Err(Error::InvalidParameter(
            "preset SPAM errors are defined for two qubits".into(),
        ));
    }
    for q in 0..2 {
        if readout {
            nm.set_readout(q, ConfusionMatrix::bit_flip(READOUT_FLIP[q])?)?;
        }
        if prep {
            nm.set_prep_flip(q, PREP_FLIP[q])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::average_gate_fidelity;
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_model_has_33_parameters() {
        let nm = device_table();
        assert_eq!(nm.parameter_count(), 33);
        let cz = nm.gate(&GateKey::cz(0, 1)).unwrap();
        assert_abs_diff_eq!(average_gate_fidelity(cz), 0.9792, epsilon = 1e-12);
        assert_abs_diff_eq!(cz.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // ordering of the published rates is preserved
        let iz: crate::pauli::PauliString = "IZ".parse().unwrap();
        let zx: crate::pauli::PauliString = "ZX".parse().unwrap();
        assert!(cz.prob(&zx) > cz.prob(&iz));
    }

    #[test]
    fn appendix_models() {
        assert!(AppendixModel::I.noise_model().has_ideal_readout());
        let iv = AppendixModel::IV.noise_model();
        assert_eq!(iv.prep_flip(), &PREP_FLIP);
        assert_abs_diff_eq!(iv.readout()[1].get(0, 1), 0.05);
        let ii = AppendixModel::II.noise_model();
        assert_eq!(ii.prep_flip(), &[0.0, 0.0]);
    }
}
