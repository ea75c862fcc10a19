//! Field content of the three supported models.
//!
//! Every functional is tagged with a [`Model`]; mixing species across models is
//! a construction error. Contraction channels are the model's admissible
//! derivative pairings: equal species for the two-scalar model, the
//! field/response-field pairing for the MSR model, and the two directed
//! spinor/cospinor pairings for the Dirac model.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    TwoScalar,
    Msr,
    Dirac,
}

impl Model {
    /// Channels a complete propagator assignment must cover.
    pub fn channels(self) -> &'static [Channel] {
        match self {
            Model::TwoScalar => &[Channel::Scalar1, Channel::Scalar2],
            Model::Msr => &[Channel::MsrCross],
            Model::Dirac => &[Channel::DiracPsi, Channel::DiracPsiBar],
        }
    }

    pub fn species(self) -> &'static [Species] {
        match self {
            Model::TwoScalar => &[Species::Phi1, Species::Phi2],
            Model::Msr => &[Species::Phi, Species::PhiTilde],
            Model::Dirac => &[Species::Psi, Species::PsiBar],
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Model::TwoScalar => "two-scalar",
            Model::Msr => "msr",
            Model::Dirac => "dirac",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    Even,
    Odd,
}

/// Field species across all models. The derived `Ord` is the canonical
/// ordering used when sorting factors: phi1 < phi2, phi < phiTilde,
/// psi < psiBar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Phi1,
    Phi2,
    Phi,
    PhiTilde,
    Psi,
    PsiBar,
}

impl Species {
    pub fn model(self) -> Model {
        match self {
            Species::Phi1 | Species::Phi2 => Model::TwoScalar,
            Species::Phi | Species::PhiTilde => Model::Msr,
            Species::Psi | Species::PsiBar => Model::Dirac,
        }
    }

    pub fn grading(self) -> Grading {
        match self {
            Species::Psi | Species::PsiBar => Grading::Odd,
            _ => Grading::Even,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Phi1 => "phi1",
            Species::Phi2 => "phi2",
            Species::Phi => "phi",
            Species::PhiTilde => "phitilde",
            Species::Psi => "psi",
            Species::PsiBar => "psibar",
        }
    }

    /// Parses the names accepted in configuration files and observable
    /// expressions.
    pub fn parse(name: &str) -> Option<Species> {
        Some(match name {
            "phi1" => Species::Phi1,
            "phi2" => Species::Phi2,
            "phi" => Species::Phi,
            "phitilde" | "phi~" => Species::PhiTilde,
            "psi" => Species::Psi,
            "psibar" => Species::PsiBar,
            _ => return None,
        })
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Contraction channel of a propagator symbol.
///
/// For the directed channels the kernel's endpoint order is semantic:
/// * `MsrCross` kernels are written with the phi endpoint first and the
///   phitilde endpoint second, independently of operand order; this encodes
///   the symmetry of the deformed product under exchange of its arguments.
/// * `DiracPsi` kernels have the psi-derivative endpoint first (the
///   `psi`-family kernels of the deformation map); `DiracPsiBar` kernels have
///   the psibar-derivative endpoint first and carry a relative minus sign per
///   contraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "phi1")]
    Scalar1,
    #[serde(rename = "phi2")]
    Scalar2,
    #[serde(rename = "phi-phitilde")]
    MsrCross,
    #[serde(rename = "psi")]
    DiracPsi,
    #[serde(rename = "psibar")]
    DiracPsiBar,
}

impl Channel {
    pub fn model(self) -> Model {
        match self {
            Channel::Scalar1 | Channel::Scalar2 => Model::TwoScalar,
            Channel::MsrCross => Model::Msr,
            Channel::DiracPsi | Channel::DiracPsiBar => Model::Dirac,
        }
    }

    /// Whether kernels on this channel may have their endpoints sorted during
    /// canonicalization. Directed channels keep endpoint order.
    pub fn endpoints_sortable(self) -> bool {
        matches!(self, Channel::Scalar1 | Channel::Scalar2)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Channel::Scalar1 => "1",
            Channel::Scalar2 => "2",
            Channel::MsrCross => "",
            Channel::DiracPsi => "psi",
            Channel::DiracPsiBar => "psibar",
        };
        write!(f, "{s}")
    }
}

/// Propagator kind attached to a contraction. `TwoPoint` stands for the
/// two-point function / Hadamard parametrix family, `Feynman` and
/// `AntiFeynman` for the corresponding time-ordered variants. `Retarded` and
/// `Advanced` are part of the vocabulary for completeness; the product
/// assignments used here never emit them, and their endpoint order is always
/// kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    TwoPoint,
    Feynman,
    AntiFeynman,
    Retarded,
    Advanced,
}

impl KernelKind {
    /// Endpoint order is significant for retarded/advanced kernels regardless
    /// of channel.
    pub fn directed(self) -> bool {
        matches!(self, KernelKind::Retarded | KernelKind::Advanced)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelKind::TwoPoint => "H",
            KernelKind::Feynman => "H_F",
            KernelKind::AntiFeynman => "H_AF",
            KernelKind::Retarded => "D_R",
            KernelKind::Advanced => "D_A",
        };
        write!(f, "{s}")
    }
}

/// Coupling symbols. Couplings are opaque: terms track integer powers of them
/// and truncation is by joint (total) degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coupling {
    #[serde(rename = "lambda1")]
    Lambda1,
    #[serde(rename = "lambda2")]
    Lambda2,
    #[serde(rename = "lambda3")]
    Lambda3,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "D")]
    NoiseD,
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Coupling::Lambda1 => "lambda1",
            Coupling::Lambda2 => "lambda2",
            Coupling::Lambda3 => "lambda3",
            Coupling::Lambda => "lambda",
            Coupling::NoiseD => "D",
        };
        write!(f, "{s}")
    }
}

/// Channel selected by a (left-species, right-species) pair, if the model
/// admits that contraction. Returns the channel together with the endpoint
/// role of the left operand: `true` when the left vertex is the first kernel
/// endpoint.
pub fn pair_channel(left: Species, right: Species) -> Option<(Channel, bool)> {
    use Species::*;
    match (left, right) {
        (Phi1, Phi1) => Some((Channel::Scalar1, true)),
        (Phi2, Phi2) => Some((Channel::Scalar2, true)),
        // MSR kernels are written (phi endpoint, phitilde endpoint).
        (Phi, PhiTilde) => Some((Channel::MsrCross, true)),
        (PhiTilde, Phi) => Some((Channel::MsrCross, false)),
        // Dirac kernels are written with the derivative that names the family
        // first: psi-family (psi, psibar), psibar-family (psibar, psi).
        (Psi, PsiBar) => Some((Channel::DiracPsi, true)),
        (PsiBar, Psi) => Some((Channel::DiracPsiBar, true)),
        _ => None,
    }
}
