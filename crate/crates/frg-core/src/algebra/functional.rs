//! Polynomial functionals: canonical sums of terms.
//!
//! A [`Functional`] owns a model tag and a list of canonicalized terms,
//! sorted by term key, with no zero coefficients. Every constructor and
//! operation restores this normal form, so structural equality is semantic
//! equality.

use super::coeff::Coeff;
use super::model::{Coupling, Model, Species};
use super::term::{FieldFactor, PropagatorSymbol, Term, TermKey};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlgebraError {
    #[error("species {species} does not belong to model {model}")]
    ModelMismatch { model: Model, species: Species },
    #[error("generator power must be at least 1")]
    InvalidPower,
    #[error("operands belong to different models")]
    MixedModels,
    #[error("propagator assignment is missing channel {0:?}")]
    IncompleteAssignment(super::model::Channel),
    #[error("operand list must not be empty")]
    EmptyOperandList,
    #[error("perturbation must carry at least one coupling power in every term")]
    NonPerturbativeVertex,
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("serialized functional is malformed: {0}")]
    Malformed(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Functional {
    model: Model,
    terms: Vec<Term>,
}

impl Functional {
    // ------------------------------------------------------------------
    // Constructors
    // ------------------------------------------------------------------

    /// The zero functional.
    pub fn zero(model: Model) -> Functional {
        Functional { model, terms: Vec::new() }
    }

    /// The multiplicative unit (constant 1, no vertex).
    pub fn unit(model: Model) -> Functional {
        Functional { model, terms: vec![Term::unit()] }
    }

    /// The smeared constant: a single vertex carrying `smearing`, no field
    /// factors. Multiplying by it only records the extra vertex.
    pub fn smeared_unit(model: Model, smearing: &str) -> Functional {
        let term = Term {
            vertices: vec![smearing.to_string()],
            ..Term::unit()
        };
        Functional::from_terms(model, vec![term])
    }

    /// Generator `species^power` smeared with `smearing`: `power` factors at
    /// one fresh vertex.
    pub fn generator(
        model: Model,
        species: Species,
        smearing: &str,
        power: u32,
    ) -> Result<Functional, AlgebraError> {
        Functional::monomial(model, &[(species, power)], smearing)
    }

    /// Multi-species monomial at a single vertex, e.g. `(phi1 phi2^2)[f]`.
    /// Factor order in the term follows the argument order, which matters for
    /// odd species.
    pub fn monomial(
        model: Model,
        entries: &[(Species, u32)],
        smearing: &str,
    ) -> Result<Functional, AlgebraError> {
        let mut total = 0u32;
        for &(species, power) in entries {
            if species.model() != model {
                return Err(AlgebraError::ModelMismatch { model, species });
            }
            total += power;
        }
        if total == 0 {
            return Err(AlgebraError::InvalidPower);
        }
        Ok(Functional::from_terms(model, vec![Term::monomial(entries, smearing)]))
    }

    /// Builds the canonical form from arbitrary terms. Terms failing
    /// validation are a programming error and panic; external inputs go
    /// through [`Functional::from_json`] which validates gracefully.
    pub fn from_terms<I: IntoIterator<Item = Term>>(model: Model, terms: I) -> Functional {
        let mut acc: BTreeMap<TermKey, Coeff> = BTreeMap::new();
        for term in terms {
            debug_assert!(term.validate(model).is_ok(), "invalid term for model {model}");
            if let Some((key, coeff)) = term.canonicalized() {
                let entry = acc.entry(key).or_insert_with(Coeff::zero);
                *entry += coeff;
            }
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| Term::from_key(k, c))
            .collect();
        Functional { model, terms }
    }

    // ------------------------------------------------------------------
    // Accessors
    // ------------------------------------------------------------------

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Largest total coupling degree over terms, `None` when zero.
    pub fn max_coupling_degree(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.total_coupling_degree()).max()
    }

    // ------------------------------------------------------------------
    // Linear structure
    // ------------------------------------------------------------------

    pub fn add(&self, other: &Functional) -> Functional {
        assert_eq!(self.model, other.model, "cannot add functionals of different models");
        Functional::from_terms(
            self.model,
            self.terms.iter().chain(other.terms.iter()).cloned(),
        )
    }

    pub fn sub(&self, other: &Functional) -> Functional {
        self.add(&other.scaled(&-Coeff::one()))
    }

    pub fn neg(&self) -> Functional {
        self.scaled(&-Coeff::one())
    }

    pub fn scaled(&self, c: &Coeff) -> Functional {
        if c.is_zero() {
            return Functional::zero(self.model);
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.coeff = &t.coeff * c;
                t
            })
            .collect();
        // Scaling preserves canonical form.
        Functional { model: self.model, terms }
    }

    /// Multiplies every term by `coupling^power`.
    pub fn with_coupling(&self, coupling: Coupling, power: u32) -> Functional {
        if power == 0 {
            return self.clone();
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                *t.couplings.entry(coupling).or_insert(0) += power;
                t
            })
            .collect();
        Functional { model: self.model, terms }
    }

    /// Multiplies every term by `hbar^power` (negative powers arise from
    /// expansion prefactors).
    pub fn with_hbar(&self, power: i64) -> Functional {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.hbar += power;
                t
            })
            .collect();
        Functional { model: self.model, terms }
    }

    // ------------------------------------------------------------------
    // Truncation and projections
    // ------------------------------------------------------------------

    /// Drops terms whose total coupling degree exceeds `order` (joint
    /// truncation in all coupling symbols).
    pub fn truncated(&self, order: u32) -> Functional {
        self.retain(|t| t.total_coupling_degree() <= order)
    }

    /// Joint truncation with an additional per-symbol cap.
    pub fn truncated_with_caps(&self, order: u32, caps: &BTreeMap<Coupling, u32>) -> Functional {
        self.retain(|t| {
            t.total_coupling_degree() <= order
                && t.couplings.iter().all(|(c, p)| caps.get(c).is_none_or(|cap| p <= cap))
        })
    }

    /// Terms of exact total coupling degree `degree`.
    pub fn coupling_component(&self, degree: u32) -> Functional {
        self.retain(|t| t.total_coupling_degree() == degree)
    }

    /// Keeps only terms with an empty factor list (fully contracted).
    pub fn vacuum_expectation(&self) -> Functional {
        self.retain(|t| t.factors.is_empty())
    }

    fn retain(&self, pred: impl Fn(&Term) -> bool) -> Functional {
        Functional {
            model: self.model,
            terms: self.terms.iter().filter(|t| pred(t)).cloned().collect(),
        }
    }

    /// Re-runs canonicalization. Idempotent; functionals built through the
    /// public constructors are already canonical, so this is the identity on
    /// them.
    pub fn canonicalize(&self) -> Functional {
        Functional::from_terms(self.model, self.terms.iter().cloned())
    }

    // ------------------------------------------------------------------
    // Serialization
    // ------------------------------------------------------------------

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("functional serialization cannot fail")
    }

    pub fn to_json_string_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("functional serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Functional, AlgebraError> {
        serde_json::from_value(value.clone()).map_err(|e| AlgebraError::Malformed(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    coeff: String,
    hbar: i64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    couplings: BTreeMap<Coupling, u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vertices: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    factors: Vec<FieldFactor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    kernels: Vec<PropagatorSymbol>,
}

#[derive(Serialize, Deserialize)]
struct FunctionalRepr {
    model: Model,
    terms: Vec<TermRepr>,
}

impl Serialize for Functional {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = FunctionalRepr {
            model: self.model,
            terms: self
                .terms
                .iter()
                .map(|t| TermRepr {
                    coeff: t.coeff.to_display_string(),
                    hbar: t.hbar,
                    couplings: t.couplings.clone(),
                    vertices: t.vertices.clone(),
                    factors: t.factors.clone(),
                    kernels: t.kernels.clone(),
                })
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Functional {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = FunctionalRepr::deserialize(deserializer)?;
        let mut terms = Vec::with_capacity(repr.terms.len());
        for t in repr.terms {
            let coeff: Coeff = t.coeff.parse().map_err(D::Error::custom)?;
            let term = Term {
                coeff,
                hbar: t.hbar,
                couplings: t.couplings,
                vertices: t.vertices,
                factors: t.factors,
                kernels: t.kernels,
            };
            term.validate(repr.model).map_err(D::Error::custom)?;
            terms.push(term);
        }
        Ok(Functional::from_terms(repr.model, terms))
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, "\n  + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
