//! Pointwise, deformed, and time-ordered products.
//!
//! All products share one engine. For each tuple of terms (one per operand)
//! the factor lists are concatenated, in operand order, into a word of
//! letters. Every partial matching that pairs letters of distinct operands
//! through an admissible channel is enumerated; a matching with c pairs
//! contributes one term carrying hbar^c, one propagator symbol per pair, the
//! surviving letters as factors, and a sign.
//!
//! The sign has two parts. The permutation part is the parity of bringing
//! each contracted pair together: pairs are processed in order of their
//! earlier letter, and each odd-odd pair picks up one factor of -1 per
//! not-yet-contracted odd letter strictly between its endpoints. The channel
//! part is a -1 per contraction on the psibar-first channel.

use super::coeff::Coeff;
use super::functional::{AlgebraError, Functional};
use super::model::{pair_channel, Channel, Grading, KernelKind, Model, Species};
use super::term::{FieldFactor, PropagatorSymbol, Term, VertexId};
use std::collections::BTreeMap;

/// Kernel kind per contraction channel. A product requires an entry for every
/// channel of the operands' model.
pub type KernelAssignment = BTreeMap<Channel, KernelKind>;

/// The same kind on every channel of the model.
pub fn uniform_assignment(model: Model, kind: KernelKind) -> KernelAssignment {
    model.channels().iter().map(|&c| (c, kind)).collect()
}

/// Pointwise (undeformed) product: factor lists concatenate, nothing
/// contracts.
pub fn pointwise_product(f: &Functional, g: &Functional) -> Result<Functional, AlgebraError> {
    expand(&[f, g], None, None)
}

/// Binary deformed product with an explicit kernel assignment.
pub fn star_product(
    f: &Functional,
    g: &Functional,
    assignment: &KernelAssignment,
) -> Result<Functional, AlgebraError> {
    expand(&[f, g], Some(assignment), None)
}

/// Deformed product with the two-point kernel on every channel (the default
/// quantum product).
pub fn star_h(f: &Functional, g: &Functional) -> Result<Functional, AlgebraError> {
    expand_uniform(&[f, g], KernelKind::TwoPoint, None)
}

/// n-ary time-ordered product: Feynman kernels on every pair of distinct
/// operands.
pub fn time_ordered_product(operands: &[&Functional]) -> Result<Functional, AlgebraError> {
    expand_uniform(operands, KernelKind::Feynman, None)
}

/// n-ary anti-time-ordered product: anti-Feynman kernels throughout.
pub fn anti_time_ordered_product(operands: &[&Functional]) -> Result<Functional, AlgebraError> {
    expand_uniform(operands, KernelKind::AntiFeynman, None)
}

/// Full engine: n-ary product with an explicit assignment and an optional
/// joint coupling-degree cutoff. Tuples over the cutoff are skipped before
/// their matchings are enumerated, which keeps truncated perturbative
/// expansions cheap.
pub fn deformed_product(
    operands: &[&Functional],
    assignment: &KernelAssignment,
    max_coupling_degree: Option<u32>,
) -> Result<Functional, AlgebraError> {
    expand(operands, Some(assignment), max_coupling_degree)
}

pub(crate) fn expand_uniform(
    operands: &[&Functional],
    kind: KernelKind,
    max_coupling_degree: Option<u32>,
) -> Result<Functional, AlgebraError> {
    let model = common_model(operands)?;
    let assignment = uniform_assignment(model, kind);
    expand(operands, Some(&assignment), max_coupling_degree)
}

fn common_model(operands: &[&Functional]) -> Result<Model, AlgebraError> {
    let first = operands.first().ok_or(AlgebraError::EmptyOperandList)?;
    let model = first.model();
    if operands.iter().any(|f| f.model() != model) {
        return Err(AlgebraError::MixedModels);
    }
    Ok(model)
}

/// One letter of the concatenated factor word.
#[derive(Clone, Copy)]
struct Letter {
    species: Species,
    vertex: VertexId,
    operand: usize,
}

/// One contraction: word positions `i < j`, the channel, and whether the
/// earlier letter is the kernel's first endpoint.
#[derive(Clone, Copy)]
struct Pairing {
    i: usize,
    j: usize,
    channel: Channel,
    left_first: bool,
}

fn expand(
    operands: &[&Functional],
    assignment: Option<&KernelAssignment>,
    max_coupling_degree: Option<u32>,
) -> Result<Functional, AlgebraError> {
    let model = common_model(operands)?;
    if let Some(a) = assignment {
        for &ch in model.channels() {
            if !a.contains_key(&ch) {
                return Err(AlgebraError::IncompleteAssignment(ch));
            }
        }
    }
    if operands.iter().any(|f| f.is_zero()) {
        return Ok(Functional::zero(model));
    }

    let mut out: Vec<Term> = Vec::new();
    let mut idx = vec![0usize; operands.len()];
    loop {
        let tuple: Vec<&Term> = idx
            .iter()
            .zip(operands)
            .map(|(&i, f)| &f.terms()[i])
            .collect();
        expand_tuple(&tuple, assignment, max_coupling_degree, &mut out);

        // Odometer over term indices, last operand fastest.
        let mut pos = operands.len();
        loop {
            if pos == 0 {
                return Ok(Functional::from_terms(model, out));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < operands[pos].term_count() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn expand_tuple(
    tuple: &[&Term],
    assignment: Option<&KernelAssignment>,
    max_coupling_degree: Option<u32>,
    out: &mut Vec<Term>,
) {
    if let Some(max) = max_coupling_degree {
        let degree: u32 = tuple.iter().map(|t| t.total_coupling_degree()).sum();
        if degree > max {
            return;
        }
    }

    // Merged skeleton shared by every matching of this tuple.
    let mut coeff = Coeff::one();
    let mut hbar = 0i64;
    let mut couplings: BTreeMap<_, u32> = BTreeMap::new();
    let mut vertices: Vec<String> = Vec::new();
    let mut kernels: Vec<PropagatorSymbol> = Vec::new();
    let mut word: Vec<Letter> = Vec::new();
    for (operand, t) in tuple.iter().enumerate() {
        let off = vertices.len() as VertexId;
        coeff *= &t.coeff;
        hbar += t.hbar;
        for (&c, &p) in &t.couplings {
            *couplings.entry(c).or_insert(0) += p;
        }
        vertices.extend(t.vertices.iter().cloned());
        kernels.extend(t.kernels.iter().map(|k| PropagatorSymbol {
            left: k.left + off,
            right: k.right + off,
            ..*k
        }));
        word.extend(t.factors.iter().map(|f| Letter {
            species: f.species,
            vertex: f.vertex + off,
            operand,
        }));
    }

    let mut emit = |pairs: &[Pairing]| {
        let mut contracted = vec![false; word.len()];
        let mut term_kernels = kernels.clone();
        let mut sign = matching_sign(&word, pairs);
        for p in pairs {
            contracted[p.i] = true;
            contracted[p.j] = true;
            if p.channel == Channel::DiracPsiBar {
                sign = -sign;
            }
            let (left, right) = if p.left_first {
                (word[p.i].vertex, word[p.j].vertex)
            } else {
                (word[p.j].vertex, word[p.i].vertex)
            };
            let kind = assignment.expect("pairs imply an assignment")[&p.channel];
            term_kernels.push(PropagatorSymbol { kind, channel: p.channel, left, right, power: 1 });
        }
        let factors: Vec<FieldFactor> = word
            .iter()
            .enumerate()
            .filter(|&(i, _)| !contracted[i])
            .map(|(_, l)| FieldFactor { species: l.species, vertex: l.vertex })
            .collect();
        out.push(Term {
            coeff: if sign < 0 { -coeff.clone() } else { coeff.clone() },
            hbar: hbar + pairs.len() as i64,
            couplings: couplings.clone(),
            vertices: vertices.clone(),
            factors,
            kernels: term_kernels,
        });
    };

    match assignment {
        None => emit(&[]),
        Some(_) => {
            let mut used = vec![false; word.len()];
            let mut pairs: Vec<Pairing> = Vec::new();
            enumerate_matchings(&word, &mut used, 0, &mut pairs, &mut emit);
        }
    }
}

/// Enumerates every partial matching exactly once. Each matching is keyed by
/// its pairs' earlier letters in increasing order: at the first unused letter
/// we branch between leaving it uncontracted forever and pairing it with each
/// admissible unused letter of a later operand.
fn enumerate_matchings(
    word: &[Letter],
    used: &mut Vec<bool>,
    start: usize,
    pairs: &mut Vec<Pairing>,
    emit: &mut dyn FnMut(&[Pairing]),
) {
    let mut i = start;
    while i < word.len() && used[i] {
        i += 1;
    }
    if i == word.len() {
        emit(pairs);
        return;
    }

    enumerate_matchings(word, used, i + 1, pairs, emit);

    used[i] = true;
    for j in (i + 1)..word.len() {
        if used[j] || word[j].operand == word[i].operand {
            continue;
        }
        if let Some((channel, left_first)) = pair_channel(word[i].species, word[j].species) {
            used[j] = true;
            pairs.push(Pairing { i, j, channel, left_first });
            enumerate_matchings(word, used, i + 1, pairs, emit);
            pairs.pop();
            used[j] = false;
        }
    }
    used[i] = false;
}

/// Permutation parity of a matching on the word. Pairs arrive ordered by
/// earlier endpoint; the later letter of each pair is moved leftward to sit
/// beside the earlier one, picking up -1 per still-alive odd letter it
/// crosses when it is odd itself, then both endpoints die. Even letters are
/// transparent throughout. Admissible channels only ever pair letters of
/// equal grading; the mixed-grading case follows the same moved-letter rule.
fn matching_sign(word: &[Letter], pairs: &[Pairing]) -> i32 {
    let mut alive = vec![true; word.len()];
    let mut sign = 1i32;
    for p in pairs {
        if word[p.j].species.grading() == Grading::Odd {
            let crossed = (p.i + 1..p.j)
                .filter(|&q| alive[q] && word[q].species.grading() == Grading::Odd)
                .count();
            if crossed % 2 == 1 {
                sign = -sign;
            }
        }
        alive[p.i] = false;
        alive[p.j] = false;
    }
    sign
}
