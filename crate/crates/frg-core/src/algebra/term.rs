//! Terms of polynomial functionals.
//!
//! A term is an exact coefficient together with a power of hbar, coupling
//! powers, a table of abstract vertices (each carrying a smearing label),
//! an ordered list of field factors attached to those vertices, and a
//! multiset of propagator symbols between vertices.
//!
//! Terms compare equal up to a relabeling of vertices and, for even factors,
//! a reordering of the factor list. [`Term::canonicalized`] computes a
//! canonical representative: vertices are relabeled deterministically (color
//! refinement plus exhaustive tie-breaking within color classes), factors are
//! stably sorted by (vertex, species) with the sign of the induced permutation
//! of odd factors tracked in the coefficient, and kernels are endpoint-ordered,
//! sorted and power-merged.

use super::coeff::Coeff;
use super::model::{Channel, Coupling, Grading, KernelKind, Model, Species};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub type VertexId = u32;

/// One field insertion at a vertex. The vertex's smearing label lives in the
/// term's vertex table, so two factors at the same vertex share their label by
/// construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldFactor {
    pub species: Species,
    pub vertex: VertexId,
}

/// A contraction kernel between two vertices, raised to an integer power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PropagatorSymbol {
    pub kind: KernelKind,
    pub channel: Channel,
    pub left: VertexId,
    pub right: VertexId,
    pub power: u32,
}

/// Canonical identity of a term, everything except the coefficient. Two terms
/// with equal keys are merged by adding coefficients.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub hbar: i64,
    pub couplings: Vec<(Coupling, u32)>,
    pub vertices: Vec<String>,
    pub factors: Vec<FieldFactor>,
    pub kernels: Vec<PropagatorSymbol>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: Coeff,
    pub hbar: i64,
    pub couplings: BTreeMap<Coupling, u32>,
    /// Smearing label per vertex; vertex ids index this table.
    pub vertices: Vec<String>,
    pub factors: Vec<FieldFactor>,
    pub kernels: Vec<PropagatorSymbol>,
}

impl Term {
    /// The multiplicative unit: no vertices, no factors, no kernels.
    pub fn unit() -> Term {
        Term {
            coeff: Coeff::one(),
            hbar: 0,
            couplings: BTreeMap::new(),
            vertices: Vec::new(),
            factors: Vec::new(),
            kernels: Vec::new(),
        }
    }

    /// Monomial with all factors at a single fresh vertex, listed in the given
    /// order.
    pub fn monomial(entries: &[(Species, u32)], smearing: &str) -> Term {
        let mut factors = Vec::new();
        for &(species, power) in entries {
            for _ in 0..power {
                factors.push(FieldFactor { species, vertex: 0 });
            }
        }
        Term {
            coeff: Coeff::one(),
            hbar: 0,
            couplings: BTreeMap::new(),
            vertices: vec![smearing.to_string()],
            factors,
            kernels: Vec::new(),
        }
    }

    pub fn total_coupling_degree(&self) -> u32 {
        self.couplings.values().sum()
    }

    pub fn total_kernel_power(&self) -> u32 {
        self.kernels.iter().map(|k| k.power).sum()
    }

    /// Number of odd-graded factors.
    pub fn odd_factor_count(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| f.species.grading() == Grading::Odd)
            .count()
    }

    /// Structural checks: species and channels belong to `model`, vertex
    /// references are in range, kernel powers are positive.
    pub fn validate(&self, model: Model) -> Result<(), String> {
        let n = self.vertices.len() as u32;
        for f in &self.factors {
            if f.species.model() != model {
                return Err(format!("species {} does not belong to model {}", f.species, model));
            }
            if f.vertex >= n {
                return Err(format!("factor vertex {} out of range", f.vertex));
            }
        }
        for k in &self.kernels {
            if k.channel.model() != model {
                return Err(format!("channel {:?} does not belong to model {}", k.channel, model));
            }
            if k.left >= n || k.right >= n {
                return Err("kernel endpoint out of range".into());
            }
            if k.power == 0 {
                return Err("kernel power must be positive".into());
            }
        }
        Ok(())
    }

    /// Canonical form of this term. Returns `None` when the coefficient is
    /// zero or when the term cancels against itself (a labeling symmetry that
    /// flips the sign of an odd factor permutation).
    pub fn canonicalized(self) -> Option<(TermKey, Coeff)> {
        if self.coeff.is_zero() {
            return None;
        }
        let n = self.vertices.len();
        if n == 0 {
            let key = TermKey {
                hbar: self.hbar,
                couplings: clean_couplings(&self.couplings),
                vertices: Vec::new(),
                factors: Vec::new(),
                kernels: Vec::new(),
            };
            return Some((key, self.coeff));
        }

        let classes = color_classes(&self);
        let mut best: Option<(TermKey, i32)> = None;
        let mut cancelled = false;

        for_each_labeling(&classes, n, &mut |perm| {
            let (key, sign) = relabeled_key(&self, perm);
            match &mut best {
                None => best = Some((key, sign)),
                Some((bk, bs)) => {
                    if key < *bk {
                        *bk = key;
                        *bs = sign;
                        cancelled = false;
                    } else if key == *bk && sign != *bs {
                        cancelled = true;
                    }
                }
            }
        });

        if cancelled {
            return None;
        }
        let (key, sign) = best.expect("at least one labeling");
        let coeff = if sign < 0 { -self.coeff } else { self.coeff };
        Some((key, coeff))
    }

    /// Rebuilds a term from a canonical key and coefficient.
    pub fn from_key(key: TermKey, coeff: Coeff) -> Term {
        Term {
            coeff,
            hbar: key.hbar,
            couplings: key.couplings.into_iter().collect(),
            vertices: key.vertices,
            factors: key.factors,
            kernels: key.kernels,
        }
    }
}

fn clean_couplings(map: &BTreeMap<Coupling, u32>) -> Vec<(Coupling, u32)> {
    map.iter().filter(|(_, &p)| p > 0).map(|(&c, &p)| (c, p)).collect()
}

/// Whether endpoint order in this symbol carries no information. Only then may
/// canonicalization swap endpoints, and only then must color refinement treat
/// both endpoint roles alike.
fn orientation_free(k: &PropagatorSymbol) -> bool {
    k.channel.endpoints_sortable() && !k.kind.directed()
}

/// Vertex color classes after iterated refinement. Vertices in one class are
/// indistinguishable by smearing label, attached factor species, and kernel
/// incidence structure; the canonical labeling tie-breaks inside classes by
/// trying every arrangement.
fn color_classes(term: &Term) -> Vec<Vec<usize>> {
    let n = term.vertices.len();

    // Initial signature: smearing label plus sorted factor species.
    let mut sigs: Vec<String> = (0..n)
        .map(|v| {
            let mut species: Vec<&str> = term
                .factors
                .iter()
                .filter(|f| f.vertex as usize == v)
                .map(|f| f.species.name())
                .collect();
            species.sort_unstable();
            format!("{}|{}", term.vertices[v], species.join(","))
        })
        .collect();
    let mut colors = rank(&sigs);

    for _ in 0..n {
        sigs = (0..n)
            .map(|v| {
                // Aggregate incident kernel power per (kind, channel, role,
                // neighbor color) so that a parallel pair and a pre-merged
                // power-2 symbol produce the same signature. Endpoint roles
                // are collapsed for orientation-free kernels; there the l/r
                // split is a storage artifact, not structure.
                let mut inc: BTreeMap<String, u32> = BTreeMap::new();
                for k in term.kernels.iter().filter(|k| k.left as usize == v || k.right as usize == v) {
                    let role = if k.left as usize == v && k.right as usize == v {
                        "loop"
                    } else if orientation_free(k) {
                        "e"
                    } else if k.left as usize == v {
                        "l"
                    } else {
                        "r"
                    };
                    let other =
                        if k.left as usize == v { k.right as usize } else { k.left as usize };
                    let slot =
                        format!("{:?}:{:?}:{}:{}", k.kind, k.channel, role, colors[other]);
                    *inc.entry(slot).or_insert(0) += k.power;
                }
                let inc: Vec<String> =
                    inc.into_iter().map(|(slot, power)| format!("{slot}:{power}")).collect();
                format!("{}#{}", colors[v], inc.join(";"))
            })
            .collect();
        let next = rank(&sigs);
        if next == colors {
            break;
        }
        colors = next;
    }

    // Group vertex indices by color, classes ordered by color rank.
    let max_color = colors.iter().copied().max().unwrap_or(0);
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); max_color + 1];
    for (v, &c) in colors.iter().enumerate() {
        classes[c].push(v);
    }
    classes.retain(|c| !c.is_empty());
    classes
}

fn rank(sigs: &[String]) -> Vec<usize> {
    let mut sorted: Vec<&String> = sigs.iter().collect();
    sorted.sort_unstable();
    sorted.dedup();
    sigs.iter()
        .map(|s| sorted.binary_search(&s).expect("signature present"))
        .collect()
}

/// Calls `f` with every vertex relabeling consistent with the class order:
/// `perm[orig] = canonical id`. Classes occupy consecutive canonical ids; all
/// arrangements within each class are enumerated.
fn for_each_labeling(classes: &[Vec<usize>], n: usize, f: &mut dyn FnMut(&[u32])) {
    let mut perm = vec![0u32; n];
    let offsets: Vec<usize> = classes
        .iter()
        .scan(0usize, |acc, c| {
            let o = *acc;
            *acc += c.len();
            Some(o)
        })
        .collect();

    fn recurse(
        classes: &[Vec<usize>],
        offsets: &[usize],
        idx: usize,
        perm: &mut Vec<u32>,
        f: &mut dyn FnMut(&[u32]),
    ) {
        if idx == classes.len() {
            f(perm);
            return;
        }
        let class = &classes[idx];
        let base = offsets[idx];
        let mut order: Vec<usize> = (0..class.len()).collect();
        permute(&mut order, 0, &mut |arrangement| {
            for (slot, &pos) in arrangement.iter().enumerate() {
                perm[class[pos]] = (base + slot) as u32;
            }
            recurse(classes, offsets, idx + 1, perm, f);
        });
    }

    fn permute(items: &mut Vec<usize>, start: usize, f: &mut dyn FnMut(&[usize])) {
        if start == items.len() {
            f(items);
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            permute(items, start + 1, f);
            items.swap(start, i);
        }
    }

    recurse(classes, &offsets, 0, &mut perm, f);
}

/// Applies a vertex relabeling and produces the comparable key plus the sign
/// of the odd-factor permutation induced by the canonical factor sort.
fn relabeled_key(term: &Term, perm: &[u32]) -> (TermKey, i32) {
    let vertices = {
        let mut v = vec![String::new(); term.vertices.len()];
        for (orig, &canon) in perm.iter().enumerate() {
            v[canon as usize] = term.vertices[orig].clone();
        }
        v
    };

    // Stable sort by (vertex, species); sign = parity of the permutation of
    // odd factors among themselves. Pairs with equal keys never swap.
    let mapped: Vec<FieldFactor> = term
        .factors
        .iter()
        .map(|f| FieldFactor { species: f.species, vertex: perm[f.vertex as usize] })
        .collect();
    let mut order: Vec<usize> = (0..mapped.len()).collect();
    order.sort_by_key(|&i| (mapped[i].vertex, mapped[i].species, i));
    let mut sign = 1i32;
    for a in 0..order.len() {
        for b in (a + 1)..order.len() {
            if order[a] > order[b]
                && mapped[order[a]].species.grading() == Grading::Odd
                && mapped[order[b]].species.grading() == Grading::Odd
            {
                sign = -sign;
            }
        }
    }
    let factors: Vec<FieldFactor> = order.into_iter().map(|i| mapped[i]).collect();

    let mut kernels: Vec<PropagatorSymbol> = term
        .kernels
        .iter()
        .map(|k| {
            let mut left = perm[k.left as usize];
            let mut right = perm[k.right as usize];
            if orientation_free(k) && left > right {
                std::mem::swap(&mut left, &mut right);
            }
            PropagatorSymbol { kind: k.kind, channel: k.channel, left, right, power: k.power }
        })
        .collect();
    kernels.sort_unstable_by_key(|k| (k.kind, k.channel, k.left, k.right));
    let mut merged: Vec<PropagatorSymbol> = Vec::with_capacity(kernels.len());
    for k in kernels {
        match merged.last_mut() {
            Some(last)
                if last.kind == k.kind
                    && last.channel == k.channel
                    && last.left == k.left
                    && last.right == k.right =>
            {
                last.power += k.power;
            }
            _ => merged.push(k),
        }
    }

    let key = TermKey {
        hbar: term.hbar,
        couplings: clean_couplings(&term.couplings),
        vertices,
        factors,
        kernels: merged,
    };
    (key, sign)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.coeff)?;
        if self.hbar != 0 {
            write!(f, "·hbar^{}", self.hbar)?;
        }
        for (c, p) in &self.couplings {
            if *p == 1 {
                write!(f, "·{c}")?;
            } else {
                write!(f, "·{c}^{p}")?;
            }
        }
        if !self.factors.is_empty() {
            write!(f, "·[")?;
            for (i, fac) in self.factors.iter().enumerate() {
                if i > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}({})", fac.species, self.vertices[fac.vertex as usize])?;
            }
            write!(f, "]")?;
        }
        for k in &self.kernels {
            let chan = format!("{}", k.channel);
            let sub = if chan.is_empty() { String::new() } else { format!(",{chan}") };
            write!(
                f,
                "·{}{}({},{})",
                k.kind, sub, self.vertices[k.left as usize], self.vertices[k.right as usize]
            )?;
            if k.power > 1 {
                write!(f, "^{}", k.power)?;
            }
        }
        Ok(())
    }
}
