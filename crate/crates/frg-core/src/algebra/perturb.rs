//! Truncated S-matrices, the Bogoliubov map, and the standard interaction
//! potentials of the three models.
//!
//! All expansions are formal power series in the coupling symbols, truncated
//! jointly: a term survives when its total degree across all couplings stays
//! within the requested order. Prefactors (i/hbar)^n / n! are exact, so the
//! layer stays fully symbolic.

use super::coeff::Coeff;
use super::functional::{AlgebraError, Functional};
use super::model::{Coupling, KernelKind, Model, Species};
use super::product::{deformed_product, expand_uniform, uniform_assignment};
use super::term::{PropagatorSymbol, Term};

/// Truncated S-matrix Σ_{n ≤ order} (±i/ħ)ⁿ/n! Tⁿ(V, …, V), with T̄ in the
/// inverse case. Every term of V must carry at least one coupling power so
/// that the joint truncation closes the series.
pub fn s_matrix_truncated(
    v: &Functional,
    order: u32,
    inverse: bool,
) -> Result<Functional, AlgebraError> {
    ensure_perturbative(v)?;
    let kind = if inverse { KernelKind::AntiFeynman } else { KernelKind::Feynman };
    let mut acc = Functional::unit(v.model());
    for n in 1..=order {
        let power = nfold(v, n, kind, order)?;
        acc = acc.add(&power.with_hbar(-(n as i64)).scaled(&exp_prefactor(n, inverse)));
    }
    Ok(acc)
}

/// Interacting observable R_V(F) = S⁻¹(V) ⋆_H [S(V) ·_T F], truncated
/// jointly at the given coupling order.
pub fn bogoliubov_truncated(
    v: &Functional,
    f: &Functional,
    order: u32,
) -> Result<Functional, AlgebraError> {
    ensure_perturbative(v)?;
    if v.model() != f.model() {
        return Err(AlgebraError::MixedModels);
    }

    // S(V) ·_T F = Σ_n (i/ħ)ⁿ/n! T(V, …, V, F); the n-ary product already
    // contains the V-V Feynman contractions of Tⁿ(V).
    let mut inner = f.clone();
    for n in 1..=order {
        let mut operands: Vec<&Functional> = vec![v; n as usize];
        operands.push(f);
        let t = expand_uniform(&operands, KernelKind::Feynman, Some(order))?;
        inner = inner.add(&t.with_hbar(-(n as i64)).scaled(&exp_prefactor(n, false)));
    }

    let star = uniform_assignment(v.model(), KernelKind::TwoPoint);
    let mut result = inner.clone();
    for m in 1..=order {
        let anti = nfold(v, m, KernelKind::AntiFeynman, order)?;
        let left = anti.with_hbar(-(m as i64)).scaled(&exp_prefactor(m, true));
        result = result.add(&deformed_product(&[&left, &inner], &star, Some(order))?);
    }
    Ok(result)
}

fn ensure_perturbative(v: &Functional) -> Result<(), AlgebraError> {
    if v.terms().iter().any(|t| t.total_coupling_degree() == 0) {
        return Err(AlgebraError::NonPerturbativeVertex);
    }
    Ok(())
}

fn nfold(
    v: &Functional,
    n: u32,
    kind: KernelKind,
    order: u32,
) -> Result<Functional, AlgebraError> {
    let operands: Vec<&Functional> = vec![v; n as usize];
    expand_uniform(&operands, kind, Some(order))
}

/// (±i)ⁿ/n! as an exact Gaussian rational; the ħ⁻ⁿ part is tracked on the
/// terms.
fn exp_prefactor(n: u32, inverse: bool) -> Coeff {
    let mut c = Coeff::i_pow(n as i64) * Coeff::inv_factorial(n);
    if inverse && n % 2 == 1 {
        c = -c;
    }
    c
}

/// The symmetric two-scalar quartic potential
/// (λ₁/4! φ₁⁴ + λ₂/4! φ₂⁴ + λ₃/4 φ₁²φ₂²) smeared with one cutoff function.
pub fn two_scalar_potential(smearing: &str) -> Functional {
    let q1 = Functional::generator(Model::TwoScalar, Species::Phi1, smearing, 4)
        .expect("valid generator")
        .with_coupling(Coupling::Lambda1, 1)
        .scaled(&Coeff::inv_factorial(4));
    let q2 = Functional::generator(Model::TwoScalar, Species::Phi2, smearing, 4)
        .expect("valid generator")
        .with_coupling(Coupling::Lambda2, 1)
        .scaled(&Coeff::inv_factorial(4));
    let mixed =
        Functional::monomial(Model::TwoScalar, &[(Species::Phi1, 2), (Species::Phi2, 2)], smearing)
            .expect("valid monomial")
            .with_coupling(Coupling::Lambda3, 1)
            .scaled(&Coeff::ratio(1, 4));
    q1.add(&q2).add(&mixed)
}

/// The response-field potential (λ/2 φ²φ̃ − D φ̃²) of the stochastic model.
pub fn msr_potential(smearing: &str) -> Functional {
    let cubic =
        Functional::monomial(Model::Msr, &[(Species::Phi, 2), (Species::PhiTilde, 1)], smearing)
            .expect("valid monomial")
            .with_coupling(Coupling::Lambda, 1)
            .scaled(&Coeff::ratio(1, 2));
    let noise = Functional::generator(Model::Msr, Species::PhiTilde, smearing, 2)
        .expect("valid generator")
        .with_coupling(Coupling::NoiseD, 1)
        .scaled(&Coeff::from_int(-1));
    cubic.add(&noise)
}

/// The current-current self-interaction (λ/2)(ψ̄ψ)(ψ̄ψ); the spinor index
/// structure is absorbed into the kernel symbols.
pub fn dirac_potential(smearing: &str) -> Functional {
    Functional::monomial(
        Model::Dirac,
        &[(Species::PsiBar, 1), (Species::Psi, 1), (Species::PsiBar, 1), (Species::Psi, 1)],
        smearing,
    )
    .expect("valid monomial")
    .with_coupling(Coupling::Lambda, 1)
    .scaled(&Coeff::ratio(1, 2))
}

/// Replaces every kernel of kind `from` by the linear combination
/// Σᵢ cᵢ·kindᵢ, expanding powers multilinearly. Channels and endpoints are
/// untouched. Used to express two-point kernels through their Feynman and
/// anti-Feynman parts in structural checks.
pub fn substitute_kernel_kind(
    f: &Functional,
    from: KernelKind,
    combo: &[(Coeff, KernelKind)],
) -> Functional {
    let mut expanded: Vec<Term> = Vec::new();
    for term in f.terms() {
        let mut fixed: Vec<PropagatorSymbol> = Vec::new();
        let mut slots: Vec<PropagatorSymbol> = Vec::new();
        for k in &term.kernels {
            if k.kind == from {
                for _ in 0..k.power {
                    slots.push(PropagatorSymbol { power: 1, ..*k });
                }
            } else {
                fixed.push(*k);
            }
        }
        distribute(term, &fixed, &slots, 0, Coeff::one(), Vec::new(), combo, &mut expanded);
    }
    Functional::from_terms(f.model(), expanded)
}

fn distribute(
    term: &Term,
    fixed: &[PropagatorSymbol],
    slots: &[PropagatorSymbol],
    idx: usize,
    scale: Coeff,
    chosen: Vec<PropagatorSymbol>,
    combo: &[(Coeff, KernelKind)],
    out: &mut Vec<Term>,
) {
    if idx == slots.len() {
        let mut kernels = fixed.to_vec();
        kernels.extend(chosen);
        out.push(Term { coeff: &term.coeff * &scale, kernels, ..term.clone() });
        return;
    }
    for (c, kind) in combo {
        let mut next = chosen.clone();
        next.push(PropagatorSymbol { kind: *kind, ..slots[idx] });
        distribute(term, fixed, slots, idx + 1, &scale * c, next, combo, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::product::{anti_time_ordered_product, star_h, time_ordered_product};

    fn i_over_hbar(f: &Functional) -> Functional {
        f.scaled(&Coeff::i()).with_hbar(-1)
    }

    #[test]
    fn s_matrix_order_zero_is_unit() {
        let v = two_scalar_potential("h");
        assert_eq!(s_matrix_truncated(&v, 0, false).unwrap(), Functional::unit(Model::TwoScalar));
        assert_eq!(s_matrix_truncated(&v, 0, true).unwrap(), Functional::unit(Model::TwoScalar));
    }

    #[test]
    fn s_matrix_order_two_explicit() {
        let v = two_scalar_potential("h");
        let s = s_matrix_truncated(&v, 2, false).unwrap();
        let vv = time_ordered_product(&[&v, &v]).unwrap();
        let expected = Functional::unit(Model::TwoScalar)
            .add(&i_over_hbar(&v))
            .add(&vv.scaled(&Coeff::ratio(-1, 2)).with_hbar(-2));
        assert_eq!(s, expected);
    }

    #[test]
    fn inverse_s_matrix_order_two_explicit() {
        let v = two_scalar_potential("h");
        let s = s_matrix_truncated(&v, 2, true).unwrap();
        let vv = anti_time_ordered_product(&[&v, &v]).unwrap();
        let expected = Functional::unit(Model::TwoScalar)
            .sub(&i_over_hbar(&v))
            .add(&vv.scaled(&Coeff::ratio(-1, 2)).with_hbar(-2));
        assert_eq!(s, expected);
    }

    #[test]
    fn non_perturbative_vertex_rejected() {
        let bad = Functional::generator(Model::TwoScalar, Species::Phi1, "h", 4).unwrap();
        assert_eq!(s_matrix_truncated(&bad, 1, false), Err(AlgebraError::NonPerturbativeVertex));
        let f = Functional::generator(Model::TwoScalar, Species::Phi1, "f", 2).unwrap();
        assert_eq!(bogoliubov_truncated(&bad, &f, 1), Err(AlgebraError::NonPerturbativeVertex));
    }

    #[test]
    fn bogoliubov_order_zero_is_identity() {
        let v = two_scalar_potential("h");
        let f = Functional::generator(Model::TwoScalar, Species::Phi1, "f", 2).unwrap();
        assert_eq!(bogoliubov_truncated(&v, &f, 0).unwrap(), f);
    }

    #[test]
    fn bogoliubov_second_order_template() {
        // R(F) at order 2 must equal
        //   F + (i/ħ)(V·_T F − V⋆F)
        //     − (1/2ħ²)[(V·_T̄ V)⋆F + (V·_T V)·_T F − 2 V⋆(V·_T F)],
        // assembled here from first principles, products only.
        let v = two_scalar_potential("h");
        let f = Functional::monomial(
            Model::TwoScalar,
            &[(Species::Phi1, 1), (Species::Phi2, 1)],
            "f",
        )
        .unwrap();

        let vt_f = time_ordered_product(&[&v, &f]).unwrap();
        let vs_f = star_h(&v, &f).unwrap();
        let first = i_over_hbar(&vt_f.sub(&vs_f));

        let vtbar_v = anti_time_ordered_product(&[&v, &v]).unwrap();
        let vt_v = time_ordered_product(&[&v, &v]).unwrap();
        let a = star_h(&vtbar_v, &f).unwrap();
        let b = time_ordered_product(&[&vt_v, &f]).unwrap();
        let c = star_h(&v, &vt_f).unwrap().scaled(&Coeff::from_int(2));
        let second = a.add(&b).sub(&c).scaled(&Coeff::ratio(-1, 2)).with_hbar(-2);

        let template = f.add(&first).add(&second);
        let engine = bogoliubov_truncated(&v, &f, 2).unwrap();
        assert_eq!(engine, template);
    }

    #[test]
    fn msr_interacting_field_vacuum_families() {
        // The lambda-D diagrams of the response-field model: at joint order 2
        // the interacting field has exactly four maximally contracted kernel
        // families, with a squared kernel between the two vertices and a
        // single kernel to the observable.
        let v = msr_potential("h");
        let phi = Functional::generator(Model::Msr, Species::Phi, "f", 1).unwrap();
        let vac = bogoliubov_truncated(&v, &phi, 2).unwrap().vacuum_expectation();
        assert!(!vac.is_zero());

        let mut families: Vec<Vec<(KernelKind, u32)>> = Vec::new();
        for t in vac.terms() {
            assert_eq!(t.total_coupling_degree(), 2);
            assert_eq!(t.couplings.get(&Coupling::Lambda), Some(&1));
            assert_eq!(t.couplings.get(&Coupling::NoiseD), Some(&1));
            let mut pattern: Vec<(KernelKind, u32)> =
                t.kernels.iter().map(|k| (k.kind, k.power)).collect();
            pattern.sort_unstable();
            families.push(pattern);
        }
        families.sort_unstable();
        use KernelKind::*;
        let mut expected = vec![
            vec![(TwoPoint, 1), (TwoPoint, 2)],
            vec![(TwoPoint, 2), (Feynman, 1)],
            vec![(Feynman, 1), (Feynman, 2)],
            vec![(TwoPoint, 1), (AntiFeynman, 2)],
        ];
        for p in &mut expected {
            p.sort_unstable();
        }
        expected.sort_unstable();
        assert_eq!(families, expected);
    }

    #[test]
    fn substitute_kernel_kind_expands_multilinearly() {
        let f = Functional::generator(Model::TwoScalar, Species::Phi1, "f", 2).unwrap();
        let g = Functional::generator(Model::TwoScalar, Species::Phi1, "g", 2).unwrap();
        let prod = star_h(&f, &g).unwrap();
        let half = Coeff::ratio(1, 2);
        let sub = substitute_kernel_kind(
            &prod,
            KernelKind::TwoPoint,
            &[(half.clone(), KernelKind::Feynman), (half, KernelKind::AntiFeynman)],
        );
        // The hbar^2 part had H^2; it becomes 1/4 F^2 + 1/2 F·AF + 1/4 AF^2,
        // scaled by the original multiplicity 2.
        let h2: Vec<_> = sub.terms().iter().filter(|t| t.hbar == 2).collect();
        assert_eq!(h2.len(), 3);
        let mut coeffs: Vec<Coeff> = h2.iter().map(|t| t.coeff.clone()).collect();
        coeffs.sort();
        assert_eq!(
            coeffs,
            vec![Coeff::ratio(1, 2), Coeff::ratio(1, 2), Coeff::from_int(1)]
        );
    }

    #[test]
    fn s_times_inverse_cancels_through_first_order() {
        let v = two_scalar_potential("h");
        let s = s_matrix_truncated(&v, 2, false).unwrap();
        let sinv = s_matrix_truncated(&v, 2, true).unwrap();
        let star = uniform_assignment(Model::TwoScalar, KernelKind::TwoPoint);
        let prod = deformed_product(&[&s, &sinv], &star, Some(2)).unwrap();
        assert_eq!(prod.coupling_component(0), Functional::unit(Model::TwoScalar));
        assert!(prod.coupling_component(1).is_zero());
        // The order-2 residue is the purely kinematic combination
        //   (1/ħ²)[V⋆V − ½ V·_T V − ½ V·_T̄ V],
        // which vanishes only through support properties of the kernels, not
        // symbolically.
        let vv = star_h(&v, &v).unwrap();
        let vt = time_ordered_product(&[&v, &v]).unwrap().scaled(&Coeff::ratio(-1, 2));
        let vtbar = anti_time_ordered_product(&[&v, &v]).unwrap().scaled(&Coeff::ratio(-1, 2));
        let residue = vv.add(&vt).add(&vtbar).with_hbar(-2);
        assert_eq!(prod.coupling_component(2), residue.coupling_component(2));
        // After writing H = ½(H_F + H_AF), the single-contraction part of the
        // residue cancels; only multi-contraction terms survive.
        let half = Coeff::ratio(1, 2);
        let sub = substitute_kernel_kind(
            &residue,
            KernelKind::TwoPoint,
            &[(half.clone(), KernelKind::Feynman), (half, KernelKind::AntiFeynman)],
        );
        for t in sub.terms() {
            assert!(t.total_kernel_power() >= 2, "single-kernel term survived: {t}");
        }
    }
}
