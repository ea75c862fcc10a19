//! Property corpus for the symbolic product engine.
//!
//! These tests exercise randomized inputs against structural invariants
//! that hold for every product: grading bookkeeping, channel discipline,
//! truncation consistency, and stability of the canonical form under
//! reordering. Closed-form golden values live in the unit tests next to
//! the modules; here the point is breadth.

use frg_core::algebra::{
    deformed_product, pointwise_product, star_h, time_ordered_product, uniform_assignment,
    Coeff, Coupling, Functional, KernelKind, Model, Species,
};
use proptest::collection::vec;
use proptest::prelude::*;

/// A monomial with even species only, bounded degree, from a two-letter
/// smearing alphabet.
fn arb_even_monomial(model: Model) -> impl Strategy<Value = Functional> {
    let species: Vec<Species> = match model {
        Model::TwoScalar => vec![Species::Phi1, Species::Phi2],
        Model::Msr => vec![Species::Phi, Species::PhiTilde],
        Model::Dirac => unreachable!("even monomials only"),
    };
    (
        vec((0..species.len(), 1u32..=2), 1..=2),
        prop::sample::select(vec!["f", "g"]),
        -3i64..=3,
    )
        .prop_filter_map("nonzero coefficient", move |(entries, smearing, num)| {
            if num == 0 {
                return None;
            }
            let entries: Vec<(Species, u32)> =
                entries.into_iter().map(|(s, p)| (species[s], p)).collect();
            let f = Functional::monomial(model, &entries, smearing).expect("valid monomial");
            Some(f.scaled(&Coeff::ratio(num, 2)))
        })
}

/// A short sum of even monomials, optionally carrying a coupling power.
fn arb_even_functional(model: Model) -> impl Strategy<Value = Functional> {
    vec((arb_even_monomial(model), 0u32..=1), 1..=2).prop_map(move |parts| {
        let coupling = match model {
            Model::TwoScalar => Coupling::Lambda1,
            Model::Msr => Coupling::Lambda,
            Model::Dirac => unreachable!(),
        };
        parts
            .into_iter()
            .map(|(m, cpow)| if cpow > 0 { m.with_coupling(coupling, cpow) } else { m })
            .fold(Functional::zero(model), |acc, m| acc.add(&m))
    })
}

fn even_model() -> impl Strategy<Value = Model> {
    prop::sample::select(vec![Model::TwoScalar, Model::Msr])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pointwise_product_of_even_functionals_commutes(
        model in even_model().prop_flat_map(|m| (Just(m), arb_even_functional(m), arb_even_functional(m))),
    ) {
        let (_, f, g) = model;
        prop_assert_eq!(pointwise_product(&f, &g).unwrap(), pointwise_product(&g, &f).unwrap());
    }

    #[test]
    fn hbar_grading_counts_contractions(
        input in even_model().prop_flat_map(|m| (arb_even_functional(m), arb_even_functional(m))),
    ) {
        let (f, g) = input;
        for product in [star_h(&f, &g).unwrap(), time_ordered_product(&[&f, &g]).unwrap()] {
            for term in product.terms() {
                prop_assert_eq!(term.hbar, term.total_kernel_power() as i64);
            }
        }
    }

    #[test]
    fn classical_part_of_the_star_product_is_pointwise(
        input in even_model().prop_flat_map(|m| (Just(m), arb_even_functional(m), arb_even_functional(m))),
    ) {
        let (model, f, g) = input;
        let star = star_h(&f, &g).unwrap();
        let classical =
            Functional::from_terms(model, star.terms().iter().filter(|t| t.hbar == 0).cloned());
        prop_assert_eq!(classical, pointwise_product(&f, &g).unwrap());
    }

    #[test]
    fn star_product_associates(
        input in even_model().prop_flat_map(|m| {
            (arb_even_monomial(m), arb_even_monomial(m), arb_even_monomial(m))
        }),
    ) {
        let (a, b, c) = input;
        let left = star_h(&star_h(&a, &b).unwrap(), &c).unwrap();
        let right = star_h(&a, &star_h(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn contractions_conserve_letters_and_respect_channels(
        input in even_model().prop_flat_map(|m| (Just(m), arb_even_monomial(m), arb_even_monomial(m))),
    ) {
        let (model, f, g) = input;
        // Single-term operands, so every output term descends from the same
        // letter word.
        let letters = f.terms()[0].factors.len() + g.terms()[0].factors.len();
        let product = star_h(&f, &g).unwrap();
        for term in product.terms() {
            prop_assert_eq!(term.factors.len() + 2 * term.total_kernel_power() as usize, letters);
            for kernel in &term.kernels {
                prop_assert!(model.channels().contains(&kernel.channel));
            }
        }
    }

    #[test]
    fn joint_truncation_agrees_with_truncating_afterwards(
        input in even_model().prop_flat_map(|m| {
            (Just(m), arb_even_functional(m), arb_even_functional(m), 0u32..=2)
        }),
    ) {
        let (model, f, g, order) = input;
        let assignment = uniform_assignment(model, KernelKind::Feynman);
        let pruned = deformed_product(&[&f, &g], &assignment, Some(order)).unwrap();
        let full = deformed_product(&[&f, &g], &assignment, None).unwrap();
        prop_assert_eq!(pruned, full.truncated(order));
    }

    #[test]
    fn canonical_form_ignores_term_order(
        input in even_model().prop_flat_map(|m| (Just(m), arb_even_functional(m), arb_even_functional(m))),
    ) {
        let (model, f, g) = input;
        let product = star_h(&f, &g).unwrap();
        let mut shuffled: Vec<_> = product.terms().to_vec();
        shuffled.reverse();
        if shuffled.len() > 2 {
            shuffled.rotate_left(1);
        }
        prop_assert_eq!(Functional::from_terms(model, shuffled), product);
    }

    #[test]
    fn even_factor_order_within_a_vertex_is_immaterial(
        input in (1u32..=2, 1u32..=2, prop::sample::select(vec!["f", "g"])),
    ) {
        let (p1, p2, smearing) = input;
        let a = Functional::monomial(
            Model::TwoScalar,
            &[(Species::Phi1, p1), (Species::Phi2, p2)],
            smearing,
        )
        .unwrap();
        let b = Functional::monomial(
            Model::TwoScalar,
            &[(Species::Phi2, p2), (Species::Phi1, p1)],
            smearing,
        )
        .unwrap();
        prop_assert_eq!(a, b);
    }
}
