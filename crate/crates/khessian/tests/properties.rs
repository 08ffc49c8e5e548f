//! Property tests for the algebraic kernel, the quadrature driver, and
//! grid interpolation: randomized realizations of the module invariants
//! (symmetry, homogeneity, cone nesting, idempotence, concavity,
//! exactness classes).

use khessian::grid::{GridField, GridSpec};
use khessian::quad::integrate;
use khessian::symfunc::{
    f_and_grad, in_gamma_k, maclaurin_gap, normalize_to_ak, sigma_k, sigma_k_matrix,
    sigma_k_minors, SymMatrix,
};
use proptest::prelude::*;

fn sym_from_entries(n: usize, entries: &[f64]) -> SymMatrix {
    let mut m = SymMatrix::identity(n);
    let mut it = entries.iter();
    for i in 0..n {
        for j in i..n {
            m.set_sym(i, j, *it.next().unwrap());
        }
    }
    m
}

/// Positive definite matrix from a random square factor: `B B' / n + c I`.
fn pd_from_factor(n: usize, entries: &[f64], shift: f64) -> SymMatrix {
    let mut m = SymMatrix::identity(n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += entries[i * n + l] * entries[j * n + l];
            }
            m.set_sym(i, j, acc / n as f64 + if i == j { shift } else { 0.0 });
        }
    }
    m
}

proptest! {
    #[test]
    fn sigma_is_permutation_invariant(
        (vals, shuffled) in proptest::collection::vec(-3.0f64..3.0, 2..=6)
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
    ) {
        for k in 1..=vals.len() {
            let a = sigma_k(&vals, k);
            let b = sigma_k(&shuffled, k);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn sigma_is_homogeneous_of_degree_k(
        vals in proptest::collection::vec(-3.0f64..3.0, 2..=6),
        t in 0.1f64..4.0,
    ) {
        for k in 1..=vals.len() {
            let scaled: Vec<f64> = vals.iter().map(|v| t * v).collect();
            let lhs = sigma_k(&scaled, k);
            let rhs = t.powi(k as i32) * sigma_k(&vals, k);
            prop_assert!((lhs - rhs).abs() <= 1e-11 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn eigen_and_minor_routes_agree(entries in proptest::collection::vec(-2.0f64..2.0, 6)) {
        let m = sym_from_entries(3, &entries);
        for k in 1..=3 {
            let eigen = sigma_k_matrix(&m, k).unwrap();
            let minors = sigma_k_minors(&m, k);
            prop_assert!(
                (eigen - minors).abs() <= 1e-10 * eigen.abs().max(1.0),
                "k = {}: {} vs {}", k, eigen, minors
            );
        }
    }

    #[test]
    fn cone_membership_nests_downward(
        entries in proptest::collection::vec(-1.5f64..1.5, 6),
        lift in 0.0f64..3.0,
    ) {
        let mut m = sym_from_entries(3, &entries);
        for i in 0..3 {
            m.set_sym(i, i, m.get(i, i) + lift);
        }
        for k in (2..=3).rev() {
            if in_gamma_k(&m, k).unwrap() {
                for j in 1..k {
                    prop_assert!(
                        in_gamma_k(&m, j).unwrap(),
                        "in cone for k = {} but not j = {}", k, j
                    );
                }
            }
        }
    }

    #[test]
    fn normalization_is_idempotent(
        diag in proptest::collection::vec(0.05f64..5.0, 3),
        k in 1usize..=3,
    ) {
        let a = normalize_to_ak(&diag, k).unwrap();
        prop_assert!((sigma_k(a.diag(), k) - 1.0).abs() <= 1e-12);
        let b = normalize_to_ak(a.diag(), k).unwrap();
        for (x, y) in a.diag().iter().zip(b.diag()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn root_is_concave_on_definite_pairs(
        e1 in proptest::collection::vec(-1.0f64..1.0, 9),
        e2 in proptest::collection::vec(-1.0f64..1.0, 9),
        k in 1usize..=3,
    ) {
        let m1 = pd_from_factor(3, &e1, 0.2);
        let m2 = pd_from_factor(3, &e2, 0.2);
        let mid = m1.add_scaled(&m2, 1.0);
        let mid = {
            let mut h = SymMatrix::identity(3);
            for i in 0..3 {
                for j in i..3 {
                    h.set_sym(i, j, 0.5 * mid.get(i, j));
                }
            }
            h
        };
        let (f1, _) = f_and_grad(&m1, k).unwrap();
        let (f2, _) = f_and_grad(&m2, k).unwrap();
        let (fm, _) = f_and_grad(&mid, k).unwrap();
        prop_assert!(fm >= 0.5 * (f1 + f2) - 1e-12);
    }

    #[test]
    fn maclaurin_gap_nonnegative_on_definite_matrices(
        entries in proptest::collection::vec(-1.0f64..1.0, 9),
        k in 2usize..=3,
    ) {
        let m = pd_from_factor(3, &entries, 0.15);
        prop_assert!(maclaurin_gap(&m, k).unwrap() >= -1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_exact_on_cubics(
        c in proptest::collection::vec(-3.0f64..3.0, 4),
        a in -2.0f64..2.0,
        width in 0.1f64..3.0,
    ) {
        let b = a + width;
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
        let anti = |x: f64| {
            c[0] * x + c[1] * x * x / 2.0 + c[2] * x * x * x / 3.0 + c[3] * x * x * x * x / 4.0
        };
        let exact = anti(b) - anti(a);
        let got = integrate(f, a, b, 1e-12, 1e-14).unwrap();
        prop_assert!((got - exact).abs() <= 1e-11 * exact.abs().max(1.0));
    }

    #[test]
    fn quadrature_is_interval_additive(
        freq in 0.5f64..3.0,
        split in 0.1f64..0.9,
    ) {
        let f = |x: f64| (freq * x).sin() + 0.3 * x * x;
        let mid = 4.0 * split;
        let whole = integrate(f, 0.0, 4.0, 1e-12, 1e-14).unwrap();
        let left = integrate(f, 0.0, mid, 1e-12, 1e-14).unwrap();
        let right = integrate(f, mid, 4.0, 1e-12, 1e-14).unwrap();
        prop_assert!((whole - left - right).abs() <= 1e-10);
    }

    #[test]
    fn interpolation_reproduces_affine_fields(
        coeffs in proptest::collection::vec(-2.0f64..2.0, 4),
        q in proptest::collection::vec(-0.9f64..0.9, 3),
    ) {
        let spec = GridSpec::box_domain(&[-1.0; 3], &[1.0; 3], &[17; 3]).unwrap();
        let affine = |x: &[f64]| {
            coeffs[0] + coeffs[1] * x[0] + coeffs[2] * x[1] + coeffs[3] * x[2]
        };
        let field = GridField::from_fn(&spec, affine).unwrap();
        let got = field.interpolate(&q).unwrap();
        prop_assert!((got - affine(&q)).abs() <= 1e-12);
    }
}

/// Eigenvalue route against the characteristic-polynomial coefficients
/// computed directly from the matrix entries (trace, 2x2 principal minors,
/// determinant) — an eig-free reference for the spectral decomposition.
proptest! {
    #[test]
    fn eigenvalues_reproduce_characteristic_coefficients(
        entries in proptest::collection::vec(-2.0f64..2.0, 6),
    ) {
        let m = sym_from_entries(3, &entries);
        let lam = m.eigenvalues();
        let l = lam.as_slice();
        let trace = m.get(0, 0) + m.get(1, 1) + m.get(2, 2);
        let minors = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0)
            + m.get(0, 0) * m.get(2, 2) - m.get(0, 2) * m.get(2, 0)
            + m.get(1, 1) * m.get(2, 2) - m.get(1, 2) * m.get(2, 1);
        let det = m.get(0, 0) * (m.get(1, 1) * m.get(2, 2) - m.get(1, 2) * m.get(2, 1))
            - m.get(0, 1) * (m.get(1, 0) * m.get(2, 2) - m.get(1, 2) * m.get(2, 0))
            + m.get(0, 2) * (m.get(1, 0) * m.get(2, 1) - m.get(1, 1) * m.get(2, 0));
        let s1 = l[0] + l[1] + l[2];
        let s2 = l[0] * l[1] + l[0] * l[2] + l[1] * l[2];
        let s3 = l[0] * l[1] * l[2];
        let scale = 1.0 + trace.abs() + minors.abs() + det.abs();
        prop_assert!((s1 - trace).abs() <= 1e-9 * scale);
        prop_assert!((s2 - minors).abs() <= 1e-9 * scale);
        prop_assert!((s3 - det).abs() <= 1e-9 * scale);
    }
}
