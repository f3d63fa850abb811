//! Quasi-bases `{(uᵢ, vᵢ)}` for bimodule maps: verification, the Gram
//! operator construction for conditional expectations, the index element
//! and the transport to the corner and back.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bimodule::CornerRealization;
use crate::error::{check_residual, Error, Result};
use crate::fdca::FdStarAlgebra;
use crate::linalg::{
    complex_gaussian, inverse, psd_inverse_sqrt, ComplexMatrix, ALGEBRAIC_TOL, CONDITION_LIMIT,
};
use crate::report::CheckEntry;
use crate::transfer::{f_corner, f_forward, BimoduleMap};

const DEF_ANCHOR: &str = "c = Σ uᵢ φ(vᵢ c) = Σ φ(c uᵢ) vᵢ";
const CORNER_ANCHOR: &str = "{(p(uᵢ⊗Iₙ)aⱼp, pbⱼ(vᵢ⊗Iₙ)p)}, Σ aⱼ p bⱼ = 1";

#[derive(Clone, Debug)]
pub struct QuasiBasis {
    pub pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
    pub owner: BimoduleMap,
}

/// Serialized form; the owner map is referenced by name.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasiBasisWire {
    pub pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
    pub owner_map: String,
}

impl QuasiBasis {
    pub fn new(pairs: Vec<(ComplexMatrix, ComplexMatrix)>, owner: BimoduleMap) -> Result<Self> {
        let c = owner.source();
        for (u, v) in &pairs {
            for m in [u, v] {
                let r = c.residual(m);
                if r > ALGEBRAIC_TOL * m.frobenius_norm().max(1.0) {
                    return Err(Error::NotInAlgebra(r));
                }
            }
        }
        Ok(QuasiBasis { pairs, owner })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_wire(&self, owner_map: &str) -> QuasiBasisWire {
        QuasiBasisWire {
            pairs: self.pairs.clone(),
            owner_map: owner_map.to_string(),
        }
    }

    pub fn from_wire(wire: QuasiBasisWire, owner: BimoduleMap) -> Result<Self> {
        QuasiBasis::new(wire.pairs, owner)
    }

    /// Largest `‖Σ uᵢ φ(vᵢ c) − c‖` and `‖Σ φ(c uᵢ) vᵢ − c‖` over the given elements.
    pub fn residuals_on(&self, elements: &[ComplexMatrix]) -> (f64, f64) {
        let phi = &self.owner;
        let (mut left, mut right): (f64, f64) = (0.0, 0.0);
        for c in elements {
            let mut l = c.scale_real(-1.0);
            let mut r = c.scale_real(-1.0);
            for (u, v) in &self.pairs {
                l = &l + &(u * &phi.apply(&(v * c)));
                r = &r + &(&phi.apply(&(c * u)) * v);
            }
            left = left.max(l.frobenius_norm());
            right = right.max(r.frobenius_norm());
        }
        (left, right)
    }

    /// `{(uᵢ, h⁻¹vᵢ)}`, a quasi-basis for `φ_h = φ(h·)` when `h ∈ A′∩C` is invertible.
    pub fn for_left_shift(&self, h: &ComplexMatrix, shifted: BimoduleMap) -> Result<Self> {
        let hinv = inverse(h)?;
        let pairs = self.pairs.iter().map(|(u, v)| (u.clone(), &hinv * v)).collect();
        QuasiBasis::new(pairs, shifted)
    }

    /// `{(uᵢh⁻¹, vᵢ)}`, a quasi-basis for `_hφ = φ(·h)`.
    pub fn for_right_shift(&self, h: &ComplexMatrix, shifted: BimoduleMap) -> Result<Self> {
        let hinv = inverse(h)?;
        let pairs = self.pairs.iter().map(|(u, v)| (u * &hinv, v.clone())).collect();
        QuasiBasis::new(pairs, shifted)
    }
}

/// Both defining identities on the basis of `C` (which has unit-norm elements).
pub fn verify_quasi_basis(qb: &QuasiBasis) -> Vec<CheckEntry> {
    let (l, r) = qb.residuals_on(qb.owner.source().basis());
    vec![
        CheckEntry::new("quasibasis.left", l, ALGEBRAIC_TOL, DEF_ANCHOR),
        CheckEntry::new("quasibasis.right", r, ALGEBRAIC_TOL, DEF_ANCHOR),
    ]
}

pub fn ensure_verified(qb: &QuasiBasis) -> Result<()> {
    for c in verify_quasi_basis(qb) {
        check_residual(&c.check, c.residual, c.tolerance)?;
    }
    Ok(())
}

/// Gram operator construction: `T(x) = Σₖ gₖ E(gₖ* x)` over a spanning set,
/// `uₖ = T^{-1/2}(gₖ)`, pairs `(uₖ, uₖ*)`. Needs `Tr∘E = Tr` so that `T` is
/// Hilbert–Schmidt selfadjoint.
pub fn construct_for_ce(e: &BimoduleMap, spanning: Option<&[ComplexMatrix]>) -> Result<QuasiBasis> {
    let c = e.source();
    let gens: Vec<ComplexMatrix> = match spanning {
        Some(g) => g.to_vec(),
        None => c.basis().to_vec(),
    };
    let t = c.span().coefficient_matrix(c.span(), |x| {
        let mut out = ComplexMatrix::zeros(x.rows(), x.cols());
        for g in &gens {
            out = &out + &(g * &e.apply(&(&g.adjoint() * x)));
        }
        out
    });
    check_residual(
        "Gram operator selfadjointness",
        t.hermitian_residual(),
        ALGEBRAIC_TOL * t.frobenius_norm().max(1.0),
    )?;
    let inv = psd_inverse_sqrt(&t.hermitian_part(), 1e-12)?;
    if inv.support_rank < c.dim() || inv.condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            what: "Gram operator of the expectation".into(),
            cond: if inv.support_rank < c.dim() { f64::INFINITY } else { inv.condition },
        });
    }
    let pairs = gens
        .iter()
        .map(|g| {
            let u = c.element(&inv.matrix.mat_vec(&c.coords(g)));
            let v = u.adjoint();
            (u, v)
        })
        .collect();
    let qb = QuasiBasis::new(pairs, e.clone())?;
    ensure_verified(&qb)?;
    Ok(qb)
}

/// A random spanning set of `dim + extra` elements of `alg`.
pub fn random_spanning_set(alg: &FdStarAlgebra, extra: usize, seed: u64) -> Vec<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..alg.dim() + extra)
        .map(|_| {
            let coords: Vec<_> = (0..alg.dim()).map(|_| complex_gaussian(&mut rng)).collect();
            alg.element(&coords)
        })
        .collect()
}

/// `Σᵢ uᵢ vᵢ`.
pub fn watatani_index(qb: &QuasiBasis) -> ComplexMatrix {
    let n = qb.owner.source().ambient_dim();
    qb.pairs
        .iter()
        .fold(ComplexMatrix::zeros(n, n), |acc, (u, v)| &acc + &(u * v))
}

/// The corner family for `F(φ)`, verified.
pub fn transfer_quasi_basis(real: &CornerRealization, qb: &QuasiBasis) -> Result<QuasiBasis> {
    let (qb, _) = transfer_quasi_basis_unchecked(real, qb)?;
    ensure_verified(&qb)?;
    Ok(qb)
}

/// The corner family with its verification entries.
pub fn transfer_quasi_basis_unchecked(
    real: &CornerRealization,
    qb: &QuasiBasis,
) -> Result<(QuasiBasis, Vec<CheckEntry>)> {
    let big_f = f_corner(real, &qb.owner)?;
    let id_n = ComplexMatrix::identity(real.n);
    let p = &real.p;
    let mut pairs = Vec::with_capacity(qb.len() * real.witnesses_a.len());
    for (u, v) in &qb.pairs {
        let uu = id_n.kron(u);
        let vv = id_n.kron(v);
        for (a, b) in real.witnesses_a.iter().zip(&real.witnesses_b) {
            pairs.push((&(&(p * &uu) * a) * p, &(&(p * b) * &vv) * p));
        }
    }
    let out = QuasiBasis::new(pairs, big_f)?;
    let entries = verify_quasi_basis(&out)
        .into_iter()
        .map(|mut c| {
            c.check = c.check.replace("quasibasis.", "quasibasis.corner_");
            c.paper_ref = CORNER_ANCHOR.into();
            c
        })
        .collect();
    Ok((out, entries))
}

/// `{(Ψ_D⁻¹(U), Ψ_D⁻¹(V))}`, a quasi-basis for `f(φ)` built from one for `F(φ)`.
pub fn pull_back(real: &CornerRealization, corner_qb: &QuasiBasis, phi: &BimoduleMap) -> Result<QuasiBasis> {
    let psi = f_forward(&real.pair, phi)?;
    let pairs = corner_qb
        .pairs
        .iter()
        .map(|(u, v)| (real.psi_d_inv(u), real.psi_d_inv(v)))
        .collect();
    QuasiBasis::new(pairs, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bimodule::{make_corner_pair, EquivalencePair};
    use crate::fdca::{trace_conditional_expectation, UnitalInclusion};
    use crate::linalg::{hermitian_eigen, C64};

    fn m2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::matrix_unit(2, 0, 1)]).unwrap()
    }

    fn scalar_inc() -> UnitalInclusion {
        UnitalInclusion::new(FdStarAlgebra::from_generators(2, &[]).unwrap(), m2()).unwrap()
    }

    fn diag_inc() -> UnitalInclusion {
        let d = FdStarAlgebra::from_generators(2, &[ComplexMatrix::real_diagonal(&[1.0, 2.0])]).unwrap();
        UnitalInclusion::new(d, m2()).unwrap()
    }

    fn matrix_unit_basis(e: &BimoduleMap) -> QuasiBasis {
        let s = 2f64.sqrt();
        let mut pairs = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                pairs.push((
                    ComplexMatrix::matrix_unit(2, i, j).scale_real(s),
                    ComplexMatrix::matrix_unit(2, j, i).scale_real(s),
                ));
            }
        }
        QuasiBasis::new(pairs, e.clone()).unwrap()
    }

    #[test]
    fn identity_quasi_basis() {
        let id = BimoduleMap::identity(m2());
        let qb = QuasiBasis::new(vec![(ComplexMatrix::identity(2), ComplexMatrix::identity(2))], id).unwrap();
        assert!(verify_quasi_basis(&qb).iter().all(|c| c.pass));
        assert!((&watatani_index(&qb) - &ComplexMatrix::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn matrix_units_for_normalized_trace() {
        let e = trace_conditional_expectation(&scalar_inc()).unwrap();
        let mut qb = matrix_unit_basis(&e);
        assert!(verify_quasi_basis(&qb).iter().all(|c| c.pass));
        let four = ComplexMatrix::identity(2).scale_real(4.0);
        assert!((&watatani_index(&qb) - &four).max_abs() < 1e-8);
        qb.pairs.pop();
        assert!(verify_quasi_basis(&qb).iter().all(|c| !c.pass));
    }

    #[test]
    fn residuals_scale_linearly() {
        let e = trace_conditional_expectation(&scalar_inc()).unwrap();
        let mut qb = matrix_unit_basis(&e);
        qb.pairs.pop();
        let c = ComplexMatrix::matrix_unit(2, 1, 0);
        let (l1, r1) = qb.residuals_on(std::slice::from_ref(&c));
        let (l2, r2) = qb.residuals_on(&[c.scale_real(3.0)]);
        assert!((l2 - 3.0 * l1).abs() < 1e-12 && (r2 - 3.0 * r1).abs() < 1e-12);
    }

    #[test]
    fn gram_construction_and_index() {
        let id = BimoduleMap::identity(m2());
        let qb = construct_for_ce(&id, Some(&[ComplexMatrix::identity(2)])).unwrap();
        assert_eq!(qb.len(), 1);
        assert!((&watatani_index(&qb) - &ComplexMatrix::identity(2)).max_abs() < 1e-10);

        for (inc, index) in [(scalar_inc(), 4.0), (diag_inc(), 2.0)] {
            let e = trace_conditional_expectation(&inc).unwrap();
            let qb = construct_for_ce(&e, None).unwrap();
            for (u, v) in &qb.pairs {
                assert!((&u.adjoint() - v).max_abs() < 1e-15);
            }
            let ind = watatani_index(&qb);
            assert!((&ind - &ComplexMatrix::identity(2).scale_real(index)).max_abs() < 1e-8);
            assert!(hermitian_eigen(&ind).unwrap().values[0] >= 1.0 - 1e-9);
            let other = construct_for_ce(&e, Some(&random_spanning_set(inc.large(), 3, 9))).unwrap();
            assert!((&watatani_index(&other) - &ind).max_abs() < 1e-9);
        }
    }

    #[test]
    fn non_faithful_gram_is_rejected() {
        let e = trace_conditional_expectation(&scalar_inc()).unwrap();
        assert!(construct_for_ce(&e, Some(&[ComplexMatrix::identity(2)])).is_err());
    }

    #[test]
    fn corner_transfer_and_pull_back() {
        for inc in [scalar_inc(), diag_inc()] {
            let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 0.0, if inc.small().dim() == 1 { 0.0 } else { 1.0 }]);
            let pair = make_corner_pair(&inc, 2, &p).unwrap();
            let real = CornerRealization::new(&pair).unwrap();
            let e = trace_conditional_expectation(&inc).unwrap();
            let qb = construct_for_ce(&e, None).unwrap();
            let (cqb, entries) = transfer_quasi_basis_unchecked(&real, &qb).unwrap();
            assert!(entries.iter().all(|c| c.pass), "{entries:?}");
            assert_eq!(cqb.len(), qb.len() * real.witnesses_a.len());
            let back = pull_back(&real, &cqb, &e).unwrap();
            assert!(verify_quasi_basis(&back).iter().all(|c| c.pass));
        }
    }

    #[test]
    fn trivial_corner_keeps_quasi_basis() {
        let inc = diag_inc();
        let real = CornerRealization::new(&EquivalencePair::trivial(&inc)).unwrap();
        let e = trace_conditional_expectation(&inc).unwrap();
        let qb = construct_for_ce(&e, None).unwrap();
        let cqb = transfer_quasi_basis(&real, &qb).unwrap();
        assert!((&watatani_index(&cqb) - &watatani_index(&qb)).max_abs() < 1e-9);
    }

    #[test]
    fn left_shift_quasi_basis() {
        let inc = scalar_inc();
        let e = trace_conditional_expectation(&inc).unwrap();
        let qb = construct_for_ce(&e, None).unwrap();
        let h = ComplexMatrix::real_diagonal(&[4.0 / 3.0, 2.0 / 3.0]);
        let shifted = BimoduleMap::from_fn(inc.large().clone(), inc.small().clone(), |c| e.apply(&(&h * c))).unwrap();
        let sqb = qb.for_left_shift(&h, shifted).unwrap();
        assert!(verify_quasi_basis(&sqb).iter().all(|c| c.pass));
        let _ = C64::new(0.0, 0.0);
    }

    #[test]
    fn wire_round_trip() {
        let e = trace_conditional_expectation(&scalar_inc()).unwrap();
        let qb = construct_for_ce(&e, None).unwrap();
        let json = serde_json::to_string(&qb.to_wire("E")).unwrap();
        let wire: QuasiBasisWire = serde_json::from_str(&json).unwrap();
        assert_eq!(wire.owner_map, "E");
        let back = QuasiBasis::from_wire(wire, e).unwrap();
        assert!(verify_quasi_basis(&back).iter().all(|c| c.pass));
    }
}
