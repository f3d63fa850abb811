//! Modular automorphisms on relative commutants, the isomorphisms `π` and
//! `ρ = Ψ_D⁻¹∘π`, their conjugation identities and the shifted maps.

use crate::bimodule::CornerRealization;
use crate::error::{check_residual, Error, Result};
use crate::fdca::{relative_commutant, CommutantSpace, FdStarAlgebra};
use crate::linalg::{
    condition_number, inverse, ComplexMatrix, LeastSquares, OrthonormalSpan, ALGEBRAIC_TOL, C64,
};
use crate::quasibasis::{pull_back, transfer_quasi_basis, QuasiBasis};
use crate::report::CheckEntry;
use crate::transfer::{f_corner, f_forward, BimoduleMap};

const MODULAR: &str = "φ(xy) = φ(yθ(x)), x ∈ A′∩C, y ∈ C";
const THETA: &str = "θ^φ(c) = Σ uᵢ φ(c vᵢ)";

/// A linear map on a relative commutant, in commutant coordinates.
#[derive(Clone, Debug)]
pub struct ModularAutomorphism {
    pub commutant: CommutantSpace,
    pub coeffs: ComplexMatrix,
}

impl ModularAutomorphism {
    pub fn from_fn(commutant: &CommutantSpace, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Self> {
        let alg = commutant.algebra();
        let mut cols = Vec::with_capacity(alg.dim());
        for x in alg.basis() {
            let img = f(x);
            let r = alg.residual(&img);
            if r > ALGEBRAIC_TOL * img.frobenius_norm().max(1.0) {
                return Err(Error::NotInAlgebra(r));
            }
            cols.push(alg.coords(&img));
        }
        Ok(ModularAutomorphism {
            commutant: commutant.clone(),
            coeffs: ComplexMatrix::from_columns(alg.dim(), &cols),
        })
    }

    pub fn identity(commutant: &CommutantSpace) -> Self {
        ModularAutomorphism {
            commutant: commutant.clone(),
            coeffs: ComplexMatrix::identity(commutant.dim()),
        }
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let alg = self.commutant.algebra();
        alg.element(&self.coeffs.mat_vec(&alg.coords(x)))
    }

    pub fn multiplicative_residual(&self) -> f64 {
        let basis = self.commutant.basis();
        let imgs: Vec<ComplexMatrix> = basis.iter().map(|x| self.apply(x)).collect();
        let mut worst: f64 = 0.0;
        for (x, tx) in basis.iter().zip(&imgs) {
            for (y, ty) in basis.iter().zip(&imgs) {
                worst = worst.max((&self.apply(&(x * y)) - &(tx * ty)).frobenius_norm());
            }
        }
        worst
    }

    pub fn unital_residual(&self) -> f64 {
        let unit = self.commutant.algebra().unit();
        (&self.apply(unit) - unit).frobenius_norm()
    }

    pub fn condition(&self) -> f64 {
        condition_number(&self.coeffs)
    }

    /// Largest `‖self(x) − other(x)‖` over the commutant basis.
    pub fn distance(&self, other: &ModularAutomorphism) -> f64 {
        self.commutant
            .basis()
            .iter()
            .map(|x| (&self.apply(x) - &other.apply(x)).frobenius_norm())
            .fold(0.0, f64::max)
    }

    pub fn entries(&self, prefix: &str) -> Vec<CheckEntry> {
        vec![
            CheckEntry::new(format!("{prefix}.multiplicative"), self.multiplicative_residual(), ALGEBRAIC_TOL, "θ(xy) = θ(x)θ(y)"),
            CheckEntry::new(format!("{prefix}.unital"), self.unital_residual(), ALGEBRAIC_TOL, "θ(1) = 1"),
            CheckEntry::at_least(format!("{prefix}.invertible"), 1.0 / self.condition(), 1e-8, "θ automorphism of A′∩C"),
        ]
    }
}

/// `θ^φ(c) = Σ uᵢ φ(c vᵢ)` on `A′∩C`, the commutant of the inclusion `φ` lives on.
pub fn theta_from_quasibasis(qb: &QuasiBasis, commutant: &CommutantSpace) -> Result<ModularAutomorphism> {
    let phi = &qb.owner;
    if commutant.inclusion().large().span_distance(phi.source()) > 1e-9 {
        return Err(Error::InclusionMismatch("commutant of a different inclusion".into()));
    }
    let theta = ModularAutomorphism::from_fn(commutant, |c| {
        let mut out = ComplexMatrix::zeros(c.rows(), c.cols());
        for (u, v) in &qb.pairs {
            out = &out + &(u * &phi.apply(&(c * v)));
        }
        out
    })?;
    check_residual("θ^φ multiplicative", theta.multiplicative_residual(), ALGEBRAIC_TOL)?;
    check_residual("θ^φ unital", theta.unital_residual(), ALGEBRAIC_TOL)?;
    Ok(theta)
}

/// Largest `‖φ(xy) − φ(yθ(x))‖` over basis pairs.
pub fn modular_residual(phi: &BimoduleMap, theta: &ModularAutomorphism) -> f64 {
    let mut worst: f64 = 0.0;
    for x in theta.commutant.basis() {
        let tx = theta.apply(x);
        for y in phi.source().basis() {
            worst = worst.max((&phi.apply(&(x * y)) - &phi.apply(&(y * &tx))).frobenius_norm());
        }
    }
    worst
}

pub fn check_modular_condition(phi: &BimoduleMap, theta: &ModularAutomorphism) -> CheckEntry {
    CheckEntry::new("modular.condition", modular_residual(phi, theta), ALGEBRAIC_TOL, MODULAR)
}

/// Outcome of solving `φ(x y) = φ(y L(x))` for an unknown linear `L` on `A′∩C`.
#[derive(Clone, Debug)]
pub struct ModularSolve {
    /// Column rank of `z ↦ (φ(y z))_y`; the solution is a single point iff it equals `dim`.
    pub rank: usize,
    pub dim: usize,
    pub residual: f64,
    pub solution: ModularAutomorphism,
}

pub fn solve_modular_uniqueness(phi: &BimoduleMap, commutant: &CommutantSpace) -> Result<ModularSolve> {
    let alg = commutant.algebra();
    let ys = phi.source().basis();
    let block = phi.target().ambient_dim().pow(2);
    let rows = ys.len() * block;
    let mut op = ComplexMatrix::zeros(rows, alg.dim());
    for (b, z) in alg.basis().iter().enumerate() {
        for (yi, y) in ys.iter().enumerate() {
            for (e, v) in phi.apply(&(y * z)).data().iter().enumerate() {
                op.set(yi * block + e, b, *v);
            }
        }
    }
    let ls = LeastSquares::new(&op);
    let mut cols = Vec::with_capacity(alg.dim());
    let mut residual: f64 = 0.0;
    for x in alg.basis() {
        let rhs: Vec<C64> = ys.iter().flat_map(|y| phi.apply(&(x * y)).data().to_vec()).collect();
        let (sol, res) = ls.solve_vec(&rhs);
        residual = residual.max(res);
        cols.push(sol);
    }
    Ok(ModularSolve {
        rank: ls.rank(),
        dim: alg.dim(),
        residual,
        solution: ModularAutomorphism {
            commutant: commutant.clone(),
            coeffs: ComplexMatrix::from_columns(alg.dim(), &cols),
        },
    })
}

impl ModularSolve {
    pub fn entries(&self, theta: &ModularAutomorphism) -> Vec<CheckEntry> {
        const ANCHOR: &str = "unique θ with φ(xy) = φ(yθ(x))";
        vec![
            CheckEntry::flag("modular.uniqueness_rank", self.rank == self.dim, ANCHOR),
            CheckEntry::new("modular.uniqueness_residual", self.residual, ALGEBRAIC_TOL, ANCHOR),
            CheckEntry::new("modular.uniqueness_matches_theta", self.solution.distance(theta), ALGEBRAIC_TOL, ANCHOR),
        ]
    }
}

/// A linear isomorphism between two commutants, in their coordinates.
#[derive(Clone, Debug)]
pub struct CommutantIso {
    pub domain: CommutantSpace,
    pub codomain: CommutantSpace,
    pub coeffs: ComplexMatrix,
    inverse: ComplexMatrix,
}

impl CommutantIso {
    fn from_fn(
        domain: &CommutantSpace,
        codomain: &CommutantSpace,
        f: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    ) -> Result<Self> {
        let (dom, cod) = (domain.algebra(), codomain.algebra());
        if dom.dim() != cod.dim() {
            return Err(Error::DimensionMismatch(format!(
                "commutants of dimension {} and {}",
                dom.dim(),
                cod.dim()
            )));
        }
        let mut cols = Vec::with_capacity(dom.dim());
        for x in dom.basis() {
            let img = f(x);
            check_residual("isomorphism lands in the commutant", cod.residual(&img), ALGEBRAIC_TOL)?;
            cols.push(cod.coords(&img));
        }
        let coeffs = ComplexMatrix::from_columns(cod.dim(), &cols);
        let inverse = inverse(&coeffs)?;
        Ok(CommutantIso {
            domain: domain.clone(),
            codomain: codomain.clone(),
            coeffs,
            inverse,
        })
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let (dom, cod) = (self.domain.algebra(), self.codomain.algebra());
        cod.element(&self.coeffs.mat_vec(&dom.coords(x)))
    }

    pub fn apply_inverse(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let (dom, cod) = (self.domain.algebra(), self.codomain.algebra());
        dom.element(&self.inverse.mat_vec(&cod.coords(m)))
    }

    /// `ι ∘ θ ∘ ι⁻¹` on the codomain.
    pub fn conjugate(&self, theta: &ModularAutomorphism) -> Result<ModularAutomorphism> {
        ModularAutomorphism::from_fn(&self.codomain, |m| self.apply(&theta.apply(&self.apply_inverse(m))))
    }

    /// `*`-isomorphism residuals on the domain basis.
    pub fn entries(&self, name: &str, anchor: &str) -> Vec<CheckEntry> {
        let basis = self.domain.basis();
        let imgs: Vec<ComplexMatrix> = basis.iter().map(|x| self.apply(x)).collect();
        let (mut mult, mut adj): (f64, f64) = (0.0, 0.0);
        for (x, ix) in basis.iter().zip(&imgs) {
            adj = adj.max((&self.apply(&x.adjoint()) - &ix.adjoint()).frobenius_norm());
            for (y, iy) in basis.iter().zip(&imgs) {
                mult = mult.max((&self.apply(&(x * y)) - &(ix * iy)).frobenius_norm());
            }
        }
        let unit = (&self.apply(self.domain.algebra().unit()) - self.codomain.algebra().unit()).frobenius_norm();
        vec![
            CheckEntry::new(format!("modular.{name}_multiplicative"), mult, ALGEBRAIC_TOL, anchor),
            CheckEntry::new(format!("modular.{name}_adjoint"), adj, ALGEBRAIC_TOL, anchor),
            CheckEntry::new(format!("modular.{name}_unital"), unit, ALGEBRAIC_TOL, anchor),
            CheckEntry::at_least(format!("modular.{name}_invertible"), 1.0 / condition_number(&self.coeffs), 1e-8, anchor),
        ]
    }
}

const PI: &str = "π(c) = (c⊗Iₙ)p";
const RHO: &str = "ρ = Ψ_D⁻¹∘π";

/// `(c ⊗ Iₙ) p` with `c ⊗ Iₙ = diag(c, …, c)`.
fn pi_element(real: &CornerRealization, c: &ComplexMatrix) -> ComplexMatrix {
    &ComplexMatrix::identity(real.n).kron(c) * &real.p
}

/// `π: A′∩C → (pMₙ(A)p)′∩pMₙ(C)p`.
pub fn pi_iso(real: &CornerRealization) -> Result<CommutantIso> {
    let dom = relative_commutant(&real.pair.left().clone())?;
    let cod = relative_commutant(real.corner.right())?;
    CommutantIso::from_fn(&dom, &cod, |c| pi_element(real, c))
}

/// `π⁻¹` through the fullness witnesses: `Σⱼ aⱼ m bⱼ = c ⊗ Iₙ`, read off the first block.
pub fn pi_inverse_by_witnesses(real: &CornerRealization, m: &ComplexMatrix) -> ComplexMatrix {
    let full = real.witness_sum(m);
    let p = real.pair.left().ambient_dim();
    full.block(0, 0, p, p)
}

/// `ρ: A′∩C → B′∩D`.
pub fn rho_iso(real: &CornerRealization) -> Result<CommutantIso> {
    let dom = relative_commutant(real.pair.left())?;
    let cod = relative_commutant(real.pair.right())?;
    CommutantIso::from_fn(&dom, &cod, |c| real.psi_d_inv(&pi_element(real, c)))
}

/// Dimension and span comparison of the corner commutant with `(Mₙ(A)′∩Mₙ(C))p`,
/// plus the witness inversion of `π`.
pub fn pi_checks(real: &CornerRealization, pi: &CommutantIso) -> Result<Vec<CheckEntry>> {
    const EQ: &str = "(pMₙ(A)p)′∩pMₙ(C)p = (Mₙ(A)′∩Mₙ(C))p";
    let amp = relative_commutant(real.amplified())?;
    let compressed: Vec<ComplexMatrix> = amp.basis().iter().map(|m| m * &real.p).collect();
    let rhs = OrthonormalSpan::from_vectors(real.p.rows(), real.p.cols(), &compressed, 1e-10);
    let lhs = pi.codomain.algebra().span();
    let mut out = pi.entries("pi", PI);
    out.push(CheckEntry::flag("modular.pi_commutant_dims", lhs.dim() == rhs.dim(), EQ));
    out.push(CheckEntry::new("modular.pi_commutant_span", lhs.span_distance(&rhs), ALGEBRAIC_TOL, EQ));
    let mut inv: f64 = 0.0;
    for c in pi.domain.basis() {
        let back = pi_inverse_by_witnesses(real, &pi.apply(c));
        inv = inv.max((&back - c).frobenius_norm());
        // c ⊗ Iₙ in full, not only its first block
        let full = real.witness_sum(&pi.apply(c));
        inv = inv.max((&full - &ComplexMatrix::identity(real.n).kron(c)).frobenius_norm());
    }
    out.push(CheckEntry::new(
        "modular.pi_inverse_witness",
        inv,
        1e-10,
        "π⁻¹((c⊗Iₙ)p) = Σ aⱼ(c⊗Iₙ)pbⱼ",
    ));
    Ok(out)
}

/// `θ^{F(φ)} = π∘θ^φ∘π⁻¹` and `θ^{f(φ)} = ρ∘θ^φ∘ρ⁻¹`, each side computed from
/// its own quasi-basis.
pub fn conjugation_check(real: &CornerRealization, qb: &QuasiBasis) -> Result<Vec<CheckEntry>> {
    let phi = &qb.owner;
    let pi = pi_iso(real)?;
    let rho = rho_iso(real)?;
    let theta = theta_from_quasibasis(qb, &pi.domain)?;
    let corner_qb = transfer_quasi_basis(real, qb)?;
    let theta_corner = theta_from_quasibasis(&corner_qb, &pi.codomain)?;
    let back_qb = pull_back(real, &corner_qb, phi)?;
    let theta_f = theta_from_quasibasis(&back_qb, &rho.codomain)?;
    let mut out = pi_checks(real, &pi)?;
    out.extend(rho.entries("rho", RHO));
    out.push(CheckEntry::new(
        "modular.conjugation_corner",
        theta_corner.distance(&pi.conjugate(&theta)?),
        ALGEBRAIC_TOL,
        "θ^{F(φ)} = π∘θ^φ∘π⁻¹",
    ));
    out.push(CheckEntry::new(
        "modular.conjugation_transfer",
        theta_f.distance(&rho.conjugate(&theta)?),
        ALGEBRAIC_TOL,
        "θ^{f(φ)} = ρ∘θ^φ∘ρ⁻¹",
    ));
    let psi = f_forward(&real.pair, phi)?;
    out.push(CheckEntry::new(
        "modular.condition_transfer",
        modular_residual(&psi, &theta_f),
        ALGEBRAIC_TOL,
        MODULAR,
    ));
    Ok(out)
}

/// `φ_h(c) = φ(hc)`.
pub fn shift_left(phi: &BimoduleMap, h: &ComplexMatrix) -> Result<BimoduleMap> {
    let m = BimoduleMap::from_fn(phi.source().clone(), phi.target().clone(), |c| phi.apply(&(h * c)))?;
    m.validate()?;
    Ok(m)
}

/// `_hφ(c) = φ(ch)`.
pub fn shift_right(phi: &BimoduleMap, h: &ComplexMatrix) -> Result<BimoduleMap> {
    let m = BimoduleMap::from_fn(phi.source().clone(), phi.target().clone(), |c| phi.apply(&(c * h)))?;
    m.validate()?;
    Ok(m)
}

fn require_in_commutant(alg: &FdStarAlgebra, h: &ComplexMatrix) -> Result<()> {
    let r = alg.residual(h);
    if r > ALGEBRAIC_TOL * h.frobenius_norm().max(1.0) {
        return Err(Error::NotInAlgebra(r));
    }
    Ok(())
}

/// `F(φ_h) = F(φ)_{π(h)}`, `F(_hφ) = _{π(h)}F(φ)` and the analogues for `f` with `ρ(h)`.
pub fn shifted_maps(real: &CornerRealization, phi: &BimoduleMap, h: &ComplexMatrix) -> Result<Vec<CheckEntry>> {
    let comm = relative_commutant(real.pair.left())?;
    require_in_commutant(comm.algebra(), h)?;
    let pi_h = pi_element(real, h);
    let rho_h = real.psi_d_inv(&pi_h);
    let phi_l = shift_left(phi, h)?;
    let phi_r = shift_right(phi, h)?;
    let big = f_corner(real, phi)?;
    let small = f_forward(&real.pair, phi)?;
    let mut out = Vec::new();
    let cases: [(&str, &BimoduleMap, bool, &str); 2] = [
        ("left", &phi_l, true, "F(φ_h) = F(φ)_{π(h)}, f(φ_h) = f(φ)_{ρ(h)}"),
        ("right", &phi_r, false, "F(_hφ) = _{π(h)}F(φ), f(_hφ) = _{ρ(h)}f(φ)"),
    ];
    for (side, shifted, left, anchor) in cases {
        let big_s = f_corner(real, shifted)?;
        let small_s = f_forward(&real.pair, shifted)?;
        let big_ref = if left { shift_left(&big, &pi_h)? } else { shift_right(&big, &pi_h)? };
        let small_ref = if left { shift_left(&small, &rho_h)? } else { shift_right(&small, &rho_h)? };
        out.push(CheckEntry::new(format!("modular.shift_{side}_corner"), big_s.distance(&big_ref), ALGEBRAIC_TOL, anchor));
        out.push(CheckEntry::new(format!("modular.shift_{side}_transfer"), small_s.distance(&small_ref), ALGEBRAIC_TOL, anchor));
    }
    Ok(out)
}

/// Modular condition, uniqueness audit and `θ^φ` automorphism checks for one quasi-basis.
pub fn modular_checks(qb: &QuasiBasis, commutant: &CommutantSpace) -> Result<(ModularAutomorphism, Vec<CheckEntry>)> {
    let theta = theta_from_quasibasis(qb, commutant)?;
    let mut out = theta.entries("modular.theta");
    for c in &mut out {
        c.paper_ref = THETA.into();
    }
    out.push(check_modular_condition(&qb.owner, &theta));
    out.extend(solve_modular_uniqueness(&qb.owner, commutant)?.entries(&theta));
    Ok((theta, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bimodule::{make_corner_pair, EquivalencePair};
    use crate::fdca::{trace_conditional_expectation, UnitalInclusion};
    use crate::quasibasis::construct_for_ce;

    fn m2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::matrix_unit(2, 0, 1)]).unwrap()
    }

    fn scalar_inc() -> UnitalInclusion {
        UnitalInclusion::new(FdStarAlgebra::from_generators(2, &[]).unwrap(), m2()).unwrap()
    }

    fn weighted(h: &[f64]) -> (UnitalInclusion, QuasiBasis) {
        let inc = scalar_inc();
        let e = trace_conditional_expectation(&inc).unwrap();
        let qb = construct_for_ce(&e, None).unwrap();
        let dens = ComplexMatrix::real_diagonal(&h.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
        let phi = shift_left(&e, &dens).unwrap();
        (inc, qb.for_left_shift(&dens, phi).unwrap())
    }

    fn scalar_corner() -> CornerRealization {
        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 0.0, 0.0]);
        CornerRealization::new(&make_corner_pair(&scalar_inc(), 2, &p).unwrap()).unwrap()
    }

    #[test]
    fn tracial_theta_is_identity() {
        let inc = scalar_inc();
        let e = trace_conditional_expectation(&inc).unwrap();
        let qb = construct_for_ce(&e, None).unwrap();
        let comm = relative_commutant(&inc).unwrap();
        let (theta, entries) = modular_checks(&qb, &comm).unwrap();
        assert!(theta.distance(&ModularAutomorphism::identity(&comm)) < 1e-10);
        assert!(entries.iter().all(|c| c.pass), "{entries:?}");
    }

    #[test]
    fn center_theta_is_identity() {
        let inc = UnitalInclusion::identity(m2());
        let id = BimoduleMap::identity(m2());
        let qb = construct_for_ce(&id, Some(&[ComplexMatrix::identity(2)])).unwrap();
        let comm = relative_commutant(&inc).unwrap();
        assert_eq!(comm.dim(), 1);
        let (theta, entries) = modular_checks(&qb, &comm).unwrap();
        assert!(theta.distance(&ModularAutomorphism::identity(&comm)) < 1e-10);
        assert!(entries.iter().all(|c| c.pass));
    }

    #[test]
    fn weighted_trace_theta_is_conjugation_by_h() {
        for (h, ratio) in [([2.0 / 3.0, 1.0 / 3.0], 2.0), ([0.9, 0.1], 9.0)] {
            let (inc, qb) = weighted(&h);
            let comm = relative_commutant(&inc).unwrap();
            let (theta, entries) = modular_checks(&qb, &comm).unwrap();
            assert!(entries.iter().all(|c| c.pass), "{entries:?}");
            let e12 = ComplexMatrix::matrix_unit(2, 0, 1);
            assert!((&theta.apply(&e12) - &e12.scale_real(ratio)).max_abs() < 1e-9);
            let hm = ComplexMatrix::real_diagonal(&h);
            let hinv = inverse(&hm).unwrap();
            let oracle = ModularAutomorphism::from_fn(&comm, |x| &(&hm * x) * &hinv).unwrap();
            let solved = solve_modular_uniqueness(&qb.owner, &comm).unwrap();
            assert_eq!(solved.rank, 4);
            assert!(solved.solution.distance(&oracle) < 1e-9);
            // the identity does not satisfy the condition for non-scalar h
            assert!(!check_modular_condition(&qb.owner, &ModularAutomorphism::identity(&comm)).pass);
        }
    }

    #[test]
    fn pi_trivial_and_corner() {
        let inc = scalar_inc();
        let triv = CornerRealization::new(&EquivalencePair::trivial(&inc)).unwrap();
        let pi = pi_iso(&triv).unwrap();
        for c in pi.domain.basis() {
            assert!((&pi.apply(c) - c).max_abs() < 1e-10);
        }
        let real = scalar_corner();
        let pi = pi_iso(&real).unwrap();
        assert_eq!(pi.domain.dim(), 4);
        assert_eq!(pi.codomain.dim(), 4);
        let entries = pi_checks(&real, &pi).unwrap();
        assert!(entries.iter().all(|c| c.pass), "{entries:?}");
    }

    #[test]
    fn conjugation_identities() {
        let real = scalar_corner();
        let (_, qb) = weighted(&[2.0 / 3.0, 1.0 / 3.0]);
        let entries = conjugation_check(&real, &qb).unwrap();
        assert!(entries.iter().all(|c| c.pass), "{entries:?}");

        let e = trace_conditional_expectation(&scalar_inc()).unwrap();
        let qb = construct_for_ce(&e, None).unwrap();
        assert!(conjugation_check(&real, &qb).unwrap().iter().all(|c| c.pass));
        let rho = rho_iso(&real).unwrap();
        let back = pull_back(&real, &transfer_quasi_basis(&real, &qb).unwrap(), &e).unwrap();
        let theta_f = theta_from_quasibasis(&back, &rho.codomain).unwrap();
        assert!(theta_f.distance(&ModularAutomorphism::identity(&rho.codomain)) < 1e-9);
    }

    #[test]
    fn shift_identities() {
        let real = scalar_corner();
        let (inc, qb) = weighted(&[2.0 / 3.0, 1.0 / 3.0]);
        let h = ComplexMatrix::real_diagonal(&[2.0 / 3.0_f64.sqrt() * 0.0 + 2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()]);
        let entries = shifted_maps(&real, &qb.owner, &h).unwrap();
        assert!(entries.iter().all(|c| c.pass), "{entries:?}");
        let one = ComplexMatrix::identity(2);
        assert!(shift_left(&qb.owner, &one).unwrap().distance(&qb.owner) < 1e-12);
        let zero = shift_left(&qb.owner, &ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(f_forward(&real.pair, &zero).unwrap().coeffs().max_abs(), 0.0);
        // the diagonal algebra's commutant excludes off-diagonal shifts
        let d = FdStarAlgebra::from_generators(2, &[ComplexMatrix::real_diagonal(&[1.0, 2.0])]).unwrap();
        let dinc = UnitalInclusion::new(d, m2()).unwrap();
        let de = trace_conditional_expectation(&dinc).unwrap();
        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 1.0, 0.0]);
        let dreal = CornerRealization::new(&make_corner_pair(&dinc, 2, &p).unwrap()).unwrap();
        assert!(shifted_maps(&dreal, &de, &ComplexMatrix::matrix_unit(2, 0, 1)).is_err());
        let _ = inc;
    }
}
