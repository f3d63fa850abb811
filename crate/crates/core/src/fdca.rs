//! Finite-dimensional C*-algebras realized inside an ambient matrix algebra.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_residual, Error, Result};
use crate::linalg::{
    complex_gaussian, hermitian_eigen_unchecked, min_eig_hermitian, nullspace_with_tol,
    unitary_from_hermitian, ComplexMatrix, OrthonormalSpan, C64, ALGEBRAIC_TOL, RANK_TOL,
};
use crate::transfer::BimoduleMap;

/// Closure checks switch from all basis pairs to randomized products above this dimension.
const PAIRWISE_CLOSURE_LIMIT: usize = 24;

/// A unital *-subalgebra of `M_N`, stored with a Hilbert–Schmidt orthonormal basis.
///
/// The unit need not be the ambient identity (corner algebras have unit `p`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "AlgebraWire", into = "AlgebraWire")]
pub struct FdStarAlgebra {
    ambient_dim: usize,
    span: OrthonormalSpan,
    unit: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct AlgebraWire {
    ambient_dim: usize,
    basis: Vec<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<ComplexMatrix>,
}

impl From<FdStarAlgebra> for AlgebraWire {
    fn from(a: FdStarAlgebra) -> Self {
        AlgebraWire {
            ambient_dim: a.ambient_dim,
            basis: a.span.basis().to_vec(),
            unit: Some(a.unit),
        }
    }
}

impl TryFrom<AlgebraWire> for FdStarAlgebra {
    type Error = Error;
    fn try_from(w: AlgebraWire) -> Result<Self> {
        FdStarAlgebra::from_orthonormal_basis(w.ambient_dim, w.basis, w.unit)
    }
}

impl FdStarAlgebra {
    /// Algebra spanned by `spanning` with the given unit; validated on exit.
    pub fn new(ambient_dim: usize, spanning: &[ComplexMatrix], unit: ComplexMatrix) -> Result<Self> {
        check_square(ambient_dim, spanning)?;
        let span = OrthonormalSpan::from_vectors(ambient_dim, ambient_dim, spanning, RANK_TOL);
        let alg = FdStarAlgebra {
            ambient_dim,
            span,
            unit,
        };
        alg.validate()?;
        Ok(alg)
    }

    /// Adopt a stored orthonormal basis as-is; the unit is recovered from the
    /// span when absent (the unique element acting as identity on the basis).
    pub fn from_orthonormal_basis(
        ambient_dim: usize,
        basis: Vec<ComplexMatrix>,
        unit: Option<ComplexMatrix>,
    ) -> Result<Self> {
        check_square(ambient_dim, &basis)?;
        if basis.is_empty() {
            return Err(Error::InvalidInput("algebra basis is empty".into()));
        }
        let span = OrthonormalSpan::from_orthonormal(ambient_dim, ambient_dim, basis)?;
        let unit = match unit {
            Some(u) => u,
            None => recover_unit(&span)?,
        };
        let alg = FdStarAlgebra {
            ambient_dim,
            span,
            unit,
        };
        alg.validate()?;
        Ok(alg)
    }

    /// Smallest unital *-subalgebra of `M_N` containing `gens`.
    pub fn from_generators(ambient_dim: usize, gens: &[ComplexMatrix]) -> Result<Self> {
        Self::generated_with_unit(ComplexMatrix::identity(ambient_dim), gens)
    }

    /// *-algebra generated by `gens` with `unit` adjoined as the identity.
    pub fn generated_with_unit(unit: ComplexMatrix, gens: &[ComplexMatrix]) -> Result<Self> {
        let n = unit.rows();
        check_square(n, gens)?;
        let mut letters: Vec<ComplexMatrix> = Vec::with_capacity(2 * gens.len());
        for g in gens {
            letters.push(g.clone());
            letters.push(g.adjoint());
        }
        let mut span = OrthonormalSpan::empty(n, n);
        span.try_push(&unit, RANK_TOL);
        let mut frontier = 0;
        while frontier < span.dim() {
            let word = span.basis()[frontier].clone();
            for l in &letters {
                span.try_push(&(&word * l), RANK_TOL);
                if span.dim() > n * n {
                    return Err(Error::ClosureOverflow(n * n));
                }
            }
            frontier += 1;
        }
        // re-orthonormalize in one shot for stability
        let span = OrthonormalSpan::from_vectors(n, n, span.basis(), RANK_TOL);
        let alg = FdStarAlgebra {
            ambient_dim: n,
            span,
            unit,
        };
        alg.validate()?;
        Ok(alg)
    }

    /// `M_n(self)` with basis `e_kl ⊗ a_i` in the block convention `kron(e_kl, a)`.
    pub fn amplify(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("amplification size must be positive".into()));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let mut basis = Vec::with_capacity(n * n * self.dim());
        for k in 0..n {
            for l in 0..n {
                let e = ComplexMatrix::matrix_unit(n, k, l);
                for a in self.basis() {
                    basis.push(e.kron(a));
                }
            }
        }
        let unit = ComplexMatrix::identity(n).kron(&self.unit);
        let m = self.ambient_dim * n;
        let alg = FdStarAlgebra {
            ambient_dim: m,
            span: OrthonormalSpan::from_orthonormal(m, m, basis)?,
            unit,
        };
        alg.validate()?;
        Ok(alg)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.span.dim()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        self.span.basis()
    }

    pub fn span(&self) -> &OrthonormalSpan {
        &self.span
    }

    pub fn unit(&self) -> &ComplexMatrix {
        &self.unit
    }

    pub fn coords(&self, m: &ComplexMatrix) -> Vec<C64> {
        self.span.coords(m)
    }

    pub fn element(&self, coords: &[C64]) -> ComplexMatrix {
        self.span.element(coords)
    }

    pub fn project(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.span.project(m)
    }

    /// Residual of `m` outside the span.
    pub fn residual(&self, m: &ComplexMatrix) -> f64 {
        if m.shape() != (self.ambient_dim, self.ambient_dim) {
            return f64::INFINITY;
        }
        self.span.residual(m)
    }

    pub fn contains(&self, m: &ComplexMatrix, tol: f64) -> bool {
        self.span.contains(m, tol)
    }

    /// Worst membership residual between the two spans (infinite on dimension mismatch).
    pub fn span_distance(&self, other: &FdStarAlgebra) -> f64 {
        self.span.span_distance(&other.span)
    }

    /// Largest closure / unit residual; `validate` compares it against tolerances.
    pub fn closure_residual(&self) -> f64 {
        let basis = self.basis();
        let mut worst: f64 = 0.0;
        for b in basis {
            worst = worst.max(self.span.residual(&b.adjoint()));
        }
        if basis.len() <= PAIRWISE_CLOSURE_LIMIT {
            for a in basis {
                for b in basis {
                    worst = worst.max(self.span.residual(&(a * b)));
                }
            }
        } else {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
            for _ in 0..2 {
                let r = self.random_element(&mut rng);
                let scale = r.frobenius_norm().max(1.0);
                for b in basis {
                    worst = worst.max(self.span.residual(&(b * &r)) / scale);
                    worst = worst.max(self.span.residual(&(&r * b)) / scale);
                }
            }
        }
        worst
    }

    pub fn unit_residual(&self) -> f64 {
        let mut worst = self.span.residual(&self.unit);
        for b in self.basis() {
            worst = worst.max((&(&self.unit * b) - b).frobenius_norm());
            worst = worst.max((&(b * &self.unit) - b).frobenius_norm());
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.unit.shape() != (self.ambient_dim, self.ambient_dim) {
            return Err(Error::DimensionMismatch("unit has the wrong shape".into()));
        }
        if self.dim() == 0 {
            return Err(Error::InvalidInput("algebra is zero-dimensional".into()));
        }
        check_residual("algebra closure", self.closure_residual(), ALGEBRAIC_TOL)?;
        check_residual("algebra unit", self.unit_residual(), 1e-10)
    }

    /// Positivity of an element of the algebra.
    pub fn is_positive(&self, x: &ComplexMatrix) -> Result<bool> {
        let res = self.residual(x);
        if res > ALGEBRAIC_TOL * x.frobenius_norm().max(1.0) {
            return Err(Error::NotInAlgebra(res));
        }
        let scale = x.frobenius_norm();
        if x.hermitian_residual() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Ok(false);
        }
        if scale == 0.0 {
            return Ok(true);
        }
        Ok(min_eig_hermitian(x)? >= -ALGEBRAIC_TOL * crate::linalg::operator_norm(x))
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        let coords: Vec<C64> = (0..self.dim()).map(|_| complex_gaussian(rng)).collect();
        self.element(&coords)
    }

    pub fn random_hermitian<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        self.random_element(rng).hermitian_part()
    }

    /// `c* c` for a random element `c`.
    pub fn random_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        let c = self.random_element(rng);
        &c.adjoint() * &c
    }

    /// `exp(i h)` restricted to the unit, for a random Hermitian `h` in the algebra.
    pub fn random_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        let h = self.random_hermitian(rng);
        &unitary_from_hermitian(&h) * &self.unit
    }

    /// Minimal projections obtained as spectral projections of a generic
    /// positive element; they sum to the unit.
    pub fn minimal_projections<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ComplexMatrix> {
        // spectrum of unit + g*g sits in [1, ∞) on the unit and at 0 off it
        let g = self.random_element(rng);
        let h = &self.unit + &(&g.adjoint() * &g);
        let eig = hermitian_eigen_unchecked(&h);
        let n = self.ambient_dim;
        let top = eig.values.iter().copied().fold(0.0, f64::max);
        let mut out = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && eig.values[end] - eig.values[end - 1] <= 1e-7 * top {
                end += 1;
            }
            if eig.values[start] > 0.5 {
                let mut p = ComplexMatrix::zeros(n, n);
                for k in start..end {
                    let v = eig.vectors.column_at(k);
                    p = &p + &(&v * &v.adjoint());
                }
                out.push(p);
            }
            start = end;
        }
        out
    }
}

fn check_square(n: usize, mats: &[ComplexMatrix]) -> Result<()> {
    for m in mats {
        if m.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "expected {n}x{n} element, got {:?}",
                m.shape()
            )));
        }
    }
    Ok(())
}

/// Solve `u b_i = b_i` over the span for the identity element of a stored basis.
fn recover_unit(span: &OrthonormalSpan) -> Result<ComplexMatrix> {
    let basis = span.basis();
    let n = span.shape().0;
    let d = basis.len();
    let mut op = ComplexMatrix::zeros(2 * d * n * n, d);
    let mut rhs = ComplexMatrix::zeros(2 * d * n * n, 1);
    for (j, bj) in basis.iter().enumerate() {
        for (i, bi) in basis.iter().enumerate() {
            let l = bj * bi;
            let r = bi * bj;
            for (k, (x, y)) in l.data().iter().zip(r.data()).enumerate() {
                op.set((2 * i) * n * n + k, j, *x);
                op.set((2 * i + 1) * n * n + k, j, *y);
            }
        }
    }
    for (i, bi) in basis.iter().enumerate() {
        for (k, z) in bi.data().iter().enumerate() {
            rhs.set((2 * i) * n * n + k, 0, *z);
            rhs.set((2 * i + 1) * n * n + k, 0, *z);
        }
    }
    let (x, res) = crate::linalg::solve_least_squares(&op, &rhs);
    check_residual("unit recovery", res, 1e-9)?;
    Ok(span.element(&x.column_entries(0)))
}

/// A unital inclusion `A ⊆ C` inside a common ambient matrix algebra.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "InclusionWire", into = "InclusionWire")]
pub struct UnitalInclusion {
    small: FdStarAlgebra,
    large: FdStarAlgebra,
}

#[derive(Serialize, Deserialize)]
struct InclusionWire {
    #[serde(rename = "A")]
    small: FdStarAlgebra,
    #[serde(rename = "C")]
    large: FdStarAlgebra,
}

impl From<UnitalInclusion> for InclusionWire {
    fn from(i: UnitalInclusion) -> Self {
        InclusionWire {
            small: i.small,
            large: i.large,
        }
    }
}

impl TryFrom<InclusionWire> for UnitalInclusion {
    type Error = Error;
    fn try_from(w: InclusionWire) -> Result<Self> {
        UnitalInclusion::new(w.small, w.large)
    }
}

impl UnitalInclusion {
    pub fn new(small: FdStarAlgebra, large: FdStarAlgebra) -> Result<Self> {
        if small.ambient_dim != large.ambient_dim {
            return Err(Error::InclusionMismatch(format!(
                "ambient dimensions {} and {}",
                small.ambient_dim, large.ambient_dim
            )));
        }
        let unit_gap = (&small.unit - &large.unit).frobenius_norm();
        if unit_gap > 1e-10 {
            return Err(Error::InclusionMismatch(format!(
                "units differ by {unit_gap:.3e}"
            )));
        }
        for a in small.basis() {
            let res = large.residual(a);
            if res > ALGEBRAIC_TOL {
                return Err(Error::NotInAlgebra(res));
            }
        }
        Ok(UnitalInclusion { small, large })
    }

    /// `C ⊆ C`.
    pub fn identity(alg: FdStarAlgebra) -> Self {
        UnitalInclusion {
            small: alg.clone(),
            large: alg,
        }
    }

    pub fn small(&self) -> &FdStarAlgebra {
        &self.small
    }

    pub fn large(&self) -> &FdStarAlgebra {
        &self.large
    }

    pub fn ambient_dim(&self) -> usize {
        self.small.ambient_dim
    }

    pub fn amplify(&self, n: usize) -> Result<Self> {
        UnitalInclusion::new(self.small.amplify(n)?, self.large.amplify(n)?)
    }

    /// Same ambient data up to span equality.
    pub fn matches(&self, other: &UnitalInclusion, tol: f64) -> bool {
        self.ambient_dim() == other.ambient_dim()
            && (&self.small.unit - &other.small.unit).frobenius_norm() <= tol
            && self.small.span_distance(&other.small) <= tol
            && self.large.span_distance(&other.large) <= tol
    }
}

/// The relative commutant `A' ∩ C`, itself a unital *-subalgebra of `C`.
#[derive(Clone, Debug)]
pub struct CommutantSpace {
    inclusion: UnitalInclusion,
    algebra: FdStarAlgebra,
}

impl CommutantSpace {
    pub fn inclusion(&self) -> &UnitalInclusion {
        &self.inclusion
    }

    pub fn algebra(&self) -> &FdStarAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        self.algebra.basis()
    }

    /// Largest commutator `[x, a]` over commutant and small-algebra bases.
    pub fn commutator_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in self.basis() {
            for a in self.inclusion.small.basis() {
                worst = worst.max((&(x * a) - &(a * x)).frobenius_norm());
            }
        }
        worst
    }
}

/// Kernel of `c ↦ [c, a_i]` over the coordinates of `C`.
pub fn relative_commutant(inc: &UnitalInclusion) -> Result<CommutantSpace> {
    let c = inc.large();
    let a = inc.small();
    let n = inc.ambient_dim();
    let nn = n * n;
    let mut op = ComplexMatrix::zeros(a.dim() * nn, c.dim());
    for (k, ck) in c.basis().iter().enumerate() {
        for (i, ai) in a.basis().iter().enumerate() {
            let comm = &(ck * ai) - &(ai * ck);
            for (e, z) in comm.data().iter().enumerate() {
                op.set(i * nn + e, k, *z);
            }
        }
    }
    let kernel = nullspace_with_tol(&op, RANK_TOL);
    let elements: Vec<ComplexMatrix> = kernel
        .iter()
        .map(|v| c.element(&v.column_entries(0)))
        .collect();
    let algebra = FdStarAlgebra::new(n, &elements, c.unit().clone())?;
    let space = CommutantSpace {
        inclusion: inc.clone(),
        algebra,
    };
    check_residual("commutator", space.commutator_residual(), ALGEBRAIC_TOL)?;
    Ok(space)
}

/// Commutant of `alg` inside the full ambient matrix algebra `M_N`.
pub fn ambient_commutant(alg: &FdStarAlgebra) -> Result<FdStarAlgebra> {
    let n = alg.ambient_dim();
    let nn = n * n;
    let mut op = ComplexMatrix::zeros(alg.dim() * nn, nn);
    for e in 0..nn {
        let unit = ComplexMatrix::matrix_unit(n, e / n, e % n);
        for (i, b) in alg.basis().iter().enumerate() {
            let comm = &(&unit * b) - &(b * &unit);
            for (k, z) in comm.data().iter().enumerate() {
                op.set(i * nn + k, e, *z);
            }
        }
    }
    let kernel = nullspace_with_tol(&op, RANK_TOL);
    let elements: Vec<ComplexMatrix> = kernel.iter().map(|v| v.reshape(n, n)).collect();
    FdStarAlgebra::new(n, &elements, ComplexMatrix::identity(n))
}

/// The Hilbert–Schmidt orthogonal projection of `C` onto `A`, validated as a
/// conditional expectation.
pub fn trace_conditional_expectation(inc: &UnitalInclusion) -> Result<BimoduleMap> {
    let e = BimoduleMap::from_fn(inc.large().clone(), inc.small().clone(), |c| {
        inc.small().project(c)
    })?;
    validate_conditional_expectation(&e, 16, 0xce)?;
    Ok(e)
}

/// Residuals of the conditional-expectation axioms on the target basis and
/// `samples` random positive elements.
#[derive(Clone, Debug)]
pub struct ExpectationReport {
    pub fixes_subalgebra: f64,
    pub bimodule: f64,
    pub positivity: f64,
    pub trace: f64,
    pub idempotence: f64,
}

pub fn expectation_report(e: &BimoduleMap, samples: usize, seed: u64) -> ExpectationReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let fixes_subalgebra = e
        .target()
        .basis()
        .iter()
        .map(|a| (&e.apply(a) - a).frobenius_norm())
        .fold(0.0, f64::max);
    let bimodule = e.bimodule_residual();
    let mut positivity: f64 = 0.0;
    for _ in 0..samples {
        let c = e.source().random_positive(&mut rng);
        let out = e.apply(&c).hermitian_part();
        let scale = crate::linalg::operator_norm(&c).max(f64::MIN_POSITIVE);
        let m = min_eig_on_unit(&out, e.target().unit());
        positivity = positivity.max((-m / scale).max(0.0));
    }
    let trace = e
        .source()
        .basis()
        .iter()
        .map(|c| (e.apply(c).trace() - c.trace()).norm())
        .fold(0.0, f64::max);
    let idempotence = e
        .source()
        .basis()
        .iter()
        .map(|c| {
            let once = e.apply(c);
            (&e.apply(&once) - &once).frobenius_norm()
        })
        .fold(0.0, f64::max);
    ExpectationReport {
        fixes_subalgebra,
        bimodule,
        positivity,
        trace,
        idempotence,
    }
}

fn validate_conditional_expectation(e: &BimoduleMap, samples: usize, seed: u64) -> Result<()> {
    let r = expectation_report(e, samples, seed);
    check_residual("expectation fixes subalgebra", r.fixes_subalgebra, ALGEBRAIC_TOL)?;
    check_residual("expectation bimodule property", r.bimodule, ALGEBRAIC_TOL)?;
    check_residual("expectation positivity", r.positivity, ALGEBRAIC_TOL)?;
    check_residual("expectation trace", r.trace, ALGEBRAIC_TOL)?;
    check_residual("expectation idempotence", r.idempotence, ALGEBRAIC_TOL)
}

/// Smallest eigenvalue of a Hermitian `x` compressed to the range of the
/// projection `unit`; eigenvalues of the complement are excluded.
pub fn min_eig_on_unit(x: &ComplexMatrix, unit: &ComplexMatrix) -> f64 {
    let n = x.rows();
    if (unit - &ComplexMatrix::identity(n)).max_abs() <= 1e-12 {
        return hermitian_eigen_unchecked(x).values[0];
    }
    let eig = hermitian_eigen_unchecked(unit);
    let range: Vec<Vec<C64>> = (0..n)
        .filter(|&k| eig.values[k] > 0.5)
        .map(|k| eig.vectors.column_entries(k))
        .collect();
    if range.is_empty() {
        return 0.0;
    }
    let v = ComplexMatrix::from_columns(n, &range);
    let compressed = &(&v.adjoint() * x) * &v;
    hermitian_eigen_unchecked(&compressed).values[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::matrix_unit(2, 0, 1)]).unwrap()
    }

    fn diag2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::real_diagonal(&[1.0, 2.0])]).unwrap()
    }

    fn scalars(n: usize) -> FdStarAlgebra {
        FdStarAlgebra::from_generators(n, &[]).unwrap()
    }

    #[test]
    fn generator_closure_cases() {
        assert_eq!(scalars(2).dim(), 1);
        assert_eq!(m2().dim(), 4);
        let d = diag2();
        assert_eq!(d.dim(), 2);
        assert!(d.contains(&ComplexMatrix::matrix_unit(2, 1, 1), 1e-12));
        assert!(!d.contains(&ComplexMatrix::matrix_unit(2, 0, 1), 1e-6));
    }

    #[test]
    fn amplification_dimensions() {
        let a = diag2();
        assert_eq!(a.amplify(1).unwrap().dim(), 2);
        let one = scalars(1);
        let m3 = one.amplify(3).unwrap();
        assert_eq!(m3.dim(), 9);
        assert!(m3.contains(&ComplexMatrix::matrix_unit(3, 2, 0), 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = ComplexMatrix::random_gaussian(3, 3, &mut rng).hermitian_part();
        let random = FdStarAlgebra::from_generators(3, &[g]).unwrap();
        for n in 1..=3 {
            assert_eq!(random.amplify(n).unwrap().dim(), n * n * random.dim());
        }
    }

    #[test]
    fn relative_commutant_cases() {
        let c = m2();
        let inc = UnitalInclusion::new(scalars(2), c.clone()).unwrap();
        assert_eq!(relative_commutant(&inc).unwrap().dim(), 4);
        let center = relative_commutant(&UnitalInclusion::identity(c.clone())).unwrap();
        assert_eq!(center.dim(), 1);
        let diag = relative_commutant(&UnitalInclusion::new(diag2(), c).unwrap()).unwrap();
        assert_eq!(diag.dim(), 2);
        assert!(diag.algebra().span_distance(&diag2()) < 1e-12);
    }

    #[test]
    fn ambient_commutant_of_amplified_block() {
        // M2 ⊗ I2 inside M4 commutes exactly with I2 ⊗ M2
        let c = FdStarAlgebra::from_generators(
            4,
            &[ComplexMatrix::matrix_unit(2, 0, 1).kron(&ComplexMatrix::identity(2))],
        )
        .unwrap();
        let comm = ambient_commutant(&c).unwrap();
        assert_eq!(comm.dim(), 4);
        assert!(comm.contains(&ComplexMatrix::identity(2).kron(&ComplexMatrix::matrix_unit(2, 1, 0)), 1e-10));
    }

    #[test]
    fn trace_expectation_cases() {
        let c = m2();
        let id = trace_conditional_expectation(&UnitalInclusion::identity(c.clone())).unwrap();
        for b in c.basis() {
            assert!((&id.apply(b) - b).frobenius_norm() < 1e-12);
        }
        let m = ComplexMatrix::from_complex(
            2,
            2,
            &[C64::new(1.0, 0.5), C64::new(2.0, 0.0), C64::new(0.0, 3.0), C64::new(4.0, 0.0)],
        );
        let e = trace_conditional_expectation(&UnitalInclusion::new(scalars(2), c.clone()).unwrap())
            .unwrap();
        let expect = ComplexMatrix::identity(2).scale(m.trace() / 2.0);
        assert!((&e.apply(&m) - &expect).max_abs() < 1e-12);
        let e = trace_conditional_expectation(&UnitalInclusion::new(diag2(), c).unwrap()).unwrap();
        let expect = ComplexMatrix::diagonal(&[m.get(0, 0), m.get(1, 1)]);
        assert!((&e.apply(&m) - &expect).max_abs() < 1e-12);
    }

    #[test]
    fn expectation_is_idempotent_and_contractive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = scalars(1).amplify(3).unwrap();
        let g = ComplexMatrix::random_gaussian(3, 3, &mut rng).hermitian_part();
        let a = FdStarAlgebra::from_generators(3, &[g]).unwrap();
        let e = trace_conditional_expectation(&UnitalInclusion::new(a, c.clone()).unwrap()).unwrap();
        let r = expectation_report(&e, 32, 1);
        assert!(r.idempotence < 1e-9);
        for _ in 0..50 {
            let x = c.random_element(&mut rng);
            let lhs = crate::linalg::operator_norm(&e.apply(&x));
            assert!(lhs <= crate::linalg::operator_norm(&x) + 1e-9);
        }
    }

    #[test]
    fn positivity_cases() {
        let c = m2();
        assert!(c.is_positive(c.unit()).unwrap());
        assert!(!c.is_positive(&ComplexMatrix::identity(2).scale_real(-1.0)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            assert!(c.is_positive(&c.random_positive(&mut rng)).unwrap());
        }
        let d = diag2();
        assert!(matches!(
            d.is_positive(&ComplexMatrix::matrix_unit(2, 0, 1)),
            Err(Error::NotInAlgebra(_))
        ));
    }

    #[test]
    fn unitaries_and_projections_stay_in_corner() {
        // corner algebra e11 M2 e11 ⊕ 0 inside M3 with unit diag(1,1,0)
        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 0.0]);
        let gens = [ComplexMatrix::matrix_unit(3, 0, 1)];
        let alg = FdStarAlgebra::generated_with_unit(p.clone(), &gens).unwrap();
        assert_eq!(alg.dim(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = alg.random_unitary(&mut rng);
        assert!(alg.contains(&u, 1e-10));
        assert!((&(&u.adjoint() * &u) - &p).max_abs() < 1e-10);
        let projs = alg.minimal_projections(&mut rng);
        assert_eq!(projs.len(), 2);
        let mut sum = ComplexMatrix::zeros(3, 3);
        for q in &projs {
            assert!(alg.contains(q, 1e-10));
            assert!((q.trace() - ONE).norm() < 1e-10);
            sum = &sum + q;
        }
        assert!((&sum - &p).max_abs() < 1e-10);
    }

    #[test]
    fn unit_is_recovered_from_stored_basis() {
        let p = ComplexMatrix::real_diagonal(&[0.0, 1.0]);
        let alg = FdStarAlgebra::generated_with_unit(p.clone(), &[]).unwrap();
        let again = FdStarAlgebra::from_orthonormal_basis(2, alg.basis().to_vec(), None).unwrap();
        assert!((again.unit() - &p).max_abs() < 1e-10);
    }

    #[test]
    fn inclusion_rejects_non_contained_or_non_unital() {
        let p = ComplexMatrix::real_diagonal(&[1.0, 0.0]);
        let corner = FdStarAlgebra::generated_with_unit(p, &[]).unwrap();
        assert!(matches!(
            UnitalInclusion::new(corner, m2()),
            Err(Error::InclusionMismatch(_))
        ));
        assert!(UnitalInclusion::new(m2(), diag2()).is_err());
    }

    #[test]
    fn json_round_trip_revalidates() {
        let inc = UnitalInclusion::new(diag2(), m2()).unwrap();
        let text = serde_json::to_string(&inc).unwrap();
        let back: UnitalInclusion = serde_json::from_str(&text).unwrap();
        assert!(back.matches(&inc, 1e-12));
        // corrupt one basis entry: closure or orthonormality must reject it
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["C"]["basis"][1]["data"][0] = serde_json::json!([0.3, 0.1]);
        assert!(serde_json::from_value::<UnitalInclusion>(v).is_err());
    }
}
