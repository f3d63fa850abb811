//! Bimodule maps and the transfer `f: φ ↦ ψ` between bimodule-map spaces of
//! Morita equivalent inclusions, with its corner-route counterpart and the
//! property-transfer checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bimodule::{
    is_equivalent, right_frame, tensor_compose, witness_residual, CornerRealization,
    EquivalencePair, EquivalenceWitness,
};
use crate::error::{check_residual, Error, Result};
use crate::fdca::{expectation_report, min_eig_on_unit, FdStarAlgebra};
use crate::linalg::{
    operator_norm, psd_inverse_sqrt, singular_values, svd, ComplexMatrix, LeastSquares, C64,
    ALGEBRAIC_TOL,
};
use crate::report::CheckEntry;

/// A linear map between two algebras stored as a coefficient matrix over
/// their orthonormal bases (column `k` holds the coordinates of the image of
/// source basis element `k`).
#[derive(Clone, Debug)]
pub struct BimoduleMap {
    source: FdStarAlgebra,
    target: FdStarAlgebra,
    coeffs: ComplexMatrix,
}

impl BimoduleMap {
    pub fn new(source: FdStarAlgebra, target: FdStarAlgebra, coeffs: ComplexMatrix) -> Result<Self> {
        if coeffs.shape() != (target.dim(), source.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix {:?}, expected {}x{}",
                coeffs.shape(),
                target.dim(),
                source.dim()
            )));
        }
        Ok(BimoduleMap {
            source,
            target,
            coeffs,
        })
    }

    /// Tabulate `f` on the source basis; every image must lie in the target.
    pub fn from_fn(
        source: FdStarAlgebra,
        target: FdStarAlgebra,
        f: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    ) -> Result<Self> {
        let mut cols = Vec::with_capacity(source.dim());
        for b in source.basis() {
            let img = f(b);
            let res = target.residual(&img);
            if res > ALGEBRAIC_TOL * img.frobenius_norm().max(1.0) {
                return Err(Error::NotInAlgebra(res));
            }
            cols.push(target.coords(&img));
        }
        let coeffs = ComplexMatrix::from_columns(target.dim(), &cols);
        Ok(BimoduleMap {
            source,
            target,
            coeffs,
        })
    }

    pub fn zero(source: FdStarAlgebra, target: FdStarAlgebra) -> Self {
        let coeffs = ComplexMatrix::zeros(target.dim(), source.dim());
        BimoduleMap {
            source,
            target,
            coeffs,
        }
    }

    pub fn identity(alg: FdStarAlgebra) -> Self {
        let coeffs = ComplexMatrix::identity(alg.dim());
        BimoduleMap {
            source: alg.clone(),
            target: alg,
            coeffs,
        }
    }

    pub fn source(&self) -> &FdStarAlgebra {
        &self.source
    }

    pub fn target(&self) -> &FdStarAlgebra {
        &self.target
    }

    pub fn coeffs(&self) -> &ComplexMatrix {
        &self.coeffs
    }

    pub fn apply(&self, c: &ComplexMatrix) -> ComplexMatrix {
        self.target.element(&self.coeffs.mat_vec(&self.source.coords(c)))
    }

    /// Normalization used by relative tolerances: `max(1, ‖coeffs‖)`.
    pub fn scale(&self) -> f64 {
        operator_norm(&self.coeffs).max(1.0)
    }

    fn same_spaces(&self, other: &BimoduleMap) -> Result<()> {
        if self.source.span_distance(&other.source) > 1e-9
            || self.target.span_distance(&other.target) > 1e-9
        {
            return Err(Error::InclusionMismatch("maps act between different algebras".into()));
        }
        Ok(())
    }

    /// `α·self + β·other`, evaluated through `apply` so differing bases are harmless.
    pub fn combine(&self, alpha: C64, other: &BimoduleMap, beta: C64) -> Result<Self> {
        self.same_spaces(other)?;
        BimoduleMap::from_fn(self.source.clone(), self.target.clone(), |c| {
            let mut out = self.apply(c).scale(alpha);
            out.axpy(beta, &other.apply(c));
            out
        })
    }

    pub fn scaled(&self, s: C64) -> Self {
        BimoduleMap {
            source: self.source.clone(),
            target: self.target.clone(),
            coeffs: self.coeffs.scale(s),
        }
    }

    /// The same map re-expressed over (span-equal) algebras with other bases.
    pub fn rebased(&self, source: &FdStarAlgebra, target: &FdStarAlgebra) -> Result<Self> {
        if self.source.span_distance(source) > 1e-9 || self.target.span_distance(target) > 1e-9 {
            return Err(Error::InclusionMismatch("rebasing onto a different algebra".into()));
        }
        BimoduleMap::from_fn(source.clone(), target.clone(), |c| self.apply(c))
    }

    /// Largest `‖self(b) − other(b)‖` over the source basis.
    pub fn distance(&self, other: &BimoduleMap) -> f64 {
        self.source
            .basis()
            .iter()
            .map(|b| (&self.apply(b) - &other.apply(b)).frobenius_norm())
            .fold(0.0, f64::max)
    }

    /// Largest `‖φ(a c) − a φ(c)‖`, `a` over the target basis.
    pub fn left_module_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let imgs: Vec<ComplexMatrix> = self.source.basis().iter().map(|c| self.apply(c)).collect();
        for a in self.target.basis() {
            for (c, img) in self.source.basis().iter().zip(&imgs) {
                worst = worst.max((&self.apply(&(a * c)) - &(a * img)).frobenius_norm());
            }
        }
        worst
    }

    /// Largest `‖φ(c a) − φ(c) a‖`, `a` over the target basis.
    pub fn right_module_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let imgs: Vec<ComplexMatrix> = self.source.basis().iter().map(|c| self.apply(c)).collect();
        for a in self.target.basis() {
            for (c, img) in self.source.basis().iter().zip(&imgs) {
                worst = worst.max((&self.apply(&(c * a)) - &(img * a)).frobenius_norm());
            }
        }
        worst
    }

    pub fn bimodule_residual(&self) -> f64 {
        self.left_module_residual().max(self.right_module_residual())
    }

    /// Reject maps that are not bimodule maps over their target.
    pub fn validate(&self) -> Result<()> {
        check_residual(
            "bimodule property",
            self.bimodule_residual(),
            ALGEBRAIC_TOL * self.scale(),
        )
    }

    /// Largest `‖φ(c*) − φ(c)*‖` over the source basis.
    pub fn selfadjoint_residual(&self) -> f64 {
        self.source
            .basis()
            .iter()
            .map(|c| (&self.apply(&c.adjoint()) - &self.apply(c).adjoint()).frobenius_norm())
            .fold(0.0, f64::max)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &BimoduleMap) -> Result<Self> {
        BimoduleMap::from_fn(other.source.clone(), self.target.clone(), |c| {
            self.apply(&other.apply(c))
        })
    }
}

fn check_map_over(phi: &BimoduleMap, source: &FdStarAlgebra, target: &FdStarAlgebra) -> Result<()> {
    if phi.source.span_distance(source) > 1e-9 || phi.target.span_distance(target) > 1e-9 {
        return Err(Error::InclusionMismatch(
            "map does not act between the algebras of the pair".into(),
        ));
    }
    phi.validate()
}

/// The intermediate map `τ: Y → X`.
#[derive(Clone, Debug)]
pub struct TauMap {
    pub pair: EquivalencePair,
    pub coeffs: ComplexMatrix,
}

impl TauMap {
    pub fn apply(&self, y: &ComplexMatrix) -> ComplexMatrix {
        self.pair.x().element(&self.coeffs.mat_vec(&self.pair.y().coords(y)))
    }
}

/// Solve `τ(y)·x* = φ(y·x*)` for every basis `x` of `X`, one least-squares
/// system per basis element of `Y`.
pub fn tau_from_phi(pair: &EquivalencePair, phi: &BimoduleMap) -> Result<TauMap> {
    check_map_over(phi, pair.c(), pair.a())?;
    let xs = pair.x().basis();
    let p = pair.left().ambient_dim();
    let block = p * p;
    let mut op = ComplexMatrix::zeros(xs.len() * block, xs.len());
    for (k, xk) in xs.iter().enumerate() {
        for (j, xj) in xs.iter().enumerate() {
            let prod = xk * &xj.adjoint();
            for (e, z) in prod.data().iter().enumerate() {
                op.set(j * block + e, k, *z);
            }
        }
    }
    let ls = LeastSquares::new(&op);
    if !ls.has_full_column_rank() {
        return Err(Error::RankDeficient(format!(
            "A-valued pairing on X has rank {} < {}",
            ls.rank(),
            xs.len()
        )));
    }
    let tol = ALGEBRAIC_TOL * phi.scale();
    let mut cols = Vec::with_capacity(pair.y().dim());
    for y in pair.y().basis() {
        let mut rhs = Vec::with_capacity(xs.len() * block);
        for xj in xs {
            rhs.extend_from_slice(phi.apply(&(y * &xj.adjoint())).data());
        }
        let (sol, res) = ls.solve_vec(&rhs);
        check_residual("τ(y)·x* = φ(y·x*)", res, tol)?;
        cols.push(sol);
    }
    Ok(TauMap {
        pair: pair.clone(),
        coeffs: ComplexMatrix::from_columns(xs.len(), &cols),
    })
}

/// `τ` together with `ψ = f(φ)`.
#[derive(Clone, Debug)]
pub struct Transfer {
    pub tau: TauMap,
    pub psi: BimoduleMap,
}

/// `ψ(d) = Σᵢ xᵢ*·τ(xᵢ·d)` with a right frame, without the condition audit.
pub fn transfer_unchecked(pair: &EquivalencePair, phi: &BimoduleMap) -> Result<Transfer> {
    let tau = tau_from_phi(pair, phi)?;
    let frame = right_frame(pair)?;
    let psi = BimoduleMap::from_fn(pair.d().clone(), pair.b().clone(), |d| {
        let mut out = ComplexMatrix::zeros(d.rows(), d.cols());
        for x in &frame.elements {
            out = &out + &(&x.adjoint() * &tau.apply(&(x * d)));
        }
        out
    })?;
    Ok(Transfer { tau, psi })
}

pub const CONDITION_ANCHORS: [&str; 6] = [
    "τ(c·x) = φ(c)·x",
    "τ(a·y) = a·τ(y)",
    "_A⟨τ(y),x⟩ = φ(_C⟨y,x⟩)",
    "τ(x·d) = x·ψ(d)",
    "τ(y·b) = τ(y)·b",
    "ψ(⟨x,y⟩_D) = ⟨x,τ(y)⟩_B",
];

/// The six defining identities of `(τ, ψ)` on basis elements.
pub fn transfer_conditions(pair: &EquivalencePair, phi: &BimoduleMap, t: &Transfer) -> Vec<CheckEntry> {
    let tau = &t.tau;
    let psi = &t.psi;
    let xs = pair.x().basis();
    let ys = pair.y().basis();
    let tau_y: Vec<ComplexMatrix> = ys.iter().map(|y| tau.apply(y)).collect();
    let mut r = [0.0f64; 6];
    for c in pair.c().basis() {
        let pc = phi.apply(c);
        for x in xs {
            r[0] = r[0].max((&tau.apply(&(c * x)) - &(&pc * x)).frobenius_norm());
        }
    }
    for a in pair.a().basis() {
        for (y, ty) in ys.iter().zip(&tau_y) {
            r[1] = r[1].max((&tau.apply(&(a * y)) - &(a * ty)).frobenius_norm());
        }
    }
    for (y, ty) in ys.iter().zip(&tau_y) {
        for x in xs {
            let lhs = ty * &x.adjoint();
            r[2] = r[2].max((&lhs - &phi.apply(&(y * &x.adjoint()))).frobenius_norm());
            let lhs = psi.apply(&(&x.adjoint() * y));
            r[5] = r[5].max((&lhs - &(&x.adjoint() * ty)).frobenius_norm());
        }
        for b in pair.b().basis() {
            r[4] = r[4].max((&tau.apply(&(y * b)) - &(ty * b)).frobenius_norm());
        }
    }
    for d in pair.d().basis() {
        let pd = psi.apply(d);
        for x in xs {
            r[3] = r[3].max((&tau.apply(&(x * d)) - &(x * &pd)).frobenius_norm());
        }
    }
    let tol = ALGEBRAIC_TOL * phi.scale();
    (0..6)
        .map(|i| CheckEntry::new(format!("construction.condition_{}", i + 1), r[i], tol, CONDITION_ANCHORS[i]))
        .collect()
}

/// `f(φ)` with every defining identity and the bimodule property verified.
pub fn transfer(pair: &EquivalencePair, phi: &BimoduleMap) -> Result<Transfer> {
    let t = transfer_unchecked(pair, phi)?;
    for c in transfer_conditions(pair, phi, &t) {
        if !c.pass {
            return Err(Error::Residual {
                what: c.paper_ref,
                residual: c.residual,
                tolerance: c.tolerance,
            });
        }
    }
    check_residual(
        "bimodule property of f(φ)",
        t.psi.bimodule_residual(),
        ALGEBRAIC_TOL * phi.scale(),
    )?;
    Ok(t)
}

/// `ψ = f(φ)`.
pub fn f_forward(pair: &EquivalencePair, phi: &BimoduleMap) -> Result<BimoduleMap> {
    Ok(transfer(pair, phi)?.psi)
}

/// `f⁻¹(ψ)`: the same construction over the conjugate pair `(X*, Y*)`.
pub fn f_inverse(pair: &EquivalencePair, psi: &BimoduleMap) -> Result<BimoduleMap> {
    f_forward(&pair.conjugate(), psi)
}

/// Apply `φ` to each `P x P` block of an element of `M_k(C)`.
fn blockwise(phi: &BimoduleMap, m: &ComplexMatrix) -> ComplexMatrix {
    let p = phi.source.ambient_dim();
    let k = m.rows() / p;
    let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
    for i in 0..k {
        for j in 0..k {
            out.set_block(i * p, j * p, &phi.apply(&m.block(i * p, j * p, p, p)));
        }
    }
    out
}

/// `φ ⊗ id_{M_k}`.
pub fn amplify_map(phi: &BimoduleMap, k: usize) -> Result<BimoduleMap> {
    if k == 1 {
        return Ok(phi.clone());
    }
    BimoduleMap::from_fn(phi.source.amplify(k)?, phi.target.amplify(k)?, |m| blockwise(phi, m))
}

/// `F(φ) = (φ ⊗ id)` restricted to `pM_n(C)p → pM_n(A)p`.
pub fn f_corner(real: &CornerRealization, phi: &BimoduleMap) -> Result<BimoduleMap> {
    check_map_over(phi, real.pair.c(), real.pair.a())?;
    BimoduleMap::from_fn(real.corner.d().clone(), real.corner.b().clone(), |m| blockwise(phi, m))
}

/// `Ψ_B⁻¹ ∘ F(φ) ∘ Ψ_D`.
pub fn f_via_corner(real: &CornerRealization, phi: &BimoduleMap) -> Result<BimoduleMap> {
    let big_f = f_corner(real, phi)?;
    BimoduleMap::from_fn(real.pair.d().clone(), real.pair.b().clone(), |d| {
        real.psi_b_inv(&big_f.apply(&real.psi_d(d)))
    })
}

/// Largest `‖_A⟨x·F(φ)(d), z⟩ − φ(_C⟨x·d, z⟩)‖` over corner bases.
pub fn corner_identity_residual(real: &CornerRealization, phi: &BimoduleMap, big_f: &BimoduleMap) -> f64 {
    let xs = real.corner.x().basis();
    let mut worst: f64 = 0.0;
    for d in real.corner.d().basis() {
        let fd = big_f.apply(d);
        for x in xs {
            let xfd = x * &fd;
            let xd = x * d;
            for z in xs {
                let lhs = &xfd * &z.adjoint();
                let rhs = phi.apply(&(&xd * &z.adjoint()));
                worst = worst.max((&lhs - &rhs).frobenius_norm());
            }
        }
    }
    worst
}

/// Sampled lower bound on `sup{‖φ(c)‖ : ‖c‖ ≤ 1}`.
#[derive(Clone, Copy, Debug)]
pub struct NormEstimate {
    pub value: f64,
    pub samples: usize,
    pub restarts: usize,
}

/// `‖φ(c)‖` over random unitaries `c = exp(ih)` (the unit ball is their closed
/// convex hull), then alternating ascent from the best candidates: with
/// `η, ξ` the top singular pair of `φ(c)`, move to the polar part of the
/// element representing `c′ ↦ η*φ(c′)ξ`. Each step is non-decreasing.
pub fn map_norm_estimate(phi: &BimoduleMap, samples: usize, restarts: usize, seed: u64) -> NormEstimate {
    if phi.coeffs.max_abs() == 0.0 {
        return NormEstimate {
            value: 0.0,
            samples,
            restarts,
        };
    }
    let src = &phi.source;
    let chunk = 256;
    let chunks = samples.div_ceil(chunk);
    let mut scored: Vec<(f64, ComplexMatrix)> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ci as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let count = chunk.min(samples - ci * chunk);
            (0..count)
                .map(|_| {
                    let spread = 0.25 + 3.0 * rand::Rng::gen::<f64>(&mut rng);
                    let h = src.random_hermitian(&mut rng).scale_real(spread);
                    let u = &crate::linalg::unitary_from_hermitian(&h) * src.unit();
                    (operator_norm(&phi.apply(&u)), u)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let images: Vec<ComplexMatrix> = src.basis().iter().map(|g| phi.apply(g)).collect();
    let best = scored
        .into_iter()
        .take(restarts.max(1))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(v, c)| ascend(phi, &images, c, v))
        .reduce(|| 0.0, f64::max);
    NormEstimate {
        value: best,
        samples,
        restarts,
    }
}

fn ascend(phi: &BimoduleMap, images: &[ComplexMatrix], mut c: ComplexMatrix, mut value: f64) -> f64 {
    let src = &phi.source;
    for _ in 0..200 {
        let dec = svd(&phi.apply(&c));
        let eta = dec.u.column_at(0).adjoint();
        let xi = dec.v.column_at(0);
        let mut r = ComplexMatrix::zeros(c.rows(), c.cols());
        for (g, img) in src.basis().iter().zip(images) {
            let w = (&(&eta * img) * &xi).get(0, 0);
            r.axpy(w.conj(), g);
        }
        let Ok(inv) = psd_inverse_sqrt(&(&r.adjoint() * &r).hermitian_part(), 1e-12) else {
            break;
        };
        let next = &r * &inv.matrix;
        let next_value = operator_norm(&phi.apply(&next));
        if next_value <= value * (1.0 + 1e-13) {
            value = value.max(next_value);
            break;
        }
        value = next_value;
        c = next;
    }
    value
}

/// Positivity and `k`-positivity of `f(φ)` on sampled positive elements,
/// with the selfadjointness transfer on the basis.
pub fn check_positivity_transfer(
    pair: &EquivalencePair,
    phi: &BimoduleMap,
    samples: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<CheckEntry>> {
    let psi = f_forward(pair, phi)?;
    let mut out = Vec::new();
    if phi.selfadjoint_residual() <= ALGEBRAIC_TOL * phi.scale() {
        out.push(CheckEntry::new(
            "properties.selfadjoint",
            psi.selfadjoint_residual(),
            ALGEBRAIC_TOL,
            "f(φ)(d*) = f(φ)(d)*",
        ));
    }
    out.push(CheckEntry::new(
        "properties.positive",
        sampled_negativity(&psi, samples, seed),
        ALGEBRAIC_TOL,
        "d ≥ 0 ⟹ f(φ)(d) ≥ 0",
    ));
    if k > 1 {
        let amp = amplify_map(&psi, k)?;
        out.push(CheckEntry::new(
            format!("properties.{k}_positive"),
            sampled_negativity(&amp, samples, seed.wrapping_add(1)),
            ALGEBRAIC_TOL,
            "φ n-positive ⟹ f(φ) n-positive",
        ));
    }
    Ok(out)
}

/// Worst `max(0, −λ_min(φ(d))/‖d‖)` over sampled `d = d₀*d₀`.
pub fn sampled_negativity(phi: &BimoduleMap, samples: usize, seed: u64) -> f64 {
    let chunk = 128;
    let chunks = samples.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((ci as u64 + 1) << 32));
            let mut worst: f64 = 0.0;
            for _ in 0..chunk.min(samples - ci * chunk) {
                let d = phi.source.random_positive(&mut rng);
                let img = phi.apply(&d);
                let scale = operator_norm(&d).max(f64::MIN_POSITIVE);
                let herm = img.hermitian_residual() / scale;
                let lam = crate::linalg::hermitian_eigen_unchecked(&img).values[0];
                worst = worst.max(herm).max((-lam / scale).max(0.0));
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Conditional-expectation axioms for `f(E)`.
pub fn ce_transfer_checks(pair: &EquivalencePair, e: &BimoduleMap, seed: u64) -> Result<Vec<CheckEntry>> {
    let psi = f_forward(pair, e)?;
    let r = expectation_report(&psi, 64, seed);
    let unital = (&psi.apply(pair.d().unit()) - pair.b().unit()).frobenius_norm();
    Ok(vec![
        CheckEntry::new("properties.ce_fixes_B", r.fixes_subalgebra, ALGEBRAIC_TOL, "f(φ)(b) = b"),
        CheckEntry::new("properties.ce_bimodule", r.bimodule, ALGEBRAIC_TOL, "f(φ)(b d b′) = b f(φ)(d) b′"),
        CheckEntry::new("properties.ce_positive", r.positivity, ALGEBRAIC_TOL, "f(φ) ≥ 0"),
        CheckEntry::new("properties.ce_unital", unital, ALGEBRAIC_TOL, "f(φ)(1_D) = 1_B"),
        CheckEntry::new("properties.ce_idempotent", r.idempotence, ALGEBRAIC_TOL, "f(φ)∘f(φ) = f(φ)"),
    ])
}

/// `‖f_k(φ⊗id) − f(φ)⊗id‖` over the amplified pair.
pub fn amplification_residual(pair: &EquivalencePair, phi: &BimoduleMap, k: usize) -> Result<f64> {
    let amp_pair = pair.amplify(k)?;
    let lhs = f_forward(&amp_pair, &amplify_map(phi, k)?)?;
    let rhs = amplify_map(&f_forward(pair, phi)?, k)?;
    Ok(lhs.distance(&rhs))
}

/// Positive test elements: minimal projections from several random spectral
/// decompositions (the extreme rays of the positive cone) and random `c*c`.
fn positive_probes(alg: &FdStarAlgebra, draws: usize, seed: u64) -> Vec<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..draws {
        out.extend(alg.minimal_projections(&mut rng));
        out.push(alg.random_positive(&mut rng));
    }
    out
}

fn certificate_gap(phi: &BimoduleMap, probes: &[(ComplexMatrix, ComplexMatrix)], t: f64) -> f64 {
    let unit = phi.source.unit();
    probes
        .iter()
        .map(|(c, img)| {
            let diff = (img - &c.scale_real(t)).hermitian_part();
            let scale = operator_norm(c).max(f64::MIN_POSITIVE);
            (-min_eig_on_unit(&diff, unit) / scale).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Largest `t ∈ [0, 1]` (by bisection) with `φ(c) ≥ t·c` on all probes,
/// together with the worst certificate residual at that `t`.
pub fn best_pimsner_popa_constant(phi: &BimoduleMap, draws: usize, seed: u64) -> (f64, f64) {
    let probes: Vec<(ComplexMatrix, ComplexMatrix)> = positive_probes(&phi.source, draws, seed)
        .into_iter()
        .map(|c| {
            let img = phi.apply(&c);
            (c, img)
        })
        .collect();
    let feasible = |t: f64| certificate_gap(phi, &probes, t) <= ALGEBRAIC_TOL;
    if !feasible(0.0) {
        return (0.0, certificate_gap(phi, &probes, 0.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if feasible(hi) {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    (lo, certificate_gap(phi, &probes, lo))
}

#[derive(Clone, Copy, Debug)]
pub struct PimsnerPopa {
    pub t: f64,
    pub s: f64,
    pub certificate: f64,
}

/// Derive `t` for `φ`, then bisect `s` for `f(φ)`.
pub fn pimsner_popa_transfer(
    pair: &EquivalencePair,
    phi: &BimoduleMap,
    draws: usize,
    seed: u64,
) -> Result<(PimsnerPopa, Vec<CheckEntry>)> {
    let (t, _) = best_pimsner_popa_constant(phi, draws, seed);
    if t <= 0.0 {
        return Err(Error::NoPositiveConstant("no t > 0 with φ(c) ≥ t·c".into()));
    }
    let psi = f_forward(pair, phi)?;
    let (s, certificate) = best_pimsner_popa_constant(&psi, draws, seed.wrapping_add(7));
    if s <= 0.0 {
        return Err(Error::NoPositiveConstant("no s > 0 with f(φ)(d) ≥ s·d".into()));
    }
    let entries = vec![
        CheckEntry::at_least("properties.pimsner_popa_s", s, 1e-3, "f(φ)(d) ≥ s·d, s > 0"),
        CheckEntry::new(
            "properties.pimsner_popa_certificate",
            certificate,
            ALGEBRAIC_TOL,
            "f(φ)(d) ≥ s·d, s > 0",
        ),
    ];
    Ok((PimsnerPopa { t, s, certificate }, entries))
}

/// `f_{[X⊗Z, Y⊗W]}(φ)` against `f_{[Z,W]}(f_{[X,Y]}(φ))` on a basis of `M`.
pub fn composition_check(
    pair1: &EquivalencePair,
    pair2: &EquivalencePair,
    phi: &BimoduleMap,
) -> Result<Vec<CheckEntry>> {
    let composite = tensor_compose(pair1, pair2)?;
    let lhs = f_forward(&composite, phi)?;
    let middle = f_forward(pair1, phi)?.rebased(pair2.c(), pair2.a())?;
    let rhs = f_forward(pair2, &middle)?;
    Ok(vec![CheckEntry::new(
        "composition.tensor",
        lhs.distance(&rhs),
        ALGEBRAIC_TOL,
        "f_[X⊗Z,Y⊗W] = f_[Z,W]∘f_[X,Y]",
    )])
}

/// `f_(X,Y)(φ) = f_(Z,W)(φ)` for a verified isomorphism `Φ: (X,Y) → (Z,W)`.
pub fn invariance_check(
    pair1: &EquivalencePair,
    pair2: &EquivalencePair,
    witness: &EquivalenceWitness,
    phi: &BimoduleMap,
) -> Result<Vec<CheckEntry>> {
    let wres = witness_residual(witness, pair1, pair2);
    let f1 = f_forward(pair1, phi)?;
    let f2 = f_forward(pair2, phi)?;
    Ok(vec![
        CheckEntry::new("composition.witness", wres, ALGEBRAIC_TOL, "Φ(c·y·d) = c·Φ(y)·d, Φ(X) = Z"),
        CheckEntry::new("composition.invariance", f1.distance(&f2), ALGEBRAIC_TOL, "f_(X,Y) = f_(Z,W)"),
    ])
}

/// Search a witness between two pairs and then compare the transfers.
pub fn invariance_via_search(
    pair1: &EquivalencePair,
    pair2: &EquivalencePair,
    phi: &BimoduleMap,
) -> Result<Vec<CheckEntry>> {
    match is_equivalent(pair1, pair2) {
        Some(w) => invariance_check(pair1, pair2, &w, phi),
        None => Ok(vec![CheckEntry::flag(
            "composition.witness",
            false,
            "Φ(c·y·d) = c·Φ(y)·d, Φ(X) = Z",
        )]),
    }
}

/// Perturbation audit of the defining identity `_A⟨x·ψ(d), z⟩ = φ(_C⟨x·d, z⟩)`.
#[derive(Clone, Debug)]
pub struct UniquenessAudit {
    /// Smallest singular value of `b ↦ (x_a b z_c*)_{a,c}`.
    pub pairing_gap: f64,
    pub unperturbed: f64,
    /// `(ε, residual)` for each perturbation size.
    pub perturbed: Vec<(f64, f64)>,
}

fn defining_residual(pair: &EquivalencePair, phi: &BimoduleMap, psi: &BimoduleMap) -> f64 {
    let xs = pair.x().basis();
    let mut total = 0.0;
    for d in pair.d().basis() {
        let pd = psi.apply(d);
        for x in xs {
            let xpd = x * &pd;
            let xd = x * d;
            for z in xs {
                let diff = &(&xpd * &z.adjoint()) - &phi.apply(&(&xd * &z.adjoint()));
                total += diff.frobenius_norm().powi(2);
            }
        }
    }
    total.sqrt()
}

pub fn uniqueness_audit(
    pair: &EquivalencePair,
    phi: &BimoduleMap,
    epsilons: &[f64],
    seed: u64,
) -> Result<UniquenessAudit> {
    let psi = f_forward(pair, phi)?;
    let xs = pair.x().basis();
    let p = pair.left().ambient_dim();
    let block = p * p;
    let b = pair.b();
    let mut op = ComplexMatrix::zeros(xs.len() * xs.len() * block, b.dim());
    for (k, bk) in b.basis().iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let xb = x * bk;
            for (j, z) in xs.iter().enumerate() {
                let prod = &xb * &z.adjoint();
                for (e, val) in prod.data().iter().enumerate() {
                    op.set((i * xs.len() + j) * block + e, k, *val);
                }
            }
        }
    }
    let pairing_gap = singular_values(&op).last().copied().unwrap_or(0.0);
    let unperturbed = defining_residual(pair, phi, &psi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = Vec::new();
    for &eps in epsilons {
        let dir = ComplexMatrix::random_gaussian(b.dim(), pair.d().dim(), &mut rng);
        let dir = dir.scale_real(1.0 / dir.frobenius_norm());
        let mut coeffs = psi.coeffs().clone();
        coeffs.axpy(C64::new(eps, 0.0), &dir);
        let moved = BimoduleMap::new(psi.source().clone(), psi.target().clone(), coeffs)?;
        perturbed.push((eps, defining_residual(pair, phi, &moved)));
    }
    Ok(UniquenessAudit {
        pairing_gap,
        unperturbed,
        perturbed,
    })
}

impl UniquenessAudit {
    pub fn entries(&self) -> Vec<CheckEntry> {
        const ANCHOR: &str = "_A⟨x·ψ(d),z⟩ = φ(_C⟨x·d,z⟩) determines ψ";
        let mut out = vec![
            CheckEntry::new("construction.uniqueness_unperturbed", self.unperturbed, ALGEBRAIC_TOL, ANCHOR),
            CheckEntry::at_least("construction.pairing_gap", self.pairing_gap, 1e-8, ANCHOR),
        ];
        for &(eps, res) in &self.perturbed {
            out.push(CheckEntry::at_least(
                format!("construction.uniqueness_eps_{eps:e}"),
                res,
                0.5 * eps * self.pairing_gap,
                ANCHOR,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bimodule::{make_corner_pair, EquivalencePair};
    use crate::fdca::{trace_conditional_expectation, UnitalInclusion};
    use crate::generator::random_bimodule_map;
    use crate::linalg::ZERO;

    fn m2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::matrix_unit(2, 0, 1)]).unwrap()
    }

    fn scalars(n: usize) -> FdStarAlgebra {
        FdStarAlgebra::from_generators(n, &[]).unwrap()
    }

    fn diag2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::real_diagonal(&[1.0, 2.0])]).unwrap()
    }

    fn scalar_corner() -> (UnitalInclusion, EquivalencePair) {
        let inc = UnitalInclusion::new(scalars(2), m2()).unwrap();
        let p = ComplexMatrix::matrix_unit(2, 0, 0).kron(&ComplexMatrix::identity(2));
        let pair = make_corner_pair(&inc, 2, &p).unwrap();
        (inc, pair)
    }

    fn diag_corner() -> (UnitalInclusion, EquivalencePair) {
        let inc = UnitalInclusion::new(diag2(), m2()).unwrap();
        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 1.0, 0.0]);
        let pair = make_corner_pair(&inc, 2, &p).unwrap();
        (inc, pair)
    }

    #[test]
    fn trivial_pair_transfers_to_itself() {
        let inc = UnitalInclusion::new(diag2(), m2()).unwrap();
        let pair = EquivalencePair::trivial(&inc);
        let phi = random_bimodule_map(&inc, 3).unwrap();
        let t = transfer(&pair, &phi).unwrap();
        assert!(t.psi.distance(&phi) < 1e-10);
        for y in pair.y().basis() {
            assert!((&t.tau.apply(y) - &phi.apply(y)).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn identity_map_on_identity_inclusion() {
        let inc = UnitalInclusion::identity(m2());
        let id = BimoduleMap::identity(m2());
        let pair = EquivalencePair::trivial(&inc);
        assert!(f_forward(&pair, &id).unwrap().distance(&id) < 1e-10);
    }

    #[test]
    fn all_conditions_hold_on_corner_pairs() {
        for (inc, pair) in [scalar_corner(), diag_corner()] {
            let e = trace_conditional_expectation(&inc).unwrap();
            let t = transfer(&pair, &e).unwrap();
            for c in transfer_conditions(&pair, &e, &t) {
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn frame_formula_matches_per_element_solve() {
        let (inc, pair) = diag_corner();
        let phi = random_bimodule_map(&inc, 11).unwrap();
        let t = transfer(&pair, &phi).unwrap();
        // solve x·ψ(d) = τ(x·d) for ψ(d) ∈ B directly
        let xs = pair.x().basis();
        let b = pair.b();
        let n = pair.right().ambient_dim();
        let rows = xs.len() * xs[0].rows() * n;
        let mut op = ComplexMatrix::zeros(rows, b.dim());
        for (k, bk) in b.basis().iter().enumerate() {
            let mut r = 0;
            for x in xs {
                for z in (x * bk).data() {
                    op.set(r, k, *z);
                    r += 1;
                }
            }
        }
        for d in pair.d().basis() {
            let rhs: Vec<C64> = xs.iter().flat_map(|x| t.tau.apply(&(x * d)).data().to_vec()).collect();
            let (sol, res) = LeastSquares::new(&op).solve_vec(&rhs);
            assert!(res < 1e-9);
            assert!((&b.element(&sol) - &t.psi.apply(d)).frobenius_norm() < 1e-9);
        }
    }

    #[test]
    fn tau_is_bounded_by_phi() {
        let (inc, pair) = scalar_corner();
        let e = trace_conditional_expectation(&inc).unwrap();
        let tau = tau_from_phi(&pair, &e).unwrap();
        let norm_phi = map_norm_estimate(&e, 2000, 4, 1).value;
        for y in pair.y().basis() {
            assert!(operator_norm(&tau.apply(y)) <= norm_phi * operator_norm(y) + 1e-9);
        }
    }

    #[test]
    fn corner_route_agrees() {
        for (inc, pair) in [scalar_corner(), diag_corner()] {
            let real = CornerRealization::new(&pair).unwrap();
            for phi in [trace_conditional_expectation(&inc).unwrap(), random_bimodule_map(&inc, 5).unwrap()] {
                let direct = f_forward(&pair, &phi).unwrap();
                let corner = f_via_corner(&real, &phi).unwrap();
                assert!(direct.distance(&corner) < 1e-9);
                let big_f = f_corner(&real, &phi).unwrap();
                assert!(corner_identity_residual(&real, &phi, &big_f) < 1e-9);
            }
        }
    }

    #[test]
    fn corner_of_trivial_realization_is_phi() {
        let inc = UnitalInclusion::new(diag2(), m2()).unwrap();
        let real = CornerRealization::new(&EquivalencePair::trivial(&inc)).unwrap();
        let phi = random_bimodule_map(&inc, 2).unwrap();
        assert!(f_via_corner(&real, &phi).unwrap().distance(&phi) < 1e-10);
        assert!(f_corner(&real, &phi).unwrap().distance(&phi) < 1e-10);
    }

    #[test]
    fn round_trip_is_identity() {
        for (inc, pair) in [scalar_corner(), diag_corner()] {
            let phi = random_bimodule_map(&inc, 8).unwrap();
            let back = f_inverse(&pair, &f_forward(&pair, &phi).unwrap()).unwrap();
            assert!(back.distance(&phi) < 1e-9);
        }
    }

    #[test]
    fn linearity_at_coefficient_level() {
        let (inc, pair) = diag_corner();
        let p1 = random_bimodule_map(&inc, 1).unwrap();
        let p2 = random_bimodule_map(&inc, 2).unwrap();
        let (al, be) = (C64::new(0.3, -1.0), C64::new(2.0, 0.5));
        let lhs = f_forward(&pair, &p1.combine(al, &p2, be).unwrap()).unwrap();
        let rhs = f_forward(&pair, &p1).unwrap().combine(al, &f_forward(&pair, &p2).unwrap(), be).unwrap();
        assert!(lhs.distance(&rhs) < 1e-9);
    }

    #[test]
    fn norm_estimate_cases() {
        let id = BimoduleMap::identity(m2());
        assert!((map_norm_estimate(&id, 500, 2, 1).value - 1.0).abs() < 1e-6);
        let zero = BimoduleMap::zero(m2(), scalars(2));
        assert_eq!(map_norm_estimate(&zero, 10, 1, 1).value, 0.0);
    }

    /// `‖E(u)‖ = |Tr u|/2` over a dense grid of `U(2)` in Euler parameters.
    #[test]
    fn norm_estimate_matches_dense_grid() {
        let inc = UnitalInclusion::new(scalars(2), m2()).unwrap();
        let e = trace_conditional_expectation(&inc).unwrap();
        let steps = 24;
        let mut grid: f64 = 0.0;
        let tau = std::f64::consts::TAU;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let (a, b, th) = (tau * i as f64 / steps as f64, tau * j as f64 / steps as f64, 0.25 * tau * k as f64 / steps as f64);
                    let u = ComplexMatrix::from_complex(
                        2,
                        2,
                        &[
                            C64::from_polar(th.cos(), a),
                            C64::from_polar(th.sin(), b),
                            -C64::from_polar(th.sin(), -b),
                            C64::from_polar(th.cos(), -a),
                        ],
                    );
                    grid = grid.max(operator_norm(&e.apply(&u)));
                }
            }
        }
        let est = map_norm_estimate(&e, 2000, 4, 3).value;
        assert!((est - grid).abs() <= 1e-3, "estimate {est}, grid {grid}");
    }

    #[test]
    fn norm_is_preserved_under_transfer() {
        let (inc, pair) = diag_corner();
        let phi = random_bimodule_map(&inc, 4).unwrap();
        let psi = f_forward(&pair, &phi).unwrap();
        let a = map_norm_estimate(&phi, 4000, 8, 1).value;
        let b = map_norm_estimate(&psi, 4000, 8, 2).value;
        assert!((a - b).abs() <= 1e-2 * a.max(b), "{a} vs {b}");
    }

    #[test]
    fn positivity_and_ce_transfer() {
        let (inc, pair) = scalar_corner();
        let e = trace_conditional_expectation(&inc).unwrap();
        for c in check_positivity_transfer(&pair, &e, 200, 2, 1).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        for c in ce_transfer_checks(&pair, &e, 1).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        let id_inc = UnitalInclusion::identity(m2());
        let id = BimoduleMap::identity(m2());
        for c in check_positivity_transfer(&EquivalencePair::trivial(&id_inc), &id, 50, 2, 1).unwrap() {
            assert!(c.pass);
        }
    }

    #[test]
    fn amplification_identity() {
        let (inc, pair) = diag_corner();
        let phi = random_bimodule_map(&inc, 9).unwrap();
        assert!(amplification_residual(&pair, &phi, 2).unwrap() < 1e-9);
        assert!(amplify_map(&phi, 1).unwrap().distance(&phi) == 0.0);
        let id = BimoduleMap::identity(m2());
        assert!(amplify_map(&id, 2).unwrap().distance(&BimoduleMap::identity(m2().amplify(2).unwrap())) < 1e-12);
    }

    #[test]
    fn pimsner_popa_constants() {
        let inc = UnitalInclusion::new(scalars(2), m2()).unwrap();
        let e = trace_conditional_expectation(&inc).unwrap();
        let (t, cert) = best_pimsner_popa_constant(&e, 40, 1);
        assert!((t - 0.5).abs() < 1e-6, "t = {t}");
        assert!(cert <= 1e-9);
        let (pp, _) = pimsner_popa_transfer(&EquivalencePair::trivial(&inc), &e, 40, 1).unwrap();
        assert!((pp.s - pp.t).abs() < 1e-6);

        let (dinc, dpair) = diag_corner();
        let de = trace_conditional_expectation(&dinc).unwrap();
        let (pp, entries) = pimsner_popa_transfer(&dpair, &de, 40, 2).unwrap();
        assert!(pp.s > 1e-3);
        assert!(entries.iter().all(|c| c.pass));
    }

    #[test]
    fn uniqueness_gap_controls_residual() {
        let (inc, pair) = diag_corner();
        let phi = random_bimodule_map(&inc, 6).unwrap();
        let audit = uniqueness_audit(&pair, &phi, &[1e-3, 1e-6], 1).unwrap();
        assert!(audit.pairing_gap > 1e-3);
        for c in audit.entries() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn composition_with_trivial_pairs() {
        let (inc, pair) = diag_corner();
        let phi = random_bimodule_map(&inc, 7).unwrap();
        let c = composition_check(&pair, &EquivalencePair::trivial(pair.right()), &phi).unwrap();
        assert!(c[0].pass, "{c:?}");
        let t = EquivalencePair::trivial(&inc);
        assert!(composition_check(&t, &t, &phi).unwrap()[0].pass);
    }

    #[test]
    fn invariance_under_self_and_representation() {
        let (inc, pair) = diag_corner();
        let phi = random_bimodule_map(&inc, 12).unwrap();
        for c in invariance_via_search(&pair, &pair, &phi).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let other = pair.represented(&mut rng).unwrap();
        for c in invariance_via_search(&pair, &other, &phi).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn rejects_non_bimodule_maps() {
        let (inc, pair) = diag_corner();
        let bad = BimoduleMap::from_fn(inc.large().clone(), inc.small().clone(), |c| {
            ComplexMatrix::diagonal(&[c.get(0, 1), ZERO])
        })
        .unwrap();
        assert!(f_forward(&pair, &bad).is_err());
    }
}
