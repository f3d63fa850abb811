//! Equivalence pairs `X ⊆ Y` realized as spaces of rectangular matrices,
//! frames, corner realizations, interior tensor products and the
//! isomorphism relation between pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_residual, Error, Result};
use crate::fdca::{FdStarAlgebra, UnitalInclusion};
use crate::linalg::{
    complex_gaussian, condition_number, inverse, nullspace_with_tol, psd_inverse_sqrt,
    span_rank, ComplexMatrix, OrthonormalSpan, C64, ALGEBRAIC_TOL,
    CONDITION_LIMIT, RANK_TOL, ZERO,
};
use crate::report::CheckEntry;

/// A `C–D` equivalence bimodule `Y` with its `A–B` sub-bimodule `X`, both
/// realized as subspaces of `P x Q` matrices. Actions are matrix products;
/// inner products are `y y'*` (left, in `C`) and `y* y'` (right, in `D`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "PairWire", into = "PairWire")]
pub struct EquivalencePair {
    left: UnitalInclusion,
    right: UnitalInclusion,
    y: OrthonormalSpan,
    x: OrthonormalSpan,
}

#[derive(Serialize, Deserialize)]
struct PairWire {
    left: UnitalInclusion,
    right: UnitalInclusion,
    #[serde(rename = "Y_basis")]
    y_basis: Vec<ComplexMatrix>,
    #[serde(rename = "X_basis")]
    x_basis: Vec<ComplexMatrix>,
}

impl From<EquivalencePair> for PairWire {
    fn from(p: EquivalencePair) -> Self {
        PairWire {
            left: p.left,
            right: p.right,
            y_basis: p.y.basis().to_vec(),
            x_basis: p.x.basis().to_vec(),
        }
    }
}

impl TryFrom<PairWire> for EquivalencePair {
    type Error = Error;
    fn try_from(w: PairWire) -> Result<Self> {
        EquivalencePair::new(w.left, w.right, &w.y_basis, &w.x_basis)
    }
}

impl EquivalencePair {
    /// Pair spanned by the given families; shapes are checked, invariants are
    /// left to [`validate_pair`].
    pub fn new(
        left: UnitalInclusion,
        right: UnitalInclusion,
        y_spanning: &[ComplexMatrix],
        x_spanning: &[ComplexMatrix],
    ) -> Result<Self> {
        let (p, q) = (left.ambient_dim(), right.ambient_dim());
        for m in y_spanning.iter().chain(x_spanning) {
            if m.shape() != (p, q) {
                return Err(Error::DimensionMismatch(format!(
                    "bimodule element {:?}, expected {p}x{q}",
                    m.shape()
                )));
            }
        }
        let y = OrthonormalSpan::from_vectors(p, q, y_spanning, RANK_TOL);
        let x = OrthonormalSpan::from_vectors(p, q, x_spanning, RANK_TOL);
        if y.dim() == 0 || x.dim() == 0 {
            return Err(Error::InvalidInput("bimodule span is zero".into()));
        }
        Ok(EquivalencePair { left, right, y, x })
    }

    /// `(X, Y) = (A, C)` over `A ⊆ C` on both sides.
    pub fn trivial(inc: &UnitalInclusion) -> Self {
        EquivalencePair {
            left: inc.clone(),
            right: inc.clone(),
            y: inc.large().span().clone(),
            x: inc.small().span().clone(),
        }
    }

    pub fn left(&self) -> &UnitalInclusion {
        &self.left
    }

    pub fn right(&self) -> &UnitalInclusion {
        &self.right
    }

    pub fn y(&self) -> &OrthonormalSpan {
        &self.y
    }

    pub fn x(&self) -> &OrthonormalSpan {
        &self.x
    }

    pub fn a(&self) -> &FdStarAlgebra {
        self.left.small()
    }

    pub fn c(&self) -> &FdStarAlgebra {
        self.left.large()
    }

    pub fn b(&self) -> &FdStarAlgebra {
        self.right.small()
    }

    pub fn d(&self) -> &FdStarAlgebra {
        self.right.large()
    }

    /// The conjugate pair `(X*, Y*)`, a `D–C` bimodule over `B ⊆ D`, `A ⊆ C`.
    pub fn conjugate(&self) -> Self {
        let adj = |s: &OrthonormalSpan| {
            let basis: Vec<ComplexMatrix> = s.basis().iter().map(|m| m.adjoint()).collect();
            let (r, c) = s.shape();
            OrthonormalSpan::from_orthonormal(c, r, basis).expect("adjoint preserves orthonormality")
        };
        EquivalencePair {
            left: self.right.clone(),
            right: self.left.clone(),
            y: adj(&self.y),
            x: adj(&self.x),
        }
    }

    /// `(uX, uY)` for a unitary `u` commuting with `C` in the ambient algebra.
    pub fn twisted_left(&self, u: &ComplexMatrix) -> Result<Self> {
        ensure_unitary_commuting(u, self.c())?;
        let y: Vec<ComplexMatrix> = self.y.basis().iter().map(|m| u * m).collect();
        let x: Vec<ComplexMatrix> = self.x.basis().iter().map(|m| u * m).collect();
        EquivalencePair::new(self.left.clone(), self.right.clone(), &y, &x)
    }

    /// `(Xv, Yv)` for a unitary `v` commuting with `D` in the ambient algebra.
    pub fn twisted_right(&self, v: &ComplexMatrix) -> Result<Self> {
        ensure_unitary_commuting(v, self.d())?;
        let y: Vec<ComplexMatrix> = self.y.basis().iter().map(|m| m * v).collect();
        let x: Vec<ComplexMatrix> = self.x.basis().iter().map(|m| m * v).collect();
        EquivalencePair::new(self.left.clone(), self.right.clone(), &y, &x)
    }

    /// The same pair presented through rescaled, recombined spanning families.
    pub fn represented<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self> {
        let mix = |s: &OrthonormalSpan, rng: &mut R| -> Vec<ComplexMatrix> {
            let mut out: Vec<ComplexMatrix> = s
                .basis()
                .iter()
                .map(|b| b.scale_real(0.5 + 2.0 * rng.gen::<f64>()))
                .collect();
            let extra = s.element(&(0..s.dim()).map(|_| complex_gaussian(rng)).collect::<Vec<_>>());
            out.push(extra);
            out
        };
        let y = mix(&self.y, rng);
        let x = mix(&self.x, rng);
        EquivalencePair::new(self.left.clone(), self.right.clone(), &y, &x)
    }

    /// `(M_k(X), M_k(Y))` over the amplified inclusions.
    pub fn amplify(&self, k: usize) -> Result<Self> {
        if k == 1 {
            return Ok(self.clone());
        }
        let lift = |s: &OrthonormalSpan| -> Vec<ComplexMatrix> {
            let mut out = Vec::with_capacity(k * k * s.dim());
            for i in 0..k {
                for j in 0..k {
                    let e = ComplexMatrix::matrix_unit(k, i, j);
                    out.extend(s.basis().iter().map(|m| e.kron(m)));
                }
            }
            out
        };
        EquivalencePair::new(
            self.left.amplify(k)?,
            self.right.amplify(k)?,
            &lift(&self.y),
            &lift(&self.x),
        )
    }
}

fn ensure_unitary_commuting(u: &ComplexMatrix, alg: &FdStarAlgebra) -> Result<()> {
    let n = alg.ambient_dim();
    if u.shape() != (n, n) {
        return Err(Error::DimensionMismatch("twist has the wrong shape".into()));
    }
    let unitarity = (&(&u.adjoint() * u) - &ComplexMatrix::identity(n)).frobenius_norm();
    check_residual("twist unitarity", unitarity, ALGEBRAIC_TOL)?;
    let comm = alg
        .basis()
        .iter()
        .map(|b| (&(u * b) - &(b * u)).frobenius_norm())
        .fold(0.0, f64::max);
    check_residual("twist commutes with the acting algebra", comm, ALGEBRAIC_TOL)
}

/// Residuals of every invariant of an equivalence pair.
#[derive(Clone, Debug)]
pub struct PairValidation {
    pub entries: Vec<CheckEntry>,
}

impl PairValidation {
    pub fn passes(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> Vec<&CheckEntry> {
        self.entries.iter().filter(|e| !e.pass).collect()
    }

    pub fn worst(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.check == name).map(|e| e.residual)
    }
}

fn max_residual<'a>(
    target: impl Fn(&ComplexMatrix) -> f64,
    items: impl Iterator<Item = ComplexMatrix> + 'a,
) -> f64 {
    items.map(|m| target(&m)).fold(0.0, f64::max)
}

fn action_residual(
    span: &OrthonormalSpan,
    acting: &[ComplexMatrix],
    left: bool,
) -> f64 {
    let mut worst: f64 = 0.0;
    for m in span.basis() {
        for a in acting {
            let prod = if left { a * m } else { m * a };
            worst = worst.max(span.residual(&prod));
        }
    }
    worst
}

fn inner_residual(span: &OrthonormalSpan, alg: &FdStarAlgebra, left: bool) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut products = Vec::with_capacity(span.dim() * span.dim());
    for a in span.basis() {
        for b in span.basis() {
            let prod = if left { a * &b.adjoint() } else { &a.adjoint() * b };
            worst = worst.max(alg.residual(&prod));
            products.push(prod);
        }
    }
    (worst, span_rank(&products, RANK_TOL))
}

/// Check actions, inner-product ranges, fullness and `X ⊆ Y`.
pub fn validate_pair(pair: &EquivalencePair) -> PairValidation {
    const ACTION: &str = "c·y·d ∈ Y, a·x·b ∈ X";
    const INNER: &str = "_C⟨y,y′⟩ = y·y′*, ⟨y,y′⟩_D = y*·y′";
    const FULL: &str = "span _C⟨Y,Y⟩ = C, span ⟨Y,Y⟩_D = D";
    let tol = ALGEBRAIC_TOL;
    let mut entries = vec![
        CheckEntry::new("action.C_on_Y", action_residual(&pair.y, pair.c().basis(), true), tol, ACTION),
        CheckEntry::new("action.Y_by_D", action_residual(&pair.y, pair.d().basis(), false), tol, ACTION),
        CheckEntry::new("action.A_on_X", action_residual(&pair.x, pair.a().basis(), true), tol, ACTION),
        CheckEntry::new("action.X_by_B", action_residual(&pair.x, pair.b().basis(), false), tol, ACTION),
    ];
    let unit_left = max_residual(
        |m| m.frobenius_norm(),
        pair.y.basis().iter().map(|y| &(pair.c().unit() * y) - y),
    );
    let unit_right = max_residual(
        |m| m.frobenius_norm(),
        pair.y.basis().iter().map(|y| &(y * pair.d().unit()) - y),
    );
    entries.push(CheckEntry::new("action.unit_C", unit_left, tol, "1_C·y = y"));
    entries.push(CheckEntry::new("action.unit_D", unit_right, tol, "y·1_D = y"));

    let (yl, yl_rank) = inner_residual(&pair.y, pair.c(), true);
    let (yr, yr_rank) = inner_residual(&pair.y, pair.d(), false);
    let (xl, xl_rank) = inner_residual(&pair.x, pair.a(), true);
    let (xr, xr_rank) = inner_residual(&pair.x, pair.b(), false);
    entries.push(CheckEntry::new("inner.Y_left_in_C", yl, tol, INNER));
    entries.push(CheckEntry::new("inner.Y_right_in_D", yr, tol, INNER));
    entries.push(CheckEntry::new("inner.X_left_in_A", xl, tol, INNER));
    entries.push(CheckEntry::new("inner.X_right_in_B", xr, tol, INNER));
    let gap = |rank: usize, dim: usize| (dim as f64 - rank as f64).abs();
    entries.push(CheckEntry::new("full.Y_left", gap(yl_rank, pair.c().dim()), 0.0, FULL));
    entries.push(CheckEntry::new("full.Y_right", gap(yr_rank, pair.d().dim()), 0.0, FULL));
    entries.push(CheckEntry::new("full.X_left", gap(xl_rank, pair.a().dim()), 0.0, FULL));
    entries.push(CheckEntry::new("full.X_right", gap(xr_rank, pair.b().dim()), 0.0, FULL));
    let sub = max_residual(|m| pair.y.residual(m), pair.x.basis().iter().cloned());
    entries.push(CheckEntry::new("subspace.X_in_Y", sub, tol, "X ⊆ Y"));
    PairValidation { entries }
}

pub fn ensure_valid(pair: &EquivalencePair) -> Result<()> {
    let v = validate_pair(pair);
    match v.failures().first() {
        None => Ok(()),
        Some(e) => Err(Error::Residual {
            what: format!("pair invariant {}", e.check),
            residual: e.residual,
            tolerance: e.tolerance,
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameSide {
    /// `Σ xᵢ xᵢ* = 1_A`
    Left,
    /// `Σ xᵢ* xᵢ = 1_B`
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStrategy {
    /// Add spanning elements until the Gram element is invertible; small frames.
    Greedy,
    /// Use the whole orthonormal basis of the span.
    FullBasis,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Frame {
    pub side: FrameSide,
    pub elements: Vec<ComplexMatrix>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `Σ xᵢ* xᵢ` (right) or `Σ xᵢ xᵢ*` (left).
    pub fn gram(&self) -> ComplexMatrix {
        gram_sum(&self.elements, self.side)
    }

    /// Largest `‖x − Σ (x xᵢ*) xᵢ‖` (right) or `‖x − Σ xᵢ (xᵢ* x)‖` (left) over `span`.
    pub fn reconstruction_residual(&self, span: &OrthonormalSpan) -> f64 {
        let mut worst: f64 = 0.0;
        for x in span.basis() {
            let mut sum = ComplexMatrix::zeros(x.rows(), x.cols());
            for xi in &self.elements {
                let term = match self.side {
                    FrameSide::Right => &(x * &xi.adjoint()) * xi,
                    FrameSide::Left => xi * &(&xi.adjoint() * x),
                };
                sum = &sum + &term;
            }
            worst = worst.max((&sum - x).frobenius_norm());
        }
        worst
    }
}

fn gram_sum(elements: &[ComplexMatrix], side: FrameSide) -> ComplexMatrix {
    let first = &elements[0];
    let n = match side {
        FrameSide::Right => first.cols(),
        FrameSide::Left => first.rows(),
    };
    let mut g = ComplexMatrix::zeros(n, n);
    for x in elements {
        let term = match side {
            FrameSide::Right => &x.adjoint() * x,
            FrameSide::Left => x * &x.adjoint(),
        };
        g = &g + &term;
    }
    g
}

const GREEDY_CONDITION: f64 = 1e4;

/// Frame for `span` normalizing to `unit` (`1_B` on the right, `1_A` on the left).
pub fn frame_for_span(
    span: &OrthonormalSpan,
    unit: &ComplexMatrix,
    side: FrameSide,
    strategy: FrameStrategy,
) -> Result<Frame> {
    let target_rank = unit.trace().re.round() as usize;
    let mut candidates: Vec<ComplexMatrix> = Vec::new();
    let (r, c) = span.shape();
    if strategy == FrameStrategy::Greedy && r == c {
        let guess = span.project(&ComplexMatrix::identity(r));
        if guess.frobenius_norm() > 1e-6 {
            candidates.push(guess);
        }
    }
    if strategy == FrameStrategy::Greedy {
        // generic elements reach full support in few steps
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..span.dim() {
            let coeffs: Vec<C64> = (0..span.dim()).map(|_| complex_gaussian(&mut rng)).collect();
            candidates.push(span.element(&coeffs));
        }
    }
    candidates.extend(span.basis().iter().cloned());

    let total = candidates.len();
    let mut chosen: Vec<ComplexMatrix> = Vec::new();
    let mut accepted = None;
    for cand in candidates {
        chosen.push(cand);
        if strategy == FrameStrategy::FullBasis && chosen.len() < total {
            continue;
        }
        let inv = psd_inverse_sqrt(&gram_sum(&chosen, side), 1e-10)?;
        if inv.support_rank == target_rank && inv.condition <= GREEDY_CONDITION {
            accepted = Some(inv);
            break;
        }
    }
    let inv = match accepted {
        Some(inv) => inv,
        None => psd_inverse_sqrt(&gram_sum(&chosen, side), 1e-10)?,
    };
    if inv.support_rank != target_rank {
        return Err(Error::RankDeficient(format!(
            "frame Gram element has support rank {}, unit has rank {target_rank}",
            inv.support_rank
        )));
    }
    if inv.condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            what: "frame Gram element".into(),
            cond: inv.condition,
        });
    }
    let elements: Vec<ComplexMatrix> = chosen
        .iter()
        .map(|y| match side {
            FrameSide::Right => y * &inv.matrix,
            FrameSide::Left => &inv.matrix * y,
        })
        .collect();
    let frame = Frame { side, elements };
    let defect = (&frame.gram() - unit).frobenius_norm();
    check_residual("frame normalization", defect, ALGEBRAIC_TOL)?;
    for x in &frame.elements {
        check_residual("frame element lies in the module", span.residual(x), ALGEBRAIC_TOL)?;
    }
    Ok(frame)
}

/// `x₁..xₙ ∈ X` with `Σ xᵢ* xᵢ = 1_B`.
pub fn right_frame(pair: &EquivalencePair) -> Result<Frame> {
    frame_for_span(&pair.x, pair.b().unit(), FrameSide::Right, FrameStrategy::Greedy)
}

/// `x₁..xₙ ∈ X` with `Σ xᵢ xᵢ* = 1_A`.
pub fn left_frame(pair: &EquivalencePair) -> Result<Frame> {
    frame_for_span(&pair.x, pair.a().unit(), FrameSide::Left, FrameStrategy::Greedy)
}

/// First block row `[1 0 … 0]·m` of an `nP x nP` matrix.
fn first_block_row(m: &ComplexMatrix, p_dim: usize) -> ComplexMatrix {
    m.block(0, 0, p_dim, m.cols())
}

/// `G = Σₛ mₛ* p mₛ` over an orthonormal basis of `M_n(A)`. `G` is central,
/// a multiple of each block unit by the trace of `p` there, so `p` is full
/// iff `G` is invertible on the unit.
fn fullness_gram(mna: &FdStarAlgebra, p: &ComplexMatrix) -> ComplexMatrix {
    let n = p.rows();
    let mut g = ComplexMatrix::zeros(n, n);
    for m in mna.basis() {
        g = &g + &(&(&m.adjoint() * p) * m);
    }
    g.hermitian_part()
}

/// `G⁻¹` on the unit's support, or `NotFull` with the support rank of `G`.
fn fullness_inverse(mna: &FdStarAlgebra, p: &ComplexMatrix) -> Result<ComplexMatrix> {
    let target = mna.unit().trace().re.round() as usize;
    let inv = psd_inverse_sqrt(&fullness_gram(mna, p), 1e-10)?;
    if inv.support_rank != target {
        return Err(Error::NotFull {
            got: inv.support_rank,
            expected: target,
        });
    }
    Ok(&inv.matrix * &inv.matrix)
}

/// `dim span{mₛ p mₜ}` over a basis of `M_n(A)`; equals `dim M_n(A)` iff `p` is full.
pub fn ideal_rank(mna: &FdStarAlgebra, p: &ComplexMatrix) -> usize {
    let mut prods = Vec::with_capacity(mna.dim() * mna.dim());
    for ms in mna.basis() {
        let msp = ms * p;
        for mt in mna.basis() {
            prods.push(&msp * mt);
        }
    }
    span_rank(&prods, RANK_TOL)
}

fn check_projection(p: &ComplexMatrix, mna: &FdStarAlgebra) -> Result<()> {
    let n = mna.ambient_dim();
    if p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "projection {:?}, expected {n}x{n}",
            p.shape()
        )));
    }
    let defect = p.hermitian_residual().max((&(p * p) - p).frobenius_norm());
    if defect > 1e-10 {
        return Err(Error::NotProjection(defect));
    }
    let res = mna.residual(p);
    if res > 1e-10 {
        return Err(Error::NotInAlgebra(res));
    }
    Ok(())
}

/// The corner pair `((1⊗e)M_n(A)p, (1⊗e)M_n(C)p)` over `A ⊆ C` and
/// `pM_n(A)p ⊆ pM_n(C)p`. Elements of `(1⊗e)M_n(·)p` are stored as their
/// first block row, a `P x nP` matrix.
pub fn make_corner_pair(inc: &UnitalInclusion, n: usize, p: &ComplexMatrix) -> Result<EquivalencePair> {
    let amp = inc.amplify(n)?;
    let mna = amp.small();
    let mnc = amp.large();
    check_projection(p, mna)?;
    fullness_inverse(mna, p)?;
    let compress = |alg: &FdStarAlgebra| -> Vec<ComplexMatrix> {
        alg.basis().iter().map(|m| &(p * m) * p).collect()
    };
    let b = FdStarAlgebra::new(mna.ambient_dim(), &compress(mna), p.clone())?;
    let d = FdStarAlgebra::new(mnc.ambient_dim(), &compress(mnc), p.clone())?;
    let right = UnitalInclusion::new(b, d)?;
    let pdim = inc.ambient_dim();
    let rows = |alg: &FdStarAlgebra| -> Vec<ComplexMatrix> {
        alg.basis().iter().map(|m| &first_block_row(m, pdim) * p).collect()
    };
    EquivalencePair::new(inc.clone(), right, &rows(mnc), &rows(mna))
}

/// The corner model of a pair: `B ≅ pM_n(A)p`, `D ≅ pM_n(C)p`,
/// `X ≅ (1⊗e)M_n(A)p`, `Y ≅ (1⊗e)M_n(C)p`, built from a right frame.
#[derive(Clone, Debug)]
pub struct CornerRealization {
    pub n: usize,
    pub p: ComplexMatrix,
    pub e: ComplexMatrix,
    pub frame: Frame,
    pub pair: EquivalencePair,
    pub corner: EquivalencePair,
    amplified: UnitalInclusion,
    psi_b: ComplexMatrix,
    psi_d: ComplexMatrix,
    psi_b_inv: ComplexMatrix,
    psi_d_inv: ComplexMatrix,
    pub witnesses_a: Vec<ComplexMatrix>,
    pub witnesses_b: Vec<ComplexMatrix>,
}

impl CornerRealization {
    pub fn new(pair: &EquivalencePair) -> Result<Self> {
        Self::with_frame(pair, right_frame(pair)?)
    }

    pub fn with_strategy(pair: &EquivalencePair, strategy: FrameStrategy) -> Result<Self> {
        let frame = frame_for_span(&pair.x, pair.b().unit(), FrameSide::Right, strategy)?;
        Self::with_frame(pair, frame)
    }

    pub fn with_frame(pair: &EquivalencePair, frame: Frame) -> Result<Self> {
        if frame.side != FrameSide::Right || frame.is_empty() {
            return Err(Error::InvalidInput("corner realization needs a right frame".into()));
        }
        let n = frame.len();
        let pdim = pair.left.ambient_dim();
        let mut p = ComplexMatrix::zeros(n * pdim, n * pdim);
        for (i, xi) in frame.elements.iter().enumerate() {
            for (j, xj) in frame.elements.iter().enumerate() {
                p.set_block(i * pdim, j * pdim, &(xi * &xj.adjoint()));
            }
        }
        // symmetrize away round-off so p is exactly Hermitian
        let p = p.hermitian_part();
        let e = ComplexMatrix::matrix_unit(n, 0, 0).kron(&ComplexMatrix::identity(pdim));
        let corner = make_corner_pair(&pair.left, n, &p)?;
        let amplified = pair.left.amplify(n)?;

        let xs = frame.elements.clone();
        let conj = |m: &ComplexMatrix| -> ComplexMatrix {
            let mut out = ComplexMatrix::zeros(n * pdim, n * pdim);
            for (i, xi) in xs.iter().enumerate() {
                let left = xi * m;
                for (j, xj) in xs.iter().enumerate() {
                    out.set_block(i * pdim, j * pdim, &(&left * &xj.adjoint()));
                }
            }
            out
        };
        let cb = corner.b();
        let cd = corner.d();
        let psi_b = pair.b().span().coefficient_matrix(cb.span(), &conj);
        let psi_d = pair.d().span().coefficient_matrix(cd.span(), &conj);
        for (name, src, tgt) in [("B", pair.b(), cb), ("D", pair.d(), cd)] {
            if src.dim() != tgt.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "corner of {name} has dimension {}, expected {}",
                    tgt.dim(),
                    src.dim()
                )));
            }
            let worst = src
                .basis()
                .iter()
                .map(|m| tgt.residual(&conj(m)))
                .fold(0.0, f64::max);
            check_residual(&format!("Ψ_{name} lands in the corner"), worst, ALGEBRAIC_TOL)?;
        }
        let psi_b_inv = inverse(&psi_b)?;
        let psi_d_inv = inverse(&psi_d)?;

        let mna = amplified.small();
        let g_inv = fullness_inverse(mna, &p)?;
        let witnesses_a: Vec<ComplexMatrix> = mna.basis().iter().map(|m| m.adjoint()).collect();
        let witnesses_b: Vec<ComplexMatrix> = mna.basis().iter().map(|m| m * &g_inv).collect();

        let real = CornerRealization {
            n,
            p,
            e,
            frame,
            pair: pair.clone(),
            corner,
            amplified,
            psi_b,
            psi_d,
            psi_b_inv,
            psi_d_inv,
            witnesses_a,
            witnesses_b,
        };
        if let Some(bad) = real.checks().into_iter().find(|c| !c.pass) {
            return Err(Error::Residual {
                what: format!("corner realization {}", bad.check),
                residual: bad.residual,
                tolerance: bad.tolerance,
            });
        }
        Ok(real)
    }

    /// `M_n(A) ⊆ M_n(C)`.
    pub fn amplified(&self) -> &UnitalInclusion {
        &self.amplified
    }

    pub fn psi_b_coeffs(&self) -> &ComplexMatrix {
        &self.psi_b
    }

    pub fn psi_d_coeffs(&self) -> &ComplexMatrix {
        &self.psi_d
    }

    fn conj_by_frame(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let pdim = self.pair.left.ambient_dim();
        let mut out = ComplexMatrix::zeros(self.n * pdim, self.n * pdim);
        for (i, xi) in self.frame.elements.iter().enumerate() {
            let left = xi * m;
            for (j, xj) in self.frame.elements.iter().enumerate() {
                out.set_block(i * pdim, j * pdim, &(&left * &xj.adjoint()));
            }
        }
        out
    }

    /// `Ψ_B(b) = [xᵢ b xⱼ*]`.
    pub fn psi_b(&self, b: &ComplexMatrix) -> ComplexMatrix {
        self.conj_by_frame(b)
    }

    /// `Ψ_D(d) = [xᵢ d xⱼ*]`.
    pub fn psi_d(&self, d: &ComplexMatrix) -> ComplexMatrix {
        self.conj_by_frame(d)
    }

    pub fn psi_b_inv(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let coords = self.corner.b().coords(m);
        self.pair.b().element(&self.psi_b_inv.mat_vec(&coords))
    }

    pub fn psi_d_inv(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let coords = self.corner.d().coords(m);
        self.pair.d().element(&self.psi_d_inv.mat_vec(&coords))
    }

    /// `Ψ_Y(y) = (y xⱼ*)ⱼ` as a block row; `Ψ_X` is its restriction to `X`.
    pub fn psi_y(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let pdim = self.pair.left.ambient_dim();
        let mut out = ComplexMatrix::zeros(pdim, self.n * pdim);
        for (j, xj) in self.frame.elements.iter().enumerate() {
            out.set_block(0, j * pdim, &(y * &xj.adjoint()));
        }
        out
    }

    pub fn psi_x(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.psi_y(x)
    }

    /// `π⁻¹`-style reconstruction `Σⱼ aⱼ m bⱼ`.
    pub fn witness_sum(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
        for (a, b) in self.witnesses_a.iter().zip(&self.witnesses_b) {
            out = &out + &(&(a * m) * b);
        }
        out
    }

    /// Every structural identity of the realization as a named residual.
    pub fn checks(&self) -> Vec<CheckEntry> {
        const ISO: &str = "B ≅ pMₙ(A)p, D ≅ pMₙ(C)p";
        const MOD: &str = "X ≅ (1⊗e)Mₙ(A)p, Y ≅ (1⊗e)Mₙ(C)p";
        let tol = ALGEBRAIC_TOL;
        let mut out = Vec::new();
        let p = &self.p;
        let proj = p.hermitian_residual().max((&(p * p) - p).frobenius_norm());
        out.push(CheckEntry::new("corner.p_projection", proj, 1e-10, "p = p* = p²"));
        out.push(CheckEntry::new(
            "corner.p_in_MnA",
            self.amplified.small().residual(p),
            1e-10,
            "p ∈ Mₙ(A)",
        ));
        let one = self.amplified.small().unit();
        let wit = (&self.witness_sum(p) - one).frobenius_norm();
        out.push(CheckEntry::new("corner.fullness_witness", wit, tol, "Σⱼ aⱼ p bⱼ = 1"));

        for (name, src, tgt, coeffs) in [
            ("B", self.pair.b(), self.corner.b(), &self.psi_b),
            ("D", self.pair.d(), self.corner.d(), &self.psi_d),
        ] {
            let mut mult: f64 = 0.0;
            let mut star: f64 = 0.0;
            for a in src.basis() {
                let pa = self.conj_by_frame(a);
                star = star.max((&self.conj_by_frame(&a.adjoint()) - &pa.adjoint()).frobenius_norm());
                for b in src.basis() {
                    let lhs = self.conj_by_frame(&(a * b));
                    mult = mult.max((&lhs - &(&pa * &self.conj_by_frame(b))).frobenius_norm());
                }
            }
            let unital = (&self.conj_by_frame(src.unit()) - tgt.unit()).frobenius_norm();
            out.push(CheckEntry::new(format!("corner.psi_{name}_multiplicative"), mult, tol, ISO));
            out.push(CheckEntry::new(format!("corner.psi_{name}_adjoint"), star, tol, ISO));
            out.push(CheckEntry::new(format!("corner.psi_{name}_unital"), unital, tol, ISO));
            let cond = condition_number(coeffs);
            out.push(CheckEntry::new(
                format!("corner.psi_{name}_invertible"),
                if src.dim() == tgt.dim() { cond } else { f64::INFINITY },
                CONDITION_LIMIT,
                ISO,
            ));
        }
        let restrict = self
            .pair
            .b()
            .basis()
            .iter()
            .map(|b| {
                let via_d = self.corner.d().project(&self.psi_d(b));
                (&via_d - &self.psi_b(b)).frobenius_norm()
            })
            .fold(0.0, f64::max);
        out.push(CheckEntry::new("corner.psi_D_restricts_to_psi_B", restrict, tol, "Ψ_D|_B = Ψ_B"));

        // module maps and inner products
        let y = self.pair.y.basis();
        let cy = self.corner.y();
        let cx = self.corner.x();
        let mut range: f64 = 0.0;
        let mut left_act: f64 = 0.0;
        let mut right_act: f64 = 0.0;
        let mut left_inner: f64 = 0.0;
        let mut right_inner: f64 = 0.0;
        let images: Vec<ComplexMatrix> = y.iter().map(|m| self.psi_y(m)).collect();
        for (m, im) in y.iter().zip(&images) {
            range = range.max(cy.residual(im));
            for c in self.pair.c().basis() {
                left_act = left_act.max((&self.psi_y(&(c * m)) - &(c * im)).frobenius_norm());
            }
            for d in self.pair.d().basis() {
                let lhs = self.psi_y(&(m * d));
                right_act = right_act.max((&lhs - &(im * &self.psi_d(d))).frobenius_norm());
            }
        }
        for (m, im) in y.iter().zip(&images) {
            for (m2, im2) in y.iter().zip(&images) {
                let l = (&(im * &im2.adjoint()) - &(m * &m2.adjoint())).frobenius_norm();
                let r = (&(&im.adjoint() * im2) - &self.psi_d(&(&m.adjoint() * m2))).frobenius_norm();
                left_inner = left_inner.max(l);
                right_inner = right_inner.max(r);
            }
        }
        let x_range = self
            .pair
            .x
            .basis()
            .iter()
            .map(|x| cx.residual(&self.psi_x(x)))
            .fold(0.0, f64::max);
        out.push(CheckEntry::new("corner.psi_Y_range", range, tol, MOD));
        out.push(CheckEntry::new("corner.psi_X_range", x_range, tol, MOD));
        out.push(CheckEntry::new("corner.psi_Y_left_linear", left_act, tol, "Ψ_Y(c·y) = c·Ψ_Y(y)"));
        out.push(CheckEntry::new(
            "corner.psi_Y_right_linear",
            right_act,
            tol,
            "Ψ_Y(y·d) = Ψ_Y(y)·Ψ_D(d)",
        ));
        out.push(CheckEntry::new(
            "corner.psi_Y_left_inner",
            left_inner,
            tol,
            "Ψ_Y(y)·Ψ_Y(y′)* = y·y′*",
        ));
        out.push(CheckEntry::new(
            "corner.psi_Y_right_inner",
            right_inner,
            tol,
            "Ψ_Y(y)*·Ψ_Y(y′) = Ψ_D(y*·y′)",
        ));
        let bij_y = cy.dim() == y.len() && span_rank(&images, RANK_TOL) == y.len();
        let ximg: Vec<ComplexMatrix> = self.pair.x.basis().iter().map(|x| self.psi_x(x)).collect();
        let bij_x = cx.dim() == ximg.len() && span_rank(&ximg, RANK_TOL) == ximg.len();
        out.push(CheckEntry::flag("corner.psi_Y_bijective", bij_y, MOD));
        out.push(CheckEntry::flag("corner.psi_X_bijective", bij_x, MOD));
        out
    }
}

/// `(X ⊗_B Z, Y ⊗_D W)` realized as the product spans `span{x z}`, `span{y w}`.
pub fn tensor_compose(pair1: &EquivalencePair, pair2: &EquivalencePair) -> Result<EquivalencePair> {
    if !pair1.right.matches(&pair2.left, 1e-9) {
        return Err(Error::InclusionMismatch(
            "right inclusion of the first pair differs from the left inclusion of the second".into(),
        ));
    }
    let prod = |s: &OrthonormalSpan, t: &OrthonormalSpan| -> Vec<ComplexMatrix> {
        let mut out = Vec::with_capacity(s.dim() * t.dim());
        for a in s.basis() {
            for b in t.basis() {
                out.push(a * b);
            }
        }
        out
    };
    EquivalencePair::new(
        pair1.left.clone(),
        pair2.right.clone(),
        &prod(&pair1.y, &pair2.y),
        &prod(&pair1.x, &pair2.x),
    )
}

/// A bimodule isomorphism `Φ: Y → W` with `Φ(X) = Z`, as a coefficient matrix.
#[derive(Clone, Debug)]
pub struct EquivalenceWitness {
    source: OrthonormalSpan,
    target: OrthonormalSpan,
    pub coeffs: ComplexMatrix,
    /// Worst residual over the verified identities.
    pub residual: f64,
}

impl EquivalenceWitness {
    pub fn apply(&self, y: &ComplexMatrix) -> ComplexMatrix {
        self.target.element(&self.coeffs.mat_vec(&self.source.coords(y)))
    }
}

fn action_matrix(span: &OrthonormalSpan, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    span.coefficient_matrix(span, f)
}

/// Search for an isomorphism between two pairs over the same inclusions.
///
/// The intertwining constraints are imposed against two random elements of
/// `C` and of `D` (which generate them), the kernel is sampled, normalized by
/// the inverse square root of its right Gram element, and the candidate is
/// then verified against full bases.
pub fn is_equivalent(pair1: &EquivalencePair, pair2: &EquivalencePair) -> Option<EquivalenceWitness> {
    is_equivalent_seeded(pair1, pair2, 0x1505)
}

pub fn is_equivalent_seeded(
    pair1: &EquivalencePair,
    pair2: &EquivalencePair,
    seed: u64,
) -> Option<EquivalenceWitness> {
    if !pair1.left.matches(&pair2.left, 1e-9) || !pair1.right.matches(&pair2.right, 1e-9) {
        return None;
    }
    let (ys, ws) = (&pair1.y, &pair2.y);
    if ys.dim() != ws.dim() || pair1.x.dim() != pair2.x.dim() {
        return None;
    }
    let dy = ys.dim();
    let dw = ws.dim();
    let unknowns = dw * dy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks: Vec<ComplexMatrix> = Vec::new();
    // F L_y - L_w F over vec(F) row-major: (I ⊗ L_yᵀ) - (L_w ⊗ I)
    let intertwine = |ly: &ComplexMatrix, lw: &ComplexMatrix| -> ComplexMatrix {
        let mut k = ComplexMatrix::zeros(unknowns, unknowns);
        for r in 0..dw {
            for c in 0..dy {
                let row = r * dy + c;
                for kk in 0..dy {
                    let v = ly.get(kk, c);
                    if v != ZERO {
                        k.set(row, r * dy + kk, k.get(row, r * dy + kk) + v);
                    }
                }
                for kk in 0..dw {
                    let v = lw.get(r, kk);
                    if v != ZERO {
                        k.set(row, kk * dy + c, k.get(row, kk * dy + c) - v);
                    }
                }
            }
        }
        k
    };
    for _ in 0..2 {
        let c = pair1.c().random_element(&mut rng);
        blocks.push(intertwine(&action_matrix(ys, |y| &c * y), &action_matrix(ws, |w| &c * w)));
        let d = pair1.d().random_element(&mut rng);
        blocks.push(intertwine(&action_matrix(ys, |y| y * &d), &action_matrix(ws, |w| w * &d)));
    }
    // (I - Q_Z) F ξ = 0 for the coordinates ξ of X inside Y
    let z_in_w: Vec<Vec<C64>> = pair2.x.basis().iter().map(|z| ws.coords(z)).collect();
    let z_span = OrthonormalSpan::from_vectors(
        dw,
        1,
        &z_in_w.iter().map(|v| ComplexMatrix::column(v)).collect::<Vec<_>>(),
        RANK_TOL,
    );
    let mut complement = ComplexMatrix::identity(dw);
    for q in z_span.basis() {
        complement = &complement - &(q * &q.adjoint());
    }
    for x in pair1.x.basis() {
        let xi = ys.coords(x);
        let mut k = ComplexMatrix::zeros(dw, unknowns);
        for r in 0..dw {
            for s in 0..dw {
                let q = complement.get(r, s);
                if q == ZERO {
                    continue;
                }
                for (c, xc) in xi.iter().enumerate() {
                    k.set(r, s * dy + c, k.get(r, s * dy + c) + q * xc);
                }
            }
        }
        blocks.push(k);
    }
    let rows: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut op = ComplexMatrix::zeros(rows, unknowns);
    let mut r0 = 0;
    for b in &blocks {
        op.set_block(r0, 0, b);
        r0 += b.rows();
    }
    let kernel = nullspace_with_tol(&op, 1e-9);
    if kernel.is_empty() {
        return None;
    }
    let mut t = ComplexMatrix::zeros(unknowns, 1);
    for v in &kernel {
        t.axpy(complex_gaussian(&mut rng), v);
    }
    let t = t.reshape(dw, dy);
    let apply_t = |y: &ComplexMatrix| ws.element(&t.mat_vec(&ys.coords(y)));

    let frame = frame_for_span(ys, pair1.d().unit(), FrameSide::Right, FrameStrategy::Greedy).ok()?;
    let images: Vec<ComplexMatrix> = frame.elements.iter().map(&apply_t).collect();
    let g = gram_sum(&images, FrameSide::Right);
    let inv = psd_inverse_sqrt(&g, 1e-10).ok()?;
    if inv.condition > CONDITION_LIMIT {
        return None;
    }
    let coeffs = ys.coefficient_matrix(ws, |y| &apply_t(y) * &inv.matrix);
    let mut witness = EquivalenceWitness {
        source: ys.clone(),
        target: ws.clone(),
        coeffs,
        residual: 0.0,
    };
    witness.residual = witness_residual(&witness, pair1, pair2);
    let scale = crate::linalg::operator_norm(&witness.coeffs).max(1.0);
    if witness.residual <= ALGEBRAIC_TOL * scale {
        Some(witness)
    } else {
        None
    }
}

/// Worst residual of the isomorphism identities for `Φ` on full bases.
pub fn witness_residual(w: &EquivalenceWitness, pair1: &EquivalencePair, pair2: &EquivalencePair) -> f64 {
    let ys = pair1.y.basis();
    let imgs: Vec<ComplexMatrix> = ys.iter().map(|y| w.apply(y)).collect();
    let mut worst: f64 = 0.0;
    for (y, iy) in ys.iter().zip(&imgs) {
        worst = worst.max(pair2.y.residual(iy));
        for c in pair1.c().basis() {
            worst = worst.max((&w.apply(&(c * y)) - &(c * iy)).frobenius_norm());
        }
        for d in pair1.d().basis() {
            worst = worst.max((&w.apply(&(y * d)) - &(iy * d)).frobenius_norm());
        }
        for (y2, iy2) in ys.iter().zip(&imgs) {
            worst = worst.max((&(iy * &iy2.adjoint()) - &(y * &y2.adjoint())).frobenius_norm());
            worst = worst.max((&(&iy.adjoint() * iy2) - &(&y.adjoint() * y2)).frobenius_norm());
        }
    }
    for x in pair1.x.basis() {
        worst = worst.max(pair2.x.residual(&w.apply(x)));
    }
    let bijective = span_rank(&imgs, RANK_TOL) == pair2.y.dim() && imgs.len() == pair2.y.dim();
    if bijective {
        worst
    } else {
        f64::INFINITY
    }
}

/// Random unitary in the ambient commutant of `alg`.
pub fn random_commutant_unitary<R: Rng + ?Sized>(alg: &FdStarAlgebra, rng: &mut R) -> Result<ComplexMatrix> {
    Ok(crate::fdca::ambient_commutant(alg)?.random_unitary(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::matrix_unit(2, 0, 1)]).unwrap()
    }

    fn scalars(n: usize) -> FdStarAlgebra {
        FdStarAlgebra::from_generators(n, &[]).unwrap()
    }

    fn diag2() -> FdStarAlgebra {
        FdStarAlgebra::from_generators(2, &[ComplexMatrix::real_diagonal(&[1.0, 2.0])]).unwrap()
    }

    fn scalar_in_m2() -> UnitalInclusion {
        UnitalInclusion::new(scalars(2), m2()).unwrap()
    }

    fn diag_in_m2() -> UnitalInclusion {
        UnitalInclusion::new(diag2(), m2()).unwrap()
    }

    #[test]
    fn trivial_pair_validates() {
        let v = validate_pair(&EquivalencePair::trivial(&diag_in_m2()));
        assert!(v.passes(), "{:?}", v.failures());
    }

    #[test]
    fn non_invariant_x_fails_action_check() {
        let inc = diag_in_m2();
        let base = EquivalencePair::trivial(&inc);
        let bad = EquivalencePair::new(
            inc.clone(),
            inc.clone(),
            base.y().basis(),
            &[ComplexMatrix::matrix_unit(2, 0, 1), ComplexMatrix::identity(2)],
        )
        .unwrap();
        let v = validate_pair(&bad);
        assert!(v.worst("action.A_on_X").unwrap() > 1e-3);
        assert!(!v.passes());
    }

    #[test]
    fn corner_pairs_validate() {
        let e11 = ComplexMatrix::matrix_unit(2, 0, 0);
        let scalar = make_corner_pair(&scalar_in_m2(), 2, &e11.kron(&ComplexMatrix::identity(2))).unwrap();
        assert!(validate_pair(&scalar).passes());
        // rank-one p: B ≅ ℂ, D ≅ M₂, X ≅ ℂ, Y ≅ M₂
        assert_eq!((scalar.b().dim(), scalar.d().dim()), (1, 4));
        assert_eq!((scalar.x().dim(), scalar.y().dim()), (1, 4));

        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 0.0, 0.0]);
        let diag = make_corner_pair(&diag_in_m2(), 2, &p).unwrap();
        assert!(validate_pair(&diag).passes(), "{:?}", validate_pair(&diag).failures());
    }

    #[test]
    fn corner_with_identity_is_trivial_pair() {
        let inc = diag_in_m2();
        let pair = make_corner_pair(&inc, 1, &ComplexMatrix::identity(2)).unwrap();
        let trivial = EquivalencePair::trivial(&inc);
        assert!(pair.y().span_distance(trivial.y()) < 1e-12);
        assert!(pair.x().span_distance(trivial.x()) < 1e-12);
        assert!(pair.right().matches(&inc, 1e-12));
    }

    #[test]
    fn corner_rejects_bad_projections() {
        let inc = diag_in_m2();
        let not_proj = ComplexMatrix::real_diagonal(&[1.0, 0.5]);
        assert!(matches!(make_corner_pair(&inc, 1, &not_proj), Err(Error::NotProjection(_))));
        // diag(1, 0) misses the second minimal central summand of the diagonals
        let not_full = ComplexMatrix::real_diagonal(&[1.0, 0.0]);
        assert!(matches!(make_corner_pair(&inc, 1, &not_full), Err(Error::NotFull { .. })));
    }

    #[test]
    fn fullness_routes_agree() {
        let inc = diag_in_m2();
        let amp = inc.amplify(2).unwrap();
        let mna = amp.small();
        let d = |v: &[f64]| ComplexMatrix::real_diagonal(v);
        for (p, full) in [
            (d(&[1.0, 0.0, 0.0, 1.0]), true),
            (d(&[1.0, 1.0, 0.0, 0.0]), true),
            (d(&[1.0, 0.0, 1.0, 0.0]), false),
            (d(&[0.0, 1.0, 0.0, 0.0]), false),
        ] {
            assert_eq!(ideal_rank(mna, &p) == mna.dim(), full);
            assert_eq!(fullness_inverse(mna, &p).is_ok(), full);
        }
    }

    #[test]
    fn frames_normalize_and_reconstruct() {
        let trivial = EquivalencePair::trivial(&diag_in_m2());
        let f = right_frame(&trivial).unwrap();
        assert_eq!(f.len(), 1);
        assert!((&f.elements[0] - &ComplexMatrix::identity(2)).max_abs() < 1e-12);

        let e11 = ComplexMatrix::matrix_unit(2, 0, 0).kron(&ComplexMatrix::identity(2));
        let pair = make_corner_pair(&scalar_in_m2(), 2, &e11).unwrap();
        for side_frame in [right_frame(&pair).unwrap(), left_frame(&pair).unwrap()] {
            assert!(side_frame.len() <= pair.x().dim());
            assert!(side_frame.reconstruction_residual(pair.x()) < 1e-9);
        }
        let rf = right_frame(&pair).unwrap();
        assert!((&rf.gram() - pair.b().unit()).frobenius_norm() < 1e-9);
    }

    #[test]
    fn trivial_realization_is_identity() {
        let inc = diag_in_m2();
        let real = CornerRealization::new(&EquivalencePair::trivial(&inc)).unwrap();
        assert_eq!(real.n, 1);
        assert!((&real.p - &ComplexMatrix::identity(2)).max_abs() < 1e-12);
        for b in inc.large().basis() {
            assert!((&real.psi_d(b) - b).max_abs() < 1e-12);
        }
    }

    #[test]
    fn corner_realization_round_trip() {
        let e11 = ComplexMatrix::matrix_unit(2, 0, 0).kron(&ComplexMatrix::identity(2));
        let pair = make_corner_pair(&scalar_in_m2(), 2, &e11).unwrap();
        for strategy in [FrameStrategy::Greedy, FrameStrategy::FullBasis] {
            let real = CornerRealization::with_strategy(&pair, strategy).unwrap();
            for c in real.checks() {
                assert!(c.pass, "{c:?}");
            }
            for d in pair.d().basis() {
                assert!((&real.psi_d_inv(&real.psi_d(d)) - d).frobenius_norm() < 1e-9);
            }
        }
    }

    #[test]
    fn tensor_units() {
        let inc = diag_in_m2();
        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 0.0, 0.0]);
        let pair = make_corner_pair(&inc, 2, &p).unwrap();
        let right_unit = tensor_compose(&pair, &EquivalencePair::trivial(pair.right())).unwrap();
        assert!(right_unit.y().span_distance(pair.y()) < 1e-9);
        assert!(right_unit.x().span_distance(pair.x()) < 1e-9);
        let left_unit = tensor_compose(&EquivalencePair::trivial(&inc), &pair).unwrap();
        assert!(left_unit.y().span_distance(pair.y()) < 1e-9);
        assert!(tensor_compose(&pair, &pair).is_err());
    }

    #[test]
    fn equivalence_cases() {
        let inc = diag_in_m2();
        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 0.0, 0.0]);
        let pair = make_corner_pair(&inc, 2, &p).unwrap();
        let w = is_equivalent(&pair, &pair).expect("pair is equivalent to itself");
        assert!(w.residual < 1e-9);

        // X of different dimension over the same inclusions
        let trivial = EquivalencePair::trivial(&inc);
        let other = EquivalencePair::new(inc.clone(), inc.clone(), trivial.y().basis(), trivial.y().basis())
            .unwrap();
        assert!(is_equivalent(&trivial, &other).is_none());
    }

    #[test]
    fn unitary_twist_is_equivalent() {
        // C = M₂ ⊗ I₂ in M₄ has commutant I₂ ⊗ M₂
        let c = FdStarAlgebra::from_generators(
            4,
            &[ComplexMatrix::matrix_unit(2, 0, 1).kron(&ComplexMatrix::identity(2))],
        )
        .unwrap();
        let a = FdStarAlgebra::from_generators(
            4,
            &[ComplexMatrix::real_diagonal(&[1.0, 2.0]).kron(&ComplexMatrix::identity(2))],
        )
        .unwrap();
        let inc = UnitalInclusion::new(a, c).unwrap();
        let pair = EquivalencePair::trivial(&inc);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_commutant_unitary(inc.large(), &mut rng).unwrap();
        let twisted = pair.twisted_left(&u).unwrap();
        assert!(validate_pair(&twisted).passes());
        assert!(twisted.y().span_distance(pair.y()) > 1e-3);
        let w = is_equivalent(&pair, &twisted).expect("twist witness");
        for y in pair.y().basis() {
            assert!(twisted.y().contains(&w.apply(y), 1e-9));
        }
    }

    #[test]
    fn json_round_trip() {
        let p = ComplexMatrix::real_diagonal(&[1.0, 1.0, 0.0, 0.0]);
        let pair = make_corner_pair(&diag_in_m2(), 2, &p).unwrap();
        let text = serde_json::to_string(&pair).unwrap();
        let back: EquivalencePair = serde_json::from_str(&text).unwrap();
        assert!(back.y().span_distance(pair.y()) < 1e-12);
        assert!(validate_pair(&back).passes());
    }
}
