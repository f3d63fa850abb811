//! Seeded test instances: multi-matrix inclusions, full projections, corner
//! pairs, expectations and bimodule maps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bimodule::{ensure_valid, ideal_rank, make_corner_pair, EquivalencePair};
use crate::error::{Error, Result};
use crate::fdca::{relative_commutant, trace_conditional_expectation, FdStarAlgebra, UnitalInclusion};
use crate::linalg::{
    complex_gaussian, operator_norm, unitary_from_hermitian, ComplexMatrix, ZERO,
};
use crate::modular::{shift_left, shift_right};
use crate::quasibasis::{construct_for_ce, QuasiBasis};
use crate::transfer::BimoduleMap;

pub const MAX_AMBIENT: usize = 64;
pub const MAX_N: usize = 4;

/// `A = ⊕ M_{aᵢ} ⊆ C = ⊕ M_{cⱼ}` with `multiplicity[j][i]` copies of block `i`
/// of `A` inside block `j` of `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionSpec {
    pub small_blocks: Vec<usize>,
    pub large_blocks: Vec<usize>,
    pub multiplicity: Vec<Vec<usize>>,
    /// Conjugate everything by a seeded ambient unitary.
    #[serde(default)]
    pub rotate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    TraceCe,
    /// `φ = E(h·)` for `h = diag(weights)` (before rotation), rescaled so `E(h) = 1`.
    WeightedTrace { weights: Vec<f64> },
    RandomBimodule,
    /// `_hφ = E(·h)` for a seeded positive invertible `h ∈ A′∩C`.
    Shifted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub inclusion: InclusionSpec,
    pub n: usize,
    /// Rank of `p` inside each block `M_{n·aᵢ}` of `Mₙ(A)`.
    pub projection_ranks: Vec<usize>,
    /// Conjugate the standard projection in each block by a seeded unitary.
    #[serde(default)]
    pub random_projection: bool,
    pub map: MapKind,
}

pub const PRESETS: [&str; 5] = ["trivial", "corner-m2", "diag-m2", "weighted-m2", "multiblock"];

fn spec(small: &[usize], large: &[usize], mult: &[&[usize]]) -> InclusionSpec {
    InclusionSpec {
        small_blocks: small.to_vec(),
        large_blocks: large.to_vec(),
        multiplicity: mult.iter().map(|r| r.to_vec()).collect(),
        rotate: false,
    }
}

impl Scenario {
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let (inclusion, n, ranks, map) = match name {
            "trivial" => (spec(&[1, 1], &[2], &[&[1, 1]]), 1, vec![1, 1], MapKind::TraceCe),
            "corner-m2" => (spec(&[1], &[2], &[&[2]]), 2, vec![1], MapKind::TraceCe),
            "diag-m2" => (spec(&[1, 1], &[2], &[&[1, 1]]), 2, vec![1, 2], MapKind::TraceCe),
            "weighted-m2" => (
                spec(&[1], &[2], &[&[2]]),
                2,
                vec![1],
                MapKind::WeightedTrace {
                    weights: vec![2.0 / 3.0, 1.0 / 3.0],
                },
            ),
            "multiblock" => {
                let mut s = spec(&[1, 2], &[3, 2], &[&[1, 1], &[2, 0]]);
                s.rotate = true;
                (s, 2, vec![1, 2], MapKind::TraceCe)
            }
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Scenario {
            name: name.to_string(),
            seed,
            inclusion,
            n,
            projection_ranks: ranks,
            random_projection: false,
            map,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.inclusion.large_blocks.iter().sum()
    }

    /// Shape checks that do not need any linear algebra.
    pub fn check(&self) -> Result<()> {
        let s = &self.inclusion;
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if s.small_blocks.is_empty() || s.large_blocks.is_empty() {
            return bad("empty block list".into());
        }
        if s.small_blocks.iter().chain(&s.large_blocks).any(|&b| b == 0) {
            return bad("block sizes must be positive".into());
        }
        if s.multiplicity.len() != s.large_blocks.len()
            || s.multiplicity.iter().any(|r| r.len() != s.small_blocks.len())
        {
            return bad("multiplicity must be (#large blocks) x (#small blocks)".into());
        }
        for (j, row) in s.multiplicity.iter().enumerate() {
            let filled: usize = row.iter().zip(&s.small_blocks).map(|(m, a)| m * a).sum();
            if filled != s.large_blocks[j] {
                return bad(format!(
                    "block {j} of C has size {} but the embedded blocks fill {filled} (inclusion must be unital)",
                    s.large_blocks[j]
                ));
            }
        }
        for i in 0..s.small_blocks.len() {
            if s.multiplicity.iter().all(|r| r[i] == 0) {
                return bad(format!("block {i} of A is not embedded"));
            }
        }
        let ambient = self.ambient_dim();
        if ambient > MAX_AMBIENT || self.n * ambient > MAX_AMBIENT {
            return bad(format!("ambient dimension n·N = {} exceeds {MAX_AMBIENT}", self.n * ambient));
        }
        if self.n == 0 || self.n > MAX_N {
            return bad(format!("n = {} outside 1..={MAX_N}", self.n));
        }
        if self.projection_ranks.len() != s.small_blocks.len() {
            return bad("one projection rank per block of A".into());
        }
        for (i, (&r, &a)) in self.projection_ranks.iter().zip(&s.small_blocks).enumerate() {
            if r == 0 {
                return Err(Error::NotFull {
                    got: 0,
                    expected: i + 1,
                });
            }
            if r > self.n * a {
                return bad(format!("rank {r} exceeds block size {} of Mₙ(A)", self.n * a));
            }
        }
        if let MapKind::WeightedTrace { weights } = &self.map {
            if weights.len() != ambient || weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                return bad(format!("weights must be {ambient} positive numbers"));
            }
        }
        Ok(())
    }
}

/// Matrix units of the embedded algebras: `small[i][s][t]` and `large[j][k][l]`.
struct Units {
    small: Vec<Vec<Vec<ComplexMatrix>>>,
    large: Vec<Vec<Vec<ComplexMatrix>>>,
    rotation: ComplexMatrix,
}

fn matrix_units(spec: &InclusionSpec, rng: &mut ChaCha8Rng) -> Units {
    let n: usize = spec.large_blocks.iter().sum();
    let rotation = if spec.rotate {
        let h = ComplexMatrix::random_gaussian(n, n, rng).hermitian_part();
        unitary_from_hermitian(&h)
    } else {
        ComplexMatrix::identity(n)
    };
    let rot = |m: ComplexMatrix| &(&rotation * &m) * &rotation.adjoint();
    let mut large = Vec::new();
    let mut small: Vec<Vec<Vec<ComplexMatrix>>> = spec
        .small_blocks
        .iter()
        .map(|&a| vec![vec![ComplexMatrix::zeros(n, n); a]; a])
        .collect();
    let mut offset = 0;
    for (j, &c) in spec.large_blocks.iter().enumerate() {
        large.push(
            (0..c)
                .map(|k| {
                    (0..c)
                        .map(|l| rot(ComplexMatrix::matrix_unit(n, offset + k, offset + l)))
                        .collect()
                })
                .collect(),
        );
        let mut pos = offset;
        for (i, &a) in spec.small_blocks.iter().enumerate() {
            for _ in 0..spec.multiplicity[j][i] {
                for s in 0..a {
                    for t in 0..a {
                        let e = ComplexMatrix::matrix_unit(n, pos + s, pos + t);
                        small[i][s][t] = &small[i][s][t] + &e;
                    }
                }
                pos += a;
            }
        }
        offset += c;
    }
    let small = small
        .into_iter()
        .map(|b| b.into_iter().map(|r| r.into_iter().map(&rot).collect()).collect())
        .collect();
    Units {
        small,
        large,
        rotation,
    }
}

fn algebra_from_units(n: usize, units: &[Vec<Vec<ComplexMatrix>>]) -> Result<FdStarAlgebra> {
    let spanning: Vec<ComplexMatrix> = units.iter().flatten().flatten().cloned().collect();
    let unit = units
        .iter()
        .flat_map(|b| (0..b.len()).map(move |s| &b[s][s]))
        .fold(ComplexMatrix::zeros(n, n), |acc, e| &acc + e);
    FdStarAlgebra::new(n, &spanning, unit)
}

/// `A ⊆ C` from the block layout.
pub fn build_inclusion(spec: &InclusionSpec, seed: u64) -> Result<UnitalInclusion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units = matrix_units(spec, &mut rng);
    inclusion_from_units(spec, &units)
}

fn inclusion_from_units(spec: &InclusionSpec, units: &Units) -> Result<UnitalInclusion> {
    let n: usize = spec.large_blocks.iter().sum();
    let a = algebra_from_units(n, &units.small)?;
    let c = algebra_from_units(n, &units.large)?;
    UnitalInclusion::new(a, c)
}

/// A projection of the requested block ranks in `Mₙ(A)`, assembled from the
/// matrix units `e_kl ⊗ f^{(i)}_st`.
fn block_projection(scenario: &Scenario, units: &Units, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let n = scenario.n;
    let amb = scenario.ambient_dim();
    let mut p = ComplexMatrix::zeros(n * amb, n * amb);
    for (i, &rank) in scenario.projection_ranks.iter().enumerate() {
        let a = scenario.inclusion.small_blocks[i];
        let m = n * a;
        let mut q = ComplexMatrix::real_diagonal(&(0..m).map(|k| if k < rank { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        if scenario.random_projection {
            let w = unitary_from_hermitian(&ComplexMatrix::random_gaussian(m, m, rng).hermitian_part());
            q = &(&w * &q) * &w.adjoint();
        }
        for row in 0..m {
            for col in 0..m {
                let z = q.get(row, col);
                if z == ZERO {
                    continue;
                }
                let (k, s) = (row / a, row % a);
                let (l, t) = (col / a, col % a);
                let e = ComplexMatrix::matrix_unit(n, k, l).kron(&units.small[i][s][t]);
                p.axpy(z, &e);
            }
        }
    }
    p.hermitian_part()
}

/// A generated instance.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub scenario: Scenario,
    pub pair: EquivalencePair,
    pub phi: BimoduleMap,
    pub quasi_basis: Option<QuasiBasis>,
    /// Ambient unitary the preset was conjugated by (identity when not rotated).
    pub rotation: ComplexMatrix,
}

impl Bundle {
    pub fn inclusion(&self) -> &UnitalInclusion {
        self.pair.left()
    }

    pub fn is_expectation(&self) -> bool {
        matches!(self.scenario.map, MapKind::TraceCe)
    }
}

pub fn generate(scenario: &Scenario) -> Result<Bundle> {
    scenario.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let units = matrix_units(&scenario.inclusion, &mut rng);
    let inc = inclusion_from_units(&scenario.inclusion, &units)?;
    inc.small().validate()?;
    inc.large().validate()?;
    let p = block_projection(scenario, &units, &mut rng);
    let pair = make_corner_pair(&inc, scenario.n, &p)?;
    let amp = inc.amplify(scenario.n)?;
    let rank = ideal_rank(amp.small(), &p);
    if rank != amp.small().dim() {
        return Err(Error::NotFull {
            got: rank,
            expected: amp.small().dim(),
        });
    }
    ensure_valid(&pair)?;
    let e = trace_conditional_expectation(&inc)?;
    let (phi, quasi_basis) = match &scenario.map {
        MapKind::TraceCe => {
            let qb = construct_for_ce(&e, None)?;
            (e, Some(qb))
        }
        MapKind::WeightedTrace { weights } => {
            let h0 = &(&units.rotation * &ComplexMatrix::real_diagonal(weights)) * &units.rotation.adjoint();
            let comm = relative_commutant(&inc)?;
            if !comm.algebra().contains(&h0, 1e-9) {
                return Err(Error::InvalidScenario("weights do not define an element of A′∩C".into()));
            }
            let eh = e.apply(&h0);
            // rescale when E(h) is a multiple of the unit
            let unit = inc.small().unit();
            let lambda = unit.hs_inner(&eh) / unit.hs_inner(unit);
            let h = if (&eh - &unit.scale(lambda)).frobenius_norm() < 1e-9 {
                h0.scale(lambda.inv())
            } else {
                h0
            };
            let phi = shift_left(&e, &h)?;
            let qb = construct_for_ce(&e, None)?.for_left_shift(&h, phi.clone())?;
            (phi, Some(qb))
        }
        MapKind::RandomBimodule => (random_bimodule_map(&inc, scenario.seed.max(1))?, None),
        MapKind::Shifted => {
            let comm = relative_commutant(&inc)?;
            let r = comm.algebra().random_positive(&mut rng);
            let h = &r.scale_real(1.0 / operator_norm(&r).max(1e-300)) + inc.large().unit();
            let phi = shift_right(&e, &h)?;
            let qb = construct_for_ce(&e, None)?.for_right_shift(&h, phi.clone())?;
            (phi, Some(qb))
        }
    };
    phi.validate()?;
    if let Some(qb) = &quasi_basis {
        crate::quasibasis::ensure_verified(qb)?;
    }
    Ok(Bundle {
        scenario: scenario.clone(),
        pair,
        phi,
        quasi_basis,
        rotation: units.rotation,
    })
}

/// Random element of the bimodule-map space of `A ⊆ C`, normalized to unit
/// coefficient norm; the zero map when the space is trivial.
pub fn random_bimodule_map(inc: &UnitalInclusion, seed: u64) -> Result<BimoduleMap> {
    let space = bimodule_map_space(inc)?;
    let (c, a) = (inc.large(), inc.small());
    if space.is_empty() || seed == 0 {
        return Ok(BimoduleMap::zero(c.clone(), a.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = ComplexMatrix::zeros(a.dim(), c.dim());
    for m in &space {
        coeffs.axpy(complex_gaussian(&mut rng), m);
    }
    let norm = operator_norm(&coeffs);
    let map = BimoduleMap::new(c.clone(), a.clone(), coeffs.scale_real(1.0 / norm))?;
    map.validate()?;
    Ok(map)
}

/// Basis (as coefficient matrices) of the `A`-bimodule maps `C → A`, the
/// nullspace of `φ ↦ (φ(a c) − a φ(c), φ(c a) − φ(c) a)`.
pub fn bimodule_map_space(inc: &UnitalInclusion) -> Result<Vec<ComplexMatrix>> {
    let (c, a) = (inc.large(), inc.small());
    let (dc, da) = (c.dim(), a.dim());
    let unknowns = da * dc;
    // coefficient of φ_{rk} (row r of target coords, column k of source) at index r*dc + k
    let left: Vec<ComplexMatrix> = a
        .basis()
        .iter()
        .map(|ai| {
            (
                c.span().coefficient_matrix(c.span(), |m| ai * m),
                a.span().coefficient_matrix(a.span(), |m| ai * m),
            )
        })
        .flat_map(|(lc, la)| [lc, la])
        .collect();
    let right: Vec<ComplexMatrix> = a
        .basis()
        .iter()
        .map(|ai| {
            (
                c.span().coefficient_matrix(c.span(), |m| m * ai),
                a.span().coefficient_matrix(a.span(), |m| m * ai),
            )
        })
        .flat_map(|(rc, ra)| [rc, ra])
        .collect();
    let mut blocks = Vec::new();
    for pairs in [left, right] {
        for ch in pairs.chunks(2) {
            let (lc, la) = (&ch[0], &ch[1]);
            // Φ·Lc − La·Φ
            let mut k = ComplexMatrix::zeros(unknowns, unknowns);
            for r in 0..da {
                for col in 0..dc {
                    let row = r * dc + col;
                    for kk in 0..dc {
                        let v = lc.get(kk, col);
                        if v != ZERO {
                            k.set(row, r * dc + kk, k.get(row, r * dc + kk) + v);
                        }
                    }
                    for kk in 0..da {
                        let v = la.get(r, kk);
                        if v != ZERO {
                            k.set(row, kk * dc + col, k.get(row, kk * dc + col) - v);
                        }
                    }
                }
            }
            blocks.push(k);
        }
    }
    let rows: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut op = ComplexMatrix::zeros(rows, unknowns);
    let mut r0 = 0;
    for b in &blocks {
        op.set_block(r0, 0, b);
        r0 += b.rows();
    }
    Ok(crate::linalg::nullspace_with_tol(&op, 1e-9)
        .into_iter()
        .map(|v| v.reshape(da, dc))
        .collect())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::bimodule::validate_pair;
    use crate::transfer::f_forward;

    #[test]
    fn presets_generate_and_validate() {
        for name in PRESETS {
            let b = generate(&Scenario::preset(name, 1).unwrap()).unwrap();
            assert!(validate_pair(&b.pair).passes(), "{name}");
            assert!(b.phi.bimodule_residual() < 1e-9);
        }
    }

    #[test]
    fn corner_preset_is_the_running_instance() {
        let b = generate(&Scenario::preset("corner-m2", 1).unwrap()).unwrap();
        assert_eq!((b.pair.b().dim(), b.pair.d().dim()), (1, 4));
        assert_eq!((b.pair.x().dim(), b.pair.y().dim()), (1, 4));
        assert_eq!(b.pair.right().ambient_dim(), 4);
    }

    #[test]
    fn trivial_preset_transfers_to_phi() {
        let b = generate(&Scenario::preset("trivial", 1).unwrap()).unwrap();
        assert!(b.pair.right().matches(b.pair.left(), 1e-10));
        assert!(f_forward(&b.pair, &b.phi).unwrap().distance(&b.phi) < 1e-10);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut s = Scenario::preset("multiblock", 5).unwrap();
        s.random_projection = true;
        s.map = MapKind::Shifted;
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.pair.x().basis(), b.pair.x().basis());
        assert_eq!(a.phi.coeffs(), b.phi.coeffs());
    }

    #[test]
    fn multiblock_dimensions() {
        let b = generate(&Scenario::preset("multiblock", 2).unwrap()).unwrap();
        // A = ℂ ⊕ M₂, C = M₃ ⊕ M₂
        assert_eq!(b.inclusion().small().dim(), 5);
        assert_eq!(b.inclusion().large().dim(), 13);
        assert!(b.is_expectation());
    }

    #[test]
    fn malformed_scenarios_are_rejected() {
        let mut s = Scenario::preset("corner-m2", 1).unwrap();
        s.inclusion.multiplicity = vec![vec![1]];
        assert!(matches!(generate(&s), Err(Error::InvalidScenario(_))));
        let mut s = Scenario::preset("diag-m2", 1).unwrap();
        s.projection_ranks = vec![0, 2];
        assert!(matches!(generate(&s), Err(Error::NotFull { .. })));
        let mut s = Scenario::preset("corner-m2", 1).unwrap();
        s.n = 5;
        assert!(generate(&s).is_err());
        assert!(Scenario::preset("nope", 1).is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = Scenario::preset("weighted-m2", 3).unwrap();
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn bimodule_map_spaces() {
        let m2 = FdStarAlgebra::from_generators(2, &[ComplexMatrix::matrix_unit(2, 0, 1)]).unwrap();
        // A = C: c ↦ c z with z central; M₂ has a one-dimensional center
        let id = UnitalInclusion::identity(m2.clone());
        assert_eq!(bimodule_map_space(&id).unwrap().len(), 1);
        // ℂ ⊂ M₂: every c ↦ Tr(hc)·I
        let sc = UnitalInclusion::new(FdStarAlgebra::from_generators(2, &[]).unwrap(), m2.clone()).unwrap();
        assert_eq!(bimodule_map_space(&sc).unwrap().len(), 4);
        let phi = random_bimodule_map(&sc, 5).unwrap();
        for c in m2.basis() {
            let img = phi.apply(c);
            assert!((&img - &ComplexMatrix::identity(2).scale(img.get(0, 0))).max_abs() < 1e-10);
        }
        assert_eq!(random_bimodule_map(&sc, 0).unwrap().coeffs().max_abs(), 0.0);
    }
}
