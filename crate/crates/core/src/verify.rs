//! Verification suites over a bundle, each returning named residual checks.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bimodule::{
    make_corner_pair, random_commutant_unitary, tensor_compose, validate_pair, CornerRealization,
    EquivalencePair, FrameStrategy,
};
use crate::error::{Error, Result};
use crate::fdca::{expectation_report, relative_commutant};
use crate::generator::{random_bimodule_map, Bundle};
use crate::linalg::{hermitian_eigen, ComplexMatrix, ALGEBRAIC_TOL, C64};
use crate::modular::{conjugation_check, modular_checks, rho_iso, shifted_maps, theta_from_quasibasis};
use crate::quasibasis::{
    construct_for_ce, pull_back, random_spanning_set, transfer_quasi_basis_unchecked, verify_quasi_basis,
    watatani_index, QuasiBasis,
};
use crate::report::CheckEntry;
use crate::transfer::{
    amplification_residual, amplify_map, ce_transfer_checks, check_positivity_transfer, composition_check,
    corner_identity_residual, f_corner, f_forward, f_inverse, f_via_corner, invariance_via_search, map_norm_estimate, pimsner_popa_transfer, sampled_negativity, transfer,
    transfer_conditions, uniqueness_audit, BimoduleMap,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Construction,
    Corner,
    Properties,
    Quasibasis,
    Modular,
    Composition,
}

pub const ALL_SUITES: [Suite; 6] = [
    Suite::Construction,
    Suite::Corner,
    Suite::Properties,
    Suite::Quasibasis,
    Suite::Modular,
    Suite::Composition,
];

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Construction => "construction",
            Suite::Corner => "corner",
            Suite::Properties => "properties",
            Suite::Quasibasis => "quasibasis",
            Suite::Modular => "modular",
            Suite::Composition => "composition",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ALL_SUITES
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite {s:?}")))
    }
}

/// Comma-separated suite names, or `all`.
pub fn parse_suites(spec: &str) -> Result<Vec<Suite>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if part == "all" {
            out.extend(ALL_SUITES);
        } else {
            out.push(part.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("no suites selected".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Positive elements sampled for positivity checks.
    pub positive_samples: usize,
    /// Unit-ball samples for norm estimates.
    pub norm_samples: usize,
    pub norm_restarts: usize,
    /// Spectral draws for Pimsner–Popa bisection.
    pub pp_draws: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 1,
            positive_samples: 1000,
            norm_samples: 10_000,
            norm_restarts: 8,
            pp_draws: 40,
        }
    }
}

fn failed(suite: Suite, e: &Error) -> CheckEntry {
    let mut c = CheckEntry::flag(format!("{}.error", suite.name()), false, "suite ran to completion");
    c.paper_ref = format!("suite ran to completion: {e}");
    c
}

fn renamed(mut entries: Vec<CheckEntry>, suffix: &str) -> Vec<CheckEntry> {
    for c in &mut entries {
        c.check = format!("{}_{suffix}", c.check);
    }
    entries
}

/// Run the selected suites concurrently; a suite that errors contributes one failing entry.
pub fn run_suites(bundle: &Bundle, suites: &[Suite], opts: &VerifyOptions) -> Vec<CheckEntry> {
    suites
        .par_iter()
        .flat_map_iter(|&s| {
            let res = match s {
                Suite::Construction => construction_suite(bundle, opts),
                Suite::Corner => corner_suite(bundle),
                Suite::Properties => properties_suite(bundle, opts),
                Suite::Quasibasis => quasibasis_suite(bundle, opts),
                Suite::Modular => modular_suite(bundle, opts),
                Suite::Composition => composition_suite(bundle, opts),
            };
            match res {
                Ok(v) => v,
                Err(e) => vec![failed(s, &e)],
            }
        })
        .collect()
}

/// Structural validation of the stored instance.
pub fn validation_entries(bundle: &Bundle) -> Vec<CheckEntry> {
    let mut out: Vec<CheckEntry> = validate_pair(&bundle.pair)
        .entries
        .into_iter()
        .map(|c| c.prefixed("validation"))
        .collect();
    for (name, alg) in [("A", bundle.pair.a()), ("C", bundle.pair.c()), ("B", bundle.pair.b()), ("D", bundle.pair.d())] {
        out.push(CheckEntry::new(
            format!("validation.closure_{name}"),
            alg.closure_residual(),
            ALGEBRAIC_TOL,
            "finite-dimensional C*-algebra",
        ));
    }
    out.push(CheckEntry::new(
        "validation.phi_bimodule",
        bundle.phi.bimodule_residual(),
        ALGEBRAIC_TOL * bundle.phi.scale(),
        "φ(a c a′) = a φ(c) a′",
    ));
    if let Some(qb) = &bundle.quasi_basis {
        out.extend(verify_quasi_basis(qb).into_iter().map(|c| c.prefixed("validation")));
    }
    out
}

pub fn construction_suite(b: &Bundle, opts: &VerifyOptions) -> Result<Vec<CheckEntry>> {
    let pair = &b.pair;
    let phi = &b.phi;
    let t = transfer(pair, phi)?;
    let mut out = transfer_conditions(pair, phi, &t);
    out.push(CheckEntry::new(
        "construction.psi_bimodule",
        t.psi.bimodule_residual(),
        ALGEBRAIC_TOL * phi.scale(),
        "f(φ) is a B-bimodule map",
    ));
    let back = f_inverse(pair, &t.psi)?;
    out.push(CheckEntry::new(
        "construction.round_trip",
        back.distance(phi),
        ALGEBRAIC_TOL,
        "f⁻¹(f(φ)) = φ",
    ));
    out.extend(uniqueness_audit(pair, phi, &[1e-3, 1e-6], opts.seed)?.entries());
    let other = random_bimodule_map(pair.left(), opts.seed.wrapping_add(17).max(1))?;
    let (al, be) = (C64::new(0.7, -0.3), C64::new(-1.1, 0.4));
    let lhs = f_forward(pair, &phi.combine(al, &other, be)?)?;
    let rhs = t.psi.combine(al, &f_forward(pair, &other)?, be)?;
    out.push(CheckEntry::new(
        "construction.linearity",
        lhs.distance(&rhs),
        ALGEBRAIC_TOL,
        "f(αφ₁ + βφ₂) = αf(φ₁) + βf(φ₂)",
    ));
    out.push(isometry_entry(phi, &t.psi, opts));
    Ok(out)
}

/// Sampled norms of `φ` and `f(φ)` agree to 1e-2 relative.
pub fn isometry_entry(phi: &BimoduleMap, psi: &BimoduleMap, opts: &VerifyOptions) -> CheckEntry {
    let a = map_norm_estimate(phi, opts.norm_samples, opts.norm_restarts, opts.seed).value;
    let b = map_norm_estimate(psi, opts.norm_samples, opts.norm_restarts, opts.seed.wrapping_add(1)).value;
    let scale = a.max(b);
    let rel = if scale == 0.0 { 0.0 } else { (a - b).abs() / scale };
    CheckEntry::new("construction.isometry_sampled", rel, 1e-2, "‖f(φ)‖ = ‖φ‖")
}

pub fn corner_suite(b: &Bundle) -> Result<Vec<CheckEntry>> {
    let real = CornerRealization::new(&b.pair)?;
    let phi = &b.phi;
    let mut out = real.checks();
    let direct = f_forward(&b.pair, phi)?;
    let via = f_via_corner(&real, phi)?;
    out.push(CheckEntry::new(
        "corner.route_agreement",
        direct.distance(&via),
        ALGEBRAIC_TOL,
        "f(φ) = Ψ_B⁻¹∘F(φ)∘Ψ_D",
    ));
    let big_f = f_corner(&real, phi)?;
    out.push(CheckEntry::new(
        "corner.inner_product_identity",
        corner_identity_residual(&real, phi, &big_f),
        ALGEBRAIC_TOL,
        "⟨(1⊗e)xp·F(φ)(pcp), (1⊗e)zp⟩ = φ(⟨(1⊗e)xp·pcp, (1⊗e)zp⟩)",
    ));
    out.push(CheckEntry::new(
        "corner.F_bimodule",
        big_f.bimodule_residual(),
        ALGEBRAIC_TOL * phi.scale(),
        "F(φ) = (φ⊗id)|pMₙ(C)p",
    ));
    if b.is_expectation() {
        out.push(CheckEntry::new(
            "corner.F_fixes_p",
            (&big_f.apply(&real.p) - &real.p).frobenius_norm(),
            ALGEBRAIC_TOL,
            "ψ(p) = p",
        ));
    }
    let full = CornerRealization::with_strategy(&b.pair, FrameStrategy::FullBasis)?;
    out.push(CheckEntry::new(
        "corner.frame_independence",
        f_via_corner(&full, phi)?.distance(&via),
        ALGEBRAIC_TOL,
        "f(φ) = Ψ_B⁻¹∘F(φ)∘Ψ_D",
    ));
    Ok(out)
}

pub fn properties_suite(b: &Bundle, opts: &VerifyOptions) -> Result<Vec<CheckEntry>> {
    let pair = &b.pair;
    let phi = &b.phi;
    let mut out = vec![CheckEntry::new(
        "properties.amplification_k2",
        amplification_residual(pair, phi, 2)?,
        ALGEBRAIC_TOL,
        "fₙ(φ⊗id) = f(φ)⊗id",
    )];
    let positive = sampled_negativity(phi, 200, opts.seed) <= ALGEBRAIC_TOL;
    if positive {
        let two = sampled_negativity(&amplify_map(phi, 2)?, 200, opts.seed.wrapping_add(3)) <= ALGEBRAIC_TOL;
        out.extend(check_positivity_transfer(pair, phi, opts.positive_samples, if two { 2 } else { 1 }, opts.seed)?);
    } else if phi.selfadjoint_residual() <= ALGEBRAIC_TOL * phi.scale() {
        let psi = f_forward(pair, phi)?;
        out.push(CheckEntry::new(
            "properties.selfadjoint",
            psi.selfadjoint_residual(),
            ALGEBRAIC_TOL,
            "f(φ)(d*) = f(φ)(d)*",
        ));
    }
    let r = expectation_report(phi, 32, opts.seed);
    let unital = (&phi.apply(pair.c().unit()) - pair.a().unit()).frobenius_norm();
    let is_ce = r.fixes_subalgebra <= ALGEBRAIC_TOL
        && r.positivity <= ALGEBRAIC_TOL
        && r.idempotence <= ALGEBRAIC_TOL
        && unital <= ALGEBRAIC_TOL;
    if is_ce {
        out.extend(ce_transfer_checks(pair, phi, opts.seed)?);
        let (_, pp) = pimsner_popa_transfer(pair, phi, opts.pp_draws, opts.seed)?;
        out.extend(pp);
    }
    Ok(out)
}

/// Another quasi-basis for the same map: a Gram construction over a random
/// spanning set for expectations, otherwise `{(uᵢa, a⁻¹vᵢ)}` for a random invertible `a ∈ A`.
fn second_quasi_basis(b: &Bundle, qb: &QuasiBasis, seed: u64) -> Result<QuasiBasis> {
    if b.is_expectation() {
        let span = random_spanning_set(b.pair.c(), 3, seed);
        return construct_for_ce(&qb.owner, Some(&span));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = b.pair.a();
    let w = &a.random_positive(&mut rng) + a.unit();
    let winv = crate::linalg::inverse(&w)?;
    let pairs = qb.pairs.iter().map(|(u, v)| (u * &w, &winv * v)).collect();
    QuasiBasis::new(pairs, qb.owner.clone())
}

pub fn quasibasis_suite(b: &Bundle, opts: &VerifyOptions) -> Result<Vec<CheckEntry>> {
    let Some(qb) = &b.quasi_basis else {
        return Ok(Vec::new());
    };
    let real = CornerRealization::new(&b.pair)?;
    let mut out = verify_quasi_basis(qb);
    let (cqb, entries) = transfer_quasi_basis_unchecked(&real, qb)?;
    out.extend(entries);
    let back = pull_back(&real, &cqb, &b.phi)?;
    out.extend(renamed(verify_quasi_basis(&back), "pullback"));
    let index = watatani_index(qb);
    if b.is_expectation() {
        let lo = hermitian_eigen(&index.hermitian_part())?.values[0];
        out.push(CheckEntry::at_least("quasibasis.index_lower_bound", lo, 1.0 - 1e-9, "Σ uᵢvᵢ ≥ 1"));
    }
    let other = second_quasi_basis(b, qb, opts.seed.wrapping_add(5))?;
    out.extend(renamed(verify_quasi_basis(&other), "second"));
    out.push(CheckEntry::new(
        "quasibasis.index_independence",
        (&watatani_index(&other) - &index).frobenius_norm(),
        ALGEBRAIC_TOL,
        "Σ uᵢvᵢ independent of the quasi-basis",
    ));
    Ok(out)
}

pub fn modular_suite(b: &Bundle, opts: &VerifyOptions) -> Result<Vec<CheckEntry>> {
    let Some(qb) = &b.quasi_basis else {
        return Ok(Vec::new());
    };
    let comm = relative_commutant(b.pair.left())?;
    let (theta, mut out) = modular_checks(qb, &comm)?;
    let real = CornerRealization::new(&b.pair)?;
    out.extend(conjugation_check(&real, qb)?);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(11));
    let h = &comm.algebra().random_positive(&mut rng) + comm.algebra().unit();
    out.extend(shifted_maps(&real, &b.phi, &h)?);
    let other = second_quasi_basis(b, qb, opts.seed.wrapping_add(5))?;
    out.push(CheckEntry::new(
        "modular.theta_independence",
        theta_from_quasibasis(&other, &comm)?.distance(&theta),
        ALGEBRAIC_TOL,
        "θ^φ is unique",
    ));
    let full = CornerRealization::with_strategy(&b.pair, FrameStrategy::FullBasis)?;
    let (r1, r2) = (rho_iso(&real)?, rho_iso(&full)?);
    out.push(CheckEntry::new(
        "modular.rho_frame_independence",
        r1.conjugate(&theta)?.distance(&r2.conjugate(&theta)?),
        ALGEBRAIC_TOL,
        "θ^{f(φ)} = ρ∘θ^φ∘ρ⁻¹",
    ));
    Ok(out)
}

/// `p = e₁₁ ⊗ 1` in `M₂` of the right-hand subalgebra; always full.
pub fn second_corner(pair: &EquivalencePair) -> Result<EquivalencePair> {
    let right = pair.right();
    let p = ComplexMatrix::matrix_unit(2, 0, 0).kron(right.small().unit());
    make_corner_pair(right, 2, &p)
}

pub fn composition_suite(b: &Bundle, opts: &VerifyOptions) -> Result<Vec<CheckEntry>> {
    let pair = &b.pair;
    let phi = &b.phi;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(23));
    let mut out = renamed(invariance_via_search(pair, pair, phi)?, "self");
    let other = pair.represented(&mut rng)?;
    out.extend(renamed(invariance_via_search(pair, &other, phi)?, "represented"));
    let u = random_commutant_unitary(pair.c(), &mut rng)?;
    let v = random_commutant_unitary(pair.d(), &mut rng)?;
    let twisted = pair.twisted_left(&u)?.twisted_right(&v)?;
    out.extend(renamed(invariance_via_search(pair, &twisted, phi)?, "twisted"));
    let left_unit = EquivalencePair::trivial(pair.left());
    let right_unit = EquivalencePair::trivial(pair.right());
    out.extend(renamed(composition_check(pair, &right_unit, phi)?, "unit_right"));
    out.extend(renamed(composition_check(&left_unit, pair, phi)?, "unit_left"));
    for (name, composite) in [
        ("left", tensor_compose(&left_unit, pair)?),
        ("right", tensor_compose(pair, &right_unit)?),
    ] {
        let dist = composite.y().span_distance(pair.y()).max(composite.x().span_distance(pair.x()));
        out.push(CheckEntry::new(
            format!("composition.unit_law_{name}"),
            dist,
            ALGEBRAIC_TOL,
            "A ⊗_A X ≅ X ≅ X ⊗_B B",
        ));
    }
    let pair2 = second_corner(pair)?;
    out.extend(renamed(composition_check(pair, &pair2, phi)?, "chain"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate, Scenario};

    #[test]
    fn suite_names_parse() {
        assert_eq!(parse_suites("all").unwrap().len(), 6);
        assert_eq!(parse_suites("modular, corner").unwrap(), vec![Suite::Corner, Suite::Modular]);
        assert!(parse_suites("bogus").is_err());
        assert!(parse_suites("").is_err());
    }

    #[test]
    fn every_suite_passes_on_corner_preset() {
        let b = generate(&Scenario::preset("corner-m2", 1).unwrap()).unwrap();
        let opts = VerifyOptions {
            norm_samples: 2000,
            positive_samples: 200,
            ..VerifyOptions::default()
        };
        let entries = run_suites(&b, &ALL_SUITES, &opts);
        let bad: Vec<_> = entries.iter().filter(|c| !c.pass).collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert!(validation_entries(&b).iter().all(|c| c.pass));
    }
}
