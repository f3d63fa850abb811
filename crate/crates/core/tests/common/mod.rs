#![allow(dead_code)]

use morita_lab::generator::{generate, Bundle, MapKind, Scenario, PRESETS};
use morita_lab::report::CheckEntry;

/// Presets over four seeds plus random, shifted and randomly placed variants.
pub fn family() -> Vec<Scenario> {
    let mut out = Vec::new();
    for seed in 1..=4 {
        for name in PRESETS {
            out.push(Scenario::preset(name, seed).unwrap());
        }
    }
    for seed in [11, 12] {
        let mut s = Scenario::preset("diag-m2", seed).unwrap();
        s.name = format!("diag-m2-random-{seed}");
        s.map = MapKind::RandomBimodule;
        out.push(s);
    }
    for seed in [13, 14] {
        let mut s = Scenario::preset("multiblock", seed).unwrap();
        s.name = format!("multiblock-shifted-{seed}");
        s.map = MapKind::Shifted;
        out.push(s);
    }
    for seed in [15, 16] {
        let mut s = Scenario::preset("diag-m2", seed).unwrap();
        s.name = format!("diag-m2-placed-{seed}");
        s.random_projection = true;
        out.push(s);
    }
    out
}

pub fn bundles() -> Vec<Bundle> {
    family().iter().map(|s| generate(s).unwrap_or_else(|e| panic!("{}: {e}", s.name))).collect()
}

/// Names of failing entries, with residual and tolerance.
pub fn failures(entries: &[CheckEntry]) -> Vec<String> {
    entries
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} {:.3e} > {:.1e}", c.check, c.residual, c.tolerance))
        .collect()
}
