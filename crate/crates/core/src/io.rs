//! Instance bundles on disk: `bundle.json`, `validation.json` and
//! `realization.json` inside a named directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bimodule::{CornerRealization, EquivalencePair};
use crate::error::{Error, Result};
use crate::generator::{Bundle, Scenario};
use crate::linalg::ComplexMatrix;
use crate::quasibasis::{QuasiBasis, QuasiBasisWire};
use crate::report::Report;
use crate::transfer::BimoduleMap;

pub const BUNDLE_FILE: &str = "bundle.json";
pub const VALIDATION_FILE: &str = "validation.json";
pub const REALIZATION_FILE: &str = "realization.json";
pub const BUNDLE_SCHEMA: u32 = 1;

/// `{"source": "C", "target": "A", "coeffs": Matrix}`; names resolve against the bundle's pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapWire {
    pub source: String,
    pub target: String,
    pub coeffs: ComplexMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleFile {
    pub schema: u32,
    pub name: String,
    pub scenario: Scenario,
    pub pair: EquivalencePair,
    pub phi: MapWire,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quasi_basis: Option<QuasiBasisWire>,
    pub rotation: ComplexMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealizationFile {
    pub n: usize,
    pub p: ComplexMatrix,
    pub frame: Vec<ComplexMatrix>,
    pub witnesses: usize,
}

/// Why a bundle could not be loaded: unreadable input, or content that
/// parsed but failed validation.
#[derive(Debug)]
pub enum LoadError {
    Input(Error),
    Invalid(Error),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Input(e) => write!(f, "cannot read bundle: {e}"),
            LoadError::Invalid(e) => write!(f, "bundle failed validation: {e}"),
        }
    }
}

impl std::error::Error for LoadError {}

impl BundleFile {
    pub fn from_bundle(b: &Bundle) -> Self {
        BundleFile {
            schema: BUNDLE_SCHEMA,
            name: b.scenario.name.clone(),
            scenario: b.scenario.clone(),
            pair: b.pair.clone(),
            phi: MapWire {
                source: "C".into(),
                target: "A".into(),
                coeffs: b.phi.coeffs().clone(),
            },
            quasi_basis: b.quasi_basis.as_ref().map(|q| q.to_wire("phi")),
            rotation: b.rotation.clone(),
        }
    }

    pub fn into_bundle(self) -> Result<Bundle> {
        if self.schema != BUNDLE_SCHEMA {
            return Err(Error::InvalidInput(format!("unsupported bundle schema {}", self.schema)));
        }
        let resolve = |name: &str| match name {
            "A" => Ok(self.pair.a().clone()),
            "B" => Ok(self.pair.b().clone()),
            "C" => Ok(self.pair.c().clone()),
            "D" => Ok(self.pair.d().clone()),
            other => Err(Error::InvalidInput(format!("unknown algebra name {other:?}"))),
        };
        let phi = BimoduleMap::new(resolve(&self.phi.source)?, resolve(&self.phi.target)?, self.phi.coeffs)?;
        let quasi_basis = match self.quasi_basis {
            Some(w) if w.owner_map == "phi" => Some(QuasiBasis::from_wire(w, phi.clone())?),
            Some(w) => return Err(Error::InvalidInput(format!("unknown owner map {:?}", w.owner_map))),
            None => None,
        };
        Ok(Bundle {
            scenario: self.scenario,
            pair: self.pair,
            phi,
            quasi_basis,
            rotation: self.rotation,
        })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Write the bundle directory; returns the path of `bundle.json`.
pub fn write_bundle(dir: &Path, bundle: &Bundle, validation: &Report) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(BUNDLE_FILE);
    write_json(&path, &BundleFile::from_bundle(bundle))?;
    write_json(&dir.join(VALIDATION_FILE), validation)?;
    if let Ok(real) = CornerRealization::new(&bundle.pair) {
        let file = RealizationFile {
            n: real.n,
            p: real.p.clone(),
            frame: real.frame.elements.clone(),
            witnesses: real.witnesses_a.len(),
        };
        write_json(&dir.join(REALIZATION_FILE), &file)?;
    }
    Ok(path)
}

/// `path` may name the bundle directory or its `bundle.json`.
pub fn load_bundle(path: &Path) -> std::result::Result<Bundle, LoadError> {
    let file = if path.is_dir() { path.join(BUNDLE_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file)
        .map_err(|e| LoadError::Input(Error::InvalidInput(format!("{}: {e}", file.display()))))?;
    let parsed: BundleFile = serde_json::from_str(&text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => LoadError::Invalid(Error::Json(e)),
        _ => LoadError::Input(Error::Json(e)),
    })?;
    parsed.into_bundle().map_err(LoadError::Invalid)
}

pub fn load_report(path: &Path) -> Result<Report> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidScenario(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::generate;

    #[test]
    fn bundle_round_trip() {
        let b = generate(&Scenario::preset("diag-m2", 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_bundle(dir.path(), &b, &Report::new("diag-m2", vec![])).unwrap();
        assert!(dir.path().join(VALIDATION_FILE).exists());
        assert!(dir.path().join(REALIZATION_FILE).exists());
        let back = load_bundle(&path).unwrap();
        assert_eq!(back.phi.coeffs(), b.phi.coeffs());
        assert!(back.quasi_basis.is_some());
        assert!(load_bundle(dir.path()).is_ok());
    }

    #[test]
    fn corrupted_and_missing_bundles() {
        let b = generate(&Scenario::preset("corner-m2", 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_bundle(dir.path(), &b, &Report::new("x", vec![])).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["pair"]["left"]["C"]["basis"][0]["data"][0][0] = serde_json::json!(0.9);
        fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(load_bundle(&path), Err(LoadError::Invalid(_))));
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load_bundle(&path), Err(LoadError::Input(_))));
        assert!(matches!(load_bundle(&dir.path().join("missing")), Err(LoadError::Input(_))));
    }
}
