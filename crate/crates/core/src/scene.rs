//! Scene files (TOML or JSON): a domain, named forms, named paths or loop
//! words, an optional form module, and solver settings.
//!
//! ```toml
//! coordinates = ["z"]
//! excluded = "z"
//! basepoint = [[1.0, 0.0]]
//!
//! [[forms]]
//! name = "dlog"
//! coefficients = ["1/z"]
//! closed = true
//!
//! [[paths]]
//! name = "circle"
//! coords = ["exp(2*pi*i*s)"]
//! ```

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, Domain, FormId, FormModule, FormTable, Path, Segment, CLOSEDNESS_TOL, DEFAULT_FLOOR, POINT_TOL};
use crate::homotopy::{LoopFamily, LoopWord};
use crate::transport::{Evaluator, Settings};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSettings {
    pub tol: Option<f64>,
    pub max_degree: Option<usize>,
    pub subdivisions: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub name: String,
    pub coefficients: Vec<String>,
    #[serde(default)]
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub start: f64,
    pub end: f64,
    pub coords: Vec<String>,
}

/// Exactly one of `coords` (one smooth piece on `[0, 1]`), `segments`, or
/// `word` (a loop word over other named loops).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpec {
    pub name: String,
    pub generators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub name: Option<String>,
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub excluded: Option<String>,
    #[serde(default)]
    pub floor: Option<f64>,
    pub basepoint: Vec<[f64; 2]>,
    #[serde(default)]
    pub settings: SceneSettings,
    #[serde(default)]
    pub forms: Vec<FormSpec>,
    #[serde(default)]
    pub paths: Vec<PathSpec>,
    #[serde(default)]
    pub module: Option<ModuleSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl SceneFile {
    pub fn parse(text: &str, format: Format) -> Result<SceneFile> {
        match format {
            Format::Toml => toml::from_str(text).map_err(|e| Error::Scene(e.to_string())),
            Format::Json => serde_json::from_str(text).map_err(|e| Error::Scene(e.to_string())),
        }
    }
}

/// A loaded, resolved scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub file: SceneFile,
    pub table: FormTable,
    pub paths: BTreeMap<String, Path>,
    pub family: LoopFamily,
    pub module: Option<FormModule>,
}

impl Scene {
    pub fn load(path: &FsPath) -> Result<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scene(format!("{}: {e}", path.display())))?;
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Toml,
        };
        Scene::from_str(&text, format)
    }

    pub fn from_str(text: &str, format: Format) -> Result<Scene> {
        Scene::build(SceneFile::parse(text, format)?)
    }

    pub fn build(file: SceneFile) -> Result<Scene> {
        let coords: Vec<&str> = file.coordinates.iter().map(String::as_str).collect();
        let basepoint: Vec<Complex64> = file.basepoint.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        let domain = match &file.excluded {
            Some(p) => Domain::with_excluded_str(&coords, p, basepoint.clone())?,
            None => Domain::new(&coords, None, basepoint.clone())?,
        }
        .with_floor(file.floor.unwrap_or(DEFAULT_FLOOR));
        domain.check(&basepoint)?;
        let mut table = FormTable::new(domain);
        for f in &file.forms {
            if table.contains(&FormId::new(&f.name)) {
                return Err(Error::Scene(format!("form `{}` defined twice", f.name)));
            }
            let coefficients: Vec<&str> = f.coefficients.iter().map(String::as_str).collect();
            table.define(&f.name, &coefficients, f.closed)?;
        }
        let mut paths = BTreeMap::new();
        let mut family = LoopFamily::new(basepoint.clone());
        for p in file.paths.iter().filter(|p| p.word.is_none()) {
            let path = match (&p.coords, &p.segments) {
                (Some(c), None) => {
                    let c: Vec<&str> = c.iter().map(String::as_str).collect();
                    Path::parametric(vec![Segment::parse(0.0, 1.0, &c)?])?
                }
                (None, Some(segs)) => Path::parametric(
                    segs.iter()
                        .map(|s| {
                            let c: Vec<&str> = s.coords.iter().map(String::as_str).collect();
                            Segment::parse(s.start, s.end, &c)
                        })
                        .collect::<Result<_>>()?,
                )?,
                _ => {
                    return Err(Error::Scene(format!(
                        "path `{}` needs exactly one of `coords`, `segments` or `word`",
                        p.name
                    )))
                }
            };
            if path.dim() != coords.len() {
                return Err(Error::Dimension {
                    expected: coords.len(),
                    got: path.dim(),
                });
            }
            if dist(&path.start(), &basepoint) < POINT_TOL && dist(&path.end(), &basepoint) < POINT_TOL {
                family.add(&p.name, path.clone())?;
            }
            insert_unique(&mut paths, &p.name, path)?;
        }
        for p in file.paths.iter().filter(|p| p.word.is_some()) {
            if p.coords.is_some() || p.segments.is_some() {
                return Err(Error::Scene(format!("path `{}` mixes `word` with coordinates", p.name)));
            }
            let word = LoopWord::parse(p.word.as_deref().unwrap())?;
            let path = family.compile(&word)?;
            insert_unique(&mut paths, &p.name, path)?;
        }
        let module = match &file.module {
            None => None,
            Some(m) => Some(FormModule::new(
                &m.name,
                m.generators.iter().map(|g| FormId::new(g)).collect(),
                &table,
            )?),
        };
        Ok(Scene {
            file,
            table,
            paths,
            family,
            module,
        })
    }

    /// Scene settings over the built-in defaults.
    pub fn settings(&self) -> Settings {
        let d = Settings::default();
        let s = &self.file.settings;
        Settings {
            tol: s.tol.unwrap_or(d.tol),
            max_degree: s.max_degree.unwrap_or(d.max_degree),
            subdivisions: s.subdivisions.unwrap_or(d.subdivisions),
        }
    }

    pub fn seed(&self) -> u64 {
        self.file.settings.seed.unwrap_or(0)
    }

    pub fn evaluator(&self, settings: Settings) -> Evaluator {
        Evaluator::new(self.table.clone(), settings)
    }

    pub fn path(&self, name: &str) -> Result<&Path> {
        self.paths.get(name).ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    /// Validates every path against the domain and probes every
    /// closed-flagged form.
    pub fn check(&self) -> Result<SceneReport> {
        let mut paths = Vec::new();
        for (name, p) in &self.paths {
            p.validate(self.table.domain())?;
            paths.push(PathReport {
                name: name.clone(),
                pieces: p.pieces().len(),
                is_loop: p.is_loop(),
            });
        }
        let mut forms = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        for id in self.table.ids() {
            let form = self.table.get(id)?;
            let curl = if form.closed {
                Some(form.curl_probe(self.table.domain(), &mut rng, 100, 1.0)?)
            } else {
                None
            };
            if let Some(c) = curl {
                if c > CLOSEDNESS_TOL {
                    return Err(Error::NotClosed(id.to_string()));
                }
            }
            forms.push(FormReport {
                name: id.to_string(),
                closed: form.closed,
                curl,
            });
        }
        Ok(SceneReport {
            name: self.file.name.clone(),
            dimension: self.table.domain().dim(),
            forms,
            paths,
            loops: self.family.names().map(str::to_string).collect(),
            module: self.module.as_ref().map(|m| m.generators.iter().map(|g| g.to_string()).collect()),
        })
    }
}

fn insert_unique(paths: &mut BTreeMap<String, Path>, name: &str, path: Path) -> Result<()> {
    if paths.insert(name.to_string(), path).is_some() {
        return Err(Error::Scene(format!("path `{name}` defined twice")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FormReport {
    pub name: String,
    pub closed: bool,
    pub curl: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub name: String,
    pub pieces: usize,
    pub is_loop: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SceneReport {
    pub name: Option<String>,
    pub dimension: usize,
    pub forms: Vec<FormReport>,
    pub paths: Vec<PathReport>,
    pub loops: Vec<String>,
    pub module: Option<Vec<String>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
coordinates = ["z"]
excluded = "z"
basepoint = [[1.0, 0.0]]

[settings]
tol = 1e-11

[[forms]]
name = "dlog"
coefficients = ["1/z"]
closed = true

[[paths]]
name = "circle"
coords = ["exp(2*pi*i*s)"]

[[paths]]
name = "twice"
word = "circle^2"

[module]
name = "L"
generators = ["dlog"]
"#;

    #[test]
    fn toml_scene_round_trip() {
        let scene = Scene::from_str(SMALL, Format::Toml).unwrap();
        assert_eq!(scene.settings().tol, 1e-11);
        assert_eq!(scene.settings().max_degree, Settings::default().max_degree);
        let ev = scene.evaluator(scene.settings());
        let v = ev.iterated_integral(&[FormId::new("dlog")], scene.path("twice").unwrap()).unwrap();
        assert!((v - Complex64::new(0.0, 4.0 * std::f64::consts::PI)).norm() < 1e-9);
        let report = scene.check().unwrap();
        assert_eq!(report.loops, vec!["circle".to_string()]);
        let json = serde_json::to_string(&scene.file).unwrap();
        let again = Scene::from_str(&json, Format::Json).unwrap();
        assert_eq!(again.file, scene.file);
    }

    #[test]
    fn bad_scenes_are_rejected() {
        let unknown = SMALL.replace("word = \"circle^2\"", "word = \"nope\"");
        assert!(matches!(Scene::from_str(&unknown, Format::Toml), Err(Error::UnknownName(_))));
        let open = SMALL.replace("closed = true", "closed = false");
        assert!(matches!(Scene::from_str(&open, Format::Toml), Err(Error::NotClosed(_))));
        assert!(matches!(Scene::from_str("coordinates = 3", Format::Toml), Err(Error::Scene(_))));
        let on_locus = SMALL.replace("basepoint = [[1.0, 0.0]]", "basepoint = [[0.0, 0.0]]");
        assert!(matches!(Scene::from_str(&on_locus, Format::Toml), Err(Error::DomainViolation { .. })));
    }
}
