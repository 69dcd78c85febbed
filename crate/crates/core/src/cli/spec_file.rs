//! The domain-spec file format shared by every subcommand.
//!
//! ```text
//! # two Weierstrass-type factors of area 1
//! p = 2
//!
//! [factor]
//! type = weierstrass
//! r0 = 1
//! amplitude = 0.1
//! a = 0.5
//! b = 3
//! terms = 20
//! area = 1
//!
//! [factor]
//! type = polygon
//! vertices = 1,1; -1,1; -1,-1; 1,-1
//! area = 1
//! ```
//!
//! Lines are `key = value`; `#` starts a comment. Top-level keys come before
//! the first section. Every `[factor]` section adds one factor in order; the
//! optional `[boundary_minimal]` section configures that experiment. Unknown
//! keys, repeated keys and missing required keys are errors anchored at the
//! offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::fractal::FractalFunction;
use crate::geometry2d::{EllipsoidSpec, Interpolation, ProfileSource, RadialProfile, DEFAULT_GRID};
use crate::product::{Factor, ProductDomain};

/// A parse or validation failure, pointing at a line of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub file: String,
    /// 1-based; 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.file, self.message)
        } else {
            write!(f, "{}:{}: {}", self.file, self.line, self.message)
        }
    }
}

impl std::error::Error for SpecError {}

/// One factor as written in the file.
#[derive(Clone, Debug)]
pub struct FactorSpec {
    pub line: usize,
    pub factor: Factor,
}

/// Settings of the `[boundary_minimal]` section.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMinimalSpec {
    pub point: Vec<f64>,
    pub half_width: f64,
    pub target_area: f64,
    pub eta: Option<f64>,
}

/// A parsed spec file.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub p: f64,
    pub factors: Vec<FactorSpec>,
    pub boundary_minimal: Option<BoundaryMinimalSpec>,
}

impl DomainSpec {
    pub fn domain(&self) -> crate::Result<ProductDomain> {
        ProductDomain::new(
            self.factors.iter().map(|f| f.factor.clone()).collect(),
            self.p,
        )
    }

    /// The factors as planar profiles; fails if some factor is an ellipsoid block.
    pub fn planar_profiles(&self) -> Option<Vec<Arc<RadialProfile>>> {
        self.factors
            .iter()
            .map(|f| match &f.factor {
                Factor::Planar(w) => Some(w.clone()),
                _ => None,
            })
            .collect()
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

pub fn load(path: &Path) -> Result<DomainSpec, SpecError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| SpecError {
        file: file.clone(),
        line: 0,
        message: format!("cannot read file: {e}"),
    })?;
    parse(&text, &file)
}

pub fn parse(text: &str, file: &str) -> Result<DomainSpec, SpecError> {
    let err = |line: usize, message: String| SpecError {
        file: file.to_string(),
        line,
        message,
    };
    let mut sections = vec![Section {
        name: String::new(),
        line: 0,
        entries: BTreeMap::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("unterminated section header '{content}'")))?
                .trim();
            if !matches!(name, "factor" | "boundary_minimal") {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            if name == "boundary_minimal" && sections.iter().any(|s| s.name == name) {
                return Err(err(line, "repeated [boundary_minimal] section".into()));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', found '{content}'")))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(err(
                line,
                format!("expected 'key = value', found '{content}'"),
            ));
        }
        let section = sections.last_mut().expect("top-level section");
        if section.entries.contains_key(key) {
            return Err(err(line, format!("repeated key '{key}'")));
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }

    let mut top = Reader::new(sections.remove(0), file);
    let p = top.opt_f64("p")?.unwrap_or(2.0);
    if !(p >= 1.0 && p.is_finite()) {
        return Err(err(
            top.line_of("p"),
            format!("p must be a finite value >= 1, got {p}"),
        ));
    }
    top.finish()?;

    let mut factors = Vec::new();
    let mut boundary_minimal = None;
    for section in sections {
        let mut r = Reader::new(section, file);
        if r.section.name == "factor" {
            factors.push(parse_factor(&mut r)?);
        } else {
            boundary_minimal = Some(BoundaryMinimalSpec {
                point: r.list("point")?,
                half_width: r.f64("half_width")?,
                target_area: r.f64("target_area")?,
                eta: r.opt_f64("eta")?,
            });
        }
        r.finish()?;
    }
    if factors.is_empty() {
        return Err(err(0, "no [factor] sections".into()));
    }
    Ok(DomainSpec {
        p,
        factors,
        boundary_minimal,
    })
}

fn parse_factor(r: &mut Reader<'_>) -> Result<FactorSpec, SpecError> {
    let line = r.section.line;
    let kind = r.string("type")?;
    let kind_line = r.line_of("type");
    let params: &[&str] = match kind.as_str() {
        "disk" => &["area"],
        "cosine" => &["area", "amplitude"],
        "polygon" => &["vertices", "area"],
        "samples" => &["radii", "area"],
        "weierstrass" => &["r0", "amplitude", "a", "b", "terms", "area"],
        "hunt" => &["r0", "amplitude", "a", "b", "terms", "seed", "area"],
        "xz" => &["r0", "amplitude", "a", "alpha", "beta", "terms", "area"],
        "ellipsoid" => &["areas"],
        _ => &[],
    };
    // report stray keys before missing ones: a misspelt key is the likelier mistake
    for (key, entry) in &r.section.entries {
        let known = params.contains(&key.as_str())
            || key == "type"
            || (matches!(key.as_str(), "N" | "interpolation") && kind != "ellipsoid");
        if !known && !params.is_empty() {
            return Err(r.err(
                entry.line,
                format!("unknown key '{key}' for factor type {kind}"),
            ));
        }
    }
    let grid = r.opt_usize("N")?;
    let interp_line = r.line_of("interpolation");
    let interpolation = match r.opt_string("interpolation") {
        Some(s) => Some(
            s.parse::<Interpolation>()
                .map_err(|e| r.err(interp_line, e.to_string()))?,
        ),
        None => None,
    };
    let build = |r: &Reader<'_>, source: ProfileSource, n: usize, interp: Interpolation| {
        RadialProfile::new(source, n, interp).map_err(|e| r.err(line, e.to_string()))
    };
    let fractal =
        |r: &mut Reader<'_>, function: FractalFunction| -> Result<ProfileSource, SpecError> {
            Ok(ProfileSource::Fractal {
                r0: r.f64("r0")?,
                amplitude: r.f64("amplitude")?,
                function,
            })
        };
    let wrap = |r: &Reader<'_>, f: crate::Result<FractalFunction>| {
        f.map_err(|e| r.err(line, e.to_string()))
    };

    let n = grid.unwrap_or(DEFAULT_GRID);
    let interp = interpolation.unwrap_or(Interpolation::CubicPeriodic);
    let profile = match kind.as_str() {
        "ellipsoid" => {
            let areas = r.list("areas")?;
            let spec = EllipsoidSpec::new(areas).map_err(|e| r.err(line, e.to_string()))?;
            return Ok(FactorSpec {
                line,
                factor: Factor::Ellipsoid(spec),
            });
        }
        "disk" => {
            let area = r.f64("area")?;
            build(r, ProfileSource::Disk { area }, n, interp)?
        }
        "cosine" => {
            let area = r.f64("area")?;
            let amplitude = r.f64("amplitude")?;
            build(r, ProfileSource::Cosine { area, amplitude }, n, interp)?
        }
        "polygon" => {
            let vertices = r.points("vertices")?;
            build(r, ProfileSource::Polygon { vertices }, n, interp)?
        }
        "samples" => {
            let radii = r.list("radii")?;
            let count = radii.len();
            if let Some(g) = grid {
                if g != count {
                    return Err(r.err(
                        r.line_of("N"),
                        format!("N = {g} but {count} radii were given"),
                    ));
                }
            }
            build(r, ProfileSource::Samples(radii), count, interp)?
        }
        "weierstrass" => {
            let f = FractalFunction::weierstrass(r.f64("a")?, r.f64("b")?, r.usize("terms")?);
            let f = wrap(r, f)?;
            let source = fractal(r, f)?;
            build(r, source, n, Interpolation::Linear)?
        }
        "hunt" => {
            let f = FractalFunction::weierstrass_phase_seeded(
                r.f64("a")?,
                r.f64("b")?,
                r.usize("terms")?,
                r.u64("seed")?,
            );
            let f = wrap(r, f)?;
            let source = fractal(r, f)?;
            build(r, source, n, Interpolation::Linear)?
        }
        "xz" => {
            let f = FractalFunction::xiao_zhou(
                r.f64("a")?,
                r.f64("alpha")?,
                r.f64("beta")?,
                r.usize("terms")?,
            );
            let f = wrap(r, f)?;
            let source = fractal(r, f)?;
            build(r, source, n, Interpolation::Linear)?
        }
        other => {
            return Err(r.err(
                kind_line,
                format!(
                    "unknown factor type '{other}' (expected disk, cosine, polygon, samples, \
                     weierstrass, hunt, xz or ellipsoid)"
                ),
            ))
        }
    };
    let profile = match r.opt_f64("area")? {
        // the disk and cosine presets read `area` as their own parameter
        Some(area) if !matches!(kind.as_str(), "disk" | "cosine") => profile
            .rescaled_to_area(area)
            .map_err(|e| r.err(r.line_of("area"), e.to_string()))?,
        _ => profile,
    };
    Ok(FactorSpec {
        line,
        factor: Factor::Planar(Arc::new(profile)),
    })
}

/// Typed access to one section; tracks which keys were consumed.
struct Reader<'a> {
    section: Section,
    file: &'a str,
    used: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(section: Section, file: &'a str) -> Self {
        Self {
            section,
            file,
            used: Vec::new(),
        }
    }

    fn err(&self, line: usize, message: String) -> SpecError {
        SpecError {
            file: self.file.to_string(),
            line,
            message,
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.section
            .entries
            .get(key)
            .map_or(self.section.line, |e| e.line)
    }

    fn where_(&self) -> String {
        if self.section.name.is_empty() {
            "at top level".into()
        } else {
            format!("in [{}]", self.section.name)
        }
    }

    fn opt_string(&mut self, key: &str) -> Option<String> {
        self.used.push(key.to_string());
        self.section.entries.get(key).map(|e| e.value.clone())
    }

    fn string(&mut self, key: &str) -> Result<String, SpecError> {
        self.opt_string(key).ok_or_else(|| {
            self.err(
                self.section.line,
                format!("missing key '{key}' {}", self.where_()),
            )
        })
    }

    fn opt_parsed<T: std::str::FromStr>(
        &mut self,
        key: &str,
        what: &str,
    ) -> Result<Option<T>, SpecError> {
        match self.opt_string(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                self.err(
                    self.line_of(key),
                    format!("'{key}' must be {what}, got '{v}'"),
                )
            }),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<T, SpecError> {
        self.opt_parsed(key, what)?.ok_or_else(|| {
            self.err(
                self.section.line,
                format!("missing key '{key}' {}", self.where_()),
            )
        })
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, SpecError> {
        self.opt_parsed(key, "a number")
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>, SpecError> {
        self.opt_parsed(key, "a non-negative integer")
    }

    fn f64(&mut self, key: &str) -> Result<f64, SpecError> {
        self.required(key, "a number")
    }

    fn usize(&mut self, key: &str) -> Result<usize, SpecError> {
        self.required(key, "a non-negative integer")
    }

    fn u64(&mut self, key: &str) -> Result<u64, SpecError> {
        self.required(key, "a non-negative integer")
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>, SpecError> {
        let v = self.string(key)?;
        let line = self.line_of(key);
        parse_list(&v).map_err(|m| self.err(line, format!("'{key}': {m}")))
    }

    fn points(&mut self, key: &str) -> Result<Vec<[f64; 2]>, SpecError> {
        let v = self.string(key)?;
        let line = self.line_of(key);
        v.split(';')
            .map(|pair| match parse_list(pair)?.as_slice() {
                &[x, y] => Ok([x, y]),
                other => Err(format!(
                    "expected 'x,y', got {} numbers in '{}'",
                    other.len(),
                    pair.trim()
                )),
            })
            .collect::<Result<Vec<_>, String>>()
            .map_err(|m| self.err(line, format!("'{key}': {m}")))
    }

    /// Rejects keys that no accessor asked for.
    fn finish(self) -> Result<(), SpecError> {
        for (key, entry) in &self.section.entries {
            if !self.used.iter().any(|u| u == key) {
                return Err(self.err(entry.line, format!("unknown key '{key}' {}", self.where_())));
            }
        }
        Ok(())
    }
}

/// Comma-separated numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| format!("'{t}' is not a number"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_DISKS: &str =
        "p = 2\n[factor]\ntype = disk\narea = 1\n\n[factor]\ntype = disk\narea = 1\n";

    #[test]
    fn parses_two_disks() {
        let spec = parse(TWO_DISKS, "t.spec").unwrap();
        assert_eq!(spec.p, 2.0);
        assert_eq!(spec.factors.len(), 2);
        assert_eq!(spec.factors[1].line, 6);
        let domain = spec.domain().unwrap();
        assert_eq!(domain.dim(), 4);
        assert_eq!(domain.ellipsoid_model_areas(), Some(vec![1.0, 1.0]));
    }

    #[test]
    fn unknown_key_points_at_its_line() {
        let text = "[factor]\ntype = disk\narea = 1\nradius = 3\n";
        let e = parse(text, "bad.spec").unwrap_err();
        assert_eq!(e.line, 4);
        assert_eq!(
            e.to_string(),
            "bad.spec:4: unknown key 'radius' for factor type disk"
        );
        let e = parse("[factor]\ntype = disk\nradius = 1\n", "bad.spec").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse(
            "[factor]\ntype = ellipsoid\nareas = 1\nN = 64\n",
            "bad.spec",
        )
        .unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        for (text, line) in [
            ("[factor\ntype = disk\n", 1),
            ("[factor]\ntype disk\n", 2),
            ("[factor]\ntype = blob\n", 2),
            ("[factor]\ntype = disk\narea = one\n", 3),
            ("[factor]\ntype = disk\narea = 1\narea = 2\n", 4),
            ("[widget]\n", 1),
            ("[factor]\ntype = polygon\nvertices = 1,0; 0\n", 3),
        ] {
            let e = parse(text, "x").unwrap_err();
            assert_eq!(e.line, line, "{text:?} -> {e}");
        }
    }

    #[test]
    fn missing_key_points_at_section() {
        let e = parse("p = 2\n[factor]\ntype = cosine\narea = 1\n", "x").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("amplitude"));
    }

    #[test]
    fn no_factors_is_an_error() {
        assert!(parse("p = 2\n", "x").is_err());
    }

    #[test]
    fn polygon_area_rescales() {
        let text = "[factor]\ntype = polygon\nvertices = 1,1; -1,1; -1,-1; 1,-1\narea = 1\n";
        let spec = parse(text, "x").unwrap();
        let w = spec.planar_profiles().unwrap();
        assert!((w[0].area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_and_boundary_minimal_sections() {
        let text = "[factor]\ntype = ellipsoid\nareas = 1, 2\n[boundary_minimal]\npoint = 0.1, 0.2, 0.3, 0.4\nhalf_width = 0.5\ntarget_area = 0.9\n";
        let spec = parse(text, "x").unwrap();
        assert!(spec.planar_profiles().is_none());
        let bm = spec.boundary_minimal.unwrap();
        assert_eq!(bm.point, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(bm.eta, None);
    }

    #[test]
    fn samples_count_must_match_n() {
        let text = "[factor]\ntype = samples\nN = 20\nradii = 1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1\n";
        assert_eq!(parse(text, "x").unwrap_err().line, 3);
    }
}
