//! Line-oriented `.kc` model files.
//!
//! A model file declares a chart, a Lagrangian, and optional named objects
//! in a keyword-per-line format:
//!
//! ```text
//! model damped_string
//! base_dim 1
//! field_dim 2
//! coords q
//! param rho 1.0
//! lagrangian (rho/2)*v[q,1]^2 - ...
//! preset damped-string
//! vectorfield dq | 1
//! law momentum | rho*v[q,1] | -tau*v[q,2]
//! sopde paper | <n·k·k Γⁱ_{αβ} entries> | <k·k Γ^β_α entries>
//! ```
//!
//! Header stanzas (`model`, `base_dim`, `field_dim`, `coords`, `param`,
//! `kernel`) must precede `lagrangian`; everything after it is expressed
//! in the chart the header defines.  `#` starts a comment.  Kernels are
//! drawn from a small built-in catalog (`zero`, `harmonic`, `quartic`)
//! because closed-form coupling functions cannot be serialised.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use crate::bundle::{BaseVectorField, BundleVectorField, Sopde};
use crate::chart::{BundleChart, KernelImpl, ParamDecl};
use crate::expr::{parse, Expr};
use crate::lagrangian::Lagrangian;
use crate::symmetry::DissipationLaw;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing required stanza `{0}`")]
    Missing(&'static str),
    #[error("parameter override `{0}` does not match any declared parameter")]
    UnknownOverride(String),
}

fn at(line: usize, msg: impl std::fmt::Display) -> ModelError {
    ModelError::Line {
        line,
        msg: msg.to_string(),
    }
}

/// The numeric preset a model is wired to; selects solver and oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    DampedString,
    Telegrapher,
    CoupledStrings,
    DampedLaplace,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "damped-string" => Ok(Preset::DampedString),
            "telegrapher" => Ok(Preset::Telegrapher),
            "coupled-strings" => Ok(Preset::CoupledStrings),
            "damped-laplace" => Ok(Preset::DampedLaplace),
            other => Err(format!(
                "unknown preset `{other}` (expected damped-string, telegrapher, \
                 coupled-strings or damped-laplace)"
            )),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::DampedString => "damped-string",
            Preset::Telegrapher => "telegrapher",
            Preset::CoupledStrings => "coupled-strings",
            Preset::DampedLaplace => "damped-laplace",
        })
    }
}

/// A named vector field: `n` components declare a field on the base Q,
/// `n + nk + k` components a full field on the bundle (coordinate order
/// qⁱ, vⁱ_α, s^α).
#[derive(Debug, Clone)]
pub enum VectorFieldDef {
    Base(BaseVectorField),
    Bundle(BundleVectorField),
}

impl VectorFieldDef {
    /// The bundle representative: base fields are taken along their
    /// complete lift, which is the canonical inclusion used by every
    /// symmetry notion.
    pub fn as_bundle(&self) -> BundleVectorField {
        match self {
            VectorFieldDef::Base(z) => z.complete_lift(),
            VectorFieldDef::Bundle(x) => x.clone(),
        }
    }
}

/// A parsed model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub name: String,
    pub chart: Arc<BundleChart>,
    pub lagrangian: Lagrangian,
    pub preset: Option<Preset>,
    pub vector_fields: BTreeMap<String, VectorFieldDef>,
    pub laws: BTreeMap<String, DissipationLaw>,
    pub sopdes: BTreeMap<String, Sopde>,
}

/// Builds one of the catalogued kernels under the declared name.
fn builtin_kernel(name: &str, which: &str) -> Option<KernelImpl> {
    type F = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
    let (fns, ratio): (Vec<F>, f64) = match which {
        "zero" => (vec![Arc::new(|_| 0.0), Arc::new(|_| 0.0)], 0.0),
        "harmonic" => (
            vec![
                Arc::new(|z: f64| 0.5 * z * z),
                Arc::new(|z: f64| z),
                Arc::new(|_| 1.0),
            ],
            1.0,
        ),
        "quartic" => (
            vec![
                Arc::new(|z: f64| z * z + 0.3 * z.powi(4)),
                Arc::new(|z: f64| 2.0 * z + 1.2 * z.powi(3)),
                Arc::new(|z: f64| 2.0 + 3.6 * z * z),
            ],
            2.0,
        ),
        _ => return None,
    };
    Some(KernelImpl {
        name: name.to_string(),
        fns,
        ratio_limit_at_zero: Some(ratio),
    })
}

/// Accumulates header stanzas until the chart can be built.
#[derive(Default)]
struct Header {
    name: Option<String>,
    n: Option<usize>,
    k: Option<usize>,
    coords: Option<Vec<String>>,
    params: Vec<ParamDecl>,
    kernels: Vec<KernelImpl>,
}

impl Header {
    fn build(self) -> Result<(String, Arc<BundleChart>), ModelError> {
        let name = self.name.ok_or(ModelError::Missing("model"))?;
        let n = self.n.ok_or(ModelError::Missing("base_dim"))?;
        let k = self.k.ok_or(ModelError::Missing("field_dim"))?;
        let coords = self.coords.ok_or(ModelError::Missing("coords"))?;
        let mut chart = BundleChart::new(n, k, coords, self.params)
            .map_err(|e| at(0, e))?;
        for kernel in self.kernels {
            chart.declare_kernel(kernel);
        }
        Ok((name, Arc::new(chart)))
    }
}

impl ModelFile {
    pub fn load(path: &std::path::Path) -> Result<ModelFile, ModelError> {
        ModelFile::parse_str(&std::fs::read_to_string(path)?)
    }

    /// As [`ModelFile::load`], replacing the default of every parameter
    /// named in `overrides`.
    pub fn load_with_overrides(
        path: &std::path::Path,
        overrides: &BTreeMap<String, f64>,
    ) -> Result<ModelFile, ModelError> {
        ModelFile::parse_str_with(&std::fs::read_to_string(path)?, overrides)
    }

    pub fn parse_str(text: &str) -> Result<ModelFile, ModelError> {
        ModelFile::parse_str_with(text, &BTreeMap::new())
    }

    pub fn parse_str_with(
        text: &str,
        overrides: &BTreeMap<String, f64>,
    ) -> Result<ModelFile, ModelError> {
        let mut header = Some(Header::default());
        let mut built: Option<(String, Arc<BundleChart>)> = None;
        let mut lagrangian = None;
        let mut preset = None;
        let mut vector_fields = BTreeMap::new();
        let mut laws = BTreeMap::new();
        let mut sopdes = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (keyword, rest) = match content.split_once(char::is_whitespace) {
                Some((kw, rest)) => (kw, rest.trim()),
                None => (content, ""),
            };
            let header_stanza = matches!(
                keyword,
                "model" | "base_dim" | "field_dim" | "coords" | "param" | "kernel"
            );
            if header_stanza {
                let h = header.as_mut().ok_or_else(|| {
                    at(line, format!("`{keyword}` must appear before `lagrangian`"))
                })?;
                match keyword {
                    "model" => h.name = Some(rest.to_string()),
                    "base_dim" => {
                        h.n = Some(rest.parse().map_err(|e| at(line, e))?);
                    }
                    "field_dim" => {
                        h.k = Some(rest.parse().map_err(|e| at(line, e))?);
                    }
                    "coords" => {
                        h.coords =
                            Some(rest.split_whitespace().map(str::to_string).collect());
                    }
                    "param" => {
                        let (name, value) = rest
                            .split_once(char::is_whitespace)
                            .ok_or_else(|| at(line, "expected `param NAME VALUE`"))?;
                        let declared: f64 = value.trim().parse().map_err(|e| at(line, e))?;
                        h.params.push(ParamDecl {
                            name: name.to_string(),
                            default: Some(*overrides.get(name).unwrap_or(&declared)),
                        });
                    }
                    "kernel" => {
                        let (name, which) = rest
                            .split_once(char::is_whitespace)
                            .ok_or_else(|| at(line, "expected `kernel NAME BUILTIN`"))?;
                        let kernel = builtin_kernel(name, which.trim()).ok_or_else(|| {
                            at(
                                line,
                                format!(
                                    "unknown kernel builtin `{}` (expected zero, harmonic \
                                     or quartic)",
                                    which.trim()
                                ),
                            )
                        })?;
                        h.kernels.push(kernel);
                    }
                    _ => unreachable!(),
                }
                continue;
            }
            // every other stanza needs the chart
            if built.is_none() {
                if keyword != "lagrangian" {
                    return Err(at(
                        line,
                        format!("`{keyword}` must appear after `lagrangian`"),
                    ));
                }
                built = Some(header.take().unwrap().build().map_err(|e| match e {
                    ModelError::Line { msg, .. } => at(line, msg),
                    other => other,
                })?);
            }
            let chart = &built.as_ref().unwrap().1;
            let p = |text: &str| parse(text, chart).map_err(|e| at(line, e));
            match keyword {
                "lagrangian" => {
                    if lagrangian.is_some() {
                        return Err(at(line, "duplicate `lagrangian`"));
                    }
                    lagrangian =
                        Some(Lagrangian::new(chart.clone(), p(rest)?).map_err(|e| at(line, e))?);
                }
                "preset" => {
                    preset = Some(rest.parse::<Preset>().map_err(|e| at(line, e))?);
                }
                "vectorfield" => {
                    let (name, comps) = named_components(rest, line)?;
                    let exprs: Vec<Expr> =
                        comps.iter().map(|c| p(c)).collect::<Result<_, _>>()?;
                    let def = if exprs.len() == chart.n() {
                        VectorFieldDef::Base(
                            BaseVectorField::new(chart.clone(), exprs).map_err(|e| at(line, e))?,
                        )
                    } else if exprs.len() == chart.dim() {
                        let mut x = BundleVectorField::zero(chart.clone());
                        for (coord, e) in chart.coords().into_iter().zip(exprs) {
                            x.set(coord, e);
                        }
                        VectorFieldDef::Bundle(x)
                    } else {
                        return Err(at(
                            line,
                            format!(
                                "vector field needs {} (base) or {} (bundle) components, got {}",
                                chart.n(),
                                chart.dim(),
                                exprs.len()
                            ),
                        ));
                    };
                    if vector_fields.insert(name.clone(), def).is_some() {
                        return Err(at(line, format!("duplicate vector field `{name}`")));
                    }
                }
                "law" => {
                    let (name, comps) = named_components(rest, line)?;
                    let exprs: Vec<Expr> =
                        comps.iter().map(|c| p(c)).collect::<Result<_, _>>()?;
                    let law = DissipationLaw::new(chart.clone(), exprs)
                        .map_err(|e| at(line, e))?;
                    if laws.insert(name.clone(), law).is_some() {
                        return Err(at(line, format!("duplicate law `{name}`")));
                    }
                }
                "sopde" => {
                    let (name, comps) = named_components(rest, line)?;
                    let (n, k) = (chart.n(), chart.k());
                    let want = n * k * k + k * k;
                    if comps.len() != want {
                        return Err(at(
                            line,
                            format!(
                                "SOPDE needs {want} components (n·k² Γⁱ_αβ then k² Γ^β_α), \
                                 got {}",
                                comps.len()
                            ),
                        ));
                    }
                    let exprs: Vec<Expr> =
                        comps.iter().map(|c| p(c)).collect::<Result<_, _>>()?;
                    let mut it = exprs.into_iter();
                    let gv: Vec<Vec<Vec<Expr>>> = (0..k)
                        .map(|_| {
                            (0..n)
                                .map(|_| (0..k).map(|_| it.next().unwrap()).collect())
                                .collect()
                        })
                        .collect();
                    let gs: Vec<Vec<Expr>> = (0..k)
                        .map(|_| (0..k).map(|_| it.next().unwrap()).collect())
                        .collect();
                    let sopde =
                        Sopde::new(chart.clone(), gv, gs).map_err(|e| at(line, e))?;
                    if sopdes.insert(name.clone(), sopde).is_some() {
                        return Err(at(line, format!("duplicate SOPDE `{name}`")));
                    }
                }
                other => {
                    return Err(at(line, format!("unknown stanza `{other}`")));
                }
            }
        }
        let (name, chart) = built.ok_or(ModelError::Missing("lagrangian"))?;
        let lagrangian = lagrangian.ok_or(ModelError::Missing("lagrangian"))?;
        for key in overrides.keys() {
            if chart.param(key).is_none() {
                return Err(ModelError::UnknownOverride(key.clone()));
            }
        }
        Ok(ModelFile {
            name,
            chart,
            lagrangian,
            preset,
            vector_fields,
            laws,
            sopdes,
        })
    }
}

/// Splits `NAME | comp | comp ...` into the name and component texts.
fn named_components(rest: &str, line: usize) -> Result<(String, Vec<String>), ModelError> {
    let mut parts = rest.split('|').map(str::trim);
    let name = parts
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| at(line, "expected `NAME | component | ...`"))?
        .to_string();
    let comps: Vec<String> = parts.map(str::to_string).collect();
    if comps.is_empty() {
        return Err(at(line, "expected at least one `|`-separated component"));
    }
    Ok((name, comps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ZeroVerdict;

    fn fixture_dir() -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../..")
            .join("models")
    }

    #[test]
    fn all_shipped_models_load() {
        for name in [
            "damped_string.kc",
            "telegrapher.kc",
            "coupled_strings.kc",
            "damped_laplace.kc",
        ] {
            let model = ModelFile::load(&fixture_dir().join(name))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(model.preset.is_some(), "{name} has no preset");
        }
    }

    #[test]
    fn damped_string_fixture_contents() {
        let model = ModelFile::load(&fixture_dir().join("damped_string.kc")).unwrap();
        assert_eq!(model.name, "damped_string");
        assert_eq!(model.chart.n(), 1);
        assert_eq!(model.chart.k(), 2);
        assert!(model.vector_fields.contains_key("dq"));
        assert!(model.laws.contains_key("momentum"));
        assert!(model.laws.contains_key("broken"));
        // the shipped SOPDE really solves the field equations
        let sopde = &model.sopdes["paper"];
        let (family, trace) = model.lagrangian.sopde_field_residuals(sopde).unwrap();
        for r in family.iter().chain(std::iter::once(&trace)) {
            assert_eq!(r.is_zero(&model.chart), ZeroVerdict::ProvenZero, "{r:?}");
        }
    }

    #[test]
    fn base_and_bundle_vector_fields_are_distinguished_by_arity() {
        let text = "\
model m
base_dim 1
field_dim 2
coords q
lagrangian (1/2)*v[q,1]^2 - (1/2)*v[q,2]^2
vectorfield base | q
vectorfield bundle | q | 0 | 0 | 1 | 0
";
        let model = ModelFile::parse_str(text).unwrap();
        assert!(matches!(
            model.vector_fields["base"],
            VectorFieldDef::Base(_)
        ));
        assert!(matches!(
            model.vector_fields["bundle"],
            VectorFieldDef::Bundle(_)
        ));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "model m\nbase_dim 1\nfield_dim 2\ncoords q\nlagrangian v[q,1]^2\nwobble 3\n";
        match ModelFile::parse_str(bad) {
            Err(ModelError::Line { line: 6, msg }) => assert!(msg.contains("wobble")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_after_lagrangian_is_rejected() {
        let bad = "model m\nbase_dim 1\nfield_dim 2\ncoords q\nlagrangian v[q,1]^2\nparam a 1\n";
        match ModelFile::parse_str(bad) {
            Err(ModelError::Line { line: 6, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_lagrangian_is_reported() {
        let bad = "model m\nbase_dim 1\nfield_dim 2\ncoords q\n";
        assert!(matches!(
            ModelFile::parse_str(bad),
            Err(ModelError::Missing("lagrangian"))
        ));
    }

    #[test]
    fn law_arity_errors_point_at_the_line() {
        let bad = "\
model m
base_dim 1
field_dim 2
coords q
lagrangian (1/2)*v[q,1]^2 - (1/2)*v[q,2]^2
law f | v[q,1]
";
        assert!(matches!(
            ModelFile::parse_str(bad),
            Err(ModelError::Line { line: 6, .. })
        ));
    }

    #[test]
    fn unknown_symbol_in_expression_is_a_located_error() {
        let bad = "\
model m
base_dim 1
field_dim 2
coords q
lagrangian (1/2)*v[q,1]^2 - zeta*q^2
";
        assert!(matches!(
            ModelFile::parse_str(bad),
            Err(ModelError::Line { line: 5, .. })
        ));
    }
}
