use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ModuleError, ParamSchema, Params};
use crate::backend::{Kernel, KernelKind};
use crate::typesys::{expand_template, parse_type_expr, AxisType, NeuralType, TagHierarchy};

/// How a port's type follows from the validated parameters.
///
/// Either a port template (`"[...$lead, Channel:$out_features]"`) or one of
/// the derived rules for modules whose axis list is itself a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PortRule {
    Template(String),
    Derived(DerivedRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivedRule {
    /// Axis tags from a string-list parameter, dims from an int-list
    /// parameter of the same length; 0 is a dynamic dim.
    Axes { tags: String, dims: String },
    /// Like `Axes`, reordered so output axis `j` is axis `perm[j]`.
    Permuted {
        tags: String,
        dims: String,
        perm: String,
    },
    /// Output of joining two `Axes` inputs along the axis tagged `axis`.
    Concat {
        tags: String,
        axis: String,
        left: String,
        right: String,
    },
    /// A whole type expression held in a string parameter.
    TypeParam(String),
}

impl From<&str> for PortRule {
    fn from(s: &str) -> Self {
        PortRule::Template(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub rule: PortRule,
}

impl PortDecl {
    pub fn new(name: &str, rule: impl Into<PortRule>) -> Self {
        PortDecl {
            name: name.to_string(),
            rule: rule.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv,
    Sequence,
}

/// A node of a composite's sub-graph. Parameter values may reference the
/// composite's own parameters: `"$name"` copies a value, and a string such
/// as `"$depth-1"` is evaluated as an integer expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateNode {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    /// Chain this many copies (first output into first input); zero copies
    /// pass the chain input straight through.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<String>,
}

/// `in.<port>` and `out.<port>` name the composite's own ports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateWire {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeTemplate {
    pub nodes: Vec<TemplateNode>,
    pub wiring: Vec<TemplateWire>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Implementation {
    Primitive(KernelKind),
    Composite(CompositeTemplate),
    DataLayer(DataSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleDescriptor {
    pub name: String,
    #[serde(default)]
    pub params: ParamSchema,
    #[serde(default)]
    pub inputs: Vec<PortDecl>,
    pub outputs: Vec<PortDecl>,
    #[serde(rename = "impl")]
    pub implementation: Implementation,
    /// Filled in at registration.
    #[serde(default)]
    pub trainable: bool,
}

impl ModuleDescriptor {
    pub fn from_json(text: &str) -> Result<Self, ModuleError> {
        serde_json::from_str(text).map_err(|e| ModuleError::InvalidDescriptor(e.to_string()))
    }

    pub fn input(&self, name: &str) -> Option<&PortDecl> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&PortDecl> {
        self.outputs.iter().find(|p| p.name == name)
    }

    pub fn is_data_layer(&self) -> bool {
        matches!(self.implementation, Implementation::DataLayer(_))
    }
}

fn axes_from(
    h: &TagHierarchy,
    tags: &[String],
    dims: &[i64],
) -> Result<Vec<AxisType>, ModuleError> {
    if tags.len() != dims.len() {
        return Err(ModuleError::InvalidParams(format!(
            "{} axis tags but {} dims",
            tags.len(),
            dims.len()
        )));
    }
    tags.iter()
        .zip(dims)
        .map(|(t, &d)| {
            let tag = h.tag(t).map_err(ModuleError::Type)?;
            Ok(AxisType {
                tag,
                dim: (d > 0).then_some(d as usize),
            })
        })
        .collect()
}

fn tensor(axes: Vec<AxisType>) -> Result<NeuralType, ModuleError> {
    NeuralType::tensor(axes).map_err(ModuleError::Type)
}

/// Index of the concat axis within `tags`.
pub(crate) fn concat_axis(params: &Params, tags: &str, axis: &str) -> Result<usize, ModuleError> {
    let axis_tag = params.str(axis)?;
    params
        .str_list(tags)?
        .iter()
        .position(|t| t == axis_tag)
        .ok_or_else(|| {
            ModuleError::InvalidParams(format!("concat axis `{axis_tag}` is not one of the axes"))
        })
}

pub(crate) fn permutation(
    params: &Params,
    perm: &str,
    rank: usize,
) -> Result<Vec<usize>, ModuleError> {
    let p = params.int_list(perm)?;
    let mut seen = vec![false; rank];
    let mut out = Vec::with_capacity(rank);
    for &i in p {
        let ok = i >= 0 && (i as usize) < rank && !seen[i as usize];
        if !ok || p.len() != rank {
            return Err(ModuleError::InvalidParams(format!(
                "{p:?} is not a permutation of {rank} axes"
            )));
        }
        seen[i as usize] = true;
        out.push(i as usize);
    }
    Ok(out)
}

impl PortRule {
    pub fn resolve(&self, h: &TagHierarchy, params: &Params) -> Result<NeuralType, ModuleError> {
        match self {
            PortRule::Template(t) => expand_template(h, t, params).map_err(ModuleError::Type),
            PortRule::Derived(DerivedRule::TypeParam(p)) => {
                parse_type_expr(h, params.str(p)?).map_err(ModuleError::Type)
            }
            PortRule::Derived(DerivedRule::Axes { tags, dims }) => tensor(axes_from(
                h,
                params.str_list(tags)?,
                params.int_list(dims)?,
            )?),
            PortRule::Derived(DerivedRule::Permuted { tags, dims, perm }) => {
                let axes = axes_from(h, params.str_list(tags)?, params.int_list(dims)?)?;
                let perm = permutation(params, perm, axes.len())?;
                tensor(perm.iter().map(|&i| axes[i].clone()).collect())
            }
            PortRule::Derived(DerivedRule::Concat {
                tags,
                axis,
                left,
                right,
            }) => {
                let at = concat_axis(params, tags, axis)?;
                let l = axes_from(h, params.str_list(tags)?, params.int_list(left)?)?;
                let r = axes_from(h, params.str_list(tags)?, params.int_list(right)?)?;
                let mut out = Vec::with_capacity(l.len());
                for (i, (a, b)) in l.iter().zip(&r).enumerate() {
                    let dim = if i == at {
                        a.dim.zip(b.dim).map(|(x, y)| x + y)
                    } else {
                        if !a.dims_compatible(b) {
                            return Err(ModuleError::InvalidParams(format!(
                                "concat inputs disagree on axis {i}: {a} vs {b}"
                            )));
                        }
                        a.dim.or(b.dim)
                    };
                    out.push(AxisType {
                        tag: a.tag.clone(),
                        dim,
                    });
                }
                tensor(out)
            }
        }
    }
}

/// Configure a primitive kernel from validated parameters.
pub(crate) fn build_kernel(kind: KernelKind, params: &Params) -> Result<Kernel, ModuleError> {
    let ignore = || params.int("ignore_index").or(Ok::<i64, ModuleError>(-1));
    Ok(match kind {
        KernelKind::Linear => Kernel::Linear,
        KernelKind::Relu => Kernel::Relu,
        KernelKind::Tanh => Kernel::Tanh,
        KernelKind::LogSoftmax => Kernel::LogSoftmax,
        KernelKind::NllLoss => Kernel::NllLoss {
            ignore_index: ignore()?,
        },
        KernelKind::Accuracy => Kernel::Accuracy {
            ignore_index: ignore()?,
        },
        KernelKind::MseLoss => Kernel::MseLoss,
        KernelKind::Concat => Kernel::Concat {
            axis: concat_axis(params, "tags", "axis")?,
        },
        KernelKind::Transpose => {
            let rank = params.str_list("tags")?.len();
            Kernel::Transpose {
                perm: permutation(params, "perm", rank)?,
            }
        }
        KernelKind::EmbeddingLookup => Kernel::EmbeddingLookup,
        KernelKind::RnnTanh => Kernel::RnnTanh,
        KernelKind::Add => Kernel::Add,
    })
}

/// Shapes of a primitive's trainable tensors, in kernel order.
pub(crate) fn param_shapes(
    kind: KernelKind,
    params: &Params,
) -> Result<Vec<Vec<usize>>, ModuleError> {
    Ok(match kind {
        KernelKind::Linear => {
            let (i, o) = (params.usize("in_features")?, params.usize("out_features")?);
            vec![vec![o, i], vec![o]]
        }
        KernelKind::EmbeddingLookup => {
            vec![vec![params.usize("vocab_size")?, params.usize("dim")?]]
        }
        KernelKind::RnnTanh => {
            let (i, h) = (params.usize("in_features")?, params.usize("hidden")?);
            vec![vec![h, i], vec![h, h], vec![h]]
        }
        _ => Vec::new(),
    })
}
