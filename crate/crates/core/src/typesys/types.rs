use std::fmt;

use super::{Tag, TypeSysError};

/// One tensor axis: a semantic tag and an optional fixed size.
/// `dim == None` means the size is only known at run time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AxisType {
    pub tag: Tag,
    pub dim: Option<usize>,
}

impl AxisType {
    pub fn new(tag: Tag, dim: Option<usize>) -> Result<Self, TypeSysError> {
        if dim == Some(0) {
            return Err(TypeSysError::InvalidDim(0));
        }
        Ok(AxisType { tag, dim })
    }

    pub fn dynamic(tag: Tag) -> Self {
        AxisType { tag, dim: None }
    }

    /// Two axis sizes agree unless both are fixed and different.
    pub fn dims_compatible(&self, other: &AxisType) -> bool {
        match (self.dim, other.dim) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
    }
}

impl fmt::Display for AxisType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            Some(d) => write!(f, "{}:{}", self.tag, d),
            None => write!(f, "{}", self.tag),
        }
    }
}

/// The type of a port.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NeuralType {
    /// Ordered axes, index 0 first. Never empty.
    Tensor(Vec<AxisType>),
    /// Accepts anything when used as a consumer type.
    Root,
    /// A non-tensor value such as a scalar loss, tagged with what it holds.
    NonTensor(Tag),
}

impl NeuralType {
    pub fn tensor(axes: Vec<AxisType>) -> Result<Self, TypeSysError> {
        if axes.is_empty() {
            return Err(TypeSysError::EmptyTensor);
        }
        Ok(NeuralType::Tensor(axes))
    }

    pub fn axes(&self) -> &[AxisType] {
        match self {
            NeuralType::Tensor(axes) => axes,
            _ => &[],
        }
    }

    pub fn rank(&self) -> usize {
        self.axes().len()
    }

    /// Every tag mentioned by the type.
    pub fn tags(&self) -> Vec<&Tag> {
        match self {
            NeuralType::Tensor(axes) => axes.iter().map(|a| &a.tag).collect(),
            NeuralType::Root => Vec::new(),
            NeuralType::NonTensor(t) => vec![t],
        }
    }

    /// Whether a concrete shape instantiates this type. Non-tensor values
    /// are rank-0 tensors at run time.
    pub fn accepts_shape(&self, shape: &[usize]) -> bool {
        match self {
            NeuralType::Root => true,
            NeuralType::NonTensor(_) => shape.is_empty(),
            NeuralType::Tensor(axes) => {
                axes.len() == shape.len()
                    && axes
                        .iter()
                        .zip(shape)
                        .all(|(a, &s)| a.dim.is_none_or(|d| d == s))
            }
        }
    }
}

/// Renders with the same grammar [`super::parse_type_expr`] reads.
impl fmt::Display for NeuralType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeuralType::Root => f.write_str("root"),
            NeuralType::NonTensor(t) => write!(f, "scalar({t})"),
            NeuralType::Tensor(axes) => {
                f.write_str("[")?;
                for (i, a) in axes.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("]")
            }
        }
    }
}
