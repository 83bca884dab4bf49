use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AxisType, NeuralType, Tag, TagHierarchy, TypeSysError};

/// Outcome of comparing a producer type against a consumer type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Comparison {
    Same,
    Less,
    Greater,
    DimIncompatible,
    TransposeSame,
    Incompatible,
}

impl Comparison {
    /// Only `SAME` and `LESS` allow a connection.
    pub fn is_accepted(self) -> bool {
        matches!(self, Comparison::Same | Comparison::Less)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparison::Same => "SAME",
            Comparison::Less => "LESS",
            Comparison::Greater => "GREATER",
            Comparison::DimIncompatible => "DIM_INCOMPATIBLE",
            Comparison::TransposeSame => "TRANSPOSE_SAME",
            Comparison::Incompatible => "INCOMPATIBLE",
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TagRelation {
    Equal,
    /// producer tag is a strict subtag of the consumer tag
    Narrower,
    /// consumer tag is a strict subtag of the producer tag
    Wider,
    Unrelated,
}

fn relate(h: &TagHierarchy, producer: &Tag, consumer: &Tag) -> Result<TagRelation, TypeSysError> {
    if producer == consumer {
        // still reject tags the hierarchy has never seen
        h.is_subtag(producer, consumer)?;
        return Ok(TagRelation::Equal);
    }
    if h.is_subtag(producer, consumer)? {
        Ok(TagRelation::Narrower)
    } else if h.is_subtag(consumer, producer)? {
        Ok(TagRelation::Wider)
    } else {
        Ok(TagRelation::Unrelated)
    }
}

/// Compare what a producer emits with what a consumer accepts.
///
/// Mismatches are results, not errors; the only error is a tag the
/// hierarchy does not know.
pub fn compare_types(
    h: &TagHierarchy,
    producer: &NeuralType,
    consumer: &NeuralType,
) -> Result<Comparison, TypeSysError> {
    for t in producer.tags().into_iter().chain(consumer.tags()) {
        if !h.contains(t) {
            return Err(TypeSysError::UnknownTag(t.name().to_string()));
        }
    }
    let (p_axes, c_axes) = match (producer, consumer) {
        (_, NeuralType::Root) => return Ok(Comparison::Same),
        (NeuralType::Root, _) => return Ok(Comparison::Greater),
        (NeuralType::NonTensor(p), NeuralType::NonTensor(c)) => {
            return Ok(match relate(h, p, c)? {
                TagRelation::Equal => Comparison::Same,
                TagRelation::Narrower => Comparison::Less,
                TagRelation::Wider => Comparison::Greater,
                TagRelation::Unrelated => Comparison::Incompatible,
            })
        }
        (NeuralType::NonTensor(_), _) | (_, NeuralType::NonTensor(_)) => {
            return Ok(Comparison::Incompatible)
        }
        (NeuralType::Tensor(p), NeuralType::Tensor(c)) => (p, c),
    };
    if p_axes.len() != c_axes.len() {
        return Ok(Comparison::Incompatible);
    }

    let relations = p_axes
        .iter()
        .zip(c_axes)
        .map(|(p, c)| relate(h, &p.tag, &c.tag))
        .collect::<Result<Vec<_>, _>>()?;

    if relations.contains(&TagRelation::Unrelated) {
        return Ok(if transpose_permutation(p_axes, c_axes).is_some() {
            Comparison::TransposeSame
        } else {
            Comparison::Incompatible
        });
    }
    if p_axes
        .iter()
        .zip(c_axes)
        .any(|(p, c)| !p.dims_compatible(c))
    {
        return Ok(Comparison::DimIncompatible);
    }
    if relations.contains(&TagRelation::Wider) {
        Ok(Comparison::Greater)
    } else if relations.contains(&TagRelation::Narrower) {
        Ok(Comparison::Less)
    } else {
        Ok(Comparison::Same)
    }
}

/// Find `perm` with `consumer[j]` matched by `producer[perm[j]]`: equal tags
/// and compatible dims on every axis. Exact tag equality only, no subtyping.
pub fn transpose_permutation(producer: &[AxisType], consumer: &[AxisType]) -> Option<Vec<usize>> {
    if producer.len() != consumer.len() {
        return None;
    }
    fn search(
        j: usize,
        producer: &[AxisType],
        consumer: &[AxisType],
        used: &mut [bool],
        perm: &mut Vec<usize>,
    ) -> bool {
        if j == consumer.len() {
            return true;
        }
        for i in 0..producer.len() {
            if used[i]
                || producer[i].tag != consumer[j].tag
                || !producer[i].dims_compatible(&consumer[j])
            {
                continue;
            }
            used[i] = true;
            perm.push(i);
            if search(j + 1, producer, consumer, used, perm) {
                return true;
            }
            perm.pop();
            used[i] = false;
        }
        false
    }
    let mut used = vec![false; producer.len()];
    let mut perm = Vec::with_capacity(producer.len());
    search(0, producer, consumer, &mut used, &mut perm).then_some(perm)
}
