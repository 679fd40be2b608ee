//! Scalar cell values, column dtypes and comparison operators shared by the
//! cell grammar, the kernel and the artifact editors.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A single table value. Numbers are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn dtype(&self) -> DType {
        match self {
            Scalar::Number(_) => DType::Number,
            Scalar::Text(_) => DType::Text,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Scalar::Number(v) => Some(*v),
            Scalar::Text(_) => None,
        }
    }

    /// Bitwise equality for numbers, byte equality for text.
    pub fn identical(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Number(a), Scalar::Number(b)) => a.to_bits() == b.to_bits(),
            (Scalar::Text(a), Scalar::Text(b)) => a == b,
            _ => false,
        }
    }

    /// Total order used by table sorting: numbers by `total_cmp`, text
    /// lexicographically, numbers before text.
    pub fn sort_cmp(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Number(a), Scalar::Number(b)) => a.total_cmp(b),
            (Scalar::Text(a), Scalar::Text(b)) => a.cmp(b),
            (Scalar::Number(_), Scalar::Text(_)) => Ordering::Less,
            (Scalar::Text(_), Scalar::Number(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Number(v) => write!(f, "{v:?}"),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Number,
    Text,
}

impl DType {
    /// The dtype string used in generated `astype` calls.
    pub fn pandas_name(self) -> &'static str {
        match self {
            DType::Number => "float64",
            DType::Text => "object",
        }
    }

    pub fn from_pandas_name(name: &str) -> Option<DType> {
        match name {
            "float64" => Some(DType::Number),
            "object" => Some(DType::Text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
        Comparator::Eq,
        Comparator::Ne,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Comparator> {
        Comparator::ALL.into_iter().find(|c| c.symbol() == s)
    }

    /// Only `==` and `!=` are defined on text.
    pub fn is_ordered(self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::Ne)
    }

    /// Evaluates `value <op> threshold`. Returns `None` when the operand
    /// types do not support the comparison.
    pub fn eval(self, value: &Scalar, threshold: &Scalar) -> Option<bool> {
        match (value, threshold) {
            (Scalar::Number(a), Scalar::Number(b)) => Some(match self {
                Comparator::Lt => a < b,
                Comparator::Le => a <= b,
                Comparator::Gt => a > b,
                Comparator::Ge => a >= b,
                Comparator::Eq => a == b,
                Comparator::Ne => a != b,
            }),
            (Scalar::Text(a), Scalar::Text(b)) => match self {
                Comparator::Eq => Some(a == b),
                Comparator::Ne => Some(a != b),
                _ => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
