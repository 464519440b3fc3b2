//! The six aggregation operators an engine can run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Min,
    Max,
    Sum,
    Sub,
    Avg,
    Mul,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::Min,
        OpKind::Max,
        OpKind::Sum,
        OpKind::Sub,
        OpKind::Avg,
        OpKind::Mul,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Min => "min",
            OpKind::Max => "max",
            OpKind::Sum => "sum",
            OpKind::Sub => "sub",
            OpKind::Avg => "avg",
            OpKind::Mul => "mul",
        }
    }

    /// Sub and Mul fold their operands strictly left to right in the
    /// configured source order and so cannot run on a partial operand set.
    pub fn needs_all_operands(self) -> bool {
        matches!(self, OpKind::Sub | OpKind::Mul)
    }

    /// Folds `values` left to right. `None` for an empty slice.
    pub fn apply<T: Scalar>(self, values: &[T]) -> Option<T> {
        let (first, rest) = values.split_first()?;
        let folded = rest.iter().fold(first.clone(), |acc, v| match self {
            OpKind::Min => {
                if *v < acc {
                    v.clone()
                } else {
                    acc
                }
            }
            OpKind::Max => {
                if *v > acc {
                    v.clone()
                } else {
                    acc
                }
            }
            OpKind::Sum | OpKind::Avg => acc + v.clone(),
            OpKind::Sub => acc - v.clone(),
            OpKind::Mul => acc * v.clone(),
        });
        Some(match self {
            OpKind::Avg => folded / T::from_usize(values.len())?,
            _ => folded,
        })
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownOp(pub String);

impl FromStr for OpKind {
    type Err = UnknownOp;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownOp(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::FromPrimitive;

    #[test]
    fn folds() {
        let v = [3.0, 4.0, 1.0];
        assert_eq!(OpKind::Min.apply(&v), Some(1.0));
        assert_eq!(OpKind::Max.apply(&v), Some(4.0));
        assert_eq!(OpKind::Sum.apply(&v), Some(8.0));
        assert_eq!(OpKind::Sub.apply(&v), Some(-2.0));
        assert_eq!(OpKind::Mul.apply(&v), Some(12.0));
        assert_eq!(OpKind::Avg.apply(&[1.0, 2.0]), Some(1.5));
        assert_eq!(OpKind::Sum.apply::<f64>(&[]), None);
    }

    #[test]
    fn exact_average() {
        let r = |n| BigRational::from_i64(n).unwrap();
        let avg = OpKind::Avg.apply(&[r(1), r(1), r(2)]).unwrap();
        assert_eq!(avg, BigRational::new(4.into(), 3.into()));
    }

    #[test]
    fn parse_names() {
        for k in OpKind::ALL {
            assert_eq!(k.name().parse::<OpKind>().unwrap(), k);
        }
        assert!("foo".parse::<OpKind>().is_err());
    }
}
