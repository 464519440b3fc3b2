use serde::{Deserialize, Serialize};

use super::EpbError;
use crate::dsl::DataType;
use crate::op::OpKind;
use crate::scalar::Scalar;

/// Typed sensor reading carried by a packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload<T> {
    Scalar(T),
    Vector(Vec<T>),
    Matrix(Vec<Vec<T>>),
}

impl<T: Scalar> Payload<T> {
    pub fn data_type(&self) -> DataType {
        match self {
            Payload::Scalar(_) => DataType::Scalar,
            Payload::Vector(_) => DataType::Vector,
            Payload::Matrix(_) => DataType::Matrix,
        }
    }

    /// Vectors must be nonempty and matrices rectangular.
    pub fn validate(&self) -> Result<(), EpbError> {
        match self {
            Payload::Scalar(_) => Ok(()),
            Payload::Vector(v) if v.is_empty() => Err(EpbError::MalformedPayload("empty vector".into())),
            Payload::Vector(_) => Ok(()),
            Payload::Matrix(rows) => {
                let width = rows.first().map(Vec::len).unwrap_or(0);
                if width == 0 {
                    Err(EpbError::MalformedPayload("empty matrix".into()))
                } else if rows.iter().any(|r| r.len() != width) {
                    Err(EpbError::MalformedPayload("ragged matrix".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            Payload::Scalar(_) => (0, 0),
            Payload::Vector(v) => (1, v.len()),
            Payload::Matrix(m) => (m.len(), m.first().map(Vec::len).unwrap_or(0)),
        }
    }

    fn flat(&self) -> Vec<&T> {
        match self {
            Payload::Scalar(x) => vec![x],
            Payload::Vector(v) => v.iter().collect(),
            Payload::Matrix(m) => m.iter().flatten().collect(),
        }
    }

    /// Applies `op` elementwise across same-shaped payloads, folding in
    /// slice order.
    pub fn combine(op: OpKind, inputs: &[&Payload<T>]) -> Result<Payload<T>, EpbError> {
        let first = inputs.first().ok_or(EpbError::NoOperands)?;
        let (ty, shape) = (first.data_type(), first.shape());
        if inputs.iter().any(|p| p.data_type() != ty || p.shape() != shape) {
            return Err(EpbError::ShapeMismatch);
        }
        let flats: Vec<Vec<&T>> = inputs.iter().map(|p| p.flat()).collect();
        let mut out = Vec::with_capacity(flats[0].len());
        for i in 0..flats[0].len() {
            let column: Vec<T> = flats.iter().map(|f| f[i].clone()).collect();
            out.push(op.apply(&column).ok_or(EpbError::NoOperands)?);
        }
        Ok(match first {
            Payload::Scalar(_) => Payload::Scalar(out.pop().expect("one element")),
            Payload::Vector(_) => Payload::Vector(out),
            Payload::Matrix(_) => Payload::Matrix(out.chunks(shape.1).map(<[T]>::to_vec).collect()),
        })
    }

    /// Lossy view for traces and reports.
    pub fn to_f64(&self) -> Payload<f64> {
        let f = |x: &T| x.to_f64().unwrap_or(f64::NAN);
        match self {
            Payload::Scalar(x) => Payload::Scalar(f(x)),
            Payload::Vector(v) => Payload::Vector(v.iter().map(f).collect()),
            Payload::Matrix(m) => Payload::Matrix(m.iter().map(|r| r.iter().map(f).collect()).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_vector() {
        let (a, b) = (Payload::Scalar(3.0), Payload::Scalar(4.0));
        assert_eq!(Payload::combine(OpKind::Sum, &[&a, &b]).unwrap(), Payload::Scalar(7.0));
        let (v, w) = (Payload::Vector(vec![1.0, 3.0]), Payload::Vector(vec![3.0, 5.0]));
        assert_eq!(Payload::combine(OpKind::Avg, &[&v, &w]).unwrap(), Payload::Vector(vec![2.0, 4.0]));
    }

    #[test]
    fn matrix_keeps_shape() {
        let a = Payload::Matrix(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let b = Payload::Matrix(vec![vec![6.0, 5.0, 4.0], vec![3.0, 2.0, 1.0]]);
        assert_eq!(
            Payload::combine(OpKind::Max, &[&a, &b]).unwrap(),
            Payload::Matrix(vec![vec![6.0, 5.0, 4.0], vec![4.0, 5.0, 6.0]])
        );
    }

    #[test]
    fn mismatches() {
        let v = Payload::Vector(vec![1.0, 2.0]);
        let w = Payload::Vector(vec![1.0]);
        assert_eq!(Payload::combine(OpKind::Sum, &[&v, &w]), Err(EpbError::ShapeMismatch));
        assert_eq!(
            Payload::combine(OpKind::Sum, &[&v, &Payload::Scalar(1.0)]),
            Err(EpbError::ShapeMismatch)
        );
        assert!(Payload::<f64>::Vector(vec![]).validate().is_err());
        assert!(Payload::Matrix(vec![vec![1.0], vec![1.0, 2.0]]).validate().is_err());
    }
}
