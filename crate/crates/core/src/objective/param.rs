use std::ops::Index;

use super::ObjectiveError;

/// Flat parameter vector.
///
/// Construction checks that every entry is finite. Arithmetic does not
/// re-check; callers that may overflow test [`ParamVector::is_finite`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(pub(crate) Vec<f64>);

impl ParamVector {
    pub fn new(data: Vec<f64>) -> Result<Self, ObjectiveError> {
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(ObjectiveError::NonFinite(i));
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    /// Unit vector along coordinate `i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.iter().map(|x| c * x).collect())
    }

    /// `self + c·x`.
    pub fn add_scaled(&self, c: f64, x: &Self) -> Self {
        self.zip(x, |a, b| a + c * b)
    }

    /// `self += c·x` in place.
    pub fn axpy(&mut self, c: f64, x: &Self) {
        debug_assert_eq!(self.dim(), x.dim());
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += c * b;
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// # Panics
/// If any entry is not finite. Use [`ParamVector::new`] for untrusted data.
impl From<Vec<f64>> for ParamVector {
    fn from(data: Vec<f64>) -> Self {
        Self::new(data).expect("ParamVector entries must be finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            ParamVector::new(vec![0.0, f64::INFINITY]),
            Err(ObjectiveError::NonFinite(1))
        );
    }

    #[test]
    fn arithmetic() {
        let a = ParamVector::from(vec![1.0, -2.0, 3.0]);
        let b = ParamVector::from(vec![0.5, 0.5, 2.0]);
        assert_eq!(a.add(&b).as_slice(), &[1.5, -1.5, 5.0]);
        assert_eq!(a.hadamard(&b).as_slice(), &[0.5, -1.0, 6.0]);
        assert_eq!(a.dot(&b), 5.5);
        assert_eq!(a.norm_inf(), 3.0);
        assert_eq!(a.add_scaled(2.0, &b), a.add(&b.scale(2.0)));
        let mut c = a.clone();
        c.axpy(-1.0, &a);
        assert_eq!(c, ParamVector::zeros(3));
    }

    proptest! {
        #[test]
        fn norm_is_consistent_with_dot(v in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let p = ParamVector::from(v);
            prop_assert!((p.norm() * p.norm() - p.dot(&p)).abs() <= 1e-9 * (1.0 + p.dot(&p)));
            prop_assert!(p.norm_inf() <= p.norm() + 1e-12);
        }
    }
}
