use ntpt_engine::Tensor;

use crate::error::{Error, Result};

/// Bounded integer range `0..size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntDomain(usize);

impl IntDomain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Domain("integer domains need at least one value".into()));
        }
        Ok(IntDomain(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn contains(self, value: usize) -> bool {
        value < self.0
    }
}

/// Tolerance on the total mass of a [`MarginalVec`].
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Probability distribution over an [`IntDomain`].
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalVec {
    domain: IntDomain,
    probs: Tensor,
}

impl MarginalVec {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let domain = IntDomain::new(probs.len())?;
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Marginal(format!("entry {p} is not a finite non-negative probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Marginal(format!("mass {total} is not 1")));
        }
        let n = probs.len();
        Ok(MarginalVec { domain, probs: Tensor::new([n], probs)? })
    }

    pub fn point(domain: IntDomain, value: usize) -> Result<Self> {
        if !domain.contains(value) {
            return Err(Error::Domain(format!("{value} outside domain of size {}", domain.size())));
        }
        let mut probs = vec![0.0; domain.size()];
        probs[value] = 1.0;
        MarginalVec::new(probs)
    }

    pub fn uniform(domain: IntDomain) -> Self {
        let n = domain.size();
        MarginalVec { domain, probs: Tensor::full([n], 1.0 / n as f64) }
    }

    pub fn domain(&self) -> IntDomain {
        self.domain
    }

    pub fn probs(&self) -> &[f64] {
        self.probs.data()
    }

    /// Most probable value; ties go to the smallest value.
    pub fn argmax(&self) -> usize {
        argmax(self.probs())
    }

    pub(crate) fn as_row(&self) -> Tensor {
        Tensor::row(self.probs())
    }
}

/// Index of the largest entry, ties broken toward the smallest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_domain_rejected() {
        assert!(IntDomain::new(0).is_err());
        assert_eq!(IntDomain::new(19).unwrap().size(), 19);
    }

    #[test]
    fn marginals_must_be_normalized() {
        assert!(MarginalVec::new(vec![0.25, 0.75]).is_ok());
        assert!(MarginalVec::new(vec![0.25, 0.7]).is_err());
        assert!(MarginalVec::new(vec![-0.25, 1.25]).is_err());
        assert!(MarginalVec::new(vec![f64::NAN, 1.0]).is_err());
    }
}
