use crate::error::{Error, Result};

/// Per-coordinate accumulators for one optimization run.
///
/// `m_raw` holds the (uncorrected) gradient EMA and `v_raw` the squared-gradient
/// accumulator or EMA, depending on the adaptive rule in use. Both start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub t: u64,
    pub m_raw: Vec<f64>,
    pub v_raw: Vec<f64>,
}

impl OptimizerState {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            t: 0,
            m_raw: vec![0.0; dim],
            v_raw: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.m_raw.len()
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

/// Zero-initialised state for a parameter vector of length `dim`.
pub fn init_state(dim: usize) -> Result<OptimizerState> {
    OptimizerState::new(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_initialised() {
        let s = init_state(2).unwrap();
        assert_eq!(s.t, 0);
        assert_eq!(s.m_raw, vec![0.0, 0.0]);
        assert_eq!(s.v_raw, vec![0.0, 0.0]);

        let s = init_state(1).unwrap();
        assert_eq!(s.m_raw, vec![0.0]);
        assert_eq!(s.v_raw, vec![0.0]);
    }

    #[test]
    fn zero_dim_rejected() {
        assert_eq!(init_state(0), Err(Error::InvalidDimension(0)));
    }
}
