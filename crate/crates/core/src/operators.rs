//! Assembled stiffness operators shared by the Taylor recursion and the
//! stochastic Galerkin solver: the background matrix with its factorization,
//! the unit-weight matrix for V-norms, and one matrix per expansion term.

use crate::error::Error;
use crate::fem1d::{assemble_weighted_stiffness, BandedCholesky, FemSpace, SpdMatrix, WeightFn};
use crate::fields::CoefficientField;

pub struct OperatorSet {
    pub a_bar: SpdMatrix,
    pub a_bar_chol: BandedCholesky,
    pub a_unit: SpdMatrix,
    pub a_unit_chol: BandedCholesky,
    pub psi_mats: Vec<SpdMatrix>,
}

impl OperatorSet {
    pub fn build(field: &CoefficientField, space: &FemSpace) -> Result<Self, Error> {
        let a_bar = assemble_weighted_stiffness(space, field.abar())?;
        let a_bar_chol = a_bar.cholesky()?;
        let a_unit = assemble_weighted_stiffness(space, &WeightFn::Constant(1.0))?;
        let a_unit_chol = a_unit.cholesky()?;
        let psi_mats = field
            .psis()
            .iter()
            .map(|psi| assemble_weighted_stiffness(space, psi))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OperatorSet {
            a_bar,
            a_bar_chol,
            a_unit,
            a_unit_chol,
            psi_mats,
        })
    }

    pub fn dofs(&self) -> usize {
        self.a_bar.dim()
    }

    pub fn v_norm(&self, x: &[f64]) -> f64 {
        self.a_unit.quadratic_form(x).max(0.0).sqrt()
    }

    pub fn a_norm(&self, x: &[f64]) -> f64 {
        self.a_bar.quadratic_form(x).max(0.0).sqrt()
    }

    /// Discrete dual norm `||f||_{V_h'} = sup_{v in V_h} <f,v> / ||v||_V
    /// = sqrt(b^T A_1^{-1} b)` for the load vector `b`.
    pub fn f_dual_norm(&self, load: &[f64]) -> f64 {
        let z = self.a_unit_chol.solve(load);
        load.iter()
            .zip(&z)
            .map(|(b, z)| b * z)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}
