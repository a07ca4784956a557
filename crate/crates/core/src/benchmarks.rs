//! Bundled benchmark problems.

use nalgebra::{dmatrix, DMatrix, DVector};

use crate::error::Result;
use crate::model::{
    EllipsoidSpec, HyperBox, LtiSystem, Polarity, ProblemSystem, PssMode, PssSystem, SafetySpec, VerificationProblem,
};

/// One closed-loop motor with its position controller.
pub fn motor_block() -> (DMatrix<f64>, DMatrix<f64>) {
    let a0 = dmatrix![
        0.0, 1.0, 0.0, 0.0;
        0.0, -1.0865, 8487.2, 0.0;
        -2592.1, -21.1190, -698.9135, -141390.0;
        1.0, 0.0, 0.0, 0.0
    ];
    let b0 = dmatrix![0.0; 0.0; 0.0; -1.0];
    (a0, b0)
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut(a.shape(), b.shape()).copy_from(b);
    m
}

/// The two-mode system of two synchronously driven motors: both turn one
/// way in mode 1 (0.1 s) and back in mode 2 (0.15 s). Outputs are the
/// first motor's position and the position difference of the two motors.
pub fn motor() -> Result<VerificationProblem> {
    let (a0, b0) = motor_block();
    let a = block_diag(&a0, &a0);
    let b1 = block_diag(&b0, &b0);
    let c = dmatrix![
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
        1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0
    ];
    let mode1 = PssMode {
        system: LtiSystem::new(a.clone(), b1.clone(), c.clone())?,
        duration: 0.1,
        initial_set: HyperBox::from_slices(
            &[-0.002, 0.0, 0.0, 0.0, -0.001, 0.0, 0.0, 0.0],
            &[0.0025, 0.0, 0.0, 0.0, 0.002, 0.0, 0.0, 0.0],
        )?,
    };
    let mode2 = PssMode {
        system: LtiSystem::new(a, -b1, c)?,
        duration: 0.15,
        initial_set: HyperBox::from_slices(
            &[-0.001, 0.0, 0.0, 0.0, -0.002, 0.0, 0.0, 0.0],
            &[0.001, 0.0, 0.0, 0.0, 0.003, 0.0, 0.0, 0.0],
        )?,
    };
    let pss = PssSystem::new(vec![mode1, mode2])?;
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&[178.0, 625.0]));
    let specs = vec![
        SafetySpec::Ellipsoid(EllipsoidSpec::new(
            q.clone(),
            DVector::from_column_slice(&[0.325, 0.16]),
            1.0,
            Polarity::Unsafe,
        )?),
        SafetySpec::Ellipsoid(EllipsoidSpec::new(
            q,
            DVector::from_column_slice(&[-0.325, -0.16]),
            1.0,
            Polarity::Unsafe,
        )?),
    ];
    let period = pss.period();
    VerificationProblem::new(
        "motor",
        ProblemSystem::Pss(pss),
        HyperBox::from_slices(&[0.16, 0.16], &[0.2, 0.22])?,
        specs,
        period,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_stability;

    #[test]
    fn motor_modes_are_stable() {
        let p = motor().unwrap();
        let ProblemSystem::Pss(pss) = p.system() else { panic!("motor is switched") };
        assert_eq!(pss.modes().len(), 2);
        for m in pss.modes() {
            assert!(check_stability(&m.system, 1e-9).unwrap().stable);
        }
    }
}
