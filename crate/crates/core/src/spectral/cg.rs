//! Jacobi-preconditioned conjugate gradients for `(A - s B) u = f`.
//! Slower than the direct solver; kept as an independent check.

use super::operator::{csr_mul, SparseOperator};
use super::ShiftedSolve;
use crate::error::{Error, Result};

pub struct PcgShiftedSolver<'a> {
    op: &'a SparseOperator,
    inv_diag: Vec<f64>,
    pub shift: f64,
    pub rtol: f64,
    pub max_iter: usize,
}

impl<'a> PcgShiftedSolver<'a> {
    pub fn new(op: &'a SparseOperator, shift: f64) -> Result<Self> {
        let d = op.diagonal();
        let inv_diag = d
            .iter()
            .zip(&op.mass)
            .map(|(a, b)| {
                let v = a - shift * b;
                if v > 0.0 {
                    Ok(1.0 / v)
                } else {
                    Err(Error::LinearSolver(format!(
                        "shifted diagonal not positive ({v:e})"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            op,
            inv_diag,
            shift,
            rtol: 1e-13,
            max_iter: 20 * op.dim().max(100),
        })
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        csr_mul(&self.op.a, x, y);
        for ((yi, xi), b) in y.iter_mut().zip(x).zip(&self.op.mass) {
            *yi -= self.shift * b * xi;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ShiftedSolve for PcgShiftedSolver<'_> {
    fn shift(&self) -> f64 {
        self.shift
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for _ in 0..self.max_iter {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::LinearSolver(
                    "operator not positive definite along search direction".into(),
                ));
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            if dot(&r, &r).sqrt() <= self.rtol * bnorm {
                return Ok(x);
            }
            for k in 0..n {
                z[k] = r[k] * self.inv_diag[k];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::LinearSolver(format!(
            "conjugate gradients stalled after {} iterations",
            self.max_iter
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fast::{slit_free_ground, FastShiftedSolver};
    use crate::spectral::grid::WedgeGrid;

    #[test]
    fn agrees_with_direct_solver() {
        let g = WedgeGrid::new(3, 0.45, 25, 21).unwrap();
        let op = SparseOperator::assemble(&g);
        let s = 0.95 * slit_free_ground(&op);
        let b: Vec<f64> = (0..op.dim()).map(|k| (k as f64 * 0.37).sin()).collect();
        let x1 = PcgShiftedSolver::new(&op, s).unwrap().solve(&b).unwrap();
        let x2 = FastShiftedSolver::new(&op, s).unwrap().solve(&b).unwrap();
        let diff = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let size = x2.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9 * size, "diff={diff:e}");
    }
}
