use super::{CsrMatrix, NumericsError};

/// Default relative residual target.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|b - A x| / |b|`, recomputed from the returned solution.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned CG with the default tolerance and an iteration cap
/// of ten times the dimension.
pub fn cg_solve_default(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport), NumericsError> {
    cg_solve(a, b, DEFAULT_TOLERANCE, 10 * a.dim().max(1))
}

/// Solve `A x = b` for SPD `A` by conjugate gradients with diagonal
/// preconditioning. Non-convergence is reported, not raised. The iteration
/// is sequential and therefore bit-reproducible.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), NumericsError> {
    let n = a.dim();
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch {
            matrix: n,
            vector: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFiniteRhs);
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(row, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(NumericsError::NonPositiveDiagonal { row, value: d })
            }
        })
        .collect::<Result<_, _>>()?;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let target = tol * b_norm;
    let mut restarts = 0;

    // Outer loop restarts from the true residual when the recursive one has
    // drifted below target without the true one following.
    loop {
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter && norm(&r) > target {
            a.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        a.mul_vec_into(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let rel = norm(&r) / b_norm;
        restarts += 1;
        if rel <= tol || iterations >= max_iter || restarts > 8 {
            return Ok((
                x,
                SolveReport {
                    iterations,
                    relative_residual: rel,
                    converged: rel <= tol,
                },
            ));
        }
    }
}
