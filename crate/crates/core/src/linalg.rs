//! Exact dense linear algebra over the rationals. Only what the generator
//! span decompositions need: solve A x = b for the unique solution, failing
//! loudly when the system is inconsistent or underdetermined.

use crate::coeff::Rat;
use crate::error::StarkError;
use num_traits::Zero;

/// Solve A x = b exactly, A given row-major with m >= n. Requires full column
/// rank and consistency; redundant rows must be satisfied by the solution.
pub(crate) fn solve(a: &[Vec<Rat>], b: &[Rat]) -> Result<Vec<Rat>, StarkError> {
    let m = a.len();
    assert_eq!(m, b.len());
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut aug: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, rb)| {
            assert_eq!(row.len(), n);
            let mut r = row.clone();
            r.push(rb.clone());
            r
        })
        .collect();

    let mut pivot_rows: Vec<usize> = Vec::with_capacity(n);
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..m).find(|&r| !aug[r][col].is_zero()) else {
            return Err(StarkError::NoExactSolution);
        };
        aug.swap(row, p);
        let inv = {
            let pv = &aug[row][col];
            pv.recip()
        };
        for c in col..=n {
            let v = &aug[row][c] * &inv;
            aug[row][c] = v;
        }
        for r in 0..m {
            if r == row || aug[r][col].is_zero() {
                continue;
            }
            let f = aug[r][col].clone();
            for c in col..=n {
                let v = &aug[r][c] - &(&f * &aug[row][c]);
                aug[r][c] = v;
            }
        }
        pivot_rows.push(row);
        row += 1;
    }
    // residual rows must be zero = zero
    for r in row..m {
        if !aug[r][n].is_zero() {
            return Err(StarkError::NoExactSolution);
        }
    }
    Ok((0..n).map(|c| aug[pivot_rows[c]][n].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::q;

    #[test]
    fn solves_square_and_overdetermined() {
        // [1 2; 3 4] x = [5; 11] -> x = (1, 2)
        let a = vec![vec![q(1, 1), q(2, 1)], vec![q(3, 1), q(4, 1)]];
        let x = solve(&a, &[q(5, 1), q(11, 1)]).unwrap();
        assert_eq!(x, vec![q(1, 1), q(2, 1)]);
        // consistent redundant third row passes
        let a3 = vec![
            vec![q(1, 1), q(2, 1)],
            vec![q(3, 1), q(4, 1)],
            vec![q(4, 1), q(6, 1)],
        ];
        let x3 = solve(&a3, &[q(5, 1), q(11, 1), q(16, 1)]).unwrap();
        assert_eq!(x3, vec![q(1, 1), q(2, 1)]);
    }

    #[test]
    fn rejects_inconsistent_and_deficient() {
        let a = vec![
            vec![q(1, 1), q(2, 1)],
            vec![q(3, 1), q(4, 1)],
            vec![q(4, 1), q(6, 1)],
        ];
        assert!(solve(&a, &[q(5, 1), q(11, 1), q(17, 1)]).is_err());
        let sing = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]];
        assert!(solve(&sing, &[q(1, 1), q(2, 1)]).is_err());
    }
}
