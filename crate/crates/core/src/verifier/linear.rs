//! Solves `x = b + A x` for substochastic sparse `A` (rows of transient states).

pub const DIRECT_LIMIT: usize = 2000;
pub const GS_EPSILON: f64 = 1e-9;
pub const GS_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveError {
    Singular,
    NonConvergence { iterations: usize },
}

/// `rows[i]` holds `(j, a_ij)` pairs; `j` indexes into the same unknowns.
pub fn solve_fixpoint(rows: &[Vec<(usize, f64)>], b: &[f64]) -> Result<Vec<f64>, SolveError> {
    if rows.len() <= DIRECT_LIMIT {
        gaussian(rows, b)
    } else {
        gauss_seidel(rows, b, GS_EPSILON, GS_MAX_ITERATIONS)
    }
}

/// Dense elimination with partial pivoting on `(I - A) x = b`.
pub fn gaussian(rows: &[Vec<(usize, f64)>], b: &[f64]) -> Result<Vec<f64>, SolveError> {
    let n = rows.len();
    let w = n + 1;
    let mut m = vec![0.0f64; n * w];
    for (i, row) in rows.iter().enumerate() {
        m[i * w + i] = 1.0;
        for &(j, a) in row {
            m[i * w + j] -= a;
        }
        m[i * w + n] = b[i];
    }
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * w + col].abs();
        for r in col + 1..n {
            let v = m[r * w + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-300 {
            return Err(SolveError::Singular);
        }
        if piv != col {
            for k in 0..w {
                m.swap(col * w + k, piv * w + k);
            }
        }
        let d = m[col * w + col];
        for r in col + 1..n {
            let f = m[r * w + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..w {
                m[r * w + k] -= f * m[col * w + k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i * w + n];
        for k in i + 1..n {
            s -= m[i * w + k] * x[k];
        }
        x[i] = s / m[i * w + i];
    }
    Ok(x)
}

pub fn gauss_seidel(rows: &[Vec<(usize, f64)>], b: &[f64], eps: f64, max_iter: usize) -> Result<Vec<f64>, SolveError> {
    let n = rows.len();
    let mut x = vec![0.0; n];
    for _ in 0..max_iter {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut s = b[i];
            let mut diag = 0.0;
            for &(j, a) in &rows[i] {
                if j == i {
                    diag += a;
                } else {
                    s += a * x[j];
                }
            }
            let new = s / (1.0 - diag);
            delta = delta.max((new - x[i]).abs());
            x[i] = new;
        }
        if delta < eps {
            return Ok(x);
        }
    }
    Err(SolveError::NonConvergence { iterations: max_iter })
}
