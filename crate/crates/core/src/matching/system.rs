use serde::Serialize;

use crate::error::{Error, Result};

/// Refuse solves above this 1-norm condition number.
pub const MAX_CONDITION: f64 = 1e10;

/// One named right-hand-side contribution.
#[derive(Clone, Debug, Serialize)]
pub struct Term {
    pub label: &'static str,
    pub value: f64,
}

/// `lhs · x = Σ rhs`.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub name: &'static str,
    pub lhs: [f64; 4],
    pub rhs: Vec<Term>,
}

impl Row {
    pub fn new(name: &'static str, lhs: [f64; 4]) -> Self {
        Self { name, lhs, rhs: Vec::new() }
    }

    pub fn term(mut self, label: &'static str, value: f64) -> Self {
        self.rhs.push(Term { label, value });
        self
    }

    pub fn total(&self) -> f64 {
        self.rhs.iter().map(|t| t.value).sum()
    }
}

/// A 4×4 matching system assembled row by row.
#[derive(Clone, Debug, Serialize)]
pub struct LinearSystem {
    pub unknowns: [&'static str; 4],
    pub rows: [Row; 4],
}

impl LinearSystem {
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        [self.rows[0].lhs, self.rows[1].lhs, self.rows[2].lhs, self.rows[3].lhs]
    }

    pub fn rhs(&self) -> [f64; 4] {
        [self.rows[0].total(), self.rows[1].total(), self.rows[2].total(), self.rows[3].total()]
    }

    pub fn determinant(&self) -> f64 {
        lu(self.matrix()).map_or(0.0, |f| f.det)
    }

    /// `‖A‖₁‖A⁻¹‖₁`; infinite for a singular matrix.
    pub fn condition(&self) -> f64 {
        let a = self.matrix();
        let Ok(f) = lu(a) else { return f64::INFINITY };
        let norm1 = |m: &[[f64; 4]; 4]| (0..4).map(|j| (0..4).map(|i| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut inv = [[0.0; 4]; 4];
        for j in 0..4 {
            let mut e = [0.0; 4];
            e[j] = 1.0;
            let x = f.solve(e);
            for i in 0..4 {
                inv[i][j] = x[i];
            }
        }
        norm1(&a) * norm1(&inv)
    }

    pub fn solve(&self) -> Result<[f64; 4]> {
        let cond = self.condition();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Degenerate(format!("matching system for {:?} has condition number {cond:.3e}", self.unknowns)));
        }
        Ok(lu(self.matrix())?.solve(self.rhs()))
    }
}

struct Lu {
    a: [[f64; 4]; 4],
    perm: [usize; 4],
    det: f64,
}

impl Lu {
    fn solve(&self, b: [f64; 4]) -> [f64; 4] {
        let mut y = [0.0; 4];
        for i in 0..4 {
            y[i] = b[self.perm[i]] - (0..i).map(|j| self.a[i][j] * y[j]).sum::<f64>();
        }
        for i in (0..4).rev() {
            y[i] = (y[i] - (i + 1..4).map(|j| self.a[i][j] * y[j]).sum::<f64>()) / self.a[i][i];
        }
        y
    }
}

fn lu(mut a: [[f64; 4]; 4]) -> Result<Lu> {
    let mut perm = [0, 1, 2, 3];
    let mut det = 1.0;
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap_or(c);
        if a[p][c] == 0.0 {
            return Err(Error::Singular { row: c, pivot: 0.0 });
        }
        if p != c {
            a.swap(p, c);
            perm.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for i in c + 1..4 {
            let l = a[i][c] / a[c][c];
            a[i][c] = l;
            for j in c + 1..4 {
                a[i][j] -= l * a[c][j];
            }
        }
    }
    Ok(Lu { a, perm, det })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(m: [[f64; 4]; 4], b: [f64; 4]) -> LinearSystem {
        let row = |i: usize| Row::new("r", m[i]).term("b", b[i]);
        LinearSystem { unknowns: ["a", "b", "c", "d"], rows: [row(0), row(1), row(2), row(3)] }
    }

    #[test]
    fn solves_and_reports_determinant() {
        let m = [[0.0, 2.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 3.0, 0.0], [0.0, 1.0, 0.0, 1.0]];
        let s = sys(m, [3.0, 1.0, 3.0, 2.0]);
        let x = s.solve().unwrap();
        for (a, b) in x.iter().zip([1.0, 1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((s.determinant() + 3.0).abs() < 1e-14, "{}", s.determinant());
        assert!(s.condition() >= 1.0);
    }

    #[test]
    fn singular_is_refused() {
        let m = [[1.0, 2.0, 0.0, 0.0], [2.0, 4.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        assert!(sys(m, [0.0; 4]).solve().is_err());
        let mut near = m;
        near[1][1] += 1e-12;
        assert!(matches!(sys(near, [0.0; 4]).solve(), Err(Error::Degenerate(_))));
    }
}
