//! Functions on `V = {(x, y): 0 < x < y < N}` extended by zero to
//! `dV = {x = 0 or y = N}`, and the absorbed Laplacian acting on them.

use super::PdeError;

/// Interior sites of the triangle, ordered by `x` then `y`.
#[inline]
fn triangle_len(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        (n - 1) * (n - 2) / 2
    }
}

#[inline]
fn row_offset(n: usize, x: usize) -> usize {
    // sum_{x' = 1}^{x-1} (N - 1 - x')
    (x - 1) * (n - 1) - (x - 1) * x / 2
}

/// A function on `V` that vanishes on `dV`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleField {
    n: usize,
    values: Vec<f64>,
}

impl TriangleField {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 2, "N must be at least 2");
        Self { n, values: vec![0.0; triangle_len(n)] }
    }

    /// `f(x, y)` on every interior pair.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(n);
        for x in 1..n.saturating_sub(1) {
            for y in x + 1..n {
                let i = field.index(x, y);
                field.values[i] = f(x, y);
            }
        }
        field
    }

    /// Wraps interior values in the crate's ordering (by `x`, then `y`).
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self, PdeError> {
        if n < 2 || values.len() != triangle_len(n) {
            return Err(PdeError::InvalidArgument(format!(
                "triangle of size {n} holds {} values, got {}",
                triangle_len(n.max(2)),
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    fn index(&self, x: usize, y: usize) -> usize {
        row_offset(self.n, x) + (y - x - 1)
    }

    /// Value at `(x, y)` for `0 <= x < y <= N`; zero on the boundary.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        assert!(x < y && y <= self.n, "({x}, {y}) is outside the closed triangle");
        if x == 0 || y == self.n {
            0.0
        } else {
            self.values[self.index(x, y)]
        }
    }

    /// Sets an interior value; boundary entries cannot be written.
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        assert!(0 < x && x < y && y < self.n, "({x}, {y}) is not an interior point");
        let i = self.index(x, y);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterator over `(x, y, value)` on `V`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (1..n.saturating_sub(1))
            .flat_map(move |x| (x + 1..n).map(move |y| (x, y)))
            .zip(self.values.iter())
            .map(|((x, y), &v)| (x, y, v))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest value over `V` (not counting the zero boundary).
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &TriangleField) -> f64 {
        assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A source supported on the superdiagonal `y = x + 1`, `x = 1..N-2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSource {
    n: usize,
    values: Vec<f64>,
}

impl DiagonalSource {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, PdeError> {
        if n < 2 || values.len() != n.saturating_sub(2) {
            return Err(PdeError::InvalidArgument(format!(
                "diagonal source for N = {n} needs {} values, got {}",
                n.saturating_sub(2),
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { n, values: vec![c; n.saturating_sub(2)] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `g(x, x+1)`.
    pub fn at(&self, x: usize) -> f64 {
        self.values[x - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Scatter onto the triangle's interior ordering.
    pub fn to_field(&self) -> TriangleField {
        let mut f = TriangleField::zeros(self.n);
        for (i, &v) in self.values.iter().enumerate() {
            f.set(i + 1, i + 2, v);
        }
        f
    }
}

const NONE: u32 = u32::MAX;

/// Stencil of `Delta_V^N` on the interior ordering.
///
/// Off the superdiagonal the five-point stencil applies; on `y = x + 1` only
/// the two neighbours `(x-1, x+1)` and `(x, x+2)` enter with weight 2 on the
/// centre. Boundary neighbours are dropped (absorption).
#[derive(Debug, Clone)]
pub struct TriangleOperator {
    n: usize,
    scale: f64,
    neighbors: Vec<[u32; 4]>,
    centre: Vec<f64>,
}

impl TriangleOperator {
    pub fn new(n: usize) -> Self {
        let proto = TriangleField::zeros(n);
        let len = proto.len();
        let mut neighbors = vec![[NONE; 4]; len];
        let mut centre = vec![0.0; len];
        let idx = |x: usize, y: usize| -> u32 {
            if x == 0 || y == n {
                NONE
            } else {
                proto.index(x, y) as u32
            }
        };
        for x in 1..n.saturating_sub(1) {
            for y in x + 1..n {
                let i = proto.index(x, y);
                if y == x + 1 {
                    neighbors[i] = [idx(x - 1, y), idx(x, y + 1), NONE, NONE];
                    centre[i] = 2.0;
                } else {
                    neighbors[i] = [idx(x - 1, y), idx(x + 1, y), idx(x, y - 1), idx(x, y + 1)];
                    centre[i] = 4.0;
                }
            }
        }
        Self { n, scale: (n * n) as f64, neighbors, centre }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.centre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centre.is_empty()
    }

    /// `out = Delta_V^N f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = -self.centre[i] * f[i];
            for &j in &self.neighbors[i] {
                if j != NONE {
                    s += f[j as usize];
                }
            }
            *o = self.scale * s;
        }
    }

    /// `out = (shift I - Delta_V^N) f`.
    fn apply_shifted(&self, shift: f64, f: &[f64], out: &mut [f64]) {
        self.apply(f, out);
        for (o, v) in out.iter_mut().zip(f) {
            *o = shift * v - *o;
        }
    }

    /// Solves `(shift I - Delta_V^N) u = rhs` by Jacobi-preconditioned
    /// conjugate gradients. `shift >= 0`; the operator is symmetric positive
    /// definite on the interior. `u` holds the initial guess on entry.
    ///
    /// Returns the achieved relative residual.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64], u: &mut [f64], rel_tol: f64) -> Result<f64, PdeError> {
        let len = self.len();
        let rhs_norm = norm(rhs);
        if rhs_norm == 0.0 {
            u.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0.0);
        }
        let inv_diag: Vec<f64> = self.centre.iter().map(|c| 1.0 / (shift + self.scale * c)).collect();
        let mut r = vec![0.0; len];
        self.apply_shifted(shift, u, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; len];
        let max_iter = 20 * len + 100;
        let mut rel = norm(&r) / rhs_norm;
        let mut it = 0;
        while rel > rel_tol && it < max_iter {
            self.apply_shifted(shift, &p, &mut ap);
            let a = rz / dot(&p, &ap);
            for i in 0..len {
                u[i] += a * p[i];
                r[i] -= a * ap[i];
            }
            for i in 0..len {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let b = rz_new / rz;
            rz = rz_new;
            for i in 0..len {
                p[i] = z[i] + b * p[i];
            }
            rel = norm(&r) / rhs_norm;
            it += 1;
        }
        // true residual, not the recursively updated one
        self.apply_shifted(shift, u, &mut ap);
        let true_rel = norm(&ap.iter().zip(rhs).map(|(a, b)| a - b).collect::<Vec<_>>()) / rhs_norm;
        if true_rel > rel_tol.max(1e-10) {
            return Err(PdeError::NotConverged { residual: true_rel, iterations: it });
        }
        Ok(true_rel)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Delta_V^N f` with zero values on `dV`.
pub fn laplacian_triangle(f: &TriangleField) -> TriangleField {
    let op = TriangleOperator::new(f.size());
    let mut out = TriangleField::zeros(f.size());
    op.apply(f.values(), out.values_mut());
    out
}

/// Solves `-Delta_V^N phi = c 1{y = x+1}` on `V` with `phi = 0` on `dV`.
pub fn solve_green_triangle(n: usize, c: f64) -> Result<TriangleField, PdeError> {
    if n < 3 {
        return Err(PdeError::InvalidArgument(format!("Green problem needs N >= 3, got {n}")));
    }
    let op = TriangleOperator::new(n);
    let rhs = DiagonalSource::constant(n, c).to_field();
    let mut out = TriangleField::zeros(n);
    op.solve_shifted(0.0, rhs.values(), out.values_mut(), 1e-12)?;
    Ok(out)
}

/// `c / (N - 1) * (x / N) * (1 - y / N)`.
pub fn green_closed_form(n: usize, c: f64) -> TriangleField {
    let nf = n as f64;
    TriangleField::from_fn(n, |x, y| c / (nf - 1.0) * (x as f64 / nf) * (1.0 - y as f64 / nf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_covers_interior_once() {
        for n in 2..9 {
            let f = TriangleField::from_fn(n, |x, y| (10 * x + y) as f64);
            let pts: Vec<_> = f.iter().collect();
            assert_eq!(pts.len(), triangle_len(n));
            for (x, y, v) in pts {
                assert_eq!(v, (10 * x + y) as f64);
                assert_eq!(f.get(x, y), v);
            }
            for y in 1..=n {
                assert_eq!(f.get(0, y), 0.0);
            }
            for x in 0..n {
                assert_eq!(f.get(x, n), 0.0);
            }
        }
    }

    #[test]
    #[should_panic]
    fn rejects_lower_triangle() {
        TriangleField::zeros(5).get(3, 2);
    }

    #[test]
    #[should_panic]
    fn boundary_is_read_only() {
        TriangleField::zeros(5).set(0, 2, 1.0);
    }

    #[test]
    fn zero_maps_to_zero() {
        let f = TriangleField::zeros(9);
        assert!(laplacian_triangle(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn green_profile_stencil_by_hand() {
        // N = 6, f(x, y) = (x/N)(1 - y/N) = x (N - y) / N^2
        let n = 6;
        let f = TriangleField::from_fn(n, |x, y| (x * (n - y)) as f64 / 36.0);
        let lap = laplacian_triangle(&f);
        for (x, y, v) in lap.iter() {
            if y == x + 1 {
                // N^2 [ (x-1)(N-x-1) + x(N-x-2) - 2x(N-x-1) ] / N^2 = -(N-1)
                assert!((v + 5.0).abs() < 1e-12, "({x},{y}) -> {v}");
            } else {
                assert!(v.abs() < 1e-12, "({x},{y}) -> {v}");
            }
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let n = 11;
        let op = TriangleOperator::new(n);
        let len = op.len();
        let mut col = vec![0.0; len];
        let mut a = vec![vec![0.0; len]; len];
        for j in 0..len {
            let mut e = vec![0.0; len];
            e[j] = 1.0;
            op.apply(&e, &mut col);
            for i in 0..len {
                a[i][j] = col[i];
            }
        }
        for i in 0..len {
            for j in 0..len {
                assert!((a[i][j] - a[j][i]).abs() < 1e-12);
            }
            // negative definite: strictly diagonally dominant where a boundary
            // neighbour is dropped, weakly elsewhere
            assert!(a[i][i] < 0.0);
        }
    }

    #[test]
    fn green_solve_matches_closed_form() {
        for n in [3, 4, 8, 16, 33] {
            let g = solve_green_triangle(n, 1.0).unwrap();
            assert!(g.sup_distance(&green_closed_form(n, 1.0)) < 1e-8);
            assert!(g.max_value() <= 1.0 / (4.0 * (n - 1) as f64) + 1e-12);
        }
    }

    #[test]
    fn green_is_linear_in_source() {
        let n = 20;
        assert!(solve_green_triangle(n, 0.0).unwrap().sup_norm() == 0.0);
        let one = solve_green_triangle(n, 0.7).unwrap();
        let two = solve_green_triangle(n, 1.4).unwrap();
        for (a, b) in one.values().iter().zip(two.values()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_source_scatter() {
        let s = DiagonalSource::new(5, vec![1.0, 2.0, 3.0]).unwrap();
        let f = s.to_field();
        assert_eq!(f.get(1, 2), 1.0);
        assert_eq!(f.get(3, 4), 3.0);
        assert_eq!(f.get(1, 3), 0.0);
        assert!(DiagonalSource::new(5, vec![1.0]).is_err());
    }
}
