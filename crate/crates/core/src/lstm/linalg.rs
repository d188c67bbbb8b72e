//! Column-major matrices and a GEMM wrapper with free transposes.

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Columns `start..start + n` as a view.
    pub fn cols(&self, start: usize, n: usize) -> View<'_> {
        View {
            rows: self.rows,
            cols: n,
            data: &self.data[start * self.rows..(start + n) * self.rows],
        }
    }

    pub fn cols_mut(&mut self, start: usize, n: usize) -> &mut [f64] {
        &mut self.data[start * self.rows..(start + n) * self.rows]
    }

    pub fn view(&self) -> View<'_> {
        self.cols(0, self.cols)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct View<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl<'a> View<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn t(self) -> Op<'a> {
        Op { m: self, trans: true }
    }

    pub fn n(self) -> Op<'a> {
        Op { m: self, trans: false }
    }
}

/// A view used as-is or transposed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Op<'a> {
    m: View<'a>,
    trans: bool,
}

impl Op<'_> {
    fn shape(&self) -> (usize, usize) {
        if self.trans {
            (self.m.cols, self.m.rows)
        } else {
            (self.m.rows, self.m.cols)
        }
    }

    /// (row stride, column stride) of the operand as seen by the product.
    fn strides(&self) -> (isize, isize) {
        let ld = self.m.rows as isize;
        if self.trans {
            (ld, 1)
        } else {
            (1, ld)
        }
    }
}

/// `c = alpha * a * b + beta * c`, where `c` is column-major with `c_rows` rows.
pub(crate) fn gemm(alpha: f64, a: Op<'_>, b: Op<'_>, beta: f64, c: &mut [f64], c_rows: usize) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(m, c_rows, "output rows differ");
    assert_eq!(c.len(), m * n, "output size differs");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the assertions above bound every index the kernel touches by
    // the lengths of the three slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.m.data.as_ptr(),
            rsa,
            csa,
            b.m.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

/// Adds `bias` to every column.
pub(crate) fn add_bias(c: &mut [f64], rows: usize, bias: &[f64]) {
    for col in c.chunks_exact_mut(rows) {
        for (v, b) in col.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Accumulates row sums of a column-major matrix into `out`.
pub(crate) fn add_row_sums(m: &[f64], rows: usize, out: &mut [f64]) {
    for col in m.chunks_exact(rows) {
        for (o, v) in out.iter_mut().zip(col) {
            *o += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Mat, ta: bool, b: &Mat, tb: bool) -> Mat {
        let get = |m: &Mat, t: bool, i: usize, j: usize| if t { m.data[j + i * m.rows] } else { m.data[i + j * m.rows] };
        let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
        let n = if tb { b.rows } else { b.cols };
        let mut c = Mat::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                c.data[i + j * m] = (0..k).map(|p| get(a, ta, i, p) * get(b, tb, p, j)).sum();
            }
        }
        c
    }

    fn op(v: View<'_>, t: bool) -> Op<'_> {
        if t {
            v.t()
        } else {
            v.n()
        }
    }

    fn filled(rows: usize, cols: usize, seed: f64) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for (i, v) in m.data.iter_mut().enumerate() {
            *v = ((i as f64 + 1.0) * seed).sin();
        }
        m
    }

    #[test]
    fn gemm_matches_naive_for_all_transposes() {
        for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
            let a = if ta { filled(4, 3, 0.7) } else { filled(3, 4, 0.7) };
            let b = if tb { filled(5, 4, 1.3) } else { filled(4, 5, 1.3) };
            let want = naive(&a, ta, &b, tb);
            let mut c = filled(3, 5, 2.1);
            let c0 = c.clone();
            gemm(2.0, op(a.view(), ta), op(b.view(), tb), 0.5, &mut c.data, 3);
            for i in 0..15 {
                assert!((c.data[i] - (2.0 * want.data[i] + 0.5 * c0.data[i])).abs() < 1e-12);
            }
        }
    }
}
