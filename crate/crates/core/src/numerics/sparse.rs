use super::NumericsError;

/// Square matrix in compressed sparse row layout with sorted, unique column
/// indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed in
/// a fixed order so the result does not depend on insertion interleaving.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    dim: usize,
    entries: Vec<(u64, f64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((((row as u64) << 32) | col as u64, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable sort keeps insertion order among duplicates, so sums are
        // reproducible.
        self.entries.sort_by_key(|e| e.0);
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len() / 4);
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len() / 4);
        let mut last = u64::MAX;
        for (key, v) in self.entries {
            if key == last {
                *values.last_mut().expect("previous entry") += v;
            } else {
                let row = (key >> 32) as usize;
                row_ptr[row + 1] += 1;
                col_idx.push((key & 0xFFFF_FFFF) as usize);
                values.push(v);
                last = key;
            }
        }
        for i in 0..self.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            dim: self.dim,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut b = TripletBuilder::new(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            acc += xi * row;
        }
        acc
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

/// Impose `x_i = v_i` by symmetric elimination: fixed rows and columns are
/// zeroed with a unit diagonal, the right side of fixed rows becomes the
/// prescribed value and free rows move the known column contributions to
/// the right side. SPD is preserved.
pub fn apply_dirichlet(
    a: &CsrMatrix,
    b: &[f64],
    fixed: &[(usize, f64)],
) -> Result<(CsrMatrix, Vec<f64>), NumericsError> {
    let n = a.dim;
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch {
            matrix: n,
            vector: b.len(),
        });
    }
    let mut value: Vec<Option<f64>> = vec![None; n];
    for &(i, v) in fixed {
        if i >= n {
            return Err(NumericsError::IndexOutOfRange { index: i, dim: n });
        }
        match value[i] {
            Some(prev) if prev != v => {
                return Err(NumericsError::ConflictingDirichlet {
                    index: i,
                    first: prev,
                    second: v,
                })
            }
            _ => value[i] = Some(v),
        }
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(a.nnz());
    let mut values = Vec::with_capacity(a.nnz());
    let mut rhs = b.to_vec();
    for i in 0..n {
        if let Some(v) = value[i] {
            col_idx.push(i);
            values.push(1.0);
            rhs[i] = v;
        } else {
            for (j, aij) in a.row(i) {
                match value[j] {
                    Some(vj) => rhs[i] -= aij * vj,
                    None => {
                        col_idx.push(j);
                        values.push(aij);
                    }
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    Ok((
        CsrMatrix {
            dim: n,
            row_ptr,
            col_idx,
            values,
        },
        rhs,
    ))
}
