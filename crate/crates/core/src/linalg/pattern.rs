use super::CsrMatrix;

/// Sparsity pattern of a tensor product of band matrices.
///
/// Row `I` couples to every `J` with `|i_k - j_k| <= bw_k` in each axis; the
/// columns of a row are stored in ascending global order, so the position of
/// `(I, J)` inside the row is a closed-form expression.
#[derive(Debug, Clone)]
pub struct TensorBandPattern {
    dims: Vec<usize>,
    bw: Vec<usize>,
}

impl TensorBandPattern {
    pub fn new(dims: Vec<usize>, bw: Vec<usize>) -> Self {
        assert_eq!(dims.len(), bw.len());
        assert!(dims.iter().all(|&n| n > 0));
        Self { dims, bw }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn bandwidths(&self) -> &[usize] {
        &self.bw
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for (o, &n) in out.iter_mut().zip(&self.dims) {
            *o = idx % n;
            idx /= n;
        }
    }

    pub fn linear_index(&self, mi: &[usize]) -> usize {
        mi.iter()
            .zip(&self.dims)
            .rev()
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    #[inline]
    fn range(&self, k: usize, i: usize) -> (usize, usize) {
        let lo = i.saturating_sub(self.bw[k]);
        let hi = (i + self.bw[k]).min(self.dims[k] - 1);
        (lo, hi)
    }

    pub fn row_len(&self, row: &[usize]) -> usize {
        (0..self.dims.len())
            .map(|k| {
                let (lo, hi) = self.range(k, row[k]);
                hi - lo + 1
            })
            .product()
    }

    /// Offset of column `col` within the stored entries of row `row`.
    #[inline]
    pub fn offset_in_row(&self, row: &[usize], col: &[usize]) -> usize {
        let mut off = 0;
        let mut stride = 1;
        for k in 0..self.dims.len() {
            let (lo, hi) = self.range(k, row[k]);
            debug_assert!(col[k] >= lo && col[k] <= hi);
            off += (col[k] - lo) * stride;
            stride *= hi - lo + 1;
        }
        off
    }

    /// Estimated number of stored entries.
    pub fn nnz(&self) -> usize {
        // the count factorizes per axis
        (0..self.dims.len())
            .map(|k| {
                (0..self.dims[k])
                    .map(|i| {
                        let (lo, hi) = self.range(k, i);
                        hi - lo + 1
                    })
                    .sum::<usize>()
            })
            .product()
    }

    /// CSR matrix with this pattern and all values zero.
    pub fn empty_matrix(&self) -> CsrMatrix {
        let n = self.len();
        let d = self.dims.len();
        let nnz = self.nnz();
        assert!(n <= u32::MAX as usize, "too many rows for 32-bit column indices");
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx: Vec<u32> = Vec::with_capacity(nnz);
        row_ptr.push(0);
        let mut mi = vec![0; d];
        let mut cj = vec![0; d];
        for row in 0..n {
            self.multi_index(row, &mut mi);
            let ranges: Vec<(usize, usize)> = (0..d).map(|k| self.range(k, mi[k])).collect();
            for (k, &(lo, _)) in ranges.iter().enumerate() {
                cj[k] = lo;
            }
            'outer: loop {
                col_idx.push(self.linear_index(&cj) as u32);
                for k in 0..d {
                    if cj[k] < ranges[k].1 {
                        cj[k] += 1;
                        continue 'outer;
                    }
                    cj[k] = ranges[k].0;
                }
                break;
            }
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix::from_parts(n, n, row_ptr, col_idx, values)
    }
}
