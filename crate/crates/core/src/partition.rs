//! Inner-product (column/row block) and outer-product (row/column block)
//! partitions of the two input matrices.

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// `A = [A_1 .. A_p]` by columns, `B = [B_1; ..; B_p]` by rows, so
/// `AB = Σ_j A_j B_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerPartition {
    pub blocks_a: Vec<ComplexMatrix>,
    pub blocks_b: Vec<ComplexMatrix>,
}

/// `A = [A_1; ..; A_m]` by rows, `B = [B_1 .. B_n]` by columns, so
/// `(AB)_{jj'} = A_j B_{j'}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterPartition {
    pub blocks_a: Vec<ComplexMatrix>,
    pub blocks_b: Vec<ComplexMatrix>,
}

fn check_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::mismatch(a.shape(), b.shape()));
    }
    Ok(())
}

fn check_divides(dim: &'static str, size: usize, parts: usize) -> Result<()> {
    if parts == 0 || !size.is_multiple_of(parts) {
        return Err(Error::NotDivisible { dim, size, parts });
    }
    Ok(())
}

pub fn split_inner(a: &ComplexMatrix, b: &ComplexMatrix, p: usize) -> Result<InnerPartition> {
    check_inner(a, b)?;
    let s = a.cols();
    check_divides("s", s, p)?;
    let w = s / p;
    Ok(InnerPartition {
        blocks_a: (0..p).map(|j| a.block(0, j * w, a.rows(), w)).collect(),
        blocks_b: (0..p).map(|j| b.block(j * w, 0, w, b.cols())).collect(),
    })
}

pub fn split_outer(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    m: usize,
    n: usize,
) -> Result<OuterPartition> {
    check_inner(a, b)?;
    check_divides("t", a.rows(), m)?;
    check_divides("r", b.cols(), n)?;
    let h = a.rows() / m;
    let w = b.cols() / n;
    Ok(OuterPartition {
        blocks_a: (0..m).map(|j| a.block(j * h, 0, h, a.cols())).collect(),
        blocks_b: (0..n).map(|j| b.block(0, j * w, b.rows(), w)).collect(),
    })
}

impl InnerPartition {
    pub fn p(&self) -> usize {
        self.blocks_a.len()
    }

    /// Concatenates the blocks back into `(A, B)`.
    pub fn reassemble(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let row = vec![self.blocks_a.clone()];
        let col: Vec<Vec<ComplexMatrix>> = self.blocks_b.iter().map(|b| vec![b.clone()]).collect();
        Ok((assemble_outer(&row)?, assemble_outer(&col)?))
    }
}

impl OuterPartition {
    pub fn m(&self) -> usize {
        self.blocks_a.len()
    }

    pub fn n(&self) -> usize {
        self.blocks_b.len()
    }

    pub fn reassemble(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let col: Vec<Vec<ComplexMatrix>> = self.blocks_a.iter().map(|a| vec![a.clone()]).collect();
        let row = vec![self.blocks_b.clone()];
        Ok((assemble_outer(&col)?, assemble_outer(&row)?))
    }
}

/// Concatenates a rectangular grid of blocks, `grid[i][j]` landing in block
/// row `i`, block column `j`.
pub fn assemble_outer(grid: &[Vec<ComplexMatrix>]) -> Result<ComplexMatrix> {
    let n_cols = grid.first().map(Vec::len).unwrap_or(0);
    if grid.is_empty() || n_cols == 0 {
        return Err(Error::RaggedGrid("empty grid".into()));
    }
    if let Some(i) = grid.iter().position(|row| row.len() != n_cols) {
        return Err(Error::RaggedGrid(format!(
            "block row {i} has {} blocks, expected {n_cols}",
            grid[i].len()
        )));
    }
    let heights: Vec<usize> = grid.iter().map(|row| row[0].rows()).collect();
    let widths: Vec<usize> = grid[0].iter().map(|b| b.cols()).collect();
    for (i, row) in grid.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            if b.rows() != heights[i] || b.cols() != widths[j] {
                return Err(Error::RaggedGrid(format!(
                    "block ({i}, {j}) is {}x{}, expected {}x{}",
                    b.rows(),
                    b.cols(),
                    heights[i],
                    widths[j]
                )));
            }
        }
    }
    let mut out = ComplexMatrix::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in grid.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            out.set_block(r0, c0, b);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    Ok(out)
}
