//! Level-set grids on the affine slice `C₁ = c₁` of a two-dimensional shape space.
//!
//! The slice is parametrized by `(μ₁, μ₂, μ₄)`, with `μ₃` solved from the
//! linear Casimir. Each node carries the shape-variable `C₂`, the collective
//! Hamiltonian (where defined) and `D = det(iKμ)`.

use rayon::prelude::*;

use crate::algebra::{casimir_det, collective_hamiltonian};
use crate::error::{Error, Result};
use crate::flow::{shape_casimirs, shape_circulations, Mu3Coords, TriangleShape};
use crate::reduction::CirculationMatrix;

/// Evenly spaced samples `start, …, end` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if n == 0 || !start.is_finite() || !end.is_finite() || (n > 1 && !(end > start)) {
            return Err(Error::Validation(format!("invalid grid axis {start}:{end}:{n}")));
        }
        Ok(Self { start, end, n })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.n == 1 {
            self.start
        } else if i + 1 == self.n {
            self.end
        } else {
            self.start + (self.end - self.start) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn step(&self) -> f64 {
        if self.n == 1 {
            0.0
        } else {
            (self.end - self.start) / (self.n - 1) as f64
        }
    }

    /// Cell index and fractional offset of `x`, if it lies inside the axis.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if self.n < 2 || !(x >= self.start && x <= self.end) {
            return None;
        }
        let u = (x - self.start) / self.step();
        let i = (u.floor() as usize).min(self.n - 2);
        Some((i, u - i as f64))
    }
}

/// Values of one grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetRow {
    pub mu1: f64,
    pub mu2: f64,
    pub mu4: f64,
    pub c2: f64,
    /// `None` where the collective Hamiltonian is undefined.
    pub h: Option<f64>,
    pub d: f64,
}

/// Node values stored by field, `μ₁` outermost and `μ₄` innermost.
#[derive(Debug, Clone)]
pub struct LevelSetGrid {
    pub c1: f64,
    pub axes: [Axis; 3],
    c2: Vec<f64>,
    /// NaN marks a missing value.
    h: Vec<f64>,
    d: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    C2,
    H,
    D,
}

impl LevelSetGrid {
    pub fn len(&self) -> usize {
        self.c2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c2.is_empty()
    }

    fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.axes[1].n + j) * self.axes[2].n + l
    }

    /// Row `r` in emission order.
    pub fn row(&self, r: usize) -> LevelSetRow {
        let n2 = self.axes[1].n * self.axes[2].n;
        let (i, j, l) = (r / n2, (r % n2) / self.axes[2].n, r % self.axes[2].n);
        let h = self.h[r];
        LevelSetRow {
            mu1: self.axes[0].value(i),
            mu2: self.axes[1].value(j),
            mu4: self.axes[2].value(l),
            c2: self.c2[r],
            h: (!h.is_nan()).then_some(h),
            d: self.d[r],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = LevelSetRow> + '_ {
        (0..self.len()).map(|r| self.row(r))
    }

    fn values(&self, field: Field) -> &[f64] {
        match field {
            Field::C2 => &self.c2,
            Field::H => &self.h,
            Field::D => &self.d,
        }
    }

    /// Trilinear interpolation; `None` outside the grid or next to a missing node.
    pub fn interpolate(&self, field: Field, mu1: f64, mu2: f64, mu4: f64) -> Option<f64> {
        let (i, a) = self.axes[0].locate(mu1)?;
        let (j, b) = self.axes[1].locate(mu2)?;
        let (l, c) = self.axes[2].locate(mu4)?;
        let v = self.values(field);
        let mut acc = 0.0;
        for (di, wi) in [(0, 1.0 - a), (1, a)] {
            for (dj, wj) in [(0, 1.0 - b), (1, b)] {
                for (dl, wl) in [(0, 1.0 - c), (1, c)] {
                    let x = v[self.index(i + di, j + dj, l + dl)];
                    if x.is_nan() {
                        return None;
                    }
                    acc += wi * wj * wl * x;
                }
            }
        }
        Some(acc)
    }
}

/// Solves `C₁(μ₁, μ₂, μ₃) = c₁` for `μ₃`.
pub fn solve_mu3(k: &CirculationMatrix, c1: f64, mu1: f64, mu2: f64) -> f64 {
    // C₁ = tr(iKμ) = -(K₁₁μ₂ + K₂₂μ₁ + 2K₁₂μ₃)
    -(c1 + k.entry(0, 0) * mu2 + k.entry(1, 1) * mu1) / (2.0 * k.entry(0, 1))
}

/// Evaluates `(C₂_shape, h, D)` on the `C₁ = c1` slice over the given axes.
pub fn levelset_slice(k: &CirculationMatrix, c1: f64, axes: [Axis; 3]) -> Result<LevelSetGrid> {
    let g = shape_circulations(k)?;
    if k.entry(0, 1) == 0.0 {
        return Err(Error::Degenerate(
            "Γ₁Γ₂ = 0: the linear Casimir does not determine μ₃".into(),
        ));
    }
    let inner = axes[1].n * axes[2].n;
    let total = axes[0].n * inner;
    let mut c2 = vec![0.0; total];
    let mut h = vec![0.0; total];
    let mut d = vec![0.0; total];
    c2.par_chunks_mut(inner)
        .zip(h.par_chunks_mut(inner))
        .zip(d.par_chunks_mut(inner))
        .enumerate()
        .try_for_each(|(i, ((c2s, hs), ds))| -> Result<()> {
            let mu1 = axes[0].value(i);
            for j in 0..axes[1].n {
                let mu2 = axes[1].value(j);
                let mu3 = solve_mu3(k, c1, mu1, mu2);
                for l in 0..axes[2].n {
                    let m = Mu3Coords::new(mu1, mu2, mu3, axes[2].value(l));
                    let mu = m.to_momentum();
                    let r = j * axes[2].n + l;
                    c2s[r] = shape_casimirs(&g, &TriangleShape::from(m))?.1;
                    hs[r] = collective_hamiltonian(k, &mu).unwrap_or(f64::NAN);
                    ds[r] = casimir_det(k, &mu)?;
                }
            }
            Ok(())
        })?;
    Ok(LevelSetGrid { c1, axes, c2, h, d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::casimir;
    use crate::reduction::circulation_matrix;
    use crate::vortex::CirculationVector;

    fn cm(g: &[f64]) -> CirculationMatrix {
        circulation_matrix(&CirculationVector::new(g.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn axis_values() {
        let a = Axis::new(1.0, 2.0, 5).unwrap();
        assert_eq!(a.value(0), 1.0);
        assert_eq!(a.value(4), 2.0);
        assert_eq!(a.value(2), 1.5);
        assert!(Axis::new(2.0, 1.0, 3).is_err());
        assert!(Axis::new(0.0, 1.0, 0).is_err());
        assert_eq!(Axis::new(3.0, 3.0, 1).unwrap().value(0), 3.0);
    }

    #[test]
    fn node_at_initial_state_reproduces_invariants() {
        let k = cm(&[5.0, 10.0, 15.0]);
        let m0 = Mu3Coords::new(445.0 / 9.0, 64.0 / 9.0, 88.0 / 9.0, -16.0);
        let c1 = 980.0 / 3.0;
        let axes = [
            Axis::new(m0.mu1 - 1.0, m0.mu1 + 1.0, 3).unwrap(),
            Axis::new(m0.mu2 - 1.0, m0.mu2 + 1.0, 3).unwrap(),
            Axis::new(m0.mu4 - 1.0, m0.mu4 + 1.0, 3).unwrap(),
        ];
        let grid = levelset_slice(&k, c1, axes).unwrap();
        let mid = grid.row(13);
        assert!((mid.mu1 - m0.mu1).abs() < 1e-13);
        let (_, c2) = shape_casimirs(&[5.0, 10.0, 15.0], &TriangleShape::from(m0)).unwrap();
        let h = collective_hamiltonian(&k, &m0.to_momentum()).unwrap();
        assert!((mid.c2 - c2).abs() <= 1e-12 * c2.abs());
        assert!((mid.h.unwrap() - h).abs() <= 1e-12 * h.abs());
        for row in grid.rows() {
            let mu3 = solve_mu3(&k, c1, row.mu1, row.mu2);
            let mu = Mu3Coords::new(row.mu1, row.mu2, mu3, row.mu4).to_momentum();
            assert!((casimir(&k, &mu, 1).unwrap() - c1).abs() <= 1e-10 * c1);
        }
    }

    #[test]
    fn missing_hamiltonian_is_marked() {
        let k = cm(&[5.0, 10.0, 15.0]);
        let axes = [
            Axis::new(-1.0, 1.0, 3).unwrap(),
            Axis::new(1.0, 2.0, 2).unwrap(),
            Axis::new(0.0, 1.0, 2).unwrap(),
        ];
        let grid = levelset_slice(&k, 10.0, axes).unwrap();
        assert!(grid.row(0).h.is_none());
        assert_eq!(grid.interpolate(Field::H, -0.5, 1.5, 0.5), None);
        assert!(grid.interpolate(Field::C2, -0.5, 1.5, 0.5).is_some());
    }

    #[test]
    fn interpolation_is_exact_for_trilinear_data() {
        let k = cm(&[5.0, 10.0, 15.0]);
        let axes = [
            Axis::new(1.0, 3.0, 4).unwrap(),
            Axis::new(1.0, 3.0, 4).unwrap(),
            Axis::new(-1.0, 1.0, 4).unwrap(),
        ];
        let mut grid = levelset_slice(&k, 10.0, axes).unwrap();
        for r in 0..grid.len() {
            let row = grid.row(r);
            grid.d[r] = 2.0 * row.mu1 - row.mu2 + 0.5 * row.mu4 + row.mu1 * row.mu4;
        }
        let v = grid.interpolate(Field::D, 1.7, 2.2, 0.3).unwrap();
        assert!((v - (3.4 - 2.2 + 0.15 + 1.7 * 0.3)).abs() < 1e-13);
        assert_eq!(grid.interpolate(Field::D, 0.0, 2.0, 0.0), None);
    }

    #[test]
    fn requires_two_dimensional_shape_space() {
        let k = cm(&[1.0, 2.0, 3.0, 4.0]);
        let a = Axis::new(0.0, 1.0, 2).unwrap();
        assert!(levelset_slice(&k, 1.0, [a, a, a]).is_err());
    }
}
