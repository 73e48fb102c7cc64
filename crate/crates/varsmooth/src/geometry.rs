//! Dyadic cubes on the unit box, concentric boxes and annular shells.

/// Open dyadic cube of side `2^-level` with lower corner `index * 2^-level`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub level: u32,
    pub index: Vec<i64>,
}

/// Axis-aligned box given by its lower corner and side lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub sides: Vec<f64>,
}

/// `Q_{k,m} x (2^-k B^d \ 2^-(k+1) B^d)`, the shell attached to a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub base: DyadicCube,
    pub codim: usize,
}

impl DyadicCube {
    pub fn new(level: u32, index: Vec<i64>) -> Self {
        Self { level, index }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn measure(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.index.iter().map(|&m| (m as f64 + 0.5) * s).collect()
    }

    /// Number of cells per axis at this level.
    pub fn cells_per_axis(&self) -> i64 {
        1i64 << self.level
    }

    /// True when the cube lies in the unit box.
    pub fn in_domain(&self) -> bool {
        let n = self.cells_per_axis();
        self.index.iter().all(|&m| (0..n).contains(&m))
    }

    /// Membership in the half-open cube `prod [m_i 2^-k, (m_i+1) 2^-k)`.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        let s = self.side();
        self.index
            .iter()
            .zip(x)
            .all(|(&m, &xi)| (xi / s).floor() as i64 == m)
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && ancestor(other, self.level) == *self
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                let index = self
                    .index
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| 2 * m + ((mask >> i) & 1) as i64)
                    .collect();
                DyadicCube::new(self.level + 1, index)
            })
            .collect()
    }

    /// Cube of the half-open tiling at `level` containing `x`.
    pub fn containing(x: &[f64], level: u32) -> Self {
        let scale = (level as f64).exp2();
        DyadicCube::new(level, x.iter().map(|&xi| (xi * scale).floor() as i64).collect())
    }
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, sides: Vec<f64>) -> Self {
        debug_assert!(sides.iter().all(|&s| s > 0.0));
        Self { lower, sides }
    }

    pub fn unit(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![1.0; n])
    }

    /// Cube `center + half * I^n`.
    pub fn centered(center: &[f64], half: f64) -> Self {
        Self::new(center.iter().map(|c| c - half).collect(), vec![2.0 * half; center.len()])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.sides).map(|(a, s)| a + s).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.sides).map(|(a, s)| a + 0.5 * s).collect()
    }

    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    /// Intersection with the unit box, `None` when it has empty interior.
    pub fn clip_unit(&self) -> Option<AxisBox> {
        let mut lower = Vec::with_capacity(self.dim());
        let mut sides = Vec::with_capacity(self.dim());
        for (a, s) in self.lower.iter().zip(&self.sides) {
            let lo = a.max(0.0);
            let hi = (a + s).min(1.0);
            if hi <= lo {
                return None;
            }
            lower.push(lo);
            sides.push(hi - lo);
        }
        Some(AxisBox { lower, sides })
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        let up = self.upper();
        let oup = other.upper();
        (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && oup[i] <= up[i])
    }
}

impl Shell {
    pub fn new(base: DyadicCube, codim: usize) -> Self {
        Self { base, codim }
    }

    /// Inner and outer radius of the annulus.
    pub fn radii(&self) -> (f64, f64) {
        let s = self.base.side();
        (0.5 * s, s)
    }
}

/// Box concentric with `c` with side `dilation * 2^-k`.
pub fn cube_box(c: &DyadicCube, dilation: f64) -> AxisBox {
    let side = dilation * c.side();
    AxisBox::centered(&c.center(), 0.5 * side)
}

/// Coarser cube at level `j <= c.level` containing `c`.
pub fn ancestor(c: &DyadicCube, j: u32) -> DyadicCube {
    assert!(j <= c.level, "ancestor level above cube level");
    let shift = c.level - j;
    DyadicCube::new(j, c.index.iter().map(|&m| m >> shift).collect())
}

/// Same-level cubes with `|m_i - m'_i| <= 1` that meet the unit box, self included.
pub fn neighbors(c: &DyadicCube) -> Vec<DyadicCube> {
    let n = c.dim();
    let side = c.cells_per_axis();
    let mut out = Vec::with_capacity(3usize.pow(n as u32));
    for code in 0..3usize.pow(n as u32) {
        let mut rest = code;
        let mut index = Vec::with_capacity(n);
        let mut ok = true;
        for &m in &c.index {
            let off = (rest % 3) as i64 - 1;
            rest /= 3;
            let mi = m + off;
            if !(0..side).contains(&mi) {
                ok = false;
            }
            index.push(mi);
        }
        if ok {
            out.push(DyadicCube::new(c.level, index));
        }
    }
    out
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * ball_volume(d - 2),
    }
}

/// Exact Lebesgue measure of the shell.
pub fn shell_measure(s: &Shell) -> f64 {
    let k = s.base.level as i32;
    let d = s.codim as i32;
    let outer = (-(k * d) as f64).exp2();
    let inner = (-((k + 1) * d) as f64).exp2();
    s.base.measure() * ball_volume(s.codim) * (outer - inner)
}

/// All cubes of level `k` inside the unit box, row-major with the last axis fastest.
pub fn cubes_at_level(n: usize, k: u32) -> Vec<DyadicCube> {
    let side = 1i64 << k;
    let total = (side as usize).pow(n as u32);
    (0..total)
        .map(|flat| DyadicCube::new(k, unflatten(flat, side, n)))
        .collect()
}

/// Row-major multi-index of `flat` on a grid with `side` cells per axis.
pub fn unflatten(mut flat: usize, side: i64, n: usize) -> Vec<i64> {
    let mut idx = vec![0i64; n];
    for i in (0..n).rev() {
        idx[i] = (flat % side as usize) as i64;
        flat /= side as usize;
    }
    idx
}

/// Inverse of [`unflatten`]; caller guarantees the index is in range.
pub fn flatten(idx: &[i64], side: i64) -> usize {
    idx.iter().fold(0usize, |acc, &m| acc * side as usize + m as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_box_examples() {
        let b = cube_box(&DyadicCube::new(0, vec![0, 0]), 1.0);
        assert_eq!(b.lower, vec![0.0, 0.0]);
        assert_eq!(b.sides, vec![1.0, 1.0]);
        let b = cube_box(&DyadicCube::new(1, vec![1, 0]), 1.0);
        assert_eq!(b.lower, vec![0.5, 0.0]);
        assert_eq!(b.upper(), vec![1.0, 0.5]);
        let b = cube_box(&DyadicCube::new(1, vec![0]), 3.0);
        assert_eq!(b.center(), vec![0.25]);
        assert_eq!(b.sides, vec![1.5]);
    }

    #[test]
    fn ancestor_examples() {
        assert_eq!(ancestor(&DyadicCube::new(2, vec![3]), 1), DyadicCube::new(1, vec![1]));
        let c = DyadicCube::new(3, vec![5, 2]);
        assert_eq!(ancestor(&c, 3), c);
        assert_eq!(ancestor(&DyadicCube::new(4, vec![13]), 0), DyadicCube::new(0, vec![0]));
    }

    #[test]
    fn neighbor_counts() {
        assert_eq!(neighbors(&DyadicCube::new(3, vec![4])).len(), 3);
        assert_eq!(neighbors(&DyadicCube::new(3, vec![4, 2])).len(), 9);
        let nb = neighbors(&DyadicCube::new(1, vec![0]));
        assert_eq!(nb, vec![DyadicCube::new(1, vec![0]), DyadicCube::new(1, vec![1])]);
    }

    #[test]
    fn shell_measures() {
        let m = |n: usize, d: usize, k: u32| shell_measure(&Shell::new(DyadicCube::new(k, vec![0; n]), d));
        assert_eq!(m(1, 1, 0), 1.0);
        assert_eq!(m(1, 1, 2), 1.0 / 16.0);
        assert_eq!(m(2, 1, 1), 1.0 / 8.0);
        for (n, d) in [(1, 1), (1, 2), (2, 1), (2, 3)] {
            for k in 0..5 {
                let ratio = m(n, d, k) / m(n, d, k + 1);
                assert_eq!(ratio, (1u64 << (n + d)) as f64);
            }
        }
    }

    #[test]
    fn tiling_is_unique() {
        for k in 0..4 {
            let cubes = cubes_at_level(2, k);
            for i in 0..17 {
                for j in 0..17 {
                    let x = [i as f64 / 17.0, j as f64 / 16.0 * 0.999];
                    assert_eq!(cubes.iter().filter(|c| c.contains_point(&x)).count(), 1);
                }
            }
        }
    }

    #[test]
    fn flatten_roundtrip() {
        for flat in 0..64 {
            assert_eq!(flatten(&unflatten(flat, 4, 3), 4), flat);
        }
    }
}
