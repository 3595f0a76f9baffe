//! Banded Gaussian elimination with partial pivoting.

/// Square matrix with `kl` sub- and `ku` super-diagonals. Storage leaves room
/// for the `kl` extra super-diagonals created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    a: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Self { n, kl, ku, w, a: vec![0.0; n * w] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.w + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.a[self.slot(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)`; panics outside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.a[s] += v;
    }

    /// `A x` using the declared band.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A x = b`, consuming the matrix. Returns `None` on a zero pivot.
    pub fn solve(self, b: Vec<f64>) -> Option<Vec<f64>> {
        self.factor().map(|lu| lu.solve(b))
    }

    /// LU factorization with partial pivoting. Returns `None` on a zero pivot.
    pub fn factor(mut self) -> Option<BandLu> {
        let n = self.n;
        let (kl, reach) = (self.kl, self.ku + self.kl);
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv = vec![0usize; n];
        for c in 0..n {
            let last = (c + kl).min(n - 1);
            let mut p = c;
            let mut best = self.a[self.slot(c, c)].abs();
            for r in c + 1..=last {
                let v = self.a[self.slot(r, c)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > scale * 1e-300) {
                return None;
            }
            piv[c] = p;
            let right = (c + reach).min(n - 1);
            if p != c {
                for j in c..=right {
                    let (s1, s2) = (self.slot(c, j), self.slot(p, j));
                    self.a.swap(s1, s2);
                }
            }
            let d = self.a[self.slot(c, c)];
            for r in c + 1..=last {
                let s = self.slot(r, c);
                let l = self.a[s] / d;
                // The multiplier is kept in the freed sub-diagonal slot.
                self.a[s] = l;
                if l == 0.0 {
                    continue;
                }
                for j in c + 1..=right {
                    let (sr, sc) = (self.slot(r, j), self.slot(c, j));
                    self.a[sr] -= l * self.a[sc];
                }
            }
        }
        Some(BandLu { m: self, piv })
    }
}

/// Factors produced by [`BandMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let (kl, reach) = (m.kl, m.ku + m.kl);
        for c in 0..n {
            b.swap(c, self.piv[c]);
            let last = (c + kl).min(n - 1);
            for r in c + 1..=last {
                b[r] -= m.a[m.slot(r, c)] * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let right = (i + reach).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=right {
                acc -= m.a[m.slot(i, j)] * x[j];
            }
            x[i] = acc / m.a[m.slot(i, i)];
        }
        x
    }
}
