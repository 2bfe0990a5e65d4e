//! Streaming moments with a deterministic, associative merge.

/// Count, means and co-moment matrix of a `K`-component sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<const K: usize> {
    pub count: u64,
    pub mean: [f64; K],
    pub comoment: [[f64; K]; K],
}

impl<const K: usize> Default for Moments<K> {
    fn default() -> Self {
        Self {
            count: 0,
            mean: [0.0; K],
            comoment: [[0.0; K]; K],
        }
    }
}

impl<const K: usize> Moments<K> {
    pub fn push(&mut self, x: &[f64; K]) {
        self.count += 1;
        let n = self.count as f64;
        let mut d = [0.0; K];
        for i in 0..K {
            d[i] = x[i] - self.mean[i];
            self.mean[i] += d[i] / n;
        }
        for i in 0..K {
            for j in 0..K {
                self.comoment[i][j] += d[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut d = [0.0; K];
        for i in 0..K {
            d[i] = other.mean[i] - self.mean[i];
        }
        for i in 0..K {
            for j in 0..K {
                self.comoment[i][j] += other.comoment[i][j] + d[i] * d[j] * na * nb / n;
            }
        }
        for i in 0..K {
            self.mean[i] += d[i] * nb / n;
        }
        self.count += other.count;
    }

    /// Sample covariance (n−1 denominator).
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.comoment[i][j] / (self.count - 1) as f64
        }
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i).max(0.0)
    }

    pub fn stderr(&self, i: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance(i) / self.count as f64).sqrt()
        }
    }
}

/// Raw power sums for a block of samples; converted to [`Moments`] once per block.
#[derive(Clone, Debug)]
pub struct RawSums<const K: usize> {
    pub count: u64,
    pub sum: [f64; K],
    pub prod: [[f64; K]; K],
}

impl<const K: usize> Default for RawSums<K> {
    fn default() -> Self {
        Self {
            count: 0,
            sum: [0.0; K],
            prod: [[0.0; K]; K],
        }
    }
}

impl<const K: usize> RawSums<K> {
    pub fn add(&mut self, x: &[f64; K]) {
        for i in 0..K {
            self.sum[i] += x[i];
            for j in i..K {
                self.prod[i][j] += x[i] * x[j];
            }
        }
    }

    /// Moments over `count` samples, the ones never `add`ed being all zero.
    pub fn to_moments(&self, count: u64) -> Moments<K> {
        let mut m = Moments::<K> {
            count,
            ..Default::default()
        };
        if count == 0 {
            return m;
        }
        let n = count as f64;
        for i in 0..K {
            m.mean[i] = self.sum[i] / n;
        }
        for i in 0..K {
            for j in i..K {
                let c = self.prod[i][j] - n * m.mean[i] * m.mean[j];
                m.comoment[i][j] = c;
                m.comoment[j][i] = c;
            }
        }
        m
    }
}
