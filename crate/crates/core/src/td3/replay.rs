use ndarray::{Array1, Array2};
use rand::Rng;

/// One stored experience, with observations as the networks see them.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub s: Array2<f64>,
    pub a: Array2<f64>,
    pub r: Array1<f64>,
    pub s_next: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub done: Array1<f64>,
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Ring buffer of transitions in flat storage; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    s: Vec<f64>,
    a: Vec<f64>,
    r: Vec<f64>,
    s_next: Vec<f64>,
    done: Vec<bool>,
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            state_dim,
            action_dim,
            s: Vec::new(),
            a: Vec::new(),
            r: Vec::new(),
            s_next: Vec::new(),
            done: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Slot the next push writes to.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, t: Transition) {
        assert_eq!(t.s.len(), self.state_dim, "state dimension");
        assert_eq!(t.s_next.len(), self.state_dim, "next-state dimension");
        assert_eq!(t.a.len(), self.action_dim, "action dimension");
        if self.len() < self.capacity {
            self.s.extend_from_slice(&t.s);
            self.a.extend_from_slice(&t.a);
            self.s_next.extend_from_slice(&t.s_next);
            self.r.push(t.r);
            self.done.push(t.terminal);
        } else {
            let i = self.cursor;
            let (sd, ad) = (self.state_dim, self.action_dim);
            self.s[i * sd..(i + 1) * sd].copy_from_slice(&t.s);
            self.a[i * ad..(i + 1) * ad].copy_from_slice(&t.a);
            self.s_next[i * sd..(i + 1) * sd].copy_from_slice(&t.s_next);
            self.r[i] = t.r;
            self.done[i] = t.terminal;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Transition {
        let (sd, ad) = (self.state_dim, self.action_dim);
        Transition {
            s: self.s[i * sd..(i + 1) * sd].to_vec(),
            a: self.a[i * ad..(i + 1) * ad].to_vec(),
            r: self.r[i],
            s_next: self.s_next[i * sd..(i + 1) * sd].to_vec(),
            terminal: self.done[i],
        }
    }

    /// Uniform mini-batch, without replacement within the batch.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Batch {
        let n = batch_size.min(self.len());
        let indices = rand::seq::index::sample(rng, self.len(), n).into_vec();
        let (sd, ad) = (self.state_dim, self.action_dim);
        let mut s = Array2::zeros((n, sd));
        let mut a = Array2::zeros((n, ad));
        let mut s_next = Array2::zeros((n, sd));
        let mut r = Array1::zeros(n);
        let mut done = Array1::zeros(n);
        for (row, &i) in indices.iter().enumerate() {
            s.row_mut(row)
                .iter_mut()
                .zip(&self.s[i * sd..(i + 1) * sd])
                .for_each(|(d, v)| *d = *v);
            a.row_mut(row)
                .iter_mut()
                .zip(&self.a[i * ad..(i + 1) * ad])
                .for_each(|(d, v)| *d = *v);
            s_next
                .row_mut(row)
                .iter_mut()
                .zip(&self.s_next[i * sd..(i + 1) * sd])
                .for_each(|(d, v)| *d = *v);
            r[row] = self.r[i];
            done[row] = if self.done[i] { 1.0 } else { 0.0 };
        }
        Batch {
            s,
            a,
            r,
            s_next,
            done,
            indices,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(v: f64) -> Transition {
        Transition {
            s: vec![v, v],
            a: vec![v],
            r: v,
            s_next: vec![v + 1.0, v + 1.0],
            terminal: v as i64 % 2 == 0,
        }
    }

    #[test]
    fn oldest_overwritten_first() {
        let mut m = ReplayMemory::new(3, 2, 1);
        for i in 0..5 {
            m.push(t(i as f64));
        }
        assert_eq!(m.len(), 3);
        let rs: Vec<f64> = (0..3).map(|i| m.get(i).r).collect();
        assert_eq!(rs, vec![3.0, 4.0, 2.0]);
        assert_eq!(m.cursor(), 2);
    }

    #[test]
    fn batch_has_distinct_indices_and_matching_rows() {
        let mut m = ReplayMemory::new(100, 2, 1);
        for i in 0..50 {
            m.push(t(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = m.sample(20, &mut rng);
        let mut idx = b.indices.clone();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 20);
        for (row, &i) in b.indices.iter().enumerate() {
            let tr = m.get(i);
            assert_eq!(b.r[row], tr.r);
            assert_eq!(b.s[[row, 1]], tr.s[1]);
            assert_eq!(b.s_next[[row, 0]], tr.s_next[0]);
            assert_eq!(b.done[row], if tr.terminal { 1.0 } else { 0.0 });
        }
    }
}
