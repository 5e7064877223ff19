//! Dense brute-force KNN: all-pairs cosine similarities and full candidate scoring.

use popbias::catalog::{ItemId, UserId};
use popbias::recommenders::RatingMatrix;
use rand::Rng;

pub struct Dense {
    pub users: Vec<UserId>,
    pub items: Vec<ItemId>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Dense {
    pub fn random<R: Rng>(rng: &mut R) -> Dense {
        let nu = rng.gen_range(1..=8);
        let ni = rng.gen_range(1..=8);
        let users: Vec<UserId> = (0..nu).map(|u| UserId(10 + 3 * u as u64)).collect();
        let items: Vec<ItemId> = (0..ni).map(|i| ItemId(100 + 7 * i as u64)).collect();
        let mut cells = vec![vec![None; ni]; nu];
        for row in cells.iter_mut() {
            for c in row.iter_mut() {
                if rng.gen_bool(0.55) {
                    *c = Some(rng.gen_range(1..=10) as f64 / 2.0);
                }
            }
        }
        // every user and item needs at least one rating to exist in the sparse matrix
        for (u, row) in cells.iter_mut().enumerate() {
            if row.iter().all(Option::is_none) {
                row[u % ni] = Some(3.0);
            }
        }
        for i in 0..ni {
            if cells.iter().all(|row| row[i].is_none()) {
                cells[i % nu][i] = Some(4.0);
            }
        }
        Dense { users, items, cells }
    }

    pub fn sparse(&self) -> RatingMatrix {
        let mut v = Vec::new();
        for (u, row) in self.cells.iter().enumerate() {
            for (i, c) in row.iter().enumerate() {
                if let Some(r) = c {
                    v.push((self.users[u], self.items[i], *r));
                }
            }
        }
        RatingMatrix::from_ratings(v)
    }

    pub fn mean(&self, u: usize) -> f64 {
        let rs: Vec<f64> = self.cells[u].iter().flatten().copied().collect();
        rs.iter().sum::<f64>() / rs.len() as f64
    }

    fn centered(&self, u: usize, i: usize) -> Option<f64> {
        self.cells[u][i].map(|r| r - self.mean(u))
    }

    pub fn item_sim(&self, a: usize, b: usize) -> f64 {
        let nu = self.users.len();
        let norm = |i: usize| (0..nu).filter_map(|u| self.centered(u, i)).map(|x| x * x).sum::<f64>().sqrt();
        let mut dot = 0.0;
        for u in 0..nu {
            if let (Some(x), Some(y)) = (self.centered(u, a), self.centered(u, b)) {
                dot += x * y;
            }
        }
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 || dot == 0.0 {
            return 0.0;
        }
        dot / (na * nb)
    }

    pub fn user_sim(&self, a: usize, b: usize) -> f64 {
        let ni = self.items.len();
        let norm = |u: usize| (0..ni).filter_map(|i| self.centered(u, i)).map(|x| x * x).sum::<f64>().sqrt();
        let mut dot = 0.0;
        for i in 0..ni {
            if let (Some(x), Some(y)) = (self.centered(a, i), self.centered(b, i)) {
                dot += x * y;
            }
        }
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 || dot == 0.0 {
            return 0.0;
        }
        dot / (na * nb)
    }

    fn top(&self, n: usize, e: usize, k: usize, sim: impl Fn(usize, usize) -> f64) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> =
            (0..n).filter(|&o| o != e).map(|o| (o, sim(e, o))).filter(|p| p.1 > 0.0).collect();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }

    pub fn item_neighbors(&self, i: usize, k: usize) -> Vec<(ItemId, f64)> {
        self.top(self.items.len(), i, k, |a, b| self.item_sim(a, b))
            .into_iter()
            .map(|(o, s)| (self.items[o], s))
            .collect()
    }

    pub fn user_neighbors(&self, u: usize, k: usize) -> Vec<(UserId, f64)> {
        self.top(self.users.len(), u, k, |a, b| self.user_sim(a, b))
            .into_iter()
            .map(|(o, s)| (self.users[o], s))
            .collect()
    }

    fn rank(mut scored: Vec<(ItemId, f64)>, k: usize) -> Vec<ItemId> {
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.into_iter().take(k).map(|p| p.0).collect()
    }

    /// Item-based slate for user `u` with neighborhood size `nk`.
    pub fn item_knn_slate(&self, u: usize, nk: usize, k: usize) -> Vec<ItemId> {
        let mut scored = Vec::new();
        for c in 0..self.items.len() {
            if self.cells[u][c].is_some() {
                continue;
            }
            let nbrs = self.item_neighbors(c, nk);
            let (mut num, mut den, mut any) = (0.0, 0.0, false);
            // profile items in ascending id order
            for j in 0..self.items.len() {
                let Some(r) = self.cells[u][j] else { continue };
                if let Some(&(_, s)) = nbrs.iter().find(|n| n.0 == self.items[j]) {
                    num += s * r;
                    den += s.abs();
                    any = true;
                }
            }
            if any {
                scored.push((self.items[c], num / den));
            }
        }
        Self::rank(scored, k)
    }

    /// User-based slate for user `u` with neighborhood size `nk`.
    pub fn user_knn_slate(&self, u: usize, nk: usize, k: usize) -> Vec<ItemId> {
        let mut nbrs = self.user_neighbors(u, nk);
        nbrs.sort_by_key(|n| n.0);
        let mean_u = self.mean(u);
        let mut scored = Vec::new();
        for c in 0..self.items.len() {
            if self.cells[u][c].is_some() {
                continue;
            }
            let (mut num, mut den, mut any) = (0.0, 0.0, false);
            for &(v, s) in &nbrs {
                let vi = self.users.iter().position(|x| *x == v).unwrap();
                if let Some(r) = self.cells[vi][c] {
                    num += s * (r - self.mean(vi));
                    den += s.abs();
                    any = true;
                }
            }
            if any {
                scored.push((self.items[c], mean_u + num / den));
            }
        }
        Self::rank(scored, k)
    }
}
