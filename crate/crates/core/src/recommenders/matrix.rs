use std::collections::{BTreeMap, HashMap};

use crate::catalog::{ItemId, UserId};

/// Sparse user x item ratings with dense internal indices. Users and items are indexed in
/// ascending id order; rows and columns are sorted by index.
#[derive(Debug, Clone, Default)]
pub struct RatingMatrix {
    users: Vec<UserId>,
    items: Vec<ItemId>,
    user_index: HashMap<UserId, usize>,
    item_index: HashMap<ItemId, usize>,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    means: Vec<f64>,
}

impl RatingMatrix {
    /// Builds the matrix; a repeated (user, item) pair keeps the last rating seen.
    pub fn from_ratings(ratings: impl IntoIterator<Item = (UserId, ItemId, f64)>) -> Self {
        let mut cells: BTreeMap<(UserId, ItemId), f64> = BTreeMap::new();
        for (u, i, r) in ratings {
            cells.insert((u, i), r);
        }
        let mut users: Vec<UserId> = cells.keys().map(|k| k.0).collect();
        users.dedup();
        let mut items: Vec<ItemId> = cells.keys().map(|k| k.1).collect();
        items.sort_unstable();
        items.dedup();
        let user_index: HashMap<UserId, usize> = users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let item_index: HashMap<ItemId, usize> = items.iter().enumerate().map(|(i, &it)| (it, i)).collect();
        let mut rows = vec![Vec::new(); users.len()];
        let mut cols = vec![Vec::new(); items.len()];
        // keys iterate by (user, item) ascending, so rows and columns come out sorted
        for (&(u, i), &r) in &cells {
            let (ui, ii) = (user_index[&u], item_index[&i]);
            rows[ui].push((ii, r));
            cols[ii].push((ui, r));
        }
        let means = rows
            .iter()
            .map(|row: &Vec<(usize, f64)>| row.iter().map(|c| c.1).sum::<f64>() / row.len() as f64)
            .collect();
        Self { users, items, user_index, item_index, rows, cols, means }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_ratings(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn user_idx(&self, u: UserId) -> Option<usize> {
        self.user_index.get(&u).copied()
    }

    pub fn item_idx(&self, i: ItemId) -> Option<usize> {
        self.item_index.get(&i).copied()
    }

    pub fn user_mean(&self, u: UserId) -> Option<f64> {
        self.user_idx(u).map(|i| self.means[i])
    }

    pub fn rating(&self, u: UserId, i: ItemId) -> Option<f64> {
        let (ui, ii) = (self.user_idx(u)?, self.item_idx(i)?);
        let row = &self.rows[ui];
        row.binary_search_by_key(&ii, |c| c.0).ok().map(|p| row[p].1)
    }

    /// Ratings of user `u` as `(ItemId, rating)` in ascending item order.
    pub fn user_ratings(&self, u: UserId) -> Vec<(ItemId, f64)> {
        self.user_idx(u)
            .map(|ui| self.rows[ui].iter().map(|&(ii, r)| (self.items[ii], r)).collect())
            .unwrap_or_default()
    }

    pub(crate) fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub(crate) fn cols(&self) -> &[Vec<(usize, f64)>] {
        &self.cols
    }

    pub(crate) fn means(&self) -> &[f64] {
        &self.means
    }
}
