//! Neighborhood collaborative filtering on mean-centered ratings.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{rank_scores, RatingMatrix, Slate};
use crate::catalog::{ItemId, UserId};

pub const DEFAULT_NEIGHBORS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnMode {
    Item,
    User,
}

/// Top-K positive cosine neighbors per entity (item or user, by `mode`), indexed like the
/// matrix the model was built from.
#[derive(Debug, Clone)]
pub struct KnnModel {
    pub mode: KnnMode,
    pub k: usize,
    ids: Vec<u64>,
    index: HashMap<u64, usize>,
    neighbors: Vec<Vec<(usize, f64)>>,
    /// For item mode: item j -> every (c, sim) with j among c's neighbors, ascending c.
    reverse: Vec<Vec<(usize, f64)>>,
}

impl KnnModel {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Neighbors of the entity with raw id `id`, by descending similarity.
    pub fn neighbors(&self, id: u64) -> Option<Vec<(u64, f64)>> {
        let i = *self.index.get(&id)?;
        Some(self.neighbors[i].iter().map(|&(j, s)| (self.ids[j], s)).collect())
    }

    pub fn item_neighbors(&self, item: ItemId) -> Option<Vec<(ItemId, f64)>> {
        self.neighbors(item.0).map(|v| v.into_iter().map(|(j, s)| (ItemId(j), s)).collect())
    }

    pub fn user_neighbors(&self, user: UserId) -> Option<Vec<(UserId, f64)>> {
        self.neighbors(user.0).map(|v| v.into_iter().map(|(j, s)| (UserId(j), s)).collect())
    }
}

/// Cosine similarities of each entity against all others, keeping the top `k` positive ones.
///
/// `vectors[e]` is entity e's centered vector as `(dim, value)` sorted by dim; `by_dim[d]`
/// lists `(entity, value)` sorted by entity. Dot products for a pair are accumulated in
/// ascending dim order. With `targets`, only those entities get neighbor lists.
fn top_neighbors(
    vectors: &[Vec<(usize, f64)>],
    by_dim: &[Vec<(usize, f64)>],
    k: usize,
    targets: Option<&[bool]>,
) -> Vec<Vec<(usize, f64)>> {
    let norms: Vec<f64> = vectors.iter().map(|v| v.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt()).collect();
    let n = vectors.len();
    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], vec![false; n], Vec::<usize>::new()),
            |(acc, marked, touched), e| {
                if norms[e] == 0.0 || targets.is_some_and(|t| !t[e]) {
                    return Vec::new();
                }
                for &(d, x) in &vectors[e] {
                    for &(other, y) in &by_dim[d] {
                        if other == e {
                            continue;
                        }
                        if !marked[other] {
                            marked[other] = true;
                            touched.push(other);
                        }
                        acc[other] += x * y;
                    }
                }
                let mut out: Vec<(usize, f64)> = Vec::new();
                for &o in touched.iter() {
                    if norms[o] > 0.0 {
                        let s = acc[o] / (norms[e] * norms[o]);
                        if s > 0.0 {
                            out.push((o, s));
                        }
                    }
                    acc[o] = 0.0;
                    marked[o] = false;
                }
                touched.clear();
                sort_neighbors(&mut out);
                out.truncate(k);
                out
            },
        )
        .collect()
}

fn sort_neighbors(v: &mut [(usize, f64)]) {
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
}

fn centered_rows(m: &RatingMatrix) -> Vec<Vec<(usize, f64)>> {
    m.rows().iter().zip(m.means()).map(|(row, mu)| row.iter().map(|&(i, r)| (i, r - mu)).collect()).collect()
}

fn centered_cols(m: &RatingMatrix) -> Vec<Vec<(usize, f64)>> {
    let means = m.means();
    m.cols().iter().map(|col| col.iter().map(|&(u, r)| (u, r - means[u])).collect()).collect()
}

fn model(mode: KnnMode, k: usize, ids: Vec<u64>, neighbors: Vec<Vec<(usize, f64)>>) -> KnnModel {
    let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut reverse = vec![Vec::new(); if mode == KnnMode::Item { ids.len() } else { 0 }];
    if mode == KnnMode::Item {
        for (c, list) in neighbors.iter().enumerate() {
            for &(j, s) in list {
                reverse[j].push((c, s));
            }
        }
    }
    KnnModel { mode, k, ids, index, neighbors, reverse }
}

/// Item-item cosine over users, on ratings centered by each user's mean.
pub fn build_item_knn(matrix: &RatingMatrix, k: usize) -> KnnModel {
    let cols = centered_cols(matrix);
    let rows = centered_rows(matrix);
    let neighbors = top_neighbors(&cols, &rows, k, None);
    model(KnnMode::Item, k, matrix.items().iter().map(|i| i.0).collect(), neighbors)
}

/// User-user cosine over items, on ratings centered by each user's mean.
pub fn build_user_knn(matrix: &RatingMatrix, k: usize) -> KnnModel {
    build_user_knn_inner(matrix, k, None)
}

/// As [`build_user_knn`], but only `users` get neighbor lists (every matrix user can still be
/// a neighbor). Other users get empty lists and therefore empty slates.
pub fn build_user_knn_for(matrix: &RatingMatrix, k: usize, users: &[UserId]) -> KnnModel {
    let mut mask = vec![false; matrix.n_users()];
    for u in users {
        if let Some(i) = matrix.user_idx(*u) {
            mask[i] = true;
        }
    }
    build_user_knn_inner(matrix, k, Some(&mask))
}

fn build_user_knn_inner(matrix: &RatingMatrix, k: usize, mask: Option<&[bool]>) -> KnnModel {
    let rows = centered_rows(matrix);
    let cols = centered_cols(matrix);
    let neighbors = top_neighbors(&rows, &cols, k, mask);
    model(KnnMode::User, k, matrix.users().iter().map(|u| u.0).collect(), neighbors)
}

fn dedup_profile(profile: &[(ItemId, f64)]) -> BTreeMap<ItemId, f64> {
    profile.iter().copied().collect()
}

/// Scores unseen items `c` by `sum sim(c, j) * r_j / sum |sim(c, j)|` over profile items `j`
/// among c's neighbors.
pub fn recommend_item_knn(model: &KnnModel, matrix: &RatingMatrix, profile: &[(ItemId, f64)], k: usize) -> Slate {
    assert_eq!(model.mode, KnnMode::Item, "item-based model required");
    let seen = dedup_profile(profile);
    let mut num: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (&item, &r) in &seen {
        let Some(j) = matrix.item_idx(item) else { continue };
        for &(c, s) in &model.reverse[j] {
            let e = num.entry(c).or_insert((0.0, 0.0));
            e.0 += s * r;
            e.1 += s.abs();
        }
    }
    let scored =
        num.into_iter().map(|(c, (n, d))| (matrix.items()[c], n / d)).filter(|(item, _)| !seen.contains_key(item));
    Slate::new(rank_scores(scored, k), k)
}

/// Scores unseen items by the user's mean plus the similarity-weighted mean deviation of
/// neighbors who rated them. A user outside the model gets an empty slate.
pub fn recommend_user_knn(
    model: &KnnModel,
    matrix: &RatingMatrix,
    user: UserId,
    profile: &[(ItemId, f64)],
    k: usize,
) -> Slate {
    assert_eq!(model.mode, KnnMode::User, "user-based model required");
    let seen = dedup_profile(profile);
    let Some(ui) = model.index.get(&user.0).copied() else {
        return Slate::new(Vec::new(), k);
    };
    let mean_u = if seen.is_empty() { matrix.means()[ui] } else { seen.values().sum::<f64>() / seen.len() as f64 };
    let mut nbrs = model.neighbors[ui].clone();
    nbrs.sort_by_key(|n| n.0);
    let mut acc: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (v, s) in nbrs {
        let mean_v = matrix.means()[v];
        for &(c, r) in &matrix.rows()[v] {
            let e = acc.entry(c).or_insert((0.0, 0.0));
            e.0 += s * (r - mean_v);
            e.1 += s.abs();
        }
    }
    let scored = acc
        .into_iter()
        .map(|(c, (n, d))| (matrix.items()[c], mean_u + n / d))
        .filter(|(item, _)| !seen.contains_key(item));
    Slate::new(rank_scores(scored, k), k)
}
