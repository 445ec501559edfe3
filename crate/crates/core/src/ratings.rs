//! User–item ratings ingestion and low-rank completion by alternating least squares.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating<T> {
    pub user: usize,
    pub item: usize,
    pub value: T,
}

/// Sparse ratings with dense 0-based indices.
///
/// `user_ids[i]` / `item_ids[j]` hold the raw labels from the input, in order of
/// first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable<T> {
    pub num_users: usize,
    pub num_items: usize,
    pub entries: Vec<Rating<T>>,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
}

impl<T: Scalar> RatingsTable<T> {
    /// Table over already-dense indices; labels are the indices themselves.
    pub fn from_entries(num_users: usize, num_items: usize, entries: Vec<Rating<T>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NoRatings);
        }
        let mut seen = std::collections::HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.user >= num_users || e.item >= num_items {
                return Err(Error::InvalidArgument(format!(
                    "rating ({}, {}) out of range",
                    e.user, e.item
                )));
            }
            if !seen.insert((e.user, e.item)) {
                return Err(Error::DuplicateRating {
                    user: e.user.to_string(),
                    item: e.item.to_string(),
                    line: i as u64 + 1,
                });
            }
        }
        Ok(Self {
            num_users,
            num_items,
            entries,
            user_ids: (0..num_users).map(|i| i.to_string()).collect(),
            item_ids: (0..num_items).map(|i| i.to_string()).collect(),
        })
    }

    /// Parses CSV with header `user,item,rating`.
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["user", "item", "rating"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `user,item,rating`, got `{}`", cols.join(",")),
            });
        }
        let mut user_idx: HashMap<String, usize> = HashMap::new();
        let mut item_idx: HashMap<String, usize> = HashMap::new();
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut seen = HashMap::new();
        let mut entries = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Parse {
                    line,
                    message: e.to_string(),
                }
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 3 fields, got {}", record.len()),
                });
            }
            let (u, i, r) = (&record[0], &record[1], &record[2]);
            let value: f64 = r.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad rating `{r}`"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite rating `{r}`"),
                });
            }
            let user = *user_idx.entry(u.to_string()).or_insert_with(|| {
                user_ids.push(u.to_string());
                user_ids.len() - 1
            });
            let item = *item_idx.entry(i.to_string()).or_insert_with(|| {
                item_ids.push(i.to_string());
                item_ids.len() - 1
            });
            if seen.insert((user, item), line).is_some() {
                return Err(Error::DuplicateRating {
                    user: u.to_string(),
                    item: i.to_string(),
                    line,
                });
            }
            entries.push(Rating {
                user,
                item,
                value: T::lit(value),
            });
        }
        if entries.is_empty() {
            return Err(Error::NoRatings);
        }
        Ok(Self {
            num_users: user_ids.len(),
            num_items: item_ids.len(),
            entries,
            user_ids,
            item_ids,
        })
    }
}

pub fn load_ratings<T: Scalar>(path: impl AsRef<Path>) -> Result<RatingsTable<T>> {
    let file = std::fs::File::open(path)?;
    RatingsTable::from_reader(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    pub rank: usize,
    /// Ridge penalty `μ` on both factor matrices.
    pub reg: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            rank: 10,
            reg: 0.1,
            iters: 50,
            seed: 0,
        }
    }
}

/// Dense completion of a ratings table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedMatrix<T> {
    /// `num_items x num_users`; row `j` holds every user's rating for item `j`.
    pub values: Matrix<T>,
    pub rank: usize,
    /// `num_items x rank`; the rows are the item features.
    pub item_factors: Matrix<T>,
    pub user_factors: Matrix<T>,
    /// Objective after initialization and after every iteration.
    pub objective_history: Vec<T>,
}

impl<T: Scalar> CompletedMatrix<T> {
    /// Largest absolute residual on the observed entries.
    pub fn observed_fit_error(&self, table: &RatingsTable<T>) -> T {
        table
            .entries
            .iter()
            .fold(T::zero(), |m, e| m.max((self.values[(e.item, e.user)] - e.value).abs()))
    }

    /// `sum ||u_i||^2 + sum ||m_j||^2`
    pub fn factor_norm_sq(&self) -> T {
        let sq = |m: &Matrix<T>| m.as_slice().iter().map(|&x| x * x).sum::<T>();
        sq(&self.item_factors) + sq(&self.user_factors)
    }
}

/// `sum_observed (r - u_i . m_j)^2 + μ (sum ||u_i||^2 + sum ||m_j||^2)`
pub fn als_objective<T: Scalar>(table: &RatingsTable<T>, users: &Matrix<T>, items: &Matrix<T>, reg: T) -> T {
    let fit: T = table
        .entries
        .iter()
        .map(|e| {
            let d = e.value - dot(users.row(e.user), items.row(e.item));
            d * d
        })
        .sum();
    let sq = |m: &Matrix<T>| m.as_slice().iter().map(|&x| x * x).sum::<T>();
    fit + reg * (sq(users) + sq(items))
}

/// Low-rank completion by alternating ridge solves.
///
/// Each half-step minimizes the objective exactly in one factor, so the
/// objective never increases. Rows with no observations keep their seeded
/// random initialization.
pub fn complete_low_rank<T: Scalar>(table: &RatingsTable<T>, opts: AlsOptions) -> Result<CompletedMatrix<T>> {
    let r = opts.rank;
    if r == 0 || r > table.num_users.min(table.num_items) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must be in 1..={}",
            table.num_users.min(table.num_items)
        )));
    }
    if !(opts.reg >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularization must be >= 0, got {}",
            opts.reg
        )));
    }
    let reg = T::lit(opts.reg);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init_scale = 1.0 / (r as f64).sqrt();
    let mut draw = |rows: usize| {
        Matrix::from_fn(rows, r, |_, _| {
            T::lit(init_scale * rng.sample::<f64, _>(StandardNormal))
        })
    };
    let mut users = draw(table.num_users);
    let mut items = draw(table.num_items);

    let mut by_user: Vec<Vec<(usize, T)>> = vec![Vec::new(); table.num_users];
    let mut by_item: Vec<Vec<(usize, T)>> = vec![Vec::new(); table.num_items];
    for e in &table.entries {
        by_user[e.user].push((e.item, e.value));
        by_item[e.item].push((e.user, e.value));
    }
    for (kind, groups) in [("user", &by_user), ("item", &by_item)] {
        let empty = groups.iter().filter(|g| g.is_empty()).count();
        if empty > 0 {
            log::warn!("{empty} {kind}(s) have no observations; keeping their random factors");
        }
    }

    let mut history = vec![als_objective(table, &users, &items, reg)];
    for _ in 0..opts.iters {
        solve_side(&mut users, &items, &by_user, reg);
        solve_side(&mut items, &users, &by_item, reg);
        history.push(als_objective(table, &users, &items, reg));
    }

    let values = Matrix::from_fn(table.num_items, table.num_users, |j, i| dot(items.row(j), users.row(i)));
    Ok(CompletedMatrix {
        values,
        rank: r,
        item_factors: items,
        user_factors: users,
        objective_history: history,
    })
}

/// Replaces each row of `target` with its ridge solution against `fixed`.
fn solve_side<T: Scalar>(target: &mut Matrix<T>, fixed: &Matrix<T>, groups: &[Vec<(usize, T)>], reg: T) {
    let r = target.ncols();
    for (row, obs) in groups.iter().enumerate() {
        if obs.is_empty() {
            continue;
        }
        let mut gram = Matrix::from_diagonal(&vec![reg; r]);
        let mut rhs = vec![T::zero(); r];
        for &(other, value) in obs {
            let f = fixed.row(other);
            gram.add_outer(T::one(), f, f);
            for (b, &x) in rhs.iter_mut().zip(f) {
                *b = *b + value * x;
            }
        }
        // singular only when reg = 0 with too few observations; keep the old row then
        if let Ok(ch) = Cholesky::factor(&gram) {
            let sol = ch.solve(&rhs);
            if sol.iter().all(|x| x.is_finite()) {
                target.row_mut(row).copy_from_slice(&sol);
            }
        }
    }
}

/// Completed ratings of one user, mapped affinely onto `[-1, 1]`.
///
/// A constant row maps to all zeros.
pub fn user_reward_function<T: Scalar>(
    table: &RatingsTable<T>,
    completed: &CompletedMatrix<T>,
    user: usize,
) -> Result<Vec<T>> {
    if user >= table.num_users {
        return Err(Error::IndexOutOfRange {
            index: user,
            len: table.num_users,
        });
    }
    let row = completed.values.column(user);
    let lo = row.iter().copied().fold(T::infinity(), T::min);
    let hi = row.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    if !(span > T::zero()) {
        return Ok(vec![T::zero(); row.len()]);
    }
    let two = T::lit(2.0);
    Ok(row
        .iter()
        .map(|&x| (two * (x - lo) / span - T::one()).max(-T::one()).min(T::one()))
        .collect())
}

const CACHE_MAGIC: &[u8; 8] = b"SBCMPL01";

/// Binary cache: magic, then `items, users, rank, history_len` as little-endian
/// `u64`, then `values`, `item_factors`, `user_factors`, and the history as
/// little-endian `f64`.
pub fn write_completed_cache<T: Scalar, W: Write>(m: &CompletedMatrix<T>, mut out: W) -> std::io::Result<()> {
    out.write_all(CACHE_MAGIC)?;
    for n in [m.values.nrows(), m.values.ncols(), m.rank, m.objective_history.len()] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    let mut put = |xs: &[T]| -> std::io::Result<()> {
        for &x in xs {
            out.write_all(&x.as_f64().to_le_bytes())?;
        }
        Ok(())
    };
    put(m.values.as_slice())?;
    put(m.item_factors.as_slice())?;
    put(m.user_factors.as_slice())?;
    put(&m.objective_history)?;
    Ok(())
}

pub fn read_completed_cache<T: Scalar, R: Read>(mut input: R) -> Result<CompletedMatrix<T>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::InvalidArgument("not a completed-matrix cache file".into()));
    }
    let mut word = [0u8; 8];
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        input.read_exact(&mut word)?;
        *d = u64::from_le_bytes(word) as usize;
    }
    let [items, users, rank, hist] = dims;
    let mut take = |count: usize| -> Result<Vec<T>> {
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut word)?;
            v.push(T::lit(f64::from_le_bytes(word)));
        }
        Ok(v)
    };
    let values = Matrix::from_row_major(items, users, take(items * users)?);
    let item_factors = Matrix::from_row_major(items, rank, take(items * rank)?);
    let user_factors = Matrix::from_row_major(users, rank, take(users * rank)?);
    let objective_history = take(hist)?;
    Ok(CompletedMatrix {
        values,
        rank,
        item_factors,
        user_factors,
        objective_history,
    })
}

/// Item-feature CSV: header `item,f0,..,f{r-1}`, one row per item with its raw label.
pub fn write_item_features<T: Scalar, W: Write>(
    table: &RatingsTable<T>,
    m: &CompletedMatrix<T>,
    mut out: W,
) -> std::io::Result<()> {
    let header: Vec<String> = std::iter::once("item".to_string())
        .chain((0..m.rank).map(|k| format!("f{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for j in 0..m.item_factors.nrows() {
        let label = table.item_ids.get(j).map_or_else(|| j.to_string(), Clone::clone);
        let row: Vec<String> = m.item_factors.row(j).iter().map(|x| x.to_string()).collect();
        writeln!(out, "{},{}", label, row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let t = RatingsTable::<f64>::from_reader("user,item,rating\n0,0,5\n0,1,3\n".as_bytes()).unwrap();
        assert_eq!((t.num_users, t.num_items), (1, 2));
        assert_eq!(
            t.entries[1],
            Rating {
                user: 0,
                item: 1,
                value: 3.0
            }
        );
    }

    #[test]
    fn header_only_is_error() {
        assert!(matches!(
            RatingsTable::<f64>::from_reader("user,item,rating\n".as_bytes()),
            Err(Error::NoRatings)
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        match RatingsTable::<f64>::from_reader("user,item,rating\na,b,x\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_pair_is_error() {
        let text = "user,item,rating\n1,2,5\n3,2,1\n1,2,4\n";
        match RatingsTable::<f64>::from_reader(text.as_bytes()) {
            Err(Error::DuplicateRating { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(RatingsTable::<f64>::from_reader("u,i,r\n0,0,1\n".as_bytes()).is_err());
    }

    fn rank_one_table() -> RatingsTable<f64> {
        let a = [1.0, 2.0, 0.5, 1.5];
        let b = [2.0, 1.0, 3.0];
        let mut entries = Vec::new();
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                entries.push(Rating {
                    user: i,
                    item: j,
                    value: ai * bj,
                });
            }
        }
        RatingsTable::from_entries(4, 3, entries).unwrap()
    }

    #[test]
    fn rank_one_exact_recovery() {
        let t = rank_one_table();
        let m = complete_low_rank(
            &t,
            AlsOptions {
                rank: 1,
                reg: 0.0,
                iters: 30,
                seed: 4,
            },
        )
        .unwrap();
        assert!(m.observed_fit_error(&t) < 1e-6);
    }

    #[test]
    fn objective_never_increases() {
        let t = rank_one_table();
        for seed in 0..5 {
            let m = complete_low_rank(
                &t,
                AlsOptions {
                    rank: 2,
                    reg: 0.3,
                    iters: 20,
                    seed,
                },
            )
            .unwrap();
            for w in m.objective_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn single_entry_shrinks() {
        let t = RatingsTable::<f64>::from_entries(
            1,
            1,
            vec![Rating {
                user: 0,
                item: 0,
                value: 4.0,
            }],
        )
        .unwrap();
        let m = complete_low_rank(
            &t,
            AlsOptions {
                rank: 1,
                reg: 0.1,
                iters: 25,
                seed: 0,
            },
        )
        .unwrap();
        assert!(m.values[(0, 0)].abs() <= 4.0);
        for w in m.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn rank_out_of_range() {
        let t = rank_one_table();
        assert!(complete_low_rank(
            &t,
            AlsOptions {
                rank: 4,
                ..AlsOptions::default()
            }
        )
        .is_err());
    }

    #[test]
    fn reward_function_rescales() {
        let t = rank_one_table();
        let m = complete_low_rank(
            &t,
            AlsOptions {
                rank: 1,
                reg: 0.0,
                iters: 30,
                seed: 4,
            },
        )
        .unwrap();
        let f = user_reward_function(&t, &m, 1).unwrap();
        let lo = f.iter().cloned().fold(f64::MAX, f64::min);
        let hi = f.iter().cloned().fold(f64::MIN, f64::max);
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        // item 2 has the unique max in b
        assert_eq!(crate::scalar::argmax_lowest(f.iter().copied()), 2);
        assert!(user_reward_function(&t, &m, 4).is_err());
    }

    #[test]
    fn constant_row_gives_zero_payoffs() {
        let values = Matrix::from_rows(&[vec![3.0], vec![3.0]]);
        let m = CompletedMatrix {
            values,
            rank: 1,
            item_factors: Matrix::zeros(2, 1),
            user_factors: Matrix::zeros(1, 1),
            objective_history: vec![],
        };
        let t = RatingsTable::from_entries(
            1,
            2,
            vec![Rating {
                user: 0,
                item: 0,
                value: 3.0,
            }],
        )
        .unwrap();
        assert_eq!(user_reward_function(&t, &m, 0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn cache_round_trip() {
        let t = rank_one_table();
        let m = complete_low_rank(
            &t,
            AlsOptions {
                rank: 2,
                reg: 0.1,
                iters: 3,
                seed: 1,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_completed_cache(&m, &mut buf).unwrap();
        let back: CompletedMatrix<f64> = read_completed_cache(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert!(read_completed_cache::<f64, _>(&b"garbage!"[..]).is_err());
    }
}
