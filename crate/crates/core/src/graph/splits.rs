use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::rng::{self, Purpose};

/// Disjoint train/validation/test node sets, each sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMask {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMask {
    pub fn is_empty(&self) -> bool {
        self.train.is_empty() && self.val.is_empty() && self.test.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const STANDARD: SplitRatios = SplitRatios {
        train: 0.2,
        val: 0.4,
        test: 0.4,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !p.is_finite() || p <= 0.0) {
            return Err(arg_err!("split ratios must be positive, got {parts:?}"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(arg_err!("split ratios must sum to 1, got {sum}"));
        }
        Ok(())
    }

    /// Set sizes for `n` nodes by largest remainder (ties to the earlier
    /// set), then every empty set borrows one node from the currently
    /// largest set.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let ratios = [self.train, self.val, self.test];
        let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
        let mut sizes: [usize; 3] = [0; 3];
        for (s, e) in sizes.iter_mut().zip(&exact) {
            *s = e.floor() as usize;
        }
        let mut left = n.saturating_sub(sizes.iter().sum::<usize>());
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        if n >= 3 {
            for i in 0..3 {
                if sizes[i] == 0 {
                    let donor = (0..3).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap();
                    sizes[donor] -= 1;
                    sizes[i] += 1;
                }
            }
        }
        sizes
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Uniform random split of `num_nodes` nodes, deterministic in `seed`.
pub fn make_splits(num_nodes: usize, ratios: SplitRatios, seed: u64) -> Result<SplitMask> {
    ratios.validate()?;
    if num_nodes < 3 {
        return Err(arg_err!("make_splits needs at least 3 nodes, got {num_nodes}"));
    }
    let [n_train, n_val, _] = ratios.sizes(num_nodes);
    let mut order: Vec<usize> = (0..num_nodes).collect();
    let mut rng = rng::stream(seed, Purpose::Splits, &[]);
    rng::shuffle(&mut rng, &mut order);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitMask { train, val, test })
}
