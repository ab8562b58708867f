//! Union-find that remembers when each link was made, so class membership
//! can be queried at any past time. No path compression: links are only
//! ever added, and `find_at` follows links made no later than the query.

#[derive(Clone, Debug, Default)]
pub struct TimedUnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
    since: Vec<i64>,
    min_member: Vec<u32>,
}

impl TimedUnionFind {
    pub fn new(n: usize) -> Self {
        TimedUnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            since: vec![i64::MAX; n],
            min_member: (0..n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Current root of `x`.
    pub fn find(&self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            x = self.parent[x] as usize;
        }
        x
    }

    /// Root of `x` using only links made at or before `t`.
    pub fn find_at(&self, mut x: usize, t: i64) -> usize {
        while self.parent[x] as usize != x && self.since[x] <= t {
            x = self.parent[x] as usize;
        }
        x
    }

    pub fn same_class_at(&self, a: usize, b: usize, t: i64) -> bool {
        self.find_at(a, t) == self.find_at(b, t)
    }

    /// Smallest member of the current class of `x`.
    pub fn min_member(&self, x: usize) -> usize {
        self.min_member[self.find(x)] as usize
    }

    /// Merges the classes of `a` and `b` at time `t`. Times must be passed
    /// in non-decreasing order. Returns the smallest members of the two
    /// classes, lower first, or `None` if they were already merged.
    pub fn union(&mut self, a: usize, b: usize, t: i64) -> Option<(usize, usize)> {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return None;
        }
        let (ma, mb) = (self.min_member[ra], self.min_member[rb]);
        let (child, root) = if self.rank[ra] < self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        if self.rank[ra] == self.rank[rb] {
            self.rank[root] += 1;
        }
        self.parent[child] = root as u32;
        self.since[child] = t;
        self.min_member[root] = ma.min(mb);
        Some((ma.min(mb) as usize, ma.max(mb) as usize))
    }
}
