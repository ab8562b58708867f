//! Radii used to pick skeleton entries ever closer to a query point.

/// `eps_k = max(2^-k, floor)` for `k >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    floor: f64,
}

impl EpsilonSchedule {
    /// `floor` is the space resolution of the grid: the lattice step for
    /// lattice flows, the snap tolerance for continuous ones.
    pub fn new(floor: f64) -> Self {
        assert!(floor > 0.0, "schedule floor must be positive");
        EpsilonSchedule { floor }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn eps(&self, k: u32) -> f64 {
        0.5f64.powi(k as i32).max(self.floor)
    }

    /// First `k` at which the schedule sits on its floor.
    pub fn floor_index(&self) -> u32 {
        let mut k = 1;
        while 0.5f64.powi(k as i32) > self.floor {
            k += 1;
        }
        k
    }
}
