use crate::error::{Error, Result};

/// One user arrival in interval `interval` (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrival {
    pub interval: usize,
    pub user: String,
}

/// Ordered user arrivals grouped into `N` update intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalSchedule {
    arrivals: Vec<Arrival>,
    interval_count: usize,
}

impl ArrivalSchedule {
    /// Interval indices must be in `1..=interval_count` and non-decreasing.
    pub fn new(arrivals: Vec<Arrival>, interval_count: usize) -> Result<Self> {
        let mut prev = 1;
        for (pos, a) in arrivals.iter().enumerate() {
            if a.interval == 0 || a.interval > interval_count {
                return Err(Error::Validation(format!(
                    "arrival {pos} has interval {} outside 1..={interval_count}",
                    a.interval
                )));
            }
            if a.interval < prev {
                return Err(Error::Validation(format!(
                    "arrival {pos} goes back from interval {prev} to {}",
                    a.interval
                )));
            }
            prev = a.interval;
        }
        Ok(ArrivalSchedule {
            arrivals,
            interval_count,
        })
    }

    /// Like [`new`](Self::new), taking `N` as the largest interval seen.
    pub fn from_arrivals(arrivals: Vec<Arrival>) -> Result<Self> {
        let n = arrivals.iter().map(|a| a.interval).max().unwrap_or(0);
        Self::new(arrivals, n)
    }

    pub fn arrivals(&self) -> &[Arrival] {
        &self.arrivals
    }

    pub fn interval_count(&self) -> usize {
        self.interval_count
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Traffic `r_n` for `n = 1..=N` (index 0 holds interval 1).
    pub fn traffic(&self) -> Vec<usize> {
        let mut r = vec![0; self.interval_count];
        for a in &self.arrivals {
            r[a.interval - 1] += 1;
        }
        r
    }

    /// Arrivals belonging to interval `n`.
    pub fn interval(&self, n: usize) -> &[Arrival] {
        let start = self.arrivals.partition_point(|a| a.interval < n);
        let end = self.arrivals.partition_point(|a| a.interval <= n);
        &self.arrivals[start..end]
    }
}
