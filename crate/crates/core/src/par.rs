//! Data-parallel map over independent work items (videos, frames).
//!
//! With the `parallel` feature the work runs on the current rayon pool;
//! without it, or with [`Exec::Sequential`], it runs in order on the
//! calling thread. Output order always matches input order, and nothing is
//! reduced across items here, so results do not depend on the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn try_map<T, R, E, F>(self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        // collect every result first so the reported error is the first in
        // input order regardless of scheduling
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Exec::Sequential.map(&items, |x| x * x);
        let par = Exec::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
    }

    #[test]
    fn first_error_in_input_order_wins() {
        let items: Vec<i32> = (0..500).collect();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let r: Result<Vec<i32>, i32> = exec.try_map(&items, |&x| if x % 7 == 3 { Err(x) } else { Ok(x) });
            assert_eq!(r, Err(3));
        }
    }
}
