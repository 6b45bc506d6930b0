//! Batch execution over sample indices.
//!
//! `Exec::Parallel` fans out over the current rayon pool when the `parallel`
//! feature is on; without it, every mode runs on the calling thread. Results
//! always come back in index order, so output does not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, F>(self, range: std::ops::Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => range.into_par_iter().map(f).collect(),
            _ => range.map(f).collect(),
        }
    }

    pub fn map_slice<'a, I, T, F>(self, items: &'a [I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&'a I) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let f = |i: usize| (i as f64).sqrt().to_bits();
        assert_eq!(Exec::Sequential.map(0..1000, f), Exec::Parallel.map(0..1000, f));
        let items: Vec<u32> = (0..50).collect();
        assert_eq!(Exec::Parallel.map_slice(&items, |x| x * 2)[49], 98);
    }
}
