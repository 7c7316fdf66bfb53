//! Sequential / data-parallel execution of independent per-item work.
//!
//! Every helper here applies a pure function per item and keeps outputs in
//! input order, so the two strategies produce bitwise-identical results.

/// How independent per-item work is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Plain iteration on the calling thread.
    Sequential,
    /// Rayon work-stealing. Without the `parallel` feature this behaves
    /// exactly like [`Execution::Sequential`].
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work will actually be distributed over rayon's pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `out[i] = f(i, &items[i])`.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
        }
        items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }

    /// `out[i] = f(i, &mut items[i])`.
    pub fn map_mut<T, R, F>(self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items
                .par_iter_mut()
                .enumerate()
                .map(|(i, x)| f(i, x))
                .collect();
        }
        items.iter_mut().enumerate().map(|(i, x)| f(i, x)).collect()
    }

    /// `out[i] = f(i)` for `i in 0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fills consecutive `chunk`-sized pieces of `data`; `f` receives the
    /// chunk index.
    pub fn fill_chunks<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        assert!(chunk > 0);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }

    pub fn sort_unstable<T: Ord + Send>(self, data: &mut [T]) {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            data.par_sort_unstable();
            return;
        }
        data.sort_unstable();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let f = |i: usize, x: &f64| x.sin() * i as f64;
        let a = Execution::Sequential.map(&xs, f);
        let b = Execution::Parallel.map(&xs, f);
        assert_eq!(a, b);

        let mut s1 = vec![0u64; 97];
        let mut s2 = s1.clone();
        let g = |i: usize, c: &mut [u64]| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = (i * 10 + k) as u64;
            }
        };
        Execution::Sequential.fill_chunks(&mut s1, 10, g);
        Execution::Parallel.fill_chunks(&mut s2, 10, g);
        assert_eq!(s1, s2);
    }
}
