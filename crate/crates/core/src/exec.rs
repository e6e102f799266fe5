//! Serial / data-parallel execution switch.
//!
//! Every parallel entry point has a serial twin that is the deterministic
//! reference. With the `parallel` feature disabled, `Execution::Parallel`
//! silently runs the serial path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Deterministic reference mode.
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be fanned out over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, fanned out when parallel.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Apply `f(chunk_index, chunk)` to consecutive `chunk_len`-sized pieces of `out`.
pub fn for_each_chunk_mut<F>(exec: Execution, out: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    out.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Like [`for_each_chunk_mut`], collecting one result per chunk in chunk order.
pub fn map_chunks_mut<R, F>(exec: Execution, out: &mut [f64], chunk_len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut [f64]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return out
            .par_chunks_mut(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
    }
    let _ = exec;
    out.chunks_mut(chunk_len)
        .enumerate()
        .map(|(i, c)| f(i, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let a = map_range(Execution::Serial, 1000, |i| (i as f64).sqrt());
        let b = map_range(Execution::Parallel, 1000, |i| (i as f64).sqrt());
        assert_eq!(a, b);

        let mut x = vec![0.0; 103];
        let mut y = vec![0.0; 103];
        for_each_chunk_mut(Execution::Serial, &mut x, 10, |c, s| {
            s.iter_mut()
                .enumerate()
                .for_each(|(k, v)| *v = (c * 10 + k) as f64)
        });
        for_each_chunk_mut(Execution::Parallel, &mut y, 10, |c, s| {
            s.iter_mut()
                .enumerate()
                .for_each(|(k, v)| *v = (c * 10 + k) as f64)
        });
        assert_eq!(x, y);
        assert_eq!(x[102], 102.0);
    }
}
