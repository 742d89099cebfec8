//! Order-preserving parallel map, sequential without the `parallel` feature.

#[cfg(feature = "parallel")]
pub(crate) fn map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Below this many elements a chunked loop stays on the calling thread.
#[cfg(feature = "parallel")]
const PARALLEL_MIN_LEN: usize = 8192;

/// Applies `f(index, chunk)` to consecutive `width`-sized chunks of `data`.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk_mut<T: Send>(data: &mut [T], width: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    use rayon::prelude::*;
    if data.len() < PARALLEL_MIN_LEN {
        data.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    } else {
        data.par_chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk_mut<T: Send>(data: &mut [T], width: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    data.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
}
