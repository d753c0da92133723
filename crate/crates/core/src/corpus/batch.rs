use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Iterator over batches of references into a slice.
pub struct Batches<'a, T> {
    items: &'a [T],
    order: Vec<usize>,
    size: usize,
    next: usize,
}

impl<'a, T> Iterator for Batches<'a, T> {
    type Item = Vec<&'a T>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.size).min(self.order.len());
        let batch = self.order[self.next..end].iter().map(|&i| &self.items[i]).collect();
        self.next = end;
        Some(batch)
    }
}

/// Splits `items` into batches of `batch_size`, the last one possibly
/// partial. With a shuffle seed the order is a seeded permutation; without
/// one the input order is kept.
pub fn batch_iter<T>(items: &[T], batch_size: usize, shuffle: Option<u64>) -> Result<Batches<'_, T>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    if let Some(seed) = shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(Batches { items, order, size: batch_size, next: 0 })
}
