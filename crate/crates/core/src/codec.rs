//! Composite index codec shared by every module.
//!
//! An n-copy input or output is a bit string `(c_1, ..., c_n)`. It is packed
//! little-endian: copy 1 occupies the least significant bit, so the composite
//! index is `sum_i c_i * 2^(i-1)`.

/// Packs per-copy bits (copy 1 first) into a composite index.
pub fn encode(bits: &[usize]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &bit)| acc | ((bit & 1) << i))
}

/// Unpacks a composite index into `n` per-copy bits (copy 1 first).
pub fn decode(index: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| (index >> i) & 1).collect()
}

/// Bit of copy `copy` (zero-based) inside a composite index.
#[inline]
pub fn bit(index: usize, copy: usize) -> usize {
    (index >> copy) & 1
}

/// Applies a copy permutation to a composite index: copy `i` of the result
/// takes the bit of copy `perm[i]` of the input.
pub fn permute(index: usize, perm: &[usize]) -> usize {
    perm.iter()
        .enumerate()
        .fold(0, |acc, (i, &src)| acc | (bit(index, src) << i))
}

/// All permutations of `0..n` in lexicographic order, identity first.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    loop {
        out.push(current.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn little_endian_roundtrip() {
        assert_eq!(encode(&[1, 0]), 1);
        assert_eq!(encode(&[0, 1]), 2);
        assert_eq!(encode(&[1, 1, 0]), 3);
        for i in 0..16 {
            assert_eq!(encode(&decode(i, 4)), i);
        }
    }

    #[test]
    fn swap_two_copies() {
        let swap = [1, 0];
        assert_eq!(permute(0b01, &swap), 0b10);
        assert_eq!(permute(0b10, &swap), 0b01);
        assert_eq!(permute(0b11, &swap), 0b11);
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(1).len(), 1);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(3)[0], vec![0, 1, 2]);
    }
}
