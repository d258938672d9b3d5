//! Nonempty user subsets encoded as bit masks.
//!
//! User ids are zero-based internally (`0..K`); bit `k` of the mask is set
//! when user `k` belongs to the subset. Dense per-subset tables are indexed
//! by the raw mask, so index 0 (the empty set) is always unused.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of users. The state is exponential in K.
pub const MAX_USERS: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetIndex(u32);

impl SubsetIndex {
    pub fn from_mask(mask: u32, num_users: usize) -> Result<Self> {
        if mask == 0 {
            return Err(Error::EmptySubset);
        }
        if num_users < 32 && mask >> num_users != 0 {
            return Err(Error::param(
                "subset",
                format!("mask {mask:#b} names a user outside 0..{num_users}"),
            ));
        }
        Ok(SubsetIndex(mask))
    }

    pub fn from_users(users: &[usize], num_users: usize) -> Result<Self> {
        let mut mask = 0u32;
        for &u in users {
            if u >= num_users {
                return Err(Error::param(
                    "subset",
                    format!("user {u} outside 0..{num_users}"),
                ));
            }
            mask |= 1 << u;
        }
        Self::from_mask(mask, num_users)
    }

    pub fn singleton(user: usize) -> Self {
        SubsetIndex(1 << user)
    }

    /// The set of all `num_users` users.
    pub fn full(num_users: usize) -> Self {
        SubsetIndex(full_mask(num_users))
    }

    #[inline]
    pub fn mask(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn contains(self, user: usize) -> bool {
        self.0 >> user & 1 == 1
    }

    #[inline]
    pub fn is_subset_of(self, other: SubsetIndex) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn users(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..32).filter(move |k| mask >> k & 1 == 1)
    }

    /// Nonempty subsets of `self`, in increasing mask order.
    pub fn subsets(self) -> impl Iterator<Item = SubsetIndex> {
        submasks(self.0).map(SubsetIndex)
    }
}

impl fmt::Debug for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, u) in self.users().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", u + 1)?;
        }
        write!(f, "}}")
    }
}

#[inline]
pub fn full_mask(num_users: usize) -> u32 {
    if num_users >= 32 {
        u32::MAX
    } else {
        (1u32 << num_users) - 1
    }
}

/// Number of nonempty subsets of `num_users` users.
#[inline]
pub fn num_subsets(num_users: usize) -> usize {
    full_mask(num_users) as usize
}

/// All nonempty subsets of {0..num_users}, in increasing mask order.
pub fn all_subsets(num_users: usize) -> impl Iterator<Item = SubsetIndex> {
    (1..=full_mask(num_users)).map(SubsetIndex)
}

/// Nonempty submasks of `mask` in increasing order.
pub fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    // (cur - mask) & mask is the next larger submask of mask.
    let mut next = Some(mask & mask.wrapping_neg());
    std::iter::from_fn(move || {
        let cur = next?;
        if cur == 0 {
            return None;
        }
        next = if cur == mask {
            None
        } else {
            Some((cur.wrapping_sub(mask)) & mask)
        };
        Some(cur)
    })
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn submasks_ascend_and_cover() {
        let got: Vec<u32> = submasks(0b1011).collect();
        assert_eq!(got, vec![0b0001, 0b0010, 0b0011, 0b1000, 0b1001, 0b1010, 0b1011]);
        assert_eq!(submasks(0b100).collect::<Vec<_>>(), vec![0b100]);
    }

    #[test]
    fn rejects_empty_and_out_of_range() {
        assert!(matches!(SubsetIndex::from_mask(0, 3), Err(Error::EmptySubset)));
        assert!(SubsetIndex::from_mask(0b1000, 3).is_err());
        assert!(SubsetIndex::from_users(&[3], 3).is_err());
        let s = SubsetIndex::from_users(&[0, 2], 3).unwrap();
        assert_eq!(s.mask(), 0b101);
        assert_eq!(s.len(), 2);
        assert_eq!(format!("{s:?}"), "{1,3}");
    }

    #[test]
    fn canonical_encoding() {
        let a = SubsetIndex::from_users(&[2, 0], 4).unwrap();
        let b = SubsetIndex::from_users(&[0, 2, 2], 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(30, 15), 155117520.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
