//! Decentralized placement accounting.
//!
//! Each user caches an independent uniformly random `m`-fraction of every
//! file. When one request per user of a subset `J` is combined, the bits a
//! member `k` still needs are grouped by which other members of `J` cache
//! them. The group cached by exactly `I \ {k}` is XOR-ed with the matching
//! groups of the other members of `I` and queued for multicast to `I`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::{binomial, SubsetIndex, MAX_USERS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheParams {
    memory: f64,
    file_bits: u64,
    num_users: usize,
}

impl CacheParams {
    pub fn new(memory: f64, file_bits: u64, num_users: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&memory) {
            return Err(Error::param("m", format!("must lie in [0, 1], got {memory}")));
        }
        if file_bits == 0 {
            return Err(Error::param("F", "file size must be at least one bit"));
        }
        if num_users == 0 || num_users > MAX_USERS {
            return Err(Error::param(
                "K",
                format!("must lie in 1..={MAX_USERS}, got {num_users}"),
            ));
        }
        Ok(Self {
            memory,
            file_bits,
            num_users,
        })
    }

    /// Normalized memory `m = M/N`.
    pub fn memory(&self) -> f64 {
        self.memory
    }

    pub fn file_bits(&self) -> u64 {
        self.file_bits
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Bits of a requested file that are missing from its requester's cache.
    pub fn uncached_bits(&self) -> u64 {
        ((1.0 - self.memory) * self.file_bits as f64).round() as u64
    }
}

/// Fraction of a file cached at exactly a given set of `cache_set_size` users.
pub fn subfile_fraction(memory: f64, num_users: usize, cache_set_size: usize) -> Result<f64> {
    if cache_set_size > num_users {
        return Err(Error::param(
            "cache_set_size",
            format!("{cache_set_size} exceeds K = {num_users}"),
        ));
    }
    Ok(memory.powi(cache_set_size as i32) * (1.0 - memory).powi((num_users - cache_set_size) as i32))
}

/// File fraction routed to codeword queue `target` when one request of every
/// member of `group` is combined: `m^(|I|-1) (1-m)^(|J|-|I|+1)`.
pub fn codeword_load(memory: f64, group: SubsetIndex, target: SubsetIndex) -> Result<f64> {
    if !target.is_subset_of(group) {
        return Err(Error::NotSubset {
            inner: target.mask(),
            outer: group.mask(),
        });
    }
    Ok(load_by_size(memory, group.len(), target.len()))
}

#[inline]
pub(crate) fn load_by_size(memory: f64, group_size: usize, target_size: usize) -> f64 {
    debug_assert!(1 <= target_size && target_size <= group_size);
    memory.powi(target_size as i32 - 1) * (1.0 - memory).powi((group_size - target_size + 1) as i32)
}

/// Total delivery load in files when all `K` users are served by one round
/// of decentralized coded delivery.
pub fn total_load(memory: f64, num_users: usize) -> Result<f64> {
    if !(memory > 0.0 && memory <= 1.0) {
        return Err(Error::param(
            "m",
            format!("total load needs 0 < m <= 1, got {memory} (uncoded limit is K(1-m))"),
        ));
    }
    let q = 1.0 - memory;
    Ok(q / memory * (1.0 - q.powi(num_users as i32)))
}

/// Load of uncoded delivery, which exploits only the local caching gain.
pub fn uncoded_load(memory: f64, num_users: usize) -> f64 {
    num_users as f64 * (1.0 - memory)
}

/// Integer segment sizes in bits, indexed by `(|J|, |I|)`.
///
/// Shared segments (`|I| >= 2`) take `floor(b F)` bits; the private segment
/// of each member absorbs the remainder so that every member's segments sum
/// to exactly `round((1-m) F)` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSizes {
    // sizes[n][c], 1 <= c <= n <= K
    sizes: Vec<Vec<u64>>,
}

impl SegmentSizes {
    pub fn new(params: &CacheParams) -> Self {
        let k = params.num_users();
        let f = params.file_bits() as f64;
        let target = params.uncached_bits();
        let mut sizes = vec![Vec::new(); k + 1];
        for n in 1..=k {
            let mut row = vec![0u64; n + 1];
            let mut shared_per_member = 0u64;
            for c in 2..=n {
                let bits = (load_by_size(params.memory(), n, c) * f + 1e-9).floor() as u64;
                row[c] = bits;
                shared_per_member += binomial(n - 1, c - 1) as u64 * bits;
            }
            row[1] = target.saturating_sub(shared_per_member);
            sizes[n] = row;
        }
        Self { sizes }
    }

    #[inline]
    pub fn bits(&self, group_size: usize, target_size: usize) -> u64 {
        self.sizes[group_size][target_size]
    }
}

/// Identifier of one requested file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FileTag(pub u64);

/// One XOR codeword segment bound for a codeword queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub target: SubsetIndex,
    pub bits: u64,
    /// `(user, file)` pairs whose parts are XOR-ed into this segment.
    pub files: Vec<(usize, FileTag)>,
}

/// Codeword segments produced by combining the requests `files` over `group`.
///
/// `files` lists one `(user, tag)` for every member of `group`, in any order.
pub fn enumerate_segments(
    group: SubsetIndex,
    files: &[(usize, FileTag)],
    sizes: &SegmentSizes,
) -> Result<Vec<Segment>> {
    if files.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut contributors = 0u32;
    for (i, &(user, tag)) in files.iter().enumerate() {
        if !group.contains(user) {
            return Err(Error::NotSubset {
                inner: 1 << user,
                outer: group.mask(),
            });
        }
        if contributors >> user & 1 == 1 {
            return Err(Error::param(
                "files",
                format!("user {} listed twice", user + 1),
            ));
        }
        if files[..i].iter().any(|(_, t)| *t == tag) {
            return Err(Error::DuplicateFileTag(tag.0));
        }
        contributors |= 1 << user;
    }
    if contributors != group.mask() {
        return Err(Error::param(
            "files",
            format!("every member of {group:?} needs exactly one file"),
        ));
    }

    let n = group.len();
    Ok(group
        .subsets()
        .map(|target| Segment {
            target,
            bits: sizes.bits(n, target.len()),
            files: files
                .iter()
                .copied()
                .filter(|(u, _)| target.contains(*u))
                .collect(),
        })
        .collect())
}
