//! Multi-threaded stiffness assembly.
//!
//! Workers compute element-pair blocks for disjoint index ranges; blocks are
//! merged on the calling thread in pair order, so the result is bitwise equal
//! to [`NonlocalOperator::stiffness`].

use std::thread;

use nlid_core::assembly::LocalBlock;
use nlid_core::linalg::SymMatrix;
use nlid_core::{MidpointFunction, NonlocalOperator, Result};

/// Pairs processed per round; bounds the memory held in blocks.
const BATCH: usize = 1 << 16;

/// `threads == 0` or `1` runs the sequential reference path.
pub fn stiffness(op: &NonlocalOperator, w: &(dyn MidpointFunction + Sync), threads: usize) -> Result<SymMatrix> {
    if threads <= 1 {
        return op.stiffness(w);
    }
    let total = op.pairs().len();
    let mut matrix = op.new_matrix();
    let mut start = 0;
    while start < total {
        let end = (start + BATCH).min(total);
        let chunk = (end - start).div_ceil(threads);
        let parts: Vec<Result<Vec<LocalBlock>>> = thread::scope(|s| {
            let handles: Vec<_> = (start..end)
                .step_by(chunk)
                .map(|lo| {
                    let hi = (lo + chunk).min(end);
                    s.spawn(move || (lo..hi).map(|idx| op.local_block(idx, w, true)).collect())
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("assembly worker panicked")).collect()
        });
        for part in parts {
            op.merge_blocks(&mut matrix, &part?);
        }
        start = end;
    }
    Ok(matrix)
}
