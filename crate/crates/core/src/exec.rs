//! Reduction mode shared by every numeric kernel.
//!
//! `Deterministic` fixes the summation order of every reduction, so runs are
//! bit-reproducible and set encodings are bit-identical under row
//! permutations. `Parallel` spreads per-row and per-group work over the rayon
//! pool; sums then agree with the deterministic path only up to rounding.
//! Setting `FVE_DETERMINISTIC=1` in the environment pins `Deterministic`
//! regardless of what the program requests.

use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Deterministic,
    Parallel,
}

static REQUESTED: AtomicU8 = AtomicU8::new(0);

fn env_forces_deterministic() -> bool {
    static FORCED: OnceLock<bool> = OnceLock::new();
    *FORCED.get_or_init(|| {
        std::env::var("FVE_DETERMINISTIC")
            .map(|v| v.trim() == "1")
            .unwrap_or(false)
    })
}

/// Requests a reduction mode for the whole process.
pub fn set_reduction(mode: Reduction) {
    let code = match mode {
        Reduction::Deterministic => 0,
        Reduction::Parallel => 1,
    };
    REQUESTED.store(code, Ordering::SeqCst);
}

/// The mode in effect: the requested one unless the environment forces
/// deterministic reductions.
pub fn reduction() -> Reduction {
    if env_forces_deterministic() {
        return Reduction::Deterministic;
    }
    match REQUESTED.load(Ordering::SeqCst) {
        0 => Reduction::Deterministic,
        _ => Reduction::Parallel,
    }
}

pub fn is_deterministic() -> bool {
    reduction() == Reduction::Deterministic
}

/// Sums `width` accumulators over `n` items; `f(i, acc)` adds item `i`'s
/// contribution into `acc`. Item order is `order` when given, else `0..n`.
pub(crate) fn accumulate<F>(n: usize, width: usize, order: Option<&[usize]>, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    use rayon::prelude::*;

    match reduction() {
        Reduction::Deterministic => {
            let mut acc = vec![0.0; width];
            match order {
                Some(idx) => idx.iter().for_each(|&i| f(i, &mut acc)),
                None => (0..n).for_each(|i| f(i, &mut acc)),
            }
            acc
        }
        Reduction::Parallel => (0..n)
            .into_par_iter()
            .fold(
                || vec![0.0; width],
                |mut acc, i| {
                    f(i, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0.0; width],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            ),
    }
}
