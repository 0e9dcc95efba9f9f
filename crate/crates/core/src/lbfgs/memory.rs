use std::collections::VecDeque;

use crate::error::{check_len, Error, Result};
use crate::krylov::{pcg_solve, PcgConfig};
use crate::linalg::{axpy, dot, Vector};
use crate::operator::LinearOperator;
use crate::scaling::SecantPair;

/// Number of secant pairs kept by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemorySize {
    Bounded(usize),
    /// Keep every pair (realised as a capacity of `max_iter`).
    Unbounded,
}

impl MemorySize {
    pub fn capacity(self, max_iter: usize) -> usize {
        match self {
            Self::Bounded(l) => l,
            Self::Unbounded => max_iter.max(1),
        }
    }
}

impl std::fmt::Display for MemorySize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Bounded(l) => write!(f, "{l}"),
            Self::Unbounded => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StoredPair {
    pub pair: SecantPair,
    /// `1 / (y'p)`
    pub rho: f64,
    /// Iteration that produced the pair.
    pub index: usize,
}

/// FIFO of the most recent secant pairs; the oldest is evicted first.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: VecDeque<StoredPair>,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "memory capacity must be positive");
        Self { capacity, pairs: VecDeque::with_capacity(capacity.min(64)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores a pair with positive curvature, evicting the oldest when full.
    pub fn push(&mut self, pair: SecantPair, index: usize) -> Result<()> {
        let py = pair.py();
        if !(py > 0.0) {
            return Err(Error::CurvatureViolation { py });
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(StoredPair { rho: 1.0 / py, pair, index });
        Ok(())
    }

    pub fn newest(&self) -> Option<&SecantPair> {
        self.pairs.back().map(|s| &s.pair)
    }

    pub fn oldest_index(&self) -> Option<usize> {
        self.pairs.front().map(|s| s.index)
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &StoredPair> {
        self.pairs.iter()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }
}

/// Centre step of the recursion: `r = H0 q`.
#[derive(Debug, Clone, Copy)]
pub enum CenterStep<'a> {
    /// `H0 = gamma*I`.
    Scaled(f64),
    /// `H0 = B0^{-1}`, applied with PCG.
    Solve { op: &'a dyn LinearOperator, pcg: &'a PcgConfig },
}

#[derive(Debug, Clone)]
pub struct TwoLoopResult {
    /// `H_k g`
    pub r: Vector,
    pub pcg_iterations: usize,
    /// `true` for scalar centres.
    pub pcg_converged: bool,
}

/// Applies the limited-memory inverse Hessian to `g`.
pub fn two_loop_apply(memory: &LbfgsMemory, g: &[f64], center: CenterStep<'_>) -> Result<TwoLoopResult> {
    if let Some(s) = memory.newest() {
        check_len(s.p().len(), g.len())?;
    }
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for s in memory.iter().rev() {
        let a = s.rho * dot(s.pair.p(), &q);
        axpy(-a, s.pair.y(), &mut q);
        alphas.push(a);
    }

    let (mut r, pcg_iterations, pcg_converged) = match center {
        CenterStep::Scaled(gamma) => {
            q.iter_mut().for_each(|v| *v *= gamma);
            (q, 0, true)
        }
        CenterStep::Solve { op, pcg } => {
            let res = pcg_solve(op, &q, pcg)?;
            (res.solution, res.iterations, res.converged)
        }
    };

    for (s, a) in memory.iter().zip(alphas.iter().rev()) {
        let b = s.rho * dot(s.pair.y(), &r);
        axpy(a - b, s.pair.p(), &mut r);
    }
    Ok(TwoLoopResult { r, pcg_iterations, pcg_converged })
}
