//! Grid mazes with noisy translation actions.
//!
//! States are cells `row * side + col`. Actions are the four cardinal moves
//! in the order [`Direction::ALL`]. For each `(s, a)` the transition row is a
//! Dirichlet draw over `s` itself plus every neighbor reachable without
//! crossing a wall; the intended neighbor (when reachable) gets the bias
//! concentration and every other supported cell the base concentration.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::kernel::TransitionKernel;
use crate::error::{Error, Result};
use crate::numerics::DirichletParams;

pub const BASE_CONCENTRATION: f64 = 0.25;
pub const DEFAULT_BIAS_CONCENTRATION: f64 = 1.0;
/// Fraction of the walls left by the spanning tree that are knocked down.
pub const EXTRA_OPENING_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Right,
    Down,
    Left,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Right, Direction::Down, Direction::Left];

    fn offset(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Right => (0, 1),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
        }
    }
}

/// A wall between two grid-adjacent cells, stored with the smaller index first.
pub type Wall = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct MazeSpec {
    side: usize,
    walls: BTreeSet<Wall>,
    bias_concentration: f64,
    base_concentration: f64,
}

fn ordered(a: usize, b: usize) -> Wall {
    (a.min(b), a.max(b))
}

impl MazeSpec {
    /// Validates the wall set: walls must join adjacent cells and leave the
    /// grid connected.
    pub fn new(side: usize, walls: impl IntoIterator<Item = Wall>, bias_concentration: f64) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidParams(format!("maze side must be ≥ 2, got {side}")));
        }
        if !(bias_concentration > 0.0 && bias_concentration.is_finite()) {
            return Err(Error::InvalidParams("bias concentration must be positive".into()));
        }
        let walls: BTreeSet<Wall> = walls.into_iter().map(|(a, b)| ordered(a, b)).collect();
        let spec = Self { side, walls, bias_concentration, base_concentration: BASE_CONCENTRATION };
        for &(a, b) in &spec.walls {
            if b >= side * side || !spec.grid_neighbors(a).contains(&b) {
                return Err(Error::InvalidParams(format!("wall ({a}, {b}) does not join adjacent cells")));
            }
        }
        if !spec.is_connected() {
            return Err(Error::InvalidParams("walls disconnect the maze".into()));
        }
        Ok(spec)
    }

    /// Random maze: recursive-backtracker spanning tree, then a fraction
    /// [`EXTRA_OPENING_FRACTION`] of the remaining walls removed.
    pub fn random<R: Rng + ?Sized>(side: usize, rng: &mut R) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidParams(format!("maze side must be ≥ 2, got {side}")));
        }
        let n = side * side;
        let mut walls: BTreeSet<Wall> = BTreeSet::new();
        let open =
            Self { side, walls: BTreeSet::new(), bias_concentration: 1.0, base_concentration: BASE_CONCENTRATION };
        for c in 0..n {
            for nb in open.grid_neighbors(c) {
                walls.insert(ordered(c, nb));
            }
        }
        let mut visited = vec![false; n];
        let mut stack = vec![rng.random_range(0..n)];
        visited[stack[0]] = true;
        while let Some(&cur) = stack.last() {
            let mut options: Vec<usize> = open.grid_neighbors(cur).into_iter().filter(|&c| !visited[c]).collect();
            if options.is_empty() {
                stack.pop();
                continue;
            }
            options.shuffle(rng);
            let next = options[0];
            walls.remove(&ordered(cur, next));
            visited[next] = true;
            stack.push(next);
        }
        let mut remaining: Vec<Wall> = walls.iter().copied().collect();
        remaining.shuffle(rng);
        let knock = (remaining.len() as f64 * EXTRA_OPENING_FRACTION).round() as usize;
        for w in &remaining[..knock] {
            walls.remove(w);
        }
        Self::new(side, walls, DEFAULT_BIAS_CONCENTRATION)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_states(&self) -> usize {
        self.side * self.side
    }

    pub fn walls(&self) -> &BTreeSet<Wall> {
        &self.walls
    }

    pub fn bias_concentration(&self) -> f64 {
        self.bias_concentration
    }

    fn grid_neighbors(&self, cell: usize) -> Vec<usize> {
        Direction::ALL.iter().filter_map(|&d| self.grid_step(cell, d)).collect()
    }

    fn grid_step(&self, cell: usize, dir: Direction) -> Option<usize> {
        let (r, c) = ((cell / self.side) as isize, (cell % self.side) as isize);
        let (dr, dc) = dir.offset();
        let (nr, nc) = (r + dr, c + dc);
        let s = self.side as isize;
        (nr >= 0 && nr < s && nc >= 0 && nc < s).then(|| (nr * s + nc) as usize)
    }

    /// Neighbor in direction `dir` if it is on the grid and not walled off.
    pub fn move_target(&self, cell: usize, dir: Direction) -> Option<usize> {
        self.grid_step(cell, dir).filter(|&nb| !self.walls.contains(&ordered(cell, nb)))
    }

    /// Accessible neighbors of `cell`.
    pub fn accessible(&self, cell: usize) -> Vec<usize> {
        Direction::ALL.iter().filter_map(|&d| self.move_target(cell, d)).collect()
    }

    fn is_connected(&self) -> bool {
        let n = self.n_states();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(c) = stack.pop() {
            for nb in self.accessible(c) {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Concentrations generating the row for `(cell, dir)`; zero marks cells
    /// outside the support.
    pub fn row_concentrations(&self, cell: usize, dir: Direction) -> Vec<f64> {
        let mut alpha = vec![0.0; self.n_states()];
        alpha[cell] = self.base_concentration;
        for nb in self.accessible(cell) {
            alpha[nb] = self.base_concentration;
        }
        if let Some(target) = self.move_target(cell, dir) {
            alpha[target] = self.bias_concentration;
        }
        alpha
    }
}

/// Draws the maze's transition kernel.
pub fn make_maze<R: Rng + ?Sized>(spec: &MazeSpec, rng: &mut R) -> Result<TransitionKernel> {
    let n = spec.n_states();
    let mut probs = Vec::with_capacity(n * 4 * n);
    for cell in 0..n {
        for dir in Direction::ALL {
            let alpha = spec.row_concentrations(cell, dir);
            let support: Vec<usize> = (0..n).filter(|&j| alpha[j] > 0.0).collect();
            let dir_params = DirichletParams::new(support.iter().map(|&j| alpha[j]).collect())?;
            let draw = dir_params.sample(rng);
            let mut row = vec![0.0; n];
            for (&j, &p) in support.iter().zip(draw.probs()) {
                row[j] = p;
            }
            probs.extend(row);
        }
    }
    TransitionKernel::new(n, 4, probs)
}
