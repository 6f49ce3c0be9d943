use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mrp::{MrpSpec, Outcome};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Grid position, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    North,
    South,
    East,
    West,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];
}

/// A special cell: every move out of `from` lands on `to` with `reward`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Teleport {
    pub from: Cell,
    pub to: Cell,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    pub teleports: Vec<Teleport>,
    pub off_grid_reward: f64,
    pub start: Cell,
}

impl Default for GridworldConfig {
    /// The 5×5 grid with A=(0,1)→A'=(4,1) paying 10 and B=(0,3)→B'=(2,3)
    /// paying 5.
    fn default() -> Self {
        GridworldConfig {
            width: 5,
            height: 5,
            teleports: vec![
                Teleport {
                    from: Cell::new(0, 1),
                    to: Cell::new(4, 1),
                    reward: 10.0,
                },
                Teleport {
                    from: Cell::new(0, 3),
                    to: Cell::new(2, 3),
                    reward: 5.0,
                },
            ],
            off_grid_reward: -1.0,
            start: Cell::new(0, 0),
        }
    }
}

impl GridworldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("gridworld needs positive width and height"));
        }
        let inside = |c: Cell| c.row < self.height && c.col < self.width;
        if !inside(self.start) {
            return Err(Error::config(format!("start cell {:?} is off the grid", self.start)));
        }
        for (k, t) in self.teleports.iter().enumerate() {
            if !inside(t.from) || !inside(t.to) {
                return Err(Error::config(format!("teleport {k} leaves the grid")));
            }
            if !t.reward.is_finite() {
                return Err(Error::config(format!("teleport {k} has a non-finite reward")));
            }
            if self.teleports[..k].iter().any(|o| o.from == t.from) {
                return Err(Error::config(format!("teleport source {:?} listed twice", t.from)));
            }
        }
        if !self.off_grid_reward.is_finite() {
            return Err(Error::config("off-grid reward must be finite"));
        }
        Ok(())
    }
}

/// Gridworld under the equiprobable random policy.
#[derive(Debug, Clone)]
pub struct Gridworld {
    cfg: GridworldConfig,
}

impl Gridworld {
    pub fn new(cfg: GridworldConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Gridworld { cfg })
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.cfg
    }

    pub fn n_states(&self) -> usize {
        self.cfg.width * self.cfg.height
    }

    pub fn start(&self) -> Cell {
        self.cfg.start
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cfg.width + cell.col
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index / self.cfg.width, index % self.cfg.width)
    }

    /// Deterministic effect of one move.
    pub fn transition(&self, cell: Cell, action: Action) -> (Cell, f64) {
        if let Some(t) = self.cfg.teleports.iter().find(|t| t.from == cell) {
            return (t.to, t.reward);
        }
        let target = match action {
            Action::North => cell.row.checked_sub(1).map(|r| Cell::new(r, cell.col)),
            Action::South => (cell.row + 1 < self.cfg.height).then(|| Cell::new(cell.row + 1, cell.col)),
            Action::East => (cell.col + 1 < self.cfg.width).then(|| Cell::new(cell.row, cell.col + 1)),
            Action::West => cell.col.checked_sub(1).map(|c| Cell::new(cell.row, c)),
        };
        match target {
            Some(next) => (next, 0.0),
            None => (cell, self.cfg.off_grid_reward),
        }
    }

    /// Draws a move uniformly from the four directions and applies it.
    pub fn step(&self, cell: Cell, rng: &mut Rng) -> (Cell, f64) {
        let action = Action::ALL[rng.random_range(0..4)];
        self.transition(cell, action)
    }

    /// The MRP induced by the equiprobable policy. Every state lists one
    /// outcome per move (probability ¼ each), except teleport sources, which
    /// list their single certain outcome.
    pub fn as_mrp(&self, gamma: f64) -> Result<MrpSpec> {
        let rows = (0..self.n_states())
            .map(|s| {
                let cell = self.cell(s);
                if let Some(t) = self.cfg.teleports.iter().find(|t| t.from == cell) {
                    return vec![Outcome {
                        next: self.index(t.to),
                        prob: 1.0,
                        reward: t.reward,
                    }];
                }
                Action::ALL
                    .iter()
                    .map(|&a| {
                        let (next, reward) = self.transition(cell, a);
                        Outcome {
                            next: self.index(next),
                            prob: 0.25,
                            reward,
                        }
                    })
                    .collect()
            })
            .collect();
        MrpSpec::new(rows, gamma)
    }
}

impl Default for Gridworld {
    fn default() -> Self {
        Gridworld::new(GridworldConfig::default()).expect("default gridworld is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn teleport_overrides_every_action() {
        let g = Gridworld::default();
        for a in Action::ALL {
            assert_eq!(g.transition(Cell::new(0, 1), a), (Cell::new(4, 1), 10.0));
            assert_eq!(g.transition(Cell::new(0, 3), a), (Cell::new(2, 3), 5.0));
        }
        let mut rng = stream(0, &[]);
        for _ in 0..20 {
            assert_eq!(g.step(Cell::new(0, 1), &mut rng), (Cell::new(4, 1), 10.0));
        }
    }

    #[test]
    fn walls_and_interior() {
        let g = Gridworld::default();
        assert_eq!(g.transition(Cell::new(0, 0), Action::North), (Cell::new(0, 0), -1.0));
        assert_eq!(g.transition(Cell::new(0, 0), Action::West), (Cell::new(0, 0), -1.0));
        assert_eq!(g.transition(Cell::new(2, 2), Action::East), (Cell::new(2, 3), 0.0));
        assert_eq!(g.transition(Cell::new(4, 4), Action::South), (Cell::new(4, 4), -1.0));
    }

    #[test]
    fn mrp_rows() {
        let g = Gridworld::default();
        let m = g.as_mrp(0.9).unwrap();
        assert_eq!(m.n_states(), 25);
        let a = m.outcomes(g.index(Cell::new(0, 1)));
        assert_eq!(
            a,
            &[Outcome {
                next: g.index(Cell::new(4, 1)),
                prob: 1.0,
                reward: 10.0
            }]
        );
        let corner = m.outcomes(0);
        assert_eq!(corner.len(), 4);
        assert!(corner.iter().all(|o| o.prob == 0.25));
        let self_loops: Vec<_> = corner.iter().filter(|o| o.next == 0).collect();
        assert_eq!(self_loops.len(), 2);
        assert!(self_loops.iter().all(|o| o.reward == -1.0));
    }

    #[test]
    fn rejects_invalid_config() {
        let mut cfg = GridworldConfig::default();
        cfg.teleports[1].from = cfg.teleports[0].from;
        assert!(Gridworld::new(cfg).is_err());
        let mut cfg = GridworldConfig::default();
        cfg.teleports[0].to = Cell::new(5, 0);
        assert!(Gridworld::new(cfg).is_err());
    }
}
