use std::fmt::Write as _;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// One possible outcome of leaving a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// A finite Markov reward process `⟨S, p, r, γ⟩`.
///
/// Outcome lists are kept as given: two entries with the same successor are
/// not merged, so a state can list each of its moves separately.
#[derive(Debug, Clone, PartialEq)]
pub struct MrpSpec {
    n_states: usize,
    transitions: Vec<Vec<Outcome>>,
    gamma: f64,
}

impl MrpSpec {
    pub fn new(transitions: Vec<Vec<Outcome>>, gamma: f64) -> Result<Self> {
        let n_states = transitions.len();
        if n_states == 0 {
            return Err(Error::config("an MRP needs at least one state"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        for (s, row) in transitions.iter().enumerate() {
            let mut total = 0.0;
            for o in row {
                if o.next >= n_states {
                    return Err(Error::config(format!(
                        "state {s} transitions to {} but there are only {n_states} states",
                        o.next
                    )));
                }
                if !o.reward.is_finite() {
                    return Err(Error::config(format!("state {s} has a non-finite reward")));
                }
                if !(0.0..=1.0).contains(&o.prob) {
                    return Err(Error::config(format!("state {s} has probability {}", o.prob)));
                }
                total += o.prob;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!(
                    "probabilities out of state {s} sum to {total}, not 1"
                )));
            }
        }
        Ok(MrpSpec {
            n_states,
            transitions,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn outcomes(&self, state: usize) -> &[Outcome] {
        &self.transitions[state]
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        MrpSpec::new(self.transitions.clone(), gamma)
    }

    /// Expected one-step reward from each state.
    pub fn expected_rewards(&self) -> Vec<f64> {
        self.transitions
            .iter()
            .map(|row| row.iter().map(|o| o.prob * o.reward).sum())
            .collect()
    }

    /// Row-stochastic transition matrix, row-major.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let mut p = vec![vec![0.0; self.n_states]; self.n_states];
        for (s, row) in self.transitions.iter().enumerate() {
            for o in row {
                p[s][o.next] += o.prob;
            }
        }
        p
    }

    /// Samples one transition by inverse CDF over the listed outcomes.
    pub fn sample(&self, state: usize, rng: &mut Rng) -> (usize, f64) {
        let u: f64 = rng.random();
        let row = &self.transitions[state];
        let mut acc = 0.0;
        for o in row {
            acc += o.prob;
            if u < acc {
                return (o.next, o.reward);
            }
        }
        let last = row.last().expect("validated non-empty row");
        (last.next, last.reward)
    }

    /// Tab-separated table: a `# gamma` line, a header, then one
    /// `state next prob reward` line per outcome.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# gamma\t{}", self.gamma);
        out.push_str("state\tnext\tprob\treward\n");
        for (s, row) in self.transitions.iter().enumerate() {
            for o in row {
                let _ = writeln!(out, "{s}\t{}\t{}\t{}", o.next, o.prob, o.reward);
            }
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut gamma = None;
        let mut rows: Vec<Vec<Outcome>> = Vec::new();
        let mut seen_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::config(format!("MRP table line {}: {what}", lineno + 1));
            if let Some(rest) = line.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                if parts.next() == Some("gamma") {
                    let g = parts.next().ok_or_else(|| bad("missing gamma value"))?;
                    gamma = Some(g.parse::<f64>().map_err(|_| bad("unparseable gamma"))?);
                }
                continue;
            }
            if !seen_header {
                if line.split_whitespace().collect::<Vec<_>>() != ["state", "next", "prob", "reward"] {
                    return Err(bad("expected header `state next prob reward`"));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad("expected four fields"));
            }
            let state: usize = fields[0].parse().map_err(|_| bad("bad state"))?;
            let outcome = Outcome {
                next: fields[1].parse().map_err(|_| bad("bad next state"))?,
                prob: fields[2].parse().map_err(|_| bad("bad probability"))?,
                reward: fields[3].parse().map_err(|_| bad("bad reward"))?,
            };
            if state >= rows.len() {
                rows.resize_with(state + 1, Vec::new);
            }
            rows[state].push(outcome);
        }
        let gamma = gamma.ok_or_else(|| Error::config("MRP table has no `# gamma` line"))?;
        MrpSpec::new(rows, gamma)
    }
}
