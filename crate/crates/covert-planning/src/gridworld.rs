//! The stochastic gridworld: slip dynamics, bouncing walls, penalty cells,
//! terrain, goals, and the multi-sensor observation model.
//!
//! Cells are (row, col) with row 0 at the top. An action moves to the
//! intended neighbor with probability 1 − 2β and to each of the two lateral
//! neighbors with probability β. Any component that would enter a wall or
//! leave the grid stays in place instead. Entering a penalty cell costs
//! `penalty`, every action costs `action_cost`, and entering the goal pays
//! `goal_reward`; the goal is absorbing.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::mdp::Mdp;
use crate::obs::ObsModel;
use crate::{Error, Result};

pub type Cell = (usize, usize);

/// The four compass actions, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

pub const DIRECTIONS: [Dir; 4] = [Dir::North, Dir::East, Dir::South, Dir::West];

impl Dir {
    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::North => (-1, 0),
            Dir::East => (0, 1),
            Dir::South => (1, 0),
            Dir::West => (0, -1),
        }
    }

    /// The two directions orthogonal to motion; slips go there.
    pub fn laterals(self) -> [Dir; 2] {
        match self {
            Dir::North | Dir::South => [Dir::West, Dir::East],
            Dir::East | Dir::West => [Dir::North, Dir::South],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dir::North => "N",
            Dir::East => "E",
            Dir::South => "S",
            Dir::West => "W",
        }
    }
}

/// Geometry, terrain, rewards, and stochasticity of one gridworld.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub walls: BTreeSet<Cell>,
    pub penalty_cells: BTreeSet<Cell>,
    pub dark_green: BTreeSet<Cell>,
    pub light_green: BTreeSet<Cell>,
    pub initial_cell: Cell,
    pub agent_goal: Cell,
    pub user_goal: Cell,
    /// Slip probability β per lateral side; intended move has 1 − 2β.
    pub slip_beta: f64,
    pub action_cost: f64,
    pub penalty: f64,
    pub goal_reward: f64,
    pub gamma: f64,
}

impl GridSpec {
    /// Parses an ASCII map: `#` wall, `.` open, `X` penalty, `g` light green,
    /// `G` dark green, `S` start, `A` agent goal, `U` user goal.
    pub fn from_ascii(
        map: &[&str],
        slip_beta: f64,
        action_cost: f64,
        penalty: f64,
        goal_reward: f64,
        gamma: f64,
    ) -> Result<GridSpec> {
        if map.is_empty() {
            return Err(Error::InvalidConfig("empty grid map".into()));
        }
        let rows = map.len();
        let cols = map[0].chars().count();
        let mut walls = BTreeSet::new();
        let mut penalty_cells = BTreeSet::new();
        let mut dark_green = BTreeSet::new();
        let mut light_green = BTreeSet::new();
        let mut initial_cell = None;
        let mut agent_goal = None;
        let mut user_goal = None;
        for (r, line) in map.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::InvalidConfig(format!(
                    "map row {r} has {} columns, expected {cols}",
                    line.chars().count()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = (r, c);
                match ch {
                    '#' => {
                        walls.insert(cell);
                    }
                    '.' => {}
                    'X' => {
                        penalty_cells.insert(cell);
                    }
                    'g' => {
                        light_green.insert(cell);
                    }
                    'G' => {
                        dark_green.insert(cell);
                    }
                    'S' => initial_cell = Some(cell),
                    'A' => agent_goal = Some(cell),
                    'U' => user_goal = Some(cell),
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown map character '{other}' at ({r}, {c})"
                        )))
                    }
                }
            }
        }
        let spec = GridSpec {
            rows,
            cols,
            walls,
            penalty_cells,
            dark_green,
            light_green,
            initial_cell: initial_cell
                .ok_or_else(|| Error::InvalidConfig("map has no start cell 'S'".into()))?,
            agent_goal: agent_goal
                .ok_or_else(|| Error::InvalidConfig("map has no agent goal 'A'".into()))?,
            user_goal: user_goal
                .ok_or_else(|| Error::InvalidConfig("map has no user goal 'U'".into()))?,
            slip_beta,
            action_cost,
            penalty,
            goal_reward,
            gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.slip_beta) {
            return Err(Error::InvalidConfig(format!(
                "slip_beta {} outside [0, 0.5)",
                self.slip_beta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} outside (0, 1)",
                self.gamma
            )));
        }
        let in_bounds = |cell: Cell| cell.0 < self.rows && cell.1 < self.cols;
        for (name, set) in [
            ("wall", &self.walls),
            ("penalty", &self.penalty_cells),
            ("dark green", &self.dark_green),
            ("light green", &self.light_green),
        ] {
            for &cell in set {
                if !in_bounds(cell) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} cell {cell:?} out of bounds"
                    )));
                }
            }
        }
        for (name, cell) in [
            ("initial", self.initial_cell),
            ("agent goal", self.agent_goal),
            ("user goal", self.user_goal),
        ] {
            if !in_bounds(cell) {
                return Err(Error::InvalidConfig(format!(
                    "{name} cell {cell:?} out of bounds"
                )));
            }
            if self.walls.contains(&cell) {
                return Err(Error::InvalidConfig(format!(
                    "{name} cell {cell:?} is a wall"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn cell_index(&self, cell: Cell) -> usize {
        cell.0 * self.cols + cell.1
    }

    #[inline]
    pub fn index_cell(&self, index: usize) -> Cell {
        (index / self.cols, index % self.cols)
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Where a single directional component actually lands: the neighbor, or
    /// the current cell when the move hits a wall or the boundary.
    fn component_destination(&self, from: Cell, dir: Dir) -> Cell {
        let (dr, dc) = dir.delta();
        let r = from.0 as isize + dr;
        let c = from.1 as isize + dc;
        if r < 0 || c < 0 || r as usize >= self.rows || c as usize >= self.cols {
            return from;
        }
        let to = (r as usize, c as usize);
        if self.walls.contains(&to) {
            from
        } else {
            to
        }
    }

    /// The slip-resolved successor distribution for one action.
    pub fn move_distribution(&self, from: Cell, dir: Dir) -> Vec<(Cell, f64)> {
        let mut components = vec![(dir, 1.0 - 2.0 * self.slip_beta)];
        for lateral in dir.laterals() {
            components.push((lateral, self.slip_beta));
        }
        let mut out: Vec<(Cell, f64)> = Vec::with_capacity(3);
        for (d, p) in components {
            if p <= 0.0 {
                continue;
            }
            let dest = self.component_destination(from, d);
            match out.iter_mut().find(|(cell, _)| *cell == dest) {
                Some((_, q)) => *q += p,
                None => out.push((dest, p)),
            }
        }
        out
    }

    fn reward_into(&self, goal: Cell, dest: Cell) -> f64 {
        let mut r = 0.0;
        if dest == goal {
            r += self.goal_reward;
        }
        if self.penalty_cells.contains(&dest) {
            r -= self.penalty;
        }
        r
    }

    /// Builds the MDP for the given goal cell, which becomes absorbing.
    /// Entry rewards are folded into R(s, a) as expectations over successors.
    fn build_mdp(&self, goal: Cell) -> Result<Mdp> {
        self.validate()?;
        let n = self.n_cells();
        let n_actions = DIRECTIONS.len();
        let mut transitions = vec![Vec::new(); n * n_actions];
        let mut rewards = Array2::zeros((n, n_actions));
        for idx in 0..n {
            let cell = self.index_cell(idx);
            let inert = self.walls.contains(&cell) || cell == goal;
            for (a, &dir) in DIRECTIONS.iter().enumerate() {
                if inert {
                    // Walls are unreachable, and the goal is absorbing. A
                    // self-loop keeps the row stochastic.
                    transitions[idx * n_actions + a] = vec![(idx, 1.0)];
                    continue;
                }
                let dist = self.move_distribution(cell, dir);
                let mut reward = -self.action_cost;
                let mut row = Vec::with_capacity(dist.len());
                for (dest, p) in dist {
                    reward += p * self.reward_into(goal, dest);
                    row.push((self.cell_index(dest), p));
                }
                transitions[idx * n_actions + a] = row;
                rewards[(idx, a)] = reward;
            }
        }
        let mut mdp = Mdp::new(
            n,
            n_actions,
            transitions,
            self.cell_index(self.initial_cell),
            rewards,
            self.gamma,
            vec![self.cell_index(goal)],
        )?;
        mdp.state_names = (0..n)
            .map(|i| {
                let (r, c) = self.index_cell(i);
                format!("({r},{c})")
            })
            .collect();
        mdp.action_names = DIRECTIONS.iter().map(|d| d.name().to_string()).collect();
        Ok(mdp)
    }
}

/// The agent's planning MDP: rewards target `agent_goal`, which absorbs.
pub fn build_gridworld(spec: &GridSpec) -> Result<Mdp> {
    spec.build_mdp(spec.agent_goal)
}

/// The nominal user's MDP: same dynamics, rewards target `user_goal`. Used
/// only to derive the nominal policy.
pub fn build_nominal_gridworld(spec: &GridSpec) -> Result<Mdp> {
    spec.build_mdp(spec.user_goal)
}

/// One sensor: a location, an explicit coverage set, and a base detection
/// probability at distance zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub location: Cell,
    pub range_cells: BTreeSet<Cell>,
    pub base_probability: f64,
}

impl Sensor {
    /// Coverage = all in-bounds cells within the given Manhattan radius.
    pub fn with_radius(location: Cell, radius: usize, spec: &GridSpec) -> Sensor {
        let mut range_cells = BTreeSet::new();
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                if manhattan(location, (r, c)) <= radius {
                    range_cells.insert((r, c));
                }
            }
        }
        Sensor {
            location,
            range_cells,
            base_probability: 0.8,
        }
    }
}

pub fn manhattan(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Per-sensor detection probability for an agent standing at `cell`: zero
/// outside coverage, otherwise the base probability minus 0.05 per unit of
/// Manhattan distance, minus 0.2 on dark-green and 0.1 on light-green cells,
/// clamped to [0, 1].
pub fn sensor_state_probability(sensor: &Sensor, cell: Cell, spec: &GridSpec) -> f64 {
    if !sensor.range_cells.contains(&cell) {
        return 0.0;
    }
    let mut p = sensor.base_probability - 0.05 * manhattan(cell, sensor.location) as f64;
    if spec.dark_green.contains(&cell) {
        p -= 0.2;
    }
    if spec.light_green.contains(&cell) {
        p -= 0.1;
    }
    p.clamp(0.0, 1.0)
}

/// Builds the observation model for a set of sensors: the alphabet is every
/// binary tuple (o₁, …, o_k) plus the null action symbol, and a state emits
/// each tuple as a product of independent per-sensor Bernoulli draws.
/// Actions are invisible: nature states emit the null symbol.
pub fn build_sensor_obs_model(sensors: &[Sensor], spec: &GridSpec) -> Result<ObsModel> {
    if sensors.is_empty() {
        return Err(Error::InvalidConfig("at least one sensor required".into()));
    }
    for sensor in sensors {
        if sensor.location.0 >= spec.rows || sensor.location.1 >= spec.cols {
            return Err(Error::InvalidConfig(format!(
                "sensor location {:?} out of bounds",
                sensor.location
            )));
        }
        if !(0.0..=1.0).contains(&sensor.base_probability) {
            return Err(Error::InvalidConfig(format!(
                "sensor base probability {} outside [0, 1]",
                sensor.base_probability
            )));
        }
    }
    let k = sensors.len();
    let n_tuples = 1usize << k;
    let symbols: Vec<String> = (0..n_tuples)
        .map(|mask| {
            (0..k)
                .map(|i| if mask >> i & 1 == 1 { '1' } else { '0' })
                .collect()
        })
        .collect();
    let n = spec.n_cells();
    let mut state_emission = Array2::zeros((n, n_tuples));
    for idx in 0..n {
        let cell = spec.index_cell(idx);
        let probs: Vec<f64> = sensors
            .iter()
            .map(|sensor| sensor_state_probability(sensor, cell, spec))
            .collect();
        for mask in 0..n_tuples {
            let mut p = 1.0;
            for (i, &pi) in probs.iter().enumerate() {
                p *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
            }
            state_emission[(idx, mask)] = p;
        }
    }
    ObsModel::with_null_actions(n, DIRECTIONS.len(), symbols, state_emission)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;
    use proptest::prelude::*;

    fn open_spec(slip_beta: f64) -> GridSpec {
        GridSpec::from_ascii(
            &["A....", ".....", "..S..", ".....", "U...."],
            slip_beta,
            0.2,
            2.0,
            20.0,
            0.95,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_moves_without_slip() {
        let spec = open_spec(0.0);
        let mdp = build_gridworld(&spec).unwrap();
        let s = spec.cell_index((2, 2));
        let row = mdp.successors(s, Dir::North as usize);
        assert_eq!(row, &[(spec.cell_index((1, 2)), 1.0)]);
    }

    #[test]
    fn interior_slip_distribution() {
        let spec = open_spec(0.1);
        let mdp = build_gridworld(&spec).unwrap();
        let s = spec.cell_index((2, 2));
        let north = spec.cell_index((1, 2));
        let west = spec.cell_index((2, 1));
        let east = spec.cell_index((2, 3));
        assert!((mdp.transition_prob(s, Dir::North as usize, north) - 0.8).abs() < 1e-15);
        assert!((mdp.transition_prob(s, Dir::North as usize, west) - 0.1).abs() < 1e-15);
        assert!((mdp.transition_prob(s, Dir::North as usize, east) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn wall_bounce_redirects_to_stay() {
        let spec = GridSpec::from_ascii(
            &["..#..", "..S..", ".....", "A...U"],
            0.1,
            0.2,
            2.0,
            20.0,
            0.95,
        )
        .unwrap();
        let mdp = build_gridworld(&spec).unwrap();
        let s = spec.cell_index((1, 2));
        // North is a wall; laterals stay open.
        assert!((mdp.transition_prob(s, Dir::North as usize, s) - 0.8).abs() < 1e-15);
        assert!(
            (mdp.transition_prob(s, Dir::North as usize, spec.cell_index((1, 1))) - 0.1).abs()
                < 1e-15
        );
        assert!(
            (mdp.transition_prob(s, Dir::North as usize, spec.cell_index((1, 3))) - 0.1).abs()
                < 1e-15
        );
    }

    #[test]
    fn boundary_bounce_merges_mass() {
        let spec = open_spec(0.1);
        let mdp = build_gridworld(&spec).unwrap();
        // Bottom-right corner: moving south hits the boundary and the east
        // lateral also bounces, so both components stay in place.
        let corner = (4, 4);
        let s = spec.cell_index(corner);
        let stay = mdp.transition_prob(s, Dir::South as usize, s);
        assert!((stay - 0.9).abs() < 1e-15, "stay mass {stay}");
        let west = mdp.transition_prob(s, Dir::South as usize, spec.cell_index((4, 3)));
        assert!((west - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rewards_fold_goal_and_penalty_entry() {
        let spec = GridSpec::from_ascii(
            &["A.X", ".S.", "..U"],
            0.1,
            0.2,
            2.0,
            20.0,
            0.95,
        )
        .unwrap();
        let mdp = build_gridworld(&spec).unwrap();
        let s = spec.cell_index((1, 1));
        // North from S: intended (0,1) open, laterals (1,0) and (1,2) open.
        // No goal or penalty among them: plain action cost.
        assert!((mdp.rewards[(s, Dir::North as usize)] + 0.2).abs() < 1e-15);
        // North from (1,2): the intended cell (0,2) is the penalty cell.
        let right = spec.cell_index((1, 2));
        let expected = -0.2 + 0.8 * (-2.0);
        assert!((mdp.rewards[(right, Dir::North as usize)] - expected).abs() < 1e-15);

        // Entering the agent goal pays out: from (1,0) moving north, the
        // intended cell (0,0) is the goal.
        let left = spec.cell_index((1, 0));
        let expected = -0.2 + 0.8 * 20.0;
        assert!((mdp.rewards[(left, Dir::North as usize)] - expected).abs() < 1e-15);
    }

    #[test]
    fn goal_is_absorbing_and_rows_validate() {
        let spec = open_spec(0.15);
        let mdp = build_gridworld(&spec).unwrap();
        assert!(mdp.is_absorbing(spec.cell_index(spec.agent_goal)));
        assert!(validate_mdp(&mdp).is_ok());
        let nominal = build_nominal_gridworld(&spec).unwrap();
        assert!(nominal.is_absorbing(spec.cell_index(spec.user_goal)));
        assert!(!nominal.is_absorbing(spec.cell_index(spec.agent_goal)));
    }

    #[test]
    fn sensor_probability_worked_example() {
        // 10x10 grid, sensor at (6,4) with the agent at (6,3) on dark green.
        let mut map = vec![String::from("..........") ; 10];
        map[0].replace_range(0..1, "A");
        map[7].replace_range(0..1, "U");
        map[9].replace_range(9..10, "S");
        map[6].replace_range(3..4, "G");
        let map_refs: Vec<&str> = map.iter().map(|s| s.as_str()).collect();
        let spec = GridSpec::from_ascii(&map_refs, 0.1, 0.2, 2.0, 20.0, 0.95).unwrap();
        let sensor = Sensor::with_radius((6, 4), 2, &spec);
        let p = sensor_state_probability(&sensor, (6, 3), &spec);
        assert_eq!(p, 0.55);
        assert_eq!(p, 0.8 - 0.05 * 1.0 - 0.2);
        // Out of coverage: zero.
        assert_eq!(sensor_state_probability(&sensor, (0, 0), &spec), 0.0);
        // At the sensor location with no terrain: the base probability.
        assert_eq!(sensor_state_probability(&sensor, (6, 4), &spec), 0.8);
    }

    #[test]
    fn sensor_probability_clamps() {
        let spec = open_spec(0.1);
        let mut sensor = Sensor::with_radius((0, 0), 40, &spec);
        sensor.base_probability = 0.1;
        // Far away and shaded, the raw value would be negative.
        let p = sensor_state_probability(&sensor, (4, 4), &spec);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn obs_model_is_bernoulli_product() {
        let spec = open_spec(0.1);
        let sensors = vec![
            Sensor::with_radius((0, 4), 1, &spec),
            Sensor::with_radius((2, 3), 1, &spec),
            Sensor::with_radius((4, 4), 1, &spec),
        ];
        let obs = build_sensor_obs_model(&sensors, &spec).unwrap();
        // Alphabet: 8 tuples + null.
        assert_eq!(obs.n_symbols(), 9);
        // Cell (2,2) is covered only by sensor 2 (distance 1): p = 0.75.
        let cell = spec.cell_index((2, 2));
        let p2 = sensor_state_probability(&sensors[1], (2, 2), &spec);
        assert!((p2 - 0.75).abs() < 1e-15);
        // Mask 0b010 means only sensor 2 fires.
        assert!((obs.state_emission[(cell, 0b010)] - p2).abs() < 1e-15);
        assert!((obs.state_emission[(cell, 0b000)] - (1.0 - p2)).abs() < 1e-15);
        assert_eq!(obs.state_emission[(cell, 0b001)], 0.0);
        assert_eq!(obs.state_emission[(cell, 0b111)], 0.0);
        // A cell covered by nothing always reports all zeros.
        let lonely = spec.cell_index((4, 0));
        assert_eq!(obs.state_emission[(lonely, 0b000)], 1.0);
        obs.validate().unwrap();
    }

    #[test]
    fn degenerate_sensor_is_deterministic() {
        let spec = open_spec(0.1);
        let mut sensor = Sensor::with_radius((2, 2), 0, &spec);
        sensor.base_probability = 1.0;
        let obs = build_sensor_obs_model(&[sensor], &spec).unwrap();
        let cell = spec.cell_index((2, 2));
        assert_eq!(obs.state_emission[(cell, 1)], 1.0);
        assert_eq!(obs.state_emission[(cell, 0)], 0.0);
    }

    #[test]
    fn left_right_reflection_is_isomorphic() {
        let map = ["A.X", ".S.", "..U"];
        let reflected = ["X.A", ".S.", "U.."];
        let spec = GridSpec::from_ascii(&map, 0.1, 0.2, 2.0, 20.0, 0.95).unwrap();
        let mirror = GridSpec::from_ascii(&reflected, 0.1, 0.2, 2.0, 20.0, 0.95).unwrap();
        let mdp = build_gridworld(&spec).unwrap();
        let mdp_m = build_gridworld(&mirror).unwrap();
        let refl_cell = |(r, c): Cell| (r, spec.cols - 1 - c);
        let refl_action = |a: usize| match DIRECTIONS[a] {
            Dir::East => Dir::West as usize,
            Dir::West => Dir::East as usize,
            other => other as usize,
        };
        for r in 0..3 {
            for c in 0..3 {
                let s = spec.cell_index((r, c));
                let sm = mirror.cell_index(refl_cell((r, c)));
                for a in 0..4 {
                    let am = refl_action(a);
                    assert!(
                        (mdp.rewards[(s, a)] - mdp_m.rewards[(sm, am)]).abs() < 1e-12,
                        "reward mismatch at ({r},{c}) action {a}"
                    );
                    for r2 in 0..3 {
                        for c2 in 0..3 {
                            let t = spec.cell_index((r2, c2));
                            let tm = mirror.cell_index(refl_cell((r2, c2)));
                            assert!(
                                (mdp.transition_prob(s, a, t)
                                    - mdp_m.transition_prob(sm, am, tm))
                                .abs()
                                    < 1e-12
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn spec_validation_errors() {
        assert!(GridSpec::from_ascii(&["S.A"], 0.1, 0.2, 2.0, 20.0, 0.95).is_err()); // no user goal
        assert!(GridSpec::from_ascii(&["SAU"], 0.5, 0.2, 2.0, 20.0, 0.95).is_err()); // slip too big
        assert!(GridSpec::from_ascii(&["SAU?"], 0.1, 0.2, 2.0, 20.0, 0.95).is_err());
    }

    proptest! {
        #[test]
        fn transition_rows_sum_to_one_for_any_slip(slip in 0.0f64..0.4999) {
            let spec = open_spec(slip);
            let mdp = build_gridworld(&spec).unwrap();
            for s in 0..mdp.n_states {
                for a in 0..mdp.n_actions {
                    let sum: f64 = mdp.successors(s, a).iter().map(|(_, p)| p).sum();
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn sensor_probability_always_in_unit_interval(
            r in 0usize..5, c in 0usize..5, base in 0.0f64..1.0
        ) {
            let spec = open_spec(0.1);
            let mut sensor = Sensor::with_radius((2, 2), 3, &spec);
            sensor.base_probability = base;
            let p = sensor_state_probability(&sensor, (r, c), &spec);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
