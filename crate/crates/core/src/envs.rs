//! Grid-world environments: motion models, observation models, and the JSON
//! map loader. Coordinates are `(x, y)` with `(0, 0)` the top-left cell; `up`
//! decreases `y`.

use crate::mitl::Labels;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }
}

impl From<(u32, u32)> for Cell {
    fn from((x, y): (u32, u32)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (u32, u32) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

/// Cardinal direction, in the observation order used by the office case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    N,
    W,
    S,
    E,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::W, Dir::S, Dir::E];

    pub fn opposite(self) -> Dir {
        match self {
            Dir::N => Dir::S,
            Dir::S => Dir::N,
            Dir::W => Dir::E,
            Dir::E => Dir::W,
        }
    }

    pub fn perpendicular(self) -> [Dir; 2] {
        match self {
            Dir::N | Dir::S => [Dir::W, Dir::E],
            Dir::W | Dir::E => [Dir::N, Dir::S],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Left,
    Down,
    Right,
    Stay,
}

impl Action {
    pub fn dir(self) -> Option<Dir> {
        match self {
            Action::Up => Some(Dir::N),
            Action::Left => Some(Dir::W),
            Action::Down => Some(Dir::S),
            Action::Right => Some(Dir::E),
            Action::Stay => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Left => "left",
            Action::Down => "down",
            Action::Right => "right",
            Action::Stay => "stay",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the leftover probability mass of a non-intended move is spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    /// Intended direction with `slip_intended`, remainder split equally
    /// between the two perpendicular directions.
    #[default]
    Perpendicular,
    /// Intended direction with `slip_intended`, remainder split uniformly
    /// over the other feasible (non-wall) directions.
    Feasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: u32,
    pub height: u32,
    pub start: Cell,
    pub blocked: BTreeSet<Cell>,
    pub labels: BTreeMap<Cell, Labels>,
    pub actions: Vec<Action>,
    pub slip_intended: f64,
    pub motion: MotionKind,
    pub deterministic: bool,
    /// Impassable edges, stored symmetrically (both incident half-edges).
    pub wall_edges: BTreeSet<(Cell, Dir)>,
}

impl GridSpec {
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height
    }

    pub fn neighbor(&self, cell: Cell, dir: Dir) -> Option<Cell> {
        let (dx, dy) = match dir {
            Dir::N => (0, -1),
            Dir::S => (0, 1),
            Dir::W => (-1, 0),
            Dir::E => (1, 0),
        };
        let (nx, ny) = (cell.x as i64 + dx, cell.y as i64 + dy);
        self.in_bounds(nx, ny).then(|| Cell::new(nx as u32, ny as u32))
    }

    /// A move along `dir` succeeds when the target exists, the edge is not a
    /// wall, and the target cell is not blocked.
    pub fn passable(&self, cell: Cell, dir: Dir) -> bool {
        match self.neighbor(cell, dir) {
            Some(next) => {
                !self.wall_edges.contains(&(cell, dir)) && !self.blocked.contains(&next)
            }
            None => false,
        }
    }

    /// Destination of an attempted move; failed moves resolve to staying.
    pub fn resolve(&self, cell: Cell, dir: Dir) -> Cell {
        if self.passable(cell, dir) {
            self.neighbor(cell, dir).expect("passable implies in bounds")
        } else {
            cell
        }
    }

    pub fn labels_at(&self, cell: Cell) -> Labels {
        self.labels.get(&cell).cloned().unwrap_or_default()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.labels.values().flat_map(|s| s.iter().cloned()).collect()
    }

    /// Exact outgoing distribution for `(cell, action)`; probabilities sum
    /// to 1 and outcomes landing on the same cell are merged.
    pub fn transition_dist(&self, cell: Cell, action: Action) -> Result<Vec<(Cell, f64)>, EnvError> {
        if !self.actions.contains(&action) {
            return Err(EnvError::InvalidAction(action));
        }
        let dir = match action.dir() {
            None => return Ok(vec![(cell, 1.0)]),
            Some(d) => d,
        };
        if self.deterministic {
            return Ok(vec![(self.resolve(cell, dir), 1.0)]);
        }
        let mut acc: Vec<(Cell, f64)> = Vec::new();
        let push = |acc: &mut Vec<(Cell, f64)>, c: Cell, p: f64| {
            if p <= 0.0 {
                return;
            }
            match acc.iter_mut().find(|(cc, _)| *cc == c) {
                Some((_, q)) => *q += p,
                None => acc.push((c, p)),
            }
        };
        match self.motion {
            MotionKind::Perpendicular => {
                push(&mut acc, self.resolve(cell, dir), self.slip_intended);
                let side = (1.0 - self.slip_intended) / 2.0;
                for d in dir.perpendicular() {
                    push(&mut acc, self.resolve(cell, d), side);
                }
            }
            MotionKind::Feasible => {
                push(&mut acc, self.resolve(cell, dir), self.slip_intended);
                let others: Vec<Dir> = Dir::ALL
                    .into_iter()
                    .filter(|d| *d != dir && self.passable(cell, *d))
                    .collect();
                let rest = 1.0 - self.slip_intended;
                if others.is_empty() {
                    push(&mut acc, cell, rest);
                } else {
                    let each = rest / others.len() as f64;
                    for d in others {
                        push(&mut acc, self.resolve(cell, d), each);
                    }
                }
            }
        }
        Ok(acc)
    }
}

/// Sample one environment transition.
pub fn mdp_step<R: Rng>(
    spec: &GridSpec,
    cell: Cell,
    action: Action,
    rng: &mut R,
) -> Result<Cell, EnvError> {
    let dist = spec.transition_dist(cell, action)?;
    Ok(sample(&dist, rng))
}

fn sample<T: Copy, R: Rng>(dist: &[(T, f64)], rng: &mut R) -> T {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (v, p) in dist {
        cum += p;
        if u < cum {
            return *v;
        }
    }
    dist.last().expect("non-empty distribution").0
}

/// Per-edge feature seen by the office robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Wall,
    Hallway,
    Door,
    Window,
}

/// Observation tuple in the fixed order North, West, South, East.
pub type FeatureTuple = [Feature; 4];

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSpec {
    /// MDP mode: the observation is the true cell.
    Full,
    /// The true cell with `true_obs_prob`, else uniform over the in-bounds
    /// 4-neighborhood.
    NoisyCell { true_obs_prob: f64 },
    /// Deterministic per-cell local features; distinct cells may alias.
    LocalFeatures { feature_map: BTreeMap<Cell, FeatureTuple> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Obs {
    Cell(Cell),
    Features(FeatureTuple),
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obs::Cell(c) => write!(f, "{c}"),
            Obs::Features(t) => {
                let names: Vec<&str> = t
                    .iter()
                    .map(|x| match x {
                        Feature::Wall => "wall",
                        Feature::Hallway => "hallway",
                        Feature::Door => "door",
                        Feature::Window => "window",
                    })
                    .collect();
                write!(f, "{}", names.join("/"))
            }
        }
    }
}

impl ObservationSpec {
    /// Exact observation distribution after landing on `cell`.
    pub fn observation_dist(&self, grid: &GridSpec, cell: Cell) -> Vec<(Obs, f64)> {
        match self {
            ObservationSpec::Full => vec![(Obs::Cell(cell), 1.0)],
            ObservationSpec::NoisyCell { true_obs_prob } => {
                let neighbors: Vec<Cell> = Dir::ALL
                    .into_iter()
                    .filter_map(|d| grid.neighbor(cell, d))
                    .collect();
                let mut out = vec![(Obs::Cell(cell), *true_obs_prob)];
                if !neighbors.is_empty() {
                    let each = (1.0 - true_obs_prob) / neighbors.len() as f64;
                    out.extend(neighbors.into_iter().map(|n| (Obs::Cell(n), each)));
                }
                out
            }
            ObservationSpec::LocalFeatures { feature_map } => {
                let t = feature_map.get(&cell).copied().unwrap_or([Feature::Wall; 4]);
                vec![(Obs::Features(t), 1.0)]
            }
        }
    }

    /// Distinct feature tuples over the map's unblocked cells.
    pub fn distinct_observations(&self, grid: &GridSpec) -> BTreeSet<Obs> {
        let mut out = BTreeSet::new();
        for y in 0..grid.height {
            for x in 0..grid.width {
                let c = Cell::new(x, y);
                if grid.blocked.contains(&c) {
                    continue;
                }
                for (o, _) in self.observation_dist(grid, c) {
                    out.insert(o);
                }
            }
        }
        out
    }

    pub fn is_full(&self) -> bool {
        matches!(self, ObservationSpec::Full)
    }
}

/// Sample an observation after landing on `cell`.
pub fn observe<R: Rng>(
    obs: &ObservationSpec,
    grid: &GridSpec,
    cell: Cell,
    rng: &mut R,
) -> Obs {
    let dist = obs.observation_dist(grid, cell);
    sample(&dist, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub grid: GridSpec,
    pub observation: ObservationSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid action {0}")]
    InvalidAction(Action),
    #[error("map schema violation: {0}")]
    Schema(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

// ---- JSON map schema ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    width: u32,
    height: u32,
    start: (u32, u32),
    #[serde(default)]
    blocked: Vec<(u32, u32)>,
    #[serde(default)]
    labels: BTreeMap<String, Vec<(u32, u32)>>,
    actions: Vec<Action>,
    slip: f64,
    #[serde(default)]
    motion: MotionKind,
    #[serde(default)]
    deterministic: bool,
    observation: ObservationFile,
    #[serde(default)]
    wall_edges: Vec<(u32, u32, Dir)>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ObservationFile {
    Full,
    NoisyCell { true_obs_prob: f64 },
    LocalFeatures { features: BTreeMap<String, [Feature; 4]> },
}

/// Load and validate a grid map from a JSON file.
pub fn load_map(path: &Path) -> Result<MapSpec, EnvError> {
    let text = std::fs::read_to_string(path).map_err(|e| EnvError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: MapFile = serde_json::from_str(&text).map_err(|e| EnvError::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    map_from_file(file)
}

fn map_from_file(file: MapFile) -> Result<MapSpec, EnvError> {
    if file.width == 0 || file.height == 0 {
        return Err(EnvError::Schema("width and height must be positive".into()));
    }
    if !(0.0..=1.0).contains(&file.slip) {
        return Err(EnvError::Schema(format!("slip {} outside [0,1]", file.slip)));
    }
    if file.actions.is_empty() {
        return Err(EnvError::Schema("actions must be non-empty".into()));
    }
    let check = |c: Cell, what: &str| -> Result<(), EnvError> {
        if c.x >= file.width || c.y >= file.height {
            Err(EnvError::Schema(format!("{what} cell {c} out of bounds")))
        } else {
            Ok(())
        }
    };

    let blocked: BTreeSet<Cell> = file.blocked.iter().map(|&c| Cell::from(c)).collect();
    for &c in &blocked {
        check(c, "blocked")?;
    }
    let start = Cell::from(file.start);
    check(start, "start")?;
    if blocked.contains(&start) {
        return Err(EnvError::Schema(format!("start {start} is a blocked cell")));
    }

    let mut labels: BTreeMap<Cell, Labels> = BTreeMap::new();
    for (name, cells) in &file.labels {
        for &c in cells {
            let c = Cell::from(c);
            check(c, "label")?;
            labels.entry(c).or_default().insert(name.clone());
        }
    }

    let mut wall_edges: BTreeSet<(Cell, Dir)> = BTreeSet::new();
    let mut grid = GridSpec {
        width: file.width,
        height: file.height,
        start,
        blocked,
        labels,
        actions: file.actions,
        slip_intended: file.slip,
        motion: file.motion,
        deterministic: file.deterministic,
        wall_edges: BTreeSet::new(),
    };
    for &(x, y, d) in &file.wall_edges {
        let c = Cell::new(x, y);
        check(c, "wall edge")?;
        wall_edges.insert((c, d));
        if let Some(n) = grid.neighbor(c, d) {
            wall_edges.insert((n, d.opposite()));
        }
    }
    grid.wall_edges = wall_edges;

    let observation = match file.observation {
        ObservationFile::Full => ObservationSpec::Full,
        ObservationFile::NoisyCell { true_obs_prob } => {
            if !(0.0..=1.0).contains(&true_obs_prob) {
                return Err(EnvError::Schema(format!(
                    "true_obs_prob {true_obs_prob} outside [0,1]"
                )));
            }
            ObservationSpec::NoisyCell { true_obs_prob }
        }
        ObservationFile::LocalFeatures { features } => {
            let mut feature_map = BTreeMap::new();
            for (key, tuple) in features {
                let cell = parse_cell_key(&key)?;
                check(cell, "feature")?;
                feature_map.insert(cell, tuple);
            }
            for y in 0..grid.height {
                for x in 0..grid.width {
                    let c = Cell::new(x, y);
                    if !grid.blocked.contains(&c) && !feature_map.contains_key(&c) {
                        return Err(EnvError::Schema(format!("missing feature tuple for {c}")));
                    }
                }
            }
            ObservationSpec::LocalFeatures { feature_map }
        }
    };

    Ok(MapSpec { grid, observation })
}

fn parse_cell_key(key: &str) -> Result<Cell, EnvError> {
    let (x, y) = key
        .split_once(',')
        .ok_or_else(|| EnvError::Schema(format!("bad cell key `{key}`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| EnvError::Schema(format!("bad cell key `{key}`")))
    };
    Ok(Cell::new(parse(x)?, parse(y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_grid(w: u32, h: u32, actions: &[Action], slip: f64) -> GridSpec {
        GridSpec {
            width: w,
            height: h,
            start: Cell::new(0, 0),
            blocked: BTreeSet::new(),
            labels: BTreeMap::new(),
            actions: actions.to_vec(),
            slip_intended: slip,
            motion: MotionKind::Perpendicular,
            deterministic: false,
            wall_edges: BTreeSet::new(),
        }
    }

    const FIVE: [Action; 5] = [Action::Up, Action::Left, Action::Down, Action::Right, Action::Stay];

    #[test]
    fn interior_slip_distribution() {
        let g = open_grid(5, 5, &FIVE, 0.8);
        let dist = g.transition_dist(Cell::new(2, 2), Action::Right).unwrap();
        let lookup = |c: Cell| dist.iter().find(|(cc, _)| *cc == c).map(|(_, p)| *p);
        assert_eq!(lookup(Cell::new(3, 2)), Some(0.8));
        // sideways of `right` are north (2,1) and south (2,3)
        assert!((lookup(Cell::new(2, 1)).unwrap() - 0.1).abs() < 1e-12);
        assert!((lookup(Cell::new(2, 3)).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn stay_is_certain() {
        let g = open_grid(5, 5, &FIVE, 0.8);
        let dist = g.transition_dist(Cell::new(1, 4), Action::Stay).unwrap();
        assert_eq!(dist, vec![(Cell::new(1, 4), 1.0)]);
    }

    #[test]
    fn boundary_clamps_to_stay() {
        let g = open_grid(5, 5, &FIVE, 0.8);
        let dist = g.transition_dist(Cell::new(4, 2), Action::Right).unwrap();
        let stay = dist.iter().find(|(c, _)| *c == Cell::new(4, 2)).unwrap().1;
        assert!((stay - 0.8).abs() < 1e-12);
    }

    #[test]
    fn all_distributions_normalize() {
        let mut g = open_grid(5, 5, &FIVE, 0.8);
        g.blocked.insert(Cell::new(2, 1));
        for y in 0..5 {
            for x in 0..5 {
                let c = Cell::new(x, y);
                if g.blocked.contains(&c) {
                    continue;
                }
                for a in FIVE {
                    let dist = g.transition_dist(c, a).unwrap();
                    let total: f64 = dist.iter().map(|(_, p)| p).sum();
                    assert!((total - 1.0).abs() < 1e-12, "cell {c} action {a}");
                }
            }
        }
    }

    #[test]
    fn deterministic_flag_forces_intended() {
        let mut g = open_grid(5, 5, &FIVE, 0.8);
        g.deterministic = true;
        let dist = g.transition_dist(Cell::new(2, 2), Action::Up).unwrap();
        assert_eq!(dist, vec![(Cell::new(2, 1), 1.0)]);
    }

    #[test]
    fn invalid_action_is_rejected() {
        let g = open_grid(10, 10, &[Action::Up, Action::Left, Action::Down, Action::Right], 0.8);
        assert!(matches!(
            g.transition_dist(Cell::new(0, 0), Action::Stay),
            Err(EnvError::InvalidAction(Action::Stay))
        ));
    }

    #[test]
    fn noisy_observation_interior() {
        let g = open_grid(10, 10, &FIVE, 0.8);
        let o = ObservationSpec::NoisyCell { true_obs_prob: 0.9 };
        let dist = o.observation_dist(&g, Cell::new(4, 4));
        assert_eq!(dist.len(), 5);
        let p_true = dist.iter().find(|(o, _)| *o == Obs::Cell(Cell::new(4, 4))).unwrap().1;
        assert!((p_true - 0.9).abs() < 1e-12);
        for (obs, p) in &dist {
            if *obs != Obs::Cell(Cell::new(4, 4)) {
                assert!((p - 0.025).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noisy_observation_corner_renormalizes() {
        let g = open_grid(10, 10, &FIVE, 0.8);
        let o = ObservationSpec::NoisyCell { true_obs_prob: 0.9 };
        for corner in [Cell::new(0, 0), Cell::new(9, 0), Cell::new(0, 9), Cell::new(9, 9)] {
            let dist = o.observation_dist(&g, corner);
            assert_eq!(dist.len(), 3, "corner has two in-bounds neighbors");
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (obs, p) in &dist {
                if *obs != Obs::Cell(corner) {
                    assert!((p - 0.05).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn empirical_frequencies_match_analytic() {
        let g = open_grid(5, 5, &FIVE, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cell = Cell::new(2, 2);
        let n = 100_000usize;
        let dist = g.transition_dist(cell, Action::Down).unwrap();
        let mut counts: BTreeMap<Cell, usize> = BTreeMap::new();
        for _ in 0..n {
            let next = mdp_step(&g, cell, Action::Down, &mut rng).unwrap();
            *counts.entry(next).or_default() += 1;
        }
        for (c, p) in dist {
            let freq = *counts.get(&c).unwrap_or(&0) as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * se,
                "cell {c}: freq {freq} vs p {p}"
            );
        }
    }

    #[test]
    fn feasible_motion_splits_over_open_dirs() {
        let mut g = open_grid(4, 4, &[Action::Up, Action::Left, Action::Down, Action::Right], 0.9);
        g.motion = MotionKind::Feasible;
        g.wall_edges.insert((Cell::new(1, 1), Dir::N));
        g.wall_edges.insert((Cell::new(1, 0), Dir::S));
        // from (1,1): N is walled; intended E gets 0.9; W and S split 0.1
        let dist = g.transition_dist(Cell::new(1, 1), Action::Right).unwrap();
        let lookup = |c: Cell| dist.iter().find(|(cc, _)| *cc == c).map(|(_, p)| *p);
        assert_eq!(lookup(Cell::new(2, 1)), Some(0.9));
        assert!((lookup(Cell::new(0, 1)).unwrap() - 0.05).abs() < 1e-12);
        assert!((lookup(Cell::new(1, 2)).unwrap() - 0.05).abs() < 1e-12);
        // intended into the wall resolves to staying
        let dist = g.transition_dist(Cell::new(1, 1), Action::Up).unwrap();
        assert_eq!(lookup_in(&dist, Cell::new(1, 1)), Some(0.9));
    }

    fn lookup_in(dist: &[(Cell, f64)], c: Cell) -> Option<f64> {
        dist.iter().find(|(cc, _)| *cc == c).map(|(_, p)| *p)
    }

    #[test]
    fn map_with_blocked_start_is_rejected() {
        let json = serde_json::json!({
            "width": 3, "height": 3, "start": [1, 1], "blocked": [[1, 1]],
            "labels": {}, "actions": ["up"], "slip": 1.0,
            "observation": {"kind": "full"}
        });
        let file: MapFile = serde_json::from_value(json).unwrap();
        assert!(matches!(map_from_file(file), Err(EnvError::Schema(_))));
    }
}
