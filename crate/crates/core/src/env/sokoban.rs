//! Sokoban rooms: text format, movement, deadlock detection, a push-optimal
//! breadth-first solver and a reverse-play room generator.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Some(Direction::Up),
            "down" => Some(Direction::Down),
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            _ => None,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SokobanCell {
    Wall,
    Floor,
    Target,
    Box,
    Player,
    BoxOnTarget,
    PlayerOnTarget,
}

impl SokobanCell {
    pub fn symbol(self) -> char {
        match self {
            SokobanCell::Wall => '#',
            SokobanCell::Floor => '_',
            SokobanCell::Target => 'O',
            SokobanCell::Box => 'X',
            SokobanCell::Player => 'P',
            SokobanCell::BoxOnTarget => '√',
            SokobanCell::PlayerOnTarget => 'S',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Some(match c {
            '#' => SokobanCell::Wall,
            '_' => SokobanCell::Floor,
            'O' => SokobanCell::Target,
            'X' => SokobanCell::Box,
            'P' => SokobanCell::Player,
            '√' => SokobanCell::BoxOnTarget,
            'S' => SokobanCell::PlayerOnTarget,
            _ => return None,
        })
    }

    fn is_target(self) -> bool {
        matches!(self, SokobanCell::Target | SokobanCell::BoxOnTarget | SokobanCell::PlayerOnTarget)
    }

    fn has_box(self) -> bool {
        matches!(self, SokobanCell::Box | SokobanCell::BoxOnTarget)
    }

    fn has_player(self) -> bool {
        matches!(self, SokobanCell::Player | SokobanCell::PlayerOnTarget)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SokobanRoom {
    size: usize,
    cells: Vec<SokobanCell>,
    num_boxes: usize,
    steps_taken: u32,
}

impl SokobanRoom {
    /// Assembles a room from its static layer and dynamic pieces.
    pub fn assemble(size: usize, walls: &[bool], targets: &[bool], boxes: &[usize], player: usize) -> Result<Self> {
        let n = size * size;
        if walls.len() != n || targets.len() != n {
            return Err(Error::contract("room layers have the wrong size"));
        }
        let mut cells = vec![SokobanCell::Floor; n];
        for i in 0..n {
            cells[i] = if walls[i] {
                SokobanCell::Wall
            } else if targets[i] {
                SokobanCell::Target
            } else {
                SokobanCell::Floor
            };
        }
        for &b in boxes {
            cells[b] = if targets[b] { SokobanCell::BoxOnTarget } else { SokobanCell::Box };
        }
        cells[player] = if targets[player] {
            SokobanCell::PlayerOnTarget
        } else {
            SokobanCell::Player
        };
        Self::from_cells(size, cells)
    }

    pub fn from_cells(size: usize, cells: Vec<SokobanCell>) -> Result<Self> {
        if cells.len() != size * size {
            return Err(Error::Parse(format!("expected {} cells, got {}", size * size, cells.len())));
        }
        let players = cells.iter().filter(|c| c.has_player()).count();
        if players != 1 {
            return Err(Error::Parse(format!("expected exactly one player, found {players}")));
        }
        let boxes = cells.iter().filter(|c| c.has_box()).count();
        let targets = cells.iter().filter(|c| c.is_target()).count();
        if boxes == 0 || boxes != targets {
            return Err(Error::Parse(format!("{boxes} boxes but {targets} targets")));
        }
        Ok(Self {
            size,
            cells,
            num_boxes: boxes,
            steps_taken: 0,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_boxes(&self) -> usize {
        self.num_boxes
    }

    pub fn steps_taken(&self) -> u32 {
        self.steps_taken
    }

    pub fn cells(&self) -> &[SokobanCell] {
        &self.cells
    }

    pub fn cell(&self, idx: usize) -> SokobanCell {
        self.cells[idx]
    }

    pub fn player(&self) -> usize {
        self.cells.iter().position(|c| c.has_player()).expect("room has a player")
    }

    pub fn boxes(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.cells[i].has_box()).collect()
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.cells[i].is_target()).collect()
    }

    pub fn is_wall(&self, idx: usize) -> bool {
        self.cells[idx] == SokobanCell::Wall
    }

    pub fn is_target(&self, idx: usize) -> bool {
        self.cells[idx].is_target()
    }

    pub fn has_box(&self, idx: usize) -> bool {
        self.cells[idx].has_box()
    }

    pub fn walls_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| *c == SokobanCell::Wall).collect()
    }

    pub fn targets_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.is_target()).collect()
    }

    pub fn boxes_on_target(&self) -> usize {
        self.cells.iter().filter(|c| **c == SokobanCell::BoxOnTarget).count()
    }

    pub fn is_solved(&self) -> bool {
        self.boxes_on_target() == self.num_boxes
    }

    pub fn neighbor(&self, idx: usize, dir: Direction) -> Option<usize> {
        neighbor(self.size, idx, dir)
    }

    fn set_box(&mut self, idx: usize, present: bool) {
        let target = self.cells[idx].is_target();
        self.cells[idx] = match (present, target) {
            (true, true) => SokobanCell::BoxOnTarget,
            (true, false) => SokobanCell::Box,
            (false, true) => SokobanCell::Target,
            (false, false) => SokobanCell::Floor,
        };
    }

    fn set_player(&mut self, idx: usize, present: bool) {
        let target = self.cells[idx].is_target();
        self.cells[idx] = match (present, target) {
            (true, true) => SokobanCell::PlayerOnTarget,
            (true, false) => SokobanCell::Player,
            (false, true) => SokobanCell::Target,
            (false, false) => SokobanCell::Floor,
        };
    }

    /// One player move. Returns the new room and whether a box was pushed, or
    /// `None` when the move is blocked by a wall or an immovable box.
    pub fn try_move(&self, dir: Direction) -> Option<(SokobanRoom, bool)> {
        let p = self.player();
        let next = self.neighbor(p, dir)?;
        if self.is_wall(next) {
            return None;
        }
        let mut room = self.clone();
        let mut pushed = false;
        if self.has_box(next) {
            let beyond = self.neighbor(next, dir)?;
            if self.is_wall(beyond) || self.has_box(beyond) {
                return None;
            }
            room.set_box(next, false);
            room.set_box(beyond, true);
            pushed = true;
        }
        room.set_player(p, false);
        room.set_player(next, true);
        room.steps_taken += 1;
        Some((room, pushed))
    }

    /// Applies a whole move sequence, or `None` if any move is blocked.
    pub fn apply_moves(&self, moves: &[Direction]) -> Option<SokobanRoom> {
        moves
            .iter()
            .try_fold(self.clone(), |room, &d| room.try_move(d).map(|(r, _)| r))
    }

    fn blocked(&self, idx: usize, dir: Direction) -> bool {
        self.neighbor(idx, dir).is_none_or(|n| self.is_wall(n))
    }

    /// A box off target is stuck in a corner, or a 2×2 block of walls and boxes
    /// holds an off-target box.
    pub fn has_deadlock(&self) -> bool {
        for b in self.boxes() {
            if self.is_target(b) {
                continue;
            }
            let vertical = self.blocked(b, Direction::Up) || self.blocked(b, Direction::Down);
            let horizontal = self.blocked(b, Direction::Left) || self.blocked(b, Direction::Right);
            if vertical && horizontal {
                return true;
            }
        }
        let s = self.size;
        for r in 0..s.saturating_sub(1) {
            for c in 0..s.saturating_sub(1) {
                let block = [r * s + c, r * s + c + 1, (r + 1) * s + c, (r + 1) * s + c + 1];
                let solid = block.iter().all(|&i| self.is_wall(i) || self.has_box(i));
                let loose_box = block.iter().any(|&i| self.has_box(i) && !self.is_target(i));
                if solid && loose_box {
                    return true;
                }
            }
        }
        false
    }

    /// One row per line, one symbol per cell.
    pub fn to_text(&self) -> String {
        self.cells
            .chunks(self.size)
            .map(|row| row.iter().map(|c| c.symbol()).collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<char>> = text
            .lines()
            .map(|l| l.chars().filter(|c| !c.is_whitespace()).collect::<Vec<_>>())
            .filter(|r| !r.is_empty())
            .collect();
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(Error::Parse("sokoban room must be a non-empty square grid".into()));
        }
        let cells = rows
            .into_iter()
            .flatten()
            .map(|c| SokobanCell::from_symbol(c).ok_or_else(|| Error::Parse(format!("unknown symbol {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_cells(size, cells)
    }
}

fn neighbor(size: usize, idx: usize, dir: Direction) -> Option<usize> {
    let (dr, dc) = dir.delta();
    let r = (idx / size) as isize + dr;
    let c = (idx % size) as isize + dc;
    if r < 0 || c < 0 || r >= size as isize || c >= size as isize {
        None
    } else {
        Some(r as usize * size + c as usize)
    }
}

/// Result of the breadth-first solver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    /// Minimum number of box pushes.
    pub pushes: u32,
    /// A concrete move sequence realising that push count.
    pub moves: Vec<Direction>,
}

struct Statics {
    size: usize,
    walls: Vec<bool>,
    targets: Vec<bool>,
    dead: Vec<bool>,
}

impl Statics {
    fn new(room: &SokobanRoom) -> Self {
        let size = room.size;
        let walls = room.walls_mask();
        let targets = room.targets_mask();
        // A square is live if a box on it could be pulled there from some target.
        let mut live = vec![false; size * size];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for (i, &t) in targets.iter().enumerate() {
            if t {
                live[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(c) = queue.pop_front() {
            for d in Direction::ALL {
                let Some(n1) = neighbor(size, c, d) else { continue };
                let Some(n2) = neighbor(size, n1, d) else { continue };
                if !walls[n1] && !walls[n2] && !live[n1] {
                    live[n1] = true;
                    queue.push_back(n1);
                }
            }
        }
        let dead = (0..size * size).map(|i| !walls[i] && !live[i]).collect();
        Self {
            size,
            walls,
            targets,
            dead,
        }
    }

    fn reachable(&self, player: usize, boxes: &[u16]) -> Vec<bool> {
        let mut seen = vec![false; self.size * self.size];
        let mut queue = VecDeque::from([player]);
        seen[player] = true;
        while let Some(c) = queue.pop_front() {
            for d in Direction::ALL {
                if let Some(n) = neighbor(self.size, c, d) {
                    if !seen[n] && !self.walls[n] && !boxes.contains(&(n as u16)) {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        seen
    }

    fn path(&self, from: usize, to: usize, boxes: &[u16]) -> Option<Vec<Direction>> {
        let mut prev: HashMap<usize, (usize, Direction)> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = HashSet::from([from]);
        while let Some(c) = queue.pop_front() {
            if c == to {
                let mut moves = Vec::new();
                let mut cur = to;
                while cur != from {
                    let (p, d) = prev[&cur];
                    moves.push(d);
                    cur = p;
                }
                moves.reverse();
                return Some(moves);
            }
            for d in Direction::ALL {
                if let Some(n) = neighbor(self.size, c, d) {
                    if !self.walls[n] && !boxes.contains(&(n as u16)) && seen.insert(n) {
                        prev.insert(n, (c, d));
                        queue.push_back(n);
                    }
                }
            }
        }
        None
    }
}

/// Breadth-first search over push states. Returns the push-optimal solution if
/// one exists within `max_pushes`.
pub fn solve(room: &SokobanRoom, max_pushes: u32) -> Option<Solution> {
    let st = Statics::new(room);
    let mut boxes: Vec<u16> = room.boxes().into_iter().map(|b| b as u16).collect();
    boxes.sort_unstable();
    let solved = |bx: &[u16]| bx.iter().all(|&b| st.targets[b as usize]);

    struct Node {
        boxes: Vec<u16>,
        player: usize,
        parent: usize,
        push: Option<(u16, Direction)>,
        depth: u32,
    }

    let canon = |player: usize, bx: &[u16]| -> u16 {
        st.reachable(player, bx).iter().position(|&r| r).unwrap_or(player) as u16
    };

    let start_player = room.player();
    let mut nodes = vec![Node {
        boxes: boxes.clone(),
        player: start_player,
        parent: usize::MAX,
        push: None,
        depth: 0,
    }];
    let mut seen: HashSet<(Vec<u16>, u16)> = HashSet::new();
    seen.insert((boxes.clone(), canon(start_player, &boxes)));
    let mut queue = VecDeque::from([0usize]);
    let mut goal = None;
    if solved(&boxes) {
        goal = Some(0);
    }
    while goal.is_none() {
        let Some(idx) = queue.pop_front() else { break };
        if nodes[idx].depth >= max_pushes {
            continue;
        }
        let reach = st.reachable(nodes[idx].player, &nodes[idx].boxes);
        let current = nodes[idx].boxes.clone();
        for (bi, &b) in current.iter().enumerate() {
            for d in Direction::ALL {
                let Some(dest) = neighbor(st.size, b as usize, d) else { continue };
                let Some(stand) = neighbor(st.size, b as usize, d.opposite()) else { continue };
                if !reach[stand] || st.walls[dest] || st.dead[dest] || current.contains(&(dest as u16)) {
                    continue;
                }
                let mut next = current.clone();
                next[bi] = dest as u16;
                next.sort_unstable();
                let key = (next.clone(), canon(b as usize, &next));
                if !seen.insert(key) {
                    continue;
                }
                let done = solved(&next);
                nodes.push(Node {
                    boxes: next,
                    player: b as usize,
                    parent: idx,
                    push: Some((b, d)),
                    depth: nodes[idx].depth + 1,
                });
                let id = nodes.len() - 1;
                if done {
                    goal = Some(id);
                    break;
                }
                queue.push_back(id);
            }
            if goal.is_some() {
                break;
            }
        }
    }
    let goal = goal?;

    let mut pushes = Vec::new();
    let mut cur = goal;
    while let Some(p) = nodes[cur].push {
        pushes.push(p);
        cur = nodes[cur].parent;
    }
    pushes.reverse();

    let mut moves = Vec::new();
    let mut player = start_player;
    let mut bx = boxes;
    for (b, d) in &pushes {
        let stand = neighbor(st.size, *b as usize, d.opposite())?;
        moves.extend(st.path(player, stand, &bx)?);
        moves.push(*d);
        let dest = neighbor(st.size, *b as usize, *d)? as u16;
        for slot in bx.iter_mut() {
            if slot == b {
                *slot = dest;
            }
        }
        bx.sort_unstable();
        player = *b as usize;
    }
    Some(Solution {
        pushes: pushes.len() as u32,
        moves,
    })
}

/// Parameters of the room generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomParams {
    pub size: usize,
    pub num_boxes: usize,
    pub search_depth: u32,
    pub max_solution_steps: u32,
}

impl RoomParams {
    pub fn validate(&self) -> Result<()> {
        if self.size < 4 {
            return Err(Error::config(format!("sokoban size must be >= 4, got {}", self.size)));
        }
        let floor_area = (self.size - 2) * (self.size - 2);
        if self.num_boxes == 0 || self.num_boxes > floor_area / 4 {
            return Err(Error::config(format!(
                "sokoban num_boxes must be in 1..={} for size {}, got {}",
                floor_area / 4,
                self.size,
                self.num_boxes
            )));
        }
        if (self.max_solution_steps as usize) < self.num_boxes {
            return Err(Error::config("max_solution_steps must be at least num_boxes"));
        }
        Ok(())
    }
}

const MAX_GENERATION_ATTEMPTS: u32 = 256;

fn carve_topology(size: usize, rng: &mut impl Rng) -> Vec<bool> {
    let mut walls = vec![true; size * size];
    let interior = size - 2;
    let steps = (interior * interior * 3) / 2 + 4;
    let mut r = rng.gen_range(1..=interior);
    let mut c = rng.gen_range(1..=interior);
    let mut dir = *Direction::ALL.choose(rng).expect("non-empty");
    for _ in 0..steps {
        walls[r * size + c] = false;
        if rng.gen_bool(0.35) {
            dir = *Direction::ALL.choose(rng).expect("non-empty");
        }
        let (dr, dc) = dir.delta();
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr >= 1 && nc >= 1 && nr <= interior as isize && nc <= interior as isize {
            r = nr as usize;
            c = nc as usize;
        } else {
            dir = *Direction::ALL.choose(rng).expect("non-empty");
        }
    }
    walls
}

/// Generates a room by reverse play: boxes start on their targets and the
/// player pulls them away for up to `search_depth` random steps. The most
/// scrambled state seen is kept and certified by [`solve`].
pub fn sokoban_generate_room(params: RoomParams, seed: u64) -> Result<SokobanRoom> {
    params.validate()?;
    let mut rng = seeds::rng(seed, &[0x50_4B]);
    let size = params.size;
    for _attempt in 0..MAX_GENERATION_ATTEMPTS {
        let walls = carve_topology(size, &mut rng);
        let mut floor: Vec<usize> = (0..size * size).filter(|&i| !walls[i]).collect();
        if floor.len() < params.num_boxes * 3 + 1 {
            continue;
        }
        floor.shuffle(&mut rng);
        let targets_list: Vec<usize> = floor[..params.num_boxes].to_vec();
        let mut targets = vec![false; size * size];
        for &t in &targets_list {
            targets[t] = true;
        }
        let mut player = floor[params.num_boxes];
        let mut boxes = targets_list.clone();
        let home = targets_list.clone();

        let score = |bx: &[usize]| -> usize {
            let off = bx.iter().filter(|&&b| !targets[b]).count();
            let displacement: usize = bx
                .iter()
                .zip(&home)
                .map(|(&b, &h)| (b / size).abs_diff(h / size) + (b % size).abs_diff(h % size))
                .sum();
            off * displacement
        };

        let mut best: Option<(usize, Vec<usize>, usize)> = None;
        for _ in 0..params.search_depth {
            let d = *Direction::ALL.choose(&mut rng).expect("non-empty");
            let Some(next) = neighbor(size, player, d) else { continue };
            if walls[next] || boxes.contains(&next) {
                continue;
            }
            let behind = neighbor(size, player, d.opposite());
            let pull = behind.and_then(|b| boxes.iter().position(|&x| x == b));
            if let Some(bi) = pull {
                if rng.gen_bool(0.75) {
                    boxes[bi] = player;
                }
            }
            player = next;
            let s = score(&boxes);
            if s > 0 && best.as_ref().is_none_or(|(bs, _, _)| s > *bs) {
                best = Some((s, boxes.clone(), player));
            }
        }
        let Some((_, bx, pl)) = best else { continue };
        let room = SokobanRoom::assemble(size, &walls, &targets, &bx, pl)?;
        if room.is_solved() || room.has_deadlock() {
            continue;
        }
        if let Some(sol) = solve(&room, params.max_solution_steps) {
            if sol.pushes >= 1 {
                return Ok(room);
            }
        }
    }
    Err(Error::GenerationExhausted {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPLE: &str = "######\n#P___#\n#_X__#\n#__O_#\n#____#\n######";

    #[test]
    fn text_round_trip_and_symbols() {
        let room = SokobanRoom::from_text(SIMPLE).unwrap();
        assert_eq!(room.to_text(), SIMPLE);
        let solved = SokobanRoom::from_text("####\n#√P#\n#__#\n####").unwrap();
        assert!(solved.is_solved());
        assert!(solved.to_text().contains('√'));
    }

    #[test]
    fn blocked_moves_are_rejected() {
        let room = SokobanRoom::from_text(SIMPLE).unwrap();
        assert!(room.try_move(Direction::Up).is_none());
        assert!(room.try_move(Direction::Left).is_none());
        let (moved, pushed) = room.try_move(Direction::Right).unwrap();
        assert!(!pushed);
        assert_eq!(moved.player(), 8);
    }

    #[test]
    fn solver_finds_push_optimal_solution() {
        let room = SokobanRoom::from_text(SIMPLE).unwrap();
        let sol = solve(&room, 21).unwrap();
        assert_eq!(sol.pushes, 2);
        let end = room.apply_moves(&sol.moves).unwrap();
        assert!(end.is_solved());
    }

    #[test]
    fn corner_box_is_deadlocked() {
        let room = SokobanRoom::from_text("#####\n#X__#\n#_P_#\n#__O#\n#####").unwrap();
        assert!(room.has_deadlock());
        assert!(solve(&room, 50).is_none());
    }

    #[test]
    fn rejects_bad_params() {
        let p = RoomParams {
            size: 3,
            num_boxes: 1,
            search_depth: 100,
            max_solution_steps: 21,
        };
        assert!(matches!(sokoban_generate_room(p, 0), Err(Error::Config(_))));
        let p = RoomParams {
            size: 6,
            num_boxes: 5,
            search_depth: 100,
            max_solution_steps: 21,
        };
        assert!(matches!(sokoban_generate_room(p, 0), Err(Error::Config(_))));
    }
}
