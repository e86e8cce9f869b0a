//! Chain-drag match-3: the player drags a path through at least three
//! orthogonally adjacent tiles of one kind. Matched tiles are removed, columns
//! collapse downward and the gaps refill from the top.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GameContext, GameKind, MiniGame, MiniGameError, MiniGameEvent, MiniGameResult, MiniGameState, Progress};

/// Serializes the generator position without u128, which serde's buffered
/// (tagged and flattened) representations cannot carry.
mod rng_serde {
    use rand_chacha::ChaCha8Rng;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct RngRepr {
        seed: String,
        stream: u64,
        word_pos_hi: u64,
        word_pos_lo: u64,
    }

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
        let pos = rng.get_word_pos();
        RngRepr {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos_hi: (pos >> 64) as u64,
            word_pos_lo: pos as u64,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
        use rand::SeedableRng;
        use serde::de::Error;
        let r = RngRepr::deserialize(d)?;
        let seed: [u8; 32] = hex::decode(&r.seed)
            .map_err(D::Error::custom)?
            .try_into()
            .map_err(|_| D::Error::custom("rng seed must be 32 bytes"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(r.stream);
        rng.set_word_pos((u128::from(r.word_pos_hi) << 64) | u128::from(r.word_pos_lo));
        Ok(rng)
    }
}

pub const MIN_CHAIN: usize = 3;
pub const POINTS_PER_TILE: f64 = 0.5;
pub const MAX_PERFORMANCE_POINTS: f64 = 5.0;
const RESHUFFLE_ATTEMPTS: usize = 100;

/// A board coordinate, `(row, col)` with row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell(pub usize, pub usize);

impl Cell {
    pub fn row(self) -> usize {
        self.0
    }

    pub fn col(self) -> usize {
        self.1
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.0.abs_diff(other.0) + self.1.abs_diff(other.1) == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match3Board {
    width: usize,
    height: usize,
    kinds: u8,
    /// Row-major tile kinds.
    cells: Vec<u8>,
    #[serde(with = "rng_serde")]
    rng: ChaCha8Rng,
    pub score: u32,
}

impl Match3Board {
    /// Generates a seeded board that has at least one valid chain.
    pub fn generate(seed: u64, width: usize, height: usize, kinds: u8) -> Result<Self, MiniGameError> {
        if width == 0 || height == 0 || width * height < 9 || kinds < 3 {
            return Err(MiniGameError::BadDimensions { width, height, kinds });
        }
        let mut board = Match3Board {
            width,
            height,
            kinds,
            cells: vec![0; width * height],
            rng: ChaCha8Rng::seed_from_u64(seed),
            score: 0,
        };
        board.fill_random();
        board.ensure_moves();
        Ok(board)
    }

    /// Builds a board from explicit rows. Intended for fixtures and tests.
    pub fn from_rows(rows: &[Vec<u8>], kinds: u8, seed: u64) -> Result<Self, MiniGameError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || rows.iter().any(|r| r.len() != width) || kinds < 3 || rows.iter().flatten().any(|&k| k >= kinds) {
            return Err(MiniGameError::BadDimensions { width, height, kinds });
        }
        Ok(Match3Board {
            width,
            height,
            kinds,
            cells: rows.concat(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            score: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kinds(&self) -> u8 {
        self.kinds
    }

    pub fn get(&self, cell: Cell) -> Option<u8> {
        (cell.0 < self.height && cell.1 < self.width).then(|| self.cells[cell.0 * self.width + cell.1])
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.width).map(<[u8]>::to_vec).collect()
    }

    /// All cells are always occupied: kinds are `0..kinds`.
    pub fn is_full(&self) -> bool {
        self.cells.len() == self.width * self.height && self.cells.iter().all(|&k| k < self.kinds)
    }

    pub fn is_valid_chain(&self, path: &[Cell]) -> bool {
        if path.len() < MIN_CHAIN {
            return false;
        }
        let Some(kind) = self.get(path[0]) else {
            return false;
        };
        let mut seen = std::collections::HashSet::with_capacity(path.len());
        path.iter().all(|&c| self.get(c) == Some(kind) && seen.insert(c))
            && path.windows(2).all(|w| w[0].is_adjacent(w[1]))
    }

    /// Clears a valid chain, collapses and refills. Returns the number of tiles
    /// eliminated; invalid paths leave the board untouched and return 0.
    pub fn apply_chain(&mut self, path: &[Cell]) -> u32 {
        if !self.is_valid_chain(path) {
            return 0;
        }
        let mut cleared = vec![false; self.cells.len()];
        for c in path {
            cleared[c.0 * self.width + c.1] = true;
        }
        for col in 0..self.width {
            let survivors: Vec<u8> = (0..self.height)
                .rev()
                .filter(|&row| !cleared[row * self.width + col])
                .map(|row| self.cells[row * self.width + col])
                .collect();
            let missing = self.height - survivors.len();
            for (i, kind) in survivors.into_iter().enumerate() {
                let row = self.height - 1 - i;
                self.cells[row * self.width + col] = kind;
            }
            for row in 0..missing {
                self.cells[row * self.width + col] = self.rng.random_range(0..self.kinds);
            }
        }
        let eliminated = path.len() as u32;
        self.score += eliminated;
        self.ensure_moves();
        eliminated
    }

    /// True iff some valid chain of length ≥ 3 exists.
    ///
    /// Any orthogonally connected same-kind region of three or more cells
    /// contains a simple three-cell path, so this reduces to a component-size
    /// flood fill.
    pub fn has_moves(&self) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let kind = self.cells[start];
            let mut size = 0;
            while let Some(i) = stack.pop() {
                size += 1;
                if size >= MIN_CHAIN {
                    return true;
                }
                for n in self.neighbours(i) {
                    if !seen[n] && self.cells[n] == kind {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        false
    }

    /// Any valid three-cell chain, for hints and simulated players.
    pub fn find_chain(&self) -> Option<Vec<Cell>> {
        for i in 0..self.cells.len() {
            for j in self.neighbours(i) {
                if self.cells[j] != self.cells[i] {
                    continue;
                }
                for k in self.neighbours(j) {
                    if k != i && self.cells[k] == self.cells[i] {
                        return Some([i, j, k].map(|x| Cell(x / self.width, x % self.width)).to_vec());
                    }
                }
            }
        }
        None
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> {
        let (w, h) = (self.width, self.height);
        let (r, c) = (i / w, i % w);
        [
            (r > 0).then(|| i - w),
            (r + 1 < h).then(|| i + w),
            (c > 0).then(|| i - 1),
            (c + 1 < w).then(|| i + 1),
        ]
        .into_iter()
        .flatten()
    }

    fn fill_random(&mut self) {
        for k in self.cells.iter_mut() {
            *k = self.rng.random_range(0..self.kinds);
        }
    }

    /// Permutes tiles until a move exists (bounded), then regenerates.
    fn ensure_moves(&mut self) {
        for _ in 0..RESHUFFLE_ATTEMPTS {
            if self.has_moves() {
                return;
            }
            self.cells.shuffle(&mut self.rng);
        }
        for _ in 0..RESHUFFLE_ATTEMPTS {
            if self.has_moves() {
                return;
            }
            self.fill_random();
        }
        if !self.has_moves() {
            // last resort on tiny boards with many kinds: plant a chain
            let kind = self.cells[0];
            let w = self.width;
            let line: [usize; 3] = if w >= 3 { [0, 1, 2] } else if w == 2 { [0, 1, w + 1] } else { [0, w, 2 * w] };
            for i in line {
                self.cells[i] = kind;
            }
        }
    }
}

/// Match-3 game session: a board plus a tile target that ends the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match3State {
    pub board: Match3Board,
    pub target_tiles: u32,
}

impl Match3State {
    pub fn performance_points(&self) -> f64 {
        (f64::from(self.board.score) * POINTS_PER_TILE).min(MAX_PERFORMANCE_POINTS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match3Game {
    pub width: usize,
    pub height: usize,
    pub kinds: u8,
    /// Tiles to eliminate before the game finishes on its own.
    pub target_tiles: u32,
}

impl Default for Match3Game {
    fn default() -> Self {
        Match3Game {
            width: 8,
            height: 8,
            kinds: 6,
            target_tiles: 10,
        }
    }
}

impl MiniGame for Match3Game {
    fn kind(&self) -> GameKind {
        GameKind::Match3
    }

    fn start(&self, seed: u64) -> MiniGameState {
        let board = Match3Board::generate(seed, self.width, self.height, self.kinds)
            .expect("registered match-3 dimensions are valid");
        MiniGameState::Match3(Match3State {
            board,
            target_tiles: self.target_tiles,
        })
    }

    fn handle(
        &self,
        state: &mut MiniGameState,
        event: &MiniGameEvent,
        _ctx: &GameContext<'_>,
    ) -> Result<Progress, MiniGameError> {
        let MiniGameState::Match3(s) = state else {
            return Err(MiniGameError::GameMismatch {
                active: state.kind(),
                got: GameKind::Match3,
            });
        };
        match event {
            MiniGameEvent::Chain { path } => {
                s.board.apply_chain(path);
                Ok(if s.board.score >= s.target_tiles {
                    Progress::Finished(MiniGameResult::completed(GameKind::Match3, s.performance_points()))
                } else {
                    Progress::Continue
                })
            }
            // finishing early counts only if something was matched
            MiniGameEvent::Finish if s.board.score > 0 => Ok(Progress::Finished(MiniGameResult::completed(
                GameKind::Match3,
                s.performance_points(),
            ))),
            MiniGameEvent::Finish | MiniGameEvent::Abandon => {
                Ok(Progress::Finished(MiniGameResult::abandoned(GameKind::Match3)))
            }
            other => Err(MiniGameError::UnsupportedEvent {
                game: GameKind::Match3,
                event: other.name().into(),
            }),
        }
    }
}
