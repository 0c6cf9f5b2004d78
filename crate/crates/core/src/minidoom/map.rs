use std::fmt;

/// Grid coordinate: `x` is the column, `y` the row (row 0 is the first line of the map file).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub const fn new(x: usize, y: usize) -> Self {
        Pos { x, y }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Floor,
}

pub const DEFAULT_EPISODE_STEP_LIMIT: u32 = 2100;

#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    pub width: usize,
    pub height: usize,
    cells: Vec<Cell>,
    pub agent_spawns: Vec<Pos>,
    pub monster_spawns: Vec<Pos>,
    pub object_spawns: Vec<Pos>,
    pub episode_step_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("empty map")]
    Empty,
    #[error("line {line}: non-rectangular grid (expected width {expected}, found {found})")]
    NotRectangular { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: unknown character {ch:?}")]
    UnknownChar { line: usize, column: usize, ch: char },
    #[error("line {line}, column {column}: unwalled border")]
    UnwalledBorder { line: usize, column: usize },
    #[error("no agent spawn ('S') in map")]
    NoAgentSpawn,
    #[error("episode step limit must be positive")]
    ZeroStepLimit,
}

impl MapSpec {
    /// Parses the character grid format: `#` wall, `.` floor, `S` agent spawn,
    /// `M` monster spawn, `O` object spawn. Line and column numbers in errors are 1-based.
    pub fn parse(text: &str) -> Result<MapSpec, MapError> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .collect();
        // A single trailing newline is allowed; blank trailing lines are not part of the grid.
        let rows: Vec<&str> = match rows.iter().rposition(|r| !r.is_empty()) {
            Some(last) => rows[..=last].to_vec(),
            None => return Err(MapError::Empty),
        };
        let height = rows.len();
        let width = rows[0].chars().count();
        if width == 0 {
            return Err(MapError::Empty);
        }

        let mut cells = Vec::with_capacity(width * height);
        let mut agent_spawns = Vec::new();
        let mut monster_spawns = Vec::new();
        let mut object_spawns = Vec::new();

        for (y, row) in rows.iter().enumerate() {
            let found = row.chars().count();
            if found != width {
                return Err(MapError::NotRectangular { line: y + 1, expected: width, found });
            }
            for (x, ch) in row.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Floor,
                    'S' => {
                        agent_spawns.push(Pos::new(x, y));
                        Cell::Floor
                    }
                    'M' => {
                        monster_spawns.push(Pos::new(x, y));
                        Cell::Floor
                    }
                    'O' => {
                        object_spawns.push(Pos::new(x, y));
                        Cell::Floor
                    }
                    other => {
                        return Err(MapError::UnknownChar { line: y + 1, column: x + 1, ch: other })
                    }
                };
                let on_border = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
                if on_border && cell != Cell::Wall {
                    return Err(MapError::UnwalledBorder { line: y + 1, column: x + 1 });
                }
                cells.push(cell);
            }
        }
        if agent_spawns.is_empty() {
            return Err(MapError::NoAgentSpawn);
        }

        Ok(MapSpec {
            width,
            height,
            cells,
            agent_spawns,
            monster_spawns,
            object_spawns,
            episode_step_limit: DEFAULT_EPISODE_STEP_LIMIT,
        })
    }

    pub fn with_step_limit(mut self, limit: u32) -> Result<MapSpec, MapError> {
        if limit == 0 {
            return Err(MapError::ZeroStepLimit);
        }
        self.episode_step_limit = limit;
        Ok(self)
    }

    pub fn cell(&self, pos: Pos) -> Cell {
        if pos.x >= self.width || pos.y >= self.height {
            return Cell::Wall;
        }
        self.cells[pos.y * self.width + pos.x]
    }

    pub fn is_floor(&self, pos: Pos) -> bool {
        self.cell(pos) == Cell::Floor
    }
}

/// Convenience alias matching the map-loading operation name.
pub fn load_map(text: &str) -> Result<MapSpec, MapError> {
    MapSpec::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_map() {
        let m = load_map("###\n#S#\n###").unwrap();
        assert_eq!((m.width, m.height), (3, 3));
        assert_eq!(m.agent_spawns, vec![Pos::new(1, 1)]);
        assert!(m.monster_spawns.is_empty());
        assert!(m.object_spawns.is_empty());
        assert_eq!(m.episode_step_limit, DEFAULT_EPISODE_STEP_LIMIT);
    }

    #[test]
    fn registers_spawns() {
        let m = load_map("#####\n#SMO#\n#..M#\n#####\n").unwrap();
        assert_eq!(m.monster_spawns, vec![Pos::new(2, 1), Pos::new(3, 2)]);
        assert_eq!(m.object_spawns, vec![Pos::new(3, 1)]);
        assert!(m.is_floor(Pos::new(2, 1)));
        assert!(!m.is_floor(Pos::new(0, 0)));
    }

    #[test]
    fn rejects_unwalled_border() {
        let err = load_map("###\n.S#\n###").unwrap_err();
        assert_eq!(err, MapError::UnwalledBorder { line: 2, column: 1 });
        assert!(err.to_string().contains("unwalled border"));
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = load_map("####\n#S#\n####").unwrap_err();
        assert!(matches!(err, MapError::NotRectangular { line: 2, .. }));
    }

    #[test]
    fn rejects_unknown_char() {
        let err = load_map("###\n#X#\n###").unwrap_err();
        assert_eq!(err, MapError::UnknownChar { line: 2, column: 2, ch: 'X' });
    }

    #[test]
    fn rejects_missing_spawn() {
        assert_eq!(load_map("###\n#.#\n###").unwrap_err(), MapError::NoAgentSpawn);
        assert_eq!(load_map("\n\n").unwrap_err(), MapError::Empty);
    }

    #[test]
    fn crlf_lines() {
        let m = load_map("###\r\n#S#\r\n###\r\n").unwrap();
        assert_eq!(m.height, 3);
    }
}
