//! Grid environment, obstacle-influence costmaps and robot perception.
//!
//! Every free cell accumulates an influence from each obstacle that halves
//! with every Manhattan step, starting from `max(rows, cols)` at distance 1.
//! Raw influence values are then squeezed into `Q`-bit integer codes, with
//! obstacle cells pinned to the largest code.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of bits per cell accepted by [`GridMap`].
pub const MAX_QUBITS_PER_CELL: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("malformed header: expected `rows=<int> cols=<int> q=<int> range=<int>`, got `{0}`")]
    MalformedHeader(String),
    #[error("`{field}` must be at least 1")]
    ZeroDimension { field: &'static str },
    #[error("q={0} exceeds the supported maximum of {MAX_QUBITS_PER_CELL} bits per cell")]
    TooManyBits(u32),
    #[error("expected {expected} grid rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: unknown cell character {ch:?}")]
    UnknownCell {
        line: usize,
        column: usize,
        ch: char,
    },
    #[error("line {line}: trailing whitespace or carriage return")]
    TrailingWhitespace { line: usize },
    #[error("more than one robot cell")]
    DuplicateRobot,
    #[error("robot at {0} sits on an obstacle")]
    RobotOnObstacle(Cell),
    #[error("cell {cell} lies outside the {rows}x{cols} grid")]
    OutOfBounds {
        cell: Cell,
        rows: usize,
        cols: usize,
    },
    #[error("the map has no robot cell")]
    NoRobot,
    #[error("code {code} cannot be written as a single digit")]
    CodeNotDigit { code: u32 },
    #[error("invalid perception: {0}")]
    InvalidPerception(String),
}

/// A grid cell addressed by row and column, (0, 0) being the upper-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

impl From<(usize, usize)> for Cell {
    fn from((row, col): (usize, usize)) -> Self {
        Cell { row, col }
    }
}

/// The environment: grid size, obstacles, the robot and the encoding parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    obstacles: BTreeSet<Cell>,
    robot: Option<Cell>,
    qubits_per_cell: u32,
    sensor_range: usize,
}

impl GridMap {
    pub fn new(
        rows: usize,
        cols: usize,
        obstacles: impl IntoIterator<Item = Cell>,
        robot: Option<Cell>,
        qubits_per_cell: u32,
        sensor_range: usize,
    ) -> Result<Self, MapError> {
        for (field, value) in [
            ("rows", rows),
            ("cols", cols),
            ("q", qubits_per_cell as usize),
            ("range", sensor_range),
        ] {
            if value == 0 {
                return Err(MapError::ZeroDimension { field });
            }
        }
        if qubits_per_cell > MAX_QUBITS_PER_CELL {
            return Err(MapError::TooManyBits(qubits_per_cell));
        }
        let obstacles: BTreeSet<Cell> = obstacles.into_iter().collect();
        let check = |cell: Cell| {
            if cell.row < rows && cell.col < cols {
                Ok(())
            } else {
                Err(MapError::OutOfBounds { cell, rows, cols })
            }
        };
        for &cell in &obstacles {
            check(cell)?;
        }
        if let Some(cell) = robot {
            check(cell)?;
            if obstacles.contains(&cell) {
                return Err(MapError::RobotOnObstacle(cell));
            }
        }
        Ok(GridMap {
            rows,
            cols,
            obstacles,
            robot,
            qubits_per_cell,
            sensor_range,
        })
    }

    /// Parses the text map format:
    ///
    /// ```text
    /// rows=2 cols=2 q=1 range=2
    /// R.
    /// .#
    /// ```
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut lines = body.split('\n');
        let header = lines.next().unwrap_or_default();
        let (rows, cols, q, range) = parse_header(header)?;

        let mut obstacles = BTreeSet::new();
        let mut robot = None;
        let mut found = 0;
        for (row, line) in lines.enumerate() {
            let line_no = row + 2;
            if line.ends_with(|c: char| c.is_whitespace()) {
                return Err(MapError::TrailingWhitespace { line: line_no });
            }
            found += 1;
            if row >= rows {
                continue;
            }
            let width = line.chars().count();
            if width != cols {
                return Err(MapError::RaggedRow {
                    line: line_no,
                    expected: cols,
                    found: width,
                });
            }
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => {
                        obstacles.insert(Cell::new(row, col));
                    }
                    'R' => {
                        if robot.replace(Cell::new(row, col)).is_some() {
                            return Err(MapError::DuplicateRobot);
                        }
                    }
                    ch => {
                        return Err(MapError::UnknownCell {
                            line: line_no,
                            column: col + 1,
                            ch,
                        })
                    }
                }
            }
        }
        if found != rows {
            return Err(MapError::RowCount {
                expected: rows,
                found,
            });
        }
        GridMap::new(rows, cols, obstacles, robot, q, range)
    }

    /// Renders the map in the format accepted by [`GridMap::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "rows={} cols={} q={} range={}\n",
            self.rows, self.cols, self.qubits_per_cell, self.sensor_range
        );
        for row in 0..self.rows {
            for col in 0..self.cols {
                let cell = Cell::new(row, col);
                out.push(if self.obstacles.contains(&cell) {
                    '#'
                } else if self.robot == Some(cell) {
                    'R'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn obstacles(&self) -> &BTreeSet<Cell> {
        &self.obstacles
    }

    pub fn robot(&self) -> Option<Cell> {
        self.robot
    }

    pub fn qubits_per_cell(&self) -> u32 {
        self.qubits_per_cell
    }

    pub fn sensor_range(&self) -> usize {
        self.sensor_range
    }

    /// Largest code representable with `Q` bits, reserved for obstacles.
    pub fn max_code(&self) -> u32 {
        max_code(self.qubits_per_cell)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacles.contains(&cell)
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.is_obstacle(cell)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| !self.is_obstacle(c))
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let cols = self.cols;
        (0..self.rows * self.cols).map(move |i| Cell::new(i / cols, i % cols))
    }

    pub fn with_robot(&self, robot: Option<Cell>) -> Result<Self, MapError> {
        GridMap::new(
            self.rows,
            self.cols,
            self.obstacles.iter().copied(),
            robot,
            self.qubits_per_cell,
            self.sensor_range,
        )
    }

    pub fn with_sensor_range(&self, sensor_range: usize) -> Result<Self, MapError> {
        GridMap::new(
            self.rows,
            self.cols,
            self.obstacles.iter().copied(),
            self.robot,
            self.qubits_per_cell,
            sensor_range,
        )
    }
}

fn parse_header(header: &str) -> Result<(usize, usize, u32, usize), MapError> {
    let malformed = || MapError::MalformedHeader(header.to_string());
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 {
        return Err(malformed());
    }
    let mut values = [0usize; 4];
    for (slot, (field, key)) in values
        .iter_mut()
        .zip(fields.iter().zip(["rows", "cols", "q", "range"]))
    {
        let value = field
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(malformed)?;
        if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        *slot = value.parse().map_err(|_| malformed())?;
    }
    let q = u32::try_from(values[2]).map_err(|_| MapError::TooManyBits(u32::MAX))?;
    Ok((values[0], values[1], q, values[3]))
}

pub(crate) fn max_code(qubits_per_cell: u32) -> u32 {
    ((1u64 << qubits_per_cell) - 1) as u32
}

/// Raw obstacle influence plus the normalized `Q`-bit code of every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Costmap {
    rows: usize,
    cols: usize,
    qubits_per_cell: u32,
    raw: Vec<f64>,
    code: Vec<u32>,
}

impl Costmap {
    /// Builds a costmap straight from per-cell codes (row-major), e.g. a
    /// hand-written register image. Raw values mirror the codes.
    pub fn from_codes(
        rows: usize,
        cols: usize,
        qubits_per_cell: u32,
        codes: Vec<u32>,
    ) -> Result<Self, MapError> {
        if rows == 0 || cols == 0 {
            return Err(MapError::ZeroDimension { field: "rows/cols" });
        }
        if qubits_per_cell == 0 {
            return Err(MapError::ZeroDimension { field: "q" });
        }
        if qubits_per_cell > MAX_QUBITS_PER_CELL {
            return Err(MapError::TooManyBits(qubits_per_cell));
        }
        if codes.len() != rows * cols {
            return Err(MapError::RowCount {
                expected: rows * cols,
                found: codes.len(),
            });
        }
        let top = max_code(qubits_per_cell);
        if let Some(&bad) = codes.iter().find(|&&c| c > top) {
            return Err(MapError::InvalidPerception(format!(
                "code {bad} does not fit in {qubits_per_cell} bits"
            )));
        }
        Ok(Costmap {
            rows,
            cols,
            qubits_per_cell,
            raw: codes.iter().map(|&c| f64::from(c)).collect(),
            code: codes,
        })
    }

    /// Binary occupancy image: obstacles carry the maximum code, free cells 0.
    pub fn occupancy(map: &GridMap) -> Self {
        let top = map.max_code();
        let code: Vec<u32> = map
            .cells()
            .map(|c| if map.is_obstacle(c) { top } else { 0 })
            .collect();
        Costmap {
            rows: map.rows,
            cols: map.cols,
            qubits_per_cell: map.qubits_per_cell,
            raw: code.iter().map(|&c| f64::from(c)).collect(),
            code,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn qubits_per_cell(&self) -> u32 {
        self.qubits_per_cell
    }

    pub fn raw(&self, cell: Cell) -> f64 {
        self.raw[cell.row * self.cols + cell.col]
    }

    pub fn code(&self, cell: Cell) -> u32 {
        self.code[cell.row * self.cols + cell.col]
    }

    /// Row-major raw values.
    pub fn raw_values(&self) -> &[f64] {
        &self.raw
    }

    /// Row-major codes.
    pub fn codes(&self) -> &[u32] {
        &self.code
    }

    /// Writes `row,col,raw,code` CSV in row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,raw,code\n");
        for row in 0..self.rows {
            for col in 0..self.cols {
                let cell = Cell::new(row, col);
                out.push_str(&format!(
                    "{row},{col},{:.6},{}\n",
                    self.raw(cell),
                    self.code(cell)
                ));
            }
        }
        out
    }
}

/// Summed influence of `obstacles` on `cell`. The obstacle's own cell gets
/// no contribution from itself.
fn influence(initial: f64, obstacles: &[Cell], cell: Cell) -> f64 {
    obstacles
        .iter()
        .map(|&o| match cell.manhattan(o) {
            0 => 0.0,
            d => initial * 0.5f64.powi((d - 1).min(i32::MAX as usize) as i32),
        })
        // fold from +0.0: an empty float `sum` yields -0.0
        .fold(0.0, |acc, v| acc + v)
}

/// Maps raw values of free cells onto `[0, top]` with round-half-up.
struct Normalizer {
    min: f64,
    max: f64,
    top: u32,
}

impl Normalizer {
    fn over(values: impl Iterator<Item = f64>, top: u32) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        Normalizer { min, max, top }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    fn code(&self, raw: f64) -> u32 {
        if !(self.max > self.min) {
            return 0;
        }
        let scaled = (raw - self.min) * f64::from(self.top) / (self.max - self.min);
        (scaled + 0.5).floor().clamp(0.0, f64::from(self.top)) as u32
    }
}

fn initial_cost(map: &GridMap) -> f64 {
    map.rows.max(map.cols) as f64
}

/// Global costmap of the whole grid.
pub fn compute_costmap(map: &GridMap) -> Costmap {
    let obstacles: Vec<Cell> = map.obstacles.iter().copied().collect();
    let initial = initial_cost(map);
    let raw: Vec<f64> = map
        .cells()
        .map(|c| influence(initial, &obstacles, c))
        .collect();
    let top = map.max_code();
    let norm = Normalizer::over(
        map.cells()
            .zip(&raw)
            .filter(|(c, _)| !map.is_obstacle(*c))
            .map(|(_, &v)| v),
        top,
    );
    let code = map
        .cells()
        .zip(&raw)
        .map(|(c, &v)| {
            if map.is_obstacle(c) {
                top
            } else {
                norm.code(v)
            }
        })
        .collect();
    Costmap {
        rows: map.rows,
        cols: map.cols,
        qubits_per_cell: map.qubits_per_cell,
        raw,
        code,
    }
}

/// Codes the robot sees along its own row and column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Perception {
    row_pattern: Vec<u32>,
    col_pattern: Vec<u32>,
    anchor_offset_row: usize,
    anchor_offset_col: usize,
}

impl Perception {
    /// `anchor_offset_row` indexes the robot cell inside `row_pattern`,
    /// `anchor_offset_col` inside `col_pattern`.
    pub fn new(
        row_pattern: Vec<u32>,
        col_pattern: Vec<u32>,
        anchor_offset_row: usize,
        anchor_offset_col: usize,
    ) -> Result<Self, MapError> {
        if row_pattern.is_empty() || col_pattern.is_empty() {
            return Err(MapError::InvalidPerception("empty pattern".into()));
        }
        if anchor_offset_row >= row_pattern.len() || anchor_offset_col >= col_pattern.len() {
            return Err(MapError::InvalidPerception(
                "anchor offset outside its pattern".into(),
            ));
        }
        if row_pattern[anchor_offset_row] != col_pattern[anchor_offset_col] {
            return Err(MapError::InvalidPerception(
                "row and column patterns disagree on the robot cell".into(),
            ));
        }
        Ok(Perception {
            row_pattern,
            col_pattern,
            anchor_offset_row,
            anchor_offset_col,
        })
    }

    /// Builds a perception from per-cell bit strings such as `["11", "10", "11"]`.
    pub fn from_bit_patterns(
        row: &[&str],
        col: &[&str],
        anchor_offset_row: usize,
        anchor_offset_col: usize,
    ) -> Result<Self, MapError> {
        let decode = |bits: &[&str]| -> Result<Vec<u32>, MapError> {
            bits.iter()
                .map(|b| {
                    u32::from_str_radix(b, 2).map_err(|_| {
                        MapError::InvalidPerception(format!("`{b}` is not a bit string"))
                    })
                })
                .collect()
        };
        Perception::new(
            decode(row)?,
            decode(col)?,
            anchor_offset_row,
            anchor_offset_col,
        )
    }

    pub fn row_pattern(&self) -> &[u32] {
        &self.row_pattern
    }

    pub fn col_pattern(&self) -> &[u32] {
        &self.col_pattern
    }

    pub fn anchor_offset_row(&self) -> usize {
        self.anchor_offset_row
    }

    pub fn anchor_offset_col(&self) -> usize {
        self.anchor_offset_col
    }
}

/// What the robot perceives from its current cell.
pub fn perceive(map: &GridMap) -> Result<Perception, MapError> {
    let robot = map.robot.ok_or(MapError::NoRobot)?;
    perceive_at(map, robot)
}

/// Perception from `at`, as if the robot stood there.
///
/// Only obstacles within `sensor_range` steps contribute, and codes are
/// normalized over the free cells inside that Manhattan ball, so anything
/// farther away cannot change the result.
pub fn perceive_at(map: &GridMap, at: Cell) -> Result<Perception, MapError> {
    if !map.contains(at) {
        return Err(MapError::OutOfBounds {
            cell: at,
            rows: map.rows,
            cols: map.cols,
        });
    }
    if map.is_obstacle(at) {
        return Err(MapError::RobotOnObstacle(at));
    }
    let range = map.sensor_range;
    let visible: Vec<Cell> = map
        .obstacles
        .iter()
        .copied()
        .filter(|o| o.manhattan(at) <= range)
        .collect();
    let initial = initial_cost(map);
    let top = map.max_code();
    let norm = Normalizer::over(
        map.free_cells()
            .filter(|c| c.manhattan(at) <= range)
            .map(|c| influence(initial, &visible, c)),
        top,
    );
    let code_of = |cell: Cell| {
        if map.is_obstacle(cell) {
            top
        } else {
            norm.code(influence(initial, &visible, cell))
        }
    };

    let col_lo = at.col.saturating_sub(range);
    let col_hi = (at.col + range).min(map.cols - 1);
    let row_lo = at.row.saturating_sub(range);
    let row_hi = (at.row + range).min(map.rows - 1);
    let row_pattern = (col_lo..=col_hi)
        .map(|c| code_of(Cell::new(at.row, c)))
        .collect();
    let col_pattern = (row_lo..=row_hi)
        .map(|r| code_of(Cell::new(r, at.col)))
        .collect();
    Ok(Perception {
        row_pattern,
        col_pattern,
        anchor_offset_row: at.col - col_lo,
        anchor_offset_col: at.row - row_lo,
    })
}

/// Full row `row` and full column `col` of the costmap as one digit per cell.
pub fn encode_strings(
    costmap: &Costmap,
    row: usize,
    col: usize,
) -> Result<(String, String), MapError> {
    if row >= costmap.rows || col >= costmap.cols {
        return Err(MapError::OutOfBounds {
            cell: Cell::new(row, col),
            rows: costmap.rows,
            cols: costmap.cols,
        });
    }
    let digit = |code: u32| char::from_digit(code, 36).ok_or(MapError::CodeNotDigit { code });
    let row_string = (0..costmap.cols)
        .map(|c| digit(costmap.code(Cell::new(row, c))))
        .collect::<Result<String, _>>()?;
    let col_string = (0..costmap.rows)
        .map(|r| digit(costmap.code(Cell::new(r, col))))
        .collect::<Result<String, _>>()?;
    Ok((row_string, col_string))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(text: &str) -> GridMap {
        GridMap::parse(text).unwrap()
    }

    #[test]
    fn parses_two_by_two() {
        let m = map("rows=2 cols=2 q=1 range=2\nR.\n.#\n");
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(
            m.obstacles().iter().copied().collect::<Vec<_>>(),
            vec![Cell::new(1, 1)]
        );
        assert_eq!(m.robot(), Some(Cell::new(0, 0)));
        assert_eq!(m.qubits_per_cell(), 1);
        assert_eq!(m.sensor_range(), 2);
    }

    #[test]
    fn parses_without_final_newline() {
        let m = map("rows=1 cols=2 q=1 range=1\n.#");
        assert!(m.is_obstacle(Cell::new(0, 1)));
    }

    #[test]
    fn parse_errors() {
        type Case = (&'static str, fn(&MapError) -> bool);
        let cases: &[Case] = &[
            ("rows=2 cols=2 q=1 range=2\nRR\n..\n", |e| {
                matches!(e, MapError::DuplicateRobot)
            }),
            ("rows=2 cols=2 q=1\nR.\n..\n", |e| {
                matches!(e, MapError::MalformedHeader(_))
            }),
            ("cols=2 rows=2 q=1 range=1\nR.\n..\n", |e| {
                matches!(e, MapError::MalformedHeader(_))
            }),
            ("rows=2 cols=2 q=1 range=1\nR.\n.\n", |e| {
                matches!(e, MapError::RaggedRow { line: 3, .. })
            }),
            ("rows=2 cols=2 q=1 range=1\nR.\n.x\n", |e| {
                matches!(e, MapError::UnknownCell { ch: 'x', .. })
            }),
            ("rows=2 cols=2 q=1 range=1\nR.\n", |e| {
                matches!(e, MapError::RowCount { .. })
            }),
            ("rows=2 cols=2 q=1 range=1\nR. \n..\n", |e| {
                matches!(e, MapError::TrailingWhitespace { .. })
            }),
            ("rows=2 cols=2 q=1 range=1\r\nR.\n..\n", |e| {
                matches!(e, MapError::MalformedHeader(_))
            }),
            ("rows=0 cols=2 q=1 range=1\n", |e| {
                matches!(e, MapError::ZeroDimension { .. })
            }),
        ];
        for (text, check) in cases {
            let err = GridMap::parse(text).unwrap_err();
            assert!(check(&err), "{text:?} gave {err:?}");
        }
    }

    #[test]
    fn robot_on_obstacle_rejected() {
        let err = GridMap::new(2, 2, [Cell::new(0, 0)], Some(Cell::new(0, 0)), 1, 1).unwrap_err();
        assert_eq!(err, MapError::RobotOnObstacle(Cell::new(0, 0)));
    }

    #[test]
    fn scalability_grid_parses() {
        let m = map("rows=4 cols=4 q=1 range=1\n....\n....\n.#..\n....\n");
        assert_eq!(m.obstacles().len(), 1);
        assert!(m.is_obstacle(Cell::new(2, 1)));
        assert_eq!(m.robot(), None);
    }

    #[test]
    fn empty_map_costmap_is_zero() {
        let m = map("rows=3 cols=4 q=2 range=1\n....\n.R..\n....\n");
        let cm = compute_costmap(&m);
        assert!(cm.raw_values().iter().all(|&v| v == 0.0));
        assert!(cm.codes().iter().all(|&c| c == 0));
        assert!(
            !cm.to_csv().contains('-'),
            "negative zero leaked into the CSV"
        );
    }

    #[test]
    fn center_obstacle_costmap() {
        let m = map("rows=3 cols=3 q=2 range=1\n...\n.#.\n...\n");
        let cm = compute_costmap(&m);
        let raw: Vec<f64> = cm.raw_values().to_vec();
        assert_eq!(raw, vec![1.5, 3.0, 1.5, 3.0, 0.0, 3.0, 1.5, 3.0, 1.5]);
        assert_eq!(cm.codes(), &[0, 3, 0, 3, 3, 3, 0, 3, 0]);
    }

    #[test]
    fn obstacles_take_max_code() {
        let m = map("rows=3 cols=5 q=3 range=1\n#...#\n..#..\n.#...\n");
        let cm = compute_costmap(&m);
        for &o in m.obstacles() {
            assert_eq!(cm.code(o), 7);
        }
    }

    #[test]
    fn perceive_without_robot_fails() {
        let m = map("rows=2 cols=2 q=1 range=1\n..\n.#\n");
        assert_eq!(perceive(&m), Err(MapError::NoRobot));
    }

    #[test]
    fn perceive_empty_neighbourhood() {
        // Obstacle 4 steps away from a range-2 robot.
        let m = map("rows=3 cols=5 q=2 range=2\nR....\n.....\n....#\n");
        let p = perceive(&m).unwrap();
        assert_eq!(p.row_pattern(), &[0, 0, 0]);
        assert_eq!(p.col_pattern(), &[0, 0, 0]);
        assert_eq!((p.anchor_offset_row(), p.anchor_offset_col()), (0, 0));
    }

    #[test]
    fn perceive_adjacent_obstacle_hand_evaluated() {
        // Robot (1,1), obstacle (1,2), range 2, n = 3.
        // Free cells within 2 steps and their raw influence 3 / 2^(d-1):
        //   (0,1) d=2 -> 1.5   (1,0) d=2 -> 1.5   (1,1) d=1 -> 3
        //   (2,1) d=2 -> 1.5   (0,0) d=3 -> 0.75  (0,2) d=1 -> 3
        //   (2,0) d=3 -> 0.75  (2,2) d=1 -> 3
        // min 0.75, max 3, 3 levels: 1.5 -> round(1.0) = 1, 3 -> 3.
        let m = map("rows=3 cols=3 q=2 range=2\n...\n.R#\n...\n");
        let p = perceive(&m).unwrap();
        assert_eq!(p.row_pattern(), &[1, 3, 3]);
        assert_eq!(p.col_pattern(), &[1, 3, 1]);
        assert_eq!((p.anchor_offset_row(), p.anchor_offset_col()), (1, 1));
    }

    #[test]
    fn bit_pattern_perception() {
        let p =
            Perception::from_bit_patterns(&["11", "10", "11"], &["11", "10", "10"], 1, 1).unwrap();
        assert_eq!(p.row_pattern(), &[3, 2, 3]);
        assert_eq!(p.col_pattern(), &[3, 2, 2]);
    }

    #[test]
    fn perception_validation() {
        assert!(Perception::new(vec![], vec![1], 0, 0).is_err());
        assert!(Perception::new(vec![1], vec![1], 1, 0).is_err());
        assert!(Perception::new(vec![1, 0], vec![1], 1, 0).is_err());
    }

    #[test]
    fn encode_single_cell() {
        let m = map("rows=1 cols=1 q=1 range=1\n.\n");
        let cm = compute_costmap(&m);
        assert_eq!(encode_strings(&cm, 0, 0).unwrap(), ("0".into(), "0".into()));
        assert!(encode_strings(&cm, 1, 0).is_err());
    }

    #[test]
    fn encode_lengths() {
        let m = map("rows=3 cols=5 q=2 range=1\n#....\n..#..\n....#\n");
        let cm = compute_costmap(&m);
        let (r, c) = encode_strings(&cm, 1, 3).unwrap();
        assert_eq!((r.len(), c.len()), (5, 3));
        assert_eq!(&r[2..3], "3");
    }

    #[test]
    fn csv_layout() {
        let m = map("rows=1 cols=2 q=1 range=1\n.#\n");
        let csv = compute_costmap(&m).to_csv();
        assert_eq!(csv, "row,col,raw,code\n0,0,2.000000,0\n0,1,0.000000,1\n");
    }

    #[test]
    fn occupancy_image() {
        let m = map("rows=2 cols=2 q=2 range=1\n..\n.#\n");
        assert_eq!(Costmap::occupancy(&m).codes(), &[0, 0, 0, 3]);
    }
}
