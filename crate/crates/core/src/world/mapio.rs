//! Text map format.
//!
//! ```text
//! ogrid v1 <width> <height> <resolution> <origin_x> <origin_y>
//! <height lines of width chars: '.' free, '#' occupied, '?' unknown>
//! ```
//!
//! The first raster line is the top row (`row = height - 1`) so files read
//! like the map they describe. The log-odds layer is not stored; loading
//! saturates known cells and leaves unknown cells at zero.

use std::fmt::Write as _;
use std::path::Path;

use super::{Cell, CellState, GridGeometry, OccupancyGrid, WorldError};
use crate::kinematics::Point;
use crate::scalar::Real;

const MAGIC: &str = "ogrid";
const VERSION: &str = "v1";

fn parse_err(line: usize, msg: impl Into<String>) -> WorldError {
    WorldError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_map<T: Real>(text: &str) -> Result<OccupancyGrid<T>, WorldError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty map"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 7 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(parse_err(
            1,
            "expected `ogrid v1 <width> <height> <resolution> <origin_x> <origin_y>`",
        ));
    }
    let int = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(1, format!("bad {what}: {s}")))
    };
    let real = |s: &str, what: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(T::lit)
            .ok_or_else(|| parse_err(1, format!("bad {what}: {s}")))
    };
    let width = int(fields[2], "width")?;
    let height = int(fields[3], "height")?;
    let resolution = real(fields[4], "resolution")?;
    if !(resolution > T::zero()) || width == 0 || height == 0 {
        return Err(parse_err(1, "width, height and resolution must be positive"));
    }
    let origin = Point::new(real(fields[5], "origin_x")?, real(fields[6], "origin_y")?);
    let mut grid = OccupancyGrid::new_unknown(GridGeometry::new(width, height, resolution, origin));

    let mut seen = 0;
    for (lineno, line) in lines {
        if seen == height {
            return Err(parse_err(lineno + 1, "more raster lines than height"));
        }
        let row = height - 1 - seen;
        let chars: Vec<char> = line.trim_end().chars().collect();
        if chars.len() != width {
            return Err(parse_err(
                lineno + 1,
                format!("expected {width} cells, found {}", chars.len()),
            ));
        }
        for (col, ch) in chars.into_iter().enumerate() {
            let state = CellState::from_char(ch)
                .ok_or_else(|| parse_err(lineno + 1, format!("unknown cell character {ch:?}")))?;
            grid.set_state(Cell::new(col, row), state);
        }
        seen += 1;
    }
    if seen != height {
        return Err(parse_err(0, format!("expected {height} raster lines, found {seen}")));
    }
    Ok(grid)
}

pub fn format_map<T: Real>(grid: &OccupancyGrid<T>) -> String {
    let g = grid.geometry();
    let mut out = String::with_capacity((g.width + 1) * (g.height + 1) + 64);
    let _ = writeln!(
        out,
        "{MAGIC} {VERSION} {} {} {} {} {}",
        g.width, g.height, g.resolution, g.origin.x, g.origin.y
    );
    for row in (0..g.height).rev() {
        for col in 0..g.width {
            out.push(grid.state(Cell::new(col, row)).as_char());
        }
        out.push('\n');
    }
    out
}

pub fn load_map<T: Real>(path: impl AsRef<Path>) -> Result<OccupancyGrid<T>, WorldError> {
    parse_map(&std::fs::read_to_string(path)?)
}

pub fn save_map<T: Real>(grid: &OccupancyGrid<T>, path: impl AsRef<Path>) -> Result<(), WorldError> {
    std::fs::write(path, format_map(grid))?;
    Ok(())
}
