/// Integer location `(x, y)` on a feature map; `x` is the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Row-major index into a map of the given width.
    #[inline]
    pub const fn index(self, width: usize) -> usize {
        self.y * width + self.x
    }

    #[inline]
    pub const fn from_index(index: usize, width: usize) -> Self {
        Self { x: index % width, y: index / width }
    }
}
