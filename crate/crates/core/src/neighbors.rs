//! Bucket grid for Euclidean nearest-neighbour and fixed-radius queries.

pub struct GridIndex<'a> {
    locs: &'a [(f64, f64)],
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    pub fn new(locs: &'a [(f64, f64)]) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in locs {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        if locs.is_empty() {
            (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
        }
        let span = (x1 - x0).max(y1 - y0);
        let cell = if span > 0.0 {
            let area = (x1 - x0).max(span * 1e-3) * (y1 - y0).max(span * 1e-3);
            // about two points per cell
            (2.0 * area / locs.len().max(1) as f64).sqrt().max(span / 4096.0)
        } else {
            1.0
        };
        let nx = (((x1 - x0) / cell).floor() as usize + 1).min(4096);
        let ny = (((y1 - y0) / cell).floor() as usize + 1).min(4096);
        let cell = cell.max((x1 - x0) / nx as f64).max((y1 - y0) / ny as f64) * (1.0 + 1e-12);

        let mut counts = vec![0usize; nx * ny + 1];
        let key = |x: f64, y: f64| -> usize {
            let cx = (((x - x0) / cell) as usize).min(nx - 1);
            let cy = (((y - y0) / cell) as usize).min(ny - 1);
            cy * nx + cx
        };
        for &(x, y) in locs {
            counts[key(x, y) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0; locs.len()];
        for (i, &(x, y)) in locs.iter().enumerate() {
            let k = key(x, y);
            items[fill[k]] = i;
            fill[k] += 1;
        }
        GridIndex {
            locs,
            x0,
            y0,
            cell,
            nx,
            ny,
            starts: counts,
            items,
        }
    }

    fn cell_of(&self, x: f64, y: f64) -> (isize, isize) {
        (
            ((x - self.x0) / self.cell).floor().clamp(-1e9, 1e9) as isize,
            ((y - self.y0) / self.cell).floor().clamp(-1e9, 1e9) as isize,
        )
    }

    fn bucket(&self, cx: isize, cy: isize) -> &[usize] {
        if cx < 0 || cy < 0 || cx >= self.nx as isize || cy >= self.ny as isize {
            return &[];
        }
        let k = cy as usize * self.nx + cx as usize;
        &self.items[self.starts[k]..self.starts[k + 1]]
    }

    /// Nearest indexed point to `q`, skipping index `skip`.
    pub fn nearest_excluding(&self, q: (f64, f64), skip: usize) -> Option<(usize, f64)> {
        if self.locs.len() <= usize::from(skip < self.locs.len()) {
            return None;
        }
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let fx = ((q.0 - self.x0) / self.cell).floor().clamp(-1e9, 1e9) as isize;
        let fy = ((q.1 - self.y0) / self.cell).floor().clamp(-1e9, 1e9) as isize;
        // rings closer than the grid itself are empty
        let gap = (-fx).max(fx - nx + 1).max(-fy).max(fy - ny + 1).max(0);
        let last = (fx.abs() + nx).max(fy.abs() + ny) + 1;
        let mut best = (usize::MAX, f64::INFINITY);
        let visit = |cx: isize, cy: isize, best: &mut (usize, f64)| {
            for &i in self.bucket(cx, cy) {
                if i == skip {
                    continue;
                }
                let p = self.locs[i];
                let d = (p.0 - q.0).hypot(p.1 - q.1);
                if d < best.1 || (d == best.1 && i < best.0) {
                    *best = (i, d);
                }
            }
        };
        for ring in gap..=last {
            // any point in ring k is at least (k-1)*cell away
            if best.1.is_finite() && ((ring - 1) as f64) * self.cell > best.1 {
                break;
            }
            let (y_lo, y_hi) = ((fy - ring).max(0), (fy + ring).min(ny - 1));
            let (x_lo, x_hi) = ((fx - ring).max(0), (fx + ring).min(nx - 1));
            for cy in y_lo..=y_hi {
                if cy == fy - ring || cy == fy + ring {
                    for cx in x_lo..=x_hi {
                        visit(cx, cy, &mut best);
                    }
                } else {
                    visit(fx - ring, cy, &mut best);
                    if ring > 0 {
                        visit(fx + ring, cy, &mut best);
                    }
                }
            }
        }
        (best.0 != usize::MAX).then_some(best)
    }

    pub fn nearest(&self, q: (f64, f64)) -> Option<(usize, f64)> {
        self.nearest_excluding(q, usize::MAX)
    }

    /// Calls `f(i, d)` for every indexed point within `radius` of `q`.
    pub fn within(&self, q: (f64, f64), radius: f64, mut f: impl FnMut(usize, f64)) {
        let (cx0, cy0) = self.cell_of(q.0 - radius, q.1 - radius);
        let (cx1, cy1) = self.cell_of(q.0 + radius, q.1 + radius);
        if cx1 < 0 || cy1 < 0 {
            return;
        }
        let cx0 = cx0.max(0);
        let cy0 = cy0.max(0);
        let cx1 = cx1.min(self.nx as isize - 1);
        let cy1 = cy1.min(self.ny as isize - 1);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                for &i in self.bucket(cx, cy) {
                    let p = self.locs[i];
                    let d = (p.0 - q.0).hypot(p.1 - q.1);
                    if d <= radius {
                        f(i, d);
                    }
                }
            }
        }
    }
}
