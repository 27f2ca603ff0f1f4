/// Position and velocity of an object in the range-depth plane.
///
/// Range and depth are in meters, rates in meters per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KinematicState {
    pub range: f64,
    pub depth: f64,
    pub range_rate: f64,
    pub depth_rate: f64,
}

impl KinematicState {
    pub const fn new(range: f64, depth: f64, range_rate: f64, depth_rate: f64) -> Self {
        Self {
            range,
            depth,
            range_rate,
            depth_rate,
        }
    }

    pub const fn at_rest(range: f64, depth: f64) -> Self {
        Self::new(range, depth, 0.0, 0.0)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.range, self.depth, self.range_rate, self.depth_rate]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.range, self.depth]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}
