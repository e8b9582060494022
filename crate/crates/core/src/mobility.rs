//! Random waypoint mobility.

use rand::Rng;

use crate::engine::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Area {
    pub width_m: f64,
    pub height_m: f64,
}

impl Area {
    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Position {
        let x = rng.random::<f64>() * self.width_m;
        let y = rng.random::<f64>() * self.height_m;
        Position::new(x, y)
    }
}

/// One node's current leg: straight line from `origin` (left at `depart`)
/// to `waypoint` (reached at `arrive`), then stationary until the next leg.
#[derive(Clone, Debug, PartialEq)]
pub struct WaypointState {
    pub origin: Position,
    pub waypoint: Position,
    pub depart: SimTime,
    pub arrive: SimTime,
    pub speed: f64,
    pub pause_until: Option<SimTime>,
}

impl WaypointState {
    pub fn stationary(at: Position) -> Self {
        WaypointState {
            origin: at,
            waypoint: at,
            depart: SimTime::ZERO,
            arrive: SimTime::ZERO,
            speed: 0.0,
            pause_until: None,
        }
    }

    /// Linear interpolation along the leg; the endpoint once arrived.
    pub fn position_at(&self, t: SimTime) -> Position {
        if t >= self.arrive {
            return self.waypoint;
        }
        if t <= self.depart {
            return self.origin;
        }
        let f = (t - self.depart).as_nanos() as f64 / (self.arrive - self.depart).as_nanos() as f64;
        Position::new(
            self.origin.x + f * (self.waypoint.x - self.origin.x),
            self.origin.y + f * (self.waypoint.y - self.origin.y),
        )
    }

    /// Starts a new leg at `now` from the current position toward `target`
    /// at `speed`. Returns the arrival time.
    pub fn start_leg(&mut self, now: SimTime, target: Position, speed: f64) -> SimTime {
        assert!(speed > 0.0, "leg speed must be positive");
        let from = self.position_at(now);
        let travel = SimTime::from_secs(from.distance(target) / speed);
        self.origin = from;
        self.waypoint = target;
        self.depart = now;
        self.arrive = now + travel;
        self.speed = speed;
        self.pause_until = None;
        self.arrive
    }

    /// Draws the next waypoint uniformly over `area` and starts the leg.
    pub fn next_waypoint<R: Rng>(
        &mut self,
        now: SimTime,
        area: &Area,
        speed: f64,
        rng: &mut R,
    ) -> SimTime {
        let target = area.sample(rng);
        self.start_leg(now, target, speed)
    }

    /// Marks arrival and returns when the pause ends.
    pub fn arrive_and_pause(&mut self, now: SimTime, pause: SimTime) -> SimTime {
        self.origin = self.waypoint;
        self.depart = now;
        self.arrive = now;
        let until = now + pause;
        self.pause_until = Some(until);
        until
    }
}
