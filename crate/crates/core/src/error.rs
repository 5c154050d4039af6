use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible inversion vector: entry {value} at index {index} exceeds {index}-1")]
    InadmissibleInversionVector { index: usize, value: u32 },

    #[error("enumeration over S_{n} refused (max n = {max})")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error(
        "dominating rate violated at state {state}, time {time}: rate {rate} > bound {bound}"
    )]
    DominatorViolation {
        state: u64,
        time: f64,
        rate: f64,
        bound: f64,
    },

    #[error("birth path exceeded {cap} events before the horizon (explosion guard)")]
    ExplosionGuard { cap: u64 },

    #[error("query time {query} exceeds simulated horizon {horizon}")]
    HorizonExceeded { query: f64, horizon: f64 },

    #[error("window extension cap of {cap} indices reached before certification")]
    WindowExhausted { cap: usize },

    #[error("jump at time {time} is not a single transposition: {detail}")]
    TranspositionCheck { time: f64, detail: String },

    #[error("coupling acceptance ratio {ratio} > 1 at element {element}, jump {jump}")]
    CouplingRatio {
        element: i64,
        jump: usize,
        ratio: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
