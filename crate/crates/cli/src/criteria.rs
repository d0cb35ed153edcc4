//! Acceptance criteria and the experiment each one is judged on.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub experiment: &'static str,
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, title: "deterministic kernel suite", experiment: "kernel_checks" },
    Criterion { id: 2, title: "noise certification", experiment: "noise" },
    Criterion { id: 3, title: "beta = 0 exactness", experiment: "exactness" },
    Criterion { id: 4, title: "scheme cross-validation", experiment: "schemes" },
    Criterion { id: 5, title: "moment boundedness", experiment: "moments" },
    Criterion { id: 6, title: "stationarity in law", experiment: "stationarity" },
    Criterion { id: 7, title: "coupled-pair decay", experiment: "coupling" },
    Criterion { id: 8, title: "first-chaos variance", experiment: "first_chaos" },
    Criterion { id: 9, title: "Edwards-Wilkinson limit", experiment: "ew" },
    Criterion { id: 10, title: "noise-response profile", experiment: "probe" },
    Criterion { id: 11, title: "structure-function slope", experiment: "structure" },
];
